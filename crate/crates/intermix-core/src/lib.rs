//! Numerical laboratory for an area-preserving torus map with a neutral fixed point:
//! the map and its symmetries, local invariant manifolds, return times to the
//! complement of a gate around the fixed point, and correlation statistics.

pub mod inducing;
pub mod invariant_geometry;
pub mod numerics;
pub mod statistics;
pub mod torus_map;

pub use torus_map::{MapSpec, TorusPoint};
