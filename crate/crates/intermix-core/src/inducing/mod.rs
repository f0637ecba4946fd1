//! Gate region around the fixed point, first returns, passages, tails and cells.

mod cells;
mod chart;
mod montecarlo;
mod passage;
mod quadrature;

pub use cells::{cell_geometry, cell_series, cell_sides, crossing_index, symcover_check, CellGeometry, GateSide};
pub use chart::{stable_crossing, EntryChart, Side, SliverChart};
pub use montecarlo::tail_by_mc;
pub use passage::{
    passage_diagnostics, passage_diagnostics_multi, sample_passages, sample_passages_sweep, PassageDiagnostics, PassageSampling, Region,
};
pub use quadrature::{tail_by_quadrature, tail_by_quadrature_partial, tail_left_side, QuadratureOptions, QuadratureScheme};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::invariant_geometry::{local_manifold_graph, GeometryError, ManifoldKind, ManifoldPolyline, Quadrant, Rect};
use crate::numerics::interp;
use crate::torus_map::{apply, MapSpec, TorusPoint};

#[derive(Debug, Error, PartialEq)]
pub enum InducingError {
    #[error("no return within {n_max} steps")]
    TimeoutExceeded { n_max: u64 },
    #[error("orbit left the gate before entering either passage region")]
    NoMembership,
    #[error("cell budget of {cap} exceeded")]
    BudgetExceeded { cap: u64 },
    #[error("cell {k} cannot be resolved at working precision")]
    Unresolvable { k: u64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateShape {
    Square,
    Curved,
}

/// Manifold-sided boundary tabulated on a common abscissa grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvedBoundary {
    pub xs: Vec<f64>,
    pub stable_y: Vec<f64>,
    pub unstable_y: Vec<f64>,
    pub stable: [ManifoldPolyline; 2],
    pub unstable: [ManifoldPolyline; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateRegion {
    pub shape: GateShape,
    pub delta: f64,
    pub boundary: Option<CurvedBoundary>,
}

impl GateRegion {
    pub fn square(delta: f64) -> Result<Self, InducingError> {
        if !(delta > 0.0 && delta <= 0.3) {
            return Err(InducingError::InvalidInput(format!(
                "square gate needs 0 < delta <= 0.3, got {delta}"
            )));
        }
        Ok(Self {
            shape: GateShape::Square,
            delta,
            boundary: None,
        })
    }

    /// `{|x| <= 2 delta, |y - stable(x)| <= delta, |y - unstable(x)| <= delta}`.
    pub fn curved(spec: &MapSpec, delta: f64, step: f64) -> Result<Self, InducingError> {
        if !(delta > 0.0 && 2.0 * delta <= 0.25) {
            return Err(InducingError::InvalidInput(format!(
                "curved gate needs 0 < delta <= 0.125, got {delta}"
            )));
        }
        let w = 2.0 * delta;
        let s4 = local_manifold_graph(spec, ManifoldKind::Stable, Quadrant::Q4, w, step)?;
        let s2 = local_manifold_graph(spec, ManifoldKind::Stable, Quadrant::Q2, w, step)?;
        let u1 = local_manifold_graph(spec, ManifoldKind::Unstable, Quadrant::Q1, w, step)?;
        let u3 = local_manifold_graph(spec, ManifoldKind::Unstable, Quadrant::Q3, w, step)?;
        let mut xs = Vec::new();
        let mut sy = Vec::new();
        let mut uy = Vec::new();
        // Q2 and Q3 branches run outward from the origin; reverse them to ascending x.
        for (ps, pu) in s2.vertices.iter().rev().zip(u3.vertices.iter().rev()) {
            xs.push(ps.x);
            sy.push(ps.y);
            uy.push(pu.y);
        }
        for (ps, pu) in s4.vertices.iter().zip(u1.vertices.iter()).skip(1) {
            xs.push(ps.x);
            sy.push(ps.y);
            uy.push(pu.y);
        }
        let top = sy.iter().chain(uy.iter()).fold(f64::NEG_INFINITY, |a, &b| a.max(b)) + delta;
        let bottom = sy.iter().chain(uy.iter()).fold(f64::INFINITY, |a, &b| a.min(b)) - delta;
        if top > 0.3 || bottom < -0.3 {
            return Err(InducingError::InvalidInput("curved gate exceeds [-0.3, 0.3]^2".into()));
        }
        Ok(Self {
            shape: GateShape::Curved,
            delta,
            boundary: Some(CurvedBoundary {
                xs,
                stable_y: sy,
                unstable_y: uy,
                stable: [s2, s4],
                unstable: [u1, u3],
            }),
        })
    }

    #[inline]
    pub fn contains(&self, p: TorusPoint) -> bool {
        match &self.boundary {
            None => p.x.abs() <= self.delta && p.y.abs() <= self.delta,
            Some(b) => {
                if p.x.abs() > 2.0 * self.delta {
                    return false;
                }
                let gs = interp(&b.xs, &b.stable_y, p.x);
                let gu = interp(&b.xs, &b.unstable_y, p.x);
                (p.y - gs).abs() <= self.delta && (p.y - gu).abs() <= self.delta
            }
        }
    }

    /// Bounding box of the gate.
    pub fn bbox(&self) -> Rect {
        match &self.boundary {
            None => Rect {
                x0: -self.delta,
                x1: self.delta,
                y0: -self.delta,
                y1: self.delta,
            },
            Some(b) => {
                let lo = b.stable_y.iter().chain(&b.unstable_y).fold(f64::INFINITY, |a, &v| a.min(v));
                let hi = b.stable_y.iter().chain(&b.unstable_y).fold(f64::NEG_INFINITY, |a, &v| a.max(v));
                Rect {
                    x0: -2.0 * self.delta,
                    x1: 2.0 * self.delta,
                    y0: lo - self.delta,
                    y1: hi + self.delta,
                }
            }
        }
    }

    /// Bounding box of `T^{-1} Q`, which contains `W = T^{-1} Q \ Q`.
    pub fn entry_bbox(&self, spec: &MapSpec) -> Rect {
        let b = self.bbox();
        let x0 = b.x0 - b.y1;
        let x1 = b.x1 - b.y0;
        Rect {
            x0,
            x1,
            y0: b.y0 - spec.h(x1),
            y1: b.y1 - spec.h(x0),
        }
    }

    /// `p` lies in `W = T^{-1} Q \ Q`.
    pub fn in_entry_set(&self, spec: &MapSpec, p: TorusPoint) -> bool {
        !self.contains(p) && self.contains(apply(spec, p))
    }
}

pub fn in_q(gate: &GateRegion, p: TorusPoint) -> bool {
    gate.contains(p)
}

/// Steps `m >= 1` until `T^m q` leaves the gate, for `q` inside it. `None` past `cap`.
#[inline]
pub(crate) fn exit_steps(spec: &MapSpec, gate: &GateRegion, q: TorusPoint, cap: u64) -> Option<u64> {
    let mut z = q;
    if gate.boundary.is_none() {
        let d = gate.delta;
        let (mut x, mut y) = (z.x, z.y);
        for m in 1..=cap {
            y += spec.h(x);
            x += y;
            if x.abs() > d || y.abs() > d {
                return Some(m);
            }
        }
        return None;
    }
    for m in 1..=cap {
        z = apply(spec, z);
        if !gate.contains(z) {
            return Some(m);
        }
    }
    None
}

/// First return time of `p` (outside the gate) to the complement of the gate.
pub fn first_return(spec: &MapSpec, gate: &GateRegion, p: TorusPoint, n_max: u64) -> Result<u64, InducingError> {
    if gate.contains(p) {
        return Err(InducingError::InvalidInput("point lies inside the gate".into()));
    }
    if n_max == 0 {
        return Err(InducingError::InvalidInput("n_max must be positive".into()));
    }
    let q = apply(spec, p);
    if !gate.contains(q) {
        return Ok(1);
    }
    match exit_steps(spec, gate, q, n_max - 1) {
        Some(m) => Ok(1 + m),
        None => Err(InducingError::TimeoutExceeded { n_max }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailMethod {
    Quadrature,
    Montecarlo,
}

impl TailMethod {
    pub fn tag(self) -> &'static str {
        match self {
            TailMethod::Quadrature => "quadrature",
            TailMethod::Montecarlo => "montecarlo",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub measure: f64,
    pub error: f64,
}

/// Measures of `{phi = N}` on the entry set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailTable {
    pub rows: BTreeMap<u64, TailRow>,
    pub method: TailMethod,
    pub n_max: u64,
    /// Mass attributed to the table, including overflow and unresolved mass.
    pub total_mass: f64,
    /// Mass with `phi > n_max`.
    pub overflow: f64,
    /// Area left unresolved by refinement.
    pub unresolved: f64,
    /// Set when a budget stopped the computation early.
    pub partial: bool,
}

impl TailTable {
    pub fn measure(&self, n: u64) -> f64 {
        self.rows.get(&n).map_or(0.0, |r| r.measure)
    }

    pub fn error(&self, n: u64) -> f64 {
        self.rows.get(&n).map_or(0.0, |r| r.error)
    }

    /// `leb(phi > n)`, counting overflow mass.
    pub fn tail(&self, n: u64) -> f64 {
        self.rows.range(n + 1..).map(|(_, r)| r.measure).sum::<f64>() + self.overflow
    }

    /// Error bound on [`TailTable::tail`].
    pub fn tail_error(&self, n: u64) -> f64 {
        self.rows.range(n + 1..).map(|(_, r)| r.error).sum::<f64>()
    }

    /// `sum_N (N - 1) leb(phi = N)`, which equals `leb(Q)` for the full entry set.
    pub fn flux(&self) -> f64 {
        self.rows.iter().map(|(&n, r)| (n as f64 - 1.0) * r.measure).sum::<f64>() + self.n_max as f64 * self.overflow
    }
}
