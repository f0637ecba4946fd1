//! Geometry of the cells `D_k` (entries spending exactly `k` steps before crossing an
//! axis), their images `C_k = T^k D_k` and the mirrored cells `C'_k = R1 C_k`.
//!
//! The unstable sides of `C_k` are `T^k(U ∩ {n = k})` and `T^{k-1}(U ∩ {n = k-1})`,
//! where `U` is the left side of the gate and `n` counts steps from the side.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::passage::Region;
use super::{GateRegion, InducingError};
use crate::numerics::{interp, polygon_area};
use crate::torus_map::{apply, apply_inverse, involution_r1, MapSpec, TorusPoint};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellGeometry {
    pub k: u64,
    pub v_extent: f64,
    pub h_extent: f64,
    pub area: f64,
    pub region: Region,
}

/// Left side `{x = x, y0 <= y <= y1}` of the gate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateSide {
    pub x: f64,
    pub y0: f64,
    pub y1: f64,
}

impl GateSide {
    pub fn left_of(gate: &GateRegion) -> Self {
        match &gate.boundary {
            None => Self {
                x: -gate.delta,
                y0: 0.0,
                y1: gate.delta,
            },
            Some(b) => {
                let x = -2.0 * gate.delta;
                let gs = interp(&b.xs, &b.stable_y, x);
                let gu = interp(&b.xs, &b.unstable_y, x);
                Self {
                    x,
                    y0: gs.max(gu) - gate.delta,
                    y1: gs.min(gu) + gate.delta,
                }
            }
        }
    }

    fn at(&self, s: f64) -> TorusPoint {
        TorusPoint::raw(self.x, self.y0 + (self.y1 - self.y0) * s)
    }
}

const STEP_CAP: u64 = 50_000_000;
const SIDE_POINTS: usize = 257;

/// Last index `j` (from `p` at `j = 0`) with `x_j <= 0` (fat) or `y_j >= 0` (thin),
/// provided the orbit leaves the quadrant on that region's side.
pub fn crossing_index(spec: &MapSpec, p: TorusPoint, region: Region) -> Option<u64> {
    let (mut x, mut y) = (p.x, p.y);
    for j in 0..STEP_CAP {
        y += spec.h(x);
        x += y;
        let fat_exit = x > 0.0;
        let thin_exit = y < 0.0;
        if fat_exit || thin_exit {
            return match (region, fat_exit) {
                (Region::Fat, true) => Some(j),
                (Region::Thin, false) => Some(j),
                _ => None,
            };
        }
    }
    None
}

fn split_point(spec: &MapSpec, side: &GateSide) -> f64 {
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..200 {
        let m = 0.5 * (lo + hi);
        if m <= lo || m >= hi {
            break;
        }
        if crossing_index(spec, side.at(m), Region::Fat).is_some() {
            hi = m;
        } else {
            lo = m;
        }
    }
    0.5 * (lo + hi)
}

/// Boundary parameter between `n >= k` (near the stable manifold) and `n < k`.
fn edge(spec: &MapSpec, side: &GateSide, region: Region, split: f64, k: u64) -> f64 {
    let (mut near, mut far) = match region {
        Region::Fat => (split, 1.0),
        Region::Thin => (split, 0.0),
    };
    for _ in 0..200 {
        let m = 0.5 * (near + far);
        if m == near || m == far {
            break;
        }
        match crossing_index(spec, side.at(m), region) {
            Some(n) if n < k => far = m,
            _ => near = m,
        }
    }
    far
}

fn image_side(spec: &MapSpec, side: &GateSide, s0: f64, s1: f64, k: u64) -> Vec<[f64; 2]> {
    let mut pts: Vec<[f64; 2]> = (0..SIDE_POINTS)
        .map(|i| {
            let s = s0 + (s1 - s0) * i as f64 / (SIDE_POINTS - 1) as f64;
            let mut z = side.at(s);
            for _ in 0..k {
                z = apply(spec, z);
            }
            [z.x, z.y]
        })
        .collect();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]));
    pts
}

/// The two unstable sides of `C_k`, each sorted by `x`.
pub fn cell_sides(spec: &MapSpec, side: &GateSide, region: Region, k: u64) -> Result<(Vec<[f64; 2]>, Vec<[f64; 2]>), InducingError> {
    if k < 2 {
        return Err(InducingError::InvalidInput("k must be at least 2".into()));
    }
    let split = split_point(spec, side);
    let e_k1 = edge(spec, side, region, split, k + 1);
    let e_k = edge(spec, side, region, split, k);
    let e_km1 = edge(spec, side, region, split, k - 1);
    if e_k1 == e_k || e_k == e_km1 {
        return Err(InducingError::Unresolvable { k });
    }
    let a = image_side(spec, side, e_k1, e_k, k);
    let b = image_side(spec, side, e_k, e_km1, k - 1);
    Ok((a, b))
}

fn geometry_from_sides(spec: &MapSpec, a: &[[f64; 2]], b: &[[f64; 2]], k: u64, region: Region) -> Result<CellGeometry, InducingError> {
    let x0 = a[0][0].max(b[0][0]);
    let x1 = a[a.len() - 1][0].min(b[b.len() - 1][0]);
    if !(x1 > x0) {
        return Err(InducingError::Unresolvable { k });
    }
    let (ax, ay): (Vec<f64>, Vec<f64>) = a.iter().map(|p| (p[0], p[1])).unzip();
    let (bx, by): (Vec<f64>, Vec<f64>) = b.iter().map(|p| (p[0], p[1])).unzip();
    let v_extent = (0..=64)
        .map(|i| {
            let x = x0 + (x1 - x0) * i as f64 / 64.0;
            (interp(&ax, &ay, x) - interp(&bx, &by, x)).abs()
        })
        .fold(0.0, f64::max);
    let mirrored: Vec<f64> = a
        .iter()
        .chain(b.iter())
        .map(|p| involution_r1(spec, TorusPoint::raw(p[0], p[1])).x)
        .collect();
    let h_extent = mirrored.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v)) - mirrored.iter().fold(f64::INFINITY, |m, &v| m.min(v));
    let mut poly: Vec<[f64; 2]> = a.to_vec();
    poly.extend(b.iter().rev());
    Ok(CellGeometry {
        k,
        v_extent,
        h_extent,
        area: polygon_area(&poly),
        region,
    })
}

/// Extents and area of `C_k`; the horizontal extent is measured on `C'_k = R1 C_k`.
pub fn cell_geometry(spec: &MapSpec, side: &GateSide, region: Region, k: u64) -> Result<CellGeometry, InducingError> {
    let (a, b) = cell_sides(spec, side, region, k)?;
    geometry_from_sides(spec, &a, &b, k, region)
}

/// [`cell_geometry`] for several `k`, in order.
pub fn cell_series(spec: &MapSpec, side: &GateSide, region: Region, ks: &[u64]) -> Vec<Result<CellGeometry, InducingError>> {
    ks.par_iter().map(|&k| cell_geometry(spec, side, region, k)).collect()
}

/// Smallest `k_hat` with `T C_k` inside `C'_{k-k_hat} ∪ ... ∪ C'_{k+k_hat}`, over points
/// sampled on and between the sides of `C_k`. A point `z` is assigned to `C'_j` where
/// `j` is the crossing index of the entry point at which the backward orbit of `R1 z`
/// leaves the gate. Entry points on the right are reduced by `-id` first.
pub fn symcover_check(spec: &MapSpec, gate: &GateRegion, side: &GateSide, region: Region, k: u64) -> Result<u64, InducingError> {
    let (a, b) = cell_sides(spec, side, region, k)?;
    let x0 = a[0][0].max(b[0][0]);
    let x1 = a[a.len() - 1][0].min(b[b.len() - 1][0]);
    let (ax, ay): (Vec<f64>, Vec<f64>) = a.iter().map(|p| (p[0], p[1])).unzip();
    let (bx, by): (Vec<f64>, Vec<f64>) = b.iter().map(|p| (p[0], p[1])).unzip();
    let mut worst = 0u64;
    let mut covered = 0usize;
    let cap = 4 * k + 1000;
    for i in 1..16 {
        let x = x0 + (x1 - x0) * i as f64 / 16.0;
        let (ya, yb) = (interp(&ax, &ay, x), interp(&bx, &by, x));
        for f in [0.1, 0.3, 0.5, 0.7, 0.9] {
            let z = TorusPoint::raw(x, ya + f * (yb - ya));
            let mut w = involution_r1(spec, apply(spec, z));
            let mut j = 0u64;
            while gate.contains(w) && j < cap {
                w = apply_inverse(spec, w);
                j += 1;
            }
            if gate.contains(w) || !gate.in_entry_set(spec, w) {
                continue;
            }
            let base = if w.x > 0.0 { w.neg() } else { w };
            if let Some(n) = crossing_index(spec, base, region) {
                covered += 1;
                worst = worst.max(n.abs_diff(k));
            }
        }
    }
    if covered == 0 {
        return Err(InducingError::Unresolvable { k });
    }
    Ok(worst)
}
