//! Local stable and unstable manifolds of the fixed point, unstable slopes and cone bounds.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{strata, stream_rng};
use crate::torus_map::{apply, apply_inverse, involution_r1, MapSpec, TorusPoint};

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("shooting bracket failed to classify at x0 = {x0}")]
    BracketFailure { x0: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("polyline exceeded the vertex cap of {cap}")]
    RefinementBlowup { cap: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShootResult {
    pub x0: f64,
    pub y0: f64,
    pub residual_b: f64,
    pub steps_checked: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ManifoldKind {
    Stable,
    Unstable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Quadrant {
    Q1,
    Q2,
    Q3,
    Q4,
}

impl Quadrant {
    pub fn of(p: TorusPoint) -> Self {
        match (p.x >= 0.0, p.y >= 0.0) {
            (true, true) => Quadrant::Q1,
            (false, true) => Quadrant::Q2,
            (false, false) => Quadrant::Q3,
            (true, false) => Quadrant::Q4,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Quadrant::Q1 => "Q1",
            Quadrant::Q2 => "Q2",
            Quadrant::Q3 => "Q3",
            Quadrant::Q4 => "Q4",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifoldPolyline {
    pub vertices: Vec<TorusPoint>,
    pub kind: ManifoldKind,
    pub branch: Quadrant,
    pub max_seg_len: f64,
}

impl ManifoldPolyline {
    pub fn max_chord(&self) -> f64 {
        self.vertices.windows(2).map(|w| w[0].dist(w[1])).fold(0.0, f64::max)
    }

    pub fn map_vertices(&self, f: impl Fn(TorusPoint) -> TorusPoint) -> Vec<TorusPoint> {
        self.vertices.iter().map(|&p| f(p)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeStats {
    pub k_minus_hat: f64,
    pub k_plus_hat: f64,
    pub samples: u64,
    pub scale: f64,
    pub k_back_max: u64,
}

/// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn contains(&self, p: TorusPoint) -> bool {
        p.x >= self.x0 && p.x <= self.x1 && p.y >= self.y0 && p.y <= self.y1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Fate {
    Above,
    Below,
    Undecided,
}

fn classify(spec: &MapSpec, x0: f64, y0: f64, n_max: u64) -> Fate {
    let (mut x, mut y) = (x0, y0);
    for _ in 0..n_max {
        y += spec.h(x);
        let xn = x + y;
        if xn < 0.0 {
            return Fate::Below;
        }
        if xn > x {
            return Fate::Above;
        }
        x = xn;
    }
    Fate::Undecided
}

/// Length of the boundary-value problem used to pin the stable orbit.
pub fn bvp_length(n_max: u64) -> usize {
    (100 * n_max).clamp(100_000, 2_000_000) as usize
}

/// Stable orbit `x_0 = x0, x_1, ..., x_L` solving `x_{n+1} - 2 x_n + x_{n-1} = h(x_n)`
/// with the far end pinned to the asymptote.
pub fn stable_orbit(spec: &MapSpec, x0: f64, len: usize) -> Vec<f64> {
    let a = spec.a;
    let shift = a / x0;
    let mut x: Vec<f64> = (0..=len).map(|n| a / (n as f64 + shift)).collect();
    x[0] = x0;
    let m = len - 1;
    let mut rhs = vec![0.0; m];
    let mut diag = vec![0.0; m];
    let mut cp = vec![0.0; m];
    for _ in 0..30 {
        for i in 0..m {
            let n = i + 1;
            rhs[i] = -(x[n + 1] - 2.0 * x[n] + x[n - 1] - spec.h(x[n]));
            diag[i] = -2.0 - spec.h_deriv(x[n]);
        }
        // Thomas algorithm with unit off-diagonals.
        cp[0] = 1.0 / diag[0];
        rhs[0] /= diag[0];
        for i in 1..m {
            let den = diag[i] - cp[i - 1];
            cp[i] = 1.0 / den;
            rhs[i] = (rhs[i] - rhs[i - 1]) / den;
        }
        for i in (0..m - 1).rev() {
            rhs[i] -= cp[i] * rhs[i + 1];
        }
        let mut worst: f64 = 0.0;
        for i in 0..m {
            x[i + 1] += rhs[i];
            worst = worst.max((rhs[i] / x[i + 1]).abs());
        }
        if worst < 1e-15 {
            break;
        }
    }
    x
}

/// Shoot for the stable manifold ordinate above `x0`.
pub fn stable_shoot(spec: &MapSpec, x0: f64, n_max: u64, tol: f64) -> Result<ShootResult, GeometryError> {
    if !(x0 > 0.0 && x0 <= 0.25) {
        return Err(GeometryError::InvalidInput(format!("x0 = {x0} not in (0, 0.25]")));
    }
    if !(tol >= 1e-14) {
        return Err(GeometryError::InvalidInput(format!("tol = {tol} below 1e-14")));
    }
    if n_max == 0 {
        return Err(GeometryError::InvalidInput("n_max must be positive".into()));
    }
    let mut lo = -2.0 * x0 * x0 / spec.a;
    let mut hi = 0.0;
    if classify(spec, x0, lo, n_max) != Fate::Below || classify(spec, x0, hi, n_max) != Fate::Above {
        return Err(GeometryError::BracketFailure { x0 });
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        match classify(spec, x0, mid, n_max) {
            Fate::Below => lo = mid,
            Fate::Above => hi = mid,
            Fate::Undecided => break,
        }
    }
    let orbit = stable_orbit(spec, x0, bvp_length(n_max));
    let y0 = orbit[1] - orbit[0] - spec.h(orbit[0]);
    let y0 = if y0 >= lo - tol && y0 <= hi + tol { y0 } else { 0.5 * (lo + hi) };
    let shift = spec.a / x0;
    let mut residual: f64 = 0.0;
    for n in 0..=(n_max as usize).min(orbit.len() - 2) {
        if !(orbit[n + 1] < orbit[n] && orbit[n + 1] > 0.0) {
            return Err(GeometryError::BracketFailure { x0 });
        }
        let s = n as f64 + shift;
        residual = residual.max((orbit[n] - spec.a / s).abs() * s * s);
    }
    Ok(ShootResult {
        x0,
        y0,
        residual_b: residual,
        steps_checked: n_max,
    })
}

/// Tabulated local stable or unstable graph on `|x| <= delta`.
pub fn local_manifold_graph(
    spec: &MapSpec,
    kind: ManifoldKind,
    branch: Quadrant,
    delta: f64,
    step: f64,
) -> Result<ManifoldPolyline, GeometryError> {
    if !(delta > 0.0 && delta <= 0.25) || !(step > 0.0) {
        return Err(GeometryError::InvalidInput(format!("delta = {delta}, step = {step}")));
    }
    let valid = matches!(
        (kind, branch),
        (ManifoldKind::Stable, Quadrant::Q2 | Quadrant::Q4) | (ManifoldKind::Unstable, Quadrant::Q1 | Quadrant::Q3)
    );
    if !valid {
        return Err(GeometryError::InvalidInput(format!("no {kind:?} branch in {branch:?}")));
    }
    let m = (delta / step).ceil().max(1.0) as usize;
    let xs: Vec<f64> = (0..=m).map(|i| delta * i as f64 / m as f64).collect();
    let q4: Vec<TorusPoint> = xs
        .par_iter()
        .map(|&x| {
            if x == 0.0 {
                Ok(TorusPoint::raw(0.0, 0.0))
            } else {
                stable_shoot(spec, x, 1000, 1e-14).map(|r| TorusPoint::raw(x, r.y0))
            }
        })
        .collect::<Result<_, _>>()?;
    let stable_q2 = || q4.iter().map(|p| TorusPoint::raw(-p.x, -p.y)).collect::<Vec<_>>();
    let vertices = match (kind, branch) {
        (ManifoldKind::Stable, Quadrant::Q4) => q4.clone(),
        (ManifoldKind::Stable, _) => stable_q2(),
        (ManifoldKind::Unstable, Quadrant::Q1) => stable_q2().into_iter().map(|p| involution_r1(spec, p)).collect(),
        (ManifoldKind::Unstable, _) => q4.iter().map(|&p| involution_r1(spec, p)).collect(),
    };
    let mut poly = ManifoldPolyline {
        vertices,
        kind,
        branch,
        max_seg_len: 0.0,
    };
    poly.max_seg_len = poly.max_chord();
    Ok(poly)
}

fn seed_point(seed: &[TorusPoint], s: f64) -> TorusPoint {
    let i = (s.floor() as usize).min(seed.len() - 2);
    let f = s - i as f64;
    let (a, b) = (seed[i], seed[i + 1]);
    TorusPoint::new(a.x + f * (b.x - a.x), a.y + f * (b.y - a.y))
}

fn map_n(spec: &MapSpec, mut p: TorusPoint, n: u64) -> TorusPoint {
    for _ in 0..n {
        p = apply(spec, p);
    }
    p
}

/// Forward image of an unstable arc, refined in preimage space and clipped.
pub fn grow_unstable(
    spec: &MapSpec,
    seed: &ManifoldPolyline,
    n_iter: u64,
    max_seg_len: f64,
    clip: Rect,
    vertex_cap: usize,
) -> Result<ManifoldPolyline, GeometryError> {
    if seed.vertices.len() < 2 || !(max_seg_len > 0.0) {
        return Err(GeometryError::InvalidInput("seed needs two vertices and a positive length".into()));
    }
    let sv = &seed.vertices;
    let mut out: Vec<(f64, TorusPoint)> = Vec::new();
    let first = (0.0, map_n(spec, sv[0], n_iter));
    out.push(first);
    for i in 0..sv.len() - 1 {
        let mut stack = vec![((i + 1) as f64, map_n(spec, sv[i + 1], n_iter))];
        while let Some(&(sb, pb)) = stack.last() {
            let (sa, pa) = *out.last().unwrap();
            if pa.dist(pb) > max_seg_len && sb - sa > 1e-13 {
                let sm = 0.5 * (sa + sb);
                stack.push((sm, map_n(spec, seed_point(sv, sm), n_iter)));
            } else {
                out.push(stack.pop().unwrap());
            }
            if out.len() + stack.len() > vertex_cap {
                return Err(GeometryError::RefinementBlowup { cap: vertex_cap });
            }
        }
    }
    let mut best: (usize, usize) = (0, 0);
    let mut start = None;
    for (i, &(_, p)) in out.iter().enumerate() {
        if clip.contains(p) {
            let s = *start.get_or_insert(i);
            if i + 1 - s > best.1 - best.0 {
                best = (s, i + 1);
            }
        } else {
            start = None;
        }
    }
    let mut poly = ManifoldPolyline {
        vertices: out[best.0..best.1].iter().map(|v| v.1).collect(),
        kind: ManifoldKind::Unstable,
        branch: seed.branch,
        max_seg_len,
    };
    if poly.vertices.len() >= 2 {
        poly.max_seg_len = poly.max_chord().max(0.0);
    }
    Ok(poly)
}

/// Slope `u` of the unstable direction `(1, u)` at `p`, by pushing `(1, 1)` forward
/// along the orbit from `T^{-k_back} p`.
pub fn unstable_slope(spec: &MapSpec, p: TorusPoint, k_back: u64) -> f64 {
    let k = k_back as usize;
    let mut xs = vec![0.0; k];
    let mut q = p;
    for i in 0..k {
        q = apply_inverse(spec, q);
        xs[k - 1 - i] = q.x;
    }
    let mut u = 1.0;
    for &x in &xs {
        let d = spec.h_deriv(x);
        u = (d + u) / (1.0 + d + u);
    }
    u
}

/// Doubling `k_back` from `k_start` until the relative change is below `rel_tol`.
pub fn unstable_slope_converged(spec: &MapSpec, p: TorusPoint, k_start: u64, rel_tol: f64, k_cap: u64) -> (f64, u64) {
    let mut k = k_start.max(20);
    let mut u = unstable_slope(spec, p, k);
    while k < k_cap {
        k *= 2;
        let u2 = unstable_slope(spec, p, k);
        if (u2 - u).abs() <= rel_tol * u2.abs() {
            return (u2, k);
        }
        u = u2;
    }
    (u, k)
}

/// Empirical `[K-, K+]` band of `u / (|x| + sqrt|y|)` over uniform samples in `[-scale, scale]^2`.
pub fn cone_ratio_stats(spec: &MapSpec, n_samples: u64, seed: u64, scale: f64) -> Result<ConeStats, GeometryError> {
    if n_samples < 1000 {
        return Err(GeometryError::InvalidInput("need at least 1000 samples".into()));
    }
    if !(scale > 0.0 && scale <= std::f64::consts::PI) {
        return Err(GeometryError::InvalidInput(format!("scale = {scale}")));
    }
    let parts: Vec<(f64, f64, u64)> = strata(n_samples)
        .into_par_iter()
        .map(|(idx, count)| {
            let mut rng = stream_rng(seed, idx);
            let (mut lo, mut hi, mut kmax) = (f64::INFINITY, 0.0f64, 0u64);
            for _ in 0..count {
                let x = scale * (2.0 * rng.gen::<f64>() - 1.0);
                let y = scale * (2.0 * rng.gen::<f64>() - 1.0);
                if x * x + y * y < 1e-12 {
                    continue;
                }
                let p = TorusPoint::new(x, y);
                let (u, k) = unstable_slope_converged(spec, p, 32, 1e-9, 1 << 17);
                let r = u / (p.x.abs() + p.y.abs().sqrt());
                lo = lo.min(r);
                hi = hi.max(r);
                kmax = kmax.max(k);
            }
            (lo, hi, kmax)
        })
        .collect();
    let lo = parts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = parts.iter().map(|p| p.1).fold(0.0, f64::max);
    let kmax = parts.iter().map(|p| p.2).max().unwrap_or(0);
    Ok(ConeStats {
        k_minus_hat: lo,
        k_plus_hat: hi,
        samples: n_samples,
        scale,
        k_back_max: kmax,
    })
}
