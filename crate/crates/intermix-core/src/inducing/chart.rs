//! Coordinates on the entry set of the square gate.
//!
//! A left entry `p` is parametrized by its image `q = T p = (-delta + t Y, Y)`,
//! `t in [0, 1)`, `Y in (0, delta]`, with area element `Y dt dY`. The stable
//! manifold crosses each fiber at `Y*(t)`; above it orbits pass through the gate
//! (fat side), below it they turn back (thin side). Along each fiber the offset
//! from `Y*` is a function of a coordinate `v` tuned so that the return time is
//! close to `v`: offsets where the return time crosses a geometric ladder of
//! targets are found by bisection and interpolated in log-log coordinates.
//!
//! Top entries (`p` with `|p_x| <= delta`, `p_y > delta`) use `(s, w)` with
//! `s = p_x in [-delta, 0]` and `q_y = delta - (delta - lo(s)) w`.

use super::{exit_steps, GateRegion, InducingError};
use crate::numerics::{gauss5, Chebyshev};
use crate::torus_map::{MapSpec, TorusPoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Side {
    Fat,
    Thin,
}

const CHEB_NODES: usize = 41;
const CLASSIFY_CAP: u64 = 50_000_000;
/// Return-time targets `2^(i/2)`, `i = KNOT_FIRST..=KNOT_LAST`.
const KNOT_FIRST: i32 = 4;
const KNOT_LAST: i32 = 26;
const SMALLEST_OFFSET: f64 = 1e-18;

#[derive(Debug, Clone)]
pub struct EntryChart {
    spec: MapSpec,
    gate: GateRegion,
    delta: f64,
    mirror: bool,
    ystar: Chebyshev,
    /// `v` at each knot, starting with 0.
    knot_v: Vec<f64>,
    /// `ln(offset / span)` at each knot after the first, per side.
    fat: Vec<Chebyshev>,
    thin: Vec<Chebyshev>,
}

fn knot_targets() -> Vec<f64> {
    (KNOT_FIRST..=KNOT_LAST).map(|i| 2f64.powf(i as f64 / 2.0).round()).collect()
}

/// Which side of the stable manifold an orbit from `q` falls to, if decided.
fn fate(spec: &MapSpec, x0: f64, y0: f64) -> Option<Side> {
    let (mut x, mut y) = (x0, y0);
    for _ in 0..CLASSIFY_CAP {
        y += spec.h(x);
        x += y;
        if x > 0.0 {
            return Some(Side::Fat);
        }
        if y < 0.0 {
            return Some(Side::Thin);
        }
    }
    None
}

/// `Y` at which the fiber `q = (-delta + t Y, Y)` meets the stable manifold, by
/// bisection on the orbit fate.
pub fn stable_crossing(spec: &MapSpec, delta: f64, t: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, delta);
    loop {
        let m = 0.5 * (lo + hi);
        if m <= lo || m >= hi {
            break;
        }
        match fate(spec, -delta + t * m, m) {
            Some(Side::Fat) => hi = m,
            Some(Side::Thin) => lo = m,
            None => return m,
        }
    }
    0.5 * (lo + hi)
}

impl EntryChart {
    pub fn new(spec: &MapSpec, gate: &GateRegion, mirror: bool) -> Result<Self, InducingError> {
        if gate.boundary.is_some() {
            return Err(InducingError::InvalidInput("entry chart needs the square gate".into()));
        }
        let delta = gate.delta;
        let targets = knot_targets();
        let mut chart = Self {
            spec: *spec,
            gate: gate.clone(),
            delta,
            mirror,
            ystar: Chebyshev::from_values(0.0, 1.0, vec![0.0, 0.0]),
            knot_v: std::iter::once(0.0).chain(targets.iter().copied()).collect(),
            fat: Vec::new(),
            thin: Vec::new(),
        };
        let ts = Chebyshev::nodes(0.0, 1.0, CHEB_NODES);
        use rayon::prelude::*;
        let fibers: Vec<(f64, Vec<f64>, Vec<f64>)> = ts.par_iter().map(|&t| chart.calibrate(t, &targets)).collect();
        chart.ystar = Chebyshev::from_values(0.0, 1.0, fibers.iter().map(|f| f.0).collect());
        for i in 0..targets.len() {
            chart
                .fat
                .push(Chebyshev::from_values(0.0, 1.0, fibers.iter().map(|f| f.1[i]).collect()));
            chart
                .thin
                .push(Chebyshev::from_values(0.0, 1.0, fibers.iter().map(|f| f.2[i]).collect()));
        }
        Ok(chart)
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Stable-manifold crossing of the fiber `t`.
    pub fn ystar_exact(&self, t: f64) -> f64 {
        stable_crossing(&self.spec, self.delta, t)
    }

    fn phi_at(&self, t: f64, y: f64, cap: u64) -> Option<u64> {
        exit_steps(&self.spec, &self.gate, self.point_ty(t, y), cap).map(|m| m + 1)
    }

    /// `Y*` and, per side, `ln(offset / span)` where the return time reaches each target.
    fn calibrate(&self, t: f64, targets: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
        let ys = self.ystar_exact(t);
        let ladder = |span: f64, sign: f64| -> Vec<f64> {
            let mut out = Vec::with_capacity(targets.len());
            let mut hi = 0.0f64;
            for &n in targets {
                let cap = (2.0 * n) as u64 + 100;
                let reaches = |l: f64| self.phi_at(t, ys + sign * span * l.exp(), cap).is_none_or(|m| m as f64 >= n);
                let mut lo = (SMALLEST_OFFSET / span).ln();
                let mut top = hi;
                if reaches(top) {
                    out.push(top);
                    continue;
                }
                for _ in 0..40 {
                    let m = 0.5 * (lo + top);
                    if reaches(m) {
                        lo = m;
                    } else {
                        top = m;
                    }
                }
                // keep the ladder strictly decreasing
                let l = (0.5 * (lo + top)).min(hi - 1e-9);
                out.push(l);
                hi = l;
            }
            out
        };
        let fat = ladder(self.delta - ys, 1.0);
        let thin = ladder(ys, -1.0);
        (ys, fat, thin)
    }

    pub fn ystar(&self, t: f64) -> f64 {
        self.ystar.eval(t)
    }

    fn log_ratio(&self, side: Side, t: f64, v: f64) -> f64 {
        let knots = match side {
            Side::Fat => &self.fat,
            Side::Thin => &self.thin,
        };
        let kv = &self.knot_v;
        let last = kv.len() - 1;
        if v >= kv[last] {
            return knots[last - 1].eval(t) - 4.0 * (v / kv[last]).ln();
        }
        let i = kv.partition_point(|&k| k <= v) - 1;
        let l0 = if i == 0 { 0.0 } else { knots[i - 1].eval(t) };
        let l1 = knots[i].eval(t);
        let (x0, x1) = ((1.0 + kv[i]).ln(), (1.0 + kv[i + 1]).ln());
        l0 + (l1 - l0) * ((1.0 + v).ln() - x0) / (x1 - x0)
    }

    /// Distance from `Y*` at chart coordinate `v`.
    pub fn offset(&self, side: Side, t: f64, v: f64) -> f64 {
        if v.is_infinite() {
            return 0.0;
        }
        let ys = self.ystar(t);
        let span = match side {
            Side::Fat => self.delta - ys,
            Side::Thin => ys,
        };
        if v <= 0.0 {
            return span;
        }
        span * self.log_ratio(side, t, v).exp()
    }

    pub fn y_of(&self, side: Side, t: f64, v: f64) -> f64 {
        let ys = self.ystar(t);
        match side {
            Side::Fat => ys + self.offset(side, t, v),
            Side::Thin => ys - self.offset(side, t, v),
        }
    }

    fn point_ty(&self, t: f64, y: f64) -> TorusPoint {
        let q = TorusPoint::raw(-self.delta + t * y, y);
        if self.mirror {
            TorusPoint::raw(-q.x, -q.y)
        } else {
            q
        }
    }

    /// Gate point `q = T p` at chart coordinates.
    pub fn point(&self, side: Side, t: f64, v: f64) -> TorusPoint {
        self.point_ty(t, self.y_of(side, t, v))
    }

    /// Return time of `T^{-1} q`, or `None` above `cap`.
    pub fn phi(&self, side: Side, t: f64, v: f64, cap: u64) -> Option<u64> {
        exit_steps(&self.spec, &self.gate, self.point(side, t, v), cap.saturating_sub(1)).map(|m| m + 1)
    }

    /// Area of the chart cell `[t0, t1] x [v0, v1]`; `v1` may be infinite.
    pub fn area(&self, side: Side, t0: f64, t1: f64, v0: f64, v1: f64) -> f64 {
        gauss5(t0, t1, |t| {
            let ys = self.ystar(t);
            let d0 = self.offset(side, t, v0);
            let d1 = self.offset(side, t, v1);
            let sum = match side {
                Side::Fat => 2.0 * ys + d0 + d1,
                Side::Thin => 2.0 * ys - d0 - d1,
            };
            0.5 * (d0 - d1) * sum
        })
    }
}

/// Top entries of the square gate; the mirror gives bottom entries.
#[derive(Debug, Clone)]
pub struct SliverChart {
    spec: MapSpec,
    gate: GateRegion,
    delta: f64,
    mirror: bool,
}

impl SliverChart {
    pub fn new(spec: &MapSpec, gate: &GateRegion, mirror: bool) -> Self {
        Self {
            spec: *spec,
            gate: gate.clone(),
            delta: gate.delta,
            mirror,
        }
    }

    fn lo(&self, s: f64) -> f64 {
        (self.delta + self.spec.h(s)).max(-self.delta)
    }

    pub fn point(&self, s: f64, w: f64) -> TorusPoint {
        let qy = self.delta - (self.delta - self.lo(s)) * w;
        let q = TorusPoint::raw(s + qy, qy);
        if self.mirror {
            TorusPoint::raw(-q.x, -q.y)
        } else {
            q
        }
    }

    pub fn phi(&self, s: f64, w: f64, cap: u64) -> Option<u64> {
        exit_steps(&self.spec, &self.gate, self.point(s, w), cap.saturating_sub(1)).map(|m| m + 1)
    }

    pub fn area(&self, s0: f64, s1: f64, w0: f64, w1: f64) -> f64 {
        gauss5(s0, s1, |s| self.delta - self.lo(s)) * (w1 - w0)
    }
}
