//! The map family `T(x, y) = (x + h(x) + y, h(x) + y)` on the flat torus.

use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{strata, stream_rng};

const TWO_PI: f64 = 2.0 * PI;

/// Reduce an angle into `[-pi, pi)`. Exact `+pi` goes to `-pi`.
#[inline]
pub fn wrap(a: f64) -> f64 {
    if (-PI..PI).contains(&a) {
        return a;
    }
    let mut r = (a + PI).rem_euclid(TWO_PI) - PI;
    if r >= PI {
        r -= TWO_PI;
    }
    if r < -PI {
        r = -PI;
    }
    r
}

/// Shortest signed difference `a - b` on the circle.
#[inline]
pub fn angle_diff(a: f64, b: f64) -> f64 {
    wrap(a - b)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorusPoint {
    pub x: f64,
    pub y: f64,
}

impl TorusPoint {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x: wrap(x), y: wrap(y) }
    }

    /// Build without reduction, for local-chart arithmetic near the origin.
    pub const fn raw(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }

    /// Max-norm distance on the torus.
    pub fn dist(self, other: TorusPoint) -> f64 {
        angle_diff(self.x, other.x).abs().max(angle_diff(self.y, other.y).abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// `h(x) = c (x - sin x)`
    BuiltinSine,
}

#[derive(Debug, Error, PartialEq)]
pub enum MapError {
    #[error("multiplier c must be a positive integer, got {0}")]
    BadMultiplier(i64),
    #[error("profile check failed: {0}")]
    ProfileCheck(String),
    #[error("point ({x}, {y}) is outside the local chart |x|, |y| <= 1")]
    OutOfChart { x: f64, y: f64 },
}

/// Map parameters. Immutable after construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapSpec {
    pub family: Family,
    pub c: u32,
    /// Cubic coefficient of `h` at zero.
    pub b: f64,
    /// `sqrt(2 / b)`
    pub a: f64,
}

impl MapSpec {
    pub fn new(family: Family, c: i64) -> Result<Self, MapError> {
        if c <= 0 || c > u32::MAX as i64 {
            return Err(MapError::BadMultiplier(c));
        }
        let b = match family {
            Family::BuiltinSine => c as f64 / 6.0,
        };
        let spec = Self {
            family,
            c: c as u32,
            b,
            a: (2.0 / b).sqrt(),
        };
        spec.check_profile()?;
        Ok(spec)
    }

    pub fn sine(c: i64) -> Result<Self, MapError> {
        Self::new(Family::BuiltinSine, c)
    }

    fn check_profile(&self) -> Result<(), MapError> {
        if self.h(0.0) != 0.0 || self.h_deriv(0.0) != 0.0 {
            return Err(MapError::ProfileCheck("h(0) or h'(0) nonzero".into()));
        }
        if self.b <= 0.0 {
            return Err(MapError::ProfileCheck("b <= 0".into()));
        }
        let n = 10_000;
        for i in 0..n {
            let x = -PI + TWO_PI * (i as f64 + 0.5) / n as f64;
            if x == 0.0 {
                continue;
            }
            if self.h_deriv(x) <= 0.0 {
                return Err(MapError::ProfileCheck(format!("h'({x}) <= 0")));
            }
            if self.h(-x) != -self.h(x) {
                return Err(MapError::ProfileCheck(format!("h not odd at {x}")));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn h(&self, x: f64) -> f64 {
        self.c as f64 * x_minus_sin(x)
    }

    #[inline]
    pub fn h_deriv(&self, x: f64) -> f64 {
        let s = (0.5 * x).sin();
        2.0 * self.c as f64 * s * s
    }

    /// `G(x) = int_0^x h`
    #[inline]
    pub fn g(&self, x: f64) -> f64 {
        self.c as f64 * half_sq_plus_cos_minus_one(x)
    }
}

/// `x - sin x`, by series near zero.
#[inline]
pub fn x_minus_sin(x: f64) -> f64 {
    if x.abs() >= 1.0 {
        return x - x.sin();
    }
    let x2 = x * x;
    let mut term = x * x2 / 6.0;
    let mut sum = term;
    let mut k = 3.0;
    for _ in 0..12 {
        term *= -x2 / ((k + 1.0) * (k + 2.0));
        k += 2.0;
        sum += term;
        if term.abs() <= 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

/// `x^2/2 + cos x - 1`, by series near zero.
#[inline]
pub fn half_sq_plus_cos_minus_one(x: f64) -> f64 {
    if x.abs() >= 1.0 {
        return 0.5 * x * x + x.cos() - 1.0;
    }
    let x2 = x * x;
    let mut term = x2 * x2 / 24.0;
    let mut sum = term;
    let mut k = 4.0;
    for _ in 0..12 {
        term *= -x2 / ((k + 1.0) * (k + 2.0));
        k += 2.0;
        sum += term;
        if term.abs() <= 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jacobian2x2 {
    pub a11: f64,
    pub a12: f64,
    pub a21: f64,
    pub a22: f64,
}

impl Jacobian2x2 {
    pub fn det(&self) -> f64 {
        self.a11 * self.a22 - self.a12 * self.a21
    }

    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        [self.a11 * v[0] + self.a12 * v[1], self.a21 * v[0] + self.a22 * v[1]]
    }
}

pub fn eval_h(spec: &MapSpec, x: f64) -> f64 {
    spec.h(x)
}

pub fn eval_h_deriv(spec: &MapSpec, x: f64) -> f64 {
    spec.h_deriv(x)
}

pub fn eval_g(spec: &MapSpec, x: f64) -> f64 {
    spec.g(x)
}

#[inline]
pub fn apply(spec: &MapSpec, p: TorusPoint) -> TorusPoint {
    let y = wrap(p.y + spec.h(p.x));
    TorusPoint { x: wrap(p.x + y), y }
}

#[inline]
pub fn apply_inverse(spec: &MapSpec, p: TorusPoint) -> TorusPoint {
    let x = wrap(p.x - p.y);
    TorusPoint {
        x,
        y: wrap(p.y - spec.h(x)),
    }
}

/// `(x, y) -> (x, -y - h(x))`
pub fn involution_r(spec: &MapSpec, p: TorusPoint) -> TorusPoint {
    TorusPoint {
        x: p.x,
        y: wrap(-p.y - spec.h(p.x)),
    }
}

/// `(x, y) -> (-x, y + h(x))`
pub fn involution_r1(spec: &MapSpec, p: TorusPoint) -> TorusPoint {
    TorusPoint {
        x: wrap(-p.x),
        y: wrap(p.y + spec.h(p.x)),
    }
}

pub fn jacobian(spec: &MapSpec, p: TorusPoint) -> Jacobian2x2 {
    let d = spec.h_deriv(p.x);
    Jacobian2x2 {
        a11: 1.0 + d,
        a12: 1.0,
        a21: d,
        a22: 1.0,
    }
}

/// Quasi-Hamiltonian in the local chart around the fixed point.
pub fn quasi_h(spec: &MapSpec, p: TorusPoint) -> Result<f64, MapError> {
    if p.x.abs() > 1.0 || p.y.abs() > 1.0 {
        return Err(MapError::OutOfChart { x: p.x, y: p.y });
    }
    Ok(quasi_h_local(spec, p.x, p.y))
}

#[inline]
pub(crate) fn quasi_h_local(spec: &MapSpec, x: f64, y: f64) -> f64 {
    let h = spec.h(x);
    let hp = spec.h_deriv(x);
    0.5 * y * y - spec.g(x) + 0.5 * h * y - hp * y * y / 12.0 + h * h / 12.0
}

/// Orbit iteration scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IterMode {
    #[default]
    Plain,
    /// Carries the rounding error of each addition in a second word.
    Compensated,
}

/// `T^n(p)`. The sink, if any, receives `(k, T^k p)` for `k = 1..=n`.
pub fn iterate(spec: &MapSpec, p: TorusPoint, n: u64, mut sink: Option<&mut dyn FnMut(u64, TorusPoint)>) -> TorusPoint {
    let mut q = p;
    for k in 1..=n {
        q = apply(spec, q);
        if let Some(s) = sink.as_mut() {
            s(k, q);
        }
    }
    q
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

/// Like [`iterate`] with a selectable summation scheme.
pub fn iterate_with(spec: &MapSpec, p: TorusPoint, n: u64, mode: IterMode, sink: Option<&mut dyn FnMut(u64, TorusPoint)>) -> TorusPoint {
    match mode {
        IterMode::Plain => iterate(spec, p, n, sink),
        IterMode::Compensated => iterate_compensated(spec, p, n, sink),
    }
}

fn iterate_compensated(spec: &MapSpec, p: TorusPoint, n: u64, mut sink: Option<&mut dyn FnMut(u64, TorusPoint)>) -> TorusPoint {
    let (mut x, mut ex) = (p.x, 0.0);
    let (mut y, mut ey) = (p.y, 0.0);
    for k in 1..=n {
        let (s, e) = two_sum(y, spec.h(x + ex));
        let (s, e2) = two_sum(s, e + ey);
        y = s;
        ey = e2;
        let w = wrap(y);
        if w != y {
            y = w;
        }
        let (s, e) = two_sum(x, y);
        let (s, e2) = two_sum(s, e + ex + ey);
        x = s;
        ex = e2;
        let w = wrap(x);
        if w != x {
            x = w;
        }
        if let Some(sk) = sink.as_mut() {
            sk(k, TorusPoint { x, y });
        }
    }
    TorusPoint { x, y }
}

/// Largest errors of the algebraic identities over uniform random points.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct IdentityErrors {
    pub inverse: f64,
    pub r_involution: f64,
    pub r1_involution: f64,
    pub r_conjugacy: f64,
    pub r1_conjugacy: f64,
    pub det: f64,
    /// Points where `DT` fails to map the cone `{v1 v2 >= 0}` into itself.
    pub cone_violations: u64,
    pub samples: u64,
}

impl IdentityErrors {
    fn merge(self, o: Self) -> Self {
        Self {
            inverse: self.inverse.max(o.inverse),
            r_involution: self.r_involution.max(o.r_involution),
            r1_involution: self.r1_involution.max(o.r1_involution),
            r_conjugacy: self.r_conjugacy.max(o.r_conjugacy),
            r1_conjugacy: self.r1_conjugacy.max(o.r1_conjugacy),
            det: self.det.max(o.det),
            cone_violations: self.cone_violations + o.cone_violations,
            samples: self.samples + o.samples,
        }
    }
}

pub fn identity_errors(spec: &MapSpec, n_samples: u64, seed: u64) -> IdentityErrors {
    strata(n_samples)
        .into_par_iter()
        .map(|(idx, count)| {
            let mut rng = stream_rng(seed, idx);
            let mut e = IdentityErrors::default();
            for _ in 0..count {
                let p = TorusPoint::new(2.0 * PI * rng.gen::<f64>() - PI, 2.0 * PI * rng.gen::<f64>() - PI);
                let tp = apply(spec, p);
                let inv = apply_inverse(spec, p);
                e.inverse = e.inverse.max(apply_inverse(spec, tp).dist(p));
                e.r_involution = e.r_involution.max(involution_r(spec, involution_r(spec, p)).dist(p));
                e.r1_involution = e.r1_involution.max(involution_r1(spec, involution_r1(spec, p)).dist(p));
                e.r_conjugacy = e.r_conjugacy.max(involution_r(spec, apply(spec, involution_r(spec, p))).dist(inv));
                e.r1_conjugacy = e
                    .r1_conjugacy
                    .max(involution_r1(spec, apply(spec, involution_r1(spec, p))).dist(inv));
                let j = jacobian(spec, p);
                e.det = e.det.max((j.det() - 1.0).abs());
                if p.x != 0.0 {
                    let a = j.apply([1.0, 0.0]);
                    let b = j.apply([0.0, 1.0]);
                    if !(a[0] * a[1] > 0.0 && b[0] * b[1] > 0.0) {
                        e.cone_violations += 1;
                    }
                }
                e.samples += 1;
            }
            e
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(IdentityErrors::default(), IdentityErrors::merge)
}

/// `max |H(T p) - H(p)| / (x^8 + y^4)` over uniform `p` in `[-delta, delta]^2`.
pub fn drift_ratio(spec: &MapSpec, delta: f64, n_samples: u64, seed: u64) -> f64 {
    strata(n_samples)
        .into_par_iter()
        .map(|(idx, count)| {
            let mut rng = stream_rng(seed, idx);
            let mut worst: f64 = 0.0;
            for _ in 0..count {
                let x = delta * (2.0 * rng.gen::<f64>() - 1.0);
                let y = delta * (2.0 * rng.gen::<f64>() - 1.0);
                let scale = x.powi(8) + y.powi(4);
                if scale == 0.0 {
                    continue;
                }
                let hy = spec.h(x) + y;
                let d = quasi_h_local(spec, x + hy, hy) - quasi_h_local(spec, x, y);
                worst = worst.max(d.abs() / scale);
            }
            worst
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(0.0, f64::max)
}
