//! Observables, correlation estimates, the tail-sum predictor and log-log fits.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::inducing::{GateRegion, TailTable};
use crate::numerics::{gauss5, strata, stream_rng};
use crate::torus_map::{apply, MapSpec, TorusPoint};

const TORUS_AREA: f64 = 4.0 * PI * PI;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("observable support meets the gate")]
    SupportOverlapsGate,
    #[error("lag {n} is beyond the tail table range {n_max}")]
    RangeExceeded { n: u64, n_max: u64 },
    #[error("need at least 5 positive points in range, got {got}")]
    InsufficientData { got: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    MeanOne,
    MeanZero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    Bump,
    Constant,
}

/// Smooth bump supported on a disc, or the constant function 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observable {
    pub center: TorusPoint,
    pub radius: f64,
    pub normalization: Normalization,
    pub profile: Profile,
    pub numeric_mean: f64,
    scale: f64,
}

/// `exp(1 - 1/(1 - s^2))` for `s < 1`, else 0.
#[inline]
pub fn bump_profile(s: f64) -> f64 {
    if s >= 1.0 {
        return 0.0;
    }
    (1.0 - 1.0 / (1.0 - s * s)).exp()
}

/// `int_0^1 bump(s) s ds` by composite Gauss-Legendre.
fn radial_moment() -> f64 {
    let panels = 400;
    (0..panels)
        .map(|i| {
            let a = i as f64 / panels as f64;
            let b = (i + 1) as f64 / panels as f64;
            gauss5(a, b, |s| bump_profile(s) * s)
        })
        .sum()
}

impl Observable {
    pub fn bump(spec_gate: &GateRegion, center: TorusPoint, radius: f64, normalization: Normalization) -> Result<Self, StatsError> {
        if !(radius > 0.0 && radius < 1.0) {
            return Err(StatsError::InvalidInput(format!("radius {radius} must lie in (0, 1)")));
        }
        let g = spec_gate.bbox();
        let dx = (center.x.abs() - g.x1.max(-g.x0)).max(0.0);
        let dy = (center.y.abs() - g.y1.max(-g.y0)).max(0.0);
        if dx.hypot(dy) <= radius {
            return Err(StatsError::SupportOverlapsGate);
        }
        let raw_mean = 2.0 * PI * radius * radius * radial_moment() / TORUS_AREA;
        let mut obs = Self {
            center,
            radius,
            normalization,
            profile: Profile::Bump,
            numeric_mean: 0.0,
            scale: match normalization {
                Normalization::MeanOne => 1.0 / raw_mean,
                Normalization::MeanZero => 1.0 / 3.0,
            },
        };
        obs.numeric_mean = obs.mean_by_quadrature();
        Ok(obs)
    }

    pub fn constant() -> Self {
        Self {
            center: TorusPoint::raw(0.0, 0.0),
            radius: f64::INFINITY,
            normalization: Normalization::MeanOne,
            profile: Profile::Constant,
            numeric_mean: 1.0,
            scale: 1.0,
        }
    }

    /// Unnormalized radial shape. The mean-zero shape is `f(r/rho) - 4 f(2r/rho)`,
    /// which integrates to zero and keeps the support in the disc.
    fn shape(&self, r: f64) -> f64 {
        let s = r / self.radius;
        match self.normalization {
            Normalization::MeanOne => bump_profile(s),
            Normalization::MeanZero => bump_profile(s) - 4.0 * bump_profile(2.0 * s),
        }
    }

    pub fn eval(&self, p: TorusPoint) -> f64 {
        match self.profile {
            Profile::Constant => 1.0,
            Profile::Bump => {
                let dx = crate::torus_map::angle_diff(p.x, self.center.x);
                let dy = crate::torus_map::angle_diff(p.y, self.center.y);
                if dx.abs() >= self.radius || dy.abs() >= self.radius {
                    return 0.0;
                }
                self.scale * self.shape(dx.hypot(dy))
            }
        }
    }

    /// Mean over the torus by radial composite quadrature.
    pub fn mean_by_quadrature(&self) -> f64 {
        if self.profile == Profile::Constant {
            return 1.0;
        }
        let panels = 800;
        let rho = self.radius;
        let integral: f64 = (0..panels)
            .map(|i| {
                let a = rho * i as f64 / panels as f64;
                let b = rho * (i + 1) as f64 / panels as f64;
                gauss5(a, b, |r| self.scale * self.shape(r) * 2.0 * PI * r)
            })
            .sum();
        integral / TORUS_AREA
    }

    /// Mean of the square, by the same quadrature.
    pub fn mean_square(&self) -> f64 {
        if self.profile == Profile::Constant {
            return 1.0;
        }
        let panels = 800;
        let rho = self.radius;
        let integral: f64 = (0..panels)
            .map(|i| {
                let a = rho * i as f64 / panels as f64;
                let b = rho * (i + 1) as f64 / panels as f64;
                gauss5(a, b, |r| (self.scale * self.shape(r)).powi(2) * 2.0 * PI * r)
            })
            .sum();
        integral / TORUS_AREA
    }

    /// Box `[x0, x0 + w) x [y0, y0 + w)` holding the support, if bounded.
    fn support_box(&self) -> Option<(f64, f64, f64)> {
        match self.profile {
            Profile::Constant => None,
            Profile::Bump => Some((self.center.x - self.radius, self.center.y - self.radius, 2.0 * self.radius)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrEstimate {
    pub n: u64,
    pub value: f64,
    pub std_error: f64,
    pub samples: u64,
}

/// Correlations at several lags from common sample points, one orbit per point.
/// Points are drawn uniformly on the support box of `phi` (or the whole torus).
pub fn estimate_corr_series(
    spec: &MapSpec,
    phi: &Observable,
    psi: &Observable,
    lags: &[u64],
    n_samples: u64,
    seed: u64,
) -> Result<Vec<CorrEstimate>, StatsError> {
    if n_samples < 10_000 {
        return Err(StatsError::InvalidInput(format!("need at least 10^4 samples, got {n_samples}")));
    }
    if lags.is_empty() {
        return Ok(Vec::new());
    }
    let (x0, y0, wx, wy) = match phi.support_box() {
        Some((x0, y0, w)) => (x0, y0, w, w),
        None => (-PI, -PI, 2.0 * PI, 2.0 * PI),
    };
    let box_weight = wx * wy / TORUS_AREA;
    let n_top = *lags.iter().max().unwrap();
    let parts: Vec<(Vec<f64>, Vec<f64>)> = strata(n_samples)
        .into_par_iter()
        .map(|(idx, count)| {
            let mut rng = stream_rng(seed, idx);
            let mut sum = vec![0.0; lags.len()];
            let mut sq = vec![0.0; lags.len()];
            let mut at = vec![0.0; lags.len()];
            for _ in 0..count {
                let p = TorusPoint::new(x0 + wx * rng.gen::<f64>(), y0 + wy * rng.gen::<f64>());
                let f = phi.eval(p);
                if f == 0.0 {
                    continue;
                }
                let mut q = p;
                let mut k = 0u64;
                loop {
                    for (slot, &n) in lags.iter().enumerate() {
                        if n == k {
                            at[slot] = f * psi.eval(q);
                        }
                    }
                    if k == n_top {
                        break;
                    }
                    q = apply(spec, q);
                    k += 1;
                }
                for i in 0..lags.len() {
                    sum[i] += at[i];
                    sq[i] += at[i] * at[i];
                }
            }
            (sum, sq)
        })
        .collect();
    let mut sum = vec![0.0; lags.len()];
    let mut sq = vec![0.0; lags.len()];
    for (s, q) in parts {
        for i in 0..lags.len() {
            sum[i] += s[i];
            sq[i] += q[i];
        }
    }
    let ns = n_samples as f64;
    let product = phi.numeric_mean * psi.numeric_mean;
    Ok(lags
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let mean = sum[i] / ns;
            let var = (sq[i] / ns - mean * mean).max(0.0);
            CorrEstimate {
                n,
                value: mean * box_weight - product,
                std_error: (var / ns).sqrt() * box_weight,
                samples: n_samples,
            }
        })
        .collect())
}

/// `int phi . psi o T^n - int phi int psi` for normalized Lebesgue measure.
pub fn estimate_corr(
    spec: &MapSpec,
    phi: &Observable,
    psi: &Observable,
    n: u64,
    n_samples: u64,
    seed: u64,
) -> Result<CorrEstimate, StatsError> {
    Ok(estimate_corr_series(spec, phi, psi, &[n], n_samples, seed)?[0])
}

/// `sum_{j > n} leb(phi > j) = sum_N (N - n - 1)^+ leb(phi = N)`, with the overflow
/// mass counted as returning at `N_max + 1`.
pub fn tail_sum_predictor(tail: &TailTable, n: u64) -> Result<f64, StatsError> {
    if n >= tail.n_max {
        return Err(StatsError::RangeExceeded { n, n_max: tail.n_max });
    }
    let rows: f64 = tail.rows.range(n + 2..).map(|(&big_n, r)| (big_n - n - 1) as f64 * r.measure).sum();
    Ok(rows + (tail.n_max - n) as f64 * tail.overflow)
}

/// Error bound of [`tail_sum_predictor`] from per-bucket errors.
pub fn tail_sum_error(tail: &TailTable, n: u64) -> Result<f64, StatsError> {
    if n >= tail.n_max {
        return Err(StatsError::RangeExceeded { n, n_max: tail.n_max });
    }
    Ok(tail.rows.range(n + 2..).map(|(&big_n, r)| (big_n - n - 1) as f64 * r.error).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
    pub range: [f64; 2],
    pub r2: f64,
}

/// OLS of `log(value)` on `log(k)` over `k in [lo, hi]`; non-positive values are skipped.
pub fn loglog_fit(points: &[(f64, f64)], range: [f64; 2]) -> Result<SlopeFit, StatsError> {
    if !(range[0] > 0.0 && range[0] < range[1]) {
        return Err(StatsError::InvalidInput(format!("bad fit range {range:?}")));
    }
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(k, v)| *k >= range[0] && *k <= range[1] && *v > 0.0 && v.is_finite())
        .map(|(k, v)| (k.ln(), v.ln()))
        .collect();
    if pts.len() < 5 {
        return Err(StatsError::InsufficientData { got: pts.len() });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(StatsError::InsufficientData { got: 1 });
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r2 = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    Ok(SlopeFit {
        slope,
        intercept,
        stderr: (ss_res / (n - 2.0) / sxx).sqrt(),
        range,
        r2,
    })
}

/// [`loglog_fit`] on an integer-keyed table.
pub fn loglog_fit_table(table: &BTreeMap<u64, f64>, range: [f64; 2]) -> Result<SlopeFit, StatsError> {
    let pts: Vec<(f64, f64)> = table.iter().map(|(&k, &v)| (k as f64, v)).collect();
    loglog_fit(&pts, range)
}

/// Comparison of direct correlations with the predictor up to one constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingAgreement {
    /// `(n, corr / predictor)` at lags where `|corr| > sigmas * stderr`.
    pub ratios: Vec<(u64, f64)>,
    /// Midpoint of the ratio magnitudes, signed, when the ratios share a sign.
    pub constant: Option<f64>,
    /// Largest relative deviation of a ratio from the constant.
    pub spread: f64,
    pub pass: bool,
}

/// Passes when every significant ratio lies within `+-tol` of one common constant.
pub fn mixing_agreement(corr: &[CorrEstimate], predictor: &BTreeMap<u64, f64>, sigmas: f64, tol: f64) -> MixingAgreement {
    let ratios: Vec<(u64, f64)> = corr
        .iter()
        .filter(|c| c.value.abs() > sigmas * c.std_error)
        .filter_map(|c| predictor.get(&c.n).filter(|p| **p > 0.0).map(|p| (c.n, c.value / p)))
        .collect();
    let same_sign = !ratios.is_empty() && (ratios.iter().all(|r| r.1 > 0.0) || ratios.iter().all(|r| r.1 < 0.0));
    if !same_sign {
        return MixingAgreement {
            ratios,
            constant: None,
            spread: f64::INFINITY,
            pass: false,
        };
    }
    let lo = ratios.iter().map(|r| r.1.abs()).fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().map(|r| r.1.abs()).fold(0.0, f64::max);
    // best constant for relative deviation: midpoint of [lo, hi]
    let mid = 0.5 * (lo + hi);
    let spread = (hi - mid) / mid;
    let sign = ratios[0].1.signum();
    MixingAgreement {
        ratios,
        constant: Some(sign * mid),
        spread,
        pass: spread <= tol,
    }
}
