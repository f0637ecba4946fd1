//! Passage diagnostics: entry time into the fat or thin region, exit index and energy.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::chart::stable_crossing;
use super::{GateRegion, InducingError};
use crate::invariant_geometry::Quadrant;
use crate::numerics::stream_rng;
use crate::torus_map::{apply, apply_inverse, quasi_h_local, MapSpec, TorusPoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Fat,
    Thin,
}

impl Region {
    pub fn tag(self) -> &'static str {
        match self {
            Region::Fat => "fat",
            Region::Thin => "thin",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PassageDiagnostics {
    pub entry: TorusPoint,
    /// Return time.
    pub n_return: u64,
    pub ell: u64,
    pub n: u64,
    pub e_ell: f64,
    pub region: Region,
    pub quadrant: Quadrant,
    /// `max_{ell <= k <= n} | |E_k|^(1/2) - |E_ell|^(1/2) |` over `y_ell^2 |x_ell|` (fat)
    /// or `|x_ell|^3 y_ell` (thin).
    pub bridge: f64,
}

/// Diagnose the passage of an entry point `p in W`. Points entering from the fourth
/// quadrant are first mapped to the second by `-id`, the product of the two involutions.
pub fn passage_diagnostics(
    spec: &MapSpec,
    gate: &GateRegion,
    p: TorusPoint,
    m: f64,
    n_max: u64,
) -> Result<PassageDiagnostics, InducingError> {
    passage_diagnostics_multi(spec, gate, p, &[m], n_max)?.remove(0)
}

/// Diagnostics of one passage for several thresholds `M`, sharing a single orbit.
pub fn passage_diagnostics_multi(
    spec: &MapSpec,
    gate: &GateRegion,
    p: TorusPoint,
    ms: &[f64],
    n_max: u64,
) -> Result<Vec<Result<PassageDiagnostics, InducingError>>, InducingError> {
    if let Some(m) = ms.iter().find(|m| !(**m > 0.0)) {
        return Err(InducingError::InvalidInput(format!("M = {m} must be positive")));
    }
    if !gate.in_entry_set(spec, p) {
        return Err(InducingError::InvalidInput("point is not in the entry set".into()));
    }
    let quadrant = Quadrant::of(p);
    let start = match quadrant {
        Quadrant::Q4 | Quadrant::Q3 => p.neg(),
        _ => p,
    };
    let mut orbit = vec![start];
    let mut z = start;
    loop {
        z = apply(spec, z);
        if !gate.contains(z) {
            break;
        }
        orbit.push(z);
        if orbit.len() as u64 > n_max {
            return Err(InducingError::TimeoutExceeded { n_max });
        }
    }
    Ok(ms.iter().map(|&m| classify(spec, &orbit, p, quadrant, m)).collect())
}

fn classify(spec: &MapSpec, orbit: &[TorusPoint], p: TorusPoint, quadrant: Quadrant, m: f64) -> Result<PassageDiagnostics, InducingError> {
    let energy = |q: TorusPoint| quasi_h_local(spec, q.x, q.y);
    let mut hit = None;
    for (k, &q) in orbit.iter().enumerate() {
        if q.x > 0.0 || q.y < 0.0 {
            continue;
        }
        let e = energy(q);
        if m * q.x.powi(4) <= e {
            hit = Some((k, Region::Fat));
            break;
        }
        if m * q.y * q.y <= -e {
            hit = Some((k, Region::Thin));
            break;
        }
    }
    let (ell, region) = hit.ok_or(InducingError::NoMembership)?;
    let n = match region {
        Region::Fat => orbit.iter().rposition(|q| q.x <= 0.0),
        Region::Thin => orbit.iter().rposition(|q| q.y >= 0.0),
    }
    .unwrap_or(0);
    if n < ell {
        return Err(InducingError::NoMembership);
    }
    let ql = orbit[ell];
    let e_ell = energy(ql);
    let root = e_ell.abs().sqrt();
    let drift = orbit[ell..=n]
        .iter()
        .map(|&q| (energy(q).abs().sqrt() - root).abs())
        .fold(0.0, f64::max);
    let scale = match region {
        Region::Fat => ql.y * ql.y * ql.x.abs(),
        Region::Thin => ql.x.abs().powi(3) * ql.y,
    };
    Ok(PassageDiagnostics {
        entry: p,
        n_return: orbit.len() as u64,
        ell: ell as u64,
        n: n as u64,
        e_ell,
        region,
        quadrant,
        bridge: if scale > 0.0 { drift / scale } else { 0.0 },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PassageSampling {
    pub m: f64,
    /// Energy range covered by log-uniform strata.
    pub e_lo: f64,
    pub e_hi: f64,
    pub strata: u32,
    /// Samples per stratum and region.
    pub per_stratum: u32,
    pub n_max: u64,
}

impl Default for PassageSampling {
    fn default() -> Self {
        Self {
            m: 32.0,
            e_lo: 1e-12,
            e_hi: 1e-2,
            strata: 10,
            per_stratum: 40,
            n_max: 10_000_000,
        }
    }
}

/// Entry points near the stable manifold, stratified by target energy, with their
/// diagnostics. Points whose orbit never enters either region are dropped.
pub fn sample_passages(
    spec: &MapSpec,
    gate: &GateRegion,
    s: &PassageSampling,
    seed: u64,
) -> Result<Vec<PassageDiagnostics>, InducingError> {
    Ok(sample_passages_sweep(spec, gate, s, &[], seed)?.remove(0))
}

/// As [`sample_passages`], also classifying every sampled orbit with each extra threshold
/// in `sweep`. The first list uses `s.m`, the rest follow `sweep` in order.
pub fn sample_passages_sweep(
    spec: &MapSpec,
    gate: &GateRegion,
    s: &PassageSampling,
    sweep: &[f64],
    seed: u64,
) -> Result<Vec<Vec<PassageDiagnostics>>, InducingError> {
    if gate.boundary.is_some() {
        return Err(InducingError::InvalidInput("passage sampling needs the square gate".into()));
    }
    if !(s.e_lo > 0.0 && s.e_hi > s.e_lo && s.strata > 0) {
        return Err(InducingError::InvalidInput("bad energy strata".into()));
    }
    let ms: Vec<f64> = std::iter::once(s.m).chain(sweep.iter().copied()).collect();
    if let Some(m) = ms.iter().find(|m| !(**m > 0.0)) {
        return Err(InducingError::InvalidInput(format!("M = {m} must be positive")));
    }
    let delta = gate.delta;
    let (l0, l1) = (s.e_lo.log10(), s.e_hi.log10());
    let jobs: Vec<(u32, Region)> = (0..s.strata).flat_map(|i| [(i, Region::Fat), (i, Region::Thin)]).collect();
    let per_job: Vec<Vec<Vec<PassageDiagnostics>>> = jobs
        .par_iter()
        .enumerate()
        .map(|(idx, &(i, region))| {
            let mut rng = stream_rng(seed, idx as u64);
            let lo = l0 + (l1 - l0) * i as f64 / s.strata as f64;
            let hi = l0 + (l1 - l0) * (i + 1) as f64 / s.strata as f64;
            let mut out = vec![Vec::new(); ms.len()];
            for _ in 0..s.per_stratum {
                let t = 0.02 + 0.96 * rng.gen::<f64>();
                let target = 10f64.powf(lo + (hi - lo) * rng.gen::<f64>());
                let ys = stable_crossing(spec, delta, t);
                let eta = 1e-7;
                let h = |y: f64| quasi_h_local(spec, -delta + t * y, y);
                let slope = (h(ys + eta) - h(ys - eta)) / (2.0 * eta);
                let dy = target / slope.abs();
                let y = match region {
                    Region::Fat => ys + dy,
                    Region::Thin => ys - dy,
                };
                if !(y > 0.0 && y <= delta) {
                    continue;
                }
                let p = apply_inverse(spec, TorusPoint::raw(-delta + t * y, y));
                if let Ok(all) = passage_diagnostics_multi(spec, gate, p, &ms, s.n_max) {
                    for (o, d) in out.iter_mut().zip(all) {
                        if let Ok(d) = d {
                            o.push(d);
                        }
                    }
                }
            }
            out
        })
        .collect();
    let mut merged = vec![Vec::new(); ms.len()];
    for job in per_job {
        for (m, d) in merged.iter_mut().zip(job) {
            m.extend(d);
        }
    }
    Ok(merged)
}
