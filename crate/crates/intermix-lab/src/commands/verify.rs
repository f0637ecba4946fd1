use anyhow::Result;
use intermix_core::invariant_geometry::{cone_ratio_stats, ConeStats};
use intermix_core::torus_map::{drift_ratio, identity_errors, IdentityErrors, MapSpec};
use serde::Serialize;

use super::Ctx;
use crate::output::{Check, RunSummary};

pub fn identity_checks(spec: &MapSpec, samples: u64, seed: u64) -> (IdentityErrors, Vec<Check>) {
    let e = identity_errors(spec, samples, seed);
    let mut checks: Vec<Check> = [
        ("inverse", e.inverse),
        ("r_involution", e.r_involution),
        ("r1_involution", e.r1_involution),
        ("r_conjugacy", e.r_conjugacy),
        ("r1_conjugacy", e.r1_conjugacy),
    ]
    .into_iter()
    .map(|(n, v)| Check::at_most(format!("identity.{n}"), v, 1e-12))
    .collect();
    checks.push(Check::at_most("identity.det", e.det, 1e-14));
    checks.push(Check::at_most("identity.cone_invariance", e.cone_violations as f64, 0.0));
    (e, checks)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Drift {
    pub delta: f64,
    pub ratio: f64,
}

pub fn drift_checks(spec: &MapSpec, deltas: &[f64], samples: u64, seed: u64) -> (Vec<Drift>, Vec<Check>) {
    let d: Vec<Drift> = deltas
        .iter()
        .map(|&delta| Drift {
            delta,
            ratio: drift_ratio(spec, delta, samples, seed),
        })
        .collect();
    let mut checks = Vec::new();
    if let Some(first) = d.first() {
        checks.push(Check::new(
            format!("drift.bounded@{}", first.delta),
            first.ratio,
            "< 1000",
            first.ratio < 1e3,
        ));
    }
    for w in d.windows(2) {
        let growth = w[1].ratio / w[0].ratio;
        checks.push(Check::at_most(format!("drift.halving@{}", w[0].delta), growth, 4.0));
    }
    (d, checks)
}

pub fn cone_checks(spec: &MapSpec, scales: &[f64], samples: u64, seed: u64) -> Result<(Vec<ConeStats>, Vec<Check>)> {
    let stats = scales
        .iter()
        .map(|&s| cone_ratio_stats(spec, samples, seed, s))
        .collect::<Result<Vec<_>, _>>()?;
    let mut checks = Vec::new();
    for c in &stats {
        checks.push(Check::new(
            format!("cone.k_minus@{}", c.scale),
            c.k_minus_hat,
            "> 0",
            c.k_minus_hat > 0.0,
        ));
        checks.push(Check::new(
            format!("cone.k_plus@{}", c.scale),
            c.k_plus_hat,
            "finite",
            c.k_plus_hat.is_finite(),
        ));
    }
    for w in stats.windows(2) {
        for (name, a, b) in [
            ("k_minus", w[0].k_minus_hat, w[1].k_minus_hat),
            ("k_plus", w[0].k_plus_hat, w[1].k_plus_hat),
        ] {
            let factor = (a / b).max(b / a);
            checks.push(Check::at_most(format!("cone.{name}_scale_agreement"), factor, 2.0));
        }
    }
    Ok((stats, checks))
}

#[derive(Serialize)]
struct Report<'a> {
    identity: &'a IdentityErrors,
    drift: &'a [Drift],
    cone: &'a [ConeStats],
    checks: &'a [Check],
}

pub fn run(ctx: &Ctx) -> Result<RunSummary> {
    let c = &ctx.cfg;
    let mut w = ctx.writer()?;
    let mut s = ctx.summary("verify");
    let (ident, mut checks) = identity_checks(&ctx.spec, c.verify_samples, ctx.seed);
    let (drift, dc) = drift_checks(&ctx.spec, &c.verify_drift_deltas, c.verify_samples, ctx.seed);
    let (cone, cc) = cone_checks(&ctx.spec, &c.verify_cone_scales, c.verify_cone_samples, ctx.seed)?;
    checks.extend(dc);
    checks.extend(cc);
    for d in &drift {
        s.info.insert(format!("drift_ratio@{}", d.delta), d.ratio);
    }
    w.json(
        "verify.json",
        &Report {
            identity: &ident,
            drift: &drift,
            cone: &cone,
            checks: &checks,
        },
    )?;
    for ch in checks {
        s.check(ch);
    }
    w.finish(s)
}
