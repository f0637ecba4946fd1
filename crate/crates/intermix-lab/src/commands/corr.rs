use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{Context, Result};
use intermix_core::inducing::TailTable;
use intermix_core::statistics::{
    estimate_corr_series, loglog_fit, mixing_agreement, tail_sum_error, tail_sum_predictor, CorrEstimate, MixingAgreement, Normalization,
    Observable, StatsError,
};
use intermix_core::TorusPoint;

use super::tail::fit_check;
use super::{Ctx, LabError};
use crate::output::{Cell, Check, RunSummary, Table, TailDoc};

pub fn tail_path(ctx: &Ctx) -> PathBuf {
    ctx.cfg
        .corr_tail
        .clone()
        .unwrap_or_else(|| ctx.cfg.output_dir.join("tail_table.json"))
}

pub fn load_tail(ctx: &Ctx) -> Result<TailTable> {
    let path = tail_path(ctx);
    let text = std::fs::read_to_string(&path).map_err(|_| LabError::MissingInput {
        path: path.clone(),
        hint: "run `tail` first or set corr.tail".into(),
    })?;
    let doc: TailDoc = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    Ok(doc.table)
}

pub fn observables(ctx: &Ctx) -> Result<(Observable, Observable)> {
    let c = &ctx.cfg;
    let gate = ctx.gate()?;
    let center = TorusPoint::new(c.corr_center[0], c.corr_center[1]);
    Ok((
        Observable::bump(&gate, center, c.corr_radius, Normalization::MeanOne)?,
        Observable::bump(&gate, center, c.corr_radius, Normalization::MeanZero)?,
    ))
}

/// Predictor at every lag `1 <= n < N_max`.
pub fn predictor_curve(t: &TailTable) -> Result<BTreeMap<u64, (f64, f64)>> {
    (1..t.n_max)
        .map(|n| Ok((n, (tail_sum_predictor(t, n)?, tail_sum_error(t, n)?))))
        .collect()
}

pub fn mixing(ctx: &Ctx, corr: &[CorrEstimate], pred: &BTreeMap<u64, (f64, f64)>) -> MixingAgreement {
    let small: Vec<CorrEstimate> = corr.iter().filter(|e| e.n >= 1).cloned().collect();
    let p: BTreeMap<u64, f64> = pred.iter().map(|(&n, &(v, _))| (n, v)).collect();
    mixing_agreement(&small, &p, ctx.cfg.corr_sigmas, ctx.cfg.corr_tol)
}

pub fn run(ctx: &Ctx) -> Result<RunSummary> {
    let c = &ctx.cfg;
    let tail = load_tail(ctx)?;
    let (phi, phi0) = observables(ctx)?;
    let mut w = ctx.writer()?;
    let mut s = ctx.summary("corr");
    s.partial = tail.partial;

    if let Some(&n) = c.corr_lags.iter().find(|&&n| n >= tail.n_max) {
        return Err(StatsError::RangeExceeded { n, n_max: tail.n_max }.into());
    }
    let pred = predictor_curve(&tail)?;
    let corr = estimate_corr_series(&ctx.spec, &phi, &phi, &c.corr_lags, c.corr_samples, ctx.seed)?;
    let corr0 = estimate_corr_series(&ctx.spec, &phi0, &phi0, &c.corr_lags, c.corr_samples, ctx.seed)?;

    let mut tab = Table::new(&[
        "n",
        "value",
        "stderr",
        "samples",
        "mean_zero_value",
        "mean_zero_stderr",
        "predictor",
    ]);
    for (a, b) in corr.iter().zip(&corr0) {
        tab.push(vec![
            Cell::from(a.n),
            Cell::from(a.value),
            Cell::from(a.std_error),
            Cell::from(a.samples),
            Cell::from(b.value),
            Cell::from(b.std_error),
            pred.get(&a.n).map_or(Cell::Empty, |p| Cell::from(p.0)),
        ]);
    }
    w.table("correlation", &tab)?;
    let mut ptab = Table::new(&["n", "predictor", "error"]);
    for (&n, &(v, e)) in &pred {
        ptab.push(vec![Cell::from(n), Cell::from(v), Cell::from(e)]);
    }
    w.table("predictor", &ptab)?;

    let pts: Vec<(f64, f64)> = pred.iter().map(|(&n, &(v, _))| (n as f64, v)).collect();
    fit_check(
        &mut s,
        Some((&mut w, "predictor_fit.json")),
        "corr.predictor",
        loglog_fit(&pts, c.corr_fit),
        -3.0,
        0.3,
    )?;

    if let Some(e0) = corr.iter().find(|e| e.n == 0) {
        let exact = phi.mean_square() - phi.numeric_mean * phi.numeric_mean;
        let z = (e0.value - exact).abs() / e0.std_error;
        s.check(Check::at_most("corr.lag0_variance_sigmas", z, 3.0));
        s.info.insert("corr.lag0_quadrature".into(), exact);
    }

    let m = mixing(ctx, &corr, &pred);
    s.check(Check::new(
        "corr.mixing_agreement",
        m.spread,
        format!("<= {} with one sign", c.corr_tol),
        m.pass,
    ));
    s.info.insert("corr.significant_lags".into(), m.ratios.len() as f64);
    if let Some(k) = m.constant {
        s.info.insert("corr.mixing_constant".into(), k);
    }
    w.json("mixing.json", &m)?;
    w.finish(s)
}
