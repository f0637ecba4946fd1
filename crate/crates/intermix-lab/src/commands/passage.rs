use std::collections::BTreeMap;

use anyhow::Result;
use intermix_core::inducing::{sample_passages_sweep, PassageDiagnostics, PassageSampling, Region};
use intermix_core::statistics::loglog_fit;
use serde::Serialize;

use super::tail::fit_check;
use super::Ctx;
use crate::output::{Cell, Check, RunSummary, Table};

/// The four passage laws: region, quantity, target slope, tolerance.
pub const LAWS: [(Region, &str, f64, f64); 4] = [
    (Region::Fat, "ell", -0.25, 0.03),
    (Region::Fat, "n_minus_ell", -0.25, 0.03),
    (Region::Thin, "ell", -0.25, 0.03),
    (Region::Thin, "n_minus_ell", -0.5, 0.05),
];

pub fn sampling(ctx: &Ctx) -> PassageSampling {
    let c = &ctx.cfg;
    PassageSampling {
        m: c.passage_m,
        e_lo: c.passage_energy[0],
        e_hi: c.passage_energy[1],
        strata: c.passage_strata,
        per_stratum: c.passage_per_stratum,
        n_max: c.passage_n_max,
    }
}

pub fn law_points(d: &[PassageDiagnostics], region: Region, quantity: &str) -> Vec<(f64, f64)> {
    d.iter()
        .filter(|p| p.region == region)
        .map(|p| {
            let v = if quantity == "ell" { p.ell } else { p.n - p.ell };
            (p.e_ell.abs(), v as f64)
        })
        .collect()
}

/// Samples per log-uniform energy stratum, by `|E_ell|`.
pub fn coverage(d: &[PassageDiagnostics], s: &PassageSampling, region: Region) -> Vec<u64> {
    let (l0, l1) = (s.e_lo.log10(), s.e_hi.log10());
    let mut counts = vec![0u64; s.strata as usize];
    for p in d.iter().filter(|p| p.region == region) {
        let f = (p.e_ell.abs().log10() - l0) / (l1 - l0);
        if (0.0..1.0).contains(&f) {
            counts[(f * s.strata as f64) as usize] += 1;
        }
    }
    counts
}

#[derive(Serialize)]
struct FitDoc<'a> {
    fits: &'a BTreeMap<String, intermix_core::statistics::SlopeFit>,
    coverage: BTreeMap<&'static str, Vec<u64>>,
    samples: usize,
    m_sweep: BTreeMap<String, BTreeMap<String, Option<f64>>>,
}

pub fn run(ctx: &Ctx) -> Result<RunSummary> {
    let c = &ctx.cfg;
    let gate = ctx.square_gate("passage sampling")?;
    let mut w = ctx.writer()?;
    let mut s = ctx.summary("passage");
    let sp = sampling(ctx);
    let mut all = sample_passages_sweep(&ctx.spec, &gate, &sp, &c.passage_m_sweep, ctx.seed)?;
    let d = all.remove(0);

    let mut tab = Table::new(&["x", "y", "N", "ell", "n", "E_ell", "region", "quadrant", "bridge"]);
    for p in &d {
        tab.push(vec![
            Cell::from(p.entry.x),
            Cell::from(p.entry.y),
            Cell::from(p.n_return),
            Cell::from(p.ell),
            Cell::from(p.n),
            Cell::from(p.e_ell),
            Cell::from(p.region.tag()),
            Cell::from(p.quadrant.tag()),
            Cell::from(p.bridge),
        ]);
    }
    w.table("passage", &tab)?;

    for (region, q, target, tol) in LAWS {
        let name = format!("passage.{}_{q}", region.tag());
        let pts = law_points(&d, region, q);
        let fit = loglog_fit(&pts, c.passage_fit);
        if let Ok(f) = &fit {
            s.check(Check::new(format!("{name}.r2"), f.r2, ">= 0.98", f.r2 >= 0.98));
            let used: Vec<f64> = pts
                .iter()
                .map(|p| p.0)
                .filter(|e| *e >= c.passage_fit[0] && *e <= c.passage_fit[1])
                .collect();
            let lo = used.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = used.iter().cloned().fold(0.0, f64::max);
            s.info.insert(format!("{name}.sampled_decades"), (hi / lo).log10());
            let window = (f.range[1] / f.range[0]).log10();
            s.check(Check::new(format!("{name}.decades"), window, ">= 8", window >= 8.0 - 1e-9));
        }
        let file = format!("passage_fit_{}_{q}.json", region.tag());
        fit_check(&mut s, Some((&mut w, &file)), &name, fit, target, tol)?;
    }

    let mut sweep = BTreeMap::new();
    for (m, dm) in c.passage_m_sweep.iter().zip(&all) {
        let mut slopes = BTreeMap::new();
        for (region, q, _, _) in LAWS {
            let name = format!("passage.{}_{q}", region.tag());
            let slope = loglog_fit(&law_points(dm, region, q), c.passage_fit).ok().map(|f| f.slope);
            slopes.insert(name, slope);
        }
        sweep.insert(m.to_string(), slopes);
    }
    for (region, q, _, tol) in LAWS {
        let name = format!("passage.{}_{q}", region.tag());
        let Some(base) = s.fits.get(&name).map(|f| f.slope) else {
            continue;
        };
        let shift = sweep
            .values()
            .map(|v| v[&name].map_or(f64::INFINITY, |x| (x - base).abs()))
            .fold(0.0, f64::max);
        s.check(Check::at_most(format!("{name}.m_sweep_shift"), shift, tol));
    }

    let mut cov = BTreeMap::new();
    for region in [Region::Fat, Region::Thin] {
        let counts = coverage(&d, &sp, region);
        let empty = counts.iter().filter(|&&n| n == 0).count();
        s.check(Check::new(
            format!("passage.{}_coverage", region.tag()),
            empty as f64,
            "no empty stratum",
            empty == 0,
        ));
        cov.insert(region.tag(), counts);
    }
    w.json(
        "passage_fit.json",
        &FitDoc {
            fits: &s.fits,
            coverage: cov,
            samples: d.len(),
            m_sweep: sweep,
        },
    )?;
    s.info.insert("samples".into(), d.len() as f64);
    w.finish(s)
}
