use anyhow::Result;
use intermix_core::inducing::{tail_by_mc, tail_by_quadrature_partial, QuadratureOptions, QuadratureScheme, TailTable};
use intermix_core::statistics::{loglog_fit, SlopeFit, StatsError};

use super::Ctx;
use crate::output::{Cell, Check, RunSummary, Table, Writer};

pub fn options(ctx: &Ctx) -> QuadratureOptions {
    let c = &ctx.cfg;
    QuadratureOptions {
        scheme: if c.tail_plain {
            QuadratureScheme::PlainBox
        } else {
            QuadratureScheme::EntryChart
        },
        n_max: c.tail_n_max,
        depth_max: c.tail_depth_max,
        deep_n: c.tail_deep_n,
        far_depth: c.tail_far_depth,
        cell_cap: c.tail_cell_cap,
        ..QuadratureOptions::default()
    }
}

/// Records a slope check and the fit, or a failed check when the fit is impossible.
pub fn fit_check(
    s: &mut RunSummary,
    w: Option<(&mut Writer, &str)>,
    name: &str,
    fit: Result<SlopeFit, StatsError>,
    target: f64,
    tol: f64,
) -> Result<()> {
    match fit {
        Ok(f) => {
            s.check(Check::within(format!("{name}.slope"), f.slope, target, tol));
            if let Some((w, file)) = w {
                w.fit(file, &f)?;
            }
            s.fits.insert(name.into(), f);
        }
        Err(e) => s.check(Check::new(
            format!("{name}.slope"),
            f64::NAN,
            format!("{target} +- {tol} ({e})"),
            false,
        )),
    }
    Ok(())
}

pub fn measure_points(t: &TailTable) -> Vec<(f64, f64)> {
    t.rows.iter().map(|(&n, r)| (n as f64, r.measure)).collect()
}

pub fn tail_points(t: &TailTable) -> Vec<(f64, f64)> {
    (1..=t.n_max).map(|n| (n as f64, t.tail(n))).collect()
}

/// Largest `error / measure` over buckets in the fit range.
pub fn worst_error_ratio(t: &TailTable, range: [f64; 2]) -> f64 {
    (range[0].ceil() as u64..=(range[1].floor() as u64).min(t.n_max))
        .map(|n| {
            if t.measure(n) > 0.0 {
                t.error(n) / t.measure(n)
            } else {
                f64::INFINITY
            }
        })
        .fold(0.0, f64::max)
}

pub fn tail_table_csv(t: &TailTable) -> Table {
    let mut tab = Table::new(&["N", "measure", "error", "method", "tail", "tail_error"]);
    for (&n, r) in &t.rows {
        tab.push(vec![
            Cell::from(n),
            Cell::from(r.measure),
            Cell::from(r.error),
            Cell::from("quadrature"),
            Cell::from(t.tail(n)),
            Cell::from(t.tail_error(n)),
        ]);
    }
    tab
}

pub fn run(ctx: &Ctx) -> Result<RunSummary> {
    let c = &ctx.cfg;
    let gate = ctx.gate()?;
    let mut w = ctx.writer()?;
    let mut s = ctx.summary("tail");
    let t = tail_by_quadrature_partial(&ctx.spec, &gate, &options(ctx))?;
    s.partial = t.partial;

    w.table("tail", &tail_table_csv(&t))?;
    w.tail_table("tail_table.json", &t)?;
    w.text("config.resolved", &ctx.resolved_config())?;
    fit_check(
        &mut s,
        Some((&mut w, "tail_fit.json")),
        "tail.measure",
        loglog_fit(&measure_points(&t), c.tail_fit),
        -5.0,
        0.3,
    )?;
    fit_check(
        &mut s,
        Some((&mut w, "tail_cumulative_fit.json")),
        "tail.cumulative",
        loglog_fit(&tail_points(&t), c.tail_fit),
        -4.0,
        0.3,
    )?;
    s.check(Check::new(
        "tail.error_ratio",
        worst_error_ratio(&t, c.tail_fit),
        "< 0.1",
        worst_error_ratio(&t, c.tail_fit) < 0.1,
    ));
    for (k, v) in [
        ("total_mass", t.total_mass),
        ("overflow", t.overflow),
        ("unresolved", t.unresolved),
        ("flux", t.flux()),
    ] {
        s.info.insert(k.into(), v);
    }

    if c.tail_mc_samples > 0 {
        let mc = tail_by_mc(&ctx.spec, &gate, c.tail_mc_samples, ctx.seed, c.tail_n_max)?;
        let mut tab = Table::new(&["N", "measure", "error", "method", "quadrature", "quadrature_error"]);
        let mut worst_z: f64 = 0.0;
        for (&n, r) in &mc.rows {
            tab.push(vec![
                Cell::from(n),
                Cell::from(r.measure),
                Cell::from(r.error),
                Cell::from("monte_carlo"),
                Cell::from(t.measure(n)),
                Cell::from(t.error(n)),
            ]);
            if n <= 10 {
                let sigma = r.error + t.error(n);
                if sigma > 0.0 {
                    worst_z = worst_z.max((r.measure - t.measure(n)).abs() / sigma);
                }
            }
        }
        w.table("tail_mc", &tab)?;
        s.check(Check::at_most("tail.mc_agreement_sigmas", worst_z, 3.0));
    }
    w.finish(s)
}
