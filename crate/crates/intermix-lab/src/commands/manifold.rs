use anyhow::{Context, Result};
use intermix_core::invariant_geometry::{local_manifold_graph, stable_shoot, ManifoldKind, Quadrant};
use intermix_core::torus_map::involution_r1;
use serde::Serialize;

use super::Ctx;
use crate::output::{Cell, Check, RunSummary, Table};

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ShootRow {
    pub x0: f64,
    pub y0: f64,
    pub residual_b: f64,
    pub residual_b_half_tol: f64,
    pub ratio: f64,
    pub steps_checked: u64,
}

#[derive(Serialize)]
struct ShootDoc<'a> {
    a: f64,
    tol: f64,
    n_max: u64,
    results: &'a [ShootRow],
}

pub fn shoot_rows(ctx: &Ctx) -> Result<Vec<ShootRow>> {
    let c = &ctx.cfg;
    c.manifold_x0
        .iter()
        .map(|&x0| {
            let a = stable_shoot(&ctx.spec, x0, c.manifold_n_max, c.manifold_tol).with_context(|| format!("shooting from x0 = {x0}"))?;
            let b =
                stable_shoot(&ctx.spec, x0, c.manifold_n_max, 0.5 * c.manifold_tol).with_context(|| format!("shooting from x0 = {x0}"))?;
            Ok(ShootRow {
                x0,
                y0: a.y0,
                residual_b: a.residual_b,
                residual_b_half_tol: b.residual_b,
                ratio: a.residual_b / b.residual_b,
                steps_checked: a.steps_checked,
            })
        })
        .collect()
}

pub fn shoot_checks(rows: &[ShootRow]) -> Vec<Check> {
    rows.iter()
        .map(|r| {
            let ok = r.residual_b.is_finite() && r.residual_b_half_tol.is_finite() && (0.5..=2.0).contains(&r.ratio);
            Check::new(format!("asymptote.stable@{}", r.x0), r.ratio, "finite, ratio in [0.5, 2]", ok)
        })
        .collect()
}

pub fn run(ctx: &Ctx) -> Result<RunSummary> {
    let c = &ctx.cfg;
    let mut w = ctx.writer()?;
    let mut s = ctx.summary("manifold");
    let rows = shoot_rows(ctx)?;
    for ch in shoot_checks(&rows) {
        s.check(ch);
    }
    w.json(
        "shoot.json",
        &ShootDoc {
            a: ctx.spec.a,
            tol: c.manifold_tol,
            n_max: c.manifold_n_max,
            results: &rows,
        },
    )?;

    let mut stable = Table::new(&["x", "y", "branch"]);
    let mut unstable = Table::new(&["x", "y", "branch"]);
    let mut worst: f64 = 0.0;
    for (sb, ub) in [(Quadrant::Q2, Quadrant::Q1), (Quadrant::Q4, Quadrant::Q3)] {
        let st = local_manifold_graph(&ctx.spec, ManifoldKind::Stable, sb, c.manifold_width, c.manifold_step)?;
        let un = local_manifold_graph(&ctx.spec, ManifoldKind::Unstable, ub, c.manifold_width, c.manifold_step)?;
        for (p, q) in st.vertices.iter().zip(&un.vertices) {
            worst = worst.max(involution_r1(&ctx.spec, *p).dist(*q));
            stable.push(vec![Cell::from(p.x), Cell::from(p.y), Cell::from(sb.tag())]);
            unstable.push(vec![Cell::from(q.x), Cell::from(q.y), Cell::from(ub.tag())]);
        }
    }
    s.check(Check::at_most("unstable_is_r1_image", worst, 1e-12));
    w.table("stable", &stable)?;
    w.table("unstable", &unstable)?;
    w.finish(s)
}
