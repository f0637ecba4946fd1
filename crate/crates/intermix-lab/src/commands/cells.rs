use anyhow::Result;
use intermix_core::inducing::{cell_series, cell_sides, symcover_check, CellGeometry, GateSide, Region};
use intermix_core::statistics::loglog_fit;
use intermix_core::torus_map::{involution_r1, TorusPoint};

use super::tail::fit_check;
use super::Ctx;
use crate::output::{Cell, RunSummary, Table};

/// Geometric grid from `k_min` to `k_max` with `per_octave` points per doubling.
pub fn k_grid(k_min: u64, k_max: u64, per_octave: u32) -> Vec<u64> {
    let mut ks = Vec::new();
    let mut i = 0;
    loop {
        let k = (k_min as f64 * 2f64.powf(i as f64 / per_octave.max(1) as f64)).round() as u64;
        if k > k_max {
            break;
        }
        if ks.last() != Some(&k) {
            ks.push(k);
        }
        i += 1;
    }
    ks
}

/// Quantity name, accessor, target slope, tolerance.
pub const LAWS: [(&str, fn(&CellGeometry) -> f64, f64, f64); 3] = [
    ("v_extent", |c| c.v_extent, -3.0, 0.2),
    ("h_extent", |c| c.h_extent, -2.0, 0.2),
    ("area", |c| c.area, -5.0, 0.3),
];

pub fn run(ctx: &Ctx) -> Result<RunSummary> {
    let c = &ctx.cfg;
    let gate = ctx.gate()?;
    let side = GateSide::left_of(&gate);
    let mut w = ctx.writer()?;
    let mut s = ctx.summary("cells");
    let ks = k_grid(c.cells_k[0], c.cells_k[1], c.cells_per_octave);
    let range = [c.cells_k[0] as f64, c.cells_k[1] as f64];

    let mut rows = Table::new(&["k", "v_extent", "h_extent", "area", "region", "status"]);
    let mut polys = Table::new(&["region", "k", "image", "side", "index", "x", "y"]);
    for region in [Region::Fat, Region::Thin] {
        let series = cell_series(&ctx.spec, &side, region, &ks);
        let mut ok = Vec::new();
        for (k, r) in ks.iter().zip(series) {
            match r {
                Ok(g) => {
                    rows.push(vec![
                        Cell::from(*k),
                        Cell::from(g.v_extent),
                        Cell::from(g.h_extent),
                        Cell::from(g.area),
                        Cell::from(region.tag()),
                        Cell::from("ok"),
                    ]);
                    ok.push(g);
                }
                Err(e) => rows.push(vec![
                    Cell::from(*k),
                    Cell::Empty,
                    Cell::Empty,
                    Cell::Empty,
                    Cell::from(region.tag()),
                    Cell::Text(format!("unresolvable: {e}")),
                ]),
            }
        }
        for g in &ok {
            let (a, b) = cell_sides(&ctx.spec, &side, region, g.k)?;
            for (side_tag, pts) in [("a", &a), ("b", &b)] {
                for (i, p) in pts.iter().enumerate() {
                    let m = involution_r1(&ctx.spec, TorusPoint::raw(p[0], p[1]));
                    for (image, x, y) in [("c", p[0], p[1]), ("c_prime", m.x, m.y)] {
                        polys.push(vec![
                            Cell::from(region.tag()),
                            Cell::from(g.k),
                            Cell::from(image),
                            Cell::from(side_tag),
                            Cell::from(i as u64),
                            Cell::from(x),
                            Cell::from(y),
                        ]);
                    }
                }
            }
        }
        for (q, f, target, tol) in LAWS {
            let pts: Vec<(f64, f64)> = ok.iter().map(|g| (g.k as f64, f(g))).collect();
            let name = format!("cells.{}_{q}", region.tag());
            let file = format!("cells_fit_{}_{q}.json", region.tag());
            fit_check(&mut s, Some((&mut w, &file)), &name, loglog_fit(&pts, range), target, tol)?;
        }
        for k in [c.cells_k[0], c.cells_k[1]] {
            if let Ok(k_hat) = symcover_check(&ctx.spec, &gate, &side, region, k) {
                s.info.insert(format!("cells.{}_cover_index@{k}", region.tag()), k_hat as f64);
            }
        }
    }
    w.table("cells", &rows)?;
    w.table("cells_polygons", &polys)?;
    w.finish(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_is_geometric() {
        assert_eq!(k_grid(16, 256, 1), vec![16, 32, 64, 128, 256]);
        assert_eq!(k_grid(16, 64, 2), vec![16, 23, 32, 45, 64]);
        assert_eq!(k_grid(5, 4, 2), Vec::<u64>::new());
    }
}
