//! Adaptive quadtree quadrature of the return-time distribution on the entry set.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::chart::{EntryChart, Side, SliverChart};
use super::{first_return, GateRegion, InducingError, TailMethod, TailRow, TailTable};
use crate::torus_map::{MapSpec, TorusPoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadratureScheme {
    /// Quadtree in entry-set coordinates adapted to the stable manifold (square gate only).
    EntryChart,
    /// Quadtree over the bounding box of the entry set in `(x, y)`.
    PlainBox,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureOptions {
    pub scheme: QuadratureScheme,
    pub n_max: u64,
    /// Maximum refinement depth for cells whose return time is at most `deep_n`.
    pub depth_max: u32,
    pub deep_n: u64,
    /// Refinement depth used beyond `deep_n`.
    pub far_depth: u32,
    /// Cells are never finalized above this depth.
    pub min_depth: u32,
    /// Per-run cap on the number of visited cells.
    pub cell_cap: u64,
    /// Roots per axis for [`QuadratureScheme::PlainBox`].
    pub plain_roots: u32,
    /// Measure right and bottom entries explicitly instead of by the `-id` symmetry.
    pub explicit_mirror: bool,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self {
            scheme: QuadratureScheme::EntryChart,
            n_max: 4096,
            depth_max: 8,
            deep_n: 1024,
            far_depth: 3,
            min_depth: 2,
            cell_cap: 200_000_000,
            plain_roots: 16,
            explicit_mirror: false,
        }
    }
}

/// Label for return times above the table range.
const OVER: u64 = u64::MAX;
/// Label for points outside the entry set.
const OUTSIDE: u64 = 0;

trait CellChart: Sync {
    fn label(&self, u: f64, v: f64) -> u64;
    fn area(&self, u0: f64, u1: f64, v0: f64, v1: f64) -> f64;
}

#[derive(Debug, Clone, Copy)]
struct Root {
    u0: f64,
    v0: f64,
    du: f64,
    dv: f64,
    depth: u32,
}

#[derive(Debug, Default)]
struct Partial {
    credits: BTreeMap<u64, f64>,
    overflow: f64,
    unresolved: Vec<(u64, u64, f64)>,
    cells: u64,
    exceeded: bool,
}

fn refine<C: CellChart>(chart: &C, root: Root, min_depth: u32, cap: u64) -> Partial {
    let dmax = root.depth;
    let res = 1u64 << (dmax + 1);
    let mut memo: HashMap<(u64, u64), u64> = HashMap::new();
    let coord = |i: u64, k: u64| {
        (
            root.u0 + root.du * (i as f64 / res as f64),
            root.v0 + root.dv * (k as f64 / res as f64),
        )
    };
    let mut label = |i: u64, k: u64| {
        *memo.entry((i, k)).or_insert_with(|| {
            let (u, v) = coord(i, k);
            chart.label(u, v)
        })
    };
    let mut out = Partial::default();
    let mut stack = vec![(0u32, 0u64, 0u64)];
    while let Some((d, i, k)) = stack.pop() {
        out.cells += 1;
        if out.cells > cap {
            out.exceeded = true;
            break;
        }
        let size = res >> d;
        let half = size / 2;
        let labels = [
            label(i, k),
            label(i + size, k),
            label(i, k + size),
            label(i + size, k + size),
            label(i + half, k + half),
        ];
        let (u0, v0) = coord(i, k);
        let (u1, v1) = coord(i + size, k + size);
        let first = labels[0];
        if d >= min_depth && labels.iter().all(|&l| l == first) {
            if first == OVER {
                out.overflow += chart.area(u0, u1, v0, v1);
            } else if first != OUTSIDE {
                *out.credits.entry(first).or_insert(0.0) += chart.area(u0, u1, v0, v1);
            }
            continue;
        }
        if d < dmax {
            // Push in reverse so cells are visited in a fixed order.
            for (di, dk) in [(1, 1), (0, 1), (1, 0), (0, 0)] {
                stack.push((d + 1, i + di * half, k + dk * half));
            }
            continue;
        }
        let inside: Vec<u64> = labels.iter().copied().filter(|&l| l != OUTSIDE).collect();
        if inside.is_empty() {
            continue;
        }
        let lo = *inside.iter().min().unwrap();
        let hi = *inside.iter().max().unwrap();
        out.unresolved.push((lo, hi, chart.area(u0, u1, v0, v1)));
    }
    out
}

struct FiberChart<'a> {
    chart: &'a EntryChart,
    side: Side,
    n_max: u64,
}

impl CellChart for FiberChart<'_> {
    fn label(&self, t: f64, v: f64) -> u64 {
        self.chart.phi(self.side, t, v, self.n_max).unwrap_or(OVER)
    }
    fn area(&self, t0: f64, t1: f64, v0: f64, v1: f64) -> f64 {
        self.chart.area(self.side, t0, t1, v0, v1)
    }
}

struct TopChart<'a> {
    chart: &'a SliverChart,
    n_max: u64,
}

impl CellChart for TopChart<'_> {
    fn label(&self, s: f64, w: f64) -> u64 {
        self.chart.phi(s, w, self.n_max).unwrap_or(OVER)
    }
    fn area(&self, s0: f64, s1: f64, w0: f64, w1: f64) -> f64 {
        self.chart.area(s0, s1, w0, w1)
    }
}

struct BoxChart<'a> {
    spec: &'a MapSpec,
    gate: &'a GateRegion,
    n_max: u64,
}

impl CellChart for BoxChart<'_> {
    fn label(&self, x: f64, y: f64) -> u64 {
        let p = TorusPoint::new(x, y);
        if !self.gate.in_entry_set(self.spec, p) {
            return OUTSIDE;
        }
        first_return(self.spec, self.gate, p, self.n_max).unwrap_or(OVER)
    }
    fn area(&self, x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
        (x1 - x0) * (y1 - y0)
    }
}

fn run_roots<C: CellChart>(chart: &C, roots: &[Root], opts: &QuadratureOptions) -> Vec<Partial> {
    roots.par_iter().map(|&r| refine(chart, r, opts.min_depth, opts.cell_cap)).collect()
}

fn margin(n_max: u64) -> u64 {
    (n_max / 8).max(64)
}

fn fiber_roots(opts: &QuadratureOptions) -> Vec<Root> {
    let vmax = opts.n_max + margin(opts.n_max);
    let deep = opts.deep_n.min(opts.n_max) + margin(opts.deep_n);
    (0..vmax)
        .map(|j| Root {
            u0: 0.0,
            v0: j as f64,
            du: 1.0,
            dv: 1.0,
            depth: if j < deep {
                opts.depth_max
            } else {
                opts.far_depth.min(opts.depth_max)
            },
        })
        .collect()
}

/// Entry-chart quadrature over one side of the gate. Returns the partials and the
/// overflow area beyond the chart.
fn entry_chart_side(spec: &MapSpec, gate: &GateRegion, mirror: bool, opts: &QuadratureOptions) -> Result<Vec<Partial>, InducingError> {
    let chart = EntryChart::new(spec, gate, mirror)?;
    let roots = fiber_roots(opts);
    let vmax = roots.len() as f64;
    let mut parts = Vec::new();
    for side in [Side::Fat, Side::Thin] {
        let fc = FiberChart {
            chart: &chart,
            side,
            n_max: opts.n_max,
        };
        parts.extend(run_roots(&fc, &roots, opts));
        let beyond: f64 = (0..16)
            .map(|i| chart.area(side, i as f64 / 16.0, (i + 1) as f64 / 16.0, vmax, f64::INFINITY))
            .sum();
        parts.push(Partial {
            overflow: beyond,
            ..Partial::default()
        });
    }
    let sliver = SliverChart::new(spec, gate, mirror);
    let tc = TopChart {
        chart: &sliver,
        n_max: opts.n_max,
    };
    let n = 4;
    let d = gate.delta;
    let roots: Vec<Root> = (0..n * n)
        .map(|r| Root {
            u0: -d + d * (r % n) as f64 / n as f64,
            v0: (r / n) as f64 / n as f64,
            du: d / n as f64,
            dv: 1.0 / n as f64,
            depth: opts.depth_max + 2,
        })
        .collect();
    parts.extend(run_roots(&tc, &roots, opts));
    Ok(parts)
}

fn plain_box(spec: &MapSpec, gate: &GateRegion, opts: &QuadratureOptions) -> Vec<Partial> {
    let b = gate.entry_bbox(spec);
    let n = opts.plain_roots.max(1) as usize;
    let du = (b.x1 - b.x0) / n as f64;
    let dv = (b.y1 - b.y0) / n as f64;
    let roots: Vec<Root> = (0..n * n)
        .map(|r| Root {
            u0: b.x0 + du * (r % n) as f64,
            v0: b.y0 + dv * (r / n) as f64,
            du,
            dv,
            depth: opts.depth_max,
        })
        .collect();
    let chart = BoxChart {
        spec,
        gate,
        n_max: opts.n_max,
    };
    run_roots(&chart, &roots, opts)
}

fn merge(parts: Vec<Partial>, scale: f64, n_max: u64, cap: u64) -> (TailTable, bool) {
    let mut rows: BTreeMap<u64, TailRow> = BTreeMap::new();
    let mut overflow = 0.0;
    let mut unresolved = 0.0;
    let mut cells = 0u64;
    let mut exceeded = false;
    for p in parts {
        cells += p.cells;
        if p.exceeded || cells > cap {
            exceeded = true;
            break;
        }
        for (n, a) in p.credits {
            rows.entry(n).or_insert(TailRow { measure: 0.0, error: 0.0 }).measure += scale * a;
        }
        overflow += scale * p.overflow;
        for (lo, hi, a) in p.unresolved {
            unresolved += scale * a;
            let top = hi.min(n_max);
            for n in lo..=top {
                rows.entry(n).or_insert(TailRow { measure: 0.0, error: 0.0 }).error += scale * a;
            }
        }
    }
    let total = rows.values().map(|r| r.measure).sum::<f64>() + overflow + unresolved;
    (
        TailTable {
            rows,
            method: TailMethod::Quadrature,
            n_max,
            total_mass: total,
            overflow,
            unresolved,
            partial: exceeded,
        },
        exceeded,
    )
}

/// Quadrature tail table, returned even when the cell budget runs out (flagged `partial`).
pub fn tail_by_quadrature_partial(spec: &MapSpec, gate: &GateRegion, opts: &QuadratureOptions) -> Result<TailTable, InducingError> {
    if opts.n_max == 0 || opts.n_max > 1 << 14 {
        return Err(InducingError::InvalidInput(format!("n_max = {} outside [1, 16384]", opts.n_max)));
    }
    if opts.depth_max > 48 || opts.min_depth > opts.depth_max {
        return Err(InducingError::InvalidInput("depth limits out of range".into()));
    }
    let (parts, scale) = match opts.scheme {
        QuadratureScheme::PlainBox => (plain_box(spec, gate, opts), 1.0),
        QuadratureScheme::EntryChart => {
            let mut parts = entry_chart_side(spec, gate, false, opts)?;
            if opts.explicit_mirror {
                parts.extend(entry_chart_side(spec, gate, true, opts)?);
                (parts, 1.0)
            } else {
                (parts, 2.0)
            }
        }
    };
    Ok(merge(parts, scale, opts.n_max, opts.cell_cap).0)
}

/// Quadrature tail table of `phi` on the entry set `W`.
pub fn tail_by_quadrature(spec: &MapSpec, gate: &GateRegion, opts: &QuadratureOptions) -> Result<TailTable, InducingError> {
    let t = tail_by_quadrature_partial(spec, gate, opts)?;
    if t.partial {
        return Err(InducingError::BudgetExceeded { cap: opts.cell_cap });
    }
    Ok(t)
}

/// Quadrature over the left (fat and thin) entries only.
pub fn tail_left_side(spec: &MapSpec, gate: &GateRegion, opts: &QuadratureOptions, mirror: bool) -> Result<TailTable, InducingError> {
    let parts = entry_chart_side(spec, gate, mirror, opts)?;
    Ok(merge(parts, 1.0, opts.n_max, opts.cell_cap).0)
}
