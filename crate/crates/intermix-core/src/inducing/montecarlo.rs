//! Monte Carlo estimate of the return-time distribution on the entry set.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;

use super::{first_return, GateRegion, InducingError, TailMethod, TailRow, TailTable};
use crate::numerics::{strata, stream_rng};
use crate::torus_map::{MapSpec, TorusPoint};

/// Rejection-samples the bounding box of `W`; measures are `frequency * area(box)`
/// with binomial standard errors.
pub fn tail_by_mc(spec: &MapSpec, gate: &GateRegion, n_samples: u64, seed: u64, n_max: u64) -> Result<TailTable, InducingError> {
    if n_samples < 10_000 {
        return Err(InducingError::InvalidInput(format!("need at least 10^4 samples, got {n_samples}")));
    }
    let b = gate.entry_bbox(spec);
    let area = (b.x1 - b.x0) * (b.y1 - b.y0);
    let parts: Vec<(BTreeMap<u64, u64>, u64)> = strata(n_samples)
        .into_par_iter()
        .map(|(idx, count)| {
            let mut rng = stream_rng(seed, idx);
            let mut counts = BTreeMap::new();
            let mut over = 0u64;
            for _ in 0..count {
                let x = b.x0 + (b.x1 - b.x0) * rng.gen::<f64>();
                let y = b.y0 + (b.y1 - b.y0) * rng.gen::<f64>();
                let p = TorusPoint::new(x, y);
                if !gate.in_entry_set(spec, p) {
                    continue;
                }
                match first_return(spec, gate, p, n_max) {
                    Ok(n) => *counts.entry(n).or_insert(0u64) += 1,
                    Err(_) => over += 1,
                }
            }
            (counts, over)
        })
        .collect();
    let mut counts: BTreeMap<u64, u64> = BTreeMap::new();
    let mut over = 0u64;
    for (c, o) in parts {
        for (n, k) in c {
            *counts.entry(n).or_insert(0) += k;
        }
        over += o;
    }
    let ns = n_samples as f64;
    let rows: BTreeMap<u64, TailRow> = counts
        .into_iter()
        .map(|(n, k)| {
            let p = k as f64 / ns;
            (
                n,
                TailRow {
                    measure: p * area,
                    error: (p * (1.0 - p) / ns).sqrt() * area,
                },
            )
        })
        .collect();
    let overflow = over as f64 / ns * area;
    let total = rows.values().map(|r| r.measure).sum::<f64>() + overflow;
    Ok(TailTable {
        rows,
        method: TailMethod::Montecarlo,
        n_max,
        total_mass: total,
        overflow,
        unresolved: 0.0,
        partial: false,
    })
}
