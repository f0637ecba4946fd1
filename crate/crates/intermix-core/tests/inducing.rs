use std::sync::OnceLock;

use intermix_core::inducing::*;
use intermix_core::invariant_geometry::{local_manifold_graph, ManifoldKind, Quadrant};
use intermix_core::torus_map::{apply, apply_inverse, eval_g, MapSpec, TorusPoint};
use proptest::prelude::*;

fn spec() -> MapSpec {
    MapSpec::sine(24).unwrap()
}

fn gate() -> GateRegion {
    GateRegion::square(0.3).unwrap()
}

fn small_opts() -> QuadratureOptions {
    QuadratureOptions {
        n_max: 256,
        deep_n: 256,
        ..QuadratureOptions::default()
    }
}

fn small_table() -> &'static TailTable {
    static T: OnceLock<TailTable> = OnceLock::new();
    T.get_or_init(|| tail_by_quadrature(&spec(), &gate(), &small_opts()).unwrap())
}

#[test]
fn quadrature_partitions_entry_set() {
    let t = small_table();
    let d = 0.3;
    let leb_w = d * d + 2.0 * eval_g(&spec(), d);
    let listed: f64 = t.rows.values().map(|r| r.measure).sum::<f64>() + t.overflow;
    assert!((listed - leb_w).abs() <= t.unresolved + 1e-9, "{listed} vs {leb_w}");
    assert!(t.unresolved < 0.01 * leb_w);
    assert_eq!(t.measure(1), 0.0);
    assert!(!t.partial);
}

#[test]
fn flux_equals_gate_area() {
    let t = small_table();
    let bound: f64 = t.rows.iter().map(|(&n, r)| (n as f64 - 1.0) * r.error).sum();
    let q = 4.0 * 0.3 * 0.3;
    assert!((t.flux() - q).abs() <= bound + 1e-6, "{} vs {q} (bound {bound})", t.flux());
}

#[test]
fn monte_carlo_agrees_with_quadrature_at_short_returns() {
    let q = small_table();
    let mc = tail_by_mc(&spec(), &gate(), 1_000_000, 11, 256).unwrap();
    assert_eq!(mc.measure(1), 0.0);
    for n in 2..=10 {
        let (a, b) = (q.measure(n), mc.measure(n));
        let sigma = mc.error(n).max(1e-12) + q.error(n);
        assert!((a - b).abs() <= 3.0 * sigma, "N = {n}: {a} vs {b} (sigma {sigma})");
    }
}

#[test]
fn monte_carlo_needs_samples() {
    assert!(tail_by_mc(&spec(), &gate(), 0, 1, 10).is_err());
}

#[test]
fn mirrored_entries_match() {
    let o = QuadratureOptions {
        n_max: 64,
        deep_n: 64,
        ..QuadratureOptions::default()
    };
    let a = tail_left_side(&spec(), &gate(), &o, false).unwrap();
    let b = tail_left_side(&spec(), &gate(), &o, true).unwrap();
    for (n, r) in &a.rows {
        let m = b.measure(*n);
        assert!((r.measure - m).abs() <= 1e-12 * r.measure.max(1e-30), "N = {n}");
    }
}

#[test]
fn plain_box_scheme_converges_to_chart() {
    let q = small_table();
    let gap = |depth_max, plain_roots| {
        let o = QuadratureOptions {
            scheme: QuadratureScheme::PlainBox,
            n_max: 64,
            depth_max,
            plain_roots,
            ..QuadratureOptions::default()
        };
        let p = tail_by_quadrature_partial(&spec(), &gate(), &o).unwrap();
        (2..=6).map(|n| (p.measure(n) / q.measure(n) - 1.0).abs()).fold(0.0, f64::max)
    };
    let coarse = gap(7, 16);
    let fine = gap(9, 64);
    assert!(fine < 0.03, "{fine}");
    assert!(fine < coarse, "{fine} vs {coarse}");
}

#[test]
fn budget_cap_is_reported() {
    let o = QuadratureOptions {
        n_max: 64,
        cell_cap: 100,
        ..QuadratureOptions::default()
    };
    assert_eq!(
        tail_by_quadrature(&spec(), &gate(), &o).unwrap_err(),
        InducingError::BudgetExceeded { cap: 100 }
    );
    assert!(tail_by_quadrature_partial(&spec(), &gate(), &o).unwrap().partial);
}

#[test]
fn quadrature_rejects_out_of_range_budgets() {
    let o = QuadratureOptions {
        n_max: 1 << 15,
        ..QuadratureOptions::default()
    };
    assert!(tail_by_quadrature(&spec(), &gate(), &o).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn first_return_leaves_and_reenters(x in -std::f64::consts::PI..std::f64::consts::PI, y in -std::f64::consts::PI..std::f64::consts::PI) {
        let (s, g) = (spec(), gate());
        let p = TorusPoint::new(x, y);
        prop_assume!(!g.contains(p));
        let n = first_return(&s, &g, p, 1_000_000).unwrap();
        let mut z = p;
        for _ in 1..n {
            z = apply(&s, z);
            prop_assert!(g.contains(z));
        }
        prop_assert!(!g.contains(apply(&s, z)));
        if g.in_entry_set(&s, p) {
            prop_assert!(n >= 2);
        } else {
            prop_assert_eq!(n, 1);
        }
    }

    #[test]
    fn passage_indices_are_ordered(t in 0.05f64..0.95, e in -11.0f64..-3.0, fat in any::<bool>()) {
        let (s, g) = (spec(), gate());
        let ys = stable_crossing(&s, 0.3, t);
        let y = if fat { ys + 10f64.powf(e) } else { ys - 10f64.powf(e) };
        let p = apply_inverse(&s, TorusPoint::raw(-0.3 + t * y, y));
        if let Ok(d) = passage_diagnostics(&s, &g, p, 32.0, 10_000_000) {
            prop_assert!(d.ell <= d.n);
            prop_assert!(d.n < d.n_return);
            prop_assert_eq!(d.n_return, first_return(&s, &g, p, 10_000_000).unwrap());
            prop_assert_eq!(d.region == Region::Fat, d.e_ell > 0.0);
        }
    }
}

#[test]
fn sampled_passages_cover_both_regions() {
    let s = PassageSampling {
        strata: 4,
        per_stratum: 5,
        ..PassageSampling::default()
    };
    let d = sample_passages(&spec(), &gate(), &s, 3).unwrap();
    assert!(d.iter().any(|p| p.region == Region::Fat));
    assert!(d.iter().any(|p| p.region == Region::Thin));
    let again = sample_passages(&spec(), &gate(), &s, 3).unwrap();
    assert_eq!(d, again);
}

#[test]
fn passage_rejects_bad_weight() {
    let p = apply_inverse(&spec(), TorusPoint::raw(-0.25, 0.1));
    assert!(passage_diagnostics(&spec(), &gate(), p, 0.0, 100).is_err());
}

#[test]
fn cell_sides_trace_the_right_return_index() {
    let side = GateSide::left_of(&gate());
    let s = spec();
    let (a, _) = cell_sides(&s, &side, Region::Fat, 40).unwrap();
    for p in a.iter().skip(1).step_by(32) {
        // A-side points are T^k images of gate-side points with crossing index k
        let z = TorusPoint::raw(p[0], p[1]);
        assert!(z.x <= 0.0 && z.x > -0.3, "{z:?}");
        assert!(apply(&s, z).x > 0.0 || apply(&s, apply(&s, z)).x > 0.0);
    }
}

#[test]
fn cover_index_is_bounded() {
    let side = GateSide::left_of(&gate());
    for region in [Region::Fat, Region::Thin] {
        for k in [32, 64, 128, 256] {
            let k_hat = symcover_check(&spec(), &gate(), &side, region, k).unwrap();
            assert!(k_hat <= 4, "{region:?} k = {k}: {k_hat}");
        }
    }
}

#[test]
fn curved_gate_hugs_local_manifolds() {
    let s = spec();
    let g = GateRegion::curved(&s, 0.1, 0.005).unwrap();
    let st = local_manifold_graph(&s, ManifoldKind::Stable, Quadrant::Q4, 0.2, 0.01).unwrap();
    let un = local_manifold_graph(&s, ManifoldKind::Unstable, Quadrant::Q1, 0.2, 0.01).unwrap();
    for p in st.vertices.iter().chain(&un.vertices).filter(|p| p.x <= 0.1) {
        assert!(in_q(&g, *p), "{p:?}");
    }
    assert!(!in_q(&g, TorusPoint::new(0.0, 0.15)));
    let p = apply_inverse(&s, TorusPoint::raw(-0.15, 0.05));
    if g.in_entry_set(&s, p) {
        assert!(first_return(&s, &g, p, 1_000_000).unwrap() >= 2);
    }
    assert!(GateRegion::curved(&s, 0.2, 0.005).is_err());
}
