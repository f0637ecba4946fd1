use approx::assert_relative_eq;
use intermix_core::invariant_geometry::*;
use intermix_core::torus_map::{apply, involution_r1, MapSpec, TorusPoint};

#[test]
fn leading_order_of_stable_ordinate() {
    // 1/2 y^2 = G(x) ~ x^4 / 24 for c = 1 gives y ~ -x^2 / sqrt(12)
    let s = MapSpec::sine(1).unwrap();
    let r = stable_shoot(&s, 0.05, 10_000, 1e-14).unwrap();
    assert_relative_eq!(r.y0, -7.217e-4, max_relative = 0.02);
}

#[test]
fn stable_ordinate_decreases_with_abscissa() {
    let s = MapSpec::sine(24).unwrap();
    let g = local_manifold_graph(&s, ManifoldKind::Stable, Quadrant::Q4, 0.2, 0.01).unwrap();
    assert_eq!(g.vertices[0], TorusPoint::raw(0.0, 0.0));
    for w in g.vertices.windows(2) {
        assert!(w[1].y < w[0].y);
    }
    // quadratic leading term -x^2 / A
    let p = g.vertices[2];
    assert_relative_eq!(p.y, -p.x * p.x / s.a, max_relative = 0.05);
}

#[test]
fn unstable_graph_is_mirror_of_stable() {
    let s = MapSpec::sine(24).unwrap();
    let st = local_manifold_graph(&s, ManifoldKind::Stable, Quadrant::Q2, 0.2, 0.01).unwrap();
    let un = local_manifold_graph(&s, ManifoldKind::Unstable, Quadrant::Q1, 0.2, 0.01).unwrap();
    for (a, b) in st.vertices.iter().zip(&un.vertices) {
        assert!(involution_r1(&s, *a).dist(*b) <= 1e-12);
        assert!(involution_r1(&s, *b).dist(*a) <= 1e-12);
    }
}

#[test]
fn asymptote_residual_is_tolerance_stable() {
    let s = MapSpec::sine(24).unwrap();
    for x0 in [0.05, 0.1, 0.2] {
        let a = stable_shoot(&s, x0, 10_000, 2e-14).unwrap();
        let b = stable_shoot(&s, x0, 10_000, 1e-14).unwrap();
        assert!(a.residual_b.is_finite() && b.residual_b > 0.0);
        let r = a.residual_b / b.residual_b;
        assert!((0.5..=2.0).contains(&r), "x0 = {x0}: {r}");
    }
}

#[test]
fn bracket_failure_names_abscissa() {
    let s = MapSpec::sine(24).unwrap();
    assert_eq!(
        stable_shoot(&s, 1e-3, 5, 1e-14).unwrap_err(),
        GeometryError::BracketFailure { x0: 1e-3 }
    );
}

#[test]
fn grow_without_iteration_keeps_seed() {
    let s = MapSpec::sine(24).unwrap();
    let seed = local_manifold_graph(&s, ManifoldKind::Unstable, Quadrant::Q1, 0.1, 0.01).unwrap();
    let clip = Rect {
        x0: -1.0,
        x1: 1.0,
        y0: -1.0,
        y1: 1.0,
    };
    let g = grow_unstable(&s, &seed, 0, 1.0, clip, 1000).unwrap();
    assert_eq!(g.vertices, seed.vertices);
}

#[test]
fn grown_curve_passes_through_images() {
    let s = MapSpec::sine(24).unwrap();
    let seed = local_manifold_graph(&s, ManifoldKind::Unstable, Quadrant::Q1, 0.1, 0.01).unwrap();
    let clip = Rect {
        x0: -3.0,
        x1: 3.0,
        y0: -3.0,
        y1: 3.0,
    };
    let g = grow_unstable(&s, &seed, 1, 0.005, clip, 100_000).unwrap();
    assert!(g.max_chord() <= 0.005 + 1e-12);
    let target = apply(&s, seed.vertices[5]);
    assert!(g.vertices.iter().any(|v| v.dist(target) < 1e-15));
    assert!(matches!(
        grow_unstable(&s, &seed, 3, 1e-6, clip, 50),
        Err(GeometryError::RefinementBlowup { .. })
    ));
}

#[test]
fn grown_chords_stay_in_cone_band() {
    let s = MapSpec::sine(24).unwrap();
    let band = cone_ratio_stats(&s, 10_000, 1, 0.25).unwrap();
    let seed = local_manifold_graph(&s, ManifoldKind::Unstable, Quadrant::Q1, 0.1, 0.005).unwrap();
    let clip = Rect {
        x0: 0.0,
        x1: 0.25,
        y0: 0.0,
        y1: 0.25,
    };
    let g = grow_unstable(&s, &seed, 2, 0.002, clip, 100_000).unwrap();
    assert!(g.vertices.len() > 10);
    for w in g.vertices.windows(2).skip(1) {
        let chord = (w[1].y - w[0].y) / (w[1].x - w[0].x);
        let (x, y) = (0.5 * (w[0].x + w[1].x), 0.5 * (w[0].y + w[1].y));
        let r = chord / (x.abs() + y.abs().sqrt());
        assert!(r >= band.k_minus_hat && r <= band.k_plus_hat, "ratio {r} at ({x}, {y})");
    }
}

#[test]
fn unstable_slope_converges_away_from_origin() {
    let s = MapSpec::sine(1).unwrap();
    let p = TorusPoint::new(1.0, 1.0);
    let a = unstable_slope(&s, p, 30);
    let b = unstable_slope(&s, p, 60);
    let reference = unstable_slope(&s, p, 2000);
    assert!(a > 0.0);
    assert!((a - b).abs() <= 1e-9);
    assert!((b - reference).abs() <= 1e-12);
}

#[test]
fn cone_band_is_positive_and_seed_stable() {
    let s = MapSpec::sine(24).unwrap();
    let a = cone_ratio_stats(&s, 10_000, 1, 0.25).unwrap();
    let b = cone_ratio_stats(&s, 10_000, 2, 0.25).unwrap();
    assert!(a.k_minus_hat > 0.0 && a.k_plus_hat.is_finite());
    assert!(a.k_minus_hat <= a.k_plus_hat);
    assert_relative_eq!(a.k_minus_hat, b.k_minus_hat, max_relative = 0.2);
    assert_relative_eq!(a.k_plus_hat, b.k_plus_hat, max_relative = 0.2);
}

#[test]
fn cone_band_agrees_across_scales() {
    let s = MapSpec::sine(24).unwrap();
    let a = cone_ratio_stats(&s, 10_000, 1, 0.25).unwrap();
    let b = cone_ratio_stats(&s, 10_000, 1, 0.125).unwrap();
    for (x, y) in [(a.k_minus_hat, b.k_minus_hat), (a.k_plus_hat, b.k_plus_hat)] {
        assert!(x / y <= 2.0 && y / x <= 2.0);
    }
}
