//! Small numerical helpers shared across modules.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Samples per random stream. Stream `i` covers samples `[i*STRATUM, (i+1)*STRATUM)`.
pub const STRATUM: u64 = 1 << 14;

/// Independent counter-based stream for stratum `index`.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Split `n` samples into `(stream index, count)` strata.
pub fn strata(n: u64) -> Vec<(u64, u64)> {
    let full = n / STRATUM;
    let mut out: Vec<(u64, u64)> = (0..full).map(|i| (i, STRATUM)).collect();
    if !n.is_multiple_of(STRATUM) {
        out.push((full, n % STRATUM));
    }
    out
}

/// Five-point Gauss-Legendre nodes and weights on `[0, 1]`.
pub const GL5: [(f64, f64); 5] = [
    (0.046_910_077_030_668_0, 0.118_463_442_528_094_5),
    (0.230_765_344_947_158_5, 0.239_314_335_249_683_2),
    (0.5, 0.284_444_444_444_444_4),
    (0.769_234_655_052_841_5, 0.239_314_335_249_683_2),
    (0.953_089_922_969_332_0, 0.118_463_442_528_094_5),
];

/// Integrate `f` over `[a, b]` with [`GL5`].
pub fn gauss5(a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
    let w = b - a;
    GL5.iter().map(|&(t, wt)| wt * f(a + w * t)).sum::<f64>() * w
}

/// Chebyshev interpolant on `[a, b]` through second-kind (Lobatto) points.
#[derive(Debug, Clone)]
pub struct Chebyshev {
    a: f64,
    b: f64,
    nodes: Vec<f64>,
    values: Vec<f64>,
}

impl Chebyshev {
    /// Nodes of an `n`-point interpolant on `[a, b]`, in increasing order.
    pub fn nodes(a: f64, b: f64, n: usize) -> Vec<f64> {
        assert!(n >= 2);
        (0..n)
            .map(|j| {
                let th = std::f64::consts::PI * (n - 1 - j) as f64 / (n - 1) as f64;
                0.5 * (a + b) + 0.5 * (b - a) * th.cos()
            })
            .collect()
    }

    pub fn from_values(a: f64, b: f64, values: Vec<f64>) -> Self {
        let nodes = Self::nodes(a, b, values.len());
        Self { a, b, nodes, values }
    }

    pub fn fit(a: f64, b: f64, n: usize, f: impl Fn(f64) -> f64) -> Self {
        let values = Self::nodes(a, b, n).into_iter().map(f).collect();
        Self::from_values(a, b, values)
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    /// Barycentric evaluation.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.nodes.len();
        let mut num = 0.0;
        let mut den = 0.0;
        for j in 0..n {
            let d = x - self.nodes[j];
            if d == 0.0 {
                return self.values[j];
            }
            let mut w = if j % 2 == 0 { 1.0 } else { -1.0 };
            if j == 0 || j == n - 1 {
                w *= 0.5;
            }
            let q = w / d;
            num += q * self.values[j];
            den += q;
        }
        num / den
    }
}

/// Area of a simple polygon by the shoelace formula, about its centroid.
pub fn polygon_area(pts: &[[f64; 2]]) -> f64 {
    let n = pts.len();
    if n < 3 {
        return 0.0;
    }
    let cx = pts.iter().map(|p| p[0]).sum::<f64>() / n as f64;
    let cy = pts.iter().map(|p| p[1]).sum::<f64>() / n as f64;
    let mut s = 0.0;
    for i in 0..n {
        let a = pts[i];
        let b = pts[(i + 1) % n];
        s += (a[0] - cx) * (b[1] - cy) - (b[0] - cx) * (a[1] - cy);
    }
    0.5 * s.abs()
}

/// Linear interpolation on sorted abscissas, clamped at the ends.
pub fn interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    let i = xs.partition_point(|&v| v <= x).clamp(1, n - 1);
    let (x0, x1) = (xs[i - 1], xs[i]);
    let f = (x - x0) / (x1 - x0);
    ys[i - 1] + f * (ys[i] - ys[i - 1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;

    #[test]
    fn gauss5_exact_for_degree_nine() {
        let v = gauss5(0.0, 2.0, |x| x.powi(9));
        assert_relative_eq!(v, 2f64.powi(10) / 10.0, max_relative = 1e-14);
    }

    #[test]
    fn chebyshev_resolves_analytic_function() {
        let c = Chebyshev::fit(0.0, 1.0, 33, |t| (1.0 + t).ln() * (2.0 * t).cos());
        for i in 0..=100 {
            let t = i as f64 / 100.0;
            assert!((c.eval(t) - (1.0 + t).ln() * (2.0 * t).cos()).abs() < 1e-14);
        }
    }

    #[test]
    fn streams_are_distinct_and_reproducible() {
        let a: f64 = stream_rng(7, 0).gen();
        let b: f64 = stream_rng(7, 1).gen();
        let c: f64 = stream_rng(7, 0).gen();
        assert_ne!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn strata_cover_all_samples() {
        let s = strata(3 * STRATUM + 5);
        assert_eq!(s.len(), 4);
        assert_eq!(s.iter().map(|x| x.1).sum::<u64>(), 3 * STRATUM + 5);
        assert!(strata(0).is_empty());
    }

    #[test]
    fn unit_square_area() {
        let sq = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        assert_relative_eq!(polygon_area(&sq), 1.0);
    }

    #[test]
    fn interp_clamps() {
        let xs = [0.0, 1.0, 2.0];
        let ys = [0.0, 10.0, 0.0];
        assert_eq!(interp(&xs, &ys, -1.0), 0.0);
        assert_eq!(interp(&xs, &ys, 0.5), 5.0);
        assert_eq!(interp(&xs, &ys, 1.5), 5.0);
    }
}
