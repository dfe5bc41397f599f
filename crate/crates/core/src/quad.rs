//! Fixed quadrature rules.

/// Composite Simpson weights for (possibly non-uniform) strictly increasing
/// nodes. An odd number of intervals is closed with the quadratic
/// correction over the last three nodes.
///
/// Panics if fewer than three nodes are given.
pub fn simpson_weights(nodes: &[f64]) -> Vec<f64> {
    let len = nodes.len();
    assert!(len >= 3, "simpson needs at least three nodes");
    let mut w = vec![0.0; len];
    let intervals = len - 1;
    let paired = intervals - intervals % 2;

    let mut i = 0;
    while i < paired {
        let h0 = nodes[i + 1] - nodes[i];
        let h1 = nodes[i + 2] - nodes[i + 1];
        let s = (h0 + h1) / 6.0;
        w[i] += s * (2.0 - h1 / h0);
        w[i + 1] += s * (h0 + h1) * (h0 + h1) / (h0 * h1);
        w[i + 2] += s * (2.0 - h0 / h1);
        i += 2;
    }

    if intervals % 2 == 1 {
        let h0 = nodes[len - 2] - nodes[len - 3];
        let h1 = nodes[len - 1] - nodes[len - 2];
        let alpha = (2.0 * h1 * h1 + 3.0 * h0 * h1) / (6.0 * (h0 + h1));
        let beta = (h1 * h1 + 3.0 * h0 * h1) / (6.0 * h0);
        let eta = h1 * h1 * h1 / (6.0 * h0 * (h0 + h1));
        w[len - 1] += alpha;
        w[len - 2] += beta;
        w[len - 3] -= eta;
    }
    w
}

/// `count` uniformly spaced nodes from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(count >= 2);
    let step = (hi - lo) / (count - 1) as f64;
    (0..count)
        .map(|i| if i + 1 == count { hi } else { lo + step * i as f64 })
        .collect()
}

const GL8: [(f64, f64); 4] = [
    (0.183_434_642_495_650, 0.362_683_783_378_362),
    (0.525_532_409_916_329, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_5),
    (0.960_289_856_497_536_3, 0.101_228_536_290_376_3),
];

/// Composite 8-point Gauss–Legendre rule on `[lo, hi]` split into `panels`
/// equal panels. Returns `(abscissa, weight)` pairs.
pub fn gauss_legendre(lo: f64, hi: f64, panels: usize) -> Vec<(f64, f64)> {
    let width = (hi - lo) / panels as f64;
    let half = width / 2.0;
    let mut rule = Vec::with_capacity(panels * 8);
    for p in 0..panels {
        let mid = lo + width * (p as f64 + 0.5);
        for &(x, w) in &GL8 {
            rule.push((mid - half * x, half * w));
            rule.push((mid + half * x, half * w));
        }
    }
    rule
}

#[cfg(test)]
mod tests {
    use super::*;

    fn integrate(nodes: &[f64], f: impl Fn(f64) -> f64) -> f64 {
        simpson_weights(nodes)
            .iter()
            .zip(nodes)
            .map(|(w, &x)| w * f(x))
            .sum()
    }

    #[test]
    fn simpson_exactness() {
        let cubic = |x: f64| 2.0 * x * x * x - x * x + 3.0 * x - 1.0;
        let exact_cubic = |x: f64| 0.5 * x.powi(4) - x.powi(3) / 3.0 + 1.5 * x * x - x;
        let quadratic = |x: f64| -x * x + 3.0 * x - 1.0;
        let exact_quadratic = |x: f64| -x.powi(3) / 3.0 + 1.5 * x * x - x;
        // even interval counts integrate cubics exactly
        for count in [3, 5, 9, 101] {
            let nodes = linspace(-1.0, 2.0, count);
            let got = integrate(&nodes, cubic);
            assert!((got - (exact_cubic(2.0) - exact_cubic(-1.0))).abs() < 1e-12, "{count}: {got}");
        }
        // the closing interval of an odd count is quadratic
        for count in [4, 8, 100] {
            let nodes = linspace(-1.0, 2.0, count);
            let got = integrate(&nodes, quadratic);
            assert!((got - (exact_quadratic(2.0) - exact_quadratic(-1.0))).abs() < 1e-12, "{count}: {got}");
        }
    }

    #[test]
    fn simpson_non_uniform_quadratic() {
        let nodes = [0.0, 0.1, 0.5, 0.55, 1.3, 2.0, 2.2];
        let got = integrate(&nodes, |x| x * x);
        assert!((got - 2.2f64.powi(3) / 3.0).abs() < 1e-12);
    }

    #[test]
    fn gauss_legendre_integrates_cosine() {
        let rule = gauss_legendre(0.0, 3.0, 4);
        let got: f64 = rule.iter().map(|&(x, w)| w * x.cos()).sum();
        assert!((got - 3.0f64.sin()).abs() < 1e-14);
    }
}
