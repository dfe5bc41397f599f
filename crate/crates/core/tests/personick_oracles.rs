use std::f64::consts::PI;

use fockphase::linalg::{CMatrix, CVector};
use fockphase::personick::{
    anticommutator_residual, build_gamma, flat_cross_sum, mmse_flat_closed_form, mse_of_measurement, solve, solve_b,
};
use fockphase::{Complex64, FockSuperposition, HermitianOperator, MeasurementSpec, Prior};
use proptest::prelude::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn arb_state(max_n: usize) -> impl Strategy<Value = FockSuperposition> {
    (1..=max_n).prop_flat_map(|n| {
        prop::collection::vec((0.0f64..1.0, 0.0f64..(2.0 * PI)), n + 1).prop_filter_map("zero vector", |v| {
            FockSuperposition::normalized(v.into_iter().map(|(r, t)| Complex64::from_polar(r, t)).collect()).ok()
        })
    })
}

fn arb_closed_prior() -> impl Strategy<Value = Prior> {
    prop_oneof![
        Just(Prior::flat()),
        (0.0f64..4.0, 0.05f64..2.5).prop_map(|(lo, w)| Prior::truncated(lo, (lo + w).min(2.0 * PI)).unwrap()),
    ]
}

fn arb_grid_prior() -> impl Strategy<Value = Prior> {
    (0.0f64..2.0, 1.0f64..4.0, 0.0f64..1.0, 1.0f64..5.0).prop_map(|(lo, w, a, b)| {
        let hi = (lo + w).min(2.0 * PI);
        let nodes: Vec<f64> = (0..601).map(|i| lo + (hi - lo) * i as f64 / 600.0).collect();
        let density = nodes.iter().map(|x| 1.0 + a * (b * x).sin()).collect();
        Prior::grid(nodes, density).unwrap()
    })
}

fn arb_prior() -> impl Strategy<Value = Prior> {
    prop_oneof![arb_closed_prior(), arb_grid_prior()]
}

/// Composite Simpson on `count` (odd) uniform nodes.
fn simpson(lo: f64, hi: f64, count: usize, f: impl Fn(f64) -> f64) -> f64 {
    let h = (hi - lo) / (count - 1) as f64;
    (0..count)
        .map(|i| {
            let w = if i == 0 || i == count - 1 { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            w * f(lo + h * i as f64)
        })
        .sum::<f64>()
        * h
        / 3.0
}

/// `∫ P(φ) φ^k |Ψ(φ)⟩⟨Ψ(φ)| dφ` by brute-force quadrature of the shifted
/// state, for a uniform prior on `[lo, hi]`.
fn gamma_by_quadrature(state: &FockSuperposition, lo: f64, hi: f64, k: i32) -> CMatrix {
    let dim = state.dim();
    CMatrix::from_fn(dim, dim, |l, lp| {
        let entry = |phi: f64| {
            let s = state.apply_phase(phi);
            s.coeffs()[l] * s.coeffs()[lp].conj() * phi.powi(k) / (hi - lo)
        };
        c(simpson(lo, hi, 20001, |p| entry(p).re), simpson(lo, hi, 20001, |p| entry(p).im))
    })
}

#[test]
fn gamma_matches_direct_quadrature() {
    let states = [
        FockSuperposition::from_real(&[0.3, 0.8, 0.5]).unwrap(),
        FockSuperposition::normalized(vec![c(0.2, 0.1), c(0.0, 0.7), c(0.4, -0.3), c(0.5, 0.0)]).unwrap(),
    ];
    for state in &states {
        for (lo, hi) in [(0.0, 2.0 * PI), (0.0, PI / 10.0), (0.7, 2.9)] {
            let prior = if hi - lo == 2.0 * PI { Prior::flat() } else { Prior::truncated(lo, hi).unwrap() };
            for k in 0..=2 {
                let got = build_gamma(state, &prior, k as usize);
                let want = gamma_by_quadrature(state, lo, hi, k);
                let dev = (got.matrix() - &want).norm();
                assert!(dev < 1e-9, "k={k} [{lo},{hi}] dev {dev:e}");
            }
        }
    }
}

/// `B = 2∫_0^∞ e^{-zΓ_0} Γ_1 e^{-zΓ_0} dz` by quadrature in `u = ln z`.
fn b_by_z_integral(g0: &HermitianOperator, g1: &HermitianOperator) -> CMatrix {
    let eig = g0.matrix().clone().symmetric_eigen();
    let gmin = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    assert!(gmin > 1e-6);
    let z_max = 14.0 * 10f64.ln() / gmin;
    let (u_lo, u_hi) = (-40.0f64, z_max.ln());
    let decay = |z: f64| {
        let d = CVector::from_iterator(eig.eigenvalues.len(), eig.eigenvalues.iter().map(|g| c((-z * g).exp(), 0.0)));
        &eig.eigenvectors * CMatrix::from_diagonal(&d) * eig.eigenvectors.adjoint()
    };
    let count = 8001;
    let h = (u_hi - u_lo) / (count - 1) as f64;
    let dim = g0.dim();
    let mut total = CMatrix::zeros(dim, dim);
    for i in 0..count {
        let w = if i == 0 || i == count - 1 { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
        let z = (u_lo + h * i as f64).exp();
        let e = decay(z);
        total += (&e * g1.matrix() * &e) * c(w * z, 0.0);
    }
    total * c(2.0 * h / 3.0, 0.0)
}

#[test]
fn b_matches_z_integral_oracle() {
    let cases = [
        (FockSuperposition::from_real(&[0.5, 0.6, 0.62]).unwrap(), Prior::flat()),
        (FockSuperposition::from_real(&[0.5, 0.6, 0.62]).unwrap(), Prior::truncated(0.0, 4.0).unwrap()),
        (
            FockSuperposition::normalized(vec![c(0.5, 0.2), c(0.4, -0.4), c(0.3, 0.5)]).unwrap(),
            Prior::truncated(1.0, 5.5).unwrap(),
        ),
        (FockSuperposition::from_real(&[0.7, 0.7]).unwrap(), Prior::truncated(0.0, 3.0).unwrap()),
    ];
    for (state, prior) in &cases {
        let sol = solve(state, prior).unwrap();
        let oracle = b_by_z_integral(&sol.gamma0, &sol.gamma1);
        let dev = (sol.b_op.matrix() - &oracle).norm();
        assert!(dev < 1e-7, "dev {dev:e}");
    }
}

#[test]
fn diagonal_gamma0_division_formula() {
    let p = [0.1, 0.25, 0.4, 0.25];
    let g0 = HermitianOperator::from_fn(4, |i, j| if i == j { c(p[i], 0.0) } else { c(0.0, 0.0) }).unwrap();
    let g1 = HermitianOperator::from_fn(4, |i, j| {
        let (a, b) = (i.min(j) as f64, i.max(j) as f64);
        let im = if i < j { 0.3 * b } else if i > j { -0.3 * a.max(b) } else { 0.0 };
        c(1.0 + a + 2.0 * b, im)
    })
    .unwrap();
    let b = solve_b(&g0, &g1).unwrap();
    for i in 0..4 {
        for j in 0..4 {
            let want = g1.entry(i, j) * (2.0 / (p[i] + p[j]));
            assert!((b.entry(i, j) - want).norm() < 1e-13);
        }
    }
}

#[test]
fn optimal_measurement_examples() {
    let s = FockSuperposition::noon(1).unwrap();
    let sol = solve(&s, &Prior::flat()).unwrap();
    let mse = mse_of_measurement(&s, &Prior::flat(), &sol.measurement).unwrap();
    assert!((mse - (PI * PI / 3.0 - 0.25)).abs() < 1e-10);
    let r = solve(&s, &Prior::truncated(0.0, PI).unwrap()).unwrap();
    assert!((r.mmse - 0.572467).abs() < 5e-7);
    let q = solve(&s, &Prior::truncated(0.0, PI / 2.0).unwrap()).unwrap();
    assert!((q.mmse - 0.104296).abs() < 5e-7);
}

fn random_unitary(seed: &[f64]) -> CMatrix {
    let dim = ((seed.len() / 2) as f64).sqrt() as usize;
    let m = CMatrix::from_fn(dim, dim, |i, j| c(seed[2 * (i * dim + j)], seed[2 * (i * dim + j) + 1]));
    m.qr().q()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn pipeline_matches_flat_closed_form(s in arb_state(8)) {
        let sol = solve(&s, &Prior::flat()).unwrap();
        prop_assert!((sol.mmse - mmse_flat_closed_form(&s)).abs() < 1e-8);
    }

    #[test]
    fn flat_trace_b_gamma1(s in arb_state(8)) {
        let sol = solve(&s, &Prior::flat()).unwrap();
        let tr = sol.b_op.trace_product(&sol.gamma1);
        prop_assert!((tr.re - (PI * PI + flat_cross_sum(&s))).abs() < 1e-8);
        prop_assert!(tr.im.abs() < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn trace_form_equals_outcome_sum(s in arb_state(6), prior in arb_prior()) {
        let sol = solve(&s, &prior).unwrap();
        let mse = mse_of_measurement(&s, &prior, &sol.measurement).unwrap();
        prop_assert!((mse - sol.mmse).abs() < 1e-8, "{} vs {}", mse, sol.mmse);
    }

    #[test]
    fn mmse_ignores_relative_phases(
        s in arb_state(6),
        prior in arb_prior(),
        phases in prop::collection::vec(0.0f64..(2.0 * PI), 7),
    ) {
        let rotated = FockSuperposition::new(
            s.coeffs().iter().zip(&phases).map(|(a, t)| a * Complex64::from_polar(1.0, *t)).collect(),
        ).unwrap();
        let a = solve(&s, &prior).unwrap().mmse;
        let b = solve(&rotated, &prior).unwrap().mmse;
        prop_assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn residual_vanishes_on_support(s in arb_state(6), prior in arb_prior()) {
        let sol = solve(&s, &prior).unwrap();
        prop_assert!(anticommutator_residual(&sol.b_op, &sol.gamma0, &sol.gamma1) < 1e-9);
    }

    #[test]
    fn mmse_between_zero_and_prior_variance(s in arb_state(6), prior in arb_prior()) {
        let sol = solve(&s, &prior).unwrap();
        let (_, var) = prior.mean_and_variance();
        prop_assert!(sol.mmse >= -1e-12);
        prop_assert!(sol.mmse <= var + 1e-9);
    }

    #[test]
    fn measurement_is_orthonormal_and_sorted(s in arb_state(6), prior in arb_prior()) {
        let sol = solve(&s, &prior).unwrap();
        let m = &sol.measurement;
        for a in 0..m.dim() {
            for b in 0..m.dim() {
                let ip = m.projectors[a].dotc(&m.projectors[b]);
                let want = if a == b { 1.0 } else { 0.0 };
                prop_assert!((ip - c(want, 0.0)).norm() < 1e-10);
            }
        }
        prop_assert!(m.estimates.windows(2).all(|w| w[0] >= w[1]));
        let total: f64 = sol.outcome_probabilities().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rotated_measurement_is_never_better(
        s in arb_state(3),
        prior in arb_closed_prior(),
        seed in prop::collection::vec(-1.0f64..1.0, 32),
    ) {
        let sol = solve(&s, &prior).unwrap();
        let dim = s.dim();
        let u = random_unitary(&seed[..2 * dim * dim]);
        let projectors = (0..dim).map(|j| u.column(j).into_owned()).collect();
        let rotated = MeasurementSpec { projectors, estimates: sol.measurement.estimates.clone() };
        let mse = mse_of_measurement(&s, &prior, &rotated).unwrap();
        prop_assert!(mse >= sol.mmse - 1e-10);
    }
}
