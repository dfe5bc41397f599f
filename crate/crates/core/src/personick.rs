//! The Personick MMSE for a pure probe under an arbitrary phase prior.
//!
//! With `ρ(φ)` the phase-shifted probe,
//!
//! ```text
//! Γ_k = ∫ P(φ) φ^k ρ(φ) dφ,   B Γ_0 + Γ_0 B = 2 Γ_1,   δ = tr Γ_2 − tr(B Γ_1)
//! ```
//!
//! and the eigenvectors of `B` form the optimal projective measurement, its
//! eigenvalues the estimate reported on each outcome.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{eigh, CMatrix, CVector, HermitianOperator};
use crate::prior::{MomentTable, Prior};
use crate::states::FockSuperposition;
use crate::TWO_PI;

/// Pairs of `Γ_0` eigenvalues summing to less than this are treated as null
/// directions and `B` is set to zero there.
pub const NULL_TOL: f64 = 1e-12;

/// `Γ_0` eigenvalues below `-NEGATIVE_TOL` are rejected; smaller negative
/// values are clamped to zero.
pub const NEGATIVE_TOL: f64 = 1e-8;

const GAUGE_TOL: f64 = 1e-10;

/// Optimal projective measurement: one projector and estimate per outcome,
/// estimates in descending order.
#[derive(Debug, Clone)]
pub struct MeasurementSpec {
    pub projectors: Vec<CVector>,
    pub estimates: Vec<f64>,
}

impl MeasurementSpec {
    /// Eigenbasis of an estimator operator.
    pub fn from_operator(op: &HermitianOperator) -> Self {
        let eigen = op.eigen();
        Self { projectors: eigen.vectors, estimates: eigen.values }
    }

    pub fn dim(&self) -> usize {
        self.projectors.len()
    }

    pub fn outcomes(&self) -> usize {
        self.estimates.len()
    }

    /// Same projectors with every outcome reporting `value`.
    pub fn with_constant_estimate(&self, value: f64) -> Self {
        Self { projectors: self.projectors.clone(), estimates: vec![value; self.estimates.len()] }
    }

    /// `|⟨h_j|ψ⟩|²` for each outcome.
    pub fn probabilities(&self, state: &[Complex64]) -> Vec<f64> {
        self.projectors
            .iter()
            .map(|h| {
                h.iter()
                    .zip(state)
                    .map(|(hj, a)| hj.conj() * a)
                    .sum::<Complex64>()
                    .norm_sqr()
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct PersonickSolution {
    pub gamma0: HermitianOperator,
    pub gamma1: HermitianOperator,
    pub tr_gamma2: f64,
    pub b_op: HermitianOperator,
    /// Radians².
    pub mmse: f64,
    pub measurement: MeasurementSpec,
}

impl PersonickSolution {
    /// Marginal outcome probabilities `⟨h_j|Γ_0|h_j⟩` under the prior.
    pub fn outcome_probabilities(&self) -> Vec<f64> {
        self.measurement
            .projectors
            .iter()
            .map(|h| self.gamma0.expectation(h))
            .collect()
    }
}

/// `Γ_k` on the Fock basis: entry `(l, l') = a_l a*_{l'} M_k(2(l-l'))`.
pub fn build_gamma(state: &FockSuperposition, prior: &Prior, k: usize) -> HermitianOperator {
    assert!(k <= 2, "Γ_k is only defined here for k ≤ 2");
    let table = prior.moment_table(state.photons());
    gamma_from_moments(state, &table, k)
}

pub(crate) fn gamma_from_moments(state: &FockSuperposition, table: &MomentTable, k: usize) -> HermitianOperator {
    let a = state.coeffs();
    let dim = a.len();
    assert!(table.max_shift() + 1 >= dim, "moment table too small for the state");
    let m = CMatrix::from_fn(dim, dim, |l, lp| {
        a[l] * a[lp].conj() * table.get(k, l as isize - lp as isize)
    });
    HermitianOperator::hermitize(m)
}

/// Minimal-norm solution of `B Γ_0 + Γ_0 B = 2 Γ_1`.
pub fn solve_b(gamma0: &HermitianOperator, gamma1: &HermitianOperator) -> Result<HermitianOperator> {
    solve_b_with(gamma0, gamma1, NULL_TOL)
}

/// [`solve_b`] with an explicit null-space threshold.
pub fn solve_b_with(
    gamma0: &HermitianOperator,
    gamma1: &HermitianOperator,
    null_tol: f64,
) -> Result<HermitianOperator> {
    if gamma0.dim() != gamma1.dim() {
        return Err(Error::UnsupportedDimension { expected: gamma0.dim(), found: gamma1.dim() });
    }
    let (values, u) = eigh(gamma0.matrix());
    if values.iter().any(|g| !g.is_finite()) {
        return Err(Error::InvalidOperator("eigendecomposition of Γ_0 did not converge".into()));
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -NEGATIVE_TOL {
        return Err(Error::InvalidOperator(format!(
            "Γ_0 has negative eigenvalue {min:e}"
        )));
    }
    let gammas: Vec<f64> = values.iter().map(|g| g.max(0.0)).collect();
    let rotated = u.adjoint() * gamma1.matrix() * &u;
    let dim = gammas.len();
    let in_basis = CMatrix::from_fn(dim, dim, |i, j| {
        let s = gammas[i] + gammas[j];
        if s > null_tol {
            rotated[(i, j)] * (2.0 / s)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    Ok(HermitianOperator::hermitize(&u * in_basis * u.adjoint()))
}

/// Frobenius norm of `BΓ_0 + Γ_0B − 2Γ_1` projected onto the support of `Γ_0`.
pub fn anticommutator_residual(
    b: &HermitianOperator,
    gamma0: &HermitianOperator,
    gamma1: &HermitianOperator,
) -> f64 {
    let (b, g0, g1) = (b.matrix(), gamma0.matrix(), gamma1.matrix());
    let residual = b * g0 + g0 * b - g1 * Complex64::new(2.0, 0.0);
    let (values, vectors) = eigh(g0);
    let dim = g0.nrows();
    let mut support = CMatrix::zeros(dim, dim);
    for (i, g) in values.iter().enumerate() {
        if *g > NULL_TOL {
            let v = vectors.column(i);
            support += v * v.adjoint();
        }
    }
    (&support * residual * &support).norm()
}

/// Optimal measurement and MMSE for `state` under `prior`.
pub fn solve(state: &FockSuperposition, prior: &Prior) -> Result<PersonickSolution> {
    let table = prior.moment_table(state.photons());
    solve_with_moments(state, &table)
}

pub(crate) fn solve_with_moments(state: &FockSuperposition, table: &MomentTable) -> Result<PersonickSolution> {
    let gamma0 = gamma_from_moments(state, table, 0);
    let gamma1 = gamma_from_moments(state, table, 1);
    let tr_gamma2 = trace_gamma2(state, table);
    let b_op = solve_b(&gamma0, &gamma1)?;
    let mmse = tr_gamma2 - b_op.trace_product(&gamma1).re;
    let measurement = MeasurementSpec::from_operator(&b_op);
    Ok(PersonickSolution { gamma0, gamma1, tr_gamma2, b_op, mmse, measurement })
}

/// MMSE alone, skipping the measurement eigendecomposition.
pub(crate) fn mmse_with_moments(state: &FockSuperposition, table: &MomentTable) -> Result<f64> {
    let gamma0 = gamma_from_moments(state, table, 0);
    let gamma1 = gamma_from_moments(state, table, 1);
    let b_op = solve_b(&gamma0, &gamma1)?;
    Ok(trace_gamma2(state, table) - b_op.trace_product(&gamma1).re)
}

fn trace_gamma2(state: &FockSuperposition, table: &MomentTable) -> f64 {
    let second = table.get(2, 0).re;
    state.coeffs().iter().map(|a| a.norm_sqr() * second).sum()
}

/// Outcome-sum MSE `∫ P(φ) Σ_k P(k|φ) (h_k − φ)² dφ` of an arbitrary
/// projective measurement, by quadrature over the prior.
pub fn mse_of_measurement(
    state: &FockSuperposition,
    prior: &Prior,
    measurement: &MeasurementSpec,
) -> Result<f64> {
    if measurement.dim() != state.dim() || measurement.projectors.iter().any(|p| p.len() != state.dim()) {
        return Err(Error::UnsupportedDimension { expected: state.dim(), found: measurement.dim() });
    }
    let n = state.photons() as f64;
    let mut shifted = vec![Complex64::new(0.0, 0.0); state.dim()];
    let mut total = 0.0;
    for (phi, weight) in prior.quadrature() {
        if weight == 0.0 {
            continue;
        }
        for (l, (out, a)) in shifted.iter_mut().zip(state.coeffs()).enumerate() {
            *out = a * Complex64::from_polar(1.0, (2.0 * l as f64 - n) * phi);
        }
        let local: f64 = measurement
            .probabilities(&shifted)
            .iter()
            .zip(&measurement.estimates)
            .map(|(p, h)| p * (h - phi) * (h - phi))
            .sum();
        total += weight * local;
    }
    Ok(total)
}

/// Flat-prior MMSE
/// `π²/3 − Σ_{l≠l'} |a_l|²|a_l'|² / (2(l−l')²(|a_l|²+|a_l'|²))`.
pub fn mmse_flat_closed_form(state: &FockSuperposition) -> f64 {
    PI * PI / 3.0 - flat_cross_sum(state)
}

/// The `l ≠ l'` sum shared by the flat-prior `tr(BΓ_1)` and MMSE.
pub fn flat_cross_sum(state: &FockSuperposition) -> f64 {
    let p: Vec<f64> = state.coeffs().iter().map(|a| a.norm_sqr()).collect();
    let mut sum = 0.0;
    for (l, &pl) in p.iter().enumerate() {
        for (lp, &plp) in p.iter().enumerate() {
            if l == lp || pl + plp < 1e-14 {
                continue;
            }
            let d = l as f64 - lp as f64;
            sum += pl * plp / (2.0 * d * d * (pl + plp));
        }
    }
    sum
}

/// MMSE of an `n`-photon NOON probe under the flat prior truncated to
/// `[0, m]`.
pub fn mmse_noon_truncated_closed_form(n: usize, m: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("NOON state requires n >= 1".into()));
    }
    if !(m > 0.0 && m <= TWO_PI + 1e-12) {
        return Err(Error::Domain(format!("truncation width {m} outside (0, 2π]")));
    }
    let nf = n as f64;
    let x = m * nf;
    if x < 1e-3 {
        let x2 = x * x;
        let series = x2 / 12.0 - x2 * x2 / 36.0 + x2 * x2 * x2 / 180.0 - x2 * x2 * x2 * x2 / 2100.0;
        return Ok(series / (nf * nf));
    }
    let (s, c) = (2.0 * x).sin_cos();
    let x2 = x * x;
    let numerator = 2.0 * x2 * x2 - 3.0 * x2 + (3.0 - 3.0 * x2) * c + 6.0 * x * s - 3.0;
    Ok(numerator / (24.0 * m * m * nf.powi(4)))
}

/// Replaces `B` by `B + K` for a Hermitian `K` with `KΓ_0 = Γ_0K = 0`,
/// recomputing the MMSE and measurement.
pub fn gauge_perturb(solution: &PersonickSolution, k_op: &HermitianOperator) -> Result<PersonickSolution> {
    if k_op.dim() != solution.gamma0.dim() {
        return Err(Error::InvalidGauge(format!(
            "K has dimension {}, Γ_0 has {}",
            k_op.dim(),
            solution.gamma0.dim()
        )));
    }
    let (k, g0) = (k_op.matrix(), solution.gamma0.matrix());
    let left = (k * g0).norm();
    let right = (g0 * k).norm();
    if left >= GAUGE_TOL || right >= GAUGE_TOL {
        return Err(Error::InvalidGauge(format!(
            "‖KΓ_0‖ = {left:e}, ‖Γ_0K‖ = {right:e}; both must vanish"
        )));
    }
    let b_op = solution.b_op.add(k_op);
    let mmse = solution.tr_gamma2 - b_op.trace_product(&solution.gamma1).re;
    let measurement = MeasurementSpec::from_operator(&b_op);
    Ok(PersonickSolution {
        gamma0: solution.gamma0.clone(),
        gamma1: solution.gamma1.clone(),
        tr_gamma2: solution.tr_gamma2,
        b_op,
        mmse,
        measurement,
    })
}
