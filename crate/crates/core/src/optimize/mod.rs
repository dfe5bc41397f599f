//! Probe-state optimization for an arbitrary prior.

pub mod simplex;

use std::cmp::Ordering;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::personick::{self, mmse_flat_closed_form};
use crate::prior::{MomentTable, Prior};
use crate::states::FockSuperposition;
use crate::TWO_PI;
use simplex::{golden_section, nelder_mead, SimplexOptions};

/// Two MMSE values closer than this are considered equal when choosing
/// between equivalent reported states.
const REFLECTION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub restarts: usize,
    pub seed: u64,
    /// Initial simplex edge in radians.
    pub step: f64,
    pub x_tol: f64,
    pub f_tol: f64,
    /// Objective evaluations allowed per restart.
    pub max_evals: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self { restarts: 16, seed: 0, step: 0.3, x_tol: 1e-10, f_tol: 1e-12, max_evals: 40_000 }
    }
}

#[derive(Debug, Clone)]
pub struct OptimizationResult {
    pub state: FockSuperposition,
    pub mmse: f64,
    pub restarts_used: usize,
    pub converged: bool,
}

/// Best grid point of [`brute_force_oracle`] together with the largest
/// objective change between that point and any neighbouring grid point.
#[derive(Debug, Clone)]
pub struct OracleResult {
    pub result: OptimizationResult,
    pub resolution_bound: f64,
}

/// Minimizes the MMSE over `n`-photon probes under `prior`.
///
/// Amplitude moduli live on the unit sphere via `n` hyperspherical angles;
/// with `allow_phases` the `n` relative phases of `a_1..a_n` are searched
/// too. The reported state is canonicalized: `a_0` real non-negative, relative
/// phases dropped when that leaves the MMSE unchanged, and the mirror image `a_l ↦ a_{n-l}` is reported instead when it sorts first
/// (real parts, then imaginary parts) and has the same MMSE.
pub fn optimize_coefficients(
    n: usize,
    prior: &Prior,
    allow_phases: bool,
    config: &OptimizerConfig,
) -> Result<OptimizationResult> {
    if n == 0 {
        return Err(Error::Domain("optimization requires n >= 1".into()));
    }
    let table = prior.moment_table(n);
    let objective = |x: &[f64]| objective(n, allow_phases, &table, x);
    let opts = SimplexOptions {
        step: config.step,
        x_tol: config.x_tol,
        f_tol: config.f_tol,
        max_evals: config.max_evals,
    };

    let restarts = config.restarts.max(1);
    let runs: Vec<simplex::Minimum> = (0..restarts)
        .into_par_iter()
        .map(|index| {
            let x0 = seed_parameters(n, allow_phases, index, config.seed);
            nelder_mead(objective, &x0, &opts)
        })
        .collect();

    // ties go to the lowest restart index
    let mut best = 0;
    for (i, run) in runs.iter().enumerate().skip(1) {
        if run.f < runs[best].f {
            best = i;
        }
    }
    let state = state_from_parameters(n, allow_phases, &runs[best].x)?;
    let (state, mmse) = canonicalize(state, prior)?;
    Ok(OptimizationResult { state, mmse, restarts_used: restarts, converged: runs[best].converged })
}

fn objective(n: usize, allow_phases: bool, table: &MomentTable, x: &[f64]) -> f64 {
    state_from_parameters(n, allow_phases, x)
        .and_then(|s| personick::mmse_with_moments(&s, table))
        .unwrap_or(f64::INFINITY)
}

fn canonicalize(state: FockSuperposition, prior: &Prior) -> Result<(FockSuperposition, f64)> {
    let mut state = state.with_canonical_phase();
    let mut mmse = personick::solve(&state, prior)?.mmse;
    let real = FockSuperposition::from_real(&state.moduli())?;
    let real_mmse = personick::solve(&real, prior)?.mmse;
    if real_mmse <= mmse + REFLECTION_TOL {
        state = real;
        mmse = real_mmse;
    }
    let mirror = state.reflected().with_canonical_phase();
    if lexicographic(&mirror, &state) == Ordering::Less {
        let mirror_mmse = personick::solve(&mirror, prior)?.mmse;
        if (mirror_mmse - mmse).abs() <= REFLECTION_TOL {
            return Ok((mirror, mirror_mmse));
        }
    }
    Ok((state, mmse))
}

/// Orders states by their amplitudes, real parts before imaginary parts,
/// ignoring differences below `1e-12`.
fn lexicographic(a: &FockSuperposition, b: &FockSuperposition) -> Ordering {
    let key = |s: &FockSuperposition| -> Vec<f64> {
        s.coeffs().iter().map(|c| c.re).chain(s.coeffs().iter().map(|c| c.im)).collect()
    };
    for (x, y) in key(a).iter().zip(&key(b)) {
        if (x - y).abs() > REFLECTION_TOL {
            return x.partial_cmp(y).unwrap_or(Ordering::Equal);
        }
    }
    Ordering::Equal
}

/// Maps `n` angles (and optionally `n` phases) to a normalized state.
fn state_from_parameters(n: usize, allow_phases: bool, x: &[f64]) -> Result<FockSuperposition> {
    let mut coeffs = Vec::with_capacity(n + 1);
    let mut tail = 1.0;
    for theta in &x[..n] {
        coeffs.push(tail * theta.cos());
        tail *= theta.sin();
    }
    coeffs.push(tail);
    let coeffs = coeffs
        .into_iter()
        .enumerate()
        .map(|(l, a)| {
            let phase = if allow_phases && l > 0 { x[n + l - 1] } else { 0.0 };
            Complex64::from_polar(a.abs(), phase)
        })
        .collect();
    FockSuperposition::normalized(coeffs)
}

/// Inverse of [`state_from_parameters`] for non-negative moduli.
fn angles_from_moduli(moduli: &[f64]) -> Vec<f64> {
    let n = moduli.len() - 1;
    (0..n)
        .map(|k| {
            let rest = moduli[k + 1..].iter().map(|a| a * a).sum::<f64>().sqrt();
            rest.atan2(moduli[k])
        })
        .collect()
}

/// Starting point of restart `index`: the uniform superposition, the NOON
/// state, the balanced beam-splitter state, then random points on the sphere.
fn seed_parameters(n: usize, allow_phases: bool, index: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let moduli: Vec<f64> = match index {
        0 => vec![1.0; n + 1],
        1 => FockSuperposition::noon(n).expect("n >= 1").moduli(),
        2 => FockSuperposition::beam_splitter(n, 0.5).expect("valid tau").moduli(),
        _ => (0..=n).map(|_| rng.sample::<f64, _>(StandardNormal).abs()).collect(),
    };
    let mut x = angles_from_moduli(&moduli);
    if allow_phases {
        for _ in 0..n {
            x.push(if index < 3 { 0.0 } else { rng.random_range(0.0..TWO_PI) });
        }
    }
    x
}

/// Best transmissivity for the beam-splitter family under the flat prior:
/// a coarse scan over `[0, 1]` followed by golden-section refinement.
pub fn optimize_bs_transmissivity(n: usize) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(Error::Domain("optimization requires n >= 1".into()));
    }
    let f = |tau: f64| {
        FockSuperposition::beam_splitter(n, tau.clamp(0.0, 1.0))
            .map(|s| mmse_flat_closed_form(&s))
            .unwrap_or(f64::INFINITY)
    };
    const SCAN: usize = 200;
    let mut best = 0;
    let mut best_f = f64::INFINITY;
    for i in 0..=SCAN {
        let v = f(i as f64 / SCAN as f64);
        if v < best_f {
            best_f = v;
            best = i;
        }
    }
    let lo = best.saturating_sub(1) as f64 / SCAN as f64;
    let hi = (best + 1).min(SCAN) as f64 / SCAN as f64;
    let (tau, value) = golden_section(f, lo, hi, 1e-9);
    if value <= best_f {
        Ok((tau, value))
    } else {
        Ok((best as f64 / SCAN as f64, best_f))
    }
}

/// Exhaustive search over squared amplitudes `|a_l|² = k_l / grid_steps`
/// with `Σ k_l = grid_steps` and all phases zero.
pub fn brute_force_oracle(n: usize, prior: &Prior, grid_steps: usize) -> Result<OracleResult> {
    if n == 0 {
        return Err(Error::Domain("optimization requires n >= 1".into()));
    }
    if n > 3 {
        return Err(Error::CostGuard(format!(
            "brute-force search is limited to n <= 3 (got {n})"
        )));
    }
    if grid_steps < 32 {
        return Err(Error::Domain(format!("grid_steps must be at least 32 (got {grid_steps})")));
    }
    let table = prior.moment_table(n);
    let value = |k: &[usize]| -> f64 {
        let amps: Vec<f64> = k.iter().map(|&kl| (kl as f64 / grid_steps as f64).sqrt()).collect();
        FockSuperposition::from_real(&amps)
            .and_then(|s| personick::mmse_with_moments(&s, &table))
            .unwrap_or(f64::INFINITY)
    };

    let (best_k, best_f) = (0..=grid_steps)
        .into_par_iter()
        .map(|k0| {
            let mut best: (Vec<usize>, f64) = (Vec::new(), f64::INFINITY);
            let mut k = vec![0usize; n + 1];
            k[0] = k0;
            visit_compositions(&mut k, 1, grid_steps - k0, &mut |k| {
                let v = value(k);
                if v < best.1 {
                    best = (k.to_vec(), v);
                }
            });
            best
        })
        .reduce(
            || (Vec::new(), f64::INFINITY),
            |a, b| if b.1 < a.1 || (b.1 == a.1 && b.0 < a.0) { b } else { a },
        );

    let mut bound: f64 = 0.0;
    for from in 0..=n {
        if best_k[from] == 0 {
            continue;
        }
        for to in 0..=n {
            if to == from {
                continue;
            }
            let mut k = best_k.clone();
            k[from] -= 1;
            k[to] += 1;
            bound = bound.max((value(&k) - best_f).abs());
        }
    }

    let amps: Vec<f64> = best_k.iter().map(|&kl| (kl as f64 / grid_steps as f64).sqrt()).collect();
    let state = FockSuperposition::from_real(&amps)?;
    let mmse = personick::solve(&state, prior)?.mmse;
    Ok(OracleResult {
        result: OptimizationResult { state, mmse, restarts_used: 0, converged: true },
        resolution_bound: bound,
    })
}

fn visit_compositions(k: &mut Vec<usize>, pos: usize, remaining: usize, f: &mut impl FnMut(&[usize])) {
    if pos == k.len() - 1 {
        k[pos] = remaining;
        f(k);
        return;
    }
    for v in 0..=remaining {
        k[pos] = v;
        visit_compositions(k, pos + 1, remaining - v, f);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    #[test]
    fn parameter_round_trip() {
        let s = FockSuperposition::from_real(&[0.2, 0.5, 0.1, 0.7]).unwrap();
        let x = angles_from_moduli(&s.moduli());
        let back = state_from_parameters(3, false, &x).unwrap();
        for (a, b) in back.coeffs().iter().zip(s.coeffs()) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn seeds_are_deterministic_and_distinct() {
        let a = seed_parameters(3, true, 5, 42);
        let b = seed_parameters(3, true, 5, 42);
        let c = seed_parameters(3, true, 6, 42);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.len(), 6);
    }

    #[test]
    fn flat_single_photon_optimum() {
        let r = optimize_coefficients(1, &Prior::flat(), false, &OptimizerConfig::default()).unwrap();
        assert!((r.mmse - (PI * PI / 3.0 - 0.25)).abs() < 1e-10);
        for a in r.state.coeffs() {
            assert!((a.re - FRAC_1_SQRT_2).abs() < 1e-5 && a.im == 0.0);
        }
        assert!(r.converged);
        assert_eq!(r.restarts_used, 16);
    }

    #[test]
    fn n_zero_rejected() {
        assert!(optimize_coefficients(0, &Prior::flat(), false, &OptimizerConfig::default()).is_err());
        assert!(optimize_bs_transmissivity(0).is_err());
    }

    #[test]
    fn bs_balanced_is_optimal() {
        let (tau, mmse) = optimize_bs_transmissivity(1).unwrap();
        assert!((tau - 0.5).abs() < 1e-6);
        assert!((mmse - (PI * PI / 3.0 - 0.25)).abs() < 1e-12);
    }

    #[test]
    fn oracle_guards() {
        assert!(matches!(brute_force_oracle(4, &Prior::flat(), 64), Err(Error::CostGuard(_))));
        assert!(matches!(brute_force_oracle(1, &Prior::flat(), 16), Err(Error::Domain(_))));
    }

    #[test]
    fn oracle_single_photon_flat() {
        let o = brute_force_oracle(1, &Prior::flat(), 512).unwrap();
        assert!((o.result.mmse - 3.03987).abs() < 1e-4);
        assert!(o.resolution_bound > 0.0);
    }

    #[test]
    fn compositions_are_counted() {
        let mut count = 0;
        let mut k = vec![0; 3];
        visit_compositions(&mut k, 0, 10, &mut |k| {
            assert_eq!(k.iter().sum::<usize>(), 10);
            count += 1;
        });
        assert_eq!(count, 66);
    }
}
