//! Two-mode fixed-photon-number probe states `|Ψ_n⟩ = Σ_l a_l |l, n-l⟩`.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};

const NORM_TOL: f64 = 1e-10;

/// Fock-basis amplitudes `a_0..a_n` of an `n`-photon two-mode state.
#[derive(Debug, Clone, PartialEq)]
pub struct FockSuperposition {
    coeffs: Vec<Complex64>,
}

impl FockSuperposition {
    /// Wraps already-normalized amplitudes.
    pub fn new(coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidState("a state needs at least one amplitude".into()));
        }
        if coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::InvalidState("amplitudes must be finite".into()));
        }
        let norm: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidState(format!("Σ|a_l|² = {norm}, expected 1")));
        }
        Ok(Self { coeffs })
    }

    /// Scales arbitrary non-zero amplitudes to unit norm.
    pub fn normalized(coeffs: Vec<Complex64>) -> Result<Self> {
        let norm: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::InvalidState("cannot normalize a zero or non-finite vector".into()));
        }
        Self::new(coeffs.into_iter().map(|c| c / norm).collect())
    }

    /// Real non-negative amplitudes, normalized.
    pub fn from_real(amplitudes: &[f64]) -> Result<Self> {
        Self::normalized(amplitudes.iter().map(|&a| Complex64::new(a, 0.0)).collect())
    }

    /// `(|n,0⟩ + |0,n⟩)/√2`.
    pub fn noon(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("NOON state requires n >= 1".into()));
        }
        let mut coeffs = vec![Complex64::new(0.0, 0.0); n + 1];
        coeffs[0] = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        coeffs[n] = coeffs[0];
        Ok(Self { coeffs })
    }

    /// `|n,0⟩` through a beam splitter of transmissivity `tau`:
    /// `c_l = √(C(n,l) τ^l (1-τ)^{n-l})`.
    pub fn beam_splitter(n: usize, tau: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&tau) {
            return Err(Error::Domain(format!("transmissivity {tau} outside [0, 1]")));
        }
        let coeffs = (0..=n)
            .map(|l| Complex64::new(binomial_amplitude(n, l, tau), 0.0))
            .collect();
        Self::normalized(coeffs)
    }

    /// Photon number `n`.
    pub fn photons(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn moduli(&self) -> Vec<f64> {
        self.coeffs.iter().map(|c| c.norm()).collect()
    }

    /// The state after the modes pick up `±φ`: `a_l ↦ a_l e^{i(2l-n)φ}`.
    pub fn apply_phase(&self, phi: f64) -> Self {
        let n = self.photons() as f64;
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(l, a)| a * Complex64::from_polar(1.0, (2.0 * l as f64 - n) * phi))
            .collect();
        Self { coeffs }
    }

    /// Removes the global phase so that `a_0` is real and non-negative. When
    /// `a_0 = 0` the first non-zero amplitude is made real instead.
    pub fn with_canonical_phase(&self) -> Self {
        let Some(pivot) = self.coeffs.iter().position(|c| c.norm() > 1e-14) else {
            return self.clone();
        };
        let rot = self.coeffs[pivot].conj() / self.coeffs[pivot].norm();
        let mut coeffs: Vec<Complex64> = self.coeffs.iter().map(|c| c * rot).collect();
        coeffs[pivot] = Complex64::new(self.coeffs[pivot].norm(), 0.0);
        Self { coeffs }
    }

    /// `a_l ↦ a_{n-l}`.
    pub fn reflected(&self) -> Self {
        let mut coeffs = self.coeffs.clone();
        coeffs.reverse();
        Self { coeffs }
    }

    /// `⟨other|self⟩`.
    pub fn overlap(&self, other: &FockSuperposition) -> Complex64 {
        other
            .coeffs
            .iter()
            .zip(&self.coeffs)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// Parses `noon:<n>`, `bs:<n>:<τ>` or `coeffs:[re,im;re,im;...]`.
    /// Explicit coefficient lists are normalized.
    pub fn from_spec(spec: &str) -> Result<Self> {
        spec.parse()
    }
}

impl FromStr for FockSuperposition {
    type Err = Error;

    fn from_str(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        let bad = |what: &str| Error::Parse(format!("{what} in state spec `{spec}`"));
        if let Some(n) = spec.strip_prefix("noon:") {
            let n: usize = n.trim().parse().map_err(|_| bad("bad photon number"))?;
            return Self::noon(n);
        }
        if let Some(rest) = spec.strip_prefix("bs:") {
            let (n, tau) = rest.split_once(':').ok_or_else(|| bad("expected bs:<n>:<tau>"))?;
            let n: usize = n.trim().parse().map_err(|_| bad("bad photon number"))?;
            let tau: f64 = tau.trim().parse().map_err(|_| bad("bad transmissivity"))?;
            return Self::beam_splitter(n, tau);
        }
        if let Some(list) = spec.strip_prefix("coeffs:") {
            let inner = list
                .trim()
                .strip_prefix('[')
                .and_then(|s| s.strip_suffix(']'))
                .ok_or_else(|| bad("expected coeffs:[re,im;...]"))?;
            let coeffs = inner
                .split(';')
                .map(|pair| {
                    let (re, im) = pair.split_once(',').ok_or_else(|| bad("expected re,im pairs"))?;
                    let re: f64 = re.trim().parse().map_err(|_| bad("bad real part"))?;
                    let im: f64 = im.trim().parse().map_err(|_| bad("bad imaginary part"))?;
                    Ok(Complex64::new(re, im))
                })
                .collect::<Result<Vec<_>>>()?;
            return Self::normalized(coeffs);
        }
        Err(bad("unknown state kind (expected noon:, bs: or coeffs:)"))
    }
}

impl fmt::Display for FockSuperposition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, c) in self.coeffs.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{:.6}{:+.6}i", c.re, c.im)?;
        }
        write!(f, "]")
    }
}

fn binomial_amplitude(n: usize, l: usize, tau: f64) -> f64 {
    // Exact endpoints avoid 0·ln 0.
    if tau == 0.0 {
        return if l == 0 { 1.0 } else { 0.0 };
    }
    if tau == 1.0 {
        return if l == n { 1.0 } else { 0.0 };
    }
    let ln_binom: f64 = (1..=l).map(|i| ((n - l + i) as f64 / i as f64).ln()).sum();
    let ln_p = ln_binom + l as f64 * tau.ln() + (n - l) as f64 * (1.0 - tau).ln();
    (0.5 * ln_p).exp()
}
