//! Phase priors on `[0, 2π]` and their oscillatory moments.
//!
//! Every quantity downstream reduces to the moments
//! `M_k(ω) = ∫ φ^k e^{iωφ} P(φ) dφ` for `k ≤ 2` and `ω` an even integer.
//! Flat and truncated-flat priors evaluate them in closed form; grid priors
//! use composite Simpson quadrature over their nodes.

use std::f64::consts::PI;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quad;
use crate::TWO_PI;

/// Below this `|ω|` the moment is evaluated as a plain polynomial moment.
pub const OMEGA_ZERO: f64 = 1e-12;

/// Evidence below which a Bayes update is considered degenerate.
pub const MIN_EVIDENCE: f64 = 1e-14;

/// Default node count for grid posteriors.
pub const DEFAULT_GRID_NODES: usize = 4096;

const DOMAIN_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum Prior {
    /// `P(φ) = 1/2π` on `[0, 2π]`.
    Flat,
    /// `P(φ) = 1/(hi-lo)` on `[lo, hi]`, zero elsewhere.
    TruncatedFlat { lo: f64, hi: f64 },
    /// Sampled density, linearly interpolated between nodes.
    Grid(GridDensity),
}

/// A density sampled on strictly increasing nodes, normalized so that its
/// Simpson integral is one.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity {
    nodes: Vec<f64>,
    density: Vec<f64>,
    weights: Vec<f64>,
}

impl GridDensity {
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    /// Simpson weights matching [`nodes`](Self::nodes).
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn interpolate(&self, phi: f64) -> f64 {
        let nodes = &self.nodes;
        if phi < nodes[0] || phi > nodes[nodes.len() - 1] {
            return 0.0;
        }
        let upper = nodes.partition_point(|&x| x < phi);
        if upper == 0 {
            return self.density[0];
        }
        let (x0, x1) = (nodes[upper - 1], nodes[upper]);
        let (y0, y1) = (self.density[upper - 1], self.density[upper]);
        y0 + (y1 - y0) * (phi - x0) / (x1 - x0)
    }
}

/// The moments `M_k(2d)` for `k = 0, 1, 2` and `d = 0..=max_shift`, enough to
/// assemble every `Γ_k` for an `n = max_shift` probe.
#[derive(Debug, Clone)]
pub struct MomentTable {
    max_shift: usize,
    values: [Vec<Complex64>; 3],
}

impl MomentTable {
    pub fn max_shift(&self) -> usize {
        self.max_shift
    }

    /// `M_k(2·shift)`; negative shifts use `M_k(-ω) = conj M_k(ω)`.
    pub fn get(&self, k: usize, shift: isize) -> Complex64 {
        let v = self.values[k][shift.unsigned_abs()];
        if shift < 0 {
            v.conj()
        } else {
            v
        }
    }
}

impl Prior {
    pub fn flat() -> Self {
        Prior::Flat
    }

    pub fn truncated(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo < 0.0 || hi > TWO_PI + DOMAIN_SLACK || lo >= hi {
            return Err(Error::InvalidPrior(format!(
                "truncated window [{lo}, {hi}] must satisfy 0 <= lo < hi <= 2π"
            )));
        }
        Ok(Prior::TruncatedFlat { lo, hi: hi.min(TWO_PI) })
    }

    /// Builds a grid prior and renormalizes it to unit Simpson integral.
    pub fn grid(nodes: Vec<f64>, density: Vec<f64>) -> Result<Self> {
        if nodes.len() != density.len() {
            return Err(Error::InvalidPrior(format!(
                "{} nodes but {} density values",
                nodes.len(),
                density.len()
            )));
        }
        if nodes.len() < 3 {
            return Err(Error::InvalidPrior("grid prior needs at least 3 nodes".into()));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidPrior("grid nodes must be strictly increasing".into()));
        }
        if nodes[0] < -DOMAIN_SLACK || nodes[nodes.len() - 1] > TWO_PI + DOMAIN_SLACK {
            return Err(Error::InvalidPrior("grid nodes must lie in [0, 2π]".into()));
        }
        if density.iter().any(|d| !d.is_finite() || *d < 0.0) {
            return Err(Error::InvalidPrior("grid density must be finite and non-negative".into()));
        }
        let weights = quad::simpson_weights(&nodes);
        let total: f64 = weights.iter().zip(&density).map(|(w, d)| w * d).sum();
        if !(total > 0.0) {
            return Err(Error::InvalidPrior("grid density integrates to zero".into()));
        }
        let density = density.into_iter().map(|d| d / total).collect();
        Ok(Prior::Grid(GridDensity { nodes, density, weights }))
    }

    /// Reads a grid prior from CSV lines `φ,density`; a non-numeric first
    /// row is treated as a header.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(reader);
        let mut nodes = Vec::new();
        let mut density = Vec::new();
        for (row, record) in rdr.records().enumerate() {
            let record = record?;
            if record.len() < 2 {
                return Err(Error::Parse(format!("grid row {}: expected `phi,density`", row + 1)));
            }
            let parsed = (record[0].parse::<f64>(), record[1].parse::<f64>());
            match parsed {
                (Ok(phi), Ok(d)) => {
                    nodes.push(phi);
                    density.push(d);
                }
                _ if row == 0 => continue,
                _ => {
                    return Err(Error::Parse(format!(
                        "grid row {}: cannot parse `{}`",
                        row + 1,
                        record.iter().collect::<Vec<_>>().join(",")
                    )))
                }
            }
        }
        Prior::grid(nodes, density)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path.as_ref())?;
        Prior::from_csv_reader(file)
    }

    /// `[lo, hi]` outside which the density vanishes.
    pub fn support(&self) -> (f64, f64) {
        match self {
            Prior::Flat => (0.0, TWO_PI),
            Prior::TruncatedFlat { lo, hi } => (*lo, *hi),
            Prior::Grid(g) => (g.nodes[0], g.nodes[g.nodes.len() - 1]),
        }
    }

    pub fn density(&self, phi: f64) -> Result<f64> {
        if !(-DOMAIN_SLACK..=TWO_PI + DOMAIN_SLACK).contains(&phi) {
            return Err(Error::Domain(format!("phase {phi} outside [0, 2π]")));
        }
        Ok(match self {
            Prior::Flat => 1.0 / TWO_PI,
            Prior::TruncatedFlat { lo, hi } => {
                if phi >= *lo && phi <= *hi {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
            Prior::Grid(g) => g.interpolate(phi),
        })
    }

    /// `∫ φ^k e^{iωφ} P(φ) dφ`.
    pub fn moment(&self, k: u32, omega: f64) -> Complex64 {
        match self {
            Prior::Flat => uniform_moment(0.0, TWO_PI, k, omega),
            Prior::TruncatedFlat { lo, hi } => uniform_moment(*lo, *hi, k, omega),
            Prior::Grid(g) => g
                .nodes
                .iter()
                .zip(&g.density)
                .zip(&g.weights)
                .map(|((&phi, &d), &w)| Complex64::from_polar(w * d * phi.powi(k as i32), omega * phi))
                .sum(),
        }
    }

    /// Moments `M_k(2d)` for `k ≤ 2`, `0 ≤ d ≤ max_shift`.
    pub fn moment_table(&self, max_shift: usize) -> MomentTable {
        let mut values: [Vec<Complex64>; 3] = Default::default();
        match self {
            Prior::Grid(g) => {
                for v in values.iter_mut() {
                    v.resize(max_shift + 1, Complex64::new(0.0, 0.0));
                }
                for ((&phi, &d), &w) in g.nodes.iter().zip(&g.density).zip(&g.weights) {
                    let mass = w * d;
                    if mass == 0.0 {
                        continue;
                    }
                    let step = Complex64::from_polar(1.0, 2.0 * phi);
                    let mut phase = Complex64::new(mass, 0.0);
                    let [m0, m1, m2] = &mut values;
                    for ((v0, v1), v2) in m0.iter_mut().zip(m1.iter_mut()).zip(m2.iter_mut()) {
                        *v0 += phase;
                        *v1 += phase * phi;
                        *v2 += phase * (phi * phi);
                        phase *= step;
                    }
                }
            }
            _ => {
                for (k, v) in values.iter_mut().enumerate() {
                    *v = (0..=max_shift)
                        .map(|d| self.moment(k as u32, 2.0 * d as f64))
                        .collect();
                }
            }
        }
        MomentTable { max_shift, values }
    }

    /// `(mean, variance)` of the phase under this prior.
    pub fn mean_and_variance(&self) -> (f64, f64) {
        let mean = self.moment(1, 0.0).re;
        let second = self.moment(2, 0.0).re;
        (mean, (second - mean * mean).max(0.0))
    }

    /// Quadrature rule `(φ_i, w_i·P(φ_i))` for integrals against the prior.
    ///
    /// Closed-form priors get a composite Gauss–Legendre rule over their
    /// support, independent of the moment formulas; grid priors reuse their
    /// own Simpson rule.
    pub fn quadrature(&self) -> Vec<(f64, f64)> {
        match self {
            Prior::Grid(g) => g
                .nodes
                .iter()
                .zip(&g.density)
                .zip(&g.weights)
                .map(|((&x, &d), &w)| (x, w * d))
                .collect(),
            _ => {
                let (lo, hi) = self.support();
                let height = 1.0 / (hi - lo);
                quad::gauss_legendre(lo, hi, 512)
                    .into_iter()
                    .map(|(x, w)| (x, w * height))
                    .collect()
            }
        }
    }

    /// Posterior `∝ likelihood(φ)·P(φ)` as a grid prior, together with the
    /// evidence `∫ likelihood·P`.
    ///
    /// Closed-form priors are sampled on `grid_nodes` uniform nodes over their
    /// support; grid priors keep their nodes.
    pub fn bayes_update(
        &self,
        likelihood: impl Fn(f64) -> f64,
        grid_nodes: usize,
    ) -> Result<(Prior, f64)> {
        let (nodes, density, weights) = match self {
            Prior::Grid(g) => (g.nodes.clone(), g.density.clone(), g.weights.clone()),
            _ => {
                if grid_nodes < 3 {
                    return Err(Error::Domain("posterior grid needs at least 3 nodes".into()));
                }
                let (lo, hi) = self.support();
                let nodes = quad::linspace(lo, hi, grid_nodes);
                let density = vec![1.0 / (hi - lo); grid_nodes];
                let weights = quad::simpson_weights(&nodes);
                (nodes, density, weights)
            }
        };

        let mut posterior = Vec::with_capacity(nodes.len());
        for (&phi, &d) in nodes.iter().zip(&density) {
            let l = likelihood(phi);
            if !(-1e-12..=1.0 + 1e-12).contains(&l) {
                return Err(Error::Domain(format!("likelihood {l} at φ = {phi} is not a probability")));
            }
            posterior.push(l.clamp(0.0, 1.0) * d);
        }
        let evidence: f64 = posterior.iter().zip(&weights).map(|(p, w)| p * w).sum();
        if !(evidence >= MIN_EVIDENCE) {
            return Err(Error::DegeneratePosterior { evidence, threshold: MIN_EVIDENCE });
        }
        for p in posterior.iter_mut() {
            *p /= evidence;
        }
        let grid = GridDensity { nodes, density: posterior, weights };
        Ok((Prior::Grid(grid), evidence))
    }

    /// `count` uniformly spaced `(φ, P(φ))` samples across the support.
    pub fn sample(&self, count: usize) -> Vec<(f64, f64)> {
        let (lo, hi) = self.support();
        quad::linspace(lo, hi, count.max(2))
            .into_iter()
            .map(|phi| (phi, self.density(phi).unwrap_or(0.0)))
            .collect()
    }

    /// Parses `flat`, `trunc:<lo>..<hi>` or `grid:<path>`.
    pub fn from_spec(spec: &str) -> Result<Self> {
        spec.parse()
    }
}

/// Parses an angle in radians: a plain number or a multiple of π such as
/// `pi`, `π/2`, `3pi/2` or `2*pi`.
pub fn parse_angle(text: &str) -> Result<f64> {
    let t = text.trim();
    let bad = || Error::Parse(format!("bad angle `{text}`"));
    if let Ok(v) = t.parse::<f64>() {
        return if v.is_finite() { Ok(v) } else { Err(bad()) };
    }
    let (head, tail) = t
        .split_once("pi")
        .or_else(|| t.split_once('π'))
        .ok_or_else(bad)?;
    let head = head.trim().trim_end_matches('*').trim();
    let factor = if head.is_empty() { 1.0 } else { head.parse::<f64>().map_err(|_| bad())? };
    let tail = tail.trim();
    let divisor = match tail.strip_prefix('/') {
        Some(d) => d.trim().parse::<f64>().map_err(|_| bad())?,
        None if tail.is_empty() => 1.0,
        None => return Err(bad()),
    };
    let v = factor * PI / divisor;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad())
    }
}

impl FromStr for Prior {
    type Err = Error;

    fn from_str(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        if spec == "flat" {
            return Ok(Prior::Flat);
        }
        if let Some(window) = spec.strip_prefix("trunc:") {
            let (lo, hi) = window
                .split_once("..")
                .ok_or_else(|| Error::Parse(format!("expected trunc:<lo>..<hi>, got `{spec}`")))?;
            return Prior::truncated(parse_angle(lo)?, parse_angle(hi)?);
        }
        if let Some(path) = spec.strip_prefix("grid:") {
            return Prior::from_csv_path(path).map_err(|e| match e {
                Error::Io(io) => Error::Parse(format!("cannot read grid `{path}`: {io}")),
                other => other,
            });
        }
        Err(Error::Parse(format!(
            "unknown prior `{spec}` (expected flat, trunc:<lo>..<hi> or grid:<path>)"
        )))
    }
}

/// `(1/(hi-lo)) ∫_lo^hi φ^k e^{iωφ} dφ`.
fn uniform_moment(lo: f64, hi: f64, k: u32, omega: f64) -> Complex64 {
    let width = hi - lo;
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * width;

    if omega.abs() >= OMEGA_ZERO && (omega * half).abs() >= 1.0 {
        return closed_form(lo, hi, k, omega) / width;
    }

    // Expand φ^k around the window centre; each centred integral is
    // ∫_{-h}^{h} t^j e^{iωt} dt.
    let centred = |j: u32| {
        if omega.abs() >= OMEGA_ZERO {
            centred_series(j, omega, half)
        } else if j.is_multiple_of(2) {
            Complex64::new(2.0 * half.powi(j as i32 + 1) / (j + 1) as f64, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    };

    let mut total = Complex64::new(0.0, 0.0);
    let mut binom = 1.0;
    for j in 0..=k {
        total += centred(j) * (binom * mid.powi((k - j) as i32));
        binom = binom * (k - j) as f64 / (j + 1) as f64;
    }
    total * Complex64::from_polar(1.0, omega * mid) / width
}

/// Taylor series of `∫_{-h}^{h} t^j e^{iωt} dt` for `|ω h| < 1`.
fn centred_series(j: u32, omega: f64, half: f64) -> Complex64 {
    let mut total = Complex64::new(0.0, 0.0);
    // (iω)^p / p!
    let mut coef = Complex64::new(1.0, 0.0);
    for p in 0..60u32 {
        if (j + p).is_multiple_of(2) {
            let power = (j + p + 1) as i32;
            let term = coef * (2.0 * half.powi(power) / power as f64);
            total += term;
            if p > 4 && term.norm() < 1e-18 * total.norm().max(1e-300) {
                break;
            }
        }
        coef *= Complex64::new(0.0, omega / (p + 1) as f64);
    }
    total
}

/// `∫_lo^hi φ^k e^{iωφ} dφ` by repeated integration by parts.
fn closed_form(lo: f64, hi: f64, k: u32, omega: f64) -> Complex64 {
    let i_omega = Complex64::new(0.0, omega);
    let antiderivative = |phi: f64| {
        // Σ_j (-1)^j k!/(k-j)! φ^{k-j} / (iω)^{j+1}
        let mut sum = Complex64::new(0.0, 0.0);
        let mut falling = 1.0;
        let mut denom = i_omega;
        for j in 0..=k {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            sum += sign * falling * phi.powi((k - j) as i32) / denom;
            falling *= (k - j) as f64;
            denom *= i_omega;
        }
        sum * Complex64::from_polar(1.0, omega * phi)
    };
    antiderivative(hi) - antiderivative(lo)
}
