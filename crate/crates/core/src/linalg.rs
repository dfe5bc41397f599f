//! Dense complex Hermitian operators on the `(n+1)`-dimensional Fock basis.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

const HERMITIAN_TOL: f64 = 1e-12;

/// Eigenvalues closer than this are treated as one degenerate block.
pub const DEGENERACY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator(CMatrix);

/// Unsorted eigenvalues and eigenvector columns of a Hermitian matrix.
///
/// nalgebra's QR iteration can return NaN on exactly low-rank inputs whose
/// tridiagonal form decays into subnormals (NOON `Γ_0` at some `n`). When
/// that happens the matrix is conjugated by a fixed dense unitary and
/// decomposed again; the vectors are rotated back. Non-finite output only
/// survives if every rotation fails.
pub fn eigh(m: &CMatrix) -> (DVector<f64>, CMatrix) {
    let finite = |e: &nalgebra::SymmetricEigen<Complex64, nalgebra::Dyn>| {
        e.eigenvalues.iter().all(|v| v.is_finite()) && e.eigenvectors.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    };
    let first = m.clone().symmetric_eigen();
    if finite(&first) {
        return (first.eigenvalues, first.eigenvectors);
    }
    let dim = m.nrows();
    for chirp in 0..4 {
        let q = CMatrix::from_fn(dim, dim, |j, l| {
            let angle = std::f64::consts::TAU * (j * l) as f64 / dim as f64 + 0.37 * (chirp * j * j) as f64;
            Complex64::from_polar(1.0 / (dim as f64).sqrt(), angle)
        });
        let rotated = q.adjoint() * m * &q;
        let e = ((&rotated + rotated.adjoint()) * Complex64::new(0.5, 0.0)).symmetric_eigen();
        if finite(&e) {
            return (e.eigenvalues, q * e.eigenvectors);
        }
    }
    (first.eigenvalues, first.eigenvectors)
}

/// Eigenpairs sorted by descending eigenvalue, with a deterministic basis
/// inside each degenerate block.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: Vec<CVector>,
}

impl HermitianOperator {
    /// Checks `H = H†` within `1e-12` and symmetrizes exactly.
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::InvalidOperator(format!(
                "{}x{} matrix is not square",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(Error::InvalidOperator("non-finite entry".into()));
        }
        let dev = (&matrix - matrix.adjoint()).iter().map(|c| c.norm()).fold(0.0, f64::max);
        if dev > HERMITIAN_TOL {
            return Err(Error::InvalidOperator(format!("not Hermitian (deviation {dev:e})")));
        }
        Ok(Self::hermitize(matrix))
    }

    /// `(M + M†)/2` without checking.
    pub(crate) fn hermitize(matrix: CMatrix) -> Self {
        let adj = matrix.adjoint();
        Self((matrix + adj) * Complex64::new(0.5, 0.0))
    }

    pub fn from_fn(dim: usize, f: impl FnMut(usize, usize) -> Complex64) -> Result<Self> {
        Self::new(CMatrix::from_fn(dim, dim, f))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(CMatrix::zeros(dim, dim))
    }

    pub fn identity(dim: usize) -> Self {
        Self(CMatrix::identity(dim, dim))
    }

    /// `Σ_j w_j |v_j⟩⟨v_j|`.
    pub fn from_spectrum(values: &[f64], vectors: &[CVector]) -> Self {
        let dim = vectors.first().map_or(0, |v| v.len());
        let mut m = CMatrix::zeros(dim, dim);
        for (w, v) in values.iter().zip(vectors) {
            m += v * v.adjoint() * Complex64::new(*w, 0.0);
        }
        Self::hermitize(m)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        self.0[(i, j)]
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    /// `tr(self · other)`, real for a product of Hermitian operators up to
    /// rounding.
    pub fn trace_product(&self, other: &HermitianOperator) -> Complex64 {
        // tr(AB) = Σ_ij A_ij B_ji
        let mut t = Complex64::new(0.0, 0.0);
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                t += self.0[(i, j)] * other.0[(j, i)];
            }
        }
        t
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    /// `⟨v|H|v⟩`.
    pub fn expectation(&self, v: &CVector) -> f64 {
        (v.adjoint() * &self.0 * v)[(0, 0)].re
    }

    pub fn add(&self, other: &HermitianOperator) -> HermitianOperator {
        Self(&self.0 + &other.0)
    }

    pub fn scale(&self, s: f64) -> HermitianOperator {
        Self(&self.0 * Complex64::new(s, 0.0))
    }

    /// Eigendecomposition with eigenvalues in descending order.
    ///
    /// Eigenvalues within [`DEGENERACY_TOL`] form a block whose basis is
    /// rebuilt by Gram–Schmidt on the projected canonical basis vectors and
    /// ordered lexicographically (descending) by real parts. Every vector is
    /// phase-fixed so that its last non-negligible component is real
    /// positive.
    pub fn eigen(&self) -> Eigen {
        let dim = self.dim();
        let (eigenvalues, eigenvectors) = eigh(&self.0);
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| eigenvalues[b].partial_cmp(&eigenvalues[a]).unwrap_or(Ordering::Equal));
        let raw_values: Vec<f64> = order.iter().map(|&i| eigenvalues[i]).collect();
        let raw_vectors: Vec<CVector> = order.iter().map(|&i| eigenvectors.column(i).into_owned()).collect();

        let mut values = Vec::with_capacity(dim);
        let mut vectors = Vec::with_capacity(dim);
        let mut start = 0;
        while start < dim {
            let mut end = start + 1;
            while end < dim && raw_values[end - 1] - raw_values[end] <= DEGENERACY_TOL {
                end += 1;
            }
            if end - start == 1 {
                values.push(raw_values[start]);
                vectors.push(fix_phase(raw_vectors[start].clone()));
            } else {
                let mean = raw_values[start..end].iter().sum::<f64>() / (end - start) as f64;
                let block = canonical_block_basis(&raw_vectors[start..end]);
                for v in block {
                    values.push(mean);
                    vectors.push(v);
                }
            }
            start = end;
        }
        Eigen { values, vectors }
    }
}

/// Orthonormal basis of the span of `block` built from projected canonical
/// basis vectors.
fn canonical_block_basis(block: &[CVector]) -> Vec<CVector> {
    let dim = block[0].len();
    let want = block.len();
    let mut projector = CMatrix::zeros(dim, dim);
    for v in block {
        projector += v * v.adjoint();
    }
    let mut basis: Vec<CVector> = Vec::with_capacity(want);
    for seed in 0..dim {
        if basis.len() == want {
            break;
        }
        let mut v = projector.column(seed).into_owned();
        // two passes of classical Gram–Schmidt
        for _ in 0..2 {
            for b in &basis {
                let proj = b.dotc(&v);
                v -= b * proj;
            }
        }
        let norm = v.norm();
        if norm > 1e-6 {
            basis.push(fix_phase(v / Complex64::new(norm, 0.0)));
        }
    }
    basis.sort_by(|a, b| {
        for (x, y) in a.iter().zip(b.iter()) {
            match y.re.partial_cmp(&x.re) {
                Some(Ordering::Equal) | None => continue,
                Some(ord) => return ord,
            }
        }
        Ordering::Equal
    });
    basis
}

fn fix_phase(v: CVector) -> CVector {
    let pivot = v.iter().rev().find(|c| c.norm() > 1e-9).copied();
    match pivot {
        Some(p) => {
            let rot = p.conj() / p.norm();
            v * rot
        }
        None => v,
    }
}
