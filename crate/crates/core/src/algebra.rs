//! Dense complex operator arithmetic and density-matrix hygiene.
//!
//! Joint operators are always ordered oscillator ⊗ qubit, with the qubit
//! basis ordered (g, e). A joint basis state `|n, q⟩` therefore lives at
//! index `2 n + q` (see [`crate::model::joint_index`]).

use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Largest Hilbert-space dimension any constructor will build.
pub const MAX_DIM: usize = 4096;

/// Tolerances a [`DensityMatrix`] must satisfy after hygiene.
pub const HERMITIAN_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-10;
pub const POSITIVITY_TOL: f64 = 1e-8;

/// Dense square matrix of complex amplitudes.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexOperator(DMatrix<C64>);

impl ComplexOperator {
    pub fn new(matrix: DMatrix<C64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::Dimension(format!(
                "operator must be square, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix.nrows() == 0 {
            return Err(Error::Dimension("operator dimension must be >= 1".into()));
        }
        if matrix.nrows() > MAX_DIM {
            return Err(Error::Dimension(format!(
                "dimension {} exceeds maximum {MAX_DIM}",
                matrix.nrows()
            )));
        }
        if matrix
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::NonFinite("operator entries".into()));
        }
        Ok(Self(matrix))
    }

    pub(crate) fn from_matrix_unchecked(matrix: DMatrix<C64>) -> Self {
        debug_assert_eq!(matrix.nrows(), matrix.ncols());
        Self(matrix)
    }

    pub fn zeros(dim: usize) -> Self {
        Self(DMatrix::zeros(dim, dim))
    }

    pub fn identity(dim: usize) -> Self {
        Self(DMatrix::identity(dim, dim))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let mut m = DMatrix::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = C64::new(d, 0.0);
        }
        Self(m)
    }

    /// Builds an operator from row-major entries.
    pub fn from_rows(dim: usize, entries: &[C64]) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::Dimension(format!(
                "expected {} entries, got {}",
                dim * dim,
                entries.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(dim, dim, entries))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.0[(i, j)]
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.0
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn scale(&self, s: C64) -> Self {
        Self(&self.0 * s)
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    pub fn commutator(&self, other: &Self) -> Self {
        Self(&self.0 * &other.0 - &other.0 * &self.0)
    }

    pub fn anticommutator(&self, other: &Self) -> Self {
        Self(&self.0 * &other.0 + &other.0 * &self.0)
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn hermiticity_error(&self) -> f64 {
        self.max_abs_diff(&dagger(self))
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_error() <= tol
    }

    /// Eigenvalues in ascending order; the operator is assumed Hermitian.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.0.clone())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    fn check_same_dim(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::Dimension(format!(
                "dimension mismatch: {} vs {}",
                self.dim(),
                other.dim()
            )));
        }
        Ok(())
    }
}

impl Add for &ComplexOperator {
    type Output = ComplexOperator;
    fn add(self, rhs: Self) -> ComplexOperator {
        ComplexOperator(&self.0 + &rhs.0)
    }
}

impl Sub for &ComplexOperator {
    type Output = ComplexOperator;
    fn sub(self, rhs: Self) -> ComplexOperator {
        ComplexOperator(&self.0 - &rhs.0)
    }
}

impl Mul for &ComplexOperator {
    type Output = ComplexOperator;
    fn mul(self, rhs: Self) -> ComplexOperator {
        ComplexOperator(&self.0 * &rhs.0)
    }
}

/// Tensor product `a ⊗ b`; entry `(i·db + k, j·db + l)` equals `a[i,j]·b[k,l]`.
pub fn kron(a: &ComplexOperator, b: &ComplexOperator) -> Result<ComplexOperator> {
    a.dim()
        .checked_mul(b.dim())
        .filter(|&d| d <= MAX_DIM)
        .ok_or_else(|| {
            Error::Dimension(format!(
                "kron of {}x{} exceeds maximum dimension {MAX_DIM}",
                a.dim(),
                b.dim()
            ))
        })?;
    Ok(ComplexOperator(a.0.kronecker(&b.0)))
}

/// Conjugate transpose.
pub fn dagger(a: &ComplexOperator) -> ComplexOperator {
    ComplexOperator(a.0.adjoint())
}

/// Hermitian, unit-trace, positive-semidefinite operator.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix(ComplexOperator);

impl DensityMatrix {
    /// Validates `op` against the density-matrix invariants without modifying it.
    pub fn new(op: ComplexOperator) -> Result<Self> {
        let herm = op.hermiticity_error();
        if herm > HERMITIAN_TOL {
            return Err(Error::InvalidState(format!(
                "not Hermitian (max |rho - rho^dag| = {herm:.3e})"
            )));
        }
        let tr = op.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} is not 1")));
        }
        let min_eig = op.hermitian_eigenvalues()[0];
        if min_eig < -POSITIVITY_TOL {
            return Err(Error::InvalidState(format!(
                "negative eigenvalue {min_eig:.3e}"
            )));
        }
        Ok(Self(op))
    }

    pub(crate) fn from_operator_unchecked(op: ComplexOperator) -> Self {
        Self(op)
    }

    /// `|ψ⟩⟨ψ|` for a (not necessarily normalized) state vector.
    pub fn pure(psi: &[C64]) -> Result<Self> {
        let norm2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if !(norm2 > 0.0 && norm2.is_finite()) {
            return Err(Error::InvalidState("state vector has zero norm".into()));
        }
        let dim = psi.len();
        let mut m = DMatrix::zeros(dim, dim);
        for i in 0..dim {
            for j in 0..dim {
                m[(i, j)] = psi[i] * psi[j].conj() / norm2;
            }
        }
        Ok(Self(ComplexOperator::new(m)?))
    }

    /// Projector on basis state `index`.
    pub fn basis(index: usize, dim: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::Dimension(format!(
                "basis index {index} out of range for dimension {dim}"
            )));
        }
        let mut diag = vec![0.0; dim];
        diag[index] = 1.0;
        Ok(Self(ComplexOperator::from_real_diagonal(&diag)))
    }

    /// Diagonal state with the given (normalized) populations.
    pub fn diagonal(populations: &[f64]) -> Result<Self> {
        let total: f64 = populations.iter().sum();
        if populations.iter().any(|&p| p < 0.0 || !p.is_finite()) || total <= 0.0 {
            return Err(Error::InvalidState(
                "populations must be non-negative".into(),
            ));
        }
        let normalized: Vec<f64> = populations.iter().map(|p| p / total).collect();
        Ok(Self(ComplexOperator::from_real_diagonal(&normalized)))
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self(ComplexOperator::identity(dim).scale_real(1.0 / dim as f64))
    }

    pub fn operator(&self) -> &ComplexOperator {
        &self.0
    }

    pub fn into_operator(self) -> ComplexOperator {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.0.get(i, j)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.0.hermitian_eigenvalues()[0]
    }

    /// Real diagonal of ρ.
    pub fn populations(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.get(i, i).re).collect()
    }
}

/// `Tr[O ρ]`.
pub fn expectation(rho: &DensityMatrix, o: &ComplexOperator) -> Result<C64> {
    rho.0.check_same_dim(o)?;
    let (r, m) = (&rho.0 .0, &o.0);
    let d = o.dim();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..d {
        for j in 0..d {
            acc += m[(i, j)] * r[(j, i)];
        }
    }
    Ok(acc)
}

/// `Tr[ρ²]`.
pub fn purity(rho: &DensityMatrix) -> f64 {
    // For Hermitian ρ, Tr[ρ²] = Σ |ρ_ij|².
    rho.0 .0.iter().map(|z| z.norm_sqr()).sum()
}

/// Hermitizes and renormalizes an approximately valid state.
pub fn enforce_hygiene(op: ComplexOperator) -> Result<DensityMatrix> {
    let m = op.0;
    let herm = (&m + m.adjoint()) * C64::new(0.5, 0.0);
    let tr = herm.trace().re;
    if !(tr > 0.0) || !tr.is_finite() {
        return Err(Error::Divergence(format!(
            "trace {tr:.3e} is not positive; reduce dt"
        )));
    }
    Ok(DensityMatrix(ComplexOperator(herm / C64::new(tr, 0.0))))
}

/// `½ ‖a − b‖₁`.
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    a.0.check_same_dim(&b.0)?;
    let diff = &a.0 - &b.0;
    Ok(0.5
        * diff
            .hermitian_eigenvalues()
            .iter()
            .map(|l| l.abs())
            .sum::<f64>())
}
