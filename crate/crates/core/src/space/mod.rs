//! Truncated Hilbert spaces and the isometries between them.
//!
//! Every space is stored in coordinates of a fixed reference basis:
//! H has dimension `dH`, U and U₀ have `J` modes, sequences in ℓ²_λ and
//! ℓ²(H) are cut at index `J`. Basis changes are explicit matrices.

mod covariance;
mod isometry;
mod weighted;

pub use covariance::{make_covariance, BasisChoice, CovarianceSpec, EigenvalueLaw, BASIS_TOLERANCE};
pub use isometry::{
    build_eigen_isometry, compose_isometry, equal_eigenvalue_blocks, identity_block_rotations,
    random_block_rotations, BasisIsometry, EigenBlock, IsometryKind,
};
pub(crate) use isometry::build_eigen_isometry_unchecked;
pub use weighted::{phi_lambda_apply, phi_lambda_inverse, WeightedSeq};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Truncation dimensions and time horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceConfig {
    pub dim_h: usize,
    pub modes: usize,
    pub horizon: f64,
}

impl SpaceConfig {
    pub fn new(dim_h: usize, modes: usize, horizon: f64) -> Result<Self> {
        if dim_h == 0 {
            return Err(Error::config("space.dH", "must be >= 1"));
        }
        if modes == 0 {
            return Err(Error::config("space.J", "must be >= 1"));
        }
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::config("space.T", "must be a finite positive time"));
        }
        Ok(SpaceConfig { dim_h, modes, horizon })
    }
}

/// An element of H in coordinates of the fixed orthonormal basis (f_k).
#[derive(Debug, Clone, PartialEq)]
pub struct HVector(DVector<f64>);

impl HVector {
    pub fn new(coords: DVector<f64>) -> Self {
        HVector(coords)
    }

    pub fn from_slice(coords: &[f64]) -> Self {
        HVector(DVector::from_column_slice(coords))
    }

    pub fn zeros(dim: usize) -> Self {
        HVector(DVector::zeros(dim))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn into_inner(self) -> DVector<f64> {
        self.0
    }

    pub fn inner(&self, other: &HVector) -> f64 {
        self.0.dot(&other.0)
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn norm_squared(&self) -> f64 {
        self.0.norm_squared()
    }
}

/// A truncated element of ℓ²(H): column `j` is the entry h^j.
#[derive(Debug, Clone, PartialEq)]
pub struct SeqH(DMatrix<f64>);

impl SeqH {
    pub fn new(entries: DMatrix<f64>) -> Self {
        SeqH(entries)
    }

    pub fn zeros(dim_h: usize, modes: usize) -> Self {
        SeqH(DMatrix::zeros(dim_h, modes))
    }

    pub fn from_entries(entries: &[HVector]) -> Result<Self> {
        let dim = entries.first().map(HVector::dim).unwrap_or(0);
        let mut m = DMatrix::zeros(dim, entries.len());
        for (j, e) in entries.iter().enumerate() {
            if e.dim() != dim {
                return Err(Error::dims("ℓ²(H) entry", dim, e.dim()));
            }
            m.set_column(j, e.coords());
        }
        Ok(SeqH(m))
    }

    pub fn dim_h(&self) -> usize {
        self.0.nrows()
    }

    pub fn len(&self) -> usize {
        self.0.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.0.ncols() == 0
    }

    pub fn entry(&self, j: usize) -> HVector {
        HVector(self.0.column(j).into_owned())
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn norm_squared(&self) -> f64 {
        self.0.norm_squared()
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    /// The real sequence (⟨h, w^j⟩_H)_j.
    pub fn pair_with(&self, h: &HVector) -> DVector<f64> {
        self.0.tr_mul(h.coords())
    }
}

/// An operator in L₂⁰(H) = L₂(U₀, H): column `j` holds S e_j.
#[derive(Debug, Clone, PartialEq)]
pub struct HSOperator(DMatrix<f64>);

impl HSOperator {
    pub fn new(columns: DMatrix<f64>) -> Self {
        HSOperator(columns)
    }

    pub fn zeros(dim_h: usize, modes: usize) -> Self {
        HSOperator(DMatrix::zeros(dim_h, modes))
    }

    /// Restriction to U₀ of a bounded operator given in reference coordinates
    /// of U (a `dH × J` matrix acting on U coordinates).
    pub fn from_reference(spec: &CovarianceSpec, operator: &DMatrix<f64>) -> Result<Self> {
        if operator.ncols() != spec.modes() {
            return Err(Error::dims("operator columns", spec.modes(), operator.ncols()));
        }
        restrict_bounded_operator(spec, &(operator * spec.eigenbasis()))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn dim_h(&self) -> usize {
        self.0.nrows()
    }

    pub fn modes(&self) -> usize {
        self.0.ncols()
    }

    /// S e_j (0-based `j`).
    pub fn apply_basis(&self, j: usize) -> HVector {
        HVector(self.0.column(j).into_owned())
    }
}

/// ‖S‖_{L₂⁰(H)} = (Σ_j ‖S e_j‖²)^{1/2}.
pub fn hs_norm(s: &HSOperator) -> f64 {
    s.0.column_iter().map(|c| c.norm_squared()).sum::<f64>().sqrt()
}

/// Ψ_λ(S) = (S e_j)_j.
pub fn psi_lambda_apply(spec: &CovarianceSpec, s: &HSOperator) -> Result<SeqH> {
    if s.modes() != spec.modes() {
        return Err(Error::dims("operator columns", spec.modes(), s.modes()));
    }
    Ok(SeqH(s.0.clone()))
}

/// Ψ_λ⁻¹: the operator whose image of e_j is w^j.
pub fn psi_lambda_inverse(spec: &CovarianceSpec, w: &SeqH) -> Result<HSOperator> {
    if w.len() != spec.modes() {
        return Err(Error::dims("ℓ²(H) length", spec.modes(), w.len()));
    }
    Ok(HSOperator(w.0.clone()))
}

/// S|_{U₀} for a bounded S whose column `j` is S e_j^(λ): scales column `j`
/// by √λ_j so that it becomes S e_j.
pub fn restrict_bounded_operator(spec: &CovarianceSpec, a: &DMatrix<f64>) -> Result<HSOperator> {
    if a.ncols() != spec.modes() {
        return Err(Error::dims("operator columns", spec.modes(), a.ncols()));
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::config("operator", "entries must be finite"));
    }
    let mut m = a.clone();
    for (j, s) in spec.sqrt_eigenvalues().iter().enumerate() {
        m.column_mut(j).scale_mut(*s);
    }
    Ok(HSOperator(m))
}
