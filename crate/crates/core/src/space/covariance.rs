use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{gram_deviation, random_orthogonal};
use crate::rng::{self, Purpose};

/// Gram deviation above which a supplied eigenbasis is rejected.
pub const BASIS_TOLERANCE: f64 = 1e-10;

/// How the eigenbasis of a covariance operator is chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum BasisChoice {
    Identity,
    Matrix(DMatrix<f64>),
    /// Haar-random orthogonal basis drawn from the given seed.
    Seeded(u64),
}

/// Closed-form eigenvalue sequences, truncated at `modes` terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EigenvalueLaw {
    /// λ_j = c · j^(−p), p > 1.
    Power {
        c: f64,
        p: f64,
        #[serde(rename = "J")]
        modes: usize,
    },
    /// λ_j = c · r^j, 0 < r < 1.
    Geometric {
        c: f64,
        r: f64,
        #[serde(rename = "J")]
        modes: usize,
    },
}

impl EigenvalueLaw {
    pub fn modes(&self) -> usize {
        match *self {
            EigenvalueLaw::Power { modes, .. } | EigenvalueLaw::Geometric { modes, .. } => modes,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            EigenvalueLaw::Power { c, p, modes } => {
                if !(c > 0.0) {
                    return Err(Error::config("covariance.eigenvalues.c", "must be > 0"));
                }
                if !(p > 1.0) {
                    return Err(Error::config("covariance.eigenvalues.p", "must be > 1"));
                }
                if modes == 0 {
                    return Err(Error::config("covariance.eigenvalues.J", "must be >= 1"));
                }
            }
            EigenvalueLaw::Geometric { c, r, modes } => {
                if !(c > 0.0) {
                    return Err(Error::config("covariance.eigenvalues.c", "must be > 0"));
                }
                if !(r > 0.0 && r < 1.0) {
                    return Err(Error::config("covariance.eigenvalues.r", "must lie in (0, 1)"));
                }
                if modes == 0 {
                    return Err(Error::config("covariance.eigenvalues.J", "must be >= 1"));
                }
            }
        }
        Ok(())
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        match *self {
            EigenvalueLaw::Power { c, p, modes } => {
                (1..=modes).map(|j| c * (j as f64).powf(-p)).collect()
            }
            EigenvalueLaw::Geometric { c, r, modes } => {
                (1..=modes).map(|j| c * r.powi(j as i32)).collect()
            }
        }
    }

    /// Σ_{j>J} λ_j of the untruncated sequence.
    pub fn tail_mass(&self) -> f64 {
        match *self {
            EigenvalueLaw::Geometric { c, r, modes } => c * r.powi(modes as i32 + 1) / (1.0 - r),
            EigenvalueLaw::Power { c, p, modes } => {
                // Explicit sum to N, then Euler–Maclaurin for the remainder.
                let n_explicit = modes + 100_000;
                let explicit: f64 = ((modes + 1)..=n_explicit)
                    .rev()
                    .map(|j| (j as f64).powf(-p))
                    .sum();
                let n = n_explicit as f64;
                let remainder = n.powf(1.0 - p) / (p - 1.0) - 0.5 * n.powf(-p)
                    + p * n.powf(-p - 1.0) / 12.0;
                c * (explicit + remainder)
            }
        }
    }
}

/// Spectral data of a covariance operator Q truncated to `J` modes.
///
/// Column `j` of the eigenbasis holds the reference coordinates of the
/// eigenvector e_j^(λ). The scaled vectors e_j = √λ_j e_j^(λ) form an
/// orthonormal basis of U₀ = Q^{1/2}(U).
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceSpec {
    eigenvalues: Vec<f64>,
    sqrt_eigenvalues: Vec<f64>,
    eigenbasis: DMatrix<f64>,
    identity_basis: bool,
    trace: f64,
    tail_mass: f64,
}

/// Validates eigenvalues and basis and builds the spec.
pub fn make_covariance(eigenvalues: Vec<f64>, basis: BasisChoice) -> Result<CovarianceSpec> {
    if eigenvalues.is_empty() {
        return Err(Error::dims("eigenvalues", 1, 0));
    }
    for (index, &value) in eigenvalues.iter().enumerate() {
        if !(value > 0.0) || !value.is_finite() {
            return Err(Error::NonPositiveEigenvalue { index, value });
        }
    }
    let n = eigenvalues.len();
    let (eigenbasis, identity_basis) = match basis {
        BasisChoice::Identity => (DMatrix::identity(n, n), true),
        BasisChoice::Matrix(m) => {
            if m.nrows() != n {
                return Err(Error::dims("eigenbasis rows", n, m.nrows()));
            }
            if m.ncols() != n {
                return Err(Error::dims("eigenbasis columns", n, m.ncols()));
            }
            let deviation = gram_deviation(&m);
            if !(deviation <= BASIS_TOLERANCE) {
                return Err(Error::NonOrthogonalBasis {
                    deviation,
                    tolerance: BASIS_TOLERANCE,
                });
            }
            let is_id = m == DMatrix::identity(n, n);
            (m, is_id)
        }
        BasisChoice::Seeded(seed) => {
            let mut r = rng::stream(seed, 0, n, Purpose::Basis);
            (random_orthogonal(n, &mut r), false)
        }
    };
    Ok(CovarianceSpec::from_parts(eigenvalues, eigenbasis, identity_basis))
}

impl CovarianceSpec {
    fn from_parts(eigenvalues: Vec<f64>, eigenbasis: DMatrix<f64>, identity_basis: bool) -> Self {
        let sqrt_eigenvalues = eigenvalues.iter().map(|l| l.sqrt()).collect();
        let trace = eigenvalues.iter().sum();
        CovarianceSpec {
            eigenvalues,
            sqrt_eigenvalues,
            eigenbasis,
            identity_basis,
            trace,
            tail_mass: 0.0,
        }
    }

    /// Skips every validation. Only the negative controls use this, to feed a
    /// deliberately broken basis through the pipeline.
    pub(crate) fn unchecked(eigenvalues: Vec<f64>, eigenbasis: DMatrix<f64>) -> Self {
        CovarianceSpec::from_parts(eigenvalues, eigenbasis, false)
    }

    pub fn from_law(law: &EigenvalueLaw, basis: BasisChoice) -> Result<Self> {
        law.validate()?;
        Ok(make_covariance(law.eigenvalues(), basis)?.with_tail_mass(law.tail_mass()))
    }

    /// Declares Σ_{j>J} λ_j of the sequence this spec truncates.
    pub fn with_tail_mass(mut self, tail_mass: f64) -> Self {
        self.tail_mass = tail_mass.max(0.0);
        self
    }

    /// Number of retained modes J.
    pub fn modes(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn sqrt_eigenvalues(&self) -> &[f64] {
        &self.sqrt_eigenvalues
    }

    pub fn eigenbasis(&self) -> &DMatrix<f64> {
        &self.eigenbasis
    }

    pub fn has_identity_basis(&self) -> bool {
        self.identity_basis
    }

    /// Σ_j λ_j summed in ascending index order.
    pub fn trace(&self) -> f64 {
        self.trace
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    /// e_j^(λ) in reference coordinates (0-based `j`).
    pub fn eigenvector(&self, j: usize) -> DVector<f64> {
        self.eigenbasis.column(j).into_owned()
    }

    /// e_j = √λ_j e_j^(λ), the U₀-orthonormal basis vector (0-based `j`).
    pub fn scaled_eigenvector(&self, j: usize) -> DVector<f64> {
        self.eigenbasis.column(j) * self.sqrt_eigenvalues[j]
    }

    /// Q = E diag(λ) Eᵀ in reference coordinates.
    pub fn covariance_matrix(&self) -> DMatrix<f64> {
        let mut scaled = self.eigenbasis.clone();
        for (j, l) in self.eigenvalues.iter().enumerate() {
            scaled.column_mut(j).scale_mut(*l);
        }
        scaled * self.eigenbasis.transpose()
    }

    /// Gram deviation of the stored eigenbasis.
    pub fn basis_deviation(&self) -> f64 {
        gram_deviation(&self.eigenbasis)
    }
}
