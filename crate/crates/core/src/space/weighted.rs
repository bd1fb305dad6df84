use nalgebra::DVector;

use super::CovarianceSpec;
use crate::error::{Error, Result};

/// A truncated element of ℓ²_λ with ⟨v, w⟩ = Σ_j λ_j v^j w^j.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSeq<'a> {
    coords: DVector<f64>,
    weights: &'a [f64],
}

impl<'a> WeightedSeq<'a> {
    pub fn new(coords: DVector<f64>, weights: &'a [f64]) -> Result<Self> {
        if coords.len() != weights.len() {
            return Err(Error::dims("ℓ²_λ coordinates", weights.len(), coords.len()));
        }
        Ok(WeightedSeq { coords, weights })
    }

    /// g_j^(λ) = g_j / √λ_j (0-based `j`).
    pub fn basis_vector(weights: &'a [f64], j: usize) -> Self {
        let mut coords = DVector::zeros(weights.len());
        coords[j] = 1.0 / weights[j].sqrt();
        WeightedSeq { coords, weights }
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.coords
    }

    pub fn weights(&self) -> &'a [f64] {
        self.weights
    }

    pub fn inner(&self, other: &WeightedSeq<'_>) -> f64 {
        debug_assert_eq!(self.weights, other.weights);
        self.coords
            .iter()
            .zip(other.coords.iter())
            .zip(self.weights)
            .map(|((v, w), l)| l * v * w)
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    /// λ_j^{-1/2} ⟨v, g_j^(λ)⟩_{ℓ²_λ}. Since ⟨v, g_j^(λ)⟩ = √λ_j v^j this is
    /// exactly the stored coordinate.
    pub fn standard_coordinate(&self, j: usize) -> f64 {
        self.coords[j]
    }
}

/// Φ_λ u = (⟨u, e_j^(λ)⟩_U / √λ_j)_j.
pub fn phi_lambda_apply<'a>(spec: &'a CovarianceSpec, u: &DVector<f64>) -> Result<WeightedSeq<'a>> {
    if u.len() != spec.modes() {
        return Err(Error::dims("U vector", spec.modes(), u.len()));
    }
    let mut coords = spec.eigenbasis().tr_mul(u);
    for (c, s) in coords.iter_mut().zip(spec.sqrt_eigenvalues()) {
        *c /= s;
    }
    WeightedSeq::new(coords, spec.eigenvalues())
}

/// Φ_λ⁻¹ v = Σ_j √λ_j v^j e_j^(λ).
pub fn phi_lambda_inverse(spec: &CovarianceSpec, v: &WeightedSeq<'_>) -> Result<DVector<f64>> {
    if v.coords.len() != spec.modes() {
        return Err(Error::dims("ℓ²_λ coordinates", spec.modes(), v.coords.len()));
    }
    let scaled = v.coords.component_mul(&DVector::from_column_slice(spec.sqrt_eigenvalues()));
    Ok(spec.eigenbasis() * scaled)
}
