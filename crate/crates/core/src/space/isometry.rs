use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::{make_covariance, BasisChoice, CovarianceSpec, SeqH};
use crate::error::{Error, Result};
use crate::linalg::{gram_deviation, random_orthogonal};

const ROTATION_TOLERANCE: f64 = 1e-10;
const BLOCK_LEAK_TOLERANCE: f64 = 1e-10;

/// Which of the isometric isomorphisms a [`BasisIsometry`] realizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IsometryKind {
    /// Φ_λ: U → ℓ²_λ (with its companion Ψ_λ).
    PhiLambda,
    /// Φ: ℓ²_λ → ℓ²_μ diagonalizing Q_Φ in (g_k^(μ)), with companion Ψ.
    Eigen,
    /// Φ_μ ∘ Φ_λ⁻¹ between two eigendecompositions of the same Q.
    Composed,
}

/// Indices sharing one exact eigenvalue, in source and in target order.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenBlock {
    pub value: f64,
    pub source: Vec<usize>,
    pub target: Vec<usize>,
}

/// A pair (Φ, Ψ) acting on standard coordinates.
///
/// The coupling matrix C has entries C_jk = ⟨e_j^(λ), f_k^(μ)⟩_U. On standard
/// coordinates Φ acts as v ↦ Cᵀv and Ψ acts entrywise as w ↦ (Σ_j C_jk w^j)_k,
/// so ⟨h, Ψ(w)⟩_H = Φ(⟨h, w⟩_H) holds by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisIsometry {
    kind: IsometryKind,
    source: CovarianceSpec,
    target: CovarianceSpec,
    coupling: DMatrix<f64>,
}

/// Groups indices of equal eigenvalues, in order of first appearance.
/// Equality is exact: repeated eigenvalues must be declared identically.
pub fn equal_eigenvalue_blocks(eigenvalues: &[f64]) -> Vec<(f64, Vec<usize>)> {
    let mut blocks: Vec<(f64, Vec<usize>)> = Vec::new();
    for (j, &l) in eigenvalues.iter().enumerate() {
        match blocks.iter_mut().find(|(v, _)| *v == l) {
            Some((_, idx)) => idx.push(j),
            None => blocks.push((l, vec![j])),
        }
    }
    blocks
}

/// One identity rotation per eigenvalue block of `source`.
pub fn identity_block_rotations(source: &CovarianceSpec) -> Vec<DMatrix<f64>> {
    equal_eigenvalue_blocks(source.eigenvalues())
        .iter()
        .map(|(_, idx)| DMatrix::identity(idx.len(), idx.len()))
        .collect()
}

/// One Haar-random orthogonal matrix per eigenvalue block of `source`.
pub fn random_block_rotations<R: Rng + ?Sized>(source: &CovarianceSpec, rng: &mut R) -> Vec<DMatrix<f64>> {
    equal_eigenvalue_blocks(source.eigenvalues())
        .iter()
        .map(|(_, idx)| random_orthogonal(idx.len(), rng))
        .collect()
}

/// Builds Φ: ℓ²_λ → ℓ²_μ with μ a rearrangement of λ. Index `b` of the block
/// of value v in the source is sent to index `c` of the same block in the
/// target with weight `rotations[block][(b, c)]`.
pub fn build_eigen_isometry(
    source: &CovarianceSpec,
    target_eigenvalues: &[f64],
    block_rotations: &[DMatrix<f64>],
) -> Result<BasisIsometry> {
    assemble_eigen(source, target_eigenvalues, block_rotations, true)
}

pub(crate) fn build_eigen_isometry_unchecked(
    source: &CovarianceSpec,
    target_eigenvalues: &[f64],
    block_rotations: &[DMatrix<f64>],
) -> Result<BasisIsometry> {
    assemble_eigen(source, target_eigenvalues, block_rotations, false)
}

fn assemble_eigen(
    source: &CovarianceSpec,
    target_eigenvalues: &[f64],
    block_rotations: &[DMatrix<f64>],
    validate: bool,
) -> Result<BasisIsometry> {
    let n = source.modes();
    if target_eigenvalues.len() != n {
        return Err(Error::MultisetMismatch);
    }
    let mut a = source.eigenvalues().to_vec();
    let mut b = target_eigenvalues.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    if a != b {
        return Err(Error::MultisetMismatch);
    }
    let blocks = eigen_blocks(source.eigenvalues(), target_eigenvalues);
    if block_rotations.len() != blocks.len() {
        return Err(Error::dims("block rotations", blocks.len(), block_rotations.len()));
    }
    let mut coupling = DMatrix::zeros(n, n);
    for (index, (block, rot)) in blocks.iter().zip(block_rotations).enumerate() {
        let m = block.source.len();
        if rot.nrows() != m || rot.ncols() != m {
            return Err(Error::BlockShapeMismatch {
                block: index,
                expected: m,
                rows: rot.nrows(),
                cols: rot.ncols(),
            });
        }
        if validate {
            let deviation = gram_deviation(rot);
            if !(deviation <= ROTATION_TOLERANCE) {
                return Err(Error::NonOrthogonalRotation { block: index, deviation });
            }
        }
        for (bi, &j) in block.source.iter().enumerate() {
            for (ci, &k) in block.target.iter().enumerate() {
                coupling[(j, k)] = rot[(bi, ci)];
            }
        }
    }
    let target = make_covariance(target_eigenvalues.to_vec(), BasisChoice::Identity)?;
    Ok(BasisIsometry {
        kind: IsometryKind::Eigen,
        source: source.clone(),
        target,
        coupling,
    })
}

fn eigen_blocks(source: &[f64], target: &[f64]) -> Vec<EigenBlock> {
    equal_eigenvalue_blocks(source)
        .into_iter()
        .map(|(value, src)| EigenBlock {
            value,
            source: src,
            target: target
                .iter()
                .enumerate()
                .filter(|(_, &m)| m == value)
                .map(|(k, _)| k)
                .collect(),
        })
        .collect()
}

/// Φ_μ ∘ Φ_λ⁻¹ for two eigendecompositions of the same covariance operator.
pub fn compose_isometry(from: &CovarianceSpec, to: &CovarianceSpec) -> Result<BasisIsometry> {
    if from.modes() != to.modes() {
        return Err(Error::dims("modes", from.modes(), to.modes()));
    }
    let coupling = from.eigenbasis().tr_mul(to.eigenbasis());
    for j in 0..from.modes() {
        for k in 0..to.modes() {
            if from.eigenvalues()[j] != to.eigenvalues()[k] && coupling[(j, k)].abs() > BLOCK_LEAK_TOLERANCE {
                return Err(Error::SpecMismatch(format!(
                    "eigenvectors {j} and {k} have different eigenvalues but overlap {:e}",
                    coupling[(j, k)]
                )));
            }
        }
    }
    Ok(BasisIsometry {
        kind: IsometryKind::Composed,
        source: from.clone(),
        target: to.clone(),
        coupling,
    })
}

impl BasisIsometry {
    /// Φ_λ: U → ℓ²_λ, carried onto the canonical sequence-space spec.
    pub fn phi_lambda(spec: &CovarianceSpec) -> Result<Self> {
        let target = make_covariance(spec.eigenvalues().to_vec(), BasisChoice::Identity)?
            .with_tail_mass(spec.tail_mass());
        Ok(BasisIsometry {
            kind: IsometryKind::PhiLambda,
            source: spec.clone(),
            target,
            coupling: DMatrix::identity(spec.modes(), spec.modes()),
        })
    }

    pub fn identity(spec: &CovarianceSpec) -> Self {
        BasisIsometry {
            kind: IsometryKind::Eigen,
            source: spec.clone(),
            target: spec.clone(),
            coupling: DMatrix::identity(spec.modes(), spec.modes()),
        }
    }

    pub fn kind(&self) -> IsometryKind {
        self.kind
    }

    pub fn source(&self) -> &CovarianceSpec {
        &self.source
    }

    pub fn target(&self) -> &CovarianceSpec {
        &self.target
    }

    pub fn coupling(&self) -> &DMatrix<f64> {
        &self.coupling
    }

    /// Φ on standard coordinates: v ↦ Cᵀv.
    pub fn apply_weighted(&self, coords: &DVector<f64>) -> DVector<f64> {
        self.coupling.tr_mul(coords)
    }

    /// Ψ on ℓ²(H): (w^j)_j ↦ (Σ_j C_jk w^j)_k.
    pub fn apply_seq(&self, w: &SeqH) -> SeqH {
        SeqH::new(w.matrix() * &self.coupling)
    }

    /// The eigendecomposition (μ, E·C) of the source covariance that this
    /// isometry points to.
    pub fn alternate_decomposition(&self) -> Result<CovarianceSpec> {
        make_covariance(
            self.target.eigenvalues().to_vec(),
            BasisChoice::Matrix(self.source.eigenbasis() * &self.coupling),
        )
        .map(|s| s.with_tail_mass(self.source.tail_mass()))
    }

    /// A composed isometry with a caller-supplied coupling, skipping the
    /// same-covariance check. Only for fault injection.
    pub(crate) fn composed_unchecked(source: &CovarianceSpec, target: &CovarianceSpec, coupling: DMatrix<f64>) -> Self {
        BasisIsometry {
            kind: IsometryKind::Composed,
            source: source.clone(),
            target: target.clone(),
            coupling,
        }
    }

    pub(crate) fn alternate_decomposition_unchecked(&self) -> CovarianceSpec {
        CovarianceSpec::unchecked(
            self.target.eigenvalues().to_vec(),
            self.source.eigenbasis() * &self.coupling,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::HVector;
    use std::f64::consts::FRAC_PI_4;

    fn spec(l: &[f64]) -> CovarianceSpec {
        make_covariance(l.to_vec(), BasisChoice::Identity).unwrap()
    }

    #[test]
    fn trivial_isometry_is_identity() {
        let s = spec(&[0.5, 0.25]);
        let iso = build_eigen_isometry(&s, &[0.5, 0.25], &identity_block_rotations(&s)).unwrap();
        assert_eq!(iso.coupling(), &DMatrix::identity(2, 2));
    }

    #[test]
    fn swap_within_block() {
        let s = spec(&[0.5, 0.5]);
        let swap = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let iso = build_eigen_isometry(&s, &[0.5, 0.5], &[swap]).unwrap();
        let v = DVector::from_column_slice(&[3.0, -2.0]);
        assert_eq!(iso.apply_weighted(&v).as_slice(), &[-2.0, 3.0]);
        let w = SeqH::from_entries(&[HVector::from_slice(&[1.0, 2.0]), HVector::from_slice(&[5.0, 7.0])]).unwrap();
        let pw = iso.apply_seq(&w);
        assert_eq!(pw.entry(0), w.entry(1));
        assert_eq!(pw.entry(1), w.entry(0));
        // ⟨h, Ψ(w)⟩ = Φ(⟨h, w⟩)
        let h = HVector::from_slice(&[0.3, -1.1]);
        let lhs = pw.pair_with(&h);
        let rhs = iso.apply_weighted(&w.pair_with(&h));
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn rotation_in_block_preserves_weighted_norm() {
        let s = spec(&[0.5, 0.5]);
        let (c, sn) = (FRAC_PI_4.cos(), FRAC_PI_4.sin());
        let rot = DMatrix::from_row_slice(2, 2, &[c, -sn, sn, c]);
        let iso = build_eigen_isometry(&s, &[0.5, 0.5], &[rot]).unwrap();
        let v = DVector::from_column_slice(&[1.7, -0.4]);
        let before: f64 = v.iter().map(|x| 0.5 * x * x).sum();
        let after: f64 = iso.apply_weighted(&v).iter().map(|x| 0.5 * x * x).sum();
        assert!((before - after).abs() < 1e-12);
    }

    #[test]
    fn permutation_across_distinct_values() {
        let s = spec(&[0.5, 0.25, 0.125]);
        let iso = build_eigen_isometry(&s, &[0.125, 0.5, 0.25], &identity_block_rotations(&s)).unwrap();
        let v = DVector::from_column_slice(&[1.0, 2.0, 3.0]);
        assert_eq!(iso.apply_weighted(&v).as_slice(), &[3.0, 1.0, 2.0]);
        assert_eq!(iso.target().eigenvalues(), &[0.125, 0.5, 0.25]);
    }

    #[test]
    fn error_paths() {
        let s = spec(&[0.5, 0.5, 0.25]);
        assert_eq!(
            build_eigen_isometry(&s, &[0.5, 0.25, 0.25], &identity_block_rotations(&s)).unwrap_err(),
            Error::MultisetMismatch
        );
        let bad_shape = vec![DMatrix::identity(3, 3), DMatrix::identity(1, 1)];
        assert!(matches!(
            build_eigen_isometry(&s, &[0.5, 0.5, 0.25], &bad_shape),
            Err(Error::BlockShapeMismatch { block: 0, .. })
        ));
        let skewed = vec![DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.0, 1.0]), DMatrix::identity(1, 1)];
        assert!(matches!(
            build_eigen_isometry(&s, &[0.5, 0.5, 0.25], &skewed),
            Err(Error::NonOrthogonalRotation { block: 0, .. })
        ));
    }

    #[test]
    fn alternate_decomposition_has_same_covariance() {
        let s = make_covariance(vec![0.4, 0.3, 0.3, 0.1], BasisChoice::Seeded(9)).unwrap();
        let mut rng = crate::rng::stream(1, 0, 0, crate::rng::Purpose::Rotation);
        let rots = random_block_rotations(&s, &mut rng);
        let iso = build_eigen_isometry(&s, &[0.3, 0.1, 0.4, 0.3], &rots).unwrap();
        let alt = iso.alternate_decomposition().unwrap();
        assert!((alt.covariance_matrix() - s.covariance_matrix()).amax() < 1e-14);
        let composed = compose_isometry(&s, &alt).unwrap();
        assert!((composed.coupling() - iso.coupling()).amax() < 1e-14);
    }

    #[test]
    fn compose_rejects_different_covariances() {
        let a = make_covariance(vec![0.4, 0.1], BasisChoice::Identity).unwrap();
        let b = make_covariance(vec![0.4, 0.1], BasisChoice::Seeded(2)).unwrap();
        assert!(matches!(compose_isometry(&a, &b), Err(Error::SpecMismatch(_))));
    }
}
