//! Small dense linear-algebra helpers shared across modules.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

/// Largest entrywise deviation of `BᵀB` from the identity.
pub fn gram_deviation(b: &DMatrix<f64>) -> f64 {
    let n = b.ncols();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            let g = b.column(i).dot(&b.column(j));
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g - target).abs());
        }
    }
    worst
}

/// Haar-distributed orthogonal matrix built as a product of Householder
/// reflections of fresh Gaussian vectors, with the sign correction that makes
/// the distribution uniform.
pub fn random_orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let mut q = DMatrix::<f64>::identity(n, n);
    let mut signs = vec![1.0; n];
    // Q = H_0 H_1 ... H_{n-2} D; apply the reflections right to left onto I.
    let mut reflections = Vec::with_capacity(n.saturating_sub(1));
    for k in 0..n {
        let m = n - k;
        let x: DVector<f64> = DVector::from_fn(m, |_, _| rng.sample(StandardNormal));
        let s = if x[0] >= 0.0 { 1.0 } else { -1.0 };
        if m == 1 {
            signs[k] = s;
            continue;
        }
        let mut v = x.clone();
        v[0] += s * x.norm();
        // R_kk = -s‖x‖, so the column sign fix is -s.
        signs[k] = -s;
        reflections.push((k, v));
    }
    for (k, v) in reflections.iter().rev() {
        let vv = v.dot(v);
        if vv == 0.0 {
            continue;
        }
        let mut block = q.rows_mut(*k, v.len());
        // block <- (I - 2 v vᵀ / vᵀv) block
        let w = block.tr_mul(v);
        block.ger(-2.0 / vv, v, &w, 1.0);
    }
    for (j, s) in signs.iter().enumerate() {
        if *s < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Deliberately breaks orthogonality by leaking part of column 1 into column 0.
/// Used only by the non-orthogonal-basis negative control.
pub fn skew(b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = b.clone();
    if out.ncols() >= 2 {
        let leak = out.column(1) * 0.1;
        let mut c0 = out.column_mut(0);
        c0 += leak;
    } else if out.ncols() == 1 {
        out *= 1.1;
    }
    out
}

/// Relative deviation `‖a − b‖ / max(‖a‖, ‖b‖)`, zero when both vanish.
pub fn relative_deviation(a: &[f64], b: &[f64]) -> f64 {
    scaled_deviation(a, b, 0.0)
}

/// `‖a − b‖ / max(‖a‖, ‖b‖, scale)`, zero when all three vanish.
///
/// When `a` and `b` are sums whose terms cancel, pass the sum of the terms'
/// norms as `scale`: rounding error is proportional to it, not to the result.
pub fn scaled_deviation(a: &[f64], b: &[f64], scale: f64) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut diff = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for (x, y) in a.iter().zip(b) {
        diff += (x - y) * (x - y);
        na += x * x;
        nb += y * y;
    }
    let denom = na.max(nb).sqrt().max(scale);
    if denom == 0.0 {
        0.0
    } else {
        diff.sqrt() / denom
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn householder_product_is_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 1..9 {
            let q = random_orthogonal(n, &mut rng);
            assert!(gram_deviation(&q) < 1e-14, "n={n}");
            assert!(gram_deviation(&q.transpose()) < 1e-14, "n={n}");
        }
    }

    #[test]
    fn first_entry_is_symmetric_in_sign() {
        // Haar measure is invariant under sign flips; the (0,0) entry has mean 0
        // and E[q00²] = 1/n.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 4;
        let trials = 20_000;
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in 0..trials {
            let q = random_orthogonal(n, &mut rng);
            s1 += q[(0, 0)];
            s2 += q[(0, 0)] * q[(0, 0)];
        }
        let mean = s1 / trials as f64;
        let second = s2 / trials as f64;
        // sd of q00 is 1/2, so SE of the mean is 0.5/sqrt(trials)
        assert!(mean.abs() < 4.0 * 0.5 / (trials as f64).sqrt(), "mean {mean}");
        assert!((second - 0.25).abs() < 0.01, "second moment {second}");
    }

    #[test]
    fn skew_breaks_orthogonality() {
        let q = DMatrix::<f64>::identity(3, 3);
        assert!(gram_deviation(&skew(&q)) > 1e-3);
    }

    #[test]
    fn scale_floors_cancelling_sums() {
        assert_eq!(scaled_deviation(&[1e-15], &[0.0], 2.0), 5e-16);
        assert_eq!(scaled_deviation(&[1e-15], &[0.0], 0.0), 1.0);
        assert_eq!(scaled_deviation(&[3.0], &[1.0], 1.0), 2.0 / 3.0);
    }

    #[test]
    fn relative_deviation_of_equal_vectors_is_zero() {
        assert_eq!(relative_deviation(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
        assert_eq!(relative_deviation(&[0.0], &[0.0]), 0.0);
        assert!((relative_deviation(&[1.0, 0.0], &[0.0, 0.0]) - 1.0).abs() < 1e-15);
    }
}
