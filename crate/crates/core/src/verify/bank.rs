//! Built-in integrands used by the checks. Each is a smooth, bounded-growth
//! function of the observed path, so the identities are exercised with
//! genuinely random, path-dependent integrands.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::integrator::{GridIntegrand, PathView};
use crate::rng::{stream, Purpose};
use crate::space::{CovarianceSpec, HSOperator, HVector, SeqH};

fn normal_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
}

fn unit_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    let v = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let norm = v.norm();
    v / norm
}

/// Coefficients of X_t = A + B⟨L_t, u⟩ + C tanh(2⟨L_t, v⟩) in L(U, H),
/// with matrices acting on reference coordinates of U.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorCoefficients {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub u: DVector<f64>,
    pub v: DVector<f64>,
}

impl OperatorCoefficients {
    pub fn at(&self, l: &DVector<f64>) -> DMatrix<f64> {
        &self.a + &self.b * l.dot(&self.u) + &self.c * (2.0 * l.dot(&self.v)).tanh()
    }
}

/// Seeded integrand families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IntegrandBank {
    pub dim_h: usize,
    pub modes: usize,
    pub seed: u64,
}

impl IntegrandBank {
    pub fn new(dim_h: usize, modes: usize, seed: u64) -> Self {
        IntegrandBank { dim_h, modes, seed }
    }

    fn rng(&self, variant: u64, layer: usize) -> ChaCha8Rng {
        stream(self.seed, variant, layer, Purpose::Integrand)
    }

    /// X_t = a + b M^j_t + c tanh(M^{j'}_t) with j' the next component.
    pub fn h_valued(&self, variant: u64, j: usize) -> GridIntegrand<HVector> {
        let mut rng = self.rng(variant, 16 + j);
        let scale = 1.0 / (self.dim_h as f64).sqrt();
        let coeffs = normal_matrix(&mut rng, self.dim_h, 3, scale);
        let next = (j + 1) % self.modes;
        GridIntegrand::new(move |view: &PathView<'_>| {
            let mut h = coeffs.column(0).into_owned();
            h.axpy(view.driver(j), &coeffs.column(1), 1.0);
            h.axpy(view.driver(next).tanh(), &coeffs.column(2), 1.0);
            HVector::new(h)
        })
    }

    /// Column k: a_k + b_k M^k_t + c_k tanh(M^{k+1}_t), weighted by 1/(k+1).
    pub fn seq_valued(&self, variant: u64) -> GridIntegrand<SeqH> {
        let mut rng = self.rng(variant, 2);
        let scale = 1.0 / (self.dim_h as f64).sqrt();
        let (dim_h, modes) = (self.dim_h, self.modes);
        let coeffs: Vec<DMatrix<f64>> = (0..modes)
            .map(|k| normal_matrix(&mut rng, dim_h, 3, scale / (k + 1) as f64))
            .collect();
        GridIntegrand::new(move |view: &PathView<'_>| {
            let mut m = DMatrix::zeros(dim_h, modes);
            for (k, c) in coeffs.iter().enumerate() {
                let mut col = m.column_mut(k);
                col.copy_from(&c.column(0));
                col.axpy(view.driver(k), &c.column(1), 1.0);
                col.axpy(view.driver((k + 1) % modes).tanh(), &c.column(2), 1.0);
            }
            SeqH::new(m)
        })
    }

    pub fn operator_coefficients(&self, variant: u64) -> OperatorCoefficients {
        let mut rng = self.rng(variant, 4);
        let scale = 1.0 / (self.modes as f64).sqrt();
        OperatorCoefficients {
            a: normal_matrix(&mut rng, self.dim_h, self.modes, scale),
            b: normal_matrix(&mut rng, self.dim_h, self.modes, scale),
            c: normal_matrix(&mut rng, self.dim_h, self.modes, scale),
            u: unit_vector(&mut rng, self.modes),
            v: unit_vector(&mut rng, self.modes),
        }
    }

    /// The operator family restricted to U₀ of `spec`. Reads L from the view,
    /// so it must be realized on a Lévy path.
    pub fn operator_valued(&self, spec: &CovarianceSpec, variant: u64) -> GridIntegrand<HSOperator> {
        let k = self.operator_coefficients(variant);
        // Restriction is linear, so the three coefficient matrices are restricted once.
        let restrict = |m: &DMatrix<f64>| {
            HSOperator::from_reference(spec, m)
                .expect("shapes fixed at construction")
                .matrix()
                .clone()
        };
        let (a, b, c) = (restrict(&k.a), restrict(&k.b), restrict(&k.c));
        let (u, v) = (k.u, k.v);
        GridIntegrand::new(move |view: &PathView<'_>| {
            let l = view.levy().expect("operator integrands need a Lévy path");
            let (s, w) = (l.dot(&u), (2.0 * l.dot(&v)).tanh());
            let mut m = a.clone();
            m.zip_zip_apply(&b, &c, |x, y, z| *x += s * y + w * z);
            HSOperator::new(m)
        })
    }

    /// A constant bounded operator in reference coordinates.
    pub fn constant_operator(&self, variant: u64) -> DMatrix<f64> {
        let mut rng = self.rng(variant, 5);
        normal_matrix(&mut rng, self.dim_h, self.modes, 1.0 / (self.modes as f64).sqrt())
    }
}
