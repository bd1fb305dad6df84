//! Randomized identities checked against independently computed oracles.

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use levy_ito::config::{
    BasisConfig, CheckEntry, CovarianceConfig, DriverConfig, Eigenvalues, McConfig, NamedBasis, OutputConfig,
    ReportFormat, SpaceSection,
};
use levy_ito::integrator::{ito_h_realized, ito_seq_ordered, ito_seq_realized, Realized};
use levy_ito::linalg::{gram_deviation, random_orthogonal, relative_deviation};
use levy_ito::process::GridSpec;
use levy_ito::space::{
    build_eigen_isometry, hs_norm, phi_lambda_apply, phi_lambda_inverse, random_block_rotations, BasisChoice,
    EigenvalueLaw, WeightedSeq,
};
use levy_ito::stats::Moments;
use levy_ito::{make_covariance, CheckKind, ExperimentConfig, HSOperator, HVector, SamplePath, SeqH, TimeGrid};

const TOL: f64 = 1e-12;

fn close(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= TOL * scale.max(1.0)
}

fn eigenvalues(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01_f64..1.0, 1..=max_len)
}

fn matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn phi_lambda_is_an_isometry_onto_weighted_sequences(lambda in eigenvalues(7), seed in any::<u64>()) {
        let spec = make_covariance(lambda.clone(), BasisChoice::Seeded(seed)).unwrap();
        let u = matrix(lambda.len(), 1, seed ^ 1).column(0).into_owned();
        let w = phi_lambda_apply(&spec, &u).unwrap();
        prop_assert!(close(w.norm(), u.norm(), u.norm()));
        let back = phi_lambda_inverse(&spec, &w).unwrap();
        prop_assert!(relative_deviation(back.as_slice(), u.as_slice()) <= TOL);
    }

    #[test]
    fn restricted_operator_norm_matches_trace_formula(
        lambda in eigenvalues(6), dim_h in 1usize..5, seed in any::<u64>()
    ) {
        let spec = make_covariance(lambda.clone(), BasisChoice::Seeded(seed)).unwrap();
        let a = matrix(dim_h, lambda.len(), seed.wrapping_add(7));
        let s = HSOperator::from_reference(&spec, &a).unwrap();
        // ‖A|_{U₀}‖²_HS = tr(A Q Aᵀ) with Q assembled from the spectrum.
        let q = spec.covariance_matrix();
        let oracle = (&a * q * a.transpose()).trace();
        prop_assert!(close(hs_norm(&s).powi(2), oracle, oracle));
    }

    #[test]
    fn polarization_recovers_the_weighted_inner_product(lambda in eigenvalues(8), seed in any::<u64>()) {
        let n = lambda.len();
        let m = matrix(n, 2, seed);
        let (x, y) = (m.column(0).into_owned(), m.column(1).into_owned());
        let xs = WeightedSeq::new(x.clone(), &lambda).unwrap();
        let ys = WeightedSeq::new(y.clone(), &lambda).unwrap();
        let plus = WeightedSeq::new(&x + &y, &lambda).unwrap().norm().powi(2);
        let minus = WeightedSeq::new(&x - &y, &lambda).unwrap().norm().powi(2);
        let direct: f64 = (0..n).map(|j| lambda[j] * x[j] * y[j]).sum();
        prop_assert!(close(xs.inner(&ys), (plus - minus) / 4.0, plus + minus));
        prop_assert!(close(xs.inner(&ys), direct, plus + minus));
    }

    #[test]
    fn random_bases_are_orthonormal(n in 1usize..12, seed in any::<u64>()) {
        let q = random_orthogonal(n, &mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert!(gram_deviation(&q) <= TOL);
        let spec = make_covariance(vec![0.5; n], BasisChoice::Seeded(seed)).unwrap();
        prop_assert!(spec.basis_deviation() <= TOL);
    }

    #[test]
    fn eigen_isometries_respect_eigenvalues_and_commute_with_pairing(
        distinct in prop::collection::vec(0.05_f64..1.0, 1..4),
        repeats in 1usize..3,
        dim_h in 1usize..4,
        seed in any::<u64>(),
    ) {
        // Repeat the first eigenvalue so at least one block has size > 1.
        let mut lambda = distinct.clone();
        for _ in 0..repeats {
            lambda.push(distinct[0]);
        }
        let source = make_covariance(lambda.clone(), BasisChoice::Seeded(seed)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
        let target: Vec<f64> = lambda.iter().rev().copied().collect();
        let iso = build_eigen_isometry(&source, &target, &random_block_rotations(&source, &mut rng)).unwrap();
        let c = iso.coupling();
        for j in 0..lambda.len() {
            for k in 0..lambda.len() {
                if lambda[j] != target[k] {
                    prop_assert_eq!(c[(j, k)], 0.0);
                }
            }
        }
        let v = matrix(lambda.len(), 1, seed ^ 3).column(0).into_owned();
        prop_assert!(close(iso.apply_weighted(&v).norm(), v.norm(), v.norm()));

        let w = SeqH::new(matrix(dim_h, lambda.len(), seed ^ 5));
        let h = HVector::new(matrix(dim_h, 1, seed ^ 9).column(0).into_owned());
        let lhs = iso.apply_seq(&w).pair_with(&h);
        let rhs = iso.apply_weighted(&w.pair_with(&h));
        prop_assert!(relative_deviation(lhs.as_slice(), rhs.as_slice()) <= TOL
            || (&lhs - &rhs).norm() <= TOL);
        prop_assert!(close(iso.apply_seq(&w).norm(), w.norm(), w.norm()));
    }

    #[test]
    fn series_sum_is_order_independent(
        modes in 2usize..7, cells in 1usize..12, dim_h in 1usize..4, seed in any::<u64>(),
        perm_seed in any::<u64>(),
    ) {
        let grid = TimeGrid::scheduled(&GridSpec::new(1.0, cells).unwrap());
        let inc = matrix(modes, cells, seed);
        let path = SamplePath::from_increments(
            grid, (0..modes).map(|j| inc.row(j).iter().copied().collect()).collect()).unwrap();
        let x = Realized::new((0..cells).map(|c| SeqH::new(matrix(dim_h, modes, seed ^ (c as u64 + 1)))).collect());

        let mut order: Vec<usize> = (0..modes).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(perm_seed);
        rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
        let ascending = ito_seq_realized(&x, &path).unwrap();
        let shuffled = ito_seq_ordered(&x, &path, &order).unwrap();

        // Rounding is bounded by the sum of summand magnitudes.
        let scale: f64 = (0..cells).map(|c| (0..modes)
            .map(|j| x.cells()[c].entry(j).norm() * inc[(j, c)].abs()).sum::<f64>()).sum();
        let dev = (ascending.values() - shuffled.values()).abs().max();
        prop_assert!(dev <= TOL * scale.max(1.0), "{} vs scale {}", dev, scale);
    }

    #[test]
    fn h_integral_is_linear_in_the_integrand(
        cells in 1usize..16, dim_h in 1usize..4, a in -3.0f64..3.0, b in -3.0f64..3.0, seed in any::<u64>(),
    ) {
        let grid = TimeGrid::scheduled(&GridSpec::new(2.0, cells).unwrap());
        let inc: Vec<f64> = matrix(1, cells, seed).iter().copied().collect();
        let xm = matrix(dim_h, cells, seed ^ 1);
        let ym = matrix(dim_h, cells, seed ^ 2);
        let cellwise = |m: &DMatrix<f64>| Realized::new((0..cells).map(|c| HVector::new(m.column(c).into_owned())).collect());
        let ix = ito_h_realized(&cellwise(&xm), &inc, &grid).unwrap();
        let iy = ito_h_realized(&cellwise(&ym), &inc, &grid).unwrap();
        let icomb = ito_h_realized(&cellwise(&(&xm * a + &ym * b)), &inc, &grid).unwrap();
        // Oracle: Σ_c X_c ΔM_c summed directly.
        let direct: DVector<f64> = (0..cells).fold(DVector::zeros(dim_h), |acc, c| acc + (xm.column(c) * a + ym.column(c) * b) * inc[c]);
        let combo = ix.terminal().coords() * a + iy.terminal().coords() * b;
        let scale = (xm.abs() * a.abs() + ym.abs() * b.abs()).column_sum().max() * inc.iter().map(|d| d.abs()).sum::<f64>();
        prop_assert!((icomb.terminal().coords() - &combo).norm() <= TOL * scale.max(1.0));
        prop_assert!((icomb.terminal().coords() - &direct).norm() <= TOL * scale.max(1.0));
    }

    #[test]
    fn merged_moments_match_two_pass_statistics(xs in prop::collection::vec(-1e3f64..1e3, 2..300), split in 0usize..300) {
        let split = split.min(xs.len());
        let mut left = Moments::default();
        let mut right = Moments::default();
        xs[..split].iter().for_each(|x| left.push(*x));
        xs[split..].iter().for_each(|x| right.push(*x));
        let m = left.merge(&right);
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        prop_assert_eq!(m.count(), xs.len() as u64);
        prop_assert!((m.mean() - mean).abs() <= 1e-9 * (1.0 + mean.abs()));
        prop_assert!((m.variance() - var).abs() <= 1e-9 * (1.0 + var));
    }
}

fn driver() -> impl Strategy<Value = DriverConfig> {
    prop_oneof![
        Just(DriverConfig::Brownian),
        (0.1f64..2.0).prop_map(|a| DriverConfig::Poisson { a }),
        (0.0f64..0.99, 0.1f64..2.0).prop_map(|(sigma, a)| DriverConfig::Mixed { sigma, a }),
    ]
}

fn config() -> impl Strategy<Value = ExperimentConfig> {
    (
        1usize..6,
        1usize..6,
        0.1f64..10.0,
        1usize..200,
        prop::bool::ANY,
        0u64..i64::MAX as u64,
        prop::collection::vec(driver(), 1..2),
        (1usize..100_000, 0u64..i64::MAX as u64, 0u64..1000),
        prop::collection::vec(0usize..CheckKind::DEFAULT_SUITE.len(), 0..4),
        prop::bool::ANY,
    )
        .prop_map(|(dim_h, modes, horizon, n_scheduled, use_law, seed, drivers, mc, checks, csv)| {
            let eigenvalues = if use_law {
                Eigenvalues::Law(EigenvalueLaw::Geometric { c: 1.5, r: 0.4, modes })
            } else {
                Eigenvalues::List((1..=modes).map(|j| 1.0 / (j * j) as f64).collect())
            };
            ExperimentConfig {
                space: SpaceSection { dim_h, modes, horizon, n_scheduled },
                covariance: CovarianceConfig {
                    eigenvalues,
                    basis: if seed % 2 == 0 { BasisConfig::Seeded { seed } } else { BasisConfig::Named(NamedBasis::Identity) },
                    tail_mass: if use_law { None } else { Some(0.125) },
                },
                drivers,
                path: None,
                integrand: None,
                mc: McConfig { n_paths: mc.0, seed: mc.1, bank_seed: mc.2, path_index: mc.2 / 3, threads: None },
                checks: checks
                    .into_iter()
                    .map(|i| CheckEntry {
                        name: CheckKind::DEFAULT_SUITE[i].name().to_string(),
                        n_paths: Some(10 + i),
                        seed: None,
                        rel_tol: Some(1e-11),
                        sigmas: None,
                    })
                    .collect(),
                output: OutputConfig {
                    path: None,
                    format: if csv { ReportFormat::Csv } else { ReportFormat::Json },
                    record_wall_time: !csv,
                },
            }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn config_round_trips(c in config()) {
        c.validate().unwrap();
        let text = c.to_toml_string().unwrap();
        let parsed = ExperimentConfig::from_toml_str(&text).unwrap();
        prop_assert_eq!(&parsed, &c);
        prop_assert_eq!(parsed.to_toml_string().unwrap(), text);
    }
}
