use nalgebra::{DMatrix, DVector};
use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::report::{CheckOutcome, Part};
use super::{CheckSpec, Fault, IntegrandBank, Scenario, Tolerances};
use crate::error::{Error, Result};
use crate::integrator::{
    covariation_integral, energy, ito_general, ito_general_realized, ito_h_in_basis, ito_h_realized, ito_l2lambda,
    ito_seq_realized, realize, series_terms_realized, simple_closed_form_h, simple_closed_form_operator,
    simple_closed_form_seq, sum_terms, GridIntegrand, IntegralPath, Integrand, PathSource, PathView, Sampling, SimpleIntegrand,
};
use crate::linalg::{random_orthogonal, scaled_deviation, skew};
use crate::process::{assemble_levy, transport_levy, GridSpec, LevyPath, SamplePath, Sampler, TimeGrid};
use crate::rng::{stream, Purpose};
use crate::space::{
    build_eigen_isometry, compose_isometry, psi_lambda_apply, random_block_rotations, restrict_bounded_operator,
    build_eigen_isometry_unchecked, BasisIsometry, CovarianceSpec, HSOperator, HVector, SeqH,
};
use crate::stats::accumulate;

/// What a check produced before it is summarized into a report.
#[derive(Debug, Default)]
pub(crate) struct Findings {
    pub parts: Vec<Part>,
    pub notes: Vec<(String, f64)>,
    pub truncation_bound: Option<f64>,
}

impl From<Vec<Part>> for Findings {
    fn from(parts: Vec<Part>) -> Self {
        Findings {
            parts,
            ..Findings::default()
        }
    }
}

/// Per-path outcome of an exact comparison.
#[derive(Debug, Clone, Copy, Default)]
struct Deviation {
    lhs: f64,
    rhs: f64,
    dev: f64,
}

fn deviation(a: &[f64], b: &[f64]) -> Deviation {
    scaled(a, b, 0.0)
}

fn scaled(a: &[f64], b: &[f64], scale: f64) -> Deviation {
    let norm = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>().sqrt();
    Deviation {
        lhs: norm(a),
        rhs: norm(b),
        dev: scaled_deviation(a, b, scale),
    }
}

/// Σ_c Σ_j ‖column j of cell c‖·|ΔM^j_c|: the size of the summands of a
/// layered integral, which bounds its rounding error.
fn summand_scale<'a>(cells: impl Iterator<Item = &'a DMatrix<f64>>, ms: &SamplePath) -> f64 {
    cells
        .enumerate()
        .map(|(c, m)| {
            m.column_iter()
                .enumerate()
                .map(|(j, col)| col.norm() * ms.increments(j)[c].abs())
                .sum::<f64>()
        })
        .sum()
}

fn path_deviation(a: &IntegralPath, b: &IntegralPath) -> Deviation {
    deviation(a.values().as_slice(), b.values().as_slice())
}

/// Paired Monte Carlo comparison: `sample` fills one (lhs, rhs) pair per part.
fn run_statistical<F>(labels: &[String], n_paths: usize, sigmas: f64, sample: F) -> Result<Vec<Part>>
where
    F: Fn(u64, &mut [(f64, f64)]) -> Result<()> + Sync,
{
    let k = labels.len();
    let moments = accumulate(n_paths, 3 * k, |p, out| {
        let mut pairs = vec![(0.0, 0.0); k];
        sample(p, &mut pairs)?;
        for (i, (l, r)) in pairs.into_iter().enumerate() {
            out[3 * i] = l;
            out[3 * i + 1] = r;
            out[3 * i + 2] = l - r;
        }
        Ok(())
    })?;
    Ok(labels
        .iter()
        .enumerate()
        .map(|(i, label)| Part::statistical(label.clone(), &moments[3 * i], &moments[3 * i + 1], &moments[3 * i + 2], sigmas))
        .collect())
}

/// Per-path exact comparison: the worst path per part decides.
fn run_exact<F>(labels: &[String], n_paths: usize, rel_tol: f64, sample: F) -> Result<Vec<Part>>
where
    F: Fn(u64, &mut [Deviation]) -> Result<()> + Sync,
{
    let k = labels.len();
    let per_path = (0..n_paths as u64)
        .into_par_iter()
        .map(|p| {
            let mut out = vec![Deviation::default(); k];
            sample(p, &mut out)?;
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut worst = vec![Deviation::default(); k];
    for row in &per_path {
        for (w, d) in worst.iter_mut().zip(row) {
            let dev = if d.dev.is_nan() { f64::INFINITY } else { d.dev };
            if dev > w.dev {
                *w = Deviation { dev, ..*d };
            }
        }
    }
    Ok(labels
        .iter()
        .zip(worst)
        .map(|(label, w)| Part::exact(label.clone(), w.lhs, w.rhs, w.dev, rel_tol))
        .collect())
}

/// Shared state of one check run.
pub(crate) struct Ctx<'a> {
    pub sc: &'a Scenario,
    pub spec: &'a CheckSpec,
    pub covariance: CovarianceSpec,
    pub sampler: Sampler,
    pub bank: IntegrandBank,
    pub sampling: Sampling,
}

impl<'a> Ctx<'a> {
    pub fn new(sc: &'a Scenario, spec: &'a CheckSpec) -> Self {
        let covariance = if spec.fault == Some(Fault::NonOrthogonalBasis) {
            CovarianceSpec::unchecked(sc.covariance.eigenvalues().to_vec(), skew(sc.covariance.eigenbasis()))
                .with_tail_mass(sc.covariance.tail_mass())
        } else {
            sc.covariance.clone()
        };
        let sampling = if spec.fault == Some(Fault::RightPointSampling) {
            Sampling::Right
        } else {
            Sampling::Left
        };
        Ctx {
            sc,
            spec,
            covariance,
            sampler: sc.sampler(),
            bank: IntegrandBank::new(sc.dim_h, sc.modes, sc.bank_seed),
            sampling,
        }
    }

    fn skewed(&self) -> bool {
        self.spec.fault == Some(Fault::NonOrthogonalBasis)
    }

    fn orthogonal(&self, m: DMatrix<f64>) -> DMatrix<f64> {
        if self.skewed() {
            skew(&m)
        } else {
            m
        }
    }

    fn driver(&self, p: u64) -> Result<SamplePath> {
        self.sampler.sample(self.spec.seed, p)
    }

    fn levy_on(&self, spec: &CovarianceSpec, p: u64) -> Result<LevyPath> {
        assemble_levy(spec, self.driver(p)?)
    }

    fn levy(&self, p: u64) -> Result<LevyPath> {
        self.levy_on(&self.covariance, p)
    }

    fn tol(&self) -> Tolerances {
        self.spec.tolerances
    }

    fn statistical<F>(&self, labels: &[String], sample: F) -> Result<Vec<Part>>
    where
        F: Fn(u64, &mut [(f64, f64)]) -> Result<()> + Sync,
    {
        run_statistical(labels, self.spec.n_paths, self.tol().sigmas, sample)
    }

    fn exact<F>(&self, labels: &[String], sample: F) -> Result<Vec<Part>>
    where
        F: Fn(u64, &mut [Deviation]) -> Result<()> + Sync,
    {
        run_exact(labels, self.spec.n_paths, self.tol().rel_tol, sample)
    }

    /// The covariances the invariance checks run on: the scenario's, and
    /// one with a repeated eigenvalue.
    fn invariance_specs(&self) -> Result<Vec<(String, CovarianceSpec)>> {
        let repeated = self.sc.repeated_covariance()?;
        let repeated = if self.skewed() {
            CovarianceSpec::unchecked(repeated.eigenvalues().to_vec(), skew(repeated.eigenbasis()))
        } else {
            repeated
        };
        Ok(vec![("scenario".into(), self.covariance.clone()), ("repeated".into(), repeated)])
    }

    /// An eigenvalue-compatible isometry with a random target order and
    /// random in-block rotations.
    fn random_isometry(&self, spec: &CovarianceSpec, variant: usize) -> Result<BasisIsometry> {
        let mut rng = stream(self.spec.seed, 0, variant, Purpose::Permutation);
        let mut target = spec.eigenvalues().to_vec();
        target.shuffle(&mut rng);
        let mut rng = stream(self.spec.seed, 0, variant, Purpose::Rotation);
        let rotations: Vec<DMatrix<f64>> = random_block_rotations(spec, &mut rng)
            .into_iter()
            .map(|r| self.orthogonal(r))
            .collect();
        if self.skewed() {
            build_eigen_isometry_unchecked(spec, &target, &rotations)
        } else {
            build_eigen_isometry(spec, &target, &rotations)
        }
    }
}

fn h_energy_pair(x: &GridIntegrand<HVector>, source: PathSource<'_>, j: usize, sampling: Sampling) -> Result<(f64, f64)> {
    let r = realize(Integrand::Grid(x), source, sampling)?;
    let integral = ito_h_realized(&r, source.driver.increments(j), source.driver.grid())?;
    Ok((integral.terminal().norm_squared(), energy(&r, source.driver.grid())?.terminal()))
}

/// Itô isometry for an H-valued integrand against component `j` (0-based):
/// E‖(X•M^j)_T‖² against E∫‖X_s‖² ds.
pub fn isometry_h(
    sampler: &Sampler,
    x: &GridIntegrand<HVector>,
    j: usize,
    n_paths: usize,
    seed: u64,
    sigmas: f64,
) -> Result<Part> {
    let labels = [format!("M{}", j + 1)];
    let mut parts = run_statistical(&labels, n_paths, sigmas, |p, out| {
        let driver = sampler.sample(seed, p)?;
        out[0] = h_energy_pair(x, (&driver).into(), j, Sampling::Left)?;
        Ok(())
    })?;
    Ok(parts.remove(0))
}

pub(crate) fn isometry1(ctx: &Ctx<'_>) -> Result<Findings> {
    let modes = ctx.sc.modes;
    let xs: Vec<_> = (0..modes).map(|j| ctx.bank.h_valued(0, j)).collect();
    let labels: Vec<String> = (1..=modes).map(|j| format!("M{j}")).collect();
    ctx.statistical(&labels, |p, out| {
        let driver = ctx.driver(p)?;
        for (j, x) in xs.iter().enumerate() {
            out[j] = h_energy_pair(x, (&driver).into(), j, ctx.sampling)?;
        }
        Ok(())
    })
    .map(Findings::from)
}

pub(crate) fn isometry2(ctx: &Ctx<'_>) -> Result<Findings> {
    let x = ctx.bank.seq_valued(0);
    ctx.statistical(&["l2(H)".to_string()], |p, out| {
        let driver = ctx.driver(p)?;
        let r = realize(Integrand::Grid(&x), (&driver).into(), ctx.sampling)?;
        let integral = ito_seq_realized(&r, &driver)?;
        out[0] = (integral.terminal().norm_squared(), energy(&r, driver.grid())?.terminal());
        Ok(())
    })
    .map(Findings::from)
}

/// The operator family pushed through Ψ_λ, as an ℓ²(H)-valued integrand.
fn psi_of_operator(ctx: &Ctx<'_>, spec: &CovarianceSpec, variant: u64) -> GridIntegrand<SeqH> {
    let op = ctx.bank.operator_valued(spec, variant);
    let spec = spec.clone();
    GridIntegrand::new(move |view: &PathView<'_>| psi_lambda_apply(&spec, &op.eval(view)).expect("shapes fixed"))
}

pub(crate) fn isometry3(ctx: &Ctx<'_>) -> Result<Findings> {
    let x = psi_of_operator(ctx, &ctx.covariance, 0);
    ctx.statistical(&["l2_lambda".to_string()], |p, out| {
        let l = ctx.levy(p)?;
        let integral = ito_l2lambda(Integrand::Grid(&x), &l, ctx.sampling)?;
        let r = realize(Integrand::Grid(&x), (&l).into(), ctx.sampling)?;
        out[0] = (integral.terminal().norm_squared(), energy(&r, l.grid())?.terminal());
        Ok(())
    })
    .map(Findings::from)
}

pub(crate) fn isometry4(ctx: &Ctx<'_>) -> Result<Findings> {
    let x = ctx.bank.operator_valued(&ctx.covariance, 0);
    ctx.statistical(&["L2_0(H)".to_string()], |p, out| {
        let l = ctx.levy(p)?;
        let r = realize(Integrand::Grid(&x), (&l).into(), ctx.sampling)?;
        let integral = ito_general_realized(&r, &l)?;
        out[0] = (integral.terminal().norm_squared(), energy(&r, l.grid())?.terminal());
        Ok(())
    })
    .map(Findings::from)
}

/// Index pairs j < k probed by the orthogonality check.
fn orthogonality_pairs(modes: usize) -> Vec<(usize, usize)> {
    [(0, 1), (0, 2), (1, 3), (2, 4), (3, 5)]
        .into_iter()
        .filter(|(_, k)| *k < modes)
        .collect()
}

pub(crate) fn orthogonality(ctx: &Ctx<'_>) -> Result<Findings> {
    let pairs = orthogonality_pairs(ctx.sc.modes);
    if pairs.is_empty() {
        return Err(Error::config("space.J", "orthogonality needs at least two modes"));
    }
    let x = ctx.bank.operator_valued(&ctx.covariance, 0);
    let labels: Vec<String> = pairs.iter().map(|(j, k)| format!("xi{}*M{} . xi{}*M{}", j + 1, j + 1, k + 1, k + 1)).collect();
    ctx.statistical(&labels, |p, out| {
        let l = ctx.levy(p)?;
        let r = realize(Integrand::Grid(&x), (&l).into(), ctx.sampling)?;
        let terms = series_terms_realized(&r, &l)?;
        for (slot, (j, k)) in out.iter_mut().zip(&pairs) {
            *slot = (terms[*j].terminal().inner(&terms[*k].terminal()), 0.0);
        }
        Ok(())
    })
    .map(Findings::from)
}

pub(crate) fn series_orthogonality(ctx: &Ctx<'_>) -> Result<Findings> {
    let x = ctx.bank.operator_valued(&ctx.covariance, 0);
    ctx.statistical(&["sum of squared term norms".to_string()], |p, out| {
        let l = ctx.levy(p)?;
        let r = realize(Integrand::Grid(&x), (&l).into(), ctx.sampling)?;
        let terms = series_terms_realized(&r, &l)?;
        let total = ito_general_realized(&r, &l)?;
        let squares: f64 = terms.iter().map(|t| t.terminal().norm_squared()).sum();
        out[0] = (squares, total.terminal().norm_squared());
        Ok(())
    })
    .map(Findings::from)
}

pub(crate) const BASIS_ROTATIONS: usize = 10;

pub(crate) fn basis_invariance(ctx: &Ctx<'_>) -> Result<Findings> {
    let modes = ctx.sc.modes;
    let rotations: Vec<DMatrix<f64>> = (0..BASIS_ROTATIONS)
        .map(|r| {
            let mut rng = stream(ctx.spec.seed, r as u64, 0, Purpose::Rotation);
            ctx.orthogonal(random_orthogonal(ctx.sc.dim_h, &mut rng))
        })
        .collect();
    let xs: Vec<_> = (0..modes).map(|j| ctx.bank.h_valued(0, j)).collect();
    let labels: Vec<String> = (0..BASIS_ROTATIONS)
        .map(|r| format!("rotation{} on M{}", r + 1, r % modes + 1))
        .collect();
    ctx.exact(&labels, |p, out| {
        let driver = ctx.driver(p)?;
        let realized = xs
            .iter()
            .map(|x| realize(Integrand::Grid(x), (&driver).into(), ctx.sampling))
            .collect::<Result<Vec<_>>>()?;
        for (r, rot) in rotations.iter().enumerate() {
            let j = r % modes;
            let direct = ito_h_realized(&realized[j], driver.increments(j), driver.grid())?;
            let rebased = ito_h_in_basis(&realized[j], &driver, j, rot)?;
            out[r] = path_deviation(&direct, &rebased);
        }
        Ok(())
    })
    .map(Findings::from)
}

pub(crate) fn isometry_invariance(ctx: &Ctx<'_>) -> Result<Findings> {
    let specs = ctx.invariance_specs()?;
    let isos = specs
        .iter()
        .enumerate()
        .map(|(i, (_, s))| ctx.random_isometry(s, i))
        .collect::<Result<Vec<_>>>()?;
    let x = ctx.bank.seq_valued(1);
    let labels: Vec<String> = specs.iter().map(|(n, _)| format!("{n} covariance")).collect();
    ctx.exact(&labels, |p, out| {
        let driver = ctx.driver(p)?;
        for (i, ((_, spec), iso)) in specs.iter().zip(&isos).enumerate() {
            let l = assemble_levy(spec, driver.clone())?;
            let direct = ito_l2lambda(Integrand::Grid(&x), &l, ctx.sampling)?;
            let moved_integrand = realize(Integrand::Grid(&x), (&l).into(), ctx.sampling)?.map(|w| iso.apply_seq(w));
            let moved_path = transport_levy(&l, iso)?;
            let image = ito_seq_realized(&moved_integrand, moved_path.driver())?;
            out[i] = path_deviation(&direct, &image);
        }
        Ok(())
    })
    .map(Findings::from)
}

pub(crate) fn well_defined(ctx: &Ctx<'_>) -> Result<Findings> {
    let specs = ctx.invariance_specs()?;
    let mut routes = Vec::new();
    for (i, (_, spec)) in specs.iter().enumerate() {
        let iso = ctx.random_isometry(spec, specs.len() + i)?;
        let (alternate, composed) = if ctx.skewed() {
            let alternate = iso.alternate_decomposition_unchecked();
            let composed = BasisIsometry::composed_unchecked(spec, &alternate, iso.coupling().clone());
            (alternate, composed)
        } else {
            let alternate = iso.alternate_decomposition()?;
            let composed = compose_isometry(spec, &alternate)?;
            (alternate, composed)
        };
        let xa = ctx.bank.operator_valued(spec, 0);
        let xb = ctx.bank.operator_valued(&alternate, 0);
        routes.push((spec.clone(), composed, xa, xb));
    }
    let labels: Vec<String> = specs.iter().map(|(n, _)| format!("{n} covariance")).collect();
    ctx.exact(&labels, |p, out| {
        let driver = ctx.driver(p)?;
        for (i, (spec, composed, xa, xb)) in routes.iter().enumerate() {
            let la = assemble_levy(spec, driver.clone())?;
            let lb = transport_levy(&la, composed)?;
            let a = ito_general(Integrand::Grid(xa), &la, ctx.sampling)?;
            let b = ito_general(Integrand::Grid(xb), &lb, ctx.sampling)?;
            out[i] = path_deviation(&a, &b);
        }
        Ok(())
    })
    .map(Findings::from)
}

/// (i, j) pairs probed by the covariance check, 0-based.
fn covariance_pairs(modes: usize) -> Vec<(usize, usize)> {
    let last = modes - 1;
    let mut pairs = Vec::new();
    for pair in [(0, 0), (0, 1), (1, 1), (last, last), (0, last)] {
        if pair.1 < modes && !pairs.contains(&pair) {
            pairs.push(pair);
        }
    }
    pairs
}

pub(crate) fn covariance_recovery(ctx: &Ctx<'_>) -> Result<Findings> {
    let horizon = ctx.sc.horizon;
    let times = [horizon / 4.0, horizon / 2.0, horizon];
    let pairs = covariance_pairs(ctx.sc.modes);
    let lambda = ctx.covariance.eigenvalues().to_vec();
    let vectors: Vec<DVector<f64>> = (0..ctx.sc.modes).map(|j| ctx.covariance.eigenvector(j)).collect();
    let mut labels = Vec::new();
    let mut cases = Vec::new();
    for &(i, j) in &pairs {
        for &t in &times {
            for &s in &times {
                labels.push(format!("e{} e{} t={t} s={s}", i + 1, j + 1));
                let rhs = if i == j { t.min(s) * lambda[i] } else { 0.0 };
                cases.push((i, j, t, s, rhs));
            }
        }
    }
    ctx.statistical(&labels, |p, out| {
        let l = ctx.levy(p)?;
        let grid = l.grid();
        let nodes = times.iter().map(|t| grid.node_at(*t)).collect::<Result<Vec<_>>>()?;
        let project = |i: usize, t: f64| {
            let n = nodes[times.iter().position(|x| *x == t).unwrap()];
            l.values().column(n).dot(&vectors[i])
        };
        for (slot, (i, j, t, s, rhs)) in out.iter_mut().zip(&cases) {
            *slot = (project(*i, *t) * project(*j, *s), *rhs);
        }
        Ok(())
    })
    .map(Findings::from)
}

pub(crate) fn bracket(ctx: &Ctx<'_>) -> Result<Findings> {
    let modes = ctx.sc.modes;
    let horizon = ctx.sc.horizon;
    let mut labels: Vec<String> = (1..=modes).map(|j| format!("var M{j}")).collect();
    let mut pairs = Vec::new();
    for j in 0..modes {
        for k in j + 1..modes {
            labels.push(format!("cov M{} M{}", j + 1, k + 1));
            pairs.push((j, k));
        }
    }
    ctx.statistical(&labels, |p, out| {
        let d = ctx.driver(p)?;
        for j in 0..modes {
            out[j] = (d.terminal(j) * d.terminal(j), horizon);
        }
        for (slot, (j, k)) in out[modes..].iter_mut().zip(&pairs) {
            *slot = (d.terminal(*j) * d.terminal(*k), 0.0);
        }
        Ok(())
    })
    .map(Findings::from)
}

pub(crate) fn martingale(ctx: &Ctx<'_>) -> Result<Findings> {
    let modes = ctx.sc.modes;
    let horizon = ctx.sc.horizon;
    let (quarter, half) = (horizon / 4.0, horizon / 2.0);
    let qv_modes = modes.min(3);
    let x4 = ctx.bank.operator_valued(&ctx.covariance, 0);
    let xs: Vec<_> = (0..qv_modes).map(|j| ctx.bank.h_valued(0, j)).collect();
    let ys: Vec<_> = (0..qv_modes).map(|j| ctx.bank.h_valued(1, j)).collect();
    let cross: Vec<(usize, usize)> = [(0, 1), (1, 2)].into_iter().filter(|(_, k)| *k < qv_modes).collect();
    let probe = (modes > 1) as usize;

    let mut labels = vec![
        "integral increment vs tanh of first half".to_string(),
        format!("integral increment vs cos M{} at T/4", probe + 1),
        "integral mean".to_string(),
    ];
    for j in 1..=modes {
        labels.push(format!("mean M{j} at T/2"));
        labels.push(format!("mean M{j} at T"));
        labels.push(format!("increment of M{j} vs M{j} at T/2"));
    }
    for j in 1..=qv_modes {
        labels.push(format!("quadratic variation M{j} at T/2"));
        labels.push(format!("quadratic variation M{j} at T"));
    }
    for j in 1..=qv_modes {
        labels.push(format!("covariation X*M{j}, Y*M{j}"));
    }
    for (j, k) in &cross {
        labels.push(format!("covariation X*M{}, Y*M{}", j + 1, k + 1));
    }

    ctx.statistical(&labels, |p, out| {
        let l = ctx.levy(p)?;
        let d = l.driver();
        let grid = l.grid();
        let (nq, nh) = (grid.node_at(quarter)?, grid.node_at(half)?);
        let y = ito_general(Integrand::Grid(&x4), &l, ctx.sampling)?;
        let (y_half, y_end) = (y.value(nh), y.terminal());
        let step = y_end.coords() - y_half.coords();
        let squashed = y_half.coords().map(f64::tanh);
        let mut slot = 0;
        let mut put = |pair: (f64, f64)| {
            out[slot] = pair;
            slot += 1;
        };
        put((step.dot(&squashed), 0.0));
        put((step[0] * d.value(probe, nq).cos(), 0.0));
        put((y_end.coords().sum() / (y_end.dim() as f64).sqrt(), 0.0));
        for j in 0..modes {
            let (mh, mt) = (d.value(j, nh), d.terminal(j));
            put((mh, 0.0));
            put((mt, 0.0));
            put(((mt - mh) * mh, 0.0));
        }
        let mut rx = Vec::with_capacity(qv_modes);
        let mut ix = Vec::with_capacity(qv_modes);
        for (j, x) in xs.iter().enumerate() {
            let r = realize(Integrand::Grid(x), (&l).into(), ctx.sampling)?;
            let integral = ito_h_realized(&r, d.increments(j), grid)?;
            let qv = energy(&r, grid)?;
            put((integral.value(nh).norm_squared(), qv.values()[nh]));
            put((integral.terminal().norm_squared(), qv.terminal()));
            rx.push(r);
            ix.push(integral);
        }
        let mut ry = Vec::with_capacity(qv_modes);
        let mut iy = Vec::with_capacity(qv_modes);
        for (j, yv) in ys.iter().enumerate() {
            let r = realize(Integrand::Grid(yv), (&l).into(), ctx.sampling)?;
            iy.push(ito_h_realized(&r, d.increments(j), grid)?);
            ry.push(r);
        }
        for j in 0..qv_modes {
            let rhs = covariation_integral(&rx[j], &ry[j], grid, j, j)?.terminal();
            put((ix[j].terminal().inner(&iy[j].terminal()), rhs));
        }
        for (j, k) in &cross {
            let rhs = covariation_integral(&rx[*j], &ry[*k], grid, *j, *k)?.terminal();
            put((ix[*j].terminal().inner(&iy[*k].terminal()), rhs));
        }
        Ok(())
    })
    .map(Findings::from)
}

/// Random breakpoints on scheduled nodes: 0 = t_1 < … < t_{n+1} = T.
fn random_breakpoints(grid: &GridSpec, rng: &mut impl Rng) -> Vec<f64> {
    let n = grid.n_scheduled;
    let interior = (n - 1).min(rng.random_range(0..5usize));
    let mut idx: Vec<usize> = index::sample(rng, n - 1, interior).into_iter().map(|i| i + 1).collect();
    idx.sort_unstable();
    let mut out = vec![0.0];
    out.extend(idx.into_iter().map(|i| grid.horizon * i as f64 / n as f64));
    out.push(grid.horizon);
    out
}

fn normals(rng: &mut impl Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// The pathwise worked case: breakpoints (0, 1, 2), X_1 = (1, 0), X_2 = (0, 2),
/// increments (1, −0.5); the closed form gives (1, −1).
fn worked_h(sampling: Sampling) -> Result<Deviation> {
    let grid = TimeGrid::scheduled(&GridSpec::new(2.0, 2)?);
    let path = SamplePath::from_increments(grid, vec![vec![1.0, -0.5]])?;
    let x = SimpleIntegrand::new(
        vec![0.0, 1.0, 2.0],
        vec![HVector::zeros(2), HVector::from_slice(&[1.0, 0.0]), HVector::from_slice(&[0.0, 2.0])],
    )?;
    let layered = crate::integrator::ito_h(Integrand::Simple(&x), &path, 0, sampling)?;
    Ok(deviation(layered.terminal().as_slice(), &[1.0, -1.0]))
}

/// λ = (0.5, 0.25), S e_1^(λ) = 1, S e_2^(λ) = 3, M_T = (1, 2): the terminal
/// is √0.5·1 + √0.25·2·3.
fn worked_general(sampling: Sampling) -> Result<Deviation> {
    let spec = crate::space::make_covariance(vec![0.5, 0.25], crate::space::BasisChoice::Identity)?;
    let grid = TimeGrid::scheduled(&GridSpec::new(1.0, 1)?);
    let l = assemble_levy(&spec, SamplePath::from_increments(grid, vec![vec![1.0], vec![2.0]])?)?;
    let s = restrict_bounded_operator(&spec, &DMatrix::from_row_slice(1, 2, &[1.0, 3.0]))?;
    let x = SimpleIntegrand::constant(1.0, s)?;
    let layered = ito_general(Integrand::Simple(&x), &l, sampling)?;
    Ok(deviation(layered.terminal().as_slice(), &[0.5_f64.sqrt() * 1.0 + 0.25_f64.sqrt() * 2.0 * 3.0]))
}

pub(crate) fn simple_exact(ctx: &Ctx<'_>) -> Result<Findings> {
    let (dim_h, modes) = (ctx.sc.dim_h, ctx.sc.modes);
    let labels: Vec<String> = ["H-valued", "l2(H)-valued", "l2_lambda wrapper", "L(U,H)-valued"]
        .map(String::from)
        .to_vec();
    let mut parts = ctx.exact(&labels, |p, out| {
        let l = ctx.levy(p)?;
        let driver = l.driver();
        let breakpoints = random_breakpoints(&ctx.sampler.grid, &mut stream(ctx.spec.seed, p, 0, Purpose::Breakpoints));
        let n = breakpoints.len();
        let mut rng = stream(ctx.spec.seed, p, 1, Purpose::Integrand);
        let j = (p as usize) % modes;

        let (a1, b1) = (normals(&mut rng, dim_h, n), normals(&mut rng, dim_h, n));
        let x1 = SimpleIntegrand::adapted(breakpoints.clone(), driver.into(), |i, v| {
            HVector::new(a1.column(i) + b1.column(i) * v.driver(j))
        })?;
        let layered = crate::integrator::ito_h(Integrand::Simple(&x1), driver, j, ctx.sampling)?;
        let closed = simple_closed_form_h(&x1, driver, j)?;
        let cells = realize(Integrand::Simple(&x1), driver.into(), Sampling::Left)?;
        let scale: f64 = cells
            .cells()
            .iter()
            .zip(driver.increments(j))
            .map(|(x, dm)| x.norm() * dm.abs())
            .sum();
        out[0] = scaled(layered.terminal().as_slice(), closed.as_slice(), scale);

        let a2: Vec<DMatrix<f64>> = (0..n).map(|_| normals(&mut rng, dim_h, modes)).collect();
        let b2: Vec<DMatrix<f64>> = (0..n).map(|_| normals(&mut rng, dim_h, modes)).collect();
        let x2 = SimpleIntegrand::adapted(breakpoints.clone(), driver.into(), |i, v| {
            let mut m = a2[i].clone();
            for k in 0..modes {
                m.column_mut(k).axpy(v.driver(k), &b2[i].column(k), 1.0);
            }
            SeqH::new(m)
        })?;
        let layered = crate::integrator::ito_seq(Integrand::Simple(&x2), driver, ctx.sampling)?;
        let closed = simple_closed_form_seq(&x2, driver)?;
        let cells = realize(Integrand::Simple(&x2), driver.into(), Sampling::Left)?;
        let scale = summand_scale(cells.cells().iter().map(SeqH::matrix), driver);
        out[1] = scaled(layered.terminal().as_slice(), closed.as_slice(), scale);
        let wrapped = ito_l2lambda(Integrand::Simple(&x2), &l, ctx.sampling)?;
        out[2] = scaled(wrapped.terminal().as_slice(), closed.as_slice(), scale);

        let a4: Vec<DMatrix<f64>> = (0..n).map(|_| normals(&mut rng, dim_h, modes)).collect();
        let b4: Vec<DMatrix<f64>> = (0..n).map(|_| normals(&mut rng, dim_h, modes)).collect();
        let u = normals(&mut rng, modes, 1).column(0).normalize();
        let x4 = SimpleIntegrand::adapted(breakpoints, (&l).into(), |i, v| {
            let lt = v.levy().expect("Lévy view");
            &a4[i] + &b4[i] * lt.dot(&u)
        })?;
        let operator = x4.try_map(|a| HSOperator::from_reference(&ctx.covariance, a))?;
        let layered = ito_general(Integrand::Simple(&operator), &l, ctx.sampling)?;
        let closed = simple_closed_form_operator(&x4, &l)?;
        let cells = realize(Integrand::Simple(&operator), (&l).into(), Sampling::Left)?;
        let scale = summand_scale(cells.cells().iter().map(HSOperator::matrix), driver);
        out[3] = scaled(layered.terminal().as_slice(), closed.as_slice(), scale);
        Ok(())
    })?;
    let tol = ctx.tol().rel_tol;
    let w = worked_h(ctx.sampling)?;
    parts.push(Part::exact("worked H-valued case", w.lhs, w.rhs, w.dev, tol));
    let w = worked_general(ctx.sampling)?;
    parts.push(Part::exact("worked L2_0(H)-valued case", w.lhs, w.rhs, w.dev, tol));
    Ok(parts.into())
}

/// Compares the integral truncated to the first `jsub` modes with the full
/// one: E‖tail_T‖² against the isometry bound E∫Σ_{j>jsub}‖X e_j‖² ds.
#[allow(clippy::too_many_arguments)]
pub fn truncation_report(
    spec: &CovarianceSpec,
    x: Integrand<'_, HSOperator>,
    jsub: usize,
    sampler: &Sampler,
    n_paths: usize,
    seed: u64,
    tolerances: Tolerances,
) -> Result<CheckOutcome> {
    let outcome = truncation_findings(spec, x, jsub, sampler, n_paths, seed, tolerances, Sampling::Left)?;
    let mut o = CheckOutcome::from_parts(
        super::CheckKind::TruncationTail.name(),
        outcome.parts,
        n_paths,
        seed,
        tolerances.rel_tol,
        tolerances.sigmas,
    );
    o.notes = outcome.notes;
    o.report.truncation_bound = outcome.truncation_bound;
    Ok(o)
}

#[allow(clippy::too_many_arguments)]
fn truncation_findings(
    spec: &CovarianceSpec,
    x: Integrand<'_, HSOperator>,
    jsub: usize,
    sampler: &Sampler,
    n_paths: usize,
    seed: u64,
    tolerances: Tolerances,
    sampling: Sampling,
) -> Result<Findings> {
    let modes = spec.modes();
    if jsub == 0 || jsub > modes {
        return Err(Error::IndexOutOfRange { index: jsub, len: modes });
    }
    let labels = [format!("tail beyond mode {jsub}")];
    let sample = |p: u64| -> Result<(f64, f64, f64, f64)> {
        let l = assemble_levy(spec, sampler.sample(seed, p)?)?;
        let r = realize(x, (&l).into(), sampling)?;
        let terms = series_terms_realized(&r, &l)?;
        let order: Vec<usize> = (0..modes).collect();
        let full = sum_terms(&terms, &order)?;
        let tail = if jsub == modes {
            IntegralPath::zeros(l.grid().clone(), full.dim_h())
        } else {
            sum_terms(&terms, &order[jsub..])?
        };
        let tail_cells = r.map(|s| HSOperator::new(s.matrix().columns(jsub, modes - jsub).into_owned()));
        let bound = energy(&tail_cells, l.grid())?.terminal();
        let full_norm = full.terminal().norm();
        let relative = if full_norm == 0.0 { 0.0 } else { tail.terminal().norm() / full_norm };
        let full_sup = full.sup_norm();
        let sup_relative = if full_sup == 0.0 { 0.0 } else { tail.sup_norm() / full_sup };
        Ok((tail.terminal().norm_squared(), bound, relative, sup_relative))
    };
    let samples = (0..n_paths as u64)
        .into_par_iter()
        .map(sample)
        .collect::<Result<Vec<_>>>()?;
    let parts = run_statistical(&labels, n_paths, tolerances.sigmas, |p, out| {
        let s = samples[p as usize];
        out[0] = (s.0, s.1);
        Ok(())
    })?;
    let max_rel = samples.iter().map(|s| s.2).fold(0.0, f64::max);
    let max_sup = samples.iter().map(|s| s.3).fold(0.0, f64::max);
    let bound = parts[0].rhs;
    Ok(Findings {
        parts,
        notes: vec![
            ("max_relative_deviation".into(), max_rel),
            ("max_sup_relative_deviation".into(), max_sup),
        ],
        truncation_bound: Some(bound),
    })
}

pub(crate) fn truncation_tail(ctx: &Ctx<'_>) -> Result<Findings> {
    let modes = ctx.sc.modes;
    if modes < 2 {
        return Err(Error::config("space.J", "truncation needs at least two modes"));
    }
    let jsub = (modes / 2).max(1);
    let constant = HSOperator::from_reference(&ctx.covariance, &ctx.bank.constant_operator(0))?;
    let x = SimpleIntegrand::constant(ctx.sc.horizon, constant)?;
    truncation_findings(
        &ctx.covariance,
        Integrand::Simple(&x),
        jsub,
        &ctx.sampler,
        ctx.spec.n_paths,
        ctx.spec.seed,
        ctx.tol(),
        ctx.sampling,
    )
}
