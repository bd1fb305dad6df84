use nalgebra::{DMatrix, DVector};

use super::path::{Sampler, SamplePath};
use crate::error::{Error, Result};
use crate::space::{BasisIsometry, CovarianceSpec, IsometryKind};
use crate::stats::{accumulate, Estimate};

/// A U-valued Lévy path L_t = Σ_j √λ_j M^j_t e_j^(λ), truncated at J modes.
///
/// The driver holds the standard coordinates (M^j); `values` caches L at
/// every node in reference coordinates of U.
#[derive(Debug, Clone, PartialEq)]
pub struct LevyPath {
    spec: CovarianceSpec,
    driver: SamplePath,
    values: DMatrix<f64>,
}

fn driver_matrix(driver: &SamplePath) -> DMatrix<f64> {
    let nodes = driver.grid().len();
    DMatrix::from_fn(driver.components(), nodes, |j, n| driver.value(j, n))
}

fn spectral_values(spec: &CovarianceSpec, standard: &DMatrix<f64>) -> DMatrix<f64> {
    let mut scaled = standard.clone();
    for (j, s) in spec.sqrt_eigenvalues().iter().enumerate() {
        scaled.row_mut(j).scale_mut(*s);
    }
    if spec.has_identity_basis() {
        scaled
    } else {
        spec.eigenbasis() * scaled
    }
}

pub fn assemble_levy(spec: &CovarianceSpec, driver: SamplePath) -> Result<LevyPath> {
    if driver.components() != spec.modes() {
        return Err(Error::dims("driver components", spec.modes(), driver.components()));
    }
    let values = spectral_values(spec, &driver_matrix(&driver));
    Ok(LevyPath {
        spec: spec.clone(),
        driver,
        values,
    })
}

impl LevyPath {
    pub fn spec(&self) -> &CovarianceSpec {
        &self.spec
    }

    /// The standard coordinates (M^j), which are also the ℓ²_λ coordinates Φ_λ(L).
    pub fn driver(&self) -> &SamplePath {
        &self.driver
    }

    pub fn grid(&self) -> &crate::process::TimeGrid {
        self.driver.grid()
    }

    /// L at every node: column `n` is L_{t_n} in reference coordinates of U.
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn value(&self, node: usize) -> DVector<f64> {
        self.values.column(node).into_owned()
    }

    pub fn terminal(&self) -> DVector<f64> {
        self.value(self.values.ncols() - 1)
    }

    /// L_{t_{n+1}} − L_{t_n} for cell `n`.
    pub fn increment(&self, cell: usize) -> DVector<f64> {
        self.values.column(cell + 1) - self.values.column(cell)
    }

    /// Writes the columnar dump of L in reference coordinates of U.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let rows: Vec<Vec<f64>> = self.values.row_iter().map(|r| r.iter().copied().collect()).collect();
        let names: Vec<String> = (1..=rows.len()).map(|j| format!("L{j}")).collect();
        let columns: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        super::write_columnar(out, self.grid(), &names, &columns)
    }
}

/// λ_j^(−1/2) ⟨L_t, e_j^(λ)⟩_U at every node, for 1-based `j`.
pub fn project_standard(l: &LevyPath, j: usize) -> Result<Vec<f64>> {
    let modes = l.spec.modes();
    if j == 0 || j > modes {
        return Err(Error::IndexOutOfRange { index: j, len: modes });
    }
    let e = l.spec.eigenvector(j - 1);
    let s = l.spec.sqrt_eigenvalues()[j - 1];
    Ok(l.values.column_iter().map(|col| col.dot(&e) / s).collect())
}

fn same_spec(a: &CovarianceSpec, b: &CovarianceSpec) -> bool {
    a.eigenvalues() == b.eigenvalues() && a.eigenbasis() == b.eigenbasis()
}

/// The image Φ(L) of a path under an isometry whose source is L's spec.
///
/// For a composed isometry between two decompositions of the same Q the
/// process itself is unchanged and only its standard coordinates move.
pub fn transport_levy(l: &LevyPath, iso: &BasisIsometry) -> Result<LevyPath> {
    if !same_spec(l.spec(), iso.source()) {
        return Err(Error::SpecMismatch("isometry source differs from the path's covariance".into()));
    }
    let c = iso.coupling();
    let d = &l.driver;
    let modes = c.ncols();
    let cells = d.grid().cells();
    let mut increments = vec![vec![0.0; cells]; modes];
    let mut dm = DVector::zeros(d.components());
    for cell in 0..cells {
        for j in 0..d.components() {
            dm[j] = d.increments(j)[cell];
        }
        let dn = c.tr_mul(&dm);
        for k in 0..modes {
            increments[k][cell] = dn[k];
        }
    }
    let mut jump_log = vec![Vec::new(); modes];
    for j in 0..d.components() {
        for &(t, size) in d.jump_log(j) {
            for (k, log) in jump_log.iter_mut().enumerate() {
                if c[(j, k)] != 0.0 {
                    log.push((t, c[(j, k)] * size));
                }
            }
        }
    }
    for log in &mut jump_log {
        log.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    let driver = SamplePath::with_jumps(d.grid().clone(), increments, Some(jump_log))?;
    let values = match iso.kind() {
        IsometryKind::Composed => l.values.clone(),
        _ => spectral_values(iso.target(), &driver_matrix(&driver)),
    };
    Ok(LevyPath {
        spec: iso.target().clone(),
        driver,
        values,
    })
}

/// Monte Carlo estimate of E[⟨L_t, u1⟩⟨L_s, u2⟩] with its standard error.
#[allow(clippy::too_many_arguments)]
pub fn empirical_covariance(
    spec: &CovarianceSpec,
    sampler: &Sampler,
    u1: &DVector<f64>,
    u2: &DVector<f64>,
    t: f64,
    s: f64,
    n_paths: usize,
    seed: u64,
) -> Result<Estimate> {
    let modes = spec.modes();
    for u in [u1, u2] {
        if u.len() != modes {
            return Err(Error::dims("U vector", modes, u.len()));
        }
    }
    let horizon = sampler.grid.horizon;
    for time in [t, s] {
        if !(0.0..=horizon).contains(&time) {
            return Err(Error::GridMismatch { time });
        }
    }
    if sampler.drivers.len() != modes {
        return Err(Error::dims("driver components", modes, sampler.drivers.len()));
    }
    let sampler = sampler.with_extra_times(&[t, s]);
    let moments = accumulate(n_paths, 1, |p, out| {
        let l = assemble_levy(spec, sampler.sample(seed, p)?)?;
        let nt = l.grid().node_at(t)?;
        let ns = l.grid().node_at(s)?;
        out[0] = l.values.column(nt).dot(u1) * l.values.column(ns).dot(u2);
        Ok(())
    })?;
    Ok(moments[0].into())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::{GridSpec, StandardLevySpec, TimeGrid};
    use crate::space::{build_eigen_isometry, make_covariance, BasisChoice};

    fn fixed_driver(terminals: &[f64]) -> SamplePath {
        let grid = TimeGrid::scheduled(&GridSpec::new(1.0, 1).unwrap());
        SamplePath::from_increments(grid, terminals.iter().map(|x| vec![*x]).collect()).unwrap()
    }

    #[test]
    fn hand_assembly() {
        let spec = make_covariance(vec![0.5, 0.25], BasisChoice::Identity).unwrap();
        let l = assemble_levy(&spec, fixed_driver(&[1.0, 2.0])).unwrap();
        let lt = l.terminal();
        assert!((lt[0] - 0.5_f64.sqrt()).abs() < 1e-15);
        assert!((lt[1] - 1.0).abs() < 1e-15);
        assert_eq!(l.value(0), DVector::zeros(2));
    }

    #[test]
    fn single_mode_equals_driver() {
        let spec = make_covariance(vec![1.0], BasisChoice::Identity).unwrap();
        let l = assemble_levy(&spec, fixed_driver(&[0.7])).unwrap();
        assert_eq!(l.terminal()[0], 0.7);
    }

    #[test]
    fn projection_round_trip_with_random_basis() {
        let spec = make_covariance(vec![0.4, 0.2, 0.1], BasisChoice::Seeded(11)).unwrap();
        let sampler = Sampler::new(vec![StandardLevySpec::brownian(); 3], GridSpec::new(1.0, 8).unwrap());
        let l = assemble_levy(&spec, sampler.sample(3, 0).unwrap()).unwrap();
        for j in 1..=3 {
            let p = project_standard(&l, j).unwrap();
            for (a, b) in p.iter().zip(l.driver().values(j - 1)) {
                assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
            }
        }
        assert!(matches!(project_standard(&l, 0), Err(Error::IndexOutOfRange { .. })));
        assert!(matches!(project_standard(&l, 4), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn zero_driver_projects_to_zero() {
        let spec = make_covariance(vec![0.5, 0.25], BasisChoice::Seeded(2)).unwrap();
        let grid = TimeGrid::scheduled(&GridSpec::new(1.0, 4).unwrap());
        let l = assemble_levy(&spec, SamplePath::zero(grid, 2)).unwrap();
        assert!(project_standard(&l, 2).unwrap().iter().all(|x| *x == 0.0));
    }

    #[test]
    fn assembly_checks_dimensions() {
        let spec = make_covariance(vec![0.5, 0.25], BasisChoice::Identity).unwrap();
        assert!(assemble_levy(&spec, fixed_driver(&[1.0])).is_err());
    }

    #[test]
    fn swap_transport_swaps_components() {
        let spec = make_covariance(vec![0.5, 0.5], BasisChoice::Identity).unwrap();
        let swap = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let iso = build_eigen_isometry(&spec, &[0.5, 0.5], &[swap]).unwrap();
        let sampler = Sampler::new(vec![StandardLevySpec::brownian(); 2], GridSpec::new(1.0, 8).unwrap());
        let l = assemble_levy(&spec, sampler.sample(1, 0).unwrap()).unwrap();
        let moved = transport_levy(&l, &iso).unwrap();
        assert_eq!(moved.driver().values(0), l.driver().values(1));
        assert_eq!(moved.driver().values(1), l.driver().values(0));
        assert!((moved.terminal().norm() - l.terminal().norm()).abs() < 1e-12);
    }

    #[test]
    fn identity_transport_is_noop() {
        let spec = make_covariance(vec![0.5, 0.3], BasisChoice::Seeded(4)).unwrap();
        let sampler = Sampler::new(vec![StandardLevySpec::brownian(); 2], GridSpec::new(1.0, 8).unwrap());
        let l = assemble_levy(&spec, sampler.sample(1, 0).unwrap()).unwrap();
        let same = transport_levy(&l, &BasisIsometry::identity(&spec)).unwrap();
        assert_eq!(same.driver().values(0), l.driver().values(0));
        assert_eq!(same.values(), l.values());

        let other = make_covariance(vec![0.5, 0.3], BasisChoice::Identity).unwrap();
        assert!(transport_levy(&l, &BasisIsometry::identity(&other)).is_err());
    }

    #[test]
    fn covariance_at_time_zero_is_exact() {
        let spec = make_covariance(vec![0.5], BasisChoice::Identity).unwrap();
        let sampler = Sampler::new(vec![StandardLevySpec::brownian()], GridSpec::new(1.0, 4).unwrap());
        let u = DVector::from_element(1, 1.0);
        let est = empirical_covariance(&spec, &sampler, &u, &u, 0.0, 0.5, 50, 1).unwrap();
        assert_eq!((est.estimate, est.se), (0.0, 0.0));
    }
}
