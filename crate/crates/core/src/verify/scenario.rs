use crate::error::{Error, Result};
use crate::process::{GridSpec, Preset, Sampler, StandardLevySpec};
use crate::space::{BasisChoice, CovarianceSpec, EigenvalueLaw};

/// Everything a check needs besides its own spec.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub dim_h: usize,
    pub modes: usize,
    pub horizon: f64,
    pub n_scheduled: usize,
    pub covariance: CovarianceSpec,
    pub drivers: Vec<StandardLevySpec>,
    /// Default path count for statistical checks.
    pub n_paths: usize,
    pub seed: u64,
    /// Seed of the built-in integrand bank.
    pub bank_seed: u64,
}

/// 0.4 followed by equal pairs that halve: 0.3, 0.3, 0.15, 0.15, …
pub fn repeated_eigenvalues(modes: usize) -> Vec<f64> {
    let mut out = vec![0.4];
    let mut v = 0.3;
    while out.len() < modes {
        out.push(v);
        if out.len() < modes {
            out.push(v);
        }
        v /= 2.0;
    }
    out.truncate(modes);
    out
}

impl Scenario {
    /// dH = 4, J = 6, T = 1, 64 scheduled cells, geometric eigenvalues
    /// 2^-j on a random basis, drivers cycling through the presets, 10⁵ paths.
    pub fn desk_scale() -> Scenario {
        let law = EigenvalueLaw::Geometric {
            c: 1.0,
            r: 0.5,
            modes: 6,
        };
        let covariance = CovarianceSpec::from_law(&law, BasisChoice::Seeded(2024)).expect("valid law");
        let presets = [
            Preset::Brownian,
            Preset::Poisson { a: 0.5 },
            Preset::Mixed {
                sigma: 0.5_f64.sqrt(),
                a: 1.0,
            },
        ];
        let drivers = (0..6)
            .map(|j| StandardLevySpec::from_preset(presets[j % 3]).expect("valid preset"))
            .collect();
        Scenario {
            dim_h: 4,
            modes: 6,
            horizon: 1.0,
            n_scheduled: 64,
            covariance,
            drivers,
            n_paths: 100_000,
            seed: 20_240_601,
            bank_seed: 17,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim_h == 0 {
            return Err(Error::config("space.dH", "must be >= 1"));
        }
        if self.covariance.modes() != self.modes {
            return Err(Error::dims("covariance modes", self.modes, self.covariance.modes()));
        }
        if self.drivers.len() != self.modes {
            return Err(Error::dims("drivers", self.modes, self.drivers.len()));
        }
        GridSpec::new(self.horizon, self.n_scheduled)?;
        Ok(())
    }

    pub fn grid_spec(&self) -> GridSpec {
        GridSpec {
            horizon: self.horizon,
            n_scheduled: self.n_scheduled,
            extra_times: vec![self.horizon / 4.0, self.horizon / 2.0],
        }
    }

    /// Sampler whose grids always contain T/4 and T/2.
    pub fn sampler(&self) -> Sampler {
        Sampler::new(self.drivers.clone(), self.grid_spec())
    }

    /// A covariance with a repeated eigenvalue on a seeded basis, used by the
    /// invariance checks.
    pub fn repeated_covariance(&self) -> Result<CovarianceSpec> {
        crate::space::make_covariance(repeated_eigenvalues(self.modes), BasisChoice::Seeded(self.bank_seed))
    }
}
