//! Declarative experiment configuration (TOML).
//!
//! A config fixes everything a run depends on: spaces, covariance, drivers,
//! an optional integrand, Monte Carlo seeds and the checks to run. Keys are
//! camelCase; every validation error names the offending key.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::{GridIntegrand, Integrand, SimpleIntegrand};
use crate::process::{
    make_standard_specs, DriverRecipe, GridSpec, Jump, Preset, SamplePath, Sampler, StandardLevySpec, TimeGrid,
};
use crate::space::{make_covariance, BasisChoice, CovarianceSpec, EigenvalueLaw, HSOperator};
use crate::verify::{CheckKind, CheckSpec, IntegrandBank, Scenario, Tolerances};

/// Environment variable that redirects relative output paths.
pub const OUT_DIR_ENV: &str = "LEVY_ITO_OUT_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct ExperimentConfig {
    pub space: SpaceSection,
    pub covariance: CovarianceConfig,
    /// One entry broadcasts to every mode; otherwise one entry per mode.
    #[serde(default = "default_drivers")]
    pub drivers: Vec<DriverConfig>,
    /// Explicit driver increments, used instead of simulation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<FixedPath>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub integrand: Option<IntegrandConfig>,
    pub mc: McConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub checks: Vec<CheckEntry>,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_drivers() -> Vec<DriverConfig> {
    vec![DriverConfig::Brownian]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct SpaceSection {
    #[serde(rename = "dH")]
    pub dim_h: usize,
    #[serde(rename = "J")]
    pub modes: usize,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub n_scheduled: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct CovarianceConfig {
    pub eigenvalues: Eigenvalues,
    #[serde(default)]
    pub basis: BasisConfig,
    /// Σ_{j>J} λ_j of the untruncated operator. Laws compute their own.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_mass: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Eigenvalues {
    List(Vec<f64>),
    Law(EigenvalueLaw),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NamedBasis {
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BasisConfig {
    Named(NamedBasis),
    Seeded { seed: u64 },
}

impl Default for BasisConfig {
    fn default() -> Self {
        BasisConfig::Named(NamedBasis::Identity)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "lowercase", deny_unknown_fields)]
pub enum DriverConfig {
    Brownian,
    Poisson {
        a: f64,
    },
    Mixed {
        sigma: f64,
        a: f64,
    },
    Explicit {
        sigma: f64,
        #[serde(default)]
        jumps: Vec<Jump>,
    },
}

impl DriverConfig {
    fn recipe(&self) -> DriverRecipe {
        match *self {
            DriverConfig::Brownian => DriverRecipe::Preset(Preset::Brownian),
            DriverConfig::Poisson { a } => DriverRecipe::Preset(Preset::Poisson { a }),
            DriverConfig::Mixed { sigma, a } => DriverRecipe::Preset(Preset::Mixed { sigma, a }),
            DriverConfig::Explicit { sigma, ref jumps } => DriverRecipe::Explicit {
                sigma,
                jumps: jumps.clone(),
            },
        }
    }
}

/// Driver increments per mode, one per scheduled cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedPath {
    pub increments: Vec<Vec<f64>>,
}

/// An L(U, H)-valued integrand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
pub enum IntegrandConfig {
    /// Deterministic step operator: `values[i]` acts on (t_i, t_{i+1}] and is
    /// a `dH × J` matrix (row-major, one inner list per H coordinate) in
    /// reference coordinates of U.
    Simple {
        breakpoints: Vec<f64>,
        values: Vec<Vec<Vec<f64>>>,
    },
    /// A named left-point evaluator.
    Grid {
        evaluator: Evaluator,
        #[serde(default)]
        variant: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Evaluator {
    Zero,
    /// The path-dependent operator of the built-in integrand bank.
    Bank,
    /// The constant operator of the built-in integrand bank.
    Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct McConfig {
    pub n_paths: usize,
    pub seed: u64,
    #[serde(default = "default_bank_seed")]
    pub bank_seed: u64,
    /// Path index written by `simulate` and `integrate`.
    #[serde(default)]
    pub path_index: u64,
    /// Worker threads; defaults to the available parallelism.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

fn default_bank_seed() -> u64 {
    17
}

/// A check with optional overrides of the `mc` defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct CheckEntry {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_paths: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rel_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigmas: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub format: ReportFormat,
    /// When false, reports carry wallTime 0 so that files are byte-stable.
    #[serde(default = "yes")]
    pub record_wall_time: bool,
}

fn yes() -> bool {
    true
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            path: None,
            format: ReportFormat::Json,
            record_wall_time: true,
        }
    }
}

/// Best-effort dotted key for a parse error: the table header in force at
/// the error position plus the key on that line.
fn key_at(source: &str, offset: usize) -> Option<String> {
    let before = &source[..offset.min(source.len())];
    let line_start = before.rfind('\n').map_or(0, |i| i + 1);
    let line_end = source[line_start..].find('\n').map_or(source.len(), |i| line_start + i);
    let line = source[line_start..line_end].trim();
    let table = before[..line_start]
        .lines()
        .rev()
        .map(str::trim)
        .find(|l| l.starts_with('['))
        .map(|l| l.trim_matches(|c| c == '[' || c == ']').to_string());
    let key = line.split_once('=').map(|(k, _)| k.trim().to_string());
    match (table, key) {
        (Some(t), Some(k)) => Some(format!("{t}.{k}")),
        (None, Some(k)) => Some(k),
        (Some(t), None) => Some(t),
        (None, None) => None,
    }
}

impl ExperimentConfig {
    /// Parses and validates a TOML document.
    pub fn from_toml_str(source: &str) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(source).map_err(|e| {
            let key = e
                .span()
                .and_then(|s| key_at(source, s.start))
                .unwrap_or_else(|| "<document>".to_string());
            Error::config(key, e.message().to_string())
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let source = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::ConfigNotFound(path.to_path_buf()),
            _ => Error::from(e),
        })?;
        Self::from_toml_str(&source)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config("<document>", e.to_string()))
    }

    /// The desk-scale experiment, equivalent to [`Scenario::desk_scale`].
    pub fn desk_scale() -> Self {
        let sc = Scenario::desk_scale();
        let cycle = [
            DriverConfig::Brownian,
            DriverConfig::Poisson { a: 0.5 },
            DriverConfig::Mixed {
                sigma: 0.5_f64.sqrt(),
                a: 1.0,
            },
        ];
        ExperimentConfig {
            space: SpaceSection {
                dim_h: sc.dim_h,
                modes: sc.modes,
                horizon: sc.horizon,
                n_scheduled: sc.n_scheduled,
            },
            covariance: CovarianceConfig {
                eigenvalues: Eigenvalues::Law(EigenvalueLaw::Geometric {
                    c: 1.0,
                    r: 0.5,
                    modes: sc.modes,
                }),
                basis: BasisConfig::Seeded { seed: 2024 },
                tail_mass: None,
            },
            drivers: (0..sc.modes).map(|j| cycle[j % 3].clone()).collect(),
            path: None,
            integrand: None,
            mc: McConfig {
                n_paths: sc.n_paths,
                seed: sc.seed,
                bank_seed: sc.bank_seed,
                path_index: 0,
                threads: None,
            },
            checks: CheckKind::DEFAULT_SUITE
                .iter()
                .map(|k| CheckEntry {
                    name: k.name().to_string(),
                    n_paths: None,
                    seed: None,
                    rel_tol: None,
                    sigmas: None,
                })
                .collect(),
            output: OutputConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.space;
        if s.dim_h == 0 {
            return Err(Error::config("space.dH", "must be >= 1"));
        }
        if s.modes == 0 {
            return Err(Error::config("space.J", "must be >= 1"));
        }
        if !(s.horizon > 0.0) || !s.horizon.is_finite() {
            return Err(Error::config("space.T", "must be finite and > 0"));
        }
        if s.n_scheduled == 0 {
            return Err(Error::config("space.nScheduled", "must be >= 1"));
        }
        let covariance_modes = match &self.covariance.eigenvalues {
            Eigenvalues::List(v) => v.len(),
            Eigenvalues::Law(law) => law.modes(),
        };
        if covariance_modes != s.modes {
            return Err(Error::config(
                "covariance.eigenvalues",
                format!("{covariance_modes} eigenvalues for J = {}", s.modes),
            ));
        }
        if let Some(t) = self.covariance.tail_mass {
            if !(t >= 0.0) || !t.is_finite() {
                return Err(Error::config("covariance.tailMass", "must be finite and >= 0"));
            }
        }
        self.covariance_spec()?;
        if self.drivers.len() != 1 && self.drivers.len() != s.modes {
            return Err(Error::config(
                "drivers",
                format!("expected 1 or {} entries, found {}", s.modes, self.drivers.len()),
            ));
        }
        for (i, d) in self.drivers.iter().enumerate() {
            make_standard_specs(1, &[d.recipe()]).map_err(|e| Error::config(format!("drivers[{i}]"), e.to_string()))?;
        }
        if let Some(p) = &self.path {
            if p.increments.len() != s.modes {
                return Err(Error::config(
                    "path.increments",
                    format!("expected {} rows, found {}", s.modes, p.increments.len()),
                ));
            }
            for (j, row) in p.increments.iter().enumerate() {
                if row.len() != s.n_scheduled {
                    return Err(Error::config(
                        format!("path.increments[{j}]"),
                        format!("expected {} cells, found {}", s.n_scheduled, row.len()),
                    ));
                }
                if row.iter().any(|x| !x.is_finite()) {
                    return Err(Error::config(format!("path.increments[{j}]"), "entries must be finite"));
                }
            }
        }
        if let Some(IntegrandConfig::Simple { breakpoints, values }) = &self.integrand {
            self.validate_simple(breakpoints, values)?;
        }
        if self.mc.n_paths == 0 {
            return Err(Error::config("mc.nPaths", "must be >= 1"));
        }
        if self.mc.threads == Some(0) {
            return Err(Error::config("mc.threads", "must be >= 1"));
        }
        for (i, c) in self.checks.iter().enumerate() {
            CheckKind::from_name(&c.name)?;
            if let Some(t) = c.rel_tol {
                if !(t >= 0.0) {
                    return Err(Error::config(format!("checks[{i}].relTol"), "must be >= 0"));
                }
            }
            if let Some(t) = c.sigmas {
                if !(t > 0.0) {
                    return Err(Error::config(format!("checks[{i}].sigmas"), "must be > 0"));
                }
            }
        }
        Ok(())
    }

    fn validate_simple(&self, breakpoints: &[f64], values: &[Vec<Vec<f64>>]) -> Result<()> {
        let s = &self.space;
        if breakpoints.len() < 2 || breakpoints[0] != 0.0 || *breakpoints.last().unwrap_or(&0.0) != s.horizon {
            return Err(Error::config("integrand.breakpoints", "must start at 0 and end at T"));
        }
        if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::config("integrand.breakpoints", "must be strictly increasing"));
        }
        if values.len() + 1 != breakpoints.len() {
            return Err(Error::config(
                "integrand.values",
                format!("expected {} matrices, found {}", breakpoints.len() - 1, values.len()),
            ));
        }
        for (i, m) in values.iter().enumerate() {
            let shape_ok = m.len() == s.dim_h && m.iter().all(|row| row.len() == s.modes);
            if !shape_ok {
                return Err(Error::config(
                    format!("integrand.values[{i}]"),
                    format!("expected a {} x {} matrix", s.dim_h, s.modes),
                ));
            }
            if m.iter().flatten().any(|x| !x.is_finite()) {
                return Err(Error::config(format!("integrand.values[{i}]"), "entries must be finite"));
            }
        }
        Ok(())
    }

    pub fn covariance_spec(&self) -> Result<CovarianceSpec> {
        let basis = match self.covariance.basis {
            BasisConfig::Named(NamedBasis::Identity) => BasisChoice::Identity,
            BasisConfig::Seeded { seed } => BasisChoice::Seeded(seed),
        };
        let spec = match &self.covariance.eigenvalues {
            Eigenvalues::List(v) => make_covariance(v.clone(), basis),
            Eigenvalues::Law(law) => CovarianceSpec::from_law(law, basis),
        }
        .map_err(|e| match e {
            Error::ConfigInvalid { .. } => e,
            other => Error::config("covariance.eigenvalues", other.to_string()),
        })?;
        Ok(match self.covariance.tail_mass {
            Some(t) => spec.with_tail_mass(t),
            None => spec,
        })
    }

    pub fn driver_specs(&self) -> Result<Vec<StandardLevySpec>> {
        let recipes: Vec<DriverRecipe> = self.drivers.iter().map(DriverConfig::recipe).collect();
        make_standard_specs(self.space.modes, &recipes).map_err(|e| Error::config("drivers", e.to_string()))
    }

    /// The scheduled grid plus any interior integrand breakpoints.
    pub fn grid_spec(&self) -> Result<GridSpec> {
        let grid = GridSpec::new(self.space.horizon, self.space.n_scheduled)?;
        Ok(match &self.integrand {
            Some(IntegrandConfig::Simple { breakpoints, .. }) => grid.with_extra_times(breakpoints),
            _ => grid,
        })
    }

    pub fn scenario(&self) -> Result<Scenario> {
        let scenario = Scenario {
            dim_h: self.space.dim_h,
            modes: self.space.modes,
            horizon: self.space.horizon,
            n_scheduled: self.space.n_scheduled,
            covariance: self.covariance_spec()?,
            drivers: self.driver_specs()?,
            n_paths: self.mc.n_paths,
            seed: self.mc.seed,
            bank_seed: self.mc.bank_seed,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    /// The configured checks, or the default suite when none are listed.
    pub fn check_specs(&self) -> Result<Vec<CheckSpec>> {
        let scenario = self.scenario()?;
        if self.checks.is_empty() {
            return Ok(crate::verify::default_suite(&scenario));
        }
        self.checks
            .iter()
            .map(|c| {
                let mut spec = CheckSpec::for_scenario(CheckKind::from_name(&c.name)?, &scenario);
                if let Some(n) = c.n_paths {
                    spec.n_paths = n;
                }
                if let Some(s) = c.seed {
                    spec.seed = s;
                }
                let defaults = Tolerances::default();
                spec.tolerances = Tolerances {
                    rel_tol: c.rel_tol.unwrap_or(defaults.rel_tol),
                    sigmas: c.sigmas.unwrap_or(defaults.sigmas),
                };
                Ok(spec)
            })
            .collect()
    }

    /// The driver path for `path_index`: the fixed path if one is given,
    /// otherwise a seeded simulation on [`Self::grid_spec`].
    pub fn driver_path(&self, path_index: u64) -> Result<SamplePath> {
        let grid = self.grid_spec()?;
        match &self.path {
            Some(fixed) => {
                let scheduled = GridSpec::new(self.space.horizon, self.space.n_scheduled)?;
                let path = SamplePath::from_increments(TimeGrid::scheduled(&scheduled), fixed.increments.clone())?;
                if grid.scheduled_times().len() != scheduled.scheduled_times().len() {
                    return Err(Error::config(
                        "integrand.breakpoints",
                        "with a fixed path every breakpoint must be a scheduled node",
                    ));
                }
                Ok(path)
            }
            None => Sampler::new(self.driver_specs()?, grid).sample(self.mc.seed, path_index),
        }
    }

    pub fn integrand(&self, spec: &CovarianceSpec) -> Result<ConfiguredIntegrand> {
        let (dim_h, modes) = (self.space.dim_h, self.space.modes);
        match &self.integrand {
            None => Err(Error::config("integrand", "this command needs an integrand section")),
            Some(IntegrandConfig::Simple { breakpoints, values }) => {
                let ops = values
                    .iter()
                    .map(|m| {
                        let flat: Vec<f64> = m.iter().flatten().copied().collect();
                        HSOperator::from_reference(spec, &DMatrix::from_row_slice(dim_h, modes, &flat))
                    })
                    .collect::<Result<Vec<_>>>()?;
                let mut cells = Vec::with_capacity(ops.len() + 1);
                cells.push(ops[0].clone());
                cells.extend(ops);
                Ok(ConfiguredIntegrand::Simple(SimpleIntegrand::new(breakpoints.clone(), cells)?))
            }
            Some(IntegrandConfig::Grid { evaluator, variant }) => {
                let bank = IntegrandBank::new(dim_h, modes, self.mc.bank_seed);
                Ok(ConfiguredIntegrand::Grid(match evaluator {
                    Evaluator::Zero => GridIntegrand::new(move |_: &_| HSOperator::zeros(dim_h, modes)),
                    Evaluator::Bank => bank.operator_valued(spec, *variant),
                    Evaluator::Constant => {
                        let op = HSOperator::from_reference(spec, &bank.constant_operator(*variant))?;
                        GridIntegrand::new(move |_: &_| op.clone())
                    }
                }))
            }
        }
    }
}

/// An owned operator-valued integrand built from a config.
pub enum ConfiguredIntegrand {
    Simple(SimpleIntegrand<HSOperator>),
    Grid(GridIntegrand<HSOperator>),
}

impl ConfiguredIntegrand {
    pub fn as_integrand(&self) -> Integrand<'_, HSOperator> {
        match self {
            ConfiguredIntegrand::Simple(x) => Integrand::Simple(x),
            ConfiguredIntegrand::Grid(x) => Integrand::Grid(x),
        }
    }
}

/// Where an output file goes: relative paths move under `out_dir` if given.
pub fn resolve_output(path: &Path, out_dir: Option<&Path>) -> PathBuf {
    match out_dir {
        Some(dir) if path.is_relative() => dir.join(path),
        _ => path.to_path_buf(),
    }
}

/// [`resolve_output`] with the directory taken from [`OUT_DIR_ENV`].
pub fn resolve_output_from_env(path: &Path) -> PathBuf {
    let dir = std::env::var_os(OUT_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from);
    resolve_output(path, dir.as_deref())
}
