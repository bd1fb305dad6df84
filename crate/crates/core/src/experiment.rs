//! Config-driven runs behind the command-line tool.

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::integrator::{ito_seq_realized, realize, series_terms_realized, sum_terms, IntegralPath, Sampling};
use crate::linalg::relative_deviation;
use crate::process::{assemble_levy, project_standard, LevyPath, SamplePath};
use crate::space::psi_lambda_apply;

/// The driver path `path_index` of a config.
pub fn simulate(config: &ExperimentConfig, path_index: u64) -> Result<SamplePath> {
    config.validate()?;
    config.driver_path(path_index)
}

/// Both routes to the general integral on one path.
#[derive(Debug, Clone)]
pub struct IntegrationRun {
    pub levy: LevyPath,
    /// Σ_j (X e_j) • M^j in ascending j.
    pub total: IntegralPath,
    /// The series terms, in mode order.
    pub terms: Vec<IntegralPath>,
    /// Ψ_λ(X) integrated against the standard coordinates recovered from the
    /// U-valued path by projection onto the eigenbasis.
    pub definitional: IntegralPath,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct IntegrationSummary {
    pub seed: u64,
    pub path_index: u64,
    pub terminal: Vec<f64>,
    pub terminal_norm: f64,
    pub sup_norm: f64,
    pub series_terminals: Vec<Vec<f64>>,
    pub definitional_terminal: Vec<f64>,
    /// Relative deviation between the two routes at T.
    pub route_deviation: f64,
}

pub fn integrate(config: &ExperimentConfig, path_index: u64) -> Result<IntegrationRun> {
    config.validate()?;
    let spec = config.covariance_spec()?;
    let x = config.integrand(&spec)?;
    let levy = assemble_levy(&spec, config.driver_path(path_index)?)?;
    let cells = realize(x.as_integrand(), (&levy).into(), Sampling::Left)?;
    let terms = series_terms_realized(&cells, &levy)?;
    let order: Vec<usize> = (0..terms.len()).collect();
    let total = sum_terms(&terms, &order)?;

    let projected = (1..=spec.modes())
        .map(|j| {
            let v = project_standard(&levy, j)?;
            Ok(v.windows(2).map(|w| w[1] - w[0]).collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let coords = SamplePath::from_increments(levy.grid().clone(), projected)?;
    let seq = cells.try_map(|s| psi_lambda_apply(&spec, s))?;
    let definitional = ito_seq_realized(&seq, &coords)?;

    Ok(IntegrationRun {
        levy,
        total,
        terms,
        definitional,
    })
}

impl IntegrationRun {
    pub fn summary(&self, seed: u64, path_index: u64) -> IntegrationSummary {
        let terminal = self.total.terminal();
        let definitional = self.definitional.terminal();
        IntegrationSummary {
            seed,
            path_index,
            terminal: terminal.as_slice().to_vec(),
            terminal_norm: terminal.norm(),
            sup_norm: self.total.sup_norm(),
            series_terminals: self.terms.iter().map(|t| t.terminal().as_slice().to_vec()).collect(),
            definitional_terminal: definitional.as_slice().to_vec(),
            route_deviation: relative_deviation(terminal.as_slice(), definitional.as_slice()),
        }
    }
}
