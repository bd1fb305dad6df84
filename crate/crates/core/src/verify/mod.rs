//! Seeded Monte Carlo estimators and exact-identity checkers that turn the
//! identities of the construction into pass/fail reports.

mod bank;
mod checks;
mod report;
mod scenario;
mod suite;

pub use bank::{IntegrandBank, OperatorCoefficients};
pub use checks::{isometry_h, truncation_report};
pub use report::{render_csv, render_json, CheckOutcome, Part, PartKind, Report};
pub use scenario::{repeated_eigenvalues, Scenario};
pub use suite::{run_check, run_negative_control, run_suite, NegativeControl};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Paths used by per-path exact checks unless overridden.
pub const DEFAULT_EXACT_PATHS: usize = 1000;
/// Randomized simple integrands in the simple-process exactness check.
pub const DEFAULT_SIMPLE_PATHS: usize = 100;

/// The identities the suite can check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    Isometry1,
    Isometry2,
    Isometry3,
    Isometry4,
    Orthogonality,
    BasisInvariance,
    IsometryInvariance,
    WellDefined,
    CovarianceRecovery,
    Bracket,
    Martingale,
    SimpleExact,
    SeriesOrthogonality,
    TruncationTail,
}

impl CheckKind {
    pub const ALL: [CheckKind; 14] = [
        CheckKind::Isometry1,
        CheckKind::Isometry2,
        CheckKind::Isometry3,
        CheckKind::Isometry4,
        CheckKind::Orthogonality,
        CheckKind::BasisInvariance,
        CheckKind::IsometryInvariance,
        CheckKind::WellDefined,
        CheckKind::CovarianceRecovery,
        CheckKind::Bracket,
        CheckKind::Martingale,
        CheckKind::SimpleExact,
        CheckKind::SeriesOrthogonality,
        CheckKind::TruncationTail,
    ];

    /// The default suite, in reporting order.
    pub const DEFAULT_SUITE: [CheckKind; 13] = [
        CheckKind::Isometry1,
        CheckKind::Isometry2,
        CheckKind::Isometry4,
        CheckKind::Orthogonality,
        CheckKind::BasisInvariance,
        CheckKind::IsometryInvariance,
        CheckKind::WellDefined,
        CheckKind::CovarianceRecovery,
        CheckKind::Bracket,
        CheckKind::Martingale,
        CheckKind::SimpleExact,
        CheckKind::SeriesOrthogonality,
        CheckKind::TruncationTail,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CheckKind::Isometry1 => "isometry1",
            CheckKind::Isometry2 => "isometry2",
            CheckKind::Isometry3 => "isometry3",
            CheckKind::Isometry4 => "isometry4",
            CheckKind::Orthogonality => "orthogonality",
            CheckKind::BasisInvariance => "basis_invariance",
            CheckKind::IsometryInvariance => "isometry_invariance",
            CheckKind::WellDefined => "well_defined",
            CheckKind::CovarianceRecovery => "covariance_recovery",
            CheckKind::Bracket => "bracket",
            CheckKind::Martingale => "martingale",
            CheckKind::SimpleExact => "simple_exact",
            CheckKind::SeriesOrthogonality => "series_orthogonality",
            CheckKind::TruncationTail => "truncation_tail",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        CheckKind::ALL
            .iter()
            .copied()
            .find(|k| k.name() == name)
            .ok_or_else(|| Error::UnknownCheck {
                name: name.to_string(),
                valid: CheckKind::ALL.map(CheckKind::name).join(", "),
            })
    }

    /// Statistical checks compare Monte Carlo means; the others compare
    /// per-path values to a relative tolerance.
    pub fn is_statistical(self) -> bool {
        !matches!(
            self,
            CheckKind::BasisInvariance | CheckKind::IsometryInvariance | CheckKind::WellDefined | CheckKind::SimpleExact
        )
    }

    pub fn default_paths(self, statistical_paths: usize) -> usize {
        match self {
            CheckKind::SimpleExact => DEFAULT_SIMPLE_PATHS,
            k if k.is_statistical() => statistical_paths,
            _ => DEFAULT_EXACT_PATHS,
        }
    }
}

impl std::fmt::Display for CheckKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Pass thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Tolerances {
    /// Largest accepted per-path relative deviation for exact checks.
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    /// Largest accepted |lhs − rhs| in standard errors for statistical checks.
    #[serde(default = "default_sigmas")]
    pub sigmas: f64,
}

fn default_rel_tol() -> f64 {
    1e-12
}

fn default_sigmas() -> f64 {
    4.0
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            rel_tol: default_rel_tol(),
            sigmas: default_sigmas(),
        }
    }
}

/// Deliberate implementation faults for negative controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fault {
    /// Sample integrands at the right end of each cell.
    RightPointSampling,
    /// Perturb every orthogonal matrix the check builds, and the covariance
    /// eigenbasis, so that they stop being orthogonal.
    NonOrthogonalBasis,
}

impl Fault {
    pub const ALL: [Fault; 2] = [Fault::RightPointSampling, Fault::NonOrthogonalBasis];

    pub fn name(self) -> &'static str {
        match self {
            Fault::RightPointSampling => "right_point_sampling",
            Fault::NonOrthogonalBasis => "non_orthogonal_basis",
        }
    }
}

/// One check to run.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckSpec {
    pub kind: CheckKind,
    pub n_paths: usize,
    pub seed: u64,
    pub tolerances: Tolerances,
    pub fault: Option<Fault>,
}

impl CheckSpec {
    pub fn new(kind: CheckKind, n_paths: usize, seed: u64) -> Self {
        CheckSpec {
            kind,
            n_paths,
            seed,
            tolerances: Tolerances::default(),
            fault: None,
        }
    }

    /// The check with the scenario's default path count and seed.
    pub fn for_scenario(kind: CheckKind, scenario: &Scenario) -> Self {
        CheckSpec::new(kind, kind.default_paths(scenario.n_paths), scenario.seed)
    }

    pub fn with_fault(mut self, fault: Fault) -> Self {
        self.fault = Some(fault);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let min = if self.kind.is_statistical() { 2 } else { 1 };
        if self.n_paths < min {
            return Err(Error::config(
                "mc.nPaths",
                format!("check `{}` needs at least {min} paths, got {}", self.kind, self.n_paths),
            ));
        }
        if !(self.tolerances.rel_tol >= 0.0) || !(self.tolerances.sigmas > 0.0) {
            return Err(Error::config("checks.tolerances", "relTol must be >= 0 and sigmas > 0"));
        }
        Ok(())
    }
}

/// The default suite for a scenario.
pub fn default_suite(scenario: &Scenario) -> Vec<CheckSpec> {
    CheckKind::DEFAULT_SUITE
        .iter()
        .map(|k| CheckSpec::for_scenario(*k, scenario))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for k in CheckKind::ALL {
            assert_eq!(CheckKind::from_name(k.name()).unwrap(), k);
        }
        match CheckKind::from_name("isometry5") {
            Err(Error::UnknownCheck { valid, .. }) => assert!(valid.contains("truncation_tail")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn statistical_checks_need_two_paths() {
        assert!(CheckSpec::new(CheckKind::Isometry1, 1, 0).validate().is_err());
        assert!(CheckSpec::new(CheckKind::Isometry1, 2, 0).validate().is_ok());
        assert!(CheckSpec::new(CheckKind::SimpleExact, 1, 0).validate().is_ok());
        assert!(CheckSpec::new(CheckKind::SimpleExact, 0, 0).validate().is_err());
    }

    #[test]
    fn default_suite_has_thirteen_checks() {
        let s = Scenario::desk_scale();
        let suite = default_suite(&s);
        assert_eq!(suite.len(), 13);
        assert!(suite.iter().all(|c| c.kind != CheckKind::Isometry3));
        assert_eq!(suite.iter().find(|c| c.kind == CheckKind::SimpleExact).unwrap().n_paths, 100);
    }
}
