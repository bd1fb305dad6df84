use std::time::Instant;

use super::checks::{self, Ctx, Findings};
use super::report::CheckOutcome;
use super::{CheckKind, CheckSpec, Fault, Scenario};
use crate::error::{Error, Result};

fn dispatch(ctx: &Ctx<'_>) -> Result<Findings> {
    match ctx.spec.kind {
        CheckKind::Isometry1 => checks::isometry1(ctx),
        CheckKind::Isometry2 => checks::isometry2(ctx),
        CheckKind::Isometry3 => checks::isometry3(ctx),
        CheckKind::Isometry4 => checks::isometry4(ctx),
        CheckKind::Orthogonality => checks::orthogonality(ctx),
        CheckKind::BasisInvariance => checks::basis_invariance(ctx),
        CheckKind::IsometryInvariance => checks::isometry_invariance(ctx),
        CheckKind::WellDefined => checks::well_defined(ctx),
        CheckKind::CovarianceRecovery => checks::covariance_recovery(ctx),
        CheckKind::Bracket => checks::bracket(ctx),
        CheckKind::Martingale => checks::martingale(ctx),
        CheckKind::SimpleExact => checks::simple_exact(ctx),
        CheckKind::SeriesOrthogonality => checks::series_orthogonality(ctx),
        CheckKind::TruncationTail => checks::truncation_tail(ctx),
    }
}

/// Runs one check. The result depends only on the scenario and the spec.
pub fn run_check(scenario: &Scenario, spec: &CheckSpec) -> Result<CheckOutcome> {
    scenario.validate()?;
    spec.validate()?;
    let start = Instant::now();
    let ctx = Ctx::new(scenario, spec);
    let findings = dispatch(&ctx)?;
    let mut outcome = CheckOutcome::from_parts(
        spec.kind.name(),
        findings.parts,
        spec.n_paths,
        spec.seed,
        spec.tolerances.rel_tol,
        spec.tolerances.sigmas,
    );
    outcome.notes = findings.notes;
    outcome.report.truncation_bound = findings.truncation_bound;
    outcome.report.wall_time = start.elapsed().as_secs_f64();
    Ok(outcome)
}

/// Runs checks in order on a pool of `parallelism` threads. A failing check
/// yields an error entry and does not stop the others.
pub fn run_suite(scenario: &Scenario, specs: &[CheckSpec], parallelism: usize) -> Vec<Result<CheckOutcome>> {
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(parallelism.max(1)).build() {
        Ok(pool) => pool,
        Err(e) => return specs.iter().map(|_| Err(Error::Io(e.to_string()))).collect(),
    };
    pool.install(|| specs.iter().map(|s| run_check(scenario, s)).collect())
}

/// Result of running a suite with a fault injected.
#[derive(Debug, Clone, PartialEq)]
pub struct NegativeControl {
    pub fault: Fault,
    /// Outcomes up to and including the first failing check. Report names
    /// carry the fault as `name@fault`.
    pub outcomes: Vec<CheckOutcome>,
    pub detected: bool,
}

/// Runs `specs` in order with `fault` injected and stops at the first check
/// that fails, which is all a detection claim needs. Errors abort the run.
pub fn run_negative_control(
    scenario: &Scenario,
    specs: &[CheckSpec],
    fault: Fault,
    parallelism: usize,
) -> Result<NegativeControl> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| Error::Io(e.to_string()))?;
    pool.install(|| {
        let mut outcomes = Vec::new();
        for spec in specs {
            let mut o = run_check(scenario, &spec.clone().with_fault(fault))?;
            o.report.name = format!("{}@{}", o.report.name, fault.name());
            let failed = !o.report.pass;
            outcomes.push(o);
            if failed {
                return Ok(NegativeControl {
                    fault,
                    outcomes,
                    detected: true,
                });
            }
        }
        Ok(NegativeControl {
            fault,
            outcomes,
            detected: false,
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Scenario {
        let mut s = Scenario::desk_scale();
        s.n_scheduled = 16;
        s
    }

    #[test]
    fn empty_suite() {
        assert!(run_suite(&small(), &[], 2).is_empty());
    }

    #[test]
    fn simple_exact_passes_and_detects_right_point_sampling() {
        let s = small();
        let spec = CheckSpec::new(CheckKind::SimpleExact, 20, 1);
        let ok = run_check(&s, &spec).unwrap();
        assert!(ok.report.pass, "{:?}", ok.parts);
        let worked = ok.parts.iter().find(|p| p.label.starts_with("worked H")).unwrap();
        assert_eq!(worked.margin, 0.0);
        let bad = run_check(&s, &spec.with_fault(Fault::RightPointSampling)).unwrap();
        assert!(!bad.report.pass);
    }

    #[test]
    fn exact_checks_pass_on_small_runs() {
        let s = small();
        for kind in [CheckKind::BasisInvariance, CheckKind::IsometryInvariance, CheckKind::WellDefined] {
            let o = run_check(&s, &CheckSpec::new(kind, 20, 3)).unwrap();
            assert!(o.report.pass, "{kind}: {:?}", o.parts);
            let bad = run_check(&s, &CheckSpec::new(kind, 20, 3).with_fault(Fault::NonOrthogonalBasis)).unwrap();
            assert!(!bad.report.pass, "{kind} missed the skewed basis");
        }
    }

    #[test]
    fn negative_control_stops_at_first_detection() {
        let s = small();
        let specs = vec![
            CheckSpec::new(CheckKind::BasisInvariance, 10, 3),
            CheckSpec::new(CheckKind::SimpleExact, 10, 3),
            CheckSpec::new(CheckKind::WellDefined, 10, 3),
        ];
        let nc = run_negative_control(&s, &specs, Fault::RightPointSampling, 1).unwrap();
        assert!(nc.detected);
        assert_eq!(nc.outcomes.len(), 2);
        assert_eq!(nc.outcomes[1].report.name, "simple_exact@right_point_sampling");
        let nc = run_negative_control(&s, &specs[..1], Fault::RightPointSampling, 1).unwrap();
        assert!(!nc.detected);
    }

    #[test]
    fn statistical_check_rejects_single_path() {
        let err = run_check(&small(), &CheckSpec::new(CheckKind::Isometry1, 1, 0)).unwrap_err();
        assert!(matches!(err, Error::ConfigInvalid { .. }));
    }

    #[test]
    fn suite_is_parallelism_independent() {
        let s = small();
        let specs = vec![
            CheckSpec::new(CheckKind::Isometry4, 600, 5),
            CheckSpec::new(CheckKind::Bracket, 600, 5),
        ];
        let strip = |v: Vec<Result<CheckOutcome>>| {
            v.into_iter()
                .map(|o| {
                    let mut o = o.unwrap();
                    o.report.wall_time = 0.0;
                    o
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(strip(run_suite(&s, &specs, 1)), strip(run_suite(&s, &specs, 3)));
    }
}
