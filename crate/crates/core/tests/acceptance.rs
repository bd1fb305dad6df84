//! Desk-scale acceptance run. Prints one PASS/FAIL line per criterion and
//! fails if any criterion fails.
//!
//! The default suite is run twice (on 1 and on 4 threads); the first run
//! feeds criteria 1 to 9 and both feed the determinism criterion.

use std::time::Instant;

use levy_ito::verify::{
    default_suite, render_json, run_negative_control, CheckOutcome, Fault, IntegrandBank, PartKind, Scenario,
};
use levy_ito::{run_check, run_suite, CheckKind, CheckSpec, HSOperator};

const REL_TOL: f64 = 1e-12;
const SIGMAS: f64 = 4.0;

struct Line {
    id: usize,
    title: &'static str,
    pass: bool,
    detail: String,
}

fn outcome(outcomes: &[CheckOutcome], kind: CheckKind) -> &CheckOutcome {
    outcomes
        .iter()
        .find(|o| o.report.name == kind.name())
        .expect("check present in the suite")
}

fn summary(o: &CheckOutcome) -> String {
    let r = &o.report;
    format!(
        "{} margin={:.3e} lhs={:.6} rhs={:.6} se={:.2e} paths={} {:.1}s",
        r.name, r.margin, r.lhs, r.rhs, r.se, r.n_paths, r.wall_time
    )
}

/// Every part of kind `kind` passes at the stated tolerance, recomputed from
/// the raw part values rather than trusted from the check.
fn parts_hold(o: &CheckOutcome, filter: impl Fn(&str) -> bool) -> bool {
    let selected: Vec<_> = o.parts.iter().filter(|p| filter(&p.label)).collect();
    !selected.is_empty()
        && selected.iter().all(|p| match p.kind {
            PartKind::Exact => p.margin <= REL_TOL,
            PartKind::Statistical => p.se > 0.0 && (p.lhs - p.rhs).abs() <= SIGMAS * p.se * (1.0 + 1e-9),
        })
}

#[test]
fn acceptance() {
    let scenario = Scenario::desk_scale();
    let specs = default_suite(&scenario);
    let mut lines = Vec::new();

    let start = Instant::now();
    let first: Vec<CheckOutcome> = run_suite(&scenario, &specs, 1)
        .into_iter()
        .map(|o| o.expect("check runs"))
        .collect();
    let first_secs = start.elapsed().as_secs_f64();
    assert_eq!(first.len(), 13);

    // 1. Simple-process exactness over 100 randomized integrands and paths.
    let simple = outcome(&first, CheckKind::SimpleExact);
    let worked = simple.parts.iter().filter(|p| p.label.starts_with("worked")).count();
    lines.push(Line {
        id: 1,
        title: "simple-process exactness (1e-12 relative, per path)",
        pass: simple.report.n_paths == 100 && worked == 2 && parts_hold(simple, |_| true),
        detail: summary(simple),
    });

    // 2. Itô isometry on all four layers at 10^5 paths.
    let isometry3 = run_check(&scenario, &CheckSpec::for_scenario(CheckKind::Isometry3, &scenario)).unwrap();
    let layers = [
        outcome(&first, CheckKind::Isometry1),
        outcome(&first, CheckKind::Isometry2),
        &isometry3,
        outcome(&first, CheckKind::Isometry4),
    ];
    let iso_secs: f64 = layers.iter().map(|o| o.report.wall_time).sum();
    lines.push(Line {
        id: 2,
        title: "Ito isometry, four layers (4 SE, 1e5 paths, <= 2 min)",
        pass: layers.iter().all(|o| o.report.n_paths == 100_000 && parts_hold(o, |_| true)) && iso_secs <= 120.0,
        detail: format!(
            "{} | total {:.1}s",
            layers.iter().map(|o| format!("{} m={:.2}", o.report.name, o.report.margin)).collect::<Vec<_>>().join(", "),
            iso_secs
        ),
    });

    // 3. Basis independence under 10 random rotations of H.
    let basis = outcome(&first, CheckKind::BasisInvariance);
    lines.push(Line {
        id: 3,
        title: "basis independence (10 rotations, 1e-12 relative)",
        pass: basis.parts.iter().filter(|p| p.label.contains("rotation")).count() == 10 && parts_hold(basis, |_| true),
        detail: summary(basis),
    });

    // 4. Well-definedness across eigendecompositions, including a repeated
    //    eigenvalue with an in-block rotation.
    let well = outcome(&first, CheckKind::WellDefined);
    lines.push(Line {
        id: 4,
        title: "well-definedness across eigendecompositions (1e-12)",
        pass: well.parts.iter().any(|p| p.label.contains("repeated")) && parts_hold(well, |_| true),
        detail: summary(well),
    });

    // 5. Orthogonality of 5 component pairs.
    let orth = outcome(&first, CheckKind::Orthogonality);
    lines.push(Line {
        id: 5,
        title: "component orthogonality (5 pairs, 4 SE)",
        pass: orth.parts.len() == 5 && orth.parts.iter().all(|p| p.rhs == 0.0) && parts_hold(orth, |_| true),
        detail: summary(orth),
    });

    // 6. Covariance recovery on a 3x3 grid of times. Each part's target
    //    (t ∧ s) λ_i δ_ij is recomputed from its label "e<i> e<j> t=<t> s=<s>".
    let cov = outcome(&first, CheckKind::CovarianceRecovery);
    let lambda = scenario.covariance.eigenvalues();
    let target = |label: &str| -> Option<f64> {
        let f: Vec<&str> = label.split_whitespace().collect();
        let i: usize = f.first()?.strip_prefix('e')?.parse().ok()?;
        let j: usize = f.get(1)?.strip_prefix('e')?.parse().ok()?;
        let t: f64 = f.get(2)?.strip_prefix("t=")?.parse().ok()?;
        let s: f64 = f.get(3)?.strip_prefix("s=")?.parse().ok()?;
        Some(if i == j { t.min(s) * lambda[i - 1] } else { 0.0 })
    };
    let rhs_ok = cov.parts.len() == 45
        && cov.parts.iter().all(|p| target(&p.label).is_some_and(|r| (r - p.rhs).abs() <= 1e-15));
    lines.push(Line {
        id: 6,
        title: "covariance recovery (3x3 times, 4 SE)",
        pass: rhs_ok && parts_hold(cov, |_| true),
        detail: summary(cov),
    });

    // 7. Bracket normalization per driver preset.
    let bracket = outcome(&first, CheckKind::Bracket);
    let var_ok = bracket
        .parts
        .iter()
        .take(scenario.modes)
        .all(|p| p.rhs == scenario.horizon);
    lines.push(Line {
        id: 7,
        title: "bracket normalization (Var = T, Cov = 0, 4 SE)",
        pass: var_ok && parts_hold(bracket, |_| true),
        detail: summary(bracket),
    });

    // 8. Quadratic variation and covariation identities.
    let mart = outcome(&first, CheckKind::Martingale);
    let qv = |l: &str| l.starts_with("quadratic variation") || l.starts_with("covariation");
    let qv_parts: Vec<_> = mart.parts.iter().filter(|p| qv(&p.label)).collect();
    let worst = qv_parts.iter().map(|p| p.margin).fold(0.0, f64::max);
    lines.push(Line {
        id: 8,
        title: "quadratic-variation and covariation identities (4 SE)",
        pass: parts_hold(mart, qv),
        detail: format!("{} parts, worst margin {:.3}", qv_parts.len(), worst),
    });

    // 9. Truncation tail against the analytic bound Σ_{j>3} ‖X e_j‖² T.
    let tail = outcome(&first, CheckKind::TruncationTail);
    let bank = IntegrandBank::new(scenario.dim_h, scenario.modes, scenario.bank_seed);
    let x = HSOperator::from_reference(&scenario.covariance, &bank.constant_operator(0)).unwrap();
    let oracle: f64 = (3..scenario.modes)
        .map(|j| x.matrix().column(j).norm_squared())
        .sum::<f64>()
        * scenario.horizon;
    let bound = tail.report.truncation_bound.unwrap_or(f64::NAN);
    lines.push(Line {
        id: 9,
        title: "truncation tail vs analytic bound (Jsub = 3, J = 6, 4 SE)",
        pass: (bound - oracle).abs() <= REL_TOL * oracle && parts_hold(tail, |_| true),
        detail: format!("{} | analytic bound {oracle:.6}", summary(tail)),
    });

    // 10. Each injected fault fails at least one check of the default suite.
    let mut detections = Vec::new();
    let mut all_detected = true;
    for fault in Fault::ALL {
        let nc = run_negative_control(&scenario, &specs, fault, 1).unwrap();
        all_detected &= nc.detected;
        detections.push(match (nc.detected, nc.outcomes.last()) {
            (true, Some(o)) => format!("{} caught by {}", fault.name(), o.report.name),
            _ => format!("{} missed", fault.name()),
        });
    }
    lines.push(Line {
        id: 10,
        title: "negative controls detected",
        pass: all_detected,
        detail: detections.join("; "),
    });

    // 11. Byte-identical reports at parallelism 1 and 4.
    let start = Instant::now();
    let second: Vec<CheckOutcome> = run_suite(&scenario, &specs, 4)
        .into_iter()
        .map(|o| o.expect("check runs"))
        .collect();
    let second_secs = start.elapsed().as_secs_f64();
    let render = |outcomes: &[CheckOutcome]| {
        let reports: Vec<_> = outcomes
            .iter()
            .map(|o| {
                let mut r = o.report.clone();
                r.wall_time = 0.0;
                r
            })
            .collect();
        render_json(&reports).unwrap()
    };
    let (a, b) = (render(&first), render(&second));
    lines.push(Line {
        id: 11,
        title: "determinism across parallelism (byte-identical reports)",
        pass: a.as_bytes() == b.as_bytes() && first.iter().all(|o| o.report.pass),
        detail: format!(
            "{} bytes, suite {:.1}s at 1 thread, {:.1}s at 4 threads",
            a.len(),
            first_secs,
            second_secs
        ),
    });

    for l in &lines {
        println!(
            "criterion {:>2} {}: {} ({})",
            l.id,
            if l.pass { "PASS" } else { "FAIL" },
            l.title,
            l.detail
        );
    }
    let failed: Vec<usize> = lines.iter().filter(|l| !l.pass).map(|l| l.id).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
