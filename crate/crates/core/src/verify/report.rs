use serde::Serialize;

use crate::error::{Error, Result};
use crate::stats::Moments;

/// How a part's margin is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PartKind {
    /// Margin is the largest per-path relative deviation.
    Exact,
    /// Margin is |mean(lhs − rhs)| in standard errors of the paired difference.
    Statistical,
}

/// One identity within a check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Part {
    pub label: String,
    pub kind: PartKind,
    pub lhs: f64,
    pub rhs: f64,
    pub se: f64,
    pub margin: f64,
    pub pass: bool,
}

impl Part {
    /// Paired comparison of per-path samples.
    pub fn statistical(label: impl Into<String>, lhs: &Moments, rhs: &Moments, diff: &Moments, sigmas: f64) -> Part {
        let se = diff.std_error();
        let gap = diff.mean().abs();
        let margin = if gap == 0.0 {
            0.0
        } else if se == 0.0 {
            f64::INFINITY
        } else {
            gap / se
        };
        Part {
            label: label.into(),
            kind: PartKind::Statistical,
            lhs: lhs.mean(),
            rhs: rhs.mean(),
            se,
            margin,
            pass: margin <= sigmas,
        }
    }

    /// Worst per-path relative deviation, with the norms of the worst pair.
    pub fn exact(label: impl Into<String>, lhs_norm: f64, rhs_norm: f64, deviation: f64, rel_tol: f64) -> Part {
        let margin = if deviation.is_nan() { f64::INFINITY } else { deviation };
        Part {
            label: label.into(),
            kind: PartKind::Exact,
            lhs: lhs_norm,
            rhs: rhs_norm,
            se: 0.0,
            margin,
            pass: margin <= rel_tol,
        }
    }

    fn severity(&self, tol: f64) -> f64 {
        if self.margin.is_nan() {
            f64::INFINITY
        } else {
            self.margin / tol
        }
    }
}

/// The stable per-check record.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Report {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub se: f64,
    pub margin: f64,
    pub pass: bool,
    pub n_paths: usize,
    pub seed: u64,
    pub wall_time: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truncation_bound: Option<f64>,
}

/// A report with the per-identity detail behind it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub report: Report,
    pub parts: Vec<Part>,
    /// Informational values without a pass threshold, such as sup-norm surrogates.
    pub notes: Vec<(String, f64)>,
}

impl CheckOutcome {
    /// Summarizes parts by the worst one relative to its threshold.
    pub(crate) fn from_parts(
        name: &str,
        parts: Vec<Part>,
        n_paths: usize,
        seed: u64,
        rel_tol: f64,
        sigmas: f64,
    ) -> CheckOutcome {
        let threshold = |p: &Part| match p.kind {
            PartKind::Exact => rel_tol.max(f64::MIN_POSITIVE),
            PartKind::Statistical => sigmas,
        };
        let worst = parts
            .iter()
            .enumerate()
            .fold(None::<(usize, f64)>, |best, (i, p)| {
                let s = p.severity(threshold(p));
                match best {
                    Some((_, b)) if b >= s => best,
                    _ => Some((i, s)),
                }
            })
            .map(|(i, _)| &parts[i]);
        let (lhs, rhs, se, margin) = worst.map_or((0.0, 0.0, 0.0, 0.0), |p| (p.lhs, p.rhs, p.se, p.margin));
        CheckOutcome {
            report: Report {
                name: name.to_string(),
                lhs,
                rhs,
                se,
                margin,
                pass: parts.iter().all(|p| p.pass),
                n_paths,
                seed,
                wall_time: 0.0,
                truncation_bound: None,
            },
            parts,
            notes: Vec::new(),
        }
    }
}

/// Reports as a JSON array, one object per check.
pub fn render_json(reports: &[Report]) -> Result<String> {
    serde_json::to_string_pretty(reports)
        .map(|mut s| {
            s.push('\n');
            s
        })
        .map_err(|e| Error::Io(e.to_string()))
}

/// Reports as CSV, one row per check; an absent truncation bound is empty.
pub fn render_csv(reports: &[Report]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record([
        "name",
        "lhs",
        "rhs",
        "se",
        "margin",
        "pass",
        "nPaths",
        "seed",
        "wallTime",
        "truncationBound",
    ])
    .map_err(io)?;
    for r in reports {
        w.write_record([
            r.name.clone(),
            r.lhs.to_string(),
            r.rhs.to_string(),
            r.se.to_string(),
            r.margin.to_string(),
            r.pass.to_string(),
            r.n_paths.to_string(),
            r.seed.to_string(),
            r.wall_time.to_string(),
            r.truncation_bound.map(|b| b.to_string()).unwrap_or_default(),
        ])
        .map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}
