use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

use levy_ito::config::{resolve_output_from_env, ReportFormat};
use levy_ito::experiment;
use levy_ito::verify::{default_suite, render_csv, render_json, run_negative_control, run_suite, Fault};
use levy_ito::{CheckKind, CheckSpec, Error, ExperimentConfig, Report};

/// Simulate Lévy paths, compute Itô integrals and verify their identities.
#[derive(Parser)]
#[command(name = "levy-ito", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write one simulated driver path as CSV.
    Simulate(PathArgs),
    /// Integrate the configured integrand along one path.
    Integrate {
        #[command(flatten)]
        args: PathArgs,
        /// Also write one CSV per series term next to the output.
        #[arg(long)]
        dump_series: bool,
    },
    /// Run verification checks and write their reports.
    Check(CheckArgs),
}

#[derive(Args)]
struct PathArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `mc.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; defaults to `output.path`, then a command-specific name.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Suite {
    Default,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long)]
    config: PathBuf,
    /// Check to run; repeatable. Without it the config's list is used.
    #[arg(long = "check", value_name = "NAME", conflicts_with = "suite")]
    checks: Vec<String>,
    #[arg(long, value_enum)]
    suite: Option<Suite>,
    /// Overrides the path count of every selected check.
    #[arg(long)]
    paths: Option<usize>,
    /// Overrides the seed of every selected check.
    #[arg(long)]
    seed: Option<u64>,
    /// Report file; defaults to `output.path`, else stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Inject each known fault and succeed only if every one is detected.
    #[arg(long)]
    negative_control: bool,
}

fn load(path: &Path, seed: Option<u64>) -> anyhow::Result<ExperimentConfig> {
    let mut config = ExperimentConfig::load(path)?;
    if let Some(s) = seed {
        config.mc.seed = s;
    }
    Ok(config)
}

fn output_path(flag: &Option<PathBuf>, config: &ExperimentConfig, fallback: &str) -> PathBuf {
    let chosen = flag
        .clone()
        .or_else(|| config.output.path.clone())
        .unwrap_or_else(|| PathBuf::from(fallback));
    resolve_output_from_env(&chosen)
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

fn simulate(args: &PathArgs) -> anyhow::Result<bool> {
    let config = load(&args.config, args.seed)?;
    let path = experiment::simulate(&config, config.mc.path_index)?;
    let out = output_path(&args.out, &config, "path.csv");
    let mut w = create(&out)?;
    path.write_csv(&mut w)?;
    w.flush()?;
    eprintln!("wrote {}", out.display());
    Ok(true)
}

fn integrate(args: &PathArgs, dump_series: bool) -> anyhow::Result<bool> {
    let config = load(&args.config, args.seed)?;
    let run = experiment::integrate(&config, config.mc.path_index)?;
    let out = output_path(&args.out, &config, "integral.csv");

    let mut w = create(&out)?;
    run.total.write_csv(&mut w)?;
    w.flush()?;
    if dump_series {
        for (j, term) in run.terms.iter().enumerate() {
            let mut w = create(&sibling(&out, &format!(".term{}.csv", j + 1)))?;
            term.write_csv(&mut w)?;
            w.flush()?;
        }
    }
    let summary = run.summary(config.mc.seed, config.mc.path_index);
    let text = serde_json::to_string_pretty(&summary)? + "\n";
    std::fs::write(sibling(&out, ".summary.json"), &text)?;
    print!("{text}");
    Ok(true)
}

fn selected_specs(args: &CheckArgs, config: &ExperimentConfig) -> anyhow::Result<Vec<CheckSpec>> {
    let scenario = config.scenario()?;
    let configured = config.check_specs()?;
    let mut specs = if args.suite.is_some() {
        default_suite(&scenario)
    } else if args.checks.is_empty() {
        configured
    } else {
        args.checks
            .iter()
            .map(|name| {
                let kind = CheckKind::from_name(name)?;
                Ok(configured
                    .iter()
                    .find(|s| s.kind == kind)
                    .cloned()
                    .unwrap_or_else(|| CheckSpec::for_scenario(kind, &scenario)))
            })
            .collect::<Result<Vec<_>, Error>>()?
    };
    for spec in &mut specs {
        if let Some(n) = args.paths {
            spec.n_paths = n;
        }
        if let Some(s) = args.seed {
            spec.seed = s;
        }
        spec.validate()?;
    }
    Ok(specs)
}

fn check(args: &CheckArgs) -> anyhow::Result<bool> {
    let config = load(&args.config, None)?;
    let specs = selected_specs(args, &config)?;
    let scenario = config.scenario()?;
    let threads = config
        .mc
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));

    let mut reports: Vec<Report> = Vec::new();
    let ok = if args.negative_control {
        let mut all_detected = true;
        for fault in Fault::ALL {
            let nc = run_negative_control(&scenario, &specs, fault, threads)?;
            match nc.outcomes.last().filter(|_| nc.detected) {
                Some(o) => eprintln!("DETECTED {} by {}", fault.name(), o.report.name),
                None => eprintln!("MISSED   {}", fault.name()),
            }
            all_detected &= nc.detected;
            reports.extend(nc.outcomes.into_iter().map(|o| o.report));
        }
        all_detected
    } else {
        let mut all_pass = true;
        for (spec, outcome) in specs.iter().zip(run_suite(&scenario, &specs, threads)) {
            let outcome = outcome.with_context(|| format!("check {}", spec.kind))?;
            let r = &outcome.report;
            eprintln!(
                "{} {:<22} margin={:.3e} lhs={:.6} rhs={:.6} se={:.3e}",
                if r.pass { "PASS" } else { "FAIL" },
                r.name,
                r.margin,
                r.lhs,
                r.rhs,
                r.se
            );
            all_pass &= r.pass;
            reports.push(outcome.report);
        }
        all_pass
    };

    if !config.output.record_wall_time {
        for r in &mut reports {
            r.wall_time = 0.0;
        }
    }
    let format = match args.format {
        Some(Format::Json) => ReportFormat::Json,
        Some(Format::Csv) => ReportFormat::Csv,
        None => config.output.format,
    };
    let text = match format {
        ReportFormat::Json => render_json(&reports)?,
        ReportFormat::Csv => render_csv(&reports)?,
    };
    match args.out.clone().or_else(|| config.output.path.clone()) {
        Some(p) => {
            let out = resolve_output_from_env(&p);
            let mut w = create(&out)?;
            w.write_all(text.as_bytes())?;
            w.flush()?;
        }
        None => print!("{text}"),
    }
    Ok(ok)
}

fn is_config_error(e: &anyhow::Error) -> bool {
    matches!(
        e.downcast_ref::<Error>(),
        Some(Error::ConfigInvalid { .. } | Error::ConfigNotFound(_) | Error::UnknownCheck { .. })
    )
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(args) => simulate(args),
        Command::Integrate { args, dump_series } => integrate(args, *dump_series),
        Command::Check(args) => check(args),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            if is_config_error(&e) {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn sibling_names() {
        assert_eq!(sibling(Path::new("out/run.csv"), ".term2.csv"), PathBuf::from("out/run.term2.csv"));
        assert_eq!(sibling(Path::new("run.csv"), ".summary.json"), PathBuf::from("run.summary.json"));
    }
}

