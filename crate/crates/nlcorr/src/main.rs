use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use nlcorr::checks;
use nlcorr::measure::Algorithm;
use nlcorr::qstate::Subsystem;
use nlcorr::scenario::{self, ExperimentConfig, ExportFormat, Perturbation};
use nlcorr::Error;

/// Two-particle correlation experiments under mean-field nonlinear
/// Schrodinger dynamics.
#[derive(Parser)]
#[command(name = "nlcorr", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a JSON config and export the series.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: ExportFormat,
    },
    /// Reference scenario with the open-system algorithm (the continuous
    /// particle-2 curve).
    Figure1 {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: ExportFormat,
    },
    /// Reference scenario with the standard projection algorithm (the curve
    /// modified by the distant measurement).
    Figure2 {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: ExportFormat,
    },
    /// Rerun a config under field perturbations and report the deviation of
    /// the audited particle's reduced-density trajectory.
    Audit {
        #[arg(long)]
        config: PathBuf,
        /// Field override, e.g. B=5, t2=2, axis2=z. Repeatable.
        #[arg(long = "perturb", required = true)]
        perturb: Vec<String>,
        /// Audited particle: 1 or 2.
        #[arg(long)]
        target: u8,
    },
    /// Run the full invariant suite.
    Check {
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

/// 1 for validation problems, 2 for numerical assertion failures.
fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::NormDrift { .. }
        | Error::UnitarityDrift { .. }
        | Error::ProbabilityOutOfRange(_)
        | Error::ImaginaryResidue(_)
        | Error::InconsistentTable(_)
        | Error::NotNormalized(_) => 2,
        _ => 1,
    }
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Run { config, out, format } => {
            let config = ExperimentConfig::load(&config)?;
            let series = scenario::run(&config)?;
            scenario::export(&series, format, &out, Some(&config))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Figure1 { out, format } => figure(Algorithm::Open, &out, format),
        Command::Figure2 { out, format } => figure(Algorithm::ProjectionStandard, &out, format),
        Command::Audit { config, perturb, target } => {
            let config = ExperimentConfig::load(&config)?;
            let target = match target {
                1 => Subsystem::One,
                2 => Subsystem::Two,
                other => {
                    return Err(Error::InvalidConfig {
                        field: "target".into(),
                        message: format!("expected 1 or 2, got {other}"),
                    })
                }
            };
            let perturbations = perturb
                .iter()
                .map(|p| Perturbation::parse(p))
                .collect::<Result<Vec<_>, _>>()?;
            let report = scenario::locality_audit(&config, &perturbations, target)?;
            println!("{report}");
            if report.pass() {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::from(2))
            }
        }
        Command::Check { seed } => {
            let reports = checks::run_all(seed, &std::env::temp_dir());
            let mut all_pass = true;
            for r in &reports {
                println!("{}", r.line());
                all_pass &= r.passed;
            }
            if all_pass {
                println!("all checks passed");
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::from(2))
            }
        }
    }
}

fn figure(algorithm: Algorithm, out: &PathBuf, format: ExportFormat) -> Result<ExitCode, Error> {
    let config = ExperimentConfig::vi_c(algorithm);
    let series = scenario::run(&config)?;
    scenario::export(&series, format, out, Some(&config))?;
    Ok(ExitCode::SUCCESS)
}
