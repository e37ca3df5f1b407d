use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use fibered_poisson::commands::{self, CheckOptions, CommandError, FlowOptions};
use fibered_poisson::model::{resolve, ModelFile, BUILTIN_NAMES};
use fibered_poisson::report::ReportDocument;

/// Verification campaigns for almost-coupling Poisson tensors on ℝ²ₓ × ℝ³ᵧ.
///
/// MODEL is a built-in example name or a path to a TOML model file.
/// Exit codes: 0 all checks pass, 1 a check failed, 2 input error, 3 numeric domain error.
#[derive(Parser)]
#[command(name = "fpoisson", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrability conditions against Jacobi, plus the identity suites.
    Check {
        model: String,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Rank strata on a grid; CSV point cloud plus a JSON report.
    Strata {
        model: String,
        #[arg(long, default_value_t = 9)]
        grid: usize,
        /// CSV destination (default `<name>_strata.csv`).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Modular field samples; with --certificate, the unimodularity criteria.
    Modular {
        model: String,
        #[arg(long)]
        certificate: bool,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Gauge family members as model files, each with its check report.
    Gauge {
        model: String,
        #[arg(long, allow_hyphen_values = true)]
        epsilon: Option<f64>,
        /// Comma-separated ε values.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        sweep: Vec<f64>,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// RK4 trajectory of a Hamiltonian field with conservation diagnostics.
    Flow {
        model: String,
        #[arg(long)]
        hamiltonian: String,
        /// Initial point x1,x2,y1,y2,y3.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        p0: Vec<f64>,
        #[arg(long)]
        dt: f64,
        #[arg(long)]
        steps: usize,
        /// Function whose drift is tracked; repeatable.
        #[arg(long)]
        casimir: Vec<String>,
        /// CSV destination (default `<name>_flow.csv`).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Every built-in example and the fuzz campaigns.
    Selftest,
    /// Names of the built-in models.
    List,
}

enum Failure {
    Command(CommandError),
    Io(anyhow::Error),
}

impl From<CommandError> for Failure {
    fn from(e: CommandError) -> Self {
        Failure::Command(e)
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Io(e)
    }
}

fn load(name_or_path: &str) -> Result<ModelFile, Failure> {
    Ok(resolve(name_or_path).map_err(CommandError::from)?)
}

fn write(path: &Path, text: &str) -> anyhow::Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn emit(doc: &ReportDocument, dest: Option<&Path>) -> Result<bool, Failure> {
    let json = doc.to_json();
    match dest {
        Some(p) => write(p, &json)?,
        None => println!("{json}"),
    }
    Ok(doc.passed())
}

fn run(cli: Cli) -> Result<bool, Failure> {
    match cli.command {
        Command::Check { model, samples, tol, report } => {
            let m = load(&model)?;
            let doc = commands::check(&m, CheckOptions { samples, tol })?;
            emit(&doc, report.as_deref())
        }
        Command::Strata { model, grid, out, report } => {
            let m = load(&model)?;
            let (csv, doc) = commands::strata(&m, grid)?;
            let out = out.unwrap_or_else(|| PathBuf::from(format!("{}_strata.csv", m.name)));
            write(&out, &csv)?;
            log::info!("wrote {}", out.display());
            emit(&doc, report.as_deref())
        }
        Command::Modular { model, certificate, report } => {
            let m = load(&model)?;
            emit(&commands::modular(&m, certificate)?, report.as_deref())
        }
        Command::Gauge { model, epsilon, sweep, out_dir, samples } => {
            let m = load(&model)?;
            let mut eps: Vec<f64> = epsilon.into_iter().collect();
            eps.extend(sweep);
            if eps.is_empty() {
                return Err(CommandError::Input("give --epsilon or --sweep".into()).into());
            }
            let results = commands::gauge(&m, &eps, CheckOptions { samples, tol: None })?;
            std::fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
            let mut passed = true;
            let mut docs = Vec::new();
            for (model, doc) in results {
                write(&out_dir.join(format!("{}.toml", model.name)), &model.to_toml())?;
                write(&out_dir.join(format!("{}.json", model.name)), &doc.to_json())?;
                passed &= doc.passed();
                docs.push(doc);
            }
            println!("{}", serde_json::to_string_pretty(&docs).expect("reports serialize"));
            Ok(passed)
        }
        Command::Flow { model, hamiltonian, p0, dt, steps, casimir, out, report } => {
            let m = load(&model)?;
            let p0: [f64; 5] = p0
                .try_into()
                .map_err(|_| CommandError::Input("--p0 needs five comma-separated numbers".into()))?;
            let o = FlowOptions { hamiltonian, p0, dt, steps, casimirs: casimir };
            let (csv, doc) = commands::flow(&m, &o)?;
            let out = out.unwrap_or_else(|| PathBuf::from(format!("{}_flow.csv", m.name)));
            write(&out, &csv)?;
            emit(&doc, report.as_deref())
        }
        Command::Selftest => {
            let items = commands::selftest();
            for it in &items {
                println!("{} {}: {}", if it.passed { "PASS" } else { "FAIL" }, it.name, it.detail);
            }
            Ok(items.iter().all(|i| i.passed))
        }
        Command::List => {
            for name in BUILTIN_NAMES {
                println!("{name}");
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Command(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
        Err(Failure::Io(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
