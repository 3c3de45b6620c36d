mod commands;
mod config;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use config::{ExperimentConfig, OneOrMany, Tolerances};

#[derive(Parser, Debug)]
#[command(name = "brlab", version, about = "Border-rank gap families, rank reports and correlation models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Convergence table of an approximating family (study.csv, study.json).
    FamilyStudy,
    /// Flattening bound and ALS residuals per target rank (report.json).
    Ranks,
    /// Measure the residual floors and write fixtures/floors.json.
    FloorsBootstrap,
    /// Decomposition file to a correlation model (model.json).
    ToModel,
    /// Correlation model back to a decomposition (decomposition.json).
    FromModel,
    /// Evaluate a model to its distribution or density matrix (report.json).
    EvalModel,
    /// Check POVM completeness, CPTP and normalization (report.json).
    ValidateModel,
    /// Canonical forms on tree complexes.
    #[command(subcommand)]
    Tree(TreeCommand),
    /// Nonnegative floors against the rank-2 witnesses (report.json).
    Separation,
    /// Known values and bounds (report.json).
    Reference,
}

#[derive(Subcommand, Debug)]
enum TreeCommand {
    Normalize,
    ClosureCheck,
}

#[derive(Args, Debug, Default)]
struct Flags {
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    family: Option<String>,
    #[arg(long, global = true)]
    tensor: Option<String>,
    /// Comma list allowed for `separation`.
    #[arg(long, global = true, value_delimiter = ',')]
    n: Vec<usize>,
    #[arg(long, global = true)]
    d: Option<usize>,
    /// Comma list allowed for `ranks`.
    #[arg(long, global = true, value_delimiter = ',')]
    r: Vec<usize>,
    #[arg(long, global = true)]
    p: Option<usize>,
    #[arg(long, global = true)]
    k: Option<usize>,
    /// `<a>..<b>[:points]`
    #[arg(long, global = true, allow_hyphen_values = true)]
    eps: Option<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    starts: Option<usize>,
    #[arg(long, global = true)]
    iters: Option<usize>,
    #[arg(long, global = true)]
    root: Option<usize>,
    #[arg(long, global = true)]
    force: bool,
    #[arg(long, global = true, value_delimiter = ',')]
    params: Vec<f64>,
    #[arg(long, global = true)]
    input: Vec<PathBuf>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long = "tol-povm", global = true)]
    tol_povm: Option<f64>,
    #[arg(long = "tol-cptp", global = true)]
    tol_cptp: Option<f64>,
    #[arg(long = "tol-hvm", global = true)]
    tol_hvm: Option<f64>,
    #[arg(long = "tol-state-norm", global = true)]
    tol_state_norm: Option<f64>,
}

fn many<T: Clone>(v: &[T]) -> Option<OneOrMany<T>> {
    match v {
        [] => None,
        [x] => Some(OneOrMany::One(x.clone())),
        _ => Some(OneOrMany::Many(v.to_vec())),
    }
}

impl Flags {
    fn to_config(&self) -> ExperimentConfig {
        ExperimentConfig {
            subcommand: None,
            family: self.family.clone(),
            tensor: self.tensor.clone(),
            n: many(&self.n),
            d: self.d,
            r: many(&self.r),
            p: self.p,
            k: self.k,
            eps: self.eps.clone(),
            seed: self.seed,
            starts: self.starts,
            iters: self.iters,
            root: self.root,
            force: self.force.then_some(true),
            params: (!self.params.is_empty()).then(|| self.params.clone()),
            input: many(&self.input),
            out: self.out.clone(),
            tol: Tolerances { povm: self.tol_povm, cptp: self.tol_cptp, hvm: self.tol_hvm, state_norm: self.tol_state_norm },
        }
    }
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Module { context: String, source: brlab_core::Error },
    Validation { deviation: f64, report: Value, files: Vec<PathBuf> },
    Io(String),
    Internal(String),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn module(context: &str, source: brlab_core::Error) -> Self {
        CliError::Module { context: context.into(), source }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }

    pub fn internal(e: impl fmt::Display) -> Self {
        CliError::Internal(e.to_string())
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Validation { .. } => 3,
            _ => 1,
        }
    }

    fn to_json(&self) -> Value {
        let body = match self {
            CliError::Config(m) => json!({ "kind": "invalid_config", "message": m }),
            CliError::Module { context, source } => {
                json!({ "kind": source.kind(), "context": context, "message": source.to_string() })
            }
            CliError::Validation { deviation, report, files } => json!({
                "kind": "validation_failed",
                "message": format!("model failed validation, max deviation {deviation:.3e}"),
                "deviation": deviation,
                "report": report,
                "files": files,
            }),
            CliError::Io(m) => json!({ "kind": "io", "message": m }),
            CliError::Internal(m) => json!({ "kind": "internal", "message": m }),
        };
        json!({ "error": body, "version": brlab_core::VERSION })
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_json())
    }
}

fn subcommand_name(c: &Command) -> &'static str {
    match c {
        Command::FamilyStudy => "family-study",
        Command::Ranks => "ranks",
        Command::FloorsBootstrap => "floors-bootstrap",
        Command::ToModel => "to-model",
        Command::FromModel => "from-model",
        Command::EvalModel => "eval-model",
        Command::ValidateModel => "validate-model",
        Command::Tree(TreeCommand::Normalize) => "tree normalize",
        Command::Tree(TreeCommand::ClosureCheck) => "tree closure-check",
        Command::Separation => "separation",
        Command::Reference => "reference",
    }
}

fn configure_threads() -> Result<(), CliError> {
    if let Ok(v) = std::env::var("BRLAB_THREADS") {
        let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| CliError::config(format!("BRLAB_THREADS must be a positive integer, got '{v}'")))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(CliError::internal)?;
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<commands::RunOutput, CliError> {
    configure_threads()?;
    let name = subcommand_name(&cli.command);
    let mut config = match &cli.flags.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = &config.subcommand {
        if s != name {
            return Err(CliError::config(format!("config file is for '{s}', not '{name}'")));
        }
    }
    config.overlay(&cli.flags.to_config());
    config.subcommand = Some(name.to_string());
    let hash = config.hash();
    log::info!("{name} config-hash={hash}");
    let ctx = commands::Context { config, subcommand: name.to_string(), hash };
    match cli.command {
        Command::FamilyStudy => commands::family_study(&ctx),
        Command::Ranks => commands::ranks(&ctx),
        Command::FloorsBootstrap => commands::floors_bootstrap(&ctx),
        Command::ToModel => commands::to_model(&ctx),
        Command::FromModel => commands::from_model(&ctx),
        Command::EvalModel => commands::eval_model(&ctx),
        Command::ValidateModel => commands::validate_model(&ctx),
        Command::Tree(TreeCommand::Normalize) => commands::tree_normalize(&ctx),
        Command::Tree(TreeCommand::ClosureCheck) => commands::tree_closure_check(&ctx),
        Command::Separation => commands::separation(&ctx),
        Command::Reference => commands::reference(&ctx),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = CliError::config(e.to_string().trim().to_string());
            println!("{err}");
            return ExitCode::from(err.exit_code());
        }
    };
    match run(&cli) {
        Ok(out) => {
            let files: Vec<String> = out.files.iter().map(|p| p.display().to_string()).collect();
            println!("{}", json!({ "status": "ok", "files": files, "summary": out.summary }));
            ExitCode::SUCCESS
        }
        Err(e) => {
            println!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
