use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use qadc_activity::harness::{checks, emit_csv, run_experiment, ExperimentConfig, ExperimentKind, RunOptions};

/// Default directory for CSV output when `--out` is not given.
const OUTPUT_DIR_ENV: &str = "QADC_OUTPUT_DIR";

#[derive(Parser)]
#[command(name = "qadc", version, about = "Activity detection experiments under low-resolution ADCs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Detection ROC per resolution and K̂ mode.
    Detect(RunArgs),
    /// Two-phase protocol against both benchmarks.
    Protocol(RunArgs),
    /// PEA/OEA estimation error per step.
    EstimateK(RunArgs),
    /// NSGD convergence traces.
    Converge(RunArgs),
    /// Analytic gradients against central differences.
    Gradcheck {
        #[arg(long, default_value_t = 100)]
        instances: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Per-dimension received power against (Kβ + σ²)/2.
    PowerCheck {
        #[arg(long, default_value_t = 100_000)]
        draws: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Sampled gradients against tensor-grid quadrature.
    OracleCheck {
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Args)]
struct RunArgs {
    /// `key = value` file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV path. Defaults to `$QADC_OUTPUT_DIR/<experiment>.csv`, or `results/`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads. Output does not depend on it.
    #[arg(long)]
    threads: Option<usize>,
    #[command(flatten)]
    fields: Fields,
}

/// One flag per configuration key, applied as text.
#[derive(Args, Default)]
struct Fields {
    #[arg(long = "N")]
    n: Option<String>,
    #[arg(long = "K")]
    k: Option<String>,
    #[arg(long = "M")]
    m: Option<String>,
    #[arg(long = "L_I")]
    l_i: Option<String>,
    #[arg(long = "L_N")]
    l_n: Option<String>,
    /// Comma list of resolutions, `inf` for the unquantized baseline.
    #[arg(long = "B")]
    b: Option<String>,
    #[arg(long)]
    rho: Option<String>,
    #[arg(long)]
    epsilon: Option<String>,
    #[arg(long = "maxIterations")]
    max_iterations: Option<String>,
    #[arg(long = "baselineEpsilon")]
    baseline_epsilon: Option<String>,
    #[arg(long)]
    beta: Option<String>,
    #[arg(long)]
    sigma2: Option<String>,
    /// `iid` or `exponential:<c>`.
    #[arg(long = "channelModel")]
    channel_model: Option<String>,
    #[arg(long = "compareChannelModel")]
    compare_channel_model: Option<String>,
    /// Comma list of `truth`, `fixed:<v>`, `oea`, `pea`.
    #[arg(long = "kHatMode")]
    k_hat_mode: Option<String>,
    #[arg(long = "K0")]
    k0: Option<String>,
    #[arg(long)]
    trials: Option<String>,
    #[arg(long = "masterSeed")]
    master_seed: Option<String>,
    /// `start:step:stop` or a comma list, in units of β.
    #[arg(long = "thresholdGrid")]
    threshold_grid: Option<String>,
    #[arg(long = "fapTarget")]
    fap_target: Option<String>,
    #[arg(long)]
    threshold: Option<String>,
}

impl Fields {
    fn pairs(&self) -> [(&'static str, &Option<String>); 21] {
        [
            ("N", &self.n),
            ("K", &self.k),
            ("M", &self.m),
            ("L_I", &self.l_i),
            ("L_N", &self.l_n),
            ("B", &self.b),
            ("rho", &self.rho),
            ("epsilon", &self.epsilon),
            ("maxIterations", &self.max_iterations),
            ("baselineEpsilon", &self.baseline_epsilon),
            ("beta", &self.beta),
            ("sigma2", &self.sigma2),
            ("channelModel", &self.channel_model),
            ("compareChannelModel", &self.compare_channel_model),
            ("kHatMode", &self.k_hat_mode),
            ("K0", &self.k0),
            ("trials", &self.trials),
            ("masterSeed", &self.master_seed),
            ("thresholdGrid", &self.threshold_grid),
            ("fapTarget", &self.fap_target),
            ("threshold", &self.threshold),
        ]
    }
}

fn build_config(kind: ExperimentKind, args: &RunArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    cfg.experiment = kind;
    for (key, value) in args.fields.pairs() {
        if let Some(v) = value {
            cfg.set(key, v)?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn output_path(kind: ExperimentKind, out: Option<PathBuf>) -> PathBuf {
    out.unwrap_or_else(|| {
        let dir = std::env::var_os(OUTPUT_DIR_ENV).map_or_else(|| PathBuf::from("results"), PathBuf::from);
        dir.join(format!("{}.csv", kind.name()))
    })
}

fn run(kind: ExperimentKind, args: RunArgs) -> Result<ExitCode> {
    let cfg = build_config(kind, &args)?;
    let record = run_experiment(&cfg, RunOptions { threads: args.threads })?;
    let path = output_path(kind, args.out);
    emit_csv(&record, &path).with_context(|| format!("writing {}", path.display()))?;
    print!("{record}");
    println!("wrote {}", path.display());
    Ok(ExitCode::SUCCESS)
}

fn report(r: checks::CheckReport) -> ExitCode {
    print!("{r}");
    if r.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn main() -> Result<ExitCode> {
    match Cli::parse().command {
        Command::Detect(a) => run(ExperimentKind::Detect, a),
        Command::Protocol(a) => run(ExperimentKind::Protocol, a),
        Command::EstimateK(a) => run(ExperimentKind::EstimateK, a),
        Command::Converge(a) => run(ExperimentKind::Converge, a),
        Command::Gradcheck { instances, seed } => Ok(report(checks::gradcheck(instances, seed)?)),
        Command::PowerCheck { draws, seed } => Ok(report(checks::power_check(draws, seed)?)),
        Command::OracleCheck { samples, seed } => Ok(report(checks::oracle_check(samples, seed)?)),
    }
}
