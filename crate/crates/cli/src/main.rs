use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use plasma2d_cli::config::SampleSection;
use plasma2d_cli::ensemble::{ChainSettings, Method};
use plasma2d_cli::{ExperimentConfig, ExportFormat, Kind, Result, RunOptions, RunRecord, RunnerError};
use plasma2d_core::{Ensemble, ModelParams};

#[derive(Parser)]
#[command(name = "plasma2d", version, about = "Numerical experiments on the two-dimensional one-component plasma")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate (or extend) a shared ensemble of configurations.
    Sample(RunArgs),
    /// Smoothed electrostatic potential on a grid.
    Field(RunArgs),
    /// Maximum of the potential over a ladder of N.
    MaxLadder(RunArgs),
    /// Central limit theorem for a linear statistic.
    Clt(RunArgs),
    /// Laplace transform as a ratio of partition functions.
    LaplaceProbe(RunArgs),
    /// Gaussian multiplicative chaos checks.
    Gmc(RunArgs),
    /// Deterministic identity suite.
    Verify(RunArgs),
    /// Write the tables of a completed run.
    Export {
        run_id: String,
        #[arg(long, default_value = "csv")]
        format: String,
        /// Destination directory; defaults to <output-dir>/exports/<run-id>.
        #[arg(long)]
        dest: Option<PathBuf>,
        #[arg(long, default_value = "plasma2d-runs")]
        output_dir: PathBuf,
    },
    /// Continue an interrupted run.
    Resume {
        run_id: String,
        #[arg(long, default_value = "plasma2d-runs")]
        output_dir: PathBuf,
        #[arg(long)]
        replica_budget: Option<usize>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML experiment configuration; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicas: Option<usize>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    beta: Option<f64>,
    /// canonical-f or pure-quadratic.
    #[arg(long)]
    ensemble: Option<Ensemble>,
    /// ginibre or mcmc.
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    sweeps: Option<u64>,
    #[arg(long)]
    burn_in: Option<u64>,
    #[arg(long)]
    thinning: Option<u64>,
    #[arg(long)]
    force: bool,
    /// Stop after generating this many replicas.
    #[arg(long)]
    replica_budget: Option<usize>,
}

impl RunArgs {
    fn build(&self, kind: Kind) -> Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::new(kind, 0),
        };
        if c.kind != kind {
            return Err(RunnerError::ConfigInvalid(format!("config is for '{}', not '{}'", c.kind.name(), kind.name())));
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(r) = self.replicas {
            c.replicas = r;
        }
        if self.output_dir.is_some() {
            c.output_dir = self.output_dir.clone();
        }
        if self.n.is_some() || self.beta.is_some() || self.ensemble.is_some() {
            let base = c.model.unwrap_or(ModelParams { n: 64, beta: 2.0, ensemble: Ensemble::CanonicalF });
            c.model = Some(ModelParams {
                n: self.n.unwrap_or(base.n),
                beta: self.beta.unwrap_or(base.beta),
                ensemble: self.ensemble.unwrap_or(base.ensemble),
            });
        }
        if let Some(m) = &self.method {
            let method = match m.as_str() {
                "ginibre" => Method::Ginibre,
                "mcmc" => Method::Mcmc,
                _ => return Err(RunnerError::ConfigInvalid(format!("unknown method '{m}'"))),
            };
            let chain = c.sample.and_then(|s| s.chain);
            c.sample = Some(SampleSection { method, chain });
        }
        if self.sweeps.is_some() || self.burn_in.is_some() || self.thinning.is_some() {
            let mut s = c.sample.unwrap_or(SampleSection { method: Method::Mcmc, chain: None });
            let base = s.chain.unwrap_or(ChainSettings { sweeps: 2000, burn_in: 500, thinning: 10, step_scale: None });
            s.chain = Some(ChainSettings {
                sweeps: self.sweeps.unwrap_or(base.sweeps),
                burn_in: self.burn_in.unwrap_or(base.burn_in),
                thinning: self.thinning.unwrap_or(base.thinning),
                step_scale: base.step_scale,
            });
            c.sample = Some(s);
        }
        Ok(c)
    }

    fn options(&self) -> RunOptions {
        RunOptions { force: self.force, replica_budget: self.replica_budget }
    }
}

fn report(record: &RunRecord) -> ExitCode {
    println!("run {} ({}): {:?}", record.run_id, record.kind.name(), record.status);
    for v in &record.verdicts {
        println!("  [{}] {}: {}", if v.pass { "PASS" } else { "FAIL" }, v.name, v.detail);
    }
    if record.all_pass() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Sample(a) => run_kind(Kind::Sample, &a),
        Command::Field(a) => run_kind(Kind::Field, &a),
        Command::MaxLadder(a) => run_kind(Kind::MaxLadder, &a),
        Command::Clt(a) => run_kind(Kind::Clt, &a),
        Command::LaplaceProbe(a) => run_kind(Kind::LaplaceProbe, &a),
        Command::Gmc(a) => run_kind(Kind::Gmc, &a),
        Command::Verify(a) => run_kind(Kind::Verify, &a),
        Command::Resume { run_id, output_dir, replica_budget } => {
            plasma2d_cli::resume(&output_dir, &run_id, RunOptions { force: false, replica_budget }).map(|r| report(&r))
        }
        Command::Export { run_id, format, dest, output_dir } => format.parse::<ExportFormat>().and_then(|f| {
            let dest = dest.unwrap_or_else(|| output_dir.join("exports").join(&run_id));
            let files = plasma2d_cli::export(&output_dir, &run_id, f, &dest)?;
            for p in files {
                println!("{}", p.display());
            }
            Ok(ExitCode::SUCCESS)
        }),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run_kind(kind: Kind, args: &RunArgs) -> Result<ExitCode> {
    let config = args.build(kind)?;
    Ok(report(&plasma2d_cli::run(&config, args.options())?))
}
