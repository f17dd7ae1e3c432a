use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use kcm_core::engine::RunStatus;
use kcm_core::harness::{merge_csv, run_experiment, Mode, SimConfig};

#[derive(Parser)]
#[command(name = "kcm", version, about = "KCM protein folding and unfolding simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fold from the start conformation until the torques converge.
    Fold(RunArgs),
    /// Unfold under the modulated optical tweezer.
    UnfoldTweezer(RunArgs),
    /// Unfold under Sontag-formula feedback.
    UnfoldCcf(RunArgs),
    /// Hessian test of the instability rate around the reference.
    Certify(RunArgs),
    /// Evaluate C_twz on a sphere in the first three dihedrals.
    SphereScan(RunArgs),
    /// Concatenate CSVs from several runs into one long table.
    Merge {
        #[arg(long)]
        out: PathBuf,
        /// Inputs as LABEL=PATH.
        #[arg(required = true)]
        inputs: Vec<String>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    alpha_c: Option<f64>,
    #[arg(long)]
    kappa0: Option<f64>,
    #[arg(long)]
    x0_nm: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    q: Option<f64>,
}

impl RunArgs {
    fn resolve(&self, mode: Mode) -> Result<SimConfig> {
        let mut cfg = match &self.config {
            Some(p) => SimConfig::load(p)?,
            None => SimConfig::default(),
        };
        cfg.mode = mode;
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = &self.out_dir {
            cfg.output.dir = v.clone();
        }
        if let Some(v) = self.dt {
            cfg.integration.dt = v;
        }
        if let Some(v) = self.steps {
            cfg.integration.steps = v;
        }
        if let Some(v) = self.alpha_c {
            cfg.chetaev.alpha_c = v;
        }
        if let Some(v) = self.kappa0 {
            cfg.tweezer.kappa0 = v;
        }
        if let Some(v) = self.x0_nm {
            cfg.tweezer.x0_nm = v;
        }
        if let Some(v) = self.p {
            cfg.sontag.p = v;
        }
        if let Some(v) = self.q {
            cfg.sontag.q = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(mode: Mode, args: &RunArgs) -> Result<ExitCode> {
    let cfg = args.resolve(mode)?;
    let outcome = run_experiment(&cfg).with_context(|| format!("{} run failed", mode.name()))?;
    for a in &outcome.artifacts {
        println!("wrote {}", a.display());
    }
    match &outcome.status {
        Some(s @ RunStatus::Aborted { .. }) => {
            eprintln!("warning: {}", s.label());
            Ok(ExitCode::from(3))
        }
        Some(s) => {
            println!("{}", s.label());
            Ok(ExitCode::SUCCESS)
        }
        None => Ok(ExitCode::SUCCESS),
    }
}

fn merge(out: &PathBuf, inputs: &[String]) -> Result<ExitCode> {
    let mut parsed = Vec::with_capacity(inputs.len());
    for s in inputs {
        let Some((label, path)) = s.split_once('=') else {
            bail!("expected LABEL=PATH, got {s:?}");
        };
        parsed.push((label.to_string(), PathBuf::from(path)));
    }
    let refs: Vec<(String, &std::path::Path)> =
        parsed.iter().map(|(l, p)| (l.clone(), p.as_path())).collect();
    merge_csv(&refs, out)?;
    println!("wrote {}", out.display());
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Fold(a) => run(Mode::Fold, a),
        Command::UnfoldTweezer(a) => run(Mode::UnfoldTweezer, a),
        Command::UnfoldCcf(a) => run(Mode::UnfoldCcf, a),
        Command::Certify(a) => run(Mode::Certify, a),
        Command::SphereScan(a) => run(Mode::SphereScan, a),
        Command::Merge { out, inputs } => merge(out, inputs),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            log::error!("{e:#}");
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
