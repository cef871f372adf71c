use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use worklab::commands::{self, CommandOutput};
use worklab::scenario::{Mode, ScenarioConfig};
use worklab::verify::Suite;
use worklab::{Error, Result};

#[derive(Parser)]
#[command(name = "worklab", version, about = "Quantum work statistics from emulated optical interferometry")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct ScenarioArgs {
    /// Scenario file (key = value); flags override its keys
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    q0: Option<f64>,
    #[arg(long = "beta-hw")]
    beta_hw: Option<f64>,
    #[arg(long = "s-samples")]
    s_samples: Option<usize>,
    /// analytic, interferometric or open
    #[arg(long)]
    mode: Option<String>,
    /// Channel spec file for open mode
    #[arg(long)]
    channel: Option<PathBuf>,
    #[arg(long = "out-dir")]
    out_dir: Option<PathBuf>,
    /// Explicit level cutoff
    #[arg(long = "n-cut")]
    n_cut: Option<usize>,
    /// Missing-mass tolerance of the automatic cutoff
    #[arg(long = "tail-tol")]
    tail_tol: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Characteristic function and work distribution
    Charfn(ScenarioArgs),
    /// Work distribution only
    Workdist(ScenarioArgs),
    /// Simulated interferometer traces and the reconstructed G(s)
    Interf(ScenarioArgs),
    /// Eigenphase law of the spectral and lens-chain FRFT
    FrftVerify {
        #[arg(long = "out-dir", default_value = "out")]
        out_dir: PathBuf,
        #[arg(long = "n-max", default_value_t = 10)]
        n_max: usize,
    },
    /// G(s) and gamma for a Kraus channel
    OpenCharfn(ScenarioArgs),
    /// Mean work and the Jarzynski sum
    Jarzynski(ScenarioArgs),
    /// Physical distances and scales of one FRFT stage
    Units {
        #[arg(long = "lambda-nm")]
        lambda_nm: f64,
        #[arg(long = "f-mm")]
        f_mm: f64,
        #[arg(long)]
        alpha: f64,
    },
    /// Run an acceptance suite
    Verify {
        /// fast, full or stress
        #[arg(long, default_value = "fast")]
        suite: String,
        #[arg(long = "out-dir", default_value = "out")]
        out_dir: PathBuf,
    },
}

fn scenario(a: &ScenarioArgs) -> Result<ScenarioConfig> {
    let mut cfg = match &a.config {
        Some(p) => ScenarioConfig::from_file(p)?,
        None => ScenarioConfig::default(),
    };
    if let Some(v) = a.q0 {
        cfg.q0 = v;
    }
    if let Some(v) = a.beta_hw {
        cfg.beta_hw = v;
    }
    if let Some(v) = a.s_samples {
        cfg.s_samples = Some(v);
    }
    if let Some(v) = &a.mode {
        cfg.mode = v.parse::<Mode>()?;
    }
    if let Some(v) = &a.channel {
        cfg.channel = Some(v.clone());
    }
    if let Some(v) = &a.out_dir {
        cfg.out_dir = v.clone();
    }
    if let Some(v) = a.n_cut {
        cfg.n_cut = Some(v);
    }
    if let Some(v) = a.tail_tol {
        cfg.tail_tol = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn dispatch(cmd: &Command) -> Result<CommandOutput> {
    match cmd {
        Command::Charfn(a) => commands::cmd_charfn(&scenario(a)?),
        Command::Workdist(a) => commands::cmd_workdist(&scenario(a)?),
        Command::Interf(a) => commands::cmd_interf(&scenario(a)?),
        Command::FrftVerify { out_dir, n_max } => commands::cmd_frft_verify(out_dir, *n_max),
        Command::OpenCharfn(a) => commands::cmd_open_charfn(&scenario(a)?),
        Command::Jarzynski(a) => commands::cmd_jarzynski(&scenario(a)?),
        Command::Units { lambda_nm, f_mm, alpha } => commands::cmd_units(*lambda_nm, *f_mm, *alpha),
        Command::Verify { suite, out_dir } => commands::cmd_verify(suite.parse::<Suite>()?, out_dir),
    }
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("WORKLAB_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|n| *n >= 1)
            .ok_or_else(|| Error::Config(format!("WORKLAB_THREADS must be a positive integer, got '{v}'")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|_| dispatch(&cli.command));
    match result {
        Ok(out) => {
            for w in &out.warnings {
                eprintln!("warning: {w}");
            }
            for l in &out.lines {
                println!("{l}");
            }
            match out.failure {
                Some(msg) => fail(&Error::GateFailure(msg)),
                None => ExitCode::SUCCESS,
            }
        }
        Err(e) => fail(&e),
    }
}

fn fail(e: &Error) -> ExitCode {
    let message = e.to_string().replace('\n', " ");
    eprintln!("error kind={} message={message}", e.kind());
    ExitCode::from(if e.is_config_error() { 2 } else { 3 })
}
