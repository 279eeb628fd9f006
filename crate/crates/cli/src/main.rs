use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use shockfront_cli::config::ContourSpec;
use shockfront_cli::{run, CliError, Command, Format, RunConfig};

/// Shock-fronted travelling waves: construction, spectrum and simulation.
#[derive(Parser)]
#[command(name = "shockfront", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; flags below override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Cap on worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Wave file for downstream stages.
    #[arg(long, global = true)]
    wave_file: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Sub {
    /// Singular wavespeed and the ε > 0 wave by collocation.
    Wave {
        #[arg(long)]
        eps: Option<f64>,
    },
    /// Fredholm borders and region signatures.
    Essential,
    /// Riccati–Evans values at configured λ.
    Evans,
    /// Winding number on a contour, or root/pole localization.
    Winding {
        /// Circle radius (centre from --center) or semicircle radius.
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long, num_args = 2, allow_hyphen_values = true)]
        center: Option<Vec<f64>>,
        /// Use the semicircle with an origin detour of this radius.
        #[arg(long)]
        detour: Option<f64>,
        #[arg(long)]
        localize: bool,
    },
    /// Fast projective probe scan.
    Fast {
        #[arg(long, num_args = 2, allow_hyphen_values = true)]
        interval: Option<Vec<f64>>,
        #[arg(long)]
        n: Option<usize>,
    },
    /// Slow reduced eigenvalues.
    Slow {
        #[arg(long, num_args = 2, allow_hyphen_values = true)]
        interval: Option<Vec<f64>>,
        #[arg(long)]
        section: Option<f64>,
    },
    /// Perturbed-wave simulation.
    Simulate {
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long)]
        amplitude: Option<f64>,
    },
    /// The whole pipeline with a comparison table.
    ReproduceAll,
}

fn pair(v: Vec<f64>) -> (f64, f64) {
    (v[0], v[1])
}

fn resolve(cli: Cli) -> Result<RunConfig, CliError> {
    let command = match &cli.command {
        Sub::Wave { .. } => Command::Wave,
        Sub::Essential => Command::Essential,
        Sub::Evans => Command::Evans,
        Sub::Winding { .. } => Command::Winding,
        Sub::Fast { .. } => Command::Fast,
        Sub::Slow { .. } => Command::Slow,
        Sub::Simulate { .. } => Command::Simulate,
        Sub::ReproduceAll => Command::ReproduceAll,
    };
    let mut cfg = match &cli.common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::new(command),
    };
    cfg.command = command;
    let c = cli.common;
    if let Some(d) = c.output_dir {
        cfg.output_dir = d;
    }
    if let Some(f) = c.format {
        cfg.format = f;
    }
    if c.threads.is_some() {
        cfg.threads = c.threads;
    }
    if c.wave_file.is_some() {
        cfg.wave.file = c.wave_file;
    }
    match cli.command {
        Sub::Wave { eps } => {
            if let Some(e) = eps {
                cfg.wave.eps = e;
            }
        }
        Sub::Winding { radius, center, detour, localize } => {
            if localize {
                cfg.winding.contour = ContourSpec::Localize;
            } else if let Some(d) = detour {
                cfg.winding.contour = ContourSpec::SemicircleWithDetour { radius: radius.unwrap_or(1e5), detour: d };
            } else if let Some(r) = radius {
                let ctr = center.map(|v| [v[0], v[1]]).unwrap_or([0.0, 0.0]);
                cfg.winding.contour = ContourSpec::Circle { center: ctr, radius: r };
            }
        }
        Sub::Fast { interval, n } => {
            if let Some(i) = interval {
                cfg.fast.interval = pair(i);
            }
            if let Some(n) = n {
                cfg.fast.n = n;
            }
        }
        Sub::Slow { interval, section } => {
            if let Some(i) = interval {
                cfg.slow.interval = pair(i);
            }
            if let Some(s) = section {
                cfg.slow.options.section = s;
            }
        }
        Sub::Simulate { t_end, amplitude } => {
            if let Some(t) = t_end {
                cfg.simulate.sim.t_end = t;
            }
            if let Some(a) = amplitude {
                cfg.simulate.sim.perturbation.amplitude = a;
            }
        }
        Sub::Essential | Sub::Evans | Sub::ReproduceAll => {}
    }
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match resolve(cli).and_then(|cfg| run(&cfg)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("shockfront: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
