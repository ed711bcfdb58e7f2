//! The `metastab` command line: one subcommand per pipeline stage plus
//! `run` (several stages in order) and `report`.

pub mod config;
pub mod error;
pub mod io;
pub mod manifest;
pub mod report;
pub mod stages;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::config::Config;
use crate::error::CliError;
use crate::manifest::{file_digest, sha256_hex, unix_now, RunManifest, StageRecord};
use crate::stages::{Ctx, Paths, Stage, StageOutput};

#[derive(Debug, Parser)]
#[command(name = "metastab", version, about = "Metastable diffusions: landscapes, limiting chains, asymptotics and simulation")]
pub struct Cli {
    /// JSON configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory for artifacts and the run manifest.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    /// Base seed (overrides the configuration).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for simulation batches.
    #[arg(long, global = true, env = "METASTAB_THREADS")]
    pub threads: Option<usize>,
    /// Accept a potential with a single deepest well.
    #[arg(long, global = true)]
    pub allow_single: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Critical points, wells, saddles and valleys.
    Analyze {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Chains x and y, generators and capacities.
    Chains {
        #[arg(long)]
        landscape: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Partition function, valley masses, Dirichlet energy and generator residual per eps.
    Asymptotics {
        #[arg(long)]
        landscape: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        eps: Option<Vec<f64>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One-dimensional Poisson equation.
    Poisson {
        #[arg(long)]
        landscape: Option<PathBuf>,
        #[arg(long)]
        chains: Option<PathBuf>,
        /// Values on the deepest wells, comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        f: Option<Vec<f64>>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Trace-process simulation.
    Simulate {
        #[arg(long)]
        landscape: Option<PathBuf>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        runs: Option<u64>,
        /// Rescaled trace-clock horizon per run.
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long)]
        stop_after_jumps: Option<usize>,
        #[arg(long)]
        dt: Option<f64>,
        /// Well id to start in.
        #[arg(long)]
        start: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Statistical checks of simulated jumps against chain y.
    Verify {
        #[arg(long)]
        jumps: Option<PathBuf>,
        #[arg(long)]
        chains: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Several stages in pipeline order, reading inputs from the output directory.
    Run {
        /// Comma-separated subset of analyze,chains,asymptotics,poisson,simulate,verify,report.
        #[arg(long, value_delimiter = ',')]
        stages: Option<Vec<String>>,
    },
    /// Summary tables from whatever artifacts are present.
    Report,
}

fn load_config(path: &PathBuf) -> Result<(Config, String), CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|_| CliError::Parse { path: path.display().to_string(), message: "not UTF-8".into() })?;
    let cfg = Config::parse(&text).map_err(|e| CliError::Parse { path: path.display().to_string(), message: e.to_string() })?;
    Ok((cfg, sha256_hex(&bytes)))
}

/// Folds subcommand flags into the configuration and collects file paths.
fn apply_overrides(cfg: Option<&mut Config>, command: &Command) -> Result<Paths, CliError> {
    let need = |what: &str| CliError::Usage(format!("--{what} needs --config"));
    let mut paths = Paths::default();
    match command {
        Command::Analyze { out } => paths.out = out.clone(),
        Command::Chains { landscape, out } => {
            paths.landscape = landscape.clone();
            paths.out = out.clone();
        }
        Command::Asymptotics { landscape, eps, out } => {
            paths.landscape = landscape.clone();
            paths.out = out.clone();
            if let Some(eps) = eps {
                cfg.ok_or_else(|| need("eps"))?.asymptotics.eps = eps.clone();
            }
        }
        Command::Poisson { landscape, chains, f, eps, out } => {
            paths.landscape = landscape.clone();
            paths.chains = chains.clone();
            paths.out = out.clone();
            if let Some(c) = cfg {
                if f.is_some() {
                    c.poisson.f = f.clone();
                }
                if let Some(e) = eps {
                    c.poisson.eps = *e;
                }
            }
        }
        Command::Simulate { landscape, eps, runs, horizon, stop_after_jumps, dt, start, out } => {
            paths.landscape = landscape.clone();
            paths.out = out.clone();
            if let Some(c) = cfg {
                let s = &mut c.simulate;
                s.eps = eps.unwrap_or(s.eps);
                s.runs = runs.unwrap_or(s.runs);
                s.horizon = horizon.unwrap_or(s.horizon);
                s.stop_after_jumps = stop_after_jumps.or(s.stop_after_jumps);
                s.dt = dt.or(s.dt);
                s.start = start.or(s.start);
            }
        }
        Command::Verify { jumps, chains, out } => {
            paths.jumps = jumps.clone();
            paths.chains = chains.clone();
            paths.out = out.clone();
        }
        Command::Run { .. } | Command::Report => {}
    }
    Ok(paths)
}

fn relative_name(ctx: &Ctx, p: &std::path::Path) -> String {
    p.strip_prefix(&ctx.out_dir).unwrap_or(p).display().to_string()
}

fn record(ctx: &Ctx, manifest: &mut RunManifest, stage: Stage, out: &StageOutput, started: u64) -> Result<(), CliError> {
    let digests = |files: &[PathBuf]| -> Result<_, CliError> {
        files.iter().map(|p| Ok((relative_name(ctx, p), file_digest(p)?))).collect()
    };
    manifest.record(StageRecord {
        stage: stage.name().into(),
        inputs: digests(&out.inputs)?,
        outputs: digests(&out.outputs)?,
        started,
        finished: unix_now(),
    });
    manifest.save(&ctx.out_dir)
}

fn fail(e: &CliError, stage: Option<Stage>) -> i32 {
    eprintln!("{}", e.to_json(stage.map(Stage::name)));
    e.exit_code()
}

/// Runs stages in order. Verification failures do not stop the pipeline but
/// make the exit code 1.
fn run_stages(ctx: &Ctx, stages: &[Stage], paths: &Paths, manifest: &mut RunManifest) -> i32 {
    let mut failed_verification: Option<String> = None;
    for &stage in stages {
        let started = unix_now();
        let out = match ctx.run(stage, paths) {
            Ok(out) => out,
            Err(e) => return fail(&e, Some(stage)),
        };
        if let Err(e) = record(ctx, manifest, stage, &out, started) {
            return fail(&e, Some(stage));
        }
        if let Some(msg) = &out.message {
            println!("{msg}");
        }
        if out.verdict == Some(false) {
            failed_verification = out.message.clone();
        }
        for p in &out.outputs {
            eprintln!("{}: wrote {}", stage.name(), p.display());
        }
    }
    match failed_verification {
        Some(msg) => {
            let body = serde_json::json!({"error": {"kind": "verification_failed", "message": msg, "exit_code": 1, "stage": "verify"}});
            eprintln!("{body}");
            1
        }
        None => 0,
    }
}

pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    if cli.threads == Some(0) {
        return fail(&CliError::Usage("--threads must be at least 1".into()), None);
    }
    let (mut config, config_sha256) = match &cli.config {
        Some(p) => match load_config(p) {
            Ok((c, h)) => (Some(c), Some(h)),
            Err(e) => return fail(&e, None),
        },
        None => (None, None),
    };
    let paths = match apply_overrides(config.as_mut(), &cli.command) {
        Ok(p) => p,
        Err(e) => return fail(&e, None),
    };
    let seed = cli.seed.or(config.as_ref().map(|c| c.seed)).unwrap_or(42);
    if let Err(e) = std::fs::create_dir_all(&cli.out_dir) {
        return fail(&CliError::io(&cli.out_dir, e), None);
    }

    let stages = match &cli.command {
        Command::Analyze { .. } => vec![Stage::Analyze],
        Command::Chains { .. } => vec![Stage::Chains],
        Command::Asymptotics { .. } => vec![Stage::Asymptotics],
        Command::Poisson { .. } => vec![Stage::Poisson],
        Command::Simulate { .. } => vec![Stage::Simulate],
        Command::Verify { .. } => vec![Stage::Verify],
        Command::Report => vec![Stage::Report],
        Command::Run { stages: Some(list) } => {
            let mut v = match list.iter().map(|s| Stage::parse(s)).collect::<Result<Vec<_>, _>>() {
                Ok(v) => v,
                Err(e) => return fail(&e, None),
            };
            v.sort();
            v.dedup();
            v
        }
        Command::Run { stages: None } => {
            // the Poisson solver is one-dimensional; leave it out elsewhere
            let one_d = config.as_ref().is_some_and(|c| c.potential.dim == 1);
            Stage::ALL.into_iter().filter(|s| *s != Stage::Poisson || one_d).collect()
        }
    };
    let ctx = Ctx {
        allow_single: cli.allow_single,
        config,
        config_sha256: config_sha256.clone(),
        out_dir: cli.out_dir.clone(),
        seed,
        threads: cli.threads,
        strict: matches!(cli.command, Command::Run { .. }),
    };
    let mut manifest = RunManifest::load_or_new(&ctx.out_dir, RunManifest::new(config_sha256, seed, cli.allow_single));
    run_stages(&ctx, &stages, &paths, &mut manifest)
}
