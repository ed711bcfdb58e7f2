use std::path::{Path, PathBuf};

use metastab::asymptotics::{asymptotics_row, Model};
use metastab::chain::{build_chain_x, ChainSummary};
use metastab::landscape::{analyze, LandscapeGraph};
use metastab::poisson::{Plateau, PoissonSolver};
use metastab::simulate::{batch, run_rng, SimConfig, Start, TraceOptions, RNG_ALGORITHM};
use metastab::verify::{short_time_bound, verify, ShortTimeRow, VerifyOptions, VerifyReport};
use metastab::{Builtin64, ChainY64};
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::CliError;
use crate::io::{self, fmt_f64, RunMeta};

pub const LANDSCAPE: &str = "landscape.json";
pub const CHAINS: &str = "chains.json";
pub const ASYMPTOTICS: &str = "asymptotics.csv";
pub const POISSON_CSV: &str = "poisson.csv";
pub const POISSON_JSON: &str = "poisson.json";
pub const JUMPS: &str = "jumps.csv";
pub const JUMPS_META: &str = "jumps.meta.json";
pub const VERIFY: &str = "verify.json";
pub const REPORT_TXT: &str = "report.txt";
pub const REPORT_CSV: &str = "report.csv";

pub const SHORT_TIME_GRID: [f64; 3] = [0.01, 0.05, 0.1];

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Analyze,
    Chains,
    Asymptotics,
    Poisson,
    Simulate,
    Verify,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 7] =
        [Stage::Analyze, Stage::Chains, Stage::Asymptotics, Stage::Poisson, Stage::Simulate, Stage::Verify, Stage::Report];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Analyze => "analyze",
            Stage::Chains => "chains",
            Stage::Asymptotics => "asymptotics",
            Stage::Poisson => "poisson",
            Stage::Simulate => "simulate",
            Stage::Verify => "verify",
            Stage::Report => "report",
        }
    }

    pub fn parse(s: &str) -> Result<Stage, CliError> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s.trim())
            .ok_or_else(|| CliError::Usage(format!("unknown stage `{s}`")))
    }
}

/// Inputs read and outputs written by one stage, plus the verification
/// verdict when the stage produced one.
#[derive(Debug, Default)]
pub struct StageOutput {
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub verdict: Option<bool>,
    pub message: Option<String>,
}

/// Explicit file locations from the command line. Anything left `None`
/// defaults to the standard name inside the output directory.
#[derive(Clone, Debug, Default)]
pub struct Paths {
    pub out: Option<PathBuf>,
    pub landscape: Option<PathBuf>,
    pub chains: Option<PathBuf>,
    pub jumps: Option<PathBuf>,
}

pub struct Ctx {
    pub config: Option<Config>,
    pub config_sha256: Option<String>,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub threads: Option<usize>,
    pub allow_single: bool,
    /// Pipeline mode: inputs must already be on disk, nothing is recomputed.
    pub strict: bool,
}

impl Ctx {
    fn config(&self, stage: Stage) -> Result<&Config, CliError> {
        self.config.as_ref().ok_or_else(|| CliError::Usage(format!("{} needs --config", stage.name())))
    }

    fn potential(&self, stage: Stage) -> Result<Builtin64, CliError> {
        Ok(self.config(stage)?.potential.instantiate()?)
    }

    fn default_path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn out_path(&self, paths: &Paths, name: &str) -> PathBuf {
        paths.out.clone().unwrap_or_else(|| self.default_path(name))
    }

    /// Reads an input artifact, or `None` when it is not on disk and a
    /// fallback is allowed.
    fn input<T: serde::de::DeserializeOwned>(
        &self,
        explicit: Option<&PathBuf>,
        name: &str,
        label: &str,
        required: bool,
        out: &mut StageOutput,
    ) -> Result<Option<T>, CliError> {
        let path = explicit.cloned().unwrap_or_else(|| self.default_path(name));
        if path.exists() {
            out.inputs.push(path.clone());
            return io::read_json(&path).map(Some);
        }
        if explicit.is_some() || required || self.strict {
            return Err(CliError::MissingArtifact(label.into()));
        }
        Ok(None)
    }

    fn analyze_now(&self, stage: Stage) -> Result<LandscapeGraph, CliError> {
        let cfg = self.config(stage)?;
        let pot = self.potential(stage)?;
        Ok(analyze(&pot, &cfg.potential.bounding_box, &cfg.landscape.search(), &cfg.landscape.options(self.allow_single))?)
    }

    fn landscape(&self, stage: Stage, paths: &Paths, out: &mut StageOutput) -> Result<LandscapeGraph, CliError> {
        match self.input(paths.landscape.as_ref(), LANDSCAPE, "landscape", false, out)? {
            Some(g) => Ok(g),
            None => self.analyze_now(stage),
        }
    }

    fn chains(&self, g: &LandscapeGraph, paths: &Paths, out: &mut StageOutput) -> Result<ChainSummary, CliError> {
        match self.input(paths.chains.as_ref(), CHAINS, "chains", false, out)? {
            Some(c) => Ok(c),
            None => Ok(ChainSummary::build(g)?),
        }
    }

    pub fn run(&self, stage: Stage, paths: &Paths) -> Result<StageOutput, CliError> {
        match stage {
            Stage::Analyze => self.analyze(paths),
            Stage::Chains => self.chain_stage(paths),
            Stage::Asymptotics => self.asymptotics(paths),
            Stage::Poisson => self.poisson(paths),
            Stage::Simulate => self.simulate(paths),
            Stage::Verify => self.verify(paths),
            Stage::Report => crate::report::report(&self.out_dir),
        }
    }

    fn analyze(&self, paths: &Paths) -> Result<StageOutput, CliError> {
        let g = self.analyze_now(Stage::Analyze)?;
        let path = self.out_path(paths, LANDSCAPE);
        io::write_json(&path, &g)?;
        Ok(StageOutput { outputs: vec![path], ..Default::default() })
    }

    fn chain_stage(&self, paths: &Paths) -> Result<StageOutput, CliError> {
        let mut out = StageOutput::default();
        let g = self.landscape(Stage::Chains, paths, &mut out)?;
        if g.s_star.len() < 2 {
            // nothing to coarse-grain onto, even when analyze accepted it
            return Err(metastab::Error::SingleDeepestWell(g.s_star.len()).into());
        }
        let summary = ChainSummary::build(&g)?;
        let path = self.out_path(paths, CHAINS);
        io::write_json(&path, &summary)?;
        out.outputs.push(path);
        Ok(out)
    }

    fn asymptotics(&self, paths: &Paths) -> Result<StageOutput, CliError> {
        let mut out = StageOutput::default();
        let cfg = self.config(Stage::Asymptotics)?;
        let pot = self.potential(Stage::Asymptotics)?;
        let g = self.landscape(Stage::Asymptotics, paths, &mut out)?;
        let x = build_chain_x(&g)?;
        let model = Model::new(&pot, &g);
        let mut header: Vec<String> = ["eps", "Z_quad", "Z_laplace", "ratio"].iter().map(|s| s.to_string()).collect();
        header.extend(g.s_star.iter().map(|i| format!("mu_V_{i}")));
        header.extend(["mu_Delta", "dirichlet_ratio", "generator_residual"].iter().map(|s| s.to_string()));
        let mut rows = Vec::new();
        for &eps in &cfg.asymptotics.eps {
            let r = asymptotics_row(&model, &x, eps)?;
            let mut row = vec![fmt_f64(r.epsilon), fmt_f64(r.z_quadrature), fmt_f64(r.z_laplace), fmt_f64(r.ratio)];
            row.extend(r.valleys.iter().map(|&v| fmt_f64(v)));
            row.extend([fmt_f64(r.delta), fmt_f64(r.dirichlet_ratio), fmt_f64(r.residual)]);
            rows.push(row);
        }
        let path = self.out_path(paths, ASYMPTOTICS);
        io::write_text(&path, &io::csv(&header, rows))?;
        out.outputs.push(path);
        Ok(out)
    }

    fn poisson(&self, paths: &Paths) -> Result<StageOutput, CliError> {
        let mut out = StageOutput::default();
        let cfg = self.config(Stage::Poisson)?;
        let pot = self.potential(Stage::Poisson)?;
        let g = self.landscape(Stage::Poisson, paths, &mut out)?;
        let chains = self.chains(&g, paths, &mut out)?;
        let chain = &chains.chain_y;
        let solver = PoissonSolver::new(&pot, &g, chain, cfg.poisson.eps)?;
        let (f, pair_basis) = match &cfg.poisson.f {
            Some(f) => (f.clone(), false),
            None => (chain.pair_basis(0, 1)?, true),
        };
        let sol = solver.solve(&f)?;
        let residual = solver.residual_check(&sol, 200, &mut run_rng(self.seed, 0));

        let csv_path = self.out_path(paths, POISSON_CSV);
        let json_path = csv_path.with_extension("json");
        let header: Vec<String> = ["x", "U", "phi"].iter().map(|s| s.to_string()).collect();
        let rows = sol.grid.iter().zip(&sol.phi).map(|(&x, &phi)| {
            use metastab::Potential;
            vec![fmt_f64(x), fmt_f64(pot.value(&[x])), fmt_f64(phi)]
        });
        io::write_text(&csv_path, &io::csv(&header, rows))?;
        let summary = PoissonSummary {
            epsilon: sol.epsilon,
            s_star: chain.s_star.clone(),
            f: sol.f.clone(),
            f_is_pair_basis: pair_basis,
            lambda_eps: sol.lambda_eps,
            energy: sol.energy,
            p: sol.p.clone(),
            a_eps: sol.a_eps.clone(),
            shift: sol.shift,
            plateaus: sol.plateaus.clone(),
            compatibility_defect: sol.compatibility_defect,
            relative_residual: residual,
            grid_points: sol.grid.len(),
        };
        io::write_json(&json_path, &summary)?;
        out.outputs.extend([csv_path, json_path]);
        Ok(out)
    }

    fn simulate(&self, paths: &Paths) -> Result<StageOutput, CliError> {
        let mut out = StageOutput::default();
        let cfg = self.config(Stage::Simulate)?;
        let sc = &cfg.simulate;
        let pot = self.potential(Stage::Simulate)?;
        let g = self.landscape(Stage::Simulate, paths, &mut out)?;
        let start = sc.start.or_else(|| g.s_star.first().copied()).ok_or(metastab::Error::SingleDeepestWell(0))?;
        let mut sim = SimConfig::new(sc.eps, &g, Start::Valley(start));
        if let Some(dt) = sc.dt {
            sim.dt = dt;
        }
        if let Some(m) = sc.max_steps {
            sim.max_steps = m;
        }
        sim.validate(&g)?;
        let opts = TraceOptions { horizon: sc.horizon, stop_after_jumps: sc.stop_after_jumps };
        let logs = batch(&pot, &g, &sim, &opts, sc.runs, self.seed, self.threads)?;

        let total: f64 = logs.iter().map(|l| l.total_time).sum();
        let delta: f64 = logs.iter().map(|l| l.delta_time).sum();
        let meta = SimMeta {
            epsilon: sim.epsilon,
            dt: sim.dt,
            theta: logs[0].theta,
            runs: sc.runs,
            horizon: sc.horizon,
            stop_after_jumps: sc.stop_after_jumps,
            start,
            base_seed: self.seed,
            rng_algorithm: RNG_ALGORITHM.to_string(),
            censored_count: logs.iter().flat_map(|l| &l.entries).filter(|e| e.censored).count(),
            censored_runs: logs.iter().filter(|l| l.censored).count(),
            total_jumps: logs.iter().map(|l| l.jumps()).sum(),
            delta_fraction: if total > 0.0 { delta / total } else { 0.0 },
            per_run: logs.iter().map(RunMeta::of).collect(),
        };
        let csv_path = self.out_path(paths, JUMPS);
        let meta_path = meta_path_for(&csv_path);
        io::write_text(&csv_path, &io::jumps_csv(&logs))?;
        io::write_json(&meta_path, &meta)?;
        out.outputs.extend([csv_path, meta_path]);
        Ok(out)
    }

    fn verify(&self, paths: &Paths) -> Result<StageOutput, CliError> {
        let mut out = StageOutput::default();
        let jumps_path = paths.jumps.clone().unwrap_or_else(|| self.default_path(JUMPS));
        if !jumps_path.exists() {
            return Err(CliError::MissingArtifact("jumps".into()));
        }
        let chains: ChainSummary =
            self.input(paths.chains.as_ref(), CHAINS, "chains", true, &mut out)?.expect("required input");
        let text = std::fs::read_to_string(&jumps_path).map_err(|e| CliError::io(&jumps_path, e))?;
        out.inputs.push(jumps_path.clone());
        let meta_path = meta_path_for(&jumps_path);
        let meta: Option<SimMeta> = if meta_path.exists() {
            out.inputs.push(meta_path.clone());
            Some(io::read_json(&meta_path)?)
        } else {
            None
        };
        let (theta, dt, per_run) = match &meta {
            Some(m) => (m.theta, m.dt, m.per_run.as_slice()),
            None => (f64::NAN, f64::NAN, &[][..]),
        };
        let logs = io::parse_jumps(&text, theta, dt, per_run)
            .map_err(|message| CliError::Parse { path: jumps_path.display().to_string(), message })?;
        let chain: &ChainY64 = &chains.chain_y;
        let report = verify(&logs, chain, &VerifyOptions::default())?;
        let short_time = short_time_bound(&logs, chain, &SHORT_TIME_GRID)?;
        let failed = report.checks.iter().filter(|c| !c.pass).count();
        let total = report.checks.len();
        let pass = report.pass;
        let doc = VerifyOutput {
            pass,
            runs: logs.len(),
            epsilon: meta.as_ref().map(|m| m.epsilon),
            theta: meta.as_ref().map(|m| m.theta),
            delta_fraction: meta.as_ref().map(|m| m.delta_fraction),
            short_time,
            report,
        };
        let path = self.out_path(paths, VERIFY);
        io::write_json(&path, &doc)?;
        out.outputs.push(path);
        out.verdict = Some(pass);
        if !pass {
            out.message = Some(CliError::VerificationFailed(failed, total).to_string());
        }
        Ok(out)
    }
}

/// `jumps.csv` -> `jumps.meta.json`.
pub fn meta_path_for(csv: &Path) -> PathBuf {
    let stem = csv.file_stem().map_or_else(|| "jumps".into(), |s| s.to_string_lossy().into_owned());
    csv.with_file_name(format!("{stem}.meta.json"))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoissonSummary {
    pub epsilon: f64,
    pub s_star: Vec<usize>,
    pub f: Vec<f64>,
    pub f_is_pair_basis: bool,
    pub lambda_eps: f64,
    pub energy: f64,
    pub p: Vec<f64>,
    pub a_eps: Vec<f64>,
    pub shift: f64,
    pub plateaus: Vec<Plateau>,
    pub compatibility_defect: f64,
    pub relative_residual: f64,
    pub grid_points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimMeta {
    pub epsilon: f64,
    pub dt: f64,
    pub theta: f64,
    pub runs: u64,
    pub horizon: f64,
    pub stop_after_jumps: Option<usize>,
    pub start: usize,
    pub base_seed: u64,
    pub rng_algorithm: String,
    /// Entries cut off by the end of their run.
    pub censored_count: usize,
    /// Runs stopped by the step budget.
    pub censored_runs: usize,
    pub total_jumps: usize,
    /// Raw time in Delta over raw time, pooled over runs.
    pub delta_fraction: f64,
    pub per_run: Vec<RunMeta>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyOutput {
    pub pass: bool,
    pub runs: usize,
    pub epsilon: Option<f64>,
    pub theta: Option<f64>,
    pub delta_fraction: Option<f64>,
    pub short_time: Vec<ShortTimeRow>,
    pub report: VerifyReport,
}
