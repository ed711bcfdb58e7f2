use metastab::landscape::{LandscapeOptions, Level, SearchOptions};
use metastab::PotentialSpec;
use serde::{Deserialize, Serialize};

/// Pipeline configuration. Every section except `potential` has defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub potential: PotentialSpec,
    #[serde(default)]
    pub landscape: LandscapeConfig,
    #[serde(default)]
    pub asymptotics: AsymptoticsConfig,
    #[serde(default)]
    pub poisson: PoissonConfig,
    #[serde(default)]
    pub simulate: SimulateConfig,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_seed() -> u64 {
    42
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LandscapeConfig {
    /// Fixed saddle height; chosen automatically when absent.
    pub level: Option<f64>,
    pub tolerance: f64,
    pub allow_single: bool,
    /// Newton seeds per axis.
    pub grid_density: usize,
}

impl Default for LandscapeConfig {
    fn default() -> Self {
        let o = LandscapeOptions::default();
        Self { level: None, tolerance: o.tolerance, allow_single: o.allow_single, grid_density: SearchOptions::default().grid_density }
    }
}

impl LandscapeConfig {
    pub fn options(&self, allow_single: bool) -> LandscapeOptions {
        LandscapeOptions {
            level: self.level.map_or(Level::Auto, Level::Fixed),
            tolerance: self.tolerance,
            allow_single: self.allow_single || allow_single,
        }
    }

    pub fn search(&self) -> SearchOptions {
        SearchOptions { grid_density: self.grid_density, ..Default::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AsymptoticsConfig {
    pub eps: Vec<f64>,
}

impl Default for AsymptoticsConfig {
    fn default() -> Self {
        Self { eps: vec![0.1, 0.05, 0.02] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PoissonConfig {
    pub eps: f64,
    /// Values on the deepest wells; the pair basis of the first two when absent.
    pub f: Option<Vec<f64>>,
}

impl Default for PoissonConfig {
    fn default() -> Self {
        Self { eps: 0.05, f: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    pub eps: f64,
    pub runs: u64,
    /// Rescaled trace-clock horizon per run.
    pub horizon: f64,
    pub stop_after_jumps: Option<usize>,
    /// Step size; `min(eps/10, 1e-3, 0.1/curvature)` when absent.
    pub dt: Option<f64>,
    /// Well id to start from; the first deepest well when absent.
    pub start: Option<usize>,
    pub max_steps: Option<u64>,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self { eps: 0.12, runs: 400, horizon: 20.0, stop_after_jumps: None, dt: None, start: None, max_steps: None }
    }
}

impl Config {
    pub fn for_builtin(name: &str) -> metastab::Result<Self> {
        Ok(Self {
            potential: PotentialSpec::builtin(name)?,
            landscape: Default::default(),
            asymptotics: Default::default(),
            poisson: Default::default(),
            simulate: Default::default(),
            seed: default_seed(),
        })
    }

    pub fn parse(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}
