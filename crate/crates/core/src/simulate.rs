//! Euler-Maruyama simulation of `dx = -grad U dt + sqrt(2 eps) dW`, hitting
//! times, and the trace process on the deepest valleys.
//!
//! Every run draws from its own ChaCha8 stream: the base seed keys the
//! generator and the run index selects the stream, so a batch is identical
//! under any thread count or schedule.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::ChainY;
use crate::error::{Error, Result};
use crate::landscape::LandscapeGraph;
use crate::potential::Potential;

pub const RNG_ALGORITHM: &str = "ChaCha8Rng(seed_from_u64(base_seed), stream = run index)";

/// Generator for run `run` of a batch keyed by `base_seed`.
pub fn run_rng(base_seed: u64, run: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(run);
    rng
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Start {
    Point(Vec<f64>),
    /// The lowest minimum of a well (by id).
    Valley(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub epsilon: f64,
    pub dt: f64,
    pub max_steps: u64,
    pub start: Start,
}

/// `min(eps/10, 1e-3, 0.1 / max curvature)`.
pub fn default_dt(epsilon: f64, graph: &LandscapeGraph) -> f64 {
    let curv = graph.max_curvature();
    let stab = if curv > 0.0 { 0.1 / curv } else { f64::INFINITY };
    (epsilon / 10.0).min(1e-3).min(stab)
}

impl SimConfig {
    pub fn new(epsilon: f64, graph: &LandscapeGraph, start: Start) -> Self {
        let dt = if epsilon > 0.0 { default_dt(epsilon, graph) } else { 1e-3f64.min(0.1 / graph.max_curvature()) };
        Self { epsilon, dt, max_steps: 10_000_000_000, start }
    }

    pub fn validate(&self, graph: &LandscapeGraph) -> Result<()> {
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidParameter(format!("epsilon = {} must be nonnegative", self.epsilon)));
        }
        if !(self.dt > 0.0) {
            return Err(Error::InvalidParameter("dt must be positive".into()));
        }
        if self.epsilon > 0.0 && self.dt > self.epsilon / 4.0 {
            return Err(Error::InvalidParameter(format!("dt = {} exceeds eps/4", self.dt)));
        }
        let curv = graph.max_curvature();
        if curv > 0.0 && self.dt > 0.1 / curv {
            return Err(Error::InvalidParameter(format!("dt = {} exceeds 0.1 / curvature {curv}", self.dt)));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidParameter("max_steps must be positive".into()));
        }
        Ok(())
    }

    pub fn start_point(&self, graph: &LandscapeGraph) -> Result<Vec<f64>> {
        match &self.start {
            Start::Point(p) => {
                if p.len() != graph.dim {
                    return Err(Error::DimensionMismatch { expected: graph.dim, got: p.len() });
                }
                Ok(p.clone())
            }
            Start::Valley(id) => graph
                .wells
                .iter()
                .find(|w| w.id == *id)
                .map(|w| w.minima[0].location.clone())
                .ok_or_else(|| Error::InvalidStateSet(format!("no well {id}"))),
        }
    }
}

/// One Euler-Maruyama integrator bound to a potential.
pub struct Stepper<'a, P: ?Sized> {
    pot: &'a P,
    dt: f64,
    noise: f64,
    grad: Vec<f64>,
    guard: Vec<[f64; 2]>,
}

impl<'a, P: Potential<f64> + ?Sized> Stepper<'a, P> {
    pub fn new(pot: &'a P, epsilon: f64, dt: f64, bbox: &[[f64; 2]]) -> Self {
        let guard = bbox
            .iter()
            .map(|r| {
                let (c, h) = (0.5 * (r[0] + r[1]), r[1] - r[0]);
                [c - h, c + h]
            })
            .collect();
        Self { pot, dt, noise: (2.0 * epsilon * dt).sqrt(), grad: vec![0.0; pot.dim()], guard }
    }

    /// `x <- x - grad U(x) dt + sqrt(2 eps dt) xi`.
    pub fn step<R: Rng>(&mut self, x: &mut [f64], rng: &mut R) -> Result<()> {
        self.pot.gradient(x, &mut self.grad);
        for (xi, g) in x.iter_mut().zip(&self.grad) {
            let z: f64 = if self.noise > 0.0 { StandardNormal.sample(rng) } else { 0.0 };
            *xi += -g * self.dt + self.noise * z;
        }
        Ok(())
    }

    fn check(&self, x: &[f64], step: u64) -> Result<()> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged { step, reason: "non-finite state".into() });
        }
        if x.iter().zip(&self.guard).any(|(v, g)| *v < g[0] || *v > g[1]) {
            return Err(Error::Diverged { step, reason: format!("left twice the bounding box at {x:?}") });
        }
        Ok(())
    }
}

/// Single step, for callers that drive their own loop.
pub fn step<P: Potential<f64> + ?Sized, R: Rng>(pot: &P, x: &[f64], epsilon: f64, dt: f64, rng: &mut R) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    pot.gradient(x, &mut g);
    let noise = (2.0 * epsilon * dt).sqrt();
    x.iter()
        .zip(&g)
        .map(|(xi, gi)| {
            let z: f64 = if noise > 0.0 { StandardNormal.sample(rng) } else { 0.0 };
            xi - gi * dt + noise * z
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    /// Union of the valleys of these wells.
    Valleys(Vec<usize>),
    /// Complement of the union of these valleys.
    OutsideValleys(Vec<usize>),
    Ball { center: Vec<f64>, radius: f64 },
}

impl Target {
    fn hit(&self, graph: &LandscapeGraph, x: &[f64]) -> bool {
        let in_valleys = |ids: &[usize]| match graph.locate(x) {
            crate::landscape::Location::Valley(i) => ids.contains(&i),
            crate::landscape::Location::Delta => false,
        };
        match self {
            Target::Valleys(ids) => in_valleys(ids),
            Target::OutsideValleys(ids) => !in_valleys(ids),
            Target::Ball { center, radius } => crate::potential::distance(center, x) < *radius,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub time: f64,
    pub steps: u64,
    pub exit_point: Vec<f64>,
    /// `max_steps` ran out before the target was reached.
    pub censored: bool,
}

/// First step index `k` with `x(k dt)` in the target.
pub fn hitting_time<P: Potential<f64> + ?Sized, R: Rng>(
    pot: &P,
    graph: &LandscapeGraph,
    cfg: &SimConfig,
    target: &Target,
    rng: &mut R,
) -> Result<Hit> {
    cfg.validate(graph)?;
    let mut x = cfg.start_point(graph)?;
    let mut st = Stepper::new(pot, cfg.epsilon, cfg.dt, &graph.bounding_box);
    let mut k = 0u64;
    while !target.hit(graph, &x) {
        if k == cfg.max_steps {
            return Ok(Hit { time: k as f64 * cfg.dt, steps: k, exit_point: x, censored: true });
        }
        st.step(&mut x, rng)?;
        k += 1;
        st.check(&x, k)?;
    }
    Ok(Hit { time: k as f64 * cfg.dt, steps: k, exit_point: x, censored: false })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub valley: usize,
    /// Trace-clock time in this valley divided by theta.
    pub holding: f64,
    /// The run ended before the process left this valley.
    pub censored: bool,
    /// Raw time from entering this valley to entering the next one, divided
    /// by theta (includes time spent in Delta).
    pub raw_holding: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceJumpLog {
    pub run: u64,
    pub entries: Vec<TraceEntry>,
    /// Raw time in Delta.
    pub delta_time: f64,
    /// Raw simulated time.
    pub total_time: f64,
    pub steps: u64,
    pub theta: f64,
    pub dt: f64,
    /// Raw time until the first change of valley, if any.
    pub first_transition_raw: Option<f64>,
    /// `max_steps` ran out.
    pub censored: bool,
}

impl TraceJumpLog {
    pub fn delta_fraction(&self) -> f64 {
        if self.total_time > 0.0 {
            self.delta_time / self.total_time
        } else {
            0.0
        }
    }

    pub fn jumps(&self) -> usize {
        self.entries.len().saturating_sub(1)
    }

    /// Trace time (rescaled) summed over entries.
    pub fn trace_time(&self) -> f64 {
        self.entries.iter().map(|e| e.holding).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceOptions {
    /// Stop once this much rescaled trace time has accumulated.
    pub horizon: f64,
    /// Stop on entering the valley that completes this many jumps.
    pub stop_after_jumps: Option<usize>,
}

/// Rescaled trace process. The step `k -> k+1` is credited to the region of
/// `x((k+1) dt)`.
pub fn trace_run<P: Potential<f64> + ?Sized, R: Rng>(
    pot: &P,
    graph: &LandscapeGraph,
    cfg: &SimConfig,
    opts: &TraceOptions,
    run: u64,
    rng: &mut R,
) -> Result<TraceJumpLog> {
    use crate::landscape::Location;
    cfg.validate(graph)?;
    // at eps = 0 theta is infinite and every rescaled holding is zero
    let theta = ((graph.level - graph.global_min) / cfg.epsilon).exp();
    let mut x = cfg.start_point(graph)?;
    let Location::Valley(mut current) = graph.locate(&x) else {
        return Err(Error::Precondition("trace run must start inside a deepest valley".into()));
    };
    let centers = graph.valley_centers();
    let r2 = graph.valley_radius * graph.valley_radius;
    let locate = |x: &[f64]| -> Option<usize> {
        centers.iter().find(|(c, _)| c.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() < r2).map(|(_, i)| *i)
    };

    let mut st = Stepper::new(pot, cfg.epsilon, cfg.dt, &graph.bounding_box);
    let horizon_steps = (opts.horizon * theta / cfg.dt).ceil().min(u64::MAX as f64 / 2.0) as u64;
    let mut entries: Vec<TraceEntry> = Vec::new();
    let (mut in_entry, mut raw_entry) = (0u64, 0u64);
    let (mut trace_steps, mut delta_steps, mut k) = (0u64, 0u64, 0u64);
    let mut first_transition = None;
    let scale = cfg.dt / theta;
    let mut censored = false;
    loop {
        if trace_steps >= horizon_steps {
            break;
        }
        if k == cfg.max_steps {
            censored = true;
            break;
        }
        st.step(&mut x, rng)?;
        k += 1;
        if k % 1024 == 0 {
            st.check(&x, k)?;
        }
        raw_entry += 1;
        match locate(&x) {
            Some(i) => {
                if i != current {
                    entries.push(TraceEntry {
                        valley: current,
                        holding: in_entry as f64 * scale,
                        censored: false,
                        raw_holding: (raw_entry - 1) as f64 * scale,
                    });
                    first_transition.get_or_insert(k as f64 * cfg.dt);
                    current = i;
                    in_entry = 0;
                    raw_entry = 1;
                }
                in_entry += 1;
                trace_steps += 1;
                if opts.stop_after_jumps.is_some_and(|n| entries.len() >= n) {
                    break;
                }
            }
            None => delta_steps += 1,
        }
    }
    st.check(&x, k)?;
    entries.push(TraceEntry {
        valley: current,
        holding: in_entry as f64 * scale,
        censored: true,
        raw_holding: raw_entry as f64 * scale,
    });
    Ok(TraceJumpLog {
        run,
        entries,
        delta_time: delta_steps as f64 * cfg.dt,
        total_time: k as f64 * cfg.dt,
        steps: k,
        theta,
        dt: cfg.dt,
        first_transition_raw: first_transition,
        censored,
    })
}

/// `n_runs` independent trace runs; run `r` uses [`run_rng`]`(base_seed, r)`.
/// With `threads = None` the global rayon pool is used.
pub fn batch<P: Potential<f64> + Sync + ?Sized>(
    pot: &P,
    graph: &LandscapeGraph,
    cfg: &SimConfig,
    opts: &TraceOptions,
    n_runs: u64,
    base_seed: u64,
    threads: Option<usize>,
) -> Result<Vec<TraceJumpLog>> {
    if n_runs == 0 {
        return Err(Error::InvalidParameter("n_runs must be at least 1".into()));
    }
    let work = || -> Vec<Result<TraceJumpLog>> {
        (0..n_runs)
            .into_par_iter()
            .map(|r| trace_run(pot, graph, cfg, opts, r, &mut run_rng(base_seed, r)))
            .collect()
    };
    let results = match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    };
    let failed: Vec<String> =
        results.iter().enumerate().filter_map(|(r, x)| x.as_ref().err().map(|e| format!("run {r}: {e}"))).collect();
    if let Some(first) = failed.first() {
        return Err(Error::Batch { failed: failed.len(), total: n_runs as usize, first: first.clone() });
    }
    Ok(results.into_iter().map(|r| r.unwrap()).collect())
}

/// Direct simulation of the limiting chain: `n_jumps` jumps from state
/// `start` (position in `chain.s_star`), holdings exponential with the exit
/// rate. The log uses well ids and theta = 1.
pub fn simulate_chain<R: Rng>(chain: &ChainY<f64>, start: usize, n_jumps: usize, run: u64, rng: &mut R) -> Result<TraceJumpLog> {
    let n = chain.len();
    if start >= n {
        return Err(Error::InvalidStateSet(format!("start {start} out of range")));
    }
    let mut entries = Vec::with_capacity(n_jumps + 1);
    let mut s = start;
    let mut t = 0.0;
    for k in 0..=n_jumps {
        let rate = chain.exit_rate(s);
        if !(rate > 0.0) {
            return Err(Error::ZeroRate(chain.s_star[s]));
        }
        let h = Exp::new(rate).map_err(|e| Error::InvalidParameter(e.to_string()))?.sample(rng);
        t += h;
        entries.push(TraceEntry { valley: chain.s_star[s], holding: h, censored: k == n_jumps, raw_holding: h });
        if k == n_jumps {
            break;
        }
        let mut u: f64 = rng.random::<f64>() * rate;
        let mut next = s;
        for q in 0..n {
            if q == s {
                continue;
            }
            next = q;
            u -= chain.rate(s, q);
            if u < 0.0 {
                break;
            }
        }
        s = next;
    }
    Ok(TraceJumpLog {
        run,
        entries,
        delta_time: 0.0,
        total_time: t,
        steps: 0,
        theta: 1.0,
        dt: 0.0,
        first_transition_raw: None,
        censored: false,
    })
}
