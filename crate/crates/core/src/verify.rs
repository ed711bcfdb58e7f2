//! Statistics of simulated trace logs against the limiting chain.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::chain::ChainY;
use crate::error::{Error, Result};
use crate::simulate::TraceJumpLog;

pub const MIN_KS_SAMPLE: usize = 50;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateStats {
    pub well: usize,
    /// Completed (uncensored) holdings.
    pub n_holdings: usize,
    pub mean_holding: f64,
    /// 95% t interval for the mean holding.
    pub ci: (f64, f64),
    /// Rescaled time over completed holdings.
    pub time: f64,
    /// Mean raw holding (time in Delta included), rescaled.
    pub mean_raw_holding: f64,
    /// Jump counts to each state, by position.
    pub jumps_to: Vec<usize>,
    /// `jumps / time`, `None` when no time was observed.
    pub rates: Vec<Option<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalChain {
    pub states: Vec<usize>,
    pub stats: Vec<StateStats>,
    /// Completed holdings divided by their state's mean.
    pub pooled_normalized: Vec<f64>,
    /// First completed holding of each run.
    pub first_holdings: Vec<f64>,
    pub censored: usize,
    pub entries: usize,
    pub delta_fractions: Vec<f64>,
}

impl EmpiricalChain {
    pub fn censor_fraction(&self) -> f64 {
        if self.entries == 0 {
            0.0
        } else {
            self.censored as f64 / self.entries as f64
        }
    }

    pub fn total_jumps(&self) -> usize {
        self.stats.iter().map(|s| s.jumps_to.iter().sum::<usize>()).sum()
    }
}

fn t_interval(xs: &[f64]) -> (f64, f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, f64::NEG_INFINITY, f64::INFINITY);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64).map(|d| d.inverse_cdf(0.975)).unwrap_or(1.96);
    let half = t * (var / n as f64).sqrt();
    (mean, mean - half, mean + half)
}

/// Counts and holding statistics over `states` (well ids). Censored entries
/// are excluded from both the holding sample and the rate denominators.
pub fn estimate_chain(logs: &[TraceJumpLog], states: &[usize]) -> Result<EmpiricalChain> {
    let n = states.len();
    let pos = |w: usize| -> Result<usize> {
        states.iter().position(|&s| s == w).ok_or_else(|| Error::InvalidStateSet(format!("log visits unknown well {w}")))
    };
    let mut holdings: Vec<Vec<f64>> = vec![Vec::new(); n];
    let mut raw: Vec<Vec<f64>> = vec![Vec::new(); n];
    let mut jumps = vec![vec![0usize; n]; n];
    let mut first_holdings = Vec::new();
    let (mut censored, mut entries) = (0, 0);
    for log in logs {
        for (k, e) in log.entries.iter().enumerate() {
            entries += 1;
            let p = pos(e.valley)?;
            if e.censored {
                censored += 1;
                continue;
            }
            holdings[p].push(e.holding);
            raw[p].push(e.raw_holding);
            if k == 0 {
                first_holdings.push(e.holding);
            }
            if let Some(next) = log.entries.get(k + 1) {
                jumps[p][pos(next.valley)?] += 1;
            }
        }
    }
    let mut stats = Vec::with_capacity(n);
    let mut pooled = Vec::new();
    for p in 0..n {
        let (mean, lo, hi) = t_interval(&holdings[p]);
        let time: f64 = holdings[p].iter().sum();
        if mean > 0.0 {
            pooled.extend(holdings[p].iter().map(|h| h / mean));
        }
        let rates = jumps[p].iter().map(|&c| if time > 0.0 { Some(c as f64 / time) } else { None }).collect();
        stats.push(StateStats {
            well: states[p],
            n_holdings: holdings[p].len(),
            mean_holding: mean,
            ci: (lo, hi),
            time,
            mean_raw_holding: raw[p].iter().sum::<f64>() / raw[p].len().max(1) as f64,
            jumps_to: jumps[p].clone(),
            rates,
        });
    }
    Ok(EmpiricalChain {
        states: states.to_vec(),
        stats,
        pooled_normalized: pooled,
        first_holdings,
        censored,
        entries,
        delta_fractions: logs.iter().map(|l| l.delta_fraction()).collect(),
    })
}

/// Survival function of the Kolmogorov distribution,
/// `2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 x^2)`.
pub fn kolmogorov_survival(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 0.3 {
        // the alternating series converges slowly here; use the dual form
        let s: f64 = (1..=50)
            .map(|k| {
                let m = (2 * k - 1) as f64;
                (-(m * m) * std::f64::consts::PI.powi(2) / (8.0 * x * x)).exp()
            })
            .sum();
        return (1.0 - (2.0 * std::f64::consts::PI).sqrt() / x * s).clamp(0.0, 1.0);
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * x * x).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// `sup |F_n - F|` for an arbitrary continuous CDF.
pub fn ks_statistic<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> f64 {
    let mut xs = sample.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub n: usize,
    pub statistic: f64,
    pub p_value: f64,
}

/// One-sample KS test against the mean-one exponential.
pub fn exponentiality_test(sample: &[f64]) -> Result<KsResult> {
    if sample.len() < MIN_KS_SAMPLE {
        return Err(Error::SampleTooSmall { got: sample.len(), min: MIN_KS_SAMPLE });
    }
    let d = ks_statistic(sample, |t| if t <= 0.0 { 0.0 } else { 1.0 - (-t).exp() });
    let n = sample.len();
    Ok(KsResult { n, statistic: d, p_value: kolmogorov_survival((n as f64).sqrt() * d) })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub epsilon: f64,
    pub runs: usize,
    pub mean_fraction: f64,
    pub std_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaTrend {
    /// Sorted by decreasing epsilon.
    pub rows: Vec<DeltaRow>,
    pub strictly_decreasing: bool,
}

/// Mean Delta fraction per epsilon.
pub fn delta_negligibility(groups: &[(f64, &[TraceJumpLog])]) -> Result<DeltaTrend> {
    if groups.len() < 2 {
        return Err(Error::Precondition("the Delta trend needs at least two epsilon values".into()));
    }
    let mut rows: Vec<DeltaRow> = groups
        .iter()
        .map(|(eps, logs)| {
            let f: Vec<f64> = logs.iter().map(|l| l.delta_fraction()).collect();
            let n = f.len();
            let mean = f.iter().sum::<f64>() / n.max(1) as f64;
            let var = if n > 1 { f.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
            DeltaRow { epsilon: *eps, runs: n, mean_fraction: mean, std_error: (var / n.max(1) as f64).sqrt() }
        })
        .collect();
    rows.sort_by(|a, b| b.epsilon.partial_cmp(&a.epsilon).unwrap());
    let strictly_decreasing = rows.windows(2).all(|w| w[1].mean_fraction < w[0].mean_fraction);
    Ok(DeltaTrend { rows, strictly_decreasing })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShortTimeRow {
    pub a: f64,
    pub n: usize,
    pub empirical: f64,
    pub predicted: f64,
    /// Binomial standard deviation under the prediction.
    pub sigma: f64,
    pub within_3_sigma: bool,
}

/// Empirical `P[first rescaled transition <= a]` against `1 - exp(-r a)`,
/// `r` the chain's exit rate from each run's starting state. Runs censored
/// before `a` without a transition are left out at that `a`.
pub fn short_time_bound(logs: &[TraceJumpLog], chain: &ChainY<f64>, a_grid: &[f64]) -> Result<Vec<ShortTimeRow>> {
    let mut firsts = Vec::with_capacity(logs.len());
    for log in logs {
        let Some(e) = log.entries.first() else { continue };
        let p = chain.index_of(e.valley).ok_or_else(|| Error::InvalidStateSet(format!("well {} not deepest", e.valley)))?;
        firsts.push((e.holding, e.censored, chain.exit_rate(p)));
    }
    Ok(a_grid
        .iter()
        .map(|&a| {
            let usable: Vec<&(f64, bool, f64)> = firsts.iter().filter(|(h, c, _)| !*c || *h > a).collect();
            let n = usable.len();
            let hits = usable.iter().filter(|(h, c, _)| !*c && *h <= a).count();
            let empirical = if n > 0 { hits as f64 / n as f64 } else { f64::NAN };
            let predicted = usable.iter().map(|(_, _, r)| 1.0 - (-r * a).exp()).sum::<f64>() / n.max(1) as f64;
            let sigma = (predicted * (1.0 - predicted) / n.max(1) as f64).sqrt();
            let within_3_sigma = (empirical - predicted).abs() <= 3.0 * sigma + 1e-12;
            ShortTimeRow { a, n, empirical, predicted, sigma, within_3_sigma }
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub threshold: String,
    pub n: usize,
    pub value: f64,
    pub target: f64,
    pub pass: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub holding_tol: f64,
    pub rate_tol: f64,
    pub sigmas: f64,
    pub ks_alpha: f64,
    pub max_censor: f64,
    pub occupation_batches: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { holding_tol: 0.15, rate_tol: 0.15, sigmas: 3.0, ks_alpha: 0.01, max_censor: 0.1, occupation_batches: 20 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub empirical: EmpiricalChain,
    pub ks: Option<KsResult>,
    pub occupation: Vec<f64>,
    pub checks: Vec<Check>,
    pub pass: bool,
}

/// Occupation fractions of the trace clock with batch-means standard errors
/// over consecutive blocks of the pooled entry sequence.
fn occupation(logs: &[TraceJumpLog], chain: &ChainY<f64>, batches: usize) -> (Vec<f64>, Vec<f64>) {
    let n = chain.len();
    let seq: Vec<(usize, f64)> = logs
        .iter()
        .flat_map(|l| l.entries.iter())
        .filter_map(|e| chain.index_of(e.valley).map(|p| (p, e.holding)))
        .collect();
    let frac = |part: &[(usize, f64)]| -> Vec<f64> {
        let total: f64 = part.iter().map(|e| e.1).sum();
        (0..n).map(|p| part.iter().filter(|e| e.0 == p).map(|e| e.1).sum::<f64>() / total).collect()
    };
    let overall = frac(&seq);
    let b = batches.min(seq.len() / 2).max(1);
    if b < 2 {
        return (overall, vec![f64::INFINITY; n]);
    }
    let size = seq.len() / b;
    let blocks: Vec<Vec<f64>> = (0..b).map(|k| frac(&seq[k * size..(k + 1) * size])).collect();
    let se = (0..n)
        .map(|p| {
            let m = blocks.iter().map(|v| v[p]).sum::<f64>() / b as f64;
            let var = blocks.iter().map(|v| (v[p] - m).powi(2)).sum::<f64>() / (b - 1) as f64;
            (var / b as f64).sqrt()
        })
        .collect();
    (overall, se)
}

/// All checks of simulated logs against `chain`.
pub fn verify(logs: &[TraceJumpLog], chain: &ChainY<f64>, opts: &VerifyOptions) -> Result<VerifyReport> {
    let emp = estimate_chain(logs, &chain.s_star)?;
    let n = chain.len();
    let mut checks = Vec::new();
    let cf = emp.censor_fraction();
    checks.push(Check {
        name: "censor fraction".into(),
        threshold: format!("< {}", opts.max_censor),
        n: emp.entries,
        value: cf,
        target: 0.0,
        pass: cf < opts.max_censor,
    });
    for p in 0..n {
        let s = &emp.stats[p];
        let pred = chain.mean_holding(p);
        checks.push(Check {
            name: format!("mean holding in {}", s.well),
            threshold: format!("within {}% of nu_i / sum_j beta_ij", opts.holding_tol * 100.0),
            n: s.n_holdings,
            value: s.mean_holding,
            target: pred,
            pass: s.n_holdings > 0 && (s.mean_holding / pred - 1.0).abs() <= opts.holding_tol,
        });
        let exits: usize = s.jumps_to.iter().sum();
        for q in 0..n {
            if q == p {
                continue;
            }
            let prob = chain.jump_probability(p, q);
            let got = if exits > 0 { s.jumps_to[q] as f64 / exits as f64 } else { f64::NAN };
            let sigma = (prob * (1.0 - prob) / exits.max(1) as f64).sqrt();
            checks.push(Check {
                name: format!("jump probability {} -> {}", s.well, chain.s_star[q]),
                threshold: format!("within {} binomial sigma", opts.sigmas),
                n: exits,
                value: got,
                target: prob,
                pass: exits > 0 && (got - prob).abs() <= opts.sigmas * sigma + 1e-12,
            });
            let rate = chain.rate(p, q);
            let got_rate = s.rates[q].unwrap_or(f64::NAN);
            let pass = if rate == 0.0 { s.jumps_to[q] == 0 } else { (got_rate / rate - 1.0).abs() <= opts.rate_tol };
            checks.push(Check {
                name: format!("rate {} -> {}", s.well, chain.s_star[q]),
                threshold: format!("within {}% of beta_ij / nu_i", opts.rate_tol * 100.0),
                n: s.jumps_to[q],
                value: got_rate,
                target: rate,
                pass,
            });
        }
    }
    let ks = exponentiality_test(&emp.pooled_normalized).ok();
    checks.push(Check {
        name: "exponential holdings (KS)".into(),
        threshold: format!("p > {} with n >= {MIN_KS_SAMPLE}", opts.ks_alpha),
        n: emp.pooled_normalized.len(),
        value: ks.map_or(f64::NAN, |k| k.p_value),
        target: opts.ks_alpha,
        pass: ks.is_some_and(|k| k.p_value > opts.ks_alpha),
    });
    let (occ, se) = occupation(logs, chain, opts.occupation_batches);
    for p in 0..n {
        checks.push(Check {
            name: format!("occupation of {}", chain.s_star[p]),
            threshold: format!("within {} batch-means sigma of mu_star", opts.sigmas),
            n: emp.entries,
            value: occ[p],
            target: chain.mu_star[p],
            pass: (occ[p] - chain.mu_star[p]).abs() <= opts.sigmas * se[p] + 1e-12,
        });
    }
    let pass = checks.iter().all(|c| c.pass);
    Ok(VerifyReport { empirical: emp, ks, occupation: occ, checks, pass })
}
