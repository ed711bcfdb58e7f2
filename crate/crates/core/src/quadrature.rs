//! Globally adaptive Gauss-Kronrod (G7/K15) quadrature, plus a nested
//! two-dimensional rule for regions bounded by graphs `y = lo(x)`, `y = hi(x)`.
//!
//! Integrands in this crate are Boltzmann weights `exp(-(U - h) / eps)`,
//! sharply peaked at the minima. Callers pass breakpoints at the known peak
//! locations and an initial uniform partition so that no peak is missed by
//! the first panel.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.000_000_000_000_000_0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Clone, Copy, Debug)]
pub struct QuadOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_intervals: usize,
    /// Number of equal pieces each breakpoint interval is split into before
    /// adaptation starts.
    pub initial_pieces: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self { rel_tol: 1e-8, abs_tol: 0.0, max_intervals: 20_000, initial_pieces: 8 }
    }
}

impl QuadOptions {
    pub fn rel(rel_tol: f64) -> Self {
        Self { rel_tol, ..Self::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quad {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

/// One 15-point Kronrod panel: returns (integral, error estimate).
pub fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        kronrod += WGK[j] * (f1 + f2);
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let k = kronrod * half;
    let g = gauss * half;
    (k, (k - g).abs())
}

#[derive(Debug)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.partial_cmp(&other.error).unwrap_or(Ordering::Equal)
    }
}

/// Integrates `f` over `[a, b]` with extra breakpoints (ignored when outside
/// the interval).
pub fn integrate_with_breakpoints<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    opts: QuadOptions,
) -> Result<Quad> {
    if a == b {
        return Ok(Quad { value: 0.0, error: 0.0, evaluations: 0 });
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut knots: Vec<f64> = std::iter::once(lo)
        .chain(breakpoints.iter().copied().filter(|&p| p > lo && p < hi))
        .chain(std::iter::once(hi))
        .collect();
    knots.sort_by(|x, y| x.partial_cmp(y).unwrap());
    knots.dedup();

    let pieces = opts.initial_pieces.max(1);
    let mut heap = BinaryHeap::new();
    let mut total = 0.0;
    let mut total_err = 0.0;
    let mut evals = 0;
    for w in knots.windows(2) {
        let step = (w[1] - w[0]) / pieces as f64;
        for k in 0..pieces {
            let pa = w[0] + step * k as f64;
            let pb = if k + 1 == pieces { w[1] } else { pa + step };
            let (v, e) = gk15(&mut f, pa, pb);
            evals += 15;
            total += v;
            total_err += e;
            heap.push(Panel { a: pa, b: pb, value: v, error: e });
        }
    }

    loop {
        let target = opts.abs_tol.max(opts.rel_tol * total.abs());
        if total_err <= target {
            break;
        }
        if heap.len() >= opts.max_intervals {
            return Err(Error::Quadrature { estimate: total, error: total_err });
        }
        let worst = match heap.pop() {
            Some(p) => p,
            None => break,
        };
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval cannot be split further in floating point
            heap.push(worst);
            return Err(Error::Quadrature { estimate: total, error: total_err });
        }
        let (v1, e1) = gk15(&mut f, worst.a, mid);
        let (v2, e2) = gk15(&mut f, mid, worst.b);
        evals += 30;
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Panel { a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Panel { a: mid, b: worst.b, value: v2, error: e2 });
    }
    // Re-sum to shed accumulated cancellation from the running totals.
    let mut panels = heap.into_vec();
    panels.sort_by(|x, y| x.a.partial_cmp(&y.a).unwrap());
    let value: f64 = panels.iter().map(|p| p.value).sum();
    let error: f64 = panels.iter().map(|p| p.error).sum();
    Ok(Quad { value: sign * value, error, evaluations: evals })
}

pub fn integrate<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64, opts: QuadOptions) -> Result<Quad> {
    integrate_with_breakpoints(f, a, b, &[], opts)
}

/// Nested rule for `int_{x0}^{x1} int_{lo(x)}^{hi(x)} f(x, y) dy dx`.
///
/// The inner integral is resolved at a tenth of the outer tolerance.
/// `y_breaks(x)` supplies inner breakpoints (peak ridges) for a given `x`.
#[allow(clippy::too_many_arguments)]
pub fn integrate_2d<F, L, H, B>(
    f: F,
    x_range: (f64, f64),
    x_breaks: &[f64],
    lo: L,
    hi: H,
    y_breaks: B,
    opts: QuadOptions,
) -> Result<Quad>
where
    F: Fn(f64, f64) -> f64,
    L: Fn(f64) -> f64,
    H: Fn(f64) -> f64,
    B: Fn(f64) -> Vec<f64>,
{
    let inner_opts = QuadOptions { rel_tol: opts.rel_tol * 0.1, abs_tol: opts.abs_tol * 0.1, ..opts };
    let mut failure: Option<Error> = None;
    let mut evals = 0usize;
    let mut inner_err = 0.0f64;
    let outer = integrate_with_breakpoints(
        |x| {
            if failure.is_some() {
                return 0.0;
            }
            let (a, b) = (lo(x), hi(x));
            if !(b > a) {
                return 0.0;
            }
            match integrate_with_breakpoints(|y| f(x, y), a, b, &y_breaks(x), inner_opts) {
                Ok(q) => {
                    evals += q.evaluations;
                    inner_err = inner_err.max(q.error);
                    q.value
                }
                Err(e) => {
                    failure = Some(e);
                    0.0
                }
            }
        },
        x_range.0,
        x_range.1,
        x_breaks,
        opts,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let q = outer?;
    Ok(Quad { value: q.value, error: q.error + inner_err * (x_range.1 - x_range.0).abs(), evaluations: evals })
}
