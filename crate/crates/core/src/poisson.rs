//! One-dimensional Poisson equation
//! `theta eps e^{U/eps} (e^{-U/eps} phi')' = sum_i a(i) (L_y f)(i) 1_{V_i}`,
//! solved by two nested quadratures of the integrating-factor form.
//!
//! With `w = exp(-(U - h)/eps)` and the flux `P(x) = int_{-inf}^x g w`,
//! the solution satisfies `phi' = P exp((U - H)/eps) / eps`. The flux
//! vanishes left of the first valley and, by compatibility, right of the
//! last one, so `phi` is constant outside the valley hull and every
//! exponential stays bounded by one.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::chain::ChainY;
use crate::error::{Error, Result};
use crate::landscape::LandscapeGraph;
use crate::potential::Potential;
use crate::quadrature::{gk15, integrate_with_breakpoints, QuadOptions};

/// Grid points per `sqrt(eps)`.
pub const POINTS_PER_SQRT_EPS: f64 = 40.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Plateau {
    pub well: usize,
    pub target: f64,
    pub mean: f64,
    pub sup_deviation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoissonSolution {
    pub epsilon: f64,
    pub f: Vec<f64>,
    pub a_eps: Vec<f64>,
    /// `a(i) (L_y f)(i)` per deepest well.
    pub rhs: Vec<f64>,
    pub grid: Vec<f64>,
    pub phi: Vec<f64>,
    /// Flux `P` at the grid points.
    pub flux: Vec<f64>,
    /// Additive constant removed after solving.
    pub shift: f64,
    pub plateaus: Vec<Plateau>,
    /// `theta D_eps(phi)`.
    pub energy: f64,
    /// `p(i) = a(i) (L_y f)(i) int_{V_i} phi w / Zs`.
    pub p: Vec<f64>,
    pub lambda_eps: f64,
    /// `|P(+inf)|` relative to the largest partial flux.
    pub compatibility_defect: f64,
    /// `int w` over the bounding box.
    pub z_scaled: f64,
}

impl PoissonSolution {
    pub fn sup_norm(&self) -> f64 {
        self.phi.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// A valley interval with the RHS value on it.
#[derive(Clone, Copy, Debug)]
struct Piece {
    lo: f64,
    hi: f64,
    slot: usize,
}

pub struct PoissonSolver<'a, P: ?Sized> {
    pub pot: &'a P,
    pub graph: &'a LandscapeGraph,
    pub chain: &'a ChainY<f64>,
    pub epsilon: f64,
    pub quad: QuadOptions,
}

impl<'a, P: Potential<f64> + ?Sized> PoissonSolver<'a, P> {
    pub fn new(pot: &'a P, graph: &'a LandscapeGraph, chain: &'a ChainY<f64>, epsilon: f64) -> Result<Self> {
        if graph.dim != 1 {
            return Err(Error::UnsupportedDimension(graph.dim));
        }
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::InvalidParameter(format!("epsilon must lie in (0, 1), got {epsilon}")));
        }
        Ok(Self { pot, graph, chain, epsilon, quad: QuadOptions::rel(1e-12) })
    }

    fn w(&self, x: f64) -> f64 {
        (-(self.pot.value(&[x]) - self.graph.global_min) / self.epsilon).exp()
    }

    /// `exp((U - H)/eps)`.
    fn lift(&self, x: f64) -> f64 {
        ((self.pot.value(&[x]) - self.graph.level) / self.epsilon).exp()
    }

    fn pieces(&self) -> Vec<Piece> {
        let r = self.graph.valley_radius;
        let mut out: Vec<Piece> = self
            .chain
            .s_star
            .iter()
            .enumerate()
            .flat_map(|(slot, &id)| {
                self.graph.well(id).minima.iter().map(move |m| Piece { lo: m.location[0] - r, hi: m.location[0] + r, slot })
            })
            .collect();
        out.sort_by(|a, b| a.lo.partial_cmp(&b.lo).unwrap());
        out
    }

    /// Solves for `f` on the deepest wells (in `chain.s_star` order).
    pub fn solve(&self, f: &[f64]) -> Result<PoissonSolution> {
        let n = self.chain.len();
        if f.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: f.len() });
        }
        let eps = self.epsilon;
        let bb = self.graph.bounding_box[0];
        let breaks: Vec<f64> = self.graph.critical_points.iter().map(|c| c.location[0]).collect();
        let z_scaled = integrate_with_breakpoints(|x| self.w(x), bb[0], bb[1], &breaks, self.quad)?.value;

        let pieces = self.pieces();
        let mut mass = vec![0.0; n];
        for p in &pieces {
            let mid = 0.5 * (p.lo + p.hi);
            mass[p.slot] += integrate_with_breakpoints(|x| self.w(x), p.lo, p.hi, &[mid], self.quad)?.value;
        }
        let root = (2.0 * std::f64::consts::PI * eps).sqrt();
        let a_eps: Vec<f64> = (0..n).map(|k| root * self.chain.nu[k] / mass[k]).collect();
        let lyf = self.chain.apply_generator(f);
        let rhs: Vec<f64> = (0..n).map(|k| a_eps[k] * lyf[k]).collect();

        // grid over the valley hull, with every valley edge as a node
        let (lo, hi) = (pieces.first().unwrap().lo, pieces.last().unwrap().hi);
        let h = eps.sqrt() / POINTS_PER_SQRT_EPS;
        let mut grid: Vec<f64> = Vec::new();
        let cells = ((hi - lo) / h).ceil() as usize;
        for k in 0..=cells {
            grid.push(lo + (hi - lo) * k as f64 / cells as f64);
        }
        for p in &pieces {
            grid.push(p.lo);
            grid.push(p.hi);
        }
        grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
        grid.dedup_by(|a, b| (*a - *b).abs() < 1e-14);

        let g_on = |x0: f64, x1: f64| -> f64 {
            let mid = 0.5 * (x0 + x1);
            pieces.iter().find(|p| mid > p.lo && mid < p.hi).map_or(0.0, |p| rhs[p.slot])
        };

        let mut flux = vec![0.0; grid.len()];
        let mut phi = vec![0.0; grid.len()];
        let mut energy = 0.0;
        let mut peak: f64 = 0.0;
        for k in 0..grid.len() - 1 {
            let (x0, x1) = (grid[k], grid[k + 1]);
            let g = g_on(x0, x1);
            let p0 = flux[k];
            let partial = |t: f64| -> f64 {
                if g == 0.0 || t == x0 {
                    p0
                } else {
                    p0 + g * gk15(&mut |s| self.w(s), x0, t).0
                }
            };
            let (dphi, _) = gk15(&mut |t| partial(t) * self.lift(t), x0, x1);
            let (de, _) = gk15(&mut |t| partial(t).powi(2) * self.lift(t), x0, x1);
            flux[k + 1] = partial(x1);
            phi[k + 1] = phi[k] + dphi / eps;
            energy += de;
            peak = peak.max(flux[k + 1].abs());
        }
        let defect = flux.last().unwrap().abs() / peak.max(f64::MIN_POSITIVE);
        if peak > 0.0 && defect > 1e-10 {
            return Err(Error::Compatibility(defect));
        }
        let energy = energy / (eps * z_scaled);

        // centre on the plateaus
        let stats = |phi: &[f64]| -> Vec<(f64, f64)> {
            (0..n)
                .map(|slot| {
                    let vals: Vec<f64> = grid
                        .iter()
                        .zip(phi)
                        .filter(|(x, _)| pieces.iter().any(|p| p.slot == slot && **x > p.lo && **x < p.hi))
                        .map(|(_, v)| *v)
                        .collect();
                    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
                    let dev = vals.iter().fold(0.0f64, |m, v| m.max((v - f[slot]).abs()));
                    (mean, dev)
                })
                .collect()
        };
        let raw = stats(&phi);
        let shift = (0..n).map(|k| raw[k].0 - f[k]).sum::<f64>() / n as f64;
        phi.iter_mut().for_each(|v| *v -= shift);
        let centred = stats(&phi);
        let plateaus = (0..n)
            .map(|k| Plateau { well: self.chain.s_star[k], target: f[k], mean: centred[k].0, sup_deviation: centred[k].1 })
            .collect();

        // lambda = -1/2 sum_i a(i) (L_y f)(i) int_{V_i} phi w / Zs
        let mut weighted = vec![0.0; n];
        for k in 0..grid.len() - 1 {
            let (x0, x1) = (grid[k], grid[k + 1]);
            let mid = 0.5 * (x0 + x1);
            let Some(p) = pieces.iter().find(|p| mid > p.lo && mid < p.hi) else { continue };
            let g = rhs[p.slot];
            let p0 = flux[k];
            let phi0 = phi[k];
            let phi_at = |t: f64| -> f64 {
                let partial = |s: f64| if s == x0 { p0 } else { p0 + g * gk15(&mut |r| self.w(r), x0, s).0 };
                phi0 + gk15(&mut |s| partial(s) * self.lift(s), x0, t).0 / eps
            };
            weighted[p.slot] += gk15(&mut |t| phi_at(t) * self.w(t), x0, x1).0;
        }
        let p: Vec<f64> = (0..n).map(|k| rhs[k] * weighted[k] / z_scaled).collect();
        let lambda_eps = -0.5 * p.iter().sum::<f64>();

        Ok(PoissonSolution {
            epsilon: eps,
            f: f.to_vec(),
            a_eps,
            rhs,
            grid,
            phi,
            flux,
            shift,
            plateaus,
            energy,
            p,
            lambda_eps,
            compatibility_defect: defect,
            z_scaled,
        })
    }

    fn cell_of(&self, sol: &PoissonSolution, x: f64) -> Option<usize> {
        let g = &sol.grid;
        if x < g[0] || x > *g.last().unwrap() {
            return None;
        }
        Some(g.partition_point(|&v| v <= x).saturating_sub(1).min(g.len() - 2))
    }

    fn rhs_at(&self, sol: &PoissonSolution, x: f64) -> f64 {
        self.pieces().iter().find(|p| x > p.lo && x < p.hi).map_or(0.0, |p| sol.rhs[p.slot])
    }

    /// Flux `P(x)`.
    pub fn flux_at(&self, sol: &PoissonSolution, x: f64) -> f64 {
        let Some(k) = self.cell_of(sol, x) else { return 0.0 };
        let x0 = sol.grid[k];
        let g = self.rhs_at(sol, 0.5 * (x0 + sol.grid[k + 1]));
        if g == 0.0 || x == x0 {
            sol.flux[k]
        } else {
            sol.flux[k] + g * gk15(&mut |s| self.w(s), x0, x).0
        }
    }

    pub fn phi_prime(&self, sol: &PoissonSolution, x: f64) -> f64 {
        self.flux_at(sol, x) * self.lift(x) / self.epsilon
    }

    pub fn phi_at(&self, sol: &PoissonSolution, x: f64) -> f64 {
        let g = &sol.grid;
        if x <= g[0] {
            return sol.phi[0];
        }
        if x >= *g.last().unwrap() {
            return *sol.phi.last().unwrap();
        }
        let k = self.cell_of(sol, x).unwrap();
        sol.phi[k] + gk15(&mut |t| self.phi_prime(sol, t), g[k], x).0
    }

    /// Largest relative residual of `eps phi'' - U' phi' = g / theta` at
    /// `n` random points of the valley hull. `phi''` comes from a five-point
    /// stencil on `phi'`; the residual is scaled by the largest of the three
    /// terms. Points within two stencil steps of a valley edge are skipped.
    pub fn residual_check<R: Rng>(&self, sol: &PoissonSolution, n: usize, rng: &mut R) -> f64 {
        let eps = self.epsilon;
        let theta = ((self.graph.level - self.graph.global_min) / eps).exp();
        let eta = 1e-3 * eps.sqrt();
        let (lo, hi) = (sol.grid[0], *sol.grid.last().unwrap());
        let edges: Vec<f64> = self.pieces().iter().flat_map(|p| [p.lo, p.hi]).collect();
        let mut worst: f64 = 0.0;
        let mut done = 0;
        while done < n {
            let x = rng.random_range(lo..hi);
            if edges.iter().any(|e| (x - e).abs() < 3.0 * eta) {
                continue;
            }
            done += 1;
            let d = |t: f64| self.phi_prime(sol, t);
            let second = (-d(x + 2.0 * eta) + 8.0 * d(x + eta) - 8.0 * d(x - eta) + d(x - 2.0 * eta)) / (12.0 * eta);
            let mut grad = [0.0];
            self.pot.gradient(&[x], &mut grad);
            let drift = grad[0] * d(x);
            let target = self.rhs_at(sol, x) / theta;
            let scale = (eps * second).abs().max(drift.abs()).max(target.abs()).max(f64::MIN_POSITIVE);
            worst = worst.max((eps * second - drift - target).abs() / scale);
        }
        worst
    }
}

/// Report backing the short-time hitting estimate for the pattern `f = b_i`
/// (0 on valley `i`, 1 on the others).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HittingBound {
    pub well: usize,
    pub a: f64,
    /// `sup_{V_i} |phi|`.
    pub sup_start: f64,
    /// Largest `|a(j) (L_y f)(j)|`, the sup of the rescaled generator of phi.
    pub rhs_sup: f64,
    /// Smallest plateau value over the other valleys.
    pub floor_other: f64,
    /// `C a + sup_start / floor_other` with `C = rhs_sup / floor_other`.
    pub bound: f64,
}

/// The `b_i` pattern for position `slot` among `n` deepest wells.
pub fn b_pattern(n: usize, slot: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::Precondition("the b_i pattern needs at least two deepest wells".into()));
    }
    if slot >= n {
        return Err(Error::InvalidStateSet(format!("slot {slot} out of range")));
    }
    Ok((0..n).map(|k| if k == slot { 0.0 } else { 1.0 }).collect())
}

/// Optional-stopping bound `P[H <= a theta] <= C a + o(1)` instantiated on a
/// solution for `f = b_i`.
pub fn hitting_bound_demo(sol: &PoissonSolution, slot: usize, a: f64) -> Result<HittingBound> {
    let n = sol.f.len();
    let expect = b_pattern(n, slot)?;
    if sol.f != expect {
        return Err(Error::Precondition("solution was not computed for the b_i pattern".into()));
    }
    if a < 0.0 {
        return Err(Error::InvalidParameter(format!("a = {a} must be nonnegative")));
    }
    let p = &sol.plateaus[slot];
    let sup_start = p.mean.abs() + p.sup_deviation;
    let floor_other = sol
        .plateaus
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != slot)
        .map(|(_, q)| q.mean - q.sup_deviation)
        .fold(f64::INFINITY, f64::min);
    let rhs_sup = sol.rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let c = rhs_sup / floor_other;
    Ok(HittingBound { well: p.well, a, sup_start, rhs_sup, floor_other, bound: c * a + sup_start / floor_other })
}
