//! The reduced chains: **x** on all wells with weights `omega`, and **y** on
//! the deepest wells with weights `beta` and `nu`.
//!
//! States of [`ChainX`] are 0-based (state `k` is well `k + 1`). [`ChainY`]
//! keeps the well ids of its states in `s_star` and indexes its arrays by
//! position in that list.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::landscape::{CriticalKind, CriticalPoint, LandscapeGraph};
use crate::linalg::{lu_solve, Matrix};
use crate::scalar::Real;

pub const MAX_STATES: usize = 64;

/// Saddle weight from the Hessian spectrum: `lambda / (2 pi sqrt(-det))`.
pub fn omega_from_eigenvalues<T: Real>(eigenvalues: &[T]) -> Result<T> {
    let negatives: Vec<T> = eigenvalues.iter().copied().filter(|&v| v < T::zero()).collect();
    if negatives.len() != 1 {
        return Err(Error::NotASaddle);
    }
    let det = eigenvalues.iter().fold(T::one(), |acc, &v| acc * v);
    Ok(-negatives[0] / (T::lit(2.0) * T::PI() * (-det).sqrt()))
}

pub fn omega_of_saddle(sigma: &CriticalPoint) -> Result<f64> {
    if sigma.kind != CriticalKind::SaddleIndex1 {
        return Err(Error::NotASaddle);
    }
    omega_from_eigenvalues(&sigma.eigenvalues)
}

fn check_square<T>(m: &[Vec<T>], k: usize) -> Result<()> {
    if m.len() != k || m.iter().any(|r| r.len() != k) {
        return Err(Error::DimensionMismatch { expected: k, got: m.len() });
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainX<T> {
    pub omega: Vec<Vec<T>>,
    pub omega_i: Vec<T>,
    pub mu: Vec<T>,
}

impl<T: Real> ChainX<T> {
    /// Validates a symmetric weight matrix with zero diagonal.
    pub fn from_weights(omega: Vec<Vec<T>>) -> Result<Self> {
        let k = omega.len();
        if k > MAX_STATES {
            return Err(Error::TooManyStates(k, MAX_STATES));
        }
        check_square(&omega, k)?;
        for i in 0..k {
            if omega[i][i] != T::zero() {
                return Err(Error::InvalidParameter(format!("omega[{i}][{i}] must be zero")));
            }
            for j in 0..k {
                if omega[i][j] != omega[j][i] || omega[i][j] < T::zero() || !omega[i][j].is_finite() {
                    return Err(Error::InvalidParameter(format!("omega[{i}][{j}] not symmetric nonnegative")));
                }
            }
        }
        let omega_i: Vec<T> = omega.iter().map(|r| r.iter().copied().sum()).collect();
        if let Some(i) = omega_i.iter().position(|&w| w <= T::zero()) {
            return Err(Error::ZeroRate(i + 1));
        }
        let total: T = omega_i.iter().copied().sum();
        let mu = omega_i.iter().map(|&w| w / total).collect();
        Ok(Self { omega, omega_i, mu })
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    pub fn rate(&self, i: usize, j: usize) -> T {
        self.omega[i][j] / self.mu[i]
    }

    pub fn generator(&self) -> Matrix<T> {
        let k = self.len();
        let mut l = Matrix::zeros(k);
        for i in 0..k {
            let mut diag = T::zero();
            for j in 0..k {
                if i != j {
                    let r = self.rate(i, j);
                    l.set(i, j, r);
                    diag -= r;
                }
            }
            l.set(i, i, diag);
        }
        l
    }

    pub fn apply_generator(&self, f: &[T]) -> Vec<T> {
        (0..self.len()).map(|i| (0..self.len()).map(|j| self.rate(i, j) * (f[j] - f[i])).sum()).collect()
    }
}

pub fn build_chain_x(g: &LandscapeGraph) -> Result<ChainX<f64>> {
    let k = g.n_wells();
    let mut omega = vec![vec![0.0; k]; k];
    for s in &g.saddles {
        let w = omega_of_saddle(&s.point)?;
        let (i, j) = (s.wells.0 - 1, s.wells.1 - 1);
        omega[i][j] += w;
        omega[j][i] += w;
    }
    ChainX::from_weights(omega)
}

/// `1/2 sum_{i,j} w_ij (f_j - f_i)(g_j - g_i)`.
fn quadratic_form<T: Real>(w: &[Vec<T>], f: &[T], g: &[T]) -> T {
    let k = w.len();
    let mut s = T::zero();
    for i in 0..k {
        for j in 0..k {
            s += w[i][j] * (f[j] - f[i]) * (g[j] - g[i]);
        }
    }
    s / T::lit(2.0)
}

pub fn dirichlet_x<T: Real>(chain: &ChainX<T>, f: &[T], g: &[T]) -> T {
    quadratic_form(&chain.omega, f, g)
}

/// Solves the discrete Dirichlet problem: harmonic for `w` off `fixed`,
/// equal to `values` on `fixed`.
fn harmonic_solve<T: Real>(w: &[Vec<T>], fixed: &[usize], values: &[T]) -> Result<Vec<T>> {
    let k = w.len();
    let mut out = vec![T::zero(); k];
    let mut is_fixed = vec![false; k];
    for (&i, &v) in fixed.iter().zip(values) {
        is_fixed[i] = true;
        out[i] = v;
    }
    let interior: Vec<usize> = (0..k).filter(|&i| !is_fixed[i]).collect();
    if interior.is_empty() {
        return Ok(out);
    }
    let n = interior.len();
    let mut a = Matrix::zeros(n);
    let mut b = vec![T::zero(); n];
    for (r, &i) in interior.iter().enumerate() {
        let wi: T = w[i].iter().copied().sum();
        a.set(r, r, wi);
        for (c, &j) in interior.iter().enumerate() {
            if c != r {
                a.set(r, c, -w[i][j]);
            }
        }
        b[r] = fixed.iter().map(|&j| w[i][j] * out[j]).sum();
    }
    let x = lu_solve(&a, &b)?;
    for (r, &i) in interior.iter().enumerate() {
        out[i] = x[r];
    }
    Ok(out)
}

fn check_sets(k: usize, a: &[usize], b: &[usize]) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidStateSet("A and B must be nonempty".into()));
    }
    if a.iter().chain(b).any(|&i| i >= k) {
        return Err(Error::InvalidStateSet(format!("state index out of range 0..{k}")));
    }
    if a.iter().any(|i| b.contains(i)) {
        return Err(Error::InvalidStateSet("A and B must be disjoint".into()));
    }
    Ok(())
}

/// Equilibrium potential `h_{A,B}`: 1 on A, 0 on B, harmonic elsewhere.
pub fn equilibrium_potential<T: Real>(chain: &ChainX<T>, a: &[usize], b: &[usize]) -> Result<Vec<T>> {
    check_sets(chain.len(), a, b)?;
    let fixed: Vec<usize> = a.iter().chain(b).copied().collect();
    let values: Vec<T> = a.iter().map(|_| T::one()).chain(b.iter().map(|_| T::zero())).collect();
    harmonic_solve(&chain.omega, &fixed, &values)
}

pub fn capacity<T: Real>(chain: &ChainX<T>, a: &[usize], b: &[usize]) -> Result<T> {
    let h = equilibrium_potential(chain, a, b)?;
    Ok(dirichlet_x(chain, &h, &h))
}

/// Capacity with `cap(A, {}) = 0`.
fn capacity_or_zero<T: Real>(chain: &ChainX<T>, a: &[usize], b: &[usize]) -> Result<T> {
    if b.is_empty() {
        Ok(T::zero())
    } else {
        capacity(chain, a, b)
    }
}

/// `beta_ij = (cap(i, S*-i) + cap(j, S*-j) - cap({i,j}, S*-{i,j})) / 2`
/// for states in `s_star` (0-based chain states), indexed by position.
pub fn beta_matrix<T: Real>(chain: &ChainX<T>, s_star: &[usize]) -> Result<Vec<Vec<T>>> {
    let n = s_star.len();
    if n < 2 {
        return Err(Error::InvalidStateSet("beta needs at least two deepest states".into()));
    }
    let others = |skip: &[usize]| -> Vec<usize> { s_star.iter().copied().filter(|s| !skip.contains(s)).collect() };
    let single: Vec<T> =
        s_star.iter().map(|&i| capacity_or_zero(chain, &[i], &others(&[i]))).collect::<Result<_>>()?;
    let scale = single.iter().copied().fold(T::zero(), T::max);
    let mut beta = vec![vec![T::zero(); n]; n];
    for p in 0..n {
        for q in (p + 1)..n {
            let (i, j) = (s_star[p], s_star[q]);
            let pair = capacity_or_zero(chain, &[i, j], &others(&[i, j]))?;
            let v = (single[p] + single[q] - pair) / T::lit(2.0);
            if v < -T::lit(1e-12) * scale {
                return Err(Error::NegativeBeta { i: i + 1, j: j + 1, value: v.to_f64_lossy() });
            }
            beta[p][q] = v;
            beta[q][p] = v;
        }
    }
    Ok(beta)
}

/// Harmonic extension to all states of `u` given on `s_star`.
pub fn harmonic_extension<T: Real>(chain: &ChainX<T>, s_star: &[usize], u: &[T]) -> Result<Vec<T>> {
    if u.len() != s_star.len() {
        return Err(Error::DimensionMismatch { expected: s_star.len(), got: u.len() });
    }
    harmonic_solve(&chain.omega, s_star, u)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainY<T> {
    /// Well ids of the states.
    pub s_star: Vec<usize>,
    pub beta: Vec<Vec<T>>,
    pub nu: Vec<T>,
    pub nu_star: T,
    pub mu_star: Vec<T>,
}

impl<T: Real> ChainY<T> {
    pub fn new(s_star: Vec<usize>, beta: Vec<Vec<T>>, nu: Vec<T>) -> Result<Self> {
        let n = s_star.len();
        check_square(&beta, n)?;
        if nu.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: nu.len() });
        }
        if nu.iter().any(|&v| !(v > T::zero())) {
            return Err(Error::InvalidParameter("nu must be positive".into()));
        }
        let nu_star: T = nu.iter().copied().sum();
        let mu_star = nu.iter().map(|&v| v / nu_star).collect();
        Ok(Self { s_star, beta, nu, nu_star, mu_star })
    }

    pub fn len(&self) -> usize {
        self.nu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nu.is_empty()
    }

    /// Position of a well id in `s_star`.
    pub fn index_of(&self, well: usize) -> Option<usize> {
        self.s_star.iter().position(|&w| w == well)
    }

    pub fn rate(&self, p: usize, q: usize) -> T {
        if p == q {
            T::zero()
        } else {
            self.beta[p][q] / self.nu[p]
        }
    }

    pub fn exit_rate(&self, p: usize) -> T {
        (0..self.len()).map(|q| self.rate(p, q)).sum()
    }

    /// `nu_p / sum_q beta_pq`.
    pub fn mean_holding(&self, p: usize) -> T {
        T::one() / self.exit_rate(p)
    }

    pub fn jump_probability(&self, p: usize, q: usize) -> T {
        let total: T = self.beta[p].iter().copied().sum();
        if p == q {
            T::zero()
        } else {
            self.beta[p][q] / total
        }
    }

    pub fn generator(&self) -> Matrix<T> {
        let n = self.len();
        let mut l = Matrix::zeros(n);
        for p in 0..n {
            for q in 0..n {
                if p != q {
                    l.set(p, q, self.rate(p, q));
                }
            }
            l.set(p, p, -self.exit_rate(p));
        }
        l
    }

    pub fn apply_generator(&self, f: &[T]) -> Vec<T> {
        (0..self.len()).map(|p| (0..self.len()).map(|q| self.rate(p, q) * (f[q] - f[p])).sum()).collect()
    }

    /// Solves `L_y f = rhs` with `f[gauge] = 0`. Requires `sum nu_i rhs_i = 0`.
    pub fn solve_poisson(&self, rhs: &[T], gauge: usize) -> Result<Vec<T>> {
        let n = self.len();
        let balance: T = self.nu.iter().zip(rhs).map(|(&a, &b)| a * b).sum();
        let scale: T = self.nu.iter().zip(rhs).map(|(&a, &b)| (a * b).abs()).sum();
        if balance.abs() > T::lit(1e-10) * scale.max(T::one()) {
            return Err(Error::Compatibility(balance.to_f64_lossy()));
        }
        let l = self.generator();
        // Replace the gauge row by f[gauge] = 0.
        let mut a = Matrix::zeros(n);
        let mut b = rhs.to_vec();
        for p in 0..n {
            for q in 0..n {
                a.set(p, q, if p == gauge { if q == gauge { T::one() } else { T::zero() } } else { l.get(p, q) });
            }
        }
        b[gauge] = T::zero();
        lu_solve(&a, &b)
    }

    /// The function with `L_y f = nu*/nu_p e_p - nu*/nu_q e_q` and `f(p) = 0`.
    pub fn pair_basis(&self, p: usize, q: usize) -> Result<Vec<T>> {
        if p == q || p >= self.len() || q >= self.len() {
            return Err(Error::InvalidStateSet(format!("pair ({p}, {q})")));
        }
        let mut rhs = vec![T::zero(); self.len()];
        rhs[p] = self.nu_star / self.nu[p];
        rhs[q] = -self.nu_star / self.nu[q];
        self.solve_poisson(&rhs, p)
    }
}

/// `nu_i = sum_{m in M_i} det(Hess U(m))^{-1/2}` for every well.
pub fn well_nu(g: &LandscapeGraph) -> Vec<f64> {
    g.wells.iter().map(|w| w.minima.iter().map(|m| 1.0 / m.hessian_det().sqrt()).sum()).collect()
}

pub fn build_chain_y(g: &LandscapeGraph, x: &ChainX<f64>) -> Result<ChainY<f64>> {
    let states: Vec<usize> = g.s_star.iter().map(|&id| id - 1).collect();
    let beta = beta_matrix(x, &states)?;
    let nu_all = well_nu(g);
    let nu = states.iter().map(|&k| nu_all[k]).collect();
    ChainY::new(g.s_star.clone(), beta, nu)
}

pub fn dirichlet_y<T: Real>(chain: &ChainY<T>, f: &[T], g: &[T]) -> T {
    quadratic_form(&chain.beta, f, g) / chain.nu_star
}

/// Largest |entry| of `mu L` for a generator and a candidate stationary law.
pub fn stationarity_residual<T: Real>(l: &Matrix<T>, mu: &[T]) -> T {
    let n = l.dim();
    (0..n).map(|j| (0..n).map(|i| mu[i] * l.get(i, j)).sum::<T>().abs()).fold(T::zero(), T::max)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapacityEntry {
    pub i: usize,
    pub j: usize,
    pub capacity: f64,
}

/// Everything written by the `chains` stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainSummary {
    pub chain_x: ChainX<f64>,
    pub chain_y: ChainY<f64>,
    pub generator_x: Vec<Vec<f64>>,
    pub generator_y: Vec<Vec<f64>>,
    /// `cap_x({i}, {j})` for every pair of wells (ids 1-based).
    pub capacities: Vec<CapacityEntry>,
    pub mean_holding: Vec<f64>,
    pub jump_probabilities: Vec<Vec<f64>>,
    pub level: f64,
    pub global_min: f64,
}

impl ChainSummary {
    pub fn build(g: &LandscapeGraph) -> Result<Self> {
        let x = build_chain_x(g)?;
        let y = build_chain_y(g, &x)?;
        let mut capacities = Vec::new();
        for i in 0..x.len() {
            for j in (i + 1)..x.len() {
                capacities.push(CapacityEntry { i: i + 1, j: j + 1, capacity: capacity(&x, &[i], &[j])? });
            }
        }
        let n = y.len();
        Ok(Self {
            generator_x: x.generator().to_rows(),
            generator_y: y.generator().to_rows(),
            mean_holding: (0..n).map(|p| y.mean_holding(p)).collect(),
            jump_probabilities: (0..n).map(|p| (0..n).map(|q| y.jump_probability(p, q)).collect()).collect(),
            capacities,
            chain_x: x,
            chain_y: y,
            level: g.level,
            global_min: g.global_min,
        })
    }
}
