//! Quadrature checks of the small-noise asymptotics: partition function,
//! valley measures, the saddle test function and its Dirichlet energy, and
//! the generator residual of the saddle profile.
//!
//! All Boltzmann weights are shifted by the global minimum `h`, so the
//! quantities carried around are `Zs = int exp(-(U - h)/eps)` and
//! `theta * mu_hat = exp(-(U - H)/eps) / Zs`. Nothing overflows at
//! `eps = 0.02` this way.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::chain::{dirichlet_x, ChainX};
use crate::error::{Error, Result};
use crate::landscape::{descend_to_minimum, CriticalPoint, DescentOptions, LandscapeGraph, Saddle};
use crate::potential::{distance, norm, Potential};
use crate::quadrature::{integrate_2d, integrate_with_breakpoints, Quad, QuadOptions};

/// `ceil(sqrt(12 d)) + 1`.
pub fn default_j(dim: usize) -> f64 {
    (12.0 * dim as f64).sqrt().ceil() + 1.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsilonScale {
    pub epsilon: f64,
    pub delta: f64,
    pub theta: f64,
    pub j: f64,
    pub dim: usize,
    pub level: f64,
    pub global_min: f64,
}

impl EpsilonScale {
    pub fn with_levels(epsilon: f64, level: f64, global_min: f64, dim: usize, j: Option<f64>) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::InvalidParameter(format!("epsilon must lie in (0, 1), got {epsilon}")));
        }
        let j = j.unwrap_or_else(|| default_j(dim));
        if !(j > (12.0 * dim as f64).sqrt()) {
            return Err(Error::InvalidParameter(format!("J = {j} must exceed sqrt(12 d)")));
        }
        Ok(Self {
            epsilon,
            delta: (epsilon * (1.0 / epsilon).ln()).sqrt(),
            theta: ((level - global_min) / epsilon).exp(),
            j,
            dim,
            level,
            global_min,
        })
    }

    pub fn new(epsilon: f64, g: &LandscapeGraph, j: Option<f64>) -> Result<Self> {
        Self::with_levels(epsilon, g.level, g.global_min, g.dim, j)
    }

    /// `J^2 delta^2`, the height of H^eps above H.
    pub fn cap(&self) -> f64 {
        self.j * self.j * self.delta * self.delta
    }
}

/// Normalising constant of the saddle profile,
/// `int_{-J delta/sqrt(l)}^{J delta/sqrt(l)} sqrt(l/(2 pi eps)) exp(-l t^2/(2 eps)) dt`.
pub fn box_normalizer(scale: &EpsilonScale) -> f64 {
    erf(scale.j * scale.delta / (2.0 * scale.epsilon).sqrt())
}

/// The box `C_sigma` in the eigenframe of the saddle Hessian.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaddleBox {
    pub center: Vec<f64>,
    pub wells: (usize, usize),
    /// `|eigenvalue|` per axis, unstable axis first.
    pub lambda: Vec<f64>,
    /// Orthonormal axes; `axes[0]` points into `wells.1`.
    pub axes: Vec<Vec<f64>>,
    pub half_widths: Vec<f64>,
    pub normalizer: f64,
    pub epsilon: f64,
}

impl SaddleBox {
    pub fn from_point(sigma: &CriticalPoint, v1: &[f64], wells: (usize, usize), scale: &EpsilonScale) -> Self {
        let d = sigma.dim();
        let lambda: Vec<f64> = sigma.eigenvalues.iter().map(|v| v.abs()).collect();
        let mut axes = sigma.eigenvectors.clone();
        axes[0] = v1.to_vec();
        let jd = scale.j * scale.delta;
        let half_widths =
            (0..d).map(|k| if k == 0 { jd / lambda[0].sqrt() } else { 2.0 * jd / lambda[k].sqrt() }).collect();
        Self {
            center: sigma.location.clone(),
            wells,
            lambda,
            axes,
            half_widths,
            normalizer: box_normalizer(scale),
            epsilon: scale.epsilon,
        }
    }

    pub fn new(saddle: &Saddle, scale: &EpsilonScale) -> Self {
        Self::from_point(&saddle.point, &saddle.unstable_direction, saddle.wells, scale)
    }

    pub fn coords(&self, x: &[f64]) -> Vec<f64> {
        self.axes.iter().map(|v| v.iter().zip(x).zip(&self.center).map(|((vi, xi), ci)| vi * (xi - ci)).sum()).collect()
    }

    pub fn point(&self, alpha: &[f64]) -> Vec<f64> {
        let mut x = self.center.clone();
        for (a, v) in alpha.iter().zip(&self.axes) {
            for (xi, vi) in x.iter_mut().zip(v) {
                *xi += a * vi;
            }
        }
        x
    }

    /// Closed box membership.
    pub fn contains(&self, x: &[f64]) -> bool {
        self.coords(x).iter().zip(&self.half_widths).all(|(a, w)| a.abs() <= *w)
    }

    /// `f_eps^sigma` as a function of the unstable coordinate; 0 on the minus
    /// face, 1 on the plus face.
    pub fn profile(&self, alpha1: f64) -> f64 {
        let a = alpha1.clamp(-self.half_widths[0], self.half_widths[0]);
        let s = (2.0 * self.epsilon / self.lambda[0]).sqrt();
        0.5 * (erf(a / s) + self.normalizer) / self.normalizer
    }

    /// Derivative of [`Self::profile`] inside the box.
    pub fn profile_slope(&self, alpha1: f64) -> f64 {
        let l = self.lambda[0];
        (l / (2.0 * std::f64::consts::PI * self.epsilon)).sqrt() * (-l * alpha1 * alpha1 / (2.0 * self.epsilon)).exp()
            / self.normalizer
    }

    /// Largest |grad f| over the box.
    pub fn slope_sup(&self) -> f64 {
        self.profile_slope(0.0)
    }

    /// Separating-axis test between two oriented boxes.
    pub fn overlaps(&self, other: &SaddleBox) -> bool {
        let radius = |b: &SaddleBox, n: &[f64]| -> f64 {
            b.axes.iter().zip(&b.half_widths).map(|(v, w)| w * v.iter().zip(n).map(|(a, c)| a * c).sum::<f64>().abs()).sum()
        };
        let gap: Vec<f64> = other.center.iter().zip(&self.center).map(|(a, b)| a - b).collect();
        self.axes.iter().chain(&other.axes).all(|n| {
            let sep = gap.iter().zip(n).map(|(g, c)| g * c).sum::<f64>().abs();
            sep <= radius(self, n) + radius(other, n)
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZMethod {
    Quadrature,
    Laplace,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureReport {
    pub epsilon: f64,
    /// `int exp(-(U - h)/eps)` by quadrature.
    pub z_quadrature: f64,
    /// `(2 pi eps)^{d/2} nu_star`.
    pub z_laplace: f64,
    pub ratio: f64,
    /// Estimated mass outside the bounding box, relative to `z_quadrature`.
    pub tail_fraction: f64,
    /// `mu_eps(V_i)` in `s_star` order.
    pub valleys: Vec<f64>,
    /// `nu_i / nu_star` in the same order.
    pub predicted: Vec<f64>,
    pub delta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirichletEnergy {
    /// `theta eps int |grad F|^2 mu_hat` over the boxes, by quadrature.
    pub quadrature: f64,
    /// Same with U replaced by its quadratic model at each saddle.
    pub gaussian: f64,
    /// Bound on the contribution from outside H^eps.
    pub remainder_bound: f64,
    /// `D_x(q, q) / nu_star`.
    pub target: f64,
    pub ratio: f64,
    /// `max_sigma |q_j - q_i| sup |grad f|`.
    pub gradient_sup: f64,
}

/// Potential, landscape and quadrature settings bundled together.
pub struct Model<'a, P: ?Sized> {
    pub pot: &'a P,
    pub graph: &'a LandscapeGraph,
    pub quad: QuadOptions,
}

impl<'a, P: Potential<f64> + ?Sized> Model<'a, P> {
    pub fn new(pot: &'a P, graph: &'a LandscapeGraph) -> Self {
        Self { pot, graph, quad: QuadOptions::default() }
    }

    fn check_dim(&self) -> Result<()> {
        match self.graph.dim {
            1 | 2 => Ok(()),
            d => Err(Error::UnsupportedDimension(d)),
        }
    }

    fn axis_breaks(&self, k: usize) -> Vec<f64> {
        self.graph.critical_points.iter().map(|c| c.location[k]).collect()
    }

    /// Local minima of `y -> U(x, y)` on a coarse scan (peak ridges of the
    /// Boltzmann weight).
    fn ridge(&self, x: f64) -> Vec<f64> {
        let [lo, hi] = self.graph.bounding_box[1];
        let n = 96;
        let ys: Vec<f64> = (0..=n).map(|k| lo + (hi - lo) * k as f64 / n as f64).collect();
        let us: Vec<f64> = ys.iter().map(|&y| self.pot.value(&[x, y])).collect();
        let mut out: Vec<f64> = (1..n).filter(|&k| us[k] <= us[k - 1] && us[k] <= us[k + 1]).map(|k| ys[k]).collect();
        out.extend(self.axis_breaks(1));
        out
    }

    /// Integral of `f` over the bounding box.
    pub fn integrate_domain<F: Fn(&[f64]) -> f64>(&self, f: F) -> Result<Quad> {
        self.check_dim()?;
        let bb = &self.graph.bounding_box;
        if self.graph.dim == 1 {
            return integrate_with_breakpoints(|x| f(&[x]), bb[0][0], bb[0][1], &self.axis_breaks(0), self.quad);
        }
        let [ylo, yhi] = bb[1];
        integrate_2d(
            |x, y| f(&[x, y]),
            (bb[0][0], bb[0][1]),
            &self.axis_breaks(0),
            |_| ylo,
            |_| yhi,
            |x| self.ridge(x),
            self.quad,
        )
    }

    /// Integral of `f` over the open ball `B(center, r)`.
    pub fn integrate_ball<F: Fn(&[f64]) -> f64>(&self, center: &[f64], r: f64, f: F) -> Result<Quad> {
        self.check_dim()?;
        if self.graph.dim == 1 {
            return integrate_with_breakpoints(|x| f(&[x]), center[0] - r, center[0] + r, &[center[0]], self.quad);
        }
        let (cx, cy) = (center[0], center[1]);
        let half = |x: f64| (r * r - (x - cx) * (x - cx)).max(0.0).sqrt();
        integrate_2d(|x, y| f(&[x, y]), (cx - r, cx + r), &[cx], |x| cy - half(x), |x| cy + half(x), |_| vec![cy], self.quad)
    }

    /// Integral over a saddle box in its eigen-coordinates; `f` receives the
    /// point and its coordinates.
    pub fn integrate_box<F: Fn(&[f64], &[f64]) -> f64>(&self, b: &SaddleBox, f: F) -> Result<Quad> {
        self.check_dim()?;
        let w = &b.half_widths;
        if self.graph.dim == 1 {
            return integrate_with_breakpoints(|a| f(&b.point(&[a]), &[a]), -w[0], w[0], &[0.0], self.quad);
        }
        integrate_2d(
            |a1, a2| {
                let alpha = [a1, a2];
                f(&b.point(&alpha), &alpha)
            },
            (-w[0], w[0]),
            &[0.0],
            |_| -w[1],
            |_| w[1],
            |_| vec![0.0],
            self.quad,
        )
    }

    fn weight(&self, x: &[f64], eps: f64) -> f64 {
        (-(self.pot.value(x) - self.graph.global_min) / eps).exp()
    }

    fn nu_star(&self) -> f64 {
        self.graph
            .s_star
            .iter()
            .map(|&i| self.graph.well(i).minima.iter().map(|m| 1.0 / m.hessian_det().sqrt()).sum::<f64>())
            .sum()
    }

    /// `int exp(-(U - h)/eps)`; multiply by `exp(-h/eps)` for Z itself.
    pub fn partition_function(&self, eps: f64, method: ZMethod) -> Result<f64> {
        match method {
            ZMethod::Quadrature => Ok(self.integrate_domain(|x| self.weight(x, eps))?.value),
            ZMethod::Laplace => {
                Ok((2.0 * std::f64::consts::PI * eps).powf(self.graph.dim as f64 / 2.0) * self.nu_star())
            }
        }
    }

    /// Mass beyond the bounding box, estimated face by face from the outward
    /// slope of U (the growth condition makes the weight decay at least
    /// exponentially there).
    pub fn tail_estimate(&self, eps: f64) -> f64 {
        let bb = &self.graph.bounding_box;
        let d = self.graph.dim;
        let mut total = 0.0;
        let samples = 64;
        for k in 0..d {
            for (side, sign) in [(0, -1.0), (1, 1.0)] {
                let face_len: f64 = (0..d).filter(|&m| m != k).map(|m| bb[m][1] - bb[m][0]).product();
                let mut worst: f64 = 0.0;
                let n = if d == 1 { 1 } else { samples };
                for s in 0..n {
                    let mut x: Vec<f64> = bb.iter().map(|r| 0.5 * (r[0] + r[1])).collect();
                    x[k] = bb[k][side];
                    if d == 2 {
                        let m = 1 - k;
                        x[m] = bb[m][0] + (bb[m][1] - bb[m][0]) * (s as f64 + 0.5) / n as f64;
                    }
                    let mut g = vec![0.0; d];
                    self.pot.gradient(&x, &mut g);
                    let slope = (sign * g[k]).max(1e-12);
                    worst = worst.max(self.weight(&x, eps) * eps / slope);
                }
                total += worst * face_len.max(1.0);
            }
        }
        total
    }

    /// `mu_eps(V_i)`, given the scaled partition function.
    pub fn valley_measure(&self, eps: f64, well: usize, z: f64) -> Result<f64> {
        if !self.graph.s_star.contains(&well) {
            return Err(Error::InvalidStateSet(format!("well {well} is not a deepest well")));
        }
        let r = self.graph.valley_radius;
        let mut total = 0.0;
        for m in &self.graph.well(well).minima {
            total += self.integrate_ball(&m.location, r, |x| self.weight(x, eps))?.value;
        }
        Ok(total / z)
    }

    pub fn measures(&self, eps: f64) -> Result<MeasureReport> {
        let z_quadrature = self.partition_function(eps, ZMethod::Quadrature)?;
        let z_laplace = self.partition_function(eps, ZMethod::Laplace)?;
        let valleys: Vec<f64> =
            self.graph.s_star.iter().map(|&i| self.valley_measure(eps, i, z_quadrature)).collect::<Result<_>>()?;
        let nu_star = self.nu_star();
        let predicted = self
            .graph
            .s_star
            .iter()
            .map(|&i| self.graph.well(i).minima.iter().map(|m| 1.0 / m.hessian_det().sqrt()).sum::<f64>() / nu_star)
            .collect();
        Ok(MeasureReport {
            epsilon: eps,
            ratio: z_quadrature / z_laplace,
            tail_fraction: self.tail_estimate(eps) / z_quadrature,
            delta: 1.0 - valleys.iter().sum::<f64>(),
            valleys,
            predicted,
            z_quadrature,
            z_laplace,
        })
    }

    pub fn boxes(&self, scale: &EpsilonScale) -> Vec<SaddleBox> {
        self.graph.saddles.iter().map(|s| SaddleBox::new(s, scale)).collect()
    }

    /// Smallest `(U - H) / (J^2 delta^2)` over the transverse faces of a box;
    /// `None` in one dimension where those faces are empty.
    pub fn box_level_ratio(&self, b: &SaddleBox, scale: &EpsilonScale) -> Option<f64> {
        if b.half_widths.len() < 2 {
            return None;
        }
        let n = 400;
        let mut worst = f64::INFINITY;
        for s in 0..=n {
            let a1 = -b.half_widths[0] + 2.0 * b.half_widths[0] * s as f64 / n as f64;
            for sign in [-1.0, 1.0] {
                let x = b.point(&[a1, sign * b.half_widths[1]]);
                worst = worst.min((self.pot.value(&x) - scale.level) / scale.cap());
            }
        }
        Some(worst)
    }

    /// Largest epsilon (below `upper`) at which the boxes are pairwise disjoint.
    pub fn max_disjoint_epsilon(&self, upper: f64) -> f64 {
        let disjoint = |eps: f64| -> bool {
            let Ok(scale) = EpsilonScale::with_levels(eps, self.graph.level, self.graph.global_min, self.graph.dim, None)
            else {
                return false;
            };
            let bx = self.boxes(&scale);
            (0..bx.len()).all(|a| ((a + 1)..bx.len()).all(|b| !bx[a].overlaps(&bx[b])))
        };
        // delta(eps) grows on (0, 1/e), so disjointness is monotone there
        let (mut lo, mut hi) = (1e-9, upper.min((-1.0f64).exp()));
        if disjoint(hi) {
            return hi;
        }
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if disjoint(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    /// Builds `F_eps^q` for `q` indexed by well (length K).
    pub fn test_function(&self, q: &[f64], scale: &EpsilonScale) -> Result<TestFunction<'_, P>> {
        if q.len() != self.graph.n_wells() {
            return Err(Error::DimensionMismatch { expected: self.graph.n_wells(), got: q.len() });
        }
        let boxes = self.boxes(scale);
        for a in 0..boxes.len() {
            for b in (a + 1)..boxes.len() {
                if boxes[a].overlaps(&boxes[b]) {
                    return Err(Error::BoxesOverlap { eps: scale.epsilon, max_eps: self.max_disjoint_epsilon(scale.epsilon) });
                }
            }
        }
        for b in &boxes {
            if let Some(r) = self.box_level_ratio(b, scale) {
                if r < 0.9 {
                    return Err(Error::BoxLevel { ratio: r });
                }
            }
        }
        Ok(TestFunction { pot: self.pot, graph: self.graph, q: q.to_vec(), boxes, scale: *scale })
    }

    /// Energy of the test function against `nu_star^{-1} D_x(q, q)`.
    pub fn dirichlet_energy(&self, tf: &TestFunction<'_, P>, chain: &ChainX<f64>, z: f64) -> Result<DirichletEnergy> {
        let scale = &tf.scale;
        let eps = scale.epsilon;
        let cap = scale.level + scale.cap();
        let mut quad = 0.0;
        let mut gauss = 0.0;
        let mut gradient_sup: f64 = 0.0;
        for b in &tf.boxes {
            let dq = tf.q[b.wells.1 - 1] - tf.q[b.wells.0 - 1];
            if dq == 0.0 {
                continue;
            }
            let l1 = b.lambda[0];
            let c = b.normalizer;
            let pref = dq * dq * l1 / (2.0 * std::f64::consts::PI * eps * c * c);
            let e = self.integrate_box(b, |x, a| {
                let u = self.pot.value(x);
                if u > cap {
                    return 0.0;
                }
                (-(u - scale.level + l1 * a[0] * a[0]) / eps).exp()
            })?;
            quad += eps * pref * e.value / z;
            // U ~ H - l1 a1^2/2 + sum_k l_k a_k^2/2 in the box
            let two_pi_eps = 2.0 * std::f64::consts::PI * eps;
            let mut g = eps * pref * (two_pi_eps / l1).sqrt() * c;
            for k in 1..b.lambda.len() {
                let w = b.half_widths[k];
                g *= (two_pi_eps / b.lambda[k]).sqrt() * erf(w * (b.lambda[k] / (2.0 * eps)).sqrt());
            }
            gauss += g / z;
            gradient_sup = gradient_sup.max(dq.abs() * b.slope_sup());
        }
        let target = dirichlet_x(chain, &tf.q, &tf.q) / tf.nu_star();
        let remainder_bound = self.remainder_bound(tf, z, gradient_sup)?;
        Ok(DirichletEnergy {
            ratio: if target > 0.0 { quad / target } else { f64::NAN },
            quadrature: quad,
            gaussian: gauss,
            remainder_bound,
            target,
            gradient_sup,
        })
    }

    /// `theta eps sup|grad F|^2 mu_hat(K \ H^eps)` with the extension built
    /// from a smoothstep in U of width one above H^eps.
    fn remainder_bound(&self, tf: &TestFunction<'_, P>, z: f64, gradient_sup: f64) -> Result<f64> {
        let scale = &tf.scale;
        let eps = scale.epsilon;
        let lo = scale.level + scale.cap();
        let qmax = tf.q.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut grad_u_sup: f64 = 0.0;
        let mass = self.integrate_domain(|x| {
            let u = self.pot.value(x);
            if u <= lo || u > lo + 1.0 {
                return 0.0;
            }
            (-(u - scale.level) / eps).exp()
        })?;
        let bb = &self.graph.bounding_box;
        let n = 64;
        for s in 0..=n {
            for t in 0..=(if self.graph.dim == 2 { n } else { 0 }) {
                let mut x = vec![bb[0][0] + (bb[0][1] - bb[0][0]) * s as f64 / n as f64];
                if self.graph.dim == 2 {
                    x.push(bb[1][0] + (bb[1][1] - bb[1][0]) * t as f64 / n as f64);
                }
                let u = self.pot.value(&x);
                if u > lo && u <= lo + 1.0 {
                    grad_u_sup = grad_u_sup.max(norm(&self.pot.gradient_vec(&x)));
                }
            }
        }
        // smoothstep derivative is at most 3/2 per unit of U
        let g = gradient_sup + 1.5 * qmax * grad_u_sup;
        Ok(eps * g * g * mass.value / z)
    }

    /// `theta int_C |L f| mu_hat` for one saddle of the graph.
    pub fn generator_residual(&self, saddle: usize, scale: &EpsilonScale, z: f64) -> Result<f64> {
        let s = &self.graph.saddles[saddle];
        let b = SaddleBox::new(s, scale);
        generator_residual_box(self, &b, scale, z)
    }
}

/// Closed form of `L f` inside the box:
/// `-(1/c) sqrt(l/(2 pi eps)) exp(-l a1^2/(2 eps)) (grad U + l (x - sigma)) . v1`.
pub fn generator_on_profile<P: Potential<f64> + ?Sized>(pot: &P, b: &SaddleBox, x: &[f64]) -> f64 {
    let a = b.coords(x);
    let g = pot.gradient_vec(x);
    let l1 = b.lambda[0];
    let drift: f64 = g.iter().zip(&b.axes[0]).map(|(gi, vi)| gi * vi).sum::<f64>() + l1 * a[0];
    -b.profile_slope(a[0]) * drift
}

fn generator_residual_box<P: Potential<f64> + ?Sized>(m: &Model<'_, P>, b: &SaddleBox, scale: &EpsilonScale, z: f64) -> Result<f64> {
    let eps = scale.epsilon;
    let l1 = b.lambda[0];
    let pref = (l1 / (2.0 * std::f64::consts::PI * eps)).sqrt() / b.normalizer;
    let q = m.integrate_box(b, |x, a| {
        let g = m.pot.gradient_vec(x);
        let drift: f64 = g.iter().zip(&b.axes[0]).map(|(gi, vi)| gi * vi).sum::<f64>() + l1 * a[0];
        let u = m.pot.value(x);
        pref * drift.abs() * (-(u - scale.level + 0.5 * l1 * a[0] * a[0]) / eps).exp()
    })?;
    Ok(q.value / z)
}

/// Residual for a bare saddle outside any landscape (`z` is the scaled
/// partition function the caller wants to normalise by).
pub fn generator_residual_at<P: Potential<f64> + ?Sized>(
    pot: &P,
    sigma: &CriticalPoint,
    scale: &EpsilonScale,
    z: f64,
    quad: QuadOptions,
) -> Result<f64> {
    let d = sigma.dim();
    let b = SaddleBox::from_point(sigma, &sigma.eigenvectors[0], (0, 0), scale);
    let graph = LandscapeGraph {
        dim: d,
        level: scale.level,
        global_min: scale.global_min,
        wells: vec![],
        s_star: vec![],
        saddles: vec![],
        adjacency: vec![],
        valley_radius: 0.0,
        level_gap: 0.0,
        critical_points: vec![sigma.clone()],
        tolerance: 0.0,
        bounding_box: vec![],
    };
    let m = Model { pot, graph: &graph, quad };
    generator_residual_box(&m, &b, scale, z)
}

/// `F_eps^q`: `q(i)` on the well pieces of H^eps, the saddle profile inside
/// each box, extended beyond H^eps by a smoothstep in U.
pub struct TestFunction<'a, P: ?Sized> {
    pot: &'a P,
    graph: &'a LandscapeGraph,
    pub q: Vec<f64>,
    pub boxes: Vec<SaddleBox>,
    pub scale: EpsilonScale,
}

impl<P: Potential<f64> + ?Sized> TestFunction<'_, P> {
    fn nu_star(&self) -> f64 {
        self.graph
            .s_star
            .iter()
            .map(|&i| self.graph.well(i).minima.iter().map(|m| 1.0 / m.hessian_det().sqrt()).sum::<f64>())
            .sum()
    }

    /// Value on H^eps (no extension factor).
    pub fn value_inner(&self, x: &[f64]) -> f64 {
        for b in &self.boxes {
            if b.contains(x) {
                let (qi, qj) = (self.q[b.wells.0 - 1], self.q[b.wells.1 - 1]);
                return qi + (qj - qi) * b.profile(b.coords(x)[0]);
            }
        }
        self.q[self.well_of(x) - 1]
    }

    /// Well piece containing `x`, found by steepest descent.
    pub fn well_of(&self, x: &[f64]) -> usize {
        let minima: Vec<CriticalPoint> = self
            .graph
            .critical_points
            .iter()
            .filter(|c| c.kind == crate::landscape::CriticalKind::Minimum)
            .cloned()
            .collect();
        let reached = descend_to_minimum(self.pot, x, &minima, &self.graph.bounding_box, &DescentOptions::default())
            .ok()
            .and_then(|k| self.graph.well_of_minimum(&minima[k].location));
        reached.unwrap_or_else(|| {
            self.graph
                .wells
                .iter()
                .min_by(|a, b| {
                    distance(&a.minima[0].location, x).partial_cmp(&distance(&b.minima[0].location, x)).unwrap()
                })
                .map(|w| w.id)
                .unwrap_or(1)
        })
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let lo = self.scale.level + self.scale.cap();
        let u = self.pot.value(x);
        let inner = self.value_inner(x);
        if u <= lo {
            return inner;
        }
        let t = (u - lo).min(1.0);
        inner * (1.0 - t * t * (3.0 - 2.0 * t))
    }
}

/// One row of the `asymptotics` CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticsRow {
    pub epsilon: f64,
    pub z_quadrature: f64,
    pub z_laplace: f64,
    pub ratio: f64,
    pub valleys: Vec<f64>,
    pub delta: f64,
    pub dirichlet_ratio: f64,
    pub residual: f64,
}

/// Indicator of the highest-numbered deepest well.
pub fn default_q(g: &LandscapeGraph) -> Vec<f64> {
    let last = *g.s_star.last().expect("nonempty s_star");
    (1..=g.n_wells()).map(|i| if i == last { 1.0 } else { 0.0 }).collect()
}

pub fn asymptotics_row<P: Potential<f64> + ?Sized>(m: &Model<'_, P>, chain: &ChainX<f64>, eps: f64) -> Result<AsymptoticsRow> {
    let scale = EpsilonScale::new(eps, m.graph, None)?;
    let meas = m.measures(eps)?;
    let z = meas.z_quadrature;
    let dirichlet_ratio = match m.test_function(&default_q(m.graph), &scale) {
        Ok(tf) => m.dirichlet_energy(&tf, chain, z)?.ratio,
        Err(Error::BoxesOverlap { .. } | Error::BoxLevel { .. }) => f64::NAN,
        Err(e) => return Err(e),
    };
    let residual =
        (0..m.graph.saddles.len()).map(|k| m.generator_residual(k, &scale, z)).collect::<Result<Vec<_>>>()?;
    Ok(AsymptoticsRow {
        epsilon: eps,
        z_quadrature: z,
        z_laplace: meas.z_laplace,
        ratio: meas.ratio,
        valleys: meas.valleys,
        delta: meas.delta,
        dirichlet_ratio,
        residual: residual.into_iter().fold(0.0, f64::max),
    })
}
