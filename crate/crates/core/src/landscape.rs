//! Critical points, well decomposition of `{U < H}`, deepest wells and the
//! metastable valleys.
//!
//! Critical points are located by Newton's method from a uniform grid of
//! seeds. Wells are equivalence classes of minima joined through saddles
//! strictly below the level `H`; which minima a saddle joins is decided by
//! steepest descent from both sides of the saddle along its unstable
//! direction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{lu_solve, sym_eigen, Matrix};
use crate::potential::{distance, norm, Potential};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticalKind {
    Minimum,
    SaddleIndex1,
    Other,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub location: Vec<f64>,
    pub value: f64,
    /// Hessian eigenvalues, ascending.
    pub eigenvalues: Vec<f64>,
    /// Unit eigenvectors matching `eigenvalues`.
    pub eigenvectors: Vec<Vec<f64>>,
    pub kind: CriticalKind,
}

impl CriticalPoint {
    pub fn hessian_det(&self) -> f64 {
        self.eigenvalues.iter().product()
    }

    pub fn dim(&self) -> usize {
        self.location.len()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SearchOptions {
    /// Newton seeds per axis.
    pub grid_density: usize,
    pub grad_tol: f64,
    pub dedup_radius: f64,
    pub degeneracy_tol: f64,
    pub max_newton: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self { grid_density: 64, grad_tol: 1e-10, dedup_radius: 1e-6, degeneracy_tol: 1e-8, max_newton: 200 }
    }
}

/// Evaluates and classifies a point already known to be critical.
pub fn classify<P: Potential<f64> + ?Sized>(pot: &P, x: &[f64], degeneracy_tol: f64) -> Result<CriticalPoint> {
    let eig = sym_eigen(&pot.hessian(x))?;
    let min_abs = eig.values.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if min_abs <= degeneracy_tol {
        return Err(Error::DegenerateCriticalPoint { location: x.to_vec(), min_abs_eigenvalue: min_abs });
    }
    let negatives = eig.values.iter().filter(|&&v| v < 0.0).count();
    let kind = match negatives {
        0 => CriticalKind::Minimum,
        1 => CriticalKind::SaddleIndex1,
        _ => CriticalKind::Other,
    };
    Ok(CriticalPoint {
        location: x.to_vec(),
        value: pot.value(x),
        eigenvalues: eig.values,
        eigenvectors: eig.vectors,
        kind,
    })
}

/// Newton iteration on the gradient. Returns the converged point and its
/// gradient norm, or `None` when the iteration stalls or escapes `bbox`.
fn newton<P: Potential<f64> + ?Sized>(pot: &P, seed: &[f64], bbox: &[[f64; 2]], opts: &SearchOptions) -> Option<(Vec<f64>, f64)> {
    let d = seed.len();
    let span = bbox.iter().map(|[lo, hi]| hi - lo).fold(0.0, f64::max);
    let mut x = seed.to_vec();
    let mut g = vec![0.0; d];
    let mut best: Option<(Vec<f64>, f64)> = None;
    for _ in 0..opts.max_newton {
        pot.gradient(&x, &mut g);
        let gn = norm(&g);
        if !gn.is_finite() {
            return None;
        }
        if gn <= opts.grad_tol && best.as_ref().is_none_or(|(_, b)| gn < *b) {
            best = Some((x.clone(), gn));
        }
        if gn == 0.0 {
            break;
        }
        let h = Matrix::from_rows(&pot.hessian(&x).to_rows());
        let step = lu_solve(&h, &g).ok()?;
        let sn = norm(&step);
        let scale = if sn > 0.25 * span { 0.25 * span / sn } else { 1.0 };
        for (xi, si) in x.iter_mut().zip(&step) {
            *xi -= scale * si;
        }
        let margin = 0.25 * span;
        if x.iter().zip(bbox).any(|(&v, [lo, hi])| v < lo - margin || v > hi + margin) {
            return None;
        }
        if best.is_some() && sn <= 1e-15 * (1.0 + norm(&x)) {
            break;
        }
    }
    best
}

/// Multi-start Newton search over the bounding box (d <= 2).
///
/// Returned points are deduplicated, classified and sorted lexicographically
/// by location.
pub fn find_critical_points<P: Potential<f64> + ?Sized>(pot: &P, bbox: &[[f64; 2]], opts: &SearchOptions) -> Result<Vec<CriticalPoint>> {
    let d = pot.dim();
    if !(1..=2).contains(&d) {
        return Err(Error::UnsupportedDimension(d));
    }
    if bbox.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: bbox.len() });
    }
    let n = opts.grid_density.max(2);
    let axis = |k: usize| -> Vec<f64> {
        let [lo, hi] = bbox[k];
        (0..n).map(|i| lo + (hi - lo) * (i as f64 + 0.5) / n as f64).collect()
    };
    let seeds: Vec<Vec<f64>> = if d == 1 {
        axis(0).into_iter().map(|x| vec![x]).collect()
    } else {
        let (ax, ay) = (axis(0), axis(1));
        ax.iter().flat_map(|&x| ay.iter().map(move |&y| vec![x, y])).collect()
    };

    let mut found: Vec<(Vec<f64>, f64)> = Vec::new();
    for seed in &seeds {
        let Some((x, gn)) = newton(pot, seed, bbox, opts) else { continue };
        if x.iter().zip(bbox).any(|(&v, [lo, hi])| v < *lo || v > *hi) {
            continue;
        }
        match found.iter_mut().find(|(y, _)| distance(y, &x) <= opts.dedup_radius) {
            Some(slot) => {
                if gn < slot.1 {
                    *slot = (x, gn);
                }
            }
            None => found.push((x, gn)),
        }
    }
    found.sort_by(|a, b| lex_cmp(&a.0, &b.0));
    found.iter().map(|(x, _)| classify(pot, x, opts.degeneracy_tol)).collect()
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal) {
            std::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    std::cmp::Ordering::Equal
}

#[derive(Clone, Copy, Debug)]
pub struct DescentOptions {
    pub max_steps: usize,
    /// Gradient norm at which descent hands over to Newton polishing.
    pub grad_tol: f64,
    /// Abort once the path leaves the bounding box enlarged by this factor.
    pub escape_factor: f64,
}

impl Default for DescentOptions {
    fn default() -> Self {
        Self { max_steps: 200_000, grad_tol: 1e-8, escape_factor: 2.0 }
    }
}

/// Steepest descent with Armijo backtracking. Returns the visited path; `U`
/// is strictly decreasing along it.
pub fn descend_path<P: Potential<f64> + ?Sized>(
    pot: &P,
    start: &[f64],
    bbox: &[[f64; 2]],
    opts: &DescentOptions,
) -> Result<Vec<Vec<f64>>> {
    let d = start.len();
    let mut x = start.to_vec();
    let mut g = vec![0.0; d];
    let mut u = pot.value(&x);
    let mut eta = 1e-3;
    let mut path = vec![x.clone()];
    let center: Vec<f64> = bbox.iter().map(|[lo, hi]| 0.5 * (lo + hi)).collect();
    let radius = norm(&bbox.iter().map(|[lo, hi]| 0.5 * (hi - lo)).collect::<Vec<_>>());
    let mut trial = vec![0.0; d];
    for _ in 0..opts.max_steps {
        pot.gradient(&x, &mut g);
        let gn2: f64 = g.iter().map(|v| v * v).sum();
        if gn2.sqrt() <= opts.grad_tol {
            return Ok(path);
        }
        loop {
            for k in 0..d {
                trial[k] = x[k] - eta * g[k];
            }
            let ut = pot.value(&trial);
            if ut.is_finite() && ut <= u - 1e-4 * eta * gn2 {
                x.copy_from_slice(&trial);
                u = ut;
                eta *= 1.5;
                break;
            }
            eta *= 0.5;
            if eta < 1e-300 {
                return Err(Error::DescentFailed { start: start.to_vec(), steps: path.len() });
            }
        }
        path.push(x.clone());
        if distance(&x, &center) > opts.escape_factor * radius {
            return Err(Error::DescentFailed { start: start.to_vec(), steps: path.len() });
        }
    }
    Err(Error::DescentFailed { start: start.to_vec(), steps: opts.max_steps })
}

/// Descends from `start` and returns the index of the minimum reached.
pub fn descend_to_minimum<P: Potential<f64> + ?Sized>(
    pot: &P,
    start: &[f64],
    minima: &[CriticalPoint],
    bbox: &[[f64; 2]],
    opts: &DescentOptions,
) -> Result<usize> {
    let path = descend_path(pot, start, bbox, opts)?;
    let end = path.last().expect("path holds the start point");
    minima
        .iter()
        .enumerate()
        .map(|(k, m)| (k, distance(&m.location, end)))
        .filter(|&(_, dist)| dist < 1e-3)
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .map(|(k, _)| k)
        .ok_or(Error::DescentFailed { start: start.to_vec(), steps: path.len() })
}

/// Offset used to leave a saddle along its unstable direction: 1e-3 times the
/// distance to the nearest other critical point (or 1e-3 when isolated).
pub fn saddle_offset(sigma: &CriticalPoint, points: &[CriticalPoint]) -> f64 {
    let nearest = points
        .iter()
        .map(|c| distance(&c.location, &sigma.location))
        .filter(|&r| r > 1e-9)
        .fold(f64::INFINITY, f64::min);
    1e-3 * if nearest.is_finite() { nearest } else { 1.0 }
}

/// Minima reached from `sigma - alpha v1` and `sigma + alpha v1`.
pub fn descend_sides<P: Potential<f64> + ?Sized>(
    pot: &P,
    sigma: &CriticalPoint,
    minima: &[CriticalPoint],
    alpha: f64,
    bbox: &[[f64; 2]],
) -> Result<(usize, usize)> {
    if sigma.kind != CriticalKind::SaddleIndex1 {
        return Err(Error::NotASaddle);
    }
    let v1 = &sigma.eigenvectors[0];
    let shifted = |s: f64| -> Vec<f64> { sigma.location.iter().zip(v1).map(|(x, v)| x + s * alpha * v).collect() };
    let opts = DescentOptions::default();
    let minus = descend_to_minimum(pot, &shifted(-1.0), minima, bbox, &opts)?;
    let plus = descend_to_minimum(pot, &shifted(1.0), minima, bbox, &opts)?;
    Ok((minus, plus))
}

/// The two wells a saddle separates, with its unstable direction oriented
/// into the higher-numbered well.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaddleSides {
    /// Well ids `(i, j)` with `i < j`.
    pub wells: (usize, usize),
    pub unstable_direction: Vec<f64>,
}

/// Resolves the wells on both sides of `sigma`. `well_of_minimum[k]` is the
/// well id of `minima[k]` (None for minima outside `{U < H}`).
pub fn saddle_sides<P: Potential<f64> + ?Sized>(
    pot: &P,
    sigma: &CriticalPoint,
    minima: &[CriticalPoint],
    well_of_minimum: &[Option<usize>],
    alpha: f64,
    bbox: &[[f64; 2]],
) -> Result<SaddleSides> {
    let (minus, plus) = descend_sides(pot, sigma, minima, alpha, bbox)?;
    let wm = well_of_minimum[minus].ok_or(Error::NotSeparating { location: sigma.location.clone(), well: 0 })?;
    let wp = well_of_minimum[plus].ok_or(Error::NotSeparating { location: sigma.location.clone(), well: 0 })?;
    if wm == wp {
        return Err(Error::NotSeparating { location: sigma.location.clone(), well: wm });
    }
    let mut v1 = sigma.eigenvectors[0].clone();
    if wm > wp {
        v1.iter_mut().for_each(|v| *v = -*v);
    }
    Ok(SaddleSides { wells: (wm.min(wp), wm.max(wp)), unstable_direction: v1 })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Well {
    pub id: usize,
    /// Minima attaining the well depth (the set M_i).
    pub minima: Vec<CriticalPoint>,
    pub depth: f64,
    pub deepest: bool,
    /// Locations of every minimum in the well, deepest or not.
    pub basin: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Saddle {
    pub point: CriticalPoint,
    pub wells: (usize, usize),
    /// Unit eigenvector of the negative eigenvalue, pointing into `wells.1`.
    pub unstable_direction: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adjacency {
    pub i: usize,
    pub j: usize,
    /// Indices into `LandscapeGraph::saddles`.
    pub saddles: Vec<usize>,
}

/// Decomposition of `{U < H}` into wells and the saddles joining them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LandscapeGraph {
    pub dim: usize,
    /// Common saddle height H.
    pub level: f64,
    /// Global minimum value h.
    pub global_min: f64,
    pub wells: Vec<Well>,
    /// Ids of the deepest wells.
    pub s_star: Vec<usize>,
    pub saddles: Vec<Saddle>,
    pub adjacency: Vec<Adjacency>,
    pub valley_radius: f64,
    /// Half the gap between H and the highest critical value below it.
    pub level_gap: f64,
    pub critical_points: Vec<CriticalPoint>,
    pub tolerance: f64,
    pub bounding_box: Vec<[f64; 2]>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Level {
    Auto,
    Fixed(f64),
}

#[derive(Clone, Copy, Debug)]
pub struct LandscapeOptions {
    pub level: Level,
    /// Equal-height tolerance for H and h.
    pub tolerance: f64,
    pub allow_single: bool,
}

impl Default for LandscapeOptions {
    fn default() -> Self {
        Self { level: Level::Auto, tolerance: 1e-9, allow_single: false }
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }
    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra.max(rb)] = ra.min(rb);
        true
    }
}

/// Saddle with the pair of minima its two descent paths reach.
struct SaddleLink {
    point: usize,
    value: f64,
    minima: (usize, usize),
}

fn minima_classes(n_minima: usize, links: &[SaddleLink], below: f64) -> UnionFind {
    let mut uf = UnionFind::new(n_minima);
    for l in links.iter().filter(|l| l.value < below) {
        uf.union(l.minima.0, l.minima.1);
    }
    uf
}

/// Builds the well graph at level H (given or automatic).
pub fn build_landscape<P: Potential<f64> + ?Sized>(
    pot: &P,
    bbox: &[[f64; 2]],
    points: &[CriticalPoint],
    opts: &LandscapeOptions,
) -> Result<LandscapeGraph> {
    let tol = opts.tolerance;
    let minima: Vec<CriticalPoint> = points.iter().filter(|c| c.kind == CriticalKind::Minimum).cloned().collect();
    let saddle_idx: Vec<usize> =
        (0..points.len()).filter(|&k| points[k].kind == CriticalKind::SaddleIndex1).collect();

    let mut links = Vec::with_capacity(saddle_idx.len());
    for &k in &saddle_idx {
        let sigma = &points[k];
        let alpha = saddle_offset(sigma, points);
        let (a, b) = descend_sides(pot, sigma, &minima, alpha, bbox)?;
        links.push(SaddleLink { point: k, value: sigma.value, minima: (a, b) });
    }

    let level = match opts.level {
        Level::Fixed(h) => h,
        Level::Auto => auto_level(&minima, &links, tol)?,
    };

    // Wells: classes of minima below H joined by saddles below H.
    let mut uf = minima_classes(minima.len(), &links, level - tol);
    let inside: Vec<usize> = (0..minima.len()).filter(|&k| minima[k].value < level - tol).collect();
    let mut roots: Vec<usize> = inside.iter().map(|&k| uf.find(k)).collect();
    roots.sort_unstable();
    roots.dedup();
    if roots.is_empty() {
        return Err(Error::Disconnected { level, components: 0 });
    }

    struct Proto {
        members: Vec<usize>,
        depth: f64,
        deepest_minima: Vec<usize>,
    }
    let mut protos: Vec<Proto> = roots
        .iter()
        .map(|&r| {
            let members: Vec<usize> = inside.iter().copied().filter(|&k| uf.find(k) == r).collect();
            let depth = members.iter().map(|&k| minima[k].value).fold(f64::INFINITY, f64::min);
            let deepest_minima: Vec<usize> =
                members.iter().copied().filter(|&k| minima[k].value <= depth + tol).collect();
            Proto { members, depth, deepest_minima }
        })
        .collect();
    // Order by the lowest minimum of each well (ties broken lexicographically).
    let key = |p: &Proto| -> Vec<f64> {
        let best = p
            .deepest_minima
            .iter()
            .copied()
            .min_by(|&a, &b| {
                minima[a].value.partial_cmp(&minima[b].value).unwrap().then(lex_cmp(&minima[a].location, &minima[b].location))
            })
            .unwrap();
        minima[best].location.clone()
    };
    protos.sort_by(|a, b| lex_cmp(&key(a), &key(b)));

    let mut well_of_minimum: Vec<Option<usize>> = vec![None; minima.len()];
    for (w, p) in protos.iter().enumerate() {
        for &k in &p.members {
            well_of_minimum[k] = Some(w + 1);
        }
    }

    // Saddles at height H that separate two distinct wells.
    let mut saddles = Vec::new();
    for link in &links {
        if (link.value - level).abs() > tol {
            continue;
        }
        let (wa, wb) = (well_of_minimum[link.minima.0], well_of_minimum[link.minima.1]);
        let (Some(wa), Some(wb)) = (wa, wb) else { continue };
        if wa == wb {
            continue;
        }
        let sigma = points[link.point].clone();
        let mut v1 = sigma.eigenvectors[0].clone();
        // descend_sides reports (minus side, plus side)
        if wa > wb {
            v1.iter_mut().for_each(|v| *v = -*v);
        }
        saddles.push(Saddle { point: sigma, wells: (wa.min(wb), wa.max(wb)), unstable_direction: v1 });
    }

    // Connectivity of the closure of {U < H}.
    let k_wells = protos.len();
    let mut wuf = UnionFind::new(k_wells);
    for s in &saddles {
        wuf.union(s.wells.0 - 1, s.wells.1 - 1);
    }
    let components = (0..k_wells).filter(|&w| wuf.find(w) == w).count();
    if components > 1 {
        if saddles.is_empty() {
            return Err(Error::Disconnected { level, components });
        }
        // Which higher saddles would be needed to join the pieces?
        let mut higher: Vec<&SaddleLink> = links.iter().filter(|l| l.value > level + tol).collect();
        higher.sort_by(|a, b| a.value.partial_cmp(&b.value).unwrap());
        let mut heights: Vec<f64> = saddles.iter().map(|s| s.point.value).collect();
        let mut joined = components;
        for l in higher {
            let (Some(wa), Some(wb)) = (well_of_minimum[l.minima.0], well_of_minimum[l.minima.1]) else { continue };
            if wuf.union(wa - 1, wb - 1) {
                heights.push(l.value);
                joined -= 1;
                if joined == 1 {
                    break;
                }
            }
        }
        if joined == 1 {
            return Err(Error::UnequalSaddleHeights { heights });
        }
        return Err(Error::Disconnected { level, components });
    }

    let global_min = protos.iter().map(|p| p.depth).fold(f64::INFINITY, f64::min);
    let wells: Vec<Well> = protos
        .iter()
        .enumerate()
        .map(|(w, p)| Well {
            id: w + 1,
            minima: p.deepest_minima.iter().map(|&k| minima[k].clone()).collect(),
            depth: p.depth,
            deepest: p.depth <= global_min + tol,
            basin: p.members.iter().map(|&k| minima[k].location.clone()).collect(),
        })
        .collect();
    let s_star: Vec<usize> = wells.iter().filter(|w| w.deepest).map(|w| w.id).collect();
    if s_star.len() < 2 && !opts.allow_single {
        return Err(Error::SingleDeepestWell(s_star.len()));
    }

    let mut adjacency: Vec<Adjacency> = Vec::new();
    for (k, s) in saddles.iter().enumerate() {
        match adjacency.iter_mut().find(|a| (a.i, a.j) == s.wells) {
            Some(a) => a.saddles.push(k),
            None => adjacency.push(Adjacency { i: s.wells.0, j: s.wells.1, saddles: vec![k] }),
        }
    }
    adjacency.sort_by_key(|a| (a.i, a.j));

    let all_minima: Vec<&CriticalPoint> = wells.iter().flat_map(|w| w.minima.iter()).collect();
    let (valley_radius, level_gap) = choose_valley_radius(pot, points, &all_minima, level, tol);

    Ok(LandscapeGraph {
        dim: pot.dim(),
        level,
        global_min,
        wells,
        s_star,
        saddles,
        adjacency,
        valley_radius,
        level_gap,
        critical_points: points.to_vec(),
        tolerance: tol,
        bounding_box: bbox.to_vec(),
    })
}

/// Lowest saddle level at which some saddle joins two classes of minima that
/// are still separate below that level.
fn auto_level(minima: &[CriticalPoint], links: &[SaddleLink], tol: f64) -> Result<f64> {
    let mut sorted: Vec<&SaddleLink> = links.iter().collect();
    sorted.sort_by(|a, b| a.value.partial_cmp(&b.value).unwrap());
    let mut k = 0;
    while k < sorted.len() {
        let base = sorted[k].value;
        let group: Vec<&SaddleLink> = sorted[k..].iter().copied().take_while(|l| l.value - base <= tol).collect();
        let mut uf = minima_classes(minima.len(), links, base - tol);
        if group.iter().any(|l| uf.find(l.minima.0) != uf.find(l.minima.1)) {
            return Ok(base);
        }
        k += group.len();
    }
    Err(Error::NoSeparatingLevel)
}

/// Distance from `m` to the set `{U >= level}`, by ray marching and bisection.
pub fn distance_to_superlevel<P: Potential<f64> + ?Sized>(pot: &P, m: &[f64], level: f64, reach: f64) -> f64 {
    let step = reach * 1e-3;
    let along = |dir: &[f64]| -> f64 {
        let at = |t: f64| -> f64 {
            let x: Vec<f64> = m.iter().zip(dir).map(|(a, d)| a + t * d).collect();
            pot.value(&x)
        };
        let mut t = 0.0;
        while t < reach {
            let next = t + step;
            if at(next) >= level {
                let (mut lo, mut hi) = (t, next);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if at(mid) >= level {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                return lo;
            }
            t = next;
        }
        reach
    };
    match m.len() {
        1 => along(&[1.0]).min(along(&[-1.0])),
        2 => {
            let dir = |th: f64| [th.cos(), th.sin()];
            let n = 720;
            let (mut best_th, mut best) = (0.0, f64::INFINITY);
            for k in 0..n {
                let th = std::f64::consts::TAU * k as f64 / n as f64;
                let r = along(&dir(th));
                if r < best {
                    best = r;
                    best_th = th;
                }
            }
            // golden-section refinement around the best ray
            let (mut a, mut b) = (best_th - std::f64::consts::TAU / n as f64, best_th + std::f64::consts::TAU / n as f64);
            let g = 0.5 * (5f64.sqrt() - 1.0);
            for _ in 0..40 {
                let c = b - g * (b - a);
                let d = a + g * (b - a);
                if along(&dir(c)) < along(&dir(d)) {
                    b = d;
                } else {
                    a = c;
                }
            }
            best.min(along(&dir(0.5 * (a + b))))
        }
        d => panic!("distance_to_superlevel: unsupported dimension {d}"),
    }
}

/// Radius of the valley balls and the level gap `a`.
///
/// `r0 = min_m min(dist(m, other critical points), dist(m, {U >= H - a})) / 2`
/// with `a` half the gap between H and the highest critical value below H.
pub fn choose_valley_radius<P: Potential<f64> + ?Sized>(
    pot: &P,
    points: &[CriticalPoint],
    minima: &[&CriticalPoint],
    level: f64,
    tol: f64,
) -> (f64, f64) {
    let highest_below =
        points.iter().map(|c| c.value).filter(|&v| v < level - tol).fold(f64::NEG_INFINITY, f64::max);
    let gap = 0.5 * (level - highest_below);
    let reach = 10.0;
    let r0 = minima
        .iter()
        .map(|m| {
            let d_crit = points
                .iter()
                .map(|c| distance(&c.location, &m.location))
                .filter(|&r| r > 1e-9)
                .fold(f64::INFINITY, f64::min);
            let d_level = distance_to_superlevel(pot, &m.location, level - gap, reach);
            0.5 * d_crit.min(d_level)
        })
        .fold(f64::INFINITY, f64::min);
    (r0, gap)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Location {
    Valley(usize),
    Delta,
}

impl LandscapeGraph {
    pub fn well(&self, id: usize) -> &Well {
        &self.wells[id - 1]
    }

    pub fn n_wells(&self) -> usize {
        self.wells.len()
    }

    /// Open valley balls of the deepest wells: `(center, well id)`.
    pub fn valley_centers(&self) -> Vec<(Vec<f64>, usize)> {
        self.s_star
            .iter()
            .flat_map(|&i| self.well(i).minima.iter().map(move |m| (m.location.clone(), i)))
            .collect()
    }

    /// Valley containing `x`, or Delta.
    pub fn locate(&self, x: &[f64]) -> Location {
        let r2 = self.valley_radius * self.valley_radius;
        for &i in &self.s_star {
            for m in &self.well(i).minima {
                let d2: f64 = m.location.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
                if d2 < r2 {
                    return Location::Valley(i);
                }
            }
        }
        Location::Delta
    }

    /// Largest |Hessian eigenvalue| over all critical points.
    pub fn max_curvature(&self) -> f64 {
        self.critical_points.iter().flat_map(|c| c.eigenvalues.iter()).fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Saddles of one adjacency pair.
    pub fn saddles_between(&self, i: usize, j: usize) -> impl Iterator<Item = &Saddle> {
        let (a, b) = (i.min(j), i.max(j));
        self.saddles.iter().filter(move |s| s.wells == (a, b))
    }

    /// Well owning the minimum at `x` (any minimum of the basin).
    pub fn well_of_minimum(&self, x: &[f64]) -> Option<usize> {
        self.wells.iter().find(|w| w.basin.iter().any(|m| distance(m, x) < 1e-6)).map(|w| w.id)
    }

    /// Deepest minimum of well `id` (first in lexicographic order).
    pub fn anchor(&self, id: usize) -> &[f64] {
        &self.well(id).minima[0].location
    }
}

/// Critical point search followed by well decomposition.
pub fn analyze<P: Potential<f64> + ?Sized>(
    pot: &P,
    bbox: &[[f64; 2]],
    search: &SearchOptions,
    opts: &LandscapeOptions,
) -> Result<LandscapeGraph> {
    let points = find_critical_points(pot, bbox, search)?;
    build_landscape(pot, bbox, &points, opts)
}
