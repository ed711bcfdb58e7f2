//! Analytic potentials with closed-form gradients and Hessians.
//!
//! The catalog is deliberately small: every entry has hand-coded derivatives
//! and documented critical points so that the rest of the pipeline can be
//! checked against exact values.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SymMatrix;
use crate::scalar::Real;

/// A point in R^d.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point<T>(pub Vec<T>);

impl<T: Real> Point<T> {
    pub fn new(coords: Vec<T>) -> Self {
        Self(coords)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[T] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    pub fn distance(&self, other: &Self) -> T {
        distance(&self.0, &other.0)
    }
}

impl<T> From<Vec<T>> for Point<T> {
    fn from(v: Vec<T>) -> Self {
        Self(v)
    }
}

pub fn distance<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum::<T>().sqrt()
}

pub fn norm<T: Real>(a: &[T]) -> T {
    a.iter().map(|&x| x * x).sum::<T>().sqrt()
}

/// A twice continuously differentiable potential U on R^d.
pub trait Potential<T: Real>: Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &[T]) -> T;

    /// Writes the gradient of U at `x` into `out`.
    fn gradient(&self, x: &[T], out: &mut [T]);

    fn hessian(&self, x: &[T]) -> SymMatrix<T>;

    fn gradient_vec(&self, x: &[T]) -> Vec<T> {
        let mut g = vec![T::zero(); self.dim()];
        self.gradient(x, &mut g);
        g
    }
}

impl<T: Real, P: Potential<T> + ?Sized> Potential<T> for &P {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value(&self, x: &[T]) -> T {
        (**self).value(x)
    }
    fn gradient(&self, x: &[T], out: &mut [T]) {
        (**self).gradient(x, out)
    }
    fn hessian(&self, x: &[T]) -> SymMatrix<T> {
        (**self).hessian(x)
    }
}

/// Built-in potentials.
#[derive(Clone, Debug, PartialEq)]
pub enum Builtin<T> {
    /// `(x^2 - 1)^2`: two global minima at +-1, saddle at 0 with value 1.
    DoubleWell,
    /// `(x^2 - 1)^2 + c x`: a single deepest well for `c != 0`.
    AsymDoubleWell { c: T },
    /// `(k / 2) |x|^2` in any dimension.
    Quadratic { k: T, dim: usize },
    /// `a (x^2 - 1)^2 (x^2 + b)`: deep minima at +-1, a shallow minimum at 0
    /// of height `a b`, saddles at `+-sqrt((1 - 2b) / 3)`. Needs `0 < b < 1/2`.
    TripleWell1d { a: T, b: T },
    /// `a (x^2 - 1)^2 (x^2 + b) + k (y - c x^2)^2`: the one-dimensional triple
    /// well lifted onto the curved valley `y = c x^2`. Critical points are
    /// `(x*, c x*^2)` for the critical points `x*` of the 1D profile, so the
    /// two outer minima share the global depth 0 and both saddles share the
    /// same height exactly.
    TripleWell2d { a: T, b: T, k: T, c: T },
}

fn param<T: Real>(params: &BTreeMap<String, f64>, key: &str, default: f64) -> T {
    T::lit(params.get(key).copied().unwrap_or(default))
}

impl<T: Real> Builtin<T> {
    pub fn from_name(name: &str, params: &BTreeMap<String, f64>, dim: usize) -> Result<Self> {
        let b = match name {
            "double_well" => Builtin::DoubleWell,
            "asym_double_well" => Builtin::AsymDoubleWell { c: param(params, "c", 0.1) },
            "quadratic" => Builtin::Quadratic { k: param(params, "k", 1.0), dim },
            "triple_well_1d" => {
                Builtin::TripleWell1d { a: param(params, "a", 1.0), b: param(params, "b", 0.25) }
            }
            "triple_well_2d" => Builtin::TripleWell2d {
                a: param(params, "a", 4.0),
                b: param(params, "b", 0.05),
                k: param(params, "k", 2.0),
                c: param(params, "c", 0.5),
            },
            other => return Err(Error::UnknownPotential(other.to_string())),
        };
        match &b {
            Builtin::TripleWell1d { b: bb, .. } | Builtin::TripleWell2d { b: bb, .. }
                if !(*bb > T::zero() && *bb < T::lit(0.5)) =>
            {
                return Err(Error::InvalidParameter(format!("{name}: b must lie in (0, 1/2)")));
            }
            Builtin::Quadratic { k, .. } if *k <= T::zero() => {
                return Err(Error::InvalidParameter("quadratic: k must be positive".into()));
            }
            _ => {}
        }
        if b.dim() != dim {
            return Err(Error::DimensionMismatch { expected: b.dim(), got: dim });
        }
        Ok(b)
    }

    /// Profile `v(x) = (x^2-1)^2 (x^2+b)` with its first two derivatives.
    #[inline]
    fn triple_profile(x: T, b: T) -> (T, T, T) {
        let two = T::lit(2.0);
        let three = T::lit(3.0);
        let x2 = x * x;
        let w = x2 - T::one();
        let v = w * w * (x2 + b);
        // v' = 2x (x^2-1)(3x^2 + 2b - 1)
        let s = three * x2 + two * b - T::one();
        let dv = two * x * w * s;
        // v'' = 30x^4 + (12b - 24)x^2 + 2 - 4b
        let d2v = T::lit(30.0) * x2 * x2 + (T::lit(12.0) * b - T::lit(24.0)) * x2 + two - T::lit(4.0) * b;
        (v, dv, d2v)
    }
}

impl<T: Real> Potential<T> for Builtin<T> {
    fn dim(&self) -> usize {
        match self {
            Builtin::DoubleWell | Builtin::AsymDoubleWell { .. } | Builtin::TripleWell1d { .. } => 1,
            Builtin::Quadratic { dim, .. } => *dim,
            Builtin::TripleWell2d { .. } => 2,
        }
    }

    #[inline]
    fn value(&self, x: &[T]) -> T {
        match *self {
            Builtin::DoubleWell => {
                let w = x[0] * x[0] - T::one();
                w * w
            }
            Builtin::AsymDoubleWell { c } => {
                let w = x[0] * x[0] - T::one();
                w * w + c * x[0]
            }
            Builtin::Quadratic { k, .. } => T::lit(0.5) * k * x.iter().map(|&v| v * v).sum::<T>(),
            Builtin::TripleWell1d { a, b } => a * Self::triple_profile(x[0], b).0,
            Builtin::TripleWell2d { a, b, k, c } => {
                let r = x[1] - c * x[0] * x[0];
                a * Self::triple_profile(x[0], b).0 + k * r * r
            }
        }
    }

    #[inline]
    fn gradient(&self, x: &[T], out: &mut [T]) {
        let four = T::lit(4.0);
        match *self {
            Builtin::DoubleWell => out[0] = four * x[0] * (x[0] * x[0] - T::one()),
            Builtin::AsymDoubleWell { c } => out[0] = four * x[0] * (x[0] * x[0] - T::one()) + c,
            Builtin::Quadratic { k, .. } => {
                for (o, &v) in out.iter_mut().zip(x) {
                    *o = k * v;
                }
            }
            Builtin::TripleWell1d { a, b } => out[0] = a * Self::triple_profile(x[0], b).1,
            Builtin::TripleWell2d { a, b, k, c } => {
                let r = x[1] - c * x[0] * x[0];
                out[0] = a * Self::triple_profile(x[0], b).1 - four * k * c * x[0] * r;
                out[1] = T::lit(2.0) * k * r;
            }
        }
    }

    fn hessian(&self, x: &[T]) -> SymMatrix<T> {
        let four = T::lit(4.0);
        match *self {
            Builtin::DoubleWell | Builtin::AsymDoubleWell { .. } => {
                SymMatrix::from_diagonal(&[T::lit(12.0) * x[0] * x[0] - four])
            }
            Builtin::Quadratic { k, dim } => SymMatrix::from_diagonal(&vec![k; dim]),
            Builtin::TripleWell1d { a, b } => SymMatrix::from_diagonal(&[a * Self::triple_profile(x[0], b).2]),
            Builtin::TripleWell2d { a, b, k, c } => {
                let r = x[1] - c * x[0] * x[0];
                let mut h = SymMatrix::zeros(2);
                h.set(
                    0,
                    0,
                    a * Self::triple_profile(x[0], b).2 - four * k * c * r + T::lit(8.0) * k * c * c * x[0] * x[0],
                );
                h.set(0, 1, -four * k * c * x[0]);
                h.set(1, 1, T::lit(2.0) * k);
                h
            }
        }
    }
}

/// Named potential as it appears in a configuration file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    pub dim: usize,
    /// Per-axis `[lo, hi]` bounding box.
    #[serde(rename = "box")]
    pub bounding_box: Vec<[f64; 2]>,
}

impl PotentialSpec {
    pub fn new(name: &str, dim: usize, bounding_box: Vec<[f64; 2]>) -> Self {
        Self { name: name.to_string(), params: BTreeMap::new(), dim, bounding_box }
    }

    pub fn with_param(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    /// Catalog entry with its default box.
    pub fn builtin(name: &str) -> Result<Self> {
        let spec = match name {
            "double_well" | "asym_double_well" | "triple_well_1d" => Self::new(name, 1, vec![[-3.0, 3.0]]),
            "quadratic" => Self::new(name, 1, vec![[-5.0, 5.0]]),
            "triple_well_2d" => Self::new(name, 2, vec![[-2.5, 2.5], [-2.0, 3.5]]),
            other => return Err(Error::UnknownPotential(other.to_string())),
        };
        Ok(spec)
    }

    pub fn instantiate<T: Real>(&self) -> Result<Builtin<T>> {
        if self.bounding_box.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: self.bounding_box.len() });
        }
        if self.bounding_box.iter().any(|[lo, hi]| !(lo < hi)) {
            return Err(Error::InvalidParameter("bounding box needs lo < hi on every axis".into()));
        }
        Builtin::from_name(&self.name, &self.params, self.dim)
    }

    fn check_point<T: Real>(&self, x: &Point<T>) -> Result<Builtin<T>> {
        if x.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.dim() });
        }
        self.instantiate()
    }
}

pub fn eval<T: Real>(spec: &PotentialSpec, x: &Point<T>) -> Result<T> {
    Ok(spec.check_point(x)?.value(x.coords()))
}

pub fn grad<T: Real>(spec: &PotentialSpec, x: &Point<T>) -> Result<Point<T>> {
    Ok(Point(spec.check_point(x)?.gradient_vec(x.coords())))
}

pub fn hessian<T: Real>(spec: &PotentialSpec, x: &Point<T>) -> Result<SymMatrix<T>> {
    Ok(spec.check_point(x)?.hessian(x.coords()))
}
