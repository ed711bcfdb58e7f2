//! Metastable diffusions in multi-well potentials: landscape analysis, the
//! reduced Markov chains among the deepest wells, quadrature checks of the
//! small-noise asymptotics, a one-dimensional Poisson solver, and
//! Euler-Maruyama simulation of the trace process with statistical checks
//! against the limiting chain.

pub mod asymptotics;
pub mod chain;
pub mod error;
pub mod landscape;
pub mod linalg;
pub mod poisson;
pub mod potential;
pub mod quadrature;
pub mod scalar;
pub mod simulate;
pub mod verify;

pub use error::{Error, Result};
pub use landscape::{CriticalKind, CriticalPoint, LandscapeGraph, Location};
pub use linalg::{Matrix, SymEigen, SymMatrix};
pub use potential::{Builtin, Point, Potential, PotentialSpec};
pub use scalar::Real;

pub type Point64 = Point<f64>;
pub type Point32 = Point<f32>;
pub type SymMatrix64 = SymMatrix<f64>;
pub type SymMatrix32 = SymMatrix<f32>;
pub type Builtin64 = Builtin<f64>;
pub type Builtin32 = Builtin<f32>;
pub use chain::{ChainSummary, ChainX, ChainY};
pub type ChainX64 = ChainX<f64>;
pub type ChainX32 = ChainX<f32>;
pub type ChainY64 = ChainY<f64>;
pub type ChainY32 = ChainY<f32>;
