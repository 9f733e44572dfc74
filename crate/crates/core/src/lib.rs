//! Numerics and Monte Carlo machinery for supercritical branching Lévy
//! processes whose spatial motion has regularly varying (α-stable) tails.
//!
//! The crate is organized around the objects that govern the extremes of
//! such a particle system:
//!
//! * [`gw`] — deterministic analysis of the continuous-time Galton–Watson
//!   skeleton: generating functions, extinction probability, the growth and
//!   decay rates λ and ρ, the limit objects A, V, φ, ϑ, ϑ*, the cluster-size
//!   law T, and the functional C(φ).
//! * [`stable`] — strictly α-stable increments: the correspondence between
//!   the exponent coefficient c* and the Lévy tail weights (q₁, q₂),
//!   Chambers–Mallows–Stuck sampling, and tail asymptotics.
//! * [`scaling`] — slowly varying functions and the norming functions H, h
//!   and r that scale every limit theorem.
//! * [`tree`] — forward simulation of the branching Lévy process with
//!   per-particle displacement records.
//! * [`measure`] / [`extremes`] — finite point measures, the multiplicative
//!   functional I(g, ν), deviation-probability estimators, and exact
//!   samplers for the limiting random measures.
//!
//! Everything is deterministic given an RNG stream; no global state.

pub mod error;
pub mod extremes;
pub mod gw;
pub mod measure;
pub mod scaling;
pub mod stable;
pub mod tree;

pub(crate) mod ode;
pub(crate) mod quad;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use extremes::LimitLawBundle;
pub use gw::{GwDerived, OffspringLaw, TestFunction};
pub use measure::PointMeasure;
pub use scaling::{SlowVariationSpec, ThresholdSpec};
pub use stable::{Side, StableMotionParams};
pub use tree::{ModelParams, SimOptions, TreeSnapshot};
