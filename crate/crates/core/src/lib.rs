//! Truncated Hermite–Sobolev spaces and stochastic invariance of submanifolds.
//!
//! The crate is organised bottom-up:
//!
//! - [`hermite`]: Hermite functions, multi-index bases and Gauss–Hermite quadrature.
//! - [`sobolev`]: coefficient vectors in the scale `S_p(R^d)`, graded norms and pairings.
//! - [`operators`]: matrices of `∂_i`, `M_i`, the Hermite operator and the translation group.
//! - [`distributions`]: Dirac deltas, atomic measures and low-degree polynomials.
//! - [`sde`]: Euler–Maruyama integration with reproducible, coupled Wiener increments.
//! - [`geometry`]: level-set and chart descriptions of submanifolds, projectors, generators.
//! - [`invariance`]: residual-based invariance checks and empirical deviation studies.
//! - [`spde`]: the translation-type SPDE in coefficient space, its Galerkin integrator and
//!   translated-profile solutions.

pub mod distributions;
pub mod error;
pub mod geometry;
pub mod hermite;
pub mod invariance;
pub mod operators;
pub mod sde;
pub mod sobolev;
pub mod spde;

pub use error::{Error, Result};
pub use hermite::{MultiIndex, QuadratureRule, TruncationScheme};
pub use sobolev::{CoefficientVector, RegularityIndex};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
