//! Ergodic simulation of singular holomorphic foliations by Riemann surfaces:
//! leafwise hyperbolic Brownian motion, holonomy cocycles, harmonic measures
//! and Lyapunov exponents.

pub mod constants;
pub mod ergodic;
pub mod error;
pub mod foliation;
pub mod hyperbolic;
pub mod leafwise;
pub mod poincare_metric;
pub mod quad;
pub mod stats;

pub use error::{Error, Result};

/// Library version, embedded in output artifacts.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
