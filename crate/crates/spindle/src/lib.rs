//! Exact simulation and estimation for slightly subcritical branching
//! Brownian motion with absorption, plus the closed-form diffusion laws
//! (theta-series bridge suprema, Bessel-3 densities and bridges) used to
//! cross-check the samplers.

pub mod battery;
pub mod bbm;
pub mod cli;
pub mod diffusion;
pub mod error;
pub mod estimator;
pub mod model;
pub mod quad;
pub mod rng;
pub mod special;
pub mod spine;
pub mod stats;

pub use error::{Error, Result};
pub use model::{Horizon, InitialCondition, ModelParams, PopulationSnapshot};
pub use rng::RngStream;
