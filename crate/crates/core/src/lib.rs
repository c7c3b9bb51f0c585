//! Simulation and verification engine for random walks in doubly random
//! scenery.
//!
//! A walker on ℤ collects `Y_k ξ_x` on its k-th visit to site `x`, where the
//! scenery `ξ` and the strategy `Y` are independent i.i.d. families in the
//! domains of attraction of symmetric α- and γ-stable laws. The crate
//! simulates the rescaled multi-user aggregate `G_n`, evaluates the
//! finite-dimensional characteristic functions of its stable limit through
//! the local-time representation, and provides numeric checks for the
//! quantities that drive the convergence.

pub mod diagnostics;
pub mod error;
pub mod fdd;
pub mod limit_oracle;
pub mod numeric;
pub mod rng;
pub mod stable_core;
pub mod stats;
pub mod walk_scenery;

pub use error::{Error, Result};
pub use fdd::ThetaVector;
pub use rng::{Stream, StreamKey};
pub use stable_core::{DoaLaw, SimParams, StableLaw};
pub use walk_scenery::{ModelLaws, StrategyLaw, WalkLaw};
