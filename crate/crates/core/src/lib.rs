//! Particle-based variational inference with Stein variational gradient
//! descent (SVGD) and its Grassmann-projected variant (GSVGD).
//!
//! The crate is organised bottom-up:
//!
//! * [`manifold`]: projectors on the Grassmann manifold, tangent projection,
//!   polar retraction and batch re-orthonormalisation.
//! * [`kernel`]: radial kernels `k(u, v) = Φ(‖u − v‖²)` with derivative
//!   accessors and the median-heuristic bandwidth.
//! * [`model`]: target densities exposing score functions, exact samplers
//!   for the synthetic targets and the conditioned-diffusion posterior.
//! * [`discrepancy`]: projected kernel Stein discrepancy, its gradients with
//!   respect to the projector and the Grassmann maximiser.
//! * [`sampler`]: SVGD and GSVGD particle dynamics with annealed projector SDE.
//! * [`metrics`]: energy distance, covariance error, marginal variance.
//! * [`harness`]: config parsing, seeded repetitions, CSV/JSON output.

pub mod check;
pub mod discrepancy;
pub mod error;
pub mod harness;
pub mod kernel;
pub mod manifold;
pub mod metrics;
pub mod model;
pub mod particles;
pub mod rng;
pub mod sampler;

pub use error::{Error, Result};
pub use particles::ParticleSet;

/// Library version tag recorded in every run.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
