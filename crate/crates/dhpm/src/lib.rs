//! Joint recovery of the states and dynamics of autonomous ODE systems from
//! sparse, possibly partially observed trajectory data.
//!
//! Two small multilayer perceptrons are trained together: a *state network*
//! mapping time `t` to an estimate of the state vector, and a *dynamics
//! network* mapping candidate features of the state estimate to an estimate
//! of its time derivative. The total loss combines a mean-squared data loss
//! over observed states (selected by a binary alpha mask) with an equation
//! residual loss `d/dt state_net - dyn_net(features(state_net))` evaluated at
//! Latin-hypercube collocation points.
//!
//! The crate is organized around the pieces of that pipeline:
//!
//! - [`dynamics`]: benchmark systems behind a named registry, an adaptive
//!   Dormand-Prince 5(4) integrator for reference trajectories, CSV export.
//! - [`net`]: the MLP engine with reverse-mode parameter gradients,
//!   forward-mode (dual number) derivatives with respect to the time input,
//!   and gradients of the composed equation residual through both networks.
//! - [`sampling`]: seeded, splittable RNG streams and 1-D Latin hypercube
//!   sampling for collocation points.
//! - [`training`]: losses, alpha masking, non-dimensionalization, Adam, and
//!   the full-batch training loop.
//! - [`metrics`]: relative L2 error and experiment reports.
//!
//! All arithmetic is `f64`, and a whole training run is a deterministic
//! function of its configuration and seed.

pub mod dynamics;
pub mod metrics;
pub mod net;
pub mod sampling;
pub mod training;

pub use dynamics::{integrate_reference, uniform_grid, AutonomousSystem, Trajectory};
pub use metrics::{rel_l2_error, ExperimentReport};
pub use net::{Activation, MlpNetwork};
pub use sampling::RngStream;
pub use training::{train, CandidateMap, Phase, ScalingSpec, TrainOutput, TrainingConfig};
