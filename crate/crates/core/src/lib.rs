//! Stochastic minimax optimization with decision-dependent sampling
//! distributions.
//!
//! The problem family is `min_x max_y E_{z ~ D(x,y)} l(x, y, z)` where the
//! sampling distribution `D(x, y)` shifts with the decision variables. When
//! `D` follows a location-scale law `z = A x + B y + xi`, the map is
//! identifiable by regression, and the solvers here interleave online
//! least-squares learning of `(A, B)` with two-timescale stochastic gradient
//! descent-ascent on plug-in chain-rule gradients.
//!
//! Module map:
//!
//! * [`core`]: decision pairs, constraint sets and projections, smoothness
//!   profiles.
//! * [`distmap`]: the simulated environment and its online learner.
//! * [`gradients`]: plug-in stochastic gradients and minibatch averaging.
//! * [`solvers`]: the simultaneous and alternating adaptive algorithms,
//!   the primal-dual baseline, stepsize rules, and run traces.
//! * [`metrics`]: primal function, Danskin gradient, Moreau-envelope
//!   gradient, finite-difference verification.
//! * [`bench`]: the benchmark problem factories.
//! * [`checks`]: the executable invariant suite behind `smdd check`.

pub use nalgebra;

pub mod bench;
pub mod checks;
pub mod core;
pub mod distmap;
pub mod error;
pub mod gradients;
pub mod metrics;
pub mod solvers;

pub use crate::core::{
    condition_number, ConcavityClass, ConstraintSet, DecisionPair, SmoothnessProfile,
};
pub use crate::distmap::{LocationScaleMap, MapEstimate, Sample};
pub use crate::error::{Error, Result};
pub use crate::gradients::LossOracle;
pub use crate::solvers::{
    aasgda_run, asgda_run, run, spd_run, stepsizes_nc_c, stepsizes_nc_pl, stepsizes_nc_sc, Algo,
    RunConfig, RunFailure, Schedule, Trace, TraceRecord,
};
