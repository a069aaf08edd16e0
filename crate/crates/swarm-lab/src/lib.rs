//! Simulation and control laboratory for multiagent alignment and
//! attraction-repulsion systems.
//!
//! The crate covers three layers:
//!
//! * **Model analysis** — interaction kernels, the pairwise-spread bilinear
//!   form with its Lyapunov functionals, total energy for attraction-repulsion
//!   dynamics, and the consensus-region certificates derived from them
//!   ([`state`], [`kernel`], [`energy`], [`threshold`]).
//! * **Dynamics and control** — right-hand sides for the graph, bounded
//!   confidence, Vicsek, Cucker-Smale and Cucker-Dong families, plus every
//!   feedback law studied here: total control, leader / structured /
//!   local-average perturbations, and the sparse (single-agent) laws with
//!   their variational characterizations ([`dynamics`], [`control`]).
//! * **Experiments** — a fixed-step RK4 engine with sample-and-hold control,
//!   event detection and admissibility monitoring, and a Monte-Carlo
//!   consensus-region mapper with contour extraction ([`integrator`],
//!   [`region`]).
//!
//! All evaluators are pure functions of their inputs; simulations are
//! deterministic given a seed.

pub mod control;
pub mod dynamics;
pub mod energy;
pub mod error;
pub mod graph;
pub mod integrator;
pub mod kernel;
pub mod quadrature;
pub mod region;
pub mod state;
pub mod threshold;

mod vecn;

pub use error::{Error, Result};
pub use kernel::{ArgConvention, FrictionSpec, KernelSpec, PsiSpec, RepulsionSpec};
pub use state::AgentState;
pub use threshold::Threshold;
