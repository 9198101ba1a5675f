//! Differentiable flip-and-landing trajectory optimization.
//!
//! A planar rigid-body model of a large reusable upper stage is rolled out
//! with RK4 under per-step thrust and gimbal commands. The landing loss is
//! differentiated with respect to those commands either by recording the
//! rollout on a tape or by integrating the adjoint equation backward, and
//! Adam drives the commands to a feasible flip and touchdown.

pub mod aero;
pub mod autodiff;
pub mod cli;
pub mod controls;
pub mod dynamics;
pub mod error;
pub mod io;
pub mod optimizer;
pub mod rollout;
pub mod scenario;

pub use aero::{AeroModel, MlpSurrogate};
pub use controls::{ControlSequence, RawControlParams};
pub use dynamics::VehicleState;
pub use error::{Error, NumericError, Result, ScenarioError};
pub use optimizer::{optimize, OptimizationResult, OptimizerConfig};
pub use rollout::{GradientEngine, GradientReport, LossBreakdown, LossWeights, Trajectory};
pub use scenario::{nondimensionalize, preset, resolve_scenario, NondimScenario, ScenarioConfig};
