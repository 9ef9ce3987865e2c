//! Particle-based shape modeling: entropy terms, the penalized objective and
//! the Gauss-Seidel optimizer.

mod correspondence;
pub mod io;
mod optimizer;
mod sampling;
mod system;

pub use correspondence::{centered_shape_matrix, correspondence_entropy_gradient, correspondence_entropy_gradient_raw};
pub use optimizer::{
    gauss_seidel_iteration, objective_value, optimize, refine, ConvergenceLog, IterationRecord, ObjectiveComponents,
    OptimizeResult, OptimizerConfig,
};
pub use sampling::{sampling_entropy, sampling_entropy_gradient, sampling_entropy_gradient_raw, SigmaPolicy};
pub use system::ParticleSystem;
