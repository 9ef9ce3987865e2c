//! Corresponding particle systems on triangle-mesh cohorts, with plane,
//! sphere and free-form surface constraints enforced by a penalty term.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the
//! aliases at the crate root fix the scalar to `f64` unless suffixed `32`.

pub mod bench;
pub mod constraints;
pub mod datagen;
pub mod error;
pub mod ffc;
pub mod geometry;
pub mod psm;
mod scalar;
pub mod stats;

pub use constraints::{
    check_violations, penalty, penalty_gradient, Constraint, ConstraintDocument, PenaltyPower, SphereMode, Tolerance,
    ViolationReport,
};
pub use error::{Error, Result};
pub use ffc::{field_from_mask, trace_boundary_loops, FaceMask, MeshField};
pub use geometry::{load_mesh, save_mesh, SurfacePoint, TriangleMesh};
pub use psm::{optimize, ConvergenceLog, OptimizeResult, OptimizerConfig, ParticleSystem};
pub use scalar::Real;
pub use stats::ShapeModel;

pub type Mesh = TriangleMesh<f64>;
pub type Mesh32 = TriangleMesh<f32>;
pub type Field = MeshField<f64>;
pub type Field32 = MeshField<f32>;
pub type System = ParticleSystem<f64>;
pub type System32 = ParticleSystem<f32>;
pub type Model = ShapeModel<f64>;
pub type Model32 = ShapeModel<f32>;
pub type Point3 = geometry::Point<f64>;
pub type Vector3 = geometry::Vector<f64>;
