//! Triangle meshes, spatial queries and edge-graph geodesics.

mod bvh;
mod geodesic;
pub mod io;
mod mesh;
mod triangle;

pub use bvh::{Aabb, Bvh};
pub use geodesic::geodesic_from_sources;
pub use io::{load_mesh, save_mesh, MeshFormat};
pub use mesh::{SurfacePoint, TriangleMesh};
pub use triangle::closest_point_on_triangle;

use crate::Real;
use nalgebra::{Point3, Vector3};

pub type Point<T> = Point3<T>;
pub type Vector<T> = Vector3<T>;

/// Removes the component of `v` along the unit `normal`.
#[inline]
pub fn tangent_component<T: Real>(v: &Vector<T>, normal: &Vector<T>) -> Vector<T> {
    v - normal * v.dot(normal)
}
