//! Synthetic ellipsoid cohort with a sinusoidal free-form boundary.

use crate::error::{Error, Result};
use crate::ffc::FaceMask;
use crate::geometry::{Point, TriangleMesh};
use crate::Real;
use std::collections::HashMap;

/// Unit icosphere: an icosahedron subdivided `level` times, vertices
/// pushed onto the unit sphere. Level `n` has `10·4ⁿ + 2` vertices.
pub fn icosphere<T: Real>(level: u32) -> TriangleMesh<T> {
    let (vertices, faces) = icosphere_raw(level);
    let vertices = vertices
        .into_iter()
        .map(|v| Point::new(T::lit(v[0]), T::lit(v[1]), T::lit(v[2])))
        .collect();
    TriangleMesh::new(vertices, faces).expect("icosphere is well formed")
}

fn icosphere_raw(level: u32) -> (Vec<[f64; 3]>, Vec<[usize; 3]>) {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<[f64; 3]> = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ]
    .iter()
    .map(|&v| normalize(v))
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];

    for _ in 0..level {
        let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        let mut mid = |a: usize, b: usize, vertices: &mut Vec<[f64; 3]>| -> usize {
            *midpoints.entry((a.min(b), a.max(b))).or_insert_with(|| {
                let (p, q) = (vertices[a], vertices[b]);
                vertices.push(normalize([p[0] + q[0], p[1] + q[1], p[2] + q[2]]));
                vertices.len() - 1
            })
        };
        for [a, b, c] in faces {
            let ab = mid(a, b, &mut vertices);
            let bc = mid(b, c, &mut vertices);
            let ca = mid(c, a, &mut vertices);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    (vertices, faces)
}

fn normalize(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

/// Icosphere scaled anisotropically by the semi-axes `(a, b, c)`.
pub fn gen_ellipsoid_mesh<T: Real>(axes: [T; 3], subdiv: u32) -> TriangleMesh<T> {
    let (vertices, faces) = icosphere_raw(subdiv);
    let vertices = vertices
        .into_iter()
        .map(|v| Point::new(T::lit(v[0]) * axes[0], T::lit(v[1]) * axes[1], T::lit(v[2]) * axes[2]))
        .collect();
    TriangleMesh::new(vertices, faces).expect("scaled icosphere is well formed")
}

#[derive(Debug, Clone)]
pub struct EllipsoidShape<T: Real> {
    pub axes: [T; 3],
    pub mesh: TriangleMesh<T>,
}

impl<T: Real> EllipsoidShape<T> {
    pub fn name(&self) -> String {
        format!(
            "ellipsoid_{}_{}_{}",
            self.axes[0].as_f64(),
            self.axes[1].as_f64(),
            self.axes[2].as_f64()
        )
    }
}

/// Full Cartesian product of `axis_values` over the three semi-axes,
/// ordered with `a` slowest and `c` fastest.
pub fn gen_ellipsoid_cohort<T: Real>(axis_values: &[T], subdiv: u32) -> Vec<EllipsoidShape<T>> {
    let mut out = Vec::with_capacity(axis_values.len().pow(3));
    for &a in axis_values {
        for &b in axis_values {
            for &c in axis_values {
                out.push(EllipsoidShape {
                    axes: [a, b, c],
                    mesh: gen_ellipsoid_mesh([a, b, c], subdiv),
                });
            }
        }
    }
    out
}

pub const DEFAULT_SINE_AMPLITUDE: f64 = 0.3;

/// Splits an ellipsoid into upper (included) and lower (excluded) parts
/// along one full azimuthal period of a sine wave.
///
/// A face is included iff its centroid satisfies
/// `z/c > amplitude · sin(atan2(y/b, x/a))`.
pub fn sine_boundary_mask<T: Real>(mesh: &TriangleMesh<T>, axes: [T; 3], amplitude_frac: T) -> Result<FaceMask> {
    let included: Vec<bool> = (0..mesh.faces().len())
        .map(|f| {
            let c = mesh.face_centroid(f);
            let (x, y, z) = (c.x / axes[0], c.y / axes[1], c.z / axes[2]);
            z > amplitude_frac * y.atan2(x).sin()
        })
        .collect();
    let mask = FaceMask::new(included);
    if mask.included_count() == 0 || mask.included_count() == mask.len() {
        return Err(Error::DegenerateMask);
    }
    Ok(mask)
}
