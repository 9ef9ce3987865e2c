use super::bvh::{Aabb, Bvh};
use super::triangle::closest_point_on_triangle;
use super::{Point, Vector};
use crate::error::{Error, Result};
use crate::Real;
use std::collections::HashMap;

/// A point on the mesh surface, anchored to a face.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfacePoint<T: Real> {
    pub face: usize,
    pub barycentric: [T; 3],
    pub position: Point<T>,
}

/// Immutable indexed triangle surface with precomputed adjacency and a
/// bounding-volume hierarchy for closest-point queries.
#[derive(Debug, Clone)]
pub struct TriangleMesh<T: Real> {
    vertices: Vec<Point<T>>,
    faces: Vec<[usize; 3]>,
    edges: Vec<[usize; 2]>,
    edge_lookup: HashMap<(usize, usize), usize>,
    edge_faces: Vec<Vec<usize>>,
    /// `face_edges[f][k]` joins `faces[f][k]` and `faces[f][(k + 1) % 3]`.
    face_edges: Vec<[usize; 3]>,
    face_neighbors: Vec<Vec<usize>>,
    vertex_faces: Vec<Vec<usize>>,
    vertex_edges: Vec<Vec<usize>>,
    face_normals: Vec<Vector<T>>,
    face_areas: Vec<T>,
    vertex_normals: Vec<Vector<T>>,
    bbox: Aabb<T>,
    bvh: Bvh<T>,
    dropped_faces: usize,
}

impl<T: Real> TriangleMesh<T> {
    /// Builds a mesh, dropping faces with repeated indices or zero area.
    pub fn new(vertices: Vec<Point<T>>, faces: Vec<[usize; 3]>) -> Result<Self> {
        for (fi, f) in faces.iter().enumerate() {
            for &idx in f {
                if idx >= vertices.len() {
                    return Err(Error::FaceIndex {
                        face: fi,
                        index: idx,
                        vertex_count: vertices.len(),
                    });
                }
            }
        }
        if vertices.is_empty() || faces.is_empty() {
            return Err(Error::EmptyMesh);
        }

        let bbox = Aabb::from_points(vertices.iter());
        let diag = bbox.diagonal();
        let min_area = T::tolerance() * T::tolerance() * diag * diag;

        let mut kept = Vec::with_capacity(faces.len());
        let mut dropped = 0;
        for f in faces {
            let degenerate_index = f[0] == f[1] || f[1] == f[2] || f[0] == f[2];
            let area = triangle_area(&vertices[f[0]], &vertices[f[1]], &vertices[f[2]]);
            if degenerate_index || !(area > min_area) {
                dropped += 1;
            } else {
                kept.push(f);
            }
        }
        if kept.is_empty() {
            return Err(Error::EmptyMesh);
        }
        if dropped > 0 {
            log::warn!("dropped {dropped} degenerate faces");
        }

        Ok(Self::build(vertices, kept, bbox, dropped))
    }

    fn build(vertices: Vec<Point<T>>, faces: Vec<[usize; 3]>, bbox: Aabb<T>, dropped: usize) -> Self {
        let nv = vertices.len();
        let mut edges = Vec::new();
        let mut edge_lookup = HashMap::new();
        let mut edge_faces: Vec<Vec<usize>> = Vec::new();
        let mut face_edges = Vec::with_capacity(faces.len());
        let mut vertex_faces = vec![Vec::new(); nv];
        let mut vertex_edges = vec![Vec::new(); nv];

        for (fi, f) in faces.iter().enumerate() {
            let mut fe = [0; 3];
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                let e = *edge_lookup.entry(key).or_insert_with(|| {
                    edges.push([key.0, key.1]);
                    edge_faces.push(Vec::with_capacity(2));
                    vertex_edges[key.0].push(edges.len() - 1);
                    vertex_edges[key.1].push(edges.len() - 1);
                    edges.len() - 1
                });
                edge_faces[e].push(fi);
                fe[k] = e;
                vertex_faces[f[k]].push(fi);
            }
            face_edges.push(fe);
        }

        let face_neighbors = face_edges
            .iter()
            .enumerate()
            .map(|(fi, fe)| {
                let mut n: Vec<usize> = fe
                    .iter()
                    .flat_map(|&e| edge_faces[e].iter().copied())
                    .filter(|&g| g != fi)
                    .collect();
                n.sort_unstable();
                n.dedup();
                n
            })
            .collect();

        let mut face_normals = Vec::with_capacity(faces.len());
        let mut face_areas = Vec::with_capacity(faces.len());
        let mut vertex_normals = vec![Vector::zeros(); nv];
        for f in &faces {
            let cross = (vertices[f[1]] - vertices[f[0]]).cross(&(vertices[f[2]] - vertices[f[0]]));
            let norm = cross.norm();
            // area-weighted accumulation: |cross| = 2 * area
            for &v in f {
                vertex_normals[v] += cross;
            }
            face_areas.push(norm * T::lit(0.5));
            face_normals.push(cross / norm);
        }
        for n in &mut vertex_normals {
            let len = n.norm();
            if len > T::zero() {
                *n /= len;
            }
        }

        let bvh = Bvh::build(&vertices, &faces);

        Self {
            vertices,
            faces,
            edges,
            edge_lookup,
            edge_faces,
            face_edges,
            face_neighbors,
            vertex_faces,
            vertex_edges,
            face_normals,
            face_areas,
            vertex_normals,
            bbox,
            bvh,
            dropped_faces: dropped,
        }
    }

    pub fn vertices(&self) -> &[Point<T>] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    /// Undirected edges as sorted vertex pairs, each listed once.
    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn edge_faces(&self, edge: usize) -> &[usize] {
        &self.edge_faces[edge]
    }

    pub fn face_edges(&self, face: usize) -> [usize; 3] {
        self.face_edges[face]
    }

    pub fn face_neighbors(&self, face: usize) -> &[usize] {
        &self.face_neighbors[face]
    }

    pub fn vertex_faces(&self, vertex: usize) -> &[usize] {
        &self.vertex_faces[vertex]
    }

    pub fn vertex_edges(&self, vertex: usize) -> &[usize] {
        &self.vertex_edges[vertex]
    }

    pub fn edge_index(&self, a: usize, b: usize) -> Option<usize> {
        self.edge_lookup.get(&(a.min(b), a.max(b))).copied()
    }

    pub fn edge_length(&self, edge: usize) -> T {
        let [a, b] = self.edges[edge];
        (self.vertices[a] - self.vertices[b]).norm()
    }

    pub fn mean_edge_length(&self) -> T {
        let total = (0..self.edges.len()).fold(T::zero(), |acc, e| acc + self.edge_length(e));
        total / T::from_usize(self.edges.len()).unwrap()
    }

    pub fn face_normal(&self, face: usize) -> Vector<T> {
        self.face_normals[face]
    }

    pub fn face_area(&self, face: usize) -> T {
        self.face_areas[face]
    }

    pub fn surface_area(&self) -> T {
        self.face_areas.iter().fold(T::zero(), |a, &b| a + b)
    }

    pub fn face_centroid(&self, face: usize) -> Point<T> {
        let f = self.faces[face];
        let third = T::lit(1.0 / 3.0);
        Point::from((self.vertices[f[0]].coords + self.vertices[f[1]].coords + self.vertices[f[2]].coords) * third)
    }

    pub fn vertex_normal(&self, vertex: usize) -> Vector<T> {
        self.vertex_normals[vertex]
    }

    pub fn bbox(&self) -> &Aabb<T> {
        &self.bbox
    }

    /// Length of the bounding-box diagonal; the mesh's natural length scale.
    pub fn diagonal(&self) -> T {
        self.bbox.diagonal()
    }

    pub fn dropped_faces(&self) -> usize {
        self.dropped_faces
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.edges.len() as i64 + self.faces.len() as i64
    }

    /// Area-weighted centroid of the surface.
    pub fn centroid(&self) -> Point<T> {
        let mut acc = Vector::zeros();
        let mut area = T::zero();
        for f in 0..self.faces.len() {
            acc += self.face_centroid(f).coords * self.face_areas[f];
            area += self.face_areas[f];
        }
        Point::from(acc / area)
    }

    pub fn triangle(&self, face: usize) -> [Point<T>; 3] {
        let f = self.faces[face];
        [self.vertices[f[0]], self.vertices[f[1]], self.vertices[f[2]]]
    }

    /// Exact closest point on the surface to `p`.
    pub fn closest_point(&self, p: &Point<T>) -> SurfacePoint<T> {
        let (face, position, barycentric) = self.bvh.closest(p, |f| {
            let [a, b, c] = self.triangle(f);
            closest_point_on_triangle(p, &a, &b, &c)
        });
        SurfacePoint {
            face,
            barycentric,
            position,
        }
    }

    pub fn project_to_surface(&self, p: &Point<T>) -> Point<T> {
        self.closest_point(p).position
    }

    /// Barycentric combination of per-vertex values over the point's face.
    pub fn interpolate<V>(&self, sp: &SurfacePoint<T>, values: &[V]) -> V
    where
        V: Copy + std::ops::Mul<T, Output = V> + std::ops::Add<Output = V>,
    {
        let f = self.faces[sp.face];
        values[f[0]] * sp.barycentric[0] + values[f[1]] * sp.barycentric[1] + values[f[2]] * sp.barycentric[2]
    }

    /// Unit surface normal at a surface point, blended from vertex normals.
    pub fn normal_at(&self, sp: &SurfacePoint<T>) -> Vector<T> {
        let n = self.interpolate(sp, &self.vertex_normals);
        let len = n.norm();
        if len > T::tolerance() {
            n / len
        } else {
            self.face_normals[sp.face]
        }
    }

    /// FNV-1a (64-bit) over the little-endian `f64` bytes of every vertex
    /// coordinate. Identifies the mesh a field was computed on.
    pub fn checksum(&self) -> u64 {
        const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
        const PRIME: u64 = 0x0000_0100_0000_01b3;
        let mut hash = OFFSET;
        for v in &self.vertices {
            for c in v.iter() {
                for byte in c.as_f64().to_le_bytes() {
                    hash ^= byte as u64;
                    hash = hash.wrapping_mul(PRIME);
                }
            }
        }
        hash
    }
}

fn triangle_area<T: Real>(a: &Point<T>, b: &Point<T>, c: &Point<T>) -> T {
    (b - a).cross(&(c - a)).norm() * T::lit(0.5)
}
