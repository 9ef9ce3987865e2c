//! Free-form constraints: signed geodesic distance and gradient fields on a
//! mesh, derived from boundary loops between included and excluded faces.
//!
//! Sign convention: negative distance is feasible. Gradients point toward
//! increasing distance, i.e. into the excluded region.

use crate::error::{Error, Result};
use crate::geometry::{geodesic_from_sources, Point, SurfacePoint, TriangleMesh, Vector};
use crate::Real;
use serde::{Deserialize, Serialize};

/// Per-face painting result: `true` marks an included (feasible) face.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaceMask {
    included: Vec<bool>,
}

impl FaceMask {
    pub fn new(included: Vec<bool>) -> Self {
        Self { included }
    }

    pub fn all(len: usize, included: bool) -> Self {
        Self::new(vec![included; len])
    }

    /// Parses the 0/1 face flags used in constraint documents.
    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        bits.iter()
            .map(|&b| match b {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(Error::InvalidConstraint(format!(
                    "face mask value {other} is not 0 or 1"
                ))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Self::new)
    }

    pub fn to_bits(&self) -> Vec<u8> {
        self.included.iter().map(|&b| b as u8).collect()
    }

    pub fn len(&self) -> usize {
        self.included.len()
    }

    pub fn is_empty(&self) -> bool {
        self.included.is_empty()
    }

    pub fn is_included(&self, face: usize) -> bool {
        self.included[face]
    }

    pub fn set(&mut self, face: usize, included: bool) {
        self.included[face] = included;
    }

    pub fn included_count(&self) -> usize {
        self.included.iter().filter(|&&b| b).count()
    }

    fn check<T: Real>(&self, mesh: &TriangleMesh<T>) -> Result<()> {
        if self.len() != mesh.faces().len() {
            return Err(Error::MaskLength {
                expected: mesh.faces().len(),
                got: self.len(),
            });
        }
        Ok(())
    }
}

/// A point on a mesh edge: `edges()[edge][0] + t·(edges()[edge][1] − edges()[edge][0])`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeCrossing<T: Real> {
    pub edge: usize,
    pub t: T,
}

impl<T: Real> EdgeCrossing<T> {
    pub fn position(&self, mesh: &TriangleMesh<T>) -> Point<T> {
        let [a, b] = mesh.edges()[self.edge];
        let (pa, pb) = (mesh.vertices()[a], mesh.vertices()[b]);
        pa + (pb - pa) * self.t
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryLoop<T: Real> {
    pub crossings: Vec<EdgeCrossing<T>>,
    pub closed: bool,
}

impl<T: Real> BoundaryLoop<T> {
    /// A loop through mesh vertices: each consecutive vertex pair must share
    /// an edge. Crossings sit at the edge endpoints (`t ∈ {0, 1}`).
    pub fn from_vertex_path(mesh: &TriangleMesh<T>, path: &[usize], closed: bool) -> Result<Self> {
        let mut crossings = Vec::with_capacity(path.len());
        let n = path.len();
        let steps = if closed { n } else { n.saturating_sub(1) };
        for i in 0..steps {
            let (a, b) = (path[i], path[(i + 1) % n]);
            let edge = mesh
                .edge_index(a, b)
                .ok_or_else(|| Error::InvalidConstraint(format!("vertices {a} and {b} share no edge")))?;
            let t = if mesh.edges()[edge][0] == a {
                T::zero()
            } else {
                T::one()
            };
            crossings.push(EdgeCrossing { edge, t });
        }
        if crossings.is_empty() {
            return Err(Error::EmptyBoundary);
        }
        Ok(Self { crossings, closed })
    }
}

/// Edges separating an included face from an excluded one.
fn crossed_edges<T: Real>(mesh: &TriangleMesh<T>, mask: &FaceMask) -> Vec<bool> {
    (0..mesh.edges().len())
        .map(|e| match mesh.edge_faces(e) {
            [f, g] => mask.is_included(*f) != mask.is_included(*g),
            _ => false,
        })
        .collect()
}

/// Position of vertex `v` within face `f`.
fn corner(face: &[usize; 3], v: usize) -> usize {
    face.iter().position(|&x| x == v).expect("vertex belongs to face")
}

/// Chains the crossed edges of `mask` into loops.
///
/// Each edge is walked in the direction it has in its included face, so the
/// feasible side lies to the left (outward normals up). Crossings sit at
/// edge midpoints.
pub fn trace_boundary_loops<T: Real>(mesh: &TriangleMesh<T>, mask: &FaceMask) -> Result<Vec<BoundaryLoop<T>>> {
    mask.check(mesh)?;
    let crossed = crossed_edges(mesh, mask);
    let faces = mesh.faces();

    // directed form (tail, head, included face) of every crossed edge
    let mut directed: Vec<Option<(usize, usize, usize)>> = vec![None; crossed.len()];
    for (e, _) in crossed.iter().enumerate().filter(|(_, &c)| c) {
        let f = *mesh
            .edge_faces(e)
            .iter()
            .find(|&&f| mask.is_included(f))
            .expect("crossed edge has an included face");
        let [a, b] = mesh.edges()[e];
        let ca = corner(&faces[f], a);
        let (tail, head) = if faces[f][(ca + 1) % 3] == b { (a, b) } else { (b, a) };
        directed[e] = Some((tail, head, f));
    }

    // rotate around the head vertex through included faces to the next crossed edge
    let successor = |e: usize| -> Option<usize> {
        let (_, head, start) = directed[e]?;
        let mut face = start;
        for _ in 0..=mesh.vertex_faces(head).len() {
            let c = corner(&faces[face], head);
            let next_v = faces[face][(c + 1) % 3];
            let out = mesh.edge_index(head, next_v)?;
            if crossed[out] {
                return Some(out);
            }
            let incident = mesh.edge_faces(out);
            if incident.len() != 2 {
                return None;
            }
            face = if incident[0] == face { incident[1] } else { incident[0] };
            if face == start {
                return None;
            }
        }
        None
    };

    let next: Vec<Option<usize>> = (0..crossed.len())
        .map(|e| if crossed[e] { successor(e) } else { None })
        .collect();
    let mut has_pred = vec![false; crossed.len()];
    for n in next.iter().flatten() {
        has_pred[*n] = true;
    }

    let half = T::lit(0.5);
    let mut visited = vec![false; crossed.len()];
    let mut loops = Vec::new();
    let walk = |start: usize, visited: &mut Vec<bool>| {
        let mut crossings = Vec::new();
        let mut e = start;
        let closed = loop {
            visited[e] = true;
            crossings.push(EdgeCrossing { edge: e, t: half });
            match next[e] {
                Some(n) if n == start => break true,
                Some(n) if !visited[n] => e = n,
                _ => break false,
            }
        };
        BoundaryLoop { crossings, closed }
    };
    // open chains first, starting at edges nothing leads into
    for e in 0..crossed.len() {
        if crossed[e] && !has_pred[e] && !visited[e] {
            loops.push(walk(e, &mut visited));
        }
    }
    for e in 0..crossed.len() {
        if crossed[e] && !visited[e] {
            loops.push(walk(e, &mut visited));
        }
    }
    if loops.is_empty() {
        return Err(Error::EmptyBoundary);
    }
    Ok(loops)
}

/// Signed geodesic distance field with per-vertex unit gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshField<T: Real> {
    distance: Vec<T>,
    gradient: Vec<Vector<T>>,
    degenerate: Vec<bool>,
    mesh_checksum: u64,
}

/// Result of a gradient query; `degenerate` marks a locally flat field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientQuery<T: Real> {
    pub direction: Vector<T>,
    pub degenerate: bool,
}

const GRADIENT_EPS: f64 = 1e-8;

/// Computes the signed distance field for `loops`, with signs taken from
/// `mask`.
///
/// Every endpoint of a crossed edge seeds the geodesic search with its
/// Euclidean distance to the crossing. A vertex is feasible (negative) when
/// any incident face is included.
pub fn build_field<T: Real>(
    mesh: &TriangleMesh<T>,
    loops: &[BoundaryLoop<T>],
    mask: &FaceMask,
) -> Result<MeshField<T>> {
    mask.check(mesh)?;
    if loops.iter().all(|l| l.crossings.is_empty()) {
        return Err(Error::EmptyBoundary);
    }
    let nv = mesh.vertices().len();
    let mut sources = Vec::new();
    let mut is_source = vec![false; nv];
    for crossing in loops.iter().flat_map(|l| &l.crossings) {
        if crossing.edge >= mesh.edges().len() {
            return Err(Error::InvalidConstraint(format!(
                "crossing on unknown edge {}",
                crossing.edge
            )));
        }
        let at = crossing.position(mesh);
        for v in mesh.edges()[crossing.edge] {
            sources.push((v, (mesh.vertices()[v] - at).norm()));
            is_source[v] = true;
        }
    }
    let unsigned = geodesic_from_sources(mesh, &sources)?;

    let mut distance = Vec::with_capacity(nv);
    for v in 0..nv {
        let incident = mesh.vertex_faces(v);
        if incident.is_empty() {
            distance.push(T::zero());
            continue;
        }
        let any_in = incident.iter().any(|&f| mask.is_included(f));
        let any_out = incident.iter().any(|&f| !mask.is_included(f));
        if any_in && any_out && !is_source[v] {
            return Err(Error::InconsistentMask(format!(
                "vertex {v} touches included and excluded faces but no boundary edge"
            )));
        }
        if !unsigned[v].is_finite() {
            return Err(Error::InconsistentMask(format!(
                "vertex {v} is not connected to any boundary"
            )));
        }
        distance.push(if any_in { -unsigned[v] } else { unsigned[v] });
    }

    let (gradient, degenerate) = vertex_gradients(mesh, &distance);
    Ok(MeshField {
        distance,
        gradient,
        degenerate,
        mesh_checksum: mesh.checksum(),
    })
}

/// Traces the mask's boundary loops and builds the field in one go.
pub fn field_from_mask<T: Real>(mesh: &TriangleMesh<T>, mask: &FaceMask) -> Result<MeshField<T>> {
    let loops = trace_boundary_loops(mesh, mask)?;
    build_field(mesh, &loops, mask)
}

/// Gradient of the piecewise-linear interpolant on each face.
pub fn face_gradient<T: Real>(mesh: &TriangleMesh<T>, face: usize, values: &[T]) -> Vector<T> {
    let f = mesh.faces()[face];
    let n = mesh.face_normal(face);
    let two_area = mesh.face_area(face) * T::lit(2.0);
    let mut g = Vector::zeros();
    for i in 0..3 {
        let (j, k) = (f[(i + 1) % 3], f[(i + 2) % 3]);
        let opposite = mesh.vertices()[k] - mesh.vertices()[j];
        g += n.cross(&opposite) * values[f[i]];
    }
    g / two_area
}

fn vertex_gradients<T: Real>(mesh: &TriangleMesh<T>, values: &[T]) -> (Vec<Vector<T>>, Vec<bool>) {
    let mut acc = vec![Vector::zeros(); values.len()];
    for face in 0..mesh.faces().len() {
        let g = face_gradient(mesh, face, values) * mesh.face_area(face);
        for &v in &mesh.faces()[face] {
            acc[v] += g;
        }
    }
    let mut degenerate = vec![false; values.len()];
    for v in 0..values.len() {
        let area: T = mesh
            .vertex_faces(v)
            .iter()
            .fold(T::zero(), |a, &f| a + mesh.face_area(f));
        let mag = if area > T::zero() {
            acc[v].norm() / area
        } else {
            T::zero()
        };
        if mag < T::lit(GRADIENT_EPS) {
            acc[v] = Vector::zeros();
            degenerate[v] = true;
        } else {
            let norm = acc[v].norm();
            acc[v] /= norm;
        }
    }
    (acc, degenerate)
}

impl<T: Real> MeshField<T> {
    pub fn vertex_distance(&self) -> &[T] {
        &self.distance
    }

    pub fn vertex_gradient(&self) -> &[Vector<T>] {
        &self.gradient
    }

    /// Vertices whose gradient vanished (local extrema or flat regions).
    pub fn degenerate_vertices(&self) -> &[bool] {
        &self.degenerate
    }

    pub fn mesh_checksum(&self) -> u64 {
        self.mesh_checksum
    }

    pub fn belongs_to(&self, mesh: &TriangleMesh<T>) -> bool {
        self.distance.len() == mesh.vertices().len() && self.mesh_checksum == mesh.checksum()
    }

    /// Signed distance at an already projected surface point.
    pub fn distance_at(&self, mesh: &TriangleMesh<T>, sp: &SurfacePoint<T>) -> T {
        mesh.interpolate(sp, &self.distance)
    }

    pub fn gradient_at(&self, mesh: &TriangleMesh<T>, sp: &SurfacePoint<T>) -> GradientQuery<T> {
        let g = mesh.interpolate(sp, &self.gradient);
        let mag = g.norm();
        if mag < T::lit(GRADIENT_EPS) {
            GradientQuery {
                direction: Vector::zeros(),
                degenerate: true,
            }
        } else {
            GradientQuery {
                direction: g / mag,
                degenerate: false,
            }
        }
    }

    /// Field value at the surface projection of `p`.
    pub fn query_distance(&self, mesh: &TriangleMesh<T>, p: &Point<T>) -> T {
        self.distance_at(mesh, &mesh.closest_point(p))
    }

    /// Unit gradient direction at the surface projection of `p`.
    pub fn query_gradient(&self, mesh: &TriangleMesh<T>, p: &Point<T>) -> GradientQuery<T> {
        self.gradient_at(mesh, &mesh.closest_point(p))
    }

    pub fn to_document(&self) -> FieldDocument {
        FieldDocument {
            vertex_distance: self.distance.iter().map(|d| d.as_f64()).collect(),
            vertex_gradient: self
                .gradient
                .iter()
                .flat_map(|g| g.iter().map(|c| c.as_f64()).collect::<Vec<_>>())
                .collect(),
            mesh_checksum: format!("{:016x}", self.mesh_checksum),
        }
    }

    /// Restores a field for `mesh`, rejecting documents computed on another mesh.
    pub fn from_document(doc: &FieldDocument, mesh: &TriangleMesh<T>) -> Result<Self> {
        let checksum = u64::from_str_radix(doc.mesh_checksum.trim_start_matches("0x"), 16)
            .map_err(|_| Error::InvalidConstraint(format!("bad mesh checksum '{}'", doc.mesh_checksum)))?;
        if checksum != mesh.checksum() {
            return Err(Error::ChecksumMismatch {
                field: checksum,
                mesh: mesh.checksum(),
            });
        }
        let nv = mesh.vertices().len();
        if doc.vertex_distance.len() != nv || doc.vertex_gradient.len() != 3 * nv {
            return Err(Error::InvalidConstraint(format!(
                "field arrays have lengths {}/{}, expected {nv}/{}",
                doc.vertex_distance.len(),
                doc.vertex_gradient.len(),
                3 * nv
            )));
        }
        let gradient: Vec<Vector<T>> = doc
            .vertex_gradient
            .chunks_exact(3)
            .map(|c| Vector::new(T::lit(c[0]), T::lit(c[1]), T::lit(c[2])))
            .collect();
        let degenerate = gradient.iter().map(|g| g.norm() < T::lit(GRADIENT_EPS)).collect();
        Ok(Self {
            distance: doc.vertex_distance.iter().map(|&d| T::lit(d)).collect(),
            gradient,
            degenerate,
            mesh_checksum: checksum,
        })
    }
}

/// JSON form of a field: flat per-vertex arrays plus the mesh checksum as
/// 16 hex digits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldDocument {
    pub vertex_distance: Vec<f64>,
    pub vertex_gradient: Vec<f64>,
    pub mesh_checksum: String,
}
