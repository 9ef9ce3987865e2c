//! Inequality constraints `g(p) ≤ 0` and their quadratic penalty.

use crate::error::{Error, Result};
use crate::ffc::{field_from_mask, FaceMask, FieldDocument, MeshField};
use crate::geometry::{Point, SurfacePoint, TriangleMesh, Vector};
use crate::psm::ParticleSystem;
use crate::Real;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SphereMode {
    ExcludeInside,
    ExcludeOutside,
}

/// A free-form constraint: a signed field together with the mesh it lives on.
#[derive(Debug, Clone)]
pub struct FreeForm<T: Real> {
    pub field: Arc<MeshField<T>>,
    pub mesh: Arc<TriangleMesh<T>>,
}

#[derive(Debug, Clone)]
pub enum Constraint<T: Real> {
    /// Half-space; `normal` is unit length and points into the feasible side.
    Plane {
        origin: Point<T>,
        normal: Vector<T>,
    },
    Sphere {
        center: Point<T>,
        radius: T,
        mode: SphereMode,
    },
    FreeForm(FreeForm<T>),
}

/// Constraint gradient; `degenerate` is set where the direction is undefined.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintGradient<T: Real> {
    pub vector: Vector<T>,
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyPower {
    Linear,
    Quadratic,
}

impl PenaltyPower {
    pub fn from_exponent(p: u32) -> Result<Self> {
        match p {
            1 => Ok(Self::Linear),
            2 => Ok(Self::Quadratic),
            other => Err(Error::InvalidConfig(format!(
                "penalty power must be 1 or 2, got {other}"
            ))),
        }
    }
}

impl<T: Real> Constraint<T> {
    pub fn plane(origin: Point<T>, normal: Vector<T>) -> Result<Self> {
        let len = normal.norm();
        if !(len > T::tolerance()) || !len.is_finite() {
            return Err(Error::InvalidConstraint("plane normal must be non-zero".into()));
        }
        Ok(Self::Plane {
            origin,
            normal: normal / len,
        })
    }

    pub fn sphere(center: Point<T>, radius: T, mode: SphereMode) -> Result<Self> {
        if !(radius > T::zero()) || !radius.is_finite() {
            return Err(Error::InvalidConstraint(format!(
                "sphere radius must be positive, got {radius}"
            )));
        }
        Ok(Self::Sphere { center, radius, mode })
    }

    pub fn free_form(field: Arc<MeshField<T>>, mesh: Arc<TriangleMesh<T>>) -> Result<Self> {
        if !field.belongs_to(&mesh) {
            return Err(Error::ChecksumMismatch {
                field: field.mesh_checksum(),
                mesh: mesh.checksum(),
            });
        }
        Ok(Self::FreeForm(FreeForm { field, mesh }))
    }

    /// Constraint value; negative means feasible.
    pub fn evaluate(&self, p: &Point<T>) -> T {
        self.evaluate_projected(p, None)
    }

    /// Like [`Constraint::evaluate`], reusing a known surface projection of
    /// `p` on the free-form constraint's mesh.
    pub fn evaluate_projected(&self, p: &Point<T>, projection: Option<&SurfacePoint<T>>) -> T {
        match self {
            Self::Plane { origin, normal } => -normal.dot(&(p - origin)),
            Self::Sphere { center, radius, mode } => {
                let r = (p - center).norm();
                match mode {
                    SphereMode::ExcludeInside => *radius - r,
                    SphereMode::ExcludeOutside => r - *radius,
                }
            }
            Self::FreeForm(ff) => match projection {
                Some(sp) => ff.field.distance_at(&ff.mesh, sp),
                None => ff.field.query_distance(&ff.mesh, p),
            },
        }
    }

    pub fn gradient(&self, p: &Point<T>) -> ConstraintGradient<T> {
        self.gradient_projected(p, None)
    }

    pub fn gradient_projected(&self, p: &Point<T>, projection: Option<&SurfacePoint<T>>) -> ConstraintGradient<T> {
        match self {
            Self::Plane { normal, .. } => ConstraintGradient {
                vector: -normal,
                degenerate: false,
            },
            Self::Sphere { center, mode, .. } => {
                let d = p - center;
                let r = d.norm();
                if !(r > T::tolerance()) {
                    return ConstraintGradient {
                        vector: Vector::zeros(),
                        degenerate: true,
                    };
                }
                let outward = d / r;
                ConstraintGradient {
                    vector: match mode {
                        SphereMode::ExcludeInside => -outward,
                        SphereMode::ExcludeOutside => outward,
                    },
                    degenerate: false,
                }
            }
            Self::FreeForm(ff) => {
                let q = match projection {
                    Some(sp) => ff.field.gradient_at(&ff.mesh, sp),
                    None => ff.field.query_gradient(&ff.mesh, p),
                };
                ConstraintGradient {
                    vector: q.direction,
                    degenerate: q.degenerate,
                }
            }
        }
    }
}

/// `mu · max(0, g)^power`.
pub fn penalty_from_value<T: Real>(g: T, mu: T, power: PenaltyPower) -> T {
    if g <= T::zero() {
        return T::zero();
    }
    match power {
        PenaltyPower::Linear => mu * g,
        PenaltyPower::Quadratic => mu * g * g,
    }
}

pub fn penalty<T: Real>(c: &Constraint<T>, p: &Point<T>, mu: T, power: PenaltyPower) -> T {
    penalty_from_value(c.evaluate(p), mu, power)
}

pub fn penalty_gradient<T: Real>(c: &Constraint<T>, p: &Point<T>, mu: T, power: PenaltyPower) -> Vector<T> {
    penalty_gradient_projected(c, p, None, mu, power)
}

/// Penalty gradient; zero wherever the constraint is satisfied.
pub fn penalty_gradient_projected<T: Real>(
    c: &Constraint<T>,
    p: &Point<T>,
    projection: Option<&SurfacePoint<T>>,
    mu: T,
    power: PenaltyPower,
) -> Vector<T> {
    let g = c.evaluate_projected(p, projection);
    if g <= T::zero() {
        return Vector::zeros();
    }
    let grad = c.gradient_projected(p, projection).vector;
    match power {
        PenaltyPower::Linear => grad * mu,
        PenaltyPower::Quadratic => grad * (T::lit(2.0) * mu * g),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation<T: Real> {
    pub particle: usize,
    pub constraint: usize,
    pub g: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViolationReport<T: Real> {
    /// Per shape, every particle/constraint pair with `g` above tolerance.
    pub shapes: Vec<Vec<Violation<T>>>,
    /// Largest `g` over all evaluated pairs (`None` without constraints).
    pub max_g: Option<T>,
    pub count: usize,
}

impl<T: Real> ViolationReport<T> {
    pub fn is_empty(&self) -> bool {
        self.count == 0
    }
}

/// How the violation tolerance is derived for each shape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tolerance<T: Real> {
    Absolute(T),
    /// Fraction of each shape's bounding-box diagonal.
    Relative(T),
}

impl<T: Real> Tolerance<T> {
    pub fn for_mesh(&self, mesh: &TriangleMesh<T>) -> T {
        match *self {
            Self::Absolute(t) => t,
            Self::Relative(f) => f * mesh.diagonal(),
        }
    }
}

/// Enumerates every particle/constraint pair whose value exceeds tolerance.
pub fn check_violations<T: Real>(
    system: &ParticleSystem<T>,
    constraints: &[Vec<Constraint<T>>],
    tolerance: Tolerance<T>,
) -> Result<ViolationReport<T>> {
    if constraints.len() != system.shape_count() {
        return Err(Error::ShapeMismatch(format!(
            "{} constraint sets for {} shapes",
            constraints.len(),
            system.shape_count()
        )));
    }
    let mut shapes = Vec::with_capacity(system.shape_count());
    let mut max_g: Option<T> = None;
    let mut count = 0;
    for (i, set) in constraints.iter().enumerate() {
        let tol = tolerance.for_mesh(system.mesh(i));
        let mut found = Vec::new();
        for (j, p) in system.particles(i).iter().enumerate() {
            for (m, c) in set.iter().enumerate() {
                let g = c.evaluate(p);
                max_g = Some(max_g.map_or(g, |x| x.max(g)));
                if g > tol {
                    found.push(Violation {
                        particle: j,
                        constraint: m,
                        g,
                    });
                }
            }
        }
        count += found.len();
        shapes.push(found);
    }
    Ok(ViolationReport { shapes, max_g, count })
}

/// Per-shape constraint file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintDocument {
    #[serde(default)]
    pub planes: Vec<PlaneDocument>,
    #[serde(default)]
    pub spheres: Vec<SphereDocument>,
    #[serde(default)]
    pub ffcs: Vec<FfcDocument>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlaneDocument {
    pub origin: [f64; 3],
    pub normal: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SphereDocument {
    pub center: [f64; 3],
    pub radius: f64,
    pub mode: SphereMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FfcDocument {
    Mask { face_mask: Vec<u8> },
    Field { field: FieldDocument },
}

impl ConstraintDocument {
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: Self = serde_json::from_str(text)?;
        doc.validate()?;
        Ok(doc)
    }

    /// Structural checks that need no mesh.
    pub fn validate(&self) -> Result<()> {
        for p in &self.planes {
            let n = p.normal;
            if !(n.iter().map(|c| c * c).sum::<f64>() > 0.0) || n.iter().chain(&p.origin).any(|c| !c.is_finite()) {
                return Err(Error::InvalidConstraint(
                    "plane needs finite origin and non-zero normal".into(),
                ));
            }
        }
        for s in &self.spheres {
            if !(s.radius > 0.0) || !s.radius.is_finite() || s.center.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidConstraint(
                    "sphere needs finite center and positive radius".into(),
                ));
            }
        }
        for f in &self.ffcs {
            if let FfcDocument::Mask { face_mask } = f {
                FaceMask::from_bits(face_mask)?;
            }
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.planes.is_empty() && self.spheres.is_empty() && self.ffcs.is_empty()
    }

    /// Builds runnable constraints for `mesh` in document order: planes,
    /// spheres, then free-form constraints.
    pub fn resolve<T: Real>(&self, mesh: &Arc<TriangleMesh<T>>) -> Result<Vec<Constraint<T>>> {
        self.validate()?;
        let v = |a: [f64; 3]| Vector::new(T::lit(a[0]), T::lit(a[1]), T::lit(a[2]));
        let mut out = Vec::new();
        for p in &self.planes {
            out.push(Constraint::plane(Point::from(v(p.origin)), v(p.normal))?);
        }
        for s in &self.spheres {
            out.push(Constraint::sphere(Point::from(v(s.center)), T::lit(s.radius), s.mode)?);
        }
        for f in &self.ffcs {
            let field = match f {
                FfcDocument::Mask { face_mask } => field_from_mask(mesh, &FaceMask::from_bits(face_mask)?)?,
                FfcDocument::Field { field } => MeshField::from_document(field, mesh)?,
            };
            out.push(Constraint::free_form(Arc::new(field), mesh.clone())?);
        }
        Ok(out)
    }
}
