//! PCA over corresponding particle vectors.
//!
//! Shapes are used as given; aligning the cohort beforehand is up to the
//! caller.

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::psm::ParticleSystem;
use crate::scalar::cmp;
use crate::Real;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

/// Mean shape and principal modes of a cohort.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeModel<T: Real> {
    mean: DVector<T>,
    /// Descending, length `I − 1`.
    eigenvalues: Vec<T>,
    /// `3J × K` orthonormal columns, one per positive eigenvalue.
    eigenvectors: DMatrix<T>,
    shapes: usize,
}

impl<T: Real> ShapeModel<T> {
    /// Dual-space PCA: eigendecomposition of the `I × I` Gram matrix of the
    /// centered shape vectors, lifted back to particle space. Covariance is
    /// normalized by `I − 1`.
    pub fn from_vectors(shapes: &[DVector<T>]) -> Result<Self> {
        let n = shapes.len();
        if n < 2 {
            return Err(Error::TooFewShapes(n));
        }
        let d = shapes[0].len();
        if d == 0 || d % 3 != 0 || shapes.iter().any(|s| s.len() != d) {
            return Err(Error::ShapeMismatch(
                "shape vectors must share a length divisible by 3".into(),
            ));
        }
        let nf = T::from_usize(n).unwrap();
        let mean = shapes.iter().fold(DVector::zeros(d), |acc, s| acc + s) / nf;
        let y = DMatrix::from_columns(&shapes.iter().map(|s| s - &mean).collect::<Vec<_>>());
        let dof = nf - T::one();
        let gram = y.transpose() * &y / dof;
        let eig = SymmetricEigen::new(gram);

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| cmp(&eig.eigenvalues[b], &eig.eigenvalues[a]));
        let scale = eig.eigenvalues.iter().fold(T::zero(), |a, &b| a.max(b.abs()));
        let cutoff = scale * T::lit(1e3) * T::default_epsilon() * nf;

        let mut eigenvalues = Vec::with_capacity(n - 1);
        let mut columns = Vec::new();
        for &k in order.iter().take(n - 1) {
            let lambda = eig.eigenvalues[k];
            if lambda > cutoff && lambda > T::zero() {
                let v = eig.eigenvectors.column(k);
                let mut u = &y * v;
                let norm = u.norm();
                u /= norm;
                columns.push(u);
                eigenvalues.push(lambda);
            } else {
                eigenvalues.push(T::zero());
            }
        }
        let eigenvectors = if columns.is_empty() {
            DMatrix::zeros(d, 0)
        } else {
            DMatrix::from_columns(&columns)
        };
        Ok(Self {
            mean,
            eigenvalues,
            eigenvectors,
            shapes: n,
        })
    }

    pub fn from_system(system: &ParticleSystem<T>) -> Result<Self> {
        let vectors: Vec<_> = (0..system.shape_count()).map(|i| system.shape_vector(i)).collect();
        Self::from_vectors(&vectors)
    }

    pub fn mean(&self) -> &DVector<T> {
        &self.mean
    }

    pub fn mean_particles(&self) -> Vec<Point<T>> {
        to_points(&self.mean)
    }

    pub fn eigenvalues(&self) -> &[T] {
        &self.eigenvalues
    }

    /// Orthonormal modes with positive eigenvalue.
    pub fn eigenvectors(&self) -> &DMatrix<T> {
        &self.eigenvectors
    }

    pub fn particle_count(&self) -> usize {
        self.mean.len() / 3
    }

    pub fn shape_count(&self) -> usize {
        self.shapes
    }

    /// `mean + t·√λ_mode·u_mode`. Modes with zero variance return the mean.
    pub fn mode_shape(&self, mode: usize, t: T) -> Result<Vec<Point<T>>> {
        if mode >= self.eigenvalues.len() {
            return Err(Error::ModeOutOfRange {
                mode,
                available: self.eigenvalues.len(),
            });
        }
        if mode >= self.eigenvectors.ncols() {
            return Ok(self.mean_particles());
        }
        let v = &self.mean + self.eigenvectors.column(mode) * (t * self.eigenvalues[mode].sqrt());
        Ok(to_points(&v))
    }

    /// Coefficients of a shape vector in the mode basis.
    pub fn project(&self, shape: &DVector<T>) -> DVector<T> {
        self.eigenvectors.transpose() * (shape - &self.mean)
    }

    pub fn reconstruct(&self, coefficients: &DVector<T>) -> DVector<T> {
        &self.mean + &self.eigenvectors * coefficients
    }

    /// Cumulative explained-variance ratios.
    pub fn compactness(&self) -> Vec<T> {
        let total = self.eigenvalues.iter().fold(T::zero(), |a, &b| a + b);
        if total <= T::zero() {
            return vec![T::one(); self.eigenvalues.len()];
        }
        let mut acc = T::zero();
        let mut out: Vec<T> = self
            .eigenvalues
            .iter()
            .map(|&l| {
                acc += l;
                (acc / total).min(T::one())
            })
            .collect();
        if let Some(last) = out.last_mut() {
            *last = T::one();
        }
        out
    }

    pub fn to_document(&self) -> ShapeModelDocument {
        ShapeModelDocument {
            shapes: self.shapes,
            particles: self.particle_count(),
            mean: self.mean.iter().map(|x| x.as_f64()).collect(),
            eigenvalues: self.eigenvalues.iter().map(|x| x.as_f64()).collect(),
            eigenvectors: self
                .eigenvectors
                .column_iter()
                .map(|c| c.iter().map(|x| x.as_f64()).collect())
                .collect(),
        }
    }

    pub fn from_document(doc: &ShapeModelDocument) -> Result<Self> {
        let d = 3 * doc.particles;
        if doc.mean.len() != d || doc.eigenvectors.iter().any(|c| c.len() != d) {
            return Err(Error::ShapeMismatch(
                "model arrays do not match the particle count".into(),
            ));
        }
        let mean = DVector::from_iterator(d, doc.mean.iter().map(|&x| T::lit(x)));
        let columns: Vec<DVector<T>> = doc
            .eigenvectors
            .iter()
            .map(|c| DVector::from_iterator(d, c.iter().map(|&x| T::lit(x))))
            .collect();
        Ok(Self {
            mean,
            eigenvalues: doc.eigenvalues.iter().map(|&x| T::lit(x)).collect(),
            eigenvectors: if columns.is_empty() {
                DMatrix::zeros(d, 0)
            } else {
                DMatrix::from_columns(&columns)
            },
            shapes: doc.shapes,
        })
    }
}

fn to_points<T: Real>(v: &DVector<T>) -> Vec<Point<T>> {
    v.as_slice()
        .chunks_exact(3)
        .map(|c| Point::new(c[0], c[1], c[2]))
        .collect()
}

/// JSON form of a [`ShapeModel`]; each eigenvector is a flat `3J` array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeModelDocument {
    pub shapes: usize,
    pub particles: usize,
    pub mean: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<Vec<f64>>,
}

/// Shape vector from a particle list.
pub fn shape_vector<T: Real>(particles: &[Point<T>]) -> DVector<T> {
    DVector::from_iterator(3 * particles.len(), particles.iter().flat_map(|p| [p.x, p.y, p.z]))
}

/// Pearson correlation; zero when either input has no variance.
pub fn pearson<T: Real>(a: &[T], b: &[T]) -> T {
    let n = T::from_usize(a.len().min(b.len())).unwrap();
    if n < T::lit(2.0) {
        return T::zero();
    }
    let ma = a.iter().fold(T::zero(), |s, &x| s + x) / n;
    let mb = b.iter().fold(T::zero(), |s, &x| s + x) / n;
    let (mut sab, mut saa, mut sbb) = (T::zero(), T::zero(), T::zero());
    for (&x, &y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa <= T::zero() || sbb <= T::zero() {
        return T::zero();
    }
    sab / (saa * sbb).sqrt()
}
