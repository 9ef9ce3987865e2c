//! Ensemble (correspondence) entropy of the stacked shape vectors, evaluated
//! in the I×I dual space.

use super::ParticleSystem;
use crate::error::{Error, Result};
use crate::geometry::{tangent_component, Vector};
use crate::Real;
use nalgebra::DMatrix;

/// Centered `3J × I` matrix of shape vectors.
pub fn centered_shape_matrix<T: Real>(system: &ParticleSystem<T>) -> DMatrix<T> {
    let n = system.shape_count();
    let mut y = DMatrix::zeros(3 * system.particle_count(), n);
    for i in 0..n {
        y.set_column(i, &system.shape_vector(i));
    }
    let mean = y.column_mean();
    for mut col in y.column_iter_mut() {
        col -= &mean;
    }
    y
}

/// `H = ½ log det(YᵀY/(I−1) + α·Id)` and its gradient
/// `Y (YᵀY + α(I−1)·Id)⁻¹`, one column per shape, reshaped to per-particle
/// vectors. No tangent projection.
pub fn correspondence_entropy_gradient_raw<T: Real>(
    system: &ParticleSystem<T>,
    alpha: T,
) -> Result<(T, Vec<Vec<Vector<T>>>)> {
    let n = system.shape_count();
    let j = system.particle_count();
    let half = T::lit(0.5);
    if n == 0 {
        return Ok((T::zero(), Vec::new()));
    }
    if n == 1 {
        if !(alpha > T::zero()) {
            return Err(Error::SingularSystem);
        }
        return Ok((half * alpha.ln(), vec![vec![Vector::zeros(); j]]));
    }

    let y = centered_shape_matrix(system);
    let dof = T::from_usize(n - 1).unwrap();
    let mut gram = y.transpose() * &y;
    for k in 0..n {
        gram[(k, k)] += alpha * dof;
    }
    let scale = gram.diagonal().iter().fold(T::zero(), |a, &b| a.max(b));
    let chol = gram.cholesky().ok_or(Error::SingularSystem)?;
    // centering leaves YᵀY rank-deficient; a tiny pivot means α did not fix it
    let floor = scale * T::default_epsilon() * T::from_usize(16 * n).unwrap();
    if chol.l_dirty().diagonal().iter().any(|&d| d * d <= floor) {
        return Err(Error::SingularSystem);
    }
    let log_det = chol.l_dirty().diagonal().iter().fold(T::zero(), |a, &d| a + d.ln()) * T::lit(2.0);
    if !log_det.is_finite() {
        return Err(Error::SingularSystem);
    }
    let h = half * (log_det - T::from_usize(n).unwrap() * dof.ln());

    let solved = chol.solve(&y.transpose()); // I × 3J
    let grads = (0..n)
        .map(|i| {
            (0..j)
                .map(|p| Vector::new(solved[(i, 3 * p)], solved[(i, 3 * p + 1)], solved[(i, 3 * p + 2)]))
                .collect()
        })
        .collect();
    Ok((h, grads))
}

/// Correspondence entropy with tangent-projected gradients.
pub fn correspondence_entropy_gradient<T: Real>(
    system: &ParticleSystem<T>,
    alpha: T,
) -> Result<(T, Vec<Vec<Vector<T>>>)> {
    let (h, mut grads) = correspondence_entropy_gradient_raw(system, alpha)?;
    for (i, shape) in grads.iter_mut().enumerate() {
        let mesh = system.mesh(i);
        for (g, sp) in shape.iter_mut().zip(system.surface_points(i)) {
            *g = tangent_component(g, &mesh.normal_at(sp));
        }
    }
    Ok((h, grads))
}
