use crate::error::{Error, Result};
use crate::geometry::{tangent_component, Point, SurfacePoint, TriangleMesh, Vector};
use crate::Real;
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::sync::Arc;

/// Corresponding particles on a cohort of meshes.
///
/// Index `j` on one shape corresponds to index `j` on every other shape.
/// Every particle is kept on its mesh together with its surface projection.
#[derive(Debug, Clone)]
pub struct ParticleSystem<T: Real> {
    meshes: Vec<Arc<TriangleMesh<T>>>,
    particles: Vec<Vec<Point<T>>>,
    surface: Vec<Vec<SurfacePoint<T>>>,
}

impl<T: Real> ParticleSystem<T> {
    /// Builds a system from raw positions, projecting each onto its mesh.
    pub fn new(meshes: Vec<Arc<TriangleMesh<T>>>, particles: Vec<Vec<Point<T>>>) -> Result<Self> {
        if meshes.len() != particles.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} meshes but {} particle sets",
                meshes.len(),
                particles.len()
            )));
        }
        if let Some(first) = particles.first() {
            if particles.iter().any(|p| p.len() != first.len()) {
                return Err(Error::ShapeMismatch("shapes have different particle counts".into()));
            }
        }
        let surface: Vec<Vec<SurfacePoint<T>>> = meshes
            .iter()
            .zip(&particles)
            .map(|(m, ps)| ps.iter().map(|p| m.closest_point(p)).collect())
            .collect();
        let particles = surface
            .iter()
            .map(|s| s.iter().map(|sp| sp.position).collect())
            .collect();
        Ok(Self {
            meshes,
            particles,
            surface,
        })
    }

    /// One particle per shape: the projection of the area-weighted mesh
    /// centroid. The seed is accepted for interface symmetry; the placement
    /// is deterministic regardless.
    pub fn init(meshes: Vec<Arc<TriangleMesh<T>>>, _seed: u64) -> Self {
        let particles = meshes.iter().map(|m| vec![m.centroid()]).collect();
        Self::new(meshes, particles).expect("one particle per mesh")
    }

    pub fn shape_count(&self) -> usize {
        self.meshes.len()
    }

    /// Particles per shape (`J`).
    pub fn particle_count(&self) -> usize {
        self.particles.first().map_or(0, Vec::len)
    }

    pub fn mesh(&self, shape: usize) -> &TriangleMesh<T> {
        &self.meshes[shape]
    }

    pub fn meshes(&self) -> &[Arc<TriangleMesh<T>>] {
        &self.meshes
    }

    pub fn particles(&self, shape: usize) -> &[Point<T>] {
        &self.particles[shape]
    }

    pub fn surface_points(&self, shape: usize) -> &[SurfacePoint<T>] {
        &self.surface[shape]
    }

    /// Moves a particle to the surface projection of `p`; returns the
    /// distance travelled.
    pub fn set_particle(&mut self, shape: usize, index: usize, p: &Point<T>) -> T {
        let sp = self.meshes[shape].closest_point(p);
        let moved = (sp.position - self.particles[shape][index]).norm();
        self.particles[shape][index] = sp.position;
        self.surface[shape][index] = sp;
        moved
    }

    #[cfg(test)]
    pub(crate) fn shape_mut(
        &mut self,
        shape: usize,
    ) -> (&TriangleMesh<T>, &mut Vec<Point<T>>, &mut Vec<SurfacePoint<T>>) {
        (
            &self.meshes[shape],
            &mut self.particles[shape],
            &mut self.surface[shape],
        )
    }

    pub(crate) fn shapes_mut(
        &mut self,
    ) -> impl Iterator<Item = (&Arc<TriangleMesh<T>>, &mut Vec<Point<T>>, &mut Vec<SurfacePoint<T>>)> {
        self.meshes
            .iter()
            .zip(self.particles.iter_mut())
            .zip(self.surface.iter_mut())
            .map(|((m, p), s)| (m, p, s))
    }

    /// Flattened `[x₀, y₀, z₀, x₁, …]` vector of one shape.
    pub fn shape_vector(&self, shape: usize) -> DVector<T> {
        DVector::from_iterator(
            3 * self.particle_count(),
            self.particles[shape].iter().flat_map(|p| [p.x, p.y, p.z]),
        )
    }

    /// Doubles the particle count. Parent `j` becomes children `2j` and
    /// `2j + 1`, offset by `±epsilon_frac · diagonal` along a random tangent
    /// direction. The direction for index `j` is shared by all shapes.
    pub fn split(&self, epsilon_frac: T, seed: u64) -> Self {
        self.split_first(self.particle_count(), epsilon_frac, seed)
    }

    /// Splits only parents `0..count`; later parents are carried over
    /// unchanged after the children. Used to reach a target that is not a
    /// power of two.
    pub fn split_first(&self, count: usize, epsilon_frac: T, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let j = self.particle_count();
        let directions: Vec<Vector<T>> = (0..j)
            .map(|_| {
                let v: [f64; 3] = [
                    StandardNormal.sample(&mut rng),
                    StandardNormal.sample(&mut rng),
                    StandardNormal.sample(&mut rng),
                ];
                Vector::new(T::lit(v[0]), T::lit(v[1]), T::lit(v[2]))
            })
            .collect();

        let mut particles = Vec::with_capacity(self.shape_count());
        for (i, mesh) in self.meshes.iter().enumerate() {
            let eps = epsilon_frac * mesh.diagonal();
            let mut children = Vec::with_capacity(j + count);
            for (k, dir) in directions.iter().enumerate() {
                let sp = &self.surface[i][k];
                if k >= count {
                    children.push(sp.position);
                    continue;
                }
                let n = mesh.normal_at(sp);
                let mut t = tangent_component(dir, &n);
                if t.norm() <= T::tolerance() {
                    t = tangent_component(&Vector::x(), &n);
                    if t.norm() <= T::tolerance() {
                        t = tangent_component(&Vector::y(), &n);
                    }
                }
                let offset = t.normalize() * eps;
                let p = sp.position;
                children.push(p + offset);
                children.push(p - offset);
            }
            particles.push(children);
        }
        Self::new(self.meshes.clone(), particles).expect("split keeps shapes consistent")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::icosphere;

    fn spheres(n: usize) -> Vec<Arc<TriangleMesh<f64>>> {
        let m = Arc::new(icosphere::<f64>(3));
        vec![m; n]
    }

    #[test]
    fn init_projects_centroid() {
        let sys = ParticleSystem::init(spheres(2), 7);
        assert_eq!(sys.particle_count(), 1);
        let p = sys.particles(0)[0];
        assert!((p.coords.norm() - 1.0).abs() < 0.02);
        assert_eq!(sys.particles(0), sys.particles(1));
        let again = ParticleSystem::init(spheres(2), 7);
        assert_eq!(again.particles(0), sys.particles(0));
    }

    #[test]
    fn split_doubles_and_keeps_correspondence() {
        let mut sys = ParticleSystem::init(spheres(3), 0);
        for level in 0..4 {
            let next = sys.split(0.01, level);
            assert_eq!(next.particle_count(), 2 * sys.particle_count());
            let eps = 0.01 * sys.mesh(0).diagonal();
            for (k, parent) in sys.particles(0).iter().enumerate() {
                for child in &next.particles(0)[2 * k..2 * k + 2] {
                    assert!((child - parent).norm() <= eps + 1e-3);
                }
            }
            assert_eq!(next.particles(0), next.particles(1));
            assert_eq!(next.particles(1), next.particles(2));
            sys = next;
        }
        assert_eq!(sys.particle_count(), 16);
        let partial = sys.split_first(4, 0.01, 9);
        assert_eq!(partial.particle_count(), 20);
        assert_eq!(partial.particles(0)[8], sys.particles(0)[4]);
    }

    #[test]
    fn particles_stay_on_surface() {
        let mut sys = ParticleSystem::init(spheres(1), 0).split(0.05, 1).split(0.05, 2);
        sys.set_particle(0, 2, &Point::new(3.0, 0.0, 0.0));
        for (p, sp) in sys.particles(0).iter().zip(sys.surface_points(0)) {
            assert_eq!(*p, sp.position);
            let q = sys.mesh(0).project_to_surface(p);
            assert!((q - p).norm() < 1e-9 * sys.mesh(0).diagonal());
        }
    }

    #[test]
    fn mismatched_input_rejected() {
        let r = ParticleSystem::new(spheres(2), vec![vec![Point::origin()], vec![]]);
        assert!(matches!(r, Err(Error::ShapeMismatch(_))));
        assert!(ParticleSystem::new(spheres(2), vec![vec![]]).is_err());
    }
}
