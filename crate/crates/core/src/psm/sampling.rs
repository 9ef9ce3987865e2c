//! Per-shape sampling entropy: a Parzen-window estimate with isotropic
//! Gaussian kernels whose widths come from nearest-neighbor spacing.

use crate::geometry::{tangent_component, Point, SurfacePoint, TriangleMesh, Vector};
use crate::scalar::cmp;
use crate::Real;

/// Kernel-width rule: `multiplier ×` the mean distance to the `neighbors`
/// nearest particles of the same shape, clamped to `[1e-4, 0.5] × diagonal`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaPolicy<T: Real> {
    pub neighbors: usize,
    pub multiplier: T,
}

impl<T: Real> Default for SigmaPolicy<T> {
    fn default() -> Self {
        Self {
            neighbors: 6,
            multiplier: T::lit(0.5),
        }
    }
}

impl<T: Real> SigmaPolicy<T> {
    pub fn sigmas(&self, particles: &[Point<T>], diagonal: T) -> Vec<T> {
        let lo = T::lit(1e-4) * diagonal;
        let hi = T::lit(0.5) * diagonal;
        let n = particles.len();
        if n < 2 {
            return vec![hi; n];
        }
        let k = self.neighbors.clamp(1, n - 1);
        let mut dists = Vec::with_capacity(n - 1);
        particles
            .iter()
            .enumerate()
            .map(|(j, p)| {
                dists.clear();
                dists.extend(
                    particles
                        .iter()
                        .enumerate()
                        .filter(|&(i, _)| i != j)
                        .map(|(_, q)| (p - q).norm()),
                );
                dists.select_nth_unstable_by(k - 1, cmp);
                let mean = dists[..k].iter().fold(T::zero(), |a, &b| a + b) / T::from_usize(k).unwrap();
                (mean * self.multiplier).max(lo).min(hi)
            })
            .collect()
    }
}

/// `log Σ exp(x)` without overflow.
fn log_sum_exp<T: Real>(xs: impl Iterator<Item = T> + Clone) -> T {
    let max = xs.clone().fold(T::lit(f64::NEG_INFINITY), |a, b| a.max(b));
    if !max.is_finite() {
        return max;
    }
    max + xs.fold(T::zero(), |a, x| a + (x - max).exp()).ln()
}

/// Entropy estimate `H = −(1/J) Σ_j log ρ_j` for fixed kernel widths.
pub fn sampling_entropy<T: Real>(particles: &[Point<T>], sigmas: &[T]) -> T {
    let n = particles.len();
    if n < 2 {
        return T::zero();
    }
    let nf = T::from_usize(n).unwrap();
    let norm = (nf - T::one()).ln();
    let two_pi = T::two_pi();
    let mut total = T::zero();
    for (j, p) in particles.iter().enumerate() {
        let s2 = sigmas[j] * sigmas[j];
        let lse = log_sum_exp(
            particles
                .iter()
                .enumerate()
                .filter(move |&(k, _)| k != j)
                .map(move |(_, q)| -(p - q).norm_squared() / (s2 + s2)),
        );
        let log_rho = lse - norm - T::lit(1.5) * (two_pi * s2).ln();
        total += log_rho;
    }
    -total / nf
}

/// Entropy estimate and the analytic gradient of `−H` with respect to each
/// particle, holding the kernel widths fixed. No tangent projection.
pub fn sampling_entropy_gradient_raw<T: Real>(particles: &[Point<T>], sigmas: &[T]) -> (T, Vec<Vector<T>>) {
    let n = particles.len();
    if n < 2 {
        return (T::zero(), vec![Vector::zeros(); n]);
    }
    let cache = KernelCache::new(particles, sigmas.to_vec());
    let grads = (0..n).map(|m| cache.gradient(m, particles)).collect();
    (sampling_entropy(particles, sigmas), grads)
}

/// Entropy and tangent-projected descent gradients of `−H` for one shape,
/// with kernel widths from `policy`.
pub fn sampling_entropy_gradient<T: Real>(
    particles: &[Point<T>],
    surface: &[SurfacePoint<T>],
    mesh: &TriangleMesh<T>,
    policy: &SigmaPolicy<T>,
) -> (T, Vec<Vector<T>>) {
    let sigmas = policy.sigmas(particles, mesh.diagonal());
    let (h, mut grads) = sampling_entropy_gradient_raw(particles, &sigmas);
    for (g, sp) in grads.iter_mut().zip(surface) {
        *g = tangent_component(g, &mesh.normal_at(sp));
    }
    (h, grads)
}

/// Pairwise kernel values `K[j][k] = exp(−|p_j − p_k|² / 2σ_j²)` with row
/// sums, kept current while particles move one at a time.
#[derive(Debug, Clone)]
pub(crate) struct KernelCache<T: Real> {
    n: usize,
    sigmas: Vec<T>,
    kernel: Vec<T>,
    row_sum: Vec<T>,
}

impl<T: Real> KernelCache<T> {
    pub(crate) fn new(particles: &[Point<T>], sigmas: Vec<T>) -> Self {
        let n = particles.len();
        let mut cache = Self {
            n,
            sigmas,
            kernel: vec![T::zero(); n * n],
            row_sum: vec![T::zero(); n],
        };
        for j in 0..n {
            cache.refresh_row(j, particles);
        }
        cache
    }

    pub(crate) fn sigma(&self, j: usize) -> T {
        self.sigmas[j]
    }

    fn value(&self, j: usize, p: &Point<T>, q: &Point<T>) -> T {
        let s2 = self.sigmas[j] * self.sigmas[j];
        (-(p - q).norm_squared() / (s2 + s2)).exp()
    }

    fn refresh_row(&mut self, j: usize, particles: &[Point<T>]) {
        let mut sum = T::zero();
        for k in 0..self.n {
            let v = if k == j {
                T::zero()
            } else {
                self.value(j, &particles[j], &particles[k])
            };
            self.kernel[j * self.n + k] = v;
            sum += v;
        }
        self.row_sum[j] = sum;
    }

    /// Re-evaluates every kernel that involves particle `m` after it moved.
    pub(crate) fn update(&mut self, m: usize, particles: &[Point<T>]) {
        self.refresh_row(m, particles);
        for j in 0..self.n {
            if j == m {
                continue;
            }
            let idx = j * self.n + m;
            let v = self.value(j, &particles[j], &particles[m]);
            self.row_sum[j] = self.row_sum[j] - self.kernel[idx] + v;
            self.kernel[idx] = v;
        }
    }

    /// Gradient of `−H` with respect to particle `m`.
    pub(crate) fn gradient(&self, m: usize, particles: &[Point<T>]) -> Vector<T> {
        if self.n < 2 {
            return Vector::zeros();
        }
        let tiny = T::lit(1e-30);
        let pm = particles[m];
        let mut own = Vector::zeros();
        let mut others = Vector::zeros();
        let own_sum = self.row_sum[m].max(tiny);
        let sm2 = self.sigmas[m] * self.sigmas[m];
        for k in 0..self.n {
            if k == m {
                continue;
            }
            let d = pm - particles[k];
            own += d * (self.kernel[m * self.n + k] / own_sum);
            let w = self.kernel[k * self.n + m] / self.row_sum[k].max(tiny);
            let sk2 = self.sigmas[k] * self.sigmas[k];
            others += d * (w / sk2);
        }
        let total = own / sm2 + others;
        -total / T::from_usize(self.n).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_points(n: usize, seed: u64) -> Vec<Point<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                Point::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                )
            })
            .collect()
    }

    #[test]
    fn single_particle_has_zero_entropy() {
        let p = vec![Point::new(1.0, 0.0, 0.0)];
        let (h, g) = sampling_entropy_gradient_raw(&p, &[0.3]);
        assert_eq!(h, 0.0);
        assert_eq!(g, vec![Vector::zeros()]);
    }

    #[test]
    fn gradient_matches_central_differences() {
        for seed in 0..5 {
            let pts = random_points(8, seed);
            let sigmas: Vec<f64> = (0..8).map(|j| 0.3 + 0.05 * j as f64).collect();
            let (_, grads) = sampling_entropy_gradient_raw(&pts, &sigmas);
            let h = 1e-6;
            for m in 0..pts.len() {
                for axis in 0..3 {
                    let mut plus = pts.clone();
                    let mut minus = pts.clone();
                    plus[m][axis] += h;
                    minus[m][axis] -= h;
                    // gradient of -H
                    let fd = -(sampling_entropy(&plus, &sigmas) - sampling_entropy(&minus, &sigmas)) / (2.0 * h);
                    let an = grads[m][axis];
                    assert!(
                        (fd - an).abs() <= 1e-3 * an.abs().max(1e-3),
                        "seed {seed} m {m}: {fd} vs {an}"
                    );
                }
            }
        }
    }

    #[test]
    fn cache_tracks_moves() {
        let mut pts = random_points(6, 3);
        let sigmas = vec![0.4; 6];
        let mut cache = KernelCache::new(&pts, sigmas.clone());
        pts[2] += Vector::new(0.1, -0.05, 0.2);
        cache.update(2, &pts);
        let fresh = KernelCache::new(&pts, sigmas);
        for m in 0..6 {
            assert!((cache.gradient(m, &pts) - fresh.gradient(m, &pts)).norm() < 1e-12);
        }
    }

    #[test]
    fn sigma_policy_clamps() {
        let pts = vec![Point::new(0.0, 0.0, 0.0), Point::new(1e-9, 0.0, 0.0)];
        let s = SigmaPolicy::default().sigmas(&pts, 2.0);
        assert_eq!(s, vec![2e-4, 2e-4]);
        let far = vec![Point::new(0.0, 0.0, 0.0), Point::new(100.0, 0.0, 0.0)];
        assert_eq!(SigmaPolicy::default().sigmas(&far, 2.0), vec![1.0, 1.0]);
        let mid = vec![Point::new(0.0, 0.0, 0.0), Point::new(0.5, 0.0, 0.0)];
        assert_eq!(SigmaPolicy::default().sigmas(&mid, 2.0), vec![0.25, 0.25]);
        let s = SigmaPolicy {
            neighbors: 6,
            multiplier: 2.0,
        }
        .sigmas(&random_points(3, 1), 100.0);
        assert_eq!(s.len(), 3);
    }

    #[test]
    fn entropy_is_stable_for_distant_particles() {
        let pts = vec![Point::new(0.0, 0.0, 0.0), Point::new(1e3, 0.0, 0.0)];
        let h: f64 = sampling_entropy(&pts, &[1e-2, 1e-2]);
        assert!(h.is_finite());
    }
}
