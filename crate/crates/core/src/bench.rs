//! Timing of the constraint-penalty pass as a function of particle count.

use crate::constraints::{penalty_gradient_projected, Constraint, PenaltyPower, SphereMode};
use crate::datagen::icosphere;
use crate::error::{Error, Result};
use crate::ffc::{field_from_mask, FaceMask};
use crate::geometry::{Point, SurfacePoint, TriangleMesh, Vector};
use crate::Real;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::hint::black_box;
use std::sync::Arc;
use std::time::Instant;

/// Penalty gradients of every particle against every constraint, the
/// constraint-enforcement part of one optimizer sweep.
pub fn penalty_pass<T: Real>(
    mesh: &TriangleMesh<T>,
    particles: &[Point<T>],
    surface: &[SurfacePoint<T>],
    constraints: &[Constraint<T>],
    mu: T,
    power: PenaltyPower,
) -> Vec<Vector<T>> {
    particles
        .iter()
        .zip(surface)
        .map(|(p, sp)| {
            constraints.iter().fold(Vector::zeros(), |acc, c| {
                let proj = match c {
                    Constraint::FreeForm(ff) if std::ptr::eq(Arc::as_ptr(&ff.mesh), mesh) => Some(sp),
                    _ => None,
                };
                acc + penalty_gradient_projected(c, p, proj, mu, power)
            })
        })
        .collect()
}

/// Fixed scene: unit icosphere (level 4) with a plane, a sphere and a
/// hemisphere free-form constraint, each violated by part of the particles.
pub struct ScalingScene {
    pub mesh: Arc<TriangleMesh<f64>>,
    pub constraints: Vec<Constraint<f64>>,
}

impl ScalingScene {
    pub fn new() -> Result<Self> {
        let mesh = Arc::new(icosphere::<f64>(4));
        let mask = FaceMask::new((0..mesh.faces().len()).map(|f| mesh.face_centroid(f).z > 0.0).collect());
        let field = Arc::new(field_from_mask(&mesh, &mask)?);
        let constraints = vec![
            Constraint::plane(Point::new(0.0, 0.0, 0.0), Vector::new(1.0, 0.0, 0.0))?,
            Constraint::sphere(Point::new(0.0, 1.0, 0.0), 0.8, SphereMode::ExcludeInside)?,
            Constraint::free_form(field, mesh.clone())?,
        ];
        Ok(Self { mesh, constraints })
    }

    /// `j` surface particles, uniform over directions, fixed by `seed`.
    pub fn particles(&self, j: usize, seed: u64) -> (Vec<Point<f64>>, Vec<SurfacePoint<f64>>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let surface: Vec<_> = (0..j)
            .map(|_| {
                let v = Vector::<f64>::new(
                    StandardNormal.sample(&mut rng),
                    StandardNormal.sample(&mut rng),
                    StandardNormal.sample(&mut rng),
                );
                self.mesh.closest_point(&Point::from(v.normalize()))
            })
            .collect();
        (surface.iter().map(|s| s.position).collect(), surface)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingSample {
    pub particles: usize,
    pub repetition: usize,
    /// Seconds per pass.
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub linear_aic: f64,
    pub quadratic_aic: f64,
    pub linear_preferred: bool,
    /// Median time at the largest J over median time at the smallest.
    pub ratio: f64,
    pub ratio_span: (usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingReport {
    pub samples: Vec<TimingSample>,
    /// `None` with fewer than two distinct particle counts.
    pub fit: Option<FitReport>,
}

impl ScalingReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("particles,repetition,seconds_per_pass\n");
        for s in &self.samples {
            out.push_str(&format!("{},{},{:e}\n", s.particles, s.repetition, s.seconds));
        }
        out
    }

    pub fn summary(&self) -> String {
        match &self.fit {
            None => "fit skipped: need at least two particle counts".to_string(),
            Some(f) => format!(
                "linear AIC {:.3}, quadratic AIC {:.3}, preferred {}; t({})/t({}) = {:.3}",
                f.linear_aic,
                f.quadratic_aic,
                if f.linear_preferred { "linear" } else { "quadratic" },
                f.ratio_span.1,
                f.ratio_span.0,
                f.ratio
            ),
        }
    }
}

/// Least squares of `y = a + b·x`; returns the residual sum of squares.
fn rss_affine(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let a = my - b * mx;
    x.iter().zip(y).map(|(xi, yi)| (yi - a - b * xi).powi(2)).sum()
}

fn aic(rss: f64, n: usize, params: usize) -> f64 {
    let n = n as f64;
    n * (rss.max(f64::MIN_POSITIVE) / n).ln() + 2.0 * params as f64
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 0 {
        0.5 * (v[m - 1] + v[m])
    } else {
        v[m]
    }
}

/// Compares `t = a + b·J` against `t = a + c·J²` by AIC over all samples.
pub fn fit_scaling(samples: &[TimingSample]) -> Option<FitReport> {
    let mut js: Vec<usize> = samples.iter().map(|s| s.particles).collect();
    js.sort_unstable();
    js.dedup();
    if js.len() < 2 {
        return None;
    }
    let x: Vec<f64> = samples.iter().map(|s| s.particles as f64).collect();
    let x2: Vec<f64> = x.iter().map(|v| v * v).collect();
    let y: Vec<f64> = samples.iter().map(|s| s.seconds).collect();
    let linear_aic = aic(rss_affine(&x, &y), y.len(), 2);
    let quadratic_aic = aic(rss_affine(&x2, &y), y.len(), 2);
    let med = |j: usize| median(samples.iter().filter(|s| s.particles == j).map(|s| s.seconds).collect());
    let (lo, hi) = (js[0], js[js.len() - 1]);
    Some(FitReport {
        linear_aic,
        quadratic_aic,
        linear_preferred: linear_aic <= quadratic_aic,
        ratio: med(hi) / med(lo),
        ratio_span: (lo, hi),
    })
}

/// Times the penalty pass for each particle count. Each sample is the mean
/// over enough passes to cover roughly `min_pass_particles` particle
/// evaluations, which keeps small-J samples above timer resolution.
pub fn run_scaling(particle_counts: &[usize], repetitions: usize, seed: u64) -> Result<ScalingReport> {
    if repetitions == 0 {
        return Err(Error::InvalidConfig("repetitions must be positive".into()));
    }
    if particle_counts.is_empty() || particle_counts.contains(&0) {
        return Err(Error::InvalidConfig("particle counts must be positive".into()));
    }
    const MIN_PASS_PARTICLES: usize = 1 << 16;
    let scene = ScalingScene::new()?;
    let diag = scene.mesh.diagonal();
    let mu = 100.0 / (diag * diag);
    let mut samples = Vec::new();
    for rep in 0..repetitions {
        // interleave particle counts so drift affects all of them alike
        for &j in particle_counts {
            let (particles, surface) = scene.particles(j, seed.wrapping_add(j as u64));
            let passes = (MIN_PASS_PARTICLES / j).max(1);
            black_box(penalty_pass(
                &scene.mesh,
                &particles,
                &surface,
                &scene.constraints,
                mu,
                PenaltyPower::Quadratic,
            ));
            let start = Instant::now();
            for _ in 0..passes {
                black_box(penalty_pass(
                    black_box(&scene.mesh),
                    black_box(&particles),
                    &surface,
                    &scene.constraints,
                    mu,
                    PenaltyPower::Quadratic,
                ));
            }
            samples.push(TimingSample {
                particles: j,
                repetition: rep,
                seconds: start.elapsed().as_secs_f64() / passes as f64,
            });
        }
    }
    let fit = fit_scaling(&samples);
    Ok(ScalingReport { samples, fit })
}
