use super::correspondence::correspondence_entropy_gradient;
use super::sampling::{sampling_entropy, KernelCache, SigmaPolicy};
use super::ParticleSystem;
use crate::constraints::{
    check_violations, penalty_from_value, penalty_gradient_projected, Constraint, PenaltyPower, Tolerance,
    ViolationReport,
};
use crate::error::{Error, Result};
use crate::geometry::{tangent_component, Point, SurfacePoint, TriangleMesh, Vector};
use crate::Real;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Optimizer settings. Lengths are fractions of each shape's bounding-box
/// diagonal so one configuration serves cohorts of mixed size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    /// Final particles per shape. Levels double the count; the last split
    /// only splits as many parents as needed to land on the target.
    pub target_particles: usize,
    /// Iteration cap for each split level.
    pub iterations_per_level: usize,
    /// Dimensionless descent step; particle `j` moves by
    /// `step · J · σ_j² · gradient`. The factor `J` cancels the `1/J` of the
    /// entropy estimate so a step means the same thing at every level.
    pub initial_step: f64,
    /// Factor applied to the step whenever a sweep increases the objective;
    /// the sweep is then redone from the previous positions.
    pub step_decay: f64,
    pub sigma_neighbors: usize,
    pub sigma_multiplier: f64,
    /// Covariance regularizer in units of the mean squared kernel width.
    pub alpha: f64,
    /// Weight of the correspondence term relative to the sampling term.
    pub correspondence_weight: f64,
    /// Penalty weight; shape `i` uses `mu / diagonal_i²`.
    pub mu: f64,
    /// Multiplier on `mu` after every split.
    pub mu_growth: f64,
    pub penalty_power: PenaltyPower,
    /// A level ends once the mean particle displacement per iteration,
    /// relative to the diagonal, drops below this.
    pub convergence_tol: f64,
    /// Split offset relative to the diagonal.
    pub split_epsilon: f64,
    /// Violation tolerance relative to the diagonal.
    pub violation_tolerance: f64,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            target_particles: 64,
            iterations_per_level: 300,
            initial_step: 1.0,
            step_decay: 0.9,
            sigma_neighbors: 6,
            sigma_multiplier: 0.5,
            alpha: 0.05,
            correspondence_weight: 1.0,
            mu: 1e5,
            mu_growth: 1.0,
            penalty_power: PenaltyPower::Quadratic,
            convergence_tol: 1e-5,
            split_epsilon: 1e-2,
            violation_tolerance: 1e-3,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.target_particles == 0 {
            return bad("target_particles must be positive");
        }
        if self.iterations_per_level == 0 {
            return bad("iterations_per_level must be positive");
        }
        if !(self.initial_step > 0.0) || !(self.step_decay > 0.0 && self.step_decay <= 1.0) {
            return bad("initial_step must be positive and step_decay in (0, 1]");
        }
        if self.sigma_neighbors == 0 || !(self.sigma_multiplier > 0.0) {
            return bad("sigma policy parameters must be positive");
        }
        if !(self.alpha >= 0.0) || !(self.correspondence_weight >= 0.0) {
            return bad("alpha and correspondence_weight must be non-negative");
        }
        if !(self.mu >= 0.0) || !(self.mu_growth >= 1.0) {
            return bad("mu must be non-negative and mu_growth at least 1");
        }
        if !(self.convergence_tol > 0.0) || !(self.split_epsilon > 0.0) || !(self.violation_tolerance >= 0.0) {
            return bad("tolerances must be positive");
        }
        Ok(())
    }

    pub fn sigma_policy<T: Real>(&self) -> SigmaPolicy<T> {
        SigmaPolicy {
            neighbors: self.sigma_neighbors,
            multiplier: T::lit(self.sigma_multiplier),
        }
    }
}

/// Terms of the penalized objective, each as it enters `F`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveComponents<T: Real> {
    pub total: T,
    /// `w · H(𝒫)`.
    pub correspondence: T,
    /// `−Σᵢ H(Pᵢ)`.
    pub sampling: T,
    pub penalty: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord<T: Real> {
    pub iteration: usize,
    pub particles: usize,
    pub objective: ObjectiveComponents<T>,
    pub mean_step: T,
    pub violations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceLog<T: Real> {
    pub records: Vec<IterationRecord<T>>,
}

impl<T: Real> Default for ConvergenceLog<T> {
    fn default() -> Self {
        Self { records: Vec::new() }
    }
}

#[derive(Debug, Clone)]
pub struct OptimizeResult<T: Real> {
    pub system: ParticleSystem<T>,
    pub log: ConvergenceLog<T>,
    /// `false` if the final level hit its iteration cap above tolerance.
    pub converged: bool,
    pub violations: ViolationReport<T>,
}

fn shape_sigmas<T: Real>(system: &ParticleSystem<T>, policy: &SigmaPolicy<T>) -> Vec<Vec<T>> {
    (0..system.shape_count())
        .into_par_iter()
        .map(|i| policy.sigmas(system.particles(i), system.mesh(i).diagonal()))
        .collect()
}

fn effective_alpha<T: Real>(sigmas: &[Vec<T>], cfg: &OptimizerConfig) -> T {
    let (sum, count) = sigmas
        .iter()
        .flatten()
        .fold((T::zero(), 0usize), |(s, c), &x| (s + x * x, c + 1));
    if count == 0 {
        return T::lit(cfg.alpha);
    }
    T::lit(cfg.alpha) * sum / T::from_usize(count).unwrap()
}

fn shape_mu<T: Real>(mesh: &TriangleMesh<T>, mu: f64) -> T {
    let d = mesh.diagonal();
    T::lit(mu) / (d * d)
}

fn projection_for<'a, T: Real>(
    c: &Constraint<T>,
    mesh: &TriangleMesh<T>,
    sp: &'a SurfacePoint<T>,
) -> Option<&'a SurfacePoint<T>> {
    match c {
        Constraint::FreeForm(ff) if std::ptr::eq(Arc::as_ptr(&ff.mesh), mesh) => Some(sp),
        _ => None,
    }
}

fn penalty_sum<T: Real>(
    system: &ParticleSystem<T>,
    constraints: &[Vec<Constraint<T>>],
    mu: f64,
    power: PenaltyPower,
) -> T {
    (0..system.shape_count())
        .map(|i| {
            let mesh = system.mesh(i);
            let mu_i = shape_mu(mesh, mu);
            let mut total = T::zero();
            for (p, sp) in system.particles(i).iter().zip(system.surface_points(i)) {
                for c in &constraints[i] {
                    let g = c.evaluate_projected(p, projection_for(c, mesh, sp));
                    total += penalty_from_value(g, mu_i, power);
                }
            }
            total
        })
        .fold(T::zero(), |a, b| a + b)
}

fn count_violations<T: Real>(system: &ParticleSystem<T>, constraints: &[Vec<Constraint<T>>], tol: f64) -> usize {
    (0..system.shape_count())
        .map(|i| {
            let mesh = system.mesh(i);
            let t = T::lit(tol) * mesh.diagonal();
            system
                .particles(i)
                .iter()
                .zip(system.surface_points(i))
                .map(|(p, sp)| {
                    constraints[i]
                        .iter()
                        .filter(|c| c.evaluate_projected(p, projection_for(c, mesh, sp)) > t)
                        .count()
                })
                .sum::<usize>()
        })
        .sum()
}

fn objective_generic<T: Real>(
    system: &ParticleSystem<T>,
    constraints: &[Vec<Constraint<T>>],
    cfg: &OptimizerConfig,
    mu: f64,
) -> Result<ObjectiveComponents<T>> {
    let policy = cfg.sigma_policy::<T>();
    let sigmas = shape_sigmas(system, &policy);
    let sampling = (0..system.shape_count())
        .into_par_iter()
        .map(|i| sampling_entropy(system.particles(i), &sigmas[i]))
        .collect::<Vec<T>>()
        .into_iter()
        .fold(T::zero(), |a, b| a - b);
    let w = T::lit(cfg.correspondence_weight);
    let correspondence = if system.shape_count() >= 2 && w > T::zero() {
        let (h, _) = correspondence_entropy_gradient(system, effective_alpha(&sigmas, cfg))?;
        w * h
    } else {
        T::zero()
    };
    let penalty = penalty_sum(system, constraints, mu, cfg.penalty_power);
    Ok(ObjectiveComponents {
        total: correspondence + sampling + penalty,
        correspondence,
        sampling,
        penalty,
    })
}

/// Penalized objective `F = w·H(𝒫) − Σᵢ H(Pᵢ) + Σ penalties` with kernel
/// widths from the configured policy.
pub fn objective_value<T: Real>(
    system: &ParticleSystem<T>,
    constraints: &[Vec<Constraint<T>>],
    cfg: &OptimizerConfig,
) -> Result<ObjectiveComponents<T>> {
    check_shape_count(system, constraints)?;
    objective_generic(system, constraints, cfg, cfg.mu)
}

fn check_shape_count<T: Real>(system: &ParticleSystem<T>, constraints: &[Vec<Constraint<T>>]) -> Result<()> {
    if constraints.len() != system.shape_count() {
        return Err(Error::ShapeMismatch(format!(
            "{} constraint sets for {} shapes",
            constraints.len(),
            system.shape_count()
        )));
    }
    Ok(())
}

/// Inputs shared by every particle update of one shape.
pub(crate) struct ShapeUpdate<'a, T: Real> {
    pub mesh: &'a TriangleMesh<T>,
    pub constraints: &'a [Constraint<T>],
    pub sigmas: Vec<T>,
    pub correspondence: Option<&'a [Vector<T>]>,
    pub weight: T,
    pub mu: T,
    pub power: PenaltyPower,
    pub step: T,
}

impl<T: Real> ShapeUpdate<'_, T> {
    /// Sequential sweep over the shape's particles; each update sees the
    /// positions already moved earlier in the sweep. Returns the summed
    /// displacement relative to the diagonal.
    pub(crate) fn sweep(
        self,
        particles: &mut [Point<T>],
        surface: &mut [SurfacePoint<T>],
        mut observer: Option<&mut dyn FnMut(usize, &[Point<T>])>,
    ) -> T {
        let diag = self.mesh.diagonal();
        let mut cache = KernelCache::new(particles, self.sigmas);
        let mut moved = T::zero();
        for j in 0..particles.len() {
            if let Some(obs) = observer.as_mut() {
                obs(j, particles);
            }
            let sp = surface[j];
            let p = particles[j];
            let normal = self.mesh.normal_at(&sp);
            let mut grad = tangent_component(&cache.gradient(j, particles), &normal);
            if let Some(corr) = self.correspondence {
                grad += corr[j] * self.weight;
            }
            for c in self.constraints {
                grad += penalty_gradient_projected(c, &p, projection_for(c, self.mesh, &sp), self.mu, self.power);
            }
            let sigma = cache.sigma(j);
            let mut disp = grad * (-self.step * sigma * sigma);
            let len = disp.norm();
            if len > sigma {
                disp *= sigma / len;
            }
            if len == T::zero() {
                continue;
            }
            let next = self.mesh.closest_point(&(p + disp));
            moved += (next.position - p).norm() / diag;
            particles[j] = next.position;
            surface[j] = next;
            cache.update(j, particles);
        }
        moved
    }
}

fn iterate<T: Real>(
    system: &mut ParticleSystem<T>,
    constraints: &[Vec<Constraint<T>>],
    cfg: &OptimizerConfig,
    step: T,
    mu: f64,
) -> Result<T> {
    let policy = cfg.sigma_policy::<T>();
    let sigmas = shape_sigmas(system, &policy);
    let w = T::lit(cfg.correspondence_weight);
    let correspondence = if system.shape_count() >= 2 && w > T::zero() {
        Some(correspondence_entropy_gradient(system, effective_alpha(&sigmas, cfg))?.1)
    } else {
        None
    };
    let total = system.particle_count() * system.shape_count();
    let per_particle = T::from_usize(system.particle_count().max(1)).unwrap();
    let moved: Vec<T> = system
        .shapes_mut()
        .zip(sigmas)
        .enumerate()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(i, ((mesh, particles, surface), sigmas))| {
            ShapeUpdate {
                mesh,
                constraints: &constraints[i],
                sigmas,
                correspondence: correspondence.as_ref().map(|c| c[i].as_slice()),
                weight: w,
                mu: shape_mu(mesh, mu),
                power: cfg.penalty_power,
                step: step * per_particle,
            }
            .sweep(particles, surface, None)
        })
        .collect();
    let sum = moved.into_iter().fold(T::zero(), |a, b| a + b);
    Ok(if total == 0 {
        T::zero()
    } else {
        sum / T::from_usize(total).unwrap()
    })
}

/// One Gauss-Seidel sweep over all shapes. The correspondence gradient is
/// computed once up front; sampling and penalty forces are re-evaluated per
/// particle against the current positions. Returns the mean displacement
/// relative to each shape's diagonal.
pub fn gauss_seidel_iteration<T: Real>(
    system: &mut ParticleSystem<T>,
    constraints: &[Vec<Constraint<T>>],
    cfg: &OptimizerConfig,
    step: T,
) -> Result<T> {
    check_shape_count(system, constraints)?;
    iterate(system, constraints, cfg, step, cfg.mu)
}

/// Runs the multiscale schedule: optimize, split, optimize, … until the
/// target particle count is reached and its level has settled.
pub fn optimize<T: Real>(
    meshes: Vec<Arc<TriangleMesh<T>>>,
    constraints: &[Vec<Constraint<T>>],
    cfg: &OptimizerConfig,
) -> Result<OptimizeResult<T>> {
    cfg.validate()?;
    refine(ParticleSystem::init(meshes, cfg.seed), constraints, cfg)
}

/// Continues the schedule from an existing system: optimizes at its current
/// particle count, then splits and optimizes until the target is reached.
pub fn refine<T: Real>(
    mut system: ParticleSystem<T>,
    constraints: &[Vec<Constraint<T>>],
    cfg: &OptimizerConfig,
) -> Result<OptimizeResult<T>> {
    cfg.validate()?;
    check_shape_count(&system, constraints)?;
    let mut log = ConvergenceLog::default();
    let mut mu = cfg.mu;
    let mut level = 0u64;
    let converged = loop {
        let converged = run_level(&mut system, constraints, cfg, mu, &mut log)?;
        if system.particle_count() >= cfg.target_particles {
            break converged;
        }
        level += 1;
        let count = (cfg.target_particles - system.particle_count()).min(system.particle_count());
        system = system.split_first(count, T::lit(cfg.split_epsilon), cfg.seed.wrapping_add(level));
        mu *= cfg.mu_growth;
    };
    if !converged {
        log::warn!("final level stopped at the iteration cap");
    }
    let violations = check_violations(
        &system,
        constraints,
        Tolerance::Relative(T::lit(cfg.violation_tolerance)),
    )?;
    Ok(OptimizeResult {
        system,
        log,
        converged,
        violations,
    })
}

/// Rejected sweeps per iteration before a worse objective is accepted.
const MAX_BACKTRACKS: usize = 6;

fn run_level<T: Real>(
    system: &mut ParticleSystem<T>,
    constraints: &[Vec<Constraint<T>>],
    cfg: &OptimizerConfig,
    mu: f64,
    log: &mut ConvergenceLog<T>,
) -> Result<bool> {
    let mut step = T::lit(cfg.initial_step);
    let decay = T::lit(cfg.step_decay);
    let tol = T::lit(cfg.convergence_tol);
    let mut previous = objective_generic(system, constraints, cfg, mu)?.total;
    for _ in 0..cfg.iterations_per_level {
        // retry with a decayed step while the objective goes up
        let start = system.clone();
        let mut attempt = 0;
        let (mean_step, objective) = loop {
            let mean_step = iterate(system, constraints, cfg, step, mu)?;
            let objective = objective_generic(system, constraints, cfg, mu)?;
            if objective.total <= previous || attempt == MAX_BACKTRACKS {
                break (mean_step, objective);
            }
            attempt += 1;
            step *= decay;
            *system = start.clone();
        };
        previous = objective.total;
        log.records.push(IterationRecord {
            iteration: log.records.len(),
            particles: system.particle_count(),
            objective,
            mean_step,
            violations: count_violations(system, constraints, cfg.violation_tolerance),
        });
        if mean_step < tol {
            return Ok(true);
        }
    }
    Ok(false)
}
