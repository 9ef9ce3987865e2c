//! Command implementations, independent of argument parsing.

use crate::project::{write_atomic, Project, ProjectFile, ShapeEntry};
use crate::CliError;
use anyhow::{Context, Result};
use roiform_core::bench::{run_scaling, ScalingReport};
use roiform_core::constraints::{ConstraintDocument, FfcDocument};
use roiform_core::datagen::{gen_ellipsoid_cohort, sine_boundary_mask};
use roiform_core::psm::io::{format_particles, load_particles, PARTICLE_EXTENSION};
use roiform_core::stats::ShapeModel;
use roiform_core::{
    check_violations, optimize, save_mesh, Constraint, OptimizerConfig, ParticleSystem, Tolerance, ViolationReport,
};
use serde::Serialize;
use std::path::{Path, PathBuf};

pub const PROJECT_FILE: &str = "project.json";

#[derive(Debug, Clone)]
pub struct GenOptions {
    pub values: Vec<f64>,
    pub subdiv: u32,
    pub amplitude: f64,
    pub particles: usize,
    pub out: PathBuf,
}

/// Optimizer settings written into generated ellipsoid projects.
pub fn ellipsoid_optimizer_config(particles: usize) -> OptimizerConfig {
    OptimizerConfig {
        target_particles: particles,
        correspondence_weight: 5.0,
        ..OptimizerConfig::default()
    }
}

/// Writes the ellipsoid cohort as PLY meshes, one face-mask constraint file
/// per shape and a ready-to-run project file. Returns the project path.
pub fn gen_ellipsoids(opts: &GenOptions) -> Result<PathBuf> {
    if opts.values.is_empty() {
        return Err(CliError::Usage("at least one axis value is required".into()).into());
    }
    if opts.values.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(CliError::Usage("axis values must be positive".into()).into());
    }
    let cohort = gen_ellipsoid_cohort::<f64>(&opts.values, opts.subdiv);
    let mut shapes = Vec::with_capacity(cohort.len());
    for shape in &cohort {
        let name = shape.name();
        let mesh_rel = PathBuf::from(format!("meshes/{name}.ply"));
        let cons_rel = PathBuf::from(format!("constraints/{name}.json"));
        let mesh_path = opts.out.join(&mesh_rel);
        std::fs::create_dir_all(mesh_path.parent().unwrap())?;
        save_mesh(&shape.mesh, &mesh_path, None)?;
        let mask = sine_boundary_mask(&shape.mesh, shape.axes, opts.amplitude)
            .with_context(|| format!("boundary mask for {name}"))?;
        let doc = ConstraintDocument {
            ffcs: vec![FfcDocument::Mask {
                face_mask: mask.to_bits(),
            }],
            ..ConstraintDocument::default()
        };
        write_atomic(&opts.out.join(&cons_rel), serde_json::to_string(&doc)?.as_bytes())?;
        shapes.push(ShapeEntry {
            particles: Some(PathBuf::from(format!("output/{name}.{PARTICLE_EXTENSION}"))),
            name,
            mesh: mesh_rel,
            constraints: Some(cons_rel),
        });
    }
    let file = ProjectFile {
        shapes,
        optimizer: ellipsoid_optimizer_config(opts.particles),
        output_dir: PathBuf::from("output"),
    };
    let project = Project::new(opts.out.clone(), file)?;
    let path = opts.out.join(PROJECT_FILE);
    project.save(&path)?;
    Ok(path)
}

#[derive(Debug, Clone, Serialize)]
pub struct ViolationEntry {
    pub particle: usize,
    pub constraint: usize,
    pub g: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ShapeViolations {
    pub name: String,
    pub violations: Vec<ViolationEntry>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ViolationSummary {
    pub tolerance: f64,
    pub count: usize,
    pub max_g: Option<f64>,
    pub shapes: Vec<ShapeViolations>,
}

impl ViolationSummary {
    fn new(project: &Project, report: &ViolationReport<f64>, tolerance: f64) -> Self {
        Self {
            tolerance,
            count: report.count,
            max_g: report.max_g,
            shapes: report
                .shapes
                .iter()
                .enumerate()
                .map(|(i, v)| ShapeViolations {
                    name: project.shape(i).name.clone(),
                    violations: v
                        .iter()
                        .map(|x| ViolationEntry {
                            particle: x.particle,
                            constraint: x.constraint,
                            g: x.g,
                        })
                        .collect(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimizeSummary {
    pub converged: bool,
    pub iterations: usize,
    pub violations: ViolationSummary,
    pub particle_files: Vec<PathBuf>,
}

fn load_constraint_sets(
    project: &Project,
    meshes: &[std::sync::Arc<roiform_core::Mesh>],
) -> Result<Vec<Vec<Constraint<f64>>>> {
    meshes
        .iter()
        .enumerate()
        .map(|(i, m)| project.load_constraints(i, m))
        .collect()
}

/// Runs the optimizer on a project and writes one particle file per shape,
/// `convergence.csv` and `violations.json` into the output directory.
pub fn optimize_project(project_path: &Path, seed: Option<u64>) -> Result<OptimizeSummary> {
    let project = Project::load(project_path)?;
    if project.shape_count() == 0 {
        return Err(CliError::Usage("project lists no shapes".into()).into());
    }
    let meshes = project.load_meshes()?;
    let constraints = load_constraint_sets(&project, &meshes)?;
    let mut cfg = project.file.optimizer.clone();
    if let Some(s) = seed {
        cfg.seed = s;
    }
    log::info!(
        "optimizing {} shapes to {} particles; sigma = {} x mean distance to {} nearest",
        meshes.len(),
        cfg.target_particles,
        cfg.sigma_multiplier,
        cfg.sigma_neighbors
    );
    let result = optimize(meshes, &constraints, &cfg)?;
    let out = project.output_dir();
    let mut particle_files = Vec::new();
    for i in 0..project.shape_count() {
        let path = project.particle_path(i);
        write_atomic(&path, format_particles(result.system.particles(i)).as_bytes())?;
        particle_files.push(path);
    }
    write_atomic(&out.join("convergence.csv"), result.log.to_csv().as_bytes())?;
    let violations = ViolationSummary::new(&project, &result.violations, cfg.violation_tolerance);
    write_atomic(
        &out.join("violations.json"),
        serde_json::to_string_pretty(&violations)?.as_bytes(),
    )?;
    Ok(OptimizeSummary {
        converged: result.converged,
        iterations: result.log.records.len(),
        violations,
        particle_files,
    })
}

/// Re-checks a project's particle files against its constraints.
/// `tolerance` is relative to each shape's bounding-box diagonal.
pub fn check_project(project_path: &Path, tolerance: f64) -> Result<ViolationSummary> {
    let project = Project::load(project_path)?;
    let meshes = project.load_meshes()?;
    let constraints = load_constraint_sets(&project, &meshes)?;
    let particles = (0..project.shape_count())
        .map(|i| {
            let path = project.particle_path(i);
            if !path.is_file() {
                return Err(CliError::MissingInput(format!("particles not found: {}", path.display())).into());
            }
            Ok(load_particles(&path)?)
        })
        .collect::<Result<Vec<_>>>()?;
    let system = ParticleSystem::new(meshes, particles)?;
    let report = check_violations(&system, &constraints, Tolerance::Relative(tolerance))?;
    Ok(ViolationSummary::new(&project, &report, tolerance))
}

/// Particle files in `dir`, sorted by file name.
pub fn particle_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries =
        std::fs::read_dir(dir).map_err(|e| CliError::MissingInput(format!("cannot read {}: {e}", dir.display())))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == PARTICLE_EXTENSION))
        .collect();
    files.sort();
    Ok(files)
}

pub const STATS_MODES: usize = 3;
pub const STATS_SPREAD: f64 = 2.0;

/// PCA over every particle file in `dir`. Writes `model.json`,
/// `compactness.csv`, `mean.particles` and `mode<k>_minus.particles` /
/// `mode<k>_plus.particles` at ±2 standard deviations for the leading modes.
pub fn stats(dir: &Path, out: &Path) -> Result<ShapeModel<f64>> {
    let files = particle_files(dir)?;
    let shapes = files
        .iter()
        .map(|f| load_particles::<f64>(f).map(|p| roiform_core::stats::shape_vector(&p)))
        .collect::<roiform_core::Result<Vec<_>>>()?;
    let model = ShapeModel::from_vectors(&shapes)?;
    write_atomic(
        &out.join("model.json"),
        serde_json::to_string(&model.to_document())?.as_bytes(),
    )?;
    let mut csv = String::from("mode,eigenvalue,cumulative\n");
    for (k, (l, c)) in model.eigenvalues().iter().zip(model.compactness()).enumerate() {
        csv.push_str(&format!("{},{:e},{:.17}\n", k + 1, l, c));
    }
    write_atomic(&out.join("compactness.csv"), csv.as_bytes())?;
    write_atomic(
        &out.join("mean.particles"),
        format_particles(&model.mean_particles()).as_bytes(),
    )?;
    for k in 0..STATS_MODES.min(model.eigenvalues().len()) {
        for (tag, t) in [("minus", -STATS_SPREAD), ("plus", STATS_SPREAD)] {
            let shape = model.mode_shape(k, t)?;
            let path = out.join(format!("mode{}_{tag}.{PARTICLE_EXTENSION}", k + 1));
            write_atomic(&path, format_particles(&shape).as_bytes())?;
        }
    }
    Ok(model)
}

/// Penalty-pass timings; writes `scaling.csv` into `out` when given.
pub fn bench_scaling(particle_counts: &[usize], repetitions: usize, out: Option<&Path>) -> Result<ScalingReport> {
    if repetitions == 0 {
        return Err(CliError::Usage("repetitions must be at least 1".into()).into());
    }
    if particle_counts.is_empty() || particle_counts.contains(&0) {
        return Err(CliError::Usage("particle counts must be positive".into()).into());
    }
    let report = run_scaling(particle_counts, repetitions, 0)?;
    if let Some(dir) = out {
        write_atomic(&dir.join("scaling.csv"), report.to_csv().as_bytes())?;
        write_atomic(&dir.join("scaling.txt"), format!("{}\n", report.summary()).as_bytes())?;
    }
    Ok(report)
}
