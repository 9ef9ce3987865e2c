//! Project files: a list of shapes (mesh, constraint file, particle output)
//! plus optimizer settings. Relative paths resolve against the directory
//! holding the project file.

use crate::CliError;
use anyhow::{Context, Result};
use roiform_core::{Constraint, ConstraintDocument, Mesh, OptimizerConfig};
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapeEntry {
    pub name: String,
    pub mesh: PathBuf,
    /// Constraint JSON; a missing entry or file means no constraints.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constraints: Option<PathBuf>,
    /// Particle output; defaults to `<output_dir>/<name>.particles`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub particles: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectFile {
    pub shapes: Vec<ShapeEntry>,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("output")
}

#[derive(Debug, Clone)]
pub struct Project {
    root: PathBuf,
    pub file: ProjectFile,
}

impl Project {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::MissingInput(format!("cannot read project {}: {e}", path.display())))?;
        let file: ProjectFile =
            serde_json::from_str(&text).with_context(|| format!("invalid project file {}", path.display()))?;
        let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let project = Self { root, file };
        project.validate()?;
        Ok(project)
    }

    pub fn new(root: PathBuf, file: ProjectFile) -> Result<Self> {
        let project = Self { root, file };
        project.validate()?;
        Ok(project)
    }

    fn validate(&self) -> Result<()> {
        let mut names = HashSet::new();
        let mut meshes = HashSet::new();
        for s in &self.file.shapes {
            if s.name.is_empty() || !names.insert(s.name.as_str()) {
                return Err(CliError::Usage(format!("shape names must be unique and non-empty: {:?}", s.name)).into());
            }
            if !meshes.insert(self.resolve(&s.mesh)) {
                return Err(CliError::Usage(format!("mesh {} is listed twice", s.mesh.display())).into());
            }
        }
        self.file.optimizer.validate()?;
        Ok(())
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.root.join(path)
        }
    }

    pub fn shape_count(&self) -> usize {
        self.file.shapes.len()
    }

    pub fn shape(&self, id: usize) -> &ShapeEntry {
        &self.file.shapes[id]
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.file.output_dir)
    }

    pub fn mesh_path(&self, id: usize) -> PathBuf {
        self.resolve(&self.file.shapes[id].mesh)
    }

    pub fn constraint_path(&self, id: usize) -> PathBuf {
        let s = &self.file.shapes[id];
        match &s.constraints {
            Some(p) => self.resolve(p),
            None => self.resolve(Path::new(&format!("constraints/{}.json", s.name))),
        }
    }

    pub fn particle_path(&self, id: usize) -> PathBuf {
        let s = &self.file.shapes[id];
        match &s.particles {
            Some(p) => self.resolve(p),
            None => self
                .output_dir()
                .join(format!("{}.{}", s.name, roiform_core::psm::io::PARTICLE_EXTENSION)),
        }
    }

    pub fn load_mesh(&self, id: usize) -> Result<Mesh> {
        let path = self.mesh_path(id);
        if !path.is_file() {
            return Err(CliError::MissingInput(format!("mesh not found: {}", path.display())).into());
        }
        roiform_core::load_mesh(&path, None).with_context(|| format!("loading mesh {}", path.display()))
    }

    pub fn load_meshes(&self) -> Result<Vec<Arc<Mesh>>> {
        (0..self.shape_count())
            .map(|i| self.load_mesh(i).map(Arc::new))
            .collect()
    }

    /// The shape's constraint document; empty when none is configured.
    pub fn constraint_document(&self, id: usize) -> Result<ConstraintDocument> {
        let path = self.constraint_path(id);
        if self.file.shapes[id].constraints.is_none() && !path.exists() {
            return Ok(ConstraintDocument::default());
        }
        let text = std::fs::read_to_string(&path)
            .map_err(|e| CliError::MissingInput(format!("cannot read constraints {}: {e}", path.display())))?;
        ConstraintDocument::from_json(&text).with_context(|| format!("invalid constraints {}", path.display()))
    }

    pub fn load_constraints(&self, id: usize, mesh: &Arc<Mesh>) -> Result<Vec<Constraint<f64>>> {
        let doc = self.constraint_document(id)?;
        doc.resolve(mesh)
            .with_context(|| format!("constraints of shape {}", self.file.shapes[id].name))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, serde_json::to_string_pretty(&self.file)?.as_bytes())
    }
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
