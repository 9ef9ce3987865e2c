//! Particle files (one `x y z` line per particle) and convergence logs.

use super::ConvergenceLog;
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::Real;
use std::fmt::Write as _;
use std::path::Path;

pub const PARTICLE_EXTENSION: &str = "particles";
pub const LOG_HEADER: &str = "iter,F,sampling,correspondence,penalty,mean_step,violations";

pub fn format_particles<T: Real>(particles: &[Point<T>]) -> String {
    let mut out = String::with_capacity(particles.len() * 72);
    for p in particles {
        let _ = writeln!(out, "{:.16e} {:.16e} {:.16e}", p.x.as_f64(), p.y.as_f64(), p.z.as_f64());
    }
    out
}

pub fn parse_particles<T: Real>(text: &str) -> Result<Vec<Point<T>>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|e| Error::parse(n + 1, e.to_string())))
            .collect::<Result<_>>()?;
        if vals.len() != 3 {
            return Err(Error::parse(
                n + 1,
                format!("expected 3 coordinates, found {}", vals.len()),
            ));
        }
        out.push(Point::new(T::lit(vals[0]), T::lit(vals[1]), T::lit(vals[2])));
    }
    Ok(out)
}

pub fn save_particles<T: Real>(path: &Path, particles: &[Point<T>]) -> Result<()> {
    std::fs::write(path, format_particles(particles)).map_err(|e| Error::io(path, e))
}

pub fn load_particles<T: Real>(path: &Path) -> Result<Vec<Point<T>>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_particles(&text)
}

impl<T: Real> ConvergenceLog<T> {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(LOG_HEADER);
        out.push('\n');
        for r in &self.records {
            let o = &r.objective;
            let _ = writeln!(
                out,
                "{},{:e},{:e},{:e},{:e},{:e},{}",
                r.iteration,
                o.total.as_f64(),
                o.sampling.as_f64(),
                o.correspondence.as_f64(),
                o.penalty.as_f64(),
                r.mean_step.as_f64(),
                r.violations
            );
        }
        out
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}
