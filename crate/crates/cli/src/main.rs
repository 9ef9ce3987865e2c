use anyhow::Result;
use clap::{Parser, Subcommand};
use roiform_cli::commands::{self, GenOptions};
use roiform_cli::project::Project;
use roiform_cli::server::{self, AppState};
use std::path::PathBuf;
use std::sync::Arc;

#[derive(Parser)]
#[command(name = "roiform", version, about = "Constrained particle-based shape correspondence")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the synthetic ellipsoid cohort as a ready-to-run project.
    GenEllipsoids {
        /// Semi-axis values; the cohort is their full 3-fold product.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long, default_value_t = 3)]
        subdiv: u32,
        /// Sine boundary amplitude as a fraction of the c axis.
        #[arg(long, default_value_t = roiform_core::datagen::DEFAULT_SINE_AMPLITUDE)]
        amplitude: f64,
        #[arg(long, default_value_t = 64)]
        particles: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Optimize particles for every shape in a project.
    Optimize {
        #[arg(long)]
        project: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Shape statistics over a directory of particle files.
    Stats {
        #[arg(long)]
        particles: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check particle files against constraints; exits 1 on violations.
    Check {
        #[arg(long)]
        project: PathBuf,
        /// Relative to each shape's bounding-box diagonal.
        #[arg(long, default_value_t = 1e-3)]
        tolerance: f64,
    },
    /// Time the penalty pass for several particle counts.
    BenchScaling {
        #[arg(long = "j", value_delimiter = ',', default_values_t = [64usize, 128, 256, 512])]
        counts: Vec<usize>,
        #[arg(long, default_value_t = 5)]
        repetitions: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the constraint editing API.
    Serve {
        #[arg(long)]
        project: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Static files for the UI, served at `/`.
        #[arg(long)]
        ui_dir: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::GenEllipsoids {
            values,
            subdiv,
            amplitude,
            particles,
            out,
        } => {
            let path = commands::gen_ellipsoids(&GenOptions {
                values,
                subdiv,
                amplitude,
                particles,
                out,
            })?;
            println!("{}", path.display());
        }
        Command::Optimize { project, seed } => {
            let s = commands::optimize_project(&project, seed)?;
            println!(
                "converged: {}, iterations: {}, violations: {}",
                s.converged, s.iterations, s.violations.count
            );
        }
        Command::Stats { particles, out } => {
            let model = commands::stats(&particles, &out)?;
            let c = model.compactness();
            println!("{} shapes, {} modes", model.shape_count(), model.eigenvalues().len());
            for (k, v) in c.iter().take(commands::STATS_MODES).enumerate() {
                println!("mode {}: cumulative {:.4}", k + 1, v);
            }
        }
        Command::Check { project, tolerance } => {
            let s = commands::check_project(&project, tolerance)?;
            println!("{}", serde_json::to_string_pretty(&s)?);
            if s.count > 0 {
                return Ok(1);
            }
        }
        Command::BenchScaling {
            counts,
            repetitions,
            out,
        } => {
            let report = commands::bench_scaling(&counts, repetitions, out.as_deref())?;
            if out.is_none() {
                print!("{}", report.to_csv());
            }
            println!("{}", report.summary());
        }
        Command::Serve { project, port, ui_dir } => {
            let state = Arc::new(AppState::new(Project::load(&project)?)?);
            tokio::runtime::Runtime::new()?.block_on(server::serve(state, port, ui_dir))?;
        }
    }
    Ok(0)
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            roiform_cli::exit_code(&e)
        }
    };
    std::process::exit(code);
}
