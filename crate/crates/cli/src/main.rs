//! `hcst`: command-line driver for hybrid-mesh chemical species tomography.
//!
//! Exit status is 0 on success, 1 for configuration or usage errors and 2 for
//! failures while computing or writing results.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hybrid_cst::solvers::SolverKind;

#[derive(Debug, Parser)]
#[command(name = "hcst", version, about = "Hybrid-mesh chemical species tomography studies")]
pub struct Cli {
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Output directory; defaults to the config's `output_dir`, then `out`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads; 1 runs everything sequentially.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build meshes and write their pixel tables and previews.
    Mesh {
        #[arg(long)]
        mesh: Option<String>,
        /// Preview size in image pixels.
        #[arg(long, default_value_t = 256)]
        size: usize,
    },
    /// Assemble sensing matrices and report their structure.
    Sense {
        #[arg(long)]
        mesh: Option<String>,
    },
    /// Singular value spectra of the sensing matrices.
    Svd {
        #[arg(long)]
        mesh: Option<String>,
        /// Repeat the last non-zero row until the matrix is square.
        #[arg(long)]
        extend: bool,
    },
    /// Render a phantom frame.
    Phantom {
        #[arg(long)]
        phantom: Option<String>,
        #[arg(long)]
        frame: Option<usize>,
    },
    /// Project a phantom frame onto the beams, optionally with noise.
    Project {
        #[arg(long)]
        phantom: Option<String>,
        #[arg(long)]
        frame: Option<usize>,
        /// Signal-to-noise ratio in dB; noise-free when absent.
        #[arg(long)]
        snr: Option<f64>,
    },
    /// Reconstruct one frame on one mesh.
    Reconstruct {
        #[arg(long)]
        mesh: String,
        #[arg(long, value_parser = parse_solver)]
        solver: SolverKind,
        #[arg(long)]
        phantom: Option<String>,
        #[arg(long)]
        frame: Option<usize>,
        /// Regularization parameter; defaults to the solver block's `value`.
        #[arg(long)]
        value: Option<f64>,
        #[arg(long)]
        snr: Option<f64>,
    },
    /// Sweep one solver's regularization on one mesh.
    Sweep {
        #[arg(long)]
        mesh: String,
        #[arg(long, value_parser = parse_solver)]
        solver: SolverKind,
        /// Defaults to the study's sweep SNR.
        #[arg(long)]
        snr: Option<f64>,
        /// Defaults to the study's repetitions.
        #[arg(long)]
        reps: Option<usize>,
    },
    /// Full hybrid-versus-uniform comparison described by `[study]`.
    Run,
}

fn parse_solver(s: &str) -> Result<SolverKind, String> {
    SolverKind::ALL
        .into_iter()
        .find(|k| k.name() == s.to_ascii_lowercase())
        .ok_or_else(|| format!("unknown solver `{s}` (expected tk, art or tv)"))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return if usage { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
