use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use hybrid_cst::config::ExperimentConfig;
use hybrid_cst::experiment::{image_error_report, measure, regularization_sweep, run_comparison, Protocol, Study};
use hybrid_cst::export::{self, Provenance};
use hybrid_cst::geometry::{BeamLayout, ConvexPolygon};
use hybrid_cst::meshing::{adjacency, Mask, Mesh};
use hybrid_cst::phantom::{downsample_truth, forward_project, Field};
use hybrid_cst::sensing::{assemble_sensing_matrix, matrix_stats, nullspace_dimension, svd_spectrum, RANK_TOL};
use hybrid_cst::solvers::{difference_operator, solve, SolverKind};
use hybrid_cst::Exec;

use crate::{Cli, Command};

/// An error together with the exit status it maps to.
#[derive(Debug)]
pub struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    pub fn code(&self) -> u8 {
        self.code
    }

    pub fn message(&self) -> &str {
        &self.message
    }
}

fn config_error(e: impl std::fmt::Display) -> Failure {
    Failure { code: 1, message: e.to_string() }
}

fn runtime_error(e: impl std::fmt::Display) -> Failure {
    Failure { code: 2, message: e.to_string() }
}

type Outcome<T = ()> = Result<T, Failure>;

/// Everything a subcommand needs: the loaded config, its geometry and where
/// to write.
struct Context {
    cfg: ExperimentConfig,
    prov: Provenance,
    out: PathBuf,
    exec: Exec,
    layout: BeamLayout,
    ros: ConvexPolygon,
}

impl Context {
    fn load(cli: &Cli) -> Outcome<Context> {
        let path = cli.config.as_deref().ok_or_else(|| config_error("--config is required"))?;
        let mut cfg = ExperimentConfig::load(path).map_err(config_error)?;
        if let Some(seed) = cli.seed {
            cfg.seed = seed;
        }
        let exec = configure_jobs(cli.jobs)?;
        let (layout, ros) = cfg.layout.build().map_err(config_error)?;
        let out = cli
            .out
            .clone()
            .or_else(|| cfg.output_dir.as_ref().map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"));
        fs::create_dir_all(&out).map_err(|e| runtime_error(format!("creating {}: {e}", out.display())))?;
        let prov = Provenance::new(cfg.hash(), cfg.seed);
        Ok(Context { cfg, prov, out, exec, layout, ros })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn mesh(&self, name: &str) -> Outcome<Mesh> {
        self.cfg.mesh(name).and_then(|m| m.build(&self.ros)).map_err(config_error)
    }

    /// Named meshes, or every configured mesh.
    fn meshes(&self, only: Option<&str>) -> Outcome<Vec<(String, Mesh)>> {
        let names: Vec<String> = match only {
            Some(n) => vec![n.to_string()],
            None => self.cfg.meshes.iter().map(|m| m.name.clone()).collect(),
        };
        if names.is_empty() {
            return Err(config_error("config defines no meshes"));
        }
        names.into_iter().map(|n| self.mesh(&n).map(|m| (n, m))).collect()
    }

    fn phantom_name(&self, name: Option<&str>) -> Outcome<String> {
        match name {
            Some(n) => Ok(n.to_string()),
            None => self
                .cfg
                .phantoms
                .first()
                .map(|p| p.name.clone())
                .ok_or_else(|| config_error("config defines no phantoms")),
        }
    }

    /// One frame of a phantom; defaults to the first of its `use_frames`.
    fn frame(&self, phantom: Option<&str>, frame: Option<usize>) -> Outcome<(String, usize, Field)> {
        let name = self.phantom_name(phantom)?;
        let p = self.cfg.phantom(&name).map_err(config_error)?;
        let index = frame.or_else(|| p.frame_indices().first().copied()).unwrap_or(0);
        let field = p.sequence().field(&self.ros, p.cell_size, index, self.cfg.gas).map_err(config_error)?;
        Ok((name, index, field))
    }

    /// Frames of the study's phantoms, or of every phantom without a study.
    fn study_frames(&self) -> Outcome<Vec<Field>> {
        let names: Vec<String> = match &self.cfg.study {
            Some(s) => s.phantoms.clone(),
            None => self.cfg.phantoms.iter().map(|p| p.name.clone()).collect(),
        };
        if names.is_empty() {
            return Err(config_error("config defines no phantoms"));
        }
        let mut frames = Vec::new();
        for n in names {
            frames.extend(self.cfg.frames(&n, &self.ros).map_err(config_error)?);
        }
        Ok(frames)
    }

    fn summary(&self, name: &str, body: &str) -> Outcome {
        print!("{body}");
        if !body.ends_with('\n') {
            println!();
        }
        write(export::write_text(&self.path(name), &self.prov, body))
    }
}

fn write(r: hybrid_cst::Result<()>) -> Outcome {
    r.map_err(runtime_error)
}

fn configure_jobs(jobs: Option<usize>) -> Outcome<Exec> {
    match jobs {
        None => Ok(Exec::Parallel),
        Some(0) => Err(config_error("--jobs must be at least 1")),
        Some(1) => Ok(Exec::Sequential),
        #[cfg(feature = "parallel")]
        Some(n) => {
            rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(runtime_error)?;
            Ok(Exec::Parallel)
        }
        #[cfg(not(feature = "parallel"))]
        Some(_) => Ok(Exec::Sequential),
    }
}

fn snr_label(snr: Option<f64>) -> String {
    match snr {
        Some(s) if s.is_finite() => format!("{s} dB"),
        _ => "noise-free".into(),
    }
}

pub fn run(cli: Cli) -> Outcome {
    let ctx = Context::load(&cli)?;
    match &cli.command {
        Command::Mesh { mesh, size } => mesh_cmd(&ctx, mesh.as_deref(), *size),
        Command::Sense { mesh } => sense_cmd(&ctx, mesh.as_deref()),
        Command::Svd { mesh, extend } => svd_cmd(&ctx, mesh.as_deref(), *extend),
        Command::Phantom { phantom, frame } => phantom_cmd(&ctx, phantom.as_deref(), *frame),
        Command::Project { phantom, frame, snr } => project_cmd(&ctx, phantom.as_deref(), *frame, *snr),
        Command::Reconstruct { mesh, solver, phantom, frame, value, snr } => {
            reconstruct_cmd(&ctx, mesh, *solver, phantom.as_deref(), *frame, *value, *snr)
        }
        Command::Sweep { mesh, solver, snr, reps } => sweep_cmd(&ctx, mesh, *solver, *snr, *reps),
        Command::Run => run_cmd(&ctx),
    }
}

fn mesh_cmd(ctx: &Context, only: Option<&str>, size: usize) -> Outcome {
    if size == 0 {
        return Err(config_error("--size must be positive"));
    }
    write(export::write_beams_csv(&ctx.path("beams.csv"), &ctx.prov, &ctx.layout))?;
    let mut body = format!("beams: {}\nregion of sensing area: {:.6}\n", ctx.layout.len(), ctx.ros.area());
    for (name, mesh) in ctx.meshes(only)? {
        write(export::write_mesh_csv(&ctx.path(&format!("mesh_{name}.csv")), &ctx.prov, &mesh))?;
        write(export::write_pgm(&ctx.path(&format!("mesh_{name}.pgm")), &ctx.prov, &export::render_mesh(&mesh, size)))?;
        let edges = adjacency(&mesh).len();
        let _ = write!(body, "\n[{name}] {}\n{}\nadjacent pairs={edges}\n", mesh.label(), mesh.report());
    }
    ctx.summary("mesh_summary.txt", &body)
}

fn sense_cmd(ctx: &Context, only: Option<&str>) -> Outcome {
    let mut body = String::new();
    for (name, mesh) in ctx.meshes(only)? {
        let a = assemble_sensing_matrix(&ctx.layout, &mesh, ctx.exec);
        let s = matrix_stats(&a);
        write(export::write_matrix_csv(&ctx.path(&format!("matrix_{name}.csv")), &ctx.prov, &a))?;
        write(export::write_triplets_csv(&ctx.path(&format!("triplets_{name}.csv")), &ctx.prov, &a))?;
        write(export::write_stats_csv(&ctx.path(&format!("stats_{name}.csv")), &ctx.prov, &s))?;
        let _ = writeln!(
            body,
            "[{name}] {}x{} nnz={} ({:.2}%) n_in={} n_out={} zero rows={} zero cols={}",
            s.rows,
            s.cols,
            s.nnz,
            100.0 * s.nnz_fraction,
            s.n_in,
            s.n_out,
            s.rows_all_zero.len(),
            s.cols_all_zero.len()
        );
    }
    ctx.summary("sense_summary.txt", &body)
}

fn svd_cmd(ctx: &Context, only: Option<&str>, extend: bool) -> Outcome {
    let mut body = String::new();
    let suffix = if extend { "_extended" } else { "" };
    for (name, mesh) in ctx.meshes(only)? {
        let a = assemble_sensing_matrix(&ctx.layout, &mesh, ctx.exec);
        let spec = svd_spectrum(&a, extend).map_err(runtime_error)?;
        let null = nullspace_dimension(&a).map_err(runtime_error)?;
        write(export::write_spectrum_csv(&ctx.path(&format!("spectrum_{name}{suffix}.csv")), &ctx.prov, &spec))?;
        let s = &spec.singular_values;
        let _ = writeln!(
            body,
            "[{name}] N={} rank={} nullspace={} sigma_max={:.6e} sigma_min={:.6e}{}",
            s.len(),
            spec.rank(RANK_TOL),
            null,
            s.first().copied().unwrap_or(0.0),
            s.last().copied().unwrap_or(0.0),
            if spec.extension_note.is_empty() { String::new() } else { format!(" ({})", spec.extension_note) }
        );
    }
    ctx.summary(&format!("svd{suffix}_summary.txt"), &body)
}

fn phantom_cmd(ctx: &Context, phantom: Option<&str>, frame: Option<usize>) -> Outcome {
    let (name, index, field) = ctx.frame(phantom, frame)?;
    let stem = format!("phantom_{name}_f{index}");
    write(export::write_field_csv(&ctx.path(&format!("{stem}.csv")), &ctx.prov, &field))?;
    write(export::write_pgm(&ctx.path(&format!("{stem}.pgm")), &ctx.prov, &export::render_field(&field)))?;
    let max = field.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let body = format!(
        "phantom {name} frame {index}: {}x{} cells of {} (inside: {}), background {}, max {max:.6}\n",
        field.nx,
        field.ny,
        field.cell_size,
        field.cells_inside(&ctx.ros),
        field.background
    );
    ctx.summary(&format!("{stem}.txt"), &body)
}

fn project_cmd(ctx: &Context, phantom: Option<&str>, frame: Option<usize>, snr: Option<f64>) -> Outcome {
    let (name, index, field) = ctx.frame(phantom, frame)?;
    let clean = forward_project(&field, &ctx.layout, ctx.exec);
    let m = measure(&clean.b, snr.unwrap_or(f64::INFINITY), ctx.cfg.seed).map_err(config_error)?;
    let stem = format!("measurement_{name}_f{index}");
    write(export::write_measurement_csv(&ctx.path(&format!("{stem}.csv")), &ctx.prov, &m))?;
    let max = m.b.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let body = format!("projected {name} frame {index} onto {} beams ({}), max b {max:.6e}\n", m.len(), snr_label(snr));
    ctx.summary(&format!("{stem}.txt"), &body)
}

fn reconstruct_cmd(
    ctx: &Context,
    mesh_name: &str,
    kind: SolverKind,
    phantom: Option<&str>,
    frame: Option<usize>,
    value: Option<f64>,
    snr: Option<f64>,
) -> Outcome {
    let solver = ctx.cfg.solver(kind).map_err(config_error)?;
    let value = value.or(solver.value).ok_or_else(|| {
        config_error(format!("no {} given: pass --value or set `value` in the `{kind}` block", kind.parameter()))
    })?;
    let mesh = ctx.mesh(mesh_name)?;
    let (name, index, field) = ctx.frame(phantom, frame)?;

    let a = assemble_sensing_matrix(&ctx.layout, &mesh, ctx.exec);
    let f = difference_operator(&adjacency(&mesh), mesh.len()).map_err(runtime_error)?;
    let clean = forward_project(&field, &ctx.layout, ctx.exec);
    let m = measure(&clean.b, snr.unwrap_or(f64::INFINITY), ctx.cfg.seed).map_err(config_error)?;
    let r = solve(kind, &a, &m.b, value, &f, &solver.options(ctx.cfg.gas)).map_err(runtime_error)?;
    let truth = downsample_truth(&field, &mesh).map_err(runtime_error)?;
    let ie = image_error_report(&r.x, &truth, &mesh).map_err(runtime_error)?;

    let stem = format!("recon_{mesh_name}_{kind}");
    write(export::write_recon_csv(&ctx.path(&format!("{stem}.csv")), &ctx.prov, &r, Some(&truth)))?;
    write(export::write_pgm(
        &ctx.path(&format!("{stem}.pgm")),
        &ctx.prov,
        &export::render_pixel_values(&mesh, &r.x, 256),
    ))?;
    let body = format!(
        "{kind} on {mesh_name} ({}), {}={value}, phantom {name} frame {index}, {}\n\
         iterations={} converged={} residual={:.6e}\nIE roi={:.6} ros={:.6}\n",
        mesh.label(),
        kind.parameter(),
        snr_label(snr),
        r.iterations,
        r.converged,
        r.residual_norm,
        ie.ie_roi,
        ie.ie_ros
    );
    ctx.summary(&format!("{stem}.txt"), &body)
}

fn protocol(ctx: &Context, reps: Option<usize>) -> Outcome<Protocol> {
    let (n_reps, selection) = match &ctx.cfg.study {
        Some(s) => (reps.unwrap_or(s.n_reps), s.selection),
        None => (reps.unwrap_or(1), Mask::Ros),
    };
    if n_reps == 0 {
        return Err(config_error("--reps must be at least 1"));
    }
    Ok(Protocol { n_reps, base_seed: ctx.cfg.seed, selection })
}

fn sweep_cmd(ctx: &Context, mesh_name: &str, kind: SolverKind, snr: Option<f64>, reps: Option<usize>) -> Outcome {
    let solver = ctx.cfg.solver(kind).map_err(config_error)?;
    let grid = solver.grid().map_err(config_error)?;
    let snr = match (snr, &ctx.cfg.study) {
        (Some(s), _) => s,
        (None, Some(study)) => study.sweep_snr_db,
        (None, None) => return Err(config_error("no SNR given: pass --snr or add a [study] section")),
    };
    let protocol = protocol(ctx, reps)?;
    let mesh = ctx.mesh(mesh_name)?;
    let frames = ctx.study_frames()?;
    let study = Study::new(ctx.layout.clone(), &frames, vec![(mesh_name.to_string(), mesh)], ctx.exec)
        .map_err(runtime_error)?;
    let s = regularization_sweep(
        &study,
        &study.schemes[0],
        kind,
        &grid,
        snr,
        &protocol,
        &solver.options(ctx.cfg.gas),
        ctx.exec,
    )
    .map_err(runtime_error)?;
    let stem = format!("sweep_{mesh_name}_{kind}");
    write(export::write_sweep_csv(&ctx.path(&format!("{stem}.csv")), &ctx.prov, &s))?;
    let body = format!(
        "{kind} sweep on {mesh_name}: {} values, {} frames x {} reps at {}\noptimal {}={:.6e} IE({:?})={:.6} failures={}\n",
        grid.len(),
        study.n_frames(),
        protocol.n_reps,
        snr_label(Some(snr)),
        kind.parameter(),
        s.optimal_value,
        s.selection,
        s.optimal_ie,
        s.failures()
    );
    ctx.summary(&format!("{stem}.txt"), &body)
}

fn run_cmd(ctx: &Context) -> Outcome {
    let study_cfg = ctx.cfg.study().map_err(config_error)?;
    let plan = ctx.cfg.comparison_plan().map_err(config_error)?;
    let meshes = study_cfg.meshes.iter().map(|n| ctx.mesh(n).map(|m| (n.clone(), m))).collect::<Outcome<Vec<_>>>()?;
    let frames = ctx.study_frames()?;
    let study = Study::new(ctx.layout.clone(), &frames, meshes, ctx.exec).map_err(runtime_error)?;
    let report = run_comparison(&study, &plan, ctx.exec).map_err(runtime_error)?;

    let toml = ctx.cfg.to_toml_string().map_err(runtime_error)?;
    write(export::write_text(&ctx.path("config.toml"), &ctx.prov, &toml))?;
    for s in &report.sweeps {
        write(export::write_sweep_csv(&ctx.path(&format!("sweep_{}_{}.csv", s.scheme, s.solver)), &ctx.prov, s))?;
    }
    write(export::write_comparison_csv(&ctx.path("comparison.csv"), &ctx.prov, &report))?;
    if !report.improvements.is_empty() {
        write(export::write_improvement_csv(&ctx.path("improvement.csv"), &ctx.prov, &report))?;
    }
    let mut body = report.table();
    if report.failures() > 0 {
        let _ = writeln!(body, "\n{} reconstructions failed and were excluded", report.failures());
    }
    ctx.summary("summary.txt", &body)
}
