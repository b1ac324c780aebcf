//! Image-error scoring, regularization sweeps and scheme comparisons.
//!
//! A [`Study`] fixes one beam layout, a sequence of phantom frames and any
//! number of meshes. Every reconstruction job is independent, so sweeps run
//! through [`Exec`] and are reduced in job-index order; results do not depend
//! on scheduling.

use serde::{Deserialize, Serialize};

use crate::error::{CstError, Result};
use crate::exec::Exec;
use crate::geometry::BeamLayout;
use crate::meshing::{adjacency, Mask, Mesh, Scheme};
use crate::phantom::{add_noise, downsample_truth, forward_project, Field, GasState, Measurement};
use crate::sensing::{assemble_sensing_matrix, SensingMatrix};
use crate::solvers::{difference_operator, solve, DifferenceOperator, SolverKind, SolverOptions};

/// Mean relative absolute error `|x_rec - x_true| / x_true` over `mask`.
pub fn image_error(x_rec: &[f64], x_true: &[f64], mask: &[usize]) -> Result<f64> {
    if x_rec.len() != x_true.len() {
        return Err(CstError::Dimension(format!(
            "{} reconstructed values against {} true values",
            x_rec.len(),
            x_true.len()
        )));
    }
    if mask.is_empty() {
        return Err(CstError::param("image error over an empty mask"));
    }
    let mut sum = 0.0;
    for &j in mask {
        let t = *x_true.get(j).ok_or_else(|| CstError::Dimension(format!("mask index {j} out of range")))?;
        if !(t > 0.0) {
            return Err(CstError::param(format!("true value at pixel {j} is not positive ({t})")));
        }
        sum += (x_rec[j] - t).abs() / t;
    }
    Ok(sum / mask.len() as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ImageErrorReport {
    pub ie_roi: f64,
    pub ie_ros: f64,
    pub per_pixel_relerr: Vec<f64>,
}

impl ImageErrorReport {
    pub fn get(&self, mask: Mask) -> f64 {
        match mask {
            Mask::Roi => self.ie_roi,
            Mask::Ros => self.ie_ros,
        }
    }
}

/// Image error over both masks of `mesh`. With no RoI pixels `ie_roi` is NaN.
pub fn image_error_report(x_rec: &[f64], x_true: &[f64], mesh: &Mesh) -> Result<ImageErrorReport> {
    if x_rec.len() != mesh.len() || x_true.len() != mesh.len() {
        return Err(CstError::Dimension(format!(
            "{}/{} values for a {}-pixel mesh",
            x_rec.len(),
            x_true.len(),
            mesh.len()
        )));
    }
    let ie_ros = image_error(x_rec, x_true, &mesh.mask(Mask::Ros))?;
    let ie_roi = if mesh.n_in > 0 { image_error(x_rec, x_true, &mesh.mask(Mask::Roi))? } else { f64::NAN };
    let per_pixel_relerr = x_rec.iter().zip(x_true).map(|(r, t)| (r - t).abs() / t).collect();
    Ok(ImageErrorReport { ie_roi, ie_ros, per_pixel_relerr })
}

/// `n` values from `lo` to `hi`, equispaced in log scale; both endpoints are
/// returned exactly.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0) || !(hi > lo) || !hi.is_finite() {
        return Err(CstError::param(format!("log grid needs 0 < lo < hi, got {lo} and {hi}")));
    }
    if n < 2 {
        return Err(CstError::param(format!("log grid needs at least 2 steps, got {n}")));
    }
    let (a, b) = (lo.ln(), hi.ln());
    let mut g: Vec<f64> = (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect();
    g[0] = lo;
    g[n - 1] = hi;
    Ok(g)
}

/// Noisy copy of `b`; an infinite SNR means noise-free.
pub fn measure(b: &[f64], snr_db: f64, seed: u64) -> Result<Measurement> {
    let clean = Measurement::noise_free(b.to_vec());
    if snr_db == f64::INFINITY {
        Ok(clean)
    } else {
        add_noise(&clean, snr_db, seed)
    }
}

/// One mesh of a study with everything needed to reconstruct on it.
#[derive(Clone, Debug)]
pub struct SchemeProblem {
    pub name: String,
    pub mesh: Mesh,
    pub matrix: SensingMatrix,
    pub diff: DifferenceOperator,
    /// Per-frame truth on this mesh.
    pub truth: Vec<Vec<f64>>,
}

/// A layout, a frame sequence and the meshes to compare.
#[derive(Clone, Debug)]
pub struct Study {
    pub layout: BeamLayout,
    pub gas: GasState,
    /// Noise-free absorbances per frame.
    pub b_clean: Vec<Vec<f64>>,
    pub schemes: Vec<SchemeProblem>,
}

impl Study {
    pub fn new(layout: BeamLayout, frames: &[Field], meshes: Vec<(String, Mesh)>, exec: Exec) -> Result<Study> {
        let first = frames.first().ok_or_else(|| CstError::param("study needs at least one frame"))?;
        let gas = first.gas;
        if frames.iter().any(|f| f.gas != gas) {
            return Err(CstError::param("frames of one study must share the gas state"));
        }
        let b_clean = frames.iter().map(|f| forward_project(f, &layout, exec).b).collect();
        let schemes = meshes
            .into_iter()
            .map(|(name, mesh)| {
                let matrix = assemble_sensing_matrix(&layout, &mesh, exec);
                let diff = difference_operator(&adjacency(&mesh), mesh.len())?;
                let truth = frames.iter().map(|f| downsample_truth(f, &mesh)).collect::<Result<_>>()?;
                Ok(SchemeProblem { name, mesh, matrix, diff, truth })
            })
            .collect::<Result<_>>()?;
        Ok(Study { layout, gas, b_clean, schemes })
    }

    pub fn n_frames(&self) -> usize {
        self.b_clean.len()
    }

    pub fn scheme(&self, name: &str) -> Option<&SchemeProblem> {
        self.schemes.iter().find(|s| s.name == name)
    }
}

/// Noise realization shared by every grid value: seed `base_seed + rep`.
fn noisy_measurements(study: &Study, snr_db: f64, n_reps: usize, base_seed: u64) -> Result<Vec<Vec<Vec<f64>>>> {
    (0..n_reps)
        .map(|rep| {
            study.b_clean.iter().map(|b| measure(b, snr_db, base_seed.wrapping_add(rep as u64)).map(|m| m.b)).collect()
        })
        .collect()
}

/// Mean and sample standard deviation of the finite entries, with the count
/// of non-finite ones.
fn mean_std(values: &[f64]) -> (f64, f64, usize) {
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    let failures = values.len() - finite.len();
    if finite.is_empty() {
        return (f64::NAN, f64::NAN, failures);
    }
    let n = finite.len() as f64;
    let mean = finite.iter().sum::<f64>() / n;
    let std = if finite.len() > 1 {
        (finite.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, std, failures)
}

/// Per-rep image errors (frame-averaged) for RoI and RoS at one parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct CellStats {
    pub per_rep_roi: Vec<f64>,
    pub per_rep_ros: Vec<f64>,
    /// Reconstructions that returned an error.
    pub failures: usize,
}

impl CellStats {
    pub fn per_rep(&self, mask: Mask) -> &[f64] {
        match mask {
            Mask::Roi => &self.per_rep_roi,
            Mask::Ros => &self.per_rep_ros,
        }
    }

    pub fn mean(&self, mask: Mask) -> f64 {
        mean_std(self.per_rep(mask)).0
    }

    pub fn std(&self, mask: Mask) -> f64 {
        mean_std(self.per_rep(mask)).1
    }
}

/// Reconstructs every (value, rep, frame) job and reduces in index order.
fn run_cells(
    problem: &SchemeProblem,
    solver: SolverKind,
    values: &[f64],
    noisy: &[Vec<Vec<f64>>],
    opts: &SolverOptions,
    exec: Exec,
) -> Vec<CellStats> {
    let n_reps = noisy.len();
    let n_frames = noisy.first().map_or(0, Vec::len);
    let per_value = n_reps * n_frames;
    let jobs = exec.map_indexed(values.len() * per_value, |job| {
        let v = job / per_value;
        let rep = (job % per_value) / n_frames;
        let frame = job % n_frames;
        solve(solver, &problem.matrix, &noisy[rep][frame], values[v], &problem.diff, opts)
            .and_then(|r| image_error_report(&r.x, &problem.truth[frame], &problem.mesh))
            .map(|ie| (ie.ie_roi, ie.ie_ros))
            .unwrap_or((f64::NAN, f64::NAN))
    });
    (0..values.len())
        .map(|v| {
            let mut per_rep_roi = Vec::with_capacity(n_reps);
            let mut per_rep_ros = Vec::with_capacity(n_reps);
            let mut failures = 0;
            for rep in 0..n_reps {
                let cells = &jobs[v * per_value + rep * n_frames..v * per_value + (rep + 1) * n_frames];
                failures += cells.iter().filter(|c| !c.1.is_finite()).count();
                // equal frame weights
                per_rep_roi.push(cells.iter().map(|c| c.0).sum::<f64>() / n_frames as f64);
                per_rep_ros.push(cells.iter().map(|c| c.1).sum::<f64>() / n_frames as f64);
            }
            CellStats { per_rep_roi, per_rep_ros, failures }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub scheme: String,
    pub solver: SolverKind,
    pub snr_db: f64,
    pub grid: Vec<f64>,
    /// Mask the optimum is selected on.
    pub selection: Mask,
    /// Mean image error per grid value on the selection mask.
    pub mean_ie: Vec<f64>,
    pub std_ie: Vec<f64>,
    /// Full per-value statistics for both masks.
    pub cells: Vec<CellStats>,
    pub optimal_value: f64,
    pub optimal_ie: f64,
}

impl SweepResult {
    pub fn optimal_index(&self) -> Option<usize> {
        self.grid.iter().position(|&g| g == self.optimal_value)
    }

    pub fn failures(&self) -> usize {
        self.cells.iter().map(|c| c.failures).sum()
    }
}

/// Settings shared by sweeps and comparisons.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Protocol {
    pub n_reps: usize,
    pub base_seed: u64,
    pub selection: Mask,
}

/// Mean image error over frames and reps for every grid value; the optimum
/// is the smallest finite mean on `protocol.selection`.
pub fn regularization_sweep(
    study: &Study,
    scheme: &SchemeProblem,
    solver: SolverKind,
    grid: &[f64],
    snr_db: f64,
    protocol: &Protocol,
    opts: &SolverOptions,
    exec: Exec,
) -> Result<SweepResult> {
    if grid.is_empty() || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(CstError::param("sweep grid must be non-empty and strictly increasing"));
    }
    if protocol.n_reps == 0 {
        return Err(CstError::param("sweep needs at least one repetition"));
    }
    let noisy = noisy_measurements(study, snr_db, protocol.n_reps, protocol.base_seed)?;
    let opts = SolverOptions { gas: study.gas, ..*opts };
    let cells = run_cells(scheme, solver, grid, &noisy, &opts, exec);
    let mean_ie: Vec<f64> = cells.iter().map(|c| c.mean(protocol.selection)).collect();
    let std_ie: Vec<f64> = cells.iter().map(|c| c.std(protocol.selection)).collect();
    let (optimal_value, optimal_ie) = grid
        .iter()
        .zip(&mean_ie)
        .filter(|(_, m)| m.is_finite())
        .fold((f64::NAN, f64::INFINITY), |best, (&g, &m)| if m < best.1 { (g, m) } else { best });
    Ok(SweepResult {
        scheme: scheme.name.clone(),
        solver,
        snr_db,
        grid: grid.to_vec(),
        selection: protocol.selection,
        mean_ie,
        std_ie,
        cells,
        optimal_value,
        optimal_ie: if optimal_value.is_nan() { f64::NAN } else { optimal_ie },
    })
}

/// Image error of one fixed parameter at one SNR.
pub fn evaluate(
    study: &Study,
    scheme: &SchemeProblem,
    solver: SolverKind,
    value: f64,
    snr_db: f64,
    protocol: &Protocol,
    opts: &SolverOptions,
    exec: Exec,
) -> Result<CellStats> {
    let noisy = noisy_measurements(study, snr_db, protocol.n_reps, protocol.base_seed)?;
    let opts = SolverOptions { gas: study.gas, ..*opts };
    Ok(run_cells(scheme, solver, &[value], &noisy, &opts, exec).remove(0))
}

/// One solver and its sweep grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverPlan {
    pub solver: SolverKind,
    pub grid: Vec<f64>,
    pub opts: SolverOptions,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonPlan {
    pub solvers: Vec<SolverPlan>,
    /// SNR the optima are selected at.
    pub sweep_snr_db: f64,
    pub snr_list: Vec<f64>,
    pub protocol: Protocol,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonRow {
    pub scheme: String,
    pub mesh_scheme: Scheme,
    pub solver: SolverKind,
    pub snr_db: f64,
    pub parameter: f64,
    pub ie_roi_mean: f64,
    pub ie_roi_std: f64,
    pub ie_ros_mean: f64,
    pub ie_ros_std: f64,
    pub failures: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Improvement {
    pub solver: SolverKind,
    pub snr_db: f64,
    pub roi_percent: f64,
    pub ros_percent: f64,
}

/// `(uniform - hybrid) / uniform * 100`
pub fn improvement_percent(uniform: f64, hybrid: f64) -> f64 {
    (uniform - hybrid) / uniform * 100.0
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonReport {
    pub sweeps: Vec<SweepResult>,
    pub rows: Vec<ComparisonRow>,
    pub improvements: Vec<Improvement>,
}

impl ComparisonReport {
    pub fn row(&self, scheme: &str, solver: SolverKind, snr_db: f64) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.scheme == scheme && r.solver == solver && r.snr_db == snr_db)
    }

    pub fn failures(&self) -> usize {
        self.rows.iter().map(|r| r.failures).sum::<usize>()
            + self.sweeps.iter().map(SweepResult::failures).sum::<usize>()
    }

    /// Plain-text table.
    pub fn table(&self) -> String {
        let mut s = format!(
            "{:<12} {:<5} {:>8} {:>12} {:>10} {:>10} {:>10} {:>10}\n",
            "scheme", "solver", "snr_db", "parameter", "ie_roi", "std", "ie_ros", "std"
        );
        for r in &self.rows {
            s.push_str(&format!(
                "{:<12} {:<5} {:>8} {:>12.4e} {:>10.4} {:>10.4} {:>10.4} {:>10.4}\n",
                r.scheme,
                r.solver.name(),
                r.snr_db,
                r.parameter,
                r.ie_roi_mean,
                r.ie_roi_std,
                r.ie_ros_mean,
                r.ie_ros_std
            ));
        }
        if !self.improvements.is_empty() {
            s.push_str("\nhybrid vs uniform improvement (%)\n");
            for i in &self.improvements {
                s.push_str(&format!(
                    "{:<5} snr {:>6}: roi {:>7.2} ros {:>7.2}\n",
                    i.solver.name(),
                    i.snr_db,
                    i.roi_percent,
                    i.ros_percent
                ));
            }
        }
        s
    }
}

/// Sweeps every (scheme, solver) at `sweep_snr_db`, then evaluates each
/// scheme's optimum at every SNR of the plan. Improvements compare the first
/// uniform scheme with the first hybrid scheme.
pub fn run_comparison(study: &Study, plan: &ComparisonPlan, exec: Exec) -> Result<ComparisonReport> {
    if study.schemes.is_empty() {
        return Err(CstError::Config("comparison needs at least one mesh".into()));
    }
    let mut sweeps = Vec::new();
    let mut rows = Vec::new();
    for scheme in &study.schemes {
        for sp in &plan.solvers {
            let sweep = regularization_sweep(
                study,
                scheme,
                sp.solver,
                &sp.grid,
                plan.sweep_snr_db,
                &plan.protocol,
                &sp.opts,
                exec,
            )?;
            let value = sweep.optimal_value;
            for &snr in &plan.snr_list {
                let stats = if value.is_nan() {
                    CellStats {
                        per_rep_roi: vec![f64::NAN],
                        per_rep_ros: vec![f64::NAN],
                        failures: plan.protocol.n_reps * study.n_frames(),
                    }
                } else {
                    evaluate(study, scheme, sp.solver, value, snr, &plan.protocol, &sp.opts, exec)?
                };
                rows.push(ComparisonRow {
                    scheme: scheme.name.clone(),
                    mesh_scheme: scheme.mesh.scheme,
                    solver: sp.solver,
                    snr_db: snr,
                    parameter: value,
                    ie_roi_mean: stats.mean(Mask::Roi),
                    ie_roi_std: stats.std(Mask::Roi),
                    ie_ros_mean: stats.mean(Mask::Ros),
                    ie_ros_std: stats.std(Mask::Ros),
                    failures: stats.failures,
                });
            }
            sweeps.push(sweep);
        }
    }
    let first = |kind: Scheme| study.schemes.iter().find(|s| s.mesh.scheme == kind).map(|s| s.name.clone());
    let mut improvements = Vec::new();
    if let (Some(u), Some(h)) = (first(Scheme::Uniform), first(Scheme::Hybrid)) {
        for sp in &plan.solvers {
            for &snr in &plan.snr_list {
                let ru = rows.iter().find(|r| r.scheme == u && r.solver == sp.solver && r.snr_db == snr);
                let rh = rows.iter().find(|r| r.scheme == h && r.solver == sp.solver && r.snr_db == snr);
                if let (Some(ru), Some(rh)) = (ru, rh) {
                    improvements.push(Improvement {
                        solver: sp.solver,
                        snr_db: snr,
                        roi_percent: improvement_percent(ru.ie_roi_mean, rh.ie_roi_mean),
                        ros_percent: improvement_percent(ru.ie_ros_mean, rh.ie_ros_mean),
                    });
                }
            }
        }
    }
    Ok(ComparisonReport { sweeps, rows, improvements })
}
