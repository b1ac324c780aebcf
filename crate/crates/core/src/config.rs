//! TOML experiment configuration.
//!
//! One file describes a whole study: the beam layout, named meshes, named
//! phantoms, solver blocks with their sweep grids, and the comparison
//! protocol. Cross-references are checked by [`ExperimentConfig::validate`].

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CstError, Result};
use crate::experiment::{log_grid, ComparisonPlan, Protocol, SolverPlan};
use crate::geometry::{build_beam_layout, build_clipped_layout, ros_polygon, BeamLayout, ConvexPolygon, Rect};
use crate::meshing::{build_hybrid_mesh, build_uniform_mesh, centered_block, Mask, Mesh, Scheme};
use crate::phantom::{Field, GasState, PhantomSequence, PlumeTrack};
use crate::solvers::{SolverKind, SolverOptions};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutConfig {
    pub n_projections: usize,
    pub beams_per_projection: usize,
    pub spacing: f64,
    /// Emitter-detector distance; the region of sensing is the slab
    /// intersection.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distance: Option<f64>,
    /// Side of a square region of sensing; beams are its chords.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub square_side: Option<f64>,
}

impl LayoutConfig {
    pub fn build(&self) -> Result<(BeamLayout, ConvexPolygon)> {
        match (self.distance, self.square_side) {
            (Some(d), None) => {
                let layout = build_beam_layout(self.n_projections, self.beams_per_projection, self.spacing, d)?;
                let ros = ros_polygon(&layout)?;
                Ok((layout, ros))
            }
            (None, Some(side)) => {
                let ros = ConvexPolygon::square(side)?;
                let layout = build_clipped_layout(&ros, self.n_projections, self.beams_per_projection, self.spacing)?;
                Ok((layout, ros))
            }
            _ => Err(CstError::Config("layout needs exactly one of `distance` and `square_side`".into())),
        }
    }
}

/// A rectangle given by its bounds or as a centred block of grid cells.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RectSpec {
    Bounds([f64; 4]),
    Block { cell: f64, cells: usize },
}

impl RectSpec {
    pub fn resolve(&self, ros: &ConvexPolygon) -> Result<Rect> {
        match *self {
            RectSpec::Bounds([x0, y0, x1, y1]) => Ok(Rect::new(x0, y0, x1, y1)),
            RectSpec::Block { cell, cells } => {
                if !(cell > 0.0) || cells == 0 {
                    return Err(CstError::Config(format!("invalid block of {cells} cells of {cell}")));
                }
                Ok(centered_block(ros, cell, cells))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    pub name: String,
    pub scheme: Scheme,
    /// Uniform pixel size.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pixel_size: Option<f64>,
    /// Hybrid coarse pixel size.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_out: Option<f64>,
    /// Hybrid fine pixel size.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_in: Option<f64>,
    /// Region of interest; the refinement block for hybrid meshes.
    pub roi: RectSpec,
}

impl MeshConfig {
    pub fn build(&self, ros: &ConvexPolygon) -> Result<Mesh> {
        let roi = self.roi.resolve(ros)?;
        match self.scheme {
            Scheme::Uniform => {
                let h = self
                    .pixel_size
                    .ok_or_else(|| CstError::Config(format!("uniform mesh `{}` needs pixel_size", self.name)))?;
                build_uniform_mesh(ros, h, roi)
            }
            Scheme::Hybrid => match (self.h_out, self.h_in) {
                (Some(o), Some(i)) => build_hybrid_mesh(ros, o, i, roi),
                _ => Err(CstError::Config(format!("hybrid mesh `{}` needs h_out and h_in", self.name))),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhantomConfig {
    pub name: String,
    pub background: f64,
    pub cell_size: f64,
    pub n_frames: usize,
    /// Frames used by sweeps and comparisons; all when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub use_frames: Option<Vec<usize>>,
    #[serde(default, rename = "plume")]
    pub plumes: Vec<PlumeTrack>,
}

impl PhantomConfig {
    pub fn sequence(&self) -> PhantomSequence {
        PhantomSequence { background: self.background, plumes: self.plumes.clone(), n_frames: self.n_frames }
    }

    pub fn frame_indices(&self) -> Vec<usize> {
        self.use_frames.clone().unwrap_or_else(|| (0..self.n_frames).collect())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub kind: SolverKind,
    pub grid: GridSpec,
    pub max_iterations: usize,
    pub relative_tolerance: f64,
    #[serde(default = "yes")]
    pub nonneg: bool,
    /// Parameter for single reconstructions outside a sweep.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
}

fn yes() -> bool {
    true
}

impl SolverConfig {
    pub fn options(&self, gas: GasState) -> SolverOptions {
        SolverOptions {
            max_iterations: self.max_iterations,
            relative_tolerance: self.relative_tolerance,
            nonneg: self.nonneg,
            gas,
        }
    }

    pub fn grid(&self) -> Result<Vec<f64>> {
        log_grid(self.grid.lo, self.grid.hi, self.grid.steps)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub meshes: Vec<String>,
    pub phantoms: Vec<String>,
    /// SNR at which regularization is swept; `inf` means noise-free.
    pub sweep_snr_db: f64,
    pub snr_db: Vec<f64>,
    pub n_reps: usize,
    #[serde(default = "ros")]
    pub selection: Mask,
}

fn ros() -> Mask {
    Mask::Ros
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
    #[serde(default)]
    pub gas: GasState,
    pub layout: LayoutConfig,
    #[serde(rename = "mesh")]
    pub meshes: Vec<MeshConfig>,
    #[serde(default, rename = "phantom")]
    pub phantoms: Vec<PhantomConfig>,
    #[serde(default, rename = "solver")]
    pub solvers: Vec<SolverConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub study: Option<StudyConfig>,
}

fn unique<'a>(what: &str, names: impl Iterator<Item = &'a str>) -> Result<()> {
    let mut seen = BTreeSet::new();
    for n in names {
        if !seen.insert(n) {
            return Err(CstError::Config(format!("duplicate {what} name `{n}`")));
        }
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| CstError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CstError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| CstError::Config(e.to_string()))
    }

    /// First 16 hex digits of the SHA-256 of the canonical serialization, so
    /// formatting and comments do not change it.
    pub fn hash(&self) -> String {
        let text = self.to_toml_string().unwrap_or_default();
        Sha256::digest(text.as_bytes()).iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    /// Structural checks that need no geometry.
    pub fn validate(&self) -> Result<()> {
        unique("mesh", self.meshes.iter().map(|m| m.name.as_str()))?;
        unique("phantom", self.phantoms.iter().map(|p| p.name.as_str()))?;
        let mut kinds = BTreeSet::new();
        for s in &self.solvers {
            if !kinds.insert(s.kind) {
                return Err(CstError::Config(format!("solver `{}` configured twice", s.kind)));
            }
            s.grid().map_err(|e| CstError::Config(format!("solver `{}` grid: {e}", s.kind)))?;
            s.options(self.gas).validate().map_err(|e| CstError::Config(format!("solver `{}`: {e}", s.kind)))?;
        }
        for p in &self.phantoms {
            if p.n_frames == 0 {
                return Err(CstError::Config(format!("phantom `{}` has no frames", p.name)));
            }
            if let Some(bad) = p.frame_indices().iter().find(|&&f| f >= p.n_frames) {
                return Err(CstError::Config(format!("phantom `{}` has no frame {bad}", p.name)));
            }
        }
        if let Some(study) = &self.study {
            for m in &study.meshes {
                self.mesh(m)?;
            }
            for p in &study.phantoms {
                self.phantom(p)?;
            }
            if study.meshes.is_empty() || study.phantoms.is_empty() {
                return Err(CstError::Config("study needs at least one mesh and one phantom".into()));
            }
            if study.n_reps == 0 {
                return Err(CstError::Config("study needs at least one repetition".into()));
            }
            if self.solvers.is_empty() {
                return Err(CstError::Config("study needs at least one solver".into()));
            }
            for &snr in study.snr_db.iter().chain([study.sweep_snr_db].iter()) {
                if snr.is_nan() || snr == f64::NEG_INFINITY {
                    return Err(CstError::Config(format!("invalid SNR {snr}")));
                }
            }
        }
        Ok(())
    }

    pub fn mesh(&self, name: &str) -> Result<&MeshConfig> {
        self.meshes.iter().find(|m| m.name == name).ok_or_else(|| CstError::Config(format!("unknown mesh `{name}`")))
    }

    pub fn phantom(&self, name: &str) -> Result<&PhantomConfig> {
        self.phantoms
            .iter()
            .find(|p| p.name == name)
            .ok_or_else(|| CstError::Config(format!("unknown phantom `{name}`")))
    }

    pub fn solver(&self, kind: SolverKind) -> Result<&SolverConfig> {
        self.solvers
            .iter()
            .find(|s| s.kind == kind)
            .ok_or_else(|| CstError::Config(format!("no `{kind}` solver block")))
    }

    pub fn study(&self) -> Result<&StudyConfig> {
        self.study.as_ref().ok_or_else(|| CstError::Config("config has no [study] section".into()))
    }

    /// Frames of one phantom at its `use_frames`.
    pub fn frames(&self, phantom: &str, ros: &ConvexPolygon) -> Result<Vec<Field>> {
        let p = self.phantom(phantom)?;
        let seq = p.sequence();
        p.frame_indices().into_iter().map(|f| seq.field(ros, p.cell_size, f, self.gas)).collect()
    }

    pub fn comparison_plan(&self) -> Result<ComparisonPlan> {
        let study = self.study()?;
        let solvers = self
            .solvers
            .iter()
            .map(|s| Ok(SolverPlan { solver: s.kind, grid: s.grid()?, opts: s.options(self.gas) }))
            .collect::<Result<_>>()?;
        Ok(ComparisonPlan {
            solvers,
            sweep_snr_db: study.sweep_snr_db,
            snr_list: study.snr_db.clone(),
            protocol: Protocol { n_reps: study.n_reps, base_seed: self.seed, selection: study.selection },
        })
    }
}

impl Default for LayoutConfig {
    fn default() -> Self {
        LayoutConfig {
            n_projections: 4,
            beams_per_projection: 8,
            spacing: 1.8,
            distance: Some(36.8),
            square_side: None,
        }
    }
}
