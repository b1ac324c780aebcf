//! Ground-truth concentration fields, beam projections and measurement noise.
//!
//! A [`Field`] is a fine raster of mole fractions over the bounding square of
//! the region of sensing. Integrated absorbances are exact line integrals of
//! the piecewise-constant raster of absorption density `k = P x S`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{CstError, Result};
use crate::exec::Exec;
use crate::geometry::{Beam, BeamLayout, ConvexPolygon, Point, Rect};
use crate::meshing::Mesh;

/// Uniform thermodynamic state of the gas.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GasState {
    /// K
    pub temperature: f64,
    /// atm
    pub pressure: f64,
    /// Line strength of the probed transition at `temperature`.
    pub linestrength: f64,
}

impl Default for GasState {
    fn default() -> Self {
        GasState { temperature: 294.15, pressure: 1.0, linestrength: 1.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlumeKind {
    Gaussian,
    SmoothedDisc,
}

/// An analytic plume added on top of the background.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlumeSpec {
    pub kind: PlumeKind,
    pub center: Point,
    /// Standard deviation for Gaussians, flat-top radius for discs.
    pub radius: f64,
    /// Added mole fraction at the plume centre.
    pub peak: f64,
    /// Width of the cosine taper outside a disc; defaults to `radius`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub taper: Option<f64>,
}

impl PlumeSpec {
    pub fn gaussian(center: Point, sigma: f64, peak: f64) -> Self {
        PlumeSpec { kind: PlumeKind::Gaussian, center, radius: sigma, peak, taper: None }
    }

    pub fn disc(center: Point, radius: f64, peak: f64) -> Self {
        PlumeSpec { kind: PlumeKind::SmoothedDisc, center, radius, peak, taper: None }
    }

    fn validate(&self, background: f64) -> Result<()> {
        if !(self.radius > 0.0) || !self.radius.is_finite() {
            return Err(CstError::param(format!("plume radius must be positive, got {}", self.radius)));
        }
        if !(self.peak >= background) {
            return Err(CstError::param(format!("plume peak {} is below the background {background}", self.peak)));
        }
        if let Some(w) = self.taper {
            if !(w > 0.0) {
                return Err(CstError::param(format!("disc taper must be positive, got {w}")));
            }
        }
        Ok(())
    }

    /// Contribution at `p`.
    pub fn value_at(&self, p: Point) -> f64 {
        let d = p.distance(self.center);
        match self.kind {
            PlumeKind::Gaussian => self.peak * (-d * d / (2.0 * self.radius * self.radius)).exp(),
            PlumeKind::SmoothedDisc => {
                let w = self.taper.unwrap_or(self.radius);
                if d <= self.radius {
                    self.peak
                } else if d < self.radius + w {
                    0.5 * self.peak * (1.0 + (std::f64::consts::PI * (d - self.radius) / w).cos())
                } else {
                    0.0
                }
            }
        }
    }
}

/// A plume whose radius and amplitude grow linearly over a frame sequence,
/// from `growth` times the final values at the first frame to `spec` at the
/// last.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlumeTrack {
    #[serde(flatten)]
    pub spec: PlumeSpec,
    #[serde(default = "one")]
    pub growth: f64,
}

fn one() -> f64 {
    1.0
}

impl PlumeTrack {
    pub fn at(&self, frame: usize, n_frames: usize) -> PlumeSpec {
        let t = if n_frames <= 1 { 1.0 } else { frame as f64 / (n_frames - 1) as f64 };
        let s = self.growth + (1.0 - self.growth) * t;
        PlumeSpec { radius: self.spec.radius * s, peak: self.spec.peak * s, ..self.spec }
    }
}

/// Fine raster of mole fractions.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    pub nx: usize,
    pub ny: usize,
    pub cell_size: f64,
    /// Lower-left corner of cell (0, 0).
    pub origin: Point,
    /// Row-major, `values[iy * nx + ix]`.
    pub values: Vec<f64>,
    pub background: f64,
    pub gas: GasState,
}

impl Field {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn cell_rect(&self, ix: usize, iy: usize) -> Rect {
        let x0 = self.origin.x + ix as f64 * self.cell_size;
        let y0 = self.origin.y + iy as f64 * self.cell_size;
        Rect::new(x0, y0, x0 + self.cell_size, y0 + self.cell_size)
    }

    pub fn cell_center(&self, ix: usize, iy: usize) -> Point {
        Point::new(
            self.origin.x + (ix as f64 + 0.5) * self.cell_size,
            self.origin.y + (iy as f64 + 0.5) * self.cell_size,
        )
    }

    pub fn extent(&self) -> Rect {
        Rect::new(
            self.origin.x,
            self.origin.y,
            self.origin.x + self.nx as f64 * self.cell_size,
            self.origin.y + self.ny as f64 * self.cell_size,
        )
    }

    /// Number of cells whose centre lies in `ros`.
    pub fn cells_inside(&self, ros: &ConvexPolygon) -> usize {
        (0..self.ny)
            .flat_map(|iy| (0..self.nx).map(move |ix| (ix, iy)))
            .filter(|&(ix, iy)| ros.contains(self.cell_center(ix, iy), 0.0))
            .count()
    }

    /// Same geometry, values replaced.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Field> {
        if values.len() != self.values.len() {
            return Err(CstError::Dimension(format!("{} values for a {}-cell field", values.len(), self.values.len())));
        }
        Ok(Field { values, ..self.clone() })
    }
}

/// Raster over the bounding square of `ros` with cells of `cell_size`; each
/// cell holds `background` plus every plume's contribution at its centre,
/// clamped to `[0, 1]`.
pub fn build_field(
    ros: &ConvexPolygon,
    cell_size: f64,
    background: f64,
    plumes: &[PlumeSpec],
    gas: GasState,
) -> Result<Field> {
    let bb = ros.bounding_square();
    if !(cell_size > 0.0) || !cell_size.is_finite() {
        return Err(CstError::param(format!("cell size must be positive, got {cell_size}")));
    }
    if cell_size > bb.width() {
        return Err(CstError::param(format!("cell size {cell_size} exceeds the sensing-region extent {}", bb.width())));
    }
    if !(0.0..=1.0).contains(&background) {
        return Err(CstError::param(format!("background mole fraction {background} outside [0, 1]")));
    }
    for p in plumes {
        p.validate(background)?;
    }
    let n = ((bb.width() / cell_size) - 1e-9).ceil() as usize;
    let span = n as f64 * cell_size;
    let c = bb.center();
    let origin = Point::new(c.x - 0.5 * span, c.y - 0.5 * span);
    let mut field = Field { nx: n, ny: n, cell_size, origin, values: Vec::with_capacity(n * n), background, gas };
    for iy in 0..n {
        for ix in 0..n {
            let p = field.cell_center(ix, iy);
            let v = background + plumes.iter().map(|pl| pl.value_at(p)).sum::<f64>();
            field.values.push(v.clamp(0.0, 1.0));
        }
    }
    Ok(field)
}

/// `k = P x S` per fine cell.
pub fn absorption_density(field: &Field) -> Vec<f64> {
    let scale = field.gas.pressure * field.gas.linestrength;
    field.values.iter().map(|x| scale * x).collect()
}

/// Integrated absorbances of a beam layout.
#[derive(Clone, Debug, PartialEq)]
pub struct Measurement {
    pub b: Vec<f64>,
    pub snr_db: Option<f64>,
    pub seed: Option<u64>,
}

impl Measurement {
    pub fn noise_free(b: Vec<f64>) -> Self {
        Measurement { b, snr_db: None, seed: None }
    }

    pub fn len(&self) -> usize {
        self.b.len()
    }

    pub fn is_empty(&self) -> bool {
        self.b.is_empty()
    }
}

/// Exact line integral of the raster `k` along `beam`: the segment is split
/// at every grid line it crosses and each piece is weighted by the density of
/// the cell containing its midpoint. An axis-parallel beam lying on a grid
/// line takes the mean of the two cell columns it separates.
pub fn raster_line_integral(beam: &Beam, field: &Field, k: &[f64]) -> f64 {
    let h = field.cell_size;
    let on_line = |p: f64, o: f64| {
        let r = (p - o) / h;
        (r - r.round()).abs() <= 1e-9
    };
    let shifted = |dp: Point| Beam { start: beam.start + dp, end: beam.end + dp, ..*beam };
    let d = beam.end - beam.start;
    if d.x == 0.0 && on_line(beam.start.x, field.origin.x) {
        let s = Point::new(0.5 * h, 0.0);
        return 0.5 * (grid_walk(&shifted(s), field, k) + grid_walk(&shifted(-s), field, k));
    }
    if d.y == 0.0 && on_line(beam.start.y, field.origin.y) {
        let s = Point::new(0.0, 0.5 * h);
        return 0.5 * (grid_walk(&shifted(s), field, k) + grid_walk(&shifted(-s), field, k));
    }
    grid_walk(beam, field, k)
}

fn grid_walk(beam: &Beam, field: &Field, k: &[f64]) -> f64 {
    let a = beam.start;
    let d = beam.end - beam.start;
    let len = beam.length();
    let h = field.cell_size;
    let o = field.origin;

    let crossings = |p: f64, dp: f64, origin: f64, n: usize| -> Vec<f64> {
        if dp == 0.0 {
            return Vec::new();
        }
        let mut ts: Vec<f64> =
            (0..=n).map(|i| (origin + i as f64 * h - p) / dp).filter(|&t| t > 0.0 && t < 1.0).collect();
        if dp < 0.0 {
            ts.reverse();
        }
        ts
    };
    let tx = crossings(a.x, d.x, o.x, field.nx);
    let ty = crossings(a.y, d.y, o.y, field.ny);

    // merge the two ascending lists
    let mut ts = Vec::with_capacity(tx.len() + ty.len() + 2);
    ts.push(0.0);
    let (mut i, mut j) = (0, 0);
    while i < tx.len() || j < ty.len() {
        if j >= ty.len() || (i < tx.len() && tx[i] <= ty[j]) {
            ts.push(tx[i]);
            i += 1;
        } else {
            ts.push(ty[j]);
            j += 1;
        }
    }
    ts.push(1.0);

    let mut total = 0.0;
    for w in ts.windows(2) {
        let dt = w[1] - w[0];
        if dt <= 0.0 {
            continue;
        }
        let m = a + d * (0.5 * (w[0] + w[1]));
        let fx = ((m.x - o.x) / h).floor();
        let fy = ((m.y - o.y) / h).floor();
        if fx < 0.0 || fy < 0.0 {
            continue;
        }
        let (ix, iy) = (fx as usize, fy as usize);
        if ix < field.nx && iy < field.ny {
            total += dt * len * k[iy * field.nx + ix];
        }
    }
    total
}

/// Noise-free integrated absorbances of `field` along every beam.
pub fn forward_project(field: &Field, layout: &BeamLayout, exec: Exec) -> Measurement {
    let k = absorption_density(field);
    let b = exec.map_slice(&layout.beams, |beam| raster_line_integral(beam, field, &k));
    Measurement::noise_free(b)
}

/// Adds zero-mean Gaussian noise with per-beam standard deviation
/// `b_i / 10^(snr_db / 20)`. Deterministic in `seed`; noisy values are not
/// clipped.
pub fn add_noise(m: &Measurement, snr_db: f64, seed: u64) -> Result<Measurement> {
    if !snr_db.is_finite() {
        return Err(CstError::param(format!("SNR must be finite, got {snr_db}")));
    }
    let ratio = 10f64.powf(snr_db / 20.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b =
        m.b.iter()
            .map(|&bi| {
                let z: f64 = StandardNormal.sample(&mut rng);
                bi + z * (bi.abs() / ratio)
            })
            .collect();
    Ok(Measurement { b, snr_db: Some(snr_db), seed: Some(seed) })
}

/// Per-pixel mean of fine-cell values whose centres fall inside the pixel
/// (half-open, so abutting pixels never share a cell).
pub fn downsample_truth(field: &Field, mesh: &Mesh) -> Result<Vec<f64>> {
    let h = field.cell_size;
    let o = field.origin;
    let range = |lo: f64, hi: f64, origin: f64, n: usize| -> (usize, usize) {
        let a = (((lo - origin) / h - 0.5).floor() as i64 - 1).max(0) as usize;
        let b = ((((hi - origin) / h - 0.5).ceil() as i64) + 1).clamp(0, n as i64) as usize;
        (a.min(n), b)
    };
    mesh.pixels
        .iter()
        .map(|px| {
            let (x0, x1) = range(px.rect.xmin, px.rect.xmax, o.x, field.nx);
            let (y0, y1) = range(px.rect.ymin, px.rect.ymax, o.y, field.ny);
            let mut sum = 0.0;
            let mut count = 0usize;
            for iy in y0..y1 {
                for ix in x0..x1 {
                    if px.rect.contains_half_open(field.cell_center(ix, iy)) {
                        sum += field.values[iy * field.nx + ix];
                        count += 1;
                    }
                }
            }
            if count == 0 {
                Err(CstError::Mesh(format!("pixel {} contains no fine-cell centres", px.id)))
            } else {
                // equal-area cells, so the area-weighted mean is the plain mean
                Ok(sum / count as f64)
            }
        })
        .collect()
}

/// Named phantom: a background plus growing plumes over `n_frames` frames.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhantomSequence {
    pub background: f64,
    pub plumes: Vec<PlumeTrack>,
    pub n_frames: usize,
}

impl PhantomSequence {
    pub fn plumes_at(&self, frame: usize) -> Vec<PlumeSpec> {
        self.plumes.iter().map(|t| t.at(frame, self.n_frames)).collect()
    }

    pub fn field(&self, ros: &ConvexPolygon, cell_size: f64, frame: usize, gas: GasState) -> Result<Field> {
        if frame >= self.n_frames {
            return Err(CstError::param(format!("frame {frame} out of range for a {}-frame phantom", self.n_frames)));
        }
        build_field(ros, cell_size, self.background, &self.plumes_at(frame), gas)
    }
}
