//! File artifacts: CSV tables, greyscale rasters and their sidecars.
//!
//! Every artifact starts with a provenance comment carrying the config hash
//! and seed. CSV files put it on a leading `#` line ahead of the RFC 4180
//! body; PGM files put it in the header comment.
//!
//! Rasters map values linearly onto grey levels: `min` is 0 and `max` is 255,
//! rounding to nearest. The range used is written to a `.range` sidecar next
//! to the image.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::experiment::{ComparisonReport, SweepResult};
use crate::geometry::{BeamLayout, Rect};
use crate::meshing::{Mesh, Region};
use crate::phantom::{Field, Measurement};
use crate::sensing::{MatrixStats, SensingMatrix, SvdSpectrum};
use crate::solvers::ReconResult;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
}

impl Provenance {
    pub fn new(config_hash: impl Into<String>, seed: u64) -> Self {
        Provenance { config_hash: config_hash.into(), seed }
    }

    pub fn tag(&self) -> String {
        format!("hcst config={} seed={}", self.config_hash, self.seed)
    }
}

fn num(v: f64) -> String {
    // shortest round-trip representation
    format!("{v:?}")
}

/// Writes `# <provenance>` followed by an RFC 4180 table (CRLF line ends).
pub fn write_csv<I>(path: &Path, prov: &Provenance, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut out = BufWriter::new(File::create(path)?);
    write!(out, "# {}\r\n", prov.tag())?;
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_beams_csv(path: &Path, prov: &Provenance, layout: &BeamLayout) -> Result<()> {
    let rows =
        layout.beams.iter().map(|b| vec![b.id.to_string(), num(b.start.x), num(b.start.y), num(b.end.x), num(b.end.y)]);
    write_csv(path, prov, &["id", "x0", "y0", "x1", "y1"], rows)
}

fn region_name(r: Region) -> &'static str {
    match r {
        Region::InRoi => "in_roi",
        Region::OutRoi => "out_roi",
    }
}

pub fn write_mesh_csv(path: &Path, prov: &Provenance, mesh: &Mesh) -> Result<()> {
    let rows = mesh.pixels.iter().map(|p| {
        vec![
            p.id.to_string(),
            num(p.rect.xmin),
            num(p.rect.ymin),
            num(p.rect.xmax),
            num(p.rect.ymax),
            region_name(p.region).to_string(),
        ]
    });
    write_csv(path, prov, &["id", "xmin", "ymin", "xmax", "ymax", "region"], rows)
}

/// Dense matrix, one CSV row per beam.
pub fn write_matrix_csv(path: &Path, prov: &Provenance, a: &SensingMatrix) -> Result<()> {
    let header: Vec<String> = (0..a.cols()).map(|j| format!("p{j}")).collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = (0..a.rows()).map(|i| a.matrix.row(i).iter().map(|&v| num(v)).collect());
    write_csv(path, prov, &header, rows)
}

/// Non-zero entries as `(i, j, value)`.
pub fn write_triplets_csv(path: &Path, prov: &Provenance, a: &SensingMatrix) -> Result<()> {
    let mut rows = Vec::new();
    for i in 0..a.rows() {
        for (j, &v) in a.matrix.row(i).iter().enumerate() {
            if v != 0.0 {
                rows.push(vec![i.to_string(), j.to_string(), num(v)]);
            }
        }
    }
    write_csv(path, prov, &["i", "j", "value"], rows)
}

pub fn write_stats_csv(path: &Path, prov: &Provenance, s: &MatrixStats) -> Result<()> {
    let row = vec![
        s.rows.to_string(),
        s.cols.to_string(),
        s.nnz.to_string(),
        num(s.nnz_fraction),
        s.n_in.to_string(),
        s.n_out.to_string(),
        s.rows_all_zero.len().to_string(),
        s.cols_all_zero.len().to_string(),
    ];
    write_csv(path, prov, &["rows", "cols", "nnz", "nnz_fraction", "n_in", "n_out", "zero_rows", "zero_cols"], [row])
}

/// `(j, sigma_j)` with 1-based `j`.
pub fn write_spectrum_csv(path: &Path, prov: &Provenance, s: &SvdSpectrum) -> Result<()> {
    let rows = s.singular_values.iter().enumerate().map(|(j, &v)| vec![(j + 1).to_string(), num(v)]);
    write_csv(path, prov, &["j", "sigma"], rows)
}

pub fn write_measurement_csv(path: &Path, prov: &Provenance, m: &Measurement) -> Result<()> {
    let rows = m.b.iter().enumerate().map(|(i, &b)| vec![i.to_string(), num(b)]);
    write_csv(path, prov, &["beam", "b"], rows)
}

pub fn write_recon_csv(path: &Path, prov: &Provenance, r: &ReconResult, truth: Option<&[f64]>) -> Result<()> {
    let rows = (0..r.k.len()).map(|j| {
        let mut row = vec![j.to_string(), num(r.k[j]), num(r.x[j])];
        if let Some(t) = truth {
            row.push(num(t[j]));
        }
        row
    });
    let header: &[&str] = if truth.is_some() { &["pixel", "k", "x", "x_true"] } else { &["pixel", "k", "x"] };
    write_csv(path, prov, header, rows)
}

/// Fine raster as `(ix, iy, x, y, value)` rows.
pub fn write_field_csv(path: &Path, prov: &Provenance, f: &Field) -> Result<()> {
    let rows = (0..f.ny).flat_map(|iy| {
        (0..f.nx).map(move |ix| {
            let c = f.cell_center(ix, iy);
            vec![ix.to_string(), iy.to_string(), num(c.x), num(c.y), num(f.values[iy * f.nx + ix])]
        })
    });
    write_csv(path, prov, &["ix", "iy", "x", "y", "value"], rows)
}

/// IE-versus-parameter curve, with per-mask means for every grid value.
pub fn write_sweep_csv(path: &Path, prov: &Provenance, s: &SweepResult) -> Result<()> {
    use crate::meshing::Mask;
    let rows = s.grid.iter().zip(&s.cells).zip(s.mean_ie.iter().zip(&s.std_ie)).map(|((g, c), (m, sd))| {
        vec![
            s.scheme.clone(),
            s.solver.name().to_string(),
            num(s.snr_db),
            num(*g),
            num(*m),
            num(*sd),
            num(c.mean(Mask::Roi)),
            num(c.mean(Mask::Ros)),
            c.failures.to_string(),
        ]
    });
    write_csv(
        path,
        prov,
        &["scheme", "solver", "snr_db", "parameter", "mean_ie", "std_ie", "ie_roi", "ie_ros", "failures"],
        rows,
    )
}

pub fn write_comparison_csv(path: &Path, prov: &Provenance, r: &ComparisonReport) -> Result<()> {
    let rows = r.rows.iter().map(|row| {
        vec![
            row.scheme.clone(),
            row.solver.name().to_string(),
            num(row.snr_db),
            num(row.parameter),
            num(row.ie_roi_mean),
            num(row.ie_roi_std),
            num(row.ie_ros_mean),
            num(row.ie_ros_std),
            row.failures.to_string(),
        ]
    });
    write_csv(
        path,
        prov,
        &["scheme", "solver", "snr_db", "parameter", "ie_roi", "ie_roi_std", "ie_ros", "ie_ros_std", "failures"],
        rows,
    )
}

pub fn write_improvement_csv(path: &Path, prov: &Provenance, r: &ComparisonReport) -> Result<()> {
    let rows = r
        .improvements
        .iter()
        .map(|i| vec![i.solver.name().to_string(), num(i.snr_db), num(i.roi_percent), num(i.ros_percent)]);
    write_csv(path, prov, &["solver", "snr_db", "roi_percent", "ros_percent"], rows)
}

/// Plain text with a provenance header line.
pub fn write_text(path: &Path, prov: &Provenance, body: &str) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "# {}", prov.tag())?;
    out.write_all(body.as_bytes())?;
    if !body.ends_with('\n') {
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

/// 8-bit greyscale image, row 0 at the top.
#[derive(Clone, Debug, PartialEq)]
pub struct GreyImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
    /// Value mapped to grey 0.
    pub min: f64,
    /// Value mapped to grey 255.
    pub max: f64,
}

/// Grey level of `v` on `[min, max]`; a flat range maps everything to 0.
pub fn grey_level(v: f64, min: f64, max: f64) -> u8 {
    if !(max > min) || !v.is_finite() {
        return 0;
    }
    (255.0 * ((v - min) / (max - min)).clamp(0.0, 1.0)).round() as u8
}

fn value_range<'a>(values: impl Iterator<Item = &'a f64>) -> (f64, f64) {
    values.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

/// One image pixel per field cell, y pointing up.
pub fn render_field(f: &Field) -> GreyImage {
    let (min, max) = value_range(f.values.iter());
    let mut pixels = Vec::with_capacity(f.len());
    for row in 0..f.ny {
        let iy = f.ny - 1 - row;
        pixels.extend(f.values[iy * f.nx..(iy + 1) * f.nx].iter().map(|&v| grey_level(v, min, max)));
    }
    GreyImage { width: f.nx, height: f.ny, pixels, min, max }
}

/// Rasterizes `extent` into `size x size` samples and calls `shade` with the
/// centre of each sample, top row first.
fn rasterize(extent: Rect, size: usize, mut shade: impl FnMut(f64, f64) -> u8) -> Vec<u8> {
    let dx = extent.width() / size as f64;
    let dy = extent.height() / size as f64;
    let mut out = Vec::with_capacity(size * size);
    for row in 0..size {
        let y = extent.ymax - (row as f64 + 0.5) * dy;
        for col in 0..size {
            let x = extent.xmin + (col as f64 + 0.5) * dx;
            out.push(shade(x, y));
        }
    }
    out
}

fn pixel_at(mesh: &Mesh, x: f64, y: f64) -> Option<usize> {
    let p = crate::geometry::Point::new(x, y);
    mesh.pixels.iter().position(|px| px.rect.contains_half_open(p))
}

/// Mesh preview: pixel boundaries white, RoI pixels mid grey, out-of-RoI
/// pixels dark grey, uncovered area black.
pub fn render_mesh(mesh: &Mesh, size: usize) -> GreyImage {
    let ext = mesh.extent();
    let d = ext.width().max(ext.height()) / size as f64;
    let extent = Rect::new(ext.xmin, ext.ymin, ext.xmin + d * size as f64, ext.ymin + d * size as f64);
    let pixels = rasterize(extent, size, |x, y| match pixel_at(mesh, x, y) {
        None => 0,
        Some(j) => {
            let r = mesh.pixels[j].rect;
            let near = |a: f64, b: f64| (a - b).abs() < 0.5 * d;
            if near(x, r.xmin) || near(x, r.xmax) || near(y, r.ymin) || near(y, r.ymax) {
                255
            } else if mesh.pixels[j].region == Region::InRoi {
                128
            } else {
                64
            }
        }
    });
    GreyImage { width: size, height: size, pixels, min: 0.0, max: 255.0 }
}

/// Pixel rectangles filled with `values`; uncovered area is black.
pub fn render_pixel_values(mesh: &Mesh, values: &[f64], size: usize) -> GreyImage {
    let (min, max) = value_range(values.iter());
    let ext = mesh.extent();
    let side = ext.width().max(ext.height());
    let extent = Rect::new(ext.xmin, ext.ymin, ext.xmin + side, ext.ymin + side);
    let pixels = rasterize(extent, size, |x, y| pixel_at(mesh, x, y).map_or(0, |j| grey_level(values[j], min, max)));
    GreyImage { width: size, height: size, pixels, min, max }
}

/// Sidecar path: `<image>.range`.
pub fn sidecar_path(image: &Path) -> PathBuf {
    let mut s = image.as_os_str().to_owned();
    s.push(".range");
    PathBuf::from(s)
}

/// Binary PGM (P5) plus its `.range` sidecar.
pub fn write_pgm(path: &Path, prov: &Provenance, img: &GreyImage) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write!(out, "P5\n# {}\n{} {}\n255\n", prov.tag(), img.width, img.height)?;
    out.write_all(&img.pixels)?;
    out.flush()?;
    write_text(
        &sidecar_path(path),
        prov,
        &format!("min={}\nmax={}\nmapping=linear min->0 max->255\n", num(img.min), num(img.max)),
    )
}
