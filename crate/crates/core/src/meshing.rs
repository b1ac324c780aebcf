//! Uniform-size and hybrid-size pixelations of the region of sensing.
//!
//! Pixels are ordered region-of-interest first so that the sensing matrix
//! splits into an in-RoI column block followed by an out-of-RoI block.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{CstError, Result};
use crate::geometry::{ConvexPolygon, Point};

pub use crate::geometry::Rect;

/// Relative tolerance for grid alignment checks.
const GRID_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    InRoi,
    OutRoi,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Uniform,
    Hybrid,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pixel {
    pub id: usize,
    pub rect: Rect,
    pub region: Region,
}

impl Pixel {
    pub fn area(&self) -> f64 {
        self.rect.area()
    }

    pub fn center(&self) -> Point {
        self.rect.center()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    pub pixels: Vec<Pixel>,
    pub n_in: usize,
    pub n_out: usize,
    pub roi_rect: Rect,
    pub scheme: Scheme,
}

/// Which pixels an error metric is evaluated over.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mask {
    Roi,
    Ros,
}

impl Mesh {
    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn label(&self) -> String {
        let sizes: Vec<String> = self.report().size_histogram.keys().cloned().collect();
        format!("mesh[{:?} N={} in={} sizes={}]", self.scheme, self.len(), self.n_in, sizes.join("/"))
    }

    /// Pixel ids selected by `mask`.
    pub fn mask(&self, mask: Mask) -> Vec<usize> {
        match mask {
            Mask::Roi => (0..self.n_in).collect(),
            Mask::Ros => (0..self.len()).collect(),
        }
    }

    pub fn covered_area(&self) -> f64 {
        self.pixels.iter().map(Pixel::area).sum()
    }

    /// Union bounding box of all pixels.
    pub fn extent(&self) -> Rect {
        let mut r = Rect::new(f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &self.pixels {
            r.xmin = r.xmin.min(p.rect.xmin);
            r.ymin = r.ymin.min(p.rect.ymin);
            r.xmax = r.xmax.max(p.rect.xmax);
            r.ymax = r.ymax.max(p.rect.ymax);
        }
        r
    }

    /// Same pixels in a new order; `order[new] = old`. Region ordering is not
    /// re-checked, so this is mainly for permutation tests.
    pub fn permuted(&self, order: &[usize]) -> Mesh {
        let pixels = order.iter().enumerate().map(|(id, &old)| Pixel { id, ..self.pixels[old] }).collect();
        Mesh { pixels, ..self.clone() }
    }

    pub fn report(&self) -> MeshReport {
        let mut hist = BTreeMap::new();
        for p in &self.pixels {
            let key = format!("{:.6}x{:.6}", p.rect.width(), p.rect.height());
            *hist.entry(key).or_insert(0usize) += 1;
        }
        MeshReport {
            n: self.len(),
            n_in: self.n_in,
            n_out: self.n_out,
            size_histogram: hist,
            covered_area: self.covered_area(),
        }
    }

    fn from_tagged(mut tagged: Vec<(Rect, Region)>, roi_rect: Rect, scheme: Scheme) -> Result<Mesh> {
        if tagged.is_empty() {
            return Err(CstError::Mesh("mesh has no pixels".into()));
        }
        // stable: keeps row-major order within each region
        tagged.sort_by_key(|(_, r)| *r != Region::InRoi);
        let n_in = tagged.iter().filter(|(_, r)| *r == Region::InRoi).count();
        let pixels: Vec<Pixel> =
            tagged.into_iter().enumerate().map(|(id, (rect, region))| Pixel { id, rect, region }).collect();
        let n_out = pixels.len() - n_in;
        Ok(Mesh { pixels, n_in, n_out, roi_rect, scheme })
    }
}

/// Summary of a mesh: counts, pixel-size histogram and covered area.
#[derive(Clone, Debug, PartialEq)]
pub struct MeshReport {
    pub n: usize,
    pub n_in: usize,
    pub n_out: usize,
    /// `"<width>x<height>"` to count, sorted by key.
    pub size_histogram: BTreeMap<String, usize>,
    pub covered_area: f64,
}

impl fmt::Display for MeshReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "N={} n_in={} n_out={}", self.n, self.n_in, self.n_out)?;
        for (size, count) in &self.size_histogram {
            writeln!(f, "  pixel {size}: {count}")?;
        }
        write!(f, "covered_area={:.6}", self.covered_area)
    }
}

/// A square grid of `n x n` cells of side `h`, centred on `center`.
#[derive(Clone, Copy, Debug)]
struct Grid {
    origin: Point,
    h: f64,
    n: usize,
}

impl Grid {
    fn covering(bounding_square: Rect, h: f64) -> Grid {
        let side = bounding_square.width();
        let n = ((side / h) - GRID_TOL).ceil().max(1.0) as usize;
        let span = n as f64 * h;
        let c = bounding_square.center();
        Grid { origin: Point::new(c.x - 0.5 * span, c.y - 0.5 * span), h, n }
    }

    /// Cells in row-major order (y outer, x inner).
    fn cells(&self) -> impl Iterator<Item = Rect> + '_ {
        (0..self.n).flat_map(move |iy| {
            (0..self.n).map(move |ix| {
                let x0 = self.origin.x + ix as f64 * self.h;
                let y0 = self.origin.y + iy as f64 * self.h;
                Rect::new(x0, y0, x0 + self.h, y0 + self.h)
            })
        })
    }

    fn is_on_line(&self, v: f64, o: f64) -> bool {
        let k = (v - o) / self.h;
        (k - k.round()).abs() <= GRID_TOL * k.abs().max(1.0)
    }
}

fn keep(ros: &ConvexPolygon, rect: &Rect) -> bool {
    let scale = ros.bounding_box().diagonal();
    ros.contains(rect.center(), 1e-12 * scale)
}

fn check_roi(ros: &ConvexPolygon, roi_rect: &Rect) -> Result<()> {
    if !roi_rect.is_valid() {
        return Err(CstError::Mesh(format!("RoI rectangle {roi_rect:?} has no area")));
    }
    let bb = ros.bounding_square();
    if !bb.encloses(roi_rect, GRID_TOL * bb.width()) {
        return Err(CstError::Mesh(format!("RoI rectangle {roi_rect:?} extends beyond the sensing region")));
    }
    Ok(())
}

/// Uniform grid of `pixel_size` squares over the bounding square of `ros`,
/// symmetric about its centre. Pixels whose centre lies outside `ros` are
/// dropped; a pixel is in the RoI iff its centre lies in `roi_rect`.
pub fn build_uniform_mesh(ros: &ConvexPolygon, pixel_size: f64, roi_rect: Rect) -> Result<Mesh> {
    let bb = ros.bounding_square();
    if !(pixel_size > 0.0) || !pixel_size.is_finite() {
        return Err(CstError::Mesh(format!("pixel size must be positive, got {pixel_size}")));
    }
    if pixel_size > bb.width() * (1.0 + GRID_TOL) {
        return Err(CstError::Mesh(format!(
            "pixel size {pixel_size} exceeds the sensing-region extent {}",
            bb.width()
        )));
    }
    check_roi(ros, &roi_rect)?;
    let grid = Grid::covering(bb, pixel_size);
    let tagged = grid
        .cells()
        .filter(|r| keep(ros, r))
        .map(|r| {
            let region = if roi_rect.contains(r.center()) { Region::InRoi } else { Region::OutRoi };
            (r, region)
        })
        .collect();
    Mesh::from_tagged(tagged, roi_rect, Scheme::Uniform)
}

/// Two-level mesh: a coarse `h_out` grid over the bounding square of `ros`;
/// coarse cells inside `refine_rect` are split into `r x r` fine pixels of
/// side `h_in` (RoI), the rest are kept whole (out of RoI). `refine_rect`
/// must lie on coarse grid lines and `h_out / h_in` must be an integer >= 2.
pub fn build_hybrid_mesh(ros: &ConvexPolygon, h_out: f64, h_in: f64, refine_rect: Rect) -> Result<Mesh> {
    if !(h_out > 0.0 && h_in > 0.0) || !h_out.is_finite() || !h_in.is_finite() {
        return Err(CstError::Mesh(format!("pixel sizes must be positive, got {h_out} and {h_in}")));
    }
    let ratio = h_out / h_in;
    let r = ratio.round();
    if (ratio - r).abs() > GRID_TOL * ratio || r < 2.0 {
        return Err(CstError::Mesh(format!("coarse/fine ratio {ratio} is not an integer >= 2")));
    }
    let r = r as usize;
    let bb = ros.bounding_square();
    if h_out > bb.width() * (1.0 + GRID_TOL) {
        return Err(CstError::Mesh(format!("coarse pixel {h_out} exceeds the sensing-region extent")));
    }
    check_roi(ros, &refine_rect)?;
    let grid = Grid::covering(bb, h_out);
    let aligned = grid.is_on_line(refine_rect.xmin, grid.origin.x)
        && grid.is_on_line(refine_rect.xmax, grid.origin.x)
        && grid.is_on_line(refine_rect.ymin, grid.origin.y)
        && grid.is_on_line(refine_rect.ymax, grid.origin.y);
    if !aligned {
        return Err(CstError::Mesh(format!(
            "refinement block {refine_rect:?} is not aligned to the {h_out} coarse grid"
        )));
    }
    let h_fine = h_out / r as f64;
    // collect fine pixels row-major over the whole refinement block
    let mut fine = Vec::new();
    let mut coarse = Vec::new();
    for cell in grid.cells() {
        if refine_rect.contains(cell.center()) {
            fine.push(cell);
        } else if keep(ros, &cell) {
            coarse.push((cell, Region::OutRoi));
        }
    }
    let mut fine_px: Vec<Rect> = fine
        .iter()
        .flat_map(|c| {
            (0..r).flat_map(move |j| {
                (0..r).map(move |i| {
                    let x0 = c.xmin + i as f64 * h_fine;
                    let y0 = c.ymin + j as f64 * h_fine;
                    Rect::new(x0, y0, x0 + h_fine, y0 + h_fine)
                })
            })
        })
        .filter(|p| keep(ros, p))
        .collect();
    // row-major order over the refined block
    fine_px.sort_by(|a, b| {
        let ka = (
            ((a.ymin - refine_rect.ymin) / h_fine).round() as i64,
            ((a.xmin - refine_rect.xmin) / h_fine).round() as i64,
        );
        let kb = (
            ((b.ymin - refine_rect.ymin) / h_fine).round() as i64,
            ((b.xmin - refine_rect.xmin) / h_fine).round() as i64,
        );
        ka.cmp(&kb)
    });
    let tagged = fine_px.into_iter().map(|p| (p, Region::InRoi)).chain(coarse).collect();
    Mesh::from_tagged(tagged, refine_rect, Scheme::Hybrid)
}

/// Centred block of `cells x cells` grid cells of side `h` on the grid that
/// covers `ros`. Handy for building aligned refinement blocks.
pub fn centered_block(ros: &ConvexPolygon, h: f64, cells: usize) -> Rect {
    let grid = Grid::covering(ros.bounding_square(), h);
    let c = grid.origin + Point::new(0.5 * grid.n as f64 * h, 0.5 * grid.n as f64 * h);
    let half = 0.5 * cells as f64 * h;
    // snap to grid lines when the parities of n and cells differ
    let snap = |v: f64, o: f64| o + ((v - o) / h).round() * h;
    Rect::new(
        snap(c.x - half, grid.origin.x),
        snap(c.y - half, grid.origin.y),
        snap(c.x - half, grid.origin.x) + cells as f64 * h,
        snap(c.y - half, grid.origin.y) + cells as f64 * h,
    )
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub shared_length: f64,
    pub centroid_distance: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct AdjacencyGraph {
    pub edges: Vec<Edge>,
}

impl AdjacencyGraph {
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }
}

/// Length of the overlap of intervals `[a0, a1]` and `[b0, b1]`.
fn overlap(a0: f64, a1: f64, b0: f64, b1: f64) -> f64 {
    (a1.min(b1) - a0.max(b0)).max(0.0)
}

/// Pixel adjacency: one edge per pair of pixels sharing a boundary segment of
/// positive length. Edges are sorted by `(a, b)` with `a < b`.
pub fn adjacency(mesh: &Mesh) -> AdjacencyGraph {
    let ext = mesh.extent();
    let tol = GRID_TOL * ext.diagonal().max(1e-300);
    let min_len = tol;
    let mut edges = Vec::new();

    // pixels sorted by their low edge along one axis; each pixel's high edge is
    // matched against the low edges that coincide with it.
    let mut scan = |low: &dyn Fn(&Rect) -> f64, high: &dyn Fn(&Rect) -> f64, span: &dyn Fn(&Rect) -> (f64, f64)| {
        let mut by_low: Vec<(f64, usize)> = mesh.pixels.iter().map(|p| (low(&p.rect), p.id)).collect();
        by_low.sort_by(|x, y| x.0.total_cmp(&y.0));
        for p in &mesh.pixels {
            let h = high(&p.rect);
            let start = by_low.partition_point(|&(v, _)| v < h - tol);
            let (s0, s1) = span(&p.rect);
            for &(v, q) in &by_low[start..] {
                if v > h + tol {
                    break;
                }
                let (t0, t1) = span(&mesh.pixels[q].rect);
                let shared = overlap(s0, s1, t0, t1);
                if shared > min_len {
                    let (a, b) = if p.id < q { (p.id, q) } else { (q, p.id) };
                    let d = mesh.pixels[a].center().distance(mesh.pixels[b].center());
                    edges.push(Edge { a, b, shared_length: shared, centroid_distance: d });
                }
            }
        }
    };
    scan(&|r| r.xmin, &|r| r.xmax, &|r| (r.ymin, r.ymax));
    scan(&|r| r.ymin, &|r| r.ymax, &|r| (r.xmin, r.xmax));
    edges.sort_by_key(|e| (e.a, e.b));
    edges.dedup_by_key(|e| (e.a, e.b));
    AdjacencyGraph { edges }
}
