//! Beam layouts and exact segment/region intersection lengths.
//!
//! Coordinates are in centimetres with the origin at the centroid of the
//! region of sensing, x to the right and y up.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{CstError, Result};

/// Tolerance used when checking that points sit on a polygon boundary.
pub const BOUNDARY_TOL: f64 = 1e-9;

/// Chords whose parametric extent is below this are measure-zero contacts.
const CONTACT_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn dot(self, o: Point) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 2-D cross product.
    pub fn cross(self, o: Point) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, o: Point) -> f64 {
        (self - o).norm()
    }

    /// Rotates about the origin by `angle` radians.
    pub fn rotate(self, angle: f64) -> Point {
        let (s, c) = angle.sin_cos();
        Point::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Neg for Point {
    type Output = Point;
    fn neg(self) -> Point {
        Point::new(-self.x, -self.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }
}

/// Axis-aligned closed rectangle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub xmin: f64,
    pub ymin: f64,
    pub xmax: f64,
    pub ymax: f64,
}

impl Rect {
    pub const fn new(xmin: f64, ymin: f64, xmax: f64, ymax: f64) -> Self {
        Rect { xmin, ymin, xmax, ymax }
    }

    /// Square of side `side` centred on `c`.
    pub fn centered(c: Point, side: f64) -> Self {
        let h = 0.5 * side;
        Rect::new(c.x - h, c.y - h, c.x + h, c.y + h)
    }

    pub fn width(&self) -> f64 {
        self.xmax - self.xmin
    }

    pub fn height(&self) -> f64 {
        self.ymax - self.ymin
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn diagonal(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn center(&self) -> Point {
        Point::new(0.5 * (self.xmin + self.xmax), 0.5 * (self.ymin + self.ymax))
    }

    pub fn is_valid(&self) -> bool {
        self.width() > 0.0 && self.height() > 0.0 && self.area().is_finite()
    }

    /// Closed containment.
    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.xmin && p.x <= self.xmax && p.y >= self.ymin && p.y <= self.ymax
    }

    /// Half-open containment `[xmin, xmax) x [ymin, ymax)`, so that points on a
    /// shared edge belong to exactly one of two abutting rectangles.
    pub fn contains_half_open(&self, p: Point) -> bool {
        p.x >= self.xmin && p.x < self.xmax && p.y >= self.ymin && p.y < self.ymax
    }

    /// True if `other` lies inside `self`, allowing `tol` slack.
    pub fn encloses(&self, other: &Rect, tol: f64) -> bool {
        other.xmin >= self.xmin - tol
            && other.ymin >= self.ymin - tol
            && other.xmax <= self.xmax + tol
            && other.ymax <= self.ymax + tol
    }

    pub fn corners(&self) -> [Point; 4] {
        [
            Point::new(self.xmin, self.ymin),
            Point::new(self.xmax, self.ymin),
            Point::new(self.xmax, self.ymax),
            Point::new(self.xmin, self.ymax),
        ]
    }
}

/// Convex polygon with counter-clockwise vertices.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvexPolygon {
    vertices: Vec<Point>,
}

impl ConvexPolygon {
    /// Validates convexity and orientation. Clockwise input is reversed;
    /// collinear and duplicate vertices are dropped.
    pub fn new(vertices: Vec<Point>) -> Result<Self> {
        let mut v = dedup_vertices(vertices);
        if v.len() < 3 {
            return Err(CstError::Geometry("polygon needs at least 3 distinct vertices".into()));
        }
        if signed_area(&v) < 0.0 {
            v.reverse();
        }
        let area = signed_area(&v);
        if !(area > 0.0) {
            return Err(CstError::Geometry("polygon has zero area".into()));
        }
        let scale = area.sqrt();
        let n = v.len();
        for i in 0..n {
            let a = v[i];
            let b = v[(i + 1) % n];
            let c = v[(i + 2) % n];
            if (b - a).cross(c - b) < -1e-12 * scale * scale {
                return Err(CstError::Geometry("polygon is not convex".into()));
            }
        }
        Ok(ConvexPolygon { vertices: v })
    }

    /// Axis-aligned square of side `side` centred on the origin.
    pub fn square(side: f64) -> Result<Self> {
        if !(side > 0.0) {
            return Err(CstError::Geometry(format!("square side must be positive, got {side}")));
        }
        ConvexPolygon::new(Rect::centered(Point::default(), side).corners().to_vec())
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    pub fn centroid(&self) -> Point {
        let n = self.vertices.len();
        let mut cx = 0.0;
        let mut cy = 0.0;
        let mut a2 = 0.0;
        for i in 0..n {
            let p = self.vertices[i];
            let q = self.vertices[(i + 1) % n];
            let w = p.cross(q);
            a2 += w;
            cx += (p.x + q.x) * w;
            cy += (p.y + q.y) * w;
        }
        Point::new(cx / (3.0 * a2), cy / (3.0 * a2))
    }

    pub fn bounding_box(&self) -> Rect {
        let mut r = Rect::new(f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &self.vertices {
            r.xmin = r.xmin.min(p.x);
            r.ymin = r.ymin.min(p.y);
            r.xmax = r.xmax.max(p.x);
            r.ymax = r.ymax.max(p.y);
        }
        r
    }

    /// Smallest square, centred on the bounding-box centre, enclosing the
    /// polygon.
    pub fn bounding_square(&self) -> Rect {
        let bb = self.bounding_box();
        Rect::centered(bb.center(), bb.width().max(bb.height()))
    }

    /// Signed distance from `p` to the boundary: positive inside.
    pub fn inset_distance(&self, p: Point) -> f64 {
        let n = self.vertices.len();
        let mut d = f64::INFINITY;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let e = b - a;
            d = d.min(e.cross(p - a) / e.norm());
        }
        d
    }

    /// Point-in-polygon test; points within `tol` of the boundary count as
    /// inside.
    pub fn contains(&self, p: Point, tol: f64) -> bool {
        self.inset_distance(p) >= -tol
    }

    /// Intersection with the half-plane `{p : n . p <= c}`.
    pub fn clip_half_plane(&self, n: Point, c: f64) -> Result<Self> {
        let v = &self.vertices;
        let mut out = Vec::with_capacity(v.len() + 1);
        for i in 0..v.len() {
            let p = v[i];
            let q = v[(i + 1) % v.len()];
            let fp = n.dot(p) - c;
            let fq = n.dot(q) - c;
            if fp <= 0.0 {
                out.push(p);
            }
            if (fp < 0.0 && fq > 0.0) || (fp > 0.0 && fq < 0.0) {
                let t = fp / (fp - fq);
                out.push(p + (q - p) * t);
            }
        }
        ConvexPolygon::new(out)
    }
}

fn signed_area(v: &[Point]) -> f64 {
    let n = v.len();
    0.5 * (0..n).map(|i| v[i].cross(v[(i + 1) % n])).sum::<f64>()
}

fn dedup_vertices(v: Vec<Point>) -> Vec<Point> {
    let scale = v.iter().map(|p| p.norm()).fold(0.0, f64::max).max(1e-300);
    let eps = 1e-12 * scale;
    let mut out: Vec<Point> = Vec::with_capacity(v.len());
    for p in v {
        if out.last().is_none_or(|q| q.distance(p) > eps) {
            out.push(p);
        }
    }
    while out.len() > 1 && out[0].distance(out[out.len() - 1]) <= eps {
        out.pop();
    }
    // drop collinear vertices
    let mut changed = true;
    while changed && out.len() >= 3 {
        changed = false;
        let n = out.len();
        for i in 0..n {
            let a = out[(i + n - 1) % n];
            let b = out[i];
            let c = out[(i + 1) % n];
            if (b - a).cross(c - b).abs() <= 1e-12 * scale * scale {
                out.remove(i);
                changed = true;
                break;
            }
        }
    }
    out
}

/// A finite emitter-to-detector laser segment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Beam {
    pub id: usize,
    pub start: Point,
    pub end: Point,
}

impl Beam {
    pub fn length(&self) -> f64 {
        self.start.distance(self.end)
    }

    pub fn direction(&self) -> Point {
        (self.end - self.start) * (1.0 / self.length())
    }
}

/// Parallel-beam layout: `n_projections` equiangular projections, each with
/// `beams_per_projection` equispaced parallel beams centred on the origin.
#[derive(Clone, Debug, PartialEq)]
pub struct BeamLayout {
    pub beams: Vec<Beam>,
    pub n_projections: usize,
    pub beams_per_projection: usize,
    /// Beam direction of each projection, degrees.
    pub projection_angles: Vec<f64>,
    pub beam_spacing: f64,
    /// Emitter-to-detector distance. For layouts clipped to an explicit
    /// region this is the longest beam.
    pub distance: f64,
}

impl BeamLayout {
    pub fn len(&self) -> usize {
        self.beams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beams.is_empty()
    }

    /// Provenance label used in sensing-matrix metadata.
    pub fn label(&self) -> String {
        format!(
            "layout[{}x{} spacing={} D={}]",
            self.n_projections, self.beams_per_projection, self.beam_spacing, self.distance
        )
    }

    /// Signed perpendicular offsets of the beams in one projection.
    pub fn offsets(&self) -> Vec<f64> {
        fan_offsets(self.beams_per_projection, self.beam_spacing)
    }
}

fn fan_offsets(beams_per_projection: usize, spacing: f64) -> Vec<f64> {
    let mid = 0.5 * (beams_per_projection as f64 - 1.0);
    (0..beams_per_projection).map(|q| (q as f64 - mid) * spacing).collect()
}

fn projection_frame(p: usize, n_projections: usize) -> (f64, Point, Point) {
    let deg = p as f64 * 180.0 / n_projections as f64;
    let theta = deg.to_radians();
    // exact zeros at multiples of 90 deg keep axis-parallel beams axis-parallel
    let snap = |v: f64| if v.abs() < 1e-15 { 0.0 } else { v };
    let (c, s) = (snap(theta.cos()), snap(theta.sin()));
    (deg, Point::new(c, s), Point::new(-s, c))
}

fn check_fan(n_projections: usize, beams_per_projection: usize, spacing: f64) -> Result<()> {
    if n_projections == 0 || beams_per_projection == 0 {
        return Err(CstError::Geometry("layout needs at least one projection and one beam".into()));
    }
    if !(spacing > 0.0) || !spacing.is_finite() {
        return Err(CstError::Geometry(format!("beam spacing must be positive, got {spacing}")));
    }
    Ok(())
}

/// Builds a parallel-beam layout whose emitters and detectors sit on opposite
/// sides of each projection at distance `distance`. Every beam has length
/// `distance` and both endpoints lie on the boundary of [`ros_polygon`].
pub fn build_beam_layout(
    n_projections: usize,
    beams_per_projection: usize,
    spacing: f64,
    distance: f64,
) -> Result<BeamLayout> {
    check_fan(n_projections, beams_per_projection, spacing)?;
    if !(distance > 0.0) || !distance.is_finite() {
        return Err(CstError::Geometry(format!("emitter-detector distance must be positive, got {distance}")));
    }
    let width = (beams_per_projection as f64 - 1.0) * spacing;
    if width >= distance {
        return Err(CstError::Geometry(format!(
            "beam fan width {width} is not smaller than emitter-detector distance {distance}"
        )));
    }
    let ros = slab_polygon(n_projections, distance)?;
    let offsets = fan_offsets(beams_per_projection, spacing);
    let mut beams = Vec::with_capacity(n_projections * beams_per_projection);
    let mut angles = Vec::with_capacity(n_projections);
    for p in 0..n_projections {
        let (deg, d, n) = projection_frame(p, n_projections);
        angles.push(deg);
        for &s in &offsets {
            let start = n * s - d * (0.5 * distance);
            let end = n * s + d * (0.5 * distance);
            let tol = BOUNDARY_TOL * distance.max(1.0);
            if ros.inset_distance(start).abs() > tol || ros.inset_distance(end).abs() > tol {
                return Err(CstError::Geometry(format!(
                    "beam at offset {s} of projection {deg} deg does not end on the sensing-region boundary; fan too wide"
                )));
            }
            beams.push(Beam { id: beams.len(), start, end });
        }
    }
    Ok(BeamLayout {
        beams,
        n_projections,
        beams_per_projection,
        projection_angles: angles,
        beam_spacing: spacing,
        distance,
    })
}

/// Builds a parallel-beam layout whose beams are the chords of an explicit
/// convex region: each beam line is clipped to `region`.
pub fn build_clipped_layout(
    region: &ConvexPolygon,
    n_projections: usize,
    beams_per_projection: usize,
    spacing: f64,
) -> Result<BeamLayout> {
    check_fan(n_projections, beams_per_projection, spacing)?;
    let c = region.centroid();
    let reach = region.vertices().iter().map(|v| v.distance(c)).fold(0.0, f64::max) * 4.0;
    let offsets = fan_offsets(beams_per_projection, spacing);
    let mut beams = Vec::new();
    let mut angles = Vec::new();
    let mut longest: f64 = 0.0;
    for p in 0..n_projections {
        let (deg, d, n) = projection_frame(p, n_projections);
        angles.push(deg);
        for &s in &offsets {
            let a = c + n * s - d * reach;
            let b = c + n * s + d * reach;
            let (t0, t1) = clip_params_polygon(a, b, region).ok_or_else(|| {
                CstError::Geometry(format!("beam at offset {s} of projection {deg} deg misses the region"))
            })?;
            let start = a + (b - a) * t0;
            let end = a + (b - a) * t1;
            let beam = Beam { id: beams.len(), start, end };
            longest = longest.max(beam.length());
            beams.push(beam);
        }
    }
    Ok(BeamLayout {
        beams,
        n_projections,
        beams_per_projection,
        projection_angles: angles,
        beam_spacing: spacing,
        distance: longest,
    })
}

/// Intersection of `n_projections` slabs of width `distance` centred on the
/// origin, one per projection direction. A single projection is closed off by
/// the perpendicular slab, giving a square.
fn slab_polygon(n_projections: usize, distance: f64) -> Result<ConvexPolygon> {
    let big = 4.0 * distance;
    let mut poly = ConvexPolygon::square(big)?;
    let h = 0.5 * distance;
    let mut dirs: Vec<Point> = (0..n_projections).map(|p| projection_frame(p, n_projections).1).collect();
    if n_projections == 1 {
        dirs.push(projection_frame(0, 1).2);
    }
    for d in dirs {
        poly = poly.clip_half_plane(d, h)?;
        poly = poly.clip_half_plane(-d, h)?;
    }
    Ok(poly)
}

/// Region of sensing of a slab layout: the intersection of the projection
/// slabs. Four equiangular projections give a regular octagon of apothem D/2,
/// two orthogonal projections a square of side D.
pub fn ros_polygon(layout: &BeamLayout) -> Result<ConvexPolygon> {
    slab_polygon(layout.n_projections, layout.distance)
}

/// Parametric extent `[t0, t1]` of segment `a -> b` inside `rect`
/// (Liang-Barsky slab clipping). `None` when disjoint or a measure-zero touch.
pub fn clip_params_rect(a: Point, b: Point, rect: &Rect) -> Option<(f64, f64)> {
    let d = b - a;
    let mut t0 = 0.0_f64;
    let mut t1 = 1.0_f64;
    for (p, dp, lo, hi) in [(a.x, d.x, rect.xmin, rect.xmax), (a.y, d.y, rect.ymin, rect.ymax)] {
        if dp == 0.0 {
            let tol = edge_tol(p, lo, hi);
            if p < lo - tol || p > hi + tol {
                return None;
            }
        } else {
            let inv = 1.0 / dp;
            let (u, v) = ((lo - p) * inv, (hi - p) * inv);
            let (u, v) = if u <= v { (u, v) } else { (v, u) };
            t0 = t0.max(u);
            t1 = t1.min(v);
        }
    }
    (t1 - t0 > CONTACT_TOL).then_some((t0, t1))
}

fn edge_tol(p: f64, lo: f64, hi: f64) -> f64 {
    1e-12 * p.abs().max(lo.abs()).max(hi.abs()).max(1.0)
}

/// True when an axis-parallel segment lies on one of the rectangle's edges.
fn runs_along_edge(a: Point, b: Point, rect: &Rect) -> bool {
    let on = |p: f64, lo: f64, hi: f64| {
        let tol = edge_tol(p, lo, hi);
        (p - lo).abs() <= tol || (p - hi).abs() <= tol
    };
    (a.x == b.x && on(a.x, rect.xmin, rect.xmax)) || (a.y == b.y && on(a.y, rect.ymin, rect.ymax))
}

/// Length of the intersection of a segment with a rectangle.
///
/// A segment running along an edge is shared equally by the two rectangles
/// meeting there, so it counts half its overlap; a corner touch returns 0.
pub fn segment_rect_chord(a: Point, b: Point, rect: &Rect) -> f64 {
    match clip_params_rect(a, b, rect) {
        Some((t0, t1)) => {
            let w = if runs_along_edge(a, b, rect) { 0.5 } else { 1.0 };
            w * (t1 - t0) * a.distance(b)
        }
        None => 0.0,
    }
}

/// Cyrus-Beck clipping of segment `a -> b` against a convex polygon.
pub fn clip_params_polygon(a: Point, b: Point, poly: &ConvexPolygon) -> Option<(f64, f64)> {
    let d = b - a;
    let v = poly.vertices();
    let mut t0 = 0.0_f64;
    let mut t1 = 1.0_f64;
    for i in 0..v.len() {
        let p = v[i];
        let q = v[(i + 1) % v.len()];
        let e = q - p;
        // inside is e x (x - p) >= 0
        let num = e.cross(a - p);
        let den = e.cross(d);
        if den == 0.0 {
            if num < 0.0 {
                return None;
            }
        } else {
            let t = -num / den;
            if den > 0.0 {
                t0 = t0.max(t);
            } else {
                t1 = t1.min(t);
            }
        }
        if t1 - t0 <= CONTACT_TOL {
            return None;
        }
    }
    Some((t0, t1))
}

/// Length of the intersection of a segment with a convex polygon.
pub fn segment_polygon_chord(a: Point, b: Point, poly: &ConvexPolygon) -> f64 {
    match clip_params_polygon(a, b, poly) {
        Some((t0, t1)) => (t1 - t0) * a.distance(b),
        None => 0.0,
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}
