//! Smoke plume polygons and their rasterization into label masks.
//!
//! Inside-ness is even-odd over all rings of a polygon, with two extra
//! rules that make results platform independent:
//!
//! - an edge counts as crossing a horizontal ray at height `y` when
//!   `y` lies in `[y_min, y_max)` of the edge;
//! - a point lying exactly on an edge is inside.
//!
//! [`rasterize`] evaluates the same predicate at every pixel center, so its
//! output is identical to calling [`point_in_polygon`] per pixel.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::mask::BitMask;
use crate::raster::{GeoTransform, RasterScene};
use crate::time::Timestamp;

/// A map-coordinate point `(x, y)`.
pub type Point = (f64, f64);

/// One annotated plume: exterior ring first, holes after.
#[derive(Debug, Clone, PartialEq)]
pub struct PlumePolygon {
    rings: Vec<Vec<Point>>,
    pub start: Timestamp,
    pub end: Timestamp,
    pub source_id: String,
}

impl PlumePolygon {
    pub fn new(
        rings: Vec<Vec<Point>>,
        start: Timestamp,
        end: Timestamp,
        source_id: impl Into<String>,
    ) -> Result<Self> {
        if rings.is_empty() {
            return Err(Error::Data("polygon has no rings".into()));
        }
        for (k, ring) in rings.iter().enumerate() {
            if ring.len() < 4 {
                return Err(Error::Data(format!("ring {k} has {} points", ring.len())));
            }
            if ring.first() != ring.last() {
                return Err(Error::Data(format!("ring {k} is not closed")));
            }
            if ring.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
                return Err(Error::Data(format!("ring {k} has non-finite coordinates")));
            }
        }
        if ring_area(&rings[0]) == 0.0 {
            return Err(Error::Data("exterior ring has zero area".into()));
        }
        if start > end {
            return Err(Error::Data(format!(
                "start {} after end {}",
                start.0, end.0
            )));
        }
        Ok(Self {
            rings,
            start,
            end,
            source_id: source_id.into(),
        })
    }

    pub fn rings(&self) -> &[Vec<Point>] {
        &self.rings
    }

    pub fn exterior(&self) -> &[Point] {
        &self.rings[0]
    }

    pub fn active_at(&self, t: Timestamp) -> bool {
        self.start <= t && t <= self.end
    }

    /// `(x_min, y_min, x_max, y_max)` of the exterior ring.
    pub fn bbox(&self) -> (f64, f64, f64, f64) {
        self.exterior().iter().fold(
            (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
            |(a, b, c, d), p| (a.min(p.0), b.min(p.1), c.max(p.0), d.max(p.1)),
        )
    }

    fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        self.rings
            .iter()
            .flat_map(|r| r.windows(2).map(|w| (w[0], w[1])))
    }
}

/// Shoelace area (signed) of a closed ring.
pub fn ring_area(ring: &[Point]) -> f64 {
    ring.windows(2)
        .map(|w| w[0].0 * w[1].1 - w[1].0 * w[0].1)
        .sum::<f64>()
        / 2.0
}

/// Plume polygons sharing one CRS.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AnnotationSet {
    pub polygons: Vec<PlumePolygon>,
    pub crs: String,
}

impl AnnotationSet {
    pub fn new(polygons: Vec<PlumePolygon>, crs: impl Into<String>) -> Self {
        Self {
            polygons,
            crs: crs.into(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.polygons.is_empty()
    }

    pub fn len(&self) -> usize {
        self.polygons.len()
    }

    /// Polygons whose validity interval contains `t` (both ends inclusive).
    pub fn match_time(&self, t: Timestamp) -> AnnotationSet {
        AnnotationSet {
            polygons: self
                .polygons
                .iter()
                .filter(|p| p.active_at(t))
                .cloned()
                .collect(),
            crs: self.crs.clone(),
        }
    }

    /// True when any polygon contains `p`.
    pub fn covers(&self, p: Point) -> bool {
        self.polygons.iter().any(|poly| point_in_polygon(p, poly))
    }
}

/// x where the edge `a -> b` meets the horizontal line at `y`.
#[inline]
fn crossing_x(a: Point, b: Point, y: f64) -> f64 {
    a.0 + (y - a.1) * (b.0 - a.0) / (b.1 - a.1)
}

/// Classification of one edge against a horizontal line at `y`.
enum EdgeHit {
    None,
    /// Horizontal edge on the line, spanning `[lo, hi]`.
    Span(f64, f64),
    /// Edge meets the line at `x`; `crosses` applies the half-open rule.
    At { x: f64, crosses: bool },
}

#[inline]
fn classify(a: Point, b: Point, y: f64) -> EdgeHit {
    if a.1 == b.1 {
        if y == a.1 {
            return EdgeHit::Span(a.0.min(b.0), a.0.max(b.0));
        }
        return EdgeHit::None;
    }
    if y < a.1.min(b.1) || y > a.1.max(b.1) {
        return EdgeHit::None;
    }
    EdgeHit::At {
        x: crossing_x(a, b, y),
        crosses: (a.1 > y) != (b.1 > y),
    }
}

/// Even-odd containment over all rings; points on an edge are inside.
pub fn point_in_polygon(p: Point, poly: &PlumePolygon) -> bool {
    let (x, y) = p;
    let mut inside = false;
    for (a, b) in poly.edges() {
        match classify(a, b, y) {
            EdgeHit::None => {}
            EdgeHit::Span(lo, hi) => {
                if lo <= x && x <= hi {
                    return true;
                }
            }
            EdgeHit::At { x: xi, crosses } => {
                if x == xi {
                    return true;
                }
                if crosses && x < xi {
                    inside = !inside;
                }
            }
        }
    }
    inside
}

/// Burns the union of `set` into a mask: a pixel is set when its center
/// lies in any polygon.
pub fn rasterize(set: &AnnotationSet, grid: &GeoTransform, width: usize, height: usize) -> BitMask {
    let mut mask = BitMask::zeros(width, height, *grid);
    if grid.is_axis_aligned() {
        let xs: Vec<f64> = (0..width).map(|c| grid.pixel_center(0, c).0).collect();
        let mut scan = RowScan::default();
        for poly in &set.polygons {
            for row in 0..height {
                let y = grid.pixel_center(row, 0).1;
                scan.load(poly, y);
                if scan.is_empty() {
                    continue;
                }
                for (col, &x) in xs.iter().enumerate() {
                    if !mask.get(row, col) && scan.contains(x) {
                        mask.set(row, col, true);
                    }
                }
            }
        }
    } else {
        for row in 0..height {
            for col in 0..width {
                let p = grid.pixel_center(row, col);
                if set.covers(p) {
                    mask.set(row, col, true);
                }
            }
        }
    }
    mask
}

/// Rasterizes onto a scene's grid after checking that CRSs agree.
pub fn rasterize_scene(set: &AnnotationSet, scene: &RasterScene) -> Result<BitMask> {
    if set.crs != scene.crs {
        return Err(Error::Crs {
            left: set.crs.clone(),
            right: scene.crs.clone(),
        });
    }
    Ok(rasterize(set, &scene.transform, scene.width(), scene.height()))
}

/// Edge intersections of one polygon with one scanline.
#[derive(Default)]
struct RowScan {
    crossings: Vec<f64>,
    on_edge: Vec<f64>,
    spans: Vec<(f64, f64)>,
}

impl RowScan {
    fn load(&mut self, poly: &PlumePolygon, y: f64) {
        self.crossings.clear();
        self.on_edge.clear();
        self.spans.clear();
        for (a, b) in poly.edges() {
            match classify(a, b, y) {
                EdgeHit::None => {}
                EdgeHit::Span(lo, hi) => self.spans.push((lo, hi)),
                EdgeHit::At { x, crosses } => {
                    self.on_edge.push(x);
                    if crosses {
                        self.crossings.push(x);
                    }
                }
            }
        }
        self.crossings.sort_by(f64::total_cmp);
    }

    fn is_empty(&self) -> bool {
        self.on_edge.is_empty() && self.spans.is_empty()
    }

    fn contains(&self, x: f64) -> bool {
        if self.on_edge.iter().any(|&xi| xi == x) || self.spans.iter().any(|&(lo, hi)| lo <= x && x <= hi) {
            return true;
        }
        // crossings strictly to the right of x
        let right = self.crossings.len() - self.crossings.partition_point(|&xi| xi <= x);
        right % 2 == 1
    }
}
