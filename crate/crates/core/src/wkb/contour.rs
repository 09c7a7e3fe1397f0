use super::grid::TFGrid;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TurningKind {
    Convex,
    Concave,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurningPoint {
    pub t: f64,
    pub f: f64,
    pub kind: TurningKind,
    /// Polyline vertex at which the branch direction in `t` reverses.
    pub vertex: usize,
}

/// Closed level curve of a time-frequency grid.
///
/// Vertices run with the superlevel region on the left, so outer boundaries
/// are counterclockwise in the (t, f) plane and holes clockwise. The closing
/// edge from the last vertex back to the first is implicit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bubble {
    pub polyline: Vec<(f64, f64)>,
    /// Vertex lies on the window edge (the curve was closed along it).
    pub on_edge: Vec<bool>,
    pub level: f64,
    /// Enclosed area, nonnegative.
    pub area: f64,
    /// Boundary of a region below the level inside a superlevel region.
    pub hole: bool,
    pub clipped: bool,
    pub turning_points: Vec<TurningPoint>,
}

impl Bubble {
    /// Area counted with sign: negative for holes.
    pub fn signed_area(&self) -> f64 {
        if self.hole {
            -self.area
        } else {
            self.area
        }
    }

    pub fn t_extent(&self) -> (f64, f64) {
        extent(self.polyline.iter().map(|p| p.0))
    }

    pub fn f_extent(&self) -> (f64, f64) {
        extent(self.polyline.iter().map(|p| p.1))
    }

    /// Even-odd containment test.
    pub fn contains(&self, t: f64, f: f64) -> bool {
        point_in_polygon(&self.polyline, t, f)
    }
}

fn extent(xs: impl Iterator<Item = f64>) -> (f64, f64) {
    xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)))
}

/// Shoelace area, positive for counterclockwise vertex order.
pub fn signed_polygon_area(poly: &[(f64, f64)]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    let mut s = 0.0;
    for k in 0..n {
        let (x0, y0) = poly[k];
        let (x1, y1) = poly[(k + 1) % n];
        s += x0 * y1 - x1 * y0;
    }
    s / 2.0
}

pub fn point_in_polygon(poly: &[(f64, f64)], x: f64, y: f64) -> bool {
    let n = poly.len();
    let mut inside = false;
    let mut j = n.wrapping_sub(1);
    for i in 0..n {
        let (xi, yi) = poly[i];
        let (xj, yj) = poly[j];
        if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}

/// The grid framed by two extra rings: one on the window edge repeating the
/// outermost samples, and one just outside holding a value below every
/// level, so that every contour closes.
pub(crate) struct PaddedGrid {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub values: Vec<f64>,
    pub window: (f64, f64, f64, f64),
}

impl PaddedGrid {
    pub fn new(grid: &TFGrid, floor: f64) -> Self {
        let axis_points = |a: &super::grid::Axis| {
            let eps = 1e-9 * a.step.abs();
            let mut v = Vec::with_capacity(a.len + 4);
            v.push(a.lo() - eps);
            v.push(a.lo());
            v.extend((0..a.len).map(|i| a.at(i)));
            v.push(a.hi());
            v.push(a.hi() + eps);
            v
        };
        let xs = axis_points(&grid.t);
        let ys = axis_points(&grid.f);
        let (nt, nf) = (grid.t.len, grid.f.len);
        let (px, py) = (xs.len(), ys.len());
        let mut values = vec![floor; px * py];
        for a in 1..px - 1 {
            let i = a.saturating_sub(2).min(nt - 1);
            for b in 1..py - 1 {
                let j = b.saturating_sub(2).min(nf - 1);
                values[a * py + b] = grid.get(i, j);
            }
        }
        PaddedGrid {
            xs,
            ys,
            values,
            window: (grid.t.lo(), grid.t.hi(), grid.f.lo(), grid.f.hi()),
        }
    }

    #[inline]
    pub fn v(&self, a: usize, b: usize) -> f64 {
        self.values[a * self.ys.len() + b]
    }

    /// Corner values of cell `(a, b)` in counterclockwise order starting at
    /// the lower-left corner.
    #[inline]
    pub fn corners(&self, a: usize, b: usize) -> [f64; 4] {
        [self.v(a, b), self.v(a + 1, b), self.v(a + 1, b + 1), self.v(a, b + 1)]
    }

    #[inline]
    pub fn corner_points(&self, a: usize, b: usize) -> [(f64, f64); 4] {
        let (x0, x1, y0, y1) = (self.xs[a], self.xs[a + 1], self.ys[b], self.ys[b + 1]);
        [(x0, y0), (x1, y0), (x1, y1), (x0, y1)]
    }
}

/// Crossings of a level on the four edges of a cell, as (edge, is_down)
/// pairs in counterclockwise order, edge `k` joining corner `k` to `k + 1`.
/// A down crossing goes from above to below the level.
#[inline]
fn crossings(above: [bool; 4]) -> ([(usize, bool); 4], usize) {
    let mut out = [(0, false); 4];
    let mut n = 0;
    for k in 0..4 {
        let (a, b) = (above[k], above[(k + 1) % 4]);
        if a != b {
            out[n] = (k, a);
            n += 1;
        }
    }
    (out, n)
}

#[inline]
fn lerp_point(p: (f64, f64), q: (f64, f64), vp: f64, vq: f64, level: f64) -> (f64, f64) {
    let s = (level - vp) / (vq - vp);
    (p.0 + s * (q.0 - p.0), p.1 + s * (q.1 - p.1))
}

/// Segments of the level curve in one cell, each as (start edge, end edge)
/// with the superlevel side on the left. Saddles are resolved by the cell
/// centre average.
#[inline]
pub(crate) fn cell_segments(v: [f64; 4], level: f64) -> ([(usize, usize); 2], usize) {
    let above = [v[0] >= level, v[1] >= level, v[2] >= level, v[3] >= level];
    let (cr, n) = crossings(above);
    let mut segs = [(0, 0); 2];
    if n == 0 {
        return (segs, 0);
    }
    let centre_high = (v[0] + v[1] + v[2] + v[3]) / 4.0 >= level;
    let mut m = 0;
    for k in 0..n {
        let (edge, down) = cr[k];
        if !down {
            continue;
        }
        let partner = if n == 4 && centre_high { cr[(k + 1) % n] } else { cr[(k + n - 1) % n] };
        segs[m] = (edge, partner.0);
        m += 1;
    }
    (segs, m)
}

/// Area of the part of cell `(a, b)` at or above `level`, consistent with
/// the contours traced by [`extract_level_set`].
pub(crate) fn cell_area_above(g: &PaddedGrid, a: usize, b: usize, level: f64) -> f64 {
    let v = g.corners(a, b);
    let p = g.corner_points(a, b);
    let above = [v[0] >= level, v[1] >= level, v[2] >= level, v[3] >= level];
    let edge_point = |k: usize| lerp_point(p[k], p[(k + 1) % 4], v[k], v[(k + 1) % 4], level);
    let mut poly: [(f64, f64); 8] = [(0.0, 0.0); 8];
    let mut n = 0;
    let mut cross = [(0.0, 0.0); 4];
    let mut nc = 0;
    for k in 0..4 {
        if above[k] {
            poly[n] = p[k];
            n += 1;
        }
        if above[k] != above[(k + 1) % 4] {
            let q = edge_point(k);
            poly[n] = q;
            n += 1;
            cross[nc] = q;
            nc += 1;
        }
    }
    let mut area = signed_polygon_area(&poly[..n]);
    if nc == 4 && (v[0] + v[1] + v[2] + v[3]) / 4.0 < level {
        // Two separate corners: drop the central quadrilateral.
        area -= signed_polygon_area(&cross);
    }
    area
}

/// Closed level curves `|H| = level` of a magnitude grid.
///
/// Curves leaving the window are closed along the window edge and flagged
/// `clipped`; their vertices on the edge are marked in `on_edge`. Bubbles
/// are returned by decreasing area. The signed areas sum to the area of the
/// superlevel set.
pub fn extract_level_set(grid: &TFGrid, level: f64) -> Result<Vec<Bubble>> {
    if !(level > 0.0) || !level.is_finite() {
        return Err(Error::config(format!("level must be positive, got {level}")));
    }
    if level > grid.max() {
        return Ok(Vec::new());
    }
    let floor = grid.min().min(0.0) - level.abs() - 1.0;
    let g = PaddedGrid::new(grid, floor);
    let (px, py) = (g.xs.len(), g.ys.len());

    // Edge keys: 2 * point index, +1 for edges along f.
    let cell_edge_key = |a: usize, b: usize, k: usize| -> usize {
        match k {
            0 => 2 * (a * py + b),
            1 => 2 * ((a + 1) * py + b) + 1,
            2 => 2 * (a * py + b + 1),
            _ => 2 * (a * py + b) + 1,
        }
    };
    let mut segments: Vec<(usize, usize)> = Vec::new();
    for a in 0..px - 1 {
        for b in 0..py - 1 {
            let v = g.corners(a, b);
            let (segs, m) = cell_segments(v, level);
            for &(s, e) in &segs[..m] {
                segments.push((cell_edge_key(a, b, s), cell_edge_key(a, b, e)));
            }
        }
    }
    segments.sort_unstable();

    let key_point = |key: usize| -> (f64, f64) {
        let pt = key / 2;
        let (a, b) = (pt / py, pt % py);
        let (a2, b2) = if key.is_multiple_of(2) { (a + 1, b) } else { (a, b + 1) };
        lerp_point((g.xs[a], g.ys[b]), (g.xs[a2], g.ys[b2]), g.v(a, b), g.v(a2, b2), level)
    };
    let (tlo, thi, flo, fhi) = g.window;

    let mut used = vec![false; segments.len()];
    let mut bubbles = Vec::new();
    for first in 0..segments.len() {
        if used[first] {
            continue;
        }
        let mut polyline = Vec::new();
        let mut on_edge = Vec::new();
        let mut idx = first;
        loop {
            if used[idx] {
                return Err(Error::Numerical("contour tracing revisited a segment".into()));
            }
            used[idx] = true;
            let (start, end) = segments[idx];
            let (t, f) = key_point(start);
            let edge = t <= tlo || t >= thi || f <= flo || f >= fhi;
            let p = (t.clamp(tlo, thi), f.clamp(flo, fhi));
            if polyline.last() != Some(&p) {
                polyline.push(p);
                on_edge.push(edge);
            } else if edge {
                *on_edge.last_mut().unwrap() = true;
            }
            match segments.binary_search_by(|s| s.0.cmp(&end)) {
                Ok(next) if next == first => break,
                Ok(next) => idx = next,
                Err(_) => return Err(Error::Numerical("open contour in padded grid".into())),
            }
        }
        while polyline.len() > 1 && polyline.first() == polyline.last() {
            polyline.pop();
            on_edge.pop();
        }
        if polyline.len() < 3 {
            continue;
        }
        let signed = signed_polygon_area(&polyline);
        bubbles.push(Bubble {
            clipped: on_edge.iter().any(|&e| e),
            polyline,
            on_edge,
            level,
            area: signed.abs(),
            hole: signed < 0.0,
            turning_points: Vec::new(),
        });
    }
    bubbles.sort_by(|a, b| b.area.total_cmp(&a.area));
    Ok(bubbles)
}

/// Sum of signed bubble areas: the area of `{|H| >= level}`.
pub fn total_area(bubbles: &[Bubble]) -> f64 {
    bubbles.iter().map(Bubble::signed_area).sum()
}

#[cfg(test)]
mod tests {
    use super::super::grid::{Axis, TFGrid};
    use super::*;
    use std::f64::consts::PI;

    pub(crate) fn ellipse_grid(a: f64, b: f64, nt: usize, nf: usize) -> TFGrid {
        let t = Axis::covering(-0.5, 63.5, nt);
        let f = Axis::covering(-0.5, 0.5, nf);
        TFGrid::from_fn(t, f, |t, f| 1.0 - ((t - 31.5) / a).powi(2) - (f / b).powi(2)).unwrap()
    }

    #[test]
    fn circle_area_on_paraboloid() {
        // 1 - (x^2 + y^2) / r^2 = 1/2 encloses pi r^2 / 2.
        let (a, b) = (20.0, 0.3);
        let g = ellipse_grid(a, b, 256, 256);
        let bubbles = extract_level_set(&g, 0.5).unwrap();
        assert_eq!(bubbles.len(), 1);
        let bub = &bubbles[0];
        let exact = PI * a * b / 2.0;
        assert!((bub.area - exact).abs() < 0.01 * exact, "{} vs {exact}", bub.area);
        assert!(!bub.hole && !bub.clipped);
        assert!(signed_polygon_area(&bub.polyline) > 0.0);
        assert!(bub.contains(31.5, 0.0) && !bub.contains(5.0, 0.0));
    }

    #[test]
    fn level_above_max_is_empty() {
        let g = ellipse_grid(20.0, 0.3, 64, 64);
        assert!(extract_level_set(&g, 1.5).unwrap().is_empty());
        assert!(extract_level_set(&g, 0.0).is_err());
    }

    #[test]
    fn level_below_min_covers_the_window() {
        let g = ellipse_grid(20.0, 0.3, 64, 64).map(|v| v + 10.0);
        let b = extract_level_set(&g, 0.1).unwrap();
        assert_eq!(b.len(), 1);
        assert!(b[0].clipped);
        assert!((b[0].area - 64.0).abs() < 1e-6);
    }

    #[test]
    fn clipped_half_disc() {
        // Centre on the lower band edge: half of the ellipse is inside.
        let t = Axis::covering(-0.5, 63.5, 256);
        let f = Axis::covering(-0.5, 0.5, 256);
        let (a, b) = (20.0, 0.3);
        let g = TFGrid::from_fn(t, f, |t, f| 1.0 - ((t - 31.5) / a).powi(2) - ((f + 0.5) / b).powi(2)).unwrap();
        let bubbles = extract_level_set(&g, 0.5).unwrap();
        assert_eq!(bubbles.len(), 1);
        let exact = PI * a * b / 4.0;
        assert!(bubbles[0].clipped);
        assert!((bubbles[0].area - exact).abs() < 0.01 * exact);
        assert!(bubbles[0].on_edge.iter().any(|&e| e) && !bubbles[0].on_edge.iter().all(|&e| e));
    }

    #[test]
    fn annulus_has_a_hole() {
        let t = Axis::covering(-0.5, 63.5, 256);
        let f = Axis::covering(-0.5, 0.5, 256);
        let g = TFGrid::from_fn(t, f, |t, f| {
            let r = (((t - 31.5) / 25.0).powi(2) + (f / 0.4).powi(2)).sqrt();
            (-(r - 0.6).powi(2) / 0.02).exp()
        })
        .unwrap();
        let bubbles = extract_level_set(&g, 0.5).unwrap();
        assert_eq!(bubbles.len(), 2);
        assert!(!bubbles[0].hole && bubbles[1].hole);
        // Annulus 0.6 +- sqrt(0.02 ln 2) in normalized radius.
        let w = (0.02 * 2f64.ln()).sqrt();
        let exact = PI * 25.0 * 0.4 * ((0.6 + w).powi(2) - (0.6 - w).powi(2));
        assert!((total_area(&bubbles) - exact).abs() < 0.01 * exact);
    }

    #[test]
    fn cell_areas_sum_to_contour_area() {
        let g = ellipse_grid(20.0, 0.3, 96, 80).map(|v| v + 0.05 * v.sin());
        for level in [0.2, 0.5, 0.9] {
            let p = PaddedGrid::new(&g, -10.0);
            let mut cells = 0.0;
            for a in 1..p.xs.len() - 2 {
                for b in 1..p.ys.len() - 2 {
                    cells += cell_area_above(&p, a, b, level);
                }
            }
            let contour = total_area(&extract_level_set(&g, level).unwrap());
            assert!((cells - contour).abs() < 1e-9, "{cells} vs {contour}");
        }
    }

    #[test]
    fn saddle_resolution_matches_centre() {
        // Corners 0 and 2 high: centre high joins them.
        let (segs, m) = cell_segments([1.0, 0.0, 1.0, 0.0], 0.4);
        assert_eq!(m, 2);
        assert_eq!(&segs[..m], &[(0, 1), (2, 3)]);
        let (segs, m) = cell_segments([1.0, 0.0, 1.0, 0.0], 0.6);
        assert_eq!(&segs[..m], &[(0, 3), (2, 1)]);
    }
}
