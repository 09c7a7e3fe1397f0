use super::contour::{Bubble, TurningKind, TurningPoint};
use super::grid::TFGrid;
use crate::error::{Error, Result};

/// Partial derivatives of `|H|^2` on the grid of `|H|`.
#[derive(Debug, Clone)]
pub struct PowerGradient {
    pub d_df: TFGrid,
    pub d_dt: TFGrid,
}

impl PowerGradient {
    pub fn new(magnitude: &TFGrid) -> Self {
        let power = magnitude.map(|v| v * v);
        PowerGradient {
            d_df: power.d_df(),
            d_dt: power.d_dt(),
        }
    }

    pub fn same_axes(&self, grid: &TFGrid) -> bool {
        self.d_df.same_axes(grid)
    }
}

/// Turning points closer than this many vertices are treated as noise in the
/// derivative sign and removed in pairs.
const MIN_SEPARATION: usize = 3;

/// Marks the points of `bubble` where `d|H|^2/df` changes sign.
///
/// Along the traversal (superlevel side on the left), `dt/ds` has the sign of
/// `d|H|^2/df`, so these are the points where the curve reverses in time. A
/// point is convex when the superlevel region lies on the side the curve
/// folds back to. Vertices on the window edge are skipped, so clipped
/// bubbles only get turning points on their interior runs.
pub fn turning_points(bubble: &Bubble, grid: &TFGrid) -> Result<Bubble> {
    turning_points_with(bubble, &PowerGradient::new(grid))
}

pub fn turning_points_with(bubble: &Bubble, grad: &PowerGradient) -> Result<Bubble> {
    let n = bubble.polyline.len();
    if n < 3 || bubble.on_edge.len() != n {
        return Err(Error::MalformedBubble(format!("bubble with {n} vertices")));
    }
    let d: Vec<f64> = bubble.polyline.iter().map(|&(t, f)| grad.d_df.interpolate(t, f)).collect();
    let sign = |k: usize| -> f64 {
        if d[k] != 0.0 {
            return d[k].signum();
        }
        // Exactly flat: fall back on the direction of travel.
        let (t0, t1) = (bubble.polyline[k].0, bubble.polyline[(k + 1) % n].0);
        if t1 >= t0 {
            1.0
        } else {
            -1.0
        }
    };

    // Candidate sign changes between vertex k and its successor, both interior.
    let mut cand: Vec<(usize, f64)> = Vec::new();
    for k in 0..n {
        let k1 = (k + 1) % n;
        if bubble.on_edge[k] || bubble.on_edge[k1] {
            continue;
        }
        if sign(k) != sign(k1) {
            cand.push((k, sign(k)));
        }
    }

    // Drop noisy pairs: neighbours in cyclic order within MIN_SEPARATION vertices
    // with no window edge between them.
    let edge_between = |a: usize, b: usize| -> bool {
        let mut k = a;
        while k != b {
            k = (k + 1) % n;
            if bubble.on_edge[k] {
                return true;
            }
        }
        false
    };
    loop {
        let m = cand.len();
        if m < 2 || (!bubble.clipped && m <= 2) {
            break;
        }
        let mut removed = false;
        for i in 0..m {
            let j = (i + 1) % m;
            if j == 0 && bubble.clipped {
                continue;
            }
            let (a, b) = (cand[i].0, cand[j].0);
            let gap = (b + n - a) % n;
            if gap < MIN_SEPARATION && !edge_between(a, b) {
                let (hi, lo) = if i > j { (i, j) } else { (j, i) };
                cand.remove(hi);
                cand.remove(lo);
                removed = true;
                break;
            }
        }
        if !removed {
            break;
        }
    }

    let mut out = bubble.clone();
    out.turning_points = cand
        .iter()
        .map(|&(k, s_before)| {
            let k1 = (k + 1) % n;
            let (p0, p1) = (bubble.polyline[k], bubble.polyline[k1]);
            let w = if d[k] != d[k1] { (d[k] / (d[k] - d[k1])).clamp(0.0, 1.0) } else { 0.5 };
            let (t, f) = (p0.0 + w * (p1.0 - p0.0), p0.1 + w * (p1.1 - p0.1));
            let kind = if s_before * grad.d_dt.interpolate(t, f) < 0.0 {
                TurningKind::Convex
            } else {
                TurningKind::Concave
            };
            TurningPoint {
                t,
                f,
                kind,
                vertex: if w > 0.5 { k1 } else { k },
            }
        })
        .collect();
    Ok(out)
}
