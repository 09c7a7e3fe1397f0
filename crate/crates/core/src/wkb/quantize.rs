use super::contour::{cell_area_above, extract_level_set, Bubble, PaddedGrid};
use super::grid::TFGrid;
use crate::error::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantizedLevel {
    pub sigma: f64,
    pub n: usize,
}

/// How the `n + 1/2` rule counts area when several bubbles share a level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AreaMode {
    /// Total area of the superlevel set.
    #[default]
    Total,
    /// Each bubble is quantized on its own; the count at a level is
    /// `sum_b floor(A_b + 1/2)` over outer bubbles, holes subtracted.
    PerBubble,
}

const BINS: usize = 4096;

/// `A(sigma)`, the area of `{|H| >= sigma}` inside the window, with the same
/// piecewise-linear boundary as [`extract_level_set`].
///
/// Cells entirely above a level are counted from a sorted table of cell
/// minima; only the cells the level cuts through are integrated, found via
/// a histogram index over each cell's value range.
pub struct AreaFunction {
    padded: PaddedGrid,
    /// Interior cells (padded coordinates) and their value range.
    cells: Vec<(u32, u32)>,
    cell_lo: Vec<f64>,
    cell_hi: Vec<f64>,
    /// Cell minima ascending, with the area of all cells at or after each
    /// position.
    sorted_lo: Vec<f64>,
    tail_area: Vec<f64>,
    vmin: f64,
    vmax: f64,
    bin_start: Vec<u32>,
    bin_cells: Vec<u32>,
    /// Samples descending, for bracketing.
    sorted_values: Vec<f64>,
    cell_area: f64,
    window_area: f64,
}

impl AreaFunction {
    pub fn new(grid: &TFGrid) -> Self {
        let padded = PaddedGrid::new(grid, grid.min() - 1.0);
        let (px, py) = (padded.xs.len(), padded.ys.len());
        let mut cells = Vec::with_capacity((px - 3) * (py - 3));
        let mut cell_lo = Vec::with_capacity(cells.capacity());
        let mut cell_hi = Vec::with_capacity(cells.capacity());
        let mut areas = Vec::with_capacity(cells.capacity());
        for a in 1..px - 2 {
            for b in 1..py - 2 {
                let v = padded.corners(a, b);
                cells.push((a as u32, b as u32));
                cell_lo.push(v.iter().copied().fold(f64::INFINITY, f64::min));
                cell_hi.push(v.iter().copied().fold(f64::NEG_INFINITY, f64::max));
                areas.push((padded.xs[a + 1] - padded.xs[a]) * (padded.ys[b + 1] - padded.ys[b]));
            }
        }
        let mut order: Vec<usize> = (0..cells.len()).collect();
        order.sort_by(|&i, &j| cell_lo[i].total_cmp(&cell_lo[j]));
        let sorted_lo: Vec<f64> = order.iter().map(|&i| cell_lo[i]).collect();
        let mut tail_area = vec![0.0; order.len() + 1];
        for k in (0..order.len()).rev() {
            tail_area[k] = tail_area[k + 1] + areas[order[k]];
        }

        let vmin = grid.min();
        let vmax = grid.max();
        let bin = |v: f64| bin_of(v, vmin, vmax);
        let mut counts = vec![0u32; BINS + 1];
        for c in 0..cells.len() {
            for b in bin(cell_lo[c])..=bin(cell_hi[c]) {
                counts[b + 1] += 1;
            }
        }
        for b in 0..BINS {
            counts[b + 1] += counts[b];
        }
        let bin_start = counts.clone();
        let mut fill = counts;
        let mut bin_cells = vec![0u32; bin_start[BINS] as usize];
        for c in 0..cells.len() {
            for b in bin(cell_lo[c])..=bin(cell_hi[c]) {
                bin_cells[fill[b] as usize] = c as u32;
                fill[b] += 1;
            }
        }

        let mut sorted_values = grid.values.clone();
        sorted_values.sort_by(|a, b| b.total_cmp(a));
        AreaFunction {
            padded,
            cells,
            cell_lo,
            cell_hi,
            sorted_lo,
            tail_area,
            vmin,
            vmax,
            bin_start,
            bin_cells,
            sorted_values,
            cell_area: grid.cell_area(),
            window_area: grid.window_area(),
        }
    }

    pub fn window_area(&self) -> f64 {
        self.window_area
    }

    pub fn max_value(&self) -> f64 {
        self.vmax
    }

    pub fn eval(&self, sigma: f64) -> f64 {
        if sigma <= self.vmin {
            return self.window_area;
        }
        if sigma > self.vmax {
            return 0.0;
        }
        let k = self.sorted_lo.partition_point(|&lo| lo < sigma);
        let mut area = self.tail_area[k];
        let b = bin_of(sigma, self.vmin, self.vmax);
        for &c in &self.bin_cells[self.bin_start[b] as usize..self.bin_start[b + 1] as usize] {
            let c = c as usize;
            if self.cell_lo[c] < sigma && self.cell_hi[c] >= sigma {
                let (a, bb) = self.cells[c];
                area += cell_area_above(&self.padded, a as usize, bb as usize, sigma);
            }
        }
        area
    }

    /// Rough level whose superlevel set holds `area`, from sample counts.
    fn estimate(&self, area: f64, offset: isize) -> f64 {
        let k = (area / self.cell_area).round() as isize + offset;
        let k = k.clamp(0, self.sorted_values.len() as isize - 1) as usize;
        self.sorted_values[k]
    }

    /// Level `sigma` with `A(sigma) = target`, by bisection.
    pub fn solve(&self, target: f64) -> Result<f64> {
        if !(target > 0.0 && target < self.window_area) {
            return Err(Error::input(format!(
                "area {target} outside (0, {})",
                self.window_area
            )));
        }
        // Bracket from the sample-count estimate, widening until it holds.
        let mut margin = (self.sorted_values.len() as f64).sqrt() as isize + 4;
        let (mut lo, mut hi);
        loop {
            lo = self.estimate(target, margin);
            hi = self.estimate(target, -margin);
            let (alo, ahi) = (self.eval(lo), self.eval(hi));
            if alo >= target && ahi <= target {
                break;
            }
            if margin as usize > self.sorted_values.len() {
                lo = self.vmin;
                hi = self.vmax;
                break;
            }
            margin *= 4;
        }
        let (mut a_lo, mut a_hi) = (self.eval(lo), self.eval(hi));
        for _ in 0..200 {
            if hi - lo <= 1e-13 * self.vmax.abs().max(1e-300) {
                break;
            }
            let mid = 0.5 * (lo + hi);
            let a = self.eval(mid);
            if a > a_lo * (1.0 + 1e-12) + 1e-12 || a < a_hi * (1.0 - 1e-12) - 1e-12 {
                return Err(Error::Resolution(format!(
                    "area not monotone near level {mid}; increase the oversampling"
                )));
            }
            if a >= target {
                lo = mid;
                a_lo = a;
            } else {
                hi = mid;
                a_hi = a;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

fn bin_of(v: f64, vmin: f64, vmax: f64) -> usize {
    if vmax <= vmin {
        return 0;
    }
    (((v - vmin) / (vmax - vmin) * BINS as f64) as isize).clamp(0, BINS as isize - 1) as usize
}

/// Levels `sigma_n` with `A(sigma_n) = n + 1/2` for `n = 0, 1, ...`, as long
/// as the level lies in `(0, sigma_max]` and `n + 1/2` is below the window
/// area. Returned in descending order of `sigma`.
pub fn quantized_levels(grid: &TFGrid, sigma_max: f64) -> Result<Vec<QuantizedLevel>> {
    quantized_levels_with(&AreaFunction::new(grid), sigma_max)
}

pub fn quantized_levels_with(area: &AreaFunction, sigma_max: f64) -> Result<Vec<QuantizedLevel>> {
    if !(sigma_max > 0.0) {
        return Err(Error::config("sigma_max must be positive"));
    }
    let floor = area.eval(sigma_max.min(area.max_value()));
    // Only positive levels count.
    let top = area.eval(f64::MIN_POSITIVE);
    let ns: Vec<usize> = (0..)
        .map(|n: usize| n)
        .take_while(|&n| (n as f64 + 0.5) < top)
        .filter(|&n| (n as f64 + 0.5) >= floor)
        .collect();
    let levels: Vec<QuantizedLevel> = ns
        .par_iter()
        .map(|&n| Ok(QuantizedLevel { sigma: area.solve(n as f64 + 0.5)?, n }))
        .collect::<Result<_>>()?;
    for w in levels.windows(2) {
        if w[1].sigma > w[0].sigma {
            return Err(Error::Resolution(format!(
                "area not monotone between levels {} and {}; increase the oversampling",
                w[0].sigma, w[1].sigma
            )));
        }
    }
    Ok(levels)
}

/// Per-bubble area count at one level: outer bubbles with the holes they
/// contain subtracted, each contributing `floor(A + 1/2)` states.
pub fn per_bubble_count(bubbles: &[Bubble]) -> usize {
    let mut areas: Vec<f64> = bubbles.iter().filter(|b| !b.hole).map(|b| b.area).collect();
    let outers: Vec<&Bubble> = bubbles.iter().filter(|b| !b.hole).collect();
    for h in bubbles.iter().filter(|b| b.hole) {
        let (t, f) = h.polyline[0];
        // The innermost outer bubble containing the hole owns it.
        if let Some((k, _)) = outers
            .iter()
            .enumerate()
            .filter(|(_, o)| o.contains(t, f))
            .min_by(|a, b| a.1.area.total_cmp(&b.1.area))
        {
            areas[k] -= h.area;
        }
    }
    areas.iter().map(|a| (a + 0.5).floor().max(0.0) as usize).sum()
}

/// Per-bubble variant of [`quantized_levels`]: the `k`-th level is where the
/// per-bubble count first reaches `k + 1` while sweeping down from the top.
/// Located on a sweep of `sweep` levels and refined by `refine` bisection
/// steps on the contour extraction.
pub fn quantized_levels_per_bubble(grid: &TFGrid, sweep: usize, refine: usize) -> Result<Vec<QuantizedLevel>> {
    if sweep < 2 {
        return Err(Error::config("sweep needs at least 2 levels"));
    }
    let (lo, hi) = (grid.min().max(f64::MIN_POSITIVE), grid.max());
    let count = |s: f64| -> Result<usize> { Ok(per_bubble_count(&extract_level_set(grid, s)?)) };
    let levels: Vec<f64> = (0..sweep).map(|k| hi - (hi - lo) * (k as f64 + 0.5) / sweep as f64).collect();
    let counts: Vec<usize> = levels.par_iter().map(|&s| count(s)).collect::<Result<_>>()?;
    let mut out = Vec::new();
    let mut prev_level = hi;
    let mut prev_count = 0;
    for (&s, &c) in levels.iter().zip(&counts) {
        while prev_count < c {
            // Refine the step from prev_count to prev_count + 1 in (s, prev_level).
            let (mut a, mut b) = (s, prev_level);
            for _ in 0..refine {
                let mid = 0.5 * (a + b);
                if count(mid)? > prev_count {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            out.push(QuantizedLevel {
                sigma: 0.5 * (a + b),
                n: out.len(),
            });
            prev_count += 1;
        }
        prev_level = s;
        prev_count = prev_count.max(c);
    }
    Ok(out)
}
