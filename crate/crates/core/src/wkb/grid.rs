use crate::channel::{transfer_function, ChannelModel};
use crate::error::{Error, Result};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub const DEFAULT_OVERSAMPLE: usize = 4;

/// Uniform, cell-centred axis: sample `i` sits at `start + i * step` and
/// owns the cell `[at(i) - step/2, at(i) + step/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub start: f64,
    pub step: f64,
    pub len: usize,
}

impl Axis {
    pub fn new(start: f64, step: f64, len: usize) -> Self {
        Axis { start, step, len }
    }

    /// `len` cells covering `[lo, hi)`.
    pub fn covering(lo: f64, hi: f64, len: usize) -> Self {
        let step = (hi - lo) / len as f64;
        Axis {
            start: lo + step / 2.0,
            step,
            len,
        }
    }

    pub fn at(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    pub fn lo(&self) -> f64 {
        self.start - self.step / 2.0
    }

    pub fn hi(&self) -> f64 {
        self.lo() + self.len as f64 * self.step
    }

    /// Fractional sample index of coordinate `x`.
    pub fn index_of(&self, x: f64) -> f64 {
        (x - self.start) / self.step
    }

    pub fn same_as(&self, other: &Axis) -> bool {
        let tol = 1e-9 * self.step.abs().max(other.step.abs());
        self.len == other.len && (self.start - other.start).abs() <= tol && (self.step - other.step).abs() <= tol
    }
}

/// Standard time axis for an `n`-sample window (`ts = 1`) at `os` samples
/// per time step. The window is `[-1/2, n - 1/2)`.
pub fn time_axis(n: usize, os: usize) -> Axis {
    Axis::covering(-0.5, n as f64 - 0.5, n * os)
}

/// Standard frequency axis: `n * os` bins across `[-1/2, 1/2)`.
pub fn freq_axis(n: usize, os: usize) -> Axis {
    Axis::covering(-0.5, 0.5, n * os)
}

/// Real-valued grid over (t, f), stored row-major with `t` as the slow index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TFGrid {
    pub t: Axis,
    pub f: Axis,
    pub values: Vec<f64>,
}

impl TFGrid {
    pub fn new(t: Axis, f: Axis, values: Vec<f64>) -> Result<Self> {
        if t.len == 0 || f.len == 0 || values.len() != t.len * f.len {
            return Err(Error::input(format!(
                "grid of {} values does not match axes {} x {}",
                values.len(),
                t.len,
                f.len
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("grid contains non-finite values"));
        }
        Ok(TFGrid { t, f, values })
    }

    pub fn from_fn(t: Axis, f: Axis, func: impl Fn(f64, f64) -> f64 + Sync) -> Result<Self> {
        let nf = f.len;
        let mut values = vec![0.0; t.len * nf];
        values.par_chunks_mut(nf).enumerate().for_each(|(i, row)| {
            let ti = t.at(i);
            for (j, v) in row.iter_mut().enumerate() {
                *v = func(ti, f.at(j));
            }
        });
        TFGrid::new(t, f, values)
    }

    /// Rescales normalized axes (`ts = 1`) to seconds and hertz. Areas are
    /// unchanged.
    pub fn scaled(mut self, ts: f64) -> TFGrid {
        self.t.start *= ts;
        self.t.step *= ts;
        self.f.start /= ts;
        self.f.step /= ts;
        self
    }

    /// Block length `n` implied by the window, whose area is `n` time-bandwidth
    /// units.
    pub fn block_len(&self) -> usize {
        self.window_area().round() as usize
    }

    /// Sampling time implied by the window.
    pub fn ts(&self) -> f64 {
        (self.t.hi() - self.t.lo()) / self.block_len() as f64
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.f.len + j]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Area of one grid cell.
    pub fn cell_area(&self) -> f64 {
        self.t.step * self.f.step
    }

    /// Area of the whole window.
    pub fn window_area(&self) -> f64 {
        self.cell_area() * self.values.len() as f64
    }

    pub fn same_axes(&self, other: &TFGrid) -> bool {
        self.t.same_as(&other.t) && self.f.same_as(&other.f)
    }

    pub fn map(&self, func: impl Fn(f64) -> f64) -> TFGrid {
        TFGrid {
            t: self.t,
            f: self.f,
            values: self.values.iter().map(|&v| func(v)).collect(),
        }
    }

    /// Bilinear interpolation, clamped to the outermost samples.
    pub fn interpolate(&self, t: f64, f: f64) -> f64 {
        let (i0, i1, wt) = bracket(self.t.index_of(t), self.t.len);
        let (j0, j1, wf) = bracket(self.f.index_of(f), self.f.len);
        let a = self.get(i0, j0) * (1.0 - wf) + self.get(i0, j1) * wf;
        let b = self.get(i1, j0) * (1.0 - wf) + self.get(i1, j1) * wf;
        a * (1.0 - wt) + b * wt
    }

    /// Partial derivative along `f`: central differences inside, one-sided
    /// at the band edges.
    pub fn d_df(&self) -> TFGrid {
        let nf = self.f.len;
        let h = self.f.step;
        let mut out = vec![0.0; self.values.len()];
        out.par_chunks_mut(nf).enumerate().for_each(|(i, row)| {
            let src = &self.values[i * nf..(i + 1) * nf];
            diff_line(src, h, |j, v| row[j] = v);
        });
        TFGrid {
            t: self.t,
            f: self.f,
            values: out,
        }
    }

    /// Partial derivative along `t`, same stencil as [`TFGrid::d_df`].
    pub fn d_dt(&self) -> TFGrid {
        let (nt, nf) = (self.t.len, self.f.len);
        let h = self.t.step;
        let mut out = vec![0.0; self.values.len()];
        let mut col = vec![0.0; nt];
        for j in 0..nf {
            for (i, c) in col.iter_mut().enumerate() {
                *c = self.values[i * nf + j];
            }
            diff_line(&col, h, |i, v| out[i * nf + j] = v);
        }
        TFGrid {
            t: self.t,
            f: self.f,
            values: out,
        }
    }
}

fn bracket(x: f64, len: usize) -> (usize, usize, f64) {
    if len == 1 {
        return (0, 0, 0.0);
    }
    let x = x.clamp(0.0, (len - 1) as f64);
    let i0 = (x.floor() as usize).min(len - 2);
    (i0, i0 + 1, x - i0 as f64)
}

fn diff_line(src: &[f64], h: f64, mut put: impl FnMut(usize, f64)) {
    let n = src.len();
    if n < 2 {
        for j in 0..n {
            put(j, 0.0);
        }
        return;
    }
    put(0, (src[1] - src[0]) / h);
    for j in 1..n - 1 {
        put(j, (src[j + 1] - src[j - 1]) / (2.0 * h));
    }
    put(n - 1, (src[n - 1] - src[n - 2]) / h);
}

/// `|H(t, f)|` on the standard window of an `n`-sample block, axes in seconds and hertz.
pub fn magnitude_grid(model: &ChannelModel, n: usize, ts: f64) -> Result<TFGrid> {
    magnitude_grid_with(model, n, ts, DEFAULT_OVERSAMPLE)
}

/// [`magnitude_grid`] with `oversample` grid points per time sample and per
/// `1/n` of frequency.
pub fn magnitude_grid_with(model: &ChannelModel, n: usize, ts: f64, oversample: usize) -> Result<TFGrid> {
    if n == 0 || oversample == 0 {
        return Err(Error::config("grid size and oversampling must be positive"));
    }
    if !(ts > 0.0) {
        return Err(Error::config("sampling time must be positive"));
    }
    let t = time_axis(n, oversample);
    let f = freq_axis(n, oversample);
    let grid = match model.taps().filter(|_| !matches!(model, ChannelModel::LineSpread { .. })) {
        Some(taps) => {
            // Separable per tap: h e^{j2 pi nu t} times e^{-j2 pi tau f}.
            let time_factors: Vec<Vec<Complex64>> = taps
                .iter()
                .map(|tap| {
                    (0..t.len)
                        .map(|i| tap.gain * Complex64::from_polar(1.0, 2.0 * PI * tap.doppler * t.at(i)))
                        .collect()
                })
                .collect();
            let freq_factors: Vec<Vec<Complex64>> = taps
                .iter()
                .map(|tap| {
                    (0..f.len)
                        .map(|j| Complex64::from_polar(1.0, -2.0 * PI * tap.delay * f.at(j)))
                        .collect()
                })
                .collect();
            let nf = f.len;
            let mut values = vec![0.0; t.len * nf];
            values.par_chunks_mut(nf).enumerate().for_each(|(i, row)| {
                let mut acc = vec![Complex64::new(0.0, 0.0); nf];
                for (tf, ff) in time_factors.iter().zip(&freq_factors) {
                    let a = tf[i];
                    for (z, b) in acc.iter_mut().zip(ff) {
                        *z += a * b;
                    }
                }
                for (v, z) in row.iter_mut().zip(&acc) {
                    *v = z.norm();
                }
            });
            TFGrid::new(t, f, values)
        }
        None => TFGrid::from_fn(t, f, |ti, fj| transfer_function(model, ti, fj).norm()),
    }?;
    Ok(grid.scaled(ts))
}
