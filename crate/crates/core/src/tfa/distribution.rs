use crate::dsp::interpolate2;
use crate::error::{Error, Result};
use crate::wkb::{Axis, TFGrid};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Default value of the Gaussian smoothing windows at their outermost taps.
pub const WINDOW_EDGE: f64 = 0.005;

/// How samples beyond the block are treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// The block repeats, as the band-limited half-sample interpolation
    /// already assumes.
    #[default]
    Periodic,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TfdKind {
    Wvd,
    Spwvd,
    Rspwvd,
}

impl TfdKind {
    /// Tag stored in the binary grid container.
    pub fn tag(self) -> u32 {
        match self {
            TfdKind::Wvd => 1,
            TfdKind::Spwvd => 2,
            TfdKind::Rspwvd => 3,
        }
    }

    pub fn from_tag(tag: u32) -> Result<Self> {
        match tag {
            1 => Ok(TfdKind::Wvd),
            2 => Ok(TfdKind::Spwvd),
            3 => Ok(TfdKind::Rspwvd),
            _ => Err(Error::Format(format!("unknown distribution tag {tag}"))),
        }
    }
}

/// Lengths, in samples, of the time- and frequency-smoothing windows and
/// the value both Gaussians take at their outermost taps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Windows {
    pub t_win: usize,
    pub f_win: usize,
    #[serde(default = "default_edge")]
    pub edge: f64,
}

fn default_edge() -> f64 {
    WINDOW_EDGE
}

impl Windows {
    /// `n/8 + 1` and `n/4 + 1`, forced odd.
    pub fn default_for(n: usize) -> Self {
        Windows {
            t_win: odd(n / 8 + 1),
            f_win: odd(n / 4 + 1),
            edge: WINDOW_EDGE,
        }
    }
}

fn odd(k: usize) -> usize {
    if k.is_multiple_of(2) {
        k + 1
    } else {
        k
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpwvdOptions {
    pub windows: Windows,
    pub ts: f64,
    /// Replace the input by its analytic signal first.
    pub analytic: bool,
    pub boundary: Boundary,
}

impl SpwvdOptions {
    pub fn new(t_win: usize, f_win: usize) -> Self {
        SpwvdOptions {
            windows: Windows {
                t_win,
                f_win,
                edge: WINDOW_EDGE,
            },
            ts: 1.0,
            analytic: false,
            boundary: Boundary::Periodic,
        }
    }
}

/// Time-frequency energy map of a sampled signal.
///
/// Rows are sample times `m ts`; columns are the `n` DFT frequencies wrapped
/// to `[-1/(2 ts), 1/(2 ts))`. Values are scaled so that the sum over all
/// cells is the signal energy; with zero boundaries the time smoothing
/// pushes some of it past the block ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TFDistribution {
    pub grid: TFGrid,
    pub kind: TfdKind,
    pub windows: Option<Windows>,
    pub analytic: bool,
    pub boundary: Boundary,
}

impl TFDistribution {
    pub fn mass(&self) -> f64 {
        self.grid.values.iter().sum()
    }
}

/// Gaussian taps `w(k)` for `k = -half..=half` with `w(0) = 1` and
/// `w(+-half) = edge`.
pub fn gaussian_window(len: usize, edge: f64) -> Vec<f64> {
    let half = (len / 2) as f64;
    (0..len)
        .map(|i| {
            if half == 0.0 {
                1.0
            } else {
                let x = (i as f64 - half) / half;
                (edge.ln() * x * x).exp()
            }
        })
        .collect()
}

fn axes(n: usize, ts: f64) -> (Axis, Axis) {
    let df = 1.0 / (n as f64 * ts);
    (Axis::new(0.0, ts, n), Axis::new(-((n / 2) as f64) * df, df, n))
}

fn check_windows(n: usize, w: Windows) -> Result<()> {
    if n < 2 {
        return Err(Error::config("signal needs at least two samples"));
    }
    if !(w.edge > 0.0 && w.edge < 1.0) {
        return Err(Error::config("window edge value must lie in (0, 1)"));
    }
    for (name, len) in [("time", w.t_win), ("frequency", w.f_win)] {
        if len % 2 == 0 {
            return Err(Error::config(format!("{name} window length {len} must be odd")));
        }
        if len >= n {
            return Err(Error::config(format!("{name} window length {len} must be shorter than the signal ({n})")));
        }
    }
    Ok(())
}

/// Analytic signal by suppressing negative DFT frequencies.
pub fn analytic_signal(x: &[Complex64]) -> Vec<Complex64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let mut planner = FftPlanner::new();
    let mut spec = x.to_vec();
    planner.plan_fft_forward(n).process(&mut spec);
    for (k, z) in spec.iter_mut().enumerate() {
        let w = if k == 0 || (n.is_multiple_of(2) && k == n / 2) {
            1.0
        } else if k < n.div_ceil(2) {
            2.0
        } else {
            0.0
        };
        *z *= w / n as f64;
    }
    planner.plan_fft_inverse(n).process(&mut spec);
    spec
}

/// `sum_u h(u) sum_s g(s) x(m - s + u/2) x*(m - s - u/2) e^{-j 2 pi f u} / n`
/// for every row `m` and DFT frequency, with half-sample values from
/// band-limited interpolation. `g` and `h` are
/// centred (index `len/2` is offset 0). Output is row-major, columns in
/// wrapped frequency order.
fn smoothed_wigner(x2: &[Complex64], n: usize, g: &[f64], h: &[f64], boundary: Boundary) -> Vec<Complex64> {
    let lg = (g.len() / 2) as i64;
    let lh = (h.len() / 2) as i64;
    let ni = n as i64;
    let fft = FftPlanner::new().plan_fft_forward(n);
    let rows: Vec<Vec<Complex64>> = (0..ni)
        .into_par_iter()
        .map(|m| {
            let mut buf = vec![Complex64::new(0.0, 0.0); n];
            for u in -lh..=lh {
                let hu = h[(u + lh) as usize];
                if hu == 0.0 {
                    continue;
                }
                let mut acc = Complex64::new(0.0, 0.0);
                for s in -lg..=lg {
                    let c = m - s;
                    let (a, b) = (2 * c + u, 2 * c - u);
                    let (a, b) = match boundary {
                        Boundary::Periodic => (a.rem_euclid(2 * ni), b.rem_euclid(2 * ni)),
                        Boundary::Zero => {
                            if c < 0 || c >= ni || a < 0 || b < 0 || a >= 2 * ni || b >= 2 * ni {
                                continue;
                            }
                            (a, b)
                        }
                    };
                    acc += g[(s + lg) as usize] * x2[a as usize] * x2[b as usize].conj();
                }
                buf[u.rem_euclid(ni) as usize] = acc * hu;
            }
            fft.process(&mut buf);
            let scale = 1.0 / n as f64;
            (0..n).map(|j| buf[(j + n - n / 2) % n] * scale).collect()
        })
        .collect();
    rows.into_iter().flatten().collect()
}

fn prepare(x: &[Complex64], analytic: bool) -> Vec<Complex64> {
    if analytic {
        interpolate2(&analytic_signal(x))
    } else {
        interpolate2(x)
    }
}

fn time_window(w: Windows) -> Vec<f64> {
    let g = gaussian_window(w.t_win, w.edge);
    let sum: f64 = g.iter().sum();
    g.into_iter().map(|v| v / sum).collect()
}

fn real_grid(n: usize, ts: f64, values: &[Complex64]) -> Result<TFGrid> {
    let (t, f) = axes(n, ts);
    TFGrid::new(t, f, values.iter().map(|z| z.re).collect())
}

/// Pseudo Wigner-Ville distribution: no time smoothing and the widest odd
/// rectangular lag window that fits the block.
pub fn wvd(x: &[Complex64], ts: f64) -> Result<TFDistribution> {
    let n = x.len();
    if n < 2 {
        return Err(Error::config("signal needs at least two samples"));
    }
    let lag = if n.is_multiple_of(2) { n - 1 } else { n };
    let w = smoothed_wigner(&interpolate2(x), n, &[1.0], &vec![1.0; lag], Boundary::Periodic);
    Ok(TFDistribution {
        grid: real_grid(n, ts, &w)?,
        kind: TfdKind::Wvd,
        windows: None,
        analytic: false,
        boundary: Boundary::Periodic,
    })
}

/// Smoothed pseudo Wigner-Ville distribution with Gaussian time window of
/// `t_win` taps (unit sum) and Gaussian lag window of `f_win` taps (unit
/// centre tap).
pub fn spwvd(x: &[Complex64], t_win: usize, f_win: usize) -> Result<TFDistribution> {
    spwvd_with(x, &SpwvdOptions::new(t_win, f_win))
}

pub fn spwvd_with(x: &[Complex64], opts: &SpwvdOptions) -> Result<TFDistribution> {
    let n = x.len();
    check_windows(n, opts.windows)?;
    if !(opts.ts > 0.0 && opts.ts.is_finite()) {
        return Err(Error::config("sampling period must be positive"));
    }
    let x2 = prepare(x, opts.analytic);
    let w = smoothed_wigner(
        &x2,
        n,
        &time_window(opts.windows),
        &gaussian_window(opts.windows.f_win, opts.windows.edge),
        opts.boundary,
    );
    Ok(TFDistribution {
        grid: real_grid(n, opts.ts, &w)?,
        kind: TfdKind::Spwvd,
        windows: Some(opts.windows),
        analytic: opts.analytic,
        boundary: opts.boundary,
    })
}

/// Reassigned SPWVD: each cell's value is moved to the cell nearest its
/// local centroid
/// `t^ = t - W[s g(s), h] / W`, `f^ = f - Im W[g, h'] / (2 pi W)`,
/// where `W` is the SPWVD itself. Cells whose value is negligible against
/// the peak stay where they are. Frequency wraps; time wraps under the
/// periodic boundary and is clamped to the block otherwise. Total mass is
/// unchanged.
pub fn reassign(x: &[Complex64], dist: &TFDistribution) -> Result<TFDistribution> {
    let Some(windows) = dist.windows else {
        return Err(Error::contract("distribution carries no smoothing windows"));
    };
    if dist.kind != TfdKind::Spwvd {
        return Err(Error::contract("only an SPWVD can be reassigned"));
    }
    let n = x.len();
    if dist.grid.t.len != n || dist.grid.f.len != n {
        return Err(Error::contract(format!(
            "distribution is {}x{} but the signal has {n} samples",
            dist.grid.t.len, dist.grid.f.len
        )));
    }
    check_windows(n, windows)?;
    let ts = dist.grid.t.step;
    let x2 = prepare(x, dist.analytic);
    let g = time_window(windows);
    let h = gaussian_window(windows.f_win, windows.edge);
    let lg = (g.len() / 2) as f64;
    let lh = (h.len() / 2) as f64;
    let tg: Vec<f64> = g.iter().enumerate().map(|(i, v)| (i as f64 - lg) * v).collect();
    let dh: Vec<f64> = if lh == 0.0 {
        vec![0.0]
    } else {
        h.iter()
            .enumerate()
            .map(|(i, v)| {
                let u = i as f64 - lh;
                2.0 * windows.edge.ln() * u / (lh * lh) * v
            })
            .collect()
    };
    let wt = smoothed_wigner(&x2, n, &tg, &h, dist.boundary);
    let wd = smoothed_wigner(&x2, n, &g, &dh, dist.boundary);

    let values = &dist.grid.values;
    let peak = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let floor = 1e-10 * peak;
    let mut out = vec![0.0; n * n];
    let ni = n as i64;
    for m in 0..n {
        for j in 0..n {
            let idx = m * n + j;
            let w = values[idx];
            let (mut row, mut col) = (m as i64, j as i64);
            if w.abs() > floor {
                let dt = wt[idx].re / w;
                let df = wd[idx].im / (2.0 * PI * w);
                if dt.is_finite() && df.is_finite() {
                    let r = (m as f64 - dt).round();
                    row = match dist.boundary {
                        Boundary::Periodic => (r as i64).rem_euclid(ni),
                        Boundary::Zero => r.clamp(0.0, (n - 1) as f64) as i64,
                    };
                    col = (j as f64 - df * n as f64).round() as i64;
                }
            }
            out[(row as usize) * n + col.rem_euclid(ni) as usize] += w;
        }
    }
    let (t, f) = axes(n, ts);
    Ok(TFDistribution {
        grid: TFGrid::new(t, f, out)?,
        kind: TfdKind::Rspwvd,
        windows: Some(windows),
        analytic: dist.analytic,
        boundary: dist.boundary,
    })
}

/// SPWVD followed by reassignment.
pub fn rspwvd(x: &[Complex64], opts: &SpwvdOptions) -> Result<TFDistribution> {
    reassign(x, &spwvd_with(x, opts)?)
}
