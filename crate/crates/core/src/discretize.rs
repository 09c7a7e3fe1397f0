//! Finite channel matrices from channel models.
//!
//! With band-limited input (sinc interpolation of the samples) and output
//! sampled at the same rate, the channel acts on sample vectors through
//!
//! ```text
//! h[n, n-k] = int int h(theta, tau) sinc(n - theta) sinc(theta - tau - k) dtau dtheta
//! ```
//!
//! For a path `h_q e^{j 2 pi f_q t} delta(tau - tau_q)` the delay integral
//! collapses and, because `|f_q|` is small compared to the band edge, the
//! remaining integral is `e^{j 2 pi f_q n} sinc(n - k - tau_q)` up to an error
//! of order `|f_q|` (the sliver of the shifted band that falls outside
//! `[-1/2, 1/2]`). Fractional delays are therefore realized by the sinc kernel,
//! never snapped to the grid. The kernel is truncated at
//! [`DEFAULT_SINC_HALF_WIDTH`] samples, where `|sinc| < 5e-3`.

use crate::channel::{ChannelModel, DiscreteKernel, DEFAULT_SINC_HALF_WIDTH};
use crate::error::{Error, Result};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::f64::consts::PI;

/// Where a matrix came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// Model kind, or a description for synthetic operators.
    pub source: String,
    /// SHA-256 of the canonical JSON of the source model and build options.
    pub config_hash: String,
}

/// Square channel matrix `H[n, k] = h[n, n-k]`, so `y = H x`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    pub entries: DMatrix<Complex64>,
    pub ts: f64,
    pub provenance: Provenance,
}

impl ChannelMatrix {
    pub fn from_entries(entries: DMatrix<Complex64>, ts: f64, source: impl Into<String>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::input(format!(
                "channel matrix must be square, got {} x {}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        Ok(ChannelMatrix {
            entries,
            ts,
            provenance: Provenance {
                source: source.into(),
                config_hash: String::new(),
            },
        })
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.norm()
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let v = nalgebra::DVector::from_column_slice(x);
        (&self.entries * v).iter().copied().collect()
    }

    pub fn apply_adjoint(&self, x: &[Complex64]) -> Vec<Complex64> {
        let v = nalgebra::DVector::from_column_slice(x);
        (self.entries.adjoint() * v).iter().copied().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscretizeOptions {
    /// Sinc tails beyond this many samples are dropped.
    pub sinc_half_width: usize,
    /// Absolute time of output sample 0.
    pub time_offset: f64,
    pub ts: f64,
}

impl Default for DiscretizeOptions {
    fn default() -> Self {
        DiscretizeOptions {
            sinc_half_width: DEFAULT_SINC_HALF_WIDTH,
            time_offset: 0.0,
            ts: 1.0,
        }
    }
}

/// Builds the `n x n` time- and band-windowed channel matrix.
pub fn build_channel_matrix(model: &ChannelModel, n: usize) -> Result<ChannelMatrix> {
    build_channel_matrix_with(model, n, &DiscretizeOptions::default())
}

pub fn build_channel_matrix_with(model: &ChannelModel, n: usize, opts: &DiscretizeOptions) -> Result<ChannelMatrix> {
    if n < 2 {
        return Err(Error::config(format!("matrix size must be at least 2, got {n}")));
    }
    model.validate()?;
    if let Some(taps) = model.taps() {
        let max_delay = taps.iter().map(|t| t.delay).fold(0.0, f64::max);
        if max_delay >= n as f64 {
            log::warn!("maximum delay {max_delay} exceeds the {n}-sample window; response is truncated");
        }
    }
    let kernel = DiscreteKernel::new(model, opts.sinc_half_width, opts.time_offset);
    let (lo, hi) = kernel.lag_support();
    let mut data = vec![Complex64::new(0.0, 0.0); n * n];
    // Column-major storage: column k holds the response to a unit sample at k.
    data.par_chunks_mut(n).enumerate().for_each(|(k, col)| {
        let r_lo = (k as i64 + lo).max(0);
        let r_hi = (k as i64 + hi).min(n as i64 - 1);
        for r in r_lo..=r_hi {
            col[r as usize] = kernel.entry(r as usize, k);
        }
    });
    let entries = DMatrix::from_vec(n, n, data);
    Ok(ChannelMatrix {
        entries,
        ts: opts.ts,
        provenance: Provenance {
            source: model.kind().to_string(),
            config_hash: config_hash(model, n, opts),
        },
    })
}

fn config_hash(model: &ChannelModel, n: usize, opts: &DiscretizeOptions) -> String {
    let mut hasher = Sha256::new();
    hasher.update(serde_json::to_vec(model).unwrap_or_default());
    hasher.update(format!("|n={n}|w={}|t0={}|ts={}", opts.sinc_half_width, opts.time_offset, opts.ts));
    hex::encode(hasher.finalize())
}

/// Time-limiting after band-limiting to `|f| < w` (cycles/sample):
/// entries `sin(2 pi w (n-k)) / (pi (n-k))`, diagonal `2w`. Its singular
/// vectors are the discrete prolate spheroidal sequences.
pub fn time_band_limiter(n: usize, w: f64) -> Result<ChannelMatrix> {
    if !(w > 0.0 && w < 0.5) {
        return Err(Error::config(format!("bandwidth must lie in (0, 0.5), got {w}")));
    }
    if n < 2 {
        return Err(Error::config(format!("matrix size must be at least 2, got {n}")));
    }
    let entries = DMatrix::from_fn(n, n, |r, c| {
        let d = r as f64 - c as f64;
        let v = if r == c { 2.0 * w } else { (2.0 * PI * w * d).sin() / (PI * d) };
        Complex64::new(v, 0.0)
    });
    Ok(ChannelMatrix {
        entries,
        ts: 1.0,
        provenance: Provenance {
            source: format!("time_band_limiter(w={w})"),
            config_hash: String::new(),
        },
    })
}

/// Number of guard samples needed so that consecutive blocks do not
/// interfere: the largest integer delay plus, when any delay is fractional,
/// the sinc truncation length (which also bounds the precursor).
pub fn channel_order(model: &ChannelModel, sinc_half_width: usize) -> usize {
    match model {
        ChannelModel::Tabulated(t) => t.cols.saturating_sub(1),
        _ => {
            let taps = model.taps().unwrap_or_default();
            let max_delay = taps.iter().map(|t| t.delay).fold(0.0, f64::max);
            let fractional = taps.iter().any(|t| (t.delay - t.delay.round()).abs() > 1e-12);
            max_delay.ceil() as usize + if fractional { sinc_half_width } else { 0 }
        }
    }
}
