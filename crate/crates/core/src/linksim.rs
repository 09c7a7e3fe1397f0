//! Block transmission over the singular functions of a time-varying channel.
//!
//! Each block maps `K` symbols onto the top right singular vectors of that
//! block's channel matrix, follows them with `L` zero samples, and is
//! detected by projecting the received window onto the left singular
//! vectors.

use crate::channel::{ChannelModel, DiscreteKernel, DEFAULT_SINC_HALF_WIDTH};
use crate::discretize::{build_channel_matrix_with, channel_order, DiscretizeOptions};
use crate::error::{Error, Result};
use crate::rng::{complex_gaussian, derive_seed, seeded, uniform};
use crate::spectral::{svd, SvdResult};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constellation {
    Qpsk,
    #[serde(rename = "16qam")]
    Qam16,
}

impl Constellation {
    pub fn bits_per_symbol(self) -> u32 {
        match self {
            Constellation::Qpsk => 2,
            Constellation::Qam16 => 4,
        }
    }

    pub fn size(self) -> usize {
        1 << self.bits_per_symbol()
    }

    /// Unit average energy, Gray labelled: the in-phase half of the label is
    /// the high bits.
    pub fn point(self, label: usize) -> Complex64 {
        match self {
            Constellation::Qpsk => {
                let s = std::f64::consts::FRAC_1_SQRT_2;
                let re = if label & 2 == 0 { s } else { -s };
                let im = if label & 1 == 0 { s } else { -s };
                Complex64::new(re, im)
            }
            Constellation::Qam16 => {
                let scale = 1.0 / 10f64.sqrt();
                Complex64::new(pam4(label >> 2), pam4(label & 3)) * scale
            }
        }
    }

    /// Label of the nearest point.
    pub fn slice(self, z: Complex64) -> usize {
        match self {
            Constellation::Qpsk => (usize::from(z.re < 0.0) << 1) | usize::from(z.im < 0.0),
            Constellation::Qam16 => {
                let s = 10f64.sqrt();
                (unpam4(z.re * s) << 2) | unpam4(z.im * s)
            }
        }
    }
}

/// Gray-coded 4-PAM: 00 -> -3, 01 -> -1, 11 -> 1, 10 -> 3.
fn pam4(bits: usize) -> f64 {
    match bits & 3 {
        0 => -3.0,
        1 => -1.0,
        3 => 1.0,
        _ => 3.0,
    }
}

fn unpam4(x: f64) -> usize {
    if x < -2.0 {
        0
    } else if x < 0.0 {
        1
    } else if x < 2.0 {
        3
    } else {
        2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSeeds {
    pub symbols: u64,
    pub noise: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkConfig {
    /// Block length in samples; each block's channel matrix is `n x n`.
    pub n: usize,
    /// Symbols per block.
    pub k: usize,
    /// Guard samples after each block; the channel order when absent.
    #[serde(default)]
    pub guard: Option<usize>,
    pub constellation: Constellation,
    /// Per-subchannel amplitude coefficients; all ones when absent.
    #[serde(default)]
    pub c: Option<Vec<f64>>,
    /// Noise variance per complex sample.
    pub n0: f64,
    pub seeds: LinkSeeds,
    pub num_blocks: usize,
    /// Subchannels with `sigma c` below this fraction of `sigma_1` are not used.
    #[serde(default = "default_usable")]
    pub usable_threshold: f64,
}

fn default_usable() -> f64 {
    1e-12
}

impl LinkConfig {
    pub fn new(n: usize, k: usize, constellation: Constellation, n0: f64, num_blocks: usize) -> Self {
        LinkConfig {
            n,
            k,
            guard: None,
            constellation,
            c: None,
            n0,
            seeds: LinkSeeds { symbols: 1, noise: 2 },
            num_blocks,
            usable_threshold: default_usable(),
        }
    }

    pub fn guard_for(&self, model: &ChannelModel) -> usize {
        self.guard.unwrap_or_else(|| channel_order(model, DEFAULT_SINC_HALF_WIDTH))
    }

    pub fn coefficients(&self) -> Vec<f64> {
        self.c.clone().unwrap_or_else(|| vec![1.0; self.k])
    }

    pub fn validate(&self, guard: usize) -> Result<()> {
        if self.n < 2 {
            return Err(Error::config("n: block length must be at least 2"));
        }
        if self.k == 0 {
            return Err(Error::config("k: need at least one symbol per block"));
        }
        if self.k + guard > self.n {
            return Err(Error::config(format!(
                "k: {} symbols plus a {guard}-sample guard exceed the block length {}",
                self.k, self.n
            )));
        }
        if let Some(c) = &self.c {
            if c.len() != self.k {
                return Err(Error::config(format!("c: expected {} coefficients, got {}", self.k, c.len())));
            }
            if c.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::config("c: coefficients must be finite and non-negative"));
            }
        }
        if !(self.n0 >= 0.0 && self.n0.is_finite()) {
            return Err(Error::config("n0: noise density must be finite and non-negative"));
        }
        if self.num_blocks == 0 {
            return Err(Error::config("num_blocks: must be positive"));
        }
        if !(self.usable_threshold >= 0.0 && self.usable_threshold < 1.0) {
            return Err(Error::config("usable_threshold: must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// `sum_k c_k s_k v_k` followed by `guard` zeros.
pub fn transmit_block(s: &[Complex64], svd: &SvdResult, c: &[f64], guard: usize) -> Result<Vec<Complex64>> {
    let k = s.len();
    if c.len() != k {
        return Err(Error::config(format!("{} coefficients for {k} symbols", c.len())));
    }
    let top = svd.sigmas.first().copied().unwrap_or(0.0);
    let positive = svd.sigmas.iter().filter(|&&x| x > 1e-12 * top).count();
    if k > positive {
        return Err(Error::config(format!(
            "{k} symbols but only {positive} singular values are positive"
        )));
    }
    let n = svd.v.nrows();
    let mut x = vec![Complex64::new(0.0, 0.0); n + guard];
    for (i, (&sym, &ci)) in s.iter().zip(c).enumerate() {
        let w = sym * ci;
        if w == Complex64::new(0.0, 0.0) {
            continue;
        }
        for (xj, vj) in x.iter_mut().zip(svd.v.column(i).iter()) {
            *xj += w * vj;
        }
    }
    Ok(x)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    /// `<y, u_m> / (sigma_m c_m)`; zero for unusable subchannels.
    pub soft: Vec<Complex64>,
    pub labels: Vec<usize>,
    pub usable: Vec<bool>,
}

/// Projects the first `n` samples of `y` onto `u_0..u_{k-1}` and slices.
pub fn receive_block(
    y: &[Complex64],
    svd: &SvdResult,
    c: &[f64],
    k: usize,
    constellation: Constellation,
    threshold: f64,
) -> Result<Detection> {
    let n = svd.u.nrows();
    if y.len() < n {
        return Err(Error::contract(format!("received {} samples, block needs {n}", y.len())));
    }
    if c.len() != k || k > svd.n() {
        return Err(Error::config(format!("{k} subchannels with {} coefficients", c.len())));
    }
    let floor = threshold * svd.sigmas.first().copied().unwrap_or(0.0);
    let mut det = Detection {
        soft: Vec::with_capacity(k),
        labels: Vec::with_capacity(k),
        usable: Vec::with_capacity(k),
    };
    for m in 0..k {
        let gain = svd.sigmas[m] * c[m];
        if gain <= floor || gain == 0.0 {
            det.soft.push(Complex64::new(0.0, 0.0));
            det.labels.push(0);
            det.usable.push(false);
            continue;
        }
        let proj: Complex64 = svd.u.column(m).iter().zip(y).map(|(u, y)| y * u.conj()).sum();
        let z = proj / gain;
        det.soft.push(z);
        det.labels.push(constellation.slice(z));
        det.usable.push(true);
    }
    Ok(det)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubchannelStats {
    pub trials: u64,
    pub symbol_errors: u64,
    /// `mean |s^ - s|^2`.
    pub soft_error_var: f64,
    /// Noise variance after projection, `mean |s^ - s|^2 (sigma c)^2`.
    pub noise_var: f64,
    /// `mean |s|^2 / mean |s^ - s|^2`; absent when the error is exactly zero.
    pub snr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkReport {
    pub n: usize,
    pub k: usize,
    pub guard: usize,
    pub num_blocks: usize,
    pub constellation: Constellation,
    pub n0: f64,
    pub symbols: u64,
    pub bits: u64,
    pub bit_errors: u64,
    pub ber: f64,
    pub subchannels: Vec<SubchannelStats>,
    /// Subchannels unusable in at least one block.
    pub unusable: Vec<usize>,
}

#[derive(Default, Clone)]
struct Acc {
    trials: u64,
    errors: u64,
    err2: f64,
    sig2: f64,
    noise: f64,
    unusable: bool,
}

/// Per-block channel knowledge: the SVD of the `n x n` matrix seen by block
/// `b`, which starts at absolute sample `b (n + guard)`.
pub struct BlockChannels {
    model: ChannelModel,
    n: usize,
    period: usize,
    shared: Option<SvdResult>,
}

impl BlockChannels {
    pub fn new(model: &ChannelModel, n: usize, guard: usize) -> Result<Self> {
        let shared = if model.is_time_invariant() {
            Some(Self::compute(model, n, 0.0)?)
        } else {
            None
        };
        Ok(BlockChannels {
            model: model.clone(),
            n,
            period: n + guard,
            shared,
        })
    }

    fn compute(model: &ChannelModel, n: usize, offset: f64) -> Result<SvdResult> {
        let opts = DiscretizeOptions {
            time_offset: offset,
            ..DiscretizeOptions::default()
        };
        svd(&build_channel_matrix_with(model, n, &opts)?)
    }

    pub fn block(&self, b: usize) -> Result<std::borrow::Cow<'_, SvdResult>> {
        match &self.shared {
            Some(s) => Ok(std::borrow::Cow::Borrowed(s)),
            None => Ok(std::borrow::Cow::Owned(Self::compute(
                &self.model,
                self.n,
                (b * self.period) as f64,
            )?)),
        }
    }
}

/// Symbols of block `b`, as constellation labels.
pub fn block_labels(cfg: &LinkConfig, b: usize) -> Vec<usize> {
    let mut rng = seeded(derive_seed(cfg.seeds.symbols, b as u64));
    let m = cfg.constellation.size();
    (0..cfg.k).map(|_| ((uniform(&mut rng) * m as f64) as usize).min(m - 1)).collect()
}

/// Transmit signal of consecutive blocks carrying `labels[b]`.
pub fn transmit_stream(channels: &BlockChannels, cfg: &LinkConfig, labels: &[Vec<usize>]) -> Result<Vec<Complex64>> {
    let guard = channels.period - channels.n;
    let c = cfg.coefficients();
    let blocks: Vec<Vec<Complex64>> = labels
        .par_iter()
        .enumerate()
        .map(|(b, l)| {
            let s: Vec<Complex64> = l.iter().map(|&x| cfg.constellation.point(x)).collect();
            transmit_block(&s, &*channels.block(b)?, &c, guard)
        })
        .collect::<Result<_>>()?;
    Ok(blocks.into_iter().flatten().collect())
}

/// Noiseless channel output of a stream starting at absolute time 0.
pub fn channel_output(model: &ChannelModel, x: &[Complex64]) -> Vec<Complex64> {
    DiscreteKernel::new(model, DEFAULT_SINC_HALF_WIDTH, 0.0).apply(x)
}

/// Full link: per-block SVD, transmission, channel, AWGN, projection
/// detection. Deterministic given the seeds.
pub fn run_link(model: &ChannelModel, cfg: &LinkConfig) -> Result<LinkReport> {
    model.validate()?;
    let guard = cfg.guard_for(model);
    cfg.validate(guard)?;
    let channels = BlockChannels::new(model, cfg.n, guard)?;
    let labels: Vec<Vec<usize>> = (0..cfg.num_blocks).map(|b| block_labels(cfg, b)).collect();
    let y = channel_output(model, &transmit_stream(&channels, cfg, &labels)?);
    let c = cfg.coefficients();
    let bits = cfg.constellation.bits_per_symbol();

    let per_block: Vec<(Vec<Acc>, u64, u64)> = (0..cfg.num_blocks)
        .into_par_iter()
        .map(|b| {
            let svd = channels.block(b)?;
            let start = b * channels.period;
            let mut rng = seeded(derive_seed(cfg.seeds.noise, b as u64));
            let window: Vec<Complex64> = y[start..start + cfg.n]
                .iter()
                .map(|&v| if cfg.n0 > 0.0 { v + complex_gaussian(&mut rng, cfg.n0) } else { v })
                .collect();
            let det = receive_block(&window, &svd, &c, cfg.k, cfg.constellation, cfg.usable_threshold)?;
            let mut accs = vec![Acc::default(); cfg.k];
            let (mut nbits, mut nerr) = (0u64, 0u64);
            for m in 0..cfg.k {
                let a = &mut accs[m];
                if !det.usable[m] {
                    a.unusable = true;
                    continue;
                }
                let sent = labels[b][m];
                let s = cfg.constellation.point(sent);
                let e2 = (det.soft[m] - s).norm_sqr();
                let g = svd.sigmas[m] * c[m];
                a.trials += 1;
                a.errors += u64::from(det.labels[m] != sent);
                a.err2 += e2;
                a.sig2 += s.norm_sqr();
                a.noise += e2 * g * g;
                nbits += u64::from(bits);
                nerr += u64::from((det.labels[m] ^ sent).count_ones());
            }
            Ok((accs, nbits, nerr))
        })
        .collect::<Result<_>>()?;

    let mut total = vec![Acc::default(); cfg.k];
    let (mut nbits, mut nerr) = (0u64, 0u64);
    for (accs, b, e) in per_block {
        nbits += b;
        nerr += e;
        for (t, a) in total.iter_mut().zip(accs) {
            t.trials += a.trials;
            t.errors += a.errors;
            t.err2 += a.err2;
            t.sig2 += a.sig2;
            t.noise += a.noise;
            t.unusable |= a.unusable;
        }
    }
    let subchannels = total
        .iter()
        .map(|a| {
            let t = a.trials.max(1) as f64;
            SubchannelStats {
                trials: a.trials,
                symbol_errors: a.errors,
                soft_error_var: a.err2 / t,
                noise_var: a.noise / t,
                snr: (a.err2 > 0.0).then(|| a.sig2 / a.err2),
            }
        })
        .collect();
    Ok(LinkReport {
        n: cfg.n,
        k: cfg.k,
        guard,
        num_blocks: cfg.num_blocks,
        constellation: cfg.constellation,
        n0: cfg.n0,
        symbols: total.iter().map(|a| a.trials).sum(),
        bits: nbits,
        bit_errors: nerr,
        ber: if nbits > 0 { nerr as f64 / nbits as f64 } else { 0.0 },
        subchannels,
        unusable: total.iter().enumerate().filter(|(_, a)| a.unusable).map(|(i, _)| i).collect(),
    })
}

/// Gaussian tail probability `Q(x)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Gray-coded QPSK bit error rate over AWGN, `Q(sqrt(Es/N0))`.
pub fn qpsk_ber(es_n0: f64) -> f64 {
    q_function(es_n0.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BerPoint {
    pub es_n0_db: f64,
    pub ber: f64,
    pub trials: u64,
}

pub fn ber_curve_csv(points: &[BerPoint]) -> String {
    let mut s = String::from("EsN0_dB,ber,trials\n");
    for p in points {
        let _ = writeln!(s, "{},{},{}", p.es_n0_db, p.ber, p.trials);
    }
    s
}

/// `trials x k` matrix of AWGN samples of variance `n0` projected onto the
/// first `k` left singular vectors.
pub fn project_noise(svd: &SvdResult, k: usize, n0: f64, trials: usize, seed: u64) -> DMatrix<Complex64> {
    let n = svd.u.nrows();
    let uk = svd.u.columns(0, k).adjoint();
    let rows: Vec<Vec<Complex64>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = seeded(derive_seed(seed, t as u64));
            let w = nalgebra::DVector::from_fn(n, |_, _| complex_gaussian(&mut rng, n0));
            (&uk * w).iter().copied().collect()
        })
        .collect();
    DMatrix::from_fn(trials, k, |r, c| rows[r][c])
}

/// Sample correlation coefficients `|E[a b*]| / sqrt(E|a|^2 E|b|^2)` between
/// the columns of `z` (zero-mean assumed), and the column variances.
pub fn noise_statistics(z: &DMatrix<Complex64>) -> (DMatrix<f64>, Vec<f64>) {
    let t = z.nrows() as f64;
    let k = z.ncols();
    let var: Vec<f64> = (0..k).map(|c| z.column(c).iter().map(|v| v.norm_sqr()).sum::<f64>() / t).collect();
    let corr = DMatrix::from_fn(k, k, |a, b| {
        let cross: Complex64 = z.column(a).iter().zip(z.column(b).iter()).map(|(x, y)| x * y.conj()).sum();
        (cross / t).norm() / (var[a] * var[b]).sqrt()
    });
    (corr, var)
}
