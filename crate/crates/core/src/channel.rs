//! Linear time-varying channel models and their equivalent representations.
//!
//! Units are normalized to a unit sampling interval: times and delays are in
//! samples, Doppler shifts and frequencies in cycles per sample. Physical
//! units are converted at the CLI boundary.
//!
//! A model describes the time-varying impulse response `h(t, tau)`, the
//! response at time `t` to an impulse sent at `t - tau`. From it follow the
//! kernel `k(t, s) = h(t, t - s)`, the delay-Doppler spreading function
//! `S(tau, nu)` (Fourier transform of `h` along `t`) and the time-varying
//! transfer function `H(t, f)` (Fourier transform of `h` along `tau`).

use crate::error::{Error, Result};
use crate::rng;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Default half-width (in samples) of the truncated interpolation kernel.
pub const DEFAULT_SINC_HALF_WIDTH: usize = 64;

/// Normalized sinc, `sin(pi x) / (pi x)`, exact at integers.
pub fn sinc(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() < 1e-12 {
        return if r == 0.0 { 1.0 } else { 0.0 };
    }
    let px = PI * x;
    px.sin() / px
}

/// Complex value in the `{"re": .., "im": ..}` JSON form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct ComplexRepr {
    re: f64,
    im: f64,
}

impl From<Complex64> for ComplexRepr {
    fn from(z: Complex64) -> Self {
        ComplexRepr { re: z.re, im: z.im }
    }
}

impl From<ComplexRepr> for Complex64 {
    fn from(c: ComplexRepr) -> Self {
        Complex64::new(c.re, c.im)
    }
}

mod complex_vec {
    use super::ComplexRepr;
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[Complex64], s: S) -> Result<S::Ok, S::Error> {
        let reprs: Vec<ComplexRepr> = v.iter().map(|&z| z.into()).collect();
        reprs.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Complex64>, D::Error> {
        let reprs = Vec::<ComplexRepr>::deserialize(d)?;
        Ok(reprs.into_iter().map(Into::into).collect())
    }
}

/// One propagation path: complex gain, delay (samples) and Doppler shift
/// (cycles/sample).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "TapRepr", into = "TapRepr")]
pub struct Tap {
    pub gain: Complex64,
    pub delay: f64,
    pub doppler: f64,
}

#[derive(Serialize, Deserialize)]
struct TapRepr {
    re: f64,
    im: f64,
    delay: f64,
    doppler: f64,
}

impl From<TapRepr> for Tap {
    fn from(r: TapRepr) -> Self {
        Tap {
            gain: Complex64::new(r.re, r.im),
            delay: r.delay,
            doppler: r.doppler,
        }
    }
}

impl From<Tap> for TapRepr {
    fn from(t: Tap) -> Self {
        TapRepr {
            re: t.gain.re,
            im: t.gain.im,
            delay: t.delay,
            doppler: t.doppler,
        }
    }
}

/// Delay profile `g(tau)` tabulated as quadrature masses: the integral
/// `int g(tau) phi(tau) dtau` is `sum_k samples[k] * phi(tau0 + k * step)`.
/// A point mass at a delay is a single nonzero sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayProfile {
    pub tau0: f64,
    pub step: f64,
    #[serde(with = "complex_vec")]
    pub samples: Vec<Complex64>,
}

impl DelayProfile {
    /// Profile made of point masses at the given (delay, weight) pairs.
    /// Delays must lie on a common grid of spacing `step` starting at `tau0`.
    pub fn from_masses(tau0: f64, step: f64, masses: &[(f64, Complex64)]) -> Result<Self> {
        if !(step > 0.0) {
            return Err(Error::config("delay profile step must be positive"));
        }
        let mut samples = Vec::new();
        for &(tau, w) in masses {
            let k = (tau - tau0) / step;
            let ki = k.round();
            if ki < 0.0 || (k - ki).abs() > 1e-9 {
                return Err(Error::config(format!(
                    "mass at delay {tau} is not on the profile grid"
                )));
            }
            let ki = ki as usize;
            if samples.len() <= ki {
                samples.resize(ki + 1, Complex64::new(0.0, 0.0));
            }
            samples[ki] += w;
        }
        Ok(DelayProfile {
            tau0,
            step,
            samples,
        })
    }

    pub fn delay(&self, k: usize) -> f64 {
        self.tau0 + k as f64 * self.step
    }

    /// Nonzero (delay, weight) pairs.
    pub fn masses(&self) -> impl Iterator<Item = (f64, Complex64)> + '_ {
        self.samples
            .iter()
            .enumerate()
            .filter(|(_, w)| w.norm_sqr() > 0.0)
            .map(|(k, &w)| (self.delay(k), w))
    }

    /// Fourier transform `G(f) = int g(tau) e^{-j 2 pi f tau} dtau`.
    ///
    /// Evaluated as the exact trigonometric sum over the tabulated masses, which
    /// coincides with an arbitrarily oversampled DFT of the table.
    pub fn fourier(&self, f: f64) -> Complex64 {
        self.masses()
            .map(|(tau, w)| w * Complex64::from_polar(1.0, -2.0 * PI * f * tau))
            .sum()
    }

    /// `K(f, mu) = int g(tau) e^{-j 2 pi f tau} e^{j pi mu tau^2} dtau`.
    pub fn chirp_transform(&self, f: f64, mu: f64) -> Complex64 {
        self.masses()
            .map(|(tau, w)| w * Complex64::from_polar(1.0, -2.0 * PI * f * tau + PI * mu * tau * tau))
            .sum()
    }
}

/// Time-varying impulse response sampled on the unit grid: `h[n, m]` is the
/// response at time `n` to an impulse sent at `n - m`, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabulatedResponse {
    pub rows: usize,
    pub cols: usize,
    #[serde(with = "complex_vec")]
    pub h: Vec<Complex64>,
}

impl TabulatedResponse {
    pub fn new(rows: usize, cols: usize, h: Vec<Complex64>) -> Result<Self> {
        let t = TabulatedResponse { rows, cols, h };
        t.validate()?;
        Ok(t)
    }

    /// Builds `h[n, m] = f(n, m)`.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut h = Vec::with_capacity(rows * cols);
        for n in 0..rows {
            for m in 0..cols {
                h.push(f(n, m));
            }
        }
        TabulatedResponse { rows, cols, h }
    }

    pub fn at(&self, n: usize, m: usize) -> Complex64 {
        self.h[n * self.cols + m]
    }

    pub fn energy(&self) -> f64 {
        self.h.iter().map(|z| z.norm_sqr()).sum()
    }

    fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::config("tabulated response must have at least one row and column"));
        }
        if self.h.len() != self.rows * self.cols {
            return Err(Error::config(format!(
                "tabulated response has {} entries, expected {} x {}",
                self.h.len(),
                self.rows,
                self.cols
            )));
        }
        if !self.energy().is_finite() {
            return Err(Error::config("tabulated response must have finite energy"));
        }
        Ok(())
    }
}

/// Symbolic description of `h(t, tau)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ChannelModel {
    /// `h(t, tau) = sum_q h_q e^{j 2 pi f_q t} delta(tau - tau_q)`.
    Multipath { taps: Vec<Tap> },
    /// Spreading function concentrated on the line `nu = mu tau + f0`:
    /// `h(t, tau) = g(tau) e^{j 2 pi mu tau t} e^{j 2 pi f0 t}`.
    LineSpread { g: DelayProfile, mu: f64, f0: f64 },
    /// Directly sampled `h[n, m]`.
    Tabulated(TabulatedResponse),
}

impl ChannelModel {
    pub fn identity() -> Self {
        ChannelModel::Multipath {
            taps: vec![Tap {
                gain: Complex64::new(1.0, 0.0),
                delay: 0.0,
                doppler: 0.0,
            }],
        }
    }

    /// Single path with unit gain, the given delay and no Doppler.
    pub fn pure_delay(delay: f64) -> Self {
        ChannelModel::Multipath {
            taps: vec![Tap {
                gain: Complex64::new(1.0, 0.0),
                delay,
                doppler: 0.0,
            }],
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ChannelModel::Multipath { .. } => "multipath",
            ChannelModel::LineSpread { .. } => "line_spread",
            ChannelModel::Tabulated(_) => "tabulated",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ChannelModel::Multipath { taps } => {
                if taps.is_empty() {
                    return Err(Error::config("multipath model needs at least one tap"));
                }
                for (q, tap) in taps.iter().enumerate() {
                    if !(tap.gain.re.is_finite()
                        && tap.gain.im.is_finite()
                        && tap.delay.is_finite()
                        && tap.doppler.is_finite())
                    {
                        return Err(Error::config(format!("tap {q} has non-finite fields")));
                    }
                    if tap.delay < 0.0 {
                        return Err(Error::config(format!("tap {q} has negative delay {}", tap.delay)));
                    }
                }
                Ok(())
            }
            ChannelModel::LineSpread { g, mu, f0 } => {
                if !(mu.is_finite() && f0.is_finite() && g.tau0.is_finite() && g.step > 0.0) {
                    return Err(Error::config("line-spread parameters must be finite with positive step"));
                }
                if g.samples.is_empty() {
                    return Err(Error::config("line-spread delay profile is empty"));
                }
                if g.tau0 < 0.0 {
                    return Err(Error::config("line-spread delays must be non-negative"));
                }
                Ok(())
            }
            ChannelModel::Tabulated(t) => t.validate(),
        }
    }

    /// Path decomposition for models that are finite sums of delay-Doppler
    /// impulses (multipath, and line-spread with point-mass profiles).
    pub fn taps(&self) -> Option<Vec<Tap>> {
        match self {
            ChannelModel::Multipath { taps } => Some(taps.clone()),
            ChannelModel::LineSpread { g, mu, f0 } => Some(
                g.masses()
                    .map(|(tau, w)| Tap {
                        gain: w,
                        delay: tau,
                        doppler: mu * tau + f0,
                    })
                    .collect(),
            ),
            ChannelModel::Tabulated(_) => None,
        }
    }

    /// True when `h(t, tau)` does not depend on `t`.
    pub fn is_time_invariant(&self) -> bool {
        match self {
            ChannelModel::Tabulated(t) => (1..t.rows).all(|n| (0..t.cols).all(|m| t.at(n, m) == t.at(0, m))),
            _ => self
                .taps()
                .map(|taps| taps.iter().all(|tap| tap.doppler == 0.0))
                .unwrap_or(false),
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: ChannelModel = serde_json::from_str(s)?;
        m.validate()?;
        Ok(m)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Parameters of a random multipath experiment.
///
/// `delta_tau` is in units of the sampling interval and `delta_f` in units of
/// `1 / (n * ts)`, so the Doppler interval in cycles/sample is `delta_f / n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: usize,
    #[serde(default = "default_ts")]
    pub ts: f64,
    pub q: usize,
    pub delta_tau: f64,
    pub delta_f: f64,
    pub seed: u64,
    /// Force every path gain to 1 instead of drawing Rayleigh gains.
    #[serde(default)]
    pub unit_gain: bool,
}

fn default_ts() -> f64 {
    1.0
}

impl ExperimentConfig {
    /// `Q = 10`, `delta_tau = 4 Ts`, `delta_f = 4 / (N Ts)`, `N = 256`.
    pub fn paper(seed: u64) -> Self {
        ExperimentConfig {
            n: 256,
            ts: 1.0,
            q: 10,
            delta_tau: 4.0,
            delta_f: 4.0,
            seed,
            unit_gain: false,
        }
    }

    /// Product of the delay and Doppler spreads (dimensionless).
    pub fn spread_product(&self) -> f64 {
        self.delta_tau * self.delta_f / self.n as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.q == 0 {
            return Err(Error::config("q: path count must be positive"));
        }
        if self.n < 2 {
            return Err(Error::config("n: block length must be at least 2"));
        }
        if !(self.ts > 0.0 && self.ts.is_finite()) {
            return Err(Error::config("ts: sampling time must be positive"));
        }
        if !(self.delta_tau >= 0.0 && self.delta_tau.is_finite()) {
            return Err(Error::config("delta_tau: must be finite and non-negative"));
        }
        if !(self.delta_f >= 0.0 && self.delta_f.is_finite()) {
            return Err(Error::config("delta_f: must be finite and non-negative"));
        }
        if self.spread_product() >= 1.0 {
            log::warn!(
                "channel is not underspread (spread product {:.3} >= 1); the area-rule approximation may not hold",
                self.spread_product()
            );
        }
        Ok(())
    }
}

/// Draws a Rayleigh multipath model: gains i.i.d. unit-variance complex
/// Gaussian, delays uniform on `[0, delta_tau]`, Dopplers uniform on
/// `[-delta_f / 2, delta_f / 2]`. Per tap the draw order is gain (two
/// uniforms, skipped when `unit_gain`), delay, Doppler.
pub fn sample_multipath(cfg: &ExperimentConfig) -> Result<ChannelModel> {
    cfg.validate()?;
    let mut rng = rng::seeded(cfg.seed);
    let doppler_span = cfg.delta_f / cfg.n as f64;
    let taps = (0..cfg.q)
        .map(|_| {
            let gain = if cfg.unit_gain {
                Complex64::new(1.0, 0.0)
            } else {
                rng::complex_gaussian(&mut rng, 1.0)
            };
            let delay = cfg.delta_tau * rng::uniform(&mut rng);
            let doppler = doppler_span * (rng::uniform(&mut rng) - 0.5);
            Tap { gain, delay, doppler }
        })
        .collect();
    Ok(ChannelModel::Multipath { taps })
}

/// Time-varying transfer function `H(t, f)`.
///
/// Tabulated models use the row nearest to `t` (zero outside the table) and
/// evaluate the DTFT over delay exactly.
pub fn transfer_function(model: &ChannelModel, t: f64, f: f64) -> Complex64 {
    match model {
        ChannelModel::Multipath { taps } => taps
            .iter()
            .map(|tap| {
                tap.gain * Complex64::from_polar(1.0, 2.0 * PI * (tap.doppler * t - tap.delay * f))
            })
            .sum(),
        ChannelModel::LineSpread { g, mu, f0 } => {
            Complex64::from_polar(1.0, 2.0 * PI * f0 * t) * g.fourier(f - mu * t)
        }
        ChannelModel::Tabulated(tab) => {
            let n = t.round();
            if n < 0.0 || n >= tab.rows as f64 {
                return Complex64::new(0.0, 0.0);
            }
            let n = n as usize;
            (0..tab.cols)
                .map(|m| tab.at(n, m) * Complex64::from_polar(1.0, -2.0 * PI * f * m as f64))
                .sum()
        }
    }
}

/// One delta mass of a discrete spreading measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpreadingAtom {
    pub delay: f64,
    pub doppler: f64,
    pub weight: Complex64,
}

/// Value of the spreading function: a number for tabulated models, the whole
/// discrete measure for models made of delay-Doppler impulses.
#[derive(Debug, Clone, PartialEq)]
pub enum Spreading {
    Value(Complex64),
    DiscreteMeasure(Vec<SpreadingAtom>),
}

/// Delay-Doppler spreading function `S(tau, nu)`.
///
/// For tabulated models the delay is rounded to the nearest tap index and the
/// DTFT along time is evaluated at `nu`.
pub fn spreading_function(model: &ChannelModel, tau: f64, nu: f64) -> Spreading {
    match model {
        ChannelModel::Tabulated(tab) => {
            let m = tau.round();
            if m < 0.0 || m >= tab.cols as f64 {
                return Spreading::Value(Complex64::new(0.0, 0.0));
            }
            let m = m as usize;
            Spreading::Value(
                (0..tab.rows)
                    .map(|n| tab.at(n, m) * Complex64::from_polar(1.0, -2.0 * PI * nu * n as f64))
                    .sum(),
            )
        }
        _ => Spreading::DiscreteMeasure(
            model
                .taps()
                .unwrap_or_default()
                .into_iter()
                .map(|tap| SpreadingAtom {
                    delay: tap.delay,
                    doppler: tap.doppler,
                    weight: tap.gain,
                })
                .collect(),
        ),
    }
}

/// Band-limited discrete kernel of a model: entry `(n, k)` is `h[n, n - k]`,
/// the response at output sample `n` to a unit sample at input `k`.
#[derive(Debug, Clone)]
pub struct DiscreteKernel {
    repr: KernelRepr,
    time_offset: f64,
}

#[derive(Debug, Clone)]
enum KernelRepr {
    Taps { taps: Vec<Tap>, half_width: f64 },
    Tabulated(TabulatedResponse),
}

impl DiscreteKernel {
    /// `time_offset` shifts the absolute time of output sample 0, so block `b`
    /// of a stream sees the channel as it is at `offset + n`.
    pub fn new(model: &ChannelModel, half_width: usize, time_offset: f64) -> Self {
        let repr = match model {
            ChannelModel::Tabulated(t) => KernelRepr::Tabulated(t.clone()),
            _ => KernelRepr::Taps {
                taps: model.taps().unwrap_or_default(),
                half_width: half_width as f64,
            },
        };
        DiscreteKernel { repr, time_offset }
    }

    /// Range of `n - k` outside of which every entry is zero.
    pub fn lag_support(&self) -> (i64, i64) {
        match &self.repr {
            KernelRepr::Taps { taps, half_width } => {
                let lo = taps.iter().map(|t| t.delay).fold(f64::INFINITY, f64::min);
                let hi = taps.iter().map(|t| t.delay).fold(f64::NEG_INFINITY, f64::max);
                if !lo.is_finite() {
                    return (0, -1);
                }
                ((lo - half_width).ceil() as i64, (hi + half_width).floor() as i64)
            }
            KernelRepr::Tabulated(t) => (0, t.cols as i64 - 1),
        }
    }

    pub fn entry(&self, n: usize, k: usize) -> Complex64 {
        let lag = n as f64 - k as f64;
        match &self.repr {
            KernelRepr::Taps { taps, half_width } => {
                let t = n as f64 + self.time_offset;
                let mut acc = Complex64::new(0.0, 0.0);
                for tap in taps {
                    let x = lag - tap.delay;
                    if x.abs() > *half_width {
                        continue;
                    }
                    let s = sinc(x);
                    if s != 0.0 {
                        acc += tap.gain * Complex64::from_polar(s, 2.0 * PI * tap.doppler * t);
                    }
                }
                acc
            }
            KernelRepr::Tabulated(tab) => {
                let row = n as f64 + self.time_offset;
                if lag < 0.0 || lag >= tab.cols as f64 || row < 0.0 || row >= tab.rows as f64 {
                    return Complex64::new(0.0, 0.0);
                }
                tab.at(row as usize, lag as usize)
            }
        }
    }

    /// `y[n] = sum_k h[n, n-k] x[k]`, output windowed to the input length.
    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let len = x.len() as i64;
        let (lo, hi) = self.lag_support();
        (0..len)
            .map(|n| {
                let k_lo = (n - hi).max(0);
                let k_hi = (n - lo).min(len - 1);
                (k_lo..=k_hi)
                    .map(|k| self.entry(n as usize, k as usize) * x[k as usize])
                    .sum()
            })
            .collect()
    }

    /// Conjugate-transpose action: `z[k] = sum_n conj(h[n, n-k]) x[n]`.
    pub fn apply_adjoint(&self, x: &[Complex64]) -> Vec<Complex64> {
        let len = x.len() as i64;
        let (lo, hi) = self.lag_support();
        (0..len)
            .map(|k| {
                let n_lo = (k + lo).max(0);
                let n_hi = (k + hi).min(len - 1);
                (n_lo..=n_hi)
                    .map(|n| self.entry(n as usize, k as usize).conj() * x[n as usize])
                    .sum()
            })
            .collect()
    }
}

/// Passes `x` through the channel: `y[n] = sum_k h[n, n-k] x[k]` with the
/// band-limited discretization of [`crate::discretize`]. Output length equals
/// input length.
pub fn apply_channel(model: &ChannelModel, x: &[Complex64]) -> Vec<Complex64> {
    DiscreteKernel::new(model, DEFAULT_SINC_HALF_WIDTH, 0.0).apply(x)
}

/// Applies the adjoint channel `H*`.
pub fn apply_adjoint(model: &ChannelModel, x: &[Complex64]) -> Vec<Complex64> {
    DiscreteKernel::new(model, DEFAULT_SINC_HALF_WIDTH, 0.0).apply_adjoint(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
        a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
    }

    fn norm(a: &[Complex64]) -> f64 {
        a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    fn random_signal(seed: u64, len: usize) -> Vec<Complex64> {
        let mut r = rng::seeded(seed);
        (0..len).map(|_| rng::complex_gaussian(&mut r, 1.0)).collect()
    }

    #[test]
    fn paper_config_draws_ten_taps_in_range() {
        let cfg = ExperimentConfig::paper(3);
        let ChannelModel::Multipath { taps } = sample_multipath(&cfg).unwrap() else {
            panic!("expected multipath");
        };
        assert_eq!(taps.len(), 10);
        for tap in &taps {
            assert!((0.0..=4.0).contains(&tap.delay));
            assert!(tap.doppler.abs() <= 2.0 / 256.0);
        }
    }

    #[test]
    fn degenerate_config_is_identity() {
        let cfg = ExperimentConfig {
            n: 16,
            ts: 1.0,
            q: 1,
            delta_tau: 0.0,
            delta_f: 0.0,
            seed: 9,
            unit_gain: true,
        };
        let model = sample_multipath(&cfg).unwrap();
        assert_eq!(model, ChannelModel::identity());
        let x = random_signal(1, 16);
        assert_eq!(apply_channel(&model, &x), x);
    }

    #[test]
    fn sampling_is_deterministic() {
        let cfg = ExperimentConfig::paper(77);
        assert_eq!(sample_multipath(&cfg).unwrap(), sample_multipath(&cfg).unwrap());
        let other = ExperimentConfig::paper(78);
        assert_ne!(sample_multipath(&cfg).unwrap(), sample_multipath(&other).unwrap());
    }

    #[test]
    fn zero_paths_rejected() {
        let mut cfg = ExperimentConfig::paper(1);
        cfg.q = 0;
        assert!(matches!(sample_multipath(&cfg), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn identity_transfer_function_is_one() {
        let m = ChannelModel::identity();
        for &(t, f) in &[(0.0, 0.0), (13.5, 0.31), (-4.0, -0.49)] {
            assert!((transfer_function(&m, t, f) - c(1.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn two_equal_paths_cancel_at_half_period() {
        let tau1 = 3.0;
        let m = ChannelModel::Multipath {
            taps: vec![
                Tap { gain: c(1.0, 0.0), delay: 0.0, doppler: 0.0 },
                Tap { gain: c(1.0, 0.0), delay: tau1, doppler: 0.0 },
            ],
        };
        for &t in &[0.0, 7.0, 100.25] {
            assert!(transfer_function(&m, t, 1.0 / (2.0 * tau1)).norm() < 1e-12);
        }
    }

    #[test]
    fn multipath_transfer_matches_term_by_term_sum() {
        let model = sample_multipath(&ExperimentConfig::paper(5)).unwrap();
        let taps = model.taps().unwrap();
        for n in (0..256).step_by(17) {
            for k in (0..256).step_by(23) {
                let (t, f) = (n as f64, -0.5 + k as f64 / 256.0);
                let mut re = 0.0;
                let mut im = 0.0;
                for tap in &taps {
                    let ph = 2.0 * PI * tap.doppler * t - 2.0 * PI * tap.delay * f;
                    re += tap.gain.re * ph.cos() - tap.gain.im * ph.sin();
                    im += tap.gain.re * ph.sin() + tap.gain.im * ph.cos();
                }
                let h = transfer_function(&model, t, f);
                assert!((h - c(re, im)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn single_tap_spreading_is_one_atom() {
        let m = ChannelModel::Multipath {
            taps: vec![Tap { gain: c(0.5, -1.0), delay: 1.5, doppler: 0.01 }],
        };
        match spreading_function(&m, 0.0, 0.0) {
            Spreading::DiscreteMeasure(atoms) => {
                assert_eq!(atoms.len(), 1);
                assert_eq!(atoms[0].delay, 1.5);
                assert_eq!(atoms[0].doppler, 0.01);
                assert_eq!(atoms[0].weight, c(0.5, -1.0));
            }
            other => panic!("expected measure, got {other:?}"),
        }
    }

    #[test]
    fn line_spread_support_lies_on_line() {
        let g = DelayProfile::from_masses(0.0, 0.5, &[(0.0, c(1.0, 0.0)), (1.5, c(0.3, 0.2)), (3.0, c(-0.7, 0.0))])
            .unwrap();
        let (mu, f0) = (0.002, -0.01);
        let m = ChannelModel::LineSpread { g, mu, f0 };
        let Spreading::DiscreteMeasure(atoms) = spreading_function(&m, 0.0, 0.0) else {
            panic!("expected measure");
        };
        assert_eq!(atoms.len(), 3);
        for a in atoms {
            assert!((a.doppler - (mu * a.delay + f0)).abs() < 1e-15);
        }
    }

    #[test]
    fn line_spread_transfer_is_shifted_profile_transform() {
        let g = DelayProfile::from_masses(0.0, 1.0, &[(0.0, c(1.0, 0.0)), (2.0, c(1.0, 0.0))]).unwrap();
        let (mu, f0) = (1.0 / 256.0, 0.003);
        let m = ChannelModel::LineSpread { g: g.clone(), mu, f0 };
        for &(t, f) in &[(0.0, 0.1), (40.0, -0.2), (255.0, 0.45)] {
            let direct = transfer_function(&m, t, f);
            let via_taps = transfer_function(&ChannelModel::Multipath { taps: m.taps().unwrap() }, t, f);
            assert!((direct - via_taps).norm() < 1e-12);
            let expect = Complex64::from_polar(1.0, 2.0 * PI * f0 * t) * g.fourier(f - mu * t);
            assert!((direct - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn time_invariant_table_has_zero_doppler_mass() {
        let rows = 32;
        let tab = TabulatedResponse::from_fn(rows, 3, |_, m| [c(1.0, 0.0), c(0.5, 0.5), c(-0.2, 0.0)][m]);
        let model = ChannelModel::Tabulated(tab);
        assert!(model.is_time_invariant());
        for m in 0..3 {
            let total: f64 = (0..rows)
                .map(|k| match spreading_function(&model, m as f64, k as f64 / rows as f64) {
                    Spreading::Value(v) => v.norm_sqr(),
                    _ => unreachable!(),
                })
                .sum();
            let Spreading::Value(dc) = spreading_function(&model, m as f64, 0.0) else {
                unreachable!()
            };
            assert!((dc.norm_sqr() - total).abs() < 1e-9 * total.max(1e-30));
        }
    }

    #[test]
    fn tabulated_transfer_and_spreading_are_fourier_pairs() {
        let (rows, cols) = (16usize, 4usize);
        let mut r = rng::seeded(21);
        let tab = TabulatedResponse::from_fn(rows, cols, |_, _| rng::complex_gaussian(&mut r, 1.0));
        let model = ChannelModel::Tabulated(tab.clone());
        // Invert H(n, f_k) over k to recover h[n, m], then transform along n.
        let nf = cols;
        for m in 0..cols {
            for l in 0..rows {
                let nu = l as f64 / rows as f64;
                let mut s = Complex64::new(0.0, 0.0);
                for n in 0..rows {
                    let mut hnm = Complex64::new(0.0, 0.0);
                    for k in 0..nf {
                        let f = k as f64 / nf as f64;
                        hnm += transfer_function(&model, n as f64, f)
                            * Complex64::from_polar(1.0, 2.0 * PI * f * m as f64);
                    }
                    hnm /= nf as f64;
                    s += hnm * Complex64::from_polar(1.0, -2.0 * PI * nu * n as f64);
                }
                let Spreading::Value(direct) = spreading_function(&model, m as f64, nu) else {
                    unreachable!()
                };
                assert!((s - direct).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn pure_integer_delay_shifts() {
        let m = ChannelModel::pure_delay(3.0);
        let x = random_signal(4, 20);
        let y = apply_channel(&m, &x);
        for n in 0..20 {
            let expect = if n >= 3 { x[n - 3] } else { c(0.0, 0.0) };
            assert!((y[n] - expect).norm() < 1e-15);
        }
        let z = apply_adjoint(&m, &x);
        for n in 0..20 {
            let expect = if n + 3 < 20 { x[n + 3] } else { c(0.0, 0.0) };
            assert!((z[n] - expect).norm() < 1e-15);
        }
    }

    #[test]
    fn empty_input_gives_empty_output() {
        let m = sample_multipath(&ExperimentConfig::paper(1)).unwrap();
        assert!(apply_channel(&m, &[]).is_empty());
        assert!(apply_adjoint(&m, &[]).is_empty());
    }

    #[test]
    fn identity_adjoint_is_identity() {
        let x = random_signal(8, 33);
        assert_eq!(apply_adjoint(&ChannelModel::identity(), &x), x);
    }

    #[test]
    fn adjoint_identity_on_random_pairs() {
        let models = [
            sample_multipath(&ExperimentConfig::paper(12)).unwrap(),
            ChannelModel::LineSpread {
                g: DelayProfile::from_masses(0.0, 0.5, &[(0.0, c(1.0, 0.0)), (2.5, c(0.0, 1.0))]).unwrap(),
                mu: 0.004,
                f0: 0.01,
            },
            ChannelModel::Tabulated(TabulatedResponse::from_fn(64, 5, |n, m| {
                c((n as f64 * 0.1).cos(), m as f64 * 0.3)
            })),
        ];
        for (i, model) in models.iter().enumerate() {
            for trial in 0..100 {
                let x = random_signal(1000 + trial, 64);
                let y = random_signal(5000 + trial + 100 * i as u64, 64);
                let lhs = inner(&apply_channel(model, &x), &y);
                let rhs = inner(&x, &apply_adjoint(model, &y));
                assert!((lhs - rhs).norm() <= 1e-10 * norm(&x) * norm(&y));
            }
        }
    }

    #[test]
    fn multipath_json_uses_documented_fields() {
        let m = ChannelModel::Multipath {
            taps: vec![Tap { gain: c(1.0, -2.0), delay: 0.5, doppler: 0.001 }],
        };
        let v: serde_json::Value = serde_json::from_str(&m.to_json().unwrap()).unwrap();
        assert_eq!(v["type"], "multipath");
        assert_eq!(v["taps"][0]["re"], 1.0);
        assert_eq!(v["taps"][0]["im"], -2.0);
        assert_eq!(v["taps"][0]["delay"], 0.5);
        assert_eq!(v["taps"][0]["doppler"], 0.001);
    }

    #[test]
    fn json_rejects_negative_delay() {
        let s = r#"{"type":"multipath","taps":[{"re":1,"im":0,"delay":-1,"doppler":0}]}"#;
        assert!(matches!(ChannelModel::from_json(s), Err(Error::InvalidConfig(_))));
        let s = r#"{"type":"multipath","taps":[]}"#;
        assert!(ChannelModel::from_json(s).is_err());
    }

    proptest! {
        #[test]
        fn model_json_round_trips(
            gains in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0, 0.0f64..8.0, -0.05f64..0.05), 1..8),
            mu in -0.01f64..0.01,
        ) {
            let taps: Vec<Tap> = gains.iter().map(|&(re, im, delay, doppler)| Tap { gain: c(re, im), delay, doppler }).collect();
            let m = ChannelModel::Multipath { taps };
            prop_assert_eq!(ChannelModel::from_json(&m.to_json().unwrap()).unwrap(), m);
            let ls = ChannelModel::LineSpread {
                g: DelayProfile { tau0: 0.0, step: 0.5, samples: gains.iter().map(|g| c(g.0, g.1)).collect() },
                mu,
                f0: 0.0,
            };
            prop_assert_eq!(ChannelModel::from_json(&ls.to_json().unwrap()).unwrap(), ls);
        }
    }
}
