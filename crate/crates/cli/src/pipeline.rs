//! Prediction and validation steps shared by the subcommands.

use crate::config::TfaConfig;
use crate::error::CliResult;
use ltv_core::tfa::{
    compare_amplitude, compare_ridge_to_bubbles, dominant_bubble, ridge_extract, rspwvd, AmplitudeMetrics, Boundary,
    Ridge, RidgeMetrics, SpwvdOptions, TFDistribution,
};
use ltv_core::wkb::{
    extract_level_set, synthesize_with, turning_points_with, Bubble, EigenfunctionModel, PowerGradient,
    SynthesisOptions, TFGrid,
};
use ltv_core::Complex64;
use serde::{Deserialize, Serialize};

/// WKB model synthesized on bubble `bubble` of a level set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Synthesized {
    pub bubble: usize,
    pub model: EigenfunctionModel,
}

/// Level curves at one singular level and the WKB models built on them.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LevelPrediction {
    pub bubbles: Vec<Bubble>,
    pub models: Vec<Synthesized>,
}

/// Bubbles of `grid` at `sigma` with their turning points, and a WKB model
/// for every outer bubble on which synthesis succeeds. Bubbles that cannot
/// be annotated or synthesized are kept or dropped with a warning.
pub fn predict_level(grid: &TFGrid, grad: &PowerGradient, sigma: f64) -> CliResult<LevelPrediction> {
    let mut out = LevelPrediction::default();
    if !(sigma > 0.0) || sigma > grid.max() {
        log::warn!("level {sigma} is outside (0, {}]; no bubbles", grid.max());
        return Ok(out);
    }
    for raw in extract_level_set(grid, sigma)? {
        match turning_points_with(&raw, grad) {
            Ok(b) => out.bubbles.push(b),
            Err(e) => log::warn!("skipping bubble at level {sigma}: {e}"),
        }
    }
    for (i, b) in out.bubbles.iter().enumerate() {
        if b.hole {
            continue;
        }
        match synthesize_with(b, grid, grad, sigma, &SynthesisOptions::default()) {
            Ok(model) => out.models.push(Synthesized { bubble: i, model }),
            Err(e) => log::warn!("no WKB model for bubble {i} at level {sigma}: {e}"),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetMetrics {
    pub ridge: Option<RidgeMetrics>,
    /// Bubble whose WKB model was compared against the signal.
    pub bubble: Option<usize>,
    pub amplitude: Option<AmplitudeMetrics>,
}

pub struct Comparison {
    pub metrics: TargetMetrics,
    pub distribution: TFDistribution,
    pub ridge: Ridge,
}

pub fn spwvd_options(cfg: &TfaConfig, n: usize, ts: f64) -> SpwvdOptions {
    SpwvdOptions {
        windows: cfg.windows(n),
        ts,
        analytic: false,
        boundary: Boundary::Periodic,
    }
}

/// Reassigned distribution and ridge of `u`, compared against the bubbles
/// of `pred`. The amplitude is compared against `model` when given,
/// otherwise against the model of the bubble that collects most ridge
/// weight.
pub fn compare_signal(
    u: &[Complex64],
    ts: f64,
    pred: &LevelPrediction,
    model: Option<usize>,
    cfg: &TfaConfig,
) -> CliResult<Comparison> {
    let n = u.len();
    let distribution = rspwvd(u, &spwvd_options(cfg, n, ts))?;
    let ridge = ridge_extract(&distribution, cfg.ridge_threshold)?;
    let ridge_metrics = if pred.bubbles.is_empty() {
        None
    } else {
        Some(compare_ridge_to_bubbles(&ridge, &pred.bubbles)?)
    };
    let chosen = match model {
        Some(m) => Some(m),
        None => {
            let candidates: Vec<Bubble> = pred.models.iter().map(|s| pred.bubbles[s.bubble].clone()).collect();
            dominant_bubble(&ridge, &candidates)?
        }
    };
    let amplitude = match chosen.map(|m| compare_amplitude(u, &pred.models[m].model, &cfg.amplitude(n))) {
        Some(Ok(a)) => Some(a),
        Some(Err(ltv_core::Error::Degenerate(msg))) => {
            log::warn!("amplitude not compared: {msg}");
            None
        }
        Some(Err(e)) => return Err(e.into()),
        None => None,
    };
    Ok(Comparison {
        metrics: TargetMetrics {
            ridge: ridge_metrics,
            bubble: chosen.map(|m| pred.models[m].bubble),
            amplitude,
        },
        distribution,
        ridge,
    })
}

/// `t,f,weight` rows.
pub fn ridge_csv(ridge: &Ridge) -> String {
    let mut s = String::from("t,f,weight\n");
    for p in &ridge.points {
        s.push_str(&format!("{},{},{}\n", p.t, p.f, p.weight));
    }
    s
}

/// `t,numeric,model,valid` with the magnitudes of a signal and of a WKB
/// model, both scaled to unit norm.
pub fn envelope_csv(u: &[Complex64], model: &EigenfunctionModel) -> String {
    let unit = |v: Vec<f64>| {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.into_iter().map(|x| if norm > 0.0 { x / norm } else { 0.0 }).collect::<Vec<_>>()
    };
    let a = unit(u.iter().map(|z| z.norm()).collect());
    let b = unit(model.evaluate().iter().map(|z| z.norm()).collect());
    let valid = model.valid_mask();
    let mut s = String::from("t,numeric,model,valid\n");
    for i in 0..u.len() {
        s.push_str(&format!("{},{},{},{}\n", model.time(i), a[i], b[i], valid[i] as u8));
    }
    s
}
