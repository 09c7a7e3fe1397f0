use super::contour::{Bubble, TurningKind};
use super::grid::TFGrid;
use super::turning::PowerGradient;
use crate::discretize::ChannelMatrix;
use crate::error::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthesisOptions {
    /// Half-width, in samples, of the neighbourhood of each turning point
    /// excluded from the valid mask.
    pub exclusion: f64,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        SynthesisOptions { exclusion: 3.0 }
    }
}

/// One branch `A(t) e^{j phi(t)}` of an approximate singular function,
/// sampled on the block's sample times. Outside the branch's time support
/// `covered` is false and the other fields are zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub frequency: Vec<f64>,
    pub amplitude: Vec<f64>,
    pub phase: Vec<f64>,
    pub covered: Vec<bool>,
    pub valid: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenfunctionModel {
    /// Time of sample 0 and sample spacing.
    pub t0: f64,
    pub ts: f64,
    pub sigma: f64,
    pub components: Vec<Component>,
    /// Phase gained over one full traversal of the bubble, jumps included.
    /// For a closed bubble at an admissible level this is a multiple of 2 pi.
    pub loop_phase: f64,
    pub bubble: Bubble,
}

impl EigenfunctionModel {
    pub fn len(&self) -> usize {
        self.components.first().map_or(0, |c| c.amplitude.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn time(&self, n: usize) -> f64 {
        self.t0 + n as f64 * self.ts
    }

    /// `sum_m A_m(t) e^{j phi_m(t)}`.
    pub fn evaluate(&self) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.len()];
        for c in &self.components {
            for (n, z) in out.iter_mut().enumerate() {
                if c.covered[n] {
                    *z += Complex64::from_polar(c.amplitude[n], c.phase[n]);
                }
            }
        }
        out
    }

    /// `sum_m A_m(t)^2`, the envelope with cross terms between branches
    /// dropped.
    pub fn envelope_power(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for c in &self.components {
            for (n, p) in out.iter_mut().enumerate() {
                if c.covered[n] {
                    *p += c.amplitude[n] * c.amplitude[n];
                }
            }
        }
        out
    }

    /// Samples covered by at least one branch and valid in every branch that
    /// covers them.
    pub fn valid_mask(&self) -> Vec<bool> {
        (0..self.len())
            .map(|n| {
                let covering = self.components.iter().filter(|c| c.covered[n]);
                let mut any = false;
                for c in covering {
                    if !c.valid[n] {
                        return false;
                    }
                    any = true;
                }
                any
            })
            .collect()
    }

    /// Per-branch table `t,m,f,A,phi,valid` over covered samples.
    pub fn branch_csv(&self) -> String {
        let mut s = String::from("t,m,f,A,phi,valid\n");
        for (m, c) in self.components.iter().enumerate() {
            for n in 0..self.len() {
                if c.covered[n] {
                    let _ = writeln!(
                        s,
                        "{},{m},{},{},{},{}",
                        self.time(n),
                        c.frequency[n],
                        c.amplitude[n],
                        c.phase[n],
                        u8::from(c.valid[n])
                    );
                }
            }
        }
        s
    }
}

/// WKB model of the left singular function living on `bubble`.
pub fn synthesize_eigenfunction(bubble: &Bubble, grid: &TFGrid, sigma: f64) -> Result<EigenfunctionModel> {
    synthesize_with(bubble, grid, &PowerGradient::new(grid), sigma, &SynthesisOptions::default())
}

/// [`synthesize_eigenfunction`] with a precomputed gradient of `|H|^2`.
///
/// The bubble is cut into branches at its turning points and where it meets
/// the window edge; each branch is single valued in `t`. Phase accumulates
/// as `2 pi int f dt` along the traversal, jumping by `+pi/2` at convex and
/// `-pi/2` at concave turning points. Amplitudes are
/// `|d|H|^2/df|^{-1/2}` along each branch.
pub fn synthesize_with(
    bubble: &Bubble,
    grid: &TFGrid,
    grad: &PowerGradient,
    sigma: f64,
    opts: &SynthesisOptions,
) -> Result<EigenfunctionModel> {
    if !grad.same_axes(grid) {
        return Err(Error::contract("gradient and grid axes differ"));
    }
    if (bubble.level - sigma).abs() > 1e-9 * sigma.abs().max(bubble.level.abs()) {
        return Err(Error::contract(format!(
            "bubble level {} does not match sigma {sigma}",
            bubble.level
        )));
    }
    let nv = bubble.polyline.len();
    if nv < 3 {
        return Err(Error::MalformedBubble(format!("bubble with {nv} vertices")));
    }
    if bubble.turning_points.is_empty() && !bubble.clipped {
        return Err(Error::MalformedBubble(
            "closed bubble without turning points (not annotated?)".into(),
        ));
    }

    let tp_at: Vec<Option<TurningKind>> = {
        let mut v = vec![None; nv];
        for tp in &bubble.turning_points {
            v[tp.vertex % nv] = Some(tp.kind);
        }
        v
    };
    let is_cut = |k: usize| tp_at[k].is_some();

    // Start the traversal on a cut: a turning point, or the first interior
    // vertex after a window edge run.
    let start = (0..nv)
        .find(|&k| bubble.on_edge[(k + nv - 1) % nv] && !bubble.on_edge[k])
        .or_else(|| (0..nv).find(|&k| is_cut(k)))
        .ok_or_else(|| Error::MalformedBubble("no place to cut the bubble".into()))?;

    // Walk once around, accumulating phase and collecting branches.
    let mut arcs: Vec<Vec<(f64, f64, f64)>> = Vec::new();
    let mut current: Vec<(f64, f64, f64)> = Vec::new();
    let mut phase = 0.0;
    for step in 0..=nv {
        let k = (start + step) % nv;
        if step > 0 {
            let (t0, f0) = bubble.polyline[(k + nv - 1) % nv];
            let (t1, f1) = bubble.polyline[k];
            phase += PI * (f0 + f1) * (t1 - t0);
        }
        let (t, f) = bubble.polyline[k];
        if bubble.on_edge[k] {
            if current.len() >= 2 {
                arcs.push(std::mem::take(&mut current));
            }
            current.clear();
            continue;
        }
        current.push((t, f, phase));
        if step > 0 && is_cut(k) {
            if current.len() >= 2 {
                arcs.push(std::mem::take(&mut current));
            }
            current.clear();
            phase += match tp_at[k] {
                Some(TurningKind::Convex) => FRAC_PI_2,
                Some(TurningKind::Concave) => -FRAC_PI_2,
                None => 0.0,
            };
            if step < nv {
                current.push((t, f, phase));
            }
        }
    }
    if current.len() >= 2 {
        arcs.push(current);
    }
    let loop_phase = phase;

    let n = grid.block_len();
    let ts = grid.ts();
    let t0 = grid.t.lo() + ts / 2.0;
    let tps: Vec<f64> = bubble.turning_points.iter().map(|p| p.t).collect();
    let components = arcs
        .into_iter()
        .map(|mut arc| {
            arc.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut c = Component {
                frequency: vec![0.0; n],
                amplitude: vec![0.0; n],
                phase: vec![0.0; n],
                covered: vec![false; n],
                valid: vec![false; n],
            };
            let (ta, tb) = (arc[0].0, arc[arc.len() - 1].0);
            for s in 0..n {
                let t = t0 + s as f64 * ts;
                if t < ta || t > tb {
                    continue;
                }
                let j = arc.partition_point(|p| p.0 <= t).clamp(1, arc.len() - 1);
                let (p, q) = (arc[j - 1], arc[j]);
                let w = if q.0 > p.0 { (t - p.0) / (q.0 - p.0) } else { 0.0 };
                let f = p.1 + w * (q.1 - p.1);
                let slope = grad.d_df.interpolate(t, f).abs();
                let amp = if slope > 0.0 { slope.powf(-0.5) } else { 0.0 };
                c.frequency[s] = f;
                c.phase[s] = p.2 + w * (q.2 - p.2);
                c.amplitude[s] = amp;
                c.covered[s] = true;
                c.valid[s] = amp.is_finite() && slope > 0.0 && tps.iter().all(|&tp| (t - tp).abs() > opts.exclusion * ts);
            }
            c
        })
        .filter(|c| c.covered.iter().any(|&x| x))
        .collect::<Vec<_>>();

    Ok(EigenfunctionModel {
        t0,
        ts,
        sigma,
        components,
        loop_phase,
        bubble: bubble.clone(),
    })
}

/// Right singular function from a left one: `v = H^* u / sigma`.
pub fn right_from_left(h: &ChannelMatrix, u: &[Complex64], sigma: f64) -> Result<Vec<Complex64>> {
    if u.len() != h.n() {
        return Err(Error::contract(format!("vector of length {} for a {}-sample matrix", u.len(), h.n())));
    }
    if !(sigma > 0.0) {
        return Err(Error::input("sigma must be positive"));
    }
    Ok(h.apply_adjoint(u).into_iter().map(|z| z / sigma).collect())
}
