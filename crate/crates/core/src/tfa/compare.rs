use super::distribution::TFDistribution;
use crate::error::{Error, Result};
use crate::wkb::{Axis, Bubble, EigenfunctionModel};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedPoint {
    pub t: f64,
    pub f: f64,
    pub weight: f64,
}

/// Ridge cells of a distribution together with the axes they came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ridge {
    pub t: Axis,
    pub f: Axis,
    pub points: Vec<WeightedPoint>,
}

impl Ridge {
    pub fn total_weight(&self) -> f64 {
        self.points.iter().map(|p| p.weight).sum()
    }

    /// Area of the convex hull of the points.
    pub fn hull_area(&self) -> f64 {
        hull_area(&self.points.iter().map(|p| (p.t, p.f)).collect::<Vec<_>>())
    }
}

/// Cells holding more than `threshold * max`, weighted by their value.
pub fn ridge_extract(dist: &TFDistribution, threshold: f64) -> Result<Ridge> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::config("ridge threshold must lie in (0, 1]"));
    }
    let g = &dist.grid;
    let cut = threshold * g.max();
    let mut points = Vec::new();
    for i in 0..g.t.len {
        for j in 0..g.f.len {
            let v = g.get(i, j);
            if v > cut {
                points.push(WeightedPoint {
                    t: g.t.at(i),
                    f: g.f.at(j),
                    weight: v,
                });
            }
        }
    }
    Ok(Ridge {
        t: g.t,
        f: g.f,
        points,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RidgeMetrics {
    /// Weighted mean distance to the nearest curve, in grid cells.
    pub mean_distance: f64,
    /// Weighted 90th percentile of the same distance.
    pub p90_distance: f64,
    pub total_weight: f64,
    pub ridge_area: f64,
    pub bubble_area: f64,
}

pub fn compare_ridge_to_bubble(ridge: &Ridge, bubble: &Bubble) -> Result<RidgeMetrics> {
    compare_ridge_to_bubbles(ridge, std::slice::from_ref(bubble))
}

/// Distance from each ridge point to the nearest interior segment of any of
/// `bubbles`, measured in cells of the ridge's grid. Frequency is periodic
/// with the period of the grid. Segments running along the window edge are
/// not part of the curve and are skipped.
pub fn compare_ridge_to_bubbles(ridge: &Ridge, bubbles: &[Bubble]) -> Result<RidgeMetrics> {
    let (dt, df) = (ridge.t.step, ridge.f.step);
    let period = df * ridge.f.len as f64;
    let (tlo, thi) = (ridge.t.lo() - dt, ridge.t.hi() + dt);
    let (flo, fhi) = (ridge.f.lo() - df, ridge.f.hi() + df);
    let mut segs = Vec::new();
    for b in bubbles {
        for &(t, f) in &b.polyline {
            if t < tlo || t > thi || f < flo || f > fhi {
                return Err(Error::contract(format!(
                    "bubble vertex ({t}, {f}) lies outside the distribution window"
                )));
            }
        }
        let k = b.polyline.len();
        for i in 0..k {
            let j = (i + 1) % k;
            if b.on_edge[i] && b.on_edge[j] {
                continue;
            }
            let (a, c) = (b.polyline[i], b.polyline[j]);
            segs.push(((a.0 / dt, a.1 / df), (c.0 / dt, c.1 / df)));
        }
    }
    if segs.is_empty() {
        return Err(Error::Degenerate("no curve to compare against".into()));
    }
    let total: f64 = ridge.total_weight();
    if ridge.points.is_empty() || total <= 0.0 {
        return Err(Error::Degenerate("ridge has no mass".into()));
    }
    let cells = period / df;
    let mut dist: Vec<(f64, f64)> = ridge
        .points
        .iter()
        .map(|p| {
            let (x, y) = (p.t / dt, p.f / df);
            let d = segs
                .iter()
                .map(|&(a, b)| {
                    [-cells, 0.0, cells]
                        .iter()
                        .map(|shift| segment_distance((x, y + shift), a, b))
                        .fold(f64::INFINITY, f64::min)
                })
                .fold(f64::INFINITY, f64::min);
            (d, p.weight)
        })
        .collect();
    let mean = dist.iter().map(|(d, w)| d * w).sum::<f64>() / total;
    dist.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut acc = 0.0;
    let mut p90 = dist.last().map_or(0.0, |d| d.0);
    for &(d, w) in &dist {
        acc += w;
        if acc >= 0.9 * total {
            p90 = d;
            break;
        }
    }
    Ok(RidgeMetrics {
        mean_distance: mean,
        p90_distance: p90,
        total_weight: total,
        ridge_area: ridge.hull_area(),
        bubble_area: bubbles.iter().map(Bubble::signed_area).sum(),
    })
}

/// Index of the bubble nearest to the largest share of ridge weight, each
/// point voting for its nearest curve.
pub fn dominant_bubble(ridge: &Ridge, bubbles: &[Bubble]) -> Result<Option<usize>> {
    let mut votes = vec![0.0; bubbles.len()];
    for p in &ridge.points {
        let mut best = (f64::INFINITY, None);
        for (i, b) in bubbles.iter().enumerate() {
            let one = Ridge {
                t: ridge.t,
                f: ridge.f,
                points: vec![*p],
            };
            match compare_ridge_to_bubbles(&one, std::slice::from_ref(b)) {
                Ok(m) if m.mean_distance < best.0 => best = (m.mean_distance, Some(i)),
                Ok(_) | Err(Error::Degenerate(_)) => {}
                Err(e) => return Err(e),
            }
        }
        if let (_, Some(i)) = best {
            votes[i] += p.weight;
        }
    }
    Ok(votes
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > 0.0)
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i))
}

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (vx, vy) = (b.0 - a.0, b.1 - a.1);
    let (wx, wy) = (p.0 - a.0, p.1 - a.1);
    let len2 = vx * vx + vy * vy;
    let s = if len2 > 0.0 {
        ((wx * vx + wy * vy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    ((wx - s * vx).powi(2) + (wy - s * vy).powi(2)).sqrt()
}

/// Convex hull area by the monotone chain.
pub fn hull_area(points: &[(f64, f64)]) -> f64 {
    let mut p = points.to_vec();
    p.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    p.dedup();
    if p.len() < 3 {
        return 0.0;
    }
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0);
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(2 * p.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &(f64, f64)>> = if pass == 0 {
            Box::new(p.iter())
        } else {
            Box::new(p.iter().rev())
        };
        for &q in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], q) <= 0.0 {
                hull.pop();
            }
            hull.push(q);
        }
        hull.pop();
    }
    crate::wkb::signed_polygon_area(&hull).abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmplitudeMode {
    /// Low-passed instantaneous power of both signals.
    Envelope,
    /// Magnitude of the complex inner product per sample, unsmoothed.
    Coherent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeOptions {
    pub mode: AmplitudeMode,
    /// Length of the Gaussian low-pass applied to `|.|^2` in envelope mode;
    /// 1 disables smoothing.
    pub smooth: usize,
}

impl AmplitudeOptions {
    /// Smoothing over `n/16 + 1` samples (forced odd).
    pub fn default_for(n: usize) -> Self {
        let s = n / 16 + 1;
        AmplitudeOptions {
            mode: AmplitudeMode::Envelope,
            smooth: if s.is_multiple_of(2) { s + 1 } else { s },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeMetrics {
    pub pearson: f64,
    pub relative_l2: f64,
    pub valid_samples: usize,
}

/// Envelope of `u` against the summed branches of `model`, on the model's
/// valid mask. Both sides are scaled to unit norm on the mask.
pub fn compare_amplitude(u: &[Complex64], model: &EigenfunctionModel, opts: &AmplitudeOptions) -> Result<AmplitudeMetrics> {
    if u.len() != model.len() {
        return Err(Error::contract(format!(
            "signal has {} samples, model has {}",
            u.len(),
            model.len()
        )));
    }
    let mask = model.valid_mask();
    let synth = model.evaluate();
    let (a, b): (Vec<f64>, Vec<f64>) = match opts.mode {
        AmplitudeMode::Envelope => {
            if opts.smooth == 0 || opts.smooth.is_multiple_of(2) {
                return Err(Error::config("smoothing length must be odd"));
            }
            let pa: Vec<f64> = u.iter().map(|z| z.norm_sqr()).collect();
            let pb: Vec<f64> = synth.iter().map(|z| z.norm_sqr()).collect();
            (
                lowpass(&pa, opts.smooth).into_iter().map(|v| v.max(0.0).sqrt()).collect(),
                lowpass(&pb, opts.smooth).into_iter().map(|v| v.max(0.0).sqrt()).collect(),
            )
        }
        AmplitudeMode::Coherent => (u.iter().map(|z| z.norm()).collect(), synth.iter().map(|z| z.norm()).collect()),
    };
    let pick = |v: &[f64]| -> Vec<f64> { v.iter().zip(&mask).filter(|(_, &m)| m).map(|(x, _)| *x).collect() };
    let (a, b) = (pick(&a), pick(&b));
    if a.len() < 2 {
        return Err(Error::Degenerate("valid mask holds fewer than two samples".into()));
    }
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let (na, nb) = (norm(&a), norm(&b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::Degenerate("an envelope vanishes on the valid mask".into()));
    }
    let a: Vec<f64> = a.iter().map(|x| x / na).collect();
    let b: Vec<f64> = b.iter().map(|x| x / nb).collect();
    let relative_l2 = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    Ok(AmplitudeMetrics {
        pearson: pearson(&a, &b),
        relative_l2,
        valid_samples: a.len(),
    })
}

/// Sample Pearson correlation; 0 when either side is constant.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    if saa == 0.0 || sbb == 0.0 {
        0.0
    } else {
        sab / (saa * sbb).sqrt()
    }
}

/// Normalized Gaussian smoothing, renormalized where the window leaves the
/// sequence.
fn lowpass(x: &[f64], len: usize) -> Vec<f64> {
    let w = super::distribution::gaussian_window(len, super::distribution::WINDOW_EDGE);
    let half = (len / 2) as i64;
    let n = x.len() as i64;
    (0..n)
        .map(|i| {
            let (mut acc, mut sum) = (0.0, 0.0);
            for k in -half..=half {
                let j = i + k;
                if j >= 0 && j < n {
                    let wk = w[(k + half) as usize];
                    acc += wk * x[j as usize];
                    sum += wk;
                }
            }
            acc / sum
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{complex_gaussian, seeded};
    use crate::wkb::{extract_level_set, turning_points, synthesize_eigenfunction, TFGrid};

    fn circle(n: usize, r: f64) -> Bubble {
        let poly: Vec<(f64, f64)> = (0..n)
            .map(|k| {
                let a = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                (64.0 + r * a.cos(), (r * a.sin()) / 128.0)
            })
            .collect();
        Bubble {
            area: crate::wkb::signed_polygon_area(&poly),
            on_edge: vec![false; n],
            polyline: poly,
            level: 1.0,
            hole: false,
            clipped: false,
            turning_points: Vec::new(),
        }
    }

    fn ridge_axes() -> (Axis, Axis) {
        (Axis::new(0.0, 1.0, 128), Axis::new(-0.5, 1.0 / 128.0, 128))
    }

    #[test]
    fn points_on_the_curve_have_zero_distance() {
        let b = circle(400, 20.0);
        let (t, f) = ridge_axes();
        let points = b.polyline.iter().map(|&(t, f)| WeightedPoint { t, f, weight: 1.0 }).collect();
        let m = compare_ridge_to_bubble(&Ridge { t, f, points }, &b).unwrap();
        assert!(m.mean_distance < 1e-12 && m.p90_distance < 1e-12);
    }

    #[test]
    fn offset_of_two_bins() {
        // A horizontal segment pair; points shifted by two bins in f.
        let b = Bubble {
            polyline: vec![(10.0, 0.0), (100.0, 0.0), (100.0, 0.2), (10.0, 0.2)],
            on_edge: vec![false; 4],
            level: 1.0,
            area: 18.0,
            hole: false,
            clipped: false,
            turning_points: Vec::new(),
        };
        let (t, f) = ridge_axes();
        let points = (30..80)
            .map(|m| WeightedPoint {
                t: m as f64,
                f: 2.0 * f.step,
                weight: 1.0 + m as f64,
            })
            .collect();
        let m = compare_ridge_to_bubble(&Ridge { t, f, points }, &b).unwrap();
        assert!((m.mean_distance - 2.0).abs() < 1e-9);
        assert!((m.p90_distance - 2.0).abs() < 1e-9);
    }

    #[test]
    fn frequency_distance_wraps() {
        let b = Bubble {
            polyline: vec![(10.0, -0.49), (100.0, -0.49), (100.0, -0.3), (10.0, -0.3)],
            on_edge: vec![false; 4],
            level: 1.0,
            area: 1.0,
            hole: false,
            clipped: false,
            turning_points: Vec::new(),
        };
        let (t, f) = ridge_axes();
        let points = vec![WeightedPoint { t: 50.0, f: 0.49, weight: 1.0 }];
        let m = compare_ridge_to_bubble(&Ridge { t, f, points }, &b).unwrap();
        assert!((m.mean_distance - 0.02 * 128.0).abs() < 1e-9);
    }

    #[test]
    fn bubble_outside_the_window_is_a_contract_error() {
        let mut b = circle(50, 20.0);
        for p in &mut b.polyline {
            p.0 *= 1000.0;
        }
        let (t, f) = ridge_axes();
        let ridge = Ridge {
            t,
            f,
            points: vec![WeightedPoint { t: 1.0, f: 0.0, weight: 1.0 }],
        };
        assert!(matches!(compare_ridge_to_bubble(&ridge, &b), Err(Error::Contract(_))));
    }

    #[test]
    fn dominant_bubble_takes_the_weighted_vote() {
        let (t, f) = ridge_axes();
        let near = circle(200, 10.0);
        let mut far = circle(200, 10.0);
        far.polyline.iter_mut().for_each(|p| p.0 += 40.0);
        let points = vec![
            WeightedPoint { t: 74.0, f: 0.0, weight: 1.0 },
            WeightedPoint { t: 114.0, f: 0.0, weight: 3.0 },
        ];
        let ridge = Ridge { t, f, points };
        assert_eq!(dominant_bubble(&ridge, &[near.clone(), far]).unwrap(), Some(1));
        assert_eq!(dominant_bubble(&Ridge { t, f, points: vec![] }, &[near]).unwrap(), None);
    }

    #[test]
    fn ridge_extraction() {
        let (t, f) = ridge_axes();
        let mut values = vec![0.0; 128 * 128];
        for i in 0..128 {
            values[i * 128 + 70] = 1.0;
        }
        let g = TFGrid::new(t, f, values).unwrap();
        let d = TFDistribution {
            grid: g,
            kind: super::super::TfdKind::Rspwvd,
            windows: None,
            analytic: false,
            boundary: super::super::Boundary::Periodic,
        };
        let r = ridge_extract(&d, 0.5).unwrap();
        assert_eq!(r.points.len(), 128);
        assert!(r.points.iter().all(|p| (p.f - f.at(70)).abs() < 1e-15));
        assert!(ridge_extract(&d, 1.0).unwrap().points.is_empty());
        assert!(ridge_extract(&d, 0.0).is_err());
    }

    #[test]
    fn hull_of_square_and_degenerate_sets() {
        let sq = [(0.0, 0.0), (2.0, 0.0), (2.0, 2.0), (0.0, 2.0), (1.0, 1.0), (1.0, 0.0)];
        assert!((hull_area(&sq) - 4.0).abs() < 1e-12);
        assert_eq!(hull_area(&[(0.0, 0.0), (1.0, 1.0), (2.0, 2.0)]), 0.0);
        assert_eq!(hull_area(&[]), 0.0);
    }

    fn paraboloid_model() -> EigenfunctionModel {
        let n = 64;
        let grid = TFGrid::from_fn(crate::wkb::time_axis(n, 4), crate::wkb::freq_axis(n, 4), |t, f| {
            3.0 - ((t - 31.5) / 30.0).powi(2) - (f / 0.4).powi(2)
        })
        .unwrap();
        let b = extract_level_set(&grid, 2.6).unwrap().remove(0);
        let b = turning_points(&b, &grid).unwrap();
        synthesize_eigenfunction(&b, &grid, 2.6).unwrap()
    }

    #[test]
    fn model_against_its_own_synthesis() {
        let model = paraboloid_model();
        let u = model.evaluate();
        for mode in [AmplitudeMode::Envelope, AmplitudeMode::Coherent] {
            let m = compare_amplitude(&u, &model, &AmplitudeOptions { mode, smooth: 9 }).unwrap();
            assert!((m.pearson - 1.0).abs() < 1e-12);
            assert!(m.relative_l2 < 1e-12);
        }
        // Scale and a global phase do not matter.
        let scaled: Vec<Complex64> = u.iter().map(|z| z * Complex64::new(0.0, -3.0)).collect();
        let m = compare_amplitude(&scaled, &model, &AmplitudeOptions::default_for(64)).unwrap();
        assert!((m.pearson - 1.0).abs() < 1e-12);
    }

    #[test]
    fn white_noise_is_uncorrelated_with_the_model() {
        let n = 256;
        let grid = TFGrid::from_fn(crate::wkb::time_axis(n, 4), crate::wkb::freq_axis(n, 4), |t, f| {
            3.0 - ((t - 127.5) / 120.0).powi(2) - (f / 0.4).powi(2)
        })
        .unwrap();
        let b = turning_points(&extract_level_set(&grid, 2.6).unwrap().remove(0), &grid).unwrap();
        let model = synthesize_eigenfunction(&b, &grid, 2.6).unwrap();
        let mut rng = seeded(7);
        let noise: Vec<Complex64> = (0..n).map(|_| complex_gaussian(&mut rng, 1.0)).collect();
        let m = compare_amplitude(&noise, &model, &AmplitudeOptions { mode: AmplitudeMode::Coherent, smooth: 1 }).unwrap();
        assert!(m.pearson.abs() < 0.3, "{}", m.pearson);
    }

    #[test]
    fn length_mismatch_and_empty_mask() {
        let model = paraboloid_model();
        let short = vec![Complex64::new(1.0, 0.0); 10];
        assert!(matches!(
            compare_amplitude(&short, &model, &AmplitudeOptions::default_for(64)),
            Err(Error::Contract(_))
        ));
        let mut blind = model.clone();
        for c in &mut blind.components {
            c.valid.iter_mut().for_each(|v| *v = false);
        }
        assert!(matches!(
            compare_amplitude(&model.evaluate(), &blind, &AmplitudeOptions::default_for(64)),
            Err(Error::Degenerate(_))
        ));
    }
}
