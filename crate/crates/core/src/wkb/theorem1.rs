use crate::channel::ChannelModel;
use crate::error::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Closed-form singular triple of a line-concentrated spreading function.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedFormTriple {
    pub v: Vec<Complex64>,
    pub u: Vec<Complex64>,
    pub sigma: f64,
}

/// `v(t) = e^{j2 pi f_i t} e^{j pi mu t^2}`,
/// `u(t) = e^{j2 pi f0 t} e^{j arg K(f_i, mu)} v(t)`, `sigma = |K(f_i, mu)|`,
/// sampled at `t = 0, .., n-1` and normalized to unit norm.
pub fn theorem1_solution(model: &ChannelModel, f_i: f64, n: usize) -> Result<ClosedFormTriple> {
    let ChannelModel::LineSpread { g, mu, f0 } = model else {
        return Err(Error::ModelKind {
            expected: "line_spread",
            found: model.kind(),
        });
    };
    if n == 0 {
        return Err(Error::config("need at least one sample"));
    }
    let k = g.chirp_transform(f_i, *mu);
    let scale = 1.0 / (n as f64).sqrt();
    let rot = if k.norm() > 0.0 { k / k.norm() } else { Complex64::new(1.0, 0.0) };
    let v: Vec<Complex64> = (0..n)
        .map(|t| {
            let t = t as f64;
            Complex64::from_polar(scale, 2.0 * PI * f_i * t + PI * mu * t * t)
        })
        .collect();
    let u = v
        .iter()
        .enumerate()
        .map(|(t, &z)| Complex64::from_polar(1.0, 2.0 * PI * f0 * t as f64) * rot * z)
        .collect();
    Ok(ClosedFormTriple {
        v,
        u,
        sigma: k.norm(),
    })
}

/// `|K(i/n, mu)|` for `i = 0, .., n-1`, the closed-form singular values of an
/// `n`-sample block, in index order.
pub fn theorem1_sigmas(model: &ChannelModel, n: usize) -> Result<Vec<f64>> {
    let ChannelModel::LineSpread { g, mu, .. } = model else {
        return Err(Error::ModelKind {
            expected: "line_spread",
            found: model.kind(),
        });
    };
    Ok((0..n).map(|i| g.chirp_transform(i as f64 / n as f64, *mu).norm()).collect())
}
