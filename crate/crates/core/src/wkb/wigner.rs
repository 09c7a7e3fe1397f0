use super::grid::{Axis, TFGrid};
use crate::discretize::ChannelMatrix;
use crate::error::{Error, Result};
use crate::spectral::composite_kernel;
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;

/// Largest imaginary part tolerated, relative to the largest magnitude.
pub const IMAG_TOLERANCE: f64 = 1e-8;

/// Wigner transform of the composite kernel `K = H H^*`:
/// `K~(p, q) = sum_u K(q + u/2, q - u/2) e^{-j2 pi p u}`.
///
/// For odd `u` the arguments are half-integers. Those values are taken on
/// the diagonal `s -> K(s + u, s)`, which varies only at the rate of the
/// Doppler differences, by a centred Lagrange midpoint stencil of up to six
/// points. The grid has one row per sample time `q` and `n` frequency bins
/// `p` across `[-1/2, 1/2)`.
pub fn wigner_symbol(h: &ChannelMatrix) -> Result<TFGrid> {
    let n = h.n();
    let k = composite_kernel(h);

    let t = Axis::covering(-0.5, n as f64 - 0.5, n);
    let f = Axis::covering(-0.5, 0.5, n);
    let rows: Vec<(Vec<f64>, f64, f64)> = (0..n)
        .into_par_iter()
        .map(|q| {
            let reach = 2 * q.min(n - 1 - q);
            // lagged[u] = (K(q + u/2, q - u/2), K(q - u/2, q + u/2))
            let lagged: Vec<(Complex64, Complex64)> = (0..=reach)
                .map(|u| {
                    if u % 2 == 0 {
                        let (a, b) = (q + u / 2, q - u / 2);
                        (k[(a, b)], k[(b, a)])
                    } else {
                        let s0 = q - u.div_ceil(2);
                        let len = n - u;
                        (
                            midpoint(|s| k[(s + u, s)], s0, len),
                            midpoint(|s| k[(s, s + u)], s0, len),
                        )
                    }
                })
                .collect();
            let mut row = vec![0.0; f.len];
            let (mut worst_im, mut worst_abs) = (0.0f64, 0.0f64);
            for (j, out) in row.iter_mut().enumerate() {
                let w = Complex64::from_polar(1.0, -2.0 * PI * f.at(j));
                let mut tw = Complex64::new(1.0, 0.0);
                let mut acc = lagged[0].0;
                for &(fwd, back) in &lagged[1..] {
                    tw *= w;
                    acc += fwd * tw + back * tw.conj();
                }
                worst_im = worst_im.max(acc.im.abs());
                worst_abs = worst_abs.max(acc.norm());
                *out = acc.re;
            }
            (row, worst_im, worst_abs)
        })
        .collect();
    let worst_im = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    let worst_abs = rows.iter().map(|r| r.2).fold(0.0, f64::max);
    if worst_im > IMAG_TOLERANCE * worst_abs.max(f64::MIN_POSITIVE) {
        return Err(Error::Numerical(format!(
            "Wigner symbol has imaginary residue {worst_im:e} against peak {worst_abs:e}"
        )));
    }
    let values = rows.into_iter().flat_map(|r| r.0).collect();
    TFGrid::new(t, f, values)
}

/// Value halfway between samples `s0` and `s0 + 1` of a sequence of length
/// `len`, by the widest centred Lagrange stencil (6, 4 or 2 points) that fits.
fn midpoint(d: impl Fn(usize) -> Complex64, s0: usize, len: usize) -> Complex64 {
    if s0 >= 2 && s0 + 3 < len {
        (d(s0 - 2) * 3.0 - d(s0 - 1) * 25.0 + (d(s0) + d(s0 + 1)) * 150.0 - d(s0 + 2) * 25.0 + d(s0 + 3) * 3.0) / 256.0
    } else if s0 >= 1 && s0 + 2 < len {
        (-d(s0 - 1) + (d(s0) + d(s0 + 1)) * 9.0 - d(s0 + 2)) / 16.0
    } else {
        (d(s0) + d(s0 + 1)) * 0.5
    }
}

/// Relative L2 deviation `||a - b|| / ||a||` over the cells of `a` that hold
/// the top `fraction` of its energy (`sum a^2`).
pub fn energetic_deviation(a: &TFGrid, b: &TFGrid, fraction: f64) -> Result<f64> {
    if !a.same_axes(b) {
        return Err(Error::contract("grids have different axes"));
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::config("energy fraction must lie in (0, 1]"));
    }
    let mut order: Vec<usize> = (0..a.values.len()).collect();
    order.sort_by(|&i, &j| (a.values[j] * a.values[j]).total_cmp(&(a.values[i] * a.values[i])));
    let total: f64 = a.values.iter().map(|v| v * v).sum();
    let (mut acc, mut num, mut den) = (0.0, 0.0, 0.0);
    for i in order {
        if acc >= fraction * total {
            break;
        }
        let e = a.values[i] * a.values[i];
        acc += e;
        den += e;
        num += (a.values[i] - b.values[i]).powi(2);
    }
    if den == 0.0 {
        return Err(Error::Degenerate("reference grid has no energy".into()));
    }
    Ok((num / den).sqrt())
}
