//! Dense singular value decomposition of channel matrices and checks of the
//! singular-system relations `H v = sigma u`, `H* u = sigma v`.

use crate::discretize::ChannelMatrix;
use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Singular values in descending order with their left (`u`) and right (`v`)
/// singular vectors as matrix columns.
///
/// Phase convention: the largest-magnitude entry of each `v_i` is real and
/// positive; `u_i` carries the same phase rotation so `H v_i = sigma_i u_i`.
/// Within clusters of (near-)equal singular values the vectors are an
/// arbitrary orthonormal basis of the cluster subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdResult {
    pub sigmas: Vec<f64>,
    pub u: DMatrix<Complex64>,
    pub v: DMatrix<Complex64>,
}

impl SvdResult {
    pub fn n(&self) -> usize {
        self.sigmas.len()
    }

    pub fn left(&self, i: usize) -> Vec<Complex64> {
        self.u.column(i).iter().copied().collect()
    }

    pub fn right(&self, i: usize) -> Vec<Complex64> {
        self.v.column(i).iter().copied().collect()
    }

    pub fn reconstruct(&self) -> DMatrix<Complex64> {
        let mut us = self.u.clone();
        for (i, &s) in self.sigmas.iter().enumerate() {
            us.column_mut(i).scale_mut(s);
        }
        us * self.v.adjoint()
    }

    /// `max(||U*U - I||_max, ||V*V - I||_max)`.
    pub fn unitarity_error(&self) -> f64 {
        let n = self.u.ncols();
        let id = DMatrix::<Complex64>::identity(n, n);
        let eu = (self.u.adjoint() * &self.u - &id).iter().map(|z| z.norm()).fold(0.0, f64::max);
        let ev = (self.v.adjoint() * &self.v - &id).iter().map(|z| z.norm()).fold(0.0, f64::max);
        eu.max(ev)
    }
}

pub fn svd(h: &ChannelMatrix) -> Result<SvdResult> {
    svd_of(&h.entries)
}

pub fn svd_of(m: &DMatrix<Complex64>) -> Result<SvdResult> {
    if !m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::input("matrix has non-finite entries"));
    }
    let dec = m.clone().svd(true, true);
    let (Some(u), Some(v_t)) = (dec.u, dec.v_t) else {
        return Err(Error::Numerical("SVD did not return singular vectors".into()));
    };
    let v = v_t.adjoint();
    let mut order: Vec<usize> = (0..dec.singular_values.len()).collect();
    order.sort_by(|&a, &b| dec.singular_values[b].total_cmp(&dec.singular_values[a]));

    let n = order.len();
    let mut sigmas = Vec::with_capacity(n);
    let mut uo = DMatrix::<Complex64>::zeros(u.nrows(), n);
    let mut vo = DMatrix::<Complex64>::zeros(v.nrows(), n);
    for (dst, &src) in order.iter().enumerate() {
        sigmas.push(dec.singular_values[src].max(0.0));
        let vc = v.column(src);
        let mut best = 0;
        let mut best_mag = -1.0;
        for (r, z) in vc.iter().enumerate() {
            let mag = z.norm();
            if mag > best_mag * (1.0 + 1e-12) {
                best = r;
                best_mag = mag;
            }
        }
        let phase = if best_mag > 0.0 {
            Complex64::from_polar(1.0, -vc[best].arg())
        } else {
            Complex64::new(1.0, 0.0)
        };
        vo.set_column(dst, &(vc * phase));
        uo.set_column(dst, &(u.column(src) * phase));
    }
    Ok(SvdResult { sigmas, u: uo, v: vo })
}

/// Composite kernel `K = H H*`, whose eigenvalues are `sigma_i^2` with the
/// left singular vectors as eigenvectors.
pub fn composite_kernel(h: &ChannelMatrix) -> DMatrix<Complex64> {
    let mut k = &h.entries * h.entries.adjoint();
    // Symmetrize away round-off so the result is exactly Hermitian.
    let n = k.nrows();
    for r in 0..n {
        k[(r, r)].im = 0.0;
        for c in (r + 1)..n {
            let avg = (k[(r, c)] + k[(c, r)].conj()) * 0.5;
            k[(r, c)] = avg;
            k[(c, r)] = avg.conj();
        }
    }
    k
}

/// Returns `(||H v - sigma u||, ||H* u - sigma v||)`.
pub fn verify_singular_triple(h: &ChannelMatrix, u: &[Complex64], v: &[Complex64], sigma: f64) -> Result<(f64, f64)> {
    let n = h.n();
    if u.len() != n || v.len() != n {
        return Err(Error::input(format!(
            "vector lengths {} and {} do not match matrix size {n}",
            u.len(),
            v.len()
        )));
    }
    let uv = DVector::from_column_slice(u);
    let vv = DVector::from_column_slice(v);
    if uv.norm() == 0.0 || vv.norm() == 0.0 {
        return Err(Error::input("singular vectors must have nonzero norm"));
    }
    let sig = Complex64::new(sigma, 0.0);
    let left = (&h.entries * &vv - &uv * sig).norm();
    let right = (h.entries.adjoint() * &uv - &vv * sig).norm();
    Ok((left, right))
}

/// Singular system of [`crate::discretize::time_band_limiter`] with the
/// vectors ordered as discrete prolate spheroidal sequences.
///
/// The leading singular values of that matrix agree to machine precision,
/// so a dense SVD returns an arbitrary basis of the leading cluster. The
/// vectors are taken instead from the symmetric tridiagonal matrix that
/// commutes with it (diagonal `((n-1)/2 - t)^2 cos(2 pi w)`, off-diagonal
/// `t (n - t) / 2`), in descending order of its eigenvalues; each singular
/// value is the Rayleigh quotient of the time-band limiter.
pub fn prolate_svd(n: usize, w: f64) -> Result<SvdResult> {
    let a = crate::discretize::time_band_limiter(n, w)?;
    let c = (2.0 * std::f64::consts::PI * w).cos();
    let half = (n as f64 - 1.0) / 2.0;
    let t = DMatrix::<f64>::from_fn(n, n, |r, k| {
        if r == k {
            (half - r as f64).powi(2) * c
        } else if r + 1 == k {
            k as f64 * (n - k) as f64 / 2.0
        } else if k + 1 == r {
            r as f64 * (n - r) as f64 / 2.0
        } else {
            0.0
        }
    });
    let eig = t.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]));
    let real = a.entries.map(|z| z.re);
    let mut sigmas = Vec::with_capacity(n);
    let mut v = DMatrix::<Complex64>::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).into_owned();
        let peak = col.iter().fold(0.0f64, |m, x| if x.abs() > m.abs() { *x } else { m });
        if peak < 0.0 {
            col.neg_mut();
        }
        sigmas.push((col.transpose() * &real * &col)[(0, 0)].max(0.0));
        v.set_column(dst, &col.map(|x| Complex64::new(x, 0.0)));
    }
    Ok(SvdResult { sigmas, u: v.clone(), v })
}
