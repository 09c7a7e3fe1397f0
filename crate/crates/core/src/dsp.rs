//! Band-limited resampling shared by the Wigner-type transforms.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::FftPlanner;

/// Band-limited 2x interpolation: `y[2m] = x[m]` and `y[2m+1]` is the
/// periodic band-limited value halfway between, with the spectrum read on
/// `[-1/2, 1/2)`. For even lengths the Nyquist bin is taken at `-1/2`, which
/// keeps the interpolating kernels orthogonal at integer offsets:
/// `sum_j d(a - j) d*(b - j) = delta(a - b)` whenever `a - b` is an integer.
pub fn interpolate2(x: &[Complex64]) -> Vec<Complex64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let mut planner = FftPlanner::new();
    let mut spec = x.to_vec();
    planner.plan_fft_forward(n).process(&mut spec);
    let mut padded = vec![Complex64::new(0.0, 0.0); 2 * n];
    let half = n / 2;
    if n.is_multiple_of(2) {
        padded[..half].copy_from_slice(&spec[..half]);
        padded[half + n..].copy_from_slice(&spec[half..]);
    } else {
        padded[..=half].copy_from_slice(&spec[..=half]);
        padded[half + n + 1..].copy_from_slice(&spec[half + 1..]);
    }
    planner.plan_fft_inverse(2 * n).process(&mut padded);
    let scale = 1.0 / n as f64;
    padded.iter().map(|z| z * scale).collect()
}

/// The `2n x n` matrix of [`interpolate2`].
pub fn interpolation_matrix(n: usize) -> DMatrix<Complex64> {
    let mut p = DMatrix::zeros(2 * n, n);
    let mut e = vec![Complex64::new(0.0, 0.0); n];
    for k in 0..n {
        e[k] = Complex64::new(1.0, 0.0);
        for (r, z) in interpolate2(&e).into_iter().enumerate() {
            p[(r, k)] = z;
        }
        e[k] = Complex64::new(0.0, 0.0);
    }
    p
}
