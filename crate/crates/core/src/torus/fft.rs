//! Discrete Fourier machinery behind the spectral operators.
//!
//! Coefficients are stored so that `f(x, y) = sum_k c[k1*n + k2] exp(2*pi*i*(f1*x + f2*y))`
//! with the integer frequency `f = k` for `k <= n/2` and `f = k - n` otherwise.

use std::cell::RefCell;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    })
}

/// Integer frequency carried by index `k` on an `n`-point grid.
pub(crate) fn freq(k: usize, n: usize) -> f64 {
    if k <= n / 2 {
        k as f64
    } else {
        k as f64 - n as f64
    }
}

fn transpose(buf: &mut [Complex<f64>], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            buf.swap(i * n + j, j * n + i);
        }
    }
}

fn fft2_inplace(buf: &mut [Complex<f64>], n: usize, inverse: bool) {
    let fft = plan(n, inverse);
    for row in buf.chunks_exact_mut(n) {
        fft.process(row);
    }
    transpose(buf, n);
    for row in buf.chunks_exact_mut(n) {
        fft.process(row);
    }
    transpose(buf, n);
}

/// Forward transform of real samples, normalized so the result holds Fourier
/// coefficients (the `(0,0)` entry is the mean).
pub(crate) fn forward(values: &[f64], n: usize) -> Vec<Complex<f64>> {
    let mut buf: Vec<Complex<f64>> = values.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fft2_inplace(&mut buf, n, false);
    let scale = 1.0 / (n * n) as f64;
    for c in &mut buf {
        *c *= scale;
    }
    buf
}

/// Inverse transform back to real samples; the imaginary part is discarded.
pub(crate) fn inverse(mut coeffs: Vec<Complex<f64>>, n: usize) -> Vec<f64> {
    fft2_inplace(&mut coeffs, n, true);
    coeffs.into_iter().map(|c| c.re).collect()
}

/// Multiply each coefficient by a real symbol depending on the integer frequencies.
pub(crate) fn apply_symbol(coeffs: &mut [Complex<f64>], n: usize, symbol: impl Fn(f64, f64) -> f64) {
    for k1 in 0..n {
        let f1 = freq(k1, n);
        for k2 in 0..n {
            let f2 = freq(k2, n);
            coeffs[k1 * n + k2] *= symbol(f1, f2);
        }
    }
}

/// Partial derivative along one axis. The Nyquist mode is dropped: an odd
/// symbol cannot keep it conjugate-symmetric, and band-limited inputs never
/// populate it.
pub(crate) fn apply_derivative(coeffs: &mut [Complex<f64>], n: usize, axis: usize) {
    let nyquist = n / 2;
    for k1 in 0..n {
        for k2 in 0..n {
            let k = if axis == 0 { k1 } else { k2 };
            let c = &mut coeffs[k1 * n + k2];
            if k == nyquist {
                *c = Complex::new(0.0, 0.0);
            } else {
                let f = freq(k, n);
                *c *= Complex::new(0.0, 2.0 * std::f64::consts::PI * f);
            }
        }
    }
}
