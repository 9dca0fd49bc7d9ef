use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
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

/// Forward transform `X[k] = sum_n x[n] exp(-j 2 pi k n / N)`, unnormalised.
///
/// Power-of-two lengths go through the FFT, anything else through the direct
/// sum.
pub fn dft(v: &[Complex64]) -> Vec<Complex64> {
    let mut out = v.to_vec();
    dft_in_place(&mut out);
    out
}

/// Inverse transform with the `1/N` factor, `x[n] = (1/N) sum_k X[k] exp(+j 2 pi k n / N)`.
pub fn idft(v: &[Complex64]) -> Vec<Complex64> {
    let mut out = v.to_vec();
    idft_in_place(&mut out);
    out
}

pub fn dft_in_place(v: &mut [Complex64]) {
    if v.len().is_power_of_two() {
        plan(v.len(), false).process(v);
    } else {
        let out = dft_direct(v);
        v.copy_from_slice(&out);
    }
}

pub fn idft_in_place(v: &mut [Complex64]) {
    let n = v.len();
    if n.is_power_of_two() {
        plan(n, true).process(v);
        let s = 1.0 / n as f64;
        v.iter_mut().for_each(|x| *x *= s);
    } else {
        let out = idft_direct(v);
        v.copy_from_slice(&out);
    }
}

/// O(N^2) reference transform with the same convention as [`dft`].
pub fn dft_direct(v: &[Complex64]) -> Vec<Complex64> {
    direct(v, -1.0, 1.0)
}

/// O(N^2) reference inverse with the same convention as [`idft`].
pub fn idft_direct(v: &[Complex64]) -> Vec<Complex64> {
    direct(v, 1.0, 1.0 / v.len() as f64)
}

fn direct(v: &[Complex64], sign: f64, scale: f64) -> Vec<Complex64> {
    let n = v.len();
    (0..n)
        .map(|k| {
            let s: Complex64 = v
                .iter()
                .enumerate()
                .map(|(i, &x)| x * Complex64::from_polar(1.0, sign * 2.0 * PI * ((k * i) % n) as f64 / n as f64))
                .sum();
            s * scale
        })
        .collect()
}
