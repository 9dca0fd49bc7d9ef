use std::f64::consts::PI;

use num_complex::Complex64;

/// Windowed exponential sum `G(k) = sum_{n<N} exp(-j 2 pi k n / N)` in closed
/// form, for real (fractional) subcarrier offsets `k`.
///
/// The removable singularity at `k = 0 (mod N)` is evaluated from its limit,
/// so `|G(k)| <= N` everywhere and `G(mN) = N`.
pub fn dirichlet_kernel(k: f64, n: usize) -> Complex64 {
    assert!(n >= 1, "kernel length must be at least one");
    let nf = n as f64;
    let denom = (PI * k / nf).sin();
    if denom.abs() < 1e-12 {
        // k = m N + eps with eps tiny: G ~ N exp(-j pi eps (N-1)/N)
        let eps = k - (k / nf).round() * nf;
        return Complex64::from_polar(nf, -PI * eps * (nf - 1.0) / nf);
    }
    let phase = Complex64::from_polar(1.0, -PI * k * (nf - 1.0) / nf);
    phase * ((PI * k).sin() / denom)
}

/// Bessel function of the first kind, order zero.
///
/// Power series below |x| = 12, Hankel asymptotic expansion above; absolute
/// error stays below 1e-10 on |x| <= 50.
pub fn bessel_j0(x: f64) -> f64 {
    let ax = x.abs();
    if ax < 12.0 {
        j0_series(ax)
    } else {
        j0_asymptotic(ax)
    }
}

fn j0_series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for m in 1..200 {
        let mf = m as f64;
        term *= -q / (mf * mf);
        sum += term;
        if term.abs() < 1e-17 * sum.abs().max(1e-300) && term.abs() < 1e-20 {
            break;
        }
    }
    sum
}

fn j0_asymptotic(x: f64) -> f64 {
    // J0(x) = sqrt(2/(pi x)) [P cos(x - pi/4) - Q sin(x - pi/4)]
    // with P, Q asymptotic series in 1/(8x); truncated at the smallest term.
    let z = 8.0 * x;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0;
    let mut last = f64::INFINITY;
    for k in 1..60usize {
        let kf = (2 * k - 1) as f64;
        term *= (kf * kf) / (k as f64 * z);
        if term >= last {
            break;
        }
        last = term;
        // signs run - - + + - - ... ; odd orders feed Q, even orders P
        let signed = if ((k + 1) / 2) % 2 == 1 { -term } else { term };
        if k % 2 == 1 {
            q += signed;
        } else {
            p += signed;
        }
    }
    let chi = x - 0.25 * PI;
    (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}
