//! Channel correlation models, Wiener smoothing and the linear-interpolation
//! baseline.
//!
//! Estimates cover the used band only: row `l`, column `k - first_used`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use crate::numerics::{bessel_j0, dirichlet_kernel, regularized_hermitian_solve, CMatrix};
use crate::ofdm::{PilotObservations, PilotPattern, ResourceGrid, SUBCARRIERS_PER_RB};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelTap {
    /// Mean power `E|g_q|^2`.
    pub power: f64,
    pub delay_samples: f64,
    /// Ignored by the legacy model.
    pub dfo_hz: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CorrelationModel {
    /// Doppler-attenuated per-tap correlations with per-tap phase rotation in time.
    Hsr { taps: Vec<ModelTap>, grid: ResourceGrid },
    /// Delay-profile frequency correlation and Jakes time correlation.
    Legacy {
        taps: Vec<ModelTap>,
        max_dfo_hz: f64,
        grid: ResourceGrid,
    },
}

fn check_taps(taps: &[ModelTap]) -> Result<()> {
    if taps.is_empty() {
        return Err(Error::InvalidParameter("correlation model needs at least one tap".into()));
    }
    for t in taps {
        if !(t.power >= 0.0) || !t.power.is_finite() || !t.delay_samples.is_finite() || !t.dfo_hz.is_finite() {
            return Err(Error::InvalidParameter(format!("invalid model tap {t:?}")));
        }
    }
    if taps.iter().map(|t| t.power).sum::<f64>() <= 0.0 {
        return Err(Error::InvalidParameter("model taps carry no power".into()));
    }
    Ok(())
}

impl CorrelationModel {
    pub fn hsr(taps: Vec<ModelTap>, grid: &ResourceGrid) -> Result<Self> {
        check_taps(&taps)?;
        Ok(Self::Hsr { taps, grid: grid.clone() })
    }

    pub fn legacy(taps: Vec<ModelTap>, max_dfo_hz: f64, grid: &ResourceGrid) -> Result<Self> {
        check_taps(&taps)?;
        if !(max_dfo_hz >= 0.0) || !max_dfo_hz.is_finite() {
            return Err(Error::InvalidParameter(format!("maximum DFO {max_dfo_hz} Hz")));
        }
        Ok(Self::Legacy {
            taps,
            max_dfo_hz,
            grid: grid.clone(),
        })
    }

    pub fn taps(&self) -> &[ModelTap] {
        match self {
            Self::Hsr { taps, .. } | Self::Legacy { taps, .. } => taps,
        }
    }

    pub fn grid(&self) -> &ResourceGrid {
        match self {
            Self::Hsr { grid, .. } | Self::Legacy { grid, .. } => grid,
        }
    }

    /// `E[H(k + dk, l) H(k, l)^*]` under the model.
    pub fn corr_freq(&self, dk: i64) -> Complex64 {
        match self {
            Self::Hsr { taps, grid } => corr_freq_hsr(dk, taps, grid),
            Self::Legacy { taps, grid, .. } => corr_freq_legacy(dk, taps, grid),
        }
    }

    /// `E[H(k, l + dl) H(k, l)^*]` under the model.
    pub fn corr_time(&self, dl: i64) -> Complex64 {
        match self {
            Self::Hsr { taps, grid } => corr_time_hsr(dl, taps, grid),
            Self::Legacy { max_dfo_hz, grid, .. } => Complex64::new(corr_time_legacy(dl, *max_dfo_hz, grid), 0.0),
        }
    }

    /// Expected ICI power on a fully loaded symbol with unit-energy data,
    /// `sum_q p_q (1 - |G(-F_q)|^2 / N^2)`.
    pub fn ici_power(&self) -> f64 {
        let grid = self.grid();
        self.taps()
            .iter()
            .map(|t| t.power * (1.0 - attenuation(t.dfo_hz, grid)))
            .sum()
    }
}

/// `|G(-F)|^2 / N^2`.
fn attenuation(dfo_hz: f64, grid: &ResourceGrid) -> f64 {
    let n = grid.fft_size as f64;
    dirichlet_kernel(-dfo_hz / grid.subcarrier_spacing_hz, grid.fft_size).norm_sqr() / (n * n)
}

fn delay_phasor(delay_samples: f64, dk: i64, fft_size: usize) -> Complex64 {
    let cycles = (delay_samples * dk as f64 / fft_size as f64).fract();
    Complex64::from_polar(1.0, -2.0 * PI * cycles)
}

/// `(1/N^2) sum_q p_q |G(-F_q)|^2 exp(-j 2 pi d_q dk / N)`.
pub fn corr_freq_hsr(dk: i64, taps: &[ModelTap], grid: &ResourceGrid) -> Complex64 {
    taps.iter()
        .map(|t| t.power * attenuation(t.dfo_hz, grid) * delay_phasor(t.delay_samples, dk, grid.fft_size))
        .sum()
}

/// `(1/N^2) sum_q p_q |G(-F_q)|^2 exp(j 2 pi f_q dl (N + Ncp) Ts)`.
pub fn corr_time_hsr(dl: i64, taps: &[ModelTap], grid: &ResourceGrid) -> Complex64 {
    let t = grid.symbol_duration();
    taps.iter()
        .map(|tap| {
            let cycles = (tap.dfo_hz * t * dl as f64).fract();
            tap.power * attenuation(tap.dfo_hz, grid) * Complex64::from_polar(1.0, 2.0 * PI * cycles)
        })
        .sum()
}

/// `sum_q p_q exp(-j 2 pi dk df tau_q)` with `tau_q = d_q Ts`.
pub fn corr_freq_legacy(dk: i64, taps: &[ModelTap], grid: &ResourceGrid) -> Complex64 {
    // dk * df * d * Ts = dk * d / N
    taps.iter()
        .map(|t| t.power * delay_phasor(t.delay_samples, dk, grid.fft_size))
        .sum()
}

/// `J0(2 pi dl f_D T)`.
pub fn corr_time_legacy(dl: i64, max_dfo_hz: f64, grid: &ResourceGrid) -> f64 {
    bessel_j0(2.0 * PI * dl as f64 * max_dfo_hz * grid.symbol_duration())
}

/// `W = R_tp (R_pp + noise_ratio I)^-1` with `R_tp(i, j) = corr(t_i - p_j)`
/// and `R_pp(i, j) = corr(p_i - p_j)`.
pub fn build_wiener(
    targets: &[i64],
    pilots: &[i64],
    corr: impl Fn(i64) -> Complex64,
    noise_ratio: f64,
) -> Result<CMatrix> {
    if pilots.is_empty() {
        return Err(Error::InvalidParameter("Wiener filter needs at least one pilot".into()));
    }
    let r_pp = CMatrix::from_fn(pilots.len(), pilots.len(), |i, j| corr(pilots[i] - pilots[j]));
    // R_pt = R_tp^H, so W^H = (R_pp + lambda I)^-1 R_pt
    let r_pt = CMatrix::from_fn(pilots.len(), targets.len(), |i, j| corr(pilots[i] - targets[j]));
    Ok(regularized_hermitian_solve(&r_pp, noise_ratio, &r_pt)?.adjoint())
}

/// One frequency window: the filter maps the window's pilot subcarriers onto
/// all of its subcarriers.
#[derive(Debug, Clone, PartialEq)]
pub struct FreqWindow {
    pub first: usize,
    pub width: usize,
    /// Row indices into the pilot observations.
    pub pilot_rows: Vec<usize>,
    pub filter: Arc<CMatrix>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WienerFilters {
    pub windows: Vec<FreqWindow>,
    /// `symbols_per_frame x n`.
    pub time: CMatrix,
    pub noise_ratio: f64,
    first_used: usize,
    used_count: usize,
    pilot_count: usize,
    pilot_symbols: Vec<usize>,
}

impl WienerFilters {
    /// Frequency filters per block of `window_rb` resource blocks, then one
    /// time filter onto every symbol of the frame.
    pub fn build(model: &CorrelationModel, pilots: &PilotPattern, window_rb: usize, noise_ratio: f64) -> Result<Self> {
        let grid = model.grid();
        if window_rb == 0 {
            return Err(Error::InvalidParameter("window must span at least one resource block".into()));
        }
        if !(noise_ratio >= 0.0) || !noise_ratio.is_finite() {
            return Err(Error::InvalidParameter(format!("noise ratio {noise_ratio}")));
        }
        let span = window_rb * SUBCARRIERS_PER_RB;
        let mut cache: HashMap<(usize, Vec<usize>), Arc<CMatrix>> = HashMap::new();
        let mut windows = Vec::new();
        let end = grid.first_used + grid.used_count;
        let mut first = grid.first_used;
        while first < end {
            let width = span.min(end - first);
            let pilot_rows: Vec<usize> = pilots
                .subcarriers
                .iter()
                .enumerate()
                .filter(|(_, &k)| k >= first && k < first + width)
                .map(|(i, _)| i)
                .collect();
            if pilot_rows.is_empty() {
                return Err(Error::InvalidParameter(format!("no pilot subcarrier in window at {first}")));
            }
            let offsets: Vec<usize> = pilot_rows.iter().map(|&i| pilots.subcarriers[i] - first).collect();
            let filter = match cache.get(&(width, offsets.clone())) {
                Some(f) => Arc::clone(f),
                None => {
                    let targets: Vec<i64> = (0..width as i64).collect();
                    let taps: Vec<i64> = offsets.iter().map(|&o| o as i64).collect();
                    let f = Arc::new(build_wiener(&targets, &taps, |d| model.corr_freq(d), noise_ratio)?);
                    cache.insert((width, offsets), Arc::clone(&f));
                    f
                }
            };
            windows.push(FreqWindow {
                first,
                width,
                pilot_rows,
                filter,
            });
            first += width;
        }
        let targets: Vec<i64> = (0..grid.symbols_per_frame as i64).collect();
        let symbols: Vec<i64> = pilots.symbols.iter().map(|&l| l as i64).collect();
        let time = build_wiener(&targets, &symbols, |d| model.corr_time(d), noise_ratio)?;
        Ok(Self {
            windows,
            time,
            noise_ratio,
            first_used: grid.first_used,
            used_count: grid.used_count,
            pilot_count: pilots.m(),
            pilot_symbols: pilots.symbols.clone(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimateMethod {
    LinearInterpolation,
    Wiener,
}

/// Full-grid channel estimate over the used band.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEstimate {
    pub method: EstimateMethod,
    pub first_subcarrier: usize,
    /// `symbols_per_frame x used_count`.
    pub values: CMatrix,
}

impl ChannelEstimate {
    pub fn at(&self, k: usize, l: usize) -> Complex64 {
        self.values[(l, k - self.first_subcarrier)]
    }
}

/// `H_est = W_T W_F H_p`: frequency filtering on each pilot symbol, then time
/// filtering on each subcarrier.
pub fn lmmse_estimate(h_p: &PilotObservations, filters: &WienerFilters) -> Result<ChannelEstimate> {
    let n = filters.pilot_symbols.len();
    if h_p.h.rows() != filters.pilot_count || h_p.h.cols() != n {
        return Err(Error::Dimension(format!(
            "observations are {}x{}, filters expect {}x{}",
            h_p.h.rows(),
            h_p.h.cols(),
            filters.pilot_count,
            n
        )));
    }
    // used_count x n after frequency filtering
    let mut freq = CMatrix::zeros(filters.used_count, n);
    for w in &filters.windows {
        let offset = w.first - filters.first_used;
        for i in 0..n {
            for t in 0..w.width {
                let row = w.filter.row(t);
                let v: Complex64 = row.iter().zip(&w.pilot_rows).map(|(c, &p)| c * h_p.h[(p, i)]).sum();
                freq[(offset + t, i)] = v;
            }
        }
    }
    let values = filters.time.matmul(&freq.transpose())?;
    Ok(ChannelEstimate {
        method: EstimateMethod::Wiener,
        first_subcarrier: filters.first_used,
        values,
    })
}

fn interpolate(xs: &[usize], ys: &[Complex64], x: usize) -> Complex64 {
    // segment containing x, or the nearest edge segment
    let seg = match xs.iter().position(|&p| p > x) {
        Some(0) => 0,
        Some(i) => i - 1,
        None => xs.len() - 2,
    }
    .min(xs.len() - 2);
    let (x0, x1) = (xs[seg] as f64, xs[seg + 1] as f64);
    let t = (x as f64 - x0) / (x1 - x0);
    ys[seg] + (ys[seg + 1] - ys[seg]) * t
}

/// Linear interpolation across subcarriers within each pilot symbol, then
/// across symbols per subcarrier; edges use the nearest segment's slope.
pub fn linear_interp_estimate(h_p: &PilotObservations, pilots: &PilotPattern, grid: &ResourceGrid) -> Result<ChannelEstimate> {
    let (m, n) = (pilots.m(), pilots.n());
    if m < 2 || n < 2 {
        return Err(Error::InvalidParameter(format!(
            "linear interpolation needs two pilots per dimension, got {m} x {n}"
        )));
    }
    if h_p.h.rows() != m || h_p.h.cols() != n {
        return Err(Error::Dimension("observations do not match the pilot pattern".into()));
    }
    if pilots.subcarriers.windows(2).any(|w| w[1] <= w[0]) || pilots.symbols.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("pilot positions must increase".into()));
    }
    let used = grid.used_subcarriers();
    let mut freq = CMatrix::zeros(grid.used_count, n);
    for i in 0..n {
        let column = h_p.h.column(i);
        for k in used.clone() {
            freq[(k - grid.first_used, i)] = interpolate(&pilots.subcarriers, &column, k);
        }
    }
    let mut values = CMatrix::zeros(grid.symbols_per_frame, grid.used_count);
    for c in 0..grid.used_count {
        let row = freq.row(c);
        for l in 0..grid.symbols_per_frame {
            values[(l, c)] = interpolate(&pilots.symbols, row, l);
        }
    }
    Ok(ChannelEstimate {
        method: EstimateMethod::LinearInterpolation,
        first_subcarrier: grid.first_used,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{analytic_freq_response, TapState};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid() -> ResourceGrid {
        ResourceGrid::lte_10mhz()
    }

    fn two_taps(f0: f64, f1: f64) -> Vec<ModelTap> {
        vec![
            ModelTap { power: 0.6, delay_samples: 0.0, dfo_hz: f0 },
            ModelTap { power: 0.4, delay_samples: 4.0, dfo_hz: f1 },
        ]
    }

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn zero_lag_values_are_real_positive() {
        let g = grid();
        let m = CorrelationModel::hsr(two_taps(600.0, -700.0), &g).unwrap();
        let (f, t) = (m.corr_freq(0), m.corr_time(0));
        assert!(f.re > 0.0 && f.im == 0.0);
        assert!(close(f, t, 1e-15));
        assert!(f.re < 1.0);
    }

    #[test]
    fn static_colocated_taps_give_total_power() {
        let g = grid();
        let taps = vec![
            ModelTap { power: 0.3, delay_samples: 0.0, dfo_hz: 0.0 },
            ModelTap { power: 0.5, delay_samples: 0.0, dfo_hz: 0.0 },
        ];
        for d in [-5, 0, 9] {
            assert!(close(corr_freq_hsr(d, &taps, &g), Complex64::new(0.8, 0.0), 1e-12));
            assert!(close(corr_time_hsr(d, &taps, &g), Complex64::new(0.8, 0.0), 1e-12));
        }
    }

    #[test]
    fn hermitian_symmetry() {
        let g = grid();
        let hsr = CorrelationModel::hsr(two_taps(512.3, -811.0), &g).unwrap();
        let legacy = CorrelationModel::legacy(two_taps(0.0, 0.0), 843.0, &g).unwrap();
        for m in [&hsr, &legacy] {
            for d in 0..40 {
                assert!(close(m.corr_freq(-d), m.corr_freq(d).conj(), 1e-12));
                assert!(close(m.corr_time(-d), m.corr_time(d).conj(), 1e-12));
            }
        }
    }

    #[test]
    fn single_tap_time_correlation_is_a_phasor() {
        let g = grid();
        let taps = [ModelTap { power: 1.0, delay_samples: 2.0, dfo_hz: 700.0 }];
        let r0 = corr_time_hsr(0, &taps, &g).norm();
        for d in 1..14 {
            assert!((corr_time_hsr(d, &taps, &g).norm() - r0).abs() < 1e-12);
        }
    }

    #[test]
    fn opposite_dfos_give_real_cosine() {
        let g = grid();
        let taps = [
            ModelTap { power: 0.5, delay_samples: 0.0, dfo_hz: 800.0 },
            ModelTap { power: 0.5, delay_samples: 3.0, dfo_hz: -800.0 },
        ];
        let a = corr_time_hsr(0, &taps, &g).re / 2.0;
        for d in 0..14 {
            let expected = 2.0 * a * (2.0 * PI * 800.0 * d as f64 * g.symbol_duration()).cos();
            assert!(close(corr_time_hsr(d, &taps, &g), Complex64::new(expected, 0.0), 1e-12));
        }
    }

    #[test]
    fn legacy_frequency_correlation_matches_direct_sum() {
        let g = grid();
        let taps = two_taps(0.0, 0.0);
        let ts = g.sample_period();
        for dk in [-13, 0, 1, 6, 100] {
            let direct: Complex64 = taps
                .iter()
                .map(|t| {
                    let tau = t.delay_samples * ts;
                    t.power * Complex64::from_polar(1.0, -2.0 * PI * dk as f64 * g.subcarrier_spacing_hz * tau)
                })
                .sum();
            assert!(close(corr_freq_legacy(dk, &taps, &g), direct, 1e-10));
        }
        let flat = [ModelTap { power: 2.0, delay_samples: 0.0, dfo_hz: 0.0 }];
        assert!(close(corr_freq_legacy(17, &flat, &g), Complex64::new(2.0, 0.0), 1e-12));
    }

    #[test]
    fn legacy_time_correlation_is_jakes() {
        let g = grid();
        assert_eq!(corr_time_legacy(0, 842.0, &g), 1.0);
        assert_eq!(corr_time_legacy(5, 0.0, &g), 1.0);
        assert!((g.symbol_duration() - 71.35e-6).abs() < 1e-8);
        // independent power series
        let x = 2.0 * PI * 7.0 * 842.0 * g.symbol_duration();
        let mut term = 1.0;
        let mut sum = 1.0;
        for m in 1..40 {
            term *= -(x * x / 4.0) / (m * m) as f64;
            sum += term;
        }
        assert!((corr_time_legacy(7, 842.0, &g) - sum).abs() < 1e-12);
    }

    #[test]
    fn correlations_match_monte_carlo_moments() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let taps = two_taps(0.04 * 15e3, -0.05 * 15e3);
        let model = CorrelationModel::hsr(taps.clone(), &g).unwrap();
        let draws = 10_000;
        let (k, l) = (400, 3);
        let lags = [1i64, 5, 12];
        let mut freq = [Complex64::new(0.0, 0.0); 3];
        let mut time = [Complex64::new(0.0, 0.0); 3];
        for _ in 0..draws {
            let state: Vec<TapState> = taps
                .iter()
                .map(|t| TapState {
                    gain: Complex64::from_polar(t.power.sqrt(), rng.random_range(0.0..2.0 * PI)),
                    delay_samples: t.delay_samples as usize,
                    dfo_hz: t.dfo_hz,
                    rician_k: f64::INFINITY,
                })
                .collect();
            let h = |k: usize, l: usize| analytic_freq_response(k, l, &state, &g).fading;
            let base = h(k, l);
            for (i, &d) in lags.iter().enumerate() {
                freq[i] += h(k + d as usize, l) * base.conj();
                time[i] += h(k, l + d as usize) * base.conj();
            }
        }
        let r0 = model.corr_freq(0).re;
        for (i, &d) in lags.iter().enumerate() {
            assert!((freq[i] / draws as f64 - model.corr_freq(d)).norm() < 0.02 * r0);
            assert!((time[i] / draws as f64 - model.corr_time(d)).norm() < 0.02 * r0);
        }
    }

    #[test]
    fn wiener_identity_on_pilots() {
        let g = grid();
        let m = CorrelationModel::legacy(two_taps(0.0, 0.0), 800.0, &g).unwrap();
        let pilots = [0i64, 4, 7, 11];
        let w = build_wiener(&pilots, &pilots, |d| m.corr_time(d), 0.0).unwrap();
        assert!(w.max_abs_diff(&CMatrix::identity(4)) < 1e-8);
    }

    #[test]
    fn wiener_satisfies_normal_equations() {
        let g = grid();
        let m = CorrelationModel::hsr(two_taps(300.0, -820.0), &g).unwrap();
        let targets: Vec<i64> = (0..24).collect();
        let pilots = [0i64, 6, 12, 18];
        let lambda = 0.01;
        let w = build_wiener(&targets, &pilots, |d| m.corr_freq(d), lambda).unwrap();
        let r_pp = CMatrix::from_fn(4, 4, |i, j| m.corr_freq(pilots[i] - pilots[j]));
        let loaded = r_pp.add(&CMatrix::identity(4).scale(Complex64::new(lambda, 0.0))).unwrap();
        let r_tp = CMatrix::from_fn(24, 4, |i, j| m.corr_freq(targets[i] - pilots[j]));
        assert!((&w * &loaded).max_abs_diff(&r_tp) < 1e-9);
    }

    #[test]
    fn heavy_noise_suppresses_filter() {
        let g = grid();
        let m = CorrelationModel::hsr(two_taps(300.0, -820.0), &g).unwrap();
        let w = build_wiener(&[0, 1, 2], &[0, 6], |d| m.corr_freq(d), 1e6).unwrap();
        assert!(w.max_abs() < 1e-5);
    }

    #[test]
    fn white_channel_closed_form() {
        let white = |d: i64| if d == 0 { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) };
        let lambda = 0.25;
        let w = build_wiener(&[0, 1, 2, 3], &[1, 3], white, lambda).unwrap();
        let expected = CMatrix::from_fn(4, 2, |t, p| {
            if t == [1, 3][p] {
                Complex64::new(1.0 / (1.0 + lambda), 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        assert!(w.max_abs_diff(&expected) < 1e-12);
    }

    #[test]
    fn singular_pilot_correlation_without_noise_fails() {
        let flat = |_: i64| Complex64::new(1.0, 0.0);
        assert!(matches!(build_wiener(&[0, 1], &[0, 6], flat, 0.0), Err(Error::Singular(_))));
    }

    fn observations(pilots: &PilotPattern, h: impl Fn(usize, usize) -> Complex64) -> PilotObservations {
        PilotObservations {
            h: CMatrix::from_fn(pilots.m(), pilots.n(), |i, j| h(pilots.subcarriers[i], pilots.symbols[j])),
        }
    }

    #[test]
    fn windows_tile_the_used_band() {
        let g = grid();
        let pilots = PilotPattern::lte_like(&g, 1).unwrap();
        let m = CorrelationModel::hsr(two_taps(300.0, -820.0), &g).unwrap();
        let f = WienerFilters::build(&m, &pilots, 2, 0.01).unwrap();
        assert_eq!(f.windows.len(), 25);
        assert_eq!(f.windows.iter().map(|w| w.width).sum::<usize>(), g.used_count);
        assert!(f.windows.iter().all(|w| w.pilot_rows.len() == 4));
        // identical layouts share one matrix
        assert!(Arc::ptr_eq(&f.windows[0].filter, &f.windows[24].filter));
        assert_eq!((f.time.rows(), f.time.cols()), (14, 4));
    }

    #[test]
    fn flat_channel_reconstructed_exactly() {
        let g = grid();
        let pilots = PilotPattern::lte_like(&g, 1).unwrap();
        let taps = vec![ModelTap { power: 1.0, delay_samples: 0.0, dfo_hz: 0.0 }];
        let m = CorrelationModel::legacy(taps, 0.0, &g).unwrap();
        let f = WienerFilters::build(&m, &pilots, 2, 1e-10).unwrap();
        let h = Complex64::new(0.3, -0.8);
        let est = lmmse_estimate(&observations(&pilots, |_, _| h), &f).unwrap();
        for l in 0..14 {
            for k in g.used_subcarriers() {
                assert!(close(est.at(k, l), h, 1e-8));
            }
        }
        let lin = linear_interp_estimate(&observations(&pilots, |_, _| h), &pilots, &g).unwrap();
        assert!(lin.values.max_abs_diff(&CMatrix::from_fn(14, g.used_count, |_, _| h)) < 1e-12);
    }

    #[test]
    fn single_tap_static_channel_reconstructed_exactly() {
        let g = grid();
        let pilots = PilotPattern::lte_like(&g, 1).unwrap();
        let state = [TapState {
            gain: Complex64::new(0.6, 0.7),
            delay_samples: 3,
            dfo_hz: 550.0,
            rician_k: f64::INFINITY,
        }];
        let taps = vec![ModelTap { power: 1.0, delay_samples: 3.0, dfo_hz: 550.0 }];
        let m = CorrelationModel::hsr(taps, &g).unwrap();
        let f = WienerFilters::build(&m, &pilots, 2, 1e-10).unwrap();
        let h = |k, l| analytic_freq_response(k, l, &state, &g).fading;
        let est = lmmse_estimate(&observations(&pilots, h), &f).unwrap();
        for l in 0..14 {
            for k in g.used_subcarriers() {
                assert!(close(est.at(k, l), h(k, l), 1e-7), "({k}, {l})");
            }
        }
    }

    #[test]
    fn lmmse_is_linear() {
        let g = grid();
        let pilots = PilotPattern::lte_like(&g, 1).unwrap();
        let m = CorrelationModel::hsr(two_taps(300.0, -820.0), &g).unwrap();
        let f = WienerFilters::build(&m, &pilots, 2, 0.01).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut random = || {
            PilotObservations {
                h: CMatrix::from_fn(pilots.m(), pilots.n(), |_, _| {
                    Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                }),
            }
        };
        let (x, y) = (random(), random());
        let (a, b) = (Complex64::new(0.5, -2.0), Complex64::new(-1.5, 0.25));
        let mix = PilotObservations { h: x.h.scale(a).add(&y.h.scale(b)).unwrap() };
        let lhs = lmmse_estimate(&mix, &f).unwrap().values;
        let ex = lmmse_estimate(&x, &f).unwrap().values;
        let ey = lmmse_estimate(&y, &f).unwrap().values;
        let rhs = ex.scale(a).add(&ey.scale(b)).unwrap();
        assert!(lhs.max_abs_diff(&rhs) < 1e-10);
    }

    #[test]
    fn lmmse_rejects_mismatched_observations() {
        let g = grid();
        let pilots = PilotPattern::lte_like(&g, 1).unwrap();
        let m = CorrelationModel::hsr(two_taps(300.0, -820.0), &g).unwrap();
        let f = WienerFilters::build(&m, &pilots, 2, 0.01).unwrap();
        let bad = PilotObservations { h: CMatrix::zeros(3, 4) };
        assert!(matches!(lmmse_estimate(&bad, &f), Err(Error::Dimension(_))));
    }

    #[test]
    fn linear_channel_interpolated_exactly() {
        let g = grid();
        let pilots = PilotPattern::lte_like(&g, 1).unwrap();
        let h = |k: usize, l: usize| Complex64::new(0.01 * k as f64, -0.002 * k as f64) + Complex64::new(0.0, 0.05 * l as f64);
        let est = linear_interp_estimate(&observations(&pilots, h), &pilots, &g).unwrap();
        // bilinear channel: exact everywhere, extrapolated edges included
        for l in 0..14 {
            for k in g.used_subcarriers() {
                assert!(close(est.at(k, l), h(k, l), 1e-10));
            }
        }
    }

    #[test]
    fn sinusoidal_channel_error_respects_curvature_bound() {
        let g = grid();
        let pilots = PilotPattern::lte_like(&g, 1).unwrap();
        let period = 48.0;
        let h = |k: usize, _l: usize| Complex64::new((2.0 * PI * k as f64 / period).cos(), 0.0);
        let est = linear_interp_estimate(&observations(&pilots, h), &pilots, &g).unwrap();
        // interior: |err| <= max|h''| spacing^2 / 8
        let bound = (2.0 * PI / period).powi(2) * 36.0 / 8.0;
        let first = pilots.subcarriers[0];
        let last = *pilots.subcarriers.last().unwrap();
        let mut worst = 0.0f64;
        for k in first..=last {
            let e = (est.at(k, 0) - h(k, 0)).norm();
            assert!(e <= bound + 1e-12);
            worst = worst.max(e);
        }
        assert!(worst > 0.01);
    }

    #[test]
    fn linear_interp_needs_two_pilots_per_dimension() {
        let g = grid();
        let values = CMatrix::from_fn(1, 4, |_, _| Complex64::new(1.0, 0.0));
        let pilots = PilotPattern::new(vec![0, 4, 7, 11], vec![g.first_used + 3], values, &g).unwrap();
        let obs = PilotObservations { h: CMatrix::zeros(1, 4) };
        assert!(matches!(linear_interp_estimate(&obs, &pilots, &g), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn ici_power_vanishes_without_doppler() {
        let g = grid();
        let m = CorrelationModel::hsr(two_taps(0.0, 0.0), &g).unwrap();
        assert!(m.ici_power().abs() < 1e-12);
        let m = CorrelationModel::hsr(two_taps(843.0, -843.0), &g).unwrap();
        let sir = 10.0 * (m.corr_freq(0).re / m.ici_power()).log10();
        assert!((sir - 19.85).abs() < 0.1, "{sir}");
    }
}
