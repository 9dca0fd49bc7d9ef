//! Two-tap high-speed-railway channel.
//!
//! Two remote radio heads (RRH1 at track coordinate 0, RRH2 at `Ds`) sit
//! `Dmin` metres off the track and serve the same cell. Each contributes one
//! Rician tap whose Doppler offset follows from the angle of arrival at the
//! train's position.
//!
//! Doppler sign convention: positive while the train approaches an RRH. A
//! train between the two heads therefore sees a negative offset on tap 0 (the
//! head behind it) and a positive one on tap 1.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::numerics::dirichlet_kernel;
use crate::ofdm::ResourceGrid;
use crate::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioGeometry {
    /// Distance between neighbouring RRHs, `Ds` (m).
    pub inter_rrh_distance_m: f64,
    /// Perpendicular distance from the RRHs to the track, `Dmin` (m).
    pub track_offset_m: f64,
    pub speed_mps: f64,
    pub carrier_hz: f64,
    /// RRHs sharing one cell identity.
    pub rrh_count: usize,
    pub propagation_speed_mps: f64,
}

impl Default for ScenarioGeometry {
    fn default() -> Self {
        Self {
            inter_rrh_distance_m: 300.0,
            track_offset_m: 2.0,
            speed_mps: 350.0 / 3.6,
            carrier_hz: 2.6e9,
            rrh_count: 2,
            propagation_speed_mps: SPEED_OF_LIGHT,
        }
    }
}

impl ScenarioGeometry {
    pub fn validate(&self) -> Result<()> {
        let ok = self.inter_rrh_distance_m > 0.0
            && self.track_offset_m > 0.0
            && self.speed_mps >= 0.0
            && self.carrier_hz > 0.0
            && self.propagation_speed_mps > 0.0
            && self.rrh_count >= 2
            && [self.inter_rrh_distance_m, self.track_offset_m, self.speed_mps, self.carrier_hz]
                .iter()
                .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid scenario geometry {self:?}")))
        }
    }

    /// Maximum Doppler offset `v fc / c` (Hz).
    pub fn max_dfo(&self) -> f64 {
        self.speed_mps * self.carrier_hz / self.propagation_speed_mps
    }

    fn check_position(&self, x: f64) -> Result<()> {
        if !(0.0..=self.inter_rrh_distance_m).contains(&x) {
            return Err(Error::InvalidParameter(format!(
                "position {x} m outside [0, {}] m",
                self.inter_rrh_distance_m
            )));
        }
        Ok(())
    }

    /// Signed Doppler offsets (Hz) of the taps from RRH1 and RRH2 at track
    /// position `x`.
    pub fn tap_dfos_at(&self, x: f64) -> Result<[f64; 2]> {
        self.check_position(x)?;
        let fd = self.max_dfo();
        let dmin = self.track_offset_m;
        let ahead = self.inter_rrh_distance_m - x;
        let f0 = -fd * x / x.hypot(dmin);
        let f1 = fd * ahead / ahead.hypot(dmin);
        Ok([f0, f1])
    }

    /// Distances from the train to RRH1 and RRH2.
    pub fn distances_at(&self, x: f64) -> [f64; 2] {
        let dmin = self.track_offset_m;
        [x.hypot(dmin), (self.inter_rrh_distance_m - x).hypot(dmin)]
    }

    /// Relative tap powers under a `d^-exponent` path loss, normalised to a
    /// unit sum.
    pub fn tap_powers_at(&self, x: f64, pathloss_exponent: f64) -> Result<[f64; 2]> {
        self.check_position(x)?;
        if !(pathloss_exponent >= 2.0) {
            return Err(Error::InvalidParameter(format!(
                "path-loss exponent {pathloss_exponent} must be at least 2"
            )));
        }
        let [d0, d1] = self.distances_at(x);
        let g0 = d0.powf(-pathloss_exponent);
        let g1 = d1.powf(-pathloss_exponent);
        Ok([g0 / (g0 + g1), g1 / (g0 + g1)])
    }

    /// Position in `(0, Ds/2)` where tap 0 carries `ratio` times the power of
    /// tap 1, found by bisection to `tol_m`.
    pub fn position_for_power_ratio(&self, ratio: f64, pathloss_exponent: f64, tol_m: f64) -> Result<f64> {
        self.validate()?;
        if !(ratio > 1.0) {
            return Err(Error::InvalidParameter(format!("power ratio {ratio} must exceed 1")));
        }
        let power_ratio = |x: f64| -> Result<f64> {
            let [p0, p1] = self.tap_powers_at(x, pathloss_exponent)?;
            Ok(p0 / p1)
        };
        // ratio decreases monotonically from RRH1 to the midpoint, where it is 1
        let (mut lo, mut hi) = (0.0, 0.5 * self.inter_rrh_distance_m);
        if power_ratio(lo)? < ratio {
            return Err(Error::InvalidParameter(format!(
                "power ratio {ratio} is not reached on this geometry"
            )));
        }
        while hi - lo > tol_m * 1e-3 {
            let mid = 0.5 * (lo + hi);
            if power_ratio(mid)? > ratio {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

/// One propagation tap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TapState {
    /// Complex gain; its phase is uniform over drops.
    pub gain: Complex64,
    /// Delay in samples; must stay inside the cyclic prefix.
    pub delay_samples: usize,
    pub dfo_hz: f64,
    /// LOS-to-diffuse power ratio (linear); infinity for a pure LOS tap.
    pub rician_k: f64,
}

impl TapState {
    /// Doppler offset normalised by the subcarrier spacing.
    pub fn normalized_dfo(&self, grid: &ResourceGrid) -> f64 {
        self.dfo_hz / grid.subcarrier_spacing_hz
    }
}

/// Statistical description of one tap before the gain is drawn.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TapProfile {
    pub power: f64,
    pub delay_samples: usize,
    pub dfo_hz: f64,
    pub rician_k: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub taps: Vec<TapState>,
    pub seed: u64,
}

/// Draws Rician tap gains
/// `sqrt(p) [sqrt(K/(K+1)) e^{j phi} + sqrt(1/(K+1)) CN(0,1)]`.
pub fn draw_tap_gains<R: Rng + ?Sized>(profiles: &[TapProfile], rng: &mut R) -> Result<Vec<TapState>> {
    profiles
        .iter()
        .map(|p| {
            if !(p.rician_k >= 0.0) || !(p.power >= 0.0) {
                return Err(Error::InvalidParameter(format!("invalid tap profile {p:?}")));
            }
            let phi = rng.random_range(0.0..2.0 * PI);
            let (los, diffuse) = if p.rician_k.is_infinite() {
                (1.0, 0.0)
            } else {
                ((p.rician_k / (p.rician_k + 1.0)).sqrt(), (1.0 / (p.rician_k + 1.0)).sqrt())
            };
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            let scatter = Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2;
            let gain = (Complex64::from_polar(los, phi) + scatter * diffuse) * p.power.sqrt();
            Ok(TapState {
                gain,
                delay_samples: p.delay_samples,
                dfo_hz: p.dfo_hz,
                rician_k: p.rician_k,
            })
        })
        .collect()
}

/// Applies the taps to a time-domain sample stream:
/// `y[n] = sum_q g_q x[n - d_q] exp(j 2 pi f_q (t0 + n Ts))`.
///
/// `t0` is the absolute time of the first sample, so successive calls (or a
/// whole frame in one call) keep the Doppler phase continuous. Samples before
/// the start of the stream are taken as zero.
pub fn apply_channel_time_domain(
    samples: &[Complex64],
    taps: &[TapState],
    t0: f64,
    sample_period: f64,
    cp_len: usize,
) -> Result<Vec<Complex64>> {
    if let Some(t) = taps.iter().find(|t| t.delay_samples >= cp_len) {
        return Err(Error::InvalidParameter(format!(
            "tap delay {} samples does not fit a {cp_len}-sample cyclic prefix",
            t.delay_samples
        )));
    }
    let mut out = vec![Complex64::new(0.0, 0.0); samples.len()];
    for tap in taps {
        let w = 2.0 * PI * tap.dfo_hz;
        for (n, y) in out.iter_mut().enumerate().skip(tap.delay_samples) {
            let t = t0 + n as f64 * sample_period;
            *y += tap.gain * samples[n - tap.delay_samples] * Complex64::from_polar(1.0, w * t);
        }
    }
    Ok(out)
}

/// Doppler phase accumulated by a tap at the start of OFDM symbol `l`,
/// `2 pi F l (N + Ncp) / N`.
pub fn symbol_phase(normalized_dfo: f64, symbol: usize, grid: &ResourceGrid) -> f64 {
    let n = grid.fft_size as f64;
    2.0 * PI * normalized_dfo * symbol as f64 * (n + grid.cp_len as f64) / n
}

/// Per-tap leakage coefficient from subcarrier `source` into subcarrier
/// `target`: `(1/N) g_q G(target - source - F_q) exp(-j 2 pi d_q source / N)`.
fn leakage(tap: &TapState, target: usize, source: usize, grid: &ResourceGrid) -> Complex64 {
    let n = grid.fft_size;
    let f = tap.normalized_dfo(grid);
    let offset = target as f64 - source as f64 - f;
    let delay_phase = -2.0 * PI * (tap.delay_samples * source % n) as f64 / n as f64;
    tap.gain * dirichlet_kernel(offset, n) * Complex64::from_polar(1.0 / n as f64, delay_phase)
}

/// Fading part of the demodulated channel at `(k, l)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FreqResponse {
    /// Multiplicative channel on `x_k`.
    pub fading: Complex64,
    /// Each tap's share of `fading`, including its symbol phase.
    pub per_tap: Vec<Complex64>,
}

/// Analytic fading coefficient on subcarrier `k` of symbol `l`:
/// `sum_q (1/N) g_q G(-F_q) exp(-j 2 pi d_q k / N) exp(j theta_q(l))`.
pub fn analytic_freq_response(k: usize, l: usize, taps: &[TapState], grid: &ResourceGrid) -> FreqResponse {
    let per_tap: Vec<Complex64> = taps
        .iter()
        .map(|t| leakage(t, k, k, grid) * Complex64::from_polar(1.0, symbol_phase(t.normalized_dfo(grid), l, grid)))
        .collect();
    FreqResponse {
        fading: per_tap.iter().sum(),
        per_tap,
    }
}

/// Inter-carrier interference received on subcarrier `k` of symbol `l` from
/// every other subcarrier of `symbols` (a full FFT-length frequency vector).
///
/// The delay phase of each leaking term is that of its source subcarrier,
/// which is what CP-OFDM demodulation produces.
pub fn ici_term(k: usize, l: usize, taps: &[TapState], symbols: &[Complex64], grid: &ResourceGrid) -> Result<Complex64> {
    if symbols.len() != grid.fft_size {
        return Err(Error::Dimension(format!(
            "expected {} frequency bins, got {}",
            grid.fft_size,
            symbols.len()
        )));
    }
    let rot: Vec<Complex64> = taps
        .iter()
        .map(|t| Complex64::from_polar(1.0, symbol_phase(t.normalized_dfo(grid), l, grid)))
        .collect();
    let mut total = Complex64::new(0.0, 0.0);
    for (i, &x) in symbols.iter().enumerate() {
        if i == k || x == Complex64::new(0.0, 0.0) {
            continue;
        }
        let coupling: Complex64 = taps.iter().zip(&rot).map(|(t, r)| leakage(t, k, i, grid) * r).sum();
        total += x * coupling;
    }
    Ok(total)
}

/// Signal-to-ICI ratio (dB) on a subcarrier at the centre of a block of
/// `used_subcarriers`, for taps with zero delay.
///
/// Returns `+inf` when no tap has a Doppler offset.
pub fn sir_db(taps: &[TapState], grid: &ResourceGrid, used_subcarriers: usize) -> Result<f64> {
    if taps.iter().any(|t| t.delay_samples != 0) {
        return Err(Error::InvalidParameter("signal-to-ICI ratio assumes zero tap delays".into()));
    }
    if used_subcarriers < 1 || used_subcarriers > grid.fft_size {
        return Err(Error::InvalidParameter(format!(
            "used subcarrier count {used_subcarriers} outside [1, {}]",
            grid.fft_size
        )));
    }
    let n = grid.fft_size;
    let power = |offset: f64| -> f64 {
        taps.iter()
            .map(|t| (t.gain * dirichlet_kernel(offset - t.normalized_dfo(grid), n)).norm_sqr())
            .sum()
    };
    let signal = power(0.0);
    let half = (used_subcarriers / 2) as i64;
    let interference: f64 = (-half..used_subcarriers as i64 - half)
        .filter(|&d| d != 0)
        .map(|d| power(d as f64))
        .sum();
    if interference <= signal * 1e-25 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (signal / interference).log10())
}
