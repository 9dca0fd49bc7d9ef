use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::config::{Estimator, SimConfig};
use crate::chanest::{lmmse_estimate, linear_interp_estimate, ChannelEstimate, CorrelationModel, ModelTap, WienerFilters};
use crate::channel::{analytic_freq_response, apply_channel_time_domain, draw_tap_gains, TapProfile, TapState};
use crate::dfo::{build_delay_basis, es_estimate, estimate_proposed, DelayBasis, DfoMethod};
use crate::numerics::CMatrix;
use crate::ofdm::{
    add_awgn, demodulate, ls_estimate, modulate, noise_variance, qam16_demap, Frame, PilotObservations, PilotPattern,
    ResourceGrid, SUBCARRIERS_PER_RB,
};
use crate::{Error, Result};

/// Smallest diagonal load used when the SNR is infinite, keeping rank-deficient
/// pilot correlation matrices invertible.
pub const MIN_NOISE_RATIO: f64 = 1e-9;

const BITS_PER_SYMBOL: usize = 4;

/// Everything fixed by the configuration alone.
#[derive(Debug, Clone)]
pub struct SimContext {
    pub config: SimConfig,
    pub grid: ResourceGrid,
    pub pilots: PilotPattern,
    pub basis: DelayBasis,
    pub max_dfo_hz: f64,
}

impl SimContext {
    pub fn new(config: &SimConfig) -> Result<Self> {
        config.validate()?;
        let grid = config.resource_grid()?;
        let pilots = config.pilot_pattern(&grid)?;
        let delays: Vec<f64> = config.taps.delays_samples.iter().map(|&d| d as f64).collect();
        let basis = build_delay_basis(&delays, &pilots.subcarriers, grid.fft_size)?;
        Ok(Self {
            max_dfo_hz: config.geometry.max_dfo(),
            config: config.clone(),
            grid,
            pilots,
            basis,
        })
    }

    /// Tap statistics at track position `x`.
    pub fn profiles_at(&self, x: f64) -> Result<Vec<TapProfile>> {
        let g = &self.config.geometry;
        let dfos = g.tap_dfos_at(x)?;
        let powers = g.tap_powers_at(x, self.config.taps.pathloss_exponent)?;
        Ok((0..2)
            .map(|q| TapProfile {
                power: powers[q],
                delay_samples: self.config.taps.delays_samples[q],
                dfo_hz: dfos[q],
                rician_k: 10f64.powf(self.config.taps.rician_k_db[q] / 10.0),
            })
            .collect())
    }

    fn noise_ratio(&self, snr_db: f64, model: &CorrelationModel) -> f64 {
        let mut ratio = noise_variance(snr_db, 1.0);
        if self.config.estimation.ici_in_noise && self.config.data_symbols {
            ratio += model.ici_power();
        }
        ratio.max(MIN_NOISE_RATIO)
    }

    fn filters(&self, model: &CorrelationModel, snr_db: f64) -> Result<WienerFilters> {
        WienerFilters::build(model, &self.pilots, self.config.estimation.window_rb, self.noise_ratio(snr_db, model))
    }

    fn hsr_model(&self, profiles: &[TapProfile], dfos: &[f64]) -> Result<CorrelationModel> {
        let taps = profiles
            .iter()
            .zip(dfos)
            .map(|(p, &f)| ModelTap {
                power: p.power,
                delay_samples: p.delay_samples as f64,
                dfo_hz: f,
            })
            .collect();
        CorrelationModel::hsr(taps, &self.grid)
    }

    /// Filters and tap statistics shared by every drop of one sweep cell.
    pub fn prepare_cell(&self, snr_db: f64, position_m: f64) -> Result<CellSetup> {
        let profiles = self.profiles_at(position_m)?;
        let true_dfos: Vec<f64> = profiles.iter().map(|p| p.dfo_hz).collect();
        let wants = |e| self.config.estimation.estimators.contains(&e);
        let legacy = if wants(Estimator::LmmseLegacy) {
            // the legacy receiver knows f_D but not the per-tap offsets
            let taps = profiles
                .iter()
                .map(|p| ModelTap {
                    power: p.power,
                    delay_samples: p.delay_samples as f64,
                    dfo_hz: self.max_dfo_hz,
                })
                .collect();
            let model = CorrelationModel::legacy(taps, self.max_dfo_hz, &self.grid)?;
            Some(self.filters(&model, snr_db)?)
        } else {
            None
        };
        let ideal = if wants(Estimator::ElmmseIdeal) {
            Some(self.filters(&self.hsr_model(&profiles, &true_dfos)?, snr_db)?)
        } else {
            None
        };
        Ok(CellSetup {
            snr_db,
            position_m,
            profiles,
            true_dfos,
            legacy,
            ideal,
        })
    }

    /// One frame through the link.
    pub fn run_drop(&self, cell: &CellSetup, drop_seed: u64) -> Result<DropMetrics> {
        let mut rng = ChaCha8Rng::seed_from_u64(drop_seed);
        let taps = draw_tap_gains(&cell.profiles, &mut rng)?;
        let grid = &self.grid;
        let pilots = &self.pilots;

        let (frame, rx) = if self.config.data_symbols {
            let frame = Frame::with_random_payload(grid, pilots, &mut rng)?;
            let tx = modulate(&frame.tx_grid, grid)?;
            let t0 = -(grid.cp_len as f64) * grid.sample_period();
            let mut samples = apply_channel_time_domain(&tx, &taps, t0, grid.sample_period(), grid.cp_len)?;
            add_awgn(&mut samples, cell.snr_db, 1.0 / grid.fft_size as f64, &mut rng)?;
            let rx = demodulate(&samples, grid)?;
            (Some(frame), rx)
        } else {
            (None, self.pilot_only_reception(&taps, cell.snr_db, &mut rng))
        };
        let obs = ls_estimate(&rx, pilots)?;
        let truth = CMatrix::from_fn(grid.symbols_per_frame, grid.used_count, |l, c| {
            analytic_freq_response(grid.first_used + c, l, &taps, grid).fading
        });

        let dfo = self.estimate_dfos(&obs);
        let dfo_rel_err = dfo.as_ref().ok().map(|(f, _)| {
            f.iter().zip(&cell.true_dfos).map(|(a, b)| (a - b).abs()).sum::<f64>() / (f.len() as f64 * self.max_dfo_hz)
        });
        let (f_hat, mult_count) = match dfo {
            Ok((f, m)) => (Some(f), m),
            Err(_) => (None, 0),
        };

        let mut estimators = Vec::with_capacity(self.config.estimation.estimators.len());
        for &e in &self.config.estimation.estimators {
            let estimate = match e {
                Estimator::Linear => Some(linear_interp_estimate(&obs, pilots, grid)?),
                Estimator::LmmseLegacy => Some(lmmse_estimate(&obs, cell.legacy.as_ref().expect("prepared"))?),
                Estimator::ElmmseIdeal => Some(lmmse_estimate(&obs, cell.ideal.as_ref().expect("prepared"))?),
                Estimator::ElmmseEstimated => match &f_hat {
                    Some(f) => {
                        let filters = self.filters(&self.hsr_model(&cell.profiles, f)?, cell.snr_db)?;
                        Some(lmmse_estimate(&obs, &filters)?)
                    }
                    None => None,
                },
            };
            let metrics = estimate.map(|est| score(&est, &truth, frame.as_ref(), &rx, pilots, grid));
            estimators.push((e, metrics));
        }
        Ok(DropMetrics {
            seed: drop_seed,
            true_dfos: cell.true_dfos.clone(),
            f_hat,
            dfo_rel_err,
            mult_count,
            estimators,
        })
    }

    fn estimate_dfos(&self, obs: &PilotObservations) -> Result<(Vec<f64>, u64)> {
        let cfg = &self.config;
        match cfg.dfo.method {
            DfoMethod::Proposed => {
                let est = estimate_proposed(&obs.h, &self.basis, &self.pilots.symbols, &self.grid, cfg.estimation.pair_policy)?;
                Ok((est.f_hat, est.multiplications))
            }
            DfoMethod::ExhaustiveSearch => {
                let est = es_estimate(&obs.h, &self.basis, cfg.dfo.es_max_hz, cfg.dfo.es_step_hz, &self.pilots.symbols, &self.grid)?;
                Ok((est.f_hat, est.multiplications))
            }
        }
    }

    /// Received pilot grid built from the fading term alone plus white noise
    /// on each pilot: nothing else is transmitted, so nothing leaks.
    fn pilot_only_reception(&self, taps: &[TapState], snr_db: f64, rng: &mut ChaCha8Rng) -> Vec<Vec<Complex64>> {
        let grid = &self.grid;
        let sigma = (0.5 * noise_variance(snr_db, 1.0)).sqrt();
        let mut rx = vec![vec![Complex64::new(0.0, 0.0); grid.fft_size]; grid.symbols_per_frame];
        for (j, &l) in self.pilots.symbols.iter().enumerate() {
            for (i, &k) in self.pilots.subcarriers.iter().enumerate() {
                let h = analytic_freq_response(k, l, taps, grid).fading;
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                rx[l][k] = h * self.pilots.values[(i, j)] + Complex64::new(re, im) * sigma;
            }
        }
        rx
    }
}

#[derive(Debug, Clone)]
pub struct CellSetup {
    pub snr_db: f64,
    pub position_m: f64,
    pub profiles: Vec<TapProfile>,
    pub true_dfos: Vec<f64>,
    legacy: Option<WienerFilters>,
    ideal: Option<WienerFilters>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorMetrics {
    /// `sum |H_est - H|^2 / sum |H|^2` over the used grid.
    pub nmse: f64,
    pub bit_errors: u64,
    pub bits: u64,
    pub blocks_ok: u64,
    pub blocks: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DropMetrics {
    pub seed: u64,
    pub true_dfos: Vec<f64>,
    /// `None` when DFO estimation failed.
    pub f_hat: Option<Vec<f64>>,
    /// Mean over taps of `|f_hat - f| / f_D`.
    pub dfo_rel_err: Option<f64>,
    pub mult_count: u64,
    /// `None` marks an estimator that could not run on this drop.
    pub estimators: Vec<(Estimator, Option<EstimatorMetrics>)>,
}

impl DropMetrics {
    pub fn get(&self, e: Estimator) -> Option<&EstimatorMetrics> {
        self.estimators.iter().find(|(x, _)| *x == e).and_then(|(_, m)| m.as_ref())
    }
}

fn score(
    est: &ChannelEstimate,
    truth: &CMatrix,
    frame: Option<&Frame>,
    rx: &[Vec<Complex64>],
    pilots: &PilotPattern,
    grid: &ResourceGrid,
) -> EstimatorMetrics {
    let err: f64 = est.values.as_slice().iter().zip(truth.as_slice()).map(|(a, b)| (a - b).norm_sqr()).sum();
    let power: f64 = truth.as_slice().iter().map(|h| h.norm_sqr()).sum();
    let mut m = EstimatorMetrics {
        nmse: err / power,
        bit_errors: 0,
        bits: 0,
        blocks_ok: 0,
        blocks: 0,
    };
    let Some(frame) = frame else {
        return m;
    };
    // one block per resource block and OFDM symbol
    let rbs = grid.resource_blocks();
    let mut block_errors = vec![0u64; rbs * grid.symbols_per_frame];
    let mut has_data = vec![false; block_errors.len()];
    for (idx, &(k, l)) in pilots.data_positions(grid).iter().enumerate() {
        let equalized = rx[l][k] / est.at(k, l);
        let bits = qam16_demap(&[equalized]);
        let sent = &frame.payload_bits[idx * BITS_PER_SYMBOL..(idx + 1) * BITS_PER_SYMBOL];
        let wrong = bits.iter().zip(sent).filter(|(a, b)| a != b).count() as u64;
        m.bit_errors += wrong;
        m.bits += BITS_PER_SYMBOL as u64;
        let block = l * rbs + (k - grid.first_used) / SUBCARRIERS_PER_RB;
        block_errors[block] += wrong;
        has_data[block] = true;
    }
    let scored: Vec<bool> = block_errors
        .iter()
        .zip(&has_data)
        .filter(|(_, d)| **d)
        .map(|(e, _)| *e > 0)
        .collect();
    m.blocks = scored.len() as u64;
    m.blocks_ok = scored.iter().filter(|e| !**e).count() as u64;
    m
}

/// `modulation_bits` times the fraction of error-free blocks.
pub fn throughput_proxy(block_has_errors: &[bool], modulation_bits: u32) -> Result<f64> {
    if block_has_errors.is_empty() {
        return Err(Error::InvalidParameter("no blocks to score".into()));
    }
    let ok = block_has_errors.iter().filter(|e| !**e).count();
    Ok(modulation_bits as f64 * ok as f64 / block_has_errors.len() as f64)
}
