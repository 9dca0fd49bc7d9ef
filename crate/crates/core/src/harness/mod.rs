//! Monte Carlo link simulation, metric aggregation and CSV output.

mod config;
mod sim;

use std::io::Write;

use rayon::prelude::*;

pub use config::{
    DfoConfig, EstimationConfig, Estimator, GridConfig, PilotConfig, PositionKeyword, PositionSpec, SimConfig,
    SweepConfig, TapConfig,
};
pub use sim::{throughput_proxy, CellSetup, DropMetrics, EstimatorMetrics, SimContext, MIN_NOISE_RATIO};

use crate::channel::ScenarioGeometry;
use crate::dfo::DfoMethod;
use crate::Result;

pub const CSV_HEADER: &str = "snr_db,position_m,estimator,dfo_method,dfo_rel_err_mean,dfo_rel_err_p95,mse_db,ber,tp_bits_per_symbol,mult_count,drops_used,ci95_mse_db";

/// Track position where tap 0 receives twice the power of tap 1.
pub fn find_p3db(geometry: &ScenarioGeometry, pathloss_exponent: f64) -> Result<f64> {
    geometry.position_for_power_ratio(2.0, pathloss_exponent, 1e-3)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of one drop, a hash of the master seed and the cell coordinates.
pub fn drop_seed(master: u64, snr_db: f64, position_m: f64, drop: usize) -> u64 {
    [snr_db.to_bits(), position_m.to_bits(), drop as u64]
        .into_iter()
        .fold(splitmix64(master), |h, v| splitmix64(h ^ v))
}

/// Positions the sweep visits.
pub fn resolve_positions(config: &SimConfig) -> Result<Vec<f64>> {
    let g = &config.geometry;
    Ok(match config.sweep.position {
        PositionSpec::Meters(x) => vec![x],
        PositionSpec::Keyword(PositionKeyword::P3db) => vec![find_p3db(g, config.taps.pathloss_exponent)?],
        PositionSpec::Keyword(PositionKeyword::Sweep) => {
            let n = config.sweep.position_points;
            (0..n)
                .map(|i| g.inter_rrh_distance_m * i as f64 / (n - 1) as f64)
                .collect()
        }
    })
}

/// Every drop of one (SNR, position) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub snr_db: f64,
    pub position_m: f64,
    pub drops: Vec<DropMetrics>,
}

pub fn run_cell(ctx: &SimContext, snr_db: f64, position_m: f64) -> Result<CellResult> {
    let cell = ctx.prepare_cell(snr_db, position_m)?;
    let drops = (0..ctx.config.drops)
        .into_par_iter()
        .map(|d| ctx.run_drop(&cell, drop_seed(ctx.config.seed, snr_db, position_m, d)))
        .collect::<Result<Vec<_>>>()?;
    Ok(CellResult {
        snr_db,
        position_m,
        drops,
    })
}

/// All cells, SNR-major then position.
pub fn sweep_detailed(config: &SimConfig) -> Result<Vec<CellResult>> {
    let ctx = SimContext::new(config)?;
    let positions = resolve_positions(config)?;
    let mut cells = Vec::new();
    for &snr in &config.sweep.snr_db {
        for &x in &positions {
            cells.push(run_cell(&ctx, snr, x)?);
        }
    }
    Ok(cells)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub snr_db: f64,
    pub position_m: f64,
    pub estimator: Estimator,
    pub dfo_method: DfoMethod,
    pub dfo_rel_err_mean: f64,
    pub dfo_rel_err_p95: f64,
    pub mse_db: f64,
    pub ber: f64,
    pub tp_bits_per_symbol: f64,
    pub mult_count: f64,
    pub drops_used: usize,
    /// Half-width of the 95% interval on the mean normalised MSE, in dB above `mse_db`.
    pub ci95_mse_db: f64,
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Nearest-rank percentile.
fn percentile(v: &[f64], p: f64) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let rank = ((p / 100.0) * s.len() as f64).ceil() as usize;
    s[rank.clamp(1, s.len()) - 1]
}

/// 1.96 standard errors of the mean.
pub fn ci95_half_width(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return f64::NAN;
    }
    let m = mean(v);
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
    1.96 * (var / v.len() as f64).sqrt()
}

/// One record per configured estimator.
pub fn summarize(cell: &CellResult, config: &SimConfig) -> Vec<MetricsRecord> {
    let dfo_errs: Vec<f64> = cell.drops.iter().filter_map(|d| d.dfo_rel_err).collect();
    let mults: Vec<f64> = cell
        .drops
        .iter()
        .filter(|d| d.f_hat.is_some())
        .map(|d| d.mult_count as f64)
        .collect();
    config
        .estimation
        .estimators
        .iter()
        .map(|&e| {
            let used: Vec<&EstimatorMetrics> = cell.drops.iter().filter_map(|d| d.get(e)).collect();
            let nmse: Vec<f64> = used.iter().map(|m| m.nmse).collect();
            let mse = mean(&nmse);
            let hw = ci95_half_width(&nmse);
            let (errors, bits, ok, blocks) = used.iter().fold((0u64, 0u64, 0u64, 0u64), |a, m| {
                (a.0 + m.bit_errors, a.1 + m.bits, a.2 + m.blocks_ok, a.3 + m.blocks)
            });
            let ratio = |a: u64, b: u64| if b == 0 { f64::NAN } else { a as f64 / b as f64 };
            MetricsRecord {
                snr_db: cell.snr_db,
                position_m: cell.position_m,
                estimator: e,
                dfo_method: config.dfo.method,
                dfo_rel_err_mean: mean(&dfo_errs),
                dfo_rel_err_p95: percentile(&dfo_errs, 95.0),
                mse_db: 10.0 * mse.log10(),
                ber: ratio(errors, bits),
                tp_bits_per_symbol: 4.0 * ratio(ok, blocks),
                mult_count: mean(&mults),
                drops_used: used.len(),
                ci95_mse_db: 10.0 * ((mse + hw) / mse).log10(),
            }
        })
        .collect()
}

pub fn sweep(config: &SimConfig) -> Result<Vec<MetricsRecord>> {
    Ok(sweep_detailed(config)?
        .iter()
        .flat_map(|c| summarize(c, config))
        .collect())
}

/// `%.9g`-style formatting.
pub fn format_number(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    // the exponent after rounding to 9 significant digits
    let sci = format!("{:.8e}", v);
    let (mantissa, e) = sci.split_once('e').expect("scientific format");
    let e: i32 = e.parse().expect("exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if (-4..9).contains(&e) {
        let decimals = (8 - e).max(0) as usize;
        trim(&format!("{:.*}", decimals, v))
    } else {
        let sign = if e < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", trim(mantissa), sign, e.abs())
    }
}

fn method_name(m: DfoMethod) -> &'static str {
    match m {
        DfoMethod::Proposed => "proposed",
        DfoMethod::ExhaustiveSearch => "es",
    }
}

pub fn write_csv<W: Write>(mut out: W, records: &[MetricsRecord]) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in records {
        let f = format_number;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            f(r.snr_db),
            f(r.position_m),
            r.estimator.name(),
            method_name(r.dfo_method),
            f(r.dfo_rel_err_mean),
            f(r.dfo_rel_err_p95),
            f(r.mse_db),
            f(r.ber),
            f(r.tp_bits_per_symbol),
            f(r.mult_count),
            r.drops_used,
            f(r.ci95_mse_db)
        )?;
    }
    Ok(())
}

pub fn to_csv_string(records: &[MetricsRecord]) -> String {
    let mut buf = Vec::new();
    write_csv(&mut buf, records).expect("writing to memory");
    String::from_utf8(buf).expect("ascii output")
}
