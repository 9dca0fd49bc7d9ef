//! Per-tap Doppler offset estimation.
//!
//! Pilot observations on each pilot symbol are modelled as
//! `H_p^i = D_p X_p^i + W_p^i`, where the delay basis `D_p` carries each tap's
//! linear phase across the pilot subcarriers and `X_p^i` holds one complex
//! amplitude per tap. Least squares separates the taps; the phase advance of
//! each tap between two pilot symbols then gives its Doppler offset.
//!
//! Tap delays are supplied by the caller (known delays are assumed throughout).

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::numerics::{condition_number, pseudo_inverse, CMatrix, MAX_CONDITION};
use crate::ofdm::ResourceGrid;
use crate::{Error, Result};

/// `m x Q` matrix with entry `(p, q) = exp(-j 2 pi d_q k_p / N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayBasis {
    pub matrix: CMatrix,
    pub delays: Vec<f64>,
    pub subcarriers: Vec<usize>,
    /// 2-norm condition number of `matrix`.
    pub condition: f64,
}

impl DelayBasis {
    pub fn taps(&self) -> usize {
        self.delays.len()
    }
}

pub fn build_delay_basis(delays: &[f64], subcarriers: &[usize], fft_size: usize) -> Result<DelayBasis> {
    let (m, q) = (subcarriers.len(), delays.len());
    if q == 0 || m < q {
        return Err(Error::InvalidParameter(format!(
            "{m} pilot subcarriers cannot separate {q} taps"
        )));
    }
    let n = fft_size as f64;
    let matrix = CMatrix::from_fn(m, q, |p, t| {
        // reduce the phase argument before scaling to keep it accurate
        let cycles = (delays[t] * subcarriers[p] as f64 / n).fract();
        Complex64::from_polar(1.0, -2.0 * PI * cycles)
    });
    let condition = condition_number(&matrix)?;
    if !(condition <= MAX_CONDITION) {
        return Err(Error::Identifiability {
            condition,
            limit: MAX_CONDITION,
        });
    }
    Ok(DelayBasis {
        matrix,
        delays: delays.to_vec(),
        subcarriers: subcarriers.to_vec(),
        condition,
    })
}

/// Least-squares tap amplitudes per pilot symbol, `Q x n`.
#[derive(Debug, Clone, PartialEq)]
pub struct TapSeparation {
    pub z: CMatrix,
    /// Complex multiplications spent.
    pub multiplications: u64,
}

/// `Z_p = pinv(D_p) H_p`.
pub fn separate_taps(h_p: &CMatrix, basis: &DelayBasis) -> Result<TapSeparation> {
    let (m, q) = (basis.matrix.rows(), basis.matrix.cols());
    if h_p.rows() != m {
        return Err(Error::Dimension(format!(
            "observations have {} rows, delay basis has {m}",
            h_p.rows()
        )));
    }
    let pinv = pseudo_inverse(&basis.matrix)?;
    let z = pinv.matmul(h_p)?;
    let (m, q, n) = (m as u64, q as u64, h_p.cols() as u64);
    // Gram matrix, Q x Q inverse, inverse times D^H, then one product per symbol
    let multiplications = q * q * m + q * q * q + q * q * m + q * m * n;
    Ok(TapSeparation { z, multiplications })
}

/// Which pilot-symbol pairs feed the phase-ratio average.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairPolicy {
    /// `(l_i, l_{i+1})` for every `i`.
    #[default]
    Consecutive,
    /// Every `(l_i, l_j)` with `i < j`.
    All,
}

impl PairPolicy {
    fn pairs(self, n: usize) -> Vec<(usize, usize)> {
        match self {
            PairPolicy::Consecutive => (1..n).map(|j| (j - 1, j)).collect(),
            PairPolicy::All => (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairEstimate {
    /// Column indices into the pilot-symbol list.
    pub first: usize,
    pub second: usize,
    pub f_hz: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DfoEstimate {
    pub f_hat: Vec<f64>,
    pub per_pair: Vec<PairEstimate>,
    /// Largest |DFO| every selected pair resolves without wrapping.
    pub alias_bound: f64,
    pub multiplications: u64,
}

/// Phase-ratio estimate per tap and pair,
/// `angle(Z_q^j / Z_q^i) / (2 pi T (l_j - l_i))`, averaged over pairs.
///
/// Pairs touching a zero amplitude are skipped.
pub fn estimate_dfos(
    sep: &TapSeparation,
    pilot_symbols: &[usize],
    grid: &ResourceGrid,
    policy: PairPolicy,
) -> Result<DfoEstimate> {
    let (q, n) = (sep.z.rows(), sep.z.cols());
    if n != pilot_symbols.len() {
        return Err(Error::Dimension(format!(
            "{n} separated columns for {} pilot symbols",
            pilot_symbols.len()
        )));
    }
    if n < 2 {
        return Err(Error::InvalidParameter("phase ratios need two pilot symbols".into()));
    }
    let t = grid.symbol_duration();
    let zero = Complex64::new(0.0, 0.0);
    let mut per_pair = Vec::new();
    let mut widest = 0usize;
    for (i, j) in policy.pairs(n) {
        let (li, lj) = (pilot_symbols[i], pilot_symbols[j]);
        if lj <= li {
            return Err(Error::InvalidParameter("pilot symbols must increase".into()));
        }
        if (0..q).any(|tap| sep.z[(tap, i)] == zero || sep.z[(tap, j)] == zero) {
            continue;
        }
        let span = lj - li;
        widest = widest.max(span);
        let f_hz = (0..q)
            .map(|tap| (sep.z[(tap, j)] * sep.z[(tap, i)].conj()).arg() / (2.0 * PI * t * span as f64))
            .collect();
        per_pair.push(PairEstimate { first: i, second: j, f_hz });
    }
    if per_pair.is_empty() {
        return Err(Error::EstimationFailed("every pilot-symbol pair touched a zero amplitude"));
    }
    let f_hat = (0..q)
        .map(|tap| per_pair.iter().map(|p| p.f_hz[tap]).sum::<f64>() / per_pair.len() as f64)
        .collect();
    let multiplications = sep.multiplications + (q * per_pair.len()) as u64;
    Ok(DfoEstimate {
        f_hat,
        per_pair,
        alias_bound: 1.0 / (2.0 * t * widest as f64),
        multiplications,
    })
}

/// Separation followed by phase ratios.
pub fn estimate_proposed(
    h_p: &CMatrix,
    basis: &DelayBasis,
    pilot_symbols: &[usize],
    grid: &ResourceGrid,
    policy: PairPolicy,
) -> Result<DfoEstimate> {
    let sep = separate_taps(h_p, basis)?;
    estimate_dfos(&sep, pilot_symbols, grid, policy)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EsEstimate {
    pub f_hat: Vec<f64>,
    pub multiplications: u64,
}

/// Exhaustive-search baseline on the grid `-f_max, -f_max + step, ...`.
///
/// Every candidate `(f_0, f_1)` fits one complex amplitude per tap by least
/// squares to all pilot symbols at once and keeps the candidate with the
/// smallest residual `sum_i |H_p^i - D_p X(f)^i|^2`. After projecting onto the
/// delay basis the residual reduces to `const - b^H M^-1 b` with
/// `M_qr = G_qr sum_i exp(j 2 pi (f_r - f_q) T l_i)` and
/// `b_q = sum_i exp(-j 2 pi f_q T l_i) (G z_i)_q`, `G = D^H D`, so each
/// candidate costs a 2 x 2 solve against precomputed tables.
pub fn es_estimate(
    h_p: &CMatrix,
    basis: &DelayBasis,
    f_max: f64,
    step: f64,
    pilot_symbols: &[usize],
    grid: &ResourceGrid,
) -> Result<EsEstimate> {
    if !(step > 0.0) || !(f_max >= 0.0) || !f_max.is_finite() {
        return Err(Error::InvalidParameter(format!("search range {f_max} Hz with step {step} Hz")));
    }
    let q = basis.taps();
    if q > 2 {
        return Err(Error::InvalidParameter("exhaustive search supports at most two taps".into()));
    }
    if h_p.cols() != pilot_symbols.len() {
        return Err(Error::Dimension("observation columns do not match pilot symbols".into()));
    }
    let sep = separate_taps(h_p, basis)?;
    let gram = &basis.matrix.adjoint() * &basis.matrix;
    let weighted = gram.matmul(&sep.z)?;
    let n = pilot_symbols.len();
    let t = grid.symbol_duration();
    let points = (2.0 * f_max / step + 1e-9).floor() as usize + 1;
    let freq = |j: usize| -f_max + j as f64 * step;

    let b: Vec<Vec<Complex64>> = (0..q)
        .map(|tap| {
            (0..points)
                .map(|j| {
                    pilot_symbols
                        .iter()
                        .enumerate()
                        .map(|(i, &l)| Complex64::from_polar(1.0, -2.0 * PI * freq(j) * t * l as f64) * weighted[(tap, i)])
                        .sum()
                })
                .collect()
        })
        .collect();
    let nf = n as f64;
    let mut mults = sep.multiplications + (q * q * n) as u64 + (q * points * n) as u64;

    let f_hat = if q == 1 {
        let best = (0..points)
            .max_by(|&a, &c| b[0][a].norm_sqr().total_cmp(&b[0][c].norm_sqr()).then(c.cmp(&a)))
            .expect("non-empty grid");
        mults += points as u64;
        vec![freq(best)]
    } else {
        // S[d + points - 1] = sum_i exp(j 2 pi d step T l_i)
        let s: Vec<Complex64> = (0..2 * points - 1)
            .map(|idx| {
                let d = idx as f64 - (points - 1) as f64;
                pilot_symbols
                    .iter()
                    .map(|&l| Complex64::from_polar(1.0, 2.0 * PI * d * step * t * l as f64))
                    .sum()
            })
            .collect();
        mults += ((2 * points - 1) * n) as u64;
        let (g00, g11, g01) = (gram[(0, 0)].re * nf, gram[(1, 1)].re * nf, gram[(0, 1)]);
        let mut best = (f64::NEG_INFINITY, 0usize, 0usize);
        for j0 in 0..points {
            let b0 = b[0][j0];
            let b0n = b0.norm_sqr();
            for j1 in 0..points {
                let b1 = b[1][j1];
                let m01 = g01 * s[j1 + points - 1 - j0];
                let det = g00 * g11 - m01.norm_sqr();
                let objective = (g11 * b0n + g00 * b1.norm_sqr() - 2.0 * (b0.conj() * m01 * b1).re) / det;
                if objective > best.0 {
                    best = (objective, j0, j1);
                }
            }
        }
        mults += (6 * points * points) as u64;
        vec![freq(best.1), freq(best.2)]
    };
    Ok(EsEstimate {
        f_hat,
        multiplications: mults,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DfoMethod {
    Proposed,
    #[serde(rename = "es")]
    ExhaustiveSearch,
}

/// Nominal multiplication counts: `10 m n` for the phase-ratio estimator and
/// `m f_max (8 n + 6) / step` for exhaustive search.
pub fn multiplication_count(method: DfoMethod, m: usize, n: usize, f_max: f64, step: f64) -> f64 {
    let (m, n) = (m as f64, n as f64);
    match method {
        DfoMethod::Proposed => 10.0 * m * n,
        DfoMethod::ExhaustiveSearch => m * f_max * (8.0 * n + 6.0) / step,
    }
}
