//! CP-OFDM transmit/receive chain.

use std::ops::Range;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::numerics::{dft_in_place, idft_in_place, CMatrix};
use crate::{Error, Result};

pub const SUBCARRIERS_PER_RB: usize = 12;

/// OFDM numerology and the block of used subcarriers.
///
/// The used block is contiguous in FFT-bin index and centred in `[0, N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResourceGrid {
    pub fft_size: usize,
    pub cp_len: usize,
    pub subcarrier_spacing_hz: f64,
    pub first_used: usize,
    pub used_count: usize,
    pub symbols_per_frame: usize,
}

impl ResourceGrid {
    pub fn new(
        fft_size: usize,
        cp_len: usize,
        subcarrier_spacing_hz: f64,
        resource_blocks: usize,
        symbols_per_frame: usize,
    ) -> Result<Self> {
        let used_count = resource_blocks * SUBCARRIERS_PER_RB;
        let invalid = |msg: String| Err(Error::InvalidParameter(msg));
        if !fft_size.is_power_of_two() {
            return invalid(format!("FFT size {fft_size} is not a power of two"));
        }
        if cp_len == 0 || cp_len >= fft_size {
            return invalid(format!("cyclic prefix {cp_len} must lie in (0, {fft_size})"));
        }
        if !(subcarrier_spacing_hz > 0.0) {
            return invalid(format!("subcarrier spacing {subcarrier_spacing_hz} must be positive"));
        }
        if used_count == 0 || used_count > fft_size {
            return invalid(format!("{resource_blocks} resource blocks do not fit {fft_size} bins"));
        }
        if symbols_per_frame == 0 {
            return invalid("a frame needs at least one symbol".into());
        }
        Ok(Self {
            fft_size,
            cp_len,
            subcarrier_spacing_hz,
            first_used: (fft_size - used_count) / 2,
            used_count,
            symbols_per_frame,
        })
    }

    /// 10 MHz LTE-like numerology: 1024-point FFT, uniform 72-sample CP,
    /// 15 kHz spacing, 50 RBs, 14 symbols per frame.
    pub fn lte_10mhz() -> Self {
        Self::new(1024, 72, 15e3, 50, 14).expect("reference numerology is valid")
    }

    pub fn used_subcarriers(&self) -> Range<usize> {
        self.first_used..self.first_used + self.used_count
    }

    pub fn resource_blocks(&self) -> usize {
        self.used_count / SUBCARRIERS_PER_RB
    }

    pub fn sample_period(&self) -> f64 {
        1.0 / (self.fft_size as f64 * self.subcarrier_spacing_hz)
    }

    pub fn samples_per_symbol(&self) -> usize {
        self.fft_size + self.cp_len
    }

    /// OFDM symbol duration including the CP.
    pub fn symbol_duration(&self) -> f64 {
        self.samples_per_symbol() as f64 * self.sample_period()
    }

    pub fn frame_samples(&self) -> usize {
        self.samples_per_symbol() * self.symbols_per_frame
    }
}

/// Pilot lattice: the same pilot subcarriers on every pilot symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotPattern {
    /// Pilot-bearing OFDM symbols `l_1 < ... < l_n`.
    pub symbols: Vec<usize>,
    /// Pilot subcarriers `k_1 < ... < k_m` (FFT-bin indices).
    pub subcarriers: Vec<usize>,
    /// Known pilot values, `m x n`.
    pub values: CMatrix,
}

impl PilotPattern {
    pub fn new(symbols: Vec<usize>, subcarriers: Vec<usize>, values: CMatrix, grid: &ResourceGrid) -> Result<Self> {
        let strictly_increasing = |v: &[usize]| v.windows(2).all(|w| w[0] < w[1]);
        if symbols.len() < 2 {
            return Err(Error::InvalidParameter("at least two pilot symbols are required".into()));
        }
        if subcarriers.is_empty() {
            return Err(Error::InvalidParameter("no pilot subcarriers".into()));
        }
        if !strictly_increasing(&symbols) || !strictly_increasing(&subcarriers) {
            return Err(Error::InvalidParameter("pilot indices must be strictly increasing".into()));
        }
        if symbols.iter().any(|&l| l >= grid.symbols_per_frame) {
            return Err(Error::InvalidParameter("pilot symbol outside the frame".into()));
        }
        let used = grid.used_subcarriers();
        if subcarriers.iter().any(|k| !used.contains(k)) {
            return Err(Error::InvalidParameter("pilot subcarrier outside the used band".into()));
        }
        if values.rows() != subcarriers.len() || values.cols() != symbols.len() {
            return Err(Error::Dimension(format!(
                "pilot values are {}x{}, pattern is {}x{}",
                values.rows(),
                values.cols(),
                subcarriers.len(),
                symbols.len()
            )));
        }
        Ok(Self {
            symbols,
            subcarriers,
            values,
        })
    }

    /// Pilots at the given offsets inside every resource block, on the given
    /// symbols, with unit-modulus QPSK values drawn from `seed`.
    pub fn per_resource_block(grid: &ResourceGrid, symbols: &[usize], rb_offsets: &[usize], seed: u64) -> Result<Self> {
        if rb_offsets.iter().any(|&o| o >= SUBCARRIERS_PER_RB) {
            return Err(Error::InvalidParameter("pilot offset outside a resource block".into()));
        }
        let mut offsets = rb_offsets.to_vec();
        offsets.sort_unstable();
        offsets.dedup();
        let subcarriers: Vec<usize> = (0..grid.resource_blocks())
            .flat_map(|rb| offsets.iter().map(move |o| grid.first_used + rb * SUBCARRIERS_PER_RB + o))
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let values = CMatrix::from_fn(subcarriers.len(), symbols.len(), |_, _| {
            let b: u8 = rng.random_range(0..4);
            Complex64::new(if b & 1 == 0 { s } else { -s }, if b & 2 == 0 { s } else { -s })
        });
        Self::new(symbols.to_vec(), subcarriers, values, grid)
    }

    /// LTE-like default: symbols 0, 4, 7, 11 and two pilots (offsets 0 and 6)
    /// per resource block, i.e. `m n = 8` per RB.
    pub fn lte_like(grid: &ResourceGrid, seed: u64) -> Result<Self> {
        Self::per_resource_block(grid, &[0, 4, 7, 11], &[0, 6], seed)
    }

    pub fn m(&self) -> usize {
        self.subcarriers.len()
    }

    pub fn n(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_pilot(&self, k: usize, l: usize) -> bool {
        self.symbols.binary_search(&l).is_ok() && self.subcarriers.binary_search(&k).is_ok()
    }

    /// Used resource elements that carry data, symbol-major.
    pub fn data_positions(&self, grid: &ResourceGrid) -> Vec<(usize, usize)> {
        (0..grid.symbols_per_frame)
            .flat_map(|l| grid.used_subcarriers().map(move |k| (k, l)))
            .filter(|&(k, l)| !self.is_pilot(k, l))
            .collect()
    }
}

const QAM16_SCALE: f64 = 0.316_227_766_016_837_94; // 1/sqrt(10)

fn qam16_level(sign_bit: u8, magnitude_bit: u8) -> f64 {
    let m = if magnitude_bit == 0 { 1.0 } else { 3.0 };
    if sign_bit == 0 {
        m
    } else {
        -m
    }
}

/// Gray-mapped 16QAM with unit average energy. Bits `b0 b1` select the
/// in-phase level and `b2 b3` the quadrature level; per axis the first bit is
/// the sign (0 positive) and the second the magnitude (0 inner, 1 outer), so
/// `0000` maps to `(1 + j)/sqrt(10)`.
pub fn qam16_map(bits: &[u8]) -> Result<Vec<Complex64>> {
    if bits.len() % 4 != 0 {
        return Err(Error::InvalidParameter(format!("{} bits is not a whole number of nibbles", bits.len())));
    }
    Ok(bits
        .chunks_exact(4)
        .map(|b| Complex64::new(qam16_level(b[0], b[1]), qam16_level(b[2], b[3])) * QAM16_SCALE)
        .collect())
}

/// Hard-decision (nearest point) demapping.
pub fn qam16_demap(symbols: &[Complex64]) -> Vec<u8> {
    let axis = |v: f64| -> [u8; 2] {
        let v = v / QAM16_SCALE;
        [u8::from(v < 0.0), u8::from(v.abs() > 2.0)]
    };
    symbols
        .iter()
        .flat_map(|s| {
            let [b0, b1] = axis(s.re);
            let [b2, b3] = axis(s.im);
            [b0, b1, b2, b3]
        })
        .collect()
}

/// Transmit frame: a full FFT-length frequency vector per OFDM symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    /// `tx_grid[l][k]`.
    pub tx_grid: Vec<Vec<Complex64>>,
    pub payload_bits: Vec<u8>,
}

impl Frame {
    /// Frame with pilots in place and every data resource element empty.
    pub fn pilots_only(grid: &ResourceGrid, pilots: &PilotPattern) -> Self {
        let mut tx_grid = vec![vec![Complex64::new(0.0, 0.0); grid.fft_size]; grid.symbols_per_frame];
        for (j, &l) in pilots.symbols.iter().enumerate() {
            for (i, &k) in pilots.subcarriers.iter().enumerate() {
                tx_grid[l][k] = pilots.values[(i, j)];
            }
        }
        Self {
            tx_grid,
            payload_bits: Vec::new(),
        }
    }

    /// Frame carrying `bits` as 16QAM on the data resource elements.
    pub fn with_payload(grid: &ResourceGrid, pilots: &PilotPattern, bits: Vec<u8>) -> Result<Self> {
        let positions = pilots.data_positions(grid);
        if bits.len() != 4 * positions.len() {
            return Err(Error::Dimension(format!(
                "{} payload bits for {} data resource elements",
                bits.len(),
                positions.len()
            )));
        }
        let mut frame = Self::pilots_only(grid, pilots);
        for (&(k, l), s) in positions.iter().zip(qam16_map(&bits)?) {
            frame.tx_grid[l][k] = s;
        }
        frame.payload_bits = bits;
        Ok(frame)
    }

    pub fn with_random_payload<R: Rng + ?Sized>(grid: &ResourceGrid, pilots: &PilotPattern, rng: &mut R) -> Result<Self> {
        let count = 4 * pilots.data_positions(grid).len();
        let bits = (0..count).map(|_| rng.random_range(0..2u8)).collect();
        Self::with_payload(grid, pilots, bits)
    }
}

/// Per symbol: `1/N`-scaled IDFT, then the last `Ncp` samples prepended.
pub fn modulate(tx_grid: &[Vec<Complex64>], grid: &ResourceGrid) -> Result<Vec<Complex64>> {
    let n = grid.fft_size;
    let mut out = Vec::with_capacity(tx_grid.len() * grid.samples_per_symbol());
    for symbol in tx_grid {
        if symbol.len() != n {
            return Err(Error::Dimension(format!("symbol has {} bins, expected {n}", symbol.len())));
        }
        let mut body = symbol.clone();
        idft_in_place(&mut body);
        out.extend_from_slice(&body[n - grid.cp_len..]);
        out.extend_from_slice(&body);
    }
    Ok(out)
}

/// Strips each CP and applies the forward DFT; returns `rx_grid[l][k]`.
pub fn demodulate(samples: &[Complex64], grid: &ResourceGrid) -> Result<Vec<Vec<Complex64>>> {
    let step = grid.samples_per_symbol();
    if samples.len() % step != 0 {
        return Err(Error::Dimension(format!(
            "{} samples is not a whole number of {step}-sample symbols",
            samples.len()
        )));
    }
    Ok(samples
        .chunks_exact(step)
        .map(|chunk| {
            let mut body = chunk[grid.cp_len..].to_vec();
            dft_in_place(&mut body);
            body
        })
        .collect())
}

/// Time-domain noise variance per complex sample for a target SNR.
pub fn noise_variance(snr_db: f64, signal_power_ref: f64) -> f64 {
    if snr_db == f64::INFINITY {
        0.0
    } else {
        signal_power_ref * 10f64.powf(-snr_db / 10.0)
    }
}

/// Adds circular complex Gaussian noise of variance
/// `signal_power_ref * 10^(-snr/10)` per sample.
///
/// For a unit-energy subcarrier grid modulated by [`modulate`] and recovered
/// by [`demodulate`], pass `signal_power_ref = 1/N` to hit `snr_db` on the
/// demodulated subcarriers. `snr_db = +inf` leaves the samples untouched.
pub fn add_awgn<R: Rng + ?Sized>(samples: &mut [Complex64], snr_db: f64, signal_power_ref: f64, rng: &mut R) -> Result<()> {
    if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
        return Err(Error::InvalidParameter(format!("SNR {snr_db} dB")));
    }
    let var = noise_variance(snr_db, signal_power_ref);
    if var == 0.0 {
        return Ok(());
    }
    let sigma = (0.5 * var).sqrt();
    for s in samples.iter_mut() {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        *s += Complex64::new(re, im) * sigma;
    }
    Ok(())
}

/// Least-squares channel observations at the pilots, `m x n`; column `i`
/// holds every pilot subcarrier of pilot symbol `l_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotObservations {
    pub h: CMatrix,
}

pub fn ls_estimate(rx_grid: &[Vec<Complex64>], pilots: &PilotPattern) -> Result<PilotObservations> {
    let mut h = CMatrix::zeros(pilots.m(), pilots.n());
    for (j, &l) in pilots.symbols.iter().enumerate() {
        let symbol = rx_grid
            .get(l)
            .ok_or_else(|| Error::Dimension(format!("received grid has no symbol {l}")))?;
        for (i, &k) in pilots.subcarriers.iter().enumerate() {
            let x = pilots.values[(i, j)];
            if x == Complex64::new(0.0, 0.0) {
                return Err(Error::InvalidParameter(format!("zero pilot at ({k}, {l})")));
            }
            let y = *symbol
                .get(k)
                .ok_or_else(|| Error::Dimension(format!("received symbol has no bin {k}")))?;
            h[(i, j)] = y / x;
        }
    }
    Ok(PilotObservations { h })
}
