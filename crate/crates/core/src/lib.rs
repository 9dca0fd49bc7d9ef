//! Link-level OFDM simulation and channel estimation for the two-tap
//! high-speed-railway (HSR) channel.
//!
//! The crate is organised bottom-up:
//!
//! - [`numerics`]: Dirichlet kernel, Bessel J0, DFT/FFT and small dense
//!   complex linear algebra.
//! - [`channel`]: track geometry, per-tap Doppler and power, Rician tap gains,
//!   time-domain channel application and the analytic fading/ICI split.
//! - [`ofdm`]: resource grid, pilot lattice, 16QAM, CP-OFDM modulation, AWGN
//!   and least-squares pilot observations.
//! - [`dfo`]: per-tap Doppler estimation by delay-basis tap separation and
//!   phase ratios, plus the exhaustive-search baseline.
//! - [`chanest`]: correlation models, Wiener filters, LMMSE smoothing and the
//!   linear-interpolation baseline.
//! - [`harness`]: configuration, Monte Carlo drops, sweeps and CSV output.

pub mod chanest;
pub mod channel;
pub mod dfo;
mod error;
pub mod harness;
pub mod numerics;
pub mod ofdm;

pub use error::{Error, Result};
pub use num_complex::Complex64;
