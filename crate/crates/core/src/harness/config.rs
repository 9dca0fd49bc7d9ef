use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::ScenarioGeometry;
use crate::dfo::{DfoMethod, PairPolicy};
use crate::ofdm::{PilotPattern, ResourceGrid};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub fft_size: usize,
    pub cp_len: usize,
    pub subcarrier_spacing_hz: f64,
    pub resource_blocks: usize,
    pub symbols_per_frame: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            fft_size: 1024,
            cp_len: 72,
            subcarrier_spacing_hz: 15e3,
            resource_blocks: 50,
            symbols_per_frame: 14,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PilotConfig {
    pub symbols: Vec<usize>,
    /// Pilot subcarrier offsets inside every resource block.
    pub rb_offsets: Vec<usize>,
    pub seed: u64,
}

impl Default for PilotConfig {
    fn default() -> Self {
        Self {
            symbols: vec![0, 4, 7, 11],
            rb_offsets: vec![0, 6],
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TapConfig {
    /// One delay per RRH tap, in samples.
    pub delays_samples: Vec<usize>,
    pub rician_k_db: Vec<f64>,
    pub pathloss_exponent: f64,
}

impl Default for TapConfig {
    fn default() -> Self {
        Self {
            delays_samples: vec![0, 4],
            rician_k_db: vec![10.0, 10.0],
            pathloss_exponent: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    Linear,
    LmmseLegacy,
    ElmmseIdeal,
    ElmmseEstimated,
}

impl Estimator {
    pub const ALL: [Estimator; 4] = [
        Estimator::Linear,
        Estimator::LmmseLegacy,
        Estimator::ElmmseIdeal,
        Estimator::ElmmseEstimated,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Estimator::Linear => "linear",
            Estimator::LmmseLegacy => "lmmse-legacy",
            Estimator::ElmmseIdeal => "elmmse-ideal",
            Estimator::ElmmseEstimated => "elmmse-estimated",
        }
    }
}

impl std::str::FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Estimator::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown estimator '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimationConfig {
    pub estimators: Vec<Estimator>,
    pub window_rb: usize,
    /// Adds the model's expected ICI power to the Wiener noise ratio.
    pub ici_in_noise: bool,
    pub pair_policy: PairPolicy,
}

impl Default for EstimationConfig {
    fn default() -> Self {
        Self {
            estimators: Estimator::ALL.to_vec(),
            window_rb: 2,
            ici_in_noise: false,
            pair_policy: PairPolicy::Consecutive,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DfoConfig {
    pub method: DfoMethod,
    pub es_max_hz: f64,
    pub es_step_hz: f64,
}

impl Default for DfoConfig {
    fn default() -> Self {
        Self {
            method: DfoMethod::Proposed,
            es_max_hz: 900.0,
            es_step_hz: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PositionKeyword {
    /// Where tap 0 carries twice the power of tap 1.
    P3db,
    /// Evenly spaced points over `[0, Ds]`.
    Sweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PositionSpec {
    Meters(f64),
    Keyword(PositionKeyword),
}

impl std::str::FromStr for PositionSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "p3db" => Ok(PositionSpec::Keyword(PositionKeyword::P3db)),
            "sweep" => Ok(PositionSpec::Keyword(PositionKeyword::Sweep)),
            _ => s
                .parse::<f64>()
                .map(PositionSpec::Meters)
                .map_err(|_| Error::Config(format!("position '{s}' is not a number, 'p3db' or 'sweep'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub snr_db: Vec<f64>,
    pub position: PositionSpec,
    /// Number of positions for a position sweep.
    pub position_points: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            snr_db: vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0],
            position: PositionSpec::Keyword(PositionKeyword::P3db),
            position_points: 31,
        }
    }
}

/// Complete simulation configuration; every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub geometry: ScenarioGeometry,
    pub grid: GridConfig,
    pub pilots: PilotConfig,
    pub taps: TapConfig,
    pub estimation: EstimationConfig,
    pub dfo: DfoConfig,
    pub sweep: SweepConfig,
    /// Fill non-pilot resource elements with 16QAM data. Without data the
    /// pilot observations are generated free of inter-carrier interference.
    pub data_symbols: bool,
    pub drops: usize,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            geometry: ScenarioGeometry::default(),
            grid: GridConfig::default(),
            pilots: PilotConfig::default(),
            taps: TapConfig::default(),
            estimation: EstimationConfig::default(),
            dfo: DfoConfig::default(),
            sweep: SweepConfig::default(),
            data_symbols: true,
            drops: 100,
            seed: 1,
        }
    }
}

impl SimConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: SimConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn resource_grid(&self) -> Result<ResourceGrid> {
        let g = &self.grid;
        ResourceGrid::new(g.fft_size, g.cp_len, g.subcarrier_spacing_hz, g.resource_blocks, g.symbols_per_frame)
    }

    pub fn pilot_pattern(&self, grid: &ResourceGrid) -> Result<PilotPattern> {
        PilotPattern::per_resource_block(grid, &self.pilots.symbols, &self.pilots.rb_offsets, self.pilots.seed)
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        let grid = self.resource_grid()?;
        self.pilot_pattern(&grid)?;
        if self.drops == 0 {
            return Err(Error::Config("drops must be at least 1".into()));
        }
        if self.sweep.snr_db.is_empty() || self.sweep.snr_db.iter().any(|s| s.is_nan() || *s == f64::NEG_INFINITY) {
            return Err(Error::Config("snr list must be non-empty and contain no NaN or -inf".into()));
        }
        let t = &self.taps;
        if t.delays_samples.len() != self.geometry.rrh_count || t.rician_k_db.len() != t.delays_samples.len() {
            return Err(Error::Config(format!(
                "{} RRH taps need as many delays and K-factors",
                self.geometry.rrh_count
            )));
        }
        if self.geometry.rrh_count != 2 {
            return Err(Error::Config("the track geometry has exactly two serving RRHs".into()));
        }
        if t.delays_samples.iter().any(|&d| d >= self.grid.cp_len) {
            return Err(Error::Config("tap delays must fit inside the cyclic prefix".into()));
        }
        if self.estimation.estimators.is_empty() {
            return Err(Error::Config("no estimator selected".into()));
        }
        if self.estimation.window_rb == 0 {
            return Err(Error::Config("window_rb must be at least 1".into()));
        }
        if !(self.dfo.es_step_hz > 0.0) || !(self.dfo.es_max_hz > 0.0) {
            return Err(Error::Config("exhaustive-search range and step must be positive".into()));
        }
        match self.sweep.position {
            PositionSpec::Meters(x) if !(0.0..=self.geometry.inter_rrh_distance_m).contains(&x) => {
                return Err(Error::Config(format!("position {x} m outside the span")));
            }
            PositionSpec::Keyword(PositionKeyword::Sweep) if self.sweep.position_points < 2 => {
                return Err(Error::Config("a position sweep needs at least two points".into()));
            }
            _ => {}
        }
        Ok(())
    }
}
