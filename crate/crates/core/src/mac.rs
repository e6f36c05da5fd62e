//! Network configuration, the two per-(station, link) decision variables and
//! the mapping from an agent's raw action onto them.
//!
//! A traffic-allocation policy `beta` gives, for every station, the probability
//! that a packet is handed to each link; every row must sum to one. The initial
//! contention window matrix gives the window each station starts from on each
//! link; every entry must stay inside `[w_min, w_max]`.

use crate::matrix::Matrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on the row sums of a traffic-allocation policy.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

/// Upper bound of the raw contention-window action component.
pub const W_RAW_MAX: f64 = 6.0;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("{0} must be at least 1")]
    ZeroCount(&'static str),
    #[error("timing parameter {name} must be strictly positive, got {value}")]
    NonPositiveTiming { name: &'static str, value: f64 },
    #[error("AIFS ({aifs_us} us) is shorter than SIFS ({sifs_us} us)")]
    AifsBelowSifs { aifs_us: f64, sifs_us: f64 },
    #[error("contention window bounds invalid: w_min={w_min}, w_max={w_max}")]
    WindowBounds { w_min: u32, w_max: u32 },
    #[error("w_max/w_min = {w_max}/{w_min} is not a power of two")]
    WindowRatio { w_min: u32, w_max: u32 },
    #[error("station {sta} at ({x}, {y}) lies outside the {area_m} m square")]
    PositionOutside { sta: usize, x: f64, y: f64, area_m: f64 },
    #[error("AP position ({x}, {y}) lies outside the {area_m} m square")]
    ApOutside { x: f64, y: f64, area_m: f64 },
    #[error("expected {expected} station positions, got {found}")]
    PositionCount { expected: usize, found: usize },
    #[error("rate table for {band} GHz is empty or not strictly increasing")]
    RateTable { band: Band },
    #[error("SNR thresholds for {band} GHz must be non-decreasing with one entry per rate")]
    Thresholds { band: Band },
    #[error("{0} must be finite and positive")]
    NonPositive(&'static str),
    #[error("failed to read config: {0}")]
    Io(String),
    #[error("failed to parse config: {0}")]
    Parse(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error("policy shape {found:?} does not match the network ({expected:?})")]
    Shape {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("row {row}: entry {col} is not a number")]
    NotANumber { row: usize, col: usize },
    #[error("row {row}: entry {col} is negative")]
    Negative { row: usize, col: usize },
    #[error("row {row}: entry {col} exceeds one")]
    AboveOne { row: usize, col: usize },
    #[error("row {row} sums to {sum}, not 1")]
    RowSum { row: usize, sum: f64 },
    #[error("window {value} at ({row}, {col}) outside [{w_min}, {w_max}]")]
    WindowRange {
        row: usize,
        col: usize,
        value: u32,
        w_min: u32,
        w_max: u32,
    },
}

impl PolicyError {
    /// The station (row) responsible for the violation, if any.
    pub fn row(&self) -> Option<usize> {
        match *self {
            PolicyError::Shape { .. } => None,
            PolicyError::NotANumber { row, .. }
            | PolicyError::Negative { row, .. }
            | PolicyError::AboveOne { row, .. }
            | PolicyError::RowSum { row, .. }
            | PolicyError::WindowRange { row, .. } => Some(row),
        }
    }
}

/// MAC/PHY timing. Durations in microseconds, sizes in bits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MacTiming {
    pub slot_us: f64,
    pub sifs_us: f64,
    pub aifs_us: f64,
    pub ack_bits: f64,
    pub phy_header_us: f64,
    /// Mean payload per packet.
    pub payload_bits: f64,
}

impl Default for MacTiming {
    fn default() -> Self {
        Self {
            slot_us: 9.0,
            sifs_us: 16.0,
            aifs_us: 34.0,
            ack_bits: 304.0,
            phy_header_us: 40.0,
            payload_bits: 12000.0,
        }
    }
}

impl MacTiming {
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, value) in [
            ("slot_us", self.slot_us),
            ("sifs_us", self.sifs_us),
            ("aifs_us", self.aifs_us),
            ("ack_bits", self.ack_bits),
            ("phy_header_us", self.phy_header_us),
            ("payload_bits", self.payload_bits),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(ConfigError::NonPositiveTiming { name, value });
            }
        }
        if self.aifs_us < self.sifs_us {
            return Err(ConfigError::AifsBelowSifs {
                aifs_us: self.aifs_us,
                sifs_us: self.sifs_us,
            });
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Band {
    #[serde(rename = "2.4")]
    Ghz2_4,
    #[serde(rename = "5")]
    Ghz5,
}

impl Band {
    pub fn carrier_ghz(self) -> f64 {
        match self {
            Band::Ghz2_4 => 2.4,
            Band::Ghz5 => 5.0,
        }
    }
}

impl std::fmt::Display for Band {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.carrier_ghz())
    }
}

/// Rate table, SNR thresholds and noise floor of one frequency band.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandProfile {
    /// Strictly increasing data rates in Mbps.
    pub rates_mbps: Vec<f64>,
    /// Minimum SNR (dB) for each rate; below the first the lowest rate is used.
    pub snr_thresholds_db: Vec<f64>,
    pub noise_floor_dbm: f64,
}

impl BandProfile {
    pub fn default_for(band: Band) -> Self {
        match band {
            Band::Ghz2_4 => Self {
                rates_mbps: vec![20.0, 50.0, 100.0, 150.0],
                snr_thresholds_db: vec![5.0, 10.0, 20.0, 30.0],
                noise_floor_dbm: -85.0,
            },
            Band::Ghz5 => Self {
                rates_mbps: vec![50.0, 100.0, 200.0, 400.0],
                snr_thresholds_db: vec![5.0, 10.0, 20.0, 30.0],
                noise_floor_dbm: -95.0,
            },
        }
    }

    fn validate(&self, band: Band) -> Result<(), ConfigError> {
        let rates_ok = !self.rates_mbps.is_empty()
            && self.rates_mbps.iter().all(|r| r.is_finite() && *r > 0.0)
            && self.rates_mbps.windows(2).all(|w| w[0] < w[1]);
        if !rates_ok {
            return Err(ConfigError::RateTable { band });
        }
        let thr_ok = self.snr_thresholds_db.len() == self.rates_mbps.len()
            && self.snr_thresholds_db.iter().all(|t| t.is_finite())
            && self.snr_thresholds_db.windows(2).all(|w| w[0] <= w[1]);
        if !thr_ok {
            return Err(ConfigError::Thresholds { band });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSpec {
    pub band: Band,
    pub bandwidth_mhz: f64,
}

/// Small-scale fading model applied by the channel.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fading {
    #[default]
    Rayleigh,
    /// `h = 1`: the SNR equals the deterministic link budget.
    None,
}

/// How the allocation probability `beta` acts inside the simulator.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TxMode {
    /// A station whose counter expires on a link transmits with probability
    /// `beta`, otherwise it redraws a counter in its current stage.
    #[default]
    Gated,
    /// Each packet is assigned to a link by a `beta`-weighted draw and queued there.
    QueueDraw,
}

/// The immutable experiment definition.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NetworkConfig {
    pub num_stas: usize,
    pub links: Vec<LinkSpec>,
    pub band_2g4: BandProfile,
    pub band_5g: BandProfile,
    pub tx_power_dbm: f64,
    pub area_m: f64,
    pub sta_positions: Vec<[f64; 2]>,
    pub ap_position: [f64; 2],
    pub timing: MacTiming,
    pub w_min: u32,
    pub w_max: u32,
    pub seed: u64,
    /// Decision steps per episode.
    pub decision_steps: usize,
    pub step_duration_us: u64,
    pub fading: Fading,
    pub tx_mode: TxMode,
}

impl NetworkConfig {
    pub fn num_links(&self) -> usize {
        self.links.len()
    }

    pub fn band_profile(&self, band: Band) -> &BandProfile {
        match band {
            Band::Ghz2_4 => &self.band_2g4,
            Band::Ghz5 => &self.band_5g,
        }
    }

    pub fn link_profile(&self, link: usize) -> &BandProfile {
        self.band_profile(self.links[link].band)
    }

    pub fn max_backoff_stage(&self, w0: u32) -> u32 {
        max_backoff_stage(w0, self.w_max)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.num_stas == 0 {
            return Err(ConfigError::ZeroCount("num_stas"));
        }
        if self.links.is_empty() {
            return Err(ConfigError::ZeroCount("num_links"));
        }
        if self.decision_steps == 0 {
            return Err(ConfigError::ZeroCount("decision_steps"));
        }
        if self.step_duration_us == 0 {
            return Err(ConfigError::ZeroCount("step_duration_us"));
        }
        self.timing.validate()?;
        if self.w_min == 0 || self.w_max < self.w_min {
            return Err(ConfigError::WindowBounds {
                w_min: self.w_min,
                w_max: self.w_max,
            });
        }
        if !self.w_max.is_multiple_of(self.w_min) || !(self.w_max / self.w_min).is_power_of_two() {
            return Err(ConfigError::WindowRatio {
                w_min: self.w_min,
                w_max: self.w_max,
            });
        }
        if !(self.area_m.is_finite() && self.area_m > 0.0) {
            return Err(ConfigError::NonPositive("area_m"));
        }
        if !self.tx_power_dbm.is_finite() {
            return Err(ConfigError::NonPositive("tx_power_dbm"));
        }
        for link in &self.links {
            if !(link.bandwidth_mhz.is_finite() && link.bandwidth_mhz > 0.0) {
                return Err(ConfigError::NonPositive("bandwidth_mhz"));
            }
        }
        self.band_2g4.validate(Band::Ghz2_4)?;
        self.band_5g.validate(Band::Ghz5)?;
        if self.sta_positions.len() != self.num_stas {
            return Err(ConfigError::PositionCount {
                expected: self.num_stas,
                found: self.sta_positions.len(),
            });
        }
        let inside = |p: [f64; 2]| {
            p.iter()
                .all(|c| c.is_finite() && *c >= 0.0 && *c <= self.area_m)
        };
        for (sta, &p) in self.sta_positions.iter().enumerate() {
            if !inside(p) {
                return Err(ConfigError::PositionOutside {
                    sta,
                    x: p[0],
                    y: p[1],
                    area_m: self.area_m,
                });
            }
        }
        if !inside(self.ap_position) {
            return Err(ConfigError::ApOutside {
                x: self.ap_position[0],
                y: self.ap_position[1],
                area_m: self.area_m,
            });
        }
        Ok(())
    }
}

/// Largest backoff stage `M` such that `2^M * w0 <= w_max`.
pub fn max_backoff_stage(w0: u32, w_max: u32) -> u32 {
    debug_assert!(w0 >= 1 && w0 <= w_max);
    let mut stage = 0;
    while (u64::from(w0) << (stage + 1)) <= u64::from(w_max) {
        stage += 1;
    }
    stage
}

/// Checks the allocation constraint: entries in `[0, 1]`, rows summing to one.
pub fn validate_policy(beta: &Matrix<f64>) -> Result<(), PolicyError> {
    for (row, values) in beta.iter_rows().enumerate() {
        for (col, &v) in values.iter().enumerate() {
            if v.is_nan() {
                return Err(PolicyError::NotANumber { row, col });
            }
            if v < 0.0 {
                return Err(PolicyError::Negative { row, col });
            }
            if v > 1.0 {
                return Err(PolicyError::AboveOne { row, col });
            }
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
            return Err(PolicyError::RowSum { row, sum });
        }
    }
    Ok(())
}

/// A validated N x L traffic-allocation policy.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyMatrix(Matrix<f64>);

impl PolicyMatrix {
    pub fn new(beta: Matrix<f64>) -> Result<Self, PolicyError> {
        validate_policy(&beta)?;
        Ok(Self(beta))
    }

    /// Validates and additionally checks the shape against `cfg`.
    pub fn for_config(beta: Matrix<f64>, cfg: &NetworkConfig) -> Result<Self, PolicyError> {
        check_shape(beta.shape(), cfg)?;
        Self::new(beta)
    }

    pub fn uniform(num_stas: usize, num_links: usize) -> Self {
        Self(Matrix::filled(num_stas, num_links, 1.0 / num_links as f64))
    }

    /// Every station uses the same row.
    pub fn symmetric(num_stas: usize, row: &[f64]) -> Result<Self, PolicyError> {
        Self::new(Matrix::from_fn(num_stas, row.len(), |_, c| row[c]))
    }

    pub fn get(&self, sta: usize, link: usize) -> f64 {
        self.0[(sta, link)]
    }

    pub fn matrix(&self) -> &Matrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> Matrix<f64> {
        self.0
    }
}

/// A validated N x L matrix of initial contention windows (slots).
#[derive(Clone, Debug, PartialEq)]
pub struct IcwMatrix(Matrix<u32>);

impl IcwMatrix {
    pub fn new(w0: Matrix<u32>, w_min: u32, w_max: u32) -> Result<Self, PolicyError> {
        for (row, values) in w0.iter_rows().enumerate() {
            for (col, &value) in values.iter().enumerate() {
                if value < w_min || value > w_max {
                    return Err(PolicyError::WindowRange {
                        row,
                        col,
                        value,
                        w_min,
                        w_max,
                    });
                }
            }
        }
        Ok(Self(w0))
    }

    pub fn for_config(w0: Matrix<u32>, cfg: &NetworkConfig) -> Result<Self, PolicyError> {
        check_shape(w0.shape(), cfg)?;
        Self::new(w0, cfg.w_min, cfg.w_max)
    }

    pub fn constant(cfg: &NetworkConfig, w0: u32) -> Result<Self, PolicyError> {
        Self::for_config(Matrix::filled(cfg.num_stas, cfg.num_links(), w0), cfg)
    }

    pub fn get(&self, sta: usize, link: usize) -> u32 {
        self.0[(sta, link)]
    }

    pub fn matrix(&self) -> &Matrix<u32> {
        &self.0
    }
}

fn check_shape(found: (usize, usize), cfg: &NetworkConfig) -> Result<(), PolicyError> {
    let expected = (cfg.num_stas, cfg.num_links());
    if found != expected {
        return Err(PolicyError::Shape { expected, found });
    }
    Ok(())
}

/// Unconstrained action as emitted by an agent: `2NL` reals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawAction {
    pub beta_raw: Matrix<f64>,
    /// Contention-window exponents, nominally in `[0, 6]`.
    pub w_raw: Matrix<f64>,
}

impl RawAction {
    /// The action that maps to the uniform policy with `w0 = 16`.
    pub fn uniform(num_stas: usize, num_links: usize) -> Self {
        Self {
            beta_raw: Matrix::filled(num_stas, num_links, 1.0),
            w_raw: Matrix::filled(num_stas, num_links, 0.0),
        }
    }
}

/// Result of [`map_raw_action`]; `degenerate_rows` lists stations whose raw
/// allocation clipped to all zeros and fell back to the uniform row.
#[derive(Clone, Debug, PartialEq)]
pub struct MappedAction {
    pub policy: PolicyMatrix,
    pub icw: IcwMatrix,
    pub degenerate_rows: Vec<usize>,
}

/// Maps a raw action onto a policy satisfying both constraints.
///
/// Allocation entries are clipped to `[0, 1]` and row-normalised. Window
/// exponents are clipped to `[0, 6]` and mapped to `floor(2^(x + 4))`, then
/// clipped to `[w_min, w_max]`. Non-finite entries are rejected.
pub fn map_raw_action(raw: &RawAction, cfg: &NetworkConfig) -> Result<MappedAction, PolicyError> {
    for m in [&raw.beta_raw, &raw.w_raw] {
        check_shape(m.shape(), cfg)?;
        if !m.is_consistent() {
            return Err(PolicyError::Shape {
                expected: (cfg.num_stas, cfg.num_links()),
                found: m.shape(),
            });
        }
    }
    for (m, _) in [(&raw.beta_raw, 0), (&raw.w_raw, 1)] {
        for (row, values) in m.iter_rows().enumerate() {
            if let Some(col) = values.iter().position(|v| !v.is_finite()) {
                return Err(PolicyError::NotANumber { row, col });
            }
        }
    }

    let num_links = cfg.num_links();
    let mut beta = raw.beta_raw.map(|v| v.clamp(0.0, 1.0));
    let mut degenerate_rows = Vec::new();
    for row in 0..beta.rows() {
        let values = beta.row_mut(row);
        let sum: f64 = values.iter().sum();
        if sum > 0.0 {
            values.iter_mut().for_each(|v| *v /= sum);
        } else {
            degenerate_rows.push(row);
            values.iter_mut().for_each(|v| *v = 1.0 / num_links as f64);
        }
    }

    let w0 = raw
        .w_raw
        .map(|&x| window_from_exponent(x).clamp(cfg.w_min, cfg.w_max));

    Ok(MappedAction {
        policy: PolicyMatrix::new(beta)?,
        icw: IcwMatrix::new(w0, cfg.w_min, cfg.w_max)?,
        degenerate_rows,
    })
}

/// `floor(2^(x + 4))` with `x` clipped to `[0, 6]`.
pub fn window_from_exponent(x: f64) -> u32 {
    (x.clamp(0.0, W_RAW_MAX) + 4.0).exp2().floor() as u32
}
