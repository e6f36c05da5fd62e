//! TOML experiment files.
//!
//! Every key is optional; omitted keys take the defaults listed in
//! `configs/default.toml`. Station positions, when not given, are drawn
//! uniformly over the area from the file's `seed`.

use crate::baselines::BaselineSpec;
use crate::mac::{
    Band, BandProfile, ConfigError, Fading, LinkSpec, MacTiming, NetworkConfig, TxMode,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use sha2::{Digest, Sha256};
use std::path::Path;

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub num_stas: usize,
    pub links: Vec<LinkSpec>,
    pub band_2g4: BandProfile,
    pub band_5g: BandProfile,
    pub tx_power_dbm: f64,
    pub area_m: f64,
    pub sta_positions: Option<Vec<[f64; 2]>>,
    /// Defaults to the centre of the area.
    pub ap_position: Option<[f64; 2]>,
    pub timing: MacTiming,
    pub w_min: u32,
    pub w_max: u32,
    pub seed: u64,
    pub decision_steps: usize,
    pub step_duration_us: u64,
    pub fading: Fading,
    pub tx_mode: TxMode,
    /// Baselines run by `evaluate`, in order.
    pub baselines: Vec<BaselineSpec>,
}

impl Default for ConfigFile {
    fn default() -> Self {
        Self {
            num_stas: 10,
            links: vec![
                LinkSpec {
                    band: Band::Ghz2_4,
                    bandwidth_mhz: 20.0,
                },
                LinkSpec {
                    band: Band::Ghz5,
                    bandwidth_mhz: 40.0,
                },
            ],
            band_2g4: BandProfile::default_for(Band::Ghz2_4),
            band_5g: BandProfile::default_for(Band::Ghz5),
            tx_power_dbm: 20.0,
            area_m: 20.0,
            sta_positions: None,
            ap_position: None,
            timing: MacTiming::default(),
            w_min: 16,
            w_max: 1024,
            seed: 1,
            decision_steps: 50,
            step_duration_us: 20_000,
            fading: Fading::Rayleigh,
            tx_mode: TxMode::Gated,
            baselines: Vec::new(),
        }
    }
}

impl ConfigFile {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Default file with `num_stas` stations and `num_links` links
    /// alternating 2.4 GHz / 5 GHz.
    pub fn with_size(num_stas: usize, num_links: usize) -> Self {
        let defaults = Self::default();
        Self {
            num_stas,
            links: (0..num_links)
                .map(|l| defaults.links[l % 2].clone())
                .collect(),
            ..defaults
        }
    }

    pub fn resolve(&self) -> Result<NetworkConfig, ConfigError> {
        let sta_positions = match &self.sta_positions {
            Some(p) => p.clone(),
            None => random_positions(self.num_stas, self.area_m, self.seed),
        };
        let cfg = NetworkConfig {
            num_stas: self.num_stas,
            links: self.links.clone(),
            band_2g4: self.band_2g4.clone(),
            band_5g: self.band_5g.clone(),
            tx_power_dbm: self.tx_power_dbm,
            area_m: self.area_m,
            sta_positions,
            ap_position: self
                .ap_position
                .unwrap_or([self.area_m / 2.0, self.area_m / 2.0]),
            timing: self.timing.clone(),
            w_min: self.w_min,
            w_max: self.w_max,
            seed: self.seed,
            decision_steps: self.decision_steps,
            step_duration_us: self.step_duration_us,
            fading: self.fading,
            tx_mode: self.tx_mode,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Station positions drawn uniformly over the square. The first `k`
/// positions do not depend on `num_stas`, so sweeps over N share a prefix.
pub fn random_positions(num_stas: usize, area_m: f64, seed: u64) -> Vec<[f64; 2]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..num_stas)
        .map(|_| {
            [
                rng.random::<f64>() * area_m,
                rng.random::<f64>() * area_m,
            ]
        })
        .collect()
}

/// Short content hash of a resolved configuration, carried on every CSV row.
pub fn config_hash(cfg: &NetworkConfig) -> String {
    let canonical = serde_json::to_vec(cfg).expect("config serializes");
    let digest = Sha256::digest(&canonical);
    hex::encode(&digest[..8])
}
