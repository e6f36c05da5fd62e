//! Free-space path loss with block Rayleigh fading, and SNR-to-rate selection.

use crate::mac::{BandProfile, Fading, NetworkConfig};
use crate::matrix::Matrix;
use rand::Rng;
use rand_distr::Exp1;
use thiserror::Error;

/// Speed of light used by the path-loss model, m/s.
const LIGHT_SPEED: f64 = 3e8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("station {sta} is {distance_m} m from the AP; path loss needs a positive distance")]
    Distance { sta: usize, distance_m: f64 },
    #[error("carrier frequency must be positive, got {0} GHz")]
    Frequency(f64),
}

/// One block-fading realization: SNR and the rate chosen from it.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelRealization {
    pub snr_db: Matrix<f64>,
    pub rate_mbps: Matrix<f64>,
}

impl ChannelRealization {
    /// Every station uses `rate_mbps` on every link; SNR is reported as 0 dB.
    pub fn fixed_rate(num_stas: usize, num_links: usize, rate_mbps: f64) -> Self {
        Self {
            snr_db: Matrix::filled(num_stas, num_links, 0.0),
            rate_mbps: Matrix::filled(num_stas, num_links, rate_mbps),
        }
    }
}

/// Large-scale gain `(c / (4 pi fc d))^2`, `fc` in GHz and `d` in metres.
pub fn path_loss_linear(fc_ghz: f64, distance_m: f64) -> Result<f64, ChannelError> {
    if fc_ghz.is_nan() || fc_ghz <= 0.0 {
        return Err(ChannelError::Frequency(fc_ghz));
    }
    if distance_m.is_nan() || distance_m <= 0.0 {
        return Err(ChannelError::Distance {
            sta: 0,
            distance_m,
        });
    }
    let amplitude = LIGHT_SPEED / (4.0 * std::f64::consts::PI * fc_ghz * 1e9 * distance_m);
    Ok(amplitude * amplitude)
}

/// Draws `|h|^2` for Rayleigh amplitude with scale `sqrt(1/2)`, i.e. a unit-mean exponential.
pub fn draw_fading_power<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(Exp1)
}

pub fn distance_to_ap(cfg: &NetworkConfig, sta: usize) -> f64 {
    let [x, y] = cfg.sta_positions[sta];
    let [ax, ay] = cfg.ap_position;
    (x - ax).hypot(y - ay)
}

/// Draws one realization for every (station, link) pair.
///
/// Draws happen in row-major order, one per pair, so a fixed seed gives a fixed
/// matrix. With [`Fading::None`] no randomness is consumed.
pub fn draw_snr<R: Rng + ?Sized>(
    cfg: &NetworkConfig,
    rng: &mut R,
) -> Result<ChannelRealization, ChannelError> {
    let (n, l) = (cfg.num_stas, cfg.num_links());
    let mut snr_db = Matrix::filled(n, l, 0.0);
    let mut rate_mbps = Matrix::filled(n, l, 0.0);
    for sta in 0..n {
        let distance_m = distance_to_ap(cfg, sta);
        for link in 0..l {
            let band = cfg.links[link].band;
            let gain = path_loss_linear(band.carrier_ghz(), distance_m)
                .map_err(|_| ChannelError::Distance { sta, distance_m })?;
            let fading_db = match cfg.fading {
                Fading::Rayleigh => 10.0 * draw_fading_power(rng).log10(),
                Fading::None => 0.0,
            };
            let profile = cfg.band_profile(band);
            let snr = cfg.tx_power_dbm + 10.0 * gain.log10() + fading_db - profile.noise_floor_dbm;
            snr_db[(sta, link)] = snr;
            rate_mbps[(sta, link)] = select_rate(snr, profile);
        }
    }
    Ok(ChannelRealization { snr_db, rate_mbps })
}

/// Highest rate whose threshold the SNR meets; the lowest rate below all thresholds.
pub fn select_rate(snr_db: f64, profile: &BandProfile) -> f64 {
    profile
        .snr_thresholds_db
        .iter()
        .zip(&profile.rates_mbps)
        .filter(|(thr, _)| snr_db >= **thr)
        .map(|(_, rate)| *rate)
        .next_back()
        .unwrap_or(profile.rates_mbps[0])
}
