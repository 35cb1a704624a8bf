//! Radio link between the UAV and ground IoT devices.
//!
//! Log-distance path loss with separate exponents and shadowing spread for
//! line-of-sight and obstructed links, and a normalized Shannon rate. The UAV
//! serves one device per step: the one with data left and the best rate.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Position;
use crate::rng::{stream, stream_rng, SimRng};
use crate::world::{line_of_sight, EnvironmentMap};

/// Data is accounted in multiples of 2^-20 units. Every amount stays a
/// dyadic rational far below 2^53 quanta, so subtraction and summation are
/// exact and collected + remaining always equals the initial amount.
pub const DATA_QUANTUM: f64 = 1.0 / 1_048_576.0;

pub fn quantize_data(x: f64) -> f64 {
    (x / DATA_QUANTUM).floor() * DATA_QUANTUM
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IoTDevice {
    pub position: Position,
    pub data_remaining: f64,
    pub data_initial: f64,
    pub color_id: usize,
}

impl IoTDevice {
    pub fn new(position: Position, data: f64, color_id: usize) -> Self {
        let data = quantize_data(data);
        Self {
            position,
            data_remaining: data,
            data_initial: data,
            color_id,
        }
    }

    pub fn has_data(&self) -> bool {
        self.data_remaining > 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateModel {
    /// `log2(1 + SNR)` bits per channel use, times `rate_scale`.
    #[default]
    ShannonNormalized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChannelParams {
    pub uav_altitude_m: f64,
    pub los_exponent: f64,
    pub nlos_exponent: f64,
    pub shadowing_sigma_los_db: f64,
    pub shadowing_sigma_nlos_db: f64,
    /// SNR at 1 m distance before path loss.
    pub reference_snr_db: f64,
    /// Data units per step per unit of normalized rate.
    pub rate_scale: f64,
    pub rate_model: RateModel,
    pub seed: u64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            uav_altitude_m: 10.0,
            los_exponent: 2.27,
            nlos_exponent: 3.64,
            shadowing_sigma_los_db: 2.0,
            shadowing_sigma_nlos_db: 5.0,
            // 10 * 2.27 * log10(50): a 50 m LoS link sits at 0 dB, i.e. one
            // data unit per step.
            reference_snr_db: 38.5666,
            rate_scale: 1.0,
            rate_model: RateModel::ShannonNormalized,
            seed: 0,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("uav_altitude_m", self.uav_altitude_m),
            ("los_exponent", self.los_exponent),
            ("nlos_exponent", self.nlos_exponent),
            ("shadowing_sigma_los_db", self.shadowing_sigma_los_db),
            ("shadowing_sigma_nlos_db", self.shadowing_sigma_nlos_db),
            ("reference_snr_db", self.reference_snr_db),
            ("rate_scale", self.rate_scale),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("channel parameter {name} = {v}")));
            }
        }
        if self.los_exponent <= 0.0 || self.nlos_exponent <= 0.0 {
            return Err(Error::InvalidConfig("path loss exponents must be positive".into()));
        }
        if self.shadowing_sigma_los_db < 0.0 || self.shadowing_sigma_nlos_db < 0.0 {
            return Err(Error::InvalidConfig("shadowing sigma must be non-negative".into()));
        }
        if self.uav_altitude_m < 0.0 || self.rate_scale < 0.0 {
            return Err(Error::InvalidConfig("altitude and rate scale must be non-negative".into()));
        }
        Ok(())
    }
}

/// Channel parameters plus the shadow-fading random stream of one episode.
#[derive(Debug, Clone)]
pub struct ChannelModel {
    pub params: ChannelParams,
    rng: SimRng,
}

impl ChannelModel {
    pub fn new(params: ChannelParams) -> Self {
        let seed = params.seed;
        Self::with_seed(params, seed)
    }

    pub fn with_seed(params: ChannelParams, seed: u64) -> Self {
        Self {
            params,
            rng: stream_rng(seed, stream::CHANNEL),
        }
    }

    pub fn rng_mut(&mut self) -> &mut SimRng {
        &mut self.rng
    }
}

/// 3-D distance between the UAV (at altitude over its cell center) and a
/// ground device, in meters.
pub fn link_distance(env: &EnvironmentMap, params: &ChannelParams, uav: Position, device: Position) -> f64 {
    let c = env.cell_size_m();
    let dr = (uav.row as f64 - device.row as f64) * c;
    let dc = (uav.col as f64 - device.col as f64) * c;
    let h = params.uav_altitude_m;
    (dr * dr + dc * dc + h * h).sqrt()
}

/// Achievable data per step for one device. Shadowing is drawn from `rng`
/// only when the selected sigma is nonzero.
pub fn link_rate<R: Rng + ?Sized>(
    params: &ChannelParams,
    env: &EnvironmentMap,
    uav: Position,
    device: Position,
    rng: &mut R,
) -> Result<f64> {
    params.validate()?;
    let los = line_of_sight(env, uav, device);
    let (alpha, sigma) = if los {
        (params.los_exponent, params.shadowing_sigma_los_db)
    } else {
        (params.nlos_exponent, params.shadowing_sigma_nlos_db)
    };
    // Clamp to 1 m: the reference SNR is defined there.
    let d = link_distance(env, params, uav, device).max(1.0);
    let shadowing = if sigma > 0.0 {
        Normal::new(0.0, sigma)
            .map_err(|e| Error::InvalidConfig(format!("shadowing: {e}")))?
            .sample(rng)
    } else {
        0.0
    };
    let snr_db = params.reference_snr_db - 10.0 * alpha * d.log10() + shadowing;
    let rate = match params.rate_model {
        RateModel::ShannonNormalized => (1.0 + 10f64.powf(snr_db / 10.0)).log2(),
    };
    Ok(params.rate_scale * rate)
}

/// Serves the device with the highest rate among those with data left
/// (ties go to the lowest index). Returns the served device and the amount
/// collected, which is the quantized rate clamped to the remaining data.
pub fn serve_best(devices: &mut [IoTDevice], rates: &[f64]) -> (Option<usize>, f64) {
    debug_assert_eq!(devices.len(), rates.len());
    let mut best: Option<usize> = None;
    for (i, dev) in devices.iter().enumerate() {
        if !dev.has_data() {
            continue;
        }
        match best {
            Some(b) if rates[i] <= rates[b] => {}
            _ => best = Some(i),
        }
    }
    let Some(k) = best else {
        return (None, 0.0);
    };
    let dev = &mut devices[k];
    let collected = quantize_data(rates[k]).min(dev.data_remaining);
    dev.data_remaining -= collected;
    (Some(k), collected)
}

/// One communication slot at `uav`.
pub fn communication_slot(
    devices: &mut [IoTDevice],
    env: &EnvironmentMap,
    uav: Position,
    channel: &mut ChannelModel,
) -> Result<(Option<usize>, f64)> {
    let mut rates = vec![f64::NEG_INFINITY; devices.len()];
    for (i, dev) in devices.iter().enumerate() {
        if dev.has_data() {
            rates[i] = link_rate(&channel.params, env, uav, dev.position, &mut channel.rng)?;
        }
    }
    Ok(serve_best(devices, &rates))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn open(size: usize) -> EnvironmentMap {
        let mut rows = vec![".".repeat(size); size];
        rows[0].replace_range(0..1, "L");
        let refs: Vec<&str> = rows.iter().map(String::as_str).collect();
        EnvironmentMap::from_rows("open", 10.0, &refs).unwrap()
    }

    fn noiseless() -> ChannelParams {
        ChannelParams {
            shadowing_sigma_los_db: 0.0,
            shadowing_sigma_nlos_db: 0.0,
            ..ChannelParams::default()
        }
    }

    #[test]
    fn nearer_device_has_higher_rate() {
        let env = open(10);
        let p = noiseless();
        let mut rng = SimRng::seed_from_u64(0);
        let uav = Position::new(0, 0);
        let near = link_rate(&p, &env, uav, Position::new(0, 2), &mut rng).unwrap();
        let far = link_rate(&p, &env, uav, Position::new(0, 6), &mut rng).unwrap();
        assert!(near > far, "{near} vs {far}");
    }

    #[test]
    fn los_beats_nlos_at_equal_distance() {
        let env = EnvironmentMap::from_rows("t", 10.0, &["L....", ".....", "..#..", ".....", "....."]).unwrap();
        let p = noiseless();
        let mut rng = SimRng::seed_from_u64(0);
        let uav = Position::new(2, 0);
        // Both devices 4 cells away; the eastern one is behind the obstacle.
        let blocked = link_rate(&p, &env, uav, Position::new(2, 4), &mut rng).unwrap();
        let clear = link_rate(&p, &env, Position::new(0, 0), Position::new(0, 4), &mut rng).unwrap();
        let d = (40.0f64 * 40.0 + 100.0).sqrt();
        let expect = |alpha: f64| (1.0 + 10f64.powf((p.reference_snr_db - 10.0 * alpha * d.log10()) / 10.0)).log2();
        assert!((clear - expect(2.27)).abs() < 1e-12);
        assert!((blocked - expect(3.64)).abs() < 1e-12);
        assert!(clear > blocked);
    }

    #[test]
    fn reference_snr_gives_unit_rate_at_50m() {
        let p = noiseless();
        let snr_db = p.reference_snr_db - 10.0 * p.los_exponent * 50f64.log10();
        let rate = (1.0 + 10f64.powf(snr_db / 10.0)).log2();
        assert!((rate - 1.0).abs() < 1e-4, "{rate}");
    }

    #[test]
    fn shadowing_is_seed_reproducible() {
        let env = open(8);
        let p = ChannelParams::default();
        let draw = |seed| {
            let mut rng = SimRng::seed_from_u64(seed);
            (0..5)
                .map(|_| link_rate(&p, &env, Position::new(0, 0), Position::new(3, 4), &mut rng).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(11), draw(11));
        assert_ne!(draw(11), draw(12));
    }

    #[test]
    fn non_finite_parameter_is_rejected() {
        let env = open(4);
        let p = ChannelParams {
            reference_snr_db: f64::NAN,
            ..ChannelParams::default()
        };
        let mut rng = SimRng::seed_from_u64(0);
        assert!(matches!(
            link_rate(&p, &env, Position::new(0, 0), Position::new(1, 1), &mut rng),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn serving_rules() {
        let dev = |data| IoTDevice::new(Position::new(1, 1), data, 0);

        let mut empty = vec![dev(0.0), dev(0.0)];
        assert_eq!(serve_best(&mut empty, &[3.0, 4.0]), (None, 0.0));

        let mut one = vec![dev(5.0)];
        assert_eq!(serve_best(&mut one, &[2.0]), (Some(0), 2.0));
        assert_eq!(one[0].data_remaining, 3.0);

        let mut small = vec![dev(0.5)];
        assert_eq!(serve_best(&mut small, &[2.0]), (Some(0), 0.5));
        assert_eq!(small[0].data_remaining, 0.0);

        // Best rate among devices with data; ties to the lowest index.
        let mut many = vec![dev(1.0), dev(0.0), dev(1.0), dev(1.0)];
        assert_eq!(serve_best(&mut many, &[0.1, 9.0, 0.3, 0.3]).0, Some(2));
    }

    #[test]
    fn collection_conserves_data_exactly() {
        let env = open(6);
        let mut channel = ChannelModel::new(ChannelParams { seed: 5, ..ChannelParams::default() });
        let mut devices = vec![
            IoTDevice::new(Position::new(2, 3), 7.3, 0),
            IoTDevice::new(Position::new(5, 5), 12.9, 1),
        ];
        let initial: f64 = devices.iter().map(|d| d.data_initial).sum();
        let mut collected = 0.0;
        for step in 0..40 {
            let uav = Position::new(step % 6, (step / 6) % 6);
            let (_, c) = communication_slot(&mut devices, &env, uav, &mut channel).unwrap();
            collected += c;
            let remaining: f64 = devices.iter().map(|d| d.data_remaining).sum();
            assert_eq!(collected + remaining, initial);
            assert!(devices.iter().all(|d| d.data_remaining >= 0.0));
        }
    }
}
