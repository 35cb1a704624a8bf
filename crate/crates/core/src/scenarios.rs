//! Bundled maps and randomized mission generation.

use std::sync::Arc;

use rand::seq::{index, IndexedRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::IoTDevice;
use crate::error::{Error, Result};
use crate::grid::Position;
use crate::world::{EnvironmentMap, EpisodeState, Mission, RewardParams, TargetMap};

/// Whole-target resampling cap for CPP generation.
pub const MAX_TARGET_ATTEMPTS: usize = 1000;

pub const BUNDLED_MAPS: [(&str, &str); 3] = [
    ("manhattan32", include_str!("../maps/manhattan32.json")),
    ("urban50", include_str!("../maps/urban50.json")),
    ("open8", include_str!("../maps/open8.json")),
];

pub fn bundled_map(name: &str) -> Result<EnvironmentMap> {
    let (_, text) = BUNDLED_MAPS
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| Error::InvalidConfig(format!("no bundled map named {name:?}")))?;
    EnvironmentMap::from_json(text)
}

pub fn load_map(path: impl AsRef<std::path::Path>) -> Result<EnvironmentMap> {
    EnvironmentMap::load(path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub mission: Mission,
    pub map_name: String,
    /// Inclusive range of the initial battery `b0`.
    pub movement_budget_range: [u32; 2],
    pub cpp_shape_count_range: [usize; 2],
    pub cpp_coverage_fraction_range: [f64; 2],
    pub dh_device_count_range: [usize; 2],
    pub dh_data_range: [f64; 2],
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            mission: Mission::Cpp,
            map_name: "manhattan32".into(),
            movement_budget_range: [50, 150],
            cpp_shape_count_range: [3, 8],
            cpp_coverage_fraction_range: [0.2, 0.5],
            dh_device_count_range: [3, 10],
            dh_data_range: [5.0, 20.0],
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        let [b0, b1] = self.movement_budget_range;
        if b0 == 0 || b0 > b1 {
            return bad(format!("movement budget range [{b0}, {b1}]"));
        }
        let [s0, s1] = self.cpp_shape_count_range;
        if s0 == 0 || s0 > s1 {
            return bad(format!("shape count range [{s0}, {s1}]"));
        }
        let [f0, f1] = self.cpp_coverage_fraction_range;
        if !(f0 > 0.0 && f0 <= f1 && f1 < 1.0) {
            return bad(format!("coverage fraction range [{f0}, {f1}] must lie in (0, 1)"));
        }
        let [k0, k1] = self.dh_device_count_range;
        if k0 > k1 {
            return bad(format!("device count range [{k0}, {k1}]"));
        }
        let [d0, d1] = self.dh_data_range;
        if !(d0 > 0.0 && d0 <= d1 && d1.is_finite()) {
            return bad(format!("device data range [{d0}, {d1}]"));
        }
        Ok(())
    }
}

fn sample_shape<R: Rng + ?Sized>(size: usize, mask: &mut [bool], rng: &mut R) {
    let lo = (size / 8).max(1);
    let hi = (size / 2).max(lo);
    let h = rng.random_range(lo..=hi);
    let w = rng.random_range(lo..=hi);
    let cr = rng.random_range(0..size) as f64;
    let cc = rng.random_range(0..size) as f64;
    let ellipse = rng.random_bool(0.5);
    let (ar, ac) = (h as f64 / 2.0, w as f64 / 2.0);
    for r in 0..size {
        for c in 0..size {
            let dr = r as f64 - cr;
            let dc = c as f64 - cc;
            let inside = if ellipse {
                (dr / ar).powi(2) + (dc / ac).powi(2) <= 1.0
            } else {
                dr.abs() <= (h as f64 - 1.0) / 2.0 && dc.abs() <= (w as f64 - 1.0) / 2.0
            };
            if inside {
                mask[r * size + c] = true;
            }
        }
    }
}

/// Union of random rectangles and ellipses, minus obstacles, resampled
/// until the covered share of non-obstacle cells falls in range.
pub fn generate_cpp_target<R: Rng + ?Sized>(env: &EnvironmentMap, config: &ScenarioConfig, rng: &mut R) -> Result<TargetMap> {
    let n = env.size();
    let available = n * n - env.count_obstacles();
    if available == 0 {
        return Err(Error::Generation("map has no obstacle-free cells".into()));
    }
    let [f0, f1] = config.cpp_coverage_fraction_range;
    let [s0, s1] = config.cpp_shape_count_range;
    let mut mask = vec![false; n * n];
    for _ in 0..MAX_TARGET_ATTEMPTS {
        mask.iter_mut().for_each(|m| *m = false);
        for _ in 0..rng.random_range(s0..=s1) {
            sample_shape(n, &mut mask, rng);
        }
        let mut count = 0;
        for (i, p) in env.cells().enumerate() {
            mask[i] &= !env.is_obstacle(p);
            count += mask[i] as usize;
        }
        let frac = count as f64 / available as f64;
        if frac >= f0 && frac <= f1 {
            return TargetMap::from_mask(n, &mask);
        }
    }
    Err(Error::Generation(format!(
        "no target within coverage range [{f0}, {f1}] after {MAX_TARGET_ATTEMPTS} attempts"
    )))
}

/// Devices on distinct cells that are neither obstacles nor landing cells.
pub fn generate_dh_devices<R: Rng + ?Sized>(env: &EnvironmentMap, config: &ScenarioConfig, rng: &mut R) -> Result<Vec<IoTDevice>> {
    let eligible: Vec<Position> = env
        .cells()
        .filter(|&p| !env.is_obstacle(p) && !env.is_landing(p))
        .collect();
    let [k0, k1] = config.dh_device_count_range;
    let k = rng.random_range(k0..=k1);
    if k > eligible.len() {
        return Err(Error::Generation(format!(
            "{k} devices requested but only {} eligible cells",
            eligible.len()
        )));
    }
    let [d0, d1] = config.dh_data_range;
    let cells = index::sample(rng, eligible.len(), k);
    Ok(cells
        .iter()
        .enumerate()
        .map(|(id, i)| {
            let data = rng.random_range(d0..=d1);
            IoTDevice::new(eligible[i], data, id)
        })
        .collect())
}

/// Draws `b0`, the start cell and the mission target, in that order.
pub fn new_episode<R: Rng + ?Sized>(
    env: &Arc<EnvironmentMap>,
    config: &ScenarioConfig,
    rewards: &RewardParams,
    rng: &mut R,
) -> Result<EpisodeState> {
    let [b0, b1] = config.movement_budget_range;
    let battery = rng.random_range(b0..=b1);
    let landing = env.landing_cells();
    let start = *landing
        .choose(rng)
        .ok_or_else(|| Error::InvalidMap("map has no landing cell".into()))?;
    match config.mission {
        Mission::Cpp => {
            let target = generate_cpp_target(env, config, rng)?;
            EpisodeState::new_cpp(env.clone(), target, start, battery, rewards.clone())
        }
        Mission::Dh => {
            let devices = generate_dh_devices(env, config, rng)?;
            EpisodeState::new_dh(env.clone(), devices, start, battery, rewards.clone())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, stream_rng};

    fn cfg(mission: Mission) -> ScenarioConfig {
        ScenarioConfig {
            mission,
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn bundled_maps_load() {
        let m = bundled_map("manhattan32").unwrap();
        assert_eq!(m.size(), 32);
        for corner in [Position::new(0, 0), Position::new(31, 31)] {
            assert!(m.is_landing(corner));
        }
        let u = bundled_map("urban50").unwrap();
        assert_eq!(u.size(), 50);
        assert!(u.is_landing(Position::new(25, 25)));
        let south_nfz = (40..50)
            .flat_map(|r| (0..50).map(move |c| Position::new(r, c)))
            .filter(|&p| u.is_blocked(p) && !u.is_obstacle(p))
            .count();
        assert!(south_nfz > 150);
        assert_eq!(bundled_map("open8").unwrap().count_blocked(), 0);
        assert!(bundled_map("nowhere").is_err());
    }

    #[test]
    fn cpp_targets_respect_range_and_obstacles() {
        let env = bundled_map("manhattan32").unwrap();
        let available = (32 * 32 - env.count_obstacles()) as f64;
        for seed in 0..50 {
            let t = generate_cpp_target(&env, &cfg(Mission::Cpp), &mut stream_rng(seed, stream::SCENARIO)).unwrap();
            let frac = t.count_nonzero() as f64 / available;
            assert!((0.2..=0.5).contains(&frac), "seed {seed}: {frac}");
            assert!(env.cells().all(|p| t.get(p) == 0.0 || !env.is_obstacle(p)));
        }
    }

    #[test]
    fn infeasible_fraction_reports_error() {
        let env = EnvironmentMap::from_rows("tiny", 10.0, &["L#", "##"]).unwrap();
        let mut c = cfg(Mission::Cpp);
        c.cpp_coverage_fraction_range = [0.1, 0.2];
        let err = generate_cpp_target(&env, &c, &mut stream_rng(0, 0)).unwrap_err();
        assert!(matches!(err, Error::Generation(_)));
    }

    #[test]
    fn devices_avoid_landing_and_obstacles() {
        let env = bundled_map("manhattan32").unwrap();
        for seed in 0..50 {
            let d = generate_dh_devices(&env, &cfg(Mission::Dh), &mut stream_rng(seed, 1)).unwrap();
            assert!((3..=10).contains(&d.len()));
            for dev in &d {
                assert!(!env.is_landing(dev.position) && !env.is_obstacle(dev.position));
                assert!((5.0..=20.0).contains(&dev.data_initial));
            }
        }
    }

    #[test]
    fn too_many_devices() {
        let env = EnvironmentMap::from_rows("tiny", 10.0, &["L.", ".#"]).unwrap();
        let mut c = cfg(Mission::Dh);
        c.dh_device_count_range = [3, 3];
        assert!(generate_dh_devices(&env, &c, &mut stream_rng(0, 0)).is_err());
    }

    #[test]
    fn single_landing_cell_is_always_start() {
        let env = Arc::new(EnvironmentMap::from_rows("one", 10.0, &["L....", ".....", ".....", ".....", "....."]).unwrap());
        let mut rng = stream_rng(3, stream::SCENARIO);
        for _ in 0..20 {
            let s = new_episode(&env, &cfg(Mission::Cpp), &RewardParams::default(), &mut rng).unwrap();
            assert_eq!(s.position(), Position::new(0, 0));
            assert!((50..=150).contains(&s.battery()));
        }
    }

    #[test]
    fn generation_is_seed_deterministic() {
        let env = Arc::new(bundled_map("urban50").unwrap());
        for mission in [Mission::Cpp, Mission::Dh] {
            let a = new_episode(&env, &cfg(mission), &RewardParams::default(), &mut stream_rng(9, 1)).unwrap();
            let b = new_episode(&env, &cfg(mission), &RewardParams::default(), &mut stream_rng(9, 1)).unwrap();
            assert_eq!(a.target(), b.target());
            assert_eq!(a.devices(), b.devices());
            assert_eq!((a.position(), a.battery()), (b.position(), b.battery()));
        }
    }

    #[test]
    fn config_validation() {
        let mut c = ScenarioConfig::default();
        c.cpp_coverage_fraction_range = [0.5, 0.2];
        assert!(c.validate().is_err());
        let mut c = ScenarioConfig::default();
        c.movement_budget_range = [0, 10];
        assert!(c.validate().is_err());
        assert!(ScenarioConfig::default().validate().is_ok());
    }
}
