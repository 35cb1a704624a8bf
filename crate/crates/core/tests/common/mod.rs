#![allow(dead_code)]

use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use uavsim::ddqn::{Experience, ReplayMemory};
use uavsim::nn::{NetworkConfig, QNetwork};
use uavsim::pipeline::assemble_observation;
use uavsim::rng::SimRng;
use uavsim::scenarios::{new_episode, ScenarioConfig};
use uavsim::{Action, EnvironmentMap, Mission, Observation, ObservationSpec, RewardParams};

pub fn open_map(n: usize) -> Arc<EnvironmentMap> {
    let mut rows = vec![".".repeat(n); n];
    rows[0].replace_range(0..1, "L");
    let refs: Vec<&str> = rows.iter().map(|s| s.as_str()).collect();
    Arc::new(EnvironmentMap::from_rows("open", 10.0, &refs).unwrap())
}

pub fn tiny_net() -> NetworkConfig {
    NetworkConfig {
        n_conv_layers: 1,
        n_kernels: 2,
        kernel_size: 3,
        hidden_sizes: vec![8],
        ..NetworkConfig::default()
    }
}

pub fn small_scenario(mission: Mission) -> ScenarioConfig {
    ScenarioConfig {
        mission,
        movement_budget_range: [10, 20],
        cpp_shape_count_range: [1, 2],
        cpp_coverage_fraction_range: [0.1, 0.9],
        dh_device_count_range: [1, 3],
        ..ScenarioConfig::default()
    }
}

pub fn random_observation(spec: ObservationSpec, map_size: usize, rng: &mut SimRng) -> Observation {
    let l = spec.local_size;
    let gs = spec.global_side(map_size);
    Observation {
        local_side: l,
        global_side: gs,
        local: (0..4 * l * l).map(|_| rng.random_range(-1.0..1.0)).collect(),
        global: (0..4 * gs * gs).map(|_| rng.random_range(-1.0..1.0)).collect(),
        flying_time: rng.random_range(0..150),
    }
}

/// Transitions from uniformly random play.
pub fn fill_memory(
    env: &Arc<EnvironmentMap>,
    spec: ObservationSpec,
    count: usize,
    capacity: usize,
    rng: &mut SimRng,
) -> ReplayMemory {
    let scenario = small_scenario(Mission::Cpp);
    let mut memory = ReplayMemory::new(capacity).unwrap();
    let mut pushed = 0;
    while pushed < count {
        let mut s = new_episode(env, &scenario, &RewardParams::default(), rng).unwrap();
        let mut obs = assemble_observation(&s, spec).unwrap();
        while !s.is_terminal() && pushed < count {
            let action = Action::from_index(rng.random_range(0..Action::COUNT)).unwrap();
            let out = s.step(action, None).unwrap();
            let next = assemble_observation(&s, spec).unwrap();
            memory.push(Experience {
                observation: obs,
                action,
                reward: out.reward,
                next_observation: next.clone(),
                terminal: out.terminal,
            });
            obs = next;
            pushed += 1;
        }
    }
    memory
}

// Analytic gradients against central finite differences.
//
// With every other parameter fixed the loss is piecewise linear in any
// single parameter, so away from a ReLU kink the two one-sided differences
// agree to rounding. A parameter whose probe interval straddles a kink has
// no well-defined finite difference and is left out; at most
// `MAX_KINK_SHARE` of a block may be left out.

pub const EPS: f64 = 1e-4;
pub const TOL: f64 = 1e-4;
pub const MAX_KINK_SHARE: f64 = 0.05;

/// `L = sum_b sum_a w[b][a] * Q[b][a]`, so `dL/dQ = w`.
pub fn weighted_loss(net: &QNetwork, batch: &[&Observation], w: &[f64]) -> f64 {
    let pass = net.forward_batch(batch).unwrap();
    pass.q_all().iter().flatten().zip(w).map(|(q, w)| q * w).sum()
}

/// Worst per-block relative error, or `None` when the instance sits so
/// close to a kink that too many probes straddle it, or a block is dead.
pub fn grad_check(config: NetworkConfig, spec: ObservationSpec, map_size: usize, seed: u64) -> Option<f64> {
    let mut rng = SimRng::seed_from_u64(seed);
    let mut net = QNetwork::new(config, spec, map_size, &mut rng).unwrap();
    // non-zero biases so every bias path is exercised
    for block in net.layout().blocks().to_vec() {
        if block.name.ends_with(".bias") {
            for p in &mut net.params_mut()[block.range()] {
                *p = rng.random_range(-0.1..0.1);
            }
        }
    }
    let obs: Vec<Observation> = (0..3).map(|_| random_observation(spec, map_size, &mut rng)).collect();
    let batch: Vec<&Observation> = obs.iter().collect();
    let w: Vec<f64> = (0..batch.len() * 6).map(|_| rng.random_range(-1.0..1.0)).collect();
    let pass = net.forward_batch(&batch).unwrap();
    let grad = net.backward(&pass, &w).unwrap();
    let mut worst: f64 = 0.0;
    for block in net.layout().blocks().to_vec() {
        let (mut diff, mut norm_a, mut norm_n) = (0.0, 0.0, 0.0);
        let mut kinks = 0;
        let center = weighted_loss(&net, &batch, &w);
        for i in block.range() {
            let orig = net.params()[i];
            net.params_mut()[i] = orig + EPS;
            let up = weighted_loss(&net, &batch, &w);
            net.params_mut()[i] = orig - EPS;
            let down = weighted_loss(&net, &batch, &w);
            net.params_mut()[i] = orig;
            let (fwd, bwd) = (up - center, center - down);
            if (fwd - bwd).abs() > 1e-7 * (fwd.abs() + bwd.abs()) + 1e-12 * (center.abs() + 1.0) {
                kinks += 1;
                continue;
            }
            let numeric = (up - down) / (2.0 * EPS);
            diff += (numeric - grad[i]).powi(2);
            norm_a += grad[i] * grad[i];
            norm_n += numeric * numeric;
        }
        if kinks as f64 > MAX_KINK_SHARE * block.len() as f64 {
            return None;
        }
        let denom = norm_a.sqrt() + norm_n.sqrt();
        let rel = if denom > 0.0 { diff.sqrt() / denom } else { 0.0 };
        if norm_a == 0.0 {
            // dead units: nothing to compare
            return None;
        }
        assert!(rel < TOL, "block {}: relative error {rel}", block.name);
        worst = worst.max(rel);
    }
    Some(worst)
}

