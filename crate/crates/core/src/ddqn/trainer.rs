use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::channel::ChannelParams;
use crate::error::{Error, Result};
use crate::evaluation::{episode_channel, EpisodeMetrics};
use crate::nn::{sample_action, Checkpoint, NetworkConfig, NetworkLayout, Policy, QNetwork};
use crate::pipeline::{assemble_observation, Observation, ObservationSpec};
use crate::rng::{stream, stream_rng, SimRng};
use crate::scenarios::{new_episode, ScenarioConfig};
use crate::world::{Action, EnvironmentMap, RewardParams};

use super::optim::Adam;
use super::replay::{Experience, ReplayMemory};
use super::target::td_targets;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub gamma: f64,
    pub tau: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub temperature_start: f64,
    pub temperature_end: f64,
    /// Steps over which the temperature decays; `None` means half of
    /// `total_steps`.
    pub temperature_decay_steps: Option<u64>,
    pub total_steps: u64,
    pub train_every: u64,
    /// Environment steps collected before the first gradient step.
    pub learning_starts: u64,
    /// Periodic checkpoint interval in environment steps; 0 disables.
    pub checkpoint_every: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            gamma: 0.95,
            tau: 0.005,
            batch_size: 128,
            replay_capacity: 50_000,
            learning_rate: 3e-4,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-7,
            temperature_start: 0.1,
            temperature_end: 0.01,
            temperature_decay_steps: None,
            total_steps: 2_000_000,
            train_every: 1,
            learning_starts: 0,
            checkpoint_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad(format!("gamma {} outside [0, 1]", self.gamma));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad(format!("tau {} outside (0, 1]", self.tau));
        }
        if self.batch_size == 0 || self.replay_capacity == 0 || self.train_every == 0 {
            return bad("batch_size, replay_capacity and train_every must be positive".into());
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate {}", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return bad("Adam decays must lie in [0, 1)".into());
        }
        let t0 = self.temperature_start;
        let t1 = self.temperature_end;
        if !(t0 > 0.0 && t1 > 0.0 && t0.is_finite() && t1.is_finite()) {
            return bad(format!("temperatures must be positive, got {t0} -> {t1}"));
        }
        Ok(())
    }

    /// Log-linear interpolation from start to end, then constant.
    pub fn temperature_at(&self, step: u64) -> f64 {
        let decay = self.temperature_decay_steps.unwrap_or(self.total_steps / 2);
        if decay == 0 || step >= decay {
            return self.temperature_end;
        }
        let frac = step as f64 / decay as f64;
        self.temperature_start * (self.temperature_end / self.temperature_start).powf(frac)
    }
}

/// Mean squared TD error of one sampled batch followed by an optimizer
/// step on `online` and a soft update of `target`. Returns the loss before
/// the update.
pub fn train_step(
    memory: &ReplayMemory,
    online: &mut QNetwork,
    target: &mut QNetwork,
    optimizer: &mut Adam,
    config: &TrainConfig,
    rng: &mut SimRng,
) -> Result<f64> {
    let batch = memory.sample_combined(config.batch_size, rng)?;
    let y = td_targets(&batch, &*online, &*target, config.gamma)?;
    let obs: Vec<&Observation> = batch.iter().map(|e| &e.observation).collect();
    let pass = online.forward_batch(&obs)?;
    let n = batch.len() as f64;
    let mut dq = vec![0.0; batch.len() * Action::COUNT];
    let mut loss = 0.0;
    for (b, e) in batch.iter().enumerate() {
        let a = e.action.index();
        let err = pass.q(b)[a] - y[b];
        loss += err * err;
        dq[b * Action::COUNT + a] = 2.0 * err / n;
    }
    loss /= n;
    if !loss.is_finite() {
        let q_max = pass.q_all().iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        let y_max = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        return Err(Error::NonFinite(format!(
            "loss {loss} after {} optimizer steps (max |Q| {q_max}, max |Y| {y_max})",
            optimizer.steps()
        )));
    }
    let mut grad = std::mem::take(&mut optimizer.scratch);
    online.backward_into(&pass, &dq, &mut grad)?;
    optimizer.step(online.params_mut(), &grad)?;
    optimizer.scratch = grad;
    target.soft_update_from(online, config.tau)?;
    Ok(loss)
}

/// Networks, optimizer state, replay memory and random streams of one
/// training run.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub online: QNetwork,
    pub target: QNetwork,
    pub optimizer: Adam,
    pub memory: ReplayMemory,
    pub config: TrainConfig,
    policy_rng: SimRng,
    replay_rng: SimRng,
    env_steps: u64,
    grad_steps: u64,
}

impl Trainer {
    pub fn new(network: NetworkConfig, spec: ObservationSpec, map_size: usize, config: TrainConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let online = QNetwork::new(network, spec, map_size, &mut stream_rng(seed, stream::INIT))?;
        let target = online.clone();
        let optimizer = Adam::new(
            online.parameter_count(),
            config.learning_rate,
            config.adam_beta1,
            config.adam_beta2,
            config.adam_epsilon,
        );
        Ok(Self {
            online,
            target,
            optimizer,
            memory: ReplayMemory::new(config.replay_capacity)?,
            config,
            policy_rng: stream_rng(seed, stream::POLICY),
            replay_rng: stream_rng(seed, stream::REPLAY),
            env_steps: 0,
            grad_steps: 0,
        })
    }

    pub fn env_steps(&self) -> u64 {
        self.env_steps
    }

    pub fn grad_steps(&self) -> u64 {
        self.grad_steps
    }

    pub fn temperature(&self) -> f64 {
        self.config.temperature_at(self.env_steps)
    }

    pub fn act(&mut self, obs: &Observation) -> Result<Action> {
        let q = self.online.q_values(obs)?;
        let policy = Policy::Softmax {
            temperature: self.temperature(),
        };
        sample_action(&q, policy, &mut self.policy_rng)
    }

    /// Stores a transition, advances the step counter and runs a gradient
    /// step when the schedule says so.
    pub fn observe(&mut self, exp: Experience) -> Result<Option<f64>> {
        self.memory.push(exp);
        self.env_steps += 1;
        if self.env_steps > self.config.learning_starts && self.env_steps % self.config.train_every == 0 {
            Ok(Some(self.train_step()?))
        } else {
            Ok(None)
        }
    }

    pub fn train_step(&mut self) -> Result<f64> {
        let loss = train_step(
            &self.memory,
            &mut self.online,
            &mut self.target,
            &mut self.optimizer,
            &self.config,
            &mut self.replay_rng,
        )?;
        self.grad_steps += 1;
        Ok(loss)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint::from_networks(&self.online, &self.target, self.env_steps)
    }
}

/// Everything a training run depends on.
#[derive(Debug, Clone)]
pub struct TrainSetup {
    pub env: Arc<EnvironmentMap>,
    pub scenario: ScenarioConfig,
    pub rewards: RewardParams,
    pub channel: ChannelParams,
    pub network: NetworkConfig,
    pub spec: ObservationSpec,
    pub train: TrainConfig,
    pub seed: u64,
}

impl TrainSetup {
    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.rewards.validate()?;
        self.channel.validate()?;
        self.network.validate()?;
        self.spec.validate(self.env.size())?;
        // catches conv stacks that shrink a branch to nothing
        NetworkLayout::new(&self.network, self.spec, self.env.size())?;
        self.train.validate()
    }
}

/// One completed training episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLogRow {
    /// Environment steps taken when the episode ended.
    pub step: u64,
    pub episode: u64,
    pub reward_sum: f64,
    pub cr: f64,
    pub cral: f64,
    pub landed: bool,
    /// Mean loss of the gradient steps taken during the episode, empty if
    /// none were taken.
    pub loss_mean: Option<f64>,
    pub temperature: f64,
}

impl TrainLogRow {
    pub fn write_csv(rows: &[TrainLogRow], path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        for row in rows {
            w.serialize(row).map_err(|e| csv_error(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        if rows.is_empty() {
            std::fs::write(path, "step,episode,reward_sum,cr,cral,landed,loss_mean,temperature\n")
                .map_err(|e| Error::io(path, e))?;
        }
        Ok(())
    }
}

pub(crate) fn csv_error(path: &Path, e: csv::Error) -> Error {
    let msg = e.to_string();
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        _ => Error::io(path, std::io::Error::other(msg)),
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub log: Vec<TrainLogRow>,
}

/// Runs episodes until `total_steps` environment steps have been taken.
/// Only completed episodes are logged; an episode cut off by the step
/// budget is dropped. `on_checkpoint` receives periodic snapshots.
pub fn train(setup: &TrainSetup, mut on_checkpoint: impl FnMut(&Checkpoint) -> Result<()>) -> Result<TrainOutcome> {
    setup.validate()?;
    let mut trainer = Trainer::new(
        setup.network.clone(),
        setup.spec,
        setup.env.size(),
        setup.train.clone(),
        setup.seed,
    )?;
    let total = setup.train.total_steps;
    let every = setup.train.checkpoint_every;
    let mut scenario_rng = stream_rng(setup.seed, stream::SCENARIO);
    let mut log = Vec::new();
    let mut episode = 0u64;
    while trainer.env_steps() < total {
        let mut state = new_episode(&setup.env, &setup.scenario, &setup.rewards, &mut scenario_rng)?;
        let mut channel = episode_channel(setup.scenario.mission, &setup.channel, setup.seed, episode);
        let mut obs = assemble_observation(&state, setup.spec)?;
        let mut reward_sum = 0.0;
        let (mut loss_sum, mut loss_n) = (0.0, 0u64);
        let temperature = trainer.temperature();
        loop {
            let action = trainer.act(&obs)?;
            let out = state.step(action, channel.as_mut())?;
            reward_sum += out.reward;
            let next = assemble_observation(&state, setup.spec)?;
            let loss = trainer.observe(Experience {
                observation: obs,
                action,
                reward: out.reward,
                next_observation: next.clone(),
                terminal: out.terminal,
            })?;
            if let Some(l) = loss {
                loss_sum += l;
                loss_n += 1;
            }
            if every > 0 && trainer.env_steps() % every == 0 {
                on_checkpoint(&trainer.checkpoint())?;
            }
            if out.terminal {
                let m = EpisodeMetrics::from_state(&state);
                log.push(TrainLogRow {
                    step: trainer.env_steps(),
                    episode,
                    reward_sum,
                    cr: m.cr,
                    cral: m.cral,
                    landed: m.landed,
                    loss_mean: (loss_n > 0).then(|| loss_sum / loss_n as f64),
                    temperature,
                });
                break;
            }
            if trainer.env_steps() >= total {
                break;
            }
            obs = next;
        }
        episode += 1;
    }
    Ok(TrainOutcome {
        checkpoint: trainer.checkpoint(),
        log,
    })
}
