//! Monte Carlo evaluation, the `(l, g)` grid search and the gradient-step
//! throughput benchmark.

use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelModel, ChannelParams};
use crate::ddqn::{csv_error, train, Experience, TrainSetup, Trainer};
use crate::error::{Error, Result};
use crate::nn::{argmax, Checkpoint, QNetwork};
use crate::pipeline::{assemble_observation, flatten_size, Observation, ObservationSpec};
use crate::rng::{derive_seed, stream, stream_rng, SimRng};
use crate::scenarios::{new_episode, ScenarioConfig};
use crate::world::trajectory::{StepRecord, Trajectory};
use crate::world::{Action, EnvironmentMap, EpisodeState, Mission, RewardParams};

/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "UAVSIM_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub cr: f64,
    pub cral: f64,
    pub landed: bool,
    pub steps_used: u32,
    pub budget: u32,
}

impl EpisodeMetrics {
    /// Coverage ratio of the target mass; an episode with nothing to
    /// collect counts as complete.
    pub fn from_state(state: &EpisodeState) -> Self {
        let s = state.mission_state();
        let cr = if s.initial_target > 0.0 {
            ((s.initial_target - s.remaining_target) / s.initial_target).clamp(0.0, 1.0)
        } else {
            1.0
        };
        Self {
            cr,
            cral: if s.landed { cr } else { 0.0 },
            landed: s.landed,
            steps_used: s.steps_used,
            budget: state.initial_battery(),
        }
    }
}

/// Shadow-fading stream for one episode; `None` for coverage missions.
pub fn episode_channel(mission: Mission, params: &ChannelParams, seed: u64, episode: u64) -> Option<ChannelModel> {
    match mission {
        Mission::Cpp => None,
        Mission::Dh => Some(ChannelModel::with_seed(
            params.clone(),
            derive_seed(seed ^ params.seed, episode),
        )),
    }
}

/// Chooses actions during evaluation.
pub trait Controller: Sync {
    /// Observation layout the controller needs, if any.
    fn spec(&self) -> Option<ObservationSpec>;
    fn act(&self, state: &EpisodeState, obs: Option<&Observation>, rng: &mut SimRng) -> Result<Action>;
}

/// Argmax over the online network.
#[derive(Debug, Clone)]
pub struct GreedyController {
    pub network: QNetwork,
}

impl Controller for GreedyController {
    fn spec(&self) -> Option<ObservationSpec> {
        Some(self.network.spec())
    }

    fn act(&self, _state: &EpisodeState, obs: Option<&Observation>, _rng: &mut SimRng) -> Result<Action> {
        let obs = obs.ok_or_else(|| Error::InvalidConfig("greedy controller needs observations".into()))?;
        argmax(&self.network.q_values(obs)?)
    }
}

/// Uniform over all six actions.
#[derive(Debug, Clone, Copy, Default)]
pub struct RandomController;

impl Controller for RandomController {
    fn spec(&self) -> Option<ObservationSpec> {
        None
    }

    fn act(&self, _state: &EpisodeState, _obs: Option<&Observation>, rng: &mut SimRng) -> Result<Action> {
        Action::from_index(rng.random_range(0..Action::COUNT))
    }
}

#[derive(Debug, Clone)]
pub struct EvalSetup {
    pub env: Arc<EnvironmentMap>,
    pub scenario: ScenarioConfig,
    pub rewards: RewardParams,
    pub channel: ChannelParams,
    pub episodes: usize,
    pub seed: u64,
    pub record_trajectories: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRow {
    pub episode: u64,
    pub cr: f64,
    pub cral: f64,
    pub landed: bool,
    pub steps_used: u32,
    pub budget: u32,
    pub reward_sum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub mission: Mission,
    pub map: String,
    pub episodes: usize,
    pub mean_cr: f64,
    pub mean_cral: f64,
    pub landed_pct: f64,
}

impl EvalSummary {
    pub fn from_rows(mission: Mission, map: &str, rows: &[EpisodeRow]) -> Self {
        let n = rows.len();
        let mean = |f: &dyn Fn(&EpisodeRow) -> f64| {
            if n == 0 {
                0.0
            } else {
                rows.iter().map(f).sum::<f64>() / n as f64
            }
        };
        Self {
            mission,
            map: map.to_string(),
            episodes: n,
            mean_cr: mean(&|r| r.cr),
            mean_cral: mean(&|r| r.cral),
            landed_pct: 100.0 * mean(&|r| r.landed as u8 as f64),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::json("evaluation summary", e))?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub summary: EvalSummary,
    pub rows: Vec<EpisodeRow>,
    pub trajectories: Vec<Trajectory>,
}

/// Writes serializable rows as CSV with a header line.
pub fn write_csv<T: Serialize>(rows: &[T], header: &[&str], path: &Path) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub const EPISODE_CSV_HEADER: [&str; 7] = ["episode", "cr", "cral", "landed", "steps_used", "budget", "reward_sum"];

/// Pool sized by `UAVSIM_THREADS`, or rayon's default when unset.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("{THREADS_ENV}={v:?} is not a thread count")))?;
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))
}

/// Plays episode `index` of an evaluation to the end.
pub fn run_episode<C: Controller + ?Sized>(
    setup: &EvalSetup,
    controller: &C,
    index: u64,
) -> Result<(EpisodeRow, Option<Trajectory>)> {
    let seed = derive_seed(setup.seed, index);
    let mut state = new_episode(
        &setup.env,
        &setup.scenario,
        &setup.rewards,
        &mut stream_rng(seed, stream::SCENARIO),
    )?;
    let mut channel = episode_channel(setup.scenario.mission, &setup.channel, seed, 0);
    let mut rng = stream_rng(seed, stream::EVAL);
    let spec = controller.spec();
    let mut traj = setup.record_trajectories.then(|| Trajectory::begin(&state));
    let mut reward_sum = 0.0;
    while !state.is_terminal() {
        let obs = spec.map(|s| assemble_observation(&state, s)).transpose()?;
        let action = controller.act(&state, obs.as_ref(), &mut rng)?;
        let out = state.step(action, channel.as_mut())?;
        reward_sum += out.reward;
        if let Some(t) = traj.as_mut() {
            t.push(StepRecord::after(&state, state.steps() - 1, action, &out));
        }
    }
    let m = EpisodeMetrics::from_state(&state);
    if let Some(t) = traj.as_mut() {
        t.landed = m.landed;
        t.cr = m.cr;
    }
    let row = EpisodeRow {
        episode: index,
        cr: m.cr,
        cral: m.cral,
        landed: m.landed,
        steps_used: m.steps_used,
        budget: m.budget,
        reward_sum,
    };
    Ok((row, traj))
}

/// Runs `setup.episodes` seeded episodes in parallel; results come back in
/// episode order regardless of scheduling.
pub fn evaluate<C: Controller + ?Sized>(setup: &EvalSetup, controller: &C) -> Result<EvalReport> {
    setup.scenario.validate()?;
    if let Some(spec) = controller.spec() {
        spec.validate(setup.env.size())?;
    }
    let pool = thread_pool()?;
    let results: Vec<_> = pool.install(|| {
        (0..setup.episodes as u64)
            .into_par_iter()
            .map(|i| run_episode(setup, controller, i))
            .collect::<Result<Vec<_>>>()
    })?;
    let (rows, trajs): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    Ok(EvalReport {
        summary: EvalSummary::from_rows(setup.scenario.mission, setup.env.name(), &rows),
        rows,
        trajectories: trajs.into_iter().flatten().collect(),
    })
}

/// Greedy evaluation of a checkpoint's online network.
pub fn evaluate_checkpoint(checkpoint: &Checkpoint, setup: &EvalSetup) -> Result<EvalReport> {
    if checkpoint.map_size != setup.env.size() {
        return Err(Error::ShapeMismatch(format!(
            "checkpoint was trained on a {0}x{0} map, evaluation map is {1}x{1}",
            checkpoint.map_size,
            setup.env.size()
        )));
    }
    let (online, _) = checkpoint.networks()?;
    evaluate(setup, &GreedyController { network: online })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchRow {
    pub mission: Mission,
    /// Local map side; 0 for the run without map processing.
    pub l: usize,
    pub g: usize,
    pub repeat: usize,
    pub flatten_size: Option<usize>,
    pub mean_cr: Option<f64>,
    pub mean_cral: Option<f64>,
    pub landed_pct: Option<f64>,
    pub steps_per_second: Option<f64>,
    pub train_seconds: Option<f64>,
    pub status: String,
}

pub const GRID_CSV_HEADER: [&str; 11] = [
    "mission",
    "l",
    "g",
    "repeat",
    "flatten_size",
    "mean_cr",
    "mean_cral",
    "landed_pct",
    "steps_per_second",
    "train_seconds",
    "status",
];

#[derive(Debug, Clone)]
pub struct GridSearchPlan {
    pub l_values: Vec<usize>,
    pub g_values: Vec<usize>,
    pub repeats: usize,
    pub steps: u64,
    pub eval_episodes: usize,
}

impl GridSearchPlan {
    /// Every `(l, g, repeat)` cell followed by the disabled runs.
    pub fn cells(&self) -> Vec<(ObservationSpec, usize)> {
        let mut out = Vec::with_capacity(self.row_count());
        for &l in &self.l_values {
            for &g in &self.g_values {
                for r in 0..self.repeats {
                    out.push((ObservationSpec::new(l, g), r));
                }
            }
        }
        for r in 0..self.repeats {
            out.push((ObservationSpec::DISABLED, r));
        }
        out
    }

    pub fn row_count(&self) -> usize {
        self.l_values.len() * self.g_values.len() * self.repeats + self.repeats
    }

    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(Error::InvalidConfig("grid search needs at least one repeat".into()));
        }
        if self.l_values.is_empty() || self.g_values.is_empty() {
            return Err(Error::InvalidConfig("grid search needs non-empty l and g lists".into()));
        }
        Ok(())
    }
}

fn grid_cell(base: &TrainSetup, plan: &GridSearchPlan, spec: ObservationSpec, repeat: usize) -> GridSearchRow {
    let net = &base.network;
    let mut row = GridSearchRow {
        mission: base.scenario.mission,
        l: spec.local_size,
        g: spec.global_scaling,
        repeat,
        flatten_size: None,
        mean_cr: None,
        mean_cral: None,
        landed_pct: None,
        steps_per_second: None,
        train_seconds: None,
        status: "ok".into(),
    };
    let size = base.env.size();
    match spec
        .validate(size)
        .and_then(|_| flatten_size(spec, size, net.n_kernels, net.n_conv_layers, net.kernel_size))
    {
        Ok(f) => row.flatten_size = Some(f),
        Err(e) => {
            row.status = format!("failed: {e}");
            return row;
        }
    }
    let mut setup = base.clone();
    setup.spec = spec;
    setup.train.total_steps = plan.steps;
    setup.seed = derive_seed(base.seed, repeat as u64);
    let started = Instant::now();
    let outcome = match train(&setup, |_| Ok(())) {
        Ok(o) => o,
        Err(e) => {
            row.status = format!("failed: {e}");
            return row;
        }
    };
    let secs = started.elapsed().as_secs_f64();
    row.train_seconds = Some(secs);
    row.steps_per_second = Some(if secs > 0.0 { plan.steps as f64 / secs } else { 0.0 });
    let eval = EvalSetup {
        env: base.env.clone(),
        scenario: base.scenario.clone(),
        rewards: base.rewards.clone(),
        channel: base.channel.clone(),
        episodes: plan.eval_episodes,
        seed: derive_seed(base.seed, u64::MAX),
        record_trajectories: false,
    };
    match evaluate_checkpoint(&outcome.checkpoint, &eval) {
        Ok(r) => {
            row.mean_cr = Some(r.summary.mean_cr);
            row.mean_cral = Some(r.summary.mean_cral);
            row.landed_pct = Some(r.summary.landed_pct);
        }
        Err(e) => row.status = format!("failed: {e}"),
    }
    row
}

/// Trains and evaluates one agent per `(l, g, repeat)` plus `repeats`
/// agents without map processing. Repeat `r` of every cell shares a seed,
/// and all agents are evaluated on the same scenarios. Infeasible or
/// diverging cells are recorded with a `failed:` status.
pub fn grid_search(base: &TrainSetup, plan: &GridSearchPlan) -> Result<Vec<GridSearchRow>> {
    plan.validate()?;
    let cells = plan.cells();
    let pool = thread_pool()?;
    Ok(pool.install(|| {
        cells
            .par_iter()
            .map(|&(spec, r)| grid_cell(base, plan, spec, r))
            .collect()
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Throughput {
    pub spec: ObservationSpec,
    pub steps: u64,
    pub seconds: f64,
    pub steps_per_second: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedupReport {
    pub a: Throughput,
    pub b: Throughput,
    /// Throughput of A over throughput of B.
    pub ratio: f64,
}

/// Gradient-step throughput (forward, backward, optimizer and soft
/// update) for one observation spec, on replay data from a fixed set of
/// random-policy episodes.
pub fn train_step_throughput(setup: &TrainSetup, spec: ObservationSpec, steps: u64, warmup: u64) -> Result<Throughput> {
    let mut s = setup.clone();
    s.spec = spec;
    s.train.replay_capacity = s.train.replay_capacity.max(s.train.batch_size);
    s.validate()?;
    let mut trainer = Trainer::new(s.network.clone(), spec, s.env.size(), s.train.clone(), s.seed)?;
    let fill = s.train.batch_size.clamp(64, s.train.replay_capacity);
    let mut scenario_rng = stream_rng(s.seed, stream::SCENARIO);
    let mut policy_rng = stream_rng(s.seed, stream::POLICY);
    let mut episode = 0;
    while trainer.memory.len() < fill {
        let mut state = new_episode(&s.env, &s.scenario, &s.rewards, &mut scenario_rng)?;
        let mut channel = episode_channel(s.scenario.mission, &s.channel, s.seed, episode);
        let mut obs = assemble_observation(&state, spec)?;
        while !state.is_terminal() && trainer.memory.len() < fill {
            let action = RandomController.act(&state, None, &mut policy_rng)?;
            let out = state.step(action, channel.as_mut())?;
            let next = assemble_observation(&state, spec)?;
            trainer.memory.push(Experience {
                observation: obs,
                action,
                reward: out.reward,
                next_observation: next.clone(),
                terminal: out.terminal,
            });
            obs = next;
        }
        episode += 1;
    }
    for _ in 0..warmup {
        trainer.train_step()?;
    }
    let started = Instant::now();
    for _ in 0..steps {
        trainer.train_step()?;
    }
    let seconds = started.elapsed().as_secs_f64();
    Ok(Throughput {
        spec,
        steps,
        seconds,
        steps_per_second: steps as f64 / seconds.max(f64::MIN_POSITIVE),
    })
}

pub fn speedup_benchmark(
    setup: &TrainSetup,
    spec_a: ObservationSpec,
    spec_b: ObservationSpec,
    steps: u64,
    warmup: u64,
) -> Result<SpeedupReport> {
    if steps == 0 {
        return Err(Error::InvalidConfig("benchmark needs at least one timed step".into()));
    }
    let a = train_step_throughput(setup, spec_a, steps, warmup)?;
    let b = train_step_throughput(setup, spec_b, steps, warmup)?;
    Ok(SpeedupReport {
        a,
        b,
        ratio: a.steps_per_second / b.steps_per_second,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Position;
    use crate::world::TargetMap;

    fn open(n: usize) -> Arc<EnvironmentMap> {
        let mut rows = vec![".".repeat(n); n];
        rows[0].replace_range(0..1, "L");
        let refs: Vec<&str> = rows.iter().map(|s| s.as_str()).collect();
        Arc::new(EnvironmentMap::from_rows("open", 10.0, &refs).unwrap())
    }

    struct Script(Vec<Action>);

    impl Controller for Script {
        fn spec(&self) -> Option<ObservationSpec> {
            None
        }
        fn act(&self, state: &EpisodeState, _: Option<&Observation>, _: &mut SimRng) -> Result<Action> {
            Ok(self.0[state.steps() as usize])
        }
    }

    fn setup(env: Arc<EnvironmentMap>) -> EvalSetup {
        EvalSetup {
            env,
            scenario: ScenarioConfig {
                movement_budget_range: [30, 30],
                cpp_shape_count_range: [1, 3],
                ..ScenarioConfig::default()
            },
            rewards: RewardParams::default(),
            channel: ChannelParams::default(),
            episodes: 20,
            seed: 4,
            record_trajectories: true,
        }
    }

    #[test]
    fn landing_immediately_scores_zero() {
        let s = setup(open(8));
        let r = evaluate(&s, &Script(vec![Action::Land])).unwrap();
        assert_eq!(r.summary.landed_pct, 100.0);
        assert_eq!(r.summary.mean_cr, 0.0);
        assert_eq!(r.summary.mean_cral, 0.0);
        assert_eq!(r.trajectories.len(), 20);
    }

    #[test]
    fn full_coverage_then_land() {
        let env = open(5);
        // Target only in the start's field of view.
        let mut mask = vec![false; 25];
        mask[1] = true;
        mask[12] = true;
        let target = TargetMap::from_mask(5, &mask).unwrap();
        let mut st = EpisodeState::new_cpp(env, target, Position::new(0, 0), 10, RewardParams::default()).unwrap();
        st.step(Action::Hover, None).unwrap();
        st.step(Action::Land, None).unwrap();
        let m = EpisodeMetrics::from_state(&st);
        assert_eq!((m.cr, m.cral, m.landed), (1.0, 1.0, true));
    }

    #[test]
    fn random_policy_invariants() {
        let s = setup(open(6));
        let r = evaluate(&s, &RandomController).unwrap();
        for row in &r.rows {
            assert!(row.cral <= row.cr);
            assert!(row.cral == 0.0 || (row.landed && row.cral == row.cr));
            assert!(row.steps_used <= row.budget);
        }
        let again = evaluate(&s, &RandomController).unwrap();
        assert_eq!(r.rows, again.rows);
    }

    #[test]
    fn plan_row_count() {
        let plan = GridSearchPlan {
            l_values: vec![9, 17, 25, 33],
            g_values: vec![2, 3, 5, 7],
            repeats: 3,
            steps: 0,
            eval_episodes: 0,
        };
        assert_eq!(plan.cells().len(), 51);
        assert_eq!(plan.row_count(), 51);
        let bad = GridSearchPlan { repeats: 0, ..plan };
        assert!(bad.validate().is_err());
    }
}
