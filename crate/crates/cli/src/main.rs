//! `uavsim` command-line driver.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use uavsim::config::RunConfig;
use uavsim::ddqn::{train, TrainLogRow};
use uavsim::evaluation::{
    evaluate_checkpoint, grid_search, speedup_benchmark, write_csv, GridSearchPlan, EPISODE_CSV_HEADER, GRID_CSV_HEADER,
};
use uavsim::nn::Checkpoint;
use uavsim::scenarios::BUNDLED_MAPS;
use uavsim::ObservationSpec;

#[derive(Parser)]
#[command(name = "uavsim", version, about = "UAV coverage and data-harvesting simulator with a DDQN trainer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train an agent and write its log and checkpoints.
    Train {
        #[command(flatten)]
        common: Common,
        /// Total environment steps (overrides train.total_steps).
        #[arg(long)]
        steps: Option<u64>,
    },
    /// Evaluate a checkpoint greedily on seeded scenarios.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Episode count (overrides evaluation.episodes).
        #[arg(long)]
        episodes: Option<usize>,
        /// Write one trajectory JSON file per episode.
        #[arg(long)]
        export_trajectories: bool,
    },
    /// Train and evaluate one agent per (l, g, repeat) plus disabled runs.
    Gridsearch {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_values_t = [9, 17, 25, 33])]
        l: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = [2, 3, 5, 7])]
        g: Vec<usize>,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        /// Training steps per agent.
        #[arg(long, default_value_t = 500_000)]
        steps: u64,
        #[arg(long, default_value_t = 200)]
        eval_episodes: usize,
    },
    /// Compare gradient-step throughput of two observation specs.
    BenchSpeedup {
        #[command(flatten)]
        common: Common,
        /// Spec A as `l,g`.
        #[arg(long, default_value = "17,3", value_parser = parse_spec)]
        a: ObservationSpec,
        /// Spec B as `l,g` or `disabled`.
        #[arg(long, default_value = "disabled", value_parser = parse_spec)]
        b: ObservationSpec,
        /// Timed gradient steps per spec.
        #[arg(long, default_value_t = 1000)]
        steps: u64,
        #[arg(long, default_value_t = 5)]
        warmup: u64,
    },
    /// Write the bundled maps as JSON files.
    ExportMaps {
        #[arg(long, default_value = "maps")]
        out: PathBuf,
        #[arg(long)]
        overwrite: bool,
    },
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dotted override, e.g. `train.batch_size=32`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides output_dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Allow writing into a non-empty output directory.
    #[arg(long)]
    overwrite: bool,
}

fn parse_spec(s: &str) -> Result<ObservationSpec, String> {
    if s.eq_ignore_ascii_case("disabled") {
        return Ok(ObservationSpec::DISABLED);
    }
    let (l, g) = s.split_once(',').ok_or_else(|| format!("expected `l,g` or `disabled`, got {s:?}"))?;
    let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("{v:?}: {e}"));
    Ok(ObservationSpec::new(parse(l)?, parse(g)?))
}

struct Failure {
    code: u8,
    message: String,
}

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure {
        code: 2,
        message: e.to_string(),
    }
}

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure {
        code: 1,
        message: e.to_string(),
    }
}

type Outcome = Result<(), Failure>;

impl Common {
    fn load(&self, command: &str) -> Result<(RunConfig, PathBuf), Failure> {
        let mut cfg = RunConfig::load(self.config.as_deref(), &self.set).map_err(usage)?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        let out = self
            .out
            .clone()
            .or_else(|| cfg.output_dir.clone())
            .unwrap_or_else(|| Path::new("runs").join(command));
        Ok((cfg, out))
    }
}

/// Creates `dir`, refusing a non-empty one unless `overwrite` is set.
fn prepare_output(dir: &Path, overwrite: bool) -> Outcome {
    if dir.exists() {
        let mut entries = fs::read_dir(dir).map_err(|e| usage(format!("{}: {e}", dir.display())))?;
        if entries.next().is_some() && !overwrite {
            return Err(usage(format!(
                "output directory {} is not empty; pass --overwrite to write into it",
                dir.display()
            )));
        }
    }
    fs::create_dir_all(dir).map_err(|e| runtime(format!("{}: {e}", dir.display())))
}

fn save_json<T: serde::Serialize>(value: &T, path: &Path) -> Outcome {
    let text = serde_json::to_string_pretty(value).map_err(runtime)?;
    fs::write(path, text + "\n").map_err(|e| runtime(format!("{}: {e}", path.display())))
}

fn cmd_train(common: Common, steps: Option<u64>) -> Outcome {
    let (mut cfg, out) = common.load("train")?;
    if let Some(steps) = steps {
        cfg.train.total_steps = steps;
    }
    let setup = cfg.train_setup().map_err(usage)?;
    prepare_output(&out, common.overwrite)?;
    save_json(&cfg, &out.join("config.json"))?;
    let ckpt_dir = out.join("checkpoints");
    if cfg.train.checkpoint_every > 0 {
        fs::create_dir_all(&ckpt_dir).map_err(|e| runtime(format!("{}: {e}", ckpt_dir.display())))?;
    }
    let started = Instant::now();
    let outcome = train(&setup, |ckpt| {
        let path = ckpt_dir.join(format!("step_{:09}.json", ckpt.steps_trained));
        eprintln!("checkpoint {}", path.display());
        ckpt.save(&path)
    })
    .map_err(runtime)?;
    TrainLogRow::write_csv(&outcome.log, &out.join("train_log.csv")).map_err(runtime)?;
    outcome.checkpoint.save(&out.join("checkpoint.json")).map_err(runtime)?;
    println!(
        "trained {} steps over {} episodes in {:.1}s; wrote {}",
        cfg.train.total_steps,
        outcome.log.len(),
        started.elapsed().as_secs_f64(),
        out.display()
    );
    Ok(())
}

fn cmd_eval(common: Common, checkpoint: PathBuf, episodes: Option<usize>, export: bool) -> Outcome {
    let (cfg, out) = common.load("eval")?;
    let episodes = episodes.unwrap_or(cfg.evaluation.episodes);
    let setup = cfg.eval_setup(episodes, cfg.seed, export).map_err(usage)?;
    prepare_output(&out, common.overwrite)?;
    let ckpt = Checkpoint::load(&checkpoint).map_err(runtime)?;
    let report = evaluate_checkpoint(&ckpt, &setup).map_err(runtime)?;
    write_csv(&report.rows, &EPISODE_CSV_HEADER, &out.join("episodes.csv")).map_err(runtime)?;
    report.summary.save(&out.join("summary.json")).map_err(runtime)?;
    if export {
        let dir = out.join("trajectories");
        fs::create_dir_all(&dir).map_err(|e| runtime(format!("{}: {e}", dir.display())))?;
        for (i, t) in report.trajectories.iter().enumerate() {
            t.save(&dir.join(format!("episode_{i:05}.json"))).map_err(runtime)?;
        }
    }
    println!("{}", serde_json::to_string_pretty(&report.summary).map_err(runtime)?);
    Ok(())
}

fn cmd_gridsearch(common: Common, plan: GridSearchPlan) -> Outcome {
    let (cfg, out) = common.load("gridsearch")?;
    plan.validate().map_err(usage)?;
    let setup = cfg.train_setup().map_err(usage)?;
    prepare_output(&out, common.overwrite)?;
    save_json(&cfg, &out.join("config.json"))?;
    eprintln!("grid search: {} agents, {} steps each", plan.row_count(), plan.steps);
    let rows = grid_search(&setup, &plan).map_err(runtime)?;
    write_csv(&rows, &GRID_CSV_HEADER, &out.join("gridsearch.csv")).map_err(runtime)?;
    let failed = rows.iter().filter(|r| r.status != "ok").count();
    println!("{} rows ({failed} failed); wrote {}", rows.len(), out.join("gridsearch.csv").display());
    Ok(())
}

fn cmd_bench(common: Common, a: ObservationSpec, b: ObservationSpec, steps: u64, warmup: u64) -> Outcome {
    let (cfg, out) = common.load("bench-speedup")?;
    let setup = cfg.train_setup().map_err(usage)?;
    for spec in [a, b] {
        spec.validate(setup.env.size()).map_err(usage)?;
    }
    if steps == 0 {
        return Err(usage("--steps must be at least 1"));
    }
    prepare_output(&out, common.overwrite)?;
    let report = speedup_benchmark(&setup, a, b, steps, warmup).map_err(runtime)?;
    save_json(&report, &out.join("speedup.json"))?;
    println!(
        "{}: {:.2} steps/s, {}: {:.2} steps/s, ratio {:.2}",
        a, report.a.steps_per_second, b, report.b.steps_per_second, report.ratio
    );
    Ok(())
}

fn cmd_export_maps(out: PathBuf, overwrite: bool) -> Outcome {
    prepare_output(&out, overwrite)?;
    for (name, text) in BUNDLED_MAPS {
        let path = out.join(format!("{name}.json"));
        fs::write(&path, text).map_err(|e| runtime(format!("{}: {e}", path.display())))?;
        println!("{}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train { common, steps } => cmd_train(common, steps),
        Command::Eval {
            common,
            checkpoint,
            episodes,
            export_trajectories,
        } => cmd_eval(common, checkpoint, episodes, export_trajectories),
        Command::Gridsearch {
            common,
            l,
            g,
            repeats,
            steps,
            eval_episodes,
        } => cmd_gridsearch(
            common,
            GridSearchPlan {
                l_values: l,
                g_values: g,
                repeats,
                steps,
                eval_episodes,
            },
        ),
        Command::BenchSpeedup {
            common,
            a,
            b,
            steps,
            warmup,
        } => cmd_bench(common, a, b, steps, warmup),
        Command::ExportMaps { out, overwrite } => cmd_export_maps(out, overwrite),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
