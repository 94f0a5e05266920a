//! Command-line front end: planning, execution, the reactive baseline and the
//! benchmark, each writing its artifacts into an output directory.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

use crate::configurator::{
    read_plan_json, write_map_dot, write_plan_json, ChiSign, Configurator, Plan, PlannerConfig,
};
use crate::core_sim::EngineConfig;
use crate::executor::{
    execute_plan, reactive_baseline, run_benchmark, ActuationNoise, BenchConfig, BenchReport,
    ExecutionConfig, ExecutionTrace, ReactiveParams,
};
use crate::tasks::TaskParams;
use crate::world::{ray_cast_scan, Scenario};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Input(#[from] crate::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    /// 1 for bad input, 2 when the planner found no viable plan.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(crate::Error::NoViablePlan) => 2,
            _ => 1,
        }
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "clplan",
    version,
    about = "Closed-loop multi-step planner for a differential-drive robot"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the cognitive map from one scan and extract a plan.
    Plan(Common),
    /// Plan (or load a plan) and execute it in the ground-truth world.
    Run {
        #[command(flatten)]
        common: Common,
        /// Execute this plan file instead of planning.
        #[arg(long)]
        plan: Option<PathBuf>,
    },
    /// Drive the reactive baseline controller in the ground-truth world.
    Baseline(Common),
    /// Seeded comparison of planner and baseline over jittered scenarios.
    Bench {
        #[command(flatten)]
        common: Common,
        /// Number of runs.
        #[arg(long, default_value_t = 10)]
        runs: usize,
        /// Obstacle position jitter, m (uniform in [-j, j] per axis).
        #[arg(long, default_value_t = 0.02)]
        jitter: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChiSignArg {
    Positive,
    PaperNegative,
}

impl From<ChiSignArg> for ChiSign {
    fn from(arg: ChiSignArg) -> Self {
        match arg {
            ChiSignArg::Positive => ChiSign::Positive,
            ChiSignArg::PaperNegative => ChiSign::PaperNegative,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Scenario JSON file [default: bundled overtaking scenario].
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Output directory for artifacts.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Seed for sensor noise, actuation noise and jitter.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// JSON file with any of: speed, turn_angle, max_travel, time_step,
    /// inflation, goal_radius. Flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Linear speed, m/s [default: 0.2].
    #[arg(long)]
    pub speed: Option<f64>,
    /// Sidestep turn angle, rad [default: pi/4].
    #[arg(long)]
    pub turn_angle: Option<f64>,
    /// Longest straight, m [default: 2.0].
    #[arg(long)]
    pub max_travel: Option<f64>,
    /// Simulation time step, s [default: 0.05].
    #[arg(long)]
    pub time_step: Option<f64>,
    /// Footprint inflation for predicted collisions, m [default: 0].
    #[arg(long)]
    pub inflation: Option<f64>,
    /// Goal acceptance radius, m [default: 0.05].
    #[arg(long)]
    pub goal_radius: Option<f64>,
    /// Sign convention of the goal-distance term.
    #[arg(long, value_enum, default_value_t = ChiSignArg::Positive)]
    pub chi_sign: ChiSignArg,
    /// Actuation noise sd as a fraction of the nominal speeds.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
}

/// Fully resolved settings, echoed to `config_used.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub scenario: String,
    pub seed: u64,
    pub chi_sign: ChiSignArg,
    pub goal_radius: f64,
    pub noise: f64,
    pub task: TaskParams,
    pub engine: EngineConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jitter: Option<f64>,
}

fn config_key(key: &str) -> Option<&'static str> {
    [
        "speed",
        "turn_angle",
        "max_travel",
        "time_step",
        "inflation",
        "goal_radius",
    ]
    .into_iter()
    .find(|k| *k == key)
}

fn read_config_file(path: &Path) -> CliResult<Vec<(&'static str, f64)>> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| crate::Error::Parse(format!("{}: {e}", path.display())))?;
    let Value::Object(map) = value else {
        return Err(
            crate::Error::Parse(format!("{}: expected a JSON object", path.display())).into(),
        );
    };
    let mut out = Vec::new();
    for (key, value) in map {
        let Some(known) = config_key(&key) else {
            return Err(crate::Error::Parse(format!("unknown config key `{key}`")).into());
        };
        let Some(number) = value.as_f64() else {
            return Err(crate::Error::InvalidParameter {
                key: known,
                reason: "must be a number".into(),
            }
            .into());
        };
        out.push((known, number));
    }
    Ok(out)
}

impl Common {
    fn resolve(&self) -> CliResult<(Scenario, RunConfig)> {
        let scenario = match &self.scenario {
            Some(path) => Scenario::load(path)?,
            None => Scenario::overtaking(),
        };
        let mut task = TaskParams::default();
        let mut engine = EngineConfig::default();
        let mut goal_radius = PlannerConfig::new(scenario.goal_in_start_frame()).goal_radius;
        let mut settings = match &self.config {
            Some(path) => read_config_file(path)?,
            None => Vec::new(),
        };
        let flags = [
            ("speed", self.speed),
            ("turn_angle", self.turn_angle),
            ("max_travel", self.max_travel),
            ("time_step", self.time_step),
            ("inflation", self.inflation),
            ("goal_radius", self.goal_radius),
        ];
        settings.extend(flags.into_iter().filter_map(|(k, v)| v.map(|v| (k, v))));
        for (key, value) in settings {
            match key {
                "speed" => task.linear_speed = value,
                "turn_angle" => task.turn_angle = value,
                "max_travel" => task.max_travel = value,
                "time_step" => engine.time_step = value,
                "inflation" => engine.collision_inflation = value,
                _ => goal_radius = value,
            }
        }
        task.validate()?;
        engine.validate()?;
        if goal_radius.is_nan() || goal_radius <= 0.0 {
            return Err(crate::error::invalid("goal_radius", "must be > 0").into());
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(crate::error::invalid("noise", "must be >= 0").into());
        }
        let config = RunConfig {
            scenario: self.scenario.as_ref().map_or_else(
                || "overtaking (bundled)".to_string(),
                |p| p.display().to_string(),
            ),
            seed: self.seed,
            chi_sign: self.chi_sign,
            goal_radius,
            noise: self.noise,
            task,
            engine,
            runs: None,
            jitter: None,
        };
        Ok((scenario, config))
    }
}

impl RunConfig {
    fn configurator(&self, scenario: &Scenario) -> CliResult<Configurator> {
        let mut cfg = PlannerConfig::for_scenario(scenario);
        cfg.goal_radius = self.goal_radius;
        cfg.chi_sign = self.chi_sign.into();
        Ok(Configurator::new(
            cfg,
            self.task,
            scenario.footprint,
            self.engine,
        )?)
    }

    fn execution(&self) -> ExecutionConfig {
        ExecutionConfig {
            time_step: self.engine.time_step,
            goal_radius: self.goal_radius,
            noise: ActuationNoise::fraction_of(&self.task, self.noise),
        }
    }
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| crate::Error::Parse(e.to_string()))?;
    writeln!(w)
        .and_then(|_| w.flush())
        .map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })
}

fn write_trace(path: &Path, trace: &ExecutionTrace) -> CliResult<()> {
    trace.write_csv(create(path)?)?;
    Ok(())
}

fn prepare_out(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

#[derive(Debug, Serialize)]
struct TraceSummary {
    goal_reached: bool,
    collisions: usize,
    steps: usize,
    duration: f64,
    final_pose: (f64, f64, f64),
    states_explored: usize,
    wall_time_planning: f64,
    actuation_noise_sd: (f64, f64),
}

impl From<&ExecutionTrace> for TraceSummary {
    fn from(t: &ExecutionTrace) -> Self {
        let end = t.final_pose();
        TraceSummary {
            goal_reached: t.goal_reached,
            collisions: t.collisions.len(),
            steps: t.poses.len().saturating_sub(1),
            duration: t.poses.last().map_or(0.0, |r| r.t),
            final_pose: (end.position.x, end.position.y, end.heading),
            states_explored: t.states_explored,
            wall_time_planning: t.wall_time_planning,
            actuation_noise_sd: t.actuation_noise_sd,
        }
    }
}

struct Planned {
    plan: Plan,
    states: usize,
    seconds: f64,
}

/// Scans, builds the map, writes `map.dot`, and writes `plan.json` when a
/// plan exists.
fn plan_to(
    scenario: &Scenario,
    config: &RunConfig,
    out: &Path,
    rng: &mut ChaCha8Rng,
) -> CliResult<Planned> {
    let configurator = config.configurator(scenario)?;
    let started = Instant::now();
    let cloud = ray_cast_scan(scenario, &scenario.robot_start, rng)?;
    let mut map = configurator.build_cognitive_map(&cloud)?;
    let plan = configurator.extract_plan(&mut map);
    let seconds = started.elapsed().as_secs_f64();

    let dot = out.join("map.dot");
    write_map_dot(&map, create(&dot)?)?;
    println!(
        "states={} wall_time={:.6}s termination={:?}",
        map.len(),
        seconds,
        map.termination
    );
    let plan = plan?;
    write_plan_json(&plan, create(&out.join("plan.json"))?)?;
    println!("plan={} states={:?}", plan.signature(), plan.states);
    Ok(Planned {
        plan,
        states: map.len(),
        seconds,
    })
}

fn cmd_plan(common: &Common) -> CliResult<()> {
    let (scenario, config) = common.resolve()?;
    prepare_out(&common.out)?;
    write_json(&common.out.join("config_used.json"), &config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    plan_to(&scenario, &config, &common.out, &mut rng).map(|_| ())
}

fn cmd_run(common: &Common, plan_file: Option<&Path>) -> CliResult<()> {
    let (scenario, config) = common.resolve()?;
    prepare_out(&common.out)?;
    write_json(&common.out.join("config_used.json"), &config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let planned = match plan_file {
        Some(path) => {
            let file = File::open(path).map_err(|source| CliError::Io {
                path: path.to_path_buf(),
                source,
            })?;
            Planned {
                plan: read_plan_json(file)?,
                states: 0,
                seconds: 0.0,
            }
        }
        None => plan_to(&scenario, &config, &common.out, &mut rng)?,
    };
    let mut trace = execute_plan(&scenario, &planned.plan, &config.execution(), &mut rng)?;
    trace.states_explored = planned.states;
    trace.wall_time_planning = planned.seconds;
    write_trace(&common.out.join("trace.csv"), &trace)?;
    write_json(
        &common.out.join("summary.json"),
        &TraceSummary::from(&trace),
    )?;
    println!(
        "goal_reached={} collisions={}",
        trace.goal_reached,
        trace.collisions.len()
    );
    Ok(())
}

fn cmd_baseline(common: &Common) -> CliResult<()> {
    let (scenario, config) = common.resolve()?;
    prepare_out(&common.out)?;
    write_json(&common.out.join("config_used.json"), &config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let params = ReactiveParams {
        linear_speed: config.task.linear_speed,
        angular_speed: config.task.angular_speed,
        ..Default::default()
    };
    let trace = reactive_baseline(&scenario, &params, &config.execution(), &mut rng);
    write_trace(&common.out.join("trace.csv"), &trace)?;
    write_json(
        &common.out.join("summary.json"),
        &TraceSummary::from(&trace),
    )?;
    println!(
        "goal_reached={} collisions={}",
        trace.goal_reached,
        trace.collisions.len()
    );
    Ok(())
}

/// Human-readable comparison table for a benchmark report.
pub fn bench_table(report: &BenchReport) -> String {
    let s = &report.summary;
    let t = &report.timing.planning_seconds;
    let mut out = String::new();
    out.push_str(&format!(
        "runs={} seed={} jitter={} noise={}\n",
        s.runs, s.seed, s.obstacle_jitter, s.noise_fraction
    ));
    out.push_str(&format!(
        "plans found {}/{}; states {:.3} +/- {:.3}; planning {:.6} +/- {:.6} s\n",
        s.plans_found, s.runs, s.states.mean, s.states.sd, t.mean, t.sd
    ));
    out.push_str("condition  goal  failures  runs_with_collisions  collision_events\n");
    for (name, c) in [("planner", &s.planner), ("reactive", &s.baseline)] {
        out.push_str(&format!(
            "{name:<9}  {:>4}  {:>8}  {:>20}  {:>16}\n",
            c.goal_reached, c.failures, c.runs_with_collisions, c.collision_events
        ));
    }
    out
}

fn cmd_bench(common: &Common, runs: usize, jitter: f64) -> CliResult<()> {
    let (scenario, mut config) = common.resolve()?;
    if runs == 0 {
        return Err(crate::error::invalid("runs", "must be >= 1").into());
    }
    if !(jitter >= 0.0 && jitter.is_finite()) {
        return Err(crate::error::invalid("jitter", "must be >= 0").into());
    }
    config.runs = Some(runs);
    config.jitter = Some(jitter);
    let out = &common.out;
    prepare_out(out)?;
    write_json(&out.join("config_used.json"), &config)?;
    let bench = BenchConfig {
        runs,
        seed: config.seed,
        obstacle_jitter: jitter,
        noise_fraction: config.noise,
        task_params: config.task,
        engine: config.engine,
        goal_radius: config.goal_radius,
        chi_sign: config.chi_sign.into(),
        reactive: ReactiveParams {
            linear_speed: config.task.linear_speed,
            angular_speed: config.task.angular_speed,
            ..Default::default()
        },
    };
    let report = run_benchmark(&scenario, &bench)?;
    let traces = out.join("traces");
    prepare_out(&traces)?;
    for (i, run) in report.runs.iter().enumerate() {
        if let Some(trace) = &run.planned {
            write_trace(&traces.join(format!("planner_{i:03}.csv")), trace)?;
        }
        write_trace(&traces.join(format!("baseline_{i:03}.csv")), &run.baseline)?;
    }
    write_json(&out.join("summary.json"), &report.summary)?;
    write_json(&out.join("timing.json"), &report.timing)?;
    print!("{}", bench_table(&report));
    Ok(())
}

pub fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Plan(common) => cmd_plan(common),
        Command::Run { common, plan } => cmd_run(common, plan.as_deref()),
        Command::Baseline(common) => cmd_baseline(common),
        Command::Bench {
            common,
            runs,
            jitter,
        } => cmd_bench(common, *runs, *jitter),
    }
}
