use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    execute_plan, reactive_baseline, ActuationNoise, ExecutionConfig, ExecutionTrace,
    ReactiveParams,
};
use crate::configurator::{Configurator, PlannerConfig};
use crate::core_sim::EngineConfig;
use crate::error::Result;
use crate::tasks::TaskParams;
use crate::world::{ray_cast_scan, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub runs: usize,
    pub seed: u64,
    /// Uniform per-obstacle displacement bound, m.
    pub obstacle_jitter: f64,
    /// Actuation noise as a fraction of the nominal speeds.
    pub noise_fraction: f64,
    pub task_params: TaskParams,
    pub engine: EngineConfig,
    pub goal_radius: f64,
    pub chi_sign: crate::configurator::ChiSign,
    pub reactive: ReactiveParams,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            runs: 10,
            seed: 0,
            obstacle_jitter: 0.02,
            noise_fraction: 0.05,
            task_params: TaskParams::default(),
            engine: EngineConfig::default(),
            goal_radius: 0.05,
            chi_sign: Default::default(),
            reactive: ReactiveParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
}

impl MeanSd {
    /// Sample standard deviation; zero for fewer than two values.
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return MeanSd { mean: 0.0, sd: 0.0 };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        MeanSd { mean, sd }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSummary {
    pub runs: usize,
    pub goal_reached: usize,
    pub runs_with_collisions: usize,
    pub collision_events: usize,
    /// Runs that missed the goal or touched an obstacle.
    pub failures: usize,
    pub collisions_per_run: Vec<usize>,
}

impl ConditionSummary {
    fn of(traces: &[Option<&ExecutionTrace>]) -> Self {
        let collisions_per_run: Vec<usize> = traces
            .iter()
            .map(|t| t.map_or(0, |t| t.collisions.len()))
            .collect();
        ConditionSummary {
            runs: traces.len(),
            goal_reached: traces
                .iter()
                .filter(|t| t.is_some_and(|t| t.goal_reached))
                .count(),
            runs_with_collisions: collisions_per_run.iter().filter(|&&c| c > 0).count(),
            collision_events: collisions_per_run.iter().sum(),
            failures: traces
                .iter()
                .filter(|t| t.is_none_or(|t| !t.goal_reached || t.collided()))
                .count(),
            collisions_per_run,
        }
    }
}

/// Everything in the benchmark that is a pure function of the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSummary {
    pub runs: usize,
    pub seed: u64,
    pub obstacle_jitter: f64,
    pub noise_fraction: f64,
    pub plans_found: usize,
    pub states: MeanSd,
    pub planner: ConditionSummary,
    pub baseline: ConditionSummary,
}

/// Wall-clock planning time (map construction plus plan extraction), s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingSummary {
    pub planning_seconds: MeanSd,
    pub per_run_seconds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRun {
    pub scenario: Scenario,
    pub states: usize,
    pub plan_signature: Option<String>,
    pub planned: Option<ExecutionTrace>,
    pub baseline: ExecutionTrace,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub summary: BenchSummary,
    pub timing: TimingSummary,
    pub runs: Vec<BenchRun>,
}

/// Runs the planner and the reactive baseline `runs` times on jittered copies
/// of `scenario`. Run `i` draws all its randomness from stream `i` of a
/// generator seeded with `seed`.
pub fn run_benchmark(scenario: &Scenario, config: &BenchConfig) -> Result<BenchReport> {
    let noise = ActuationNoise::fraction_of(&config.task_params, config.noise_fraction);
    let exec = ExecutionConfig {
        time_step: config.engine.time_step,
        goal_radius: config.goal_radius,
        noise,
    };
    let mut runs = Vec::with_capacity(config.runs);
    let mut seconds = Vec::with_capacity(config.runs);
    for i in 0..config.runs {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(i as u64);
        let world = scenario.jittered(config.obstacle_jitter, &mut rng);

        let mut planner_cfg = PlannerConfig::for_scenario(&world);
        planner_cfg.goal_radius = config.goal_radius;
        planner_cfg.chi_sign = config.chi_sign;
        let configurator = Configurator::new(
            planner_cfg,
            config.task_params,
            world.footprint,
            config.engine,
        )?;

        let started = Instant::now();
        let cloud = ray_cast_scan(&world, &world.robot_start, &mut rng)?;
        let mut map = configurator.build_cognitive_map(&cloud)?;
        let plan = configurator.extract_plan(&mut map).ok();
        seconds.push(started.elapsed().as_secs_f64());

        let planned = match &plan {
            Some(plan) => {
                let mut trace = execute_plan(&world, plan, &exec, &mut rng)?;
                trace.states_explored = map.len();
                trace.wall_time_planning = *seconds.last().expect("pushed above");
                Some(trace)
            }
            None => None,
        };
        let baseline = reactive_baseline(&world, &config.reactive, &exec, &mut rng);
        runs.push(BenchRun {
            scenario: world,
            states: map.len(),
            plan_signature: plan.as_ref().map(|p| p.signature()),
            planned,
            baseline,
        });
    }

    let planned: Vec<Option<&ExecutionTrace>> = runs.iter().map(|r| r.planned.as_ref()).collect();
    let baseline: Vec<Option<&ExecutionTrace>> = runs.iter().map(|r| Some(&r.baseline)).collect();
    let states: Vec<f64> = runs.iter().map(|r| r.states as f64).collect();
    let summary = BenchSummary {
        runs: config.runs,
        seed: config.seed,
        obstacle_jitter: config.obstacle_jitter,
        noise_fraction: config.noise_fraction,
        plans_found: runs.iter().filter(|r| r.plan_signature.is_some()).count(),
        states: MeanSd::of(&states),
        planner: ConditionSummary::of(&planned),
        baseline: ConditionSummary::of(&baseline),
    };
    let timing = TimingSummary {
        planning_seconds: MeanSd::of(&seconds),
        per_run_seconds: seconds,
    };
    Ok(BenchReport {
        summary,
        timing,
        runs,
    })
}
