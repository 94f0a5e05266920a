//! Runs plans and the reactive baseline in the ground-truth world, and the
//! seeded benchmark that compares them.

mod baseline;
mod bench;

use std::io::{Read, Write};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

pub use baseline::{reactive_baseline, ReactiveParams};
pub use bench::{
    run_benchmark, BenchConfig, BenchReport, BenchRun, BenchSummary, ConditionSummary, MeanSd,
    TimingSummary,
};

use crate::configurator::Plan;
use crate::error::{Error, Result};
use crate::geometry::{Point2, Pose};
use crate::tasks::{integrate, terminated, Disturbance, Task, TaskParams};
use crate::world::Scenario;

/// Additive Gaussian noise on the commanded speeds while the robot moves.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ActuationNoise {
    /// m/s
    pub linear_sd: f64,
    /// rad/s
    pub angular_sd: f64,
}

impl ActuationNoise {
    pub const NONE: ActuationNoise = ActuationNoise {
        linear_sd: 0.0,
        angular_sd: 0.0,
    };

    /// Noise with standard deviations at `fraction` of the nominal speeds.
    pub fn fraction_of(params: &TaskParams, fraction: f64) -> Self {
        Self {
            linear_sd: fraction * params.linear_speed,
            angular_sd: fraction * params.angular_speed,
        }
    }

    pub fn is_none(&self) -> bool {
        self.linear_sd == 0.0 && self.angular_sd == 0.0
    }

    fn perturb<R: Rng + ?Sized>(&self, (v, w): (f64, f64), rng: &mut R) -> (f64, f64) {
        if self.is_none() || (v == 0.0 && w == 0.0) {
            return (v, w);
        }
        let dv = Normal::new(0.0, self.linear_sd)
            .expect("finite sd")
            .sample(rng);
        let dw = Normal::new(0.0, self.angular_sd)
            .expect("finite sd")
            .sample(rng);
        (v + dv, w + dw)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExecutionConfig {
    /// s
    pub time_step: f64,
    /// m
    pub goal_radius: f64,
    pub noise: ActuationNoise,
}

impl Default for ExecutionConfig {
    fn default() -> Self {
        Self {
            time_step: 0.05,
            goal_radius: 0.05,
            noise: ActuationNoise::NONE,
        }
    }
}

/// One row of an execution trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub collided: bool,
}

impl TraceRow {
    pub fn pose(&self) -> Pose {
        Pose {
            position: Point2::new(self.x, self.y),
            heading: self.theta,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Contact {
    pub t: f64,
    pub point: Point2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionTrace {
    pub poses: Vec<TraceRow>,
    /// Onsets of contact between the footprint and an obstacle.
    pub collisions: Vec<Contact>,
    pub goal_reached: bool,
    pub wall_time_planning: f64,
    pub states_explored: usize,
    pub actuation_noise_sd: (f64, f64),
}

impl ExecutionTrace {
    pub fn final_pose(&self) -> Pose {
        self.poses.last().map(TraceRow::pose).unwrap_or_default()
    }

    pub fn collided(&self) -> bool {
        !self.collisions.is_empty()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.poses {
            w.serialize(row).map_err(|e| Error::Parse(e.to_string()))?;
        }
        w.flush().map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Vec<TraceRow>> {
        csv::Reader::from_reader(input)
            .deserialize()
            .collect::<std::result::Result<Vec<TraceRow>, _>>()
            .map_err(|e| Error::Parse(e.to_string()))
    }
}

/// Returns a point shared by the robot at `pose` and some obstacle, if any.
pub fn contact_point(scenario: &Scenario, pose: &Pose) -> Option<Point2> {
    let corners = scenario.footprint.corners(pose, 0.0);
    for obstacle in &scenario.obstacles {
        if !obstacle.overlaps(&corners) {
            continue;
        }
        let inside_robot = obstacle.vertices().iter().copied().find(|&v| {
            let local = pose.inverse_transform_point(v);
            local.x.abs() <= scenario.footprint.half_length
                && local.y.abs() <= scenario.footprint.half_width
        });
        let point = inside_robot
            .or_else(|| corners.iter().copied().find(|&c| obstacle.contains(c)))
            .or_else(|| {
                (0..4).find_map(|i| {
                    obstacle.edges().find_map(|(a, b)| {
                        crate::geometry::segment_intersection(
                            corners[i],
                            corners[(i + 1) % 4],
                            a,
                            b,
                        )
                    })
                })
            });
        // overlap always yields one of the three; fall back to the pose itself
        return Some(point.unwrap_or(pose.position));
    }
    None
}

/// Steps the robot through the ground-truth world and logs contacts.
struct Recorder<'a> {
    scenario: &'a Scenario,
    dt: f64,
    t: f64,
    pose: Pose,
    in_contact: bool,
    rows: Vec<TraceRow>,
    collisions: Vec<Contact>,
}

impl<'a> Recorder<'a> {
    fn new(scenario: &'a Scenario, dt: f64) -> Self {
        let pose = scenario.robot_start;
        let contact = contact_point(scenario, &pose);
        let mut rec = Recorder {
            scenario,
            dt,
            t: 0.0,
            pose,
            in_contact: contact.is_some(),
            rows: Vec::new(),
            collisions: Vec::new(),
        };
        if let Some(point) = contact {
            rec.collisions.push(Contact { t: 0.0, point });
        }
        rec.push_row();
        rec
    }

    fn push_row(&mut self) {
        self.rows.push(TraceRow {
            t: self.t,
            x: self.pose.position.x,
            y: self.pose.position.y,
            theta: self.pose.heading,
            collided: self.in_contact,
        });
    }

    fn step(&mut self, linear: f64, angular: f64) {
        self.pose = integrate(&self.pose, linear, angular, self.dt);
        self.t += self.dt;
        let contact = contact_point(self.scenario, &self.pose);
        if let (Some(point), false) = (contact, self.in_contact) {
            self.collisions.push(Contact { t: self.t, point });
        }
        self.in_contact = contact.is_some();
        self.push_row();
    }

    fn finish(self, goal_radius: f64, noise: ActuationNoise) -> ExecutionTrace {
        let goal_reached = self.pose.position.distance(self.scenario.goal) <= goal_radius;
        ExecutionTrace {
            poses: self.rows,
            collisions: self.collisions,
            goal_reached,
            wall_time_planning: 0.0,
            states_explored: 0,
            actuation_noise_sd: (noise.linear_sd, noise.angular_sd),
        }
    }
}

/// Executes the plan's tasks one after another, closed-loop, in the
/// ground-truth world. Each task is re-anchored on the goal as seen from
/// wherever the robot actually is when it starts.
pub fn execute_plan<R: Rng + ?Sized>(
    scenario: &Scenario,
    plan: &Plan,
    config: &ExecutionConfig,
    rng: &mut R,
) -> Result<ExecutionTrace> {
    let mut rec = Recorder::new(scenario, config.time_step);
    for step in &plan.steps {
        let start = rec.pose;
        let goal = Disturbance::goal(start.inverse_transform_point(scenario.goal));
        let task = Task::new(step.kind, goal, start, step.params)?;
        let budget = 3 * task.nominal_steps(config.time_step)? + 10;
        let mut n = 0;
        while !terminated(&task, &rec.pose) && n < budget {
            let command = task.commanded_motor(&rec.pose, config.time_step);
            let (v, w) = config.noise.perturb(command, rng);
            rec.step(v, w);
            n += 1;
        }
    }
    Ok(rec.finish(config.goal_radius, config.noise))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::configurator::Configurator;
    use crate::geometry::{ConvexPolygon, Footprint};
    use crate::world::{scan_noiseless, LidarModel};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn empty() -> Scenario {
        Scenario::new(
            Pose::IDENTITY,
            Footprint::default(),
            Point2::new(1.0, 0.0),
            vec![],
            LidarModel::default(),
        )
        .unwrap()
    }

    fn plan_for(scenario: &Scenario) -> Plan {
        let c = Configurator::for_scenario(scenario).unwrap();
        let cloud = scan_noiseless(scenario, &scenario.robot_start).unwrap();
        let mut map = c.build_cognitive_map(&cloud).unwrap();
        c.extract_plan(&mut map).unwrap()
    }

    #[test]
    fn straight_plan_in_empty_world() {
        let s = empty();
        let trace = execute_plan(
            &s,
            &plan_for(&s),
            &ExecutionConfig::default(),
            &mut ChaCha8Rng::seed_from_u64(0),
        )
        .unwrap();
        assert!(trace.goal_reached);
        assert!(!trace.collided());
        assert!((trace.final_pose().position.x - 1.0).abs() < 1e-9);
    }

    #[test]
    fn noiseless_execution_follows_the_prediction() {
        let s = Scenario::overtaking();
        let plan = plan_for(&s);
        let trace = execute_plan(
            &s,
            &plan,
            &ExecutionConfig::default(),
            &mut ChaCha8Rng::seed_from_u64(0),
        )
        .unwrap();
        assert!(trace.goal_reached);
        assert!(!trace.collided());
        let predicted = plan.steps.last().unwrap().end;
        let actual = trace.final_pose();
        assert!(actual.position.distance(predicted.position) < 1e-6);
        assert!(crate::geometry::normalize_angle(actual.heading - predicted.heading).abs() < 1e-6);
    }

    #[test]
    fn heavy_noise_sometimes_touches_the_box() {
        let s = Scenario::overtaking();
        let plan = plan_for(&s);
        let config = ExecutionConfig {
            noise: ActuationNoise::fraction_of(&TaskParams::default(), 1.0),
            ..Default::default()
        };
        let touched = (0..20)
            .filter(|&seed| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                execute_plan(&s, &plan, &config, &mut rng)
                    .unwrap()
                    .collided()
            })
            .count();
        assert!(touched > 0);
    }

    #[test]
    fn contact_onset_is_logged_once() {
        let wall = ConvexPolygon::rectangle(Point2::new(0.3, -1.0), Point2::new(0.4, 1.0)).unwrap();
        let s = Scenario::new(
            Pose::IDENTITY,
            Footprint::default(),
            Point2::new(1.0, 0.0),
            vec![wall],
            LidarModel::default(),
        )
        .unwrap();
        let mut rec = Recorder::new(&s, 0.05);
        for _ in 0..40 {
            rec.step(0.2, 0.0);
        }
        let trace = rec.finish(0.05, ActuationNoise::NONE);
        assert_eq!(trace.collisions.len(), 1);
        let first = trace.poses.iter().find(|r| r.collided).unwrap();
        assert!((first.x + 0.1 - 0.3).abs() < 0.011);
        assert!(contact_point(&s, &Pose::IDENTITY).is_none());
    }

    #[test]
    fn baseline_reaches_goal_in_empty_world() {
        let trace = reactive_baseline(
            &empty(),
            &ReactiveParams::default(),
            &ExecutionConfig::default(),
            &mut ChaCha8Rng::seed_from_u64(1),
        );
        assert!(trace.goal_reached);
        assert!(!trace.collided());
    }

    #[test]
    fn obstacle_behind_is_ignored_by_baseline() {
        let behind =
            ConvexPolygon::rectangle(Point2::new(-0.6, -0.2), Point2::new(-0.4, 0.2)).unwrap();
        let s = Scenario::new(
            Pose::IDENTITY,
            Footprint::default(),
            Point2::new(1.0, 0.0),
            vec![behind],
            LidarModel::default(),
        )
        .unwrap();
        let params = ReactiveParams::default();
        let config = ExecutionConfig::default();
        let a = reactive_baseline(&s, &params, &config, &mut ChaCha8Rng::seed_from_u64(1));
        let b = reactive_baseline(
            &empty(),
            &params,
            &config,
            &mut ChaCha8Rng::seed_from_u64(1),
        );
        assert_eq!(a.poses, b.poses);
    }

    #[test]
    fn baseline_fails_the_overtaking_world() {
        let trace = reactive_baseline(
            &Scenario::overtaking(),
            &ReactiveParams::default(),
            &ExecutionConfig::default(),
            &mut ChaCha8Rng::seed_from_u64(1),
        );
        assert!(!trace.goal_reached || trace.collided());
    }

    #[test]
    fn single_run_has_zero_spread() {
        let config = BenchConfig {
            runs: 1,
            obstacle_jitter: 0.0,
            ..Default::default()
        };
        let report = run_benchmark(&Scenario::overtaking(), &config).unwrap();
        assert_eq!(report.summary.states.sd, 0.0);
        assert_eq!(report.timing.planning_seconds.sd, 0.0);
        assert_eq!(report.runs[0].plan_signature.as_deref(), Some("RSLS"));
    }

    #[test]
    fn benchmark_is_reproducible() {
        let config = BenchConfig {
            runs: 3,
            seed: 7,
            ..Default::default()
        };
        let run = || {
            let mut report = run_benchmark(&Scenario::overtaking(), &config).unwrap();
            for r in &mut report.runs {
                if let Some(t) = &mut r.planned {
                    t.wall_time_planning = 0.0;
                }
            }
            report
        };
        let (a, b) = (run(), run());
        assert_eq!(a.summary, b.summary);
        assert_eq!(a.runs, b.runs);
    }

    #[test]
    fn trace_csv_round_trip() {
        let s = Scenario::overtaking();
        let trace = execute_plan(
            &s,
            &plan_for(&s),
            &ExecutionConfig::default(),
            &mut ChaCha8Rng::seed_from_u64(0),
        )
        .unwrap();
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        assert!(buf.starts_with(b"t,x,y,theta,collided\n"));
        assert_eq!(ExecutionTrace::read_csv(&buf[..]).unwrap(), trace.poses);
    }

    #[test]
    fn mean_sd() {
        let m = MeanSd::of(&[1.0, 2.0, 3.0]);
        assert_eq!(m.mean, 2.0);
        assert_eq!(m.sd, 1.0);
        assert_eq!(MeanSd::of(&[4.0]), MeanSd { mean: 4.0, sd: 0.0 });
    }
}
