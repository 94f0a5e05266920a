//! Internal physics model used to predict task outcomes.
//!
//! The model is rebuilt per task from the point cloud, expressed in the
//! task's start frame with the robot at the origin. Obstacles are the LiDAR
//! returns themselves; the robot is its rectangular footprint, stepped
//! kinematically and checked against every point after each step.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{Footprint, Point2, Pose};
use crate::tasks::{corridor_of, terminated, Disturbance, Task};
use crate::world::{resample_pointcloud, PointCloud};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    /// s
    pub time_step: f64,
    /// Growth of the footprint for collision checks, m.
    pub collision_inflation: f64,
    /// Growth of the footprint when deciding which points are in a task's
    /// way, m.
    pub corridor_clearance: f64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            time_step: 0.05,
            collision_inflation: 0.0,
            corridor_clearance: 0.05,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.time_step > 0.0 && self.time_step <= 0.5) {
            return Err(invalid("time_step", "must be in (0, 0.5]"));
        }
        if !(self.collision_inflation >= 0.0 && self.collision_inflation.is_finite()) {
            return Err(invalid("inflation", "must be >= 0"));
        }
        if !(self.corridor_clearance >= 0.0 && self.corridor_clearance.is_finite()) {
            return Err(invalid("clearance", "must be >= 0"));
        }
        Ok(())
    }
}

/// Obstacle points in the task's ego frame plus the robot model at the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldModel {
    pub obstacle_points: PointCloud,
    pub footprint: Footprint,
    pub engine: EngineConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub end_pose: Pose,
    pub interrupting: Disturbance,
    pub distance_travelled: f64,
    pub steps: usize,
}

impl SimulationResult {
    pub fn interrupted(&self) -> bool {
        !self.interrupting.is_none()
    }
}

/// One row of a simulation trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimStep {
    pub step: usize,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub collided: bool,
}

pub fn point_in_footprint(
    pose: &Pose,
    point: Point2,
    footprint: &Footprint,
    inflation: f64,
) -> bool {
    let local = pose.inverse_transform_point(point);
    local.x.abs() <= footprint.half_length + inflation
        && local.y.abs() <= footprint.half_width + inflation
}

/// Builds the internal model for `task` from a cloud already expressed in
/// the task's start frame. Only points inside the task corridor are kept.
pub fn build_world_model(
    cloud: &PointCloud,
    task: &Task,
    footprint: &Footprint,
    engine: &EngineConfig,
) -> Result<WorldModel> {
    let corridor = corridor_of(&task.at_origin(), footprint, engine.corridor_clearance)?;
    let obstacle_points = resample_pointcloud(cloud, &corridor);
    if obstacle_points
        .points
        .iter()
        .any(|&p| point_in_footprint(&Pose::IDENTITY, p, footprint, 0.0))
    {
        return Err(Error::StartInCollision);
    }
    Ok(WorldModel {
        obstacle_points,
        footprint: *footprint,
        engine: *engine,
    })
}

fn run(
    model: &WorldModel,
    task: &Task,
    mut trace: Option<&mut Vec<SimStep>>,
) -> Result<SimulationResult> {
    let task = task.at_origin();
    let dt = model.engine.time_step;
    let max_steps = task.nominal_steps(dt)? + 1;
    let mut pose = Pose::IDENTITY;
    let mut distance = 0.0;
    let mut steps = 0;
    let mut record = |step: usize, pose: &Pose, collided: bool| {
        if let Some(rows) = trace.as_deref_mut() {
            rows.push(SimStep {
                step,
                x: pose.position.x,
                y: pose.position.y,
                theta: pose.heading,
                collided,
            });
        }
    };
    record(0, &pose, false);
    while steps < max_steps && !terminated(&task, &pose) {
        let next = task.advance(&pose, dt);
        steps += 1;
        let hit = model.obstacle_points.points.iter().copied().find(|&p| {
            point_in_footprint(&next, p, &model.footprint, model.engine.collision_inflation)
        });
        if let Some(contact) = hit {
            record(steps, &next, true);
            return Ok(SimulationResult {
                end_pose: pose,
                interrupting: Disturbance::obstacle(contact),
                distance_travelled: distance,
                steps,
            });
        }
        distance += next.position.distance(pose.position);
        pose = next;
        record(steps, &pose, false);
    }
    Ok(SimulationResult {
        end_pose: pose,
        interrupting: Disturbance::NONE,
        distance_travelled: distance,
        steps,
    })
}

/// Forward-simulates `task` (relocated to the origin) inside `model`.
pub fn simulate_task(model: &WorldModel, task: &Task) -> Result<SimulationResult> {
    run(model, task, None)
}

/// Like [`simulate_task`], also returning every visited pose. On contact the
/// final row holds the penetrating pose with `collided` set.
pub fn simulate_task_traced(
    model: &WorldModel,
    task: &Task,
) -> Result<(SimulationResult, Vec<SimStep>)> {
    let mut rows = Vec::new();
    let result = run(model, task, Some(&mut rows))?;
    Ok((result, rows))
}

pub fn write_sim_trace_csv<W: Write>(rows: &[SimStep], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row).map_err(|e| Error::Parse(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::Parse(e.to_string()))
}

pub fn read_sim_trace_csv<R: std::io::Read>(input: R) -> Result<Vec<SimStep>> {
    csv::Reader::from_reader(input)
        .deserialize()
        .collect::<std::result::Result<Vec<SimStep>, _>>()
        .map_err(|e| Error::Parse(e.to_string()))
}

/// Predicts the outcome of a task from the robot's own view of the world.
///
/// The kinematic engine below is the only implementation in this crate; a
/// rigid-body engine can be slotted in behind the same trait.
pub trait CoreKnowledge {
    /// `cloud` is in the task's start frame.
    fn predict(&self, cloud: &PointCloud, task: &Task) -> Result<SimulationResult>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KinematicEngine {
    pub footprint: Footprint,
    pub config: EngineConfig,
}

impl CoreKnowledge for KinematicEngine {
    fn predict(&self, cloud: &PointCloud, task: &Task) -> Result<SimulationResult> {
        let model = build_world_model(cloud, task, &self.footprint, &self.config)?;
        simulate_task(&model, task)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tasks::{BehaviourKind, TaskParams};
    use approx::assert_abs_diff_eq;

    fn straight(goal_x: f64) -> Task {
        Task::new(
            BehaviourKind::Straight,
            Disturbance::goal(Point2::new(goal_x, 0.0)),
            Pose::IDENTITY,
            TaskParams::default(),
        )
        .unwrap()
    }

    fn model(points: Vec<Point2>, task: &Task) -> Result<WorldModel> {
        build_world_model(
            &PointCloud::new(points),
            task,
            &Footprint::default(),
            &EngineConfig::default(),
        )
    }

    #[test]
    fn empty_cloud_builds_empty_model() {
        let t = straight(1.0);
        assert!(model(vec![], &t).unwrap().obstacle_points.is_empty());
    }

    #[test]
    fn point_at_origin_is_start_collision() {
        let t = straight(1.0);
        assert_eq!(
            model(vec![Point2::ORIGIN], &t),
            Err(Error::StartInCollision)
        );
    }

    #[test]
    fn free_straight_reaches_the_end() {
        let t = straight(1.0);
        let r = simulate_task(&model(vec![], &t).unwrap(), &t).unwrap();
        assert!(!r.interrupted());
        assert_abs_diff_eq!(r.distance_travelled, 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(r.end_pose.position.x, 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(r.end_pose.position.y, 0.0);
        assert_eq!(r.end_pose.heading, 0.0);
    }

    #[test]
    fn first_contact_distance() {
        // front edge at x + 0.1 touches the point at x = 0.4
        let t = straight(1.0);
        let r = simulate_task(&model(vec![Point2::new(0.5, 0.0)], &t).unwrap(), &t).unwrap();
        assert!(r.interrupted());
        assert_eq!(r.interrupting.location, Point2::new(0.5, 0.0));
        assert!((r.distance_travelled - 0.4).abs() <= 0.2 * 0.05 + 1e-9);
        assert!(!point_in_footprint(
            &r.end_pose,
            Point2::new(0.5, 0.0),
            &Footprint::default(),
            0.0
        ));
    }

    #[test]
    fn turn_clear_of_swept_disc() {
        let t = Task::new(
            BehaviourKind::LeftTurn,
            Disturbance::goal(Point2::new(1.0, 0.0)),
            Pose::IDENTITY,
            TaskParams::default(),
        )
        .unwrap();
        // just outside the circumradius of 0.125
        let m = model(vec![Point2::new(0.0, 0.13), Point2::new(-0.13, 0.0)], &t).unwrap();
        let r = simulate_task(&m, &t).unwrap();
        assert!(!r.interrupted());
        assert_eq!(r.distance_travelled, 0.0);
    }

    #[test]
    fn footprint_predicate_examples() {
        let fp = Footprint::default();
        let pose = Pose::new(0.4, -0.3, 2.0);
        assert!(point_in_footprint(&pose, pose.position, &fp, 0.0));
        let far = pose.transform_point(Point2::new(2.0 * fp.circumradius() + 0.01, 0.0));
        assert!(!point_in_footprint(&pose, far, &fp, 0.0));
    }

    #[test]
    fn trace_round_trips_through_csv() {
        let t = straight(0.3);
        let (r, rows) = simulate_task_traced(&model(vec![], &t).unwrap(), &t).unwrap();
        assert_eq!(rows.len(), r.steps + 1);
        let mut buf = Vec::new();
        write_sim_trace_csv(&rows, &mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("step,x,y,theta,collided"));
        assert_eq!(read_sim_trace_csv(&buf[..]).unwrap(), rows);
    }
}
