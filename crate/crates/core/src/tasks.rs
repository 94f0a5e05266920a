//! Closed-loop behaviours.
//!
//! A task is a controller contingent on one disturbance: it reads the error
//! (bearing and range to the disturbance) and drives the motors until its
//! termination condition holds. Straight tasks stop at the closest approach
//! of their heading line to the disturbance. Turns rotate in place by the
//! configured sidestep angle, or further until they face the disturbance
//! when it lies beyond that angle on their side.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{normalize_angle, Footprint, Point2, Pose};
use crate::world::TaskCorridor;

/// Tolerance on progress (m or rad) below which a task counts as finished.
pub const TERMINATION_EPS: f64 = 1e-9;

/// Hard cap on integration steps for a single task.
pub const MAX_TASK_STEPS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BehaviourKind {
    Straight,
    LeftTurn,
    RightTurn,
}

impl BehaviourKind {
    pub fn is_turn(self) -> bool {
        !matches!(self, BehaviourKind::Straight)
    }

    pub fn mirrored(self) -> BehaviourKind {
        match self {
            BehaviourKind::Straight => BehaviourKind::Straight,
            BehaviourKind::LeftTurn => BehaviourKind::RightTurn,
            BehaviourKind::RightTurn => BehaviourKind::LeftTurn,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            BehaviourKind::Straight => "S",
            BehaviourKind::LeftTurn => "L",
            BehaviourKind::RightTurn => "R",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DisturbanceKind {
    Goal,
    Obstacle,
    None,
}

/// A disturbance and where it sits, in the ego frame of the start pose of the
/// task that observes it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disturbance {
    pub kind: DisturbanceKind,
    pub location: Point2,
}

impl Disturbance {
    pub const NONE: Disturbance = Disturbance {
        kind: DisturbanceKind::None,
        location: Point2::ORIGIN,
    };

    pub fn goal(location: Point2) -> Self {
        Self {
            kind: DisturbanceKind::Goal,
            location,
        }
    }

    pub fn obstacle(location: Point2) -> Self {
        Self {
            kind: DisturbanceKind::Obstacle,
            location,
        }
    }

    pub fn is_none(&self) -> bool {
        self.kind == DisturbanceKind::None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskParams {
    /// m/s
    pub linear_speed: f64,
    /// rad/s
    pub angular_speed: f64,
    /// Sidestep rotation of a turn, rad.
    pub turn_angle: f64,
    /// Longest distance a straight task may cover, m.
    pub max_travel: f64,
}

impl Default for TaskParams {
    fn default() -> Self {
        Self {
            linear_speed: 0.2,
            angular_speed: 1.0,
            turn_angle: FRAC_PI_4,
            max_travel: 2.0,
        }
    }
}

impl TaskParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.linear_speed > 0.0 && self.linear_speed.is_finite()) {
            return Err(invalid("speed", "must be > 0"));
        }
        if !(self.angular_speed > 0.0 && self.angular_speed.is_finite()) {
            return Err(invalid("angular_speed", "must be > 0"));
        }
        if !(self.turn_angle > 0.0 && self.turn_angle <= PI) {
            return Err(invalid("turn_angle", "must be in (0, pi]"));
        }
        // zero is allowed: the planning root is a straight task observed at
        // the instant planning starts
        if self.max_travel.is_nan() || self.max_travel < 0.0 {
            return Err(invalid("max_travel", "must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub kind: BehaviourKind,
    pub contingent: Disturbance,
    pub start_pose: Pose,
    pub params: TaskParams,
}

/// Error seen by the controller and the motor output it produces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlSignal {
    pub error_bearing: f64,
    pub error_range: f64,
    pub linear: f64,
    pub angular: f64,
}

impl ControlSignal {
    pub fn motor_is_zero(&self) -> bool {
        self.linear == 0.0 && self.angular == 0.0
    }
}

impl Task {
    pub fn new(
        kind: BehaviourKind,
        contingent: Disturbance,
        start_pose: Pose,
        params: TaskParams,
    ) -> Result<Self> {
        if contingent.is_none() {
            return Err(invalid(
                "contingent",
                "a task needs a disturbance to counteract",
            ));
        }
        if !contingent.location.is_finite() {
            return Err(invalid("contingent", "non-finite location"));
        }
        params.validate()?;
        Ok(Self {
            kind,
            contingent,
            start_pose,
            params,
        })
    }

    /// Same task started from the origin of its own ego frame.
    pub fn at_origin(&self) -> Task {
        Task {
            start_pose: Pose::IDENTITY,
            ..*self
        }
    }

    /// Reflection across the start pose's heading axis.
    pub fn mirrored(&self) -> Task {
        Task {
            kind: self.kind.mirrored(),
            contingent: Disturbance {
                location: self.contingent.location.mirrored(),
                ..self.contingent
            },
            ..*self
        }
    }

    /// How far the task runs before terminating: metres for straight tasks,
    /// radians for turns.
    pub fn target(&self) -> f64 {
        let loc = self.contingent.location;
        match self.kind {
            BehaviourKind::Straight => loc.x.max(0.0).min(self.params.max_travel),
            BehaviourKind::LeftTurn | BehaviourKind::RightTurn => {
                let sign = self.turn_sign();
                let side_bearing = if loc == Point2::ORIGIN {
                    0.0
                } else {
                    sign * loc.bearing()
                };
                if side_bearing > self.params.turn_angle {
                    side_bearing
                } else {
                    self.params.turn_angle
                }
            }
        }
    }

    fn turn_sign(&self) -> f64 {
        match self.kind {
            BehaviourKind::LeftTurn => 1.0,
            BehaviourKind::RightTurn => -1.0,
            BehaviourKind::Straight => 0.0,
        }
    }

    /// Progress made at `pose`, in the same units as [`Task::target`].
    pub fn progress(&self, pose: &Pose) -> f64 {
        match self.kind {
            BehaviourKind::Straight => {
                (pose.position - self.start_pose.position).dot(self.start_pose.direction())
            }
            _ => {
                let mut acc =
                    normalize_angle(self.turn_sign() * (pose.heading - self.start_pose.heading));
                // keeps small overshoots past pi from wrapping to a negative rotation
                if acc < -FRAC_PI_2 {
                    acc += 2.0 * PI;
                }
                acc
            }
        }
    }

    fn nominal_rate(&self) -> f64 {
        match self.kind {
            BehaviourKind::Straight => self.params.linear_speed,
            _ => self.params.angular_speed,
        }
    }

    /// Motor command for one step of `dt` that does not run past the
    /// termination point under ideal kinematics.
    pub fn commanded_motor(&self, pose: &Pose, dt: f64) -> (f64, f64) {
        let signal = control_step(self, pose);
        if signal.motor_is_zero() {
            return (0.0, 0.0);
        }
        let remaining = self.target() - self.progress(pose);
        let rate = (remaining / dt).min(self.nominal_rate());
        match self.kind {
            BehaviourKind::Straight => (rate, 0.0),
            _ => (0.0, self.turn_sign() * rate),
        }
    }

    /// Pose after one ideal control step.
    pub fn advance(&self, pose: &Pose, dt: f64) -> Pose {
        let (v, w) = self.commanded_motor(pose, dt);
        integrate(pose, v, w, dt)
    }

    /// Number of ideal steps the task needs, erroring when it cannot finish.
    pub fn nominal_steps(&self, dt: f64) -> Result<usize> {
        let target = self.target();
        if !target.is_finite() {
            return Err(Error::UnboundedTask(format!(
                "{:?} has no finite termination point",
                self.kind
            )));
        }
        let steps = (target / (self.nominal_rate() * dt)).ceil();
        if steps.is_nan() || steps > MAX_TASK_STEPS as f64 {
            return Err(Error::UnboundedTask(format!(
                "{:?} needs more than {MAX_TASK_STEPS} steps",
                self.kind
            )));
        }
        Ok(steps as usize)
    }
}

/// Exact unicycle integration over `dt`.
pub fn integrate(pose: &Pose, linear: f64, angular: f64, dt: f64) -> Pose {
    let h = pose.heading;
    if angular.abs() < 1e-12 {
        let d = Point2::new(h.cos(), h.sin()) * (linear * dt);
        return Pose {
            position: pose.position + d,
            heading: pose.heading,
        };
    }
    let h1 = h + angular * dt;
    let r = linear / angular;
    let offset = Point2::new(r * (h1.sin() - h.sin()), -r * (h1.cos() - h.cos()));
    Pose {
        position: pose.position + offset,
        heading: normalize_angle(h1),
    }
}

pub fn terminated(task: &Task, current_pose: &Pose) -> bool {
    task.progress(current_pose) >= task.target() - TERMINATION_EPS
}

/// One evaluation of the task's controller at `current_pose`.
pub fn control_step(task: &Task, current_pose: &Pose) -> ControlSignal {
    let world_loc = task.start_pose.transform_point(task.contingent.location);
    let rel = current_pose.inverse_transform_point(world_loc);
    let (linear, angular) = if terminated(task, current_pose) {
        (0.0, 0.0)
    } else {
        match task.kind {
            BehaviourKind::Straight => (task.params.linear_speed, 0.0),
            BehaviourKind::LeftTurn => (0.0, task.params.angular_speed),
            BehaviourKind::RightTurn => (0.0, -task.params.angular_speed),
        }
    };
    ControlSignal {
        error_bearing: if rel == Point2::ORIGIN {
            0.0
        } else {
            rel.bearing()
        },
        error_range: rel.norm(),
        linear,
        angular,
    }
}

/// Ideal poses from the start pose to termination, one per time step.
pub fn trajectory_of(task: &Task, time_step: f64) -> Result<Vec<Pose>> {
    let steps = task.nominal_steps(time_step)?;
    let mut poses = Vec::with_capacity(steps + 1);
    let mut pose = task.start_pose;
    poses.push(pose);
    // one spare step absorbs rounding in the step count
    for _ in 0..=steps {
        if terminated(task, &pose) {
            break;
        }
        pose = task.advance(&pose, time_step);
        poses.push(pose);
    }
    Ok(poses)
}

/// Part of the plane the task's footprint may sweep, grown by `clearance`.
pub fn corridor_of(task: &Task, footprint: &Footprint, clearance: f64) -> Result<TaskCorridor> {
    let target = task.target();
    if !target.is_finite() {
        return Err(Error::UnboundedTask(format!(
            "{:?} has no finite termination point",
            task.kind
        )));
    }
    Ok(match task.kind {
        BehaviourKind::Straight => TaskCorridor::Strip {
            origin: task.start_pose,
            length: target,
            half_width: footprint.half_width + clearance,
            end_margin: footprint.half_length + clearance,
        },
        _ => TaskCorridor::Disc {
            centre: task.start_pose.position,
            radius: footprint.circumradius() + clearance,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn goal_task(kind: BehaviourKind, goal: Point2, params: TaskParams) -> Task {
        Task::new(kind, Disturbance::goal(goal), Pose::IDENTITY, params).unwrap()
    }

    #[test]
    fn task_requires_a_disturbance() {
        assert!(Task::new(
            BehaviourKind::Straight,
            Disturbance::NONE,
            Pose::IDENTITY,
            TaskParams::default()
        )
        .is_err());
    }

    #[test]
    fn straight_stops_at_termination_point() {
        let t = goal_task(
            BehaviourKind::Straight,
            Point2::new(1.0, 0.0),
            TaskParams::default(),
        );
        let s = control_step(&t, &Pose::new(1.0, 0.0, 0.0));
        assert!(s.motor_is_zero());
        assert!(terminated(&t, &Pose::new(1.0, 0.0, 0.0)));
        assert!(!terminated(&t, &Pose::IDENTITY));
        let s = control_step(&t, &Pose::IDENTITY);
        assert_eq!((s.linear, s.angular), (0.2, 0.0));
        assert_abs_diff_eq!(s.error_range, 1.0);
    }

    #[test]
    fn offset_goal_terminates_at_closest_approach() {
        let t = goal_task(
            BehaviourKind::Straight,
            Point2::new(0.7, 0.4),
            TaskParams::default(),
        );
        assert_abs_diff_eq!(t.target(), 0.7);
        assert!(!terminated(&t, &Pose::new(0.69, 0.0, 0.0)));
        assert!(terminated(&t, &Pose::new(0.7, 0.0, 0.0)));
        let traj = trajectory_of(&t, 0.05).unwrap();
        assert_abs_diff_eq!(traj.last().unwrap().position.x, 0.7, epsilon = 1e-9);
    }

    #[test]
    fn left_turn_runs_from_rest() {
        let params = TaskParams {
            turn_angle: FRAC_PI_2,
            ..TaskParams::default()
        };
        let t = goal_task(BehaviourKind::LeftTurn, Point2::new(1.0, 0.0), params);
        let s = control_step(&t, &Pose::IDENTITY);
        assert_eq!((s.linear, s.angular), (0.0, 1.0));
    }

    #[test]
    fn right_turn_stops_at_ninety_degrees() {
        let params = TaskParams {
            turn_angle: FRAC_PI_2,
            ..TaskParams::default()
        };
        let t = goal_task(BehaviourKind::RightTurn, Point2::new(1.0, 0.0), params);
        let s = control_step(&t, &Pose::new(0.0, 0.0, -80f64.to_radians()));
        assert_eq!((s.linear, s.angular), (0.0, -1.0));
        assert!(control_step(&t, &Pose::new(0.0, 0.0, -FRAC_PI_2)).motor_is_zero());

        // integrate under the stepper: the stop angle lands within one step
        let dt = 0.05;
        let mut pose = Pose::IDENTITY;
        let mut steps = 0;
        while !control_step(&t, &pose).motor_is_zero() {
            pose = integrate(&pose, 0.0, control_step(&t, &pose).angular, dt);
            steps += 1;
            assert!(steps < 100);
        }
        assert!((pose.heading + FRAC_PI_2).abs() <= params.angular_speed * dt);
    }

    #[test]
    fn turn_faces_a_disturbance_beyond_the_sidestep_angle() {
        let t = goal_task(
            BehaviourKind::LeftTurn,
            Point2::new(0.0, 0.5),
            TaskParams::default(),
        );
        assert_abs_diff_eq!(t.target(), FRAC_PI_2);
        // on the other side the turn only sidesteps
        let t = goal_task(
            BehaviourKind::RightTurn,
            Point2::new(0.0, 0.5),
            TaskParams::default(),
        );
        assert_abs_diff_eq!(t.target(), FRAC_PI_4);
    }

    #[test]
    fn left_turn_trajectory_heading_is_monotone() {
        let params = TaskParams {
            turn_angle: FRAC_PI_2,
            ..TaskParams::default()
        };
        let t = goal_task(BehaviourKind::LeftTurn, Point2::new(1.0, 0.0), params);
        let traj = trajectory_of(&t, 0.05).unwrap();
        assert!(traj.windows(2).all(|w| w[1].heading > w[0].heading));
        let last = traj.last().unwrap();
        assert!((last.heading - FRAC_PI_2).abs() <= 1.0 * 0.05);
        assert!(traj.iter().all(|p| p.position == Point2::ORIGIN));
    }

    #[test]
    fn zero_travel_straight_is_a_single_pose() {
        let params = TaskParams {
            max_travel: 0.0,
            ..TaskParams::default()
        };
        let t = goal_task(BehaviourKind::Straight, Point2::new(1.0, 0.0), params);
        assert_eq!(trajectory_of(&t, 0.05).unwrap(), vec![Pose::IDENTITY]);
    }

    #[test]
    fn straight_metre_has_101_poses() {
        let t = goal_task(
            BehaviourKind::Straight,
            Point2::new(1.0, 0.0),
            TaskParams::default(),
        );
        let traj = trajectory_of(&t, 0.05).unwrap();
        assert_eq!(traj.len(), 101);
        for (i, p) in traj.iter().enumerate() {
            assert_abs_diff_eq!(p.position.x, i as f64 * 0.01, epsilon = 1e-9);
        }
    }

    #[test]
    fn unbounded_task_is_rejected() {
        let params = TaskParams {
            linear_speed: 1e-9,
            max_travel: f64::INFINITY,
            ..TaskParams::default()
        };
        let t = goal_task(BehaviourKind::Straight, Point2::new(1.0, 0.0), params);
        assert!(matches!(
            trajectory_of(&t, 0.05),
            Err(Error::UnboundedTask(_))
        ));
        assert!(corridor_of(&t, &Footprint::default(), 0.05).is_ok());
    }

    #[test]
    fn corridor_shapes() {
        let fp = Footprint::default();
        let t = goal_task(
            BehaviourKind::Straight,
            Point2::new(1.0, 0.0),
            TaskParams::default(),
        );
        match corridor_of(&t, &fp, 0.05).unwrap() {
            TaskCorridor::Strip {
                length, half_width, ..
            } => {
                assert_abs_diff_eq!(length, 1.0);
                assert_abs_diff_eq!(2.0 * half_width, 0.25);
            }
            other => panic!("unexpected corridor {other:?}"),
        }
        let turn = goal_task(
            BehaviourKind::LeftTurn,
            Point2::new(1.0, 0.0),
            TaskParams::default(),
        );
        match corridor_of(&turn, &fp, 0.05).unwrap() {
            TaskCorridor::Disc { centre, radius } => {
                assert_eq!(centre, Point2::ORIGIN);
                assert_abs_diff_eq!(radius, 0.125 + 0.05, epsilon = 1e-12);
            }
            other => panic!("unexpected corridor {other:?}"),
        }
    }

    #[test]
    fn zero_length_corridor_is_the_inflated_footprint() {
        let fp = Footprint::default();
        let params = TaskParams {
            max_travel: 0.0,
            ..TaskParams::default()
        };
        let t = Task::new(
            BehaviourKind::Straight,
            Disturbance::goal(Point2::new(1.0, 0.0)),
            Pose::new(0.2, 0.3, 1.0),
            params,
        )
        .unwrap();
        let k = corridor_of(&t, &fp, 0.05).unwrap();
        for (lx, ly, inside) in [
            (0.149, 0.124, true),
            (-0.149, -0.124, true),
            (0.151, 0.0, false),
            (0.0, 0.126, false),
        ] {
            let p = t.start_pose.transform_point(Point2::new(lx, ly));
            assert_eq!(k.contains(p), inside, "({lx}, {ly})");
        }
    }
}
