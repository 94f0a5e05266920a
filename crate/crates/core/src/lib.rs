//! Multi-step planning over closed-loop behaviours.
//!
//! The planner discretises what a robot can do into short closed-loop tasks
//! (drive straight, turn left, turn right), predicts their outcome with an
//! internal kinematic simulation built from the robot's LiDAR scan, and grows
//! a tree of simulated task sequences best-first. The cheapest collision-free
//! branch of that tree is the plan.
//!
//! Modules, bottom-up:
//! - [`geometry`]: points, poses, convex polygons.
//! - [`world`]: ground-truth scenarios, synthetic LiDAR, corridor filtering.
//! - [`tasks`]: the closed-loop behaviours.
//! - [`core_sim`]: the internal model and task simulation.
//! - [`configurator`]: cognitive-map construction and plan extraction.
//! - [`executor`]: ground-truth execution, reactive baseline, benchmark.

pub mod cli;
pub mod configurator;
pub mod core_sim;
pub mod error;
pub mod executor;
pub mod geometry;
pub mod tasks;
pub mod world;

pub use error::{Error, Result};
