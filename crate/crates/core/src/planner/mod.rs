//! Grid A* and RRT* over a collision predicate, plus the independent path
//! validator and path exports.

pub mod astar;
pub mod export;
pub mod grid;
pub mod rrtstar;
pub mod validate;

use serde::Serialize;
use thiserror::Error;

use crate::geometry::{Aabb, Point3};
use crate::index::PointCloudIndex;
use crate::scene::Scenario;

pub use astar::{astar, astar_traced, plan_astar};
pub use grid::GridSpec;
pub use rrtstar::{plan_rrtstar, rrtstar, EdgeCheck, RewireSchedule, RrtConfig};
pub use validate::{validate_path, validate_path_with, ValidationReport, Violation, ViolationKind};

/// Anything that can say whether a robot of radius `r` at `q` is in collision.
pub trait Obstacles: Sync {
    fn collides(&self, q: &Point3, r: f64) -> bool;
}

impl Obstacles for PointCloudIndex {
    fn collides(&self, q: &Point3, r: f64) -> bool {
        PointCloudIndex::collides(self, q, r)
    }
}

/// An empty workspace.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoObstacles;

impl Obstacles for NoObstacles {
    fn collides(&self, _: &Point3, _: f64) -> bool {
        false
    }
}

impl<T: Obstacles> Obstacles for Option<T> {
    fn collides(&self, q: &Point3, r: f64) -> bool {
        self.as_ref().is_some_and(|o| o.collides(q, r))
    }
}

impl<T: Obstacles + ?Sized> Obstacles for &T {
    fn collides(&self, q: &Point3, r: f64) -> bool {
        (**self).collides(q, r)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("start {0} is in collision")]
    StartBlocked(Point3),
    #[error("every cell within the goal radius is in collision")]
    GoalRegionEmpty,
    #[error("invalid planner configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Certificate {
    /// Every reachable grid cell was expanded: no path exists on this grid.
    QueueExhausted,
    /// The sampling budget ran out. Probabilistic only.
    IterationBudgetExhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Outcome {
    PathFound { path: Vec<Point3>, cost: f64 },
    NoPathExists { certificate: Certificate },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PlanStats {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expanded_nodes: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tree_size: Option<usize>,
    /// Seconds.
    pub planning_time: f64,
    /// `(iteration, best cost)` each time the best goal path improved.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub cost_trace: Vec<(u64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanResult {
    #[serde(flatten)]
    pub outcome: Outcome,
    pub stats: PlanStats,
}

impl PlanResult {
    pub fn path(&self) -> Option<&[Point3]> {
        match &self.outcome {
            Outcome::PathFound { path, .. } => Some(path),
            Outcome::NoPathExists { .. } => None,
        }
    }

    /// Path cost, or infinity when no path was returned.
    pub fn cost(&self) -> f64 {
        match &self.outcome {
            Outcome::PathFound { cost, .. } => *cost,
            Outcome::NoPathExists { .. } => f64::INFINITY,
        }
    }

    pub fn found(&self) -> bool {
        matches!(self.outcome, Outcome::PathFound { .. })
    }
}

/// The geometric part of a planning query, with start and goal already on
/// the planning plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Problem {
    pub bounds: Aabb,
    pub start: Point3,
    pub goal: Point3,
    pub goal_radius: f64,
    pub robot_radius: f64,
}

impl Problem {
    pub fn from_scenario(s: &Scenario) -> Self {
        Problem {
            bounds: s.environment.bounds,
            start: s.start_on_plane(),
            goal: s.goal_on_plane(),
            goal_radius: s.goal_radius,
            robot_radius: s.robot_radius,
        }
    }

    pub fn plane_z(&self) -> f64 {
        self.start.z
    }

    pub fn in_goal(&self, p: &Point3) -> bool {
        p.planar_distance(&self.goal) <= self.goal_radius
    }
}

/// Sum of Euclidean segment lengths.
pub fn path_cost(path: &[Point3]) -> f64 {
    path.windows(2).map(|w| w[0].distance(&w[1])).sum()
}
