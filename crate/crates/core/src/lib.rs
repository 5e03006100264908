//! Constraint-compliant path planning.
//!
//! Declarative constraint predicates are turned into point-cloud obstacles by
//! rejection sampling. Those clouds, together with clouds sampled from the
//! static objects' boxes, go into a kd-tree that both planners (grid A* and
//! RRT*) query for collisions.

pub mod bridge;
pub mod config;
pub mod constraint;
pub mod geometry;
pub mod harness;
pub mod index;
pub mod planner;
pub mod sampling;
pub mod scene;

pub use constraint::{ConstraintError, ConstraintExpr, NamedConstraint};
pub use geometry::{Aabb, Point3};
pub use index::PointCloudIndex;
pub use planner::{plan_astar, plan_rrtstar, validate_path, PlanResult};
pub use scene::{EnvironmentModel, Scenario};
