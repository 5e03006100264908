//! Environment and scenario files.
//!
//! A scene file lists the workspace bounds and the static objects as named
//! boxes. A scenario file points at a scene, places start and goal, and lists
//! the constraints (inline expressions, named fixtures, or requests that the
//! bridge must generate). Relative paths inside a scenario are resolved
//! against the scenario file's directory.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constraint::{ConstraintError, ConstraintExpr, NamedConstraint};
use crate::geometry::{Aabb, GeometryError, Point3};
use crate::planner::rrtstar::RrtConfig;

pub const DEFAULT_GRID_RESOLUTION: f64 = 0.1;
pub const DEFAULT_ROBOT_RADIUS: f64 = 0.25;
pub const DEFAULT_SAMPLE_COUNT: usize = 1000;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed document: {0}")]
    Parse(serde_json::Error),
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("bad geometry: {0}")]
    Geometry(String),
    #[error("unknown constraint fixture `{0}`")]
    UnknownFixture(String),
    #[error("start {start} lies in the forbidden region of `{label}`")]
    StartInForbiddenRegion { label: String, start: Point3 },
    #[error("constraint `{label}`: {source}")]
    Constraint {
        label: String,
        #[source]
        source: ConstraintError,
    },
}

impl From<serde_json::Error> for SceneError {
    fn from(e: serde_json::Error) -> Self {
        use serde_json::error::Category;
        match e.classify() {
            Category::Data => SceneError::Schema(e.to_string()),
            _ => SceneError::Parse(e),
        }
    }
}

impl From<GeometryError> for SceneError {
    fn from(e: GeometryError) -> Self {
        SceneError::Geometry(e.to_string())
    }
}

fn read(path: &Path) -> Result<String, SceneError> {
    fs::read_to_string(path).map_err(|source| SceneError::Io {
        path: path.to_owned(),
        source,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SceneObject {
    pub name: String,
    #[serde(flatten)]
    pub bbox: Aabb,
}

/// Static objects as boxes inside the workspace bounds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvironmentModel {
    pub bounds: Aabb,
    pub objects: Vec<SceneObject>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBox {
    min: [f64; 3],
    max: [f64; 3],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawObject {
    name: String,
    min: [f64; 3],
    max: [f64; 3],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScene {
    #[serde(default)]
    #[allow(dead_code)]
    description: Option<String>,
    bounds: RawBox,
    #[serde(default)]
    objects: Vec<RawObject>,
}

fn raw_box(min: [f64; 3], max: [f64; 3]) -> Result<Aabb, SceneError> {
    let min = Point3::try_from(min)?;
    let max = Point3::try_from(max)?;
    Ok(Aabb::new(min, max)?)
}

impl EnvironmentModel {
    pub fn new(bounds: Aabb, objects: Vec<SceneObject>) -> Result<Self, SceneError> {
        let mut seen = HashSet::new();
        for o in &objects {
            if !seen.insert(o.name.as_str()) {
                return Err(SceneError::Geometry(format!("duplicate object name `{}`", o.name)));
            }
            if !bounds.contains_box(&o.bbox) {
                return Err(SceneError::Geometry(format!(
                    "object `{}` {} extends past workspace bounds {}",
                    o.name, o.bbox, bounds
                )));
            }
        }
        Ok(EnvironmentModel { bounds, objects })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene serialization is infallible")
    }

    pub fn from_path(path: &Path) -> Result<Self, SceneError> {
        load_environment(&read(path)?)
    }
}

/// Parse a scene document.
pub fn load_environment(source: &str) -> Result<EnvironmentModel, SceneError> {
    let raw: RawScene = serde_json::from_str(source)?;
    let bounds = raw_box(raw.bounds.min, raw.bounds.max)?;
    let objects = raw
        .objects
        .into_iter()
        .map(|o| {
            Ok(SceneObject {
                bbox: raw_box(o.min, o.max).map_err(|e| SceneError::Geometry(format!("object `{}`: {e}", o.name)))?,
                name: o.name,
            })
        })
        .collect::<Result<Vec<_>, SceneError>>()?;
    EnvironmentModel::new(bounds, objects)
}

/// A constraint the bridge must turn into code before planning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BridgeRequest {
    pub instruction: String,
    #[serde(default)]
    pub params: BTreeMap<String, serde_json::Value>,
    /// Canned function name for fixture-mode bridges.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixture: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConstraintSource {
    Expr(ConstraintExpr),
    Bridge(BridgeRequest),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSpec {
    pub label: String,
    pub source: ConstraintSource,
}

impl ConstraintSpec {
    pub fn expr(&self) -> Option<&ConstraintExpr> {
        match &self.source {
            ConstraintSource::Expr(e) => Some(e),
            ConstraintSource::Bridge(_) => None,
        }
    }
}

/// Named analytic constraints that scenario files can reference.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FixtureLibrary {
    fixtures: BTreeMap<String, ConstraintExpr>,
}

impl FixtureLibrary {
    pub fn parse(source: &str) -> Result<Self, SceneError> {
        let raw: BTreeMap<String, serde_json::Value> = serde_json::from_str(source)?;
        let mut fixtures = BTreeMap::new();
        for (name, v) in raw {
            let e = ConstraintExpr::from_value(v).map_err(|source| SceneError::Constraint {
                label: name.clone(),
                source,
            })?;
            fixtures.insert(name, e);
        }
        Ok(FixtureLibrary { fixtures })
    }

    pub fn from_path(path: &Path) -> Result<Self, SceneError> {
        Self::parse(&read(path)?)
    }

    pub fn get(&self, name: &str) -> Option<&ConstraintExpr> {
        self.fixtures.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.fixtures.keys().map(String::as_str)
    }
}

/// A fully specified planning task.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub id: String,
    pub environment: EnvironmentModel,
    pub start: Point3,
    pub goal: Point3,
    pub goal_radius: f64,
    pub robot_radius: f64,
    /// Altitude of the planning slice.
    pub plane_z: f64,
    /// Declared ground truth: does a constraint-compliant path exist?
    pub solvable: bool,
    pub constraints: Vec<ConstraintSpec>,
    pub sample_count: usize,
    pub grid_resolution: f64,
    pub rrt: RrtConfig,
    pub rng_seed: u64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConstraint {
    label: String,
    #[serde(default)]
    expr: Option<serde_json::Value>,
    #[serde(default)]
    fixture: Option<String>,
    #[serde(default)]
    bridge: Option<BridgeRequest>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    id: String,
    #[serde(default)]
    #[allow(dead_code)]
    description: Option<String>,
    #[serde(default)]
    scene: Option<String>,
    #[serde(default)]
    fixture_library: Option<String>,
    start: [f64; 3],
    goal: [f64; 3],
    #[serde(default)]
    goal_radius: Option<f64>,
    #[serde(default)]
    robot_radius: Option<f64>,
    #[serde(default)]
    plane_z: Option<f64>,
    solvable: bool,
    #[serde(default)]
    constraints: Vec<RawConstraint>,
    #[serde(default)]
    sample_count: Option<usize>,
    #[serde(default)]
    grid_resolution: Option<f64>,
    #[serde(default)]
    rrt: Option<RrtConfig>,
    #[serde(default)]
    rng_seed: Option<u64>,
}

fn positive(name: &str, v: f64) -> Result<f64, SceneError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(SceneError::Schema(format!("{name} must be a positive number, got {v}")))
    }
}

fn parse_raw_scenario(source: &str) -> Result<RawScenario, SceneError> {
    Ok(serde_json::from_str(source)?)
}

/// Build a scenario from its document and an already-loaded environment.
/// Fixture references are looked up in `fixtures`.
pub fn load_scenario(
    source: &str,
    env: EnvironmentModel,
    fixtures: Option<&FixtureLibrary>,
) -> Result<Scenario, SceneError> {
    let raw = parse_raw_scenario(source)?;
    build_scenario(raw, env, fixtures)
}

fn build_scenario(
    raw: RawScenario,
    environment: EnvironmentModel,
    fixtures: Option<&FixtureLibrary>,
) -> Result<Scenario, SceneError> {
    let start = Point3::try_from(raw.start)?;
    let goal = Point3::try_from(raw.goal)?;
    let robot_radius = positive("robot_radius", raw.robot_radius.unwrap_or(DEFAULT_ROBOT_RADIUS))?;
    let goal_radius = positive("goal_radius", raw.goal_radius.unwrap_or(robot_radius))?;
    let grid_resolution = positive("grid_resolution", raw.grid_resolution.unwrap_or(DEFAULT_GRID_RESOLUTION))?;
    let sample_count = raw.sample_count.unwrap_or(DEFAULT_SAMPLE_COUNT);
    if sample_count == 0 {
        return Err(SceneError::Schema("sample_count must be >= 1".into()));
    }
    let plane_z = raw.plane_z.unwrap_or(0.0);
    if !plane_z.is_finite() {
        return Err(SceneError::Schema("plane_z must be finite".into()));
    }
    let rrt = raw.rrt.unwrap_or_default();
    rrt.validate().map_err(SceneError::Schema)?;

    let bounds = environment.bounds;
    let start_on_plane = Point3::new(start.x, start.y, plane_z);
    for (what, q) in [("start", start_on_plane), ("goal", Point3::new(goal.x, goal.y, plane_z))] {
        if !bounds.contains_closed(&q) {
            return Err(SceneError::Geometry(format!("{what} {q} outside workspace bounds {bounds}")));
        }
    }

    let mut constraints = Vec::with_capacity(raw.constraints.len());
    let mut labels = HashSet::new();
    for c in raw.constraints {
        if !labels.insert(c.label.clone()) {
            return Err(SceneError::Schema(format!("duplicate constraint label `{}`", c.label)));
        }
        let source = match (c.expr, c.fixture, c.bridge) {
            (Some(v), None, None) => ConstraintSource::Expr(ConstraintExpr::from_value(v).map_err(|source| {
                SceneError::Constraint {
                    label: c.label.clone(),
                    source,
                }
            })?),
            (None, Some(name), None) => {
                let e = fixtures
                    .and_then(|lib| lib.get(&name))
                    .ok_or_else(|| SceneError::UnknownFixture(name.clone()))?;
                ConstraintSource::Expr(e.clone())
            }
            (None, None, Some(req)) => {
                if req.instruction.trim().is_empty() {
                    return Err(SceneError::Schema(format!("constraint `{}` has an empty instruction", c.label)));
                }
                ConstraintSource::Bridge(req)
            }
            _ => {
                return Err(SceneError::Schema(format!(
                    "constraint `{}` needs exactly one of expr, fixture, bridge",
                    c.label
                )))
            }
        };
        if let ConstraintSource::Expr(e) = &source {
            if !e.has_external() && e.evaluate(start_on_plane).unwrap_or(false) {
                return Err(SceneError::StartInForbiddenRegion {
                    label: c.label,
                    start: start_on_plane,
                });
            }
        }
        constraints.push(ConstraintSpec { label: c.label, source });
    }

    Ok(Scenario {
        id: raw.id,
        environment,
        start,
        goal,
        goal_radius,
        robot_radius,
        plane_z,
        solvable: raw.solvable,
        constraints,
        sample_count,
        grid_resolution,
        rrt,
        rng_seed: raw.rng_seed.unwrap_or(0),
    })
}

impl Scenario {
    /// Load a scenario file, resolving its scene and fixture library relative
    /// to the file.
    pub fn from_path(path: &Path) -> Result<Self, SceneError> {
        let raw = parse_raw_scenario(&read(path)?)?;
        let dir = path.parent().unwrap_or(Path::new("."));
        let scene = raw
            .scene
            .as_deref()
            .ok_or_else(|| SceneError::Schema("scenario file must name its `scene`".into()))?;
        let env = EnvironmentModel::from_path(&dir.join(scene))?;
        let library = match raw.fixture_library.as_deref() {
            Some(lib) => Some(FixtureLibrary::from_path(&dir.join(lib))?),
            None => None,
        };
        build_scenario(raw, env, library.as_ref())
    }

    pub fn start_on_plane(&self) -> Point3 {
        Point3::new(self.start.x, self.start.y, self.plane_z)
    }

    pub fn goal_on_plane(&self) -> Point3 {
        Point3::new(self.goal.x, self.goal.y, self.plane_z)
    }

    pub fn with_sample_count(mut self, k: usize) -> Self {
        self.sample_count = k.max(1);
        self
    }

    /// Constraint expressions with their labels, or `None` while some
    /// constraint still awaits the bridge.
    pub fn resolved_constraints(&self) -> Option<Vec<NamedConstraint>> {
        self.constraints
            .iter()
            .map(|c| {
                c.expr().map(|e| NamedConstraint {
                    label: c.label.clone(),
                    expr: e.clone(),
                })
            })
            .collect()
    }

    /// Replace a bridge-backed constraint with generated code.
    pub fn resolve(&mut self, label: &str, expr: ConstraintExpr) -> bool {
        match self.constraints.iter_mut().find(|c| c.label == label) {
            Some(c) => {
                c.source = ConstraintSource::Expr(expr);
                true
            }
            None => false,
        }
    }

    /// True when some constraint still needs the bridge.
    pub fn needs_bridge(&self) -> bool {
        self.constraints.iter().any(|c| match &c.source {
            ConstraintSource::Bridge(_) => true,
            ConstraintSource::Expr(e) => e.has_external(),
        })
    }
}
