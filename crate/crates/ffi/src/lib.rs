//! C interface to the planner.
//!
//! Every object crosses the boundary as an opaque pointer created by a
//! `stpr_*_load`/`_from_json`/`stpr_plan` call and released with the matching
//! `_free`. Functions return a [`StprStatus`]; on failure
//! [`stpr_last_error_message`] describes the most recent error on the calling
//! thread. Panics are caught and reported as `STPR_STATUS_INTERNAL`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use stpr::planner::{NoObstacles, Obstacles};
use stpr::sampling::{materialize, rng_for};
use stpr::{plan_astar, plan_rrtstar, validate_path, ConstraintExpr, PlanResult, Point3, PointCloudIndex, Scenario};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StprStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    /// Malformed or invalid scenario or constraint document.
    Parse = 3,
    /// The constraint cannot be evaluated in-process (bridge-backed).
    Unsupported = 4,
    /// Sampling or planning failed before producing an outcome.
    Planning = 5,
    BufferTooSmall = 6,
    InvalidArgument = 7,
    Internal = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StprMethod {
    Astar = 0,
    Rrtstar = 1,
}

/// A loaded scenario.
pub struct StprScenario(Scenario);

/// A standalone constraint expression.
pub struct StprConstraint(ConstraintExpr);

/// A planning outcome together with its validation verdict.
pub struct StprPlan {
    result: PlanResult,
    valid: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let mut bytes = msg.into().into_bytes();
    bytes.retain(|&b| b != 0);
    let c = CString::new(bytes).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

type Res<T> = Result<T, (StprStatus, String)>;

fn guard(f: impl FnOnce() -> Res<()>) -> StprStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            StprStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            StprStatus::Internal
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Res<&'a str> {
    if p.is_null() {
        return Err((StprStatus::NullArgument, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (StprStatus::InvalidUtf8, format!("{name} is not UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> Res<&'a T> {
    p.as_ref().ok_or_else(|| (StprStatus::NullArgument, format!("{name} is null")))
}

unsafe fn out_arg<'a, T>(p: *mut T, name: &str) -> Res<&'a mut T> {
    p.as_mut().ok_or_else(|| (StprStatus::NullArgument, format!("{name} is null")))
}

/// Message for the last failed call on this thread, or null. The pointer is
/// valid until the next `stpr_*` call on the same thread.
#[no_mangle]
pub extern "C" fn stpr_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn stpr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Load a scenario file (its scene and fixture files are resolved relative
/// to it).
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn stpr_scenario_load(path: *const c_char, out: *mut *mut StprScenario) -> StprStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let path = str_arg(path, "path")?;
        let s = Scenario::from_path(Path::new(path)).map_err(|e| (StprStatus::Parse, e.to_string()))?;
        *out = Box::into_raw(Box::new(StprScenario(s)));
        Ok(())
    })
}

/// # Safety
/// `scenario` must come from [`stpr_scenario_load`] and not be used again.
#[no_mangle]
pub unsafe extern "C" fn stpr_scenario_free(scenario: *mut StprScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Parse a constraint expression from JSON.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn stpr_constraint_from_json(json: *const c_char, out: *mut *mut StprConstraint) -> StprStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let e = ConstraintExpr::from_json(str_arg(json, "json")?).map_err(|e| (StprStatus::Parse, e.to_string()))?;
        *out = Box::into_raw(Box::new(StprConstraint(e)));
        Ok(())
    })
}

/// Whether `(x, y, z)` is forbidden: writes 1 or 0 to `out`.
///
/// # Safety
/// `constraint` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn stpr_constraint_evaluate(
    constraint: *const StprConstraint,
    x: f64,
    y: f64,
    z: f64,
    out: *mut u8,
) -> StprStatus {
    guard(|| {
        let c = ref_arg(constraint, "constraint")?;
        let out = out_arg(out, "out")?;
        let p = Point3::try_new(x, y, z).map_err(|e| (StprStatus::InvalidArgument, e.to_string()))?;
        let forbidden = c.0.evaluate(p).map_err(|e| {
            let status = if c.0.has_external() { StprStatus::Unsupported } else { StprStatus::InvalidArgument };
            (status, e.to_string())
        })?;
        *out = forbidden as u8;
        Ok(())
    })
}

/// # Safety
/// `constraint` must come from [`stpr_constraint_from_json`] and not be used
/// again.
#[no_mangle]
pub unsafe extern "C" fn stpr_constraint_free(constraint: *mut StprConstraint) {
    if !constraint.is_null() {
        drop(Box::from_raw(constraint));
    }
}

/// Sample clouds for every object and constraint, plan, and validate the
/// result. `sample_count == 0` keeps the scenario's own count; `vanilla != 0`
/// plans against object clouds only (validation still uses every
/// constraint).
///
/// # Safety
/// `scenario` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn stpr_plan(
    scenario: *const StprScenario,
    method: StprMethod,
    vanilla: u8,
    sample_count: usize,
    seed: u64,
    out: *mut *mut StprPlan,
) -> StprStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let mut s = ref_arg(scenario, "scenario")?.0.clone();
        if sample_count > 0 {
            s = s.with_sample_count(sample_count);
        }
        let constraints = s.resolved_constraints().filter(|c| c.iter().all(|c| !c.expr.has_external())).ok_or((
            StprStatus::Unsupported,
            "scenario has bridge-backed constraints".to_owned(),
        ))?;
        let planned = if vanilla != 0 { &[][..] } else { &constraints[..] };
        let clouds = materialize(&s.environment, planned, s.sample_count, seed, None)
            .map_err(|e| (StprStatus::Planning, e.to_string()))?;
        let index = PointCloudIndex::build(&clouds).ok();
        let obstacles: &dyn Obstacles = match &index {
            Some(i) => i,
            None => &NoObstacles,
        };
        let result = match method {
            StprMethod::Astar => plan_astar(&s, obstacles),
            StprMethod::Rrtstar => plan_rrtstar(&s, obstacles, &mut rng_for(seed, "rrtstar")),
        }
        .map_err(|e| (StprStatus::Planning, e.to_string()))?;
        let valid = result
            .path()
            .is_none_or(|p| validate_path(p, &constraints, &s.environment, s.grid_resolution / 10.0).is_clean());
        *out = Box::into_raw(Box::new(StprPlan { result, valid }));
        Ok(())
    })
}

/// 1 when a path was found, 0 when the planner certified that none exists.
///
/// # Safety
/// `plan` must be live or null (null reads as 0).
#[no_mangle]
pub unsafe extern "C" fn stpr_plan_found(plan: *const StprPlan) -> u8 {
    plan.as_ref().is_some_and(|p| p.result.found()) as u8
}

/// 1 when the path passed validation (or no path was returned).
///
/// # Safety
/// `plan` must be live or null (null reads as 0).
#[no_mangle]
pub unsafe extern "C" fn stpr_plan_valid(plan: *const StprPlan) -> u8 {
    plan.as_ref().is_some_and(|p| p.valid) as u8
}

/// Path length; infinity when no path was found or `plan` is null.
///
/// # Safety
/// `plan` must be live or null.
#[no_mangle]
pub unsafe extern "C" fn stpr_plan_cost(plan: *const StprPlan) -> f64 {
    plan.as_ref().map_or(f64::INFINITY, |p| p.result.cost())
}

/// Number of waypoints (0 when no path was found).
///
/// # Safety
/// `plan` must be live or null.
#[no_mangle]
pub unsafe extern "C" fn stpr_plan_waypoint_count(plan: *const StprPlan) -> usize {
    plan.as_ref().and_then(|p| p.result.path()).map_or(0, <[Point3]>::len)
}

/// Copy waypoints into `xyz` as consecutive `x, y, z` triples. `capacity`
/// counts points, not doubles.
///
/// # Safety
/// `plan` must be live; `xyz` must hold `3 * capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn stpr_plan_copy_waypoints(plan: *const StprPlan, xyz: *mut f64, capacity: usize) -> StprStatus {
    guard(|| {
        let path = ref_arg(plan, "plan")?.result.path().unwrap_or(&[]);
        if path.len() > capacity {
            return Err((
                StprStatus::BufferTooSmall,
                format!("{} waypoints, room for {capacity}", path.len()),
            ));
        }
        if path.is_empty() {
            return Ok(());
        }
        if xyz.is_null() {
            return Err((StprStatus::NullArgument, "xyz is null".into()));
        }
        let dst = std::slice::from_raw_parts_mut(xyz, 3 * path.len());
        for (chunk, p) in dst.chunks_exact_mut(3).zip(path) {
            chunk.copy_from_slice(&p.to_array());
        }
        Ok(())
    })
}

/// # Safety
/// `plan` must come from [`stpr_plan`] and not be used again.
#[no_mangle]
pub unsafe extern "C" fn stpr_plan_free(plan: *mut StprPlan) {
    if !plan.is_null() {
        drop(Box::from_raw(plan));
    }
}
