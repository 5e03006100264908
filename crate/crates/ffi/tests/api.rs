use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use stpr_ffi::*;

fn scenario_path(id: &str) -> CString {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join(format!("../../scenarios/{id}.json"));
    CString::new(p.to_str().unwrap()).unwrap()
}

fn last_error() -> String {
    let p = stpr_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn load(id: &str) -> *mut StprScenario {
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { stpr_scenario_load(scenario_path(id).as_ptr(), &mut s) }, StprStatus::Ok);
    s
}

#[test]
fn plan_and_copy_waypoints() {
    let s = load("s2");
    let mut plan = ptr::null_mut();
    assert_eq!(unsafe { stpr_plan(s, StprMethod::Astar, 0, 0, 42, &mut plan) }, StprStatus::Ok);
    unsafe {
        assert_eq!(stpr_plan_found(plan), 1);
        assert_eq!(stpr_plan_valid(plan), 1);
        let n = stpr_plan_waypoint_count(plan);
        assert!(n >= 2);
        let mut buf = vec![0.0; 3 * n];
        assert_eq!(stpr_plan_copy_waypoints(plan, buf.as_mut_ptr(), n - 1), StprStatus::BufferTooSmall);
        assert!(last_error().contains("waypoints"));
        assert_eq!(stpr_plan_copy_waypoints(plan, buf.as_mut_ptr(), n), StprStatus::Ok);
        // A* starts from the lattice point nearest the scenario start
        assert!((buf[0] - 0.5).abs() <= 0.05 + 1e-9 && (buf[1] + 1.75).abs() <= 0.05 + 1e-9, "{:?}", &buf[..3]);
        let len: f64 = buf
            .chunks(3)
            .zip(buf.chunks(3).skip(1))
            .map(|(a, b)| ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2) + (b[2] - a[2]).powi(2)).sqrt())
            .sum();
        assert!((len - stpr_plan_cost(plan)).abs() < 1e-9);
        stpr_plan_free(plan);
    }

    // vanilla planning cuts across the hole and fails validation
    assert_eq!(unsafe { stpr_plan(s, StprMethod::Astar, 1, 0, 42, &mut plan) }, StprStatus::Ok);
    unsafe {
        assert_eq!(stpr_plan_found(plan), 1);
        assert_eq!(stpr_plan_valid(plan), 0);
        stpr_plan_free(plan);
        stpr_scenario_free(s);
    }
}

#[test]
fn unsolvable_scenario_has_no_path() {
    let s = load("s1");
    let mut plan = ptr::null_mut();
    assert_eq!(unsafe { stpr_plan(s, StprMethod::Astar, 0, 0, 42, &mut plan) }, StprStatus::Ok);
    unsafe {
        assert_eq!(stpr_plan_found(plan), 0);
        assert!(stpr_plan_cost(plan).is_infinite());
        assert_eq!(stpr_plan_waypoint_count(plan), 0);
        assert_eq!(stpr_plan_copy_waypoints(plan, ptr::null_mut(), 0), StprStatus::Ok);
        stpr_plan_free(plan);
        stpr_scenario_free(s);
    }
}

#[test]
fn constraint_handles() {
    let mut c = ptr::null_mut();
    let json = CString::new(r#"{"kind":"box","min":[0,0,0],"max":[1,1,1]}"#).unwrap();
    assert_eq!(unsafe { stpr_constraint_from_json(json.as_ptr(), &mut c) }, StprStatus::Ok);
    let mut out = 9u8;
    unsafe {
        assert_eq!(stpr_constraint_evaluate(c, 0.5, 0.5, 0.5, &mut out), StprStatus::Ok);
        assert_eq!(out, 1);
        assert_eq!(stpr_constraint_evaluate(c, 1.5, 0.5, 0.5, &mut out), StprStatus::Ok);
        assert_eq!(out, 0);
        assert_eq!(stpr_constraint_evaluate(c, f64::NAN, 0.0, 0.0, &mut out), StprStatus::InvalidArgument);
        assert_eq!(stpr_constraint_evaluate(c, 0.0, 0.0, 0.0, ptr::null_mut()), StprStatus::NullArgument);
        stpr_constraint_free(c);
    }

    let external = CString::new(r#"{"kind":"external","handle":"h1"}"#).unwrap();
    assert_eq!(unsafe { stpr_constraint_from_json(external.as_ptr(), &mut c) }, StprStatus::Ok);
    unsafe {
        assert_eq!(stpr_constraint_evaluate(c, 0.0, 0.0, 0.0, &mut out), StprStatus::Unsupported);
        stpr_constraint_free(c);
    }
}

#[test]
fn load_errors() {
    let mut s = ptr::null_mut();
    let missing = CString::new("/nonexistent/scenario.json").unwrap();
    assert_eq!(unsafe { stpr_scenario_load(missing.as_ptr(), &mut s) }, StprStatus::Parse);
    assert!(s.is_null());
    assert!(!last_error().is_empty());
    let bad = [0xffu8, 0];
    assert_eq!(unsafe { stpr_scenario_load(bad.as_ptr().cast(), &mut s) }, StprStatus::InvalidUtf8);
    unsafe { stpr_scenario_free(ptr::null_mut()) };
}

fn target_dir() -> PathBuf {
    // <target>/<profile>/deps/api-<hash>
    std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn c_program_links_against_static_library() {
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let lib = target_dir().join("libstpr_ffi.a");
    assert!(lib.exists(), "{} missing", lib.display());
    let exe = Path::new(env!("CARGO_TARGET_TMPDIR")).join("stpr_smoke");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let status = Command::new(cc)
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(manifest.join("tests/smoke.c"))
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&exe)
        .status()
        .expect("C compiler runs");
    assert!(status.success());
    let out = Command::new(&exe).arg(scenario_path("s2").to_str().unwrap()).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok "));
}
