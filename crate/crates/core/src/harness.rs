//! Batch runs over scenarios and methods, and the tables built from them.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::constraint::{ExternalOracle, NamedConstraint};
use crate::index::PointCloudIndex;
use crate::planner::{plan_astar, plan_rrtstar, validate_path, validate_path_with, NoObstacles, Obstacles, Outcome};
use crate::sampling::{derive_seed, materialize, rng_for};
use crate::scene::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    VanillaAstar,
    VanillaRrtstar,
    StprAstar,
    StprRrtstar,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::VanillaAstar,
        Method::VanillaRrtstar,
        Method::StprAstar,
        Method::StprRrtstar,
    ];

    /// Constraint-aware: constraint regions are sampled into the index.
    pub fn uses_constraints(self) -> bool {
        matches!(self, Method::StprAstar | Method::StprRrtstar)
    }

    pub fn is_rrt(self) -> bool {
        matches!(self, Method::VanillaRrtstar | Method::StprRrtstar)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Method::VanillaAstar => "vanilla_astar",
            Method::VanillaRrtstar => "vanilla_rrtstar",
            Method::StprAstar => "stpr_astar",
            Method::StprRrtstar => "stpr_rrtstar",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Method::VanillaAstar => "A*",
            Method::VanillaRrtstar => "RRT*",
            Method::StprAstar => "STPR-A*",
            Method::StprRrtstar => "STPR-RRT*",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown method `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseTimes {
    /// Only set when a live bridge generated constraint code for this run.
    pub prompting: Option<f64>,
    pub sampling: f64,
    pub planning: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunOutcome {
    PathFound,
    NoPathExists,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkRecord {
    pub scenario_id: String,
    pub method: Method,
    pub sample_count: usize,
    pub run_index: usize,
    pub seed: u64,
    pub outcome: RunOutcome,
    pub success: bool,
    /// Validation verdict; trivially true when no path was returned.
    pub valid: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub violation: Option<String>,
    /// Infinity when no path was returned.
    #[serde(serialize_with = "finite_or_null")]
    pub path_length: f64,
    pub times: PhaseTimes,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

fn finite_or_null<S: serde::Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_none()
    }
}

#[derive(Debug, Clone)]
pub struct BenchOptions {
    pub runs: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
    /// Point counts to sweep; empty means each scenario's own `sample_count`.
    pub densities: Vec<usize>,
    /// Validator spacing; defaults to a tenth of the grid resolution.
    pub validation_step: Option<f64>,
    /// Seconds spent by a live bridge turning instructions into code, charged
    /// to every constraint-aware run of that scenario.
    pub prompting: BTreeMap<String, f64>,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions {
            runs: 10,
            seed: 0,
            methods: Method::ALL.to_vec(),
            densities: Vec::new(),
            validation_step: None,
            prompting: BTreeMap::new(),
        }
    }
}

/// Seed for one run. Independent of the method so that every method sees the
/// same object clouds in a given run.
pub fn run_seed(seed: u64, scenario_id: &str, run_index: usize) -> u64 {
    derive_seed(seed, &format!("{scenario_id}#{run_index}"))
}

fn success(solvable: bool, outcome: RunOutcome, valid: bool) -> bool {
    match outcome {
        RunOutcome::PathFound => solvable && valid,
        RunOutcome::NoPathExists => !solvable,
        RunOutcome::Error => false,
    }
}

/// One seeded run. Planner and sampler failures become failed records.
pub fn run_once(
    scenario: &Scenario,
    constraints: &[NamedConstraint],
    method: Method,
    run_index: usize,
    seed: u64,
    validation_step: f64,
    prompting: Option<f64>,
    mut oracle: Option<&mut dyn ExternalOracle>,
) -> BenchmarkRecord {
    let t0 = Instant::now();
    let mut record = BenchmarkRecord {
        scenario_id: scenario.id.clone(),
        method,
        sample_count: scenario.sample_count,
        run_index,
        seed,
        outcome: RunOutcome::Error,
        success: false,
        valid: false,
        violation: None,
        path_length: f64::INFINITY,
        times: PhaseTimes {
            prompting,
            sampling: 0.0,
            planning: 0.0,
            total: 0.0,
        },
        error: None,
    };
    let finish = |mut r: BenchmarkRecord| {
        r.times.total = t0.elapsed().as_secs_f64() + r.times.prompting.unwrap_or(0.0);
        r
    };

    let planned: &[NamedConstraint] = if method.uses_constraints() { constraints } else { &[] };
    let clouds = match materialize(
        &scenario.environment,
        planned,
        scenario.sample_count,
        seed,
        oracle.as_mut().map(|o| &mut **o as &mut dyn ExternalOracle),
    ) {
        Ok(c) => c,
        Err(e) => {
            record.error = Some(e.to_string());
            return finish(record);
        }
    };
    let index = PointCloudIndex::build(&clouds).ok();
    record.times.sampling = t0.elapsed().as_secs_f64();

    let obstacles: &dyn Obstacles = match &index {
        Some(i) => i,
        None => &NoObstacles,
    };
    let t1 = Instant::now();
    let result = if method.is_rrt() {
        plan_rrtstar(scenario, obstacles, &mut rng_for(seed, "rrtstar"))
    } else {
        plan_astar(scenario, obstacles)
    };
    record.times.planning = t1.elapsed().as_secs_f64();
    let mut record = finish(record);
    match result {
        Err(e) => record.error = Some(e.to_string()),
        Ok(r) => match r.outcome {
            Outcome::NoPathExists { .. } => {
                record.outcome = RunOutcome::NoPathExists;
                record.valid = true;
            }
            Outcome::PathFound { path, cost } => {
                record.outcome = RunOutcome::PathFound;
                record.path_length = cost;
                // always judged against every scenario constraint
                let report = match oracle {
                    Some(o) => validate_path_with(&path, constraints, &scenario.environment, validation_step, o),
                    None => validate_path(&path, constraints, &scenario.environment, validation_step),
                };
                record.valid = report.is_clean();
                record.violation = report.violation.map(|v| v.label);
            }
        },
    }
    record.success = success(scenario.solvable, record.outcome, record.valid);
    record
}

struct Job<'a> {
    scenario: &'a Scenario,
    k: usize,
    method: Method,
    run: usize,
}

/// Every (scenario, density, method, run) combination, sorted by
/// (scenario, method, density, run) regardless of execution order.
/// Scenarios with unresolved bridge constraints yield failed records.
/// External leaves force serial execution through `oracle`.
pub fn run_batch(
    scenarios: &[Scenario],
    opts: &BenchOptions,
    oracle: Option<&mut dyn ExternalOracle>,
) -> Vec<BenchmarkRecord> {
    let mut jobs = Vec::new();
    for s in scenarios {
        let ks = if opts.densities.is_empty() {
            vec![s.sample_count]
        } else {
            opts.densities.clone()
        };
        for &k in &ks {
            for &method in &opts.methods {
                for run in 0..opts.runs {
                    jobs.push(Job {
                        scenario: s,
                        k,
                        method,
                        run,
                    });
                }
            }
        }
    }
    let resolved: Vec<Option<Vec<NamedConstraint>>> = scenarios.iter().map(Scenario::resolved_constraints).collect();
    let position = |s: &Scenario| scenarios.iter().position(|x| std::ptr::eq(x, s)).expect("own scenario");

    let exec = |job: &Job, oracle: Option<&mut dyn ExternalOracle>| {
        let s = job.scenario;
        let step = opts.validation_step.unwrap_or(s.grid_resolution / 10.0);
        let seed = run_seed(opts.seed, &s.id, job.run);
        let prompting = job.method.uses_constraints().then(|| opts.prompting.get(&s.id).copied()).flatten();
        let sized;
        let scenario = if job.k == s.sample_count {
            s
        } else {
            sized = s.clone().with_sample_count(job.k);
            &sized
        };
        match &resolved[position(s)] {
            Some(constraints) => {
                run_once(scenario, constraints, job.method, job.run, seed, step, prompting, oracle)
            }
            None => unresolved(scenario, job, seed),
        }
    };

    let needs_oracle = resolved
        .iter()
        .flatten()
        .any(|cs| cs.iter().any(|c| c.expr.has_external()));
    let mut records: Vec<BenchmarkRecord> = match oracle {
        Some(o) if needs_oracle => jobs.iter().map(|j| exec(j, Some(&mut *o))).collect(),
        _ => jobs.par_iter().map(|j| exec(j, None)).collect(),
    };
    records.sort_by(|a, b| {
        (&a.scenario_id, a.method, a.sample_count, a.run_index).cmp(&(&b.scenario_id, b.method, b.sample_count, b.run_index))
    });
    records
}

/// `runs` seeded runs of one method on one scenario.
pub fn run_scenario(scenario: &Scenario, method: Method, runs: usize, seed: u64) -> Vec<BenchmarkRecord> {
    let opts = BenchOptions {
        runs,
        seed,
        methods: vec![method],
        ..Default::default()
    };
    run_batch(std::slice::from_ref(scenario), &opts, None)
}

fn unresolved(s: &Scenario, job: &Job, seed: u64) -> BenchmarkRecord {
    BenchmarkRecord {
        scenario_id: s.id.clone(),
        method: job.method,
        sample_count: s.sample_count,
        run_index: job.run,
        seed,
        outcome: RunOutcome::Error,
        success: false,
        valid: false,
        violation: None,
        path_length: f64::INFINITY,
        times: PhaseTimes {
            prompting: None,
            sampling: 0.0,
            planning: 0.0,
            total: 0.0,
        },
        error: Some("constraint awaits bridge generation".into()),
    }
}

/// Mean over one (scenario, method, density) cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub scenario_id: String,
    pub method: Method,
    pub sample_count: usize,
    pub runs: usize,
    pub successes: usize,
    pub invalid_paths: usize,
    pub success_pct: f64,
    /// Mean over returned paths; infinity when none were returned.
    #[serde(serialize_with = "finite_or_null")]
    pub mean_path_length: f64,
    pub mean_prompting: Option<f64>,
    pub mean_sampling: f64,
    pub mean_planning: f64,
    pub mean_total: f64,
}

pub fn aggregate(records: &[BenchmarkRecord]) -> Vec<Aggregate> {
    let mut cells: BTreeMap<(&str, Method, usize), Vec<&BenchmarkRecord>> = BTreeMap::new();
    for r in records {
        cells.entry((&r.scenario_id, r.method, r.sample_count)).or_default().push(r);
    }
    cells
        .into_iter()
        .map(|((id, method, k), rs)| {
            let n = rs.len();
            let mean = |f: &dyn Fn(&BenchmarkRecord) -> f64| rs.iter().map(|r| f(r)).sum::<f64>() / n as f64;
            let lengths: Vec<f64> = rs.iter().map(|r| r.path_length).filter(|l| l.is_finite()).collect();
            let prompts: Vec<f64> = rs.iter().filter_map(|r| r.times.prompting).collect();
            let successes = rs.iter().filter(|r| r.success).count();
            Aggregate {
                scenario_id: id.to_owned(),
                method,
                sample_count: k,
                runs: n,
                successes,
                invalid_paths: rs.iter().filter(|r| r.outcome == RunOutcome::PathFound && !r.valid).count(),
                success_pct: 100.0 * successes as f64 / n as f64,
                mean_path_length: if lengths.is_empty() {
                    f64::INFINITY
                } else {
                    lengths.iter().sum::<f64>() / lengths.len() as f64
                },
                mean_prompting: (!prompts.is_empty()).then(|| prompts.iter().sum::<f64>() / prompts.len() as f64),
                mean_sampling: mean(&|r| r.times.sampling),
                mean_planning: mean(&|r| r.times.planning),
                mean_total: mean(&|r| r.times.total),
            }
        })
        .collect()
}

/// Rendered tables. `success_csv` and `records_csv` hold no timings, so
/// they are byte-identical across runs with the same seed.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub markdown: String,
    pub success_csv: String,
    pub records_csv: String,
    pub runtime_csv: String,
    pub density_csv: String,
}

fn len_str(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.3}")
    } else {
        "inf".into()
    }
}

fn secs(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |s| format!("{s:.4}"))
}

pub fn emit_tables(records: &[BenchmarkRecord]) -> Report {
    let aggs = aggregate(records);
    let mut success_csv = String::from("scenario,method,sample_count,runs,successes,success_pct,invalid_paths,mean_path_length\n");
    let mut runtime_csv = String::from("scenario,method,sample_count,prompting_s,sampling_s,planning_s,total_s\n");
    let mut density_csv = String::from("scenario,method,sample_count,success_pct,invalid_paths,total_s\n");
    for a in &aggs {
        let _ = writeln!(
            success_csv,
            "{},{},{},{},{},{:.1},{},{}",
            a.scenario_id,
            a.method,
            a.sample_count,
            a.runs,
            a.successes,
            a.success_pct,
            a.invalid_paths,
            len_str(a.mean_path_length)
        );
        let _ = writeln!(
            runtime_csv,
            "{},{},{},{},{:.6},{:.6},{:.6}",
            a.scenario_id,
            a.method,
            a.sample_count,
            a.mean_prompting.map_or_else(String::new, |p| format!("{p:.6}")),
            a.mean_sampling,
            a.mean_planning,
            a.mean_total
        );
        let _ = writeln!(
            density_csv,
            "{},{},{},{:.1},{},{:.6}",
            a.scenario_id, a.method, a.sample_count, a.success_pct, a.invalid_paths, a.mean_total
        );
    }

    let mut records_csv = String::from("scenario,method,sample_count,run,seed,outcome,success,valid,violation,path_length,error\n");
    for r in records {
        let outcome = match r.outcome {
            RunOutcome::PathFound => "path_found",
            RunOutcome::NoPathExists => "no_path_exists",
            RunOutcome::Error => "error",
        };
        let _ = writeln!(
            records_csv,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.scenario_id,
            r.method,
            r.sample_count,
            r.run_index,
            r.seed,
            outcome,
            r.success,
            r.valid,
            r.violation.as_deref().unwrap_or(""),
            len_str(r.path_length),
            r.error.as_deref().unwrap_or("").replace(',', ";")
        );
    }

    Report {
        markdown: markdown(&aggs),
        success_csv,
        records_csv,
        runtime_csv,
        density_csv,
    }
}

fn markdown(aggs: &[Aggregate]) -> String {
    let mut md = String::new();
    let methods: Vec<Method> = Method::ALL.into_iter().filter(|m| aggs.iter().any(|a| a.method == *m)).collect();
    let mut rows: Vec<(&str, usize)> = aggs.iter().map(|a| (a.scenario_id.as_str(), a.sample_count)).collect();
    rows.dedup();
    let cell = |id: &str, k: usize, m: Method| aggs.iter().find(|a| a.scenario_id == id && a.sample_count == k && a.method == m);

    md.push_str("## Success ratio (%)\n\n| Scenario | K |");
    for m in &methods {
        let _ = write!(md, " {} |", m.title());
    }
    md.push_str("\n|---|---|");
    md.push_str(&"---|".repeat(methods.len()));
    md.push('\n');
    for &(id, k) in &rows {
        let _ = write!(md, "| {id} | {k} |");
        for &m in &methods {
            match cell(id, k, m) {
                Some(a) => {
                    let _ = write!(md, " {:.0} ({}) |", a.success_pct, len_str(a.mean_path_length));
                }
                None => md.push_str(" - |"),
            }
        }
        md.push('\n');
    }
    md.push_str("\nCells show success % and, in parentheses, mean path length in meters (`inf`: no path returned).\n");

    md.push_str("\n## Runtime breakdown (s)\n\n| Scenario | Method | K | Prompting | Sampling | Planning | Total |\n|---|---|---|---|---|---|---|\n");
    for a in aggs {
        let _ = writeln!(
            md,
            "| {} | {} | {} | {} | {:.4} | {:.4} | {:.4} |",
            a.scenario_id,
            a.method.title(),
            a.sample_count,
            secs(a.mean_prompting),
            a.mean_sampling,
            a.mean_planning,
            a.mean_total
        );
    }

    md.push_str("\n## Point density\n\n| Scenario | Method | K | Success (%) | Invalid paths | Total (s) |\n|---|---|---|---|---|---|\n");
    for a in aggs {
        let _ = writeln!(
            md,
            "| {} | {} | {} | {:.0} | {}/{} | {:.4} |",
            a.scenario_id,
            a.method.title(),
            a.sample_count,
            a.success_pct,
            a.invalid_paths,
            a.runs,
            a.mean_total
        );
    }
    md
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(id: &str, method: Method, success: bool, len: f64) -> BenchmarkRecord {
        BenchmarkRecord {
            scenario_id: id.into(),
            method,
            sample_count: 1000,
            run_index: 0,
            seed: 1,
            outcome: if len.is_finite() {
                RunOutcome::PathFound
            } else {
                RunOutcome::NoPathExists
            },
            success,
            valid: success,
            violation: None,
            path_length: len,
            times: PhaseTimes {
                prompting: None,
                sampling: 0.5,
                planning: 0.25,
                total: 0.8,
            },
            error: None,
        }
    }

    #[test]
    fn success_rule() {
        assert!(success(true, RunOutcome::PathFound, true));
        assert!(!success(true, RunOutcome::PathFound, false));
        assert!(!success(true, RunOutcome::NoPathExists, true));
        assert!(success(false, RunOutcome::NoPathExists, true));
        assert!(!success(false, RunOutcome::PathFound, true));
        assert!(!success(false, RunOutcome::Error, false));
    }

    #[test]
    fn single_record_tables() {
        let rep = emit_tables(&[record("s2", Method::StprAstar, true, 4.5)]);
        assert_eq!(rep.success_csv.lines().count(), 2);
        assert!(rep.success_csv.contains("s2,stpr_astar,1000,1,1,100.0,0,4.500"));
        assert_eq!(rep.runtime_csv.lines().count(), 2);
        assert!(rep.markdown.contains("| s2 | 1000 | 100 (4.500) |"));
    }

    #[test]
    fn all_failures_mark_infinite_length() {
        let rs = vec![
            record("s1", Method::VanillaAstar, false, f64::INFINITY),
            BenchmarkRecord {
                run_index: 1,
                ..record("s1", Method::VanillaAstar, false, f64::INFINITY)
            },
        ];
        let a = &aggregate(&rs)[0];
        assert_eq!(a.success_pct, 0.0);
        assert!(a.mean_path_length.is_infinite());
        assert!(emit_tables(&rs).success_csv.contains(",0.0,0,inf"));
    }

    #[test]
    fn methods_parse() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert!("dijkstra".parse::<Method>().is_err());
    }
}
