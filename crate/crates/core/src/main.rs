use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use stpr::bridge::{BridgeError, BridgeSession, BRIDGE_CMD_ENV};
use stpr::config::Config;
use stpr::constraint::{ExternalOracle, NamedConstraint};
use stpr::harness::{emit_tables, run_batch, run_seed, BenchOptions, Method};
use stpr::planner::{export, plan_astar, plan_rrtstar, validate_path, validate_path_with, NoObstacles, Obstacles};
use stpr::sampling::{materialize, rng_for, write_binary, write_xyz, CloudSource};
use stpr::{PointCloudIndex, Scenario};

const EXIT_FAIL: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_BRIDGE: u8 = 3;

#[derive(Parser)]
#[command(name = "stpr", version, about = "Constraint-compliant path planning over sampled point clouds")]
struct Cli {
    /// Defaults file; `./stpr.toml` is used when present.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Base seed for clouds and RRT* sampling.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Ask the bridge for canned fixture functions instead of a live model.
    #[arg(long)]
    fixture_mode: bool,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Md,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Planner {
    Astar,
    Rrtstar,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum CloudFormat {
    Xyz,
    Bin,
}

#[derive(Subcommand)]
enum Command {
    /// Plan one path and write it as JSON and CSV.
    Plan {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_enum, default_value = "astar")]
        method: Planner,
        /// Ignore constraints: plan against object clouds only.
        #[arg(long)]
        vanilla: bool,
        /// Points per object and constraint cloud.
        #[arg(long)]
        sample_count: Option<usize>,
        /// RRT* iteration budget.
        #[arg(long)]
        iterations: Option<u64>,
    },
    /// Export the sampled clouds of every object and constraint.
    Sample {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        sample_count: Option<usize>,
        #[arg(long, value_enum, default_value = "xyz")]
        cloud_format: CloudFormat,
    },
    /// Check a path against the scenario's constraints and object boxes.
    Validate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        scenario: PathBuf,
        /// Path file: plan JSON, a JSON array of points, or `x,y,z` CSV.
        #[arg(long)]
        path: PathBuf,
        /// Resampling spacing in meters (default: grid resolution / 10).
        #[arg(long)]
        step: Option<f64>,
    },
    /// Seeded batch runs and summary tables.
    Bench {
        #[command(flatten)]
        common: Common,
        #[arg(long, required = true, num_args = 1..)]
        scenario: Vec<PathBuf>,
        #[arg(long)]
        runs: Option<usize>,
        /// `all` or a comma-separated list of vanilla_astar, vanilla_rrtstar,
        /// stpr_astar, stpr_rrtstar.
        #[arg(long, value_delimiter = ',')]
        methods: Vec<String>,
        /// Point counts to sweep, e.g. 100,1000,10000.
        #[arg(long, value_delimiter = ',')]
        density: Vec<usize>,
    },
    /// Ask the bridge to turn an instruction into a constraint.
    GenConstraint {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        instruction: String,
        /// Numeric or string parameter, `name=value`; repeatable.
        #[arg(long = "param", value_parser = parse_param)]
        params: Vec<(String, Value)>,
        /// Canned function to serve in fixture mode.
        #[arg(long)]
        fixture: Option<String>,
    },
}

fn parse_param(s: &str) -> Result<(String, Value), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected name=value, got `{s}`"))?;
    let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_owned()));
    Ok((k.trim().to_owned(), value))
}

enum Failure {
    Usage(String),
    Bridge(String),
}

impl From<BridgeError> for Failure {
    fn from(e: BridgeError) -> Self {
        Failure::Bridge(e.to_string())
    }
}

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

/// Settings after merging flags over the config file.
struct Settings {
    seed: Option<u64>,
    output_dir: Option<PathBuf>,
    format: Format,
    fixture_mode: bool,
    bridge_cmd: Option<String>,
}

impl Settings {
    fn merge(common: &Common, cfg: &Config, default_format: Format) -> Result<Self, Failure> {
        let format = match (common.format, cfg.format.as_deref()) {
            (Some(f), _) => f,
            (None, Some(s)) => Format::from_str(s, true).map_err(|_| usage(format!("config: unknown format `{s}`")))?,
            (None, None) => default_format,
        };
        Ok(Settings {
            seed: common.seed.or(cfg.seed),
            output_dir: common.output_dir.clone().or_else(|| cfg.output_dir.clone()),
            format,
            fixture_mode: common.fixture_mode || cfg.fixture_mode.unwrap_or(false),
            bridge_cmd: cfg.bridge_cmd.clone(),
        })
    }

    fn out_dir(&self) -> Result<Option<&Path>, Failure> {
        if let Some(d) = &self.output_dir {
            fs::create_dir_all(d).map_err(|e| usage(format!("{}: {e}", d.display())))?;
        }
        Ok(self.output_dir.as_deref())
    }
}

/// A scenario whose bridge-backed constraints have been generated, with the
/// bridge session kept alive to answer membership queries.
struct Loaded {
    scenario: Scenario,
    constraints: Vec<NamedConstraint>,
    bridge: Option<BridgeSession>,
    prompting: Option<f64>,
}

impl Loaded {
    fn oracle(&mut self) -> Option<&mut dyn ExternalOracle> {
        self.bridge.as_mut().map(|b| b as &mut dyn ExternalOracle)
    }
}

fn launch_bridge(settings: &Settings) -> Result<BridgeSession, Failure> {
    let extra: &[&str] = if settings.fixture_mode { &["--fixture-mode"] } else { &[] };
    // the environment variable beats the config file
    let configured = match std::env::var_os(BRIDGE_CMD_ENV) {
        Some(_) => None,
        None => settings.bridge_cmd.as_deref(),
    };
    Ok(BridgeSession::launch(configured, extra)?)
}

fn load(path: &Path, settings: &Settings) -> Result<Loaded, Failure> {
    let mut scenario = Scenario::from_path(path).map_err(usage)?;
    let mut bridge = None;
    let mut prompting = None;
    if scenario.needs_bridge() {
        let mut session = launch_bridge(settings)?;
        let elapsed = session.resolve_scenario(&mut scenario)?;
        if !settings.fixture_mode {
            prompting = Some(elapsed);
        }
        bridge = Some(session);
    }
    let constraints = scenario
        .resolved_constraints()
        .ok_or_else(|| Failure::Bridge("unresolved constraints after generation".into()))?;
    Ok(Loaded {
        scenario,
        constraints,
        bridge,
        prompting,
    })
}

fn emit(text: &str) {
    let mut out = io::stdout().lock();
    let _ = out.write_all(text.as_bytes());
    if !text.ends_with('\n') {
        let _ = out.write_all(b"\n");
    }
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn cmd_plan(
    settings: &Settings,
    scenario: &Path,
    method: Planner,
    vanilla: bool,
    sample_count: Option<usize>,
    iterations: Option<u64>,
) -> Result<u8, Failure> {
    let mut loaded = load(scenario, settings)?;
    if let Some(k) = sample_count {
        loaded.scenario = loaded.scenario.with_sample_count(k);
    }
    if let Some(n) = iterations {
        loaded.scenario.rrt.max_iterations = n;
    }
    let s = loaded.scenario.clone();
    let constraints = loaded.constraints.clone();
    let seed = run_seed(settings.seed.unwrap_or(s.rng_seed), &s.id, 0);
    let planned: &[NamedConstraint] = if vanilla { &[] } else { &constraints };
    let clouds = materialize(&s.environment, planned, s.sample_count, seed, loaded.oracle()).map_err(usage)?;
    let index = PointCloudIndex::build(&clouds).ok();
    let obstacles: &dyn Obstacles = match &index {
        Some(i) => i,
        None => &NoObstacles,
    };
    let result = match method {
        Planner::Astar => plan_astar(&s, obstacles),
        Planner::Rrtstar => plan_rrtstar(&s, obstacles, &mut rng_for(seed, "rrtstar")),
    };
    let result = match result {
        Ok(r) => r,
        Err(e) => {
            eprintln!("stpr: {e}");
            return Ok(EXIT_FAIL);
        }
    };
    let step = s.grid_resolution / 10.0;
    let report = result.path().map(|p| match loaded.oracle() {
        Some(o) => validate_path_with(p, &constraints, &s.environment, step, o),
        None => validate_path(p, &constraints, &s.environment, step),
    });

    let method_name = match method {
        Planner::Astar => "astar",
        Planner::Rrtstar => "rrtstar",
    };
    let stem = format!("{}.{}{}", s.id, if vanilla { "vanilla_" } else { "" }, method_name);
    let doc = {
        let mut v = serde_json::to_value(&result).expect("plan results serialize");
        v["scenario"] = json!(s.id);
        v["seed"] = json!(seed);
        v["validation"] = json!(report);
        v["prompting_s"] = json!(loaded.prompting);
        v
    };
    let doc_text = serde_json::to_string_pretty(&doc).expect("json");
    let mut csv = Vec::new();
    export::write_csv(result.path().unwrap_or(&[]), &mut csv).map_err(usage)?;
    if let Some(dir) = settings.out_dir()? {
        write_file(&dir.join(format!("{stem}.json")), doc_text.as_bytes())?;
        write_file(&dir.join(format!("{stem}.csv")), &csv)?;
    }
    match settings.format {
        Format::Json => emit(&doc_text),
        Format::Csv => emit(&String::from_utf8_lossy(&csv)),
        Format::Md => {
            let mut md = format!("| scenario | method | outcome | cost | valid |\n|---|---|---|---|---|\n| {} | {} | ", s.id, stem);
            match &report {
                Some(r) => md.push_str(&format!(
                    "path_found | {:.3} | {} |",
                    result.cost(),
                    r.violation.as_ref().map_or("yes".to_owned(), |v| format!("no ({})", v.label))
                )),
                None => md.push_str("no_path_exists | inf | - |"),
            }
            emit(&md);
        }
    }
    let ok = match report {
        Some(r) => r.is_clean(),
        None => !s.solvable,
    };
    Ok(if ok { 0 } else { EXIT_FAIL })
}

fn cmd_sample(
    settings: &Settings,
    scenario: &Path,
    sample_count: Option<usize>,
    cloud_format: CloudFormat,
) -> Result<u8, Failure> {
    let mut loaded = load(scenario, settings)?;
    let k = sample_count.unwrap_or(loaded.scenario.sample_count);
    let s = loaded.scenario.clone();
    let seed = run_seed(settings.seed.unwrap_or(s.rng_seed), &s.id, 0);
    let constraints = loaded.constraints.clone();
    let clouds = materialize(&s.environment, &constraints, k, seed, loaded.oracle()).map_err(usage)?;
    let dir = settings.out_dir()?.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("clouds"));
    fs::create_dir_all(&dir).map_err(|e| usage(format!("{}: {e}", dir.display())))?;
    let ext = match cloud_format {
        CloudFormat::Xyz => "xyz",
        CloudFormat::Bin => "bin",
    };
    let mut rows = Vec::new();
    for c in &clouds {
        let kind = match c.source {
            CloudSource::StaticObject => "object",
            CloudSource::Constraint => "constraint",
        };
        let file = dir.join(format!("{kind}_{}.{ext}", c.label));
        let mut buf = Vec::new();
        match cloud_format {
            CloudFormat::Xyz => write_xyz(&c.points, &mut buf),
            CloudFormat::Bin => write_binary(&c.points, &mut buf),
        }
        .map_err(usage)?;
        write_file(&file, &buf)?;
        rows.push((c.label.clone(), kind, c.points.len(), file));
    }
    let text = match settings.format {
        Format::Json => serde_json::to_string_pretty(
            &rows
                .iter()
                .map(|(l, k, n, f)| json!({"label": l, "source": k, "points": n, "file": f}))
                .collect::<Vec<_>>(),
        )
        .expect("json"),
        Format::Csv => {
            let mut t = String::from("label,source,points,file\n");
            for (l, k, n, f) in &rows {
                t.push_str(&format!("{l},{k},{n},{}\n", f.display()));
            }
            t
        }
        Format::Md => {
            let mut t = String::from("| label | source | points | file |\n|---|---|---|---|\n");
            for (l, k, n, f) in &rows {
                t.push_str(&format!("| {l} | {k} | {n} | {} |\n", f.display()));
            }
            t
        }
    };
    emit(&text);
    Ok(0)
}

fn read_path_file(path: &Path) -> Result<Vec<stpr::Point3>, Failure> {
    let text = fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if csv {
        export::read_csv(text.as_bytes()).map_err(usage)
    } else {
        export::read_json(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
    }
}

fn cmd_validate(settings: &Settings, scenario: &Path, path: &Path, step: Option<f64>) -> Result<u8, Failure> {
    let mut loaded = load(scenario, settings)?;
    let waypoints = read_path_file(path)?;
    let step = step.unwrap_or(loaded.scenario.grid_resolution / 10.0);
    if !(step.is_finite() && step > 0.0) {
        return Err(usage("--step must be positive"));
    }
    let env = loaded.scenario.environment.clone();
    let constraints = loaded.constraints.clone();
    let report = match loaded.oracle() {
        Some(o) => validate_path_with(&waypoints, &constraints, &env, step, o),
        None => validate_path(&waypoints, &constraints, &env, step),
    };
    let text = match settings.format {
        Format::Json => serde_json::to_string_pretty(&report).expect("json"),
        Format::Csv => {
            let mut t = String::from("segments,samples_checked,clean,segment,x,y,z,label,kind\n");
            t.push_str(&format!("{},{},{}", report.segments, report.samples_checked, report.is_clean()));
            match &report.violation {
                Some(v) => t.push_str(&format!(
                    ",{},{},{},{},{},{}\n",
                    v.segment,
                    v.point.x,
                    v.point.y,
                    v.point.z,
                    v.label,
                    serde_json::to_value(v.kind).expect("json").as_str().unwrap_or_default()
                )),
                None => t.push_str(",,,,,,\n"),
            }
            t
        }
        Format::Md => match &report.violation {
            None => format!(
                "clean: {} segments, {} samples checked at step {step}",
                report.segments, report.samples_checked
            ),
            Some(v) => format!(
                "violation: segment {} at {} inside `{}` ({:?})",
                v.segment, v.point, v.label, v.kind
            ),
        },
    };
    emit(&text);
    Ok(if report.is_clean() { 0 } else { EXIT_FAIL })
}

fn cmd_bench(
    settings: &Settings,
    cfg: &Config,
    scenarios: &[PathBuf],
    runs: Option<usize>,
    methods: &[String],
    density: &[usize],
) -> Result<u8, Failure> {
    let names: Vec<String> = if methods.is_empty() {
        cfg.methods.clone().unwrap_or_else(|| vec!["all".into()])
    } else {
        methods.to_vec()
    };
    let mut parsed = Vec::new();
    for n in &names {
        if n == "all" {
            parsed.extend(Method::ALL);
        } else {
            parsed.push(n.parse::<Method>().map_err(usage)?);
        }
    }
    parsed.sort();
    parsed.dedup();

    let mut loaded = Vec::new();
    let mut prompting = BTreeMap::new();
    let mut bridge: Option<BridgeSession> = None;
    for path in scenarios {
        let mut scenario = Scenario::from_path(path).map_err(usage)?;
        if scenario.needs_bridge() {
            if bridge.is_none() {
                bridge = Some(launch_bridge(settings)?);
            }
            let session = bridge.as_mut().expect("just launched");
            let elapsed = session.resolve_scenario(&mut scenario)?;
            if !settings.fixture_mode {
                prompting.insert(scenario.id.clone(), elapsed);
            }
        }
        loaded.push(scenario);
    }
    let opts = BenchOptions {
        runs: runs.or(cfg.runs).unwrap_or(10),
        seed: settings.seed.unwrap_or(0),
        methods: parsed,
        densities: if density.is_empty() {
            cfg.densities.clone().unwrap_or_default()
        } else {
            density.to_vec()
        },
        validation_step: cfg.validation_step,
        prompting,
    };
    let records = run_batch(&loaded, &opts, bridge.as_mut().map(|b| b as &mut dyn ExternalOracle));
    let report = emit_tables(&records);
    if let Some(dir) = settings.out_dir()? {
        write_file(&dir.join("success.csv"), report.success_csv.as_bytes())?;
        write_file(&dir.join("records.csv"), report.records_csv.as_bytes())?;
        write_file(&dir.join("runtime.csv"), report.runtime_csv.as_bytes())?;
        write_file(&dir.join("density.csv"), report.density_csv.as_bytes())?;
        write_file(&dir.join("report.md"), report.markdown.as_bytes())?;
    }
    match settings.format {
        Format::Md => emit(&report.markdown),
        Format::Csv => emit(&report.success_csv),
        Format::Json => emit(
            &serde_json::to_string_pretty(&json!({
                "records": records,
                "aggregates": stpr::harness::aggregate(&records),
            }))
            .expect("json"),
        ),
    }
    if let Some(b) = bridge {
        b.shutdown()?;
    }
    Ok(0)
}

fn cmd_gen(
    settings: &Settings,
    scenario: &Path,
    instruction: &str,
    params: &[(String, Value)],
    fixture: Option<&str>,
) -> Result<u8, Failure> {
    if instruction.trim().is_empty() {
        return Err(usage("--instruction must not be empty"));
    }
    let s = Scenario::from_path(scenario).map_err(usage)?;
    let params: BTreeMap<String, Value> = params.iter().cloned().collect();
    let mut session = launch_bridge(settings)?;
    let generated = session.generate(instruction, &s.environment, &params, fixture)?;
    let doc = json!({
        "expr": generated.to_expr(),
        "provenance": generated.provenance,
        "prompting_s": if settings.fixture_mode { Value::Null } else { json!(generated.elapsed) },
    });
    let text = serde_json::to_string_pretty(&doc).expect("json");
    if let Some(dir) = settings.out_dir()? {
        write_file(&dir.join(format!("{}.constraint.json", generated.handle)), text.as_bytes())?;
    }
    emit(&text);
    session.shutdown()?;
    Ok(0)
}

fn run(cli: Cli) -> Result<u8, Failure> {
    let cfg = Config::discover(cli.config.as_deref()).map_err(usage)?;
    match &cli.command {
        Command::Plan {
            common,
            scenario,
            method,
            vanilla,
            sample_count,
            iterations,
        } => cmd_plan(
            &Settings::merge(common, &cfg, Format::Json)?,
            scenario,
            *method,
            *vanilla,
            *sample_count,
            *iterations,
        ),
        Command::Sample {
            common,
            scenario,
            sample_count,
            cloud_format,
        } => cmd_sample(&Settings::merge(common, &cfg, Format::Md)?, scenario, *sample_count, *cloud_format),
        Command::Validate {
            common,
            scenario,
            path,
            step,
        } => cmd_validate(&Settings::merge(common, &cfg, Format::Json)?, scenario, path, *step),
        Command::Bench {
            common,
            scenario,
            runs,
            methods,
            density,
        } => cmd_bench(&Settings::merge(common, &cfg, Format::Md)?, &cfg, scenario, *runs, methods, density),
        Command::GenConstraint {
            common,
            scenario,
            instruction,
            params,
            fixture,
        } => cmd_gen(
            &Settings::merge(common, &cfg, Format::Json)?,
            scenario,
            instruction,
            params,
            fixture.as_deref(),
        ),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Usage(msg)) => {
            eprintln!("stpr: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Bridge(msg)) => {
            eprintln!("stpr: {msg}");
            ExitCode::from(EXIT_BRIDGE)
        }
    }
}
