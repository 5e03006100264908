//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

use std::collections::BinaryHeap;
use std::cmp::Reverse;
use std::f64::consts::SQRT_2;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::Rng;
use stpr::constraint::{heat_radius, ConstraintExpr};
use stpr::harness::{aggregate, run_batch, BenchOptions, Method, RunOutcome};
use stpr::planner::{rrtstar, GridSpec, NoObstacles, Obstacles, Outcome, PlanError, Problem, RrtConfig};
use stpr::sampling::{rng_for, sample_constraint, DEFAULT_ATTEMPTS_PER_POINT};
use stpr::scene::FixtureLibrary;
use stpr::{Aabb, Point3, PointCloudIndex, Scenario};

fn scenarios_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn scenario(id: &str) -> Scenario {
    Scenario::from_path(&scenarios_dir().join(format!("{id}.json"))).expect("scenario loads")
}

type Verdict = Result<String, String>;

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(budget: Duration, t0: Instant, detail: String) -> Verdict {
    let took = t0.elapsed();
    check(took <= budget, format!("{detail}; {:.1}s of {}s budget", took.as_secs_f64(), budget.as_secs()))
}

// 1. Vanilla planners fail everywhere, constraint-aware planners succeed
//    everywhere, S1/S3 by nonexistence and S2/S4 by validated paths.
fn scenario_table() -> Verdict {
    let t0 = Instant::now();
    let ids = ["s1", "s2", "s3", "s4"];
    let all: Vec<Scenario> = ids.iter().map(|id| scenario(id)).collect();
    let records = run_batch(
        &all,
        &BenchOptions {
            runs: 10,
            seed: 42,
            ..Default::default()
        },
        None,
    );
    let mut problems = Vec::new();
    for a in aggregate(&records) {
        let want = if a.method.uses_constraints() { 100.0 } else { 0.0 };
        if a.success_pct != want || a.runs != 10 {
            problems.push(format!("{} {}: {}%", a.scenario_id, a.method, a.success_pct));
        }
    }
    for r in &records {
        let expected = match (r.method.uses_constraints(), r.scenario_id.as_str()) {
            (true, "s1" | "s3") => r.outcome == RunOutcome::NoPathExists,
            (true, _) => r.outcome == RunOutcome::PathFound && r.valid,
            // vanilla failures must come from the validator rejecting a path
            (false, _) => r.outcome == RunOutcome::PathFound && !r.valid,
        };
        if !expected {
            problems.push(format!("{} {} run {}: {:?} valid={}", r.scenario_id, r.method, r.run_index, r.outcome, r.valid));
        }
    }
    if !problems.is_empty() {
        return Err(problems.join("; "));
    }
    within(Duration::from_secs(120), t0, format!("{} runs match 0/100 pattern", records.len()))
}

/// Cells blocked on a unit lattice; `q` collides when its nearest lattice
/// cell is blocked.
struct Mask {
    n: usize,
    blocked: Vec<bool>,
}

impl Obstacles for Mask {
    fn collides(&self, q: &Point3, _: f64) -> bool {
        let (x, y) = (q.x.round() as usize, q.y.round() as usize);
        self.blocked[x * self.n + y]
    }
}

/// Multi-source Dijkstra from `sources` over free 8-connected cells.
fn dijkstra(mask: &Mask, sources: &[usize]) -> Vec<f64> {
    let n = mask.n;
    let mut dist = vec![f64::INFINITY; n * n];
    let mut heap = BinaryHeap::new();
    for &s in sources {
        dist[s] = 0.0;
        heap.push(Reverse((0u64, s)));
    }
    // costs are carried as exact f64 bit patterns; non-negative floats order like their bits
    while let Some(Reverse((bits, id))) = heap.pop() {
        let d = f64::from_bits(bits);
        if d > dist[id] {
            continue;
        }
        let (x, y) = ((id / n) as isize, (id % n) as isize);
        for dx in -1..=1isize {
            for dy in -1..=1isize {
                if dx == 0 && dy == 0 {
                    continue;
                }
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= n as isize || ny >= n as isize {
                    continue;
                }
                let j = nx as usize * n + ny as usize;
                if mask.blocked[j] {
                    continue;
                }
                let nd = d + if dx != 0 && dy != 0 { SQRT_2 } else { 1.0 };
                if nd < dist[j] {
                    dist[j] = nd;
                    heap.push(Reverse((nd.to_bits(), j)));
                }
            }
        }
    }
    dist
}

// 2. A* cost equals a uniform-cost-search oracle on random 20x20 grids, and
//    the heuristic never exceeds the true remaining cost of expanded cells.
fn astar_optimality() -> Verdict {
    let t0 = Instant::now();
    let n = 20usize;
    let mut rng = rng_for(2, "astar-oracle");
    let (mut solved, mut unsolved, mut expanded_checked) = (0, 0, 0usize);
    for instance in 0..100 {
        let density = 0.4 * instance as f64 / 99.0;
        let mut blocked = vec![false; n * n];
        while (blocked.iter().filter(|b| **b).count() as f64) < density * (n * n) as f64 {
            let (x0, y0) = (rng.random_range(0..n), rng.random_range(0..n));
            let (w, h) = (rng.random_range(1..=4), rng.random_range(1..=4));
            for x in x0..(x0 + w).min(n) {
                for y in y0..(y0 + h).min(n) {
                    blocked[x * n + y] = true;
                }
            }
        }
        let free: Vec<usize> = (0..n * n).filter(|&i| !blocked[i]).collect();
        let mask = Mask { n, blocked };
        let start = free[rng.random_range(0..free.len())];
        let goal = free[rng.random_range(0..free.len())];
        let radius = [0.5, 1.0, 1.5][instance % 3];
        let pt = |id: usize| Point3::new((id / n) as f64, (id % n) as f64, 0.0);
        let problem = Problem {
            bounds: Aabb::new(Point3::new(0.0, 0.0, 0.0), Point3::new((n - 1) as f64, (n - 1) as f64, 1.0)).unwrap(),
            start: pt(start),
            goal: pt(goal),
            goal_radius: radius,
            robot_radius: 0.1,
        };
        let grid = GridSpec::covering(&problem.bounds, 1.0, 0.0).unwrap();
        let goal_set: Vec<usize> = (0..n * n)
            .filter(|&i| !mask.blocked[i] && pt(i).planar_distance(&problem.goal) <= radius)
            .collect();
        let to_goal = dijkstra(&mask, &goal_set);
        let oracle = to_goal[start];

        let mut trace = Vec::new();
        let got = match stpr::planner::astar_traced(&problem, &grid, &mask, &mut trace) {
            Ok(r) => r.cost(),
            Err(PlanError::GoalRegionEmpty) => f64::INFINITY,
            Err(e) => return Err(format!("instance {instance}: {e}")),
        };
        if oracle.is_finite() != got.is_finite() || (oracle.is_finite() && (oracle - got).abs() > 1e-9) {
            return Err(format!("instance {instance}: A* {got} vs oracle {oracle}"));
        }
        for (ix, iy) in trace {
            let h = stpr::planner::astar::heuristic(&grid, &problem, ix, iy);
            let id = ix * n + iy;
            if h > to_goal[id] + 1e-12 {
                return Err(format!("instance {instance}: h={h} > remaining {} at ({ix},{iy})", to_goal[id]));
            }
            expanded_checked += 1;
        }
        if oracle.is_finite() {
            solved += 1;
        } else {
            unsolved += 1;
        }
    }
    within(
        Duration::from_secs(30),
        t0,
        format!("100 instances ({solved} solved, {unsolved} without path), {expanded_checked} expansions admissible"),
    )
}

// 3. kd-tree nearest distances equal brute force.
fn kdtree_oracle() -> Verdict {
    let t0 = Instant::now();
    let mut rng = rng_for(3, "kd-oracle");
    let mut draw = |lo: f64, hi: f64| Point3::new(rng.random_range(lo..hi), rng.random_range(lo..hi), rng.random_range(lo..hi));
    let points: Vec<Point3> = (0..10_000).map(|_| draw(-5.0, 5.0)).collect();
    let queries: Vec<Point3> = (0..1_000).map(|_| draw(-6.0, 6.0)).collect();
    let index = PointCloudIndex::from_points(points.clone()).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for q in &queries {
        let brute = points.iter().map(|p| p.distance(q)).fold(f64::INFINITY, f64::min);
        worst = worst.max((index.nearest(q).distance - brute).abs());
    }
    if worst > 1e-9 {
        return Err(format!("max deviation {worst:e}"));
    }
    within(Duration::from_secs(5), t0, format!("1000 queries over 10^4 points, max deviation {worst:e}"))
}

// 4. Every fixture cloud has exactly K points, all inside the forbidden region.
fn sampler_soundness() -> Verdict {
    let t0 = Instant::now();
    let library = FixtureLibrary::from_path(&scenarios_dir().join("fixtures.json")).map_err(|e| e.to_string())?;
    let bounds = scenario("s1").environment.bounds;
    let mut clouds = 0;
    for name in library.names() {
        let expr = library.get(name).unwrap();
        for k in [100, 1_000, 10_000] {
            let mut rng = rng_for(4, &format!("{name}/{k}"));
            let cloud = sample_constraint(name, expr, k, &bounds, &mut rng, k * DEFAULT_ATTEMPTS_PER_POINT, None)
                .map_err(|e| e.to_string())?;
            if cloud.points.len() != k {
                return Err(format!("{name} K={k}: {} points", cloud.points.len()));
            }
            if let Some(p) = cloud.points.iter().find(|p| !expr.evaluate(**p).unwrap_or(false)) {
                return Err(format!("{name} K={k}: {p} is not forbidden"));
            }
            clouds += 1;
        }
    }
    within(Duration::from_secs(10), t0, format!("{clouds} clouds, all points forbidden, sizes exact"))
}

// 5. The heat fixture's forbidden radius matches the closed-form value.
fn heat_boundary() -> Verdict {
    let t0 = Instant::now();
    let library = FixtureLibrary::from_path(&scenarios_dir().join("fixtures.json")).map_err(|e| e.to_string())?;
    let expr = library.get("s4_heat").ok_or("missing s4_heat")?.clone();
    let ConstraintExpr::HeatField {
        source,
        source_box,
        h0,
        alpha,
        h_safe,
        ..
    } = &expr
    else {
        return Err("s4_heat is not a heat field".into());
    };
    let r_star = (h0 * alpha / (4.0 * std::f64::consts::PI * h_safe)).sqrt();
    if (heat_radius(*h0, *alpha, *h_safe) - r_star).abs() > 1e-12 {
        return Err("library radius disagrees with the direct formula".into());
    }
    let bounds = scenario("s4").environment.bounds;
    let cloud = sample_constraint("s4_heat", &expr, 10_000, &bounds, &mut rng_for(5, "heat"), 10_000_000, None)
        .map_err(|e| e.to_string())?;
    let max_d = cloud
        .points
        .iter()
        .filter(|p| !source_box.contains_closed(p))
        .map(|p| p.distance(source))
        .fold(0.0, f64::max);
    if !(0.88..=0.893).contains(&max_d) {
        return Err(format!("max forbidden distance {max_d}"));
    }
    // directions in the upper half-space that stay clear of the source box
    let dirs = [(-1.0, 0.0, 0.0), (1.0, 0.0, 0.0), (0.0, -1.0, 0.0), (-0.6, -0.6, 0.5), (0.5, -0.5, 0.7)];
    for (dx, dy, dz) in dirs {
        let norm = ((dx * dx + dy * dy + dz * dz) as f64).sqrt();
        let at = |d: f64| Point3::new(source.x + dx / norm * d, source.y + dy / norm * d, source.z + dz / norm * d);
        let inside = expr.evaluate(at(r_star - 1e-6)).map_err(|e| e.to_string())?;
        let outside = expr.evaluate(at(r_star + 1e-6)).map_err(|e| e.to_string())?;
        if !inside || outside {
            return Err(format!("verdict does not flip at r* along ({dx},{dy},{dz})"));
        }
    }
    within(
        Duration::from_secs(5),
        t0,
        format!("r* = {r_star:.6}, max sampled distance {max_d:.6}, verdict flips within 1e-6"),
    )
}

// 6. Sparse clouds leak through a narrow band; dense clouds do not; runtime
//    grows with K.
fn density_trend() -> Verdict {
    let band = scenario("narrow_band");
    let records = run_batch(
        &[band],
        &BenchOptions {
            runs: 10,
            seed: 6,
            methods: vec![Method::StprAstar],
            densities: vec![100, 1_000, 10_000],
            ..Default::default()
        },
        None,
    );
    let aggs = aggregate(&records);
    let row = |k: usize| aggs.iter().find(|a| a.sample_count == k).expect("density row");
    let (sparse, mid, dense) = (row(100), row(1_000), row(10_000));
    let detail = format!(
        "invalid paths K=100: {}/10, K=10000: {}/10; mean total {:.4}s < {:.4}s < {:.4}s",
        sparse.invalid_paths, dense.invalid_paths, sparse.mean_total, mid.mean_total, dense.mean_total
    );
    check(
        sparse.invalid_paths >= 1
            && dense.invalid_paths == 0
            && sparse.mean_total < mid.mean_total
            && mid.mean_total < dense.mean_total,
        detail,
    )
}

// 7. RRT* best cost never increases; on an empty workspace the mean final
//    cost over 20 seeds is within 15% of the straight line.
fn rrt_convergence() -> Verdict {
    let t0 = Instant::now();
    let problem = Problem {
        bounds: Aabb::new(Point3::new(0.0, 0.0, 0.0), Point3::new(10.0, 10.0, 1.0)).unwrap(),
        start: Point3::new(1.0, 1.0, 0.1),
        goal: Point3::new(9.0, 9.0, 0.1),
        goal_radius: 0.25,
        robot_radius: 0.25,
    };
    // shortest possible path ends on the goal disc
    let straight = problem.start.planar_distance(&problem.goal) - problem.goal_radius;
    let cfg = RrtConfig::default();
    let mut costs = Vec::new();
    for seed in 0..20u64 {
        let r = rrtstar(&problem, &cfg, &NoObstacles, &mut rng_for(seed, "rrtstar")).map_err(|e| e.to_string())?;
        let trace = &r.stats.cost_trace;
        if trace.windows(2).any(|w| w[1].1 > w[0].1) {
            return Err(format!("seed {seed}: best cost increased"));
        }
        let at_2k = trace.iter().take_while(|(it, _)| *it <= 2_000).last().map(|t| t.1);
        if let Some(c2k) = at_2k {
            if r.cost() > c2k + 1e-9 {
                return Err(format!("seed {seed}: cost at 20k {} > cost at 2k {c2k}", r.cost()));
            }
        }
        match r.outcome {
            Outcome::PathFound { cost, .. } => costs.push(cost),
            Outcome::NoPathExists { .. } => return Err(format!("seed {seed}: no path in open space")),
        }
    }
    let mean = costs.iter().sum::<f64>() / costs.len() as f64;
    let gap = (mean - straight).abs() / straight;
    if gap > 0.15 {
        return Err(format!("mean cost {mean:.3} vs straight line {straight:.3} ({:.1}%)", 100.0 * gap));
    }
    within(
        Duration::from_secs(60),
        t0,
        format!("monotone traces; mean cost {mean:.3} vs straight line {straight:.3} ({:.1}%)", 100.0 * gap),
    )
}

// 8. `stpr bench --seed 42` twice gives byte-identical CSV.
fn bench_determinism() -> Verdict {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let run = |out: &Path| -> Result<Vec<u8>, String> {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_stpr"));
        cmd.arg("bench");
        for id in ["s1", "s2", "s3", "s4"] {
            cmd.arg("--scenario").arg(scenarios_dir().join(format!("{id}.json")));
        }
        let o = cmd
            .args(["--runs", "1", "--seed", "42", "--format", "csv", "--output-dir"])
            .arg(out)
            .output()
            .map_err(|e| e.to_string())?;
        if !o.status.success() {
            return Err(format!("bench exited with {}: {}", o.status, String::from_utf8_lossy(&o.stderr)));
        }
        Ok(o.stdout)
    };
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let (out_a, out_b) = (run(&a)?, run(&b)?);
    let read = |p: PathBuf| std::fs::read(&p).map_err(|e| format!("{}: {e}", p.display()));
    for f in ["success.csv", "records.csv"] {
        if read(a.join(f))? != read(b.join(f))? {
            return Err(format!("{f} differs between runs"));
        }
    }
    check(
        out_a == out_b && !out_a.is_empty(),
        format!("success.csv, records.csv and stdout identical ({} bytes)", out_a.len()),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 8] = [
        ("scenario success table", scenario_table),
        ("A* matches uniform-cost oracle", astar_optimality),
        ("kd-tree matches brute force", kdtree_oracle),
        ("sampler soundness", sampler_soundness),
        ("heat-model boundary", heat_boundary),
        ("point-density trend", density_trend),
        ("RRT* convergence", rrt_convergence),
        ("bench determinism", bench_determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("criterion {}: PASS  {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {}: FAIL  {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
