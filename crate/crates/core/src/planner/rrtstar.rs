use std::f64::consts::PI;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::Point3;
use crate::scene::Scenario;

use super::{path_cost, Certificate, Obstacles, Outcome, PlanError, PlanResult, PlanStats, Problem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewireSchedule {
    #[default]
    Fixed,
    /// `min(rewire_radius, gamma * sqrt(ln n / n))`.
    Shrinking,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeCheck {
    /// Check points along every edge, spaced `min(step_size, R) / 2`.
    #[default]
    Interpolated,
    /// Check tree nodes only. Edges may clip obstacles between nodes.
    NodeOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RrtConfig {
    pub max_iterations: u64,
    pub step_size: f64,
    pub goal_bias: f64,
    pub rewire_radius: f64,
    pub rewire_schedule: RewireSchedule,
    /// Shrinking-schedule constant; derived from the workspace area if unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    pub edge_check: EdgeCheck,
}

impl Default for RrtConfig {
    fn default() -> Self {
        RrtConfig {
            max_iterations: 20_000,
            step_size: 0.25,
            goal_bias: 0.05,
            rewire_radius: 1.0,
            rewire_schedule: RewireSchedule::Fixed,
            gamma: None,
            edge_check: EdgeCheck::Interpolated,
        }
    }
}

impl RrtConfig {
    pub fn validate(&self) -> Result<(), String> {
        let pos = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(format!("rrt.{name} must be positive, got {v}"))
            }
        };
        pos("step_size", self.step_size)?;
        pos("rewire_radius", self.rewire_radius)?;
        if let Some(g) = self.gamma {
            pos("gamma", g)?;
        }
        if !(0.0..=1.0).contains(&self.goal_bias) {
            return Err(format!("rrt.goal_bias must be in [0, 1], got {}", self.goal_bias));
        }
        Ok(())
    }

    pub fn with_iterations(mut self, n: u64) -> Self {
        self.max_iterations = n;
        self
    }
}

/// Uniform bucket grid over the plane for nearest and radius queries.
struct Buckets {
    x0: f64,
    y0: f64,
    cell: f64,
    nx: usize,
    ny: usize,
    slots: Vec<Vec<u32>>,
}

impl Buckets {
    fn new(x0: f64, y0: f64, wx: f64, wy: f64, cell: f64) -> Self {
        let nx = (wx / cell).ceil().max(1.0) as usize;
        let ny = (wy / cell).ceil().max(1.0) as usize;
        Buckets {
            x0,
            y0,
            cell,
            nx,
            ny,
            slots: vec![Vec::new(); nx * ny],
        }
    }

    fn coords(&self, p: &Point3) -> (usize, usize) {
        let cx = ((p.x - self.x0) / self.cell).floor().clamp(0.0, (self.nx - 1) as f64) as usize;
        let cy = ((p.y - self.y0) / self.cell).floor().clamp(0.0, (self.ny - 1) as f64) as usize;
        (cx, cy)
    }

    fn insert(&mut self, p: &Point3, id: u32) {
        let (cx, cy) = self.coords(p);
        self.slots[cx * self.ny + cy].push(id);
    }

    fn nearest(&self, nodes: &[Point3], q: &Point3) -> u32 {
        let (cx, cy) = self.coords(q);
        let mut best = (f64::INFINITY, u32::MAX);
        let max_ring = self.nx.max(self.ny);
        for ring in 0..=max_ring {
            // anything in this ring is at least (ring - 1) cells away
            let floor = (ring as f64 - 1.0).max(0.0) * self.cell;
            if best.0 <= floor * floor {
                break;
            }
            let ring = ring as isize;
            for dx in -ring..=ring {
                for dy in -ring..=ring {
                    if dx.abs() != ring && dy.abs() != ring {
                        continue;
                    }
                    let (x, y) = (cx as isize + dx, cy as isize + dy);
                    if x < 0 || y < 0 || x >= self.nx as isize || y >= self.ny as isize {
                        continue;
                    }
                    for &id in &self.slots[x as usize * self.ny + y as usize] {
                        let d = planar_sq(&nodes[id as usize], q);
                        if d < best.0 || (d == best.0 && id < best.1) {
                            best = (d, id);
                        }
                    }
                }
            }
        }
        best.1
    }

    fn within(&self, nodes: &[Point3], q: &Point3, r: f64, out: &mut Vec<u32>) {
        out.clear();
        let (cx, cy) = self.coords(q);
        let reach = (r / self.cell).ceil() as isize;
        let r2 = r * r;
        for x in (cx as isize - reach).max(0)..=(cx as isize + reach).min(self.nx as isize - 1) {
            for y in (cy as isize - reach).max(0)..=(cy as isize + reach).min(self.ny as isize - 1) {
                for &id in &self.slots[x as usize * self.ny + y as usize] {
                    if planar_sq(&nodes[id as usize], q) <= r2 {
                        out.push(id);
                    }
                }
            }
        }
        out.sort_unstable();
    }
}

fn planar_sq(a: &Point3, b: &Point3) -> f64 {
    let (dx, dy) = (a.x - b.x, a.y - b.y);
    dx * dx + dy * dy
}

struct Tree {
    pos: Vec<Point3>,
    parent: Vec<u32>,
    cost: Vec<f64>,
    children: Vec<Vec<u32>>,
}

impl Tree {
    fn add(&mut self, p: Point3, parent: u32, cost: f64) -> u32 {
        let id = self.pos.len() as u32;
        self.pos.push(p);
        self.parent.push(parent);
        self.cost.push(cost);
        self.children.push(Vec::new());
        if parent != u32::MAX {
            self.children[parent as usize].push(id);
        }
        id
    }

    fn reparent(&mut self, node: u32, new_parent: u32, new_cost: f64, stack: &mut Vec<u32>) {
        let n = node as usize;
        let old = self.parent[n] as usize;
        if let Some(i) = self.children[old].iter().position(|&c| c == node) {
            self.children[old].swap_remove(i);
        }
        self.children[new_parent as usize].push(node);
        self.parent[n] = new_parent;
        let delta = self.cost[n] - new_cost;
        self.cost[n] = new_cost;
        stack.clear();
        stack.extend_from_slice(&self.children[n]);
        while let Some(c) = stack.pop() {
            self.cost[c as usize] -= delta;
            stack.extend_from_slice(&self.children[c as usize]);
        }
    }
}

pub fn plan_rrtstar<R: Rng + ?Sized>(
    scenario: &Scenario,
    obstacles: &dyn Obstacles,
    rng: &mut R,
) -> Result<PlanResult, PlanError> {
    rrtstar(&Problem::from_scenario(scenario), &scenario.rrt, obstacles, rng)
}

pub fn rrtstar<R: Rng + ?Sized>(
    problem: &Problem,
    cfg: &RrtConfig,
    obstacles: &dyn Obstacles,
    rng: &mut R,
) -> Result<PlanResult, PlanError> {
    cfg.validate().map_err(PlanError::InvalidConfig)?;
    let t0 = Instant::now();
    let r = problem.robot_radius;
    let z = problem.plane_z();
    let start = problem.start;
    if obstacles.collides(&start, r) {
        return Err(PlanError::StartBlocked(start));
    }

    let (lo, hi) = (problem.bounds.min(), problem.bounds.max());
    let (wx, wy) = (hi.x - lo.x, hi.y - lo.y);
    let spacing = cfg.step_size.min(r) / 2.0;
    let interpolate = cfg.edge_check == EdgeCheck::Interpolated;
    let edge_free = |a: &Point3, b: &Point3| -> bool {
        if !interpolate {
            return true;
        }
        let n = (a.distance(b) / spacing).ceil() as usize;
        (1..n).all(|j| !obstacles.collides(&a.lerp(b, j as f64 / n as f64), r))
    };
    let gamma = cfg.gamma.unwrap_or_else(|| 2.0 * (1.5 * wx * wy / PI).sqrt());
    let radius_at = |n: usize| match cfg.rewire_schedule {
        RewireSchedule::Fixed => cfg.rewire_radius,
        RewireSchedule::Shrinking => {
            let n = n.max(2) as f64;
            cfg.rewire_radius.min(gamma * (n.ln() / n).sqrt()).max(cfg.step_size)
        }
    };

    let mut tree = Tree {
        pos: Vec::new(),
        parent: Vec::new(),
        cost: Vec::new(),
        children: Vec::new(),
    };
    let mut buckets = Buckets::new(lo.x, lo.y, wx, wy, cfg.rewire_radius.max(cfg.step_size));
    let root = tree.add(start, u32::MAX, 0.0);
    buckets.insert(&start, root);

    let mut goal_nodes: Vec<u32> = Vec::new();
    if problem.in_goal(&start) {
        goal_nodes.push(root);
    }
    let mut best = goal_nodes.first().map(|&g| (0.0, g));
    let mut trace = Vec::new();
    if let Some((c, _)) = best {
        trace.push((0, c));
    }

    let mut near = Vec::new();
    let mut candidates: Vec<(f64, u32)> = Vec::new();
    let mut stack = Vec::new();
    let goal = problem.goal;

    for it in 1..=cfg.max_iterations {
        let sample = if rng.random::<f64>() < cfg.goal_bias {
            goal
        } else {
            Point3::new(
                if wx > 0.0 { rng.random_range(lo.x..hi.x) } else { lo.x },
                if wy > 0.0 { rng.random_range(lo.y..hi.y) } else { lo.y },
                z,
            )
        };
        let nearest = buckets.nearest(&tree.pos, &sample);
        let from = tree.pos[nearest as usize];
        let d = from.planar_distance(&sample);
        if d <= 0.0 {
            continue;
        }
        let new = if d <= cfg.step_size {
            sample
        } else {
            from.lerp(&sample, cfg.step_size / d)
        };
        if obstacles.collides(&new, r) {
            continue;
        }

        let radius = radius_at(tree.pos.len());
        buckets.within(&tree.pos, &new, radius, &mut near);
        if near.binary_search(&nearest).is_err() {
            near.push(nearest);
        }
        candidates.clear();
        candidates.extend(
            near.iter()
                .map(|&i| (tree.cost[i as usize] + tree.pos[i as usize].distance(&new), i)),
        );
        candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let Some(&(new_cost, parent)) = candidates.iter().find(|(_, i)| edge_free(&tree.pos[*i as usize], &new))
        else {
            continue;
        };
        let id = tree.add(new, parent, new_cost);
        buckets.insert(&new, id);

        let mut changed = false;
        for &m in &near {
            if m == parent {
                continue;
            }
            let through = new_cost + new.distance(&tree.pos[m as usize]);
            if through + 1e-12 < tree.cost[m as usize] && edge_free(&new, &tree.pos[m as usize]) {
                tree.reparent(m, id, through, &mut stack);
                changed = true;
            }
        }
        if problem.in_goal(&new) {
            goal_nodes.push(id);
            changed = true;
        }
        if changed && !goal_nodes.is_empty() {
            let cand = goal_nodes
                .iter()
                .map(|&g| (tree.cost[g as usize], g))
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
                .expect("non-empty");
            if best.is_none_or(|(c, _)| cand.0 < c) {
                trace.push((it, cand.0));
            }
            best = Some(cand);
        }
    }

    let mut stats = PlanStats {
        iterations: Some(cfg.max_iterations),
        tree_size: Some(tree.pos.len()),
        cost_trace: trace,
        ..Default::default()
    };
    let outcome = match best {
        None => Outcome::NoPathExists {
            certificate: Certificate::IterationBudgetExhausted,
        },
        Some((_, g)) => {
            let mut nodes = vec![g];
            while tree.parent[*nodes.last().unwrap() as usize] != u32::MAX {
                nodes.push(tree.parent[*nodes.last().unwrap() as usize]);
            }
            nodes.reverse();
            let mut path = vec![tree.pos[nodes[0] as usize]];
            for w in nodes.windows(2) {
                let (a, b) = (tree.pos[w[0] as usize], tree.pos[w[1] as usize]);
                let n = (a.distance(&b) / spacing).ceil().max(1.0) as usize;
                path.extend((1..=n).map(|j| if j == n { b } else { a.lerp(&b, j as f64 / n as f64) }));
            }
            let cost = path_cost(&path);
            Outcome::PathFound { path, cost }
        }
    };
    stats.planning_time = t0.elapsed().as_secs_f64();
    Ok(PlanResult { outcome, stats })
}
