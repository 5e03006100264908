use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::SQRT_2;
use std::time::Instant;

use crate::scene::Scenario;

use super::{path_cost, Certificate, GridSpec, Obstacles, Outcome, PlanError, PlanResult, PlanStats, Problem};

const MOVES: [(isize, isize); 8] = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)];

#[derive(Clone, Copy)]
struct Open {
    f: f64,
    h: f64,
    g: f64,
    id: u32,
}

impl PartialEq for Open {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Open {}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Open {
    // BinaryHeap pops the maximum, so "greater" means lower f, then lower h,
    // then lower cell id.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| other.h.total_cmp(&self.h))
            .then_with(|| other.id.cmp(&self.id))
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Cell {
    Unknown,
    Free,
    Blocked,
}

/// A* over the scenario's grid at its configured resolution.
pub fn plan_astar(scenario: &Scenario, obstacles: &dyn Obstacles) -> Result<PlanResult, PlanError> {
    let problem = Problem::from_scenario(scenario);
    let grid = GridSpec::covering(&problem.bounds, scenario.grid_resolution, problem.plane_z())?;
    astar(&problem, &grid, obstacles)
}

pub fn astar(problem: &Problem, grid: &GridSpec, obstacles: &dyn Obstacles) -> Result<PlanResult, PlanError> {
    search(problem, grid, obstacles, None)
}

/// Like [`astar`], also recording every expanded cell in expansion order.
pub fn astar_traced(
    problem: &Problem,
    grid: &GridSpec,
    obstacles: &dyn Obstacles,
    expanded: &mut Vec<(usize, usize)>,
) -> Result<PlanResult, PlanError> {
    search(problem, grid, obstacles, Some(expanded))
}

/// Distance-to-goal-region heuristic: planar distance to the goal minus the
/// goal radius. Consistent, since it is 1-Lipschitz and zero on the goal set.
pub fn heuristic(grid: &GridSpec, problem: &Problem, ix: usize, iy: usize) -> f64 {
    (grid.point(ix, iy).planar_distance(&problem.goal) - problem.goal_radius).max(0.0)
}

fn search(
    problem: &Problem,
    grid: &GridSpec,
    obstacles: &dyn Obstacles,
    mut trace: Option<&mut Vec<(usize, usize)>>,
) -> Result<PlanResult, PlanError> {
    let t0 = Instant::now();
    let r = problem.robot_radius;
    let n = grid.len();
    let mut state = vec![Cell::Unknown; n];
    let mut free = |id: usize| -> bool {
        if state[id] == Cell::Unknown {
            let (ix, iy) = grid.cell(id);
            state[id] = if obstacles.collides(&grid.point(ix, iy), r) {
                Cell::Blocked
            } else {
                Cell::Free
            };
        }
        state[id] == Cell::Free
    };

    let (sx, sy) = grid
        .nearest_cell(&problem.start)
        .ok_or_else(|| PlanError::InvalidConfig(format!("start {} is off the grid", problem.start)))?;
    let start = grid.id(sx, sy);
    if !free(start) {
        return Err(PlanError::StartBlocked(grid.point(sx, sy)));
    }

    let goal = problem.goal;
    let gr = problem.goal_radius;
    let mut goal_cells = 0usize;
    let mut goal_free = false;
    for ix in grid.span(0, goal.x - gr, goal.x + gr) {
        for iy in grid.span(1, goal.y - gr, goal.y + gr) {
            if problem.in_goal(&grid.point(ix, iy)) {
                goal_cells += 1;
                goal_free |= free(grid.id(ix, iy));
            }
        }
    }
    if goal_cells == 0 || !goal_free {
        return Err(PlanError::GoalRegionEmpty);
    }

    let res = grid.resolution;
    let mut g = vec![f64::INFINITY; n];
    let mut parent = vec![u32::MAX; n];
    let mut closed = vec![false; n];
    let mut open = BinaryHeap::new();
    let mut expanded = 0u64;

    g[start] = 0.0;
    let h0 = heuristic(grid, problem, sx, sy);
    open.push(Open {
        f: h0,
        h: h0,
        g: 0.0,
        id: start as u32,
    });

    while let Some(top) = open.pop() {
        let id = top.id as usize;
        if closed[id] || top.g > g[id] {
            continue;
        }
        closed[id] = true;
        expanded += 1;
        let (ix, iy) = grid.cell(id);
        if let Some(t) = trace.as_deref_mut() {
            t.push((ix, iy));
        }
        if problem.in_goal(&grid.point(ix, iy)) {
            let mut path = vec![grid.point(ix, iy)];
            let mut cur = id;
            while parent[cur] != u32::MAX {
                cur = parent[cur] as usize;
                let (cx, cy) = grid.cell(cur);
                path.push(grid.point(cx, cy));
            }
            path.reverse();
            let cost = path_cost(&path);
            return Ok(PlanResult {
                outcome: Outcome::PathFound { path, cost },
                stats: PlanStats {
                    expanded_nodes: Some(expanded),
                    planning_time: t0.elapsed().as_secs_f64(),
                    ..Default::default()
                },
            });
        }
        for (dx, dy) in MOVES {
            let (Some(jx), Some(jy)) = (ix.checked_add_signed(dx), iy.checked_add_signed(dy)) else {
                continue;
            };
            if jx >= grid.nx || jy >= grid.ny {
                continue;
            }
            let j = grid.id(jx, jy);
            if closed[j] {
                continue;
            }
            let step = if dx != 0 && dy != 0 { res * SQRT_2 } else { res };
            let cand = g[id] + step;
            if cand < g[j] && free(j) {
                g[j] = cand;
                parent[j] = id as u32;
                let h = heuristic(grid, problem, jx, jy);
                open.push(Open {
                    f: cand + h,
                    h,
                    g: cand,
                    id: j as u32,
                });
            }
        }
    }

    Ok(PlanResult {
        outcome: Outcome::NoPathExists {
            certificate: Certificate::QueueExhausted,
        },
        stats: PlanStats {
            expanded_nodes: Some(expanded),
            planning_time: t0.elapsed().as_secs_f64(),
            ..Default::default()
        },
    })
}
