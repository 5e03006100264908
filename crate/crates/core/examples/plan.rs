//! Plan one scenario with STPR-A* through the library API.
//!
//! `cargo run --release --example plan -- scenarios/s2.json`

use std::path::PathBuf;

use stpr::sampling::materialize;
use stpr::{plan_astar, validate_path, PointCloudIndex, Scenario};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path: PathBuf = std::env::args().nth(1).ok_or("usage: plan <scenario.json>")?.into();
    let scenario = Scenario::from_path(&path)?;
    let constraints = scenario
        .resolved_constraints()
        .ok_or("scenario needs the bridge; use `stpr plan` instead")?;

    let clouds = materialize(&scenario.environment, &constraints, scenario.sample_count, 42, None)?;
    let index = PointCloudIndex::build(&clouds)?;
    let result = plan_astar(&scenario, &index)?;

    match result.path() {
        Some(p) => {
            let report = validate_path(p, &constraints, &scenario.environment, scenario.grid_resolution / 10.0);
            println!("{} waypoints, length {:.3} m, clean: {}", p.len(), result.cost(), report.is_clean());
        }
        None => println!("no path exists ({} cells expanded)", result.stats.expanded_nodes.unwrap_or(0)),
    }
    Ok(())
}
