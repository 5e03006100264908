//! Path files: JSON (waypoints plus stats) and flat `x,y,z` CSV.

use std::io::{self, BufRead, Write};

use serde::Deserialize;

use super::PlanResult;
use crate::geometry::Point3;

/// Pretty JSON: outcome, cost, waypoints and stats. Infinite costs are
/// written as `null`.
pub fn to_json(result: &PlanResult) -> String {
    serde_json::to_string_pretty(result).expect("plan results serialize")
}

pub fn write_csv<W: Write>(path: &[Point3], mut w: W) -> io::Result<()> {
    writeln!(w, "x,y,z")?;
    for p in path {
        writeln!(w, "{},{},{}", p.x, p.y, p.z)?;
    }
    Ok(())
}

pub fn read_csv<R: BufRead>(r: R) -> io::Result<Vec<Point3>> {
    let bad = |l: &str| io::Error::new(io::ErrorKind::InvalidData, format!("bad path row `{l}`"));
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || (i == 0 && t.starts_with('x')) {
            continue;
        }
        let v: Vec<f64> = t
            .split(',')
            .map(|s| s.trim().parse().map_err(|_| bad(t)))
            .collect::<io::Result<_>>()?;
        let [x, y, z] = v[..] else { return Err(bad(t)) };
        out.push(Point3::try_new(x, y, z).map_err(|_| bad(t))?);
    }
    Ok(out)
}

#[derive(Deserialize)]
struct PathDoc {
    #[serde(default)]
    path: Vec<Point3>,
}

/// Waypoints from a JSON plan file, or from a bare JSON array of points.
pub fn read_json(source: &str) -> Result<Vec<Point3>, serde_json::Error> {
    match serde_json::from_str::<Vec<Point3>>(source) {
        Ok(p) => Ok(p),
        Err(_) => serde_json::from_str::<PathDoc>(source).map(|d| d.path),
    }
}
