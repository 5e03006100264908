//! Point clouds for static objects and constraint regions.
//!
//! Objects are filled by sampling their boxes uniformly. Constraint regions
//! are filled by rejection sampling: candidates are drawn uniformly from the
//! region's over-approximating box and kept only when the predicate marks
//! them forbidden.

use std::io::{self, BufRead, Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::constraint::{ConstraintError, ConstraintExpr, ExternalOracle, NamedConstraint};
use crate::geometry::{Aabb, Point3};
use crate::scene::EnvironmentModel;

/// Candidate draws allowed per requested point before giving up.
pub const DEFAULT_ATTEMPTS_PER_POINT: usize = 1000;

#[derive(Debug, Error)]
pub enum SamplingError {
    #[error("`{label}`: accepted {accepted} of {k} points after {attempts} draws")]
    AcceptanceTooLow {
        label: String,
        k: usize,
        accepted: usize,
        attempts: usize,
    },
    #[error("`{label}`: {source}")]
    Constraint {
        label: String,
        #[source]
        source: ConstraintError,
    },
    #[error("invalid sampling request: {0}")]
    InvalidArgument(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CloudSource {
    StaticObject,
    Constraint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub label: String,
    pub source: CloudSource,
    pub points: Vec<Point3>,
}

/// Stable per-label seed: FNV-1a over the label, folded into `seed` and
/// finished with a splitmix64 round.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = seed ^ h.rotate_left(17);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn rng_for(seed: u64, label: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, label))
}

#[inline]
fn uniform_axis<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// One uniform draw inside `bbox`. Degenerate axes return their single
/// coordinate.
pub fn uniform_in<R: Rng + ?Sized>(bbox: &Aabb, rng: &mut R) -> Point3 {
    let (lo, hi) = (bbox.min(), bbox.max());
    Point3::new(
        uniform_axis(rng, lo.x, hi.x),
        uniform_axis(rng, lo.y, hi.y),
        uniform_axis(rng, lo.z, hi.z),
    )
}

/// Exactly `k` i.i.d. uniform points inside `bbox`.
pub fn sample_box<R: Rng + ?Sized>(label: &str, bbox: &Aabb, k: usize, rng: &mut R) -> PointCloud {
    PointCloud {
        label: label.to_owned(),
        source: CloudSource::StaticObject,
        points: (0..k).map(|_| uniform_in(bbox, rng)).collect(),
    }
}

/// Exactly `k` points where `expr` is forbidden, by rejection from the
/// region's bounding box (clipped to `bounds`). External leaves are
/// evaluated through `oracle` in batches.
pub fn sample_constraint<R: Rng + ?Sized>(
    label: &str,
    expr: &ConstraintExpr,
    k: usize,
    bounds: &Aabb,
    rng: &mut R,
    max_attempts: usize,
    mut oracle: Option<&mut dyn ExternalOracle>,
) -> Result<PointCloud, SamplingError> {
    if k == 0 {
        return Err(SamplingError::InvalidArgument("k must be >= 1".into()));
    }
    if max_attempts < k {
        return Err(SamplingError::InvalidArgument(format!("max_attempts {max_attempts} < k {k}")));
    }
    let wrap = |source| SamplingError::Constraint {
        label: label.to_owned(),
        source,
    };
    let too_low = |accepted, attempts| SamplingError::AcceptanceTooLow {
        label: label.to_owned(),
        k,
        accepted,
        attempts,
    };
    let Some(region) = expr.forbidden_region_bbox(bounds).map_err(wrap)? else {
        return Err(too_low(0, 0));
    };
    let bbox = region.aabb;

    let mut points = Vec::with_capacity(k);
    let mut attempts = 0usize;
    if expr.has_external() {
        let oracle = oracle
            .as_deref_mut()
            .ok_or_else(|| wrap(ConstraintError::ExternalUnavailable { handle: label.to_owned() }))?;
        while points.len() < k && attempts < max_attempts {
            let want = (2 * (k - points.len())).max(256).min(max_attempts - attempts);
            let batch: Vec<Point3> = (0..want).map(|_| uniform_in(&bbox, rng)).collect();
            attempts += want;
            let verdicts = expr.evaluate_batch(&batch, Some(&mut *oracle)).map_err(wrap)?;
            for (p, forbidden) in batch.into_iter().zip(verdicts) {
                if forbidden && points.len() < k {
                    points.push(p);
                }
            }
        }
    } else {
        while points.len() < k && attempts < max_attempts {
            let p = uniform_in(&bbox, rng);
            attempts += 1;
            if expr.evaluate(p).map_err(wrap)? {
                points.push(p);
            }
        }
    }
    if points.len() < k {
        return Err(too_low(points.len(), attempts));
    }
    Ok(PointCloud {
        label: label.to_owned(),
        source: CloudSource::Constraint,
        points,
    })
}

/// Clouds for every object and constraint, `k` points each. Each cloud gets
/// its own generator seeded from `(seed, label)`, so clouds are independent
/// of each other and of evaluation order.
pub fn materialize(
    env: &EnvironmentModel,
    constraints: &[NamedConstraint],
    k: usize,
    seed: u64,
    oracle: Option<&mut dyn ExternalOracle>,
) -> Result<Vec<PointCloud>, SamplingError> {
    let mut clouds: Vec<PointCloud> = env
        .objects
        .par_iter()
        .map(|o| {
            let mut rng = rng_for(seed, &format!("object/{}", o.name));
            sample_box(&o.name, &o.bbox, k, &mut rng)
        })
        .collect();
    let attempts = k.saturating_mul(DEFAULT_ATTEMPTS_PER_POINT);
    let sample_one = |c: &NamedConstraint, oracle: Option<&mut dyn ExternalOracle>| {
        let mut rng = rng_for(seed, &format!("constraint/{}", c.label));
        sample_constraint(&c.label, &c.expr, k, &env.bounds, &mut rng, attempts, oracle)
    };
    match oracle {
        Some(o) => {
            for c in constraints {
                clouds.push(sample_one(c, Some(&mut *o))?);
            }
        }
        None => {
            let sampled: Result<Vec<_>, _> = constraints.par_iter().map(|c| sample_one(c, None)).collect();
            clouds.extend(sampled?);
        }
    }
    Ok(clouds)
}

/// `x y z` per line.
pub fn write_xyz<W: Write>(points: &[Point3], mut w: W) -> io::Result<()> {
    for p in points {
        writeln!(w, "{} {} {}", p.x, p.y, p.z)?;
    }
    Ok(())
}

pub fn read_xyz<R: BufRead>(r: R) -> io::Result<Vec<Point3>> {
    let bad = |line: &str| io::Error::new(io::ErrorKind::InvalidData, format!("bad xyz line `{line}`"));
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let v: Vec<f64> = t
            .split_whitespace()
            .map(|s| s.parse::<f64>().map_err(|_| bad(t)))
            .collect::<io::Result<_>>()?;
        if v.len() != 3 {
            return Err(bad(t));
        }
        out.push(Point3::try_new(v[0], v[1], v[2]).map_err(|_| bad(t))?);
    }
    Ok(out)
}

/// Little-endian: u64 point count, then `f64` x, y, z per point.
pub fn write_binary<W: Write>(points: &[Point3], mut w: W) -> io::Result<()> {
    w.write_all(&(points.len() as u64).to_le_bytes())?;
    for p in points {
        for c in p.to_array() {
            w.write_all(&c.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_binary<R: Read>(mut r: R) -> io::Result<Vec<Point3>> {
    let mut word = [0u8; 8];
    r.read_exact(&mut word)?;
    let n = u64::from_le_bytes(word) as usize;
    let mut out = Vec::with_capacity(n.min(1 << 24));
    for _ in 0..n {
        let mut c = [0.0f64; 3];
        for v in &mut c {
            r.read_exact(&mut word)?;
            *v = f64::from_le_bytes(word);
        }
        out.push(Point3::new(c[0], c[1], c[2]));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn bx(min: [f64; 3], max: [f64; 3]) -> Aabb {
        Aabb::new(Point3::new(min[0], min[1], min[2]), Point3::new(max[0], max[1], max[2])).unwrap()
    }

    #[test]
    fn unit_box_cloud() {
        let unit = bx([0.0; 3], [1.0; 3]);
        let c = sample_box("unit", &unit, 1000, &mut rng_for(7, "unit"));
        assert_eq!(c.points.len(), 1000);
        assert!(c.points.iter().all(|p| unit.contains_closed(p)));
    }

    #[test]
    fn box_moments() {
        let b = bx([-1.0, 2.0, 0.0], [3.0, 2.5, 10.0]);
        let k = 10_000;
        let c = sample_box("m", &b, k, &mut rng_for(11, "m"));
        let center = b.center().to_array();
        for (axis, side) in b.extent().into_iter().enumerate() {
            let mean = c.points.iter().map(|p| p.axis(axis)).sum::<f64>() / k as f64;
            let sigma = side / (12.0 * k as f64).sqrt();
            assert!((mean - center[axis]).abs() < 3.0 * sigma, "axis {axis}: {mean}");
        }
    }

    #[test]
    fn degenerate_box() {
        let q = Point3::new(0.2, -0.4, 1.5);
        let c = sample_box("pt", &Aabb::new(q, q).unwrap(), 25, &mut rng_for(1, "pt"));
        assert_eq!(c.points, vec![q; 25]);
    }

    #[test]
    fn sphere_acceptance_ratio() {
        // volume of the unit ball over its hull: pi / 6
        let e = ConstraintExpr::Sphere {
            center: Point3::default(),
            radius: 1.0,
        };
        let hull = bx([-1.0; 3], [1.0; 3]);
        let mut rng = rng_for(3, "ratio");
        let n = 100_000;
        let hits = (0..n).filter(|_| e.evaluate(uniform_in(&hull, &mut rng)).unwrap()).count();
        let ratio = hits as f64 / n as f64;
        assert!((ratio - PI / 6.0).abs() < 0.05, "{ratio}");
    }

    #[test]
    fn constraint_cloud_is_sound() {
        let e = ConstraintExpr::Sphere {
            center: Point3::new(0.5, 0.5, 0.0),
            radius: 0.4,
        };
        let bounds = bx([0.0; 3], [2.0; 3]);
        let c = sample_constraint("ball", &e, 500, &bounds, &mut rng_for(5, "ball"), 500_000, None).unwrap();
        assert_eq!(c.points.len(), 500);
        assert!(c.points.iter().all(|p| e.evaluate(*p).unwrap()));
        // clipped to the floor
        assert!(c.points.iter().all(|p| p.z >= 0.0));
    }

    #[test]
    fn empty_region_is_too_low() {
        let a = ConstraintExpr::Box {
            region: bx([0.0; 3], [1.0; 3]),
            margin: 0.0,
        };
        let b = ConstraintExpr::Box {
            region: bx([2.0; 3], [3.0; 3]),
            margin: 0.0,
        };
        let e = ConstraintExpr::And { children: vec![a, b] };
        let bounds = bx([-5.0; 3], [5.0; 3]);
        let err = sample_constraint("none", &e, 10, &bounds, &mut rng_for(0, "none"), 10_000, None).unwrap_err();
        assert!(matches!(err, SamplingError::AcceptanceTooLow { accepted: 0, .. }));
        // overlapping hulls, but the boxes only touch along a face: every draw is rejected
        let c = ConstraintExpr::And {
            children: vec![
                ConstraintExpr::Box {
                    region: bx([0.0; 3], [1.0; 3]),
                    margin: 0.0,
                },
                ConstraintExpr::Not {
                    child: Box::new(ConstraintExpr::Box {
                        region: bx([-1.0; 3], [2.0; 3]),
                        margin: 0.0,
                    }),
                },
            ],
        };
        let err = sample_constraint("never", &c, 10, &bounds, &mut rng_for(0, "n"), 5_000, None).unwrap_err();
        assert!(matches!(err, SamplingError::AcceptanceTooLow { attempts: 5_000, .. }));
    }

    #[test]
    fn same_seed_same_cloud() {
        let e = ConstraintExpr::Sphere {
            center: Point3::new(0.0, 0.0, 0.5),
            radius: 0.5,
        };
        let bounds = bx([-1.0; 3], [1.0; 3]);
        let a = sample_constraint("s", &e, 300, &bounds, &mut rng_for(9, "s"), 300_000, None).unwrap();
        let b = sample_constraint("s", &e, 300, &bounds, &mut rng_for(9, "s"), 300_000, None).unwrap();
        let mut ba = Vec::new();
        let mut bb = Vec::new();
        write_binary(&a.points, &mut ba).unwrap();
        write_binary(&b.points, &mut bb).unwrap();
        assert_eq!(ba, bb);
        assert_ne!(derive_seed(9, "s"), derive_seed(9, "t"));
        assert_ne!(derive_seed(9, "s"), derive_seed(10, "s"));
    }

    #[test]
    fn exports_round_trip() {
        let pts = sample_box("r", &bx([-1.0; 3], [1.0; 3]), 50, &mut rng_for(2, "r")).points;
        let mut text = Vec::new();
        write_xyz(&pts, &mut text).unwrap();
        assert_eq!(read_xyz(&text[..]).unwrap(), pts);
        let mut bin = Vec::new();
        write_binary(&pts, &mut bin).unwrap();
        assert_eq!(bin.len(), 8 + 24 * pts.len());
        assert_eq!(&bin[..8], &50u64.to_le_bytes());
        assert_eq!(read_binary(&bin[..]).unwrap(), pts);
        assert!(read_xyz(&b"1 2\n"[..]).is_err());
    }
}
