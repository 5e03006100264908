//! kd-tree over sampled points, used for nearest-neighbor collision checks.
//!
//! The tree is stored implicitly: points are permuted in place so that every
//! subrange `[lo, hi)` larger than a leaf bucket has its splitting point at
//! the midpoint, with the split axis recorded alongside.

use std::cmp::Ordering;

use thiserror::Error;

use crate::geometry::Point3;
use crate::sampling::PointCloud;

const LEAF: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IndexError {
    #[error("cannot build an index without points")]
    EmptyIndex,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub point: Point3,
    pub distance: f64,
    /// Position of the originating cloud in the build input.
    pub cloud: usize,
}

#[derive(Debug, Clone)]
pub struct PointCloudIndex {
    points: Vec<Point3>,
    cloud: Vec<u32>,
    axis: Vec<u8>,
    labels: Vec<String>,
}

impl PointCloudIndex {
    /// Index the union of all clouds.
    pub fn build(clouds: &[PointCloud]) -> Result<Self, IndexError> {
        let mut tagged = Vec::with_capacity(clouds.iter().map(|c| c.points.len()).sum());
        for (i, c) in clouds.iter().enumerate() {
            tagged.extend(c.points.iter().map(|p| (*p, i as u32)));
        }
        let labels = clouds.iter().map(|c| c.label.clone()).collect();
        Self::from_tagged(tagged, labels)
    }

    pub fn from_points(points: Vec<Point3>) -> Result<Self, IndexError> {
        Self::from_tagged(points.into_iter().map(|p| (p, 0)).collect(), vec![String::new()])
    }

    fn from_tagged(mut tagged: Vec<(Point3, u32)>, labels: Vec<String>) -> Result<Self, IndexError> {
        if tagged.is_empty() {
            return Err(IndexError::EmptyIndex);
        }
        let mut axis = vec![0u8; tagged.len()];
        build_range(&mut tagged, &mut axis);
        let (points, cloud) = tagged.into_iter().unzip();
        Ok(PointCloudIndex {
            points,
            cloud,
            axis,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn cloud_label(&self, cloud: usize) -> Option<&str> {
        self.labels.get(cloud).map(String::as_str)
    }

    /// Exact nearest neighbor. Ties go to whichever point is found first.
    pub fn nearest(&self, q: &Point3) -> Neighbor {
        let mut best = (f64::INFINITY, 0usize);
        self.nearest_range(0, self.points.len(), q, &mut best);
        Neighbor {
            point: self.points[best.1],
            distance: best.0.sqrt(),
            cloud: self.cloud[best.1] as usize,
        }
    }

    fn nearest_range(&self, lo: usize, hi: usize, q: &Point3, best: &mut (f64, usize)) {
        if hi - lo <= LEAF {
            for i in lo..hi {
                let d = self.points[i].distance_squared(q);
                if d < best.0 {
                    *best = (d, i);
                }
            }
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let axis = self.axis[mid] as usize;
        let d = self.points[mid].distance_squared(q);
        if d < best.0 {
            *best = (d, mid);
        }
        let delta = q.axis(axis) - self.points[mid].axis(axis);
        let (near, far) = if delta < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.nearest_range(near.0, near.1, q, best);
        if delta * delta < best.0 {
            self.nearest_range(far.0, far.1, q, best);
        }
    }

    /// Is any indexed point strictly closer than `r` to `q`?
    pub fn any_within(&self, q: &Point3, r: f64) -> bool {
        r > 0.0 && self.within_range(0, self.points.len(), q, r)
    }

    fn within_range(&self, lo: usize, hi: usize, q: &Point3, r: f64) -> bool {
        if hi - lo <= LEAF {
            return self.points[lo..hi].iter().any(|p| p.distance(q) < r);
        }
        let mid = lo + (hi - lo) / 2;
        if self.points[mid].distance(q) < r {
            return true;
        }
        let axis = self.axis[mid] as usize;
        let delta = q.axis(axis) - self.points[mid].axis(axis);
        let (near, far) = if delta < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.within_range(near.0, near.1, q, r) || (delta.abs() < r && self.within_range(far.0, far.1, q, r))
    }

    /// Collision test for a robot of radius `r` centered at `q`: the nearest
    /// indexed point is strictly closer than `r`.
    pub fn collides(&self, q: &Point3, r: f64) -> bool {
        self.any_within(q, r)
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }
}

fn build_range(items: &mut [(Point3, u32)], axis: &mut [u8]) {
    let n = items.len();
    if n <= LEAF {
        return;
    }
    let split = widest_axis(items);
    let mid = n / 2;
    items.select_nth_unstable_by(mid, |a, b| {
        a.0.axis(split).partial_cmp(&b.0.axis(split)).unwrap_or(Ordering::Equal)
    });
    axis[mid] = split as u8;
    let (left, rest) = items.split_at_mut(mid);
    let (left_axis, rest_axis) = axis.split_at_mut(mid);
    build_range(left, left_axis);
    build_range(&mut rest[1..], &mut rest_axis[1..]);
}

fn widest_axis(items: &[(Point3, u32)]) -> usize {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for (p, _) in items {
        for a in 0..3 {
            lo[a] = lo[a].min(p.axis(a));
            hi[a] = hi[a].max(p.axis(a));
        }
    }
    (0..3)
        .max_by(|&a, &b| (hi[a] - lo[a]).partial_cmp(&(hi[b] - lo[b])).unwrap_or(Ordering::Equal))
        .unwrap_or(0)
}
