//! Points and axis-aligned boxes in the planning workspace.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("non-finite coordinate in {0:?}")]
    NonFinite([f64; 3]),
    #[error("box min {min:?} exceeds max {max:?} on axis {axis}")]
    Inverted {
        min: [f64; 3],
        max: [f64; 3],
        axis: usize,
    },
}

/// A coordinate in the workspace, in meters.
///
/// Fields are public for arithmetic convenience; values coming from files or
/// foreign callers go through [`Point3::try_new`], which rejects NaN and
/// infinities.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Point3 { x, y, z }
    }

    pub fn try_new(x: f64, y: f64, z: f64) -> Result<Self, GeometryError> {
        if x.is_finite() && y.is_finite() && z.is_finite() {
            Ok(Point3 { x, y, z })
        } else {
            Err(GeometryError::NonFinite([x, y, z]))
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    #[inline]
    pub fn axis(&self, axis: usize) -> f64 {
        match axis {
            0 => self.x,
            1 => self.y,
            _ => self.z,
        }
    }

    #[inline]
    pub fn distance_squared(&self, other: &Point3) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dz = self.z - other.z;
        dx * dx + dy * dy + dz * dz
    }

    #[inline]
    pub fn distance(&self, other: &Point3) -> f64 {
        self.distance_squared(other).sqrt()
    }

    /// Distance in the xy-plane, ignoring altitude.
    #[inline]
    pub fn planar_distance(&self, other: &Point3) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn lerp(&self, other: &Point3, t: f64) -> Point3 {
        Point3::new(
            self.x + (other.x - self.x) * t,
            self.y + (other.y - self.y) * t,
            self.z + (other.z - self.z) * t,
        )
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl TryFrom<[f64; 3]> for Point3 {
    type Error = GeometryError;

    fn try_from(v: [f64; 3]) -> Result<Self, Self::Error> {
        Point3::try_new(v[0], v[1], v[2])
    }
}

impl From<Point3> for [f64; 3] {
    fn from(p: Point3) -> Self {
        p.to_array()
    }
}

impl fmt::Display for Point3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.z)
    }
}

/// Axis-aligned bounding box. `min <= max` on every axis; zero-thickness
/// boxes are allowed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawAabb", into = "RawAabb")]
pub struct Aabb {
    min: Point3,
    max: Point3,
}

#[derive(Serialize, Deserialize)]
struct RawAabb {
    min: Point3,
    max: Point3,
}

impl TryFrom<RawAabb> for Aabb {
    type Error = GeometryError;

    fn try_from(raw: RawAabb) -> Result<Self, Self::Error> {
        Aabb::new(raw.min, raw.max)
    }
}

impl From<Aabb> for RawAabb {
    fn from(b: Aabb) -> Self {
        RawAabb {
            min: b.min,
            max: b.max,
        }
    }
}

impl Aabb {
    pub fn new(min: Point3, max: Point3) -> Result<Self, GeometryError> {
        for p in [&min, &max] {
            if !p.is_finite() {
                return Err(GeometryError::NonFinite(p.to_array()));
            }
        }
        for axis in 0..3 {
            if min.axis(axis) > max.axis(axis) {
                return Err(GeometryError::Inverted {
                    min: min.to_array(),
                    max: max.to_array(),
                    axis,
                });
            }
        }
        Ok(Aabb { min, max })
    }

    /// Box centered at `center` with the given half extent on every axis.
    pub fn cube(center: Point3, half: f64) -> Result<Self, GeometryError> {
        let h = half.abs();
        Aabb::new(
            Point3::new(center.x - h, center.y - h, center.z - h),
            Point3::new(center.x + h, center.y + h, center.z + h),
        )
    }

    /// Smallest box holding every point, or `None` for an empty iterator.
    pub fn hull<I: IntoIterator<Item = Point3>>(points: I) -> Option<Self> {
        let mut it = points.into_iter();
        let first = it.next()?;
        let (mut lo, mut hi) = (first, first);
        for p in it {
            lo = Point3::new(lo.x.min(p.x), lo.y.min(p.y), lo.z.min(p.z));
            hi = Point3::new(hi.x.max(p.x), hi.y.max(p.y), hi.z.max(p.z));
        }
        Aabb::new(lo, hi).ok()
    }

    pub fn min(&self) -> Point3 {
        self.min
    }

    pub fn max(&self) -> Point3 {
        self.max
    }

    pub fn center(&self) -> Point3 {
        self.min.lerp(&self.max, 0.5)
    }

    pub fn extent(&self) -> [f64; 3] {
        [
            self.max.x - self.min.x,
            self.max.y - self.min.y,
            self.max.z - self.min.z,
        ]
    }

    pub fn volume(&self) -> f64 {
        let [a, b, c] = self.extent();
        a * b * c
    }

    /// Interior test with strict inequalities on all three axes: points on a
    /// face do not collide.
    #[inline]
    pub fn contains(&self, p: &Point3) -> bool {
        self.min.x < p.x
            && p.x < self.max.x
            && self.min.y < p.y
            && p.y < self.max.y
            && self.min.z < p.z
            && p.z < self.max.z
    }

    /// Closed-interval containment.
    #[inline]
    pub fn contains_closed(&self, p: &Point3) -> bool {
        self.min.x <= p.x
            && p.x <= self.max.x
            && self.min.y <= p.y
            && p.y <= self.max.y
            && self.min.z <= p.z
            && p.z <= self.max.z
    }

    pub fn contains_box(&self, other: &Aabb) -> bool {
        self.contains_closed(&other.min) && self.contains_closed(&other.max)
    }

    pub fn inflate(&self, margin: f64) -> Aabb {
        let m = margin.max(0.0);
        Aabb {
            min: Point3::new(self.min.x - m, self.min.y - m, self.min.z - m),
            max: Point3::new(self.max.x + m, self.max.y + m, self.max.z + m),
        }
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        Aabb {
            min: Point3::new(
                self.min.x.min(other.min.x),
                self.min.y.min(other.min.y),
                self.min.z.min(other.min.z),
            ),
            max: Point3::new(
                self.max.x.max(other.max.x),
                self.max.y.max(other.max.y),
                self.max.z.max(other.max.z),
            ),
        }
    }

    /// Overlap of two boxes; `None` when they are disjoint. Boxes that only
    /// touch yield a zero-thickness box.
    pub fn intersection(&self, other: &Aabb) -> Option<Aabb> {
        let min = Point3::new(
            self.min.x.max(other.min.x),
            self.min.y.max(other.min.y),
            self.min.z.max(other.min.z),
        );
        let max = Point3::new(
            self.max.x.min(other.max.x),
            self.max.y.min(other.max.y),
            self.max.z.min(other.max.z),
        );
        Aabb::new(min, max).ok()
    }
}

impl fmt::Display for Aabb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{} .. {}]", self.min, self.max)
    }
}
