use crate::geometry::{Aabb, Point3};

use super::PlanError;

/// A regular lattice in the planning plane: cell `(ix, iy)` sits at
/// `origin + (ix, iy) * resolution`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub origin: Point3,
    pub resolution: f64,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    pub fn new(origin: Point3, resolution: f64, nx: usize, ny: usize) -> Result<Self, PlanError> {
        if !(resolution.is_finite() && resolution > 0.0) {
            return Err(PlanError::InvalidConfig(format!("grid resolution must be positive, got {resolution}")));
        }
        if nx == 0 || ny == 0 || nx.checked_mul(ny).is_none_or(|n| n > u32::MAX as usize) {
            return Err(PlanError::InvalidConfig(format!("bad grid dimensions {nx}x{ny}")));
        }
        Ok(GridSpec {
            origin,
            resolution,
            nx,
            ny,
        })
    }

    /// Lattice over the xy-extent of `bounds`, anchored at its minimum corner.
    pub fn covering(bounds: &Aabb, resolution: f64, plane_z: f64) -> Result<Self, PlanError> {
        let [wx, wy, _] = bounds.extent();
        let count = |w: f64| (w / resolution + 1e-9).floor() as usize + 1;
        let lo = bounds.min();
        GridSpec::new(Point3::new(lo.x, lo.y, plane_z), resolution, count(wx), count(wy))
    }

    pub fn plane_z(&self) -> f64 {
        self.origin.z
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Lexicographic cell id: ordering ids orders `(ix, iy)` pairs.
    pub fn id(&self, ix: usize, iy: usize) -> usize {
        ix * self.ny + iy
    }

    pub fn cell(&self, id: usize) -> (usize, usize) {
        (id / self.ny, id % self.ny)
    }

    pub fn point(&self, ix: usize, iy: usize) -> Point3 {
        Point3::new(
            self.origin.x + ix as f64 * self.resolution,
            self.origin.y + iy as f64 * self.resolution,
            self.origin.z,
        )
    }

    /// Nearest lattice point to `p` in the plane, if it lies on the grid.
    pub fn nearest_cell(&self, p: &Point3) -> Option<(usize, usize)> {
        let fx = ((p.x - self.origin.x) / self.resolution).round();
        let fy = ((p.y - self.origin.y) / self.resolution).round();
        if fx < 0.0 || fy < 0.0 || fx >= self.nx as f64 || fy >= self.ny as f64 {
            return None;
        }
        Some((fx as usize, fy as usize))
    }

    /// Cell index range along one axis whose points lie within `[lo, hi]`.
    pub(crate) fn span(&self, axis: usize, lo: f64, hi: f64) -> std::ops::Range<usize> {
        let (o, n) = if axis == 0 {
            (self.origin.x, self.nx)
        } else {
            (self.origin.y, self.ny)
        };
        let a = ((lo - o) / self.resolution).ceil().max(0.0);
        let b = ((hi - o) / self.resolution).floor() + 1.0;
        let b = b.clamp(0.0, n as f64);
        (a.min(b) as usize)..(b as usize)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn covering_counts_lattice_points() {
        let b = Aabb::new(Point3::new(-5.0, -4.0, 0.0), Point3::new(5.0, 4.0, 1.0)).unwrap();
        let g = GridSpec::covering(&b, 0.1, 0.1).unwrap();
        assert_eq!((g.nx, g.ny), (101, 81));
        let far = g.point(100, 80);
        assert!((far.x - 5.0).abs() < 1e-9 && (far.y - 4.0).abs() < 1e-9);
        assert_eq!(far.z, 0.1);
    }

    #[test]
    fn ids_are_lexicographic() {
        let g = GridSpec::new(Point3::default(), 1.0, 4, 3).unwrap();
        assert!(g.id(0, 2) < g.id(1, 0));
        assert_eq!(g.cell(g.id(3, 1)), (3, 1));
    }

    #[test]
    fn nearest_and_span() {
        let g = GridSpec::new(Point3::default(), 0.5, 5, 5).unwrap();
        assert_eq!(g.nearest_cell(&Point3::new(0.74, 1.26, 0.0)), Some((1, 3)));
        assert_eq!(g.nearest_cell(&Point3::new(-0.3, 0.0, 0.0)), None);
        assert_eq!(g.span(0, 0.6, 1.5), 2..4);
        assert_eq!(g.span(1, -3.0, 100.0), 0..5);
        assert!(g.span(0, 10.0, 20.0).is_empty());
        assert!(GridSpec::new(Point3::default(), 0.0, 1, 1).is_err());
    }
}
