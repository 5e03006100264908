//! Constraint predicates over workspace points.
//!
//! A [`ConstraintExpr`] is a small boolean expression tree. Leaves are
//! analytic shapes (boxes, spheres, half-spaces, a camera wedge, a heat
//! radiation field) or opaque predicates served by the external bridge.
//! Evaluating an expression answers one question: is this point forbidden?

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bridge::BridgeError;
use crate::geometry::{Aabb, Point3};

#[derive(Debug, Error)]
pub enum ConstraintError {
    #[error("external predicate `{handle}` needs a live bridge session")]
    ExternalUnavailable { handle: String },
    #[error("bridge failed while evaluating `{handle}`: {source}")]
    External {
        handle: String,
        #[source]
        source: BridgeError,
    },
    #[error("no finite over-approximation for {0}")]
    UnboundedRegion(String),
    #[error("invalid constraint: {0}")]
    Invalid(String),
    #[error("malformed constraint JSON: {0}")]
    Json(#[from] serde_json::Error),
}

/// Something that can answer membership queries for `External` leaves.
pub trait ExternalOracle {
    /// Evaluate `handle` on every point, preserving order.
    fn eval_batch(&mut self, handle: &str, points: &[Point3]) -> Result<Vec<bool>, BridgeError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConstraintExpr {
    /// Interior of `region` grown by `margin` on every side.
    Box {
        #[serde(flatten)]
        region: Aabb,
        #[serde(default)]
        margin: f64,
    },
    /// Open ball.
    Sphere { center: Point3, radius: f64 },
    /// Points with `normal · p < offset`.
    HalfSpace { normal: Point3, offset: f64 },
    /// Horizontal camera wedge, extruded along z between `z_min` and `z_max`
    /// (unbounded when absent, so the workspace bounds apply).
    Frustum {
        apex: Point3,
        yaw: f64,
        horizontal_fov: f64,
        near_clip: f64,
        far_clip: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        z_min: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        z_max: Option<f64>,
    },
    /// Hemispherical heat radiation around `source`.
    HeatField {
        source: Point3,
        source_box: Aabb,
        h0: f64,
        alpha: f64,
        h_safe: f64,
        d_safe: f64,
    },
    And { children: Vec<ConstraintExpr> },
    Or { children: Vec<ConstraintExpr> },
    Not { child: Box<ConstraintExpr> },
    /// Predicate held by the bridge; `bbox` is the bridge-provided
    /// over-approximation of its forbidden region.
    External {
        handle: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bbox: Option<Aabb>,
    },
}

/// A constraint paired with its scenario label.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedConstraint {
    pub label: String,
    pub expr: ConstraintExpr,
}

/// Over-approximating box of a forbidden region, already intersected with the
/// workspace bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionBox {
    pub aabb: Aabb,
    /// Set when some part of the expression had no finite hull and the
    /// workspace bounds were substituted.
    pub clamped: bool,
}

fn invalid(msg: impl Into<String>) -> ConstraintError {
    ConstraintError::Invalid(msg.into())
}

fn finite(name: &str, v: f64) -> Result<(), ConstraintError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be finite, got {v}")))
    }
}

/// Wrap an angle into `[-π, π]`.
pub(crate) fn wrap_angle(a: f64) -> f64 {
    let mut r = a % (2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    } else if r < -PI {
        r += 2.0 * PI;
    }
    r
}

/// Heat radiated at distance `d` by the hemispherical model.
pub fn heat_intensity(h0: f64, alpha: f64, d: f64) -> f64 {
    let emitted = h0 * (1.0 - alpha);
    if emitted <= 0.0 {
        return 0.0;
    }
    if d <= 0.0 {
        return f64::INFINITY;
    }
    emitted / (4.0 * PI * d * d)
}

/// Distance at which the radiated heat drops to `h_safe`.
pub fn heat_radius(h0: f64, alpha: f64, h_safe: f64) -> f64 {
    (h0 * (1.0 - alpha) / (4.0 * PI * h_safe)).max(0.0).sqrt()
}

impl ConstraintExpr {
    pub fn from_json(s: &str) -> Result<Self, ConstraintError> {
        let expr: ConstraintExpr = serde_json::from_str(s)?;
        expr.validate()?;
        Ok(expr)
    }

    pub fn from_value(v: serde_json::Value) -> Result<Self, ConstraintError> {
        let expr: ConstraintExpr = serde_json::from_value(v)?;
        expr.validate()?;
        Ok(expr)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("constraint serialization is infallible")
    }

    /// Check leaf parameters and combinator arity.
    pub fn validate(&self) -> Result<(), ConstraintError> {
        match self {
            ConstraintExpr::Box { margin, .. } => {
                finite("margin", *margin)?;
                if *margin < 0.0 {
                    return Err(invalid("box margin must be >= 0"));
                }
            }
            ConstraintExpr::Sphere { center, radius } => {
                if !center.is_finite() {
                    return Err(invalid("sphere center must be finite"));
                }
                finite("radius", *radius)?;
                if *radius <= 0.0 {
                    return Err(invalid("sphere radius must be > 0"));
                }
            }
            ConstraintExpr::HalfSpace { normal, offset } => {
                finite("offset", *offset)?;
                let len = normal.distance(&Point3::default());
                if !len.is_finite() || (len - 1.0).abs() > 1e-6 {
                    return Err(invalid(format!("half-space normal must be unit length, got {len}")));
                }
            }
            ConstraintExpr::Frustum {
                apex,
                yaw,
                horizontal_fov,
                near_clip,
                far_clip,
                z_min,
                z_max,
            } => {
                if !apex.is_finite() {
                    return Err(invalid("frustum apex must be finite"));
                }
                finite("yaw", *yaw)?;
                finite("horizontal_fov", *horizontal_fov)?;
                finite("near_clip", *near_clip)?;
                finite("far_clip", *far_clip)?;
                if !(*horizontal_fov > 0.0 && *horizontal_fov < PI) {
                    return Err(invalid("horizontal_fov must lie in (0, pi)"));
                }
                if *near_clip < 0.0 || *far_clip <= *near_clip {
                    return Err(invalid("need 0 <= near_clip < far_clip"));
                }
                for z in [z_min, z_max].into_iter().flatten() {
                    finite("z limit", *z)?;
                }
                if let (Some(lo), Some(hi)) = (z_min, z_max) {
                    if lo > hi {
                        return Err(invalid("frustum z_min exceeds z_max"));
                    }
                }
            }
            ConstraintExpr::HeatField {
                source,
                h0,
                alpha,
                h_safe,
                d_safe,
                ..
            } => {
                if !source.is_finite() {
                    return Err(invalid("heat source must be finite"));
                }
                for (n, v) in [("h0", h0), ("alpha", alpha), ("h_safe", h_safe), ("d_safe", d_safe)] {
                    finite(n, *v)?;
                }
                if *h0 <= 0.0 || *h_safe <= 0.0 {
                    return Err(invalid("h0 and h_safe must be > 0"));
                }
                if !(0.0..=1.0).contains(alpha) {
                    return Err(invalid("alpha must lie in [0, 1]"));
                }
                if *d_safe < 0.0 {
                    return Err(invalid("d_safe must be >= 0"));
                }
            }
            ConstraintExpr::And { children } | ConstraintExpr::Or { children } => {
                if children.is_empty() {
                    return Err(invalid("combinator needs at least one child"));
                }
                for c in children {
                    c.validate()?;
                }
            }
            ConstraintExpr::Not { child } => child.validate()?,
            ConstraintExpr::External { handle, .. } => {
                if handle.is_empty() {
                    return Err(invalid("external handle must be non-empty"));
                }
            }
        }
        Ok(())
    }

    /// True when any leaf is delegated to the bridge.
    pub fn has_external(&self) -> bool {
        match self {
            ConstraintExpr::External { .. } => true,
            ConstraintExpr::And { children } | ConstraintExpr::Or { children } => {
                children.iter().any(|c| c.has_external())
            }
            ConstraintExpr::Not { child } => child.has_external(),
            _ => false,
        }
    }

    /// Verdict of an analytic leaf; `None` for combinators and external leaves.
    fn leaf_verdict(&self, p: &Point3) -> Option<bool> {
        let v = match self {
            ConstraintExpr::Box { region, margin } => region.inflate(*margin).contains(p),
            ConstraintExpr::Sphere { center, radius } => p.distance_squared(center) < radius * radius,
            ConstraintExpr::HalfSpace { normal, offset } => {
                normal.x * p.x + normal.y * p.y + normal.z * p.z < *offset
            }
            ConstraintExpr::Frustum {
                apex,
                yaw,
                horizontal_fov,
                near_clip,
                far_clip,
                z_min,
                z_max,
            } => {
                if z_min.is_some_and(|lo| p.z < lo) || z_max.is_some_and(|hi| p.z > hi) {
                    return Some(false);
                }
                let (dx, dy) = (p.x - apex.x, p.y - apex.y);
                let range = dx.hypot(dy);
                if range < *near_clip || range > *far_clip {
                    false
                } else if range == 0.0 {
                    true
                } else {
                    wrap_angle(dy.atan2(dx) - yaw).abs() <= horizontal_fov / 2.0
                }
            }
            ConstraintExpr::HeatField {
                source,
                source_box,
                h0,
                alpha,
                h_safe,
                d_safe,
            } => {
                let d = p.distance(source);
                source_box.contains_closed(p) || heat_intensity(*h0, *alpha, d) > *h_safe || d < *d_safe
            }
            _ => return None,
        };
        Some(v)
    }

    fn eval_with(
        &self,
        p: Point3,
        ext: &mut dyn FnMut(&str, Point3) -> Result<bool, ConstraintError>,
    ) -> Result<bool, ConstraintError> {
        if let Some(v) = self.leaf_verdict(&p) {
            return Ok(v);
        }
        match self {
            ConstraintExpr::And { children } => {
                for c in children {
                    if !c.eval_with(p, ext)? {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
            ConstraintExpr::Or { children } => {
                for c in children {
                    if c.eval_with(p, ext)? {
                        return Ok(true);
                    }
                }
                Ok(false)
            }
            ConstraintExpr::Not { child } => Ok(!child.eval_with(p, ext)?),
            ConstraintExpr::External { handle, .. } => ext(handle, p),
            _ => unreachable!("leaves handled above"),
        }
    }

    /// Is `p` forbidden? External leaves fail with `ExternalUnavailable`.
    pub fn evaluate(&self, p: Point3) -> Result<bool, ConstraintError> {
        self.eval_with(p, &mut |handle, _| {
            Err(ConstraintError::ExternalUnavailable {
                handle: handle.to_owned(),
            })
        })
    }

    /// Like [`evaluate`](Self::evaluate), delegating external leaves to `oracle`.
    pub fn evaluate_with(&self, p: Point3, oracle: &mut dyn ExternalOracle) -> Result<bool, ConstraintError> {
        self.eval_with(p, &mut |handle, q| {
            let v = oracle
                .eval_batch(handle, &[q])
                .map_err(|source| ConstraintError::External {
                    handle: handle.to_owned(),
                    source,
                })?;
            v.first().copied().ok_or_else(|| ConstraintError::External {
                handle: handle.to_owned(),
                source: BridgeError::Protocol("empty result batch".into()),
            })
        })
    }

    /// Evaluate many points at once. Each external leaf is sent to the
    /// oracle as a single batch.
    pub fn evaluate_batch(
        &self,
        points: &[Point3],
        oracle: Option<&mut dyn ExternalOracle>,
    ) -> Result<Vec<bool>, ConstraintError> {
        if !self.has_external() {
            return points.iter().map(|p| self.evaluate(*p)).collect();
        }
        match oracle {
            Some(o) => self.batch_rec(points, o),
            None => self.evaluate(points.first().copied().unwrap_or_default()).map(|_| Vec::new()),
        }
    }

    fn batch_rec(&self, points: &[Point3], oracle: &mut dyn ExternalOracle) -> Result<Vec<bool>, ConstraintError> {
        if !self.has_external() {
            return points.iter().map(|p| self.evaluate(*p)).collect();
        }
        match self {
            ConstraintExpr::External { handle, .. } => {
                let out = oracle
                    .eval_batch(handle, points)
                    .map_err(|source| ConstraintError::External {
                        handle: handle.clone(),
                        source,
                    })?;
                if out.len() != points.len() {
                    return Err(ConstraintError::External {
                        handle: handle.clone(),
                        source: BridgeError::Protocol(format!(
                            "asked for {} verdicts, got {}",
                            points.len(),
                            out.len()
                        )),
                    });
                }
                Ok(out)
            }
            ConstraintExpr::Not { child } => Ok(child.batch_rec(points, oracle)?.into_iter().map(|v| !v).collect()),
            ConstraintExpr::And { children } | ConstraintExpr::Or { children } => {
                let conj = matches!(self, ConstraintExpr::And { .. });
                let mut acc = vec![conj; points.len()];
                for c in children {
                    let v = c.batch_rec(points, oracle)?;
                    for (a, b) in acc.iter_mut().zip(v) {
                        *a = if conj { *a && b } else { *a || b };
                    }
                }
                Ok(acc)
            }
            _ => unreachable!("analytic leaves have no external part"),
        }
    }

    /// Over-approximating box of the forbidden region, intersected with
    /// `bounds`. `Ok(None)` means the region is provably empty inside the
    /// workspace.
    pub fn forbidden_region_bbox(&self, bounds: &Aabb) -> Result<Option<RegionBox>, ConstraintError> {
        Ok(self.hull(bounds)?.and_then(|r| {
            r.aabb.intersection(bounds).map(|aabb| RegionBox {
                aabb,
                clamped: r.clamped,
            })
        }))
    }

    fn hull(&self, bounds: &Aabb) -> Result<Option<RegionBox>, ConstraintError> {
        let exact = |aabb: Aabb| Ok(Some(RegionBox { aabb, clamped: false }));
        let fallback = Ok(Some(RegionBox {
            aabb: *bounds,
            clamped: true,
        }));
        match self {
            ConstraintExpr::Box { region, margin } => exact(region.inflate(*margin)),
            ConstraintExpr::Sphere { center, radius } => {
                exact(Aabb::cube(*center, *radius).map_err(|e| invalid(e.to_string()))?)
            }
            ConstraintExpr::HalfSpace { normal, offset } => {
                let n = normal.to_array();
                let Some(axis) = (0..3).find(|&i| (n[i].abs() - 1.0).abs() < 1e-12) else {
                    return fallback;
                };
                let mut lo = bounds.min().to_array();
                let mut hi = bounds.max().to_array();
                if n[axis] > 0.0 {
                    hi[axis] = hi[axis].min(*offset);
                } else {
                    lo[axis] = lo[axis].max(-*offset);
                }
                match Aabb::new(lo.into_point(), hi.into_point()) {
                    Ok(b) => exact(b),
                    Err(_) => Ok(None),
                }
            }
            ConstraintExpr::Frustum {
                apex,
                yaw,
                horizontal_fov,
                near_clip,
                far_clip,
                z_min,
                z_max,
            } => {
                let half = horizontal_fov / 2.0;
                let mut xy: Vec<(f64, f64)> = Vec::with_capacity(8);
                for edge in [yaw - half, yaw + half] {
                    for r in [*near_clip, *far_clip] {
                        xy.push((apex.x + r * edge.cos(), apex.y + r * edge.sin()));
                    }
                }
                for k in 0..4 {
                    let axis_angle = k as f64 * PI / 2.0;
                    if wrap_angle(axis_angle - yaw).abs() <= half {
                        xy.push((apex.x + far_clip * axis_angle.cos(), apex.y + far_clip * axis_angle.sin()));
                    }
                }
                let zl = z_min.unwrap_or(bounds.min().z);
                let zh = z_max.unwrap_or(bounds.max().z);
                if zl > zh {
                    return Ok(None);
                }
                let pts = xy
                    .iter()
                    .flat_map(|&(x, y)| [Point3::new(x, y, zl), Point3::new(x, y, zh)]);
                match Aabb::hull(pts) {
                    Some(b) => exact(b),
                    None => Ok(None),
                }
            }
            ConstraintExpr::HeatField {
                source,
                source_box,
                h0,
                alpha,
                h_safe,
                d_safe,
            } => {
                let r = heat_radius(*h0, *alpha, *h_safe).max(*d_safe);
                let ball = Aabb::cube(*source, r).map_err(|e| invalid(e.to_string()))?;
                exact(ball.union(source_box))
            }
            ConstraintExpr::And { children } => {
                let mut acc: Option<RegionBox> = None;
                for c in children {
                    let Some(b) = c.hull(bounds)? else {
                        return Ok(None);
                    };
                    acc = match acc {
                        None => Some(b),
                        Some(a) => match a.aabb.intersection(&b.aabb) {
                            Some(aabb) => Some(RegionBox {
                                aabb,
                                clamped: a.clamped && b.clamped,
                            }),
                            None => return Ok(None),
                        },
                    };
                }
                Ok(acc)
            }
            ConstraintExpr::Or { children } => {
                let mut acc: Option<RegionBox> = None;
                for c in children {
                    if let Some(b) = c.hull(bounds)? {
                        acc = Some(match acc {
                            None => b,
                            Some(a) => RegionBox {
                                aabb: a.aabb.union(&b.aabb),
                                clamped: a.clamped || b.clamped,
                            },
                        });
                    }
                }
                Ok(acc)
            }
            ConstraintExpr::Not { .. } => fallback,
            ConstraintExpr::External { handle, bbox } => match bbox {
                Some(b) => exact(*b),
                None => Err(ConstraintError::UnboundedRegion(format!(
                    "external predicate `{handle}` without a bridge-provided box"
                ))),
            },
        }
    }
}

trait IntoPoint {
    fn into_point(self) -> Point3;
}

impl IntoPoint for [f64; 3] {
    fn into_point(self) -> Point3 {
        Point3::new(self[0], self[1], self[2])
    }
}
