//! Path checking that never touches point clouds or the index: every segment
//! is resampled and each sample is tested against the constraint expressions
//! and object boxes directly.

use serde::Serialize;

use crate::constraint::{ExternalOracle, NamedConstraint};
use crate::geometry::Point3;
use crate::scene::EnvironmentModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    /// Inside a forbidden constraint region.
    Constraint,
    /// Inside a static object's box.
    Object,
    /// The constraint could not be evaluated (e.g. no bridge for an external leaf).
    Unverifiable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub segment: usize,
    pub point: Point3,
    pub label: String,
    pub kind: ViolationKind,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub segments: usize,
    pub samples_checked: usize,
    pub violation: Option<Violation>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violation.is_none()
    }
}

pub fn validate_path(
    path: &[Point3],
    constraints: &[NamedConstraint],
    env: &EnvironmentModel,
    step: f64,
) -> ValidationReport {
    check(path, constraints, env, step, None)
}

/// As [`validate_path`], answering external leaves through `oracle`.
pub fn validate_path_with(
    path: &[Point3],
    constraints: &[NamedConstraint],
    env: &EnvironmentModel,
    step: f64,
    oracle: &mut dyn ExternalOracle,
) -> ValidationReport {
    check(path, constraints, env, step, Some(oracle))
}

fn check(
    path: &[Point3],
    constraints: &[NamedConstraint],
    env: &EnvironmentModel,
    step: f64,
    mut oracle: Option<&mut dyn ExternalOracle>,
) -> ValidationReport {
    let step = if step.is_finite() && step > 0.0 { step } else { 0.01 };
    let mut samples_checked = 0;
    let segments = path.len().saturating_sub(1);
    let probe = |seg: usize, p: Point3, oracle: &mut Option<&mut dyn ExternalOracle>| -> Option<Violation> {
        let hit = |label: &str, kind| Violation {
            segment: seg,
            point: p,
            label: label.to_owned(),
            kind,
        };
        if let Some(o) = env.objects.iter().find(|o| o.bbox.contains(&p)) {
            return Some(hit(&o.name, ViolationKind::Object));
        }
        for c in constraints {
            let verdict = match oracle.as_deref_mut() {
                Some(o) => c.expr.evaluate_with(p, o),
                None => c.expr.evaluate(p),
            };
            match verdict {
                Ok(false) => {}
                Ok(true) => return Some(hit(&c.label, ViolationKind::Constraint)),
                Err(_) => return Some(hit(&c.label, ViolationKind::Unverifiable)),
            }
        }
        None
    };

    if let [only] = path {
        samples_checked += 1;
        if let Some(v) = probe(0, *only, &mut oracle) {
            return ValidationReport {
                segments,
                samples_checked,
                violation: Some(v),
            };
        }
    }
    for (seg, w) in path.windows(2).enumerate() {
        let n = (w[0].distance(&w[1]) / step).ceil().max(1.0) as usize;
        // the segment's first point was the previous segment's last
        let first = if seg == 0 { 0 } else { 1 };
        for j in first..=n {
            let p = if j == n { w[1] } else { w[0].lerp(&w[1], j as f64 / n as f64) };
            samples_checked += 1;
            if let Some(v) = probe(seg, p, &mut oracle) {
                return ValidationReport {
                    segments,
                    samples_checked,
                    violation: Some(v),
                };
            }
        }
    }
    ValidationReport {
        segments,
        samples_checked,
        violation: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraint::ConstraintExpr;
    use crate::geometry::Aabb;
    use crate::scene::SceneObject;

    fn env() -> EnvironmentModel {
        let bounds = Aabb::new(Point3::new(0.0, 0.0, 0.0), Point3::new(10.0, 10.0, 1.0)).unwrap();
        let table = SceneObject {
            name: "table".into(),
            bbox: Aabb::new(Point3::new(7.0, 7.0, 0.0), Point3::new(8.0, 8.0, 1.0)).unwrap(),
        };
        EnvironmentModel::new(bounds, vec![table]).unwrap()
    }

    fn hole() -> NamedConstraint {
        NamedConstraint {
            label: "hole".into(),
            expr: ConstraintExpr::Box {
                region: Aabb::new(Point3::new(4.0, 0.0, -1.0), Point3::new(5.0, 10.0, 0.5)).unwrap(),
                margin: 0.0,
            },
        }
    }

    #[test]
    fn straight_line_through_hole() {
        let path = [Point3::new(1.0, 5.0, 0.1), Point3::new(9.0, 5.0, 0.1)];
        let rep = validate_path(&path, &[hole()], &env(), 0.01);
        let v = rep.violation.unwrap();
        assert_eq!(v.label, "hole");
        assert_eq!(v.kind, ViolationKind::Constraint);
        assert_eq!(v.segment, 0);
        assert!(v.point.x > 4.0 && v.point.x < 4.02);
    }

    #[test]
    fn empty_and_clean_paths() {
        let rep = validate_path(&[], &[hole()], &env(), 0.01);
        assert!(rep.is_clean());
        assert_eq!(rep.segments, 0);
        let path = [Point3::new(1.0, 1.0, 0.1), Point3::new(3.0, 9.0, 0.1), Point3::new(6.0, 9.5, 0.1)];
        let rep = validate_path(&path, &[], &env(), 0.05);
        assert!(rep.is_clean());
        assert_eq!(rep.segments, 2);
        assert!(rep.samples_checked > 200);
    }

    #[test]
    fn object_boxes_are_checked() {
        let path = [Point3::new(6.0, 6.0, 0.1), Point3::new(9.0, 9.0, 0.1)];
        let v = validate_path(&path, &[], &env(), 0.01).violation.unwrap();
        assert_eq!((v.label.as_str(), v.kind), ("table", ViolationKind::Object));
    }

    #[test]
    fn external_without_oracle_is_unverifiable() {
        let ext = NamedConstraint {
            label: "ext".into(),
            expr: ConstraintExpr::External {
                handle: "h".into(),
                bbox: None,
            },
        };
        let v = validate_path(&[Point3::new(1.0, 1.0, 0.1)], &[ext], &env(), 0.01)
            .violation
            .unwrap();
        assert_eq!(v.kind, ViolationKind::Unverifiable);
    }
}
