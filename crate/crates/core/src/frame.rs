//! Planar rigid transforms.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::rhs::Point2;

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// Rigid transform in the plane. Used both for absolute vehicle poses (map
/// frame ← vehicle frame) and for per-cycle motion increments, where
/// `translation` is the displacement expressed in the previous vehicle frame
/// and `rotation` the heading change.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl Pose2 {
    pub const IDENTITY: Pose2 = Pose2 {
        x: 0.0,
        y: 0.0,
        heading: 0.0,
    };

    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Self {
            x,
            y,
            heading: wrap_angle(heading),
        }
    }

    pub fn position(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }

    pub fn rotate(&self, p: Point2) -> Point2 {
        let (s, c) = self.heading.sin_cos();
        Point2::new(c * p.x - s * p.y, s * p.x + c * p.y)
    }

    /// Maps a point from this frame into the parent frame.
    pub fn transform_point(&self, p: Point2) -> Point2 {
        self.rotate(p) + self.position()
    }

    /// Maps a point from the parent frame into this frame.
    pub fn inverse_transform_point(&self, p: Point2) -> Point2 {
        let d = p - self.position();
        let (s, c) = self.heading.sin_cos();
        Point2::new(c * d.x + s * d.y, -s * d.x + c * d.y)
    }

    /// `self ∘ other`: apply `other`, then `self`.
    pub fn compose(&self, other: &Pose2) -> Pose2 {
        let p = self.transform_point(other.position());
        Pose2::new(p.x, p.y, self.heading + other.heading)
    }

    pub fn inverse(&self) -> Pose2 {
        let p = self.inverse_transform_point(Point2::zeros());
        Pose2::new(p.x, p.y, -self.heading)
    }

    /// Relative motion taking `self` to `other`, i.e. `self⁻¹ ∘ other`.
    pub fn between(&self, other: &Pose2) -> Pose2 {
        self.inverse().compose(other)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn wrap_range() {
        assert_abs_diff_eq!(wrap_angle(PI), PI, epsilon = 1e-15);
        assert_abs_diff_eq!(wrap_angle(-PI), PI, epsilon = 1e-15);
        assert_abs_diff_eq!(wrap_angle(3.0 * PI / 2.0), -PI / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(wrap_angle(0.1), 0.1, epsilon = 1e-15);
    }

    #[test]
    fn compose_between_inverse() {
        let a = Pose2::new(1.0, -2.0, 0.7);
        let b = Pose2::new(-3.0, 0.5, -2.1);
        let rel = a.between(&b);
        let back = a.compose(&rel);
        assert_abs_diff_eq!(back.x, b.x, epsilon = 1e-12);
        assert_abs_diff_eq!(back.y, b.y, epsilon = 1e-12);
        assert_abs_diff_eq!(wrap_angle(back.heading - b.heading), 0.0, epsilon = 1e-12);
        let id = a.compose(&a.inverse());
        assert_abs_diff_eq!(id.x, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(id.heading, 0.0, epsilon = 1e-12);
        let p = Point2::new(4.0, 5.0);
        let q = a.inverse_transform_point(a.transform_point(p));
        assert_abs_diff_eq!((p - q).norm(), 0.0, epsilon = 1e-12);
    }
}
