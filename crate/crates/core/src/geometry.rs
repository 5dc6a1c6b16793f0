use serde::{Deserialize, Serialize};

pub type Vec2 = nalgebra::Vector2<f64>;
pub type Mat2 = nalgebra::Matrix2<f64>;

/// Axis-aligned rectangle in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Rect {
    pub fn new(min: [f64; 2], max: [f64; 2]) -> Self {
        Self { min, max }
    }

    pub fn from_size(width: f64, height: f64) -> Self {
        Self::new([0.0, 0.0], [width, height])
    }

    pub fn width(&self) -> f64 {
        self.max[0] - self.min[0]
    }

    pub fn height(&self) -> f64 {
        self.max[1] - self.min[1]
    }

    pub fn is_valid(&self) -> bool {
        self.width() > 0.0 && self.height() > 0.0
    }

    pub fn contains(&self, p: &Vec2, slack: f64) -> bool {
        p.x >= self.min[0] - slack
            && p.x <= self.max[0] + slack
            && p.y >= self.min[1] - slack
            && p.y <= self.max[1] + slack
    }

    pub fn clamp(&self, p: &Vec2) -> Vec2 {
        Vec2::new(
            p.x.clamp(self.min[0], self.max[0]),
            p.y.clamp(self.min[1], self.max[1]),
        )
    }
}

/// Wraps an angle to (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let mut w = a.rem_euclid(TAU);
    if w > PI {
        w -= TAU;
    }
    w
}

/// Rotation from the inertial frame into the body frame for a
/// counterclockwise heading `psi` measured from +x.
pub fn rotation_to_body(psi: f64) -> Mat2 {
    let (s, c) = psi.sin_cos();
    Mat2::new(c, s, -s, c)
}

/// Derivative of [`rotation_to_body`] with respect to `psi`.
pub fn rotation_to_body_derivative(psi: f64) -> Mat2 {
    let (s, c) = psi.sin_cos();
    Mat2::new(-s, c, -c, -s)
}
