use serde::{Deserialize, Serialize};

use super::Point;

/// The five basic shapes, each normalized to a unit circumradius.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeKind {
    Triangle,
    Square,
    Circle,
    Parallelogram,
    Pentagon,
}

impl ShapeKind {
    pub const ALL: [ShapeKind; 5] =
        [ShapeKind::Triangle, ShapeKind::Square, ShapeKind::Circle, ShapeKind::Parallelogram, ShapeKind::Pentagon];

    /// Smallest rotation (degrees) mapping the shape onto itself; `None` for
    /// the circle.
    pub fn symmetry_period(self) -> Option<u32> {
        match self {
            ShapeKind::Triangle => Some(120),
            ShapeKind::Square => Some(90),
            ShapeKind::Parallelogram => Some(180),
            ShapeKind::Pentagon => Some(72),
            ShapeKind::Circle => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ShapeKind::Triangle => "triangle",
            ShapeKind::Square => "square",
            ShapeKind::Circle => "circle",
            ShapeKind::Parallelogram => "parallelogram",
            ShapeKind::Pentagon => "pentagon",
        }
    }

    fn unit_vertices(self) -> Vec<Point> {
        let polar = |n: usize, start_deg: f64| -> Vec<Point> {
            (0..n)
                .map(|i| {
                    let a = (start_deg + 360.0 * i as f64 / n as f64).to_radians();
                    Point::new(a.cos(), a.sin())
                })
                .collect()
        };
        match self {
            ShapeKind::Triangle => polar(3, -90.0),
            ShapeKind::Square => polar(4, -45.0),
            ShapeKind::Pentagon => polar(5, -90.0),
            ShapeKind::Circle => polar(48, 0.0),
            ShapeKind::Parallelogram => {
                vec![Point::new(-0.25, -0.45), Point::new(0.85, -0.45), Point::new(0.25, 0.45), Point::new(-0.85, 0.45)]
            }
        }
    }
}

/// Vertices of `kind` with circumradius `radius`, rotated clockwise (on
/// screen) by `rotation_deg` about `center`.
pub fn shape_outline(kind: ShapeKind, center: Point, radius: f64, rotation_deg: f64) -> Vec<Point> {
    let (s, c) = rotation_deg.to_radians().sin_cos();
    kind.unit_vertices()
        .into_iter()
        .map(|p| Point::new(center.x + radius * (p.x * c - p.y * s), center.y + radius * (p.x * s + p.y * c)))
        .collect()
}
