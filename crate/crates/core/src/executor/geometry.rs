//! Oriented bounding boxes and the separating-axis overlap test.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Obb {
    pub cx: f64,
    pub cy: f64,
    /// Radians, direction of the length axis.
    pub heading: f64,
    pub length: f64,
    pub width: f64,
}

impl Obb {
    pub fn new(cx: f64, cy: f64, heading: f64, length: f64, width: f64) -> Self {
        Obb {
            cx,
            cy,
            heading,
            length,
            width,
        }
    }

    fn axes(&self) -> [(f64, f64); 2] {
        let (s, c) = self.heading.sin_cos();
        [(c, s), (-s, c)]
    }

    pub fn corners(&self) -> [(f64, f64); 4] {
        let [(ux, uy), (vx, vy)] = self.axes();
        let (hl, hw) = (self.length / 2.0, self.width / 2.0);
        [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)]
            .map(|(a, b)| (self.cx + a * hl * ux + b * hw * vx, self.cy + a * hl * uy + b * hw * vy))
    }

    /// Whether `(x, y)` lies inside or on the box.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let [(ux, uy), (vx, vy)] = self.axes();
        let (dx, dy) = (x - self.cx, y - self.cy);
        (dx * ux + dy * uy).abs() <= self.length / 2.0 && (dx * vx + dy * vy).abs() <= self.width / 2.0
    }

    fn project(&self, (ax, ay): (f64, f64)) -> (f64, f64) {
        let center = self.cx * ax + self.cy * ay;
        let [(ux, uy), (vx, vy)] = self.axes();
        let r = self.length / 2.0 * (ux * ax + uy * ay).abs() + self.width / 2.0 * (vx * ax + vy * ay).abs();
        (center - r, center + r)
    }

    /// Separating-axis test over the four face normals. Touching boxes
    /// overlap.
    pub fn overlaps(&self, other: &Obb) -> bool {
        self.axes().into_iter().chain(other.axes()).all(|axis| {
            let (a0, a1) = self.project(axis);
            let (b0, b1) = other.project(axis);
            a0 <= b1 && b0 <= a1
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aligned_boxes() {
        let a = Obb::new(0.0, 0.0, 0.0, 4.0, 2.0);
        assert!(a.overlaps(&Obb::new(3.9, 0.0, 0.0, 4.0, 2.0)));
        assert!(!a.overlaps(&Obb::new(4.1, 0.0, 0.0, 4.0, 2.0)));
        assert!(!a.overlaps(&Obb::new(0.0, 2.1, 0.0, 4.0, 2.0)));
    }

    #[test]
    fn rotated_corner_gap() {
        // A diamond whose tip stops short of the square's corner region.
        let a = Obb::new(0.0, 0.0, 0.0, 2.0, 2.0);
        let d = std::f64::consts::FRAC_PI_4;
        let tip = 2.0_f64.sqrt();
        assert!(!a.overlaps(&Obb::new(1.0 + tip + 0.05, 1.0 + 0.0, d, 2.0, 2.0)));
        assert!(a.overlaps(&Obb::new(1.0 + tip - 0.05, 0.0, d, 2.0, 2.0)));
    }

    #[test]
    fn corners_are_contained() {
        let a = Obb::new(1.0, -2.0, 0.7, 4.0, 1.5);
        for (x, y) in a.corners() {
            assert!(a.contains(x * (1.0 - 1e-12) + 1.0 * 1e-12, y * (1.0 - 1e-12) - 2.0 * 1e-12));
        }
    }
}
