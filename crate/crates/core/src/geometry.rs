//! Normalized-coordinate primitives.
//!
//! All positions are fractions of the image extent, so `(0, 0)` is the top
//! left corner and `(1, 1)` the bottom right. Pixel conversion happens only at
//! raster boundaries through [`to_pixels`] / [`from_pixels`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("coordinate ({x}, {y}) outside the unit square")]
    PointOutOfRange { x: f64, y: f64 },
    #[error("invalid box [{x1}, {y1}, {x2}, {y2}]: need 0 <= x1 < x2 <= 1 and 0 <= y1 < y2 <= 1")]
    InvalidBox { x1: f64, y1: f64, x2: f64, y2: f64 },
    #[error("pixel dimensions must be at least 1x1, got {width}x{height}")]
    EmptyDims { width: u32, height: u32 },
}

fn in_unit(v: f64) -> bool {
    (0.0..=1.0).contains(&v)
}

/// A predicted click position in normalized image coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    x: f64,
    y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Result<Self, GeometryError> {
        if in_unit(x) && in_unit(y) {
            Ok(Self { x, y })
        } else {
            Err(GeometryError::PointOutOfRange { x, y })
        }
    }

    /// Builds a point by clamping both axes into `[0, 1]`. NaN maps to 0.
    pub fn clamped(x: f64, y: f64) -> Self {
        let c = |v: f64| if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
        Self { x: c(x), y: c(y) }
    }

    #[inline]
    pub fn x(&self) -> f64 {
        self.x
    }

    #[inline]
    pub fn y(&self) -> f64 {
        self.y
    }

    /// Mirror about the vertical line `x = 0.5`.
    pub fn reflect_x(&self) -> Self {
        Self { x: 1.0 - self.x, y: self.y }
    }
}

impl TryFrom<[f64; 2]> for Point {
    type Error = GeometryError;

    fn try_from(v: [f64; 2]) -> Result<Self, Self::Error> {
        Point::new(v[0], v[1])
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

/// Axis-aligned box `[x1, y1, x2, y2]` in normalized coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    x1: f64,
    y1: f64,
    x2: f64,
    y2: f64,
}

impl BBox {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self, GeometryError> {
        let ok = [x1, y1, x2, y2].into_iter().all(in_unit) && x1 < x2 && y1 < y2;
        if ok {
            Ok(Self { x1, y1, x2, y2 })
        } else {
            Err(GeometryError::InvalidBox { x1, y1, x2, y2 })
        }
    }

    #[inline]
    pub fn x1(&self) -> f64 {
        self.x1
    }
    #[inline]
    pub fn y1(&self) -> f64 {
        self.y1
    }
    #[inline]
    pub fn x2(&self) -> f64 {
        self.x2
    }
    #[inline]
    pub fn y2(&self) -> f64 {
        self.y2
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn center(&self) -> Point {
        Point {
            x: 0.5 * (self.x1 + self.x2),
            y: 0.5 * (self.y1 + self.y2),
        }
    }

    /// Mirror about the vertical line `x = 0.5`.
    pub fn reflect_x(&self) -> Self {
        Self {
            x1: 1.0 - self.x2,
            y1: self.y1,
            x2: 1.0 - self.x1,
            y2: self.y2,
        }
    }

    /// Euclidean gap between two boxes; zero when they touch or overlap.
    pub fn gap(&self, other: &BBox) -> f64 {
        let dx = (other.x1 - self.x2).max(0.0).max(self.x1 - other.x2);
        let dy = (other.y1 - self.y2).max(0.0).max(self.y1 - other.y2);
        math::sqrt(dx * dx + dy * dy)
    }
}

impl TryFrom<[f64; 4]> for BBox {
    type Error = GeometryError;

    fn try_from(v: [f64; 4]) -> Result<Self, Self::Error> {
        BBox::new(v[0], v[1], v[2], v[3])
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        [b.x1, b.y1, b.x2, b.y2]
    }
}

/// Image size in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawDims")]
pub struct PixelDims {
    width: u32,
    height: u32,
}

#[derive(Deserialize)]
struct RawDims {
    width: u32,
    height: u32,
}

impl TryFrom<RawDims> for PixelDims {
    type Error = GeometryError;

    fn try_from(r: RawDims) -> Result<Self, Self::Error> {
        PixelDims::new(r.width, r.height)
    }
}

impl PixelDims {
    pub fn new(width: u32, height: u32) -> Result<Self, GeometryError> {
        if width >= 1 && height >= 1 {
            Ok(Self { width, height })
        } else {
            Err(GeometryError::EmptyDims { width, height })
        }
    }

    #[inline]
    pub fn width(&self) -> u32 {
        self.width
    }

    #[inline]
    pub fn height(&self) -> u32 {
        self.height
    }
}

/// Strict containment: points on the boundary are outside.
pub fn contains(p: Point, b: BBox) -> bool {
    b.x1 < p.x && p.x < b.x2 && b.y1 < p.y && p.y < b.y2
}

/// Euclidean distance from `p` to the nearest point of `b`; zero inside and on
/// the boundary.
pub fn point_to_box_distance(p: Point, b: BBox) -> f64 {
    let dx = (b.x1 - p.x).max(0.0).max(p.x - b.x2);
    let dy = (b.y1 - p.y).max(0.0).max(p.y - b.y2);
    math::sqrt(dx * dx + dy * dy)
}

/// Continuous pixel position rounded half up to the nearest integer.
///
/// `x = 1.0` maps to `width`, one past the last pixel column; use
/// [`pixel_index`] to address a raster.
pub fn to_pixels(p: Point, d: PixelDims) -> (u32, u32) {
    let px = math::round_half_up(p.x * d.width as f64) as u32;
    let py = math::round_half_up(p.y * d.height as f64) as u32;
    (px, py)
}

pub fn from_pixels(px: u32, py: u32, d: PixelDims) -> Point {
    Point::clamped(px as f64 / d.width as f64, py as f64 / d.height as f64)
}

/// The raster cell the continuous point falls in, clamped to the last
/// row/column.
pub fn pixel_index(p: Point, d: PixelDims) -> (u32, u32) {
    let ix = (math::floor(p.x * d.width as f64) as u32).min(d.width - 1);
    let iy = (math::floor(p.y * d.height as f64) as u32).min(d.height - 1);
    (ix, iy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pt(x: f64, y: f64) -> Point {
        Point::new(x, y).unwrap()
    }

    fn bx(x1: f64, y1: f64, x2: f64, y2: f64) -> BBox {
        BBox::new(x1, y1, x2, y2).unwrap()
    }

    #[test]
    fn contains_is_strict() {
        let b = bx(0.4, 0.4, 0.6, 0.6);
        assert!(contains(pt(0.5, 0.5), b));
        assert!(!contains(pt(0.4, 0.5), b));
        assert!(!contains(pt(0.9, 0.9), b));
    }

    #[test]
    fn distance_examples() {
        assert_eq!(point_to_box_distance(pt(0.5, 0.5), bx(0.4, 0.4, 0.6, 0.6)), 0.0);
        let d = point_to_box_distance(pt(0.1, 0.5), bx(0.3, 0.4, 0.6, 0.6));
        assert!((d - 0.2).abs() < 1e-15);
        let d = point_to_box_distance(pt(0.0, 0.0), bx(0.3, 0.4, 0.6, 0.6));
        assert!((d - 0.5).abs() < 1e-15);
    }

    #[test]
    fn boundary_point_has_zero_distance_but_is_not_contained() {
        let b = bx(0.4, 0.4, 0.6, 0.6);
        let p = pt(0.6, 0.45);
        assert!(!contains(p, b));
        assert_eq!(point_to_box_distance(p, b), 0.0);
    }

    #[test]
    fn pixel_conversion_examples() {
        let d = PixelDims::new(1000, 800).unwrap();
        assert_eq!(to_pixels(pt(0.5, 0.5), d), (500, 400));
        assert_eq!(to_pixels(pt(0.0, 0.0), d), (0, 0));
        assert_eq!(to_pixels(pt(0.0, 0.0), PixelDims::new(3, 7).unwrap()), (0, 0));
        assert_eq!(to_pixels(pt(0.711, 0.23), d), (711, 184));
    }

    #[test]
    fn invalid_inputs_rejected() {
        assert!(Point::new(1.1, 0.0).is_err());
        assert!(Point::new(f64::NAN, 0.0).is_err());
        assert!(BBox::new(0.5, 0.1, 0.5, 0.2).is_err());
        assert!(BBox::new(0.1, 0.1, 1.2, 0.2).is_err());
        assert!(PixelDims::new(0, 10).is_err());
    }

    #[test]
    fn box_gap_matches_corner_distance() {
        let a = bx(0.0, 0.0, 0.1, 0.1);
        let b = bx(0.4, 0.5, 0.6, 0.6);
        assert!((a.gap(&b) - 0.5).abs() < 1e-15);
        assert_eq!(a.gap(&b), b.gap(&a));
        assert_eq!(a.gap(&bx(0.05, 0.05, 0.2, 0.2)), 0.0);
    }

    fn arb_point() -> impl Strategy<Value = Point> {
        (0.0..=1.0f64, 0.0..=1.0f64).prop_map(|(x, y)| pt(x, y))
    }

    fn arb_box() -> impl Strategy<Value = BBox> {
        (0.0..1.0f64, 0.0..1.0f64, 0.0..1.0f64, 0.0..1.0f64)
            .prop_filter("non-degenerate", |(a, b, c, d)| a != c && b != d)
            .prop_map(|(a, b, c, d)| bx(a.min(c), b.min(d), a.max(c), b.max(d)))
    }

    proptest! {
        #[test]
        fn contained_implies_zero_distance(p in arb_point(), b in arb_box()) {
            if contains(p, b) {
                prop_assert_eq!(point_to_box_distance(p, b), 0.0);
            }
        }

        #[test]
        fn distance_nonneg_and_reflection_symmetric(p in arb_point(), b in arb_box()) {
            let d = point_to_box_distance(p, b);
            prop_assert!(d >= 0.0);
            let r = point_to_box_distance(p.reflect_x(), b.reflect_x());
            prop_assert!((d - r).abs() < 1e-12);
        }

        #[test]
        fn distance_monotone_moving_toward_box(b in arb_box(), y in 0.0..=1.0f64, steps in 2usize..20) {
            // walk from the left edge of the unit square toward the box's left side
            let mut prev = f64::INFINITY;
            for k in 0..=steps {
                let x = b.x1() * k as f64 / steps as f64;
                let d = point_to_box_distance(pt(x, y), b);
                prop_assert!(d <= prev + 1e-15);
                prev = d;
            }
        }

        #[test]
        fn pixel_roundtrip_error_bounded(p in arb_point(), w in 1u32..5000, h in 1u32..5000) {
            let d = PixelDims::new(w, h).unwrap();
            let (px, py) = to_pixels(p, d);
            let back = from_pixels(px, py, d);
            prop_assert!((back.x() - p.x()).abs() <= 0.5 / w as f64 + 1e-12);
            prop_assert!((back.y() - p.y()).abs() <= 0.5 / h as f64 + 1e-12);
        }
    }
}
