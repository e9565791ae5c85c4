//! Context-aware cropping around a first-pass prediction.
//!
//! The window keeps `floor(alpha * dim)` pixels per axis and is positioned so
//! the predicted point sits as close to its centre as the image borders allow.
//! A second-pass prediction made on the crop is mapped back with
//! [`remap_to_full`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{pixel_index, PixelDims, Point};
use crate::math;
use crate::raster::{Raster, RasterError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CropError {
    #[error("crop ratio must lie strictly between 0 and 1, got {alpha}")]
    InvalidAlpha { alpha: f64 },
    #[error("crop ratio {alpha} leaves an empty window on a {width}x{height} image")]
    DegenerateImage { alpha: f64, width: u32, height: u32 },
    #[error("window {x_start},{y_start} {width}x{height} does not fit a {parent_w}x{parent_h} image")]
    WindowOutOfBounds { x_start: u32, y_start: u32, width: u32, height: u32, parent_w: u32, parent_h: u32 },
    #[error(transparent)]
    Raster(#[from] RasterError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CropConfig {
    alpha: f64,
}

impl CropConfig {
    pub const DEFAULT_ALPHA: f64 = 0.8;

    pub fn new(alpha: f64) -> Result<Self, CropError> {
        if alpha > 0.0 && alpha < 1.0 {
            Ok(Self { alpha })
        } else {
            Err(CropError::InvalidAlpha { alpha })
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

impl Default for CropConfig {
    fn default() -> Self {
        Self { alpha: Self::DEFAULT_ALPHA }
    }
}

/// Pixel window inside a parent image.
///
/// Serialized flat as `x_start, y_start, width, height, parent_w, parent_h`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "WindowFields", into = "WindowFields")]
pub struct CropWindow {
    x_start: u32,
    y_start: u32,
    width: u32,
    height: u32,
    parent: PixelDims,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WindowFields {
    x_start: u32,
    y_start: u32,
    width: u32,
    height: u32,
    parent_w: u32,
    parent_h: u32,
}

impl TryFrom<WindowFields> for CropWindow {
    type Error = CropError;

    fn try_from(f: WindowFields) -> Result<Self, Self::Error> {
        let parent = PixelDims::new(f.parent_w, f.parent_h).map_err(|_| CropError::WindowOutOfBounds {
            x_start: f.x_start,
            y_start: f.y_start,
            width: f.width,
            height: f.height,
            parent_w: f.parent_w,
            parent_h: f.parent_h,
        })?;
        CropWindow::new(f.x_start, f.y_start, f.width, f.height, parent)
    }
}

impl From<CropWindow> for WindowFields {
    fn from(w: CropWindow) -> Self {
        WindowFields {
            x_start: w.x_start,
            y_start: w.y_start,
            width: w.width,
            height: w.height,
            parent_w: w.parent.width(),
            parent_h: w.parent.height(),
        }
    }
}

impl CropWindow {
    pub fn new(x_start: u32, y_start: u32, width: u32, height: u32, parent: PixelDims) -> Result<Self, CropError> {
        let fits = width >= 1
            && height >= 1
            && x_start as u64 + width as u64 <= parent.width() as u64
            && y_start as u64 + height as u64 <= parent.height() as u64;
        if fits {
            Ok(Self { x_start, y_start, width, height, parent })
        } else {
            Err(CropError::WindowOutOfBounds {
                x_start,
                y_start,
                width,
                height,
                parent_w: parent.width(),
                parent_h: parent.height(),
            })
        }
    }

    pub fn x_start(&self) -> u32 {
        self.x_start
    }
    pub fn y_start(&self) -> u32 {
        self.y_start
    }
    pub fn width(&self) -> u32 {
        self.width
    }
    pub fn height(&self) -> u32 {
        self.height
    }
    pub fn parent(&self) -> PixelDims {
        self.parent
    }

    pub fn dims(&self) -> PixelDims {
        PixelDims::new(self.width, self.height).expect("window is non-empty")
    }

    /// Whether the pixel `(x, y)` of the parent image lies in the window.
    pub fn contains_pixel(&self, x: u32, y: u32) -> bool {
        x >= self.x_start && x < self.x_start + self.width && y >= self.y_start && y < self.y_start + self.height
    }

    /// Express a full-image point in crop coordinates. Points outside the
    /// window are clamped onto its border.
    pub fn to_crop(&self, p: Point) -> Point {
        let x = (p.x() * self.parent.width() as f64 - self.x_start as f64) / self.width as f64;
        let y = (p.y() * self.parent.height() as f64 - self.y_start as f64) / self.height as f64;
        Point::clamped(x, y)
    }
}

/// Start offset along one axis: the window of `len` pixels whose centre is
/// nearest `pos`, clamped to `[0, dim - len]`.
fn axis_start(pos: f64, dim: u32, len: u32) -> u32 {
    let ideal = math::round_half_up(pos - len as f64 / 2.0);
    let max_start = (dim - len) as f64;
    ideal.clamp(0.0, max_start) as u32
}

/// Plan the crop window around `p`.
pub fn plan_crop(p: Point, dims: PixelDims, cfg: &CropConfig) -> Result<CropWindow, CropError> {
    let width = math::floor(cfg.alpha * dims.width() as f64) as u32;
    let height = math::floor(cfg.alpha * dims.height() as f64) as u32;
    if width < 1 || height < 1 {
        return Err(CropError::DegenerateImage { alpha: cfg.alpha, width: dims.width(), height: dims.height() });
    }
    let x_start = axis_start(p.x() * dims.width() as f64, dims.width(), width);
    let y_start = axis_start(p.y() * dims.height() as f64, dims.height(), height);
    CropWindow::new(x_start, y_start, width, height, dims)
}

/// Map a point given in crop coordinates back to the full image.
pub fn remap_to_full(p_crop: Point, w: &CropWindow) -> Point {
    let x = (w.x_start as f64 + p_crop.x() * w.width as f64) / w.parent.width() as f64;
    let y = (w.y_start as f64 + p_crop.y() * w.height as f64) / w.parent.height() as f64;
    Point::clamped(x, y)
}

/// Whether the window contains the raster cell of `p`.
pub fn window_contains_point(w: &CropWindow, p: Point) -> bool {
    let (ix, iy) = pixel_index(p, w.parent);
    w.contains_pixel(ix, iy)
}

/// Exact copy of the window's pixels.
pub fn crop_pixels(image: &Raster, w: &CropWindow) -> Result<Raster, CropError> {
    if image.dims() != w.parent {
        return Err(RasterError::DimensionMismatch {
            want_w: w.parent.width(),
            want_h: w.parent.height(),
            got_w: image.width(),
            got_h: image.height(),
        }
        .into());
    }
    Ok(image.sub_image(w.x_start, w.y_start, w.width, w.height))
}

/// Both passes of a crop refinement, with the final full-image point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Refinement {
    pub first_pass: Point,
    pub second_pass_crop: Point,
    pub window: CropWindow,
    pub refined: Point,
}

/// The final answer is always the remapped second pass.
pub fn refine(first_pass: Point, second_pass_crop: Point, w: &CropWindow) -> Refinement {
    Refinement {
        first_pass,
        second_pass_crop,
        window: *w,
        refined: remap_to_full(second_pass_crop, w),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pt(x: f64, y: f64) -> Point {
        Point::new(x, y).unwrap()
    }

    fn dims(w: u32, h: u32) -> PixelDims {
        PixelDims::new(w, h).unwrap()
    }

    fn window(x: u32, y: u32, w: u32, h: u32, pw: u32, ph: u32) -> CropWindow {
        CropWindow::new(x, y, w, h, dims(pw, ph)).unwrap()
    }

    #[test]
    fn plan_examples() {
        let cfg = CropConfig::default();
        let w = plan_crop(pt(0.5, 0.5), dims(1000, 800), &cfg).unwrap();
        assert_eq!((w.x_start(), w.y_start(), w.width(), w.height()), (100, 80, 800, 640));
        let w = plan_crop(pt(0.01, 0.5), dims(1000, 800), &cfg).unwrap();
        assert_eq!((w.x_start(), w.y_start()), (0, 80));
        let w = plan_crop(pt(0.99, 0.99), dims(1000, 800), &cfg).unwrap();
        assert_eq!((w.x_start(), w.y_start()), (200, 160));
    }

    #[test]
    fn right_edge_with_fractional_window() {
        // alpha * W = 800.8 is not an integer; the last column must stay reachable
        let d = dims(1001, 1001);
        let p = pt(0.9995, 0.9995);
        let w = plan_crop(p, d, &CropConfig::default()).unwrap();
        assert_eq!(w.x_start() + w.width(), 1001);
        assert!(window_contains_point(&w, p));
    }

    #[test]
    fn degenerate_image() {
        let cfg = CropConfig::new(0.5).unwrap();
        assert!(matches!(plan_crop(pt(0.5, 0.5), dims(1, 100), &cfg), Err(CropError::DegenerateImage { .. })));
        assert!(CropConfig::new(1.0).is_err());
        assert!(CropConfig::new(0.0).is_err());
    }

    #[test]
    fn remap_examples() {
        let w = window(100, 80, 800, 640, 1000, 800);
        let a = remap_to_full(pt(0.0, 0.0), &w);
        assert!((a.x() - 0.1).abs() < 1e-15 && (a.y() - 0.1).abs() < 1e-15);
        let b = remap_to_full(pt(1.0, 1.0), &w);
        assert!((b.x() - 0.9).abs() < 1e-15 && (b.y() - 0.9).abs() < 1e-15);
    }

    #[test]
    fn refine_examples() {
        let w = window(0, 0, 800, 640, 1000, 800);
        let r = refine(pt(0.3, 0.3), pt(0.5, 0.5), &w);
        assert!((r.refined.x() - 0.4).abs() < 1e-15 && (r.refined.y() - 0.4).abs() < 1e-15);
        assert_eq!(r.first_pass, pt(0.3, 0.3));

        // centred, unclamped window: the crop centre maps back to the first pass
        let first = pt(0.5, 0.5);
        let w = plan_crop(first, dims(1000, 800), &CropConfig::default()).unwrap();
        assert_eq!(refine(first, pt(0.5, 0.5), &w).refined, first);
    }

    fn checkerboard(n: u32) -> Raster {
        Raster::from_fn(dims(n, n), |x, y| if (x + y) % 2 == 0 { [255, 255, 255, 255] } else { [0, 0, 0, 255] })
    }

    #[test]
    fn crop_checkerboard_interior() {
        let img = checkerboard(4);
        let out = crop_pixels(&img, &window(1, 1, 2, 2, 4, 4)).unwrap();
        assert_eq!(out.width(), 2);
        for y in 0..2 {
            for x in 0..2 {
                assert_eq!(out.get(x, y), img.get(x + 1, y + 1));
            }
        }
    }

    #[test]
    fn crop_full_window_is_identity() {
        let img = Raster::from_fn(dims(5, 3), |x, y| [x as u8, y as u8, 7, 255]);
        assert_eq!(crop_pixels(&img, &window(0, 0, 5, 3, 5, 3)).unwrap(), img);
    }

    #[test]
    fn crop_touching_right_edge_keeps_last_column() {
        let img = Raster::from_fn(dims(6, 2), |x, y| [x as u8 * 10, y as u8, 0, 255]);
        let out = crop_pixels(&img, &window(3, 0, 3, 2, 6, 2)).unwrap();
        assert_eq!(out.get(2, 0), img.get(5, 0));
        assert_eq!(out.get(2, 1), img.get(5, 1));
    }

    #[test]
    fn crop_dimension_mismatch() {
        let img = checkerboard(4);
        assert!(matches!(
            crop_pixels(&img, &window(0, 0, 2, 2, 5, 5)),
            Err(CropError::Raster(RasterError::DimensionMismatch { .. }))
        ));
    }

    #[test]
    fn window_rejects_out_of_bounds() {
        assert!(CropWindow::new(3, 0, 4, 2, dims(6, 2)).is_err());
        assert!(CropWindow::new(0, 0, 0, 2, dims(6, 2)).is_err());
    }

    proptest! {
        #[test]
        fn contains_pixel_and_in_bounds(x in 0.0..=1.0f64, y in 0.0..=1.0f64, w in 1u32..4000, h in 1u32..4000, alpha in 0.01..0.99f64) {
            let d = dims(w, h);
            let Ok(win) = plan_crop(pt(x, y), d, &CropConfig::new(alpha).unwrap()) else {
                return Ok(());
            };
            prop_assert!(win.x_start() + win.width() <= w);
            prop_assert!(win.y_start() + win.height() <= h);
            prop_assert!(window_contains_point(&win, pt(x, y)));
        }

        #[test]
        fn plan_monotone_in_x(x in 0.0..1.0f64, dx in 0.0..0.5f64, w in 2u32..3000) {
            let cfg = CropConfig::default();
            let d = dims(w, 100);
            let a = plan_crop(pt(x, 0.5), d, &cfg).unwrap();
            let b = plan_crop(pt((x + dx).min(1.0), 0.5), d, &cfg).unwrap();
            prop_assert!(b.x_start() >= a.x_start());
        }

        #[test]
        fn remap_inverts_to_crop(fx in 0.0..=1.0f64, fy in 0.0..=1.0f64, w in 10u32..3000, h in 10u32..3000) {
            let d = dims(w, h);
            let win = plan_crop(pt(fx, fy), d, &CropConfig::default()).unwrap();
            let back = remap_to_full(win.to_crop(pt(fx, fy)), &win);
            // to_crop clamps, so only points inside the window roundtrip
            let inside_x = fx * w as f64 >= win.x_start() as f64 && fx * w as f64 <= (win.x_start() + win.width()) as f64;
            let inside_y = fy * h as f64 >= win.y_start() as f64 && fy * h as f64 <= (win.y_start() + win.height()) as f64;
            if inside_x && inside_y {
                prop_assert!((back.x() - fx).abs() < 1e-12);
                prop_assert!((back.y() - fy).abs() < 1e-12);
            }
        }
    }
}
