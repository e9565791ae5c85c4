use super::{IconAsset, Placement, SceneError};
use crate::geometry::{BBox, PixelDims};
use crate::math;
use crate::raster::{Raster, Rgba};

/// Integer pixel rectangle `(x0, y0, width, height)` covered by `bbox`.
pub fn pixel_rect(bbox: &BBox, dims: PixelDims) -> (u32, u32, u32, u32) {
    let w = dims.width() as f64;
    let h = dims.height() as f64;
    let x0 = math::round_half_up(bbox.x1() * w) as u32;
    let y0 = math::round_half_up(bbox.y1() * h) as u32;
    let x1 = math::round_half_up(bbox.x2() * w) as u32;
    let y1 = math::round_half_up(bbox.y2() * h) as u32;
    (x0, y0, x1.saturating_sub(x0).max(1), y1.saturating_sub(y0).max(1))
}

/// Source-over blend of `src` onto `dst`, rounding half up per channel.
pub fn blend_over(src: Rgba, dst: Rgba) -> Rgba {
    let a = src[3] as u32;
    let inv = 255 - a;
    let mix = |s: u8, d: u8| -> u8 {
        let num = a * s as u32 + inv * d as u32;
        ((2 * num + 255) / 510) as u8
    };
    let out_a = a + (2 * inv * dst[3] as u32 + 255) / 510;
    [mix(src[0], dst[0]), mix(src[1], dst[1]), mix(src[2], dst[2]), out_a.min(255) as u8]
}

/// Draw each placement's icon into its box, scaled nearest-neighbour.
pub fn composite<'a>(
    background: &Raster,
    placements: &[Placement],
    mut icon_for: impl FnMut(&str) -> Option<&'a IconAsset>,
) -> Result<Raster, SceneError> {
    let mut out = background.clone();
    let dims = background.dims();
    for pl in placements {
        let icon = icon_for(&pl.icon_id).ok_or_else(|| SceneError::UnknownIcon { id: pl.icon_id.clone() })?;
        let (x0, y0, w, h) = pixel_rect(&pl.bbox, dims);
        if x0 as u64 + w as u64 > dims.width() as u64 || y0 as u64 + h as u64 > dims.height() as u64 {
            return Err(SceneError::PlacementOutOfBounds { id: pl.icon_id.clone() });
        }
        let scaled = icon.image.resize_nearest(PixelDims::new(w, h).expect("non-empty rect"));
        for dy in 0..h {
            for dx in 0..w {
                let src = scaled.get(dx, dy);
                let dst = out.get(x0 + dx, y0 + dy);
                out.put(x0 + dx, y0 + dy, blend_over(src, dst));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    fn dims(w: u32, h: u32) -> PixelDims {
        PixelDims::new(w, h).unwrap()
    }

    fn icon(px: Rgba) -> IconAsset {
        IconAsset::new("i".to_string(), "thing".to_string(), Raster::filled(dims(4, 4), px)).unwrap()
    }

    fn bg() -> Raster {
        Raster::from_fn(dims(10, 10), |x, y| [x as u8 * 10, y as u8 * 10, 100, 255])
    }

    #[test]
    fn zero_placements_is_identity() {
        let b = bg();
        let out = composite(&b, &[], |_| None).unwrap();
        assert_eq!(out.as_bytes(), b.as_bytes());
    }

    #[test]
    fn opaque_icon_replaces_box_exactly() {
        let ic = icon([1, 2, 3, 255]);
        let pl = Placement { icon_id: "i".to_string(), bbox: BBox::new(0.2, 0.3, 0.6, 0.5).unwrap() };
        let b = bg();
        let out = composite(&b, &[pl], |_| Some(&ic)).unwrap();
        for y in 0..10 {
            for x in 0..10 {
                let inside = (2..6).contains(&x) && (3..5).contains(&y);
                let want = if inside { [1, 2, 3, 255] } else { b.get(x, y) };
                assert_eq!(out.get(x, y), want, "pixel ({x},{y})");
            }
        }
    }

    #[test]
    fn half_alpha_blends_to_midpoint() {
        // 128/255 alpha; with the icon channel >= background the result is the
        // half-up rounded midpoint
        assert_eq!(blend_over([201, 200, 100, 128], [100, 100, 100, 255]), [151, 150, 100, 255]);
        for s in (0..=255u32).step_by(5) {
            for d in (0..=s).step_by(5) {
                let got = blend_over([s as u8, 0, 0, 128], [d as u8, 0, 0, 255])[0] as f64;
                let mid = libm::floor((s + d) as f64 / 2.0 + 0.5);
                assert!((got - mid).abs() <= 1.0, "s={s} d={d}");
            }
        }
    }

    #[test]
    fn alpha_extremes() {
        assert_eq!(blend_over([9, 9, 9, 0], [1, 2, 3, 255]), [1, 2, 3, 255]);
        assert_eq!(blend_over([9, 8, 7, 255], [1, 2, 3, 255]), [9, 8, 7, 255]);
    }

    #[test]
    fn unknown_icon_and_bounds() {
        let pl = Placement { icon_id: "nope".to_string(), bbox: BBox::new(0.1, 0.1, 0.2, 0.2).unwrap() };
        assert!(matches!(composite(&bg(), &[pl], |_| None), Err(SceneError::UnknownIcon { .. })));
        let ic = icon([0, 0, 0, 255]);
        let pl = vec![Placement { icon_id: "i".to_string(), bbox: BBox::new(0.97, 0.1, 1.0, 0.2).unwrap() }];
        // both edges round to column 10, one past the last pixel
        assert!(matches!(
            composite(&bg(), &pl, |_| Some(&ic)),
            Err(SceneError::PlacementOutOfBounds { .. })
        ));
    }
}
