//! Procedural stand-ins for real icon packs and wallpapers, so scenes can be
//! generated without external assets.

use alloc::string::ToString;
use alloc::vec::Vec;

use super::{IconAsset, IconLibrary, SceneRng};
use crate::geometry::PixelDims;
use crate::math;
use crate::raster::{Raster, Rgba};

pub const ICON_SIZE: u32 = 48;

type Shape = fn(f64, f64) -> bool;

fn radius(u: f64, v: f64) -> f64 {
    math::sqrt(u * u + v * v)
}

fn cheb(u: f64, v: f64) -> f64 {
    math::abs(u).max(math::abs(v))
}

// (id, display name, colour, alpha, inside test on [-1, 1]^2 with v pointing down)
const SHAPES: [(&str, &str, [u8; 3], u8, Shape); 16] = [
    ("circle", "circle", [220, 60, 60], 255, |u, v| radius(u, v) < 0.85),
    ("ring", "ring", [60, 120, 220], 255, |u, v| (0.55..0.9).contains(&radius(u, v))),
    ("square", "square", [60, 170, 90], 255, |u, v| cheb(u, v) < 0.75),
    ("frame", "frame", [230, 150, 40], 255, |u, v| (0.5..0.8).contains(&cheb(u, v))),
    ("diamond", "diamond", [150, 70, 200], 255, |u, v| math::abs(u) + math::abs(v) < 0.9),
    ("triangle", "triangle", [240, 200, 40], 255, |u, v| {
        v > -0.8 && v < 0.75 && math::abs(u) < (v + 0.8) * 0.55
    }),
    ("cross", "cross", [200, 40, 120], 255, |u, v| {
        radius(u, v) < 0.95 && (math::abs(u - v) < 0.25 || math::abs(u + v) < 0.25)
    }),
    ("plus", "plus", [40, 180, 180], 255, |u, v| {
        cheb(u, v) < 0.85 && (math::abs(u) < 0.22 || math::abs(v) < 0.22)
    }),
    ("hourglass", "hourglass", [120, 90, 50], 255, |u, v| {
        math::abs(v) < 0.85 && (math::abs(u) < math::abs(v) * 0.9 || math::abs(v) > 0.7)
    }),
    ("stripes", "striped flag", [90, 90, 220], 255, |u, v| {
        cheb(u, v) < 0.8 && (math::floor((v + 1.0) * 4.0) as i32) % 2 == 0
    }),
    ("checker", "checkerboard", [30, 30, 30], 255, |u, v| {
        let a = math::floor((u + 1.0) * 3.0) as i32;
        let b = math::floor((v + 1.0) * 3.0) as i32;
        cheb(u, v) < 0.9 && (a + b) % 2 == 0
    }),
    ("crescent", "crescent moon", [250, 220, 120], 255, |u, v| {
        radius(u, v) < 0.85 && radius(u - 0.35, v + 0.15) > 0.7
    }),
    ("bullseye", "bullseye", [230, 80, 30], 255, |u, v| {
        let r = radius(u, v);
        r < 0.9 && (r < 0.3 || (0.5..0.7).contains(&r))
    }),
    ("bars", "bar chart", [80, 160, 60], 255, |u, v| {
        (-0.8..-0.4).contains(&u) && v > 0.2 && v < 0.85
            || (-0.2..0.2).contains(&u) && v > -0.3 && v < 0.85
            || (0.4..0.8).contains(&u) && v > -0.8 && v < 0.85
    }),
    ("arrow", "arrow", [20, 110, 200], 255, |u, v| {
        math::abs(v) < 0.2 && (-0.85..0.2).contains(&u) || (0.2..0.85).contains(&u) && math::abs(v) < (0.85 - u) * 1.1
    }),
    ("halo", "halo", [255, 255, 255], 128, |u, v| radius(u, v) < 0.8),
];

fn render_icon(colour: [u8; 3], alpha: u8, inside: Shape) -> Raster {
    let dims = PixelDims::new(ICON_SIZE, ICON_SIZE).expect("icon size");
    let half = ICON_SIZE as f64 / 2.0;
    Raster::from_fn(dims, |x, y| {
        let u = (x as f64 + 0.5 - half) / half;
        let v = (y as f64 + 0.5 - half) / half;
        if inside(u, v) {
            [colour[0], colour[1], colour[2], alpha]
        } else {
            [0, 0, 0, 0]
        }
    })
}

/// Sixteen distinct 48x48 icons with transparent surroundings.
pub fn builtin_library() -> IconLibrary {
    let icons: Vec<IconAsset> = SHAPES
        .iter()
        .map(|&(id, name, colour, alpha, shape)| {
            IconAsset::new(id.to_string(), name.to_string(), render_icon(colour, alpha, shape)).expect("named icon")
        })
        .collect();
    IconLibrary::new(icons).expect("unique ids")
}

fn lerp(a: u8, b: u8, t: f64) -> u8 {
    math::round_half_up(a as f64 + (b as f64 - a as f64) * t) as u8
}

/// Desktop-like wallpaper: a seeded vertical gradient with a taskbar strip.
pub fn synthetic_background(dims: PixelDims, seed: u64) -> Raster {
    let mut rng = SceneRng::new(seed ^ 0x6261_636b_6772_6e64);
    let mut colour = || -> Rgba { [rng.below(200) as u8 + 20, rng.below(200) as u8 + 20, rng.below(200) as u8 + 20, 255] };
    let top = colour();
    let bottom = colour();
    let h = dims.height();
    let bar = (h / 16).max(1);
    Raster::from_fn(dims, |_, y| {
        if y >= h - bar {
            [32, 32, 40, 255]
        } else {
            let t = y as f64 / (h - bar).max(1) as f64;
            [lerp(top[0], bottom[0], t), lerp(top[1], bottom[1], t), lerp(top[2], bottom[2], t), 255]
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn library_icons_are_distinct_and_visible() {
        let lib = builtin_library();
        assert_eq!(lib.len(), 16);
        for (i, a) in lib.icons().iter().enumerate() {
            let opaque = a.image.as_bytes().chunks_exact(4).filter(|p| p[3] > 0).count();
            assert!(opaque > 100, "{} nearly empty", a.id);
            for b in &lib.icons()[i + 1..] {
                assert_ne!(a.image, b.image, "{} == {}", a.id, b.id);
                assert_ne!(a.name, b.name);
            }
        }
        assert!(lib.get("halo").unwrap().has_alpha());
    }

    #[test]
    fn background_is_opaque_and_seeded() {
        let d = PixelDims::new(64, 48).unwrap();
        let a = synthetic_background(d, 1);
        assert!(a.as_bytes().chunks_exact(4).all(|p| p[3] == 255));
        assert_eq!(a, synthetic_background(d, 1));
        assert_ne!(a, synthetic_background(d, 2));
    }
}
