//! Synthetic grounding scenes.
//!
//! A scene is a background with `n` distinct icons dropped at random,
//! non-overlapping positions. One icon is the target; every box is recorded
//! so predictions can be classified against the full layout.

mod composite;
pub mod rng;
pub mod synth;

pub use composite::{blend_over, composite, pixel_rect};
pub use rng::SceneRng;

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{BBox, PixelDims};
use crate::math;
use crate::raster::Raster;
use crate::taxonomy::Distractor;

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SceneError {
    #[error("icon library is empty")]
    EmptyLibrary,
    #[error("scene needs {requested} distinct icons but the library has {available}")]
    LibraryTooSmall { requested: usize, available: usize },
    #[error("scene needs at least one icon")]
    NoIcons,
    #[error("could not place icon {icon_id:?} (#{index}) after {attempts} attempts")]
    OverconstrainedLayout { index: usize, icon_id: String, attempts: u32 },
    #[error("instruction template {template:?} has no {{name}} slot")]
    BadTemplate { template: String },
    #[error("icon name is empty")]
    EmptyName,
    #[error("icon {id:?} is not in the library")]
    UnknownIcon { id: String },
    #[error("placement of {id:?} falls outside the background")]
    PlacementOutOfBounds { id: String },
    #[error("duplicate icon id {id:?}")]
    DuplicateIcon { id: String },
    #[error("invalid constraints: {reason}")]
    InvalidConstraints { reason: &'static str },
    #[error("manifest inconsistent: {reason}")]
    InvalidManifest { reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IconAsset {
    pub id: String,
    pub name: String,
    pub image: Raster,
}

impl IconAsset {
    pub fn new(id: String, name: String, image: Raster) -> Result<Self, SceneError> {
        if name.trim().is_empty() {
            return Err(SceneError::EmptyName);
        }
        Ok(Self { id, name, image })
    }

    pub fn dims(&self) -> PixelDims {
        self.image.dims()
    }

    pub fn has_alpha(&self) -> bool {
        self.image.as_bytes().chunks_exact(4).any(|px| px[3] != 255)
    }
}

/// Icons keyed by unique id, in a fixed order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IconLibrary {
    icons: Vec<IconAsset>,
}

impl IconLibrary {
    pub fn new(icons: Vec<IconAsset>) -> Result<Self, SceneError> {
        for (i, icon) in icons.iter().enumerate() {
            if icons[..i].iter().any(|o| o.id == icon.id) {
                return Err(SceneError::DuplicateIcon { id: icon.id.clone() });
            }
        }
        Ok(Self { icons })
    }

    pub fn icons(&self) -> &[IconAsset] {
        &self.icons
    }

    pub fn get(&self, id: &str) -> Option<&IconAsset> {
        self.icons.iter().find(|i| i.id == id)
    }

    pub fn len(&self) -> usize {
        self.icons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.icons.is_empty()
    }
}

/// Per-icon task string with a `{name}` slot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct InstructionTemplate(String);

impl InstructionTemplate {
    pub const DEFAULT: &'static str = "Click the {name} icon.";

    pub fn new(template: &str) -> Result<Self, SceneError> {
        if template.contains("{name}") {
            Ok(Self(template.to_string()))
        } else {
            Err(SceneError::BadTemplate { template: template.to_string() })
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl Default for InstructionTemplate {
    fn default() -> Self {
        Self(Self::DEFAULT.to_string())
    }
}

impl TryFrom<String> for InstructionTemplate {
    type Error = SceneError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        Self::new(&s)
    }
}

impl From<InstructionTemplate> for String {
    fn from(t: InstructionTemplate) -> Self {
        t.0
    }
}

pub fn instruction_for(name: &str, template: &InstructionTemplate) -> Result<String, SceneError> {
    if name.trim().is_empty() {
        return Err(SceneError::EmptyName);
    }
    Ok(template.0.replace("{name}", name))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Placement {
    pub icon_id: String,
    pub bbox: BBox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneManifest {
    pub schema_version: u32,
    pub scene_id: String,
    pub split: String,
    pub background: String,
    pub dims: PixelDims,
    pub placements: Vec<Placement>,
    pub target_icon_id: String,
    pub instruction: String,
    pub seed: u64,
}

impl SceneManifest {
    pub fn target(&self) -> Option<&Placement> {
        self.placements.iter().find(|p| p.icon_id == self.target_icon_id)
    }

    /// Every placement except the target.
    pub fn distractors(&self) -> Vec<Distractor> {
        self.placements
            .iter()
            .filter(|p| p.icon_id != self.target_icon_id)
            .map(|p| (p.icon_id.clone(), p.bbox))
            .collect()
    }

    /// Check the structural invariants: a single target and pairwise gaps of
    /// at least `margin`.
    pub fn check(&self, margin: f64) -> Result<(), SceneError> {
        let bad = |reason: String| Err(SceneError::InvalidManifest { reason });
        if self.schema_version != MANIFEST_SCHEMA_VERSION {
            return bad(format!("unsupported schema_version {}", self.schema_version));
        }
        let hits = self.placements.iter().filter(|p| p.icon_id == self.target_icon_id).count();
        if hits != 1 {
            return bad(format!("target {:?} appears {hits} times", self.target_icon_id));
        }
        for (i, a) in self.placements.iter().enumerate() {
            for b in &self.placements[i + 1..] {
                if a.icon_id == b.icon_id {
                    return bad(format!("icon {:?} placed twice", a.icon_id));
                }
                // tolerate the 6-decimal rounding of stored coordinates
                if a.bbox.gap(&b.bbox) < margin - 1e-9 {
                    return bad(format!("{:?} and {:?} closer than margin {margin}", a.icon_id, b.icon_id));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneConstraints {
    /// Minimum normalized gap between any two icon boxes.
    pub margin: f64,
    /// Icon long side as a fraction of `min(W, H)`, sampled uniformly.
    pub scale_min: f64,
    pub scale_max: f64,
    /// Rejection-sampling attempts per icon.
    pub max_attempts: u32,
}

impl Default for SceneConstraints {
    fn default() -> Self {
        Self { margin: 0.02, scale_min: 0.04, scale_max: 0.10, max_attempts: 1000 }
    }
}

impl SceneConstraints {
    fn validate(&self) -> Result<(), SceneError> {
        let err = |reason| Err(SceneError::InvalidConstraints { reason });
        if !(self.margin.is_finite() && self.margin >= 0.0) {
            return err("margin must be finite and non-negative");
        }
        if !(self.scale_min > 0.0 && self.scale_min <= self.scale_max && self.scale_max <= 1.0) {
            return err("need 0 < scale_min <= scale_max <= 1");
        }
        if self.max_attempts == 0 {
            return err("max_attempts must be positive");
        }
        Ok(())
    }
}

/// Everything that determines one scene besides the assets.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub scene_id: String,
    pub split: String,
    pub background_ref: String,
    pub icon_count: usize,
    pub seed: u64,
    pub constraints: SceneConstraints,
    pub template: InstructionTemplate,
}

/// Coordinates are stored with six decimals so manifests serialize exactly.
fn round6(v: f64) -> f64 {
    math::round_half_up(v * 1e6) / 1e6
}

fn normalized_box(x0: u32, y0: u32, w: u32, h: u32, dims: PixelDims) -> BBox {
    let (fw, fh) = (dims.width() as f64, dims.height() as f64);
    BBox::new(
        round6(x0 as f64 / fw),
        round6(y0 as f64 / fh),
        round6((x0 + w) as f64 / fw),
        round6((y0 + h) as f64 / fh),
    )
    .expect("pixel rect inside the image")
}

/// Lay out icons without rendering.
pub fn layout_scene(spec: &SceneSpec, dims: PixelDims, library: &IconLibrary) -> Result<SceneManifest, SceneError> {
    spec.constraints.validate()?;
    if library.is_empty() {
        return Err(SceneError::EmptyLibrary);
    }
    if spec.icon_count == 0 {
        return Err(SceneError::NoIcons);
    }
    if spec.icon_count > library.len() {
        return Err(SceneError::LibraryTooSmall { requested: spec.icon_count, available: library.len() });
    }

    let mut rng = SceneRng::new(spec.seed);

    // partial Fisher-Yates: the first icon_count slots are the drawn icons
    let mut order: Vec<usize> = (0..library.len()).collect();
    for i in 0..spec.icon_count {
        let j = i + rng.below((order.len() - i) as u64) as usize;
        order.swap(i, j);
    }

    let (w_px, h_px) = (dims.width(), dims.height());
    let short_side = w_px.min(h_px) as f64;
    let c = &spec.constraints;
    let mut placements: Vec<Placement> = Vec::with_capacity(spec.icon_count);

    for (index, &icon_idx) in order[..spec.icon_count].iter().enumerate() {
        let icon = &library.icons()[icon_idx];
        let (iw, ih) = (icon.dims().width() as f64, icon.dims().height() as f64);
        let long = iw.max(ih);
        let mut placed = None;
        for _ in 0..c.max_attempts {
            // fixed three draws per attempt
            let side = rng.range(c.scale_min, c.scale_max) * short_side;
            let ux = rng.next_u64();
            let uy = rng.next_u64();
            let bw = (math::round_half_up(side * iw / long) as u32).max(1);
            let bh = (math::round_half_up(side * ih / long) as u32).max(1);
            // keep one pixel of border so boxes lie strictly inside the image
            if bw + 2 > w_px || bh + 2 > h_px {
                continue;
            }
            let x0 = 1 + (ux % (w_px - bw - 1) as u64) as u32;
            let y0 = 1 + (uy % (h_px - bh - 1) as u64) as u32;
            let bbox = normalized_box(x0, y0, bw, bh, dims);
            if placements.iter().all(|p| p.bbox.gap(&bbox) >= c.margin) {
                placed = Some(bbox);
                break;
            }
        }
        let bbox = placed.ok_or_else(|| SceneError::OverconstrainedLayout {
            index,
            icon_id: icon.id.clone(),
            attempts: c.max_attempts,
        })?;
        placements.push(Placement { icon_id: icon.id.clone(), bbox });
    }

    let target_slot = rng.below(placements.len() as u64) as usize;
    let target = &library.icons()[order[target_slot]];
    let instruction = instruction_for(&target.name, &spec.template)?;

    Ok(SceneManifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        scene_id: spec.scene_id.clone(),
        split: spec.split.clone(),
        background: spec.background_ref.clone(),
        dims,
        placements,
        target_icon_id: target.id.clone(),
        instruction,
        seed: spec.seed,
    })
}

/// Lay out and render a scene.
pub fn generate_scene(
    spec: &SceneSpec,
    background: &Raster,
    library: &IconLibrary,
) -> Result<(SceneManifest, Raster), SceneError> {
    let manifest = layout_scene(spec, background.dims(), library)?;
    let image = composite(background, &manifest.placements, |id| library.get(id))?;
    Ok((manifest, image))
}
