//! Run configuration.
//!
//! Values are layered: command-line flag, then `GLENS_*` environment
//! variable, then the TOML file, then the built-in default. The flag and
//! environment layers arrive together through [`Overrides`] because clap
//! resolves both.

use std::path::{Path, PathBuf};

use glens_core::pss::{CoordinateFormat, PssConfig};
use glens_core::scenegen::{InstructionTemplate, SceneConstraints};
use glens_core::stats::{AverageMode, TTestKind};
use glens_core::{ClassifierConfig, CropConfig, PixelDims};
use serde::{Deserialize, Serialize};

use crate::error::{GlensError, Result};
use crate::io::read_text;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneSection {
    pub icons_per_scene: usize,
    pub margin: f64,
    pub scale_min: f64,
    pub scale_max: f64,
    pub max_attempts: u32,
    pub width: u32,
    pub height: u32,
    /// Split labels assigned round-robin to generated scenes.
    pub splits: Vec<String>,
}

impl Default for SceneSection {
    fn default() -> Self {
        let c = SceneConstraints::default();
        Self {
            icons_per_scene: 8,
            margin: c.margin,
            scale_min: c.scale_min,
            scale_max: c.scale_max,
            max_attempts: c.max_attempts,
            width: 1280,
            height: 720,
            splits: vec!["synthetic".to_string()],
        }
    }
}

impl SceneSection {
    pub fn constraints(&self) -> SceneConstraints {
        SceneConstraints {
            margin: self.margin,
            scale_min: self.scale_min,
            scale_max: self.scale_max,
            max_attempts: self.max_attempts,
        }
    }
}

/// Asset locations. Relative paths resolve against the config file's
/// directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsSection {
    /// Directory with `index.json` and icon PNGs; the built-in icons when unset.
    pub library: Option<PathBuf>,
    /// Directory of background PNGs; synthetic wallpapers when unset.
    pub backgrounds: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub tau: f64,
    pub alpha: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub normalize_input: bool,
    pub seed: u64,
    pub template: String,
    pub thresholds: Vec<f64>,
    pub strict_format: bool,
    pub ttest: TTestKind,
    pub average: AverageMode,
    pub scene: SceneSection,
    pub paths: PathsSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            tau: ClassifierConfig::DEFAULT_TAU,
            alpha: CropConfig::DEFAULT_ALPHA,
            c: PssConfig::DEFAULT_C,
            normalize_input: true,
            seed: 0,
            template: InstructionTemplate::DEFAULT.to_string(),
            thresholds: vec![0.05, 0.10, 0.20, 0.30],
            strict_format: true,
            ttest: TTestKind::Welch,
            average: AverageMode::Unweighted,
            scene: SceneSection::default(),
            paths: PathsSection::default(),
        }
    }
}

/// Values from the command line or environment; `None` defers to the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub tau: Option<f64>,
    pub alpha: Option<f64>,
    pub strict_format: Option<bool>,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| GlensError::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = read_text(path).map_err(|e| GlensError::Config(e.to_string()))?;
        let mut cfg = Self::from_toml_str(&text).map_err(|e| GlensError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.paths.library, &mut cfg.paths.backgrounds].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    /// Load the file named by `ov.config` (if any), apply the overrides and
    /// validate the result.
    pub fn load(ov: &Overrides) -> Result<Self> {
        let mut cfg = match &ov.config {
            Some(path) => Self::from_file(path)?,
            None => Self::default(),
        };
        cfg.apply(ov);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, ov: &Overrides) {
        if let Some(v) = ov.seed {
            self.seed = v;
        }
        if let Some(v) = ov.tau {
            self.tau = v;
        }
        if let Some(v) = ov.alpha {
            self.alpha = v;
        }
        if let Some(v) = ov.strict_format {
            self.strict_format = v;
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(GlensError::Config(m));
        self.classifier()?;
        self.crop()?;
        self.pss_config()?;
        self.instruction_template()?;
        if self.thresholds.is_empty() {
            return bad("thresholds must not be empty".into());
        }
        if self.thresholds.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return bad(format!("thresholds must be finite and non-negative: {:?}", self.thresholds));
        }
        if self.thresholds.windows(2).any(|w| w[0] >= w[1]) {
            return bad(format!("thresholds must be strictly ascending: {:?}", self.thresholds));
        }
        let s = &self.scene;
        if s.icons_per_scene == 0 {
            return bad("scene.icons_per_scene must be at least 1".into());
        }
        if s.splits.is_empty() || s.splits.iter().any(|x| x.trim().is_empty()) {
            return bad("scene.splits must be a non-empty list of non-empty labels".into());
        }
        self.scene_dims()?;
        let c = s.constraints();
        if !(c.margin.is_finite() && c.margin >= 0.0) {
            return bad("scene.margin must be finite and non-negative".into());
        }
        if !(c.scale_min > 0.0 && c.scale_min <= c.scale_max && c.scale_max <= 1.0) {
            return bad("scene scales need 0 < scale_min <= scale_max <= 1".into());
        }
        if c.max_attempts == 0 {
            return bad("scene.max_attempts must be positive".into());
        }
        Ok(())
    }

    pub fn classifier(&self) -> Result<ClassifierConfig> {
        ClassifierConfig::new(self.tau).map_err(|e| GlensError::Config(format!("tau: {e}")))
    }

    pub fn crop(&self) -> Result<CropConfig> {
        CropConfig::new(self.alpha).map_err(|e| GlensError::Config(format!("alpha: {e}")))
    }

    pub fn pss_config(&self) -> Result<PssConfig> {
        PssConfig::new(self.c, self.normalize_input).map_err(|e| GlensError::Config(format!("C: {e}")))
    }

    pub fn instruction_template(&self) -> Result<InstructionTemplate> {
        InstructionTemplate::new(&self.template).map_err(|e| GlensError::Config(format!("template: {e}")))
    }

    pub fn scene_dims(&self) -> Result<PixelDims> {
        PixelDims::new(self.scene.width, self.scene.height).map_err(|e| GlensError::Config(format!("scene size: {e}")))
    }

    pub fn coordinate_format(&self) -> CoordinateFormat {
        if self.strict_format {
            CoordinateFormat::Strict
        } else {
            CoordinateFormat::Lenient
        }
    }
}
