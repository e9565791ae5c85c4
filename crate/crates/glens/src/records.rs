//! JSONL record types exchanged between pipeline stages and model adapters.

use glens_core::cropgen::CropWindow;
use glens_core::pss::{parse_coordinates, CoordinateFormat, DigitDistribution};
use glens_core::record::{Pass, PssSummary};
use glens_core::{remap_to_full, Point};
use serde::{Deserialize, Serialize};

pub const PREDICTION_SCHEMA_VERSION: u32 = 1;

/// One line of `tasks.jsonl`: what to ask the model and on which image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskRecord {
    pub scene_id: String,
    pub split: String,
    /// Relative to the directory holding the tasks file.
    pub image: String,
    pub instruction: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crop_window: Option<CropWindow>,
}

/// The first pass a crop-pass answer was refined from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FirstPass {
    pub pred: Point,
    pub raw_text: String,
}

/// One model response.
///
/// For `pass = "crop"`, `pred` and the digit scores refer to the cropped
/// image described by `crop_window`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionRecord {
    pub schema_version: u32,
    pub scene_id: String,
    pub model_id: String,
    pub instruction: String,
    pub pass: Pass,
    pub raw_text: String,
    pub pred: Point,
    pub x_digit_logits: DigitDistribution,
    pub y_digit_logits: DigitDistribution,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key_token_probs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crop_window: Option<CropWindow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_pass: Option<FirstPass>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refined_pred: Option<Point>,
    pub timestamp: String,
}

impl PredictionRecord {
    /// Prediction in full-image coordinates.
    pub fn full_frame_pred(&self) -> Point {
        match (self.pass, self.refined_pred, self.crop_window) {
            (Pass::Crop, Some(p), _) => p,
            (Pass::Crop, None, Some(w)) => remap_to_full(self.pred, &w),
            _ => self.pred,
        }
    }

    /// Cross-field rules that the JSON shape alone cannot express.
    pub fn consistency_errors(&self, format: CoordinateFormat) -> Vec<(String, String)> {
        let mut errs = Vec::new();
        if self.schema_version != PREDICTION_SCHEMA_VERSION {
            errs.push(("/schema_version".to_string(), format!("unsupported version {}", self.schema_version)));
        }
        if self.pass == Pass::Crop && self.crop_window.is_none() {
            errs.push(("/crop_window".to_string(), "required when pass is \"crop\"".to_string()));
        }
        match parse_coordinates(&self.raw_text, format) {
            Ok(c) => {
                if (c.x - self.pred.x()).abs() > 1e-9 || (c.y - self.pred.y()).abs() > 1e-9 {
                    errs.push(("/pred".to_string(), format!("does not match raw_text {:?}", self.raw_text)));
                }
            }
            Err(e) => errs.push(("/raw_text".to_string(), e.to_string())),
        }
        if let Some(ps) = &self.key_token_probs {
            for (i, p) in ps.iter().enumerate() {
                if !(*p > 0.0 && *p <= 1.0) {
                    errs.push((format!("/key_token_probs/{i}"), format!("{p} outside (0, 1]")));
                }
            }
        }
        errs
    }
}

/// A task the adapter could not answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionFailure {
    pub schema_version: u32,
    pub scene_id: String,
    pub model_id: String,
    pub instruction: String,
    pub pass: Pass,
    pub error: String,
    pub timestamp: String,
}

/// A line of a predictions file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PredictionLine {
    Failure(PredictionFailure),
    Ok(Box<PredictionRecord>),
}

/// Output of `score` for a single prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreRecord {
    pub scene_id: String,
    pub model_id: String,
    pub pass: Pass,
    pub pss: PssSummary,
    pub x_peak: usize,
    pub y_peak: usize,
    pub perplexity: f64,
}
