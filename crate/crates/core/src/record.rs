//! The classified, scored row that feeds the report tables.

use alloc::string::String;

use serde::{Deserialize, Serialize};

use crate::geometry::Point;
use crate::pss::RecordPss;
use crate::taxonomy::ResponseCategory;

pub const EVAL_SCHEMA_VERSION: u32 = 1;

/// Which image the model saw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pass {
    Full,
    Crop,
}

impl Pass {
    pub fn as_str(&self) -> &'static str {
        match self {
            Pass::Full => "full",
            Pass::Crop => "crop",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PssSummary {
    pub score: f64,
    pub x: f64,
    pub y: f64,
}

impl From<&RecordPss> for PssSummary {
    fn from(r: &RecordPss) -> Self {
        Self { score: r.score, x: r.x.score, y: r.y.score }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalRecord {
    pub schema_version: u32,
    pub scene_id: String,
    pub model_id: String,
    pub split: String,
    pub pass: Pass,
    /// Prediction in full-image coordinates (remapped for crop passes).
    pub pred: Point,
    pub category: ResponseCategory,
    pub distance_to_target: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nearest_distractor_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nearest_distractor_distance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pss: Option<PssSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perplexity: Option<f64>,
}
