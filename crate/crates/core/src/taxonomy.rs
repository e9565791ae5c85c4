//! Four-way response taxonomy for click predictions.
//!
//! Branch order is fixed: inside the target, then near the target, then near
//! any other icon, else nothing.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{contains, point_to_box_distance, BBox, Point};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TaxonomyError {
    #[error("invalid scene: distractor {icon_id:?} has the same box as the target")]
    InvalidScene { icon_id: String },
    #[error("threshold {value} must be finite and non-negative")]
    InvalidThreshold { value: f64 },
    #[error("thresholds must be strictly ascending")]
    NonAscendingThresholds,
    #[error("no records to summarize")]
    EmptyInput,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseCategory {
    Correct,
    Biased,
    Misleading,
    Confusion,
}

impl ResponseCategory {
    pub const ALL: [ResponseCategory; 4] = [
        ResponseCategory::Correct,
        ResponseCategory::Biased,
        ResponseCategory::Misleading,
        ResponseCategory::Confusion,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ResponseCategory::Correct => "correct",
            ResponseCategory::Biased => "biased",
            ResponseCategory::Misleading => "misleading",
            ResponseCategory::Confusion => "confusion",
        }
    }

    pub fn index(&self) -> usize {
        *self as usize
    }
}

impl fmt::Display for ResponseCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    tau: f64,
}

impl ClassifierConfig {
    pub const DEFAULT_TAU: f64 = 0.05;

    pub fn new(tau: f64) -> Result<Self, TaxonomyError> {
        if tau.is_finite() && tau >= 0.0 {
            Ok(Self { tau })
        } else {
            Err(TaxonomyError::InvalidThreshold { value: tau })
        }
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self { tau: Self::DEFAULT_TAU }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationResult {
    pub category: ResponseCategory,
    pub distance_to_target: f64,
    /// Nearest non-target icon. Recorded whenever the distractor scan runs,
    /// i.e. for `Misleading` and `Confusion`.
    pub nearest_distractor_id: Option<String>,
    pub nearest_distractor_distance: Option<f64>,
}

impl ClassificationResult {
    pub fn contained(&self) -> bool {
        self.category == ResponseCategory::Correct
    }
}

/// A distractor icon: its id and box.
pub type Distractor = (String, BBox);

/// Classify a predicted point against the target and the remaining icons.
///
/// `distractors` must not include the target itself; a distractor whose box
/// equals the target box is rejected as [`TaxonomyError::InvalidScene`].
pub fn classify(
    p: Point,
    target: BBox,
    distractors: &[Distractor],
    cfg: &ClassifierConfig,
) -> Result<ClassificationResult, TaxonomyError> {
    if let Some((id, _)) = distractors.iter().find(|(_, b)| *b == target) {
        return Err(TaxonomyError::InvalidScene { icon_id: id.clone() });
    }

    if contains(p, target) {
        return Ok(ClassificationResult {
            category: ResponseCategory::Correct,
            distance_to_target: 0.0,
            nearest_distractor_id: None,
            nearest_distractor_distance: None,
        });
    }

    let distance_to_target = point_to_box_distance(p, target);
    if distance_to_target < cfg.tau {
        return Ok(ClassificationResult {
            category: ResponseCategory::Biased,
            distance_to_target,
            nearest_distractor_id: None,
            nearest_distractor_distance: None,
        });
    }

    // Any hit under tau gives the same category; keep the closest for
    // diagnostics. Ties keep the earliest icon.
    let nearest = distractors
        .iter()
        .map(|(id, b)| (id, point_to_box_distance(p, *b)))
        .fold(None::<(&String, f64)>, |best, (id, d)| match best {
            Some((_, bd)) if bd <= d => best,
            _ => Some((id, d)),
        });

    let category = match nearest {
        Some((_, d)) if d < cfg.tau => ResponseCategory::Misleading,
        _ => ResponseCategory::Confusion,
    };
    Ok(ClassificationResult {
        category,
        distance_to_target,
        nearest_distractor_id: nearest.map(|(id, _)| id.clone()),
        nearest_distractor_distance: nearest.map(|(_, d)| d),
    })
}

/// Cumulative hit rates: the strict-containment rate followed by one entry per
/// threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdCurve {
    pub correct: f64,
    pub thresholds: Vec<f64>,
    pub within: Vec<f64>,
}

/// Fraction of records that are contained or lie closer than each threshold.
///
/// Records are `(contained, distance_to_target)` pairs.
pub fn threshold_curve(
    records: &[(bool, f64)],
    thresholds: &[f64],
) -> Result<ThresholdCurve, TaxonomyError> {
    if records.is_empty() {
        return Err(TaxonomyError::EmptyInput);
    }
    if let Some(&bad) = thresholds.iter().find(|t| !t.is_finite() || **t < 0.0) {
        return Err(TaxonomyError::InvalidThreshold { value: bad });
    }
    if thresholds.windows(2).any(|w| w[0] >= w[1]) {
        return Err(TaxonomyError::NonAscendingThresholds);
    }

    let n = records.len() as f64;
    let correct = records.iter().filter(|(c, _)| *c).count() as f64 / n;
    let within = thresholds
        .iter()
        .map(|&t| records.iter().filter(|(c, d)| *c || *d < t).count() as f64 / n)
        .collect();
    Ok(ThresholdCurve {
        correct,
        thresholds: thresholds.to_vec(),
        within,
    })
}
