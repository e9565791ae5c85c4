//! Confidence metrics over digit-token distributions.
//!
//! The Peak Sharpness Score looks at the ten scores a model assigns to the
//! digit tokens `0`..`9` at a coordinate's key position. Interior peaks are
//! scored from the length-weighted absolute slopes of the segments left and
//! right of the argmax; peaks at either end fall back to the mean slope over
//! the whole vector. Both branches scale by the peak value.

mod keytoken;

pub use keytoken::{
    extract_key_digits, parse_coordinates, CoordinateFormat, KeyTokenSpec, ParsedCoordinates,
    TokenStep,
};

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math;

pub const DIGITS: usize = 10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PssError {
    #[error("digit distribution must have exactly 10 finite entries (got {len} entries)")]
    MalformedDistribution { len: usize },
    #[error("could not find a coordinate pair in {text:?}")]
    UnparsableOutput { text: alloc::string::String },
    #[error("no digit scores for the {axis} key token")]
    MissingKeyStep { axis: &'static str },
    #[error("probability {value} outside (0, 1]")]
    InvalidProbability { value: f64 },
    #[error("perplexity needs at least one probability")]
    EmptyProbabilities,
    #[error("embedding {index} has zero norm")]
    DegenerateEmbedding { index: usize },
    #[error("embedding sequence needs at least {min} vectors, got {got}")]
    TooFewEmbeddings { min: usize, got: usize },
    #[error("embedding {index} has dimension {got}, expected {expected}")]
    EmbeddingDimension { index: usize, expected: usize, got: usize },
    #[error("normalization constant must be positive and finite, got {value}")]
    InvalidConstant { value: f64 },
}

/// Scores over the ten digit tokens, indexed by digit value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct DigitDistribution([f64; DIGITS]);

impl DigitDistribution {
    pub fn new(values: [f64; DIGITS]) -> Result<Self, PssError> {
        if values.iter().all(|v| v.is_finite()) {
            Ok(Self(values))
        } else {
            Err(PssError::MalformedDistribution { len: DIGITS })
        }
    }

    pub fn from_slice(values: &[f64]) -> Result<Self, PssError> {
        let arr: [f64; DIGITS] = values
            .try_into()
            .map_err(|_| PssError::MalformedDistribution { len: values.len() })?;
        Self::new(arr)
    }

    /// All mass on `digit`.
    pub fn one_hot(digit: usize) -> Self {
        let mut v = [0.0; DIGITS];
        v[digit] = 1.0;
        Self(v)
    }

    pub fn uniform() -> Self {
        Self([0.1; DIGITS])
    }

    pub fn values(&self) -> &[f64; DIGITS] {
        &self.0
    }

    /// Exponential normalization over the ten entries.
    pub fn softmax(&self) -> Self {
        let max = self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut out = [0.0; DIGITS];
        let mut total = 0.0;
        for (o, &v) in out.iter_mut().zip(&self.0) {
            *o = math::exp(v - max);
            total += *o;
        }
        for o in &mut out {
            *o /= total;
        }
        Self(out)
    }

    /// Non-negative entries summing to one within `1e-9`.
    pub fn is_probability(&self) -> bool {
        let sum: f64 = self.0.iter().sum();
        self.0.iter().all(|&v| v >= 0.0) && math::abs(sum - 1.0) <= 1e-9
    }

    /// Reverse digit order, `v'[i] = v[9 - i]`.
    pub fn reversed(&self) -> Self {
        let mut v = self.0;
        v.reverse();
        Self(v)
    }
}

impl TryFrom<Vec<f64>> for DigitDistribution {
    type Error = PssError;

    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        Self::from_slice(&v)
    }
}

impl From<DigitDistribution> for Vec<f64> {
    fn from(d: DigitDistribution) -> Self {
        d.0.to_vec()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PssConfig {
    c: f64,
    normalize_input: bool,
}

impl PssConfig {
    pub const DEFAULT_C: f64 = 4.5;

    pub fn new(c: f64, normalize_input: bool) -> Result<Self, PssError> {
        if c.is_finite() && c > 0.0 {
            Ok(Self { c, normalize_input })
        } else {
            Err(PssError::InvalidConstant { value: c })
        }
    }

    /// Score the values as given, without exponential normalization.
    pub fn raw() -> Self {
        Self { c: Self::DEFAULT_C, normalize_input: false }
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn normalize_input(&self) -> bool {
        self.normalize_input
    }
}

impl Default for PssConfig {
    fn default() -> Self {
        Self { c: Self::DEFAULT_C, normalize_input: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PeakBranch {
    Edge,
    Interior,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PssResult {
    pub score: f64,
    pub peak_index: usize,
    pub peak_value: f64,
    pub branch: PeakBranch,
    /// `|s|` on the edge branch, `w` on the interior branch. Unlike the score,
    /// this factor does not move when a constant is added to every entry.
    pub slope: f64,
}

/// Argmax with ties broken toward the lowest index.
pub fn peak(v: &DigitDistribution) -> (usize, f64) {
    let mut best = (0, v.0[0]);
    for (i, &x) in v.0.iter().enumerate().skip(1) {
        if x > best.1 {
            best = (i, x);
        }
    }
    best
}

/// Peak Sharpness Score of one digit distribution.
pub fn pss(v: &DigitDistribution, cfg: &PssConfig) -> PssResult {
    let v = if cfg.normalize_input { v.softmax() } else { *v };
    let (p, m) = peak(&v);
    let vals = &v.0;
    let last = DIGITS - 1;

    if p == 0 || p == last {
        // mean of consecutive differences telescopes to the end-to-end slope
        let s = (vals[last] - vals[0]) / last as f64;
        let slope = math::abs(s);
        PssResult {
            score: 2.0 * slope * m,
            peak_index: p,
            peak_value: m,
            branch: PeakBranch::Edge,
            slope,
        }
    } else {
        let left_len = p as f64;
        let right_len = (last - p) as f64;
        let a_left = (vals[p] - vals[0]) / left_len;
        let a_right = (vals[last] - vals[p]) / right_len;
        let w = (left_len * math::abs(a_left) + right_len * math::abs(a_right)) / last as f64;
        PssResult {
            score: cfg.c * w * m,
            peak_index: p,
            peak_value: m,
            branch: PeakBranch::Interior,
            slope: w,
        }
    }
}

/// Response-level score: mean of the x and y key-token scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecordPss {
    pub score: f64,
    pub x: PssResult,
    pub y: PssResult,
}

pub fn record_pss(x: &DigitDistribution, y: &DigitDistribution, cfg: &PssConfig) -> RecordPss {
    let x = pss(x, cfg);
    let y = pss(y, cfg);
    RecordPss { score: 0.5 * (x.score + y.score), x, y }
}

/// `exp(-mean(ln p))` over key-token probabilities.
pub fn perplexity(probs: &[f64]) -> Result<f64, PssError> {
    if probs.is_empty() {
        return Err(PssError::EmptyProbabilities);
    }
    let mut sum_ln = 0.0;
    for &p in probs {
        if !(p > 0.0 && p <= 1.0) {
            return Err(PssError::InvalidProbability { value: p });
        }
        sum_ln += math::ln(p);
    }
    Ok(math::exp(-sum_ln / probs.len() as f64))
}

/// Token embeddings in generation order.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSequence {
    vectors: Vec<Vec<f64>>,
}

impl EmbeddingSequence {
    pub fn new(vectors: Vec<Vec<f64>>) -> Result<Self, PssError> {
        let dim = vectors.first().map(Vec::len).unwrap_or(0);
        for (index, v) in vectors.iter().enumerate() {
            if v.len() != dim || dim == 0 {
                return Err(PssError::EmbeddingDimension { index, expected: dim.max(1), got: v.len() });
            }
            if norm(v) == 0.0 {
                return Err(PssError::DegenerateEmbedding { index });
            }
        }
        Ok(Self { vectors })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuityReport {
    /// `cos(v_i, v_{i+1})` for each adjacent pair.
    pub adjacent_cosines: Vec<f64>,
    /// `|(v_{i+1} - v_i) - (v_i - v_{i-1})|` for each interior index.
    pub second_difference_norms: Vec<f64>,
}

fn norm(v: &[f64]) -> f64 {
    math::sqrt(v.iter().map(|x| x * x).sum())
}

pub fn semantic_continuity(seq: &EmbeddingSequence) -> Result<ContinuityReport, PssError> {
    let vs = &seq.vectors;
    if vs.len() < 3 {
        return Err(PssError::TooFewEmbeddings { min: 3, got: vs.len() });
    }
    let adjacent_cosines = vs
        .windows(2)
        .map(|w| {
            let dot: f64 = w[0].iter().zip(&w[1]).map(|(a, b)| a * b).sum();
            dot / (norm(&w[0]) * norm(&w[1]))
        })
        .collect();
    let second_difference_norms = vs
        .windows(3)
        .map(|w| {
            let sq: f64 = (0..w[0].len())
                .map(|k| {
                    let d = (w[2][k] - w[1][k]) - (w[1][k] - w[0][k]);
                    d * d
                })
                .sum();
            math::sqrt(sq)
        })
        .collect();
    Ok(ContinuityReport { adjacent_cosines, second_difference_norms })
}
