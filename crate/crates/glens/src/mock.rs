//! Deterministic stand-in for a grounding model.
//!
//! Reads tasks and scene manifests and writes prediction records with the same
//! shape a real adapter produces, so the pipeline can run without model
//! weights. Digit logits are a bump centred on the tenths digit of the
//! emitted coordinate; how sharp the bump is depends on the kind of answer.

use std::fmt;
use std::str::FromStr;

use glens_core::pss::DigitDistribution;
use glens_core::record::Pass;
use glens_core::scenegen::rng::SceneRng;
use glens_core::scenegen::SceneManifest;
use glens_core::Point;

use crate::records::{PredictionRecord, TaskRecord, PREDICTION_SCHEMA_VERSION};

pub const MOCK_TIMESTAMP: &str = "1970-01-01T00:00:00Z";

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MockMode {
    /// Always `(0.5, 0.5)`.
    Center,
    /// Centre of the target box.
    Oracle,
    /// Just outside the target: right edge plus `d`, or left edge minus `d`
    /// when that would leave the image.
    Offset(f64),
    /// Centre of the distractor nearest to the target.
    Distractor,
    /// Per-task seeded choice between oracle, near-miss, distractor and
    /// random answers.
    Mixed,
}

impl FromStr for MockMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "center" => Ok(MockMode::Center),
            "oracle" => Ok(MockMode::Oracle),
            "distractor" => Ok(MockMode::Distractor),
            "mixed" => Ok(MockMode::Mixed),
            _ => {
                let d = s
                    .strip_prefix("offset:")
                    .ok_or_else(|| format!("unknown mock mode {s:?} (center, oracle, offset:D, distractor, mixed)"))?;
                let d: f64 = d.trim_start_matches('+').parse().map_err(|_| format!("bad offset in {s:?}"))?;
                if !(d.is_finite() && (0.0..1.0).contains(&d)) {
                    return Err(format!("offset must be in [0, 1): {s:?}"));
                }
                Ok(MockMode::Offset(d))
            }
        }
    }
}

impl fmt::Display for MockMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MockMode::Center => f.write_str("center"),
            MockMode::Oracle => f.write_str("oracle"),
            MockMode::Offset(d) => write!(f, "offset:{d}"),
            MockMode::Distractor => f.write_str("distractor"),
            MockMode::Mixed => f.write_str("mixed"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MockConfig {
    pub mode: MockMode,
    pub model_id: String,
    pub seed: u64,
    /// Emit one-hot logits instead of a noisy bump.
    pub one_hot: bool,
}

/// How confident the answer is meant to look.
#[derive(Debug, Clone, Copy)]
enum Answer {
    Sure,
    NearMiss,
    Wrong,
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

fn offset_point(m: &SceneManifest, d: f64) -> Point {
    let b = m.target().expect("checked manifest").bbox;
    let c = b.center();
    let x = if b.x2() + d <= 1.0 { b.x2() + d } else { b.x1() - d };
    Point::clamped(x, c.y())
}

fn nearest_distractor(m: &SceneManifest) -> Option<Point> {
    let t = m.target()?.bbox.center();
    let d2 = |p: Point| (p.x() - t.x()).powi(2) + (p.y() - t.y()).powi(2);
    m.distractors()
        .into_iter()
        .map(|(_, b)| b.center())
        .min_by(|a, b| d2(*a).total_cmp(&d2(*b)))
}

fn answer(mode: MockMode, m: &SceneManifest, rng: &mut SceneRng) -> (Point, Answer) {
    let target = m.target().expect("checked manifest").bbox.center();
    match mode {
        MockMode::Center => (Point::clamped(0.5, 0.5), Answer::Wrong),
        MockMode::Oracle => (target, Answer::Sure),
        MockMode::Offset(d) => (offset_point(m, d), Answer::NearMiss),
        MockMode::Distractor => (nearest_distractor(m).unwrap_or(target), Answer::Wrong),
        MockMode::Mixed => match rng.below(10) {
            0..=5 => (target, Answer::Sure),
            6 => (offset_point(m, rng.range(0.005, 0.04)), Answer::NearMiss),
            7 | 8 => (nearest_distractor(m).unwrap_or(target), Answer::Wrong),
            _ => (Point::clamped(rng.unit(), rng.unit()), Answer::Wrong),
        },
    }
}

/// Tenths digit of a value printed with two decimals.
fn tenths_digit(text: &str) -> usize {
    let frac = text.split('.').nth(1).unwrap_or("0");
    frac.bytes().next().map_or(0, |b| (b - b'0') as usize)
}

fn bump(digit: usize, kind: Answer, one_hot: bool, rng: &mut SceneRng) -> DigitDistribution {
    if one_hot {
        return DigitDistribution::one_hot(digit);
    }
    let (lo, hi) = match kind {
        Answer::Sure => (6.0, 10.0),
        Answer::NearMiss => (4.0, 8.0),
        Answer::Wrong => (1.5, 5.0),
    };
    let amp = rng.range(lo, hi);
    let width = rng.range(0.6, 1.6);
    let mut v = [0.0; 10];
    for (i, slot) in v.iter_mut().enumerate() {
        let z = (i as f64 - digit as f64) / width;
        *slot = amp * (-0.5 * z * z).exp() + rng.range(0.0, 0.5);
    }
    // the emitted digit must stay the greedy choice
    v[digit] += 0.5;
    DigitDistribution::new(v).expect("finite logits")
}

fn softmax_at(v: &DigitDistribution, digit: usize) -> f64 {
    v.softmax().values()[digit]
}

/// One prediction for `task` against its scene.
pub fn predict(task: &TaskRecord, manifest: &SceneManifest, cfg: &MockConfig) -> PredictionRecord {
    let mut rng = SceneRng::new(cfg.seed ^ fnv1a(task.scene_id.as_bytes()) ^ fnv1a(cfg.model_id.as_bytes()).rotate_left(17));
    let (full, kind) = answer(cfg.mode, manifest, &mut rng);
    let (pass, shown) = match &task.crop_window {
        Some(w) => (Pass::Crop, w.to_crop(full)),
        None => (Pass::Full, full),
    };
    let (xs, ys) = (format!("{:.2}", shown.x()), format!("{:.2}", shown.y()));
    let raw_text = format!("[{xs}, {ys}]");
    let pred = Point::new(xs.parse().expect("formatted"), ys.parse().expect("formatted")).expect("in unit range");
    let (dx, dy) = (tenths_digit(&xs), tenths_digit(&ys));
    let x_digit_logits = bump(dx, kind, cfg.one_hot, &mut rng);
    let y_digit_logits = bump(dy, kind, cfg.one_hot, &mut rng);
    let key_token_probs = Some(vec![softmax_at(&x_digit_logits, dx), softmax_at(&y_digit_logits, dy)]);
    PredictionRecord {
        schema_version: PREDICTION_SCHEMA_VERSION,
        scene_id: task.scene_id.clone(),
        model_id: cfg.model_id.clone(),
        instruction: task.instruction.clone(),
        pass,
        raw_text,
        pred,
        x_digit_logits,
        y_digit_logits,
        key_token_probs: if cfg.one_hot { None } else { key_token_probs },
        crop_window: task.crop_window,
        first_pass: None,
        refined_pred: None,
        timestamp: MOCK_TIMESTAMP.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use glens_core::pss::CoordinateFormat;
    use glens_core::scenegen::{layout_scene, synth::builtin_library, SceneConstraints, SceneSpec};
    use glens_core::{classify, ClassifierConfig, PixelDims, ResponseCategory};

    fn scene(seed: u64) -> (TaskRecord, SceneManifest) {
        let spec = SceneSpec {
            scene_id: format!("scene-{seed}"),
            split: "synthetic".into(),
            background_ref: "bg".into(),
            icon_count: 6,
            seed,
            constraints: SceneConstraints::default(),
            template: Default::default(),
        };
        let m = layout_scene(&spec, PixelDims::new(1280, 720).unwrap(), &builtin_library()).unwrap();
        let t = TaskRecord {
            scene_id: m.scene_id.clone(),
            split: m.split.clone(),
            image: "x.png".into(),
            instruction: m.instruction.clone(),
            crop_window: None,
        };
        (t, m)
    }

    fn cfg(mode: MockMode) -> MockConfig {
        MockConfig { mode, model_id: "mock".into(), seed: 1, one_hot: false }
    }

    #[test]
    fn parses_modes() {
        assert_eq!("offset:+0.02".parse::<MockMode>().unwrap(), MockMode::Offset(0.02));
        assert_eq!("offset:0.1".parse::<MockMode>().unwrap(), MockMode::Offset(0.1));
        assert!("offset:x".parse::<MockMode>().is_err());
        assert!("bogus".parse::<MockMode>().is_err());
    }

    #[test]
    fn center_mode_contract() {
        let (t, m) = scene(3);
        let r = predict(&t, &m, &MockConfig { one_hot: true, ..cfg(MockMode::Center) });
        assert_eq!(r.raw_text, "[0.50, 0.50]");
        assert_eq!(r.x_digit_logits, DigitDistribution::one_hot(5));
        assert_eq!(r.y_digit_logits, DigitDistribution::one_hot(5));
    }

    #[test]
    fn records_are_self_consistent_and_deterministic() {
        for mode in [MockMode::Oracle, MockMode::Offset(0.02), MockMode::Distractor, MockMode::Mixed] {
            for seed in 0..20 {
                let (t, m) = scene(seed);
                let r = predict(&t, &m, &cfg(mode));
                assert!(r.consistency_errors(CoordinateFormat::Strict).is_empty(), "{mode} {seed}");
                assert_eq!(r, predict(&t, &m, &cfg(mode)));
                let peak_x = glens_core::pss::peak(&r.x_digit_logits).0;
                assert_eq!(peak_x, tenths_digit(&r.raw_text[1..5]));
            }
        }
    }

    #[test]
    fn oracle_is_correct_and_offset_is_not() {
        let c = ClassifierConfig::default();
        for seed in 0..20 {
            let (t, m) = scene(seed);
            let target = m.target().unwrap().bbox;
            let o = predict(&t, &m, &cfg(MockMode::Oracle));
            assert_eq!(classify(o.pred, target, &m.distractors(), &c).unwrap().category, ResponseCategory::Correct);
            let f = predict(&t, &m, &cfg(MockMode::Offset(0.02)));
            assert_ne!(classify(f.pred, target, &m.distractors(), &c).unwrap().category, ResponseCategory::Correct);
        }
    }
}
