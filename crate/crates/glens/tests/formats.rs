use glens::io::{normalize_floats, round_sig9, to_json_line};
use glens::records::PredictionRecord;
use glens_core::pss::DigitDistribution;
use glens_core::record::Pass;
use glens_core::Point;
use proptest::prelude::*;

proptest! {
    #[test]
    fn rounding_is_idempotent_and_close(v in -1e12f64..1e12) {
        let r = round_sig9(v);
        prop_assert_eq!(round_sig9(r), r);
        prop_assert!((r - v).abs() <= 5e-9 * v.abs().max(f64::MIN_POSITIVE));
    }

    #[test]
    fn normalized_json_reparses_to_itself(xs in prop::collection::vec(-1e6f64..1e6, 0..12)) {
        let v = normalize_floats(serde_json::json!({ "xs": xs }));
        let text = v.to_string();
        let back: serde_json::Value = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(normalize_floats(back), v);
    }

    #[test]
    fn prediction_lines_roundtrip(x in 0u32..=100, y in 0u32..=100, logits in prop::array::uniform10(-20.0f64..20.0)) {
        let (px, py) = (x as f64 / 100.0, y as f64 / 100.0);
        let rec = PredictionRecord {
            schema_version: 1,
            scene_id: "scene-00000".into(),
            model_id: "m".into(),
            instruction: "Click on the bell icon.".into(),
            pass: Pass::Full,
            raw_text: format!("[{px:.2}, {py:.2}]"),
            pred: Point::new(px, py).unwrap(),
            x_digit_logits: DigitDistribution::new(logits).unwrap(),
            y_digit_logits: DigitDistribution::uniform(),
            key_token_probs: None,
            crop_window: None,
            first_pass: None,
            refined_pred: None,
            timestamp: "1970-01-01T00:00:00Z".into(),
        };
        let line = to_json_line(&rec);
        prop_assert!(!line.contains('\n'));
        let back: PredictionRecord = serde_json::from_str(&line).unwrap();
        prop_assert_eq!(back.pred, rec.pred);
        prop_assert_eq!(back.raw_text, rec.raw_text);
        for (a, b) in back.x_digit_logits.values().iter().zip(rec.x_digit_logits.values()) {
            prop_assert_eq!(*a, round_sig9(*b));
        }
    }
}
