//! Structural validation of the documented JSON formats.
//!
//! Problems are reported with JSON-pointer paths (`/crop_window/width`) so a
//! bad field can be located without rereading the record. Unknown fields are
//! rejected.

use serde_json::Value;

#[derive(Debug, Clone, Copy)]
pub enum Kind {
    Str,
    UInt,
    Num,
    /// Two numbers in `[0, 1]`.
    Point,
    /// Normalized box `[x1, y1, x2, y2]`.
    Box4,
    /// Exactly ten finite numbers.
    Digits,
    NumArray,
    Enum(&'static [&'static str]),
    Object(&'static [Field]),
    ArrayOf(&'static Kind),
}

#[derive(Debug, Clone, Copy)]
pub struct Field {
    pub name: &'static str,
    pub kind: Kind,
    pub required: bool,
}

const fn req(name: &'static str, kind: Kind) -> Field {
    Field { name, kind, required: true }
}

const fn opt(name: &'static str, kind: Kind) -> Field {
    Field { name, kind, required: false }
}

const PASS: Kind = Kind::Enum(&["full", "crop"]);
const CATEGORY: Kind = Kind::Enum(&["correct", "biased", "misleading", "confusion"]);

pub const CROP_WINDOW: &[Field] = &[
    req("x_start", Kind::UInt),
    req("y_start", Kind::UInt),
    req("width", Kind::UInt),
    req("height", Kind::UInt),
    req("parent_w", Kind::UInt),
    req("parent_h", Kind::UInt),
];

const FIRST_PASS: &[Field] = &[req("pred", Kind::Point), req("raw_text", Kind::Str)];

pub const PREDICTION: &[Field] = &[
    req("schema_version", Kind::UInt),
    req("scene_id", Kind::Str),
    req("model_id", Kind::Str),
    req("instruction", Kind::Str),
    req("pass", PASS),
    req("raw_text", Kind::Str),
    req("pred", Kind::Point),
    req("x_digit_logits", Kind::Digits),
    req("y_digit_logits", Kind::Digits),
    opt("key_token_probs", Kind::NumArray),
    opt("crop_window", Kind::Object(CROP_WINDOW)),
    opt("first_pass", Kind::Object(FIRST_PASS)),
    opt("refined_pred", Kind::Point),
    req("timestamp", Kind::Str),
];

pub const PREDICTION_FAILURE: &[Field] = &[
    req("schema_version", Kind::UInt),
    req("scene_id", Kind::Str),
    req("model_id", Kind::Str),
    req("instruction", Kind::Str),
    req("pass", PASS),
    req("error", Kind::Str),
    req("timestamp", Kind::Str),
];

pub const TASK: &[Field] = &[
    req("scene_id", Kind::Str),
    req("split", Kind::Str),
    req("image", Kind::Str),
    req("instruction", Kind::Str),
    opt("crop_window", Kind::Object(CROP_WINDOW)),
];

const PSS_SUMMARY: &[Field] = &[req("score", Kind::Num), req("x", Kind::Num), req("y", Kind::Num)];

pub const EVAL: &[Field] = &[
    req("schema_version", Kind::UInt),
    req("scene_id", Kind::Str),
    req("model_id", Kind::Str),
    req("split", Kind::Str),
    req("pass", PASS),
    req("pred", Kind::Point),
    req("category", CATEGORY),
    req("distance_to_target", Kind::Num),
    opt("nearest_distractor_id", Kind::Str),
    opt("nearest_distractor_distance", Kind::Num),
    opt("pss", Kind::Object(PSS_SUMMARY)),
    opt("perplexity", Kind::Num),
];

const DIMS: &[Field] = &[req("width", Kind::UInt), req("height", Kind::UInt)];
const PLACEMENT: &[Field] = &[req("icon_id", Kind::Str), req("bbox", Kind::Box4)];

pub const MANIFEST: &[Field] = &[
    req("schema_version", Kind::UInt),
    req("scene_id", Kind::Str),
    req("split", Kind::Str),
    req("background", Kind::Str),
    req("dims", Kind::Object(DIMS)),
    req("placements", Kind::ArrayOf(&Kind::Object(PLACEMENT))),
    req("target_icon_id", Kind::Str),
    req("instruction", Kind::Str),
    req("seed", Kind::UInt),
];

/// One structural problem.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Issue {
    pub pointer: String,
    pub message: String,
}

impl std::fmt::Display for Issue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let ptr = if self.pointer.is_empty() { "/" } else { &self.pointer };
        write!(f, "{ptr}: {}", self.message)
    }
}

fn escape(token: &str) -> String {
    token.replace('~', "~0").replace('/', "~1")
}

fn unit(v: &Value) -> bool {
    v.as_f64().is_some_and(|x| (0.0..=1.0).contains(&x))
}

fn check(v: &Value, kind: &Kind, path: &str, out: &mut Vec<Issue>) {
    let mut bad = |message: String| out.push(Issue { pointer: path.to_string(), message });
    match kind {
        Kind::Str => {
            if !v.is_string() {
                bad("expected a string".into());
            }
        }
        Kind::UInt => {
            if !v.is_u64() {
                bad("expected a non-negative integer".into());
            }
        }
        Kind::Num => {
            if !v.is_number() {
                bad("expected a number".into());
            }
        }
        Kind::Point => match v.as_array() {
            Some(a) if a.len() == 2 && a.iter().all(unit) => {}
            _ => bad("expected [x, y] with both values in [0, 1]".into()),
        },
        Kind::Box4 => match v.as_array() {
            Some(a) if a.len() == 4 && a.iter().all(unit) => {
                let f: Vec<f64> = a.iter().filter_map(Value::as_f64).collect();
                if !(f[0] < f[2] && f[1] < f[3]) {
                    bad("expected x1 < x2 and y1 < y2".into());
                }
            }
            _ => bad("expected [x1, y1, x2, y2] with values in [0, 1]".into()),
        },
        Kind::Digits => match v.as_array() {
            Some(a) if a.len() == 10 && a.iter().all(Value::is_number) => {}
            Some(a) if a.len() != 10 => bad(format!("expected exactly 10 numbers, got {}", a.len())),
            _ => bad("expected an array of 10 numbers".into()),
        },
        Kind::NumArray => match v.as_array() {
            Some(a) => {
                for (i, x) in a.iter().enumerate() {
                    if !x.is_number() {
                        out.push(Issue { pointer: format!("{path}/{i}"), message: "expected a number".into() });
                    }
                }
            }
            None => bad("expected an array of numbers".into()),
        },
        Kind::Enum(options) => match v.as_str() {
            Some(s) if options.contains(&s) => {}
            _ => bad(format!("expected one of {options:?}")),
        },
        Kind::Object(fields) => check_object(v, fields, path, out),
        Kind::ArrayOf(inner) => match v.as_array() {
            Some(a) => {
                for (i, x) in a.iter().enumerate() {
                    check(x, inner, &format!("{path}/{i}"), out);
                }
            }
            None => bad("expected an array".into()),
        },
    }
}

fn check_object(v: &Value, fields: &[Field], path: &str, out: &mut Vec<Issue>) {
    let Some(obj) = v.as_object() else {
        out.push(Issue { pointer: path.to_string(), message: "expected an object".into() });
        return;
    };
    for f in fields {
        let ptr = format!("{path}/{}", escape(f.name));
        match obj.get(f.name) {
            None if f.required => out.push(Issue { pointer: ptr, message: "missing required field".into() }),
            None => {}
            Some(Value::Null) if !f.required => {}
            Some(x) => check(x, &f.kind, &ptr, out),
        }
    }
    for key in obj.keys() {
        if !fields.iter().any(|f| f.name == key) {
            out.push(Issue { pointer: format!("{path}/{}", escape(key)), message: "unknown field".into() });
        }
    }
}

/// Structural issues of `v` against `schema`, in field order.
pub fn validate(v: &Value, schema: &[Field]) -> Vec<Issue> {
    let mut out = Vec::new();
    check_object(v, schema, "", &mut out);
    out
}

/// Prediction lines come in two shapes; a failure record carries `error`.
pub fn prediction_schema_for(v: &Value) -> &'static [Field] {
    if v.get("error").is_some() {
        PREDICTION_FAILURE
    } else {
        PREDICTION
    }
}
