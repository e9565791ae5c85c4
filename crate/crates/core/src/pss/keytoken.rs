//! Locating the key digit tokens of a generated coordinate pair.
//!
//! For a response like `[0.71, 0.23]` the tenths digits `7` and `2` carry most
//! of the positional information; their digit distributions are what the
//! sharpness score consumes.

use alloc::string::{String, ToString};
use core::ops::Range;

use serde::{Deserialize, Serialize};

use super::{DigitDistribution, PssError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoordinateFormat {
    /// The whole (trimmed) text is `[x, y]`.
    #[default]
    Strict,
    /// First of `[x, y]`, `(x, y)` or bare `x, y` anywhere in the text.
    Lenient,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyTokenSpec {
    pub format: CoordinateFormat,
    /// Which fractional digit is the key token; 1 is the tenths digit.
    pub fraction_digit: usize,
}

impl Default for KeyTokenSpec {
    fn default() -> Self {
        Self { format: CoordinateFormat::Strict, fraction_digit: 1 }
    }
}

/// A parsed pair with the byte spans of both number literals in the source.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedCoordinates {
    pub x: f64,
    pub y: f64,
    pub x_span: Range<usize>,
    pub y_span: Range<usize>,
}

/// One generated token and, when captured, the scores over the ten digit
/// tokens at that step.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenStep {
    pub text: String,
    pub digits: Option<DigitDistribution>,
}

struct Cursor<'a> {
    s: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.s.get(self.pos) == Some(&c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    /// `digits ('.' digits)?`
    fn number(&mut self) -> Option<Range<usize>> {
        let start = self.pos;
        let int_digits = self.digits();
        if int_digits == 0 {
            self.pos = start;
            return None;
        }
        let before_dot = self.pos;
        if self.eat(b'.') && self.digits() == 0 {
            self.pos = before_dot;
        }
        Some(start..self.pos)
    }

    fn digits(&mut self) -> usize {
        let start = self.pos;
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        self.pos - start
    }
}

/// Try `open x , y close` starting exactly at `start`.
fn pair_at(text: &str, start: usize, open: Option<u8>, close: Option<u8>) -> Option<(Range<usize>, Range<usize>, usize)> {
    let mut c = Cursor { s: text.as_bytes(), pos: start };
    if let Some(o) = open {
        if !c.eat(o) {
            return None;
        }
        c.skip_ws();
    }
    let x = c.number()?;
    c.skip_ws();
    if !c.eat(b',') {
        return None;
    }
    c.skip_ws();
    let y = c.number()?;
    if let Some(cl) = close {
        c.skip_ws();
        if !c.eat(cl) {
            return None;
        }
    }
    Some((x, y, c.pos))
}

fn finish(text: &str, x: Range<usize>, y: Range<usize>) -> Result<ParsedCoordinates, PssError> {
    let parse = |r: &Range<usize>| text[r.clone()].parse::<f64>().map_err(|_| unparsable(text));
    Ok(ParsedCoordinates { x: parse(&x)?, y: parse(&y)?, x_span: x, y_span: y })
}

fn unparsable(text: &str) -> PssError {
    PssError::UnparsableOutput { text: text.to_string() }
}

pub fn parse_coordinates(text: &str, format: CoordinateFormat) -> Result<ParsedCoordinates, PssError> {
    match format {
        CoordinateFormat::Strict => {
            let lead = text.len() - text.trim_start().len();
            let end = text.trim_end().len();
            match pair_at(text, lead, Some(b'['), Some(b']')) {
                Some((x, y, stop)) if stop == end => finish(text, x, y),
                _ => Err(unparsable(text)),
            }
        }
        CoordinateFormat::Lenient => {
            let bytes = text.as_bytes();
            for (open, close) in [(b'[', b']'), (b'(', b')')] {
                for (i, _) in bytes.iter().enumerate().filter(|(_, &b)| b == open) {
                    if let Some((x, y, _)) = pair_at(text, i, Some(open), Some(close)) {
                        return finish(text, x, y);
                    }
                }
            }
            for i in 0..bytes.len() {
                let boundary = i == 0 || !(bytes[i - 1].is_ascii_digit() || bytes[i - 1] == b'.');
                if boundary && bytes[i].is_ascii_digit() {
                    if let Some((x, y, _)) = pair_at(text, i, None, None) {
                        return finish(text, x, y);
                    }
                }
            }
            Err(unparsable(text))
        }
    }
}

/// Byte offset of the `n`-th fractional digit of the literal at `span`.
fn key_offset(text: &str, span: &Range<usize>, n: usize) -> Option<usize> {
    let lit = &text[span.clone()];
    let dot = lit.find('.')?;
    let off = dot + n;
    (n >= 1 && off < lit.len()).then_some(span.start + off)
}

/// Digit distributions at the key-digit steps of x and y.
///
/// `steps` must concatenate to `raw_text`; the key digit has to start its own
/// token step and that step must carry digit scores.
pub fn extract_key_digits(
    raw_text: &str,
    steps: &[TokenStep],
    spec: &KeyTokenSpec,
) -> Result<(DigitDistribution, DigitDistribution), PssError> {
    let parsed = parse_coordinates(raw_text, spec.format)?;
    let lookup = |span: &Range<usize>, axis: &'static str| -> Result<DigitDistribution, PssError> {
        let target = key_offset(raw_text, span, spec.fraction_digit).ok_or(PssError::MissingKeyStep { axis })?;
        let mut offset = 0;
        for step in steps {
            if offset == target {
                return step.digits.ok_or(PssError::MissingKeyStep { axis });
            }
            offset += step.text.len();
            if offset > target {
                break;
            }
        }
        Err(PssError::MissingKeyStep { axis })
    };
    Ok((lookup(&parsed.x_span, "x")?, lookup(&parsed.y_span, "y")?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    fn steps_for(text: &str) -> Vec<TokenStep> {
        // one token per character; each digit step is one-hot at its own digit
        text.chars()
            .map(|ch| TokenStep {
                text: ch.to_string(),
                digits: ch.to_digit(10).map(|d| DigitDistribution::one_hot(d as usize)),
            })
            .collect()
    }

    #[test]
    fn strict_pair() {
        let p = parse_coordinates("[0.71, 0.23]", CoordinateFormat::Strict).unwrap();
        assert_eq!((p.x, p.y), (0.71, 0.23));
        assert_eq!(&"[0.71, 0.23]"[p.x_span], "0.71");
        assert!(parse_coordinates("  [0.1,0.9]\n", CoordinateFormat::Strict).is_ok());
    }

    #[test]
    fn parenthesized_needs_lenient() {
        assert!(matches!(
            parse_coordinates("(0.5, 0.5)", CoordinateFormat::Strict),
            Err(PssError::UnparsableOutput { .. })
        ));
        let p = parse_coordinates("(0.5, 0.5)", CoordinateFormat::Lenient).unwrap();
        assert_eq!((p.x, p.y), (0.5, 0.5));
        let p = parse_coordinates("The answer is 0.25, 0.75.", CoordinateFormat::Lenient).unwrap();
        assert_eq!((p.x, p.y), (0.25, 0.75));
    }

    #[test]
    fn single_coordinate_rejected() {
        for fmt in [CoordinateFormat::Strict, CoordinateFormat::Lenient] {
            assert!(parse_coordinates("[0.5]", fmt).is_err());
        }
        assert!(parse_coordinates("I cannot help", CoordinateFormat::Lenient).is_err());
        assert!(parse_coordinates("[0.1, 0.2] extra", CoordinateFormat::Strict).is_err());
    }

    #[test]
    fn key_digits_are_tenths() {
        let text = "[0.71, 0.23]";
        let (x, y) = extract_key_digits(text, &steps_for(text), &KeyTokenSpec::default()).unwrap();
        assert_eq!(x, DigitDistribution::one_hot(7));
        assert_eq!(y, DigitDistribution::one_hot(2));
    }

    #[test]
    fn multi_char_tokens_align_by_offset() {
        let text = "[0.71, 0.23]";
        let steps = ["[", "0", ".", "7", "1", ", ", "0", ".", "2", "3", "]"]
            .iter()
            .map(|t| TokenStep {
                text: t.to_string(),
                digits: t.parse::<usize>().ok().filter(|d| *d < 10).map(DigitDistribution::one_hot),
            })
            .collect::<Vec<_>>();
        let (x, y) = extract_key_digits(text, &steps, &KeyTokenSpec::default()).unwrap();
        assert_eq!(peak_of(&x), 7);
        assert_eq!(peak_of(&y), 2);
    }

    fn peak_of(d: &DigitDistribution) -> usize {
        super::super::peak(d).0
    }

    #[test]
    fn missing_key_step() {
        let text = "[0.71, 0.23]";
        let mut steps = steps_for(text);
        steps[9].digits = None; // the "2"
        assert_eq!(
            extract_key_digits(text, &steps, &KeyTokenSpec::default()),
            Err(PssError::MissingKeyStep { axis: "y" })
        );
        // integer literal has no tenths digit
        assert_eq!(
            extract_key_digits("[1, 0.5]", &steps_for("[1, 0.5]"), &KeyTokenSpec::default()),
            Err(PssError::MissingKeyStep { axis: "x" })
        );
        // truncated step list
        assert!(extract_key_digits(text, &steps_for("[0.7"), &KeyTokenSpec::default()).is_err());
    }
}
