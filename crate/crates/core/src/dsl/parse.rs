use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceItem {
    pub gesture_name: String,
    pub number_s: f64,
}

impl SequenceItem {
    pub fn new(gesture_name: impl Into<String>, number_s: f64) -> Self {
        Self {
            gesture_name: gesture_name.into(),
            number_s,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionSequence {
    pub items: Vec<SequenceItem>,
    pub source_text: String,
}

impl ActionSequence {
    pub fn from_items(items: Vec<SequenceItem>) -> Self {
        let source_text = format_items(&items);
        Self { items, source_text }
    }
}

impl fmt::Display for ActionSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_items(&self.items))
    }
}

/// Parse failures. Offsets are byte offsets into the input.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("empty input")]
    EmptyInput,
    #[error("unbalanced bracket at offset {0}")]
    UnbalancedBracket(usize),
    #[error("missing number at offset {0}")]
    MissingNumber(usize),
    #[error("malformed number at offset {0}")]
    BadNumber(usize),
    #[error("malformed gesture name at offset {0}")]
    BadName(usize),
    #[error("unexpected text at offset {0}")]
    TrailingGarbage(usize),
}

impl ParseError {
    pub fn code(&self) -> &'static str {
        match self {
            ParseError::EmptyInput => "EmptyInput",
            ParseError::UnbalancedBracket(_) => "UnbalancedBracket",
            ParseError::MissingNumber(_) => "MissingNumber",
            ParseError::BadNumber(_) => "BadNumber",
            ParseError::BadName(_) => "BadName",
            ParseError::TrailingGarbage(_) => "TrailingGarbage",
        }
    }

    pub fn offset(&self) -> Option<usize> {
        match *self {
            ParseError::EmptyInput => None,
            ParseError::UnbalancedBracket(o)
            | ParseError::MissingNumber(o)
            | ParseError::BadNumber(o)
            | ParseError::BadName(o)
            | ParseError::TrailingGarbage(o) => Some(o),
        }
    }
}

struct Cursor<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<u8> {
        self.text.as_bytes().get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.text[self.pos..].chars().next() {
            if !c.is_whitespace() {
                break;
            }
            self.pos += c.len_utf8();
        }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.text.len()
    }

    /// With the cursor on `[`, returns the bracket body and its offset and
    /// moves past the closing `]`. A `[` or end of input before `]` leaves
    /// the opening bracket unbalanced.
    fn bracket(&mut self) -> Result<(&'a str, usize), ParseError> {
        let open = self.pos;
        let body_start = open + 1;
        let rest = &self.text[body_start..];
        match rest.find(['[', ']']) {
            Some(i) if rest.as_bytes()[i] == b']' => {
                self.pos = body_start + i + 1;
                Ok((&rest[..i], body_start))
            }
            _ => Err(ParseError::UnbalancedBracket(open)),
        }
    }
}

/// Parses `[Name][number][Name][number]...`.
///
/// Names start with an ASCII letter and continue with letters, digits,
/// underscores or spaces; surrounding spaces are trimmed. Numbers are
/// non-negative decimals (`12`, `0.5`). Whitespace between bracket groups
/// is ignored.
pub fn parse_sequence(text: &str) -> Result<ActionSequence, ParseError> {
    let mut cur = Cursor { text, pos: 0 };
    cur.skip_ws();
    if cur.at_end() {
        return Err(ParseError::EmptyInput);
    }
    let mut items = Vec::new();
    while !cur.at_end() {
        if cur.peek() != Some(b'[') {
            return Err(ParseError::TrailingGarbage(cur.pos));
        }
        let (raw_name, name_at) = cur.bracket()?;
        let name = parse_name(raw_name, name_at)?;

        cur.skip_ws();
        if cur.peek() != Some(b'[') {
            return Err(ParseError::MissingNumber(cur.pos));
        }
        let (raw_num, num_at) = cur.bracket()?;
        let number_s = parse_number(raw_num, num_at)?;
        items.push(SequenceItem::new(name, number_s));
        cur.skip_ws();
    }
    Ok(ActionSequence {
        items,
        source_text: text.to_string(),
    })
}

fn leading_ws(s: &str) -> usize {
    s.len() - s.trim_start().len()
}

fn parse_name(raw: &str, at: usize) -> Result<String, ParseError> {
    let name = raw.trim();
    let start = at + leading_ws(raw);
    let mut bytes = name.bytes();
    match bytes.next() {
        Some(b) if b.is_ascii_alphabetic() => {}
        _ => return Err(ParseError::BadName(start)),
    }
    if let Some(i) = name
        .bytes()
        .position(|b| !(b.is_ascii_alphanumeric() || b == b'_' || b == b' '))
    {
        return Err(ParseError::BadName(start + i));
    }
    Ok(name.to_string())
}

fn parse_number(raw: &str, at: usize) -> Result<f64, ParseError> {
    let num = raw.trim();
    let start = at + leading_ws(raw);
    if num.is_empty() {
        return Err(ParseError::MissingNumber(start));
    }
    let (int, frac) = match num.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (num, None),
    };
    let digits = |s: &str| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit());
    if !digits(int) || frac.is_some_and(|f| !digits(f)) {
        return Err(ParseError::BadNumber(start));
    }
    match num.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(ParseError::BadNumber(start)),
    }
}

fn format_items(items: &[SequenceItem]) -> String {
    items
        .iter()
        .map(|i| format!("[{}][{}]", i.gesture_name.trim(), format_number(i.number_s)))
        .collect()
}

/// Shortest decimal that reads back to the same value, never in exponent
/// form and without trailing zeros.
pub fn format_number(v: f64) -> String {
    // Display for f64 is shortest round-trip and never uses an exponent.
    format!("{v}")
}

/// Canonical text: `[Name][n]` per item, no whitespace.
pub fn format_sequence(seq: &ActionSequence) -> String {
    format_items(&seq.items)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn items(text: &str) -> Vec<(String, f64)> {
        parse_sequence(text)
            .unwrap()
            .items
            .into_iter()
            .map(|i| (i.gesture_name, i.number_s))
            .collect()
    }

    fn pairs(p: &[(&str, f64)]) -> Vec<(String, f64)> {
        p.iter().map(|(n, v)| (n.to_string(), *v)).collect()
    }

    #[test]
    fn reference_sequences() {
        assert_eq!(items("[Waving][1][Joy][1]"), pairs(&[("Waving", 1.0), ("Joy", 1.0)]));
        assert_eq!(items("[Sadness][1][Hug][3]"), pairs(&[("Sadness", 1.0), ("Hug", 3.0)]));
        assert_eq!(
            items("[Waving][2][Happy][2]"),
            pairs(&[("Waving", 2.0), ("Happy", 2.0)])
        );
    }

    #[test]
    fn whitespace_between_items_and_inside_brackets() {
        assert_eq!(
            items("  [ Big Wave ] [ 0.25 ]\n\t[Joy][10]  "),
            pairs(&[("Big Wave", 0.25), ("Joy", 10.0)])
        );
    }

    #[test]
    fn error_cases() {
        assert_eq!(parse_sequence(""), Err(ParseError::EmptyInput));
        assert_eq!(parse_sequence("   \n"), Err(ParseError::EmptyInput));
        assert_eq!(parse_sequence("[Joy][]"), Err(ParseError::MissingNumber(6)));
        assert_eq!(parse_sequence("[Joy]"), Err(ParseError::MissingNumber(5)));
        assert_eq!(parse_sequence("[Joy]x[1]"), Err(ParseError::MissingNumber(5)));
        assert_eq!(parse_sequence("[Joy][1"), Err(ParseError::UnbalancedBracket(5)));
        assert_eq!(parse_sequence("[Joy[1]"), Err(ParseError::UnbalancedBracket(0)));
        assert_eq!(parse_sequence("[Joy][1.]"), Err(ParseError::BadNumber(6)));
        assert_eq!(parse_sequence("[Joy][-1]"), Err(ParseError::BadNumber(6)));
        assert_eq!(parse_sequence("[Joy][1e3]"), Err(ParseError::BadNumber(6)));
        assert_eq!(parse_sequence("[Joy][ .5]"), Err(ParseError::BadNumber(7)));
        assert_eq!(parse_sequence("[1Joy][1]"), Err(ParseError::BadName(1)));
        assert_eq!(parse_sequence("[Jo-y][1]"), Err(ParseError::BadName(3)));
        assert_eq!(parse_sequence("[][1]"), Err(ParseError::BadName(1)));
        assert_eq!(parse_sequence("Sure! [Joy][1]"), Err(ParseError::TrailingGarbage(0)));
        assert_eq!(parse_sequence("[Joy][1] ok"), Err(ParseError::TrailingGarbage(9)));
    }

    #[test]
    fn huge_number_is_bad() {
        let text = format!("[Joy][{}]", "9".repeat(400));
        assert_eq!(parse_sequence(&text), Err(ParseError::BadNumber(6)));
    }

    #[test]
    fn formatting() {
        let s = ActionSequence::from_items(vec![SequenceItem::new("Confusion", 1.0)]);
        assert_eq!(format_sequence(&s), "[Confusion][1]");
        let s = ActionSequence::from_items(vec![SequenceItem::new("Joy", 1.5)]);
        assert_eq!(format_sequence(&s), "[Joy][1.5]");
        assert_eq!(format_number(0.1), "0.1");
        assert_eq!(format_number(1e-7), "0.0000001");
        assert_eq!(format_number(1e21), "1000000000000000000000");
    }

    #[test]
    fn canonicalization_is_idempotent() {
        let once = format_sequence(&parse_sequence(" [ Joy ][1.50] [Hug] [3]").unwrap());
        assert_eq!(once, "[Joy][1.5][Hug][3]");
        assert_eq!(format_sequence(&parse_sequence(&once).unwrap()), once);
    }

    #[test]
    fn non_ascii_input_does_not_panic() {
        assert!(parse_sequence("[Jöy][1]").is_err());
        assert!(parse_sequence("\u{3000}[Joy][1]").is_ok());
        assert!(parse_sequence("[Joy][１]").is_err());
        assert!(parse_sequence("é").is_err());
    }
}
