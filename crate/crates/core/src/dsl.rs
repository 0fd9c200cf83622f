//! The tuple-list text format circuits are exchanged in:
//!
//! ```text
//! [('H', [0]), ('CNOT', [0, 12]), ('RY', [25.0, 2])]
//! ```
//!
//! [`curate`] cleans raw proposer output down to one bracketed list,
//! [`parse`] turns a list into a [`Circuit`], and [`serialize`] writes the
//! canonical single-line form. Input is tolerant (either quote style, `(…)`
//! or `[…]` entry wrappers, any case for gate names, free whitespace);
//! output always uses the canonical style.

use std::fmt;

use thiserror::Error;

use crate::circuit::{Circuit, Gate, GateKind};

const OPEN_TAG: &str = "<python>";
const CLOSE_TAG: &str = "</python>";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParseErrorKind {
    NoListFound,
    MalformedEntry,
    UnknownGate,
    BadArity,
    BadNumber,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ParseErrorKind::NoListFound => "no-list-found",
            ParseErrorKind::MalformedEntry => "malformed-entry",
            ParseErrorKind::UnknownGate => "unknown-gate",
            ParseErrorKind::BadArity => "bad-arity",
            ParseErrorKind::BadNumber => "bad-number",
        })
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
#[error("{kind} at offset {position}: {detail}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    /// Character offset into the text that was parsed.
    pub position: usize,
    pub detail: String,
}

/// Reduces raw proposer output to a single bracketed gate list.
///
/// Steps, in order: keep only the body of the first `<python>…</python>`
/// pair if both tags occur; drop lines starting with a code fence; delete
/// non-ASCII characters; cut down to the outermost balanced `[…]` pair,
/// which also discards anything trailing it.
pub fn curate(raw: &str) -> Result<String, ParseError> {
    let mut text = raw;
    if let Some(open) = raw.find(OPEN_TAG) {
        let body = &raw[open + OPEN_TAG.len()..];
        if let Some(close) = body.find(CLOSE_TAG) {
            text = &body[..close];
        }
    }

    let unfenced: String = text
        .split_inclusive('\n')
        .filter(|line| !line.trim_start().starts_with("```"))
        .collect();
    let ascii: String = unfenced.chars().filter(char::is_ascii).collect();

    let (start, end) = outermost_list(&ascii).ok_or_else(|| ParseError {
        kind: ParseErrorKind::NoListFound,
        position: 0,
        detail: "no [ ... ] pair in proposal".into(),
    })?;
    Ok(ascii[start..=end].to_string())
}

/// Byte span of the list to keep. Only top-level bracket spans are
/// candidates; the first one whose body opens with an entry wrapper wins,
/// otherwise the first span. An unbalanced opening bracket falls back to
/// the last `]` after it so that the parser can report what is wrong.
fn outermost_list(text: &str) -> Option<(usize, usize)> {
    let bytes = text.as_bytes();
    let mut spans = Vec::new();
    let mut depth = 0usize;
    let mut start = 0usize;
    for (i, &b) in bytes.iter().enumerate() {
        match b {
            b'[' => {
                if depth == 0 {
                    start = i;
                }
                depth += 1;
            }
            b']' if depth > 0 => {
                depth -= 1;
                if depth == 0 {
                    spans.push((start, i));
                }
            }
            _ => {}
        }
    }
    if depth > 0 && spans.is_empty() {
        let last = text.rfind(']')?;
        return (last > start).then_some((start, last));
    }
    let looks_like_entries = |&(s, e): &(usize, usize)| {
        let body = text[s + 1..e].trim_start();
        body.is_empty() || body.starts_with('(') || body.starts_with('[')
    };
    spans
        .iter()
        .copied()
        .find(looks_like_entries)
        .or_else(|| spans.first().copied())
}

/// Parses a gate list into a circuit over `num_qubits` wires.
///
/// Wire range and CNOT distinctness are not checked here; they surface from
/// [`Circuit::validate`].
pub fn parse(text: &str, num_qubits: usize) -> Result<Circuit, ParseError> {
    let gates = Parser::new(text).list()?;
    Ok(Circuit::new(num_qubits, gates))
}

/// Smallest register that holds every wire in `text` (at least 2).
pub fn infer_num_qubits(text: &str) -> Result<usize, ParseError> {
    let gates = Parser::new(text).list()?;
    let max = gates.iter().flat_map(|g| g.wires()).max().unwrap_or(0);
    Ok((max + 1).max(2))
}

struct Parser<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        Self { text, pos: 0 }
    }

    fn error(&self, kind: ParseErrorKind, at: usize, detail: impl Into<String>) -> ParseError {
        let at = at.min(self.text.len());
        ParseError {
            kind,
            position: self.text[..at].chars().count(),
            detail: detail.into(),
        }
    }

    fn peek(&self) -> Option<u8> {
        self.text.as_bytes().get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(b) if b.is_ascii_whitespace()) {
            self.pos += 1;
        }
    }

    fn eat(&mut self, b: u8) -> bool {
        self.skip_ws();
        if self.peek() == Some(b) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, b: u8, what: &str) -> Result<(), ParseError> {
        if self.eat(b) {
            Ok(())
        } else {
            Err(self.unexpected(what))
        }
    }

    fn unexpected(&self, what: &str) -> ParseError {
        let found = match self.text[self.pos..].chars().next() {
            Some(c) => format!("{c:?}"),
            None => "end of input".into(),
        };
        self.error(
            ParseErrorKind::MalformedEntry,
            self.pos,
            format!("expected {what}, found {found}"),
        )
    }

    fn list(&mut self) -> Result<Vec<Gate>, ParseError> {
        self.skip_ws();
        if self.peek() != Some(b'[') {
            return Err(self.error(
                ParseErrorKind::NoListFound,
                self.pos,
                "gate list must start with '['",
            ));
        }
        self.pos += 1;
        let mut gates = Vec::new();
        loop {
            if self.eat(b']') {
                break;
            }
            gates.push(self.entry()?);
            if self.eat(b',') {
                continue;
            }
            self.expect(b']', "',' or ']'")?;
            break;
        }
        self.skip_ws();
        if self.pos < self.text.len() {
            return Err(self.error(
                ParseErrorKind::MalformedEntry,
                self.pos,
                "trailing characters after gate list",
            ));
        }
        Ok(gates)
    }

    fn entry(&mut self) -> Result<Gate, ParseError> {
        self.skip_ws();
        let close = match self.peek() {
            Some(b'(') => b')',
            Some(b'[') => b']',
            _ => return Err(self.unexpected("'(' or '[' opening a gate entry")),
        };
        self.pos += 1;
        let (name_at, name) = self.name()?;
        let kind = match name.to_ascii_uppercase().as_str() {
            "H" => GateKind::H,
            "RY" => GateKind::Ry,
            "CNOT" => GateKind::Cnot,
            _ => {
                return Err(self.error(
                    ParseErrorKind::UnknownGate,
                    name_at,
                    format!("unknown gate {name:?}"),
                ))
            }
        };
        self.expect(b',', "',' after gate name")?;
        self.skip_ws();
        let args_at = self.pos;
        let args = self.args()?;
        self.expect(close, "end of gate entry")?;
        self.build(kind, &args, args_at)
    }

    fn name(&mut self) -> Result<(usize, &'a str), ParseError> {
        self.skip_ws();
        let quote = match self.peek() {
            Some(q @ (b'\'' | b'"')) => q,
            _ => return Err(self.unexpected("quoted gate name")),
        };
        let start = self.pos + 1;
        let len = self.text[start..]
            .bytes()
            .position(|b| b == quote)
            .ok_or_else(|| {
                self.error(
                    ParseErrorKind::MalformedEntry,
                    self.pos,
                    "unterminated gate name",
                )
            })?;
        self.pos = start + len + 1;
        Ok((start, self.text[start..start + len].trim()))
    }

    fn args(&mut self) -> Result<Vec<(usize, &'a str)>, ParseError> {
        if !self.eat(b'[') {
            return Err(self.unexpected("'[' opening the argument list"));
        }
        let mut args = Vec::new();
        loop {
            if self.eat(b']') {
                break;
            }
            self.skip_ws();
            let start = self.pos;
            while matches!(self.peek(), Some(b) if b.is_ascii_alphanumeric() || matches!(b, b'.' | b'+' | b'-' | b'_'))
            {
                self.pos += 1;
            }
            if self.pos == start {
                return Err(self.error(ParseErrorKind::BadNumber, start, "expected a number"));
            }
            args.push((start, &self.text[start..self.pos]));
            if self.eat(b',') {
                continue;
            }
            self.expect(b']', "',' or ']' in argument list")?;
            break;
        }
        Ok(args)
    }

    fn build(
        &self,
        kind: GateKind,
        args: &[(usize, &str)],
        args_at: usize,
    ) -> Result<Gate, ParseError> {
        let expected = match kind {
            GateKind::H => 1,
            GateKind::Ry | GateKind::Cnot => 2,
        };
        if args.len() != expected {
            return Err(self.error(
                ParseErrorKind::BadArity,
                args_at,
                format!("{kind} takes {expected} argument(s), got {}", args.len()),
            ));
        }
        Ok(match kind {
            GateKind::H => Gate::h(self.wire(args[0])?),
            GateKind::Ry => Gate::ry(self.angle(args[0])?, self.wire(args[1])?),
            GateKind::Cnot => Gate::cnot(self.wire(args[0])?, self.wire(args[1])?),
        })
    }

    fn wire(&self, (at, token): (usize, &str)) -> Result<usize, ParseError> {
        let digits = token.strip_prefix('+').unwrap_or(token);
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(self.error(
                ParseErrorKind::BadNumber,
                at,
                format!("wire must be a non-negative integer, got {token:?}"),
            ));
        }
        digits.parse().map_err(|_| {
            self.error(
                ParseErrorKind::BadNumber,
                at,
                format!("wire {token:?} too large"),
            )
        })
    }

    fn angle(&self, (at, token): (usize, &str)) -> Result<f64, ParseError> {
        let numeric = token
            .bytes()
            .all(|b| b.is_ascii_digit() || matches!(b, b'.' | b'+' | b'-' | b'e' | b'E'));
        match token.parse::<f64>() {
            Ok(v) if numeric && v.is_finite() => Ok(v),
            _ => Err(self.error(
                ParseErrorKind::BadNumber,
                at,
                format!("angle must be a decimal literal, got {token:?}"),
            )),
        }
    }
}

/// Canonical angle text: one decimal place when integral (`25.0`), else the
/// shortest decimal that round-trips.
pub fn format_angle(angle: f64) -> String {
    if angle.fract() == 0.0 && angle.abs() < 1e16 {
        format!("{angle:.1}")
    } else {
        format!("{angle}")
    }
}

/// Canonical single-line gate list, e.g. `[('H', [0]), ('RY', [25.0, 2])]`.
pub fn serialize(circuit: &Circuit) -> String {
    let entries: Vec<String> = circuit
        .gates
        .iter()
        .map(|g| match *g {
            Gate::H { target } => format!("('H', [{target}])"),
            Gate::Ry { angle, target } => format!("('RY', [{}, {target}])", format_angle(angle)),
            Gate::Cnot { control, target } => format!("('CNOT', [{control}, {target}])"),
        })
        .collect();
    format!("[{}]", entries.join(", "))
}
