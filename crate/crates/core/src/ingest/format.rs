//! Plain-text coincidence-count tables.
//!
//! ```text
//! EPRCOUNTS 1
//! variable=x
//! step=0.02
//! gamma=0.3333333333333333
//! offset_a=-1.5
//!
//! 0,3,1
//! 2,9,4
//! ```
//!
//! Line 1 is the magic. Header lines are `key=value` with required keys
//! `variable` (`x` or `p`), `step` (detector step, mm) and `gamma`, and
//! optional `offset_a`, `offset_b` (mm, default 0). One or more blank lines
//! separate the header from the matrix. Each matrix line is one `z_A` row of
//! base-10 nonnegative integers separated by single commas. Trailing
//! whitespace and trailing blank lines are accepted; nothing else is.

use std::fmt::Write as _;

use ndarray::Array2;
use thiserror::Error;

use super::{CountTable, TableMeta, Variable};

pub const MAGIC: &str = "EPRCOUNTS 1";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("input is not valid UTF-8")]
    NotUtf8,
    #[error("expected magic line {MAGIC:?}")]
    BadMagic,
    #[error("missing required header key {0:?}")]
    MissingHeaderKey(&'static str),
    #[error("unknown header key {0:?}")]
    UnknownHeaderKey(String),
    #[error("duplicate header key {0:?}")]
    DuplicateHeaderKey(String),
    #[error("malformed header line (expected key=value)")]
    MalformedHeader,
    #[error("invalid value {value:?} for {key:?}")]
    BadValue { key: String, value: String },
    #[error("detector step must be positive, got {0}")]
    NonPositiveStep(String),
    #[error("gamma must be positive, got {0}")]
    NonPositiveGamma(String),
    #[error("negative count {0}")]
    NegativeCount(String),
    #[error("invalid count cell {0:?}")]
    BadCell(String),
    #[error("total count exceeds {}", u64::MAX)]
    CountOverflow,
    #[error("row has {got} cells, expected {expected}")]
    RaggedMatrix { expected: usize, got: usize },
    #[error("matrix is missing or has fewer than 2 rows or columns")]
    MatrixTooSmall,
    #[error("unexpected content after the matrix")]
    TrailingContent,
}

/// Parse failure with the 1-based line it refers to.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub kind: ParseErrorKind,
}

fn err(line: usize, kind: ParseErrorKind) -> ParseError {
    ParseError { line, kind }
}

fn parse_positive(line: usize, key: &str, raw: &str) -> Result<f64, ParseError> {
    let v: f64 = raw.parse().map_err(|_| {
        err(
            line,
            ParseErrorKind::BadValue {
                key: key.to_string(),
                value: raw.to_string(),
            },
        )
    })?;
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else if key == "step" {
        Err(err(line, ParseErrorKind::NonPositiveStep(raw.to_string())))
    } else {
        Err(err(line, ParseErrorKind::NonPositiveGamma(raw.to_string())))
    }
}

fn parse_finite(line: usize, key: &str, raw: &str) -> Result<f64, ParseError> {
    match raw.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(err(
            line,
            ParseErrorKind::BadValue {
                key: key.to_string(),
                value: raw.to_string(),
            },
        )),
    }
}

fn parse_cell(line: usize, cell: &str) -> Result<u64, ParseError> {
    if let Some(rest) = cell.strip_prefix('-') {
        if !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()) {
            return Err(err(line, ParseErrorKind::NegativeCount(cell.to_string())));
        }
    }
    if cell.is_empty() || !cell.bytes().all(|b| b.is_ascii_digit()) {
        return Err(err(line, ParseErrorKind::BadCell(cell.to_string())));
    }
    cell.parse()
        .map_err(|_| err(line, ParseErrorKind::BadCell(cell.to_string())))
}

/// Parses one count table.
pub fn parse_count_table(bytes: &[u8]) -> Result<CountTable, ParseError> {
    let text = std::str::from_utf8(bytes).map_err(|_| err(1, ParseErrorKind::NotUtf8))?;
    let mut lines = text
        .split('\n')
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end()))
        .peekable();

    match lines.next() {
        Some((_, MAGIC)) => {}
        _ => return Err(err(1, ParseErrorKind::BadMagic)),
    }

    let mut variable = None;
    let mut step = None;
    let mut gamma = None;
    let mut offset_a = None;
    let mut offset_b = None;
    let mut last_header_line = 1;
    for (no, line) in lines.by_ref() {
        if line.is_empty() {
            break;
        }
        last_header_line = no;
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(no, ParseErrorKind::MalformedHeader))?;
        let dup = || err(no, ParseErrorKind::DuplicateHeaderKey(key.to_string()));
        match key {
            "variable" => {
                let v = match value {
                    "x" => Variable::X,
                    "p" => Variable::P,
                    _ => {
                        return Err(err(
                            no,
                            ParseErrorKind::BadValue {
                                key: key.to_string(),
                                value: value.to_string(),
                            },
                        ))
                    }
                };
                if variable.replace(v).is_some() {
                    return Err(dup());
                }
            }
            "step" => {
                if step.replace(parse_positive(no, key, value)?).is_some() {
                    return Err(dup());
                }
            }
            "gamma" => {
                if gamma.replace(parse_positive(no, key, value)?).is_some() {
                    return Err(dup());
                }
            }
            "offset_a" => {
                if offset_a.replace(parse_finite(no, key, value)?).is_some() {
                    return Err(dup());
                }
            }
            "offset_b" => {
                if offset_b.replace(parse_finite(no, key, value)?).is_some() {
                    return Err(dup());
                }
            }
            _ => return Err(err(no, ParseErrorKind::UnknownHeaderKey(key.to_string()))),
        }
    }
    let missing = |k| err(last_header_line, ParseErrorKind::MissingHeaderKey(k));
    let meta = TableMeta {
        variable: variable.ok_or_else(|| missing("variable"))?,
        step_mm: step.ok_or_else(|| missing("step"))?,
        gamma: gamma.ok_or_else(|| missing("gamma"))?,
        offset_a: offset_a.unwrap_or(0.0),
        offset_b: offset_b.unwrap_or(0.0),
    };

    while let Some((_, "")) = lines.peek() {
        lines.next();
    }

    let mut cells = Vec::new();
    let mut cols = None;
    let mut rows = 0usize;
    let mut last_line = last_header_line;
    let mut total = 0u64;
    for (no, line) in lines.by_ref() {
        if line.is_empty() {
            break;
        }
        last_line = no;
        let before = cells.len();
        for cell in line.split(',') {
            let c = parse_cell(no, cell)?;
            total = total
                .checked_add(c)
                .ok_or_else(|| err(no, ParseErrorKind::CountOverflow))?;
            cells.push(c);
        }
        let got = cells.len() - before;
        match cols {
            None => cols = Some(got),
            Some(expected) if expected != got => {
                return Err(err(no, ParseErrorKind::RaggedMatrix { expected, got }))
            }
            _ => {}
        }
        rows += 1;
    }
    for (no, line) in lines {
        if !line.is_empty() {
            return Err(err(no, ParseErrorKind::TrailingContent));
        }
    }
    let cols = cols.unwrap_or(0);
    if rows < 2 || cols < 2 {
        return Err(err(last_line, ParseErrorKind::MatrixTooSmall));
    }
    let counts = Array2::from_shape_vec((rows, cols), cells).expect("row lengths checked");
    Ok(CountTable { meta, counts })
}

/// Canonical text form; offsets equal to zero are omitted.
pub fn write_count_table(table: &CountTable) -> String {
    let m = &table.meta;
    let mut out = String::with_capacity(64 + table.counts.len() * 4);
    out.push_str(MAGIC);
    out.push('\n');
    let var = match m.variable {
        Variable::X => "x",
        Variable::P => "p",
    };
    let _ = writeln!(out, "variable={var}");
    let _ = writeln!(out, "step={}", m.step_mm);
    let _ = writeln!(out, "gamma={}", m.gamma);
    if m.offset_a != 0.0 {
        let _ = writeln!(out, "offset_a={}", m.offset_a);
    }
    if m.offset_b != 0.0 {
        let _ = writeln!(out, "offset_b={}", m.offset_b);
    }
    out.push('\n');
    for row in table.counts.rows() {
        let mut first = true;
        for c in row {
            if !first {
                out.push(',');
            }
            first = false;
            let _ = write!(out, "{c}");
        }
        out.push('\n');
    }
    out
}
