//! Flat-file artifact formats.
//!
//! Grid CSVs put `alpha_s = 0..=a_max` on rows and `alpha_b = 0..=a_max` on
//! columns, both ascending, with a header row and an index column. Lines
//! starting with `#` are comments (run metadata) and are ignored on import.
//! Reals are written with 17 significant digits, so export → import → export
//! is byte-identical.

use std::fmt::Write as _;
use std::str::FromStr;

use thiserror::Error;

use crate::grid::{Grid, PolicyGrid, ValueGrid};
use crate::model::Action;
use crate::solver::ThresholdCurve;

pub const GRID_CORNER: &str = "alpha_s\\alpha_b";

#[derive(Debug, Error, PartialEq)]
pub enum ParseError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("no grid rows found")]
    Empty,
}

fn malformed(line: usize, message: impl Into<String>) -> ParseError {
    ParseError::Malformed {
        line,
        message: message.into(),
    }
}

fn write_comments(out: &mut String, comments: &[String]) {
    for c in comments {
        for line in c.lines() {
            let _ = writeln!(out, "# {line}");
        }
    }
}

fn grid_to_csv<T>(grid: &Grid<T>, comments: &[String], cell: impl Fn(&T) -> String) -> String {
    let mut out = String::new();
    write_comments(&mut out, comments);
    out.push_str(GRID_CORNER);
    for b in 0..grid.side() {
        let _ = write!(out, ",{b}");
    }
    out.push('\n');
    for a in 0..grid.side() {
        let _ = write!(out, "{a}");
        for x in grid.row(a) {
            out.push(',');
            out.push_str(&cell(x));
        }
        out.push('\n');
    }
    out
}

fn format_real(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn value_grid_to_csv(grid: &ValueGrid, comments: &[String]) -> String {
    grid_to_csv(grid, comments, |x| format_real(*x))
}

/// Decision map as 0/1 (0 = Sense, 1 = Comm).
pub fn policy_grid_to_csv(grid: &PolicyGrid, comments: &[String]) -> String {
    grid_to_csv(grid, comments, |a| a.code().to_string())
}

fn grid_from_csv<T>(
    text: &str,
    parse: impl Fn(&str) -> Result<T, String>,
) -> Result<Grid<T>, ParseError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.starts_with('#') && !l.trim().is_empty());

    let (header_line, header) = lines.next().ok_or(ParseError::Empty)?;
    let mut fields = header.split(',');
    if fields.next() != Some(GRID_CORNER) {
        return Err(malformed(
            header_line,
            format!("expected header starting with {GRID_CORNER:?}"),
        ));
    }
    let mut side = 0;
    for (b, f) in fields.enumerate() {
        if f.trim().parse::<usize>() != Ok(b) {
            return Err(malformed(header_line, format!("column {} header must be {b}", b + 1)));
        }
        side += 1;
    }
    if side < 1 {
        return Err(malformed(header_line, "header lists no alpha_b columns"));
    }

    let mut cells = Vec::with_capacity(side * side);
    let mut rows = 0;
    for (line, text) in lines {
        let mut fields = text.split(',');
        let index = fields.next().unwrap_or("");
        if index.trim().parse::<usize>() != Ok(rows) {
            return Err(malformed(line, format!("row index must be {rows}, got {index:?}")));
        }
        if rows >= side {
            return Err(malformed(line, format!("more than {side} rows")));
        }
        let before = cells.len();
        for f in fields {
            cells.push(parse(f.trim()).map_err(|m| malformed(line, m))?);
        }
        if cells.len() - before != side {
            return Err(malformed(
                line,
                format!("expected {side} values, found {}", cells.len() - before),
            ));
        }
        rows += 1;
    }
    if rows != side {
        return Err(malformed(
            text.lines().count(),
            format!("expected {side} rows, found {rows}"),
        ));
    }
    Ok(Grid::from_cells(side - 1, cells).expect("square by construction"))
}

pub fn value_grid_from_csv(text: &str) -> Result<ValueGrid, ParseError> {
    grid_from_csv(text, |f| match f64::from_str(f) {
        Ok(x) if x.is_finite() => Ok(x),
        Ok(_) => Err(format!("non-finite value {f:?}")),
        Err(_) => Err(format!("not a number: {f:?}")),
    })
}

pub fn policy_grid_from_csv(text: &str) -> Result<PolicyGrid, ParseError> {
    grid_from_csv(text, |f| {
        f.parse::<u8>()
            .ok()
            .and_then(Action::from_code)
            .ok_or_else(|| format!("action must be 0 (sense) or 1 (comm), got {f:?}"))
    })
}

pub fn thresholds_to_csv(curve: &ThresholdCurve, comments: &[String]) -> String {
    let mut out = String::new();
    write_comments(&mut out, comments);
    out.push_str("alpha_b,tau\n");
    for (b, t) in curve.tau.iter().enumerate() {
        let _ = writeln!(out, "{b},{t}");
    }
    out
}

/// `S`/`C` glyph map, one line per `alpha_s`, columns `alpha_b` ascending.
pub fn decision_map_ascii(policy: &PolicyGrid, comments: &[String]) -> String {
    let mut out = String::new();
    write_comments(&mut out, comments);
    let side = policy.side();
    let width = (side - 1).to_string().len();
    let _ = writeln!(out, "{:>width$} | alpha_b 0..={} ->", "", side - 1);
    for a in 0..side {
        let row: String = policy.row(a).iter().map(|x| x.glyph()).collect();
        let _ = writeln!(out, "{a:>width$} | {row}");
    }
    out
}

/// Plain (P2) graymap of a value grid, linearly scaled to 0..=255, rows `alpha_s`.
pub fn value_grid_to_pgm(grid: &ValueGrid, comments: &[String]) -> String {
    let lo = grid.min_value();
    let hi = grid.max_value();
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut out = String::new();
    let side = grid.side();
    let _ = writeln!(out, "P2");
    write_comments(&mut out, comments);
    let _ = writeln!(out, "# rows alpha_s 0..={0}, columns alpha_b 0..={0}; black = {lo:.6e}, white = {hi:.6e}", side - 1);
    let _ = writeln!(out, "{side} {side}");
    let _ = writeln!(out, "255");
    for a in 0..side {
        let row: Vec<String> = grid
            .row(a)
            .iter()
            .map(|x| (((x - lo) / span) * 255.0).round().clamp(0.0, 255.0).to_string())
            .collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    out
}
