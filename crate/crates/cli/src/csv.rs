//! CSV emission with a fixed schema per table: exact headers, six
//! significant digits for reals, deterministic row order (the caller's).

use std::fmt::Write as _;
use std::path::Path;

/// Column order of the sweep table. Changing this breaks downstream parsers,
/// so don't.
pub const SWEEP_COLUMNS: &[&str] = &[
    "point-id",
    "m",
    "l",
    "n",
    "beta",
    "nu",
    "power",
    "metric",
    "alpha",
    "gamma",
    "zeta",
    "policy",
    "trials",
    "rate-m1",
    "rate-m2",
    "rate-m3",
    "wilson-low",
    "wilson-high",
    "emp-atypicality",
    "bound-atypicality",
    "mean-typical-sets",
    "wall-ms",
];

pub const TAILS_COLUMNS: &[&str] = &["k", "lambda", "trials", "lower-rate", "upper-rate", "bound"];

#[derive(Debug, Clone, PartialEq)]
pub enum Field {
    Count(u64),
    Real(f64),
    Text(String),
}

#[derive(Debug)]
pub enum CsvError {
    SchemaMismatch { row: usize, got: usize, expected: usize },
    Io(std::io::Error),
}

impl std::fmt::Display for CsvError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CsvError::SchemaMismatch { row, got, expected } => {
                write!(f, "row {row} has {got} fields, schema expects {expected}")
            }
            CsvError::Io(e) => write!(f, "csv io error: {e}"),
        }
    }
}

impl std::error::Error for CsvError {}

impl From<std::io::Error> for CsvError {
    fn from(e: std::io::Error) -> Self {
        CsvError::Io(e)
    }
}

/// Format with six significant digits, trimming trailing zeros (the behavior
/// of printf's %.6g).
pub fn format_sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-4..6).contains(&exp) {
        let s = format!("{:.5e}", x);
        trim_mantissa_zeros(&s)
    } else {
        let decimals = (5 - exp).max(0) as usize;
        let s = format!("{:.*}", decimals, x);
        trim_fraction_zeros(&s)
    }
}

fn trim_fraction_zeros(s: &str) -> String {
    if !s.contains('.') {
        return s.to_string();
    }
    let trimmed = s.trim_end_matches('0').trim_end_matches('.');
    trimmed.to_string()
}

fn trim_mantissa_zeros(s: &str) -> String {
    match s.split_once('e') {
        Some((mantissa, exp)) => format!("{}e{}", trim_fraction_zeros(mantissa), exp),
        None => s.to_string(),
    }
}

fn render(field: &Field) -> String {
    match field {
        Field::Count(v) => v.to_string(),
        Field::Real(v) => format_sig6(*v),
        Field::Text(s) => s.clone(),
    }
}

/// Render rows against a schema. Header first, one line per row, `\n` line
/// endings, no trailing blank line surprises.
pub fn render_csv(rows: &[Vec<Field>], columns: &[&str]) -> Result<String, CsvError> {
    let mut out = String::new();
    out.push_str(&columns.join(","));
    out.push('\n');
    for (i, row) in rows.iter().enumerate() {
        if row.len() != columns.len() {
            return Err(CsvError::SchemaMismatch {
                row: i,
                got: row.len(),
                expected: columns.len(),
            });
        }
        let mut first = true;
        for field in row {
            if !first {
                out.push(',');
            }
            let _ = write!(out, "{}", render(field));
            first = false;
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn emit_csv(rows: &[Vec<Field>], columns: &[&str], path: &Path) -> Result<(), CsvError> {
    let body = render_csv(rows, columns)?;
    std::fs::write(path, body)?;
    Ok(())
}
