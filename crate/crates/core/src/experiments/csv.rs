//! CSV output with a fixed numeric format.
//!
//! Numbers carry 12 significant digits in the shortest of fixed or exponent
//! notation, so bodies compare byte for byte across runs and platforms. A
//! single leading `#` line holds the run timestamp and is not part of the body.

use std::fmt::Write as _;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use crate::error::Result;

const SIGNIFICANT: usize = 12;

/// Formats like C's `%.12g`.
pub fn format_number(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{:.*e}", SIGNIFICANT - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent notation");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= SIGNIFICANT as i32 {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (SIGNIFICANT as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    columns: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn new(columns: &[&str]) -> Self {
        CsvTable {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match the header");
        self.rows.push(row);
    }

    /// Header and rows, without the comment line.
    pub fn body(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|&v| format_number(v)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn render(&self, label: &str) -> String {
        let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let mut out = String::new();
        let _ = writeln!(out, "# {label} generated at unix time {secs}");
        out.push_str(&self.body());
        out
    }

    pub fn write(&self, path: &Path, label: &str) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, self.render(label))?;
        Ok(())
    }
}

/// Drops `#` lines, leaving the part of a CSV file that must be reproducible.
pub fn strip_comments(text: &str) -> String {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .flat_map(|l| [l, "\n"])
        .collect()
}

/// Reads a CSV written by [`CsvTable::write`].
pub fn parse(text: &str) -> Result<CsvTable> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.is_empty());
    let header = lines
        .next()
        .ok_or_else(|| crate::error::Error::config("csv", "missing header row"))?;
    let mut table = CsvTable::new(&header.split(',').collect::<Vec<_>>());
    for line in lines {
        let row: std::result::Result<Vec<f64>, _> = line.split(',').map(str::parse::<f64>).collect();
        let row = row.map_err(|e| crate::error::Error::config("csv", format!("bad number in {line:?}: {e}")))?;
        if row.len() != table.columns.len() {
            return Err(crate::error::Error::config("csv", format!("row width mismatch in {line:?}")));
        }
        table.rows.push(row);
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn matches_printf_g() {
        let cases = [
            (0.0, "0"),
            (-0.0, "0"),
            (1.0, "1"),
            (0.1, "0.1"),
            (150.0, "150"),
            (1.0 / 3.0, "0.333333333333"),
            (-2.5, "-2.5"),
            (123456789012.0, "123456789012"),
            (1234567890123.0, "1.23456789012e+12"),
            (1e-4, "0.0001"),
            (1.5e-5, "1.5e-05"),
            (6.02214076e23, "6.02214076e+23"),
            (672.381322488, "672.381322488"),
            (0.9999999999999, "1"),
        ];
        for (x, s) in cases {
            assert_eq!(format_number(x), s, "{x}");
        }
    }

    #[test]
    fn body_excludes_comment_and_round_trips() {
        let mut t = CsvTable::new(&["a", "b"]);
        t.push(vec![0.5, 1e-9]);
        t.push(vec![2.0, -3.25]);
        assert_eq!(t.body(), "a,b\n0.5,1e-09\n2,-3.25\n");
        let rendered = t.render("test");
        assert!(rendered.starts_with("# test"));
        assert_eq!(strip_comments(&rendered), t.body());
        assert_eq!(parse(&rendered).unwrap(), t);
    }

    proptest! {
        #[test]
        fn twelve_significant_digits_survive(x in -1e6f64..1e6) {
            let back: f64 = format_number(x).parse().unwrap();
            prop_assert!((back - x).abs() <= 1e-11 * x.abs().max(1e-300));
        }
    }
}
