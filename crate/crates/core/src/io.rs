//! Plain-text artifact writers shared by the command-line stages.

use crate::error::Result;
use std::fmt::Write as _;
use std::path::Path;

/// One CSV line from preformatted cells.
pub fn csv_line(cells: &[String]) -> String {
    let mut s = cells.join(",");
    s.push('\n');
    s
}

/// Float cell with a fixed 12-digit exponent format, so reruns are
/// byte-identical.
pub fn cell(v: f64) -> String {
    format!("{v:.12e}")
}

/// CSV text with a header and numeric rows.
pub fn numeric_csv(header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for row in rows {
        let cells: Vec<String> = row.into_iter().map(cell).collect();
        let _ = write!(s, "{}", csv_line(&cells));
    }
    s
}

/// Write `text` to `path`, creating parent directories.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, text)?;
    Ok(())
}

/// Pretty JSON with a trailing newline.
pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("JSON values always serialise");
    text.push('\n');
    write_text(path, &text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numeric_rows_are_fixed_width() {
        let s = numeric_csv(&["a", "b"], vec![vec![1.0, -0.5]]);
        assert_eq!(s, "a,b\n1.000000000000e0,-5.000000000000e-1\n");
    }
}
