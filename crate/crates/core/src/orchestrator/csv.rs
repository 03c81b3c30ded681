//! Plain CSV output: one header row, comma-separated, 9 significant digits.

use std::fmt::Write as _;
use std::path::Path;

/// Formats a value with 9 significant digits.
pub fn fmt_value(x: f64) -> String {
    format!("{x:.8e}")
}

pub fn render(header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        for (k, v) in row.iter().enumerate() {
            if k > 0 {
                out.push(',');
            }
            let _ = write!(out, "{}", fmt_value(*v));
        }
        out.push('\n');
    }
    out
}

/// Writes `header` and `rows` to `path`, creating parent directories.
pub fn write_csv(
    path: &Path,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<f64>>,
) -> std::io::Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, render(header, rows))
}

/// Parses a file written by [`write_csv`].
pub fn read_csv(path: &Path) -> std::io::Result<(Vec<String>, Vec<Vec<f64>>)> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let bad = |m: String| std::io::Error::new(std::io::ErrorKind::InvalidData, m);
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| bad(format!("{} is empty", path.display())))?
        .split(',')
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate() {
        let row = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| bad(format!("{}:{}: {e}", path.display(), n + 2)))?;
        if row.len() != header.len() {
            return Err(bad(format!("{}:{}: wrong column count", path.display(), n + 2)));
        }
        rows.push(row);
    }
    Ok((header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(fmt_value(1.0 / 3.0), "3.33333333e-1");
        assert_eq!(fmt_value(-1409.0), "-1.40900000e3");
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a/b.csv");
        write_csv(&p, &["x", "y"], vec![vec![1.5, -2.0], vec![0.0, 1e-9]]).unwrap();
        let (h, rows) = read_csv(&p).unwrap();
        assert_eq!(h, ["x", "y"]);
        assert_eq!(rows[1], vec![0.0, 1e-9]);
    }
}
