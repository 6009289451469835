//! CSV tables with a header block naming the configuration they came from.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

/// Writes `# key=value` header lines, a column line and the rows.
pub fn write_csv(
    path: impl AsRef<Path>,
    header: &[(&str, String)],
    columns: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for (k, v) in header {
        writeln!(w, "# {k}={v}")?;
    }
    writeln!(w, "{}", columns.join(","))?;
    for row in rows {
        debug_assert_eq!(row.len(), columns.len());
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()
}

/// Shortest round-tripping float cell; exponent form outside [1e-4, 1e15).
pub fn num(x: f64) -> String {
    if !x.is_finite() {
        String::new()
    } else if x == 0.0 || (1e-4..1e15).contains(&x.abs()) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}
