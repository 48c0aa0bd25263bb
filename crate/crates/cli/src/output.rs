//! Deterministic CSV formatting.

use std::io::{self, Write};

/// Twelve significant digits in scientific notation; identical inputs give
/// identical bytes on every platform.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        // fold -0 into 0
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    format!("{x:.11e}")
}

/// Formats a row of numeric cells.
pub fn nums(values: &[f64]) -> Vec<String> {
    values.iter().map(|v| fmt_num(*v)).collect()
}

pub fn write_rows<W: Write, R: IntoIterator<Item = Vec<String>>>(
    out: &mut W,
    header: &[&str],
    rows: R,
) -> io::Result<()> {
    writeln!(out, "{}", header.join(","))?;
    for row in rows {
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}
