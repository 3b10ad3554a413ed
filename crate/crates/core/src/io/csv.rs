//! Numeric CSV: header row, `\n` line endings, every value printed like C's `%.9g`.

use std::path::Path;

use crate::error::{Error, Result};

/// Shortest-form rendering with 9 significant digits, identical to `printf("%.9g")`.
pub fn format_g9(v: f64) -> String {
    const P: i32 = 9;
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    // The exponent after rounding to P digits decides the style.
    let sci = format!("{:.*e}", (P - 1) as usize, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..P).contains(&exp) {
        let m = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        strip_zeros(&format!("{:.*}", (P - 1 - exp) as usize, v))
    }
}

fn strip_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

pub fn csv_string(header: &[&str], rows: &[Vec<f64>]) -> Result<String> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let wrap = |e: csv::Error| Error::Parameter(format!("csv: {e}"));
    w.write_record(header).map_err(wrap)?;
    for (i, row) in rows.iter().enumerate() {
        if row.len() != header.len() {
            return Err(Error::Dimension(format!(
                "csv row {i} has {} values for {} columns",
                row.len(),
                header.len()
            )));
        }
        w.write_record(row.iter().map(|v| format_g9(*v))).map_err(wrap)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Parameter(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("ascii output"))
}

pub fn write_csv(path: impl AsRef<Path>, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, csv_string(header, rows)?).map_err(|e| Error::io(path, e))
}
