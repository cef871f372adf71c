//! CSV helpers shared by every exporter: fixed 17-significant-digit
//! formatting and a locale-free comma writer.

use std::fs::File;
use std::path::Path;

use crate::error::Result;

/// Formats `v` with 17 significant digits in scientific notation.
pub fn fmt(v: f64) -> String {
    if v == 0.0 {
        // avoid "-0.0000000000000000e0"
        return format!("{:.16e}", 0.0f64);
    }
    format!("{v:.16e}")
}

pub fn writer(path: &Path) -> Result<csv::Writer<File>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    Ok(csv::WriterBuilder::new().from_path(path)?)
}

/// Writes a header plus rows of floats.
pub fn write_table(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|v| fmt(*v)))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits() {
        assert_eq!(fmt(1.0), "1.0000000000000000e0");
        assert_eq!(fmt(-0.0), fmt(0.0));
        let v = 0.1f64 + 0.2;
        assert_eq!(fmt(v).parse::<f64>().unwrap(), v);
    }
}
