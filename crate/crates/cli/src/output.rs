//! CSV emission: RFC-4180-compatible, '.' decimal separator, LF line
//! endings, numbers serialized with 17 significant digits so that files are
//! byte-identical across repeated runs of the same build.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

/// Serialize a float with 17 significant digits (round-trip exact for f64).
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else {
        format!("{x:.16e}")
    }
}

/// A CSV file under construction; rows are buffered and written on `finish`.
pub struct Csv {
    path: PathBuf,
    buf: String,
    columns: usize,
}

impl Csv {
    pub fn new(dir: &Path, name: &str, header: &[&str]) -> Self {
        let mut buf = String::new();
        buf.push_str(&header.join(","));
        buf.push('\n');
        Self {
            path: dir.join(name),
            buf,
            columns: header.len(),
        }
    }

    pub fn row(&mut self, values: &[f64]) {
        assert_eq!(values.len(), self.columns, "row width mismatch");
        let mut first = true;
        for &v in values {
            if !first {
                self.buf.push(',');
            }
            first = false;
            self.buf.push_str(&fmt_f64(v));
        }
        self.buf.push('\n');
    }

    /// Row with free-form trailing text fields (used by events.csv).
    pub fn row_text(&mut self, values: &[f64], text: &[&str]) {
        assert_eq!(values.len() + text.len(), self.columns, "row width mismatch");
        let mut fields: Vec<String> = values.iter().map(|&v| fmt_f64(v)).collect();
        for t in text {
            fields.push(quote(t));
        }
        self.buf.push_str(&fields.join(","));
        self.buf.push('\n');
    }

    pub fn finish(self) -> std::io::Result<PathBuf> {
        let mut f = fs::File::create(&self.path)?;
        f.write_all(self.buf.as_bytes())?;
        Ok(self.path)
    }
}

/// Quote a text field when RFC 4180 requires it.
fn quote(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// File name for an Eulerian snapshot at time `t` (Display form of the
/// requested time, e.g. `eulerian_1.5.csv`).
pub fn eulerian_name(t: f64) -> String {
    format!("eulerian_{t}.csv")
}
