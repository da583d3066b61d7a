//! JSONL and CSV writers. Every real number goes out as a 17-significant-digit
//! decimal (`fmt17`); non-finite values become `null` in JSON and
//! `nan`/`inf`/`-inf` in CSV.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::Result;
use crate::harness::run::io_err;
use crate::numeric::fmt17;

/// One JSON object, built field by field in a fixed order.
#[derive(Debug, Default, Clone)]
pub struct JsonLine {
    buf: String,
}

impl JsonLine {
    pub fn new() -> Self {
        Self::default()
    }

    fn key(&mut self, key: &str) {
        self.buf.push(if self.buf.is_empty() { '{' } else { ',' });
        self.buf.push_str(&serde_json::to_string(key).unwrap());
        self.buf.push(':');
    }

    pub fn str(mut self, key: &str, value: &str) -> Self {
        self.key(key);
        self.buf.push_str(&serde_json::to_string(value).unwrap());
        self
    }

    pub fn num(mut self, key: &str, value: f64) -> Self {
        self.key(key);
        if value.is_finite() {
            self.buf.push_str(&fmt17(value));
        } else {
            self.buf.push_str("null");
        }
        self
    }

    pub fn opt_num(self, key: &str, value: Option<f64>) -> Self {
        match value {
            Some(v) => self.num(key, v),
            None => self.raw(key, "null"),
        }
    }

    pub fn int(mut self, key: &str, value: u64) -> Self {
        self.key(key);
        let _ = write!(self.buf, "{value}");
        self
    }

    pub fn bool(self, key: &str, value: bool) -> Self {
        self.raw(key, if value { "true" } else { "false" })
    }

    fn raw(mut self, key: &str, value: &str) -> Self {
        self.key(key);
        self.buf.push_str(value);
        self
    }

    pub fn finish(mut self) -> String {
        if self.buf.is_empty() {
            self.buf.push('{');
        }
        self.buf.push('}');
        self.buf
    }
}

pub fn write_jsonl(path: &Path, lines: &[String]) -> Result<()> {
    let mut text = String::new();
    for line in lines {
        text.push_str(line);
        text.push('\n');
    }
    fs::write(path, text).map_err(io_err(format!("writing {}", path.display())))
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for row in rows {
        w.write_record(row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(io_err(format!("writing {}", path.display())))
}

fn csv_err(path: &Path, e: csv::Error) -> crate::error::Error {
    crate::error::Error::Io {
        context: format!("writing {}", path.display()),
        source: std::io::Error::other(e.to_string()),
    }
}

/// CSV cell for a real number.
pub fn cell(x: f64) -> String {
    fmt17(x)
}
