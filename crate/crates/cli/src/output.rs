use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use crate::CliError;

pub fn open(out: &Option<PathBuf>) -> Result<Box<dyn Write>, CliError> {
    match out {
        Some(p) => {
            let f = File::create(p).map_err(|e| CliError::Usage(format!("cannot create {}: {e}", p.display())))?;
            Ok(Box::new(BufWriter::new(f)))
        }
        None => Ok(Box::new(BufWriter::new(io::stdout().lock()))),
    }
}

/// CSV with a `#`-prefixed header block followed by one column-name row.
pub struct Csv {
    w: Box<dyn Write>,
}

impl Csv {
    pub fn new(out: &Option<PathBuf>, meta: &[(&str, String)], columns: &[&str]) -> Result<Self, CliError> {
        let mut w = open(out)?;
        writeln!(w, "# hrmt {}", env!("CARGO_PKG_VERSION"))?;
        for (k, v) in meta {
            writeln!(w, "# {k}: {v}")?;
        }
        writeln!(w, "{}", columns.join(","))?;
        Ok(Self { w })
    }

    pub fn row(&mut self, values: &[f64]) -> Result<(), CliError> {
        let cells: Vec<String> = values.iter().map(|v| format_float(*v)).collect();
        writeln!(self.w, "{}", cells.join(","))?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        self.w.flush()?;
        Ok(())
    }
}

/// 17 significant digits.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_json(out: &Option<PathBuf>, value: &serde_json::Value) -> Result<(), CliError> {
    let mut w = open(out)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::Failure(e.to_string()))?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            let s = format_float(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
        assert_eq!(format_float(1.5), "1.5000000000000000e0");
    }
}
