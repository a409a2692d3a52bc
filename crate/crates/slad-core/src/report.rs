//! CSV and metrics-JSON emission.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::Result;

/// Minimal RFC-4180-style writer: header row mandatory, fields quoted only
/// when they contain a comma, quote, or newline.
pub struct CsvFile {
    out: BufWriter<File>,
    columns: usize,
}

fn field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl CsvFile {
    pub fn create(path: &Path, header: &[&str]) -> Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "{}", header.iter().map(|h| field(h)).collect::<Vec<_>>().join(","))?;
        Ok(CsvFile { out, columns: header.len() })
    }

    pub fn row(&mut self, fields: &[String]) -> Result<()> {
        assert!(
            fields.len() == self.columns,
            "csv: row has {} fields, header has {}",
            fields.len(),
            self.columns
        );
        writeln!(
            self.out,
            "{}",
            fields.iter().map(|f| field(f)).collect::<Vec<_>>().join(",")
        )?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

/// Pretty-printed metrics document.
pub fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    let text = serde_json::to_string_pretty(value)?;
    out.write_all(text.as_bytes())?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_quoting() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let mut csv = CsvFile::create(&path, &["a", "b"]).unwrap();
        csv.row(&["1".into(), "plain".into()]).unwrap();
        csv.row(&["2".into(), "needs,quote".into()]).unwrap();
        csv.finish().unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "a,b\n1,plain\n2,\"needs,quote\"\n");
    }

    #[test]
    #[should_panic(expected = "csv: row has")]
    fn row_width_is_enforced() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let mut csv = CsvFile::create(&path, &["a", "b"]).unwrap();
        csv.row(&["only-one".into()]).unwrap();
    }
}
