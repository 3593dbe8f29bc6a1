//! CSV tables, Wigner grid files and the run manifest.
//!
//! Every file starts with one `# {json}` metadata line. Float formatting is
//! shortest round-trip, so identical results give identical bytes.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::observables::{PhaseGrid, WignerGrid};

/// Labeled numeric table with a trailing free-text `flag` column.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub flags: Vec<String>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: vec![], flags: vec![] }
    }

    pub fn push(&mut self, row: Vec<f64>, flag: Option<String>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::Shape(format!(
                "table '{}' has {} columns, row has {}",
                self.name,
                self.columns.len(),
                row.len()
            )));
        }
        self.rows.push(row);
        self.flags.push(flag.unwrap_or_default());
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn flagged_rows(&self) -> usize {
        self.flags.iter().filter(|f| !f.is_empty()).count()
    }

    /// Unflagged rows must be NaN-free.
    pub fn check_nan(&self) -> Result<()> {
        for (i, (r, f)) in self.rows.iter().zip(&self.flags).enumerate() {
            if f.is_empty() && r.iter().any(|v| v.is_nan()) {
                return Err(Error::Shape(format!("table '{}' row {i} has NaN but no flag", self.name)));
            }
        }
        Ok(())
    }

    pub fn to_csv(&self, meta: &Value) -> Result<Vec<u8>> {
        let mut out = metadata_line(meta)?;
        let mut w = csv::Writer::from_writer(&mut out);
        let mut header = self.columns.clone();
        header.push("flag".into());
        w.write_record(&header).map_err(csv_err)?;
        for (r, f) in self.rows.iter().zip(&self.flags) {
            let mut rec: Vec<String> = r.iter().map(|v| fmt_f64(*v)).collect();
            rec.push(f.clone());
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush()?;
        drop(w);
        Ok(out)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

fn metadata_line(meta: &Value) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    writeln!(out, "# {}", serde_json::to_string(meta)?)?;
    Ok(out)
}

/// Shortest round-trip text; exponent form outside `[1e-4, 1e15)`.
pub fn fmt_f64(v: f64) -> String {
    if v == 0.0 || !v.is_finite() || (1e-4..1e15).contains(&v.abs()) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// Wigner field as a matrix: header `im\re,<re axis>`, then one row per
/// imaginary-axis value.
pub fn wigner_csv(w: &WignerGrid, meta: &Value) -> Result<Vec<u8>> {
    let mut out = metadata_line(meta)?;
    let mut wr = csv::Writer::from_writer(&mut out);
    let mut header = vec!["im\\re".to_string()];
    header.extend(w.grid.re_axis().into_iter().map(fmt_f64));
    wr.write_record(&header).map_err(csv_err)?;
    for (i, im) in w.grid.im_axis().into_iter().enumerate() {
        let mut rec = vec![fmt_f64(im)];
        rec.extend(w.values.row(i).iter().map(|v| fmt_f64(*v)));
        wr.write_record(&rec).map_err(csv_err)?;
    }
    wr.flush()?;
    drop(wr);
    Ok(out)
}

/// Parse a file written by [`wigner_csv`].
pub fn read_wigner_csv(text: &str) -> Result<WignerGrid> {
    let bad = |why: String| Error::Config(format!("Wigner CSV: {why}"));
    let body = text.strip_prefix('#').and_then(|t| t.split_once('\n')).map(|(_, b)| b).unwrap_or(text);
    let mut rd = csv::ReaderBuilder::new().has_headers(false).from_reader(body.as_bytes());
    let mut recs = rd.records();
    let parse = |s: &str, line: usize| s.trim().parse::<f64>().map_err(|e| bad(format!("line {line}: {e}")));
    let head = recs.next().ok_or_else(|| bad("missing header".into()))?.map_err(csv_err)?;
    let re: Vec<f64> = head.iter().skip(1).map(|s| parse(s, 2)).collect::<Result<_>>()?;
    let mut im = Vec::new();
    let mut vals = Vec::new();
    for (k, rec) in recs.enumerate() {
        let rec = rec.map_err(csv_err)?;
        let mut it = rec.iter();
        im.push(parse(it.next().unwrap_or(""), k + 3)?);
        let row: Vec<f64> = it.map(|s| parse(s, k + 3)).collect::<Result<_>>()?;
        if row.len() != re.len() {
            return Err(bad(format!("line {} has {} values, expected {}", k + 3, row.len(), re.len())));
        }
        vals.extend(row);
    }
    if re.is_empty() || im.is_empty() {
        return Err(bad("empty grid".into()));
    }
    let grid = PhaseGrid {
        re_min: re[0],
        re_max: *re.last().unwrap(),
        im_min: im[0],
        im_max: *im.last().unwrap(),
        n_re: re.len(),
        n_im: im.len(),
    };
    let values = ndarray::Array2::from_shape_vec((im.len(), re.len()), vals).expect("sizes checked");
    Ok(WignerGrid { grid, values, truncation_warning: None })
}

/// Wall time and file list of a run; kept out of the CSVs so those stay
/// byte-reproducible.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub scenario: String,
    pub config_hash: String,
    pub version: String,
    pub seed: Option<u64>,
    pub wall_time_s: f64,
    pub flagged_rows: usize,
    pub leakage_max: [f64; 2],
    pub files: Vec<String>,
    pub warnings: Vec<String>,
}

pub fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, bytes)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn table_csv_layout() {
        let mut t = Table::new("x", &["a", "b"]);
        t.push(vec![1.0, 0.5e-7], None).unwrap();
        t.push(vec![f64::NAN, 2.0], Some("leakage, 2e-3".into())).unwrap();
        assert!(t.push(vec![1.0], None).is_err());
        t.check_nan().unwrap();
        let s = String::from_utf8(t.to_csv(&json!({"k": 1})).unwrap()).unwrap();
        assert_eq!(s, "# {\"k\":1}\na,b,flag\n1,5e-8,\nNaN,2,\"leakage, 2e-3\"\n");
        assert_eq!(t.flagged_rows(), 1);
    }

    #[test]
    fn wigner_roundtrip() {
        let grid = PhaseGrid { re_min: -1.0, re_max: 1.0, im_min: 0.0, im_max: 0.5, n_re: 3, n_im: 2 };
        let values = ndarray::array![[0.1, 0.2, 0.3], [-0.4, 0.5, 1e-9]];
        let w = WignerGrid { grid, values, truncation_warning: None };
        let text = String::from_utf8(wigner_csv(&w, &json!({})).unwrap()).unwrap();
        assert!(text.lines().nth(1).unwrap().starts_with("im\\re,-1,0,1"));
        let back = read_wigner_csv(&text).unwrap();
        assert_eq!(back, w);
        assert!(read_wigner_csv("# {}\nim\\re,0\n").is_err());
    }
}
