//! `report.json` and per-`k` spectrum CSV files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::error::Result;
use crate::linalg::C64;
use crate::operators::{degree_weights, Layout};

/// One line of `spectrum_k{K}.csv`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectrumRow {
    pub k: u32,
    pub index: usize,
    pub eigenvalue: f64,
    /// `even` / `odd` by the larger weight, empty when no vector was formed.
    pub parity: String,
    /// Form degree carrying the largest weight, `None` without a vector.
    pub degree: Option<usize>,
}

pub const CSV_HEADER: &str = "k,index,eigenvalue,parity,degree";

/// Rows for eigenvalues with optional eigenvectors on `layout`.
pub fn spectrum_rows(k: u32, values: &[f64], vectors: Option<&[Vec<C64>]>, layout: &Layout) -> Vec<SpectrumRow> {
    values
        .iter()
        .enumerate()
        .map(|(index, &eigenvalue)| {
            let (parity, degree) = match vectors.and_then(|v| v.get(index)) {
                Some(v) => {
                    let w = degree_weights(layout, v);
                    let even: f64 = w.iter().step_by(2).sum();
                    let odd: f64 = w.iter().skip(1).step_by(2).sum();
                    let top = (0..w.len()).max_by(|&a, &b| w[a].total_cmp(&w[b])).unwrap_or(0);
                    ((if even >= odd { "even" } else { "odd" }).to_string(), Some(top))
                }
                None => (String::new(), None),
            };
            SpectrumRow { k, index, eigenvalue, parity, degree }
        })
        .collect()
}

pub fn to_csv(rows: &[SpectrumRow]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in rows {
        let degree = r.degree.map(|d| d.to_string()).unwrap_or_default();
        let _ = writeln!(s, "{},{},{:.17e},{},{}", r.k, r.index, r.eigenvalue, r.parity, degree);
    }
    s
}

/// Pretty JSON with sorted keys and a trailing newline.
pub fn to_json(report: &Value) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report)?;
    s.push('\n');
    Ok(s)
}

/// Write `report.json` and the CSV files into `dir`, creating it if needed.
pub fn write_report(dir: &Path, report: &Value, spectra: &[(u32, Vec<SpectrumRow>)]) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("report.json"), to_json(report)?)?;
    for (k, rows) in spectra {
        fs::write(dir.join(format!("spectrum_k{k}.csv")), to_csv(rows))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let layout = Layout { sites: 1, rank_e: 1, fiber_degrees: vec![0, 1] };
        let v = vec![vec![C64::new(0.1, 0.0), C64::new(1.0, 0.0)]];
        let rows = spectrum_rows(3, &[0.5, 2.0], Some(&v), &layout);
        assert_eq!(rows[0].parity, "odd");
        assert_eq!(rows[0].degree, Some(1));
        assert_eq!(rows[1].degree, None);
        let csv = to_csv(&rows);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(CSV_HEADER));
        assert_eq!(lines.next(), Some("3,0,5.00000000000000000e-1,odd,1"));
        assert_eq!(lines.next(), Some("3,1,2.00000000000000000e0,,"));
    }

    #[test]
    fn json_keys_are_sorted() {
        let v = serde_json::json!({"status": "pass", "config": {"b": 1, "a": 2}});
        let s = to_json(&v).unwrap();
        assert!(s.find("config").unwrap() < s.find("status").unwrap());
        assert!(s.find("\"a\"").unwrap() < s.find("\"b\"").unwrap());
    }
}
