//! CSV output. Numbers use Rust's shortest round-trip formatting so reruns
//! with the same configuration produce identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::domain::ParameterPoint;
use crate::error::Result;
use crate::greedy::{IterationRecord, OfflineReport};

/// Builds a CSV document: `#` provenance lines, a header row, data rows.
#[derive(Debug, Clone, Default)]
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(provenance: &[(&str, String)], columns: &[&str]) -> Self {
        let mut text = String::new();
        for (k, v) in provenance {
            let _ = writeln!(text, "# {k} = {v}");
        }
        text.push_str(&columns.join(","));
        text.push('\n');
        Self { text }
    }

    pub fn row<I, T>(&mut self, cells: I)
    where
        I: IntoIterator<Item = T>,
        T: std::fmt::Display,
    {
        let mut first = true;
        for c in cells {
            if !first {
                self.text.push(',');
            }
            first = false;
            let _ = write!(self.text, "{c}");
        }
        self.text.push('\n');
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, &self.text)?;
        Ok(())
    }
}

/// Shortest round-trip text for a float, with an exponent for very large or
/// small magnitudes.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

fn coord_columns(prefix: &str, p: usize) -> Vec<String> {
    (1..=p).map(|i| format!("{prefix}{i}")).collect()
}

pub fn convergence_csv(provenance: &[(&str, String)], history: &[IterationRecord]) -> Csv {
    let mut csv = Csv::new(provenance, &["iteration", "K", "max_err", "eta_evals", "train_size"]);
    for r in history {
        csv.row([r.iteration.to_string(), r.samples.to_string(), num(r.max_err), r.eta_evals.to_string(), r.train_size.to_string()]);
    }
    csv
}

pub fn samples_csv(provenance: &[(&str, String)], points: &[ParameterPoint]) -> Csv {
    let p = points.first().map_or(0, ParameterPoint::dim);
    let mut cols = vec!["index".to_string()];
    cols.extend(coord_columns("mu", p));
    let cols: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut csv = Csv::new(provenance, &cols);
    for (i, pt) in points.iter().enumerate() {
        csv.row(std::iter::once(i.to_string()).chain(pt.coords().iter().copied().map(num)));
    }
    csv
}

pub fn radii_csv(provenance: &[(&str, String)], report: &OfflineReport) -> Csv {
    let p = report.train.points.first().map_or(0, ParameterPoint::dim);
    let mut cols = coord_columns("mu", p);
    cols.push("radius".into());
    cols.push("error".into());
    let cols: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut csv = Csv::new(provenance, &cols);
    for ((pt, r), e) in report.train.points.iter().zip(&report.radii).zip(&report.errors) {
        csv.row(pt.coords().iter().chain([r, e]).copied().map(num));
    }
    csv
}

pub fn metric_csv(provenance: &[(&str, String)], report: &OfflineReport) -> Csv {
    let p = report.train.points.first().map_or(0, ParameterPoint::dim);
    let mut cols = coord_columns("mu", p);
    for j in 0..p {
        for i in 0..p {
            cols.push(format!("m{}{}", i + 1, j + 1));
        }
    }
    let cols: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut csv = Csv::new(provenance, &cols);
    for (pt, m) in report.train.points.iter().zip(&report.tensors) {
        csv.row(pt.coords().iter().chain(m.as_slice()).copied().map(num));
    }
    csv
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let mut c = Csv::new(&[("seed", "7".into())], &["a", "b"]);
        c.row([num(0.1), num(1e-300)]);
        assert_eq!(c.as_str(), "# seed = 7\na,b\n0.1,1e-300\n");
    }

    #[test]
    fn floats_round_trip() {
        for x in [0.1f64 + 0.2, 1.0 / 3.0, 6.02214076e23, -0.0, 5e-324] {
            let s = num(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }

    #[test]
    fn samples_have_coordinates() {
        let pts = vec![ParameterPoint::new(vec![0.5, -0.25])];
        let c = samples_csv(&[], &pts);
        assert_eq!(c.as_str(), "index,mu1,mu2\n0,0.5,-0.25\n");
    }
}
