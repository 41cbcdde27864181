//! File formats: dataset CSV, model JSON, report JSON/CSV.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{Dataset, LabeledSample, Provenance};
use crate::kernel::{KernelSpec, Point};
use crate::solver::DualPredictor;

pub const FORMAT_VERSION: u32 = 1;

/// Writes `x1,...,xd,y` rows with floats in shortest round-trip form.
pub fn write_dataset(path: &Path, data: &Dataset) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    let dim = data.dim().unwrap_or(0);
    let header: Vec<String> = (1..=dim).map(|i| format!("x{i}")).chain(std::iter::once("y".into())).collect();
    writeln!(out, "{}", header.join(","))?;
    for s in data.samples() {
        for c in s.x.coords() {
            write!(out, "{c},")?;
        }
        writeln!(out, "{}", s.y)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path).map_err(csv_error)?;
    let header = reader.headers().map_err(csv_error)?.clone();
    let n = header.len();
    let expected: Vec<String> = (1..n).map(|i| format!("x{i}")).chain(std::iter::once("y".into())).collect();
    if n < 2 || header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(Error::Parse { line: 1, message: format!("expected header {}", expected.join(",")) });
    }
    let mut samples = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line());
        let bad = |message: String| Error::Parse { line, message };
        let coords = record
            .iter()
            .take(n - 1)
            .map(|f| f.trim().parse::<f64>().map_err(|e| bad(format!("coordinate {f:?}: {e}"))))
            .collect::<Result<Vec<f64>>>()?;
        let y = match record.get(n - 1).map(str::trim) {
            Some("0") => 0,
            Some("1") => 1,
            other => return Err(bad(format!("label must be 0 or 1, got {other:?}"))),
        };
        let x = Point::new(coords).map_err(|e| bad(e.to_string()))?;
        samples.push(LabeledSample { x, y });
    }
    Dataset::new(samples, Provenance::File(path.to_path_buf()))
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        kind => Error::Parse { line, message: format!("{kind:?}") },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub seed: u64,
    pub objective: f64,
    pub iters_used: usize,
    pub constraint_active: bool,
}

/// On-disk form of a [`DualPredictor`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub nu: f64,
    #[serde(rename = "B")]
    pub b: f64,
    pub alpha: Vec<f64>,
    pub anchors: Vec<Vec<f64>>,
    pub metadata: ModelMetadata,
}

impl ModelFile {
    pub fn from_predictor(p: &DualPredictor, metadata: ModelMetadata) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            nu: p.spec().nu,
            b: p.b_budget(),
            alpha: p.alpha().to_vec(),
            anchors: p.anchors().iter().map(|a| a.coords().to_vec()).collect(),
            metadata,
        }
    }

    pub fn into_predictor(self) -> Result<DualPredictor> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::InvalidInput(format!("unsupported model format version {}", self.format_version)));
        }
        let anchors = self.anchors.into_iter().map(Point::new).collect::<Result<Vec<_>>>()?;
        DualPredictor::new(self.alpha, anchors, KernelSpec::new(self.nu)?, self.b)
    }
}

/// Pretty JSON followed by a newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

pub fn read_model(path: &Path) -> Result<DualPredictor> {
    let file: ModelFile = serde_json::from_reader(std::io::BufReader::new(File::open(path)?))?;
    file.into_predictor()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn malformed_rows_report_their_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        std::fs::write(&path, "x1,x2,y\n0.1,0.2,1\n0.3,abc,0\n").unwrap();
        match read_dataset(&path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
        std::fs::write(&path, "x1,x2,y\n0.1,0.2,1\n0.3,0.1,2\n").unwrap();
        assert!(matches!(read_dataset(&path), Err(Error::Parse { line: 3, .. })));
        std::fs::write(&path, "x1,x2,y\n0.9,0.9,1\n").unwrap();
        assert!(matches!(read_dataset(&path), Err(Error::Parse { line: 2, .. })));
        std::fs::write(&path, "a,b\n0.1,1\n").unwrap();
        assert!(matches!(read_dataset(&path), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn dataset_csv_round_trips_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let samples = vec![
            LabeledSample { x: Point::new(vec![0.1, -1.0 / 3.0]).unwrap(), y: 1 },
            LabeledSample { x: Point::new(vec![5e-324, std::f64::consts::FRAC_1_SQRT_2]).unwrap(), y: 0 },
        ];
        let data = Dataset::new(samples, Provenance::File(path.clone())).unwrap();
        write_dataset(&path, &data).unwrap();
        assert_eq!(read_dataset(&path).unwrap(), data);
    }
}
