//! Dataset files, standardization and train/test splitting.
//!
//! A dataset file is a JSON header next to a payload file:
//!
//! ```json
//! {
//!   "n_samples": 1000,
//!   "total_dim": 3,
//!   "partition": [1, 1, 1],
//!   "columns": ["a", "b", "c"],
//!   "standardization": null,
//!   "payload": { "format": "csv", "path": "data.csv" }
//! }
//! ```
//!
//! The payload path is resolved relative to the header. `csv` payloads carry
//! a header row; `f32le`/`f64le` payloads are raw row-major little-endian
//! matrices. A bare `.csv` file can also be loaded directly, one variable per
//! column unless a partition is supplied.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::RngStream;
use crate::systems::{Dataset, Standardization, VariablePartition};

/// Columns whose standard deviation is at or below this are rejected.
pub const MIN_COLUMN_STD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PayloadFormat {
    Csv,
    F32le,
    #[default]
    F64le,
}

impl PayloadFormat {
    fn extension(self) -> &'static str {
        match self {
            PayloadFormat::Csv => "csv",
            PayloadFormat::F32le => "f32",
            PayloadFormat::F64le => "f64",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Payload {
    pub format: PayloadFormat,
    pub path: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub n_samples: usize,
    pub total_dim: usize,
    pub partition: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub columns: Option<Vec<String>>,
    #[serde(default)]
    pub standardization: Option<Standardization>,
    pub payload: Payload,
}

/// Writes `data` as `<path>` (header) plus a sidecar payload with the same
/// stem. Returns the payload path.
pub fn save(data: &Dataset, path: &Path, format: PayloadFormat, columns: Option<Vec<String>>) -> Result<PathBuf> {
    let d = data.total_dim();
    if let Some(c) = &columns {
        if c.len() != d {
            return Err(Error::Shape(format!("{} column names for {d} columns", c.len())));
        }
    }
    let payload_path = path.with_extension(format.extension());
    let payload_name = payload_path
        .file_name()
        .and_then(|s| s.to_str())
        .ok_or_else(|| Error::Config(format!("invalid dataset path {}", path.display())))?
        .to_string();
    match format {
        PayloadFormat::Csv => {
            let names = columns.clone().unwrap_or_else(|| default_columns(d));
            let mut w = csv::Writer::from_path(&payload_path)?;
            w.write_record(&names)?;
            for row in data.samples.rows() {
                w.write_record(row.iter().map(|v| v.to_string()))?;
            }
            w.flush().map_err(|e| Error::io(&payload_path, e))?;
        }
        PayloadFormat::F32le => {
            let bytes: Vec<u8> = data.samples.iter().flat_map(|&v| (v as f32).to_le_bytes()).collect();
            fs::write(&payload_path, bytes).map_err(|e| Error::io(&payload_path, e))?;
        }
        PayloadFormat::F64le => {
            let bytes: Vec<u8> = data.samples.iter().flat_map(|&v| v.to_le_bytes()).collect();
            fs::write(&payload_path, bytes).map_err(|e| Error::io(&payload_path, e))?;
        }
    }
    let header = DatasetHeader {
        n_samples: data.n_samples(),
        total_dim: d,
        partition: data.partition.dims().to_vec(),
        columns,
        standardization: data.standardization.clone(),
        payload: Payload {
            format,
            path: payload_name,
        },
    };
    let json = serde_json::to_string_pretty(&header)?;
    fs::write(path, json).map_err(|e| Error::io(path, e))?;
    Ok(payload_path)
}

fn default_columns(d: usize) -> Vec<String> {
    (0..d).map(|c| format!("x{c}")).collect()
}

/// Loads a dataset from a JSON header or a bare CSV file. `partition`
/// overrides the stored one (or the one-variable-per-column default).
pub fn load(path: &Path, partition: Option<VariablePartition>) -> Result<Dataset> {
    let is_csv = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if is_csv {
        let (samples, _) = read_csv(path, None)?;
        let partition = match partition {
            Some(p) => p,
            None => VariablePartition::uniform(samples.ncols(), 1)?,
        };
        return build(samples, partition, None, path);
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let header: DatasetHeader =
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: malformed header: {e}", path.display())))?;
    let payload = path.parent().unwrap_or(Path::new(".")).join(&header.payload.path);
    let (n, d) = (header.n_samples, header.total_dim);
    let samples = match header.payload.format {
        PayloadFormat::Csv => {
            let (s, _) = read_csv(&payload, Some(d))?;
            if s.nrows() != n {
                return Err(Error::Format(format!(
                    "{}: header declares {n} rows, payload has {}",
                    path.display(),
                    s.nrows()
                )));
            }
            s
        }
        PayloadFormat::F32le | PayloadFormat::F64le => {
            let bytes = fs::read(&payload).map_err(|e| Error::io(&payload, e))?;
            let width = if header.payload.format == PayloadFormat::F32le { 4 } else { 8 };
            if bytes.len() != n * d * width {
                return Err(Error::Format(format!(
                    "{}: expected {} bytes for {n}x{d} values, found {}",
                    payload.display(),
                    n * d * width,
                    bytes.len()
                )));
            }
            let vals: Vec<f64> = if width == 4 {
                bytes
                    .chunks_exact(4)
                    .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")) as f64)
                    .collect()
            } else {
                bytes
                    .chunks_exact(8)
                    .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
                    .collect()
            };
            Array2::from_shape_vec((n, d), vals).map_err(|e| Error::Format(e.to_string()))?
        }
    };
    let partition = match partition {
        Some(p) => p,
        None => VariablePartition::new(header.partition.clone())?,
    };
    build(samples, partition, header.standardization, path)
}

fn build(
    samples: Array2<f64>,
    partition: VariablePartition,
    standardization: Option<Standardization>,
    path: &Path,
) -> Result<Dataset> {
    if partition.total_dim() != samples.ncols() {
        return Err(Error::Shape(format!(
            "{}: partition {:?} covers {} columns, file has {}",
            path.display(),
            partition.dims(),
            partition.total_dim(),
            samples.ncols()
        )));
    }
    let mut data = Dataset::new(samples, partition)?;
    data.standardization = standardization;
    Ok(data)
}

fn read_csv(path: &Path, expect_cols: Option<usize>) -> Result<(Array2<f64>, Vec<String>)> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let names: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let d = names.len();
    if let Some(e) = expect_cols {
        if e != d {
            return Err(Error::Format(format!(
                "{}: header declares {e} columns, CSV has {d}",
                path.display()
            )));
        }
    }
    let mut vals = Vec::new();
    let mut rows = 0;
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != d {
            return Err(Error::Format(format!(
                "{}: row {i} has {} fields, expected {d}",
                path.display(),
                rec.len()
            )));
        }
        for (c, field) in rec.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::Format(format!("{}: row {i}, column {c}: cannot parse {field:?}", path.display()))
            })?;
            if !v.is_finite() {
                return Err(Error::NonFinite(format!(
                    "{}: row {i}, column {c} ({}) is {v}",
                    path.display(),
                    names[c]
                )));
            }
            vals.push(v);
        }
        rows += 1;
    }
    let m = Array2::from_shape_vec((rows, d), vals).map_err(|e| Error::Format(e.to_string()))?;
    Ok((m, names))
}

/// Zero-mean, unit-variance columns. The returned record maps the original
/// values to the standardized ones; if `data` was already standardized the
/// records compose.
pub fn standardize(data: &Dataset) -> Result<(Dataset, Standardization)> {
    let m = data.n_samples();
    if m == 0 {
        return Err(Error::InvalidArgument("cannot standardize an empty dataset".into()));
    }
    let mean = data.samples.mean_axis(Axis(0)).expect("non-empty");
    let var = data.samples.var_axis(Axis(0), 0.0);
    let scale = var.mapv(f64::sqrt);
    if let Some((column, &std)) = scale.iter().enumerate().find(|(_, &s)| !(s > MIN_COLUMN_STD)) {
        return Err(Error::ConstantColumn { column, std });
    }
    let samples = (&data.samples - &mean) / &scale;
    let record = match &data.standardization {
        None => Standardization {
            mean: mean.to_vec(),
            scale: scale.to_vec(),
        },
        Some(prev) => Standardization {
            mean: (0..mean.len()).map(|c| prev.mean[c] + prev.scale[c] * mean[c]).collect(),
            scale: (0..mean.len()).map(|c| prev.scale[c] * scale[c]).collect(),
        },
    };
    let out = Dataset {
        samples,
        partition: data.partition.clone(),
        standardization: Some(record.clone()),
    };
    Ok((out, record))
}

/// Applies a recorded standardization (e.g. the training set's) to raw data.
pub fn apply_standardization(data: &Dataset, record: &Standardization) -> Result<Dataset> {
    let (mean, scale) = record_arrays(record, data.total_dim())?;
    Ok(Dataset {
        samples: (&data.samples - &mean) / &scale,
        partition: data.partition.clone(),
        standardization: Some(record.clone()),
    })
}

/// Undoes the dataset's recorded standardization.
pub fn unstandardize(data: &Dataset) -> Result<Dataset> {
    let Some(record) = &data.standardization else {
        return Ok(data.clone());
    };
    let (mean, scale) = record_arrays(record, data.total_dim())?;
    Ok(Dataset {
        samples: &data.samples * &scale + &mean,
        partition: data.partition.clone(),
        standardization: None,
    })
}

fn record_arrays(record: &Standardization, d: usize) -> Result<(Array1<f64>, Array1<f64>)> {
    if record.mean.len() != d || record.scale.len() != d {
        return Err(Error::Shape(format!(
            "standardization record has {}/{} entries for {d} columns",
            record.mean.len(),
            record.scale.len()
        )));
    }
    if record.scale.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::InvalidArgument("standardization scales must be positive".into()));
    }
    Ok((Array1::from(record.mean.clone()), Array1::from(record.scale.clone())))
}

/// Random disjoint split with `round(fraction · M)` training rows.
pub fn split(data: &Dataset, train_fraction: f64, rng: &mut RngStream) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let m = data.n_samples();
    let mut idx: Vec<usize> = (0..m).collect();
    rng.shuffle(&mut idx);
    let n_train = (train_fraction * m as f64).round() as usize;
    Ok((data.rows(&idx[..n_train]), data.rows(&idx[n_train..])))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn toy(m: usize) -> Dataset {
        let mut rng = RngStream::new(3, 0);
        Dataset::new(rng.normal_matrix(m, 3), VariablePartition::uniform(3, 1).unwrap()).unwrap()
    }

    #[test]
    fn binary_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let data = toy(50);
        let path = dir.path().join("d.json");
        save(&data, &path, PayloadFormat::F64le, None).unwrap();
        let back = load(&path, None).unwrap();
        assert_eq!(back.samples, data.samples);
        assert_eq!(back.partition, data.partition);
    }

    #[test]
    fn f32_payload_loses_only_precision() {
        let dir = tempfile::tempdir().unwrap();
        let data = toy(20);
        let path = dir.path().join("d.json");
        save(&data, &path, PayloadFormat::F32le, None).unwrap();
        let back = load(&path, None).unwrap();
        let diff = (&back.samples - &data.samples).mapv(f64::abs);
        assert!(diff.iter().all(|&d| d < 1e-6));
    }

    #[test]
    fn csv_round_trip_and_bare_csv() {
        let dir = tempfile::tempdir().unwrap();
        let data = toy(30);
        let path = dir.path().join("d.json");
        let payload = save(&data, &path, PayloadFormat::Csv, Some(vec!["a".into(), "b".into(), "c".into()])).unwrap();
        let back = load(&path, None).unwrap();
        for (a, b) in back.samples.iter().zip(data.samples.iter()) {
            assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0));
        }
        let bare = load(&payload, None).unwrap();
        assert_eq!(bare.partition.n_vars(), 3);
        assert_eq!(bare.total_dim(), 3);
        let wrong = VariablePartition::new(vec![2, 2]).unwrap();
        assert!(load(&payload, Some(wrong)).is_err());
    }

    #[test]
    fn bad_files_are_diagnosed() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        fs::write(&p, "a,b\n1,2\n3,NaN\n").unwrap();
        let err = load(&p, None).unwrap_err().to_string();
        assert!(err.contains("row 1") && err.contains("column 1"), "{err}");
        fs::write(&p, "a,b\n1,2\n3,x\n").unwrap();
        assert!(matches!(load(&p, None), Err(Error::Format(_))));
        let h = dir.path().join("h.json");
        fs::write(&h, "{ not json").unwrap();
        assert!(matches!(load(&h, None), Err(Error::Format(_))));
        let data = toy(10);
        save(&data, &h, PayloadFormat::F64le, None).unwrap();
        fs::write(h.with_extension("f64"), [0u8; 16]).unwrap();
        assert!(matches!(load(&h, None), Err(Error::Format(_))));
    }

    #[test]
    fn standardization_moments_and_inverse() {
        let mut rng = RngStream::new(9, 0);
        let z = rng.normal_matrix(20_000, 2);
        let x = z.mapv(|v| 5.0 + 2.0 * v);
        let data = Dataset::new(x, VariablePartition::uniform(2, 1).unwrap()).unwrap();
        let (s, rec) = standardize(&data).unwrap();
        assert!((rec.mean[0] - 5.0).abs() < 0.05 && (rec.scale[0] - 2.0).abs() < 0.05);
        let m = s.samples.mean_axis(Axis(0)).unwrap();
        let v = s.samples.var_axis(Axis(0), 0.0);
        assert_abs_diff_eq!(m[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v[1], 1.0, epsilon = 1e-12);
        let back = unstandardize(&s).unwrap();
        let err = (&back.samples - &data.samples).mapv(f64::abs).fold(0.0f64, |a, &b| a.max(b));
        assert!(err < 1e-9);
        let again = apply_standardization(&data, &rec).unwrap();
        assert_eq!(again.samples, s.samples);
    }

    #[test]
    fn already_standard_data_keeps_its_values() {
        let (s, _) = standardize(&toy(1000)).unwrap();
        let (s2, rec2) = standardize(&s).unwrap();
        let d = (&s2.samples - &s.samples).mapv(f64::abs).fold(0.0f64, |a, &b| a.max(b));
        assert!(d < 1e-12);
        assert!(rec2.scale.iter().zip(&s.standardization.unwrap().scale).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn constant_column_is_named() {
        let x = array![[1.0, 2.0], [1.0, 3.0], [1.0, 4.0]];
        let data = Dataset::new(x, VariablePartition::uniform(2, 1).unwrap()).unwrap();
        assert!(matches!(standardize(&data), Err(Error::ConstantColumn { column: 0, .. })));
    }

    #[test]
    fn split_sizes_and_coverage() {
        let m = 100_000;
        let samples = Array2::from_shape_fn((m, 1), |(r, _)| r as f64);
        let data = Dataset::new(samples, VariablePartition::uniform(1, 1).unwrap()).unwrap();
        let (a, b) = split(&data, 0.9, &mut RngStream::new(1, 0)).unwrap();
        assert_eq!((a.n_samples(), b.n_samples()), (90_000, 10_000));
        let (a2, _) = split(&data, 0.9, &mut RngStream::new(1, 0)).unwrap();
        assert_eq!(a.samples, a2.samples);
        let mut all: Vec<usize> = a.samples.iter().chain(b.samples.iter()).map(|&v| v as usize).collect();
        all.sort_unstable();
        assert_eq!(all, (0..m).collect::<Vec<_>>());
        assert!(split(&data, 1.0, &mut RngStream::new(1, 0)).is_err());
    }
}
