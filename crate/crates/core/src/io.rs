//! File ingestion and persistence: JSON manifests, CSV matrices, and
//! embedding results.
//!
//! Files always hold one sample per row unless a manifest says
//! `"layout": "cols"`. Floats are written with Rust's shortest round-trip
//! formatting, so a save/load cycle reproduces every value bit for bit.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::{MultiViewDataset, ViewMatrix};
use crate::error::{Error, Result};
use crate::mrpe::{EmbeddingResult, MrpeConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Layout {
    /// One sample per row.
    #[default]
    #[serde(rename = "rows")]
    SamplesAsRows,
    /// One sample per column.
    #[serde(rename = "cols")]
    SamplesAsColumns,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewFile {
    pub name: String,
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(rename = "views")]
    pub view_files: Vec<ViewFile>,
    #[serde(rename = "labels", default)]
    pub labels_file: Option<PathBuf>,
    #[serde(default)]
    pub layout: Layout,
}

impl Manifest {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Skip the first line of every CSV file.
    pub header: bool,
    /// Z-score every feature after loading.
    pub standardize: bool,
}

/// Loads the dataset described by the manifest at `manifest_path`. Relative
/// paths inside the manifest resolve against the manifest's directory.
pub fn load_manifest_dataset(manifest_path: &Path, opts: LoadOptions) -> Result<MultiViewDataset> {
    let manifest = Manifest::from_path(manifest_path)?;
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    load_dataset(&manifest, base, opts)
}

pub fn load_dataset(
    manifest: &Manifest,
    base_dir: &Path,
    opts: LoadOptions,
) -> Result<MultiViewDataset> {
    if manifest.view_files.is_empty() {
        return Err(Error::Parse {
            path: base_dir.to_path_buf(),
            message: "manifest lists no views".into(),
        });
    }
    let mut views = Vec::with_capacity(manifest.view_files.len());
    for vf in &manifest.view_files {
        let path = base_dir.join(&vf.path);
        let raw = read_csv_matrix(&path, &vf.name, opts.header)?;
        let data = match manifest.layout {
            Layout::SamplesAsRows => raw.transpose(),
            Layout::SamplesAsColumns => raw,
        };
        views.push(ViewMatrix::new(vf.name.clone(), data)?);
    }
    let labels = manifest
        .labels_file
        .as_ref()
        .map(|p| read_labels(&base_dir.join(p), opts.header))
        .transpose()?;
    let ds = MultiViewDataset::new(views, labels)?;
    Ok(if opts.standardize {
        ds.standardized()
    } else {
        ds
    })
}

/// Writes every view as `<dir>/view<v>.csv` (one sample per row), the labels
/// as `<dir>/labels.csv`, and a manifest at `<dir>/manifest.json`.
pub fn save_dataset(ds: &MultiViewDataset, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut view_files = Vec::new();
    for (v, view) in ds.views().iter().enumerate() {
        let file = PathBuf::from(format!("view{v}.csv"));
        write_csv_matrix(&dir.join(&file), &view.data().transpose())?;
        view_files.push(ViewFile {
            name: view.name().to_string(),
            path: file,
        });
    }
    let labels_file = match ds.labels() {
        Some(labels) => {
            let file = PathBuf::from("labels.csv");
            write_labels(&dir.join(&file), labels)?;
            Some(file)
        }
        None => None,
    };
    let manifest = Manifest {
        view_files,
        labels_file,
        layout: Layout::SamplesAsRows,
    };
    let path = dir.join("manifest.json");
    manifest.write(&path)?;
    Ok(path)
}

/// Reads a headerless (or `header`-skipping) CSV of floats, rows as in file.
pub fn read_csv_matrix(path: &Path, view: &str, header: bool) -> Result<DMatrix<f64>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(header)
        .trim(csv::Trim::All)
        .from_reader(file);
    let parse_err = |message: String| Error::Parse {
        path: path.to_path_buf(),
        message,
    };
    let mut values = Vec::new();
    let mut ncols = None;
    let mut nrows = 0;
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| parse_err(e.to_string()))?;
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        match ncols {
            None => ncols = Some(record.len()),
            Some(c) if c != record.len() => {
                return Err(parse_err(format!(
                    "row {row} has {} fields, expected {c}",
                    record.len()
                )))
            }
            _ => {}
        }
        for (col, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                parse_err(format!(
                    "row {row}, column {col}: '{field}' is not a number"
                ))
            })?;
            if !v.is_finite() {
                return Err(Error::NonFiniteValue {
                    view: view.to_string(),
                    row,
                    col,
                });
            }
            values.push(v);
        }
        nrows += 1;
    }
    let ncols = ncols.ok_or_else(|| parse_err("file contains no data".into()))?;
    Ok(DMatrix::from_row_slice(nrows, ncols, &values))
}

pub fn write_csv_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut line = String::new();
    for row in m.row_iter() {
        line.clear();
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                line.push(',');
            }
            line.push_str(&v.to_string());
        }
        line.push('\n');
        w.write_all(line.as_bytes())
            .map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// One integer label per line; extra columns are ignored.
pub fn read_labels(path: &Path, header: bool) -> Result<Vec<i64>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut labels = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let field = record.get(0).unwrap_or("");
        if field.is_empty() {
            continue;
        }
        labels.push(field.parse().map_err(|_| Error::Parse {
            path: path.to_path_buf(),
            message: format!("row {row}: '{field}' is not an integer label"),
        })?);
    }
    Ok(labels)
}

pub fn write_labels(path: &Path, labels: &[i64]) -> Result<()> {
    let mut out = String::with_capacity(labels.len() * 3);
    for l in labels {
        out.push_str(&l.to_string());
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub const EMBEDDING_FILE: &str = "embedding.csv";
pub const META_FILE: &str = "meta.json";
pub const TIMING_FILE: &str = "timing.json";

/// Everything in an [`EmbeddingResult`] except the coordinates and timings,
/// so that reruns write identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingMeta {
    pub alpha: Vec<f64>,
    pub objective_trace: Vec<f64>,
    pub alpha_trace: Vec<Vec<f64>>,
    pub per_view_traces: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    pub iters_run: usize,
    pub converged: bool,
    pub degenerate_subspace: bool,
    pub config: MrpeConfig,
    /// Free-form run description echoed by front ends.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run: Option<serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingMeta {
    pub wall_time_seconds: f64,
    pub iteration_seconds: Vec<f64>,
}

/// Writes `embedding.csv` (one sample per row), `meta.json` and
/// `timing.json` into `dir`.
pub fn save_embedding(
    result: &EmbeddingResult,
    dir: &Path,
    run: Option<serde_json::Value>,
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_csv_matrix(&dir.join(EMBEDDING_FILE), &result.y.transpose())?;
    let meta = EmbeddingMeta {
        alpha: result.alpha.clone(),
        objective_trace: result.objective_trace.clone(),
        alpha_trace: result.alpha_trace.clone(),
        per_view_traces: result.per_view_traces.clone(),
        eigenvalues: result.eigenvalues.clone(),
        iters_run: result.iters_run,
        converged: result.converged,
        degenerate_subspace: result.degenerate_subspace,
        config: result.config.clone(),
        run,
    };
    write_json(&dir.join(META_FILE), &meta)?;
    let timing = TimingMeta {
        wall_time_seconds: result.wall_time_seconds,
        iteration_seconds: result.iteration_seconds.clone(),
    };
    write_json(&dir.join(TIMING_FILE), &timing)
}

pub fn load_embedding(dir: &Path) -> Result<(EmbeddingResult, Option<serde_json::Value>)> {
    let y = read_csv_matrix(&dir.join(EMBEDDING_FILE), "embedding", false)?.transpose();
    let meta: EmbeddingMeta = read_json(&dir.join(META_FILE))?;
    let timing_path = dir.join(TIMING_FILE);
    let timing = if timing_path.exists() {
        read_json(&timing_path)?
    } else {
        TimingMeta {
            wall_time_seconds: 0.0,
            iteration_seconds: Vec::new(),
        }
    };
    let result = EmbeddingResult {
        y,
        alpha: meta.alpha,
        objective_trace: meta.objective_trace,
        alpha_trace: meta.alpha_trace,
        per_view_traces: meta.per_view_traces,
        eigenvalues: meta.eigenvalues,
        iters_run: meta.iters_run,
        converged: meta.converged,
        degenerate_subspace: meta.degenerate_subspace,
        wall_time_seconds: timing.wall_time_seconds,
        iteration_seconds: timing.iteration_seconds,
        config: meta.config,
    };
    Ok((result, meta.run))
}

/// Reads an embedding CSV (one sample per row) as a `d x n` matrix.
pub fn read_embedding_csv(path: &Path) -> Result<DMatrix<f64>> {
    Ok(read_csv_matrix(path, "embedding", false)?.transpose())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let json = serde_json::to_string_pretty(value).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}
