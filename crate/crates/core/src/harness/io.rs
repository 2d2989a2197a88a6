//! File formats.
//!
//! - Feature CSV: UTF-8, `,` separator, `.` decimal. An optional header row
//!   (first cell not numeric) is skipped. An optional last column holds
//!   `;`-separated class names.
//! - Gram CSV: a `# gram N=<n>` line followed by n rows of n values.
//! - Results, reports and embeddings: pretty-printed JSON.
//!
//! Every write goes to a temporary file in the target directory which is
//! then renamed over the destination.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::{ClusteringResult, ConvergedBy, SolverConfig};
use crate::error::{OkmError, Result};
use crate::eval::{LabelSets, Scores};
use crate::kernels::GramMatrix;
use crate::model::{DataMatrix, MembershipMatrix};
use crate::projection::Embedding2D;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelColumn {
    /// Every column is a feature.
    Absent,
    /// The last column is the label column.
    Last,
    /// The last column is the label column iff some cell in it is not a number.
    Detect,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub data: DataMatrix,
    pub labels: Option<LabelSets>,
    /// Class names, indexed by class id.
    pub label_names: Vec<String>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> OkmError + '_ {
    move |source| OkmError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn parse_err(path: &Path, line: usize, column: usize, message: impl Into<String>) -> OkmError {
    OkmError::Parse {
        path: path.to_path_buf(),
        line,
        column,
        message: message.into(),
    }
}

fn is_number(cell: &str) -> bool {
    cell.parse::<f64>().is_ok()
}

pub fn load_csv(path: &Path, label_column: LabelColumn) -> Result<Dataset> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_csv(path, &text, label_column)
}

fn parse_csv(path: &Path, text: &str, label_column: LabelColumn) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let mut records: Vec<(usize, Vec<String>)> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(path, line, 0, e.to_string())
        })?;
        let line = record.position().map_or(records.len() + 1, |p| p.line() as usize);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        records.push((line, record.iter().map(str::to_owned).collect()));
    }
    if let Some((line, first)) = records.first() {
        if !is_number(&first[0]) {
            log::info!("{}: skipping header row at line {line}", path.display());
            records.remove(0);
        }
    }
    let Some((_, first)) = records.first() else {
        return Err(OkmError::Format {
            path: path.to_path_buf(),
            message: "no data rows".into(),
        });
    };
    let width = first.len();
    for (line, cells) in &records {
        if cells.len() != width {
            return Err(parse_err(
                path,
                *line,
                cells.len().min(width) + 1,
                format!("expected {width} fields, found {}", cells.len()),
            ));
        }
    }

    let has_labels = match label_column {
        LabelColumn::Absent => false,
        LabelColumn::Last => true,
        LabelColumn::Detect => records.iter().any(|(_, cells)| !is_number(&cells[width - 1])),
    };
    let features = if has_labels { width - 1 } else { width };
    if features == 0 {
        return Err(OkmError::Format {
            path: path.to_path_buf(),
            message: "no feature columns".into(),
        });
    }

    let mut values = Vec::with_capacity(records.len() * features);
    let mut label_names: Vec<String> = Vec::new();
    let mut label_ids: HashMap<String, usize> = HashMap::new();
    let mut sets = Vec::new();
    for (line, cells) in &records {
        for (col, cell) in cells.iter().take(features).enumerate() {
            let v: f64 = cell
                .parse()
                .map_err(|_| parse_err(path, *line, col + 1, format!("`{cell}` is not a number")))?;
            if !v.is_finite() {
                return Err(parse_err(path, *line, col + 1, format!("`{cell}` is not finite")));
            }
            values.push(v);
        }
        if has_labels {
            let mut set = Vec::new();
            for name in cells[width - 1].split(';').map(str::trim).filter(|s| !s.is_empty()) {
                let next = label_names.len();
                let id = *label_ids.entry(name.to_owned()).or_insert_with(|| {
                    label_names.push(name.to_owned());
                    next
                });
                set.push(id);
            }
            if set.is_empty() {
                return Err(parse_err(path, *line, width, "object has an empty label set"));
            }
            sets.push(set);
        }
    }

    Ok(Dataset {
        data: DataMatrix::new(records.len(), features, values)?,
        labels: if has_labels { Some(LabelSets::new(sets)?) } else { None },
        label_names,
    })
}

/// Write a dataset as feature CSV with a header row. Labels, if any, are
/// written by name (`label_names[id]`, or the id itself when unnamed).
pub fn write_csv(path: &Path, dataset: &Dataset) -> Result<()> {
    let data = &dataset.data;
    let mut out = String::new();
    let header: Vec<String> = (0..data.cols()).map(|j| format!("x{j}")).collect();
    out.push_str(&header.join(","));
    if dataset.labels.is_some() {
        out.push_str(",labels");
    }
    out.push('\n');
    for (i, row) in data.iter_rows().enumerate() {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&cells.join(","));
        if let Some(labels) = &dataset.labels {
            let names: Vec<String> = labels
                .get(i)
                .iter()
                .map(|&id| dataset.label_names.get(id).cloned().unwrap_or_else(|| id.to_string()))
                .collect();
            out.push(',');
            out.push_str(&names.join(";"));
        }
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

pub fn write_gram(path: &Path, k: &GramMatrix) -> Result<()> {
    let mut out = format!("# gram N={}\n", k.n());
    for i in 0..k.n() {
        let cells: Vec<String> = k.row(i).iter().map(|v| v.to_string()).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

pub fn load_gram(path: &Path) -> Result<GramMatrix> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| OkmError::Format {
        path: path.to_path_buf(),
        message: "empty gram file".into(),
    })?;
    let n: usize = header
        .trim()
        .strip_prefix("# gram N=")
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| parse_err(path, 1, 1, "expected header `# gram N=<n>`"))?;

    let mut values = Vec::with_capacity(n * n);
    let mut rows = 0;
    for (idx, line) in lines {
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != n {
            return Err(parse_err(
                path,
                idx + 1,
                cells.len().min(n) + 1,
                format!("expected {n} fields, found {}", cells.len()),
            ));
        }
        for (col, cell) in cells.iter().enumerate() {
            let v: f64 = cell
                .parse()
                .map_err(|_| parse_err(path, idx + 1, col + 1, format!("`{cell}` is not a number")))?;
            values.push(v);
        }
        rows += 1;
    }
    if rows != n {
        return Err(OkmError::Format {
            path: path.to_path_buf(),
            message: format!("header announces {n} rows, found {rows}"),
        });
    }
    GramMatrix::from_values(n, values)
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(io_err(path))?;
    tmp.write_all(bytes).map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| OkmError::Io {
        path: path.to_path_buf(),
        source: e.error,
    })?;
    Ok(())
}

/// Indented JSON, except that arrays holding only scalars stay on one line
/// (one membership row or coordinate pair per line).
pub fn to_json_text<T: Serialize>(value: &T) -> serde_json::Result<String> {
    let mut out = String::new();
    render(&serde_json::to_value(value)?, 0, &mut out);
    out.push('\n');
    Ok(out)
}

fn render(value: &Value, depth: usize, out: &mut String) {
    let indent = |out: &mut String, d: usize| out.extend(std::iter::repeat_n("  ", d));
    match value {
        Value::Array(items) if items.iter().all(|v| !v.is_array() && !v.is_object()) => {
            out.push_str(&value.to_string());
        }
        Value::Array(items) => {
            out.push_str("[\n");
            for (i, item) in items.iter().enumerate() {
                indent(out, depth + 1);
                render(item, depth + 1, out);
                out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
            }
            indent(out, depth);
            out.push(']');
        }
        Value::Object(map) if map.is_empty() => out.push_str("{}"),
        Value::Object(map) => {
            out.push_str("{\n");
            for (i, (key, item)) in map.iter().enumerate() {
                indent(out, depth + 1);
                out.push_str(&Value::String(key.clone()).to_string());
                out.push_str(": ");
                render(item, depth + 1, out);
                out.push_str(if i + 1 < map.len() { ",\n" } else { "\n" });
            }
            indent(out, depth);
            out.push('}');
        }
        scalar => out.push_str(&scalar.to_string()),
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = to_json_text(value).map_err(|e| OkmError::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    write_atomic(path, text.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| parse_err(path, e.line(), e.column(), e.to_string()))
}

/// Per-object cluster-id lists; `k` is inferred as max id + 1 unless given.
pub fn read_memberships(path: &Path, k: Option<usize>) -> Result<MembershipMatrix> {
    let lists: Vec<Vec<usize>> = read_json(path)?;
    let k = k.unwrap_or_else(|| lists.iter().flatten().max().map_or(0, |m| m + 1));
    MembershipMatrix::from_cluster_lists(&lists, k)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    /// Input-space OKM.
    Okm,
    /// Kernel OKM-K.
    Okmk,
}

/// Output of `fit`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub solver: SolverKind,
    pub config: SolverConfig,
    pub seed: u64,
    pub n: usize,
    pub memberships: Vec<Vec<usize>>,
    pub initial_objective: f64,
    pub objective_trace: Vec<f64>,
    pub iterations_run: usize,
    pub converged_by: ConvergedBy,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metrics: Option<Scores>,
    pub psd_warning: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timestamp_unix: Option<u64>,
}

impl FitReport {
    pub fn new(
        solver: SolverKind,
        config: &SolverConfig,
        result: &ClusteringResult,
        metrics: Option<Scores>,
    ) -> Self {
        Self {
            solver,
            config: config.clone(),
            seed: config.seed,
            n: result.memberships.n(),
            memberships: result.memberships.cluster_lists(),
            initial_objective: result.initial_objective,
            objective_trace: result.objective_trace.clone(),
            iterations_run: result.iterations_run,
            converged_by: result.converged_by,
            metrics,
            psd_warning: result.psd_ok == Some(false),
            timestamp_unix: None,
        }
    }

    pub fn membership_matrix(&self) -> Result<MembershipMatrix> {
        MembershipMatrix::from_cluster_lists(&self.memberships, self.config.k)
    }
}

/// Output of `project`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingReport {
    pub method: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel: Option<crate::kernels::KernelSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<Vec<usize>>>,
    pub embedding: Embedding2D,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str, mode: LabelColumn) -> Result<Dataset> {
        parse_csv(Path::new("mem.csv"), text, mode)
    }

    #[test]
    fn parses_multi_labels() {
        let ds = parse("1,2,A\n3,4,B\n5,6,A;B\n", LabelColumn::Detect).unwrap();
        assert_eq!((ds.data.rows(), ds.data.cols()), (3, 2));
        let labels = ds.labels.unwrap();
        assert_eq!(labels.sets(), &[vec![0], vec![1], vec![0, 1]]);
        assert_eq!(ds.label_names, vec!["A", "B"]);
    }

    #[test]
    fn skips_header_row() {
        let ds = parse("x,y,label\n1,2,A\n3,4,B\n", LabelColumn::Detect).unwrap();
        assert_eq!(ds.data.rows(), 2);
        assert_eq!(ds.data.row(1), &[3.0, 4.0]);
    }

    #[test]
    fn numeric_labels_need_explicit_column() {
        let ds = parse("1,2,0\n3,4,1\n", LabelColumn::Detect).unwrap();
        assert!(ds.labels.is_none());
        assert_eq!(ds.data.cols(), 3);
        let ds = parse("1,2,0\n3,4,1\n", LabelColumn::Last).unwrap();
        assert_eq!(ds.data.cols(), 2);
        assert_eq!(ds.labels.unwrap().sets(), &[vec![0], vec![1]]);
    }

    #[test]
    fn reports_bad_cells_and_shapes() {
        match parse("1,2\n3,oops\n", LabelColumn::Absent) {
            Err(OkmError::Parse { line: 2, column: 2, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse("1,2\n3\n", LabelColumn::Absent),
            Err(OkmError::Parse { line: 2, .. })
        ));
        assert!(matches!(parse("", LabelColumn::Absent), Err(OkmError::Format { .. })));
        assert!(matches!(
            parse("1,2,A\n3,4, ; \n", LabelColumn::Last),
            Err(OkmError::Parse { line: 2, column: 3, .. })
        ));
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let data = DataMatrix::new(2, 3, vec![0.1, -2.5e-7, 3.0, 1.0 / 3.0, 1e300, -0.0]).unwrap();
        let ds = Dataset {
            data: data.clone(),
            labels: Some(LabelSets::new(vec![vec![0], vec![0, 1]]).unwrap()),
            label_names: vec!["Action".into(), "Crime".into()],
        };
        write_csv(&path, &ds).unwrap();
        let back = load_csv(&path, LabelColumn::Detect).unwrap();
        for (a, b) in back.data.values().iter().zip(data.values()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(back.labels, ds.labels);
        assert_eq!(back.label_names, ds.label_names);
    }

    #[test]
    fn gram_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("k.csv");
        let k = GramMatrix::from_values(2, vec![1.0, 0.25, 0.25, 2.0 / 3.0]).unwrap();
        write_gram(&path, &k).unwrap();
        assert!(fs::read_to_string(&path).unwrap().starts_with("# gram N=2\n"));
        assert_eq!(load_gram(&path).unwrap(), k);
    }

    #[test]
    fn gram_header_is_required() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("k.csv");
        fs::write(&path, "1,0\n0,1\n").unwrap();
        assert!(load_gram(&path).is_err());
        fs::write(&path, "# gram N=3\n1,0\n0,1\n").unwrap();
        assert!(load_gram(&path).is_err());
    }

    #[test]
    fn embedding_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.json");
        let report = EmbeddingReport {
            method: "pca".into(),
            kernel: None,
            labels: None,
            embedding: Embedding2D {
                coords: vec![[0.1, -1.0 / 3.0], [2.0e-17, 7.25]],
                explained: [1.5, 0.2],
                total_variance: 1.9,
                degenerate: false,
            },
        };
        write_json(&path, &report).unwrap();
        let back: EmbeddingReport = read_json(&path).unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn membership_lists_are_written_per_object() {
        let p = MembershipMatrix::from_cluster_lists(&[vec![0], vec![0, 1]], 2).unwrap();
        let result = ClusteringResult {
            memberships: p.clone(),
            objective_trace: vec![1.0],
            initial_objective: 2.0,
            iterations_run: 1,
            converged_by: ConvergedBy::ImprovementThreshold,
            psd_ok: None,
        };
        let report = FitReport::new(SolverKind::Okm, &SolverConfig::new(2), &result, None);
        let json = serde_json::to_value(&report).unwrap();
        assert_eq!(json["memberships"], serde_json::json!([[0], [0, 1]]));
        assert_eq!(report.membership_matrix().unwrap(), p);
    }

    #[test]
    fn write_failure_names_the_path() {
        let err = write_json(Path::new("/nonexistent-dir/x.json"), &1).unwrap_err();
        assert!(err.to_string().contains("/nonexistent-dir/x.json"));
    }
}
