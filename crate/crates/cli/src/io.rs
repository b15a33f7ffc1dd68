//! CSV schemas.
//!
//! * data: `id,y,comp_1..comp_K,cov_1..cov_p` (K >= 2, p >= 0)
//! * edges: `src,dst`
//! * partition: `id,cluster` with clusters `1..=k`

use std::collections::HashSet;
use std::path::Path;

use compreg_core::composition::{CompositionMatrix, LogContrastDesign};
use compreg_core::spatial_graph::SpatialGraph;
use nalgebra::{DMatrix, DVector};

use crate::error::{CliError, CliResult};
use crate::format::{fmt_f64, write_text};

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub ids: Vec<String>,
    pub y: Vec<f64>,
    /// `n x K`, one composition per row.
    pub composition: Vec<Vec<f64>>,
    /// `n x p`
    pub covariates: Vec<Vec<f64>>,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.ids.len()
    }

    pub fn parts(&self) -> usize {
        self.composition.first().map_or(0, Vec::len)
    }

    pub fn p(&self) -> usize {
        self.covariates.first().map_or(0, Vec::len)
    }

    pub fn design(&self, zero_pseudocount: f64, path: &Path) -> CliResult<LogContrastDesign> {
        let n = self.n();
        let comp = CompositionMatrix::from_rows(&self.composition).map_err(|e| match e {
            compreg_core::Error::InvalidComposition { row, reason } => CliError::input(format!(
                "{}:{}: composition of {:?} {reason}",
                path.display(),
                row + 2,
                self.ids[row]
            )),
            other => CliError::input(format!("{}: {other}", path.display())),
        })?;
        let x2 = DMatrix::from_fn(n, self.p(), |i, j| self.covariates[i][j]);
        LogContrastDesign::new(&comp, x2, DVector::from_column_slice(&self.y), zero_pseudocount)
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))
    }
}

fn open(path: &Path) -> CliResult<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => CliError::io(path, io),
            _ => unreachable!("checked is_io_error"),
        }
    } else {
        CliError::input(format!("{}: {e}", path.display()))
    }
}

fn records(path: &Path) -> CliResult<(Vec<String>, Vec<(u64, Vec<String>)>)> {
    let mut reader = open(path)?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        rows.push((line, rec.iter().map(str::to_string).collect()));
    }
    Ok((header, rows))
}

fn parse_f64(path: &Path, line: u64, column: &str, text: &str) -> CliResult<f64> {
    let v: f64 = text
        .parse()
        .map_err(|_| CliError::input(format!("{}:{line}: column {column}: {text:?} is not a number", path.display())))?;
    if !v.is_finite() {
        return Err(CliError::input(format!(
            "{}:{line}: column {column}: value must be finite",
            path.display()
        )));
    }
    Ok(v)
}

/// Counts `prefix_1, prefix_2, ...` columns starting at `start`.
fn numbered_columns(header: &[String], start: usize, prefix: &str) -> usize {
    header[start..]
        .iter()
        .enumerate()
        .take_while(|(j, h)| **h == format!("{prefix}_{}", j + 1))
        .count()
}

pub fn read_dataset(path: &Path) -> CliResult<Dataset> {
    let (header, rows) = records(path)?;
    let schema = || {
        CliError::input(format!(
            "{}:1: header must be id,y,comp_1..comp_K,cov_1..cov_p (K >= 2), found {}",
            path.display(),
            header.join(",")
        ))
    };
    if header.len() < 4 || header[0] != "id" || header[1] != "y" {
        return Err(schema());
    }
    let k = numbered_columns(&header, 2, "comp");
    let p = numbered_columns(&header, 2 + k, "cov");
    if k < 2 || 2 + k + p != header.len() {
        return Err(schema());
    }
    if rows.is_empty() {
        return Err(CliError::input(format!("{}: no data rows", path.display())));
    }
    let mut data = Dataset {
        ids: Vec::with_capacity(rows.len()),
        y: Vec::with_capacity(rows.len()),
        composition: Vec::with_capacity(rows.len()),
        covariates: Vec::with_capacity(rows.len()),
    };
    let mut seen = HashSet::new();
    for (line, row) in rows {
        let id = row[0].clone();
        if id.is_empty() {
            return Err(CliError::input(format!("{}:{line}: empty id", path.display())));
        }
        if !seen.insert(id.clone()) {
            return Err(CliError::input(format!("{}:{line}: duplicate id {id:?}", path.display())));
        }
        let num = |j: usize| parse_f64(path, line, &header[j], &row[j]);
        data.y.push(num(1)?);
        data.composition.push((2..2 + k).map(num).collect::<CliResult<_>>()?);
        data.covariates.push((2 + k..2 + k + p).map(num).collect::<CliResult<_>>()?);
        data.ids.push(id);
    }
    Ok(data)
}

pub fn write_dataset(path: &Path, data: &Dataset) -> CliResult<()> {
    let mut out = String::from("id,y");
    (1..=data.parts()).for_each(|j| out.push_str(&format!(",comp_{j}")));
    (1..=data.p()).for_each(|j| out.push_str(&format!(",cov_{j}")));
    out.push('\n');
    for i in 0..data.n() {
        out.push_str(&data.ids[i]);
        let values = std::iter::once(&data.y[i])
            .chain(&data.composition[i])
            .chain(&data.covariates[i]);
        for v in values {
            out.push(',');
            out.push_str(&fmt_f64(*v));
        }
        out.push('\n');
    }
    write_text(path, &out)
}

pub fn read_edges(path: &Path) -> CliResult<Vec<(String, String)>> {
    let (header, rows) = records(path)?;
    if header != ["src", "dst"] {
        return Err(CliError::input(format!(
            "{}:1: header must be src,dst, found {}",
            path.display(),
            header.join(",")
        )));
    }
    Ok(rows.into_iter().map(|(_, r)| (r[0].clone(), r[1].clone())).collect())
}

pub fn write_edges(path: &Path, edges: &[(String, String)]) -> CliResult<()> {
    let mut out = String::from("src,dst\n");
    for (a, b) in edges {
        out.push_str(&format!("{a},{b}\n"));
    }
    write_text(path, &out)
}

/// Builds the adjacency graph over the data ids, in data order. Edges naming
/// ids absent from the data are rejected; ids without edges are isolated.
pub fn build_graph(ids: &[String], edges: &[(String, String)], path: &Path) -> CliResult<SpatialGraph> {
    let known: HashSet<&str> = ids.iter().map(String::as_str).collect();
    let mut unknown: Vec<&str> = edges
        .iter()
        .flat_map(|(a, b)| [a.as_str(), b.as_str()])
        .filter(|v| !known.contains(v))
        .collect();
    unknown.sort_unstable();
    unknown.dedup();
    if !unknown.is_empty() {
        return Err(CliError::input(format!(
            "{}: identifiers not present in the data: {}",
            path.display(),
            unknown.join(", ")
        )));
    }
    SpatialGraph::from_edge_list(ids, edges).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

/// `(ids, clusters)` with clusters as written (`1..=k`).
pub fn read_partition(path: &Path) -> CliResult<(Vec<String>, Vec<usize>)> {
    let (header, rows) = records(path)?;
    if header != ["id", "cluster"] {
        return Err(CliError::input(format!(
            "{}:1: header must be id,cluster, found {}",
            path.display(),
            header.join(",")
        )));
    }
    let mut ids = Vec::new();
    let mut labels = Vec::new();
    for (line, r) in rows {
        let c: usize = r[1]
            .parse()
            .ok()
            .filter(|&c| c >= 1)
            .ok_or_else(|| CliError::input(format!("{}:{line}: cluster must be an integer >= 1", path.display())))?;
        ids.push(r[0].clone());
        labels.push(c);
    }
    Ok((ids, labels))
}

pub fn write_partition(path: &Path, ids: &[String], labels: &[usize]) -> CliResult<()> {
    let mut out = String::from("id,cluster\n");
    for (id, c) in ids.iter().zip(labels) {
        out.push_str(&format!("{id},{c}\n"));
    }
    write_text(path, &out)
}
