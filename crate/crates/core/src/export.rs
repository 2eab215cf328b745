//! Byte-stable CSV and JSON renderings of results, plus atomic file writes.
//!
//! Floats are printed with Rust's shortest round-trip formatting, so equal
//! inputs always give identical bytes.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::manifold::ManifoldModel;
use crate::operators::OperatorMatrix;
use crate::spectral::SpectrumReport;
use crate::wavelets::WaveletCheck;

/// Writes through a sibling temporary file and a rename, so a failed run
/// never leaves a partial file behind.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::invalid(format!("'{}' is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(result?)
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serialises");
    s.push('\n');
    s
}

pub fn spectrum_csv(report: &SpectrumReport) -> String {
    let mut out = String::from("eigenvalue,multiplicity,max_residual\n");
    for g in &report.groups {
        let _ = writeln!(out, "{},{},{}", g.value, g.multiplicity, g.max_residual);
    }
    out
}

pub fn wavelet_csv(rows: &[WaveletCheck]) -> String {
    let mut out = String::from(
        "support,depth,j,closed_form,oracle,residual,nonlocal,closed_form_local,oracle_local,deviation,within_hypothesis\n",
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.label,
            r.depth,
            r.j,
            r.closed_form,
            r.oracle,
            r.residual,
            r.nonlocal,
            r.closed_form_local,
            r.oracle_local,
            r.deviation,
            r.within_hypothesis
        );
    }
    out
}

/// Pairwise geodetic distances over distinct cells, `i < j`.
pub fn distance_csv(model: &ManifoldModel) -> String {
    let mut out = String::from("cell_a,cell_b,distance\n");
    let n = model.cell_count();
    for i in 0..n {
        for j in i + 1..n {
            let _ = writeln!(
                out,
                "{},{},{}",
                model.cell_label(i),
                model.cell_label(j),
                model.cell_distance(i, j)
            );
        }
    }
    out
}

/// Nonzero entries as `row,col,value` under a header that echoes the
/// operator metadata and the cell order.
pub fn matrix_csv(model: &ManifoldModel, op: &OperatorMatrix) -> String {
    let mut out = String::new();
    for (k, v) in &op.metadata {
        let _ = writeln!(out, "# {k} = {v}");
    }
    let labels: Vec<String> = op.cells.iter().map(|&c| model.cell_label(c)).collect();
    let _ = writeln!(out, "# cells = {}", labels.join(" "));
    out.push_str("row,col,value\n");
    for i in 0..op.dim() {
        for (j, v) in op.entries.row(i).iter().enumerate() {
            if *v != 0.0 {
                let _ = writeln!(out, "{i},{j},{v}");
            }
        }
    }
    out
}

/// Values keyed by cell address.
pub fn vector_csv(model: &ManifoldModel, cells: &[usize], values: &[f64]) -> String {
    let mut out = String::from("cell,value\n");
    for (c, v) in cells.iter().zip(values) {
        let _ = writeln!(out, "{},{}", model.cell_label(*c), v);
    }
    out
}
