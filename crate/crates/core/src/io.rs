//! JSON file formats for descriptor models and explicit conversion results.
//!
//! Matrices are dense row-major arrays of rows. The explicit sizes `n`, `m`
//! and `p` disambiguate matrices with a zero dimension.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DssModel, Labels, StateLabel};
use crate::transform::SsResult;

#[derive(Debug, Serialize, Deserialize)]
#[allow(non_snake_case)]
struct ModelFile {
    n: usize,
    m: usize,
    p: usize,
    E: Vec<Vec<f64>>,
    A: Vec<Vec<f64>>,
    B: Vec<Vec<f64>>,
    C: Vec<Vec<f64>>,
    D: Vec<Vec<f64>>,
    state_labels: Vec<StateLabel>,
    input_labels: Vec<String>,
    output_labels: Vec<String>,
}

#[derive(Debug, Serialize)]
#[allow(non_snake_case)]
struct SsFile<'a> {
    n: usize,
    m: usize,
    p: usize,
    A: Vec<Vec<f64>>,
    B: Vec<Vec<f64>>,
    Bd: Vec<Vec<f64>>,
    C: Vec<Vec<f64>>,
    D: Vec<Vec<f64>>,
    Dd: Vec<Vec<f64>>,
    kept_labels: &'a [StateLabel],
    input_labels: &'a [String],
    output_labels: &'a [String],
    is_proper: bool,
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

fn matrix(name: &str, rows: &[Vec<f64>], nrows: usize, ncols: usize) -> Result<DMatrix<f64>> {
    // a matrix with zero rows may be written as [] regardless of ncols
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::DimensionMismatch(format!(
            "{name} does not have shape {nrows}x{ncols}"
        )));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

pub fn model_to_json(model: &DssModel) -> String {
    let file = ModelFile {
        n: model.n(),
        m: model.m(),
        p: model.p(),
        E: rows_of(model.e()),
        A: rows_of(model.a()),
        B: rows_of(model.b()),
        C: rows_of(model.c()),
        D: rows_of(model.d()),
        state_labels: model.state_labels().to_vec(),
        input_labels: model.input_labels().to_vec(),
        output_labels: model.output_labels().to_vec(),
    };
    serde_json::to_string_pretty(&file).expect("model serialises")
}

pub fn model_from_json(text: &str) -> Result<DssModel> {
    let f: ModelFile = serde_json::from_str(text)?;
    if f.input_labels.len() != f.m || f.output_labels.len() != f.p || f.state_labels.len() != f.n {
        return Err(Error::DimensionMismatch(
            "label counts disagree with n, m, p".into(),
        ));
    }
    DssModel::new(
        matrix("E", &f.E, f.n, f.n)?,
        matrix("A", &f.A, f.n, f.n)?,
        matrix("B", &f.B, f.n, f.m)?,
        matrix("C", &f.C, f.p, f.n)?,
        matrix("D", &f.D, f.p, f.m)?,
        Labels::new(f.state_labels, f.input_labels, f.output_labels),
    )
}

pub fn ss_to_json(ss: &SsResult) -> String {
    let file = SsFile {
        n: ss.a.nrows(),
        m: ss.b.ncols(),
        p: ss.c.nrows(),
        A: rows_of(&ss.a),
        B: rows_of(&ss.b),
        Bd: rows_of(&ss.bd),
        C: rows_of(&ss.c),
        D: rows_of(&ss.d),
        Dd: rows_of(&ss.dd),
        kept_labels: &ss.kept_labels,
        input_labels: &ss.input_labels,
        output_labels: &ss.output_labels,
        is_proper: ss.is_proper,
    };
    serde_json::to_string_pretty(&file).expect("result serialises")
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::FileNotFound(path.display().to_string()),
        _ => Error::Io(format!("{}: {e}", path.display())),
    })
}

/// Shortest round-trip text for a float, in plain notation for moderate
/// magnitudes and scientific notation otherwise. Negative zero prints as `0`.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if (1e-4..1e16).contains(&x.abs()) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub fn read_model(path: impl AsRef<Path>) -> Result<DssModel> {
    model_from_json(&read_text(path.as_ref())?)
}

pub fn write_model(path: impl AsRef<Path>, model: &DssModel) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, model_to_json(model) + "\n").map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}
