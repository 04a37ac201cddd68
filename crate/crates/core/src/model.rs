//! The descriptor state-space model `E x' = A x + B u, y = C x + D u`.

use std::collections::HashSet;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{complex_singular_values, max_abs, to_complex, CMatrix, ComplexLu};
use crate::tolerance::rank_tol;

/// Whether a state is a physical energy-storage variable or an algebraic
/// variable introduced by a construction (inverse, feedback closure).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StateKind {
    Physical,
    Virtual,
}

/// Name and provenance of one state.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StateLabel {
    pub name: String,
    /// Subsystem path, e.g. `branch:6-13/L`.
    pub origin: String,
    pub kind: StateKind,
}

impl StateLabel {
    pub fn physical(name: impl Into<String>, origin: impl Into<String>) -> Self {
        StateLabel {
            name: name.into(),
            origin: origin.into(),
            kind: StateKind::Physical,
        }
    }

    pub fn virtual_state(name: impl Into<String>, origin: impl Into<String>) -> Self {
        StateLabel {
            name: name.into(),
            origin: origin.into(),
            kind: StateKind::Virtual,
        }
    }

    /// `origin/name`, or just `name` when the origin is empty. Uniqueness
    /// within a model is decided on this path.
    pub fn path(&self) -> String {
        if self.origin.is_empty() {
            self.name.clone()
        } else {
            format!("{}/{}", self.origin, self.name)
        }
    }

    pub fn is_virtual(&self) -> bool {
        self.kind == StateKind::Virtual
    }

    pub(crate) fn prefixed(&self, prefix: &str) -> Self {
        let origin = if self.origin.is_empty() {
            prefix.to_string()
        } else {
            format!("{prefix}/{}", self.origin)
        };
        StateLabel {
            origin,
            ..self.clone()
        }
    }
}

/// State, input and output labels of a model.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Labels {
    pub states: Vec<StateLabel>,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
}

impl Labels {
    pub fn new(states: Vec<StateLabel>, inputs: Vec<String>, outputs: Vec<String>) -> Self {
        Labels {
            states,
            inputs,
            outputs,
        }
    }

    /// Generic labels `x0..`, `u0..`, `y0..` with physical states.
    pub fn generic(n: usize, m: usize, p: usize) -> Self {
        Labels {
            states: (0..n).map(|k| StateLabel::physical(format!("x{k}"), "")).collect(),
            inputs: (0..m).map(|k| format!("u{k}")).collect(),
            outputs: (0..p).map(|k| format!("y{k}")).collect(),
        }
    }
}

/// A descriptor state-space model with diagonal `E` and labelled signals.
#[derive(Debug, Clone, PartialEq)]
pub struct DssModel {
    pub(crate) e: DMatrix<f64>,
    pub(crate) a: DMatrix<f64>,
    pub(crate) b: DMatrix<f64>,
    pub(crate) c: DMatrix<f64>,
    pub(crate) d: DMatrix<f64>,
    pub(crate) states: Vec<StateLabel>,
    pub(crate) inputs: Vec<String>,
    pub(crate) outputs: Vec<String>,
}

fn check_shape(what: &str, m: &DMatrix<f64>, rows: usize, cols: usize) -> Result<()> {
    if m.shape() != (rows, cols) {
        return Err(Error::DimensionMismatch(format!(
            "{what} is {}x{}, expected {rows}x{cols}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

pub(crate) fn check_unique(states: &[StateLabel]) -> Result<()> {
    let mut seen = HashSet::with_capacity(states.len());
    for s in states {
        let path = s.path();
        if !seen.insert(path.clone()) {
            return Err(Error::DuplicateLabel(path));
        }
    }
    Ok(())
}

impl DssModel {
    /// Builds a model from its five matrices. No numerical processing is done.
    pub fn new(
        e: DMatrix<f64>,
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        d: DMatrix<f64>,
        labels: Labels,
    ) -> Result<Self> {
        let n = a.nrows();
        check_shape("A", &a, n, n)?;
        check_shape("E", &e, n, n)?;
        let m = labels.inputs.len();
        let p = labels.outputs.len();
        check_shape("B", &b, n, m)?;
        check_shape("C", &c, p, n)?;
        check_shape("D", &d, p, m)?;
        if labels.states.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} state labels for {n} states",
                labels.states.len()
            )));
        }
        for i in 0..n {
            for j in 0..n {
                if i != j && e[(i, j)] != 0.0 {
                    return Err(Error::NonDiagonalE { row: i, col: j });
                }
            }
        }
        check_unique(&labels.states)?;
        Ok(DssModel {
            e,
            a,
            b,
            c,
            d,
            states: labels.states,
            inputs: labels.inputs,
            outputs: labels.outputs,
        })
    }

    /// Wraps an explicit state-space model, `E = I`.
    pub fn from_ss(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        d: DMatrix<f64>,
        labels: Labels,
    ) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "A is {}x{}, expected square",
                a.nrows(),
                a.ncols()
            )));
        }
        let e = DMatrix::identity(a.nrows(), a.nrows());
        Self::new(e, a, b, c, d, labels)
    }

    /// A stateless model `y = D u`.
    pub fn gain(d: DMatrix<f64>, inputs: Vec<String>, outputs: Vec<String>) -> Result<Self> {
        let (p, m) = d.shape();
        Self::new(
            DMatrix::zeros(0, 0),
            DMatrix::zeros(0, 0),
            DMatrix::zeros(0, m),
            DMatrix::zeros(p, 0),
            d,
            Labels::new(Vec::new(), inputs, outputs),
        )
    }

    /// Model with no states, no inputs and no outputs.
    pub fn empty() -> Self {
        Self::gain(DMatrix::zeros(0, 0), Vec::new(), Vec::new()).expect("empty model is valid")
    }

    pub fn e(&self) -> &DMatrix<f64> {
        &self.e
    }
    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }
    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }
    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }
    pub fn d(&self) -> &DMatrix<f64> {
        &self.d
    }
    pub fn state_labels(&self) -> &[StateLabel] {
        &self.states
    }
    pub fn input_labels(&self) -> &[String] {
        &self.inputs
    }
    pub fn output_labels(&self) -> &[String] {
        &self.outputs
    }

    /// Number of states.
    pub fn n(&self) -> usize {
        self.a.nrows()
    }
    /// Number of inputs.
    pub fn m(&self) -> usize {
        self.b.ncols()
    }
    /// Number of outputs.
    pub fn p(&self) -> usize {
        self.c.nrows()
    }

    /// Diagonal of `E`.
    pub fn e_diag(&self) -> Vec<f64> {
        (0..self.n()).map(|k| self.e[(k, k)]).collect()
    }

    /// Threshold under which an entry of `E` counts as zero.
    pub(crate) fn e_tol(&self) -> f64 {
        rank_tol(self.n(), self.n(), max_abs(&self.e))
    }

    /// Indices of states with non-negligible `E` entries, in order.
    pub(crate) fn dynamic_indices(&self) -> (Vec<usize>, Vec<usize>) {
        let tol = self.e_tol();
        (0..self.n()).partition(|&k| self.e[(k, k)].abs() > tol)
    }

    /// Largest absolute entry over all five matrices.
    pub(crate) fn scale(&self) -> f64 {
        [&self.e, &self.a, &self.b, &self.c, &self.d]
            .iter()
            .map(|m| max_abs(m))
            .fold(0.0, f64::max)
    }

    /// Prefixes every state origin with `prefix`.
    pub fn with_origin_prefix(mut self, prefix: &str) -> Self {
        self.states = self.states.iter().map(|s| s.prefixed(prefix)).collect();
        self
    }

    /// Replaces the input and output labels.
    pub fn with_io_labels(mut self, inputs: Vec<String>, outputs: Vec<String>) -> Result<Self> {
        if inputs.len() != self.m() || outputs.len() != self.p() {
            return Err(Error::DimensionMismatch(format!(
                "{} input / {} output labels for a {}x{} model",
                inputs.len(),
                outputs.len(),
                self.p(),
                self.m()
            )));
        }
        self.inputs = inputs;
        self.outputs = outputs;
        Ok(self)
    }

    /// Replaces the state labels.
    pub fn with_state_labels(mut self, states: Vec<StateLabel>) -> Result<Self> {
        if states.len() != self.n() {
            return Err(Error::DimensionMismatch(format!(
                "{} state labels for {} states",
                states.len(),
                self.n()
            )));
        }
        check_unique(&states)?;
        self.states = states;
        Ok(self)
    }

    /// `C (sE - A)^-1 B + D`.
    pub fn eval_tf(&self, s: Complex64) -> Result<CMatrix> {
        let d = to_complex(&self.d);
        if self.n() == 0 {
            return Ok(d);
        }
        let pencil = to_complex(&self.e) * s - to_complex(&self.a);
        let lu = ComplexLu::new(&pencil);
        if lu.is_singular() {
            return Err(Error::SingularAtS { re: s.re, im: s.im });
        }
        let x = lu.solve(&to_complex(&self.b));
        Ok(to_complex(&self.c) * x + d)
    }

    /// Left-multiplies the state equation by `E^-1`, giving `E = I`.
    pub fn to_explicit_via_einv(&self) -> Result<DssModel> {
        let diag = self.e_diag();
        let tol = self.e_tol();
        if diag.iter().any(|x| x.abs() <= tol) {
            return Err(Error::SingularE);
        }
        let mut a = self.a.clone();
        let mut b = self.b.clone();
        for (k, &ek) in diag.iter().enumerate() {
            a.row_mut(k).iter_mut().for_each(|x| *x /= ek);
            b.row_mut(k).iter_mut().for_each(|x| *x /= ek);
        }
        Ok(DssModel {
            e: DMatrix::identity(self.n(), self.n()),
            a,
            b,
            ..self.clone()
        })
    }

    /// Whether `det(sE - A)` is not identically zero, decided from three
    /// seeded pseudo-random complex samples.
    pub fn pencil_is_regular(&self) -> bool {
        let n = self.n();
        if n == 0 {
            return true;
        }
        let e_scale = max_abs(&self.e);
        let a_scale = max_abs(&self.a);
        let radius = if e_scale > 0.0 && a_scale > 0.0 {
            a_scale / e_scale
        } else {
            1.0
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0x05ee_dd55);
        let e = to_complex(&self.e);
        let a = to_complex(&self.a);
        (0..3).any(|_| {
            let s = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * radius;
            let pencil = &e * s - &a;
            let sv = complex_singular_values(&pencil);
            let smax = sv.iter().fold(0.0_f64, |x, &y| x.max(y));
            let smin = sv.iter().fold(f64::INFINITY, |x, &y| x.min(y));
            smax > 0.0 && smin > rank_tol(n, n, smax)
        })
    }
}
