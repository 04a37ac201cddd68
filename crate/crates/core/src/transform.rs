//! Conversion of a descriptor model back to explicit state space.
//!
//! States are split into dynamic ones `x1` (non-zero `E` entry) and algebraic
//! ones `x2`. The algebraic states are eliminated by solving the algebraic
//! rows. When `A22` is rank deficient, its left null matrix `N` picks out the
//! hidden constraints `0 = N A21 x1 + N B2 u`; differentiating them once and
//! substituting the dynamic rows gives extra equations that make the stacked
//! algebraic block left-invertible for pencils of index two. The price is a
//! dependence on `u'`, collected in `Bd` and `Dd`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{left_nullspace, max_abs, pinv, rank, select, to_complex, vstack, CMatrix, ComplexLu};
use crate::model::{DssModel, StateLabel};
use crate::tolerance::rank_tol;

/// Explicit model `x1' = A x1 + B u + Bd u'`, `y = C x1 + D u + Dd u'`.
#[derive(Debug, Clone, PartialEq)]
pub struct SsResult {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub bd: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub dd: DMatrix<f64>,
    pub kept_labels: Vec<StateLabel>,
    pub input_labels: Vec<String>,
    pub output_labels: Vec<String>,
    pub is_proper: bool,
}

impl SsResult {
    /// `C (sI - A)^-1 (B + s Bd) + D + s Dd`.
    pub fn eval_tf(&self, s: Complex64) -> Result<CMatrix> {
        let n = self.a.nrows();
        let direct = to_complex(&self.d) + to_complex(&self.dd) * s;
        if n == 0 {
            return Ok(direct);
        }
        let pencil = CMatrix::identity(n, n) * s - to_complex(&self.a);
        let lu = ComplexLu::new(&pencil);
        if lu.is_singular() {
            return Err(Error::SingularAtS { re: s.re, im: s.im });
        }
        let rhs = to_complex(&self.b) + to_complex(&self.bd) * s;
        Ok(to_complex(&self.c) * lu.solve(&rhs) + direct)
    }
}

/// Block view of a model after moving dynamic states first.
pub(crate) struct Partition {
    pub idx1: Vec<usize>,
    pub idx2: Vec<usize>,
    /// Diagonal of `E1`.
    pub e1: Vec<f64>,
    pub a11: DMatrix<f64>,
    pub a12: DMatrix<f64>,
    pub a21: DMatrix<f64>,
    pub a22: DMatrix<f64>,
    /// Absolute rank threshold for blocks of `A`.
    pub tol: f64,
}

impl Partition {
    pub fn new(model: &DssModel) -> Self {
        let (idx1, idx2) = model.dynamic_indices();
        let a = model.a();
        let n = model.n();
        let scale = max_abs(a).max(max_abs(model.e()));
        Partition {
            e1: idx1.iter().map(|&k| model.e()[(k, k)]).collect(),
            a11: select(a, &idx1, &idx1),
            a12: select(a, &idx1, &idx2),
            a21: select(a, &idx2, &idx1),
            a22: select(a, &idx2, &idx2),
            tol: rank_tol(n, n, scale),
            idx1,
            idx2,
        }
    }

    /// `E1^-1 M` for a matrix with `n1` rows.
    pub fn e1_inv_times(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = m.clone();
        for (k, &e) in self.e1.iter().enumerate() {
            out.row_mut(k).iter_mut().for_each(|x| *x /= e);
        }
        out
    }

    /// `M E1^-1` for a matrix with `n1` columns.
    pub fn times_e1_inv(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = m.clone();
        for (k, &e) in self.e1.iter().enumerate() {
            out.column_mut(k).iter_mut().for_each(|x| *x /= e);
        }
        out
    }
}

fn snap(m: &mut DMatrix<f64>, tol: f64) {
    m.iter_mut().for_each(|x| {
        if x.abs() <= tol {
            *x = 0.0;
        }
    });
}

/// Converts a descriptor model to explicit state space, keeping the dynamic
/// states. Pencils of index above two are reported as [`Error::HigherIndex`].
pub fn to_ss(model: &DssModel) -> Result<SsResult> {
    let (n, m, p) = (model.n(), model.m(), model.p());
    let (idx1, idx2) = model.dynamic_indices();
    if idx2.is_empty() {
        let x = model.to_explicit_via_einv()?;
        return Ok(SsResult {
            a: x.a,
            b: x.b,
            bd: DMatrix::zeros(n, m),
            c: x.c,
            d: x.d,
            dd: DMatrix::zeros(p, m),
            kept_labels: x.states,
            input_labels: x.inputs,
            output_labels: x.outputs,
            is_proper: true,
        });
    }
    if !model.pencil_is_regular() {
        return Err(Error::IrregularPencil);
    }

    let part = Partition::new(model);
    let n2 = idx2.len();
    let b1 = select(model.b(), &idx1, &(0..m).collect::<Vec<_>>());
    let b2 = select(model.b(), &idx2, &(0..m).collect::<Vec<_>>());
    let c1 = select(model.c(), &(0..p).collect::<Vec<_>>(), &idx1);
    let c2 = select(model.c(), &(0..p).collect::<Vec<_>>(), &idx2);

    let null = left_nullspace(&part.a22, part.tol);
    let (a21_hat, a22_hat, b2_hat, bd_hat) = if null.nrows() == 0 {
        (part.a21.clone(), part.a22.clone(), b2.clone(), DMatrix::zeros(n2, m))
    } else {
        // N^ = N A21 E1^-1; the u' coefficient of the differentiated
        // constraint is N B2.
        let n_hat = part.times_e1_inv(&(&null * &part.a21));
        (
            vstack(&part.a21, &(&n_hat * &part.a11)),
            vstack(&part.a22, &(&n_hat * &part.a12)),
            vstack(&b2, &(&n_hat * &b1)),
            vstack(&DMatrix::zeros(n2, m), &(&null * &b2)),
        )
    };
    if rank(&a22_hat, part.tol) < n2 {
        return Err(Error::HigherIndex);
    }
    let left_inv = pinv(&a22_hat, part.tol);
    let x2_from_x1 = &left_inv * &a21_hat;
    let x2_from_u = &left_inv * &b2_hat;
    let x2_from_du = &left_inv * &bd_hat;

    let a = part.e1_inv_times(&(&part.a11 - &part.a12 * &x2_from_x1));
    let b = part.e1_inv_times(&(&b1 - &part.a12 * &x2_from_u));
    let mut bd = -part.e1_inv_times(&(&part.a12 * &x2_from_du));
    let c = &c1 - &c2 * &x2_from_x1;
    let d = model.d() - &c2 * &x2_from_u;
    let mut dd = -(&c2 * &x2_from_du);

    let snap_tol = rank_tol(n, n.max(m).max(p), model.scale().max(1.0));
    snap(&mut bd, snap_tol);
    snap(&mut dd, snap_tol);
    let is_proper = bd.iter().chain(dd.iter()).all(|&x| x == 0.0);

    Ok(SsResult {
        a,
        b,
        bd,
        c,
        d,
        dd,
        kept_labels: idx1.iter().map(|&k| model.state_labels()[k].clone()).collect(),
        input_labels: model.input_labels().to_vec(),
        output_labels: model.output_labels().to_vec(),
        is_proper,
    })
}
