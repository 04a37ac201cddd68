//! Modes of the pencil `(A, E)`, participation factors and eigenvalue
//! sensitivities computed on the descriptor model directly.
//!
//! Finite eigenvalues come from deflating the algebraic states exactly. With
//! dynamic states `x1` and algebraic states `x2`, the range part of `A22` is
//! eliminated through its pseudo-inverse, which leaves
//!
//! ```text
//! E1 x1' = A11^ x1 + G z,   0 = H x1,   G = A12 V0,  H = N A21
//! ```
//!
//! where `V0` and `N` span the right and left null spaces of `A22`. When
//! `H E1^-1 G` is invertible (index at most two) the finite spectrum is that of
//! the projected flow on `ker H`. Eigenvectors are then refined by inverse
//! iteration on the full pencil, so they satisfy `A phi = lambda E phi` and
//! `psi A = lambda psi E` for the unreduced model.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::fmt_f64 as f;
use crate::linalg::{eigenvalues, left_nullspace, max_abs, null_space, pinv, rank, to_complex, CMatrix, ComplexLu};
use crate::model::{DssModel, StateKind, StateLabel};
use crate::tolerance::DEFECT_TOL;
use crate::transform::Partition;

pub type CVector = DVector<Complex64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeClass {
    Finite,
    /// Eigenvalue at infinity, caused by the singular part of `E`.
    Virtual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeStatus {
    Unnormalized,
    Normalized,
    /// Repeated or defective finite eigenvalue; `psi E phi` cannot be scaled to 1.
    Defective,
}

/// One generalized eigenpair. The eigenvalue is `alpha / beta`; virtual
/// modes have `beta = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mode {
    pub alpha: Complex64,
    pub beta: f64,
    pub class: ModeClass,
    /// Right eigenvector `phi`.
    pub right: CVector,
    /// Entries of the left (row) eigenvector `psi`.
    pub left: CVector,
    pub status: ModeStatus,
}

impl Mode {
    /// `lambda` in rad/s; infinite for virtual modes.
    pub fn eigenvalue(&self) -> Complex64 {
        match self.class {
            ModeClass::Finite => self.alpha / self.beta,
            ModeClass::Virtual => Complex64::new(f64::INFINITY, 0.0),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.class == ModeClass::Finite
    }

    /// Oscillation frequency `Im(lambda) / 2 pi`.
    pub fn freq_hz(&self) -> f64 {
        self.eigenvalue().im / (2.0 * PI)
    }

    /// `psi E phi` for a diagonal `E`.
    pub fn psi_e_phi(&self, e_diag: &[f64]) -> Complex64 {
        e_diag
            .iter()
            .enumerate()
            .map(|(k, &e)| self.left[k] * e * self.right[k])
            .sum()
    }
}

/// All `n` modes of a model: finite ones first, ordered by decreasing real
/// part then decreasing imaginary part, followed by the virtual ones.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSet {
    pub modes: Vec<Mode>,
}

impl ModeSet {
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn finite(&self) -> impl Iterator<Item = (usize, &Mode)> {
        self.modes.iter().enumerate().filter(|(_, m)| m.is_finite())
    }

    pub fn finite_eigenvalues(&self) -> Vec<Complex64> {
        self.finite().map(|(_, m)| m.eigenvalue()).collect()
    }

    pub fn finite_count(&self) -> usize {
        self.finite().count()
    }

    /// Indices of finite modes flagged as defective or repeated.
    pub fn defective(&self) -> Vec<usize> {
        self.finite()
            .filter(|(_, m)| m.status == ModeStatus::Defective)
            .map(|(i, _)| i)
            .collect()
    }

    /// Mode table as CSV: `mode_index,re_rad_s,im_rad_s[,freq_hz],class`.
    /// Virtual rows leave the numeric columns empty.
    pub fn to_csv(&self, hz: bool) -> String {
        let mut out = String::from(if hz {
            "mode_index,re_rad_s,im_rad_s,freq_hz,class\n"
        } else {
            "mode_index,re_rad_s,im_rad_s,class\n"
        });
        for (i, m) in self.modes.iter().enumerate() {
            let class = class_name(m.class);
            match (m.class, hz) {
                (ModeClass::Finite, true) => {
                    let l = m.eigenvalue();
                    out += &format!("{i},{},{},{},{class}\n", f(l.re), f(l.im), f(m.freq_hz()));
                }
                (ModeClass::Finite, false) => {
                    let l = m.eigenvalue();
                    out += &format!("{i},{},{},{class}\n", f(l.re), f(l.im));
                }
                (ModeClass::Virtual, true) => out += &format!("{i},,,,{class}\n"),
                (ModeClass::Virtual, false) => out += &format!("{i},,,{class}\n"),
            }
        }
        out
    }
}

/// Phase in radians; zero for an exactly zero value.
fn arg(z: Complex64) -> f64 {
    if z.norm() == 0.0 {
        0.0
    } else {
        z.arg()
    }
}

fn class_name(c: ModeClass) -> &'static str {
    match c {
        ModeClass::Finite => "finite",
        ModeClass::Virtual => "virtual",
    }
}

/// Finite eigenvalues of the pencil together with the null-space data used
/// to build the virtual eigenvectors.
struct Deflation {
    eigenvalues: Vec<Complex64>,
    /// Right null vectors of `A22` (columns), in `x2` coordinates.
    a22_right_null: DMatrix<f64>,
    /// Left null vectors of `A22` (rows), in `x2` coordinates.
    a22_left_null: DMatrix<f64>,
}

fn deflate(model: &DssModel) -> Result<Deflation> {
    let part = Partition::new(model);
    let n1 = part.idx1.len();
    let n2 = part.idx2.len();
    if n1 == 0 {
        return Ok(Deflation {
            eigenvalues: Vec::new(),
            a22_right_null: DMatrix::zeros(n2, 0),
            a22_left_null: DMatrix::zeros(0, n2),
        });
    }
    let a22_pinv = pinv(&part.a22, part.tol);
    let a11_hat = &part.a11 - &part.a12 * &a22_pinv * &part.a21;
    let v0 = null_space(&part.a22, part.tol);
    let n0 = left_nullspace(&part.a22, part.tol);
    let k = v0.ncols();
    debug_assert_eq!(k, n0.nrows());

    let reduced = if k == 0 {
        part.e1_inv_times(&a11_hat)
    } else {
        let g = &part.a12 * &v0;
        let h = &n0 * &part.a21;
        let e1_inv_g = part.e1_inv_times(&g);
        let coupling = &h * &e1_inv_g;
        if rank(&coupling, part.tol) < k {
            return Err(Error::HigherIndex);
        }
        let coupling_inv = coupling.clone().try_inverse().ok_or(Error::HigherIndex)?;
        let projector = DMatrix::<f64>::identity(n1, n1) - &e1_inv_g * coupling_inv * &h;
        let basis = null_space(&h, part.tol);
        basis.transpose() * projector * part.e1_inv_times(&a11_hat) * basis
    };

    let eigenvalues = if reduced.nrows() == 0 {
        Vec::new()
    } else {
        eigenvalues(&reduced).ok_or(Error::ConvergenceFailure)?
    };
    Ok(Deflation {
        eigenvalues,
        a22_right_null: v0,
        a22_left_null: n0,
    })
}

fn start_vector(n: usize) -> CVector {
    CVector::from_fn(n, |k, _| Complex64::new(1.0 + 0.37 * k as f64, 0.21 - 0.13 * k as f64))
}

/// Scales so that the largest entry equals one, then to unit 2-norm.
fn canonical(mut v: CVector) -> CVector {
    let (imax, _) = v
        .iter()
        .enumerate()
        .fold((0, -1.0), |(bi, bv), (i, z)| if z.norm() > bv * (1.0 + 1e-12) { (i, z.norm()) } else { (bi, bv) });
    let pivot = v[imax];
    if pivot.norm() > 0.0 {
        v /= pivot;
    }
    let norm = v.norm();
    if norm > 0.0 {
        v /= Complex64::new(norm, 0.0);
    }
    v
}

/// Generalized inverse iteration `(A - lambda E) x+ = E x`.
fn inverse_iteration(a: &CMatrix, e: &CMatrix, lambda: Complex64) -> CVector {
    let shifted = a - e * lambda;
    let norm = |m: &CMatrix| m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()));
    let scale = (norm(a) + lambda.norm().max(1.0) * norm(e)).max(f64::MIN_POSITIVE);
    let lu = ComplexLu::with_floor(&shifted, f64::EPSILON * scale);
    let n = a.nrows();
    let mut x = canonical(lu.solve(&CMatrix::from_column_slice(n, 1, start_vector(n).as_slice())).column(0).into_owned());
    for _ in 0..3 {
        let rhs = e * &x;
        if rhs.norm() == 0.0 {
            break;
        }
        x = canonical(lu.solve(&CMatrix::from_column_slice(n, 1, rhs.as_slice())).column(0).into_owned());
    }
    x
}

/// Solves the generalized eigenproblem `A phi = lambda E phi` of a regular
/// pencil of index at most two. Eigenvectors are returned unnormalized
/// (unit 2-norm); see [`normalize`].
pub fn generalized_eig(model: &DssModel) -> Result<ModeSet> {
    let n = model.n();
    if n == 0 {
        return Ok(ModeSet { modes: Vec::new() });
    }
    if !model.pencil_is_regular() {
        return Err(Error::IrregularPencil);
    }
    let defl = deflate(model)?;
    let mut finite = defl.eigenvalues;
    finite.sort_by(|x, y| y.re.total_cmp(&x.re).then(y.im.total_cmp(&x.im)));

    let a = to_complex(model.a());
    let e = to_complex(model.e());
    let a_t = a.transpose();
    let e_t = e.transpose();
    let mut modes: Vec<Mode> = finite
        .into_iter()
        .map(|lambda| Mode {
            alpha: lambda,
            beta: 1.0,
            class: ModeClass::Finite,
            right: inverse_iteration(&a, &e, lambda),
            left: inverse_iteration(&a_t, &e_t, lambda),
            status: ModeStatus::Unnormalized,
        })
        .collect();

    // Virtual eigenvectors span ker E; the index-two chains repeat the
    // eigenvectors built from the null spaces of A22.
    let (_, idx2) = model.dynamic_indices();
    let unit = |k: usize| {
        let mut v = CVector::zeros(n);
        v[k] = Complex64::new(1.0, 0.0);
        v
    };
    let embed = |coords: Vec<f64>| {
        let mut v = CVector::zeros(n);
        for (pos, &k) in idx2.iter().enumerate() {
            v[k] = Complex64::new(coords[pos], 0.0);
        }
        v
    };
    let virtual_mode = |right: CVector, left: CVector| Mode {
        alpha: Complex64::new(1.0, 0.0),
        beta: 0.0,
        class: ModeClass::Virtual,
        right,
        left,
        status: ModeStatus::Unnormalized,
    };
    for &k in &idx2 {
        modes.push(virtual_mode(unit(k), unit(k)));
    }
    for j in 0..defl.a22_right_null.ncols() {
        let right = embed(defl.a22_right_null.column(j).iter().copied().collect());
        let left = embed(defl.a22_left_null.row(j).iter().copied().collect());
        modes.push(virtual_mode(right, left));
    }
    debug_assert_eq!(modes.len(), n);
    Ok(ModeSet { modes })
}

/// Scales every simple finite mode so that `psi E phi = 1`. Repeated or
/// defective finite eigenvalues are flagged [`ModeStatus::Defective`] and
/// left unscaled; virtual modes are untouched.
pub fn normalize(modes: &ModeSet, model: &DssModel) -> ModeSet {
    let e_diag = model.e_diag();
    let e_scale = max_abs(model.e()).max(f64::MIN_POSITIVE);
    let finite: Vec<Complex64> = modes.modes.iter().filter(|m| m.is_finite()).map(Mode::eigenvalue).collect();
    let mut out = modes.clone();
    for mode in out.modes.iter_mut().filter(|m| m.is_finite()) {
        let lambda = mode.eigenvalue();
        let close = finite
            .iter()
            .filter(|&&other| (other - lambda).norm() <= DEFECT_TOL * lambda.norm().max(1.0))
            .count();
        let d = mode.psi_e_phi(&e_diag);
        let bound = DEFECT_TOL * mode.left.norm() * mode.right.norm() * e_scale;
        if close > 1 || d.norm() <= bound {
            mode.status = ModeStatus::Defective;
        } else {
            mode.left /= d;
            mode.status = ModeStatus::Normalized;
        }
    }
    out
}

/// Participation of one state in one mode.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Factor {
    pub state_index: usize,
    pub state: StateLabel,
    /// `psi_k phi_k`
    pub raw: Complex64,
    /// `psi_k E_kk phi_k`; these sum to one over the states of a mode.
    pub weighted: Complex64,
}

/// Participation of every state in one finite mode, sorted by decreasing
/// `|weighted|`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeParticipation {
    pub mode_index: usize,
    pub eigenvalue: Complex64,
    pub freq_hz: f64,
    /// Real part of the eigenvalue.
    pub damping: f64,
    pub factors: Vec<Factor>,
}

impl ModeParticipation {
    pub fn weighted_sum(&self) -> Complex64 {
        self.factors.iter().map(|f| f.weighted).sum()
    }

    /// Weighted participation of the state at `state_index`.
    pub fn weighted_of(&self, state_index: usize) -> Complex64 {
        self.factors
            .iter()
            .find(|f| f.state_index == state_index)
            .map_or(Complex64::new(0.0, 0.0), |f| f.weighted)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeSummary {
    pub mode_index: usize,
    pub class: ModeClass,
    pub status: ModeStatus,
    /// `None` for virtual modes.
    pub eigenvalue: Option<Complex64>,
    /// `|psi E phi|` after normalization; about zero for virtual modes.
    pub psi_e_phi_abs: f64,
}

/// Factors below this are omitted from ranked tables; weighted factors of a
/// mode sum to one, so an absolute threshold is meaningful.
const NEGLIGIBLE: f64 = 1e-12;

/// Participation factors of all simple finite modes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParticipationReport {
    pub state_labels: Vec<StateLabel>,
    pub modes: Vec<ModeSummary>,
    pub participation: Vec<ModeParticipation>,
    /// Finite modes left out because they are defective or repeated.
    pub skipped: Vec<usize>,
}

impl ParticipationReport {
    pub fn for_mode(&self, mode_index: usize) -> Option<&ModeParticipation> {
        self.participation.iter().find(|p| p.mode_index == mode_index)
    }

    /// One row per mode: `mode_index,re_rad_s,im_rad_s,freq_hz,class`, then
    /// `|p|` and `arg(p)` of the weighted factor for each state in model
    /// order. Cells are empty where participation is undefined.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("mode_index,re_rad_s,im_rad_s,freq_hz,class");
        for s in &self.state_labels {
            let path = s.path();
            out += &format!(",abs:{path},arg:{path}");
        }
        out.push('\n');
        for m in &self.modes {
            match m.eigenvalue {
                Some(l) => out += &format!("{},{},{},{},{}", m.mode_index, f(l.re), f(l.im), f(l.im / (2.0 * PI)), class_name(m.class)),
                None => out += &format!("{},,,,{}", m.mode_index, class_name(m.class)),
            }
            match self.for_mode(m.mode_index) {
                Some(p) => {
                    for k in 0..self.state_labels.len() {
                        let w = p.weighted_of(k);
                        out += &format!(",{},{}", f(w.norm()), f(arg(w)));
                    }
                }
                None => out += &",,".repeat(self.state_labels.len()),
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    /// Ranked table for one mode:
    /// `rank,state,kind,weighted_abs,weighted_arg_rad,raw_re,raw_im`.
    /// States whose raw and weighted factors are both negligible are left out.
    pub fn mode_csv(&self, mode_index: usize) -> Result<String> {
        let summary = self
            .modes
            .get(mode_index)
            .ok_or(Error::VirtualModeRequested(mode_index))?;
        if summary.class == ModeClass::Virtual {
            return Err(Error::VirtualModeRequested(mode_index));
        }
        let p = self
            .for_mode(mode_index)
            .ok_or(Error::DefectiveMode(mode_index))?;
        let mut out = String::from("rank,state,kind,weighted_abs,weighted_arg_rad,raw_re,raw_im\n");
        let listed = p
            .factors
            .iter()
            .filter(|f| f.raw.norm() > NEGLIGIBLE || f.weighted.norm() > NEGLIGIBLE);
        for (r, fac) in listed.enumerate() {
            let kind = match fac.state.kind {
                StateKind::Physical => "physical",
                StateKind::Virtual => "virtual",
            };
            out += &format!(
                "{r},{},{kind},{},{},{},{}\n",
                fac.state.path(),
                f(fac.weighted.norm()),
                f(arg(fac.weighted)),
                f(fac.raw.re),
                f(fac.raw.im)
            );
        }
        Ok(out)
    }
}

/// Computes `p_ki = psi_ik phi_ki` and `p~_ki = psi_ik E_kk phi_ki` for each
/// simple finite mode. Modes that are not yet normalized are normalized
/// first.
pub fn participation(model: &DssModel, modes: &ModeSet) -> Result<ParticipationReport> {
    if modes.len() != model.n() {
        return Err(Error::DimensionMismatch(format!(
            "{} modes for a model with {} states",
            modes.len(),
            model.n()
        )));
    }
    let needs_norm = modes.finite().any(|(_, m)| m.status == ModeStatus::Unnormalized);
    let normalized;
    let modes = if needs_norm {
        normalized = normalize(modes, model);
        &normalized
    } else {
        modes
    };
    let e_diag = model.e_diag();
    let labels = model.state_labels();
    let mut participation = Vec::new();
    let mut summaries = Vec::new();
    for (i, m) in modes.modes.iter().enumerate() {
        summaries.push(ModeSummary {
            mode_index: i,
            class: m.class,
            status: m.status,
            eigenvalue: m.is_finite().then(|| m.eigenvalue()),
            psi_e_phi_abs: m.psi_e_phi(&e_diag).norm(),
        });
        if !m.is_finite() || m.status != ModeStatus::Normalized {
            continue;
        }
        let mut factors: Vec<Factor> = (0..model.n())
            .map(|k| {
                let raw = m.left[k] * m.right[k];
                Factor {
                    state_index: k,
                    state: labels[k].clone(),
                    raw,
                    weighted: raw * e_diag[k],
                }
            })
            .collect();
        factors.sort_by(|x, y| y.weighted.norm().total_cmp(&x.weighted.norm()).then(x.state_index.cmp(&y.state_index)));
        let lambda = m.eigenvalue();
        participation.push(ModeParticipation {
            mode_index: i,
            eigenvalue: lambda,
            freq_hz: lambda.im / (2.0 * PI),
            damping: lambda.re,
            factors,
        });
    }
    Ok(ParticipationReport {
        state_labels: labels.to_vec(),
        modes: summaries,
        participation,
        skipped: modes.defective(),
    })
}

/// `d lambda_i / d a_kj = psi_ik phi_ji` for a normalized finite mode `i`.
pub fn eig_sensitivity(modes: &ModeSet, i: usize, k: usize, j: usize) -> Result<Complex64> {
    let mode = modes.modes.get(i).ok_or(Error::VirtualModeRequested(i))?;
    match (mode.class, mode.status) {
        (ModeClass::Virtual, _) => Err(Error::VirtualModeRequested(i)),
        (_, ModeStatus::Normalized) => {
            let n = mode.right.len();
            if k >= n || j >= n {
                return Err(Error::DimensionMismatch(format!("entry ({k}, {j}) outside a {n}x{n} A")));
            }
            Ok(mode.left[k] * mode.right[j])
        }
        _ => Err(Error::DefectiveMode(i)),
    }
}

/// Generalized eigensolve followed by normalization.
pub fn modes(model: &DssModel) -> Result<ModeSet> {
    Ok(normalize(&generalized_eig(model)?, model))
}
