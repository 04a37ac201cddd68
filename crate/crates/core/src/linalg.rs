//! Dense helpers shared by the model algebra and the modal solver.

use faer::{c64, Mat, MatRef};
use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::tolerance::rank_tol;

pub type CMatrix = DMatrix<Complex64>;

pub(crate) fn to_complex(m: &DMatrix<f64>) -> CMatrix {
    m.map(|x| Complex64::new(x, 0.0))
}

pub(crate) fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

pub(crate) fn blkdiag(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows() + b.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((a.nrows(), a.ncols()), b.shape()).copy_from(b);
    out
}

pub(crate) fn vstack(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    debug_assert_eq!(a.ncols(), b.ncols());
    let mut out = DMatrix::zeros(a.nrows() + b.nrows(), a.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((a.nrows(), 0), b.shape()).copy_from(b);
    out
}

pub(crate) fn hstack(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    debug_assert_eq!(a.nrows(), b.nrows());
    let mut out = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((0, a.ncols()), b.shape()).copy_from(b);
    out
}

/// Picks rows and columns out of `m` in the given order.
pub(crate) fn select(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

fn to_faer(m: &DMatrix<f64>) -> Mat<f64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn from_faer(m: MatRef<'_, f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Full SVD `m = U diag(sigma) V^T`, singular values in nonincreasing order.
struct FullSvd {
    u: DMatrix<f64>,
    sigma: Vec<f64>,
    v: DMatrix<f64>,
}

fn full_svd(m: &DMatrix<f64>) -> FullSvd {
    let svd = to_faer(m).svd().expect("SVD of a finite matrix converges");
    FullSvd {
        u: from_faer(svd.U()),
        sigma: svd.S().column_vector().iter().copied().collect(),
        v: from_faer(svd.V()),
    }
}

fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    to_faer(m).singular_values().expect("SVD of a finite matrix converges")
}

/// Singular values of a complex matrix, in nonincreasing order.
pub(crate) fn complex_singular_values(m: &CMatrix) -> Vec<f64> {
    Mat::<c64>::from_fn(m.nrows(), m.ncols(), |i, j| {
        let z = m[(i, j)];
        c64::new(z.re, z.im)
    })
    .singular_values()
    .expect("SVD of a finite matrix converges")
}

/// Eigenvalues of a real square matrix; `None` if the iteration fails.
pub(crate) fn eigenvalues(m: &DMatrix<f64>) -> Option<Vec<Complex64>> {
    let ev = to_faer(m).eigenvalues().ok()?;
    Some(ev.iter().map(|z| Complex64::new(z.re, z.im)).collect())
}

/// Default absolute rank tolerance for `m`.
pub fn default_tol(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let smax = singular_values(m).first().copied().unwrap_or(0.0);
    rank_tol(m.nrows(), m.ncols(), smax)
}

/// Numerical rank of `m` at absolute tolerance `tol`.
pub fn rank(m: &DMatrix<f64>, tol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    singular_values(m).iter().filter(|&&s| s > tol).count()
}

/// Orthonormal basis (as columns) of the right null space of `m`.
pub fn null_space(m: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let c = m.ncols();
    if c == 0 {
        return DMatrix::zeros(0, 0);
    }
    if m.nrows() == 0 {
        return DMatrix::identity(c, c);
    }
    let svd = full_svd(m);
    let r = svd.sigma.iter().filter(|&&s| s > tol).count();
    svd.v.columns(r, c - r).into_owned()
}

/// Orthonormal basis (as rows) of the left null space of `m`: `N * m = 0`
/// and `rows(N) + rank(m) = rows(m)`. A full-row-rank `m` yields a `0 x rows`
/// matrix.
pub fn left_nullspace(m: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    null_space(&m.transpose(), tol).transpose()
}

/// Moore-Penrose pseudo-inverse with singular values at or below `tol`
/// treated as zero.
pub fn pinv(m: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return DMatrix::zeros(c, r);
    }
    let svd = full_svd(m);
    let mut out = DMatrix::zeros(c, r);
    for (k, &s) in svd.sigma.iter().enumerate() {
        if s > tol {
            out += (svd.v.column(k) / s) * svd.u.column(k).transpose();
        }
    }
    out
}

/// LU factorisation with partial pivoting of a dense complex matrix.
///
/// Pivots whose magnitude falls to or below `floor` are replaced by `floor`
/// when the factorisation is built with [`ComplexLu::with_floor`]; this is how
/// inverse iteration copes with a shift that hits an eigenvalue exactly.
pub struct ComplexLu {
    lu: CMatrix,
    perm: Vec<usize>,
    min_pivot: f64,
    scale: f64,
}

impl ComplexLu {
    pub fn new(m: &CMatrix) -> Self {
        Self::factor(m, None)
    }

    pub fn with_floor(m: &CMatrix, floor: f64) -> Self {
        Self::factor(m, Some(floor))
    }

    fn factor(m: &CMatrix, floor: Option<f64>) -> Self {
        let n = m.nrows();
        assert_eq!(n, m.ncols(), "LU needs a square matrix");
        let mut lu = m.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = lu.iter().fold(0.0_f64, |a, z| a.max(z.norm()));
        let mut min_pivot = f64::INFINITY;
        for k in 0..n {
            let (p, _) = (k..n).fold((k, -1.0), |(bi, bv), i| {
                let v = lu[(i, k)].norm();
                if v > bv {
                    (i, v)
                } else {
                    (bi, bv)
                }
            });
            if p != k {
                lu.swap_rows(p, k);
                perm.swap(p, k);
            }
            let mut piv = lu[(k, k)];
            if let Some(f) = floor {
                if piv.norm() <= f {
                    piv = Complex64::new(f, 0.0);
                    lu[(k, k)] = piv;
                }
            }
            min_pivot = min_pivot.min(piv.norm());
            if piv.norm() == 0.0 {
                continue;
            }
            for i in (k + 1)..n {
                let factor = lu[(i, k)] / piv;
                lu[(i, k)] = factor;
                if factor.norm() == 0.0 {
                    continue;
                }
                for j in (k + 1)..n {
                    let t = lu[(k, j)];
                    lu[(i, j)] -= factor * t;
                }
            }
        }
        if n == 0 {
            min_pivot = f64::INFINITY;
        }
        ComplexLu {
            lu,
            perm,
            min_pivot,
            scale,
        }
    }

    /// True when the smallest pivot is negligible relative to the entries.
    pub fn is_singular(&self) -> bool {
        let n = self.lu.nrows();
        if n == 0 {
            return false;
        }
        self.min_pivot <= rank_tol(n, n, self.scale)
    }

    /// Solves `M X = B`. Call only when the factorisation is not singular.
    pub fn solve(&self, b: &CMatrix) -> CMatrix {
        let n = self.lu.nrows();
        let mut x = CMatrix::from_fn(n, b.ncols(), |i, j| b[(self.perm[i], j)]);
        for col in 0..x.ncols() {
            for i in 0..n {
                let mut acc = x[(i, col)];
                for k in 0..i {
                    acc -= self.lu[(i, k)] * x[(k, col)];
                }
                x[(i, col)] = acc;
            }
            for i in (0..n).rev() {
                let mut acc = x[(i, col)];
                for k in (i + 1)..n {
                    acc -= self.lu[(i, k)] * x[(k, col)];
                }
                x[(i, col)] = acc / self.lu[(i, i)];
            }
        }
        x
    }
}
