//! Process-wide numerical tolerance.
//!
//! Rank decisions use `tol = factor * sigma_max`, where `factor` defaults to
//! `max(rows, cols) * f64::EPSILON`. A front end may replace the factor once at
//! startup with [`set_rank_factor`]; afterwards it is read-only.

use std::sync::OnceLock;

static RANK_FACTOR: OnceLock<f64> = OnceLock::new();

/// Overrides the relative rank factor. Returns `false` if it was already set.
pub fn set_rank_factor(factor: f64) -> bool {
    RANK_FACTOR.set(factor).is_ok()
}

/// The configured override, if any.
pub fn rank_factor() -> Option<f64> {
    RANK_FACTOR.get().copied()
}

/// Absolute rank threshold for a `rows x cols` matrix whose largest singular
/// value (or a comparable norm) is `scale`.
pub fn rank_tol(rows: usize, cols: usize, scale: f64) -> f64 {
    let factor = rank_factor().unwrap_or(rows.max(cols).max(1) as f64 * f64::EPSILON);
    factor * scale
}

/// Relative threshold below which `|psi E phi|` marks a finite mode as
/// defective, and below which two finite eigenvalues count as repeated.
pub const DEFECT_TOL: f64 = 1e-8;
