//! Descriptor state-space (DSS) models of electrical networks.
//!
//! A [`DssModel`] is `E x' = A x + B u, y = C x + D u` with diagonal `E`,
//! which lets improper blocks such as an inductor impedance `sL` be written
//! down and composed directly. Models are combined with [`DssModel::inverse`],
//! [`DssModel::sum`], [`DssModel::append`], [`DssModel::embed`],
//! [`DssModel::matrix_append`] and [`DssModel::feedback`]; every state keeps
//! its label and origin through these operations. [`to_ss`] converts back to
//! explicit form, and [`modal`] computes modes and participation factors on
//! the descriptor pencil directly.

pub mod algebra;
pub mod circuits;
pub mod error;
pub mod io;
pub mod linalg;
pub mod modal;
pub mod model;
pub mod network;
pub mod tolerance;
pub mod transform;

pub use error::{Error, Result};
pub use linalg::{left_nullspace, CMatrix};
pub use model::{DssModel, Labels, StateKind, StateLabel};
pub use transform::{to_ss, SsResult};

pub use nalgebra::DMatrix;
pub use num_complex::Complex64;
