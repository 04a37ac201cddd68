//! Composition of descriptor models: inverse, sum, append, I/O embedding,
//! matrix append and feedback.
//!
//! Every combinator keeps `E` diagonal and carries the state labels of its
//! operands through unchanged, adding virtual labels where it introduces
//! algebraic variables.

use std::collections::HashSet;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{blkdiag, hstack, vstack};
use crate::model::{check_unique, DssModel, StateLabel};

/// Concatenates two label lists. On a path collision both sides are
/// disambiguated by prefixing their origins with `[0]` and `[1]`.
fn concat_states(lhs: &[StateLabel], rhs: &[StateLabel]) -> Result<Vec<StateLabel>> {
    let left: HashSet<String> = lhs.iter().map(StateLabel::path).collect();
    let collides = rhs.iter().any(|s| left.contains(&s.path()));
    let out: Vec<StateLabel> = if collides {
        lhs.iter()
            .map(|s| s.prefixed("[0]"))
            .chain(rhs.iter().map(|s| s.prefixed("[1]")))
            .collect()
    } else {
        lhs.iter().chain(rhs.iter()).cloned().collect()
    };
    check_unique(&out)?;
    Ok(out)
}

/// Virtual labels named after `names`, with an origin that does not clash
/// with `existing`.
fn fresh_virtual(existing: &[StateLabel], names: &[String], base: &str) -> Vec<StateLabel> {
    let taken: HashSet<String> = existing.iter().map(StateLabel::path).collect();
    let mut origin = base.to_string();
    let mut k = 1;
    loop {
        let labels: Vec<StateLabel> = names
            .iter()
            .map(|n| StateLabel::virtual_state(n.clone(), origin.clone()))
            .collect();
        let paths: HashSet<String> = labels.iter().map(StateLabel::path).collect();
        if paths.len() == labels.len() && paths.is_disjoint(&taken) {
            return labels;
        }
        origin = format!("{base}.{k}");
        k += 1;
        if k > 1000 {
            // names themselves repeat; fall back to indexed names
            return names
                .iter()
                .enumerate()
                .map(|(i, n)| StateLabel::virtual_state(format!("{n}#{i}"), origin.clone()))
                .collect();
        }
    }
}

fn regular(model: DssModel) -> Result<DssModel> {
    if model.pencil_is_regular() {
        Ok(model)
    } else {
        Err(Error::IrregularPencil)
    }
}

impl DssModel {
    /// Swaps the roles of input and output. The old inputs become virtual
    /// algebraic states:
    ///
    /// ```text
    /// [E 0] [x']   [ A  B] [x]   [0]
    /// [0 0] [u'] = [-C -D] [u] + [I] y,     u = [0 I] [x; u]
    /// ```
    pub fn inverse(&self) -> Result<DssModel> {
        let (n, m, p) = (self.n(), self.m(), self.p());
        if m != p {
            return Err(Error::NonSquareIO {
                inputs: m,
                outputs: p,
            });
        }
        let e = blkdiag(&self.e, &DMatrix::zeros(m, m));
        let a = vstack(&hstack(&self.a, &self.b), &hstack(&(-&self.c), &(-&self.d)));
        let b = vstack(&DMatrix::zeros(n, m), &DMatrix::identity(m, m));
        let c = hstack(&DMatrix::zeros(m, n), &DMatrix::identity(m, m));
        let d = DMatrix::zeros(m, m);
        let mut states = self.states.clone();
        states.extend(fresh_virtual(&self.states, &self.inputs, "virtual"));
        regular(DssModel {
            e,
            a,
            b,
            c,
            d,
            states,
            inputs: self.outputs.clone(),
            outputs: self.inputs.clone(),
        })
    }

    /// Parallel connection: shared input, summed outputs.
    pub fn sum(&self, other: &DssModel) -> Result<DssModel> {
        if self.m() != other.m() || self.p() != other.p() {
            return Err(Error::DimensionMismatch(format!(
                "sum of {}x{} and {}x{} models",
                self.p(),
                self.m(),
                other.p(),
                other.m()
            )));
        }
        Ok(DssModel {
            e: blkdiag(&self.e, &other.e),
            a: blkdiag(&self.a, &other.a),
            b: vstack(&self.b, &other.b),
            c: hstack(&self.c, &other.c),
            d: &self.d + &other.d,
            states: concat_states(&self.states, &other.states)?,
            inputs: self.inputs.clone(),
            outputs: self.outputs.clone(),
        })
    }

    /// Block-diagonal stacking; inputs and outputs are concatenated.
    pub fn append(&self, other: &DssModel) -> Result<DssModel> {
        Ok(DssModel {
            e: blkdiag(&self.e, &other.e),
            a: blkdiag(&self.a, &other.a),
            b: blkdiag(&self.b, &other.b),
            c: blkdiag(&self.c, &other.c),
            d: blkdiag(&self.d, &other.d),
            states: concat_states(&self.states, &other.states)?,
            inputs: self.inputs.iter().chain(&other.inputs).cloned().collect(),
            outputs: self.outputs.iter().chain(&other.outputs).cloned().collect(),
        })
    }

    /// Reshapes the ports with constant matrices: `y' = L y`, `u = R u'`.
    /// Labels are kept where the port count is unchanged and replaced by
    /// generic ones otherwise.
    pub fn embed(&self, left: &DMatrix<f64>, right: &DMatrix<f64>) -> Result<DssModel> {
        if left.ncols() != self.p() || right.nrows() != self.m() {
            return Err(Error::DimensionMismatch(format!(
                "embed of a {}x{} model with L {}x{} and R {}x{}",
                self.p(),
                self.m(),
                left.nrows(),
                left.ncols(),
                right.nrows(),
                right.ncols()
            )));
        }
        let inputs = if right.ncols() == self.m() {
            self.inputs.clone()
        } else {
            (0..right.ncols()).map(|k| format!("u{k}")).collect()
        };
        let outputs = if left.nrows() == self.p() {
            self.outputs.clone()
        } else {
            (0..left.nrows()).map(|k| format!("y{k}")).collect()
        };
        Ok(DssModel {
            e: self.e.clone(),
            a: self.a.clone(),
            b: &self.b * right,
            c: left * &self.c,
            d: left * &self.d * right,
            states: self.states.clone(),
            inputs,
            outputs,
        })
    }

    /// Grid of blocks `G_ij` realising `y_i = sum_j G_ij u_j`. Blocks in a
    /// grid row share their output size, blocks in a grid column their input
    /// size.
    pub fn matrix_append(grid: &[Vec<DssModel>]) -> Result<DssModel> {
        let rows = grid.len();
        let cols = grid.first().map_or(0, Vec::len);
        if rows == 0 || cols == 0 {
            return Err(Error::EmptyGrid);
        }
        if grid.iter().any(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch("ragged block grid".into()));
        }
        let out_dims: Vec<usize> = grid.iter().map(|r| r[0].p()).collect();
        let in_dims: Vec<usize> = grid[0].iter().map(DssModel::m).collect();
        for (i, row) in grid.iter().enumerate() {
            for (j, blk) in row.iter().enumerate() {
                if blk.p() != out_dims[i] || blk.m() != in_dims[j] {
                    return Err(Error::DimensionMismatch(format!(
                        "block ({i}, {j}) is {}x{}, expected {}x{}",
                        blk.p(),
                        blk.m(),
                        out_dims[i],
                        in_dims[j]
                    )));
                }
            }
        }
        let mut stacked: Option<DssModel> = None;
        for (i, row) in grid.iter().enumerate() {
            for (j, blk) in row.iter().enumerate() {
                let blk = blk.clone().with_origin_prefix(&format!("({i},{j})"));
                stacked = Some(match stacked {
                    None => blk,
                    Some(acc) => acc.append(&blk)?,
                });
            }
        }
        let stacked = stacked.expect("non-empty grid");

        let in_offsets: Vec<usize> = offsets(&in_dims);
        let out_offsets: Vec<usize> = offsets(&out_dims);
        let total_in: usize = in_dims.iter().sum();
        let total_out: usize = out_dims.iter().sum();
        // block (i, j) occupies consecutive port ranges in the appended model
        let mut right = DMatrix::zeros(stacked.m(), total_in);
        let mut left = DMatrix::zeros(total_out, stacked.p());
        let (mut bin, mut bout) = (0, 0);
        for i in 0..rows {
            for j in 0..cols {
                for k in 0..in_dims[j] {
                    right[(bin + k, in_offsets[j] + k)] = 1.0;
                }
                for k in 0..out_dims[i] {
                    left[(out_offsets[i] + k, bout + k)] = 1.0;
                }
                bin += in_dims[j];
                bout += out_dims[i];
            }
        }
        let inputs = grid[0].iter().flat_map(|b| b.inputs.clone()).collect();
        let outputs = grid.iter().flat_map(|r| r[0].outputs.clone()).collect();
        stacked.embed(&left, &right)?.with_io_labels(inputs, outputs)
    }

    /// Negative feedback, the usual closed loop: `feedback(other, -1.0)`.
    pub fn negative_feedback(&self, other: &DssModel) -> Result<DssModel> {
        self.feedback(other, -1.0)
    }

    /// Closes `other` around `self`: `u_self = u + sign * y_other`,
    /// `u_other = y_self`, output `y_self`.
    ///
    /// The loop is realised without inverting `I - sign D1 D2`: the closed-loop
    /// output `w` becomes a virtual algebraic state with the row
    /// `0 = C1 x1 + D1 (u + sign (C2 x2 + D2 w)) - w`. An ill-posed algebraic
    /// loop shows up as an irregular pencil.
    pub fn feedback(&self, other: &DssModel, sign: f64) -> Result<DssModel> {
        if self.p() != other.m() || self.m() != other.p() {
            return Err(Error::DimensionMismatch(format!(
                "feedback of {}x{} forward path with {}x{} return path",
                self.p(),
                self.m(),
                other.p(),
                other.m()
            )));
        }
        let (n1, n2, m, p) = (self.n(), other.n(), self.m(), self.p());
        let b1c2 = &self.b * &other.c * sign;
        let b1d2 = &self.b * &other.d * sign;
        let d1c2 = &self.d * &other.c * sign;
        let loop_gain = &self.d * &other.d * sign - DMatrix::<f64>::identity(p, p);

        let row1 = hstack(&hstack(&self.a, &b1c2), &b1d2);
        let row2 = hstack(&hstack(&DMatrix::zeros(n2, n1), &other.a), &other.b);
        let row3 = hstack(&hstack(&self.c, &d1c2), &loop_gain);
        let a = vstack(&vstack(&row1, &row2), &row3);
        let e = blkdiag(&blkdiag(&self.e, &other.e), &DMatrix::zeros(p, p));
        let b = vstack(&vstack(&self.b, &DMatrix::zeros(n2, m)), &self.d);
        let c = hstack(&DMatrix::zeros(p, n1 + n2), &DMatrix::identity(p, p));
        let d = DMatrix::zeros(p, m);

        let mut states = concat_states(&self.states, &other.states)?;
        let w = fresh_virtual(&states, &self.outputs, "virtual:feedback");
        states.extend(w);
        regular(DssModel {
            e,
            a,
            b,
            c,
            d,
            states,
            inputs: self.inputs.clone(),
            outputs: self.outputs.clone(),
        })
    }
}

fn offsets(dims: &[usize]) -> Vec<usize> {
    dims.iter()
        .scan(0, |acc, &d| {
            let o = *acc;
            *acc += d;
            Some(o)
        })
        .collect()
}
