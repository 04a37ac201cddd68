//! Descriptor models of R, L and C elements and their series and parallel
//! composition.
//!
//! Element values are in SI units. Inductor and capacitor admittance /
//! impedance pairs are duals: the proper form is a one-state explicit model,
//! the improper form is its inverse, carrying one extra virtual state.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::{DssModel, Labels, StateLabel};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementKind {
    R,
    L,
    C,
}

/// A positive, finite element value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementValue {
    pub kind: ElementKind,
    pub value: f64,
}

impl ElementValue {
    pub fn new(kind: ElementKind, value: f64) -> Result<Self> {
        let what = match kind {
            ElementKind::R => "R",
            ElementKind::L => "L",
            ElementKind::C => "C",
        };
        positive(what, value)?;
        Ok(ElementValue { kind, value })
    }
}

/// Which port quantity a two-terminal model takes as input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Port {
    /// current in, voltage out
    Impedance,
    /// voltage in, current out
    Admittance,
}

pub(crate) fn positive(what: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveValue {
            what: what.to_string(),
            value,
        })
    }
}

fn scalar(x: f64) -> DMatrix<f64> {
    DMatrix::from_element(1, 1, x)
}

fn integrator(gain: f64, state: &str, origin: &str, input: &str) -> DssModel {
    DssModel::from_ss(
        scalar(0.0),
        scalar(gain),
        scalar(1.0),
        scalar(0.0),
        Labels::new(
            vec![StateLabel::physical(state, origin)],
            vec![input.to_string()],
            vec![state.to_string()],
        ),
    )
    .expect("scalar integrator is well formed")
}

/// Moves the virtual states created by `inverse` under the element origin.
fn adopt_virtual(model: DssModel, origin: &str) -> DssModel {
    let states = model
        .state_labels()
        .iter()
        .map(|s| {
            if s.is_virtual() {
                StateLabel::virtual_state(s.name.clone(), origin)
            } else {
                s.clone()
            }
        })
        .collect();
    model.with_state_labels(states).expect("element labels are unique")
}

/// `1/(sL)`: voltage in, inductor current out.
pub fn inductor_admittance(l: f64) -> Result<DssModel> {
    positive("L", l)?;
    Ok(integrator(1.0 / l, "i", "L", "v"))
}

/// `sL`: current in, voltage out; the voltage is a virtual state.
pub fn inductor_impedance(l: f64) -> Result<DssModel> {
    Ok(adopt_virtual(inductor_admittance(l)?.inverse()?, "L"))
}

/// `1/(sC)`: current in, capacitor voltage out.
pub fn capacitor_impedance(c: f64) -> Result<DssModel> {
    positive("C", c)?;
    Ok(integrator(1.0 / c, "v", "C", "i"))
}

/// `sC`: voltage in, current out; the current is a virtual state.
pub fn capacitor_admittance(c: f64) -> Result<DssModel> {
    Ok(adopt_virtual(capacitor_impedance(c)?.inverse()?, "C"))
}

/// Stateless resistor, `D = [R]` as an impedance or `[1/R]` as an admittance.
pub fn resistor(r: f64, port: Port) -> Result<DssModel> {
    positive("R", r)?;
    let (d, input, output) = match port {
        Port::Impedance => (r, "i", "v"),
        Port::Admittance => (1.0 / r, "v", "i"),
    };
    DssModel::gain(scalar(d), vec![input.into()], vec![output.into()])
}

/// Model of one element in the requested port form.
pub fn element(value: ElementValue, port: Port) -> Result<DssModel> {
    match (value.kind, port) {
        (ElementKind::R, p) => resistor(value.value, p),
        (ElementKind::L, Port::Impedance) => inductor_impedance(value.value),
        (ElementKind::L, Port::Admittance) => inductor_admittance(value.value),
        (ElementKind::C, Port::Impedance) => capacitor_impedance(value.value),
        (ElementKind::C, Port::Admittance) => capacitor_admittance(value.value),
    }
}

fn sum_scalar(models: &[DssModel]) -> Result<DssModel> {
    let first = models
        .first()
        .ok_or_else(|| Error::DimensionMismatch("no elements to combine".into()))?;
    if models.iter().any(|g| g.m() != 1 || g.p() != 1) {
        return Err(Error::DimensionMismatch(
            "series/parallel elements must be scalar two-terminal models".into(),
        ));
    }
    let paths: Vec<String> = models
        .iter()
        .flat_map(|g| g.state_labels().iter().map(StateLabel::path))
        .collect();
    let unique: std::collections::HashSet<&String> = paths.iter().collect();
    let clash = unique.len() != paths.len();
    let tag = |k: usize, g: &DssModel| {
        if clash {
            g.clone().with_origin_prefix(&k.to_string())
        } else {
            g.clone()
        }
    };
    models
        .iter()
        .enumerate()
        .skip(1)
        .try_fold(tag(0, first), |acc, (k, g)| acc.sum(&tag(k, g)))
}

/// Series connection of impedances (their sum). When element states share a
/// label, each element's origins are prefixed with its position.
pub fn series(impedances: &[DssModel]) -> Result<DssModel> {
    sum_scalar(impedances)
}

/// Parallel connection of admittances (their sum).
pub fn parallel(admittances: &[DssModel]) -> Result<DssModel> {
    sum_scalar(admittances)
}

/// Admittance of a series chain: `inverse(series(..))`.
pub fn series_admittance(impedances: &[DssModel]) -> Result<DssModel> {
    series(impedances)?.inverse()
}

/// Impedance of a parallel group: `inverse(parallel(..))`.
pub fn parallel_impedance(admittances: &[DssModel]) -> Result<DssModel> {
    parallel(admittances)?.inverse()
}
