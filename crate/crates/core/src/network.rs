//! Netlists and whole-system assembly.
//!
//! 1. Each branch becomes a scalar admittance model; embedding it with its
//!    incidence column and summing gives the nodal admittance model
//!    (node voltages in, node injection currents out).
//! 2. Apparatus admittances are appended and embedded at their buses.
//! 3. The whole-system model is `inverse(Ynet + Yapp)`: current injections
//!    in, node voltages out. Node voltages become virtual states.
//!
//! Ground is the implicit reference node and is never listed in `nodes`.

use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use num_complex::{Complex, Complex64};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::Deserialize;
use serde_json::Value;

use crate::circuits::{self, positive, Port};
use crate::error::{Error, Result};
use crate::io::{read_model, read_text};
use crate::linalg::CMatrix;
use crate::model::{DssModel, StateLabel};

pub const GROUND: &str = "GROUND";

#[derive(Debug, Clone, PartialEq)]
pub enum BranchKind {
    R { r: f64 },
    L { l: f64 },
    C { c: f64 },
    /// Series resistor and inductor.
    RL { r: f64, l: f64 },
    /// Scalar admittance read from a model file.
    DssFile { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Terminal {
    Node(String),
    Ground,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub id: String,
    pub kind: BranchKind,
    pub from: String,
    pub to: Terminal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Apparatus {
    pub bus: String,
    pub model_file: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub nodes: Vec<String>,
    pub branches: Vec<Branch>,
    pub apparatus: Vec<Apparatus>,
    /// Directory that relative model file paths are resolved against.
    pub base_dir: PathBuf,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NetlistDoc {
    nodes: Vec<String>,
    branches: Vec<BranchDoc>,
    #[serde(default)]
    apparatus: Vec<ApparatusDoc>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
struct BranchDoc {
    id: String,
    kind: String,
    from: String,
    to: String,
    R: Option<f64>,
    L: Option<f64>,
    C: Option<f64>,
    model_file: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ApparatusDoc {
    bus: String,
    model_file: String,
}

fn param(value: Option<f64>, name: &str, id: &str) -> Result<f64> {
    let v = value.ok_or_else(|| Error::Parse(format!("branch `{id}` is missing `{name}`")))?;
    positive(&format!("{name} of branch `{id}`"), v)?;
    Ok(v)
}

/// Parses a netlist JSON document. Model file paths are kept relative to
/// the current directory.
pub fn parse_netlist(text: &str) -> Result<Network> {
    let value: Value = serde_json::from_str(text)?;
    parse_netlist_value(value, Path::new("."))
}

/// Reads a netlist file; model paths resolve against its directory.
pub fn read_netlist(path: impl AsRef<Path>) -> Result<Network> {
    let path = path.as_ref();
    let value: Value = serde_json::from_str(&read_text(path)?)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_netlist_value(value, &base)
}

/// Builds and validates a network from an already parsed JSON value.
pub fn parse_netlist_value(value: Value, base_dir: &Path) -> Result<Network> {
    let doc: NetlistDoc = serde_json::from_value(value)?;
    let mut node_set = HashSet::new();
    for n in &doc.nodes {
        if n == GROUND {
            return Err(Error::Parse(format!("`{GROUND}` is reserved for the reference node")));
        }
        if !node_set.insert(n.as_str()) {
            return Err(Error::Parse(format!("duplicate node `{n}`")));
        }
    }
    if doc.branches.is_empty() {
        return Err(Error::Parse("netlist has no branches".into()));
    }
    let mut ids = HashSet::new();
    let mut branches = Vec::with_capacity(doc.branches.len());
    for b in doc.branches {
        if !ids.insert(b.id.clone()) {
            return Err(Error::Parse(format!("duplicate branch id `{}`", b.id)));
        }
        if !node_set.contains(b.from.as_str()) {
            return Err(Error::UnknownNode(b.from));
        }
        let to = if b.to == GROUND {
            Terminal::Ground
        } else if node_set.contains(b.to.as_str()) {
            Terminal::Node(b.to.clone())
        } else {
            return Err(Error::UnknownNode(b.to));
        };
        if to == Terminal::Node(b.from.clone()) {
            return Err(Error::Parse(format!("branch `{}` connects a node to itself", b.id)));
        }
        let kind = match b.kind.as_str() {
            "R" => BranchKind::R { r: param(b.R, "R", &b.id)? },
            "L" => BranchKind::L { l: param(b.L, "L", &b.id)? },
            "C" => BranchKind::C { c: param(b.C, "C", &b.id)? },
            "RL" => BranchKind::RL {
                r: param(b.R, "R", &b.id)?,
                l: param(b.L, "L", &b.id)?,
            },
            "dss_file" => BranchKind::DssFile {
                path: PathBuf::from(
                    b.model_file
                        .ok_or_else(|| Error::Parse(format!("branch `{}` is missing `model_file`", b.id)))?,
                ),
            },
            other => return Err(Error::UnknownBranchKind(other.to_string())),
        };
        branches.push(Branch {
            id: b.id,
            kind,
            from: b.from,
            to,
        });
    }
    let mut apparatus = Vec::with_capacity(doc.apparatus.len());
    for a in doc.apparatus {
        if !node_set.contains(a.bus.as_str()) {
            return Err(Error::UnknownNode(a.bus));
        }
        apparatus.push(Apparatus {
            bus: a.bus,
            model_file: PathBuf::from(a.model_file),
        });
    }
    Ok(Network {
        nodes: doc.nodes,
        branches,
        apparatus,
        base_dir: base_dir.to_path_buf(),
    })
}

/// Branch-to-node summation matrix and its transpose.
#[derive(Debug, Clone, PartialEq)]
pub struct IncidenceMaps {
    /// `n_nodes x n_branches`: +1 at `from`, -1 at `to` (none for ground).
    pub mout: DMatrix<f64>,
    /// `n_branches x n_nodes`: branch voltage from node voltages.
    pub min: DMatrix<f64>,
}

impl IncidenceMaps {
    pub fn new(net: &Network) -> Self {
        let index = net.node_index();
        let mut mout = DMatrix::zeros(net.nodes.len(), net.branches.len());
        for (b, br) in net.branches.iter().enumerate() {
            mout[(index[br.from.as_str()], b)] = 1.0;
            if let Terminal::Node(to) = &br.to {
                mout[(index[to.as_str()], b)] = -1.0;
            }
        }
        let min = mout.transpose();
        IncidenceMaps { mout, min }
    }
}

impl Network {
    pub fn node_index(&self) -> HashMap<&str, usize> {
        self.nodes.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect()
    }

    fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    fn voltage_labels(&self) -> Vec<String> {
        self.nodes.iter().map(|n| format!("v:{n}")).collect()
    }

    fn current_labels(&self) -> Vec<String> {
        self.nodes.iter().map(|n| format!("i:{n}")).collect()
    }

    fn scalar_file_model(&self, path: &Path, what: &str) -> Result<DssModel> {
        let model = read_model(self.resolve(path))?;
        if model.m() != 1 || model.p() != 1 {
            return Err(Error::DimensionMismatch(format!(
                "{what} model {} has {} inputs and {} outputs; a single port is required",
                path.display(),
                model.m(),
                model.p()
            )));
        }
        Ok(model)
    }

    /// Scalar admittance model of one branch, with origins under
    /// `branch:<id>`.
    pub fn branch_admittance(&self, branch: &Branch) -> Result<DssModel> {
        let model = match &branch.kind {
            BranchKind::R { r } => circuits::resistor(*r, Port::Admittance)?,
            BranchKind::L { l } => circuits::inductor_admittance(*l)?,
            BranchKind::C { c } => circuits::capacitor_admittance(*c)?,
            BranchKind::RL { r, l } => circuits::series_admittance(&[
                circuits::resistor(*r, Port::Impedance)?,
                circuits::inductor_impedance(*l)?,
            ])?,
            BranchKind::DssFile { path } => self.scalar_file_model(path, &format!("branch `{}`", branch.id))?,
        };
        Ok(model.with_origin_prefix(&format!("branch:{}", branch.id)))
    }

    /// Scalar admittance of one branch at `s`, in exact arithmetic for
    /// lumped elements. File models are evaluated in floating point.
    fn exact_branch_admittance(&self, branch: &Branch, s: &Exact) -> Result<Exact> {
        let one = Exact::one();
        Ok(match &branch.kind {
            BranchKind::R { r } => one / exact_real(*r)?,
            BranchKind::L { l } => one / (s * exact_real(*l)?),
            BranchKind::C { c } => s * exact_real(*c)?,
            BranchKind::RL { r, l } => one / (s * exact_real(*l)? + exact_real(*r)?),
            BranchKind::DssFile { path } => {
                exact(self.scalar_file_model(path, "branch")?.eval_tf(to_f64(s))?[(0, 0)])?
            }
        })
    }
}

/// Nodal admittance model `sum_b embed(Y_b, m_b, m_b^T)`, summed in branch
/// declaration order.
pub fn network_admittance(net: &Network) -> Result<DssModel> {
    if net.branches.is_empty() {
        return Err(Error::Parse("netlist has no branches".into()));
    }
    let maps = IncidenceMaps::new(net);
    let mut total: Option<DssModel> = None;
    for (b, branch) in net.branches.iter().enumerate() {
        let yb = net.branch_admittance(branch)?;
        let left = maps.mout.columns(b, 1).into_owned();
        let right = maps.min.rows(b, 1).into_owned();
        let placed = yb.embed(&left, &right)?;
        total = Some(match total {
            None => placed,
            Some(acc) => acc.sum(&placed)?,
        });
    }
    total
        .expect("at least one branch")
        .with_io_labels(net.voltage_labels(), net.current_labels())
}

/// All apparatus admittances appended and placed at their buses. Without
/// apparatus this is the zero `n_nodes x n_nodes` gain.
pub fn apparatus_stack(net: &Network) -> Result<DssModel> {
    let n = net.nodes.len();
    let index = net.node_index();
    let mut per_bus: HashMap<&str, usize> = HashMap::new();
    for a in &net.apparatus {
        *per_bus.entry(a.bus.as_str()).or_default() += 1;
    }
    let mut seen: HashMap<&str, usize> = HashMap::new();
    let mut stacked: Option<DssModel> = None;
    for a in &net.apparatus {
        let model = net.scalar_file_model(&a.model_file, &format!("apparatus at bus `{}`", a.bus))?;
        let k = seen.entry(a.bus.as_str()).or_default();
        let origin = if per_bus[a.bus.as_str()] > 1 {
            format!("apparatus:{}#{k}", a.bus)
        } else {
            format!("apparatus:{}", a.bus)
        };
        *k += 1;
        let model = model.with_origin_prefix(&origin);
        stacked = Some(match stacked {
            None => model,
            Some(acc) => acc.append(&model)?,
        });
    }
    let model = match stacked {
        None => DssModel::gain(DMatrix::zeros(n, n), net.voltage_labels(), net.current_labels())?,
        Some(stacked) => {
            let mut select = DMatrix::zeros(n, net.apparatus.len());
            for (j, a) in net.apparatus.iter().enumerate() {
                select[(index[a.bus.as_str()], j)] = 1.0;
            }
            stacked.embed(&select, &select.transpose())?
        }
    };
    model.with_io_labels(net.voltage_labels(), net.current_labels())
}

/// `inverse(Ynet + Yapp)`. The node voltages that become states are labelled
/// `virtual:node:<id>/v`.
pub fn whole_system(ynet: &DssModel, yapp: &DssModel) -> Result<DssModel> {
    if ynet.m() != ynet.p() || yapp.m() != ynet.m() || yapp.p() != ynet.p() {
        return Err(Error::DimensionMismatch(format!(
            "network model is {}x{}, apparatus model is {}x{}",
            ynet.p(),
            ynet.m(),
            yapp.p(),
            yapp.m()
        )));
    }
    let z = ynet.sum(yapp)?.inverse()?;
    let nodes = z.m();
    let first_virtual = z.n() - nodes;
    let mut states = z.state_labels().to_vec();
    for (k, label) in z.output_labels().iter().enumerate() {
        let node = label.strip_prefix("v:").unwrap_or(label);
        states[first_virtual + k] = StateLabel::virtual_state("v", format!("virtual:node:{node}"));
    }
    z.with_state_labels(states)
}

/// Steps 1 to 3 in one call.
pub fn build_whole_system(net: &Network) -> Result<DssModel> {
    whole_system(&network_admittance(net)?, &apparatus_stack(net)?)
}

type Exact = Complex<BigRational>;

fn exact_real(x: f64) -> Result<Exact> {
    BigRational::from_float(x)
        .map(|r| Complex::new(r, BigRational::zero()))
        .ok_or_else(|| Error::Parse(format!("non-finite value {x}")))
}

fn exact(z: Complex64) -> Result<Exact> {
    match (BigRational::from_float(z.re), BigRational::from_float(z.im)) {
        (Some(re), Some(im)) => Ok(Complex::new(re, im)),
        _ => Err(Error::Parse(format!("non-finite value {z}"))),
    }
}

fn to_f64(z: &Exact) -> Complex64 {
    Complex64::new(z.re.to_f64().unwrap_or(f64::NAN), z.im.to_f64().unwrap_or(f64::NAN))
}

fn to_cmatrix(m: &[Vec<Exact>]) -> CMatrix {
    let n = m.len();
    CMatrix::from_fn(n, n, |i, j| to_f64(&m[i][j]))
}

fn exact_nodal_admittance(net: &Network, s: &Exact, with_apparatus: bool) -> Result<Vec<Vec<Exact>>> {
    let index = net.node_index();
    let n = net.nodes.len();
    let mut y = vec![vec![Exact::zero(); n]; n];
    for br in &net.branches {
        let yb = net.exact_branch_admittance(br, s)?;
        let f = index[br.from.as_str()];
        y[f][f] += &yb;
        if let Terminal::Node(to) = &br.to {
            let t = index[to.as_str()];
            y[t][t] += &yb;
            y[f][t] -= &yb;
            y[t][f] -= &yb;
        }
    }
    if with_apparatus {
        for a in &net.apparatus {
            let k = index[a.bus.as_str()];
            let ya = net.scalar_file_model(&a.model_file, "apparatus")?.eval_tf(to_f64(s))?[(0, 0)];
            y[k][k] += exact(ya)?;
        }
    }
    Ok(y)
}

/// Gauss-Jordan inverse; `None` when singular.
fn exact_inverse(mut m: Vec<Vec<Exact>>) -> Option<Vec<Vec<Exact>>> {
    let n = m.len();
    let mut inv: Vec<Vec<Exact>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { Exact::one() } else { Exact::zero() }).collect())
        .collect();
    for col in 0..n {
        let piv = (col..n).find(|&r| !m[r][col].is_zero())?;
        m.swap(col, piv);
        inv.swap(col, piv);
        let p = m[col][col].clone();
        for j in 0..n {
            m[col][j] = &m[col][j] / &p;
            inv[col][j] = &inv[col][j] / &p;
        }
        for r in 0..n {
            if r == col || m[r][col].is_zero() {
                continue;
            }
            let f = m[r][col].clone();
            for j in 0..n {
                let (a, b) = (&m[col][j] * &f, &inv[col][j] * &f);
                m[r][j] -= a;
                inv[r][j] -= b;
            }
        }
    }
    Some(inv)
}

/// Nodal admittance matrix at `s` assembled by direct complex arithmetic,
/// apparatus included when `with_apparatus` is set. Lumped elements are
/// combined exactly and rounded once.
pub fn direct_nodal_admittance(net: &Network, s: Complex64, with_apparatus: bool) -> Result<CMatrix> {
    Ok(to_cmatrix(&exact_nodal_admittance(net, &exact(s)?, with_apparatus)?))
}

/// Whole-system impedance matrix at `s` by direct complex arithmetic. The
/// nodal matrix is inverted exactly, so the only rounding is in the final
/// conversion (and in evaluating any file models).
pub fn direct_whole_system(net: &Network, s: Complex64) -> Result<CMatrix> {
    let y = exact_nodal_admittance(net, &exact(s)?, true)?;
    exact_inverse(y)
        .map(|z| to_cmatrix(&z))
        .ok_or(Error::SingularAtS { re: s.re, im: s.im })
}
