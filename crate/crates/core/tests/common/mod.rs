//! Fixtures and independent oracles shared by the integration tests.
#![allow(dead_code)]

use dss_core::network::{parse_netlist, BranchKind, Network, Terminal};
use dss_core::{CMatrix, Complex64, DMatrix, DssModel, Labels};
use num_bigint::BigInt;
use num_complex::Complex;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn log_omegas(from: f64, to: f64, n: usize) -> Vec<f64> {
    let (a, b) = (from.log10(), to.log10());
    (0..n).map(|k| 10f64.powf(a + (b - a) * k as f64 / (n - 1) as f64)).collect()
}

pub fn jw(w: f64) -> Complex64 {
    Complex64::new(0.0, w)
}

/// `max|a - b| / max|b|`.
pub fn rel_err(a: &CMatrix, b: &CMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape());
    let scale = b.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let diff = a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

pub fn cinv(m: &CMatrix) -> CMatrix {
    m.clone().lu().try_inverse().expect("invertible")
}

pub fn ss(a: &[f64], b: &[f64], c: &[f64], d: &[f64], n: usize, m: usize, p: usize) -> DssModel {
    DssModel::from_ss(
        DMatrix::from_row_slice(n, n, a),
        DMatrix::from_row_slice(n, m, b),
        DMatrix::from_row_slice(p, n, c),
        DMatrix::from_row_slice(p, m, d),
        Labels::generic(n, m, p),
    )
    .unwrap()
}

/// Two decoupled first-order states with poles -1 and -2.
pub fn decoupled() -> DssModel {
    ss(&[-1.0, 0.0, 0.0, -2.0], &[1.0, 1.0], &[1.0, 1.0], &[0.0], 2, 1, 1)
}

/// Lossless LC tank, `x = (i_L, v_C)`, poles `+-j/sqrt(LC)`.
pub fn lc_tank(l: f64, c: f64) -> DssModel {
    ss(&[0.0, 1.0 / l, -1.0 / c, 0.0], &[0.0, 1.0 / c], &[0.0, 1.0], &[0.0], 2, 1, 1)
}

/// A random R/L/C/RL netlist with at most 5 nodes and 8 branches in which
/// every node has a path to ground.
pub fn random_netlist(seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=5usize);
    let n_branches = rng.random_range(n..=8usize);
    let mut branches = Vec::new();
    for b in 0..n_branches {
        let from = if b < n { b } else { rng.random_range(0..n) };
        let to = if b < n {
            // tree edge towards ground or an earlier node
            match rng.random_range(0..=b) {
                0 => None,
                k => Some(k - 1),
            }
        } else {
            let t = rng.random_range(0..=n);
            if t == n || t == from {
                None
            } else {
                Some(t)
            }
        };
        let mut value = || 10f64.powf(rng.random_range(-1.0..1.0));
        let (kind, params) = match b % 4 {
            0 => ("R", format!("\"R\":{}", value())),
            1 => ("L", format!("\"L\":{}", value())),
            2 => ("C", format!("\"C\":{}", value())),
            _ => ("RL", format!("\"R\":{},\"L\":{}", value(), value())),
        };
        let to = to.map_or("GROUND".to_string(), |t| format!("n{t}"));
        branches.push(format!(
            "{{\"id\":\"b{b}\",\"kind\":\"{kind}\",\"from\":\"n{from}\",\"to\":\"{to}\",{params}}}"
        ));
    }
    let nodes: Vec<String> = (0..n).map(|k| format!("\"n{k}\"")).collect();
    format!("{{\"nodes\":[{}],\"branches\":[{}]}}", nodes.join(","), branches.join(","))
}

pub fn random_network(seed: u64) -> Network {
    parse_netlist(&random_netlist(seed)).unwrap()
}

type Q = Complex<BigRational>;
type G = Complex<BigInt>;

fn q(x: f64) -> Q {
    Complex::new(BigRational::from_float(x).unwrap(), BigRational::zero())
}

/// Exact quotient of Gaussian integers known to divide.
fn exact_div(x: &G, y: &G) -> G {
    let den = y.norm_sqr();
    let num = x * y.conj();
    assert!((&num.re % &den).is_zero() && (&num.im % &den).is_zero(), "inexact division");
    Complex::new(num.re / &den, num.im / den)
}

/// Whole-system impedance at `jw`, exact up to one final rounding.
///
/// Modified nodal analysis: unknowns are the node voltages plus a current
/// for every R, L and RL branch, so no element value is ever inverted and
/// all entries are dyadic. Rows are scaled to Gaussian integers and solved
/// by fraction-free Gauss-Jordan elimination.
pub fn oracle_impedance(net: &Network, w: f64) -> CMatrix {
    let s = Complex::new(BigRational::zero(), BigRational::from_float(w).unwrap());
    let n = net.nodes.len();
    let pos = |id: &str| net.nodes.iter().position(|x| x == id).unwrap();
    let currents: Vec<usize> = (0..net.branches.len())
        .filter(|&b| !matches!(net.branches[b].kind, BranchKind::C { .. }))
        .collect();
    let size = n + currents.len();
    let cols = size + n;
    let mut m = vec![vec![Q::zero(); cols]; size];
    for k in 0..n {
        m[k][size + k] = Q::one();
    }
    for (b, br) in net.branches.iter().enumerate() {
        let f = pos(&br.from);
        let t = match &br.to {
            Terminal::Node(t) => Some(pos(t)),
            Terminal::Ground => None,
        };
        match br.kind {
            BranchKind::C { c } => {
                let yc = &s * q(c);
                m[f][f] += &yc;
                if let Some(t) = t {
                    m[t][t] += &yc;
                    m[f][t] -= &yc;
                    m[t][f] -= &yc;
                }
            }
            BranchKind::DssFile { .. } => panic!("oracle handles lumped elements only"),
            _ => {
                let row = n + currents.iter().position(|&x| x == b).unwrap();
                let z = match br.kind {
                    BranchKind::R { r } => q(r),
                    BranchKind::L { l } => &s * q(l),
                    BranchKind::RL { r, l } => q(r) + &s * q(l),
                    _ => unreachable!(),
                };
                // current leaves `from` and enters `to`
                m[f][row] += Q::one();
                m[row][f] += Q::one();
                if let Some(t) = t {
                    m[t][row] -= Q::one();
                    m[row][t] -= Q::one();
                }
                m[row][row] -= z;
            }
        }
    }
    // all denominators are powers of two: the largest clears a row
    let mut a: Vec<Vec<G>> = m
        .iter()
        .map(|row| {
            let den = row
                .iter()
                .flat_map(|z| [z.re.denom().clone(), z.im.denom().clone()])
                .max()
                .unwrap();
            row.iter()
                .map(|z| {
                    let re = z.re.numer() * (&den / z.re.denom());
                    let im = z.im.numer() * (&den / z.im.denom());
                    Complex::new(re, im)
                })
                .collect()
        })
        .collect();
    let mut prev = G::one();
    for k in 0..size {
        let p = (k..size).find(|&r| !a[r][k].is_zero()).expect("singular system");
        a.swap(k, p);
        for i in 0..size {
            if i == k {
                continue;
            }
            let aik = a[i][k].clone();
            for j in 0..cols {
                let v = &a[k][k] * &a[i][j] - &aik * &a[k][j];
                a[i][j] = exact_div(&v, &prev);
            }
        }
        prev = a[k][k].clone();
    }
    CMatrix::from_fn(n, n, |i, j| {
        let d = &a[i][i];
        let num = &a[i][size + j] * d.conj();
        let den = d.norm_sqr();
        Complex64::new(
            BigRational::new(num.re, den.clone()).to_f64().unwrap(),
            BigRational::new(num.im, den).to_f64().unwrap(),
        )
    })
}

/// Finite generalized eigenvalues via the shift-inverted pencil:
/// eigenvalues `mu` of `(A - sigma E)^-1 E` give `lambda = sigma + 1/mu`.
/// Infinite modes sit at `mu = 0`; index-2 chains split to `|mu| ~ sqrt(eps)`,
/// so the cutoff is well above that. Fixtures keep `|lambda|` far below
/// `1e6`.
pub fn shift_invert_eigs(model: &DssModel) -> Vec<Complex64> {
    let sigma = std::f64::consts::FRAC_1_PI;
    let shifted = model.a() - model.e() * sigma;
    let m = shifted.lu().solve(model.e()).expect("shift is not an eigenvalue");
    let scale = m.iter().map(|x| x.abs()).fold(0.0, f64::max).max(1.0);
    let mut out: Vec<Complex64> = m
        .complex_eigenvalues()
        .iter()
        .filter(|mu| mu.norm() > 1e-6 * scale)
        .map(|mu| Complex64::new(sigma, 0.0) + 1.0 / mu)
        .collect();
    sort_eigs(&mut out);
    out
}

pub fn sort_eigs(v: &mut [Complex64]) {
    v.sort_by(|a, b| b.re.partial_cmp(&a.re).unwrap().then(b.im.partial_cmp(&a.im).unwrap()));
}

/// Largest relative distance from each of `got` to its nearest unused
/// counterpart in `want`; `None` if the counts differ.
pub fn eig_match_err(got: &[Complex64], want: &[Complex64]) -> Option<f64> {
    if got.len() != want.len() {
        return None;
    }
    let mut used = vec![false; want.len()];
    let mut worst: f64 = 0.0;
    for g in got {
        let (k, d) = want
            .iter()
            .enumerate()
            .filter(|(k, _)| !used[*k])
            .map(|(k, w)| (k, (g - w).norm() / w.norm().max(1.0)))
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())?;
        used[k] = true;
        worst = worst.max(d);
    }
    Some(worst)
}

/// Random model with `dynamic` differential and `algebraic` algebraic
/// states. The algebraic block of `A` is diagonally dominant, so the pencil
/// is regular with index at most one.
pub fn random_model(rng: &mut ChaCha8Rng, dynamic: usize, algebraic: usize, m: usize, p: usize) -> DssModel {
    let n = dynamic + algebraic;
    let mut u = |_: usize, _: usize| -> f64 { rng.random_range(-1.0..1.0) };
    let mut a = DMatrix::from_fn(n, n, &mut u);
    let b = DMatrix::from_fn(n, m, &mut u);
    let c = DMatrix::from_fn(p, n, &mut u);
    let d = DMatrix::from_fn(p, m, &mut u);
    let mut e = DMatrix::zeros(n, n);
    for k in 0..n {
        if k < dynamic {
            e[(k, k)] = 0.5 + u(0, 0).abs() * 1.5;
            a[(k, k)] -= 1.0;
        } else {
            a[(k, k)] -= n as f64 + 1.0;
        }
    }
    DssModel::new(e, a, b, c, d, Labels::generic(n, m, p)).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Small models covering explicit, descriptor and improper cases.
pub fn fixtures() -> Vec<(&'static str, DssModel)> {
    use dss_core::circuits::*;
    let mut r = rng(7);
    vec![
        ("decoupled", decoupled()),
        ("lc tank", lc_tank(1.0, 1.0)),
        ("lc tank 2", lc_tank(0.5, 2.0)),
        ("inductor admittance", inductor_admittance(0.5).unwrap()),
        ("inductor impedance", inductor_impedance(3.0).unwrap()),
        ("capacitor admittance", capacitor_admittance(2.0).unwrap()),
        ("capacitor impedance", capacitor_impedance(0.25).unwrap()),
        (
            "series inductors",
            series_admittance(&[inductor_impedance(1.0).unwrap(), inductor_impedance(2.0).unwrap()]).unwrap(),
        ),
        (
            "series rl admittance",
            series_admittance(&[resistor(2.0, Port::Impedance).unwrap(), inductor_impedance(0.5).unwrap()]).unwrap(),
        ),
        ("random explicit", random_model(&mut r, 3, 0, 2, 2)),
        ("random descriptor", random_model(&mut r, 2, 2, 1, 1)),
        ("random descriptor mimo", random_model(&mut r, 3, 1, 2, 2)),
    ]
}
