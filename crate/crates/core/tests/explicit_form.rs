//! Conversion to explicit state space preserves the transfer matrix.

mod common;

use common::*;
use dss_core::circuits::{capacitor_admittance, inductor_impedance, series_admittance};
use dss_core::network::build_whole_system;
use dss_core::{to_ss, DMatrix, Error};

#[test]
fn series_inductors_give_one_over_total_inductance() {
    for (l1, l2) in [(1.0, 1.0), (1.0, 2.0), (3.0, 5.0)] {
        let y = series_admittance(&[inductor_impedance(l1).unwrap(), inductor_impedance(l2).unwrap()]).unwrap();
        let ss = to_ss(&y).unwrap();
        // both inductor currents are kept; each sees 1/(L1+L2) of the
        // applied voltage integral and the output averages them
        assert_eq!(ss.a.shape(), (2, 2));
        for k in 0..2 {
            assert!((ss.b[(k, 0)] - 1.0 / (l1 + l2)).abs() < 1e-12);
            assert!((ss.c[(0, k)] - 0.5).abs() < 1e-12);
        }
        assert!(ss.a.amax() < 1e-12);
        assert!(ss.bd.iter().all(|&x| x == 0.0) && ss.dd.iter().all(|&x| x == 0.0));
        assert!(ss.is_proper);
        for w in log_omegas(1e-1, 1e3, 5) {
            let want = 1.0 / (jw(w) * (l1 + l2));
            assert!((ss.eval_tf(jw(w)).unwrap()[(0, 0)] - want).norm() < 1e-12 * want.norm());
        }
    }
}

#[test]
fn improper_elements_round_trip() {
    for l in [0.5, 3.0] {
        let ss = to_ss(&inductor_impedance(l).unwrap()).unwrap();
        assert_eq!(ss.a.nrows(), 1);
        assert!(ss.a.amax() < 1e-12 && ss.b.amax() < 1e-12 && ss.c.amax() < 1e-12);
        assert!((ss.bd[(0, 0)] - 1.0).abs() < 1e-12);
        assert!((ss.dd[(0, 0)] - l).abs() < 1e-12);
        assert_eq!(ss.d[(0, 0)], 0.0);
        assert!(!ss.is_proper);
    }
    for c in [0.25, 2.0] {
        let ss = to_ss(&capacitor_admittance(c).unwrap()).unwrap();
        assert_eq!(ss.a.nrows(), 1);
        assert!(ss.a.amax() < 1e-12 && ss.b.amax() < 1e-12 && ss.c.amax() < 1e-12);
        assert!((ss.bd[(0, 0)] - 1.0).abs() < 1e-12);
        assert!((ss.dd[(0, 0)] - c).abs() < 1e-12);
        assert!(!ss.is_proper);
    }
}

#[test]
fn explicit_models_are_unchanged() {
    let g = decoupled();
    let ss = to_ss(&g).unwrap();
    assert_eq!(&ss.a, g.a());
    assert_eq!(&ss.b, g.b());
    assert_eq!(&ss.c, g.c());
    assert_eq!(&ss.d, g.d());
    assert_eq!(ss.bd, DMatrix::zeros(2, 1));
}

#[test]
fn fixtures_keep_their_transfer_matrix() {
    for (name, g) in fixtures() {
        let ss = to_ss(&g).unwrap();
        assert_eq!(ss.kept_labels.len(), ss.a.nrows());
        for w in log_omegas(1e-1, 1e4, 20) {
            let err = rel_err(&ss.eval_tf(jw(w)).unwrap(), &g.eval_tf(jw(w)).unwrap());
            assert!(err < 1e-9, "{name} at {w}: {err:e}");
        }
    }
}

#[test]
fn whole_system_models_keep_their_transfer_matrix() {
    let mut converted = 0;
    for seed in 0..50 {
        let net = random_network(seed);
        let z = build_whole_system(&net).unwrap();
        let ss = match to_ss(&z) {
            Ok(ss) => ss,
            Err(Error::HigherIndex) => continue,
            Err(e) => panic!("seed {seed}: {e}"),
        };
        converted += 1;
        for w in log_omegas(1e-1, 1e3, 20) {
            let err = rel_err(&ss.eval_tf(jw(w)).unwrap(), &oracle_impedance(&net, w));
            assert!(err < 1e-9, "seed {seed} at {w}: {err:e}");
        }
    }
    println!("{converted} of 50 converted");
    assert!(converted >= 25);
}
