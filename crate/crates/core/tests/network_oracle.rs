//! Composed whole-system models against exact nodal arithmetic.

mod common;

use std::path::Path;

use common::*;
use dss_core::circuits::{capacitor_admittance, inductor_admittance, resistor, Port};
use dss_core::io::write_model;
use dss_core::modal::generalized_eig;
use dss_core::network::{
    apparatus_stack, build_whole_system, direct_whole_system, network_admittance, parse_netlist, read_netlist,
};
use dss_core::{Complex64, Error};

#[test]
fn random_networks_match_exact_oracle() {
    let mut worst: f64 = 0.0;
    for seed in 0..50 {
        let net = random_network(seed);
        let z = build_whole_system(&net).unwrap();
        for w in log_omegas(1e-1, 1e4, 20) {
            let err = rel_err(&z.eval_tf(jw(w)).unwrap(), &oracle_impedance(&net, w));
            assert!(err < 1e-9, "seed {seed} at {w}: {err:e}\n{}", random_netlist(seed));
            worst = worst.max(err);
        }
    }
    println!("max relative error {worst:e}");
}

#[test]
fn library_direct_arithmetic_is_exact() {
    for seed in 50..60 {
        let net = random_network(seed);
        for w in log_omegas(1e-1, 1e4, 5) {
            assert_eq!(direct_whole_system(&net, jw(w)).unwrap(), oracle_impedance(&net, w));
        }
    }
}

fn finite_eigs(net_json: &str) -> Vec<Complex64> {
    let z = build_whole_system(&parse_netlist(net_json).unwrap()).unwrap();
    generalized_eig(&z).unwrap().finite_eigenvalues()
}

#[test]
fn parallel_lc_modes() {
    for (l, c) in [(1.0, 1.0), (0.5, 2.0e-3), (3.0e-3, 4.0e-6)] {
        let json = format!(
            r#"{{"nodes":["1"],"branches":[
                {{"id":"l","kind":"L","from":"1","to":"GROUND","L":{l}}},
                {{"id":"c","kind":"C","from":"1","to":"GROUND","C":{c}}}]}}"#
        );
        let w0 = 1.0 / f64::sqrt(l * c);
        let got = finite_eigs(&json);
        let want = [Complex64::new(0.0, w0), Complex64::new(0.0, -w0)];
        let err = eig_match_err(&got, &want).expect("two finite modes");
        assert!(err < 1e-9, "L={l} C={c}: {got:?}");
    }
}

#[test]
fn rl_closure_mode() {
    for (r, l) in [(1.0, 1.0), (2.0, 1.0), (0.3, 0.05)] {
        let json = format!(
            r#"{{"nodes":["1"],"branches":[
                {{"id":"r","kind":"R","from":"1","to":"GROUND","R":{r}}},
                {{"id":"l","kind":"L","from":"1","to":"GROUND","L":{l}}}]}}"#
        );
        let got = finite_eigs(&json);
        assert_eq!(got.len(), 1);
        assert!((got[0] - Complex64::new(-r / l, 0.0)).norm() < 1e-9 * (r / l));
    }
}

#[test]
fn eigenvalues_agree_with_shift_invert_oracle() {
    for seed in 0..50 {
        let z = build_whole_system(&random_network(seed)).unwrap();
        let got = generalized_eig(&z).unwrap().finite_eigenvalues();
        let want = shift_invert_eigs(&z);
        let err = eig_match_err(&got, &want).unwrap_or_else(|| panic!("seed {seed}: {got:?} vs {want:?}"));
        assert!(err < 1e-8, "seed {seed}: {err:e}");
    }
}

fn write(dir: &Path, name: &str, model: &dss_core::DssModel) {
    write_model(dir.join(name), model).unwrap();
}

#[test]
fn apparatus_inductor_at_capacitor_node() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "app.json", &inductor_admittance(1.0).unwrap());
    std::fs::write(
        dir.path().join("net.json"),
        r#"{"nodes":["1"],"branches":[{"id":"c","kind":"C","from":"1","to":"GROUND","C":1.0}],
            "apparatus":[{"bus":"1","model_file":"app.json"}]}"#,
    )
    .unwrap();
    let net = read_netlist(dir.path().join("net.json")).unwrap();
    let z = build_whole_system(&net).unwrap();
    let got = generalized_eig(&z).unwrap().finite_eigenvalues();
    let want = [Complex64::new(0.0, 1.0), Complex64::new(0.0, -1.0)];
    assert!(eig_match_err(&got, &want).unwrap() < 1e-12);
    for w in log_omegas(1e-1, 1e3, 7) {
        let zw = z.eval_tf(jw(w)).unwrap()[(0, 0)];
        let want = 1.0 / (jw(w) + 1.0 / jw(w));
        assert!((zw - want).norm() <= 1e-12 * want.norm());
    }
    assert!(direct_whole_system(&net, jw(2.0)).is_ok());
}

#[test]
fn apparatus_must_be_single_port() {
    let dir = tempfile::tempdir().unwrap();
    let two_port = inductor_admittance(1.0).unwrap().append(&inductor_admittance(2.0).unwrap()).unwrap();
    write(dir.path(), "app.json", &two_port);
    std::fs::write(
        dir.path().join("net.json"),
        r#"{"nodes":["1"],"branches":[{"id":"r","kind":"R","from":"1","to":"GROUND","R":1.0}],
            "apparatus":[{"bus":"1","model_file":"app.json"}]}"#,
    )
    .unwrap();
    let net = read_netlist(dir.path().join("net.json")).unwrap();
    assert!(matches!(apparatus_stack(&net), Err(Error::DimensionMismatch(_))));
}

#[test]
fn model_file_branch_equals_lumped_branch() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "r.json", &resistor(2.0, Port::Admittance).unwrap());
    std::fs::write(
        dir.path().join("net.json"),
        r#"{"nodes":["1","2"],"branches":[
            {"id":"f","kind":"dss_file","from":"1","to":"2","model_file":"r.json"},
            {"id":"c","kind":"C","from":"2","to":"GROUND","C":0.1},
            {"id":"l","kind":"L","from":"1","to":"GROUND","L":0.2}]}"#,
    )
    .unwrap();
    let lumped = parse_netlist(
        r#"{"nodes":["1","2"],"branches":[
            {"id":"f","kind":"R","from":"1","to":"2","R":2.0},
            {"id":"c","kind":"C","from":"2","to":"GROUND","C":0.1},
            {"id":"l","kind":"L","from":"1","to":"GROUND","L":0.2}]}"#,
    )
    .unwrap();
    let from_file = build_whole_system(&read_netlist(dir.path().join("net.json")).unwrap()).unwrap();
    for w in log_omegas(1e-1, 1e3, 9) {
        let err = rel_err(&from_file.eval_tf(jw(w)).unwrap(), &oracle_impedance(&lumped, w));
        assert!(err < 1e-12);
    }
}

#[test]
fn state_origins_are_tracked() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "cap.json", &capacitor_admittance(1.0).unwrap());
    write(dir.path(), "ind.json", &inductor_admittance(2.0).unwrap());
    std::fs::write(
        dir.path().join("net.json"),
        r#"{"nodes":["1","2"],"branches":[{"id":"b1","kind":"RL","from":"1","to":"2","R":1.0,"L":1.0}],
            "apparatus":[{"bus":"1","model_file":"cap.json"},{"bus":"2","model_file":"ind.json"}]}"#,
    )
    .unwrap();
    let net = read_netlist(dir.path().join("net.json")).unwrap();
    let z = build_whole_system(&net).unwrap();
    let labels = z.state_labels();
    for l in labels {
        let known = ["branch:b1", "apparatus:1", "apparatus:2", "virtual:node:"];
        assert!(known.iter().any(|k| l.origin.starts_with(k)), "{}", l.path());
    }
    // one virtual state per node from the final inverse, one from the
    // inductor impedance and one from the series-branch inverse, one from
    // the capacitor admittance inverse
    let virtuals = labels.iter().filter(|l| l.is_virtual()).count();
    assert_eq!(virtuals, 2 + 2 + 1);
    let node_virtuals: Vec<String> = labels
        .iter()
        .filter(|l| l.origin.starts_with("virtual:node:"))
        .map(|l| l.path())
        .collect();
    assert_eq!(node_virtuals, ["virtual:node:1/v", "virtual:node:2/v"]);
    let ynet = network_admittance(&net).unwrap();
    assert_eq!(ynet.input_labels(), ["v:1", "v:2"]);
    assert_eq!(ynet.output_labels(), ["i:1", "i:2"]);
}
