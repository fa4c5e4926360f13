//! End-to-end runs of the `fluxq` binary on the fixture netlists.

use std::f64::consts::TAU;
use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

fn fluxq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fluxq"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok_stdout(args: &[&str]) -> String {
    let out = fluxq(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json(args: &[&str]) -> Value {
    serde_json::from_str(&ok_stdout(args)).unwrap()
}

fn path(name: &str) -> String {
    fixture(name).to_string_lossy().into_owned()
}

/// Parses CSV output into the header and columns.
fn csv(text: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut lines = text.lines();
    let header: Vec<String> = lines.next().unwrap().split(',').map(str::to_string).collect();
    let mut cols = vec![Vec::new(); header.len()];
    for line in lines {
        for (c, v) in cols.iter_mut().zip(line.split(',')) {
            c.push(v.parse::<f64>().unwrap());
        }
    }
    (header, cols)
}

fn column<'a>(header: &[String], cols: &'a [Vec<f64>], name: &str) -> &'a [f64] {
    let i = header
        .iter()
        .position(|h| h == name)
        .unwrap_or_else(|| panic!("no column {name}"));
    &cols[i]
}

fn fig2b_omega() -> f64 {
    1.0 / (4e-9f64 * 6e-12).sqrt()
}

#[test]
fn analyze_reports_quantizability() {
    let fig2a = json(&["analyze", &path("fig2a.net")]);
    assert_eq!(
        fig2a["quantizable"],
        serde_json::json!({ "node": false, "loop": false })
    );
    assert_eq!(fig2a["passive_nodes"], serde_json::json!(["3"]));
    assert_eq!(fig2a["loop_deficiency"], 1);
    assert_eq!(
        (fig2a["n"].as_u64(), fig2a["c"].as_u64(), fig2a["l"].as_u64()),
        (Some(3), Some(4), Some(2))
    );
    assert!(fig2a["reduction"]["netlist"]
        .as_str()
        .unwrap()
        .contains("L3+L4 2 0 4e-9H"));

    let fig2b = json(&["analyze", &path("fig2b.net")]);
    assert_eq!(fig2b["quantizable"], serde_json::json!({ "node": true, "loop": true }));
    assert_eq!(fig2b["reduction"], Value::Null);

    let wheel = json(&["analyze", &path("wheel.net")]);
    assert_eq!(wheel["passive_nodes"], serde_json::json!(["4"]));
    assert_eq!(wheel["loop_deficiency"], 1);
    assert_eq!(wheel["reducible"], false);
    assert_eq!(wheel["reduction"], Value::Null);
}

#[test]
fn modes_of_the_reduced_tank() {
    let text = ok_stdout(&["modes", &path("fig2b.net")]);
    assert!(
        text.lines().any(|l| l.starts_with("phi_2") && l.contains(" 1.03 ")),
        "{text}"
    );
    let v = json(&["modes", &path("fig2b.net"), "--format", "json"]);
    let f = v["frequencies_ghz"][0].as_f64().unwrap();
    assert!((f * 1e9 / (fig2b_omega() / TAU) - 1.0).abs() < 1e-12);
    let p = v["ground_state"]["products_over_hbar2"]["phi_2"].as_f64().unwrap();
    assert!((p - 1.0).abs() < 1e-12);
}

#[test]
fn modes_of_augmented_fig2a() {
    let v = json(&["modes", &path("fig2a.net"), "--format", "json"]);
    let f: Vec<f64> = v["frequencies_ghz"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect();
    assert!((f[0] / 1.0273 - 1.0).abs() < 1e-3, "{f:?}");
    assert!((f[1] / 19480.25 - 1.0).abs() < 1e-4, "{f:?}");
    assert_eq!(v["attribution"][1]["variable"], "phi_3");
    assert_eq!(v["geometric_augmentation"]["capacitors"][0]["id"], "Cg_3_2");

    let lp = json(&[
        "modes",
        &path("fig2a.net"),
        "--rep",
        "loop",
        "--lg",
        "10fH",
        "--format",
        "json",
    ]);
    let hi = lp["frequencies_ghz"][1].as_f64().unwrap();
    assert!((hi / 1378.3 - 1.0).abs() < 1e-3, "{hi}");
}

#[test]
fn unquantizable_circuit_exits_3_with_attribution() {
    let out = fluxq(&["modes", &path("fig2a.net"), "--geometric", "off"]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("node 3: no attached capacitance"), "{err}");
    let out = fluxq(&["modes", &path("fig2a.net"), "--geometric", "off", "--rep", "loop"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("loop 1"));
}

#[test]
fn simulate_tank_matches_closed_form() {
    let text = ok_stdout(&["simulate", &path("fig2b.net"), "--samples", "501", "--tmax", "2n"]);
    let (header, cols) = csv(&text);
    assert_eq!(header, ["t_s", "C_V", "C_A", "L_V", "L_A"]);
    let t = column(&header, &cols, "t_s");
    let v = column(&header, &cols, "C_V");
    assert!(t.windows(2).all(|w| w[1] > w[0]));
    for (t, v) in t.iter().zip(v) {
        let want = 2e-3 * (fig2b_omega() * t).cos();
        assert!((v - want).abs() < 1e-12, "t = {t:e}: {v:e} vs {want:e}");
    }
    let peak = column(&header, &cols, "L_A").iter().fold(0.0f64, |m, x| m.max(x.abs()));
    assert!((peak / 77.46e-6 - 1.0).abs() < 1e-3, "{peak:e}");
}

#[test]
fn simulate_single_sample_reproduces_ics() {
    let text = ok_stdout(&["simulate", &path("fig2a.net"), "--samples", "1"]);
    let (header, cols) = csv(&text);
    assert_eq!(cols[0].len(), 1);
    for (name, want) in [("C1_V", 2e-3), ("C2_V", 2e-3), ("L3_A", 0.0), ("L4_A", 0.0)] {
        let got = column(&header, &cols, name)[0];
        assert!((got - want).abs() <= 1e-9 * 2e-3, "{name}: {got:e}");
    }
}

#[test]
fn simulate_fig2a_inductor_sum_is_the_tank_voltage() {
    let (h2a, c2a) = csv(&ok_stdout(&["simulate", &path("fig2a.net"), "--samples", "801"]));
    let (h2b, c2b) = csv(&ok_stdout(&["simulate", &path("fig2b.net"), "--samples", "801"]));
    for name in ["L3_V", "L4_V", "L3L4_sum_V", "C1C2_sum_A"] {
        assert!(h2a.iter().any(|h| h == name), "missing {name}: {h2a:?}");
    }
    let sum = column(&h2a, &c2a, "L3L4_sum_V");
    let tank = column(&h2b, &c2b, "L_V");
    let dev = sum.iter().zip(tank).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(dev < 1e-6 * 2e-3, "{dev:e}");
    let l3 = column(&h2a, &c2a, "L3_V");
    let jump = l3
        .iter()
        .zip(tank)
        .map(|(a, b)| (a - b / 4.0).abs())
        .fold(0.0, f64::max);
    assert!(jump > 1e-4, "L3 should carry the fast mode: {jump:e}");
}

#[test]
fn out_flag_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("trace.csv");
    let target_s = target.to_string_lossy().into_owned();
    let out = fluxq(&["simulate", &path("fig2a.net"), "--samples", "64", "--out", &target_s]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let first = std::fs::read(&target).unwrap();
    let again = fluxq(&["simulate", &path("fig2a.net"), "--samples", "64"]);
    assert_eq!(again.stdout, first);
    let a = fluxq(&[
        "modes",
        &path("wheel.net"),
        "--geometric",
        "allpairs",
        "--format",
        "json",
    ]);
    let b = fluxq(&[
        "modes",
        &path("wheel.net"),
        "--geometric",
        "allpairs",
        "--format",
        "json",
    ]);
    assert_eq!((a.status.code(), &a.stdout), (b.status.code(), &b.stdout));
}

#[test]
fn reduction_and_circuit_share_low_modes() {
    let dir = tempfile::tempdir().unwrap();
    let reduced = dir.path().join("reduced.net");
    let text = ok_stdout(&["reduce", &path("fig2a.net")]);
    std::fs::write(&reduced, &text).unwrap();
    let low = |args: &[&str]| json(args)["frequencies_ghz"][0].as_f64().unwrap();
    let r = low(&["modes", &reduced.to_string_lossy(), "--format", "json"]);
    for rep in ["node", "loop", "extended"] {
        let full = low(&["modes", &path("fig2a.net"), "--rep", rep, "--format", "json"]);
        assert!((full / r - 1.0).abs() < 1e-2, "{rep}: {full} vs {r}");
    }
}

#[test]
fn error_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, text: &str| {
        let p = dir.path().join(name);
        std::fs::write(&p, text).unwrap();
        p.to_string_lossy().into_owned()
    };
    let syntax = write("syntax.net", "C1 2 0 2pF\nR1 2 0 5\n");
    assert_eq!(fluxq(&["analyze", &syntax]).status.code(), Some(1));
    let unit = write("unit.net", "C1 2 0 2pH\n");
    assert_eq!(fluxq(&["modes", &unit]).status.code(), Some(1));
    let split = write("split.net", "C1 2 0 1pF\nL1 2 0 1nH\nC2 5 6 1pF\nL2 5 6 1nH\n");
    let out = fluxq(&["analyze", &split]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("disconnected"));
    let ics = write(
        "ics.net",
        "C1 2 0 2pF\nC2 2 0 4pF\nL3 2 3 1nH\nL4 3 0 3nH\n.ic C1 2mV\n.ic C2 5mV\n",
    );
    assert_eq!(fluxq(&["simulate", &ics]).status.code(), Some(4));
    assert_eq!(fluxq(&["modes", "/definitely/not/here.net"]).status.code(), Some(66));
    assert_eq!(
        fluxq(&["modes", &path("fig2b.net"), "--rep", "mesh"]).status.code(),
        Some(64)
    );
    assert_eq!(
        fluxq(&["analyze", &path("fig2b.net"), "--format", "csv"]).status.code(),
        Some(64)
    );
    assert_eq!(
        fluxq(&["simulate", &path("fig2b.net"), "--samples", "0"]).status.code(),
        Some(64)
    );
    assert_eq!(fluxq(&["--help"]).status.code(), Some(0));
}
