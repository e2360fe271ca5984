use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn cer(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cer"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("run cer")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = cer(dir, args);
    assert!(
        out.status.success(),
        "cer {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn value(text: &str, key: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix(' ')))
        .unwrap_or_else(|| panic!("no {key} in\n{text}"))
        .trim()
        .parse()
        .unwrap()
}

fn states(plan: &str) -> usize {
    plan.lines().filter(|l| l.starts_with("state ")).count()
}

/// Data rows of a dataset file as (orbit, expectation).
fn rows(csv: &str) -> Vec<(String, f64)> {
    csv.lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("m,"))
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[1].to_string(), f[3].parse().unwrap())
        })
        .collect()
}

#[test]
fn design_counts() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    ok(p, &["--out", "a", "design", "--cycle", "transversal7", "--level", "1cnot"]);
    assert_eq!(states(&fs::read_to_string(p.join("a/plan.txt")).unwrap()), 4);
    ok(p, &["--out", "b", "design", "--cycle", "transversal7", "--level", "2cnot"]);
    assert_eq!(states(&fs::read_to_string(p.join("b/plan.txt")).unwrap()), 100);
    ok(p, &["--out", "c", "design", "--cycle", "transversal:2", "--level", "2cnot"]);
    assert_eq!(states(&fs::read_to_string(p.join("c/plan.txt")).unwrap()), 36);
}

#[test]
fn noiseless_simulation_gives_unit_expectations() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    fs::write(p.join("none.txt"), "II 1\n").unwrap();
    ok(p, &["design", "--cycle", "single", "--level", "1cnot", "--randomizations", "5", "--shots", "20"]);
    ok(p, &["--seed", "3", "simulate", "--plan", "plan.txt", "--channel", "none.txt", "--method", "mc"]);
    let data = rows(&fs::read_to_string(p.join("dataset.csv")).unwrap());
    assert!(!data.is_empty());
    assert!(data.iter().all(|(_, e)| e.abs() == 1.0), "{data:?}");

    ok(p, &["reconstruct", "--data", "dataset.csv", "--bootstrap", "0"]);
    let marginals = fs::read_to_string(p.join("marginals.txt")).unwrap();
    let ii = marginals.lines().find(|l| l.starts_with("orbit II ")).unwrap();
    let prob: f64 = ii.split_whitespace().nth(2).unwrap().parse().unwrap();
    assert!((prob - 1.0).abs() < 1e-12, "{ii}");
}

/// Full pipeline on the transversal cycle with exact expectations; the
/// logical step needs the two-CNOT marginals.
fn pipeline(p: &Path, noise: &str) -> String {
    fs::write(p.join("noise.txt"), noise).unwrap();
    ok(p, &["design", "--cycle", "transversal7", "--level", "2cnot", "--randomizations", "2", "--shots", "1"]);
    ok(p, &["simulate", "--plan", "plan.txt", "--channel", "noise.txt", "--method", "exact"]);
    ok(p, &["reconstruct", "--data", "dataset.csv", "--bootstrap", "0"]);
    ok(p, &["logical", "--marginals", "marginals.txt", "--bootstrap", "0"]);
    fs::read_to_string(p.join("logical.txt")).unwrap()
}

#[test]
fn logical_rates_of_identity_noise_vanish() {
    let d = tempfile::tempdir().unwrap();
    let out = pipeline(d.path(), "IIIIIIIIIIIIIIII 1\n");
    assert!(value(&out, "total_error").abs() < 1e-12, "{out}");
    assert!(value(&out, "uncorrectable_rate").abs() < 1e-12, "{out}");
}

#[test]
fn cross_block_errors_are_correctable() {
    let d = tempfile::tempdir().unwrap();
    // XZ and YY form one orbit of the CNOT on qubits 0 and 9
    let out = pipeline(d.path(), "qubits 16\nfactor 0,9\nII 0.9\nXZ 0.05\nYY 0.05\n");
    assert!((value(&out, "total_error") - 0.1).abs() < 1e-9, "{out}");
    assert!(value(&out, "uncorrectable_rate").abs() < 1e-12, "{out}");
    assert!(out.contains(" correctable "), "{out}");
}

#[test]
fn reruns_are_byte_identical() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    fs::write(p.join("noise.txt"), "II 0.97\nIX 0.01\nZX 0.02\n").unwrap();
    for out in ["a", "b"] {
        ok(p, &["--seed", "9", "--out", out, "design", "--cycle", "single", "--randomizations", "10", "--shots", "30"]);
        let plan = format!("{out}/plan.txt");
        let data = format!("{out}/dataset.csv");
        ok(p, &["--seed", "9", "--out", out, "simulate", "--plan", &plan, "--channel", "noise.txt"]);
        ok(p, &["--seed", "9", "--out", out, "reconstruct", "--data", &data, "--bootstrap", "100"]);
    }
    for f in ["plan.txt", "dataset.csv", "eigenvalues.csv"] {
        assert_eq!(fs::read(p.join("a").join(f)).unwrap(), fs::read(p.join("b").join(f)).unwrap(), "{f}");
    }
    // the config hash covers the output directory, which differs between runs
    let strip = |f: &str| -> String {
        fs::read_to_string(p.join(f).join("marginals.txt"))
            .unwrap()
            .lines()
            .filter(|l| !l.starts_with("# config_hash"))
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(strip("a"), strip("b"));
}

#[test]
fn mismatched_channel_exits_with_input_error() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    fs::write(p.join("three.txt"), "III 1\n").unwrap();
    ok(p, &["design", "--cycle", "single"]);
    let out = cer(p, &["simulate", "--plan", "plan.txt", "--channel", "three.txt"]);
    assert_eq!(out.status.code(), Some(2));
    let missing = cer(p, &["reconstruct", "--data", "nope.csv"]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn selftest_passes() {
    let d = tempfile::tempdir().unwrap();
    let out = ok(d.path(), &["selftest"]);
    assert!(out.lines().all(|l| l.starts_with("PASS")), "{out}");
}

#[test]
fn coherent_rotation_shows_up_in_the_marginal() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    fs::write(p.join("none.txt"), "II 1\n").unwrap();
    ok(p, &["design", "--cycle", "single", "--lengths", "2,4,8"]);
    ok(p, &["simulate", "--plan", "plan.txt", "--channel", "none.txt", "--coherent", "ZX", "--angle", "0.1"]);
    ok(p, &["reconstruct", "--data", "dataset.csv", "--bootstrap", "0"]);
    let marginals = fs::read_to_string(p.join("marginals.txt")).unwrap();
    let zx: f64 = marginals
        .lines()
        .find(|l| l.starts_with("orbit ZX "))
        .and_then(|l| l.split_whitespace().nth(2))
        .unwrap()
        .parse()
        .unwrap();
    // the twirled rotation puts sin²(θ/2) on ZX
    let expected = (0.05f64).sin().powi(2);
    assert!((zx - expected).abs() < 0.5 * expected, "ZX {zx} vs {expected}");
}

#[test]
fn config_file_supplies_defaults() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    fs::write(
        p.join("run.toml"),
        "seed = 5\nout = \"out\"\n[design]\ncycle = \"single\"\nrandomizations = 3\nshots = 7\n",
    )
    .unwrap();
    ok(p, &["--config", "run.toml", "design"]);
    let plan = fs::read_to_string(p.join("out/plan.txt")).unwrap();
    assert!(plan.contains("randomizations 3") && plan.contains("shots 7") && plan.contains("seed 5"), "{plan}");
    let bad = cer(p, &["--config", "run.toml", "design", "--level", "nope"]);
    assert_eq!(bad.status.code(), Some(2));
}
