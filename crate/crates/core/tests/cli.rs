//! End-to-end tests of the `mdeflow` binary and the command layer:
//! exit codes, file formats, and bit-identical reruns.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mdeflow"))
}

fn write(path: &Path, content: &str) {
    std::fs::write(path, content).unwrap();
}

#[test]
fn simulate_writes_curve_and_reruns_bit_identically() {
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    let config = |out: &Path| {
        format!(
            r#"
[scenario]
key = "wiener"

[partition]
steps = 16

[scheme]
particle_budget = 512
seed = 42
flow_substeps = 8
record_half_steps = false
reevaluate_after_f = false

[output]
dir = "{}"
basename = "walk"
"#,
            out.display()
        )
    };
    let cfg_a = dir.path().join("a.toml");
    let cfg_b = dir.path().join("b.toml");
    write(&cfg_a, &config(&out_a));
    write(&cfg_b, &config(&out_b));

    let status = bin().arg("simulate").arg(&cfg_a).status().unwrap();
    assert_eq!(status.code(), Some(0));
    // Second run single-threaded: outputs must not depend on parallelism.
    let status = bin()
        .arg("simulate")
        .arg(&cfg_b)
        .env("MDE_THREADS", "1")
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));

    // 17 node files + index.
    let count = std::fs::read_dir(&out_a)
        .unwrap()
        .filter(|e| {
            e.as_ref()
                .unwrap()
                .file_name()
                .to_string_lossy()
                .ends_with(".csv")
        })
        .count();
    assert_eq!(count, 17);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_a.join("walk_manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["scheme"]["seed"], 42);

    // Byte-identical curve files across reruns.
    for i in 0..17 {
        let name = format!("walk_{i:05}.csv");
        let a = std::fs::read(out_a.join(&name)).unwrap();
        let b = std::fs::read(out_b.join(&name)).unwrap();
        assert_eq!(a, b, "curve file {name} differs between reruns");
    }
    let ia = std::fs::read(out_a.join("walk_index.json")).unwrap();
    let ib = std::fs::read(out_b.join("walk_index.json")).unwrap();
    assert_eq!(ia, ib);
}

#[test]
fn simulate_rejects_bad_input_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    write(&bad, "not toml [[[");
    assert_eq!(
        bin().arg("simulate").arg(&bad).status().unwrap().code(),
        Some(2)
    );
    assert_eq!(
        bin()
            .arg("simulate")
            .arg(dir.path().join("missing.toml"))
            .status()
            .unwrap()
            .code(),
        Some(2)
    );
}

#[test]
fn verify_accepts_exact_curve_and_rejects_wrong_scenario() {
    let dir = tempfile::tempdir().unwrap();
    // Exact closed-form curve for the symmetric-walk scenario: N(0, t).
    let times: Vec<f64> = (0..=64).map(|i| i as f64 / 64.0).collect();
    let states: Vec<_> = times
        .iter()
        .map(|&t| mdeflow::scenarios::gaussian_quantile_cloud(0.0, t, 2000).unwrap())
        .collect();
    let curve = mdeflow::measure::MeasureCurve::new(times, states).unwrap();
    let paths = mdeflow::measure::write_curve(&curve, dir.path(), "exact").unwrap();
    let index = paths.last().unwrap();

    let wiener_cfg = dir.path().join("wiener.toml");
    write(
        &wiener_cfg,
        "[scenario]\nkey = \"wiener\"\n\n[output]\ndir = \"unused\"\n",
    );
    let drifted_cfg = dir.path().join("drifted.toml");
    write(
        &drifted_cfg,
        "[scenario]\nkey = \"drifted_wiener\"\n\n[output]\ndir = \"unused\"\n",
    );

    let out = bin()
        .arg("verify")
        .arg(index)
        .arg(&wiener_cfg)
        .args(["--threshold", "0.01"])
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["max_residual"].as_f64().unwrap() <= 0.01);

    // The same curve against the drifted scenario must fail at the same
    // threshold (the drift term contributes O(s) mass).
    let status = bin()
        .arg("verify")
        .arg(index)
        .arg(&drifted_cfg)
        .args(["--threshold", "0.01"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));

    // Threshold 0 on a nonzero-residual input also fails.
    let status = bin()
        .arg("verify")
        .arg(index)
        .arg(&wiener_cfg)
        .args(["--threshold", "0"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));

    // Missing files: exit 2.
    let status = bin()
        .arg("verify")
        .arg(dir.path().join("nope.json"))
        .arg(&wiener_cfg)
        .args(["--threshold", "1"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn converge_emits_level_csv_with_decreasing_reference_distance() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = dir.path().join("conv.toml");
    write(
        &cfg,
        &format!(
            r#"
[scenario]
key = "wiener"

[scheme]
particle_budget = 1000
seed = 3

[output]
dir = "{}"
basename = "conv"

[converge]
levels = [4, 16, 64]
p = 2.0
"#,
            out.display()
        ),
    );
    let status = bin().arg("converge").arg(&cfg).status().unwrap();
    assert_eq!(status.code(), Some(0));
    let csv = std::fs::read_to_string(out.join("conv_convergence.csv")).unwrap();
    let lines: Vec<&str> = csv.trim().lines().collect();
    assert_eq!(lines[0], "level,sup_distance_to_next,distance_to_reference");
    assert_eq!(lines.len(), 4);
    let dist = |line: &str| -> f64 { line.split(',').nth(2).unwrap().parse().unwrap() };
    assert!(dist(lines[3]) < dist(lines[1]));
    // Finest level has no next-level column.
    assert!(lines[3].split(',').nth(1).unwrap().is_empty());
}

#[test]
fn converge_single_level_and_zero_field() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = dir.path().join("conv1.toml");
    // A single zero atom makes the constant-ensemble scenario a rest state.
    write(
        &cfg,
        &format!(
            r#"
[scenario]
key = "clt"
atoms = [[1.0, 0.0]]

[scheme]
particle_budget = 200
seed = 1

[output]
dir = "{}"
basename = "rest"

[converge]
levels = [8]
"#,
            out.display()
        ),
    );
    let status = bin().arg("converge").arg(&cfg).status().unwrap();
    assert_eq!(status.code(), Some(0));
    let csv = std::fs::read_to_string(out.join("rest_convergence.csv")).unwrap();
    let lines: Vec<&str> = csv.trim().lines().collect();
    assert_eq!(lines.len(), 2);
    let fields: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(fields[0], "8");
    assert!(fields[1].is_empty());
    let dref: f64 = fields[2].parse().unwrap();
    assert!(dref <= 1e-9, "rest-state distance to reference: {dref}");
}

#[test]
fn distance_command_reports() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    write(&a, "w,x0\n1,0\n");
    write(&b, "w,x0\n1,1\n");

    let out = bin()
        .arg("distance")
        .arg(&a)
        .arg(&a)
        .args(["--p", "2"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["cost"].as_f64().unwrap(), 0.0);

    let out = bin().arg("distance").arg(&a).arg(&b).output().unwrap();
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((report["cost"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(report["method"], "Exact1D");

    assert_eq!(
        bin()
            .arg("distance")
            .arg(&a)
            .arg(dir.path().join("missing.csv"))
            .status()
            .unwrap()
            .code(),
        Some(2)
    );
}

#[test]
fn distance_sinkhorn_within_gap_of_assignment() {
    use rand::distributions::Distribution;
    use rand::SeedableRng;
    let dir = tempfile::tempdir().unwrap();
    let normal = statrs::distribution::Normal::new(0.0, 1.0).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
    let mut cloud = |name: &str| {
        let m = mdeflow::measure::EmpiricalMeasure::equal_weights(
            (0..80)
                .map(|_| nalgebra::dvector![normal.sample(&mut rng), normal.sample(&mut rng)])
                .collect(),
        )
        .unwrap();
        let path = dir.path().join(name);
        mdeflow::measure::write_cloud(&m, &path).unwrap();
        path
    };
    let a = cloud("a.csv");
    let b = cloud("b.csv");
    let run = |method: &str| -> serde_json::Value {
        let out = bin()
            .arg("distance")
            .arg(&a)
            .arg(&b)
            .args(["--method", method])
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0));
        serde_json::from_slice(&out.stdout).unwrap()
    };
    let exact = run("assignment")["cost"].as_f64().unwrap();
    let sk = run("sinkhorn");
    let sk_cost = sk["cost"].as_f64().unwrap();
    let gap = sk["gap_bound"].as_f64().unwrap();
    assert!(
        (sk_cost - exact).abs() <= gap + 1e-12,
        "sinkhorn {sk_cost} exact {exact} gap {gap}"
    );
}
