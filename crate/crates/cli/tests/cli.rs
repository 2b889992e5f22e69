//! End-to-end tests of the `gapcell` binary: subcommand plumbing, exit
//! codes, and determinism of generated files.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gapcell"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, content: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, content).unwrap();
    path
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn design_forward_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let targets = write(
        dir.path(),
        "targets.json",
        "{\"targets\": [[1.0, 2.0]], \"L\": 10.0}\n",
    );

    let design_path = dir.path().join("design.json");
    let out = run(&[
        "design",
        targets.to_str().unwrap(),
        "--out",
        design_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let design_text = std::fs::read_to_string(&design_path).unwrap();
    // one ulp of slack on d = 1/pi: the closed form rounds differently
    assert!(design_text.contains("\"d\": [3.183098861837906"));
    assert!(design_text.contains("\"b\": [5.0000000000000000e-1]"));
    assert!(design_text.contains("\"sigma\""));
    assert!(design_text.contains("\"mu\""));

    let out = run(&["forward", design_path.to_str().unwrap()]);
    assert!(out.status.success());
    let spectrum = stdout(&out);
    assert!(spectrum.contains("\"sigma\": [9.99999") || spectrum.contains("\"sigma\": [1.0000000000000000e0"));
    assert!(spectrum.contains("\"mu\": [") && spectrum.contains("path_residual"));
}

#[test]
fn design_m2_reference_volumes() {
    let dir = tempfile::tempdir().unwrap();
    let targets = write(
        dir.path(),
        "targets.json",
        "{\"targets\": [[1.0, 1.2877855495509738], [4.0, 6.2122144504490262]], \"L\": 10.0}\n",
    );
    let out = run(&["design", targets.to_str().unwrap()]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("\"b\": [2.499999999999999"), "{text}");
    assert!(text.contains("\"d\": [1.591549430918953"), "{text}");
}

#[test]
fn overlapping_targets_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let targets = write(
        dir.path(),
        "targets.json",
        "{\"targets\": [[1.0, 2.0], [1.5, 3.0]], \"L\": 10.0}\n",
    );
    let out = run(&["design", targets.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("invalid-input"));
}

#[test]
fn geometry_mesh_bands_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let targets = write(
        dir.path(),
        "targets.json",
        "{\"targets\": [[1.0, 2.0]], \"L\": 10.0}\n",
    );
    let design = dir.path().join("design.json");
    assert!(run(&["design", targets.to_str().unwrap(), "--out", design.to_str().unwrap()])
        .status
        .success());

    let geometry = dir.path().join("cell.json");
    let out = run(&[
        "geometry",
        design.to_str().unwrap(),
        "--radii",
        "0.02",
        "--out",
        geometry.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let mesh = dir.path().join("cell.mesh");
    let out = run(&[
        "mesh",
        geometry.to_str().unwrap(),
        "--h-max",
        "0.08",
        "--hole-refine",
        "4",
        "--out",
        mesh.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(std::fs::read_to_string(&mesh).unwrap().starts_with("gapcell-mesh 1"));

    let bands = dir.path().join("bands.csv");
    let eigen = dir.path().join("eigen.csv");
    let out = run(&[
        "bands",
        mesh.to_str().unwrap(),
        "--k-max",
        "3",
        "--tol",
        "1e-8",
        "--no-header",
        "--out",
        bands.to_str().unwrap(),
        "--eigen-out",
        eigen.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = std::fs::read_to_string(&bands).unwrap();
    assert!(table.starts_with("k,lamN,lamT1,lamT2,lamD\n"));
    assert_eq!(table.lines().count(), 4);
    let eigen_table = std::fs::read_to_string(&eigen).unwrap();
    assert!(eigen_table.starts_with("index,variant,lambda,residual\n"));
    assert_eq!(eigen_table.lines().count(), 1 + 4 * 3);
    assert!(eigen_table.contains(",antiperiodic,"));

    // Identical invocation produces identical bytes (no header).
    let bands2 = dir.path().join("bands2.csv");
    assert!(run(&[
        "bands",
        mesh.to_str().unwrap(),
        "--k-max",
        "3",
        "--tol",
        "1e-8",
        "--no-header",
        "--out",
        bands2.to_str().unwrap(),
    ])
    .status
    .success());
    assert_eq!(table, std::fs::read_to_string(&bands2).unwrap());
}

#[test]
fn unresolvable_radius_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    let targets = write(
        dir.path(),
        "targets.json",
        "{\"targets\": [[1.0, 2.0]], \"L\": 10.0}\n",
    );
    let design = dir.path().join("design.json");
    assert!(run(&["design", targets.to_str().unwrap(), "--out", design.to_str().unwrap()])
        .status
        .success());
    let geometry = dir.path().join("cell.json");
    assert!(run(&[
        "geometry",
        design.to_str().unwrap(),
        "--radii",
        "0.004",
        "--out",
        geometry.to_str().unwrap(),
    ])
    .status
    .success());
    // 0.004 < h_max/hole_refine = 0.0125: below the minimum resolvable radius
    let out = run(&["mesh", geometry.to_str().unwrap(), "--h-max", "0.05", "--hole-refine", "4"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn verify_single_radius_certifies() {
    let dir = tempfile::tempdir().unwrap();
    let targets = write(
        dir.path(),
        "targets.json",
        "{\"targets\": [[1.0, 2.0]], \"L\": 10.0}\n",
    );
    let design = dir.path().join("design.json");
    assert!(run(&["design", targets.to_str().unwrap(), "--out", design.to_str().unwrap()])
        .status
        .success());
    let outdir = dir.path().join("verify");
    let out = run(&[
        "verify",
        design.to_str().unwrap(),
        "--radii",
        "0.03",
        "--h-max",
        "0.06",
        "--hole-refine",
        "3",
        "--tol",
        "1e-8",
        "--out",
        outdir.to_str().unwrap(),
        "--no-header",
    ]);
    assert!(
        out.status.success(),
        "stdout: {} stderr: {}",
        stdout(&out),
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(outdir.join("study.csv").exists());
    assert!(outdir.join("bands_r1.csv").exists());
    assert!(outdir.join("gaps_r1.csv").exists());
    let gaps = std::fs::read_to_string(outdir.join("gaps_r1.csv")).unwrap();
    assert!(gaps.lines().skip(1).any(|l| l.contains(",true,")));
}

#[test]
fn verify_empty_cell_exit_5() {
    let dir = tempfile::tempdir().unwrap();
    let design = write(dir.path(), "empty.json", "{\"n\": 2, \"d\": [], \"b\": []}\n");
    let outdir = dir.path().join("verify");
    let out = run(&[
        "verify",
        design.to_str().unwrap(),
        "--radii",
        "0.02",
        "--h-max",
        "0.1",
        "--out",
        outdir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(5));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no gaps to certify"));
}

#[test]
fn study_emits_rows_and_trend_columns() {
    let dir = tempfile::tempdir().unwrap();
    let targets = write(
        dir.path(),
        "targets.json",
        "{\"targets\": [[1.0, 2.0]], \"L\": 10.0}\n",
    );
    let design = dir.path().join("design.json");
    assert!(run(&["design", targets.to_str().unwrap(), "--out", design.to_str().unwrap()])
        .status
        .success());
    let out = run(&[
        "study",
        design.to_str().unwrap(),
        "--radii",
        "0.04,0.03",
        "--h-max",
        "0.08",
        "--hole-refine",
        "4",
        "--tol",
        "1e-8",
        "--no-header",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = stdout(&out);
    assert!(table.starts_with("r,eps,k,lamD_scaled,sigma,dev_sigma,lamN_next_scaled,mu,dev_mu,trend_sigma,trend_mu\n"));
    assert_eq!(table.lines().count(), 3);
}

#[test]
fn forward_rejects_non_monotone_design() {
    let dir = tempfile::tempdir().unwrap();
    // descending d gives descending sigma
    let design = write(
        dir.path(),
        "bad.json",
        "{\"n\": 2, \"d\": [0.5, 0.1], \"b\": [0.2, 0.2]}\n",
    );
    let out = run(&["forward", design.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn design_n3_uses_builtin_capacity() {
    let dir = tempfile::tempdir().unwrap();
    let targets = write(
        dir.path(),
        "targets.json",
        "{\"targets\": [[1.0, 2.0]], \"L\": 10.0}\n",
    );
    let out = run(&["design", targets.to_str().unwrap(), "--n", "3"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("\"kappa\": 8.0000000000000000e0"), "{text}");
    assert!(text.contains("\"d\": [2.5000000000000000e-1]"), "{text}");
    // geometry construction stays two-dimensional
    let design = write(dir.path(), "d3.json", &text);
    let out = run(&["geometry", design.to_str().unwrap(), "--radii", "0.02"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn selftest_deterministic_pass() {
    let out = run(&["selftest", "--seed", "7", "--samples", "100"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("selftest: PASS"));
}

#[test]
fn usage_error_exit_64() {
    let out = run(&["design"]);
    assert_eq!(out.status.code(), Some(64));
}

#[test]
fn deterministic_design_output() {
    let dir = tempfile::tempdir().unwrap();
    let targets = write(
        dir.path(),
        "targets.json",
        "{\"targets\": [[0.5, 1.0], [2.0, 3.0]], \"L\": 6.0}\n",
    );
    let a = run(&["design", targets.to_str().unwrap()]);
    let b = run(&["design", targets.to_str().unwrap()]);
    assert!(a.status.success() && b.status.success());
    assert_eq!(a.stdout, b.stdout);
}
