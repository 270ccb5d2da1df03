use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use isoflex::cli_io::{PdeCheckReport, Report};

fn isoflex(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_isoflex"))
        .args(args)
        .env_remove("ISOFLEX_OUT")
        .output()
        .unwrap()
}

fn report(dir: &Path) -> Report {
    serde_json::from_slice(&fs::read(dir.join("report.json")).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn catalog_lists_presets() {
    let out = isoflex(&["catalog"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["plane", "sumsep", "miura", "sumsep_r4"] {
        assert!(text.contains(name), "{name}");
    }
    let json = isoflex(&["catalog", "--json"]);
    let v: serde_json::Value = serde_json::from_slice(&json.stdout).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 8);
}

#[test]
fn plane_report_is_vacuous_but_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = isoflex(&["analyze", "--surface", "plane", "--n1", "8", "--n2", "8", "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(dir.path());
    assert_eq!(r.schema, "isoflex.report");
    assert_eq!(r.kernel.membrane, 0);
    assert_eq!(r.curvature_set.len(), 3);
    assert!(r.reciprocity.vacuous_reason.is_some());
    assert!(r.passed);
    let csv = fs::read_to_string(dir.path().join("pairing.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1);
}

#[test]
fn miura_report_flags_twist_and_no_shear() {
    let dir = tempfile::tempdir().unwrap();
    let out = isoflex(&["analyze", "--surface", "miura", "--n1", "4", "--n2", "4", "--out", s(dir.path())]);
    assert!(out.status.success());
    let r = report(dir.path());
    assert!(r.modes.iter().any(|m| m.chi[2].abs() > 0.5));
    for m in r.modes.iter().filter(|m| m.kind == isoflex::modes::ModeKind::Membrane) {
        assert!(m.e[2].abs() <= 1e-8 * m.e[0].abs().max(m.e[1].abs()));
    }
}

#[test]
fn flags_override_config_and_env_supplies_out() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"surface": "sine1d", "n1": 6, "n2": 6, "export": {"constraints": true}}"#).unwrap();
    let out_dir = dir.path().join("from_env");
    let out = Command::new(env!("CARGO_BIN_EXE_isoflex"))
        .args(["analyze", "--config", s(&cfg), "--n2", "9"])
        .env("ISOFLEX_OUT", &out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&out_dir);
    assert_eq!(r.surface.grid, Some([6, 9]));
    let triplets = fs::read_to_string(out_dir.join("constraints.txt")).unwrap();
    assert!(triplets.starts_with('%'));
}

#[test]
fn input_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [&[&str]; 5] = [
        &["analyze", "--surface", "nope", "--out", s(dir.path())],
        &["analyze", "--surface", "plane", "--n1", "2", "--out", s(dir.path())],
        &["analyze", "--surface", "plane"],
        &["analyze", "--frobnicate"],
        &["pde-check", "--surface", "miura", "--w", "xy", "--n", "8"],
    ];
    for args in cases {
        assert_eq!(isoflex(args).status.code(), Some(3), "{args:?}");
    }
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\n  \"surface\": \"plane\",\n  \"n1\": \"eight\"\n}").unwrap();
    let out = isoflex(&["analyze", "--config", s(&bad), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn failed_invariant_exits_2() {
    // a rank cut below rounding level drops genuine kernel vectors
    let dir = tempfile::tempdir().unwrap();
    let out = isoflex(&[
        "analyze", "--surface", "sine1d", "--n1", "6", "--n2", "6", "--rank-tol", "1e-17", "--out", s(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let r = report(dir.path());
    assert!(!r.passed);
    let failed: Vec<_> = r.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    assert!(failed.contains(&"kernel_dimension"), "{failed:?}");
}

#[test]
fn deform_writes_named_frames() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let f = dir.path().join("frames");
    assert!(isoflex(&["analyze", "--surface", "sumsep", "--n1", "8", "--n2", "8", "--out", s(&a)]).status.success());
    let out = isoflex(&[
        "deform", "--analysis", s(&a), "--mode", "1", "--amplitude", "0.1", "--tile", "5x5", "--frames", "3", "--out",
        s(&f),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut names: Vec<_> = fs::read_dir(&f)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(
        names,
        ["frame_000_t-0.100000.obj", "frame_001_t+0.000000.obj", "frame_002_t+0.100000.obj"]
    );
    let mid = fs::read_to_string(f.join(&names[1])).unwrap();
    let faces = mid.lines().filter(|l| l.starts_with("f ")).count();
    assert_eq!(faces, 25 * 128);
    let unknown = isoflex(&["deform", "--analysis", s(&a), "--mode", "99", "--amplitude", "0.1", "--out", s(&f)]);
    assert_eq!(unknown.status.code(), Some(3));
}

#[test]
fn zero_amplitude_frame_is_undeformed() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    assert!(isoflex(&["analyze", "--surface", "sine1d", "--n1", "6", "--n2", "6", "--out", s(&a)]).status.success());
    let f = dir.path().join("f");
    assert!(isoflex(&["deform", "--analysis", s(&a), "--mode", "0", "--amplitude", "0", "--out", s(&f)])
        .status
        .success());
    let g = dir.path().join("g");
    assert!(isoflex(&["deform", "--analysis", s(&a), "--mode", "2", "--amplitude", "0", "--out", s(&g)])
        .status
        .success());
    let name = "frame_000_t+0.000000.obj";
    let body = |p: &Path| -> Vec<String> {
        fs::read_to_string(p.join(name))
            .unwrap()
            .lines()
            .skip(1)
            .map(str::to_owned)
            .collect()
    };
    assert_eq!(body(&f), body(&g));
}

#[test]
fn pde_check_reports_residuals() {
    let run = |args: &[&str]| -> PdeCheckReport {
        let out = isoflex(args);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        serde_json::from_slice(&out.stdout).unwrap()
    };
    let xy = run(&["pde-check", "--surface", "sumsep", "--w", "xy", "--n", "16"]);
    assert!(xy.levels.iter().all(|l| l.rms <= 1e-12));
    let y2 = run(&["pde-check", "--surface", "sine1d", "--w", "y2", "--n", "32"]);
    for l in &y2.levels {
        assert!((l.rms - std::f64::consts::FRAC_1_SQRT_2).abs() < 5e-3, "{}", l.rms);
    }
    let plane = run(&["pde-check", "--surface", "plane", "--w", "1", "--n", "8"]);
    assert!(plane.levels.iter().all(|l| l.rms <= 1e-12));
}
