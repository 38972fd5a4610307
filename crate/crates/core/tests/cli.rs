use std::path::Path;

use gyrostat::cli::run;

fn call(args: &[&str]) -> (i32, String, String) {
    let (mut o, mut e) = (Vec::new(), Vec::new());
    let code = run(std::iter::once("gyrostat").chain(args.iter().copied()), &mut o, &mut e);
    (code, String::from_utf8(o).unwrap(), String::from_utf8(e).unwrap())
}

fn write_params(dir: &Path) -> String {
    let p = dir.join("params.json");
    std::fs::write(&p, r#"{"a": 1.3, "b": 0.7, "lambda": 0.45}"#).unwrap();
    p.display().to_string()
}

#[test]
fn diagram_writes_one_csv_per_branch_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    let params = write_params(dir.path());
    let out = dir.path().join("diag");
    let (code, stdout, err) = call(&[
        "--json", "diagram", "--params", &params, "--h", "1.5", "--out", out.to_str().unwrap(),
        "--format", "csv,svg", "--per-sign", "1000",
    ]);
    assert_eq!(code, 0, "{err}");
    let v: serde_json::Value = serde_json::from_str(stdout.trim()).unwrap();
    assert!(v["singular"]["cusp"].as_u64().is_some());
    for b in ["gamma_plus", "gamma_minus", "gamma1", "gamma2"] {
        assert!(out.join(format!("sigma_h_1.5_{b}.csv")).exists(), "{b}");
    }
    assert!(out.join("sigma_h_1.5.svg").exists());
}

#[test]
fn invalid_params_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.json");
    std::fs::write(&p, r#"{"a": 1.0, "b": 1.0, "lambda": 0.3}"#).unwrap();
    let (code, _, err) = call(&["lax-verify", "--params", p.to_str().unwrap(), "--samples", "3"]);
    assert_eq!(code, 1, "{err}");
    let (code, _, _) = call(&["critical-scan", "--params", p.to_str().unwrap(), "--stratum", "Q", "--out", "x.json"]);
    assert_eq!(code, 1);
}

#[test]
fn simulate_and_scan() {
    let dir = tempfile::tempdir().unwrap();
    let params = write_params(dir.path());
    let state = dir.path().join("s0.json");
    std::fs::write(
        &state,
        r#"{"omega":[0.3,-0.2,0.5],"alpha":[1.3,0.0,0.0],"beta":[0.0,0.7,0.0]}"#,
    )
    .unwrap();
    let traj = dir.path().join("traj.csv");
    let (code, _, err) = call(&[
        "simulate", "--params", &params, "--state", state.to_str().unwrap(), "--t-end", "2",
        "--tol", "1e-10", "--out", traj.to_str().unwrap(), "--dt", "0.5",
    ]);
    assert_eq!(code, 0, "{err}");
    let text = std::fs::read_to_string(&traj).unwrap();
    assert_eq!(text.lines().count(), 6);
    assert!(text.starts_with("t,omega1"));

    for (stratum, rank) in [("L", 1), ("N", 2), ("O", 2)] {
        let out = dir.path().join(format!("{stratum}.json"));
        let (code, _, err) = call(&[
            "critical-scan", "--params", &params, "--stratum", stratum, "--count", "3", "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, 0, "{stratum}: {err}");
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
        assert_eq!(v.as_array().unwrap().len(), 3);
        for row in v.as_array().unwrap() {
            assert_eq!(row["rank"].as_u64().unwrap(), rank, "{stratum}: {row}");
        }
    }
}

#[test]
fn special_and_canonicalize() {
    let dir = tempfile::tempdir().unwrap();
    let params = write_params(dir.path());
    for kind in ["equilibria", "pendulum", "rank1"] {
        let (code, out, err) = call(&["special", "--kind", kind, "--params", &params]);
        assert_eq!(code, 0, "{kind}: {err}");
        serde_json::from_str::<serde_json::Value>(&out).unwrap();
    }
    let dg = dir.path().join("dg.json");
    std::fs::write(
        &dg,
        r#"{"inertia":[[2,0,0],[0,2,0],[0,0,1]],"gyro":[0,0,0.45],"A":[[1.3,0],[0,0.7],[0,0]],"C":[[1,0],[0,1]]}"#,
    )
    .unwrap();
    let (code, out, err) = call(&["canonicalize", "--input", dg.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!(v["reducible"].is_boolean());
}

#[test]
fn verify_all_reports_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let (code, stdout, err) = call(&["verify-all", "--seed", "11", "--out", out.to_str().unwrap()]);
        assert_eq!(code, 0, "{stdout}{err}");
        assert_eq!(stdout.lines().filter(|l| l.starts_with("[PASS]")).count(), 10, "{stdout}");
    }
    for name in ["acceptance.csv", "samples.csv"] {
        let x = std::fs::read(a.join(name)).unwrap();
        let y = std::fs::read(b.join(name)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, y, "{name}");
    }
}
