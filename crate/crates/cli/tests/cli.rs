use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn harmflow(root: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_harmflow"))
        .args(args)
        .env("HARMFLOW_OUTPUT_ROOT", root)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, json: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, json).unwrap();
    path.to_string_lossy().into_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const FIXED: &str = r#"{"mode":"fixed","seed":3,"n":2,"geometry":{"kind":"flat_box","dim":1,"cells":32},"T":0.05,"N":8,"snapshot_every":4}"#;

#[test]
fn verify_passes_and_lists_every_check() {
    let tmp = TempDir::new().unwrap();
    let o = harmflow(tmp.path(), &["verify", "--n", "4", "--trials", "1000", "--seed", "7"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = read_json(&tmp.path().join("verify_n4_seed7/summary.json"));
    assert_eq!(s["passed"], true);
    let names: Vec<&str> = s["invariants"].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["v_splitting_n4", "tangent_normal_n4", "neumann_equivalences_n4"]);
    assert!(s["invariants"].as_array().unwrap().iter().all(|c| c["passed"] == true));
    assert_eq!(s["verify"]["equivalences"][0]["inconsistencies"], 0);
}

#[test]
fn constant_pair_gives_a_zero_energy_trace() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "const.json",
        r#"{"mode":"fixed","n":3,"geometry":{"kind":"flat_box","dim":2,"cells":4,"cells_x":4},
            "initial":{"kind":"constant_pair","axis":[0,0,1]},"T":0.1,"N":4}"#,
    );
    let o = harmflow(tmp.path(), &["run", &cfg]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(tmp.path().join("const/trace.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "m,t,E_dirichlet_plus,E_dirichlet_minus,E_total,kinetic_increment,orth_residual_max,pair_residual_max,el_residual,c_tilde_running,jac_dev_max"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 5);
    for row in rows {
        let cols: Vec<f64> = row.split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!(&cols[2..6], &[0.0; 4]);
    }
}

#[test]
fn fixed_run_writes_trace_snapshots_and_summary_deterministically() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "a.json", FIXED);
    let o = harmflow(tmp.path(), &["run", &cfg]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = tmp.path().join("a");
    for name in ["snapshot_00000.txt", "snapshot_00004.txt", "snapshot_00008.txt", "summary.json"] {
        assert!(out.join(name).exists(), "{name}");
    }
    let s = read_json(&out.join("summary.json"));
    for name in ["dirichlet_non_increasing", "cumulative_energy_inequality", "orthogonality", "minimal_pairs", "interpolant_gap_bound"] {
        let c = s["invariants"].as_array().unwrap().iter().find(|c| c["name"] == name).expect(name);
        assert_eq!(c["passed"], true, "{name}");
    }
    assert!(s["constants"]["c_tilde"].is_number());
    let first = std::fs::read(out.join("trace.csv")).unwrap();

    let again = TempDir::new().unwrap();
    let cfg = write_config(again.path(), "a.json", FIXED);
    assert_eq!(harmflow(again.path(), &["run", &cfg]).status.code(), Some(0));
    assert_eq!(first, std::fs::read(again.path().join("a/trace.csv")).unwrap());
}

#[test]
fn moving_run_beyond_lifespan_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "m.json",
        r#"{"mode":"moving","n":2,"geometry":{"kind":"polar_disk","r_core":0.05,"r_interface":0.8,"r_outer":1.0,"nr_in":4,"nr_out":4,"ntheta":16},
            "motion":{"kind":"shrinking_circle","r0":0.8},"T":0.32,"N":8}"#,
    );
    let o = harmflow(tmp.path(), &["run", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("T0 = r0^2/2") && err.contains("0.32"), "{err}");
}

#[test]
fn moving_run_reports_diffeo_constants_and_fails_a_tight_cap() {
    let tmp = TempDir::new().unwrap();
    let body = r#""mode":"moving","seed":2,"n":2,"geometry":{"kind":"polar_disk","r_core":0.05,"r_interface":0.8,"r_outer":1.0,"nr_in":4,"nr_out":4,"ntheta":16},
            "motion":{"kind":"shrinking_circle","r0":0.8},"T":0.16,"N":8"#;
    let ok = write_config(tmp.path(), "ok.json", &format!("{{{body}}}"));
    let o = harmflow(tmp.path(), &["run", &ok]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = read_json(&tmp.path().join("ok/summary.json"));
    assert!(s["constants"]["diffeo"]["c0"].as_f64().unwrap() > 0.0);
    assert!(s["constants"]["diffeo"]["c1"].as_f64().unwrap() > 0.0);

    let tight = write_config(tmp.path(), "tight.json", &format!("{{{body},\"c0_cap\":1e-3}}"));
    let o = harmflow(tmp.path(), &["run", &tight]);
    assert_eq!(o.status.code(), Some(1));
    let s = read_json(&tmp.path().join("tight/summary.json"));
    assert_eq!(s["passed"], false);
    assert!(stderr(&o).contains("diffeo_bounds"));
}

#[test]
fn parse_errors_name_the_key() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "bad.json", r#"{"mode":"fixed","n":2,"stepper":{"max_iters":"many"}}"#);
    let o = harmflow(tmp.path(), &["run", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("stepper.max_iters"), "{}", stderr(&o));
    let cfg = write_config(tmp.path(), "typo.json", r#"{"mode":"fixed","n":2,"lamda":0.5}"#);
    let o = harmflow(tmp.path(), &["run", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("lamda"));
    let o = harmflow(tmp.path(), &["run", "missing.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(harmflow(tmp.path(), &["bogus"]).status.code(), Some(2));
}

#[test]
fn sweeps() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "s.json", FIXED);
    let o = harmflow(tmp.path(), &["sweep", &cfg, "--param", "N", "--values"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("at least one value"));

    let o = harmflow(tmp.path(), &["sweep", &cfg, "--param", "N", "--values", "8,16,32"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = read_json(&tmp.path().join("s/sweep.json"));
    assert_eq!(r["entries"].as_array().unwrap().len(), 3);
    assert!(r["gap_slope"].as_f64().unwrap() > 0.5);
    assert!(tmp.path().join("s/N_16/trace.csv").exists());
    let csv = std::fs::read_to_string(tmp.path().join("s/sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);

    let o = harmflow(tmp.path(), &["sweep", &cfg, "--param", "seed", "--values", "1,2,3"]);
    assert_eq!(o.status.code(), Some(0));
    let r = read_json(&tmp.path().join("s/sweep.json"));
    assert_eq!(r["distinct_trajectories"], true);
    assert_eq!(r["verdicts_identical"], true);
}

#[test]
fn aborted_sweep_keeps_earlier_entries() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "m.json",
        r#"{"mode":"moving","n":2,"geometry":{"kind":"polar_disk","r_core":0.05,"r_interface":0.8,"r_outer":1.0,"nr_in":4,"nr_out":4,"ntheta":16},
            "motion":{"kind":"shrinking_circle","r0":0.8},"T":0.16,"N":8}"#,
    );
    // h = 0.08 is too large for the diffeomorphism family.
    let o = harmflow(tmp.path(), &["sweep", &cfg, "--param", "N", "--values", "8,2"]);
    assert_ne!(o.status.code(), Some(0));
    let r = read_json(&tmp.path().join("m/sweep.json"));
    assert_eq!(r["entries"].as_array().unwrap().len(), 1);
    assert!(r["aborted"].as_str().unwrap().starts_with("N = 2"));
}

#[test]
fn sphere_run() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "sp.json",
        r#"{"mode":"sphere","seed":1,"sphere":{"dim":1,"cells":64,"L":3},"T":0.1,"N":16,"snapshot_every":8}"#,
    );
    let o = harmflow(tmp.path(), &["run", &cfg]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = read_json(&tmp.path().join("sp/summary.json"));
    assert!(s["el_residual_max"].as_f64().unwrap() <= 1e-6);
    assert!(tmp.path().join("sp/sphere_00016.csv").exists());
    let snap = std::fs::read_to_string(tmp.path().join("sp/sphere_00008.csv")).unwrap();
    assert_eq!(snap.lines().count(), 65);
}
