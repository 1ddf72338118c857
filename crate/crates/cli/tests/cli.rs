use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn mg_lab(args: &[&str], envs: &[(&str, &Path)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_mg-lab"));
    cmd.args(args).env_remove("MG_LAB_OUT");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_spec(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

const SWEEP: &str = r#"{
  "name": "small",
  "dataset": {"tau": 17, "split": {"init_len": 20, "train_len": 300, "test_len": 40}},
  "seeds": [3, 4, 5],
  "models": [
    {"kind": "tcrc", "delay": [4, 8], "layers": [1, 2], "ridge_beta": 1e-8},
    {"kind": "esn", "reservoir_size": 20, "spectral_radius": [0.5, 0.9], "washout": 20,
     "ridge_beta": [1e-8, 1e-4]}
  ]
}"#;

#[test]
fn generate_writes_series_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d");
    let o = mg_lab(
        &[
            "generate",
            "--tau",
            "17",
            "--samples",
            "2386",
            "--out",
            out.to_str().unwrap(),
        ],
        &[],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("mg_tau17.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2387);
    assert_eq!(csv.lines().next(), Some("step,value"));
    let sidecar = fs::read_to_string(out.join("mg_tau17.json")).unwrap();
    assert!(sidecar.contains("\"samples\": 2386"));
    assert!(sidecar.contains("\"sha256\""));
}

#[test]
fn generate_honours_env_out_dir() {
    let dir = tempfile::tempdir().unwrap();
    let o = mg_lab(
        &["generate", "--tau", "10", "--samples", "20"],
        &[("MG_LAB_OUT", dir.path())],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("mg_tau10.csv").exists());
}

#[test]
fn missing_spec_exits_1_and_names_file() {
    let o = mg_lab(&["run", "--spec", "/nonexistent/missing.json"], &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("missing.json"), "{}", stderr(&o));
}

#[test]
fn malformed_and_gridded_specs_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_spec(dir.path(), "bad.json", "{\"dataset\": {}}");
    assert_eq!(
        mg_lab(&["sweep", "--spec", &bad], &[]).status.code(),
        Some(1)
    );
    let grid = write_spec(dir.path(), "grid.json", SWEEP);
    let o = mg_lab(
        &[
            "run",
            "--spec",
            &grid,
            "--out",
            dir.path().to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("sweep"), "{}", stderr(&o));
}

#[test]
fn unwritable_out_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let spec = write_spec(
        dir.path(),
        "one.json",
        r#"{"dataset": {"tau": 17, "split": {"init_len": 0, "train_len": 100, "test_len": 10}},
            "models": [{"kind": "tcrc", "delay": 3}]}"#,
    );
    let out = blocker.join("sub");
    let o = mg_lab(
        &["run", "--spec", &spec, "--out", out.to_str().unwrap()],
        &[],
    );
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn output_dir_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let spec_out = dir.path().join("from_spec");
    let body = format!(
        r#"{{"dataset": {{"tau": 17, "split": {{"init_len": 0, "train_len": 100, "test_len": 10}}}},
             "models": [{{"kind": "tcrc", "delay": 3}}], "output_dir": {:?}}}"#,
        spec_out.to_str().unwrap()
    );
    let spec = write_spec(dir.path(), "s.json", &body);
    let env_out = dir.path().join("from_env");
    let flag_out = dir.path().join("from_flag");

    let o = mg_lab(
        &["run", "--spec", &spec, "--out", flag_out.to_str().unwrap()],
        &[("MG_LAB_OUT", &env_out)],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(flag_out.join("results.csv").exists());
    assert!(!spec_out.exists() && !env_out.exists());

    let o = mg_lab(&["run", "--spec", &spec], &[("MG_LAB_OUT", &env_out)]);
    assert!(o.status.success());
    assert!(spec_out.join("summary.json").exists());
    assert!(!env_out.exists());
}

#[test]
fn sweep_is_independent_of_jobs_and_report_regenerates_summary() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), "sweep.json", SWEEP);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for (out, jobs) in [(&a, "1"), (&b, "4")] {
        let o = mg_lab(
            &[
                "sweep",
                "--spec",
                &spec,
                "--out",
                out.to_str().unwrap(),
                "--jobs",
                jobs,
            ],
            &[],
        );
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for f in ["results.csv", "summary.json"] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
    let results = fs::read_to_string(a.join("results.csv")).unwrap();
    // 4 seed-invariant TCRC points once each, 4 ESN points x 3 seeds.
    assert_eq!(results.lines().count(), 1 + 4 + 12);
    // One rollout per model kind's best point.
    assert_eq!(fs::read_dir(a.join("predictions")).unwrap().count(), 2);

    let re = dir.path().join("re");
    let o = mg_lab(
        &[
            "report",
            "--results",
            a.to_str().unwrap(),
            "--out",
            re.to_str().unwrap(),
        ],
        &[],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        fs::read(re.join("summary.json")).unwrap(),
        fs::read(a.join("summary.json")).unwrap()
    );
}

#[test]
fn seed_base_shifts_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(
        dir.path(),
        "esn.json",
        r#"{"dataset": {"tau": 17, "split": {"init_len": 20, "train_len": 100, "test_len": 10}},
            "seeds": [0, 1],
            "models": [{"kind": "esn", "reservoir_size": 8, "spectral_radius": 0.5, "washout": 20}]}"#,
    );
    let out = dir.path().join("o");
    let o = mg_lab(
        &[
            "run",
            "--spec",
            &spec,
            "--out",
            out.to_str().unwrap(),
            "--seed-base",
            "40",
        ],
        &[],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let results = fs::read_to_string(out.join("results.csv")).unwrap();
    let seeds: Vec<&str> = results
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(3).unwrap())
        .collect();
    assert_eq!(seeds, ["40", "41"]);
}

#[test]
fn report_on_missing_results_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = mg_lab(
        &[
            "report",
            "--results",
            dir.path().join("nope.csv").to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn shipped_specs_expand() {
    use mg_lab_core::harness::ExperimentSpec;
    let specs = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../specs");
    for (file, points) in [
        ("tau15.json", 60 + 18),
        ("tau17.json", 4 + 18),
        ("tcrc_tau10.json", 1),
    ] {
        let s = ExperimentSpec::load(&specs.join(file)).unwrap();
        assert_eq!(s.expand().unwrap().len(), points, "{file}");
    }
}

#[test]
fn run_single_tcrc_spec() {
    let dir = tempfile::tempdir().unwrap();
    let spec = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../specs/tcrc_tau10.json");
    let o = mg_lab(
        &[
            "run",
            "--spec",
            spec.to_str().unwrap(),
            "--out",
            dir.path().to_str().unwrap(),
        ],
        &[],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let results = fs::read_to_string(dir.path().join("results.csv")).unwrap();
    let mse: f64 = results
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .nth(6)
        .unwrap()
        .parse()
        .unwrap();
    assert!(mse < 1e-5, "{mse}");
    assert!(dir.path().join("predictions/tcrc_p0.csv").exists());
}
