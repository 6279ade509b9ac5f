use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn homoglab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_homoglab"))
        .args(args)
        .current_dir(dir)
        .env("HOMOGLAB_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

#[test]
fn study_csv_is_byte_stable_and_shaped() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["study", "--eq", "wave", "--eps", "1/4,1/8,1/16", "--n", "16", "--metrics", "u", "--random-sources", "1"];
    let mut bytes = Vec::new();
    for name in ["a.csv", "b.csv"] {
        let mut a = args.to_vec();
        a.extend(["--out", name]);
        let o = homoglab(&a, dir.path());
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        bytes.push(fs::read(dir.path().join(name)).unwrap());
    }
    assert_eq!(bytes[0], bytes[1]);
    let text = String::from_utf8(bytes.pop().unwrap()).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "equation,metric,eps,lhs,rhs_norm,ratio,slope");
    assert_eq!(lines.len(), 4);
    let slopes: Vec<&str> = lines[1..].iter().map(|l| l.rsplit(',').next().unwrap()).collect();
    assert!(slopes.iter().all(|s| *s == slopes[0]));
}

#[test]
fn empty_selection_gives_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let o = homoglab(&["study", "--eq", "heat", "--metrics", "", "--out", "e.csv"], dir.path());
    assert_eq!(code(&o), 0);
    assert_eq!(fs::read_to_string(dir.path().join("e.csv")).unwrap(), "equation,metric,eps,lhs,rhs_norm,ratio,slope\n");
}

#[test]
fn config_overrides_flags_and_sets_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"equation": "wave", "eps": [0.5, 0.25, 0.125], "n": 16, "metrics": [], "output": "r.json"}"#;
    fs::write(dir.path().join("cfg.json"), cfg).unwrap();
    let o = homoglab(&["study", "--eq", "heat", "--config", "cfg.json"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(v["equation"], "wave");
    assert_eq!(v["environment"]["cell_points"], 16);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&homoglab(&["check", "norms"], dir.path())), 0);
    assert_eq!(code(&homoglab(&["check", "nonsense"], dir.path())), 2);
    assert_eq!(code(&homoglab(&["study", "--eps", "1/4,1/8"], dir.path())), 2);
    assert_eq!(code(&homoglab(&["study", "--eps", "0.3,1/8,1/16"], dir.path())), 2);
    assert_eq!(code(&homoglab(&["frobnicate"], dir.path())), 2);

    fs::write(dir.path().join("bad.json"), r#"[{"freq": [0], "re": [[0.0]]}, {"freq": [1], "re": [[0.0]], "im": [[-0.5]]}, {"freq": [-1], "re": [[0.0]], "im": [[0.5]]}]"#).unwrap();
    let o = homoglab(&["check", "cell", "--coeff", "bad.json"], dir.path());
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stdout).contains("not elliptic"));

    let o = homoglab(&["study", "--metrics", "u", "--out", "missing/dir/x.csv"], dir.path());
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing/dir/x.csv"));
}

#[test]
fn cell_command_reports_harmonic_mean() {
    let dir = tempfile::tempdir().unwrap();
    let o = homoglab(&["cell", "--theta", "0;0.5;0.25;0.125"], dir.path());
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let a0 = v["a_theta"][0][0][0][0].as_f64().unwrap();
    assert!((a0 - 3f64.sqrt()).abs() < 1e-8);
    assert_eq!(v["corrector_norms"].as_array().unwrap().len(), 4);
    assert_eq!(v["deviations"]["tensor"].as_array().unwrap().len(), 3);
}

#[test]
fn fibre_command_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = homoglab(&["fibre", "--eq", "heat", "--kmax", "1", "--theta-grid", "0;-pi/2", "--out", "f.csv"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(dir.path().join("f.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "eps,theta,k,ratio,raw_error");
    assert_eq!(lines.len(), 1 + 3 * 2 * 3);
}

#[test]
fn evolve_command_summarises_and_dumps() {
    let dir = tempfile::tempdir().unwrap();
    let o = homoglab(&["evolve", "--eq", "wave", "--eps", "1/2", "--n", "16", "--dump", "d.json"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["u_error"].as_f64().unwrap() > 0.0);
    let d: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("d.json")).unwrap()).unwrap();
    assert_eq!(d["u_eps"].as_array().unwrap().len(), d["lambdas"].as_array().unwrap().len());
}
