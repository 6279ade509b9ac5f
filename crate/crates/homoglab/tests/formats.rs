use std::fs;

use homoglab::files::load_coefficient;
use homoglab::report::{emit, study_csv, Format};
use homoglab::RayonExecutor;
use homoglab_core::exec::Sequential;
use homoglab_core::evolution::EquationKind;
use homoglab_core::study::run_study;
use homoglab_core::study::StudyConfig;
use homoglab_core::torus::{CellGrid, CoefficientCell, CoefficientKind};

fn small(kind: EquationKind) -> StudyConfig {
    let mut cfg = StudyConfig::new(kind, vec![0.5, 0.25, 0.125]);
    cfg.n = 16;
    cfg.random_sources = 1;
    cfg.half_window = 16;
    cfg
}

#[test]
fn thread_count_does_not_change_reports() {
    let cfg = small(EquationKind::Heat);
    let seq = run_study(&cfg, &Sequential).unwrap();
    let par = run_study(&cfg, &RayonExecutor::new(Some(4)).unwrap()).unwrap();
    assert_eq!(study_csv(&seq).unwrap(), study_csv(&par).unwrap());
}

#[test]
fn json_carries_environment() {
    let dir = tempfile::tempdir().unwrap();
    let rep = run_study(&small(EquationKind::Wave), &Sequential).unwrap();
    let p = dir.path().join("r.json");
    emit(&rep, &p, Format::Json).unwrap();
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&p).unwrap()).unwrap();
    assert_eq!(v["environment"]["box_points"], serde_json::json!([32, 64, 128]));
    assert_eq!(v["rows"].as_array().unwrap().len(), 3 * rep.summaries.len());
    emit(&rep, &p, Format::Csv).unwrap();
    assert_eq!(fs::read(&p).unwrap(), study_csv(&rep).unwrap());
}

#[test]
fn coefficient_files_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let g = CellGrid::new(2, 8).unwrap();
    let c = homoglab_core::check::oblique_2d(&g).unwrap();
    let p = dir.path().join("c.json");
    fs::write(&p, serde_json::to_string(&c.to_spec()).unwrap()).unwrap();
    let (kind, terms) = load_coefficient(&p, CoefficientKind::Matrix).unwrap();
    let back = CoefficientCell::from_spec(kind, &terms, &g).unwrap();
    assert_eq!(back.samples(), c.samples());

    fs::write(&p, r#"{"kind": "scalar", "terms": [{"freq": [0, 0], "re": [[1.0]]}]}"#).unwrap();
    assert_eq!(load_coefficient(&p, CoefficientKind::Matrix).unwrap().0, CoefficientKind::Scalar);
    fs::write(&p, r#"[{"freq": [1, 0], "re": [[1.0]]}]"#).unwrap();
    let (k, t) = load_coefficient(&p, CoefficientKind::Matrix).unwrap();
    assert!(CoefficientCell::from_spec(k, &t, &g).is_err());
}
