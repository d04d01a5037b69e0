mod common;

use std::path::Path;

use serde_json::{json, Value};
use tempfile::tempdir;

use revkam::config::{apply_overrides, load_config, KamConfig, LienardConfig, Mode};
use revkam::fourier::{FieldShape, Parity};
use revkam::io::{
    convergence_csv, csv_table, load_embedding, load_field, save_embedding, save_field, RunManifest, CONVERGENCE_HEADER,
};
use revkam::kam::TorusEmbedding;
use revkam::synthetic::random_field;
use revkam::Error;

use common::repo_file;

fn embedding() -> TorusEmbedding {
    TorusEmbedding::sample(&[0.618_033_988_749_894_9], true, 9, |th, t| {
        let a = th[0] + t;
        Ok((vec![th[0] + 1e-3 * a.sin()], vec![2e-3 * a.cos() + 1e-4]))
    })
    .unwrap()
}

fn write_json(path: &Path, v: &Value) {
    std::fs::write(path, serde_json::to_string_pretty(v).unwrap()).unwrap();
}

#[test]
fn embedding_round_trip_is_exact() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("embedding.json");
    let e = embedding();
    save_embedding(&path, &e).unwrap();
    let back = load_embedding(&path).unwrap();
    assert_eq!(back, e);
    assert_eq!(back.x_interp.coeffs(), e.x_interp.coeffs());
    assert_eq!(back.y_interp.coeffs(), e.y_interp.coeffs());
}

#[test]
fn flipped_parity_tag_is_rejected() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("embedding.json");
    save_embedding(&path, &embedding()).unwrap();
    let mut doc: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(doc["x"]["parity"], "odd");
    doc["x"]["parity"] = json!("even");
    write_json(&path, &doc);
    assert!(matches!(load_embedding(&path), Err(Error::Validation(_))));
}

#[test]
fn field_round_trip_is_exact() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("f.json");
    let f = random_field(FieldShape::new(2, 2, 4, 2, 0.5, true), Parity::Even, 1.0, 0.3, 11).unwrap();
    save_field(&path, &f).unwrap();
    let back = load_field(&path).unwrap();
    assert_eq!(back.coeffs(), f.coeffs());
    assert_eq!(back.parity(), Parity::Even);
}

#[test]
fn malformed_json_is_a_parse_error() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{\"mode\": \"flow\",").unwrap();
    assert!(matches!(load_config::<KamConfig>(&path, &[]), Err(Error::Parse { .. })));
    assert!(matches!(load_embedding(&path), Err(Error::Parse { .. })));
}

#[test]
fn missing_file_is_an_io_error() {
    let r = load_config::<KamConfig>(Path::new("/nonexistent/config.json"), &[]);
    assert!(matches!(r, Err(Error::Io { .. })));
}

#[test]
fn unknown_keys_are_rejected() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("c.json");
    let mut doc: Value = serde_json::from_str(&std::fs::read_to_string(repo_file("configs/flow_demo.json")).unwrap()).unwrap();
    doc["colour"] = json!("blue");
    write_json(&path, &doc);
    match load_config::<KamConfig>(&path, &[]) {
        Err(Error::Parameter(msg)) => assert!(msg.contains("colour"), "{msg}"),
        other => panic!("expected a parameter error, got {other:?}"),
    }
}

#[test]
fn overrides_are_applied() {
    let (cfg, doc) = load_config::<KamConfig>(
        &repo_file("configs/flow_demo.json"),
        &["M=3".into(), "mode=map".into(), "settings.embedding_n=15".into()],
    )
    .unwrap();
    assert_eq!(cfg.m_steps, 3);
    assert_eq!(cfg.mode, Mode::Map);
    assert_eq!(cfg.settings.embedding_n, 15);
    assert_eq!(doc["M"], 3);

    let (lc, _) = load_config::<LienardConfig>(&repo_file("configs/lienard_demo.json"), &["stability.t_max=5".into()]).unwrap();
    assert_eq!(lc.stability.t_max, 5.0);

    let mut v = json!({"a": 1});
    assert!(matches!(apply_overrides(&mut v, &["novalue".into()]), Err(Error::Parameter(_))));
    assert!(matches!(apply_overrides(&mut v, &["a.b=2".into()]), Err(Error::Parameter(_))));
}

#[test]
fn demo_configs_parse() {
    load_config::<KamConfig>(&repo_file("configs/flow_demo.json"), &[]).unwrap();
    load_config::<KamConfig>(&repo_file("configs/map_demo.json"), &[]).unwrap();
    load_config::<LienardConfig>(&repo_file("configs/lienard_demo.json"), &[]).unwrap();
}

#[test]
fn empty_table_is_header_only() {
    let bytes = csv_table(&CONVERGENCE_HEADER, Vec::<Vec<String>>::new());
    assert_eq!(String::from_utf8(bytes).unwrap(), format!("{}\n", CONVERGENCE_HEADER.join(",")));
}

#[test]
fn convergence_table_has_one_row_per_step() {
    let (cfg, _) = load_config::<KamConfig>(&repo_file("configs/flow_demo.json"), &["M=2".into()]).unwrap();
    let out = cfg.run(&repo_file("configs")).unwrap();
    let text = String::from_utf8(convergence_csv(&out.run.report)).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), out.run.report.rows.len() + 1);
    assert_eq!(lines.len(), 3);
    for line in &lines[1..] {
        assert!(!line.contains(';'));
        for cell in line.split(',') {
            cell.parse::<f64>().unwrap_or_else(|_| panic!("cell `{cell}` is not a float"));
        }
    }
}

#[test]
fn manifest_detects_changed_outputs() {
    let dir = tempdir().unwrap();
    let mut m = RunManifest::new("demo", "kam run", json!({"M": 1}), 7, 1);
    m.add_file(dir.path(), "a.csv", b"x,y\n1,2\n").unwrap();
    m.add_file(dir.path(), "b.json", b"{}").unwrap();
    m.save(dir.path()).unwrap();
    let back = RunManifest::load(dir.path()).unwrap();
    assert_eq!(back, m);
    assert!(back.check_digests(dir.path()).unwrap().iter().all(|c| c.matches));
    std::fs::write(dir.path().join("a.csv"), b"x,y\n1,3\n").unwrap();
    let checks = back.check_digests(dir.path()).unwrap();
    let bad: Vec<&str> = checks.iter().filter(|c| !c.matches).map(|c| c.file.as_str()).collect();
    assert_eq!(bad, ["a.csv"]);
    std::fs::remove_file(dir.path().join("b.json")).unwrap();
    assert!(matches!(back.check_digests(dir.path()), Err(Error::Io { .. })));
}
