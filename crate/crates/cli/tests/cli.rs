mod common;

use std::fs;

use common::{detkit, field, stderr, stdout};

const PERFECT_GT: &str = r#"{
  "images": [{"id": 1, "width": 200, "height": 200}, {"id": 2, "width": 200, "height": 200}],
  "annotations": [
    {"id": 1, "image_id": 1, "category_id": 1, "bbox": [10, 10, 40, 30]},
    {"id": 2, "image_id": 1, "category_id": 1, "bbox": [100, 120, 20, 20]},
    {"id": 3, "image_id": 2, "category_id": 1, "bbox": [50, 60, 70, 35]}
  ],
  "categories": [{"id": 1, "name": "polyp"}]
}"#;

const PERFECT_PRED: &str = "image_id,x1,y1,x2,y2,score,label
1,10,10,50,40,0.9,1
1,100,120,120,140,0.8,1
2,50,60,120,95,0.7,1
";

#[test]
fn perfect_detector_scores_one() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("g.json"), PERFECT_GT).unwrap();
    fs::write(dir.path().join("p.csv"), PERFECT_PRED).unwrap();
    let out = detkit(dir.path(), &["evaluate", "--gt", "g.json", "--pred", "p.csv"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(
        stdout(&out).contains("prec=1.0 rec=1.0 f1=1.0 ap=1.0"),
        "{}",
        stdout(&out)
    );
    let curve = fs::read_to_string(dir.path().join("pr-curve.csv")).unwrap();
    assert!(curve.starts_with("threshold,recall,precision\n"));
    let metrics: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics["fn_frames"], 0);
    assert!(dir.path().join("metrics.manifest.json").exists());
}

#[test]
fn optimized_preset_covers_small_boxes_better() {
    let dir = tempfile::tempdir().unwrap();
    let s = detkit(
        dir.path(),
        &["synthesize", "--images", "300", "--seed", "9", "--out", "synth.json"],
    );
    assert!(s.status.success(), "{}", stderr(&s));
    let run = |cfg: &str| {
        let out = detkit(
            dir.path(),
            &[
                "coverage-report",
                "--config",
                cfg,
                "--gt",
                "synth.json",
                "--out",
                &format!("{cfg}.json"),
            ],
        );
        assert!(out.status.success(), "{}", stderr(&out));
        field(&stdout(&out), "mean_best_iou").unwrap()
    };
    let (default, optimized) = (run("retinanet-default"), run("paper-optimized"));
    assert!(optimized > default, "optimized {optimized} vs default {default}");
}

#[test]
fn config_files_are_accepted() {
    let dir = tempfile::tempdir().unwrap();
    detkit(dir.path(), &["synthesize", "--images", "20", "--out", "s.csv"]);
    let cfg = serde_json::to_string(&detkit::AnchorConfig64::paper_optimized()).unwrap();
    fs::write(dir.path().join("preset.json"), cfg).unwrap();
    let a = detkit(
        dir.path(),
        &[
            "coverage-report",
            "--config",
            "preset.json",
            "--gt",
            "s.csv",
            "--out",
            "a.json",
        ],
    );
    let b = detkit(
        dir.path(),
        &[
            "coverage-report",
            "--config",
            "paper-optimized",
            "--gt",
            "s.csv",
            "--out",
            "b.json",
        ],
    );
    assert!(a.status.success() && b.status.success(), "{}", stderr(&a));
    assert_eq!(field(&stdout(&a), "mean_best_iou"), field(&stdout(&b), "mean_best_iou"));
}

#[test]
fn missing_input_exits_one_with_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = detkit(dir.path(), &["evaluate", "--gt", "absent-gt.json", "--pred", "p.csv"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("absent-gt.json"), "{}", stderr(&out));
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(detkit(dir.path(), &["no-such-command"]).status.code(), Some(1));
    assert_eq!(
        detkit(dir.path(), &["nms", "--pred", "x.csv", "--bogus"]).status.code(),
        Some(1)
    );
    assert_eq!(detkit(dir.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn bad_score_is_a_contract_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("p.csv"),
        "image_id,x1,y1,x2,y2,score,label\n1,0,0,5,5,1.5,1\n",
    )
    .unwrap();
    let out = detkit(dir.path(), &["nms", "--pred", "p.csv"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("row"), "{}", stderr(&out));
}

#[test]
fn nms_methods_write_predictions() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("p.csv"),
        "image_id,x1,y1,x2,y2,score,label\n1,0,0,10,10,0.9,1\n1,0,0,10,10,0.8,1\n",
    )
    .unwrap();
    for (method, kept) in [("hard", 1), ("linear", 1), ("gaussian", 2)] {
        let name = format!("{method}.csv");
        let out = detkit(
            dir.path(),
            &["nms", "--pred", "p.csv", "--method", method, "--out", &name],
        );
        assert!(out.status.success(), "{}", stderr(&out));
        let text = fs::read_to_string(dir.path().join(&name)).unwrap();
        assert_eq!(text.lines().count(), kept + 1, "{method}: {text}");
    }
    let g = fs::read_to_string(dir.path().join("gaussian.csv")).unwrap();
    let score: f64 = g.lines().nth(2).unwrap().split(',').nth(5).unwrap().parse().unwrap();
    assert!((score - 0.8 * (-2.0f64).exp()).abs() < 1e-12);
}

#[test]
fn optimize_anchors_writes_config_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    detkit(dir.path(), &["synthesize", "--images", "60", "--out", "s.json"]);
    fs::write(
        dir.path().join("de.json"),
        r#"{"population_size":20,"mutation_factor":0.5,"crossover_rate":0.9,"max_generations":15,
            "tolerance":0.0,"seed":4,"bounds":[[2.1,4.1],[2.1,4.8],[2.8,5.5],[3.5,6.2],[4.2,6.2],[0.001,1.38],[0.001,1.38]]}"#,
    )
    .unwrap();
    let out = detkit(
        dir.path(),
        &[
            "optimize-anchors",
            "--gt",
            "s.json",
            "--de",
            "de.json",
            "--out",
            "opt.json",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let trace = fs::read_to_string(dir.path().join("opt.trace.csv")).unwrap();
    assert!(trace.starts_with("generation,best_objective\n0,"));
    assert_eq!(trace.lines().count(), 1 + 16);
    let cfg: detkit::AnchorConfig64 =
        serde_json::from_str(&fs::read_to_string(dir.path().join("opt.json")).unwrap()).unwrap();
    assert_eq!(cfg.anchors_per_location(), 15);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("opt.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 4);
    assert_eq!(manifest["inputs"].as_array().unwrap().len(), 2);
}
