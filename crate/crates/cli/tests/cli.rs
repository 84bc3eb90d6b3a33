use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use geovid::geometry::camera::Intrinsics;
use geovid::linalg::Vec3;
use geovid::synthworld::render_wireframe_cube;
use geovid::synthworld::trajectory::look_rotation;
use serde_json::Value;

fn geovid(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_geovid"))
        .args(["--threads", "1"])
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = geovid(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(geovid(&["eval"]).status.code(), Some(2));
    assert_eq!(geovid(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(
        geovid(&[
            "ablate",
            "--data",
            "d",
            "--geo-ckpt",
            "g",
            "--out-dir",
            "o",
            "--disable",
            "nope"
        ])
        .status
        .code(),
        Some(2)
    );
}

#[test]
fn data_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing");
    let out = geovid(&[
        "eval",
        "--data",
        s(&missing),
        "--ckpt",
        s(&missing),
        "--report",
        "r.json",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error: "), "{err}");
    assert_eq!(err.trim_end().lines().count(), 1);
}

#[test]
fn pretraining_rejects_a_head_free_checkpoint_for_training() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&[
        "synth",
        "--out",
        s(&d.join("ds")),
        "--n-real",
        "4",
        "--n-fake",
        "4",
        "--frames",
        "5",
    ]);
    // a checkpoint whose head was never frozen
    let model = geovid::model::Model::new(geovid::model::ModelConfig::default(), 0).unwrap();
    model.save(&d.join("raw.json")).unwrap();
    let out = geovid(&[
        "train",
        "--data",
        s(&d.join("ds")),
        "--geo-ckpt",
        s(&d.join("raw.json")),
        "--out",
        s(&d.join("m.json")),
        "--epochs",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("frozen"));
}

#[test]
fn full_pipeline_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let ds = d.join("ds");
    ok(&[
        "synth",
        "--out",
        s(&ds),
        "--n-real",
        "7",
        "--n-fake",
        "7",
        "--frames",
        "8",
        "--seed",
        "3",
    ]);
    let manifest = json(&ds.join("manifest.json"));
    assert_eq!(manifest["samples"].as_array().unwrap().len(), 14);

    let model_cfg = d.join("model_cfg.json");
    fs::write(&model_cfg, r#"{"d_model": 16, "layers": 1, "heads": 2}"#).unwrap();
    let train_cfg = d.join("train_cfg.json");
    fs::write(&train_cfg, r#"{"batch_size": 4}"#).unwrap();

    let geo = d.join("geo.json");
    ok(&[
        "pretrain-geo",
        "--data",
        s(&ds),
        "--model-config",
        s(&model_cfg),
        "--config",
        s(&train_cfg),
        "--epochs",
        "2",
        "--out",
        s(&geo),
    ]);
    let history = fs::read_to_string(d.join("geo.history.jsonl")).unwrap();
    assert_eq!(history.lines().count(), 2);
    assert_eq!(json(&geo)["frozen"][0], "geometry_head");

    let model = d.join("model.json");
    let hist = d.join("train.jsonl");
    ok(&[
        "train",
        "--data",
        s(&ds),
        "--geo-ckpt",
        s(&geo),
        "--config",
        s(&train_cfg),
        "--epochs",
        "2",
        "--out",
        s(&model),
        "--history",
        s(&hist),
    ]);
    for line in fs::read_to_string(&hist).unwrap().lines() {
        let rec: Value = serde_json::from_str(line).unwrap();
        assert!(rec["train_loss"].as_f64().unwrap().is_finite());
    }

    let report = d.join("report.json");
    ok(&[
        "eval",
        "--data",
        s(&ds),
        "--ckpt",
        s(&model),
        "--report",
        s(&report),
    ]);
    let r = json(&report);
    let auc = r["auc_roc"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&auc));
    assert_eq!(r["per_sample"].as_array().unwrap().len(), 2);

    let an = d.join("analysis");
    ok(&[
        "analyze",
        "--data",
        s(&ds),
        "--ckpt",
        s(&model),
        "--out-dir",
        s(&an),
        "--split",
        "train",
    ]);
    let samples: Vec<_> = fs::read_dir(&an).unwrap().collect();
    assert_eq!(samples.len(), 10);
    for e in samples {
        let p = e.unwrap().path();
        for f in ["vp_trajectory.csv", "residuals.csv", "residuals.svg"] {
            assert!(p.join(f).is_file(), "{}", p.join(f).display());
        }
    }

    for c in ["gpe", "ga", "ema"] {
        let out = d.join(format!("ablate-{c}"));
        ok(&[
            "ablate",
            "--data",
            s(&ds),
            "--geo-ckpt",
            s(&geo),
            "--disable",
            c,
            "--epochs",
            "1",
            "--batch-size",
            "4",
            "--out-dir",
            s(&out),
        ]);
        assert!(json(&out.join("report.json"))["auc_roc"].is_number());
        assert!(out.join("model.json").is_file());
        assert_eq!(
            fs::read_to_string(out.join("history.jsonl"))
                .unwrap()
                .lines()
                .count(),
            1
        );
    }
}

#[test]
fn extract_from_segments_and_from_frames() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let ds = d.join("ds");
    ok(&[
        "synth",
        "--out",
        s(&ds),
        "--n-real",
        "1",
        "--n-fake",
        "1",
        "--frames",
        "6",
    ]);
    let sample = ds.join("samples").join("real-0000");
    let feats = d.join("real.json");
    ok(&[
        "extract",
        "--segments",
        s(&sample.join("segments.jsonl")),
        "--intrinsics",
        s(&sample.join("intrinsics.json")),
        "--domain",
        "real",
        "--out",
        s(&feats),
    ]);
    let f = json(&feats);
    assert_eq!(f["video_id"], "real");
    assert_eq!(f["T"], 6);
    assert_eq!(f["features"][0].as_array().unwrap().len(), 21);

    let frames = d.join("frames");
    fs::create_dir(&frames).unwrap();
    let k = Intrinsics::new(300.0, 300.0, 160.0, 120.0).unwrap();
    for t in 0..4 {
        let r = look_rotation(0.4 + 0.02 * t as f64, 0.3);
        let center = r.mul_vec(&Vec3::new(0.0, 0.0, 4.0));
        let (_, img) = render_wireframe_cube(center, 1.5, &r, &Vec3::zero(), &k, (320, 240));
        img.save_png(&frames.join(format!("{t:03}.png"))).unwrap();
    }
    let sidecar = d.join("k.json");
    fs::write(&sidecar, r#"{"fx": 300, "fy": 300, "cx": 160, "cy": 120}"#).unwrap();
    let out = d.join("cube.json");
    ok(&[
        "extract",
        "--frames",
        s(&frames),
        "--intrinsics",
        s(&sidecar),
        "--domain",
        "generated",
        "--id",
        "cube",
        "--out",
        s(&out),
    ]);
    let f = json(&out);
    assert_eq!(f["label"], "generated");
    assert_eq!(f["T"], 4);
    assert!(f["lines"][0]["segments"].as_array().unwrap().len() >= 9);

    // both sources at once is a usage error
    let both = geovid(&[
        "extract",
        "--frames",
        s(&frames),
        "--segments",
        "x",
        "--intrinsics",
        s(&sidecar),
        "--domain",
        "real",
        "--out",
        s(&out),
    ]);
    assert_eq!(both.status.code(), Some(2));
}
