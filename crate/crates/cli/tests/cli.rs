use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

use parkattn::data::{load_manifest, read_sfm1};
use parkattn::features::{write_wav, InformedFeatureSchema};
use parkattn::model::{read_checkpoint, write_checkpoint};
use parkattn::tensor::Matrix;
use parkattn::training::RunResult;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_parkattn"));
    c.env("RUST_LOG", "warn");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn small_synth(dir: &Path, speakers: usize, extra: &[&str]) {
    let d = dir.to_str().unwrap();
    let speakers = speakers.to_string();
    let mut args = vec![
        "synth",
        "--out-dir",
        d,
        "--speakers",
        &speakers,
        "--utterances-per-speaker",
        "2",
        "--frames",
        "12",
        "--dim",
        "8",
    ];
    args.extend_from_slice(extra);
    ok(&args);
}

fn read_tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().display().to_string();
                out.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn synth_default_is_loadable_and_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    ok(&["synth", "--out-dir", a.path().to_str().unwrap()]);
    ok(&["synth", "--out-dir", b.path().to_str().unwrap()]);
    let records = load_manifest(a.path().join("manifest.jsonl")).unwrap();
    assert_eq!(records.len(), 400);
    let schema = InformedFeatureSchema::load(a.path().join("schema.json")).unwrap();
    let inf = read_sfm1(&records[0].inf_path).unwrap();
    assert_eq!(inf.matrix.shape(), (1, schema.len()));
    assert_eq!(read_sfm1(&records[0].ssl_path).unwrap().matrix.shape(), (50, 64));
    assert_eq!(read_tree(a.path()), read_tree(b.path()));
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    assert_eq!(run(&["synth", "--out-dir", d, "--speakers", "7"]).status.code(), Some(2));
    assert_eq!(run(&["synth", "--out-dir", d, "--planted-feature", "27"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    small_synth(dir.path(), 12, &[]);
    let m = dir.path().join("manifest.jsonl");
    let out = dir.path().join("run");
    let (m, out) = (m.to_str().unwrap(), out.to_str().unwrap());
    let r = run(&["train", "--manifest", m, "--task", "SPEECH", "--out-dir", out]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("unknown task"));
    let r = run(&["train", "--manifest", m, "--task", "VOWELS", "--out-dir", out, "--set", "epochs=zero"]);
    assert_eq!(r.status.code(), Some(2));
    let r = run(&["crosslingual", "--manifest", m, "--task", "VOWELS", "--out-dir", out, "--hold-out", "nope"]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("synth0"));
}

#[test]
fn runtime_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("none.jsonl");
    let out = dir.path().join("run");
    let r = run(&[
        "train",
        "--manifest",
        missing.to_str().unwrap(),
        "--task",
        "VOWELS",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(r.status.code(), Some(1));
    let r = run(&[
        "interpret",
        "--run-dir",
        dir.path().to_str().unwrap(),
        "--mode",
        "embedding",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(r.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&r.stderr).contains("missing run manifest"));
}

#[test]
fn smoke_train_is_fast_and_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    ok(&["synth", "--out-dir", corpus.to_str().unwrap()]);
    let m = corpus.join("manifest.jsonl");
    let train = |out: &Path| {
        ok(&[
            "train",
            "--manifest",
            m.to_str().unwrap(),
            "--task",
            "VOWELS",
            "--seeds",
            "0",
            "--outer-folds",
            "2",
            "--out-dir",
            out.to_str().unwrap(),
        ])
    };
    let t = Instant::now();
    train(&dir.path().join("a"));
    let elapsed = t.elapsed();
    assert!(elapsed.as_secs_f64() < 60.0, "smoke run took {elapsed:?}");
    train(&dir.path().join("b"));
    let result = |p: &str| std::fs::read(dir.path().join(p)).unwrap();
    assert_eq!(result("a/result.json"), result("b/result.json"));
    assert_eq!(result("a/predictions.csv"), result("b/predictions.csv"));
    assert_eq!(result("a/runs/fold-0_seed-0/model.pkck"), result("b/runs/fold-0_seed-0/model.pkck"));
    let r: RunResult = serde_json::from_slice(&result("a/result.json")).unwrap();
    assert_eq!(r.runs.len(), 2);
    let manifest: serde_json::Value = serde_json::from_slice(&result("a/run_manifest.json")).unwrap();
    assert_eq!(manifest["config"]["outer_folds"], 2);
    assert_eq!(manifest["seeds"], serde_json::json!([0]));
    assert_eq!(manifest["manifest_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn self_inf_reports_25_runs() {
    let dir = tempfile::tempdir().unwrap();
    small_synth(dir.path(), 20, &[]);
    let out = dir.path().join("run");
    ok(&[
        "train",
        "--manifest",
        dir.path().join("manifest.jsonl").to_str().unwrap(),
        "--task",
        "VOWELS",
        "--model",
        "self_inf",
        "--epochs",
        "1",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    let r: RunResult = serde_json::from_slice(&std::fs::read(out.join("result.json")).unwrap()).unwrap();
    assert_eq!(r.runs.len(), 25);
    assert!(r.runs.iter().all(|x| x.test_f1.is_some()));
}

#[test]
fn crosslingual_hold_outs_partition_records() {
    let dir = tempfile::tempdir().unwrap();
    small_synth(dir.path(), 12, &["--datasets", "3"]);
    let m = dir.path().join("manifest.jsonl");
    let mut seen = Vec::new();
    for ds in ["synth0", "synth1", "synth2"] {
        let out = dir.path().join(ds);
        ok(&[
            "crosslingual",
            "--manifest",
            m.to_str().unwrap(),
            "--task",
            "VOWELS",
            "--hold-out",
            ds,
            "--seeds",
            "0",
            "--epochs",
            "1",
            "--out-dir",
            out.to_str().unwrap(),
        ]);
        let r: RunResult = serde_json::from_slice(&std::fs::read(out.join("result.json")).unwrap()).unwrap();
        assert!(r.predictions.iter().all(|p| p.dataset_id == ds));
        seen.extend(r.predictions.into_iter().map(|p| p.utterance_id));
    }
    seen.sort();
    let mut all: Vec<String> = load_manifest(&m).unwrap().into_iter().map(|r| r.utterance_id).collect();
    all.sort();
    assert_eq!(seen, all);
}

#[test]
fn interpret_reports_are_complete_and_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    small_synth(dir.path(), 20, &[]);
    let run_dir = dir.path().join("run");
    ok(&[
        "train",
        "--manifest",
        dir.path().join("manifest.jsonl").to_str().unwrap(),
        "--task",
        "VOWELS",
        "--seeds",
        "0,1",
        "--outer-folds",
        "2",
        "--set",
        "validate=false",
        "--out-dir",
        run_dir.to_str().unwrap(),
    ]);
    let interpret = |mode: &str, out: &str, extra: &[&str]| {
        let out = dir.path().join(out);
        let mut args = vec![
            "interpret",
            "--run-dir",
            run_dir.to_str().unwrap(),
            "--mode",
            mode,
            "--out",
            out.to_str().unwrap(),
        ];
        args.extend_from_slice(extra);
        (run(&args), out)
    };
    let (r, emb) = interpret("embedding", "emb", &["--all"]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let groups = std::fs::read_to_string(emb.join("embedding_groups.csv")).unwrap();
    assert_eq!(groups.lines().count(), 1 + 2 * 27);
    let diff = std::fs::read_to_string(emb.join("embedding_difference.csv")).unwrap();
    assert_eq!(diff.lines().count(), 1 + 8);
    assert_eq!(diff.lines().nth(1).unwrap().split(',').count(), 1 + 27);
    let (r2, emb2) = interpret("embedding", "emb2", &["--all"]);
    assert!(r2.status.success());
    assert_eq!(read_tree(&emb), read_tree(&emb2));

    let (r, temp) = interpret("temporal", "temp", &["--all", "--alignments"]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let overlay = std::fs::read_to_string(temp.join("temporal_overlay.csv")).unwrap();
    assert!(overlay.lines().count() > 1);
    assert!(temp.join("temporal_profile.csv").is_file());
    let (r, _) = interpret("temporal", "temp3", &["--seed", "7"]);
    assert_eq!(r.status.code(), Some(2));

    std::fs::remove_file(run_dir.join("runs/fold-0_seed-0/model.pkck")).unwrap();
    let (r, _) = interpret("embedding", "emb3", &["--all", "--seed", "0"]);
    assert_eq!(r.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&r.stderr).contains("model.pkck"));
}

#[test]
fn temporal_without_correct_hc_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    small_synth(dir.path(), 16, &[]);
    let run_dir = dir.path().join("run");
    ok(&[
        "train",
        "--manifest",
        dir.path().join("manifest.jsonl").to_str().unwrap(),
        "--task",
        "VOWELS",
        "--seeds",
        "0",
        "--outer-folds",
        "2",
        "--epochs",
        "1",
        "--set",
        "validate=false",
        "--out-dir",
        run_dir.to_str().unwrap(),
    ]);
    // Push every checkpoint to predict PD and store matching predictions.
    for fold in ["0", "1"] {
        let path = run_dir.join(format!("runs/fold-{fold}_seed-0/model.pkck"));
        let (header, mut params) = read_checkpoint(&path).unwrap();
        params.head.b_cls = Matrix::from_rows(&[[-1e3, 1e3]]);
        write_checkpoint(&path, &params, &header.schema_hash).unwrap();
    }
    let result_path = run_dir.join("result.json");
    let mut result: RunResult = serde_json::from_slice(&std::fs::read(&result_path).unwrap()).unwrap();
    for p in &mut result.predictions {
        p.predicted = 1;
    }
    std::fs::write(&result_path, result.to_json()).unwrap();

    let out = dir.path().join("t");
    let args = |mode: &'static str| {
        vec![
            "interpret".to_string(),
            "--run-dir".into(),
            run_dir.display().to_string(),
            "--mode".into(),
            mode.into(),
            "--out".into(),
            out.display().to_string(),
        ]
    };
    let r = bin().args(args("temporal")).output().unwrap();
    assert_eq!(r.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&r.stderr).contains("reference is undefined"));
    let mut all = args("temporal");
    all.push("--all".into());
    assert!(bin().args(all).output().unwrap().status.success());
}

#[test]
fn extract_writes_one_vector_per_utterance() {
    let dir = tempfile::tempdir().unwrap();
    let audio = dir.path().join("audio");
    let rate = 16_000u32;
    for (id, f0) in [("u1", 150.0), ("u2", 210.0)] {
        let x: Vec<f64> = (0..rate)
            .map(|i| {
                let t = i as f64 / rate as f64;
                0.3 * ((2.0 * std::f64::consts::PI * f0 * t).sin() + 0.5 * (4.0 * std::f64::consts::PI * f0 * t).sin())
            })
            .collect();
        write_wav(audio.join(format!("{id}.wav")), &x, rate).unwrap();
    }
    let manifest = dir.path().join("manifest.jsonl");
    let line = |id: &str, label: &str| {
        format!(
            r#"{{"utterance_id":"{id}","speaker_id":"s{id}","dataset_id":"d","task":"VOWELS","label":"{label}","ssl_path":"ssl/{id}.sfm1","inf_path":"inf/{id}.sfm1"}}"#
        )
    };
    std::fs::write(&manifest, format!("{}\n{}\n", line("u1", "HC"), line("u2", "PD"))).unwrap();
    let external = dir.path().join("external.json");
    let ext = |v: f64| {
        serde_json::json!({"std_GCI": v, "avg_OQ": v, "std_OQ": v, "avg_NAQ": v, "std_NAQ": v, "avg_HRF": v, "std_HRF": v})
    };
    std::fs::write(&external, serde_json::json!({"u1": ext(0.1), "u2": ext(0.2)}).to_string()).unwrap();
    let extract = |out: &Path, ext_path: &Path| {
        run(&[
            "extract",
            "--audio-dir",
            audio.to_str().unwrap(),
            "--manifest",
            manifest.to_str().unwrap(),
            "--external-features",
            ext_path.to_str().unwrap(),
            "--out-dir",
            out.to_str().unwrap(),
        ])
    };
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(extract(&a, &external).status.success());
    assert!(extract(&b, &external).status.success());
    let v = read_sfm1(a.join("inf/u1.sfm1")).unwrap();
    assert_eq!(v.matrix.shape(), (1, 27));
    let schema = InformedFeatureSchema::default_schema();
    let f0 = v.matrix.get(0, schema.index_of("avg_F0").unwrap());
    assert!((f0 - 150.0).abs() < 2.0, "avg_F0 = {f0}");
    assert_eq!(std::fs::read(a.join("inf/u2.sfm1")).unwrap(), std::fs::read(b.join("inf/u2.sfm1")).unwrap());

    let partial = dir.path().join("partial.json");
    std::fs::write(&partial, serde_json::json!({"u1": ext(0.1)}).to_string()).unwrap();
    let c = dir.path().join("c");
    let r = extract(&c, &partial);
    assert_eq!(r.status.code(), Some(1));
    let failures = std::fs::read_to_string(c.join("failures.json")).unwrap();
    assert!(failures.contains("u2") && failures.contains("std_GCI"), "{failures}");

    let empty = dir.path().join("empty.jsonl");
    std::fs::write(&empty, "").unwrap();
    let e = dir.path().join("e");
    let r = run(&[
        "extract",
        "--audio-dir",
        audio.to_str().unwrap(),
        "--manifest",
        empty.to_str().unwrap(),
        "--out-dir",
        e.to_str().unwrap(),
    ]);
    assert!(r.status.success());
    assert!(std::fs::read_dir(&e).unwrap().next().is_none());
}
