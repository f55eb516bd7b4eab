//! End-to-end runs of the installed binary: exit codes, artifact layout and
//! byte-identical reruns.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_aggloseg"))
}

fn run_ok(args: &[&str]) {
    let out = bin().args(args).output().expect("spawn");
    assert!(
        out.status.success(),
        "command {:?} failed:\n{}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
}

fn run_code(args: &[&str]) -> i32 {
    let out = bin().args(args).output().expect("spawn");
    out.status.code().unwrap_or(-1)
}

fn hash_file(path: &Path) -> u64 {
    // FNV-1a over the raw bytes; collision resistance is irrelevant here.
    let bytes = std::fs::read(path).unwrap();
    let mut h = 0xcbf29ce484222325u64;
    for b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

fn synth_args(dir: &Path, seed: u64) -> Vec<String> {
    vec![
        "synth".into(),
        "--out-dir".into(),
        dir.display().to_string(),
        "--dims".into(),
        "48,48".into(),
        "--cells".into(),
        "4".into(),
        "--noise-sigma".into(),
        "0.1".into(),
        "--seed".into(),
        seed.to_string(),
    ]
}

#[test]
fn synth_is_byte_identical_across_runs() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let args_a: Vec<String> = synth_args(dir_a.path(), 7);
    let args_b: Vec<String> = synth_args(dir_b.path(), 7);
    run_ok(&args_a.iter().map(String::as_str).collect::<Vec<_>>());
    run_ok(&args_b.iter().map(String::as_str).collect::<Vec<_>>());
    for name in [
        "gt_cells.segv",
        "gt_mito.segv",
        "boundary.segv",
        "cytoplasm.segv",
        "mitochondria.segv",
        "mito-boundary.segv",
    ] {
        assert_eq!(
            hash_file(&dir_a.path().join(name)),
            hash_file(&dir_b.path().join(name)),
            "{name} differs between identical runs"
        );
    }
}

#[test]
fn missing_output_dir_is_exit_3() {
    let code = run_code(&[
        "synth",
        "--out-dir",
        "/nonexistent/definitely/missing",
        "--dims",
        "16,16",
        "--cells",
        "2",
    ]);
    assert_eq!(code, 3);
}

#[test]
fn bad_params_are_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let code = run_code(&[
        "synth",
        "--out-dir",
        &dir.path().display().to_string(),
        "--cells",
        "0",
    ]);
    assert_eq!(code, 2);
    // Unknown flags are usage errors too (clap's own exit code).
    let code = run_code(&["synth", "--no-such-flag"]);
    assert_eq!(code, 2);
}

#[test]
fn full_pipeline_and_reruns() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();

    // synth
    let args: Vec<String> = synth_args(root, 11);
    run_ok(&args.iter().map(String::as_str).collect::<Vec<_>>());

    // watershed
    let overseg = root.join("overseg.segv");
    run_ok(&[
        "watershed",
        "--boundary",
        &root.join("boundary.segv").display().to_string(),
        "--out",
        &overseg.display().to_string(),
        "--theta-seed",
        "0.03",
    ]);

    // train (single pass, context on)
    let forest = root.join("forest.json");
    run_ok(&[
        "train",
        "--labels",
        &overseg.display().to_string(),
        "--gt",
        &root.join("gt_cells.segv").display().to_string(),
        "--channels",
        &root.display().to_string(),
        "--out",
        &forest.display().to_string(),
        "--n-trees",
        "10",
        "--max-depth",
        "8",
        "--seed",
        "3",
    ]);
    assert!(root.join("train_summary.json").exists());

    // segment (context on, delayed)
    let seg_dir = root.join("seg");
    std::fs::create_dir(&seg_dir).unwrap();
    run_ok(&[
        "segment",
        "--labels",
        &overseg.display().to_string(),
        "--channels",
        &root.display().to_string(),
        "--forest",
        &forest.display().to_string(),
        "--out-dir",
        &seg_dir.display().to_string(),
        "--policy",
        "delayed",
        "--context",
        "on",
        "--delta-c",
        "0.2",
        "--delta-m",
        "0.8",
    ]);
    for name in [
        "segmentation.segv",
        "cyto_trace.csv",
        "mito_trace.csv",
        "counters.json",
        "segment_config.json",
    ] {
        assert!(seg_dir.join(name).exists(), "{name} missing");
    }

    // Re-running segmentation reproduces the output byte for byte.
    let seg_dir2 = root.join("seg2");
    std::fs::create_dir(&seg_dir2).unwrap();
    run_ok(&[
        "segment",
        "--labels",
        &overseg.display().to_string(),
        "--channels",
        &root.display().to_string(),
        "--forest",
        &forest.display().to_string(),
        "--out-dir",
        &seg_dir2.display().to_string(),
        "--policy",
        "delayed",
        "--context",
        "on",
        "--delta-c",
        "0.2",
        "--delta-m",
        "0.8",
    ]);
    assert_eq!(
        hash_file(&seg_dir.join("segmentation.segv")),
        hash_file(&seg_dir2.join("segmentation.segv"))
    );
    assert_eq!(
        hash_file(&seg_dir.join("cyto_trace.csv")),
        hash_file(&seg_dir2.join("cyto_trace.csv"))
    );

    // Training twice gives byte-identical forests.
    let forest2 = root.join("forest2.json");
    run_ok(&[
        "train",
        "--labels",
        &overseg.display().to_string(),
        "--gt",
        &root.join("gt_cells.segv").display().to_string(),
        "--channels",
        &root.display().to_string(),
        "--out",
        &forest2.display().to_string(),
        "--n-trees",
        "10",
        "--max-depth",
        "8",
        "--seed",
        "3",
    ]);
    assert_eq!(hash_file(&forest), hash_file(&forest2));

    // eval: segmentation against ground truth, and gt against itself.
    let metrics = root.join("metrics.csv");
    run_ok(&[
        "eval",
        "--seg",
        &seg_dir.join("segmentation.segv").display().to_string(),
        "--gt",
        &root.join("gt_cells.segv").display().to_string(),
        "--out",
        &metrics.display().to_string(),
    ]);
    let text = std::fs::read_to_string(&metrics).unwrap();
    assert!(text.starts_with("delta,vi_ue,vi_oe,re_ue,re_oe\n"));

    let self_metrics = root.join("self_metrics.csv");
    run_ok(&[
        "eval",
        "--seg",
        &root.join("gt_cells.segv").display().to_string(),
        "--gt",
        &root.join("gt_cells.segv").display().to_string(),
        "--out",
        &self_metrics.display().to_string(),
    ]);
    let line = std::fs::read_to_string(&self_metrics)
        .unwrap()
        .lines()
        .nth(1)
        .unwrap()
        .to_string();
    assert_eq!(line, "0,0,0,0,0");

    // overlay
    let ov_dir = root.join("overlay");
    std::fs::create_dir(&ov_dir).unwrap();
    run_ok(&[
        "overlay",
        "--seg",
        &seg_dir.join("segmentation.segv").display().to_string(),
        "--out-dir",
        &ov_dir.display().to_string(),
        "--seed",
        "5",
    ]);
    assert!(ov_dir.join("plane_0000.ppm").exists());
}

#[test]
fn one_shot_pipeline_command() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&[
        "pipeline",
        "--out-dir",
        &dir.path().display().to_string(),
        "--dims",
        "48,48",
        "--cells",
        "4",
        "--noise-sigma",
        "0.1",
        "--theta-seed",
        "0.03",
        "--n-trees",
        "10",
        "--max-depth",
        "8",
        "--seed",
        "2",
    ]);
    for name in [
        "gt_cells.segv",
        "overseg.segv",
        "forest.json",
        "segmentation.segv",
        "metrics.csv",
        "pipeline_config.json",
    ] {
        assert!(dir.path().join(name).exists(), "{name} missing");
    }
}

#[test]
fn corrupt_volume_is_exit_3_and_bad_forest_is_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.segv");
    std::fs::write(&bad, b"XXXX not a volume").unwrap();
    let code = run_code(&[
        "eval",
        "--seg",
        &bad.display().to_string(),
        "--gt",
        &bad.display().to_string(),
    ]);
    assert_eq!(code, 3);

    // A forest trained on a different feature width must be rejected with
    // the model/data code when applied.
    let root = dir.path();
    let args: Vec<String> = synth_args(root, 1);
    run_ok(&args.iter().map(String::as_str).collect::<Vec<_>>());
    run_ok(&[
        "watershed",
        "--boundary",
        &root.join("boundary.segv").display().to_string(),
        "--out",
        &root.join("overseg.segv").display().to_string(),
        "--theta-seed",
        "0.03",
    ]);
    // Forest JSON with the wrong feature count.
    let fake = r#"{"format_version":1,"n_features":3,"max_depth":1,"seed":0,
        "trees":[{"nodes":[{"kind":"leaf","p1":0.5}]}]}"#;
    let forest_path = root.join("fake_forest.json");
    std::fs::write(&forest_path, fake).unwrap();
    let seg_dir = root.join("seg");
    std::fs::create_dir(&seg_dir).unwrap();
    let code = run_code(&[
        "segment",
        "--labels",
        &root.join("overseg.segv").display().to_string(),
        "--channels",
        &root.display().to_string(),
        "--forest",
        &forest_path.display().to_string(),
        "--out-dir",
        &seg_dir.display().to_string(),
    ]);
    assert_eq!(code, 4);
}
