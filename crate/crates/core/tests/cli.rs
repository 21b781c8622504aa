use std::path::Path;
use std::process::{Command, Output};

fn seganet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_seganet")).args(args).output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn small_phantom(dir: &Path) -> std::path::PathBuf {
    let spec = dir.join("spec.txt");
    std::fs::write(
        &spec,
        "phases = 12\ngrid = 24 32 32\nspacing = 2.5 2.5 5\nv_max = 40\nv_min = 28\nv_prea = 36\n\
         max_phase = 4\nprea_phase = 9\npeak_width = 1.2\nnoise = 0.01\nseed = 4\n",
    )
    .unwrap();
    let out = dir.join("phantom");
    let o = seganet(&["phantom", "--spec", s(&spec), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let o = seganet(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    assert_eq!(seganet(&[]).status.code(), Some(1));
    assert_eq!(seganet(&["train", "--data", "x"]).status.code(), Some(1));
    assert_eq!(seganet(&["--help"]).status.code(), Some(0));
}

#[test]
fn missing_inputs_are_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope");
    let o = seganet(&["phantom", "--spec", s(&missing), "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.starts_with("error: ") && err.trim_end().lines().count() == 1, "{err}");
    let o = seganet(&["metrics", "--pred", s(&missing), "--gt", s(&missing), "--out", "x.csv"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn phantom_then_volumetrics_recovers_ef() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.txt");
    std::fs::write(&spec, "# defaults\nseed = 1\n").unwrap();
    let data = dir.path().join("ph");
    assert_eq!(seganet(&["phantom", "--spec", s(&spec), "--out", s(&data)]).status.code(), Some(0));
    let prefix = dir.path().join("report/ph");
    let o = seganet(&[
        "volumetrics",
        "--masks",
        s(&data),
        "--lv-flags",
        s(&data.join("lv_flags.txt")),
        "--out-prefix",
        s(&prefix),
        "--smooth",
        "3",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = std::fs::read_to_string(dir.path().join("report/ph_summary.csv")).unwrap();
    let ef: f64 = summary.lines().find_map(|l| l.strip_prefix("ef_percent,")).expect("ef row").parse().unwrap();
    assert!((ef - 300.0 / 11.0).abs() <= 2.0, "EF {ef}");
    let curve = std::fs::read_to_string(dir.path().join("report/ph_curve.csv")).unwrap();
    assert_eq!(curve.lines().count(), 31);
    assert!(dir.path().join("report/ph_curve.svg").is_file());

    let o = seganet(&["volumetrics", "--masks", s(&data), "--lv-flags", s(&spec), "--out-prefix", s(&prefix)]);
    assert_eq!(o.status.code(), Some(2));
    let o = seganet(&[
        "volumetrics",
        "--masks",
        s(&data),
        "--lv-flags",
        s(&data.join("lv_flags.txt")),
        "--out-prefix",
        s(&prefix),
        "--smooth",
        "2",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn metrics_of_identical_dirs_are_perfect() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_phantom(dir.path());
    let csv = dir.path().join("m.csv");
    let o = seganet(&["metrics", "--pred", s(&data), "--gt", s(&data), "--out", s(&csv)]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("subject,phase,dice,hd_mm,mcd_mm"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 12);
    for row in rows {
        assert!(row.ends_with(",1,0,0"), "{row}");
    }
}

#[test]
fn train_segment_metrics_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_phantom(dir.path());
    let model = dir.path().join("m/model.sgm");
    let train = [
        "train",
        "--data",
        s(&data),
        "--out",
        s(&model),
        "--iters",
        "4",
        "--batch",
        "2",
        "--lr",
        "1e-3",
        "--seed",
        "3",
        "--channels",
        "4,8,16",
    ];
    let o = seganet(&train);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let trace = std::fs::read_to_string(dir.path().join("m/model.loss.csv")).unwrap();
    assert_eq!(trace.lines().count(), 5);
    let first = std::fs::read(&model).unwrap();
    assert_eq!(seganet(&train).status.code(), Some(0));
    assert_eq!(std::fs::read(&model).unwrap(), first, "training is deterministic");

    let seg = dir.path().join("seg");
    let o = seganet(&["segment", "--model", s(&model), "--data", s(&data), "--out", s(&seg), "--threshold", "0.5"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = dir.path().join("m.csv");
    assert_eq!(seganet(&["metrics", "--pred", s(&seg), "--gt", s(&data), "--out", s(&csv)]).status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 13);

    let bad = seganet(&["segment", "--model", s(&model), "--data", s(&data), "--out", s(&seg), "--threshold", "1.5"]);
    assert_eq!(bad.status.code(), Some(2));
    std::fs::write(&model, &first[..first.len() - 3]).unwrap();
    let bad = seganet(&["segment", "--model", s(&model), "--data", s(&data), "--out", s(&seg)]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn non_finite_training_loss_is_a_numeric_failure() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_phantom(dir.path());
    let o = seganet(&[
        "train",
        "--data",
        s(&data),
        "--out",
        s(&dir.path().join("m.sgm")),
        "--iters",
        "3",
        "--batch",
        "2",
        "--lr",
        "1e300",
        "--channels",
        "4,8,16",
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn augment_writes_previews() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_phantom(dir.path());
    let out = dir.path().join("aug");
    let o = seganet(&["augment", "--data", s(&data), "--seed", "9", "--out", s(&out), "--limit", "5"]);
    assert_eq!(o.status.code(), Some(0));
    let mask = std::fs::read(out.join("0004_mask.pgm")).unwrap();
    assert!(mask.starts_with(b"P5\n32 32\n255\n"));
    assert!(mask[13..].iter().all(|&v| v == 0 || v == 255));
    assert!(!out.join("0005_image.pgm").exists());
}

#[test]
fn cohort_reports_welch_and_paired() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    std::fs::write(&a, "subject,ef\np1,30\np2,35\np3,28\np4,33\n").unwrap();
    std::fs::write(&b, "subject,ef\nv1,50\nv2,55\nv3,48\nv4,51\n").unwrap();
    let o = seganet(&["cohort", "--group-a", s(&a), "--group-b", s(&b)]);
    assert_eq!(o.status.code(), Some(0));
    let out = String::from_utf8_lossy(&o.stdout).into_owned();
    assert!(out.contains("test,welch") && out.contains("a_mean,31.5") && out.contains("b_mean,51"), "{out}");
    let o = seganet(&["cohort", "--group-a", s(&a), "--group-b", s(&b), "--paired", "--column", "ef"]);
    assert!(String::from_utf8_lossy(&o.stdout).contains("df,3"));

    std::fs::write(&b, "ef\n50\n").unwrap();
    assert_eq!(seganet(&["cohort", "--group-a", s(&a), "--group-b", s(&b)]).status.code(), Some(2));
    std::fs::write(&b, "ef\n50\nabc\n").unwrap();
    assert_eq!(seganet(&["cohort", "--group-a", s(&a), "--group-b", s(&b)]).status.code(), Some(2));
}
