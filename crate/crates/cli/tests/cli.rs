use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use kpt_diagnose::correction::{progressive_pr, CorrectionPlan};
use kpt_diagnose::data_model::{load_detections, load_ground_truth, EvalConfig, KeypointSchema};
use kpt_diagnose::matching::evaluate;
use kpt_diagnose::scoring::rescore_report;
use kpt_report::pipeline::{analyze, Options, Summary, SCHEMA_VERSION};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_kpt-diagnose"));
    c.env_remove("KPT_DIAGNOSE_PARALLEL");
    c
}

fn ledger_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/data/hand_ledger")
}

fn ledger_args(cmd: &str) -> Vec<String> {
    let d = ledger_dir();
    vec![
        cmd.to_string(),
        "--gt".into(),
        d.join("gt.json").display().to_string(),
        "--dt".into(),
        d.join("dt.json").display().to_string(),
        "--schema".into(),
        d.join("schema.json").display().to_string(),
    ]
}

fn run(args: &[String]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn fixtures(dir: &Path, images: usize, seed: u64) {
    let o = bin()
        .args([
            "fixtures",
            "--images",
            &images.to_string(),
            "--seed",
            &seed.to_string(),
            "--out",
        ])
        .arg(dir)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn evaluate_prints_ledger_values() {
    let o = run(&ledger_args("evaluate"));
    assert!(o.status.success());
    let text = stdout(&o);
    // values derived by hand for the ledger fixture
    for (t, ap) in [(0.5, 92.5 / 101.0), (0.75, 67.0 / 101.0), (0.95, 0.0)] {
        let line = format!("{t:>9.2} {ap:>9.6}");
        assert!(text.contains(&line), "missing `{line}` in\n{text}");
    }
    assert!(text.contains(&format!("cocoAP {:.6}", 613.5 / 1010.0)));

    // and every printed row comes from the library
    let d = ledger_dir();
    let schema = KeypointSchema::load(d.join("schema.json")).unwrap();
    let gt = load_ground_truth(d.join("gt.json"), &schema).unwrap();
    let dt = load_detections(d.join("dt.json"), &schema).unwrap();
    let e = evaluate(&dt, &gt.instances, &schema, &EvalConfig::default()).unwrap();
    for r in &e.results {
        let line = format!(
            "{:>9.2} {:>9.6} {:>9.6} {:>7} {:>7} {:>7}",
            r.threshold, r.ap, r.recall, r.tp, r.fp, r.fn_count
        );
        assert!(text.contains(&line), "missing `{line}`");
    }
}

#[test]
fn missing_gt_is_usage_error() {
    let o = run(&["evaluate".into(), "--dt".into(), "d.json".into()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("--gt") && err.contains("Usage"), "{err}");
}

#[test]
fn bad_flags_and_values_exit_2() {
    assert_eq!(
        run(&["evaluate".into(), "--bogus".into()]).status.code(),
        Some(2)
    );
    let mut args = ledger_args("evaluate");
    args.extend(["--oks-thresholds".into(), "0.5,1.5".into()]);
    assert_eq!(run(&args).status.code(), Some(2));
    let mut args = ledger_args("report");
    args.extend([
        "--plan".into(),
        "miss,teleport".into(),
        "--out".into(),
        "/tmp/x".into(),
    ]);
    assert_eq!(run(&args).status.code(), Some(2));
    let mut args = ledger_args("evaluate");
    args.extend(["--parallel".into(), "0".into()]);
    assert_eq!(run(&args).status.code(), Some(2));
}

#[test]
fn unreadable_input_exits_1() {
    let mut args = ledger_args("evaluate");
    args[2] = "/definitely/not/here.json".into();
    assert_eq!(run(&args).status.code(), Some(1));
}

#[test]
fn unwritable_output_exits_1() {
    let tmp = tempfile::tempdir().unwrap();
    let blocker = tmp.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let mut args = ledger_args("report");
    args.extend(["--out".into(), blocker.join("r").display().to_string()]);
    assert_eq!(run(&args).status.code(), Some(1));
}

#[test]
fn empty_ground_truth_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let gt = tmp.path().join("gt.json");
    let dt = tmp.path().join("dt.json");
    std::fs::write(
        &gt,
        r#"{"images": [{"id": 1, "width": 10, "height": 10}], "annotations": []}"#,
    )
    .unwrap();
    std::fs::write(&dt, "[]").unwrap();
    let o = bin()
        .arg("evaluate")
        .arg("--gt")
        .arg(&gt)
        .arg("--dt")
        .arg(&dt)
        .output()
        .unwrap();
    assert_eq!(
        o.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
}

#[test]
fn report_contract_and_library_agreement() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    fixtures(&data, 40, 7);
    let out = tmp.path().join("r");
    let o = bin()
        .arg("report")
        .arg("--gt")
        .arg(data.join("gt.json"))
        .arg("--dt")
        .arg(data.join("dt.json"))
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let text = std::fs::read_to_string(out.join("summary.json")).unwrap();
    let value: serde_json::Value = serde_json::from_str(&text).unwrap();
    for key in [
        "ap",
        "coco_ap",
        "error_breakdown",
        "progressive",
        "rescore",
        "background",
        "benchmarks",
    ] {
        assert!(value.get(key).is_some(), "summary lacks {key}");
    }
    assert_eq!(value["schema_version"], SCHEMA_VERSION);
    let summary: Summary = serde_json::from_str(&text).unwrap();

    let schema = KeypointSchema::coco_person();
    let gt = load_ground_truth(data.join("gt.json"), &schema).unwrap();
    let dt = load_detections(data.join("dt.json"), &schema).unwrap();
    let config = EvalConfig::default();

    let analysis = analyze(&gt, &dt, &schema, &Options::new(config.clone(), &schema)).unwrap();
    assert_eq!(summary, analysis.summary());

    // spot checks straight against the core library
    let e = evaluate(&dt, &gt.instances, &schema, &config).unwrap();
    assert_eq!(summary.coco_ap, e.coco_ap);
    assert_eq!(summary.ap.len(), e.results.len());
    for (row, r) in summary.ap.iter().zip(&e.results) {
        assert_eq!(
            (row.ap, row.tp, row.fp, row.fn_count),
            (r.ap, r.tp, r.fp, r.fn_count)
        );
    }
    let p = progressive_pr(
        &dt,
        &gt.instances,
        &CorrectionPlan::with_default_order(0.75),
        &schema,
        &config,
    )
    .unwrap();
    let aps: Vec<f64> = p.stages.iter().map(|s| s.result.ap).collect();
    let got: Vec<f64> = summary.progressive.stages.iter().map(|s| s.ap).collect();
    assert_eq!(aps, got);
    assert_eq!(
        summary.rescore.report,
        rescore_report(&dt, &gt.instances, &schema, &config).unwrap()
    );

    for f in [
        "digest.txt",
        "benchmark_manifest.json",
        "tables/ap.csv",
        "tables/progressive.csv",
    ] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    for f in [
        "progressive_pr.svg",
        "error_pie.svg",
        "errors_by_part.svg",
        "score_histograms.svg",
        "fp_area.svg",
        "fn_heatmap.svg",
        "benchmarks.svg",
    ] {
        let svg = std::fs::read_to_string(out.join("plots").join(f)).unwrap();
        assert!(
            svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"),
            "{f}"
        );
    }
    let pr = std::fs::read_to_string(out.join("plots/progressive_pr.svg")).unwrap();
    assert_eq!(
        pr.matches(r#"class="curve""#).count(),
        summary.progressive.stages.len()
    );
}

#[test]
fn format_selects_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let mut args = ledger_args("report");
    args.extend([
        "--format".into(),
        "csv".into(),
        "--out".into(),
        tmp.path().display().to_string(),
    ]);
    assert!(run(&args).status.success());
    assert!(!tmp.path().join("summary.json").exists());
    assert!(tmp.path().join("tables/ap.csv").exists());

    let tmp = tempfile::tempdir().unwrap();
    let mut args = ledger_args("evaluate");
    args.extend([
        "--format".into(),
        "json".into(),
        "--out".into(),
        tmp.path().display().to_string(),
    ]);
    assert!(run(&args).status.success());
    assert!(tmp.path().join("evaluation.json").exists());
    assert!(!tmp.path().join("tables").exists());
}

#[test]
fn subcommands_write_their_sections() {
    let tmp = tempfile::tempdir().unwrap();
    for (cmd, file) in [
        ("errors", "errors.json"),
        ("correct", "corrected_detections.json"),
        ("rescore", "rescored_detections.json"),
        ("background", "background.json"),
        ("benchmarks", "benchmark_manifest.json"),
    ] {
        let dir = tmp.path().join(cmd);
        let mut args = ledger_args(cmd);
        args.extend(["--out".into(), dir.display().to_string()]);
        let o = run(&args);
        assert!(
            o.status.success(),
            "{cmd}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        assert!(dir.join(file).is_file(), "{cmd} wrote no {file}");
    }
    // corrected detections parse back and are complete
    let schema = KeypointSchema::load(ledger_dir().join("schema.json")).unwrap();
    let corrected = load_detections(
        tmp.path().join("correct/corrected_detections.json"),
        &schema,
    )
    .unwrap();
    assert_eq!(corrected.len(), 4);
}

#[test]
fn fixtures_are_seed_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    fixtures(&tmp.path().join("a"), 10, 3);
    fixtures(&tmp.path().join("b"), 10, 3);
    fixtures(&tmp.path().join("c"), 10, 4);
    for f in ["gt.json", "dt.json", "truth.json"] {
        let a = std::fs::read(tmp.path().join("a").join(f)).unwrap();
        let b = std::fs::read(tmp.path().join("b").join(f)).unwrap();
        let c = std::fs::read(tmp.path().join("c").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
        assert_ne!(a, c, "{f}");
    }
}

#[test]
fn parallel_env_is_fallback() {
    let mut args = ledger_args("evaluate");
    let with_env = bin()
        .args(&args)
        .env("KPT_DIAGNOSE_PARALLEL", "0")
        .output()
        .unwrap();
    assert_eq!(with_env.status.code(), Some(2));
    args.extend(["--parallel".into(), "2".into()]);
    let flag_wins = bin()
        .args(&args)
        .env("KPT_DIAGNOSE_PARALLEL", "0")
        .output()
        .unwrap();
    assert!(flag_wins.status.success());
}
