//! Writes a full report directory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{ReportError, Result};
use crate::pipeline::{Analysis, Summary};
use crate::{plots, tables};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
    #[default]
    Both,
}

impl Format {
    pub fn json(self) -> bool {
        self != Format::Csv
    }

    pub fn csv(self) -> bool {
        self != Format::Json
    }
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| ReportError::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| ReportError::io(path, e))
}

pub(crate) fn summary_json(summary: &Summary) -> Result<String> {
    summary.to_json().map_err(ReportError::Usage)
}

/// Every SVG figure of the report as `(file name, contents)`.
pub fn figures(analysis: &Analysis) -> Vec<(String, String)> {
    let mut out = vec![
        (
            "progressive_pr.svg".to_string(),
            plots::progressive_pr(&analysis.progressive),
        ),
        (
            "error_pie.svg".to_string(),
            plots::error_pie(
                &analysis.breakdown.overall,
                "Keypoint localization outcomes",
            ),
        ),
        (
            "errors_by_part.svg".to_string(),
            plots::per_part_bars(&analysis.breakdown),
        ),
        (
            "separate_impact.svg".to_string(),
            plots::separate_impact(&analysis.separate),
        ),
        (
            "score_histograms.svg".to_string(),
            plots::score_histograms(&analysis.histograms),
        ),
        (
            "fp_area.svg".to_string(),
            plots::fp_area_histogram(&analysis.fp_areas),
        ),
        (
            "fn_heatmap.svg".to_string(),
            plots::fn_heatmap(&analysis.heatmap),
        ),
        (
            "benchmarks.svg".to_string(),
            plots::benchmark_grid(&analysis.benchmarks),
        ),
    ];
    for (cell, result) in &analysis.cell_progressive {
        out.push((
            format!("progressive_pr_{cell}.svg"),
            plots::progressive_pr(result),
        ));
    }
    out
}

/// Writes summary.json, the partition manifest, tables/*.csv, plots/*.svg
/// and digest.txt under `dir`. Returns the written paths.
pub fn write_report(dir: &Path, analysis: &Analysis, format: Format) -> Result<Vec<PathBuf>> {
    let summary = analysis.summary();
    let mut written = Vec::new();
    let mut put = |rel: String, contents: &str| -> Result<()> {
        let path = dir.join(rel);
        write_file(&path, contents)?;
        written.push(path);
        Ok(())
    };
    if format.json() {
        put("summary.json".into(), &summary_json(&summary)?)?;
        let manifest = serde_json::to_string_pretty(&analysis.benchmarks.partition.manifest())
            .expect("manifest serializes");
        put("benchmark_manifest.json".into(), &(manifest + "\n"))?;
    }
    if format.csv() {
        for t in tables::tables(&summary) {
            put(format!("tables/{}.csv", t.name), &t.to_csv()?)?;
        }
    }
    for (name, svg) in figures(analysis) {
        put(format!("plots/{name}"), &svg)?;
    }
    put("digest.txt".into(), &digest(&summary))?;
    Ok(written)
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |v| format!("{v:.3}"))
}

/// Plain-text overview of the headline numbers.
pub fn digest(s: &Summary) -> String {
    let mut out = String::new();
    let d = &s.dataset;
    let _ = writeln!(
        out,
        "images {}  ground truths {} ({} evaluable)  detections {}  keypoints {}",
        d.images, d.ground_truths, d.evaluable_ground_truths, d.detections, d.keypoints
    );
    let _ = writeln!(out, "\ncocoAP {:.4}  cocoAR {:.4}", s.coco_ap, s.coco_ar);
    let _ = writeln!(out, "\n{}", ap_table(&s.ap));

    let o = &s.error_breakdown.overall;
    let _ = writeln!(
        out,
        "localization errors ({} classified keypoints)",
        o.counts.classified()
    );
    for (name, f) in &o.frequency {
        let _ = writeln!(out, "  {name:<10} {}", opt(*f));
    }
    let _ = writeln!(
        out,
        "  unclassifiable keypoints {}",
        o.counts.unclassifiable
    );

    let _ = writeln!(
        out,
        "\nprogressive correction at OKS {:.2}",
        s.progressive.threshold
    );
    for st in &s.progressive.stages {
        let _ = writeln!(
            out,
            "  {:<12} AP {:.4}  gain {:+.4}",
            st.label, st.ap, st.ap_gain
        );
    }

    let r = &s.rescore.report;
    let _ = writeln!(
        out,
        "\nscoring: {} errors, {} of {} images already optimally ordered, match change {:+}, {} matches with higher OKS",
        r.scoring_errors,
        r.images_with_optimal_order,
        r.images_with_detections,
        r.match_increase,
        r.matches_with_oks_improvement
    );

    let _ = writeln!(out, "\nbackground");
    for b in &s.background.impact {
        let _ = writeln!(
            out,
            "  OKS {:.2}  AP {:.4}  without FN {:.4}  without FP {:.4}",
            b.threshold, b.ap, b.ap_without_fn, b.ap_without_fp
        );
    }

    let _ = writeln!(out, "\nbenchmarks");
    for c in &s.benchmarks.cells {
        let _ = writeln!(
            out,
            "  {:<16} {:>6} gts  cocoAP {}",
            c.id,
            c.gt_count,
            opt(c.coco_ap)
        );
    }
    for (family, si) in [
        ("occlusion", s.benchmarks.occlusion),
        ("size", s.benchmarks.size),
    ] {
        let _ = writeln!(
            out,
            "  {family} sensitivity {}  impact {}",
            opt(si.map(|v| v.sensitivity)),
            opt(si.map(|v| v.impact))
        );
    }
    out
}

/// Fixed-width AP table, also printed by `evaluate`.
pub fn ap_table(rows: &[crate::pipeline::ApRow]) -> String {
    let mut out = String::from("threshold        AP    recall      TP      FP      FN\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{:>9.2} {:>9.6} {:>9.6} {:>7} {:>7} {:>7}",
            r.threshold, r.ap, r.recall, r.tp, r.fp, r.fn_count
        );
    }
    out
}
