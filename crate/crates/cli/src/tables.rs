//! CSV renderings of the summary tables.

use kpt_diagnose::taxonomy::ErrorKind;

use crate::error::{ReportError, Result};
use crate::pipeline::{
    ApRow, BackgroundSummary, BenchmarkSummary, ErrorSummary, KindRow, ProgressiveSummary,
    RescoreSummary, Summary,
};

/// One named CSV document.
pub struct Table {
    pub name: &'static str,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(name: &'static str, header: &[&str]) -> Self {
        Self {
            name,
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| ReportError::io(format!("<{}.csv>", self.name), e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv writer emits utf-8"))
    }
}

fn num(v: f64) -> String {
    v.to_string()
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

const KINDS: [ErrorKind; 6] = [
    ErrorKind::Good,
    ErrorKind::Jitter,
    ErrorKind::Inversion,
    ErrorKind::Swap,
    ErrorKind::Miss,
    ErrorKind::Unclassifiable,
];

fn kind_table(name: &'static str, rows: &[KindRow]) -> Table {
    let mut header = vec!["name".to_string()];
    header.extend(KINDS.iter().map(|k| k.name().to_string()));
    header.extend(KINDS[..5].iter().map(|k| format!("{}_frequency", k.name())));
    let mut t = Table {
        name,
        header,
        rows: Vec::new(),
    };
    for r in rows {
        let mut row = vec![r.name.clone()];
        row.extend(KINDS.iter().map(|&k| r.counts.get(k).to_string()));
        row.extend(KINDS[..5].iter().map(|&k| opt(r.counts.frequency(k))));
        t.push(row);
    }
    t
}

/// Every table of the report, in a fixed order.
pub fn tables(s: &Summary) -> Vec<Table> {
    let mut out = vec![ap(&s.ap, s.coco_ap, s.coco_ar)];
    out.extend(errors(&s.error_breakdown));
    out.extend(progressive(&s.progressive));
    out.extend(rescore(&s.rescore));
    out.extend(background(&s.background));
    out.extend(benchmarks(&s.benchmarks));
    out
}

pub fn ap(rows: &[ApRow], coco_ap: f64, coco_ar: f64) -> Table {
    let mut ap = Table::new("ap", &["threshold", "ap", "recall", "tp", "fp", "fn"]);
    for r in rows {
        ap.push(vec![
            num(r.threshold),
            num(r.ap),
            num(r.recall),
            r.tp.to_string(),
            r.fp.to_string(),
            r.fn_count.to_string(),
        ]);
    }
    ap.push(vec![
        "coco".into(),
        num(coco_ap),
        num(coco_ar),
        String::new(),
        String::new(),
        String::new(),
    ]);
    ap
}

pub fn errors(e: &ErrorSummary) -> Vec<Table> {
    let mut out = vec![
        kind_table("errors_overall", std::slice::from_ref(&e.overall)),
        kind_table("errors_by_keypoint", &e.by_keypoint),
        kind_table("errors_by_group", &e.by_group),
    ];

    let mut sep = Table::new(
        "separate_impact",
        &[
            "kind",
            "threshold",
            "ap_delta",
            "corrected_keypoints",
            "oks_delta_q1",
            "oks_delta_median",
            "oks_delta_q3",
        ],
    );
    for k in &e.separate_impact {
        for &(t, d) in &k.ap_delta {
            sep.push(vec![
                k.kind.name().into(),
                num(t),
                num(d),
                k.corrected_keypoints.to_string(),
                opt(k.oks_delta.map(|q| q.q1)),
                opt(k.oks_delta.map(|q| q.median)),
                opt(k.oks_delta.map(|q| q.q3)),
            ]);
        }
    }
    out.push(sep);
    out
}

pub fn progressive(s: &ProgressiveSummary) -> Vec<Table> {
    let mut prog = Table::new(
        "progressive",
        &[
            "stage",
            "label",
            "threshold",
            "ap",
            "ap_gain",
            "tp",
            "fp",
            "fn",
        ],
    );
    let mut curves = Table::new("progressive_pr", &["stage", "label", "recall", "precision"]);
    for (i, st) in s.stages.iter().enumerate() {
        prog.push(vec![
            i.to_string(),
            st.label.clone(),
            num(s.threshold),
            num(st.ap),
            num(st.ap_gain),
            st.tp.to_string(),
            st.fp.to_string(),
            st.fn_count.to_string(),
        ]);
        for [r, p] in &st.pr {
            curves.push(vec![i.to_string(), st.label.clone(), num(*r), num(*p)]);
        }
    }
    let mut out = vec![prog, curves];

    let mut cell_prog = Table::new("progressive_by_benchmark", &["cell", "stage", "ap"]);
    for c in &s.benchmarks {
        for (label, ap) in &c.stages {
            cell_prog.push(vec![c.cell.clone(), label.clone(), num(*ap)]);
        }
    }
    out.push(cell_prog);
    out
}

pub fn rescore(s: &RescoreSummary) -> Vec<Table> {
    let r = &s.report;
    let mut rescore = Table::new("rescore", &["metric", "value"]);
    for (k, v) in [
        ("images_with_detections", r.images_with_detections as i64),
        (
            "images_with_optimal_order",
            r.images_with_optimal_order as i64,
        ),
        ("scoring_errors", r.scoring_errors as i64),
        ("match_increase", r.match_increase),
        (
            "matches_with_oks_improvement",
            r.matches_with_oks_improvement as i64,
        ),
    ] {
        rescore.push(vec![k.into(), v.to_string()]);
    }
    let h = &s.histograms;
    let mut hist = Table::new(
        "score_histograms",
        &[
            "bin_low",
            "bin_high",
            "original_best",
            "original_other",
            "optimal_best",
            "optimal_other",
        ],
    );
    for i in 0..h.edges.len().saturating_sub(1) {
        hist.push(vec![
            num(h.edges[i]),
            num(h.edges[i + 1]),
            h.original.best_match[i].to_string(),
            h.original.other[i].to_string(),
            h.optimal.best_match[i].to_string(),
            h.optimal.other[i].to_string(),
        ]);
    }
    vec![rescore, hist]
}

pub fn background(b: &BackgroundSummary) -> Vec<Table> {
    let mut bg = Table::new(
        "background",
        &[
            "threshold",
            "ap",
            "ap_without_fn",
            "ap_without_fp",
            "fn_gain",
            "fp_gain",
        ],
    );
    for i in &b.impact {
        bg.push(vec![
            num(i.threshold),
            num(i.ap),
            num(i.ap_without_fn),
            num(i.ap_without_fp),
            num(i.fn_gain()),
            num(i.fp_gain()),
        ]);
    }
    let mut out = vec![bg];

    let mut fp = Table::new("fp_area", &["area", "count"]);
    for (label, count) in &b.high_confidence_fp_area.bins {
        fp.push(vec![label.clone(), count.to_string()]);
    }
    out.push(fp);

    let hm = &b.fn_heatmap;
    let mut heat = Table::new("fn_heatmap", &["row", "col", "count"]);
    for r in 0..hm.rows {
        for c in 0..hm.cols {
            heat.push(vec![
                r.to_string(),
                c.to_string(),
                num(hm.counts[r * hm.cols + c]),
            ]);
        }
    }
    out.push(heat);

    let mut clutter = Table::new("clutter", &["images", "mean_annotations"]);
    for (k, v) in [
        ("with_fp", b.clutter.images_with_fp),
        ("with_fn", b.clutter.images_with_fn),
        ("all", b.clutter.all_images),
    ] {
        clutter.push(vec![k.into(), opt(v)]);
    }
    out.push(clutter);
    out
}

pub fn benchmarks(s: &BenchmarkSummary) -> Vec<Table> {
    let mut cells = Table::new(
        "benchmarks",
        &[
            "cell",
            "family",
            "gt_count",
            "coco_ap",
            "coco_ar",
            "good_frequency",
            "jitter_frequency",
            "inversion_frequency",
            "swap_frequency",
            "miss_frequency",
        ],
    );
    for c in &s.cells {
        let mut row = vec![
            c.id.clone(),
            c.family.clone(),
            c.gt_count.to_string(),
            opt(c.coco_ap),
            opt(c.coco_ar),
        ];
        row.extend(
            KINDS[..5]
                .iter()
                .map(|&k| opt(c.errors.counts.frequency(k))),
        );
        cells.push(row);
    }

    let mut spread = Table::new(
        "benchmark_sensitivity",
        &["family", "sensitivity", "impact"],
    );
    for (family, si) in [("occlusion", s.occlusion), ("size", s.size)] {
        spread.push(vec![
            family.into(),
            opt(si.map(|v| v.sensitivity)),
            opt(si.map(|v| v.impact)),
        ]);
    }
    vec![cells, spread]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_quotes_fields() {
        let mut t = Table::new("x", &["a", "b"]);
        t.push(vec!["1,5".into(), "plain".into()]);
        assert_eq!(t.to_csv().unwrap(), "a,b\n\"1,5\",plain\n");
    }
}
