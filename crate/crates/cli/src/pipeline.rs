//! Runs every analysis over one dataset and condenses the results into the
//! serializable [`Summary`].

use std::collections::{BTreeMap, BTreeSet};

use kpt_diagnose::background::{
    background_impact_from_sets, clutter_stats, fn_heatmap, high_conf_fp_histogram,
    BackgroundImpact, ClutterStats, FpAreaHistogram, Heatmap, AREA_LABELS, DEFAULT_HEATMAP_GRID,
};
use kpt_diagnose::benchmarks::{
    evaluate_benchmarks, BenchmarkReport, BenchmarkSpec, SensitivityImpact,
};
use kpt_diagnose::correction::{
    progressive_pr_by_cell, separate_impact, CorrectionPlan, KindImpact, ProgressiveResult,
    StageResult,
};
use kpt_diagnose::data_model::{Detection, EvalConfig, GroundTruth, KeypointSchema};
use kpt_diagnose::matching::{evaluate, EvalResult, Evaluation};
use kpt_diagnose::scoring::{
    rescore, rescore_report, score_histograms, RescoreReport, ScoreHistograms,
};
use kpt_diagnose::taxonomy::{
    classify_matches, error_breakdown, BreakdownRow, DetectionLabels, ErrorBreakdown, ErrorKind,
    KindCounts,
};
use serde::{Deserialize, Serialize};

use crate::error::Result;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct Options {
    pub config: EvalConfig,
    pub plan: CorrectionPlan,
    pub benchmark_spec: BenchmarkSpec,
    pub histogram_bins: usize,
    pub heatmap_grid: (usize, usize),
}

impl Options {
    /// Default analysis settings for `config`. The progressive plan runs at
    /// OKS .75 when that threshold is configured, otherwise at the middle
    /// configured threshold.
    pub fn new(config: EvalConfig, schema: &KeypointSchema) -> Self {
        let threshold = default_plan_threshold(&config);
        Self {
            plan: CorrectionPlan::with_default_order(threshold),
            benchmark_spec: BenchmarkSpec::for_keypoints(schema.len()),
            config,
            histogram_bins: 20,
            heatmap_grid: DEFAULT_HEATMAP_GRID,
        }
    }
}

pub fn default_plan_threshold(config: &EvalConfig) -> f64 {
    if config.has_threshold(0.75) {
        0.75
    } else {
        let mut ts = config.oks_thresholds.clone();
        ts.sort_by(f64::total_cmp);
        ts.get(ts.len() / 2).copied().unwrap_or(0.75)
    }
}

/// Full results of every analysis.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub evaluation: Evaluation,
    pub labels: Vec<DetectionLabels>,
    pub breakdown: ErrorBreakdown,
    pub separate: Vec<KindImpact>,
    pub progressive: ProgressiveResult,
    pub cell_progressive: Vec<(String, ProgressiveResult)>,
    pub rescore: RescoreReport,
    pub rescore_warnings: Vec<String>,
    pub histograms: ScoreHistograms,
    pub background: Vec<BackgroundImpact>,
    pub fp_areas: FpAreaHistogram,
    pub heatmap: Heatmap,
    pub clutter: ClutterStats,
    pub benchmarks: BenchmarkReport,
    pub dataset: DatasetSummary,
}

pub fn analyze(
    gt: &GroundTruth,
    dets: &[Detection],
    schema: &KeypointSchema,
    opts: &Options,
) -> Result<Analysis> {
    let config = &opts.config;
    config.validate()?;
    opts.plan.validate(config)?;
    opts.benchmark_spec.validate(schema.len())?;
    let gts = &gt.instances;

    let evaluation = evaluate(dets, gts, schema, config)?;
    let sets = &evaluation.match_sets;
    let labels = classify_matches(dets, gts, sets, schema, config);
    let breakdown = error_breakdown(&labels, schema);
    let separate = separate_impact(dets, gts, schema, config)?;
    let benchmarks = evaluate_benchmarks(
        sets,
        &labels,
        gts,
        evaluation.coco_ap,
        &opts.benchmark_spec,
        schema,
        config,
    )?;

    let mut cells: Vec<BTreeSet<u64>> = vec![gts.iter().map(|g| g.id).collect()];
    let part = &benchmarks.partition;
    cells.extend(
        part.occlusion
            .iter()
            .map(|c| &c.gt_ids)
            .chain(part.size.iter().map(|c| &c.gt_ids))
            .map(|ids| ids.iter().copied().collect::<BTreeSet<u64>>()),
    );
    let mut curves = progressive_pr_by_cell(dets, gts, &opts.plan, schema, config, &cells)?;
    let progressive = curves.remove(0).ok_or(kpt_diagnose::Error::NoGroundTruth)?;
    let cell_progressive = benchmarks
        .cells
        .iter()
        .zip(curves)
        .filter_map(|(c, r)| r.map(|r| (c.id.clone(), r)))
        .collect();

    let rescore_warnings = match config.soft_nms_sigma {
        Some(_) => rescore(dets, gts, schema, config)?.warnings,
        None => Vec::new(),
    };

    Ok(Analysis {
        rescore: rescore_report(dets, gts, schema, config)?,
        rescore_warnings,
        histograms: score_histograms(dets, gts, schema, config, opts.histogram_bins)?,
        background: background_impact_from_sets(sets, config)?,
        fp_areas: high_conf_fp_histogram(dets, sets),
        heatmap: fn_heatmap(gts, sets, &gt.images, opts.heatmap_grid),
        clutter: clutter_stats(gts, sets),
        dataset: DatasetSummary {
            images: gt.images.len(),
            ground_truths: gts.len(),
            evaluable_ground_truths: gt.evaluable().count(),
            detections: dets.len(),
            keypoints: schema.len(),
        },
        breakdown,
        separate,
        progressive,
        cell_progressive,
        benchmarks,
        labels,
        evaluation,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub images: usize,
    pub ground_truths: usize,
    pub evaluable_ground_truths: usize,
    pub detections: usize,
    pub keypoints: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApRow {
    pub threshold: f64,
    pub ap: f64,
    pub recall: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_count: usize,
}

impl From<&EvalResult> for ApRow {
    fn from(r: &EvalResult) -> Self {
        Self {
            threshold: r.threshold,
            ap: r.ap,
            recall: r.recall,
            tp: r.tp,
            fp: r.fp,
            fn_count: r.fn_count,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KindRow {
    pub name: String,
    pub counts: KindCounts,
    /// Share of classified keypoints per kind; `null` without any.
    pub frequency: BTreeMap<String, Option<f64>>,
}

impl KindRow {
    pub fn new(name: &str, counts: &KindCounts) -> Self {
        Self {
            name: name.to_string(),
            counts: *counts,
            frequency: ErrorKind::ALL
                .into_iter()
                .filter(|&k| k != ErrorKind::Unclassifiable)
                .map(|k| (k.name().to_string(), counts.frequency(k)))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub overall: KindRow,
    pub by_keypoint: Vec<KindRow>,
    pub by_group: Vec<KindRow>,
    pub separate_impact: Vec<KindImpact>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRow {
    pub label: String,
    pub ap: f64,
    pub ap_gain: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_count: usize,
    /// `[recall, precision]` samples of the interpolated curve.
    pub pr: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellCurve {
    pub cell: String,
    pub stages: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgressiveSummary {
    pub threshold: f64,
    pub stages: Vec<StageRow>,
    /// Stage APs restricted to each non-empty benchmark cell.
    pub benchmarks: Vec<CellCurve>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RescoreSummary {
    #[serde(flatten)]
    pub report: RescoreReport,
    pub histograms: ScoreHistograms,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FpAreaSummary {
    pub score_cutoff: Option<f64>,
    pub bins: Vec<(String, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapSummary {
    pub rows: usize,
    pub cols: usize,
    pub total: f64,
    pub counts: Vec<f64>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackgroundSummary {
    pub impact: Vec<BackgroundImpact>,
    pub high_confidence_fp_area: FpAreaSummary,
    pub clutter: ClutterStats,
    pub fn_heatmap: HeatmapSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRow {
    pub id: String,
    pub family: String,
    pub gt_count: usize,
    pub empty: bool,
    pub coco_ap: Option<f64>,
    pub coco_ar: Option<f64>,
    pub ap: Vec<ApRow>,
    pub errors: KindRow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSummary {
    pub cells: Vec<CellRow>,
    pub occlusion: Option<SensitivityImpact>,
    pub size: Option<SensitivityImpact>,
    pub below_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub dataset: DatasetSummary,
    pub ap: Vec<ApRow>,
    pub coco_ap: f64,
    pub coco_ar: f64,
    pub error_breakdown: ErrorSummary,
    pub progressive: ProgressiveSummary,
    pub rescore: RescoreSummary,
    pub background: BackgroundSummary,
    pub benchmarks: BenchmarkSummary,
}

impl ErrorSummary {
    pub fn new(breakdown: &ErrorBreakdown, separate: &[KindImpact]) -> Self {
        let rows = |rows: &[BreakdownRow]| {
            rows.iter()
                .map(|r| KindRow::new(&r.name, &r.counts))
                .collect()
        };
        Self {
            overall: KindRow::new("overall", &breakdown.overall),
            by_keypoint: rows(&breakdown.by_keypoint),
            by_group: rows(&breakdown.by_group),
            separate_impact: separate.to_vec(),
        }
    }
}

impl StageRow {
    pub fn new(s: &StageResult) -> Self {
        Self {
            label: s.label.clone(),
            ap: s.result.ap,
            ap_gain: s.ap_gain,
            tp: s.result.tp,
            fp: s.result.fp,
            fn_count: s.result.fn_count,
            pr: s
                .result
                .pr_samples
                .iter()
                .map(|p| [p.recall, p.precision])
                .collect(),
        }
    }
}

impl ProgressiveSummary {
    pub fn new(result: &ProgressiveResult, cells: &[(String, ProgressiveResult)]) -> Self {
        Self {
            threshold: result.threshold,
            stages: result.stages.iter().map(StageRow::new).collect(),
            benchmarks: cells
                .iter()
                .map(|(cell, r)| CellCurve {
                    cell: cell.clone(),
                    stages: r
                        .stages
                        .iter()
                        .map(|s| (s.label.clone(), s.result.ap))
                        .collect(),
                })
                .collect(),
        }
    }
}

impl BackgroundSummary {
    pub fn new(
        impact: &[BackgroundImpact],
        fp_areas: &FpAreaHistogram,
        clutter: ClutterStats,
        heatmap: &Heatmap,
    ) -> Self {
        Self {
            impact: impact.to_vec(),
            high_confidence_fp_area: FpAreaSummary {
                score_cutoff: fp_areas.score_cutoff,
                bins: AREA_LABELS
                    .iter()
                    .zip(&fp_areas.counts)
                    .map(|(l, &c)| (l.to_string(), c))
                    .collect(),
            },
            clutter,
            fn_heatmap: HeatmapSummary {
                rows: heatmap.rows,
                cols: heatmap.cols,
                total: heatmap.total(),
                counts: heatmap.counts.clone(),
                warnings: heatmap.warnings.clone(),
            },
        }
    }
}

impl From<&BenchmarkReport> for BenchmarkSummary {
    fn from(report: &BenchmarkReport) -> Self {
        Self {
            cells: report
                .cells
                .iter()
                .map(|c| CellRow {
                    id: c.id.clone(),
                    family: c.family.clone(),
                    gt_count: c.gt_count,
                    empty: c.result.empty,
                    coco_ap: c.result.evaluation.as_ref().map(|e| e.coco_ap),
                    coco_ar: c.result.evaluation.as_ref().map(|e| e.coco_ar),
                    ap: c
                        .result
                        .evaluation
                        .iter()
                        .flat_map(|e| e.results.iter().map(ApRow::from))
                        .collect(),
                    errors: KindRow::new(&c.id, &c.result.errors.overall),
                })
                .collect(),
            occlusion: report.occlusion_sensitivity,
            size: report.size_sensitivity,
            below_size: report.partition.below_size.len(),
        }
    }
}

impl Analysis {
    pub fn summary(&self) -> Summary {
        Summary {
            schema_version: SCHEMA_VERSION,
            dataset: self.dataset,
            ap: self.evaluation.results.iter().map(ApRow::from).collect(),
            coco_ap: self.evaluation.coco_ap,
            coco_ar: self.evaluation.coco_ar,
            error_breakdown: ErrorSummary::new(&self.breakdown, &self.separate),
            progressive: ProgressiveSummary::new(&self.progressive, &self.cell_progressive),
            rescore: RescoreSummary {
                report: self.rescore,
                histograms: self.histograms.clone(),
                warnings: self.rescore_warnings.clone(),
            },
            background: BackgroundSummary::new(
                &self.background,
                &self.fp_areas,
                self.clutter,
                &self.heatmap,
            ),
            benchmarks: BenchmarkSummary::from(&self.benchmarks),
        }
    }
}

impl Summary {
    /// Pretty JSON. Fails if any number is NaN or infinite: those serialize
    /// as `null`, so the text would not parse back to an equal summary.
    pub fn to_json(&self) -> std::result::Result<String, String> {
        let text = serde_json::to_string_pretty(self).map_err(|e| e.to_string())?;
        match serde_json::from_str::<Summary>(&text) {
            Ok(back) if back == *self => Ok(text + "\n"),
            _ => Err("summary contains a non-finite number".into()),
        }
    }
}
