//! Correction of localization errors and progressive PR analysis.
//!
//! A corrected keypoint stays on the ray from its ground-truth part through
//! the old prediction. Jitter moves onto the ks = `good_threshold` circle and
//! Miss onto the ks = `jitter_threshold` circle. Inversion and Swap keep the
//! similarity the prediction had with the wrong part, now measured against
//! the right one.

use std::collections::{BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data_model::{Detection, EvalConfig, GtInstance, KeypointSchema, Point};
use crate::matching::{match_all, pr_and_ap, pr_and_ap_allow_empty, EvalResult, MatchSet};
use crate::scoring::rescore;
use crate::similarity::{oks_unchecked, radius_unchecked};
use crate::stats::Quartiles;
use crate::taxonomy::{classify_matches, DetectionLabels, ErrorKind, KeypointErrorLabel};
use crate::{Error, Result};

/// New position of keypoint `i` of `det`, matched to `gt`.
pub fn correct_keypoint(
    label: &KeypointErrorLabel,
    det: &Detection,
    gt: &GtInstance,
    i: usize,
    schema: &KeypointSchema,
    config: &EvalConfig,
) -> Result<Point> {
    let target = match label.kind {
        ErrorKind::Jitter => config.good_threshold,
        ErrorKind::Miss => config.jitter_threshold,
        ErrorKind::Inversion | ErrorKind::Swap => label.ks_wrong.ok_or(Error::NotCorrectable(
            "confusion label without a wrong-part similarity",
        ))?,
        ErrorKind::Good => return Err(Error::NotCorrectable("good keypoint")),
        ErrorKind::Unclassifiable => return Err(Error::NotCorrectable("unclassifiable keypoint")),
    };
    let anchor = gt.keypoints[i].position();
    if target >= 1.0 {
        return Ok(anchor);
    }
    let radius = radius_unchecked(target, gt.scale(), schema.k(i));
    let old = det.keypoints[i];
    let d = old.distance(&anchor);
    let (ux, uy) = if d > 0.0 {
        ((old.x - anchor.x) / d, (old.y - anchor.y) / d)
    } else {
        (1.0, 0.0)
    };
    Ok(Point::new(anchor.x + radius * ux, anchor.y + radius * uy))
}

/// OKS of one matched detection before and after correction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OksDelta {
    pub detection_id: u64,
    pub gt_id: u64,
    pub before: f64,
    pub after: f64,
}

impl OksDelta {
    pub fn delta(&self) -> f64 {
        self.after - self.before
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionOutcome {
    /// All detections in input order, corrected where labeled.
    pub detections: Vec<Detection>,
    /// One entry per labeled detection, in label order.
    pub deltas: Vec<OksDelta>,
    pub corrected_keypoints: usize,
}

/// Moves every keypoint whose label kind is in `kinds`.
pub fn apply_correction(
    dets: &[Detection],
    gts: &[GtInstance],
    labels: &[DetectionLabels],
    kinds: &BTreeSet<ErrorKind>,
    schema: &KeypointSchema,
    config: &EvalConfig,
) -> Result<CorrectionOutcome> {
    let gt_by_id: HashMap<u64, &GtInstance> = gts.iter().map(|g| (g.id, g)).collect();
    let det_index: HashMap<u64, usize> = dets.iter().enumerate().map(|(i, d)| (d.id, i)).collect();
    let mut detections = dets.to_vec();
    let mut deltas = Vec::with_capacity(labels.len());
    let mut corrected_keypoints = 0;
    for dl in labels {
        let (Some(&di), Some(gt)) = (det_index.get(&dl.detection_id), gt_by_id.get(&dl.gt_id))
        else {
            return Err(Error::InvalidRecord {
                record: format!("detection {}", dl.detection_id),
                reason: "label refers to an unknown detection or ground truth".into(),
            });
        };
        let original = &dets[di];
        for (i, label) in dl.labels.iter().enumerate() {
            if kinds.contains(&label.kind) {
                detections[di].keypoints[i] =
                    correct_keypoint(label, original, gt, i, schema, config)?;
                corrected_keypoints += 1;
            }
        }
        deltas.push(OksDelta {
            detection_id: dl.detection_id,
            gt_id: dl.gt_id,
            before: oks_unchecked(original, gt, schema),
            after: oks_unchecked(&detections[di], gt, schema),
        });
    }
    Ok(CorrectionOutcome {
        detections,
        deltas,
        corrected_keypoints,
    })
}

/// Classifies every matched detection and corrects the given kinds.
pub fn classify_and_correct(
    dets: &[Detection],
    gts: &[GtInstance],
    kinds: &BTreeSet<ErrorKind>,
    schema: &KeypointSchema,
    config: &EvalConfig,
) -> Result<CorrectionOutcome> {
    let sets = match_all(dets, gts, schema, config);
    let labels = classify_matches(dets, gts, &sets, schema, config);
    apply_correction(dets, gts, &labels, kinds, schema, config)
}

/// Thresholds at which separate corrections are scored.
pub const IMPACT_THRESHOLDS: [f64; 2] = [0.75, 0.5];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KindImpact {
    pub kind: ErrorKind,
    pub corrected_keypoints: usize,
    /// Quartiles of the OKS gain over all matched detections.
    pub oks_delta: Option<Quartiles>,
    /// `(threshold, AP after - AP before)` for each of [`IMPACT_THRESHOLDS`].
    pub ap_delta: Vec<(f64, f64)>,
}

/// Corrects each localization kind on its own, starting from the original
/// detections every time.
pub fn separate_impact(
    dets: &[Detection],
    gts: &[GtInstance],
    schema: &KeypointSchema,
    config: &EvalConfig,
) -> Result<Vec<KindImpact>> {
    let sets = match_all(dets, gts, schema, config);
    let labels = classify_matches(dets, gts, &sets, schema, config);
    let mut baseline = Vec::new();
    for t in IMPACT_THRESHOLDS {
        baseline.push(pr_and_ap(&sets, t, config)?.ap);
    }
    ErrorKind::LOCALIZATION
        .iter()
        .map(|&kind| {
            let outcome =
                apply_correction(dets, gts, &labels, &BTreeSet::from([kind]), schema, config)?;
            let deltas: Vec<f64> = outcome.deltas.iter().map(OksDelta::delta).collect();
            let corrected = match_all(&outcome.detections, gts, schema, config);
            let mut ap_delta = Vec::new();
            for (t, before) in IMPACT_THRESHOLDS.iter().zip(&baseline) {
                ap_delta.push((*t, pr_and_ap(&corrected, *t, config)?.ap - before));
            }
            Ok(KindImpact {
                kind,
                corrected_keypoints: outcome.corrected_keypoints,
                oks_delta: Quartiles::of(&deltas),
                ap_delta,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Stage {
    Miss,
    Swap,
    Inversion,
    Jitter,
    OptScore,
    RemoveBgFp,
    RemoveFn,
}

impl Stage {
    pub const DEFAULT_ORDER: [Stage; 7] = [
        Stage::Miss,
        Stage::Swap,
        Stage::Inversion,
        Stage::Jitter,
        Stage::OptScore,
        Stage::RemoveBgFp,
        Stage::RemoveFn,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Stage::Miss => "Miss",
            Stage::Swap => "Swap",
            Stage::Inversion => "Inversion",
            Stage::Jitter => "Jitter",
            Stage::OptScore => "OptScore",
            Stage::RemoveBgFp => "RemoveBgFP",
            Stage::RemoveFn => "RemoveFN",
        }
    }

    fn error_kind(self) -> Option<ErrorKind> {
        match self {
            Stage::Miss => Some(ErrorKind::Miss),
            Stage::Swap => Some(ErrorKind::Swap),
            Stage::Inversion => Some(ErrorKind::Inversion),
            Stage::Jitter => Some(ErrorKind::Jitter),
            _ => None,
        }
    }
}

impl std::str::FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s
            .chars()
            .filter(|c| !matches!(c, '-' | '_' | ' '))
            .collect::<String>()
            .to_ascii_lowercase();
        Stage::DEFAULT_ORDER
            .into_iter()
            .find(|st| st.label().to_ascii_lowercase() == norm)
            .ok_or_else(|| Error::InvalidPlan(format!("unknown stage '{s}'")))
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Ordered correction stages evaluated at one OKS threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionPlan {
    stages: Vec<Stage>,
    threshold: f64,
}

impl CorrectionPlan {
    pub fn new(stages: Vec<Stage>, threshold: f64) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for s in &stages {
            if !seen.insert(*s) {
                return Err(Error::InvalidPlan(format!("stage {s} appears twice")));
            }
        }
        Ok(Self { stages, threshold })
    }

    pub fn with_default_order(threshold: f64) -> Self {
        Self {
            stages: Stage::DEFAULT_ORDER.to_vec(),
            threshold,
        }
    }

    /// Parses a comma separated list of stage names.
    pub fn parse(list: &str, threshold: f64) -> Result<Self> {
        let stages = list
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::parse)
            .collect::<Result<Vec<Stage>>>()?;
        Self::new(stages, threshold)
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn validate(&self, config: &EvalConfig) -> Result<()> {
        if !config.has_threshold(self.threshold) {
            return Err(Error::InvalidPlan(format!(
                "threshold {} is not an evaluation threshold",
                self.threshold
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageResult {
    /// `None` for the uncorrected baseline.
    pub stage: Option<Stage>,
    pub label: String,
    pub result: EvalResult,
    /// AP gained over the previous curve.
    pub ap_gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgressiveResult {
    pub threshold: f64,
    /// Baseline first, then one entry per stage.
    pub stages: Vec<StageResult>,
}

impl ProgressiveResult {
    pub fn final_ap(&self) -> f64 {
        self.stages.last().map_or(0.0, |s| s.result.ap)
    }
}

/// PR curves after applying the plan's stages cumulatively.
pub fn progressive_pr(
    dets: &[Detection],
    gts: &[GtInstance],
    plan: &CorrectionPlan,
    schema: &KeypointSchema,
    config: &EvalConfig,
) -> Result<ProgressiveResult> {
    progressive_pr_within(dets, gts, plan, schema, config, |_| true)
}

/// Like [`progressive_pr`], with ground truths rejected by `keep` ignored.
pub fn progressive_pr_within(
    dets: &[Detection],
    gts: &[GtInstance],
    plan: &CorrectionPlan,
    schema: &KeypointSchema,
    config: &EvalConfig,
    keep: impl Fn(u64) -> bool + Copy,
) -> Result<ProgressiveResult> {
    let staged = stage_match_sets(dets, gts, plan, schema, config)?;
    summarize_stages(&staged, plan.threshold, config, keep)
}

/// Progressive curves for several ground-truth subsets at once. The stage
/// data is built a single time; cells without ground truth give `None`.
pub fn progressive_pr_by_cell(
    dets: &[Detection],
    gts: &[GtInstance],
    plan: &CorrectionPlan,
    schema: &KeypointSchema,
    config: &EvalConfig,
    cells: &[BTreeSet<u64>],
) -> Result<Vec<Option<ProgressiveResult>>> {
    let staged = stage_match_sets(dets, gts, plan, schema, config)?;
    cells
        .par_iter()
        .map(|cell| {
            match summarize_stages(&staged, plan.threshold, config, |id| cell.contains(&id)) {
                Ok(r) => Ok(Some(r)),
                Err(Error::NoGroundTruth) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect()
}

/// Match sets of the baseline followed by one entry per plan stage.
fn stage_match_sets(
    dets: &[Detection],
    gts: &[GtInstance],
    plan: &CorrectionPlan,
    schema: &KeypointSchema,
    config: &EvalConfig,
) -> Result<Vec<(Option<Stage>, Vec<MatchSet>)>> {
    plan.validate(config)?;
    let t = plan.threshold;
    let base_sets = match_all(dets, gts, schema, config);
    let labels = classify_matches(dets, gts, &base_sets, schema, config);
    let mut staged = vec![(None, base_sets)];

    let mut kinds = BTreeSet::new();
    let (mut rescored, mut drop_fp, mut drop_fn) = (false, false, false);
    let mut current = dets.to_vec();
    for &stage in &plan.stages {
        let data_changed = match (stage, stage.error_kind()) {
            (_, Some(kind)) => kinds.insert(kind),
            (Stage::OptScore, _) => {
                rescored = true;
                true
            }
            (Stage::RemoveBgFp, _) => {
                drop_fp = true;
                false
            }
            _ => {
                drop_fn = true;
                false
            }
        };
        if data_changed {
            current = apply_correction(dets, gts, &labels, &kinds, schema, config)?.detections;
            if rescored {
                current = rescore(&current, gts, schema, config)?.detections;
            }
        }
        let mut sets = match_all(&current, gts, schema, config);
        if drop_fp {
            sets = sets.iter().map(|s| s.without_false_positives(t)).collect();
        }
        if drop_fn {
            sets = sets.iter().map(|s| s.without_false_negatives(t)).collect();
        }
        staged.push((Some(stage), sets));
    }
    Ok(staged)
}

fn summarize_stages(
    staged: &[(Option<Stage>, Vec<MatchSet>)],
    t: f64,
    config: &EvalConfig,
    keep: impl Fn(u64) -> bool + Copy,
) -> Result<ProgressiveResult> {
    let restrict = |sets: &[MatchSet]| -> Vec<MatchSet> {
        sets.iter().map(|s| s.restricted_to(keep)).collect()
    };
    let baseline_sets = restrict(&staged[0].1);
    if baseline_sets.iter().all(|s| s.gt_ids.is_empty()) {
        return Err(Error::NoGroundTruth);
    }
    let baseline = pr_and_ap_allow_empty(&baseline_sets, t, config)?;
    let mut previous_ap = baseline.ap;
    let mut stages = vec![StageResult {
        stage: None,
        label: "Original".into(),
        result: baseline,
        ap_gain: 0.0,
    }];
    for (stage, sets) in staged.iter().filter_map(|(s, sets)| s.map(|s| (s, sets))) {
        let result = pr_and_ap_allow_empty(&restrict(sets), t, config)?;
        let ap_gain = result.ap - previous_ap;
        previous_ap = result.ap;
        stages.push(StageResult {
            stage: Some(stage),
            label: stage.label().into(),
            result,
            ap_gain,
        });
    }
    Ok(ProgressiveResult {
        threshold: t,
        stages,
    })
}

/// Labels of the matched detections of the original data.
pub fn baseline_labels(
    dets: &[Detection],
    gts: &[GtInstance],
    schema: &KeypointSchema,
    config: &EvalConfig,
) -> Vec<DetectionLabels> {
    let sets = match_all(dets, gts, schema, config);
    classify_matches(dets, gts, &sets, schema, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_model::{BBox, Keypoint};
    use crate::similarity::keypoint_similarity;
    use proptest::prelude::*;

    fn pair_schema() -> KeypointSchema {
        KeypointSchema::new(
            "pair",
            vec!["left".into(), "right".into()],
            &[[0, 1]],
            vec![0.1, 0.1],
            vec![],
        )
        .unwrap()
    }

    fn dist_for(ks: f64) -> f64 {
        (-200.0 * ks.ln()).sqrt()
    }

    fn person(id: u64, image: u64, left: (f64, f64), right: (f64, f64)) -> GtInstance {
        GtInstance::new(
            id,
            image,
            vec![
                Keypoint::labeled(left.0, left.1),
                Keypoint::labeled(right.0, right.1),
            ],
            10_000.0,
            BBox::default(),
        )
    }

    fn label(kind: ErrorKind, ks_wrong: Option<f64>) -> KeypointErrorLabel {
        KeypointErrorLabel {
            kind,
            wrong_part: None,
            ks_self: Some(0.0),
            ks_wrong,
        }
    }

    #[test]
    fn circles() {
        let s = pair_schema();
        let c = EvalConfig::default();
        let g = person(1, 1, (10.0, 20.0), (200.0, 0.0));
        let d = Detection::new(
            1,
            1,
            vec![Point::new(60.0, 70.0), Point::new(200.0, 0.0)],
            1.0,
        );
        let ks = |p: Point| keypoint_similarity(p, g.keypoints[0].position(), 100.0, 0.1).unwrap();
        let miss = correct_keypoint(&label(ErrorKind::Miss, None), &d, &g, 0, &s, &c).unwrap();
        assert!((ks(miss) - 0.5).abs() < 1e-12);
        // stays on the ray through the old prediction
        assert!(((miss.x - 10.0) - (miss.y - 20.0)).abs() < 1e-9);
        let jitter = correct_keypoint(&label(ErrorKind::Jitter, None), &d, &g, 0, &s, &c).unwrap();
        assert!((ks(jitter) - 0.85).abs() < 1e-12);
        let swap = correct_keypoint(&label(ErrorKind::Swap, Some(0.7)), &d, &g, 0, &s, &c).unwrap();
        assert!((ks(swap) - 0.7).abs() < 1e-12);
        let exact =
            correct_keypoint(&label(ErrorKind::Inversion, Some(1.0)), &d, &g, 0, &s, &c).unwrap();
        assert_eq!(exact, g.keypoints[0].position());
        assert!(correct_keypoint(&label(ErrorKind::Good, None), &d, &g, 0, &s, &c).is_err());
        assert!(
            correct_keypoint(&label(ErrorKind::Unclassifiable, None), &d, &g, 0, &s, &c).is_err()
        );
    }

    #[test]
    fn inversion_onto_wrong_part_lands_on_gt() {
        let s = pair_schema();
        let c = EvalConfig::default();
        let g = person(1, 1, (0.0, 0.0), (25.0, 0.0));
        let d = Detection::new(
            1,
            1,
            vec![Point::new(25.0, 0.0), Point::new(25.0, 0.0)],
            1.0,
        );
        let outcome = classify_and_correct(
            &[d],
            std::slice::from_ref(&g),
            &BTreeSet::from([ErrorKind::Inversion]),
            &s,
            &c,
        )
        .unwrap();
        assert_eq!(outcome.detections[0].keypoints[0], Point::new(0.0, 0.0));
        assert_eq!(outcome.deltas[0].after, 1.0);
    }

    #[test]
    fn miss_correction_raises_oks() {
        let s = pair_schema();
        let c = EvalConfig::default();
        let g = person(1, 1, (0.0, 0.0), (100.0, 0.0));
        let d = Detection::new(
            1,
            1,
            vec![
                Point::new(dist_for(0.1), 0.0),
                Point::new(100.0, dist_for(0.9)),
            ],
            1.0,
        );
        let labels = baseline_labels(std::slice::from_ref(&d), std::slice::from_ref(&g), &s, &c);
        assert_eq!(labels[0].labels[0].kind, ErrorKind::Miss);
        let o = apply_correction(
            std::slice::from_ref(&d),
            std::slice::from_ref(&g),
            &labels,
            &BTreeSet::from([ErrorKind::Miss]),
            &s,
            &c,
        )
        .unwrap();
        assert!((o.deltas[0].before - 0.5).abs() < 1e-12);
        assert!((o.deltas[0].after - 0.7).abs() < 1e-12);
        assert!((o.deltas[0].delta() - 0.2).abs() < 1e-12);

        let none = apply_correction(
            std::slice::from_ref(&d),
            std::slice::from_ref(&g),
            &labels,
            &BTreeSet::new(),
            &s,
            &c,
        )
        .unwrap();
        assert_eq!(none.detections, vec![d]);
        assert_eq!(none.deltas[0].delta(), 0.0);
    }

    #[test]
    fn good_detection_is_fixed_point() {
        let s = pair_schema();
        let c = EvalConfig::default();
        let g = person(1, 1, (0.0, 0.0), (100.0, 0.0));
        let d = Detection::new(
            1,
            1,
            vec![Point::new(1.0, 0.0), Point::new(100.0, 1.0)],
            1.0,
        );
        let all: BTreeSet<_> = ErrorKind::LOCALIZATION.into_iter().collect();
        let o = classify_and_correct(std::slice::from_ref(&d), &[g], &all, &s, &c).unwrap();
        assert_eq!(o.detections, vec![d]);
        assert_eq!(o.corrected_keypoints, 0);
    }

    #[test]
    fn separate_impact_isolates_kinds() {
        let s = pair_schema();
        let c = EvalConfig::default();
        let g = person(1, 1, (0.0, 0.0), (100.0, 0.0));
        let d = Detection::new(
            1,
            1,
            vec![Point::new(dist_for(0.1), 0.0), Point::new(100.0, 0.0)],
            1.0,
        );
        let impact = separate_impact(&[d], &[g], &s, &c).unwrap();
        for k in impact {
            let q = k.oks_delta.unwrap();
            if k.kind == ErrorKind::Miss {
                assert!(q.median > 0.0);
                assert_eq!(k.corrected_keypoints, 1);
                // OKS .55 becomes .75: TP at both thresholds now
                assert_eq!(k.ap_delta, vec![(0.75, 1.0), (0.5, 0.0)]);
            } else {
                assert_eq!(q.median, 0.0);
                assert!(k.ap_delta.iter().all(|&(_, a)| a == 0.0));
            }
        }
    }

    #[test]
    fn plan_validation() {
        assert!(CorrectionPlan::new(vec![Stage::Miss, Stage::Miss], 0.75).is_err());
        let p = CorrectionPlan::parse("miss, swap,opt-score,remove_bg_fp,RemoveFN", 0.75).unwrap();
        assert_eq!(p.stages().len(), 5);
        assert!(CorrectionPlan::parse("miss,wobble", 0.75).is_err());
        assert!(CorrectionPlan::with_default_order(0.42)
            .validate(&EvalConfig::default())
            .is_err());
    }

    #[test]
    fn perfect_detections_stay_perfect() {
        let s = pair_schema();
        let c = EvalConfig::default();
        let g = vec![
            person(1, 1, (0.0, 0.0), (100.0, 0.0)),
            person(2, 2, (0.0, 0.0), (100.0, 0.0)),
        ];
        let d: Vec<_> = g
            .iter()
            .map(|g| {
                Detection::new(
                    g.id,
                    g.image_id,
                    g.keypoints.iter().map(|k| k.position()).collect(),
                    1.0,
                )
            })
            .collect();
        let r = progressive_pr(&d, &g, &CorrectionPlan::with_default_order(0.75), &s, &c).unwrap();
        assert_eq!(r.stages.len(), 8);
        assert!(r.stages.iter().all(|st| st.result.ap == 1.0));
    }

    #[test]
    fn background_stages_finish_at_one() {
        let s = pair_schema();
        let c = EvalConfig::default();
        let g = vec![
            person(1, 1, (0.0, 0.0), (100.0, 0.0)),
            person(2, 1, (0.0, 500.0), (100.0, 500.0)),
        ];
        let d = vec![
            Detection::new(
                1,
                1,
                vec![Point::new(900.0, 0.0), Point::new(900.0, 50.0)],
                0.9,
            ),
            Detection::new(
                2,
                1,
                vec![Point::new(0.0, 3.0), Point::new(100.0, 0.0)],
                0.5,
            ),
        ];
        let plan = CorrectionPlan::new(vec![Stage::RemoveBgFp, Stage::RemoveFn], 0.75).unwrap();
        let r = progressive_pr(&d, &g, &plan, &s, &c).unwrap();
        let aps: Vec<f64> = r.stages.iter().map(|st| st.result.ap).collect();
        assert!(aps[0] < aps[1] && aps[1] < aps[2]);
        assert_eq!(r.final_ap(), 1.0);
        assert_eq!(r.stages[2].result.recall, 1.0);
    }

    #[test]
    fn by_cell_matches_single_restriction() {
        let s = pair_schema();
        let c = EvalConfig::default();
        let g = vec![
            person(1, 1, (0.0, 0.0), (100.0, 0.0)),
            person(2, 1, (0.0, 500.0), (100.0, 500.0)),
        ];
        let d = vec![
            Detection::new(
                1,
                1,
                vec![Point::new(dist_for(0.1), 0.0), Point::new(100.0, 0.0)],
                0.9,
            ),
            Detection::new(
                2,
                1,
                vec![Point::new(0.0, 503.0), Point::new(100.0, 500.0)],
                0.5,
            ),
        ];
        let plan = CorrectionPlan::with_default_order(0.75);
        let cells = vec![
            BTreeSet::from([1]),
            BTreeSet::from([2]),
            BTreeSet::from([1, 2]),
            BTreeSet::new(),
        ];
        let by_cell = progressive_pr_by_cell(&d, &g, &plan, &s, &c, &cells).unwrap();
        for (cell, got) in cells.iter().zip(&by_cell) {
            let want = progressive_pr_within(&d, &g, &plan, &s, &c, |id| cell.contains(&id)).ok();
            assert_eq!(got, &want);
        }
        assert!(by_cell[3].is_none());
    }

    proptest! {
        #[test]
        fn correction_never_lowers_similarity(
            pts in prop::collection::vec((-60.0f64..60.0, -60.0f64..60.0), 6),
            mask in 0u8..16,
        ) {
            let s = pair_schema();
            let c = EvalConfig::default();
            let g = vec![person(1, 1, pts[0], pts[1]), person(2, 1, pts[2], pts[3])];
            let d = vec![Detection::new(1, 1, vec![Point::new(pts[4].0, pts[4].1), Point::new(pts[5].0, pts[5].1)], 1.0)];
            let kinds: BTreeSet<_> = ErrorKind::LOCALIZATION
                .into_iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, k)| k)
                .collect();
            let labels = baseline_labels(&d, &g, &s, &c);
            let o = apply_correction(&d, &g, &labels, &kinds, &s, &c).unwrap();
            for delta in &o.deltas {
                prop_assert!(delta.after >= delta.before - 1e-12);
            }
            if kinds.len() == 4 {
                for dl in &labels {
                    let gt = g.iter().find(|x| x.id == dl.gt_id).unwrap();
                    let det = o.detections.iter().find(|x| x.id == dl.detection_id).unwrap();
                    for i in 0..2 {
                        let ks = keypoint_similarity(det.keypoints[i], gt.keypoints[i].position(), 100.0, 0.1).unwrap();
                        prop_assert!(ks >= 0.5 - 1e-12);
                    }
                }
            }
        }
    }
}
