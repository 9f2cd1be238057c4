//! Greedy OKS matching and AP/AR computation.
//!
//! Matching runs once per image, independent of the evaluation threshold:
//! detections are visited in descending score order and each takes the still
//! unmatched ground truth it has the highest OKS with. The resulting
//! [`MatchSet`]s are then classified at every OKS threshold. This differs from
//! the reference COCO evaluator, which re-runs matching per threshold.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data_model::{Detection, EvalConfig, GtInstance, KeypointSchema};
use crate::index::{by_image, score_order};
use crate::similarity::oks_unchecked;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GtMatch {
    pub gt_id: u64,
    pub oks: f64,
}

/// A detection retained for evaluation, in matching order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluatedDetection {
    pub detection_id: u64,
    pub score: f64,
    /// Position in the per-image score order; matching happened in this order.
    pub order: usize,
    pub matched: Option<GtMatch>,
}

impl EvaluatedDetection {
    pub fn is_true_positive(&self, t: f64) -> bool {
        self.matched.is_some_and(|m| m.oks >= t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub detection_id: u64,
    pub gt_id: u64,
    pub oks: f64,
    pub order: usize,
}

/// Detection to ground-truth assignment for one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchSet {
    pub image_id: u64,
    /// Evaluated detections (at most `max_detections_per_image`) in matching
    /// order.
    pub detections: Vec<EvaluatedDetection>,
    /// Ground truths counted in the recall denominator, ascending id.
    pub gt_ids: Vec<u64>,
}

impl MatchSet {
    pub fn pairs(&self) -> Vec<MatchedPair> {
        self.detections
            .iter()
            .filter_map(|d| {
                d.matched.map(|m| MatchedPair {
                    detection_id: d.detection_id,
                    gt_id: m.gt_id,
                    oks: m.oks,
                    order: d.order,
                })
            })
            .collect()
    }

    pub fn unmatched_detections(&self) -> Vec<u64> {
        self.detections
            .iter()
            .filter(|d| d.matched.is_none())
            .map(|d| d.detection_id)
            .collect()
    }

    pub fn unmatched_gts(&self) -> Vec<u64> {
        let matched: HashSet<u64> = self
            .detections
            .iter()
            .filter_map(|d| d.matched.map(|m| m.gt_id))
            .collect();
        self.gt_ids
            .iter()
            .copied()
            .filter(|g| !matched.contains(g))
            .collect()
    }

    fn true_positive_gts(&self, t: f64) -> HashSet<u64> {
        self.detections
            .iter()
            .filter(|d| d.is_true_positive(t))
            .filter_map(|d| d.matched.map(|m| m.gt_id))
            .collect()
    }

    /// Drops every detection that is a false positive at threshold `t`.
    pub fn without_false_positives(&self, t: f64) -> MatchSet {
        MatchSet {
            image_id: self.image_id,
            detections: self
                .detections
                .iter()
                .filter(|d| d.is_true_positive(t))
                .cloned()
                .collect(),
            gt_ids: self.gt_ids.clone(),
        }
    }

    /// Drops every ground truth that is a false negative at threshold `t`
    /// from the recall denominator.
    pub fn without_false_negatives(&self, t: f64) -> MatchSet {
        let tp = self.true_positive_gts(t);
        MatchSet {
            image_id: self.image_id,
            detections: self.detections.clone(),
            gt_ids: self
                .gt_ids
                .iter()
                .copied()
                .filter(|g| tp.contains(g))
                .collect(),
        }
    }

    /// Restricts evaluation to the ground truths accepted by `keep`. The
    /// others are ignored: detections matched to them leave the ledger and
    /// they never count as false negatives.
    pub fn restricted_to(&self, keep: impl Fn(u64) -> bool) -> MatchSet {
        MatchSet {
            image_id: self.image_id,
            detections: self
                .detections
                .iter()
                .filter(|d| d.matched.is_none_or(|m| keep(m.gt_id)))
                .cloned()
                .collect(),
            gt_ids: self.gt_ids.iter().copied().filter(|&g| keep(g)).collect(),
        }
    }
}

/// Greedy matching of one image's detections to its ground truth.
///
/// Excluded ground truths are skipped. Detections beyond the per-image limit
/// (by score) are dropped. A detection only matches when its best available
/// OKS is strictly positive.
pub fn match_image(
    dets: &[&Detection],
    gts: &[&GtInstance],
    schema: &KeypointSchema,
    config: &EvalConfig,
) -> Result<MatchSet> {
    let mut image_ids = dets
        .iter()
        .map(|d| d.image_id)
        .chain(gts.iter().map(|g| g.image_id));
    let image_id = image_ids.next().unwrap_or_default();
    if let Some(other) = image_ids.find(|&id| id != image_id) {
        return Err(Error::MixedImageIds(image_id, other));
    }

    let mut gts: Vec<&GtInstance> = gts.iter().copied().filter(|g| !g.is_excluded()).collect();
    gts.sort_by_key(|g| g.id);
    let mut order: Vec<&Detection> = dets.to_vec();
    order.sort_by(|a, b| score_order(a, b));
    order.truncate(config.max_detections_per_image);

    let mut taken = vec![false; gts.len()];
    let detections = order
        .iter()
        .enumerate()
        .map(|(rank, det)| {
            let mut best: Option<(usize, f64)> = None;
            for (gi, gt) in gts.iter().enumerate() {
                if taken[gi] {
                    continue;
                }
                let o = oks_unchecked(det, gt, schema);
                if o > 0.0 && best.is_none_or(|(_, b)| o > b) {
                    best = Some((gi, o));
                }
            }
            let matched = best.map(|(gi, o)| {
                taken[gi] = true;
                GtMatch {
                    gt_id: gts[gi].id,
                    oks: o,
                }
            });
            EvaluatedDetection {
                detection_id: det.id,
                score: det.score,
                order: rank,
                matched,
            }
        })
        .collect();

    Ok(MatchSet {
        image_id,
        detections,
        gt_ids: gts.iter().map(|g| g.id).collect(),
    })
}

/// Matches every image, in ascending image id order. Images are processed in
/// parallel; the output order does not depend on scheduling.
pub fn match_all(
    dets: &[Detection],
    gts: &[GtInstance],
    schema: &KeypointSchema,
    config: &EvalConfig,
) -> Vec<MatchSet> {
    by_image(dets, gts)
        .par_iter()
        .map(|g| match_image(&g.dets, &g.gts, schema, config).expect("grouped by image"))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdOutcome {
    pub true_positives: Vec<MatchedPair>,
    pub false_positives: Vec<u64>,
    pub false_negatives: Vec<u64>,
}

/// Splits a match set into TP pairs, FP detections and FN ground truths at
/// threshold `t`. A pair below threshold yields both an FP and an FN.
pub fn classify_at_threshold(ms: &MatchSet, t: f64) -> ThresholdOutcome {
    let mut out = ThresholdOutcome {
        true_positives: Vec::new(),
        false_positives: Vec::new(),
        false_negatives: Vec::new(),
    };
    let mut covered = HashSet::new();
    for d in &ms.detections {
        match d.matched {
            Some(m) if m.oks >= t => {
                covered.insert(m.gt_id);
                out.true_positives.push(MatchedPair {
                    detection_id: d.detection_id,
                    gt_id: m.gt_id,
                    oks: m.oks,
                    order: d.order,
                });
            }
            _ => out.false_positives.push(d.detection_id),
        }
    }
    out.false_negatives = ms
        .gt_ids
        .iter()
        .copied()
        .filter(|g| !covered.contains(g))
        .collect();
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub recall: f64,
    pub precision: f64,
}

/// PR summary at one OKS threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub threshold: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_count: usize,
    /// Interpolated precision on the recall grid.
    pub pr_samples: Vec<PrPoint>,
    pub ap: f64,
    /// Recall with all evaluated detections, i.e. AR at the per-image limit.
    pub recall: f64,
}

impl EvalResult {
    /// Result for a ledger with neither detections nor ground truth left,
    /// which happens once every error has been removed.
    pub(crate) fn vacuous(threshold: f64, config: &EvalConfig) -> Self {
        EvalResult {
            threshold,
            tp: 0,
            fp: 0,
            fn_count: 0,
            pr_samples: config
                .recall_grid()
                .into_iter()
                .map(|recall| PrPoint {
                    recall,
                    precision: 1.0,
                })
                .collect(),
            ap: 1.0,
            recall: 1.0,
        }
    }
}

/// Precision/recall and interpolated AP at threshold `t` over all images.
///
/// Detections are ranked globally by score (ties by ascending id). The
/// interpolated precision at recall `r` is the maximum precision at any rank
/// with recall `>= r`, and AP is its mean over the recall grid.
pub fn pr_and_ap(sets: &[MatchSet], t: f64, config: &EvalConfig) -> Result<EvalResult> {
    let n_gt: usize = sets.iter().map(|s| s.gt_ids.len()).sum();
    if n_gt == 0 {
        return Err(Error::NoGroundTruth);
    }
    let mut ranked: Vec<(f64, u64, bool)> = sets
        .iter()
        .flat_map(|s| &s.detections)
        .map(|d| (d.score, d.detection_id, d.is_true_positive(t)))
        .collect();
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));

    let mut recall = Vec::with_capacity(ranked.len());
    let mut precision = Vec::with_capacity(ranked.len());
    let (mut tp, mut fp) = (0usize, 0usize);
    for &(_, _, is_tp) in &ranked {
        if is_tp {
            tp += 1;
        } else {
            fp += 1;
        }
        recall.push(tp as f64 / n_gt as f64);
        precision.push(tp as f64 / (tp + fp) as f64);
    }
    for i in (0..precision.len().saturating_sub(1)).rev() {
        precision[i] = precision[i].max(precision[i + 1]);
    }

    let pr_samples: Vec<PrPoint> = config
        .recall_grid()
        .into_iter()
        .map(|r| {
            let idx = recall.partition_point(|&x| x < r);
            PrPoint {
                recall: r,
                precision: precision.get(idx).copied().unwrap_or(0.0),
            }
        })
        .collect();
    let ap = pr_samples.iter().map(|p| p.precision).sum::<f64>() / pr_samples.len() as f64;

    Ok(EvalResult {
        threshold: t,
        tp,
        fp,
        fn_count: n_gt - tp,
        pr_samples,
        ap,
        recall: tp as f64 / n_gt as f64,
    })
}

/// [`pr_and_ap`] that tolerates a ledger without ground truth: AP is 1 when
/// nothing is left at all and 0 when only false positives remain.
pub(crate) fn pr_and_ap_allow_empty(
    sets: &[MatchSet],
    t: f64,
    config: &EvalConfig,
) -> Result<EvalResult> {
    let has_gt = sets.iter().any(|s| !s.gt_ids.is_empty());
    let has_dets = sets.iter().any(|s| !s.detections.is_empty());
    match (has_gt, has_dets) {
        (true, _) => pr_and_ap(sets, t, config),
        (false, false) => Ok(EvalResult::vacuous(t, config)),
        (false, true) => {
            let fp = sets.iter().map(|s| s.detections.len()).sum();
            let mut r = EvalResult::vacuous(t, config);
            r.fp = fp;
            r.ap = 0.0;
            r.recall = 0.0;
            r.pr_samples.iter_mut().for_each(|p| p.precision = 0.0);
            Ok(r)
        }
    }
}

/// Recall at threshold `t` keeping only each image's top `k` detections.
/// Greedy matching is prefix-stable, so the stored order is enough.
pub fn average_recall(sets: &[MatchSet], t: f64, k: usize) -> f64 {
    let n_gt: usize = sets.iter().map(|s| s.gt_ids.len()).sum();
    if n_gt == 0 {
        return 0.0;
    }
    let hits: usize = sets
        .iter()
        .map(|s| {
            s.detections
                .iter()
                .filter(|d| d.order < k && d.is_true_positive(t))
                .count()
        })
        .sum();
    hits as f64 / n_gt as f64
}

/// AP averaged over the configured OKS thresholds.
pub fn coco_ap(sets: &[MatchSet], config: &EvalConfig) -> Result<f64> {
    let mut sum = 0.0;
    for &t in &config.oks_thresholds {
        sum += pr_and_ap(sets, t, config)?.ap;
    }
    Ok(sum / config.oks_thresholds.len() as f64)
}

/// AR at the per-image detection limit averaged over the OKS thresholds.
pub fn coco_ar(sets: &[MatchSet], config: &EvalConfig) -> Result<f64> {
    if sets.iter().all(|s| s.gt_ids.is_empty()) {
        return Err(Error::NoGroundTruth);
    }
    let sum: f64 = config
        .oks_thresholds
        .iter()
        .map(|&t| average_recall(sets, t, config.max_detections_per_image))
        .sum();
    Ok(sum / config.oks_thresholds.len() as f64)
}

/// Standard evaluation at every configured threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub match_sets: Vec<MatchSet>,
    pub results: Vec<EvalResult>,
    pub coco_ap: f64,
    pub coco_ar: f64,
}

impl Evaluation {
    pub fn at(&self, t: f64) -> Option<&EvalResult> {
        self.results
            .iter()
            .find(|r| (r.threshold - t).abs() < 1e-12)
    }
}

pub fn evaluate_match_sets(match_sets: Vec<MatchSet>, config: &EvalConfig) -> Result<Evaluation> {
    let results = config
        .oks_thresholds
        .iter()
        .map(|&t| pr_and_ap(&match_sets, t, config))
        .collect::<Result<Vec<_>>>()?;
    let coco_ap = results.iter().map(|r| r.ap).sum::<f64>() / results.len() as f64;
    let coco_ar = results.iter().map(|r| r.recall).sum::<f64>() / results.len() as f64;
    Ok(Evaluation {
        match_sets,
        results,
        coco_ap,
        coco_ar,
    })
}

pub fn evaluate(
    dets: &[Detection],
    gts: &[GtInstance],
    schema: &KeypointSchema,
    config: &EvalConfig,
) -> Result<Evaluation> {
    config.validate()?;
    evaluate_match_sets(match_all(dets, gts, schema, config), config)
}
