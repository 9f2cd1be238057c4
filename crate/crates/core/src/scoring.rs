//! Scoring errors, the optimal-score oracle, keypoint soft-NMS and score
//! statistics.
//!
//! A detection belongs to the ground truth it overlaps most (lowest id on
//! ties) when that OKS reaches `proximity_threshold`. A scoring error is a
//! pair of detections of the same person where the higher-scored one has the
//! lower OKS.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data_model::{Detection, EvalConfig, GtInstance, KeypointSchema};
use crate::index::{by_image, score_order, ImageGroup};
use crate::matching::match_all;
use crate::similarity::{detection_oks, oks_unchecked};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoringError {
    pub image_id: u64,
    pub gt_id: u64,
    /// The detection with the higher score and the lower OKS.
    pub higher_scored: u64,
    pub lower_scored: u64,
}

/// Index and OKS of the best ground truth of `det` in the group, if any.
fn best_gt(
    det: &Detection,
    group: &ImageGroup<'_>,
    schema: &KeypointSchema,
) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (gi, g) in group.gts.iter().enumerate() {
        let o = oks_unchecked(det, g, schema);
        if best.is_none_or(|(_, b)| o > b) {
            best = Some((gi, o));
        }
    }
    best
}

fn image_scoring_errors(
    group: &ImageGroup<'_>,
    schema: &KeypointSchema,
    config: &EvalConfig,
) -> Vec<ScoringError> {
    let mut owned: Vec<Vec<(&Detection, f64)>> = vec![Vec::new(); group.gts.len()];
    for d in &group.dets {
        if let Some((gi, o)) = best_gt(d, group, schema) {
            if o >= config.proximity_threshold {
                owned[gi].push((d, o));
            }
        }
    }
    let mut errors = Vec::new();
    for (gi, mut list) in owned.into_iter().enumerate() {
        list.sort_by(|a, b| score_order(a.0, b.0));
        for (x, &(hi, hi_oks)) in list.iter().enumerate() {
            for &(lo, lo_oks) in &list[x + 1..] {
                if hi.score > lo.score && hi_oks < lo_oks {
                    errors.push(ScoringError {
                        image_id: group.image_id,
                        gt_id: group.gts[gi].id,
                        higher_scored: hi.id,
                        lower_scored: lo.id,
                    });
                }
            }
        }
    }
    errors
}

pub fn find_scoring_errors(
    dets: &[Detection],
    gts: &[GtInstance],
    schema: &KeypointSchema,
    config: &EvalConfig,
) -> Vec<ScoringError> {
    by_image(dets, gts)
        .par_iter()
        .flat_map_iter(|g| image_scoring_errors(g, schema, config))
        .collect()
}

/// Replaces every score with the best OKS the detection reaches with any
/// evaluable ground truth of its image, or 0 when there is none.
pub fn optimal_rescore(
    dets: &[Detection],
    gts: &[GtInstance],
    schema: &KeypointSchema,
) -> Vec<Detection> {
    let groups = by_image(&[], gts);
    let gts_by_image: HashMap<u64, &ImageGroup<'_>> =
        groups.iter().map(|g| (g.image_id, g)).collect();
    dets.par_iter()
        .map(|d| {
            let score = gts_by_image
                .get(&d.image_id)
                .and_then(|g| best_gt(d, g, schema))
                .map_or(0.0, |(_, o)| o);
            Detection { score, ..d.clone() }
        })
        .collect()
}

/// Rescored detections in input order, with diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Rescored {
    pub detections: Vec<Detection>,
    pub warnings: Vec<String>,
}

fn image_soft_nms(
    dets: &[&Detection],
    schema: &KeypointSchema,
    sigma: f64,
) -> (Vec<(u64, f64)>, Vec<String>) {
    let mut remaining: Vec<Detection> = dets.iter().map(|d| (*d).clone()).collect();
    let mut out = Vec::with_capacity(remaining.len());
    let mut warnings = Vec::new();
    while !remaining.is_empty() {
        remaining.sort_by(score_order);
        let kept = remaining.remove(0);
        match remaining.is_empty() {
            true => {}
            false => {
                let mut degenerate = false;
                for d in &mut remaining {
                    match detection_oks(&kept, d, schema) {
                        Some(o) => d.score *= (-o * o / sigma).exp(),
                        None => degenerate = true,
                    }
                }
                if degenerate {
                    warnings.push(format!(
                        "detection {} has a zero-area keypoint box; no decay applied",
                        kept.id
                    ));
                }
            }
        }
        out.push((kept.id, kept.score));
    }
    (out, warnings)
}

/// Gaussian soft-NMS with keypoint overlap: the highest scored detection of
/// each image is kept and every other detection of that image is decayed by
/// `exp(-o² / sigma)`, where `o` is its OKS against the kept one.
pub fn soft_nms(dets: &[Detection], schema: &KeypointSchema, sigma: f64) -> Result<Rescored> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::NonPositive("soft-NMS sigma"));
    }
    let groups = by_image(dets, &[]);
    let per_image: Vec<_> = groups
        .par_iter()
        .map(|g| image_soft_nms(&g.dets, schema, sigma))
        .collect();
    let mut scores = HashMap::with_capacity(dets.len());
    let mut warnings = Vec::new();
    for (s, w) in per_image {
        scores.extend(s);
        warnings.extend(w);
    }
    let detections = dets
        .iter()
        .map(|d| Detection {
            score: scores[&d.id],
            ..d.clone()
        })
        .collect();
    Ok(Rescored {
        detections,
        warnings,
    })
}

/// Optimal rescoring followed by soft-NMS when `config.soft_nms_sigma` is
/// set.
pub fn rescore(
    dets: &[Detection],
    gts: &[GtInstance],
    schema: &KeypointSchema,
    config: &EvalConfig,
) -> Result<Rescored> {
    let optimal = optimal_rescore(dets, gts, schema);
    match config.soft_nms_sigma {
        Some(sigma) => soft_nms(&optimal, schema, sigma),
        None => Ok(Rescored {
            detections: optimal,
            warnings: Vec::new(),
        }),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramPair {
    /// Scores of detections that are the best match of some ground truth.
    pub best_match: Vec<usize>,
    /// Scores of the remaining detections with OKS at least the proximity
    /// threshold.
    pub other: Vec<usize>,
    /// Shared area of the two histograms after normalizing each to unit mass.
    pub overlap: f64,
}

impl HistogramPair {
    fn build(best: &[f64], other: &[f64], bins: usize) -> Self {
        let best_match = histogram(best, bins);
        let other = histogram(other, bins);
        let nb: usize = best_match.iter().sum();
        let no: usize = other.iter().sum();
        let overlap = if nb == 0 || no == 0 {
            0.0
        } else {
            best_match
                .iter()
                .zip(&other)
                .map(|(&a, &b)| (a as f64 / nb as f64).min(b as f64 / no as f64))
                .sum()
        };
        Self {
            best_match,
            other,
            overlap,
        }
    }
}

/// Histogram over `[0, 1]`; values outside are clamped into the end bins.
fn histogram(values: &[f64], bins: usize) -> Vec<usize> {
    let mut h = vec![0; bins];
    for &v in values {
        let b = ((v.clamp(0.0, 1.0) * bins as f64) as usize).min(bins - 1);
        h[b] += 1;
    }
    h
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreHistograms {
    /// Bin edges, `bins + 1` values from 0 to 1.
    pub edges: Vec<f64>,
    pub original: HistogramPair,
    pub optimal: HistogramPair,
}

/// Score distributions of best-match and other nearby detections under the
/// original and the optimal scores.
pub fn score_histograms(
    dets: &[Detection],
    gts: &[GtInstance],
    schema: &KeypointSchema,
    config: &EvalConfig,
    bins: usize,
) -> Result<ScoreHistograms> {
    if bins < 2 {
        return Err(Error::InvalidConfig(format!(
            "histograms need at least 2 bins, got {bins}"
        )));
    }
    let optimal = optimal_rescore(dets, gts, schema);
    let optimal_score: HashMap<u64, f64> = optimal.iter().map(|d| (d.id, d.score)).collect();

    // (id, is_best_match) for every detection near some ground truth
    let groups = by_image(dets, gts);
    let classes: Vec<(u64, bool)> = groups
        .par_iter()
        .flat_map_iter(|g| {
            let mut dets = g.dets.clone();
            dets.sort_by_key(|d| d.id);
            let table: Vec<Vec<f64>> = dets
                .iter()
                .map(|d| {
                    g.gts
                        .iter()
                        .map(|gt| oks_unchecked(d, gt, schema))
                        .collect()
                })
                .collect();
            let mut best = vec![false; dets.len()];
            for gi in 0..g.gts.len() {
                let mut arg: Option<(usize, f64)> = None;
                for (di, row) in table.iter().enumerate() {
                    if row[gi] > 0.0 && arg.is_none_or(|(_, b)| row[gi] > b) {
                        arg = Some((di, row[gi]));
                    }
                }
                if let Some((di, _)) = arg {
                    best[di] = true;
                }
            }
            dets.iter()
                .zip(table)
                .zip(best)
                .filter_map(|((d, row), is_best)| {
                    let max = row.iter().copied().fold(0.0, f64::max);
                    (is_best || max >= config.proximity_threshold).then_some((d.id, is_best))
                })
                .collect::<Vec<_>>()
        })
        .collect();

    let original_score: HashMap<u64, f64> = dets.iter().map(|d| (d.id, d.score)).collect();
    let split = |scores: &HashMap<u64, f64>| {
        let (mut b, mut o) = (Vec::new(), Vec::new());
        for &(id, is_best) in &classes {
            if is_best {
                b.push(scores[&id]);
            } else {
                o.push(scores[&id]);
            }
        }
        (b, o)
    };
    let (ob, oo) = split(&original_score);
    let (pb, po) = split(&optimal_score);
    Ok(ScoreHistograms {
        edges: (0..=bins).map(|i| i as f64 / bins as f64).collect(),
        original: HistogramPair::build(&ob, &oo, bins),
        optimal: HistogramPair::build(&pb, &po, bins),
    })
}

/// Effect of rescoring on the matching.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RescoreReport {
    pub images_with_detections: usize,
    /// Images whose detections are already ranked by optimal score.
    pub images_with_optimal_order: usize,
    pub scoring_errors: usize,
    /// Change in the number of pairs with OKS at or above the lowest
    /// evaluation threshold after optimal rescoring and soft-NMS.
    pub match_increase: i64,
    /// Ground truths whose matched OKS strictly increased; an unmatched
    /// ground truth counts as OKS 0.
    pub matches_with_oks_improvement: usize,
}

pub fn rescore_report(
    dets: &[Detection],
    gts: &[GtInstance],
    schema: &KeypointSchema,
    config: &EvalConfig,
) -> Result<RescoreReport> {
    let optimal = optimal_rescore(dets, gts, schema);
    let optimal_score: HashMap<u64, f64> = optimal.iter().map(|d| (d.id, d.score)).collect();

    let groups = by_image(dets, gts);
    let images_with_detections = groups.iter().filter(|g| !g.dets.is_empty()).count();
    let images_with_optimal_order = groups
        .iter()
        .filter(|g| !g.dets.is_empty())
        .filter(|g| {
            let mut order = g.dets.clone();
            order.sort_by(|a, b| score_order(a, b));
            order
                .windows(2)
                .all(|w| optimal_score[&w[0].id] >= optimal_score[&w[1].id])
        })
        .count();

    let scoring_errors = find_scoring_errors(dets, gts, schema, config).len();
    let rescored = rescore(dets, gts, schema, config)?.detections;
    let before = match_all(dets, gts, schema, config);
    let after = match_all(&rescored, gts, schema, config);

    let min_t = config
        .oks_thresholds
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let count = |sets: &[crate::matching::MatchSet]| -> i64 {
        sets.iter()
            .flat_map(|s| &s.detections)
            .filter(|d| d.is_true_positive(min_t))
            .count() as i64
    };
    let gt_oks = |sets: &[crate::matching::MatchSet]| -> BTreeMap<u64, f64> {
        sets.iter()
            .flat_map(|s| s.pairs())
            .map(|p| (p.gt_id, p.oks))
            .collect()
    };
    let (ob, oa) = (gt_oks(&before), gt_oks(&after));
    let matches_with_oks_improvement = oa
        .iter()
        .filter(|(g, &a)| a > ob.get(g).copied().unwrap_or(0.0))
        .count();

    Ok(RescoreReport {
        images_with_detections,
        images_with_optimal_order,
        scoring_errors,
        match_increase: count(&after) - count(&before),
        matches_with_oks_improvement,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_model::{BBox, Keypoint, Point};
    use crate::matching::evaluate;
    use proptest::prelude::*;

    // s k = 10, so ks(d) = exp(-d² / 200)
    fn schema() -> KeypointSchema {
        KeypointSchema::new("p", vec!["p".into()], &[], vec![0.1], vec![]).unwrap()
    }

    fn dist_for(ks: f64) -> f64 {
        (-200.0 * ks.ln()).sqrt()
    }

    fn gt(id: u64, image: u64, x: f64) -> GtInstance {
        GtInstance::new(
            id,
            image,
            vec![Keypoint::labeled(x, 0.0)],
            10_000.0,
            BBox::default(),
        )
    }

    fn det(id: u64, image: u64, x: f64, score: f64) -> Detection {
        Detection::new(id, image, vec![Point::new(x, 0.0)], score)
    }

    /// One person, a confident detection with OKS .6 and a less confident
    /// one with OKS .9.
    fn crossed() -> (Vec<Detection>, Vec<GtInstance>) {
        (
            vec![det(1, 1, dist_for(0.6), 0.9), det(2, 1, dist_for(0.9), 0.5)],
            vec![gt(1, 1, 0.0)],
        )
    }

    #[test]
    fn crossed_pair_is_one_error() {
        let (d, g) = crossed();
        let errors = find_scoring_errors(&d, &g, &schema(), &EvalConfig::default());
        assert_eq!(
            errors,
            vec![ScoringError {
                image_id: 1,
                gt_id: 1,
                higher_scored: 1,
                lower_scored: 2
            }]
        );
    }

    #[test]
    fn monotonic_scores_have_no_errors() {
        let d = vec![det(1, 1, dist_for(0.9), 0.9), det(2, 1, dist_for(0.6), 0.5)];
        let g = vec![gt(1, 1, 0.0)];
        assert!(find_scoring_errors(&d, &g, &schema(), &EvalConfig::default()).is_empty());
        let single = vec![det(1, 1, 30.0, 0.2)];
        assert!(find_scoring_errors(&single, &g, &schema(), &EvalConfig::default()).is_empty());
    }

    #[test]
    fn far_detections_are_not_compared() {
        // second detection has OKS below the proximity threshold
        let d = vec![
            det(1, 1, dist_for(0.05), 0.9),
            det(2, 1, dist_for(0.9), 0.5),
        ];
        let g = vec![gt(1, 1, 0.0)];
        assert!(find_scoring_errors(&d, &g, &schema(), &EvalConfig::default()).is_empty());
    }

    #[test]
    fn optimal_scores() {
        let d = vec![
            det(1, 1, 0.0, 0.1),
            det(2, 2, 0.0, 0.7),
            det(3, 1, dist_for(0.6), 0.3),
        ];
        let g = vec![gt(1, 1, 0.0)];
        let r = optimal_rescore(&d, &g, &schema());
        assert_eq!(r[0].score, 1.0);
        assert_eq!(r[1].score, 0.0);
        assert!((r[2].score - 0.6).abs() < 1e-12);
    }

    fn two_point_schema() -> KeypointSchema {
        KeypointSchema::new(
            "pp",
            vec!["a".into(), "b".into()],
            &[],
            vec![0.1, 0.1],
            vec![],
        )
        .unwrap()
    }

    fn two_point(id: u64, x: f64, score: f64) -> Detection {
        Detection::new(
            id,
            1,
            vec![Point::new(x, 0.0), Point::new(x + 30.0, 40.0)],
            score,
        )
    }

    #[test]
    fn identical_detections_decay() {
        let s = two_point_schema();
        let d = vec![two_point(1, 0.0, 0.9), two_point(2, 0.0, 0.8)];
        let r = soft_nms(&d, &s, 0.5).unwrap();
        assert_eq!(r.detections[0].score, 0.9);
        assert!((r.detections[1].score - 0.8 * (-1.0f64 / 0.5).exp()).abs() < 1e-15);
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn distant_and_single_detections_unchanged() {
        let s = two_point_schema();
        let d = vec![two_point(1, 0.0, 0.9), two_point(2, 1e6, 0.8)];
        let r = soft_nms(&d, &s, 0.5).unwrap();
        assert_eq!(r.detections[1].score, 0.8);
        let r = soft_nms(&d[..1], &s, 0.5).unwrap();
        assert_eq!(r.detections, d[..1].to_vec());
        assert!(soft_nms(&d, &s, 0.0).is_err());
    }

    #[test]
    fn degenerate_kept_detection_warns() {
        let s = two_point_schema();
        let flat = Detection::new(1, 1, vec![Point::new(0.0, 0.0), Point::new(10.0, 0.0)], 0.9);
        let d = vec![flat, two_point(2, 0.0, 0.8)];
        let r = soft_nms(&d, &s, 0.5).unwrap();
        assert_eq!(r.detections[1].score, 0.8);
        assert_eq!(r.warnings.len(), 1);
    }

    #[test]
    fn crossed_report() {
        let (d, g) = crossed();
        let r = rescore_report(&d, &g, &schema(), &EvalConfig::default()).unwrap();
        assert_eq!(r.images_with_detections, 1);
        assert_eq!(r.images_with_optimal_order, 0);
        assert_eq!(r.scoring_errors, 1);
        assert_eq!(r.match_increase, 0);
        assert_eq!(r.matches_with_oks_improvement, 1);

        let after = rescore(&d, &g, &schema(), &EvalConfig::default()).unwrap();
        let sets = match_all(&after.detections, &g, &schema(), &EvalConfig::default());
        assert_eq!(sets[0].pairs()[0].detection_id, 2);
    }

    #[test]
    fn optimal_input_report_is_quiet() {
        let g = vec![gt(1, 1, 0.0), gt(2, 1, 500.0)];
        let d = vec![
            det(1, 1, dist_for(0.9), 0.9),
            det(2, 1, 500.0 + dist_for(0.7), 0.7),
        ];
        let config = EvalConfig {
            soft_nms_sigma: None,
            ..EvalConfig::default()
        };
        let r = rescore_report(&d, &g, &schema(), &config).unwrap();
        assert_eq!(r.scoring_errors, 0);
        assert_eq!(r.match_increase, 0);
        assert_eq!(r.matches_with_oks_improvement, 0);
        assert_eq!(r.images_with_optimal_order, 1);

        let empty = rescore_report(&[], &g, &schema(), &config).unwrap();
        assert_eq!(empty, RescoreReport::default());
    }

    #[test]
    fn histograms() {
        let g = vec![gt(1, 1, 0.0)];
        let d = vec![
            det(1, 1, 0.0, 0.2),
            det(2, 1, dist_for(0.05), 0.95),
            det(3, 1, dist_for(0.3), 0.9),
        ];
        let h = score_histograms(&d, &g, &schema(), &EvalConfig::default(), 10).unwrap();
        assert_eq!(h.edges.len(), 11);
        assert_eq!(h.original.best_match[2], 1);
        assert_eq!(h.original.other[9], 1);
        assert_eq!(h.optimal.best_match[9], 1);
        assert_eq!(h.optimal.other[3], 1);
        assert_eq!(h.original.other.iter().sum::<usize>(), 1);
        assert_eq!(h.optimal.overlap, 0.0);
        assert!(score_histograms(&d, &g, &schema(), &EvalConfig::default(), 1).is_err());

        let same = optimal_rescore(&d, &g, &schema());
        let h2 = score_histograms(&same, &g, &schema(), &EvalConfig::default(), 10).unwrap();
        assert_eq!(h2.original, h2.optimal);
    }

    #[test]
    fn optimal_scores_can_lose_ap() {
        // Greedy matching lets the best-scored detection take the person it
        // overlaps most, even if another detection needs that person more.
        // a: OKS .9 with the first person and .8 with the second
        // b: OKS .85 with the first person only
        let g = vec![gt(1, 1, 0.0), gt(2, 1, dist_for(0.9) + dist_for(0.8))];
        let a = det(1, 1, dist_for(0.9), 0.5);
        let b = det(2, 1, -dist_for(0.85), 0.9);
        let config = EvalConfig {
            oks_thresholds: vec![0.8],
            ..EvalConfig::default()
        };
        let s = schema();
        let d = vec![a, b];
        let before = evaluate(&d, &g, &s, &config).unwrap().results[0].ap;
        let after = evaluate(&optimal_rescore(&d, &g, &s), &g, &s, &config)
            .unwrap()
            .results[0]
            .ap;
        assert_eq!(before, 1.0);
        assert!(after < before);
    }

    proptest! {
        #[test]
        fn no_scoring_errors_after_optimal_rescore(
            gx in prop::collection::vec(0.0f64..200.0, 1..4),
            dx in prop::collection::vec((0.0f64..200.0, 0.0f64..1.0), 0..8),
        ) {
            let s = schema();
            let g: Vec<_> = gx.iter().enumerate().map(|(i, &x)| gt(i as u64 + 1, 1, x)).collect();
            let d: Vec<_> = dx.iter().enumerate().map(|(i, &(x, sc))| det(i as u64 + 1, 1, x, sc)).collect();
            let r = optimal_rescore(&d, &g, &s);
            prop_assert!(find_scoring_errors(&r, &g, &s, &EvalConfig::default()).is_empty());
        }

        #[test]
        fn soft_nms_never_raises(
            dx in prop::collection::vec((0.0f64..100.0, 0.0f64..1.0), 1..8),
        ) {
            let s = two_point_schema();
            let d: Vec<_> = dx.iter().enumerate().map(|(i, &(x, sc))| two_point(i as u64 + 1, x, sc)).collect();
            let r = soft_nms(&d, &s, 0.5).unwrap();
            for (a, b) in d.iter().zip(&r.detections) {
                prop_assert!(b.score <= a.score);
            }
            let top = d.iter().min_by(|a, b| score_order(a, b)).unwrap();
            let kept = r.detections.iter().find(|x| x.id == top.id).unwrap();
            prop_assert_eq!(kept.score, top.score);
        }
    }
}
