//! Background errors: detections that match no person (false positives) and
//! people that no detection matches (false negatives), both judged at a
//! fixed OKS threshold.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data_model::{Detection, EvalConfig, GtInstance, ImageRecord, KeypointSchema};
use crate::matching::{classify_at_threshold, match_all, pr_and_ap_allow_empty, MatchSet};
use crate::Result;

/// Thresholds reported by [`background_impact`].
pub const IMPACT_THRESHOLDS: [f64; 3] = [0.5, 0.75, 0.95];

/// Threshold that defines FP and FN for histograms, heatmaps and clutter.
pub const ERROR_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BackgroundImpact {
    pub threshold: f64,
    pub ap: f64,
    /// AP once unmatched people leave the recall denominator.
    pub ap_without_fn: f64,
    /// AP once unmatched detections are dropped.
    pub ap_without_fp: f64,
}

impl BackgroundImpact {
    pub fn fn_gain(&self) -> f64 {
        self.ap_without_fn - self.ap
    }

    pub fn fp_gain(&self) -> f64 {
        self.ap_without_fp - self.ap
    }
}

pub fn background_impact_from_sets(
    sets: &[MatchSet],
    config: &EvalConfig,
) -> Result<Vec<BackgroundImpact>> {
    IMPACT_THRESHOLDS
        .iter()
        .map(|&t| {
            let without_fn: Vec<MatchSet> =
                sets.iter().map(|s| s.without_false_negatives(t)).collect();
            let without_fp: Vec<MatchSet> =
                sets.iter().map(|s| s.without_false_positives(t)).collect();
            Ok(BackgroundImpact {
                threshold: t,
                ap: crate::matching::pr_and_ap(sets, t, config)?.ap,
                ap_without_fn: pr_and_ap_allow_empty(&without_fn, t, config)?.ap,
                ap_without_fp: pr_and_ap_allow_empty(&without_fp, t, config)?.ap,
            })
        })
        .collect()
}

pub fn background_impact(
    dets: &[Detection],
    gts: &[GtInstance],
    schema: &KeypointSchema,
    config: &EvalConfig,
) -> Result<Vec<BackgroundImpact>> {
    background_impact_from_sets(&match_all(dets, gts, schema, config), config)
}

/// Upper edges of the FP-area bins; the first bin starts at 0.
pub const AREA_EDGES: [f64; 5] = [
    32.0 * 32.0,
    64.0 * 64.0,
    96.0 * 96.0,
    128.0 * 128.0,
    f64::INFINITY,
];

pub const AREA_LABELS: [&str; 5] = ["small", "medium", "large", "xlarge", "xxlarge"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FpAreaHistogram {
    /// Lowest qualifying score, absent without detections.
    pub score_cutoff: Option<f64>,
    pub counts: Vec<usize>,
    pub detection_ids: Vec<u64>,
}

/// Score at the 80th percentile: with scores sorted ascending, the one at
/// index `floor(0.8 n)`.
fn top_fifth_cutoff(scores: &mut [f64]) -> Option<f64> {
    if scores.is_empty() {
        return None;
    }
    scores.sort_by(f64::total_cmp);
    let idx = ((0.8 * scores.len() as f64).floor() as usize).min(scores.len() - 1);
    Some(scores[idx])
}

/// Keypoint-box areas of confident false positives: detections that are not
/// true positives at [`ERROR_THRESHOLD`] and score in the top fifth of all
/// detections.
pub fn high_conf_fp_histogram(dets: &[Detection], sets: &[MatchSet]) -> FpAreaHistogram {
    let mut scores: Vec<f64> = dets.iter().map(|d| d.score).collect();
    let score_cutoff = top_fifth_cutoff(&mut scores);
    let mut counts = vec![0; AREA_EDGES.len()];
    let mut detection_ids = Vec::new();
    if let Some(cutoff) = score_cutoff {
        let by_id: HashMap<u64, &Detection> = dets.iter().map(|d| (d.id, d)).collect();
        for s in sets {
            for fp in classify_at_threshold(s, ERROR_THRESHOLD).false_positives {
                let Some(d) = by_id.get(&fp) else { continue };
                if d.score < cutoff {
                    continue;
                }
                let area = d.keypoint_bbox().map_or(0.0, |b| b.area());
                let bin = AREA_EDGES
                    .iter()
                    .position(|&e| area < e)
                    .unwrap_or(AREA_EDGES.len() - 1);
                counts[bin] += 1;
                detection_ids.push(fp);
            }
        }
    }
    FpAreaHistogram {
        score_cutoff,
        counts,
        detection_ids,
    }
}

/// Grid (rows, cols) used when none is requested.
pub const DEFAULT_HEATMAP_GRID: (usize, usize) = (128, 128);

/// Accumulated false-negative masks in normalized image coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub rows: usize,
    pub cols: usize,
    /// Row-major counts of false negatives covering each cell.
    pub counts: Vec<f64>,
    /// `counts` divided by its maximum, all zero when empty.
    pub normalized: Vec<f64>,
    pub warnings: Vec<String>,
}

impl Heatmap {
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.counts[row * self.cols + col]
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }
}

/// Rasterizes the mask of every false negative (its bounding box when there
/// is no mask) by sampling the center of each grid cell.
pub fn fn_heatmap(
    gts: &[GtInstance],
    sets: &[MatchSet],
    images: &[ImageRecord],
    grid: (usize, usize),
) -> Heatmap {
    let (rows, cols) = grid;
    let fn_ids: BTreeSet<u64> = sets
        .iter()
        .flat_map(|s| classify_at_threshold(s, ERROR_THRESHOLD).false_negatives)
        .collect();
    let image_dims: HashMap<u64, &ImageRecord> = images.iter().map(|i| (i.id, i)).collect();
    let misses: Vec<&GtInstance> = gts.iter().filter(|g| fn_ids.contains(&g.id)).collect();

    let layers: Vec<std::result::Result<Vec<f64>, String>> = misses
        .par_iter()
        .map(|g| {
            let img = image_dims.get(&g.image_id).ok_or_else(|| {
                format!("ground truth {}: image {} has no size", g.id, g.image_id)
            })?;
            let shape = g.segmentation.as_ref().and_then(|s| s.shape());
            let area = g.bbox.area();
            if shape.is_none() && (area.is_nan() || area <= 0.0) {
                return Err(format!("ground truth {} has neither mask nor box", g.id));
            }
            let mut layer = vec![0.0; rows * cols];
            for r in 0..rows {
                let y = (r as f64 + 0.5) / rows as f64 * img.height as f64;
                for c in 0..cols {
                    let x = (c as f64 + 0.5) / cols as f64 * img.width as f64;
                    let inside = match &shape {
                        Some(m) => m.contains(x, y),
                        None => g.bbox.contains(x, y),
                    };
                    if inside {
                        layer[r * cols + c] = 1.0;
                    }
                }
            }
            Ok(layer)
        })
        .collect();

    let mut counts = vec![0.0; rows * cols];
    let mut warnings = Vec::new();
    for layer in layers {
        match layer {
            Ok(l) => counts.iter_mut().zip(l).for_each(|(a, b)| *a += b),
            Err(w) => warnings.push(w),
        }
    }
    let max = counts.iter().copied().fold(0.0, f64::max);
    let normalized = counts
        .iter()
        .map(|&v| if max > 0.0 { v / max } else { 0.0 })
        .collect();
    Heatmap {
        rows,
        cols,
        counts,
        normalized,
        warnings,
    }
}

/// Mean number of annotated people per image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClutterStats {
    pub images_with_fp: Option<f64>,
    pub images_with_fn: Option<f64>,
    pub all_images: Option<f64>,
}

/// People are counted as non-crowd annotations. Images without any
/// annotation or detection are not seen and do not contribute.
pub fn clutter_stats(gts: &[GtInstance], sets: &[MatchSet]) -> ClutterStats {
    let mut people: BTreeMap<u64, usize> = BTreeMap::new();
    for g in gts {
        *people.entry(g.image_id).or_default() += usize::from(!g.iscrowd);
    }
    for s in sets {
        people.entry(s.image_id).or_default();
    }
    let mut with_fp = Vec::new();
    let mut with_fn = Vec::new();
    for s in sets {
        let outcome = classify_at_threshold(s, ERROR_THRESHOLD);
        if !outcome.false_positives.is_empty() {
            with_fp.push(people[&s.image_id]);
        }
        if !outcome.false_negatives.is_empty() {
            with_fn.push(people[&s.image_id]);
        }
    }
    let mean =
        |v: &[usize]| (!v.is_empty()).then(|| v.iter().sum::<usize>() as f64 / v.len() as f64);
    let all: Vec<usize> = people.values().copied().collect();
    ClutterStats {
        images_with_fp: mean(&with_fp),
        images_with_fn: mean(&with_fn),
        all_images: mean(&all),
    }
}
