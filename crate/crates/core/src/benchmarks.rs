//! Stratification of ground truth into occlusion/crowding and size
//! benchmarks, and per-benchmark evaluation.
//!
//! Occlusion is measured by the number of labeled keypoints and crowding by
//! the number of other people whose box overlaps with IoU at least
//! `iou_threshold`. Together they give the occlusion cells (twelve with the
//! defaults). Size cells group instances by area; instances smaller than the
//! first size bin belong to none.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data_model::{Detection, EvalConfig, GtInstance, KeypointSchema};
use crate::index::by_image;
use crate::matching::{evaluate_match_sets, match_all, Evaluation, MatchSet};
use crate::taxonomy::{classify_matches, error_breakdown, DetectionLabels, ErrorBreakdown};
use crate::{Error, Result};

/// Inclusive integer range; `max: None` is unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountRange {
    pub min: usize,
    pub max: Option<usize>,
}

impl CountRange {
    pub fn new(min: usize, max: Option<usize>) -> Self {
        Self { min, max }
    }

    pub fn contains(&self, v: usize) -> bool {
        v >= self.min && self.max.is_none_or(|m| v <= m)
    }

    pub fn label(&self) -> String {
        match self.max {
            Some(m) if m == self.min => format!("{m}"),
            Some(m) => format!("{}-{}", self.min, m),
            None => format!("{}+", self.min),
        }
    }
}

/// Half-open area range `[min, max)`; `max: None` is unbounded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaRange {
    pub name: String,
    pub min: f64,
    pub max: Option<f64>,
}

impl AreaRange {
    pub fn contains(&self, area: f64) -> bool {
        area >= self.min && self.max.is_none_or(|m| area < m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSpec {
    pub visibility_bins: Vec<CountRange>,
    pub overlap_bins: Vec<CountRange>,
    pub size_bins: Vec<AreaRange>,
    pub iou_threshold: f64,
}

impl Default for BenchmarkSpec {
    fn default() -> Self {
        Self::for_keypoints(17)
    }
}

impl BenchmarkSpec {
    /// Four visibility bins of equal width (the last one possibly shorter),
    /// or one per count when there are fewer than four keypoints.
    pub fn for_keypoints(num_keypoints: usize) -> Self {
        let width = num_keypoints.div_ceil(4).max(1);
        let visibility_bins = (1..=num_keypoints)
            .step_by(width)
            .map(|lo| CountRange::new(lo, Some((lo + width - 1).min(num_keypoints))))
            .collect();
        let area = |name: &str, lo: f64, hi: Option<f64>| AreaRange {
            name: name.into(),
            min: lo * lo,
            max: hi.map(|h| h * h),
        };
        Self {
            visibility_bins,
            overlap_bins: vec![
                CountRange::new(0, Some(0)),
                CountRange::new(1, Some(2)),
                CountRange::new(3, None),
            ],
            size_bins: vec![
                area("medium", 32.0, Some(64.0)),
                area("large", 64.0, Some(96.0)),
                area("xlarge", 96.0, Some(128.0)),
                area("xxlarge", 128.0, None),
            ],
            iou_threshold: 0.1,
        }
    }

    /// Checks that the bins are disjoint and cover their domains: visibility
    /// `1..=num_keypoints`, overlap `0..`, and size from the first lower
    /// bound upwards.
    pub fn validate(&self, num_keypoints: usize) -> Result<()> {
        let invalid = |m: String| Err(Error::InvalidConfig(m));
        let mut next = 1;
        for b in &self.visibility_bins {
            if b.min != next || b.max.is_none_or(|m| m < b.min) {
                return invalid(format!("visibility bin {} breaks the tiling", b.label()));
            }
            next = b.max.unwrap_or(0) + 1;
        }
        if next != num_keypoints + 1 {
            return invalid(format!("visibility bins must cover 1-{num_keypoints}"));
        }
        let mut next = Some(0);
        for b in &self.overlap_bins {
            if Some(b.min) != next || b.max.is_some_and(|m| m < b.min) {
                return invalid(format!("overlap bin {} breaks the tiling", b.label()));
            }
            next = b.max.map(|m| m + 1);
        }
        if next.is_some() {
            return invalid("the last overlap bin must be unbounded".into());
        }
        for w in self.size_bins.windows(2) {
            if w[0].max != Some(w[1].min) {
                return invalid(format!(
                    "size bins {} and {} are not adjacent",
                    w[0].name, w[1].name
                ));
            }
        }
        match self.size_bins.last() {
            Some(last) if last.max.is_none() => {}
            _ => return invalid("the last size bin must be unbounded".into()),
        }
        if self
            .size_bins
            .iter()
            .any(|b| b.max.is_some_and(|m| m <= b.min))
        {
            return invalid("empty size bin".into());
        }
        if !(0.0..=1.0).contains(&self.iou_threshold) {
            return invalid(format!(
                "IoU threshold {} outside [0, 1]",
                self.iou_threshold
            ));
        }
        Ok(())
    }
}

/// Other evaluable people in the image whose box overlaps `gt` with IoU at
/// least `iou_threshold`.
pub fn overlap_count(gt: &GtInstance, image_gts: &[&GtInstance], iou_threshold: f64) -> usize {
    image_gts
        .iter()
        .filter(|o| o.id != gt.id && !o.is_excluded())
        .filter(|o| gt.bbox.iou(&o.bbox) >= iou_threshold)
        .count()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcclusionCell {
    pub id: String,
    pub visibility: CountRange,
    pub overlap: CountRange,
    pub gt_ids: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeCell {
    pub id: String,
    pub range: AreaRange,
    pub gt_ids: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    /// Visibility-major order.
    pub occlusion: Vec<OcclusionCell>,
    pub size: Vec<SizeCell>,
    /// Evaluable instances smaller than every size bin.
    pub below_size: Vec<u64>,
}

impl Partition {
    /// Benchmark id to sorted ground-truth ids.
    pub fn manifest(&self) -> BTreeMap<String, Vec<u64>> {
        self.occlusion
            .iter()
            .map(|c| (c.id.clone(), c.gt_ids.clone()))
            .chain(self.size.iter().map(|c| (c.id.clone(), c.gt_ids.clone())))
            .collect()
    }
}

pub fn partition(
    gts: &[GtInstance],
    spec: &BenchmarkSpec,
    schema: &KeypointSchema,
) -> Result<Partition> {
    spec.validate(schema.len())?;
    let groups = by_image(&[], gts);
    // (gt id, visible, overlaps, area) in image then id order
    let features: Vec<(u64, usize, usize, f64)> = groups
        .par_iter()
        .flat_map_iter(|g| {
            g.gts
                .iter()
                .map(|gt| {
                    (
                        gt.id,
                        gt.num_visible(),
                        overlap_count(gt, &g.gts, spec.iou_threshold),
                        gt.area,
                    )
                })
                .collect::<Vec<_>>()
        })
        .collect();

    let mut occlusion: Vec<OcclusionCell> = spec
        .visibility_bins
        .iter()
        .flat_map(|v| {
            spec.overlap_bins.iter().map(move |o| OcclusionCell {
                id: format!("vis{}_ovl{}", v.label(), o.label()),
                visibility: *v,
                overlap: *o,
                gt_ids: Vec::new(),
            })
        })
        .collect();
    let mut size: Vec<SizeCell> = spec
        .size_bins
        .iter()
        .map(|b| SizeCell {
            id: b.name.clone(),
            range: b.clone(),
            gt_ids: Vec::new(),
        })
        .collect();
    let mut below_size = Vec::new();
    let n_overlap = spec.overlap_bins.len();
    for (id, visible, overlaps, area) in features {
        let vi = spec
            .visibility_bins
            .iter()
            .position(|b| b.contains(visible));
        let oi = spec.overlap_bins.iter().position(|b| b.contains(overlaps));
        let (Some(vi), Some(oi)) = (vi, oi) else {
            return Err(Error::InvalidConfig(format!(
                "ground truth {id} falls in no occlusion cell"
            )));
        };
        occlusion[vi * n_overlap + oi].gt_ids.push(id);
        match spec.size_bins.iter().position(|b| b.contains(area)) {
            Some(si) => size[si].gt_ids.push(id),
            None => below_size.push(id),
        }
    }
    for c in &mut occlusion {
        c.gt_ids.sort_unstable();
    }
    for c in &mut size {
        c.gt_ids.sort_unstable();
    }
    below_size.sort_unstable();
    Ok(Partition {
        occlusion,
        size,
        below_size,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkEval {
    /// True when the cell has no ground truth; `evaluation` is then absent.
    pub empty: bool,
    pub evaluation: Option<Evaluation>,
    pub errors: ErrorBreakdown,
}

/// Evaluation restricted to `cell`. Ground truths outside it are ignored:
/// detections matched to them leave the ledger and they are never missed.
pub fn benchmark_eval_from(
    sets: &[MatchSet],
    labels: &[DetectionLabels],
    cell: &BTreeSet<u64>,
    schema: &KeypointSchema,
    config: &EvalConfig,
) -> Result<BenchmarkEval> {
    let restricted: Vec<MatchSet> = sets
        .iter()
        .map(|s| s.restricted_to(|g| cell.contains(&g)))
        .collect();
    let cell_labels: Vec<DetectionLabels> = labels
        .iter()
        .filter(|l| cell.contains(&l.gt_id))
        .cloned()
        .collect();
    let errors = error_breakdown(&cell_labels, schema);
    if restricted.iter().all(|s| s.gt_ids.is_empty()) {
        return Ok(BenchmarkEval {
            empty: true,
            evaluation: None,
            errors,
        });
    }
    Ok(BenchmarkEval {
        empty: false,
        evaluation: Some(evaluate_match_sets(restricted, config)?),
        errors,
    })
}

pub fn benchmark_eval(
    dets: &[Detection],
    gts: &[GtInstance],
    cell: &BTreeSet<u64>,
    schema: &KeypointSchema,
    config: &EvalConfig,
) -> Result<BenchmarkEval> {
    config.validate()?;
    let sets = match_all(dets, gts, schema, config);
    let labels = classify_matches(dets, gts, &sets, schema, config);
    benchmark_eval_from(&sets, &labels, cell, schema, config)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivityImpact {
    /// Spread of the metric over cells: max - min.
    pub sensitivity: f64,
    /// Headroom of the best cell over the overall value: max - overall.
    pub impact: f64,
}

pub fn sensitivity_impact(values: &[f64], overall: f64) -> Result<SensitivityImpact> {
    if values.is_empty() {
        return Err(Error::InvalidConfig(
            "sensitivity needs at least one value".into(),
        ));
    }
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(SensitivityImpact {
        sensitivity: max - min,
        impact: max - overall,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub id: String,
    pub family: String,
    pub gt_count: usize,
    pub result: BenchmarkEval,
}

impl CellReport {
    pub fn coco_ap(&self) -> Option<f64> {
        self.result.evaluation.as_ref().map(|e| e.coco_ap)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub partition: Partition,
    pub cells: Vec<CellReport>,
    /// Over the non-empty occlusion cells' cocoAP.
    pub occlusion_sensitivity: Option<SensitivityImpact>,
    /// Over the non-empty size cells' cocoAP.
    pub size_sensitivity: Option<SensitivityImpact>,
}

/// Partitions the ground truth and evaluates every cell.
pub fn evaluate_benchmarks(
    sets: &[MatchSet],
    labels: &[DetectionLabels],
    gts: &[GtInstance],
    overall_coco_ap: f64,
    spec: &BenchmarkSpec,
    schema: &KeypointSchema,
    config: &EvalConfig,
) -> Result<BenchmarkReport> {
    let partition = partition(gts, spec, schema)?;
    let jobs: Vec<(&str, &str, &[u64])> = partition
        .occlusion
        .iter()
        .map(|c| ("occlusion", c.id.as_str(), c.gt_ids.as_slice()))
        .chain(
            partition
                .size
                .iter()
                .map(|c| ("size", c.id.as_str(), c.gt_ids.as_slice())),
        )
        .collect();
    let cells = jobs
        .par_iter()
        .map(|&(family, id, ids)| {
            let cell: BTreeSet<u64> = ids.iter().copied().collect();
            Ok(CellReport {
                id: id.to_string(),
                family: family.to_string(),
                gt_count: ids.len(),
                result: benchmark_eval_from(sets, labels, &cell, schema, config)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let spread = |family: &str| {
        let values: Vec<f64> = cells
            .iter()
            .filter(|c| c.family == family)
            .filter_map(CellReport::coco_ap)
            .collect();
        sensitivity_impact(&values, overall_coco_ap).ok()
    };
    Ok(BenchmarkReport {
        occlusion_sensitivity: spread("occlusion"),
        size_sensitivity: spread("size"),
        partition,
        cells,
    })
}
