//! Keypoint similarity (ks), Object Keypoint Similarity (OKS) and
//! calibration of the per-keypoint constants.
//!
//! `ks = exp(-d² / (2 s² k²))` where `d` is the prediction to ground-truth
//! distance, `s = sqrt(area)` the instance scale and `k` the per-type
//! constant. OKS is the mean of ks over the labeled keypoints of the ground
//! truth.

use serde::{Deserialize, Serialize};

use crate::data_model::{Detection, GtInstance, KeypointSchema, Point};
use crate::{Error, Result};

fn check_positive(value: f64, what: &'static str) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::NonPositive(what))
    }
}

#[inline]
pub(crate) fn ks_from_distance_sq(d2: f64, scale: f64, k: f64) -> f64 {
    (-d2 / (2.0 * scale * scale * k * k)).exp()
}

/// Similarity in `[0, 1]` between a predicted and an annotated keypoint.
pub fn keypoint_similarity(pred: Point, gt: Point, scale: f64, k: f64) -> Result<f64> {
    check_positive(scale, "scale")?;
    check_positive(k, "k")?;
    Ok(ks_from_distance_sq(pred.distance_sq(&gt), scale, k))
}

/// Distance from a ground-truth keypoint at which ks equals `target`.
pub fn ks_radius(target: f64, scale: f64, k: f64) -> Result<f64> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::SimilarityOutOfRange(target));
    }
    check_positive(scale, "scale")?;
    check_positive(k, "k")?;
    Ok(radius_unchecked(target, scale, k))
}

#[inline]
pub(crate) fn radius_unchecked(target: f64, scale: f64, k: f64) -> f64 {
    scale * k * (-2.0 * target.ln()).sqrt()
}

/// ks of detection keypoint `i` against keypoint `j` of `gt`, using the
/// scale of `gt` and the constant of `j`.
#[inline]
pub(crate) fn ks_against(pred: Point, gt: &GtInstance, j: usize, schema: &KeypointSchema) -> f64 {
    ks_from_distance_sq(
        pred.distance_sq(&gt.keypoints[j].position()),
        gt.scale(),
        schema.k(j),
    )
}

/// OKS between a detection and a ground-truth instance.
pub fn oks(det: &Detection, gt: &GtInstance, schema: &KeypointSchema) -> Result<f64> {
    if gt.num_visible() == 0 {
        return Err(Error::NoLabeledKeypoints(gt.id));
    }
    check_positive(gt.area, "area")?;
    Ok(oks_unchecked(det, gt, schema))
}

/// OKS for an instance already known to be evaluable.
pub(crate) fn oks_unchecked(det: &Detection, gt: &GtInstance, schema: &KeypointSchema) -> f64 {
    let s2 = gt.area;
    let mut sum = 0.0;
    let mut n = 0usize;
    for (i, (p, g)) in det.keypoints.iter().zip(&gt.keypoints).enumerate() {
        if g.is_labeled() {
            let k = schema.k(i);
            sum += (-p.distance_sq(&g.position()) / (2.0 * s2 * k * k)).exp();
            n += 1;
        }
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// OKS of `other` against `reference` treated as a fully labeled ground
/// truth whose scale is the area of its keypoint bounding box. `None` when
/// that box has zero area.
pub(crate) fn detection_oks(
    reference: &Detection,
    other: &Detection,
    schema: &KeypointSchema,
) -> Option<f64> {
    let area = reference.keypoint_bbox().map_or(0.0, |b| b.area());
    if area.is_nan() || area <= 0.0 {
        return None;
    }
    let sum: f64 = reference
        .keypoints
        .iter()
        .zip(&other.keypoints)
        .enumerate()
        .map(|(i, (r, o))| {
            let k = schema.k(i);
            (-r.distance_sq(o) / (2.0 * area * k * k)).exp()
        })
        .sum();
    Some(sum / reference.keypoints.len() as f64)
}

/// Several annotations of the same person by different annotators.
#[derive(Debug, Clone)]
pub struct RedundantGroup {
    pub annotations: Vec<GtInstance>,
    /// Scale used to normalise offsets, typically `sqrt(area)` of the
    /// consensus annotation.
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    /// Estimated `k_i`; `None` when no group had two labels of type `i`.
    pub constants: Vec<Option<f64>>,
    /// Keypoint types whose annotators agreed exactly, giving `k_i = 0`.
    pub degenerate: Vec<usize>,
    /// Degrees of freedom pooled per keypoint type.
    pub degrees_of_freedom: Vec<usize>,
}

/// Estimates `k_i = 2 σ_i` from redundant annotations, where `σ_i` is the
/// pooled per-axis standard deviation of annotation offsets from the group
/// mean, normalised by the group scale.
pub fn calibrate_constants(groups: &[RedundantGroup], num_keypoints: usize) -> Calibration {
    let mut sum_sq = vec![0.0; num_keypoints];
    let mut dof = vec![0usize; num_keypoints];
    for group in groups {
        if !(group.scale.is_finite() && group.scale > 0.0) {
            continue;
        }
        for i in 0..num_keypoints {
            let pts: Vec<Point> = group
                .annotations
                .iter()
                .filter_map(|a| a.keypoints.get(i))
                .filter(|k| k.is_labeled())
                .map(|k| k.position())
                .collect();
            if pts.len() < 2 {
                continue;
            }
            let n = pts.len() as f64;
            let mean = Point::new(
                pts.iter().map(|p| p.x).sum::<f64>() / n,
                pts.iter().map(|p| p.y).sum::<f64>() / n,
            );
            let s2 = group.scale * group.scale;
            sum_sq[i] += pts.iter().map(|p| p.distance_sq(&mean) / s2).sum::<f64>();
            dof[i] += pts.len() - 1;
        }
    }

    let mut degenerate = Vec::new();
    let constants = (0..num_keypoints)
        .map(|i| {
            if dof[i] == 0 {
                return None;
            }
            // two axes per offset
            let sigma = (sum_sq[i] / (2.0 * dof[i] as f64)).sqrt();
            if sigma == 0.0 {
                degenerate.push(i);
            }
            Some(2.0 * sigma)
        })
        .collect();
    Calibration {
        constants,
        degenerate,
        degrees_of_freedom: dof,
    }
}
