//! Classification of predicted keypoints into Good, Jitter, Inversion, Swap
//! and Miss.
//!
//! With `ks_self` the similarity of keypoint `i` to its own ground truth:
//!
//! - Good: `ks_self >= good_threshold`
//! - Jitter: `jitter_threshold <= ks_self < good_threshold`
//! - Inversion: otherwise, when the left/right counterpart of `i` on the same
//!   person has `ks >= jitter_threshold`
//! - Swap: otherwise, when part `i` or its counterpart on another person has
//!   `ks >= jitter_threshold`
//! - Miss: none of the above.
//!
//! When several candidates qualify the most similar one wins; ties prefer
//! Inversion, then the lowest person id.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data_model::{Detection, EvalConfig, GtInstance, KeypointSchema};
use crate::index::by_image;
use crate::matching::MatchSet;
use crate::similarity::ks_against;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorKind {
    Good,
    Jitter,
    Inversion,
    Swap,
    Miss,
    /// The ground-truth keypoint is unlabeled, so `ks_self` is undefined.
    Unclassifiable,
}

impl ErrorKind {
    /// Localization error kinds, most costly first.
    pub const LOCALIZATION: [ErrorKind; 4] = [
        ErrorKind::Miss,
        ErrorKind::Swap,
        ErrorKind::Inversion,
        ErrorKind::Jitter,
    ];

    pub const ALL: [ErrorKind; 6] = [
        ErrorKind::Good,
        ErrorKind::Jitter,
        ErrorKind::Inversion,
        ErrorKind::Swap,
        ErrorKind::Miss,
        ErrorKind::Unclassifiable,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ErrorKind::Good => "good",
            ErrorKind::Jitter => "jitter",
            ErrorKind::Inversion => "inversion",
            ErrorKind::Swap => "swap",
            ErrorKind::Miss => "miss",
            ErrorKind::Unclassifiable => "unclassifiable",
        }
    }

    pub fn is_localization_error(self) -> bool {
        Self::LOCALIZATION.contains(&self)
    }
}

impl std::str::FromStr for ErrorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown error kind '{s}'"))
    }
}

impl std::fmt::Display for ErrorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A ground-truth body part: keypoint `keypoint` of instance `person_id`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PartRef {
    pub person_id: u64,
    pub keypoint: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeypointErrorLabel {
    pub kind: ErrorKind,
    /// The confused part, present only for Inversion and Swap.
    pub wrong_part: Option<PartRef>,
    pub ks_self: Option<f64>,
    pub ks_wrong: Option<f64>,
}

impl KeypointErrorLabel {
    fn plain(kind: ErrorKind, ks_self: Option<f64>) -> Self {
        Self {
            kind,
            wrong_part: None,
            ks_self,
            ks_wrong: None,
        }
    }
}

/// Classifies keypoint `i` of a detection matched to `matched_gt`.
/// `image_gts` are the other people of the image; excluded instances and
/// `matched_gt` itself are skipped.
pub fn classify_keypoint(
    det: &Detection,
    matched_gt: &GtInstance,
    image_gts: &[&GtInstance],
    i: usize,
    schema: &KeypointSchema,
    config: &EvalConfig,
) -> KeypointErrorLabel {
    if !matched_gt.keypoints[i].is_labeled() {
        return KeypointErrorLabel::plain(ErrorKind::Unclassifiable, None);
    }
    let pred = det.keypoints[i];
    let ks_self = ks_against(pred, matched_gt, i, schema);
    if ks_self >= config.good_threshold {
        return KeypointErrorLabel::plain(ErrorKind::Good, Some(ks_self));
    }
    if ks_self >= config.jitter_threshold {
        return KeypointErrorLabel::plain(ErrorKind::Jitter, Some(ks_self));
    }

    let counterpart = schema.counterpart(i);
    let mut best: Option<(ErrorKind, PartRef, f64)> = None;
    let mut consider = |kind: ErrorKind, gt: &GtInstance, j: usize| {
        if !gt.keypoints[j].is_labeled() {
            return;
        }
        let ks = ks_against(pred, gt, j, schema);
        if ks >= config.jitter_threshold && best.is_none_or(|(_, _, b)| ks > b) {
            best = Some((
                kind,
                PartRef {
                    person_id: gt.id,
                    keypoint: j,
                },
                ks,
            ));
        }
    };

    if let Some(c) = counterpart {
        consider(ErrorKind::Inversion, matched_gt, c);
    }
    let mut others: Vec<&GtInstance> = image_gts
        .iter()
        .copied()
        .filter(|g| g.id != matched_gt.id && !g.is_excluded())
        .collect();
    others.sort_by_key(|g| g.id);
    for other in others {
        consider(ErrorKind::Swap, other, i);
        if let Some(c) = counterpart {
            consider(ErrorKind::Swap, other, c);
        }
    }

    match best {
        Some((kind, part, ks)) => KeypointErrorLabel {
            kind,
            wrong_part: Some(part),
            ks_self: Some(ks_self),
            ks_wrong: Some(ks),
        },
        None => KeypointErrorLabel::plain(ErrorKind::Miss, Some(ks_self)),
    }
}

/// Labels of every keypoint of one matched detection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionLabels {
    pub image_id: u64,
    pub detection_id: u64,
    pub gt_id: u64,
    pub labels: Vec<KeypointErrorLabel>,
}

pub fn classify_detection(
    det: &Detection,
    matched_gt: &GtInstance,
    image_gts: &[&GtInstance],
    schema: &KeypointSchema,
    config: &EvalConfig,
) -> Vec<KeypointErrorLabel> {
    (0..schema.len())
        .map(|i| classify_keypoint(det, matched_gt, image_gts, i, schema, config))
        .collect()
}

/// Classifies every matched pair of the match sets. Output follows image id
/// order, then matching order within each image.
pub fn classify_matches(
    dets: &[Detection],
    gts: &[GtInstance],
    match_sets: &[MatchSet],
    schema: &KeypointSchema,
    config: &EvalConfig,
) -> Vec<DetectionLabels> {
    let det_by_id: HashMap<u64, &Detection> = dets.iter().map(|d| (d.id, d)).collect();
    let groups = by_image(&[], gts);
    let gts_by_image: HashMap<u64, &[&GtInstance]> = groups
        .iter()
        .map(|g| (g.image_id, g.gts.as_slice()))
        .collect();

    match_sets
        .par_iter()
        .flat_map_iter(|ms| {
            let image_gts = gts_by_image.get(&ms.image_id).copied().unwrap_or(&[]);
            ms.pairs()
                .into_iter()
                .filter_map(|p| {
                    let det = det_by_id.get(&p.detection_id)?;
                    let gt = image_gts.iter().find(|g| g.id == p.gt_id)?;
                    Some(DetectionLabels {
                        image_id: ms.image_id,
                        detection_id: p.detection_id,
                        gt_id: p.gt_id,
                        labels: classify_detection(det, gt, image_gts, schema, config),
                    })
                })
                .collect::<Vec<_>>()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KindCounts {
    pub good: usize,
    pub jitter: usize,
    pub inversion: usize,
    pub swap: usize,
    pub miss: usize,
    pub unclassifiable: usize,
}

impl KindCounts {
    pub fn add(&mut self, kind: ErrorKind) {
        *self.slot(kind) += 1;
    }

    fn slot(&mut self, kind: ErrorKind) -> &mut usize {
        match kind {
            ErrorKind::Good => &mut self.good,
            ErrorKind::Jitter => &mut self.jitter,
            ErrorKind::Inversion => &mut self.inversion,
            ErrorKind::Swap => &mut self.swap,
            ErrorKind::Miss => &mut self.miss,
            ErrorKind::Unclassifiable => &mut self.unclassifiable,
        }
    }

    pub fn get(&self, kind: ErrorKind) -> usize {
        let mut copy = *self;
        *copy.slot(kind)
    }

    pub fn merge(&mut self, other: &KindCounts) {
        for k in ErrorKind::ALL {
            *self.slot(k) += other.get(k);
        }
    }

    /// Keypoints with a defined class; Unclassifiable ones are left out.
    pub fn classified(&self) -> usize {
        self.good + self.jitter + self.inversion + self.swap + self.miss
    }

    /// Share of `kind` among classified keypoints.
    pub fn frequency(&self, kind: ErrorKind) -> Option<f64> {
        let total = self.classified();
        (total > 0 && kind != ErrorKind::Unclassifiable)
            .then(|| self.get(kind) as f64 / total as f64)
    }

    pub fn from_labels<'a>(labels: impl IntoIterator<Item = &'a KeypointErrorLabel>) -> Self {
        let mut c = KindCounts::default();
        for l in labels {
            c.add(l.kind);
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakdownRow {
    pub name: String,
    pub counts: KindCounts,
}

/// Error counts overall, per keypoint type and per body group. Rows with no
/// classified keypoint are omitted.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ErrorBreakdown {
    pub overall: KindCounts,
    pub by_keypoint: Vec<BreakdownRow>,
    pub by_group: Vec<BreakdownRow>,
}

impl ErrorBreakdown {
    pub fn is_empty(&self) -> bool {
        self.overall.classified() == 0
    }
}

pub fn error_breakdown(labels: &[DetectionLabels], schema: &KeypointSchema) -> ErrorBreakdown {
    let mut per_kp = vec![KindCounts::default(); schema.len()];
    for d in labels {
        for (i, l) in d.labels.iter().enumerate() {
            per_kp[i].add(l.kind);
        }
    }
    let mut overall = KindCounts::default();
    for c in &per_kp {
        overall.merge(c);
    }
    let by_keypoint = per_kp
        .iter()
        .zip(schema.names())
        .filter(|(c, _)| c.classified() > 0)
        .map(|(c, n)| BreakdownRow {
            name: n.clone(),
            counts: *c,
        })
        .collect();
    let by_group = schema
        .groups()
        .iter()
        .map(|g| {
            let mut counts = KindCounts::default();
            for &m in &g.members {
                counts.merge(&per_kp[m]);
            }
            BreakdownRow {
                name: g.name.clone(),
                counts,
            }
        })
        .filter(|r| r.counts.classified() > 0)
        .collect();
    ErrorBreakdown {
        overall,
        by_keypoint,
        by_group,
    }
}
