//! Synthetic ground truth and detections with labeled error injection.
//!
//! People stand in a row, far enough apart that every injected error has a
//! single explanation. Each keypoint of a detection is placed so that it
//! satisfies the definition of its intended class:
//!
//! - Good: within the ks = `good_threshold` circle of its own part.
//! - Jitter: ks drawn uniformly between the two thresholds.
//! - Inversion: within the good circle of the counterpart on the same person.
//! - Swap: within the good circle of the same part on another person.
//! - Miss: below `jitter_threshold` against every candidate part.
//!
//! Generation is a pure function of the spec: image `n` draws from a ChaCha8
//! stream `n` of the seed, so images can be generated in parallel.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data_model::{
    BBox, Detection, EvalConfig, GroundTruth, GtInstance, ImageRecord, Keypoint, KeypointSchema,
    Point,
};
use crate::similarity::{ks_against, oks_unchecked, radius_unchecked};
use crate::taxonomy::{ErrorKind, PartRef};
use crate::{Error, Result};

const MAX_ATTEMPTS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ScoreMode {
    /// Score equals the detection's OKS with its own person.
    Optimal,
    /// Optimal plus Gaussian noise, clamped to `[0, 1]`.
    NoisyOptimal { std: f64 },
    /// Uniform in `[0, 1)`.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    /// Range of the instance scale `sqrt(area)`, in pixels.
    pub scale_range: (f64, f64),
    /// Distance between neighbouring people in units of the largest scale.
    pub spacing: f64,
}

impl Default for Layout {
    fn default() -> Self {
        Self {
            scale_range: (60.0, 150.0),
            spacing: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectionSpec {
    /// Probability of each localization error per labeled keypoint; the
    /// remainder is Good.
    pub rates: BTreeMap<ErrorKind, f64>,
    pub score_mode: ScoreMode,
    pub seed: u64,
    pub layout: Layout,
    /// Detections far from everyone, per image.
    pub background_detections_per_image: usize,
    /// Probability that a person gets no detection.
    pub missed_person_rate: f64,
    /// Probability that a ground-truth keypoint is left unlabeled.
    pub unlabeled_rate: f64,
}

impl Default for InjectionSpec {
    fn default() -> Self {
        Self {
            rates: BTreeMap::new(),
            score_mode: ScoreMode::Optimal,
            seed: 0,
            layout: Layout::default(),
            background_detections_per_image: 0,
            missed_person_rate: 0.0,
            unlabeled_rate: 0.0,
        }
    }
}

impl InjectionSpec {
    pub fn with_rates(rates: &[(ErrorKind, f64)], seed: u64) -> Self {
        Self {
            rates: rates.iter().copied().collect(),
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InfeasibleLayout(m));
        let mut sum = 0.0;
        for (&kind, &p) in &self.rates {
            if !kind.is_localization_error() {
                return bad(format!("cannot inject {kind}"));
            }
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("rate {p} for {kind} outside [0, 1]"));
            }
            sum += p;
        }
        if sum > 1.0 + 1e-12 {
            return bad(format!("rates sum to {sum}"));
        }
        for (name, p) in [
            ("missed person", self.missed_person_rate),
            ("unlabeled", self.unlabeled_rate),
        ] {
            if !(0.0..1.0).contains(&p) {
                return bad(format!("{name} rate {p} outside [0, 1)"));
            }
        }
        let (lo, hi) = self.layout.scale_range;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return bad(format!("scale range ({lo}, {hi})"));
        }
        if self.layout.spacing.is_nan() || self.layout.spacing < 2.5 {
            return bad(format!(
                "spacing {} is below 2.5 scales",
                self.layout.spacing
            ));
        }
        if let ScoreMode::NoisyOptimal { std } = self.score_mode {
            if !(std >= 0.0 && std.is_finite()) {
                return bad(format!("noise std {std}"));
            }
        }
        Ok(())
    }
}

/// Injected class of one keypoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthLabel {
    pub kind: ErrorKind,
    pub wrong_part: Option<PartRef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionTruth {
    pub detection_id: u64,
    /// Absent for background detections.
    pub gt_id: Option<u64>,
    pub labels: Vec<TruthLabel>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureSet {
    pub ground_truth: GroundTruth,
    pub detections: Vec<Detection>,
    pub truth: Vec<DetectionTruth>,
    /// Keypoints whose drawn class could not be placed (no counterpart or no
    /// other person) and were made Good instead.
    pub skipped: usize,
}

#[derive(Serialize)]
struct TruthFile<'a> {
    spec: &'a InjectionSpec,
    skipped: usize,
    detections: &'a [DetectionTruth],
}

impl FixtureSet {
    /// The truth sidecar as JSON.
    pub fn truth_json(&self, spec: &InjectionSpec) -> String {
        serde_json::to_string_pretty(&TruthFile {
            spec,
            skipped: self.skipped,
            detections: &self.truth,
        })
        .unwrap_or_default()
    }
}

/// Keypoint offsets in units of the person scale, origin at the hips.
fn template(schema: &KeypointSchema) -> Vec<(f64, f64)> {
    let coco = KeypointSchema::coco_person();
    if schema.names() == coco.names() {
        return vec![
            (0.0, -0.75),
            (-0.08, -0.80),
            (0.08, -0.80),
            (-0.16, -0.76),
            (0.16, -0.76),
            (-0.25, -0.55),
            (0.25, -0.55),
            (-0.38, -0.25),
            (0.38, -0.25),
            (-0.42, 0.0),
            (0.42, 0.0),
            (-0.27, 0.0),
            (0.27, 0.0),
            (-0.25, 0.45),
            (0.25, 0.45),
            (-0.25, 0.85),
            (0.25, 0.85),
        ];
    }
    let n = schema.len();
    if n == 1 {
        return vec![(0.0, 0.0)];
    }
    (0..n)
        .map(|i| {
            let a = 2.0 * PI * i as f64 / n as f64;
            (0.45 * a.cos(), 0.45 * a.sin())
        })
        .collect()
}

/// Counterparts must be further apart than the sum of their ks = .5 radii,
/// otherwise Jitter and Inversion regions overlap.
fn check_template(t: &[(f64, f64)], schema: &KeypointSchema, config: &EvalConfig) -> Result<()> {
    for i in 0..schema.len() {
        if let Some(c) = schema.counterpart(i) {
            let d = ((t[i].0 - t[c].0).powi(2) + (t[i].1 - t[c].1).powi(2)).sqrt();
            let need = radius_unchecked(config.jitter_threshold, 1.0, schema.k(i))
                + radius_unchecked(config.jitter_threshold, 1.0, schema.k(c));
            if d <= need {
                return Err(Error::InfeasibleLayout(format!(
                    "parts {} and {} are too close for inversions",
                    schema.names()[i],
                    schema.names()[c]
                )));
            }
        }
    }
    Ok(())
}

struct ImageContext<'a> {
    schema: &'a KeypointSchema,
    config: &'a EvalConfig,
    spec: &'a InjectionSpec,
    template: &'a [(f64, f64)],
}

struct ImageOutput {
    image: ImageRecord,
    gts: Vec<GtInstance>,
    dets: Vec<Detection>,
    truth: Vec<DetectionTruth>,
    skipped: usize,
}

fn random_point_in_disk(rng: &mut ChaCha8Rng, center: Point, radius: f64) -> Point {
    let r = radius * rng.random::<f64>().sqrt();
    let a = rng.random_range(0.0..2.0 * PI);
    Point::new(center.x + r * a.cos(), center.y + r * a.sin())
}

fn random_point_at(rng: &mut ChaCha8Rng, center: Point, distance: f64) -> Point {
    let a = rng.random_range(0.0..2.0 * PI);
    Point::new(center.x + distance * a.cos(), center.y + distance * a.sin())
}

/// Every (person index, part) a prediction for part `i` could be confused
/// with, own part included.
fn candidate_parts(
    gts: &[GtInstance],
    own: usize,
    i: usize,
    schema: &KeypointSchema,
) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (pi, g) in gts.iter().enumerate() {
        for j in std::iter::once(i).chain(schema.counterpart(i)) {
            if (pi != own || j != i) && g.keypoints[j].is_labeled() {
                out.push((pi, j));
            }
        }
    }
    out
}

impl ImageContext<'_> {
    fn sample_kind(&self, rng: &mut ChaCha8Rng) -> ErrorKind {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (&kind, &p) in &self.spec.rates {
            acc += p;
            if u < acc {
                return kind;
            }
        }
        ErrorKind::Good
    }

    fn people(
        &self,
        rng: &mut ChaCha8Rng,
        image_id: u64,
        first_id: u64,
        n: usize,
    ) -> (ImageRecord, Vec<GtInstance>) {
        let (lo, hi) = self.spec.layout.scale_range;
        let step = self.spec.layout.spacing * hi;
        let band = 12.0 * hi;
        let mut gts = Vec::with_capacity(n);
        for j in 0..n {
            let s = if hi > lo {
                rng.random_range(lo..=hi)
            } else {
                lo
            };
            let theta = rng.random_range(-0.2..0.2);
            let (sin, cos) = f64::sin_cos(theta);
            let cx = (j as f64 + 0.5) * step;
            let cy = 0.5 * step;
            let mut kps: Vec<Keypoint> = self
                .template
                .iter()
                .map(|&(x, y)| {
                    Keypoint::labeled(cx + s * (cos * x - sin * y), cy + s * (sin * x + cos * y))
                })
                .collect();
            for k in kps.iter_mut() {
                if rng.random_bool(self.spec.unlabeled_rate) {
                    k.visibility = crate::data_model::Visibility::Unlabeled;
                }
            }
            if kps.iter().all(|k| !k.is_labeled()) {
                kps[0].visibility = crate::data_model::Visibility::LabeledVisible;
            }
            let points: Vec<Point> = kps.iter().map(|k| k.position()).collect();
            let b = BBox::enclosing(&points).unwrap_or_default();
            let pad = 0.15 * s;
            let bbox = BBox::new(b.x - pad, b.y - pad, b.w + 2.0 * pad, b.h + 2.0 * pad);
            gts.push(GtInstance::new(
                first_id + j as u64,
                image_id,
                kps,
                s * s,
                bbox,
            ));
        }
        let image = ImageRecord {
            id: image_id,
            width: (n as f64 * step).ceil().max(1.0) as u32,
            height: (step + band).ceil() as u32,
        };
        (image, gts)
    }

    /// Places keypoint `i` of a prediction for `gts[own]` according to
    /// `kind`. Returns the point, the label actually used and whether the
    /// drawn kind had to be replaced by Good.
    fn place(
        &self,
        rng: &mut ChaCha8Rng,
        gts: &[GtInstance],
        own: usize,
        i: usize,
        kind: ErrorKind,
    ) -> Result<(Point, TruthLabel, bool)> {
        let schema = self.schema;
        let cfg = self.config;
        let me = &gts[own];
        let anchor = me.keypoints[i].position();
        let s = me.scale();
        let good = |kind| TruthLabel {
            kind,
            wrong_part: None,
        };

        if !me.keypoints[i].is_labeled() {
            let p = random_point_in_disk(
                rng,
                anchor,
                radius_unchecked(cfg.good_threshold, s, schema.k(i)),
            );
            return Ok((p, good(ErrorKind::Unclassifiable), false));
        }
        let candidates = candidate_parts(gts, own, i, schema);
        let ks_self = |p: Point| ks_against(p, me, i, schema);
        let ks_of = |p: Point, (pi, j): (usize, usize)| ks_against(p, &gts[pi], j, schema);

        // the part the prediction should be confused with
        let target = match kind {
            ErrorKind::Inversion => schema
                .counterpart(i)
                .filter(|&c| me.keypoints[c].is_labeled())
                .map(|c| (own, c)),
            ErrorKind::Swap => {
                let others: Vec<usize> = (0..gts.len())
                    .filter(|&pi| pi != own && gts[pi].keypoints[i].is_labeled())
                    .collect();
                (!others.is_empty()).then(|| (others[rng.random_range(0..others.len())], i))
            }
            _ => None,
        };
        if matches!(kind, ErrorKind::Inversion | ErrorKind::Swap) && target.is_none() {
            let (p, l, _) = self.place(rng, gts, own, i, ErrorKind::Good)?;
            return Ok((p, l, true));
        }

        for _ in 0..MAX_ATTEMPTS {
            let (p, ok) = match kind {
                ErrorKind::Good => {
                    let p = random_point_in_disk(
                        rng,
                        anchor,
                        radius_unchecked(cfg.good_threshold, s, schema.k(i)),
                    );
                    (p, ks_self(p) >= cfg.good_threshold)
                }
                ErrorKind::Jitter => {
                    let ks = rng.random_range(cfg.jitter_threshold..cfg.good_threshold);
                    let p = random_point_at(rng, anchor, radius_unchecked(ks, s, schema.k(i)));
                    let v = ks_self(p);
                    (p, v >= cfg.jitter_threshold && v < cfg.good_threshold)
                }
                ErrorKind::Inversion | ErrorKind::Swap => {
                    let t = target.unwrap_or((own, i));
                    let wrong = &gts[t.0];
                    let r = radius_unchecked(cfg.good_threshold, wrong.scale(), schema.k(t.1));
                    let p = random_point_in_disk(rng, wrong.keypoints[t.1].position(), r);
                    let kt = ks_of(p, t);
                    let unique = candidates.iter().all(|&c| c == t || ks_of(p, c) < kt);
                    (
                        p,
                        ks_self(p) < cfg.jitter_threshold && kt >= cfg.jitter_threshold && unique,
                    )
                }
                ErrorKind::Miss => {
                    let r5 = radius_unchecked(cfg.jitter_threshold, s, schema.k(i));
                    let d = rng.random_range(r5..3.0 * r5);
                    let p = random_point_at(rng, anchor, d);
                    let ok = ks_self(p) < cfg.jitter_threshold
                        && candidates
                            .iter()
                            .all(|&c| ks_of(p, c) < cfg.jitter_threshold);
                    (p, ok)
                }
                ErrorKind::Unclassifiable => unreachable!("never drawn"),
            };
            if ok {
                let wrong_part = target.map(|(pi, j)| PartRef {
                    person_id: gts[pi].id,
                    keypoint: j,
                });
                return Ok((p, TruthLabel { kind, wrong_part }, false));
            }
        }
        Err(Error::InfeasibleLayout(format!(
            "could not place a {kind} keypoint for ground truth {}",
            me.id
        )))
    }

    fn score(&self, rng: &mut ChaCha8Rng, optimal: f64) -> f64 {
        match self.spec.score_mode {
            ScoreMode::Optimal => optimal,
            ScoreMode::NoisyOptimal { std } => {
                let noise = Normal::new(0.0, std).map_or(0.0, |n| n.sample(rng));
                (optimal + noise).clamp(0.0, 1.0)
            }
            ScoreMode::Random => rng.random(),
        }
    }

    fn image(&self, index: usize, people: usize) -> Result<ImageOutput> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.spec.seed);
        rng.set_stream(index as u64);
        let image_id = index as u64 + 1;
        let slots = people + self.spec.background_detections_per_image;
        let (image, gts) = self.people(&mut rng, image_id, (index * people) as u64 + 1, people);
        let first_det = (index * slots) as u64 + 1;

        let mut dets = Vec::new();
        let mut truth = Vec::new();
        let mut skipped = 0;
        for own in 0..people {
            if rng.random_bool(self.spec.missed_person_rate) {
                continue;
            }
            let det_id = first_det + own as u64;
            let mut placed = None;
            for _ in 0..MAX_ATTEMPTS {
                let mut points = Vec::with_capacity(self.schema.len());
                let mut labels = Vec::with_capacity(self.schema.len());
                let mut local_skips = 0;
                for i in 0..self.schema.len() {
                    let kind = self.sample_kind(&mut rng);
                    let (p, l, s) = self.place(&mut rng, &gts, own, i, kind)?;
                    points.push(p);
                    labels.push(l);
                    local_skips += usize::from(s);
                }
                let det = Detection::new(det_id, image_id, points, 0.0);
                let mine = oks_unchecked(&det, &gts[own], self.schema);
                let best_elsewhere = gts
                    .iter()
                    .enumerate()
                    .filter(|&(pi, _)| pi != own)
                    .map(|(_, g)| oks_unchecked(&det, g, self.schema))
                    .fold(0.0, f64::max);
                if mine > best_elsewhere && mine > 0.0 {
                    placed = Some((det, labels, local_skips, mine));
                    break;
                }
            }
            let Some((mut det, labels, local_skips, mine)) = placed else {
                return Err(Error::InfeasibleLayout(format!(
                    "detection for ground truth {} keeps matching someone else",
                    gts[own].id
                )));
            };
            det.score = self.score(&mut rng, mine);
            skipped += local_skips;
            truth.push(DetectionTruth {
                detection_id: det.id,
                gt_id: Some(gts[own].id),
                labels,
            });
            dets.push(det);
        }

        // background detections live in a band below everyone, far enough
        // that their OKS with every person underflows to 0
        let hi = self.spec.layout.scale_range.1;
        let band_top = self.spec.layout.spacing * hi + 10.0 * hi;
        for b in 0..self.spec.background_detections_per_image {
            let cx = rng.random_range(0.0..image.width as f64);
            let cy = band_top + rng.random_range(0.0..hi);
            let s = rng.random_range(0.3..1.0) * hi;
            let points = self
                .template
                .iter()
                .map(|&(x, y)| Point::new(cx + s * x, cy + s * y))
                .collect();
            let mut det = Detection::new(first_det + (people + b) as u64, image_id, points, 0.0);
            debug_assert!(gts
                .iter()
                .all(|g| oks_unchecked(&det, g, self.schema) == 0.0));
            det.score = self.score(&mut rng, 0.0);
            truth.push(DetectionTruth {
                detection_id: det.id,
                gt_id: None,
                labels: Vec::new(),
            });
            dets.push(det);
        }

        Ok(ImageOutput {
            image,
            gts,
            dets,
            truth,
            skipped,
        })
    }
}

/// Generates `n_images` images with `people_per_image` people each.
pub fn generate(
    n_images: usize,
    people_per_image: usize,
    spec: &InjectionSpec,
    schema: &KeypointSchema,
    config: &EvalConfig,
) -> Result<FixtureSet> {
    spec.validate()?;
    let template = template(schema);
    check_template(&template, schema, config)?;
    let ctx = ImageContext {
        schema,
        config,
        spec,
        template: &template,
    };
    let images = (0..n_images)
        .into_par_iter()
        .map(|i| ctx.image(i, people_per_image))
        .collect::<Result<Vec<_>>>()?;

    let mut set = FixtureSet {
        ground_truth: GroundTruth {
            images: Vec::with_capacity(n_images),
            instances: Vec::new(),
        },
        detections: Vec::new(),
        truth: Vec::new(),
        skipped: 0,
    };
    for out in images {
        set.ground_truth.images.push(out.image);
        set.ground_truth.instances.extend(out.gts);
        set.detections.extend(out.dets);
        set.truth.extend(out.truth);
        set.skipped += out.skipped;
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matching::match_all;
    use crate::taxonomy::classify_matches;

    fn labels_agree(
        set: &FixtureSet,
        schema: &KeypointSchema,
        config: &EvalConfig,
    ) -> (usize, usize) {
        let gts = &set.ground_truth.instances;
        let sets = match_all(&set.detections, gts, schema, config);
        let labels = classify_matches(&set.detections, gts, &sets, schema, config);
        let by_det: BTreeMap<u64, _> = labels.iter().map(|l| (l.detection_id, l)).collect();
        let (mut agree, mut total) = (0, 0);
        for t in set.truth.iter().filter(|t| t.gt_id.is_some()) {
            let got = by_det[&t.detection_id];
            assert_eq!(Some(got.gt_id), t.gt_id);
            for (a, b) in t.labels.iter().zip(&got.labels) {
                total += 1;
                agree += usize::from(a.kind == b.kind && a.wrong_part == b.wrong_part);
            }
        }
        (agree, total)
    }

    #[test]
    fn no_errors_means_all_good() {
        let schema = KeypointSchema::coco_person();
        let config = EvalConfig::default();
        let set = generate(5, 3, &InjectionSpec::default(), &schema, &config).unwrap();
        assert_eq!(set.ground_truth.instances.len(), 15);
        assert!(set
            .truth
            .iter()
            .all(|t| t.labels.iter().all(|l| l.kind == ErrorKind::Good)));
        let (agree, total) = labels_agree(&set, &schema, &config);
        assert_eq!(agree, total);
        assert_eq!(total, 15 * 17);
        assert!(set.detections.iter().all(|d| (d.score - 1.0).abs() < 0.2));
    }

    #[test]
    fn deterministic() {
        let schema = KeypointSchema::coco_person();
        let config = EvalConfig::default();
        let mut spec =
            InjectionSpec::with_rates(&[(ErrorKind::Swap, 0.2), (ErrorKind::Miss, 0.2)], 7);
        spec.score_mode = ScoreMode::NoisyOptimal { std: 0.1 };
        spec.background_detections_per_image = 2;
        let a = generate(6, 3, &spec, &schema, &config).unwrap();
        let b = generate(6, 3, &spec, &schema, &config).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.truth_json(&spec), b.truth_json(&spec));
        spec.seed = 8;
        assert_ne!(generate(6, 3, &spec, &schema, &config).unwrap(), a);
    }

    #[test]
    fn injected_labels_are_recovered() {
        let schema = KeypointSchema::coco_person();
        let config = EvalConfig::default();
        let mut spec = InjectionSpec::with_rates(
            &[
                (ErrorKind::Jitter, 0.2),
                (ErrorKind::Inversion, 0.1),
                (ErrorKind::Swap, 0.1),
                (ErrorKind::Miss, 0.1),
            ],
            3,
        );
        spec.unlabeled_rate = 0.1;
        spec.missed_person_rate = 0.1;
        spec.background_detections_per_image = 1;
        spec.score_mode = ScoreMode::Random;
        let set = generate(20, 4, &spec, &schema, &config).unwrap();
        let (agree, total) = labels_agree(&set, &schema, &config);
        assert!(total > 1000);
        assert!(agree as f64 >= 0.99 * total as f64, "{agree}/{total}");
        let kinds: std::collections::BTreeSet<ErrorKind> = set
            .truth
            .iter()
            .flat_map(|t| t.labels.iter().map(|l| l.kind))
            .collect();
        assert_eq!(kinds.len(), 6);
    }

    #[test]
    fn single_person_images_skip_swaps() {
        let schema = KeypointSchema::coco_person();
        let config = EvalConfig::default();
        let spec = InjectionSpec::with_rates(&[(ErrorKind::Swap, 1.0)], 1);
        let set = generate(2, 1, &spec, &schema, &config).unwrap();
        assert_eq!(set.skipped, 34);
    }

    #[test]
    fn generic_schema() {
        let schema = KeypointSchema::new(
            "pair",
            vec!["l".into(), "r".into()],
            &[[0, 1]],
            vec![0.1, 0.1],
            vec![],
        )
        .unwrap();
        let config = EvalConfig::default();
        let spec = InjectionSpec::with_rates(&[(ErrorKind::Inversion, 0.5)], 2);
        let set = generate(10, 2, &spec, &schema, &config).unwrap();
        let (agree, total) = labels_agree(&set, &schema, &config);
        assert_eq!(agree, total);
    }

    #[test]
    fn invalid_specs() {
        let schema = KeypointSchema::coco_person();
        let config = EvalConfig::default();
        let too_much =
            InjectionSpec::with_rates(&[(ErrorKind::Swap, 0.7), (ErrorKind::Miss, 0.7)], 1);
        assert!(generate(1, 1, &too_much, &schema, &config).is_err());
        let good = InjectionSpec::with_rates(&[(ErrorKind::Good, 0.5)], 1);
        assert!(generate(1, 1, &good, &schema, &config).is_err());
        let mut cramped = InjectionSpec::default();
        cramped.layout.spacing = 1.0;
        assert!(generate(1, 1, &cramped, &schema, &config).is_err());

        let close = KeypointSchema::new(
            "close",
            vec![
                "a".into(),
                "b".into(),
                "c".into(),
                "d".into(),
                "e".into(),
                "f".into(),
                "g".into(),
                "h".into(),
                "i".into(),
                "j".into(),
                "k".into(),
                "l".into(),
            ],
            &[[0, 1]],
            vec![0.3; 12],
            vec![],
        )
        .unwrap();
        assert!(matches!(
            generate(1, 1, &InjectionSpec::default(), &close, &config),
            Err(Error::InfeasibleLayout(_))
        ));
    }
}
