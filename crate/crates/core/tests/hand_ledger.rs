//! Two images, three people, four detections with APs traced by hand.
//!
//! One keypoint with k = 0.1 and area 10000, so ks = exp(-d² / 200).
//!
//! | det | image | score | OKS          | match          |
//! |-----|-------|-------|--------------|----------------|
//! | 1   | 1     | .9    | .9231163464  | person 1       |
//! | 2   | 1     | .6    | .6065306597  | person 2       |
//! | 3   | 2     | .8    | .8352702114  | person 3       |
//! | 4   | 2     | .7    | (.9559974818)| none, 3 taken  |

use kpt_diagnose::background::background_impact;
use kpt_diagnose::correction::{progressive_pr, CorrectionPlan};
use kpt_diagnose::data_model::{load_detections, load_ground_truth, EvalConfig, KeypointSchema};
use kpt_diagnose::matching::evaluate;

const DIR: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/hand_ledger");

fn load() -> (
    KeypointSchema,
    kpt_diagnose::data_model::GroundTruth,
    Vec<kpt_diagnose::data_model::Detection>,
) {
    let schema = KeypointSchema::load(format!("{DIR}/schema.json")).unwrap();
    let gt = load_ground_truth(format!("{DIR}/gt.json"), &schema).unwrap();
    let dt = load_detections(format!("{DIR}/dt.json"), &schema).unwrap();
    (schema, gt, dt)
}

const AP_HIGH: f64 = 92.5 / 101.0;
const AP_MID: f64 = 67.0 / 101.0;
const AP_LOW: f64 = 34.0 / 101.0;

#[test]
fn ap_per_threshold() {
    let (schema, gt, dt) = load();
    let e = evaluate(&dt, &gt.instances, &schema, &EvalConfig::default()).unwrap();
    let expected = [
        AP_HIGH, AP_HIGH, AP_HIGH, AP_MID, AP_MID, AP_MID, AP_MID, AP_LOW, AP_LOW, 0.0,
    ];
    for (r, want) in e.results.iter().zip(expected) {
        assert!(
            (r.ap - want).abs() < 1e-9,
            "t={} ap={} want={want}",
            r.threshold,
            r.ap
        );
    }
    assert!((e.coco_ap - 613.5 / 1010.0).abs() < 1e-9);

    let at50 = e.at(0.5).unwrap();
    assert_eq!((at50.tp, at50.fp, at50.fn_count), (3, 1, 0));
    let at75 = e.at(0.75).unwrap();
    assert_eq!((at75.tp, at75.fp, at75.fn_count), (2, 2, 1));

    let pairs: Vec<(u64, u64)> = e
        .match_sets
        .iter()
        .flat_map(|s| s.pairs())
        .map(|p| (p.detection_id, p.gt_id))
        .collect();
    assert_eq!(pairs, vec![(1, 1), (2, 2), (3, 3)]);
    let oks: Vec<f64> = e
        .match_sets
        .iter()
        .flat_map(|s| s.pairs())
        .map(|p| p.oks)
        .collect();
    for (got, want) in oks
        .iter()
        .zip([0.9231163463866358, 0.6065306597126334, 0.835270211411272])
    {
        assert!((got - want).abs() < 1e-12);
    }
}

#[test]
fn background_removal() {
    let (schema, gt, dt) = load();
    let r = background_impact(&dt, &gt.instances, &schema, &EvalConfig::default()).unwrap();
    let expected = [
        (0.5, AP_HIGH, AP_HIGH, 1.0),
        (0.75, AP_MID, 1.0, AP_MID),
        (0.95, 0.0, 0.0, 0.0),
    ];
    for (b, (t, ap, no_fn, no_fp)) in r.iter().zip(expected) {
        assert_eq!(b.threshold, t);
        assert!((b.ap - ap).abs() < 1e-9);
        assert!((b.ap_without_fn - no_fn).abs() < 1e-9);
        assert!((b.ap_without_fp - no_fp).abs() < 1e-9);
    }
}

#[test]
fn progressive_default_plan() {
    // Detections 2 and 3 are Jitter. Correcting them lifts both onto the
    // .85 circle, which makes detection 2 a true positive at .75. Optimal
    // scores put detection 4 first in image 2, where it takes person 3 and
    // detection 3 becomes the only false positive, ranked last.
    let (schema, gt, dt) = load();
    let plan = CorrectionPlan::with_default_order(0.75);
    let r = progressive_pr(&dt, &gt.instances, &plan, &schema, &EvalConfig::default()).unwrap();
    let labels: Vec<&str> = r.stages.iter().map(|s| s.label.as_str()).collect();
    assert_eq!(
        labels,
        [
            "Original",
            "Miss",
            "Swap",
            "Inversion",
            "Jitter",
            "OptScore",
            "RemoveBgFP",
            "RemoveFN"
        ]
    );
    let expected = [AP_MID, AP_MID, AP_MID, AP_MID, AP_HIGH, 1.0, 1.0, 1.0];
    for (s, want) in r.stages.iter().zip(expected) {
        assert!(
            (s.result.ap - want).abs() < 1e-9,
            "{}: {}",
            s.label,
            s.result.ap
        );
    }
    let gains: f64 = r.stages.iter().map(|s| s.ap_gain).sum();
    assert!((gains - (1.0 - AP_MID)).abs() < 1e-12);
}
