//! Core domain types and COCO-format ingestion.
//!
//! All types are plain data and immutable once loaded, so they can be shared
//! freely across worker threads.

mod coco;
mod config;
mod schema;
mod segmentation;

use serde::{Deserialize, Serialize};

pub use coco::{
    load_detections, load_ground_truth, parse_detections, parse_ground_truth, save_detections,
    save_ground_truth, write_detections, write_ground_truth, GroundTruth,
};
pub use config::EvalConfig;
pub use schema::{BodyGroup, KeypointSchema};
pub use segmentation::{Rle, RleCounts, Segmentation};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance_sq(&self, other: &Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn distance(&self, other: &Point) -> f64 {
        self.distance_sq(other).sqrt()
    }
}

/// COCO visibility flag. Only labeled keypoints (`v > 0`) take part in
/// similarity computations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Visibility {
    Unlabeled = 0,
    LabeledOccluded = 1,
    LabeledVisible = 2,
}

impl Visibility {
    pub fn is_labeled(self) -> bool {
        self != Visibility::Unlabeled
    }

    pub fn from_flag(flag: f64) -> Option<Self> {
        match flag {
            0.0 => Some(Visibility::Unlabeled),
            1.0 => Some(Visibility::LabeledOccluded),
            2.0 => Some(Visibility::LabeledVisible),
            _ => None,
        }
    }
}

impl From<Visibility> for u8 {
    fn from(v: Visibility) -> u8 {
        v as u8
    }
}

impl TryFrom<u8> for Visibility {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        Visibility::from_flag(f64::from(v)).ok_or_else(|| format!("visibility flag {v}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    pub visibility: Visibility,
}

impl Keypoint {
    pub const fn new(x: f64, y: f64, visibility: Visibility) -> Self {
        Self { x, y, visibility }
    }

    pub fn labeled(x: f64, y: f64) -> Self {
        Self::new(x, y, Visibility::LabeledVisible)
    }

    pub fn unlabeled() -> Self {
        Self::new(0.0, 0.0, Visibility::Unlabeled)
    }

    pub fn position(&self) -> Point {
        Point::new(self.x, self.y)
    }

    pub fn is_labeled(&self) -> bool {
        self.visibility.is_labeled()
    }
}

/// Axis-aligned box in COCO `(x, y, w, h)` layout.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub const fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub fn area(&self) -> f64 {
        self.w.max(0.0) * self.h.max(0.0)
    }

    /// Tight box around a set of points, `None` when the set is empty.
    pub fn enclosing<'a>(points: impl IntoIterator<Item = &'a Point>) -> Option<BBox> {
        let mut it = points.into_iter();
        let first = it.next()?;
        let (mut x0, mut y0, mut x1, mut y1) = (first.x, first.y, first.x, first.y);
        for p in it {
            x0 = x0.min(p.x);
            y0 = y0.min(p.y);
            x1 = x1.max(p.x);
            y1 = y1.max(p.y);
        }
        Some(BBox::new(x0, y0, x1 - x0, y1 - y0))
    }

    pub fn iou(&self, other: &BBox) -> f64 {
        let ix = (self.x + self.w).min(other.x + other.w) - self.x.max(other.x);
        let iy = (self.y + self.h).min(other.y + other.h) - self.y.max(other.y);
        if ix <= 0.0 || iy <= 0.0 {
            return 0.0;
        }
        let inter = ix * iy;
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }

    /// Half-open containment test: `[x, x + w) × [y, y + h)`.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x && x < self.x + self.w && y >= self.y && y < self.y + self.h
    }
}

/// One annotated instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtInstance {
    pub id: u64,
    pub image_id: u64,
    pub keypoints: Vec<Keypoint>,
    pub area: f64,
    pub bbox: BBox,
    pub segmentation: Option<Segmentation>,
    pub iscrowd: bool,
}

impl GtInstance {
    pub fn new(id: u64, image_id: u64, keypoints: Vec<Keypoint>, area: f64, bbox: BBox) -> Self {
        Self {
            id,
            image_id,
            keypoints,
            area,
            bbox,
            segmentation: None,
            iscrowd: false,
        }
    }

    pub fn num_visible(&self) -> usize {
        self.keypoints.iter().filter(|k| k.is_labeled()).count()
    }

    /// Instance scale `s`, the square root of the pixel area.
    pub fn scale(&self) -> f64 {
        self.area.sqrt()
    }

    /// Crowd regions and instances without labeled keypoints never take part
    /// in matching or error analysis.
    pub fn is_excluded(&self) -> bool {
        self.iscrowd || self.num_visible() == 0
    }
}

/// One predicted instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub id: u64,
    pub image_id: u64,
    pub keypoints: Vec<Point>,
    /// Per-keypoint confidences from the third slot of the results format.
    pub keypoint_scores: Option<Vec<f64>>,
    pub score: f64,
}

impl Detection {
    pub fn new(id: u64, image_id: u64, keypoints: Vec<Point>, score: f64) -> Self {
        Self {
            id,
            image_id,
            keypoints,
            keypoint_scores: None,
            score,
        }
    }

    pub fn keypoint_bbox(&self) -> Option<BBox> {
        BBox::enclosing(&self.keypoints)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub id: u64,
    pub width: u32,
    pub height: u32,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn visibility_flags() {
        assert_eq!(Visibility::from_flag(0.0), Some(Visibility::Unlabeled));
        assert_eq!(Visibility::from_flag(2.0), Some(Visibility::LabeledVisible));
        assert_eq!(Visibility::from_flag(3.0), None);
        assert_eq!(Visibility::from_flag(0.5), None);
        assert!(!Visibility::Unlabeled.is_labeled());
        assert!(Visibility::LabeledOccluded.is_labeled());
    }

    #[test]
    fn bbox_iou() {
        let a = BBox::new(0.0, 0.0, 10.0, 10.0);
        assert_eq!(a.iou(&a), 1.0);
        assert_eq!(a.iou(&BBox::new(20.0, 0.0, 5.0, 5.0)), 0.0);
        // touching edges share no area
        assert_eq!(a.iou(&BBox::new(10.0, 0.0, 10.0, 10.0)), 0.0);
        let half = a.iou(&BBox::new(5.0, 0.0, 10.0, 10.0));
        assert!((half - 50.0 / 150.0).abs() < 1e-15);
    }

    #[test]
    fn enclosing_box() {
        let pts = [
            Point::new(1.0, 5.0),
            Point::new(4.0, 2.0),
            Point::new(3.0, 9.0),
        ];
        assert_eq!(BBox::enclosing(&pts), Some(BBox::new(1.0, 2.0, 3.0, 7.0)));
        assert_eq!(BBox::enclosing(&[]), None);
    }

    #[test]
    fn exclusion_rules() {
        let mut gt = GtInstance::new(
            1,
            1,
            vec![Keypoint::unlabeled(), Keypoint::labeled(1.0, 1.0)],
            100.0,
            BBox::default(),
        );
        assert_eq!(gt.num_visible(), 1);
        assert!(!gt.is_excluded());
        gt.iscrowd = true;
        assert!(gt.is_excluded());
        gt.iscrowd = false;
        gt.keypoints[1] = Keypoint::unlabeled();
        assert!(gt.is_excluded());
    }
}
