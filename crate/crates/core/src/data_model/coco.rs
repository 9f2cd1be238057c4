//! COCO keypoint ground-truth and results files.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    BBox, Detection, GtInstance, ImageRecord, Keypoint, KeypointSchema, Point, Segmentation,
    Visibility,
};
use crate::{Error, Result};

/// Contents of a ground-truth file. Excluded instances are kept so they can
/// still feed dataset statistics.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruth {
    pub images: Vec<ImageRecord>,
    pub instances: Vec<GtInstance>,
}

impl GroundTruth {
    pub fn evaluable(&self) -> impl Iterator<Item = &GtInstance> {
        self.instances.iter().filter(|g| !g.is_excluded())
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct GtFile {
    #[serde(default)]
    images: Vec<ImageRaw>,
    annotations: Vec<AnnotationRaw>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    categories: Vec<serde_json::Value>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ImageRaw {
    id: u64,
    width: u32,
    height: u32,
}

#[derive(Debug, Serialize, Deserialize)]
struct AnnotationRaw {
    id: u64,
    image_id: u64,
    #[serde(default = "person_category")]
    category_id: u64,
    #[serde(default)]
    keypoints: Vec<f64>,
    #[serde(default)]
    num_keypoints: Option<usize>,
    area: f64,
    bbox: [f64; 4],
    #[serde(default, deserialize_with = "flag", serialize_with = "flag_out")]
    iscrowd: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    segmentation: Option<Segmentation>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ResultRaw {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    id: Option<u64>,
    image_id: u64,
    #[serde(default = "person_category")]
    category_id: u64,
    keypoints: Vec<f64>,
    // NaN must reach validation rather than fail in the parser
    #[serde(deserialize_with = "lenient_number")]
    score: f64,
}

fn person_category() -> u64 {
    1
}

fn flag<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<bool, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Flag {
        Bool(bool),
        Int(i64),
    }
    Ok(match Flag::deserialize(d)? {
        Flag::Bool(b) => b,
        Flag::Int(i) => i != 0,
    })
}

fn flag_out<S: serde::Serializer>(v: &bool, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_u8(u8::from(*v))
}

fn lenient_number<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

pub fn parse_ground_truth(text: &str, schema: &KeypointSchema) -> Result<GroundTruth> {
    let file: GtFile = serde_json::from_str(text)?;
    let k = schema.len();

    let mut seen = HashSet::new();
    let mut images = Vec::with_capacity(file.images.len());
    for img in file.images {
        if !seen.insert(img.id) {
            return Err(Error::DuplicateId {
                kind: "image",
                id: img.id,
            });
        }
        if img.width == 0 || img.height == 0 {
            return Err(Error::InvalidRecord {
                record: format!("image {}", img.id),
                reason: "zero width or height".into(),
            });
        }
        images.push(ImageRecord {
            id: img.id,
            width: img.width,
            height: img.height,
        });
    }
    let image_ids = seen;

    let mut seen = HashSet::new();
    let mut instances = Vec::with_capacity(file.annotations.len());
    for ann in file.annotations {
        let record = format!("annotation {}", ann.id);
        if !seen.insert(ann.id) {
            return Err(Error::DuplicateId {
                kind: "annotation",
                id: ann.id,
            });
        }
        if ann.keypoints.len() != 3 * k {
            return Err(Error::KeypointCount {
                record,
                expected: 3 * k,
                got: ann.keypoints.len(),
            });
        }
        if !image_ids.is_empty() && !image_ids.contains(&ann.image_id) {
            return Err(Error::InvalidRecord {
                record,
                reason: format!("unknown image {}", ann.image_id),
            });
        }
        let keypoints = ann
            .keypoints
            .chunks_exact(3)
            .map(|c| {
                let visibility =
                    Visibility::from_flag(c[2]).ok_or_else(|| Error::InvalidRecord {
                        record: record.clone(),
                        reason: format!("visibility flag {}", c[2]),
                    })?;
                if visibility.is_labeled() && !(c[0].is_finite() && c[1].is_finite()) {
                    return Err(Error::InvalidRecord {
                        record: record.clone(),
                        reason: "non-finite keypoint".into(),
                    });
                }
                Ok(Keypoint::new(c[0], c[1], visibility))
            })
            .collect::<Result<Vec<_>>>()?;
        let [x, y, w, h] = ann.bbox;
        let gt = GtInstance {
            id: ann.id,
            image_id: ann.image_id,
            keypoints,
            area: ann.area,
            bbox: BBox::new(x, y, w, h),
            segmentation: ann.segmentation,
            iscrowd: ann.iscrowd,
        };
        if !gt.is_excluded() && !(gt.area.is_finite() && gt.area > 0.0) {
            return Err(Error::InvalidRecord {
                record,
                reason: format!("area {}", gt.area),
            });
        }
        instances.push(gt);
    }
    Ok(GroundTruth { images, instances })
}

pub fn parse_detections(text: &str, schema: &KeypointSchema) -> Result<Vec<Detection>> {
    let raw: Vec<ResultRaw> = serde_json::from_str(text)?;
    let k = schema.len();
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(raw.len());
    for (idx, r) in raw.into_iter().enumerate() {
        let id = r.id.unwrap_or(idx as u64 + 1);
        let record = format!("detection {id}");
        if !seen.insert(id) {
            return Err(Error::DuplicateId {
                kind: "detection",
                id,
            });
        }
        if !r.score.is_finite() {
            return Err(Error::InvalidRecord {
                record,
                reason: format!("score {}", r.score),
            });
        }
        let (keypoints, keypoint_scores): (Vec<Point>, _) = if r.keypoints.len() == 3 * k {
            let pts = r
                .keypoints
                .chunks_exact(3)
                .map(|c| Point::new(c[0], c[1]))
                .collect();
            let conf = r.keypoints.chunks_exact(3).map(|c| c[2]).collect();
            (pts, Some(conf))
        } else if r.keypoints.len() == 2 * k {
            let pts = r
                .keypoints
                .chunks_exact(2)
                .map(|c| Point::new(c[0], c[1]))
                .collect();
            (pts, None)
        } else {
            return Err(Error::KeypointCount {
                record,
                expected: 3 * k,
                got: r.keypoints.len(),
            });
        };
        if keypoints
            .iter()
            .any(|p: &Point| !(p.x.is_finite() && p.y.is_finite()))
        {
            return Err(Error::InvalidRecord {
                record,
                reason: "non-finite keypoint".into(),
            });
        }
        out.push(Detection {
            id,
            image_id: r.image_id,
            keypoints,
            keypoint_scores,
            score: r.score,
        });
    }
    Ok(out)
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Reads a COCO keypoints ground-truth file.
pub fn load_ground_truth(path: impl AsRef<Path>, schema: &KeypointSchema) -> Result<GroundTruth> {
    parse_ground_truth(&read(path.as_ref())?, schema)
}

/// Reads a COCO keypoints results file (an array of `{image_id, keypoints,
/// score}` records). Records without an `id` are numbered from 1 in file
/// order.
pub fn load_detections(path: impl AsRef<Path>, schema: &KeypointSchema) -> Result<Vec<Detection>> {
    parse_detections(&read(path.as_ref())?, schema)
}

pub fn write_ground_truth(gt: &GroundTruth) -> String {
    let file = GtFile {
        images: gt
            .images
            .iter()
            .map(|i| ImageRaw {
                id: i.id,
                width: i.width,
                height: i.height,
            })
            .collect(),
        annotations: gt
            .instances
            .iter()
            .map(|g| AnnotationRaw {
                id: g.id,
                image_id: g.image_id,
                category_id: person_category(),
                keypoints: g
                    .keypoints
                    .iter()
                    .flat_map(|k| [k.x, k.y, f64::from(k.visibility as u8)])
                    .collect(),
                num_keypoints: Some(g.num_visible()),
                area: g.area,
                bbox: [g.bbox.x, g.bbox.y, g.bbox.w, g.bbox.h],
                iscrowd: g.iscrowd,
                segmentation: g.segmentation.clone(),
            })
            .collect(),
        categories: Vec::new(),
    };
    serde_json::to_string(&file).expect("ground truth serializes")
}

pub fn write_detections(dets: &[Detection]) -> String {
    let raw: Vec<ResultRaw> = dets
        .iter()
        .map(|d| {
            let keypoints = match &d.keypoint_scores {
                Some(conf) => d
                    .keypoints
                    .iter()
                    .zip(conf)
                    .flat_map(|(p, c)| [p.x, p.y, *c])
                    .collect(),
                None => d.keypoints.iter().flat_map(|p| [p.x, p.y]).collect(),
            };
            ResultRaw {
                id: Some(d.id),
                image_id: d.image_id,
                category_id: person_category(),
                keypoints,
                score: d.score,
            }
        })
        .collect();
    serde_json::to_string(&raw).expect("detections serialize")
}

pub fn save_ground_truth(path: impl AsRef<Path>, gt: &GroundTruth) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, write_ground_truth(gt)).map_err(|e| Error::io(path, e))
}

pub fn save_detections(path: impl AsRef<Path>, dets: &[Detection]) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, write_detections(dets)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(k: usize, v: u8) -> String {
        (0..k)
            .map(|i| format!("{},{},{}", 10 + i, 20 + i, v))
            .collect::<Vec<_>>()
            .join(",")
    }

    fn one_annotation(kps: &str) -> String {
        format!(
            r#"{{"images":[{{"id":1,"width":640,"height":480}}],
               "annotations":[{{"id":7,"image_id":1,"keypoints":[{kps}],
               "area":2500.0,"bbox":[0,0,50,50],"iscrowd":0}}]}}"#
        )
    }

    #[test]
    fn parses_single_annotation() {
        let schema = KeypointSchema::coco_person();
        let gt = parse_ground_truth(&one_annotation(&flat(17, 2)), &schema).unwrap();
        assert_eq!(gt.images.len(), 1);
        assert_eq!(gt.instances.len(), 1);
        assert_eq!(gt.instances[0].num_visible(), 17);
        assert!(!gt.instances[0].is_excluded());
        assert_eq!(gt.instances[0].keypoints[3].x, 13.0);
    }

    #[test]
    fn unlabeled_annotation_is_kept_but_excluded() {
        let schema = KeypointSchema::coco_person();
        let gt = parse_ground_truth(&one_annotation(&flat(17, 0)), &schema).unwrap();
        assert_eq!(gt.instances.len(), 1);
        assert!(gt.instances[0].is_excluded());
        assert_eq!(gt.evaluable().count(), 0);
    }

    #[test]
    fn wrong_keypoint_count() {
        let schema = KeypointSchema::coco_person();
        let sixteen = (0..16).map(|_| "1").collect::<Vec<_>>().join(",");
        let err = parse_ground_truth(&one_annotation(&sixteen), &schema).unwrap_err();
        assert!(matches!(
            err,
            Error::KeypointCount {
                expected: 51,
                got: 16,
                ..
            }
        ));
    }

    #[test]
    fn duplicate_annotation_ids() {
        let schema = KeypointSchema::coco_person();
        let kps = flat(17, 2);
        let text = format!(
            r#"{{"annotations":[
                {{"id":1,"image_id":1,"keypoints":[{kps}],"area":1.0,"bbox":[0,0,1,1]}},
                {{"id":1,"image_id":1,"keypoints":[{kps}],"area":1.0,"bbox":[0,0,1,1]}}]}}"#
        );
        assert!(matches!(
            parse_ground_truth(&text, &schema),
            Err(Error::DuplicateId { .. })
        ));
    }

    #[test]
    fn parses_results() {
        let schema = KeypointSchema::coco_person();
        let text = format!(
            r#"[{{"image_id":1,"keypoints":[{}],"score":0.9}}]"#,
            flat(17, 1)
        );
        let dets = parse_detections(&text, &schema).unwrap();
        assert_eq!(dets.len(), 1);
        assert_eq!(dets[0].score, 0.9);
        assert_eq!(dets[0].id, 1);
        assert_eq!(dets[0].keypoint_scores.as_ref().unwrap()[0], 1.0);

        assert!(parse_detections("[]", &schema).unwrap().is_empty());
    }

    #[test]
    fn rejects_nan_score() {
        let schema = KeypointSchema::coco_person();
        let text = format!(
            r#"[{{"image_id":1,"keypoints":[{}],"score":null}}]"#,
            flat(17, 1)
        );
        let err = parse_detections(&text, &schema).unwrap_err();
        assert!(matches!(err, Error::InvalidRecord { .. }));
    }

    #[test]
    fn rejects_wrong_result_length() {
        let schema = KeypointSchema::coco_person();
        let text = r#"[{"image_id":1,"keypoints":[1,2,3],"score":0.5}]"#;
        assert!(matches!(
            parse_detections(text, &schema),
            Err(Error::KeypointCount { .. })
        ));
    }

    #[test]
    fn missing_file_is_io_error() {
        let schema = KeypointSchema::coco_person();
        let err = load_ground_truth("/nonexistent/gt.json", &schema).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }
}
