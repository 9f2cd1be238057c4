use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const COCO_PERSON: &str = include_str!("../../data/coco_person.json");

/// Reporting group of keypoint types.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BodyGroup {
    pub name: String,
    pub members: Vec<usize>,
}

/// Keypoint names, left/right counterparts and per-type constants `k_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SchemaFile", into = "SchemaFile")]
pub struct KeypointSchema {
    name: String,
    names: Vec<String>,
    counterpart: Vec<Option<usize>>,
    k_constants: Vec<f64>,
    groups: Vec<BodyGroup>,
}

/// On-disk layout of a schema sidecar.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct SchemaFile {
    #[serde(default)]
    name: String,
    keypoints: Vec<String>,
    #[serde(default)]
    counterparts: Vec<[usize; 2]>,
    k_constants: Vec<f64>,
    #[serde(default)]
    groups: BTreeMap<String, Vec<usize>>,
}

impl TryFrom<SchemaFile> for KeypointSchema {
    type Error = Error;

    fn try_from(file: SchemaFile) -> Result<Self> {
        let groups = file
            .groups
            .into_iter()
            .map(|(name, members)| BodyGroup { name, members })
            .collect();
        KeypointSchema::new(
            file.name,
            file.keypoints,
            &file.counterparts,
            file.k_constants,
            groups,
        )
    }
}

impl From<KeypointSchema> for SchemaFile {
    fn from(schema: KeypointSchema) -> Self {
        let counterparts = schema
            .counterpart
            .iter()
            .enumerate()
            .filter_map(|(i, c)| c.filter(|&j| j > i).map(|j| [i, j]))
            .collect();
        SchemaFile {
            name: schema.name,
            keypoints: schema.names,
            counterparts,
            k_constants: schema.k_constants,
            groups: schema
                .groups
                .into_iter()
                .map(|g| (g.name, g.members))
                .collect(),
        }
    }
}

impl KeypointSchema {
    pub fn new(
        name: impl Into<String>,
        names: Vec<String>,
        pairs: &[[usize; 2]],
        k_constants: Vec<f64>,
        groups: Vec<BodyGroup>,
    ) -> Result<Self> {
        let k = names.len();
        if k == 0 {
            return Err(Error::InvalidSchema("no keypoints".into()));
        }
        if k_constants.len() != k {
            return Err(Error::InvalidSchema(format!(
                "{} k constants for {k} keypoints",
                k_constants.len()
            )));
        }
        if let Some((i, v)) = k_constants
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v > 0.0))
        {
            return Err(Error::InvalidSchema(format!("k constant {i} is {v}")));
        }
        let mut counterpart = vec![None; k];
        for &[a, b] in pairs {
            if a >= k || b >= k || a == b {
                return Err(Error::InvalidSchema(format!(
                    "bad counterpart pair [{a}, {b}]"
                )));
            }
            if counterpart[a].is_some() || counterpart[b].is_some() {
                return Err(Error::InvalidSchema(format!(
                    "keypoint in pair [{a}, {b}] already has a counterpart"
                )));
            }
            counterpart[a] = Some(b);
            counterpart[b] = Some(a);
        }
        for g in &groups {
            if let Some(&m) = g.members.iter().find(|&&m| m >= k) {
                return Err(Error::InvalidSchema(format!(
                    "group {} references keypoint {m}",
                    g.name
                )));
            }
        }
        Ok(Self {
            name: name.into(),
            names,
            counterpart,
            k_constants,
            groups,
        })
    }

    /// The 17-keypoint COCO person schema.
    pub fn coco_person() -> Self {
        Self::from_json(COCO_PERSON).expect("bundled schema is valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schema serializes")
    }

    /// Copy of this schema with replaced per-keypoint constants.
    pub fn with_k_constants(&self, k_constants: Vec<f64>) -> Result<Self> {
        let pairs: Vec<[usize; 2]> = SchemaFile::from(self.clone()).counterparts;
        Self::new(
            self.name.clone(),
            self.names.clone(),
            &pairs,
            k_constants,
            self.groups.clone(),
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Number of keypoint types `K`.
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn counterpart(&self, i: usize) -> Option<usize> {
        self.counterpart.get(i).copied().flatten()
    }

    pub fn k(&self, i: usize) -> f64 {
        self.k_constants[i]
    }

    pub fn k_constants(&self) -> &[f64] {
        &self.k_constants
    }

    pub fn groups(&self) -> &[BodyGroup] {
        &self.groups
    }
}

impl Default for KeypointSchema {
    fn default() -> Self {
        Self::coco_person()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coco_schema_is_symmetric() {
        let s = KeypointSchema::coco_person();
        assert_eq!(s.len(), 17);
        assert_eq!(s.counterpart(0), None);
        for i in 0..s.len() {
            if let Some(j) = s.counterpart(i) {
                assert_eq!(s.counterpart(j), Some(i));
                assert_eq!(s.k(i), s.k(j));
            }
        }
        assert_eq!(s.counterpart(9), Some(10));
        assert_eq!(s.groups().len(), 4);
        assert!((s.k(11) - 0.214).abs() < 1e-15);
    }

    #[test]
    fn json_round_trip() {
        let s = KeypointSchema::coco_person();
        let back = KeypointSchema::from_json(&s.to_json()).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn rejects_bad_schemas() {
        let names = vec!["a".to_string(), "b".to_string()];
        assert!(KeypointSchema::new("x", names.clone(), &[], vec![0.1], vec![]).is_err());
        assert!(KeypointSchema::new("x", names.clone(), &[], vec![0.1, 0.0], vec![]).is_err());
        assert!(
            KeypointSchema::new("x", names.clone(), &[[0, 2]], vec![0.1, 0.1], vec![]).is_err()
        );
        assert!(KeypointSchema::new(
            "x",
            names.clone(),
            &[[0, 1], [1, 0]],
            vec![0.1, 0.1],
            vec![]
        )
        .is_err());
        let bad_group = BodyGroup {
            name: "g".into(),
            members: vec![5],
        };
        assert!(KeypointSchema::new("x", names, &[], vec![0.1, 0.1], vec![bad_group]).is_err());
    }
}
