use serde::{Deserialize, Serialize};

/// Instance mask in either COCO polygon or run-length form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Segmentation {
    Polygons(Vec<Vec<f64>>),
    Rle(Rle),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rle {
    /// `[height, width]`
    pub size: [u32; 2],
    pub counts: RleCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RleCounts {
    Uncompressed(Vec<u32>),
    Compressed(String),
}

/// Decoded membership test for a segmentation.
#[derive(Debug, Clone)]
pub(crate) enum MaskShape {
    Polygons(Vec<Vec<(f64, f64)>>),
    Dense {
        height: usize,
        width: usize,
        /// Column-major, as in COCO.
        bits: Vec<bool>,
    },
}

impl Segmentation {
    pub(crate) fn shape(&self) -> Option<MaskShape> {
        match self {
            Segmentation::Polygons(polys) => {
                let rings: Vec<Vec<(f64, f64)>> = polys
                    .iter()
                    .filter(|p| p.len() >= 6)
                    .map(|p| p.chunks_exact(2).map(|c| (c[0], c[1])).collect())
                    .collect();
                (!rings.is_empty()).then_some(MaskShape::Polygons(rings))
            }
            Segmentation::Rle(rle) => {
                let counts = match &rle.counts {
                    RleCounts::Uncompressed(c) => c.clone(),
                    RleCounts::Compressed(s) => decode_counts(s)?,
                };
                let height = rle.size[0] as usize;
                let width = rle.size[1] as usize;
                let mut bits = Vec::with_capacity(height * width);
                let mut value = false;
                for run in counts {
                    bits.extend(std::iter::repeat_n(value, run as usize));
                    value = !value;
                }
                bits.resize(height * width, false);
                Some(MaskShape::Dense {
                    height,
                    width,
                    bits,
                })
            }
        }
    }
}

impl MaskShape {
    pub(crate) fn contains(&self, x: f64, y: f64) -> bool {
        match self {
            MaskShape::Polygons(rings) => {
                // even-odd rule over all rings
                let mut inside = false;
                for ring in rings {
                    let n = ring.len();
                    let mut j = n - 1;
                    for i in 0..n {
                        let (xi, yi) = ring[i];
                        let (xj, yj) = ring[j];
                        if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
                            inside = !inside;
                        }
                        j = i;
                    }
                }
                inside
            }
            MaskShape::Dense {
                height,
                width,
                bits,
            } => {
                if x < 0.0 || y < 0.0 {
                    return false;
                }
                let (col, row) = (x.floor() as usize, y.floor() as usize);
                col < *width && row < *height && bits[col * height + row]
            }
        }
    }
}

/// Decodes the compact string form of COCO run-length counts.
fn decode_counts(s: &str) -> Option<Vec<u32>> {
    let bytes = s.as_bytes();
    let mut counts: Vec<u32> = Vec::new();
    let mut p = 0;
    while p < bytes.len() {
        let mut x: i64 = 0;
        let mut k = 0;
        loop {
            let c = i64::from(*bytes.get(p)?) - 48;
            x |= (c & 0x1f) << (5 * k);
            let more = c & 0x20 != 0;
            p += 1;
            k += 1;
            if !more {
                if c & 0x10 != 0 {
                    x |= -1_i64 << (5 * k);
                }
                break;
            }
        }
        if counts.len() > 2 {
            x += i64::from(counts[counts.len() - 2]);
        }
        counts.push(u32::try_from(x).ok()?);
    }
    Some(counts)
}
