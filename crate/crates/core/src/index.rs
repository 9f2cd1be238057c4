use std::collections::BTreeMap;

use crate::data_model::{Detection, GtInstance};

/// Records of one image. `gts` holds only evaluable instances, sorted by id.
#[derive(Debug, Default)]
pub(crate) struct ImageGroup<'a> {
    pub image_id: u64,
    pub gts: Vec<&'a GtInstance>,
    pub dets: Vec<&'a Detection>,
}

/// Groups records by image, in ascending image id order.
pub(crate) fn by_image<'a>(dets: &'a [Detection], gts: &'a [GtInstance]) -> Vec<ImageGroup<'a>> {
    let mut map: BTreeMap<u64, ImageGroup<'a>> = BTreeMap::new();
    for g in gts.iter().filter(|g| !g.is_excluded()) {
        map.entry(g.image_id)
            .or_insert_with(|| ImageGroup {
                image_id: g.image_id,
                ..Default::default()
            })
            .gts
            .push(g);
    }
    for d in dets {
        map.entry(d.image_id)
            .or_insert_with(|| ImageGroup {
                image_id: d.image_id,
                ..Default::default()
            })
            .dets
            .push(d);
    }
    let mut groups: Vec<_> = map.into_values().collect();
    for g in &mut groups {
        g.gts.sort_by_key(|g| g.id);
    }
    groups
}

/// Descending score, ascending id on ties.
pub(crate) fn score_order(a: &Detection, b: &Detection) -> std::cmp::Ordering {
    b.score.total_cmp(&a.score).then(a.id.cmp(&b.id))
}
