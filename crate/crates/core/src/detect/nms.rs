//! Box overlap and greedy non-maximum suppression.

use super::Detection;
use crate::frameio::BoundingBox;

/// Intersection-over-union of two boxes: overlap area divided by union
/// area, 0 for disjoint boxes.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let ix0 = a.x.max(b.x) as u64;
    let iy0 = a.y.max(b.y) as u64;
    let ix1 = ((a.x + a.w).min(b.x + b.w)) as u64;
    let iy1 = ((a.y + a.h).min(b.y + b.h)) as u64;
    if ix1 <= ix0 || iy1 <= iy0 {
        return 0.0;
    }
    let inter = (ix1 - ix0) * (iy1 - iy0);
    let union = a.area() + b.area() - inter;
    inter as f64 / union as f64
}

/// Greedy suppression: repeatedly keep the highest-scored remaining
/// detection and drop everything overlapping it with `iou >= iou_threshold`.
/// Score ties break toward the smaller frame position (y, then x, then w, h)
/// so the result does not depend on input order.
pub fn nms(dets: &[Detection], iou_threshold: f64) -> Vec<Detection> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| {
        let da = &dets[a];
        let db = &dets[b];
        db.score
            .total_cmp(&da.score)
            .then(da.bbox.y.cmp(&db.bbox.y))
            .then(da.bbox.x.cmp(&db.bbox.x))
            .then(da.bbox.w.cmp(&db.bbox.w))
            .then(da.bbox.h.cmp(&db.bbox.h))
    });

    let mut kept: Vec<Detection> = Vec::new();
    for &i in &order {
        let candidate = &dets[i];
        if kept
            .iter()
            .all(|k| iou(&k.bbox, &candidate.bbox) < iou_threshold)
        {
            kept.push(candidate.clone());
        }
    }
    kept
}
