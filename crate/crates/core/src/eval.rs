//! Evaluation of carried-pair predictions: canonical ranking, greedy
//! matching against annotated pairs, all-point-interpolated average
//! precision per firearm class and pooled, and carried-flag accuracy.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{write_jsonl, FirearmClass, GroundTruthPair, ImageRecord, PairPrediction};
use crate::error::{Error, Result};
use crate::geometry::BBox;

/// IoU both member boxes must reach for a prediction to count as a true
/// positive.
pub const DEFAULT_IOU_THRESH: f64 = 0.5;

/// Annotated pairs grouped by image. Images with no annotated pairs are
/// kept so strict evaluation can tell "image with no positives" apart from
/// "image the dataset never saw".
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GroundTruthSet {
    images: BTreeMap<String, Vec<GroundTruthPair>>,
}

impl GroundTruthSet {
    pub fn from_records(records: &[ImageRecord]) -> Self {
        let mut images: BTreeMap<String, Vec<GroundTruthPair>> = BTreeMap::new();
        for record in records {
            images
                .entry(record.image_id.clone())
                .or_default()
                .extend(record.gt_pairs.iter().cloned());
        }
        GroundTruthSet { images }
    }

    pub fn contains_image(&self, image_id: &str) -> bool {
        self.images.contains_key(image_id)
    }

    pub fn num_images(&self) -> usize {
        self.images.len()
    }

    pub fn pairs_for(&self, image_id: &str) -> &[GroundTruthPair] {
        self.images.get(image_id).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Number of carried pairs, optionally restricted to one class.
    pub fn carried_count(&self, class: Option<FirearmClass>) -> usize {
        self.images
            .values()
            .flatten()
            .filter(|gt| gt.carried && class.is_none_or(|c| gt.firearm_class == c))
            .count()
    }
}

fn cmp_boxes(a: &BBox, b: &BBox) -> Ordering {
    [a.x1, a.y1, a.x2, a.y2]
        .iter()
        .zip([b.x1, b.y1, b.x2, b.y2].iter())
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Canonical evaluation order: descending score, then image id, then both
/// boxes lexicographically, then class. Total over distinct predictions,
/// so evaluation does not depend on input order.
fn cmp_rank(a: &PairPrediction, b: &PairPrediction) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.image_id.cmp(&b.image_id))
        .then_with(|| cmp_boxes(&a.human_bbox, &b.human_bbox))
        .then_with(|| cmp_boxes(&a.firearm_bbox, &b.firearm_bbox))
        .then_with(|| a.firearm_class.cmp(&b.firearm_class))
}

/// Indices of `preds` in canonical evaluation order.
pub fn canonical_order(preds: &[PairPrediction]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&i, &j| cmp_rank(&preds[i], &preds[j]));
    order
}

/// Matching outcome for one prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct PredMatch {
    /// Index into the prediction slice given to [`match_pairs`].
    pub pred_index: usize,
    pub is_tp: bool,
    /// Index into the matched image's annotated-pair list.
    pub matched_gt: Option<usize>,
}

fn iou_or_zero(a: &BBox, b: &BBox) -> f64 {
    a.iou(b).unwrap_or(0.0)
}

/// Greedy matching in canonical order. A prediction is a true positive iff
/// some not-yet-matched carried pair in the same image with the same
/// firearm class has IoU at least `iou_thresh` on the human box AND the
/// firearm box. Among eligible pairs the one maximizing the smaller of the
/// two IoUs wins; ties go to the lowest annotation index. Each annotated
/// pair matches at most one prediction. Output is in canonical rank order.
pub fn match_pairs(preds: &[PairPrediction], gts: &GroundTruthSet, iou_thresh: f64) -> Vec<PredMatch> {
    let mut used: HashMap<&str, Vec<bool>> = gts
        .images
        .iter()
        .map(|(id, pairs)| (id.as_str(), vec![false; pairs.len()]))
        .collect();
    let mut out = Vec::with_capacity(preds.len());
    for i in canonical_order(preds) {
        let pred = &preds[i];
        let mut best: Option<(usize, f64)> = None;
        if let Some(pairs) = gts.images.get(&pred.image_id) {
            let used = used.get(pred.image_id.as_str()).unwrap();
            for (g, gt) in pairs.iter().enumerate() {
                if used[g] || !gt.carried || gt.firearm_class != pred.firearm_class {
                    continue;
                }
                let iou_h = iou_or_zero(&pred.human_bbox, &gt.human_bbox);
                let iou_f = iou_or_zero(&pred.firearm_bbox, &gt.firearm_bbox);
                let quality = iou_h.min(iou_f);
                if quality >= iou_thresh && best.is_none_or(|(_, q)| quality > q) {
                    best = Some((g, quality));
                }
            }
        }
        if let Some((g, _)) = best {
            used.get_mut(pred.image_id.as_str()).unwrap()[g] = true;
        }
        out.push(PredMatch { pred_index: i, is_tp: best.is_some(), matched_gt: best.map(|(g, _)| g) });
    }
    out
}

/// Area under the precision-recall curve with all-point interpolation: the
/// precision at each recall level is the maximum precision at that recall
/// or beyond (the envelope). `flags` must be in descending-score order.
/// With no positives to find, an empty prediction list scores 1 and any
/// prediction scores 0.
pub fn average_precision(flags: &[bool], num_gt_positives: usize) -> f64 {
    if num_gt_positives == 0 {
        return if flags.is_empty() { 1.0 } else { 0.0 };
    }
    let n = flags.len();
    let mut envelope = Vec::with_capacity(n);
    let mut tp = 0usize;
    for (k, &f) in flags.iter().enumerate() {
        if f {
            tp += 1;
        }
        envelope.push(tp as f64 / (k + 1) as f64);
    }
    for k in (0..n.saturating_sub(1)).rev() {
        envelope[k] = envelope[k].max(envelope[k + 1]);
    }
    let mut ap = 0.0;
    for (k, &f) in flags.iter().enumerate() {
        if f {
            ap += envelope[k];
        }
    }
    ap / num_gt_positives as f64
}

/// One precision-recall curve sample, taken at a prediction rank.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub recall: f64,
    pub precision: f64,
}

/// Metrics for one slice of the prediction set (one class, or pooled).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub ap: f64,
    pub num_gt: usize,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    /// Raw precision/recall at each rank, in canonical order.
    pub curve: Vec<PrPoint>,
}

fn class_report(flags: &[bool], num_gt: usize) -> ClassReport {
    let tp = flags.iter().filter(|f| **f).count();
    let mut curve = Vec::with_capacity(flags.len());
    let mut running_tp = 0usize;
    for (k, &f) in flags.iter().enumerate() {
        if f {
            running_tp += 1;
        }
        curve.push(PrPoint {
            recall: if num_gt == 0 { 0.0 } else { running_tp as f64 / num_gt as f64 },
            precision: running_tp as f64 / (k + 1) as f64,
        });
    }
    ClassReport {
        ap: average_precision(flags, num_gt),
        num_gt,
        true_positives: tp,
        false_positives: flags.len() - tp,
        false_negatives: num_gt - tp,
        curve,
    }
}

/// Per-class and pooled carried-pair detection metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub gun: ClassReport,
    pub rifle: ClassReport,
    pub pooled: ClassReport,
}

impl EvalReport {
    pub fn ap_ghold(&self) -> f64 {
        self.gun.ap
    }

    pub fn ap_rhold(&self) -> f64 {
        self.rifle.ap
    }

    /// AP of the pooled prediction set. This is not the mean of the two
    /// class APs: every prediction competes in one ranking.
    pub fn ap_hold(&self) -> f64 {
        self.pooled.ap
    }
}

/// Evaluates predictions against annotated pairs. Matching runs once over
/// the pooled canonical ranking; because a true positive requires class
/// agreement, restricting that ranking to one class reproduces exactly the
/// matching that class alone would produce. In strict mode a prediction
/// naming an image absent from the ground-truth set is an error; in
/// lenient mode it simply cannot match and counts as a false positive.
pub fn evaluate(preds: &[PairPrediction], gts: &GroundTruthSet, iou_thresh: f64, strict: bool) -> Result<EvalReport> {
    if !(iou_thresh.is_finite() && 0.0 < iou_thresh && iou_thresh <= 1.0) {
        return Err(Error::InvalidInput(format!("iou threshold {iou_thresh} outside (0, 1]")));
    }
    if strict {
        if let Some(p) = preds.iter().find(|p| !gts.contains_image(&p.image_id)) {
            return Err(Error::UnknownImage(p.image_id.clone()));
        }
    }
    let matches = match_pairs(preds, gts, iou_thresh);
    let pooled_flags: Vec<bool> = matches.iter().map(|m| m.is_tp).collect();
    let class_flags = |class: FirearmClass| -> Vec<bool> {
        matches
            .iter()
            .filter(|m| preds[m.pred_index].firearm_class == class)
            .map(|m| m.is_tp)
            .collect()
    };
    Ok(EvalReport {
        gun: class_report(&class_flags(FirearmClass::Gun), gts.carried_count(Some(FirearmClass::Gun))),
        rifle: class_report(&class_flags(FirearmClass::Rifle), gts.carried_count(Some(FirearmClass::Rifle))),
        pooled: class_report(&pooled_flags, gts.carried_count(None)),
    })
}

/// Per-class and overall fraction of firearms whose predicted carried flag
/// matches the annotation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AccuracyReport {
    /// NaN when no firearm of the class exists.
    pub acc_gun: f64,
    pub acc_rifle: f64,
    /// Fraction over all firearms pooled, not the mean of class accuracies.
    pub acc_overall: f64,
}

/// Compares aligned per-firearm carried flags. A class with no firearms
/// gets NaN accuracy (rendered as a dash); the overall figure is computed
/// over whatever firearms exist.
pub fn classification_accuracy(pred_flags: &[bool], gt_flags: &[bool], classes: &[FirearmClass]) -> Result<AccuracyReport> {
    if gt_flags.len() != pred_flags.len() {
        return Err(Error::DimensionMismatch { expected: pred_flags.len(), got: gt_flags.len() });
    }
    if classes.len() != pred_flags.len() {
        return Err(Error::DimensionMismatch { expected: pred_flags.len(), got: classes.len() });
    }
    let frac = |class: Option<FirearmClass>| -> f64 {
        let mut total = 0usize;
        let mut correct = 0usize;
        for ((p, g), c) in pred_flags.iter().zip(gt_flags).zip(classes) {
            if class.is_none_or(|want| *c == want) {
                total += 1;
                if p == g {
                    correct += 1;
                }
            }
        }
        correct as f64 / total as f64
    };
    Ok(AccuracyReport {
        acc_gun: frac(Some(FirearmClass::Gun)),
        acc_rifle: frac(Some(FirearmClass::Rifle)),
        acc_overall: frac(None),
    })
}

fn pct(v: f64) -> String {
    if v.is_nan() {
        "-".to_string()
    } else {
        format!("{:.2}", v * 100.0)
    }
}

/// Plain-text result table, one method per row, AP columns in percent.
pub fn render_eval_table(method: &str, report: &EvalReport) -> String {
    let w = method.len().max("Method".len());
    let mut out = String::new();
    out.push_str(&format!("{:<w$}  {:>8}  {:>8}  {:>7}\n", "Method", "AP_Ghold", "AP_Rhold", "AP_hold"));
    out.push_str(&format!(
        "{:<w$}  {:>8}  {:>8}  {:>7}\n",
        method,
        pct(report.gun.ap),
        pct(report.rifle.ap),
        pct(report.pooled.ap),
    ));
    out
}

/// Plain-text carried/not-carried accuracy table, values in percent.
pub fn render_accuracy_table(method: &str, report: &AccuracyReport) -> String {
    let w = method.len().max("Method".len());
    let mut out = String::new();
    out.push_str(&format!("{:<w$}  {:>7}  {:>9}  {:>7}\n", "Method", "Acc_Gun", "Acc_Rifle", "Overall"));
    out.push_str(&format!(
        "{:<w$}  {:>7}  {:>9}  {:>7}\n",
        method,
        pct(report.acc_gun),
        pct(report.acc_rifle),
        pct(report.acc_overall),
    ));
    out
}

/// Writes the report as a single JSON line, floats at six decimals.
pub fn save_report(report: &EvalReport, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = BufWriter::new(File::create(path)?);
    write_jsonl(&mut out, std::slice::from_ref(report), path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn bx(x1: f64, y1: f64, x2: f64, y2: f64) -> BBox {
        BBox { x1, y1, x2, y2 }
    }

    fn gt(h: BBox, f: BBox, class: FirearmClass, carried: bool) -> GroundTruthPair {
        GroundTruthPair { human_bbox: h, firearm_bbox: f, firearm_class: class, carried }
    }

    fn pred(image: &str, h: BBox, f: BBox, class: FirearmClass, score: f64) -> PairPrediction {
        PairPrediction {
            image_id: image.to_string(),
            human_bbox: h,
            firearm_bbox: f,
            firearm_class: class,
            score,
        }
    }

    fn set(entries: &[(&str, Vec<GroundTruthPair>)]) -> GroundTruthSet {
        let records: Vec<ImageRecord> = entries
            .iter()
            .map(|(id, pairs)| ImageRecord {
                image_id: id.to_string(),
                width: 1000.0,
                height: 1000.0,
                humans: vec![],
                firearms: vec![],
                poses: vec![],
                gt_pairs: pairs.clone(),
            })
            .collect();
        GroundTruthSet::from_records(&records)
    }

    #[test]
    fn ground_truth_set_keeps_empty_images() {
        let gts = set(&[("a", vec![]), ("b", vec![gt(bx(0.0, 0.0, 10.0, 10.0), bx(2.0, 2.0, 4.0, 4.0), FirearmClass::Gun, true)])]);
        assert!(gts.contains_image("a"));
        assert!(gts.contains_image("b"));
        assert!(!gts.contains_image("c"));
        assert_eq!(gts.num_images(), 2);
        assert_eq!(gts.carried_count(None), 1);
        assert_eq!(gts.carried_count(Some(FirearmClass::Rifle)), 0);
    }

    #[test]
    fn exact_prediction_is_tp() {
        let h = bx(0.0, 0.0, 10.0, 10.0);
        let f = bx(2.0, 2.0, 4.0, 4.0);
        let gts = set(&[("a", vec![gt(h, f, FirearmClass::Gun, true)])]);
        let preds = vec![pred("a", h, f, FirearmClass::Gun, 0.9)];
        let m = match_pairs(&preds, &gts, 0.5);
        assert_eq!(m, vec![PredMatch { pred_index: 0, is_tp: true, matched_gt: Some(0) }]);
    }

    #[test]
    fn weak_human_box_is_fp_despite_exact_firearm() {
        let h = bx(0.0, 0.0, 10.0, 10.0);
        let f = bx(2.0, 2.0, 4.0, 4.0);
        let gts = set(&[("a", vec![gt(h, f, FirearmClass::Gun, true)])]);
        // Human IoU 30/100 = 0.3, firearm IoU 1.
        let preds = vec![pred("a", bx(0.0, 0.0, 3.0, 10.0), f, FirearmClass::Gun, 0.9)];
        let m = match_pairs(&preds, &gts, 0.5);
        assert!(!m[0].is_tp);
        assert_eq!(m[0].matched_gt, None);
    }

    #[test]
    fn duplicate_predictions_split_tp_fp() {
        let h = bx(0.0, 0.0, 10.0, 10.0);
        let f = bx(2.0, 2.0, 4.0, 4.0);
        let gts = set(&[("a", vec![gt(h, f, FirearmClass::Gun, true)])]);
        let preds = vec![
            pred("a", h, f, FirearmClass::Gun, 0.7),
            pred("a", h, f, FirearmClass::Gun, 0.9),
        ];
        let m = match_pairs(&preds, &gts, 0.5);
        // Canonical order puts the 0.9 prediction first; it takes the GT.
        assert_eq!(m[0].pred_index, 1);
        assert!(m[0].is_tp);
        assert_eq!(m[1].pred_index, 0);
        assert!(!m[1].is_tp);
    }

    #[test]
    fn class_mismatch_is_fp() {
        let h = bx(0.0, 0.0, 10.0, 10.0);
        let f = bx(2.0, 2.0, 4.0, 4.0);
        let gts = set(&[("a", vec![gt(h, f, FirearmClass::Gun, true)])]);
        let preds = vec![pred("a", h, f, FirearmClass::Rifle, 0.9)];
        assert!(!match_pairs(&preds, &gts, 0.5)[0].is_tp);
    }

    #[test]
    fn not_carried_annotations_never_match() {
        let h = bx(0.0, 0.0, 10.0, 10.0);
        let f = bx(2.0, 2.0, 4.0, 4.0);
        let gts = set(&[("a", vec![gt(h, f, FirearmClass::Gun, false)])]);
        let preds = vec![pred("a", h, f, FirearmClass::Gun, 0.9)];
        assert!(!match_pairs(&preds, &gts, 0.5)[0].is_tp);
    }

    #[test]
    fn greedy_prefers_larger_min_iou() {
        let f = bx(20.0, 20.0, 30.0, 30.0);
        // GT 0's human overlaps the prediction less than GT 1's.
        let gts = set(&[(
            "a",
            vec![
                gt(bx(0.0, 0.0, 16.0, 10.0), f, FirearmClass::Gun, true),
                gt(bx(0.0, 0.0, 10.0, 10.0), f, FirearmClass::Gun, true),
            ],
        )]);
        let preds = vec![pred("a", bx(0.0, 0.0, 10.0, 10.0), f, FirearmClass::Gun, 0.9)];
        let m = match_pairs(&preds, &gts, 0.5);
        assert!(m[0].is_tp);
        assert_eq!(m[0].matched_gt, Some(1));
    }

    #[test]
    fn quality_tie_takes_lowest_annotation_index() {
        let h = bx(0.0, 0.0, 10.0, 10.0);
        let f = bx(2.0, 2.0, 4.0, 4.0);
        let gts = set(&[("a", vec![gt(h, f, FirearmClass::Gun, true), gt(h, f, FirearmClass::Gun, true)])]);
        let preds = vec![pred("a", h, f, FirearmClass::Gun, 0.9)];
        assert_eq!(match_pairs(&preds, &gts, 0.5)[0].matched_gt, Some(0));
    }

    #[test]
    fn each_gt_matches_at_most_once() {
        let h = bx(0.0, 0.0, 10.0, 10.0);
        let f = bx(2.0, 2.0, 4.0, 4.0);
        let gts = set(&[("a", vec![gt(h, f, FirearmClass::Gun, true)])]);
        let preds: Vec<PairPrediction> =
            (0..5).map(|i| pred("a", h, f, FirearmClass::Gun, 0.9 - 0.1 * i as f64)).collect();
        let m = match_pairs(&preds, &gts, 0.5);
        let matched: Vec<usize> = m.iter().filter_map(|x| x.matched_gt).collect();
        assert_eq!(matched, vec![0]);
        assert_eq!(m.iter().filter(|x| x.is_tp).count(), 1);
    }

    #[test]
    fn ap_known_values() {
        assert_eq!(average_precision(&[], 0), 1.0);
        assert_eq!(average_precision(&[false], 0), 0.0);
        assert_eq!(average_precision(&[true], 1), 1.0);
        assert_eq!(average_precision(&[false, true], 1), 0.5);
        assert_eq!(average_precision(&[true, false], 1), 1.0);
        assert_eq!(average_precision(&[], 3), 0.0);
        // [TP, FP, TP] with 2 positives: envelope 1 at recall 1/2, 2/3 at 1.
        assert_abs_diff_eq!(average_precision(&[true, false, true], 2), 5.0 / 6.0, epsilon = 1e-15);
    }

    /// Brute-force envelope enumeration: for each true positive, scan every
    /// rank at or beyond it for the best precision, recomputing counts from
    /// scratch.
    fn ap_oracle(flags: &[bool], num_gt: usize) -> f64 {
        if num_gt == 0 {
            return if flags.is_empty() { 1.0 } else { 0.0 };
        }
        let mut ap = 0.0;
        for k in 0..flags.len() {
            if !flags[k] {
                continue;
            }
            let mut best = 0.0f64;
            for j in k..flags.len() {
                let tp = flags[..=j].iter().filter(|f| **f).count();
                best = best.max(tp as f64 / (j + 1) as f64);
            }
            ap += best / num_gt as f64;
        }
        ap
    }

    #[test]
    fn evaluate_perfect_predictions_score_one() {
        let gts = set(&[
            ("a", vec![
                gt(bx(0.0, 0.0, 10.0, 10.0), bx(2.0, 2.0, 4.0, 4.0), FirearmClass::Gun, true),
                gt(bx(20.0, 0.0, 30.0, 10.0), bx(22.0, 2.0, 24.0, 4.0), FirearmClass::Rifle, true),
            ]),
            ("b", vec![gt(bx(0.0, 0.0, 10.0, 10.0), bx(2.0, 2.0, 4.0, 4.0), FirearmClass::Rifle, true)]),
        ]);
        let preds = vec![
            pred("a", bx(0.0, 0.0, 10.0, 10.0), bx(2.0, 2.0, 4.0, 4.0), FirearmClass::Gun, 1.0),
            pred("a", bx(20.0, 0.0, 30.0, 10.0), bx(22.0, 2.0, 24.0, 4.0), FirearmClass::Rifle, 1.0),
            pred("b", bx(0.0, 0.0, 10.0, 10.0), bx(2.0, 2.0, 4.0, 4.0), FirearmClass::Rifle, 1.0),
        ];
        let report = evaluate(&preds, &gts, 0.5, true).unwrap();
        assert_eq!(report.ap_ghold(), 1.0);
        assert_eq!(report.ap_rhold(), 1.0);
        assert_eq!(report.ap_hold(), 1.0);
        assert_eq!(report.pooled.true_positives, 3);
        assert_eq!(report.pooled.false_positives, 0);
        assert_eq!(report.pooled.false_negatives, 0);
        assert_eq!(report.gun.num_gt, 1);
        assert_eq!(report.rifle.num_gt, 2);
    }

    #[test]
    fn evaluate_empty_predictions_score_zero() {
        let gts = set(&[("a", vec![gt(bx(0.0, 0.0, 10.0, 10.0), bx(2.0, 2.0, 4.0, 4.0), FirearmClass::Gun, true)])]);
        let report = evaluate(&[], &gts, 0.5, true).unwrap();
        assert_eq!(report.ap_ghold(), 0.0);
        assert_eq!(report.ap_hold(), 0.0);
        // No rifle annotations and no rifle predictions: vacuously perfect.
        assert_eq!(report.ap_rhold(), 1.0);
        assert_eq!(report.pooled.false_negatives, 1);
    }

    #[test]
    fn evaluate_mixed_fixture_matches_hand_enumeration() {
        // Images a and b, three carried GTs, four predictions: two TPs and
        // two FPs interleaved by score.
        let g1h = bx(0.0, 0.0, 10.0, 10.0);
        let g1f = bx(2.0, 2.0, 4.0, 4.0);
        let g2h = bx(50.0, 0.0, 60.0, 10.0);
        let g2f = bx(52.0, 2.0, 54.0, 4.0);
        let g3h = bx(0.0, 0.0, 12.0, 12.0);
        let g3f = bx(3.0, 3.0, 5.0, 5.0);
        let gts = set(&[
            ("a", vec![
                gt(g1h, g1f, FirearmClass::Gun, true),
                gt(g2h, g2f, FirearmClass::Gun, true),
            ]),
            ("b", vec![gt(g3h, g3f, FirearmClass::Rifle, true)]),
        ]);
        let preds = vec![
            pred("a", g1h, g1f, FirearmClass::Gun, 0.9),
            pred("a", bx(80.0, 80.0, 90.0, 90.0), bx(82.0, 82.0, 84.0, 84.0), FirearmClass::Gun, 0.8),
            pred("b", g3h, g3f, FirearmClass::Rifle, 0.7),
            pred("b", bx(80.0, 80.0, 90.0, 90.0), bx(82.0, 82.0, 84.0, 84.0), FirearmClass::Rifle, 0.6),
        ];
        let report = evaluate(&preds, &gts, 0.5, true).unwrap();
        // Pooled flags [TP, FP, TP, FP], 3 positives: 1/3 + (2/3)/3 = 5/9.
        assert_abs_diff_eq!(report.ap_hold(), 5.0 / 9.0, epsilon = 1e-12);
        // Gun flags [TP, FP], 2 positives: 0.5. Rifle flags [TP, FP], 1: 1.
        assert_abs_diff_eq!(report.ap_ghold(), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(report.ap_rhold(), 1.0, epsilon = 1e-12);
        assert_eq!(report.pooled.true_positives, 2);
        assert_eq!(report.pooled.false_positives, 2);
        assert_eq!(report.pooled.false_negatives, 1);
        // Not the mean of the class APs.
        assert!((report.ap_hold() - 0.75).abs() > 0.1);
    }

    #[test]
    fn evaluate_is_input_order_invariant() {
        let h = bx(0.0, 0.0, 10.0, 10.0);
        let f = bx(2.0, 2.0, 4.0, 4.0);
        let gts = set(&[("a", vec![gt(h, f, FirearmClass::Gun, true)])]);
        let mut preds = vec![
            pred("a", h, f, FirearmClass::Gun, 0.9),
            pred("a", bx(30.0, 30.0, 40.0, 40.0), bx(32.0, 32.0, 34.0, 34.0), FirearmClass::Gun, 0.9),
            pred("a", h, f, FirearmClass::Gun, 0.4),
        ];
        let before = evaluate(&preds, &gts, 0.5, true).unwrap();
        preds.reverse();
        let after = evaluate(&preds, &gts, 0.5, true).unwrap();
        assert_eq!(before, after);
    }

    #[test]
    fn evaluate_score_scaling_keeps_ap() {
        let h = bx(0.0, 0.0, 10.0, 10.0);
        let f = bx(2.0, 2.0, 4.0, 4.0);
        let gts = set(&[("a", vec![gt(h, f, FirearmClass::Gun, true)])]);
        let preds = vec![
            pred("a", h, f, FirearmClass::Gun, 0.9),
            pred("a", bx(30.0, 30.0, 40.0, 40.0), bx(32.0, 32.0, 34.0, 34.0), FirearmClass::Gun, 0.5),
        ];
        let base = evaluate(&preds, &gts, 0.5, true).unwrap();
        let scaled: Vec<PairPrediction> = preds
            .iter()
            .map(|p| PairPrediction { score: p.score * 0.5, ..p.clone() })
            .collect();
        let after = evaluate(&scaled, &gts, 0.5, true).unwrap();
        assert_eq!(base.ap_hold(), after.ap_hold());
        assert_eq!(base.ap_ghold(), after.ap_ghold());
    }

    #[test]
    fn strict_mode_rejects_unknown_image() {
        let gts = set(&[("a", vec![])]);
        let preds = vec![pred("ghost", bx(0.0, 0.0, 10.0, 10.0), bx(2.0, 2.0, 4.0, 4.0), FirearmClass::Gun, 0.9)];
        match evaluate(&preds, &gts, 0.5, true) {
            Err(Error::UnknownImage(id)) => assert_eq!(id, "ghost"),
            other => panic!("expected unknown-image error, got {other:?}"),
        }
        let report = evaluate(&preds, &gts, 0.5, false).unwrap();
        assert_eq!(report.pooled.false_positives, 1);
        assert_eq!(report.ap_hold(), 0.0);
    }

    #[test]
    fn evaluate_rejects_bad_threshold() {
        let gts = set(&[("a", vec![])]);
        assert!(evaluate(&[], &gts, 0.0, true).is_err());
        assert!(evaluate(&[], &gts, 1.5, true).is_err());
        assert!(evaluate(&[], &gts, f64::NAN, true).is_err());
    }

    #[test]
    fn accuracy_known_values() {
        use FirearmClass::{Gun, Rifle};
        let classes = [Gun, Gun, Gun, Gun, Rifle, Rifle];
        let gt_flags = [true, true, false, false, true, false];
        let all_right = classification_accuracy(&gt_flags, &gt_flags, &classes).unwrap();
        assert_eq!((all_right.acc_gun, all_right.acc_rifle, all_right.acc_overall), (1.0, 1.0, 1.0));
        let flipped: Vec<bool> = gt_flags.iter().map(|f| !f).collect();
        let all_wrong = classification_accuracy(&flipped, &gt_flags, &classes).unwrap();
        assert_eq!((all_wrong.acc_gun, all_wrong.acc_rifle, all_wrong.acc_overall), (0.0, 0.0, 0.0));
        // Guns 3/4 right, rifles 1/2 right.
        let preds = [true, true, false, true, true, true];
        let mixed = classification_accuracy(&preds, &gt_flags, &classes).unwrap();
        assert_eq!(mixed.acc_gun, 0.75);
        assert_eq!(mixed.acc_rifle, 0.5);
        assert_eq!(mixed.acc_overall, 4.0 / 6.0);
    }

    #[test]
    fn accuracy_empty_class_is_nan() {
        let report = classification_accuracy(&[true], &[true], &[FirearmClass::Gun]).unwrap();
        assert_eq!(report.acc_gun, 1.0);
        assert!(report.acc_rifle.is_nan());
        assert_eq!(report.acc_overall, 1.0);
    }

    #[test]
    fn accuracy_rejects_length_mismatch() {
        assert!(matches!(
            classification_accuracy(&[true], &[true, false], &[FirearmClass::Gun]),
            Err(Error::DimensionMismatch { expected: 1, got: 2 })
        ));
        assert!(matches!(
            classification_accuracy(&[true], &[true], &[]),
            Err(Error::DimensionMismatch { expected: 1, got: 0 })
        ));
    }

    #[test]
    fn eval_table_layout() {
        let gts = set(&[("a", vec![gt(bx(0.0, 0.0, 10.0, 10.0), bx(2.0, 2.0, 4.0, 4.0), FirearmClass::Gun, true)])]);
        let preds = vec![pred("a", bx(0.0, 0.0, 10.0, 10.0), bx(2.0, 2.0, 4.0, 4.0), FirearmClass::Gun, 1.0)];
        let report = evaluate(&preds, &gts, 0.5, true).unwrap();
        let table = render_eval_table("HFPD", &report);
        let mut lines = table.lines();
        let header = lines.next().unwrap();
        let row = lines.next().unwrap();
        assert!(header.contains("AP_Ghold") && header.contains("AP_Rhold") && header.contains("AP_hold"));
        assert!(row.starts_with("HFPD"));
        assert_eq!(row.matches("100.00").count(), 3);
        // Columns line up.
        assert_eq!(header.len(), row.len());
    }

    #[test]
    fn accuracy_table_renders_dash_for_nan() {
        let report = AccuracyReport { acc_gun: 0.492, acc_rifle: f64::NAN, acc_overall: 0.492 };
        let table = render_accuracy_table("HiFB", &report);
        let row = table.lines().nth(1).unwrap();
        assert!(row.contains("49.20"));
        assert!(row.contains('-'));
    }

    #[test]
    fn report_saves_as_single_json_line() {
        let gts = set(&[("a", vec![gt(bx(0.0, 0.0, 10.0, 10.0), bx(2.0, 2.0, 4.0, 4.0), FirearmClass::Gun, true)])]);
        let preds = vec![pred("a", bx(0.0, 0.0, 10.0, 10.0), bx(2.0, 2.0, 4.0, 4.0), FirearmClass::Gun, 1.0)];
        let report = evaluate(&preds, &gts, 0.5, true).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("report.json");
        save_report(&report, &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert!(text.ends_with('\n'));
        assert!(text.contains("\"ap\":1.000000"));
        let back: EvalReport = serde_json::from_str(text.trim()).unwrap();
        assert_eq!(back.ap_hold(), 1.0);
    }

    proptest! {
        #[test]
        fn ap_matches_brute_force_oracle(flags in proptest::collection::vec(any::<bool>(), 0..40), extra_gt in 0usize..5) {
            let num_gt = flags.iter().filter(|f| **f).count() + extra_gt;
            let got = average_precision(&flags, num_gt);
            let want = ap_oracle(&flags, num_gt);
            prop_assert!((got - want).abs() <= 1e-12, "{got} vs {want}");
            prop_assert!((0.0..=1.0).contains(&got));
        }

        #[test]
        fn matching_never_reuses_ground_truth(seed in 0u64..500) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut pairs = Vec::new();
            for _ in 0..rng.random_range(1..6) {
                let x = rng.random_range(0.0..80.0f64).floor();
                let y = rng.random_range(0.0..80.0f64).floor();
                pairs.push(gt(
                    bx(x, y, x + rng.random_range(5.0..20.0f64).floor(), y + rng.random_range(5.0..20.0f64).floor()),
                    bx(x + 1.0, y + 1.0, x + 4.0, y + 4.0),
                    if rng.random_bool(0.5) { FirearmClass::Gun } else { FirearmClass::Rifle },
                    rng.random_bool(0.7),
                ));
            }
            let gts = set(&[("a", pairs.clone())]);
            let mut preds = Vec::new();
            for _ in 0..rng.random_range(0..12) {
                let source = &pairs[rng.random_range(0..pairs.len())];
                let dx = rng.random_range(-3.0..3.0f64).floor();
                preds.push(PairPrediction {
                    image_id: "a".into(),
                    human_bbox: bx(source.human_bbox.x1 + dx, source.human_bbox.y1, source.human_bbox.x2 + dx, source.human_bbox.y2),
                    firearm_bbox: source.firearm_bbox,
                    firearm_class: source.firearm_class,
                    score: (rng.random_range(0..100) as f64) / 100.0,
                });
            }
            let matches = match_pairs(&preds, &gts, 0.5);
            let mut seen = std::collections::HashSet::new();
            for m in &matches {
                prop_assert_eq!(m.is_tp, m.matched_gt.is_some());
                if let Some(g) = m.matched_gt {
                    prop_assert!(seen.insert(g), "annotation {} matched twice", g);
                    prop_assert!(pairs[g].carried);
                }
            }
        }
    }
}
