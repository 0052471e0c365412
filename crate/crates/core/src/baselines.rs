//! Rule-based carried/not-carried baselines: hand keypoints inside the
//! firearm box (hifb), per-pose keypoint counting with carrier attribution
//! (bcfd), and best-overlap human-firearm association (ohfb).

use serde::{Deserialize, Serialize};

use crate::dataset::{link_pose_to_human, FirearmClass, FirearmDetection, ImageRecord, PairPrediction, PoseEstimate};
use crate::error::{Error, Result};
use crate::geometry::{BBox, Keypoint};

/// hifb: a firearm is carried when enough confident hand keypoints land
/// inside its box. Confidence must exceed `alpha` strictly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HifbConfig {
    pub alpha: f64,
    pub min_keypoints: usize,
}

impl Default for HifbConfig {
    fn default() -> Self {
        HifbConfig { alpha: 0.3, min_keypoints: 3 }
    }
}

impl HifbConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && (0.0..=1.0).contains(&self.alpha)) {
            return Err(Error::InvalidInput(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        Ok(())
    }
}

/// bcfd: count each pose's hand keypoints inside the firearm box; the pose
/// with the highest count of at least `beta` is the carrier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BcfdConfig {
    pub beta: usize,
}

impl Default for BcfdConfig {
    fn default() -> Self {
        BcfdConfig { beta: 1 }
    }
}

impl BcfdConfig {
    pub fn validate(&self) -> Result<()> {
        if self.beta == 0 {
            return Err(Error::InvalidInput("beta must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OverlapMetric {
    Iou,
    /// Fraction of the firearm box covered by the human box.
    Enclosure,
}

/// ohfb: associate each firearm with the single best-overlapping human,
/// dropping associations under `min_overlap`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OhfbConfig {
    pub metric: OverlapMetric,
    pub min_overlap: f64,
}

impl Default for OhfbConfig {
    fn default() -> Self {
        OhfbConfig { metric: OverlapMetric::Enclosure, min_overlap: 0.5 }
    }
}

impl OhfbConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.min_overlap.is_finite() && (0.0..=1.0).contains(&self.min_overlap)) {
            return Err(Error::InvalidInput(format!(
                "min_overlap {} outside [0, 1]",
                self.min_overlap
            )));
        }
        Ok(())
    }
}

/// Carried iff at least `min_keypoints` of the given hand keypoints lie
/// inside the firearm box with confidence strictly greater than `alpha`.
pub fn hifb_classify(firearm: &FirearmDetection, hand_keypoints: &[Keypoint], cfg: &HifbConfig) -> bool {
    let qualifying = hand_keypoints
        .iter()
        .filter(|k| k.confidence > cfg.alpha && firearm.bbox.contains(k.x, k.y))
        .count();
    qualifying >= cfg.min_keypoints
}

/// Counts both hands of every pose against the firearm box. Returns the
/// carried verdict and, when carried, the index of the carrier pose: the one
/// with the highest count, count ties breaking toward the lowest index.
pub fn bcfd_classify(firearm: &FirearmDetection, poses: &[PoseEstimate], cfg: &BcfdConfig) -> (bool, Option<usize>) {
    let mut best: Option<(usize, usize)> = None;
    for (i, pose) in poses.iter().enumerate() {
        let count = pose
            .left_hand
            .iter()
            .chain(pose.right_hand.iter())
            .filter(|k| firearm.bbox.contains(k.x, k.y))
            .count();
        if count > 0 && best.is_none_or(|(_, c)| count > c) {
            best = Some((i, count));
        }
    }
    match best {
        Some((idx, count)) if count >= cfg.beta => (true, Some(idx)),
        _ => (false, None),
    }
}

/// All hand keypoints of every pose in the record, the input hifb works on.
pub fn all_hand_keypoints(record: &ImageRecord) -> Vec<Keypoint> {
    record
        .poses
        .iter()
        .flat_map(|p| p.left_hand.iter().chain(p.right_hand.iter()))
        .copied()
        .collect()
}

/// Best-overlap association: each firearm pairs with the human maximizing
/// the configured overlap, overlap ties breaking toward the lowest human
/// index. Associations under `min_overlap` are dropped, so a firearm yields
/// at most one prediction. Prediction score is `overlap x firearm score`.
pub fn ohfb_associate(record: &ImageRecord, cfg: &OhfbConfig) -> Result<Vec<PairPrediction>> {
    let mut out = Vec::new();
    for firearm in &record.firearms {
        let mut best: Option<(usize, f64)> = None;
        for (hi, human) in record.humans.iter().enumerate() {
            let overlap = match cfg.metric {
                OverlapMetric::Iou => firearm.bbox.iou(&human.bbox)?,
                OverlapMetric::Enclosure => firearm.bbox.enclosure(&human.bbox)?,
            };
            if best.is_none_or(|(_, b)| overlap > b) {
                best = Some((hi, overlap));
            }
        }
        if let Some((hi, overlap)) = best {
            if overlap >= cfg.min_overlap {
                out.push(PairPrediction {
                    image_id: record.image_id.clone(),
                    human_bbox: record.humans[hi].bbox,
                    firearm_bbox: firearm.bbox,
                    firearm_class: firearm.class,
                    score: overlap * firearm.score,
                });
            }
        }
    }
    Ok(out)
}

/// bcfd as an association source: the carrier pose resolves to a human
/// detection (explicit index first, majority linkage otherwise) and the
/// pair is emitted at the firearm's detection score. Firearms judged
/// not-carried, or whose carrier pose links to no human, yield nothing.
pub fn bcfd_associate(record: &ImageRecord, cfg: &BcfdConfig) -> Vec<PairPrediction> {
    let human_boxes: Vec<BBox> = record.humans.iter().map(|h| h.bbox).collect();
    let mut out = Vec::new();
    for firearm in &record.firearms {
        let (carried, carrier) = bcfd_classify(firearm, &record.poses, cfg);
        if !carried {
            continue;
        }
        let pose_idx = carrier.expect("carried implies a carrier pose");
        let pose = &record.poses[pose_idx];
        let human_idx = match pose.human_index {
            Some(idx) if idx < record.humans.len() => Some(idx),
            _ => link_pose_to_human(pose, &human_boxes),
        };
        if let Some(hi) = human_idx {
            out.push(PairPrediction {
                image_id: record.image_id.clone(),
                human_bbox: record.humans[hi].bbox,
                firearm_bbox: firearm.bbox,
                firearm_class: firearm.class,
                score: firearm.score,
            });
        }
    }
    out
}

/// One annotated firearm with its carried label, for grading the flag
/// baselines. Distinct (box, class) combinations in annotation order; a
/// firearm appearing in several pairs is carried if any of them says so.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedFirearm {
    pub bbox: BBox,
    pub class: FirearmClass,
    pub carried: bool,
}

pub fn annotated_firearms(record: &ImageRecord) -> Vec<AnnotatedFirearm> {
    let mut out: Vec<AnnotatedFirearm> = Vec::new();
    for pair in &record.gt_pairs {
        if let Some(existing) = out
            .iter_mut()
            .find(|f| f.bbox == pair.firearm_bbox && f.class == pair.firearm_class)
        {
            existing.carried |= pair.carried;
        } else {
            out.push(AnnotatedFirearm {
                bbox: pair.firearm_bbox,
                class: pair.firearm_class,
                carried: pair.carried,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::HumanDetection;

    fn firearm(bbox: BBox) -> FirearmDetection {
        FirearmDetection { bbox, class: FirearmClass::Gun, score: 0.8 }
    }

    fn kp(x: f64, y: f64, confidence: f64) -> Keypoint {
        Keypoint { x, y, confidence }
    }

    #[test]
    fn hifb_three_confident_keypoints_carried() {
        let f = firearm(BBox { x1: 0.0, y1: 0.0, x2: 10.0, y2: 10.0 });
        let kps = vec![kp(1.0, 1.0, 0.9), kp(2.0, 2.0, 0.8), kp(3.0, 3.0, 0.5), kp(4.0, 4.0, 0.2)];
        assert!(hifb_classify(&f, &kps, &HifbConfig::default()));
    }

    #[test]
    fn hifb_too_few_confident_keypoints_not_carried() {
        let f = firearm(BBox { x1: 0.0, y1: 0.0, x2: 10.0, y2: 10.0 });
        let kps = vec![kp(1.0, 1.0, 0.9), kp(2.0, 2.0, 0.2)];
        assert!(!hifb_classify(&f, &kps, &HifbConfig::default()));
    }

    #[test]
    fn hifb_confidence_threshold_is_strict() {
        let f = firearm(BBox { x1: 0.0, y1: 0.0, x2: 10.0, y2: 10.0 });
        // All three sit exactly at alpha, so none qualifies.
        let kps = vec![kp(1.0, 1.0, 0.3), kp(2.0, 2.0, 0.3), kp(3.0, 3.0, 0.3)];
        assert!(!hifb_classify(&f, &kps, &HifbConfig::default()));
    }

    #[test]
    fn hifb_boundary_keypoint_counts_as_inside() {
        let f = firearm(BBox { x1: 0.0, y1: 0.0, x2: 10.0, y2: 10.0 });
        let kps = vec![kp(10.0, 10.0, 0.9), kp(0.0, 0.0, 0.9), kp(10.0, 0.0, 0.9)];
        assert!(hifb_classify(&f, &kps, &HifbConfig::default()));
    }

    #[test]
    fn hifb_outside_keypoints_do_not_count() {
        let f = firearm(BBox { x1: 0.0, y1: 0.0, x2: 10.0, y2: 10.0 });
        let kps = vec![kp(11.0, 1.0, 0.9), kp(12.0, 2.0, 0.9), kp(13.0, 3.0, 0.9)];
        assert!(!hifb_classify(&f, &kps, &HifbConfig::default()));
    }

    fn pose(hands: Vec<Keypoint>) -> PoseEstimate {
        PoseEstimate {
            human_index: None,
            body: vec![],
            left_hand: hands.clone(),
            right_hand: hands,
        }
    }

    #[test]
    fn bcfd_picks_the_pose_with_most_keypoints_inside() {
        let f = firearm(BBox { x1: 0.0, y1: 0.0, x2: 10.0, y2: 10.0 });
        let poses = vec![pose(vec![kp(50.0, 50.0, 0.9)]), pose(vec![kp(1.0, 1.0, 0.9)])];
        let (carried, carrier) = bcfd_classify(&f, &poses, &BcfdConfig::default());
        assert!(carried);
        assert_eq!(carrier, Some(1));
    }

    #[test]
    fn bcfd_empty_hands_everywhere_is_not_carried() {
        let f = firearm(BBox { x1: 0.0, y1: 0.0, x2: 10.0, y2: 10.0 });
        let poses = vec![pose(vec![]), pose(vec![])];
        assert_eq!(bcfd_classify(&f, &poses, &BcfdConfig::default()), (false, None));
    }

    #[test]
    fn bcfd_count_tie_breaks_to_lowest_pose_index() {
        let f = firearm(BBox { x1: 0.0, y1: 0.0, x2: 10.0, y2: 10.0 });
        let poses = vec![pose(vec![kp(2.0, 2.0, 0.9)]), pose(vec![kp(3.0, 3.0, 0.9)])];
        let (carried, carrier) = bcfd_classify(&f, &poses, &BcfdConfig::default());
        assert!(carried);
        assert_eq!(carrier, Some(0));
    }

    #[test]
    fn bcfd_beta_raises_the_bar() {
        let f = firearm(BBox { x1: 0.0, y1: 0.0, x2: 10.0, y2: 10.0 });
        // One keypoint per hand list = count 2 for the pose.
        let poses = vec![pose(vec![kp(1.0, 1.0, 0.9)])];
        assert_eq!(bcfd_classify(&f, &poses, &BcfdConfig { beta: 3 }), (false, None));
        assert_eq!(bcfd_classify(&f, &poses, &BcfdConfig { beta: 2 }), (true, Some(0)));
    }

    fn scene(humans: Vec<BBox>, firearms: Vec<FirearmDetection>) -> ImageRecord {
        ImageRecord {
            image_id: "scene".into(),
            width: 300.0,
            height: 300.0,
            humans: humans
                .into_iter()
                .map(|bbox| HumanDetection { bbox, score: 0.9 })
                .collect(),
            firearms,
            poses: vec![],
            gt_pairs: vec![],
        }
    }

    #[test]
    fn ohfb_prefers_the_larger_enclosure() {
        // Firearm [10,10,20,20]; human 0 covers 60% of it, human 1 all of it.
        let r = scene(
            vec![
                BBox { x1: 10.0, y1: 10.0, x2: 16.0, y2: 20.0 },
                BBox { x1: 5.0, y1: 5.0, x2: 25.0, y2: 25.0 },
            ],
            vec![firearm(BBox { x1: 10.0, y1: 10.0, x2: 20.0, y2: 20.0 })],
        );
        let preds = ohfb_associate(&r, &OhfbConfig::default()).unwrap();
        assert_eq!(preds.len(), 1);
        assert_eq!(preds[0].human_bbox, r.humans[1].bbox);
        assert!((preds[0].score - 1.0 * 0.8).abs() < 1e-12);
    }

    #[test]
    fn ohfb_drops_weak_overlaps() {
        let r = scene(
            vec![BBox { x1: 0.0, y1: 0.0, x2: 12.0, y2: 20.0 }],
            vec![firearm(BBox { x1: 10.0, y1: 10.0, x2: 20.0, y2: 20.0 })],
        );
        // Enclosure is 0.2, under the 0.5 cutoff.
        assert!(ohfb_associate(&r, &OhfbConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn ohfb_cutoff_is_inclusive() {
        let r = scene(
            vec![BBox { x1: 0.0, y1: 0.0, x2: 15.0, y2: 20.0 }],
            vec![firearm(BBox { x1: 10.0, y1: 0.0, x2: 20.0, y2: 20.0 })],
        );
        // Exactly half the firearm is covered.
        let preds = ohfb_associate(&r, &OhfbConfig::default()).unwrap();
        assert_eq!(preds.len(), 1);
        assert!((preds[0].score - 0.5 * 0.8).abs() < 1e-12);
    }

    #[test]
    fn ohfb_overlap_tie_breaks_to_lowest_human_index() {
        let r = scene(
            vec![
                BBox { x1: 0.0, y1: 0.0, x2: 30.0, y2: 30.0 },
                BBox { x1: 0.0, y1: 0.0, x2: 30.0, y2: 30.0 },
            ],
            vec![firearm(BBox { x1: 5.0, y1: 5.0, x2: 15.0, y2: 15.0 })],
        );
        let preds = ohfb_associate(&r, &OhfbConfig::default()).unwrap();
        assert_eq!(preds.len(), 1);
        assert_eq!(preds[0].human_bbox, r.humans[0].bbox);
    }

    #[test]
    fn ohfb_iou_metric_changes_the_winner() {
        // Small human tight around the firearm vs huge human covering it.
        let r = scene(
            vec![
                BBox { x1: 9.0, y1: 9.0, x2: 21.0, y2: 21.0 },
                BBox { x1: 0.0, y1: 0.0, x2: 100.0, y2: 100.0 },
            ],
            vec![firearm(BBox { x1: 10.0, y1: 10.0, x2: 20.0, y2: 20.0 })],
        );
        let by_iou = ohfb_associate(&r, &OhfbConfig { metric: OverlapMetric::Iou, min_overlap: 0.5 }).unwrap();
        assert_eq!(by_iou.len(), 1);
        assert_eq!(by_iou[0].human_bbox, r.humans[0].bbox);
        let by_enc = ohfb_associate(&r, &OhfbConfig::default()).unwrap();
        // Both enclose the firearm fully; the tie goes to human 0 anyway.
        assert_eq!(by_enc[0].human_bbox, r.humans[0].bbox);
    }

    #[test]
    fn ohfb_no_humans_means_no_predictions() {
        let r = scene(vec![], vec![firearm(BBox { x1: 10.0, y1: 10.0, x2: 20.0, y2: 20.0 })]);
        assert!(ohfb_associate(&r, &OhfbConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn annotated_firearms_dedupes_and_ors_labels() {
        use crate::dataset::GroundTruthPair;
        let mut r = scene(vec![], vec![]);
        let fb = BBox { x1: 10.0, y1: 10.0, x2: 20.0, y2: 20.0 };
        let h1 = BBox { x1: 0.0, y1: 0.0, x2: 30.0, y2: 40.0 };
        let h2 = BBox { x1: 50.0, y1: 0.0, x2: 80.0, y2: 40.0 };
        r.gt_pairs = vec![
            GroundTruthPair { human_bbox: h1, firearm_bbox: fb, firearm_class: FirearmClass::Gun, carried: false },
            GroundTruthPair { human_bbox: h2, firearm_bbox: fb, firearm_class: FirearmClass::Gun, carried: true },
        ];
        let annotated = annotated_firearms(&r);
        assert_eq!(annotated.len(), 1);
        assert!(annotated[0].carried);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            // Raising alpha can only shrink the qualifying set, so a
            // not-carried verdict never flips back to carried.
            #[test]
            fn hifb_monotone_in_alpha(
                confs in proptest::collection::vec(0.0f64..1.0, 0..12),
                lo in 0.0f64..1.0,
                hi in 0.0f64..1.0,
            ) {
                let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
                let f = firearm(BBox { x1: 0.0, y1: 0.0, x2: 10.0, y2: 10.0 });
                let kps: Vec<Keypoint> = confs.iter().map(|&c| kp(5.0, 5.0, c)).collect();
                let carried_lo = hifb_classify(&f, &kps, &HifbConfig { alpha: lo, min_keypoints: 3 });
                let carried_hi = hifb_classify(&f, &kps, &HifbConfig { alpha: hi, min_keypoints: 3 });
                prop_assert!(carried_lo || !carried_hi);
            }
        }
    }
}
