//! Seeded synthetic scene generator. Builds small annotated datasets with
//! known carrier geometry: carriers hold a firearm at the right hip with
//! hand keypoints inside its box, crowded scenes add a flanking bystander
//! whose box encloses that firearm more tightly than the carrier's (so
//! pure-overlap association picks the wrong person), and background
//! firearms sit uncarried inside a bystander's silhouette. Detections are
//! the annotation boxes plus bounded jitter. All coordinates land on a
//! 0.01 grid so six-decimal serialization round-trips exactly.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::{
    FirearmClass, FirearmDetection, GroundTruthPair, HumanDetection, ImageRecord, PoseEstimate,
};
use crate::error::{Error, Result};
use crate::geometry::{BBox, Keypoint};

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureConfig {
    pub num_images: usize,
    pub frame_width: f64,
    pub frame_height: f64,
    /// Carriers per image, 1 to this, capped by how many fit the frame.
    pub max_carriers: usize,
    /// Free-standing bystanders per image, 0 to this, same cap.
    pub max_bystanders: usize,
    /// Probability that a carrier gets a flanking bystander who encloses
    /// the firearm better than the carrier does.
    pub crowded_fraction: f64,
    /// Allow uncarried firearms placed inside bystander boxes.
    pub background_firearms: bool,
    /// Maximum absolute detection-box noise per coordinate, in pixels.
    pub jitter: f64,
}

impl Default for FixtureConfig {
    fn default() -> Self {
        FixtureConfig {
            num_images: 10,
            frame_width: 640.0,
            frame_height: 480.0,
            max_carriers: 2,
            max_bystanders: 2,
            crowded_fraction: 0.5,
            background_firearms: true,
            jitter: 1.5,
        }
    }
}

impl FixtureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_images == 0 {
            return Err(Error::InvalidInput("num_images must be at least 1".into()));
        }
        if !(self.frame_width.is_finite() && self.frame_width >= 240.0) {
            return Err(Error::InvalidInput(format!(
                "frame width must be at least 240, got {}",
                self.frame_width
            )));
        }
        if !(self.frame_height.is_finite() && self.frame_height >= 280.0) {
            return Err(Error::InvalidInput(format!(
                "frame height must be at least 280, got {}",
                self.frame_height
            )));
        }
        if self.max_carriers == 0 {
            return Err(Error::InvalidInput("max_carriers must be at least 1".into()));
        }
        if !(self.crowded_fraction.is_finite() && (0.0..=1.0).contains(&self.crowded_fraction)) {
            return Err(Error::InvalidInput(format!(
                "crowded_fraction {} outside [0, 1]",
                self.crowded_fraction
            )));
        }
        if !(self.jitter.is_finite() && (0.0..=2.0).contains(&self.jitter)) {
            return Err(Error::InvalidInput(format!("jitter {} outside [0, 2]", self.jitter)));
        }
        Ok(())
    }
}

fn round2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

fn round2_box(b: BBox) -> BBox {
    BBox { x1: round2(b.x1), y1: round2(b.y1), x2: round2(b.x2), y2: round2(b.y2) }
}

/// Scene width one carrier group occupies, including its flank slot.
const LANE_WIDTH: f64 = 200.0;

struct ImageBuilder {
    humans: Vec<BBox>,
    /// Firearm box, class, and which human (if any) carries it.
    firearms: Vec<(BBox, FirearmClass, Option<usize>)>,
    poses: Vec<PoseEstimate>,
    /// Humans eligible to host a background firearm.
    bystanders: Vec<usize>,
}

fn keypoint_at(rng: &mut ChaCha8Rng, x: f64, y: f64) -> Keypoint {
    Keypoint {
        x: round2(x),
        y: round2(y),
        confidence: rng.random_range(60..=95) as f64 / 100.0,
    }
}

fn body_keypoints(rng: &mut ChaCha8Rng, b: &BBox) -> Vec<Keypoint> {
    [(0.5, 0.12), (0.35, 0.3), (0.65, 0.3), (0.42, 0.55), (0.58, 0.55)]
        .iter()
        .map(|(rx, ry)| keypoint_at(rng, b.x1 + rx * b.width(), b.y1 + ry * b.height()))
        .collect()
}

/// Hands held high at the chest, well clear of any hip-level firearm.
fn idle_hands(rng: &mut ChaCha8Rng, b: &BBox) -> (Vec<Keypoint>, Vec<Keypoint>) {
    let at = |rng: &mut ChaCha8Rng, rx: f64, ry: f64| keypoint_at(rng, b.x1 + rx * b.width(), b.y1 + ry * b.height());
    let left = vec![at(rng, 0.3, 0.24), at(rng, 0.32, 0.27)];
    let right = vec![at(rng, 0.68, 0.24), at(rng, 0.7, 0.27)];
    (left, right)
}

fn add_carrier(rng: &mut ChaCha8Rng, img: &mut ImageBuilder, lane_x: f64, frame_h: f64, crowded: bool) {
    // Crowded groups stay narrow-gun so the flank's body keypoints fall
    // outside the carrier box and pose linking stays unambiguous.
    let (class, fw) = if crowded {
        (FirearmClass::Gun, rng.random_range(24..=30))
    } else if rng.random_bool(0.5) {
        (FirearmClass::Gun, rng.random_range(24..=40))
    } else {
        (FirearmClass::Rifle, rng.random_range(50..=70))
    };
    let fh = match class {
        FirearmClass::Gun => rng.random_range(14..=18),
        FirearmClass::Rifle => rng.random_range(12..=16),
    };
    let overhang = rng.random_range(6..=(fw / 3).min(10)) as f64;
    let (fw, fh) = (fw as f64, fh as f64);

    let hw = rng.random_range(60..=90) as f64;
    let hh = rng.random_range(150..=210) as f64;
    let x1 = lane_x + rng.random_range(0..=30) as f64;
    let y1 = rng.random_range(20..=(frame_h - hh - 20.0) as i64) as f64;
    let human = BBox { x1, y1, x2: x1 + hw, y2: y1 + hh };

    // Firearm at the right hip, sticking out past the carrier's box so the
    // carrier never encloses it completely.
    let fx2 = human.x2 + overhang;
    let cy = y1 + hh / 2.0;
    let firearm = BBox { x1: fx2 - fw, y1: cy - fh / 2.0, x2: fx2, y2: cy + fh / 2.0 };

    let carrier_index = img.humans.len();
    img.humans.push(round2_box(human));
    img.firearms.push((round2_box(firearm), class, Some(carrier_index)));

    let (fcx, fcy) = firearm.center();
    let left_hand = vec![
        keypoint_at(rng, x1 + 0.3 * hw, y1 + 0.55 * hh),
        keypoint_at(rng, x1 + 0.28 * hw, y1 + 0.58 * hh),
    ];
    let right_hand = vec![
        keypoint_at(rng, fcx - 3.0, fcy),
        keypoint_at(rng, fcx, fcy),
        keypoint_at(rng, fcx + 3.0, fcy + 1.0),
    ];
    img.poses.push(PoseEstimate {
        human_index: Some(carrier_index),
        body: body_keypoints(rng, &human),
        left_hand,
        right_hand,
    });

    if crowded {
        // Flank box fully encloses the firearm; the carrier does not.
        let bx1 = firearm.x1 - 5.0;
        let bx2 = firearm.x2 + 10.0;
        let by1 = (y1 + rng.random_range(-10..=10) as f64).max(5.0);
        let by2 = (by1 + hh + rng.random_range(-20..=20) as f64).min(frame_h - 5.0);
        let flank = BBox { x1: bx1, y1: by1, x2: bx2, y2: by2 };
        let flank_index = img.humans.len();
        img.humans.push(round2_box(flank));
        img.bystanders.push(flank_index);
        let (left, right) = idle_hands(rng, &flank);
        img.poses.push(PoseEstimate {
            human_index: Some(flank_index),
            body: body_keypoints(rng, &flank),
            left_hand: left,
            right_hand: right,
        });
    }
}

fn add_lone_bystander(rng: &mut ChaCha8Rng, img: &mut ImageBuilder, lane_x: f64, frame_h: f64) {
    let w = rng.random_range(55..=85) as f64;
    let h = rng.random_range(140..=200) as f64;
    let x1 = lane_x + rng.random_range(0..=40) as f64;
    let y1 = rng.random_range(20..=(frame_h - h - 20.0) as i64) as f64;
    let b = BBox { x1, y1, x2: x1 + w, y2: y1 + h };
    let index = img.humans.len();
    img.humans.push(round2_box(b));
    img.bystanders.push(index);
    let (left, right) = idle_hands(rng, &b);
    img.poses.push(PoseEstimate {
        human_index: Some(index),
        body: body_keypoints(rng, &b),
        left_hand: left,
        right_hand: right,
    });
}

fn add_background_firearm(rng: &mut ChaCha8Rng, img: &mut ImageBuilder) {
    let host = img.bystanders[rng.random_range(0..img.bystanders.len())];
    let b = img.humans[host];
    let fw = rng.random_range(24..=34.min(b.width() as i64 - 6)) as f64;
    let fh = rng.random_range(14..=16) as f64;
    // Low in the box (dropped or slung), fully inside it, far from hands.
    let cx = b.x1 + 0.5 * b.width();
    let cy = b.y1 + 0.85 * b.height();
    let firearm = BBox { x1: cx - fw / 2.0, y1: cy - fh / 2.0, x2: cx + fw / 2.0, y2: cy + fh / 2.0 };
    img.firearms.push((round2_box(firearm), FirearmClass::Gun, None));
}

fn jitter_box(rng: &mut ChaCha8Rng, b: &BBox, jitter: f64, frame: (f64, f64)) -> BBox {
    let steps = (jitter * 10.0).round() as i64;
    let mut j = || rng.random_range(-steps..=steps) as f64 / 10.0;
    round2_box(BBox {
        x1: (b.x1 + j()).clamp(0.0, frame.0),
        y1: (b.y1 + j()).clamp(0.0, frame.1),
        x2: (b.x2 + j()).clamp(0.0, frame.0),
        y2: (b.y2 + j()).clamp(0.0, frame.1),
    })
}

/// Generates `cfg.num_images` annotated records. Deterministic for a fixed
/// (config, seed). Every image has at least one carried pair; annotated
/// pairs are the dense human x firearm product with `carried` set only on
/// the (carrier, their firearm) couples.
pub fn generate_fixture(cfg: &FixtureConfig, seed: u64) -> Result<Vec<ImageRecord>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lanes = (((cfg.frame_width - 40.0) / LANE_WIDTH).floor() as usize).max(1);
    let mut records = Vec::with_capacity(cfg.num_images);

    for i in 0..cfg.num_images {
        let mut img = ImageBuilder {
            humans: Vec::new(),
            firearms: Vec::new(),
            poses: Vec::new(),
            bystanders: Vec::new(),
        };
        let n_carriers = rng.random_range(1..=cfg.max_carriers.min(lanes));
        let n_lone = rng.random_range(0..=cfg.max_bystanders.min(lanes - n_carriers));
        let mut lane_order: Vec<usize> = (0..lanes).collect();
        lane_order.shuffle(&mut rng);

        for (slot, &lane) in lane_order.iter().take(n_carriers + n_lone).enumerate() {
            let lane_x = 20.0 + lane as f64 * LANE_WIDTH;
            if slot < n_carriers {
                let crowded = rng.random_bool(cfg.crowded_fraction);
                add_carrier(&mut rng, &mut img, lane_x, cfg.frame_height, crowded);
            } else {
                add_lone_bystander(&mut rng, &mut img, lane_x, cfg.frame_height);
            }
        }
        if cfg.background_firearms && !img.bystanders.is_empty() && rng.random_bool(0.6) {
            add_background_firearm(&mut rng, &mut img);
        }

        let gt_pairs: Vec<GroundTruthPair> = img
            .humans
            .iter()
            .enumerate()
            .flat_map(|(h, human_bbox)| {
                img.firearms.iter().map(move |(firearm_bbox, class, carrier)| GroundTruthPair {
                    human_bbox: *human_bbox,
                    firearm_bbox: *firearm_bbox,
                    firearm_class: *class,
                    carried: *carrier == Some(h),
                })
            })
            .collect();

        let frame = (cfg.frame_width, cfg.frame_height);
        let humans: Vec<HumanDetection> = img
            .humans
            .iter()
            .map(|b| HumanDetection {
                bbox: jitter_box(&mut rng, b, cfg.jitter, frame),
                score: rng.random_range(70..=99) as f64 / 100.0,
            })
            .collect();
        let firearms: Vec<FirearmDetection> = img
            .firearms
            .iter()
            .map(|(b, class, _)| FirearmDetection {
                bbox: jitter_box(&mut rng, b, cfg.jitter, frame),
                class: *class,
                score: rng.random_range(70..=99) as f64 / 100.0,
            })
            .collect();

        records.push(ImageRecord {
            image_id: format!("img_{i:04}"),
            width: cfg.frame_width,
            height: cfg.frame_height,
            humans,
            firearms,
            poses: img.poses,
            gt_pairs,
        });
    }
    Ok(records)
}
