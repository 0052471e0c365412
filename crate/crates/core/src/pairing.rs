//! Candidate human-firearm pairs and the crop geometry for looking at them.

use serde::{Deserialize, Serialize};

use crate::dataset::{FirearmClass, GroundTruthPair, ImageRecord};
use crate::error::{Error, Result};
use crate::geometry::{resize_long_side, BBox};

/// One human-firearm combination under consideration. `paired_bbox` is the
/// smallest box covering both detections. Detection scores ride along so a
/// pair is self-contained for feature extraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidatePair {
    pub human_index: usize,
    pub firearm_index: usize,
    pub human_bbox: BBox,
    pub firearm_bbox: BBox,
    pub paired_bbox: BBox,
    pub firearm_class: FirearmClass,
    pub human_score: f64,
    pub firearm_score: f64,
}

impl CandidatePair {
    /// Builds a pair from an annotated ground-truth entry, for training on
    /// hand-labeled boxes. Annotations carry no detector confidence, so both
    /// scores are 1. The indices refer to the annotation list, not to the
    /// detection lists.
    pub fn from_ground_truth(index: usize, gt: &GroundTruthPair) -> Result<Self> {
        Ok(CandidatePair {
            human_index: index,
            firearm_index: index,
            human_bbox: gt.human_bbox,
            firearm_bbox: gt.firearm_bbox,
            paired_bbox: gt.human_bbox.union_box(&gt.firearm_bbox)?,
            firearm_class: gt.firearm_class,
            human_score: 1.0,
            firearm_score: 1.0,
        })
    }
}

/// Every human x firearm combination in the record, row-major: all firearms
/// for human 0, then all firearms for human 1, and so on. Either list being
/// empty yields no pairs.
pub fn enumerate_pairs(record: &ImageRecord) -> Result<Vec<CandidatePair>> {
    let mut pairs = Vec::with_capacity(record.humans.len() * record.firearms.len());
    for (hi, human) in record.humans.iter().enumerate() {
        for (fi, firearm) in record.firearms.iter().enumerate() {
            pairs.push(CandidatePair {
                human_index: hi,
                firearm_index: fi,
                human_bbox: human.bbox,
                firearm_bbox: firearm.bbox,
                paired_bbox: human.bbox.union_box(&firearm.bbox)?,
                firearm_class: firearm.class,
                human_score: human.score,
                firearm_score: firearm.score,
            });
        }
    }
    Ok(pairs)
}

/// Instructions for cutting a pair region out of its frame and scaling it
/// for a fixed-size look: the in-frame crop box, the output dimensions, and
/// the scale factor that produced them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CropSpec {
    pub crop: BBox,
    pub width: u32,
    pub height: u32,
    pub scale: f64,
}

/// Clips the paired box to the frame and scales the remainder so its long
/// side lands on `target_long_side` pixels. A pair entirely outside the
/// frame has nothing to crop and is an error.
pub fn crop_spec(pair: &CandidatePair, frame_width: f64, frame_height: f64, target_long_side: f64) -> Result<CropSpec> {
    pair.paired_bbox.validate()?;
    if !(frame_width > 0.0 && frame_height > 0.0) {
        return Err(Error::InvalidInput(format!(
            "frame must have positive extent, got {frame_width} x {frame_height}"
        )));
    }
    let crop = pair.paired_bbox.clip_to_frame(frame_width, frame_height).ok_or_else(|| {
        Error::DegenerateCrop(format!(
            "paired box [{}, {}, {}, {}] leaves no area inside {} x {}",
            pair.paired_bbox.x1,
            pair.paired_bbox.y1,
            pair.paired_bbox.x2,
            pair.paired_bbox.y2,
            frame_width,
            frame_height
        ))
    })?;
    let (width, height, scale) = resize_long_side(crop.width(), crop.height(), target_long_side)?;
    Ok(CropSpec { crop, width, height, scale })
}
