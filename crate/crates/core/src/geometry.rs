//! Axis-aligned box geometry shared by every stage of the pipeline.
//!
//! Boxes live in continuous image coordinates as `[x1, y1, x2, y2]` corner
//! pairs. The struct itself does not force `x2 > x1`: malformed boxes must be
//! representable so validation can report them instead of choking on parse.
//! Operations that need a well-formed box check first and return
//! [`Error::InvalidGeometry`] otherwise.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned bounding box, corners `(x1, y1)` top-left and `(x2, y2)`
/// bottom-right. Serialized as a flat `[x1, y1, x2, y2]` array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl From<[f64; 4]> for BBox {
    fn from(v: [f64; 4]) -> Self {
        BBox {
            x1: v[0],
            y1: v[1],
            x2: v[2],
            y2: v[3],
        }
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        [b.x1, b.y1, b.x2, b.y2]
    }
}

impl BBox {
    /// Builds a box and verifies it has strictly positive extent.
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self> {
        let b = BBox { x1, y1, x2, y2 };
        b.validate()?;
        Ok(b)
    }

    /// Checks finiteness and strictly positive width and height.
    pub fn validate(&self) -> Result<()> {
        let coords = [self.x1, self.y1, self.x2, self.y2];
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidGeometry(format!(
                "non-finite coordinate in {:?}",
                coords
            )));
        }
        if self.x2 <= self.x1 || self.y2 <= self.y1 {
            return Err(Error::InvalidGeometry(format!(
                "zero or negative extent: [{}, {}, {}, {}]",
                self.x1, self.y1, self.x2, self.y2
            )));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x1 + self.x2) / 2.0, (self.y1 + self.y2) / 2.0)
    }

    /// Closed-boundary point test: points exactly on an edge count as inside.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x1 && x <= self.x2 && y >= self.y1 && y <= self.y2
    }

    /// Overlap area with `other`; zero when the boxes are disjoint.
    pub fn intersection_area(&self, other: &BBox) -> f64 {
        let w = self.x2.min(other.x2) - self.x1.max(other.x1);
        let h = self.y2.min(other.y2) - self.y1.max(other.y1);
        if w <= 0.0 || h <= 0.0 {
            0.0
        } else {
            w * h
        }
    }

    /// Intersection over union, in `[0, 1]`.
    pub fn iou(&self, other: &BBox) -> Result<f64> {
        self.validate()?;
        other.validate()?;
        let inter = self.intersection_area(other);
        Ok(inter / (self.area() + other.area() - inter))
    }

    /// Fraction of `self` covered by `outer`: intersection over the area of
    /// `self`. Asymmetric on purpose; the firearm box goes on the left.
    pub fn enclosure(&self, outer: &BBox) -> Result<f64> {
        self.validate()?;
        outer.validate()?;
        Ok(self.intersection_area(outer) / self.area())
    }

    /// Smallest box containing both inputs.
    pub fn union_box(&self, other: &BBox) -> Result<BBox> {
        self.validate()?;
        other.validate()?;
        Ok(BBox {
            x1: self.x1.min(other.x1),
            y1: self.y1.min(other.y1),
            x2: self.x2.max(other.x2),
            y2: self.y2.max(other.y2),
        })
    }

    /// Intersects with the frame `[0, w] x [0, h]`. `None` when nothing of
    /// the box remains in frame.
    pub fn clip_to_frame(&self, width: f64, height: f64) -> Option<BBox> {
        let x1 = self.x1.max(0.0);
        let y1 = self.y1.max(0.0);
        let x2 = self.x2.min(width);
        let y2 = self.y2.min(height);
        if x2 > x1 && y2 > y1 {
            Some(BBox { x1, y1, x2, y2 })
        } else {
            None
        }
    }
}

/// One pose keypoint in image coordinates with detector confidence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    pub confidence: f64,
}

/// Scales a `width x height` extent so its long side lands on `target`
/// pixels. Returns the rounded output dimensions and the scale factor.
/// Halves round away from zero; output dimensions never drop below 1.
pub fn resize_long_side(width: f64, height: f64, target: f64) -> Result<(u32, u32, f64)> {
    if !(width > 0.0 && height > 0.0 && width.is_finite() && height.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "resize needs positive finite dims, got {width} x {height}"
        )));
    }
    if !(target > 0.0 && target.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "resize target must be positive, got {target}"
        )));
    }
    let scale = target / width.max(height);
    // f64::round ties away from zero, which is the rounding rule here.
    let out_w = ((width * scale).round() as u32).max(1);
    let out_h = ((height * scale).round() as u32).max(1);
    Ok((out_w, out_h, scale))
}

/// Long side, in pixels, that pair crops are normalized to.
pub const CROP_LONG_SIDE: f64 = 600.0;
