//! Detection records, ground-truth pairs, and the line-delimited JSON files
//! they travel in.
//!
//! A dataset file holds one JSON object per line, one line per image. Loading
//! is two-phase: parse, then validate. Records that fail a hard check (bad
//! geometry, out-of-range score, dangling pose index) are dropped and
//! reported; boxes that merely leak past the frame are clipped and reported
//! as warnings. Floats are written back with a fixed six decimal places so
//! that identical inputs always produce identical bytes.

use std::collections::HashSet;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BBox, Keypoint};

/// Firearm category. The two-class split is fixed; anything else in a file
/// is a parse error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FirearmClass {
    Gun,
    Rifle,
}

impl FirearmClass {
    pub fn label(self) -> &'static str {
        match self {
            FirearmClass::Gun => "gun",
            FirearmClass::Rifle => "rifle",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanDetection {
    pub bbox: BBox,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirearmDetection {
    pub bbox: BBox,
    pub class: FirearmClass,
    pub score: f64,
}

/// One estimated pose. `human_index` points into `ImageRecord::humans` when
/// the upstream pose estimator already resolved the association; otherwise
/// the majority rule in [`link_pose_to_human`] decides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseEstimate {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub human_index: Option<usize>,
    pub body: Vec<Keypoint>,
    pub left_hand: Vec<Keypoint>,
    pub right_hand: Vec<Keypoint>,
}

/// Annotated human-firearm pair; `carried` is the label the classifiers and
/// the evaluation protocol are after. On the wire it is the integer 0 or 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthPair {
    pub human_bbox: BBox,
    pub firearm_bbox: BBox,
    pub firearm_class: FirearmClass,
    #[serde(with = "int_bool")]
    pub carried: bool,
}

/// Everything known about one image: detector outputs, pose estimates, and
/// annotations. After a successful load all boxes lie inside
/// `[0, width] x [0, height]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub image_id: String,
    pub width: f64,
    pub height: f64,
    pub humans: Vec<HumanDetection>,
    pub firearms: Vec<FirearmDetection>,
    pub poses: Vec<PoseEstimate>,
    pub gt_pairs: Vec<GroundTruthPair>,
}

impl ImageRecord {
    pub fn frame(&self) -> (f64, f64) {
        (self.width, self.height)
    }
}

/// One scored human-firearm association, the unit the evaluator consumes.
/// Files hold one JSON object per line, same convention as datasets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairPrediction {
    pub image_id: String,
    pub human_bbox: BBox,
    pub firearm_bbox: BBox,
    pub firearm_class: FirearmClass,
    pub score: f64,
}

mod int_bool {
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &bool, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(u8::from(*v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
        match u8::deserialize(d)? {
            0 => Ok(false),
            1 => Ok(true),
            n => Err(D::Error::custom(format!("carried must be 0 or 1, got {n}"))),
        }
    }
}

// ===== Validation =====

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    /// Empty or otherwise unusable image id.
    Id,
    /// Non-positive or non-finite frame dimensions.
    Frame,
    /// A numeric field left its documented range.
    Range,
    /// A box with zero or negative extent, or entirely outside the frame.
    Geometry,
    /// A box that leaks past the frame; fixed by clipping, kept as a warning.
    OutOfFrame,
    /// A pose pointing at a human index that does not exist.
    Link,
}

/// One invariant breach, addressed by a machine-readable field path such as
/// `humans[0].score`.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub path: String,
    pub kind: ViolationKind,
    pub message: String,
}

impl Violation {
    fn new(path: impl Into<String>, kind: ViolationKind, message: impl Into<String>) -> Self {
        Violation {
            path: path.into(),
            kind,
            message: message.into(),
        }
    }

    /// Clip warnings leave the record usable; everything else rejects it.
    pub fn is_warning(&self) -> bool {
        self.kind == ViolationKind::OutOfFrame
    }
}

fn check_box(path: &str, bbox: &BBox, width: f64, height: f64, out: &mut Vec<Violation>) {
    if let Err(e) = bbox.validate() {
        out.push(Violation::new(path, ViolationKind::Geometry, e.to_string()));
        return;
    }
    if width <= 0.0 || height <= 0.0 {
        // Frame already reported; in-frame checks are meaningless.
        return;
    }
    match bbox.clip_to_frame(width, height) {
        None => out.push(Violation::new(
            path,
            ViolationKind::Geometry,
            "box lies entirely outside the frame",
        )),
        Some(clipped) if clipped != *bbox => out.push(Violation::new(
            path,
            ViolationKind::OutOfFrame,
            "box extends past the frame and will be clipped",
        )),
        Some(_) => {}
    }
}

fn check_score(path: &str, score: f64, out: &mut Vec<Violation>) {
    if !(score.is_finite() && (0.0..=1.0).contains(&score)) {
        out.push(Violation::new(
            path,
            ViolationKind::Range,
            format!("score {score} outside [0, 1]"),
        ));
    }
}

fn check_keypoints(base: &str, pts: &[Keypoint], out: &mut Vec<Violation>) {
    for (i, kp) in pts.iter().enumerate() {
        if !(kp.x.is_finite() && kp.y.is_finite()) {
            out.push(Violation::new(
                format!("{base}[{i}]"),
                ViolationKind::Range,
                "non-finite keypoint coordinate",
            ));
        }
        if !(kp.confidence.is_finite() && (0.0..=1.0).contains(&kp.confidence)) {
            out.push(Violation::new(
                format!("{base}[{i}].confidence"),
                ViolationKind::Range,
                format!("confidence {} outside [0, 1]", kp.confidence),
            ));
        }
    }
}

/// Checks every record invariant and returns one violation per breach. An
/// empty result means the record is immediately usable; a result that is all
/// warnings means it is usable once clipped.
pub fn validate_record(record: &ImageRecord) -> Vec<Violation> {
    let mut out = Vec::new();
    if record.image_id.is_empty() {
        out.push(Violation::new("image_id", ViolationKind::Id, "empty image id"));
    }
    let (w, h) = (record.width, record.height);
    if !(w.is_finite() && w > 0.0) {
        out.push(Violation::new(
            "width",
            ViolationKind::Frame,
            format!("frame width {w} must be positive"),
        ));
    }
    if !(h.is_finite() && h > 0.0) {
        out.push(Violation::new(
            "height",
            ViolationKind::Frame,
            format!("frame height {h} must be positive"),
        ));
    }
    for (i, human) in record.humans.iter().enumerate() {
        check_box(&format!("humans[{i}].bbox"), &human.bbox, w, h, &mut out);
        check_score(&format!("humans[{i}].score"), human.score, &mut out);
    }
    for (i, firearm) in record.firearms.iter().enumerate() {
        check_box(&format!("firearms[{i}].bbox"), &firearm.bbox, w, h, &mut out);
        check_score(&format!("firearms[{i}].score"), firearm.score, &mut out);
    }
    for (i, pose) in record.poses.iter().enumerate() {
        if let Some(idx) = pose.human_index {
            if idx >= record.humans.len() {
                out.push(Violation::new(
                    format!("poses[{i}].human_index"),
                    ViolationKind::Link,
                    format!("index {idx} out of range for {} humans", record.humans.len()),
                ));
            }
        }
        check_keypoints(&format!("poses[{i}].body"), &pose.body, &mut out);
        check_keypoints(&format!("poses[{i}].left_hand"), &pose.left_hand, &mut out);
        check_keypoints(&format!("poses[{i}].right_hand"), &pose.right_hand, &mut out);
    }
    for (i, pair) in record.gt_pairs.iter().enumerate() {
        check_box(&format!("gt_pairs[{i}].human_bbox"), &pair.human_bbox, w, h, &mut out);
        check_box(&format!("gt_pairs[{i}].firearm_bbox"), &pair.firearm_bbox, w, h, &mut out);
    }
    out
}

fn clip_record(record: &mut ImageRecord) {
    let (w, h) = record.frame();
    let clip = |b: &mut BBox| {
        // Entirely-outside boxes were rejected during validation.
        if let Some(c) = b.clip_to_frame(w, h) {
            *b = c;
        }
    };
    for human in &mut record.humans {
        clip(&mut human.bbox);
    }
    for firearm in &mut record.firearms {
        clip(&mut firearm.bbox);
    }
    for pair in &mut record.gt_pairs {
        clip(&mut pair.human_bbox);
        clip(&mut pair.firearm_bbox);
    }
}

// ===== Pose to human linkage =====

/// Majority rule for poses without an explicit `human_index`: the pose goes
/// to the box holding the most body keypoints (closed boundary); count ties
/// break toward the lowest index. `None` when no box holds any keypoint.
pub fn link_pose_to_human(pose: &PoseEstimate, human_boxes: &[BBox]) -> Option<usize> {
    let mut best: Option<(usize, usize)> = None;
    for (i, b) in human_boxes.iter().enumerate() {
        let count = pose.body.iter().filter(|k| b.contains(k.x, k.y)).count();
        if count > 0 && best.is_none_or(|(_, c)| count > c) {
            best = Some((i, count));
        }
    }
    best.map(|(i, _)| i)
}

/// Indices of the poses belonging to `humans[human_index]`: poses that name
/// the index explicitly, plus unlabeled poses the majority rule assigns to it.
pub fn linked_pose_indices(record: &ImageRecord, human_index: usize) -> Vec<usize> {
    let boxes: Vec<BBox> = record.humans.iter().map(|h| h.bbox).collect();
    record
        .poses
        .iter()
        .enumerate()
        .filter(|(_, pose)| match pose.human_index {
            Some(idx) => idx == human_index,
            None => link_pose_to_human(pose, &boxes) == Some(human_index),
        })
        .map(|(i, _)| i)
        .collect()
}

// ===== Loading =====

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    /// Record kept after clipping.
    Warning,
    /// Record dropped.
    Rejected,
}

/// One problem found on one line of a dataset file.
#[derive(Debug, Clone)]
pub struct LineIssue {
    pub line: usize,
    pub image_id: Option<String>,
    pub severity: Severity,
    pub detail: String,
}

#[derive(Debug, Clone, Default)]
pub struct LoadReport {
    pub issues: Vec<LineIssue>,
}

impl LoadReport {
    pub fn is_clean(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn rejected_lines(&self) -> usize {
        let mut lines: Vec<usize> = self
            .issues
            .iter()
            .filter(|i| i.severity == Severity::Rejected)
            .map(|i| i.line)
            .collect();
        lines.dedup();
        lines.len()
    }
}

#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub records: Vec<ImageRecord>,
    pub report: LoadReport,
}

impl LoadedDataset {
    /// Hands back the records only when no line was rejected. Clip warnings
    /// pass; that is the warn-and-clip policy.
    pub fn into_strict(self) -> Result<Vec<ImageRecord>> {
        let rejected = self.report.rejected_lines();
        if rejected > 0 {
            Err(Error::InvalidDataset(format!(
                "{rejected} line(s) rejected during validation"
            )))
        } else {
            Ok(self.records)
        }
    }
}

/// Reads a line-delimited dataset. Unreadable files fail hard; everything
/// wrong inside the file lands in the returned report instead. Records with
/// hard violations are dropped, out-of-frame boxes are clipped and kept,
/// duplicate image ids keep the first occurrence.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<LoadedDataset> {
    let file = File::open(path.as_ref())?;
    let reader = BufReader::new(file);
    let mut records = Vec::new();
    let mut report = LoadReport::default();
    let mut seen_ids: HashSet<String> = HashSet::new();

    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut de = serde_json::Deserializer::from_str(&line);
        let mut record: ImageRecord = match serde_path_to_error::deserialize(&mut de) {
            Ok(r) => r,
            Err(e) => {
                report.issues.push(LineIssue {
                    line: line_no,
                    image_id: None,
                    severity: Severity::Rejected,
                    detail: format!("{}: {}", e.path(), e.inner()),
                });
                continue;
            }
        };

        let violations = validate_record(&record);
        let mut rejected = false;
        for v in &violations {
            let severity = if v.is_warning() {
                Severity::Warning
            } else {
                rejected = true;
                Severity::Rejected
            };
            report.issues.push(LineIssue {
                line: line_no,
                image_id: Some(record.image_id.clone()),
                severity,
                detail: format!("{}: {}", v.path, v.message),
            });
        }
        if rejected {
            continue;
        }
        if !seen_ids.insert(record.image_id.clone()) {
            report.issues.push(LineIssue {
                line: line_no,
                image_id: Some(record.image_id.clone()),
                severity: Severity::Rejected,
                detail: format!("image_id: duplicate id {:?}", record.image_id),
            });
            continue;
        }
        clip_record(&mut record);
        records.push(record);
    }
    Ok(LoadedDataset { records, report })
}

// ===== Writing =====

/// JSON formatter that pins every float to six decimal places, the
/// documented file precision. Keeps repeated save/load cycles byte-stable.
struct SixDecimals;

impl serde_json::ser::Formatter for SixDecimals {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        write!(writer, "{value:.6}")
    }

    fn write_f32<W>(&mut self, writer: &mut W, value: f32) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        write!(writer, "{value:.6}")
    }
}

pub(crate) fn write_jsonl<T: Serialize, W: Write>(writer: &mut W, items: &[T], path: &Path) -> Result<()> {
    for item in items {
        let mut ser = serde_json::Serializer::with_formatter(&mut *writer, SixDecimals);
        item.serialize(&mut ser)
            .map_err(|e| Error::format(path.display().to_string(), e.to_string()))?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

/// Writes records one JSON object per line, floats at six decimals.
pub fn save_dataset(records: &[ImageRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = io::BufWriter::new(File::create(path)?);
    write_jsonl(&mut out, records, path)?;
    out.flush()?;
    Ok(())
}

/// Writes predictions in input order, one JSON object per line, floats at
/// six decimals. Identical prediction lists produce identical bytes.
pub fn save_predictions(preds: &[PairPrediction], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = io::BufWriter::new(File::create(path)?);
    write_jsonl(&mut out, preds, path)?;
    out.flush()?;
    Ok(())
}

/// Reads a prediction file. Malformed JSON is a format error; a prediction
/// that parses but breaks an invariant (bad box, score outside `[0, 1]`) is
/// a validation error. Both name the offending line.
pub fn load_predictions(path: impl AsRef<Path>) -> Result<Vec<PairPrediction>> {
    let path = path.as_ref();
    let file = File::open(path)?;
    let reader = BufReader::new(file);
    let mut preds = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut de = serde_json::Deserializer::from_str(&line);
        let pred: PairPrediction = serde_path_to_error::deserialize(&mut de).map_err(|e| {
            Error::format(
                path.display().to_string(),
                format!("line {line_no}: {}: {}", e.path(), e.inner()),
            )
        })?;
        if let Err(e) = pred.human_bbox.validate().and_then(|_| pred.firearm_bbox.validate()) {
            return Err(Error::InvalidDataset(format!(
                "{}: line {line_no}: {e}",
                path.display()
            )));
        }
        if !(pred.score.is_finite() && (0.0..=1.0).contains(&pred.score)) {
            return Err(Error::InvalidDataset(format!(
                "{}: line {line_no}: score {} outside [0, 1]",
                path.display(),
                pred.score
            )));
        }
        preds.push(pred);
    }
    Ok(preds)
}
