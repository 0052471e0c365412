//! The trainable pair scorer: geometric features per candidate pair, a
//! linear-softmax model over standardized features, classic momentum SGD on
//! mean cross-entropy, and a line-oriented text model format.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::{link_pose_to_human, FirearmClass, ImageRecord, PairPrediction, PoseEstimate};
use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::pairing::{enumerate_pairs, CandidatePair};

/// Number of geometric features per pair.
pub const FEATURE_DIM: usize = 16;

/// Fixed-length feature vector. The layout is defined by
/// [`extract_features`]; anything else producing one must match it.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite feature value {bad}")));
        }
        Ok(FeatureVector { values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// Two-class probability pair; `p_carried` first, summing to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassProbs {
    pub p_carried: f64,
    pub p_not_carried: f64,
}

impl ClassProbs {
    pub fn new(p_carried: f64, p_not_carried: f64) -> Self {
        ClassProbs { p_carried, p_not_carried }
    }
}

/// Numerically stable two-way softmax (max subtraction).
pub fn softmax(logits: [f64; 2]) -> Result<ClassProbs> {
    if logits.iter().any(|z| !z.is_finite()) {
        return Err(Error::Divergence(format!("non-finite logits {logits:?}")));
    }
    let m = logits[0].max(logits[1]);
    let e0 = (logits[0] - m).exp();
    let e1 = (logits[1] - m).exp();
    let sum = e0 + e1;
    Ok(ClassProbs { p_carried: e0 / sum, p_not_carried: e1 / sum })
}

/// One-hot target for a carried label; carried is class 0.
pub fn one_hot(carried: bool) -> [f64; 2] {
    if carried {
        [1.0, 0.0]
    } else {
        [0.0, 1.0]
    }
}

const PROB_FLOOR: f64 = 1e-12;

/// Negative log-likelihood of the one-hot target under `p`, with
/// probabilities clamped to `[1e-12, 1]` so confident mistakes stay finite.
pub fn cross_entropy(p: &ClassProbs, g: [f64; 2]) -> Result<f64> {
    let is_one_hot = (g[0] == 1.0 && g[1] == 0.0) || (g[0] == 0.0 && g[1] == 1.0);
    if !is_one_hot {
        return Err(Error::InvalidLabel(format!("target {g:?} is not one-hot")));
    }
    let p0 = p.p_carried.clamp(PROB_FLOOR, 1.0);
    let p1 = p.p_not_carried.clamp(PROB_FLOOR, 1.0);
    Ok(-(g[0] * p0.ln() + g[1] * p1.ln()))
}

/// Sentinel hand-distance value when the supplied poses carry no hand
/// keypoints at all. Normalized in-frame distances stay at or below 1.
pub const NO_HANDS_DISTANCE: f64 = 2.0;

/// Geometric feature layout, dimension 16:
///
/// | index | feature |
/// |-------|---------|
/// | 0     | iou(human, firearm) |
/// | 1     | enclosure of the firearm by the human box |
/// | 2, 3  | firearm center relative to the human box, in box units |
/// | 4     | ln(firearm area / human area) |
/// | 5     | human box aspect (w/h) |
/// | 6     | firearm box aspect |
/// | 7     | paired box aspect |
/// | 8, 9  | firearm class one-hot: gun (1,0), rifle (0,1) |
/// | 10    | min distance firearm-center to any hand keypoint of the given poses, over the frame diagonal; 2.0 when no hands |
/// | 11    | count of those hand keypoints inside the firearm box, over 10 |
/// | 12, 13| center offset firearm minus human, over frame width/height |
/// | 14    | firearm detection score |
/// | 15    | human detection score |
///
/// The caller chooses which poses matter for the pair; the pipeline passes
/// the poses linked to the pair's human so hand features discriminate
/// between candidate carriers of the same firearm.
pub fn extract_features(pair: &CandidatePair, poses: &[&PoseEstimate], frame: (f64, f64)) -> Result<FeatureVector> {
    let to_invalid = |e: Error| Error::InvalidInput(e.to_string());
    pair.human_bbox.validate().map_err(to_invalid)?;
    pair.firearm_bbox.validate().map_err(to_invalid)?;
    pair.paired_bbox.validate().map_err(to_invalid)?;
    let (fw, fh) = frame;
    if !(fw > 0.0 && fh > 0.0) {
        return Err(Error::InvalidInput(format!("frame must be positive, got {fw} x {fh}")));
    }
    let h = &pair.human_bbox;
    let f = &pair.firearm_bbox;
    let (fcx, fcy) = f.center();
    let (hcx, hcy) = h.center();
    let diag = (fw * fw + fh * fh).sqrt();

    let hands: Vec<_> = poses
        .iter()
        .flat_map(|p| p.left_hand.iter().chain(p.right_hand.iter()))
        .collect();
    let hand_dist = hands
        .iter()
        .map(|k| ((k.x - fcx).powi(2) + (k.y - fcy).powi(2)).sqrt() / diag)
        .fold(f64::INFINITY, f64::min);
    let hand_dist = if hand_dist.is_finite() { hand_dist } else { NO_HANDS_DISTANCE };
    let hands_inside = hands.iter().filter(|k| f.contains(k.x, k.y)).count();

    let (class_gun, class_rifle) = match pair.firearm_class {
        FirearmClass::Gun => (1.0, 0.0),
        FirearmClass::Rifle => (0.0, 1.0),
    };

    FeatureVector::new(vec![
        h.iou(f).map_err(to_invalid)?,
        f.enclosure(h).map_err(to_invalid)?,
        (fcx - h.x1) / h.width(),
        (fcy - h.y1) / h.height(),
        (f.area() / h.area()).ln(),
        h.width() / h.height(),
        f.width() / f.height(),
        pair.paired_bbox.width() / pair.paired_bbox.height(),
        class_gun,
        class_rifle,
        hand_dist,
        hands_inside as f64 / 10.0,
        (fcx - hcx) / fw,
        (fcy - hcy) / fh,
        pair.firearm_score,
        pair.human_score,
    ])
}

// ===== Model =====

/// Linear-softmax pair model over standardized features. Row 0 of the
/// weights scores "carried", row 1 "not carried".
#[derive(Debug, Clone, PartialEq)]
pub struct GeomPairModel {
    dim: usize,
    weights: Vec<f64>,
    bias: [f64; 2],
    feature_means: Vec<f64>,
    feature_stds: Vec<f64>,
}

impl GeomPairModel {
    /// Assembles a model, checking dimensional consistency, finiteness, and
    /// strictly positive stds.
    pub fn from_parts(weights: Vec<f64>, bias: [f64; 2], feature_means: Vec<f64>, feature_stds: Vec<f64>) -> Result<Self> {
        let dim = feature_means.len();
        if feature_stds.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: feature_stds.len() });
        }
        if weights.len() != 2 * dim {
            return Err(Error::DimensionMismatch { expected: 2 * dim, got: weights.len() });
        }
        let all = weights.iter().chain(&bias).chain(&feature_means).chain(&feature_stds);
        for v in all {
            if !v.is_finite() {
                return Err(Error::InvalidInput(format!("non-finite model parameter {v}")));
            }
        }
        if let Some(bad) = feature_stds.iter().find(|s| **s <= 0.0) {
            return Err(Error::InvalidInput(format!("feature std {bad} must be strictly positive")));
        }
        Ok(GeomPairModel { dim, weights, bias, feature_means, feature_stds })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> [f64; 2] {
        self.bias
    }

    pub fn feature_means(&self) -> &[f64] {
        &self.feature_means
    }

    pub fn feature_stds(&self) -> &[f64] {
        &self.feature_stds
    }

    fn standardize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.feature_means.iter().zip(&self.feature_stds))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

/// Class probabilities for one feature vector under the model.
pub fn score_pair(model: &GeomPairModel, features: &FeatureVector) -> Result<ClassProbs> {
    if features.dim() != model.dim {
        return Err(Error::DimensionMismatch { expected: model.dim, got: features.dim() });
    }
    if let Some(bad) = features.values.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite feature value {bad}")));
    }
    let x = model.standardize(&features.values);
    let mut logits = [model.bias[0], model.bias[1]];
    for (c, logit) in logits.iter_mut().enumerate() {
        let row = &model.weights[c * model.dim..(c + 1) * model.dim];
        for (w, v) in row.iter().zip(&x) {
            *logit += w * v;
        }
    }
    softmax(logits)
}

// ===== Training =====

/// SGD hyperparameters. Defaults follow the reference training recipe; the
/// dropout the original network used has no meaning for a 16-dim linear
/// model and has no slot here.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.00001,
            momentum: 0.9,
            epochs: 20,
            batch_size: 1,
            seed: 0,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidInput(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(self.momentum.is_finite() && (0.0..1.0).contains(&self.momentum)) {
            return Err(Error::InvalidInput(format!(
                "momentum must be in [0, 1), got {}",
                self.momentum
            )));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidInput("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidInput("batch size must be at least 1".into()));
        }
        Ok(())
    }
}

/// Mean cross-entropy over the samples at the given parameters. `weights`
/// is the 2 x dim row-major matrix.
pub fn mean_loss(weights: &[f64], bias: [f64; 2], xs: &[Vec<f64>], labels: &[bool]) -> Result<f64> {
    Ok(loss_and_grad(weights, bias, xs, labels)?.0)
}

/// Mean cross-entropy and its analytic gradient w.r.t. weights and bias.
/// For softmax with one-hot targets the per-sample logit gradient is
/// `p - g`; the mean over samples distributes into the sums below.
pub fn loss_and_grad(
    weights: &[f64],
    bias: [f64; 2],
    xs: &[Vec<f64>],
    labels: &[bool],
) -> Result<(f64, Vec<f64>, [f64; 2])> {
    if xs.is_empty() {
        return Err(Error::InvalidInput("loss over zero samples".into()));
    }
    if xs.len() != labels.len() {
        return Err(Error::DimensionMismatch { expected: xs.len(), got: labels.len() });
    }
    let dim = xs[0].len();
    if weights.len() != 2 * dim {
        return Err(Error::DimensionMismatch { expected: 2 * dim, got: weights.len() });
    }
    let n = xs.len() as f64;
    let mut loss = 0.0;
    let mut grad_w = vec![0.0; 2 * dim];
    let mut grad_b = [0.0, 0.0];
    for (x, &label) in xs.iter().zip(labels) {
        if x.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: x.len() });
        }
        let mut logits = [bias[0], bias[1]];
        for c in 0..2 {
            let row = &weights[c * dim..(c + 1) * dim];
            for (w, v) in row.iter().zip(x) {
                logits[c] += w * v;
            }
        }
        let p = softmax(logits)?;
        let g = one_hot(label);
        loss += cross_entropy(&p, g)?;
        let dz = [(p.p_carried - g[0]) / n, (p.p_not_carried - g[1]) / n];
        for c in 0..2 {
            grad_b[c] += dz[c];
            for (j, v) in x.iter().enumerate() {
                grad_w[c * dim + j] += dz[c] * v;
            }
        }
    }
    Ok((loss / n, grad_w, grad_b))
}

/// A trained model plus the mean training loss per epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutput {
    pub model: GeomPairModel,
    pub epoch_loss: Vec<f64>,
}

/// Trains a linear-softmax model from zero-initialized parameters with
/// classic momentum SGD (`v = mu*v - lr*grad; w = w + v`) on mean
/// cross-entropy per batch. Features are standardized with training-set
/// means and stds; a constant feature gets std 1 so standardization stays
/// defined (it contributes nothing either way). Deterministic for a fixed
/// seed.
pub fn train(samples: &[(FeatureVector, bool)], cfg: &TrainConfig) -> Result<TrainOutput> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(Error::DegenerateTrainingData("no samples".into()));
    }
    let n_carried = samples.iter().filter(|(_, l)| *l).count();
    if n_carried == 0 || n_carried == samples.len() {
        return Err(Error::DegenerateTrainingData(format!(
            "need both classes, got {n_carried} carried of {}",
            samples.len()
        )));
    }
    let dim = samples[0].0.dim();
    for (fv, _) in samples {
        if fv.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: fv.dim() });
        }
        if let Some(bad) = fv.values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite feature value {bad}")));
        }
    }
    if dim == 0 {
        return Err(Error::InvalidInput("zero-dimensional features".into()));
    }

    let n = samples.len();
    let mut means = vec![0.0; dim];
    for (fv, _) in samples {
        for (m, v) in means.iter_mut().zip(&fv.values) {
            *m += v;
        }
    }
    for m in &mut means {
        *m /= n as f64;
    }
    let mut stds = vec![0.0; dim];
    for (fv, _) in samples {
        for (s, (v, m)) in stds.iter_mut().zip(fv.values.iter().zip(&means)) {
            *s += (v - m) * (v - m);
        }
    }
    for s in &mut stds {
        *s = (*s / n as f64).sqrt();
        if *s == 0.0 {
            *s = 1.0;
        }
    }

    let xs: Vec<Vec<f64>> = samples
        .iter()
        .map(|(fv, _)| {
            fv.values
                .iter()
                .zip(means.iter().zip(&stds))
                .map(|(v, (m, s))| (v - m) / s)
                .collect()
        })
        .collect();
    let labels: Vec<bool> = samples.iter().map(|(_, l)| *l).collect();

    let mut weights = vec![0.0; 2 * dim];
    let mut bias = [0.0, 0.0];
    let mut vel_w = vec![0.0; 2 * dim];
    let mut vel_b = [0.0, 0.0];
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut epoch_loss = Vec::with_capacity(cfg.epochs);

    for _ in 0..cfg.epochs {
        if cfg.shuffle {
            order.shuffle(&mut rng);
        }
        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let bx: Vec<Vec<f64>> = batch.iter().map(|&i| xs[i].clone()).collect();
            let bl: Vec<bool> = batch.iter().map(|&i| labels[i]).collect();
            let (loss, grad_w, grad_b) = loss_and_grad(&weights, bias, &bx, &bl)?;
            loss_sum += loss * batch.len() as f64;
            for ((v, w), g) in vel_w.iter_mut().zip(&mut weights).zip(&grad_w) {
                *v = cfg.momentum * *v - cfg.learning_rate * g;
                *w += *v;
            }
            for c in 0..2 {
                vel_b[c] = cfg.momentum * vel_b[c] - cfg.learning_rate * grad_b[c];
                bias[c] += vel_b[c];
            }
        }
        let mean = loss_sum / n as f64;
        if !mean.is_finite() {
            return Err(Error::Divergence(format!("epoch mean loss {mean}")));
        }
        epoch_loss.push(mean);
    }

    if weights.iter().chain(&bias).any(|v| !v.is_finite()) {
        return Err(Error::Divergence("non-finite parameters after training".into()));
    }
    let model = GeomPairModel { dim, weights, bias, feature_means: means, feature_stds: stds };
    Ok(TrainOutput { model, epoch_loss })
}

/// Feature/label samples from every annotated pair in the records: one
/// sample per ground-truth pair, labeled by `carried`. Annotation boxes
/// carry no detector scores, so score features are 1. Poses are linked to
/// annotated human boxes with the majority rule (explicit `human_index`
/// refers to detections and does not apply here).
pub fn build_training_set(records: &[ImageRecord]) -> Result<Vec<(FeatureVector, bool)>> {
    let mut out = Vec::new();
    for record in records {
        let mut human_boxes: Vec<BBox> = Vec::new();
        for pair in &record.gt_pairs {
            if !human_boxes.contains(&pair.human_bbox) {
                human_boxes.push(pair.human_bbox);
            }
        }
        for (i, gt) in record.gt_pairs.iter().enumerate() {
            let pair = CandidatePair::from_ground_truth(i, gt)?;
            let target = human_boxes.iter().position(|b| *b == gt.human_bbox);
            let linked: Vec<&PoseEstimate> = record
                .poses
                .iter()
                .filter(|pose| link_pose_to_human(pose, &human_boxes) == target && target.is_some())
                .collect();
            let features = extract_features(&pair, &linked, record.frame())?;
            out.push((features, gt.carried));
        }
    }
    Ok(out)
}

/// Seeded image-level split: shuffles the records and takes roughly
/// `train_fraction` of the images (always at least one per side) for
/// training. Splitting whole images keeps near-duplicate pairs from one
/// scene out of both sides at once.
pub fn split_images(
    records: &[ImageRecord],
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<ImageRecord>, Vec<ImageRecord>)> {
    if !(train_fraction.is_finite() && 0.0 < train_fraction && train_fraction < 1.0) {
        return Err(Error::InvalidInput(format!(
            "train fraction {train_fraction} outside (0, 1)"
        )));
    }
    if records.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 images to split, got {}",
            records.len()
        )));
    }
    let mut order: Vec<usize> = (0..records.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let n_train = ((records.len() as f64 * train_fraction).round() as usize)
        .clamp(1, records.len() - 1);
    let take = |idx: &[usize]| idx.iter().map(|&i| records[i].clone()).collect::<Vec<_>>();
    Ok((take(&order[..n_train]), take(&order[n_train..])))
}

// ===== Scoring interface =====

/// Anything that can turn a candidate pair into class probabilities: the
/// built-in model, external scores, or a test closure.
pub trait PairScorer {
    fn score_candidate(&self, record: &ImageRecord, pair: &CandidatePair) -> Result<ClassProbs>;
}

impl<F> PairScorer for F
where
    F: Fn(&ImageRecord, &CandidatePair) -> Result<ClassProbs>,
{
    fn score_candidate(&self, record: &ImageRecord, pair: &CandidatePair) -> Result<ClassProbs> {
        self(record, pair)
    }
}

impl PairScorer for GeomPairModel {
    /// Scores with features extracted from the pair and the poses linked to
    /// the pair's human, so two candidate carriers of one firearm see
    /// different hand features.
    fn score_candidate(&self, record: &ImageRecord, pair: &CandidatePair) -> Result<ClassProbs> {
        let linked = crate::dataset::linked_pose_indices(record, pair.human_index);
        let poses: Vec<&PoseEstimate> = linked.iter().map(|&i| &record.poses[i]).collect();
        let features = extract_features(pair, &poses, record.frame())?;
        score_pair(self, &features)
    }
}

/// Pair scores ingested from a prediction file, keyed by image id and both
/// boxes at the file's six-decimal precision. Pairs absent from the file
/// score as confidently not-carried; duplicate keys keep the highest score.
pub struct ExternalScores {
    map: HashMap<(String, [i64; 8]), f64>,
}

impl ExternalScores {
    pub fn from_predictions(preds: &[PairPrediction]) -> Self {
        let mut map = HashMap::new();
        for p in preds {
            let key = (p.image_id.clone(), Self::box_key(&p.human_bbox, &p.firearm_bbox));
            let entry = map.entry(key).or_insert(p.score);
            if p.score > *entry {
                *entry = p.score;
            }
        }
        ExternalScores { map }
    }

    fn box_key(h: &BBox, f: &BBox) -> [i64; 8] {
        let q = |v: f64| (v * 1e6).round() as i64;
        [q(h.x1), q(h.y1), q(h.x2), q(h.y2), q(f.x1), q(f.y1), q(f.x2), q(f.y2)]
    }
}

impl PairScorer for ExternalScores {
    fn score_candidate(&self, record: &ImageRecord, pair: &CandidatePair) -> Result<ClassProbs> {
        let key = (record.image_id.clone(), Self::box_key(&pair.human_bbox, &pair.firearm_bbox));
        let score = self.map.get(&key).copied().unwrap_or(0.0);
        Ok(ClassProbs::new(score, 1.0 - score))
    }
}

/// Scores every candidate pair in the record and keeps those with
/// `p_carried >= threshold`, at score `p_carried`. Scorer failures come
/// back wrapped with the pair they happened on.
pub fn hfpd_predict(record: &ImageRecord, scorer: &dyn PairScorer, threshold: f64) -> Result<Vec<PairPrediction>> {
    if !(threshold.is_finite() && (0.0..=1.0).contains(&threshold)) {
        return Err(Error::InvalidInput(format!("threshold {threshold} outside [0, 1]")));
    }
    let mut out = Vec::new();
    for pair in enumerate_pairs(record)? {
        let wrap = |source: Error| Error::Scorer {
            image_id: record.image_id.clone(),
            human_index: pair.human_index,
            firearm_index: pair.firearm_index,
            source: Box::new(source),
        };
        let probs = scorer.score_candidate(record, &pair).map_err(wrap)?;
        if !(probs.p_carried.is_finite() && (0.0..=1.0).contains(&probs.p_carried)) {
            return Err(wrap(Error::InvalidInput(format!(
                "scorer produced p_carried {}",
                probs.p_carried
            ))));
        }
        if probs.p_carried >= threshold {
            out.push(PairPrediction {
                image_id: record.image_id.clone(),
                human_bbox: pair.human_bbox,
                firearm_bbox: pair.firearm_bbox,
                firearm_class: pair.firearm_class,
                score: probs.p_carried,
            });
        }
    }
    Ok(out)
}

// ===== Model file format =====
//
// Line-oriented text: dimension header, means, stds, carried weight row,
// not-carried weight row, bias. Space-separated, 9 significant digits.

fn fmt_row(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:.8e}")).collect::<Vec<_>>().join(" ")
}

fn parse_row(line: &str, expected: usize, path: &Path, what: &str) -> Result<Vec<f64>> {
    let values: Vec<f64> = line
        .split_whitespace()
        .map(|t| t.parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::format(path.display().to_string(), format!("{what}: {e}")))?;
    if values.len() != expected {
        return Err(Error::format(
            path.display().to_string(),
            format!("{what}: expected {expected} values, got {}", values.len()),
        ));
    }
    Ok(values)
}

/// Writes the model in the text format. Identical models produce identical
/// bytes.
pub fn save_model(model: &GeomPairModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{}", model.dim)?;
    writeln!(out, "{}", fmt_row(&model.feature_means))?;
    writeln!(out, "{}", fmt_row(&model.feature_stds))?;
    writeln!(out, "{}", fmt_row(&model.weights[..model.dim]))?;
    writeln!(out, "{}", fmt_row(&model.weights[model.dim..]))?;
    writeln!(out, "{}", fmt_row(&model.bias))?;
    out.flush()?;
    Ok(())
}

/// Reads a model file, enforcing the header dimension on every row.
pub fn load_model(path: impl AsRef<Path>) -> Result<GeomPairModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::format(path.display().to_string(), "empty model file".to_string()))?;
    let dim: usize = header
        .trim()
        .parse()
        .map_err(|e| Error::format(path.display().to_string(), format!("dimension header: {e}")))?;
    if dim == 0 {
        return Err(Error::format(path.display().to_string(), "dimension must be at least 1".to_string()));
    }
    let mut next = |what: &str| {
        lines
            .next()
            .ok_or_else(|| Error::format(path.display().to_string(), format!("missing {what} row")))
    };
    let means = parse_row(next("means")?, dim, path, "means")?;
    let stds = parse_row(next("stds")?, dim, path, "stds")?;
    let mut weights = parse_row(next("carried weights")?, dim, path, "carried weights")?;
    weights.extend(parse_row(next("not-carried weights")?, dim, path, "not-carried weights")?);
    let bias_row = parse_row(next("bias")?, 2, path, "bias")?;
    if lines.any(|l| !l.trim().is_empty()) {
        return Err(Error::format(path.display().to_string(), "trailing content after bias row".to_string()));
    }
    GeomPairModel::from_parts(weights, [bias_row[0], bias_row[1]], means, stds)
        .map_err(|e| Error::format(path.display().to_string(), e.to_string()))
}
