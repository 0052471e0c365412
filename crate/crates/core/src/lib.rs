//! pairhold-core: detector-agnostic association of detected humans with
//! detected firearms, classifying every human-firearm pair as carried or
//! not.
//!
//! The crate takes pre-computed detections (human boxes, firearm boxes,
//! optional pose keypoints) serialized as line-delimited JSON, enumerates
//! candidate pairs, and scores them three ways:
//!
//! * rule baselines: hand keypoints inside the firearm box
//!   ([`baselines::hifb_classify`], [`baselines::bcfd_classify`]) and
//!   maximum box overlap ([`baselines::ohfb_associate`]);
//! * a trainable linear pair classifier over geometric features
//!   ([`classifier`]);
//! * plus the evaluation protocol ([`eval`]) scoring carried-pair
//!   predictions with average precision per firearm class and pooled.
//!
//! [`fixture`] generates seeded synthetic scenes with known carrier
//! geometry for tests and demos; [`aap`] provides adaptive average pooling
//! for fixed-size feature grids plus their binary sidecar format.

pub mod aap;
pub mod baselines;
pub mod classifier;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod fixture;
pub mod geometry;
pub mod pairing;

pub use aap::{adaptive_avg_pool, FeatureGrid, POOL_OUT};
pub use baselines::{
    annotated_firearms, bcfd_associate, bcfd_classify, hifb_classify, ohfb_associate, AnnotatedFirearm,
    BcfdConfig, HifbConfig, OhfbConfig, OverlapMetric,
};
pub use classifier::{
    build_training_set, extract_features, hfpd_predict, load_model, save_model, score_pair,
    split_images, train, ClassProbs, ExternalScores, FeatureVector, GeomPairModel, PairScorer,
    TrainConfig, TrainOutput, FEATURE_DIM,
};
pub use dataset::{
    link_pose_to_human, linked_pose_indices, load_dataset, load_predictions, save_dataset,
    save_predictions, validate_record, FirearmClass, FirearmDetection, GroundTruthPair,
    HumanDetection, ImageRecord, LineIssue, LoadReport, LoadedDataset, PairPrediction,
    PoseEstimate, Severity, Violation, ViolationKind,
};
pub use error::{Error, Result};
pub use eval::{
    average_precision, canonical_order, classification_accuracy, evaluate, match_pairs,
    render_accuracy_table, render_eval_table, save_report, AccuracyReport, ClassReport, EvalReport,
    GroundTruthSet, PredMatch, PrPoint, DEFAULT_IOU_THRESH,
};
pub use fixture::{generate_fixture, FixtureConfig};
pub use geometry::{resize_long_side, BBox, Keypoint, CROP_LONG_SIDE};
pub use pairing::{crop_spec, enumerate_pairs, CandidatePair, CropSpec};
