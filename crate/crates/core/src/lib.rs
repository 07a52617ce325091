//! Supervision generation and verifiable rewards for multi-image spatial
//! reasoning.
//!
//! * [`geometry`]: pinhole cameras, poses, reprojection.
//! * [`correspondence`]: patch overlap, correspondence targets, alignment loss.
//! * [`action`] and [`annotations`]: camera action plans, their executor and
//!   compiler, and the JSON annotation format.
//! * [`rewards`]: action, answer and format rewards and the JSONL protocol.
//! * [`dataset`]: scene manifests, supervision bundles, synthetic scenes.

// `!(x > 0.0)` style checks are meant to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod action;
pub mod annotations;
pub mod correspondence;
pub mod dataset;
pub mod error;
pub mod geometry;
pub mod pfm;
pub mod rewards;
pub mod selfcheck;

pub use action::{compile, execute, ActionKind, ActionPlan, AtomicAction, CompileTolerances};
pub use annotations::{parse_annotations, required_pairs, serialize_annotations, ActionAnnotationSet};
pub use correspondence::{
    correspondence_loss, directional_overlap, predicted_distribution, symmetric_overlap,
    target_distribution, CorrespondenceConfig, CorrespondenceMatrix, LossBreakdown, OverlapMatrix,
    PatchFeatureSet, PatchGrid,
};
pub use dataset::{
    build_supervision, load_manifest, read_bundle, synth_scene, write_bundle, write_scene,
    GenerationConfig, SceneManifest, SupervisionBundle, SynthSpec,
};
pub use error::{Error, Result};
pub use geometry::{CameraView, DepthMap, Intrinsics, Pose, RelativePose};
pub use rewards::{GroundTruth, RewardBreakdown, RewardConfig};
