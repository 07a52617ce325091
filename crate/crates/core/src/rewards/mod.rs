//! Verifiable rewards for action-then-answer generations.
//!
//! The total reward is `λ1·act + λ2·ans + λ3·format`:
//!
//! * `act` compares the pose induced by each predicted plan with the gold
//!   plan's pose through `exp(−d_t/τ_t)·exp(−d_r/τ_r)`,
//! * `ans` dispatches on question type and sub-category to a task metric,
//! * `format` is 1 only for a well-formed output covering every view pair.

pub mod answer;
pub mod batch;
pub mod format;

use serde::{Deserialize, Serialize};

use crate::action::execute;
use crate::annotations::{parse_annotations, ActionAnnotationSet};
use crate::error::{Error, Result};

pub use answer::{
    camera_motion_score, extract_numbers, extract_single_number, iou_boxes, match_select,
    mra_numeric, mra_value, parse_view_change, soft_exact_match, view_change_mra, BoundingBox,
    MotionPrediction, MotionTarget, ViewDim,
};
pub use format::{extract_blocks, format_reward, ModelOutput};

/// How per-pair action rewards combine into one score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairAggregation {
    #[default]
    Mean,
    Min,
    Product,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    pub weight_action: f64,
    pub weight_answer: f64,
    pub weight_format: f64,
    /// Translation temperature, meters.
    pub tau_t: f64,
    /// Rotation temperature, degrees.
    pub tau_r: f64,
    pub mra_thresholds: Vec<f64>,
    pub stop_penalty: bool,
    pub stop_eps_deg: f64,
    pub stop_eps_m: f64,
    pub w_pos: f64,
    pub w_depth: f64,
    pub sigma_pos: f64,
    pub sigma_depth: f64,
    pub aggregation: PairAggregation,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            weight_action: 1.0,
            weight_answer: 1.0,
            weight_format: 1.0,
            tau_t: 0.5,
            tau_r: 30.0,
            mra_thresholds: (0..10).map(|k| (50 + 5 * k) as f64 / 100.0).collect(),
            stop_penalty: true,
            stop_eps_deg: 1.0,
            stop_eps_m: 0.01,
            w_pos: 0.5,
            w_depth: 0.5,
            sigma_pos: 0.25,
            sigma_depth: 0.25,
            aggregation: PairAggregation::Mean,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        for (name, w) in [
            ("weight_action", self.weight_action),
            ("weight_answer", self.weight_answer),
            ("weight_format", self.weight_format),
        ] {
            if !(w >= 0.0 && w.is_finite()) {
                return fail(format!("{name} must be a nonnegative number, got {w}"));
            }
        }
        if !(self.tau_t > 0.0 && self.tau_r > 0.0) {
            return fail("tau_t and tau_r must be positive".into());
        }
        if self.mra_thresholds.is_empty()
            || self.mra_thresholds.iter().any(|t| !(*t > 0.0 && *t < 1.0))
            || self.mra_thresholds.windows(2).any(|w| w[0] >= w[1])
        {
            return fail("mra_thresholds must be nonempty, strictly increasing, within (0, 1)".into());
        }
        if !(self.w_pos >= 0.0 && self.w_depth >= 0.0 && (self.w_pos + self.w_depth - 1.0).abs() < 1e-12) {
            return fail("w_pos and w_depth must be nonnegative and sum to 1".into());
        }
        if !(self.sigma_pos > 0.0 && self.sigma_depth > 0.0) {
            return fail("Gaussian scales must be positive".into());
        }
        if !(self.stop_eps_deg >= 0.0 && self.stop_eps_m >= 0.0) {
            return fail("stop thresholds must be nonnegative".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionType {
    Select,
    Fill,
}

/// Task label selecting the answer metric for fill questions. Unlisted
/// labels fall back to numeric MRA.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubCategory {
    PositionMatching,
    ObjectDistanceInference,
    CameraMotionInference,
    ViewChangeInference,
    #[serde(other)]
    General,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruth {
    pub gold_actions: ActionAnnotationSet,
    pub gold_answer: String,
    pub sub_category: SubCategory,
    pub question_type: QuestionType,
    pub n_views: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_box: Option<BoundingBox>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_motion: Option<MotionTarget>,
}

impl GroundTruth {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::invalid("ground truth", m));
        if !self.gold_actions.covers(self.n_views) {
            return fail(format!(
                "gold actions {:?} do not cover all pairs of {} views",
                self.gold_actions.pairs(),
                self.n_views
            ));
        }
        let fill = self.question_type == QuestionType::Fill;
        let wants_box = fill && self.sub_category == SubCategory::PositionMatching;
        if wants_box != self.gold_box.is_some() {
            return fail("gold_box must be present exactly for position-matching fill questions".into());
        }
        let wants_motion = fill && self.sub_category == SubCategory::CameraMotionInference;
        if wants_motion != self.gold_motion.is_some() {
            return fail("gold_motion must be present exactly for camera-motion fill questions".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub act_acc: f64,
    pub ans_acc: f64,
    pub format: u8,
    pub total: f64,
}

impl RewardBreakdown {
    pub fn zero() -> Self {
        RewardBreakdown {
            act_acc: 0.0,
            ans_acc: 0.0,
            format: 0,
            total: 0.0,
        }
    }
}

/// Pose-level similarity of one predicted plan to its gold plan.
pub fn pair_action_reward(
    pred: &crate::action::ActionPlan,
    gold: &crate::action::ActionPlan,
    cfg: &RewardConfig,
) -> f64 {
    if cfg.stop_penalty
        && pred.is_stop_like(cfg.stop_eps_deg, cfg.stop_eps_m)
        && !gold.is_stop_like(cfg.stop_eps_deg, cfg.stop_eps_m)
    {
        return 0.0;
    }
    let (p, g) = (execute(pred), execute(gold));
    let d_t = p.translation_error(&g);
    let d_r = p.rotation_error_deg(&g);
    (-d_t / cfg.tau_t).exp() * (-d_r / cfg.tau_r).exp()
}

/// Aggregate pose reward over the gold pairs; missing predicted pairs score
/// 0. With no gold pairs the reward is 1.
pub fn action_accuracy_reward(
    pred: &ActionAnnotationSet,
    gold: &ActionAnnotationSet,
    cfg: &RewardConfig,
) -> f64 {
    if gold.is_empty() {
        return 1.0;
    }
    let scores = gold.iter().map(|((i, j), g)| {
        pred.get(i, j)
            .map_or(0.0, |p| pair_action_reward(p, g, cfg))
    });
    match cfg.aggregation {
        PairAggregation::Mean => scores.sum::<f64>() / gold.len() as f64,
        PairAggregation::Min => scores.fold(1.0, f64::min),
        PairAggregation::Product => scores.product(),
    }
}

/// Answer reward for the given question type and sub-category.
pub fn answer_accuracy_reward(pred: &str, gt: &GroundTruth, cfg: &RewardConfig) -> f64 {
    if pred.trim().is_empty() {
        return 0.0;
    }
    let theta = &cfg.mra_thresholds;
    match (gt.question_type, gt.sub_category) {
        (QuestionType::Select, _) => match_select(pred, &gt.gold_answer),
        (QuestionType::Fill, SubCategory::PositionMatching) => {
            match (BoundingBox::parse(pred), gt.gold_box) {
                (Some(p), Some(g)) => iou_boxes(&p, &g),
                _ => 0.0,
            }
        }
        (QuestionType::Fill, SubCategory::ObjectDistanceInference) => {
            soft_exact_match(pred, &gt.gold_answer)
        }
        (QuestionType::Fill, SubCategory::CameraMotionInference) => {
            match (MotionPrediction::parse(pred), gt.gold_motion) {
                (Some(p), Some(g)) => camera_motion_score(&p, &g, cfg),
                _ => 0.0,
            }
        }
        (QuestionType::Fill, SubCategory::ViewChangeInference) => {
            view_change_mra(pred, &gt.gold_answer, theta)
        }
        (QuestionType::Fill, SubCategory::General) => mra_numeric(pred, &gt.gold_answer, theta),
    }
}

pub fn total_reward(act_acc: f64, ans_acc: f64, format: u8, cfg: &RewardConfig) -> RewardBreakdown {
    RewardBreakdown {
        act_acc,
        ans_acc,
        format,
        total: cfg.weight_action * act_acc + cfg.weight_answer * ans_acc + cfg.weight_format * format as f64,
    }
}

/// Scores one raw generation against its ground truth.
pub fn score(raw: &str, gt: &GroundTruth, cfg: &RewardConfig) -> RewardBreakdown {
    let out = ModelOutput::parse(raw);
    let format = format_reward(raw, gt.n_views);
    let act = out
        .action_text
        .and_then(|t| parse_annotations(t).ok())
        .map_or(0.0, |pred| action_accuracy_reward(&pred, &gt.gold_actions, cfg));
    let ans = out
        .answer_text
        .map_or(0.0, |a| answer_accuracy_reward(a, gt, cfg));
    total_reward(act, ans, format, cfg)
}
