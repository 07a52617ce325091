//! Newline-delimited JSON scoring protocol (`hatch-reward/1`).
//!
//! Input line: `{"id": <any>, "raw_output": "<text>", "ground_truth": {...}}`.
//! `ground_truth` may be omitted when a separate ground-truth file supplies
//! it by `id`. Output line: `{"id", "act_acc", "ans_acc", "format", "total"}`
//! plus `"error"` when the record could not be scored; such records carry
//! zero rewards. Output order always equals input order.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;

use super::{score, GroundTruth, RewardBreakdown, RewardConfig};
use crate::error::{Error, Result};

pub const REWARD_SCHEMA: &str = "hatch-reward/1";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoredRecord {
    pub id: Value,
    pub act_acc: f64,
    pub ans_acc: f64,
    pub format: u8,
    pub total: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ScoredRecord {
    fn new(id: Value, b: RewardBreakdown) -> Self {
        ScoredRecord {
            id,
            act_acc: b.act_acc,
            ans_acc: b.ans_acc,
            format: b.format,
            total: b.total,
            error: None,
        }
    }

    fn failed(id: Value, error: impl Into<String>) -> Self {
        ScoredRecord {
            error: Some(error.into()),
            ..Self::new(id, RewardBreakdown::zero())
        }
    }
}

/// Ground truths keyed by record id.
#[derive(Debug, Clone, Default)]
pub struct GroundTruthIndex {
    by_id: HashMap<String, GroundTruth>,
}

fn id_key(id: &Value) -> String {
    id.to_string()
}

impl GroundTruthIndex {
    /// Reads `{"id": .., "ground_truth": {..}}` lines; blank lines are skipped.
    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut by_id = HashMap::new();
        for (k, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let bad = |m: String| Error::invalid("ground-truth file", format!("line {}: {m}", k + 1));
            let mut v: Value = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
            let id = v.get("id").cloned().ok_or_else(|| bad("missing id".into()))?;
            let gt = v
                .get_mut("ground_truth")
                .map(Value::take)
                .ok_or_else(|| bad("missing ground_truth".into()))?;
            let gt: GroundTruth = serde_json::from_value(gt).map_err(|e| bad(e.to_string()))?;
            if by_id.insert(id_key(&id), gt).is_some() {
                return Err(bad(format!("duplicate id {id}")));
            }
        }
        Ok(GroundTruthIndex { by_id })
    }

    pub fn get(&self, id: &Value) -> Option<&GroundTruth> {
        self.by_id.get(&id_key(id))
    }

    pub fn len(&self) -> usize {
        self.by_id.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_id.is_empty()
    }
}

/// Scores one input line. Never fails: problems become an `error` field.
pub fn score_line(line: &str, cfg: &RewardConfig, index: Option<&GroundTruthIndex>) -> ScoredRecord {
    let mut v: Value = match serde_json::from_str(line) {
        Ok(v) => v,
        Err(e) => return ScoredRecord::failed(Value::Null, format!("malformed record: {e}")),
    };
    let id = v.get("id").cloned().unwrap_or(Value::Null);
    let Some(raw) = v.get("raw_output").and_then(Value::as_str).map(str::to_owned) else {
        return ScoredRecord::failed(id, "raw_output missing or not a string");
    };
    let inline = v.get_mut("ground_truth").map(Value::take);
    let gt = match inline {
        Some(g) => match serde_json::from_value::<GroundTruth>(g) {
            Ok(g) => g,
            Err(e) => return ScoredRecord::failed(id, format!("invalid ground_truth: {e}")),
        },
        None => match index.and_then(|ix| ix.get(&id)) {
            Some(g) => g.clone(),
            None => return ScoredRecord::failed(id, "no ground truth for record"),
        },
    };
    if let Err(e) = gt.validate() {
        return ScoredRecord::failed(id, e.to_string());
    }
    ScoredRecord::new(id, score(&raw, &gt, cfg))
}

/// Scores lines in parallel on the current rayon pool, preserving order.
/// Blank lines are skipped.
pub fn score_lines<S: AsRef<str> + Sync>(
    lines: &[S],
    cfg: &RewardConfig,
    index: Option<&GroundTruthIndex>,
) -> Vec<ScoredRecord> {
    lines
        .par_iter()
        .filter(|l| !l.as_ref().trim().is_empty())
        .map(|l| score_line(l.as_ref(), cfg, index))
        .collect()
}

/// Running means over scored records.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct BatchSummary {
    pub schema: &'static str,
    pub records: usize,
    pub errors: usize,
    pub act_acc: f64,
    pub ans_acc: f64,
    pub format: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Default)]
pub struct SummaryAccumulator {
    records: usize,
    errors: usize,
    sums: [f64; 4],
}

impl SummaryAccumulator {
    pub fn add(&mut self, r: &ScoredRecord) {
        self.records += 1;
        self.errors += r.error.is_some() as usize;
        self.sums[0] += r.act_acc;
        self.sums[1] += r.ans_acc;
        self.sums[2] += r.format as f64;
        self.sums[3] += r.total;
    }

    pub fn finish(&self) -> BatchSummary {
        let mean = |s: f64| if self.records == 0 { 0.0 } else { s / self.records as f64 };
        BatchSummary {
            schema: REWARD_SCHEMA,
            records: self.records,
            errors: self.errors,
            act_acc: mean(self.sums[0]),
            ans_acc: mean(self.sums[1]),
            format: mean(self.sums[2]),
            total: mean(self.sums[3]),
        }
    }
}
