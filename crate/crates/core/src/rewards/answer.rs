//! Answer metrics: permissive choice matching, mean relative accuracy, box
//! IoU, soft exact match, camera-motion Gaussian score and per-dimension
//! view-change accuracy.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::RewardConfig;

/// 1 iff `pred` equals `gold` ignoring case, or `gold` is a single letter and
/// the first alphanumeric character of `pred` is that letter.
pub fn match_select(pred: &str, gold: &str) -> f64 {
    let (p, g) = (pred.trim(), gold.trim());
    if p.is_empty() || g.is_empty() {
        return 0.0;
    }
    if p.to_lowercase() == g.to_lowercase() {
        return 1.0;
    }
    let mut gc = g.chars();
    let (Some(label), None) = (gc.next(), gc.next()) else {
        return 0.0;
    };
    if !label.is_alphabetic() {
        return 0.0;
    }
    match p.chars().find(|c| c.is_alphanumeric()) {
        Some(first) if first.to_lowercase().eq(label.to_lowercase()) => 1.0,
        _ => 0.0,
    }
}

fn number_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"[-+]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][-+]?\d+)?").unwrap())
}

/// Scale factor to meters (or 1) for the unit word following a number.
fn unit_scale(rest: &str) -> f64 {
    let rest = rest.trim_start();
    let word: String = rest.chars().take_while(|c| c.is_alphabetic()).collect();
    match word.to_lowercase().as_str() {
        "cm" | "centimeter" | "centimeters" | "centimetre" | "centimetres" => 0.01,
        "mm" | "millimeter" | "millimeters" | "millimetre" | "millimetres" => 0.001,
        _ => 1.0,
    }
}

/// Every number in `text`, with centimeter and millimeter values converted
/// to meters. Other unit suffixes (`m`, `deg`, `°`) leave values unchanged.
pub fn extract_numbers(text: &str) -> Vec<f64> {
    number_regex()
        .find_iter(text)
        .filter(|m| {
            // skip digits glued to a preceding letter, e.g. "B2"
            !text[..m.start()]
                .chars()
                .next_back()
                .is_some_and(|c| c.is_alphabetic() || c == '_')
        })
        .filter_map(|m| {
            let v: f64 = m.as_str().parse().ok()?;
            Some(v * unit_scale(&text[m.end()..]))
        })
        .filter(|v| v.is_finite())
        .collect()
}

pub fn extract_single_number(text: &str) -> Option<f64> {
    match extract_numbers(text).as_slice() {
        [v] => Some(*v),
        _ => None,
    }
}

/// Fraction of thresholds `θ` with `|pred − gold| / |gold| < 1 − θ`. A zero
/// gold value only accepts an exact zero.
pub fn mra_value(pred: f64, gold: f64, thresholds: &[f64]) -> f64 {
    if thresholds.is_empty() {
        return 0.0;
    }
    if gold == 0.0 {
        return if pred == 0.0 { 1.0 } else { 0.0 };
    }
    let rel = (pred - gold).abs() / gold.abs();
    let hits = thresholds.iter().filter(|&&t| rel < 1.0 - t).count();
    hits as f64 / thresholds.len() as f64
}

/// MRA between texts that must each contain exactly one number.
pub fn mra_numeric(pred: &str, gold: &str, thresholds: &[f64]) -> f64 {
    match (extract_single_number(pred), extract_single_number(gold)) {
        (Some(p), Some(g)) => mra_value(p, g, thresholds),
        _ => 0.0,
    }
}

/// Axis-aligned box `[x1, y1, x2, y2]`; corners may come in either order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct BoundingBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl From<[f64; 4]> for BoundingBox {
    fn from(v: [f64; 4]) -> Self {
        BoundingBox {
            x1: v[0],
            y1: v[1],
            x2: v[2],
            y2: v[3],
        }
    }
}

impl From<BoundingBox> for [f64; 4] {
    fn from(b: BoundingBox) -> Self {
        [b.x1, b.y1, b.x2, b.y2]
    }
}

impl BoundingBox {
    fn normalized(&self) -> (f64, f64, f64, f64) {
        (
            self.x1.min(self.x2),
            self.y1.min(self.y2),
            self.x1.max(self.x2),
            self.y1.max(self.y2),
        )
    }

    pub fn area(&self) -> f64 {
        let (x1, y1, x2, y2) = self.normalized();
        (x2 - x1) * (y2 - y1)
    }

    /// A box from text holding exactly four numbers.
    pub fn parse(text: &str) -> Option<BoundingBox> {
        let nums: Vec<f64> = number_regex()
            .find_iter(text)
            .filter_map(|m| m.as_str().parse().ok())
            .collect();
        match nums.as_slice() {
            [a, b, c, d] if nums.iter().all(|v| v.is_finite()) => Some([*a, *b, *c, *d].into()),
            _ => None,
        }
    }
}

pub fn iou_boxes(pred: &BoundingBox, gold: &BoundingBox) -> f64 {
    let (ax1, ay1, ax2, ay2) = pred.normalized();
    let (bx1, by1, bx2, by2) = gold.normalized();
    let iw = (ax2.min(bx2) - ax1.max(bx1)).max(0.0);
    let ih = (ay2.min(by2) - ay1.max(by1)).max(0.0);
    let inter = iw * ih;
    let union = pred.area() + gold.area() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

fn normalize_soft(text: &str) -> String {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| Regex::new(r"\([^()]*\)").unwrap());
    let mut s = text.to_string();
    loop {
        let next = re.replace_all(&s, " ").into_owned();
        if next == s {
            break;
        }
        s = next;
    }
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Case-insensitive equality after dropping parenthesised spans.
pub fn soft_exact_match(pred: &str, gold: &str) -> f64 {
    let (p, g) = (normalize_soft(pred), normalize_soft(gold));
    if !g.is_empty() && p == g {
        1.0
    } else {
        0.0
    }
}

/// Gold camera-motion payload: a 2D image position, a depth, and the image
/// size used to normalise position error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotionTarget {
    pub x: f64,
    pub y: f64,
    pub depth: f64,
    pub image_width: f64,
    pub image_height: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionPrediction {
    pub x: f64,
    pub y: f64,
    pub depth: f64,
}

impl MotionPrediction {
    /// Accepts `{"x":..,"y":..,"depth":..}` or text with exactly three numbers.
    pub fn parse(text: &str) -> Option<MotionPrediction> {
        if let Ok(Value::Object(map)) = serde_json::from_str::<Value>(text.trim()) {
            let get = |k: &str| map.get(k).and_then(Value::as_f64);
            return Some(MotionPrediction {
                x: get("x")?,
                y: get("y")?,
                depth: get("depth")?,
            });
        }
        match extract_numbers(text).as_slice() {
            [x, y, depth] => Some(MotionPrediction {
                x: *x,
                y: *y,
                depth: *depth,
            }),
            _ => None,
        }
    }
}

/// `w_pos·exp(−(e_pos/σ_pos)²) + w_depth·exp(−(e_depth/σ_depth)²)` with the
/// position error normalised by the image diagonal and the depth error
/// relative to the gold depth.
pub fn camera_motion_score(pred: &MotionPrediction, gold: &MotionTarget, cfg: &RewardConfig) -> f64 {
    let diag = gold.image_width.hypot(gold.image_height);
    if !(diag > 0.0 && gold.depth > 0.0) {
        return 0.0;
    }
    let e_pos = (pred.x - gold.x).hypot(pred.y - gold.y) / diag;
    let e_depth = (pred.depth - gold.depth).abs() / gold.depth;
    let score = cfg.w_pos * (-(e_pos / cfg.sigma_pos).powi(2)).exp()
        + cfg.w_depth * (-(e_depth / cfg.sigma_depth).powi(2)).exp();
    if score.is_finite() {
        score.clamp(0.0, 1.0)
    } else {
        0.0
    }
}

/// Canonical view-change dimensions. Signs: yaw right, pitch up and
/// vertical up are positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ViewDim {
    YawDeg,
    PitchDeg,
    ForwardM,
    VerticalM,
}

fn view_dim_of(key: &str) -> Option<(ViewDim, f64)> {
    Some(match key {
        "yaw_deg" | "turn_right_deg" => (ViewDim::YawDeg, 1.0),
        "turn_left_deg" => (ViewDim::YawDeg, -1.0),
        "pitch_deg" | "turn_up_deg" => (ViewDim::PitchDeg, 1.0),
        "turn_down_deg" => (ViewDim::PitchDeg, -1.0),
        "forward_m" | "move_forward_m" => (ViewDim::ForwardM, 1.0),
        "vertical_m" | "move_up_m" => (ViewDim::VerticalM, 1.0),
        "move_down_m" => (ViewDim::VerticalM, -1.0),
        _ => return None,
    })
}

fn add_value(dims: &mut BTreeMap<ViewDim, f64>, key: &str, value: &Value) -> bool {
    let Some((dim, sign)) = view_dim_of(key) else {
        return false;
    };
    let v = match value {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => extract_single_number(s),
        _ => None,
    };
    match v {
        Some(v) => {
            *dims.entry(dim).or_insert(0.0) += sign * v;
            true
        }
        None => false,
    }
}

/// Parses view-change parameters into canonical dimensions. Accepts a JSON
/// object of canonical or action keys, a JSON list of single-key action
/// objects, or free text of `key: value` pairs. Repeated keys accumulate.
pub fn parse_view_change(text: &str) -> Option<BTreeMap<ViewDim, f64>> {
    let mut dims = BTreeMap::new();
    match serde_json::from_str::<Value>(text.trim()) {
        Ok(Value::Object(map)) => {
            for (k, v) in &map {
                add_value(&mut dims, k, v);
            }
        }
        Ok(Value::Array(items)) => {
            for item in &items {
                if let Value::Object(map) = item {
                    for (k, v) in map {
                        add_value(&mut dims, k, v);
                    }
                }
            }
        }
        _ => {
            static RE: OnceLock<Regex> = OnceLock::new();
            let re = RE.get_or_init(|| {
                Regex::new(
                    r"(yaw_deg|pitch_deg|forward_m|vertical_m|turn_(?:left|right|up|down)_deg|move_(?:forward|up|down)_m)\W*?([-+]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][-+]?\d+)?)",
                )
                .unwrap()
            });
            for cap in re.captures_iter(text) {
                add_value(&mut dims, &cap[1], &Value::String(cap[2].to_string()));
            }
        }
    }
    (!dims.is_empty()).then_some(dims)
}

/// MRA per gold dimension, averaged; missing predicted dimensions score 0.
pub fn view_change_mra(pred: &str, gold: &str, thresholds: &[f64]) -> f64 {
    let Some(gold_dims) = parse_view_change(gold) else {
        return 0.0;
    };
    let pred_dims = parse_view_change(pred).unwrap_or_default();
    let total: f64 = gold_dims
        .iter()
        .map(|(dim, &g)| pred_dims.get(dim).map_or(0.0, |&p| mra_value(p, g, thresholds)))
        .sum();
    total / gold_dims.len() as f64
}
