//! The action annotation JSON format.
//!
//! ```json
//! [{"from":0,"to":1,"action":[{"turn_right_deg":30},{"move_forward_m":1.4}]}]
//! ```
//!
//! Parsing is strict: unknown keys, non-numeric or negative magnitudes,
//! `from >= to` and repeated pairs are all rejected. Canonical serialization
//! sorts pairs, emits keys in `from, to, action` order without whitespace and
//! renders magnitudes with at most 6 significant digits.

use std::collections::BTreeMap;
use std::fmt;

use serde::de::{self, Deserializer, MapAccess, Visitor};
use serde::ser::{SerializeMap, SerializeSeq, Serializer};
use serde::{Deserialize, Serialize};

use crate::action::{round_significant, ActionKind, ActionPlan, AtomicAction};
use crate::error::{Error, Result};

/// Teacher or predicted plans for view pairs `(from, to)` with `from < to`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ActionAnnotationSet {
    plans: BTreeMap<(usize, usize), ActionPlan>,
}

impl ActionAnnotationSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a plan; fails on `from >= to` or a pair already present.
    pub fn insert(&mut self, from: usize, to: usize, plan: ActionPlan) -> Result<()> {
        if from >= to {
            return Err(Error::invalid(
                "annotation",
                format!("pair ({from}, {to}) must satisfy from < to"),
            ));
        }
        if self.plans.contains_key(&(from, to)) {
            return Err(Error::invalid(
                "annotation",
                format!("duplicate pair ({from}, {to})"),
            ));
        }
        self.plans.insert((from, to), plan);
        Ok(())
    }

    pub fn get(&self, from: usize, to: usize) -> Option<&ActionPlan> {
        self.plans.get(&(from, to))
    }

    pub fn len(&self) -> usize {
        self.plans.len()
    }

    pub fn is_empty(&self) -> bool {
        self.plans.is_empty()
    }

    /// Entries in lexicographic pair order.
    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), &ActionPlan)> {
        self.plans.iter().map(|(k, v)| (*k, v))
    }

    pub fn pairs(&self) -> Vec<(usize, usize)> {
        self.plans.keys().copied().collect()
    }

    /// True when the pair set is exactly [`required_pairs`]`(n_views)`.
    pub fn covers(&self, n_views: usize) -> bool {
        let required = required_pairs(n_views);
        required.len() == self.plans.len() && required.iter().all(|p| self.plans.contains_key(p))
    }

    pub fn rounded(&self) -> ActionAnnotationSet {
        ActionAnnotationSet {
            plans: self.plans.iter().map(|(k, p)| (*k, p.rounded())).collect(),
        }
    }
}

/// All 0-based pairs `i < j` over `n_views` views, lexicographically.
pub fn required_pairs(n_views: usize) -> Vec<(usize, usize)> {
    (0..n_views)
        .flat_map(|i| (i + 1..n_views).map(move |j| (i, j)))
        .collect()
}

struct ActionEntry(AtomicAction);

impl<'de> Deserialize<'de> for ActionEntry {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct EntryVisitor;

        impl<'de> Visitor<'de> for EntryVisitor {
            type Value = ActionEntry;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an object with exactly one action key")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> std::result::Result<ActionEntry, A::Error> {
                let Some(key) = map.next_key::<String>()? else {
                    return Err(de::Error::custom("empty action object"));
                };
                let kind = ActionKind::from_key(&key)
                    .ok_or_else(|| de::Error::custom(format!("unknown action `{key}`")))?;
                let magnitude: f64 = map.next_value()?;
                if map.next_key::<de::IgnoredAny>()?.is_some() {
                    return Err(de::Error::custom("action object has more than one key"));
                }
                AtomicAction::new(kind, magnitude)
                    .map(ActionEntry)
                    .map_err(|_| de::Error::custom(format!("`{key}` magnitude must be finite and >= 0, got {magnitude}")))
            }
        }

        deserializer.deserialize_map(EntryVisitor)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEntry {
    from: usize,
    to: usize,
    action: Vec<ActionEntry>,
}

impl<'de> Deserialize<'de> for ActionAnnotationSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = Vec::<RawEntry>::deserialize(deserializer)?;
        let mut set = ActionAnnotationSet::new();
        for (k, e) in raw.into_iter().enumerate() {
            let plan = ActionPlan::new(e.action.into_iter().map(|a| a.0).collect());
            set.insert(e.from, e.to, plan)
                .map_err(|err| de::Error::custom(format!("entry {k}: {err}")))?;
        }
        Ok(set)
    }
}

struct PlanSer<'a>(&'a ActionPlan);

impl Serialize for PlanSer<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(self.0.len()))?;
        for a in self.0.actions() {
            let mut single = BTreeMap::new();
            single.insert(a.kind().key(), round_significant(a.magnitude()));
            seq.serialize_element(&single)?;
        }
        seq.end()
    }
}

impl Serialize for ActionAnnotationSet {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        struct Entry<'a>(usize, usize, &'a ActionPlan);
        impl Serialize for Entry<'_> {
            fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                let mut m = s.serialize_map(Some(3))?;
                m.serialize_entry("from", &self.0)?;
                m.serialize_entry("to", &self.1)?;
                m.serialize_entry("action", &PlanSer(self.2))?;
                m.end()
            }
        }
        let mut seq = s.serialize_seq(Some(self.len()))?;
        for ((from, to), plan) in self.iter() {
            seq.serialize_element(&Entry(from, to, plan))?;
        }
        seq.end()
    }
}

/// Strictly parses annotation JSON. Errors carry the line and column.
pub fn parse_annotations(text: &str) -> Result<ActionAnnotationSet> {
    serde_json::from_str(text).map_err(|e| Error::Annotation {
        location: format!("line {} column {}", e.line(), e.column()),
        message: strip_position(&e.to_string()),
    })
}

fn strip_position(msg: &str) -> String {
    match msg.rfind(" at line ") {
        Some(k) => msg[..k].to_string(),
        None => msg.to_string(),
    }
}

fn format_magnitude(x: f64) -> String {
    format!("{}", round_significant(x))
}

/// Canonical annotation text.
pub fn serialize_annotations(set: &ActionAnnotationSet) -> String {
    let mut out = String::from("[");
    for (k, ((from, to), plan)) in set.iter().enumerate() {
        if k > 0 {
            out.push(',');
        }
        out.push_str(&format!("{{\"from\":{from},\"to\":{to},\"action\":["));
        for (m, a) in plan.actions().iter().enumerate() {
            if m > 0 {
                out.push(',');
            }
            out.push_str(&format!("{{\"{}\":{}}}", a.kind().key(), format_magnitude(a.magnitude())));
        }
        out.push_str("]}");
    }
    out.push(']');
    out
}
