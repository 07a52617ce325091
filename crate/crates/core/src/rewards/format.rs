//! Output-protocol checks: `<action> ... </action> <answer> ... </answer>`.

use crate::annotations::parse_annotations;

const ACTION_OPEN: &str = "<action>";
const ACTION_CLOSE: &str = "</action>";
const ANSWER_OPEN: &str = "<answer>";
const ANSWER_CLOSE: &str = "</answer>";

fn block<'a>(raw: &'a str, from: usize, open: &str, close: &str) -> Option<(usize, &'a str, usize)> {
    let start = from + raw[from..].find(open)?;
    let inner = start + open.len();
    let end = inner + raw[inner..].find(close)?;
    Some((start, &raw[inner..end], end + close.len()))
}

/// Inner texts of the first closed action block and the first closed answer
/// block after it. `None` when either is missing or unclosed, or when an
/// answer tag opens before the action block.
pub fn extract_blocks(raw: &str) -> Option<(&str, &str)> {
    let (action_start, action, after) = block(raw, 0, ACTION_OPEN, ACTION_CLOSE)?;
    if let Some(first_answer) = raw.find(ANSWER_OPEN) {
        if first_answer < action_start {
            return None;
        }
    }
    let (_, answer, _) = block(raw, after, ANSWER_OPEN, ANSWER_CLOSE)?;
    Some((action, answer))
}

/// The raw generation with whatever blocks could be located on their own.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelOutput<'a> {
    pub raw_text: &'a str,
    pub action_text: Option<&'a str>,
    pub answer_text: Option<&'a str>,
}

impl<'a> ModelOutput<'a> {
    pub fn parse(raw: &'a str) -> Self {
        ModelOutput {
            raw_text: raw,
            action_text: block(raw, 0, ACTION_OPEN, ACTION_CLOSE).map(|b| b.1),
            answer_text: block(raw, 0, ANSWER_OPEN, ANSWER_CLOSE).map(|b| b.1),
        }
    }
}

/// 1 iff both blocks extract in order, the action block parses, and its
/// pairs are exactly the required pairs for `n_views`.
pub fn format_reward(raw: &str, n_views: usize) -> u8 {
    let Some((action, _)) = extract_blocks(raw) else {
        return 0;
    };
    match parse_annotations(action) {
        Ok(set) if set.covers(n_views) => 1,
        _ => 0,
    }
}
