//! Completion parsing and the two-part reward: length-penalized correctness
//! plus a path-alignment bonus gated on a correct answer.

use std::collections::{HashMap, HashSet};
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curriculum::{OptionLetter, QaItem};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Completion {
    pub raw: String,
    pub think: Option<String>,
    pub answer: Option<OptionLetter>,
    /// Whitespace tokens of `raw`.
    pub token_count: usize,
}

fn tagged<'a>(text: &'a str, open: &str, close: &str) -> Option<(&'a str, usize)> {
    let start = text.find(open)? + open.len();
    let len = text[start..].find(close)?;
    Some((&text[start..start + len], start + len + close.len()))
}

fn letter_patterns() -> &'static [Regex; 3] {
    static PATTERNS: OnceLock<[Regex; 3]> = OnceLock::new();
    PATTERNS.get_or_init(|| {
        [
            Regex::new(r"^\(?([A-Da-d])\)?[.:]?$").expect("valid regex"),
            Regex::new(r"\(([A-Da-d])\)").expect("valid regex"),
            Regex::new(r"\b([A-D])\b").expect("valid regex"),
        ]
    })
}

/// Reduces answer text to one option letter. Tried in order: the whole text
/// is a bare letter such as `b`, `(C)` or `D.`; a parenthesized letter
/// anywhere; exactly one distinct standalone capital A-D.
pub fn normalize_answer(text: &str) -> Option<OptionLetter> {
    let text = text.trim();
    let [bare, paren, standalone] = letter_patterns();
    let first_char = |c: regex::Captures<'_>| c[1].chars().next().and_then(OptionLetter::from_char);
    if let Some(c) = bare.captures(text) {
        return first_char(c);
    }
    if let Some(c) = paren.captures(text) {
        return first_char(c);
    }
    let letters: HashSet<&str> = standalone
        .captures_iter(text)
        .map(|c| c.get(1).expect("group").as_str())
        .collect();
    if letters.len() == 1 {
        return letters
            .into_iter()
            .next()
            .and_then(|l| l.chars().next())
            .and_then(OptionLetter::from_char);
    }
    None
}

/// First `<think>` block, then the first `<answer>` block after it (or
/// anywhere when there is no think block).
pub fn parse_tagged_completion(raw: &str) -> Completion {
    let (think, rest) = match tagged(raw, "<think>", "</think>") {
        Some((body, end)) => (Some(body.to_string()), &raw[end..]),
        None => (None, raw),
    };
    let answer = tagged(rest, "<answer>", "</answer>").and_then(|(body, _)| normalize_answer(body));
    Completion {
        raw: raw.to_string(),
        think,
        answer,
        token_count: raw.split_whitespace().count(),
    }
}

/// Lowercase, punctuation to spaces, split on whitespace.
pub fn normalize_tokens(text: &str) -> Vec<String> {
    text.to_lowercase()
        .chars()
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect::<String>()
        .split_whitespace()
        .map(str::to_string)
        .collect()
}

/// Fraction of concepts whose normalized phrase occurs contiguously in the
/// tokens, and the hit count.
pub fn coverage<S: AsRef<str>>(tokens: &[String], concepts: &[S]) -> (f64, usize) {
    if concepts.is_empty() {
        return (0.0, 0);
    }
    let hits = concepts
        .iter()
        .filter(|c| {
            let phrase = normalize_tokens(c.as_ref());
            !phrase.is_empty() && tokens.windows(phrase.len()).any(|w| w == phrase.as_slice())
        })
        .count();
    (hits as f64 / concepts.len() as f64, hits)
}

/// Trigram repetition ratio `1 - distinct/total`; zero below three tokens.
pub fn trigram_repetition(tokens: &[String]) -> f64 {
    if tokens.len() < 3 {
        return 0.0;
    }
    let total = tokens.len() - 2;
    let distinct: HashSet<&[String]> = tokens.windows(3).collect();
    1.0 - distinct.len() as f64 / total as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardConfig {
    pub l_soft: usize,
    pub l_max: usize,
    pub cov_coeff: f64,
    pub hit_bonus: f64,
    pub hit_threshold: usize,
    pub path_cap: f64,
    pub correct_reward: f64,
    pub incorrect_reward: f64,
    /// Repetition ratio tolerated before the penalty starts.
    pub repetition_dead_zone: f64,
    /// Width of the ramp from no penalty to full penalty.
    pub repetition_span: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            l_soft: 1280,
            l_max: 1792,
            cov_coeff: 0.8,
            hit_bonus: 0.3,
            hit_threshold: 2,
            path_cap: 0.8,
            correct_reward: 1.0,
            incorrect_reward: -1.0,
            repetition_dead_zone: 0.2,
            repetition_span: 0.6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RewardError {
    #[error("invalid reward config: {0}")]
    InvalidConfig(String),
    #[error("no item with id {0:?}")]
    UnknownItem(String),
}

impl RewardConfig {
    pub fn validate(&self) -> Result<(), RewardError> {
        if self.l_soft >= self.l_max {
            return Err(RewardError::InvalidConfig(format!(
                "l_soft {} must be below l_max {}",
                self.l_soft, self.l_max
            )));
        }
        if self.repetition_span <= 0.0 {
            return Err(RewardError::InvalidConfig("repetition_span must be positive".into()));
        }
        Ok(())
    }
}

/// `1 - clamp((r3 - dead_zone) / span, 0, 1)`.
pub fn repetition_penalty(tokens: &[String], cfg: &RewardConfig) -> f64 {
    let r3 = trigram_repetition(tokens);
    1.0 - ((r3 - cfg.repetition_dead_zone) / cfg.repetition_span).clamp(0.0, 1.0)
}

/// Path term from its parts: `min((cov_coeff*cov + hit_bonus*[hits>=thr]) * rho, cap)`.
pub fn path_term(coverage: f64, hits: usize, rho: f64, cfg: &RewardConfig) -> f64 {
    let bonus = if hits >= cfg.hit_threshold { cfg.hit_bonus } else { 0.0 };
    ((cfg.cov_coeff * coverage + bonus) * rho).min(cfg.path_cap)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathScore {
    pub value: f64,
    pub coverage: f64,
    pub hits: usize,
    pub rho: f64,
    pub gate_open: bool,
}

/// Alignment term. Coverage and rho are always reported; the value is zero
/// unless the answer is correct and a think block exists.
pub fn r_path<S: AsRef<str>>(
    completion: &Completion,
    concepts: &[S],
    answer_correct: bool,
    cfg: &RewardConfig,
) -> PathScore {
    let tokens = completion.think.as_deref().map(normalize_tokens).unwrap_or_default();
    let (cov, hits) = coverage(&tokens, concepts);
    let rho = repetition_penalty(&tokens, cfg);
    let gate_open = answer_correct && completion.think.is_some();
    PathScore {
        value: if gate_open { path_term(cov, hits, rho, cfg) } else { 0.0 },
        coverage: cov,
        hits,
        rho,
        gate_open,
    }
}

/// Linear ramp from 0 at `l_soft` tokens to 1 at `l_max`.
pub fn length_penalty(token_count: usize, cfg: &RewardConfig) -> f64 {
    let over = token_count as f64 - cfg.l_soft as f64;
    (over / (cfg.l_max - cfg.l_soft) as f64).clamp(0.0, 1.0)
}

/// `(base - penalty, penalty)`; a missing answer scores as wrong.
pub fn r_correct(completion: &Completion, gold: OptionLetter, cfg: &RewardConfig) -> (f64, f64) {
    let base = if completion.answer == Some(gold) {
        cfg.correct_reward
    } else {
        cfg.incorrect_reward
    };
    let penalty = length_penalty(completion.token_count, cfg);
    (base - penalty, penalty)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub r_correct: f64,
    pub length_penalty: f64,
    pub r_path: f64,
    pub total: f64,
    pub coverage: f64,
    pub hits: usize,
    pub rho: f64,
    pub gate_open: bool,
    pub correct: bool,
    pub answer: Option<OptionLetter>,
}

pub fn score_completion(completion: &Completion, item: &QaItem, cfg: &RewardConfig) -> RewardBreakdown {
    let correct = completion.answer == Some(item.gold);
    let (rc, penalty) = r_correct(completion, item.gold, cfg);
    let path = r_path(completion, &item.concepts(), correct, cfg);
    RewardBreakdown {
        r_correct: rc,
        length_penalty: penalty,
        r_path: path.value,
        total: rc + path.value,
        coverage: path.coverage,
        hits: path.hits,
        rho: path.rho,
        gate_open: path.gate_open,
        correct,
        answer: completion.answer,
    }
}

pub fn total_reward(raw: &str, item: &QaItem, cfg: &RewardConfig) -> RewardBreakdown {
    score_completion(&parse_tagged_completion(raw), item, cfg)
}

/// One line of batch-scoring input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub item_id: String,
    pub raw_completion: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredCompletion {
    pub item_id: String,
    #[serde(flatten)]
    pub breakdown: RewardBreakdown,
}

pub fn score_batch(
    requests: &[ScoreRequest],
    items: &[QaItem],
    cfg: &RewardConfig,
) -> Result<Vec<ScoredCompletion>, RewardError> {
    cfg.validate()?;
    let by_id: HashMap<&str, &QaItem> = items.iter().map(|i| (i.id.as_str(), i)).collect();
    requests
        .iter()
        .map(|r| {
            let item = by_id
                .get(r.item_id.as_str())
                .ok_or_else(|| RewardError::UnknownItem(r.item_id.clone()))?;
            Ok(ScoredCompletion {
                item_id: r.item_id.clone(),
                breakdown: total_reward(&r.raw_completion, item, cfg),
            })
        })
        .collect()
}
