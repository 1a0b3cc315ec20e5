//! Group-relative policy optimization against a pluggable policy.
//!
//! Each step samples `n_generations` completions per prompt, scores them,
//! normalizes rewards within each group, and turns the clipped surrogate
//! plus KL anchor into one per-sample coefficient on the completion
//! log-probability. Policies apply that signal however they can.

use std::collections::{BTreeMap, HashMap};
use std::sync::Mutex;
use std::time::Duration;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curriculum::{OptionLetter, QaItem};
use crate::reward::{parse_tagged_completion, score_completion, Completion, RewardBreakdown, RewardConfig};
use crate::seed::rng_for;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GrpoError {
    #[error("group statistics need at least 2 samples, got {0}")]
    GroupTooSmall(usize),
    #[error("policy {policy} unavailable: {message}")]
    PolicyUnavailable { policy: String, message: String },
    #[error("policy {0} does not support updates")]
    UpdateUnsupported(String),
    #[error("invalid GRPO config: {0}")]
    InvalidConfig(String),
    #[error("no training items")]
    NoItems,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GrpoConfig {
    pub n_generations: usize,
    pub kl_beta: f64,
    pub clip_epsilon: f64,
    /// Step size for gradient-based policies.
    pub learning_rate: f64,
    /// Step size for the tabular toy policy.
    pub toy_step_size: f64,
    pub temperature: f64,
    pub top_p: f64,
    pub epochs: usize,
    pub max_completion: usize,
    /// Prompts whose losses are averaged into one update.
    pub grad_accum: usize,
    pub advantage_guard: f64,
    /// Supplied by the caller (the pipeline's global seed), not the config file.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for GrpoConfig {
    fn default() -> Self {
        GrpoConfig {
            n_generations: 4,
            kl_beta: 0.12,
            clip_epsilon: 0.2,
            learning_rate: 2e-6,
            toy_step_size: 96.0,
            temperature: 0.6,
            top_p: 0.9,
            epochs: 3,
            max_completion: 1792,
            grad_accum: 16,
            advantage_guard: 1e-6,
            seed: 0,
        }
    }
}

impl GrpoConfig {
    pub fn validate(&self) -> Result<(), GrpoError> {
        let bad = |m: &str| Err(GrpoError::InvalidConfig(m.into()));
        if self.n_generations < 2 {
            return bad("n_generations must be at least 2");
        }
        if self.clip_epsilon <= 0.0 {
            return bad("clip_epsilon must be positive");
        }
        if self.grad_accum == 0 {
            return bad("grad_accum must be positive");
        }
        if self.temperature <= 0.0 || !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return bad("temperature must be positive and top_p in (0, 1]");
        }
        if self.max_completion == 0 {
            return bad("max_completion must be positive");
        }
        Ok(())
    }

    pub fn sampling(&self) -> SamplingParams {
        SamplingParams {
            temperature: self.temperature,
            top_p: self.top_p,
            max_tokens: self.max_completion,
        }
    }
}

/// `(r - mean) / std` with the population std; all zeros when std < guard.
pub fn group_advantages(rewards: &[f64], guard: f64) -> Result<Vec<f64>, GrpoError> {
    if rewards.len() < 2 {
        return Err(GrpoError::GroupTooSmall(rewards.len()));
    }
    let n = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / n;
    let std = (rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n).sqrt();
    if std < guard {
        return Ok(vec![0.0; rewards.len()]);
    }
    Ok(rewards.iter().map(|r| (r - mean) / std).collect())
}

/// `min(r A, clip(r, 1-eps, 1+eps) A)`.
pub fn clipped_term(ratio: f64, advantage: f64, epsilon: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - epsilon, 1.0 + epsilon);
    (ratio * advantage).min(clipped * advantage)
}

/// `exp(d) - d - 1` with `d = ref_logprob - policy_logprob`; never negative.
pub fn kl_estimate(policy_logprob: f64, ref_logprob: f64) -> f64 {
    let d = ref_logprob - policy_logprob;
    d.exp_m1() - d
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingParams {
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub text: String,
    pub token_logprobs: Vec<f64>,
}

impl Sample {
    pub fn logprob(&self) -> f64 {
        self.token_logprobs.iter().sum()
    }
}

/// One sample's share of the update: the derivative of the step loss with
/// respect to that completion's log-probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateSample {
    pub item_id: String,
    pub completion: String,
    pub coefficient: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyUpdate {
    pub samples: Vec<UpdateSample>,
    pub step_size: f64,
}

pub trait Policy: Send + Sync {
    fn name(&self) -> &str;

    fn sample(&self, item: &QaItem, params: &SamplingParams, rng: &mut dyn RngCore) -> Result<Sample, GrpoError>;

    /// Total log-probability of `completion` for the item's prompt.
    fn logprob(&self, item: &QaItem, completion: &str) -> Result<f64, GrpoError>;

    fn updatable(&self) -> bool;

    /// Gradient-descent step on the loss given per-sample coefficients.
    fn apply_update(&mut self, update: &PolicyUpdate) -> Result<(), GrpoError>;

    fn frozen_copy(&self) -> Result<Box<dyn Policy>, GrpoError>;

    /// Which configured step size this policy consumes.
    fn step_size(&self, cfg: &GrpoConfig) -> f64 {
        cfg.learning_rate
    }

    /// Probability of each option under the sampling distribution, when the
    /// policy can say.
    fn answer_distribution(&self, _item: &QaItem, _params: &SamplingParams) -> Option<BTreeMap<OptionLetter, f64>> {
        None
    }
}

/// The prompt shown to text policies.
pub fn render_prompt(item: &QaItem) -> String {
    let options = item
        .options
        .iter()
        .map(|(l, t)| format!("{l}. {t}"))
        .collect::<Vec<_>>()
        .join("\n");
    format!(
        "{}\n{options}\nReason step by step inside <think></think>, then give the option letter inside <answer></answer>.",
        item.question
    )
}

fn softmax(logits: &[f64; 4], temperature: f64) -> [f64; 4] {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = logits.map(|z| ((z - max) / temperature).exp());
    let sum: f64 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= sum);
    out
}

/// Temperature softmax restricted to the smallest top-probability set whose
/// mass reaches `top_p`, renormalized.
fn nucleus(logits: &[f64; 4], temperature: f64, top_p: f64) -> [f64; 4] {
    let probs = softmax(logits, temperature);
    let mut order = [0, 1, 2, 3];
    order.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));
    let mut kept = [0.0; 4];
    let mut mass = 0.0;
    for &i in &order {
        kept[i] = probs[i];
        mass += probs[i];
        if mass >= top_p {
            break;
        }
    }
    kept.map(|p| p / mass)
}

/// Option distribution per prompt with a fixed reasoning template: the trace
/// is the item's path walk-through and only the answer letter is sampled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularToyPolicy {
    logits: BTreeMap<String, [f64; 4]>,
}

impl Default for TabularToyPolicy {
    fn default() -> Self {
        Self::new()
    }
}

impl TabularToyPolicy {
    /// Uniform over options for every prompt.
    pub fn new() -> Self {
        TabularToyPolicy {
            logits: BTreeMap::new(),
        }
    }

    pub fn logits(&self, item_id: &str) -> [f64; 4] {
        self.logits.get(item_id).copied().unwrap_or([0.0; 4])
    }

    /// Model distribution (temperature 1) over options.
    pub fn probabilities(&self, item_id: &str) -> [f64; 4] {
        softmax(&self.logits(item_id), 1.0)
    }

    pub fn completion_for(item: &QaItem, letter: OptionLetter) -> String {
        let trace = if item.cot_trace.is_empty() {
            item.path
                .iter()
                .map(|s| format!("{} {} {}.", s.head, s.relation.gloss(), s.tail))
                .collect::<Vec<_>>()
                .join(" ")
        } else {
            item.cot_trace.clone()
        };
        format!("<think>\n{trace}\n</think>\n<answer>{letter}</answer>")
    }

    fn letter_index(letter: OptionLetter) -> usize {
        OptionLetter::ALL
            .iter()
            .position(|&l| l == letter)
            .expect("letter in ALL")
    }
}

impl Policy for TabularToyPolicy {
    fn name(&self) -> &str {
        "tabular-toy"
    }

    fn sample(&self, item: &QaItem, params: &SamplingParams, rng: &mut dyn RngCore) -> Result<Sample, GrpoError> {
        let probs = nucleus(&self.logits(&item.id), params.temperature, params.top_p);
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut pick = 3;
        for (i, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                pick = i;
                break;
            }
        }
        while probs[pick] == 0.0 {
            pick -= 1;
        }
        let letter = OptionLetter::ALL[pick];
        let text = Self::completion_for(item, letter);
        let tokens: Vec<&str> = text.split_whitespace().collect();
        if tokens.len() > params.max_tokens {
            return Ok(Sample {
                text: tokens[..params.max_tokens].join(" "),
                token_logprobs: vec![0.0; params.max_tokens],
            });
        }
        let mut token_logprobs = vec![0.0; tokens.len()];
        *token_logprobs.last_mut().expect("template is nonempty") = self.probabilities(&item.id)[pick].ln();
        Ok(Sample { text, token_logprobs })
    }

    /// Log-probability of the answer letter; the trace is deterministic.
    /// Text the template cannot produce has probability zero.
    fn logprob(&self, item: &QaItem, completion: &str) -> Result<f64, GrpoError> {
        let Some(letter) = parse_tagged_completion(completion).answer else {
            // A truncated sample is a prefix of the fixed trace.
            let template = Self::completion_for(item, OptionLetter::A);
            let prefix: Vec<&str> = template.split_whitespace().collect();
            let tokens: Vec<&str> = completion.split_whitespace().collect();
            let is_prefix = tokens.len() < prefix.len() && prefix.starts_with(&tokens);
            return Ok(if is_prefix { 0.0 } else { f64::NEG_INFINITY });
        };
        if completion != Self::completion_for(item, letter) {
            return Ok(f64::NEG_INFINITY);
        }
        Ok(self.probabilities(&item.id)[Self::letter_index(letter)].ln())
    }

    fn updatable(&self) -> bool {
        true
    }

    /// `z -= step * coefficient * (onehot(letter) - softmax(z))` per sample,
    /// accumulated against the pre-update logits.
    fn apply_update(&mut self, update: &PolicyUpdate) -> Result<(), GrpoError> {
        let mut deltas: BTreeMap<&str, [f64; 4]> = BTreeMap::new();
        for s in update.samples.iter().filter(|s| s.coefficient != 0.0) {
            let Some(letter) = parse_tagged_completion(&s.completion).answer else {
                continue;
            };
            let probs = self.probabilities(&s.item_id);
            let delta = deltas.entry(&s.item_id).or_insert([0.0; 4]);
            for (i, d) in delta.iter_mut().enumerate() {
                let onehot = if i == Self::letter_index(letter) { 1.0 } else { 0.0 };
                *d -= update.step_size * s.coefficient * (onehot - probs[i]);
            }
        }
        for (id, delta) in deltas {
            let logits = self.logits.entry(id.to_string()).or_insert([0.0; 4]);
            for (z, d) in logits.iter_mut().zip(delta) {
                *z += d;
            }
        }
        Ok(())
    }

    fn frozen_copy(&self) -> Result<Box<dyn Policy>, GrpoError> {
        Ok(Box::new(self.clone()))
    }

    fn step_size(&self, cfg: &GrpoConfig) -> f64 {
        cfg.toy_step_size
    }

    fn answer_distribution(&self, item: &QaItem, params: &SamplingParams) -> Option<BTreeMap<OptionLetter, f64>> {
        let probs = nucleus(&self.logits(&item.id), params.temperature, params.top_p);
        Some(OptionLetter::ALL.into_iter().zip(probs).collect())
    }
}

/// A recorded completion and the log-probability the sampler reported.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordedSample {
    pub item_id: String,
    pub completion: String,
    pub logprob: f64,
}

/// Replays recorded samples per prompt, cycling when exhausted.
#[derive(Debug)]
pub struct RecordedPolicy {
    samples: HashMap<String, Vec<RecordedSample>>,
    cursor: Mutex<HashMap<String, usize>>,
}

impl RecordedPolicy {
    pub fn new(records: impl IntoIterator<Item = RecordedSample>) -> Self {
        let mut samples: HashMap<String, Vec<RecordedSample>> = HashMap::new();
        for r in records {
            samples.entry(r.item_id.clone()).or_default().push(r);
        }
        RecordedPolicy {
            samples,
            cursor: Mutex::new(HashMap::new()),
        }
    }

    fn unavailable(message: String) -> GrpoError {
        GrpoError::PolicyUnavailable {
            policy: "recorded".into(),
            message,
        }
    }
}

impl Policy for RecordedPolicy {
    fn name(&self) -> &str {
        "recorded"
    }

    fn sample(&self, item: &QaItem, params: &SamplingParams, _rng: &mut dyn RngCore) -> Result<Sample, GrpoError> {
        let list = self
            .samples
            .get(&item.id)
            .ok_or_else(|| Self::unavailable(format!("no transcript for {}", item.id)))?;
        let mut cursor = self.cursor.lock().expect("cursor lock");
        let pos = cursor.entry(item.id.clone()).or_insert(0);
        let rec = &list[*pos % list.len()];
        *pos += 1;
        let text: String = rec
            .completion
            .split_whitespace()
            .take(params.max_tokens)
            .collect::<Vec<_>>()
            .join(" ");
        let text = if text.split_whitespace().count() == rec.completion.split_whitespace().count() {
            rec.completion.clone()
        } else {
            text
        };
        Ok(Sample {
            text,
            token_logprobs: vec![rec.logprob],
        })
    }

    fn logprob(&self, item: &QaItem, completion: &str) -> Result<f64, GrpoError> {
        self.samples
            .get(&item.id)
            .and_then(|l| l.iter().find(|r| r.completion == completion))
            .map(|r| r.logprob)
            .ok_or_else(|| Self::unavailable(format!("completion for {} not in transcript", item.id)))
    }

    fn updatable(&self) -> bool {
        false
    }

    fn apply_update(&mut self, _update: &PolicyUpdate) -> Result<(), GrpoError> {
        Err(GrpoError::UpdateUnsupported("recorded".into()))
    }

    fn frozen_copy(&self) -> Result<Box<dyn Policy>, GrpoError> {
        Ok(Box::new(RecordedPolicy::new(self.samples.values().flatten().cloned())))
    }
}

/// Policy served over HTTP: `POST {base}/sample` and `POST {base}/logprob`.
/// Updates are not supported; use it to score batches offline.
pub struct RemotePolicy {
    base_url: String,
    http: reqwest::blocking::Client,
}

#[derive(Deserialize)]
struct LogprobResponse {
    logprob: f64,
}

impl RemotePolicy {
    pub fn new(base_url: impl Into<String>, timeout_secs: u64) -> Result<Self, GrpoError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(timeout_secs))
            .build()
            .map_err(|e| GrpoError::PolicyUnavailable {
                policy: "remote".into(),
                message: e.to_string(),
            })?;
        Ok(RemotePolicy {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            http,
        })
    }

    fn post<T: serde::de::DeserializeOwned>(&self, route: &str, body: serde_json::Value) -> Result<T, GrpoError> {
        let fail = |message: String| GrpoError::PolicyUnavailable {
            policy: "remote".into(),
            message,
        };
        let response = self
            .http
            .post(format!("{}/{route}", self.base_url))
            .json(&body)
            .send()
            .map_err(|e| fail(e.to_string()))?;
        if !response.status().is_success() {
            return Err(fail(format!("HTTP {}", response.status())));
        }
        response.json().map_err(|e| fail(e.to_string()))
    }
}

impl Policy for RemotePolicy {
    fn name(&self) -> &str {
        "remote"
    }

    fn sample(&self, item: &QaItem, params: &SamplingParams, rng: &mut dyn RngCore) -> Result<Sample, GrpoError> {
        self.post(
            "sample",
            serde_json::json!({
                "prompt": render_prompt(item),
                "temperature": params.temperature,
                "top_p": params.top_p,
                "max_tokens": params.max_tokens,
                "seed": rng.next_u64(),
            }),
        )
    }

    fn logprob(&self, item: &QaItem, completion: &str) -> Result<f64, GrpoError> {
        let r: LogprobResponse = self.post(
            "logprob",
            serde_json::json!({"prompt": render_prompt(item), "completion": completion}),
        )?;
        Ok(r.logprob)
    }

    fn updatable(&self) -> bool {
        false
    }

    fn apply_update(&mut self, _update: &PolicyUpdate) -> Result<(), GrpoError> {
        Err(GrpoError::UpdateUnsupported("remote".into()))
    }

    fn frozen_copy(&self) -> Result<Box<dyn Policy>, GrpoError> {
        Err(GrpoError::UpdateUnsupported("remote".into()))
    }
}

/// Maps an item and a parsed completion to a reward.
pub type RewardFn<'a> = dyn Fn(&QaItem, &Completion) -> RewardBreakdown + Sync + 'a;

/// The standard correctness-plus-path reward.
pub fn path_reward(cfg: RewardConfig) -> impl Fn(&QaItem, &Completion) -> RewardBreakdown + Sync {
    move |item, completion| score_completion(completion, item, &cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupBatch {
    pub item_id: String,
    pub completions: Vec<String>,
    pub rewards: Vec<RewardBreakdown>,
    pub advantages: Vec<f64>,
    pub ratios: Vec<f64>,
    pub kl_estimates: Vec<f64>,
    pub sample_logprobs: Vec<f64>,
    /// This group's own `-mean(clipped) + beta * mean(kl)`.
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub groups: Vec<GroupBatch>,
    pub loss: f64,
    pub clip_fraction: f64,
}

/// One optimizer step over a batch of prompts.
pub fn grpo_step(
    batch: &[&QaItem],
    policy: &mut dyn Policy,
    ref_policy: &dyn Policy,
    reward: &RewardFn<'_>,
    cfg: &GrpoConfig,
    rng: &mut dyn RngCore,
) -> Result<StepOutcome, GrpoError> {
    cfg.validate()?;
    let params = cfg.sampling();
    let mut groups = Vec::with_capacity(batch.len());
    let mut clipped_sum = 0.0;
    let mut kl_sum = 0.0;
    let mut clipped_count = 0usize;
    let mut samples = Vec::new();
    for item in batch {
        let drawn = (0..cfg.n_generations)
            .map(|_| policy.sample(item, &params, rng))
            .collect::<Result<Vec<_>, _>>()?;
        let rewards: Vec<RewardBreakdown> = drawn
            .iter()
            .map(|s| reward(item, &parse_tagged_completion(&s.text)))
            .collect();
        let totals: Vec<f64> = rewards.iter().map(|r| r.total).collect();
        let advantages = group_advantages(&totals, cfg.advantage_guard)?;
        let mut ratios = Vec::with_capacity(drawn.len());
        let mut kls = Vec::with_capacity(drawn.len());
        let mut group_clipped = 0.0;
        for (s, &adv) in drawn.iter().zip(&advantages) {
            let old_lp = s.logprob();
            let lp = policy.logprob(item, &s.text)?;
            let ref_lp = ref_policy.logprob(item, &s.text)?;
            let ratio = (lp - old_lp).exp();
            let kl = kl_estimate(lp, ref_lp);
            let term = clipped_term(ratio, adv, cfg.clip_epsilon);
            let unclipped_active = ratio * adv <= term;
            if !unclipped_active {
                clipped_count += 1;
            }
            // d(loss)/d(logprob), before the 1/M average.
            let d_surrogate = if unclipped_active { -adv * ratio } else { 0.0 };
            let d_kl = -cfg.kl_beta * (ref_lp - lp).exp_m1();
            samples.push(UpdateSample {
                item_id: item.id.clone(),
                completion: s.text.clone(),
                coefficient: d_surrogate + d_kl,
            });
            group_clipped += term;
            ratios.push(ratio);
            kls.push(kl);
        }
        let n = drawn.len() as f64;
        let group_kl: f64 = kls.iter().sum();
        clipped_sum += group_clipped;
        kl_sum += group_kl;
        groups.push(GroupBatch {
            item_id: item.id.clone(),
            sample_logprobs: drawn.iter().map(Sample::logprob).collect(),
            completions: drawn.into_iter().map(|s| s.text).collect(),
            rewards,
            advantages,
            ratios,
            kl_estimates: kls,
            loss: -group_clipped / n + cfg.kl_beta * group_kl / n,
        });
    }
    let m = samples.len().max(1) as f64;
    for s in &mut samples {
        s.coefficient /= m;
    }
    if policy.updatable() && !samples.is_empty() {
        let step_size = policy.step_size(cfg);
        policy.apply_update(&PolicyUpdate { samples, step_size })?;
    }
    Ok(StepOutcome {
        groups,
        loss: -clipped_sum / m + cfg.kl_beta * kl_sum / m,
        clip_fraction: clipped_count as f64 / m,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub epoch: usize,
    pub prompts: usize,
    pub mean_reward: f64,
    pub mean_abs_advantage: f64,
    pub clip_fraction: f64,
    pub mean_kl: f64,
    pub loss: f64,
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainStats {
    pub initial_accuracy: Option<f64>,
    pub steps: Vec<StepRecord>,
}

impl TrainStats {
    pub fn final_accuracy(&self) -> Option<f64> {
        self.steps.last().map_or(self.initial_accuracy, |s| s.accuracy)
    }

    /// One JSON object per step.
    pub fn to_jsonl(&self) -> String {
        self.steps
            .iter()
            .map(|s| serde_json::to_string(s).expect("records serialize") + "\n")
            .collect()
    }
}

/// Mean probability of the gold option under the policy's sampling
/// distribution, when the policy exposes one.
pub fn policy_accuracy(policy: &dyn Policy, items: &[QaItem], params: &SamplingParams) -> Option<f64> {
    let mut total = 0.0;
    for item in items {
        total += policy.answer_distribution(item, params)?.get(&item.gold).copied()?;
    }
    Some(total / items.len().max(1) as f64)
}

/// Full training loop; `observer` sees every step (for transcripts).
pub fn run_training_observed(
    items: &[QaItem],
    policy: &mut dyn Policy,
    reward: &RewardFn<'_>,
    cfg: &GrpoConfig,
    observer: &mut dyn FnMut(&StepRecord, &StepOutcome),
) -> Result<TrainStats, GrpoError> {
    cfg.validate()?;
    if items.is_empty() {
        return Err(GrpoError::NoItems);
    }
    if !policy.updatable() {
        return Err(GrpoError::UpdateUnsupported(policy.name().to_string()));
    }
    let reference = policy.frozen_copy()?;
    let params = cfg.sampling();
    let mut rng = rng_for(cfg.seed, "grpo");
    let mut stats = TrainStats {
        initial_accuracy: policy_accuracy(policy, items, &params),
        steps: Vec::new(),
    };
    let mut order: Vec<usize> = (0..items.len()).collect();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.grad_accum) {
            let batch: Vec<&QaItem> = chunk.iter().map(|&i| &items[i]).collect();
            let outcome = grpo_step(&batch, policy, reference.as_ref(), reward, cfg, &mut rng)?;
            let n = outcome.groups.iter().map(|g| g.rewards.len()).sum::<usize>().max(1) as f64;
            let sum = |f: &dyn Fn(&GroupBatch) -> f64| outcome.groups.iter().map(f).sum::<f64>() / n;
            let record = StepRecord {
                step: stats.steps.len(),
                epoch,
                prompts: batch.len(),
                mean_reward: sum(&|g| g.rewards.iter().map(|r| r.total).sum()),
                mean_abs_advantage: sum(&|g| g.advantages.iter().map(|a| a.abs()).sum()),
                clip_fraction: outcome.clip_fraction,
                mean_kl: sum(&|g| g.kl_estimates.iter().sum()),
                loss: outcome.loss,
                accuracy: policy_accuracy(policy, items, &params),
            };
            observer(&record, &outcome);
            stats.steps.push(record);
        }
    }
    Ok(stats)
}

pub fn run_training(
    items: &[QaItem],
    policy: &mut dyn Policy,
    reward: &RewardFn<'_>,
    cfg: &GrpoConfig,
) -> Result<TrainStats, GrpoError> {
    run_training_observed(items, policy, reward, cfg, &mut |_, _| {})
}

/// Number of optimizer steps `run_training` performs.
pub fn planned_steps(items: usize, cfg: &GrpoConfig) -> usize {
    cfg.epochs * items.div_ceil(cfg.grad_accum.max(1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reward::fixtures::nigral_item;
    use crate::synthetic::synthetic_rl_items;

    #[test]
    fn advantages() {
        assert_eq!(
            group_advantages(&[1.0, 1.0, -1.0, -1.0], 1e-6).unwrap(),
            vec![1.0, 1.0, -1.0, -1.0]
        );
        assert_eq!(group_advantages(&[0.5; 4], 1e-6).unwrap(), vec![0.0; 4]);
        assert_eq!(group_advantages(&[2.0, 0.0], 1e-6).unwrap(), vec![1.0, -1.0]);
        assert_eq!(group_advantages(&[1.0], 1e-6), Err(GrpoError::GroupTooSmall(1)));
    }

    #[test]
    fn clipping() {
        assert_eq!(clipped_term(1.0, 2.0, 0.2), 2.0);
        assert_eq!(clipped_term(1.5, 1.0, 0.2), 1.2);
        assert_eq!(clipped_term(0.5, -1.0, 0.2), -0.8);
    }

    #[test]
    fn kl() {
        assert_eq!(kl_estimate(0.0, 0.0), 0.0);
        assert!((kl_estimate(-1.0, 0.0) - (std::f64::consts::E - 2.0)).abs() < 1e-12);
        for i in -50..=50 {
            assert!(kl_estimate(0.0, i as f64 / 10.0) >= 0.0);
        }
    }

    #[test]
    fn nucleus_truncates() {
        let p = nucleus(&[2.0, 0.0, 0.0, 0.0], 1.0, 0.5);
        assert_eq!(p, [1.0, 0.0, 0.0, 0.0]);
        let p = nucleus(&[0.0; 4], 0.6, 0.9);
        assert_eq!(p, [0.25; 4]);
    }

    #[test]
    fn toy_policy_samples_its_own_template() {
        let item = nigral_item();
        let policy = TabularToyPolicy::new();
        let mut rng = rng_for(1, "t");
        let params = GrpoConfig::default().sampling();
        for _ in 0..20 {
            let s = policy.sample(&item, &params, &mut rng).unwrap();
            assert!(s.logprob().is_finite());
            assert_eq!(policy.logprob(&item, &s.text).unwrap(), s.logprob());
            assert!(s.text.split_whitespace().count() <= params.max_tokens);
        }
        let short = SamplingParams {
            max_tokens: 3,
            ..params
        };
        let cut = policy.sample(&item, &short, &mut rng).unwrap();
        assert_eq!(cut.text.split_whitespace().count(), 3);
        assert_eq!(policy.logprob(&item, &cut.text).unwrap(), 0.0);
        assert_eq!(policy.logprob(&item, "<answer>B</answer>").unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn first_step_has_unit_ratios_and_zero_kl() {
        let item = nigral_item();
        let mut policy = TabularToyPolicy::new();
        let reference = policy.clone();
        let cfg = GrpoConfig::default();
        let reward = path_reward(RewardConfig::default());
        let out = grpo_step(&[&item], &mut policy, &reference, &reward, &cfg, &mut rng_for(2, "s")).unwrap();
        let g = &out.groups[0];
        assert!(g.ratios.iter().all(|&r| r == 1.0));
        assert!(g.kl_estimates.iter().all(|&k| k == 0.0));
        assert_eq!(out.clip_fraction, 0.0);
    }

    #[test]
    fn unique_correct_sample_gets_unique_positive_advantage() {
        let item = nigral_item();
        let reward = path_reward(RewardConfig::default());
        let totals: Vec<f64> = [OptionLetter::B, OptionLetter::A, OptionLetter::C, OptionLetter::D]
            .into_iter()
            .map(|l| {
                reward(
                    &item,
                    &parse_tagged_completion(&TabularToyPolicy::completion_for(&item, l)),
                )
                .total
            })
            .collect();
        assert_eq!(totals, vec![1.8, -1.0, -1.0, -1.0]);
        let adv = group_advantages(&totals, 1e-6).unwrap();
        assert!(adv[0] > 0.0 && adv[1..].iter().all(|&a| a < 0.0));
    }

    #[test]
    fn constant_rewards_leave_policy_unchanged() {
        let items = synthetic_rl_items(20, 4);
        let mut policy = TabularToyPolicy::new();
        let before = policy.clone();
        let constant = |_: &QaItem, _: &Completion| RewardBreakdown {
            r_correct: 0.5,
            length_penalty: 0.0,
            r_path: 0.0,
            total: 0.5,
            coverage: 0.0,
            hits: 0,
            rho: 1.0,
            gate_open: false,
            correct: false,
            answer: None,
        };
        let stats = run_training(&items, &mut policy, &constant, &GrpoConfig::default()).unwrap();
        assert_eq!(policy, before);
        for item in &items {
            assert_eq!(policy.probabilities(&item.id), [0.25; 4]);
        }
        assert!(stats.steps.iter().all(|s| s.mean_abs_advantage == 0.0 && s.loss == 0.0));
    }

    #[test]
    fn training_is_seeded_and_counts_steps() {
        let items = synthetic_rl_items(50, 2);
        let cfg = GrpoConfig {
            seed: 9,
            ..GrpoConfig::default()
        };
        let reward = path_reward(RewardConfig::default());
        let mut a = TabularToyPolicy::new();
        let mut b = TabularToyPolicy::new();
        let sa = run_training(&items, &mut a, &reward, &cfg).unwrap();
        let sb = run_training(&items, &mut b, &reward, &cfg).unwrap();
        assert_eq!(sa, sb);
        assert_eq!(sa.steps.len(), planned_steps(50, &cfg));
        assert_eq!(sa.steps.len(), 12);
        assert_eq!(sa.initial_accuracy, Some(0.25));
        assert!(sa.final_accuracy().unwrap() > 0.25);
    }

    #[test]
    fn zero_epochs_is_a_no_op() {
        let items = synthetic_rl_items(10, 2);
        let cfg = GrpoConfig {
            epochs: 0,
            ..GrpoConfig::default()
        };
        let mut policy = TabularToyPolicy::new();
        let stats = run_training(&items, &mut policy, &path_reward(RewardConfig::default()), &cfg).unwrap();
        assert!(stats.steps.is_empty());
        assert_eq!(policy, TabularToyPolicy::new());
    }

    #[test]
    fn recorded_policy_replays_and_refuses_updates() {
        let item = nigral_item();
        let text = TabularToyPolicy::completion_for(&item, OptionLetter::B);
        let mut rec = RecordedPolicy::new([RecordedSample {
            item_id: item.id.clone(),
            completion: text.clone(),
            logprob: -0.5,
        }]);
        let params = GrpoConfig::default().sampling();
        let s = rec.sample(&item, &params, &mut rng_for(0, "r")).unwrap();
        assert_eq!((s.text.as_str(), s.logprob()), (text.as_str(), -0.5));
        assert_eq!(rec.logprob(&item, &text).unwrap(), -0.5);
        assert!(matches!(
            rec.apply_update(&PolicyUpdate {
                samples: vec![],
                step_size: 1.0
            }),
            Err(GrpoError::UpdateUnsupported(_))
        ));
        let items = [item];
        assert!(matches!(
            run_training(
                &items,
                &mut rec,
                &path_reward(RewardConfig::default()),
                &GrpoConfig::default()
            ),
            Err(GrpoError::UpdateUnsupported(_))
        ));
    }

    #[test]
    fn remote_policy_speaks_json() {
        let item = nigral_item();
        let (url, served) = crate::client::testing::serve(vec![
            (
                200,
                r#"{"text": "<answer>B</answer>", "token_logprobs": [-0.1, -0.2]}"#.into(),
            ),
            (200, r#"{"logprob": -0.3}"#.into()),
            (503, "{}".into()),
        ]);
        let remote = RemotePolicy::new(url, 5).unwrap();
        let params = GrpoConfig::default().sampling();
        let s = remote.sample(&item, &params, &mut rng_for(0, "x")).unwrap();
        assert!((s.logprob() + 0.3).abs() < 1e-12);
        assert_eq!(remote.logprob(&item, &s.text).unwrap(), -0.3);
        assert!(matches!(
            remote.logprob(&item, "x"),
            Err(GrpoError::PolicyUnavailable { .. })
        ));
        assert_eq!(served.load(std::sync::atomic::Ordering::SeqCst), 3);
        assert!(!remote.updatable());
    }
}
