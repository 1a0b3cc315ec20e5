//! Hop-stratified accuracy, degradation rate and per-step error fitting.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curriculum::OptionLetter;
use crate::reward::parse_tagged_completion;

/// Hop levels reported by default.
pub const REPORTED_HOPS: [usize; 3] = [3, 4, 5];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("accuracy for {0}-hop is required")]
    MissingHop(usize),
    #[error("accuracies must be positive, got {value} at {hops}-hop")]
    NonPositive { hops: usize, value: f64 },
}

/// The answer letter inside the `<answer>` tags, if any.
pub fn extract_answer(raw: &str) -> Option<OptionLetter> {
    parse_tagged_completion(raw).answer
}

/// One line of evaluation input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalInput {
    pub item_id: String,
    pub hops: usize,
    pub gold: OptionLetter,
    pub raw_completion: String,
}

impl EvalInput {
    /// A response-log line for a human choice, in the same shape as model output.
    pub fn from_choice(item: &crate::curriculum::QaItem, chosen: OptionLetter) -> Self {
        EvalInput {
            item_id: item.id.clone(),
            hops: item.hops,
            gold: item.gold,
            raw_completion: format!("<answer>{chosen}</answer>"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub item_id: String,
    pub hops: usize,
    pub gold: OptionLetter,
    pub predicted: Option<OptionLetter>,
    pub correct: bool,
}

impl EvalRecord {
    pub fn new(item_id: impl Into<String>, hops: usize, gold: OptionLetter, predicted: Option<OptionLetter>) -> Self {
        EvalRecord {
            item_id: item_id.into(),
            hops,
            gold,
            predicted,
            correct: predicted == Some(gold),
        }
    }
}

impl From<&EvalInput> for EvalRecord {
    fn from(input: &EvalInput) -> Self {
        EvalRecord::new(
            &input.item_id,
            input.hops,
            input.gold,
            extract_answer(&input.raw_completion),
        )
    }
}

/// `(acc3 - acc5) / (5 - 3)`, in points per hop.
pub fn degradation_rate(acc3: f64, acc5: f64) -> f64 {
    (acc3 - acc5) / 2.0
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    /// `p = 1 - (acc5 / acc3)^(1/2)`.
    #[default]
    Endpoint,
    /// Least squares on `ln(acc_k / acc3) = (k - 3) ln(1 - p)` over k = 4, 5.
    LeastSquares,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerStepFit {
    pub p: f64,
    /// Accuracy grew with depth; `p` is reported as 0.
    pub degenerate: bool,
}

/// Per-step error `p` of the model `acc(k) = acc(3) (1 - p)^(k - 3)`.
pub fn fit_per_step_error(acc_by_hop: &BTreeMap<usize, f64>, method: FitMethod) -> Result<PerStepFit, EvalError> {
    let get = |k: usize| -> Result<f64, EvalError> {
        let v = *acc_by_hop.get(&k).ok_or(EvalError::MissingHop(k))?;
        if v > 0.0 {
            Ok(v)
        } else {
            Err(EvalError::NonPositive { hops: k, value: v })
        }
    };
    let acc3 = get(3)?;
    let p = match method {
        FitMethod::Endpoint => 1.0 - (get(5)? / acc3).sqrt(),
        FitMethod::LeastSquares => {
            let mut sxy = 0.0;
            let mut sxx = 0.0;
            for k in [4, 5] {
                let x = (k - 3) as f64;
                sxy += x * (get(k)? / acc3).ln();
                sxx += x * x;
            }
            1.0 - (sxy / sxx).exp()
        }
    };
    if p < 0.0 {
        return Ok(PerStepFit {
            p: 0.0,
            degenerate: true,
        });
    }
    Ok(PerStepFit { p, degenerate: false })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HopAccuracy {
    pub correct: usize,
    pub total: usize,
    /// Percent.
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_hop: BTreeMap<usize, HopAccuracy>,
    /// Unweighted mean over the strata present.
    pub average: Option<f64>,
    pub delta: Option<f64>,
    pub per_step_error: Option<PerStepFit>,
    pub fit_method: FitMethod,
    /// Requested hop levels with no records.
    pub empty_strata: Vec<usize>,
}

impl EvalReport {
    pub fn accuracy(&self, hops: usize) -> Option<f64> {
        self.per_hop.get(&hops).map(|h| h.accuracy)
    }
}

/// Aggregates records over the requested hop levels. Missing strata are
/// listed rather than treated as errors.
pub fn build_report(records: &[EvalRecord], hops: &[usize], method: FitMethod) -> EvalReport {
    let mut tallies: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for r in records.iter().filter(|r| hops.contains(&r.hops)) {
        let t = tallies.entry(r.hops).or_default();
        t.0 += usize::from(r.correct);
        t.1 += 1;
    }
    let per_hop: BTreeMap<usize, HopAccuracy> = tallies
        .into_iter()
        .map(|(k, (correct, total))| {
            let accuracy = 100.0 * correct as f64 / total as f64;
            (
                k,
                HopAccuracy {
                    correct,
                    total,
                    accuracy,
                },
            )
        })
        .collect();
    report_from_accuracies(per_hop, hops, method)
}

fn report_from_accuracies(per_hop: BTreeMap<usize, HopAccuracy>, hops: &[usize], method: FitMethod) -> EvalReport {
    let mut empty_strata: Vec<usize> = hops.iter().copied().filter(|k| !per_hop.contains_key(k)).collect();
    empty_strata.sort_unstable();
    empty_strata.dedup();
    let average =
        (!per_hop.is_empty()).then(|| per_hop.values().map(|h| h.accuracy).sum::<f64>() / per_hop.len() as f64);
    let acc: BTreeMap<usize, f64> = per_hop.iter().map(|(k, h)| (*k, h.accuracy)).collect();
    let delta = match (acc.get(&3), acc.get(&5)) {
        (Some(a3), Some(a5)) => Some(degradation_rate(*a3, *a5)),
        _ => None,
    };
    EvalReport {
        per_step_error: fit_per_step_error(&acc, method).ok(),
        per_hop,
        average,
        delta,
        fit_method: method,
        empty_strata,
    }
}

/// Markdown table with one row per labelled report.
pub fn markdown_table(rows: &[(&str, &EvalReport)], hops: &[usize]) -> String {
    let mut out = String::from("| Model |");
    for k in hops {
        let _ = write!(out, " {k}-hop Acc (%) |");
    }
    out.push_str(" Avg (%) | Delta (pp/hop) | Per-step error |\n|---|");
    out.push_str(&"---:|".repeat(hops.len() + 3));
    out.push('\n');
    let cell = |v: Option<f64>, digits: usize| v.map_or("n/a".to_string(), |v| format!("{v:.digits$}"));
    for (label, report) in rows {
        let _ = write!(out, "| {label} |");
        for &k in hops {
            let _ = write!(out, " {} |", cell(report.accuracy(k), 1));
        }
        let _ = writeln!(
            out,
            " {} | {} | {} |",
            cell(report.average, 1),
            cell(report.delta, 2),
            cell(report.per_step_error.map(|f| f.p), 4)
        );
    }
    out
}

/// `model,hops,accuracy` series for accuracy-versus-depth plots.
pub fn accuracy_csv(rows: &[(&str, &EvalReport)]) -> String {
    let mut out = String::from("model,hops,accuracy\n");
    for (label, report) in rows {
        for (k, h) in &report.per_hop {
            let _ = writeln!(out, "{label},{k},{:.6}", h.accuracy);
        }
    }
    out
}
