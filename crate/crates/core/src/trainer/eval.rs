use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::synthetic::QuestionType;
use crate::system::{Example, FusionSystem};

/// Answer type of trimodal samples.
pub const SARCASM: &str = "Sarcasm";
/// Answer treated as the positive class for precision and recall.
pub const POSITIVE_ANSWER: &str = "true";

/// Result of one prediction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub answer_type: &'static str,
    pub correct: bool,
    pub predicted_positive: bool,
    pub gold_positive: bool,
}

impl Outcome {
    pub fn new(ex: &Example, predicted: &str) -> Self {
        Self {
            answer_type: ex.answer_type,
            correct: predicted == ex.answer_text,
            predicted_positive: predicted == POSITIVE_ANSWER,
            gold_positive: ex.answer_text == POSITIVE_ANSWER,
        }
    }
}

/// Scores in percent: per-type accuracy for VQA, or precision, recall and
/// F-score of the positive answer for the trimodal task.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Evaluation {
    Vqa {
        other: f64,
        yes_no: f64,
        number: f64,
        overall: f64,
    },
    Trimodal {
        precision: f64,
        recall: f64,
        f_score: f64,
    },
}

fn percent(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

/// Accuracy per answer type plus "Overall", in percent.
pub fn type_accuracy(outcomes: &[Outcome]) -> BTreeMap<String, f64> {
    let mut counts: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for o in outcomes {
        let c = counts.entry(o.answer_type).or_default();
        c.0 += o.correct as usize;
        c.1 += 1;
    }
    let mut out: BTreeMap<String, f64> = counts
        .iter()
        .map(|(t, &(k, n))| (t.to_string(), percent(k, n)))
        .collect();
    let hits = outcomes.iter().filter(|o| o.correct).count();
    out.insert("Overall".into(), percent(hits, outcomes.len()));
    out
}

impl Evaluation {
    pub fn from_outcomes(outcomes: &[Outcome]) -> Self {
        let trimodal = !outcomes.is_empty() && outcomes.iter().all(|o| o.answer_type == SARCASM);
        if trimodal {
            let tp = outcomes
                .iter()
                .filter(|o| o.predicted_positive && o.gold_positive)
                .count();
            let pp = outcomes.iter().filter(|o| o.predicted_positive).count();
            let gp = outcomes.iter().filter(|o| o.gold_positive).count();
            let (precision, recall) = (percent(tp, pp), percent(tp, gp));
            let f_score = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            return Evaluation::Trimodal {
                precision,
                recall,
                f_score,
            };
        }
        let acc = type_accuracy(outcomes);
        let get = |t: &str| acc.get(t).copied().unwrap_or(0.0);
        Evaluation::Vqa {
            other: get(QuestionType::Other.name()),
            yes_no: get(QuestionType::YesNo.name()),
            number: get(QuestionType::Number.name()),
            overall: get("Overall"),
        }
    }

    /// Column names and values in table order.
    pub fn columns(&self) -> Vec<(&'static str, f64)> {
        match *self {
            Evaluation::Vqa {
                other,
                yes_no,
                number,
                overall,
            } => vec![
                ("Other", other),
                ("Yes/No", yes_no),
                ("Number", number),
                ("Overall", overall),
            ],
            Evaluation::Trimodal {
                precision,
                recall,
                f_score,
            } => vec![
                ("Precision", precision),
                ("Recall", recall),
                ("F-Score", f_score),
            ],
        }
    }

    /// The headline number: Overall accuracy or F-score.
    pub fn headline(&self) -> f64 {
        match *self {
            Evaluation::Vqa { overall, .. } => overall,
            Evaluation::Trimodal { f_score, .. } => f_score,
        }
    }
}

/// Greedy predictions for every example, in order.
pub fn predict_all(system: &FusionSystem, examples: &[Example]) -> Result<Vec<Outcome>> {
    examples
        .par_iter()
        .map(|ex| {
            let ids = system.predict(ex)?;
            let words = system.vocab.decode(&ids);
            Ok(Outcome::new(ex, &words.join(" ")))
        })
        .collect()
}

pub fn evaluate(system: &FusionSystem, examples: &[Example]) -> Result<Evaluation> {
    Ok(Evaluation::from_outcomes(&predict_all(system, examples)?))
}
