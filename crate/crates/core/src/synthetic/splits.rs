use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::derive_seed;
use super::qa::{generate_qa, QASample};
use super::scene::{generate_scene, SceneSpec};
use super::trimodal::{generate_trimodal, TrimodalSample};
use crate::error::Result;

const TRAIN_STREAM: u32 = 0;
const EVAL_STREAM: u32 = 1;
const QUESTION_STREAM: u32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub train: usize,
    pub eval: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TaskSpec {
    Vqa(SceneSpec),
    Trimodal,
}

/// Counts of answers by question type and by answer string.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerHistogram {
    pub by_type: BTreeMap<String, usize>,
    pub by_answer: BTreeMap<String, usize>,
}

impl AnswerHistogram {
    pub fn add(&mut self, answer_type: &str, answer: &str) {
        *self.by_type.entry(answer_type.to_string()).or_default() += 1;
        *self.by_answer.entry(answer.to_string()).or_default() += 1;
    }

    pub fn total(&self) -> usize {
        self.by_answer.values().sum()
    }

    /// Most frequent answer; ties go to the lexicographically smallest.
    pub fn majority(&self) -> Option<(&str, usize)> {
        let mut best: Option<(&str, usize)> = None;
        for (a, &n) in &self.by_answer {
            if best.is_none_or(|(_, m)| n > m) {
                best = Some((a, n));
            }
        }
        best
    }

    pub fn majority_share(&self) -> f64 {
        match self.majority() {
            Some((_, n)) => n as f64 / self.total() as f64,
            None => 0.0,
        }
    }
}

/// Anything the histogram can bucket.
pub trait Answered {
    fn answer_type(&self) -> &'static str;
    fn answer_text(&self) -> String;
}

impl Answered for QASample {
    fn answer_type(&self) -> &'static str {
        self.qtype.name()
    }
    fn answer_text(&self) -> String {
        self.answer.join(" ")
    }
}

impl Answered for TrimodalSample {
    fn answer_type(&self) -> &'static str {
        "Sarcasm"
    }
    fn answer_text(&self) -> String {
        self.answer().to_string()
    }
}

pub fn histogram<S: Answered>(samples: &[S]) -> AnswerHistogram {
    let mut h = AnswerHistogram::default();
    for s in samples {
        h.add(s.answer_type(), &s.answer_text());
    }
    h
}

#[derive(Debug, Clone, PartialEq)]
pub struct Splits<S> {
    pub train: Vec<S>,
    pub eval: Vec<S>,
    pub train_histogram: AnswerHistogram,
    pub eval_histogram: AnswerHistogram,
}

impl<S: Answered> Splits<S> {
    fn new(train: Vec<S>, eval: Vec<S>) -> Self {
        Self {
            train_histogram: histogram(&train),
            eval_histogram: histogram(&eval),
            train,
            eval,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TaskSplits {
    Vqa(Splits<QASample>),
    Trimodal(Splits<TrimodalSample>),
}

fn seeds(seed: u64, stream: u32, n: usize) -> impl Iterator<Item = u64> {
    (0..n as u32).map(move |i| derive_seed(seed, stream, i))
}

fn qa_sample(sample_seed: u64, spec: &SceneSpec) -> Result<QASample> {
    let scene = generate_scene(sample_seed, spec)?;
    let mut q = generate_qa(&scene, derive_seed(sample_seed, QUESTION_STREAM, 0));
    q.seed = sample_seed;
    Ok(q)
}

/// Train and eval samples draw their seeds from separate streams, so the
/// two seed sets are disjoint.
pub fn build_vqa_splits(
    spec: &SceneSpec,
    sizes: SplitSizes,
    seed: u64,
) -> Result<Splits<QASample>> {
    spec.validate()?;
    let train = seeds(seed, TRAIN_STREAM, sizes.train)
        .map(|s| qa_sample(s, spec))
        .collect::<Result<_>>()?;
    let eval = seeds(seed, EVAL_STREAM, sizes.eval)
        .map(|s| qa_sample(s, spec))
        .collect::<Result<_>>()?;
    Ok(Splits::new(train, eval))
}

pub fn build_trimodal_splits(sizes: SplitSizes, seed: u64) -> Splits<TrimodalSample> {
    let train = seeds(seed, TRAIN_STREAM, sizes.train)
        .map(generate_trimodal)
        .collect();
    let eval = seeds(seed, EVAL_STREAM, sizes.eval)
        .map(generate_trimodal)
        .collect();
    Splits::new(train, eval)
}

pub fn build_splits(task: &TaskSpec, sizes: SplitSizes, seed: u64) -> Result<TaskSplits> {
    Ok(match task {
        TaskSpec::Vqa(spec) => TaskSplits::Vqa(build_vqa_splits(spec, sizes, seed)?),
        TaskSpec::Trimodal => TaskSplits::Trimodal(build_trimodal_splits(sizes, seed)),
    })
}
