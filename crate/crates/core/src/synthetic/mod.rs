//! Deterministic generators for the two synthetic tasks: a VQA-style task
//! over rendered shape scenes and a three-modality incongruence
//! ("sarcasm") task with a `true`/`false` verbalizer.
//!
//! Every sample carries enough of its generator record that the answer can
//! be recomputed independently; see [`oracle`].

pub mod oracle;
mod qa;
mod scene;
mod splits;
mod trimodal;

pub use qa::{generate_qa, QASample, QuestionType};
pub use scene::{generate_scene, render, Color, Object, Scene, SceneSpec, Shape, GRID};
pub use splits::{
    build_splits, build_trimodal_splits, build_vqa_splits, histogram, AnswerHistogram, Answered,
    SplitSizes, Splits, TaskSpec, TaskSplits,
};
pub use trimodal::{
    generate_trimodal, TrimodalSample, AUDIO_WINDOWS, FRAMES, NEGATIVE_UTTERANCES,
    POSITIVE_UTTERANCES, WINDOW_LEN,
};

/// A text-only template instance used to pretrain the language model.
#[derive(Debug, Clone, PartialEq)]
pub struct TextSample {
    pub input: Vec<String>,
    pub answer: Vec<String>,
}

/// Closed content vocabulary of both tasks, in a fixed order.
pub fn lexicon() -> Vec<&'static str> {
    let mut words = vec![
        "nothing", ".", "?", "how", "many", "is", "there", "a", "what", "color", "the",
    ];
    words.extend(Shape::ALL.iter().map(|s| s.word()));
    words.extend(Color::ALL.iter().map(|c| c.word()));
    words.extend(["0", "1", "2", "3", "4", "5", "6", "7", "8"]);
    words.extend([
        "yes",
        "no",
        "tone",
        "cheerful",
        "gloomy",
        "sarcastic",
        "true",
        "false",
    ]);
    for u in POSITIVE_UTTERANCES.iter().chain(NEGATIVE_UTTERANCES) {
        for w in u.split_whitespace() {
            if !words.contains(&w) {
                words.push(w);
            }
        }
    }
    words
}

/// Text rendering of a scene's object list, in cell order.
pub fn scene_description(scene: &Scene) -> Vec<String> {
    if scene.objects.is_empty() {
        return vec!["nothing".into()];
    }
    let mut objects = scene.objects.clone();
    objects.sort_by_key(|o| o.cell);
    objects
        .iter()
        .flat_map(|o| [o.color.word().to_string(), o.shape.word().to_string()])
        .collect()
}

/// Suffix appended to the utterance in every trimodal input.
pub fn trimodal_suffix() -> Vec<String> {
    vec!["sarcastic".into(), "?".into()]
}

/// Text-only form of a QA sample: the scene described in words, then the
/// question.
pub fn qa_text_sample(sample: &QASample) -> TextSample {
    let mut input = scene_description(&sample.scene);
    input.push(".".into());
    input.extend(sample.question.iter().cloned());
    TextSample {
        input,
        answer: sample.answer.clone(),
    }
}

/// Text-only form of a trimodal sample: the tone named in words, then the
/// utterance.
pub fn trimodal_text_sample(sample: &TrimodalSample) -> TextSample {
    let tone = if sample.tone_positive {
        "cheerful"
    } else {
        "gloomy"
    };
    let mut input = vec!["tone".to_string(), tone.to_string(), ".".to_string()];
    input.extend(sample.utterance.iter().cloned());
    input.extend(trimodal_suffix());
    TextSample {
        input,
        answer: vec![sample.answer().to_string()],
    }
}

/// Text-only corpus for language-model pretraining: three QA samples for
/// every trimodal one. Distinct `stream` values give disjoint sample seeds.
pub fn text_corpus(
    spec: &SceneSpec,
    n: usize,
    seed: u64,
    stream: u32,
) -> crate::Result<Vec<TextSample>> {
    (0..n as u32)
        .map(|i| {
            let s = derive_seed(seed, stream, i);
            if i % 4 == 3 {
                Ok(trimodal_text_sample(&generate_trimodal(s)))
            } else {
                let scene = generate_scene(s, spec)?;
                Ok(qa_text_sample(&generate_qa(&scene, splitmix64(s))))
            }
        })
        .collect()
}

pub(crate) fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-sample seed. Injective in `(stream, index)` for a fixed base, so
/// distinct streams never share a seed.
pub fn derive_seed(base: u64, stream: u32, index: u32) -> u64 {
    let key = ((stream as u64) << 32) | index as u64;
    splitmix64(base.wrapping_add(splitmix64(key)))
}
