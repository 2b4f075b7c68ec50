//! Brute-force answer checkers that share no code with the generators:
//! questions are parsed from their tokens, objects are recovered from
//! pixels, and tones from the waveform spectrum and frame contents.

use std::collections::BTreeMap;

use super::qa::QASample;
use super::trimodal::TrimodalSample;
use crate::encoders::RawImage;

/// `(shape word, color word, cell)` as recovered from a rendered image.
pub type DecodedObject = (&'static str, &'static str, usize);

fn color_word(rgb: [f32; 3]) -> Option<&'static str> {
    match rgb {
        [1.0, 0.0, 0.0] => Some("red"),
        [0.0, 1.0, 0.0] => Some("green"),
        [0.0, 0.0, 1.0] => Some("blue"),
        [1.0, 1.0, 0.0] => Some("yellow"),
        _ => None,
    }
}

/// Reads every 2×2 cell: the lit-pixel count identifies the shape
/// (4 square, 3 triangle, 2 circle) and the pixel colour its colour.
/// Returns `None` for any pixel pattern that is not a valid glyph.
pub fn decode_objects(image: &RawImage) -> Option<Vec<DecodedObject>> {
    let grid = image.height() / 2;
    let mut out = Vec::new();
    for r in 0..grid {
        for c in 0..grid {
            let px: Vec<[f32; 3]> = [(0, 0), (0, 1), (1, 0), (1, 1)]
                .iter()
                .map(|&(dy, dx)| image.pixel(2 * r + dy, 2 * c + dx))
                .collect();
            let lit: Vec<bool> = px.iter().map(|p| p.iter().any(|&v| v != 0.0)).collect();
            let shape = match lit.as_slice() {
                [false, false, false, false] => continue,
                [true, true, true, true] => "square",
                [true, false, true, true] => "triangle",
                [true, true, false, false] => "circle",
                _ => return None,
            };
            let colors: Vec<&str> = px
                .iter()
                .zip(&lit)
                .filter(|(_, &l)| l)
                .map(|(p, _)| color_word(*p))
                .collect::<Option<_>>()?;
            if colors.iter().any(|c| *c != colors[0]) {
                return None;
            }
            out.push((shape, colors[0], r * grid + c));
        }
    }
    Some(out)
}

/// Number of 4-connected regions of non-black pixels.
pub fn connected_components(image: &RawImage) -> usize {
    let (h, w) = (image.height(), image.width());
    let lit = |y: usize, x: usize| image.pixel(y, x).iter().any(|&v| v != 0.0);
    let mut seen = vec![false; h * w];
    let mut regions = 0;
    for start in 0..h * w {
        if seen[start] || !lit(start / w, start % w) {
            continue;
        }
        regions += 1;
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(p) = stack.pop() {
            let (y, x) = (p / w, p % w);
            let mut visit = |ny: usize, nx: usize| {
                let q = ny * w + nx;
                if !seen[q] && lit(ny, nx) {
                    seen[q] = true;
                    stack.push(q);
                }
            };
            if y > 0 {
                visit(y - 1, x);
            }
            if y + 1 < h {
                visit(y + 1, x);
            }
            if x > 0 {
                visit(y, x - 1);
            }
            if x + 1 < w {
                visit(y, x + 1);
            }
        }
    }
    regions
}

/// Answers a templated question over `(shape, color)` pairs. `None` if the
/// question is not one of the known templates or is ambiguous.
pub fn answer(objects: &[(&str, &str)], question: &[String]) -> Option<String> {
    let q: Vec<&str> = question.iter().map(String::as_str).collect();
    match q.as_slice() {
        ["how", "many", shape, "?"] => Some(
            objects
                .iter()
                .filter(|(s, _)| s == shape)
                .count()
                .to_string(),
        ),
        ["is", "there", "a", color, shape, "?"] => {
            let hit = objects.iter().any(|(s, c)| s == shape && c == color);
            Some(if hit { "yes" } else { "no" }.to_string())
        }
        ["what", "color", "is", "the", shape, "?"] => {
            let matches: Vec<&str> = objects
                .iter()
                .filter(|(s, _)| s == shape)
                .map(|(_, c)| *c)
                .collect();
            (matches.len() == 1).then(|| matches[0].to_string())
        }
        _ => None,
    }
}

/// Rechecks a QA sample three ways: answer from the object record, answer
/// from decoded pixels, and region count against the object count.
pub fn check_qa(sample: &QASample) -> bool {
    let record: Vec<(&str, &str)> = sample
        .scene
        .objects
        .iter()
        .map(|o| (o.shape.word(), o.color.word()))
        .collect();
    let Some(decoded) = decode_objects(&sample.scene.image) else {
        return false;
    };
    let from_pixels: Vec<(&str, &str)> = decoded.iter().map(|&(s, c, _)| (s, c)).collect();
    let expected = sample.answer.join(" ");
    answer(&record, &sample.question).as_deref() == Some(expected.as_str())
        && answer(&from_pixels, &sample.question).as_deref() == Some(expected.as_str())
        && connected_components(&sample.scene.image) == sample.scene.objects.len()
}

const POSITIVE_WORDS: &[&str] = &["love", "great", "wonderful", "best", "nice", "fun"];
const NEGATIVE_WORDS: &[&str] = &["hate", "terrible", "awful", "worst", "bad", "pain"];

/// Lexicon vote; `None` when the utterance carries no sentiment word or
/// both polarities.
pub fn text_sentiment(utterance: &[String]) -> Option<bool> {
    let pos = utterance
        .iter()
        .any(|w| POSITIVE_WORDS.contains(&w.as_str()));
    let neg = utterance
        .iter()
        .any(|w| NEGATIVE_WORDS.contains(&w.as_str()));
    match (pos, neg) {
        (true, false) => Some(true),
        (false, true) => Some(false),
        _ => None,
    }
}

/// Dominant frequency (in cycles per window) by a direct DFT.
pub fn dominant_frequency(window: &[f32]) -> usize {
    let n = window.len();
    let power = |k: usize| {
        let (mut re, mut im) = (0.0f64, 0.0f64);
        for (t, &x) in window.iter().enumerate() {
            let a = std::f64::consts::TAU * (k * t) as f64 / n as f64;
            re += x as f64 * a.cos();
            im -= x as f64 * a.sin();
        }
        re * re + im * im
    };
    (1..n / 2)
        .max_by(|&a, &b| power(a).total_cmp(&power(b)))
        .unwrap_or(0)
}

/// Majority over windows of "dominant frequency is at least 5 cycles".
pub fn audio_tone(windows: &[Vec<f32>]) -> Option<bool> {
    let high = windows
        .iter()
        .filter(|w| dominant_frequency(w) >= 5)
        .count();
    let low = windows.len() - high;
    (high != low).then_some(high > low)
}

/// Cheerful iff a frame shows a yellow circle and no blue triangle, gloomy
/// for the converse; all frames must agree.
pub fn video_tone(frames: &[RawImage]) -> Option<bool> {
    let mut votes = BTreeMap::new();
    for f in frames {
        let objs = decode_objects(f)?;
        let cheerful = objs.iter().any(|&(s, c, _)| s == "circle" && c == "yellow");
        let gloomy = objs.iter().any(|&(s, c, _)| s == "triangle" && c == "blue");
        let tone = match (cheerful, gloomy) {
            (true, false) => true,
            (false, true) => false,
            _ => return None,
        };
        *votes.entry(tone).or_insert(0) += 1;
    }
    (votes.len() == 1).then(|| *votes.keys().next().expect("one vote"))
}

pub fn check_trimodal(sample: &TrimodalSample) -> bool {
    let (Some(sentiment), Some(audio), Some(video)) = (
        text_sentiment(&sample.utterance),
        audio_tone(&sample.audio),
        video_tone(&sample.frames),
    ) else {
        return false;
    };
    let label = sentiment != audio;
    audio == video
        && sentiment == sample.sentiment_positive
        && audio == sample.tone_positive
        && label == sample.label
        && sample.answer() == if label { "true" } else { "false" }
}
