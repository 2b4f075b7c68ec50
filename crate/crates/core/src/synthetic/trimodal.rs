use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::scene::{place, render, Color, Object, Shape, GRID};
use crate::encoders::RawImage;

pub const FRAMES: usize = 3;
pub const AUDIO_WINDOWS: usize = 4;
pub const WINDOW_LEN: usize = 64;

pub const POSITIVE_UTTERANCES: &[&str] = &[
    "i love this",
    "what a great day",
    "this is wonderful",
    "best idea ever",
    "nice work",
    "so much fun",
];

pub const NEGATIVE_UTTERANCES: &[&str] = &[
    "i hate this",
    "what a terrible day",
    "this is awful",
    "worst idea ever",
    "bad work",
    "so much pain",
];

/// Cycles per window for each tone. The bands are disjoint so the tone is
/// recoverable from the spectrum.
pub(crate) const HIGH_BAND: (f32, f32) = (6.0, 9.0);
pub(crate) const LOW_BAND: (f32, f32) = (2.0, 4.0);
const NOISE_STD: f32 = 0.05;

/// Video, audio and text whose label is the incongruence between the
/// utterance's sentiment and the tone carried by the other two modalities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrimodalSample {
    pub seed: u64,
    pub frames: Vec<RawImage>,
    pub audio: Vec<Vec<f32>>,
    pub utterance: Vec<String>,
    pub sentiment_positive: bool,
    pub tone_positive: bool,
    pub label: bool,
}

impl TrimodalSample {
    pub fn answer(&self) -> &'static str {
        if self.label {
            "true"
        } else {
            "false"
        }
    }
}

/// Cheerful frames show yellow circles in the lower half, gloomy frames blue
/// triangles in the upper half; each frame also has one red or green square
/// anywhere as a distractor.
fn frame(rng: &mut impl Rng, tone_positive: bool) -> RawImage {
    let half = GRID / 2;
    let (shape, color, rows) = if tone_positive {
        (Shape::Circle, Color::Yellow, half..GRID)
    } else {
        (Shape::Triangle, Color::Blue, 0..half)
    };
    let allowed: Vec<usize> = rows
        .flat_map(|r| (0..GRID).map(move |c| r * GRID + c))
        .collect();
    let k = rng.random_range(1..=2);
    let cells = place(rng, &allowed, &[], k, GRID).expect("half grid fits two objects");
    let mut objects: Vec<Object> = cells
        .iter()
        .map(|&cell| Object { shape, color, cell })
        .collect();
    let all: Vec<usize> = (0..GRID * GRID).collect();
    let distractor = place(rng, &all, &cells, 1, GRID).expect("grid has room for a distractor");
    let color = if rng.random_bool(0.5) {
        Color::Red
    } else {
        Color::Green
    };
    objects.push(Object {
        shape: Shape::Square,
        color,
        cell: distractor[0],
    });
    render(&objects, GRID)
}

fn waveform(rng: &mut impl Rng, tone_positive: bool) -> Vec<f32> {
    let (lo, hi) = if tone_positive { HIGH_BAND } else { LOW_BAND };
    let freq = rng.random_range(lo..hi);
    let amp = rng.random_range(0.5f32..1.0);
    let phase = rng.random_range(0.0..std::f32::consts::TAU);
    let noise = Normal::new(0.0f32, NOISE_STD).expect("valid std");
    (0..WINDOW_LEN)
        .map(|t| {
            let x = std::f32::consts::TAU * freq * t as f32 / WINDOW_LEN as f32 + phase;
            amp * x.sin() + noise.sample(rng)
        })
        .collect()
}

pub fn generate_trimodal(seed: u64) -> TrimodalSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sentiment_positive = rng.random_bool(0.5);
    let tone_positive = rng.random_bool(0.5);
    let pool = if sentiment_positive {
        POSITIVE_UTTERANCES
    } else {
        NEGATIVE_UTTERANCES
    };
    let utterance = pool[rng.random_range(0..pool.len())]
        .split_whitespace()
        .map(str::to_string)
        .collect();
    let frames = (0..FRAMES)
        .map(|_| frame(&mut rng, tone_positive))
        .collect();
    let audio = (0..AUDIO_WINDOWS)
        .map(|_| waveform(&mut rng, tone_positive))
        .collect();
    TrimodalSample {
        seed,
        frames,
        audio,
        utterance,
        sentiment_positive,
        tone_positive,
        label: sentiment_positive != tone_positive,
    }
}
