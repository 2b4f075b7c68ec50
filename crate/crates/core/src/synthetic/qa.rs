use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::scene::{Color, Scene, Shape};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum QuestionType {
    Number,
    YesNo,
    Other,
}

impl QuestionType {
    pub const ALL: [QuestionType; 3] = [
        QuestionType::Other,
        QuestionType::YesNo,
        QuestionType::Number,
    ];

    pub fn name(self) -> &'static str {
        match self {
            QuestionType::Number => "Number",
            QuestionType::YesNo => "YesNo",
            QuestionType::Other => "Other",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QASample {
    pub seed: u64,
    pub scene: Scene,
    pub question: Vec<String>,
    pub answer: Vec<String>,
    pub qtype: QuestionType,
}

fn words(ws: &[&str]) -> Vec<String> {
    ws.iter().map(|w| w.to_string()).collect()
}

/// Picks a question template the scene can answer exactly and computes the
/// answer from the object list. `Other` is offered only when some shape
/// occurs exactly once, so "the <shape>" is unambiguous.
pub fn generate_qa(scene: &Scene, seed: u64) -> QASample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unique: Vec<Shape> = Shape::ALL
        .into_iter()
        .filter(|&s| scene.count(s) == 1)
        .collect();
    let mut types = vec![QuestionType::Number, QuestionType::YesNo];
    if !unique.is_empty() {
        types.push(QuestionType::Other);
    }
    let qtype = types[rng.random_range(0..types.len())];

    let (question, answer) = match qtype {
        QuestionType::Number => {
            let shape = Shape::ALL[rng.random_range(0..Shape::ALL.len())];
            (
                words(&["how", "many", shape.word(), "?"]),
                scene.count(shape).to_string(),
            )
        }
        QuestionType::YesNo => {
            let combos: Vec<(Color, Shape)> = Color::ALL
                .into_iter()
                .flat_map(|c| Shape::ALL.into_iter().map(move |s| (c, s)))
                .collect();
            let (present, absent): (Vec<_>, Vec<_>) =
                combos.into_iter().partition(|&(c, s)| scene.contains(c, s));
            let want_present = rng.random_bool(0.5);
            let pool = match (want_present, present.is_empty(), absent.is_empty()) {
                (true, false, _) | (false, _, true) => &present,
                _ => &absent,
            };
            let (c, s) = pool[rng.random_range(0..pool.len())];
            let ans = if scene.contains(c, s) { "yes" } else { "no" };
            (
                words(&["is", "there", "a", c.word(), s.word(), "?"]),
                ans.to_string(),
            )
        }
        QuestionType::Other => {
            let shape = unique[rng.random_range(0..unique.len())];
            let color = scene
                .objects
                .iter()
                .find(|o| o.shape == shape)
                .map(|o| o.color)
                .expect("shape occurs exactly once");
            (
                words(&["what", "color", "is", "the", shape.word(), "?"]),
                color.word().to_string(),
            )
        }
    };
    QASample {
        seed,
        scene: scene.clone(),
        question,
        answer: vec![answer],
        qtype,
    }
}
