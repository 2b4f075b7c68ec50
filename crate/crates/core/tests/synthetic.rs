mod common;

use promptfuse::synthetic::oracle::{check_qa, check_trimodal};
use promptfuse::synthetic::{
    build_trimodal_splits, build_vqa_splits, histogram, SceneSpec, SplitSizes,
};
use promptfuse::system::Example;
use promptfuse::trainer::{Evaluation, Outcome, POSITIVE_ANSWER};
use promptfuse::transformer::Vocab;

const SAMPLES: usize = 10_000;

#[test]
fn oracle_agrees_with_ten_thousand_generated_samples() {
    let sizes = SplitSizes {
        train: SAMPLES / 2,
        eval: SAMPLES / 2,
    };
    let qa = build_vqa_splits(&SceneSpec::default(), sizes, 17).unwrap();
    let tri = build_trimodal_splits(sizes, 17);
    let qa_ok = qa
        .train
        .iter()
        .chain(&qa.eval)
        .filter(|s| check_qa(s))
        .count();
    let tri_ok = tri
        .train
        .iter()
        .chain(&tri.eval)
        .filter(|s| check_trimodal(s))
        .count();
    assert_eq!(qa_ok, SAMPLES);
    assert_eq!(tri_ok, SAMPLES);
}

#[test]
fn perfect_predictor_scores_one_hundred() {
    let vocab = Vocab::synthetic();
    let vqa = common::vqa_examples(&vocab, 300, 2);
    let outcomes: Vec<Outcome> = vqa
        .iter()
        .map(|e| Outcome::new(e, &e.answer_text))
        .collect();
    let Evaluation::Vqa {
        other,
        yes_no,
        number,
        overall,
    } = Evaluation::from_outcomes(&outcomes)
    else {
        panic!("expected VQA scores");
    };
    assert_eq!([other, yes_no, number, overall], [100.0; 4]);

    let tri = common::trimodal_examples(&vocab, 300, 2);
    let outcomes: Vec<Outcome> = tri
        .iter()
        .map(|e| Outcome::new(e, &e.answer_text))
        .collect();
    assert_eq!(
        Evaluation::from_outcomes(&outcomes),
        Evaluation::Trimodal {
            precision: 100.0,
            recall: 100.0,
            f_score: 100.0
        }
    );
}

#[test]
fn majority_predictor_matches_histogram() {
    let vocab = Vocab::synthetic();
    let tri = common::trimodal_examples(&vocab, 500, 3);
    let splits = build_trimodal_splits(
        SplitSizes {
            train: 500,
            eval: 0,
        },
        3,
    );
    let h = histogram(&splits.train);
    let (majority, count) = h.majority().unwrap();
    let outcomes: Vec<Outcome> = tri
        .iter()
        .map(|e: &Example| Outcome::new(e, majority))
        .collect();
    let correct = outcomes.iter().filter(|o| o.correct).count();
    assert_eq!(correct, count);
    let Evaluation::Trimodal {
        precision,
        recall,
        f_score,
    } = Evaluation::from_outcomes(&outcomes)
    else {
        panic!("expected trimodal scores");
    };
    if majority == POSITIVE_ANSWER {
        let p = 100.0 * count as f64 / 500.0;
        assert!((precision - p).abs() < 1e-9);
        assert_eq!(recall, 100.0);
        assert!((f_score - 2.0 * p * 100.0 / (p + 100.0)).abs() < 1e-9);
    } else {
        assert_eq!(f_score, 0.0);
    }
}
