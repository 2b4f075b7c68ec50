mod common;

use promptfuse::attribution::{attribute, integrated_gradients, IGConfig};
use promptfuse::fusion::{FusionMethod, PositionMode};
use promptfuse::params::Session;
use promptfuse::system::{FusionSystem, SystemSpec};
use promptfuse_autodiff::Tensor;
use proptest::prelude::*;

#[test]
fn prompt_gradients_match_finite_differences_end_to_end() {
    let p = common::tiny_pretrained(16, 2);
    let cases = [
        (FusionMethod::PromptFuse, PositionMode::Begin, 3, 0),
        (FusionMethod::PromptFuse, PositionMode::Middle, 2, 1),
        (FusionMethod::PromptFuse, PositionMode::End, 4, 2),
        (FusionMethod::BlindPrompt, PositionMode::Begin, 3, 3),
        (FusionMethod::BlackImage, PositionMode::Begin, 2, 4),
    ];
    for (method, position, n, seed) in cases {
        let spec = SystemSpec {
            position,
            ..SystemSpec::new(method, n)
        };
        let sys = FusionSystem::new(
            p.vocab.clone(),
            p.plm.clone(),
            p.vision.clone(),
            None,
            spec,
            seed,
        )
        .unwrap();
        let ex = &common::vqa_examples(&p.vocab, 1, seed)[0];
        let err = common::prompt_gradient_error(&sys, ex);
        assert!(err <= 1e-4, "{method} {position:?}: {err:e}");
    }
}

#[test]
fn attributions_are_complete_on_a_fused_model() {
    let p = common::tiny_pretrained(16, 1);
    for method in [FusionMethod::PromptFuse, FusionMethod::NoPrompt] {
        let sys = common::system(&p, method, 4, false);
        for ex in &common::vqa_examples(&p.vocab, 2, 8) {
            let r = attribute(&sys, ex, &IGConfig { steps: 128 }).unwrap();
            assert!(
                r.relative_delta() <= 5e-3,
                "{method}: {}",
                r.relative_delta()
            );
            assert_eq!(r.pixel_scores.len(), 64);
            assert_eq!(r.token_scores.len(), r.tokens.len());
            let total: f64 = r.pixel_scores.iter().chain(&r.token_scores).sum();
            assert!((total - (r.f_input - r.f_baseline)).abs() <= r.delta + 1e-9);
        }
    }
}

#[test]
fn trimodal_samples_are_rejected() {
    let p = common::tiny_pretrained(16, 1);
    let sys = common::system(&p, FusionMethod::PromptFuse, 2, true);
    let ex = &common::trimodal_examples(&p.vocab, 1, 0)[0];
    assert!(attribute(&sys, ex, &IGConfig::default()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn linear_targets_are_exact_for_any_step_count(
        w in proptest::collection::vec(-3.0f64..3.0, 4),
        x in proptest::collection::vec(-3.0f64..3.0, 4),
        m in 1usize..64,
    ) {
        let weights = Tensor::new(vec![4, 1], w.clone()).unwrap();
        let target = |s: &mut Session<f64>, ids: &[promptfuse_autodiff::NodeId]| {
            let w = s.graph.constant(weights.clone());
            let y = s.graph.matmul(ids[0], w)?;
            Ok(s.graph.sum_all(y)?)
        };
        let input = Tensor::new(vec![1, 4], x.clone()).unwrap();
        let base = Tensor::zeros(&[1, 4]);
        let once = integrated_gradients(target, &[input.clone()], &[base.clone()], m).unwrap();
        let twice = integrated_gradients(target, &[input], &[base], 2 * m).unwrap();
        for i in 0..4 {
            let expected = w[i] * x[i];
            prop_assert!((once.scores[0].data()[i] - expected).abs() < 1e-12);
            prop_assert!((twice.scores[0].data()[i] - expected).abs() < 1e-12);
        }
        prop_assert!(once.delta() < 1e-12);
    }
}
