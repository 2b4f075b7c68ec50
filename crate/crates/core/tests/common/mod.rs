//! Small untrained components for fast integration tests.
#![allow(dead_code)]

use promptfuse::encoders::{AudioConfig, AudioEncoder, VisionConfig, VisionEncoder};
use promptfuse::experiment::Pretrained;
use promptfuse::fusion::FusionMethod;
use promptfuse::synthetic::{build_trimodal_splits, build_vqa_splits, SceneSpec, SplitSizes};
use promptfuse::system::{Example, FusionSystem, SystemSpec};
use promptfuse::transformer::{EncoderDecoderModel, ModelConfig, Vocab};

pub fn tiny_model(d: usize, encoder_layers: usize) -> ModelConfig {
    ModelConfig {
        d_model: d,
        heads: 2,
        encoder_layers,
        decoder_layers: 1,
        ffn: 2 * d,
        max_len: 128,
        vocab_size: Vocab::synthetic().len(),
    }
}

pub fn tiny_pretrained(d: usize, encoder_layers: usize) -> Pretrained {
    let vision = VisionConfig {
        width: d,
        heads: 2,
        layers: 1,
        ffn: 2 * d,
    };
    Pretrained {
        vocab: Vocab::synthetic(),
        plm: EncoderDecoderModel::init(tiny_model(d, encoder_layers), 1).unwrap(),
        vision: VisionEncoder::init(vision, 2).unwrap(),
        audio: AudioEncoder::init(AudioConfig { width: d }, 3).unwrap(),
    }
}

pub fn system(
    p: &Pretrained,
    method: FusionMethod,
    n_prompts: usize,
    trimodal: bool,
) -> FusionSystem {
    let audio = trimodal.then(|| p.audio.clone());
    FusionSystem::new(
        p.vocab.clone(),
        p.plm.clone(),
        p.vision.clone(),
        audio,
        SystemSpec::new(method, n_prompts),
        5,
    )
    .unwrap()
}

pub fn vqa_examples(vocab: &Vocab, n: usize, seed: u64) -> Vec<Example> {
    let sizes = SplitSizes { train: n, eval: 0 };
    build_vqa_splits(&SceneSpec::default(), sizes, seed)
        .unwrap()
        .train
        .iter()
        .map(|q| Example::from_qa(q, vocab).unwrap())
        .collect()
}

pub fn trimodal_examples(vocab: &Vocab, n: usize, seed: u64) -> Vec<Example> {
    let sizes = SplitSizes { train: n, eval: 0 };
    build_trimodal_splits(sizes, seed)
        .train
        .iter()
        .map(|t| Example::from_trimodal(t, vocab).unwrap())
        .collect()
}

/// Relative error between the backward-pass gradient of the loss with
/// respect to the prompt bank and central finite differences, in f64.
pub fn prompt_gradient_error(sys: &FusionSystem, ex: &Example) -> f64 {
    use promptfuse::fusion::PROMPT;
    use promptfuse::params::Session;
    use promptfuse_autodiff::{finite_difference_gradient, vector_relative_error, Tensor};

    let bank = sys.fusion.get(PROMPT).unwrap();
    let shape = bank.shape().to_vec();
    let point: Vec<f64> = bank.data().iter().map(|&v| v as f64).collect();
    let loss_at = |p: &[f64], grad: bool| {
        let mut s = Session::<f64>::inference();
        let leaf = s
            .graph
            .leaf(Tensor::new(shape.clone(), p.to_vec()).unwrap(), grad);
        s.bind(PROMPT, leaf);
        let (loss, _) = sys.loss(&mut s, ex).unwrap();
        let g = grad.then(|| {
            s.graph
                .backward(loss)
                .unwrap()
                .get(leaf)
                .unwrap()
                .data()
                .to_vec()
        });
        (s.graph.value(loss).item(), g)
    };
    let analytic = loss_at(&point, true).1.unwrap();
    let numeric = finite_difference_gradient(|p| loss_at(p, false).0, &point, 1e-5).unwrap();
    vector_relative_error(&analytic, &numeric, 1e-12)
}

/// A small experiment config that matches [`tiny_pretrained`] at width `d`.
pub fn tiny_config(
    d: usize,
    pretrained_dir: &std::path::Path,
) -> promptfuse::experiment::ExperimentConfig {
    use promptfuse::experiment::{DataSettings, ExperimentConfig, Shots};
    use promptfuse::trainer::TrainConfig;
    let mut cfg = ExperimentConfig {
        methods: vec![FusionMethod::PromptFuse],
        shots: vec![Shots::Count(8)],
        seeds: vec![0],
        pretrained: pretrained_dir.to_path_buf(),
        model: tiny_model(d, 1),
        train: TrainConfig {
            batch_size: 4,
            epochs: 2,
            ..TrainConfig::default()
        },
        data: DataSettings {
            train: 24,
            eval: 8,
            ..DataSettings::default()
        },
        ..ExperimentConfig::default()
    };
    cfg.pretrain.vision = VisionConfig {
        width: d,
        heads: 2,
        layers: 1,
        ffn: 2 * d,
    };
    cfg.pretrain.audio = AudioConfig { width: d };
    cfg
}
