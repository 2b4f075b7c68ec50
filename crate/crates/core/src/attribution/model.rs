use promptfuse_autodiff::{NodeId, Tensor};
use serde::{Deserialize, Serialize};

use super::ig::{integrated_gradients, IGConfig};
use crate::encoders::{RawImage, VisionEncoder, CHANNELS, IMAGE_SIDE};
use crate::error::{Error, Result};
use crate::fusion::FusionMethod;
use crate::params::Session;
use crate::system::{Example, FusionSystem, RawInput};
use crate::transformer::{BOS, EOS};

/// Attributions of one prediction to image pixels and question tokens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionResult {
    pub method: FusionMethod,
    pub tokens: Vec<String>,
    /// One score per token, summed over the embedding dimension.
    pub token_scores: Vec<f64>,
    /// Row-major `IMAGE_SIDE × IMAGE_SIDE` scores, summed over channels.
    pub pixel_scores: Vec<f64>,
    /// Full greedy answer.
    pub prediction: String,
    /// First greedy token, whose log-probability is attributed.
    pub target_token: String,
    pub f_input: f64,
    pub f_baseline: f64,
    pub delta: f64,
    pub steps: usize,
}

impl AttributionResult {
    /// Completeness gap relative to max(1, |F(input) − F(baseline)|).
    pub fn relative_delta(&self) -> f64 {
        self.delta / (self.f_input - self.f_baseline).abs().max(1.0)
    }
}

/// Integrated gradients of the log-probability of the first greedy answer
/// token, from a black image and zero token embeddings to the sample.
pub fn attribute(
    system: &FusionSystem,
    ex: &Example,
    config: &IGConfig,
) -> Result<AttributionResult> {
    config.validate()?;
    let RawInput::Image(image) = &ex.raw else {
        return Err(Error::UnsupportedMethod {
            method: system.spec.method.to_string(),
            what: "attribution of trimodal samples",
        });
    };
    let predicted = system.predict(ex)?;
    let target = predicted.first().copied().unwrap_or(EOS);

    let pixels = VisionEncoder::image_tensor::<f64>(image)?;
    let embeddings = {
        let mut s = Session::<f64>::inference();
        let e = system.plm.embed_tokens(&mut s, &ex.text)?;
        s.graph.value(e).clone()
    };
    let black = VisionEncoder::image_tensor::<f64>(&RawImage::black())?;
    let zeros = Tensor::zeros(embeddings.shape());

    let f = |s: &mut Session<f64>, x: &[NodeId]| -> Result<NodeId> {
        let px = match system.spec.method {
            FusionMethod::BlackImage => s.graph.constant(black.clone()),
            _ => x[0],
        };
        let visual = system.image_embedding(s, px)?;
        let enc = system.encode_fused(s, &[visual], x[1])?;
        let logits = system.plm.decoder_logits(s, enc.states, &[BOS])?;
        let nll = s.graph.cross_entropy(logits, &[Some(target)])?;
        Ok(s.graph.scale(nll, -1.0)?)
    };
    let ig = integrated_gradients(
        f,
        &[pixels, embeddings],
        &[black.clone(), zeros],
        config.steps,
    )?;

    let pixel_scores = ig.scores[0]
        .data()
        .chunks(CHANNELS)
        .map(|c| c.iter().sum())
        .collect::<Vec<f64>>();
    debug_assert_eq!(pixel_scores.len(), IMAGE_SIDE * IMAGE_SIDE);
    let d = system.plm.config.d_model;
    let token_scores = ig.scores[1]
        .data()
        .chunks(d)
        .map(|c| c.iter().sum())
        .collect();
    let word = |id: usize| system.vocab.token(id).unwrap_or("?").to_string();
    Ok(AttributionResult {
        method: system.spec.method,
        tokens: ex.text.iter().map(|&t| word(t)).collect(),
        token_scores,
        pixel_scores,
        prediction: system.vocab.decode(&predicted).join(" "),
        target_token: word(target),
        f_input: ig.f_input,
        f_baseline: ig.f_baseline,
        delta: ig.delta(),
        steps: config.steps,
    })
}
