//! The composed model: frozen language model, modality encoders and the
//! fusion parameters of one method, behind a single forward pass.

use promptfuse_autodiff::{Float, NodeId, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::encoders::{
    encode_temporal, encode_temporal_node, pool_node, AudioEncoder, ModalityEncoder, PoolingMode,
    RawImage, VisionEncoder,
};
use crate::error::{Error, Result};
use crate::fusion::{
    apply_baseline_transform, apply_prompt_encoder, assemble_fused_input, init_baseline,
    AttentionMaskSpec, FusedInput, FusionMethod, PositionMode, PromptBank, PromptEncoderMode,
};
use crate::params::{ParamAccess, ParamStore, Session};
use crate::synthetic::{trimodal_suffix, Answered, QASample, TrimodalSample};
use crate::transformer::{input_ids, EncoderDecoderModel, Vocab};

/// Longest answer the decoder is allowed to produce.
pub const MAX_ANSWER_STEPS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemSpec {
    pub method: FusionMethod,
    pub n_prompts: usize,
    pub position: PositionMode,
    pub prompt_encoder: PromptEncoderMode,
    pub image_pooling: PoolingMode,
}

impl SystemSpec {
    pub fn new(method: FusionMethod, n_prompts: usize) -> Self {
        Self {
            method,
            n_prompts,
            position: PositionMode::Begin,
            prompt_encoder: PromptEncoderMode::Identity,
            image_pooling: PoolingMode::Cls,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RawInput {
    Image(RawImage),
    Trimodal {
        frames: Vec<RawImage>,
        audio: Vec<Vec<f32>>,
    },
}

/// One model-ready sample: raw modalities, text ids (ending in EOS), answer
/// ids and bookkeeping for metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub raw: RawInput,
    pub text: Vec<usize>,
    pub answer: Vec<usize>,
    pub answer_type: &'static str,
    pub answer_text: String,
    /// Frozen-encoder features, filled by [`FusionSystem::prepare`].
    pub features: Option<Vec<Tensor<f32>>>,
}

impl Example {
    pub fn from_qa(sample: &QASample, vocab: &Vocab) -> Result<Self> {
        Ok(Self {
            raw: RawInput::Image(sample.scene.image.clone()),
            text: input_ids(vocab, &sample.question)?,
            answer: vocab.encode(&sample.answer)?,
            answer_type: sample.qtype.name(),
            answer_text: sample.answer.join(" "),
            features: None,
        })
    }

    pub fn from_trimodal(sample: &TrimodalSample, vocab: &Vocab) -> Result<Self> {
        let mut words = sample.utterance.clone();
        words.extend(trimodal_suffix());
        Ok(Self {
            raw: RawInput::Trimodal {
                frames: sample.frames.clone(),
                audio: sample.audio.clone(),
            },
            text: input_ids(vocab, &words)?,
            answer: vocab.encode(&[sample.answer()])?,
            answer_type: "Sarcasm",
            answer_text: sample.answer().to_string(),
            features: None,
        })
    }
}

impl Answered for Example {
    fn answer_type(&self) -> &'static str {
        self.answer_type
    }
    fn answer_text(&self) -> String {
        self.answer_text.clone()
    }
}

/// Output of the fused encoder pass.
pub struct Encoded {
    pub states: NodeId,
    pub layout: FusedInput,
    pub mask: AttentionMaskSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionSystem {
    pub vocab: Vocab,
    pub plm: EncoderDecoderModel,
    pub vision: VisionEncoder,
    /// Present only for tasks with an audio stream.
    pub audio: Option<AudioEncoder>,
    pub fusion: ParamStore,
    pub spec: SystemSpec,
    pub bank: PromptBank,
}

impl FusionSystem {
    pub fn new(
        vocab: Vocab,
        plm: EncoderDecoderModel,
        vision: VisionEncoder,
        audio: Option<AudioEncoder>,
        spec: SystemSpec,
        seed: u64,
    ) -> Result<Self> {
        let d = plm.config.d_model;
        let widths = [
            Some((vision.width(), "vision width vs d_model")),
            audio
                .as_ref()
                .map(|a| (a.width(), "audio width vs d_model")),
        ];
        for (w, context) in widths.into_iter().flatten() {
            if w != d {
                return Err(Error::WidthMismatch {
                    expected: d,
                    actual: w,
                    context,
                });
            }
        }
        let n = match spec.method {
            m if m.uses_prompts() => spec.n_prompts,
            _ => 0,
        };
        if spec.method == FusionMethod::BlindPrompt && n == 0 {
            return Err(Error::BlindPromptWithoutPrompts);
        }
        let bank = PromptBank {
            n,
            d,
            position: spec.position,
            encoder: spec.prompt_encoder,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fusion = ParamStore::new();
        bank.init(&mut fusion, &mut rng)?;
        init_baseline(&mut fusion, &mut rng, spec.method, vision.width(), d)?;
        Ok(Self {
            vocab,
            plm,
            vision,
            audio,
            fusion,
            spec,
            bank,
        })
    }

    pub fn stores(&self) -> Vec<&ParamStore> {
        let mut v = vec![&self.plm.params, &self.vision.params];
        v.extend(self.audio.as_ref().map(|a| &a.params));
        v.push(&self.fusion);
        v
    }

    fn audio_encoder(&self) -> Result<&AudioEncoder> {
        self.audio
            .as_ref()
            .ok_or_else(|| Error::Config("trimodal input needs an audio encoder".into()))
    }

    /// Every parameter name of the composed system, sorted.
    pub fn param_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self
            .stores()
            .iter()
            .flat_map(|s| s.names().map(str::to_string))
            .collect();
        names.sort();
        names
    }
}

impl ParamAccess for FusionSystem {
    fn param_ref(&self, name: &str) -> Result<&Tensor<f32>> {
        self.stores()
            .into_iter()
            .find(|st| st.contains(name))
            .ok_or_else(|| Error::UnknownParameter(name.to_string()))?
            .get(name)
    }

    fn param_mut(&mut self, name: &str) -> Result<&mut Tensor<f32>> {
        let mut stores = vec![&mut self.plm.params, &mut self.vision.params];
        stores.extend(self.audio.as_mut().map(|a| &mut a.params));
        stores.push(&mut self.fusion);
        for store in stores {
            if store.contains(name) {
                return store.get_mut(name);
            }
        }
        Err(Error::UnknownParameter(name.to_string()))
    }
}

impl FusionSystem {
    /// Every parameter tensor with its name, for checkpointing.
    pub fn tensors(&self) -> Vec<(&str, &Tensor<f32>)> {
        self.stores().into_iter().flat_map(|s| s.iter()).collect()
    }

    pub fn fingerprint(&self) -> u64 {
        self.plm.config.fingerprint()
    }

    /// Overwrites parameters with same-named tensors from `store`.
    pub fn load_params(&mut self, store: &ParamStore) -> Result<()> {
        for (name, t) in store.iter() {
            let dst = self.param_mut(name)?;
            if dst.shape() != t.shape() {
                return Err(Error::WidthMismatch {
                    expected: dst.len(),
                    actual: t.len(),
                    context: "checkpoint tensor",
                });
            }
            *dst = t.clone();
        }
        Ok(())
    }

    /// SHA-256 over the per-store digests of parameters accepted by `filter`.
    pub fn digest_where(&self, filter: impl Fn(&str) -> bool) -> [u8; 32] {
        let mut h = Sha256::new();
        for s in self.stores() {
            h.update(s.digest_where(&filter));
        }
        h.finalize().into()
    }

    fn visual_raw<'a>(&self, raw: &'a RawInput) -> std::borrow::Cow<'a, RawInput> {
        if self.spec.method != FusionMethod::BlackImage {
            return std::borrow::Cow::Borrowed(raw);
        }
        std::borrow::Cow::Owned(match raw {
            RawInput::Image(_) => RawInput::Image(RawImage::black()),
            RawInput::Trimodal { frames, audio } => RawInput::Trimodal {
                frames: vec![RawImage::black(); frames.len()],
                audio: audio.clone(),
            },
        })
    }

    /// Whether the modality encoders are trained, which rules out caching
    /// their outputs.
    pub fn encoders_trainable(&self) -> bool {
        self.spec.method == FusionMethod::Finetune
    }

    /// Frozen-encoder features of one sample: the pooled image, or the
    /// frame-averaged video and window-averaged audio vectors.
    pub fn features(&self, raw: &RawInput) -> Result<Vec<Tensor<f32>>> {
        let raw = self.visual_raw(raw);
        Ok(match raw.as_ref() {
            RawInput::Image(img) => {
                let mut s = Session::<f32>::inference();
                let x = self.vision.input_node(&mut s, img)?;
                let seq = self.vision.encode_node(&mut s, x)?;
                let pooled = pool_node(&mut s.graph, seq, self.spec.image_pooling)?;
                vec![s.graph.value(pooled).clone()]
            }
            RawInput::Trimodal { frames, audio } => vec![
                encode_temporal(frames, &self.vision)?,
                encode_temporal(audio, self.audio_encoder()?)?,
            ],
        })
    }

    /// Caches frozen-encoder features; a no-op when encoders are trainable.
    pub fn prepare(&self, examples: &mut [Example]) -> Result<()> {
        if self.encoders_trainable() {
            return Ok(());
        }
        for ex in examples {
            ex.features = Some(self.features(&ex.raw)?);
        }
        Ok(())
    }

    /// Visual embedding from an image given as a `[64, 3]` pixel node.
    pub fn image_embedding<T: Float>(&self, s: &mut Session<T>, pixels: NodeId) -> Result<NodeId> {
        let seq = self.vision.encode_node(s, pixels)?;
        pool_node(&mut s.graph, seq, self.spec.image_pooling)
    }

    pub fn modality_nodes<T: Float>(
        &self,
        s: &mut Session<T>,
        ex: &Example,
    ) -> Result<Vec<NodeId>> {
        if let (Some(f), false) = (&ex.features, self.encoders_trainable()) {
            return Ok(f.iter().map(|t| s.graph.constant(t.cast())).collect());
        }
        let raw = self.visual_raw(&ex.raw);
        Ok(match raw.as_ref() {
            RawInput::Image(img) => {
                let px = self.vision.input_node(s, img)?;
                vec![self.image_embedding(s, px)?]
            }
            RawInput::Trimodal { frames, audio } => vec![
                encode_temporal_node(s, frames, &self.vision)?,
                encode_temporal_node(s, audio, self.audio_encoder()?)?,
            ],
        })
    }

    /// Prompts, baseline transform, layout, mask and the frozen encoder.
    pub fn encode_fused<T: Float>(
        &self,
        s: &mut Session<T>,
        visual: &[NodeId],
        text: NodeId,
    ) -> Result<Encoded> {
        let t = apply_baseline_transform(s, &self.fusion, self.spec.method, visual, text)?;
        let prompts = apply_prompt_encoder(s, &self.fusion, &self.bank)?;
        let layout = assemble_fused_input(
            s,
            prompts,
            &t.modalities,
            Some(t.text),
            self.bank.position,
            self.plm.config.d_model,
            self.plm.config.max_len,
        )?;
        let mask = AttentionMaskSpec::for_layout(layout.len, &layout.prompt_idx, self.spec.method)?;
        let additive = mask.additive::<T>();
        let states = self.plm.encode(s, layout.embeddings, additive.as_ref())?;
        Ok(Encoded {
            states,
            layout,
            mask,
        })
    }

    pub fn forward<T: Float>(&self, s: &mut Session<T>, ex: &Example) -> Result<Encoded> {
        let visual = self.modality_nodes(s, ex)?;
        let text = self.plm.embed_tokens(s, &ex.text)?;
        self.encode_fused(s, &visual, text)
    }

    /// Teacher-forced loss and logits for one example.
    pub fn loss<T: Float>(&self, s: &mut Session<T>, ex: &Example) -> Result<(NodeId, NodeId)> {
        let enc = self.forward(s, ex)?;
        self.plm.answer_loss(s, enc.states, &ex.answer)
    }

    /// Greedy answer ids.
    pub fn predict(&self, ex: &Example) -> Result<Vec<usize>> {
        let mut s = Session::<f32>::inference();
        let enc = self.forward(&mut s, ex)?;
        let states = s.graph.value(enc.states).clone();
        self.plm.decode_greedy(&states, MAX_ANSWER_STEPS)
    }
}
