use promptfuse_autodiff::{Float, NodeId, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::ModelConfig;
use super::layers::{
    attention, causal_mask, encoder_block, ffn, init_attention, init_encoder_block, init_ffn,
    layer_norm,
};
use super::vocab::{BOS, EOS};
use crate::error::{Error, Result};
use crate::params::{ParamStore, Session};

/// Prefix of every language-model parameter name.
pub const PLM_PREFIX: &str = "plm.";
/// Token embeddings double as the output head, so they start at unit scale.
const TOKEN_INIT_STD: f32 = 1.0;
const POSITION_INIT_STD: f32 = 0.1;

/// Micro encoder-decoder transformer: pre-LN layers, learned positional
/// tables for each side, GELU feed-forward blocks and an LM head tied to the
/// token embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderDecoderModel {
    pub config: ModelConfig,
    pub params: ParamStore,
}

impl EncoderDecoderModel {
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = ParamStore::new();
        let (d, f) = (config.d_model, config.ffn);
        p.normal(
            &mut rng,
            "plm.tok_emb",
            &[config.vocab_size, d],
            TOKEN_INIT_STD,
        )?;
        p.normal(
            &mut rng,
            "plm.enc_pos",
            &[config.max_len, d],
            POSITION_INIT_STD,
        )?;
        p.normal(
            &mut rng,
            "plm.dec_pos",
            &[config.max_len, d],
            POSITION_INIT_STD,
        )?;
        for l in 0..config.encoder_layers {
            init_encoder_block(&mut p, &mut rng, &format!("plm.enc.{l}"), d, f)?;
        }
        p.layer_norm("plm.enc.ln_f", d)?;
        for l in 0..config.decoder_layers {
            let pre = format!("plm.dec.{l}");
            p.layer_norm(&format!("{pre}.ln1"), d)?;
            init_attention(&mut p, &mut rng, &format!("{pre}.self"), d)?;
            p.layer_norm(&format!("{pre}.ln2"), d)?;
            init_attention(&mut p, &mut rng, &format!("{pre}.cross"), d)?;
            p.layer_norm(&format!("{pre}.ln3"), d)?;
            init_ffn(&mut p, &mut rng, &format!("{pre}.ffn"), d, f)?;
        }
        p.layer_norm("plm.dec.ln_f", d)?;
        Ok(Self { config, params: p })
    }

    /// Token embedding rows for `ids`, shape `[len, d]`.
    pub fn embed_tokens<T: Float>(&self, s: &mut Session<T>, ids: &[usize]) -> Result<NodeId> {
        let table = s.param(&self.params, "plm.tok_emb")?;
        Ok(s.graph.gather_rows(table, ids)?)
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len > self.config.max_len {
            return Err(Error::LengthOverflow {
                len,
                max: self.config.max_len,
            });
        }
        if len == 0 {
            return Err(Error::EmptyInput("encoder input"));
        }
        Ok(())
    }

    fn add_positions<T: Float>(
        &self,
        s: &mut Session<T>,
        x: NodeId,
        table: &str,
    ) -> Result<NodeId> {
        let len = s.graph.value(x).shape()[0];
        self.check_len(len)?;
        let pos = s.param(&self.params, table)?;
        let ids: Vec<usize> = (0..len).collect();
        let rows = s.graph.gather_rows(pos, &ids)?;
        Ok(s.graph.add(x, rows)?)
    }

    /// Encodes a `[len, d]` embedding sequence. Positions are assigned by
    /// sequence index.
    pub fn encode<T: Float>(
        &self,
        s: &mut Session<T>,
        embeddings: NodeId,
        mask: Option<&Tensor<T>>,
    ) -> Result<NodeId> {
        self.encode_traced(s, embeddings, mask, None)
    }

    /// [`Self::encode`], also collecting every self-attention probability
    /// matrix (layer-major, then head).
    pub fn encode_traced<T: Float>(
        &self,
        s: &mut Session<T>,
        embeddings: NodeId,
        mask: Option<&Tensor<T>>,
        mut trace: Option<&mut Vec<NodeId>>,
    ) -> Result<NodeId> {
        let (len, width) = s.graph.value(embeddings).dims2("encode")?;
        if width != self.config.d_model {
            return Err(Error::WidthMismatch {
                expected: self.config.d_model,
                actual: width,
                context: "encoder input",
            });
        }
        if let Some(m) = mask {
            if m.shape() != [len, len] {
                return Err(Error::WidthMismatch {
                    expected: len,
                    actual: m.shape()[0],
                    context: "attention mask side",
                });
            }
        }
        let mut x = self.add_positions(s, embeddings, "plm.enc_pos")?;
        for l in 0..self.config.encoder_layers {
            x = encoder_block(
                s,
                &self.params,
                &format!("plm.enc.{l}"),
                x,
                mask,
                self.config.heads,
                trace.as_deref_mut(),
            )?;
        }
        layer_norm(s, &self.params, "plm.enc.ln_f", x)
    }

    /// Logits `[len(dec_input), vocab]` for a teacher-forced decoder input.
    pub fn decoder_logits<T: Float>(
        &self,
        s: &mut Session<T>,
        encoded: NodeId,
        dec_input: &[usize],
    ) -> Result<NodeId> {
        let heads = self.config.heads;
        let x = self.embed_tokens(s, dec_input)?;
        let mut x = self.add_positions(s, x, "plm.dec_pos")?;
        let causal = causal_mask::<T>(dec_input.len());
        for l in 0..self.config.decoder_layers {
            let pre = format!("plm.dec.{l}");
            let h = layer_norm(s, &self.params, &format!("{pre}.ln1"), x)?;
            let a = attention(
                s,
                &self.params,
                &format!("{pre}.self"),
                h,
                h,
                Some(&causal),
                heads,
                None,
            )?;
            x = s.graph.add(x, a)?;
            let h = layer_norm(s, &self.params, &format!("{pre}.ln2"), x)?;
            let c = attention(
                s,
                &self.params,
                &format!("{pre}.cross"),
                h,
                encoded,
                None,
                heads,
                None,
            )?;
            x = s.graph.add(x, c)?;
            let h = layer_norm(s, &self.params, &format!("{pre}.ln3"), x)?;
            let f = ffn(s, &self.params, &format!("{pre}.ffn"), h)?;
            x = s.graph.add(x, f)?;
        }
        let h = layer_norm(s, &self.params, "plm.dec.ln_f", x)?;
        let table = s.param(&self.params, "plm.tok_emb")?;
        Ok(s.graph.matmul_bt(h, table)?)
    }

    /// Mean cross-entropy of `answer` followed by end-of-sequence, with the
    /// teacher-forced logits returned alongside.
    pub fn answer_loss<T: Float>(
        &self,
        s: &mut Session<T>,
        encoded: NodeId,
        answer: &[usize],
    ) -> Result<(NodeId, NodeId)> {
        let (dec_in, targets) = teacher_forcing(answer);
        let logits = self.decoder_logits(s, encoded, &dec_in)?;
        let loss = sequence_cross_entropy(s, logits, &targets)?;
        Ok((loss, logits))
    }

    /// Greedy decoding from already-computed encoder states.
    pub fn decode_greedy(&self, encoded: &Tensor<f32>, max_steps: usize) -> Result<Vec<usize>> {
        greedy_decode_with(max_steps, |prefix| {
            let mut s = Session::<f32>::inference();
            let enc = s.graph.constant(encoded.clone());
            let logits = self.decoder_logits(&mut s, enc, prefix)?;
            Ok(s.graph.value(logits).row(prefix.len() - 1).to_vec())
        })
    }
}

/// Decoder input `[BOS, a..]` and targets `[a.., EOS]`.
pub fn teacher_forcing(answer: &[usize]) -> (Vec<usize>, Vec<Option<usize>>) {
    let mut dec_in = vec![BOS];
    dec_in.extend_from_slice(answer);
    let targets = answer.iter().copied().chain([EOS]).map(Some).collect();
    (dec_in, targets)
}

/// Mean negative log-likelihood over non-pad targets (`None` marks pad).
pub fn sequence_cross_entropy<T: Float>(
    s: &mut Session<T>,
    logits: NodeId,
    targets: &[Option<usize>],
) -> Result<NodeId> {
    let steps = s.graph.value(logits).shape()[0];
    if steps != targets.len() {
        return Err(Error::WidthMismatch {
            expected: steps,
            actual: targets.len(),
            context: "target length vs decoder steps",
        });
    }
    Ok(s.graph.cross_entropy(logits, targets)?)
}

/// Index of the largest value; exact ties go to the lowest index.
pub fn argmax(values: &[f32]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Runs the greedy loop given a function from decoder prefix (starting with
/// BOS) to next-token logits. The returned sequence excludes EOS.
pub fn greedy_decode_with(
    max_steps: usize,
    mut step_logits: impl FnMut(&[usize]) -> Result<Vec<f32>>,
) -> Result<Vec<usize>> {
    let mut prefix = vec![BOS];
    for _ in 0..max_steps {
        let next = argmax(&step_logits(&prefix)?);
        if next == EOS {
            break;
        }
        prefix.push(next);
    }
    Ok(prefix[1..].to_vec())
}
