use promptfuse_autodiff::{Float, NodeId};

use super::method::PositionMode;
use crate::error::{Error, Result};
use crate::params::Session;

/// A fused embedding sequence and the index sets of its three parts, which
/// partition `0..len`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FusedInput {
    pub embeddings: NodeId,
    pub len: usize,
    pub prompt_idx: Vec<usize>,
    pub modality_idx: Vec<usize>,
    pub text_idx: Vec<usize>,
}

/// Lays out `[prompts | modality | text]` (Begin), `[modality | prompts |
/// text]` (Middle) or `[modality | text | prompts]` (End). Multiple
/// modalities keep their given order.
pub fn assemble_fused_input<T: Float>(
    s: &mut Session<T>,
    prompts: Option<NodeId>,
    modalities: &[NodeId],
    text: Option<NodeId>,
    position: PositionMode,
    d_model: usize,
    max_len: usize,
) -> Result<FusedInput> {
    let rows = |s: &Session<T>, id: NodeId| -> Result<usize> {
        let (r, w) = s.graph.value(id).dims2("fused input part")?;
        if w != d_model {
            return Err(Error::WidthMismatch {
                expected: d_model,
                actual: w,
                context: "fused input part",
            });
        }
        Ok(r)
    };
    let n_prompt = prompts.map(|p| rows(s, p)).transpose()?.unwrap_or(0);
    let mut n_mod = 0;
    for &m in modalities {
        n_mod += rows(s, m)?;
    }
    let n_text = text.map(|t| rows(s, t)).transpose()?.unwrap_or(0);
    let len = n_prompt + n_mod + n_text;
    if len > max_len {
        return Err(Error::LengthOverflow { len, max: max_len });
    }
    if len == 0 {
        return Err(Error::EmptyInput("fused input"));
    }

    let span = |start: usize, n: usize| (start..start + n).collect::<Vec<_>>();
    let (p_start, m_start, t_start) = match position {
        PositionMode::Begin => (0, n_prompt, n_prompt + n_mod),
        PositionMode::Middle => (n_mod, 0, n_mod + n_prompt),
        PositionMode::End => (n_mod + n_text, 0, n_mod),
    };
    let mut parts: Vec<NodeId> = Vec::new();
    let push_modalities = |parts: &mut Vec<NodeId>| parts.extend_from_slice(modalities);
    match position {
        PositionMode::Begin => {
            parts.extend(prompts);
            push_modalities(&mut parts);
            parts.extend(text);
        }
        PositionMode::Middle => {
            push_modalities(&mut parts);
            parts.extend(prompts);
            parts.extend(text);
        }
        PositionMode::End => {
            push_modalities(&mut parts);
            parts.extend(text);
            parts.extend(prompts);
        }
    }
    let embeddings = if parts.len() == 1 {
        parts[0]
    } else {
        s.graph.concat_rows(&parts)?
    };
    Ok(FusedInput {
        embeddings,
        len,
        prompt_idx: span(p_start, n_prompt),
        modality_idx: span(m_start, n_mod),
        text_idx: span(t_start, n_text),
    })
}
