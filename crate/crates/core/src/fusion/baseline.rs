use promptfuse_autodiff::{Float, NodeId, Tensor};
use rand::Rng;

use super::method::FusionMethod;
use crate::error::{Error, Result};
use crate::params::{ParamStore, Session};
use crate::transformer::layers::linear;

pub const LINEAR_PREFIX: &str = "fusion.linear";
pub const JOINT_PREFIX: &str = "fusion.joint";
const JOINT_INIT_STD: f32 = 0.02;

/// Adds the projection parameters a baseline needs. Linear starts as the
/// identity map; JointProj starts as `[noise | I]`, i.e. close to passing
/// the text embeddings through unchanged.
pub fn init_baseline(
    store: &mut ParamStore,
    rng: &mut impl Rng,
    method: FusionMethod,
    d_v: usize,
    d: usize,
) -> Result<()> {
    match method {
        FusionMethod::Linear => {
            store.insert(format!("{LINEAR_PREFIX}.w"), Tensor::identity(d_v))?;
            store.zeros(format!("{LINEAR_PREFIX}.b"), &[d_v])
        }
        FusionMethod::JointProj => {
            store.normal(
                rng,
                format!("{JOINT_PREFIX}.w"),
                &[d_v + d, d],
                JOINT_INIT_STD,
            )?;
            let w = store.get_mut(&format!("{JOINT_PREFIX}.w"))?.data_mut();
            for i in 0..d {
                for j in 0..d {
                    w[(d_v + i) * d + j] = if i == j { 1.0 } else { 0.0 };
                }
            }
            store.zeros(format!("{JOINT_PREFIX}.b"), &[d])
        }
        _ => Ok(()),
    }
}

/// Model-ready parts after the baseline transform: the modality rows that
/// stay in the sequence and the (possibly rewritten) text rows.
pub struct Transformed {
    pub modalities: Vec<NodeId>,
    pub text: NodeId,
}

/// Linear maps each visual vector `v ↦ v·W + b` (width kept); JointProj
/// replaces every text row `w_i` by `[v ; w_i]·P + c` and drops the visual
/// rows from the sequence. All other methods pass inputs through; the black
/// image of BlackImage is substituted before the visual encoder.
pub fn apply_baseline_transform<T: Float>(
    s: &mut Session<T>,
    store: &ParamStore,
    method: FusionMethod,
    visual: &[NodeId],
    text: NodeId,
) -> Result<Transformed> {
    match method {
        FusionMethod::Linear => {
            let modalities = visual
                .iter()
                .map(|&v| linear(s, store, LINEAR_PREFIX, v))
                .collect::<Result<_>>()?;
            Ok(Transformed { modalities, text })
        }
        FusionMethod::JointProj => {
            if visual.len() != 1 || s.graph.value(visual[0]).shape()[0] != 1 {
                return Err(Error::UnsupportedMethod {
                    method: method.name().into(),
                    what: "anything but a single pooled visual vector",
                });
            }
            let n = s.graph.value(text).shape()[0];
            let v = s.graph.gather_rows(visual[0], &vec![0; n])?;
            let joint = s.graph.concat_cols(&[v, text])?;
            let text = linear(s, store, JOINT_PREFIX, joint)?;
            Ok(Transformed {
                modalities: vec![],
                text,
            })
        }
        _ => Ok(Transformed {
            modalities: visual.to_vec(),
            text,
        }),
    }
}
