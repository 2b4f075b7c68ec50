use promptfuse_autodiff::{Float, Graph, NodeId, Tensor};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PoolingMode {
    /// The summary row (index 0).
    Cls,
    /// Arithmetic mean over all rows.
    Average,
    /// The whole sequence.
    FullSequence,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PooledEmbedding {
    pub mode: PoolingMode,
    /// `[1, d]` for `Cls` and `Average`, `[len, d]` for `FullSequence`.
    pub vectors: Tensor<f32>,
}

pub fn pool_sequence(seq: &Tensor<f32>, mode: PoolingMode) -> Result<PooledEmbedding> {
    let mut g = Graph::<f32>::new();
    let x = g.constant(seq.clone());
    let y = pool_node(&mut g, x, mode)?;
    Ok(PooledEmbedding {
        mode,
        vectors: g.value(y).clone(),
    })
}

/// Pooling as a graph operation, so gradients flow through it.
pub fn pool_node<T: Float>(g: &mut Graph<T>, seq: NodeId, mode: PoolingMode) -> Result<NodeId> {
    let (len, _) = g.value(seq).dims2("pool")?;
    if len == 0 {
        return Err(Error::EmptyInput("pooled sequence"));
    }
    Ok(match mode {
        PoolingMode::Cls => g.slice_rows(seq, 0, 1)?,
        PoolingMode::Average => g.mean_rows(seq)?,
        PoolingMode::FullSequence => seq,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq() -> Tensor<f32> {
        Tensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap()
    }

    #[test]
    fn modes() {
        assert_eq!(
            pool_sequence(&seq(), PoolingMode::Average)
                .unwrap()
                .vectors
                .data(),
            &[2.0, 3.0]
        );
        assert_eq!(
            pool_sequence(&seq(), PoolingMode::Cls)
                .unwrap()
                .vectors
                .data(),
            &[1.0, 2.0]
        );
        assert_eq!(
            pool_sequence(&seq(), PoolingMode::FullSequence)
                .unwrap()
                .vectors,
            seq()
        );
    }

    #[test]
    fn singleton_cls_equals_average() {
        let one = Tensor::new(vec![1, 3], vec![0.5, -1.0, 2.0]).unwrap();
        let a = pool_sequence(&one, PoolingMode::Average).unwrap().vectors;
        let c = pool_sequence(&one, PoolingMode::Cls).unwrap().vectors;
        assert_eq!(a, c);
        assert_eq!(a.data(), one.data());
    }
}
