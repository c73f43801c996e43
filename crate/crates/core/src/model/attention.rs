//! Causal self-attention over past frame snapshots.

use super::{Bound, ModelError};
use crate::numerics::{Tape, Tensor, Var};

/// Sinusoidal position code for frame `t`, width `d`.
pub fn positional_encoding(t: usize, d: usize) -> Vec<f64> {
    (0..d)
        .map(|i| {
            let rate = 10000f64.powf((2 * (i / 2)) as f64 / d as f64);
            let angle = t as f64 / rate;
            if i % 2 == 0 {
                angle.sin()
            } else {
                angle.cos()
            }
        })
        .collect()
}

/// Admissible `(query, key)` pairs. Query rows are frames `1..frames`, key
/// rows are frames `0..frames - 1`, both frame-major over `nodes`. A query may
/// only see its own node at strictly earlier frames.
pub fn causal_mask(frames: usize, nodes: usize) -> Vec<bool> {
    let rows = (frames - 1) * nodes;
    let mut mask = vec![false; rows * rows];
    for t in 1..frames {
        for node in 0..nodes {
            let q = (t - 1) * nodes + node;
            for tau in 0..t {
                mask[q * rows + tau * nodes + node] = true;
            }
        }
    }
    mask
}

/// Output of the retriever for frames `1..frames`.
pub struct Retrieved {
    /// `((frames - 1) * nodes) x d`, frame-major.
    pub states: Var,
    /// Attention weights per layer, one entry per head.
    pub weights: Vec<Vec<Var>>,
}

/// Retrieves knowledge states for frames `1..frames`.
///
/// `queries`, `keys` and `values` are `(frames * nodes) x d` frame-major
/// streams; query rows of frame 0 and key/value rows of the last frame are
/// never used. The first layer attends with the raw query; every later layer
/// refines the previous output residually against the same keys and values.
pub fn temporal_attention(
    tape: &mut Tape,
    p: &Bound,
    heads: usize,
    frames: usize,
    nodes: usize,
    (queries, keys, values): (Var, Var, Var),
) -> Result<Retrieved, ModelError> {
    debug_assert!(frames >= 2);
    let d = tape.shape(queries)[1];
    let width = d / heads;
    let scale = 1.0 / (width as f64).sqrt();
    let later: Vec<usize> = (nodes..frames * nodes).collect();
    let earlier: Vec<usize> = (0..(frames - 1) * nodes).collect();

    let mut pe_q = Tensor::zeros(later.len(), d);
    let mut pe_k = Tensor::zeros(earlier.len(), d);
    for t in 0..frames {
        let code = positional_encoding(t, d);
        for node in 0..nodes {
            if t >= 1 {
                pe_q.row_mut((t - 1) * nodes + node).copy_from_slice(&code);
            }
            if t + 1 < frames {
                pe_k.row_mut(t * nodes + node).copy_from_slice(&code);
            }
        }
    }
    let pe_q = tape.constant(pe_q);
    let pe_k = tape.constant(pe_k);
    let mask = causal_mask(frames, nodes);

    let k_in = tape.embedding_lookup(keys, &earlier)?;
    let k_in = tape.add(k_in, pe_k)?;
    let v_in = tape.embedding_lookup(values, &earlier)?;
    let mut q = tape.embedding_lookup(queries, &later)?;

    let mut weights = Vec::with_capacity(p.ids.attn.len());
    for (layer, ids) in p.ids.attn.iter().enumerate() {
        let q_in = tape.add(q, pe_q)?;
        let qp = tape.matmul(q_in, p.var(ids.query))?;
        let kp = tape.matmul(k_in, p.var(ids.key))?;
        let vp = tape.matmul(v_in, p.var(ids.value))?;
        let mut outs = Vec::with_capacity(heads);
        let mut layer_weights = Vec::with_capacity(heads);
        for h in 0..heads {
            let (qh, kh, vh) = if heads == 1 {
                (qp, kp, vp)
            } else {
                let (a, b) = (h * width, (h + 1) * width);
                (
                    tape.slice_cols(qp, a, b)?,
                    tape.slice_cols(kp, a, b)?,
                    tape.slice_cols(vp, a, b)?,
                )
            };
            let kt = tape.transpose(kh);
            let scores = tape.matmul(qh, kt)?;
            let scores = tape.scale(scores, scale);
            let w = tape.masked_softmax(scores, &mask)?;
            outs.push(tape.matmul(w, vh)?);
            layer_weights.push(w);
        }
        let out = if heads == 1 {
            outs[0]
        } else {
            tape.concat_cols(&outs)?
        };
        q = if layer == 0 { out } else { tape.add(q, out)? };
        weights.push(layer_weights);
    }
    Ok(Retrieved { states: q, weights })
}
