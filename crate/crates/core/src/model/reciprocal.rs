//! Two-way fusion between a group's frame encoding and its members'.

use super::{Ablation, Bound, ModelError};
use crate::numerics::{Tape, Tensor, Var};

#[derive(Clone, Copy, Debug)]
pub struct Enhanced {
    /// `(frames * members) x d`
    pub xs: Var,
    pub zs: Var,
    /// `frames x d`
    pub xo: Var,
    pub zo: Var,
    /// `frames x (frames * members + 1)` member weights; the last column is a
    /// placeholder that only carries weight in frames with nobody present.
    pub weights: Option<Var>,
}

/// Students gain the group encoding of their frame; the group gains a
/// weighted sum of its members' encodings.
///
/// Weights come from `relu([x_s; z_s] Wk + [x_o; z_o] Wq) h` normalised by a
/// softmax over the members present in that frame only, so absent members get
/// weight exactly zero. With nobody present the group keeps its own encoding.
#[allow(clippy::too_many_arguments)]
pub fn reciprocal_enhance(
    tape: &mut Tape,
    p: &Bound,
    ablation: Ablation,
    frames: usize,
    members: usize,
    presence: &[bool],
    (xs, zs): (Var, Var),
    (xo, zo): (Var, Var),
) -> Result<Enhanced, ModelError> {
    if !ablation.reciprocal {
        return Ok(Enhanced {
            xs,
            zs,
            xo,
            zo,
            weights: None,
        });
    }
    let cells = frames * members;
    let frame_of_cell: Vec<usize> = (0..cells).map(|c| c / members).collect();

    let xo_rep = tape.embedding_lookup(xo, &frame_of_cell)?;
    let zo_rep = tape.embedding_lookup(zo, &frame_of_cell)?;
    let xs_new = tape.add(xs, xo_rep)?;
    let zs_new = tape.add(zs, zo_rep)?;

    let d = tape.shape(xs)[1];
    let pad = tape.constant(Tensor::zeros(1, d));
    let weights = if ablation.attention_agg {
        let student_in = tape.concat_cols(&[xs, zs])?;
        let keys = tape.matmul(student_in, p.var(p.ids.recip_key))?;
        let group_in = tape.concat_cols(&[xo, zo])?;
        let query = tape.matmul(group_in, p.var(p.ids.recip_query))?;
        let query = tape.embedding_lookup(query, &frame_of_cell)?;
        let pre = tape.add(keys, query)?;
        let pre = tape.relu(pre);
        let scores = tape.matmul(pre, p.var(p.ids.recip_score))?;
        let scores = tape.transpose(scores);
        let zero = tape.constant(Tensor::zeros(1, 1));
        let scores = tape.concat_cols(&[scores, zero])?;
        let ones = tape.constant(Tensor::filled(frames, 1, 1.0));
        let grid = tape.matmul(ones, scores)?;
        let mask = frame_mask(frames, members, presence);
        tape.masked_softmax(grid, &mask)?
    } else {
        // Plain mean over every member of the frame.
        let mut w = Tensor::zeros(frames, cells + 1);
        for t in 0..frames {
            for s in 0..members {
                w.set(t, t * members + s, 1.0 / members as f64);
            }
        }
        tape.constant(w)
    };

    let xs_pad = tape.concat_rows(&[xs, pad])?;
    let zs_pad = tape.concat_rows(&[zs, pad])?;
    let agg_x = tape.matmul(weights, xs_pad)?;
    let agg_z = tape.matmul(weights, zs_pad)?;
    let xo_new = tape.add(xo, agg_x)?;
    let zo_new = tape.add(zo, agg_z)?;
    Ok(Enhanced {
        xs: xs_new,
        zs: zs_new,
        xo: xo_new,
        zo: zo_new,
        weights: Some(weights),
    })
}

/// Row `t` admits the present cells of frame `t`, or only the placeholder
/// column when nobody is present.
fn frame_mask(frames: usize, members: usize, presence: &[bool]) -> Vec<bool> {
    let cols = frames * members + 1;
    let mut mask = vec![false; frames * cols];
    for t in 0..frames {
        let row = &mut mask[t * cols..(t + 1) * cols];
        let mut any = false;
        for s in 0..members {
            if presence[t * members + s] {
                row[t * members + s] = true;
                any = true;
            }
        }
        if !any {
            row[cols - 1] = true;
        }
    }
    mask
}
