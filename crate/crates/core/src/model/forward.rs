use super::attention::{temporal_attention, Retrieved};
use super::encode::{encode_group, encode_students};
use super::graph::{block_diagonal, build_snapshot, gcn_forward, Snapshot};
use super::readout::readout;
use super::reciprocal::reciprocal_enhance;
use super::{Bound, GroupInput, ModelConfig, ModelError};
use crate::numerics::{Tape, Tensor, Var};

/// Everything one group's forward pass leaves on the tape.
pub struct GroupForward {
    pub frames: usize,
    /// Members plus the group node (node 0).
    pub nodes: usize,
    /// `(frames * nodes) x d` knowledge states, row `t * nodes + node`. Frame 0
    /// holds the learned initial state.
    pub states: Var,
    /// Probabilities for the student interactions listed in `student_rows`
    /// (every interaction outside frame 0), as a column.
    pub student_pred: Option<Var>,
    pub student_rows: Vec<usize>,
    pub group_pred: Option<Var>,
    pub group_rows: Vec<usize>,
    /// Graphs of the full (response-bearing) pass, one per frame.
    pub snapshots: Vec<Snapshot>,
    /// Member aggregation weights, `frames x (frames * members + 1)`.
    pub fusion_weights: Option<Var>,
    /// Retriever weights per layer and head.
    pub attention: Vec<Vec<Var>>,
}

impl GroupForward {
    pub fn state_row(&self, t: usize, node: usize) -> usize {
        t * self.nodes + node
    }
}

struct SnapshotPass {
    /// `(frames * nodes) x 2d` GCN output.
    output: Var,
    snapshots: Vec<Snapshot>,
    fusion_weights: Option<Var>,
}

/// Encoding, fusion and graph convolution for every frame at once.
fn snapshot_pass(
    tape: &mut Tape,
    p: &Bound,
    cfg: &ModelConfig,
    input: &GroupInput,
    zero_responses: bool,
) -> Result<SnapshotPass, ModelError> {
    let (frames, members, nodes) = (input.frames, input.members, input.nodes());
    let presence = input.presence();
    let students = encode_students(tape, p, input, zero_responses)?;
    let group = encode_group(tape, p, input, zero_responses)?;
    let fused = reciprocal_enhance(tape, p, cfg.ablation, frames, members, &presence, students, group)?;

    let student_nodes = tape.concat_cols(&[fused.xs, fused.zs])?;
    let group_nodes = tape.concat_cols(&[fused.xo, fused.zo])?;
    let stacked = tape.concat_rows(&[group_nodes, student_nodes])?;
    let order: Vec<usize> = (0..frames)
        .flat_map(|t| {
            (0..nodes).map(move |node| {
                if node == 0 {
                    t
                } else {
                    frames + t * members + node - 1
                }
            })
        })
        .collect();
    let features = tape.embedding_lookup(stacked, &order)?;

    let top_k = cfg.top_k_for(members);
    let values = tape.value(student_nodes);
    let width = values.cols();
    let mut snapshots = Vec::with_capacity(frames);
    for t in 0..frames {
        let block = &values.data()[t * members * width..(t + 1) * members * width];
        let block = Tensor::new(members, width, block.to_vec())?;
        let snap = build_snapshot(
            &block,
            &presence[t * members..(t + 1) * members],
            top_k,
            cfg.ablation.dyngraph,
        );
        if snap.saturated && cfg.top_k.is_some_and(|k| k >= snap.present.iter().filter(|&&x| x).count()) {
            log::warn!("frame {t}: top_k {top_k} covers every present peer");
        }
        snapshots.push(snap);
    }
    let blocks: Vec<&Tensor> = snapshots.iter().map(|s| &s.normalized).collect();
    let output = gcn_forward(tape, p, features, block_diagonal(&blocks))?;
    Ok(SnapshotPass {
        output,
        snapshots,
        fusion_weights: fused.weights,
    })
}

/// Runs the full model on one group.
///
/// The state for frame `t >= 1` attends from the frame-`t` query over the
/// snapshots of frames `< t`. In strict mode the query comes from a second
/// pass with every response encoding zeroed, so nothing observed in frame `t`
/// other than which exercises were attempted can reach its prediction.
pub fn forward_group(
    tape: &mut Tape,
    p: &Bound,
    cfg: &ModelConfig,
    input: &GroupInput,
) -> Result<GroupForward, ModelError> {
    let (frames, nodes, d) = (input.frames, input.nodes(), cfg.d);
    if frames == 0 {
        return Err(ModelError::EmptySequence);
    }
    let full = snapshot_pass(tape, p, cfg, input, false)?;
    let initial = tape.embedding_lookup(p.var(p.ids.initial_state), &vec![0; nodes])?;

    let (states, attention) = if frames == 1 {
        (initial, Vec::new())
    } else {
        let keys = tape.slice_cols(full.output, 0, d)?;
        let values = tape.slice_cols(full.output, d, 2 * d)?;
        let queries = if cfg.strict_no_leak {
            let blind = snapshot_pass(tape, p, cfg, input, true)?;
            tape.slice_cols(blind.output, 0, d)?
        } else {
            keys
        };
        let Retrieved { states, weights } =
            temporal_attention(tape, p, cfg.heads, frames, nodes, (queries, keys, values))?;
        (tape.concat_rows(&[initial, states])?, weights)
    };

    let student_rows: Vec<usize> = (0..input.student.len())
        .filter(|&i| input.student.frame[i] >= 1)
        .collect();
    let student_pred = if student_rows.is_empty() {
        None
    } else {
        let h_idx: Vec<usize> = student_rows
            .iter()
            .map(|&i| input.student.frame[i] * nodes + input.student.slot[i] + 1)
            .collect();
        let e_idx: Vec<usize> = student_rows.iter().map(|&i| input.student.exercise[i]).collect();
        let h = tape.embedding_lookup(states, &h_idx)?;
        let e = tape.embedding_lookup(p.var(p.ids.exercise_emb), &e_idx)?;
        Some(readout(tape, p, &p.ids.readout_student, h, e)?)
    };

    let group_rows: Vec<usize> = (0..input.group.len())
        .filter(|&i| input.group.frame[i] >= 1)
        .collect();
    let group_pred = if group_rows.is_empty() {
        None
    } else {
        let h_idx: Vec<usize> = group_rows.iter().map(|&i| input.group.frame[i] * nodes).collect();
        let e_idx: Vec<usize> = group_rows.iter().map(|&i| input.group.exercise[i]).collect();
        let h = tape.embedding_lookup(states, &h_idx)?;
        let e = tape.embedding_lookup(p.var(p.ids.exercise_emb), &e_idx)?;
        Some(readout(tape, p, &p.ids.readout_group, h, e)?)
    };

    Ok(GroupForward {
        frames,
        nodes,
        states,
        student_pred,
        student_rows,
        group_pred,
        group_rows,
        snapshots: full.snapshots,
        fusion_weights: full.fusion_weights,
        attention,
    })
}
