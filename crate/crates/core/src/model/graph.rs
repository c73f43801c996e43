//! Per-frame group/student graphs and the snapshot GCN.

use super::{Bound, ModelError};
use crate::numerics::{cosine, Tape, Tensor, Var};

/// One frame's graph over node 0 (the group) and nodes `1..=n` (members).
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    /// Member node features the graph was built from (`n x 2d`).
    pub features: Tensor,
    /// `n x n` pairwise similarity of member node features.
    pub relation: Tensor,
    /// Directed top-k choices `(i, j)` between member slots, before
    /// symmetrisation.
    pub selected: Vec<(usize, usize)>,
    /// Binary symmetric `(n + 1) x (n + 1)` adjacency with zero diagonal.
    pub adjacency: Tensor,
    /// `D^-1/2 (A + I) D^-1/2` with degrees of `A + I`.
    pub normalized: Tensor,
    pub present: Vec<bool>,
    /// `top_k` was at least the number of present peers, so every present
    /// member was linked to all others.
    pub saturated: bool,
}

/// Builds the graph of one frame from member node features (`n x 2d`).
///
/// Every present member links to its `top_k` most similar present peers
/// (ties go to the lower slot); links are made symmetric by OR, and the group
/// node links to every present member. Absent members stay isolated. With
/// `dynamic == false` there are no edges at all.
pub fn build_snapshot(features: &Tensor, present: &[bool], top_k: usize, dynamic: bool) -> Snapshot {
    let n = features.rows();
    let mut relation = Tensor::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            relation.set(i, j, cosine(features.row(i), features.row(j)));
        }
    }
    let mut adjacency = Tensor::zeros(n + 1, n + 1);
    let mut selected = Vec::new();
    let num_present = present.iter().filter(|&&p| p).count();
    let saturated = top_k >= num_present.saturating_sub(1) && num_present > 1;
    if dynamic {
        for i in (0..n).filter(|&i| present[i]) {
            adjacency.set(0, i + 1, 1.0);
            adjacency.set(i + 1, 0, 1.0);
            let mut peers: Vec<usize> = (0..n).filter(|&j| j != i && present[j]).collect();
            // Stable sort keeps the lower slot first among equal similarities.
            peers.sort_by(|&a, &b| relation.get(i, b).total_cmp(&relation.get(i, a)));
            for &j in peers.iter().take(top_k) {
                selected.push((i, j));
                adjacency.set(i + 1, j + 1, 1.0);
                adjacency.set(j + 1, i + 1, 1.0);
            }
        }
    }
    let normalized = normalize_adjacency(&adjacency);
    Snapshot {
        features: features.clone(),
        relation,
        selected,
        adjacency,
        normalized,
        present: present.to_vec(),
        saturated,
    }
}

/// Symmetric normalisation of `A + I` using the degrees of `A + I`, which are
/// always positive.
pub fn normalize_adjacency(adjacency: &Tensor) -> Tensor {
    let n = adjacency.rows();
    let mut with_loops = adjacency.clone();
    for i in 0..n {
        with_loops.set(i, i, adjacency.get(i, i) + 1.0);
    }
    let inv_sqrt: Vec<f64> = (0..n)
        .map(|i| 1.0 / with_loops.row(i).iter().sum::<f64>().sqrt())
        .collect();
    let mut out = with_loops;
    for i in 0..n {
        for j in 0..n {
            let v = out.get(i, j);
            if v != 0.0 {
                out.set(i, j, v * inv_sqrt[i] * inv_sqrt[j]);
            }
        }
    }
    out
}

/// Places per-frame matrices on the diagonal of one block matrix.
pub fn block_diagonal(blocks: &[&Tensor]) -> Tensor {
    let total: usize = blocks.iter().map(|b| b.rows()).sum();
    let mut out = Tensor::zeros(total, total);
    let mut offset = 0;
    for b in blocks {
        for i in 0..b.rows() {
            for j in 0..b.cols() {
                out.set(offset + i, offset + j, b.get(i, j));
            }
        }
        offset += b.rows();
    }
    out
}

/// `V_(l+1) = relu(Â V_(l) W_(l) + b_(l))` for every layer. `adjacency` is
/// the (block-diagonal) normalised adjacency over all rows of `features`.
pub fn gcn_forward(
    tape: &mut Tape,
    p: &Bound,
    features: Var,
    adjacency: Tensor,
) -> Result<Var, ModelError> {
    let adj = tape.constant(adjacency);
    let mut h = features;
    for &(w, b) in &p.ids.gcn {
        let hw = tape.matmul(h, p.var(w))?;
        let mixed = tape.matmul(adj, hw)?;
        let biased = tape.add_row(mixed, p.var(b))?;
        h = tape.relu(biased);
    }
    Ok(h)
}
