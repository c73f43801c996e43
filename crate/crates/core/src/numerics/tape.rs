//! Reverse-mode automatic differentiation over [`Tensor`]s.
//!
//! A [`Tape`] is an append-only list of nodes. Every primitive evaluates its
//! forward value eagerly and records which parents it read plus whatever it
//! needs to produce local gradients. [`Tape::backward`] walks the list once in
//! reverse, so append order is a valid topological order by construction.

use super::tensor::{matmul_nt_into, matmul_tn_into};
use super::{NumericsError, Tensor};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    Affine(Var, f64),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceCols(Var, usize),
    MeanRows(Var),
    SumRows(Var),
    SumAll(Var),
    Relu(Var),
    Sigmoid(Var),
    Exp(Var),
    Log(Var),
    Clamp(Var, f64, f64),
    MaskedSoftmax(Var),
    Cosine {
        a: Var,
        b: Var,
        a_norms: Vec<f64>,
        b_norms: Vec<f64>,
    },
    Segments(Var, Vec<Vec<usize>>),
    Transpose(Var),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient of the loss with respect to `var`; `None` if the loss does not
    /// depend on it or it was recorded without `requires_grad`.
    pub fn get(&self, var: Var) -> Option<&Tensor> {
        self.grads.get(var.0).and_then(Option::as_ref)
    }

    /// Like [`get`](Self::get) but materialises zeros for unreached leaves.
    pub fn get_or_zeros(&self, var: Var, shape: [usize; 2]) -> Tensor {
        self.get(var)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(shape[0], shape[1]))
    }
}

/// Cosine similarities are computed against `max(|a| |b|, COSINE_EPS)`.
pub const COSINE_EPS: f64 = 1e-12;

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    consumed: bool,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Clears all nodes so the tape can record a fresh computation.
    pub fn reset(&mut self) {
        self.nodes.clear();
        self.consumed = false;
    }

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    pub fn shape(&self, var: Var) -> [usize; 2] {
        self.nodes[var.0].value.shape()
    }

    /// Records a trainable leaf.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Records a leaf that never receives gradients.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    fn unary(&mut self, x: Var, op: Op, f: impl Fn(f64) -> f64) -> Var {
        let value = self.value(x).map(f);
        let rg = self.rg(&[x]);
        self.push(value, op, rg)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        let value = self.value(a).matmul(self.value(b))?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(value, Op::MatMul(a, b), rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        self.same_shape("add", a, b)?;
        let value = self.value(a).zip_map(self.value(b), |x, y| x + y);
        let rg = self.rg(&[a, b]);
        Ok(self.push(value, Op::Add(a, b), rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        self.same_shape("sub", a, b)?;
        let value = self.value(a).zip_map(self.value(b), |x, y| x - y);
        let rg = self.rg(&[a, b]);
        Ok(self.push(value, Op::Sub(a, b), rg))
    }

    /// Adds the `1 x c` row `row` to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var, NumericsError> {
        let (sa, sr) = (self.shape(a), self.shape(row));
        if sr[0] != 1 || sr[1] != sa[1] {
            return Err(NumericsError::shape("add_row", sa, sr));
        }
        let mut value = self.value(a).clone();
        let r = self.value(row).data().to_vec();
        for i in 0..sa[0] {
            for (v, b) in value.row_mut(i).iter_mut().zip(&r) {
                *v += b;
            }
        }
        let rg = self.rg(&[a, row]);
        Ok(self.push(value, Op::AddRow(a, row), rg))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        self.same_shape("mul", a, b)?;
        let value = self.value(a).zip_map(self.value(b), |x, y| x * y);
        let rg = self.rg(&[a, b]);
        Ok(self.push(value, Op::Mul(a, b), rg))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        self.affine(a, s, 0.0)
    }

    /// `s * a + shift`, elementwise.
    pub fn affine(&mut self, a: Var, s: f64, shift: f64) -> Var {
        self.unary(a, Op::Affine(a, s), |x| s * x + shift)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, NumericsError> {
        let rows = self.shape(parts[0])[0];
        for &p in parts {
            if self.shape(p)[0] != rows {
                return Err(NumericsError::shape(
                    "concat_cols",
                    self.shape(parts[0]),
                    self.shape(p),
                ));
            }
        }
        let cols: usize = parts.iter().map(|&p| self.shape(p)[1]).sum();
        let mut value = Tensor::zeros(rows, cols);
        let mut offset = 0;
        for &p in parts {
            let t = self.value(p);
            let w = t.cols();
            for r in 0..rows {
                value.row_mut(r)[offset..offset + w].copy_from_slice(t.row(r));
            }
            offset += w;
        }
        let rg = self.rg(parts);
        Ok(self.push(value, Op::ConcatCols(parts.to_vec()), rg))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var, NumericsError> {
        let cols = self.shape(parts[0])[1];
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let t = self.value(p);
            if t.cols() != cols {
                return Err(NumericsError::shape(
                    "concat_rows",
                    self.shape(parts[0]),
                    t.shape(),
                ));
            }
            rows += t.rows();
            data.extend_from_slice(t.data());
        }
        let value = Tensor::new(rows, cols, data)?;
        let rg = self.rg(parts);
        Ok(self.push(value, Op::ConcatRows(parts.to_vec()), rg))
    }

    /// Columns `start..end` of `a`.
    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var, NumericsError> {
        let sa = self.shape(a);
        if start > end || end > sa[1] {
            return Err(NumericsError::shape("slice_cols", sa, [start, end]));
        }
        let src = self.value(a);
        let mut value = Tensor::zeros(sa[0], end - start);
        for r in 0..sa[0] {
            value.row_mut(r).copy_from_slice(&src.row(r)[start..end]);
        }
        let rg = self.rg(&[a]);
        Ok(self.push(value, Op::SliceCols(a, start), rg))
    }

    /// Mean over rows, giving a `1 x c` row.
    pub fn mean_rows(&mut self, a: Var) -> Result<Var, NumericsError> {
        let sa = self.shape(a);
        if sa[0] == 0 {
            return Err(NumericsError::Empty("mean_rows"));
        }
        let src = self.value(a);
        let mut value = Tensor::zeros(1, sa[1]);
        for r in 0..sa[0] {
            for (v, x) in value.data_mut().iter_mut().zip(src.row(r)) {
                *v += x;
            }
        }
        value.scale_in_place(1.0 / sa[0] as f64);
        let rg = self.rg(&[a]);
        Ok(self.push(value, Op::MeanRows(a), rg))
    }

    /// Sum over columns, giving an `r x 1` column.
    pub fn sum_rows(&mut self, a: Var) -> Var {
        let src = self.value(a);
        let data = (0..src.rows()).map(|r| src.row(r).iter().sum()).collect();
        let value = Tensor::new(src.rows(), 1, data).expect("column shape");
        let rg = self.rg(&[a]);
        self.push(value, Op::SumRows(a), rg)
    }

    pub fn sum_all(&mut self, a: Var) -> Var {
        let value = Tensor::scalar(self.value(a).sum());
        let rg = self.rg(&[a]);
        self.push(value, Op::SumAll(a), rg)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(a, Op::Relu(a), |x| x.max(0.0))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, Op::Sigmoid(a), sigmoid)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.unary(a, Op::Exp(a), f64::exp)
    }

    pub fn log(&mut self, a: Var) -> Var {
        self.unary(a, Op::Log(a), f64::ln)
    }

    /// Clamps into `[lo, hi]`; gradient passes only strictly inside.
    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        self.unary(a, Op::Clamp(a, lo, hi), |x| x.clamp(lo, hi))
    }

    /// Row-wise softmax over entries where `mask` is true. Masked entries get
    /// weight exactly 0. `mask` is row-major with the shape of `a`.
    pub fn masked_softmax(&mut self, a: Var, mask: &[bool]) -> Result<Var, NumericsError> {
        let sa = self.shape(a);
        if mask.len() != sa[0] * sa[1] {
            return Err(NumericsError::shape("masked_softmax", sa, [mask.len(), 1]));
        }
        let src = self.value(a);
        let mut value = Tensor::zeros(sa[0], sa[1]);
        for r in 0..sa[0] {
            let row_mask = &mask[r * sa[1]..(r + 1) * sa[1]];
            let scores = src.row(r);
            let max = scores
                .iter()
                .zip(row_mask)
                .filter(|(_, &m)| m)
                .map(|(&s, _)| s)
                .fold(f64::NEG_INFINITY, f64::max);
            if max == f64::NEG_INFINITY {
                return Err(NumericsError::FullyMasked { row: r });
            }
            let out = value.row_mut(r);
            let mut total = 0.0;
            for ((o, &s), &m) in out.iter_mut().zip(scores).zip(row_mask) {
                if m {
                    *o = (s - max).exp();
                    total += *o;
                }
            }
            for o in out.iter_mut() {
                *o /= total;
            }
        }
        let rg = self.rg(&[a]);
        Ok(self.push(value, Op::MaskedSoftmax(a), rg))
    }

    /// Pairwise cosine similarity between rows of `a` (`n x d`) and rows of
    /// `b` (`m x d`), giving `n x m`.
    pub fn cosine_similarity(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa[1] != sb[1] {
            return Err(NumericsError::shape("cosine_similarity", sa, sb));
        }
        let (ta, tb) = (self.value(a), self.value(b));
        let a_norms = row_norms(ta);
        let b_norms = row_norms(tb);
        let mut value = Tensor::zeros(sa[0], sb[0]);
        matmul_nt_into(ta.data(), tb.data(), value.data_mut(), sa[0], sa[1], sb[0]);
        for i in 0..sa[0] {
            for j in 0..sb[0] {
                let denom = (a_norms[i] * b_norms[j]).max(COSINE_EPS);
                let v = value.get(i, j) / denom;
                value.set(i, j, v);
            }
        }
        let rg = self.rg(&[a, b]);
        Ok(self.push(
            value,
            Op::Cosine {
                a,
                b,
                a_norms,
                b_norms,
            },
            rg,
        ))
    }

    /// Output row `i` is the mean of the rows of `src` listed in
    /// `segments[i]`; an empty segment yields a zero row.
    pub fn segment_mean(
        &mut self,
        src: Var,
        segments: Vec<Vec<usize>>,
    ) -> Result<Var, NumericsError> {
        let s = self.shape(src);
        let table = self.value(src);
        let mut value = Tensor::zeros(segments.len(), s[1]);
        for (i, seg) in segments.iter().enumerate() {
            if seg.is_empty() {
                continue;
            }
            let out = value.row_mut(i);
            for &idx in seg {
                if idx >= s[0] {
                    return Err(NumericsError::IndexOutOfRange {
                        index: idx,
                        rows: s[0],
                    });
                }
                for (o, x) in out.iter_mut().zip(table.row(idx)) {
                    *o += x;
                }
            }
            let inv = 1.0 / seg.len() as f64;
            out.iter_mut().for_each(|o| *o *= inv);
        }
        let rg = self.rg(&[src]);
        Ok(self.push(value, Op::Segments(src, segments), rg))
    }

    /// Row gather: output row `i` is `table[indices[i]]`.
    pub fn embedding_lookup(&mut self, table: Var, indices: &[usize]) -> Result<Var, NumericsError> {
        self.segment_mean(table, indices.iter().map(|&i| vec![i]).collect())
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let value = self.value(a).transpose();
        let rg = self.rg(&[a]);
        self.push(value, Op::Transpose(a), rg)
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<(), NumericsError> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(NumericsError::shape(op, sa, sb));
        }
        Ok(())
    }

    /// Back-propagates from the scalar `loss`. A tape can be differentiated
    /// once; call [`reset`](Self::reset) before recording the next step.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients, NumericsError> {
        if self.consumed {
            return Err(NumericsError::BackwardTwice);
        }
        if self.shape(loss) != [1, 1] {
            return Err(NumericsError::NonScalarLoss(self.shape(loss)));
        }
        self.consumed = true;
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::scalar(1.0));

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else {
                continue;
            };
            self.propagate(idx, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn accumulate(&self, grads: &mut [Option<Tensor>], var: Var, g: Tensor) {
        if !self.nodes[var.0].requires_grad {
            return;
        }
        match &mut grads[var.0] {
            Some(existing) => existing.add_assign(&g),
            slot @ None => *slot = Some(g),
        }
    }

    fn propagate(&self, idx: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let out = &self.nodes[idx].value;
        match &self.nodes[idx].op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let (m, k, n) = (ta.rows(), ta.cols(), tb.cols());
                if self.nodes[a.0].requires_grad {
                    let mut ga = Tensor::zeros(m, k);
                    matmul_nt_into(g.data(), tb.data(), ga.data_mut(), m, n, k);
                    self.accumulate(grads, *a, ga);
                }
                if self.nodes[b.0].requires_grad {
                    let mut gb = Tensor::zeros(k, n);
                    matmul_tn_into(ta.data(), g.data(), gb.data_mut(), m, k, n);
                    self.accumulate(grads, *b, gb);
                }
            }
            Op::Add(a, b) => {
                self.accumulate(grads, *a, g.clone());
                self.accumulate(grads, *b, g.clone());
            }
            Op::Sub(a, b) => {
                self.accumulate(grads, *a, g.clone());
                self.accumulate(grads, *b, g.map(|v| -v));
            }
            Op::AddRow(a, row) => {
                self.accumulate(grads, *a, g.clone());
                if self.nodes[row.0].requires_grad {
                    let mut gr = Tensor::zeros(1, g.cols());
                    for r in 0..g.rows() {
                        for (o, v) in gr.data_mut().iter_mut().zip(g.row(r)) {
                            *o += v;
                        }
                    }
                    self.accumulate(grads, *row, gr);
                }
            }
            Op::Mul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                if self.nodes[a.0].requires_grad {
                    self.accumulate(grads, *a, g.zip_map(tb, |x, y| x * y));
                }
                if self.nodes[b.0].requires_grad {
                    self.accumulate(grads, *b, g.zip_map(ta, |x, y| x * y));
                }
            }
            Op::Affine(a, s) => {
                let s = *s;
                self.accumulate(grads, *a, g.map(|v| v * s));
            }
            Op::ConcatCols(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let w = self.shape(p)[1];
                    if self.nodes[p.0].requires_grad {
                        let mut gp = Tensor::zeros(g.rows(), w);
                        for r in 0..g.rows() {
                            gp.row_mut(r).copy_from_slice(&g.row(r)[offset..offset + w]);
                        }
                        self.accumulate(grads, p, gp);
                    }
                    offset += w;
                }
            }
            Op::ConcatRows(parts) => {
                let cols = g.cols();
                let mut offset = 0;
                for &p in parts {
                    let h = self.shape(p)[0];
                    if self.nodes[p.0].requires_grad {
                        let slice = g.data()[offset * cols..(offset + h) * cols].to_vec();
                        self.accumulate(grads, p, Tensor::new(h, cols, slice).expect("slice"));
                    }
                    offset += h;
                }
            }
            Op::SliceCols(a, start) => {
                let sa = self.shape(*a);
                let mut ga = Tensor::zeros(sa[0], sa[1]);
                for r in 0..sa[0] {
                    ga.row_mut(r)[*start..*start + g.cols()].copy_from_slice(g.row(r));
                }
                self.accumulate(grads, *a, ga);
            }
            Op::MeanRows(a) => {
                let sa = self.shape(*a);
                let inv = 1.0 / sa[0] as f64;
                let mut ga = Tensor::zeros(sa[0], sa[1]);
                for r in 0..sa[0] {
                    for (o, v) in ga.row_mut(r).iter_mut().zip(g.data()) {
                        *o = v * inv;
                    }
                }
                self.accumulate(grads, *a, ga);
            }
            Op::SumRows(a) => {
                let sa = self.shape(*a);
                let mut ga = Tensor::zeros(sa[0], sa[1]);
                for r in 0..sa[0] {
                    let gv = g.data()[r];
                    ga.row_mut(r).iter_mut().for_each(|o| *o = gv);
                }
                self.accumulate(grads, *a, ga);
            }
            Op::SumAll(a) => {
                let sa = self.shape(*a);
                self.accumulate(grads, *a, Tensor::filled(sa[0], sa[1], g.item()));
            }
            Op::Relu(a) => {
                let ta = self.value(*a);
                self.accumulate(grads, *a, g.zip_map(ta, |gv, x| if x > 0.0 { gv } else { 0.0 }));
            }
            Op::Sigmoid(a) => {
                self.accumulate(grads, *a, g.zip_map(out, |gv, y| gv * y * (1.0 - y)));
            }
            Op::Exp(a) => {
                self.accumulate(grads, *a, g.zip_map(out, |gv, y| gv * y));
            }
            Op::Log(a) => {
                let ta = self.value(*a);
                self.accumulate(grads, *a, g.zip_map(ta, |gv, x| gv / x));
            }
            Op::Clamp(a, lo, hi) => {
                let ta = self.value(*a);
                let (lo, hi) = (*lo, *hi);
                self.accumulate(
                    grads,
                    *a,
                    g.zip_map(ta, |gv, x| if x > lo && x < hi { gv } else { 0.0 }),
                );
            }
            Op::MaskedSoftmax(a) => {
                // dL/ds_j = y_j (g_j - sum_k g_k y_k); masked y_j = 0 kills them.
                let mut ga = Tensor::zeros(out.rows(), out.cols());
                for r in 0..out.rows() {
                    let y = out.row(r);
                    let gr = g.row(r);
                    let dot: f64 = y.iter().zip(gr).map(|(a, b)| a * b).sum();
                    for ((o, &yj), &gj) in ga.row_mut(r).iter_mut().zip(y).zip(gr) {
                        *o = yj * (gj - dot);
                    }
                }
                self.accumulate(grads, *a, ga);
            }
            Op::Cosine {
                a,
                b,
                a_norms,
                b_norms,
            } => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let (n, m, d) = (ta.rows(), tb.rows(), ta.cols());
                let mut ga = Tensor::zeros(n, d);
                let mut gb = Tensor::zeros(m, d);
                for i in 0..n {
                    for j in 0..m {
                        let gij = g.get(i, j);
                        if gij == 0.0 {
                            continue;
                        }
                        let prod = a_norms[i] * b_norms[j];
                        let c = out.get(i, j);
                        if prod <= COSINE_EPS {
                            // Below the floor the value is dot / eps, linear in each input.
                            let inv = 1.0 / COSINE_EPS;
                            for k in 0..d {
                                ga.row_mut(i)[k] += gij * tb.get(j, k) * inv;
                                gb.row_mut(j)[k] += gij * ta.get(i, k) * inv;
                            }
                            continue;
                        }
                        let inv = 1.0 / prod;
                        let ai2 = a_norms[i] * a_norms[i];
                        let bj2 = b_norms[j] * b_norms[j];
                        for k in 0..d {
                            let (ak, bk) = (ta.get(i, k), tb.get(j, k));
                            ga.row_mut(i)[k] += gij * (bk * inv - c * ak / ai2);
                            gb.row_mut(j)[k] += gij * (ak * inv - c * bk / bj2);
                        }
                    }
                }
                if self.nodes[a.0].requires_grad {
                    self.accumulate(grads, *a, ga);
                }
                if self.nodes[b.0].requires_grad {
                    self.accumulate(grads, *b, gb);
                }
            }
            Op::Segments(src, segments) => {
                let s = self.shape(*src);
                let mut gs = Tensor::zeros(s[0], s[1]);
                for (i, seg) in segments.iter().enumerate() {
                    if seg.is_empty() {
                        continue;
                    }
                    let inv = 1.0 / seg.len() as f64;
                    for &idx in seg {
                        for (o, v) in gs.row_mut(idx).iter_mut().zip(g.row(i)) {
                            *o += v * inv;
                        }
                    }
                }
                self.accumulate(grads, *src, gs);
            }
            Op::Transpose(a) => {
                self.accumulate(grads, *a, g.transpose());
            }
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn row_norms(t: &Tensor) -> Vec<f64> {
    (0..t.rows())
        .map(|r| t.row(r).iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect()
}

/// Cosine similarity of two plain slices, with the same floor as the tape op.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    dot / (na * nb).max(COSINE_EPS)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(tape: &mut Tape, v: &[f64]) -> Var {
        tape.param(Tensor::row_vector(v))
    }

    #[test]
    fn masked_softmax_uniform_scores() {
        let mut tape = Tape::new();
        let s = row(&mut tape, &[1.0, 1.0, 1.0]);
        let y = tape.masked_softmax(s, &[true; 3]).unwrap();
        for &v in tape.value(y).data() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn masked_softmax_masked_entries_are_exactly_zero() {
        let mut tape = Tape::new();
        let s = row(&mut tape, &[0.3, 9.0, -2.0]);
        let y = tape.masked_softmax(s, &[true, false, true]).unwrap();
        let v = tape.value(y).data();
        assert_eq!(v[1], 0.0);
        assert!((v[0] + v[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn masked_softmax_fully_masked_row_errors() {
        let mut tape = Tape::new();
        let s = tape.param(Tensor::from_rows(&[vec![1.0, 2.0], vec![0.0, 0.0]]).unwrap());
        let err = tape
            .masked_softmax(s, &[true, true, false, false])
            .unwrap_err();
        assert!(matches!(err, NumericsError::FullyMasked { row: 1 }));
    }

    #[test]
    fn cosine_self_similarity_is_one() {
        let mut tape = Tape::new();
        let v = row(&mut tape, &[0.3, -4.0, 2.5]);
        let c = tape.cosine_similarity(v, v).unwrap();
        assert!((tape.value(c).item() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn backward_sum_of_squares() {
        let mut tape = Tape::new();
        let w = row(&mut tape, &[1.0, 2.0]);
        let sq = tape.mul(w, w).unwrap();
        let loss = tape.sum_all(sq);
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.get(w).unwrap().data(), &[2.0, 4.0]);
        assert_eq!(grads.get(loss).unwrap().item(), 1.0);
    }

    #[test]
    fn backward_independent_param_gets_no_gradient() {
        let mut tape = Tape::new();
        let w = row(&mut tape, &[1.0, 2.0]);
        let u = row(&mut tape, &[3.0]);
        let loss = tape.sum_all(u);
        let grads = tape.backward(loss).unwrap();
        assert!(grads.get(w).is_none());
        assert_eq!(grads.get_or_zeros(w, [1, 2]).data(), &[0.0, 0.0]);
    }

    #[test]
    fn backward_twice_is_an_error() {
        let mut tape = Tape::new();
        let w = row(&mut tape, &[1.0]);
        let loss = tape.sum_all(w);
        tape.backward(loss).unwrap();
        assert!(matches!(
            tape.backward(loss),
            Err(NumericsError::BackwardTwice)
        ));
        tape.reset();
        let w = row(&mut tape, &[1.0]);
        let loss = tape.sum_all(w);
        assert!(tape.backward(loss).is_ok());
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let mut tape = Tape::new();
        let w = row(&mut tape, &[1.0, 2.0]);
        assert!(matches!(
            tape.backward(w),
            Err(NumericsError::NonScalarLoss([1, 2]))
        ));
    }

    #[test]
    fn gradients_accumulate_across_uses() {
        let mut tape = Tape::new();
        let w = row(&mut tape, &[3.0]);
        let a = tape.scale(w, 2.0);
        let b = tape.add(a, w).unwrap();
        let loss = tape.sum_all(b);
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.get(w).unwrap().item(), 3.0);
    }

    #[test]
    fn segment_mean_empty_segment_is_zero_row() {
        let mut tape = Tape::new();
        let t = tape.param(Tensor::from_rows(&[vec![1.0, 3.0], vec![3.0, 1.0]]).unwrap());
        let m = tape.segment_mean(t, vec![vec![0, 1], vec![], vec![1]]).unwrap();
        assert_eq!(tape.value(m).data(), &[2.0, 2.0, 0.0, 0.0, 3.0, 1.0]);
    }

    #[test]
    fn add_row_shape_checked() {
        let mut tape = Tape::new();
        let a = tape.param(Tensor::zeros(3, 2));
        let r = tape.param(Tensor::zeros(1, 3));
        let err = tape.add_row(a, r).unwrap_err().to_string();
        assert!(err.contains("[3, 2]") && err.contains("[1, 3]"), "{err}");
    }
}
