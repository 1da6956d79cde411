//! Reverse-mode differentiation on an append-only tape.
//!
//! Every forward pass records its operations as nodes in creation order;
//! [`Tape::backward`] walks them in reverse and accumulates adjoints. Leaves
//! either borrow caller-owned tensors (parameters, features) or own small
//! constants. A node's gradient is complete before it is processed because
//! consumers always carry higher indices.
//!
//! All op outputs are checked for finiteness; NaN or infinity anywhere is a
//! contract violation reported as [`TensorError::NonFinite`].

use super::Tensor;
use crate::error::TensorError;
use crate::scalar::Scalar;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ValueId(usize);

impl ValueId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Pointwise nonlinearity selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
    Sigmoid,
}

enum Payload<'p, T> {
    Owned(Tensor<T>),
    Borrowed(&'p Tensor<T>),
}

impl<'p, T> Payload<'p, T> {
    fn tensor(&self) -> &Tensor<T> {
        match self {
            Payload::Owned(t) => t,
            Payload::Borrowed(t) => t,
        }
    }
}

enum Op<'p, T: Scalar> {
    Leaf,
    MatMul {
        a: ValueId,
        b: ValueId,
    },
    Transpose {
        x: ValueId,
    },
    Add {
        a: ValueId,
        b: ValueId,
    },
    Mul {
        a: ValueId,
        b: ValueId,
    },
    Scale {
        x: ValueId,
        factor: T,
    },
    Activate {
        x: ValueId,
        kind: Activation,
    },
    /// Vector softmax over entries with `mask[i] != 0`; masked outputs are
    /// exactly zero and receive no gradient.
    MaskedSoftmax {
        x: ValueId,
        mask: Vec<u8>,
    },
    /// Independent softmax over each row of a matrix (no mask).
    SoftmaxRows {
        x: ValueId,
    },
    /// Per-row maximum over columns with `mask[j] != 0`. The forward pass
    /// saves one argmax per row (the first maximal live column) and routes
    /// the whole gradient there.
    MaxColsMasked {
        x: ValueId,
        argmax: Vec<usize>,
    },
    /// Sum over rows with `mask[i] != 0`, yielding one row.
    RowSumMasked {
        x: ValueId,
        mask: Vec<u8>,
    },
    /// `out[v] = x[v] + sum over x[u] for u in adjacency[v]` for the first
    /// `n_live` rows; remaining rows are forced to zero.
    NeighborSum {
        x: ValueId,
        adjacency: &'p [Vec<usize>],
        n_live: usize,
    },
    /// Row-indexed matrix product: row `i` of the output is
    /// `x[i] * mats[select[i]]` for `i < n_live`, zero beyond.
    SelectMatmul {
        x: ValueId,
        mats: Vec<ValueId>,
        select: Vec<usize>,
        n_live: usize,
    },
    Concat {
        a: ValueId,
        b: ValueId,
    },
    Reshape {
        x: ValueId,
    },
    /// Binary cross-entropy of a single probability against a 0/1 label,
    /// with the probability clamped away from {0, 1} before the logs.
    Bce {
        p: ValueId,
        label: T,
    },
}

struct Node<'p, T: Scalar> {
    value: Payload<'p, T>,
    op: Op<'p, T>,
}

pub struct Tape<'p, T: Scalar> {
    nodes: Vec<Node<'p, T>>,
    grads: Vec<Option<Tensor<T>>>,
}

impl<'p, T: Scalar> Default for Tape<'p, T> {
    fn default() -> Self {
        Self::new()
    }
}

fn shape_err(op: &'static str, detail: String) -> TensorError {
    TensorError::ShapeMismatch { op, detail }
}

fn require_rank2(op: &'static str, t: &Tensor<impl Scalar>) -> Result<(usize, usize), TensorError> {
    if t.shape().len() != 2 {
        return Err(shape_err(
            op,
            format!("expected a matrix, got shape {:?}", t.shape()),
        ));
    }
    Ok((t.shape()[0], t.shape()[1]))
}

fn require_rank1(op: &'static str, t: &Tensor<impl Scalar>) -> Result<usize, TensorError> {
    if t.shape().len() != 1 {
        return Err(shape_err(
            op,
            format!("expected a vector, got shape {:?}", t.shape()),
        ));
    }
    Ok(t.shape()[0])
}

/// `[m,k] * [k,n] -> [m,n]`, row-major, i-k-j loop order.
fn mm<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>, m: usize, k: usize, n: usize) -> Tensor<T> {
    let mut out = Tensor::zeros(&[m, n]);
    let ad = a.data();
    let bd = b.data();
    let od = out.data_mut();
    for i in 0..m {
        let out_row = &mut od[i * n..(i + 1) * n];
        for kk in 0..k {
            let aik = ad[i * k + kk];
            if aik == T::zero() {
                continue;
            }
            let b_row = &bd[kk * n..(kk + 1) * n];
            for (o, bv) in out_row.iter_mut().zip(b_row.iter()) {
                *o = *o + aik * *bv;
            }
        }
    }
    out
}

/// `g [m,n] * b^T [n,k] -> [m,k]` (rows of g dotted with rows of b).
fn mm_nt<T: Scalar>(g: &Tensor<T>, b: &Tensor<T>, m: usize, k: usize, n: usize) -> Tensor<T> {
    let mut out = Tensor::zeros(&[m, k]);
    let gd = g.data();
    let bd = b.data();
    let od = out.data_mut();
    for i in 0..m {
        let g_row = &gd[i * n..(i + 1) * n];
        let out_row = &mut od[i * k..(i + 1) * k];
        for (kk, o) in out_row.iter_mut().enumerate() {
            let b_row = &bd[kk * n..(kk + 1) * n];
            let mut acc = T::zero();
            for (gv, bv) in g_row.iter().zip(b_row.iter()) {
                acc = acc + *gv * *bv;
            }
            *o = acc;
        }
    }
    out
}

/// `a^T [k,m] * g [m,n] -> [k,n]`.
fn mm_tn<T: Scalar>(a: &Tensor<T>, g: &Tensor<T>, m: usize, k: usize, n: usize) -> Tensor<T> {
    let mut out = Tensor::zeros(&[k, n]);
    let ad = a.data();
    let gd = g.data();
    let od = out.data_mut();
    for i in 0..m {
        let g_row = &gd[i * n..(i + 1) * n];
        for kk in 0..k {
            let aik = ad[i * k + kk];
            if aik == T::zero() {
                continue;
            }
            let out_row = &mut od[kk * n..(kk + 1) * n];
            for (o, gv) in out_row.iter_mut().zip(g_row.iter()) {
                *o = *o + aik * *gv;
            }
        }
    }
    out
}

/// Numerically stable sigmoid; finite for all finite inputs.
fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

impl<'p, T: Scalar> Tape<'p, T> {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            grads: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: ValueId) -> &Tensor<T> {
        self.nodes[id.0].value.tensor()
    }

    /// Gradient of the last `backward` root with respect to `id`, if the
    /// value participated in the computation.
    pub fn grad(&self, id: ValueId) -> Option<&Tensor<T>> {
        self.grads.get(id.0).and_then(|g| g.as_ref())
    }

    /// Like [`Tape::grad`] but materializes zeros for unreached values, so
    /// every parameter yields a gradient tensor of its own shape.
    pub fn grad_cloned_or_zeros(&self, id: ValueId) -> Tensor<T> {
        match self.grad(id) {
            Some(g) => g.clone(),
            None => Tensor::zeros(self.value(id).shape()),
        }
    }

    fn push(
        &mut self,
        op_name: &'static str,
        value: Payload<'p, T>,
        op: Op<'p, T>,
    ) -> Result<ValueId, TensorError> {
        if !value.tensor().all_finite() {
            return Err(TensorError::NonFinite { op: op_name });
        }
        self.nodes.push(Node { value, op });
        Ok(ValueId(self.nodes.len() - 1))
    }

    /// Records a borrowed leaf (parameters, feature matrices).
    pub fn input(&mut self, tensor: &'p Tensor<T>) -> Result<ValueId, TensorError> {
        self.push("input", Payload::Borrowed(tensor), Op::Leaf)
    }

    /// Records an owned leaf.
    pub fn constant(&mut self, tensor: Tensor<T>) -> Result<ValueId, TensorError> {
        self.push("constant", Payload::Owned(tensor), Op::Leaf)
    }

    pub fn matmul(&mut self, a: ValueId, b: ValueId) -> Result<ValueId, TensorError> {
        let (m, k) = require_rank2("matmul", self.value(a))?;
        let (k2, n) = require_rank2("matmul", self.value(b))?;
        if k != k2 {
            return Err(shape_err(
                "matmul",
                format!("inner dimensions differ: [{m},{k}] vs [{k2},{n}]"),
            ));
        }
        let out = mm(self.value(a), self.value(b), m, k, n);
        self.push("matmul", Payload::Owned(out), Op::MatMul { a, b })
    }

    pub fn transpose(&mut self, x: ValueId) -> Result<ValueId, TensorError> {
        let (m, n) = require_rank2("transpose", self.value(x))?;
        let xin = self.value(x);
        let mut out = Tensor::zeros(&[n, m]);
        for i in 0..m {
            for j in 0..n {
                out.set2(j, i, xin.at2(i, j));
            }
        }
        self.push("transpose", Payload::Owned(out), Op::Transpose { x })
    }

    pub fn add(&mut self, a: ValueId, b: ValueId) -> Result<ValueId, TensorError> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(shape_err(
                "add",
                format!("{:?} vs {:?}", self.value(a).shape(), self.value(b).shape()),
            ));
        }
        let mut out = self.value(a).clone();
        out.add_in_place(self.value(b));
        self.push("add", Payload::Owned(out), Op::Add { a, b })
    }

    pub fn mul(&mut self, a: ValueId, b: ValueId) -> Result<ValueId, TensorError> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(shape_err(
                "mul",
                format!("{:?} vs {:?}", self.value(a).shape(), self.value(b).shape()),
            ));
        }
        let shape = self.value(a).shape().to_vec();
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data().iter())
            .map(|(x, y)| *x * *y)
            .collect();
        let out = Tensor::from_vec(&shape, data)?;
        self.push("mul", Payload::Owned(out), Op::Mul { a, b })
    }

    pub fn scale(&mut self, x: ValueId, factor: T) -> Result<ValueId, TensorError> {
        let mut out = self.value(x).clone();
        out.scale_in_place(factor);
        self.push("scale", Payload::Owned(out), Op::Scale { x, factor })
    }

    pub fn activation(&mut self, kind: Activation, x: ValueId) -> Result<ValueId, TensorError> {
        let shape = self.value(x).shape().to_vec();
        let data = self
            .value(x)
            .data()
            .iter()
            .map(|&v| match kind {
                Activation::Relu => v.max(T::zero()),
                Activation::Tanh => v.tanh(),
                Activation::Sigmoid => sigmoid(v),
            })
            .collect();
        let out = Tensor::from_vec(&shape, data)?;
        self.push("activation", Payload::Owned(out), Op::Activate { x, kind })
    }

    /// Softmax over the live entries of a vector. Live entries are those
    /// with `mask[i] != 0`; masked outputs are exactly `0.0`. The maximum
    /// live logit is subtracted before exponentiation for stability.
    pub fn masked_softmax(&mut self, x: ValueId, mask: &[u8]) -> Result<ValueId, TensorError> {
        let n = require_rank1("masked_softmax", self.value(x))?;
        if mask.len() != n {
            return Err(shape_err(
                "masked_softmax",
                format!("vector of {n} entries with mask of {}", mask.len()),
            ));
        }
        let xin = self.value(x).data();
        let mut max = T::neg_infinity();
        for (v, m) in xin.iter().zip(mask.iter()) {
            if *m != 0 && *v > max {
                max = *v;
            }
        }
        if max == T::neg_infinity() {
            return Err(TensorError::AllMasked {
                op: "masked_softmax",
            });
        }
        let mut out = vec![T::zero(); n];
        let mut total = T::zero();
        for i in 0..n {
            if mask[i] != 0 {
                let e = (xin[i] - max).exp();
                out[i] = e;
                total = total + e;
            }
        }
        for (o, m) in out.iter_mut().zip(mask.iter()) {
            if *m != 0 {
                *o = *o / total;
            }
        }
        self.push(
            "masked_softmax",
            Payload::Owned(Tensor::vector(out)),
            Op::MaskedSoftmax {
                x,
                mask: mask.to_vec(),
            },
        )
    }

    /// Row-wise softmax of a matrix with every column live.
    pub fn softmax_rows(&mut self, x: ValueId) -> Result<ValueId, TensorError> {
        let (m, n) = require_rank2("softmax_rows", self.value(x))?;
        if n == 0 {
            return Err(TensorError::AllMasked { op: "softmax_rows" });
        }
        let xin = self.value(x).data();
        let mut data = vec![T::zero(); m * n];
        for i in 0..m {
            let row = &xin[i * n..(i + 1) * n];
            let max = row.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
            let mut total = T::zero();
            for j in 0..n {
                let e = (row[j] - max).exp();
                data[i * n + j] = e;
                total = total + e;
            }
            for v in &mut data[i * n..(i + 1) * n] {
                *v = *v / total;
            }
        }
        let out = Tensor::from_vec(&[m, n], data)?;
        self.push("softmax_rows", Payload::Owned(out), Op::SoftmaxRows { x })
    }

    /// Per-row maximum over live columns. Ties resolve to the first maximal
    /// live column, which also receives the full gradient.
    pub fn max_cols_masked(&mut self, x: ValueId, col_mask: &[u8]) -> Result<ValueId, TensorError> {
        let (m, n) = require_rank2("max_cols_masked", self.value(x))?;
        if col_mask.len() != n {
            return Err(shape_err(
                "max_cols_masked",
                format!("matrix with {n} columns, mask of {}", col_mask.len()),
            ));
        }
        if col_mask.iter().all(|&m| m == 0) {
            return Err(TensorError::AllMasked {
                op: "max_cols_masked",
            });
        }
        let xin = self.value(x);
        let mut out = vec![T::zero(); m];
        let mut argmax = vec![0usize; m];
        for i in 0..m {
            let mut best = T::neg_infinity();
            let mut best_j = usize::MAX;
            for (j, &live) in col_mask.iter().enumerate() {
                if live != 0 {
                    let v = xin.at2(i, j);
                    if v > best {
                        best = v;
                        best_j = j;
                    }
                }
            }
            out[i] = best;
            argmax[i] = best_j;
        }
        self.push(
            "max_cols_masked",
            Payload::Owned(Tensor::vector(out)),
            Op::MaxColsMasked { x, argmax },
        )
    }

    /// Sum of the live rows of a matrix, as a vector of column totals.
    pub fn row_sum_masked(&mut self, x: ValueId, row_mask: &[u8]) -> Result<ValueId, TensorError> {
        let (m, n) = require_rank2("row_sum_masked", self.value(x))?;
        if row_mask.len() != m {
            return Err(shape_err(
                "row_sum_masked",
                format!("matrix with {m} rows, mask of {}", row_mask.len()),
            ));
        }
        let xin = self.value(x).data();
        let mut out = vec![T::zero(); n];
        for i in 0..m {
            if row_mask[i] != 0 {
                for (o, v) in out.iter_mut().zip(&xin[i * n..(i + 1) * n]) {
                    *o = *o + *v;
                }
            }
        }
        self.push(
            "row_sum_masked",
            Payload::Owned(Tensor::vector(out)),
            Op::RowSumMasked {
                x,
                mask: row_mask.to_vec(),
            },
        )
    }

    /// Self-plus-neighbor aggregation over an undirected adjacency list.
    /// Rows at or beyond `n_live` are forced to zero so padding can never
    /// leak into live rows.
    pub fn neighbor_sum(
        &mut self,
        x: ValueId,
        adjacency: &'p [Vec<usize>],
        n_live: usize,
    ) -> Result<ValueId, TensorError> {
        let (m, n) = require_rank2("neighbor_sum", self.value(x))?;
        if n_live > m || n_live > adjacency.len() {
            return Err(shape_err(
                "neighbor_sum",
                format!(
                    "{n_live} live rows for matrix with {m} rows, adjacency of {}",
                    adjacency.len()
                ),
            ));
        }
        for (v, nbrs) in adjacency.iter().enumerate().take(n_live) {
            for &u in nbrs {
                if u >= n_live {
                    return Err(TensorError::InvalidArgument {
                        op: "neighbor_sum",
                        detail: format!(
                            "atom {v} lists neighbor {u} outside the {n_live} live rows"
                        ),
                    });
                }
            }
        }
        let xin = self.value(x).data();
        let mut data = vec![T::zero(); m * n];
        for v in 0..n_live {
            let row = &mut data[v * n..(v + 1) * n];
            row.copy_from_slice(&xin[v * n..(v + 1) * n]);
            for &u in &adjacency[v] {
                for (o, w) in row.iter_mut().zip(&xin[u * n..(u + 1) * n]) {
                    *o = *o + *w;
                }
            }
        }
        let out = Tensor::from_vec(&[m, n], data)?;
        self.push(
            "neighbor_sum",
            Payload::Owned(out),
            Op::NeighborSum {
                x,
                adjacency,
                n_live,
            },
        )
    }

    /// Multiplies each live row of `x` by the matrix chosen for it, e.g. a
    /// weight bank indexed by node degree. Rows at or beyond `n_live` are
    /// zero. All matrices in `mats` must share one shape.
    pub fn select_matmul(
        &mut self,
        x: ValueId,
        mats: &[ValueId],
        select: &[usize],
        n_live: usize,
    ) -> Result<ValueId, TensorError> {
        let (m, k) = require_rank2("select_matmul", self.value(x))?;
        if mats.is_empty() {
            return Err(TensorError::InvalidArgument {
                op: "select_matmul",
                detail: "empty matrix bank".to_string(),
            });
        }
        let (k2, n) = require_rank2("select_matmul", self.value(mats[0]))?;
        if k != k2 {
            return Err(shape_err(
                "select_matmul",
                format!("rows of [{m},{k}] cannot multiply [{k2},{n}] bank entries"),
            ));
        }
        for &mid in &mats[1..] {
            let s = self.value(mid).shape();
            if s != [k2, n] {
                return Err(shape_err(
                    "select_matmul",
                    format!("bank entries disagree: [{k2},{n}] vs {s:?}"),
                ));
            }
        }
        if n_live > m || select.len() < n_live {
            return Err(shape_err(
                "select_matmul",
                format!(
                    "{n_live} live rows for matrix with {m} rows, selector of {}",
                    select.len()
                ),
            ));
        }
        for (i, &s) in select.iter().enumerate().take(n_live) {
            if s >= mats.len() {
                return Err(TensorError::InvalidArgument {
                    op: "select_matmul",
                    detail: format!("row {i} selects bank entry {s} of {}", mats.len()),
                });
            }
        }
        let mut data = vec![T::zero(); m * n];
        {
            let xin = self.value(x).data();
            for i in 0..n_live {
                let w = self.value(mats[select[i]]).data();
                let x_row = &xin[i * k..(i + 1) * k];
                let out_row = &mut data[i * n..(i + 1) * n];
                for (c, &xc) in x_row.iter().enumerate() {
                    if xc == T::zero() {
                        continue;
                    }
                    for (o, wv) in out_row.iter_mut().zip(&w[c * n..(c + 1) * n]) {
                        *o = *o + xc * *wv;
                    }
                }
            }
        }
        let out = Tensor::from_vec(&[m, n], data)?;
        self.push(
            "select_matmul",
            Payload::Owned(out),
            Op::SelectMatmul {
                x,
                mats: mats.to_vec(),
                select: select[..n_live].to_vec(),
                n_live,
            },
        )
    }

    pub fn concat(&mut self, a: ValueId, b: ValueId) -> Result<ValueId, TensorError> {
        let na = require_rank1("concat", self.value(a))?;
        let _nb = require_rank1("concat", self.value(b))?;
        let _ = na;
        let mut data = self.value(a).data().to_vec();
        data.extend_from_slice(self.value(b).data());
        self.push(
            "concat",
            Payload::Owned(Tensor::vector(data)),
            Op::Concat { a, b },
        )
    }

    pub fn reshape(&mut self, x: ValueId, new_shape: &[usize]) -> Result<ValueId, TensorError> {
        let len: usize = new_shape.iter().product();
        if len != self.value(x).len() {
            return Err(shape_err(
                "reshape",
                format!(
                    "{:?} cannot reshape to {new_shape:?}",
                    self.value(x).shape()
                ),
            ));
        }
        let out = Tensor::from_vec(new_shape, self.value(x).data().to_vec())?;
        self.push("reshape", Payload::Owned(out), Op::Reshape { x })
    }

    /// Binary cross-entropy of a single-element probability tensor against a
    /// 0/1 label. The probability is clamped to `[c, 1-c]` with
    /// `c = max(1e-12, machine epsilon)` before taking logs, so the loss is
    /// finite for any probability in `[0, 1]`.
    pub fn bce_loss(&mut self, p: ValueId, label: T) -> Result<ValueId, TensorError> {
        if self.value(p).len() != 1 {
            return Err(shape_err(
                "bce_loss",
                format!(
                    "expected a single probability, got shape {:?}",
                    self.value(p).shape()
                ),
            ));
        }
        let clamp = T::from_f64(1e-12).max(T::epsilon());
        let pv = self.value(p).item().max(clamp).min(T::one() - clamp);
        let loss = -(label * pv.ln() + (T::one() - label) * (T::one() - pv).ln());
        self.push(
            "bce_loss",
            Payload::Owned(Tensor::from_scalar(loss)),
            Op::Bce { p, label },
        )
    }

    fn accumulate(
        grads: &mut [Option<Tensor<T>>],
        id: ValueId,
        shape: &[usize],
        write: impl FnOnce(&mut Tensor<T>),
    ) {
        let slot = &mut grads[id.0];
        if slot.is_none() {
            *slot = Some(Tensor::zeros(shape));
        }
        write(slot.as_mut().expect("slot populated above"));
    }

    /// Runs reverse accumulation from a single-element root. Gradients of
    /// earlier `backward` calls on the same tape are discarded.
    pub fn backward(&mut self, root: ValueId) -> Result<(), TensorError> {
        if self.value(root).len() != 1 {
            return Err(shape_err(
                "backward",
                format!(
                    "root must be a single element, got shape {:?}",
                    self.value(root).shape()
                ),
            ));
        }
        self.grads = vec![None; self.nodes.len()];
        self.grads[root.0] = Some(Tensor::from_vec(self.value(root).shape(), vec![T::one()])?);

        for nid in (0..=root.0).rev() {
            let g = match &self.grads[nid] {
                Some(g) => g.clone(),
                None => continue,
            };
            match &self.nodes[nid].op {
                Op::Leaf => {}
                Op::MatMul { a, b } => {
                    let (a, b) = (*a, *b);
                    let (m, k) = {
                        let s = self.value(a).shape();
                        (s[0], s[1])
                    };
                    let n = self.value(b).shape()[1];
                    let da = mm_nt(&g, self.value(b), m, k, n);
                    let db = mm_tn(self.value(a), &g, m, k, n);
                    Self::accumulate(&mut self.grads, a, &[m, k], |t| t.add_in_place(&da));
                    Self::accumulate(&mut self.grads, b, &[k, n], |t| t.add_in_place(&db));
                }
                Op::Transpose { x } => {
                    let x = *x;
                    let (m, n) = (self.value(x).shape()[0], self.value(x).shape()[1]);
                    let mut dx = Tensor::zeros(&[m, n]);
                    for i in 0..m {
                        for j in 0..n {
                            dx.set2(i, j, g.at2(j, i));
                        }
                    }
                    Self::accumulate(&mut self.grads, x, &[m, n], |t| t.add_in_place(&dx));
                }
                Op::Add { a, b } => {
                    let (a, b) = (*a, *b);
                    let shape = g.shape().to_vec();
                    Self::accumulate(&mut self.grads, a, &shape, |t| t.add_in_place(&g));
                    Self::accumulate(&mut self.grads, b, &shape, |t| t.add_in_place(&g));
                }
                Op::Mul { a, b } => {
                    let (a, b) = (*a, *b);
                    let shape = g.shape().to_vec();
                    let da_data: Vec<T> = g
                        .data()
                        .iter()
                        .zip(self.value(b).data().iter())
                        .map(|(gv, bv)| *gv * *bv)
                        .collect();
                    let db_data: Vec<T> = g
                        .data()
                        .iter()
                        .zip(self.value(a).data().iter())
                        .map(|(gv, av)| *gv * *av)
                        .collect();
                    let da = Tensor::from_vec(&shape, da_data)?;
                    let db = Tensor::from_vec(&shape, db_data)?;
                    Self::accumulate(&mut self.grads, a, &shape, |t| t.add_in_place(&da));
                    Self::accumulate(&mut self.grads, b, &shape, |t| t.add_in_place(&db));
                }
                Op::Scale { x, factor } => {
                    let (x, factor) = (*x, *factor);
                    let shape = g.shape().to_vec();
                    let mut dx = g.clone();
                    dx.scale_in_place(factor);
                    Self::accumulate(&mut self.grads, x, &shape, |t| t.add_in_place(&dx));
                }
                Op::Activate { x, kind } => {
                    let (x, kind) = (*x, *kind);
                    let shape = g.shape().to_vec();
                    let dx_data: Vec<T> = match kind {
                        Activation::Relu => g
                            .data()
                            .iter()
                            .zip(self.value(x).data().iter())
                            .map(|(gv, xv)| if *xv > T::zero() { *gv } else { T::zero() })
                            .collect(),
                        Activation::Tanh => g
                            .data()
                            .iter()
                            .zip(self.nodes[nid].value.tensor().data().iter())
                            .map(|(gv, yv)| *gv * (T::one() - *yv * *yv))
                            .collect(),
                        Activation::Sigmoid => g
                            .data()
                            .iter()
                            .zip(self.nodes[nid].value.tensor().data().iter())
                            .map(|(gv, yv)| *gv * *yv * (T::one() - *yv))
                            .collect(),
                    };
                    let dx = Tensor::from_vec(&shape, dx_data)?;
                    Self::accumulate(&mut self.grads, x, &shape, |t| t.add_in_place(&dx));
                }
                Op::MaskedSoftmax { x, mask } => {
                    let x = *x;
                    let mask = mask.clone();
                    let s = self.nodes[nid].value.tensor().data();
                    let mut dot = T::zero();
                    for i in 0..mask.len() {
                        if mask[i] != 0 {
                            dot = dot + g.data()[i] * s[i];
                        }
                    }
                    let dx_data: Vec<T> = (0..mask.len())
                        .map(|i| {
                            if mask[i] != 0 {
                                s[i] * (g.data()[i] - dot)
                            } else {
                                T::zero()
                            }
                        })
                        .collect();
                    let dx = Tensor::vector(dx_data);
                    let shape = dx.shape().to_vec();
                    Self::accumulate(&mut self.grads, x, &shape, |t| t.add_in_place(&dx));
                }
                Op::SoftmaxRows { x } => {
                    let x = *x;
                    let (m, n) = {
                        let s = self.nodes[nid].value.tensor().shape();
                        (s[0], s[1])
                    };
                    let s = self.nodes[nid].value.tensor().data();
                    let mut dx = Tensor::zeros(&[m, n]);
                    for i in 0..m {
                        let s_row = &s[i * n..(i + 1) * n];
                        let g_row = &g.data()[i * n..(i + 1) * n];
                        let mut dot = T::zero();
                        for j in 0..n {
                            dot = dot + g_row[j] * s_row[j];
                        }
                        for j in 0..n {
                            dx.set2(i, j, s_row[j] * (g_row[j] - dot));
                        }
                    }
                    Self::accumulate(&mut self.grads, x, &[m, n], |t| t.add_in_place(&dx));
                }
                Op::MaxColsMasked { x, argmax } => {
                    let x = *x;
                    let argmax = argmax.clone();
                    let (m, n) = {
                        let s = self.value(x).shape();
                        (s[0], s[1])
                    };
                    let mut dx = Tensor::zeros(&[m, n]);
                    for (i, &j) in argmax.iter().enumerate() {
                        dx.set2(i, j, g.data()[i]);
                    }
                    Self::accumulate(&mut self.grads, x, &[m, n], |t| t.add_in_place(&dx));
                }
                Op::RowSumMasked { x, mask } => {
                    let x = *x;
                    let mask = mask.clone();
                    let (m, n) = {
                        let s = self.value(x).shape();
                        (s[0], s[1])
                    };
                    let mut dx = Tensor::zeros(&[m, n]);
                    for (i, &live) in mask.iter().enumerate() {
                        if live != 0 {
                            for j in 0..n {
                                dx.set2(i, j, g.data()[j]);
                            }
                        }
                    }
                    Self::accumulate(&mut self.grads, x, &[m, n], |t| t.add_in_place(&dx));
                }
                Op::NeighborSum {
                    x,
                    adjacency,
                    n_live,
                } => {
                    let (x, n_live) = (*x, *n_live);
                    let adjacency = *adjacency;
                    let (m, n) = {
                        let s = self.value(x).shape();
                        (s[0], s[1])
                    };
                    let mut dx = Tensor::zeros(&[m, n]);
                    for (v, neighbors) in adjacency.iter().enumerate().take(n_live) {
                        let g_row = &g.data()[v * n..(v + 1) * n];
                        {
                            let dv = &mut dx.data_mut()[v * n..(v + 1) * n];
                            for (o, gv) in dv.iter_mut().zip(g_row.iter()) {
                                *o = *o + *gv;
                            }
                        }
                        for &u in neighbors {
                            let du = &mut dx.data_mut()[u * n..(u + 1) * n];
                            for (o, gv) in du.iter_mut().zip(g_row.iter()) {
                                *o = *o + *gv;
                            }
                        }
                    }
                    Self::accumulate(&mut self.grads, x, &[m, n], |t| t.add_in_place(&dx));
                }
                Op::SelectMatmul {
                    x,
                    mats,
                    select,
                    n_live,
                } => {
                    let (x, n_live) = (*x, *n_live);
                    let mats = mats.clone();
                    let select = select.clone();
                    let (m, k) = {
                        let s = self.value(x).shape();
                        (s[0], s[1])
                    };
                    let n = self.value(mats[0]).shape()[1];
                    let mut dx = Tensor::zeros(&[m, k]);
                    let mut dmats: Vec<Tensor<T>> =
                        mats.iter().map(|_| Tensor::zeros(&[k, n])).collect();
                    for (i, &sel) in select.iter().enumerate().take(n_live) {
                        let g_row = &g.data()[i * n..(i + 1) * n];
                        let w = self.value(mats[sel]).data();
                        let x_row = self.value(x).data()[i * k..(i + 1) * k].to_vec();
                        {
                            let dx_row = &mut dx.data_mut()[i * k..(i + 1) * k];
                            for (c, o) in dx_row.iter_mut().enumerate() {
                                let w_row = &w[c * n..(c + 1) * n];
                                let mut acc = T::zero();
                                for (gv, wv) in g_row.iter().zip(w_row.iter()) {
                                    acc = acc + *gv * *wv;
                                }
                                *o = *o + acc;
                            }
                        }
                        let dm = dmats[sel].data_mut();
                        for (c, &xc) in x_row.iter().enumerate() {
                            if xc == T::zero() {
                                continue;
                            }
                            for (o, gv) in dm[c * n..(c + 1) * n].iter_mut().zip(g_row.iter()) {
                                *o = *o + xc * *gv;
                            }
                        }
                    }
                    Self::accumulate(&mut self.grads, x, &[m, k], |t| t.add_in_place(&dx));
                    for (mid, dm) in mats.iter().zip(dmats) {
                        Self::accumulate(&mut self.grads, *mid, &[k, n], |t| t.add_in_place(&dm));
                    }
                }
                Op::Concat { a, b } => {
                    let (a, b) = (*a, *b);
                    let na = self.value(a).len();
                    let nb = self.value(b).len();
                    let da = Tensor::vector(g.data()[..na].to_vec());
                    let db = Tensor::vector(g.data()[na..na + nb].to_vec());
                    Self::accumulate(&mut self.grads, a, &[na], |t| t.add_in_place(&da));
                    Self::accumulate(&mut self.grads, b, &[nb], |t| t.add_in_place(&db));
                }
                Op::Reshape { x } => {
                    let x = *x;
                    let shape = self.value(x).shape().to_vec();
                    let dx = Tensor::from_vec(&shape, g.data().to_vec())?;
                    Self::accumulate(&mut self.grads, x, &shape, |t| t.add_in_place(&dx));
                }
                Op::Bce { p, label } => {
                    let (p, label) = (*p, *label);
                    let clamp = T::from_f64(1e-12).max(T::epsilon());
                    let pv = self.value(p).item();
                    let d = if pv > clamp && pv < T::one() - clamp {
                        -label / pv + (T::one() - label) / (T::one() - pv)
                    } else {
                        // Clamped region: loss is constant in p.
                        T::zero()
                    };
                    let shape = self.value(p).shape().to_vec();
                    let dp_val = g.item() * d;
                    let dp = Tensor::from_vec(&shape, vec![dp_val])?;
                    Self::accumulate(&mut self.grads, p, &shape, |t| t.add_in_place(&dp));
                }
            }
        }
        Ok(())
    }
}
