use std::sync::Arc;

use rand::Rng;

use super::segment::{self, SegmentMap};
use super::{EngineError, Matrix, Scalar};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

enum Op<T> {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    Scale(Var, T),
    ScaleRows(Var, Arc<Vec<T>>),
    ScaleBy(Var, Var),
    ConcatCols(Vec<Var>),
    GatherRows(Var, Arc<Vec<usize>>),
    MulRows(Var, Var),
    SegmentSum(Var, Arc<SegmentMap>),
    SegmentMean(Var, Arc<SegmentMap>),
    SegmentSoftmax(Var, Arc<SegmentMap>),
    Relu(Var),
    LeakyRelu(Var, T),
    Dropout(Var, Vec<T>),
    RowL2Normalize(Var, Vec<T>),
    SoftmaxCrossEntropy {
        logits: Var,
        labels: Arc<Vec<usize>>,
        mask: Arc<Vec<usize>>,
        probs: Matrix<T>,
    },
    Sum(Var),
    SumRows(Var),
}

impl<T> Op<T> {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::MatMul(..) => "matmul",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::AddRow(..) => "add_row",
            Op::Scale(..) => "scale",
            Op::ScaleRows(..) => "scale_rows",
            Op::ScaleBy(..) => "scale_by",
            Op::ConcatCols(..) => "concat_cols",
            Op::GatherRows(..) => "gather_rows",
            Op::MulRows(..) => "mul_rows",
            Op::SegmentSum(..) => "segment_sum",
            Op::SegmentMean(..) => "segment_mean",
            Op::SegmentSoftmax(..) => "segment_softmax",
            Op::Relu(..) => "relu",
            Op::LeakyRelu(..) => "leaky_relu",
            Op::Dropout(..) => "dropout",
            Op::RowL2Normalize(..) => "row_l2_normalize",
            Op::SoftmaxCrossEntropy { .. } => "softmax_cross_entropy",
            Op::Sum(..) => "sum",
            Op::SumRows(..) => "sum_rows",
        }
    }

    fn parents(&self) -> Vec<Var> {
        match self {
            Op::Leaf => vec![],
            Op::MatMul(a, b)
            | Op::Add(a, b)
            | Op::Sub(a, b)
            | Op::Mul(a, b)
            | Op::AddRow(a, b)
            | Op::ScaleBy(a, b)
            | Op::MulRows(a, b) => vec![*a, *b],
            Op::ConcatCols(vs) => vs.clone(),
            Op::Scale(a, _)
            | Op::ScaleRows(a, _)
            | Op::GatherRows(a, _)
            | Op::SegmentSum(a, _)
            | Op::SegmentMean(a, _)
            | Op::SegmentSoftmax(a, _)
            | Op::Relu(a)
            | Op::LeakyRelu(a, _)
            | Op::Dropout(a, _)
            | Op::RowL2Normalize(a, _)
            | Op::Sum(a)
            | Op::SumRows(a) => vec![*a],
            Op::SoftmaxCrossEntropy { logits, .. } => vec![*logits],
        }
    }
}

struct Node<T> {
    value: Matrix<T>,
    grad: Option<Matrix<T>>,
    op: Op<T>,
    requires_grad: bool,
}

/// Append-only record of a forward computation.
///
/// Nodes are stored in creation order, so parents always precede children
/// and a reverse sweep visits every node once after all of its consumers.
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
    trace: bool,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

fn same_shape<T: Scalar>(op: &'static str, a: &Matrix<T>, b: &Matrix<T>) -> Result<(), EngineError> {
    if a.shape() != b.shape() {
        return Err(EngineError::ShapeMismatch {
            op,
            left: a.shape(),
            right: b.shape(),
        });
    }
    Ok(())
}

fn zip_map<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>, f: impl Fn(T, T) -> T) -> Matrix<T> {
    let data = a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(&x, &y)| f(x, y))
        .collect();
    Matrix::from_vec(a.rows(), a.cols(), data).expect("shapes checked")
}

impl<T: Scalar> Tape<T> {
    /// Setting `UNIGNN_TRACE` in the environment makes the tape print one
    /// JSON line per forward op and per backward step with the value/grad norm.
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            trace: std::env::var_os("UNIGNN_TRACE").is_some(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn node(&self, v: Var) -> Result<&Node<T>, EngineError> {
        self.nodes.get(v.0).ok_or(EngineError::UnknownVar(v.0))
    }

    pub fn value(&self, v: Var) -> &Matrix<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Accumulated gradient, or `None` if backward never reached the node.
    pub fn grad(&self, v: Var) -> Option<&Matrix<T>> {
        self.nodes[v.0].grad.as_ref()
    }

    pub fn zero_grads(&mut self) {
        for n in &mut self.nodes {
            n.grad = None;
        }
    }

    pub fn leaf(&mut self, value: Matrix<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            grad: None,
            op: Op::Leaf,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Matrix<T>) -> Var {
        self.leaf(value, false)
    }

    fn push(&mut self, value: Matrix<T>, op: Op<T>) -> Result<Var, EngineError> {
        if cfg!(debug_assertions) && !value.all_finite() {
            return Err(EngineError::NonFinite { op: op.name() });
        }
        let requires_grad = op.parents().iter().any(|p| self.nodes[p.0].requires_grad);
        if self.trace {
            eprintln!(
                "{}",
                serde_json::json!({
                    "phase": "forward",
                    "id": self.nodes.len(),
                    "op": op.name(),
                    "shape": value.shape(),
                    "norm": value.frobenius_norm(),
                })
            );
        }
        self.nodes.push(Node {
            value,
            grad: None,
            op,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, EngineError> {
        let out = self.node(a)?.value.matmul(&self.node(b)?.value)?;
        self.push(out, Op::MatMul(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, EngineError> {
        let (x, y) = (&self.node(a)?.value, &self.node(b)?.value);
        same_shape("add", x, y)?;
        let out = zip_map(x, y, |p, q| p + q);
        self.push(out, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, EngineError> {
        let (x, y) = (&self.node(a)?.value, &self.node(b)?.value);
        same_shape("sub", x, y)?;
        let out = zip_map(x, y, |p, q| p - q);
        self.push(out, Op::Sub(a, b))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, EngineError> {
        let (x, y) = (&self.node(a)?.value, &self.node(b)?.value);
        same_shape("mul", x, y)?;
        let out = zip_map(x, y, |p, q| p * q);
        self.push(out, Op::Mul(a, b))
    }

    /// Adds the `1 x m` row vector `row` to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var, EngineError> {
        let (x, r) = (&self.node(a)?.value, &self.node(row)?.value);
        if r.rows() != 1 || r.cols() != x.cols() {
            return Err(EngineError::ShapeMismatch {
                op: "add_row",
                left: x.shape(),
                right: r.shape(),
            });
        }
        let mut out = x.clone();
        for i in 0..out.rows() {
            for (o, &b) in out.row_mut(i).iter_mut().zip(r.row(0)) {
                *o += b;
            }
        }
        self.push(out, Op::AddRow(a, row))
    }

    pub fn scale(&mut self, a: Var, c: T) -> Result<Var, EngineError> {
        let out = self.node(a)?.value.map(|v| v * c);
        self.push(out, Op::Scale(a, c))
    }

    /// Multiplies row `i` of `a` by the constant `factors[i]`.
    pub fn scale_rows(&mut self, a: Var, factors: Arc<Vec<T>>) -> Result<Var, EngineError> {
        let x = &self.node(a)?.value;
        if factors.len() != x.rows() {
            return Err(EngineError::ShapeMismatch {
                op: "scale_rows",
                left: x.shape(),
                right: (factors.len(), 1),
            });
        }
        let mut out = x.clone();
        for (i, &f) in factors.iter().enumerate() {
            for v in out.row_mut(i) {
                *v *= f;
            }
        }
        self.push(out, Op::ScaleRows(a, factors))
    }

    /// Multiplies `a` by the `1 x 1` node `s`.
    pub fn scale_by(&mut self, a: Var, s: Var) -> Result<Var, EngineError> {
        let sv = &self.node(s)?.value;
        if sv.shape() != (1, 1) {
            return Err(EngineError::ShapeMismatch {
                op: "scale_by",
                left: self.node(a)?.value.shape(),
                right: sv.shape(),
            });
        }
        let c = sv.get(0, 0);
        let out = self.node(a)?.value.map(|v| v * c);
        self.push(out, Op::ScaleBy(a, s))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, EngineError> {
        let first = parts
            .first()
            .ok_or(EngineError::ShapeMismatch {
                op: "concat_cols",
                left: (0, 0),
                right: (0, 0),
            })
            .and_then(|&v| self.node(v))?;
        let rows = first.value.rows();
        let mut cols = 0;
        for &p in parts {
            let m = &self.node(p)?.value;
            if m.rows() != rows {
                return Err(EngineError::ShapeMismatch {
                    op: "concat_cols",
                    left: (rows, cols),
                    right: m.shape(),
                });
            }
            cols += m.cols();
        }
        let mut out = Matrix::zeros(rows, cols);
        for r in 0..rows {
            let mut at = 0;
            let dst = out.row_mut(r);
            for &p in parts {
                let src = self.nodes[p.0].value.row(r);
                dst[at..at + src.len()].copy_from_slice(src);
                at += src.len();
            }
        }
        self.push(out, Op::ConcatCols(parts.to_vec()))
    }

    /// Output row `p` is row `indices[p]` of `a`.
    pub fn gather_rows(&mut self, a: Var, indices: Arc<Vec<usize>>) -> Result<Var, EngineError> {
        let x = &self.node(a)?.value;
        if let Some(&bad) = indices.iter().find(|&&i| i >= x.rows()) {
            return Err(EngineError::IndexOutOfRange {
                index: bad,
                len: x.rows(),
            });
        }
        let out = x.select_rows(&indices);
        self.push(out, Op::GatherRows(a, indices))
    }

    pub fn row_slice(&mut self, a: Var, start: usize, end: usize) -> Result<Var, EngineError> {
        let rows = self.node(a)?.value.rows();
        if start > end || end > rows {
            return Err(EngineError::IndexOutOfRange { index: end, len: rows });
        }
        self.gather_rows(a, Arc::new((start..end).collect()))
    }

    /// Multiplies row `p` of `a` by the scalar `w[p, 0]`.
    pub fn mul_rows(&mut self, a: Var, w: Var) -> Result<Var, EngineError> {
        let (x, wv) = (&self.node(a)?.value, &self.node(w)?.value);
        if wv.shape() != (x.rows(), 1) {
            return Err(EngineError::ShapeMismatch {
                op: "mul_rows",
                left: x.shape(),
                right: wv.shape(),
            });
        }
        let mut out = x.clone();
        for p in 0..out.rows() {
            let f = wv.get(p, 0);
            for v in out.row_mut(p) {
                *v *= f;
            }
        }
        self.push(out, Op::MulRows(a, w))
    }

    pub fn segment_sum(&mut self, x: Var, map: &Arc<SegmentMap>) -> Result<Var, EngineError> {
        let out = segment::segment_sum(&self.node(x)?.value, map)?;
        self.push(out, Op::SegmentSum(x, Arc::clone(map)))
    }

    pub fn segment_mean(&mut self, x: Var, map: &Arc<SegmentMap>) -> Result<Var, EngineError> {
        let out = segment::segment_mean(&self.node(x)?.value, map)?;
        self.push(out, Op::SegmentMean(x, Arc::clone(map)))
    }

    pub fn segment_softmax(&mut self, scores: Var, map: &Arc<SegmentMap>) -> Result<Var, EngineError> {
        let out = segment::segment_softmax(&self.node(scores)?.value, map)?;
        self.push(out, Op::SegmentSoftmax(scores, Arc::clone(map)))
    }

    pub fn relu(&mut self, a: Var) -> Result<Var, EngineError> {
        let out = self.node(a)?.value.map(|v| v.max(T::zero()));
        self.push(out, Op::Relu(a))
    }

    pub fn leaky_relu(&mut self, a: Var, slope: T) -> Result<Var, EngineError> {
        let out = self
            .node(a)?
            .value
            .map(|v| if v > T::zero() { v } else { v * slope });
        self.push(out, Op::LeakyRelu(a, slope))
    }

    /// Inverted dropout. In eval mode, or with `p == 0`, returns `a` itself.
    ///
    /// Entries that are exactly zero in an input that does not require
    /// gradients draw no random number, so sparse feature matrices cost
    /// proportionally to their non-zeros.
    pub fn dropout<R: Rng + ?Sized>(
        &mut self,
        a: Var,
        p: f64,
        training: bool,
        rng: &mut R,
    ) -> Result<Var, EngineError> {
        if !(0.0..1.0).contains(&p) {
            return Err(EngineError::InvalidProbability(p));
        }
        if !training || p == 0.0 {
            return Ok(a);
        }
        let node = self.node(a)?;
        let skip_zeros = !node.requires_grad;
        let keep = T::c(1.0 / (1.0 - p));
        let mask: Vec<T> = node
            .value
            .as_slice()
            .iter()
            .map(|&v| {
                if (skip_zeros && v == T::zero()) || rng.gen::<f64>() < p {
                    T::zero()
                } else {
                    keep
                }
            })
            .collect();
        let data = node
            .value
            .as_slice()
            .iter()
            .zip(&mask)
            .map(|(&v, &m)| v * m)
            .collect();
        let out = Matrix::from_vec(node.value.rows(), node.value.cols(), data)?;
        self.push(out, Op::Dropout(a, mask))
    }

    /// Divides each row by its Euclidean norm; all-zero rows stay zero.
    pub fn row_l2_normalize(&mut self, a: Var) -> Result<Var, EngineError> {
        let x = &self.node(a)?.value;
        let mut out = x.clone();
        let mut norms = Vec::with_capacity(x.rows());
        for r in 0..x.rows() {
            let norm = x.row(r).iter().map(|&v| v * v).sum::<T>().sqrt();
            norms.push(norm);
            if norm > T::zero() {
                for v in out.row_mut(r) {
                    *v = *v / norm;
                }
            }
        }
        self.push(out, Op::RowL2Normalize(a, norms))
    }

    /// Mean negative log-softmax of the labelled class over the rows in
    /// `mask`. Returns a `1 x 1` node.
    pub fn softmax_cross_entropy(
        &mut self,
        logits: Var,
        labels: Arc<Vec<usize>>,
        mask: Arc<Vec<usize>>,
    ) -> Result<Var, EngineError> {
        if mask.is_empty() {
            return Err(EngineError::EmptyMask);
        }
        let x = &self.node(logits)?.value;
        let classes = x.cols();
        let mut probs = Matrix::zeros(mask.len(), classes);
        let mut total = 0.0f64;
        for (k, &r) in mask.iter().enumerate() {
            if r >= x.rows() || r >= labels.len() {
                return Err(EngineError::IndexOutOfRange {
                    index: r,
                    len: x.rows().min(labels.len()),
                });
            }
            let label = labels[r];
            if label >= classes {
                return Err(EngineError::LabelOutOfRange { label, classes });
            }
            let row = x.row(r);
            let max = row.iter().copied().fold(T::neg_infinity(), T::max);
            let mut z = T::zero();
            for (c, &v) in row.iter().enumerate() {
                let e = (v - max).exp();
                probs.set(k, c, e);
                z += e;
            }
            for c in 0..classes {
                probs.set(k, c, probs.get(k, c) / z);
            }
            total += (max + z.ln() - row[label]).as_f64();
        }
        let loss = Matrix::filled(1, 1, T::c(total / mask.len() as f64));
        self.push(
            loss,
            Op::SoftmaxCrossEntropy {
                logits,
                labels,
                mask,
                probs,
            },
        )
    }

    /// Sum of all entries as a `1 x 1` node.
    pub fn sum(&mut self, a: Var) -> Result<Var, EngineError> {
        let total = self.node(a)?.value.as_slice().iter().copied().sum::<T>();
        self.push(Matrix::filled(1, 1, total), Op::Sum(a))
    }

    /// Column sums as a `1 x d` node.
    pub fn sum_rows(&mut self, a: Var) -> Result<Var, EngineError> {
        let x = &self.node(a)?.value;
        let mut out = Matrix::zeros(1, x.cols());
        for r in 0..x.rows() {
            for (o, &v) in out.row_mut(0).iter_mut().zip(x.row(r)) {
                *o += v;
            }
        }
        self.push(out, Op::SumRows(a))
    }

    /// Back-propagates from the scalar `loss`, accumulating into `grad` of
    /// every node that requires it.
    pub fn backward(&mut self, loss: Var) -> Result<(), EngineError> {
        let shape = self.node(loss)?.value.shape();
        if shape != (1, 1) {
            return Err(EngineError::NonScalarLoss(shape));
        }
        self.accumulate(loss, Matrix::filled(1, 1, T::one()));
        for k in (0..=loss.0).rev() {
            let Some(g) = self.nodes[k].grad.take() else {
                continue;
            };
            if self.trace {
                eprintln!(
                    "{}",
                    serde_json::json!({
                        "phase": "backward",
                        "id": k,
                        "op": self.nodes[k].op.name(),
                        "grad_norm": g.frobenius_norm(),
                    })
                );
            }
            let contributions = self.local_grads(k, &g)?;
            self.nodes[k].grad = Some(g);
            for (parent, d) in contributions {
                self.accumulate(parent, d);
            }
        }
        Ok(())
    }

    fn accumulate(&mut self, v: Var, d: Matrix<T>) {
        let node = &mut self.nodes[v.0];
        if !node.requires_grad {
            return;
        }
        match &mut node.grad {
            Some(g) => g.add_assign(&d),
            slot @ None => *slot = Some(d),
        }
    }

    fn local_grads(&self, k: usize, g: &Matrix<T>) -> Result<Vec<(Var, Matrix<T>)>, EngineError> {
        let node = &self.nodes[k];
        let needs = |v: &Var| self.nodes[v.0].requires_grad;
        let val = |v: &Var| &self.nodes[v.0].value;
        let mut out = Vec::new();
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if needs(a) {
                    out.push((*a, g.matmul_transposed(val(b))?));
                }
                if needs(b) {
                    out.push((*b, val(a).transposed_matmul(g)?));
                }
            }
            Op::Add(a, b) => {
                out.push((*a, g.clone()));
                out.push((*b, g.clone()));
            }
            Op::Sub(a, b) => {
                out.push((*a, g.clone()));
                out.push((*b, g.map(|v| -v)));
            }
            Op::Mul(a, b) => {
                if needs(a) {
                    out.push((*a, zip_map(g, val(b), |p, q| p * q)));
                }
                if needs(b) {
                    out.push((*b, zip_map(g, val(a), |p, q| p * q)));
                }
            }
            Op::AddRow(a, row) => {
                out.push((*a, g.clone()));
                if needs(row) {
                    let mut d = Matrix::zeros(1, g.cols());
                    for r in 0..g.rows() {
                        for (o, &v) in d.row_mut(0).iter_mut().zip(g.row(r)) {
                            *o += v;
                        }
                    }
                    out.push((*row, d));
                }
            }
            Op::Scale(a, c) => out.push((*a, g.map(|v| v * *c))),
            Op::ScaleRows(a, factors) => {
                let mut d = g.clone();
                for (i, &f) in factors.iter().enumerate() {
                    for v in d.row_mut(i) {
                        *v *= f;
                    }
                }
                out.push((*a, d));
            }
            Op::ScaleBy(a, s) => {
                let c = val(s).get(0, 0);
                if needs(a) {
                    out.push((*a, g.map(|v| v * c)));
                }
                if needs(s) {
                    let dot = g
                        .as_slice()
                        .iter()
                        .zip(val(a).as_slice())
                        .map(|(&p, &q)| p * q)
                        .sum::<T>();
                    out.push((*s, Matrix::filled(1, 1, dot)));
                }
            }
            Op::ConcatCols(parts) => {
                let mut at = 0;
                for p in parts {
                    let cols = val(p).cols();
                    if needs(p) {
                        let d = Matrix::from_fn(g.rows(), cols, |r, c| g.get(r, at + c));
                        out.push((*p, d));
                    }
                    at += cols;
                }
            }
            Op::GatherRows(a, indices) => {
                let mut d = Matrix::zeros(val(a).rows(), g.cols());
                for (p, &src) in indices.iter().enumerate() {
                    for (o, &v) in d.row_mut(src).iter_mut().zip(g.row(p)) {
                        *o += v;
                    }
                }
                out.push((*a, d));
            }
            Op::MulRows(a, w) => {
                let (x, wv) = (val(a), val(w));
                if needs(a) {
                    let mut d = g.clone();
                    for p in 0..d.rows() {
                        let f = wv.get(p, 0);
                        for v in d.row_mut(p) {
                            *v *= f;
                        }
                    }
                    out.push((*a, d));
                }
                if needs(w) {
                    let d = Matrix::from_fn(x.rows(), 1, |p, _| {
                        g.row(p).iter().zip(x.row(p)).map(|(&u, &v)| u * v).sum()
                    });
                    out.push((*w, d));
                }
            }
            Op::SegmentSum(x, map) => {
                out.push((*x, segment::scatter_back(g, map, |_| T::one())));
            }
            Op::SegmentMean(x, map) => {
                let d = segment::scatter_back(g, map, |grp| T::one() / T::c(map.group_len(grp) as f64));
                out.push((*x, d));
            }
            Op::SegmentSoftmax(x, map) => {
                out.push((*x, segment::segment_softmax_backward(&node.value, g, map)));
            }
            Op::Relu(a) => {
                out.push((*a, zip_map(g, val(a), |d, x| if x > T::zero() { d } else { T::zero() })));
            }
            Op::LeakyRelu(a, slope) => {
                let s = *slope;
                out.push((*a, zip_map(g, val(a), |d, x| if x > T::zero() { d } else { d * s })));
            }
            Op::Dropout(a, mask) => {
                let data = g.as_slice().iter().zip(mask).map(|(&d, &m)| d * m).collect();
                out.push((*a, Matrix::from_vec(g.rows(), g.cols(), data)?));
            }
            Op::RowL2Normalize(a, norms) => {
                let y = &node.value;
                let mut d = Matrix::zeros(g.rows(), g.cols());
                for (r, &norm) in norms.iter().enumerate() {
                    if norm == T::zero() {
                        continue;
                    }
                    let dot: T = y.row(r).iter().zip(g.row(r)).map(|(&p, &q)| p * q).sum();
                    for ((o, &yv), &gv) in d.row_mut(r).iter_mut().zip(y.row(r)).zip(g.row(r)) {
                        *o = (gv - yv * dot) / norm;
                    }
                }
                out.push((*a, d));
            }
            Op::SoftmaxCrossEntropy {
                logits,
                labels,
                mask,
                probs,
            } => {
                let x = val(logits);
                let scale = g.get(0, 0) / T::c(mask.len() as f64);
                let mut d = Matrix::zeros(x.rows(), x.cols());
                for (k, &r) in mask.iter().enumerate() {
                    for c in 0..x.cols() {
                        let target = if c == labels[r] { T::one() } else { T::zero() };
                        let cur = d.get(r, c);
                        d.set(r, c, cur + scale * (probs.get(k, c) - target));
                    }
                }
                out.push((*logits, d));
            }
            Op::Sum(a) => {
                let (r, c) = val(a).shape();
                out.push((*a, Matrix::filled(r, c, g.get(0, 0))));
            }
            Op::SumRows(a) => {
                let (r, c) = val(a).shape();
                out.push((*a, Matrix::from_fn(r, c, |_, j| g.get(0, j))));
            }
        }
        Ok(out)
    }
}
