//! Tape-based reverse-mode autodiff over dense 2-D f64 tensors. Every
//! value is an `Array2`; row vectors are 1 x n and scalars 1 x 1. Nodes
//! are appended in topological order, so the backward pass is a single
//! reverse sweep.

use ndarray::{s, Array2, Axis};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NnError {
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    ShapeMismatch { op: &'static str, lhs: (usize, usize), rhs: (usize, usize) },
    #[error("backward requires a scalar loss, got {0:?}")]
    NotScalarLoss((usize, usize)),
    #[error("no gradient recorded for parameter {0}")]
    MissingGradient(String),
    #[error("embedding index {index} out of range for table with {rows} rows")]
    BadEmbeddingIndex { index: usize, rows: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TensorId(pub(crate) usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(TensorId, TensorId),
    Add(TensorId, TensorId),
    Sub(TensorId, TensorId),
    Mul(TensorId, TensorId),
    AddRowBroadcast(TensorId, TensorId),
    MulRowBroadcast(TensorId, TensorId),
    Scale(TensorId, f64),
    Gelu(TensorId),
    Abs(TensorId),
    Softmax(TensorId),
    LayerNorm(TensorId),
    Transpose(TensorId),
    SliceCols(TensorId, usize),
    SliceRows(TensorId, usize),
    ConcatCols(Vec<TensorId>),
    ConcatRows(Vec<TensorId>),
    Sum(TensorId),
    MaxPoolRows(TensorId),
    EmbeddingLookup(TensorId, Vec<usize>),
}

struct Node {
    value: Array2<f64>,
    grad: Array2<f64>,
    aux: Vec<f64>, // per-row sigma for layer norm
    op: Op,
}

const GELU_C: f64 = 0.797884560802865; // sqrt(2/pi)

fn gelu_scalar(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + 0.044715 * x * x * x)).tanh())
}

fn gelu_grad_scalar(x: f64) -> f64 {
    let u = GELU_C * (x + 0.044715 * x.powi(3));
    let t = u.tanh();
    let du = GELU_C * (1.0 + 3.0 * 0.044715 * x * x);
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du
}

/// LayerNorm variance floor.
const LN_EPS: f64 = 1e-8;

#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

impl Graph {
    pub fn new() -> Self {
        Graph::default()
    }

    fn push(&mut self, value: Array2<f64>, op: Op) -> TensorId {
        self.push_aux(value, op, Vec::new())
    }

    fn push_aux(&mut self, value: Array2<f64>, op: Op, aux: Vec<f64>) -> TensorId {
        let grad = Array2::zeros(value.dim());
        self.nodes.push(Node { value, grad, aux, op });
        TensorId(self.nodes.len() - 1)
    }

    pub fn value(&self, id: TensorId) -> &Array2<f64> {
        &self.nodes[id.0].value
    }

    pub fn grad(&self, id: TensorId) -> &Array2<f64> {
        &self.nodes[id.0].grad
    }

    pub fn shape(&self, id: TensorId) -> (usize, usize) {
        self.nodes[id.0].value.dim()
    }

    pub fn leaf(&mut self, value: Array2<f64>) -> TensorId {
        self.push(value, Op::Leaf)
    }

    pub fn scalar(&mut self, v: f64) -> TensorId {
        self.leaf(Array2::from_elem((1, 1), v))
    }

    fn same_shape(
        &self,
        op: &'static str,
        a: TensorId,
        b: TensorId,
    ) -> Result<(), NnError> {
        if self.shape(a) != self.shape(b) {
            return Err(NnError::ShapeMismatch { op, lhs: self.shape(a), rhs: self.shape(b) });
        }
        Ok(())
    }

    pub fn matmul(&mut self, a: TensorId, b: TensorId) -> Result<TensorId, NnError> {
        let (ar, ac) = self.shape(a);
        let (br, bc) = self.shape(b);
        if ac != br {
            return Err(NnError::ShapeMismatch { op: "matmul", lhs: (ar, ac), rhs: (br, bc) });
        }
        let v = self.nodes[a.0].value.dot(&self.nodes[b.0].value);
        Ok(self.push(v, Op::MatMul(a, b)))
    }

    pub fn add(&mut self, a: TensorId, b: TensorId) -> Result<TensorId, NnError> {
        self.same_shape("add", a, b)?;
        let v = &self.nodes[a.0].value + &self.nodes[b.0].value;
        Ok(self.push(v, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: TensorId, b: TensorId) -> Result<TensorId, NnError> {
        self.same_shape("sub", a, b)?;
        let v = &self.nodes[a.0].value - &self.nodes[b.0].value;
        Ok(self.push(v, Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: TensorId, b: TensorId) -> Result<TensorId, NnError> {
        self.same_shape("mul", a, b)?;
        let v = &self.nodes[a.0].value * &self.nodes[b.0].value;
        Ok(self.push(v, Op::Mul(a, b)))
    }

    /// `a + bias` with `bias` a 1 x n row broadcast over every row of `a`.
    pub fn add_row(&mut self, a: TensorId, bias: TensorId) -> Result<TensorId, NnError> {
        let (_, ac) = self.shape(a);
        let (br, bc) = self.shape(bias);
        if br != 1 || bc != ac {
            return Err(NnError::ShapeMismatch { op: "add_row", lhs: self.shape(a), rhs: (br, bc) });
        }
        let v = &self.nodes[a.0].value + &self.nodes[bias.0].value.row(0);
        Ok(self.push(v, Op::AddRowBroadcast(a, bias)))
    }

    pub fn mul_row(&mut self, a: TensorId, g: TensorId) -> Result<TensorId, NnError> {
        let (_, ac) = self.shape(a);
        let (gr, gc) = self.shape(g);
        if gr != 1 || gc != ac {
            return Err(NnError::ShapeMismatch { op: "mul_row", lhs: self.shape(a), rhs: (gr, gc) });
        }
        let v = &self.nodes[a.0].value * &self.nodes[g.0].value.row(0);
        Ok(self.push(v, Op::MulRowBroadcast(a, g)))
    }

    pub fn scale(&mut self, a: TensorId, k: f64) -> TensorId {
        let v = &self.nodes[a.0].value * k;
        self.push(v, Op::Scale(a, k))
    }

    pub fn gelu(&mut self, a: TensorId) -> TensorId {
        let v = self.nodes[a.0].value.mapv(gelu_scalar);
        self.push(v, Op::Gelu(a))
    }

    pub fn abs(&mut self, a: TensorId) -> TensorId {
        let v = self.nodes[a.0].value.mapv(f64::abs);
        self.push(v, Op::Abs(a))
    }

    /// Row-wise softmax.
    pub fn softmax(&mut self, a: TensorId) -> TensorId {
        let mut v = self.nodes[a.0].value.clone();
        for mut row in v.rows_mut() {
            let max = row.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
            row.mapv_inplace(|x| (x - max).exp());
            let sum = row.sum();
            row.mapv_inplace(|x| x / sum);
        }
        self.push(v, Op::Softmax(a))
    }

    /// Row-wise normalization to mean 0, variance 1 (no affine).
    pub fn layer_norm(&mut self, a: TensorId) -> TensorId {
        let x = &self.nodes[a.0].value;
        let n = x.ncols() as f64;
        let mut v = x.clone();
        let mut sigmas = Vec::with_capacity(x.nrows());
        for mut row in v.rows_mut() {
            let mean = row.sum() / n;
            let var = row.fold(0.0, |acc, &x| acc + (x - mean).powi(2)) / n;
            let sigma = (var + LN_EPS).sqrt();
            row.mapv_inplace(|x| (x - mean) / sigma);
            sigmas.push(sigma);
        }
        self.push_aux(v, Op::LayerNorm(a), sigmas)
    }

    pub fn transpose(&mut self, a: TensorId) -> TensorId {
        let v = self.nodes[a.0].value.t().to_owned();
        self.push(v, Op::Transpose(a))
    }

    pub fn slice_cols(&mut self, a: TensorId, start: usize, end: usize) -> TensorId {
        let v = self.nodes[a.0].value.slice(s![.., start..end]).to_owned();
        self.push(v, Op::SliceCols(a, start))
    }

    pub fn slice_rows(&mut self, a: TensorId, start: usize, end: usize) -> TensorId {
        let v = self.nodes[a.0].value.slice(s![start..end, ..]).to_owned();
        self.push(v, Op::SliceRows(a, start))
    }

    pub fn concat_cols(&mut self, parts: &[TensorId]) -> Result<TensorId, NnError> {
        let rows = self.shape(parts[0]).0;
        for &p in parts {
            if self.shape(p).0 != rows {
                return Err(NnError::ShapeMismatch {
                    op: "concat_cols",
                    lhs: self.shape(parts[0]),
                    rhs: self.shape(p),
                });
            }
        }
        let views: Vec<_> = parts.iter().map(|&p| self.nodes[p.0].value.view()).collect();
        let v = ndarray::concatenate(Axis(1), &views).expect("checked shapes");
        Ok(self.push(v, Op::ConcatCols(parts.to_vec())))
    }

    pub fn concat_rows(&mut self, parts: &[TensorId]) -> Result<TensorId, NnError> {
        let cols = self.shape(parts[0]).1;
        for &p in parts {
            if self.shape(p).1 != cols {
                return Err(NnError::ShapeMismatch {
                    op: "concat_rows",
                    lhs: self.shape(parts[0]),
                    rhs: self.shape(p),
                });
            }
        }
        let views: Vec<_> = parts.iter().map(|&p| self.nodes[p.0].value.view()).collect();
        let v = ndarray::concatenate(Axis(0), &views).expect("checked shapes");
        Ok(self.push(v, Op::ConcatRows(parts.to_vec())))
    }

    /// Sum of all elements, a 1 x 1 scalar.
    pub fn sum(&mut self, a: TensorId) -> TensorId {
        let v = Array2::from_elem((1, 1), self.nodes[a.0].value.sum());
        self.push(v, Op::Sum(a))
    }

    pub fn mean(&mut self, a: TensorId) -> TensorId {
        let (r, c) = self.shape(a);
        let s = self.sum(a);
        self.scale(s, 1.0 / (r * c) as f64)
    }

    /// Column-wise max over rows: (r x c) -> (1 x c). Gradient flows to
    /// the argmax row of each column (first on ties).
    pub fn max_pool_rows(&mut self, a: TensorId) -> TensorId {
        let x = &self.nodes[a.0].value;
        let mut v = Array2::from_elem((1, x.ncols()), f64::NEG_INFINITY);
        for row in x.rows() {
            for (j, &val) in row.iter().enumerate() {
                if val > v[(0, j)] {
                    v[(0, j)] = val;
                }
            }
        }
        self.push(v, Op::MaxPoolRows(a))
    }

    /// Gathers `indices` rows of `table` into a new matrix.
    pub fn embedding_lookup(
        &mut self,
        table: TensorId,
        indices: &[usize],
    ) -> Result<TensorId, NnError> {
        let (rows, cols) = self.shape(table);
        for &i in indices {
            if i >= rows {
                return Err(NnError::BadEmbeddingIndex { index: i, rows });
            }
        }
        let mut v = Array2::zeros((indices.len(), cols));
        for (k, &i) in indices.iter().enumerate() {
            v.row_mut(k).assign(&self.nodes[table.0].value.row(i));
        }
        Ok(self.push(v, Op::EmbeddingLookup(table, indices.to_vec())))
    }

    /// Scaled dot-product multi-head attention over already-projected
    /// q, k, v (each tokens x dim). Head dim is dim / heads.
    pub fn multi_head_attention(
        &mut self,
        q: TensorId,
        k: TensorId,
        v: TensorId,
        heads: usize,
    ) -> Result<TensorId, NnError> {
        self.same_shape("attention(q,k)", q, k)?;
        self.same_shape("attention(k,v)", k, v)?;
        let (_, dim) = self.shape(q);
        if dim % heads != 0 {
            return Err(NnError::ShapeMismatch { op: "attention heads", lhs: (dim, heads), rhs: (0, 0) });
        }
        let hd = dim / heads;
        let mut outs = Vec::with_capacity(heads);
        for h in 0..heads {
            let qh = self.slice_cols(q, h * hd, (h + 1) * hd);
            let kh = self.slice_cols(k, h * hd, (h + 1) * hd);
            let vh = self.slice_cols(v, h * hd, (h + 1) * hd);
            let kht = self.transpose(kh);
            let scores = self.matmul(qh, kht)?;
            let scaled = self.scale(scores, 1.0 / (hd as f64).sqrt());
            let attn = self.softmax(scaled);
            outs.push(self.matmul(attn, vh)?);
        }
        self.concat_cols(&outs)
    }

    /// Reverse sweep from a scalar loss; accumulates into every node's
    /// gradient buffer.
    pub fn backward(&mut self, loss: TensorId) -> Result<(), NnError> {
        if self.shape(loss) != (1, 1) {
            return Err(NnError::NotScalarLoss(self.shape(loss)));
        }
        self.nodes[loss.0].grad[(0, 0)] = 1.0;
        for i in (0..=loss.0).rev() {
            let grad = self.nodes[i].grad.clone();
            if grad.iter().all(|&g| g == 0.0) {
                continue;
            }
            match self.nodes[i].op.clone() {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    let da = grad.dot(&self.nodes[b.0].value.t());
                    let db = self.nodes[a.0].value.t().dot(&grad);
                    self.nodes[a.0].grad += &da;
                    self.nodes[b.0].grad += &db;
                }
                Op::Add(a, b) => {
                    self.nodes[a.0].grad += &grad;
                    self.nodes[b.0].grad += &grad;
                }
                Op::Sub(a, b) => {
                    self.nodes[a.0].grad += &grad;
                    self.nodes[b.0].grad -= &grad;
                }
                Op::Mul(a, b) => {
                    let da = &grad * &self.nodes[b.0].value;
                    let db = &grad * &self.nodes[a.0].value;
                    self.nodes[a.0].grad += &da;
                    self.nodes[b.0].grad += &db;
                }
                Op::AddRowBroadcast(a, bias) => {
                    self.nodes[a.0].grad += &grad;
                    let db = grad.sum_axis(Axis(0));
                    self.nodes[bias.0].grad.row_mut(0).scaled_add(1.0, &db);
                }
                Op::MulRowBroadcast(a, g) => {
                    let da = &grad * &self.nodes[g.0].value.row(0);
                    self.nodes[a.0].grad += &da;
                    let dg = (&grad * &self.nodes[a.0].value).sum_axis(Axis(0));
                    self.nodes[g.0].grad.row_mut(0).scaled_add(1.0, &dg);
                }
                Op::Scale(a, k) => {
                    self.nodes[a.0].grad.scaled_add(k, &grad);
                }
                Op::Gelu(a) => {
                    let da = &grad * &self.nodes[a.0].value.mapv(gelu_grad_scalar);
                    self.nodes[a.0].grad += &da;
                }
                Op::Abs(a) => {
                    let da = &grad * &self.nodes[a.0].value.mapv(|x| if x >= 0.0 { 1.0 } else { -1.0 });
                    self.nodes[a.0].grad += &da;
                }
                Op::Softmax(a) => {
                    let y = &self.nodes[i].value;
                    let mut da = Array2::zeros(y.dim());
                    for r in 0..y.nrows() {
                        let dot: f64 = (0..y.ncols()).map(|c| grad[(r, c)] * y[(r, c)]).sum();
                        for c in 0..y.ncols() {
                            da[(r, c)] = y[(r, c)] * (grad[(r, c)] - dot);
                        }
                    }
                    self.nodes[a.0].grad += &da;
                }
                Op::LayerNorm(a) => {
                    let y = self.nodes[i].value.clone();
                    let sigmas = self.nodes[i].aux.clone();
                    let n = y.ncols() as f64;
                    let mut da = Array2::zeros(y.dim());
                    for r in 0..y.nrows() {
                        let g_mean: f64 = (0..y.ncols()).map(|c| grad[(r, c)]).sum::<f64>() / n;
                        let gy_mean: f64 =
                            (0..y.ncols()).map(|c| grad[(r, c)] * y[(r, c)]).sum::<f64>() / n;
                        for c in 0..y.ncols() {
                            da[(r, c)] =
                                (grad[(r, c)] - g_mean - y[(r, c)] * gy_mean) / sigmas[r];
                        }
                    }
                    self.nodes[a.0].grad += &da;
                }
                Op::Transpose(a) => {
                    let da = grad.t().to_owned();
                    self.nodes[a.0].grad += &da;
                }
                Op::SliceCols(a, start) => {
                    let (_, c) = grad.dim();
                    let mut view = self.nodes[a.0].grad.slice_mut(s![.., start..start + c]);
                    view += &grad;
                }
                Op::SliceRows(a, start) => {
                    let (r, _) = grad.dim();
                    let mut view = self.nodes[a.0].grad.slice_mut(s![start..start + r, ..]);
                    view += &grad;
                }
                Op::ConcatCols(parts) => {
                    let mut offset = 0;
                    for p in parts {
                        let c = self.shape(p).1;
                        let slice = grad.slice(s![.., offset..offset + c]).to_owned();
                        self.nodes[p.0].grad += &slice;
                        offset += c;
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut offset = 0;
                    for p in parts {
                        let r = self.shape(p).0;
                        let slice = grad.slice(s![offset..offset + r, ..]).to_owned();
                        self.nodes[p.0].grad += &slice;
                        offset += r;
                    }
                }
                Op::Sum(a) => {
                    let g = grad[(0, 0)];
                    self.nodes[a.0].grad += g;
                }
                Op::MaxPoolRows(a) => {
                    let x = self.nodes[a.0].value.clone();
                    let y = &self.nodes[i].value;
                    let mut da = Array2::zeros(x.dim());
                    for j in 0..x.ncols() {
                        let mut arg = 0;
                        for r in 0..x.nrows() {
                            if x[(r, j)] == y[(0, j)] {
                                arg = r;
                                break;
                            }
                        }
                        da[(arg, j)] = grad[(0, j)];
                    }
                    self.nodes[a.0].grad += &da;
                }
                Op::EmbeddingLookup(table, indices) => {
                    for (k, &idx) in indices.iter().enumerate() {
                        let row = grad.row(k).to_owned();
                        self.nodes[table.0].grad.row_mut(idx).scaled_add(1.0, &row);
                    }
                }
            }
        }
        Ok(())
    }
}
