use std::collections::{BTreeMap, HashMap};

use super::kernels::{add_into, dot, gelu, gelu_grad, log_sum_exp, mm_acc, mm_nt_acc, mm_tn_acc};
use super::{ParamStore, Tensor};
use crate::error::{Error, Result};

/// Handle to a node recorded in a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
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
    MatMulNt(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    DivScalar(Var, Var),
    Transpose(Var),
    Softmax {
        x: Var,
        outer: usize,
        len: usize,
        inner: usize,
    },
    LayerNorm {
        x: Var,
        gain: Var,
        bias: Var,
        xhat: Vec<f64>,
        rstd: Vec<f64>,
    },
    Gelu(Var),
    CrossEntropy {
        logits: Var,
        targets: Vec<Option<usize>>,
        probs: Vec<f64>,
        count: usize,
    },
    L2Normalize {
        x: Var,
        norms: Vec<f64>,
    },
    GatherRows {
        table: Var,
        ids: Vec<usize>,
    },
    SliceRows {
        x: Var,
        start: usize,
    },
    SliceCols {
        x: Var,
        start: usize,
    },
    ConcatRows(Vec<Var>),
    ConcatCols(Vec<Var>),
    Sum(Var),
    Mean(Var),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Dynamically recorded computation graph.
///
/// Nodes are appended in evaluation order, so reverse insertion order is a
/// valid topological order for the backward sweep.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    bound: HashMap<String, Var>,
}

/// Gradients of a scalar with respect to every leaf that requires them.
#[derive(Debug)]
pub struct Gradients {
    leaves: Vec<Option<Tensor>>,
    named: Vec<(String, Var)>,
}

impl Gradients {
    pub fn wrt(&self, var: Var) -> Option<&Tensor> {
        self.leaves.get(var.0).and_then(Option::as_ref)
    }

    /// Gradients of every bound parameter, keyed by parameter name.
    pub fn params(&self) -> BTreeMap<String, Tensor> {
        self.named
            .iter()
            .filter_map(|(name, var)| self.wrt(*var).map(|g| (name.clone(), g.clone())))
            .collect()
    }
}

fn dims2(t: &Tensor, op: &'static str) -> Result<(usize, usize)> {
    t.dims2().map_err(|_| Error::shape(op, t.shape(), &[0, 0]))
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, inputs: &[Var]) -> Var {
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn push_leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// Constant input; receives no gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push_leaf(value, false)
    }

    /// Differentiable input.
    pub fn variable(&mut self, value: Tensor) -> Var {
        self.push_leaf(value, true)
    }

    /// Binds a named parameter as a differentiable leaf. Repeated binds of
    /// the same name return the same node.
    pub fn bind(&mut self, store: &ParamStore, name: &str) -> Result<Var> {
        if let Some(&v) = self.bound.get(name) {
            return Ok(v);
        }
        let t = store
            .get(name)
            .ok_or_else(|| Error::Input(format!("unknown parameter `{name}`")))?
            .clone();
        let v = self.variable(t);
        self.bound.insert(name.to_string(), v);
        Ok(v)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value.item()
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = dims2(self.value(a), "matmul")?;
        let (k2, n) = dims2(self.value(b), "matmul")?;
        if k != k2 {
            return Err(Error::shape("matmul", self.value(a).shape(), self.value(b).shape()));
        }
        let mut out = vec![0.0; m * n];
        mm_acc(self.value(a).data(), self.value(b).data(), &mut out, m, k, n);
        Ok(self.push(
            Tensor {
                shape: vec![m, n],
                data: out,
            },
            Op::MatMul(a, b),
            &[a, b],
        ))
    }

    /// `a * b^T`
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = dims2(self.value(a), "matmul_nt")?;
        let (n, k2) = dims2(self.value(b), "matmul_nt")?;
        if k != k2 {
            return Err(Error::shape("matmul_nt", self.value(a).shape(), self.value(b).shape()));
        }
        let mut out = vec![0.0; m * n];
        mm_nt_acc(self.value(a).data(), self.value(b).data(), &mut out, m, k, n);
        Ok(self.push(
            Tensor {
                shape: vec![m, n],
                data: out,
            },
            Op::MatMulNt(a, b),
            &[a, b],
        ))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(Error::shape(op, self.value(a).shape(), self.value(b).shape()));
        }
        Ok(())
    }

    fn zip_with(&mut self, a: Var, b: Var, op: Op, f: impl Fn(f64, f64) -> f64) -> Var {
        let ta = self.value(a);
        let tb = self.value(b);
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect();
        let shape = ta.shape().to_vec();
        self.push(Tensor { shape, data }, op, &[a, b])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        Ok(self.zip_with(a, b, Op::Add(a, b), |x, y| x + y))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        Ok(self.zip_with(a, b, Op::Sub(a, b), |x, y| x - y))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        Ok(self.zip_with(a, b, Op::Mul(a, b), |x, y| x * y))
    }

    /// Adds a length-`n` row vector to every row of an `m x n` matrix.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (m, n) = dims2(self.value(a), "add_row")?;
        if self.value(row).numel() != n {
            return Err(Error::shape("add_row", self.value(a).shape(), self.value(row).shape()));
        }
        let r = self.value(row).data();
        let mut data = self.value(a).data().to_vec();
        for i in 0..m {
            add_into(&mut data[i * n..(i + 1) * n], r);
        }
        let shape = self.value(a).shape().to_vec();
        Ok(self.push(Tensor { shape, data }, Op::AddRow(a, row), &[a, row]))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let t = self.value(a);
        let data = t.data().iter().map(|x| x * c).collect();
        let shape = t.shape().to_vec();
        self.push(Tensor { shape, data }, Op::Scale(a, c), &[a])
    }

    /// Divides every element by a one-element tensor.
    pub fn div_scalar(&mut self, a: Var, s: Var) -> Result<Var> {
        if self.value(s).numel() != 1 {
            return Err(Error::shape("div_scalar", self.value(a).shape(), self.value(s).shape()));
        }
        let d = self.value(s).item();
        let t = self.value(a);
        let data = t.data().iter().map(|x| x / d).collect();
        let shape = t.shape().to_vec();
        Ok(self.push(Tensor { shape, data }, Op::DivScalar(a, s), &[a, s]))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let (m, n) = dims2(self.value(a), "transpose")?;
        let src = self.value(a).data();
        let mut data = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                data[j * m + i] = src[i * n + j];
            }
        }
        Ok(self.push(
            Tensor {
                shape: vec![n, m],
                data,
            },
            Op::Transpose(a),
            &[a],
        ))
    }

    /// Softmax along `axis`, shifted by the per-slice maximum.
    pub fn softmax(&mut self, x: Var, axis: usize) -> Result<Var> {
        let shape = self.value(x).shape().to_vec();
        if axis >= shape.len() {
            return Err(Error::Argument(format!(
                "softmax axis {axis} invalid for shape {shape:?}"
            )));
        }
        let outer: usize = shape[..axis].iter().product();
        let len = shape[axis];
        let inner: usize = shape[axis + 1..].iter().product();
        let src = self.value(x).data();
        let mut out = vec![0.0; src.len()];
        for o in 0..outer {
            for j in 0..inner {
                let idx = |i: usize| (o * len + i) * inner + j;
                let max = (0..len).map(|i| src[idx(i)]).fold(f64::NEG_INFINITY, f64::max);
                let mut sum = 0.0;
                for i in 0..len {
                    let e = (src[idx(i)] - max).exp();
                    out[idx(i)] = e;
                    sum += e;
                }
                for i in 0..len {
                    out[idx(i)] /= sum;
                }
            }
        }
        Ok(self.push(Tensor { shape, data: out }, Op::Softmax { x, outer, len, inner }, &[x]))
    }

    /// Row-wise layer normalization over the last axis with affine gain/bias.
    /// The variance floor `eps` sends constant rows to the bias.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var, eps: f64) -> Result<Var> {
        let (m, n) = dims2(self.value(x), "layer_norm")?;
        if self.value(gain).numel() != n || self.value(bias).numel() != n {
            return Err(Error::shape(
                "layer_norm",
                self.value(x).shape(),
                self.value(gain).shape(),
            ));
        }
        let src = self.value(x).data();
        let g = self.value(gain).data();
        let b = self.value(bias).data();
        let mut xhat = vec![0.0; m * n];
        let mut rstd = vec![0.0; m];
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let row = &src[i * n..(i + 1) * n];
            let mean = row.iter().sum::<f64>() / n as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            let r = 1.0 / (var + eps).sqrt();
            rstd[i] = r;
            for j in 0..n {
                let h = (row[j] - mean) * r;
                xhat[i * n + j] = h;
                out[i * n + j] = h * g[j] + b[j];
            }
        }
        let shape = self.value(x).shape().to_vec();
        Ok(self.push(
            Tensor { shape, data: out },
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                rstd,
            },
            &[x, gain, bias],
        ))
    }

    pub fn gelu(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let data = t.data().iter().map(|&v| gelu(v)).collect();
        let shape = t.shape().to_vec();
        self.push(Tensor { shape, data }, Op::Gelu(x), &[x])
    }

    /// Mean negative log-likelihood of `targets` under row-wise softmax of
    /// `logits[L x V]`. Positions equal to `ignore_index` contribute nothing;
    /// with every position ignored the loss is zero.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[usize], ignore_index: Option<usize>) -> Result<Var> {
        let (l, v) = dims2(self.value(logits), "cross_entropy")?;
        if targets.len() != l {
            return Err(Error::shape(
                "cross_entropy",
                self.value(logits).shape(),
                &[targets.len()],
            ));
        }
        let mut resolved = Vec::with_capacity(l);
        for &t in targets {
            if Some(t) == ignore_index {
                resolved.push(None);
            } else if t >= v {
                return Err(Error::Index {
                    index: t,
                    extent: v,
                    context: "cross_entropy target",
                });
            } else {
                resolved.push(Some(t));
            }
        }
        let src = self.value(logits).data();
        let mut probs = vec![0.0; l * v];
        let mut total = 0.0;
        let mut count = 0;
        for (i, target) in resolved.iter().enumerate() {
            let row = &src[i * v..(i + 1) * v];
            let lse = log_sum_exp(row);
            for j in 0..v {
                probs[i * v + j] = (row[j] - lse).exp();
            }
            if let Some(t) = target {
                total += lse - row[*t];
                count += 1;
            }
        }
        let loss = if count == 0 { 0.0 } else { total / count as f64 };
        Ok(self.push(
            Tensor::scalar(loss),
            Op::CrossEntropy {
                logits,
                targets: resolved,
                probs,
                count,
            },
            &[logits],
        ))
    }

    /// Scales every row to unit Euclidean norm.
    pub fn l2_normalize_rows(&mut self, x: Var) -> Result<Var> {
        let (m, n) = dims2(self.value(x), "l2_normalize_rows")?;
        let src = self.value(x).data();
        let mut norms = vec![0.0; m];
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let row = &src[i * n..(i + 1) * n];
            let norm = dot(row, row).sqrt().max(1e-12);
            norms[i] = norm;
            for j in 0..n {
                out[i * n + j] = row[j] / norm;
            }
        }
        let shape = self.value(x).shape().to_vec();
        Ok(self.push(Tensor { shape, data: out }, Op::L2Normalize { x, norms }, &[x]))
    }

    /// Row lookup into a `V x d` table.
    pub fn gather_rows(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let (v, d) = dims2(self.value(table), "gather_rows")?;
        if ids.is_empty() {
            return Err(Error::Input("gather_rows with no ids".into()));
        }
        let src = self.value(table).data();
        let mut out = Vec::with_capacity(ids.len() * d);
        for &id in ids {
            if id >= v {
                return Err(Error::Index {
                    index: id,
                    extent: v,
                    context: "gather_rows",
                });
            }
            out.extend_from_slice(&src[id * d..(id + 1) * d]);
        }
        Ok(self.push(
            Tensor {
                shape: vec![ids.len(), d],
                data: out,
            },
            Op::GatherRows {
                table,
                ids: ids.to_vec(),
            },
            &[table],
        ))
    }

    pub fn slice_rows(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let (m, n) = dims2(self.value(x), "slice_rows")?;
        if len == 0 || start + len > m {
            return Err(Error::Index {
                index: start + len,
                extent: m,
                context: "slice_rows",
            });
        }
        let data = self.value(x).data()[start * n..(start + len) * n].to_vec();
        Ok(self.push(
            Tensor {
                shape: vec![len, n],
                data,
            },
            Op::SliceRows { x, start },
            &[x],
        ))
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let (m, n) = dims2(self.value(x), "slice_cols")?;
        if len == 0 || start + len > n {
            return Err(Error::Index {
                index: start + len,
                extent: n,
                context: "slice_cols",
            });
        }
        let src = self.value(x).data();
        let mut data = Vec::with_capacity(m * len);
        for i in 0..m {
            data.extend_from_slice(&src[i * n + start..i * n + start + len]);
        }
        Ok(self.push(
            Tensor {
                shape: vec![m, len],
                data,
            },
            Op::SliceCols { x, start },
            &[x],
        ))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts
            .first()
            .ok_or_else(|| Error::Input("concat_rows of nothing".into()))?;
        let (_, n) = dims2(self.value(first), "concat_rows")?;
        let mut rows = 0;
        let mut data = Vec::new();
        for &p in parts {
            let (m, n2) = dims2(self.value(p), "concat_rows")?;
            if n2 != n {
                return Err(Error::shape(
                    "concat_rows",
                    self.value(first).shape(),
                    self.value(p).shape(),
                ));
            }
            rows += m;
            data.extend_from_slice(self.value(p).data());
        }
        Ok(self.push(
            Tensor {
                shape: vec![rows, n],
                data,
            },
            Op::ConcatRows(parts.to_vec()),
            parts,
        ))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts
            .first()
            .ok_or_else(|| Error::Input("concat_cols of nothing".into()))?;
        let (m, _) = dims2(self.value(first), "concat_cols")?;
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let (m2, n) = dims2(self.value(p), "concat_cols")?;
            if m2 != m {
                return Err(Error::shape(
                    "concat_cols",
                    self.value(first).shape(),
                    self.value(p).shape(),
                ));
            }
            widths.push(n);
        }
        let total: usize = widths.iter().sum();
        let mut data = Vec::with_capacity(m * total);
        for i in 0..m {
            for (&p, &w) in parts.iter().zip(&widths) {
                data.extend_from_slice(&self.value(p).data()[i * w..(i + 1) * w]);
            }
        }
        Ok(self.push(
            Tensor {
                shape: vec![m, total],
                data,
            },
            Op::ConcatCols(parts.to_vec()),
            parts,
        ))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().sum();
        self.push(Tensor::scalar(s), Op::Sum(x), &[x])
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let s = t.data().iter().sum::<f64>() / t.numel() as f64;
        self.push(Tensor::scalar(s), Op::Mean(x), &[x])
    }

    /// Reverse sweep from a one-element `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.value(loss).numel() != 1 {
            return Err(Error::Input(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        let n = loss.0 + 1;
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; n];
        grads[loss.0] = Some(vec![1.0]);
        let mut leaves: Vec<Option<Tensor>> = vec![None; self.nodes.len()];

        for i in (0..n).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad {
                grads[i] = None;
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            if let Op::Leaf = node.op {
                leaves[i] = Some(Tensor {
                    shape: node.value.shape().to_vec(),
                    data: g,
                });
                continue;
            }
            self.backprop_node(node, &g, &mut grads);
        }
        Ok(Gradients {
            leaves,
            named: self.bound.iter().map(|(k, v)| (k.clone(), *v)).collect(),
        })
    }

    fn backprop_node(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let wants = |v: Var| self.nodes[v.0].requires_grad;
        // Accumulates `delta` into the gradient buffer of `v`, allocating on first use.
        fn slot(grads: &mut [Option<Vec<f64>>], v: Var, len: usize) -> &mut Vec<f64> {
            grads[v.0].get_or_insert_with(|| vec![0.0; len])
        }
        let numel = |v: Var| self.nodes[v.0].value.numel();

        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (m, k) = self.value(*a).dims2().unwrap();
                let (_, n) = self.value(*b).dims2().unwrap();
                if wants(*a) {
                    let ga = slot(grads, *a, m * k);
                    mm_nt_acc(g, self.value(*b).data(), ga, m, n, k);
                }
                if wants(*b) {
                    let gb = slot(grads, *b, k * n);
                    mm_tn_acc(self.value(*a).data(), g, gb, m, k, n);
                }
            }
            Op::MatMulNt(a, b) => {
                // c = a b^T: da = g b, db = g^T a
                let (m, k) = self.value(*a).dims2().unwrap();
                let (n, _) = self.value(*b).dims2().unwrap();
                if wants(*a) {
                    let ga = slot(grads, *a, m * k);
                    mm_acc(g, self.value(*b).data(), ga, m, n, k);
                }
                if wants(*b) {
                    let gb = slot(grads, *b, n * k);
                    mm_tn_acc(g, self.value(*a).data(), gb, m, n, k);
                }
            }
            Op::Add(a, b) => {
                for v in [a, b] {
                    if wants(*v) {
                        add_into(slot(grads, *v, g.len()), g);
                    }
                }
            }
            Op::Sub(a, b) => {
                if wants(*a) {
                    add_into(slot(grads, *a, g.len()), g);
                }
                if wants(*b) {
                    let gb = slot(grads, *b, g.len());
                    for (d, s) in gb.iter_mut().zip(g) {
                        *d -= s;
                    }
                }
            }
            Op::Mul(a, b) => {
                if wants(*a) {
                    let other = self.value(*b).data();
                    let ga = slot(grads, *a, g.len());
                    for ((d, s), o) in ga.iter_mut().zip(g).zip(other) {
                        *d += s * o;
                    }
                }
                if wants(*b) {
                    let other = self.value(*a).data();
                    let gb = slot(grads, *b, g.len());
                    for ((d, s), o) in gb.iter_mut().zip(g).zip(other) {
                        *d += s * o;
                    }
                }
            }
            Op::AddRow(a, row) => {
                if wants(*a) {
                    add_into(slot(grads, *a, g.len()), g);
                }
                if wants(*row) {
                    let n = numel(*row);
                    let gr = slot(grads, *row, n);
                    for chunk in g.chunks(n) {
                        add_into(gr, chunk);
                    }
                }
            }
            Op::Scale(a, c) => {
                if wants(*a) {
                    let ga = slot(grads, *a, g.len());
                    for (d, s) in ga.iter_mut().zip(g) {
                        *d += s * c;
                    }
                }
            }
            Op::DivScalar(a, s) => {
                let d = self.value(*s).item();
                if wants(*a) {
                    let ga = slot(grads, *a, g.len());
                    for (acc, gv) in ga.iter_mut().zip(g) {
                        *acc += gv / d;
                    }
                }
                if wants(*s) {
                    let x = self.value(*a).data();
                    let total: f64 = g.iter().zip(x).map(|(gv, xv)| gv * xv).sum();
                    slot(grads, *s, 1)[0] -= total / (d * d);
                }
            }
            Op::Transpose(a) => {
                if wants(*a) {
                    let (m, n) = self.value(*a).dims2().unwrap();
                    let ga = slot(grads, *a, m * n);
                    for i in 0..m {
                        for j in 0..n {
                            ga[i * n + j] += g[j * m + i];
                        }
                    }
                }
            }
            Op::Softmax { x, outer, len, inner } => {
                if wants(*x) {
                    let y = node.value.data();
                    let gx = slot(grads, *x, y.len());
                    for o in 0..*outer {
                        for j in 0..*inner {
                            let idx = |i: usize| (o * len + i) * inner + j;
                            let s: f64 = (0..*len).map(|i| g[idx(i)] * y[idx(i)]).sum();
                            for i in 0..*len {
                                gx[idx(i)] += y[idx(i)] * (g[idx(i)] - s);
                            }
                        }
                    }
                }
            }
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                rstd,
            } => {
                let (m, n) = self.value(*x).dims2().unwrap();
                let gv = self.value(*gain).data();
                if wants(*x) {
                    let gx = slot(grads, *x, m * n);
                    let mut dxhat = vec![0.0; n];
                    for i in 0..m {
                        let gr = &g[i * n..(i + 1) * n];
                        let hr = &xhat[i * n..(i + 1) * n];
                        for j in 0..n {
                            dxhat[j] = gr[j] * gv[j];
                        }
                        let mean_d = dxhat.iter().sum::<f64>() / n as f64;
                        let mean_dh = dot(&dxhat, hr) / n as f64;
                        for j in 0..n {
                            gx[i * n + j] += rstd[i] * (dxhat[j] - mean_d - hr[j] * mean_dh);
                        }
                    }
                }
                if wants(*gain) {
                    let gg = slot(grads, *gain, n);
                    for i in 0..m {
                        for j in 0..n {
                            gg[j] += g[i * n + j] * xhat[i * n + j];
                        }
                    }
                }
                if wants(*bias) {
                    let gb = slot(grads, *bias, n);
                    for chunk in g.chunks(n) {
                        add_into(gb, chunk);
                    }
                }
            }
            Op::Gelu(x) => {
                if wants(*x) {
                    let xv = self.value(*x).data();
                    let gx = slot(grads, *x, g.len());
                    for ((d, s), &v) in gx.iter_mut().zip(g).zip(xv) {
                        *d += s * gelu_grad(v);
                    }
                }
            }
            Op::CrossEntropy {
                logits,
                targets,
                probs,
                count,
            } => {
                if wants(*logits) && *count > 0 {
                    let (_, v) = self.value(*logits).dims2().unwrap();
                    let scale = g[0] / *count as f64;
                    let gl = slot(grads, *logits, probs.len());
                    for (i, t) in targets.iter().enumerate() {
                        let Some(t) = t else { continue };
                        for j in 0..v {
                            gl[i * v + j] += scale * probs[i * v + j];
                        }
                        gl[i * v + t] -= scale;
                    }
                }
            }
            Op::L2Normalize { x, norms } => {
                if wants(*x) {
                    let (m, n) = self.value(*x).dims2().unwrap();
                    let y = node.value.data();
                    let gx = slot(grads, *x, m * n);
                    for i in 0..m {
                        let yr = &y[i * n..(i + 1) * n];
                        let gr = &g[i * n..(i + 1) * n];
                        let proj = dot(yr, gr);
                        for j in 0..n {
                            gx[i * n + j] += (gr[j] - yr[j] * proj) / norms[i];
                        }
                    }
                }
            }
            Op::GatherRows { table, ids } => {
                if wants(*table) {
                    let (_, d) = self.value(*table).dims2().unwrap();
                    let gt = slot(grads, *table, numel(*table));
                    for (r, &id) in ids.iter().enumerate() {
                        add_into(&mut gt[id * d..(id + 1) * d], &g[r * d..(r + 1) * d]);
                    }
                }
            }
            Op::SliceRows { x, start } => {
                if wants(*x) {
                    let (_, n) = self.value(*x).dims2().unwrap();
                    let gx = slot(grads, *x, numel(*x));
                    add_into(&mut gx[start * n..start * n + g.len()], g);
                }
            }
            Op::SliceCols { x, start } => {
                if wants(*x) {
                    let (m, n) = self.value(*x).dims2().unwrap();
                    let len = g.len() / m;
                    let gx = slot(grads, *x, m * n);
                    for i in 0..m {
                        add_into(&mut gx[i * n + start..i * n + start + len], &g[i * len..(i + 1) * len]);
                    }
                }
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let len = numel(p);
                    if wants(p) {
                        add_into(slot(grads, p, len), &g[offset..offset + len]);
                    }
                    offset += len;
                }
            }
            Op::ConcatCols(parts) => {
                let (m, total) = node.value.dims2().unwrap();
                let mut col = 0;
                for &p in parts {
                    let w = numel(p) / m;
                    if wants(p) {
                        let gp = slot(grads, p, m * w);
                        for i in 0..m {
                            add_into(&mut gp[i * w..(i + 1) * w], &g[i * total + col..i * total + col + w]);
                        }
                    }
                    col += w;
                }
            }
            Op::Sum(x) => {
                if wants(*x) {
                    for d in slot(grads, *x, numel(*x)).iter_mut() {
                        *d += g[0];
                    }
                }
            }
            Op::Mean(x) => {
                if wants(*x) {
                    let n = numel(*x);
                    for d in slot(grads, *x, n).iter_mut() {
                        *d += g[0] / n as f64;
                    }
                }
            }
        }
    }
}
