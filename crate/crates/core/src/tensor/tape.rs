//! Tape-based reverse-mode differentiation.
//!
//! Every op appends a node holding its output value and enough context to
//! push gradients back to its inputs. [`Tape::backward`] walks the nodes in
//! strict reverse order of creation. Parameters enter the tape as borrowed
//! leaves tagged with a caller-chosen key; their gradients come back keyed
//! the same way.

use std::borrow::Cow;
use std::collections::BTreeMap;

use rand::Rng;

use super::kernels::{self, Strides};
use super::Tensor;
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul {
        a: Var,
        b: Var,
        batch: usize,
        m: usize,
        k: usize,
        n: usize,
        b_shared: bool,
        b_transposed: bool,
    },
    Add(Var, Var),
    AddBias {
        x: Var,
        bias: Var,
    },
    Scale {
        x: Var,
        factor: f64,
    },
    /// Keeps Φ(x) from the forward pass for the derivative.
    Gelu { x: Var, cdf: Vec<f64> },
    Softmax {
        x: Var,
        temperature: f64,
    },
    LayerNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        normalized: Vec<f64>,
        inv_std: Vec<f64>,
    },
    Embedding {
        table: Var,
        ids: Vec<usize>,
    },
    Dropout {
        x: Var,
        mask: Vec<f64>,
    },
    TransposeLastTwo(Var),
    SwapAxes12(Var),
    Concat(Vec<Var>),
    Reshape(Var),
    MaskKeys(Var),
    SelectRows {
        x: Var,
        rows: Vec<usize>,
    },
    CrossEntropy {
        logits: Var,
        labels: Vec<i64>,
        ignore: i64,
        probs: Vec<f64>,
        count: usize,
    },
    SoftCrossEntropy {
        logits: Var,
        target: Vec<f64>,
        probs: Vec<f64>,
        temperature: f64,
    },
    Sum(Var),
}

struct Node<'p> {
    value: Cow<'p, Tensor>,
    op: Op,
    param: Option<usize>,
}

/// Records a computation for one forward/backward pass.
#[derive(Default)]
pub struct Tape<'p> {
    nodes: Vec<Node<'p>>,
}

/// Accumulated parameter gradients returned by [`Tape::backward`].
#[derive(Debug, Default)]
pub struct Gradients {
    by_param: BTreeMap<usize, Tensor>,
}

impl Gradients {
    /// Gradient for `key`, or `None` if the parameter never reached the loss.
    pub fn get(&self, key: usize) -> Option<&Tensor> {
        self.by_param.get(&key)
    }

    /// Gradient for `key`, with the zero tensor of `shape` for parameters
    /// that were not on the tape.
    pub fn get_or_zero(&self, key: usize, shape: &[usize]) -> Tensor {
        self.by_param
            .get(&key)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(shape.to_vec()))
    }

    pub fn take(&mut self, key: usize) -> Option<Tensor> {
        self.by_param.remove(&key)
    }
}

fn add_into(dst: &mut Option<Vec<f64>>, src: &[f64]) {
    match dst {
        Some(d) => d.iter_mut().zip(src).for_each(|(a, b)| *a += b),
        None => *dst = Some(src.to_vec()),
    }
}

fn add_owned(dst: &mut Option<Vec<f64>>, src: Vec<f64>) {
    match dst {
        Some(d) => d.iter_mut().zip(&src).for_each(|(a, b)| *a += b),
        None => *dst = Some(src),
    }
}

fn swap_axes_12(data: &[f64], dims: [usize; 4]) -> Vec<f64> {
    let [a, b, c, d] = dims;
    let mut out = vec![0.0; data.len()];
    for i in 0..a {
        for j in 0..b {
            for l in 0..c {
                let src = ((i * b + j) * c + l) * d;
                let dst = ((i * c + l) * b + j) * d;
                out[dst..dst + d].copy_from_slice(&data[src..src + d]);
            }
        }
    }
    out
}

fn transpose_last_two(data: &[f64], batch: usize, rows: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; data.len()];
    for b in 0..batch {
        let base = b * rows * cols;
        for r in 0..rows {
            for c in 0..cols {
                out[base + c * rows + r] = data[base + r * cols + c];
            }
        }
    }
    out
}

impl<'p> Tape<'p> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node {
            value: Cow::Owned(value),
            op,
            param: None,
        });
        Var(self.nodes.len() - 1)
    }

    /// Borrowed trainable leaf; its gradient is reported under `key`.
    pub fn param(&mut self, key: usize, value: &'p Tensor) -> Var {
        self.nodes.push(Node {
            value: Cow::Borrowed(value),
            op: Op::Leaf,
            param: Some(key),
        });
        Var(self.nodes.len() - 1)
    }

    /// Owned trainable leaf.
    pub fn param_owned(&mut self, key: usize, value: Tensor) -> Var {
        self.nodes.push(Node {
            value: Cow::Owned(value),
            op: Op::Leaf,
            param: Some(key),
        });
        Var(self.nodes.len() - 1)
    }

    /// Leaf that receives no reported gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    /// Matrix product. `a` is `[..., m, k]`; `b` is either `[k, n]` (shared
    /// by every leading index of `a`) or `[..., k, n]` with the same leading
    /// dimensions as `a`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.matmul_impl(a, b, false)
    }

    /// `a · bᵀ` where `b` is `[n, k]` (or batched `[..., n, k]`).
    pub fn matmul_transposed(&mut self, a: Var, b: Var) -> Result<Var> {
        self.matmul_impl(a, b, true)
    }

    fn matmul_impl(&mut self, a: Var, b: Var, b_transposed: bool) -> Result<Var> {
        let sa = self.shape(a).to_vec();
        let sb = self.shape(b).to_vec();
        let mismatch = || {
            Error::shape(format!(
                "matmul of {sa:?} and {sb:?}{}",
                if b_transposed { " (rhs transposed)" } else { "" }
            ))
        };
        if sa.len() < 2 || sb.len() < 2 {
            return Err(mismatch());
        }
        let (b_rows, b_cols) = (sb[sb.len() - 2], sb[sb.len() - 1]);
        let (k_b, n) = if b_transposed {
            (b_cols, b_rows)
        } else {
            (b_rows, b_cols)
        };
        let k = sa[sa.len() - 1];
        if k != k_b {
            return Err(mismatch());
        }
        let b_shared = sb.len() == 2;
        let (batch, m) = if b_shared {
            (1, sa[..sa.len() - 1].iter().product())
        } else {
            if sa[..sa.len() - 2] != sb[..sb.len() - 2] {
                return Err(mismatch());
            }
            (sa[..sa.len() - 2].iter().product(), sa[sa.len() - 2])
        };
        let mut out_shape = sa[..sa.len() - 1].to_vec();
        out_shape.push(n);

        let b_view = if b_transposed {
            Strides::row_major(k).transposed()
        } else {
            Strides::row_major(n)
        };
        let av = self.value(a).data();
        let bv = self.value(b).data();
        let mut out = vec![0.0; batch * m * n];
        for i in 0..batch {
            let b_off = if b_shared { 0 } else { i * k * n };
            kernels::gemm(
                m,
                k,
                n,
                &av[i * m * k..],
                Strides::row_major(k),
                &bv[b_off..],
                b_view,
                0.0,
                &mut out[i * m * n..],
                Strides::row_major(n),
            );
        }
        let value = Tensor::new(out_shape, out)?;
        Ok(self.push(
            value,
            Op::MatMul {
                a,
                b,
                batch,
                m,
                k,
                n,
                b_shared,
                b_transposed,
            },
        ))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::shape(format!(
                "add of {:?} and {:?}",
                self.shape(a),
                self.shape(b)
            )));
        }
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x + y)
            .collect();
        let value = Tensor::new(self.shape(a).to_vec(), data)?;
        Ok(self.push(value, Op::Add(a, b)))
    }

    /// Adds a `[d]` vector to every last-axis slice of `x`.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let d = self.value(x).last_dim();
        if self.shape(bias) != [d] {
            return Err(Error::shape(format!(
                "bias {:?} does not match last axis of {:?}",
                self.shape(bias),
                self.shape(x)
            )));
        }
        let bv = self.value(bias).data();
        let data = self
            .value(x)
            .data()
            .chunks_exact(d)
            .flat_map(|row| row.iter().zip(bv).map(|(a, b)| a + b))
            .collect();
        let value = Tensor::new(self.shape(x).to_vec(), data)?;
        Ok(self.push(value, Op::AddBias { x, bias }))
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Var {
        let v = self.value(x);
        let value = Tensor {
            shape: v.shape().to_vec(),
            data: v.data().iter().map(|a| a * factor).collect(),
        };
        self.push(value, Op::Scale { x, factor })
    }

    pub fn gelu(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let cdf: Vec<f64> = v.data().iter().map(|&a| kernels::normal_cdf(a)).collect();
        let value = Tensor {
            shape: v.shape().to_vec(),
            data: v.data().iter().zip(&cdf).map(|(&a, &c)| a * c).collect(),
        };
        self.push(value, Op::Gelu { x, cdf })
    }

    /// Tempered softmax over the last axis.
    pub fn softmax_rows(&mut self, x: Var, temperature: f64) -> Result<Var> {
        if !(temperature > 0.0) || !temperature.is_finite() {
            return Err(Error::param(format!(
                "softmax temperature must be positive and finite, got {temperature}"
            )));
        }
        let mut value = self.value(x).clone();
        let d = value.last_dim();
        for row in value.data_mut().chunks_exact_mut(d) {
            kernels::softmax_tempered_in_place(row, temperature);
        }
        Ok(self.push(value, Op::Softmax { x, temperature }))
    }

    /// Layer normalization over the last axis with affine `gamma`/`beta`.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var, eps: f64) -> Result<Var> {
        let d = self.value(x).last_dim();
        if self.shape(gamma) != [d] || self.shape(beta) != [d] {
            return Err(Error::shape(format!(
                "layer_norm over {:?} with gamma {:?} and beta {:?}",
                self.shape(x),
                self.shape(gamma),
                self.shape(beta)
            )));
        }
        let xv = self.value(x);
        let g = self.value(gamma).data();
        let b = self.value(beta).data();
        let rows = xv.rows();
        let mut normalized = vec![0.0; xv.numel()];
        let mut inv_std = vec![0.0; rows];
        let mut out = vec![0.0; xv.numel()];
        for (r, row) in xv.data().chunks_exact(d).enumerate() {
            let mean = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
            let inv = 1.0 / (var + eps).sqrt();
            inv_std[r] = inv;
            for j in 0..d {
                let xh = (row[j] - mean) * inv;
                normalized[r * d + j] = xh;
                out[r * d + j] = xh * g[j] + b[j];
            }
        }
        let value = Tensor::new(xv.shape().to_vec(), out)?;
        Ok(self.push(
            value,
            Op::LayerNorm {
                x,
                gamma,
                beta,
                normalized,
                inv_std,
            },
        ))
    }

    /// Gathers rows of a `[V, d]` table; output is `[ids.len(), d]`.
    pub fn embedding(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let shape = self.shape(table);
        if shape.len() != 2 {
            return Err(Error::shape(format!("embedding table {shape:?} is not 2-D")));
        }
        let (vocab, d) = (shape[0], shape[1]);
        if let Some((pos, &bad)) = ids.iter().enumerate().find(|(_, &id)| id >= vocab) {
            return Err(Error::data(format!(
                "token {bad} at position {pos} is outside vocabulary of {vocab}"
            )));
        }
        let tv = self.value(table).data();
        let mut out = Vec::with_capacity(ids.len() * d);
        for &id in ids {
            out.extend_from_slice(&tv[id * d..(id + 1) * d]);
        }
        let value = Tensor::new([ids.len(), d], out)?;
        Ok(self.push(
            value,
            Op::Embedding {
                table,
                ids: ids.to_vec(),
            },
        ))
    }

    /// Inverted dropout: zeroes each value with probability `rate` and
    /// scales survivors by `1 / (1 - rate)`.
    pub fn dropout(&mut self, x: Var, rate: f64, rng: &mut impl Rng) -> Result<Var> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::param(format!("dropout rate {rate} outside [0, 1)")));
        }
        if rate == 0.0 {
            return Ok(x);
        }
        let keep = 1.0 / (1.0 - rate);
        let xv = self.value(x);
        let mask: Vec<f64> = (0..xv.numel())
            .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
            .collect();
        let data = xv.data().iter().zip(&mask).map(|(a, m)| a * m).collect();
        let value = Tensor::new(xv.shape().to_vec(), data)?;
        Ok(self.push(value, Op::Dropout { x, mask }))
    }

    pub fn transpose_last_two(&mut self, x: Var) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if shape.len() < 2 {
            return Err(Error::shape(format!("cannot transpose {shape:?}")));
        }
        let (r, c) = (shape[shape.len() - 2], shape[shape.len() - 1]);
        let batch = shape[..shape.len() - 2].iter().product();
        let data = transpose_last_two(self.value(x).data(), batch, r, c);
        let mut out_shape = shape;
        let len = out_shape.len();
        out_shape.swap(len - 2, len - 1);
        let value = Tensor::new(out_shape, data)?;
        Ok(self.push(value, Op::TransposeLastTwo(x)))
    }

    /// `[a, b, c, d] -> [a, c, b, d]`; moves heads next to the batch axis
    /// and back.
    pub fn swap_axes_12(&mut self, x: Var) -> Result<Var> {
        let s = self.shape(x).to_vec();
        if s.len() != 4 {
            return Err(Error::shape(format!("swap_axes_12 needs rank 4, got {s:?}")));
        }
        let data = swap_axes_12(self.value(x).data(), [s[0], s[1], s[2], s[3]]);
        let value = Tensor::new([s[0], s[2], s[1], s[3]], data)?;
        Ok(self.push(value, Op::SwapAxes12(x)))
    }

    /// Concatenates along the last axis; all leading dimensions must agree.
    pub fn concat_last_axis(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts
            .first()
            .ok_or_else(|| Error::shape("concat of zero tensors"))?;
        let lead = self.shape(*first)[..self.shape(*first).len() - 1].to_vec();
        let mut width = 0;
        for &p in parts {
            let s = self.shape(p);
            if s.is_empty() || s[..s.len() - 1] != lead[..] {
                return Err(Error::shape(format!(
                    "concat of {s:?} with leading dims {lead:?}"
                )));
            }
            width += s[s.len() - 1];
        }
        let rows: usize = lead.iter().product();
        let mut out = Vec::with_capacity(rows * width);
        for r in 0..rows {
            for &p in parts {
                out.extend_from_slice(self.value(p).row(r));
            }
        }
        let mut shape = lead;
        shape.push(width);
        let value = Tensor::new(shape, out)?;
        Ok(self.push(value, Op::Concat(parts.to_vec())))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let value = self.value(x).clone().reshape(shape.to_vec())?;
        Ok(self.push(value, Op::Reshape(x)))
    }

    /// Adds `-1e9` to attention scores `[B, H, Q, K]` wherever the key
    /// position is flagged in `blocked` (`[B * K]`).
    pub fn mask_keys(&mut self, scores: Var, blocked: &[bool]) -> Result<Var> {
        let s = self.shape(scores).to_vec();
        if s.len() != 4 || blocked.len() != s[0] * s[3] {
            return Err(Error::shape(format!(
                "key mask of length {} for scores {s:?}",
                blocked.len()
            )));
        }
        let (b, h, q, k) = (s[0], s[1], s[2], s[3]);
        let mut data = self.value(scores).data().to_vec();
        for bi in 0..b {
            let flags = &blocked[bi * k..(bi + 1) * k];
            if !flags.iter().any(|&f| f) {
                continue;
            }
            for row in data[bi * h * q * k..(bi + 1) * h * q * k].chunks_exact_mut(k) {
                for (v, &f) in row.iter_mut().zip(flags) {
                    if f {
                        *v += -1e9;
                    }
                }
            }
        }
        let value = Tensor::new(s, data)?;
        Ok(self.push(value, Op::MaskKeys(scores)))
    }

    /// Picks last-axis slices by flat row index; output is `[rows.len(), d]`.
    pub fn select_rows(&mut self, x: Var, rows: &[usize]) -> Result<Var> {
        let xv = self.value(x);
        let (n_rows, d) = (xv.rows(), xv.last_dim());
        if let Some(&bad) = rows.iter().find(|&&r| r >= n_rows) {
            return Err(Error::shape(format!(
                "row {bad} out of range for {:?}",
                xv.shape()
            )));
        }
        let mut out = Vec::with_capacity(rows.len() * d);
        for &r in rows {
            out.extend_from_slice(xv.row(r));
        }
        let value = Tensor::new([rows.len(), d], out)?;
        Ok(self.push(
            value,
            Op::SelectRows {
                x,
                rows: rows.to_vec(),
            },
        ))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let value = Tensor::scalar(self.value(x).sum());
        self.push(value, Op::Sum(x))
    }

    /// Mean over non-ignored rows of `-log softmax(logits)[label]`.
    ///
    /// `logits` is `[..., V]` with one label per last-axis slice. Returns the
    /// scalar loss (0 when every row is ignored) and the number of rows that
    /// contributed.
    pub fn cross_entropy_masked(
        &mut self,
        logits: Var,
        labels: &[i64],
        ignore_label: i64,
    ) -> Result<(Var, usize)> {
        let lv = self.value(logits);
        let (rows, vocab) = (lv.rows(), lv.last_dim());
        if labels.len() != rows {
            return Err(Error::shape(format!(
                "{} labels for logits {:?}",
                labels.len(),
                lv.shape()
            )));
        }
        let mut probs = vec![0.0; lv.numel()];
        let mut total = 0.0;
        let mut count = 0;
        for (r, &label) in labels.iter().enumerate() {
            if label == ignore_label {
                continue;
            }
            if label < 0 || label as usize >= vocab {
                return Err(Error::data(format!(
                    "label {label} at position {r} outside [0, {vocab})"
                )));
            }
            let row = lv.row(r);
            let lse = kernels::log_sum_exp_tempered(row, 1.0);
            total += lse - row[label as usize];
            count += 1;
            let p = &mut probs[r * vocab..(r + 1) * vocab];
            p.copy_from_slice(row);
            kernels::softmax_tempered_in_place(p, 1.0);
        }
        let loss = if count == 0 { 0.0 } else { total / count as f64 };
        let var = self.push(
            Tensor::scalar(loss),
            Op::CrossEntropy {
                logits,
                labels: labels.to_vec(),
                ignore: ignore_label,
                probs,
                count,
            },
        );
        Ok((var, count))
    }

    /// Mean over rows of `-Σ_i p_i log q_i`, where `p` is a fixed target
    /// distribution per row and `q = softmax(logits / T)`.
    pub fn soft_cross_entropy(
        &mut self,
        logits: Var,
        target: &Tensor,
        temperature: f64,
    ) -> Result<Var> {
        if !(temperature > 0.0) || !temperature.is_finite() {
            return Err(Error::param(format!(
                "temperature must be positive and finite, got {temperature}"
            )));
        }
        let lv = self.value(logits);
        if lv.shape() != target.shape() {
            return Err(Error::shape(format!(
                "soft targets {:?} for logits {:?}",
                target.shape(),
                lv.shape()
            )));
        }
        let (rows, vocab) = (lv.rows(), lv.last_dim());
        let mut probs = lv.data().to_vec();
        let mut total = 0.0;
        for r in 0..rows {
            let row = lv.row(r);
            let lse = kernels::log_sum_exp_tempered(row, temperature);
            let p = target.row(r);
            total += row
                .iter()
                .zip(p)
                .map(|(&z, &pi)| if pi == 0.0 { 0.0 } else { -pi * (z / temperature - lse) })
                .sum::<f64>();
            kernels::softmax_tempered_in_place(
                &mut probs[r * vocab..(r + 1) * vocab],
                temperature,
            );
        }
        let loss = total / rows as f64;
        Ok(self.push(
            Tensor::scalar(loss),
            Op::SoftCrossEntropy {
                logits,
                target: target.data().to_vec(),
                probs,
                temperature,
            },
        ))
    }

    /// Runs the reverse pass from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.value(loss).numel() != 1 {
            return Err(Error::contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);
        let mut out = Gradients::default();

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf => {
                    if let Some(key) = node.param {
                        match out.by_param.get_mut(&key) {
                            Some(t) => t
                                .data_mut()
                                .iter_mut()
                                .zip(&g)
                                .for_each(|(a, b)| *a += b),
                            None => {
                                let t = Tensor::new(node.value.shape().to_vec(), g)?;
                                out.by_param.insert(key, t);
                            }
                        }
                    }
                }
                Op::MatMul {
                    a,
                    b,
                    batch,
                    m,
                    k,
                    n,
                    b_shared,
                    b_transposed,
                } => {
                    let (batch, m, k, n) = (*batch, *m, *k, *n);
                    let av = self.value(*a).data();
                    let bv = self.value(*b).data();
                    let b_view = if *b_transposed {
                        Strides::row_major(k).transposed()
                    } else {
                        Strides::row_major(n)
                    };
                    let mut ga = vec![0.0; av.len()];
                    let mut gb = vec![0.0; bv.len()];
                    for i in 0..batch {
                        let b_off = if *b_shared { 0 } else { i * k * n };
                        let gc = &g[i * m * n..];
                        // dA = dC · Bᵀ
                        kernels::gemm(
                            m,
                            n,
                            k,
                            gc,
                            Strides::row_major(n),
                            &bv[b_off..],
                            b_view.transposed(),
                            1.0,
                            &mut ga[i * m * k..],
                            Strides::row_major(k),
                        );
                        // dB = Aᵀ · dC, written through B's own view
                        kernels::gemm(
                            k,
                            m,
                            n,
                            &av[i * m * k..],
                            Strides::row_major(k).transposed(),
                            gc,
                            Strides::row_major(n),
                            1.0,
                            &mut gb[b_off..],
                            b_view,
                        );
                    }
                    add_owned(&mut grads[a.0], ga);
                    add_owned(&mut grads[b.0], gb);
                }
                Op::Add(a, b) => {
                    add_into(&mut grads[a.0], &g);
                    add_owned(&mut grads[b.0], g);
                }
                Op::AddBias { x, bias } => {
                    let d = self.value(*bias).numel();
                    let mut gb = vec![0.0; d];
                    for row in g.chunks_exact(d) {
                        gb.iter_mut().zip(row).for_each(|(a, b)| *a += b);
                    }
                    add_owned(&mut grads[bias.0], gb);
                    add_owned(&mut grads[x.0], g);
                }
                Op::Scale { x, factor } => {
                    let gx = g.iter().map(|v| v * factor).collect();
                    add_owned(&mut grads[x.0], gx);
                }
                Op::Gelu { x, cdf } => {
                    let xv = self.value(*x).data();
                    let gx = g
                        .iter()
                        .zip(xv)
                        .zip(cdf)
                        .map(|((gi, &xi), &c)| gi * (c + xi * kernels::normal_pdf(xi)))
                        .collect();
                    add_owned(&mut grads[x.0], gx);
                }
                Op::Softmax { x, temperature } => {
                    let y = node.value.data();
                    let d = node.value.last_dim();
                    let mut gx = vec![0.0; y.len()];
                    for ((gr, yr), out_r) in g
                        .chunks_exact(d)
                        .zip(y.chunks_exact(d))
                        .zip(gx.chunks_exact_mut(d))
                    {
                        let dot: f64 = gr.iter().zip(yr).map(|(a, b)| a * b).sum();
                        for j in 0..d {
                            out_r[j] = yr[j] * (gr[j] - dot) / temperature;
                        }
                    }
                    add_owned(&mut grads[x.0], gx);
                }
                Op::LayerNorm {
                    x,
                    gamma,
                    beta,
                    normalized,
                    inv_std,
                } => {
                    let gv = self.value(*gamma).data();
                    let d = gv.len();
                    let mut gx = vec![0.0; g.len()];
                    let mut gg = vec![0.0; d];
                    let mut gbeta = vec![0.0; d];
                    for (r, (grow, xh)) in g
                        .chunks_exact(d)
                        .zip(normalized.chunks_exact(d))
                        .enumerate()
                    {
                        let mut mean_dxh = 0.0;
                        let mut mean_dxh_xh = 0.0;
                        for j in 0..d {
                            gg[j] += grow[j] * xh[j];
                            gbeta[j] += grow[j];
                            let dxh = grow[j] * gv[j];
                            mean_dxh += dxh;
                            mean_dxh_xh += dxh * xh[j];
                        }
                        mean_dxh /= d as f64;
                        mean_dxh_xh /= d as f64;
                        for j in 0..d {
                            let dxh = grow[j] * gv[j];
                            gx[r * d + j] = inv_std[r] * (dxh - mean_dxh - xh[j] * mean_dxh_xh);
                        }
                    }
                    add_owned(&mut grads[x.0], gx);
                    add_owned(&mut grads[gamma.0], gg);
                    add_owned(&mut grads[beta.0], gbeta);
                }
                Op::Embedding { table, ids } => {
                    let tv = self.value(*table);
                    let d = tv.last_dim();
                    let mut gt = vec![0.0; tv.numel()];
                    for (row, &id) in g.chunks_exact(d).zip(ids) {
                        gt[id * d..(id + 1) * d]
                            .iter_mut()
                            .zip(row)
                            .for_each(|(a, b)| *a += b);
                    }
                    add_owned(&mut grads[table.0], gt);
                }
                Op::Dropout { x, mask } => {
                    let gx = g.iter().zip(mask).map(|(a, m)| a * m).collect();
                    add_owned(&mut grads[x.0], gx);
                }
                Op::TransposeLastTwo(x) => {
                    let s = node.value.shape();
                    let (r, c) = (s[s.len() - 2], s[s.len() - 1]);
                    let batch = s[..s.len() - 2].iter().product();
                    add_owned(&mut grads[x.0], transpose_last_two(&g, batch, r, c));
                }
                Op::SwapAxes12(x) => {
                    let s = node.value.shape();
                    add_owned(&mut grads[x.0], swap_axes_12(&g, [s[0], s[1], s[2], s[3]]));
                }
                Op::Concat(parts) => {
                    let width = node.value.last_dim();
                    let rows = node.value.rows();
                    let mut offset = 0;
                    for p in parts {
                        let w = self.value(*p).last_dim();
                        let mut gp = Vec::with_capacity(rows * w);
                        for r in 0..rows {
                            gp.extend_from_slice(&g[r * width + offset..r * width + offset + w]);
                        }
                        add_owned(&mut grads[p.0], gp);
                        offset += w;
                    }
                }
                Op::Reshape(x) | Op::MaskKeys(x) => add_owned(&mut grads[x.0], g),
                Op::SelectRows { x, rows } => {
                    let xv = self.value(*x);
                    let d = xv.last_dim();
                    let mut gx = vec![0.0; xv.numel()];
                    for (row, &r) in g.chunks_exact(d).zip(rows) {
                        gx[r * d..(r + 1) * d]
                            .iter_mut()
                            .zip(row)
                            .for_each(|(a, b)| *a += b);
                    }
                    add_owned(&mut grads[x.0], gx);
                }
                Op::CrossEntropy {
                    logits,
                    labels,
                    ignore,
                    probs,
                    count,
                } => {
                    let vocab = self.value(*logits).last_dim();
                    let mut gl = vec![0.0; probs.len()];
                    if *count > 0 {
                        let scale = g[0] / *count as f64;
                        for (r, &label) in labels.iter().enumerate() {
                            if label == *ignore {
                                continue;
                            }
                            let p = &probs[r * vocab..(r + 1) * vocab];
                            let out_r = &mut gl[r * vocab..(r + 1) * vocab];
                            for j in 0..vocab {
                                out_r[j] = p[j] * scale;
                            }
                            out_r[label as usize] -= scale;
                        }
                    }
                    add_owned(&mut grads[logits.0], gl);
                }
                Op::SoftCrossEntropy {
                    logits,
                    target,
                    probs,
                    temperature,
                } => {
                    let lv = self.value(*logits);
                    let (rows, vocab) = (lv.rows(), lv.last_dim());
                    // d/dz_j = (q_j Σ_i p_i - p_j) / T per row
                    let scale = g[0] / (*temperature * rows as f64);
                    let mut gl = vec![0.0; probs.len()];
                    for r in 0..rows {
                        let span = r * vocab..(r + 1) * vocab;
                        let mass: f64 = target[span.clone()].iter().sum();
                        for j in span {
                            gl[j] = (probs[j] * mass - target[j]) * scale;
                        }
                    }
                    add_owned(&mut grads[logits.0], gl);
                }
                Op::Sum(x) => {
                    let n = self.value(*x).numel();
                    add_owned(&mut grads[x.0], vec![g[0]; n]);
                }
            }
        }
        Ok(out)
    }
}
