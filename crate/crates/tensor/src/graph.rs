//! Recorded forward pass ("tape") with reverse-mode differentiation.
//!
//! Every operation appends one node holding its output value plus whatever
//! it needs for the backward sweep. Parameters live outside the tape in a
//! [`ParamStore`]; ops read them during the forward pass and
//! [`Graph::backward`] accumulates into the store's gradient buffers.

use crate::error::{Result, TensorError};
use crate::gemm::{gemm, Layout};
use crate::params::{ParamId, ParamStore};
use crate::softmax::masked_bounded_softmax_parts;
use crate::tensor::Tensor;

/// Handle to a node on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone, Copy)]
struct ConvGeom {
    batch: usize,
    in_ch: usize,
    height: usize,
    width: usize,
    out_ch: usize,
    kernel: usize,
    stride: usize,
    pad: usize,
    out_h: usize,
    out_w: usize,
}

impl ConvGeom {
    fn patch(&self) -> usize {
        self.in_ch * self.kernel * self.kernel
    }

    fn out_plane(&self) -> usize {
        self.out_h * self.out_w
    }
}

#[derive(Debug)]
enum Op {
    Input,
    Conv2d {
        x: Var,
        w: ParamId,
        b: ParamId,
        geom: ConvGeom,
        cols: Vec<f64>,
    },
    Linear {
        x: Var,
        w: ParamId,
        b: ParamId,
    },
    Relu(Var),
    Reshape(Var),
    BoundedSoftmax {
        x: Var,
        mask: Vec<bool>,
        eps: f64,
        soft: Vec<f64>,
    },
    Gather {
        x: Var,
        index: Vec<usize>,
    },
    Ln(Var),
    MulConst {
        x: Var,
        c: Vec<f64>,
    },
    Scale {
        x: Var,
        s: f64,
    },
    Mean(Var),
    Sum(Var),
    Mse {
        x: Var,
        target: Vec<f64>,
    },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

/// Gradients of the loss with respect to every node on the tape.
pub struct NodeGrads {
    grads: Vec<Option<Tensor>>,
}

impl NodeGrads {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads[v.0].as_ref()
    }
}

#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn input(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Input)
    }

    /// Cross-correlation of a `[B, C, H, W]` input with `[O, C, k, k]` kernels.
    pub fn conv2d(
        &mut self,
        store: &ParamStore,
        x: Var,
        w: ParamId,
        b: ParamId,
        stride: usize,
        pad: usize,
    ) -> Result<Var> {
        let xs = self.value(x).shape().to_vec();
        let ws = store.value(w).shape().to_vec();
        if xs.len() != 4 || ws.len() != 4 || ws[2] != ws[3] {
            return Err(TensorError::Shape(format!(
                "conv2d expects [B,C,H,W] input and [O,C,k,k] kernels, got {xs:?} and {ws:?}"
            )));
        }
        if ws[1] != xs[1] {
            return Err(TensorError::Shape(format!(
                "kernel expects {} input channels, input has {}",
                ws[1], xs[1]
            )));
        }
        if store.value(b).shape() != [ws[0]] {
            return Err(TensorError::Shape("conv bias must have one entry per output channel".into()));
        }
        if stride == 0 {
            return Err(TensorError::Shape("conv stride must be positive".into()));
        }
        let k = ws[2];
        if xs[2] + 2 * pad < k || xs[3] + 2 * pad < k {
            return Err(TensorError::Shape(format!(
                "kernel {k}x{k} larger than padded input {}x{}",
                xs[2] + 2 * pad,
                xs[3] + 2 * pad
            )));
        }
        let geom = ConvGeom {
            batch: xs[0],
            in_ch: xs[1],
            height: xs[2],
            width: xs[3],
            out_ch: ws[0],
            kernel: k,
            stride,
            pad,
            out_h: (xs[2] + 2 * pad - k) / stride + 1,
            out_w: (xs[3] + 2 * pad - k) / stride + 1,
        };
        let patch = geom.patch();
        let plane = geom.out_plane();
        let mut cols = vec![0.0; geom.batch * patch * plane];
        let mut out = Tensor::zeros(&[geom.batch, geom.out_ch, geom.out_h, geom.out_w]);
        {
            let input = self.value(x).data();
            let kernels = store.value(w).data();
            let bias = store.value(b).data();
            let in_item = geom.in_ch * geom.height * geom.width;
            let out_item = geom.out_ch * plane;
            for n in 0..geom.batch {
                let col = &mut cols[n * patch * plane..(n + 1) * patch * plane];
                im2col(&input[n * in_item..(n + 1) * in_item], &geom, col);
                let y = &mut out.data_mut()[n * out_item..(n + 1) * out_item];
                for (o, row) in y.chunks_mut(plane).enumerate() {
                    row.fill(bias[o]);
                }
                gemm(
                    geom.out_ch,
                    patch,
                    plane,
                    kernels,
                    Layout::row_major(patch),
                    col,
                    Layout::row_major(plane),
                    y,
                    Layout::row_major(plane),
                    1.0,
                );
            }
        }
        Ok(self.push(out, Op::Conv2d { x, w, b, geom, cols }))
    }

    /// `y = x W^T + b` for `x: [B, I]`, `W: [O, I]`, `b: [O]`.
    pub fn linear(&mut self, store: &ParamStore, x: Var, w: ParamId, b: ParamId) -> Result<Var> {
        let xs = self.value(x).shape().to_vec();
        let ws = store.value(w).shape().to_vec();
        if xs.len() != 2 || ws.len() != 2 || xs[1] != ws[1] {
            return Err(TensorError::Shape(format!(
                "linear layer {ws:?} cannot take input {xs:?}"
            )));
        }
        if store.value(b).shape() != [ws[0]] {
            return Err(TensorError::Shape("linear bias must have one entry per output".into()));
        }
        let (batch, inputs, outputs) = (xs[0], xs[1], ws[0]);
        let mut out = Tensor::zeros(&[batch, outputs]);
        let bias = store.value(b).data();
        for row in out.data_mut().chunks_mut(outputs) {
            row.copy_from_slice(bias);
        }
        gemm(
            batch,
            inputs,
            outputs,
            self.value(x).data(),
            Layout::row_major(inputs),
            store.value(w).data(),
            Layout::col_major(inputs),
            out.data_mut(),
            Layout::row_major(outputs),
            1.0,
        );
        Ok(self.push(out, Op::Linear { x, w, b }))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let mut out = self.value(x).clone();
        out.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
        self.push(out, Op::Relu(x))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let out = self.value(x).clone().reshape(shape)?;
        Ok(self.push(out, Op::Reshape(x)))
    }

    /// Collapses every axis after the first.
    pub fn flatten(&mut self, x: Var) -> Result<Var> {
        let s = self.value(x).shape();
        let batch = s[0];
        let rest = s[1..].iter().product::<usize>();
        self.reshape(x, &[batch, rest])
    }

    /// Row-wise masked bounded softmax over a `[B, A]` input; `mask` is `B * A` long.
    pub fn masked_bounded_softmax(&mut self, x: Var, mask: &[bool], eps: f64) -> Result<Var> {
        let xs = self.value(x).shape().to_vec();
        if xs.len() != 2 || mask.len() != xs[0] * xs[1] {
            return Err(TensorError::Shape(format!(
                "bounded softmax expects [B, A] logits with B*A mask entries, got {xs:?} and {}",
                mask.len()
            )));
        }
        let width = xs[1];
        let mut probs = Vec::with_capacity(mask.len());
        let mut soft = Vec::with_capacity(mask.len());
        for (row, m) in self.value(x).data().chunks(width).zip(mask.chunks(width)) {
            let (p, s) = masked_bounded_softmax_parts(row, m, eps)?;
            probs.extend(p);
            soft.extend(s);
        }
        let out = Tensor::from_vec(&xs, probs)?;
        Ok(self.push(
            out,
            Op::BoundedSoftmax {
                x,
                mask: mask.to_vec(),
                eps,
                soft,
            },
        ))
    }

    /// Picks `x[b, index[b]]` from a `[B, A]` input.
    pub fn gather(&mut self, x: Var, index: &[usize]) -> Result<Var> {
        let xs = self.value(x).shape().to_vec();
        if xs.len() != 2 || index.len() != xs[0] || index.iter().any(|&i| i >= xs[1]) {
            return Err(TensorError::Shape(format!(
                "cannot gather {} indices from {xs:?}",
                index.len()
            )));
        }
        let data = self.value(x).data();
        let picked = index
            .iter()
            .enumerate()
            .map(|(b, &i)| data[b * xs[1] + i])
            .collect();
        let out = Tensor::from_vec(&[xs[0]], picked)?;
        Ok(self.push(
            out,
            Op::Gather {
                x,
                index: index.to_vec(),
            },
        ))
    }

    pub fn ln(&mut self, x: Var) -> Var {
        let mut out = self.value(x).clone();
        out.data_mut().iter_mut().for_each(|v| *v = v.ln());
        self.push(out, Op::Ln(x))
    }

    /// Elementwise product with constants that carry no gradient.
    pub fn mul_const(&mut self, x: Var, c: &[f64]) -> Result<Var> {
        if self.value(x).numel() != c.len() {
            return Err(TensorError::Shape(format!(
                "{} constants for {} values",
                c.len(),
                self.value(x).numel()
            )));
        }
        let mut out = self.value(x).clone();
        out.data_mut().iter_mut().zip(c).for_each(|(v, k)| *v *= k);
        Ok(self.push(out, Op::MulConst { x, c: c.to_vec() }))
    }

    pub fn scale(&mut self, x: Var, s: f64) -> Var {
        let mut out = self.value(x).clone();
        out.data_mut().iter_mut().for_each(|v| *v *= s);
        self.push(out, Op::Scale { x, s })
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let d = self.value(x).data();
        let m = d.iter().sum::<f64>() / d.len() as f64;
        self.push(Tensor::scalar(m), Op::Mean(x))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().sum::<f64>();
        self.push(Tensor::scalar(s), Op::Sum(x))
    }

    /// Mean squared error against constant targets.
    pub fn mse(&mut self, x: Var, target: &[f64]) -> Result<Var> {
        let d = self.value(x).data();
        if d.len() != target.len() {
            return Err(TensorError::Shape(format!(
                "{} predictions for {} targets",
                d.len(),
                target.len()
            )));
        }
        let m = d
            .iter()
            .zip(target)
            .map(|(p, t)| (p - t) * (p - t))
            .sum::<f64>()
            / d.len() as f64;
        Ok(self.push(
            Tensor::scalar(m),
            Op::Mse {
                x,
                target: target.to_vec(),
            },
        ))
    }

    /// Reverse sweep from a scalar `loss`. Parameter gradients are added to
    /// the store's accumulators; node gradients are returned.
    pub fn backward(&self, loss: Var, store: &mut ParamStore) -> Result<NodeGrads> {
        if self.nodes.is_empty() || loss.0 >= self.nodes.len() {
            return Err(TensorError::Usage("backward called before any forward pass".into()));
        }
        if self.value(loss).numel() != 1 {
            return Err(TensorError::Usage(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::scalar(1.0));
        for idx in (0..=loss.0).rev() {
            let Some(dy) = grads[idx].take() else {
                continue;
            };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Input => {}
                Op::Conv2d {
                    x,
                    w,
                    b,
                    geom,
                    cols,
                } => {
                    let dx = conv_backward(geom, cols, dy.data(), store, *w, *b);
                    accumulate(&mut grads, *x, dx, self.value(*x).shape());
                }
                Op::Linear { x, w, b } => {
                    let xs = self.value(*x).shape();
                    let (batch, inputs) = (xs[0], xs[1]);
                    let outputs = store.value(*w).shape()[0];
                    {
                        let (_, gb) = store.value_and_grad_mut(*b);
                        for row in dy.data().chunks(outputs) {
                            for (g, d) in gb.data_mut().iter_mut().zip(row) {
                                *g += d;
                            }
                        }
                    }
                    {
                        let (_, gw) = store.value_and_grad_mut(*w);
                        gemm(
                            outputs,
                            batch,
                            inputs,
                            dy.data(),
                            Layout::col_major(outputs),
                            self.value(*x).data(),
                            Layout::row_major(inputs),
                            gw.data_mut(),
                            Layout::row_major(inputs),
                            1.0,
                        );
                    }
                    let mut dx = vec![0.0; batch * inputs];
                    gemm(
                        batch,
                        outputs,
                        inputs,
                        dy.data(),
                        Layout::row_major(outputs),
                        store.value(*w).data(),
                        Layout::row_major(inputs),
                        &mut dx,
                        Layout::row_major(inputs),
                        0.0,
                    );
                    accumulate(&mut grads, *x, dx, xs);
                }
                Op::Relu(x) => {
                    let dx = self
                        .value(*x)
                        .data()
                        .iter()
                        .zip(dy.data())
                        .map(|(&v, &d)| if v > 0.0 { d } else { 0.0 })
                        .collect();
                    accumulate(&mut grads, *x, dx, self.value(*x).shape());
                }
                Op::Reshape(x) => {
                    accumulate(&mut grads, *x, dy.data().to_vec(), self.value(*x).shape());
                }
                Op::BoundedSoftmax { x, mask, eps, soft } => {
                    let width = self.value(*x).shape()[1];
                    let mut dx = vec![0.0; soft.len()];
                    for ((d, (s, m)), g) in dx
                        .chunks_mut(width)
                        .zip(soft.chunks(width).zip(mask.chunks(width)))
                        .zip(dy.data().chunks(width))
                    {
                        let dot: f64 = (0..width).filter(|&j| m[j]).map(|j| g[j] * s[j]).sum();
                        for j in 0..width {
                            if m[j] {
                                d[j] = (1.0 - eps) * s[j] * (g[j] - dot);
                            }
                        }
                    }
                    accumulate(&mut grads, *x, dx, self.value(*x).shape());
                }
                Op::Gather { x, index } => {
                    let xs = self.value(*x).shape();
                    let mut dx = vec![0.0; xs[0] * xs[1]];
                    for (b, (&i, &d)) in index.iter().zip(dy.data()).enumerate() {
                        dx[b * xs[1] + i] += d;
                    }
                    accumulate(&mut grads, *x, dx, xs);
                }
                Op::Ln(x) => {
                    let dx = self
                        .value(*x)
                        .data()
                        .iter()
                        .zip(dy.data())
                        .map(|(&v, &d)| d / v)
                        .collect();
                    accumulate(&mut grads, *x, dx, self.value(*x).shape());
                }
                Op::MulConst { x, c } => {
                    let dx = dy.data().iter().zip(c).map(|(d, k)| d * k).collect();
                    accumulate(&mut grads, *x, dx, self.value(*x).shape());
                }
                Op::Scale { x, s } => {
                    let dx = dy.data().iter().map(|d| d * s).collect();
                    accumulate(&mut grads, *x, dx, self.value(*x).shape());
                }
                Op::Mean(x) => {
                    let n = self.value(*x).numel();
                    let g = dy.data()[0] / n as f64;
                    accumulate(&mut grads, *x, vec![g; n], self.value(*x).shape());
                }
                Op::Sum(x) => {
                    let n = self.value(*x).numel();
                    accumulate(&mut grads, *x, vec![dy.data()[0]; n], self.value(*x).shape());
                }
                Op::Mse { x, target } => {
                    let n = target.len() as f64;
                    let g = dy.data()[0];
                    let dx = self
                        .value(*x)
                        .data()
                        .iter()
                        .zip(target)
                        .map(|(p, t)| 2.0 * (p - t) / n * g)
                        .collect();
                    accumulate(&mut grads, *x, dx, self.value(*x).shape());
                }
            }
            grads[idx] = Some(dy);
        }
        Ok(NodeGrads { grads })
    }
}

fn accumulate(grads: &mut [Option<Tensor>], x: Var, dx: Vec<f64>, shape: &[usize]) {
    match &mut grads[x.0] {
        Some(g) => {
            for (a, b) in g.data_mut().iter_mut().zip(&dx) {
                *a += b;
            }
        }
        slot @ None => {
            *slot = Some(Tensor::from_vec(shape, dx).expect("gradient shape matches value"));
        }
    }
}

fn im2col(input: &[f64], g: &ConvGeom, cols: &mut [f64]) {
    let plane = g.out_plane();
    for c in 0..g.in_ch {
        for ki in 0..g.kernel {
            for kj in 0..g.kernel {
                let row = (c * g.kernel + ki) * g.kernel + kj;
                let dst = &mut cols[row * plane..(row + 1) * plane];
                for oi in 0..g.out_h {
                    let ii = (oi * g.stride + ki) as isize - g.pad as isize;
                    for oj in 0..g.out_w {
                        let jj = (oj * g.stride + kj) as isize - g.pad as isize;
                        dst[oi * g.out_w + oj] = if ii >= 0
                            && jj >= 0
                            && (ii as usize) < g.height
                            && (jj as usize) < g.width
                        {
                            input[(c * g.height + ii as usize) * g.width + jj as usize]
                        } else {
                            0.0
                        };
                    }
                }
            }
        }
    }
}

fn col2im(cols: &[f64], g: &ConvGeom, dx: &mut [f64]) {
    let plane = g.out_plane();
    for c in 0..g.in_ch {
        for ki in 0..g.kernel {
            for kj in 0..g.kernel {
                let row = (c * g.kernel + ki) * g.kernel + kj;
                let src = &cols[row * plane..(row + 1) * plane];
                for oi in 0..g.out_h {
                    let ii = (oi * g.stride + ki) as isize - g.pad as isize;
                    if ii < 0 || ii as usize >= g.height {
                        continue;
                    }
                    for oj in 0..g.out_w {
                        let jj = (oj * g.stride + kj) as isize - g.pad as isize;
                        if jj < 0 || jj as usize >= g.width {
                            continue;
                        }
                        dx[(c * g.height + ii as usize) * g.width + jj as usize] +=
                            src[oi * g.out_w + oj];
                    }
                }
            }
        }
    }
}

fn conv_backward(
    g: &ConvGeom,
    cols: &[f64],
    dy: &[f64],
    store: &mut ParamStore,
    w: ParamId,
    b: ParamId,
) -> Vec<f64> {
    let patch = g.patch();
    let plane = g.out_plane();
    let out_item = g.out_ch * plane;
    let in_item = g.in_ch * g.height * g.width;
    {
        let (_, gb) = store.value_and_grad_mut(b);
        for n in 0..g.batch {
            for (o, row) in dy[n * out_item..(n + 1) * out_item].chunks(plane).enumerate() {
                gb.data_mut()[o] += row.iter().sum::<f64>();
            }
        }
    }
    let mut dx = vec![0.0; g.batch * in_item];
    let mut dcols = vec![0.0; patch * plane];
    let (kernels, gw) = store.value_and_grad_mut(w);
    for n in 0..g.batch {
        let dyn_ = &dy[n * out_item..(n + 1) * out_item];
        let col = &cols[n * patch * plane..(n + 1) * patch * plane];
        gemm(
            g.out_ch,
            plane,
            patch,
            dyn_,
            Layout::row_major(plane),
            col,
            Layout::col_major(plane),
            gw.data_mut(),
            Layout::row_major(patch),
            1.0,
        );
        gemm(
            patch,
            g.out_ch,
            plane,
            kernels.data(),
            Layout::col_major(patch),
            dyn_,
            Layout::row_major(plane),
            &mut dcols,
            Layout::row_major(plane),
            0.0,
        );
        col2im(&dcols, g, &mut dx[n * in_item..(n + 1) * in_item]);
    }
    dx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_derivative() {
        let mut store = ParamStore::new();
        let mut g = Graph::new();
        let x = g.input(Tensor::scalar(3.0));
        // (x - 0)^2
        let sq = g.mse(x, &[0.0]).unwrap();
        let grads = g.backward(sq, &mut store).unwrap();
        assert_eq!(g.value(sq).data()[0], 9.0);
        assert_eq!(grads.get(x).unwrap().data()[0], 6.0);
    }

    #[test]
    fn backward_on_empty_graph_is_usage_error() {
        let g = Graph::new();
        let mut store = ParamStore::new();
        assert!(matches!(
            g.backward(Var(0), &mut store),
            Err(TensorError::Usage(_))
        ));
    }

    #[test]
    fn identity_kernel_copies_input() {
        let mut store = ParamStore::new();
        let w = store.add("w", Tensor::from_vec(&[1, 1, 1, 1], vec![1.0]).unwrap());
        let b = store.add("b", Tensor::zeros(&[1]));
        let mut g = Graph::new();
        let data: Vec<f64> = (0..9).map(f64::from).collect();
        let x = g.input(Tensor::from_vec(&[1, 1, 3, 3], data.clone()).unwrap());
        let y = g.conv2d(&store, x, w, b, 1, 0).unwrap();
        assert_eq!(g.value(y).data(), data.as_slice());
        assert_eq!(g.value(y).shape(), &[1, 1, 3, 3]);
    }

    #[test]
    fn strided_ones_kernel_sums_blocks() {
        let mut store = ParamStore::new();
        let w = store.add("w", Tensor::full(&[1, 1, 2, 2], 1.0));
        let b = store.add("b", Tensor::zeros(&[1]));
        let mut g = Graph::new();
        let x = g.input(Tensor::full(&[1, 1, 4, 4], 1.0));
        let y = g.conv2d(&store, x, w, b, 2, 0).unwrap();
        assert_eq!(g.value(y).shape(), &[1, 1, 2, 2]);
        assert_eq!(g.value(y).data(), &[4.0; 4]);
    }

    #[test]
    fn oversized_kernel_is_dimension_error() {
        let mut store = ParamStore::new();
        let w = store.add("w", Tensor::zeros(&[1, 1, 5, 5]));
        let b = store.add("b", Tensor::zeros(&[1]));
        let mut g = Graph::new();
        let x = g.input(Tensor::zeros(&[1, 1, 3, 3]));
        assert!(matches!(
            g.conv2d(&store, x, w, b, 1, 0),
            Err(TensorError::Shape(_))
        ));
        // padding 1 makes the input 5x5, which fits
        assert!(g.conv2d(&store, x, w, b, 1, 1).is_ok());
    }

    #[test]
    fn channel_mismatch_is_dimension_error() {
        let mut store = ParamStore::new();
        let w = store.add("w", Tensor::zeros(&[2, 3, 3, 3]));
        let b = store.add("b", Tensor::zeros(&[2]));
        let mut g = Graph::new();
        let x = g.input(Tensor::zeros(&[1, 2, 5, 5]));
        assert!(g.conv2d(&store, x, w, b, 1, 1).is_err());
    }

    #[test]
    fn output_size_formula() {
        let mut store = ParamStore::new();
        let w = store.add("w", Tensor::zeros(&[4, 2, 3, 3]));
        let b = store.add("b", Tensor::zeros(&[4]));
        let mut g = Graph::new();
        let x = g.input(Tensor::zeros(&[3, 2, 10, 10]));
        let y = g.conv2d(&store, x, w, b, 2, 1).unwrap();
        // floor((10 + 2 - 3) / 2) + 1 = 5
        assert_eq!(g.value(y).shape(), &[3, 4, 5, 5]);
    }
}
