//! Operation tape and the differentiable operators recorded on it.

use super::conv::{self, ConvGeometry};
use super::gemm::{gemm, Layout};
use super::tensor::{Shape, Tensor};
use crate::error::{Error, Result};
use rand::Rng;

/// Whether stochastic and batch-statistics operators run in training form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Train,
    Eval,
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Per-feature moving averages maintained by batch normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl RunningStats {
    pub fn new(features: usize) -> Self {
        RunningStats {
            mean: vec![0.0; features],
            var: vec![1.0; features],
        }
    }

    pub fn features(&self) -> usize {
        self.mean.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchNormOptions {
    /// Fraction of the old running value kept on each update.
    pub momentum: f64,
    pub eps: f64,
}

impl Default for BatchNormOptions {
    fn default() -> Self {
        BatchNormOptions {
            momentum: 0.9,
            eps: 1e-5,
        }
    }
}

enum Op {
    Leaf,
    Dense {
        x: usize,
        w: usize,
        b: usize,
    },
    Conv2d {
        x: usize,
        k: usize,
        geom: ConvGeometry,
    },
    BatchNorm {
        x: usize,
        gamma: usize,
        beta: usize,
        xhat: Vec<f64>,
        inv_std: Vec<f64>,
        train: bool,
    },
    Relu {
        x: usize,
    },
    MaxPool {
        x: usize,
        argmax: Vec<usize>,
    },
    GlobalAvgPool {
        x: usize,
    },
    Dropout {
        x: usize,
        mask: Vec<f64>,
    },
    Concat {
        xs: Vec<usize>,
        widths: Vec<usize>,
    },
    Add {
        x: usize,
        y: usize,
    },
    Mse {
        pred: usize,
        target: usize,
    },
    L2 {
        params: Vec<usize>,
        lambda: f64,
    },
    Sum {
        x: usize,
    },
}

impl Op {
    fn inputs(&self) -> Vec<usize> {
        match self {
            Op::Leaf => Vec::new(),
            Op::Dense { x, w, b } => vec![*x, *w, *b],
            Op::Conv2d { x, k, .. } => vec![*x, *k],
            Op::BatchNorm { x, gamma, beta, .. } => vec![*x, *gamma, *beta],
            Op::Relu { x }
            | Op::MaxPool { x, .. }
            | Op::GlobalAvgPool { x }
            | Op::Dropout { x, .. }
            | Op::Sum { x } => vec![*x],
            Op::Concat { xs, .. } => xs.clone(),
            Op::Add { x, y } => vec![*x, *y],
            Op::Mse { pred, target } => vec![*pred, *target],
            Op::L2 { params, .. } => params.clone(),
        }
    }
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
    param_key: Option<usize>,
}

/// Records operations in execution order and replays them in reverse to
/// accumulate gradients into leaves.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    leaf_grads: Vec<Option<Vec<f64>>>,
}

fn shape_err(op: &str, detail: impl std::fmt::Display) -> Error {
    Error::usage(format!("{op}: {detail}"))
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        let requires_grad = op.inputs().iter().any(|&i| self.nodes[i].requires_grad);
        self.push_node(Node {
            value,
            op,
            requires_grad,
            param_key: None,
        })
    }

    fn push_node(&mut self, node: Node) -> Var {
        self.nodes.push(node);
        self.leaf_grads.push(None);
        Var(self.nodes.len() - 1)
    }

    /// Records an input value. Gradients are kept for it only if requested.
    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.push_node(Node {
            value: value.detached(),
            op: Op::Leaf,
            requires_grad,
            param_key: None,
        })
    }

    /// Records a parameter tensor under a caller-chosen key; see [`Tape::param_grads`].
    pub fn param(&mut self, value: &Tensor, key: usize) -> Var {
        self.push_node(Node {
            value: value.detached(),
            op: Op::Leaf,
            requires_grad: value.is_trainable(),
            param_key: Some(key),
        })
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Accumulated gradient of a leaf, present after [`Tape::backward`].
    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.leaf_grads[v.0].as_deref()
    }

    /// Gradients of every parameter leaf, by the key given to [`Tape::param`].
    pub fn param_grads(&self) -> impl Iterator<Item = (usize, &[f64])> + '_ {
        self.nodes
            .iter()
            .zip(&self.leaf_grads)
            .filter_map(|(n, g)| match (n.param_key, g) {
                (Some(k), Some(g)) => Some((k, g.as_slice())),
                _ => None,
            })
    }

    pub fn zero_grads(&mut self) {
        self.leaf_grads.iter_mut().for_each(|g| *g = None);
    }

    fn dims(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.dims()
    }

    pub fn dense(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (xd, wd, bd) = (self.dims(x), self.dims(w), self.dims(b));
        if xd.len() != 2 || wd.len() != 2 || bd.len() != 1 {
            return Err(shape_err(
                "dense_affine",
                format!("expected [B,in]·[in,out]+[out], got {xd:?} {wd:?} {bd:?}"),
            ));
        }
        let (batch, inner, out) = (xd[0], xd[1], wd[1]);
        if wd[0] != inner || bd[0] != out {
            return Err(shape_err(
                "dense_affine",
                format!("inner dims disagree: {xd:?} {wd:?} {bd:?}"),
            ));
        }
        let mut y = Vec::with_capacity(batch * out);
        for _ in 0..batch {
            y.extend_from_slice(self.value(b).data());
        }
        gemm(
            batch,
            inner,
            out,
            self.value(x).data(),
            Layout::Normal,
            self.value(w).data(),
            Layout::Normal,
            1.0,
            &mut y,
        );
        let value = Tensor::from_parts(Shape::new(vec![batch, out])?, y);
        Ok(self.push(value, Op::Dense { x: x.0, w: w.0, b: b.0 }))
    }

    pub fn conv2d(&mut self, x: Var, k: Var, stride: usize, pad: usize) -> Result<Var> {
        let (xd, kd) = (self.dims(x).to_vec(), self.dims(k).to_vec());
        if xd.len() != 4 || kd.len() != 4 {
            return Err(shape_err(
                "conv2d",
                format!("expected NCHW input and FCkk kernel, got {xd:?} {kd:?}"),
            ));
        }
        if kd[1] != xd[1] {
            return Err(shape_err(
                "conv2d",
                format!("kernel channels {} != input channels {}", kd[1], xd[1]),
            ));
        }
        if stride == 0 {
            return Err(shape_err("conv2d", "stride must be positive"));
        }
        if kd[2] > xd[2] + 2 * pad || kd[3] > xd[3] + 2 * pad {
            return Err(shape_err(
                "conv2d",
                format!(
                    "kernel {}x{} exceeds padded input {}x{} (pad {pad})",
                    kd[2], kd[3], xd[2], xd[3]
                ),
            ));
        }
        let geom = ConvGeometry {
            batch: xd[0],
            in_channels: xd[1],
            height: xd[2],
            width: xd[3],
            filters: kd[0],
            kh: kd[2],
            kw: kd[3],
            stride,
            pad,
        };
        let y = conv::forward(&geom, self.value(x).data(), self.value(k).data());
        let shape = Shape::new(vec![geom.batch, geom.filters, geom.out_height(), geom.out_width()])?;
        Ok(self.push(Tensor::from_parts(shape, y), Op::Conv2d { x: x.0, k: k.0, geom }))
    }

    /// Normalizes axis 1 over every other axis (`[B,F]` or `[B,C,H,W]`).
    #[allow(clippy::too_many_arguments)]
    pub fn batch_norm(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        mode: Mode,
        stats: &mut RunningStats,
        opts: BatchNormOptions,
    ) -> Result<Var> {
        let xd = self.dims(x).to_vec();
        if xd.len() < 2 {
            return Err(shape_err("batch_norm", format!("need at least [B,F], got {xd:?}")));
        }
        let (batch, feats) = (xd[0], xd[1]);
        let inner: usize = xd[2..].iter().product();
        if self.dims(gamma) != [feats] || self.dims(beta) != [feats] || stats.features() != feats {
            return Err(shape_err("batch_norm", format!("affine/stat width must be {feats}")));
        }
        if mode == Mode::Train && batch < 2 {
            return Err(shape_err("batch_norm", "train mode needs a batch of at least 2"));
        }
        let xs = self.value(x).data();
        let count = (batch * inner) as f64;
        let at = |b: usize, f: usize, i: usize| (b * feats + f) * inner + i;
        let (mean, var) = match mode {
            Mode::Train => {
                let mut mean = vec![0.0; feats];
                let mut var = vec![0.0; feats];
                for f in 0..feats {
                    let mut s = 0.0;
                    for b in 0..batch {
                        s += xs[at(b, f, 0)..at(b, f, 0) + inner].iter().sum::<f64>();
                    }
                    let m = s / count;
                    let mut v = 0.0;
                    for b in 0..batch {
                        v += xs[at(b, f, 0)..at(b, f, 0) + inner]
                            .iter()
                            .map(|x| (x - m) * (x - m))
                            .sum::<f64>();
                    }
                    mean[f] = m;
                    var[f] = v / count;
                }
                for f in 0..feats {
                    stats.mean[f] = opts.momentum * stats.mean[f] + (1.0 - opts.momentum) * mean[f];
                    stats.var[f] = opts.momentum * stats.var[f] + (1.0 - opts.momentum) * var[f];
                }
                (mean, var)
            }
            Mode::Eval => (stats.mean.clone(), stats.var.clone()),
        };
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + opts.eps).sqrt()).collect();
        let (g, bt) = (self.value(gamma).data(), self.value(beta).data());
        let mut xhat = vec![0.0; xs.len()];
        let mut y = vec![0.0; xs.len()];
        for b in 0..batch {
            for f in 0..feats {
                let base = at(b, f, 0);
                for i in base..base + inner {
                    let h = (xs[i] - mean[f]) * inv_std[f];
                    xhat[i] = h;
                    y[i] = g[f] * h + bt[f];
                }
            }
        }
        let shape = self.value(x).shape().clone();
        let op = Op::BatchNorm {
            x: x.0,
            gamma: gamma.0,
            beta: beta.0,
            xhat,
            inv_std,
            train: mode == Mode::Train,
        };
        Ok(self.push(Tensor::from_parts(shape, y), op))
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        let v = self.value(x);
        let y = v.data().iter().map(|&a| if a > 0.0 { a } else { 0.0 }).collect();
        let shape = v.shape().clone();
        Ok(self.push(Tensor::from_parts(shape, y), Op::Relu { x: x.0 }))
    }

    /// Window maximum; padding cells never win. Ties go to the first cell
    /// in row-major window order.
    pub fn max_pool2d(&mut self, x: Var, window: usize, stride: usize, pad: usize) -> Result<Var> {
        let xd = self.dims(x).to_vec();
        if xd.len() != 4 {
            return Err(shape_err("max_pool2d", format!("expected NCHW, got {xd:?}")));
        }
        if window == 0 || stride == 0 || pad >= window {
            return Err(shape_err(
                "max_pool2d",
                format!("invalid window {window} stride {stride} pad {pad}"),
            ));
        }
        let (b, c, h, w) = (xd[0], xd[1], xd[2], xd[3]);
        if window > h + 2 * pad || window > w + 2 * pad {
            return Err(shape_err(
                "max_pool2d",
                format!("window {window} exceeds {h}x{w} with pad {pad}"),
            ));
        }
        let oh = (h + 2 * pad - window) / stride + 1;
        let ow = (w + 2 * pad - window) / stride + 1;
        let xs = self.value(x).data();
        let mut y = vec![0.0; b * c * oh * ow];
        let mut argmax = vec![0usize; y.len()];
        for plane in 0..b * c {
            let base = plane * h * w;
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut best = f64::NEG_INFINITY;
                    let mut best_i = usize::MAX;
                    for ki in 0..window {
                        let iy = (oy * stride + ki) as isize - pad as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        for kj in 0..window {
                            let ix = (ox * stride + kj) as isize - pad as isize;
                            if ix < 0 || ix >= w as isize {
                                continue;
                            }
                            let idx = base + iy as usize * w + ix as usize;
                            if best_i == usize::MAX || xs[idx] > best {
                                best = xs[idx];
                                best_i = idx;
                            }
                        }
                    }
                    let o = (plane * oh + oy) * ow + ox;
                    y[o] = best;
                    argmax[o] = best_i;
                }
            }
        }
        let shape = Shape::new(vec![b, c, oh, ow])?;
        Ok(self.push(Tensor::from_parts(shape, y), Op::MaxPool { x: x.0, argmax }))
    }

    pub fn global_avg_pool(&mut self, x: Var) -> Result<Var> {
        let xd = self.dims(x).to_vec();
        if xd.len() != 4 {
            return Err(shape_err("global_avg_pool", format!("expected NCHW, got {xd:?}")));
        }
        let area = xd[2] * xd[3];
        let y = self
            .value(x)
            .data()
            .chunks(area)
            .map(|p| p.iter().sum::<f64>() / area as f64)
            .collect();
        let shape = Shape::new(vec![xd[0], xd[1]])?;
        Ok(self.push(Tensor::from_parts(shape, y), Op::GlobalAvgPool { x: x.0 }))
    }

    /// Inverted dropout: survivors are scaled by `1/(1-rate)` in train mode,
    /// and eval mode (or rate 0) returns `x` unchanged.
    pub fn dropout<R: Rng + ?Sized>(&mut self, x: Var, rate: f64, mode: Mode, rng: &mut R) -> Result<Var> {
        if !(0.0..1.0).contains(&rate) {
            return Err(shape_err("dropout", format!("rate {rate} outside [0,1)")));
        }
        if mode == Mode::Eval || rate == 0.0 {
            return Ok(x);
        }
        let keep = 1.0 / (1.0 - rate);
        let v = self.value(x);
        let mask: Vec<f64> = (0..v.numel())
            .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
            .collect();
        let y = v.data().iter().zip(&mask).map(|(a, m)| a * m).collect();
        let shape = v.shape().clone();
        Ok(self.push(Tensor::from_parts(shape, y), Op::Dropout { x: x.0, mask }))
    }

    /// Concatenates `[B, d_i]` inputs along the feature axis, in order.
    pub fn concat(&mut self, xs: &[Var]) -> Result<Var> {
        let first = xs.first().ok_or_else(|| shape_err("concat_features", "no inputs"))?;
        let batch = self.dims(*first)[0];
        let mut widths = Vec::with_capacity(xs.len());
        for &v in xs {
            let d = self.dims(v);
            if d.len() != 2 || d[0] != batch {
                return Err(shape_err(
                    "concat_features",
                    format!("input {d:?} does not match batch {batch}"),
                ));
            }
            widths.push(d[1]);
        }
        let total: usize = widths.iter().sum();
        let mut y = Vec::with_capacity(batch * total);
        for b in 0..batch {
            for (&v, &w) in xs.iter().zip(&widths) {
                y.extend_from_slice(&self.value(v).data()[b * w..(b + 1) * w]);
            }
        }
        let shape = Shape::new(vec![batch, total])?;
        let op = Op::Concat {
            xs: xs.iter().map(|v| v.0).collect(),
            widths,
        };
        Ok(self.push(Tensor::from_parts(shape, y), op))
    }

    pub fn add(&mut self, x: Var, y: Var) -> Result<Var> {
        if self.dims(x) != self.dims(y) {
            return Err(shape_err("add", format!("{:?} vs {:?}", self.dims(x), self.dims(y))));
        }
        let out = self
            .value(x)
            .data()
            .iter()
            .zip(self.value(y).data())
            .map(|(a, b)| a + b)
            .collect();
        let shape = self.value(x).shape().clone();
        Ok(self.push(Tensor::from_parts(shape, out), Op::Add { x: x.0, y: y.0 }))
    }

    /// Mean of squared differences over every entry.
    pub fn mse_loss(&mut self, pred: Var, target: Var) -> Result<Var> {
        if self.dims(pred) != self.dims(target) {
            return Err(shape_err(
                "mse_loss",
                format!("{:?} vs {:?}", self.dims(pred), self.dims(target)),
            ));
        }
        let (p, t) = (self.value(pred).data(), self.value(target).data());
        let s: f64 = p.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum();
        let loss = s / p.len() as f64;
        Ok(self.push(
            Tensor::scalar(loss),
            Op::Mse {
                pred: pred.0,
                target: target.0,
            },
        ))
    }

    /// `lambda · Σ w²` over the given tensors.
    pub fn l2_penalty(&mut self, params: &[Var], lambda: f64) -> Result<Var> {
        if lambda < 0.0 || !lambda.is_finite() {
            return Err(shape_err(
                "l2_penalty",
                format!("lambda {lambda} must be finite and >= 0"),
            ));
        }
        let s: f64 = params
            .iter()
            .map(|&p| self.value(p).data().iter().map(|w| w * w).sum::<f64>())
            .sum();
        let op = Op::L2 {
            params: params.iter().map(|v| v.0).collect(),
            lambda,
        };
        Ok(self.push(Tensor::scalar(lambda * s), op))
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let s = self.value(x).data().iter().sum();
        Ok(self.push(Tensor::scalar(s), Op::Sum { x: x.0 }))
    }

    /// Reverse sweep from a scalar `loss`. Leaf gradients accumulate across
    /// calls until [`Tape::zero_grads`].
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.nodes[loss.0].value.numel() != 1 {
            return Err(Error::usage(format!(
                "backward needs a scalar loss, got shape {}",
                self.nodes[loss.0].value.shape()
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = (0..=loss.0).map(|_| None).collect();
        grads[loss.0] = Some(vec![1.0]);
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            if !self.nodes[i].requires_grad {
                continue;
            }
            if let Op::Leaf = self.nodes[i].op {
                match &mut self.leaf_grads[i] {
                    Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b),
                    slot => *slot = Some(g),
                }
                continue;
            }
            for (input, delta) in self.local_grads(i, &g) {
                if !self.nodes[input].requires_grad {
                    continue;
                }
                match &mut grads[input] {
                    Some(acc) => acc.iter_mut().zip(&delta).for_each(|(a, b)| *a += b),
                    slot => *slot = Some(delta),
                }
            }
        }
        Ok(())
    }

    fn needs(&self, i: usize) -> bool {
        self.nodes[i].requires_grad
    }

    fn local_grads(&self, node: usize, g: &[f64]) -> Vec<(usize, Vec<f64>)> {
        let val = |i: usize| self.nodes[i].value.data();
        let dims = |i: usize| self.nodes[i].value.dims();
        let mut out = Vec::new();
        match &self.nodes[node].op {
            Op::Leaf => {}
            Op::Dense { x, w, b } => {
                let (batch, inner) = (dims(*x)[0], dims(*x)[1]);
                let width = dims(*w)[1];
                if self.needs(*x) {
                    let mut dx = vec![0.0; batch * inner];
                    gemm(
                        batch,
                        width,
                        inner,
                        g,
                        Layout::Normal,
                        val(*w),
                        Layout::Transposed,
                        0.0,
                        &mut dx,
                    );
                    out.push((*x, dx));
                }
                if self.needs(*w) {
                    let mut dw = vec![0.0; inner * width];
                    gemm(
                        inner,
                        batch,
                        width,
                        val(*x),
                        Layout::Transposed,
                        g,
                        Layout::Normal,
                        0.0,
                        &mut dw,
                    );
                    out.push((*w, dw));
                }
                if self.needs(*b) {
                    let mut db = vec![0.0; width];
                    for row in g.chunks(width) {
                        db.iter_mut().zip(row).for_each(|(a, r)| *a += r);
                    }
                    out.push((*b, db));
                }
            }
            Op::Conv2d { x, k, geom } => {
                let (dx, dk) = conv::backward(geom, val(*x), val(*k), g, self.needs(*x), self.needs(*k));
                if let Some(dx) = dx {
                    out.push((*x, dx));
                }
                if let Some(dk) = dk {
                    out.push((*k, dk));
                }
            }
            Op::BatchNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
                train,
            } => {
                let xd = dims(*x);
                let (batch, feats) = (xd[0], xd[1]);
                let inner: usize = xd[2..].iter().product();
                let count = (batch * inner) as f64;
                let gam = val(*gamma);
                let mut dgamma = vec![0.0; feats];
                let mut dbeta = vec![0.0; feats];
                for b in 0..batch {
                    for f in 0..feats {
                        let base = (b * feats + f) * inner;
                        for i in base..base + inner {
                            dgamma[f] += g[i] * xhat[i];
                            dbeta[f] += g[i];
                        }
                    }
                }
                if self.needs(*x) {
                    let mut dx = vec![0.0; g.len()];
                    for f in 0..feats {
                        let scale = gam[f] * inv_std[f];
                        for b in 0..batch {
                            let base = (b * feats + f) * inner;
                            for i in base..base + inner {
                                dx[i] = if *train {
                                    scale * (g[i] - dbeta[f] / count - xhat[i] * dgamma[f] / count)
                                } else {
                                    scale * g[i]
                                };
                            }
                        }
                    }
                    out.push((*x, dx));
                }
                if self.needs(*gamma) {
                    out.push((*gamma, dgamma));
                }
                if self.needs(*beta) {
                    out.push((*beta, dbeta));
                }
            }
            Op::Relu { x } => {
                let dx = val(*x)
                    .iter()
                    .zip(g)
                    .map(|(a, d)| if *a > 0.0 { *d } else { 0.0 })
                    .collect();
                out.push((*x, dx));
            }
            Op::MaxPool { x, argmax } => {
                let mut dx = vec![0.0; val(*x).len()];
                for (o, &src) in argmax.iter().enumerate() {
                    dx[src] += g[o];
                }
                out.push((*x, dx));
            }
            Op::GlobalAvgPool { x } => {
                let xd = dims(*x);
                let area = xd[2] * xd[3];
                let mut dx = Vec::with_capacity(val(*x).len());
                for &gv in g {
                    dx.extend(std::iter::repeat_n(gv / area as f64, area));
                }
                out.push((*x, dx));
            }
            Op::Dropout { x, mask } => {
                out.push((*x, g.iter().zip(mask).map(|(a, m)| a * m).collect()));
            }
            Op::Concat { xs, widths } => {
                let total: usize = widths.iter().sum();
                let batch = g.len() / total;
                let mut offset = 0;
                for (&x, &w) in xs.iter().zip(widths) {
                    if self.needs(x) {
                        let mut dx = Vec::with_capacity(batch * w);
                        for b in 0..batch {
                            dx.extend_from_slice(&g[b * total + offset..b * total + offset + w]);
                        }
                        out.push((x, dx));
                    }
                    offset += w;
                }
            }
            Op::Add { x, y } => {
                out.push((*x, g.to_vec()));
                out.push((*y, g.to_vec()));
            }
            Op::Mse { pred, target } => {
                let (p, t) = (val(*pred), val(*target));
                let scale = 2.0 * g[0] / p.len() as f64;
                if self.needs(*pred) {
                    out.push((*pred, p.iter().zip(t).map(|(a, b)| scale * (a - b)).collect()));
                }
                if self.needs(*target) {
                    out.push((*target, p.iter().zip(t).map(|(a, b)| scale * (b - a)).collect()));
                }
            }
            Op::L2 { params, lambda } => {
                for &p in params {
                    out.push((p, val(p).iter().map(|w| 2.0 * lambda * w * g[0]).collect()));
                }
            }
            Op::Sum { x } => {
                out.push((*x, vec![g[0]; val(*x).len()]));
            }
        }
        out
    }
}
