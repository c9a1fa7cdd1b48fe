//! A small reverse-mode automatic differentiation tape.
//!
//! Values are computed eagerly as nodes are appended; `backward` replays the
//! tape in reverse creation order, which is always a valid topological order
//! because operands must exist before the operations that consume them.
//! Gradients accumulate only along paths that can reach a parameter leaf.

use super::tensor::Tensor;

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct NodeId(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    Exp(NodeId),
    Relu(NodeId),
    Tanh(NodeId),
    Clamp(NodeId, f64, f64),
    MinElem(NodeId, NodeId),
    Linear {
        x: NodeId,
        w: NodeId,
        b: NodeId,
    },
    Conv2d {
        x: NodeId,
        w: NodeId,
        b: NodeId,
        stride: usize,
        pad: usize,
    },
    ZeroUpsample2d {
        x: NodeId,
        stride: usize,
        extra: (usize, usize),
    },
    FlipKernel(NodeId),
    Reshape(NodeId),
    LogSoftmaxRows(NodeId),
    GatherRows(NodeId, Vec<usize>),
    SumRows(NodeId),
    MeanAll(NodeId),
}

struct Node {
    value: Tensor,
    grad: Option<Tensor>,
    op: Op,
    requires_grad: bool,
}

#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

impl Graph {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> NodeId {
        self.nodes.push(Node {
            value,
            grad: None,
            op,
            requires_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn requires(&self, id: NodeId) -> bool {
        self.nodes[id.0].requires_grad
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    /// Gradient of the last `backward` loss with respect to this node.
    pub fn grad(&self, id: NodeId) -> &Tensor {
        self.nodes[id.0]
            .grad
            .as_ref()
            .expect("gradient not populated; run backward() first")
    }

    /// Constant input: no gradient is tracked through it.
    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.push(value, Op::Leaf, false)
    }

    /// Trainable input: gradients accumulate here.
    pub fn param(&mut self, value: Tensor) -> NodeId {
        self.push(value, Op::Leaf, true)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a).zip_map(self.value(b), |x, y| x + y);
        let rg = self.requires(a) || self.requires(b);
        self.push(v, Op::Add(a, b), rg)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a).zip_map(self.value(b), |x, y| x - y);
        let rg = self.requires(a) || self.requires(b);
        self.push(v, Op::Sub(a, b), rg)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a).zip_map(self.value(b), |x, y| x * y);
        let rg = self.requires(a) || self.requires(b);
        self.push(v, Op::Mul(a, b), rg)
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        let v = self.value(a).map(|x| c * x);
        let rg = self.requires(a);
        self.push(v, Op::Scale(a, c), rg)
    }

    pub fn exp(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(f64::exp);
        let rg = self.requires(a);
        self.push(v, Op::Exp(a), rg)
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(|x| x.max(0.0));
        let rg = self.requires(a);
        self.push(v, Op::Relu(a), rg)
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(f64::tanh);
        let rg = self.requires(a);
        self.push(v, Op::Tanh(a), rg)
    }

    /// Elementwise clamp; gradient passes through inside [lo, hi].
    pub fn clamp(&mut self, a: NodeId, lo: f64, hi: f64) -> NodeId {
        let v = self.value(a).map(|x| x.clamp(lo, hi));
        let rg = self.requires(a);
        self.push(v, Op::Clamp(a, lo, hi), rg)
    }

    /// Elementwise minimum; ties route the gradient to the first operand.
    pub fn min_elem(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a).zip_map(self.value(b), f64::min);
        let rg = self.requires(a) || self.requires(b);
        self.push(v, Op::MinElem(a, b), rg)
    }

    /// Dense layer: `x [B,n] -> [B,m]` with weights `w [m,n]`, bias `b [m]`.
    pub fn linear(&mut self, x: NodeId, w: NodeId, b: NodeId) -> NodeId {
        let (xs, ws, bs) = (self.value(x), self.value(w), self.value(b));
        let (batch, n_in) = (xs.shape()[0], xs.shape()[1]);
        let (n_out, wn_in) = (ws.shape()[0], ws.shape()[1]);
        assert_eq!(n_in, wn_in, "linear: input width mismatch");
        assert_eq!(bs.shape(), &[n_out], "linear: bias shape mismatch");

        let mut out = vec![0.0; batch * n_out];
        let (xd, wd, bd) = (xs.data(), ws.data(), bs.data());
        for i in 0..batch {
            for j in 0..n_out {
                let mut acc = bd[j];
                let xrow = &xd[i * n_in..(i + 1) * n_in];
                let wrow = &wd[j * n_in..(j + 1) * n_in];
                for k in 0..n_in {
                    acc += xrow[k] * wrow[k];
                }
                out[i * n_out + j] = acc;
            }
        }
        let rg = self.requires(x) || self.requires(w) || self.requires(b);
        self.push(Tensor::new(vec![batch, n_out], out), Op::Linear { x, w, b }, rg)
    }

    /// Zero-padded 2D correlation: `x [B,Ci,H,W]`, `w [Co,Ci,kh,kw]`,
    /// `b [Co]`.
    pub fn conv2d(&mut self, x: NodeId, w: NodeId, b: NodeId, stride: usize, pad: usize) -> NodeId {
        let v = conv2d_forward(self.value(x), self.value(w), self.value(b), stride, pad);
        let rg = self.requires(x) || self.requires(w) || self.requires(b);
        self.push(v, Op::Conv2d { x, w, b, stride, pad }, rg)
    }

    /// Insert `stride - 1` zeros between spatial samples, plus `extra`
    /// trailing zero rows/columns. Composes transposed convolutions.
    pub fn zero_upsample2d(&mut self, x: NodeId, stride: usize, extra: (usize, usize)) -> NodeId {
        let xs = self.value(x);
        let sh = xs.shape();
        assert_eq!(sh.len(), 4, "zero_upsample2d expects [B,C,H,W]");
        let (bsz, ch, h, w) = (sh[0], sh[1], sh[2], sh[3]);
        let oh = (h - 1) * stride + 1 + extra.0;
        let ow = (w - 1) * stride + 1 + extra.1;
        let mut out = vec![0.0; bsz * ch * oh * ow];
        let xd = xs.data();
        for b in 0..bsz {
            for c in 0..ch {
                for i in 0..h {
                    for j in 0..w {
                        out[((b * ch + c) * oh + i * stride) * ow + j * stride] =
                            xd[((b * ch + c) * h + i) * w + j];
                    }
                }
            }
        }
        let rg = self.requires(x);
        self.push(
            Tensor::new(vec![bsz, ch, oh, ow], out),
            Op::ZeroUpsample2d { x, stride, extra },
            rg,
        )
    }

    /// Swap in/out channel axes and reverse both spatial axes:
    /// `[Ci,Co,kh,kw] -> [Co,Ci,kh,kw]`. Composes transposed convolutions.
    pub fn flip_kernel(&mut self, w: NodeId) -> NodeId {
        let ws = self.value(w);
        let sh = ws.shape();
        assert_eq!(sh.len(), 4, "flip_kernel expects [Ci,Co,kh,kw]");
        let (ci, co, kh, kw) = (sh[0], sh[1], sh[2], sh[3]);
        let mut out = vec![0.0; ws.len()];
        let wd = ws.data();
        for a in 0..ci {
            for b in 0..co {
                for i in 0..kh {
                    for j in 0..kw {
                        out[((b * ci + a) * kh + (kh - 1 - i)) * kw + (kw - 1 - j)] =
                            wd[((a * co + b) * kh + i) * kw + j];
                    }
                }
            }
        }
        let rg = self.requires(w);
        self.push(Tensor::new(vec![co, ci, kh, kw], out), Op::FlipKernel(w), rg)
    }

    pub fn reshape(&mut self, a: NodeId, shape: Vec<usize>) -> NodeId {
        let v = self.value(a).reshaped(shape);
        let rg = self.requires(a);
        self.push(v, Op::Reshape(a), rg)
    }

    /// Numerically stable row-wise log-softmax on `[B,n]`.
    pub fn log_softmax_rows(&mut self, a: NodeId) -> NodeId {
        let xs = self.value(a);
        let sh = xs.shape();
        assert_eq!(sh.len(), 2, "log_softmax_rows expects [B,n]");
        let (batch, n) = (sh[0], sh[1]);
        let xd = xs.data();
        let mut out = vec![0.0; batch * n];
        for i in 0..batch {
            let row = &xd[i * n..(i + 1) * n];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = row.iter().map(|v| (v - max).exp()).sum::<f64>().ln() + max;
            for j in 0..n {
                out[i * n + j] = row[j] - lse;
            }
        }
        let rg = self.requires(a);
        self.push(Tensor::new(vec![batch, n], out), Op::LogSoftmaxRows(a), rg)
    }

    /// Pick one entry per row: `[B,n]` with indices `[B]` gives `[B]`.
    pub fn gather_rows(&mut self, a: NodeId, indices: Vec<usize>) -> NodeId {
        let xs = self.value(a);
        let sh = xs.shape();
        assert_eq!(sh.len(), 2, "gather_rows expects [B,n]");
        let (batch, n) = (sh[0], sh[1]);
        assert_eq!(indices.len(), batch, "one index per row required");
        let xd = xs.data();
        let out: Vec<f64> = indices
            .iter()
            .enumerate()
            .map(|(i, &j)| {
                assert!(j < n, "gather index out of range");
                xd[i * n + j]
            })
            .collect();
        let rg = self.requires(a);
        self.push(Tensor::from_vec(out), Op::GatherRows(a, indices), rg)
    }

    pub fn sum_rows(&mut self, a: NodeId) -> NodeId {
        let xs = self.value(a);
        let sh = xs.shape();
        assert_eq!(sh.len(), 2, "sum_rows expects [B,n]");
        let (batch, n) = (sh[0], sh[1]);
        let xd = xs.data();
        let out: Vec<f64> = (0..batch)
            .map(|i| xd[i * n..(i + 1) * n].iter().sum())
            .collect();
        let rg = self.requires(a);
        self.push(Tensor::from_vec(out), Op::SumRows(a), rg)
    }

    pub fn mean_all(&mut self, a: NodeId) -> NodeId {
        let xs = self.value(a);
        assert!(!xs.is_empty(), "mean of empty tensor");
        let v = xs.data().iter().sum::<f64>() / xs.len() as f64;
        let rg = self.requires(a);
        self.push(Tensor::scalar(v), Op::MeanAll(a), rg)
    }

    /// Reverse-mode sweep from a scalar loss. Existing gradients are
    /// cleared first; afterwards `grad` is populated for every node that
    /// requires gradients and can reach the loss.
    pub fn backward(&mut self, loss: NodeId) {
        assert_eq!(self.nodes[loss.0].value.len(), 1, "loss must be scalar");
        for node in &mut self.nodes {
            node.grad = None;
        }
        let seed = Tensor::new(self.nodes[loss.0].value.shape().to_vec(), vec![1.0]);
        self.nodes[loss.0].grad = Some(seed);

        for id in (0..=loss.0).rev() {
            if self.nodes[id].grad.is_none() || !self.nodes[id].requires_grad {
                continue;
            }
            self.propagate(NodeId(id));
        }
    }

    fn accumulate(&mut self, id: NodeId, delta: Tensor) {
        if !self.nodes[id.0].requires_grad {
            return;
        }
        match &mut self.nodes[id.0].grad {
            Some(g) => g.add_assign(&delta),
            slot @ None => *slot = Some(delta),
        }
    }

    fn propagate(&mut self, id: NodeId) {
        let grad = self.nodes[id.0].grad.clone().unwrap();
        // The op is cheap to reconstruct by reference; clone indices only.
        match &self.nodes[id.0].op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                let (a, b) = (*a, *b);
                self.accumulate(a, grad.clone());
                self.accumulate(b, grad);
            }
            Op::Sub(a, b) => {
                let (a, b) = (*a, *b);
                self.accumulate(a, grad.clone());
                self.accumulate(b, grad.map(|v| -v));
            }
            Op::Mul(a, b) => {
                let (a, b) = (*a, *b);
                let da = grad.zip_map(self.value(b), |g, y| g * y);
                let db = grad.zip_map(self.value(a), |g, x| g * x);
                self.accumulate(a, da);
                self.accumulate(b, db);
            }
            Op::Scale(a, c) => {
                let (a, c) = (*a, *c);
                self.accumulate(a, grad.map(|g| c * g));
            }
            Op::Exp(a) => {
                let a = *a;
                let da = grad.zip_map(&self.nodes[id.0].value, |g, y| g * y);
                self.accumulate(a, da);
            }
            Op::Relu(a) => {
                let a = *a;
                let da = grad.zip_map(self.value(a), |g, x| if x > 0.0 { g } else { 0.0 });
                self.accumulate(a, da);
            }
            Op::Tanh(a) => {
                let a = *a;
                let da = grad.zip_map(&self.nodes[id.0].value, |g, y| g * (1.0 - y * y));
                self.accumulate(a, da);
            }
            Op::Clamp(a, lo, hi) => {
                let (a, lo, hi) = (*a, *lo, *hi);
                let da = grad.zip_map(self.value(a), |g, x| {
                    if x >= lo && x <= hi {
                        g
                    } else {
                        0.0
                    }
                });
                self.accumulate(a, da);
            }
            Op::MinElem(a, b) => {
                let (a, b) = (*a, *b);
                let av = self.value(a).clone();
                let bv = self.value(b).clone();
                let da = grad.zip_map(&av.zip_map(&bv, |x, y| (x <= y) as u8 as f64), |g, m| g * m);
                let db = grad.zip_map(&av.zip_map(&bv, |x, y| (y < x) as u8 as f64), |g, m| g * m);
                self.accumulate(a, da);
                self.accumulate(b, db);
            }
            Op::Linear { x, w, b } => {
                let (x, w, b) = (*x, *w, *b);
                let xs = self.value(x).clone();
                let ws = self.value(w).clone();
                let (batch, n_in) = (xs.shape()[0], xs.shape()[1]);
                let n_out = ws.shape()[0];
                let gd = grad.data();

                if self.requires(x) {
                    let mut dx = vec![0.0; batch * n_in];
                    let wd = ws.data();
                    for i in 0..batch {
                        for j in 0..n_out {
                            let g = gd[i * n_out + j];
                            if g == 0.0 {
                                continue;
                            }
                            let wrow = &wd[j * n_in..(j + 1) * n_in];
                            let drow = &mut dx[i * n_in..(i + 1) * n_in];
                            for k in 0..n_in {
                                drow[k] += g * wrow[k];
                            }
                        }
                    }
                    self.accumulate(x, Tensor::new(vec![batch, n_in], dx));
                }
                if self.requires(w) {
                    let mut dw = vec![0.0; n_out * n_in];
                    let xd = xs.data();
                    for i in 0..batch {
                        let xrow = &xd[i * n_in..(i + 1) * n_in];
                        for j in 0..n_out {
                            let g = gd[i * n_out + j];
                            if g == 0.0 {
                                continue;
                            }
                            let drow = &mut dw[j * n_in..(j + 1) * n_in];
                            for k in 0..n_in {
                                drow[k] += g * xrow[k];
                            }
                        }
                    }
                    self.accumulate(w, Tensor::new(vec![n_out, n_in], dw));
                }
                if self.requires(b) {
                    let mut db = vec![0.0; n_out];
                    for i in 0..batch {
                        for j in 0..n_out {
                            db[j] += gd[i * n_out + j];
                        }
                    }
                    self.accumulate(b, Tensor::from_vec(db));
                }
            }
            Op::Conv2d { x, w, b, stride, pad } => {
                let (x, w, b, stride, pad) = (*x, *w, *b, *stride, *pad);
                let xs = self.value(x).clone();
                let ws = self.value(w).clone();
                let (dx, dw, db) = conv2d_backward(&xs, &ws, &grad, stride, pad);
                self.accumulate(x, dx);
                self.accumulate(w, dw);
                self.accumulate(b, db);
            }
            Op::ZeroUpsample2d { x, stride, extra } => {
                let (x, stride, _extra) = (*x, *stride, *extra);
                let xsh = self.value(x).shape().to_vec();
                let (bsz, ch, h, w) = (xsh[0], xsh[1], xsh[2], xsh[3]);
                let osh = self.nodes[id.0].value.shape().to_vec();
                let (oh, ow) = (osh[2], osh[3]);
                let gd = grad.data();
                let mut dx = vec![0.0; bsz * ch * h * w];
                for b in 0..bsz {
                    for c in 0..ch {
                        for i in 0..h {
                            for j in 0..w {
                                dx[((b * ch + c) * h + i) * w + j] =
                                    gd[((b * ch + c) * oh + i * stride) * ow + j * stride];
                            }
                        }
                    }
                }
                self.accumulate(x, Tensor::new(xsh, dx));
            }
            Op::FlipKernel(w) => {
                let w = *w;
                let wsh = self.value(w).shape().to_vec();
                let (ci, co, kh, kw) = (wsh[0], wsh[1], wsh[2], wsh[3]);
                let gd = grad.data();
                let mut dw = vec![0.0; ci * co * kh * kw];
                for a in 0..ci {
                    for b in 0..co {
                        for i in 0..kh {
                            for j in 0..kw {
                                dw[((a * co + b) * kh + i) * kw + j] =
                                    gd[((b * ci + a) * kh + (kh - 1 - i)) * kw + (kw - 1 - j)];
                            }
                        }
                    }
                }
                self.accumulate(w, Tensor::new(wsh, dw));
            }
            Op::Reshape(a) => {
                let a = *a;
                let target = self.value(a).shape().to_vec();
                self.accumulate(a, grad.reshaped(target));
            }
            Op::LogSoftmaxRows(a) => {
                let a = *a;
                let y = self.nodes[id.0].value.clone();
                let (batch, n) = (y.shape()[0], y.shape()[1]);
                let (yd, gd) = (y.data(), grad.data());
                let mut dx = vec![0.0; batch * n];
                for i in 0..batch {
                    let gsum: f64 = gd[i * n..(i + 1) * n].iter().sum();
                    for j in 0..n {
                        dx[i * n + j] = gd[i * n + j] - yd[i * n + j].exp() * gsum;
                    }
                }
                self.accumulate(a, Tensor::new(vec![batch, n], dx));
            }
            Op::GatherRows(a, indices) => {
                let a = *a;
                let indices = indices.clone();
                let sh = self.value(a).shape().to_vec();
                let (batch, n) = (sh[0], sh[1]);
                let gd = grad.data();
                let mut dx = vec![0.0; batch * n];
                for (i, &j) in indices.iter().enumerate() {
                    dx[i * n + j] = gd[i];
                }
                self.accumulate(a, Tensor::new(sh, dx));
            }
            Op::SumRows(a) => {
                let a = *a;
                let sh = self.value(a).shape().to_vec();
                let (batch, n) = (sh[0], sh[1]);
                let gd = grad.data();
                let mut dx = vec![0.0; batch * n];
                for i in 0..batch {
                    for j in 0..n {
                        dx[i * n + j] = gd[i];
                    }
                }
                self.accumulate(a, Tensor::new(sh, dx));
            }
            Op::MeanAll(a) => {
                let a = *a;
                let n = self.value(a).len() as f64;
                let g = grad.item() / n;
                let sh = self.value(a).shape().to_vec();
                let dx = Tensor::new(sh.clone(), vec![g; sh.iter().product()]);
                self.accumulate(a, dx);
            }
        }
    }
}

pub(crate) fn conv2d_forward(
    xs: &Tensor,
    ws: &Tensor,
    bs: &Tensor,
    stride: usize,
    pad: usize,
) -> Tensor {
    let (xsh, wsh) = (xs.shape(), ws.shape());
    assert_eq!(xsh.len(), 4, "conv2d expects x [B,Ci,H,W]");
    assert_eq!(wsh.len(), 4, "conv2d expects w [Co,Ci,kh,kw]");
    let (bsz, ci, h, w) = (xsh[0], xsh[1], xsh[2], xsh[3]);
    let (co, wci, kh, kw) = (wsh[0], wsh[1], wsh[2], wsh[3]);
    assert_eq!(ci, wci, "conv2d channel mismatch");
    assert_eq!(bs.shape(), &[co], "conv2d bias shape mismatch");
    assert!(h + 2 * pad >= kh && w + 2 * pad >= kw, "kernel larger than input");
    let oh = (h + 2 * pad - kh) / stride + 1;
    let ow = (w + 2 * pad - kw) / stride + 1;

    let (xd, wd, bd) = (xs.data(), ws.data(), bs.data());
    let mut out = vec![0.0; bsz * co * oh * ow];
    for b in 0..bsz {
        for o in 0..co {
            for i in 0..oh {
                for j in 0..ow {
                    let mut acc = bd[o];
                    for c in 0..ci {
                        for a in 0..kh {
                            let src_i = (i * stride + a) as isize - pad as isize;
                            if src_i < 0 || src_i >= h as isize {
                                continue;
                            }
                            for t in 0..kw {
                                let src_j = (j * stride + t) as isize - pad as isize;
                                if src_j < 0 || src_j >= w as isize {
                                    continue;
                                }
                                acc += xd[((b * ci + c) * h + src_i as usize) * w
                                    + src_j as usize]
                                    * wd[((o * ci + c) * kh + a) * kw + t];
                            }
                        }
                    }
                    out[((b * co + o) * oh + i) * ow + j] = acc;
                }
            }
        }
    }
    Tensor::new(vec![bsz, co, oh, ow], out)
}

fn conv2d_backward(
    xs: &Tensor,
    ws: &Tensor,
    grad: &Tensor,
    stride: usize,
    pad: usize,
) -> (Tensor, Tensor, Tensor) {
    let (xsh, wsh, gsh) = (xs.shape(), ws.shape(), grad.shape());
    let (bsz, ci, h, w) = (xsh[0], xsh[1], xsh[2], xsh[3]);
    let (co, _, kh, kw) = (wsh[0], wsh[1], wsh[2], wsh[3]);
    let (oh, ow) = (gsh[2], gsh[3]);

    let (xd, wd, gd) = (xs.data(), ws.data(), grad.data());
    let mut dx = vec![0.0; xs.len()];
    let mut dw = vec![0.0; ws.len()];
    let mut db = vec![0.0; co];

    for b in 0..bsz {
        for o in 0..co {
            for i in 0..oh {
                for j in 0..ow {
                    let g = gd[((b * co + o) * oh + i) * ow + j];
                    if g == 0.0 {
                        continue;
                    }
                    db[o] += g;
                    for c in 0..ci {
                        for a in 0..kh {
                            let src_i = (i * stride + a) as isize - pad as isize;
                            if src_i < 0 || src_i >= h as isize {
                                continue;
                            }
                            for t in 0..kw {
                                let src_j = (j * stride + t) as isize - pad as isize;
                                if src_j < 0 || src_j >= w as isize {
                                    continue;
                                }
                                let xi = ((b * ci + c) * h + src_i as usize) * w + src_j as usize;
                                let wi = ((o * ci + c) * kh + a) * kw + t;
                                dx[xi] += g * wd[wi];
                                dw[wi] += g * xd[xi];
                            }
                        }
                    }
                }
            }
        }
    }
    (
        Tensor::new(xsh.to_vec(), dx),
        Tensor::new(wsh.to_vec(), dw),
        Tensor::from_vec(db),
    )
}
