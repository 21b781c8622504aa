//! Tape-based reverse-mode automatic differentiation.
//!
//! Nodes are appended in creation order, which is a topological order because
//! every op only references nodes that already exist. `backward` walks the tape
//! in exact reverse order and may run at most once per graph.

use super::kernels::{col2im, gemm_nn, gemm_nt, gemm_tn, im2col, ConvGeom};
use super::{Scalar, Tensor, TensorError};

/// Handle to a node in a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op<T> {
    Leaf,
    View { input: Var, offset: usize },
    Conv2d { input: Var, kernel: Var, bias: Option<Var>, geom: ConvGeom, out_channels: usize },
    ConvTranspose2d { input: Var, kernel: Var, bias: Option<Var>, geom: ConvGeom, in_channels: usize },
    InstanceNorm { input: Var, gamma: Var, beta: Var, xhat: Vec<T>, inv_std: Vec<T> },
    Prelu { input: Var, slope: Var },
    Sigmoid { input: Var },
    Concat { a: Var, b: Var },
    Add { a: Var, b: Var },
    Crop { input: Var, top: usize, left: usize },
    DiceLoss { pred: Var, target: Vec<T>, sums: Vec<(T, T)> },
}

#[derive(Debug)]
struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
    grad: Option<Vec<T>>,
}

/// An autodiff tape owning every intermediate tensor of one forward pass.
#[derive(Debug)]
pub struct Graph<T: Scalar = f32> {
    nodes: Vec<Node<T>>,
    backward_done: bool,
}

impl<T: Scalar> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

fn shape_err(op: &'static str, lhs: &[usize], rhs: &[usize]) -> TensorError {
    TensorError::ShapeMismatch { op, lhs: lhs.to_vec(), rhs: rhs.to_vec() }
}

fn invalid(op: &'static str, msg: impl Into<String>) -> TensorError {
    TensorError::InvalidArgument { op, msg: msg.into() }
}

fn channel_count(dims: &[usize]) -> usize {
    if dims.len() >= 2 {
        dims[1]
    } else {
        1
    }
}

impl<T: Scalar> Graph<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new(), backward_done: false }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Adds a leaf tensor. Gradients are accumulated for it only if
    /// `requires_grad` is set.
    pub fn leaf(&mut self, value: Tensor<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node { value, op: Op::Leaf, requires_grad, grad: None });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    /// Accumulated gradient of the last `backward` call, if the node takes part
    /// in differentiation.
    pub fn grad(&self, v: Var) -> Option<&[T]> {
        self.nodes[v.0].grad.as_deref()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, inputs: &[Var]) -> Var {
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node { value, op, requires_grad, grad: None });
        Var(self.nodes.len() - 1)
    }

    /// Differentiable reinterpretation of `numel(dims)` contiguous elements of
    /// `input` starting at `offset`. Used to carve parameter tensors out of a
    /// flat parameter vector.
    pub fn view(&mut self, input: Var, offset: usize, dims: &[usize]) -> Result<Var, TensorError> {
        let src = self.value(input).data();
        let n = super::array::checked_numel(dims)?;
        if offset + n > src.len() {
            return Err(invalid("view", format!("range {offset}..{} exceeds {}", offset + n, src.len())));
        }
        let value = Tensor::new(dims.to_vec(), src[offset..offset + n].to_vec())?;
        Ok(self.push(value, Op::View { input, offset }, &[input]))
    }

    /// Cross-correlation of `input [B,Cin,H,W]` with `kernel [Cout,Cin,kH,kW]`.
    pub fn conv2d(
        &mut self,
        input: Var,
        kernel: Var,
        bias: Option<Var>,
        stride: usize,
        padding: usize,
    ) -> Result<Var, TensorError> {
        let xd = self.value(input).dims().to_vec();
        let kd = self.value(kernel).dims().to_vec();
        if xd.len() != 4 || kd.len() != 4 {
            return Err(shape_err("conv2d", &xd, &kd));
        }
        if kd[1] != xd[1] {
            return Err(TensorError::ChannelMismatch { op: "conv2d", expected: kd[1], got: xd[1] });
        }
        let out_c = kd[0];
        if let Some(b) = bias {
            if self.value(b).dims() != [out_c] {
                return Err(shape_err("conv2d bias", self.value(b).dims(), &[out_c]));
            }
        }
        let geom = ConvGeom::new(xd[1], xd[2], xd[3], kd[2], kd[3], stride, padding)
            .ok_or_else(|| invalid("conv2d", format!("kernel {kd:?} / stride {stride} invalid for input {xd:?}")))?;
        let batch = xd[0];
        let area = geom.out_area();
        let k = geom.col_rows();
        let mut out = vec![T::zero(); batch * out_c * area];
        let mut cols = vec![T::zero(); k * area];
        {
            let x = self.value(input).data();
            let w = self.value(kernel).data();
            let bvals = bias.map(|b| self.value(b).data());
            for b in 0..batch {
                im2col(&x[b * geom.in_len()..(b + 1) * geom.in_len()], &geom, &mut cols);
                let ob = &mut out[b * out_c * area..(b + 1) * out_c * area];
                if let Some(bv) = bvals {
                    for (c, chunk) in ob.chunks_mut(area).enumerate() {
                        chunk.fill(bv[c]);
                    }
                }
                gemm_nn(out_c, k, area, w, &cols, ob);
            }
        }
        let value = Tensor::new(vec![batch, out_c, geom.out_h, geom.out_w], out)?;
        let mut inputs = vec![input, kernel];
        inputs.extend(bias);
        Ok(self.push(value, Op::Conv2d { input, kernel, bias, geom, out_channels: out_c }, &inputs))
    }

    /// Transposed convolution of `input [B,Cin,h,w]` with `kernel [Cin,Cout,kH,kW]`.
    ///
    /// The output padding is chosen so that the output extent is exactly
    /// `stride * h` (for stride 1 it is zero). Configurations where that
    /// extent is not reachable are rejected.
    pub fn conv_transpose2d(
        &mut self,
        input: Var,
        kernel: Var,
        bias: Option<Var>,
        stride: usize,
        padding: usize,
    ) -> Result<Var, TensorError> {
        let xd = self.value(input).dims().to_vec();
        let kd = self.value(kernel).dims().to_vec();
        if xd.len() != 4 || kd.len() != 4 {
            return Err(shape_err("conv_transpose2d", &xd, &kd));
        }
        if kd[0] != xd[1] {
            return Err(TensorError::ChannelMismatch { op: "conv_transpose2d", expected: kd[0], got: xd[1] });
        }
        if stride == 0 {
            return Err(invalid("conv_transpose2d", "stride must be positive"));
        }
        let (in_c, out_c) = (kd[0], kd[1]);
        let out_extent = |h: usize, k: usize| -> Result<usize, TensorError> {
            let natural = ((h - 1) * stride + k)
                .checked_sub(2 * padding)
                .filter(|&v| v > 0)
                .ok_or_else(|| invalid("conv_transpose2d", format!("padding {padding} too large for kernel {k}")))?;
            if stride == 1 {
                return Ok(natural);
            }
            let target = stride * h;
            if target < natural || target - natural >= stride {
                return Err(invalid(
                    "conv_transpose2d",
                    format!("cannot reach extent {target} from {h} with kernel {k}, padding {padding}"),
                ));
            }
            Ok(target)
        };
        let out_h = out_extent(xd[2], kd[2])?;
        let out_w = out_extent(xd[3], kd[3])?;
        let geom = ConvGeom::new(out_c, out_h, out_w, kd[2], kd[3], stride, padding)
            .filter(|g| g.out_h == xd[2] && g.out_w == xd[3])
            .ok_or_else(|| invalid("conv_transpose2d", "inconsistent geometry"))?;
        if let Some(b) = bias {
            if self.value(b).dims() != [out_c] {
                return Err(shape_err("conv_transpose2d bias", self.value(b).dims(), &[out_c]));
            }
        }
        let batch = xd[0];
        let area = geom.out_area();
        let k = geom.col_rows();
        let out_len = geom.in_len();
        let mut out = vec![T::zero(); batch * out_len];
        let mut cols = vec![T::zero(); k * area];
        {
            let x = self.value(input).data();
            let w = self.value(kernel).data();
            let bvals = bias.map(|b| self.value(b).data());
            for b in 0..batch {
                cols.fill(T::zero());
                gemm_tn(k, in_c, area, w, &x[b * in_c * area..(b + 1) * in_c * area], &mut cols);
                let ob = &mut out[b * out_len..(b + 1) * out_len];
                if let Some(bv) = bvals {
                    for (c, chunk) in ob.chunks_mut(out_h * out_w).enumerate() {
                        chunk.fill(bv[c]);
                    }
                }
                col2im(&cols, &geom, ob);
            }
        }
        let value = Tensor::new(vec![batch, out_c, out_h, out_w], out)?;
        let mut inputs = vec![input, kernel];
        inputs.extend(bias);
        Ok(self.push(value, Op::ConvTranspose2d { input, kernel, bias, geom, in_channels: in_c }, &inputs))
    }

    /// Per-sample, per-channel standardization over spatial positions followed
    /// by a learnable affine map.
    pub fn instance_norm(&mut self, input: Var, gamma: Var, beta: Var, epsilon: f64) -> Result<Var, TensorError> {
        let xd = self.value(input).dims().to_vec();
        if xd.len() < 3 {
            return Err(invalid("instance_norm", format!("expected [B,C,...], got {xd:?}")));
        }
        let (batch, channels) = (xd[0], xd[1]);
        let spatial: usize = xd[2..].iter().product();
        if spatial < 2 {
            return Err(invalid("instance_norm", "needs at least two spatial positions"));
        }
        if !(epsilon > 0.0) {
            return Err(invalid("instance_norm", "epsilon must be positive"));
        }
        for p in [gamma, beta] {
            if self.value(p).dims() != [channels] {
                return Err(shape_err("instance_norm affine", self.value(p).dims(), &[channels]));
            }
        }
        let x = self.value(input).data();
        let g = self.value(gamma).data();
        let bt = self.value(beta).data();
        let n = T::of(spatial as f64);
        let eps = T::of(epsilon);
        let mut xhat = vec![T::zero(); x.len()];
        let mut out = vec![T::zero(); x.len()];
        let mut inv_std = vec![T::zero(); batch * channels];
        for bc in 0..batch * channels {
            let c = bc % channels;
            let xs = &x[bc * spatial..(bc + 1) * spatial];
            let mean = xs.iter().copied().sum::<T>() / n;
            let var = xs.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
            let is = T::one() / (var + eps).sqrt();
            inv_std[bc] = is;
            let xh = &mut xhat[bc * spatial..(bc + 1) * spatial];
            let o = &mut out[bc * spatial..(bc + 1) * spatial];
            for i in 0..spatial {
                xh[i] = (xs[i] - mean) * is;
                o[i] = g[c] * xh[i] + bt[c];
            }
        }
        let value = Tensor::new(xd, out)?;
        Ok(self.push(value, Op::InstanceNorm { input, gamma, beta, xhat, inv_std }, &[input, gamma, beta]))
    }

    /// Parametric rectifier with one slope per channel (axis 1; a single slope
    /// for rank-1 inputs).
    pub fn prelu(&mut self, input: Var, slope: Var) -> Result<Var, TensorError> {
        let xd = self.value(input).dims().to_vec();
        let channels = channel_count(&xd);
        if self.value(slope).numel() != channels {
            return Err(shape_err("prelu", self.value(slope).dims(), &[channels]));
        }
        let inner: usize = if xd.len() >= 2 { xd[2..].iter().product() } else { xd[0] };
        let x = self.value(input).data();
        let a = self.value(slope).data();
        let out = x
            .iter()
            .enumerate()
            .map(|(i, &v)| if v >= T::zero() { v } else { a[(i / inner) % channels] * v })
            .collect();
        let value = Tensor::new(xd, out)?;
        Ok(self.push(value, Op::Prelu { input, slope }, &[input, slope]))
    }

    /// Logistic function. Outputs are kept strictly inside (0, 1) at the
    /// working precision.
    pub fn sigmoid(&mut self, input: Var) -> Var {
        let hi = T::one() - T::epsilon() / T::of(2.0);
        let lo = T::min_positive_value();
        let src = self.value(input);
        let out: Vec<T> = src
            .data()
            .iter()
            .map(|&v| {
                let s = if v >= T::zero() {
                    T::one() / (T::one() + (-v).exp())
                } else {
                    let e = v.exp();
                    e / (T::one() + e)
                };
                s.max(lo).min(hi)
            })
            .collect();
        let value = Tensor::new(src.dims().to_vec(), out).expect("same dims");
        self.push(value, Op::Sigmoid { input }, &[input])
    }

    /// Concatenates `a [B,C1,...]` and `b [B,C2,...]` along the channel axis.
    pub fn concat_channels(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (ad, bd) = (self.value(a).dims().to_vec(), self.value(b).dims().to_vec());
        if ad.len() < 2 || ad.len() != bd.len() || ad[0] != bd[0] || ad[2..] != bd[2..] {
            return Err(shape_err("concat_channels", &ad, &bd));
        }
        let inner: usize = ad[2..].iter().product();
        let (ca, cb) = (ad[1] * inner, bd[1] * inner);
        let (xa, xb) = (self.value(a).data(), self.value(b).data());
        let mut out = Vec::with_capacity(xa.len() + xb.len());
        for s in 0..ad[0] {
            out.extend_from_slice(&xa[s * ca..(s + 1) * ca]);
            out.extend_from_slice(&xb[s * cb..(s + 1) * cb]);
        }
        let mut dims = ad.clone();
        dims[1] += bd[1];
        let value = Tensor::new(dims, out)?;
        Ok(self.push(value, Op::Concat { a, b }, &[a, b]))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.dims() != tb.dims() {
            return Err(shape_err("add", ta.dims(), tb.dims()));
        }
        let out = ta.data().iter().zip(tb.data()).map(|(&x, &y)| x + y).collect();
        let value = Tensor::new(ta.dims().to_vec(), out)?;
        Ok(self.push(value, Op::Add { a, b }, &[a, b]))
    }

    /// Spatial crop of a rank-4 tensor to `height x width` starting at `(top, left)`.
    pub fn crop2d(
        &mut self,
        input: Var,
        top: usize,
        left: usize,
        height: usize,
        width: usize,
    ) -> Result<Var, TensorError> {
        let d = self.value(input).dims().to_vec();
        if d.len() != 4 || height == 0 || width == 0 || top + height > d[2] || left + width > d[3] {
            return Err(invalid("crop2d", format!("window {top}+{height} x {left}+{width} outside {d:?}")));
        }
        let x = self.value(input).data();
        let mut out = Vec::with_capacity(d[0] * d[1] * height * width);
        for plane in x.chunks(d[2] * d[3]) {
            for r in top..top + height {
                out.extend_from_slice(&plane[r * d[3] + left..r * d[3] + left + width]);
            }
        }
        let value = Tensor::new(vec![d[0], d[1], height, width], out)?;
        Ok(self.push(value, Op::Crop { input, top, left }, &[input]))
    }

    /// Binary soft Dice loss, computed per sample (axis 0) and averaged:
    /// `1 - (2 sum(p g) + s) / (sum p + sum g + s)`.
    pub fn dice_loss(&mut self, pred: Var, target: &Tensor<T>, smooth: f64) -> Result<Var, TensorError> {
        let p = self.value(pred);
        if p.dims() != target.dims() {
            return Err(shape_err("dice_loss", p.dims(), target.dims()));
        }
        if target.data().iter().any(|&g| g != T::zero() && g != T::one()) {
            return Err(TensorError::NonBinaryTarget);
        }
        if !(smooth > 0.0) {
            return Err(invalid("dice_loss", "smooth must be positive"));
        }
        let batch = p.dims()[0];
        let per = p.numel() / batch;
        let s = T::of(smooth);
        let mut sums = Vec::with_capacity(batch);
        let mut total = T::zero();
        for b in 0..batch {
            let ps = &p.data()[b * per..(b + 1) * per];
            let gs = &target.data()[b * per..(b + 1) * per];
            let inter: T = ps.iter().zip(gs).map(|(&a, &g)| a * g).sum();
            let denom = ps.iter().copied().sum::<T>() + gs.iter().copied().sum::<T>() + s;
            let numer = T::of(2.0) * inter + s;
            total = total + (T::one() - numer / denom);
            sums.push((numer, denom));
        }
        let value = Tensor::scalar(total / T::of(batch as f64));
        Ok(self.push(value, Op::DiceLoss { pred, target: target.data().to_vec(), sums }, &[pred]))
    }

    /// Backpropagates from a one-element output.
    pub fn backward(&mut self, output: Var) -> Result<(), TensorError> {
        let dims = self.value(output).dims().to_vec();
        if self.value(output).numel() != 1 {
            return Err(TensorError::NonScalarOutput(dims));
        }
        let seed = Tensor::new(dims, vec![T::one()])?;
        self.backward_with_seed(output, &seed)
    }

    /// Backpropagates `seed` (the upstream gradient of `output`). May only be
    /// called once per graph.
    pub fn backward_with_seed(&mut self, output: Var, seed: &Tensor<T>) -> Result<(), TensorError> {
        if self.backward_done {
            return Err(TensorError::BackwardTwice);
        }
        if seed.dims() != self.value(output).dims() {
            return Err(shape_err("backward seed", seed.dims(), self.value(output).dims()));
        }
        self.backward_done = true;
        if !self.nodes[output.0].requires_grad {
            return Ok(());
        }
        self.nodes[output.0].grad = Some(seed.data().to_vec());
        for id in (0..=output.0).rev() {
            let (head, tail) = self.nodes.split_at_mut(id);
            let node = &mut tail[0];
            let Some(gy) = node.grad.take() else { continue };
            let contributions = backward_op(head, node, &gy);
            node.grad = Some(gy);
            for (var, g) in contributions {
                let target = &mut head[var.0];
                if !target.requires_grad {
                    continue;
                }
                match &mut target.grad {
                    Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, &v)| *a = *a + v),
                    slot @ None => *slot = Some(g),
                }
            }
        }
        Ok(())
    }
}

/// Gradient contributions of one node to its inputs.
fn backward_op<T: Scalar>(head: &[Node<T>], node: &Node<T>, gy: &[T]) -> Vec<(Var, Vec<T>)> {
    let needs = |v: Var| head[v.0].requires_grad;
    let val = |v: Var| &head[v.0].value;
    let mut out = Vec::new();
    match &node.op {
        Op::Leaf => {}
        Op::View { input, offset } => {
            let mut g = vec![T::zero(); val(*input).numel()];
            g[*offset..*offset + gy.len()].copy_from_slice(gy);
            out.push((*input, g));
        }
        Op::Conv2d { input, kernel, bias, geom, out_channels } => {
            let x = val(*input).data();
            let w = val(*kernel).data();
            let batch = val(*input).dims()[0];
            let (area, k, oc) = (geom.out_area(), geom.col_rows(), *out_channels);
            let mut cols = vec![T::zero(); k * area];
            let mut dx = needs(*input).then(|| vec![T::zero(); x.len()]);
            let mut dw = needs(*kernel).then(|| vec![T::zero(); w.len()]);
            for b in 0..batch {
                let gb = &gy[b * oc * area..(b + 1) * oc * area];
                if let Some(dw) = dw.as_mut() {
                    im2col(&x[b * geom.in_len()..(b + 1) * geom.in_len()], geom, &mut cols);
                    gemm_nt(oc, area, k, gb, &cols, dw);
                }
                if let Some(dx) = dx.as_mut() {
                    cols.fill(T::zero());
                    gemm_tn(k, oc, area, w, gb, &mut cols);
                    col2im(&cols, geom, &mut dx[b * geom.in_len()..(b + 1) * geom.in_len()]);
                }
            }
            if let Some(b) = bias.filter(|&b| needs(b)) {
                out.push((b, channel_sums(gy, batch, oc, area)));
            }
            out.extend(dx.map(|g| (*input, g)));
            out.extend(dw.map(|g| (*kernel, g)));
        }
        Op::ConvTranspose2d { input, kernel, bias, geom, in_channels } => {
            let x = val(*input).data();
            let w = val(*kernel).data();
            let batch = val(*input).dims()[0];
            let (area, k, ic) = (geom.out_area(), geom.col_rows(), *in_channels);
            let out_len = geom.in_len();
            let mut cols = vec![T::zero(); k * area];
            let mut dx = needs(*input).then(|| vec![T::zero(); x.len()]);
            let mut dw = needs(*kernel).then(|| vec![T::zero(); w.len()]);
            for b in 0..batch {
                im2col(&gy[b * out_len..(b + 1) * out_len], geom, &mut cols);
                if let Some(dx) = dx.as_mut() {
                    gemm_nn(ic, k, area, w, &cols, &mut dx[b * ic * area..(b + 1) * ic * area]);
                }
                if let Some(dw) = dw.as_mut() {
                    gemm_nt(ic, area, k, &x[b * ic * area..(b + 1) * ic * area], &cols, dw);
                }
            }
            if let Some(b) = bias.filter(|&b| needs(b)) {
                out.push((b, channel_sums(gy, batch, geom.channels, geom.height * geom.width)));
            }
            out.extend(dx.map(|g| (*input, g)));
            out.extend(dw.map(|g| (*kernel, g)));
        }
        Op::InstanceNorm { input, gamma, beta, xhat, inv_std } => {
            let dims = val(*input).dims();
            let (batch, channels) = (dims[0], dims[1]);
            let spatial = xhat.len() / (batch * channels);
            let g = val(*gamma).data();
            let n = T::of(spatial as f64);
            let mut dgamma = vec![T::zero(); channels];
            let mut dbeta = vec![T::zero(); channels];
            let mut dx = needs(*input).then(|| vec![T::zero(); xhat.len()]);
            for bc in 0..batch * channels {
                let c = bc % channels;
                let r = bc * spatial..(bc + 1) * spatial;
                let (gs, xh) = (&gy[r.clone()], &xhat[r.clone()]);
                let sum_g: T = gs.iter().copied().sum();
                let sum_gx: T = gs.iter().zip(xh).map(|(&a, &b)| a * b).sum();
                dgamma[c] = dgamma[c] + sum_gx;
                dbeta[c] = dbeta[c] + sum_g;
                if let Some(dx) = dx.as_mut() {
                    let scale = g[c] * inv_std[bc] / n;
                    for (i, d) in dx[r].iter_mut().enumerate() {
                        *d = scale * (n * gs[i] - sum_g - xh[i] * sum_gx);
                    }
                }
            }
            out.extend(dx.map(|g| (*input, g)));
            out.push((*gamma, dgamma));
            out.push((*beta, dbeta));
        }
        Op::Prelu { input, slope } => {
            let xt = val(*input);
            let channels = channel_count(xt.dims());
            let inner = if xt.rank() >= 2 { xt.dims()[2..].iter().product() } else { xt.dims()[0] };
            let a = val(*slope).data();
            let mut da = vec![T::zero(); a.len()];
            let mut dx = vec![T::zero(); xt.numel()];
            for (i, (&x, &g)) in xt.data().iter().zip(gy).enumerate() {
                let c = (i / inner) % channels;
                if x >= T::zero() {
                    dx[i] = g;
                } else {
                    dx[i] = a[c] * g;
                    da[c] = da[c] + x * g;
                }
            }
            out.push((*input, dx));
            out.push((*slope, da));
        }
        Op::Sigmoid { input } => {
            let y = node.value.data();
            out.push((*input, y.iter().zip(gy).map(|(&s, &g)| g * s * (T::one() - s)).collect()));
        }
        Op::Concat { a, b } => {
            let ad = val(*a).dims();
            let inner: usize = ad[2..].iter().product();
            let ca = ad[1] * inner;
            let cb = val(*b).dims()[1] * inner;
            let mut ga = Vec::with_capacity(ad[0] * ca);
            let mut gb = Vec::with_capacity(ad[0] * cb);
            for s in 0..ad[0] {
                let base = s * (ca + cb);
                ga.extend_from_slice(&gy[base..base + ca]);
                gb.extend_from_slice(&gy[base + ca..base + ca + cb]);
            }
            out.push((*a, ga));
            out.push((*b, gb));
        }
        Op::Add { a, b } => {
            out.push((*a, gy.to_vec()));
            out.push((*b, gy.to_vec()));
        }
        Op::Crop { input, top, left } => {
            let d = val(*input).dims();
            let (h, w) = (node.value.dims()[2], node.value.dims()[3]);
            let mut g = vec![T::zero(); val(*input).numel()];
            for (p, plane) in g.chunks_mut(d[2] * d[3]).enumerate() {
                for r in 0..h {
                    let src = &gy[(p * h + r) * w..(p * h + r + 1) * w];
                    plane[(top + r) * d[3] + left..(top + r) * d[3] + left + w].copy_from_slice(src);
                }
            }
            out.push((*input, g));
        }
        Op::DiceLoss { pred, target, sums } => {
            let batch = sums.len();
            let per = target.len() / batch;
            let upstream = gy[0] / T::of(batch as f64);
            let mut g = vec![T::zero(); target.len()];
            for (b, &(numer, denom)) in sums.iter().enumerate() {
                let d2 = denom * denom;
                for i in b * per..(b + 1) * per {
                    let dd = (T::of(2.0) * target[i] * denom - numer) / d2;
                    g[i] = -upstream * dd;
                }
            }
            out.push((*pred, g));
        }
    }
    out
}

fn channel_sums<T: Scalar>(g: &[T], batch: usize, channels: usize, area: usize) -> Vec<T> {
    let mut s = vec![T::zero(); channels];
    for b in 0..batch {
        for (c, acc) in s.iter_mut().enumerate() {
            let base = (b * channels + c) * area;
            *acc = *acc + g[base..base + area].iter().copied().sum::<T>();
        }
    }
    s
}
