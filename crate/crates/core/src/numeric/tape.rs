use super::tensor::{column_moments, gelu_scalar, gelu_scalar_grad, Tensor};
use crate::error::{Result, ScgirError};

/// Handle to a value recorded on a [`GradTape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
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
    Mul(Var, Var),
    AddRow(Var, Var),
    MulRow(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Square(Var),
    Gelu(Var),
    Prelu(Var, Var),
    Standardize { input: Var, eps: f64, std: Vec<f64> },
    Transpose(Var),
    Sum(Var),
    Diag(Var),
    Reshape(Var),
    Conv2d { input: Var, weight: Var, bias: Var, stride: usize, pad: usize },
    GlobalAvgPool(Var),
    SoftmaxXent { logits: Var, labels: Vec<usize>, probs: Tensor },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

/// Linear record of operations for reverse-mode differentiation.
///
/// Nodes are appended after their parents, so reverse insertion order is a
/// valid reverse topological order. A tape supports a single backward pass.
#[derive(Debug, Default)]
pub struct GradTape {
    nodes: Vec<Node>,
    backward_done: bool,
}

/// Adjoints produced by [`GradTape::backward`], one per recorded node.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    shapes: Vec<Vec<usize>>,
    visited: usize,
}

impl Gradients {
    /// Gradient of the loss w.r.t. `v`; exactly zero when `v` does not feed the loss.
    pub fn wrt(&self, v: Var) -> Tensor {
        match &self.grads[v.0] {
            Some(g) => g.clone(),
            None => Tensor::zeros(&self.shapes[v.0]),
        }
    }

    /// Number of nodes the backward sweep propagated through.
    pub fn visited(&self) -> usize {
        self.visited
    }
}

fn accumulate(slot: &mut Option<Tensor>, g: Tensor) {
    match slot {
        Some(acc) => {
            for (a, b) in acc.data_mut().iter_mut().zip(g.data()) {
                *a += b;
            }
        }
        None => *slot = Some(g),
    }
}

impl GradTape {
    pub fn new() -> Self {
        Self::default()
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

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Records an input or parameter.
    pub fn leaf(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul(self.value(b))?;
        Ok(self.push(out, Op::MatMul(a, b)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).zip_map(self.value(b), "add", |x, y| x + y)?;
        Ok(self.push(out, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).zip_map(self.value(b), "sub", |x, y| x - y)?;
        Ok(self.push(out, Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).zip_map(self.value(b), "mul", |x, y| x * y)?;
        Ok(self.push(out, Op::Mul(a, b)))
    }

    /// Adds a length-`m` vector to every row of an `n × m` matrix.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(bias));
        if av.shape().len() != 2 || bv.shape() != [av.cols()] {
            return Err(ScgirError::shape("add_row", av.shape(), bv.shape()));
        }
        let m = av.cols();
        let mut out = av.clone();
        for (i, o) in out.data_mut().iter_mut().enumerate() {
            *o += bv.data()[i % m];
        }
        Ok(self.push(out, Op::AddRow(a, bias)))
    }

    /// Multiplies every row of an `n × m` matrix elementwise by a length-`m` vector.
    pub fn mul_row(&mut self, a: Var, v: Var) -> Result<Var> {
        let (av, vv) = (self.value(a), self.value(v));
        if av.shape().len() != 2 || vv.shape() != [av.cols()] {
            return Err(ScgirError::shape("mul_row", av.shape(), vv.shape()));
        }
        let m = av.cols();
        let mut out = av.clone();
        for (i, o) in out.data_mut().iter_mut().enumerate() {
            *o *= vv.data()[i % m];
        }
        Ok(self.push(out, Op::MulRow(a, v)))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let out = self.value(a).map(|x| x * s);
        self.push(out, Op::Scale(a, s))
    }

    pub fn add_scalar(&mut self, a: Var, s: f64) -> Var {
        let out = self.value(a).map(|x| x + s);
        self.push(out, Op::AddScalar(a))
    }

    pub fn square(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| x * x);
        self.push(out, Op::Square(a))
    }

    pub fn gelu(&mut self, a: Var) -> Var {
        let out = self.value(a).map(gelu_scalar);
        self.push(out, Op::Gelu(a))
    }

    /// PReLU with a single learnable slope (shape `[1]`) shared by all units.
    pub fn prelu(&mut self, a: Var, slope: Var) -> Result<Var> {
        let sv = self.value(slope);
        if sv.len() != 1 {
            return Err(ScgirError::shape("prelu", self.value(a).shape(), sv.shape()));
        }
        let s = sv.item();
        let out = self.value(a).map(|x| if x >= 0.0 { x } else { s * x });
        Ok(self.push(out, Op::Prelu(a, slope)))
    }

    /// Column standardization with population std; divisor is `std + eps`.
    pub fn standardize(&mut self, a: Var, eps: f64) -> Result<Var> {
        let av = self.value(a);
        if av.shape().len() != 2 {
            return Err(ScgirError::shape("standardize", av.shape(), &[0, 0]));
        }
        let (n, d) = (av.rows(), av.cols());
        if n < 2 {
            return Err(ScgirError::BatchTooSmall { needed: 2, got: n });
        }
        let (mean, std) = column_moments(av)?;
        let mut out = av.clone();
        for (idx, o) in out.data_mut().iter_mut().enumerate() {
            let j = idx % d;
            *o = (*o - mean[j]) / (std[j] + eps);
        }
        Ok(self.push(out, Op::Standardize { input: a, eps, std }))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).transpose()?;
        Ok(self.push(out, Op::Transpose(a)))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let out = Tensor::scalar(self.value(a).sum());
        self.push(out, Op::Sum(a))
    }

    /// Diagonal of a square matrix as a vector.
    pub fn diag(&mut self, a: Var) -> Result<Var> {
        let av = self.value(a);
        match av.shape() {
            &[r, c] if r == c => {
                let out = Tensor::vector((0..r).map(|i| av.at(i, i)).collect());
                Ok(self.push(out, Op::Diag(a)))
            }
            s => Err(ScgirError::shape("diag", s, s)),
        }
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let out = self.value(a).reshape(shape)?;
        Ok(self.push(out, Op::Reshape(a)))
    }

    /// 2-D convolution: input `[n, c, h, w]`, weight `[o, c, k, k]`, bias `[o]`.
    pub fn conv2d(&mut self, input: Var, weight: Var, bias: Var, stride: usize, pad: usize) -> Result<Var> {
        let (x, w, b) = (self.value(input), self.value(weight), self.value(bias));
        let (&[n, c, h, wd], &[o, wc, k, k2]) = (x.shape(), w.shape()) else {
            return Err(ScgirError::shape("conv2d", x.shape(), w.shape()));
        };
        if wc != c || k != k2 || b.shape() != [o] || stride == 0 || h + 2 * pad < k || wd + 2 * pad < k {
            return Err(ScgirError::shape("conv2d", x.shape(), w.shape()));
        }
        let ho = (h + 2 * pad - k) / stride + 1;
        let wo = (wd + 2 * pad - k) / stride + 1;
        let (xd, wdata, bd) = (x.data(), w.data(), b.data());
        let mut out = vec![0.0; n * o * ho * wo];
        for ni in 0..n {
            for oi in 0..o {
                let obase = (ni * o + oi) * ho * wo;
                for oy in 0..ho {
                    for ox in 0..wo {
                        let mut acc = bd[oi];
                        for ci in 0..c {
                            let xbase = (ni * c + ci) * h * wd;
                            let wbase = (oi * c + ci) * k * k;
                            for ky in 0..k {
                                let iy = (oy * stride + ky) as isize - pad as isize;
                                if iy < 0 || iy >= h as isize {
                                    continue;
                                }
                                for kx in 0..k {
                                    let ix = (ox * stride + kx) as isize - pad as isize;
                                    if ix < 0 || ix >= wd as isize {
                                        continue;
                                    }
                                    acc += xd[xbase + iy as usize * wd + ix as usize] * wdata[wbase + ky * k + kx];
                                }
                            }
                        }
                        out[obase + oy * wo + ox] = acc;
                    }
                }
            }
        }
        let out = Tensor::new(vec![n, o, ho, wo], out)?;
        Ok(self.push(out, Op::Conv2d { input, weight, bias, stride, pad }))
    }

    /// Mean over spatial dims: `[n, c, h, w] -> [n, c]`.
    pub fn global_avg_pool(&mut self, a: Var) -> Result<Var> {
        let av = self.value(a);
        let &[n, c, h, w] = av.shape() else {
            return Err(ScgirError::shape("global_avg_pool", av.shape(), &[0, 0, 0, 0]));
        };
        let hw = h * w;
        let out: Vec<f64> = av.data().chunks(hw).map(|ch| ch.iter().sum::<f64>() / hw as f64).collect();
        let out = Tensor::new(vec![n, c], out)?;
        Ok(self.push(out, Op::GlobalAvgPool(a)))
    }

    /// Mean softmax cross-entropy of `n × C` logits against integer labels.
    pub fn softmax_cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let lv = self.value(logits);
        if lv.shape().len() != 2 || lv.rows() != labels.len() {
            return Err(ScgirError::shape("softmax_cross_entropy", lv.shape(), &[labels.len()]));
        }
        let (n, classes) = (lv.rows(), lv.cols());
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(ScgirError::Contract(format!("label {bad} out of range for {classes} classes")));
        }
        let mut probs = Tensor::zeros(&[n, classes]);
        let mut loss = 0.0;
        for (i, &label) in labels.iter().enumerate() {
            let row = lv.row(i);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = row.iter().map(|v| (v - max).exp()).sum();
            loss += max + z.ln() - row[label];
            for (j, &v) in row.iter().enumerate() {
                probs.data_mut()[i * classes + j] = (v - max).exp() / z;
            }
        }
        let out = Tensor::scalar(loss / n as f64);
        Ok(self.push(
            out,
            Op::SoftmaxXent {
                logits,
                labels: labels.to_vec(),
                probs,
            },
        ))
    }

    /// Reverse sweep from a scalar `loss`. A tape can be swept once.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients> {
        if self.backward_done {
            return Err(ScgirError::State("backward already ran on this tape".into()));
        }
        if !self.value(loss).is_scalar() {
            return Err(ScgirError::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        self.backward_done = true;
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::full(self.value(loss).shape(), 1.0));
        let mut visited = 0;
        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            visited += 1;
            self.propagate(idx, &g, &mut grads)?;
            grads[idx] = Some(g);
        }
        Ok(Gradients {
            grads,
            shapes: self.nodes.iter().map(|n| n.value.shape().to_vec()).collect(),
            visited,
        })
    }

    fn propagate(&self, idx: usize, g: &Tensor, grads: &mut [Option<Tensor>]) -> Result<()> {
        let node = &self.nodes[idx];
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let av = self.value(*a);
                let bv = self.value(*b);
                accumulate(&mut grads[a.0], g.matmul(&bv.transpose()?)?);
                accumulate(&mut grads[b.0], av.transpose()?.matmul(g)?);
            }
            Op::Add(a, b) => {
                accumulate(&mut grads[a.0], g.clone());
                accumulate(&mut grads[b.0], g.clone());
            }
            Op::Sub(a, b) => {
                accumulate(&mut grads[a.0], g.clone());
                accumulate(&mut grads[b.0], g.map(|v| -v));
            }
            Op::Mul(a, b) => {
                let av = self.value(*a);
                let bv = self.value(*b);
                accumulate(&mut grads[a.0], g.zip_map(bv, "mul", |x, y| x * y)?);
                accumulate(&mut grads[b.0], g.zip_map(av, "mul", |x, y| x * y)?);
            }
            Op::AddRow(a, b) => {
                let m = g.cols();
                let mut gb = vec![0.0; m];
                for (i, v) in g.data().iter().enumerate() {
                    gb[i % m] += v;
                }
                accumulate(&mut grads[a.0], g.clone());
                accumulate(&mut grads[b.0], Tensor::vector(gb));
            }
            Op::MulRow(a, v) => {
                let (av, vv) = (self.value(*a), self.value(*v));
                let m = g.cols();
                let mut ga = g.clone();
                let mut gv = vec![0.0; m];
                for (i, gval) in ga.data_mut().iter_mut().enumerate() {
                    gv[i % m] += *gval * av.data()[i];
                    *gval *= vv.data()[i % m];
                }
                accumulate(&mut grads[a.0], ga);
                accumulate(&mut grads[v.0], Tensor::vector(gv));
            }
            Op::Scale(a, s) => accumulate(&mut grads[a.0], g.map(|v| v * s)),
            Op::AddScalar(a) => accumulate(&mut grads[a.0], g.clone()),
            Op::Square(a) => {
                let av = self.value(*a);
                accumulate(&mut grads[a.0], g.zip_map(av, "square", |gv, x| 2.0 * x * gv)?);
            }
            Op::Gelu(a) => {
                let av = self.value(*a);
                accumulate(&mut grads[a.0], g.zip_map(av, "gelu", |gv, x| gv * gelu_scalar_grad(x))?);
            }
            Op::Prelu(a, slope) => {
                let av = self.value(*a);
                let s = self.value(*slope).item();
                let gx = g.zip_map(av, "prelu", |gv, x| if x >= 0.0 { gv } else { s * gv })?;
                let gs: f64 = g.data().iter().zip(av.data()).filter(|(_, &x)| x < 0.0).map(|(gv, x)| gv * x).sum();
                accumulate(&mut grads[a.0], gx);
                accumulate(&mut grads[slope.0], Tensor::new(self.value(*slope).shape().to_vec(), vec![gs])?);
            }
            Op::Standardize { input, eps, std } => {
                let y = &node.value;
                let (n, d) = (y.rows(), y.cols());
                let nf = n as f64;
                let mut gx = vec![0.0; n * d];
                for j in 0..d {
                    let s = std[j] + eps;
                    let mut g_mean = 0.0;
                    let mut g_dot_xc = 0.0;
                    for i in 0..n {
                        let gv = g.data()[i * d + j];
                        g_mean += gv;
                        g_dot_xc += gv * y.data()[i * d + j] * s;
                    }
                    g_mean /= nf;
                    let coef = if std[j] > 0.0 { g_dot_xc / (s * s * nf * std[j]) } else { 0.0 };
                    for i in 0..n {
                        let xc = y.data()[i * d + j] * s;
                        gx[i * d + j] = (g.data()[i * d + j] - g_mean) / s - coef * xc;
                    }
                }
                accumulate(&mut grads[input.0], Tensor::new(vec![n, d], gx)?);
            }
            Op::Transpose(a) => accumulate(&mut grads[a.0], g.transpose()?),
            Op::Sum(a) => {
                let gv = g.item();
                accumulate(&mut grads[a.0], Tensor::full(self.value(*a).shape(), gv));
            }
            Op::Diag(a) => {
                let d = g.len();
                let mut ga = Tensor::zeros(&[d, d]);
                for i in 0..d {
                    ga.data_mut()[i * d + i] = g.data()[i];
                }
                accumulate(&mut grads[a.0], ga);
            }
            Op::Reshape(a) => accumulate(&mut grads[a.0], g.reshape(self.value(*a).shape())?),
            Op::Conv2d { input, weight, bias, stride, pad } => {
                let (x, w) = (self.value(*input), self.value(*weight));
                let (&[n, c, h, wd], &[o, _, k, _]) = (x.shape(), w.shape()) else {
                    unreachable!("conv2d shapes validated on record")
                };
                let (ho, wo) = (g.shape()[2], g.shape()[3]);
                let (xd, wdata, gd) = (x.data(), w.data(), g.data());
                let mut gx = vec![0.0; x.len()];
                let mut gw = vec![0.0; w.len()];
                let mut gb = vec![0.0; o];
                for ni in 0..n {
                    for oi in 0..o {
                        let gbase = (ni * o + oi) * ho * wo;
                        for oy in 0..ho {
                            for ox in 0..wo {
                                let gv = gd[gbase + oy * wo + ox];
                                if gv == 0.0 {
                                    continue;
                                }
                                gb[oi] += gv;
                                for ci in 0..c {
                                    let xbase = (ni * c + ci) * h * wd;
                                    let wbase = (oi * c + ci) * k * k;
                                    for ky in 0..k {
                                        let iy = (oy * stride + ky) as isize - *pad as isize;
                                        if iy < 0 || iy >= h as isize {
                                            continue;
                                        }
                                        for kx in 0..k {
                                            let ix = (ox * stride + kx) as isize - *pad as isize;
                                            if ix < 0 || ix >= wd as isize {
                                                continue;
                                            }
                                            let xi = xbase + iy as usize * wd + ix as usize;
                                            let wi = wbase + ky * k + kx;
                                            gw[wi] += gv * xd[xi];
                                            gx[xi] += gv * wdata[wi];
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
                accumulate(&mut grads[input.0], Tensor::new(x.shape().to_vec(), gx)?);
                accumulate(&mut grads[weight.0], Tensor::new(w.shape().to_vec(), gw)?);
                accumulate(&mut grads[bias.0], Tensor::vector(gb));
            }
            Op::GlobalAvgPool(a) => {
                let av = self.value(*a);
                let hw = av.shape()[2] * av.shape()[3];
                let mut ga = Vec::with_capacity(av.len());
                for &gv in g.data() {
                    ga.extend(std::iter::repeat(gv / hw as f64).take(hw));
                }
                accumulate(&mut grads[a.0], Tensor::new(av.shape().to_vec(), ga)?);
            }
            Op::SoftmaxXent { logits, labels, probs } => {
                let n = labels.len() as f64;
                let scale = g.item() / n;
                let classes = probs.cols();
                let mut gl = probs.clone();
                for (i, &l) in labels.iter().enumerate() {
                    gl.data_mut()[i * classes + l] -= 1.0;
                }
                gl.data_mut().iter_mut().for_each(|v| *v *= scale);
                accumulate(&mut grads[logits.0], gl);
            }
        }
        Ok(())
    }
}
