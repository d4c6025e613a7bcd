//! Minimal f64 layer library with explicit backward passes.
//!
//! Activations are `N × C × H × W` tensors. Every layer's forward returns a
//! cache holding what its backward pass needs; gradients accumulate into the
//! [`ParamStore`].

use std::hash::{Hash, Hasher};

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4 {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<f64>,
}

impl Tensor4 {
    pub fn zeros(n: usize, c: usize, h: usize, w: usize) -> Self {
        Self {
            n,
            c,
            h,
            w,
            data: vec![0.0; n * c * h * w],
        }
    }

    pub fn new(n: usize, c: usize, h: usize, w: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * c * h * w {
            return Err(Error::Shape(format!(
                "{} values for a {n}x{c}x{h}x{w} tensor",
                data.len()
            )));
        }
        Ok(Self { n, c, h, w, data })
    }

    pub fn sample_len(&self) -> usize {
        self.c * self.h * self.w
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        let s = self.sample_len();
        &self.data[i * s..(i + 1) * s]
    }

    pub fn sample_mut(&mut self, i: usize) -> &mut [f64] {
        let s = self.sample_len();
        &mut self.data[i * s..(i + 1) * s]
    }

    fn same_shape(&self) -> Self {
        Self::zeros(self.n, self.c, self.h, self.w)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub shape: Vec<usize>,
    pub value: Vec<f64>,
    pub grad: Vec<f64>,
    /// Buffers (running statistics, input normalization) are not trained.
    pub trainable: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    pub params: Vec<Param>,
}

impl ParamStore {
    pub fn add(&mut self, name: impl Into<String>, shape: Vec<usize>, value: Vec<f64>, trainable: bool) -> usize {
        let n = value.len();
        debug_assert_eq!(n, shape.iter().product::<usize>());
        self.params.push(Param {
            name: name.into(),
            shape,
            value,
            grad: vec![0.0; n],
            trainable,
        });
        self.params.len() - 1
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad.iter_mut().for_each(|g| *g = 0.0);
        }
    }

    pub fn trainable_count(&self) -> usize {
        self.params.iter().filter(|p| p.trainable).map(|p| p.value.len()).sum()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }
}

pub(crate) fn he_normal(rng: &mut impl Rng, n: usize, fan_in: usize) -> Vec<f64> {
    let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).unwrap();
    (0..n).map(|_| normal.sample(rng)).collect()
}

/// `C = A·B (+ C if accumulate)` on row-major slices, with optional
/// transposition of either operand.
#[allow(clippy::too_many_arguments)]
fn gemm(m: usize, k: usize, n: usize, a: &[f64], a_t: bool, b: &[f64], b_t: bool, c: &mut [f64], accumulate: bool) {
    if m == 0 || n == 0 {
        return;
    }
    // A is m×k (stored k×m when transposed); B is k×n (stored n×k when transposed).
    let (rsa, csa) = if a_t { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_t { (1, k as isize) } else { (n as isize, 1) };
    let beta = if accumulate { 1.0 } else { 0.0 };
    // SAFETY: slice lengths match the strided shapes above.
    unsafe {
        matrixmultiply::dgemm(m, k, n, 1.0, a.as_ptr(), rsa, csa, b.as_ptr(), rsb, csb, beta, c.as_mut_ptr(), n as isize, 1);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d {
    pub weight: usize,
    pub bias: Option<usize>,
    pub c_in: usize,
    pub c_out: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
}

impl Conv2d {
    pub fn out_dims(&self, h: usize, w: usize) -> (usize, usize) {
        (
            (h + 2 * self.pad - self.kernel) / self.stride + 1,
            (w + 2 * self.pad - self.kernel) / self.stride + 1,
        )
    }

    fn im2col(&self, x: &[f64], h: usize, w: usize, ho: usize, wo: usize) -> Vec<f64> {
        let k = self.kernel;
        let mut cols = vec![0.0; self.c_in * k * k * ho * wo];
        for ci in 0..self.c_in {
            for ky in 0..k {
                for kx in 0..k {
                    let row = (ci * k + ky) * k + kx;
                    let dst = &mut cols[row * ho * wo..(row + 1) * ho * wo];
                    for oy in 0..ho {
                        let iy = (oy * self.stride + ky) as isize - self.pad as isize;
                        if iy < 0 || iy as usize >= h {
                            continue;
                        }
                        let src = &x[(ci * h + iy as usize) * w..(ci * h + iy as usize + 1) * w];
                        for ox in 0..wo {
                            let ix = (ox * self.stride + kx) as isize - self.pad as isize;
                            if ix >= 0 && (ix as usize) < w {
                                dst[oy * wo + ox] = src[ix as usize];
                            }
                        }
                    }
                }
            }
        }
        cols
    }

    fn col2im(&self, cols: &[f64], dx: &mut [f64], h: usize, w: usize, ho: usize, wo: usize) {
        let k = self.kernel;
        for ci in 0..self.c_in {
            for ky in 0..k {
                for kx in 0..k {
                    let row = (ci * k + ky) * k + kx;
                    let src = &cols[row * ho * wo..(row + 1) * ho * wo];
                    for oy in 0..ho {
                        let iy = (oy * self.stride + ky) as isize - self.pad as isize;
                        if iy < 0 || iy as usize >= h {
                            continue;
                        }
                        for ox in 0..wo {
                            let ix = (ox * self.stride + kx) as isize - self.pad as isize;
                            if ix >= 0 && (ix as usize) < w {
                                dx[(ci * h + iy as usize) * w + ix as usize] += src[oy * wo + ox];
                            }
                        }
                    }
                }
            }
        }
    }

    fn forward(&self, store: &ParamStore, x: &Tensor4) -> Result<Tensor4> {
        if x.c != self.c_in {
            return Err(Error::Shape(format!("conv expects {} channels, got {}", self.c_in, x.c)));
        }
        if x.h + 2 * self.pad < self.kernel || x.w + 2 * self.pad < self.kernel {
            return Err(Error::Shape(format!("{}x{} map is smaller than a {} kernel", x.h, x.w, self.kernel)));
        }
        let (ho, wo) = self.out_dims(x.h, x.w);
        let mut y = Tensor4::zeros(x.n, self.c_out, ho, wo);
        let wt = &store.params[self.weight].value;
        let ckk = self.c_in * self.kernel * self.kernel;
        for i in 0..x.n {
            let cols = self.im2col(x.sample(i), x.h, x.w, ho, wo);
            let out = y.sample_mut(i);
            gemm(self.c_out, ckk, ho * wo, wt, false, &cols, false, out, false);
            if let Some(b) = self.bias {
                let bias = &store.params[b].value;
                for (co, chunk) in out.chunks_mut(ho * wo).enumerate() {
                    chunk.iter_mut().for_each(|v| *v += bias[co]);
                }
            }
        }
        Ok(y)
    }

    fn backward(&self, store: &mut ParamStore, x: &Tensor4, dy: &Tensor4) -> Tensor4 {
        let (ho, wo) = (dy.h, dy.w);
        let ckk = self.c_in * self.kernel * self.kernel;
        let mut dx = x.same_shape();
        let mut dw = vec![0.0; self.c_out * ckk];
        let mut dcols = vec![0.0; ckk * ho * wo];
        for i in 0..x.n {
            let cols = self.im2col(x.sample(i), x.h, x.w, ho, wo);
            let g = dy.sample(i);
            gemm(self.c_out, ho * wo, ckk, g, false, &cols, true, &mut dw, true);
            gemm(ckk, self.c_out, ho * wo, &store.params[self.weight].value, true, g, false, &mut dcols, false);
            self.col2im(&dcols, dx.sample_mut(i), x.h, x.w, ho, wo);
            if let Some(b) = self.bias {
                let db = &mut store.params[b].grad;
                for (co, chunk) in g.chunks(ho * wo).enumerate() {
                    db[co] += chunk.iter().sum::<f64>();
                }
            }
        }
        for (acc, d) in store.params[self.weight].grad.iter_mut().zip(dw) {
            *acc += d;
        }
        dx
    }
}

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub gamma: usize,
    pub beta: usize,
    pub running_mean: usize,
    pub running_var: usize,
}

#[derive(Debug, Clone)]
pub struct BnCache {
    x_hat: Vec<f64>,
    inv_std: Vec<f64>,
    batch_mean: Vec<f64>,
    batch_var: Vec<f64>,
    count: usize,
}

impl BatchNorm {
    fn forward(&self, store: &ParamStore, x: &Tensor4, train: bool) -> (Tensor4, Option<BnCache>) {
        let (c, hw) = (x.c, x.h * x.w);
        let count = x.n * hw;
        let (mean, var) = if train {
            let mut mean = vec![0.0; c];
            let mut var = vec![0.0; c];
            for i in 0..x.n {
                for (ch, chunk) in x.sample(i).chunks(hw).enumerate() {
                    mean[ch] += chunk.iter().sum::<f64>();
                }
            }
            mean.iter_mut().for_each(|m| *m /= count as f64);
            for i in 0..x.n {
                for (ch, chunk) in x.sample(i).chunks(hw).enumerate() {
                    var[ch] += chunk.iter().map(|v| (v - mean[ch]).powi(2)).sum::<f64>();
                }
            }
            var.iter_mut().for_each(|v| *v /= count as f64);
            (mean, var)
        } else {
            (
                store.params[self.running_mean].value.clone(),
                store.params[self.running_var].value.clone(),
            )
        };
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + BN_EPS).sqrt()).collect();
        let gamma = &store.params[self.gamma].value;
        let beta = &store.params[self.beta].value;
        let mut y = x.same_shape();
        let mut x_hat = if train { vec![0.0; x.data.len()] } else { Vec::new() };
        for i in 0..x.n {
            let base = i * c * hw;
            for ch in 0..c {
                for j in 0..hw {
                    let idx = base + ch * hw + j;
                    let xh = (x.data[idx] - mean[ch]) * inv_std[ch];
                    if train {
                        x_hat[idx] = xh;
                    }
                    y.data[idx] = gamma[ch] * xh + beta[ch];
                }
            }
        }
        let cache = train.then(|| BnCache {
            x_hat,
            inv_std,
            batch_mean: mean,
            batch_var: var,
            count,
        });
        (y, cache)
    }

    fn backward(&self, store: &mut ParamStore, cache: &BnCache, dy: &Tensor4) -> Tensor4 {
        let (c, hw) = (dy.c, dy.h * dy.w);
        let m = cache.count as f64;
        let mut sum_dy = vec![0.0; c];
        let mut sum_dy_xhat = vec![0.0; c];
        for i in 0..dy.n {
            for ch in 0..c {
                for j in 0..hw {
                    let idx = (i * c + ch) * hw + j;
                    sum_dy[ch] += dy.data[idx];
                    sum_dy_xhat[ch] += dy.data[idx] * cache.x_hat[idx];
                }
            }
        }
        for ch in 0..c {
            store.params[self.gamma].grad[ch] += sum_dy_xhat[ch];
            store.params[self.beta].grad[ch] += sum_dy[ch];
        }
        let gamma = &store.params[self.gamma].value;
        let mut dx = dy.same_shape();
        for i in 0..dy.n {
            for ch in 0..c {
                let k = gamma[ch] * cache.inv_std[ch] / m;
                for j in 0..hw {
                    let idx = (i * c + ch) * hw + j;
                    dx.data[idx] = k * (m * dy.data[idx] - sum_dy[ch] - cache.x_hat[idx] * sum_dy_xhat[ch]);
                }
            }
        }
        dx
    }

    fn update_running(&self, store: &mut ParamStore, cache: &BnCache) {
        let unbias = if cache.count > 1 {
            cache.count as f64 / (cache.count - 1) as f64
        } else {
            1.0
        };
        for ch in 0..cache.batch_mean.len() {
            let rm = &mut store.params[self.running_mean].value[ch];
            *rm = (1.0 - BN_MOMENTUM) * *rm + BN_MOMENTUM * cache.batch_mean[ch];
            let rv = &mut store.params[self.running_var].value[ch];
            *rv = (1.0 - BN_MOMENTUM) * *rv + BN_MOMENTUM * cache.batch_var[ch] * unbias;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaxPool {
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
}

impl MaxPool {
    pub fn out_dims(&self, h: usize, w: usize) -> (usize, usize) {
        (
            (h + 2 * self.pad - self.kernel) / self.stride + 1,
            (w + 2 * self.pad - self.kernel) / self.stride + 1,
        )
    }

    fn forward(&self, x: &Tensor4) -> Result<(Tensor4, Vec<usize>)> {
        if x.h + 2 * self.pad < self.kernel || x.w + 2 * self.pad < self.kernel {
            return Err(Error::Shape(format!("{}x{} map is too small to pool", x.h, x.w)));
        }
        let (ho, wo) = self.out_dims(x.h, x.w);
        let mut y = Tensor4::zeros(x.n, x.c, ho, wo);
        let mut arg = vec![0usize; y.data.len()];
        for plane in 0..x.n * x.c {
            let src = &x.data[plane * x.h * x.w..(plane + 1) * x.h * x.w];
            for oy in 0..ho {
                for ox in 0..wo {
                    let mut best = f64::NEG_INFINITY;
                    let mut best_i = 0;
                    for ky in 0..self.kernel {
                        let iy = (oy * self.stride + ky) as isize - self.pad as isize;
                        if iy < 0 || iy as usize >= x.h {
                            continue;
                        }
                        for kx in 0..self.kernel {
                            let ix = (ox * self.stride + kx) as isize - self.pad as isize;
                            if ix < 0 || ix as usize >= x.w {
                                continue;
                            }
                            let i = iy as usize * x.w + ix as usize;
                            if src[i] > best {
                                best = src[i];
                                best_i = i;
                            }
                        }
                    }
                    let o = plane * ho * wo + oy * wo + ox;
                    y.data[o] = best;
                    arg[o] = plane * x.h * x.w + best_i;
                }
            }
        }
        Ok((y, arg))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub weight: usize,
    pub bias: usize,
    pub d_in: usize,
    pub d_out: usize,
}

impl Linear {
    fn forward(&self, store: &ParamStore, x: &Tensor4) -> Result<Tensor4> {
        if x.sample_len() != self.d_in {
            return Err(Error::Shape(format!(
                "linear layer expects {} inputs, got {}",
                self.d_in,
                x.sample_len()
            )));
        }
        let mut y = Tensor4::zeros(x.n, self.d_out, 1, 1);
        gemm(x.n, self.d_in, self.d_out, &x.data, false, &store.params[self.weight].value, true, &mut y.data, false);
        let b = &store.params[self.bias].value;
        for row in y.data.chunks_mut(self.d_out) {
            row.iter_mut().zip(b).for_each(|(v, bb)| *v += bb);
        }
        Ok(y)
    }

    fn backward(&self, store: &mut ParamStore, x: &Tensor4, dy: &Tensor4) -> Tensor4 {
        let mut dx = x.same_shape();
        gemm(x.n, self.d_out, self.d_in, &dy.data, false, &store.params[self.weight].value, false, &mut dx.data, false);
        gemm(self.d_out, x.n, self.d_in, &dy.data, true, &x.data, false, &mut store.params[self.weight].grad, true);
        let db = &mut store.params[self.bias].grad;
        for row in dy.data.chunks(self.d_out) {
            db.iter_mut().zip(row).for_each(|(g, d)| *g += d);
        }
        dx
    }
}

/// Basic residual block: `relu(bn(conv(relu(bn(conv(x))))) + shortcut(x))`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualBlock {
    pub main: Vec<Layer>,
    /// `None` for an identity shortcut, otherwise 1×1 conv + BN.
    pub shortcut: Option<Vec<Layer>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Conv(Conv2d),
    BatchNorm(BatchNorm),
    Relu,
    MaxPool(MaxPool),
    GlobalAvgPool,
    Linear(Linear),
    Residual(Box<ResidualBlock>),
}

#[derive(Debug, Clone)]
pub enum Cache {
    Input(Tensor4),
    BatchNorm(Option<BnCache>),
    Relu(Vec<bool>),
    MaxPool { arg: Vec<usize>, input_shape: (usize, usize, usize, usize) },
    GlobalAvgPool { h: usize, w: usize },
    Residual {
        main: Vec<Cache>,
        shortcut: Option<Vec<Cache>>,
        mask: Vec<bool>,
    },
}

fn relu(x: Tensor4) -> (Tensor4, Vec<bool>) {
    let mut y = x;
    let mask: Vec<bool> = y.data.iter().map(|&v| v > 0.0).collect();
    y.data.iter_mut().for_each(|v| *v = v.max(0.0));
    (y, mask)
}

fn relu_backward(mut dy: Tensor4, mask: &[bool]) -> Tensor4 {
    dy.data.iter_mut().zip(mask).for_each(|(g, &m)| {
        if !m {
            *g = 0.0
        }
    });
    dy
}

impl Layer {
    pub fn forward(&self, store: &ParamStore, x: Tensor4, train: bool) -> Result<(Tensor4, Cache)> {
        Ok(match self {
            Layer::Conv(c) => (c.forward(store, &x)?, Cache::Input(x)),
            Layer::BatchNorm(bn) => {
                let (y, cache) = bn.forward(store, &x, train);
                (y, Cache::BatchNorm(cache))
            }
            Layer::Relu => {
                let (y, mask) = relu(x);
                (y, Cache::Relu(mask))
            }
            Layer::MaxPool(p) => {
                let (y, arg) = p.forward(&x)?;
                (y, Cache::MaxPool { arg, input_shape: (x.n, x.c, x.h, x.w) })
            }
            Layer::GlobalAvgPool => {
                let hw = x.h * x.w;
                let mut y = Tensor4::zeros(x.n, x.c, 1, 1);
                for (o, plane) in y.data.iter_mut().zip(x.data.chunks(hw)) {
                    *o = plane.iter().sum::<f64>() / hw as f64;
                }
                (y, Cache::GlobalAvgPool { h: x.h, w: x.w })
            }
            Layer::Linear(l) => (l.forward(store, &x)?, Cache::Input(x)),
            Layer::Residual(block) => {
                let (m, main) = forward_all(&block.main, store, x.clone(), train)?;
                let (s, shortcut) = match &block.shortcut {
                    Some(layers) => {
                        let (s, c) = forward_all(layers, store, x, train)?;
                        (s, Some(c))
                    }
                    None => (x, None),
                };
                if (m.c, m.h, m.w) != (s.c, s.h, s.w) {
                    return Err(Error::Shape("residual branches disagree in shape".into()));
                }
                let mut sum = m;
                sum.data.iter_mut().zip(&s.data).for_each(|(a, b)| *a += b);
                let (y, mask) = relu(sum);
                (y, Cache::Residual { main, shortcut, mask })
            }
        })
    }

    pub fn backward(&self, store: &mut ParamStore, cache: &Cache, dy: Tensor4) -> Tensor4 {
        match (self, cache) {
            (Layer::Conv(c), Cache::Input(x)) => c.backward(store, x, &dy),
            (Layer::BatchNorm(bn), Cache::BatchNorm(Some(c))) => bn.backward(store, c, &dy),
            (Layer::Relu, Cache::Relu(mask)) => relu_backward(dy, mask),
            (Layer::MaxPool(_), Cache::MaxPool { arg, input_shape: (n, c, h, w) }) => {
                let mut dx = Tensor4::zeros(*n, *c, *h, *w);
                for (g, &i) in dy.data.iter().zip(arg) {
                    dx.data[i] += g;
                }
                dx
            }
            (Layer::GlobalAvgPool, Cache::GlobalAvgPool { h, w }) => {
                let hw = h * w;
                let mut dx = Tensor4::zeros(dy.n, dy.c, *h, *w);
                for (plane, &g) in dx.data.chunks_mut(hw).zip(&dy.data) {
                    plane.iter_mut().for_each(|v| *v = g / hw as f64);
                }
                dx
            }
            (Layer::Linear(l), Cache::Input(x)) => l.backward(store, x, &dy),
            (Layer::Residual(block), Cache::Residual { main, shortcut, mask }) => {
                let dsum = relu_backward(dy, mask);
                let mut dx = backward_all(&block.main, store, main, dsum.clone());
                let ds = match (&block.shortcut, shortcut) {
                    (Some(layers), Some(c)) => backward_all(layers, store, c, dsum),
                    _ => dsum,
                };
                dx.data.iter_mut().zip(&ds.data).for_each(|(a, b)| *a += b);
                dx
            }
            _ => panic!("backward called with a cache from a different layer or from inference mode"),
        }
    }

    /// Folds batch statistics from a training forward into running buffers.
    pub fn update_running_stats(&self, store: &mut ParamStore, cache: &Cache) {
        match (self, cache) {
            (Layer::BatchNorm(bn), Cache::BatchNorm(Some(c))) => bn.update_running(store, c),
            (Layer::Residual(block), Cache::Residual { main, shortcut, .. }) => {
                for (l, c) in block.main.iter().zip(main) {
                    l.update_running_stats(store, c);
                }
                if let (Some(layers), Some(cs)) = (&block.shortcut, shortcut) {
                    for (l, c) in layers.iter().zip(cs) {
                        l.update_running_stats(store, c);
                    }
                }
            }
            _ => {}
        }
    }
}

pub fn forward_all(layers: &[Layer], store: &ParamStore, x: Tensor4, train: bool) -> Result<(Tensor4, Vec<Cache>)> {
    let mut caches = Vec::with_capacity(layers.len());
    let mut h = x;
    for layer in layers {
        let (y, c) = layer.forward(store, h, train)?;
        caches.push(c);
        h = y;
    }
    Ok((h, caches))
}

pub fn backward_all(layers: &[Layer], store: &mut ParamStore, caches: &[Cache], dy: Tensor4) -> Tensor4 {
    let mut g = dy;
    for (layer, cache) in layers.iter().zip(caches).rev() {
        g = layer.backward(store, cache, g);
    }
    g
}

/// Hash of every ReLU on/off decision and max-pool winner in a forward
/// pass. Two passes with equal signatures lie in the same linear region.
pub fn activation_signature(caches: &[Cache]) -> u64 {
    fn walk(caches: &[Cache], h: &mut std::collections::hash_map::DefaultHasher) {
        for c in caches {
            match c {
                Cache::Relu(mask) => mask.hash(h),
                Cache::MaxPool { arg, .. } => arg.hash(h),
                Cache::Residual { main, shortcut, mask } => {
                    walk(main, h);
                    if let Some(s) = shortcut {
                        walk(s, h);
                    }
                    mask.hash(h);
                }
                _ => {}
            }
        }
    }
    let mut h = std::collections::hash_map::DefaultHasher::new();
    walk(caches, &mut h);
    h.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store_with(values: &[(&str, Vec<usize>, Vec<f64>)]) -> ParamStore {
        let mut s = ParamStore::default();
        for (n, shape, v) in values {
            s.add(*n, shape.clone(), v.clone(), true);
        }
        s
    }

    #[test]
    fn conv_matches_hand_computation() {
        // 1 channel 3x3 input, 2x2 kernel of ones, no padding.
        let store = store_with(&[("w", vec![1, 1, 2, 2], vec![1.0; 4]), ("b", vec![1], vec![0.5])]);
        let conv = Conv2d { weight: 0, bias: Some(1), c_in: 1, c_out: 1, kernel: 2, stride: 1, pad: 0 };
        let x = Tensor4::new(1, 1, 3, 3, (1..=9).map(|v| v as f64).collect()).unwrap();
        let y = conv.forward(&store, &x).unwrap();
        assert_eq!(y.data, vec![12.5, 16.5, 24.5, 28.5]);
    }

    #[test]
    fn maxpool_routes_gradient_to_winner() {
        let p = MaxPool { kernel: 2, stride: 2, pad: 0 };
        let x = Tensor4::new(1, 1, 2, 2, vec![0.1, 0.9, 0.3, 0.2]).unwrap();
        let layer = Layer::MaxPool(p);
        let mut store = ParamStore::default();
        let (y, cache) = layer.forward(&store, x, true).unwrap();
        assert_eq!(y.data, vec![0.9]);
        let dx = layer.backward(&mut store, &cache, Tensor4::new(1, 1, 1, 1, vec![2.0]).unwrap());
        assert_eq!(dx.data, vec![0.0, 2.0, 0.0, 0.0]);
    }

    #[test]
    fn batchnorm_normalizes_in_training() {
        let mut store = ParamStore::default();
        let bn = BatchNorm {
            gamma: store.add("g", vec![1], vec![1.0], true),
            beta: store.add("b", vec![1], vec![0.0], true),
            running_mean: store.add("rm", vec![1], vec![0.0], false),
            running_var: store.add("rv", vec![1], vec![1.0], false),
        };
        let x = Tensor4::new(2, 1, 1, 2, vec![1.0, 2.0, 3.0, 6.0]).unwrap();
        let (y, cache) = bn.forward(&store, &x, true);
        let mean: f64 = y.data.iter().sum::<f64>() / 4.0;
        let var: f64 = y.data.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 4.0;
        assert!(mean.abs() < 1e-12 && (var - 1.0).abs() < 1e-4);
        bn.update_running(&mut store, &cache.unwrap());
        assert!((store.params[2].value[0] - 0.3).abs() < 1e-12);
    }
}
