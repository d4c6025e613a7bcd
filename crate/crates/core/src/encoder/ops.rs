//! Dense f32 kernels for encoder inference.

use crate::error::{Error, Result};

/// Row-major f32 matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f32>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn at(&self, r: usize, c: usize) -> f32 {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f32] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f32] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Columns `[start, start + width)` as a new matrix.
    pub fn columns(&self, start: usize, width: usize) -> Matrix {
        let mut data = Vec::with_capacity(self.rows * width);
        for r in 0..self.rows {
            data.extend_from_slice(&self.row(r)[start..start + width]);
        }
        Matrix {
            rows: self.rows,
            cols: width,
            data,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `self · other`.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::Shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        gemm(self, false, other, &mut out);
        Ok(out)
    }

    /// `self · otherᵀ`.
    pub fn matmul_t(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.cols {
            return Err(Error::Shape(format!(
                "cannot multiply {}x{} by ({}x{})ᵀ",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.rows);
        gemm(self, true, other, &mut out);
        Ok(out)
    }

    pub fn add_assign(&mut self, other: &Matrix) -> Result<()> {
        if (self.rows, self.cols) != (other.rows, other.cols) {
            return Err(Error::Shape(format!(
                "cannot add {}x{} to {}x{}",
                other.rows, other.cols, self.rows, self.cols
            )));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn add_row_vector(&mut self, bias: &[f32]) {
        debug_assert_eq!(bias.len(), self.cols);
        for r in 0..self.rows {
            for (v, b) in self.row_mut(r).iter_mut().zip(bias) {
                *v += b;
            }
        }
    }
}

fn gemm(a: &Matrix, b_transposed: bool, b: &Matrix, out: &mut Matrix) {
    let (m, k) = (a.rows, a.cols);
    let n = out.cols;
    if m == 0 || n == 0 {
        return;
    }
    let (rsb, csb) = if b_transposed {
        (1isize, b.cols as isize)
    } else {
        (b.cols as isize, 1isize)
    };
    // SAFETY: strides describe in-bounds row-major layouts of the given shapes.
    unsafe {
        matrixmultiply::sgemm(
            m,
            k,
            n,
            1.0,
            a.data.as_ptr(),
            k as isize,
            1,
            b.data.as_ptr(),
            rsb,
            csb,
            0.0,
            out.data.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Fully connected layer with `[out, in]` weights: `x · Wᵀ + b`.
pub fn linear(x: &Matrix, weight: &Matrix, bias: Option<&[f32]>) -> Result<Matrix> {
    let mut y = x.matmul_t(weight)?;
    if let Some(b) = bias {
        y.add_row_vector(b);
    }
    Ok(y)
}

pub const LAYER_NORM_EPS: f32 = 1e-5;

/// Per-row normalization to zero mean and unit variance, then `gain`/`bias`.
pub fn layer_norm(x: &Matrix, gain: &[f32], bias: &[f32]) -> Matrix {
    let d = x.cols;
    let mut out = x.clone();
    for r in 0..x.rows {
        let row = out.row_mut(r);
        let mean = row.iter().map(|&v| v as f64).sum::<f64>() / d as f64;
        let var = row.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / d as f64;
        let inv = 1.0 / (var + LAYER_NORM_EPS as f64).sqrt();
        for (j, v) in row.iter_mut().enumerate() {
            *v = ((*v as f64 - mean) * inv) as f32 * gain[j] + bias[j];
        }
    }
    out
}

/// Exact GELU, `x · Φ(x)`.
pub fn gelu(x: f32) -> f32 {
    0.5 * x * (1.0 + libm::erff(x / std::f32::consts::SQRT_2))
}

pub fn gelu_inplace(m: &mut Matrix) {
    for v in &mut m.data {
        *v = gelu(*v);
    }
}

/// Inputs to a single attention head.
#[derive(Debug, Clone)]
pub struct AttentionParams {
    pub q: Matrix,
    pub k: Matrix,
    pub v: Matrix,
}

impl AttentionParams {
    pub fn new(q: Matrix, k: Matrix, v: Matrix) -> Result<Self> {
        if q.cols != k.cols || k.rows != v.rows || q.rows == 0 || k.rows == 0 {
            return Err(Error::Shape(format!(
                "attention shapes Q {}x{}, K {}x{}, V {}x{}",
                q.rows, q.cols, k.rows, k.cols, v.rows, v.cols
            )));
        }
        Ok(Self { q, k, v })
    }

    pub fn d_k(&self) -> usize {
        self.q.cols
    }

    pub fn d_v(&self) -> usize {
        self.v.cols
    }
}

/// Row-softmax of `Q·Kᵀ / √d_k`.
pub fn attention_weights(q: &Matrix, k: &Matrix) -> Result<Matrix> {
    let mut scores = q.matmul_t(k)?;
    let scale = 1.0 / (q.cols as f32).sqrt();
    for r in 0..scores.rows {
        let row = scores.row_mut(r);
        let max = row.iter().fold(f32::NEG_INFINITY, |a, &b| a.max(b * scale));
        let mut sum = 0.0f32;
        for v in row.iter_mut() {
            *v = (*v * scale - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    Ok(scores)
}

/// `softmax(Q·Kᵀ / √d_k) · V`.
pub fn scaled_dot_attention(p: &AttentionParams) -> Result<Matrix> {
    attention_weights(&p.q, &p.k)?.matmul(&p.v)
}

/// 1-D convolution over time. `x` is `T × C_in`, `weight` is
/// `[C_out, C_in, K]` flattened, zero padding `pad` on both ends.
pub fn conv1d(
    x: &Matrix,
    weight: &[f32],
    bias: &[f32],
    c_out: usize,
    kernel: usize,
    stride: usize,
    pad: usize,
) -> Result<Matrix> {
    let c_in = x.cols;
    if weight.len() != c_out * c_in * kernel || bias.len() != c_out {
        return Err(Error::Shape(format!(
            "conv1d weight {} / bias {} for {c_out}x{c_in}x{kernel}",
            weight.len(),
            bias.len()
        )));
    }
    let t_out = (x.rows + 2 * pad - kernel) / stride + 1;
    // im2col: row t holds x[t*stride + kk - pad][ci] at column ci*K + kk.
    let mut cols = Matrix::zeros(t_out, c_in * kernel);
    for t in 0..t_out {
        let dst = cols.row_mut(t);
        for kk in 0..kernel {
            let src = (t * stride + kk) as isize - pad as isize;
            if src < 0 || src as usize >= x.rows {
                continue;
            }
            for (ci, &v) in x.row(src as usize).iter().enumerate() {
                dst[ci * kernel + kk] = v;
            }
        }
    }
    let w = Matrix {
        rows: c_out,
        cols: c_in * kernel,
        data: weight.to_vec(),
    };
    linear(&cols, &w, Some(bias))
}

/// Sinusoidal position table: the first `d/2` columns hold `sin(t·ω_i)`,
/// the last `d/2` hold `cos(t·ω_i)`, with `ω_i = 10000^(-i/(d/2-1))` so that
/// wavelengths run geometrically from 2π to 10000·2π.
pub fn sinusoidal_positions(t: usize, d: usize) -> Result<Matrix> {
    if d == 0 || d % 2 != 0 {
        return Err(Error::Config(format!("position width {d} must be even")));
    }
    let half = d / 2;
    let step = if half > 1 {
        10000f64.ln() / (half - 1) as f64
    } else {
        0.0
    };
    let mut m = Matrix::zeros(t, d);
    for pos in 0..t {
        let row = m.row_mut(pos);
        for i in 0..half {
            let angle = pos as f64 * (-step * i as f64).exp();
            row[i] = angle.sin() as f32;
            row[half + i] = angle.cos() as f32;
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_small() {
        let a = Matrix::new(2, 3, vec![1., 2., 3., 4., 5., 6.]).unwrap();
        let b = Matrix::new(3, 2, vec![7., 8., 9., 10., 11., 12.]).unwrap();
        assert_eq!(a.matmul(&b).unwrap().data, vec![58., 64., 139., 154.]);
        let bt = Matrix::new(2, 3, vec![7., 9., 11., 8., 10., 12.]).unwrap();
        assert_eq!(a.matmul_t(&bt).unwrap().data, vec![58., 64., 139., 154.]);
        assert!(a.matmul(&a).is_err());
    }

    #[test]
    fn gelu_reference_points() {
        assert_eq!(gelu(0.0), 0.0);
        assert!((gelu(1.0) - 0.841_344_7).abs() < 1e-6);
        assert!((gelu(-1.0) + 0.158_655_25).abs() < 1e-6);
    }

    #[test]
    fn positions() {
        let p = sinusoidal_positions(3, 8).unwrap();
        assert!(p.row(0)[..4].iter().all(|&v| v == 0.0));
        assert!(p.row(0)[4..].iter().all(|&v| v == 1.0));
        assert!((p.at(1, 0) - 0.841_470_96).abs() < 1e-6);
        assert!((p.at(1, 4) - 0.540_302_3).abs() < 1e-6);
        // Slowest channel has angular frequency 1/10000.
        assert!((p.at(2, 3) - (2.0e-4f64).sin() as f32).abs() < 1e-9);
        assert!(sinusoidal_positions(2, 3).is_err());
    }

    #[test]
    fn single_query_attention_returns_value_row() {
        let q = Matrix::new(1, 2, vec![0.3, -0.2]).unwrap();
        let k = Matrix::new(1, 2, vec![1.0, 2.0]).unwrap();
        let v = Matrix::new(1, 3, vec![4.0, 5.0, 6.0]).unwrap();
        let out = scaled_dot_attention(&AttentionParams::new(q, k, v).unwrap()).unwrap();
        assert_eq!(out.data, vec![4.0, 5.0, 6.0]);
    }

    #[test]
    fn attention_shape_mismatch() {
        let q = Matrix::zeros(2, 3);
        let k = Matrix::zeros(2, 4);
        let v = Matrix::zeros(2, 4);
        assert!(AttentionParams::new(q, k, v).is_err());
    }

    #[test]
    fn conv_output_length() {
        let x = Matrix::zeros(3000, 2);
        let w = vec![0.0; 4 * 2 * 3];
        let y = conv1d(&x, &w, &[0.0; 4], 4, 3, 2, 1).unwrap();
        assert_eq!((y.rows, y.cols), (1500, 4));
        assert!(y.data.iter().all(|&v| v == 0.0));
    }
}
