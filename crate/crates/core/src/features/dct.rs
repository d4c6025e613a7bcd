//! Orthonormal DCT-II.

/// `n × n` orthonormal DCT-II matrix, row `k` holding basis function `k`.
pub fn dct_matrix(n: usize) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    let s0 = (1.0 / n as f64).sqrt();
    let sk = (2.0 / n as f64).sqrt();
    for k in 0..n {
        let scale = if k == 0 { s0 } else { sk };
        for i in 0..n {
            m[k * n + i] = scale
                * (std::f64::consts::PI * (i as f64 + 0.5) * k as f64 / n as f64).cos();
        }
    }
    m
}

/// Precomputed transform for a fixed input length.
#[derive(Debug, Clone)]
pub struct Dct {
    n: usize,
    matrix: Vec<f64>,
}

impl Dct {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            matrix: dct_matrix(n),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// First `n_out` coefficients of the DCT-II of `x`.
    pub fn forward(&self, x: &[f64], n_out: usize) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        (0..n_out.min(self.n))
            .map(|k| {
                self.matrix[k * self.n..(k + 1) * self.n]
                    .iter()
                    .zip(x)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    /// Inverse (DCT-III) of a full coefficient vector.
    pub fn inverse(&self, c: &[f64]) -> Vec<f64> {
        assert_eq!(c.len(), self.n);
        (0..self.n)
            .map(|i| (0..self.n).map(|k| self.matrix[k * self.n + i] * c[k]).sum())
            .collect()
    }
}
