//! Triangular filterbanks over FFT power bins.

/// Dense `n_filters × n_bins` filter weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Filterbank {
    pub n_filters: usize,
    pub n_bins: usize,
    pub weights: Vec<f64>,
    /// Center frequency of each filter in Hz.
    pub centers_hz: Vec<f64>,
}

impl Filterbank {
    pub fn filter(&self, k: usize) -> &[f64] {
        &self.weights[k * self.n_bins..(k + 1) * self.n_bins]
    }

    /// Filter energies for one power-spectrum frame.
    pub fn apply(&self, power: &[f64]) -> Vec<f64> {
        assert_eq!(power.len(), self.n_bins, "power frame has wrong bin count");
        (0..self.n_filters)
            .map(|k| {
                self.filter(k)
                    .iter()
                    .zip(power)
                    .map(|(w, p)| w * p)
                    .sum()
            })
            .collect()
    }

    /// Slaney-style mel filterbank with area normalization, as used by
    /// librosa's default `mel()` and therefore by the Whisper front end.
    pub fn mel(sample_rate: u32, fft_size: usize, n_mels: usize, fmin: f64, fmax: f64) -> Self {
        let mel_lo = hz_to_mel(fmin);
        let mel_hi = hz_to_mel(fmax);
        let edges: Vec<f64> = linspace(mel_lo, mel_hi, n_mels + 2)
            .into_iter()
            .map(mel_to_hz)
            .collect();
        let mut fb = triangular(sample_rate, fft_size, &edges);
        for k in 0..n_mels {
            let enorm = 2.0 / (edges[k + 2] - edges[k]);
            for w in &mut fb.weights[k * fb.n_bins..(k + 1) * fb.n_bins] {
                *w *= enorm;
            }
        }
        fb
    }

    /// Unit-peak triangles with edges at `linspace(0, nyquist, n + 2)`.
    pub fn linear(sample_rate: u32, fft_size: usize, n_filters: usize) -> Self {
        let edges = linspace(0.0, sample_rate as f64 / 2.0, n_filters + 2);
        triangular(sample_rate, fft_size, &edges)
    }
}

fn triangular(sample_rate: u32, fft_size: usize, edges: &[f64]) -> Filterbank {
    let n_bins = fft_size / 2 + 1;
    let n_filters = edges.len() - 2;
    let bin_hz: Vec<f64> = linspace(0.0, sample_rate as f64 / 2.0, n_bins);
    let mut weights = vec![0.0; n_filters * n_bins];
    for k in 0..n_filters {
        let (lo, mid, hi) = (edges[k], edges[k + 1], edges[k + 2]);
        for (b, &f) in bin_hz.iter().enumerate() {
            let rising = (f - lo) / (mid - lo);
            let falling = (hi - f) / (hi - mid);
            weights[k * n_bins + b] = rising.min(falling).max(0.0);
        }
    }
    Filterbank {
        n_filters,
        n_bins,
        weights,
        centers_hz: edges[1..=n_filters].to_vec(),
    }
}

pub(crate) fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    let step = (b - a) / (n - 1) as f64;
    (0..n).map(|i| a + step * i as f64).collect()
}

const F_SP: f64 = 200.0 / 3.0;
const MIN_LOG_HZ: f64 = 1000.0;
const MIN_LOG_MEL: f64 = MIN_LOG_HZ / F_SP;

fn log_step() -> f64 {
    6.4f64.ln() / 27.0
}

/// Slaney mel scale: linear below 1 kHz, logarithmic above.
pub fn hz_to_mel(hz: f64) -> f64 {
    if hz < MIN_LOG_HZ {
        hz / F_SP
    } else {
        MIN_LOG_MEL + (hz / MIN_LOG_HZ).ln() / log_step()
    }
}

pub fn mel_to_hz(mel: f64) -> f64 {
    if mel < MIN_LOG_MEL {
        mel * F_SP
    } else {
        MIN_LOG_HZ * (log_step() * (mel - MIN_LOG_MEL)).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mel_scale_round_trip() {
        for hz in [0.0, 250.0, 999.0, 1000.0, 4000.0, 8000.0] {
            assert!((mel_to_hz(hz_to_mel(hz)) - hz).abs() < 1e-9);
        }
        assert!((hz_to_mel(1000.0) - 15.0).abs() < 1e-12);
    }

    #[test]
    fn whisper_mel_bank_shape_and_support() {
        let fb = Filterbank::mel(16000, 400, 80, 0.0, 8000.0);
        assert_eq!((fb.n_filters, fb.n_bins), (80, 201));
        for k in 0..80 {
            assert!(fb.filter(k).iter().any(|&w| w > 0.0), "filter {k} is empty");
            assert!(fb.filter(k).iter().all(|&w| w >= 0.0));
        }
        // First filter peaks at 25 Hz (mel spacing of 1/81 of 8 kHz in mel).
        assert!(fb.centers_hz[0] > 0.0 && fb.centers_hz[0] < 60.0);
    }

    #[test]
    fn linear_centers_are_evenly_spaced() {
        let fb = Filterbank::linear(16000, 400, 40);
        let want = linspace(0.0, 8000.0, 42);
        assert_eq!(fb.centers_hz, want[1..41].to_vec());
    }

    #[test]
    fn linear_filters_have_unit_peak_at_bin_centers() {
        // 39 interior edges land exactly on FFT bins when spacing is a bin multiple.
        let fb = Filterbank::linear(16000, 512, 15);
        for k in 0..15 {
            let peak = fb.filter(k).iter().cloned().fold(0.0, f64::max);
            assert!((peak - 1.0).abs() < 1e-12);
        }
    }
}
