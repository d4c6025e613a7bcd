//! Built-in oracle checks run by `svdd selftest`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::Label;
use crate::encoder::{scaled_dot_attention, AttentionParams, Matrix};
use crate::eval::{compute_eer, ScoredTrial};
use crate::features::dct::dct_matrix;
use crate::features::filterbank::Filterbank;
use crate::heads::{grad_check, CnnHeadConfig, Head, HeadArch};

#[derive(Debug, Clone, PartialEq)]
pub struct SelftestRow {
    pub name: &'static str,
    pub measured: f64,
    pub tolerance: f64,
    pub passed: bool,
}

fn row(name: &'static str, measured: f64, tolerance: f64) -> SelftestRow {
    SelftestRow { name, measured, tolerance, passed: measured.is_finite() && measured <= tolerance }
}

fn slaney_mel(hz: f64) -> f64 {
    if hz < 1000.0 {
        3.0 * hz / 200.0
    } else {
        15.0 + 27.0 * (hz / 1000.0).ln() / 6.4f64.ln()
    }
}

fn slaney_hz(mel: f64) -> f64 {
    if mel < 15.0 {
        200.0 * mel / 3.0
    } else {
        1000.0 * (6.4f64.ln() * (mel - 15.0) / 27.0).exp()
    }
}

/// Filter outputs summed bin by bin from closed-form triangle weights.
fn direct_filter_outputs(edges: &[f64], area_norm: bool, sr: f64, n_fft: usize, power: &[f64]) -> Vec<f64> {
    (0..edges.len() - 2)
        .map(|k| {
            let (lo, mid, hi) = (edges[k], edges[k + 1], edges[k + 2]);
            let scale = if area_norm { 2.0 / (hi - lo) } else { 1.0 };
            let mut sum = 0.0;
            for (b, p) in power.iter().enumerate() {
                let f = b as f64 * sr / n_fft as f64;
                let w = if f > lo && f <= mid {
                    (f - lo) / (mid - lo)
                } else if f > mid && f < hi {
                    (hi - f) / (hi - mid)
                } else {
                    0.0
                };
                sum += scale * w * p;
            }
            sum
        })
        .collect()
}

fn max_rel(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / y.abs().max(1e-300))
        .fold(0.0, f64::max)
}

fn filterbank_check() -> (f64, f64) {
    let (sr, n_fft) = (16000.0, 400);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let power: Vec<f64> = (0..n_fft / 2 + 1).map(|_| rng.gen_range(0.0..1.0)).collect();
    let mel_edges: Vec<f64> = (0..82).map(|i| slaney_hz(slaney_mel(8000.0) * i as f64 / 81.0)).collect();
    let mel = max_rel(
        &Filterbank::mel(16000, n_fft, 80, 0.0, 8000.0).apply(&power),
        &direct_filter_outputs(&mel_edges, true, sr, n_fft, &power),
    );
    let lin_edges: Vec<f64> = (0..42).map(|i| 8000.0 * i as f64 / 41.0).collect();
    let lin = max_rel(
        &Filterbank::linear(16000, n_fft, 40).apply(&power),
        &direct_filter_outputs(&lin_edges, false, sr, n_fft, &power),
    );
    (mel, lin)
}

fn dct_check() -> f64 {
    let mut worst: f64 = 0.0;
    for n in [20, 40, 80] {
        let m = dct_matrix(n);
        for i in 0..n {
            for j in 0..n {
                let dot: f64 = (0..n).map(|k| m[k * n + i] * m[k * n + j]).sum();
                worst = worst.max((dot - if i == j { 1.0 } else { 0.0 }).abs());
            }
        }
    }
    worst
}

fn attention_check() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut rand_matrix = |r: usize, c: usize| {
        let data = (0..r * c).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
        Matrix::new(r, c, data).unwrap()
    };
    let (q, k, v) = (rand_matrix(6, 4), rand_matrix(6, 4), rand_matrix(6, 3));
    let out = scaled_dot_attention(&AttentionParams::new(q.clone(), k.clone(), v.clone()).unwrap()).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..6 {
        let logits: Vec<f64> = (0..6)
            .map(|j| (0..4).map(|d| q.at(i, d) as f64 * k.at(j, d) as f64).sum::<f64>() / 2.0)
            .collect();
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        for c in 0..3 {
            let want: f64 = (0..6).map(|j| exps[j] / z * v.at(j, c) as f64).sum();
            worst = worst.max((want - out.at(i, c) as f64).abs());
        }
    }
    worst
}

/// Brute-force interpolated EER: FAR/FRR at every candidate threshold by
/// direct counting, then the sign change of FAR - FRR.
fn brute_force_eer(bona: &[f64], fake: &[f64]) -> f64 {
    let mut thresholds: Vec<f64> = bona.iter().chain(fake).cloned().collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    thresholds.push(f64::INFINITY);
    let rates: Vec<(f64, f64)> = thresholds
        .iter()
        .map(|&t| {
            let far = fake.iter().filter(|&&s| s >= t).count() as f64 / fake.len() as f64;
            let frr = bona.iter().filter(|&&s| s < t).count() as f64 / bona.len() as f64;
            (far, frr)
        })
        .collect();
    for i in 0..rates.len() {
        let (far, frr) = rates[i];
        if far <= frr {
            if i == 0 || far == frr {
                return far;
            }
            let (pa, pr) = rates[i - 1];
            let alpha = (pa - pr) / ((pa - pr) - (far - frr));
            return pa + alpha * (far - pa);
        }
    }
    unreachable!("the last threshold rejects everything")
}

fn eer_check() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let nb = rng.gen_range(1..60);
        let nf = rng.gen_range(1..60);
        // Coarse grid so ties occur.
        let bona: Vec<f64> = (0..nb).map(|_| (rng.gen_range(0..40) as f64 + 10.0) / 60.0).collect();
        let fake: Vec<f64> = (0..nf).map(|_| rng.gen_range(0..40) as f64 / 60.0).collect();
        let trials: Vec<ScoredTrial> = bona
            .iter()
            .map(|&s| ScoredTrial::new("b", Label::Bonafide, s).unwrap())
            .chain(fake.iter().map(|&s| ScoredTrial::new("d", Label::Deepfake, s).unwrap()))
            .collect();
        worst = worst.max((compute_eer(&trials).unwrap().eer - brute_force_eer(&bona, &fake)).abs());
    }
    worst
}

fn grad_check_cnn() -> f64 {
    let arch = HeadArch::Cnn(CnnHeadConfig { channels: [2, 2], kernel_size: 5, input_rows: 8 });
    let head = Head::new(arch, 8, 4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let inputs: Vec<Vec<f64>> = (0..4).map(|_| (0..64).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let labels = [Label::Bonafide, Label::Deepfake, Label::Bonafide, Label::Deepfake];
    match grad_check(&head, &inputs, &labels, 100, 6) {
        Ok(r) if r.checked >= 100 => r.max_rel_error,
        _ => f64::INFINITY,
    }
}

/// Runs every check; each row records the measured deviation and its bound.
pub fn run_selftest() -> Vec<SelftestRow> {
    let (mel, lin) = filterbank_check();
    vec![
        row("mel filterbank vs direct summation (rel)", mel, 1e-9),
        row("linear filterbank vs direct summation (rel)", lin, 1e-9),
        row("DCT-II orthonormality |M^T M - I|", dct_check(), 1e-9),
        row("attention vs naive softmax loop (abs)", attention_check(), 1e-5),
        row("EER vs brute-force sweep (abs)", eer_check(), 1e-9),
        row("tiny CNN gradient check (rel)", grad_check_cnn(), 1e-3),
    ]
}

pub fn format_table(rows: &[SelftestRow]) -> String {
    let mut s = format!("{:<46} {:>12} {:>10}  result\n", "check", "measured", "bound");
    for r in rows {
        s.push_str(&format!(
            "{:<46} {:>12.3e} {:>10.0e}  {}\n",
            r.name,
            r.measured,
            r.tolerance,
            if r.passed { "pass" } else { "FAIL" }
        ));
    }
    s
}
