//! Acceptance suite. Prints one `PASS`/`FAIL` line per criterion and exits
//! non-zero if any fails. Every reference value is computed here by an
//! independent straight-line implementation.

use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use svdd::data::{validate_with_counts, ClipRecord, Label, Manifest, Partition, Variant, REFERENCE_COUNTS};
use svdd::encoder::{
    conv_stem, multi_head_self_attention, scaled_dot_attention, shipped_layout, transformer_block, AttentionParams,
    BlockWeights, Encoder, EncoderConfig, EncoderWeights, Matrix, ModelSize,
};
use svdd::eval::{compute_eer, ScoredTrial};
use svdd::features::dct::dct_matrix;
use svdd::features::filterbank::Filterbank;
use svdd::heads::{grad_check, CnnHeadConfig, Head, HeadArch, ResNetConfig};
use svdd::Waveform;

#[path = "../examples/desk_pipeline.rs"]
#[allow(dead_code)]
mod desk;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

fn timed(name: &str, limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let mut o = f();
    let took = start.elapsed();
    if let Some(limit) = limit {
        if took > limit {
            o.passed = false;
            o.detail.push_str(&format!("; over the {:.0} s budget", limit.as_secs_f64()));
        }
    }
    println!(
        "{} {name}: {} [{:.1} s]",
        if o.passed { "PASS" } else { "FAIL" },
        o.detail,
        took.as_secs_f64()
    );
    o.passed
}

// ---------------------------------------------------------------- EER

fn trials(bona: &[f64], fake: &[f64]) -> Vec<ScoredTrial> {
    bona.iter()
        .map(|&s| ScoredTrial::new("b", Label::Bonafide, s).unwrap())
        .chain(fake.iter().map(|&s| ScoredTrial::new("d", Label::Deepfake, s).unwrap()))
        .collect()
}

/// Counts FAR and FRR directly at every candidate threshold and interpolates
/// at the first sign change of FAR - FRR.
fn sweep_eer(bona: &[f64], fake: &[f64]) -> f64 {
    let mut ts: Vec<f64> = bona.iter().chain(fake).copied().collect();
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    ts.push(f64::INFINITY);
    let mut prev: Option<(f64, f64)> = None;
    for t in ts {
        let far = fake.iter().filter(|&&s| s >= t).count() as f64 / fake.len() as f64;
        let frr = bona.iter().filter(|&&s| s < t).count() as f64 / bona.len() as f64;
        if far <= frr {
            return match prev {
                Some((pfar, pfrr)) if far != frr => {
                    let alpha = (pfar - pfrr) / ((pfar - pfrr) - (far - frr));
                    pfar + alpha * (far - pfar)
                }
                _ => far,
            };
        }
        prev = Some((far, frr));
    }
    unreachable!()
}

fn eer_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for set in 0..500 {
        let n = rng.gen_range(2..=1000);
        let nb = rng.gen_range(1..n);
        // Every other set uses a coarse grid so ties are common.
        let draw = |rng: &mut ChaCha8Rng, shift: f64| {
            let s: f64 = (rng.gen::<f64>() + shift).clamp(0.0, 1.0);
            if set % 2 == 0 { (s * 20.0).round() / 20.0 } else { s }
        };
        let bona: Vec<f64> = (0..nb).map(|_| draw(&mut rng, 0.2)).collect();
        let fake: Vec<f64> = (0..n - nb).map(|_| draw(&mut rng, -0.2)).collect();
        let got = compute_eer(&trials(&bona, &fake)).unwrap().eer;
        worst = worst.max((got - sweep_eer(&bona, &fake)).abs());
    }
    outcome(worst <= 1e-9, format!("500 sets, max |diff| {worst:.2e} (bound 1e-9)"))
}

fn eer_hand_cases() -> Outcome {
    let cases = [
        (vec![0.9, 0.8], vec![0.1, 0.2], 0.0),
        (vec![0.1, 0.9], vec![0.1, 0.9], 0.5),
        (vec![0.6, 0.4, 0.8], vec![0.5, 0.3, 0.2], 1.0 / 3.0),
    ];
    let got: Vec<f64> = cases.iter().map(|(b, f, _)| compute_eer(&trials(b, f)).unwrap().eer).collect();
    let ok = cases.iter().zip(&got).all(|((_, _, want), g)| g == want);
    outcome(ok, format!("EERs {got:?}, expected [0.0, 0.5, 1/3] exactly"))
}

// ---------------------------------------------------------------- encoder

type M = Vec<Vec<f64>>;

fn to64(m: &Matrix) -> M {
    (0..m.rows).map(|r| m.row(r).iter().map(|&v| v as f64).collect()).collect()
}

fn max_abs(a: &Matrix, b: &M) -> f64 {
    let mut worst: f64 = 0.0;
    for (r, row) in b.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            worst = worst.max((a.at(r, c) as f64 - v).abs());
        }
    }
    worst
}

fn rand_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::new(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-1.0f32..1.0)).collect()).unwrap()
}

/// `x · Wᵀ + b` with `W` stored `[out, in]`.
fn lin(x: &M, w: &Matrix, b: Option<&[f32]>) -> M {
    x.iter()
        .map(|row| {
            (0..w.rows)
                .map(|o| {
                    let mut s = b.map_or(0.0, |b| b[o] as f64);
                    for (i, &v) in row.iter().enumerate() {
                        s += w.at(o, i) as f64 * v;
                    }
                    s
                })
                .collect()
        })
        .collect()
}

fn attend(q: &M, k: &M, v: &M) -> M {
    let dk = q[0].len() as f64;
    q.iter()
        .map(|qi| {
            let logits: Vec<f64> = k
                .iter()
                .map(|kj| qi.iter().zip(kj).map(|(a, b)| a * b).sum::<f64>() / dk.sqrt())
                .collect();
            let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
            let z: f64 = e.iter().sum();
            (0..v[0].len()).map(|c| (0..v.len()).map(|j| e[j] / z * v[j][c]).sum()).collect()
        })
        .collect()
}

fn slice_cols(m: &M, start: usize, width: usize) -> M {
    m.iter().map(|r| r[start..start + width].to_vec()).collect()
}

fn mhsa(x: &M, w: &BlockWeights, heads: usize) -> M {
    let q = lin(x, &w.query, Some(&w.query_bias));
    let k = lin(x, &w.key, None);
    let v = lin(x, &w.value, Some(&w.value_bias));
    let dh = x[0].len() / heads;
    let mut cat: M = vec![Vec::new(); x.len()];
    for h in 0..heads {
        let o = attend(&slice_cols(&q, h * dh, dh), &slice_cols(&k, h * dh, dh), &slice_cols(&v, h * dh, dh));
        for (dst, src) in cat.iter_mut().zip(o) {
            dst.extend(src);
        }
    }
    lin(&cat, &w.out, Some(&w.out_bias))
}

fn norm(x: &M, g: &[f32], b: &[f32]) -> M {
    x.iter()
        .map(|r| {
            let n = r.len() as f64;
            let mu = r.iter().sum::<f64>() / n;
            let var = r.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / n;
            r.iter()
                .enumerate()
                .map(|(i, v)| (v - mu) / (var + 1e-5).sqrt() * g[i] as f64 + b[i] as f64)
                .collect()
        })
        .collect()
}

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + libm::erf(x / 2f64.sqrt()))
}

fn add(a: &M, b: &M) -> M {
    a.iter().zip(b).map(|(x, y)| x.iter().zip(y).map(|(p, q)| p + q).collect()).collect()
}

fn block(x: &M, w: &BlockWeights, heads: usize) -> M {
    let h = add(x, &mhsa(&norm(x, &w.attn_ln_gain, &w.attn_ln_bias), w, heads));
    let mut m = lin(&norm(&h, &w.mlp_ln_gain, &w.mlp_ln_bias), &w.fc1, Some(&w.fc1_bias));
    m.iter_mut().flatten().for_each(|v| *v = gelu(*v));
    add(&h, &lin(&m, &w.fc2, Some(&w.fc2_bias)))
}

fn conv(x: &M, w: &[f32], b: &[f32], c_out: usize, stride: usize) -> M {
    let (t, c_in) = (x.len(), x[0].len());
    let t_out = (t + 2 - 3) / stride + 1;
    (0..t_out)
        .map(|o| {
            (0..c_out)
                .map(|co| {
                    let mut s = b[co] as f64;
                    for ci in 0..c_in {
                        for k in 0..3 {
                            let src = (o * stride + k) as isize - 1;
                            if src >= 0 && (src as usize) < t {
                                s += w[(co * c_in + ci) * 3 + k] as f64 * x[src as usize][ci];
                            }
                        }
                    }
                    gelu(s)
                })
                .collect()
        })
        .collect()
}

fn stem(mel: &M, w: &EncoderWeights, d: usize) -> M {
    conv(&conv(mel, &w.conv1, &w.conv1_bias, d, 1), &w.conv2, &w.conv2_bias, d, 2)
}

fn positions(t: usize, d: usize) -> M {
    let half = d / 2;
    (0..t)
        .map(|p| {
            let angles: Vec<f64> = (0..half)
                .map(|i| p as f64 / 10000f64.powf(i as f64 / (half - 1) as f64))
                .collect();
            angles.iter().map(|a| a.sin()).chain(angles.iter().map(|a| a.cos())).collect()
        })
        .collect()
}

fn encoder_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut worst = [0f64; 5];
    for trial in 0..6 {
        let t = rng.gen_range(2..=8);
        let (d, heads) = [(8, 2), (16, 4), (12, 3)][trial % 3];
        let n_mels = rng.gen_range(3..=10);
        let cfg = EncoderConfig::custom(2, d, heads, n_mels, t);
        let w = EncoderWeights::random(&cfg, trial as u64).unwrap();

        let (q, k) = (rand_matrix(&mut rng, t, d), rand_matrix(&mut rng, t + 1, d));
        let v = rand_matrix(&mut rng, t + 1, 5);
        let got = scaled_dot_attention(&AttentionParams::new(q.clone(), k.clone(), v.clone()).unwrap()).unwrap();
        worst[0] = worst[0].max(max_abs(&got, &attend(&to64(&q), &to64(&k), &to64(&v))));

        let x = rand_matrix(&mut rng, t, d);
        let got = multi_head_self_attention(&x, &w.blocks[0], heads).unwrap();
        worst[1] = worst[1].max(max_abs(&got, &mhsa(&to64(&x), &w.blocks[0], heads)));

        let got = transformer_block(&x, &w.blocks[1], heads).unwrap();
        worst[2] = worst[2].max(max_abs(&got, &block(&to64(&x), &w.blocks[1], heads)));

        let mel = rand_matrix(&mut rng, t, n_mels);
        let got = conv_stem(&mel, &w, &cfg).unwrap();
        worst[3] = worst[3].max(max_abs(&got, &stem(&to64(&mel), &w, d)));

        let enc = Encoder::new(cfg, w.clone()).unwrap();
        let got = enc.encode_matrix(&mel).unwrap();
        let s = stem(&to64(&mel), &w, d);
        let mut h = add(&s, &positions(s.len(), d));
        for b in &w.blocks {
            h = block(&h, b, heads);
        }
        worst[4] = worst[4].max(max_abs(&got, &norm(&h, &w.ln_post_gain, &w.ln_post_bias)));
    }
    let max = worst.iter().copied().fold(0.0, f64::max);
    outcome(
        max <= 1e-5,
        format!(
            "max abs dev attention {:.1e}, MHSA {:.1e}, block {:.1e}, stem {:.1e}, encode {:.1e} (bound 1e-5)",
            worst[0], worst[1], worst[2], worst[3], worst[4]
        ),
    )
}

fn architecture_arithmetic() -> Outcome {
    let clip = Waveform::new(vec![0.0; 30 * 16_000], 16_000).unwrap();
    let mel = svdd::features::encoder_input(&clip).unwrap();
    let mut notes = vec![format!("30 s -> {} mel frames", mel.rows())];
    let mut ok = mel.rows() == 3000;
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mel_m = rand_matrix(&mut rng, 3000, 80);
    for size in ModelSize::NAMED {
        let cfg = EncoderConfig::named(size).unwrap();
        let d = cfg.d_model;
        // The stem alone fixes the frame count; block weights are not needed.
        let stem_only = EncoderWeights {
            conv1: vec![0.01; d * 80 * 3],
            conv1_bias: vec![0.0; d],
            conv2: vec![0.01; d * d * 3],
            conv2_bias: vec![0.0; d],
            blocks: Vec::new(),
            ln_post_gain: vec![1.0; d],
            ln_post_bias: vec![0.0; d],
        };
        let frames = conv_stem(&mel_m, &stem_only, &cfg).unwrap().rows;

        let f = cfg.d_ff;
        let expected_params = (d * 80 * 3 + d) + (d * d * 3 + d)
            + cfg.n_blocks * (4 * d + 4 * d * d + 3 * d + 2 * d * f + f + d)
            + 2 * d;
        let shipped = shipped_layout(size);
        let manifest_ok = shipped.as_ref() == Some(&cfg.layout_manifest());
        let shipped_params = shipped.map_or(0, |m| m.parameters);
        ok &= frames == 1500
            && cfg.encoded_frames(3000) == 1500
            && manifest_ok
            && shipped_params == expected_params
            && cfg.parameter_count() == expected_params;
        notes.push(format!("{} {frames} frames, {shipped_params} params", size.as_str()));
    }
    outcome(ok, notes.join("; "))
}

// ---------------------------------------------------------------- heads

fn check_head(arch: HeadArch, feature_dim: usize, seed: u64) -> (f64, usize, usize) {
    let head = Head::new(arch, feature_dim, seed).unwrap();
    let (h, w) = head.input_dims();
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
    let inputs: Vec<Vec<f64>> = (0..4).map(|_| (0..h * w).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let labels = [Label::Bonafide, Label::Deepfake, Label::Deepfake, Label::Bonafide];
    let r = grad_check(&head, &inputs, &labels, usize::MAX, seed).unwrap();
    (r.max_rel_error, r.checked, r.skipped)
}

fn gradient_checks() -> Outcome {
    let cnn = HeadArch::Cnn(CnnHeadConfig { channels: [2, 2], kernel_size: 5, input_rows: 8 });
    let resnet = HeadArch::ResNet(ResNetConfig { blocks_per_stage: [1, 1, 1, 1], widths: [2, 3, 4, 4], input_size: 32 });
    let (c_err, c_n, c_skip) = check_head(cnn, 8, 1);
    let (r_err, r_n, r_skip) = check_head(resnet, 8, 2);
    outcome(
        c_err < 1e-3 && r_err < 1e-3 && c_n > 0 && r_n > 0,
        format!(
            "CNN {c_err:.2e} over {c_n} params ({c_skip} at kinks), ResNet {r_err:.2e} over {r_n} params ({r_skip} at kinks) (bound 1e-3)"
        ),
    )
}

// ---------------------------------------------------------------- features

fn slaney_mel(hz: f64) -> f64 {
    let f_sp = 200.0 / 3.0;
    let logstep = 6.4f64.ln() / 27.0;
    if hz < 1000.0 { hz / f_sp } else { 1000.0 / f_sp + (hz / 1000.0).ln() / logstep }
}

fn slaney_hz(mel: f64) -> f64 {
    let f_sp = 200.0 / 3.0;
    let logstep = 6.4f64.ln() / 27.0;
    if mel < 15.0 { mel * f_sp } else { 1000.0 * (logstep * (mel - 15.0)).exp() }
}

/// `Σ_b w_k(f_b) · p_b` with triangular weights evaluated from the edges.
fn direct_bank(edges: &[f64], area: bool, n_fft: usize, power: &[f64]) -> Vec<f64> {
    edges
        .windows(3)
        .map(|e| {
            let scale = if area { 2.0 / (e[2] - e[0]) } else { 1.0 };
            power
                .iter()
                .enumerate()
                .map(|(b, p)| {
                    let f = b as f64 * 16000.0 / n_fft as f64;
                    let up = (f - e[0]) / (e[1] - e[0]);
                    let down = (e[2] - f) / (e[2] - e[1]);
                    scale * up.min(down).max(0.0) * p
                })
                .sum()
        })
        .collect()
}

fn rel_dev(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs() / y.abs().max(1e-300)).fold(0.0, f64::max)
}

fn filterbank_dct() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let (mut mel_dev, mut lin_dev, mut dct_dev) = (0f64, 0f64, 0f64);
    for (n_fft, n_mels, n_lin) in [(400, 80, 40), (512, 40, 20), (1024, 64, 60)] {
        let power: Vec<f64> = (0..n_fft / 2 + 1).map(|_| rng.gen_range(0.0..1.0)).collect();
        let top = slaney_mel(8000.0);
        let edges: Vec<f64> = (0..n_mels + 2).map(|i| slaney_hz(top * i as f64 / (n_mels + 1) as f64)).collect();
        mel_dev = mel_dev.max(rel_dev(
            &Filterbank::mel(16000, n_fft, n_mels, 0.0, 8000.0).apply(&power),
            &direct_bank(&edges, true, n_fft, &power),
        ));
        let edges: Vec<f64> = (0..n_lin + 2).map(|i| 8000.0 * i as f64 / (n_lin + 1) as f64).collect();
        lin_dev = lin_dev.max(rel_dev(
            &Filterbank::linear(16000, n_fft, n_lin).apply(&power),
            &direct_bank(&edges, false, n_fft, &power),
        ));
    }
    for n in [13, 20, 40, 80] {
        let m = dct_matrix(n);
        for i in 0..n {
            for j in 0..n {
                let dot: f64 = (0..n).map(|k| m[k * n + i] * m[k * n + j]).sum();
                dct_dev = dct_dev.max((dot - f64::from(u8::from(i == j))).abs());
            }
        }
    }
    outcome(
        mel_dev <= 1e-9 && lin_dev <= 1e-9 && dct_dev <= 1e-9,
        format!("mel rel {mel_dev:.1e}, linear rel {lin_dev:.1e}, DCT |MᵀM-I| {dct_dev:.1e} (bound 1e-9)"),
    )
}

// ---------------------------------------------------------------- data

fn reference_manifest() -> Manifest {
    let mut records = Vec::new();
    for (p, nb, nf) in REFERENCE_COUNTS {
        for (label, n) in [(Label::Bonafide, nb), (Label::Deepfake, nf)] {
            for i in 0..n {
                let (singer, codec) = match p {
                    Partition::Train | Partition::Val | Partition::T01 => (format!("seen{}", i % 40), None),
                    Partition::T02 => (format!("unseen{}", i % 12), None),
                    Partition::T03 => (format!("unseen{}", (i / 4) % 12), Some(format!("c{}", i % 4))),
                    Partition::T04 => (format!("other{}", i % 5), None),
                };
                records.push(ClipRecord {
                    clip_id: format!("{p}-{}-{i}", label.as_str()),
                    path: format!("{i}.wav").into(),
                    label,
                    singer_id: singer,
                    language: "xx".into(),
                    partition: p,
                    variant: Variant::Vocals,
                    codec,
                });
            }
        }
    }
    Manifest::new(records).unwrap()
}

fn manifest_validation() -> Outcome {
    let m = reference_manifest();
    let clean = validate_with_counts(&m, &REFERENCE_COUNTS);
    let mut caught = 0;
    let mut mutations = 0;
    for i in 0..REFERENCE_COUNTS.len() {
        for (db, df) in [(1isize, 0isize), (0, 1), (-1, 0), (0, -1)] {
            let mut counts = REFERENCE_COUNTS;
            counts[i].1 = (counts[i].1 as isize + db) as usize;
            counts[i].2 = (counts[i].2 as isize + df) as usize;
            mutations += 1;
            caught += usize::from(!validate_with_counts(&m, &counts).is_ok());
        }
    }
    outcome(
        clean.is_ok() && caught == mutations,
        format!(
            "{} clips, {} violations on the reference counts; {caught}/{mutations} mutated counts caught",
            m.records.len(),
            clean.violations.len()
        ),
    )
}

// ---------------------------------------------------------------- end to end

fn tree_bytes(run: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files = vec!["report.json".to_string(), "report.csv".into(), "history.json".into(), "head.svdd".into()];
    for p in Partition::ALL {
        files.push(format!("scores/{p}.csv"));
    }
    files.into_iter().map(|f| (f.clone(), std::fs::read(run.join(&f)).unwrap_or_default())).collect()
}

fn main() {
    let mut all = true;
    all &= timed("EER oracle equivalence", Some(Duration::from_secs(10)), eer_oracle);
    all &= timed("EER hand cases", None, eer_hand_cases);
    all &= timed("attention/encoder oracle equivalence", Some(Duration::from_secs(30)), encoder_oracle);
    all &= timed("architecture arithmetic", None, architecture_arithmetic);
    all &= timed("gradient checks", Some(Duration::from_secs(60)), gradient_checks);
    all &= timed("filterbank/DCT suite", None, filterbank_dct);
    all &= timed("manifest validation", None, manifest_validation);

    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut reports = Vec::new();
    let mut runtimes = Vec::new();
    for d in &dirs {
        let start = Instant::now();
        reports.push(desk::run_desk(d.path(), 7));
        runtimes.push(start.elapsed());
    }
    all &= timed("end-to-end desk run", None, || {
        let history = std::fs::read(dirs[0].path().join("run/history.json")).unwrap_or_default();
        let history: Vec<serde_json::Value> = serde_json::from_slice(&history).unwrap_or_default();
        let val: Vec<f64> = history.iter().filter_map(|e| e["val_eer"].as_f64()).collect();
        let best = val.iter().copied().fold(f64::INFINITY, f64::min);
        let a = tree_bytes(&dirs[0].path().join("run"));
        let b = tree_bytes(&dirs[1].path().join("run"));
        let identical = a.iter().all(|(_, bytes)| !bytes.is_empty()) && a == b;
        let slowest = runtimes.iter().max().unwrap().as_secs_f64();
        outcome(
            reports.iter().all(Result::is_ok) && val.len() <= 5 && best <= 0.05 && identical && slowest < 300.0,
            format!(
                "best val EER {:.2}% within {} epochs; reports byte-identical across runs: {identical}; slowest run {slowest:.0} s",
                100.0 * best,
                val.len()
            ),
        )
    });
    all &= timed("testing-condition ordering", None, || match &reports[0] {
        Ok(r) => {
            let (t01, t04) = (r.eer(Partition::T01).unwrap_or(f64::NAN), r.eer(Partition::T04).unwrap_or(f64::NAN));
            outcome(t04 > t01, format!("EER T01 {t01:.2}%, T04 {t04:.2}%"))
        }
        Err(e) => outcome(false, e.to_string()),
    });

    if !all {
        std::process::exit(1);
    }
}
