//! Synthetic desk-scale surrogate corpus.
//!
//! Bonafide clips are sung-like harmonic tones with gliding note changes,
//! vibrato and a soft amplitude envelope. Deepfake clips use the same
//! melody model with hard pitch steps, no vibrato and added noise, mostly
//! above 4 kHz, whose level is the `separability` knob. The
//! T04 split shifts the domain: a lower vocal register, a different language
//! tag, a weaker artifact and background noise on bonafide clips too.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::audio::{save_wav, Waveform};
use crate::error::{Error, Result};
use crate::features::SAMPLE_RATE;

use super::codec::{build_t03, codec_augment, CodecRegistry};
use super::manifest::{ClipRecord, Label, Manifest, Partition, Variant};
use super::validate::T03_CODECS;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateConfig {
    pub seed: u64,
    /// (partition, bonafide, deepfake) for every partition except T03,
    /// which is derived from T02.
    pub counts: Vec<(Partition, usize, usize)>,
    pub clip_seconds: f64,
    /// Peak amplitude of the deepfake noise band (harmonics peak near 0.5).
    pub separability: f64,
    /// Fraction of the artifact kept in T04 deepfakes.
    pub t04_artifact_scale: f64,
    /// Noise-band level on T04 bonafide clips, as a fraction of `separability`.
    pub t04_background: f64,
    pub seen_singers: usize,
    pub unseen_singers: usize,
}

impl Default for SurrogateConfig {
    /// About 400 clips of 6 s.
    fn default() -> Self {
        Self {
            seed: 0,
            counts: vec![
                (Partition::Train, 100, 100),
                (Partition::Val, 25, 25),
                (Partition::T01, 15, 15),
                (Partition::T02, 10, 10),
                (Partition::T04, 15, 15),
            ],
            clip_seconds: 6.0,
            separability: 0.08,
            t04_artifact_scale: 0.35,
            t04_background: 0.5,
            seen_singers: 8,
            unseen_singers: 4,
        }
    }
}

impl SurrogateConfig {
    /// Expected counts for every partition, T03 included.
    pub fn expected_counts(&self) -> Vec<(Partition, usize, usize)> {
        let mut counts = self.counts.clone();
        if let Some(&(_, b, f)) = self.counts.iter().find(|c| c.0 == Partition::T02) {
            counts.push((Partition::T03, T03_CODECS * b, T03_CODECS * f));
        }
        counts.sort_by_key(|c| c.0);
        counts
    }

    pub fn total_clips(&self) -> usize {
        self.expected_counts().iter().map(|c| c.1 + c.2).sum()
    }
}

/// Per-clip synthesis parameters.
#[derive(Debug, Clone, PartialEq)]
struct ClipPlan {
    label: Label,
    f0_base: f64,
    artifact: f64,
    background: f64,
    stream: u64,
}

fn singer_f0(singer: usize, shifted: bool) -> f64 {
    // Spread singers over a register; the shifted domain sits lower.
    let (lo, hi) = if shifted { (100.0, 150.0) } else { (190.0, 360.0) };
    lo + (hi - lo) * ((singer as f64 * 0.618_034) % 1.0)
}

fn synthesize(plan: &ClipPlan, seconds: f64, seed: u64) -> Waveform {
    let sr = SAMPLE_RATE as f64;
    let n = (seconds * sr).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(plan.stream);
    let bonafide = plan.label == Label::Bonafide;

    // Melody: notes of 0.2-0.5 s within a fifth of the singer's base pitch.
    let mut pitch = vec![0.0f64; n];
    let mut i = 0;
    let mut prev = plan.f0_base;
    while i < n {
        let len = (rng.gen_range(0.2..0.5) * sr) as usize;
        let target = plan.f0_base * 2f64.powf(rng.gen_range(-5i32..=7) as f64 / 12.0);
        let glide = if bonafide { (0.06 * sr) as usize } else { 0 };
        for j in 0..len.min(n - i) {
            pitch[i + j] = if j < glide {
                let a = j as f64 / glide as f64;
                prev + (target - prev) * (0.5 - 0.5 * (std::f64::consts::PI * a).cos())
            } else {
                target
            };
        }
        prev = target;
        i += len;
    }

    let vibrato_rate = rng.gen_range(5.0..6.5);
    let vibrato_depth = if bonafide { rng.gen_range(0.01..0.025) } else { 0.0 };
    let attack = if bonafide { 0.15 } else { 0.005 };
    let n_harmonics = 12;
    let mut phase = 0.0f64;
    let mut prev_noise = [0.0f64; 2];
    let mut samples = Vec::with_capacity(n);
    for (k, &f) in pitch.iter().enumerate() {
        let t = k as f64 / sr;
        let f = f * (1.0 + vibrato_depth * (2.0 * std::f64::consts::PI * vibrato_rate * t).sin());
        phase += 2.0 * std::f64::consts::PI * f / sr;
        let mut v = 0.0;
        for h in 1..=n_harmonics {
            if f * h as f64 >= sr / 2.0 {
                break;
            }
            v += (phase * h as f64).sin() / (h as f64).powf(1.3);
        }
        let env = (t / attack).min(1.0) * ((seconds - t) / attack).clamp(0.0, 1.0);
        let mut s = 0.3 * env * v;
        // Second difference of white noise: a band concentrated above 4 kHz.
        let white: f64 = rng.gen_range(-1.0..1.0);
        let band = 0.25 * (white - 2.0 * prev_noise[0] + prev_noise[1]);
        prev_noise = [white, prev_noise[0]];
        // Broadband share of the artifact, which survives 8 kHz codecs.
        s += (plan.artifact + plan.background) * (band + 0.3 * white);
        if bonafide {
            s += 0.002 * white;
        }
        samples.push(s.clamp(-1.0, 1.0) as f32);
    }
    Waveform { samples, sample_rate: SAMPLE_RATE }
}

/// Writes the surrogate corpus (WAV files and `manifest.csv`) into `out_dir`
/// and returns its manifest. T03 clips are T02 clips passed through the four
/// built-in telephony codecs.
pub fn generate_surrogate(cfg: &SurrogateConfig, out_dir: &Path) -> Result<Manifest> {
    if cfg.seen_singers == 0 || cfg.unseen_singers == 0 || cfg.clip_seconds <= 0.0 {
        return Err(Error::Config("surrogate needs singers and a positive clip length".into()));
    }
    let audio_dir = out_dir.join("audio");
    std::fs::create_dir_all(&audio_dir).map_err(|e| Error::io(&audio_dir, e))?;

    let mut plans = Vec::new();
    let mut records = Vec::new();
    for &(partition, n_bona, n_fake) in &cfg.counts {
        if partition == Partition::T03 {
            continue;
        }
        let shifted = partition == Partition::T04;
        for (label, count) in [(Label::Bonafide, n_bona), (Label::Deepfake, n_fake)] {
            for i in 0..count {
                let (singer_id, f0_base) = match partition {
                    Partition::Train | Partition::Val | Partition::T01 => {
                        let s = i % cfg.seen_singers;
                        (format!("seen{s:02}"), singer_f0(s, false))
                    }
                    Partition::T02 => {
                        let s = i % cfg.unseen_singers;
                        (format!("unseen{s:02}"), singer_f0(cfg.seen_singers + s, false))
                    }
                    _ => {
                        let s = i % cfg.unseen_singers;
                        (format!("shifted{s:02}"), singer_f0(s, true))
                    }
                };
                let fake = label == Label::Deepfake;
                let artifact = match (fake, shifted) {
                    (false, _) => 0.0,
                    (true, false) => cfg.separability,
                    (true, true) => cfg.separability * cfg.t04_artifact_scale,
                };
                let background = if shifted { cfg.separability * cfg.t04_background } else { 0.0 };
                let clip_id = format!("{}_{}_{i:04}", partition.as_str().to_lowercase(), label.as_str());
                plans.push(ClipPlan {
                    label,
                    f0_base,
                    artifact,
                    background,
                    stream: plans.len() as u64,
                });
                records.push(ClipRecord {
                    path: audio_dir.join(format!("{clip_id}.wav")),
                    clip_id,
                    label,
                    singer_id,
                    language: if shifted { "xx".into() } else { "en".into() },
                    partition,
                    variant: Variant::Vocals,
                    codec: None,
                });
            }
        }
    }

    records
        .par_iter()
        .zip(&plans)
        .try_for_each(|(r, plan)| save_wav(&r.path, &synthesize(plan, cfg.clip_seconds, cfg.seed)))?;

    let registry = CodecRegistry::builtin();
    let t02: Vec<ClipRecord> = records.iter().filter(|r| r.partition == Partition::T02).cloned().collect();
    if !t02.is_empty() {
        let t03 = build_t03(&t02, &registry.tags(), &audio_dir)?;
        t03.par_iter().try_for_each(|r| {
            let source = &t02[t02.iter().position(|s| r.clip_id.starts_with(&format!("{}__", s.clip_id))).unwrap()];
            let w = crate::audio::load_audio(&source.path, SAMPLE_RATE)?;
            save_wav(&r.path, &codec_augment(&w, r.codec.as_deref().unwrap(), &registry)?)
        })?;
        records.extend(t03);
    }

    // Paths in the saved manifest are relative to its directory.
    let manifest = Manifest::new(records)?;
    let mut relative = manifest.clone();
    for r in &mut relative.records {
        if let Ok(p) = r.path.strip_prefix(out_dir) {
            r.path = p.to_path_buf();
        }
    }
    relative.save(out_dir.join("manifest.csv"))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::validate_with_counts;

    #[test]
    fn small_corpus_matches_its_counts_and_overlap_rules() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = SurrogateConfig {
            counts: vec![
                (Partition::Train, 3, 2),
                (Partition::Val, 1, 1),
                (Partition::T01, 2, 1),
                (Partition::T02, 1, 2),
                (Partition::T04, 1, 1),
            ],
            clip_seconds: 0.3,
            seen_singers: 2,
            unseen_singers: 1,
            ..Default::default()
        };
        let m = generate_surrogate(&cfg, dir.path()).unwrap();
        assert_eq!(m.records.len(), cfg.total_clips());
        assert!(validate_with_counts(&m, &cfg.expected_counts()).is_ok());
        assert!(m.missing_audio().is_empty());
        let loaded = crate::data::load_manifest(dir.path().join("manifest.csv")).unwrap();
        assert_eq!(loaded, m);
    }

    #[test]
    fn synthesis_is_deterministic_and_bounded() {
        let plan = ClipPlan { label: Label::Deepfake, f0_base: 220.0, artifact: 0.05, background: 0.0, stream: 3 };
        let a = synthesize(&plan, 0.5, 9);
        assert_eq!(a, synthesize(&plan, 0.5, 9));
        assert_ne!(a, synthesize(&plan, 0.5, 10));
        assert!(a.samples.iter().all(|s| s.abs() <= 1.0));
        assert_eq!(a.len(), 8000);
    }

    #[test]
    fn default_is_desk_scale() {
        let n = SurrogateConfig::default().total_clips();
        assert!((350..=450).contains(&n), "{n}");
    }
}
