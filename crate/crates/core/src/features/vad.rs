//! Energy-threshold voice activity detection.
//!
//! A frame is active when its mean power is within `energy_threshold_db` of
//! the clip's mean power. Active runs are merged across short gaps, split
//! at their quietest frame while longer than `max_clip_s`, and dropped when
//! shorter than `min_speech_s`.

use serde::{Deserialize, Serialize};

use crate::audio::Waveform;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VadConfig {
    pub frame_ms: f64,
    pub energy_threshold_db: f64,
    pub min_speech_s: f64,
    pub max_clip_s: f64,
    pub merge_gap_s: f64,
}

impl Default for VadConfig {
    fn default() -> Self {
        Self {
            frame_ms: 30.0,
            energy_threshold_db: -35.0,
            min_speech_s: 1.0,
            max_clip_s: 20.0,
            merge_gap_s: 0.5,
        }
    }
}

impl VadConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.frame_ms > 0.0 && self.min_speech_s > 0.0 && self.max_clip_s >= self.min_speech_s)
            || self.merge_gap_s < 0.0
        {
            return Err(Error::Config(format!("invalid VAD configuration {self:?}")));
        }
        Ok(())
    }
}

/// Returns sorted, disjoint `(start_s, end_s)` voiced intervals.
pub fn segment_by_vad(w: &Waveform, cfg: &VadConfig) -> Result<Vec<(f64, f64)>> {
    cfg.validate()?;
    let frame = ((cfg.frame_ms / 1000.0) * w.sample_rate as f64).round().max(1.0) as usize;
    if w.len() < frame {
        return Err(Error::TooShort {
            len: w.len(),
            window: frame,
        });
    }
    let frame_s = frame as f64 / w.sample_rate as f64;
    let energy: Vec<f64> = w
        .samples
        .chunks(frame)
        .map(|c| c.iter().map(|&s| (s as f64).powi(2)).sum::<f64>() / c.len() as f64)
        .collect();
    let clip_power = w.samples.iter().map(|&s| (s as f64).powi(2)).sum::<f64>() / w.len() as f64;
    if clip_power <= 0.0 {
        return Ok(Vec::new());
    }
    let threshold = clip_power * 10f64.powf(cfg.energy_threshold_db / 10.0);

    // Runs of active frames as half-open frame ranges.
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut start = None;
    for (i, &e) in energy.iter().enumerate() {
        match (e >= threshold && e > 0.0, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                runs.push((s, i));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push((s, energy.len()));
    }

    let gap_frames = cfg.merge_gap_s / frame_s;
    let mut merged: Vec<(usize, usize)> = Vec::new();
    for run in runs {
        match merged.last_mut() {
            Some(last) if ((run.0 - last.1) as f64) < gap_frames => last.1 = run.1,
            _ => merged.push(run),
        }
    }

    let max_frames = cfg.max_clip_s / frame_s;
    let min_frames = cfg.min_speech_s / frame_s;
    let mut pieces = Vec::new();
    for run in merged {
        split_long(run, &energy, max_frames, min_frames, &mut pieces);
    }

    let duration = w.duration_s();
    Ok(pieces
        .into_iter()
        .filter(|&(a, b)| (b - a) as f64 >= min_frames - 1e-9)
        .map(|(a, b)| (a as f64 * frame_s, (b as f64 * frame_s).min(duration)))
        .collect())
}

fn split_long(
    (a, b): (usize, usize),
    energy: &[f64],
    max_frames: f64,
    min_frames: f64,
    out: &mut Vec<(usize, usize)>,
) {
    if ((b - a) as f64) <= max_frames || b - a < 2 {
        out.push((a, b));
        return;
    }
    // Prefer cuts that leave both halves long enough; otherwise cut mid-run.
    let margin = min_frames.ceil() as usize;
    let cut = if a + margin < b.saturating_sub(margin) {
        (a + margin..b - margin)
            .min_by(|&i, &j| energy[i].total_cmp(&energy[j]))
            .unwrap()
    } else {
        (a + b) / 2
    };
    let cut = cut.clamp(a + 1, b - 1);
    split_long((a, cut), energy, max_frames, min_frames, out);
    split_long((cut, b), energy, max_frames, min_frames, out);
}
