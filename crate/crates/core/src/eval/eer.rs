//! Equal error rate.
//!
//! A trial is accepted as bonafide when `score >= threshold`. For each
//! candidate threshold `t` (every distinct score, plus one above the
//! maximum) the false acceptance rate is the share of deepfakes with
//! `score >= t` and the false rejection rate the share of bonafide trials
//! with `score < t`. FAR falls and FRR rises with `t`; the EER is where they
//! meet, linearly interpolated between the two operating points that
//! straddle the crossing.

use serde::{Deserialize, Serialize};

use crate::data::Label;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredTrial {
    pub clip_id: String,
    pub label: Label,
    pub score: f64,
}

impl ScoredTrial {
    pub fn new(clip_id: impl Into<String>, label: Label, score: f64) -> Result<Self> {
        if !score.is_finite() || !(0.0..=1.0).contains(&score) {
            return Err(Error::Config(format!("score {score} is outside [0, 1]")));
        }
        Ok(Self {
            clip_id: clip_id.into(),
            label,
            score,
        })
    }
}

/// One point of the detection trade-off curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub threshold: f64,
    pub far: f64,
    pub frr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EerResult {
    /// Fraction in `[0, 1]`.
    pub eer: f64,
    pub threshold: f64,
}

/// FAR/FRR at every distinct score and one step above the maximum, in
/// increasing threshold order.
pub fn operating_points(trials: &[ScoredTrial]) -> Result<Vec<OperatingPoint>> {
    let n_bona = trials.iter().filter(|t| t.label == Label::Bonafide).count();
    let n_fake = trials.len() - n_bona;
    if n_bona == 0 || n_fake == 0 {
        return Err(Error::SingleClass {
            bonafide: n_bona,
            deepfake: n_fake,
        });
    }
    let mut sorted: Vec<(f64, Label)> = trials.iter().map(|t| (t.score, t.label)).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut points = Vec::new();
    // Below index i everything is rejected.
    let (mut bona_below, mut fake_below) = (0usize, 0usize);
    let mut i = 0;
    while i < sorted.len() {
        let t = sorted[i].0;
        points.push(OperatingPoint {
            threshold: t,
            far: (n_fake - fake_below) as f64 / n_fake as f64,
            frr: bona_below as f64 / n_bona as f64,
        });
        while i < sorted.len() && sorted[i].0 == t {
            match sorted[i].1 {
                Label::Bonafide => bona_below += 1,
                Label::Deepfake => fake_below += 1,
            }
            i += 1;
        }
    }
    let top = sorted.last().unwrap().0;
    points.push(OperatingPoint {
        threshold: if top < 1.0 { top + (1.0 - top) / 2.0 } else { top + 1.0 },
        far: 0.0,
        frr: 1.0,
    });
    Ok(points)
}

/// Interpolated equal error rate and the threshold where it occurs.
pub fn compute_eer(trials: &[ScoredTrial]) -> Result<EerResult> {
    let points = operating_points(trials)?;
    Ok(eer_from_points(&points))
}

pub(crate) fn eer_from_points(points: &[OperatingPoint]) -> EerResult {
    // FAR - FRR is non-increasing and ends at -1.
    let idx = points
        .iter()
        .position(|p| p.far - p.frr <= 0.0)
        .expect("last operating point always has FAR < FRR");
    let b = points[idx];
    if idx == 0 || b.far == b.frr {
        return EerResult {
            eer: b.far,
            threshold: b.threshold,
        };
    }
    let a = points[idx - 1];
    let (da, db) = (a.far - a.frr, b.far - b.frr);
    let alpha = da / (da - db);
    EerResult {
        eer: a.far + alpha * (b.far - a.far),
        threshold: a.threshold + alpha * (b.threshold - a.threshold),
    }
}
