//! Scores to EER: per-partition reports, the four-condition average, the
//! figure table and a comparison against quoted baseline figures.
//!
//!     cargo run --release --example eer_report

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use svdd::data::{Label, Partition};
use svdd::eval::{
    compare_with_quoted_baseline, compute_eer, figure_table_csv, partition_report, read_scores, write_scores,
    EvalReport, QuotedBaseline, ScoredTrial,
};

/// Overlapping score clouds; `overlap` moves the deepfake cloud upwards.
fn scores(partition: Partition, overlap: f64, rng: &mut ChaCha8Rng) -> Vec<ScoredTrial> {
    (0..200)
        .map(|i| {
            let (label, centre) = if i % 2 == 0 { (Label::Bonafide, 0.75) } else { (Label::Deepfake, 0.25 + overlap) };
            let s: f64 = (centre + rng.gen_range(-0.25..0.25)).clamp(0.0, 1.0);
            ScoredTrial::new(format!("{partition}-{i}"), label, s).unwrap()
        })
        .collect()
}

pub fn run_example() -> svdd::Result<EvalReport> {
    let hand = [
        (vec![0.9, 0.8], vec![0.1, 0.2]),
        (vec![0.1, 0.9], vec![0.1, 0.9]),
        (vec![0.6, 0.4, 0.8], vec![0.5, 0.3, 0.2]),
    ];
    for (bona, fake) in hand {
        let trials: Vec<ScoredTrial> = bona
            .iter()
            .map(|&s| ScoredTrial::new("b", Label::Bonafide, s))
            .chain(fake.iter().map(|&s| ScoredTrial::new("d", Label::Deepfake, s)))
            .collect::<svdd::Result<_>>()?;
        let r = compute_eer(&trials)?;
        println!("bonafide {bona:?} deepfake {fake:?}: EER {:.4} at {:.3}", r.eer, r.threshold);
    }

    let dir = tempfile::tempdir().map_err(|e| svdd::Error::Config(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut reports = Vec::new();
    for (p, overlap) in [(Partition::T01, 0.0), (Partition::T02, 0.1), (Partition::T03, 0.2), (Partition::T04, 0.3)] {
        let path = dir.path().join(format!("{p}.csv"));
        write_scores(&path, &scores(p, overlap, &mut rng))?;
        reports.push(partition_report(p, &read_scores(&path)?)?);
    }
    let report = EvalReport::new("demo+CNN", "demo", "CNN", "vocals", reports);
    print!("{}", String::from_utf8_lossy(&figure_table_csv(std::slice::from_ref(&report))?));

    let quoted = QuotedBaseline {
        name: "reference system".into(),
        source: "illustrative numbers".into(),
        eer_percent: BTreeMap::from([("T01".into(), 5.0), ("T04".into(), 30.0), ("Average".into(), 15.0)]),
    };
    for row in compare_with_quoted_baseline(&report, &quoted)? {
        println!(
            "{:<8} ours {:6.2}%  quoted {:6.2}%  |diff| {:6.2}",
            row.condition, row.system_eer_percent, row.baseline_eer_percent, row.abs_difference
        );
    }
    Ok(report)
}

#[allow(dead_code)]
fn main() -> svdd::Result<()> {
    run_example().map(drop)
}
