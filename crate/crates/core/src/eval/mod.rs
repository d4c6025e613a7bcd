//! Equal error rate, per-partition reports, test-set averaging and
//! comparison against externally quoted baseline numbers.

mod eer;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{ClipRecord, Label, Partition};
use crate::error::{Error, Result};
use crate::util::write_atomic;

pub use eer::{compute_eer, operating_points, EerResult, OperatingPoint, ScoredTrial};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionReport {
    pub partition: Partition,
    pub eer_percent: f64,
    pub bonafide: usize,
    pub deepfake: usize,
    pub threshold: f64,
}

/// Scores every clip of one partition with `score` and computes its EER.
/// The first failing clip aborts the evaluation with its error.
pub fn evaluate_partition(
    partition: Partition,
    records: &[&ClipRecord],
    mut score: impl FnMut(&ClipRecord) -> Result<f64>,
) -> Result<(PartitionReport, Vec<ScoredTrial>)> {
    let mut trials = Vec::with_capacity(records.len());
    for r in records {
        if r.partition != partition {
            return Err(Error::Config(format!("clip `{}` is in {}, not {partition}", r.clip_id, r.partition)));
        }
        trials.push(ScoredTrial::new(r.clip_id.clone(), r.label, score(r)?)?);
    }
    let report = partition_report(partition, &trials)?;
    Ok((report, trials))
}

pub fn partition_report(partition: Partition, trials: &[ScoredTrial]) -> Result<PartitionReport> {
    let eer = compute_eer(trials)?;
    let bonafide = trials.iter().filter(|t| t.label == Label::Bonafide).count();
    Ok(PartitionReport {
        partition,
        eer_percent: 100.0 * eer.eer,
        bonafide,
        deepfake: trials.len() - bonafide,
        threshold: eer.threshold,
    })
}

/// Unweighted mean EER (percent) of exactly the four test conditions.
pub fn average_test_eer(reports: &[PartitionReport]) -> Result<f64> {
    let mut sorted: Vec<&PartitionReport> = reports.iter().collect();
    sorted.sort_by_key(|r| r.partition);
    let seen: Vec<Partition> = sorted.iter().map(|r| r.partition).collect();
    if seen != Partition::TESTS {
        return Err(Error::Config(format!("test-set average needs exactly T01-T04, got {seen:?}")));
    }
    Ok(sorted.iter().map(|r| r.eer_percent).sum::<f64>() / 4.0)
}

/// Evaluation output of one system on one dataset variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub system: String,
    pub feature: String,
    pub head: String,
    pub variant: String,
    pub partitions: Vec<PartitionReport>,
    pub average_test_eer_percent: Option<f64>,
}

impl EvalReport {
    pub fn new(system: &str, feature: &str, head: &str, variant: &str, mut partitions: Vec<PartitionReport>) -> Self {
        partitions.sort_by_key(|r| r.partition);
        let tests: Vec<PartitionReport> = partitions
            .iter()
            .filter(|r| Partition::TESTS.contains(&r.partition))
            .cloned()
            .collect();
        Self {
            system: system.into(),
            feature: feature.into(),
            head: head.into(),
            variant: variant.into(),
            average_test_eer_percent: average_test_eer(&tests).ok(),
            partitions,
        }
    }

    pub fn eer(&self, p: Partition) -> Option<f64> {
        self.partitions.iter().find(|r| r.partition == p).map(|r| r.eer_percent)
    }

    /// EER per condition, keyed `Train`, `Val`, `T01`..`T04` and `Average`.
    pub fn conditions(&self) -> BTreeMap<String, f64> {
        let mut m: BTreeMap<String, f64> = self.partitions.iter().map(|r| (r.partition.to_string(), r.eer_percent)).collect();
        if let Some(a) = self.average_test_eer_percent {
            m.insert("Average".into(), a);
        }
        m
    }
}

/// EER figures quoted from an external source, per condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuotedBaseline {
    pub name: String,
    /// Where the numbers come from.
    pub source: String,
    pub eer_percent: BTreeMap<String, f64>,
}

impl QuotedBaseline {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub condition: String,
    pub system_eer_percent: f64,
    pub baseline_eer_percent: f64,
    pub abs_difference: f64,
}

/// Absolute EER differences for every condition the baseline quotes.
/// A condition missing from either side is an error.
pub fn compare_with_quoted_baseline(report: &EvalReport, quoted: &QuotedBaseline) -> Result<Vec<ComparisonRow>> {
    let ours = report.conditions();
    if quoted.eer_percent.is_empty() {
        return Err(Error::Config(format!("baseline `{}` quotes no conditions", quoted.name)));
    }
    quoted
        .eer_percent
        .iter()
        .map(|(cond, &base)| {
            let &mine = ours.get(cond).ok_or_else(|| {
                Error::Config(format!("condition `{cond}` quoted by `{}` is missing from `{}`", quoted.name, report.system))
            })?;
            Ok(ComparisonRow {
                condition: cond.clone(),
                system_eer_percent: mine,
                baseline_eer_percent: base,
                abs_difference: (mine - base).abs(),
            })
        })
        .collect()
}

pub fn write_scores(path: impl AsRef<Path>, trials: &[ScoredTrial]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["clip_id", "label", "score"])?;
    for t in trials {
        w.write_record([t.clip_id.as_str(), t.label.as_str(), &format!("{:.9}", t.score)])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
    write_atomic(path.as_ref(), &bytes)
}

pub fn read_scores(path: impl AsRef<Path>) -> Result<Vec<ScoredTrial>> {
    #[derive(Deserialize)]
    struct Row {
        clip_id: String,
        label: Label,
        score: f64,
    }
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    csv::Reader::from_reader(file)
        .deserialize()
        .map(|row| {
            let row: Row = row?;
            ScoredTrial::new(row.clip_id, row.label, row.score)
        })
        .collect()
}

/// Long-format table: one row per (system, variant, condition).
pub fn figure_table_csv(reports: &[EvalReport]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["variant", "feature", "head", "condition", "eer_percent"])?;
    for r in reports {
        for (cond, eer) in r.conditions() {
            w.write_record([r.variant.as_str(), &r.feature, &r.head, &cond, &format!("{eer:.4}")])?;
        }
    }
    w.into_inner().map_err(|e| Error::Config(e.to_string()))
}

pub fn comparison_csv(rows: &[(String, String, ComparisonRow)]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["system", "baseline", "condition", "system_eer_percent", "baseline_eer_percent", "abs_difference"])?;
    for (system, baseline, row) in rows {
        w.write_record([
            system.as_str(),
            baseline,
            &row.condition,
            &format!("{:.4}", row.system_eer_percent),
            &format!("{:.4}", row.baseline_eer_percent),
            &format!("{:.4}", row.abs_difference),
        ])?;
    }
    w.into_inner().map_err(|e| Error::Config(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(p: Partition, eer: f64) -> PartitionReport {
        PartitionReport { partition: p, eer_percent: eer, bonafide: 1, deepfake: 1, threshold: 0.5 }
    }

    #[test]
    fn average_of_four() {
        let r: Vec<_> = Partition::TESTS.iter().zip([1.09, 4.0, 5.0, 9.35]).map(|(&p, e)| report(p, e)).collect();
        assert!((average_test_eer(&r).unwrap() - 4.86).abs() < 1e-12);
        let mut rev = r.clone();
        rev.reverse();
        assert_eq!(average_test_eer(&rev).unwrap(), average_test_eer(&r).unwrap());
        assert!(average_test_eer(&r[..3]).is_err());
    }

    #[test]
    fn comparison_needs_both_sides() {
        let rep = EvalReport::new("s", "W-Tiny", "cnn", "vocals", Partition::TESTS.iter().map(|&p| report(p, 2.0)).collect());
        let mut q = QuotedBaseline { name: "b".into(), source: "x".into(), eer_percent: BTreeMap::new() };
        q.eer_percent.insert("T01".into(), 5.0);
        q.eer_percent.insert("Average".into(), 10.0);
        let rows = compare_with_quoted_baseline(&rep, &q).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| (r.abs_difference - if r.condition == "T01" { 3.0 } else { 8.0 }).abs() < 1e-12));
        q.eer_percent.insert("Val".into(), 1.0);
        assert!(compare_with_quoted_baseline(&rep, &q).is_err());
    }

    #[test]
    fn score_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        let t = vec![
            ScoredTrial::new("a", Label::Bonafide, 0.25).unwrap(),
            ScoredTrial::new("b", Label::Deepfake, 0.75).unwrap(),
        ];
        write_scores(&p, &t).unwrap();
        assert_eq!(read_scores(&p).unwrap(), t);
        assert!(std::fs::read_to_string(&p).unwrap().starts_with("clip_id,label,score\n"));
    }
}
