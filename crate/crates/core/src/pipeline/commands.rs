use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::audio::load_audio;
use crate::data::{load_manifest, ClipRecord, Label, Manifest, Partition};
use crate::error::{Error, Result};
use crate::eval::{
    compare_with_quoted_baseline, comparison_csv, figure_table_csv, partition_report, write_scores, EvalReport,
    QuotedBaseline, ScoredTrial,
};
use crate::features::{read_feature_file, whisper_log_mel, write_feature_file, FeatureMatrix, SAMPLE_RATE};
use crate::heads::{score_from_logits, train, TrainedHead};
use crate::util::write_atomic;

use super::{ExperimentConfig, Extractor};

/// Head archive inside a run directory; its sidecar is `head.svdd.json`.
pub const HEAD_FILE: &str = "head.svdd";
pub const REPORT_FILE: &str = "report.json";

fn pool(workers: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        b = b.num_threads(n.max(1));
    }
    b.build().map_err(|e| Error::Config(format!("worker pool: {e}")))
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value)?;
    v.push(b'\n');
    Ok(v)
}

fn experiment_manifest(cfg: &ExperimentConfig) -> Result<Manifest> {
    let m = load_manifest(cfg.manifest_path()?)?;
    Manifest::new(m.records.into_iter().filter(|r| r.variant == cfg.variant).collect())
}

fn cache_file(dir: &Path, clip_id: &str) -> PathBuf {
    dir.join(format!("{clip_id}.feat"))
}

fn up_to_date(cache: &Path, audio: &Path) -> bool {
    let modified = |p: &Path| std::fs::metadata(p).and_then(|m| m.modified()).ok();
    match (modified(cache), modified(audio)) {
        (Some(c), Some(a)) => c >= a,
        (Some(_), None) => true,
        _ => false,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractSummary {
    pub computed: usize,
    pub skipped: usize,
}

struct FeatureCache {
    dir: PathBuf,
}

impl FeatureCache {
    fn open(cfg: &ExperimentConfig, extractor: &Extractor) -> Result<Self> {
        Ok(Self {
            dir: cfg.cache_dir()?.join(extractor.cache_key(cfg.feature)),
        })
    }

    fn fill(&self, extractor: &Extractor, records: &[&ClipRecord], workers: Option<usize>) -> Result<ExtractSummary> {
        std::fs::create_dir_all(&self.dir).map_err(|e| Error::io(&self.dir, e))?;
        let done: Vec<bool> = pool(workers)?.install(|| {
            records
                .par_iter()
                .map(|r| {
                    let path = cache_file(&self.dir, &r.clip_id);
                    if up_to_date(&path, &r.path) {
                        return Ok(false);
                    }
                    let w = load_audio(&r.path, SAMPLE_RATE)?;
                    let f = extractor.extract(&w)?.with_clip(r.clip_id.clone());
                    write_feature_file(&path, &f)?;
                    Ok(true)
                })
                .collect::<Result<Vec<bool>>>()
        })?;
        let computed = done.iter().filter(|&&d| d).count();
        Ok(ExtractSummary {
            computed,
            skipped: done.len() - computed,
        })
    }

    fn load(&self, r: &ClipRecord) -> Result<FeatureMatrix> {
        let path = cache_file(&self.dir, &r.clip_id);
        if !path.exists() {
            return Err(Error::MissingFeature(r.clip_id.clone()));
        }
        Ok(read_feature_file(path)?.with_clip(r.clip_id.clone()))
    }
}

/// Computes the configured feature for every clip of the manifest's
/// variant. Entries newer than their audio are left alone.
pub fn cmd_extract(cfg: &ExperimentConfig) -> Result<ExtractSummary> {
    cfg.validate()?;
    let manifest = experiment_manifest(cfg)?;
    let extractor = Extractor::from_config(cfg)?;
    let cache = FeatureCache::open(cfg, &extractor)?;
    let records: Vec<&ClipRecord> = manifest.records.iter().collect();
    let summary = cache.fill(&extractor, &records, cfg.workers)?;
    log::info!(
        "{}: {} computed, {} up to date in {}",
        cfg.feature,
        summary.computed,
        summary.skipped,
        cache.dir.display()
    );
    Ok(summary)
}

fn labelled(cache: &FeatureCache, m: &Manifest, p: Partition) -> Result<Vec<(FeatureMatrix, Label)>> {
    m.partition(p).map(|r| Ok((cache.load(r)?, r.label))).collect()
}

/// Trains the configured head on Train, selecting the epoch by Val EER.
/// Writes `head.svdd`, its JSON sidecar and `history.json` to the output
/// directory.
pub fn cmd_train(cfg: &ExperimentConfig) -> Result<TrainedHead> {
    cfg.validate()?;
    let manifest = experiment_manifest(cfg)?;
    let extractor = Extractor::from_config(cfg)?;
    let cache = FeatureCache::open(cfg, &extractor)?;
    let needed: Vec<&ClipRecord> = manifest
        .records
        .iter()
        .filter(|r| matches!(r.partition, Partition::Train | Partition::Val))
        .collect();
    cache.fill(&extractor, &needed, cfg.workers)?;
    let train_set = labelled(&cache, &manifest, Partition::Train)?;
    let val_set = labelled(&cache, &manifest, Partition::Val)?;
    let trained = train(&cfg.head, &train_set, &val_set, &cfg.train_config())?;
    let out = cfg.out_dir()?;
    trained.save(out.join(HEAD_FILE))?;
    write_atomic(&out.join("history.json"), &json_bytes(&trained.history)?)?;
    Ok(trained)
}

/// Scores every non-empty partition with the trained head of the output
/// directory. Writes `scores/<partition>.csv`, `report.json` and
/// `report.csv`; identical inputs give byte-identical files.
pub fn cmd_eval(cfg: &ExperimentConfig) -> Result<EvalReport> {
    cfg.validate()?;
    let manifest = experiment_manifest(cfg)?;
    let out = cfg.out_dir()?;
    let trained = TrainedHead::load(out.join(HEAD_FILE))?;
    let extractor = Extractor::from_config(cfg)?;
    let cache = FeatureCache::open(cfg, &extractor)?;
    let all: Vec<&ClipRecord> = manifest.records.iter().collect();
    cache.fill(&extractor, &all, cfg.workers)?;

    let pool = pool(cfg.workers)?;
    let mut reports = Vec::new();
    for p in Partition::ALL {
        let records: Vec<&ClipRecord> = manifest.partition(p).collect();
        if records.is_empty() {
            continue;
        }
        let trials = pool.install(|| {
            records
                .par_iter()
                .map(|r| {
                    let x = trained.head.prepare(&cache.load(r)?)?;
                    let logits = trained.head.logits(&[&x])?[0];
                    ScoredTrial::new(r.clip_id.clone(), r.label, score_from_logits(logits))
                })
                .collect::<Result<Vec<_>>>()
        })?;
        write_scores(out.join("scores").join(format!("{p}.csv")), &trials)?;
        let report = partition_report(p, &trials)?;
        log::info!("{p}: EER {:.2}% ({} bonafide, {} deepfake)", report.eer_percent, report.bonafide, report.deepfake);
        reports.push(report);
    }
    let variant = serde_json::to_value(cfg.variant)?.as_str().unwrap_or_default().to_string();
    let report = EvalReport::new(&cfg.system_name(), &cfg.feature.to_string(), cfg.head.tag(), &variant, reports);
    write_atomic(&out.join(REPORT_FILE), &json_bytes(&report)?)?;
    write_atomic(&out.join("report.csv"), &figure_table_csv(std::slice::from_ref(&report))?)?;
    Ok(report)
}

const WIDE_COLUMNS: [&str; 7] = ["Train", "Val", "T01", "T02", "T03", "T04", "Average"];

/// Collects `report.json` from every run directory into figure data:
/// `figure_data.csv` (long format), `figure_data.json`, one wide table per
/// (variant, head) as `fig_<variant>_<head>.csv`, and, when baselines are
/// given, `comparison.csv` with absolute EER differences.
pub fn cmd_report(run_dirs: &[PathBuf], baselines: &[PathBuf], out: &Path) -> Result<Vec<EvalReport>> {
    if run_dirs.is_empty() {
        return Err(Error::Config("no run directories given".into()));
    }
    let mut reports = Vec::new();
    for dir in run_dirs {
        let path = dir.join(REPORT_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        reports.push(serde_json::from_str::<EvalReport>(&text)?);
    }
    write_atomic(&out.join("figure_data.csv"), &figure_table_csv(&reports)?)?;
    write_atomic(&out.join("figure_data.json"), &json_bytes(&reports)?)?;

    let mut groups: BTreeMap<(String, String), Vec<&EvalReport>> = BTreeMap::new();
    for r in &reports {
        groups.entry((r.variant.clone(), r.head.clone())).or_default().push(r);
    }
    for ((variant, head), rs) in &groups {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["feature"];
        header.extend(WIDE_COLUMNS);
        w.write_record(&header)?;
        for r in rs {
            let conds = r.conditions();
            let mut row = vec![r.feature.clone()];
            row.extend(WIDE_COLUMNS.iter().map(|c| conds.get(*c).map(|v| format!("{v:.4}")).unwrap_or_default()));
            w.write_record(&row)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
        write_atomic(&out.join(format!("fig_{variant}_{head}.csv")), &bytes)?;
    }

    if !baselines.is_empty() {
        let mut rows = Vec::new();
        for b in baselines {
            let quoted = QuotedBaseline::load(b)?;
            for r in &reports {
                for row in compare_with_quoted_baseline(r, &quoted)? {
                    rows.push((format!("{}/{}", r.variant, r.system), quoted.name.clone(), row));
                }
            }
        }
        write_atomic(&out.join("comparison.csv"), &comparison_csv(&rows)?)?;
    }
    Ok(reports)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectroSummary {
    pub frames: usize,
    pub bins: usize,
    /// Mean absolute frame-to-frame change of the normalized log-mel, a
    /// proxy for how abrupt spectral transitions are.
    pub spectral_flux: [f64; 2],
    pub files: [String; 2],
}

fn spectral_flux(m: &FeatureMatrix, frames: usize) -> f64 {
    if frames < 2 {
        return 0.0;
    }
    let mut total = 0.0;
    for t in 1..frames {
        total += m.row(t).iter().zip(m.row(t - 1)).map(|(a, b)| (a - b).abs() as f64).sum::<f64>();
    }
    total / ((frames - 1) * m.cols()) as f64
}

fn matrix_csv(m: &FeatureMatrix, frames: usize) -> Vec<u8> {
    let mut s = String::new();
    for t in 0..frames {
        let row: Vec<String> = m.row(t).iter().map(|v| format!("{v:.6}")).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s.into_bytes()
}

/// Writes time-aligned log-mel spectrograms of two clips (`a.feat`/`b.feat`
/// and CSV copies) plus `summary.json`.
pub fn cmd_spectro(a: &Path, b: &Path, out: &Path) -> Result<SpectroSummary> {
    let mels = [a, b]
        .iter()
        .map(|p| whisper_log_mel(&load_audio(p, SAMPLE_RATE)?))
        .collect::<Result<Vec<_>>>()?;
    let frames = mels[0].rows().min(mels[1].rows());
    let bins = mels[0].cols();
    for (m, name) in mels.iter().zip(["a", "b"]) {
        let trimmed = FeatureMatrix::new(m.values()[..frames * bins].to_vec(), frames, bins, m.frame_rate, m.kind)?;
        write_feature_file(out.join(format!("{name}.feat")), &trimmed)?;
        write_atomic(&out.join(format!("{name}.csv")), &matrix_csv(m, frames))?;
    }
    let summary = SpectroSummary {
        frames,
        bins,
        spectral_flux: [spectral_flux(&mels[0], frames), spectral_flux(&mels[1], frames)],
        files: [a.display().to_string(), b.display().to_string()],
    };
    write_atomic(&out.join("summary.json"), &json_bytes(&summary)?)?;
    Ok(summary)
}
