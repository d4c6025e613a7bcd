//! Argument parsing for the `svdd` binary. Every flag can also come from an
//! `SVDD_`-prefixed environment variable; flags override the `--config` file.

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::data::{
    codec_augment, load_manifest, synth::{generate_surrogate, SurrogateConfig}, validate_against_reference,
    validate_with_counts, build_t03, CodecRegistry, Manifest, Partition,
};
use crate::error::{Error, Result};
use crate::heads::{CnnHeadConfig, HeadArch, ResNetConfig};

use super::{cmd_eval, cmd_extract, cmd_report, cmd_spectro, cmd_train, ExperimentConfig, SystemFeature};

#[derive(Debug, Parser)]
#[command(name = "svdd", version, about = "Singing-voice deepfake detection toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute and cache features for every manifest clip.
    Extract(ExperimentArgs),
    /// Train a classifier head on Train, selecting by Val EER.
    Train(ExperimentArgs),
    /// Score all partitions and write EER reports.
    Eval(ExperimentArgs),
    /// Merge run reports into figure tables and baseline comparisons.
    Report {
        /// Run directories containing report.json.
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        /// Quoted-baseline JSON files.
        #[arg(long = "baseline")]
        baselines: Vec<PathBuf>,
        #[arg(long, env = "SVDD_OUT")]
        out: PathBuf,
    },
    /// Write aligned log-mel spectrograms of two clips for comparison.
    Spectro {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, env = "SVDD_OUT")]
        out: PathBuf,
    },
    /// Run the built-in oracle checks.
    Selftest,
    /// Check manifest counts and singer overlap against the reference split.
    Validate {
        #[arg(long, env = "SVDD_MANIFEST")]
        manifest: PathBuf,
        /// JSON list of [partition, bonafide, deepfake] triples replacing
        /// the reference counts.
        #[arg(long)]
        counts: Option<PathBuf>,
        /// Where to write the JSON report (stdout otherwise).
        #[arg(long, env = "SVDD_OUT")]
        out: Option<PathBuf>,
    },
    /// Generate the synthetic surrogate corpus.
    Synth {
        #[arg(long, env = "SVDD_OUT")]
        out: PathBuf,
        #[arg(long, env = "SVDD_SEED", default_value_t = 0)]
        seed: u64,
        /// Surrogate configuration JSON.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Build T03 from the manifest's T02 clips through four codecs.
    T03 {
        #[arg(long, env = "SVDD_MANIFEST")]
        manifest: PathBuf,
        /// Codec configuration JSON (defaults to the built-in telephony set).
        #[arg(long)]
        codecs: Option<PathBuf>,
        /// Directory for the coded audio; the extended manifest is written
        /// next to it as manifest.csv.
        #[arg(long, env = "SVDD_OUT")]
        out: PathBuf,
        #[arg(long, env = "SVDD_WORKERS")]
        workers: Option<usize>,
    },
}

#[derive(Debug, Clone, Args)]
pub struct ExperimentArgs {
    #[arg(long, env = "SVDD_CONFIG")]
    pub config: Option<PathBuf>,
    #[arg(long, env = "SVDD_MANIFEST")]
    pub manifest: Option<PathBuf>,
    #[arg(long, env = "SVDD_WEIGHTS")]
    pub weights: Option<PathBuf>,
    #[arg(long, env = "SVDD_OUT")]
    pub out: Option<PathBuf>,
    #[arg(long, env = "SVDD_SEED")]
    pub seed: Option<u64>,
    #[arg(long, env = "SVDD_WORKERS")]
    pub workers: Option<usize>,
    /// W-Tiny, W-Base, W-Small, W-Med, W-Custom, MFCC, LFCC or CQCC.
    #[arg(long, env = "SVDD_FEATURE")]
    pub feature: Option<SystemFeature>,
    /// cnn or resnet34.
    #[arg(long, env = "SVDD_HEAD")]
    pub head: Option<String>,
}

impl ExperimentArgs {
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match (&self.config, self.feature) {
            (Some(path), _) => ExperimentConfig::load(path)?,
            (None, Some(f)) => ExperimentConfig::new(f),
            (None, None) => return Err(Error::Config("either --config or --feature is required".into())),
        };
        if let Some(f) = self.feature {
            cfg.feature = f;
        }
        if let Some(h) = &self.head {
            cfg.head = match h.to_ascii_lowercase().as_str() {
                "cnn" => HeadArch::Cnn(CnnHeadConfig::default()),
                "resnet34" | "resnet" => HeadArch::ResNet(ResNetConfig::default()),
                other => return Err(Error::Config(format!("unknown head `{other}`"))),
            };
        }
        cfg.manifest = self.manifest.clone().or(cfg.manifest);
        cfg.weights = self.weights.clone().or(cfg.weights);
        cfg.out_dir = self.out.clone().or(cfg.out_dir);
        cfg.seed = self.seed.unwrap_or(cfg.seed);
        cfg.workers = self.workers.or(cfg.workers);
        Ok(cfg)
    }
}

fn print_json<T: serde::Serialize>(v: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

/// Runs one parsed command. `Ok(false)` means a check ran and failed.
pub fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Extract(a) => print_json(&cmd_extract(&a.resolve()?)?)?,
        Command::Train(a) => {
            let t = cmd_train(&a.resolve()?)?;
            for e in &t.history {
                println!(
                    "epoch {:>3}  train loss {:.4}  val EER {:6.2}%",
                    e.epoch,
                    e.train_loss,
                    100.0 * e.val_eer
                );
            }
            println!("kept epoch {}", t.best_epoch);
        }
        Command::Eval(a) => {
            let r = cmd_eval(&a.resolve()?)?;
            for p in &r.partitions {
                println!("{:<6} EER {:6.2}%  ({} bonafide / {} deepfake)", p.partition.as_str(), p.eer_percent, p.bonafide, p.deepfake);
            }
            if let Some(avg) = r.average_test_eer_percent {
                println!("test average EER {avg:.2}%");
            }
        }
        Command::Report { runs, baselines, out } => {
            let reports = cmd_report(&runs, &baselines, &out)?;
            println!("{} reports merged into {}", reports.len(), out.display());
        }
        Command::Spectro { a, b, out } => print_json(&cmd_spectro(&a, &b, &out)?)?,
        Command::Selftest => {
            let rows = crate::selftest::run_selftest();
            print!("{}", crate::selftest::format_table(&rows));
            return Ok(rows.iter().all(|r| r.passed));
        }
        Command::Validate { manifest, counts, out } => {
            let m = load_manifest(&manifest)?;
            let report = match counts {
                Some(path) => {
                    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                    let counts: Vec<(Partition, usize, usize)> = serde_json::from_str(&text)?;
                    validate_with_counts(&m, &counts)
                }
                None => validate_against_reference(&m),
            };
            for v in &report.violations {
                eprintln!("{v}");
            }
            let json = serde_json::to_vec_pretty(&report)?;
            match out {
                Some(p) => crate::util::write_atomic(&p, &json)?,
                None => println!("{}", String::from_utf8_lossy(&json)),
            }
            return Ok(report.is_ok());
        }
        Command::Synth { out, seed, config } => {
            let mut cfg = match config {
                Some(p) => {
                    let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
                    serde_json::from_str(&text)?
                }
                None => SurrogateConfig::default(),
            };
            cfg.seed = seed;
            let m = generate_surrogate(&cfg, &out)?;
            println!("{} clips written to {}", m.records.len(), out.display());
        }
        Command::T03 { manifest, codecs, out, workers } => {
            let registry = match codecs {
                Some(p) => CodecRegistry::load(p)?,
                None => CodecRegistry::builtin(),
            };
            let m = load_manifest(&manifest)?;
            let t02: Vec<_> = m.partition(Partition::T02).cloned().collect();
            let t03 = build_t03(&t02, &registry.tags(), &out)?;
            std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(workers.unwrap_or(0))
                .build()
                .map_err(|e| Error::Config(e.to_string()))?;
            use rayon::prelude::*;
            let kept: Vec<_> = pool.install(|| {
                t03.par_iter()
                    .enumerate()
                    .filter_map(|(i, rec)| {
                        let src = &t02[i / registry.codecs.len()];
                        let coded = crate::audio::load_audio(&src.path, crate::features::SAMPLE_RATE)
                            .and_then(|w| codec_augment(&w, rec.codec.as_deref().unwrap_or_default(), &registry))
                            .and_then(|w| crate::audio::save_wav(&rec.path, &w));
                        match coded {
                            Ok(()) => Some(rec.clone()),
                            Err(e) => {
                                log::warn!("skipping {}: {e}", rec.clip_id);
                                None
                            }
                        }
                    })
                    .collect()
            });
            let skipped = t03.len() - kept.len();
            let mut records: Vec<_> = m.records.into_iter().filter(|r| r.partition != Partition::T03).collect();
            records.extend(kept);
            Manifest::new(records)?.save(out.join("manifest.csv"))?;
            println!("{} T03 clips written, {skipped} skipped", t03.len() - skipped);
            return Ok(skipped == 0);
        }
    }
    Ok(true)
}

/// Entry point used by the binary.
pub fn main_with_args(args: impl IntoIterator<Item = impl Into<OsString> + Clone>) -> ExitCode {
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
