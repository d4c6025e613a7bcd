//! Trains the CNN head on two Gaussian blobs of feature maps and saves it.
//!
//!     cargo run --release --example train_head

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use svdd::data::Label;
use svdd::heads::{train, CnnHeadConfig, HeadArch, TrainConfig, TrainedHead};
use svdd::{FeatureKind, FeatureMatrix};

fn blobs(n: usize, seed: u64) -> Vec<(FeatureMatrix, Label)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.0).unwrap();
    (0..n)
        .map(|i| {
            let label = if i % 2 == 0 { Label::Bonafide } else { Label::Deepfake };
            let centre = if label == Label::Bonafide { 0.6 } else { -0.6 };
            let values = (0..16 * 8).map(|_| centre + noise.sample(&mut rng) as f32).collect();
            (FeatureMatrix::new(values, 16, 8, 50.0, FeatureKind::Mfcc).unwrap(), label)
        })
        .collect()
}

pub fn run_example() -> svdd::Result<TrainedHead> {
    let arch = HeadArch::Cnn(CnnHeadConfig { channels: [4, 8], kernel_size: 5, input_rows: 16 });
    let cfg = TrainConfig { max_epochs: 5, batch_size: 16, seed: 1, ..Default::default() };
    let trained = train(&arch, &blobs(160, 1), &blobs(60, 2), &cfg)?;
    println!("initial train loss {:.4}", trained.initial_train_loss);
    for e in &trained.history {
        println!("epoch {}: train loss {:.4}, val EER {:.2}%", e.epoch, e.train_loss, 100.0 * e.val_eer);
    }
    let dir = tempfile::tempdir().map_err(|e| svdd::Error::Config(e.to_string()))?;
    let path = dir.path().join("head.svdd");
    trained.save(&path)?;
    let reloaded = TrainedHead::load(&path)?;
    let probe = &blobs(1, 9)[0].0;
    // The archive stores f32, so reloaded scores agree to single precision.
    let drift = (reloaded.score(probe)? - trained.score(probe)?).abs();
    println!("kept epoch {}; reloaded score drift {drift:.1e}", trained.best_epoch);
    Ok(trained)
}

#[allow(dead_code)]
fn main() -> svdd::Result<()> {
    run_example().map(drop)
}
