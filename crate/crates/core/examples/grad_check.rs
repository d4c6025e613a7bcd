//! Backpropagation against central finite differences for a small CNN and
//! a small ResNet.
//!
//!     cargo run --release --example grad_check

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use svdd::data::Label;
use svdd::heads::{grad_check, CnnHeadConfig, GradCheckReport, Head, HeadArch, ResNetConfig};

pub fn run_example() -> svdd::Result<Vec<GradCheckReport>> {
    let archs = [
        HeadArch::Cnn(CnnHeadConfig { channels: [2, 2], kernel_size: 5, input_rows: 8 }),
        HeadArch::ResNet(ResNetConfig { blocks_per_stage: [1, 1, 1, 1], widths: [2, 3, 4, 4], input_size: 32 }),
    ];
    let mut reports = Vec::new();
    for arch in archs {
        let head = Head::new(arch.clone(), 8, 1)?;
        let (h, w) = head.input_dims();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let inputs: Vec<Vec<f64>> = (0..4).map(|_| (0..h * w).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let labels = [Label::Bonafide, Label::Deepfake, Label::Deepfake, Label::Bonafide];
        let r = grad_check(&head, &inputs, &labels, 300, 3)?;
        println!(
            "{:<8} loss {:.4}: max rel error {:.2e} over {} parameters ({} skipped at kinks)",
            arch.tag(),
            r.loss,
            r.max_rel_error,
            r.checked,
            r.skipped
        );
        reports.push(r);
    }
    Ok(reports)
}

#[allow(dead_code)]
fn main() -> svdd::Result<()> {
    run_example().map(drop)
}
