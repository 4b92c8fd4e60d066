//! Train on synthetic, test on real, next to train on real.
//!
//!     cargo run --example utility_eval

use clustmix::data::{apply_scaler, fit_scaler, make_toy, split, SplitSpec, ToyKind};
use clustmix::eval::{auc_binary, auc_ovo_micro, evaluate_utility, Metric, TrainOptions};
use clustmix::pipeline::{synthesize, PrivacyTarget, SynthesisConfig};

fn main() -> clustmix::Result<()> {
    println!("hand check: auc = {}", auc_binary(&[0.1, 0.4, 0.35, 0.8], &[false, false, true, true])?);
    let probs = vec![vec![0.7, 0.2, 0.1], vec![0.2, 0.6, 0.2], vec![0.1, 0.3, 0.6]];
    println!("perfect 3-class ovo auc = {}", auc_ovo_micro(&probs, &[0, 1, 2])?);

    let raw = make_toy(&ToyKind::SkewedMultimodal { modes: 4, skew: 1.0 }, 1200, 5)?;
    let (train_raw, test_raw) = split(&raw, SplitSpec::default())?;
    let scaling = fit_scaler(&train_raw);
    let (train, test) = (apply_scaler(&train_raw, &scaling)?, apply_scaler(&test_raw, &scaling)?);

    for eps in [0.5, 2.0, 10.0] {
        let cfg = SynthesisConfig { privacy: PrivacyTarget { epsilon: eps, delta: None }, ..SynthesisConfig::default() };
        let synth = synthesize(&train, &cfg)?;
        for metric in [Metric::Auc, Metric::Accuracy] {
            let u = evaluate_utility(&train, synth.synthetic(), &test, metric, &TrainOptions::default(), 0)?;
            println!(
                "eps {eps:>4}: {metric:<8} real {:.3} synthetic {:.3} gap {:+.3} ({} records)",
                u.real_score, u.synthetic_score, u.gap, synth.record_count
            );
        }
    }
    Ok(())
}
