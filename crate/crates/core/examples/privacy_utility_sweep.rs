//! How the selected cluster size, record count and test AUC move with epsilon.
//!
//!     cargo run --release --example privacy_utility_sweep

use clustmix::data::{make_toy, SplitSpec, ToyKind};
use clustmix::eval::Metric;
use clustmix::pipeline::{run_experiment, Method, PrivacyTarget, SynthesisConfig};

fn main() -> clustmix::Result<()> {
    let data = make_toy(&ToyKind::Moons { noise: 0.1 }, 1000, 0)?;
    println!("{:>6} {:>9} {:>6} {:>8} {:>8} {:>8}", "eps", "sigma_max", "l_min", "records", "auc", "real");
    for eps in [0.1, 0.3, 1.0, 3.0, 10.0] {
        let cfg = SynthesisConfig { privacy: PrivacyTarget { epsilon: eps, delta: None }, ..SynthesisConfig::default() };
        let rep = run_experiment(&data, &cfg, SplitSpec::default(), Metric::Auc, &[Method::ClustMix])?;
        let r = &rep.results[0];
        println!(
            "{eps:>6} {:>9.4} {:>6} {:>8} {:>8.4} {:>8.4}",
            r.synthesis.sigma_max, r.synthesis.l_min, r.synthesis.record_count, r.utility.synthetic_score, r.utility.real_score
        );
    }
    Ok(())
}
