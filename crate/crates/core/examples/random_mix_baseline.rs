//! Cluster mixing against mixing random records at the same budget.
//!
//!     cargo run --release --example random_mix_baseline -- 1.0

use clustmix::data::{make_toy, SplitSpec, ToyKind};
use clustmix::eval::Metric;
use clustmix::pipeline::{run_experiment, Method, PrivacyTarget, SynthesisConfig};

fn main() -> clustmix::Result<()> {
    let eps: f64 = std::env::args().nth(1).map_or(1.0, |a| a.parse().expect("epsilon"));
    let methods = [Method::ClustMix, Method::RandomMix];
    let mut totals = [0.0; 2];
    let seeds = 0..5u64;
    for seed in seeds.clone() {
        let data = make_toy(&ToyKind::Moons { noise: 0.1 }, 1000, seed)?;
        let cfg = SynthesisConfig { privacy: PrivacyTarget { epsilon: eps, delta: None }, seed, ..SynthesisConfig::default() };
        let rep = run_experiment(&data, &cfg, SplitSpec { test_fraction: 0.25, seed }, Metric::Auc, &methods)?;
        print!("seed {seed}:");
        for (i, m) in methods.iter().enumerate() {
            let r = rep.result(*m).expect("method ran");
            totals[i] += r.utility.synthetic_score;
            print!("  {} auc {:.4} ({} records)", m.name(), r.utility.synthetic_score, r.synthesis.record_count);
        }
        println!();
    }
    let n = seeds.count() as f64;
    println!("mean auc: clustmix {:.4}, random-mix {:.4}", totals[0] / n, totals[1] / n);
    Ok(())
}
