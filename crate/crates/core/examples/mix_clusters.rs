//! Anonymize: one noisy average per cluster, noise calibrated to each
//! cluster's size.
//!
//!     cargo run --example mix_clusters

use clustmix::anonymize::{anonymize, AnonymizeParams};
use clustmix::approximate::{approximate, ApproximateConfig, FitOptions};
use clustmix::data::{apply_scaler, fit_scaler, make_toy, ToyKind};
use clustmix::gdp::{CalibrationCache, PrivacyParams};

fn main() -> clustmix::Result<()> {
    let raw = make_toy(&ToyKind::Blobs { centers: [[0.0, 0.0], [1.0, 1.0]], std: 0.15 }, 500, 2)?;
    let data = apply_scaler(&raw, &fit_scaler(&raw))?;
    let privacy = PrivacyParams::new(1.0, 1.0 / data.len() as f64)?;
    let cache = CalibrationCache::new();
    let sigma_max = 0.1;
    let l_min = cache.min_mixture_size(privacy.epsilon, privacy.delta, sigma_max, 2, 2)? as usize;
    println!("target ({}, {:e}), sigma_max {sigma_max} needs clusters of >= {l_min}", privacy.epsilon, privacy.delta);

    let clusters = approximate(
        &data,
        &ApproximateConfig { n_slices: 1, k_per_slice: None, l_min, seed: 1, fit: FitOptions::default() },
    )?;
    let out = anonymize(
        &clusters,
        &data,
        None,
        AnonymizeParams { privacy: &privacy, sigma_max, blend: 1.0, seed: 4, cache: &cache },
    )?;
    for r in &out.records {
        println!("class {} l={:>3} sigma={:.4} -> {:.3?}", r.label, r.provenance.l, r.provenance.sigma, r.features);
    }
    Ok(())
}
