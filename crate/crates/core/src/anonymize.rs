//! Anonymize stage: one noisy average per cluster.
//!
//! A synthetic record is `mean(members) + N(0, sigma^2 I)` clamped to
//! `[0, 1]^D`. Since members lie in the unit hypercube, replacing one member
//! moves the mean by at most `1 / l` per coordinate. Each cluster's noise
//! comes from its own stream of the seed, so the output does not depend on
//! evaluation order.

use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::approximate::ClusterSet;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::gdp::{CalibrationCache, PrivacyParams};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixConfig {
    /// Per-coordinate noise standard deviation; 0 disables noise.
    pub sigma: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub cluster: usize,
    pub l: usize,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticRecord {
    /// Clamped to `[0, 1]`.
    pub features: Vec<f64>,
    pub label: usize,
    pub provenance: Provenance,
}

/// Coordinate-wise mean, summed in the order given.
pub fn member_mean(members: &[&[f64]]) -> Result<Vec<f64>> {
    let first = members
        .first()
        .ok_or_else(|| Error::InvalidArgument("cannot mix an empty member set".into()))?;
    let dim = first.len();
    let mut mean = vec![0.0; dim];
    for m in members {
        if m.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: m.len(),
            });
        }
        for (acc, x) in mean.iter_mut().zip(m.iter()) {
            *acc += x;
        }
    }
    let l = members.len() as f64;
    mean.iter_mut().for_each(|v| *v /= l);
    Ok(mean)
}

fn add_noise(mut point: Vec<f64>, sigma: f64, seed: u64, stream: u64) -> Result<Vec<f64>> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!("sigma must be >= 0, got {sigma}")));
    }
    if sigma > 0.0 {
        let mut rng = rng::stream(seed, stream);
        for v in point.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v += sigma * z;
        }
    }
    point.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    Ok(point)
}

/// Averages `members` and adds noise from stream `cluster` of `cfg.seed`.
pub fn mix_cluster(members: &[&[f64]], label: usize, cluster: usize, cfg: MixConfig) -> Result<SyntheticRecord> {
    let mean = member_mean(members)?;
    Ok(SyntheticRecord {
        features: add_noise(mean, cfg.sigma, cfg.seed, cluster as u64)?,
        label,
        provenance: Provenance {
            cluster,
            l: members.len(),
            sigma: cfg.sigma,
        },
    })
}

/// Noisy release of `(1 - blend) * mean(members) + blend * adapted`.
pub fn mix_with_adapted(
    members: &[&[f64]],
    adapted: &[f64],
    blend: f64,
    label: usize,
    cluster: usize,
    cfg: MixConfig,
) -> Result<SyntheticRecord> {
    if !(0.0..=1.0).contains(&blend) {
        return Err(Error::InvalidArgument(format!("blend must lie in [0, 1], got {blend}")));
    }
    let mean = member_mean(members)?;
    if adapted.len() != mean.len() {
        return Err(Error::DimensionMismatch {
            expected: mean.len(),
            found: adapted.len(),
        });
    }
    let point = if blend == 0.0 {
        mean
    } else {
        mean.iter()
            .zip(adapted)
            .map(|(m, a)| (1.0 - blend) * m + blend * a.clamp(0.0, 1.0))
            .collect()
    };
    Ok(SyntheticRecord {
        features: add_noise(point, cfg.sigma, cfg.seed, cluster as u64)?,
        label,
        provenance: Provenance {
            cluster,
            l: members.len(),
            sigma: cfg.sigma,
        },
    })
}

/// Stream reserved for the baseline's shuffle so it never collides with a
/// record's noise stream.
const SHUFFLE_STREAM: u64 = u64::MAX;

/// Random mixing: `count` records, each averaging `l` distinct records drawn
/// without replacement across the whole output. The label is the majority
/// label of the mixed records (ties to the smaller class index).
pub fn random_mix_baseline(d: &Dataset, l: usize, count: usize, cfg: MixConfig) -> Result<Vec<SyntheticRecord>> {
    if l == 0 {
        return Err(Error::InvalidArgument("mixture size must be >= 1".into()));
    }
    if count.saturating_mul(l) > d.len() {
        return Err(Error::Infeasible(format!(
            "{count} records of {l} distinct rows need {} rows, only {} available",
            count.saturating_mul(l),
            d.len()
        )));
    }
    let mut order: Vec<usize> = (0..d.len()).collect();
    order.shuffle(&mut rng::stream(cfg.seed, SHUFFLE_STREAM));
    order
        .chunks_exact(l)
        .take(count)
        .enumerate()
        .map(|(i, chunk)| {
            let mut members = chunk.to_vec();
            members.sort_unstable();
            let rows: Vec<&[f64]> = members.iter().map(|&m| d.row(m)).collect();
            let mut votes = vec![0usize; d.class_count()];
            for &m in &members {
                votes[d.label(m)] += 1;
            }
            let label = (0..votes.len())
                .max_by(|&a, &b| votes[a].cmp(&votes[b]).then(b.cmp(&a)))
                .unwrap_or(0);
            mix_cluster(&rows, label, i, cfg)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnonymizeOutput {
    pub records: Vec<SyntheticRecord>,
    /// Clusters dropped because no noise level meets the target.
    pub skipped_clusters: Vec<usize>,
}

/// Inputs shared by every cluster of one anonymization run.
#[derive(Debug, Clone, Copy)]
pub struct AnonymizeParams<'a> {
    pub privacy: &'a PrivacyParams,
    pub sigma_max: f64,
    /// Weight of the adapted point against the member mean.
    pub blend: f64,
    pub seed: u64,
    pub cache: &'a CalibrationCache,
}

/// Emits one noisy record per cluster, with noise calibrated to the
/// cluster's own size. `adapted[i]` (if present) is the adapted support
/// point of cluster `i`.
pub fn anonymize(
    clusters: &ClusterSet,
    d: &Dataset,
    adapted: Option<&[Option<Vec<f64>>]>,
    params: AnonymizeParams<'_>,
) -> Result<AnonymizeOutput> {
    if let Some(points) = adapted {
        if points.len() != clusters.len() {
            return Err(Error::DimensionMismatch {
                expected: clusters.len(),
                found: points.len(),
            });
        }
    }
    let outcomes: Vec<Option<SyntheticRecord>> = clusters
        .clusters
        .par_iter()
        .enumerate()
        .map(|(id, cluster)| {
            let sigma = match params.cache.sigma(
                params.privacy.epsilon,
                params.privacy.delta,
                cluster.len() as u64,
                d.class_count(),
                d.n_features(),
            ) {
                Ok(s) => s,
                Err(Error::Infeasible(_)) => return Ok(None),
                Err(e) => return Err(e),
            };
            let rows: Vec<&[f64]> = cluster.members.iter().map(|&i| d.row(i)).collect();
            let cfg = MixConfig {
                sigma,
                seed: params.seed,
            };
            let record = match adapted.and_then(|a| a[id].as_deref()) {
                Some(point) => mix_with_adapted(&rows, point, params.blend, cluster.label, id, cfg)?,
                None => mix_cluster(&rows, cluster.label, id, cfg)?,
            };
            Ok(Some(record))
        })
        .collect::<Result<_>>()?;

    let mut out = AnonymizeOutput {
        records: Vec::new(),
        skipped_clusters: Vec::new(),
    };
    for (id, rec) in outcomes.into_iter().enumerate() {
        match rec {
            Some(r) => out.records.push(r),
            None => out.skipped_clusters.push(id),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::approximate::{approximate, ApproximateConfig, FitOptions};
    use crate::data::make_toy;
    use crate::gdp::{mechanism_delta, MechanismShape};

    #[test]
    fn zero_noise_average() {
        let m: [&[f64]; 3] = [&[0.0, 0.0], &[0.3, 0.6], &[0.6, 0.3]];
        let r = mix_cluster(&m, 1, 0, MixConfig { sigma: 0.0, seed: 0 }).unwrap();
        assert!((r.features[0] - 0.3).abs() < 1e-15 && (r.features[1] - 0.3).abs() < 1e-15);
        assert_eq!(r.label, 1);
        assert_eq!(r.provenance.l, 3);
    }

    #[test]
    fn single_member_identity() {
        let m: [&[f64]; 1] = [&[0.25, 0.75]];
        let r = mix_cluster(&m, 0, 4, MixConfig { sigma: 0.0, seed: 9 }).unwrap();
        assert_eq!(r.features, vec![0.25, 0.75]);
        assert!(mix_cluster(&[], 0, 0, MixConfig { sigma: 0.0, seed: 0 }).is_err());
    }

    #[test]
    fn noise_moments() {
        let sigma = 0.05;
        let m: [&[f64]; 1] = [&[0.5]];
        let n = 10_000;
        let draws: Vec<f64> = (0..n)
            .map(|i| mix_cluster(&m, 0, i, MixConfig { sigma, seed: 1 }).unwrap().features[0] - 0.5)
            .collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let std = (draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        assert!(mean.abs() < 4.0 * sigma / (n as f64).sqrt());
        assert!((std / sigma - 1.0).abs() < 0.03, "std {std}");
    }

    #[test]
    fn blend_reductions() {
        let m: [&[f64]; 2] = [&[0.2, 0.2], &[0.4, 0.6]];
        let cfg = MixConfig { sigma: 0.1, seed: 3 };
        let plain = mix_cluster(&m, 0, 5, cfg).unwrap();
        let blended = mix_with_adapted(&m, &[0.9, 0.9], 0.0, 0, 5, cfg).unwrap();
        assert_eq!(plain, blended);
        let exact = mix_with_adapted(&m, &[0.9, 0.1], 1.0, 0, 5, MixConfig { sigma: 0.0, seed: 3 }).unwrap();
        assert_eq!(exact.features, vec![0.9, 0.1]);
        let noisy = mix_with_adapted(&m, &[1.0, 0.0], 0.5, 0, 5, MixConfig { sigma: 3.0, seed: 3 }).unwrap();
        assert!(noisy.features.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn baseline_global_mean_and_disjointness() {
        let d = make_toy(&"moons".parse().unwrap(), 10, 2).unwrap();
        let d = crate::data::apply_scaler(&d, &crate::data::fit_scaler(&d)).unwrap();
        let all = random_mix_baseline(&d, 10, 1, MixConfig { sigma: 0.0, seed: 0 }).unwrap();
        let rows: Vec<&[f64]> = d.rows().collect();
        let mean = member_mean(&rows).unwrap();
        for (a, b) in all[0].features.iter().zip(&mean) {
            assert!((a - b).abs() < 1e-12);
        }
        // 5 of each class: tie goes to class 0
        assert_eq!(all[0].label, 0);
        assert!(random_mix_baseline(&d, 3, 4, MixConfig { sigma: 0.0, seed: 0 }).is_err());
    }

    #[test]
    fn anonymize_postconditions() {
        let d = make_toy(&"blobs".parse().unwrap(), 300, 1).unwrap();
        let d = crate::data::apply_scaler(&d, &crate::data::fit_scaler(&d)).unwrap();
        let privacy = PrivacyParams::new(1.0, 1.0 / 300.0).unwrap();
        let cache = CalibrationCache::new();
        let l_min = cache.min_mixture_size(1.0, privacy.delta, 0.2, 2, 2).unwrap() as usize;
        let set = approximate(
            &d,
            &ApproximateConfig {
                n_slices: 2,
                k_per_slice: None,
                l_min,
                seed: 4,
                fit: FitOptions::default(),
            },
        )
        .unwrap();
        let params = AnonymizeParams {
            privacy: &privacy,
            sigma_max: 0.2,
            blend: 1.0,
            seed: 8,
            cache: &cache,
        };
        let out = anonymize(&set, &d, None, params).unwrap();
        assert_eq!(out.records.len(), set.len());
        for r in &out.records {
            assert!(r.provenance.sigma <= 0.2);
            let shape = MechanismShape::new(r.provenance.l as u64, r.provenance.sigma, 2, 2).unwrap();
            assert!(mechanism_delta(1.0, &shape).unwrap() <= privacy.delta);
        }
        let mut by_size: Vec<_> = out.records.iter().map(|r| (r.provenance.l, r.provenance.sigma)).collect();
        by_size.sort_by_key(|&(l, _)| l);
        for w in by_size.windows(2) {
            if w[1].0 > w[0].0 {
                assert!(w[1].1 < w[0].1);
            }
        }
        assert_eq!(anonymize(&set, &d, None, params).unwrap(), out);
    }
}
