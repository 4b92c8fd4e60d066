//! End-to-end synthesis: Approximate, Adapt, Anonymize, then a sweep over
//! the noise cap `sigma_max` that keeps the candidate scoring best on the
//! real training data.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adapt::{adapt_points, matrix_from_rows, one_hot, AdaptConfig, KernelConfig};
use crate::anonymize::{anonymize, random_mix_baseline, AnonymizeParams, MixConfig, SyntheticRecord};
use crate::approximate::{approximate, ApproximateConfig, ApproximateDiagnostics, ClusterSet, FitOptions};
use crate::data::{apply_scaler, fit_scaler, split, Dataset, ScalingParams, SplitSpec};
use crate::error::{Error, Result};
use crate::eval::{evaluate_utility, score, train_on_present_classes, Metric, TrainOptions, UtilityReport};
use crate::gdp::{mechanism_delta, mechanism_mu, CalibrationCache, MechanismShape, PrivacyParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrivacyTarget {
    pub epsilon: f64,
    /// Defaults to `1 / T` for a training set of `T` rows.
    #[serde(default)]
    pub delta: Option<f64>,
}

impl Default for PrivacyTarget {
    fn default() -> Self {
        Self {
            epsilon: 1.0,
            delta: None,
        }
    }
}

pub fn default_sigma_grid() -> Vec<f64> {
    // 8 log-spaced values from 0.01 to 1
    (0..8).map(|i| 10f64.powf(-2.0 + 2.0 * i as f64 / 7.0)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthesisConfig {
    pub privacy: PrivacyTarget,
    pub n_slices: usize,
    /// Clusters per (slice, class); `None` lets the clustering pick.
    pub k_per_slice: Option<usize>,
    pub sigma_max_grid: Vec<f64>,
    /// Overrides `adapt.alpha` when set.
    pub alpha: Option<f64>,
    pub kernel: KernelConfig,
    pub adapt: AdaptConfig,
    /// Weight of the adapted point against the cluster mean before noise.
    pub blend: f64,
    pub fit: FitOptions,
    pub classifier: TrainOptions,
    /// Score used to pick among the `sigma_max` candidates.
    pub selection_metric: Metric,
    pub seed: u64,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        Self {
            privacy: PrivacyTarget::default(),
            n_slices: 2,
            k_per_slice: None,
            sigma_max_grid: default_sigma_grid(),
            alpha: None,
            kernel: KernelConfig::default(),
            adapt: AdaptConfig::default(),
            blend: 1.0,
            fit: FitOptions::default(),
            classifier: TrainOptions::default(),
            selection_metric: Metric::Accuracy,
            seed: 0,
        }
    }
}

impl SynthesisConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn effective_adapt(&self) -> AdaptConfig {
        AdaptConfig {
            alpha: self.alpha.unwrap_or(self.adapt.alpha),
            ..self.adapt
        }
    }

    pub fn delta_for(&self, rows: usize) -> f64 {
        self.privacy.delta.unwrap_or(1.0 / rows as f64)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sigma_max_grid.is_empty() {
            return Err(Error::InvalidArgument("sigma_max_grid must not be empty".into()));
        }
        if let Some(bad) = self.sigma_max_grid.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidArgument(format!(
                "sigma_max_grid values must be positive, got {bad}"
            )));
        }
        if self.n_slices == 0 {
            return Err(Error::InvalidArgument("n_slices must be >= 1".into()));
        }
        if self.k_per_slice == Some(0) {
            return Err(Error::InvalidArgument("k_per_slice must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.blend) {
            return Err(Error::InvalidArgument(format!("blend must lie in [0, 1], got {}", self.blend)));
        }
        self.kernel.validate()?;
        self.effective_adapt().validate()
    }

    fn adapt_enabled(&self) -> bool {
        let a = self.effective_adapt();
        a.alpha < 1.0 && a.max_steps > 0 && self.blend > 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ClustMix,
    /// Averages of randomly chosen records, one use per record.
    RandomMix,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::ClustMix => "clustmix",
            Method::RandomMix => "random-mix",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecordPrivacy {
    pub cluster: usize,
    pub l: usize,
    pub sigma: f64,
    pub mu: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealizedPrivacy {
    pub epsilon: f64,
    pub delta_target: f64,
    /// Largest per-record delta at `epsilon`. Clusters are disjoint, so this
    /// bounds the whole release.
    pub delta_max: f64,
    pub mu_max: f64,
    pub statement: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceAdaptSummary {
    pub slice: usize,
    pub clusters: usize,
    pub bandwidth: Option<f64>,
    pub ridge_lambda: Option<f64>,
    pub loss_trace: Vec<(usize, f64)>,
    /// Set when adaptation failed and the centroids were kept.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageDiagnostics {
    pub approximate: ApproximateDiagnostics,
    pub clusters: usize,
    pub adapt_ran: bool,
    pub adapt: Vec<SliceAdaptSummary>,
    pub skipped_clusters: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSummary {
    pub sigma_max: f64,
    pub l_min: Option<usize>,
    pub records: usize,
    pub score: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub metric: Metric,
    pub sigma_max: f64,
    pub score: f64,
    pub candidates: Vec<CandidateSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisReport {
    pub method: Method,
    #[serde(skip)]
    pub synthetic: Option<Dataset>,
    pub sigma_max: f64,
    pub l_min: usize,
    pub record_count: usize,
    pub realized_privacy: RealizedPrivacy,
    pub records: Vec<RecordPrivacy>,
    pub diagnostics: Option<StageDiagnostics>,
    pub selection: Option<Selection>,
    pub caveats: Vec<String>,
}

impl SynthesisReport {
    pub fn synthetic(&self) -> &Dataset {
        self.synthetic.as_ref().expect("synthetic data is attached to fresh reports")
    }
}

const CAVEAT_SCALING: &str =
    "min-max scaling bounds come from the raw data and are not privatized";
const CAVEAT_SELECTION: &str =
    "choosing sigma_max by accuracy on the real training data spends privacy budget that is not accounted for";
const CAVEAT_ADAPT: &str =
    "adapted points depend on every record of their slice; their cost is covered only through the class-count factor in mu";

fn check_input(train: &Dataset) -> Result<()> {
    if !train.is_unit_scaled() {
        return Err(Error::InvalidArgument(
            "training data must be scaled to [0, 1] before synthesis".into(),
        ));
    }
    Ok(())
}

fn l_min_for(train: &Dataset, cfg: &SynthesisConfig, sigma_max: f64, cache: &CalibrationCache) -> Result<usize> {
    let delta = cfg.delta_for(train.len());
    let l = cache.min_mixture_size(
        cfg.privacy.epsilon,
        delta,
        sigma_max,
        train.class_count(),
        train.n_features(),
    )?;
    if l as usize > train.len() {
        return Err(Error::Infeasible(format!(
            "sigma_max {sigma_max} needs clusters of {l} records but only {} rows exist",
            train.len()
        )));
    }
    Ok(l as usize)
}

/// Adapted point per cluster id, `None` where nothing was adapted.
type AdaptedPoints = Vec<Option<Vec<f64>>>;

/// Adapts the centroids of every slice; returns one optional point per
/// cluster plus per-slice summaries.
fn adapt_clusters(
    train: &Dataset,
    clusters: &ClusterSet,
    cfg: &SynthesisConfig,
) -> Result<(AdaptedPoints, Vec<SliceAdaptSummary>)> {
    let acfg = cfg.effective_adapt();
    type SliceOutput = (Vec<(usize, Vec<f64>)>, SliceAdaptSummary);
    let per_slice: Vec<SliceOutput> = clusters
        .slices
        .par_iter()
        .enumerate()
        .filter_map(|(s, slice)| {
            let ids: Vec<usize> = (0..clusters.len()).filter(|&i| clusters.clusters[i].slice == s).collect();
            if ids.is_empty() {
                return None;
            }
            Some((s, slice, ids))
        })
        .map(|(s, slice, ids)| {
            let target: Vec<&[f64]> = slice.row_indices.iter().map(|&i| train.row(i)).collect();
            let target_labels: Vec<usize> = slice.row_indices.iter().map(|&i| train.label(i)).collect();
            let centroids: Vec<Vec<f64>> = ids
                .iter()
                .map(|&i| {
                    let members: Vec<&[f64]> = clusters.clusters[i].members.iter().map(|&m| train.row(m)).collect();
                    crate::anonymize::member_mean(&members)
                })
                .collect::<Result<_>>()?;
            let centroid_refs: Vec<&[f64]> = centroids.iter().map(Vec::as_slice).collect();
            let support_labels: Vec<usize> = ids.iter().map(|&i| clusters.clusters[i].label).collect();
            let xt = matrix_from_rows(&target)?;
            let yt = one_hot(&target_labels, train.class_count());
            let xs = matrix_from_rows(&centroid_refs)?;
            let ys = one_hot(&support_labels, train.class_count());
            let mut summary = SliceAdaptSummary {
                slice: s,
                clusters: ids.len(),
                bandwidth: None,
                ridge_lambda: None,
                loss_trace: Vec::new(),
                error: None,
            };
            let points = match adapt_points(&xt, &yt, &xs, &ys, &cfg.kernel, &acfg) {
                Ok(res) => {
                    summary.bandwidth = Some(res.bandwidth);
                    summary.ridge_lambda = Some(res.ridge_lambda);
                    summary.loss_trace = res.loss_trace;
                    rows_of(&res.support_points)
                }
                Err(Error::Factorization { lambda }) => {
                    summary.error = Some(format!("kernel system singular up to lambda {lambda:e}; kept centroids"));
                    centroids
                }
                Err(e) => return Err(e),
            };
            Ok((ids.into_iter().zip(points).collect(), summary))
        })
        .collect::<Result<_>>()?;

    let mut adapted = vec![None; clusters.len()];
    let mut summaries = Vec::with_capacity(per_slice.len());
    for (points, summary) in per_slice {
        for (id, p) in points {
            adapted[id] = Some(p);
        }
        summaries.push(summary);
    }
    Ok((adapted, summaries))
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn assemble(
    method: Method,
    train: &Dataset,
    cfg: &SynthesisConfig,
    sigma_max: f64,
    l_min: usize,
    records: Vec<SyntheticRecord>,
    diagnostics: Option<StageDiagnostics>,
) -> Result<SynthesisReport> {
    if records.is_empty() {
        return Err(Error::Infeasible(format!(
            "no synthetic records at sigma_max {sigma_max} (clusters need at least {l_min} records)"
        )));
    }
    let eps = cfg.privacy.epsilon;
    let delta_target = cfg.delta_for(train.len());
    let (c, d) = (train.class_count(), train.n_features());
    let privacy: Vec<RecordPrivacy> = records
        .iter()
        .map(|r| {
            let shape = MechanismShape::new(r.provenance.l as u64, r.provenance.sigma, d, c)?;
            Ok(RecordPrivacy {
                cluster: r.provenance.cluster,
                l: r.provenance.l,
                sigma: r.provenance.sigma,
                mu: mechanism_mu(&shape)?,
                delta: mechanism_delta(eps, &shape)?,
            })
        })
        .collect::<Result<_>>()?;
    let delta_max = privacy.iter().map(|p| p.delta).fold(0.0, f64::max);
    let mu_max = privacy.iter().map(|p| p.mu).fold(0.0, f64::max);
    if delta_max > delta_target {
        return Err(Error::Numerical(format!(
            "record delta {delta_max:e} exceeds target {delta_target:e}"
        )));
    }
    let rows: Vec<Vec<f64>> = records.iter().map(|r| r.features.clone()).collect();
    let labels: Vec<usize> = records.iter().map(|r| r.label).collect();
    let synthetic = Dataset::from_rows(&rows, labels, c)?;
    let mut caveats = vec![CAVEAT_SCALING.to_string()];
    if diagnostics.as_ref().is_some_and(|d| d.adapt_ran) {
        caveats.push(CAVEAT_ADAPT.to_string());
    }
    Ok(SynthesisReport {
        method,
        record_count: synthetic.len(),
        synthetic: Some(synthetic),
        sigma_max,
        l_min,
        realized_privacy: RealizedPrivacy {
            epsilon: eps,
            delta_target,
            delta_max,
            mu_max,
            statement: format!("({eps}, {delta_target:e})-DP; every record satisfies delta <= {delta_max:e}"),
        },
        records: privacy,
        diagnostics,
        selection: None,
        caveats,
    })
}

/// ClustMix at a single noise cap.
pub fn synthesize_once(train: &Dataset, cfg: &SynthesisConfig, sigma_max: f64) -> Result<SynthesisReport> {
    synthesize_once_cached(train, cfg, sigma_max, &CalibrationCache::new())
}

fn synthesize_once_cached(
    train: &Dataset,
    cfg: &SynthesisConfig,
    sigma_max: f64,
    cache: &CalibrationCache,
) -> Result<SynthesisReport> {
    cfg.validate()?;
    check_input(train)?;
    let l_min = l_min_for(train, cfg, sigma_max, cache)?;
    let clusters = approximate(
        train,
        &ApproximateConfig {
            n_slices: cfg.n_slices,
            k_per_slice: cfg.k_per_slice,
            l_min,
            seed: cfg.seed,
            fit: cfg.fit,
        },
    )?;
    let adapt_ran = cfg.adapt_enabled() && !clusters.is_empty();
    let (adapted, adapt_summaries) = if adapt_ran {
        adapt_clusters(train, &clusters, cfg)?
    } else {
        (Vec::new(), Vec::new())
    };
    let privacy = PrivacyParams::new(cfg.privacy.epsilon, cfg.delta_for(train.len()))?;
    let out = anonymize(
        &clusters,
        train,
        adapt_ran.then_some(adapted.as_slice()),
        AnonymizeParams {
            privacy: &privacy,
            sigma_max,
            blend: cfg.blend,
            seed: cfg.seed,
            cache,
        },
    )?;
    let diagnostics = StageDiagnostics {
        approximate: clusters.diagnostics.clone(),
        clusters: clusters.len(),
        adapt_ran,
        adapt: adapt_summaries,
        skipped_clusters: out.skipped_clusters,
    };
    assemble(Method::ClustMix, train, cfg, sigma_max, l_min, out.records, Some(diagnostics))
}

/// Random mixing at a single noise cap: `floor(T / l_min)` averages of
/// `l_min` disjoint random records.
pub fn random_mix_once(train: &Dataset, cfg: &SynthesisConfig, sigma_max: f64) -> Result<SynthesisReport> {
    random_mix_once_cached(train, cfg, sigma_max, &CalibrationCache::new())
}

fn random_mix_once_cached(
    train: &Dataset,
    cfg: &SynthesisConfig,
    sigma_max: f64,
    cache: &CalibrationCache,
) -> Result<SynthesisReport> {
    cfg.validate()?;
    check_input(train)?;
    let l_min = l_min_for(train, cfg, sigma_max, cache)?;
    let sigma = cache.sigma(
        cfg.privacy.epsilon,
        cfg.delta_for(train.len()),
        l_min as u64,
        train.class_count(),
        train.n_features(),
    )?;
    let records = random_mix_baseline(
        train,
        l_min,
        train.len() / l_min,
        MixConfig { sigma, seed: cfg.seed },
    )?;
    assemble(Method::RandomMix, train, cfg, sigma_max, l_min, records, None)
}

/// Runs `method` at every grid value and keeps the candidate whose
/// classifier scores best on `train` under `cfg.selection_metric`; ties go
/// to the smaller
/// `sigma_max`.
pub fn synthesize_with(train: &Dataset, cfg: &SynthesisConfig, method: Method) -> Result<SynthesisReport> {
    cfg.validate()?;
    check_input(train)?;
    let cache = CalibrationCache::new();
    let outcomes: Vec<Result<(SynthesisReport, f64)>> = cfg
        .sigma_max_grid
        .par_iter()
        .map(|&s| {
            let report = match method {
                Method::ClustMix => synthesize_once_cached(train, cfg, s, &cache)?,
                Method::RandomMix => random_mix_once_cached(train, cfg, s, &cache)?,
            };
            let model = train_on_present_classes(report.synthetic(), &cfg.classifier, cfg.seed)?;
            let score = score(&model, train, cfg.selection_metric)?;
            Ok((report, score))
        })
        .collect();

    let mut candidates = Vec::with_capacity(outcomes.len());
    let mut best: Option<(SynthesisReport, f64)> = None;
    for (&s, outcome) in cfg.sigma_max_grid.iter().zip(outcomes) {
        match outcome {
            Ok((report, score)) => {
                candidates.push(CandidateSummary {
                    sigma_max: s,
                    l_min: Some(report.l_min),
                    records: report.record_count,
                    score: Some(score),
                    error: None,
                });
                let better = match &best {
                    None => true,
                    Some((b, bs)) => score > *bs || (score == *bs && s < b.sigma_max),
                };
                if better {
                    best = Some((report, score));
                }
            }
            Err(Error::Infeasible(msg)) => candidates.push(CandidateSummary {
                sigma_max: s,
                l_min: None,
                records: 0,
                score: None,
                error: Some(msg),
            }),
            Err(e) => return Err(e),
        }
    }
    let (mut report, score) = best.ok_or_else(|| {
        let reasons: Vec<String> = candidates.iter().filter_map(|c| c.error.clone()).collect();
        Error::Infeasible(format!("every sigma_max in the grid is infeasible: {}", reasons.join("; ")))
    })?;
    report.selection = Some(Selection {
        metric: cfg.selection_metric,
        sigma_max: report.sigma_max,
        score,
        candidates,
    });
    report.caveats.push(CAVEAT_SELECTION.to_string());
    Ok(report)
}

/// ClustMix with the `sigma_max` sweep.
pub fn synthesize(train: &Dataset, cfg: &SynthesisConfig) -> Result<SynthesisReport> {
    synthesize_with(train, cfg, Method::ClustMix)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub method: Method,
    pub synthesis: SynthesisReport,
    pub utility: UtilityReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub rows: usize,
    pub train_rows: usize,
    pub test_rows: usize,
    pub split: SplitSpec,
    pub scaling: ScalingParams,
    pub metric: Metric,
    pub results: Vec<MethodResult>,
}

impl ExperimentReport {
    pub fn result(&self, method: Method) -> Option<&MethodResult> {
        self.results.iter().find(|r| r.method == method)
    }
}

/// Split, scale on the training part, synthesize with each method and
/// score every synthetic set on the held-out real rows.
pub fn run_experiment(
    data: &Dataset,
    cfg: &SynthesisConfig,
    split_spec: SplitSpec,
    metric: Metric,
    methods: &[Method],
) -> Result<ExperimentReport> {
    let (train_raw, test_raw) = split(data, split_spec)?;
    let scaling = fit_scaler(&train_raw);
    let train = apply_scaler(&train_raw, &scaling)?;
    let test = apply_scaler(&test_raw, &scaling)?;
    let mut results = Vec::with_capacity(methods.len());
    for &method in methods {
        let synthesis = synthesize_with(&train, cfg, method)?;
        let utility = evaluate_utility(&train, synthesis.synthetic(), &test, metric, &cfg.classifier, cfg.seed)?;
        results.push(MethodResult {
            method,
            synthesis,
            utility,
        });
    }
    Ok(ExperimentReport {
        rows: data.len(),
        train_rows: train.len(),
        test_rows: test.len(),
        split: split_spec,
        scaling,
        metric,
        results,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::make_toy;

    fn scaled(kind: &str, n: usize, seed: u64) -> Dataset {
        let d = make_toy(&kind.parse().unwrap(), n, seed).unwrap();
        apply_scaler(&d, &fit_scaler(&d)).unwrap()
    }

    #[test]
    fn default_grid_is_log_spaced() {
        let g = default_sigma_grid();
        assert_eq!(g.len(), 8);
        assert!((g[0] - 0.01).abs() < 1e-15 && (g[7] - 1.0).abs() < 1e-12);
        for w in g.windows(2) {
            assert!((w[1] / w[0] - 10f64.powf(2.0 / 7.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn config_json_rejects_unknown_keys() {
        assert!(SynthesisConfig::from_json(r#"{"privacy": {"epsilon": 2}, "seed": 3}"#).is_ok());
        assert!(SynthesisConfig::from_json(r#"{"sigma": 1}"#).is_err());
        assert!(SynthesisConfig::from_json(r#"{"adapt": {"alpha": 0.5, "beta": 1}}"#).is_err());
        assert!(SynthesisConfig::from_json(r#"{"sigma_max_grid": []}"#).is_err());
        assert!(SynthesisConfig::from_json(r#"{"sigma_max_grid": [0.1, -1]}"#).is_err());
        let cfg = SynthesisConfig::from_json(r#"{"alpha": 1.0, "adapt": {"alpha": 0.2}}"#).unwrap();
        assert_eq!(cfg.effective_adapt().alpha, 1.0);
    }

    #[test]
    fn degenerate_run_is_noisy_global_mean() {
        let rows: Vec<Vec<f64>> = (0..500).map(|i| vec![i as f64 / 499.0, 1.0 - i as f64 / 499.0]).collect();
        let d = Dataset::from_rows(&rows, vec![0; 500], 1).unwrap();
        let cfg = SynthesisConfig {
            privacy: PrivacyTarget {
                epsilon: 10.0,
                delta: None,
            },
            n_slices: 1,
            k_per_slice: Some(1),
            sigma_max_grid: vec![0.01],
            alpha: Some(1.0),
            ..SynthesisConfig::default()
        };
        let r = synthesize_once(&d, &cfg, 0.01).unwrap();
        assert_eq!(r.record_count, 1);
        assert_eq!(r.records[0].l, 500);
        let x = r.synthetic().row(0);
        assert!((x[0] - 0.5).abs() < 0.05 && (x[1] - 0.5).abs() < 0.05);
        assert!(!r.diagnostics.unwrap().adapt_ran);
    }

    #[test]
    fn records_meet_target_and_count_bound() {
        let d = scaled("blobs", 300, 2);
        let cfg = SynthesisConfig::default();
        let r = synthesize(&d, &cfg).unwrap();
        assert!(r.record_count <= d.len() / r.l_min);
        for p in &r.records {
            assert!(p.delta <= r.realized_privacy.delta_target);
            assert!(p.l >= r.l_min && p.sigma <= r.sigma_max);
        }
        let sel = r.selection.as_ref().unwrap();
        for c in &sel.candidates {
            if let Some(s) = c.score {
                assert!(s <= sel.score);
            }
        }
        assert!(r.caveats.iter().any(|c| c.contains("sigma_max")));
    }

    #[test]
    fn single_point_grid_matches_once() {
        let d = scaled("moons", 200, 4);
        let cfg = SynthesisConfig {
            sigma_max_grid: vec![0.3],
            ..SynthesisConfig::default()
        };
        let swept = synthesize(&d, &cfg).unwrap();
        let once = synthesize_once(&d, &cfg, 0.3).unwrap();
        assert_eq!(swept.synthetic, once.synthetic);
        assert_eq!(swept.records, once.records);
    }

    #[test]
    fn stricter_budget_gives_fewer_records() {
        let d = scaled("moons", 400, 1);
        let run = |eps: f64| {
            let cfg = SynthesisConfig {
                privacy: PrivacyTarget { epsilon: eps, delta: None },
                ..SynthesisConfig::default()
            };
            synthesize_once(&d, &cfg, 0.2).unwrap()
        };
        let (loose, tight) = (run(10.0), run(0.1));
        assert!(tight.l_min > loose.l_min);
        assert!(tight.record_count < loose.record_count);
    }

    #[test]
    fn all_infeasible_grid_errors() {
        let d = scaled("blobs", 40, 0);
        let cfg = SynthesisConfig {
            privacy: PrivacyTarget {
                epsilon: 0.01,
                delta: Some(1e-9),
            },
            sigma_max_grid: vec![0.01, 0.02],
            ..SynthesisConfig::default()
        };
        assert!(matches!(synthesize(&d, &cfg), Err(Error::Infeasible(_))));
    }

    #[test]
    fn unscaled_input_is_rejected() {
        let d = make_toy(&"moons".parse().unwrap(), 100, 0).unwrap();
        assert!(synthesize(&d, &SynthesisConfig::default()).is_err());
    }

    #[test]
    fn baseline_uses_one_size() {
        let d = scaled("moons", 300, 3);
        let r = synthesize_with(&d, &SynthesisConfig::default(), Method::RandomMix).unwrap();
        assert!(r.records.iter().all(|p| p.l == r.l_min));
        assert_eq!(r.record_count, d.len() / r.l_min);
    }

    #[test]
    fn reruns_are_identical() {
        let d = scaled("moons", 300, 9);
        let cfg = SynthesisConfig {
            seed: 5,
            ..SynthesisConfig::default()
        };
        let a = synthesize(&d, &cfg).unwrap();
        let b = synthesize(&d, &cfg).unwrap();
        assert_eq!(a.synthetic, b.synthetic);
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }
}
