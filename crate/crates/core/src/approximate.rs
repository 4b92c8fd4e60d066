//! Approximate stage: random slicing plus size-constrained clustering.
//!
//! Every record lands in exactly one slice and, within it, in at most one
//! cluster, and every cluster holds at least `l_min` records of a single
//! class. Clusters are fitted by hard-assignment EM on an isotropic Gaussian
//! mixture whose size prior is a step function (zero below `l_min`, flat
//! above), so the objective maximized is
//!
//! ```text
//! J(Z, theta) = sum_n [ ln pi_{z_n} + ln N(x_n | m_{z_n}, v_{z_n} I) ]
//! ```
//!
//! over assignments `Z` with every cluster size `>= l_min`.

use rand::seq::index;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng;

/// Smallest component variance.
pub const VARIANCE_FLOOR: f64 = 1e-9;

/// Rows whose value of `feature` falls in `(lower, upper]` (the first slice
/// also includes its lower bound).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slice {
    pub row_indices: Vec<usize>,
    pub feature: usize,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmComponent {
    pub mean: Vec<f64>,
    /// Isotropic variance, at least [`VARIANCE_FLOOR`].
    pub variance: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    /// Global row indices, ascending.
    pub members: Vec<usize>,
    pub component: GmmComponent,
    pub label: usize,
    /// Index into [`ClusterSet::slices`].
    pub slice: usize,
}

impl Cluster {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitMethod {
    Gmm,
    KMeans,
}

/// Clusters over local row indices `0..n` of the fitted points.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterFragment {
    pub members: Vec<Vec<usize>>,
    pub components: Vec<GmmComponent>,
    /// Objective after every EM iteration (log-likelihood for GMM, negative
    /// within-cluster sum of squares for k-means).
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub method: FitMethod,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedGroup {
    pub slice: usize,
    pub class: usize,
    pub rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub slice: usize,
    pub class: usize,
    pub rows: usize,
    pub k: usize,
    pub method: FitMethod,
    pub iterations: usize,
    pub converged: bool,
    pub final_objective: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ApproximateDiagnostics {
    pub skipped: Vec<SkippedGroup>,
    pub fits: Vec<FitSummary>,
    /// Groups where the GMM fit failed and constrained k-means was used.
    pub fallbacks: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSet {
    pub clusters: Vec<Cluster>,
    pub slices: Vec<Slice>,
    pub min_size: usize,
    pub diagnostics: ApproximateDiagnostics,
}

impl ClusterSet {
    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }
}

/// EM iteration controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iter: 100,
            tol: 1e-8,
        }
    }
}

/// Slices rows along one randomly chosen feature at `n_slices - 1` cutoffs
/// drawn from that feature's observed values. Empty slices are dropped.
pub fn random_slice(d: &Dataset, n_slices: usize, seed: u64) -> Result<Vec<Slice>> {
    if n_slices == 0 {
        return Err(Error::InvalidArgument("n_slices must be >= 1".into()));
    }
    let mut rng = rng::seeded(seed);
    let feature = rng.random_range(0..d.n_features());
    let n_cuts = (n_slices - 1).min(d.len());
    let cutoffs: Vec<f64> = index::sample(&mut rng, d.len(), n_cuts)
        .into_iter()
        .map(|i| d.row(i)[feature])
        .collect();
    Ok(slice_by_cutoffs(d, feature, &cutoffs))
}

/// Partitions rows by `feature` into `(-inf, c1], (c1, c2], ..., (c_m, +inf)`.
pub fn slice_by_cutoffs(d: &Dataset, feature: usize, cutoffs: &[f64]) -> Vec<Slice> {
    let mut cuts = cutoffs.to_vec();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut buckets = vec![Vec::new(); cuts.len() + 1];
    for (i, row) in d.rows().enumerate() {
        let x = row[feature];
        buckets[cuts.partition_point(|&c| c < x)].push(i);
    }
    buckets
        .into_iter()
        .enumerate()
        .filter(|(_, rows)| !rows.is_empty())
        .map(|(b, row_indices)| Slice {
            row_indices,
            feature,
            lower: if b == 0 { f64::NEG_INFINITY } else { cuts[b - 1] },
            upper: cuts.get(b).copied().unwrap_or(f64::INFINITY),
        })
        .collect()
}

/// Assigns `n` points to `k` clusters maximizing `scores` (row-major `n x k`,
/// higher is better) subject to every cluster receiving at least `l_min`
/// points.
///
/// Point-cluster pairs are visited in decreasing score order; a point joins a
/// cluster unless doing so would leave too few unassigned points to fill the
/// remaining deficits. Single-point moves that raise the total score without
/// breaking the size constraint are then applied until none remain.
pub fn constrained_assignment(scores: &[f64], n: usize, k: usize, l_min: usize) -> Result<Vec<usize>> {
    check_feasible(n, k, l_min)?;
    if scores.len() != n * k {
        return Err(Error::DimensionMismatch {
            expected: n * k,
            found: scores.len(),
        });
    }
    let mut pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..k).map(move |c| (i, c))).collect();
    pairs.sort_by(|&(i, a), &(j, b)| {
        scores[j * k + b]
            .total_cmp(&scores[i * k + a])
            .then(i.cmp(&j))
            .then(a.cmp(&b))
    });

    let mut assignment = vec![usize::MAX; n];
    let mut sizes = vec![0usize; k];
    let mut unassigned = n;
    let mut deficit = k * l_min;
    for (i, c) in pairs {
        if assignment[i] != usize::MAX {
            continue;
        }
        let fills_deficit = sizes[c] < l_min;
        if !fills_deficit && unassigned - 1 < deficit {
            continue;
        }
        assignment[i] = c;
        sizes[c] += 1;
        unassigned -= 1;
        if fills_deficit {
            deficit -= 1;
        }
        if unassigned == 0 {
            break;
        }
    }
    debug_assert!(assignment.iter().all(|&c| c < k));
    refine_assignment(scores, k, l_min, &mut assignment);
    Ok(assignment)
}

/// Greedy single-point moves that strictly improve the score sum.
fn refine_assignment(scores: &[f64], k: usize, l_min: usize, assignment: &mut [usize]) {
    let mut sizes = vec![0usize; k];
    for &c in assignment.iter() {
        sizes[c] += 1;
    }
    for _ in 0..50 {
        let mut moved = false;
        for (i, slot) in assignment.iter_mut().enumerate() {
            let from = *slot;
            if sizes[from] <= l_min {
                continue;
            }
            let row = &scores[i * k..(i + 1) * k];
            let best = (0..k).max_by(|&a, &b| row[a].total_cmp(&row[b]).then(b.cmp(&a)));
            if let Some(to) = best {
                if row[to] > row[from] {
                    *slot = to;
                    sizes[from] -= 1;
                    sizes[to] += 1;
                    moved = true;
                }
            }
        }
        if !moved {
            break;
        }
    }
}

fn check_feasible(n: usize, k: usize, l_min: usize) -> Result<()> {
    if k == 0 || l_min == 0 {
        return Err(Error::InvalidArgument("k and l_min must be >= 1".into()));
    }
    if k.saturating_mul(l_min) > n {
        return Err(Error::Infeasible(format!(
            "{k} clusters of at least {l_min} records need {} rows, only {n} available",
            k * l_min
        )));
    }
    Ok(())
}

fn total_score(scores: &[f64], k: usize, assignment: &[usize]) -> f64 {
    assignment.iter().enumerate().map(|(i, &c)| scores[i * k + c]).sum()
}

/// Size-constrained isotropic GMM via hard-assignment EM.
pub fn fit_constrained_gmm(
    points: &[&[f64]],
    k: usize,
    l_min: usize,
    seed: u64,
    opts: FitOptions,
) -> Result<ClusterFragment> {
    constrained_em(points, k, l_min, seed, opts, FitMethod::Gmm)
}

/// Size-constrained k-means (Lloyd iterations with the constrained
/// assignment step).
pub fn fallback_constrained_kmeans(
    points: &[&[f64]],
    k: usize,
    l_min: usize,
    seed: u64,
    max_iter: usize,
) -> Result<ClusterFragment> {
    constrained_em(
        points,
        k,
        l_min,
        seed,
        FitOptions { max_iter, tol: 0.0 },
        FitMethod::KMeans,
    )
}

fn constrained_em(
    points: &[&[f64]],
    k: usize,
    l_min: usize,
    seed: u64,
    opts: FitOptions,
    method: FitMethod,
) -> Result<ClusterFragment> {
    let n = points.len();
    check_feasible(n, k, l_min)?;
    let dim = points[0].len();
    if let Some(bad) = points.iter().find(|p| p.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: bad.len(),
        });
    }
    if points.iter().flat_map(|p| p.iter()).any(|x| !x.is_finite()) {
        return Err(Error::Numerical("non-finite input to clustering".into()));
    }

    let mut rng = rng::seeded(seed);
    let global_var = {
        let all: Vec<usize> = (0..n).collect();
        let mean = mean_of(points, &all, dim);
        spread_of(points, &all, &mean).max(VARIANCE_FLOOR)
    };
    let mut components: Vec<GmmComponent> = kmeans_pp_seeds(points, k, &mut rng)
        .into_iter()
        .map(|i| GmmComponent {
            mean: points[i].to_vec(),
            variance: global_var,
            weight: 1.0 / k as f64,
        })
        .collect();

    let mut scores = score_matrix(points, &components, method);
    let mut assignment = constrained_assignment(&scores, n, k, l_min)?;
    components = m_step(points, &assignment, k, dim);
    scores = score_matrix(points, &components, method);
    let mut objective = total_score(&scores, k, &assignment);
    if !objective.is_finite() {
        return Err(Error::Numerical("clustering objective is not finite".into()));
    }
    let mut trace = vec![objective];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        iterations += 1;
        let mut candidate = constrained_assignment(&scores, n, k, l_min)?;
        let mut incumbent = assignment.clone();
        refine_assignment(&scores, k, l_min, &mut incumbent);
        if total_score(&scores, k, &incumbent) > total_score(&scores, k, &candidate) {
            candidate = incumbent;
        }
        // keep the current assignment unless the new one is at least as good
        if total_score(&scores, k, &candidate) < objective {
            candidate = assignment.clone();
        }
        let next_components = m_step(points, &candidate, k, dim);
        let next_scores = score_matrix(points, &next_components, method);
        let next_objective = total_score(&next_scores, k, &candidate);
        if !next_objective.is_finite() {
            return Err(Error::Numerical("clustering objective is not finite".into()));
        }
        let changed = candidate != assignment;
        let gain = next_objective - objective;
        assignment = candidate;
        components = next_components;
        scores = next_scores;
        objective = next_objective;
        trace.push(objective);
        if !changed || gain < opts.tol {
            converged = true;
            break;
        }
    }

    let mut members = vec![Vec::new(); k];
    for (i, &c) in assignment.iter().enumerate() {
        members[c].push(i);
    }
    Ok(ClusterFragment {
        members,
        components,
        objective_trace: trace,
        iterations,
        converged,
        method,
    })
}

/// k-means++ seeding: first center uniform, later centers proportional to
/// squared distance from the nearest chosen center.
fn kmeans_pp_seeds(points: &[&[f64]], k: usize, rng: &mut rng::Rng) -> Vec<usize> {
    let n = points.len();
    let mut seeds = vec![rng.random_range(0..n)];
    let mut nearest: Vec<f64> = points.iter().map(|p| sq_dist(p, points[seeds[0]])).collect();
    while seeds.len() < k {
        let total: f64 = nearest.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random_range(0.0..total);
            let mut pick = n - 1;
            for (i, &w) in nearest.iter().enumerate() {
                if target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        seeds.push(next);
        for (i, p) in points.iter().enumerate() {
            nearest[i] = nearest[i].min(sq_dist(p, points[next]));
        }
    }
    seeds
}

fn score_matrix(points: &[&[f64]], components: &[GmmComponent], method: FitMethod) -> Vec<f64> {
    let dim = points[0].len() as f64;
    let k = components.len();
    let mut scores = Vec::with_capacity(points.len() * k);
    for p in points {
        for c in components {
            let d2 = sq_dist(p, &c.mean);
            scores.push(match method {
                FitMethod::Gmm => {
                    c.weight.ln()
                        - 0.5 * dim * (2.0 * std::f64::consts::PI * c.variance).ln()
                        - d2 / (2.0 * c.variance)
                }
                FitMethod::KMeans => -d2,
            });
        }
    }
    scores
}

fn m_step(points: &[&[f64]], assignment: &[usize], k: usize, dim: usize) -> Vec<GmmComponent> {
    let n = points.len();
    let mut groups = vec![Vec::new(); k];
    for (i, &c) in assignment.iter().enumerate() {
        groups[c].push(i);
    }
    groups
        .iter()
        .map(|members| {
            let mean = mean_of(points, members, dim);
            GmmComponent {
                variance: spread_of(points, members, &mean).max(VARIANCE_FLOOR),
                weight: members.len() as f64 / n as f64,
                mean,
            }
        })
        .collect()
}

/// Coordinate-wise mean, summed in member order.
fn mean_of(points: &[&[f64]], members: &[usize], dim: usize) -> Vec<f64> {
    let mut mean = vec![0.0; dim];
    for &i in members {
        for (m, x) in mean.iter_mut().zip(points[i]) {
            *m += x;
        }
    }
    let count = members.len().max(1) as f64;
    mean.iter_mut().for_each(|m| *m /= count);
    mean
}

/// Mean squared deviation over all coordinates (isotropic MLE variance).
fn spread_of(points: &[&[f64]], members: &[usize], mean: &[f64]) -> f64 {
    let total: f64 = members.iter().map(|&i| sq_dist(points[i], mean)).sum();
    total / (members.len().max(1) * mean.len()) as f64
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Slicing and clustering controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApproximateConfig {
    pub n_slices: usize,
    /// Clusters per (slice, class); `None` picks `floor(rows / (2 * l_min))`.
    pub k_per_slice: Option<usize>,
    pub l_min: usize,
    pub seed: u64,
    pub fit: FitOptions,
}

/// Slices `d`, then clusters every (slice, class) group separately.
///
/// Groups with fewer than `l_min` rows are skipped. If no group is feasible
/// the returned set is empty and the skips are listed in the diagnostics.
pub fn approximate(d: &Dataset, cfg: &ApproximateConfig) -> Result<ClusterSet> {
    if cfg.l_min == 0 {
        return Err(Error::InvalidArgument("l_min must be >= 1".into()));
    }
    if cfg.k_per_slice == Some(0) {
        return Err(Error::InvalidArgument("k_per_slice must be >= 1".into()));
    }
    let slices = random_slice(d, cfg.n_slices, cfg.seed)?;

    let mut groups = Vec::new();
    for (s, slice) in slices.iter().enumerate() {
        for class in 0..d.class_count() {
            let rows: Vec<usize> = slice
                .row_indices
                .iter()
                .copied()
                .filter(|&i| d.label(i) == class)
                .collect();
            if !rows.is_empty() {
                groups.push((s, class, rows));
            }
        }
    }

    let outcomes: Vec<GroupOutcome> = groups
        .into_par_iter()
        .map(|(s, class, rows)| fit_group(d, cfg, s, class, rows))
        .collect::<Result<_>>()?;

    let mut diagnostics = ApproximateDiagnostics::default();
    let mut clusters = Vec::new();
    for outcome in outcomes {
        match outcome {
            GroupOutcome::Skipped(skip) => diagnostics.skipped.push(skip),
            GroupOutcome::Fitted {
                clusters: fitted,
                summary,
                fallback,
            } => {
                clusters.extend(fitted);
                diagnostics.fits.push(summary);
                diagnostics.fallbacks += usize::from(fallback);
            }
        }
    }
    Ok(ClusterSet {
        clusters,
        slices,
        min_size: cfg.l_min,
        diagnostics,
    })
}

enum GroupOutcome {
    Skipped(SkippedGroup),
    Fitted {
        clusters: Vec<Cluster>,
        summary: FitSummary,
        fallback: bool,
    },
}

fn fit_group(
    d: &Dataset,
    cfg: &ApproximateConfig,
    slice: usize,
    class: usize,
    rows: Vec<usize>,
) -> Result<GroupOutcome> {
    let n = rows.len();
    if n < cfg.l_min {
        return Ok(GroupOutcome::Skipped(SkippedGroup { slice, class, rows: n }));
    }
    let max_k = n / cfg.l_min;
    let k = cfg
        .k_per_slice
        .unwrap_or_else(|| (n / (2 * cfg.l_min)).max(1))
        .min(max_k);
    let points: Vec<&[f64]> = rows.iter().map(|&i| d.row(i)).collect();
    let seed = cfg
        .seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(((slice as u64) << 32) | class as u64);

    let (fragment, fallback) = match fit_constrained_gmm(&points, k, cfg.l_min, seed, cfg.fit) {
        Ok(f) => (f, false),
        Err(Error::Numerical(_)) => (
            fallback_constrained_kmeans(&points, k, cfg.l_min, seed, cfg.fit.max_iter)?,
            true,
        ),
        Err(e) => return Err(e),
    };

    let summary = FitSummary {
        slice,
        class,
        rows: n,
        k,
        method: fragment.method,
        iterations: fragment.iterations,
        converged: fragment.converged,
        final_objective: fragment.objective_trace.last().copied().unwrap_or(f64::NAN),
    };
    let clusters = fragment
        .members
        .into_iter()
        .zip(fragment.components)
        .map(|(local, component)| {
            let mut members: Vec<usize> = local.into_iter().map(|j| rows[j]).collect();
            members.sort_unstable();
            Cluster {
                members,
                component,
                label: class,
                slice,
            }
        })
        .collect();
    Ok(GroupOutcome::Fitted {
        clusters,
        summary,
        fallback,
    })
}
