//! Adapt stage: kernel inducing points.
//!
//! Support points `X_s` (initialized at cluster centroids `X~_s`, labels
//! `y_s` fixed) are moved by gradient descent on
//!
//! ```text
//! L(X_s) = alpha * ||X_s - X~_s||_F^2 / ||X~_s||_F^2
//!        + (1 - alpha) * 1/2 * ||y_t - K_ts (K_ss + lambda I)^-1 y_s||_F^2
//! ```
//!
//! where `X_t, y_t` are the real records of the slice. The gradient is taken
//! in closed form through the linear solve.

use nalgebra::{Cholesky, DMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Kernel depending only on the squared distance between its arguments.
pub trait RadialKernel: Send + Sync {
    /// `k(r2)` for squared distance `r2`.
    fn value(&self, r2: f64) -> f64;
    /// `dk/d(r2)`, given `value = k(r2)`.
    fn derivative(&self, r2: f64, value: f64) -> f64;
}

/// `exp(-r2 / (2 h^2))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rbf {
    pub bandwidth: f64,
}

impl Rbf {
    pub fn new(bandwidth: f64) -> Result<Self> {
        if bandwidth > 0.0 && bandwidth.is_finite() {
            Ok(Self { bandwidth })
        } else {
            Err(Error::InvalidArgument(format!(
                "kernel bandwidth must be positive, got {bandwidth}"
            )))
        }
    }
}

impl RadialKernel for Rbf {
    fn value(&self, r2: f64) -> f64 {
        (-r2 / (2.0 * self.bandwidth * self.bandwidth)).exp()
    }

    fn derivative(&self, _r2: f64, value: f64) -> f64 {
        -value / (2.0 * self.bandwidth * self.bandwidth)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    #[default]
    Rbf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelConfig {
    pub kind: KernelKind,
    /// `None` uses the median pairwise distance of the slice's records.
    pub bandwidth: Option<f64>,
    pub ridge_lambda: f64,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            kind: KernelKind::Rbf,
            bandwidth: None,
            ridge_lambda: 1e-3,
        }
    }
}

impl KernelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.ridge_lambda > 0.0 && self.ridge_lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "ridge_lambda must be positive, got {}",
                self.ridge_lambda
            )));
        }
        if let Some(h) = self.bandwidth {
            Rbf::new(h)?;
        }
        Ok(())
    }

    /// Resolves the bandwidth against `points` (rows).
    pub fn kernel_for(&self, points: &DMatrix<f64>) -> Result<Rbf> {
        self.validate()?;
        match self.kind {
            KernelKind::Rbf => Rbf::new(self.bandwidth.unwrap_or_else(|| median_distance(points))),
        }
    }
}

/// Median pairwise Euclidean distance over (at most 400 evenly strided) rows;
/// 1.0 when all rows coincide.
pub fn median_distance(points: &DMatrix<f64>) -> f64 {
    let n = points.nrows();
    let stride = n.div_ceil(400).max(1);
    let idx: Vec<usize> = (0..n).step_by(stride).collect();
    let mut dists = Vec::with_capacity(idx.len() * idx.len() / 2);
    for (a, &i) in idx.iter().enumerate() {
        for &j in &idx[a + 1..] {
            dists.push(row_sq_dist(points, i, points, j).sqrt());
        }
    }
    if dists.is_empty() {
        return 1.0;
    }
    let mid = dists.len() / 2;
    let (_, median, _) = dists.select_nth_unstable_by(mid, f64::total_cmp);
    if *median > 0.0 {
        *median
    } else {
        1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdaptConfig {
    /// Weight of centroid fidelity; 1 keeps the centroids unchanged.
    pub alpha: f64,
    pub learning_rate: f64,
    pub max_steps: usize,
    pub grad_tolerance: f64,
}

impl Default for AdaptConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            learning_rate: 0.05,
            max_steps: 100,
            grad_tolerance: 1e-6,
        }
    }
}

impl AdaptConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidArgument(format!(
                "alpha must lie in [0, 1], got {}",
                self.alpha
            )));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument("learning_rate must be positive".into()));
        }
        if !(self.grad_tolerance >= 0.0) {
            return Err(Error::InvalidArgument("grad_tolerance must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptResult {
    /// `S x D`, inside the unit hypercube.
    pub support_points: DMatrix<f64>,
    /// `S x C` one-hot.
    pub support_labels: DMatrix<f64>,
    pub initial_points: DMatrix<f64>,
    /// `(step, loss)` for every accepted step, starting at step 0.
    pub loss_trace: Vec<(usize, f64)>,
    /// Ridge parameter actually used (after any escalation).
    pub ridge_lambda: f64,
    pub bandwidth: f64,
}

/// Rows of `rows` stacked into a matrix.
pub fn matrix_from_rows(rows: &[&[f64]]) -> Result<DMatrix<f64>> {
    let dim = rows.first().map_or(0, |r| r.len());
    if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: bad.len(),
        });
    }
    Ok(DMatrix::from_fn(rows.len(), dim, |i, j| rows[i][j]))
}

pub fn one_hot(labels: &[usize], class_count: usize) -> DMatrix<f64> {
    DMatrix::from_fn(labels.len(), class_count, |i, c| f64::from(u8::from(labels[i] == c)))
}

fn row_sq_dist(a: &DMatrix<f64>, i: usize, b: &DMatrix<f64>, j: usize) -> f64 {
    (0..a.ncols()).map(|c| (a[(i, c)] - b[(j, c)]).powi(2)).sum()
}

/// `K[i, j] = k(||A_i - B_j||^2)`.
pub fn kernel_matrix(a: &DMatrix<f64>, b: &DMatrix<f64>, kernel: &impl RadialKernel) -> Result<DMatrix<f64>> {
    if a.ncols() != b.ncols() {
        return Err(Error::DimensionMismatch {
            expected: a.ncols(),
            found: b.ncols(),
        });
    }
    Ok(DMatrix::from_fn(a.nrows(), b.nrows(), |i, j| {
        kernel.value(row_sq_dist(a, i, b, j))
    }))
}

/// Intermediate quantities of one KRR evaluation.
struct KrrState {
    k_ts: DMatrix<f64>,
    k_ss: DMatrix<f64>,
    chol: Cholesky<f64, nalgebra::Dyn>,
    /// `(K_ss + lambda I)^-1 y_s`
    coef: DMatrix<f64>,
    /// `y_t - K_ts coef`
    residual: DMatrix<f64>,
}

impl KrrState {
    fn new(
        xt: &DMatrix<f64>,
        yt: &DMatrix<f64>,
        xs: &DMatrix<f64>,
        ys: &DMatrix<f64>,
        kernel: &impl RadialKernel,
        lambda: f64,
    ) -> Result<Self> {
        check_krr_shapes(xt, yt, xs, ys)?;
        let k_ts = kernel_matrix(xt, xs, kernel)?;
        let k_ss = kernel_matrix(xs, xs, kernel)?;
        let system = &k_ss + DMatrix::identity(xs.nrows(), xs.nrows()) * lambda;
        let chol = Cholesky::new(system).ok_or(Error::Factorization { lambda })?;
        let coef = chol.solve(ys);
        let residual = yt - &k_ts * &coef;
        if residual.iter().any(|v| !v.is_finite()) {
            return Err(Error::Factorization { lambda });
        }
        Ok(Self {
            k_ts,
            k_ss,
            chol,
            coef,
            residual,
        })
    }

    fn loss(&self) -> f64 {
        0.5 * self.residual.norm_squared()
    }

    /// Gradient of the KRR loss with respect to the support points.
    fn gradient(&self, xt: &DMatrix<f64>, xs: &DMatrix<f64>, kernel: &impl RadialKernel) -> DMatrix<f64> {
        // dL = sum(G_ts .* dK_ts) + sum(G_ss .* dK_ss)
        let g_ts = -(&self.residual * self.coef.transpose());
        let w = self.chol.solve(&(self.k_ts.transpose() * &self.residual));
        let g_ss = w * self.coef.transpose();

        let (s, dim) = (xs.nrows(), xs.ncols());
        let mut grad = DMatrix::zeros(s, dim);
        for j in 0..s {
            for t in 0..xt.nrows() {
                let k = self.k_ts[(t, j)];
                let r2 = row_sq_dist(xt, t, xs, j);
                let scale = g_ts[(t, j)] * kernel.derivative(r2, k) * 2.0;
                for c in 0..dim {
                    grad[(j, c)] += scale * (xs[(j, c)] - xt[(t, c)]);
                }
            }
            for i in 0..s {
                if i == j {
                    continue;
                }
                let k = self.k_ss[(j, i)];
                let r2 = row_sq_dist(xs, j, xs, i);
                let scale = (g_ss[(j, i)] + g_ss[(i, j)]) * kernel.derivative(r2, k) * 2.0;
                for c in 0..dim {
                    grad[(j, c)] += scale * (xs[(j, c)] - xs[(i, c)]);
                }
            }
        }
        grad
    }
}

fn check_krr_shapes(xt: &DMatrix<f64>, yt: &DMatrix<f64>, xs: &DMatrix<f64>, ys: &DMatrix<f64>) -> Result<()> {
    if xs.nrows() == 0 {
        return Err(Error::InvalidArgument("need at least one support point".into()));
    }
    let pairs = [
        (xt.ncols(), xs.ncols()),
        (xt.nrows(), yt.nrows()),
        (xs.nrows(), ys.nrows()),
        (yt.ncols(), ys.ncols()),
    ];
    for (expected, found) in pairs {
        if expected != found {
            return Err(Error::DimensionMismatch { expected, found });
        }
    }
    Ok(())
}

/// `1/2 * ||y_t - K_ts (K_ss + lambda I)^-1 y_s||_F^2`.
pub fn krr_loss(
    xt: &DMatrix<f64>,
    yt: &DMatrix<f64>,
    xs: &DMatrix<f64>,
    ys: &DMatrix<f64>,
    kernel: &impl RadialKernel,
    lambda: f64,
) -> Result<f64> {
    Ok(KrrState::new(xt, yt, xs, ys, kernel, lambda)?.loss())
}

/// Normalizer of the fidelity term, `tr(X~^T X~)` or 1 when that vanishes.
fn fidelity_scale(xs_init: &DMatrix<f64>) -> f64 {
    let tr = xs_init.norm_squared();
    if tr < 1e-12 {
        1.0
    } else {
        tr
    }
}

/// Inputs of the combined objective that stay fixed during adaptation.
pub struct Objective<'a, K: RadialKernel> {
    pub xt: &'a DMatrix<f64>,
    pub yt: &'a DMatrix<f64>,
    pub ys: &'a DMatrix<f64>,
    pub xs_init: &'a DMatrix<f64>,
    pub alpha: f64,
    pub kernel: &'a K,
    pub lambda: f64,
}

impl<K: RadialKernel> Objective<'_, K> {
    pub fn loss(&self, xs: &DMatrix<f64>) -> Result<f64> {
        let fidelity = (xs - self.xs_init).norm_squared() / fidelity_scale(self.xs_init);
        if self.alpha >= 1.0 {
            return Ok(fidelity);
        }
        let krr = krr_loss(self.xt, self.yt, xs, self.ys, self.kernel, self.lambda)?;
        Ok(self.alpha * fidelity + (1.0 - self.alpha) * krr)
    }

    /// Loss and analytic gradient.
    pub fn loss_and_gradient(&self, xs: &DMatrix<f64>) -> Result<(f64, DMatrix<f64>)> {
        let scale = fidelity_scale(self.xs_init);
        let diff = xs - self.xs_init;
        let fidelity = diff.norm_squared() / scale;
        let mut grad = diff * (2.0 * self.alpha / scale);
        if self.alpha >= 1.0 {
            return Ok((fidelity, grad));
        }
        let state = KrrState::new(self.xt, self.yt, xs, self.ys, self.kernel, self.lambda)?;
        grad += state.gradient(self.xt, xs, self.kernel) * (1.0 - self.alpha);
        Ok((self.alpha * fidelity + (1.0 - self.alpha) * state.loss(), grad))
    }
}

/// `alpha * fidelity + (1 - alpha) * krr_loss`.
#[allow(clippy::too_many_arguments)]
pub fn combined_loss(
    xs: &DMatrix<f64>,
    ys: &DMatrix<f64>,
    xt: &DMatrix<f64>,
    yt: &DMatrix<f64>,
    xs_init: &DMatrix<f64>,
    alpha: f64,
    kernel: &impl RadialKernel,
    lambda: f64,
) -> Result<f64> {
    Objective {
        xt,
        yt,
        ys,
        xs_init,
        alpha,
        kernel,
        lambda,
    }
    .loss(xs)
}

/// Number of times the ridge parameter is multiplied by 10 after a failed factorization.
pub const LAMBDA_RETRIES: usize = 3;

/// Moves the support points `xs_init` (labels `ys`) towards lower combined
/// loss against targets `(xt, yt)`.
///
/// A step is accepted only if it lowers the loss; otherwise the learning
/// rate is halved. Points are clamped to the unit hypercube after every step.
pub fn adapt_points(
    xt: &DMatrix<f64>,
    yt: &DMatrix<f64>,
    xs_init: &DMatrix<f64>,
    ys: &DMatrix<f64>,
    kcfg: &KernelConfig,
    acfg: &AdaptConfig,
) -> Result<AdaptResult> {
    acfg.validate()?;
    let kernel = kcfg.kernel_for(xt)?;
    let mut lambda = kcfg.ridge_lambda;
    let mut attempt = 0;
    loop {
        match descend(xt, yt, xs_init, ys, &kernel, lambda, acfg) {
            Err(Error::Factorization { .. }) if attempt < LAMBDA_RETRIES => {
                attempt += 1;
                lambda *= 10.0;
            }
            Err(e) => return Err(e),
            Ok((points, trace)) => {
                return Ok(AdaptResult {
                    support_points: points,
                    support_labels: ys.clone(),
                    initial_points: xs_init.clone(),
                    loss_trace: trace,
                    ridge_lambda: lambda,
                    bandwidth: kernel.bandwidth,
                })
            }
        }
    }
}

type Trace = Vec<(usize, f64)>;

fn descend(
    xt: &DMatrix<f64>,
    yt: &DMatrix<f64>,
    xs_init: &DMatrix<f64>,
    ys: &DMatrix<f64>,
    kernel: &Rbf,
    lambda: f64,
    acfg: &AdaptConfig,
) -> Result<(DMatrix<f64>, Trace)> {
    let objective = Objective {
        xt,
        yt,
        ys,
        xs_init,
        alpha: acfg.alpha,
        kernel,
        lambda,
    };
    let mut xs = xs_init.clone();
    let (mut loss, mut grad) = objective.loss_and_gradient(&xs)?;
    let mut trace = vec![(0, loss)];
    let mut lr = acfg.learning_rate;

    'steps: for step in 1..=acfg.max_steps {
        if grad.norm() <= acfg.grad_tolerance {
            break;
        }
        loop {
            let candidate = (&xs - &grad * lr).map(|v| v.clamp(0.0, 1.0));
            let candidate_loss = objective.loss(&candidate)?;
            if candidate_loss < loss {
                xs = candidate;
                break;
            }
            lr *= 0.5;
            if lr < 1e-12 {
                break 'steps;
            }
        }
        (loss, grad) = objective.loss_and_gradient(&xs)?;
        trace.push((step, loss));
        lr *= 1.25;
    }
    Ok((xs, trace))
}
