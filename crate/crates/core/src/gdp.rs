//! Gaussian differential privacy accounting.
//!
//! A mechanism releasing the average of `l` records from `[0, 1]^D` plus
//! `N(0, sigma^2 I)` noise, where one record may also sway the adapted points
//! of all `C` classes in its slice, is `mu`-GDP with
//!
//! ```text
//! mu = sqrt(C * D) / (l * sigma)
//! ```
//!
//! and `mu`-GDP implies `(eps, delta(eps))`-DP for every `eps >= 0` with
//!
//! ```text
//! delta(eps) = Phi(-eps/mu + mu/2) - e^eps * Phi(-eps/mu - mu/2)
//! ```
//!
//! `delta` is strictly decreasing in `l * sigma`, which is what the
//! calibration solvers below bisect on.

use std::collections::HashMap;
use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest noise level the sigma solver will consider.
pub const SIGMA_SEARCH_MAX: f64 = 1e6;
/// Largest mixture size the `l_min` solver will consider.
pub const MIXTURE_SIZE_SEARCH_MAX: u64 = 1_000_000_000;

/// Standard normal CDF.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// `ln Phi(x)`, finite far into the lower tail.
pub fn log_std_normal_cdf(x: f64) -> f64 {
    if x > -37.0 {
        return std_normal_cdf(x).ln();
    }
    // Asymptotic expansion of the Mills ratio; the series terms shrink as
    // (2k-1)!! / x^(2k), below 1e-15 relative here.
    let x2 = x * x;
    let inv = 1.0 / x2;
    let series = 1.0 - inv * (1.0 - 3.0 * inv * (1.0 - 5.0 * inv * (1.0 - 7.0 * inv * (1.0 - 9.0 * inv))));
    -0.5 * x2 - (-x).ln() - 0.5 * (2.0 * PI).ln() + series.ln()
}

/// `Phi(upper) - e^eps * Phi(lower)`, with the product taken in log space.
fn tradeoff_delta(epsilon: f64, upper: f64, lower: f64) -> f64 {
    let head = std_normal_cdf(upper);
    let tail = (epsilon + log_std_normal_cdf(lower)).exp();
    (head - tail).clamp(0.0, 1.0)
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon.is_finite() && epsilon >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "epsilon must be finite and nonnegative, got {epsilon}"
        )))
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("delta must lie in (0, 1), got {delta}")))
    }
}

/// Smallest `delta` such that a `mu`-GDP mechanism is `(epsilon, delta)`-DP.
pub fn delta_of_mu(epsilon: f64, mu: f64) -> Result<f64> {
    check_epsilon(epsilon)?;
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::InvalidArgument(format!("mu must be positive, got {mu}")));
    }
    let ratio = epsilon / mu;
    Ok(tradeoff_delta(epsilon, -ratio + 0.5 * mu, -ratio - 0.5 * mu))
}

/// GDP parameter of the n-fold composition of `mu_i`-GDP mechanisms.
pub fn compose_mu(mus: &[f64]) -> Result<f64> {
    if mus.is_empty() {
        return Err(Error::InvalidArgument("cannot compose an empty list".into()));
    }
    if let Some(bad) = mus.iter().find(|m| !(**m > 0.0 && m.is_finite())) {
        return Err(Error::InvalidArgument(format!("mu must be positive, got {bad}")));
    }
    Ok(mus.iter().map(|m| m * m).sum::<f64>().sqrt())
}

/// Target privacy budget together with the matching GDP parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyParams {
    pub epsilon: f64,
    pub delta: f64,
    /// Largest `mu` with `delta_of_mu(epsilon, mu) <= delta`.
    pub mu: f64,
}

impl PrivacyParams {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        check_epsilon(epsilon)?;
        check_delta(delta)?;
        let satisfied = |mu: f64| delta_of_mu(epsilon, mu).map(|d| d <= delta);
        // delta -> 0 as mu -> 0, so a small enough mu always satisfies.
        let mut lo = 1.0;
        while !satisfied(lo)? {
            lo *= 0.5;
            if lo < 1e-300 {
                return Err(Error::Infeasible(format!(
                    "no mu satisfies (epsilon={epsilon}, delta={delta})"
                )));
            }
        }
        let mut hi = lo * 2.0;
        while satisfied(hi)? {
            lo = hi;
            hi *= 2.0;
            if hi > 1e12 {
                break;
            }
        }
        while hi / lo > 1.0 + 1e-13 {
            let mid = (lo * hi).sqrt();
            if satisfied(mid)? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(Self {
            epsilon,
            delta,
            mu: lo,
        })
    }

    /// Whether this triple's `mu` really meets its `(epsilon, delta)` target.
    pub fn is_satisfied(&self) -> bool {
        delta_of_mu(self.epsilon, self.mu).is_ok_and(|d| d <= self.delta)
    }
}

/// Shape of one averaged-and-noised release.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MechanismShape {
    /// Number of records averaged.
    pub l: u64,
    /// Noise standard deviation in unit-scaled feature space.
    pub sigma: f64,
    pub feature_count: usize,
    pub class_count: usize,
}

impl MechanismShape {
    pub fn new(l: u64, sigma: f64, feature_count: usize, class_count: usize) -> Result<Self> {
        let shape = Self {
            l,
            sigma,
            feature_count,
            class_count,
        };
        shape.validate()?;
        Ok(shape)
    }

    fn validate(&self) -> Result<()> {
        if self.l == 0 || self.feature_count == 0 || self.class_count == 0 {
            return Err(Error::InvalidArgument(format!(
                "mixture size, feature count and class count must be >= 1 (got l={}, D={}, C={})",
                self.l, self.feature_count, self.class_count
            )));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        Ok(())
    }

    fn root_cd(&self) -> f64 {
        ((self.class_count * self.feature_count) as f64).sqrt()
    }
}

/// `sqrt(C * D) / (l * sigma)`.
pub fn mechanism_mu(shape: &MechanismShape) -> Result<f64> {
    shape.validate()?;
    Ok(shape.root_cd() / (shape.l as f64 * shape.sigma))
}

/// `delta` of the averaging mechanism at `epsilon`, evaluated directly in
/// terms of `l * sigma` rather than through [`mechanism_mu`].
pub fn mechanism_delta(epsilon: f64, shape: &MechanismShape) -> Result<f64> {
    check_epsilon(epsilon)?;
    shape.validate()?;
    let spread = shape.l as f64 * shape.sigma;
    let root_cd = shape.root_cd();
    let shift = epsilon * spread / root_cd;
    let half_mu = root_cd / (2.0 * spread);
    Ok(tradeoff_delta(epsilon, -shift + half_mu, -shift - half_mu))
}

/// Smallest noise level meeting `(epsilon, delta_target)` for mixtures of
/// size `l`. Bisection on `ln sigma`; the returned value always satisfies the
/// target and lies within a relative 1e-12 of the boundary.
pub fn calibrate_sigma(
    epsilon: f64,
    delta_target: f64,
    l: u64,
    class_count: usize,
    feature_count: usize,
) -> Result<f64> {
    check_epsilon(epsilon)?;
    check_delta(delta_target)?;
    let satisfied = |sigma: f64| -> Result<bool> {
        let shape = MechanismShape::new(l, sigma, feature_count, class_count)?;
        Ok(mechanism_delta(epsilon, &shape)? <= delta_target)
    };
    let mut hi = SIGMA_SEARCH_MAX;
    if !satisfied(hi)? {
        return Err(Error::Infeasible(format!(
            "no sigma <= {SIGMA_SEARCH_MAX:e} reaches delta {delta_target} at epsilon {epsilon} (l={l}, C={class_count}, D={feature_count})"
        )));
    }
    let mut lo = hi;
    loop {
        lo *= 0.5;
        if lo < f64::MIN_POSITIVE {
            return Ok(hi);
        }
        if !satisfied(lo)? {
            break;
        }
        hi = lo;
    }
    while hi / lo > 1.0 + 1e-12 {
        let mid = (lo * hi).sqrt();
        if satisfied(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Smallest mixture size meeting `(epsilon, delta_target)` at noise `sigma_max`.
pub fn min_mixture_size(
    epsilon: f64,
    delta_target: f64,
    sigma_max: f64,
    class_count: usize,
    feature_count: usize,
) -> Result<u64> {
    check_epsilon(epsilon)?;
    check_delta(delta_target)?;
    let satisfied = |l: u64| -> Result<bool> {
        let shape = MechanismShape::new(l, sigma_max, feature_count, class_count)?;
        Ok(mechanism_delta(epsilon, &shape)? <= delta_target)
    };
    if satisfied(1)? {
        return Ok(1);
    }
    if !satisfied(MIXTURE_SIZE_SEARCH_MAX)? {
        return Err(Error::Infeasible(format!(
            "no mixture size <= {MIXTURE_SIZE_SEARCH_MAX} reaches delta {delta_target} at epsilon {epsilon} with sigma_max {sigma_max}"
        )));
    }
    // invariant: lo fails, hi satisfies
    let (mut lo, mut hi) = (1u64, 2u64);
    while !satisfied(hi)? {
        lo = hi;
        hi = (hi * 2).min(MIXTURE_SIZE_SEARCH_MAX);
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if satisfied(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Memoizes calibration results on rounded inputs. Safe to share across threads.
#[derive(Debug, Default)]
pub struct CalibrationCache {
    sigma: Mutex<HashMap<CacheKey, Option<f64>>>,
    l_min: Mutex<HashMap<CacheKey, Option<u64>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct CacheKey {
    epsilon: u64,
    delta: u64,
    size: u64,
    class_count: usize,
    feature_count: usize,
}

/// Rounds to 12 significant digits so nearly-equal inputs share an entry.
fn round_key(x: f64) -> u64 {
    format!("{x:.11e}").parse::<f64>().unwrap_or(x).to_bits()
}

impl CalibrationCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Cached [`calibrate_sigma`]; infeasibility is cached too.
    pub fn sigma(
        &self,
        epsilon: f64,
        delta_target: f64,
        l: u64,
        class_count: usize,
        feature_count: usize,
    ) -> Result<f64> {
        let key = CacheKey {
            epsilon: round_key(epsilon),
            delta: round_key(delta_target),
            size: l,
            class_count,
            feature_count,
        };
        if let Some(hit) = lock(&self.sigma).get(&key).copied() {
            return hit.ok_or_else(|| infeasible_sigma(epsilon, delta_target, l));
        }
        let result = calibrate_sigma(epsilon, delta_target, l, class_count, feature_count);
        match &result {
            Ok(s) => {
                lock(&self.sigma).insert(key, Some(*s));
            }
            Err(Error::Infeasible(_)) => {
                lock(&self.sigma).insert(key, None);
            }
            Err(_) => {}
        }
        result
    }

    /// Cached [`min_mixture_size`].
    pub fn min_mixture_size(
        &self,
        epsilon: f64,
        delta_target: f64,
        sigma_max: f64,
        class_count: usize,
        feature_count: usize,
    ) -> Result<u64> {
        let key = CacheKey {
            epsilon: round_key(epsilon),
            delta: round_key(delta_target),
            size: round_key(sigma_max),
            class_count,
            feature_count,
        };
        if let Some(hit) = lock(&self.l_min).get(&key).copied() {
            return hit.ok_or_else(|| {
                Error::Infeasible(format!(
                    "no mixture size reaches delta {delta_target} at epsilon {epsilon} with sigma_max {sigma_max}"
                ))
            });
        }
        let result = min_mixture_size(epsilon, delta_target, sigma_max, class_count, feature_count);
        match &result {
            Ok(l) => {
                lock(&self.l_min).insert(key, Some(*l));
            }
            Err(Error::Infeasible(_)) => {
                lock(&self.l_min).insert(key, None);
            }
            Err(_) => {}
        }
        result
    }

    pub fn len(&self) -> usize {
        lock(&self.sigma).len() + lock(&self.l_min).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn infeasible_sigma(epsilon: f64, delta: f64, l: u64) -> Error {
    Error::Infeasible(format!(
        "no sigma <= {SIGMA_SEARCH_MAX:e} reaches delta {delta} at epsilon {epsilon} (l={l})"
    ))
}

fn lock<T>(m: &Mutex<T>) -> std::sync::MutexGuard<'_, T> {
    // A poisoned map still holds valid entries.
    m.lock().unwrap_or_else(|e| e.into_inner())
}
