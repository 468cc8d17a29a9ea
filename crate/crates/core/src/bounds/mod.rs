//! Closed-form fairness guarantees and their numerical checks.

pub mod lp;

use serde::{Deserialize, Serialize};

use crate::model::normalization_factor;
use crate::numeric::golden_max;

pub use lp::{lp_verify, DenseSimplex, FactorRevealingLp, LpCheck, LpSolver, Regime};

/// Best possible ex-post fairness guarantee for `n` agents at scarcity `mu`.
pub fn kappa_p(mu: f64, n: usize) -> f64 {
    let nf = n as f64;
    let c = nf / (2.0 * (nf + 1.0));
    if mu < 1.0 {
        1.0 - c * mu
    } else if mu < (nf + 1.0) / nf {
        mu - c * mu * mu
    } else {
        (nf + 1.0) / (2.0 * nf)
    }
}

/// Best possible ex-ante fairness guarantee; does not depend on `n`.
pub fn kappa_a(mu: f64, _n: usize) -> f64 {
    if mu < 1.0 {
        1.0 - mu / 4.0
    } else if mu < 2.0 {
        mu * (1.0 - mu / 4.0)
    } else {
        1.0
    }
}

/// Ex-post guarantee of the optimal target-fill-rate policy.
pub fn kappa_tfr(mu: f64) -> f64 {
    mu.max(1.0) * q_hat(mu)
}

/// Knee of the worst-case inverse-demand distribution, `1/(μ+√(μ²+1))`.
pub fn q_hat(mu: f64) -> f64 {
    1.0 / (mu + (mu * mu + 1.0).sqrt())
}

/// TFR guarantee when total demand has coefficient of variation at most `c`.
///
/// Maximizes `(max{1,μ}/μ)·x(1−x)²/(c²x² + (1−x)²)` over `x ∈ (0, min{1,μ}]`
/// on a uniform grid, then refines around the best grid point.
pub fn kappa_tfr_cv(mu: f64, c: f64, grid: usize) -> f64 {
    if mu <= 0.0 || c <= 0.0 {
        return 1.0;
    }
    let scale = mu.max(1.0) / mu;
    let h = |x: f64| {
        if x <= 0.0 || x >= 1.0 {
            return 0.0;
        }
        let r = (1.0 - x) * (1.0 - x);
        scale * x * r / (c * c * x * x + r)
    };
    let hi = mu.min(1.0);
    let grid = grid.max(2);
    let step = hi / grid as f64;
    let (mut best_k, mut best) = (0usize, 0.0f64);
    for k in 1..=grid {
        let v = h(k as f64 * step);
        if v > best {
            best = v;
            best_k = k;
        }
    }
    let lo = (best_k as f64 - 1.0) * step;
    let up = ((best_k as f64 + 1.0) * step).min(hi);
    let (_, refined) = golden_max(h, lo, up, 100);
    best.max(refined).max(h(hi))
}

/// Guarantee of the optimal fixed-allocation policy.
pub fn kappa_fa(mu: f64, n: usize) -> f64 {
    let nm = n as f64 * mu;
    if nm < 2.0 {
        mu.max(1.0) * (1.0 - nm / 4.0)
    } else {
        mu.max(1.0) / nm
    }
}

/// All guarantees at one `(mu, n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GuaranteeTable {
    pub mu: f64,
    pub n: usize,
    pub kappa_p: f64,
    pub kappa_a: f64,
    pub kappa_fa: f64,
    pub kappa_tfr: f64,
    pub w_bar: f64,
}

impl GuaranteeTable {
    pub fn new(mu: f64, n: usize) -> Self {
        Self {
            mu,
            n,
            kappa_p: kappa_p(mu, n),
            kappa_a: kappa_a(mu, n),
            kappa_fa: kappa_fa(mu, n),
            kappa_tfr: kappa_tfr(mu),
            w_bar: normalization_factor(mu),
        }
    }
}

/// Offline-versus-online gap on the over-demanded family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OfflineGap {
    /// `ln(n+1)`.
    pub log_bound: f64,
    /// Offline value over the online upper bound, the harmonic number `H_n`.
    pub exact_ratio: f64,
}

pub fn offline_gap_bound(n: usize) -> OfflineGap {
    OfflineGap {
        log_bound: ((n + 1) as f64).ln(),
        exact_ratio: (1..=n).map(|s| 1.0 / s as f64).sum(),
    }
}
