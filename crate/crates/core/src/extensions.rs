//! Welfare functions beyond the minimum fill rate, multi-resource
//! guarantees, and budgeted endowment optimization.

use serde::{Deserialize, Serialize};

use crate::bounds::kappa_p;
use crate::error::{Error, Result};
use crate::eval::run_path;
use crate::model::{normalization_factor, DemandModel, Scenario};
use crate::numeric::{self, Sum};
use crate::policies::Policy;

/// `|α − 1|` below which the logarithmic branch is used.
const LOG_BRANCH: f64 = 1e-6;

/// Demand-weighted power mean of fill rates.
///
/// `alpha = f64::INFINITY` gives the minimum fill rate; `alpha ≈ 1` the
/// weighted geometric mean. Zero-demand agents carry zero weight, and a path
/// without demand has welfare 1.
pub fn wpm_welfare(alpha: f64, demands: &[f64], allocations: &[f64]) -> Result<f64> {
    if demands.len() != allocations.len() {
        return Err(Error::InvalidArgument("demand/allocation length mismatch".into()));
    }
    if !(alpha >= 0.0) {
        return Err(Error::InvalidArgument(format!("alpha {alpha} must be >= 0")));
    }
    let total = numeric::sum(demands.iter().copied());
    if total <= 0.0 {
        return Ok(1.0);
    }
    let mut frs = Vec::with_capacity(demands.len());
    for (i, (&d, &x)) in demands.iter().zip(allocations).enumerate() {
        if d > 0.0 {
            let fr = crate::model::fill_rate(x, d).map_err(|_| Error::AllocationExceedsDemand {
                agent: i,
                allocation: x,
                demand: d,
            })?;
            frs.push((d / total, fr));
        }
    }
    let min = frs.iter().map(|p| p.1).fold(1.0, f64::min);
    if alpha.is_infinite() {
        return Ok(min);
    }
    if (alpha - 1.0).abs() < LOG_BRANCH {
        if min <= 0.0 {
            return Ok(0.0);
        }
        let log: Sum = frs.iter().map(|(w, f)| w * f.ln()).collect();
        return Ok(log.value().exp().max(min));
    }
    let e = 1.0 - alpha;
    let s: Sum = frs.iter().map(|(w, f)| w * f.powf(e)).collect();
    let u = s.value().powf(1.0 / e);
    // Power means never fall below the minimum; clip rounding noise.
    Ok(if u.is_nan() { min } else { u.max(min) })
}

/// Per-resource data for multi-resource problems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiResourceSpec {
    pub supplies: Vec<f64>,
    pub mus: Vec<f64>,
    pub weights: Vec<f64>,
    pub costs: Vec<f64>,
    pub budget: f64,
}

impl MultiResourceSpec {
    pub fn validate(&self) -> Result<()> {
        let m = self.mus.len();
        if m == 0 || self.weights.len() != m || self.costs.len() != m {
            return Err(Error::InvalidArgument(
                "mus, weights and costs need one entry per resource".into(),
            ));
        }
        if !self.supplies.is_empty() && self.supplies.len() != m {
            return Err(Error::InvalidArgument("supplies need one entry per resource".into()));
        }
        if self.weights.iter().any(|w| !(*w >= 0.0)) || self.mus.iter().any(|u| !(*u >= 0.0)) {
            return Err(Error::InvalidArgument("weights and mus must be >= 0".into()));
        }
        let ws = numeric::sum(self.weights.iter().copied());
        if (ws - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("weights sum to {ws}, not 1")));
        }
        Ok(())
    }
}

/// Guaranteed expected minimum fill rate for one resource with expected
/// demand `mu` and supply `s`: `κ_p(μ/s, n)·W̄(μ/s)`.
pub fn resource_guarantee(mu: f64, s: f64, n: usize) -> f64 {
    if mu <= 0.0 {
        return 1.0;
    }
    if s <= 0.0 {
        return 0.0;
    }
    let t = mu / s;
    kappa_p(t, n) * normalization_factor(t)
}

/// Guaranteed expected minimum weighted fill rate under per-resource PPA.
pub fn multi_resource_guarantee(spec: &MultiResourceSpec, n: usize) -> Result<f64> {
    spec.validate()?;
    if spec.supplies.len() != spec.mus.len() {
        return Err(Error::InvalidArgument("supplies required".into()));
    }
    Ok(numeric::sum(
        (0..spec.mus.len()).map(|j| spec.weights[j] * resource_guarantee(spec.mus[j], spec.supplies[j], n)),
    ))
}

/// Objective of the endowment problem at supplies `s`.
pub fn endowment_objective(spec: &MultiResourceSpec, s: &[f64], n: usize) -> f64 {
    numeric::sum((0..s.len()).map(|j| spec.weights[j] * resource_guarantee(spec.mus[j], s[j], n)))
}

/// Maximizes the multi-resource guarantee subject to `Σ c_j s_j ≤ B`.
///
/// Each term is linear in `s` up to the kink `nμ/(n+1)` and `1 − cμ/s`
/// beyond it (with `c = n/(2(n+1))`), so for a budget multiplier `λ` every
/// coordinate has a closed-form best response. `λ` is found by bisection;
/// coordinates whose linear slope equals `λ` share the leftover budget.
pub fn optimize_endowment(spec: &MultiResourceSpec, n: usize) -> Result<Vec<f64>> {
    spec.validate()?;
    if !(spec.budget > 0.0) || spec.costs.iter().any(|c| !(*c > 0.0)) {
        return Err(Error::InfeasibleBudget(format!(
            "need a positive budget and positive costs (budget {}, costs {:?})",
            spec.budget, spec.costs
        )));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("n must be >= 1".into()));
    }
    let m = spec.mus.len();
    let nf = n as f64;
    let cc = nf / (2.0 * (nf + 1.0));
    let live: Vec<usize> = (0..m)
        .filter(|&j| spec.weights[j] > 0.0 && spec.mus[j] > 0.0)
        .collect();
    let mut s = vec![0.0; m];
    if live.is_empty() {
        return Ok(s);
    }
    let kink = |j: usize| nf * spec.mus[j] / (nf + 1.0);
    let thresh = |j: usize| spec.weights[j] * (nf + 1.0) / (2.0 * nf * spec.mus[j] * spec.costs[j]);
    let interior = |j: usize, lam: f64| (spec.weights[j] * cc * spec.mus[j] / (lam * spec.costs[j])).sqrt();
    let spend = |lam: f64| -> f64 {
        live.iter()
            .filter(|&&j| lam < thresh(j))
            .map(|&j| spec.costs[j] * interior(j, lam))
            .sum()
    };
    let b = spec.budget;
    let mut hi = live.iter().map(|&j| thresh(j)).fold(0.0, f64::max);
    let mut lo = hi;
    while spend(lo) < b {
        lo /= 4.0;
        if lo < 1e-300 {
            break;
        }
    }
    for _ in 0..300 {
        let mid = (lo * hi).sqrt();
        if mid <= lo || mid >= hi {
            break;
        }
        if spend(mid) >= b {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let lam = hi;
    let rel = 1e-9;
    let mut used = Sum::new();
    let mut tied = Vec::new();
    for &j in &live {
        let t = thresh(j);
        if t > lam * (1.0 + rel) {
            s[j] = interior(j, lam);
            used.add(spec.costs[j] * s[j]);
        } else if t >= lam * (1.0 - rel) {
            tied.push(j);
        }
    }
    let rest = b - used.value();
    if tied.is_empty() || rest <= 0.0 {
        let spent = used.value();
        if spent > 0.0 {
            for x in s.iter_mut() {
                *x *= b / spent;
            }
        }
    } else {
        let cap: f64 = tied.iter().map(|&j| spec.costs[j] * kink(j)).sum();
        let share = (rest / cap).min(1.0);
        for &j in &tied {
            s[j] = kink(j) * share;
        }
    }
    Ok(s)
}

/// Coupled hard instance across resources: every resource's marginal is the
/// single-resource hard instance at its own scarcity, and all resources share
/// the scenario index, hence the last agent with positive demand. Returns
/// scenarios with `demands[j][i]` for resource `j`, agent `i`.
pub fn coupled_hard_instance(n: usize, mus: &[f64]) -> Result<Vec<(f64, Vec<Vec<f64>>)>> {
    let over = |mu: f64| mu >= 1.0 + 1.0 / n as f64;
    let models: Vec<DemandModel> = if mus.iter().all(|&u| over(u)) {
        mus.iter()
            .map(|&u| crate::instances::hard_instance_overdemanded(n, u))
            .collect::<Result<_>>()?
    } else if mus.windows(2).all(|w| w[0] == w[1]) {
        mus.iter()
            .map(|&u| crate::instances::hard_instance_underdemanded(n, u))
            .collect::<Result<_>>()?
    } else {
        return Err(Error::InvalidArgument(
            "coupling needs all resources over-demanded or equal scarcities".into(),
        ));
    };
    let scen: Vec<&[Scenario]> = models
        .iter()
        .map(|m| match m {
            DemandModel::FiniteSupport(f) => f.scenarios(),
            _ => unreachable!("generators return finite support"),
        })
        .collect();
    Ok((0..scen[0].len())
        .map(|k| (scen[0][k].prob, scen.iter().map(|s| s[k].demands.clone()).collect()))
        .collect())
}

/// Exact expected minimum weighted fill rate when each resource (unit
/// supply) runs its own PPA on its own marginal.
pub fn multi_resource_ppa_exact(scenarios: &[(f64, Vec<Vec<f64>>)], weights: &[f64]) -> Result<f64> {
    let m = weights.len();
    let marginals: Vec<DemandModel> = (0..m)
        .map(|j| {
            DemandModel::finite(
                scenarios
                    .iter()
                    .map(|(p, d)| Scenario {
                        prob: *p,
                        demands: d[j].clone(),
                    })
                    .collect(),
            )
        })
        .collect::<Result<_>>()?;
    let ppa = Policy::Ppa { monotone: false };
    let mut total = Sum::new();
    for (p, d) in scenarios {
        let traces = (0..m)
            .map(|j| run_path(&ppa, &marginals[j], &d[j]))
            .collect::<Result<Vec<_>>>()?;
        let n = d[0].len();
        let worst = (0..n)
            .map(|i| (0..m).map(|j| weights[j] * traces[j].fill_rates[i]).sum::<f64>())
            .fold(f64::INFINITY, f64::min);
        total.add(p * worst);
    }
    Ok(total.value())
}
