//! Policy evaluation: exact enumeration or seeded Monte Carlo.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{normalization_factor, AllocationTrace, DemandModel, InstanceSpec, ALLOCATION_TOL};
use crate::numeric::Sum;
use crate::policies::{Context, Policy};

/// Summary of a policy's fairness on an instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    pub policy: String,
    pub mu: f64,
    pub ex_post: f64,
    pub ex_ante: f64,
    pub ex_post_fairness: f64,
    pub ex_ante_fairness: f64,
    pub waste: f64,
    pub offline_ex_post: f64,
    pub paths_used: usize,
    pub half_width_95: f64,
    pub exact: bool,
}

/// Runs `policy` along one demand path (supply units, initial supply 1).
pub fn run_path(policy: &Policy, model: &DemandModel, demands: &[f64]) -> Result<AllocationTrace> {
    let n = demands.len();
    let mut allocations = Vec::with_capacity(n);
    let mut fill_rates = Vec::with_capacity(n);
    let mut remaining = Vec::with_capacity(n + 1);
    let mut s = 1.0f64;
    let mut f = 1.0f64;
    remaining.push(s);
    for (i, &d) in demands.iter().enumerate() {
        let ctx = Context {
            agent: i,
            demands,
            supply: s,
            min_fill_rate: f,
            model,
        };
        let x = policy.decide(&ctx);
        let cap = d.min(s);
        if !(x >= 0.0) || x > cap + ALLOCATION_TOL * cap.max(1.0) {
            return Err(Error::AllocationExceedsDemand {
                agent: i,
                allocation: x,
                demand: cap,
            });
        }
        let x = x.min(cap);
        let fr = if d > 0.0 { x / d } else { 1.0 };
        f = f.min(fr);
        s -= x;
        allocations.push(x);
        fill_rates.push(fr);
        remaining.push(s);
    }
    Ok(AllocationTrace {
        demands: demands.to_vec(),
        allocations,
        fill_rates,
        remaining_supply: remaining,
    })
}

/// Runs `policy` on every weighted path.
pub fn run_weighted(
    policy: &Policy,
    model: &DemandModel,
    paths: &[(f64, Vec<f64>)],
) -> Result<Vec<AllocationTrace>> {
    paths
        .par_iter()
        .map(|(_, d)| run_path(policy, model, d))
        .collect()
}

/// Aggregates weighted traces into a report. When `exact` is false the
/// weights are treated as equal-probability samples and a 95% normal
/// half-width is attached.
pub fn summarize(
    name: &str,
    mu: f64,
    weights: &[f64],
    traces: &[AllocationTrace],
    exact: bool,
) -> FairnessReport {
    let n = traces.first().map(|t| t.demands.len()).unwrap_or(0);
    let mut ex_post = Sum::new();
    let mut sq = Sum::new();
    let mut waste = Sum::new();
    let mut offline = Sum::new();
    let mut per_agent = vec![Sum::new(); n];
    let mut wsum = Sum::new();
    for (w, t) in weights.iter().zip(traces) {
        let m = t.min_fill_rate();
        wsum.add(*w);
        ex_post.add(w * m);
        sq.add(w * m * m);
        waste.add(w * t.waste());
        let total: f64 = t.demands.iter().sum();
        offline.add(w * if total > 1.0 { 1.0 / total } else { 1.0 });
        for (acc, fr) in per_agent.iter_mut().zip(&t.fill_rates) {
            acc.add(w * fr);
        }
    }
    let wt = wsum.value();
    let ex_post = ex_post.value() / wt;
    let ex_ante = per_agent
        .iter()
        .map(|a| a.value() / wt)
        .fold(1.0f64, f64::min);
    let half_width_95 = if exact || traces.len() < 2 {
        0.0
    } else {
        let p = traces.len() as f64;
        let var = ((sq.value() / wt - ex_post * ex_post) * p / (p - 1.0)).max(0.0);
        1.96 * (var / p).sqrt()
    };
    let wbar = normalization_factor(mu);
    FairnessReport {
        policy: name.to_string(),
        mu,
        ex_post,
        ex_ante,
        ex_post_fairness: ex_post / wbar,
        ex_ante_fairness: ex_ante / wbar,
        waste: (waste.value() / wt).clamp(0.0, 1.0),
        offline_ex_post: offline.value() / wt,
        paths_used: traces.len(),
        half_width_95,
        exact,
    }
}

/// Exact traces over the full support, when the support is small enough.
pub fn exact_traces(
    instance: &InstanceSpec,
    policy: &Policy,
) -> Result<Option<(Vec<f64>, Vec<AllocationTrace>)>> {
    let model = instance.model();
    if matches!(model, DemandModel::SampleBank(_)) {
        return Ok(None);
    }
    let Some(paths) = model.enumerate() else {
        return Ok(None);
    };
    let traces = run_weighted(policy, model, &paths)?;
    Ok(Some((paths.into_iter().map(|p| p.0).collect(), traces)))
}

/// Evaluates `policy` on `instance`.
///
/// Finite models with at most a million scenarios are enumerated exactly.
/// Sample banks are evaluated on their rows as an empirical distribution.
/// Other models use `paths` Monte Carlo draws; path `k` uses the ChaCha
/// stream `k` of `seed`, so results do not depend on the thread count.
pub fn evaluate_policy(
    instance: &InstanceSpec,
    policy: &Policy,
    paths: usize,
    seed: u64,
) -> Result<FairnessReport> {
    if paths == 0 {
        return Err(Error::InvalidArgument("paths must be >= 1".into()));
    }
    let model = instance.model();
    let mu = instance.mu();
    if let DemandModel::SampleBank(bank) = model {
        return evaluate_paths(policy, model, bank.rows(), mu);
    }
    if let Some((w, traces)) = exact_traces(instance, policy)? {
        return Ok(summarize(&policy.name(), mu, &w, &traces, true));
    }
    let traces: Vec<AllocationTrace> = (0..paths as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k);
            run_path(policy, model, &model.sample_path(&mut rng))
        })
        .collect::<Result<_>>()?;
    let w = vec![1.0 / paths as f64; paths];
    Ok(summarize(&policy.name(), mu, &w, &traces, false))
}

/// Evaluates on explicit equally weighted paths (supply units), with the
/// policy reading conditional means from `model`.
pub fn evaluate_paths(
    policy: &Policy,
    model: &DemandModel,
    paths: &[Vec<f64>],
    mu: f64,
) -> Result<FairnessReport> {
    if paths.is_empty() {
        return Err(Error::InvalidArgument("no evaluation paths".into()));
    }
    let traces: Vec<AllocationTrace> = paths
        .par_iter()
        .map(|d| run_path(policy, model, d))
        .collect::<Result<_>>()?;
    let w = vec![1.0 / paths.len() as f64; paths.len()];
    Ok(summarize(&policy.name(), mu, &w, &traces, false))
}

/// `report.ex_post / W̄(mu)`.
pub fn ex_post_fairness(report: &FairnessReport, mu: f64) -> f64 {
    report.ex_post / normalization_factor(mu)
}
