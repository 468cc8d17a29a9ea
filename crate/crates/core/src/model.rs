//! Instances, demand models, fill rates and allocation traces.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{self, Sum};
use crate::seir::SamplePathBank;
use crate::tree::DemandTree;

/// Slack allowed when checking that an allocation does not exceed demand.
pub const ALLOCATION_TOL: f64 = 1e-12;

/// Largest scenario count evaluated by full enumeration.
pub const EXACT_LIMIT: usize = 1_000_000;

/// Fraction of `demand` met by `allocation`; 1 when both are zero.
pub fn fill_rate(allocation: f64, demand: f64) -> Result<f64> {
    if allocation > demand + ALLOCATION_TOL * demand.max(1.0) {
        return Err(Error::AllocationExceedsDemand {
            agent: 0,
            allocation,
            demand,
        });
    }
    if demand <= 0.0 {
        return Ok(1.0);
    }
    Ok((allocation / demand).clamp(0.0, 1.0))
}

/// Minimum fill rate attainable with deterministic demand: `min{1, 1/mu}`.
pub fn normalization_factor(mu: f64) -> f64 {
    if mu <= 1.0 {
        1.0
    } else {
        1.0 / mu
    }
}

/// One scenario of a finite joint distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub prob: f64,
    pub demands: Vec<f64>,
}

/// One atom of a discrete marginal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub value: f64,
    pub prob: f64,
}

fn check_demands(ds: &[f64]) -> Result<()> {
    if ds.iter().any(|d| !d.is_finite() || *d < 0.0) {
        return Err(Error::InvalidInstance(format!(
            "demands must be finite and non-negative: {ds:?}"
        )));
    }
    Ok(())
}

fn check_probs(ps: impl Iterator<Item = f64> + Clone) -> Result<()> {
    if ps.clone().any(|p| !(p > 0.0 && p <= 1.0 + 1e-15)) {
        return Err(Error::InvalidInstance(
            "probabilities must lie in (0, 1]".into(),
        ));
    }
    let total = numeric::sum(ps);
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidInstance(format!(
            "probabilities sum to {total}, not 1"
        )));
    }
    Ok(())
}

/// Finite joint demand distribution with arbitrary correlation.
#[derive(Debug, Clone)]
pub struct FiniteSupport {
    scenarios: Vec<Scenario>,
    tree: DemandTree,
    cumulative: Vec<f64>,
}

impl FiniteSupport {
    pub fn new(scenarios: Vec<Scenario>) -> Result<Self> {
        let n = scenarios
            .first()
            .map(|s| s.demands.len())
            .ok_or_else(|| Error::InvalidInstance("no scenarios".into()))?;
        if n == 0 {
            return Err(Error::InvalidInstance("no agents".into()));
        }
        for s in &scenarios {
            if s.demands.len() != n {
                return Err(Error::InvalidInstance(
                    "scenarios have different agent counts".into(),
                ));
            }
            check_demands(&s.demands)?;
        }
        check_probs(scenarios.iter().map(|s| s.prob))?;
        let probs: Vec<f64> = scenarios.iter().map(|s| s.prob).collect();
        let demands: Vec<Vec<f64>> = scenarios.iter().map(|s| s.demands.clone()).collect();
        let tree = DemandTree::from_scenarios(n, &probs, &demands);
        let mut acc = Sum::new();
        let cumulative = probs
            .iter()
            .map(|p| {
                acc.add(*p);
                acc.value()
            })
            .collect();
        Ok(Self {
            scenarios,
            tree,
            cumulative,
        })
    }

    pub fn scenarios(&self) -> &[Scenario] {
        &self.scenarios
    }

    pub fn tree(&self) -> &DemandTree {
        &self.tree
    }
}

/// Independent discrete marginals, one per agent.
#[derive(Debug, Clone)]
pub struct Independent {
    marginals: Vec<Vec<Atom>>,
    tree: DemandTree,
}

impl Independent {
    pub fn new(marginals: Vec<Vec<Atom>>) -> Result<Self> {
        if marginals.is_empty() {
            return Err(Error::InvalidInstance("no agents".into()));
        }
        for m in &marginals {
            if m.is_empty() {
                return Err(Error::InvalidInstance("empty marginal".into()));
            }
            check_demands(&m.iter().map(|a| a.value).collect::<Vec<_>>())?;
            check_probs(m.iter().map(|a| a.prob))?;
        }
        let pairs: Vec<Vec<(f64, f64)>> = marginals
            .iter()
            .map(|m| m.iter().map(|a| (a.value, a.prob)).collect())
            .collect();
        let tree = DemandTree::chain(&pairs);
        Ok(Self { marginals, tree })
    }

    pub fn marginals(&self) -> &[Vec<Atom>] {
        &self.marginals
    }

    pub fn tree(&self) -> &DemandTree {
        &self.tree
    }

    /// Size of the product support, saturating.
    pub fn scenario_count(&self) -> usize {
        self.marginals
            .iter()
            .fold(1usize, |acc, m| acc.saturating_mul(m.len()))
    }
}

/// Oracle for a joint demand distribution.
#[derive(Debug, Clone)]
pub enum DemandModel {
    FiniteSupport(FiniteSupport),
    Independent(Independent),
    SampleBank(SamplePathBank),
}

impl DemandModel {
    pub fn finite(scenarios: Vec<Scenario>) -> Result<Self> {
        FiniteSupport::new(scenarios).map(DemandModel::FiniteSupport)
    }

    pub fn independent(marginals: Vec<Vec<Atom>>) -> Result<Self> {
        Independent::new(marginals).map(DemandModel::Independent)
    }

    pub fn n_agents(&self) -> usize {
        match self {
            DemandModel::FiniteSupport(f) => f.tree.n_agents(),
            DemandModel::Independent(m) => m.marginals.len(),
            DemandModel::SampleBank(b) => b.n_agents(),
        }
    }

    /// Expected total demand.
    pub fn mean_total(&self) -> f64 {
        match self {
            DemandModel::FiniteSupport(f) => f.tree.node(0).future_mean,
            DemandModel::Independent(m) => m.tree.node(0).future_mean,
            DemandModel::SampleBank(b) => b.mean_total(),
        }
    }

    /// Expected demand of agents `prefix.len()+1..n` given the realized prefix.
    pub fn conditional_future_mean(&self, prefix: &[f64]) -> f64 {
        if prefix.len() >= self.n_agents() {
            return 0.0;
        }
        match self {
            DemandModel::FiniteSupport(f) => f.tree.conditional_future_mean(prefix),
            DemandModel::Independent(m) => m.tree.conditional_future_mean(prefix),
            DemandModel::SampleBank(b) => b.knn_conditional_mean(prefix),
        }
    }

    /// Largest demand value any agent can have.
    pub fn max_demand(&self) -> f64 {
        let fold = |it: &mut dyn Iterator<Item = f64>| it.fold(0.0f64, f64::max);
        match self {
            DemandModel::FiniteSupport(f) => {
                fold(&mut f.scenarios.iter().flat_map(|s| s.demands.iter().copied()))
            }
            DemandModel::Independent(m) => {
                fold(&mut m.marginals.iter().flatten().map(|a| a.value))
            }
            DemandModel::SampleBank(b) => fold(&mut b.rows().iter().flatten().copied()),
        }
    }

    /// Whether some agent-`n` demand realization is positive.
    pub fn last_agent_can_demand(&self) -> bool {
        match self {
            DemandModel::FiniteSupport(f) => f
                .scenarios
                .iter()
                .any(|s| s.demands.last().copied().unwrap_or(0.0) > 0.0),
            DemandModel::Independent(m) => m
                .marginals
                .last()
                .is_some_and(|l| l.iter().any(|a| a.value > 0.0)),
            DemandModel::SampleBank(b) => b
                .rows()
                .iter()
                .any(|r| r.last().copied().unwrap_or(0.0) > 0.0),
        }
    }

    /// Same distribution with every demand multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Ok(match self {
            DemandModel::FiniteSupport(f) => DemandModel::finite(
                f.scenarios
                    .iter()
                    .map(|s| Scenario {
                        prob: s.prob,
                        demands: s.demands.iter().map(|d| d * factor).collect(),
                    })
                    .collect(),
            )?,
            DemandModel::Independent(m) => DemandModel::independent(
                m.marginals
                    .iter()
                    .map(|mg| {
                        mg.iter()
                            .map(|a| Atom {
                                value: a.value * factor,
                                prob: a.prob,
                            })
                            .collect()
                    })
                    .collect(),
            )?,
            DemandModel::SampleBank(b) => DemandModel::SampleBank(b.scaled(factor)),
        })
    }

    /// Number of support points when the distribution is finite.
    pub fn scenario_count(&self) -> usize {
        match self {
            DemandModel::FiniteSupport(f) => f.scenarios.len(),
            DemandModel::Independent(m) => m.scenario_count(),
            DemandModel::SampleBank(b) => b.rows().len(),
        }
    }

    /// Full support as `(probability, demands)` pairs when it has at most
    /// [`EXACT_LIMIT`] points. Sample banks are treated as their empirical
    /// distribution.
    pub fn enumerate(&self) -> Option<Vec<(f64, Vec<f64>)>> {
        if self.scenario_count() > EXACT_LIMIT {
            return None;
        }
        Some(match self {
            DemandModel::FiniteSupport(f) => f
                .scenarios
                .iter()
                .map(|s| (s.prob, s.demands.clone()))
                .collect(),
            DemandModel::Independent(m) => {
                let mut out = vec![(1.0, Vec::with_capacity(m.marginals.len()))];
                for marg in &m.marginals {
                    out = out
                        .into_iter()
                        .flat_map(|(p, ds)| {
                            marg.iter().map(move |a| {
                                let mut d = ds.clone();
                                d.push(a.value);
                                (p * a.prob, d)
                            })
                        })
                        .collect();
                }
                out
            }
            DemandModel::SampleBank(b) => {
                let w = 1.0 / b.rows().len() as f64;
                b.rows().iter().map(|r| (w, r.clone())).collect()
            }
        })
    }

    /// Draws one full demand path.
    pub fn sample_path<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            DemandModel::FiniteSupport(f) => {
                let u: f64 = rng.random::<f64>() * f.cumulative.last().copied().unwrap_or(1.0);
                let i = f.cumulative.partition_point(|c| *c <= u);
                f.scenarios[i.min(f.scenarios.len() - 1)].demands.clone()
            }
            DemandModel::Independent(m) => m
                .marginals
                .iter()
                .map(|marg| {
                    let mut u: f64 = rng.random();
                    for a in marg {
                        if u < a.prob {
                            return a.value;
                        }
                        u -= a.prob;
                    }
                    marg.last().map(|a| a.value).unwrap_or(0.0)
                })
                .collect(),
            DemandModel::SampleBank(b) => b.rows()[rng.random_range(0..b.rows().len())].clone(),
        }
    }

    /// Prefix tree when the model is finite-support or independent.
    pub fn tree(&self) -> Option<&DemandTree> {
        match self {
            DemandModel::FiniteSupport(f) => Some(&f.tree),
            DemandModel::Independent(m) => Some(&m.tree),
            DemandModel::SampleBank(_) => None,
        }
    }
}

/// A demand model together with a supply level.
///
/// The model is stored rescaled so that supply equals 1; `supply` keeps the
/// original value.
#[derive(Debug, Clone)]
pub struct InstanceSpec {
    pub n_agents: usize,
    pub supply: f64,
    model: DemandModel,
}

impl InstanceSpec {
    pub fn new(model: DemandModel, supply: f64) -> Result<Self> {
        if !(supply > 0.0 && supply.is_finite()) {
            return Err(Error::InvalidInstance(format!(
                "supply must be positive, got {supply}"
            )));
        }
        if !model.last_agent_can_demand() {
            return Err(Error::InvalidInstance(
                "the last agent's demand is deterministically zero".into(),
            ));
        }
        let model = if supply == 1.0 {
            model
        } else {
            model.scaled(1.0 / supply)?
        };
        Ok(Self {
            n_agents: model.n_agents(),
            supply,
            model,
        })
    }

    /// Demand model in units of supply.
    pub fn model(&self) -> &DemandModel {
        &self.model
    }

    /// Supply scarcity: expected total demand over supply.
    pub fn mu(&self) -> f64 {
        self.model.mean_total()
    }
}

/// Per-agent record of one sample path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationTrace {
    pub demands: Vec<f64>,
    pub allocations: Vec<f64>,
    pub fill_rates: Vec<f64>,
    /// `s_1..s_{n+1}`.
    pub remaining_supply: Vec<f64>,
}

impl AllocationTrace {
    pub fn min_fill_rate(&self) -> f64 {
        self.fill_rates.iter().copied().fold(1.0, f64::min)
    }

    pub fn total_allocated(&self) -> f64 {
        self.allocations.iter().sum()
    }

    /// `(min{s, Σd} − Σx)/s` for initial supply `s`.
    pub fn waste(&self) -> f64 {
        let s = self.remaining_supply[0];
        let d: f64 = self.demands.iter().sum();
        ((s.min(d) - self.total_allocated()) / s).max(0.0)
    }

    /// Checks the feasibility and bookkeeping invariants.
    pub fn check(&self) -> Result<()> {
        let n = self.demands.len();
        if self.allocations.len() != n
            || self.fill_rates.len() != n
            || self.remaining_supply.len() != n + 1
        {
            return Err(Error::InvalidArgument("trace length mismatch".into()));
        }
        for i in 0..n {
            let (x, d, s) = (self.allocations[i], self.demands[i], self.remaining_supply[i]);
            if x < 0.0 || x > s || x > d {
                return Err(Error::AllocationExceedsDemand {
                    agent: i,
                    allocation: x,
                    demand: d.min(s),
                });
            }
            if self.remaining_supply[i + 1] != s - x {
                return Err(Error::InvalidArgument(format!(
                    "supply bookkeeping broken at agent {i}"
                )));
            }
            let fr = if d > 0.0 { x / d } else { 1.0 };
            if (fr - self.fill_rates[i]).abs() > 1e-12 {
                return Err(Error::InvalidArgument(format!(
                    "fill rate mismatch at agent {i}"
                )));
            }
        }
        Ok(())
    }
}
