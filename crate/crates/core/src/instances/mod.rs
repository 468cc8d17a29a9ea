//! Generators for structured instances.

pub mod eafr;

use crate::bounds::q_hat;
use crate::error::{Error, Result};
use crate::model::{DemandModel, Scenario};
use crate::numeric;

pub use eafr::{eafr_max, EafrCurve, InverseDemand, WorstCaseTfrCdf};

/// `n` equiprobable scenarios; scenario `σ` gives demand `2μ/(n+1)` to agents
/// `1..=σ`. Requires `μ ≥ 1 + 1/n`.
pub fn hard_instance_overdemanded(n: usize, mu: f64) -> Result<DemandModel> {
    if n == 0 || !(mu >= 1.0 + 1.0 / n as f64) {
        return Err(Error::InvalidArgument(format!(
            "over-demanded instance needs mu >= 1 + 1/n (n={n}, mu={mu})"
        )));
    }
    let d = 2.0 * mu / (n as f64 + 1.0);
    DemandModel::finite(
        (1..=n)
            .map(|sigma| Scenario {
                prob: 1.0 / n as f64,
                demands: (0..n).map(|i| if i < sigma { d } else { 0.0 }).collect(),
            })
            .collect(),
    )
}

/// Scenario `σ ∈ 1..=n` w.p. `μ/(n+1)` gives demand `2/n` to agents
/// `1..=σ`; the remaining mass is the all-zero scenario. Requires
/// `0 < μ < 1 + 1/n`.
pub fn hard_instance_underdemanded(n: usize, mu: f64) -> Result<DemandModel> {
    if n == 0 || !(mu > 0.0 && mu < 1.0 + 1.0 / n as f64) {
        return Err(Error::InvalidArgument(format!(
            "under-demanded instance needs 0 < mu < 1 + 1/n (n={n}, mu={mu})"
        )));
    }
    let nf = n as f64;
    let p = mu / (nf + 1.0);
    let d = 2.0 / nf;
    let mut scenarios: Vec<Scenario> = (1..=n)
        .map(|sigma| Scenario {
            prob: p,
            demands: (0..n).map(|i| if i < sigma { d } else { 0.0 }).collect(),
        })
        .collect();
    let rest = 1.0 - nf * p;
    if rest > 0.0 {
        scenarios.push(Scenario {
            prob: rest,
            demands: vec![0.0; n],
        });
    }
    DemandModel::finite(scenarios)
}

/// Two agents: `(4/3+ε, 4/3)` and `(4/3+ε, 0)`, each w.p. 1/2.
pub fn example1_instance(epsilon: f64) -> Result<DemandModel> {
    let d1 = 4.0 / 3.0 + epsilon;
    if !(d1 >= 0.0) {
        return Err(Error::InvalidArgument(format!("epsilon {epsilon} too negative")));
    }
    DemandModel::finite(vec![
        Scenario {
            prob: 0.5,
            demands: vec![d1, 4.0 / 3.0],
        },
        Scenario {
            prob: 0.5,
            demands: vec![d1, 0.0],
        },
    ])
}

/// Embeds the worst-case TFR distribution: `d₁ = (1−ε)/v` with `v` drawn from
/// the `atoms`-point discretization, `d₂ = εμ`. With `n_agents > 2`,
/// zero-demand agents are placed in front.
pub fn worstcase_tfr_model(mu: f64, epsilon: f64, atoms: usize, n_agents: usize) -> Result<DemandModel> {
    if !(mu > 0.0) || !(epsilon > 0.0 && epsilon <= 0.1) || atoms == 0 || n_agents < 2 {
        return Err(Error::InvalidArgument(format!(
            "worst-case TFR model needs mu > 0, epsilon in (0, 0.1], atoms >= 1, n >= 2 (got {mu}, {epsilon}, {atoms}, {n_agents})"
        )));
    }
    let cdf = WorstCaseTfrCdf::new(mu);
    let pad = n_agents - 2;
    let scenarios = cdf
        .discretize(atoms)
        .into_iter()
        .map(|(total, prob)| {
            let mut demands = vec![0.0; pad];
            demands.push((1.0 - epsilon) * total);
            demands.push(epsilon * mu);
            Scenario { prob, demands }
        })
        .collect();
    DemandModel::finite(scenarios)
}

/// Expected total demand `E[1/v]` of a discretization.
pub fn discretized_mean(atoms: &[(f64, f64)]) -> f64 {
    numeric::sum(atoms.iter().map(|(d, p)| d * p))
}

/// Knee `q̂` at scarcity `mu`.
pub fn worstcase_q_hat(mu: f64) -> f64 {
    q_hat(mu)
}
