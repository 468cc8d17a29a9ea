//! Independent oracles shared by the integration tests. Nothing here calls
//! into the library's policies or conditional-mean machinery.

#![allow(dead_code)]

use rand::Rng;
use ration_lab::model::Scenario;

/// Scenarios in supply units (supply 1).
pub type Support = Vec<(f64, Vec<f64>)>;

/// Expected remaining demand from agent `i` on, given the first `i` demands,
/// by filtering the support. Returns 0 when nothing matches.
pub fn remaining_mean(support: &Support, prefix: &[f64]) -> f64 {
    let i = prefix.len();
    let (mut mass, mut total) = (0.0, 0.0);
    for (p, d) in support {
        if d[..i] == *prefix {
            mass += p;
            total += p * d[i..].iter().sum::<f64>();
        }
    }
    if mass > 0.0 {
        total / mass
    } else {
        0.0
    }
}

/// Straight-line projected proportional allocation on one path.
pub struct PpaPath {
    pub alloc: Vec<f64>,
    pub supply: Vec<f64>,
    pub fr: Vec<f64>,
    /// `μ_{i+1}` seen by agent `i`.
    pub mu_next: Vec<f64>,
}

pub fn ppa_path(support: &Support, d: &[f64]) -> PpaPath {
    let n = d.len();
    let mut s = 1.0;
    let mut out = PpaPath {
        alloc: vec![],
        supply: vec![1.0],
        fr: vec![],
        mu_next: vec![],
    };
    for i in 0..n {
        let mu = remaining_mean(support, &d[..=i]);
        let x = if d[i] <= 0.0 {
            0.0
        } else if mu <= 0.0 {
            d[i].min(s)
        } else {
            d[i].min(s * d[i] / (d[i] + mu))
        };
        out.fr.push(if d[i] > 0.0 { x / d[i] } else { 1.0 });
        out.alloc.push(x);
        out.mu_next.push(mu);
        s -= x;
        out.supply.push(s);
    }
    out
}

pub fn min_fr(fr: &[f64]) -> f64 {
    fr.iter().copied().fold(1.0, f64::min)
}

/// Random finite support with `n` agents and at most `max_scen` scenarios,
/// demands drawn from a coarse lattice so prefixes are shared. The last
/// agent has positive demand in at least one scenario. Total demand is
/// rescaled to scarcity `mu`.
pub fn random_support<R: Rng>(rng: &mut R, n: usize, max_scen: usize, mu: f64) -> Vec<Scenario> {
    let k = rng.random_range(1..=max_scen);
    let levels = [0.0, 0.5, 1.0, 1.5, 2.0, 3.0];
    let mut weights: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
    let wsum: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= wsum);
    let mut demands: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..n).map(|_| levels[rng.random_range(0..levels.len())]).collect())
        .collect();
    if demands.iter().all(|d| d[n - 1] == 0.0) {
        demands[0][n - 1] = 1.0;
    }
    let mean: f64 = weights
        .iter()
        .zip(&demands)
        .map(|(w, d)| w * d.iter().sum::<f64>())
        .sum();
    let scale = mu / mean;
    // Normalize probabilities so they sum to 1 up to the last ulp.
    let last = 1.0 - weights[..k - 1].iter().sum::<f64>();
    weights[k - 1] = last;
    weights
        .into_iter()
        .zip(demands)
        .map(|(prob, d)| Scenario {
            prob,
            demands: d.into_iter().map(|v| v * scale).collect(),
        })
        .collect()
}

pub fn to_support(sc: &[Scenario]) -> Support {
    sc.iter().map(|s| (s.prob, s.demands.clone())).collect()
}

/// Distinct prefixes of every length `0..=n` present in the support.
pub fn prefixes(support: &Support) -> Vec<Vec<f64>> {
    let n = support[0].1.len();
    let mut out: Vec<Vec<f64>> = Vec::new();
    for i in 0..=n {
        for (_, d) in support {
            let p = d[..i].to_vec();
            if !out.contains(&p) {
                out.push(p);
            }
        }
    }
    out
}

/// Violations of the value-to-go lower bound over every realized prefix.
///
/// With `f` the running minimum fill rate, `β = min{f, (n+1)/(nμ)}` and
/// `μ_i` the expected remaining demand including agent `i`, the exact
/// conditional expectation of the final minimum fill rate must be at least
/// `β(1 − (n+1−i)/(2(n+2−i))·(μ_i/s_i)·β)` (1-based `i`).
pub fn value_to_go_violations(support: &Support, tol: f64) -> Vec<String> {
    let n = support[0].1.len();
    let mu: f64 = support.iter().map(|(p, d)| p * d.iter().sum::<f64>()).sum();
    let cap = if mu > 0.0 { (n as f64 + 1.0) / (n as f64 * mu) } else { f64::INFINITY };
    let paths: Vec<(f64, &Vec<f64>, PpaPath)> = support
        .iter()
        .map(|(p, d)| (*p, d, ppa_path(support, d)))
        .collect();
    let mut bad = Vec::new();
    for prefix in prefixes(support) {
        let k = prefix.len(); // agents already served; next agent is k+1
        let matching: Vec<&(f64, &Vec<f64>, PpaPath)> =
            paths.iter().filter(|(_, d, _)| d[..k] == *prefix).collect();
        let mass: f64 = matching.iter().map(|m| m.0).sum();
        let lhs: f64 = matching.iter().map(|m| m.0 * min_fr(&m.2.fr)).sum::<f64>() / mass;
        let path = &matching[0].2;
        let f = min_fr(&path.fr[..k]);
        let beta = f.min(cap);
        let s = path.supply[k];
        let mu_i = remaining_mean(support, &prefix);
        let ratio = if s <= 0.0 { 0.0 } else { mu_i / s };
        let i = (k + 1) as f64;
        let nf = n as f64;
        let rhs = beta * (1.0 - (nf + 1.0 - i) / (2.0 * (nf + 2.0 - i)) * ratio * beta);
        if lhs < rhs - tol {
            bad.push(format!("prefix {prefix:?}: {lhs} < {rhs}"));
        }
    }
    bad
}

/// Violations of `E[(d_i + μ_{i+1})/s_i] ≤ μ` for each agent.
pub fn ratio_bound_violations(support: &Support, tol: f64) -> Vec<String> {
    let n = support[0].1.len();
    let mu: f64 = support.iter().map(|(p, d)| p * d.iter().sum::<f64>()).sum();
    let mut bad = Vec::new();
    for i in 0..n {
        let e: f64 = support
            .iter()
            .map(|(p, d)| {
                let path = ppa_path(support, d);
                let num = d[i] + path.mu_next[i];
                let s = path.supply[i];
                p * if s <= 0.0 { 0.0 } else { num / s }
            })
            .sum();
        if e > mu + tol {
            bad.push(format!("agent {i}: {e} > {mu}"));
        }
    }
    bad
}

/// `sup_τ∈[0,1] τ·P(V ≥ τ)` for a discrete law of `V = 1/total`, where zero
/// totals are `V = ∞`.
pub fn best_threshold_revenue(totals: &[(f64, f64)]) -> f64 {
    let mut v: Vec<(f64, f64)> = totals
        .iter()
        .map(|&(t, p)| (if t > 0.0 { 1.0 / t } else { f64::INFINITY }, p))
        .collect();
    v.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let mut tail = 0.0;
    let mut best: f64 = 0.0;
    for (val, p) in v {
        tail += p;
        let tau = val.min(1.0);
        best = best.max(tau * tail);
    }
    best
}
