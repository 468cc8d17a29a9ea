//! Sequential allocation policies.

pub mod dp;
pub mod ppa;
pub mod tfr;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{DemandModel, InstanceSpec};

pub use dp::{exact_dp_build, fptas_dp, DpTable, DEFAULT_STATE_BUDGET};
pub use ppa::{ppa_decide, ppa_monotone_decide};
pub use tfr::{optimal_tfr, tfr_decide};

/// Default number of thresholds searched by the optimal TFR policy.
pub const DEFAULT_TFR_GRID: usize = 1001;

/// Policy as named on the command line.
#[derive(Debug, Clone, PartialEq)]
pub enum PolicySpec {
    Ppa,
    PpaMonotone,
    Tfr(f64),
    OptimalTfr,
    Fixed(Vec<f64>),
    Offline,
    ExactDp(f64),
    Fptas(f64),
}

impl FromStr for PolicySpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |m: &str| Error::InvalidArgument(format!("policy '{s}': {m}"));
        let num = |v: &str| v.trim().parse::<f64>().map_err(|_| bad("bad number"));
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s, None),
        };
        match (head.trim(), arg) {
            ("ppa", None) => Ok(PolicySpec::Ppa),
            ("ppa-monotone", None) => Ok(PolicySpec::PpaMonotone),
            ("opt-tfr", None) => Ok(PolicySpec::OptimalTfr),
            ("offline", None) => Ok(PolicySpec::Offline),
            ("tfr", Some(a)) => {
                let tau = num(a)?;
                if !(0.0..=1.0).contains(&tau) {
                    return Err(bad("tau must be in [0, 1]"));
                }
                Ok(PolicySpec::Tfr(tau))
            }
            ("fixed", Some(a)) => Ok(PolicySpec::Fixed(
                a.split(',').map(num).collect::<Result<Vec<_>>>()?,
            )),
            ("dp", Some(a)) => Ok(PolicySpec::ExactDp(num(a)?)),
            ("fptas", Some(a)) => Ok(PolicySpec::Fptas(num(a)?)),
            _ => Err(bad("unknown policy")),
        }
    }
}

impl fmt::Display for PolicySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicySpec::Ppa => write!(f, "ppa"),
            PolicySpec::PpaMonotone => write!(f, "ppa-monotone"),
            PolicySpec::Tfr(t) => write!(f, "tfr:{t}"),
            PolicySpec::OptimalTfr => write!(f, "opt-tfr"),
            PolicySpec::Fixed(x) => {
                let parts: Vec<String> = x.iter().map(|v| v.to_string()).collect();
                write!(f, "fixed:{}", parts.join(","))
            }
            PolicySpec::Offline => write!(f, "offline"),
            PolicySpec::ExactDp(e) => write!(f, "dp:{e}"),
            PolicySpec::Fptas(e) => write!(f, "fptas:{e}"),
        }
    }
}

/// Information available when agent `agent` arrives.
#[derive(Debug, Clone, Copy)]
pub struct Context<'a> {
    pub agent: usize,
    /// Full demand path; online policies read only `demands[..=agent]`.
    pub demands: &'a [f64],
    /// Remaining supply `s_i`.
    pub supply: f64,
    /// Minimum fill rate among earlier agents (1 for the first agent).
    pub min_fill_rate: f64,
    pub model: &'a DemandModel,
}

impl Context<'_> {
    pub fn demand(&self) -> f64 {
        self.demands[self.agent]
    }

    pub fn observed(&self) -> &[f64] {
        &self.demands[..=self.agent]
    }
}

/// A deterministic allocation rule, ready to run on an instance.
#[derive(Debug, Clone)]
pub enum Policy {
    Ppa { monotone: bool },
    Tfr { tau: f64, optimized: bool },
    /// Per-agent amounts in supply units.
    Fixed(Vec<f64>),
    Offline,
    Dp { table: Arc<DpTable>, fptas: bool },
}

impl Policy {
    /// Resolves a policy description against an instance (computing the
    /// optimal threshold or DP table when needed).
    pub fn build(spec: &PolicySpec, instance: &InstanceSpec) -> Result<Self> {
        let model = instance.model();
        Ok(match spec {
            PolicySpec::Ppa => Policy::Ppa { monotone: false },
            PolicySpec::PpaMonotone => Policy::Ppa { monotone: true },
            PolicySpec::Tfr(tau) => {
                if !(0.0..=1.0).contains(tau) {
                    return Err(Error::InvalidArgument(format!("tau {tau} not in [0, 1]")));
                }
                Policy::Tfr {
                    tau: *tau,
                    optimized: false,
                }
            }
            PolicySpec::OptimalTfr => Policy::Tfr {
                tau: optimal_tfr(model, DEFAULT_TFR_GRID),
                optimized: true,
            },
            PolicySpec::Fixed(x) => {
                if x.len() != instance.n_agents {
                    return Err(Error::InvalidArgument(format!(
                        "fixed allocation has {} entries for {} agents",
                        x.len(),
                        instance.n_agents
                    )));
                }
                if x.iter().any(|v| !(*v >= 0.0)) {
                    return Err(Error::InvalidArgument("fixed allocations must be >= 0".into()));
                }
                let total: f64 = x.iter().sum();
                if total > instance.supply * (1.0 + 1e-12) {
                    return Err(Error::InvalidArgument(format!(
                        "fixed allocations sum to {total}, above supply {}",
                        instance.supply
                    )));
                }
                Policy::Fixed(x.iter().map(|v| v / instance.supply).collect())
            }
            PolicySpec::Offline => Policy::Offline,
            PolicySpec::ExactDp(eps) => Policy::Dp {
                table: Arc::new(exact_dp_build(model, *eps, DEFAULT_STATE_BUDGET)?),
                fptas: false,
            },
            PolicySpec::Fptas(eps) => Policy::Dp {
                table: Arc::new(fptas_dp(model, *eps, DEFAULT_STATE_BUDGET)?),
                fptas: true,
            },
        })
    }

    pub fn name(&self) -> String {
        match self {
            Policy::Ppa { monotone: false } => "ppa".into(),
            Policy::Ppa { monotone: true } => "ppa-monotone".into(),
            Policy::Tfr {
                tau,
                optimized: true,
            } => format!("opt-tfr(tau={tau})"),
            Policy::Tfr { tau, .. } => format!("tfr:{tau}"),
            Policy::Fixed(_) => "fixed".into(),
            Policy::Offline => "offline".into(),
            Policy::Dp { table, fptas } => {
                format!("{}:{}", if *fptas { "fptas" } else { "dp" }, table.eps())
            }
        }
    }

    /// Allocation for the arriving agent, in supply units.
    pub fn decide(&self, ctx: &Context<'_>) -> f64 {
        let d = ctx.demand();
        let s = ctx.supply;
        match self {
            Policy::Ppa { monotone } => {
                let mu_next = ctx.model.conditional_future_mean(ctx.observed());
                if *monotone {
                    ppa_monotone_decide(d, s, mu_next, ctx.min_fill_rate)
                } else {
                    ppa_decide(d, s, mu_next)
                }
            }
            Policy::Tfr { tau, .. } => tfr_decide(*tau, d, s),
            Policy::Fixed(x) => x[ctx.agent].min(d).min(s),
            Policy::Offline => {
                let total: f64 = ctx.demands.iter().sum();
                let rate = if total > 1.0 { 1.0 / total } else { 1.0 };
                (d * rate).min(s)
            }
            Policy::Dp { table, .. } => table.decide(ctx.observed(), s),
        }
    }
}

/// Best achievable minimum fill rate with hindsight and the proportional
/// allocation attaining it.
pub fn offline_min_fr(demands: &[f64], supply: f64) -> (f64, Vec<f64>) {
    let total: f64 = demands.iter().sum();
    let rate = if total > supply { supply / total } else { 1.0 };
    (rate, demands.iter().map(|d| d * rate).collect())
}
