//! Replication of the SEIR policy comparison: calibrate on one simulated
//! bank, evaluate on an independently seeded one.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{evaluate_paths, FairnessReport};
use crate::model::{DemandModel, Scenario};
use crate::numeric::derive_seed;
use crate::policies::dp::{exact_dp_build, round_up, DEFAULT_STATE_BUDGET};
use crate::policies::tfr::optimal_tfr_on;
use crate::policies::{Policy, DEFAULT_TFR_GRID};
use crate::seir::{build_bank, SamplePathBank, SeirConfig, UniformRange};

const EVAL_STREAM: u64 = 0xE7A1;
const CALIB_STREAM: u64 = 0xCA1B;
const DP_STREAM: u64 = 0xD9;

/// How the decision maker's model differs from the true dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setting {
    Base,
    /// Interaction drift believed to be `U(−0.05, 0.05)`.
    XiMisspec,
    /// Recovery rate believed to be 0.125.
    LambdaMisspec,
}

impl Setting {
    /// Configuration the policies are calibrated on.
    pub fn calibration_config(self, truth: &SeirConfig) -> SeirConfig {
        let mut c = truth.clone();
        match self {
            Setting::Base => {}
            Setting::XiMisspec => {
                c.xi_r = UniformRange {
                    low: -0.05,
                    high: 0.05,
                }
            }
            Setting::LambdaMisspec => c.lambda = 0.125,
        }
        c
    }
}

impl FromStr for Setting {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "base" => Ok(Setting::Base),
            "xi_misspec" | "xi-misspec" => Ok(Setting::XiMisspec),
            "lambda_misspec" | "lambda-misspec" => Ok(Setting::LambdaMisspec),
            _ => Err(Error::InvalidArgument(format!("unknown scenario {s:?}"))),
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Setting::Base => "base",
            Setting::XiMisspec => "xi_misspec",
            Setting::LambdaMisspec => "lambda_misspec",
        })
    }
}

/// Optional coarse DP row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpOptions {
    /// Demand levels between 0 and the largest calibration demand.
    pub levels: usize,
    pub calibration_paths: usize,
    pub state_budget: usize,
}

impl Default for DpOptions {
    fn default() -> Self {
        Self {
            levels: 20,
            calibration_paths: 10_000,
            state_budget: DEFAULT_STATE_BUDGET,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table2Config {
    pub scenario: Setting,
    pub truth: SeirConfig,
    pub eval_paths: usize,
    pub calibration_paths: usize,
    pub seed: u64,
    pub dp: Option<DpOptions>,
}

impl Table2Config {
    pub fn new(scenario: Setting, paths: usize, seed: u64) -> Self {
        Self {
            scenario,
            truth: SeirConfig::default(),
            eval_paths: paths,
            calibration_paths: paths,
            seed,
            dp: None,
        }
    }
}

/// One policy's row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table2Row {
    pub policy: String,
    pub ex_post_fairness: f64,
    pub waste: f64,
    pub report: FairnessReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table2Report {
    pub scenario: Setting,
    pub supply: f64,
    /// Coefficient of variation of total demand on the evaluation bank.
    pub total_demand_cv: f64,
    /// Calibration mean total demand over evaluation mean total demand.
    pub calibration_mean_ratio: f64,
    pub tau_star: f64,
    pub rows: Vec<Table2Row>,
    pub warnings: Vec<String>,
}

impl Table2Report {
    pub fn row(&self, policy: &str) -> Option<&Table2Row> {
        self.rows.iter().find(|r| r.policy == policy)
    }
}

/// Evaluation and calibration banks for a configuration.
pub struct Banks {
    pub eval: SamplePathBank,
    pub calibration: SamplePathBank,
}

pub fn build_banks(cfg: &Table2Config) -> Result<Banks> {
    if cfg.eval_paths == 0 || cfg.calibration_paths == 0 {
        return Err(Error::InvalidArgument("paths must be >= 1".into()));
    }
    let eval = build_bank(&cfg.truth, cfg.eval_paths, derive_seed(cfg.seed, EVAL_STREAM))?;
    let calibration = build_bank(
        &cfg.scenario.calibration_config(&cfg.truth),
        cfg.calibration_paths,
        derive_seed(cfg.seed, CALIB_STREAM),
    )?;
    Ok(Banks { eval, calibration })
}

/// Finite model of `rows` after rounding every demand up to the `eps` grid.
pub fn rounded_model(rows: &[Vec<f64>], eps: f64) -> Result<DemandModel> {
    let steps = crate::policies::dp::grid_steps(eps)?;
    let mut counts: BTreeMap<Vec<u32>, usize> = BTreeMap::new();
    for r in rows {
        *counts
            .entry(r.iter().map(|&d| round_up(d, steps)).collect())
            .or_default() += 1;
    }
    let p = rows.len() as f64;
    DemandModel::finite(
        counts
            .into_iter()
            .map(|(k, c)| Scenario {
                prob: c as f64 / p,
                demands: k.into_iter().map(|v| v as f64 * eps).collect(),
            })
            .collect(),
    )
}

/// Grid width giving roughly `levels` steps up to `d_max` (supply units),
/// snapped so that its inverse is an integer.
pub fn dp_grid(levels: usize, d_max: f64) -> f64 {
    1.0 / (levels as f64 / d_max.max(1e-12)).ceil().max(1.0)
}

/// Runs the comparison with banks already in hand.
pub fn table2_with_banks(cfg: &Table2Config, banks: &Banks) -> Result<Table2Report> {
    let supply = banks.eval.mean_total();
    if !(supply > 0.0) {
        return Err(Error::InvalidInstance("evaluation bank has no demand".into()));
    }
    let eval = banks.eval.scaled(1.0 / supply);
    let calib = banks.calibration.scaled(1.0 / supply);
    let mu = eval.mean_total();
    let calib_model = DemandModel::SampleBank(calib.clone());
    let rows_eval = eval.rows();

    let mut rows = Vec::new();
    let mut push = |policy: &str, report: FairnessReport| {
        rows.push(Table2Row {
            policy: policy.into(),
            ex_post_fairness: report.ex_post_fairness,
            waste: report.waste,
            report,
        })
    };

    push(
        "ppa",
        evaluate_paths(&Policy::Ppa { monotone: false }, &calib_model, rows_eval, mu)?,
    );
    let weighted: Vec<(f64, Vec<f64>)> = {
        let w = 1.0 / calib.rows().len() as f64;
        calib.rows().iter().map(|r| (w, r.clone())).collect()
    };
    let (tau_star, _) = optimal_tfr_on(&weighted, DEFAULT_TFR_GRID);
    push(
        "opt-tfr",
        evaluate_paths(
            &Policy::Tfr {
                tau: tau_star,
                optimized: true,
            },
            &calib_model,
            rows_eval,
            mu,
        )?,
    );
    push("offline", evaluate_paths(&Policy::Offline, &calib_model, rows_eval, mu)?);

    let mut warnings = Vec::new();
    if let Some(dp) = cfg.dp {
        match dp_row(cfg, dp, supply) {
            Ok(policy) => push("dp", evaluate_paths(&policy, &calib_model, rows_eval, mu)?),
            Err(Error::BudgetExceeded { states, budget }) => warnings.push(format!(
                "DP skipped: {states} states exceed the budget of {budget}"
            )),
            Err(e) => return Err(e),
        }
    }

    Ok(Table2Report {
        scenario: cfg.scenario,
        supply,
        total_demand_cv: banks.eval.total_cv(),
        calibration_mean_ratio: banks.calibration.mean_total() / supply,
        tau_star,
        rows,
        warnings,
    })
}

fn dp_row(cfg: &Table2Config, dp: DpOptions, supply: f64) -> Result<Policy> {
    let bank = build_bank(
        &cfg.scenario.calibration_config(&cfg.truth),
        dp.calibration_paths,
        derive_seed(cfg.seed, DP_STREAM),
    )?
    .scaled(1.0 / supply);
    let d_max = bank
        .rows()
        .iter()
        .flatten()
        .copied()
        .fold(0.0, f64::max);
    let eps = dp_grid(dp.levels, d_max);
    let model = rounded_model(bank.rows(), eps)?;
    Ok(Policy::Dp {
        table: Arc::new(exact_dp_build(&model, eps, dp.state_budget)?),
        fptas: false,
    })
}

/// Builds both banks and runs the comparison.
pub fn table2(cfg: &Table2Config) -> Result<Table2Report> {
    table2_with_banks(cfg, &build_banks(cfg)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenario_parsing() {
        for s in [Setting::Base, Setting::XiMisspec, Setting::LambdaMisspec] {
            assert_eq!(s.to_string().parse::<Setting>().unwrap(), s);
        }
        assert!("nope".parse::<Setting>().is_err());
    }

    #[test]
    fn grid_snaps_to_integer_inverse() {
        assert_eq!(dp_grid(20, 0.5), 1.0 / 40.0);
        assert_eq!(dp_grid(20, 0.3), 1.0 / 67.0);
    }

    #[test]
    fn rounding_merges_rows() {
        let rows = vec![vec![0.11, 0.2], vec![0.12, 0.19], vec![0.3, 0.0]];
        let DemandModel::FiniteSupport(f) = rounded_model(&rows, 0.1).unwrap() else {
            panic!()
        };
        assert_eq!(f.scenarios().len(), 2);
        assert!((f.scenarios()[0].prob - 2.0 / 3.0).abs() < 1e-15);
        assert!((f.scenarios()[0].demands[0] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn small_run_is_consistent() {
        let mut cfg = Table2Config::new(Setting::Base, 40, 3);
        cfg.dp = Some(DpOptions {
            levels: 5,
            calibration_paths: 40,
            state_budget: DEFAULT_STATE_BUDGET,
        });
        let r = table2(&cfg).unwrap();
        let ppa = r.row("ppa").unwrap();
        let off = r.row("offline").unwrap();
        assert!(ppa.ex_post_fairness <= off.ex_post_fairness + 1e-12);
        assert!(r.row("dp").is_some() || !r.warnings.is_empty());
        assert_eq!(table2(&cfg).unwrap(), r);
    }
}
