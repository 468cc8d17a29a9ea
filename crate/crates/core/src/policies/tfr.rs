//! Target-fill-rate policies.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::model::DemandModel;
use crate::numeric::Sum;

/// Paths drawn when the model is too large to enumerate.
const SAMPLED_PATHS: usize = 100_000;

/// Allocation `min{tau·d, s}`.
pub fn tfr_decide(tau: f64, d_i: f64, s_i: f64) -> f64 {
    (tau * d_i).min(s_i).max(0.0)
}

/// Minimum fill rate of the TFR policy on one path with unit supply.
pub fn tfr_path_min_fr(tau: f64, demands: &[f64]) -> f64 {
    let mut s = 1.0;
    let mut f = 1.0f64;
    for &d in demands {
        if d > 0.0 {
            let x = tfr_decide(tau, d, s).min(d);
            f = f.min(x / d);
            s -= x;
        }
    }
    f
}

/// Expected minimum fill rate of TFR(tau) over weighted paths.
pub fn tfr_expected_min_fr(tau: f64, paths: &[(f64, Vec<f64>)]) -> f64 {
    paths
        .iter()
        .map(|(w, d)| w * tfr_path_min_fr(tau, d))
        .collect::<Sum>()
        .value()
}

/// Weighted paths describing `model`: its support when small, otherwise a
/// fixed-seed sample.
pub fn weighted_paths(model: &DemandModel) -> Vec<(f64, Vec<f64>)> {
    model.enumerate().unwrap_or_else(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let w = 1.0 / SAMPLED_PATHS as f64;
        (0..SAMPLED_PATHS)
            .map(|_| (w, model.sample_path(&mut rng)))
            .collect()
    })
}

/// Grid search for the threshold maximizing expected minimum fill rate.
/// Returns `(tau, value)`; ties go to the larger threshold.
pub fn optimal_tfr_on(paths: &[(f64, Vec<f64>)], grid: usize) -> (f64, f64) {
    let grid = grid.max(2);
    let values: Vec<(f64, f64)> = (0..grid)
        .into_par_iter()
        .map(|k| {
            let tau = k as f64 / (grid - 1) as f64;
            (tau, tfr_expected_min_fr(tau, paths))
        })
        .collect();
    let best = values.iter().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max);
    values
        .into_iter()
        .rev()
        .find(|v| v.1 >= best - 1e-12)
        .expect("non-empty grid")
}

/// Optimal threshold for a model in supply units.
pub fn optimal_tfr(model: &DemandModel, grid: usize) -> f64 {
    optimal_tfr_on(&weighted_paths(model), grid).0
}
