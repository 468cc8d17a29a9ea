//! Inverse-demand distributions and expected-achievable-fill-rate curves.
//!
//! `v` is the inverse of total demand (supply normalized to 1); `v = ∞` stands
//! for zero demand. A TFR policy with threshold `τ` meets all demand exactly
//! when `v ≥ τ`.

use crate::numeric::{self, golden_max, Sum};

/// Worst-case inverse-demand distribution at scarcity `mu`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorstCaseTfrCdf {
    pub mu: f64,
    pub q_hat: f64,
}

impl WorstCaseTfrCdf {
    pub fn new(mu: f64) -> Self {
        Self {
            mu,
            q_hat: crate::bounds::q_hat(mu),
        }
    }

    /// `0` on `[0, q̂)`, `1 − q̂/v` on `[q̂, 1)`, `1 − q̂` on `[1, ∞)`.
    pub fn cdf(&self, v: f64) -> f64 {
        if v.is_infinite() {
            1.0
        } else if v < self.q_hat {
            0.0
        } else if v < 1.0 {
            1.0 - self.q_hat / v
        } else {
            1.0 - self.q_hat
        }
    }

    /// `E[1/v]` by composite Simpson integration of `(1/v)·q̂/v²` over `[q̂, 1]`.
    pub fn expected_inverse_numeric(&self, panels: usize) -> f64 {
        let panels = panels.max(2) & !1;
        let (a, b) = (self.q_hat, 1.0);
        let h = (b - a) / panels as f64;
        let f = |v: f64| self.q_hat / (v * v * v);
        let mut s = Sum::new();
        s.add(f(a));
        s.add(f(b));
        for k in 1..panels {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            s.add(w * f(a + k as f64 * h));
        }
        s.value() * h / 3.0
    }

    /// Discretization into `(total demand, probability)` atoms: total demand
    /// `1/v` is uniform on `[1, 1/q̂]` with mass `1 − q̂`, represented by `m`
    /// equal-mass atoms at the midpoints of equal-width cells, which keeps the
    /// mean exact. The zero-demand atom absorbs the remaining mass.
    pub fn discretize(&self, m: usize) -> Vec<(f64, f64)> {
        let q = self.q_hat;
        let h = (1.0 / q - 1.0) / m as f64;
        let w = (1.0 - q) / m as f64;
        let mut atoms: Vec<(f64, f64)> = (0..m)
            .map(|k| (1.0 + (k as f64 + 0.5) * h, w))
            .collect();
        let rest = 1.0 - numeric::sum(atoms.iter().map(|a| a.1));
        atoms.push((0.0, rest));
        atoms
    }
}

/// Distribution of inverse total demand.
#[derive(Debug, Clone, PartialEq)]
pub enum InverseDemand {
    WorstCase(WorstCaseTfrCdf),
    PointMass(f64),
    Uniform { lo: f64, hi: f64 },
    /// `(v, probability)` atoms; `v` may be infinite.
    Discrete(Vec<(f64, f64)>),
}

impl InverseDemand {
    /// Atoms of total demand `(d, p)` turned into inverse-demand atoms.
    pub fn from_total_demand(atoms: &[(f64, f64)]) -> Self {
        let mut v: Vec<(f64, f64)> = atoms
            .iter()
            .map(|&(d, p)| (if d > 0.0 { 1.0 / d } else { f64::INFINITY }, p))
            .collect();
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        InverseDemand::Discrete(v)
    }

    pub fn cdf(&self, v: f64) -> f64 {
        match self {
            InverseDemand::WorstCase(w) => w.cdf(v),
            InverseDemand::PointMass(v0) => {
                if v >= *v0 {
                    1.0
                } else {
                    0.0
                }
            }
            InverseDemand::Uniform { lo, hi } => ((v - lo) / (hi - lo)).clamp(0.0, 1.0),
            InverseDemand::Discrete(a) => {
                numeric::sum(a.iter().filter(|x| x.0 <= v).map(|x| x.1))
            }
        }
    }
}

/// Quantile-space view of an inverse-demand distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct EafrCurve {
    pub dist: InverseDemand,
}

impl EafrCurve {
    pub fn new(dist: InverseDemand) -> Self {
        Self { dist }
    }

    /// `Q(τ) = 1 − G(τ)`.
    pub fn quantile_of(&self, tau: f64) -> f64 {
        1.0 - self.dist.cdf(tau)
    }

    /// Threshold at quantile `q`: `T(q) = inf{v : G(v) > 1 − q}`.
    pub fn threshold(&self, q: f64) -> f64 {
        let target = 1.0 - q;
        match &self.dist {
            InverseDemand::WorstCase(w) => {
                if q > w.q_hat {
                    w.q_hat / q
                } else {
                    f64::INFINITY
                }
            }
            InverseDemand::PointMass(v0) => {
                if q > 0.0 {
                    *v0
                } else {
                    f64::INFINITY
                }
            }
            InverseDemand::Uniform { lo, hi } => {
                if q > 0.0 {
                    lo + (hi - lo) * target
                } else {
                    *hi
                }
            }
            InverseDemand::Discrete(a) => {
                let mut acc = Sum::new();
                for &(v, p) in a {
                    acc.add(p);
                    if acc.value() > target + 1e-15 {
                        return v;
                    }
                }
                f64::INFINITY
            }
        }
    }

    /// `R(q) = q·T(q)`.
    pub fn revenue(&self, q: f64) -> f64 {
        q * self.threshold(q)
    }
}

/// Maximizes `R(q)` over quantiles whose threshold lies in `[0, 1]`.
/// Returns `(q*, R(q*))`; among near-ties the largest quantile is returned.
pub fn eafr_max(curve: &EafrCurve) -> (f64, f64) {
    if let InverseDemand::Discrete(atoms) = &curve.dist {
        // The maximum sits at an atom: q = P(v ≥ v_k), T = v_k.
        let mut upper = Sum::new();
        for a in atoms {
            upper.add(a.1);
        }
        let mut tail = upper.value();
        let mut best = (0.0, 0.0);
        for &(v, p) in atoms {
            if v <= 1.0 && tail * v > best.1 + 1e-15 {
                best = (tail, tail * v);
            }
            tail -= p;
        }
        return best;
    }
    let grid = 100_000;
    let r = |q: f64| {
        let t = curve.threshold(q);
        if (0.0..=1.0).contains(&t) {
            q * t
        } else {
            0.0
        }
    };
    let vals: Vec<(f64, f64)> = (1..=grid)
        .map(|k| {
            let q = k as f64 / grid as f64;
            (q, r(q))
        })
        .collect();
    let best = vals.iter().map(|v| v.1).fold(0.0, f64::max);
    let (q0, v0) = *vals
        .iter()
        .rev()
        .find(|v| v.1 >= best - 1e-12)
        .expect("grid non-empty");
    let step = 1.0 / grid as f64;
    let (q1, v1) = golden_max(r, (q0 - step).max(0.0), (q0 + step).min(1.0), 80);
    if v1 > v0 + 1e-12 {
        (q1, v1)
    } else {
        (q0, v0)
    }
}
