//! Factor-revealing linear programs and their dual certificates.

use crate::error::{Error, Result};

/// Optimal point and value of a linear program.
#[derive(Debug, Clone)]
pub struct LpSolution {
    pub value: f64,
    pub x: Vec<f64>,
}

/// Solves `max c·x` subject to `A x ≤ b`, `x ≥ 0`, with `b ≥ 0`.
pub trait LpSolver {
    fn maximize(&self, c: &[f64], a: &[Vec<f64>], b: &[f64]) -> Result<LpSolution>;
}

/// Dense tableau simplex with Bland's anti-cycling rule. The origin is
/// feasible because `b ≥ 0`, so no phase one is needed.
#[derive(Debug, Clone, Copy)]
pub struct DenseSimplex {
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for DenseSimplex {
    fn default() -> Self {
        Self {
            max_iters: 100_000,
            tol: 1e-12,
        }
    }
}

impl LpSolver for DenseSimplex {
    fn maximize(&self, c: &[f64], a: &[Vec<f64>], b: &[f64]) -> Result<LpSolution> {
        let m = a.len();
        let n = c.len();
        if b.len() != m || a.iter().any(|row| row.len() != n) {
            return Err(Error::Solver("dimension mismatch".into()));
        }
        if b.iter().any(|v| *v < 0.0) {
            return Err(Error::Solver("right-hand side must be non-negative".into()));
        }
        let width = n + m + 1;
        // Rows 0..m are constraints, row m is the objective (reduced costs).
        let mut t = vec![vec![0.0; width]; m + 1];
        for i in 0..m {
            t[i][..n].copy_from_slice(&a[i]);
            t[i][n + i] = 1.0;
            t[i][width - 1] = b[i];
        }
        for j in 0..n {
            t[m][j] = -c[j];
        }
        let mut basis: Vec<usize> = (n..n + m).collect();
        for _ in 0..self.max_iters {
            let Some(col) = (0..n + m).find(|&j| t[m][j] < -self.tol) else {
                let mut x = vec![0.0; n];
                for (i, &bv) in basis.iter().enumerate() {
                    if bv < n {
                        x[bv] = t[i][width - 1];
                    }
                }
                return Ok(LpSolution {
                    value: t[m][width - 1],
                    x,
                });
            };
            let mut row = None;
            let mut best = f64::INFINITY;
            for i in 0..m {
                if t[i][col] > self.tol {
                    let ratio = t[i][width - 1] / t[i][col];
                    let better = ratio < best - self.tol
                        || (ratio <= best + self.tol && row.is_some_and(|r: usize| basis[i] < basis[r]));
                    if better {
                        best = ratio;
                        row = Some(i);
                    }
                }
            }
            let Some(r) = row else {
                return Err(Error::Solver("problem is unbounded".into()));
            };
            let p = t[r][col];
            for v in t[r].iter_mut() {
                *v /= p;
            }
            let pivot = t[r].clone();
            for (i, line) in t.iter_mut().enumerate() {
                if i != r && line[col] != 0.0 {
                    let f = line[col];
                    for (v, pv) in line.iter_mut().zip(&pivot) {
                        *v -= f * pv;
                    }
                }
            }
            basis[r] = col;
        }
        Err(Error::Solver("iteration limit reached".into()))
    }
}

/// Which of the two programs applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    OverDemanded,
    UnderDemanded,
}

impl Regime {
    pub fn of(mu: f64, n: usize) -> Self {
        if mu >= 1.0 + 1.0 / n as f64 {
            Regime::OverDemanded
        } else {
            Regime::UnderDemanded
        }
    }
}

/// Factor-revealing LP over `y, r ∈ R^n_{≥0}` (variables ordered `y` then `r`).
#[derive(Debug, Clone)]
pub struct FactorRevealingLp {
    pub n: usize,
    pub mu: f64,
    pub regime: Regime,
    pub objective: Vec<f64>,
    pub constant: f64,
    pub matrix: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
}

impl FactorRevealingLp {
    pub fn new(n: usize, mu: f64) -> Result<Self> {
        if n == 0 || !(mu >= 0.0) {
            return Err(Error::InvalidArgument(format!("bad LP parameters n={n}, mu={mu}")));
        }
        let regime = Regime::of(mu, n);
        let nf = n as f64;
        let (slope, weight, constant) = match regime {
            Regime::OverDemanded => ((nf + 1.0) / (2.0 * mu), 1.0 / nf, 0.0),
            Regime::UnderDemanded => (nf / 2.0, mu / (nf + 1.0), 1.0 - nf * mu / (nf + 1.0)),
        };
        let mut objective = vec![0.0; 2 * n];
        objective[n..].iter_mut().for_each(|c| *c = weight);
        let mut matrix = Vec::new();
        let mut rhs = Vec::new();
        // r_σ ≤ slope·y_σ
        for s in 0..n {
            let mut row = vec![0.0; 2 * n];
            row[n + s] = 1.0;
            row[s] = -slope;
            matrix.push(row);
            rhs.push(0.0);
        }
        // r_σ ≤ r_{σ-1}, with r_0 = 1
        for s in 0..n {
            let mut row = vec![0.0; 2 * n];
            row[n + s] = 1.0;
            if s > 0 {
                row[n + s - 1] = -1.0;
            }
            matrix.push(row);
            rhs.push(if s == 0 { 1.0 } else { 0.0 });
        }
        // Σ y ≤ 1
        let mut row = vec![0.0; 2 * n];
        row[..n].iter_mut().for_each(|v| *v = 1.0);
        matrix.push(row);
        rhs.push(1.0);
        Ok(Self {
            n,
            mu,
            regime,
            objective,
            constant,
            matrix,
            rhs,
        })
    }

    /// Closed-form dual multipliers, ordered like the constraints.
    pub fn dual_assignment(&self) -> Vec<f64> {
        let n = self.n;
        let nf = n as f64;
        let (delta, omega) = match self.regime {
            Regime::OverDemanded => (1.0 / nf, (nf + 1.0) / (2.0 * nf * self.mu)),
            Regime::UnderDemanded => {
                let d = self.mu / (nf + 1.0);
                (d, d * nf / 2.0)
            }
        };
        let mut u = vec![delta; n];
        u.extend(std::iter::repeat(0.0).take(n));
        u.push(omega);
        u
    }

    /// Objective of the dual assignment after checking its feasibility.
    pub fn certificate(&self) -> Result<f64> {
        let u = self.dual_assignment();
        if u.iter().any(|v| *v < 0.0) {
            return Err(Error::Certificate("negative multiplier".into()));
        }
        for j in 0..2 * self.n {
            let lhs: f64 = self.matrix.iter().zip(&u).map(|(row, ui)| row[j] * ui).sum();
            if lhs < self.objective[j] - 1e-12 {
                return Err(Error::Certificate(format!(
                    "dual constraint {j} violated: {lhs} < {}",
                    self.objective[j]
                )));
            }
        }
        Ok(self.rhs.iter().zip(&u).map(|(b, ui)| b * ui).sum::<f64>() + self.constant)
    }

    pub fn solve<S: LpSolver>(&self, solver: &S) -> Result<f64> {
        Ok(solver.maximize(&self.objective, &self.matrix, &self.rhs)?.value + self.constant)
    }
}

/// Result of checking a factor-revealing LP against its certificate.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct LpCheck {
    pub primal: f64,
    pub certificate: f64,
    pub gap: f64,
}

/// Solves the regime-appropriate LP numerically and compares it with the
/// closed-form dual value.
pub fn lp_verify_with<S: LpSolver>(n: usize, mu: f64, solver: &S) -> Result<LpCheck> {
    let lp = FactorRevealingLp::new(n, mu)?;
    let primal = lp.solve(solver)?;
    let certificate = lp.certificate()?;
    if primal > certificate + 1e-7 {
        return Err(Error::Certificate(format!(
            "primal {primal} exceeds dual bound {certificate}"
        )));
    }
    if (primal - certificate).abs() > 1e-6 {
        return Err(Error::Certificate(format!(
            "primal {primal} and certificate {certificate} differ"
        )));
    }
    Ok(LpCheck {
        primal,
        certificate,
        gap: certificate - primal,
    })
}

pub fn lp_verify(n: usize, mu: f64) -> Result<LpCheck> {
    lp_verify_with(n, mu, &DenseSimplex::default())
}
