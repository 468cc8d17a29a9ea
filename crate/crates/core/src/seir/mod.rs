//! Networked SEIR epidemic model producing correlated peak-demand paths.

mod bank;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use bank::{build_bank, BankMeta, SamplePathBank, DEFAULT_K};

/// Normal distribution truncated to `[low, high]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncatedNormal {
    pub mean: f64,
    pub sd: f64,
    pub low: f64,
    pub high: f64,
}

impl TruncatedNormal {
    /// Rejection sampling.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        if self.sd == 0.0 {
            return Ok(self.mean.clamp(self.low, self.high));
        }
        let normal = Normal::new(self.mean, self.sd)
            .map_err(|e| Error::InvalidArgument(format!("truncated normal: {e}")))?;
        for _ in 0..1_000_000 {
            let x = normal.sample(rng);
            if (self.low..=self.high).contains(&x) {
                return Ok(x);
            }
        }
        Err(Error::InvalidArgument(
            "truncated normal rejection sampling did not terminate".into(),
        ))
    }
}

/// Uniform distribution on `[low, high]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformRange {
    pub low: f64,
    pub high: f64,
}

impl UniformRange {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.high <= self.low {
            self.low
        } else {
            rng.random_range(self.low..self.high)
        }
    }
}

/// Parameters of the networked SEIR model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SeirConfig {
    /// Population of each location; the number of locations is its length.
    pub populations: Vec<f64>,
    /// Undirected edges between locations (0-based).
    pub edges: Vec<(usize, usize)>,
    /// Fraction of contacts made with neighboring locations.
    pub alpha: Vec<f64>,
    /// E → I rate per day.
    pub delta: f64,
    /// I → R rate per day.
    pub lambda: f64,
    pub gamma0: TruncatedNormal,
    /// Drift of the daily log-change of the interaction rate.
    pub xi_r: UniformRange,
    /// Volatility of the daily log-change of the interaction rate.
    pub sigma_r: UniformRange,
    /// Initially exposed fraction of each location.
    pub initial_exposed: Vec<f64>,
    pub horizon_days: usize,
    /// Integration step in days.
    pub dt: f64,
    /// Stop once total exposed plus infectious fraction drops below this.
    pub stop_threshold: f64,
}

impl Default for SeirConfig {
    fn default() -> Self {
        Self::line(4)
    }
}

impl SeirConfig {
    /// Default parameters on a line of `l` locations, seeding the first.
    pub fn line(l: usize) -> Self {
        let mut initial_exposed = vec![0.0; l];
        if l > 0 {
            initial_exposed[0] = 1e-4;
        }
        Self {
            populations: vec![1000.0; l],
            edges: (1..l).map(|i| (i - 1, i)).collect(),
            alpha: vec![0.015; l],
            delta: 0.25,
            lambda: 0.10,
            gamma0: TruncatedNormal {
                mean: 0.4,
                sd: 0.15,
                low: 0.0,
                high: 1.0,
            },
            xi_r: UniformRange {
                low: -0.008,
                high: 0.002,
            },
            sigma_r: UniformRange { low: 0.0, high: 0.1 },
            initial_exposed,
            horizon_days: 365,
            dt: 0.1,
            stop_threshold: 1e-8,
        }
    }

    pub fn locations(&self) -> usize {
        self.populations.len()
    }

    pub fn validate(&self) -> Result<()> {
        let l = self.locations();
        let bad = |m: String| Err(Error::InvalidArgument(format!("SEIR config: {m}")));
        if l == 0 {
            return bad("no locations".into());
        }
        if self.alpha.len() != l || self.initial_exposed.len() != l {
            return bad("alpha and initial_exposed need one entry per location".into());
        }
        if self.alpha.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return bad("alpha must lie in [0, 1]".into());
        }
        if self.populations.iter().any(|p| !(*p >= 0.0)) {
            return bad("populations must be non-negative".into());
        }
        if self.initial_exposed.iter().any(|e| !(0.0..=1.0).contains(e)) {
            return bad("initial exposed fractions must lie in [0, 1]".into());
        }
        if !(self.delta >= 0.0 && self.lambda >= 0.0) {
            return bad("rates must be non-negative".into());
        }
        if !(self.dt > 0.0) || self.horizon_days == 0 {
            return bad("need dt > 0 and horizon_days >= 1".into());
        }
        if self.edges.iter().any(|&(a, b)| a >= l || b >= l || a == b) {
            return bad("edge endpoints out of range".into());
        }
        if self.gamma0.sd < 0.0 || self.gamma0.low > self.gamma0.high {
            return bad("invalid gamma0 distribution".into());
        }
        Ok(())
    }

    fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut nb = vec![Vec::new(); self.locations()];
        for &(a, b) in &self.edges {
            nb[a].push(b);
            nb[b].push(a);
        }
        for v in &mut nb {
            v.sort_unstable();
            v.dedup();
        }
        nb
    }
}

/// Compartment fractions of one location.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Compartments {
    pub s: f64,
    pub e: f64,
    pub i: f64,
    pub r: f64,
}

/// Output of one simulated path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    /// `days[t][loc]` at the start of day `t`, plus the final state.
    pub days: Vec<Vec<Compartments>>,
    /// Interaction rate used on each simulated day.
    pub gamma: Vec<f64>,
    /// Peak infectious count per location.
    pub peak_demands: Vec<f64>,
    /// Time (days) at which each location's infectious fraction peaked.
    pub peak_times: Vec<f64>,
}

/// Random draws that drive one path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathDraws {
    pub gamma0: f64,
    pub xi: f64,
    pub sigma: f64,
    /// Daily log-increments `X_1, X_2, ...`.
    pub increments: Vec<f64>,
}

impl PathDraws {
    pub fn sample<R: Rng + ?Sized>(config: &SeirConfig, rng: &mut R) -> Result<Self> {
        let gamma0 = config.gamma0.sample(rng)?;
        let xi = config.xi_r.sample(rng);
        let sigma = config.sigma_r.sample(rng);
        let normal = Normal::new(xi, sigma)
            .map_err(|e| Error::InvalidArgument(format!("daily increment: {e}")))?;
        let increments = (1..config.horizon_days).map(|_| normal.sample(rng)).collect();
        Ok(Self {
            gamma0,
            xi,
            sigma,
            increments,
        })
    }
}

/// RNG for path `path_id` under `seed`.
pub fn path_rng(seed: u64, path_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path_id);
    rng
}

fn derivative(
    config: &SeirConfig,
    nb: &[Vec<usize>],
    gamma: f64,
    y: &[Compartments],
    out: &mut [Compartments],
) {
    for (loc, c) in y.iter().enumerate() {
        let a = config.alpha[loc];
        let mut force = c.i;
        if !nb[loc].is_empty() {
            let mean_nb: f64 = nb[loc].iter().map(|&j| y[j].i).sum::<f64>() / nb[loc].len() as f64;
            force = (1.0 - a) * c.i + a * mean_nb;
        }
        let infection = gamma * c.s * force;
        out[loc] = Compartments {
            s: -infection,
            e: infection - config.delta * c.e,
            i: config.delta * c.e - config.lambda * c.i,
            r: config.lambda * c.i,
        };
    }
}

fn axpy(y: &[Compartments], k: &[Compartments], h: f64, out: &mut [Compartments]) {
    for ((o, a), b) in out.iter_mut().zip(y).zip(k) {
        *o = Compartments {
            s: a.s + h * b.s,
            e: a.e + h * b.e,
            i: a.i + h * b.i,
            r: a.r + h * b.r,
        };
    }
}

/// Integrates one path with given draws (fixed-step RK4, interaction rate
/// constant within each day).
pub fn simulate_with_draws(config: &SeirConfig, draws: &PathDraws) -> Result<Trajectory> {
    config.validate()?;
    let l = config.locations();
    let nb = config.neighbors();
    let steps = (1.0 / config.dt).round().max(1.0) as usize;
    let h = 1.0 / steps as f64;
    let mut y: Vec<Compartments> = config
        .initial_exposed
        .iter()
        .map(|&e| Compartments {
            s: 1.0 - e,
            e,
            i: 0.0,
            r: 0.0,
        })
        .collect();
    let mut peak_i: Vec<f64> = y.iter().map(|c| c.i).collect();
    let mut peak_t = vec![0.0; l];
    let mut days = vec![y.clone()];
    let mut gammas = Vec::new();
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (
        y.clone(),
        y.clone(),
        y.clone(),
        y.clone(),
        y.clone(),
    );
    let mut log_gamma = 0.0;
    for day in 0..config.horizon_days {
        if day > 0 {
            log_gamma += draws.increments.get(day - 1).copied().unwrap_or(0.0);
        }
        let gamma = draws.gamma0 * log_gamma.exp();
        gammas.push(gamma);
        for step in 0..steps {
            derivative(config, &nb, gamma, &y, &mut k1);
            axpy(&y, &k1, h / 2.0, &mut tmp);
            derivative(config, &nb, gamma, &tmp, &mut k2);
            axpy(&y, &k2, h / 2.0, &mut tmp);
            derivative(config, &nb, gamma, &tmp, &mut k3);
            axpy(&y, &k3, h, &mut tmp);
            derivative(config, &nb, gamma, &tmp, &mut k4);
            let t = day as f64 + (step + 1) as f64 * h;
            for loc in 0..l {
                let c = &mut y[loc];
                let w = |a: f64, b: f64, cc: f64, d: f64| h / 6.0 * (a + 2.0 * b + 2.0 * cc + d);
                c.s += w(k1[loc].s, k2[loc].s, k3[loc].s, k4[loc].s);
                c.e += w(k1[loc].e, k2[loc].e, k3[loc].e, k4[loc].e);
                c.i += w(k1[loc].i, k2[loc].i, k3[loc].i, k4[loc].i);
                c.r += w(k1[loc].r, k2[loc].r, k3[loc].r, k4[loc].r);
                for v in [c.s, c.e, c.i, c.r] {
                    if !(-1e-6..=1.0 + 1e-6).contains(&v) {
                        return Err(Error::Unstable {
                            day,
                            location: loc,
                            value: v,
                        });
                    }
                }
                if c.i > peak_i[loc] {
                    peak_i[loc] = c.i;
                    peak_t[loc] = t;
                }
            }
        }
        days.push(y.clone());
        let active: f64 = y.iter().map(|c| c.e + c.i).sum();
        if active < config.stop_threshold {
            break;
        }
    }
    Ok(Trajectory {
        days,
        gamma: gammas,
        peak_demands: peak_i
            .iter()
            .zip(&config.populations)
            .map(|(i, p)| i * p)
            .collect(),
        peak_times: peak_t,
    })
}

/// Simulates path `path_id` of the stream keyed by `seed`.
pub fn simulate_path(config: &SeirConfig, seed: u64, path_id: u64) -> Result<Trajectory> {
    let mut rng = path_rng(seed, path_id);
    let draws = PathDraws::sample(config, &mut rng)?;
    simulate_with_draws(config, &draws)
}
