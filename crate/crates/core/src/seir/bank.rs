//! Banks of simulated demand paths and the k-nearest-neighbor estimator.

use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{simulate_path, SeirConfig};
use crate::error::{Error, Result};
use crate::numeric::Sum;

/// Neighbors used by default for conditional means.
pub const DEFAULT_K: usize = 10;

/// Where a bank came from.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BankMeta {
    pub config_hash: Option<String>,
    pub seed: Option<u64>,
}

/// Matrix of sample paths used as an empirical demand model.
#[derive(Debug, Clone)]
pub struct SamplePathBank {
    rows: Vec<Vec<f64>>,
    /// `suffix[r][i] = Σ_{j ≥ i} rows[r][j]`.
    suffix: Vec<Vec<f64>>,
    pub k: usize,
    pub meta: BankMeta,
}

#[derive(Serialize, Deserialize)]
struct BankLine {
    path_id: u64,
    demands: Vec<f64>,
}

impl SamplePathBank {
    pub fn new(rows: Vec<Vec<f64>>, k: usize) -> Result<Self> {
        let n = rows
            .first()
            .map(|r| r.len())
            .ok_or_else(|| Error::InvalidInstance("empty sample bank".into()))?;
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidInstance("bank rows have inconsistent length".into()));
        }
        if rows.iter().flatten().any(|d| !(*d >= 0.0) || !d.is_finite()) {
            return Err(Error::InvalidInstance("bank demands must be finite and >= 0".into()));
        }
        if k == 0 {
            return Err(Error::InvalidArgument("k must be >= 1".into()));
        }
        let suffix = rows
            .iter()
            .map(|r| {
                let mut s = vec![0.0; n + 1];
                for i in (0..n).rev() {
                    s[i] = s[i + 1] + r[i];
                }
                s
            })
            .collect();
        Ok(Self {
            rows,
            suffix,
            k,
            meta: BankMeta::default(),
        })
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn n_agents(&self) -> usize {
        self.rows[0].len()
    }

    pub fn mean_total(&self) -> f64 {
        self.suffix.iter().map(|s| s[0]).collect::<Sum>().value() / self.rows.len() as f64
    }

    /// Coefficient of variation of total demand.
    pub fn total_cv(&self) -> f64 {
        let m = self.mean_total();
        let p = self.rows.len() as f64;
        let var = self
            .suffix
            .iter()
            .map(|s| (s[0] - m) * (s[0] - m))
            .collect::<Sum>()
            .value()
            / (p - 1.0).max(1.0);
        var.sqrt() / m
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let rows = self
            .rows
            .iter()
            .map(|r| r.iter().map(|d| d * factor).collect())
            .collect();
        let mut b = Self::new(rows, self.k).expect("scaling preserves validity");
        b.meta = self.meta.clone();
        b
    }

    /// Mean future demand over the `k` rows whose first `prefix.len()`
    /// entries are closest to `prefix` in Euclidean distance (ties by row
    /// index). An empty prefix gives the bank-wide mean.
    pub fn knn_conditional_mean(&self, prefix: &[f64]) -> f64 {
        let i = prefix.len();
        if i >= self.n_agents() {
            return 0.0;
        }
        if i == 0 {
            return self.mean_total();
        }
        let k = self.k.min(self.rows.len());
        let mut dist: Vec<(f64, usize)> = self
            .rows
            .iter()
            .enumerate()
            .map(|(r, row)| {
                let d2: f64 = row[..i]
                    .iter()
                    .zip(prefix)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                (d2, r)
            })
            .collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < dist.len() {
            dist.select_nth_unstable_by(k - 1, cmp);
            dist.truncate(k);
        }
        dist.sort_by(cmp);
        dist.iter().map(|&(_, r)| self.suffix[r][i]).sum::<f64>() / k as f64
    }

    /// Writes one `{"path_id", "demands"}` object per line.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for (id, row) in self.rows.iter().enumerate() {
            let line = BankLine {
                path_id: id as u64,
                demands: row.clone(),
            };
            serde_json::to_writer(&mut w, &line)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Reads a bank written by [`write_jsonl`](Self::write_jsonl); rows are
    /// ordered by `path_id`.
    pub fn read_jsonl<R: BufRead>(r: R, k: usize) -> Result<Self> {
        let mut lines = Vec::new();
        for line in r.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            lines.push(serde_json::from_str::<BankLine>(&line)?);
        }
        lines.sort_by_key(|l| l.path_id);
        Self::new(lines.into_iter().map(|l| l.demands).collect(), k)
    }
}

/// Hex SHA-256 of the JSON form of a config.
pub fn config_hash(config: &SeirConfig) -> String {
    let json = serde_json::to_string(config).expect("config serializes");
    Sha256::digest(json.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Simulates `paths` peak-demand rows; row `k` uses stream `k` of `seed`.
pub fn build_bank(config: &SeirConfig, paths: usize, seed: u64) -> Result<SamplePathBank> {
    if paths == 0 {
        return Err(Error::InvalidArgument("paths must be >= 1".into()));
    }
    config.validate()?;
    let rows: Vec<Vec<f64>> = (0..paths as u64)
        .into_par_iter()
        .map(|k| simulate_path(config, seed, k).map(|t| t.peak_demands))
        .collect::<Result<_>>()?;
    let mut bank = SamplePathBank::new(rows, DEFAULT_K)?;
    bank.meta = BankMeta {
        config_hash: Some(config_hash(config)),
        seed: Some(seed),
    };
    Ok(bank)
}
