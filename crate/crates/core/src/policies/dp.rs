//! Grid dynamic program maximizing expected minimum fill rate.
//!
//! Supply, allocations and rounded demands live on the grid `{kε}`; a demand
//! `d` is rounded up to `d̃ = ⌈d/ε⌉ε` and an on-grid allocation `x` is paid
//! out as `x·d/d̃`, so the realized fill rate is `x/d̃`. The running minimum
//! fill rate is therefore an exact ratio of grid indices.
//!
//! States are `(history node, supply index, minimum fill rate)`. Only states
//! reachable from the root are tabulated; the last agent is solved in closed
//! form.

use std::cmp::Ordering;
use std::collections::HashSet;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::DemandModel;
use crate::tree::DemandTree;

/// Default limit on tabulated states.
pub const DEFAULT_STATE_BUDGET: usize = 50_000_000;

/// Ratio of grid indices, kept reduced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct Frac {
    num: u32,
    den: u32,
}

const ONE: Frac = Frac { num: 1, den: 1 };

fn gcd(mut a: u32, mut b: u32) -> u32 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl Frac {
    fn new(num: u32, den: u32) -> Self {
        if num == 0 {
            return Frac { num: 0, den: 1 };
        }
        let g = gcd(num, den);
        Frac {
            num: num / g,
            den: den / g,
        }
    }

    fn value(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    fn cmp_ratio(self, other: Frac) -> Ordering {
        (self.num as u64 * other.den as u64).cmp(&(other.num as u64 * self.den as u64))
    }

    fn min(self, other: Frac) -> Frac {
        if other.cmp_ratio(self) == Ordering::Less {
            other
        } else {
            self
        }
    }

    /// Smallest grid allocation reaching this fill rate on rounded demand `d`.
    fn needed(self, d: u32) -> u32 {
        ((self.num as u64 * d as u64).div_ceil(self.den as u64)) as u32
    }
}

type Key = (u32, Frac);

#[derive(Debug, Clone)]
struct NodeTable {
    keys: Vec<Key>,
    values: Vec<f64>,
    /// `argmax[state * branches + b]`: grid allocation after branch `b`.
    argmax: Vec<u32>,
}

impl NodeTable {
    fn find(&self, key: &Key) -> Option<usize> {
        self.keys.binary_search(key).ok()
    }
}

/// Tabulated grid DP policy.
#[derive(Debug, Clone)]
pub struct DpTable {
    tree: DemandTree,
    eps: f64,
    supply_steps: u32,
    rounded: Vec<Vec<u32>>,
    tables: Vec<Option<NodeTable>>,
    root_value: f64,
    states: usize,
}

/// Checks that `1/eps` is a positive integer and returns it.
pub fn grid_steps(eps: f64) -> Result<u32> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::InvalidArgument(format!("grid step {eps} not in (0, 1]")));
    }
    let inv = 1.0 / eps;
    let k = inv.round();
    if (inv - k).abs() > 1e-9 * k {
        return Err(Error::InvalidArgument(format!(
            "1/epsilon must be an integer, got {inv}"
        )));
    }
    Ok(k as u32)
}

/// Rounded-up demand index `⌈d/ε⌉`.
pub fn round_up(d: f64, steps: u32) -> u32 {
    if d <= 0.0 {
        return 0;
    }
    let r = d * steps as f64;
    let c = r.ceil();
    // Absorb floating noise just above an integer.
    let k = if c - r > 1.0 - 1e-9 { c - 1.0 } else { c };
    (k as u32).max(1)
}

impl DpTable {
    /// Builds the table for a tree whose demands are in supply units.
    pub fn build(tree: DemandTree, eps: f64, budget: usize) -> Result<Self> {
        let steps = grid_steps(eps)?;
        let n = tree.n_agents();
        let rounded: Vec<Vec<u32>> = (0..tree.len())
            .map(|id| {
                tree.node(id)
                    .branches
                    .iter()
                    .map(|b| round_up(b.demand, steps))
                    .collect()
            })
            .collect();
        let mut dp = DpTable {
            tree,
            eps,
            supply_steps: steps,
            rounded,
            tables: Vec::new(),
            root_value: 0.0,
            states: 0,
        };
        dp.tables = vec![None; dp.tree.len()];
        let root_state = (steps, ONE);
        if n == 1 {
            dp.root_value = dp.last_value(dp.tree.root(), root_state);
            return Ok(dp);
        }

        // Forward pass: reachable states at depths 0..=n-2.
        let mut reach: Vec<HashSet<Key>> = vec![HashSet::new(); dp.tree.len()];
        reach[dp.tree.root()].insert(root_state);
        let mut frontier = vec![dp.tree.root()];
        let mut total = 1usize;
        for depth in 0..n.saturating_sub(2) {
            let mut next = Vec::new();
            for &id in &frontier {
                let states: Vec<Key> = reach[id].iter().copied().collect();
                for (b, br) in dp.tree.node(id).branches.iter().enumerate() {
                    let d = dp.rounded[id][b];
                    let child = br.child;
                    if reach[child].is_empty() {
                        next.push(child);
                    }
                    let before = reach[child].len();
                    for &(s, f) in &states {
                        if d == 0 {
                            reach[child].insert((s, f));
                            continue;
                        }
                        let top = s.min(f.needed(d));
                        for x in 0..=top {
                            reach[child].insert((s - x, f.min(Frac::new(x, d))));
                        }
                    }
                    total += reach[child].len() - before;
                    if total > budget {
                        return Err(Error::BudgetExceeded {
                            states: total,
                            budget,
                        });
                    }
                }
            }
            next.sort_unstable();
            next.dedup();
            frontier = next;
            let _ = depth;
        }
        dp.states = total;

        // Backward pass.
        let mut by_depth: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (id, r) in reach.iter().enumerate() {
            if !r.is_empty() {
                by_depth[dp.tree.node(id).depth].push(id);
            }
        }
        for depth in (0..=n - 2).rev() {
            let built: Vec<(usize, NodeTable)> = by_depth[depth]
                .par_iter()
                .map(|&id| {
                    let mut keys: Vec<Key> = reach[id].iter().copied().collect();
                    keys.sort_unstable();
                    (id, dp.solve_node(id, keys))
                })
                .collect();
            for (id, t) in built {
                dp.tables[id] = Some(t);
            }
        }
        let root = dp.tables[dp.tree.root()].as_ref().expect("root tabulated");
        dp.root_value = root.values[root.find(&root_state).expect("root state")];
        Ok(dp)
    }

    /// Value of a state at a node whose next agent is the last one.
    fn last_value(&self, id: usize, (s, f): Key) -> f64 {
        let node = self.tree.node(id);
        node.branches
            .iter()
            .zip(&self.rounded[id])
            .map(|(br, &d)| br.prob * Self::last_fr(s, f, d).value())
            .sum()
    }

    fn last_fr(s: u32, f: Frac, d: u32) -> Frac {
        if d == 0 {
            f
        } else {
            f.min(Frac::new(s.min(d), d))
        }
    }

    fn last_choice(s: u32, f: Frac, d: u32) -> u32 {
        if d == 0 {
            return 0;
        }
        let need = f.needed(d);
        if need <= s.min(d) {
            need
        } else {
            s.min(d)
        }
    }

    fn value_at(&self, id: usize, key: Key) -> f64 {
        let node = self.tree.node(id);
        if node.depth + 1 == self.tree.n_agents() {
            return self.last_value(id, key);
        }
        if node.depth == self.tree.n_agents() {
            return key.1.value();
        }
        let t = self.tables[id].as_ref().expect("child tabulated before parent");
        t.values[t.find(&key).expect("reachable state tabulated")]
    }

    fn solve_node(&self, id: usize, keys: Vec<Key>) -> NodeTable {
        let node = self.tree.node(id);
        let nb = node.branches.len();
        let mut values = Vec::with_capacity(keys.len());
        let mut argmax = Vec::with_capacity(keys.len() * nb);
        for &(s, f) in &keys {
            let mut v = 0.0;
            for (b, br) in node.branches.iter().enumerate() {
                let d = self.rounded[id][b];
                let (x, best) = if d == 0 {
                    (0, self.value_at(br.child, (s, f)))
                } else {
                    let top = s.min(f.needed(d));
                    let mut best = f64::NEG_INFINITY;
                    let mut arg = 0;
                    for x in 0..=top {
                        let val = self.value_at(br.child, (s - x, f.min(Frac::new(x, d))));
                        if val > best + 1e-12 {
                            best = val;
                            arg = x;
                        }
                    }
                    (arg, best)
                };
                argmax.push(x);
                v += br.prob * best;
            }
            values.push(v);
        }
        NodeTable {
            keys,
            values,
            argmax,
        }
    }

    /// Expected minimum fill rate of the table's policy.
    pub fn value(&self) -> f64 {
        self.root_value
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Number of tabulated states.
    pub fn state_count(&self) -> usize {
        self.states
    }

    /// Allocation (supply units) for the last agent of `prefix`, replaying the
    /// table's own decisions on the earlier agents. `supply` caps the result.
    pub fn decide(&self, prefix: &[f64], supply: f64) -> f64 {
        let Some((&d_now, history)) = prefix.split_last() else {
            return 0.0;
        };
        let mut id = self.tree.root();
        let mut state: Key = (self.supply_steps, ONE);
        for &d in history {
            let (x, b) = self.choice(id, state, d);
            let dr = self.rounded[id][b];
            if dr > 0 {
                state = (state.0 - x, state.1.min(Frac::new(x, dr)));
            }
            id = self.tree.node(id).branches[b].child;
        }
        if d_now <= 0.0 {
            return 0.0;
        }
        let (x, b) = self.choice(id, state, d_now);
        let dr = self.rounded[id][b];
        if dr == 0 {
            return 0.0;
        }
        let x_bar = x as f64 / dr as f64 * d_now;
        x_bar.min(d_now).min(supply).max(0.0)
    }

    /// Grid allocation and branch index for demand `d` at node `id`.
    fn choice(&self, id: usize, state: Key, d: f64) -> (u32, usize) {
        let node = self.tree.node(id);
        let b = self.tree.step_index(id, d).expect("branch exists");
        let dr = self.rounded[id][b];
        if node.depth + 1 == self.tree.n_agents() {
            return (Self::last_choice(state.0, state.1, dr), b);
        }
        let t = self.tables[id].as_ref().expect("tabulated node");
        match t.find(&state) {
            Some(k) => (t.argmax[k * node.branches.len() + b], b),
            // Unreachable under the table's own decisions; act greedily.
            None => (Self::last_choice(state.0, state.1, dr), b),
        }
    }
}

/// Exact Bellman DP for a finite-support model in supply units.
pub fn exact_dp_build(model: &DemandModel, eps: f64, budget: usize) -> Result<DpTable> {
    match model {
        DemandModel::FiniteSupport(f) => DpTable::build(f.tree().clone(), eps, budget),
        _ => Err(Error::InvalidArgument(
            "exact DP needs a finite-support model".into(),
        )),
    }
}

/// Discretized DP for independent discrete marginals in supply units.
pub fn fptas_dp(model: &DemandModel, eps: f64, budget: usize) -> Result<DpTable> {
    match model {
        DemandModel::Independent(m) => DpTable::build(m.tree().clone(), eps, budget),
        _ => Err(Error::InvalidArgument(
            "FPTAS DP needs independent discrete marginals".into(),
        )),
    }
}
