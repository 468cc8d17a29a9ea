//! Prefix tree over demand histories.
//!
//! Each node groups the scenarios compatible with a realized demand prefix.
//! For independent marginals the tree collapses into a chain with one node
//! per depth, since the history carries no information.

use crate::numeric::Sum;

/// Edge from a node to the node reached after observing `demand`.
#[derive(Debug, Clone, Copy)]
pub struct Branch {
    pub demand: f64,
    /// Conditional probability given the parent node.
    pub prob: f64,
    pub child: usize,
}

#[derive(Debug, Clone)]
pub struct Node {
    pub depth: usize,
    /// Unconditional probability of reaching this node (1 for chain nodes).
    pub mass: f64,
    /// Expected total demand of agents `depth..n` given the prefix.
    pub future_mean: f64,
    /// Branches sorted by demand.
    pub branches: Vec<Branch>,
}

#[derive(Debug, Clone)]
pub struct DemandTree {
    n: usize,
    nodes: Vec<Node>,
}

fn key(x: f64) -> f64 {
    // Collapse -0.0 into 0.0 so equal demands group together.
    if x == 0.0 {
        0.0
    } else {
        x
    }
}

impl DemandTree {
    /// Builds the tree of a finite joint distribution.
    pub fn from_scenarios(n: usize, probs: &[f64], demands: &[Vec<f64>]) -> Self {
        let mut order: Vec<usize> = (0..probs.len()).collect();
        order.sort_by(|&a, &b| {
            for (x, y) in demands[a].iter().zip(&demands[b]) {
                match key(*x).total_cmp(&key(*y)) {
                    std::cmp::Ordering::Equal => continue,
                    o => return o,
                }
            }
            a.cmp(&b)
        });
        let mut tree = DemandTree { n, nodes: Vec::new() };
        tree.build(0, &order, probs, demands);
        tree
    }

    fn build(&mut self, depth: usize, idx: &[usize], probs: &[f64], demands: &[Vec<f64>]) -> usize {
        let mass: Sum = idx.iter().map(|&s| probs[s]).collect();
        let mass = mass.value();
        let fut: Sum = idx
            .iter()
            .map(|&s| probs[s] * demands[s][depth..].iter().sum::<f64>())
            .collect();
        let id = self.nodes.len();
        self.nodes.push(Node {
            depth,
            mass,
            future_mean: if mass > 0.0 { fut.value() / mass } else { 0.0 },
            branches: Vec::new(),
        });
        if depth == self.n {
            return id;
        }
        let mut branches = Vec::new();
        let mut start = 0;
        while start < idx.len() {
            let d = key(demands[idx[start]][depth]);
            let mut end = start + 1;
            while end < idx.len() && key(demands[idx[end]][depth]) == d {
                end += 1;
            }
            let group = &idx[start..end];
            let gm: Sum = group.iter().map(|&s| probs[s]).collect();
            let child = self.build(depth + 1, group, probs, demands);
            branches.push(Branch {
                demand: d,
                prob: if mass > 0.0 { gm.value() / mass } else { 0.0 },
                child,
            });
            start = end;
        }
        self.nodes[id].branches = branches;
        id
    }

    /// Chain tree for independent marginals given as `(value, prob)` lists.
    pub fn chain(marginals: &[Vec<(f64, f64)>]) -> Self {
        let n = marginals.len();
        let means: Vec<f64> = marginals
            .iter()
            .map(|m| m.iter().map(|&(v, p)| v * p).sum())
            .collect();
        let nodes = (0..=n)
            .map(|depth| {
                let mut branches: Vec<Branch> = if depth < n {
                    marginals[depth]
                        .iter()
                        .map(|&(v, p)| Branch {
                            demand: key(v),
                            prob: p,
                            child: depth + 1,
                        })
                        .collect()
                } else {
                    Vec::new()
                };
                branches.sort_by(|a, b| a.demand.total_cmp(&b.demand));
                Node {
                    depth,
                    mass: 1.0,
                    future_mean: means[depth..].iter().sum(),
                    branches,
                }
            })
            .collect();
        DemandTree { n, nodes }
    }

    pub fn n_agents(&self) -> usize {
        self.n
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn node(&self, id: usize) -> &Node {
        &self.nodes[id]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Index of the branch followed after observing `d` at node `id`. An
    /// exact match is preferred; otherwise the branch with the closest demand
    /// (lower on ties).
    pub fn step_index(&self, id: usize, d: f64) -> Option<usize> {
        let br = &self.nodes[id].branches;
        if br.is_empty() {
            return None;
        }
        let d = key(d);
        Some(match br.binary_search_by(|b| b.demand.total_cmp(&d)) {
            Ok(i) => i,
            Err(0) => 0,
            Err(i) if i == br.len() => i - 1,
            Err(i) => {
                if d - br[i - 1].demand <= br[i].demand - d {
                    i - 1
                } else {
                    i
                }
            }
        })
    }

    /// Branch followed after observing `d` at node `id`.
    pub fn step(&self, id: usize, d: f64) -> Option<&Branch> {
        self.step_index(id, d).map(|i| &self.nodes[id].branches[i])
    }

    /// Node reached after observing `prefix`.
    pub fn locate(&self, prefix: &[f64]) -> usize {
        let mut id = self.root();
        for &d in prefix {
            match self.step(id, d) {
                Some(b) => id = b.child,
                None => break,
            }
        }
        id
    }

    /// Expected demand of agents after `prefix`.
    pub fn conditional_future_mean(&self, prefix: &[f64]) -> f64 {
        self.nodes[self.locate(prefix)].future_mean
    }
}
