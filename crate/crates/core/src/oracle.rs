//! Exhaustive computations at small `n`: every tree with its probability and
//! the exact trajectory laws of both chains.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::beta::merge_ratio;
use crate::error::{ensure, Error, Result};
use crate::offspring::{tree_log_prob_given_leaves, Alpha};
use crate::partition::Partition;
use crate::pruning::PruneState;
use crate::tree::{NodeId, Tree};

pub const MAX_ENUMERATED_LEAVES: usize = 8;
pub const MAX_TRAJECTORY_LEAVES: usize = 5;
pub const MAX_POST_EVENT_LEAVES: usize = 6;

/// Separator between successive partitions in a trajectory key.
pub const TRAJECTORY_SEPARATOR: &str = " > ";

/// A finite distribution keyed by canonical strings.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DistTable {
    probs: BTreeMap<String, f64>,
    tolerance: f64,
}

impl DistTable {
    pub fn new(tolerance: f64) -> DistTable {
        DistTable { probs: BTreeMap::new(), tolerance }
    }

    pub fn add(&mut self, key: impl Into<String>, p: f64) {
        *self.probs.entry(key.into()).or_insert(0.0) += p;
    }

    /// Adds every entry of `other`, in key order.
    pub fn absorb(&mut self, other: DistTable) {
        for (k, p) in other.probs {
            self.add(k, p);
        }
    }

    pub fn get(&self, key: &str) -> f64 {
        self.probs.get(key).copied().unwrap_or(0.0)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.probs.contains_key(key)
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.probs.iter().map(|(k, &p)| (k.as_str(), p))
    }

    pub fn total(&self) -> f64 {
        self.probs.values().sum()
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn is_normalized(&self) -> bool {
        self.probs.values().all(|&p| p >= 0.0) && (self.total() - 1.0).abs() <= self.tolerance
    }

    /// Divides every entry by the total mass.
    pub fn normalized(mut self) -> DistTable {
        let total = self.total();
        for p in self.probs.values_mut() {
            *p /= total;
        }
        self
    }

    /// Pushes the law forward through `f`.
    pub fn map_keys(&self, f: impl Fn(&str) -> String) -> DistTable {
        let mut out = DistTable::new(self.tolerance);
        for (k, p) in self.iter() {
            out.add(f(k), p);
        }
        out
    }
}

/// `(1/2) Σ |p - q|`, with missing keys counted as zero.
pub fn tv_distance(d1: &DistTable, d2: &DistTable) -> f64 {
    let mut sum = 0.0;
    for (k, p) in d1.iter() {
        sum += (p - d2.get(k)).abs();
    }
    for (k, q) in d2.iter() {
        if !d1.contains(k) {
            sum += q;
        }
    }
    0.5 * sum
}

/// Child-count sequences of all ordered trees with `n` leaves and no unary node.
fn shapes(n: usize, memo: &mut Vec<Option<Vec<Vec<u32>>>>) -> Vec<Vec<u32>> {
    if let Some(s) = &memo[n] {
        return s.clone();
    }
    let mut out = Vec::new();
    if n == 1 {
        out.push(vec![0]);
    } else {
        for k in 2..=n {
            for parts in compositions(n, k) {
                let mut acc: Vec<Vec<u32>> = vec![vec![k as u32]];
                for part in parts {
                    let subs = shapes(part, memo);
                    acc = acc
                        .iter()
                        .flat_map(|prefix| {
                            subs.iter().map(move |s| {
                                let mut c = prefix.clone();
                                c.extend_from_slice(s);
                                c
                            })
                        })
                        .collect();
                }
                out.extend(acc);
            }
        }
    }
    memo[n] = Some(out.clone());
    out
}

/// Ordered ways of writing `n` as `k` positive parts.
fn compositions(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 1 {
        return vec![vec![n]];
    }
    (1..=n - (k - 1))
        .flat_map(|first| {
            compositions(n - first, k - 1).into_iter().map(move |mut rest| {
                rest.insert(0, first);
                rest
            })
        })
        .collect()
}

/// All ordered trees with `n` leaves and no unary node, with their
/// probabilities under the law conditioned on `n` leaves.
pub fn enumerate_trees(alpha: Alpha, n: usize) -> Result<Vec<(Tree, f64)>> {
    ensure!(n >= 1, "a tree has at least one leaf");
    if n > MAX_ENUMERATED_LEAVES {
        return Err(Error::ResourceRefusal(format!(
            "tree enumeration is limited to n <= {MAX_ENUMERATED_LEAVES}, got {n}"
        )));
    }
    let mut memo = vec![None; n + 1];
    shapes(n, &mut memo)
        .into_iter()
        .map(|counts| {
            let t = Tree::from_child_counts(counts)?;
            let p = tree_log_prob_given_leaves(alpha, &t)?.exp();
            Ok((t, p))
        })
        .collect()
}

/// Law of the shape key under the law conditioned on `n` leaves.
pub fn tree_law(alpha: Alpha, n: usize) -> Result<DistTable> {
    let mut table = DistTable::new(1e-12);
    for (t, p) in enumerate_trees(alpha, n)? {
        table.add(t.shape_key(), p);
    }
    Ok(table)
}

/// `E_n[k_∅ - 1]` by summing over all trees.
pub fn enumerated_mean_root_excess(alpha: Alpha, n: usize) -> Result<f64> {
    Ok(enumerate_trees(alpha, n)?.iter().map(|(t, p)| f64::from(t.child_count(0) - 1) * p).sum())
}

fn permutations(n: usize) -> Vec<Vec<u32>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n as u32);
            out.push(q);
        }
    }
    out
}

fn check_trajectory_size(n: usize) -> Result<()> {
    ensure!(n >= 1, "need at least one leaf");
    if n > MAX_TRAJECTORY_LEAVES {
        return Err(Error::ResourceRefusal(format!(
            "exact trajectory laws are limited to n <= {MAX_TRAJECTORY_LEAVES}, got {n}"
        )));
    }
    Ok(())
}

fn unroll_prune(state: PruneState<'_>, key: String, p: f64, table: &mut DistTable) {
    if state.is_finished() {
        table.add(key, p);
        return;
    }
    let denom = (state.leaf_count() - 1) as f64;
    let cuts: Vec<NodeId> = state.cuttable().collect();
    for u in cuts {
        let w = state.weight(u) as f64 / denom;
        let mut next = state.clone();
        next.cut_at(u).expect("cuttable nodes can be cut");
        let next_key = format!("{key}{TRAJECTORY_SEPARATOR}{}", next.partition());
        unroll_prune(next, next_key, p * w, table);
    }
}

/// Exact law of the partition trajectory of the pruning chain on a tree
/// with `n` uniformly labeled leaves.
pub fn exact_prune_chain_law(alpha: Alpha, n: usize) -> Result<DistTable> {
    check_trajectory_size(n)?;
    let trees = enumerate_trees(alpha, n)?;
    let labelings = permutations(n);
    let per_label = 1.0 / labelings.len() as f64;
    let parts: Vec<DistTable> = trees
        .par_iter()
        .map(|(t, p)| {
            let mut table = DistTable::new(1e-12);
            for labels in &labelings {
                let labeled = t.with_leaf_labels(labels).expect("permutation labels");
                let state = PruneState::new(&labeled).expect("enumerated trees are valid");
                let key = state.partition().to_string();
                unroll_prune(state, key, p * per_label, &mut table);
            }
            table
        })
        .collect();
    let mut law = DistTable::new(1e-12);
    for part in parts {
        law.absorb(part);
    }
    Ok(law)
}

/// Index subsets of `0..b` of size `k`, in lexicographic order.
fn subsets(b: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, b: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..b {
            cur.push(i);
            go(i + 1, b, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, b, k, &mut Vec::new(), &mut out);
    out
}

fn unroll_beta(alpha: Alpha, state: Partition, key: String, p: f64, table: &mut DistTable) {
    let b = state.block_count();
    if b == 1 {
        table.add(key, p);
        return;
    }
    for k in 2..=b {
        let ratio = merge_ratio(alpha, b as u64, k as u64).expect("2 <= k <= b");
        for set in subsets(b, k) {
            let next = state.merge(&set).expect("valid block indices");
            let next_key = format!("{key}{TRAJECTORY_SEPARATOR}{next}");
            unroll_beta(alpha, next, next_key, p * ratio, table);
        }
    }
}

/// Exact law of the partition trajectory of the coalescent jump chain
/// started from `n` singletons.
pub fn exact_beta_chain_law(alpha: Alpha, n: usize) -> Result<DistTable> {
    check_trajectory_size(n)?;
    let start = Partition::singletons(n);
    let key = start.to_string();
    let mut table = DistTable::new(1e-12);
    unroll_beta(alpha, start, key, 1.0, &mut table);
    Ok(table)
}

/// Law of the partition after the first event, read off a trajectory law.
pub fn first_event_marginal(law: &DistTable) -> DistTable {
    law.map_keys(|k| {
        let mut parts = k.split(TRAJECTORY_SEPARATOR);
        let first = parts.next().unwrap_or_default();
        parts.next().unwrap_or(first).to_string()
    })
}

/// The first-event law implied by the rates: a given set of `k` singletons
/// merges with probability `λ_{n,k} / λ_n`.
pub fn merge_ratio_first_event_law(alpha: Alpha, n: usize) -> Result<DistTable> {
    ensure!(n >= 2, "need at least two blocks");
    let start = Partition::singletons(n);
    let mut table = DistTable::new(1e-12);
    for k in 2..=n {
        let ratio = merge_ratio(alpha, n as u64, k as u64)?;
        for set in subsets(n, k) {
            table.add(start.merge(&set)?.to_string(), ratio);
        }
    }
    Ok(table)
}

/// The tree left after cutting at `u`: the subtree of `u` becomes a leaf.
pub fn cut_shape(t: &Tree, u: NodeId) -> Tree {
    let counts = t.child_counts();
    let mut out = Vec::with_capacity(counts.len());
    out.extend_from_slice(&counts[..u]);
    out.push(0);
    out.extend_from_slice(&counts[t.subtree_end(u)..]);
    Tree::from_child_counts(out).expect("cutting a subtree leaves a tree")
}

/// Law of the tree after the first cut, conditioned on it having `k` leaves.
pub fn exact_post_first_event_tree_law(alpha: Alpha, n: usize, k: usize) -> Result<DistTable> {
    ensure!(
        2 <= k && k < n && n <= MAX_POST_EVENT_LEAVES,
        "need 2 <= k < n <= {MAX_POST_EVENT_LEAVES}, got n = {n}, k = {k}"
    );
    let mut table = DistTable::new(1e-12);
    let denom = (n - 1) as f64;
    for (t, p) in enumerate_trees(alpha, n)? {
        for u in t.internal_nodes() {
            let pruned = cut_shape(&t, u);
            if pruned.leaf_count() == k {
                table.add(pruned.shape_key(), p * f64::from(t.child_count(u) - 1) / denom);
            }
        }
    }
    Ok(table.normalized())
}
