//! Pruning at nodes: cutting an internal node discards everything above it
//! and keeps the node itself as a leaf that carries the merged labels.
//!
//! The jump chain picks the next node `u` among the live internal nodes with
//! probability `(k_u - 1) / (L - 1)`, where `L` is the current leaf count.
//! The weights always total `L - 1` because no node of a live subtree has
//! been touched.

use rand::Rng;

use crate::error::{ensure, Result};
use crate::fenwick::Fenwick;
use crate::partition::Partition;
use crate::rng::open_closed_unit;
use crate::sampler::mark_from_uniform;
use crate::trace::{merge_small_to_large, ChainStats, ChainTrace, TraceEvent};
use crate::tree::{NodeId, Tree};

/// `ξ` with `P(ξ >= θ) = (1+θ)^{1-k}`.
pub fn sample_mark<R: Rng + ?Sized>(k: u32, rng: &mut R) -> Result<f64> {
    ensure!(k >= 2, "marks live on nodes with at least two children, got k = {k}");
    Ok(mark_from_uniform(k, open_closed_unit(rng)))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CutEvent {
    pub node: NodeId,
    /// Blocks carried by the leaves above the cut node, in least-element order.
    pub merged: Vec<Vec<u32>>,
    pub terminal: bool,
}

/// Mutable pruning state over an immutable labeled tree.
#[derive(Debug, Clone)]
pub struct PruneState<'t> {
    tree: &'t Tree,
    weights: Fenwick,
    dead: Vec<bool>,
    cut: Vec<bool>,
    /// Labels carried by each current leaf; empty elsewhere.
    blocks: Vec<Vec<u32>>,
    leaves: usize,
    finished: bool,
}

impl<'t> PruneState<'t> {
    pub fn new(tree: &'t Tree) -> Result<PruneState<'t>> {
        ensure!(tree.is_labeled(), "pruning needs a labeled tree");
        ensure!(tree.is_gw_valid(), "pruning needs a tree without unary nodes");
        let weights = tree.child_counts().iter().map(|&k| u64::from(k.saturating_sub(1))).collect();
        let blocks = (0..tree.node_count()).map(|v| tree.label(v).map_or_else(Vec::new, |l| vec![l])).collect();
        let leaves = tree.leaf_count();
        Ok(PruneState {
            tree,
            weights: Fenwick::new(weights),
            dead: vec![false; tree.node_count()],
            cut: vec![false; tree.node_count()],
            blocks,
            leaves,
            finished: leaves == 1,
        })
    }

    pub fn tree(&self) -> &Tree {
        self.tree
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    pub fn is_alive(&self, v: NodeId) -> bool {
        !self.dead[v]
    }

    /// Live, uncut internal nodes.
    pub fn cuttable(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.tree.node_count()).filter(move |&v| self.weights.weight(v) > 0)
    }

    /// Selection weight `k_u - 1` of a cuttable node, zero otherwise.
    pub fn weight(&self, v: NodeId) -> u64 {
        self.weights.weight(v)
    }

    /// Picks the next node to cut with probability `(k_u - 1) / (L - 1)`.
    pub fn select<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<NodeId> {
        debug_assert_eq!(self.weights.total(), self.leaves as u64 - 1);
        if self.weights.total() == 0 {
            return None;
        }
        Some(self.weights.find(rng.gen_range(0..self.weights.total())))
    }

    pub fn cut_at(&mut self, u: NodeId) -> Result<CutEvent> {
        ensure!(u < self.tree.node_count(), "node {u} not in tree");
        ensure!(!self.dead[u], "node {u} was removed by an earlier cut");
        ensure!(!self.tree.is_leaf(u) && !self.cut[u], "node {u} is a leaf");
        let end = self.tree.subtree_end(u);
        let mut merged = Vec::new();
        let mut v = u + 1;
        while v < end {
            if self.cut[v] || self.tree.is_leaf(v) {
                merged.push(std::mem::take(&mut self.blocks[v]));
                self.dead[v] = true;
                v = if self.cut[v] { self.tree.subtree_end(v) } else { v + 1 };
            } else {
                self.weights.set(v, 0);
                self.dead[v] = true;
                v += 1;
            }
        }
        self.weights.set(u, 0);
        self.cut[u] = true;
        self.leaves = self.leaves + 1 - merged.len();
        merged.sort_unstable_by_key(|b| *b.iter().min().expect("blocks are nonempty"));
        let event_blocks: Vec<Vec<u32>> = merged
            .iter()
            .map(|b| {
                let mut b = b.clone();
                b.sort_unstable();
                b
            })
            .collect();
        self.blocks[u] = merge_small_to_large(merged);
        let terminal = u == 0;
        self.finished = terminal;
        Ok(CutEvent { node: u, merged: event_blocks, terminal })
    }

    /// Partition of the labels by the current leaf that carries them.
    pub fn partition(&self) -> Partition {
        let blocks = (0..self.tree.node_count())
            .filter(|&v| !self.dead[v] && !self.blocks[v].is_empty())
            .map(|v| self.blocks[v].clone())
            .collect();
        Partition::from_blocks_unchecked(blocks)
    }
}

fn record(state: &PruneState<'_>, event: CutEvent, step: usize) -> TraceEvent {
    TraceEvent { step, cut_node: event.node as i64, merged: event.merged, partition: state.partition() }
}

/// Runs the jump chain to the end and records every event.
pub fn prune_chain<R: Rng + ?Sized>(t: &Tree, rng: &mut R) -> Result<ChainTrace> {
    let mut state = PruneState::new(t)?;
    let initial = state.partition();
    let mut events = Vec::new();
    while !state.is_finished() {
        let u = state.select(rng).expect("an unfinished state has a cuttable node");
        let event = state.cut_at(u)?;
        events.push(record(&state, event, events.len() + 1));
    }
    Ok(ChainTrace { initial, events })
}

/// Same chain as [`prune_chain`], keeping only the summary statistics.
pub fn prune_chain_stats<R: Rng + ?Sized>(t: &Tree, rng: &mut R) -> Result<ChainStats> {
    let n = t.leaf_count();
    let mut state = PruneState::new(t)?;
    let mut stats = ChainStats { z: 0, b: 0, first_event_size: 0, largest_block_fraction: 1.0 };
    while !state.is_finished() {
        let u = state.select(rng).expect("an unfinished state has a cuttable node");
        let event = state.cut_at(u)?;
        stats.z += 1;
        if stats.z == 1 {
            stats.first_event_size = event.merged.len();
        }
        stats.b = event.merged.len();
        let largest = event.merged.iter().map(Vec::len).max().unwrap_or(0);
        stats.largest_block_fraction = largest as f64 / n as f64;
    }
    Ok(stats)
}

/// The chain obtained by marking every internal node with an independent
/// `ξ_u` and cutting in increasing order of the marks, skipping nodes that an
/// earlier cut already removed. Ties go to the lower node id.
pub fn prune_chain_by_marks<R: Rng + ?Sized>(t: &Tree, rng: &mut R) -> Result<ChainTrace> {
    let mut state = PruneState::new(t)?;
    let initial = state.partition();
    let mut marks: Vec<(f64, NodeId)> = Vec::new();
    for v in t.internal_nodes() {
        marks.push((sample_mark(t.child_count(v), rng)?, v));
    }
    marks.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut events = Vec::new();
    for (_, v) in marks {
        if state.is_finished() {
            break;
        }
        if !state.is_alive(v) {
            continue;
        }
        let event = state.cut_at(v)?;
        events.push(record(&state, event, events.len() + 1));
    }
    Ok(ChainTrace { initial, events })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use std::collections::HashMap;

    fn leaf_beside_cherry() -> Tree {
        // root -> [leaf 1, internal -> [leaf 2, leaf 3]]
        Tree::from_child_counts(vec![2, 0, 2, 0, 0]).unwrap().with_dfs_labels()
    }

    #[test]
    fn mark_domain() {
        let mut rng = stream(0, 0);
        assert!(sample_mark(1, &mut rng).is_err());
        for _ in 0..100 {
            assert!(sample_mark(3, &mut rng).unwrap() >= 0.0);
        }
    }

    #[test]
    fn single_cherry_chain() {
        let t = Tree::cherry().with_dfs_labels();
        let trace = prune_chain(&t, &mut stream(1, 0)).unwrap();
        assert_eq!(trace.z(), 1);
        assert_eq!(trace.b(), Some(2));
        assert_eq!(trace.events[0].merged, vec![vec![1], vec![2]]);
        assert_eq!(trace.final_partition().to_string(), "1,2");
    }

    #[test]
    fn single_leaf_chain_is_empty() {
        let t = Tree::single_root().with_dfs_labels();
        let trace = prune_chain(&t, &mut stream(1, 0)).unwrap();
        assert_eq!(trace.z(), 0);
        assert!(trace.is_terminal());
    }

    #[test]
    fn requires_labels_and_validity() {
        assert!(prune_chain(&Tree::cherry(), &mut stream(1, 0)).is_err());
        let unary = Tree::from_child_counts(vec![1, 0]).unwrap().with_dfs_labels();
        assert!(prune_chain(&unary, &mut stream(1, 0)).is_err());
    }

    #[test]
    fn cut_at_root_gives_one_block() {
        let t = leaf_beside_cherry();
        let mut s = PruneState::new(&t).unwrap();
        let e = s.cut_at(0).unwrap();
        assert!(e.terminal);
        assert_eq!(e.merged, vec![vec![1], vec![2], vec![3]]);
        assert_eq!(s.leaf_count(), 1);
        assert_eq!(s.partition().to_string(), "1,2,3");
    }

    #[test]
    fn cut_lower_node() {
        let t = Tree::from_child_counts(vec![2, 2, 0, 0, 0]).unwrap().with_dfs_labels();
        let mut s = PruneState::new(&t).unwrap();
        let before = s.leaf_count();
        let e = s.cut_at(1).unwrap();
        assert!(!e.terminal);
        assert_eq!(e.merged, vec![vec![1], vec![2]]);
        assert_eq!(s.partition().to_string(), "1,2|3");
        assert_eq!(s.leaf_count(), before - t.leaves_above(1) + 1);
        // the cut node is now a leaf and cannot be cut again
        assert!(s.cut_at(1).is_err());
        assert!(s.cut_at(2).is_err());
        assert!(s.cut_at(3).is_err());
        assert_eq!(s.cuttable().collect::<Vec<_>>(), vec![0]);
    }

    #[test]
    fn weights_track_leaf_count() {
        let t = Tree::from_child_counts(vec![3, 2, 0, 0, 2, 0, 2, 0, 0, 0]).unwrap().with_dfs_labels();
        let mut rng = stream(3, 0);
        for _ in 0..200 {
            let mut s = PruneState::new(&t).unwrap();
            while !s.is_finished() {
                let total: u64 = s.cuttable().map(|v| s.weight(v)).sum();
                assert_eq!(total, s.leaf_count() as u64 - 1);
                let u = s.select(&mut rng).unwrap();
                let above: Vec<u32> =
                    (u..t.subtree_end(u)).filter(|&v| s.is_alive(v) && v != u).flat_map(|v| t.label(v)).collect();
                let e = s.cut_at(u).unwrap();
                let mut got: Vec<u32> = e.merged.concat();
                got.sort_unstable();
                // labels merged are exactly those carried above u
                let mut expected: Vec<u32> = (u + 1..t.subtree_end(u)).flat_map(|v| t.label(v)).collect();
                expected.sort_unstable();
                assert_eq!(got, expected);
                assert!(above.iter().all(|l| got.contains(l)));
            }
        }
    }

    #[test]
    fn first_event_weights() {
        // weights (1, 1) over L - 1 = 2
        let t = leaf_beside_cherry();
        let mut rng = stream(5, 0);
        let reps = 20_000;
        let lower = (0..reps).filter(|_| prune_chain(&t, &mut rng).unwrap().events[0].cut_node == 2).count();
        let p = lower as f64 / reps as f64;
        assert!((p - 0.5).abs() < 4.0 * (0.25 / reps as f64).sqrt(), "{p}");
    }

    #[test]
    fn marks_and_jump_chain_agree_on_small_tree() {
        let t = leaf_beside_cherry();
        let reps = 40_000;
        let mut a: HashMap<String, usize> = HashMap::new();
        let mut b: HashMap<String, usize> = HashMap::new();
        let mut rng = stream(6, 0);
        for _ in 0..reps {
            *a.entry(prune_chain(&t, &mut rng).unwrap().trajectory_key()).or_default() += 1;
            *b.entry(prune_chain_by_marks(&t, &mut rng).unwrap().trajectory_key()).or_default() += 1;
        }
        let keys: std::collections::BTreeSet<&String> = a.keys().chain(b.keys()).collect();
        let tv: f64 = keys
            .iter()
            .map(|k| {
                let pa = *a.get(*k).unwrap_or(&0) as f64 / reps as f64;
                let pb = *b.get(*k).unwrap_or(&0) as f64 / reps as f64;
                (pa - pb).abs()
            })
            .sum::<f64>()
            / 2.0;
        assert!(tv < 0.01, "tv = {tv}");
    }

    #[test]
    fn stats_match_trace() {
        let t = Tree::from_child_counts(vec![3, 2, 0, 0, 2, 0, 2, 0, 0, 0]).unwrap().with_dfs_labels();
        for i in 0..50 {
            let trace = prune_chain(&t, &mut stream(8, i)).unwrap();
            let stats = prune_chain_stats(&t, &mut stream(8, i)).unwrap();
            assert_eq!(trace.stats(), stats);
            assert!(stats.z <= t.internal_nodes().count());
            assert!(stats.b >= 2);
        }
    }
}
