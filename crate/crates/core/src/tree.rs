//! Rooted ordered finite trees stored as a depth-first arena.
//!
//! Node `0` is the root. The children of a node are contiguous in the sense
//! that its whole subtree occupies the index range `v..end(v)`, and its first
//! child (if any) is `v + 1`.

use rand::seq::SliceRandom;
use rand::Rng;
use serde_json::{json, Value};

use crate::error::{ensure, invalid, Result};

pub type NodeId = usize;

const NO_PARENT: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Tree {
    child_count: Vec<u32>,
    parent: Vec<u32>,
    end: Vec<u32>,
    /// Per-node leaf label; `0` on internal nodes. `None` for unlabeled trees.
    labels: Option<Vec<u32>>,
}

impl Tree {
    /// Builds a tree from its child counts listed in depth-first order.
    pub fn from_child_counts(counts: Vec<u32>) -> Result<Tree> {
        ensure!(!counts.is_empty(), "a tree has at least one node");
        ensure!(counts.len() < NO_PARENT as usize, "tree too large");
        let n = counts.len();
        let mut parent = vec![NO_PARENT; n];
        let mut end = vec![0u32; n];
        // (node, children still to attach)
        let mut stack: Vec<(usize, u32)> = Vec::new();
        for (v, &k) in counts.iter().enumerate() {
            if v > 0 {
                let top = stack.last_mut().ok_or_else(|| invalid!("child counts describe a forest, not a tree"))?;
                parent[v] = top.0 as u32;
                top.1 -= 1;
            }
            stack.push((v, k));
            while let Some(&(u, 0)) = stack.last() {
                end[u] = (v + 1) as u32;
                stack.pop();
            }
        }
        ensure!(stack.is_empty(), "child counts are truncated: {} nodes still expect children", stack.len());
        ensure!(end[0] as usize == n, "child counts describe a forest, not a tree");
        Ok(Tree { child_count: counts, parent, end, labels: None })
    }

    pub fn single_root() -> Tree {
        Tree::from_child_counts(vec![0]).expect("valid")
    }

    /// Root with `k` leaf children.
    pub fn star(k: u32) -> Tree {
        let mut counts = vec![k];
        counts.extend(std::iter::repeat_n(0, k as usize));
        Tree::from_child_counts(counts).expect("valid")
    }

    pub fn cherry() -> Tree {
        Tree::star(2)
    }

    pub fn node_count(&self) -> usize {
        self.child_count.len()
    }

    pub fn child_count(&self, v: NodeId) -> u32 {
        self.child_count[v]
    }

    pub fn child_counts(&self) -> &[u32] {
        &self.child_count
    }

    pub fn is_leaf(&self, v: NodeId) -> bool {
        self.child_count[v] == 0
    }

    pub fn parent(&self, v: NodeId) -> Option<NodeId> {
        match self.parent[v] {
            NO_PARENT => None,
            p => Some(p as usize),
        }
    }

    /// One past the last node of the subtree rooted at `v`.
    pub fn subtree_end(&self, v: NodeId) -> NodeId {
        self.end[v] as usize
    }

    pub fn children(&self, v: NodeId) -> Children<'_> {
        Children { tree: self, next: v + 1, remaining: self.child_count[v] }
    }

    pub fn leaves(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.node_count()).filter(move |&v| self.is_leaf(v))
    }

    pub fn internal_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.node_count()).filter(move |&v| !self.is_leaf(v))
    }

    pub fn leaf_count(&self) -> usize {
        self.child_count.iter().filter(|&&k| k == 0).count()
    }

    /// Number of leaves in the subtree rooted at `v`.
    pub fn leaves_above(&self, v: NodeId) -> usize {
        self.child_count[v..self.subtree_end(v)].iter().filter(|&&k| k == 0).count()
    }

    pub fn depth(&self, mut v: NodeId) -> usize {
        let mut d = 0;
        while let Some(p) = self.parent(v) {
            v = p;
            d += 1;
        }
        d
    }

    pub fn depths(&self) -> Vec<u32> {
        let mut depth = vec![0u32; self.node_count()];
        for v in 1..self.node_count() {
            depth[v] = depth[self.parent[v] as usize] + 1;
        }
        depth
    }

    pub fn height(&self) -> usize {
        self.depths().into_iter().max().unwrap_or(0) as usize
    }

    /// No node has exactly one child.
    pub fn is_gw_valid(&self) -> bool {
        self.child_count.iter().all(|&k| k != 1)
    }

    /// Strict ancestors of `v`, nearest first.
    pub fn strict_ancestors(&self, v: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        std::iter::successors(self.parent(v), move |&u| self.parent(u))
    }

    pub fn is_labeled(&self) -> bool {
        self.labels.is_some()
    }

    pub fn label(&self, v: NodeId) -> Option<u32> {
        self.labels.as_ref().and_then(|l| match l[v] {
            0 => None,
            x => Some(x),
        })
    }

    /// Labels of the leaves in depth-first order.
    pub fn leaf_labels(&self) -> Option<Vec<u32>> {
        self.labels.as_ref().map(|l| self.leaves().map(|v| l[v]).collect())
    }

    /// Assigns `labels[i]` to the `i`-th leaf in depth-first order. The labels
    /// must be a permutation of `1..=L`.
    pub fn with_leaf_labels(&self, labels: &[u32]) -> Result<Tree> {
        let leaves = self.leaf_count();
        ensure!(labels.len() == leaves, "{} labels given for {leaves} leaves", labels.len());
        let mut seen = vec![false; leaves + 1];
        for &l in labels {
            ensure!(l >= 1 && (l as usize) <= leaves, "label {l} outside 1..={leaves}");
            ensure!(!seen[l as usize], "label {l} repeated");
            seen[l as usize] = true;
        }
        let mut per_node = vec![0u32; self.node_count()];
        for (v, &l) in self.leaves().zip(labels) {
            per_node[v] = l;
        }
        Ok(Tree { labels: Some(per_node), ..self.clone() })
    }

    /// Labels leaves `1..=L` in depth-first order.
    pub fn with_dfs_labels(&self) -> Tree {
        let labels: Vec<u32> = (1..=self.leaf_count() as u32).collect();
        self.with_leaf_labels(&labels).expect("dfs labels are a bijection")
    }

    /// Uniformly random labeling of the leaves.
    pub fn with_random_labels<R: Rng + ?Sized>(&self, rng: &mut R) -> Tree {
        let mut labels: Vec<u32> = (1..=self.leaf_count() as u32).collect();
        labels.shuffle(rng);
        self.with_leaf_labels(&labels).expect("a permutation is a bijection")
    }

    pub fn unlabeled(&self) -> Tree {
        Tree { labels: None, ..self.clone() }
    }

    /// Grafts `other` onto the leaf `u`, identifying its root with `u`.
    /// The result is unlabeled.
    pub fn graft(&self, u: NodeId, other: &Tree) -> Result<Tree> {
        ensure!(u < self.node_count(), "node {u} not in tree");
        ensure!(self.is_leaf(u), "graft target {u} is not a leaf");
        let mut counts = Vec::with_capacity(self.node_count() + other.node_count() - 1);
        counts.extend_from_slice(&self.child_count[..u]);
        counts.extend_from_slice(&other.child_count);
        counts.extend_from_slice(&self.child_count[u + 1..]);
        Tree::from_child_counts(counts)
    }

    /// Keeps the nodes of depth at most `h`; nodes at depth `h` become leaves.
    /// The result is unlabeled.
    pub fn truncate(&self, h: usize) -> Tree {
        let depth = self.depths();
        let counts = self
            .child_count
            .iter()
            .zip(&depth)
            .filter(|(_, &d)| d as usize <= h)
            .map(|(&k, &d)| if d as usize == h { 0 } else { k })
            .collect();
        Tree::from_child_counts(counts).expect("truncation of a tree is a tree")
    }

    /// Shape key: child counts in depth-first order, comma separated.
    pub fn shape_key(&self) -> String {
        let parts: Vec<String> = self.child_count.iter().map(|k| k.to_string()).collect();
        parts.join(",")
    }

    /// Nested JSON: leaves as `{"label": k}` (null when unlabeled), internal
    /// nodes as `{"children": [...]}`.
    pub fn to_json(&self) -> Value {
        self.node_json(0)
    }

    fn node_json(&self, v: NodeId) -> Value {
        if self.is_leaf(v) {
            json!({ "label": self.label(v) })
        } else {
            let children: Vec<Value> = self.children(v).map(|c| self.node_json(c)).collect();
            json!({ "children": children })
        }
    }

    pub fn to_json_string(&self) -> String {
        self.to_json().to_string()
    }

    pub fn from_json(value: &Value) -> Result<Tree> {
        let mut counts = Vec::new();
        let mut labels = Vec::new();
        let mut stack = vec![value];
        while let Some(node) = stack.pop() {
            let obj = node.as_object().ok_or_else(|| invalid!("tree node is not an object"))?;
            if let Some(children) = obj.get("children") {
                let children = children.as_array().ok_or_else(|| invalid!("children is not an array"))?;
                ensure!(!children.is_empty(), "internal node with empty children array");
                counts.push(children.len() as u32);
                labels.push(None);
                stack.extend(children.iter().rev());
            } else {
                let label = match obj.get("label") {
                    None | Some(Value::Null) => None,
                    Some(l) => Some(
                        l.as_u64()
                            .filter(|&x| x >= 1 && x < u32::MAX as u64)
                            .ok_or_else(|| invalid!("leaf label must be a positive integer"))?
                            as u32,
                    ),
                };
                counts.push(0);
                labels.push(Some(label));
            }
        }
        let tree = Tree::from_child_counts(counts)?;
        let leaf_labels: Vec<Option<u32>> = labels.into_iter().flatten().collect();
        if leaf_labels.iter().all(Option::is_none) {
            return Ok(tree);
        }
        ensure!(leaf_labels.iter().all(Option::is_some), "either every leaf or no leaf carries a label");
        let leaf_labels: Vec<u32> = leaf_labels.into_iter().flatten().collect();
        tree.with_leaf_labels(&leaf_labels)
    }
}

pub struct Children<'a> {
    tree: &'a Tree,
    next: NodeId,
    remaining: u32,
}

impl Iterator for Children<'_> {
    type Item = NodeId;

    fn next(&mut self) -> Option<NodeId> {
        if self.remaining == 0 {
            return None;
        }
        let c = self.next;
        self.remaining -= 1;
        self.next = self.tree.subtree_end(c);
        Some(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cherry_over_cherry() -> Tree {
        // root -> [internal -> [leaf, leaf], leaf]
        Tree::from_child_counts(vec![2, 2, 0, 0, 0]).unwrap()
    }

    fn leaf_identity_holds(t: &Tree) -> bool {
        let excess: i64 = t.internal_nodes().map(|v| t.child_count(v) as i64 - 1).sum();
        t.leaf_count() as i64 - 1 == excess
    }

    #[test]
    fn structure_of_cherry_over_cherry() {
        let t = cherry_over_cherry();
        assert_eq!(t.leaf_count(), 3);
        assert_eq!(t.children(0).collect::<Vec<_>>(), vec![1, 4]);
        assert_eq!(t.children(1).collect::<Vec<_>>(), vec![2, 3]);
        assert_eq!(t.parent(3), Some(1));
        assert_eq!(t.parent(0), None);
        assert_eq!(t.subtree_end(1), 4);
        assert_eq!(t.strict_ancestors(2).collect::<Vec<_>>(), vec![1, 0]);
        assert_eq!(t.height(), 2);
        assert!(t.is_gw_valid());
        assert!(leaf_identity_holds(&t));
    }

    #[test]
    fn rejects_malformed_counts() {
        assert!(Tree::from_child_counts(vec![]).is_err());
        assert!(Tree::from_child_counts(vec![2, 0]).is_err());
        assert!(Tree::from_child_counts(vec![0, 0]).is_err());
    }

    #[test]
    fn unary_node_is_not_gw_valid() {
        let t = Tree::from_child_counts(vec![1, 0]).unwrap();
        assert!(!t.is_gw_valid());
    }

    #[test]
    fn graft_identity_on_single_root() {
        let t = cherry_over_cherry();
        assert_eq!(Tree::single_root().graft(0, &t).unwrap(), t);
    }

    #[test]
    fn graft_cherry_on_cherry() {
        let g = Tree::cherry().graft(1, &Tree::cherry()).unwrap();
        assert_eq!(g.leaf_count(), 3);
        assert_eq!(g.internal_nodes().count(), 2);
        assert_eq!(g, cherry_over_cherry());
    }

    #[test]
    fn graft_requires_leaf() {
        assert!(Tree::cherry().graft(0, &Tree::cherry()).is_err());
    }

    #[test]
    fn truncation_examples() {
        let t = cherry_over_cherry();
        assert_eq!(t.truncate(0), Tree::single_root());
        assert_eq!(t.truncate(t.height()), t);
        // three-level complete binary tree truncated at depth one
        let binary3 = Tree::from_child_counts(vec![2, 2, 2, 0, 0, 2, 0, 0, 2, 2, 0, 0, 2, 0, 0]).unwrap();
        assert_eq!(binary3.height(), 3);
        assert_eq!(binary3.truncate(1), Tree::cherry());
    }

    #[test]
    fn labels_are_validated() {
        let t = Tree::cherry();
        assert!(t.with_leaf_labels(&[1, 1]).is_err());
        assert!(t.with_leaf_labels(&[1, 3]).is_err());
        assert!(t.with_leaf_labels(&[1]).is_err());
        let l = t.with_leaf_labels(&[2, 1]).unwrap();
        assert_eq!(l.label(1), Some(2));
        assert_eq!(l.label(0), None);
        assert_eq!(l.leaf_labels(), Some(vec![2, 1]));
    }

    #[test]
    fn json_layout() {
        let t = cherry_over_cherry().with_dfs_labels();
        assert_eq!(t.to_json_string(), r#"{"children":[{"children":[{"label":1},{"label":2}]},{"label":3}]}"#);
        assert_eq!(Tree::cherry().to_json_string(), r#"{"children":[{"label":null},{"label":null}]}"#);
        assert!(Tree::from_json(&json!({"children": []})).is_err());
        assert!(Tree::from_json(&json!({"children": [{"label": 1}, {"label": null}]})).is_err());
    }

    fn arb_tree() -> impl Strategy<Value = Tree> {
        // Random GW-valid shape grown by repeatedly replacing a leaf with a star.
        prop::collection::vec((any::<prop::sample::Index>(), 2u32..5), 0..12).prop_map(|steps| {
            let mut t = Tree::single_root();
            for (idx, k) in steps {
                let leaves: Vec<NodeId> = t.leaves().collect();
                let u = leaves[idx.index(leaves.len())];
                t = t.graft(u, &Tree::star(k)).unwrap();
            }
            t
        })
    }

    proptest! {
        #[test]
        fn leaf_node_identity(t in arb_tree()) {
            prop_assert!(leaf_identity_holds(&t));
            prop_assert!(t.is_gw_valid());
        }

        #[test]
        fn graft_adds_leaf_counts(t1 in arb_tree(), t2 in arb_tree(), idx in any::<prop::sample::Index>()) {
            let leaves: Vec<NodeId> = t1.leaves().collect();
            let u = leaves[idx.index(leaves.len())];
            let g = t1.graft(u, &t2).unwrap();
            // recount from the raw child-count sequence
            let recount = g.child_counts().iter().filter(|&&k| k == 0).count();
            prop_assert_eq!(recount, t1.leaf_count() + t2.leaf_count() - 1);
        }

        #[test]
        fn truncate_is_idempotent(t in arb_tree(), h in 0usize..6) {
            let once = t.truncate(h);
            prop_assert_eq!(once.truncate(h), once.clone());
            prop_assert!(once.height() <= h);
        }

        #[test]
        fn json_round_trip(t in arb_tree()) {
            let labeled = t.with_dfs_labels();
            prop_assert_eq!(Tree::from_json(&labeled.to_json()).unwrap(), labeled);
            prop_assert_eq!(Tree::from_json(&t.to_json()).unwrap(), t);
        }
    }
}
