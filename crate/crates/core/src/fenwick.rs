//! Binary indexed tree over non-negative integer weights, used to pick an
//! index with probability proportional to its weight.

#[derive(Debug, Clone)]
pub struct Fenwick {
    tree: Vec<u64>,
    weights: Vec<u64>,
    total: u64,
    top_bit: usize,
}

impl Fenwick {
    pub fn new(weights: Vec<u64>) -> Fenwick {
        let n = weights.len();
        let mut tree = vec![0u64; n + 1];
        for (i, &w) in weights.iter().enumerate() {
            tree[i + 1] += w;
            let parent = (i + 1) + ((i + 1) & (i + 1).wrapping_neg());
            if parent <= n {
                tree[parent] += tree[i + 1];
            }
        }
        let total = weights.iter().sum();
        let top_bit = if n == 0 { 0 } else { 1 << (usize::BITS - 1 - n.leading_zeros()) };
        Fenwick { tree, weights, total, top_bit }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn weight(&self, i: usize) -> u64 {
        self.weights[i]
    }

    pub fn set(&mut self, i: usize, w: u64) {
        let old = self.weights[i];
        if old == w {
            return;
        }
        self.weights[i] = w;
        self.total = self.total - old + w;
        let mut j = i + 1;
        while j < self.tree.len() {
            self.tree[j] = self.tree[j] - old + w;
            j += j & j.wrapping_neg();
        }
    }

    /// Sum of weights `0..i`.
    pub fn prefix_sum(&self, i: usize) -> u64 {
        let mut j = i;
        let mut s = 0;
        while j > 0 {
            s += self.tree[j];
            j -= j & j.wrapping_neg();
        }
        s
    }

    /// The index `i` with `prefix_sum(i) <= target < prefix_sum(i + 1)`.
    /// Requires `target < total()`.
    pub fn find(&self, mut target: u64) -> usize {
        debug_assert!(target < self.total);
        let mut pos = 0;
        let mut step = self.top_bit;
        while step > 0 {
            let next = pos + step;
            if next < self.tree.len() && self.tree[next] <= target {
                target -= self.tree[next];
                pos = next;
            }
            step >>= 1;
        }
        pos
    }
}
