//! Random generation of stable Galton-Watson trees and of the trees derived
//! from them: conditioned on the leaf count, pruned at a fixed time, Kesten's
//! size-biased tree (truncated, or pruned), and the tree seen just before the
//! last coalescence in the large-`n` limit.

use rand::Rng;

use crate::error::{ensure, Result};
use crate::numerics::ln_gamma;
use crate::offspring::{offspring_pmf, offspring_survival, Alpha};
use crate::rng::open_closed_unit;
use crate::tree::{NodeId, Tree};

/// Node cap used by the Kesten-derived samplers unless overridden.
pub const DEFAULT_NODE_CAP: usize = 10_000_000;

const TABLE_LEN: usize = 2048;

/// Either a finished sample or the signal that a size cap was exceeded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Sampled<T> {
    Done(T),
    Overflow,
}

impl<T> Sampled<T> {
    pub fn done(self) -> Option<T> {
        match self {
            Sampled::Done(t) => Some(t),
            Sampled::Overflow => None,
        }
    }

    pub fn is_overflow(&self) -> bool {
        matches!(self, Sampled::Overflow)
    }

    pub fn map<U>(self, f: impl FnOnce(T) -> U) -> Sampled<U> {
        match self {
            Sampled::Done(t) => Sampled::Done(f(t)),
            Sampled::Overflow => Sampled::Overflow,
        }
    }
}

/// A law on the non-negative integers that can be drawn from, possibly
/// truncated: draws larger than `cap` may be reported as `cap + 1`.
pub trait OffspringLaw {
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R, cap: u64) -> u64;
}

#[derive(Debug, Clone, Copy)]
enum TailKind {
    /// `ν_g`
    Plain,
    /// `ν*_g(k) = k ν_g(k)`
    SizeBiased,
}

/// Inverse-survival sampler: tabulated survival function for small `k`,
/// closed-form survival with bisection beyond the table.
#[derive(Debug, Clone)]
pub struct SurvivalTable {
    alpha: Alpha,
    kind: TailKind,
    /// `survival[k] = P(X > k)`
    survival: Vec<f64>,
}

impl SurvivalTable {
    pub fn offspring(alpha: Alpha) -> SurvivalTable {
        let g = alpha.gamma();
        let mut survival = Vec::with_capacity(TABLE_LEN);
        survival.push(1.0 - alpha.value());
        survival.push(1.0 - alpha.value());
        for k in 1..TABLE_LEN as u64 - 1 {
            let next = survival[k as usize] * (k as f64 + 1.0 - g) / (k as f64 + 1.0);
            survival.push(next.max(0.0));
        }
        SurvivalTable { alpha, kind: TailKind::Plain, survival }
    }

    pub fn size_biased(alpha: Alpha) -> SurvivalTable {
        let g = alpha.gamma();
        let mut survival = Vec::with_capacity(TABLE_LEN);
        survival.push(1.0);
        survival.push(1.0);
        for k in 1..TABLE_LEN as u64 - 1 {
            let next = survival[k as usize] * (k as f64 + 1.0 - g) / k as f64;
            survival.push(next.max(0.0));
        }
        SurvivalTable { alpha, kind: TailKind::SizeBiased, survival }
    }

    /// `P(X > k)`.
    pub fn survival(&self, k: u64) -> f64 {
        if (k as usize) < self.survival.len() {
            return self.survival[k as usize];
        }
        let g = self.alpha.gamma();
        if g >= 2.0 {
            return 0.0;
        }
        let kf = k as f64;
        match self.kind {
            TailKind::Plain => offspring_survival(self.alpha, k),
            TailKind::SizeBiased => (ln_gamma(kf + 1.0 - g) - ln_gamma(2.0 - g) - ln_gamma(kf)).exp(),
        }
    }

    pub fn pmf(&self, k: u64) -> f64 {
        let p = offspring_pmf(self.alpha, k);
        match self.kind {
            TailKind::Plain => p,
            TailKind::SizeBiased => k as f64 * p,
        }
    }
}

impl OffspringLaw for SurvivalTable {
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R, cap: u64) -> u64 {
        let u = open_closed_unit(rng);
        // X = min { k : P(X > k) < u }
        let idx = self.survival.partition_point(|&s| s >= u);
        if idx < self.survival.len() {
            return (idx as u64).min(cap + 1);
        }
        let mut lo = self.survival.len() as u64 - 1; // survival(lo) >= u
        if self.survival(cap) >= u {
            return cap + 1;
        }
        let mut hi = cap.max(lo + 1); // survival(hi) < u
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if self.survival(mid) >= u {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }
}

/// Sequential-search sampler for the pruned law `ν_θ`. Cheap to build, so a
/// fresh one can be made for every value of `θ`.
#[derive(Debug, Clone, Copy)]
pub struct PrunedOffspring {
    gamma: f64,
    rho: f64,
    extinction: f64,
    second: f64,
}

impl PrunedOffspring {
    pub fn new(alpha: Alpha, theta: f64) -> Result<PrunedOffspring> {
        ensure!(theta >= 0.0 && theta.is_finite(), "theta must be finite and non-negative, got {theta}");
        let a = alpha.value();
        let g = alpha.gamma();
        let rho = 1.0 / (1.0 + theta);
        let extinction = a * (1.0 + theta) * (1.0 - (theta / (1.0 + theta)).powf(g));
        let second = a * g * (g - 1.0) / 2.0 * rho;
        Ok(PrunedOffspring { gamma: g, rho, extinction, second })
    }
}

impl OffspringLaw for PrunedOffspring {
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R, cap: u64) -> u64 {
        let u: f64 = rng.gen();
        let mut cum = self.extinction;
        if u < cum {
            return 0;
        }
        let mut k = 2u64;
        let mut term = self.second;
        let mut last_positive = 0;
        loop {
            if k > cap {
                return cap + 1;
            }
            if term <= 0.0 {
                // Rounding left `u` above the accumulated mass.
                return last_positive;
            }
            last_positive = k;
            cum += term;
            if u < cum {
                return k;
            }
            term *= (k as f64 - self.gamma) / (k as f64 + 1.0) * self.rho;
            k += 1;
        }
    }
}

/// Generates a tree depth-first with i.i.d. child counts, giving up as soon as
/// the leaf count is certain to exceed `max_leaves`.
pub fn grow_tree<L: OffspringLaw, R: Rng + ?Sized>(law: &L, rng: &mut R, max_leaves: usize) -> Sampled<Vec<u32>> {
    let max = max_leaves as u64;
    let mut counts = Vec::new();
    let mut pending: u64 = 1;
    let mut leaves: u64 = 0;
    while pending > 0 {
        pending -= 1;
        // every pending node will contribute at least one leaf
        let k = law.draw(rng, max);
        if k == 0 {
            leaves += 1;
        }
        pending += k;
        if leaves + pending > max {
            return Sampled::Overflow;
        }
        counts.push(k as u32);
    }
    Sampled::Done(counts)
}

/// Like [`grow_tree`] but only counts leaves.
pub fn count_leaves<L: OffspringLaw, R: Rng + ?Sized>(law: &L, rng: &mut R, max_leaves: u64) -> Sampled<u64> {
    let mut pending: u64 = 1;
    let mut leaves: u64 = 0;
    while pending > 0 {
        pending -= 1;
        let k = law.draw(rng, max_leaves);
        if k == 0 {
            leaves += 1;
        }
        pending += k;
        if leaves + pending > max_leaves {
            return Sampled::Overflow;
        }
    }
    Sampled::Done(leaves)
}

/// Samplers for one value of `α`, holding the precomputed tables.
#[derive(Debug, Clone)]
pub struct GwSampler {
    alpha: Alpha,
    offspring: SurvivalTable,
    size_biased: SurvivalTable,
}

impl GwSampler {
    pub fn new(alpha: Alpha) -> Result<GwSampler> {
        ensure!(alpha.is_simulation_range(), "simulation requires alpha in [1/2, 1), got {alpha}");
        Ok(GwSampler {
            alpha,
            offspring: SurvivalTable::offspring(alpha),
            size_biased: SurvivalTable::size_biased(alpha),
        })
    }

    pub fn alpha(&self) -> Alpha {
        self.alpha
    }

    pub fn offspring_law(&self) -> &SurvivalTable {
        &self.offspring
    }

    pub fn size_biased_law(&self) -> &SurvivalTable {
        &self.size_biased
    }

    /// Unconditioned GW tree, or overflow once more than `max_leaves` leaves
    /// are certain.
    pub fn sample_gw<R: Rng + ?Sized>(&self, rng: &mut R, max_leaves: usize) -> Sampled<Tree> {
        grow_tree(&self.offspring, rng, max_leaves)
            .map(|c| Tree::from_child_counts(c).expect("generated counts form a tree"))
    }

    /// Exact draw from the law conditioned on `n` leaves, by rejection.
    pub fn sample_with_n_leaves<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Tree> {
        ensure!(n >= 1, "leaf count must be positive");
        loop {
            if let Sampled::Done(counts) = grow_tree(&self.offspring, rng, n) {
                if counts.iter().filter(|&&k| k == 0).count() == n {
                    return Tree::from_child_counts(counts);
                }
            }
        }
    }

    pub fn sample_pruned_gw<R: Rng + ?Sized>(
        &self,
        theta: f64,
        rng: &mut R,
        max_leaves: usize,
    ) -> Result<Sampled<Tree>> {
        if theta == 0.0 {
            return Ok(self.sample_gw(rng, max_leaves));
        }
        let law = PrunedOffspring::new(self.alpha, theta)?;
        Ok(grow_tree(&law, rng, max_leaves).map(|c| Tree::from_child_counts(c).expect("generated counts form a tree")))
    }

    /// Kesten's tree truncated at height `h`, with the spine `∅, V1, V1V2, ...`
    /// as node ids of the returned tree.
    pub fn sample_kesten_truncated<R: Rng + ?Sized>(
        &self,
        h: usize,
        rng: &mut R,
        node_cap: usize,
    ) -> Sampled<(Tree, Vec<NodeId>)> {
        // Breadth-first generation into child lists, then depth-first relayout.
        let mut children: Vec<Vec<usize>> = vec![Vec::new()];
        let mut level = vec![0usize];
        let mut spine = vec![0usize];
        for _depth in 0..h {
            let tip = *spine.last().expect("spine has a root");
            let mut next = Vec::new();
            let mut tip_children = 0;
            for &v in &level {
                let budget = node_cap.saturating_sub(children.len()) as u64;
                let k = if v == tip { self.size_biased.draw(rng, budget) } else { self.offspring.draw(rng, budget) };
                if children.len() as u64 + k > node_cap as u64 {
                    return Sampled::Overflow;
                }
                let first = children.len();
                for _ in 0..k {
                    children.push(Vec::new());
                }
                children[v] = (first..first + k as usize).collect();
                next.extend(first..first + k as usize);
                if v == tip {
                    tip_children = k as usize;
                }
            }
            let choice = rng.gen_range(0..tip_children);
            spine.push(children[tip][choice]);
            level = next;
        }
        // depth-first relayout
        let mut counts = Vec::with_capacity(children.len());
        let mut new_id = vec![0usize; children.len()];
        let mut stack = vec![0usize];
        while let Some(v) = stack.pop() {
            new_id[v] = counts.len();
            counts.push(children[v].len() as u32);
            stack.extend(children[v].iter().rev());
        }
        let tree = Tree::from_child_counts(counts).expect("relayout of a tree is a tree");
        Sampled::Done((tree, spine.into_iter().map(|v| new_id[v]).collect()))
    }

    /// Kesten's tree pruned at time `θ > 0`, built by walking the spine until
    /// its first marked node.
    pub fn sample_pruned_kesten<R: Rng + ?Sized>(
        &self,
        theta: f64,
        rng: &mut R,
        node_cap: usize,
    ) -> Result<Sampled<Tree>> {
        ensure!(theta > 0.0 && theta.is_finite(), "pruned Kesten tree needs theta > 0, got {theta}");
        let law = PrunedOffspring::new(self.alpha, theta)?;
        // (K, spine child position, subtrees in order except the spine slot)
        let mut levels: Vec<(u32, usize, Vec<Vec<u32>>)> = Vec::new();
        let mut nodes = 1usize;
        loop {
            let budget = node_cap.saturating_sub(nodes) as u64;
            let k = self.size_biased.draw(rng, budget);
            if k > budget {
                return Ok(Sampled::Overflow);
            }
            let keep = (1.0 + theta).powf(1.0 - k as f64);
            if rng.gen::<f64>() >= keep {
                break;
            }
            let spine_slot = rng.gen_range(0..k as usize);
            let mut subtrees = Vec::with_capacity(k as usize - 1);
            for _ in 0..k - 1 {
                let leaf_budget = node_cap.saturating_sub(nodes).div_ceil(2).max(1);
                match grow_tree(&law, rng, leaf_budget) {
                    Sampled::Done(c) => {
                        nodes += c.len();
                        subtrees.push(c);
                    }
                    Sampled::Overflow => return Ok(Sampled::Overflow),
                }
            }
            nodes += 1;
            if nodes > node_cap {
                return Ok(Sampled::Overflow);
            }
            levels.push((k as u32, spine_slot, subtrees));
        }
        let mut counts = Vec::with_capacity(nodes);
        for (k, slot, subtrees) in &levels {
            counts.push(*k);
            for s in &subtrees[..*slot] {
                counts.extend_from_slice(s);
            }
        }
        counts.push(0);
        for (_, slot, subtrees) in levels.iter().rev() {
            for s in &subtrees[*slot..] {
                counts.extend_from_slice(s);
            }
        }
        Ok(Sampled::Done(Tree::from_child_counts(counts).expect("spine assembly is a tree")))
    }

    /// Leaf count of the pruned Kesten tree, without building it.
    pub fn pruned_kesten_leaves<R: Rng + ?Sized>(
        &self,
        theta: f64,
        rng: &mut R,
        max_leaves: u64,
    ) -> Result<Sampled<u64>> {
        ensure!(theta > 0.0, "pruned Kesten tree needs theta > 0, got {theta}");
        let law = PrunedOffspring::new(self.alpha, theta)?;
        Ok(self.pruned_kesten_leaves_with(&law, theta, rng, max_leaves))
    }

    fn pruned_kesten_leaves_with<R: Rng + ?Sized>(
        &self,
        law: &PrunedOffspring,
        theta: f64,
        rng: &mut R,
        max_leaves: u64,
    ) -> Sampled<u64> {
        // the spine tip contributes the final leaf
        let mut leaves = 1u64;
        loop {
            let k = self.size_biased.draw(rng, max_leaves);
            if k > max_leaves {
                return Sampled::Overflow;
            }
            if rng.gen::<f64>() >= (1.0 + theta).powf(1.0 - k as f64) {
                return Sampled::Done(leaves);
            }
            for _ in 0..k - 1 {
                match count_leaves(law, rng, max_leaves - leaves) {
                    Sampled::Done(l) => leaves += l,
                    Sampled::Overflow => return Sampled::Overflow,
                }
                if leaves > max_leaves {
                    return Sampled::Overflow;
                }
            }
        }
    }

    /// One draw of the limit law of the number of blocks in the last
    /// coalescence event; overflow means the draw exceeds `max_leaves`.
    pub fn sample_limit_b<R: Rng + ?Sized>(&self, rng: &mut R, max_leaves: u64) -> Sampled<u64> {
        let k = self.size_biased.draw(rng, max_leaves);
        if k > max_leaves {
            return Sampled::Overflow;
        }
        // P(ξ >= θ) = (1+θ)^{1-k}
        let u = open_closed_unit(rng);
        let xi = (u.powf(-1.0 / (k as f64 - 1.0)) - 1.0).max(f64::MIN_POSITIVE);
        let law = PrunedOffspring::new(self.alpha, xi).expect("xi is positive and finite");
        let mut total = match self.pruned_kesten_leaves_with(&law, xi, rng, max_leaves) {
            Sampled::Done(l) => l,
            Sampled::Overflow => return Sampled::Overflow,
        };
        for _ in 0..k - 1 {
            if total >= max_leaves {
                return Sampled::Overflow;
            }
            match count_leaves(&law, rng, max_leaves - total) {
                Sampled::Done(l) => total += l,
                Sampled::Overflow => return Sampled::Overflow,
            }
        }
        Sampled::Done(total)
    }
}

/// Exact sampler for trees conditioned on their leaf count, driven by
/// convolution powers of the leaf-count law `q`.
///
/// With `C_k(m) = Σ_{m_1+..+m_k=m} ∏ q_{m_i}`, the root of a tree conditioned
/// on `m` leaves has `k` children with probability `ν(k) C_k(m) / q_m`, and the
/// leaf counts of its subtrees are split off one at a time with weights
/// `q_j C_{k-1}(m-j) / C_k(m)`. Building the tables costs `O(N^3)`.
#[derive(Debug, Clone)]
pub struct ConditionedSampler {
    max_leaves: usize,
    q: Vec<f64>,
    /// `conv[k][m]` for `1 <= k <= m <= max_leaves`, indexed from zero.
    conv: Vec<Vec<f64>>,
    /// `root_cdf[m]`: cumulative root-degree weights for `k = 2..=m`.
    root_cdf: Vec<Vec<f64>>,
}

impl ConditionedSampler {
    pub fn new(alpha: Alpha, max_leaves: usize) -> Result<ConditionedSampler> {
        ensure!(max_leaves >= 1, "leaf count must be positive");
        ensure!(max_leaves <= 2048, "convolution tables limited to 2048 leaves");
        let n = max_leaves;
        let mut q = vec![0.0; n + 1];
        for (m, slot) in q.iter_mut().enumerate().skip(1) {
            *slot = crate::offspring::leaf_count_pmf(alpha, m as u64)?;
        }
        let mut conv = vec![Vec::new(); n + 1];
        conv[1] = q.clone();
        for k in 2..=n {
            let mut row = vec![0.0; n + 1];
            let prev = &conv[k - 1];
            for (m, slot) in row.iter_mut().enumerate().skip(k) {
                let mut acc = 0.0;
                for j in 1..=m - k + 1 {
                    acc += q[j] * prev[m - j];
                }
                *slot = acc;
            }
            conv[k] = row;
        }
        let mut root_cdf = vec![Vec::new(); n + 1];
        for (m, cdf) in root_cdf.iter_mut().enumerate().skip(2) {
            let mut acc = 0.0;
            *cdf = (2..=m)
                .map(|k| {
                    acc += offspring_pmf(alpha, k as u64) * conv[k][m];
                    acc
                })
                .collect();
        }
        Ok(ConditionedSampler { max_leaves, q, conv, root_cdf })
    }

    pub fn max_leaves(&self) -> usize {
        self.max_leaves
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Tree> {
        ensure!((1..=self.max_leaves).contains(&n), "leaf count {n} outside 1..={}", self.max_leaves);
        let mut counts = Vec::with_capacity(2 * n);
        let mut stack = vec![n];
        let mut parts = Vec::new();
        while let Some(m) = stack.pop() {
            if m == 1 {
                counts.push(0);
                continue;
            }
            let cdf = &self.root_cdf[m];
            let total = *cdf.last().expect("m >= 2");
            let u = rng.gen::<f64>() * total;
            let idx = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
            let k = idx + 2;
            counts.push(k as u32);
            parts.clear();
            let mut left = m;
            for children_left in (2..=k).rev() {
                let denom = self.conv[children_left][left];
                let rest = &self.conv[children_left - 1];
                let u = rng.gen::<f64>() * denom;
                let top = left - children_left + 1;
                let mut acc = 0.0;
                let mut pick = top;
                for j in 1..=top {
                    acc += self.q[j] * rest[left - j];
                    if u < acc {
                        pick = j;
                        break;
                    }
                }
                parts.push(pick);
                left -= pick;
            }
            parts.push(left);
            stack.extend(parts.iter().rev());
        }
        Tree::from_child_counts(counts)
    }
}

/// Inverse transform for a mark: `P(ξ >= θ) = (1+θ)^{1-k}` gives
/// `ξ = u^{-1/(k-1)} - 1` for `u` uniform on `(0, 1]`.
pub fn mark_from_uniform(k: u32, u: f64) -> f64 {
    u.powf(-1.0 / (k as f64 - 1.0)) - 1.0
}

pub fn sample_gw<R: Rng + ?Sized>(alpha: Alpha, rng: &mut R, max_leaves: usize) -> Result<Sampled<Tree>> {
    Ok(GwSampler::new(alpha)?.sample_gw(rng, max_leaves))
}

pub fn sample_gw_with_n_leaves<R: Rng + ?Sized>(alpha: Alpha, n: usize, rng: &mut R) -> Result<Tree> {
    GwSampler::new(alpha)?.sample_with_n_leaves(n, rng)
}

pub fn sample_pruned_gw<R: Rng + ?Sized>(
    alpha: Alpha,
    theta: f64,
    rng: &mut R,
    max_leaves: usize,
) -> Result<Sampled<Tree>> {
    GwSampler::new(alpha)?.sample_pruned_gw(theta, rng, max_leaves)
}

pub fn sample_kesten_truncated<R: Rng + ?Sized>(
    alpha: Alpha,
    h: usize,
    rng: &mut R,
) -> Result<Sampled<(Tree, Vec<NodeId>)>> {
    Ok(GwSampler::new(alpha)?.sample_kesten_truncated(h, rng, DEFAULT_NODE_CAP))
}

pub fn sample_pruned_kesten<R: Rng + ?Sized>(alpha: Alpha, theta: f64, rng: &mut R) -> Result<Sampled<Tree>> {
    GwSampler::new(alpha)?.sample_pruned_kesten(theta, rng, DEFAULT_NODE_CAP)
}

pub fn sample_limit_b<R: Rng + ?Sized>(alpha: Alpha, rng: &mut R) -> Result<Sampled<u64>> {
    Ok(GwSampler::new(alpha)?.sample_limit_b(rng, DEFAULT_NODE_CAP as u64 / 2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn sampler(a: f64) -> GwSampler {
        GwSampler::new(Alpha::new(a).unwrap()).unwrap()
    }

    #[test]
    fn rejects_small_alpha() {
        assert!(GwSampler::new(Alpha::new(0.4).unwrap()).is_err());
    }

    #[test]
    fn survival_tables_match_closed_forms() {
        for a in [0.5, 0.6, 0.9] {
            let s = sampler(a);
            let table = s.offspring_law();
            for k in [0u64, 1, 2, 5, 100, 2046] {
                let closed = offspring_survival(s.alpha(), k);
                assert!((table.survival(k) - closed).abs() <= 1e-11 * closed + 1e-300, "a={a} k={k}");
            }
            // size-biased: S*(k) = 1 - Σ_{j<=k} j ν(j)
            let sb = s.size_biased_law();
            let mut cum = 0.0;
            for k in 0..3000u64 {
                cum += k as f64 * offspring_pmf(s.alpha(), k);
                assert!((sb.survival(k) - (1.0 - cum)).abs() < 1e-11, "a={a} k={k}");
            }
        }
    }

    #[test]
    fn draws_respect_cap() {
        let s = sampler(0.9);
        let mut rng = stream(5, 0);
        for _ in 0..10_000 {
            assert!(s.offspring_law().draw(&mut rng, 7) <= 8);
        }
    }

    #[test]
    fn half_alpha_is_binary() {
        let s = sampler(0.5);
        let mut rng = stream(11, 0);
        for _ in 0..2000 {
            if let Sampled::Done(t) = s.sample_gw(&mut rng, 50) {
                assert!(t.child_counts().iter().all(|&k| k == 0 || k == 2));
            }
        }
        let mut rng = stream(11, 1);
        for _ in 0..200 {
            let k = s.size_biased_law().draw(&mut rng, 100);
            assert_eq!(k, 2);
        }
    }

    #[test]
    fn conditioned_small_cases() {
        let s = sampler(0.7);
        let mut rng = stream(3, 0);
        assert_eq!(s.sample_with_n_leaves(1, &mut rng).unwrap(), Tree::single_root());
        let s = sampler(0.5);
        for _ in 0..20 {
            assert_eq!(s.sample_with_n_leaves(2, &mut rng).unwrap(), Tree::cherry());
        }
        for _ in 0..20 {
            let t = s.sample_with_n_leaves(9, &mut rng).unwrap();
            assert_eq!(t.leaf_count(), 9);
            assert!(t.is_gw_valid());
        }
    }

    #[test]
    fn overflow_is_reported() {
        let s = sampler(0.6);
        let mut rng = stream(9, 0);
        let overflows = (0..2000).filter(|_| s.sample_gw(&mut rng, 1).is_overflow()).count();
        // only the single root fits; it has probability α
        assert!(overflows > 600 && overflows < 1000, "{overflows}");
    }

    #[test]
    fn kesten_truncated_shapes() {
        let s = sampler(0.5);
        let mut rng = stream(4, 0);
        let (t, spine) = s.sample_kesten_truncated(0, &mut rng, 100).done().unwrap();
        assert_eq!(t, Tree::single_root());
        assert_eq!(spine, vec![0]);
        for _ in 0..50 {
            let (t, spine) = s.sample_kesten_truncated(6, &mut rng, 100_000).done().unwrap();
            assert_eq!(spine.len(), 7);
            assert!(t.height() == 6);
            for w in spine.windows(2) {
                assert_eq!(t.parent(w[1]), Some(w[0]));
                assert_eq!(t.child_count(w[0]), 2);
            }
            assert_eq!(t.depth(*spine.last().unwrap()), 6);
        }
    }

    #[test]
    fn pruned_kesten_is_finite_and_valid() {
        let s = sampler(0.7);
        let mut rng = stream(8, 0);
        for _ in 0..500 {
            let t = s.sample_pruned_kesten(0.5, &mut rng, DEFAULT_NODE_CAP).unwrap().done().unwrap();
            assert!(t.is_gw_valid());
        }
        assert!(s.sample_pruned_kesten(0.0, &mut rng, 10).is_err());
    }

    #[test]
    fn limit_b_at_least_two() {
        let s = sampler(0.6);
        let mut rng = stream(2, 0);
        for _ in 0..2000 {
            if let Sampled::Done(b) = s.sample_limit_b(&mut rng, 100_000) {
                assert!(b >= 2);
            }
        }
    }

    #[test]
    fn mark_inverse_transform() {
        assert_eq!(mark_from_uniform(2, 1.0), 0.0);
        assert!((mark_from_uniform(2, 0.25) - 3.0).abs() < 1e-15);
        assert!((mark_from_uniform(3, 0.25) - 1.0).abs() < 1e-15);
    }
}
