//! Rates and the embedded jump chain of the β(1+α, 1−α)-coalescent, whose
//! measure is `Λ(du) = (u/(1-u))^α du` on `(0, 1)`.
//!
//! With `b` blocks, any given `k` of them merge at rate
//! `λ_{b,k} = Γ(k+α-1) Γ(b-k-α+1) / Γ(b)`; the total rate is `λ_b`.

use rand::Rng;

use crate::error::{ensure, Result};
use crate::numerics::{integrate_unit, ln_choose, ln_gamma, log_sum_exp, Endpoints, QuadratureSpec};
use crate::offspring::Alpha;
use crate::partition::Partition;
use crate::trace::{merge_small_to_large, ChainStats, ChainTrace, TraceEvent};

/// Block counts up to this size get a precomputed event-size table.
pub const CACHED_BLOCK_COUNT: usize = 1024;

fn check_bk(b: u64, k: u64) -> Result<()> {
    ensure!(b >= 2, "need at least two blocks, got b = {b}");
    ensure!((2..=b).contains(&k), "event size k = {k} outside 2..={b}");
    Ok(())
}

fn ln_lambda_bk_unchecked(a: f64, b: u64, k: u64) -> f64 {
    ln_gamma(k as f64 + a - 1.0) + ln_gamma(b as f64 - k as f64 - a + 1.0) - ln_gamma(b as f64)
}

fn ln_lambda_b_unchecked(a: f64, b: u64) -> f64 {
    ((b - 1) as f64 * a / (1.0 - a)).ln() + ln_gamma(a) + ln_gamma(b as f64 - a) - ln_gamma(b as f64)
}

/// Log of the probability that the next event merges exactly `k` of `b` blocks.
fn ln_event_size_unchecked(a: f64, b: u64, k: u64) -> f64 {
    ln_choose(b, k) + ln_merge_ratio_unchecked(a, b, k)
}

fn ln_merge_ratio_unchecked(a: f64, n: u64, k: u64) -> f64 {
    (1.0 - a).ln() - ln_gamma(a + 1.0) + ln_gamma(k as f64 + a - 1.0) + ln_gamma(n as f64 - k as f64 - a + 1.0)
        - ln_gamma(n as f64 - a)
        - ((n - 1) as f64).ln()
}

/// Rate at which a given set of `k` blocks out of `b` merges.
pub fn lambda_bk(alpha: Alpha, b: u64, k: u64) -> Result<f64> {
    check_bk(b, k)?;
    Ok(ln_lambda_bk_unchecked(alpha.value(), b, k).exp())
}

/// `λ_{b,k}` by numerical integration of `u^{k-2} (1-u)^{b-k} Λ(du)`.
pub fn lambda_bk_quadrature(alpha: Alpha, b: u64, k: u64) -> Result<f64> {
    check_bk(b, k)?;
    let a = alpha.value();
    let (p, q) = (k as f64 - 2.0 + a, b as f64 - k as f64 - a);
    let spec = QuadratureSpec::default().with_endpoints(Endpoints::Algebraic { left: p, right: q });
    Ok(integrate_unit(|u, v| u.powf(p) * v.powf(q), &spec)?.value)
}

/// Total merger rate with `b` blocks.
pub fn lambda_b(alpha: Alpha, b: u64) -> Result<f64> {
    ensure!(b >= 2, "need at least two blocks, got b = {b}");
    Ok(ln_lambda_b_unchecked(alpha.value(), b).exp())
}

/// `λ_{n,k} / λ_n`: probability that a given set of `k` of the `n` blocks is
/// the one merging at the next event.
pub fn merge_ratio(alpha: Alpha, n: u64, k: u64) -> Result<f64> {
    check_bk(n, k)?;
    Ok(ln_merge_ratio_unchecked(alpha.value(), n, k).exp())
}

/// All rates for a fixed number of blocks, stored as logarithms.
#[derive(Debug, Clone, PartialEq)]
pub struct RateTable {
    alpha: Alpha,
    b: u64,
    ln_lambda_bk: Vec<f64>,
    ln_masses: Vec<f64>,
    ln_lambda_b: f64,
}

impl RateTable {
    pub fn new(alpha: Alpha, b: u64) -> Result<RateTable> {
        ensure!(b >= 2, "need at least two blocks, got b = {b}");
        let a = alpha.value();
        let ln_lambda_bk: Vec<f64> = (2..=b).map(|k| ln_lambda_bk_unchecked(a, b, k)).collect();
        let ln_masses = (2..=b).map(|k| ln_event_size_unchecked(a, b, k)).collect();
        Ok(RateTable { alpha, b, ln_lambda_bk, ln_masses, ln_lambda_b: ln_lambda_b_unchecked(a, b) })
    }

    pub fn alpha(&self) -> Alpha {
        self.alpha
    }

    pub fn block_count(&self) -> u64 {
        self.b
    }

    pub fn ln_lambda_bk(&self, k: u64) -> f64 {
        self.ln_lambda_bk[(k - 2) as usize]
    }

    pub fn lambda_bk(&self, k: u64) -> f64 {
        self.ln_lambda_bk(k).exp()
    }

    pub fn lambda_b(&self) -> f64 {
        self.ln_lambda_b.exp()
    }

    /// `C(b,k) λ_{b,k} / λ_b`, the law of the next event size.
    pub fn event_size_pmf(&self, k: u64) -> f64 {
        self.ln_masses[(k - 2) as usize].exp()
    }

    /// `Σ_k C(b,k) λ_{b,k}` divided by `λ_b`; equal to one up to rounding.
    pub fn normalization(&self) -> f64 {
        let terms: Vec<f64> =
            (2..=self.b).map(|k| ln_choose(self.b, k) + self.ln_lambda_bk(k) - self.ln_lambda_b).collect();
        log_sum_exp(&terms).exp()
    }
}

/// Event-size sampler for chains started from up to `n` blocks.
#[derive(Debug, Clone)]
pub struct BetaCoalescent {
    alpha: Alpha,
    /// `cdfs[b]` is the cumulative event-size law with `b` blocks, indexed by `k - 2`.
    cdfs: Vec<Vec<f64>>,
}

impl BetaCoalescent {
    pub fn new(alpha: Alpha, n: usize) -> BetaCoalescent {
        let a = alpha.value();
        let cached = n.min(CACHED_BLOCK_COUNT);
        let mut cdfs = vec![Vec::new(); cached + 1];
        for (b, cdf) in cdfs.iter_mut().enumerate().skip(2) {
            let b = b as u64;
            let ln_masses: Vec<f64> = (2..=b).map(|k| ln_event_size_unchecked(a, b, k)).collect();
            let ln_total = log_sum_exp(&ln_masses);
            let mut acc = 0.0;
            *cdf = ln_masses
                .iter()
                .map(|m| {
                    acc += (m - ln_total).exp();
                    acc
                })
                .collect();
        }
        BetaCoalescent { alpha, cdfs }
    }

    pub fn alpha(&self) -> Alpha {
        self.alpha
    }

    /// Number of blocks merged at the next event when `b` blocks remain.
    pub fn sample_event_size<R: Rng + ?Sized>(&self, b: usize, rng: &mut R) -> usize {
        debug_assert!(b >= 2);
        let u: f64 = rng.gen();
        if b < self.cdfs.len() {
            let cdf = &self.cdfs[b];
            return 2 + cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
        }
        let a = self.alpha.value();
        let bf = b as f64;
        let mut p = ln_event_size_unchecked(a, b as u64, 2).exp();
        let mut acc = p;
        let mut k = 2usize;
        while acc <= u && k < b {
            let kf = k as f64;
            p *= (bf - kf) / (kf + 1.0) * (kf + a - 1.0) / (bf - kf - a);
            acc += p;
            k += 1;
        }
        k
    }

    /// Moves `k` uniformly chosen entries of `live` to its end and returns them.
    fn pick<T, R: Rng + ?Sized>(live: &mut Vec<T>, k: usize, rng: &mut R) -> Vec<T> {
        let len = live.len();
        for i in 0..k {
            let j = rng.gen_range(0..len - i);
            live.swap(j, len - 1 - i);
        }
        live.split_off(len - k)
    }

    pub fn trace<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> ChainTrace {
        let initial = Partition::singletons(n);
        let mut live: Vec<Vec<u32>> = initial.blocks().to_vec();
        let mut events = Vec::new();
        while live.len() > 1 {
            let k = self.sample_event_size(live.len(), rng);
            let merged = Self::pick(&mut live, k, rng);
            let mut event_blocks = merged.clone();
            for b in &mut event_blocks {
                b.sort_unstable();
            }
            event_blocks.sort_unstable_by_key(|b| b[0]);
            live.push(merge_small_to_large(merged));
            events.push(TraceEvent {
                step: events.len() + 1,
                cut_node: -1,
                merged: event_blocks,
                partition: Partition::from_blocks_unchecked(live.clone()),
            });
        }
        ChainTrace { initial, events }
    }

    /// Runs the chain tracking block sizes only; consumes the same random
    /// draws as [`BetaCoalescent::trace`].
    pub fn stats<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> ChainStats {
        let mut live: Vec<u32> = vec![1; n];
        let mut stats = ChainStats { z: 0, b: 0, first_event_size: 0, largest_block_fraction: 1.0 };
        while live.len() > 1 {
            let k = self.sample_event_size(live.len(), rng);
            let merged = Self::pick(&mut live, k, rng);
            stats.z += 1;
            if stats.z == 1 {
                stats.first_event_size = k;
            }
            stats.b = k;
            let largest = *merged.iter().max().expect("k >= 2");
            stats.largest_block_fraction = f64::from(largest) / n as f64;
            live.push(merged.iter().sum());
        }
        stats
    }
}

/// The jump chain of the coalescent started from `n` singletons.
pub fn beta_chain<R: Rng + ?Sized>(alpha: Alpha, n: usize, rng: &mut R) -> ChainTrace {
    BetaCoalescent::new(alpha, n).trace(n, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use std::collections::HashMap;
    use std::f64::consts::PI;

    fn al(a: f64) -> Alpha {
        Alpha::new(a).unwrap()
    }

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs()
    }

    #[test]
    fn lambda_examples() {
        for a in [0.3, 0.5, 0.8] {
            let g = (ln_gamma(1.0 + a) + ln_gamma(1.0 - a)).exp();
            assert!(close(lambda_bk(al(a), 2, 2).unwrap(), g, 1e-13));
            assert!(close(lambda_b(al(a), 2).unwrap(), g, 1e-13));
        }
        assert!(close(lambda_bk(al(0.5), 3, 3).unwrap(), 3.0 * PI / 8.0, 1e-13));
        assert!(close(lambda_b(al(0.5), 3).unwrap(), 3.0 * PI / 4.0, 1e-13));
    }

    #[test]
    fn range_errors() {
        assert!(lambda_bk(al(0.5), 3, 1).is_err());
        assert!(lambda_bk(al(0.5), 3, 4).is_err());
        assert!(lambda_b(al(0.5), 1).is_err());
        assert!(merge_ratio(al(0.5), 1, 1).is_err());
        assert!(RateTable::new(al(0.5), 1).is_err());
    }

    #[test]
    fn quadrature_agrees() {
        assert!(close(lambda_bk_quadrature(al(0.7), 10, 4).unwrap(), lambda_bk(al(0.7), 10, 4).unwrap(), 1e-8));
        for a in [0.5, 0.7, 0.9] {
            for b in [2, 3, 7, 15] {
                for k in 2..=b {
                    let q = lambda_bk_quadrature(al(a), b, k).unwrap();
                    let c = lambda_bk(al(a), b, k).unwrap();
                    assert!(close(q, c, 1e-8), "a={a} b={b} k={k}: {q} vs {c}");
                }
            }
        }
    }

    #[test]
    fn merge_ratio_examples() {
        let r = |n, k| merge_ratio(al(0.5), n, k).unwrap();
        assert!(close(merge_ratio(al(0.8), 2, 2).unwrap(), 1.0, 1e-14));
        assert!(close(r(3, 2), 1.0 / 6.0, 1e-13));
        assert!(close(r(3, 3), 0.5, 1e-13));
        assert!(close(r(4, 2), 1.0 / 15.0, 1e-13));
        assert!(close(r(4, 3), 1.0 / 15.0, 1e-13));
        assert!(close(r(4, 4), 1.0 / 3.0, 1e-13));
    }

    #[test]
    fn merge_ratio_is_rate_ratio() {
        for a in [0.5, 0.7, 0.9] {
            for n in [2u64, 5, 30] {
                for k in 2..=n {
                    let direct = lambda_bk(al(a), n, k).unwrap() / lambda_b(al(a), n).unwrap();
                    assert!(close(merge_ratio(al(a), n, k).unwrap(), direct, 1e-12));
                }
            }
        }
    }

    #[test]
    fn rate_tables_normalize() {
        for a in [0.5, 0.7, 0.9] {
            for b in 2..=200 {
                let t = RateTable::new(al(a), b).unwrap();
                assert!((t.normalization() - 1.0).abs() < 1e-12, "a={a} b={b}");
                if b <= 60 {
                    let s: f64 = (2..=b).map(|k| (ln_choose(b, k)).exp() * t.lambda_bk(k)).sum();
                    assert!(close(s, t.lambda_b(), 1e-12));
                }
            }
        }
    }

    #[test]
    fn walk_and_table_agree() {
        // a sampler whose cache stops short of b exercises the ratio walk
        let full = BetaCoalescent::new(al(0.6), 40);
        let walk = BetaCoalescent { alpha: al(0.6), cdfs: vec![Vec::new(); 3] };
        for i in 0..2000 {
            let x = full.sample_event_size(40, &mut stream(2, i));
            let y = walk.sample_event_size(40, &mut stream(2, i));
            assert_eq!(x, y);
        }
    }

    #[test]
    fn two_leaves_single_event() {
        let t = beta_chain(al(0.5), 2, &mut stream(0, 0));
        assert_eq!(t.z(), 1);
        assert_eq!(t.events[0].merged, vec![vec![1], vec![2]]);
        assert_eq!(t.events[0].cut_node, -1);
        assert!(t.is_terminal());
    }

    #[test]
    fn first_event_at_three() {
        let reps = 100_000;
        let c = BetaCoalescent::new(al(0.5), 3);
        let triples = (0..reps).filter(|&i| c.stats(3, &mut stream(4, i)).first_event_size == 3).count();
        let p = triples as f64 / reps as f64;
        // binomial: 4 standard deviations
        assert!((p - 0.5).abs() < 4.0 * (0.25 / reps as f64).sqrt(), "{p}");
    }

    #[test]
    fn stats_match_trace() {
        let c = BetaCoalescent::new(al(0.7), 60);
        for i in 0..100 {
            let t = c.trace(60, &mut stream(9, i));
            let s = c.stats(60, &mut stream(9, i));
            assert_eq!(t.stats(), s);
            let mut sizes: Vec<usize> = t.final_partition().blocks().iter().map(Vec::len).collect();
            sizes.sort_unstable();
            assert_eq!(sizes, vec![60]);
        }
    }

    #[test]
    fn exchangeable_under_relabeling() {
        // the law of the block-size sequence must not depend on which labels
        // are compared; check pair events involving {1,2} vs {3,4} at n = 4
        let c = BetaCoalescent::new(al(0.7), 4);
        let reps = 60_000;
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for i in 0..reps {
            let t = c.trace(4, &mut stream(11, i));
            let first = t.events[0].partition.to_string();
            if first == "1,2|3|4" {
                *counts.entry("12").or_default() += 1;
            }
            if first == "1|2|3,4" {
                *counts.entry("34").or_default() += 1;
            }
        }
        let expected = merge_ratio(al(0.7), 4, 2).unwrap() * reps as f64;
        for key in ["12", "34"] {
            let got = counts[key] as f64;
            assert!((got - expected).abs() < 5.0 * expected.sqrt(), "{key}: {got} vs {expected}");
        }
    }
}
