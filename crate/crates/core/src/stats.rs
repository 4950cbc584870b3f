//! Seeded, replicate-parallel Monte Carlo experiments and chi-square tests.
//!
//! Replicate `i` of an experiment always draws from `stream(seed, i)` and
//! results are reduced in index order, so the output depends only on the
//! seed and the experiment, never on the worker count.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::beta::BetaCoalescent;
use crate::error::{ensure, invalid, Error, Result};
use crate::offspring::Alpha;
use crate::oracle::DistTable;
use crate::pruning::prune_chain_stats;
use crate::rng::{stream, SimRng};
use crate::sampler::ConditionedSampler;
use crate::specfn::{b_pmf, b_pmf_tail};
use crate::trace::ChainStats;

/// Significance level of every chi-square decision.
pub const CHI_SQUARE_LEVEL: f64 = 0.999;
/// Cells with a smaller expected count are pooled.
pub const MIN_EXPECTED_COUNT: f64 = 10.0;
/// Normal quantile for the 99% confidence radius.
pub const Z99: f64 = 2.576;
/// Largest `n` the pruning engine accepts (exact conditioned tree sampler).
pub const MAX_PRUNE_LEAVES: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    /// Pruning chain on a tree conditioned to have `n` leaves.
    Prune,
    /// Jump chain of the coalescent.
    Beta,
}

impl FromStr for Engine {
    type Err = Error;
    fn from_str(s: &str) -> Result<Engine> {
        match s {
            "prune" => Ok(Engine::Prune),
            "beta" => Ok(Engine::Beta),
            other => Err(invalid!("unknown engine `{other}` (expected prune or beta)")),
        }
    }
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Engine::Prune => "prune",
            Engine::Beta => "beta",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    FirstEventSize,
    ZScaledMoments,
    BHistogram,
    RPowerB,
    LargestBlockFraction,
    TwoSampleTraces,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::FirstEventSize,
        ExperimentKind::ZScaledMoments,
        ExperimentKind::BHistogram,
        ExperimentKind::RPowerB,
        ExperimentKind::LargestBlockFraction,
        ExperimentKind::TwoSampleTraces,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::FirstEventSize => "first-event-size",
            ExperimentKind::ZScaledMoments => "z-scaled-moments",
            ExperimentKind::BHistogram => "b-histogram",
            ExperimentKind::RPowerB => "r-power-B",
            ExperimentKind::LargestBlockFraction => "largest-block-fraction",
            ExperimentKind::TwoSampleTraces => "two-sample-traces",
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<ExperimentKind> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| invalid!("unknown experiment descriptor `{s}`"))
    }
}

/// What to simulate. `r` is used by `r-power-B`, `max_moment` by
/// `z-scaled-moments`; the engine is ignored by `two-sample-traces`, which
/// always runs both.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Experiment {
    pub kind: ExperimentKind,
    pub alpha: f64,
    pub n: usize,
    pub engine: Engine,
    pub r: f64,
    pub max_moment: u32,
}

impl Experiment {
    pub fn new(kind: ExperimentKind, alpha: f64, n: usize, engine: Engine) -> Experiment {
        Experiment { kind, alpha, n, engine, r: 0.5, max_moment: 2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub seed: u64,
    pub reps: u64,
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Estimate {
    pub name: String,
    pub mean: f64,
    pub variance: f64,
    /// `2.576 √(variance / replicates)`.
    pub ci99: f64,
}

impl Estimate {
    /// Mean and unbiased sample variance, summed in slice order.
    pub fn from_samples(name: impl Into<String>, xs: &[f64]) -> Estimate {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let variance =
            if xs.len() > 1 { xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0) } else { 0.0 };
        Estimate { name: name.into(), mean, variance, ci99: Z99 * (variance / n).sqrt() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McSummary {
    pub experiment: Experiment,
    pub replicates: u64,
    pub seed: u64,
    /// Not serialized: outputs must not depend on it.
    #[serde(skip)]
    pub workers: usize,
    pub estimates: Vec<Estimate>,
}

/// Counts of an integer statistic.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub experiment: Experiment,
    pub replicates: u64,
    pub seed: u64,
    #[serde(skip)]
    pub workers: usize,
    pub counts: BTreeMap<u64, u64>,
}

impl Histogram {
    pub fn frequency(&self, m: u64) -> f64 {
        self.counts.get(&m).copied().unwrap_or(0) as f64 / self.replicates as f64
    }

    pub fn observed(&self) -> BTreeMap<String, u64> {
        self.counts.iter().map(|(k, &c)| (k.to_string(), c)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub critical: f64,
    pub accept: bool,
}

/// Two-sample comparison of the pruning chain against the coalescent.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwoSampleReport {
    pub experiment: Experiment,
    pub replicates: u64,
    pub seed: u64,
    #[serde(skip)]
    pub workers: usize,
    pub first_event_size: ChiSquare,
    pub z: ChiSquare,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Outcome {
    Summary(McSummary),
    Histogram(Histogram),
    TwoSample(TwoSampleReport),
}

/// A ready-to-run chain engine for a fixed `(α, n)`.
#[derive(Debug, Clone)]
pub enum ChainEngine {
    Prune(ConditionedSampler),
    Beta(BetaCoalescent),
}

impl ChainEngine {
    pub fn new(engine: Engine, alpha: f64, n: usize) -> Result<ChainEngine> {
        ensure!(n >= 1, "need at least one leaf");
        match engine {
            Engine::Prune => {
                let alpha = Alpha::for_simulation(alpha)?;
                ensure!(
                    n <= MAX_PRUNE_LEAVES,
                    "the pruning engine supports n <= {MAX_PRUNE_LEAVES}; use the beta engine"
                );
                Ok(ChainEngine::Prune(ConditionedSampler::new(alpha, n)?))
            }
            Engine::Beta => Ok(ChainEngine::Beta(BetaCoalescent::new(Alpha::new(alpha)?, n))),
        }
    }

    pub fn run(&self, n: usize, rng: &mut SimRng) -> Result<ChainStats> {
        match self {
            ChainEngine::Prune(sampler) => {
                let tree = sampler.sample(n, rng)?.with_dfs_labels();
                prune_chain_stats(&tree, rng)
            }
            ChainEngine::Beta(c) => Ok(c.stats(n, rng)),
        }
    }
}

/// Runs `f(i)` for every replicate on a pool of `workers` threads and
/// returns the results in index order.
pub fn replicate<T, F>(reps: u64, workers: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync,
{
    ensure!(workers >= 1, "need at least one worker");
    let pool =
        rayon::ThreadPoolBuilder::new().num_threads(workers).build().map_err(|e| invalid!("thread pool: {e}"))?;
    pool.install(|| (0..reps).into_par_iter().map(&f).collect())
}

/// Chain statistics of `opts.reps` independent runs, in replicate order.
pub fn simulate(engine: Engine, alpha: f64, n: usize, opts: RunOptions) -> Result<Vec<ChainStats>> {
    let engine = ChainEngine::new(engine, alpha, n)?;
    replicate(opts.reps, opts.workers, |i| engine.run(n, &mut stream(opts.seed, i)))
}

/// Counts of each value.
pub fn histogram(xs: impl Iterator<Item = u64>) -> BTreeMap<u64, u64> {
    let mut counts = BTreeMap::new();
    for x in xs {
        *counts.entry(x).or_insert(0) += 1;
    }
    counts
}

pub fn run_experiment(spec: &Experiment, opts: RunOptions) -> Result<Outcome> {
    ensure!(opts.reps >= 1, "need at least one replicate");
    ensure!(spec.n >= 1, "need at least one leaf");
    let n = spec.n;
    if spec.kind == ExperimentKind::TwoSampleTraces {
        ensure!(n >= 2, "two-sample comparison needs n >= 2");
        let prune = ChainEngine::new(Engine::Prune, spec.alpha, n)?;
        let beta = ChainEngine::new(Engine::Beta, spec.alpha, n)?;
        let a = replicate(opts.reps, opts.workers, |i| prune.run(n, &mut stream(opts.seed, i)))?;
        let b = replicate(opts.reps, opts.workers, |i| beta.run(n, &mut stream(opts.seed, opts.reps + i)))?;
        let first = |s: &[ChainStats]| histogram(s.iter().map(|x| x.first_event_size as u64));
        let z = |s: &[ChainStats]| histogram(s.iter().map(|x| x.z as u64));
        return Ok(Outcome::TwoSample(TwoSampleReport {
            experiment: *spec,
            replicates: opts.reps,
            seed: opts.seed,
            workers: opts.workers,
            first_event_size: two_sample_chi_square(&first(&a), &first(&b))?,
            z: two_sample_chi_square(&z(&a), &z(&b))?,
        }));
    }
    if spec.kind == ExperimentKind::RPowerB {
        ensure!((0.0..=1.0).contains(&spec.r), "r = {} outside [0, 1]", spec.r);
    }
    let engine = ChainEngine::new(spec.engine, spec.alpha, n)?;
    let stats = replicate(opts.reps, opts.workers, |i| engine.run(n, &mut stream(opts.seed, i)))?;
    let hist = |counts| {
        Outcome::Histogram(Histogram {
            experiment: *spec,
            replicates: opts.reps,
            seed: opts.seed,
            workers: opts.workers,
            counts,
        })
    };
    let summary = |estimates| {
        Outcome::Summary(McSummary {
            experiment: *spec,
            replicates: opts.reps,
            seed: opts.seed,
            workers: opts.workers,
            estimates,
        })
    };
    Ok(match spec.kind {
        ExperimentKind::FirstEventSize => hist(histogram(stats.iter().map(|s| s.first_event_size as u64))),
        ExperimentKind::BHistogram => hist(histogram(stats.iter().map(|s| s.b as u64))),
        ExperimentKind::ZScaledMoments => {
            let scale = (n as f64).powf(spec.alpha - 1.0);
            let scaled: Vec<f64> = stats.iter().map(|s| s.z as f64 * scale).collect();
            summary(
                (1..=spec.max_moment.max(1))
                    .map(|j| {
                        let xs: Vec<f64> = scaled.iter().map(|x| x.powi(j as i32)).collect();
                        Estimate::from_samples(format!("moment_{j}"), &xs)
                    })
                    .collect(),
            )
        }
        ExperimentKind::RPowerB => {
            let xs: Vec<f64> = stats.iter().map(|s| spec.r.powi(s.b as i32)).collect();
            summary(vec![Estimate::from_samples("r_power_b", &xs)])
        }
        ExperimentKind::LargestBlockFraction => {
            let xs: Vec<f64> = stats.iter().map(|s| s.largest_block_fraction).collect();
            summary(vec![Estimate::from_samples("largest_block_fraction", &xs)])
        }
        ExperimentKind::TwoSampleTraces => unreachable!("handled above"),
    })
}

fn decide(statistic: f64, cells: usize) -> Result<ChiSquare> {
    ensure!(cells >= 2, "chi-square test needs at least two cells after pooling (dof = 0)");
    let dof = cells - 1;
    let critical =
        ChiSquared::new(dof as f64).map_err(|e| invalid!("chi-square law: {e}"))?.inverse_cdf(CHI_SQUARE_LEVEL);
    Ok(ChiSquare { statistic, dof, critical, accept: statistic <= critical })
}

/// Pearson goodness of fit of observed counts against `expected`. Cells with
/// expected count below [`MIN_EXPECTED_COUNT`] and observed keys missing from
/// `expected` are pooled into one cell.
pub fn chi_square_gof(observed: &BTreeMap<String, u64>, expected: &DistTable) -> Result<ChiSquare> {
    ensure!(!observed.is_empty() && !expected.is_empty(), "empty table");
    let total: u64 = observed.values().sum();
    ensure!(total > 0, "no observations");
    let nt = total as f64;
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut pool_obs, mut pool_exp) = (0.0, 0.0);
    for (k, p) in expected.iter() {
        let e = p * nt;
        let o = observed.get(k).copied().unwrap_or(0) as f64;
        if e >= MIN_EXPECTED_COUNT {
            cells.push((o, e));
        } else {
            pool_obs += o;
            pool_exp += e;
        }
    }
    for (k, &o) in observed {
        if !expected.contains(k) {
            pool_obs += o as f64;
        }
    }
    let mass: f64 = expected.total();
    pool_exp += (1.0 - mass).max(0.0) * nt;
    if pool_exp >= MIN_EXPECTED_COUNT || cells.is_empty() {
        cells.push((pool_obs, pool_exp));
    } else if pool_obs > 0.0 || pool_exp > 0.0 {
        let smallest = cells.iter_mut().min_by(|a, b| a.1.total_cmp(&b.1)).expect("cells is nonempty");
        smallest.0 += pool_obs;
        smallest.1 += pool_exp;
    }
    let statistic = cells
        .iter()
        .map(|&(o, e)| {
            if e > 0.0 {
                (o - e) * (o - e) / e
            } else if o > 0.0 {
                f64::INFINITY
            } else {
                0.0
            }
        })
        .sum();
    decide(statistic, cells.len())
}

/// Chi-square test of homogeneity between two samples of an integer
/// statistic. Categories whose expected count in either sample is below
/// [`MIN_EXPECTED_COUNT`] are pooled.
pub fn two_sample_chi_square(a: &BTreeMap<u64, u64>, b: &BTreeMap<u64, u64>) -> Result<ChiSquare> {
    let na: u64 = a.values().sum();
    let nb: u64 = b.values().sum();
    ensure!(na > 0 && nb > 0, "empty sample");
    let (fa, fb) = (na as f64 / (na + nb) as f64, nb as f64 / (na + nb) as f64);
    let keys: std::collections::BTreeSet<u64> = a.keys().chain(b.keys()).copied().collect();
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let mut pooled = (0.0, 0.0);
    for k in keys {
        let x = a.get(&k).copied().unwrap_or(0) as f64;
        let y = b.get(&k).copied().unwrap_or(0) as f64;
        if ((x + y) * fa.min(fb)) >= MIN_EXPECTED_COUNT {
            cells.push((x, y));
        } else {
            pooled.0 += x;
            pooled.1 += y;
        }
    }
    if (pooled.0 + pooled.1) * fa.min(fb) >= MIN_EXPECTED_COUNT || cells.is_empty() {
        cells.push(pooled);
    } else if pooled.0 + pooled.1 > 0.0 {
        let smallest = cells.iter_mut().min_by(|p, q| (p.0 + p.1).total_cmp(&(q.0 + q.1))).expect("cells is nonempty");
        smallest.0 += pooled.0;
        smallest.1 += pooled.1;
    }
    let statistic = cells
        .iter()
        .map(|&(x, y)| {
            let t = x + y;
            let (ex, ey) = (t * fa, t * fb);
            (x - ex) * (x - ex) / ex + (y - ey) * (y - ey) / ey
        })
        .sum();
    decide(statistic, cells.len())
}

/// Table of `P(B = m)` for `m = 1..=max_m`, plus `P(B > max_m)` under the key `">max_m"`.
pub fn b_pmf_table(alpha: f64, max_m: u64) -> Result<DistTable> {
    let mut table = DistTable::new(1e-6);
    for m in 1..=max_m {
        table.add(m.to_string(), b_pmf(alpha, m)?);
    }
    table.add(format!(">{max_m}"), b_pmf_tail(alpha, max_m)?);
    Ok(table)
}

/// Total variation between an empirical histogram of `B_n` and the limit law.
/// Since `B_n <= n`, the limit mass beyond `n` counts fully.
pub fn tv_to_b_pmf(hist: &Histogram, alpha: f64) -> Result<f64> {
    let max_m = hist.experiment.n as u64;
    let mut sum = 0.0;
    for m in 1..=max_m {
        sum += (hist.frequency(m) - b_pmf(alpha, m)?).abs();
    }
    sum += b_pmf_tail(alpha, max_m)?;
    Ok(0.5 * sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn opts(seed: u64, reps: u64, workers: usize) -> RunOptions {
        RunOptions { seed, reps, workers }
    }

    #[test]
    fn descriptor_names_round_trip() {
        for k in ExperimentKind::ALL {
            assert_eq!(k.name().parse::<ExperimentKind>().unwrap(), k);
        }
        assert!("z-moments".parse::<ExperimentKind>().is_err());
        assert!("kingman".parse::<Engine>().is_err());
    }

    #[test]
    fn estimate_formula() {
        let e = Estimate::from_samples("x", &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(e.mean, 2.5);
        assert!((e.variance - 5.0 / 3.0).abs() < 1e-15);
        assert!((e.ci99 - 2.576 * (5.0 / 12.0f64).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn results_do_not_depend_on_workers() {
        let spec = Experiment::new(ExperimentKind::BHistogram, 0.6, 30, Engine::Prune);
        let one = run_experiment(&spec, opts(5, 300, 1)).unwrap();
        let four = run_experiment(&spec, opts(5, 300, 4)).unwrap();
        assert_eq!(serde_json::to_string(&one).unwrap(), serde_json::to_string(&four).unwrap());
    }

    #[test]
    fn gof_accepts_own_law() {
        let mut expected = DistTable::new(1e-12);
        for (k, p) in [("a", 0.5), ("b", 0.3), ("c", 0.2)] {
            expected.add(k, p);
        }
        let mut rng = stream(1, 0);
        let mut observed = BTreeMap::new();
        for _ in 0..10_000 {
            let u: f64 = rng.gen();
            let k = if u < 0.5 {
                "a"
            } else if u < 0.8 {
                "b"
            } else {
                "c"
            };
            *observed.entry(k.to_string()).or_insert(0) += 1;
        }
        let r = chi_square_gof(&observed, &expected).unwrap();
        assert_eq!(r.dof, 2);
        assert!(r.accept, "{r:?}");
    }

    #[test]
    fn gof_single_cell_is_an_error() {
        let mut expected = DistTable::new(1e-12);
        expected.add("a", 1.0);
        let observed = BTreeMap::from([("a".to_string(), 100)]);
        assert!(chi_square_gof(&observed, &expected).is_err());
        assert!(chi_square_gof(&BTreeMap::new(), &expected).is_err());
    }

    #[test]
    fn two_sample_power() {
        let run = |a: f64, seed| {
            let spec = Experiment::new(ExperimentKind::FirstEventSize, a, 20, Engine::Beta);
            match run_experiment(&spec, opts(seed, 100_000, 1)).unwrap() {
                Outcome::Histogram(h) => h.counts,
                _ => unreachable!(),
            }
        };
        let x = run(0.5, 1);
        let y = run(0.9, 2);
        assert!(!two_sample_chi_square(&x, &y).unwrap().accept);
        let z = run(0.5, 3);
        assert!(two_sample_chi_square(&x, &z).unwrap().accept);
    }

    #[test]
    fn b_table_normalizes() {
        let t = b_pmf_table(0.5, 200).unwrap();
        assert!(t.is_normalized(), "{}", t.total());
    }
}
