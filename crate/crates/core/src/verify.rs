//! Verification suites: each returns a table of checks with the measured
//! value, the reference, the deviation and the tolerance it was held to.

use serde::Serialize;

use crate::beta::{merge_ratio, RateTable};
use crate::error::Result;
use crate::numerics::ln_choose;
use crate::offspring::{mean_root_excess, Alpha};
use crate::oracle::{
    enumerate_trees, enumerated_mean_root_excess, exact_beta_chain_law, exact_post_first_event_tree_law,
    exact_prune_chain_law, first_event_marginal, merge_ratio_first_event_law, tree_law, tv_distance,
};
use crate::specfn::{b_pmf, phi_alpha, phi_subordinator, z_moment, z_moment_via_subordinator, Mode};
use crate::stats::{run_experiment, tv_to_b_pmf, Engine, Experiment, ExperimentKind, Outcome, RunOptions};

pub const THEOREM_ALPHAS: [f64; 5] = [0.5, 0.6, 2.0 / 3.0, 0.8, 0.9];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRow {
    pub check: String,
    pub alpha: f64,
    pub n: u64,
    pub value: f64,
    pub reference: f64,
    pub deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl CheckRow {
    /// A row that passes when `|value - reference| <= tolerance`.
    pub fn close(check: impl Into<String>, alpha: f64, n: u64, value: f64, reference: f64, tolerance: f64) -> CheckRow {
        let deviation = (value - reference).abs();
        CheckRow { check: check.into(), alpha, n, value, reference, deviation, tolerance, pass: deviation <= tolerance }
    }

    /// A row that passes when `|value/reference - 1| <= tolerance`.
    pub fn relative(
        check: impl Into<String>,
        alpha: f64,
        n: u64,
        value: f64,
        reference: f64,
        tolerance: f64,
    ) -> CheckRow {
        let deviation = ((value - reference) / reference).abs();
        CheckRow { check: check.into(), alpha, n, value, reference, deviation, tolerance, pass: deviation <= tolerance }
    }

    /// A row that passes when `value < bound`.
    pub fn below(check: impl Into<String>, alpha: f64, n: u64, value: f64, bound: f64) -> CheckRow {
        CheckRow {
            check: check.into(),
            alpha,
            n,
            value,
            reference: bound,
            deviation: value,
            tolerance: bound,
            pass: value < bound,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub suite: String,
    /// Present for suites that simulate.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub rows: Vec<CheckRow>,
}

impl Report {
    fn new(suite: &str, seed: Option<u64>) -> Report {
        Report { suite: suite.to_string(), seed, rows: Vec::new() }
    }

    pub fn passed(&self) -> bool {
        !self.rows.is_empty() && self.rows.iter().all(|r| r.pass)
    }

    pub fn max_deviation(&self) -> f64 {
        self.rows.iter().map(|r| r.deviation).fold(0.0, f64::max)
    }
}

fn alphas_or(given: &[f64], default: &[f64]) -> Vec<f64> {
    if given.is_empty() {
        default.to_vec()
    } else {
        given.to_vec()
    }
}

/// Exact equality in law of the two chains for `2 <= n <= nmax`.
pub fn theorem1(alphas: &[f64], nmax: usize) -> Result<Report> {
    let mut report = Report::new("theorem1", None);
    for a in alphas_or(alphas, &THEOREM_ALPHAS) {
        let alpha = Alpha::new(a)?;
        for n in 2..=nmax {
            let tv = tv_distance(&exact_prune_chain_law(alpha, n)?, &exact_beta_chain_law(alpha, n)?);
            report.rows.push(CheckRow::below("trajectory_tv", a, n as u64, tv, 1e-10));
        }
    }
    Ok(report)
}

/// Merge-ratio examples, normalization of the event-size law and the exact
/// first-event marginal of the pruning chain.
pub fn rates(alphas: &[f64], nmax: usize) -> Result<Report> {
    let mut report = Report::new("rates", None);
    let half = Alpha::new(0.5)?;
    for (n, k, expected) in [(3, 2, 1.0 / 6.0), (3, 3, 0.5), (4, 2, 1.0 / 15.0), (4, 3, 1.0 / 15.0), (4, 4, 1.0 / 3.0)]
    {
        report.rows.push(CheckRow::close(
            format!("merge_ratio_k{k}"),
            0.5,
            n,
            merge_ratio(half, n, k)?,
            expected,
            1e-12,
        ));
    }
    for a in alphas_or(alphas, &[0.5, 0.7, 0.9]) {
        let alpha = Alpha::new(a)?;
        let mut worst: f64 = 0.0;
        for b in 2..=200u64 {
            let s: f64 = (2..=b).map(|k| ln_choose(b, k).exp() * merge_ratio(alpha, b, k).unwrap_or(0.0)).sum();
            worst = worst.max((s - 1.0).abs());
            let table = RateTable::new(alpha, b)?;
            worst = worst.max((table.normalization() - 1.0).abs());
        }
        report.rows.push(CheckRow::close("event_size_sum_n_le_200", a, 200, 1.0 + worst, 1.0, 1e-12));
        for n in 2..=nmax {
            let law = first_event_marginal(&exact_prune_chain_law(alpha, n)?);
            let tv = tv_distance(&law, &merge_ratio_first_event_law(alpha, n)?);
            report.rows.push(CheckRow::below("first_event_marginal_tv", a, n as u64, tv, 1e-12));
        }
    }
    Ok(report)
}

/// Tree-law normalization and the law of the tree after the first cut.
pub fn pk(alphas: &[f64], nmax: usize) -> Result<Report> {
    let mut report = Report::new("pk", None);
    for a in alphas_or(alphas, &[0.5, 2.0 / 3.0, 0.9]) {
        let alpha = Alpha::new(a)?;
        for n in 1..=7 {
            let total: f64 = enumerate_trees(alpha, n)?.iter().map(|x| x.1).sum();
            report.rows.push(CheckRow::close("tree_law_total", a, n as u64, total, 1.0, 1e-12));
        }
        for n in 3..=nmax.min(6) {
            for k in 2..n {
                let tv = tv_distance(&exact_post_first_event_tree_law(alpha, n, k)?, &tree_law(alpha, k)?);
                report.rows.push(CheckRow::below(format!("post_cut_law_tv_k{k}"), a, n as u64, tv, 1e-12));
            }
        }
    }
    Ok(report)
}

/// Mean root excess: closed form against enumeration.
pub fn k0(alphas: &[f64], nmax: usize) -> Result<Report> {
    let mut report = Report::new("k0", None);
    for a in alphas_or(alphas, &[0.5, 2.0 / 3.0, 0.9]) {
        let alpha = Alpha::new(a)?;
        for n in 2..=nmax.min(8) {
            report.rows.push(CheckRow::close(
                "mean_root_excess",
                a,
                n as u64,
                mean_root_excess(alpha, n as u64)?,
                enumerated_mean_root_excess(alpha, n)?,
                1e-12,
            ));
        }
    }
    let third = Alpha::new(2.0 / 3.0)?;
    report.rows.push(CheckRow::close("mean_root_excess_e3", 2.0 / 3.0, 3, mean_root_excess(third, 3)?, 1.25, 1e-12));
    Ok(report)
}

/// Closed forms against quadratures and known values.
pub fn specfn() -> Result<Report> {
    let mut report = Report::new("specfn", None);
    for a in [0.5, 0.6, 0.7, 0.8, 0.9] {
        let alpha = Alpha::new(a)?;
        for l in [0.25, 0.5, 1.0, 2.0, 5.0, 10.0] {
            let c = phi_subordinator(alpha, l, Mode::Closed)?;
            let q = phi_subordinator(alpha, l, Mode::Quadrature)?;
            report.rows.push(CheckRow::relative(format!("phi_subordinator_l{l}"), a, 0, q, c, 1e-8));
        }
        for j in 1..=10u32 {
            let direct = z_moment(alpha, j);
            let via = z_moment_via_subordinator(alpha, j, Mode::Closed)?;
            report.rows.push(CheckRow::relative(format!("z_moment_paths_j{j}"), a, 0, via, direct, 1e-12));
        }
    }
    let half = Alpha::new(0.5)?;
    report.rows.push(CheckRow::close(
        "z_moment_j1",
        0.5,
        0,
        z_moment(half, 1),
        std::f64::consts::PI.sqrt() / 2.0,
        1e-12,
    ));
    report.rows.push(CheckRow::close("z_moment_j2", 0.5, 0, z_moment(half, 2), 1.0, 1e-12));
    report.rows.push(CheckRow::close("b_pmf_m2", 0.5, 0, b_pmf(0.5, 2)?, 5.0 / 12.0, 1e-8));
    report.rows.push(CheckRow::close("b_pmf_m2", 0.0, 0, b_pmf(0.0, 2)?, 2f64.ln(), 1e-8));
    for a in [0.5, 0.7, 0.9] {
        report.rows.push(CheckRow::close("phi_alpha_at_1", a, 0, phi_alpha(a, 1.0)?, 1.0, 1e-6));
    }
    report.rows.push(CheckRow::close("phi_alpha_quadratic", -1.0, 0, phi_alpha(-1.0, 0.5)?, 0.25, 1e-6));
    Ok(report)
}

pub const BN_SIZES: [usize; 3] = [100, 400, 1600];
pub const ZN_SIZES: [usize; 3] = [256, 1024, 4096];

/// Total variation between simulated `B_n` and the limit law, decreasing in
/// `n` and below 0.05 at the largest `n`.
pub fn bn(alpha: f64, ns: &[usize], opts: RunOptions) -> Result<Report> {
    let mut report = Report::new("bn", Some(opts.seed));
    let mut previous = f64::INFINITY;
    for (i, &n) in ns.iter().enumerate() {
        let spec = Experiment::new(ExperimentKind::BHistogram, alpha, n, Engine::Beta);
        let Outcome::Histogram(hist) = run_experiment(&spec, opts)? else {
            unreachable!("b-histogram yields a histogram")
        };
        let tv = tv_to_b_pmf(&hist, alpha)?;
        let last = i + 1 == ns.len();
        let mut row =
            CheckRow::below(if last { "b_tv_final" } else { "b_tv_decreasing" }, alpha, n as u64, tv, previous);
        if last {
            row.pass = row.pass && tv < 0.05;
            row.tolerance = previous.min(0.05);
            row.reference = row.tolerance;
        }
        report.rows.push(row);
        previous = tv;
    }
    Ok(report)
}

/// Mean of `n^{α-1} Z_n` against `E[Z]`: within `[0.70, 1.10] E[Z]` at the
/// largest `n`, with the gap shrinking along `ns`.
pub fn zn(alpha: f64, ns: &[usize], opts: RunOptions) -> Result<Report> {
    let mut report = Report::new("zn", Some(opts.seed));
    let target = z_moment(Alpha::new(alpha)?, 1);
    let mut previous = f64::INFINITY;
    for (i, &n) in ns.iter().enumerate() {
        let mut spec = Experiment::new(ExperimentKind::ZScaledMoments, alpha, n, Engine::Beta);
        spec.max_moment = 1;
        let Outcome::Summary(summary) = run_experiment(&spec, opts)? else {
            unreachable!("z-scaled-moments yields a summary")
        };
        let mean = summary.estimates[0].mean;
        let gap = (mean - target).abs();
        let mut row = CheckRow {
            check: "z_mean_gap_decreasing".into(),
            alpha,
            n: n as u64,
            value: mean,
            reference: target,
            deviation: gap,
            tolerance: previous,
            pass: gap < previous,
        };
        if i + 1 == ns.len() {
            row.check = "z_mean_final".into();
            row.pass = row.pass && (0.70 * target..=1.10 * target).contains(&mean);
        }
        report.rows.push(row);
        previous = gap;
    }
    Ok(report)
}

/// Two-sample chi-square between the pruning chain and the coalescent on
/// first-event sizes and on `Z_n`.
pub fn two_sample(alphas: &[f64], n: usize, opts: RunOptions) -> Result<Report> {
    let mut report = Report::new("two-sample", Some(opts.seed));
    for a in alphas_or(alphas, &[0.5, 0.8]) {
        let spec = Experiment::new(ExperimentKind::TwoSampleTraces, a, n, Engine::Prune);
        let Outcome::TwoSample(r) = run_experiment(&spec, opts)? else {
            unreachable!("two-sample-traces yields a two-sample report")
        };
        for (name, chi) in [("first_event_chi2", r.first_event_size), ("z_chi2", r.z)] {
            let mut row = CheckRow::below(name, a, n as u64, chi.statistic, chi.critical);
            row.pass = chi.accept;
            report.rows.push(row);
        }
    }
    Ok(report)
}
