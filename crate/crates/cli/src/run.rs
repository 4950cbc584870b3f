use serde_json::{json, Value};

use prunecoal::beta::{merge_ratio, BetaCoalescent};
use prunecoal::error::{Error, Result};
use prunecoal::numerics::ln_choose;
use prunecoal::offspring::Alpha;
use prunecoal::pruning::{prune_chain, prune_chain_by_marks};
use prunecoal::rng::{stream, SimRng};
use prunecoal::sampler::{ConditionedSampler, GwSampler, Sampled, DEFAULT_NODE_CAP};
use prunecoal::specfn::{b_pmf, b_pmf_tail, phi_alpha, phi_subordinator, z_moment, z_moment_via_subordinator, Mode};
use prunecoal::stats::{
    histogram, run_experiment, simulate, tv_to_b_pmf, Engine, Experiment, ExperimentKind, Outcome, RunOptions,
    MAX_PRUNE_LEAVES,
};
use prunecoal::trace::ChainTrace;
use prunecoal::tree::Tree;
use prunecoal::verify::{self, Report, BN_SIZES, ZN_SIZES};

use crate::output::{csv_header, field, num, Sink};
use crate::{Command, Common, DistKind, EngineArg, Format, SpecKind, Suite};

pub enum Status {
    Pass,
    Fail,
}

/// Rows of a `dist` table: value, count and a reference column.
type DistRows = Vec<(u64, u64, f64)>;
/// Rows of a `specfn` table: argument, closed form and numerical value.
type SpecRows = Vec<(f64, f64, f64)>;

pub const MAX_NODES_ENV: &str = "PRUNECOAL_MAX_NODES";

/// Node cap for the samplers, from the environment when set.
fn node_cap() -> Result<usize> {
    match std::env::var(MAX_NODES_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&c| c >= 1)
            .ok_or_else(|| Error::InvalidArgument(format!("{MAX_NODES_ENV}={v} is not a positive integer"))),
        Err(_) => Ok(DEFAULT_NODE_CAP),
    }
}

fn overflow(cap: usize) -> Error {
    Error::ResourceRefusal(format!("tree exceeded the cap of {cap} (set {MAX_NODES_ENV} to raise it)"))
}

pub fn dispatch(command: Command) -> Result<Status> {
    match command {
        Command::SampleTree { alpha, leaves, theta, kesten_height, common } => {
            sample_tree(alpha, leaves, theta, kesten_height, &common)
        }
        Command::Prune { alpha, leaves, trace, marks, common } => prune(alpha, leaves, trace, marks, &common),
        Command::Beta { alpha, n, trace, common } => beta(alpha, n, trace, &common),
        Command::Verify { suite, alpha, nmax, n, reps, common } => verify(suite, &alpha, nmax, &n, reps, &common),
        Command::Dist { statistic, alpha, n, reps, engine, common } => dist(statistic, alpha, n, reps, engine, &common),
        Command::Specfn { function, alpha, lambda, r, jmax, mmax, common } => {
            specfn(function, alpha, &lambda, &r, jmax, mmax, &common)
        }
    }
}

/// A tree with `n` leaves from the conditioned law.
fn conditioned_tree(alpha: Alpha, n: usize, rng: &mut SimRng) -> Result<Tree> {
    if n == 0 {
        return Err(Error::InvalidArgument("leaf count must be positive".into()));
    }
    if n <= MAX_PRUNE_LEAVES {
        ConditionedSampler::new(alpha, n)?.sample(n, rng)
    } else {
        let cap = node_cap()?;
        if n > cap {
            return Err(overflow(cap));
        }
        GwSampler::new(alpha)?.sample_with_n_leaves(n, rng)
    }
}

fn sample_tree(
    alpha: f64,
    leaves: Option<usize>,
    theta: Option<f64>,
    kesten_height: Option<usize>,
    common: &Common,
) -> Result<Status> {
    let alpha = Alpha::for_simulation(alpha)?;
    let mut rng = stream(common.seed, 0);
    let cap = node_cap()?;
    let sampler = GwSampler::new(alpha)?;
    let mut spine = None;
    let (kind, tree) = if let Some(n) = leaves {
        ("conditioned", conditioned_tree(alpha, n, &mut rng)?)
    } else if let Some(h) = kesten_height {
        match sampler.sample_kesten_truncated(h, &mut rng, cap) {
            Sampled::Done((t, s)) => {
                spine = Some(s);
                ("kesten", t)
            }
            Sampled::Overflow => return Err(overflow(cap)),
        }
    } else if let Some(theta) = theta {
        match sampler.sample_pruned_gw(theta, &mut rng, cap)? {
            Sampled::Done(t) => ("pruned", t),
            Sampled::Overflow => return Err(overflow(cap)),
        }
    } else {
        match sampler.sample_gw(&mut rng, cap) {
            Sampled::Done(t) => ("gw", t),
            Sampled::Overflow => return Err(overflow(cap)),
        }
    };
    let tree = tree.with_random_labels(&mut rng);
    let mut out = Sink::open(common.out.as_deref())?;
    match common.format.unwrap_or(Format::Json) {
        Format::Json => {
            let mut doc = json!({
                "seed": common.seed,
                "alpha": alpha.value(),
                "kind": kind,
                "leaves": tree.leaf_count(),
                "nodes": tree.node_count(),
                "height": tree.height(),
            });
            if let Some(s) = &spine {
                doc["spine"] = json!(s);
            }
            doc["tree"] = tree.to_json();
            out.line(&pretty(&doc))?;
        }
        Format::Csv => {
            out.line(&csv_header(&[
                ("seed", common.seed.to_string()),
                ("alpha", num(alpha.value())),
                ("kind", kind.to_string()),
                ("leaves", tree.leaf_count().to_string()),
            ]))?;
            out.line("node,parent,child_count,label")?;
            for v in 0..tree.node_count() {
                let parent = tree.parent(v).map_or_else(String::new, |p| p.to_string());
                let label = tree.label(v).map_or_else(String::new, |l| l.to_string());
                out.line(&format!("{v},{parent},{},{label}", tree.child_count(v)))?;
            }
        }
    }
    out.finish()?;
    Ok(Status::Pass)
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("values serialize")
}

/// Prints a chain run in the schema shared by `prune` and `beta`.
fn emit_chain(command: &str, alpha: f64, n: usize, run: &ChainTrace, trace: bool, common: &Common) -> Result<()> {
    let mut out = Sink::open(common.out.as_deref())?;
    match common.format.unwrap_or(Format::Json) {
        Format::Json => {
            let header = json!({ "seed": common.seed, "command": command, "alpha": alpha, "n": n });
            out.line(&header.to_string())?;
            if trace {
                for e in &run.events {
                    out.line(&serde_json::to_string(e).expect("events serialize"))?;
                }
            } else {
                out.line(&serde_json::to_string(&run.stats()).expect("stats serialize"))?;
            }
        }
        Format::Csv => {
            out.line(&csv_header(&[
                ("seed", common.seed.to_string()),
                ("command", command.to_string()),
                ("alpha", num(alpha)),
                ("n", n.to_string()),
            ]))?;
            if trace {
                out.line("step,cut_node,merged,partition")?;
                for e in &run.events {
                    let merged: Vec<String> =
                        e.merged.iter().map(|b| b.iter().map(u32::to_string).collect::<Vec<_>>().join(",")).collect();
                    out.line(&format!(
                        "{},{},{},{}",
                        e.step,
                        e.cut_node,
                        field(&merged.join("|")),
                        field(&e.partition.to_string())
                    ))?;
                }
            } else {
                let s = run.stats();
                out.line("z,b,first_event_size,largest_block_fraction")?;
                out.line(&format!("{},{},{},{}", s.z, s.b, s.first_event_size, num(s.largest_block_fraction)))?;
            }
        }
    }
    out.finish()
}

fn prune(alpha: f64, leaves: usize, trace: bool, marks: bool, common: &Common) -> Result<Status> {
    let a = Alpha::for_simulation(alpha)?;
    let mut rng = stream(common.seed, 0);
    let tree = conditioned_tree(a, leaves, &mut rng)?.with_random_labels(&mut rng);
    let run = if marks { prune_chain_by_marks(&tree, &mut rng)? } else { prune_chain(&tree, &mut rng)? };
    emit_chain("prune", alpha, leaves, &run, trace, common)?;
    Ok(Status::Pass)
}

fn beta(alpha: f64, n: usize, trace: bool, common: &Common) -> Result<Status> {
    let a = Alpha::for_simulation(alpha)?;
    if n == 0 {
        return Err(Error::InvalidArgument("n must be positive".into()));
    }
    let mut rng = stream(common.seed, 0);
    let run = BetaCoalescent::new(a, n).trace(n, &mut rng);
    emit_chain("beta", alpha, n, &run, trace, common)?;
    Ok(Status::Pass)
}

fn verify(
    suite: Suite,
    alphas: &[f64],
    nmax: Option<usize>,
    ns: &[usize],
    reps: Option<u64>,
    common: &Common,
) -> Result<Status> {
    let sim_alpha = || -> Result<f64> {
        let a = alphas.first().copied().unwrap_or(0.5);
        Ok(Alpha::for_simulation(a)?.value())
    };
    let sizes = |default: &[usize]| if ns.is_empty() { default.to_vec() } else { ns.to_vec() };
    let reps_used = match suite {
        Suite::Bn => Some(reps.unwrap_or(100_000)),
        Suite::Zn => Some(reps.unwrap_or(10_000)),
        _ => None,
    };
    let opts = RunOptions { seed: common.seed, reps: reps_used.unwrap_or(0), workers: common.workers };
    let report: Report = match suite {
        Suite::Theorem1 => verify::theorem1(alphas, nmax.unwrap_or(5))?,
        Suite::Rates => verify::rates(alphas, nmax.unwrap_or(5))?,
        Suite::Pk => verify::pk(alphas, nmax.unwrap_or(6))?,
        Suite::K0 => verify::k0(alphas, nmax.unwrap_or(7))?,
        Suite::Specfn => verify::specfn()?,
        Suite::Bn => verify::bn(sim_alpha()?, &sizes(&BN_SIZES), opts)?,
        Suite::Zn => verify::zn(sim_alpha()?, &sizes(&ZN_SIZES), opts)?,
    };
    let mut out = Sink::open(common.out.as_deref())?;
    match common.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut header = vec![("suite", report.suite.clone())];
            if let Some(seed) = report.seed {
                header.push(("seed", seed.to_string()));
            }
            if let Some(r) = reps_used {
                header.push(("reps", r.to_string()));
            }
            out.line(&csv_header(&header))?;
            out.line("check,alpha,n,value,reference,deviation,tolerance,pass")?;
            for r in &report.rows {
                out.line(&format!(
                    "{},{},{},{},{},{},{},{}",
                    r.check,
                    num(r.alpha),
                    r.n,
                    num(r.value),
                    num(r.reference),
                    num(r.deviation),
                    num(r.tolerance),
                    if r.pass { "pass" } else { "FAIL" }
                ))?;
            }
            out.line(&format!(
                "# result={} max_deviation={}",
                if report.passed() { "pass" } else { "FAIL" },
                num(report.max_deviation())
            ))?;
        }
        Format::Json => {
            let mut doc = json!({ "suite": report.suite });
            if let Some(seed) = report.seed {
                doc["seed"] = json!(seed);
            }
            if let Some(r) = reps_used {
                doc["reps"] = json!(r);
            }
            doc["passed"] = json!(report.passed());
            doc["max_deviation"] = json!(report.max_deviation());
            doc["rows"] = serde_json::to_value(&report.rows).expect("rows serialize");
            out.line(&pretty(&doc))?;
        }
    }
    out.finish()?;
    Ok(if report.passed() { Status::Pass } else { Status::Fail })
}

fn dist(kind: DistKind, alpha: f64, n: usize, reps: u64, engine: EngineArg, common: &Common) -> Result<Status> {
    let alpha = Alpha::for_simulation(alpha)?.value();
    let engine = match engine {
        EngineArg::Prune => Engine::Prune,
        EngineArg::Beta => Engine::Beta,
    };
    let opts = RunOptions { seed: common.seed, reps, workers: common.workers };
    let (name, columns, rows, notes): (&str, [&str; 4], DistRows, Vec<(&str, f64)>) = match kind {
        DistKind::Bn | DistKind::FirstEvent => {
            let exp_kind =
                if kind == DistKind::Bn { ExperimentKind::BHistogram } else { ExperimentKind::FirstEventSize };
            let Outcome::Histogram(h) = run_experiment(&Experiment::new(exp_kind, alpha, n, engine), opts)? else {
                unreachable!("histogram experiments yield histograms")
            };
            let counts = h.counts.clone();
            if kind == DistKind::Bn {
                let rows = counts.iter().map(|(&m, &c)| Ok((m, c, b_pmf(alpha, m)?))).collect::<Result<Vec<_>>>()?;
                ("bn", ["m", "count", "frequency", "limit_pmf"], rows, vec![("tv_to_limit", tv_to_b_pmf(&h, alpha)?)])
            } else {
                let a = Alpha::new(alpha)?;
                let rows = counts
                    .iter()
                    .map(|(&k, &c)| {
                        let exact =
                            if k >= 2 { ln_choose(n as u64, k).exp() * merge_ratio(a, n as u64, k)? } else { 0.0 };
                        Ok((k, c, exact))
                    })
                    .collect::<Result<Vec<_>>>()?;
                ("first-event", ["k", "count", "frequency", "exact_pmf"], rows, vec![])
            }
        }
        DistKind::Zn => {
            let stats = simulate(engine, alpha, n, opts)?;
            let counts = histogram(stats.iter().map(|s| s.z as u64));
            let scale = (n as f64).powf(alpha - 1.0);
            let rows = counts.iter().map(|(&z, &c)| (z, c, z as f64 * scale)).collect();
            let mean = stats.iter().map(|s| s.z as f64 * scale).sum::<f64>() / reps as f64;
            let limit = z_moment(Alpha::new(alpha)?, 1);
            ("zn", ["z", "count", "frequency", "scaled_z"], rows, vec![("mean_scaled_z", mean), ("limit_mean", limit)])
        }
    };
    let mut out = Sink::open(common.out.as_deref())?;
    match common.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            out.line(&csv_header(&[
                ("seed", common.seed.to_string()),
                ("statistic", name.to_string()),
                ("alpha", num(alpha)),
                ("n", n.to_string()),
                ("reps", reps.to_string()),
                ("engine", engine.to_string()),
            ]))?;
            out.line(&columns.join(","))?;
            for (v, c, extra) in &rows {
                out.line(&format!("{v},{c},{},{}", num(*c as f64 / reps as f64), num(*extra)))?;
            }
            for (k, v) in &notes {
                out.line(&format!("# {k}={}", num(*v)))?;
            }
        }
        Format::Json => {
            let mut doc = json!({
                "seed": common.seed,
                "statistic": name,
                "alpha": alpha,
                "n": n,
                "reps": reps,
                "engine": engine.to_string(),
            });
            for (k, v) in &notes {
                doc[*k] = json!(v);
            }
            doc["rows"] = rows
                .iter()
                .map(|(v, c, extra)| {
                    let mut row = serde_json::Map::new();
                    row.insert(columns[0].into(), json!(v));
                    row.insert(columns[1].into(), json!(c));
                    row.insert(columns[2].into(), json!(*c as f64 / reps as f64));
                    row.insert(columns[3].into(), json!(extra));
                    Value::Object(row)
                })
                .collect();
            out.line(&pretty(&doc))?;
        }
    }
    out.finish()?;
    Ok(Status::Pass)
}

fn relerr(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        ((a - b) / a).abs()
    }
}

/// `Σ_m P(B = m) r^m`, truncated once `r^m` is negligible (or closed with the
/// tail mass at `r = 1`).
fn generating_series(alpha: f64, r: f64) -> Result<f64> {
    let m_max: u64 = if r < 1.0 { ((1e-14f64.ln() / r.ln()).ceil() as u64).clamp(2, 20_000) } else { 2_000 };
    let mut sum = 0.0;
    for m in 2..=m_max {
        sum += b_pmf(alpha, m)? * r.powi(m as i32);
    }
    if r == 1.0 {
        sum += b_pmf_tail(alpha, m_max)?;
    }
    Ok(sum)
}

fn specfn(
    kind: SpecKind,
    alpha: f64,
    lambdas: &[f64],
    rs: &[f64],
    jmax: u32,
    mmax: u64,
    common: &Common,
) -> Result<Status> {
    let (arg_name, value_names, rows): (&str, [&str; 2], SpecRows) = match kind {
        SpecKind::Phi if !rs.is_empty() => {
            let rows = rs
                .iter()
                .map(|&r| Ok((r, generating_series(alpha, r)?, phi_alpha(alpha, r)?)))
                .collect::<Result<Vec<_>>>()?;
            ("r", ["series", "quadrature"], rows)
        }
        SpecKind::Phi => {
            let a = Alpha::new(alpha)?;
            let grid = [0.25, 0.5, 1.0, 2.0, 5.0, 10.0];
            let ls = if lambdas.is_empty() { &grid[..] } else { lambdas };
            let rows = ls
                .iter()
                .map(|&l| Ok((l, phi_subordinator(a, l, Mode::Closed)?, phi_subordinator(a, l, Mode::Quadrature)?)))
                .collect::<Result<Vec<_>>>()?;
            ("lambda", ["closed", "quadrature"], rows)
        }
        SpecKind::Zmoments => {
            let a = Alpha::new(alpha)?;
            let rows = (0..=jmax)
                .map(|j| Ok((f64::from(j), z_moment(a, j), z_moment_via_subordinator(a, j, Mode::Quadrature)?)))
                .collect::<Result<Vec<_>>>()?;
            ("j", ["closed", "quadrature"], rows)
        }
        SpecKind::Bpmf => {
            let mut rows = Vec::new();
            let mut tail_before = 1.0;
            for m in 1..=mmax {
                let tail = b_pmf_tail(alpha, m)?;
                rows.push((m as f64, b_pmf(alpha, m)?, tail_before - tail));
                tail_before = tail;
            }
            ("m", ["closed", "quadrature"], rows)
        }
    };
    let mut out = Sink::open(common.out.as_deref())?;
    match common.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            out.line(&format!("alpha,{arg_name},{},{},relerr", value_names[0], value_names[1]))?;
            for (x, c, q) in &rows {
                out.line(&format!("{},{},{},{},{}", num(alpha), num(*x), num(*c), num(*q), num(relerr(*c, *q))))?;
            }
        }
        Format::Json => {
            let doc: Vec<Value> = rows
                .iter()
                .map(|(x, c, q)| {
                    let mut row = serde_json::Map::new();
                    row.insert("alpha".into(), json!(alpha));
                    row.insert(arg_name.into(), json!(x));
                    row.insert(value_names[0].into(), json!(c));
                    row.insert(value_names[1].into(), json!(q));
                    row.insert("relerr".into(), json!(relerr(*c, *q)));
                    Value::Object(row)
                })
                .collect();
            out.line(&pretty(&Value::Array(doc)))?;
        }
    }
    out.finish()?;
    Ok(Status::Pass)
}
