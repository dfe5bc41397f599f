//! One function per subcommand. Each returns the bytes to write.

use std::path::PathBuf;

use anyhow::anyhow;
use fockphase::adaptive::{self, AdaptiveConfig, Policy};
use fockphase::optimize::{optimize_bs_transmissivity, optimize_coefficients, OptimizerConfig};
use fockphase::personick::{mmse_noon_truncated_closed_form, solve};
use fockphase::prior::parse_angle;
use fockphase::{Complex64, FockSuperposition, Prior, TWO_PI};
use serde::Serialize;

use crate::config::{parse_range, Common, Format};
use crate::Failure;

pub const MAX_OPTIMIZE_N: usize = 30;
pub const MAX_NOON_N: usize = 200;
pub const MAX_BS_N: usize = 10_000;

type Out = Result<Vec<u8>, Failure>;

fn usage<E: std::fmt::Display>(context: &str) -> impl FnOnce(E) -> Failure + '_ {
    move |e| Failure::Usage(anyhow!("{context}: {e}"))
}

fn numeric(e: fockphase::Error) -> Failure {
    if e.is_usage() || matches!(e, fockphase::Error::CostGuard(_)) {
        Failure::Usage(e.into())
    } else {
        Failure::Numerical(e.into())
    }
}

/// Headers are written explicitly so optional columns stay in sync.
fn writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new())
}

fn csv_bytes<R: Serialize>(header: &[String], rows: &[R]) -> Out {
    let mut w = writer();
    w.write_record(header).map_err(|e| Failure::Usage(e.into()))?;
    for row in rows {
        w.serialize(row).map_err(|e| Failure::Usage(e.into()))?;
    }
    w.into_inner().map_err(|e| Failure::Usage(anyhow!("{e}")))
}

fn json_bytes<T: Serialize>(value: &T) -> Out {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Failure::Usage(e.into()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn header(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn pair(c: &Complex64) -> [f64; 2] {
    [c.re, c.im]
}

pub fn parse_prior(spec: &str) -> Result<Prior, Failure> {
    spec.parse().map_err(usage("--prior"))
}

fn optimizer(common: &Common) -> OptimizerConfig {
    OptimizerConfig { restarts: common.restarts, seed: common.seed, ..OptimizerConfig::default() }
}

#[derive(Serialize)]
struct MmseReport {
    mmse: f64,
    coefficients: Vec<[f64; 2]>,
    b_operator: Vec<Vec<[f64; 2]>>,
    estimates: Vec<f64>,
    projectors: Vec<Vec<[f64; 2]>>,
    outcome_probabilities: Vec<f64>,
}

/// CSV layout `field,row,col,re,im`; `row`/`col` are empty where unused.
#[derive(Serialize)]
struct MmseRow {
    field: &'static str,
    row: Option<usize>,
    col: Option<usize>,
    re: f64,
    im: f64,
}

pub fn mmse(common: &Common, prior: &str, state: &str) -> Out {
    let prior = parse_prior(prior)?;
    let state: FockSuperposition = state.parse().map_err(usage("--state"))?;
    let sol = solve(&state, &prior).map_err(numeric)?;
    let b = sol.b_op.matrix();
    let report = MmseReport {
        mmse: sol.mmse,
        coefficients: state.coeffs().iter().map(pair).collect(),
        b_operator: (0..b.nrows()).map(|i| (0..b.ncols()).map(|j| pair(&b[(i, j)])).collect()).collect(),
        estimates: sol.measurement.estimates.clone(),
        projectors: sol.measurement.projectors.iter().map(|v| v.iter().map(pair).collect()).collect(),
        outcome_probabilities: sol.outcome_probabilities(),
    };
    if common.format == Format::Json {
        return json_bytes(&report);
    }
    let cell = |field, row, col, [re, im]: [f64; 2]| MmseRow { field, row, col, re, im };
    let mut rows = vec![cell("mmse", None, None, [report.mmse, 0.0])];
    for (i, r) in report.b_operator.iter().enumerate() {
        rows.extend(r.iter().enumerate().map(|(j, &v)| cell("b", Some(i), Some(j), v)));
    }
    rows.extend(report.estimates.iter().enumerate().map(|(j, &e)| cell("estimate", Some(j), None, [e, 0.0])));
    for (j, v) in report.projectors.iter().enumerate() {
        rows.extend(v.iter().enumerate().map(|(l, &c)| cell("projector", Some(j), Some(l), c)));
    }
    rows.extend(
        report.outcome_probabilities.iter().enumerate().map(|(j, &p)| cell("probability", Some(j), None, [p, 0.0])),
    );
    csv_bytes(&header(&["field", "row", "col", "re", "im"]), &rows)
}

#[derive(Serialize)]
struct NoonRow {
    m: f64,
    n: usize,
    delta_trunc: f64,
    pipeline_delta: f64,
}

pub fn noon_curve(common: &Common, m_list: &[String], n_max: usize) -> Out {
    if n_max == 0 || n_max > MAX_NOON_N {
        return Err(Failure::Usage(anyhow!("--n-max must lie in 1..={MAX_NOON_N}")));
    }
    let widths = m_list
        .iter()
        .map(|t| {
            let m = parse_angle(t).map_err(usage("--m"))?;
            if !(m > 0.0 && m <= TWO_PI + 1e-12) {
                return Err(Failure::Usage(anyhow!("--m: {t} is outside (0, 2π]")));
            }
            Ok(m.min(TWO_PI))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if widths.is_empty() {
        return Err(Failure::Usage(anyhow!("--m needs at least one value")));
    }
    let mut rows = Vec::new();
    for &m in &widths {
        let prior = Prior::truncated(0.0, m).map_err(numeric)?;
        for n in 1..=n_max {
            let delta_trunc = mmse_noon_truncated_closed_form(n, m).map_err(numeric)?;
            let noon = FockSuperposition::noon(n).map_err(numeric)?;
            let pipeline_delta = solve(&noon, &prior).map_err(numeric)?.mmse;
            rows.push(NoonRow { m, n, delta_trunc, pipeline_delta });
        }
    }
    match common.format {
        Format::Json => json_bytes(&rows),
        Format::Csv => csv_bytes(&header(&["m", "n", "delta_trunc", "pipeline_delta"]), &rows),
    }
}

#[derive(Serialize)]
struct OptimizeRecord {
    n: usize,
    delta: f64,
    coefficients: Vec<[f64; 2]>,
    restarts_used: usize,
    converged: bool,
}

pub fn optimize(common: &Common, prior: &str, range: &str, allow_phases: bool) -> Out {
    let prior = parse_prior(prior)?;
    let (lo, hi) = parse_range(range).map_err(|e| Failure::Usage(e.context("--n")))?;
    if hi > MAX_OPTIMIZE_N {
        return Err(Failure::Usage(anyhow!("--n: at most {MAX_OPTIMIZE_N} photons")));
    }
    let config = optimizer(common);
    let records = (lo..=hi)
        .map(|n| {
            let r = optimize_coefficients(n, &prior, allow_phases, &config).map_err(numeric)?;
            Ok(OptimizeRecord {
                n,
                delta: r.mmse,
                coefficients: r.state.coeffs().iter().map(pair).collect(),
                restarts_used: r.restarts_used,
                converged: r.converged,
            })
        })
        .collect::<Result<Vec<_>, Failure>>()?;
    if common.format == Format::Json {
        return json_bytes(&records);
    }
    // a_l is the real part, or the modulus when some coefficient is
    // complex; theta_l = arg(a_l) then follows in radians
    let complex = records.iter().any(|r| r.coefficients.iter().any(|c| c[1] != 0.0));
    let mut names = vec!["n".to_string(), "delta".to_string()];
    names.extend((0..=hi).map(|l| format!("a_{l}")));
    if complex {
        names.extend((0..=hi).map(|l| format!("theta_{l}")));
    }
    let mut w = writer();
    let io = |e: csv::Error| Failure::Usage(e.into());
    w.write_record(&names).map_err(io)?;
    for r in &records {
        let mut cells = vec![r.n.to_string(), r.delta.to_string()];
        let coeff = |l: usize| r.coefficients.get(l).map(|c| Complex64::new(c[0], c[1]));
        let value = |l: usize| coeff(l).map(|c| if complex { c.norm() } else { c.re });
        cells.extend((0..=hi).map(|l| value(l).map(|v| v.to_string()).unwrap_or_default()));
        if complex {
            cells.extend((0..=hi).map(|l| coeff(l).map(|c| c.arg().to_string()).unwrap_or_default()));
        }
        w.write_record(&cells).map_err(io)?;
    }
    w.into_inner().map_err(|e| Failure::Usage(anyhow!("{e}")))
}

#[derive(Serialize)]
struct BsRow {
    n: usize,
    tau_opt: f64,
    mmse: f64,
}

pub fn bs_optimize(common: &Common, range: &str) -> Out {
    let (lo, hi) = parse_range(range).map_err(|e| Failure::Usage(e.context("--n")))?;
    if hi > MAX_BS_N {
        return Err(Failure::Usage(anyhow!("--n: at most {MAX_BS_N} photons")));
    }
    let rows = (lo..=hi)
        .map(|n| {
            let (tau_opt, mmse) = optimize_bs_transmissivity(n).map_err(numeric)?;
            Ok(BsRow { n, tau_opt, mmse })
        })
        .collect::<Result<Vec<_>, Failure>>()?;
    match common.format {
        Format::Json => json_bytes(&rows),
        Format::Csv => csv_bytes(&header(&["n", "tau_opt", "mmse"]), &rows),
    }
}

pub struct AdaptiveArgs<'a> {
    pub prior: &'a str,
    pub depth: usize,
    pub policy: Policy,
    pub compare: bool,
    pub reoptimize: bool,
    pub tree: Option<PathBuf>,
}

#[derive(Serialize)]
struct StepRow {
    step: usize,
    nodes: usize,
    best_mmse: f64,
    worst_mmse: f64,
    expected_mmse: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    single_shot_mmse: Option<f64>,
}

#[derive(Serialize)]
struct TreeReport<'a> {
    policy: Policy,
    depth: usize,
    steps: &'a [StepRow],
    nodes: std::collections::BTreeMap<String, adaptive::NodeRecord>,
}

/// CSV output is the per-step table (with `single_shot_mmse` under
/// `--compare`); JSON output is the whole tree.
pub fn adaptive(common: &Common, args: AdaptiveArgs<'_>) -> Out {
    let prior = parse_prior(args.prior)?;
    if args.depth == 0 {
        return Err(Failure::Usage(anyhow!("--depth must be at least 1")));
    }
    let config = AdaptiveConfig { optimizer: optimizer(common), grid_nodes: common.grid, reoptimize: args.reoptimize };
    let (tree, single) = if args.compare {
        let (tree, rows) = adaptive::compare_single_shot(&prior, args.depth, args.policy, &config).map_err(numeric)?;
        (tree, Some(rows))
    } else {
        (adaptive::run_tree(&prior, args.depth, args.policy, &config).map_err(numeric)?, None)
    };
    let steps: Vec<StepRow> = tree
        .step_summaries()
        .into_iter()
        .enumerate()
        .map(|(i, s)| StepRow {
            step: s.step,
            nodes: s.nodes,
            best_mmse: s.best_mmse,
            worst_mmse: s.worst_mmse,
            expected_mmse: s.expected_mmse,
            single_shot_mmse: single.as_ref().map(|rows| rows[i].single_shot_mmse),
        })
        .collect();
    let report = || TreeReport { policy: args.policy, depth: tree.depth, steps: &steps, nodes: tree.export() };
    if let Some(path) = &args.tree {
        std::fs::write(path, json_bytes(&report())?).map_err(usage("--tree"))?;
    }
    match common.format {
        Format::Json => json_bytes(&report()),
        Format::Csv => {
            let mut names = header(&["step", "nodes", "best_mmse", "worst_mmse", "expected_mmse"]);
            if single.is_some() {
                names.push("single_shot_mmse".into());
            }
            csv_bytes(&names, &steps)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_classes() {
        let degenerate = fockphase::Error::DegeneratePosterior { evidence: 0.0, threshold: 1e-14 };
        assert_eq!(numeric(degenerate).code(), 3);
        assert_eq!(numeric(fockphase::Error::InvalidOperator("x".into())).code(), 3);
        assert_eq!(numeric(fockphase::Error::Parse("x".into())).code(), 2);
        assert_eq!(numeric(fockphase::Error::CostGuard("x".into())).code(), 2);
    }
}
