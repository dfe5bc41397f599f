//! Single-photon adaptive estimation: after every measurement the prior is
//! replaced by the posterior and the probe and measurement are re-optimized,
//! giving a binary tree of `2^(s-1)` possible configurations at step `s`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::CVector;
use crate::optimize::{optimize_coefficients, OptimizerConfig};
use crate::personick::{self, PersonickSolution};
use crate::prior::{Prior, DEFAULT_GRID_NODES};
use crate::states::FockSuperposition;

/// Largest depth accepted for full binary expansion.
pub const MAX_ALL_BRANCHES_DEPTH: usize = 12;

/// Largest photon budget for [`compare_single_shot`].
pub const MAX_COMPARE_STEPS: usize = 10;

/// Prior samples stored per node in the export.
pub const EXPORT_SAMPLES: usize = 256;

/// Intervals across one spike of [`spike_prior`].
const SPIKE_INTERVALS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Policy {
    /// Expand every reachable outcome.
    AllBranches,
    /// Follow outcome 1 (the larger estimate) only.
    LeftmostPath,
}

#[derive(Debug, Clone)]
pub struct AdaptiveConfig {
    pub optimizer: OptimizerConfig,
    /// Nodes used when a closed-form prior is first turned into a grid.
    pub grid_nodes: usize,
    /// Re-optimize the probe at every node; otherwise children keep the
    /// parent's probe.
    pub reoptimize: bool,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        Self { optimizer: OptimizerConfig::default(), grid_nodes: DEFAULT_GRID_NODES, reoptimize: true }
    }
}

#[derive(Debug, Clone)]
pub enum Branch {
    Unexpanded,
    /// The outcome has (numerically) zero probability.
    Unreachable,
    Node(Box<AdaptiveNode>),
}

impl Branch {
    pub fn node(&self) -> Option<&AdaptiveNode> {
        match self {
            Branch::Node(n) => Some(n),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AdaptiveNode {
    /// 1 at the root.
    pub step: usize,
    /// Outcomes `j_1..j_{s-1}`, each 1 or 2.
    pub outcome_path: Vec<u8>,
    pub prior: Prior,
    pub state: FockSuperposition,
    pub solution: PersonickSolution,
    /// Marginal probability of each outcome under `prior`.
    pub outcome_probabilities: [f64; 2],
    pub children: [Branch; 2],
}

impl AdaptiveNode {
    pub fn mmse(&self) -> f64 {
        self.solution.mmse
    }

    pub fn path_key(&self) -> String {
        path_key(&self.outcome_path)
    }
}

fn path_key(path: &[u8]) -> String {
    path.iter().map(|j| j.to_string()).collect::<Vec<_>>().join(",")
}

/// `φ ↦ |⟨projector|Ψ(φ)⟩|²` for a single-photon probe.
pub fn born_likelihood(
    state: &FockSuperposition,
    projector: &CVector,
) -> Result<impl Fn(f64) -> f64 + Send + Sync> {
    if state.photons() != 1 {
        return Err(Error::UnsupportedDimension { expected: 2, found: state.dim() });
    }
    if projector.len() != 2 {
        return Err(Error::UnsupportedDimension { expected: 2, found: projector.len() });
    }
    if (projector.norm() - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidState(format!("projector norm {} is not 1", projector.norm())));
    }
    let (a0, a1) = (state.coeffs()[0], state.coeffs()[1]);
    let (h0, h1) = (projector[0].conj(), projector[1].conj());
    Ok(move |phi: f64| {
        let (s, c) = phi.sin_cos();
        let down = num_complex::Complex64::new(c, -s);
        let up = num_complex::Complex64::new(c, s);
        (h0 * a0 * down + h1 * a1 * up).norm_sqr().min(1.0)
    })
}

fn make_node(
    step: usize,
    outcome_path: Vec<u8>,
    prior: Prior,
    inherited: Option<&FockSuperposition>,
    config: &AdaptiveConfig,
) -> Result<AdaptiveNode> {
    let state = match inherited {
        Some(s) if !config.reoptimize => s.clone(),
        _ => optimize_coefficients(1, &prior, true, &config.optimizer)?.state,
    };
    let solution = personick::solve(&state, &prior)?;
    let p = solution.outcome_probabilities();
    Ok(AdaptiveNode {
        step,
        outcome_path,
        prior,
        state,
        solution,
        outcome_probabilities: [p[0], p[1]],
        children: [Branch::Unexpanded, Branch::Unexpanded],
    })
}

/// The root of a tree: the probe optimized for `prior`.
pub fn root(prior: &Prior, config: &AdaptiveConfig) -> Result<AdaptiveNode> {
    make_node(1, Vec::new(), prior.clone(), None, config)
}

/// Child reached from `node` on outcome `j` (0-based: 0 is the larger
/// estimate).
pub fn expand_outcome(node: &AdaptiveNode, j: usize, config: &AdaptiveConfig) -> Result<Branch> {
    let likelihood = born_likelihood(&node.state, &node.solution.measurement.projectors[j])?;
    let posterior = match node.prior.bayes_update(likelihood, config.grid_nodes) {
        Ok((posterior, _)) => posterior,
        Err(Error::DegeneratePosterior { .. }) => return Ok(Branch::Unreachable),
        Err(e) => return Err(e),
    };
    let mut path = node.outcome_path.clone();
    path.push(j as u8 + 1);
    let child = make_node(node.step + 1, path, posterior, Some(&node.state), config)?;
    Ok(Branch::Node(Box::new(child)))
}

/// Both children of `node`.
pub fn expand(node: &AdaptiveNode, config: &AdaptiveConfig) -> Result<[Branch; 2]> {
    let (first, second) = rayon::join(|| expand_outcome(node, 0, config), || expand_outcome(node, 1, config));
    Ok([first?, second?])
}

#[derive(Debug, Clone)]
pub struct AdaptiveTree {
    pub root: AdaptiveNode,
    pub depth: usize,
    pub policy: Policy,
}

/// Grows the outcome tree to `depth` steps.
pub fn run_tree(prior: &Prior, depth: usize, policy: Policy, config: &AdaptiveConfig) -> Result<AdaptiveTree> {
    if depth == 0 {
        return Err(Error::Domain("depth must be at least 1".into()));
    }
    if policy == Policy::AllBranches && depth > MAX_ALL_BRANCHES_DEPTH {
        return Err(Error::CostGuard(format!(
            "all-branches expansion is limited to depth {MAX_ALL_BRANCHES_DEPTH} (got {depth})"
        )));
    }
    let mut root = root(prior, config)?;
    grow(&mut root, depth, policy, config)?;
    Ok(AdaptiveTree { root, depth, policy })
}

fn grow(node: &mut AdaptiveNode, depth: usize, policy: Policy, config: &AdaptiveConfig) -> Result<()> {
    if node.step >= depth {
        return Ok(());
    }
    match policy {
        Policy::LeftmostPath => {
            node.children[0] = expand_outcome(node, 0, config)?;
        }
        Policy::AllBranches => {
            node.children = expand(node, config)?;
        }
    }
    let [first, second] = &mut node.children;
    let (a, b) = rayon::join(
        || match first {
            Branch::Node(child) => grow(child, depth, policy, config),
            _ => Ok(()),
        },
        || match second {
            Branch::Node(child) => grow(child, depth, policy, config),
            _ => Ok(()),
        },
    );
    a.and(b)
}

/// One tree node flattened for export.
#[derive(Debug, Clone, Serialize)]
pub struct NodeRecord {
    pub step: usize,
    pub outcome_path: Vec<u8>,
    /// `(φ, P(φ))` on a uniform grid over the prior's support.
    pub prior: Vec<[f64; 2]>,
    /// `(re, im)` of each `a_l`.
    pub coefficients: Vec<[f64; 2]>,
    /// Row-major `(re, im)` entries of the estimator operator.
    pub b_operator: Vec<Vec<[f64; 2]>>,
    pub estimates: Vec<f64>,
    pub projectors: Vec<Vec<[f64; 2]>>,
    pub outcome_probabilities: [f64; 2],
    pub mmse: f64,
}

/// Per-step summary across every node at that step.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct StepSummary {
    pub step: usize,
    pub nodes: usize,
    pub best_mmse: f64,
    pub worst_mmse: f64,
    /// Probability-weighted mean over reachable nodes.
    pub expected_mmse: f64,
}

impl AdaptiveTree {
    /// Nodes at `step` with their path probabilities, leftmost first.
    pub fn nodes_at(&self, step: usize) -> Vec<(&AdaptiveNode, f64)> {
        let mut level = vec![(&self.root, 1.0)];
        for _ in 1..step {
            level = level
                .into_iter()
                .flat_map(|(node, weight)| {
                    node.children.iter().enumerate().filter_map(move |(j, branch)| {
                        branch.node().map(|child| (child, weight * node.outcome_probabilities[j]))
                    })
                })
                .collect();
        }
        level
    }

    pub fn step_summaries(&self) -> Vec<StepSummary> {
        (1..=self.depth)
            .map(|step| {
                let nodes = self.nodes_at(step);
                let best = nodes.iter().map(|(n, _)| n.mmse()).fold(f64::INFINITY, f64::min);
                let worst = nodes.iter().map(|(n, _)| n.mmse()).fold(f64::NEG_INFINITY, f64::max);
                let total: f64 = nodes.iter().map(|(_, w)| w).sum();
                let expected = nodes.iter().map(|(n, w)| n.mmse() * w).sum::<f64>() / total;
                StepSummary { step, nodes: nodes.len(), best_mmse: best, worst_mmse: worst, expected_mmse: expected }
            })
            .collect()
    }

    /// Best node MMSE at each step.
    pub fn step_mmse(&self) -> Vec<f64> {
        self.step_summaries().iter().map(|s| s.best_mmse).collect()
    }

    /// Nodes reached by always observing outcome 1.
    pub fn leftmost_path(&self) -> Vec<&AdaptiveNode> {
        let mut path = vec![&self.root];
        while let Some(next) = path.last().and_then(|n| n.children[0].node()) {
            path.push(next);
        }
        path
    }

    /// Every node keyed by its outcome path (`""` for the root, then
    /// `"1"`, `"1,2"`, ...).
    pub fn export(&self) -> BTreeMap<String, NodeRecord> {
        let mut out = BTreeMap::new();
        let mut stack = vec![&self.root];
        while let Some(node) = stack.pop() {
            out.insert(node.path_key(), record(node));
            stack.extend(node.children.iter().filter_map(Branch::node));
        }
        out
    }
}

fn pair(c: &num_complex::Complex64) -> [f64; 2] {
    [c.re, c.im]
}

fn record(node: &AdaptiveNode) -> NodeRecord {
    let b = node.solution.b_op.matrix();
    NodeRecord {
        step: node.step,
        outcome_path: node.outcome_path.clone(),
        prior: node.prior.sample(EXPORT_SAMPLES).into_iter().map(|(x, p)| [x, p]).collect(),
        coefficients: node.state.coeffs().iter().map(pair).collect(),
        b_operator: (0..b.nrows()).map(|i| (0..b.ncols()).map(|j| pair(&b[(i, j)])).collect()).collect(),
        estimates: node.solution.measurement.estimates.clone(),
        projectors: node
            .solution
            .measurement
            .projectors
            .iter()
            .map(|v| v.iter().map(pair).collect())
            .collect(),
        outcome_probabilities: node.outcome_probabilities,
        mmse: node.mmse(),
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ComparisonRow {
    pub s: usize,
    pub adaptive_mmse: f64,
    pub single_shot_mmse: f64,
}

/// Adaptive per-step MMSE next to the best single `s`-photon probe under the
/// un-updated prior.
pub fn compare_single_shot(
    prior: &Prior,
    max_steps: usize,
    policy: Policy,
    config: &AdaptiveConfig,
) -> Result<(AdaptiveTree, Vec<ComparisonRow>)> {
    if max_steps == 0 {
        return Err(Error::Domain("max_steps must be at least 1".into()));
    }
    if max_steps > MAX_COMPARE_STEPS {
        return Err(Error::CostGuard(format!(
            "single-shot comparison is limited to {MAX_COMPARE_STEPS} steps (got {max_steps})"
        )));
    }
    let tree = run_tree(prior, max_steps, policy, config)?;
    let adaptive = tree.step_mmse();
    let rows = adaptive
        .iter()
        .enumerate()
        .map(|(i, &adaptive_mmse)| {
            let s = i + 1;
            let single = optimize_coefficients(s, prior, false, &config.optimizer)?;
            Ok(ComparisonRow { s, adaptive_mmse, single_shot_mmse: single.mmse })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((tree, rows))
}

/// A `cos²` bump of full width `width` centred on `center`.
pub fn spike_prior(center: f64, width: f64) -> Result<Prior> {
    check_width(width)?;
    if center - width / 2.0 < 0.0 || center + width / 2.0 > crate::TWO_PI {
        return Err(Error::Domain(format!("spike at {center} does not fit inside [0, 2π]")));
    }
    let (nodes, density) = spike_nodes(center, width);
    Prior::grid(nodes, density)
}

/// Two equal `cos²` bumps at `π/2` and `3π/2`, separated by `π`.
pub fn two_spike_prior(width: f64) -> Result<Prior> {
    check_width(width)?;
    let (mut nodes, mut density) = spike_nodes(PI / 2.0, width);
    // two equal intervals across the empty gap keep Simpson pairs aligned
    nodes.push(PI);
    density.push(0.0);
    let (n2, d2) = spike_nodes(1.5 * PI, width);
    nodes.extend(n2);
    density.extend(d2);
    Prior::grid(nodes, density)
}

fn check_width(width: f64) -> Result<()> {
    if !(width > 0.0 && width < PI / 2.0) {
        return Err(Error::Domain(format!("spike width {width} outside (0, π/2)")));
    }
    Ok(())
}

fn spike_nodes(center: f64, width: f64) -> (Vec<f64>, Vec<f64>) {
    (0..=SPIKE_INTERVALS)
        .map(|i| {
            let u = i as f64 / SPIKE_INTERVALS as f64 - 0.5;
            let phi = center + u * width;
            (phi, (PI * u).cos().powi(2))
        })
        .unzip()
}

/// MMSE of the best single-photon probe under [`two_spike_prior`]; tends to
/// `π²/4` as `width → 0`.
pub fn delta_infinity_check(width: f64, config: &OptimizerConfig) -> Result<f64> {
    let prior = two_spike_prior(width)?;
    Ok(optimize_coefficients(1, &prior, true, config)?.mmse)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn plus() -> FockSuperposition {
        FockSuperposition::from_real(&[1.0, 1.0]).unwrap()
    }

    #[test]
    fn likelihood_of_balanced_probe() {
        let v = CVector::from_vec(vec![Complex64::new(0.0, FRAC_1_SQRT_2), Complex64::new(FRAC_1_SQRT_2, 0.0)]);
        let f = born_likelihood(&plus(), &v).unwrap();
        for phi in [0.0f64, 0.3, 1.0, 2.5, 5.9] {
            let want = (1.0 - (2.0 * phi).sin()) / 2.0;
            assert!((f(phi) - want).abs() < 1e-14, "{phi}: {} vs {want}", f(phi));
        }
        // this outcome reports π + 1/2, which must be the posterior mean
        let (post, evidence) = Prior::flat().bayes_update(&f, 4096).unwrap();
        assert!((evidence - 0.5).abs() < 1e-12);
        assert!((post.mean_and_variance().0 - (PI + 0.5)).abs() < 1e-9);
        let e0 = CVector::from_vec(vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]);
        let g = born_likelihood(&plus(), &e0).unwrap();
        assert!((g(1.234) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn likelihood_vanishes_on_orthogonal_projector() {
        let phi0 = 0.7;
        let shifted = plus().apply_phase(phi0);
        let a = shifted.coeffs();
        let orth = CVector::from_vec(vec![-a[1].conj(), a[0].conj()]);
        let f = born_likelihood(&plus(), &orth).unwrap();
        assert!(f(phi0).abs() < 1e-15);
    }

    #[test]
    fn likelihood_rejects_larger_probes() {
        let v = CVector::from_vec(vec![Complex64::new(1.0, 0.0); 3]);
        let r = born_likelihood(&FockSuperposition::noon(2).unwrap(), &v);
        assert!(matches!(r, Err(Error::UnsupportedDimension { .. })));
    }

    #[test]
    fn flat_root_and_children() {
        let cfg = AdaptiveConfig::default();
        let tree = run_tree(&Prior::flat(), 2, Policy::AllBranches, &cfg).unwrap();
        let root = &tree.root;
        assert!((root.outcome_probabilities[0] - 0.5).abs() < 1e-12);
        assert!((root.outcome_probabilities[1] - 0.5).abs() < 1e-12);
        assert!((root.solution.measurement.estimates[0] - (PI + 0.5)).abs() < 1e-9);
        let kids = tree.nodes_at(2);
        assert_eq!(kids.len(), 2);
        assert_eq!(kids[0].0.path_key(), "1");
        assert_eq!(kids[1].0.path_key(), "2");
        for (node, _) in kids {
            let p: f64 = node.outcome_probabilities.iter().sum();
            assert!((p - 1.0).abs() < 1e-9);
            assert_eq!(node.solution.measurement.projectors.len(), 2);
        }
        let keys: Vec<String> = tree.export().into_keys().collect();
        assert_eq!(keys, vec!["", "1", "2"]);
    }

    #[test]
    fn depth_guards() {
        let cfg = AdaptiveConfig::default();
        assert!(matches!(run_tree(&Prior::flat(), 13, Policy::AllBranches, &cfg), Err(Error::CostGuard(_))));
        assert!(run_tree(&Prior::flat(), 0, Policy::LeftmostPath, &cfg).is_err());
        assert!(matches!(
            compare_single_shot(&Prior::flat(), 11, Policy::LeftmostPath, &cfg),
            Err(Error::CostGuard(_))
        ));
    }

    #[test]
    fn no_reoptimize_keeps_probe() {
        let cfg = AdaptiveConfig { reoptimize: false, ..AdaptiveConfig::default() };
        let tree = run_tree(&Prior::truncated(0.0, PI).unwrap(), 3, Policy::LeftmostPath, &cfg).unwrap();
        let path = tree.leftmost_path();
        assert_eq!(path.len(), 3);
        assert_eq!(path[2].state, path[0].state);
    }

    #[test]
    fn spike_priors() {
        let single = spike_prior(1.0, 1e-3).unwrap();
        let (mean, var) = single.mean_and_variance();
        assert!((mean - 1.0).abs() < 1e-12);
        assert!(var < 1e-7);
        let two = two_spike_prior(1e-3).unwrap();
        let (mean, var) = two.mean_and_variance();
        assert!((mean - PI).abs() < 1e-12);
        assert!((var - PI * PI / 4.0).abs() < 1e-6);
        assert!(two_spike_prior(0.0).is_err());
    }
}
