//! Brute-force re-derivations of solver and risk-measure outputs.
//!
//! Nothing here calls the primal evaluators in [`crate::risk`] or the
//! recursions in [`crate::solver`]. Risk is evaluated through the dual
//! representation (AV@R by LP vertex enumeration, mean-deviation through its
//! explicit maximizing density), nested values by walking explicit scenario
//! trees, and optimal values by enumerating every Markov deterministic
//! policy. All oracles enforce a size budget and fail loudly past it.

use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::model::{MarkovModel, Transition};
use crate::risk::{DiscreteDistribution, RiskSpec};
use crate::solver::{Policy, StagePolicy, ValueFunction};

/// Maximum number of atoms accepted by [`avar_lp_oracle`].
pub const LP_ATOM_BUDGET: usize = 12;

/// Maximum number of nodes in a scenario tree.
pub const TREE_NODE_BUDGET: usize = 1_000_000;

/// Maximum number of policy sequences enumerated by
/// [`exhaustive_policy_search`].
pub const POLICY_BUDGET: f64 = 1e6;

const FEAS_TOL: f64 = 1e-12;

/// AV@R as `max <m, Z>` over `0 <= m <= 1/(1-alpha)`, `E[m] = 1`, solved by
/// enumerating the vertices of the feasible polytope.
pub fn avar_lp_oracle(alpha: f64, dist: &DiscreteDistribution) -> Result<f64> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(domain(format!("AV@R level {alpha} must lie in [0, 1)")));
    }
    avar_lp_oracle_with_cap(1.0 / (1.0 - alpha), dist)
}

/// Vertex enumeration with an explicit density cap.
///
/// A vertex has every coordinate at 0 or at the cap except at most one, whose
/// value is fixed by the unit-mass constraint.
pub fn avar_lp_oracle_with_cap(cap: f64, dist: &DiscreteDistribution) -> Result<f64> {
    let atoms: Vec<(f64, f64)> = dist.atoms().iter().map(|a| (a.value, a.prob)).collect();
    lp_vertex_max(cap, &atoms)
}

fn lp_vertex_max(cap: f64, atoms: &[(f64, f64)]) -> Result<f64> {
    let n = atoms.len();
    if n > LP_ATOM_BUDGET {
        return Err(Error::Resource {
            what: "AV@R vertex enumeration (atoms)",
            needed: n as f64,
            budget: LP_ATOM_BUDGET as f64,
        });
    }
    if !(cap >= 1.0) {
        return Err(domain(format!("density cap {cap} admits no probability density")));
    }
    let mut best = f64::NEG_INFINITY;
    for mask in 0u32..(1 << n) {
        let mut saturated_mass = 0.0;
        let mut objective = 0.0;
        for (i, &(v, p)) in atoms.iter().enumerate() {
            if mask & (1 << i) != 0 {
                saturated_mass += cap * p;
                objective += cap * p * v;
            }
        }
        if saturated_mass > 1.0 + FEAS_TOL {
            continue;
        }
        let rest = 1.0 - saturated_mass;
        if rest <= FEAS_TOL {
            best = best.max(objective);
            continue;
        }
        for (j, &(v, p)) in atoms.iter().enumerate() {
            if mask & (1 << j) != 0 {
                continue;
            }
            let m = rest / p;
            if m <= cap * (1.0 + FEAS_TOL) {
                best = best.max(objective + rest * v);
            }
        }
    }
    if best == f64::NEG_INFINITY {
        return Err(domain("no feasible density found"));
    }
    Ok(best)
}

/// Risk evaluation through the dual representation.
fn dual_risk(risk: &RiskSpec, atoms: &[(f64, f64)], cap_scale: f64) -> Result<f64> {
    match risk {
        RiskSpec::Expectation => Ok(atoms.iter().map(|(v, p)| v * p).sum()),
        RiskSpec::Avar { alpha } => lp_vertex_max(cap_scale / (1.0 - alpha), atoms),
        RiskSpec::MeanDeviation { kappa } => {
            let mean: f64 = atoms.iter().map(|(v, p)| v * p).sum();
            let h: Vec<f64> = atoms
                .iter()
                .map(|(v, _)| kappa * (v - mean).signum() * f64::from(*v != mean))
                .collect();
            let mean_h: f64 = h.iter().zip(atoms).map(|(h, (_, p))| h * p).sum();
            Ok(h.iter()
                .zip(atoms)
                .map(|(h, (v, p))| (1.0 + h - mean_h) * p * v)
                .sum())
        }
        RiskSpec::Kusuoka { family } => {
            let mut best = f64::NEG_INFINITY;
            for mixture in family {
                let mut value = 0.0;
                for c in &mixture.0 {
                    if c.weight > 0.0 {
                        value += c.weight * lp_vertex_max(cap_scale / (1.0 - c.alpha), atoms)?;
                    }
                }
                best = best.max(value);
            }
            Ok(best)
        }
    }
}

/// Successor of `(state, action)` as `(probability, [(weight, grid index)])`.
/// Off-grid dynamics successors are split between their two neighbours.
fn successors(model: &MarkovModel, state: usize, action: usize) -> Vec<(f64, Vec<(f64, usize)>)> {
    match model.transition() {
        Transition::Tabular { rows } => rows[state][action]
            .iter()
            .map(|&(j, p)| (p, vec![(1.0, j)]))
            .collect(),
        Transition::Dynamics { noise, next_states } => {
            let points = model.grid().points();
            next_states[state][action]
                .iter()
                .zip(noise.atoms())
                .map(|(&y, atom)| (atom.prob, bracket(points, y)))
                .collect()
        }
    }
}

fn bracket(points: &[f64], y: f64) -> Vec<(f64, usize)> {
    let last = points.len() - 1;
    if y <= points[0] {
        return vec![(1.0, 0)];
    }
    if y >= points[last] {
        return vec![(1.0, last)];
    }
    let mut lo = 0;
    while points[lo + 1] <= y {
        lo += 1;
    }
    if points[lo] == y {
        return vec![(1.0, lo)];
    }
    let w = (y - points[lo]) / (points[lo + 1] - points[lo]);
    vec![(1.0 - w, lo), (w, lo + 1)]
}

/// A node of an unrolled nested objective.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioNode {
    pub state: usize,
    /// Grid coordinate of `state`.
    pub x: f64,
    pub stage: usize,
    pub cost: f64,
    /// One branch per successor atom. A branch points at one node, or at two
    /// neighbouring nodes whose values are interpolated with the given weights.
    pub children: Vec<Branch>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Branch {
    pub prob: f64,
    pub targets: Vec<(f64, ScenarioNode)>,
}

/// Explicit scenario tree of a fixed policy from one initial state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioTree {
    pub depth: usize,
    pub root: ScenarioNode,
    pub discount: f64,
    pub nodes: usize,
}

impl ScenarioTree {
    /// Unrolls `policy` from `start` down to stage `depth`.
    pub fn build(model: &MarkovModel, policy: &Policy, start: usize, depth: usize) -> Result<Self> {
        if start >= model.num_states() {
            return Err(domain(format!("initial state {start} is not on the grid")));
        }
        let mut nodes = 0;
        count_nodes(model, policy, start, 0, depth, &mut nodes)?;
        nodes = 0;
        let root = build_node(model, policy, start, 0, depth, &mut nodes)?;
        Ok(Self {
            depth,
            root,
            discount: model.discount(),
            nodes,
        })
    }

    /// `cost + beta * rho(child values)` evaluated bottom-up.
    pub fn value(&self, risk: &RiskSpec) -> Result<f64> {
        risk.validate()?;
        node_value(&self.root, risk, self.discount)
    }
}

fn budget_error(nodes: usize) -> Error {
    Error::Resource {
        what: "scenario tree nodes",
        needed: nodes as f64,
        budget: TREE_NODE_BUDGET as f64,
    }
}

/// Counts nodes without allocating, stopping at the budget.
fn count_nodes(
    model: &MarkovModel,
    policy: &Policy,
    state: usize,
    stage: usize,
    depth: usize,
    nodes: &mut usize,
) -> Result<()> {
    *nodes += 1;
    if *nodes > TREE_NODE_BUDGET {
        return Err(budget_error(*nodes));
    }
    if stage < depth {
        let Some(&action) = policy.rule(stage).and_then(|r| r.get(state)) else {
            return Ok(());
        };
        if !model.is_admissible(state, action) {
            return Ok(());
        }
        for (_, targets) in successors(model, state, action) {
            for (_, j) in targets {
                count_nodes(model, policy, j, stage + 1, depth, nodes)?;
            }
        }
    }
    Ok(())
}

fn build_node(
    model: &MarkovModel,
    policy: &Policy,
    state: usize,
    stage: usize,
    depth: usize,
    nodes: &mut usize,
) -> Result<ScenarioNode> {
    *nodes += 1;
    if *nodes > TREE_NODE_BUDGET {
        return Err(budget_error(*nodes));
    }
    let rule = policy
        .rule(stage)
        .ok_or_else(|| Error::InvalidPolicy(format!("no decision rule for stage {stage}")))?;
    let action = *rule
        .get(state)
        .ok_or_else(|| Error::InvalidPolicy(format!("stage {stage} rule misses state {state}")))?;
    if !model.is_admissible(state, action) {
        return Err(Error::InvalidPolicy(format!(
            "stage {stage} picks inadmissible action {action} in state {state}"
        )));
    }
    let mut children = Vec::new();
    if stage < depth {
        for (prob, targets) in successors(model, state, action) {
            let targets = targets
                .into_iter()
                .map(|(w, j)| Ok((w, build_node(model, policy, j, stage + 1, depth, nodes)?)))
                .collect::<Result<Vec<_>>>()?;
            children.push(Branch { prob, targets });
        }
    }
    Ok(ScenarioNode {
        state,
        x: model.grid().points()[state],
        stage,
        cost: model.cost(state, action),
        children,
    })
}

fn node_value(node: &ScenarioNode, risk: &RiskSpec, discount: f64) -> Result<f64> {
    if node.children.is_empty() {
        return Ok(node.cost);
    }
    let mut atoms = Vec::with_capacity(node.children.len());
    for branch in &node.children {
        let mut v = 0.0;
        for (w, child) in &branch.targets {
            v += w * node_value(child, risk, discount)?;
        }
        atoms.push((v, branch.prob));
    }
    Ok(node.cost + discount * dual_risk(risk, &atoms, 1.0)?)
}

/// Nested value of `policy` from `start` over stages `0..=depth`.
pub fn scenario_tree_value(
    model: &MarkovModel,
    risk: &RiskSpec,
    policy: &Policy,
    start: usize,
    depth: usize,
) -> Result<f64> {
    ScenarioTree::build(model, policy, start, depth)?.value(risk)
}

/// Best value and policy for every initial state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExhaustiveOptimum {
    pub values: ValueFunction,
    /// `policies[s]` attains `values[s]` from initial state `s`.
    pub policies: Vec<Policy>,
    pub sequences: usize,
}

/// Minimizes the nested objective over every sequence of deterministic
/// decision rules for stages `0..=depth`.
///
/// Each sequence is scored exactly; the scores of common suffixes are shared
/// between sequences rather than recomputed, and the minimum is taken only
/// over complete sequences.
pub fn exhaustive_policy_search(
    model: &MarkovModel,
    risk: &RiskSpec,
    depth: usize,
) -> Result<ExhaustiveOptimum> {
    exhaustive_with_cap(model, risk, depth, 1.0)
}

pub(crate) fn exhaustive_with_cap(
    model: &MarkovModel,
    risk: &RiskSpec,
    depth: usize,
    cap_scale: f64,
) -> Result<ExhaustiveOptimum> {
    risk.validate()?;
    let n = model.num_states();
    let rules_count: f64 = (0..n).map(|s| model.admissible(s).len() as f64).product();
    let needed = rules_count.powi(depth as i32 + 1);
    if needed > POLICY_BUDGET {
        return Err(Error::Resource {
            what: "policy sequences",
            needed,
            budget: POLICY_BUDGET,
        });
    }
    let rules = enumerate_rules(model);
    let beta = model.discount();
    let table: Vec<Vec<Vec<(f64, Vec<(f64, usize)>)>>> = (0..n)
        .map(|s| {
            (0..model.num_actions())
                .map(|a| {
                    if model.is_admissible(s, a) {
                        successors(model, s, a)
                    } else {
                        Vec::new()
                    }
                })
                .collect()
        })
        .collect();
    let mut atoms: Vec<(f64, f64)> = Vec::new();

    // layer[k] holds the value vector of suffix sequence k for the current
    // first stage; suffix k = r * |previous layer| + k' for rule r.
    let mut layer: Vec<Vec<f64>> = rules
        .iter()
        .map(|rule| (0..n).map(|s| model.cost(s, rule[s])).collect())
        .collect();
    for _ in 0..depth {
        let mut next = Vec::with_capacity(rules.len() * layer.len());
        for rule in &rules {
            for suffix in &layer {
                let mut values = Vec::with_capacity(n);
                for s in 0..n {
                    let a = rule[s];
                    atoms.clear();
                    atoms.extend(table[s][a].iter().map(|(p, targets)| {
                        (targets.iter().map(|&(w, j)| w * suffix[j]).sum(), *p)
                    }));
                    values.push(model.cost(s, a) + beta * dual_risk(risk, &atoms, cap_scale)?);
                }
                next.push(values);
            }
        }
        layer = next;
    }

    let mut values = Vec::with_capacity(n);
    let mut policies = Vec::with_capacity(n);
    for s in 0..n {
        let (best, value) = layer
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (k, v)| if v[s] < acc.1 { (k, v[s]) } else { acc });
        values.push(value);
        policies.push(decode_sequence(best, &rules, depth));
    }
    Ok(ExhaustiveOptimum {
        values: ValueFunction(values),
        policies,
        sequences: layer.len(),
    })
}

fn enumerate_rules(model: &MarkovModel) -> Vec<StagePolicy> {
    let mut rules = vec![Vec::new()];
    for s in 0..model.num_states() {
        let mut extended = Vec::with_capacity(rules.len() * model.admissible(s).len());
        for partial in &rules {
            for &a in model.admissible(s) {
                let mut r: Vec<usize> = partial.clone();
                r.push(a);
                extended.push(r);
            }
        }
        rules = extended;
    }
    rules.into_iter().map(StagePolicy).collect()
}

fn decode_sequence(mut index: usize, rules: &[StagePolicy], depth: usize) -> Policy {
    // Stage 0 is the most significant digit.
    let mut stages = Vec::with_capacity(depth + 1);
    let total = rules.len().pow(depth as u32);
    let mut place = total;
    for _ in 0..=depth {
        let digit = index / place.max(1);
        index %= place.max(1);
        stages.push(rules[digit].clone());
        place /= rules.len();
    }
    Policy::finite(stages)
}

/// Classic expected-cost backward induction over stages `0..=horizon`.
pub fn risk_neutral_dp(model: &MarkovModel, horizon: usize) -> ValueFunction {
    let n = model.num_states();
    let beta = model.discount();
    let mut v = vec![0.0; n];
    for _ in 0..=horizon {
        let mut next = vec![0.0; n];
        for (s, slot) in next.iter_mut().enumerate() {
            let mut best = f64::INFINITY;
            for &a in model.admissible(s) {
                let mut expected = 0.0;
                for (p, targets) in successors(model, s, a) {
                    for (w, j) in targets {
                        expected += p * w * v[j];
                    }
                }
                best = best.min(model.cost(s, a) + beta * expected);
            }
            *slot = best;
        }
        v = next;
    }
    ValueFunction(v)
}

/// Discounted expected cost of `policy` from `start` by summing over every
/// path with its probability. Tabular models only.
pub fn path_sum_expectation(
    model: &MarkovModel,
    policy: &Policy,
    start: usize,
    depth: usize,
) -> Result<f64> {
    let Transition::Tabular { rows } = model.transition() else {
        return Err(domain("path enumeration needs a tabular model"));
    };
    let mut total = 0.0;
    // (state, stage, path probability, discount factor)
    let mut stack = vec![(start, 0usize, 1.0, 1.0)];
    let mut visited = 0usize;
    while let Some((s, stage, prob, disc)) = stack.pop() {
        visited += 1;
        if visited > TREE_NODE_BUDGET {
            return Err(Error::Resource {
                what: "enumerated paths",
                needed: visited as f64,
                budget: TREE_NODE_BUDGET as f64,
            });
        }
        let rule = policy
            .rule(stage)
            .ok_or_else(|| Error::InvalidPolicy(format!("no decision rule for stage {stage}")))?;
        let a = rule[s];
        total += prob * disc * model.cost(s, a);
        if stage < depth {
            for &(j, p) in &rows[s][a] {
                stack.push((j, stage + 1, prob * p, disc * model.discount()));
            }
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::risk::avar_primal;

    fn two_point() -> DiscreteDistribution {
        DiscreteDistribution::from_pairs(&[(0.0, 0.5), (10.0, 0.5)]).unwrap()
    }

    fn two_state() -> MarkovModel {
        let kernel = vec![
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        ];
        MarkovModel::tabular(kernel, vec![vec![1.0, 1.0], vec![0.0, 0.0]], 0.5).unwrap()
    }

    #[test]
    fn lp_examples() {
        assert!((avar_lp_oracle(0.25, &two_point()).unwrap() - 20.0 / 3.0).abs() < 1e-9);
        assert!((avar_lp_oracle(0.0, &two_point()).unwrap() - 5.0).abs() < 1e-9);
        let single = DiscreteDistribution::point(4.2);
        assert!((avar_lp_oracle(0.8, &single).unwrap() - 4.2).abs() < 1e-9);
        let big = fixtures::with_values(
            &fixtures::random_probs(&mut fixtures::rng(1), 13),
            &[1.0; 13],
        );
        assert!(matches!(avar_lp_oracle(0.5, &big), Err(Error::Resource { .. })));
    }

    #[test]
    fn lp_matches_primal_on_random() {
        let mut rng = fixtures::rng(7);
        for _ in 0..200 {
            let d = fixtures::random_distribution(&mut rng, 10, 20.0);
            for alpha in [0.0, 0.2, 0.5, 0.9] {
                let lp = avar_lp_oracle(alpha, &d).unwrap();
                let primal = avar_primal(alpha, &d).unwrap();
                assert!((lp - primal).abs() < 1e-9, "{lp} vs {primal}");
            }
        }
    }

    #[test]
    fn tree_depth_zero_is_stage_cost() {
        let m = two_state();
        let p = Policy::finite(vec![StagePolicy(vec![1, 0])]);
        assert_eq!(scenario_tree_value(&m, &RiskSpec::avar(0.4), &p, 0, 0).unwrap(), 1.0);
        assert_eq!(scenario_tree_value(&m, &RiskSpec::avar(0.4), &p, 1, 0).unwrap(), 0.0);
    }

    #[test]
    fn tree_one_level_avar() {
        // Both states jump uniformly; stage costs 3 and 10.
        let kernel = vec![vec![vec![0.5, 0.5]], vec![vec![0.5, 0.5]]];
        let m = MarkovModel::tabular(kernel, vec![vec![3.0], vec![10.0]], 0.5).unwrap();
        let p = Policy::stationary(StagePolicy(vec![0, 0]));
        let v = scenario_tree_value(&m, &RiskSpec::avar(0.5), &p, 0, 1).unwrap();
        // AV@R_0.5 of {3, 10} with equal weights is 10.
        assert!((v - (3.0 + 0.5 * 10.0)).abs() < 1e-12);
    }

    #[test]
    fn tree_expectation_matches_path_sum() {
        let mut rng = fixtures::rng(11);
        for _ in 0..10 {
            let m = fixtures::random_tabular(&mut rng, 3, 2, 0.8).unwrap();
            let p = fixtures::random_policy(&mut rng, &m, 4);
            for s in 0..3 {
                let tree = scenario_tree_value(&m, &RiskSpec::Expectation, &p, s, 4).unwrap();
                let paths = path_sum_expectation(&m, &p, s, 4).unwrap();
                assert!((tree - paths).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn tree_budget_is_enforced() {
        let m = fixtures::lq_model(0.5).unwrap();
        let p = Policy::stationary(StagePolicy::constant(m.num_states(), 4));
        let err = ScenarioTree::build(&m, &p, 20, 12).unwrap_err();
        assert!(matches!(err, Error::Resource { .. }));
    }

    #[test]
    fn exhaustive_trivial_and_two_state() {
        let m = two_state();
        let opt = exhaustive_policy_search(&m, &RiskSpec::Expectation, 3).unwrap();
        // Move to the free state immediately: 1 from s0, 0 from s1.
        assert_eq!(opt.values.0, vec![1.0, 0.0]);
        assert_eq!(opt.sequences, 4usize.pow(4));
        for (s, p) in opt.policies.iter().enumerate() {
            let v = scenario_tree_value(&m, &RiskSpec::Expectation, p, s, 3).unwrap();
            assert_eq!(v, opt.values[s]);
        }

        let one_action = MarkovModel::tabular(
            vec![vec![vec![0.5, 0.5]], vec![vec![0.5, 0.5]]],
            vec![vec![1.0], vec![2.0]],
            0.5,
        )
        .unwrap();
        let opt = exhaustive_policy_search(&one_action, &RiskSpec::avar(0.5), 2).unwrap();
        assert_eq!(opt.sequences, 1);
        let only = Policy::stationary(StagePolicy(vec![0, 0]));
        let v = crate::solver::evaluate_policy(&one_action, &RiskSpec::avar(0.5), &only, 2).unwrap();
        for s in 0..2 {
            assert!((opt.values[s] - v[s]).abs() < 1e-12);
        }
    }

    #[test]
    fn exhaustive_budget() {
        let mut rng = fixtures::rng(3);
        let m = fixtures::random_tabular(&mut rng, 4, 2, 0.5).unwrap();
        assert!(matches!(
            exhaustive_policy_search(&m, &RiskSpec::Expectation, 4),
            Err(Error::Resource { .. })
        ));
    }

    #[test]
    fn risk_neutral_examples() {
        let m = two_state();
        assert_eq!(risk_neutral_dp(&m, 10).0, vec![1.0, 0.0]);
        let zero = MarkovModel::tabular(
            vec![vec![vec![0.5, 0.5]], vec![vec![0.5, 0.5]]],
            vec![vec![0.0], vec![0.0]],
            0.5,
        )
        .unwrap();
        assert_eq!(risk_neutral_dp(&zero, 5).0, vec![0.0, 0.0]);
    }

    #[test]
    fn risk_neutral_lq_single_action() {
        // One zero action: J_0(x) = x^2 + beta * E[(clamp(x + xi))^2] at N = 1,
        // summed by hand over the noise atoms for on-grid successors.
        let mut p = fixtures::lq_params();
        p.actions = 1;
        p.noise_atoms = 2;
        p.grid_min = -4.0;
        p.grid_max = 4.0;
        p.grid_points = 801;
        let m = crate::model::build_lq(&p, 0.5).unwrap();
        let v = risk_neutral_dp(&m, 1);
        let q = 0.674_489_750_196_081_7f64;
        let h = 0.01;
        for &x in &[0.0, 1.0, -2.0] {
            let s = m.grid().nearest(x);
            let mut expected = x * x;
            for xi in [-q, q] {
                // Successor value is the linear interpolant of y^2 on the grid.
                let y: f64 = x + xi;
                let lo = (y / h).floor() * h;
                let t = (y - lo) / h;
                expected += 0.5 * 0.5 * ((1.0 - t) * lo * lo + t * (lo + h) * (lo + h));
            }
            assert!((v[s] - expected).abs() < 1e-9, "x = {x}: {} vs {expected}", v[s]);
        }
    }
}
