//! Robust dynamic programming under a nested one-step risk mapping.
//!
//! The Bellman operator
//!
//! ```text
//! (T v)(x) = min_{a in A(x)} { c(x, a) + beta * rho( v(X') | x, a ) }
//! ```
//!
//! applies the static risk measure to the successor distribution of each
//! (state, action) pair. With nonnegative costs and a coherent `rho`, the
//! iterates `T^N 0` increase monotonically to the infinite-horizon value, and
//! `T` is a `beta`-contraction in the sup norm, which gives the stopping rule
//! used by [`value_iterate`].

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::model::MarkovModel;
use crate::risk::{evaluate, RiskSpec};

/// Slack allowed when asserting that Bellman iterates do not decrease.
pub const MONOTONE_SLACK: f64 = 1e-12;

/// Values on the state grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ValueFunction(pub Vec<f64>);

impl ValueFunction {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for ValueFunction {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Deterministic decision rule: an action index for every state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StagePolicy(pub Vec<usize>);

impl StagePolicy {
    /// The rule that picks `action` everywhere.
    pub fn constant(num_states: usize, action: usize) -> Self {
        Self(vec![action; num_states])
    }
}

impl Deref for StagePolicy {
    type Target = [usize];

    fn deref(&self) -> &[usize] {
        &self.0
    }
}

/// A Markov policy: explicit rules for the first stages, then an optional
/// stationary rule for every later stage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Policy {
    pub stages: Vec<StagePolicy>,
    pub tail: Option<StagePolicy>,
}

impl Policy {
    pub fn stationary(rule: StagePolicy) -> Self {
        Self {
            stages: Vec::new(),
            tail: Some(rule),
        }
    }

    pub fn finite(stages: Vec<StagePolicy>) -> Self {
        Self { stages, tail: None }
    }

    /// Decision rule used at `stage`, if the policy defines one.
    pub fn rule(&self, stage: usize) -> Option<&StagePolicy> {
        self.stages.get(stage).or(self.tail.as_ref())
    }

    /// Checks that the rules for stages `0..=horizon` exist and are admissible.
    pub fn check(&self, model: &MarkovModel, horizon: usize) -> Result<()> {
        let explicit = self.stages.len().min(horizon + 1);
        let rules = self.stages[..explicit]
            .iter()
            .enumerate()
            .chain(self.tail.iter().map(|t| (explicit, t)));
        for (stage, rule) in rules {
            check_rule(model, rule, stage)?;
        }
        if self.stages.len() <= horizon && self.tail.is_none() {
            return Err(Error::InvalidPolicy(format!(
                "no decision rule for stage {}",
                self.stages.len()
            )));
        }
        Ok(())
    }
}

fn check_rule(model: &MarkovModel, rule: &StagePolicy, stage: usize) -> Result<()> {
    if rule.len() != model.num_states() {
        return Err(Error::InvalidPolicy(format!(
            "stage {stage} rule covers {} states, model has {}",
            rule.len(),
            model.num_states()
        )));
    }
    for (s, &a) in rule.iter().enumerate() {
        if !model.is_admissible(s, a) {
            return Err(Error::InvalidPolicy(format!(
                "stage {stage} picks inadmissible action {a} in state {s}"
            )));
        }
    }
    Ok(())
}

/// `c(s, a) + beta * rho(v_next(X') | s, a)`.
pub fn q_value(
    model: &MarkovModel,
    risk: &RiskSpec,
    state: usize,
    action: usize,
    v_next: &[f64],
) -> Result<f64> {
    let succ = model.successor_distribution(state, action, v_next)?;
    Ok(model.cost(state, action) + model.discount() * evaluate(risk, &succ)?)
}

/// One application of the robust Bellman operator. Ties in the minimization
/// go to the lowest action index.
pub fn bellman_update(
    model: &MarkovModel,
    risk: &RiskSpec,
    v_next: &[f64],
) -> Result<(ValueFunction, StagePolicy)> {
    risk.validate()?;
    let n = model.num_states();
    let mut values = Vec::with_capacity(n);
    let mut rule = Vec::with_capacity(n);
    for s in 0..n {
        let mut best = f64::INFINITY;
        let mut arg = usize::MAX;
        for &a in model.admissible(s) {
            let q = q_value(model, risk, s, a, v_next)?;
            if q < best || (q == best && a < arg) {
                best = q;
                arg = a;
            }
        }
        values.push(best);
        rule.push(arg);
    }
    Ok((ValueFunction(values), StagePolicy(rule)))
}

/// Stage values `J_0..=J_N` and minimizing rules of a finite-horizon problem
/// with zero terminal value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteHorizon {
    /// `values[n]` is `J_n`.
    pub values: Vec<ValueFunction>,
    /// `policies[n]` attains the minimum in `J_n`.
    pub policies: Vec<StagePolicy>,
}

impl FiniteHorizon {
    pub fn initial_value(&self) -> &ValueFunction {
        &self.values[0]
    }
}

/// Backward induction over stages `N, N-1, ..., 0` starting from
/// `J_{N+1} = 0`.
pub fn backward_induct(model: &MarkovModel, risk: &RiskSpec, horizon: usize) -> Result<FiniteHorizon> {
    let mut v = ValueFunction::zeros(model.num_states());
    let mut values = Vec::with_capacity(horizon + 1);
    let mut policies = Vec::with_capacity(horizon + 1);
    for _ in 0..=horizon {
        let (next, rule) = bellman_update(model, risk, &v)?;
        values.push(next.clone());
        policies.push(rule);
        v = next;
    }
    values.reverse();
    policies.reverse();
    Ok(FiniteHorizon { values, policies })
}

/// Trace of monotone value iteration from the zero function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueIteration {
    /// Iterates `v_0 = 0, v_1 = T v_0, ...`.
    pub values_per_iteration: Vec<ValueFunction>,
    /// `residuals[k] = max_x (v_{k+1}(x) - v_k(x))`.
    pub residuals: Vec<f64>,
    pub converged_value: ValueFunction,
    /// Greedy rule from the last sweep.
    pub policy: StagePolicy,
}

impl ValueIteration {
    pub fn sweeps(&self) -> usize {
        self.residuals.len()
    }

    /// Sup-norm error bound `residual * beta / (1 - beta)` of the last iterate.
    pub fn error_bound(&self, discount: f64) -> f64 {
        self.residuals.last().copied().unwrap_or(f64::INFINITY) * discount / (1.0 - discount)
    }
}

/// Iterates the Bellman operator from zero until
/// `residual * beta / (1 - beta) < tol` or `max_sweeps` is reached.
pub fn value_iterate(
    model: &MarkovModel,
    risk: &RiskSpec,
    tol: f64,
    max_sweeps: usize,
) -> Result<ValueIteration> {
    if !(tol > 0.0) {
        return Err(domain(format!("tolerance {tol} must be positive")));
    }
    let beta = model.discount();
    let mut v = ValueFunction::zeros(model.num_states());
    let mut values_per_iteration = vec![v.clone()];
    let mut residuals = Vec::new();
    for sweep in 1..=max_sweeps {
        let (next, rule) = bellman_update(model, risk, &v)?;
        let mut residual: f64 = 0.0;
        for (s, (&old, &new)) in v.iter().zip(next.iter()).enumerate() {
            if new < old - MONOTONE_SLACK * (1.0 + old.abs()) {
                return Err(Error::NonMonotone {
                    sweep,
                    state: s,
                    previous: old,
                    current: new,
                });
            }
            residual = residual.max((new - old).abs());
        }
        residuals.push(residual);
        values_per_iteration.push(next.clone());
        v = next;
        if residual * beta / (1.0 - beta) < tol {
            return Ok(ValueIteration {
                values_per_iteration,
                residuals,
                converged_value: v,
                policy: rule,
            });
        }
    }
    Err(Error::NotConverged {
        sweeps: max_sweeps,
        residual: residuals.last().copied().unwrap_or(f64::INFINITY),
    })
}

/// Truncation horizon of the epsilon scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonHorizon {
    pub n0: usize,
    /// `c_bar * beta^(n0 + 1) / (1 - beta)`, strictly below epsilon.
    pub tail: f64,
}

/// Smallest `N0` with `c_bar * beta^(N0 + 1) / (1 - beta) < epsilon`, where
/// `c_bar` bounds the per-stage cost of the base policy used after `N0`.
pub fn epsilon_horizon(c_bar: f64, discount: f64, epsilon: f64) -> Result<EpsilonHorizon> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(domain(format!("epsilon {epsilon} must be positive")));
    }
    if !(c_bar >= 0.0 && c_bar.is_finite()) {
        return Err(domain(format!("tail bound {c_bar} must be finite and >= 0")));
    }
    if !(discount > 0.0 && discount < 1.0) {
        return Err(domain(format!("discount {discount} must lie in (0, 1)")));
    }
    let mut n0 = 0;
    let mut tail = c_bar * discount / (1.0 - discount);
    while tail >= epsilon {
        n0 += 1;
        tail *= discount;
    }
    Ok(EpsilonHorizon { n0, tail })
}

/// Follows the DP rules for stages `0..=n0` and `base` afterwards.
pub fn assemble_epsilon_policy(
    dp_policies: &[StagePolicy],
    n0: usize,
    base: StagePolicy,
) -> Result<Policy> {
    if dp_policies.len() <= n0 {
        return Err(Error::InvalidPolicy(format!(
            "DP rules cover stages 0..{}, stage {n0} is missing",
            dp_policies.len()
        )));
    }
    Ok(Policy {
        stages: dp_policies[..=n0].to_vec(),
        tail: Some(base),
    })
}

/// Nested value of a fixed policy over stages `0..=horizon`:
/// `W_{N+1} = 0`, `W_n(x) = c(x, pi_n(x)) + beta * rho(W_{n+1}(X'))`.
pub fn evaluate_policy(
    model: &MarkovModel,
    risk: &RiskSpec,
    policy: &Policy,
    horizon: usize,
) -> Result<ValueFunction> {
    risk.validate()?;
    policy.check(model, horizon)?;
    let mut w = ValueFunction::zeros(model.num_states());
    for stage in (0..=horizon).rev() {
        let rule = policy.rule(stage).expect("checked above");
        let next = (0..model.num_states())
            .map(|s| q_value(model, risk, s, rule[s], &w))
            .collect::<Result<Vec<_>>>()?;
        w = ValueFunction(next);
    }
    Ok(w)
}

/// `true` iff `v >= T v` pointwise, which certifies `v >= V*`.
pub fn supersolution_check(v: &[f64], model: &MarkovModel, risk: &RiskSpec) -> Result<bool> {
    let (tv, _) = bellman_update(model, risk, v)?;
    Ok(v
        .iter()
        .zip(tv.iter())
        .all(|(&x, &y)| x >= y - MONOTONE_SLACK * (1.0 + y.abs())))
}

/// Inputs of the epsilon-optimal solve pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub epsilon: f64,
    pub tolerance: f64,
    pub max_sweeps: usize,
    /// Per-stage cost bound `c_bar` of the base policy.
    pub tail_bound: f64,
    /// Rule followed after the truncation horizon; the greedy rule from value
    /// iteration when absent.
    pub base_policy: Option<StagePolicy>,
}

/// Result of the epsilon-optimal solve pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub values_per_iteration: Vec<ValueFunction>,
    pub residuals: Vec<f64>,
    /// Truncation horizon `N0`.
    pub horizon: usize,
    pub epsilon: f64,
    pub tail_bound: f64,
    pub policy: Policy,
    pub converged_value: ValueFunction,
}

/// Value iteration for `V*`, then backward induction to the truncation
/// horizon and concatenation with the base policy.
pub fn solve_epsilon_optimal(
    model: &MarkovModel,
    risk: &RiskSpec,
    opts: &SolveOptions,
) -> Result<SolveReport> {
    if let Some(base) = &opts.base_policy {
        check_rule(model, base, 0)?;
    }
    let horizon = epsilon_horizon(opts.tail_bound, model.discount(), opts.epsilon)?;
    let vi = value_iterate(model, risk, opts.tolerance, opts.max_sweeps)?;
    let dp = backward_induct(model, risk, horizon.n0)?;
    let base = opts.base_policy.clone().unwrap_or_else(|| vi.policy.clone());
    let policy = assemble_epsilon_policy(&dp.policies, horizon.n0, base)?;
    Ok(SolveReport {
        values_per_iteration: vi.values_per_iteration,
        residuals: vi.residuals,
        horizon: horizon.n0,
        epsilon: opts.epsilon,
        tail_bound: opts.tail_bound,
        policy,
        converged_value: vi.converged_value,
    })
}

/// Per-stage bound `2 x0^2 + 2 sigma^2 cap` for the zero policy of the LQ
/// regulator, where `cap` bounds the dual densities of `risk`.
pub fn lq_stage_bound(x0: f64, sigma: f64, risk: &RiskSpec) -> f64 {
    2.0 * x0 * x0 + 2.0 * sigma * sigma * risk.density_cap()
}

/// Per-stage bound `x0` for the all-riskless investment policy.
pub fn investment_stage_bound(x0: f64) -> f64 {
    x0
}
