//! Seeded oracle-agreement suites.
//!
//! Each suite compares a production route against an independent oracle on
//! generated instances and keeps the first disagreement as a serializable
//! counterexample.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fixtures;
use crate::model::MarkovModel;
use crate::oracle::{self, POLICY_BUDGET};
use crate::risk::{self, DiscreteDistribution, RiskSpec};
use crate::solver::{self, Policy};

/// Absolute agreement tolerance of every suite.
pub const AGREEMENT_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Depth of the policy-enumeration and scenario-tree suites.
    pub depth: usize,
    pub risk: RiskSpec,
    /// Extra model checked against the risk-neutral oracle.
    pub model: Option<MarkovModel>,
    pub distributions: usize,
    pub models: usize,
    /// Multiplies the oracle's density caps. Anything other than 1 corrupts
    /// the oracle and must make the suites fail.
    pub cap_scale: f64,
}

impl VerifyOptions {
    pub fn new(seed: u64, depth: usize, risk: RiskSpec) -> Self {
        Self {
            seed,
            depth,
            risk,
            model: None,
            distributions: 500,
            models: 50,
            cap_scale: 1.0,
        }
    }
}

/// Instance on which a suite disagreed with its oracle.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Counterexample {
    Distribution {
        parameter: f64,
        distribution: DiscreteDistribution,
        expected: f64,
        actual: f64,
    },
    Model {
        model: Box<MarkovModel>,
        risk: RiskSpec,
        depth: usize,
        state: usize,
        policy: Option<Policy>,
        expected: f64,
        actual: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteOutcome {
    pub name: &'static str,
    pub cases: usize,
    pub max_error: f64,
    pub counterexample: Option<Counterexample>,
}

impl SuiteOutcome {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            cases: 0,
            max_error: 0.0,
            counterexample: None,
        }
    }

    pub fn passed(&self) -> bool {
        self.counterexample.is_none()
    }

    fn record(&mut self, expected: f64, actual: f64, counterexample: impl FnOnce() -> Counterexample) {
        self.cases += 1;
        let err = (expected - actual).abs();
        if err.is_nan() || err > AGREEMENT_TOL {
            if self.counterexample.is_none() {
                self.counterexample = Some(counterexample());
            }
        }
        if !err.is_nan() {
            self.max_error = self.max_error.max(err);
        } else {
            self.max_error = f64::INFINITY;
        }
    }
}

/// Fails with a resource error when the configured depth would overrun the
/// enumeration budget.
pub fn check_budget(opts: &VerifyOptions) -> Result<()> {
    // Fixtures have 4 states with 2 actions each: 16 rules per stage.
    let needed = 16f64.powi(opts.depth as i32 + 1);
    if needed > POLICY_BUDGET {
        return Err(Error::Resource {
            what: "policy sequences",
            needed,
            budget: POLICY_BUDGET,
        });
    }
    Ok(())
}

pub fn run(opts: &VerifyOptions) -> Result<Vec<SuiteOutcome>> {
    check_budget(opts)?;
    opts.risk.validate()?;
    Ok(vec![
        avar_suite(opts)?,
        mean_deviation_suite(opts)?,
        exhaustive_suite(opts)?,
        scenario_tree_suite(opts)?,
        risk_neutral_suite(opts)?,
    ])
}

fn avar_suite(opts: &VerifyOptions) -> Result<SuiteOutcome> {
    let mut out = SuiteOutcome::new("avar primal = dual = LP");
    let mut rng = fixtures::rng(opts.seed);
    for _ in 0..opts.distributions {
        let d = fixtures::random_distribution(&mut rng, 10, 10.0);
        for alpha in (0..10).map(|i| i as f64 / 10.0) {
            let primal = risk::avar_primal(alpha, &d)?;
            let dual = risk::avar_dual(alpha, &d)?.value;
            let lp = oracle::avar_lp_oracle_with_cap(opts.cap_scale / (1.0 - alpha), &d)?;
            for actual in [dual, lp] {
                out.record(primal, actual, || Counterexample::Distribution {
                    parameter: alpha,
                    distribution: d.clone(),
                    expected: primal,
                    actual,
                });
            }
        }
    }
    Ok(out)
}

fn mean_deviation_suite(opts: &VerifyOptions) -> Result<SuiteOutcome> {
    let mut out = SuiteOutcome::new("mean-deviation primal = dual");
    let mut rng = fixtures::rng(opts.seed.wrapping_add(1));
    for _ in 0..opts.distributions {
        let d = fixtures::random_distribution(&mut rng, 10, 10.0);
        for kappa in [0.0, 0.25, 0.5] {
            let primal = risk::mean_deviation_primal(kappa, &d)?;
            let (dual, _) = risk::mean_deviation_dual(kappa, &d)?;
            out.record(primal, dual.value, || Counterexample::Distribution {
                parameter: kappa,
                distribution: d.clone(),
                expected: primal,
                actual: dual.value,
            });
        }
    }
    Ok(out)
}

fn exhaustive_suite(opts: &VerifyOptions) -> Result<SuiteOutcome> {
    let mut out = SuiteOutcome::new("backward induction = exhaustive search");
    let mut rng = fixtures::rng(opts.seed.wrapping_add(2));
    for _ in 0..opts.models {
        let model = fixtures::random_tabular(&mut rng, 4, 2, 0.8)?;
        let dp = solver::backward_induct(&model, &opts.risk, opts.depth)?;
        let brute = oracle::exhaustive_with_cap(&model, &opts.risk, opts.depth, opts.cap_scale)?;
        for s in 0..model.num_states() {
            let (expected, actual) = (brute.values[s], dp.initial_value()[s]);
            out.record(expected, actual, || Counterexample::Model {
                model: Box::new(model.clone()),
                risk: opts.risk.clone(),
                depth: opts.depth,
                state: s,
                policy: Some(brute.policies[s].clone()),
                expected,
                actual,
            });
        }
    }
    Ok(out)
}

fn scenario_tree_suite(opts: &VerifyOptions) -> Result<SuiteOutcome> {
    let mut out = SuiteOutcome::new("evaluate_policy = scenario tree");
    let mut rng = fixtures::rng(opts.seed.wrapping_add(3));
    for _ in 0..opts.models {
        let model = fixtures::random_tabular(&mut rng, 4, 2, 0.8)?;
        let policy = fixtures::random_policy(&mut rng, &model, opts.depth);
        let w = solver::evaluate_policy(&model, &opts.risk, &policy, opts.depth)?;
        for s in 0..model.num_states() {
            let tree = oracle::scenario_tree_value(&model, &opts.risk, &policy, s, opts.depth)?;
            out.record(tree, w[s], || Counterexample::Model {
                model: Box::new(model.clone()),
                risk: opts.risk.clone(),
                depth: opts.depth,
                state: s,
                policy: Some(policy.clone()),
                expected: tree,
                actual: w[s],
            });
        }
    }
    Ok(out)
}

fn risk_neutral_suite(opts: &VerifyOptions) -> Result<SuiteOutcome> {
    let mut out = SuiteOutcome::new("expectation DP = risk-neutral DP");
    let mut rng = fixtures::rng(opts.seed.wrapping_add(4));
    let mut models = Vec::new();
    for _ in 0..opts.models {
        models.push(fixtures::random_tabular(&mut rng, 4, 2, 0.8)?);
    }
    models.extend(opts.model.clone());
    for model in &models {
        let dp = solver::backward_induct(model, &RiskSpec::Expectation, opts.depth)?;
        let plain = oracle::risk_neutral_dp(model, opts.depth);
        for s in 0..model.num_states() {
            let (expected, actual) = (plain[s], dp.initial_value()[s]);
            out.record(expected, actual, || Counterexample::Model {
                model: Box::new(model.clone()),
                risk: RiskSpec::Expectation,
                depth: opts.depth,
                state: s,
                policy: None,
                expected,
                actual,
            });
        }
    }
    Ok(out)
}
