//! Built-in problem families and the solve/sweep drivers used by the CLI.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::model::{build_investment, build_lq, InvestmentParams, LqParams, MarkovModel, TabularDocument};
use crate::risk::RiskSpec;
use crate::solver::{
    investment_stage_bound, lq_stage_bound, solve_epsilon_optimal, SolveOptions, SolveReport,
    StagePolicy,
};

/// A model family together with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Problem {
    Investment(InvestmentParams),
    Lq(LqParams),
    Tabular(TabularDocument),
}

/// Numerical settings of a solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveSettings {
    pub epsilon: f64,
    pub tolerance: f64,
    pub max_sweeps: usize,
}

impl Problem {
    pub fn build(&self, discount: f64) -> Result<MarkovModel> {
        match self {
            Self::Investment(p) => build_investment(p, discount),
            Self::Lq(p) => build_lq(p, discount),
            Self::Tabular(doc) => doc.clone().into_model(discount),
        }
    }

    /// Initial state; tabular problems start in state 0.
    pub fn x0(&self) -> f64 {
        match self {
            Self::Investment(p) => p.x0,
            Self::Lq(p) => p.x0,
            Self::Tabular(_) => 0.0,
        }
    }

    /// Per-stage cost bound of the base policy, valid from every grid state.
    ///
    /// The LQ and investment bounds are evaluated at the grid point of largest
    /// magnitude, since the base policy may be entered anywhere on the grid.
    /// Tabular problems use the largest stage cost, which bounds any policy.
    pub fn tail_bound(&self, model: &MarkovModel, risk: &RiskSpec) -> f64 {
        let reach = model.grid().min().abs().max(model.grid().max().abs());
        match self {
            Self::Investment(_) => investment_stage_bound(reach),
            Self::Lq(p) => lq_stage_bound(reach, p.sigma, risk),
            Self::Tabular(_) => model.max_cost(),
        }
    }

    /// Zero action for the built-in families; tabular problems fall back to
    /// the greedy rule from value iteration.
    pub fn base_policy(&self, model: &MarkovModel) -> Option<StagePolicy> {
        match self {
            Self::Investment(_) | Self::Lq(_) => Some(StagePolicy::constant(
                model.num_states(),
                model.actions().nearest(0.0),
            )),
            Self::Tabular(_) => None,
        }
    }

    pub fn solve(
        &self,
        model: &MarkovModel,
        risk: &RiskSpec,
        settings: &SolveSettings,
    ) -> Result<SolveReport> {
        risk.validate()?;
        let opts = SolveOptions {
            epsilon: settings.epsilon,
            tolerance: settings.tolerance,
            max_sweeps: settings.max_sweeps,
            tail_bound: self.tail_bound(model, risk),
            base_policy: self.base_policy(model),
        };
        solve_epsilon_optimal(model, risk, &opts)
    }
}

/// Risk parameter varied by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    /// AV@R level.
    Alpha,
    /// Mean-deviation coefficient.
    Kappa,
}

impl SweepParam {
    pub fn risk(self, value: f64) -> RiskSpec {
        match self {
            Self::Alpha => RiskSpec::avar(value),
            Self::Kappa => RiskSpec::mean_deviation(value),
        }
    }
}

impl std::str::FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "alpha" => Ok(Self::Alpha),
            "kappa" => Ok(Self::Kappa),
            other => Err(domain(format!(
                "unknown sweep parameter '{other}' (expected alpha or kappa)"
            ))),
        }
    }
}

/// One re-solve of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub param: f64,
    /// Converged value at the initial state.
    pub value: f64,
    pub n0: usize,
    pub sweeps: usize,
}

/// Re-solves `problem` for every parameter value. All risk specs are
/// validated before any solve starts.
pub fn sweep(
    problem: &Problem,
    model: &MarkovModel,
    param: SweepParam,
    values: &[f64],
    settings: &SolveSettings,
) -> Result<Vec<SweepRow>> {
    let risks = values
        .iter()
        .map(|&v| {
            let risk = param.risk(v);
            risk.validate().map(|_| risk)
        })
        .collect::<Result<Vec<_>>>()?;
    let x0 = problem.x0();
    risks
        .iter()
        .zip(values)
        .map(|(risk, &v)| {
            let report = problem.solve(model, risk, settings)?;
            Ok(SweepRow {
                param: v,
                value: model.grid().interpolate(&report.converged_value, x0),
                n0: report.horizon,
                sweeps: report.residuals.len(),
            })
        })
        .collect()
}

/// First row whose value drops below its predecessor by more than `slack`,
/// or `None` when the sweep is nondecreasing.
pub fn first_decrease(rows: &[SweepRow], slack: f64) -> Option<usize> {
    rows.windows(2)
        .position(|w| w[1].value < w[0].value - slack)
        .map(|i| i + 1)
}
