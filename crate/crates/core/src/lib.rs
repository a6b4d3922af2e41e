//! Risk-averse dynamic programming for discounted, infinite-horizon
//! controlled Markov models with nonnegative costs.
//!
//! The objective is the nested risk of the cost stream,
//! `c_0 + beta * rho(c_1 + beta * rho(c_2 + ...))`, where `rho` is a coherent
//! one-step risk mapping (expectation, AV@R, mean-deviation, or a Kusuoka
//! mixture of AV@Rs). The crate provides:
//!
//! - [`risk`]: primal and dual evaluators for the supported risk measures;
//! - [`model`]: finite-grid Markov models, including the investment and LQ
//!   regulator examples;
//! - [`solver`]: the robust Bellman operator, backward induction, value
//!   iteration, and the epsilon-optimal truncation scheme;
//! - [`oracle`]: brute-force cross-checks used by the test suites;
//! - [`verify`]: seeded agreement suites built on the oracles.

pub mod error;
pub mod fixtures;
pub mod model;
pub mod oracle;
pub mod problem;
pub mod risk;
pub mod solver;
pub mod verify;

pub use error::{Error, Result};
pub use model::{
    build_investment, build_lq, quantize_standard_normal, ActionSet, InvestmentParams, LqParams,
    MarkovModel, StateGrid, TabularDocument, Transition,
};
pub use problem::{sweep, Problem, SolveSettings, SweepParam, SweepRow};
pub use risk::{
    avar_dual, avar_primal, evaluate, kusuoka_evaluate, mean_deviation_dual,
    mean_deviation_primal, value_at_risk, Atom, DiscreteDistribution, DualDensity, DualSolution,
    Mixture, RiskSpec,
};
pub use solver::{
    assemble_epsilon_policy, backward_induct, bellman_update, epsilon_horizon, evaluate_policy,
    solve_epsilon_optimal, supersolution_check, value_iterate, EpsilonHorizon, FiniteHorizon,
    Policy, SolveOptions, SolveReport, StagePolicy, ValueFunction, ValueIteration,
};
