//! Acceptance criteria. Each criterion prints one PASS/FAIL line; the test
//! fails if any criterion fails.
//!
//! Run with `cargo test -p riskdp --test acceptance -- --nocapture` to see
//! the table.

use std::time::{Duration, Instant};

use rand::Rng;
use riskdp::fixtures::{self, FixtureRng};
use riskdp::oracle::{avar_lp_oracle, exhaustive_policy_search, risk_neutral_dp, scenario_tree_value};
use riskdp::problem::first_decrease;
use riskdp::solver::{investment_stage_bound, lq_stage_bound};
use riskdp::{
    assemble_epsilon_policy, avar_dual, avar_primal, backward_induct, build_investment, build_lq,
    epsilon_horizon, evaluate, evaluate_policy, mean_deviation_dual, mean_deviation_primal, sweep,
    value_iterate, DiscreteDistribution, InvestmentParams, LqParams, MarkovModel, Policy, Problem,
    RiskSpec, SolveSettings, StagePolicy, SweepParam,
};

const EQ_TOL: f64 = 1e-9;
const MONO_SLACK: f64 = 1e-12;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(limit: Duration, elapsed: Duration, what: &str) -> Result<(), String> {
    ensure(elapsed < limit, || {
        format!("{what} took {elapsed:.2?}, limit {limit:?}")
    })
}

fn axiom_specs() -> Vec<RiskSpec> {
    let mut specs = vec![RiskSpec::Expectation];
    specs.extend((0..10).map(|i| RiskSpec::avar(i as f64 / 10.0)));
    specs.extend([0.0, 0.25, 0.5].map(RiskSpec::mean_deviation));
    specs.extend(fixtures::kusuoka_families());
    specs
}

fn rho(spec: &RiskSpec, probs: &[f64], values: &[f64]) -> f64 {
    evaluate(spec, &fixtures::with_values(probs, values)).unwrap()
}

/// 1. Coherence axioms on random distributions.
fn risk_axioms() -> Outcome {
    let start = Instant::now();
    let mut rng = fixtures::rng(1);
    let specs = axiom_specs();
    let mut checks = 0usize;
    for _ in 0..1000 {
        let n = rng.gen_range(1..=16);
        let probs = fixtures::random_probs(&mut rng, n);
        let x = fixtures::random_values(&mut rng, n, 10.0);
        let y = fixtures::random_values(&mut rng, n, 10.0);
        let bumped: Vec<f64> = x.iter().map(|v| v + rng.gen_range(0.0..5.0)).collect();
        let c = rng.gen_range(-10.0..10.0);
        for spec in &specs {
            let rx = rho(spec, &probs, &x);
            let ry = rho(spec, &probs, &y);
            for lambda in [0.0, 0.25, 0.5, 0.75, 1.0] {
                let mix: Vec<f64> = x.iter().zip(&y).map(|(a, b)| lambda * a + (1.0 - lambda) * b).collect();
                let lhs = rho(spec, &probs, &mix);
                ensure(lhs <= lambda * rx + (1.0 - lambda) * ry + EQ_TOL, || {
                    format!("convexity fails for {spec} at lambda {lambda}: {lhs} > {}", lambda * rx + (1.0 - lambda) * ry)
                })?;
            }
            let rb = rho(spec, &probs, &bumped);
            ensure(rx <= rb + EQ_TOL, || format!("monotonicity fails for {spec}: {rx} > {rb}"))?;
            let shifted: Vec<f64> = x.iter().map(|v| v + c).collect();
            let rs = rho(spec, &probs, &shifted);
            ensure((rs - (rx + c)).abs() <= EQ_TOL, || {
                format!("translation fails for {spec}: {rs} vs {}", rx + c)
            })?;
            for beta in [0.0, 0.5, 2.0] {
                let scaled: Vec<f64> = x.iter().map(|v| beta * v).collect();
                let r = rho(spec, &probs, &scaled);
                ensure((r - beta * rx).abs() <= EQ_TOL, || {
                    format!("homogeneity fails for {spec} at {beta}: {r} vs {}", beta * rx)
                })?;
            }
            checks += 11;
        }
    }
    within(Duration::from_secs(5), start.elapsed(), "axiom suite")?;
    Ok(format!("{checks} checks over {} specs in {:.2?}", specs.len(), start.elapsed()))
}

/// 2. Primal, greedy dual and LP vertex enumeration agree.
fn primal_dual_lp() -> Outcome {
    let start = Instant::now();
    let mut rng = fixtures::rng(2);
    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let d = fixtures::random_distribution(&mut rng, 10, 10.0);
        for alpha in (0..10).map(|i| i as f64 / 10.0) {
            let p = avar_primal(alpha, &d).unwrap();
            let g = avar_dual(alpha, &d).unwrap().value;
            let lp = avar_lp_oracle(alpha, &d).unwrap();
            worst = worst.max((p - g).abs()).max((p - lp).abs());
            ensure((p - g).abs() <= EQ_TOL && (p - lp).abs() <= EQ_TOL, || {
                format!("alpha {alpha}: primal {p}, dual {g}, LP {lp} on {d:?}")
            })?;
        }
        for kappa in [0.0, 0.25, 0.5] {
            let p = mean_deviation_primal(kappa, &d).unwrap();
            let (dual, _) = mean_deviation_dual(kappa, &d).unwrap();
            worst = worst.max((p - dual.value).abs());
            ensure((p - dual.value).abs() <= EQ_TOL, || {
                format!("kappa {kappa}: primal {p}, dual {} on {d:?}", dual.value)
            })?;
        }
    }
    within(Duration::from_secs(5), start.elapsed(), "agreement suite")?;
    Ok(format!("max gap {worst:.1e} in {:.2?}", start.elapsed()))
}

/// `E + kappa * E|Z - E|` without the coefficient range check.
fn unchecked_mean_deviation(kappa: f64, probs: &[f64], values: &[f64]) -> f64 {
    let mean: f64 = probs.iter().zip(values).map(|(p, v)| p * v).sum();
    let dev: f64 = probs.iter().zip(values).map(|(p, v)| p * (v - mean).abs()).sum();
    mean + kappa * dev
}

fn ordered_pair(rng: &mut FixtureRng) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = rng.gen_range(2..=6);
    let probs = fixtures::random_probs(rng, n);
    let x = fixtures::random_values(rng, n, 10.0);
    let y = x
        .iter()
        .map(|v| if rng.gen_bool(0.5) { v + rng.gen_range(0.0..10.0) } else { *v })
        .collect();
    (probs, x, y)
}

/// 3. Mean-deviation is monotone exactly up to kappa = 1/2.
fn mean_deviation_boundary() -> Outcome {
    let mut rng = fixtures::rng(3);
    for kappa in [0.0, 0.25, 0.5] {
        for _ in 0..1000 {
            let (probs, x, y) = ordered_pair(&mut rng);
            let rx = mean_deviation_primal(kappa, &fixtures::with_values(&probs, &x)).unwrap();
            let ry = mean_deviation_primal(kappa, &fixtures::with_values(&probs, &y)).unwrap();
            ensure(rx <= ry + EQ_TOL, || format!("kappa {kappa}: {rx} > {ry}"))?;
        }
    }
    let mut found = None;
    for trial in 1..=100_000 {
        let (probs, x, y) = ordered_pair(&mut rng);
        let (rx, ry) = (
            unchecked_mean_deviation(1.0, &probs, &x),
            unchecked_mean_deviation(1.0, &probs, &y),
        );
        if rx > ry + EQ_TOL {
            found = Some((trial, rx, ry));
            break;
        }
    }
    let (trial, rx, ry) = found.ok_or("no monotonicity violation found at kappa = 1")?;
    ensure(
        mean_deviation_primal(1.0, &DiscreteDistribution::point(0.0)).is_err(),
        || "kappa = 1 must be rejected by the checked evaluator".into(),
    )?;
    Ok(format!("3000 ordered pairs clean; kappa = 1 violated at trial {trial} ({rx:.3} > {ry:.3})"))
}

/// 4. Backward induction equals exhaustive policy search.
fn dp_vs_exhaustive() -> Outcome {
    let start = Instant::now();
    let mut rng = fixtures::rng(4);
    let risks = [RiskSpec::Expectation, RiskSpec::avar(0.3), RiskSpec::mean_deviation(0.4)];
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let model = fixtures::random_tabular(&mut rng, 4, 2, 0.8).unwrap();
        for risk in &risks {
            let dp = backward_induct(&model, risk, 3).unwrap();
            let brute = exhaustive_policy_search(&model, risk, 3).unwrap();
            for s in 0..4 {
                let gap = (dp.initial_value()[s] - brute.values[s]).abs();
                worst = worst.max(gap);
                ensure(gap <= EQ_TOL, || {
                    format!("{risk}, state {s}: DP {} vs exhaustive {}", dp.initial_value()[s], brute.values[s])
                })?;
            }
        }
    }
    within(Duration::from_secs(30), start.elapsed(), "exhaustive comparison")?;
    Ok(format!("150 instances, max gap {worst:.1e} in {:.2?}", start.elapsed()))
}

/// 5. Nested policy evaluation equals explicit scenario-tree evaluation.
fn nested_evaluation() -> Outcome {
    let mut rng = fixtures::rng(5);
    let mut worst: f64 = 0.0;
    for i in 0..50 {
        let depth = 1 + i % 5;
        let risk = match i % 3 {
            0 => RiskSpec::Expectation,
            1 => RiskSpec::avar(0.3),
            _ => RiskSpec::mean_deviation(0.4),
        };
        let model = fixtures::random_tabular(&mut rng, 4, 2, 0.8).unwrap();
        let policy = fixtures::random_policy(&mut rng, &model, depth);
        let w = evaluate_policy(&model, &risk, &policy, depth).unwrap();
        for s in 0..4 {
            let tree = scenario_tree_value(&model, &risk, &policy, s, depth).unwrap();
            worst = worst.max((tree - w[s]).abs());
            ensure((tree - w[s]).abs() <= EQ_TOL, || {
                format!("{risk}, depth {depth}, state {s}: evaluate_policy {} vs tree {tree}", w[s])
            })?;
        }
    }
    Ok(format!("50 pairs, depths 1..=5, max gap {worst:.1e}"))
}

fn lq_fixture() -> MarkovModel {
    fixtures::lq_model(0.5).unwrap()
}

/// 6. Finite-horizon values increase with the horizon; value iteration
/// converges quickly.
fn monotone_value_iteration() -> Outcome {
    let model = lq_fixture();
    let risk = RiskSpec::avar(0.5);
    let mut previous = backward_induct(&model, &risk, 0).unwrap().initial_value().clone();
    for n in 1..=40 {
        let current = backward_induct(&model, &risk, n).unwrap().initial_value().clone();
        for (s, (a, b)) in previous.iter().zip(current.iter()).enumerate() {
            ensure(*b >= a - MONO_SLACK, || format!("V_0,{n}[{s}] = {b} < V_0,{}[{s}] = {a}", n - 1))?;
        }
        previous = current;
    }
    let start = Instant::now();
    let vi = value_iterate(&model, &risk, 1e-6, 99).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    within(Duration::from_secs(5), elapsed, "value iteration")?;
    let bound = vi.error_bound(model.discount());
    ensure(bound < 1e-6, || format!("error bound {bound}"))?;
    Ok(format!("N = 0..40 nondecreasing; VI stopped after {} sweeps, bound {bound:.1e}, {elapsed:.2?}", vi.sweeps()))
}

/// 7. The assembled policy is epsilon-optimal at every grid state.
fn epsilon_optimal_assembly() -> Outcome {
    let model = lq_fixture();
    let risk = RiskSpec::avar(0.5);
    let epsilon = 0.1;
    let reach = model.grid().max().abs().max(model.grid().min().abs());
    let c_bar = lq_stage_bound(reach, 1.0, &risk);
    let h = epsilon_horizon(c_bar, model.discount(), epsilon).unwrap();
    let dp = backward_induct(&model, &risk, h.n0).unwrap();
    let zero = StagePolicy::constant(model.num_states(), model.actions().nearest(0.0));
    let policy = assemble_epsilon_policy(&dp.policies, h.n0, zero).unwrap();
    let w = evaluate_policy(&model, &risk, &policy, h.n0 + 40).unwrap();
    let v_star = value_iterate(&model, &risk, 1e-10, 200).unwrap().converged_value;
    let mut worst: f64 = 0.0;
    for s in 0..model.num_states() {
        let gap = (w[s] - v_star[s]).abs();
        worst = worst.max(gap);
        ensure(gap <= epsilon, || format!("state {s}: policy {} vs V* {}", w[s], v_star[s]))?;
    }
    Ok(format!("N0 = {} (c_bar {c_bar}), max gap {worst:.2e} <= {epsilon}", h.n0))
}

/// 8. Zero policy of the investment model with r = 0 has value x0/(1-beta).
fn investment_anchor() -> Outcome {
    let params = InvestmentParams {
        mu: 0.06,
        r: 0.0,
        sigma: 0.2,
        action_bound: 1.0,
        actions: 5,
        grid_min: 0.0,
        grid_max: 4.0,
        grid_points: 41,
        noise_atoms: 5,
        x0: 1.0,
    };
    let model = build_investment(&params, 0.9).unwrap();
    let zero = StagePolicy::constant(model.num_states(), model.actions().nearest(0.0));
    let s0 = model.grid().nearest(1.0);
    let mut detail = Vec::new();
    for risk in [RiskSpec::mean_deviation(0.25), RiskSpec::avar(0.5), RiskSpec::Expectation] {
        let w = evaluate_policy(&model, &risk, &Policy::stationary(zero.clone()), 200).unwrap();
        ensure((w[s0] - 10.0).abs() <= 1e-6, || format!("{risk}: value {} at x0 = 1", w[s0]))?;
        detail.push(format!("{risk}: {:.9}", w[s0]));
    }
    ensure(investment_stage_bound(1.0) == 1.0, || "stage bound".into())?;
    Ok(detail.join(", "))
}

/// 9. Zero policy of the LQ regulator stays under the admissibility bound.
fn lq_zero_policy_bound() -> Outcome {
    let params = LqParams {
        sigma: 1.0,
        action_bound: 1.0,
        actions: 9,
        grid_min: -8.0,
        grid_max: 8.0,
        grid_points: 161,
        noise_atoms: 5,
        x0: 1.0,
    };
    let model = build_lq(&params, 0.5).unwrap();
    let risk = RiskSpec::avar(0.5);
    let zero = StagePolicy::constant(model.num_states(), model.actions().nearest(0.0));
    let w = evaluate_policy(&model, &risk, &Policy::stationary(zero), 60).unwrap();
    let s0 = model.grid().nearest(1.0);
    ensure(model.grid().points()[s0] == 1.0, || "x0 = 1 must be a grid point".into())?;
    let bound = 2.0 * 1.0 + 2.0 * 1.0 * risk.density_cap() / (1.0 - 0.5);
    ensure(bound == 10.0, || format!("bound evaluates to {bound}"))?;
    ensure(w[s0] <= bound, || format!("zero-policy value {} exceeds {bound}", w[s0]))?;
    Ok(format!("value {:.6} <= {bound}", w[s0]))
}

/// 10. Expectation DP equals the plain expected-cost DP; AV@R(0) equals
/// expectation.
fn risk_neutral_degeneracy() -> Outcome {
    let mut models = vec![lq_fixture()];
    models.push(
        build_investment(
            &InvestmentParams {
                mu: 0.08,
                r: 0.02,
                sigma: 0.3,
                action_bound: 1.0,
                actions: 7,
                grid_min: 0.0,
                grid_max: 5.0,
                grid_points: 26,
                noise_atoms: 5,
                x0: 1.0,
            },
            0.9,
        )
        .unwrap(),
    );
    let mut rng = fixtures::rng(10);
    for _ in 0..50 {
        models.push(fixtures::random_tabular(&mut rng, 4, 2, 0.8).unwrap());
    }
    let mut policy_mismatches = 0;
    for (i, model) in models.iter().enumerate() {
        for n in [0, 3, 10] {
            let dp = backward_induct(model, &RiskSpec::Expectation, n).unwrap();
            let plain = risk_neutral_dp(model, n);
            let avar0 = backward_induct(model, &RiskSpec::avar(0.0), n).unwrap();
            for s in 0..model.num_states() {
                let e = dp.initial_value()[s];
                ensure((e - plain[s]).abs() <= EQ_TOL, || {
                    format!("model {i}, N = {n}, state {s}: DP {e} vs risk-neutral {}", plain[s])
                })?;
                ensure((e - avar0.initial_value()[s]).abs() <= EQ_TOL, || {
                    format!("model {i}, N = {n}, state {s}: E {e} vs AV@R(0) {}", avar0.initial_value()[s])
                })?;
            }
            if dp.policies != avar0.policies {
                policy_mismatches += 1;
            }
        }
    }
    Ok(format!(
        "{} models x 3 horizons; AV@R(0) policy differs on {policy_mismatches} near-ties",
        models.len()
    ))
}

/// 11. V*(x0) is nondecreasing in the AV@R level.
fn risk_aversion_monotonicity() -> Outcome {
    let problem = Problem::Lq(fixtures::lq_params());
    let model = problem.build(0.5).unwrap();
    let settings = SolveSettings {
        epsilon: 0.1,
        tolerance: 1e-9,
        max_sweeps: 500,
    };
    let alphas: Vec<f64> = (0..10).map(|i| i as f64 / 10.0).collect();
    let rows = sweep(&problem, &model, SweepParam::Alpha, &alphas, &settings).map_err(|e| e.to_string())?;
    if let Some(i) = first_decrease(&rows, MONO_SLACK) {
        return Err(format!("V*(x0) drops from {} to {} at alpha {}", rows[i - 1].value, rows[i].value, rows[i].param));
    }
    Ok(format!(
        "V*(x0): {:.4} (alpha 0) .. {:.4} (alpha 0.9)",
        rows[0].value,
        rows[rows.len() - 1].value
    ))
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("risk axioms A1-A4", risk_axioms),
        ("primal/dual/LP agreement", primal_dual_lp),
        ("mean-deviation monotonicity boundary", mean_deviation_boundary),
        ("DP optimality vs exhaustive search", dp_vs_exhaustive),
        ("nested evaluation vs scenario tree", nested_evaluation),
        ("monotone value iteration", monotone_value_iteration),
        ("epsilon-optimal assembly", epsilon_optimal_assembly),
        ("investment zero-policy anchor", investment_anchor),
        ("LQ zero-policy bound", lq_zero_policy_bound),
        ("risk-neutral degeneracy", risk_neutral_degeneracy),
        ("risk-aversion monotonicity", risk_aversion_monotonicity),
    ];
    let mut failures = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("[PASS] {:>2}. {name}: {detail}", i + 1),
            Err(why) => {
                println!("[FAIL] {:>2}. {name}: {why}", i + 1);
                failures.push(i + 1);
            }
        }
    }
    assert!(failures.is_empty(), "failed criteria: {failures:?}");
}
