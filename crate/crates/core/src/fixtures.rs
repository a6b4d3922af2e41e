//! Seeded instance generators shared by the test suites and `verify`.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::model::{build_lq, LqParams, MarkovModel};
use crate::risk::{Atom, DiscreteDistribution, Mixture, RiskSpec};
use crate::solver::{Policy, StagePolicy};

pub type FixtureRng = ChaCha8Rng;

pub fn rng(seed: u64) -> FixtureRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random distribution with `1..=max_atoms` atoms, values in
/// `[-scale, scale]`, occasionally with repeated values.
pub fn random_distribution(rng: &mut impl Rng, max_atoms: usize, scale: f64) -> DiscreteDistribution {
    let n = rng.gen_range(1..=max_atoms);
    let values = random_values(rng, n, scale);
    with_values(&random_probs(rng, n), &values)
}

/// Strictly positive probabilities summing to one.
pub fn random_probs(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut probs: Vec<f64> = raw.iter().map(|p| p / total).collect();
    // Push the rounding residue onto the largest atom.
    let residue = 1.0 - probs.iter().sum::<f64>();
    let (imax, _) = probs
        .iter()
        .enumerate()
        .fold((0, 0.0), |best, (i, &p)| if p > best.1 { (i, p) } else { best });
    probs[imax] += residue;
    probs
}

/// Values in `[-scale, scale]`; about one in five repeats an earlier value.
pub fn random_values(rng: &mut impl Rng, n: usize, scale: f64) -> Vec<f64> {
    let mut values: Vec<f64> = Vec::with_capacity(n);
    for i in 0..n {
        if i > 0 && rng.gen_bool(0.2) {
            let j = rng.gen_range(0..i);
            values.push(values[j]);
        } else {
            values.push(rng.gen_range(-scale..=scale));
        }
    }
    values
}

pub fn with_values(probs: &[f64], values: &[f64]) -> DiscreteDistribution {
    DiscreteDistribution::new(
        values
            .iter()
            .zip(probs)
            .map(|(&v, &p)| Atom::new(v, p))
            .collect(),
    )
    .expect("fixture probabilities are valid")
}

/// Random tabular model: every kernel row has random support, costs are
/// uniform on `[0, 10)`.
pub fn random_tabular(
    rng: &mut impl Rng,
    states: usize,
    actions: usize,
    discount: f64,
) -> Result<MarkovModel> {
    let mut kernel = Vec::with_capacity(states);
    let mut costs = Vec::with_capacity(states);
    for _ in 0..states {
        let mut rows = Vec::with_capacity(actions);
        let mut cost_row = Vec::with_capacity(actions);
        for _ in 0..actions {
            let support = rng.gen_range(1..=states);
            let mut targets: Vec<usize> = (0..states).collect();
            for i in 0..support {
                let j = rng.gen_range(i..states);
                targets.swap(i, j);
            }
            let probs = random_probs(rng, support);
            let mut row = vec![0.0; states];
            for (&t, &p) in targets[..support].iter().zip(&probs) {
                row[t] = p;
            }
            rows.push(row);
            cost_row.push(rng.gen_range(0.0..10.0));
        }
        kernel.push(rows);
        costs.push(cost_row);
    }
    MarkovModel::tabular(kernel, costs, discount)
}

/// Stage-dependent random policy with explicit rules for `0..=horizon`.
pub fn random_policy(rng: &mut impl Rng, model: &MarkovModel, horizon: usize) -> Policy {
    let stages = (0..=horizon)
        .map(|_| {
            StagePolicy(
                (0..model.num_states())
                    .map(|s| {
                        let adm = model.admissible(s);
                        adm[rng.gen_range(0..adm.len())]
                    })
                    .collect(),
            )
        })
        .collect();
    Policy::finite(stages)
}

/// LQ regulator on `[-3, 3]` with 41 states, 9 actions in `[-1, 1]`, 5 noise
/// atoms and unit noise scale.
pub fn lq_params() -> LqParams {
    LqParams {
        sigma: 1.0,
        action_bound: 1.0,
        actions: 9,
        grid_min: -3.0,
        grid_max: 3.0,
        grid_points: 41,
        noise_atoms: 5,
        x0: 1.0,
    }
}

pub fn lq_model(discount: f64) -> Result<MarkovModel> {
    build_lq(&lq_params(), discount)
}

/// Three Kusuoka families used by the axiom suites.
pub fn kusuoka_families() -> Vec<RiskSpec> {
    vec![
        RiskSpec::Kusuoka {
            family: vec![Mixture::from_pairs(&[(0.0, 0.5), (0.5, 0.5)])],
        },
        RiskSpec::Kusuoka {
            family: vec![Mixture::from_pairs(&[(0.1, 0.2), (0.6, 0.3), (0.9, 0.5)])],
        },
        RiskSpec::Kusuoka {
            family: vec![
                Mixture::point(0.3),
                Mixture::from_pairs(&[(0.0, 0.75), (0.95, 0.25)]),
                Mixture::from_pairs(&[(0.2, 0.5), (0.7, 0.5)]),
            ],
        },
    ]
}
