//! Stationary controlled Markov models on finite grids.
//!
//! A model is either tabular (an explicit kernel over state indices) or given
//! by dynamics `x' = F(x, a, xi)` driven by discrete noise. Dynamics models
//! evaluate `F` once per (state, action, noise atom) at construction and
//! clamp the result to the grid range; value functions are read off-grid by
//! piecewise-linear interpolation.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{domain, Error, Result};
use crate::risk::{Atom, DiscreteDistribution, PROB_SUM_TOL};

/// Strictly increasing, finite set of state coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateGrid {
    points: Vec<f64>,
}

impl StateGrid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidModel("state grid needs at least 2 points".into()));
        }
        if points.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidModel("state grid has non-finite points".into()));
        }
        if points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidModel("state grid must be strictly increasing".into()));
        }
        Ok(Self { points })
    }

    /// `n` evenly spaced points from `min` to `max`.
    pub fn uniform(min: f64, max: f64, n: usize) -> Result<Self> {
        if !(min < max) {
            return Err(Error::InvalidModel(format!(
                "grid bounds [{min}, {max}] are empty"
            )));
        }
        if n < 2 {
            return Err(Error::InvalidModel("state grid needs at least 2 points".into()));
        }
        Self::new(linspace(min, max, n))
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.points[0]
    }

    pub fn max(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.min(), self.max())
    }

    /// Index of the grid point closest to `x`.
    pub fn nearest(&self, x: f64) -> usize {
        let mut best = 0;
        for (i, p) in self.points.iter().enumerate() {
            if (p - x).abs() < (self.points[best] - x).abs() {
                best = i;
            }
        }
        best
    }

    /// Piecewise-linear interpolation of `values` at `x`, clamped to the
    /// boundary values outside the grid range.
    pub fn interpolate(&self, values: &[f64], x: f64) -> f64 {
        debug_assert_eq!(values.len(), self.points.len());
        let n = self.points.len();
        if x <= self.points[0] {
            return values[0];
        }
        if x >= self.points[n - 1] {
            return values[n - 1];
        }
        // First index with point > x; in 1..n because of the checks above.
        let hi = self.points.partition_point(|&p| p <= x);
        let lo = hi - 1;
        let (x0, x1) = (self.points[lo], self.points[hi]);
        let t = (x - x0) / (x1 - x0);
        if t == 0.0 {
            values[lo]
        } else {
            values[lo] + t * (values[hi] - values[lo])
        }
    }
}

/// Evenly spaced values; exactly antisymmetric when `min == -max`.
pub fn linspace(min: f64, max: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.5 * (min + max)],
        _ => {
            let step = (max - min) / (n - 1) as f64;
            let mut out: Vec<f64> = (0..n).map(|i| min + step * i as f64).collect();
            out[n - 1] = max;
            if min == -max {
                for i in 0..n / 2 {
                    out[n - 1 - i] = -out[i];
                }
                if n % 2 == 1 {
                    out[n / 2] = 0.0;
                }
            }
            out
        }
    }
}

/// Action values plus the admissible subset at each state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionSet {
    values: Vec<f64>,
    admissible: Vec<Vec<usize>>,
}

impl ActionSet {
    /// Every action admissible in each of `num_states` states.
    pub fn all(values: Vec<f64>, num_states: usize) -> Result<Self> {
        let every: Vec<usize> = (0..values.len()).collect();
        Self::with_admissible(values, vec![every; num_states])
    }

    pub fn with_admissible(values: Vec<f64>, admissible: Vec<Vec<usize>>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidModel("action set is empty".into()));
        }
        if values.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidModel("action values must be finite".into()));
        }
        for (s, set) in admissible.iter().enumerate() {
            if set.is_empty() {
                return Err(Error::InvalidModel(format!(
                    "state {s} has no admissible action"
                )));
            }
            if let Some(&a) = set.iter().find(|&&a| a >= values.len()) {
                return Err(Error::InvalidModel(format!(
                    "state {s} lists unknown action {a}"
                )));
            }
        }
        Ok(Self { values, admissible })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn admissible(&self, state: usize) -> &[usize] {
        &self.admissible[state]
    }

    /// Index of the action value closest to `a`.
    pub fn nearest(&self, a: f64) -> usize {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if (v - a).abs() < (self.values[best] - a).abs() {
                best = i;
            }
        }
        best
    }
}

/// How successor states are generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transition {
    /// `rows[s][a]` lists `(next state index, probability)` with positive
    /// probabilities.
    Tabular { rows: Vec<Vec<Vec<(usize, f64)>>> },
    /// `next_states[s][a][k]` is the clamped successor for noise atom `k`.
    Dynamics {
        noise: DiscreteDistribution,
        next_states: Vec<Vec<Vec<f64>>>,
    },
}

/// A stationary controlled Markov model with nonnegative stage costs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarkovModel {
    grid: StateGrid,
    actions: ActionSet,
    transition: Transition,
    costs: Vec<Vec<f64>>,
    discount: f64,
}

impl MarkovModel {
    /// Builds a model from dynamics `next_state(x, a, xi)` and `cost(x, a)`,
    /// evaluating both on every grid point, action and noise atom.
    pub fn from_dynamics(
        grid: StateGrid,
        actions: ActionSet,
        noise: DiscreteDistribution,
        discount: f64,
        next_state: impl Fn(f64, f64, f64) -> f64,
        cost: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        check_discount(discount)?;
        check_action_cover(&grid, &actions)?;
        let mut next_states = Vec::with_capacity(grid.len());
        let mut costs = Vec::with_capacity(grid.len());
        for (s, &x) in grid.points().iter().enumerate() {
            let mut per_action = Vec::with_capacity(actions.len());
            let mut cost_row = Vec::with_capacity(actions.len());
            for (a, &u) in actions.values().iter().enumerate() {
                let mut succ = Vec::with_capacity(noise.len());
                for atom in noise.atoms() {
                    let y = next_state(x, u, atom.value);
                    if !y.is_finite() {
                        return Err(Error::InvalidModel(format!(
                            "next state is not finite at state {s}, action {a}, noise {}",
                            atom.value
                        )));
                    }
                    succ.push(grid.clamp(y));
                }
                per_action.push(succ);
                cost_row.push(cost(x, u));
            }
            next_states.push(per_action);
            costs.push(cost_row);
        }
        check_costs(&costs)?;
        Ok(Self {
            grid,
            actions,
            transition: Transition::Dynamics { noise, next_states },
            costs,
            discount,
        })
    }

    /// Builds a tabular model from a dense kernel `kernel[s][a][j]` and a cost
    /// table `costs[s][a]`. States are embedded as the reals `0..n`.
    pub fn tabular(kernel: Vec<Vec<Vec<f64>>>, costs: Vec<Vec<f64>>, discount: f64) -> Result<Self> {
        check_discount(discount)?;
        let n = kernel.len();
        if n < 2 {
            return Err(Error::InvalidModel("tabular model needs at least 2 states".into()));
        }
        let m = kernel[0].len();
        if m == 0 {
            return Err(Error::InvalidModel("tabular model needs at least 1 action".into()));
        }
        if costs.len() != n || costs.iter().any(|row| row.len() != m) {
            return Err(Error::InvalidModel(format!(
                "cost table must be {n} x {m}"
            )));
        }
        let mut rows = Vec::with_capacity(n);
        for (s, per_action) in kernel.iter().enumerate() {
            if per_action.len() != m {
                return Err(Error::InvalidModel(format!(
                    "state {s} has {} kernel rows, expected {m}",
                    per_action.len()
                )));
            }
            let mut sparse_rows = Vec::with_capacity(m);
            for (a, row) in per_action.iter().enumerate() {
                sparse_rows.push(sparse_row(row, n).map_err(|why| {
                    Error::InvalidModel(format!("kernel row (state {s}, action {a}): {why}"))
                })?);
            }
            rows.push(sparse_rows);
        }
        check_costs(&costs)?;
        let grid = StateGrid::new((0..n).map(|i| i as f64).collect())?;
        let actions = ActionSet::all((0..m).map(|a| a as f64).collect(), n)?;
        Ok(Self {
            grid,
            actions,
            transition: Transition::Tabular { rows },
            costs,
            discount,
        })
    }

    /// Same model with a different admissible-action structure.
    pub fn with_actions(mut self, actions: ActionSet) -> Result<Self> {
        if actions.len() != self.actions.len() {
            return Err(Error::InvalidModel("action count mismatch".into()));
        }
        check_action_cover(&self.grid, &actions)?;
        self.actions = actions;
        Ok(self)
    }

    pub fn grid(&self) -> &StateGrid {
        &self.grid
    }

    pub fn actions(&self) -> &ActionSet {
        &self.actions
    }

    pub fn transition(&self) -> &Transition {
        &self.transition
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn num_states(&self) -> usize {
        self.grid.len()
    }

    pub fn num_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn admissible(&self, state: usize) -> &[usize] {
        self.actions.admissible(state)
    }

    pub fn is_admissible(&self, state: usize, action: usize) -> bool {
        state < self.num_states() && self.actions.admissible(state).contains(&action)
    }

    pub fn cost(&self, state: usize, action: usize) -> f64 {
        self.costs[state][action]
    }

    pub fn costs(&self) -> &[Vec<f64>] {
        &self.costs
    }

    /// Largest stage cost over all admissible pairs.
    pub fn max_cost(&self) -> f64 {
        (0..self.num_states())
            .flat_map(|s| self.admissible(s).iter().map(move |&a| self.costs[s][a]))
            .fold(0.0, f64::max)
    }

    /// Distribution of `v_next` at the successor of `(state, action)`.
    pub fn successor_distribution(
        &self,
        state: usize,
        action: usize,
        v_next: &[f64],
    ) -> Result<DiscreteDistribution> {
        if !self.is_admissible(state, action) {
            return Err(domain(format!(
                "action {action} is not admissible in state {state}"
            )));
        }
        if v_next.len() != self.num_states() {
            return Err(domain(format!(
                "value function has {} entries, grid has {}",
                v_next.len(),
                self.num_states()
            )));
        }
        let atoms = match &self.transition {
            Transition::Tabular { rows } => rows[state][action]
                .iter()
                .map(|&(j, p)| Atom::new(v_next[j], p))
                .collect(),
            Transition::Dynamics { noise, next_states } => next_states[state][action]
                .iter()
                .zip(noise.atoms())
                .map(|(&y, atom)| Atom::new(self.grid.interpolate(v_next, y), atom.prob))
                .collect(),
        };
        DiscreteDistribution::new(atoms)
    }
}

fn sparse_row(row: &[f64], n: usize) -> std::result::Result<Vec<(usize, f64)>, String> {
    if row.len() != n {
        return Err(format!("has {} entries, expected {n}", row.len()));
    }
    let mut total = 0.0;
    let mut sparse = Vec::new();
    for (j, &p) in row.iter().enumerate() {
        if !(p >= 0.0 && p.is_finite()) {
            return Err(format!("entry {j} is {p}"));
        }
        if p > 0.0 {
            sparse.push((j, p));
        }
        total += p;
    }
    if (total - 1.0).abs() > PROB_SUM_TOL {
        return Err(format!("sums to {total}, expected 1"));
    }
    Ok(sparse)
}

fn check_discount(discount: f64) -> Result<()> {
    if discount > 0.0 && discount < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidModel(format!(
            "discount {discount} must lie in (0, 1)"
        )))
    }
}

fn check_action_cover(grid: &StateGrid, actions: &ActionSet) -> Result<()> {
    if actions.admissible.len() != grid.len() {
        return Err(Error::InvalidModel(format!(
            "admissible sets given for {} states, grid has {}",
            actions.admissible.len(),
            grid.len()
        )));
    }
    Ok(())
}

fn check_costs(costs: &[Vec<f64>]) -> Result<()> {
    for (s, row) in costs.iter().enumerate() {
        for (a, &c) in row.iter().enumerate() {
            if !(c >= 0.0 && c.is_finite()) {
                return Err(Error::InvalidModel(format!(
                    "cost at state {s}, action {a} is {c}; costs must be finite and nonnegative"
                )));
            }
        }
    }
    Ok(())
}

/// `k` equally weighted atoms at the standard-normal quantiles
/// `Phi^{-1}((2i - 1) / (2k))`, mirrored so the law is exactly symmetric.
pub fn quantize_standard_normal(k: usize) -> Result<DiscreteDistribution> {
    if k == 0 {
        return Err(domain("noise quantization needs at least one atom"));
    }
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let mut values = vec![0.0; k];
    for i in 0..k / 2 {
        let q = normal.inverse_cdf((2 * i + 1) as f64 / (2 * k) as f64);
        values[i] = q;
        values[k - 1 - i] = -q;
    }
    let prob = 1.0 / k as f64;
    DiscreteDistribution::new(values.into_iter().map(|v| Atom::new(v, prob)).collect())
}

/// Parameters of the fractional-allocation investment model. Stage cost is
/// current wealth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InvestmentParams {
    pub mu: f64,
    pub r: f64,
    pub sigma: f64,
    /// Bound `C` on the risky fraction, `|a| <= C`.
    pub action_bound: f64,
    pub actions: usize,
    pub grid_min: f64,
    pub grid_max: f64,
    pub grid_points: usize,
    pub noise_atoms: usize,
    /// Initial wealth.
    pub x0: f64,
}

/// Parameters of the scalar LQ regulator `x' = x + a + sigma * xi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LqParams {
    pub sigma: f64,
    pub action_bound: f64,
    pub actions: usize,
    pub grid_min: f64,
    pub grid_max: f64,
    pub grid_points: usize,
    pub noise_atoms: usize,
    pub x0: f64,
}

fn check_common(sigma: f64, action_bound: f64, actions: usize, noise_atoms: usize) -> Result<()> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(domain(format!("sigma {sigma} must be positive")));
    }
    if !(action_bound > 0.0 && action_bound.is_finite()) {
        return Err(domain(format!("action bound {action_bound} must be positive")));
    }
    if actions == 0 {
        return Err(domain("at least one action is required"));
    }
    if noise_atoms == 0 {
        return Err(domain("noise quantization needs at least one atom"));
    }
    Ok(())
}

/// Wealth dynamics `x' = x (1 + r + (mu - r) a + sigma a xi)`, cost `x`.
pub fn investment_next_state(p: &InvestmentParams, x: f64, a: f64, xi: f64) -> f64 {
    x * (1.0 + p.r + (p.mu - p.r) * a + p.sigma * a * xi)
}

pub fn build_investment(p: &InvestmentParams, discount: f64) -> Result<MarkovModel> {
    check_common(p.sigma, p.action_bound, p.actions, p.noise_atoms)?;
    if p.grid_min < 0.0 {
        return Err(domain(format!(
            "wealth grid starts at {}; wealth costs must be nonnegative",
            p.grid_min
        )));
    }
    let grid = StateGrid::uniform(p.grid_min, p.grid_max, p.grid_points)?;
    let actions = ActionSet::all(
        linspace(-p.action_bound, p.action_bound, p.actions),
        grid.len(),
    )?;
    let noise = quantize_standard_normal(p.noise_atoms)?;
    MarkovModel::from_dynamics(
        grid,
        actions,
        noise,
        discount,
        |x, a, xi| investment_next_state(p, x, a, xi),
        |x, _| x,
    )
}

/// LQ dynamics `x' = x + a + sigma xi`, cost `x^2 + a^2`.
pub fn build_lq(p: &LqParams, discount: f64) -> Result<MarkovModel> {
    check_common(p.sigma, p.action_bound, p.actions, p.noise_atoms)?;
    let grid = StateGrid::uniform(p.grid_min, p.grid_max, p.grid_points)?;
    let actions = ActionSet::all(
        linspace(-p.action_bound, p.action_bound, p.actions),
        grid.len(),
    )?;
    let noise = quantize_standard_normal(p.noise_atoms)?;
    let sigma = p.sigma;
    MarkovModel::from_dynamics(
        grid,
        actions,
        noise,
        discount,
        |x, a, xi| x + a + sigma * xi,
        |x, a| x * x + a * a,
    )
}

/// JSON layout of a tabular model: `kernel[s][a][j]` and `costs[s][a]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TabularDocument {
    pub states: usize,
    pub actions: usize,
    pub kernel: Vec<Vec<Vec<f64>>>,
    pub costs: Vec<Vec<f64>>,
}

impl TabularDocument {
    pub fn into_model(self, discount: f64) -> Result<MarkovModel> {
        if self.kernel.len() != self.states {
            return Err(Error::InvalidModel(format!(
                "kernel lists {} states, header says {}",
                self.kernel.len(),
                self.states
            )));
        }
        if let Some(s) = self.kernel.iter().position(|rows| rows.len() != self.actions) {
            return Err(Error::InvalidModel(format!(
                "kernel for state {s} has {} actions, header says {}",
                self.kernel[s].len(),
                self.actions
            )));
        }
        MarkovModel::tabular(self.kernel, self.costs, discount)
    }
}
