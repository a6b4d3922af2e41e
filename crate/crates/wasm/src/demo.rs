use riskdp::{
    avar_primal, fixtures, sweep, DiscreteDistribution, Error, Problem, Result, RiskSpec, SolveSettings,
    SweepParam,
};

const TOLERANCE: f64 = 1e-8;
const MAX_SWEEPS: usize = 2000;

pub fn avar_curve(values: &[f64], probs: &[f64], points: usize) -> Result<Vec<f64>> {
    if values.len() != probs.len() {
        return Err(Error::InvalidDistribution(format!(
            "{} values but {} probabilities",
            values.len(),
            probs.len()
        )));
    }
    let pairs: Vec<(f64, f64)> = values.iter().copied().zip(probs.iter().copied()).collect();
    let dist = DiscreteDistribution::from_pairs(&pairs)?;
    (0..points)
        .map(|i| avar_primal(i as f64 / points as f64, &dist))
        .collect()
}

#[derive(Debug, Clone, Copy)]
pub struct LqInputs {
    pub sigma: f64,
    pub alpha: f64,
    pub discount: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone)]
pub struct LqSolution {
    pub states: Vec<f64>,
    pub values: Vec<f64>,
    pub actions: Vec<f64>,
    pub horizon: usize,
    pub sweeps: usize,
    pub value_at_x0: f64,
}

fn problem(sigma: f64) -> Problem {
    Problem::Lq(riskdp::LqParams {
        sigma,
        ..fixtures::lq_params()
    })
}

fn settings(epsilon: f64) -> SolveSettings {
    SolveSettings {
        epsilon,
        tolerance: TOLERANCE,
        max_sweeps: MAX_SWEEPS,
    }
}

pub fn solve_lq(inputs: &LqInputs) -> Result<LqSolution> {
    let problem = problem(inputs.sigma);
    let model = problem.build(inputs.discount)?;
    let report = problem.solve(&model, &RiskSpec::avar(inputs.alpha), &settings(inputs.epsilon))?;
    let first = report.policy.rule(0).expect("solved policies define stage 0");
    let action_values = model.actions().values();
    Ok(LqSolution {
        states: model.grid().points().to_vec(),
        value_at_x0: model.grid().interpolate(&report.converged_value, problem.x0()),
        values: report.converged_value.0,
        actions: first.iter().map(|&a| action_values[a]).collect(),
        horizon: report.horizon,
        sweeps: report.residuals.len(),
    })
}

pub fn alpha_sweep(sigma: f64, discount: f64, epsilon: f64, alphas: &[f64]) -> Result<Vec<f64>> {
    let problem = problem(sigma);
    let model = problem.build(discount)?;
    let rows = sweep(&problem, &model, SweepParam::Alpha, alphas, &settings(epsilon))?;
    Ok(rows.into_iter().map(|r| r.value).collect())
}
