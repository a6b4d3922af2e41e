//! Browser bindings: AV@R curves, LQ regulator solves and level sweeps.
//!
//! The `demo` module holds the plain Rust computations so they can be tested
//! natively; the exported functions only convert errors.

use wasm_bindgen::prelude::*;

pub mod demo;

fn js(e: riskdp::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// AV@R of the distribution (`values`, `probs`) at `points` evenly spaced
/// levels in `[0, 1)`.
#[wasm_bindgen(js_name = avarCurve)]
pub fn avar_curve(values: Vec<f64>, probs: Vec<f64>, points: usize) -> Result<Vec<f64>, JsError> {
    demo::avar_curve(&values, &probs, points).map_err(js)
}

/// Solved LQ regulator on its state grid.
#[wasm_bindgen]
pub struct LqSolution(demo::LqSolution);

#[wasm_bindgen]
impl LqSolution {
    pub fn states(&self) -> Vec<f64> {
        self.0.states.clone()
    }

    pub fn values(&self) -> Vec<f64> {
        self.0.values.clone()
    }

    /// Stage-0 action of the epsilon-optimal policy at each state.
    pub fn actions(&self) -> Vec<f64> {
        self.0.actions.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn horizon(&self) -> usize {
        self.0.horizon
    }

    #[wasm_bindgen(getter)]
    pub fn sweeps(&self) -> usize {
        self.0.sweeps
    }

    #[wasm_bindgen(getter, js_name = valueAtX0)]
    pub fn value_at_x0(&self) -> f64 {
        self.0.value_at_x0
    }
}

#[wasm_bindgen(js_name = solveLq)]
pub fn solve_lq(sigma: f64, alpha: f64, discount: f64, epsilon: f64) -> Result<LqSolution, JsError> {
    demo::solve_lq(&demo::LqInputs { sigma, alpha, discount, epsilon })
        .map(LqSolution)
        .map_err(js)
}

/// `V*(x0)` of the LQ regulator for each AV@R level in `alphas`.
#[wasm_bindgen(js_name = alphaSweep)]
pub fn alpha_sweep(sigma: f64, discount: f64, epsilon: f64, alphas: Vec<f64>) -> Result<Vec<f64>, JsError> {
    demo::alpha_sweep(sigma, discount, epsilon, &alphas).map_err(js)
}
