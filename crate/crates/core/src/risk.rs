//! Static law-invariant coherent risk measures on finite distributions.
//!
//! Every measure is available in primal form (quantile integrals, moment
//! formulas) and, for AV@R and mean-deviation, in dual form as a maximization
//! of `<m, Z>` over a set of probability densities `m` relative to the atom
//! probabilities. The two routes are kept separate so that they can be
//! checked against each other.
//!
//! Level convention: `AV@R_alpha(Z) = 1/(1-alpha) * int_alpha^1 V@R_p(Z) dp`,
//! so `alpha = 0` is the mean and `alpha -> 1` approaches the worst case.
//! The matching dual densities are capped at `1/(1-alpha)`.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Tolerance on the total probability of a distribution.
pub const PROB_SUM_TOL: f64 = 1e-12;

/// Tolerance on the weights of a Kusuoka mixture.
pub const MIXTURE_SUM_TOL: f64 = 1e-12;

/// Largest admissible mean-deviation coefficient. Beyond it the measure is
/// no longer monotone.
pub const KAPPA_MAX: f64 = 0.5;

/// One outcome of a discrete random cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub value: f64,
    pub prob: f64,
}

impl Atom {
    pub fn new(value: f64, prob: f64) -> Self {
        Self { value, prob }
    }
}

/// A random cost with finitely many outcomes.
///
/// Atoms need not be sorted or distinct. Every evaluator in this module is
/// invariant to atom order and to splitting an atom into several atoms with
/// the same value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteDistribution {
    atoms: Vec<Atom>,
}

impl DiscreteDistribution {
    pub fn new(atoms: Vec<Atom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidDistribution("no atoms".into()));
        }
        let mut total = 0.0;
        for (i, atom) in atoms.iter().enumerate() {
            if !atom.value.is_finite() {
                return Err(Error::InvalidDistribution(format!(
                    "atom {i} has non-finite value {}",
                    atom.value
                )));
            }
            if !(atom.prob > 0.0 && atom.prob <= 1.0 + PROB_SUM_TOL) {
                return Err(Error::InvalidDistribution(format!(
                    "atom {i} has probability {} outside (0, 1]",
                    atom.prob
                )));
            }
            total += atom.prob;
        }
        if (total - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::InvalidDistribution(format!(
                "probabilities sum to {total}, expected 1"
            )));
        }
        Ok(Self { atoms })
    }

    /// Builds a distribution from `(value, probability)` pairs.
    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        Self::new(pairs.iter().map(|&(v, p)| Atom::new(v, p)).collect())
    }

    /// The degenerate distribution at `value`.
    pub fn point(value: f64) -> Self {
        Self {
            atoms: vec![Atom::new(value, 1.0)],
        }
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|a| a.value * a.prob).sum()
    }

    pub fn min_value(&self) -> f64 {
        self.atoms.iter().map(|a| a.value).fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.atoms
            .iter()
            .map(|a| a.value)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Applies `f` to every outcome, keeping the probabilities.
    pub fn map_values(&self, mut f: impl FnMut(f64) -> f64) -> Result<Self> {
        Self::new(
            self.atoms
                .iter()
                .map(|a| Atom::new(f(a.value), a.prob))
                .collect(),
        )
    }

    /// Atoms sorted by ascending value; ties keep input order.
    fn ascending(&self) -> Vec<Atom> {
        let mut sorted = self.atoms.clone();
        sorted.sort_by(|a, b| a.value.partial_cmp(&b.value).unwrap_or(Ordering::Equal));
        sorted
    }
}

impl<'de> Deserialize<'de> for DiscreteDistribution {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            atoms: Vec<Atom>,
        }
        let raw = Raw::deserialize(deserializer)?;
        Self::new(raw.atoms).map_err(serde::de::Error::custom)
    }
}

/// One level of a Kusuoka mixture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelWeight {
    pub alpha: f64,
    pub weight: f64,
}

/// A finitely supported probability measure on AV@R levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Mixture(pub Vec<LevelWeight>);

impl Mixture {
    /// A mixture concentrated on a single level.
    pub fn point(alpha: f64) -> Self {
        Self(vec![LevelWeight { alpha, weight: 1.0 }])
    }

    pub fn from_pairs(pairs: &[(f64, f64)]) -> Self {
        Self(
            pairs
                .iter()
                .map(|&(alpha, weight)| LevelWeight { alpha, weight })
                .collect(),
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.0.is_empty() {
            return Err(domain("Kusuoka mixture has no components"));
        }
        let mut total = 0.0;
        for c in &self.0 {
            check_avar_level(c.alpha)?;
            if !(c.weight >= 0.0 && c.weight.is_finite()) {
                return Err(domain(format!("mixture weight {} must be >= 0", c.weight)));
            }
            total += c.weight;
        }
        if (total - 1.0).abs() > MIXTURE_SUM_TOL {
            return Err(domain(format!("mixture weights sum to {total}, expected 1")));
        }
        Ok(())
    }
}

/// Choice of one-step risk mapping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RiskSpec {
    Expectation,
    /// Average value-at-risk at level `alpha` in `[0, 1)`.
    Avar { alpha: f64 },
    /// `E[Z] + kappa * E|Z - E[Z]|` with `kappa` in `[0, 1/2]`.
    MeanDeviation { kappa: f64 },
    /// Supremum over a finite family of AV@R mixtures. A single mixture is a
    /// family of one.
    Kusuoka { family: Vec<Mixture> },
}

impl RiskSpec {
    pub fn avar(alpha: f64) -> Self {
        Self::Avar { alpha }
    }

    pub fn mean_deviation(kappa: f64) -> Self {
        Self::MeanDeviation { kappa }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Expectation => Ok(()),
            Self::Avar { alpha } => check_avar_level(*alpha),
            Self::MeanDeviation { kappa } => check_kappa(*kappa),
            Self::Kusuoka { family } => {
                if family.is_empty() {
                    return Err(domain("Kusuoka family is empty"));
                }
                family.iter().try_for_each(Mixture::validate)
            }
        }
    }

    /// Upper bound on the dual densities of this measure, i.e. the constant
    /// `c` with `rho(Z) <= c * E[Z]` for nonnegative `Z`.
    pub fn density_cap(&self) -> f64 {
        match self {
            Self::Expectation => 1.0,
            Self::Avar { alpha } => 1.0 / (1.0 - alpha),
            Self::MeanDeviation { kappa } => 1.0 + 2.0 * kappa,
            Self::Kusuoka { family } => family
                .iter()
                .map(|m| m.0.iter().map(|c| c.weight / (1.0 - c.alpha)).sum::<f64>())
                .fold(1.0, f64::max),
        }
    }
}

impl std::fmt::Display for RiskSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Expectation => write!(f, "E"),
            Self::Avar { alpha } => write!(f, "AVaR({alpha})"),
            Self::MeanDeviation { kappa } => write!(f, "MeanDev({kappa})"),
            Self::Kusuoka { family } => write!(f, "Kusuoka({} mixtures)", family.len()),
        }
    }
}

/// Probability densities with respect to the atoms of a distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualDensity {
    pub weights: Vec<f64>,
}

impl DualDensity {
    /// `sum_i m_i p_i`; equals one for a probability density.
    pub fn mass(&self, dist: &DiscreteDistribution) -> f64 {
        self.weights
            .iter()
            .zip(dist.atoms())
            .map(|(m, a)| m * a.prob)
            .sum()
    }

    /// `<m, Z> = sum_i m_i p_i z_i`.
    pub fn pairing(&self, dist: &DiscreteDistribution) -> f64 {
        self.weights
            .iter()
            .zip(dist.atoms())
            .map(|(m, a)| m * a.prob * a.value)
            .sum()
    }
}

/// Optimal value and maximizing density of a dual problem.
#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub value: f64,
    pub density: DualDensity,
}

fn check_avar_level(alpha: f64) -> Result<()> {
    if (0.0..1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(domain(format!("AV@R level {alpha} must lie in [0, 1)")))
    }
}

fn check_kappa(kappa: f64) -> Result<()> {
    if (0.0..=KAPPA_MAX).contains(&kappa) {
        Ok(())
    } else {
        Err(domain(format!(
            "mean-deviation coefficient {kappa} must lie in [0, 0.5]"
        )))
    }
}

/// Left-continuous lower quantile `min{z : P(Z <= z) >= p}`.
pub fn value_at_risk(p: f64, dist: &DiscreteDistribution) -> Result<f64> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(domain(format!("V@R level {p} must lie in (0, 1]")));
    }
    let sorted = dist.ascending();
    let mut cumulative = 0.0;
    for atom in &sorted {
        cumulative += atom.prob;
        if cumulative + PROB_SUM_TOL >= p {
            return Ok(atom.value);
        }
    }
    Ok(sorted[sorted.len() - 1].value)
}

/// AV@R as the exact integral of the step quantile function over `(alpha, 1]`.
pub fn avar_primal(alpha: f64, dist: &DiscreteDistribution) -> Result<f64> {
    check_avar_level(alpha)?;
    let sorted = dist.ascending();
    let last = sorted.len() - 1;
    let mut lower = 0.0;
    let mut integral = 0.0;
    for (i, atom) in sorted.iter().enumerate() {
        // The quantile equals `atom.value` on (lower, upper].
        let upper = if i == last { 1.0 } else { lower + atom.prob };
        let overlap = upper - lower.max(alpha);
        if overlap > 0.0 {
            integral += atom.value * overlap;
        }
        lower = upper;
    }
    Ok(integral / (1.0 - alpha))
}

/// AV@R by greedy maximization over densities bounded by `1/(1-alpha)`.
///
/// Atoms are visited from the largest value down and saturated at the cap
/// until the unit mass is spent. Equal values at the boundary are filled in
/// input order.
pub fn avar_dual(alpha: f64, dist: &DiscreteDistribution) -> Result<DualSolution> {
    check_avar_level(alpha)?;
    let atoms = dist.atoms();
    if alpha == 0.0 {
        let density = DualDensity {
            weights: vec![1.0; atoms.len()],
        };
        return Ok(DualSolution {
            value: dist.mean(),
            density,
        });
    }
    let cap = 1.0 / (1.0 - alpha);
    let mut order: Vec<usize> = (0..atoms.len()).collect();
    order.sort_by(|&i, &j| {
        atoms[j]
            .value
            .partial_cmp(&atoms[i].value)
            .unwrap_or(Ordering::Equal)
    });

    let mut weights = vec![0.0; atoms.len()];
    let mut budget = 1.0;
    for i in order {
        if budget <= 0.0 {
            break;
        }
        let mass = (cap * atoms[i].prob).min(budget);
        weights[i] = mass / atoms[i].prob;
        budget -= mass;
    }
    let density = DualDensity { weights };
    Ok(DualSolution {
        value: density.pairing(dist),
        density,
    })
}

/// `E[Z] + kappa * E|Z - E[Z]|`.
pub fn mean_deviation_primal(kappa: f64, dist: &DiscreteDistribution) -> Result<f64> {
    check_kappa(kappa)?;
    let mean = dist.mean();
    let abs_dev: f64 = dist
        .atoms()
        .iter()
        .map(|a| a.prob * (a.value - mean).abs())
        .sum();
    Ok(mean + kappa * abs_dev)
}

/// Mean-deviation through its dual set `m = 1 + h - E[h]`, `|h| <= kappa`.
///
/// Returns the optimal solution together with the maximizing `h`, which is
/// `kappa * sign(Z - E[Z])`.
pub fn mean_deviation_dual(
    kappa: f64,
    dist: &DiscreteDistribution,
) -> Result<(DualSolution, Vec<f64>)> {
    check_kappa(kappa)?;
    let mean = dist.mean();
    let h: Vec<f64> = dist
        .atoms()
        .iter()
        .map(|a| {
            let d = a.value - mean;
            if d > 0.0 {
                kappa
            } else if d < 0.0 {
                -kappa
            } else {
                0.0
            }
        })
        .collect();
    let mean_h: f64 = h.iter().zip(dist.atoms()).map(|(h, a)| h * a.prob).sum();
    let density = DualDensity {
        weights: h.iter().map(|h| 1.0 + h - mean_h).collect(),
    };
    Ok((
        DualSolution {
            value: density.pairing(dist),
            density,
        },
        h,
    ))
}

/// Supremum over `family` of `int AV@R_alpha(Z) dnu(alpha)`.
pub fn kusuoka_evaluate(family: &[Mixture], dist: &DiscreteDistribution) -> Result<f64> {
    if family.is_empty() {
        return Err(domain("Kusuoka family is empty"));
    }
    let mut best = f64::NEG_INFINITY;
    for mixture in family {
        mixture.validate()?;
        let mut value = 0.0;
        for c in &mixture.0 {
            if c.weight > 0.0 {
                value += c.weight * avar_primal(c.alpha, dist)?;
            }
        }
        best = best.max(value);
    }
    Ok(best)
}

/// Evaluates `spec` on `dist` with the primal formulas.
pub fn evaluate(spec: &RiskSpec, dist: &DiscreteDistribution) -> Result<f64> {
    match spec {
        RiskSpec::Expectation => Ok(dist.mean()),
        RiskSpec::Avar { alpha } => avar_primal(*alpha, dist),
        RiskSpec::MeanDeviation { kappa } => mean_deviation_primal(*kappa, dist),
        RiskSpec::Kusuoka { family } => kusuoka_evaluate(family, dist),
    }
}
