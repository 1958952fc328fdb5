use serde::Serialize;

use super::{Dataset, Example, FiniteDistribution, LearnerSpec, Predictor};
use crate::error::{check_non_negative, invalid, Error, Result};

/// Default cap on `|support| * (n + |support|)` for one `g_i`.
pub const DEFAULT_COST_CAP: u128 = 100_000_000;

/// `R(h) = sum_z P(z) loss(h(x), y)`.
pub fn risk(learner: &LearnerSpec, predictor: &Predictor, dist: &FiniteDistribution) -> f64 {
    dist.support()
        .iter()
        .map(|&(e, q)| q * learner.loss_at(predictor, e))
        .sum()
}

pub fn empirical_risk(learner: &LearnerSpec, predictor: &Predictor, items: &[Example]) -> f64 {
    items
        .iter()
        .map(|&e| learner.loss_at(predictor, e))
        .sum::<f64>()
        / items.len() as f64
}

/// `n (R(A_S) - R_emp(A_S))`.
pub fn gap(learner: &LearnerSpec, data: &Dataset, dist: &FiniteDistribution) -> f64 {
    let h = learner.fit(data.items());
    data.len() as f64 * (risk(learner, &h, dist) - empirical_risk(learner, &h, data.items()))
}

/// `n (R(A_S) - R_loo)` with `R_loo = (1/n) sum_i loss(A_{S \ i}(x_i), y_i)`.
pub fn gap_loo(learner: &LearnerSpec, data: &Dataset, dist: &FiniteDistribution) -> Result<f64> {
    let n = data.len();
    if n < 2 {
        return Err(invalid("n", "leave-one-out needs at least two examples"));
    }
    let h = learner.fit(data.items());
    let mut loo = 0.0;
    for (i, &e) in data.items().iter().enumerate() {
        let reduced = learner.fit(&data.without(i)?);
        loo += learner.loss_at(&reduced, e);
    }
    Ok(n as f64 * risk(learner, &h, dist) - loo)
}

fn check_cost(n: usize, dist: &FiniteDistribution, cap: u128) -> Result<()> {
    let s = dist.support().len() as u128;
    let required = s * (n as u128 + s);
    if required > cap {
        return Err(Error::CostCap { required, cap });
    }
    Ok(())
}

/// `g_i` with the index already validated and `items` a scratch copy of
/// the sample; `items[i]` is restored before returning.
fn g_i_in_place(
    learner: &LearnerSpec,
    items: &mut [Example],
    dist: &FiniteDistribution,
    i: usize,
) -> f64 {
    let original = items[i];
    let mut total = 0.0;
    for &(replacement, q) in dist.support() {
        items[i] = replacement;
        let h = learner.fit(items);
        total += q * (risk(learner, &h, dist) - learner.loss_at(&h, original));
    }
    items[i] = original;
    total
}

/// `g_i = E_{z'}[ R(A_{S^i}) - loss(A_{S^i}(x_i), y_i) ]`, exact over the support.
pub fn g_i_exact(
    learner: &LearnerSpec,
    data: &Dataset,
    dist: &FiniteDistribution,
    i: usize,
    cost_cap: u128,
) -> Result<f64> {
    if i >= data.len() {
        return Err(Error::IndexOutOfRange {
            index: i,
            len: data.len(),
        });
    }
    check_cost(data.len(), dist, cost_cap)?;
    let mut items = data.items().to_vec();
    Ok(g_i_in_place(learner, &mut items, dist, i))
}

/// All `g_1, ..., g_n` for one sample.
pub fn g_values(
    learner: &LearnerSpec,
    data: &Dataset,
    dist: &FiniteDistribution,
    cost_cap: u128,
) -> Result<Vec<f64>> {
    check_cost(data.len(), dist, cost_cap)?;
    let mut items = data.items().to_vec();
    Ok((0..data.len())
        .map(|i| g_i_in_place(learner, &mut items, dist, i))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SandwichReport {
    pub gap: f64,
    pub sum_g: f64,
    pub max_abs_g: f64,
    pub gamma: f64,
    /// `2 gamma n`.
    pub bound: f64,
    /// `| |gap| - |sum g_i| |`.
    pub deviation: f64,
    pub slack: f64,
    pub holds: bool,
}

/// Floating-point allowance for the sandwich at scale `n L`.
fn sandwich_tolerance(n: usize, l: f64) -> f64 {
    1e-10 * (n as f64 * l).max(1.0)
}

impl SandwichReport {
    /// Builds the report from a precomputed gap and `g_1, ..., g_n`.
    pub fn from_parts(gap: f64, g: &[f64], gamma: f64, l: f64) -> Self {
        let n = g.len();
        let sum_g: f64 = g.iter().sum();
        let max_abs_g = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let bound = 2.0 * gamma * n as f64;
        let deviation = (gap.abs() - sum_g.abs()).abs();
        SandwichReport {
            gap,
            sum_g,
            max_abs_g,
            gamma,
            bound,
            deviation,
            slack: bound - deviation,
            holds: deviation <= bound + sandwich_tolerance(n, l),
        }
    }
}

/// Checks `| |gap| - |sum_i g_i| | <= 2 gamma n` on one sample.
pub fn sandwich_check(
    learner: &LearnerSpec,
    data: &Dataset,
    dist: &FiniteDistribution,
    gamma: f64,
) -> Result<SandwichReport> {
    check_non_negative("gamma", gamma)?;
    let g = g_values(learner, data, dist, DEFAULT_COST_CAP)?;
    Ok(SandwichReport::from_parts(
        gap(learner, data, dist),
        &g,
        gamma,
        learner.l,
    ))
}
