//! Target weighted sum rates: the first step of the allocation pipeline.
//!
//! For heterogeneous or finite-horizon profiles the achievable set is
//! approximated by the hyperplane `sum r = R` with `R` between the per-slot
//! minimum and maximum weight sums. Both objectives below have closed-form
//! maximizers on that hyperplane.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{RabConfig, RateVector, TOLERANCE};

/// Network objective over per-sensor utilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Objective {
    /// `min_n alpha_n qbar_n h_n r_n`
    MaxMin,
    /// `sum_n alpha_n qbar_n h_n r_n`
    WeightedSum,
}

impl Objective {
    /// Objective value for per-sensor coefficients `alpha qbar h` and rates `r`.
    pub fn evaluate(self, coefficients: &[f64], r: &[f64]) -> f64 {
        let weighted = coefficients.iter().zip(r).map(|(c, r)| c * r);
        match self {
            Objective::MaxMin => weighted.fold(f64::INFINITY, f64::min),
            Objective::WeightedSum => weighted.sum(),
        }
    }
}

/// Bounds on the total weighted rate any allocation can collect.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Budget {
    pub min: f64,
    pub max: f64,
}

impl Budget {
    pub fn contains(&self, budget: f64) -> bool {
        budget >= self.min - TOLERANCE && budget <= self.max + TOLERANCE
    }
}

/// `(sum_t min_n w[n][t], sum_t max_n w[n][t])`.
pub fn achievable_budget(config: &RabConfig) -> Budget {
    let n = config.num_sensors();
    let (mut min, mut max) = (0.0, 0.0);
    for t in 0..config.slots() {
        let (lo, hi) = (0..n)
            .map(|i| config.weight(i, t))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), w| {
                (lo.min(w), hi.max(w))
            });
        min += lo;
        max += hi;
    }
    Budget { min, max }
}

/// Smallest common discount factor at which every rate vector on the
/// infinite-horizon budget hyperplane is achievable: `1 - 1/N`.
pub fn feasibility_threshold(num_sensors: usize) -> f64 {
    assert!(num_sensors >= 1, "need at least one sensor");
    1.0 - 1.0 / num_sensors as f64
}

fn check_budget(budget: f64) -> Result<()> {
    if budget.is_finite() && budget > 0.0 {
        Ok(())
    } else {
        Err(Error::BadBudget(budget))
    }
}

/// Closed-form max-min split of `budget`:
/// `r[n] = budget / sum_i (c[n] / c[i])`.
pub fn maxmin_split(coefficients: &[f64], budget: f64) -> Result<Vec<f64>> {
    check_budget(budget)?;
    if let Some(i) = coefficients.iter().position(|&c| !(c.is_finite() && c > 0.0)) {
        return Err(Error::ZeroUtilityCoefficient(i + 1));
    }
    Ok(coefficients
        .iter()
        .map(|&cn| budget / coefficients.iter().map(|&ci| cn / ci).sum::<f64>())
        .collect())
}

/// Max-min target rates for a block with total budget `budget`.
pub fn maxmin_rates(config: &RabConfig, budget: f64) -> Result<RateVector> {
    let r = maxmin_split(&config.coefficients(), budget)?;
    Ok(RateVector::for_config(config, r))
}

/// Linear-objective split: the whole budget goes to the largest coefficient,
/// divided equally among exact ties.
pub fn weightedsum_split(coefficients: &[f64], budget: f64) -> Result<Vec<f64>> {
    check_budget(budget)?;
    let best = coefficients
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let winners = coefficients.iter().filter(|&&c| c == best).count();
    Ok(coefficients
        .iter()
        .map(|&c| if c == best { budget / winners as f64 } else { 0.0 })
        .collect())
}

pub fn weightedsum_rates(config: &RabConfig, budget: f64) -> Result<RateVector> {
    let r = weightedsum_split(&config.coefficients(), budget)?;
    Ok(RateVector::for_config(config, r))
}

/// Target rates for `objective`.
pub fn target_rates(config: &RabConfig, objective: Objective, budget: f64) -> Result<RateVector> {
    match objective {
        Objective::MaxMin => maxmin_rates(config, budget),
        Objective::WeightedSum => weightedsum_rates(config, budget),
    }
}

/// Whether `r` lies in the infinite-horizon achievable set for `N` sensors
/// sharing discount factor `delta`: non-negative, summing to `1/(1-delta)`,
/// with `delta` at or above the feasibility threshold.
pub fn check_infinite_horizon_feasible(delta: f64, num_sensors: usize, r: &RateVector) -> bool {
    if num_sensors == 0 || r.len() != num_sensors || !(0.0..1.0).contains(&delta) {
        return false;
    }
    if delta < feasibility_threshold(num_sensors) {
        return false;
    }
    if r.r.iter().any(|&x| x < 0.0 || !x.is_finite()) {
        return false;
    }
    (r.sum() - 1.0 / (1.0 - delta)).abs() <= TOLERANCE
}
