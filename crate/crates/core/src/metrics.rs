//! Utilities, objective values and finite-horizon gap diagnostics.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{rates_of_allocation, Allocation, RabConfig, RateVector};
use crate::rate_alloc::Objective;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UtilityReport {
    /// `Q_n = qbar_n h_n r_n`
    pub per_sensor_utility: Vec<f64>,
    pub objective_value: f64,
    pub per_sensor_rate: RateVector,
    /// Normalized gap `v_n - v*_n` to the target; empty without a target.
    pub gap_to_target: Vec<f64>,
    /// `delta^T` when every profile shares one geometric discount.
    pub gap_bound: Option<f64>,
}

impl UtilityReport {
    /// Weighted utilities `alpha_n Q_n`, the terms of the objective.
    pub fn weighted_utilities(&self, config: &RabConfig) -> Vec<f64> {
        self.per_sensor_utility
            .iter()
            .zip(config.sensors())
            .map(|(q, s)| s.alpha * q)
            .collect()
    }
}

/// Per-sensor utilities of `alloc` and the objective `W` over them.
pub fn utility(config: &RabConfig, alloc: &Allocation, objective: Objective) -> Result<UtilityReport> {
    let rates = rates_of_allocation(config, alloc)?;
    let per_sensor_utility = config
        .sensors()
        .iter()
        .zip(&rates.r)
        .map(|(s, r)| s.qbar * s.h * r)
        .collect();
    let objective_value = objective.evaluate(&config.coefficients(), &rates.r);
    Ok(UtilityReport {
        per_sensor_utility,
        objective_value,
        per_sensor_rate: rates,
        gap_to_target: Vec::new(),
        gap_bound: None,
    })
}

/// [`utility`] plus the normalized gap to `target` and, for identical
/// geometric profiles, the finite-horizon bound `delta^T`.
pub fn utility_against_target(
    config: &RabConfig,
    alloc: &Allocation,
    objective: Objective,
    target: &RateVector,
) -> Result<UtilityReport> {
    if target.len() != config.num_sensors() {
        return Err(Error::TargetDimensionMismatch {
            expected: config.num_sensors(),
            actual: target.len(),
        });
    }
    let mut report = utility(config, alloc, objective)?;
    report.gap_to_target = report
        .per_sensor_rate
        .r
        .iter()
        .zip(&target.r)
        .zip(config.totals())
        .map(|((r, t), total)| (r - t) / total)
        .collect();
    report.gap_bound = config
        .identical_delta()
        .map(|delta| gap_bound(delta, config.slots()));
    Ok(report)
}

/// Length of the horizon used for normalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Horizon {
    Finite(usize),
    Infinite,
}

/// `sum_{t=1}^{T} delta^(t-1)`.
pub fn discounted_slots(delta: f64, horizon: Horizon) -> Result<f64> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::DeltaOutOfRange(delta));
    }
    match horizon {
        Horizon::Infinite if delta == 1.0 => Err(Error::DeltaOne),
        Horizon::Infinite => Ok(1.0 / (1.0 - delta)),
        Horizon::Finite(t) if delta == 1.0 => Ok(t as f64),
        Horizon::Finite(t) => Ok((1.0 - delta.powf(t as f64)) / (1.0 - delta)),
    }
}

/// `v[n] = r[n] / sum_{t=1}^{T} delta^(t-1)`.
pub fn normalized_rates(delta: f64, horizon: Horizon, r: &RateVector) -> Result<RateVector> {
    let scale = discounted_slots(delta, horizon)?;
    Ok(RateVector::new(
        r.r.clone(),
        r.r.iter().map(|x| x / scale).collect(),
    ))
}

/// Finite-horizon distance bound `delta^T` between achieved and
/// infinite-horizon normalized rates.
pub fn gap_bound(delta: f64, slots: usize) -> f64 {
    delta.powf(slots as f64)
}

/// Divides each value by the maximum of its group, for display only.
pub fn normalize_by_max(values: &[f64]) -> Vec<f64> {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max > 0.0 {
        values.iter().map(|v| v / max).collect()
    } else {
        values.to_vec()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ProfileKind, SensorId, SensorSpec, WeightProfile};
    use crate::weights::exponential_profile;

    fn pair(weights: &[f64]) -> RabConfig {
        let p = WeightProfile::new(weights.to_vec(), ProfileKind::Empirical).unwrap();
        let sensors = (0..2)
            .map(|i| SensorSpec {
                id: SensorId::from_index(i),
                alpha: 0.5,
                qbar: 1.0,
                h: 1.0,
                profile: p.clone(),
            })
            .collect();
        RabConfig::new(weights.len(), sensors).unwrap()
    }

    #[test]
    fn direct_utility() {
        let config = pair(&[1.0, 0.5]);
        let report = utility(&config, &Allocation::from_ids(&[1, 2]), Objective::MaxMin).unwrap();
        assert_eq!(report.per_sensor_utility, vec![1.0, 0.5]);
        assert_eq!(report.objective_value, 0.25);
        let ws = utility(&config, &Allocation::from_ids(&[1, 2]), Objective::WeightedSum).unwrap();
        assert_eq!(ws.objective_value, 0.75);
    }

    #[test]
    fn starved_sensor_has_zero_utility() {
        let config = pair(&[1.0, 0.5]);
        let report = utility(&config, &Allocation::from_ids(&[1, 1]), Objective::MaxMin).unwrap();
        assert_eq!(report.per_sensor_utility[1], 0.0);
        assert_eq!(report.objective_value, 0.0);
    }

    #[test]
    fn gap_against_target() {
        let p = exponential_profile(0.5, 2).unwrap();
        let sensors = (0..2)
            .map(|i| SensorSpec {
                id: SensorId::from_index(i),
                alpha: 0.5,
                qbar: 1.0,
                h: 1.0,
                profile: p.clone(),
            })
            .collect();
        let config = RabConfig::new(2, sensors).unwrap();
        let target = RateVector::raw(vec![0.75, 0.75]);
        let report = utility_against_target(
            &config,
            &Allocation::from_ids(&[1, 2]),
            Objective::MaxMin,
            &target,
        )
        .unwrap();
        assert_eq!(report.gap_to_target, vec![0.25 / 1.5, -0.25 / 1.5]);
        assert_eq!(report.gap_bound, Some(0.25));
    }

    #[test]
    fn normalization() {
        let v = normalized_rates(0.5, Horizon::Infinite, &RateVector::raw(vec![1.2, 0.8])).unwrap();
        assert_eq!(v.v, vec![0.6, 0.4]);
        let v = normalized_rates(0.0, Horizon::Finite(7), &RateVector::raw(vec![1.0, 0.0])).unwrap();
        assert_eq!(v.v, vec![1.0, 0.0]);
        let budget = (1.0 - 0.99f64.powi(500)) / 0.01;
        let v = normalized_rates(0.99, Horizon::Finite(500), &RateVector::raw(vec![budget / 6.0]))
            .unwrap();
        assert!((v.v[0] - 1.0 / 6.0).abs() < 1e-12);
        assert!(matches!(
            normalized_rates(1.0, Horizon::Infinite, &RateVector::raw(vec![1.0])),
            Err(Error::DeltaOne)
        ));
        assert_eq!(discounted_slots(1.0, Horizon::Finite(4)).unwrap(), 4.0);
    }

    #[test]
    fn gap_bounds() {
        assert!((gap_bound(0.99, 500) - 6.570_483_042_414_6e-3).abs() < 1e-12);
        assert_eq!(gap_bound(0.0, 1), 0.0);
        assert_eq!(gap_bound(0.5, 10), 1.0 / 1024.0);
    }

    #[test]
    fn display_normalization() {
        assert_eq!(normalize_by_max(&[1.0, 2.0, 4.0]), vec![0.25, 0.5, 1.0]);
        assert_eq!(normalize_by_max(&[0.0, 0.0]), vec![0.0, 0.0]);
    }
}
