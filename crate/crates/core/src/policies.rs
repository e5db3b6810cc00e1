//! Slot allocation policies: the second step of the pipeline.
//!
//! [`dara_allocate`] is the non-stationary index policy. Each slot goes to
//! the sensor maximizing
//!
//! ```text
//! max(f_n, 0)^mu * w[n][t]^nu * max(sum_{tau > t} w[n][tau], tail_floor)^(-gamma)
//! ```
//!
//! where `f_n` is how far the sensor still is from its target weighted sum
//! rate. [`decomposition_allocate`] is the exact allocator for identical
//! geometric discounting; for that case the two pick the same sensor in
//! every slot. The round-robin family is stationary, and
//! [`optimal_exhaustive`] enumerates every allocation of a small block.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Allocation, RabConfig, RateVector, SensorId, TOLERANCE};
use crate::rate_alloc::{feasibility_threshold, Objective};

/// Exhaustive search refuses instances with more allocations than this.
pub const EXHAUSTIVE_LIMIT: u64 = 10_000_000;

/// Exponents of the three index factors plus the floor applied to the
/// remaining-weight term so the last slot keeps a finite index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DaraParams {
    pub mu: f64,
    pub nu: f64,
    pub gamma: f64,
    pub tail_floor: f64,
}

impl Default for DaraParams {
    fn default() -> Self {
        DaraParams {
            mu: 1.0,
            nu: 1.0,
            gamma: 1.0,
            tail_floor: 1e-12,
        }
    }
}

impl DaraParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tail_floor > 0.0 && self.tail_floor.is_finite()) {
            return Err(Error::Config(format!(
                "tail_floor must be positive, got {}",
                self.tail_floor
            )));
        }
        if ![self.mu, self.nu, self.gamma].iter().all(|x| x.is_finite()) {
            return Err(Error::Config("index exponents must be finite".into()));
        }
        Ok(())
    }
}

/// Allocation plus per-slot internals of the policy that produced it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicyTrace {
    pub allocation: Allocation,
    /// Residual vector after each slot's assignment.
    pub residuals: Vec<Vec<f64>>,
    /// Per-sensor metric each slot was decided on.
    pub indices: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    Dara,
    Decomposition,
    Rr,
    Rrr,
    Rdrr,
    Optimal,
}

impl Policy {
    pub const ALL: [Policy; 6] = [
        Policy::Dara,
        Policy::Decomposition,
        Policy::Rr,
        Policy::Rrr,
        Policy::Rdrr,
        Policy::Optimal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Policy::Dara => "dara",
            Policy::Decomposition => "decomposition",
            Policy::Rr => "rr",
            Policy::Rrr => "rrr",
            Policy::Rdrr => "rdrr",
            Policy::Optimal => "optimal",
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Policy::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::UnknownPolicy(s.to_string()))
    }
}

#[inline]
fn pow(base: f64, exp: f64) -> f64 {
    if exp == 1.0 {
        base
    } else if exp == 0.0 {
        1.0
    } else {
        base.powf(exp)
    }
}

/// Index of the first maximum; NaN never wins.
fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] || (values[best].is_nan() && !v.is_nan()) {
            best = i;
        }
    }
    best
}

/// Slot-by-slot driver of the index policy.
///
/// `step` lets the index pick the next slot's sensor, `assign` forces it.
/// Either way the chosen sensor's residual drops by its weight in that slot.
#[derive(Debug, Clone)]
pub struct DaraScheduler<'a> {
    config: &'a RabConfig,
    params: DaraParams,
    /// `tails[n][t] = sum_{tau > t} w[n][tau]`
    tails: Vec<Vec<f64>>,
    residuals: Vec<f64>,
    slot: usize,
    chosen: Vec<SensorId>,
    residual_log: Vec<Vec<f64>>,
    index_log: Vec<Vec<f64>>,
}

impl<'a> DaraScheduler<'a> {
    pub fn new(config: &'a RabConfig, target: &RateVector, params: DaraParams) -> Result<Self> {
        params.validate()?;
        if target.len() != config.num_sensors() {
            return Err(Error::TargetDimensionMismatch {
                expected: config.num_sensors(),
                actual: target.len(),
            });
        }
        if let Some(i) = target.r.iter().position(|r| !r.is_finite() || *r < 0.0) {
            return Err(Error::InfeasibleTarget(format!(
                "target rate of sensor {} is {}",
                i + 1,
                target.r[i]
            )));
        }
        let slots = config.slots();
        let tails = config
            .sensors()
            .iter()
            .map(|s| {
                let w = s.profile.weights();
                let mut tail = vec![0.0; slots];
                let mut acc = 0.0;
                for t in (0..slots).rev() {
                    tail[t] = acc;
                    acc += w[t];
                }
                tail
            })
            .collect();
        Ok(DaraScheduler {
            config,
            params,
            tails,
            residuals: target.r.clone(),
            slot: 0,
            chosen: Vec::with_capacity(slots),
            residual_log: Vec::with_capacity(slots),
            index_log: Vec::with_capacity(slots),
        })
    }

    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }

    /// Zero-based index of the next slot to fill.
    pub fn slot(&self) -> usize {
        self.slot
    }

    pub fn is_done(&self) -> bool {
        self.slot >= self.config.slots()
    }

    /// Metric of every sensor for the current slot.
    pub fn indices(&self) -> Vec<f64> {
        let t = self.slot;
        let p = &self.params;
        (0..self.config.num_sensors())
            .map(|n| {
                let f = self.residuals[n].max(0.0);
                let w = self.config.weight(n, t);
                let tail = self.tails[n][t].max(p.tail_floor);
                pow(f, p.mu) * pow(w, p.nu) * pow(tail, -p.gamma)
            })
            .collect()
    }

    /// Assigns the current slot by the index and returns the winner.
    pub fn step(&mut self) -> SensorId {
        let indices = self.indices();
        let best = argmax(&indices);
        let winner = if indices[best] > 0.0 {
            best
        } else {
            argmax(&self.residuals)
        };
        self.record(winner, indices);
        SensorId::from_index(winner)
    }

    /// Gives the current slot to `id` regardless of the index.
    pub fn assign(&mut self, id: SensorId) {
        assert!(!self.is_done(), "all slots already assigned");
        assert!(id.0 >= 1 && id.0 <= self.config.num_sensors(), "unknown sensor {id}");
        let indices = self.indices();
        self.record(id.index(), indices);
    }

    fn record(&mut self, winner: usize, indices: Vec<f64>) {
        self.residuals[winner] -= self.config.weight(winner, self.slot);
        self.chosen.push(SensorId::from_index(winner));
        self.residual_log.push(self.residuals.clone());
        self.index_log.push(indices);
        self.slot += 1;
    }

    /// Fills every remaining slot by the index.
    pub fn run(mut self) -> PolicyTrace {
        while !self.is_done() {
            self.step();
        }
        self.finish()
    }

    pub fn finish(self) -> PolicyTrace {
        PolicyTrace {
            allocation: Allocation::new(self.chosen),
            residuals: self.residual_log,
            indices: self.index_log,
        }
    }
}

/// Runs the index policy over a whole block, starting from residuals equal
/// to `target`.
pub fn dara_allocate(
    config: &RabConfig,
    target: &RateVector,
    params: DaraParams,
) -> Result<PolicyTrace> {
    Ok(DaraScheduler::new(config, target, params)?.run())
}

/// Exact allocator for `N` sensors sharing geometric discount `delta`.
///
/// Keeps the continuation rate vector `g`, which always sums to
/// `1/(1-delta)`. Each slot goes to the largest entry `n`, after which
/// `g_n <- (g_n - 1)/delta` and every other `g_m <- g_m/delta`. The state is
/// held normalized to unit sum and re-projected onto it after each update,
/// since the map expands rounding error by `1/delta` per slot.
///
/// The target may sum to either the infinite-horizon budget or, within the
/// truncation slack `delta^T/(1-delta)`, to the finite-block budget; only
/// its proportions are used.
pub fn decomposition_allocate(
    delta: f64,
    num_sensors: usize,
    slots: usize,
    target: &RateVector,
) -> Result<PolicyTrace> {
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::DeltaOutOfRange(delta));
    }
    if num_sensors == 0 || slots == 0 {
        return Err(Error::EmptyConfig);
    }
    let threshold = feasibility_threshold(num_sensors);
    if delta < threshold - TOLERANCE {
        return Err(Error::InfeasibleDelta { delta, threshold });
    }
    if target.len() != num_sensors {
        return Err(Error::TargetDimensionMismatch {
            expected: num_sensors,
            actual: target.len(),
        });
    }
    if let Some(i) = target.r.iter().position(|r| !r.is_finite() || *r < -TOLERANCE) {
        return Err(Error::InfeasibleTarget(format!(
            "target rate of sensor {} is {}",
            i + 1,
            target.r[i]
        )));
    }
    let infinite_budget = 1.0 / (1.0 - delta);
    let slack = delta.powf(slots as f64) * infinite_budget + TOLERANCE * infinite_budget.max(1.0);
    let total = target.sum();
    if (total - infinite_budget).abs() > slack {
        return Err(Error::InfeasibleTarget(format!(
            "target sums to {total}, expected {infinite_budget}"
        )));
    }

    let mut v: Vec<f64> = target.r.iter().map(|r| r.max(0.0) / total).collect();
    let to_rates = |v: &[f64]| v.iter().map(|x| x * infinite_budget).collect::<Vec<_>>();
    let mut chosen = Vec::with_capacity(slots);
    let mut residuals = Vec::with_capacity(slots);
    let mut indices = Vec::with_capacity(slots);
    for _ in 0..slots {
        let n = argmax(&v);
        indices.push(to_rates(&v));
        chosen.push(SensorId::from_index(n));
        if delta == 0.0 {
            // Only a single sensor is feasible here; its share stays 1.
            v.iter_mut().for_each(|x| *x = 0.0);
            v[n] = 1.0;
        } else {
            for (m, x) in v.iter_mut().enumerate() {
                if m == n {
                    *x = (*x - (1.0 - delta)) / delta;
                } else {
                    *x /= delta;
                }
            }
            let sum: f64 = v.iter().sum();
            if sum > 0.0 {
                v.iter_mut().for_each(|x| *x /= sum);
            }
        }
        residuals.push(to_rates(&v));
    }
    Ok(PolicyTrace {
        allocation: Allocation::new(chosen),
        residuals,
        indices,
    })
}

/// `s(t) = ((t - 1) mod N) + 1`.
pub fn round_robin(config: &RabConfig) -> Allocation {
    let n = config.num_sensors();
    Allocation::new(
        (0..config.slots())
            .map(|t| SensorId::from_index(t % n))
            .collect(),
    )
}

/// Smooth weighted round-robin: every slot each sensor earns its normalized
/// share as credit, the richest sensor (lowest id on ties) transmits and
/// pays one slot.
pub fn r_round_robin(config: &RabConfig, shares: &[f64]) -> Result<Allocation> {
    let n = config.num_sensors();
    if shares.len() != n {
        return Err(Error::LengthMismatch {
            what: "shares",
            expected: n,
            actual: shares.len(),
        });
    }
    if let Some(i) = shares.iter().position(|s| !(*s > 0.0 && s.is_finite())) {
        return Err(Error::NonPositiveShare {
            id: i + 1,
            value: shares[i],
        });
    }
    let total: f64 = shares.iter().sum();
    let quota: Vec<f64> = shares.iter().map(|s| s / total).collect();
    let mut credit = vec![0.0; n];
    let slots = (0..config.slots())
        .map(|_| {
            for (c, q) in credit.iter_mut().zip(&quota) {
                *c += q;
            }
            let winner = argmax(&credit);
            credit[winner] -= 1.0;
            SensorId::from_index(winner)
        })
        .collect();
    Ok(Allocation::new(slots))
}

/// Bit-budget proxy `qbar_n h_n` used as the rate-proportional share.
pub fn rate_shares(config: &RabConfig) -> Vec<f64> {
    config.sensors().iter().map(|s| s.qbar * s.h).collect()
}

/// Rate share scaled by delay sensitivity `T / sum_t w[n][t]`, so sensors
/// whose profile decays faster receive proportionally more slots.
pub fn rate_delay_shares(config: &RabConfig) -> Vec<f64> {
    let slots = config.slots() as f64;
    config
        .sensors()
        .iter()
        .map(|s| s.qbar * s.h * slots / s.profile.total())
        .collect()
}

/// Weighted round-robin on [`rate_delay_shares`].
pub fn rd_round_robin(config: &RabConfig) -> Allocation {
    r_round_robin(config, &rate_delay_shares(config))
        .expect("rate/delay shares are positive for a valid config")
}

/// Number of allocations of `slots` slots among `sensors` sensors, if it
/// is within [`EXHAUSTIVE_LIMIT`].
fn search_space(sensors: usize, slots: usize) -> Result<u64> {
    let too_large = || Error::InstanceTooLarge {
        sensors,
        slots,
        limit: EXHAUSTIVE_LIMIT,
    };
    let exp = u32::try_from(slots).map_err(|_| too_large())?;
    match (sensors as u64).checked_pow(exp) {
        Some(count) if count <= EXHAUSTIVE_LIMIT => Ok(count),
        _ => Err(too_large()),
    }
}

/// Best allocation among those whose first slot goes to `first`, scanning in
/// lexicographic order and keeping the first strict improvement.
fn best_with_prefix(config: &RabConfig, objective: Objective, first: usize) -> (Vec<usize>, f64) {
    let n = config.num_sensors();
    let slots = config.slots();
    let coefficients = config.coefficients();
    let mut digits = vec![0usize; slots];
    digits[0] = first;
    // partial[k * n..(k + 1) * n] holds the rates earned in slots 0..k.
    let mut partial = vec![0.0; (slots + 1) * n];
    let fill_from = |partial: &mut Vec<f64>, digits: &[usize], from: usize| {
        for k in from..slots {
            let (head, tail) = partial.split_at_mut((k + 1) * n);
            tail[..n].copy_from_slice(&head[k * n..]);
            tail[digits[k]] += config.weight(digits[k], k);
        }
    };
    fill_from(&mut partial, &digits, 0);

    let mut best_value = f64::NEG_INFINITY;
    let mut best = digits.clone();
    loop {
        let value = objective.evaluate(&coefficients, &partial[slots * n..]);
        if value > best_value {
            best_value = value;
            best.copy_from_slice(&digits);
        }
        // Odometer over slots 1.., last slot fastest.
        let Some(k) = (1..slots).rev().find(|&k| digits[k] + 1 < n) else {
            break;
        };
        digits[k] += 1;
        digits[k + 1..].iter_mut().for_each(|d| *d = 0);
        fill_from(&mut partial, &digits, k);
    }
    (best, best_value)
}

/// Enumerates all `N^T` allocations and returns the lexicographically
/// smallest one attaining the best objective value, with that value.
pub fn optimal_exhaustive(config: &RabConfig, objective: Objective) -> Result<(Allocation, f64)> {
    search_space(config.num_sensors(), config.slots())?;
    let per_first: Vec<(Vec<usize>, f64)> = (0..config.num_sensors())
        .into_par_iter()
        .map(|first| best_with_prefix(config, objective, first))
        .collect();
    // Partitions are in lexicographic order; keep the earliest maximum.
    let (digits, value) = per_first
        .into_iter()
        .reduce(|best, next| if next.1 > best.1 { next } else { best })
        .expect("at least one sensor");
    let allocation = Allocation::new(digits.into_iter().map(SensorId::from_index).collect());
    Ok((allocation, value))
}
