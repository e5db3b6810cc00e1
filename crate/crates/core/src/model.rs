//! Domain types shared by every other module.
//!
//! Everything here is immutable once built. Constructors validate, so a
//! `RabConfig` in hand always satisfies its invariants; [`validate_rab`]
//! re-checks a config on demand and is what the constructors call.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute slack used for every floating-point invariant check.
pub const TOLERANCE: f64 = 1e-9;

/// Dense 1-based sensor identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SensorId(pub usize);

impl SensorId {
    /// Zero-based position in per-sensor arrays.
    #[inline]
    pub fn index(self) -> usize {
        self.0 - 1
    }

    #[inline]
    pub fn from_index(index: usize) -> Self {
        SensorId(index + 1)
    }
}

impl fmt::Display for SensorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ProfileKind {
    Exponential { delta: f64 },
    Empirical,
}

/// Per-slot valuation of a sender: starts at 1 and never increases.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightProfile {
    weights: Vec<f64>,
    kind: ProfileKind,
}

impl WeightProfile {
    pub fn new(weights: Vec<f64>, kind: ProfileKind) -> Result<Self> {
        let profile = WeightProfile { weights, kind };
        profile.validate()?;
        Ok(profile)
    }

    /// Checks normalization, range, monotonicity and, for exponential
    /// profiles, agreement with the stated discount factor.
    pub fn validate(&self) -> Result<()> {
        let w = &self.weights;
        if w.is_empty() {
            return Err(Error::EmptyConfig);
        }
        for (slot, &value) in w.iter().enumerate() {
            if !(-TOLERANCE..=1.0 + TOLERANCE).contains(&value) {
                return Err(Error::WeightOutOfRange {
                    slot: slot + 1,
                    value,
                });
            }
        }
        if (w[0] - 1.0).abs() > TOLERANCE {
            return Err(Error::BadNormalization(w[0]));
        }
        for (slot, pair) in w.windows(2).enumerate() {
            if pair[1] > pair[0] + TOLERANCE {
                return Err(Error::NonMonotoneWeights {
                    slot: slot + 1,
                    prev: pair[0],
                    next: pair[1],
                });
            }
        }
        if let ProfileKind::Exponential { delta } = self.kind {
            if !(0.0..1.0).contains(&delta) {
                return Err(Error::DeltaOutOfRange(delta));
            }
            let mut expected = 1.0;
            for (slot, &value) in w.iter().enumerate() {
                if (value - expected).abs() > TOLERANCE {
                    return Err(Error::NotExponential {
                        delta,
                        slot: slot + 1,
                        value,
                    });
                }
                expected *= delta;
            }
        }
        Ok(())
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn kind(&self) -> ProfileKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn delta(&self) -> Option<f64> {
        match self.kind {
            ProfileKind::Exponential { delta } => Some(delta),
            ProfileKind::Empirical => None,
        }
    }

    /// Sum of all weights, the most this sender can collect in one block.
    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// One sender's utility parameters and slot valuation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensorSpec {
    pub id: SensorId,
    /// Weight of this sensor in the network objective.
    pub alpha: f64,
    /// Expected delivery utility per MAC frame.
    pub qbar: f64,
    /// MAC frames carried per allocated slot.
    pub h: f64,
    pub profile: WeightProfile,
}

impl SensorSpec {
    /// `alpha * qbar * h`, the slope of this sensor's weighted utility in its rate.
    pub fn coefficient(&self) -> f64 {
        self.alpha * self.qbar * self.h
    }

    fn validate(&self) -> Result<()> {
        let bad = |reason: &str| Error::InvalidSensor {
            id: self.id.0,
            reason: reason.to_string(),
        };
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(bad("alpha outside [0, 1]"));
        }
        if !(self.qbar.is_finite() && self.qbar > 0.0) {
            return Err(bad("qbar must be positive"));
        }
        if !(self.h.is_finite() && self.h > 0.0) {
            return Err(bad("h must be positive"));
        }
        self.profile.validate()
    }
}

/// A resource allocation block: `slots` consecutive slots shared by a roster.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RabConfig {
    slots: usize,
    sensors: Vec<SensorSpec>,
}

impl RabConfig {
    /// Builds and validates a block. Sensors are stored ordered by id.
    pub fn new(slots: usize, mut sensors: Vec<SensorSpec>) -> Result<Self> {
        sensors.sort_by_key(|s| s.id);
        let config = RabConfig { slots, sensors };
        validate_rab(&config)?;
        Ok(config)
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn num_sensors(&self) -> usize {
        self.sensors.len()
    }

    pub fn sensors(&self) -> &[SensorSpec] {
        &self.sensors
    }

    pub fn sensor(&self, id: SensorId) -> &SensorSpec {
        &self.sensors[id.index()]
    }

    /// Weight of slot `slot` (0-based) for the sensor at `index` (0-based).
    #[inline]
    pub fn weight(&self, index: usize, slot: usize) -> f64 {
        self.sensors[index].profile.weights[slot]
    }

    pub fn coefficients(&self) -> Vec<f64> {
        self.sensors.iter().map(SensorSpec::coefficient).collect()
    }

    pub fn totals(&self) -> Vec<f64> {
        self.sensors.iter().map(|s| s.profile.total()).collect()
    }

    /// The common discount factor when every profile is exponential with
    /// the same delta.
    pub fn identical_delta(&self) -> Option<f64> {
        let first = self.sensors.first()?.profile.delta()?;
        self.sensors
            .iter()
            .all(|s| s.profile.delta() == Some(first))
            .then_some(first)
    }
}

/// Returns `Ok(())` iff every type invariant of the block holds.
pub fn validate_rab(config: &RabConfig) -> Result<()> {
    let n = config.sensors.len();
    if n == 0 || config.slots == 0 {
        return Err(Error::EmptyConfig);
    }
    for sensor in &config.sensors {
        if sensor.profile.len() != config.slots {
            return Err(Error::LengthMismatch {
                what: "weight profile",
                expected: config.slots,
                actual: sensor.profile.len(),
            });
        }
        sensor.validate()?;
    }
    let mut seen = vec![false; n];
    for sensor in &config.sensors {
        let id = sensor.id.0;
        if id == 0 || id > n || seen[id - 1] {
            return Err(Error::BadSensorIds(n));
        }
        seen[id - 1] = true;
    }
    let alpha_sum: f64 = config.sensors.iter().map(|s| s.alpha).sum();
    if (alpha_sum - 1.0).abs() > TOLERANCE {
        return Err(Error::AlphaSumMismatch(alpha_sum));
    }
    Ok(())
}

/// Which sensor transmits in each slot of a block.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Allocation {
    slots: Vec<SensorId>,
}

impl Allocation {
    pub fn new(slots: Vec<SensorId>) -> Self {
        Allocation { slots }
    }

    pub fn from_ids(ids: &[usize]) -> Self {
        Allocation {
            slots: ids.iter().map(|&id| SensorId(id)).collect(),
        }
    }

    pub fn slots(&self) -> &[SensorId] {
        &self.slots
    }

    pub fn ids(&self) -> Vec<usize> {
        self.slots.iter().map(|s| s.0).collect()
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Number of slots each sensor received.
    pub fn counts(&self, num_sensors: usize) -> Vec<usize> {
        let mut counts = vec![0; num_sensors];
        for id in &self.slots {
            counts[id.index()] += 1;
        }
        counts
    }

    pub fn validate_for(&self, config: &RabConfig) -> Result<()> {
        if self.slots.len() != config.slots() {
            return Err(Error::LengthMismatch {
                what: "allocation",
                expected: config.slots(),
                actual: self.slots.len(),
            });
        }
        let n = config.num_sensors();
        if let Some(bad) = self.slots.iter().find(|id| id.0 == 0 || id.0 > n) {
            return Err(Error::InvalidSensor {
                id: bad.0,
                reason: "not in roster".into(),
            });
        }
        Ok(())
    }
}

/// Weighted sum rates `r` and the same rates normalized by each sensor's
/// total weight, `v`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateVector {
    pub r: Vec<f64>,
    pub v: Vec<f64>,
}

impl RateVector {
    pub fn new(r: Vec<f64>, v: Vec<f64>) -> Self {
        RateVector { r, v }
    }

    /// Normalizes `r` against the per-sensor weight totals of `config`.
    pub fn for_config(config: &RabConfig, r: Vec<f64>) -> Self {
        let v = r
            .iter()
            .zip(config.totals())
            .map(|(&r, total)| if total > 0.0 { r / total } else { 0.0 })
            .collect();
        RateVector { r, v }
    }

    /// Rates with no normalization attached (`v` equal to `r`).
    pub fn raw(r: Vec<f64>) -> Self {
        RateVector { v: r.clone(), r }
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.r.iter().sum()
    }
}

/// `r[n] = sum_t w[n][t] * 1(s(t) = n)`.
pub fn rates_of_allocation(config: &RabConfig, alloc: &Allocation) -> Result<RateVector> {
    alloc.validate_for(config)?;
    let mut r = vec![0.0; config.num_sensors()];
    for (t, id) in alloc.slots().iter().enumerate() {
        r[id.index()] += config.weight(id.index(), t);
    }
    Ok(RateVector::for_config(config, r))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sensor(id: usize, alpha: f64, weights: &[f64]) -> SensorSpec {
        SensorSpec {
            id: SensorId(id),
            alpha,
            qbar: 1.0,
            h: 1.0,
            profile: WeightProfile::new(weights.to_vec(), ProfileKind::Empirical).unwrap(),
        }
    }

    fn pair(weights: &[f64]) -> RabConfig {
        RabConfig::new(
            weights.len(),
            vec![sensor(1, 0.5, weights), sensor(2, 0.5, weights)],
        )
        .unwrap()
    }

    #[test]
    fn valid_block_passes() {
        let config = pair(&[1.0, 0.5, 0.25]);
        assert!(validate_rab(&config).is_ok());
    }

    #[test]
    fn increasing_weights_rejected() {
        let err = WeightProfile::new(vec![1.0, 0.5, 0.6], ProfileKind::Empirical).unwrap_err();
        assert!(matches!(err, Error::NonMonotoneWeights { slot: 2, .. }));
    }

    #[test]
    fn first_weight_must_be_one() {
        let err = WeightProfile::new(vec![0.9, 0.5], ProfileKind::Empirical).unwrap_err();
        assert!(matches!(err, Error::BadNormalization(_)));
    }

    #[test]
    fn exponential_tag_must_match_weights() {
        let err = WeightProfile::new(
            vec![1.0, 0.5, 0.3],
            ProfileKind::Exponential { delta: 0.5 },
        )
        .unwrap_err();
        assert!(matches!(err, Error::NotExponential { slot: 3, .. }));
    }

    #[test]
    fn alpha_must_sum_to_one() {
        let w = [1.0, 0.5, 0.25];
        let err = RabConfig::new(3, vec![sensor(1, 0.6, &w), sensor(2, 0.6, &w)]).unwrap_err();
        assert!(matches!(err, Error::AlphaSumMismatch(s) if (s - 1.2).abs() < 1e-12));
    }

    #[test]
    fn profile_length_must_match_block() {
        let err = RabConfig::new(
            3,
            vec![sensor(1, 0.5, &[1.0, 0.5, 0.25]), sensor(2, 0.5, &[1.0, 0.5])],
        )
        .unwrap_err();
        assert!(matches!(err, Error::LengthMismatch { expected: 3, actual: 2, .. }));
    }

    #[test]
    fn ids_must_be_dense() {
        let w = [1.0];
        let err = RabConfig::new(1, vec![sensor(1, 0.5, &w), sensor(3, 0.5, &w)]).unwrap_err();
        assert!(matches!(err, Error::BadSensorIds(2)));
    }

    #[test]
    fn nonpositive_h_rejected() {
        let mut s = sensor(1, 1.0, &[1.0]);
        s.h = 0.0;
        assert!(matches!(
            RabConfig::new(1, vec![s]).unwrap_err(),
            Error::InvalidSensor { id: 1, .. }
        ));
    }

    #[test]
    fn rates_direct_sum() {
        let config = pair(&[1.0, 0.5, 0.25]);
        let rates = rates_of_allocation(&config, &Allocation::from_ids(&[1, 2, 1])).unwrap();
        assert_eq!(rates.r, vec![1.25, 0.5]);
    }

    #[test]
    fn rates_alternating_half_discount() {
        let config = pair(&[1.0, 0.5, 0.25, 0.125]);
        let rates = rates_of_allocation(&config, &Allocation::from_ids(&[1, 2, 1, 2])).unwrap();
        assert_eq!(rates.r, vec![1.25, 0.625]);
        assert_eq!(rates.v, vec![1.25 / 1.875, 0.625 / 1.875]);
    }

    #[test]
    fn single_sensor_takes_everything() {
        let w = [1.0, 0.7, 0.7, 0.1];
        let config = RabConfig::new(4, vec![sensor(1, 1.0, &w)]).unwrap();
        let rates = rates_of_allocation(&config, &Allocation::from_ids(&[1, 1, 1, 1])).unwrap();
        assert_eq!(rates.r, vec![w.iter().sum::<f64>()]);
        assert_eq!(rates.v, vec![1.0]);
    }

    #[test]
    fn allocation_length_checked() {
        let config = pair(&[1.0, 0.5, 0.25]);
        let err = rates_of_allocation(&config, &Allocation::from_ids(&[1, 2])).unwrap_err();
        assert!(matches!(err, Error::LengthMismatch { what: "allocation", .. }));
        let err = rates_of_allocation(&config, &Allocation::from_ids(&[1, 2, 3])).unwrap_err();
        assert!(matches!(err, Error::InvalidSensor { id: 3, .. }));
    }
}
