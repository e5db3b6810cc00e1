//! Construction of weight profiles: geometric discounting, survival curves
//! of deadline histograms, and a log-least-squares discount estimate.

use std::io::Read;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::model::{ProfileKind, WeightProfile};

/// Upper clamp of a fitted discount factor.
pub const MAX_FITTED_DELTA: f64 = 1.0 - 1e-12;

/// `w[t] = delta^(t-1)` for `t = 1..=slots`.
pub fn exponential_profile(delta: f64, slots: usize) -> Result<WeightProfile> {
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::DeltaOutOfRange(delta));
    }
    if slots == 0 {
        return Err(Error::EmptyConfig);
    }
    let weights = std::iter::successors(Some(1.0), |w| Some(w * delta))
        .take(slots)
        .collect();
    WeightProfile::new(weights, ProfileKind::Exponential { delta })
}

/// Bytes of bitstream whose transmission deadline falls in each slot.
#[derive(Debug, Clone, PartialEq)]
pub struct DeadlineHistogram {
    bytes_by_deadline: Vec<f64>,
}

impl DeadlineHistogram {
    pub fn new(bytes_by_deadline: Vec<f64>) -> Result<Self> {
        for (slot, &value) in bytes_by_deadline.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::BadHistogramEntry {
                    slot: slot + 1,
                    value,
                });
            }
        }
        if !bytes_by_deadline.iter().any(|&b| b > 0.0) {
            return Err(Error::EmptyHistogram);
        }
        Ok(DeadlineHistogram { bytes_by_deadline })
    }

    pub fn bytes(&self) -> &[f64] {
        &self.bytes_by_deadline
    }

    pub fn len(&self) -> usize {
        self.bytes_by_deadline.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bytes_by_deadline.is_empty()
    }

    /// Reshapes to exactly `slots` buckets. Deadlines past the block are
    /// folded into the final bucket; a short histogram is padded with zeros.
    pub fn fit_to_block(&self, slots: usize) -> Result<Self> {
        if slots == 0 {
            return Err(Error::EmptyConfig);
        }
        let mut bytes = vec![0.0; slots];
        for (t, &b) in self.bytes_by_deadline.iter().enumerate() {
            bytes[t.min(slots - 1)] += b;
        }
        DeadlineHistogram::new(bytes)
    }

    /// Reads a `slot,bytes` CSV with a header row and contiguous slots from 1.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            slot: usize,
            bytes: f64,
        }

        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.len() != 2 || &headers[0] != "slot" || &headers[1] != "bytes" {
            return Err(Error::Config(format!(
                "histogram header must be `slot,bytes`, got `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut bytes = Vec::new();
        for row in rdr.deserialize() {
            let row: Row = row?;
            if row.slot != bytes.len() + 1 {
                return Err(Error::Config(format!(
                    "histogram slots must be contiguous from 1; expected {}, got {}",
                    bytes.len() + 1,
                    row.slot
                )));
            }
            bytes.push(row.bytes);
        }
        DeadlineHistogram::new(bytes)
    }

    pub fn from_csv_path(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_csv_reader(file)
    }
}

/// Normalized survival function of the deadline distribution:
/// `w[t] = S(t) / S(1)` with `S(t) = sum_{tau >= t} bytes[tau]`.
pub fn profile_from_histogram(hist: &DeadlineHistogram) -> Result<WeightProfile> {
    let bytes = hist.bytes();
    let mut survival = vec![0.0; bytes.len()];
    let mut acc = 0.0;
    for (t, &b) in bytes.iter().enumerate().rev() {
        acc += b;
        survival[t] = acc;
    }
    let head = survival[0];
    if head <= 0.0 {
        return Err(Error::EmptyHistogram);
    }
    let weights = survival.into_iter().map(|s| s / head).collect();
    WeightProfile::new(weights, ProfileKind::Empirical)
}

/// Least-squares fit of `log w[t] = (t-1) log delta` over the strictly
/// positive (normal) weights, clamped to `[0, MAX_FITTED_DELTA]`.
///
/// A profile whose weights after the first slot are all exactly zero is the
/// `delta = 0` exponential and fits to `0.0`.
pub fn fit_exponential(profile: &WeightProfile) -> Result<f64> {
    let w = profile.weights();
    if w.len() < 2 {
        return Err(Error::DegenerateProfile);
    }
    let mut num = 0.0;
    let mut den = 0.0;
    let mut used = 0usize;
    for (t, &value) in w.iter().enumerate() {
        if value >= f64::MIN_POSITIVE {
            let x = t as f64;
            num += x * value.ln();
            den += x * x;
            used += 1;
        }
    }
    if used < 2 {
        if w[1..].iter().all(|&v| v == 0.0) {
            return Ok(0.0);
        }
        return Err(Error::DegenerateProfile);
    }
    Ok((num / den).exp().clamp(0.0, MAX_FITTED_DELTA))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_delta_is_impulse() {
        assert_eq!(exponential_profile(0.0, 3).unwrap().weights(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn threshold_delta_for_two_sensors() {
        let p = exponential_profile(1.0 - 1.0 / 2.0, 4).unwrap();
        assert_eq!(p.weights(), &[1.0, 0.5, 0.25, 0.125]);
        assert_eq!(p.kind(), ProfileKind::Exponential { delta: 0.5 });
    }

    #[test]
    fn direct_power() {
        assert_eq!(exponential_profile(0.99, 2).unwrap().weights(), &[1.0, 0.99]);
    }

    #[test]
    fn delta_range_checked() {
        assert!(matches!(exponential_profile(1.0, 3), Err(Error::DeltaOutOfRange(_))));
        assert!(matches!(exponential_profile(-0.1, 3), Err(Error::DeltaOutOfRange(_))));
    }

    fn from_hist(bytes: &[f64]) -> Vec<f64> {
        profile_from_histogram(&DeadlineHistogram::new(bytes.to_vec()).unwrap())
            .unwrap()
            .weights()
            .to_vec()
    }

    #[test]
    fn survival_profiles() {
        // survival sums 8, 4, 2
        assert_eq!(from_hist(&[4.0, 2.0, 2.0]), vec![1.0, 0.5, 0.25]);
        assert_eq!(from_hist(&[4.0, 0.0, 4.0]), vec![1.0, 0.5, 0.5]);
        assert_eq!(from_hist(&[1.0, 0.0, 0.0]), vec![1.0, 0.0, 0.0]);
        assert_eq!(from_hist(&[1.0, 1.0, 1.0, 1.0]), vec![1.0, 0.75, 0.5, 0.25]);
    }

    #[test]
    fn empty_histogram_rejected() {
        assert!(matches!(
            DeadlineHistogram::new(vec![0.0, 0.0]),
            Err(Error::EmptyHistogram)
        ));
        assert!(matches!(
            DeadlineHistogram::new(vec![1.0, -1.0]),
            Err(Error::BadHistogramEntry { slot: 2, .. })
        ));
    }

    #[test]
    fn tail_folds_into_last_bucket() {
        let h = DeadlineHistogram::new(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(h.fit_to_block(2).unwrap().bytes(), &[1.0, 9.0]);
        assert_eq!(h.fit_to_block(5).unwrap().bytes(), &[1.0, 2.0, 3.0, 4.0, 0.0]);
    }

    #[test]
    fn csv_parsing() {
        let h = DeadlineHistogram::from_csv_reader("slot,bytes\n1,4\n2,2\n3,2\n".as_bytes()).unwrap();
        assert_eq!(h.bytes(), &[4.0, 2.0, 2.0]);
        assert!(DeadlineHistogram::from_csv_reader("slot,bytes\n1,4\n3,2\n".as_bytes()).is_err());
        assert!(DeadlineHistogram::from_csv_reader("1,4\n2,2\n".as_bytes()).is_err());
    }

    #[test]
    fn fit_recovers_exact_exponential() {
        let p = exponential_profile(0.9, 10).unwrap();
        assert!((fit_exponential(&p).unwrap() - 0.9).abs() < 1e-9);
    }

    #[test]
    fn fit_of_flat_tail_matches_brute_force() {
        // Brute-force minimizer of sum_t (ln w_t - (t-1) ln d)^2 on a fine grid.
        let w = [1.0f64, 0.5, 0.5];
        let loss = |d: f64| -> f64 {
            w.iter()
                .enumerate()
                .map(|(t, &wt)| (wt.ln() - t as f64 * d.ln()).powi(2))
                .sum()
        };
        let best = (1..1_000_000)
            .map(|k| k as f64 * 1e-6)
            .min_by(|a, b| loss(*a).total_cmp(&loss(*b)))
            .unwrap();
        assert!((best - 0.659754).abs() < 2e-6);

        let p = WeightProfile::new(w.to_vec(), ProfileKind::Empirical).unwrap();
        let fitted = fit_exponential(&p).unwrap();
        assert!((fitted - 0.659_753_955_386_447).abs() < 1e-12);
        assert!((fitted - best).abs() < 2e-6);
    }

    #[test]
    fn fit_of_impulse_is_zero() {
        let p = WeightProfile::new(vec![1.0, 0.0, 0.0], ProfileKind::Empirical).unwrap();
        assert_eq!(fit_exponential(&p).unwrap(), 0.0);
    }

    #[test]
    fn fit_needs_two_slots() {
        let p = WeightProfile::new(vec![1.0], ProfileKind::Empirical).unwrap();
        assert!(matches!(fit_exponential(&p), Err(Error::DegenerateProfile)));
    }

    #[test]
    fn fit_is_clamped_below_one() {
        let p = WeightProfile::new(vec![1.0; 5], ProfileKind::Empirical).unwrap();
        assert_eq!(fit_exponential(&p).unwrap(), MAX_FITTED_DELTA);
    }
}
