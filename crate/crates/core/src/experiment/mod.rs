//! Config-driven scenario runner and parameter sweeps.
//!
//! A scenario builds one block from an [`ExperimentConfig`], computes the
//! target rates, runs every requested policy and reports utilities against
//! the target. All randomness (the `h` draws) comes from a ChaCha stream
//! seeded by the config's `seed`, so identical configs give identical rows.

mod config;
mod output;

use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::Serialize;

pub use config::{AlphaRule, ExperimentConfig, HDistribution, ProfileSpec, SensorProfile};
pub use output::{write_rows_csv, write_summary_csv, CSV_HEADER};

use crate::error::{Error, Result};
use crate::metrics::{utility_against_target, UtilityReport};
use crate::model::{Allocation, RabConfig, RateVector, SensorId, SensorSpec, WeightProfile};
use crate::policies::{
    dara_allocate, decomposition_allocate, optimal_exhaustive, r_round_robin, rate_shares,
    rd_round_robin, round_robin, Policy,
};
use crate::rate_alloc::{achievable_budget, target_rates};
use crate::weights::{exponential_profile, profile_from_histogram, DeadlineHistogram};

/// Lower clamp applied to sampled `h` values.
pub const MIN_H: f64 = 1e-6;

/// Seed of repetition `rep`: SplitMix64 finalizer of `base + rep`.
pub fn derive_seed(base: u64, rep: u64) -> u64 {
    let mut z = base.wrapping_add(rep).wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A built block together with its first-step target.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub rab: RabConfig,
    pub budget: f64,
    pub target: RateVector,
}

fn build_profile(spec: &ProfileSpec, index: usize, n: usize, slots: usize) -> Result<WeightProfile> {
    match spec {
        ProfileSpec::Identical(delta) => exponential_profile(*delta, slots),
        ProfileSpec::Linspace { low, high } => {
            let step = if n > 1 { (high - low) / (n - 1) as f64 } else { 0.0 };
            exponential_profile(low + step * index as f64, slots)
        }
        ProfileSpec::PerSensor(list) => match &list[index] {
            SensorProfile::Delta { delta } => exponential_profile(*delta, slots),
            SensorProfile::Histogram { histogram } => {
                let hist = DeadlineHistogram::from_csv_path(histogram)?.fit_to_block(slots)?;
                profile_from_histogram(&hist)
            }
        },
    }
}

/// Builds the block described by `config`, drawing `h` with its seed.
pub fn build_rab(config: &ExperimentConfig) -> Result<RabConfig> {
    config.validate()?;
    let n = config.num_sensors;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let h: Vec<f64> = match config.h {
        HDistribution::Constant(value) => vec![value; n],
        HDistribution::Normal { mean, stddev } => {
            let dist = Normal::new(mean, stddev).map_err(|e| Error::Config(e.to_string()))?;
            (0..n).map(|_| dist.sample(&mut rng).max(MIN_H)).collect()
        }
    };
    let alpha = match &config.alpha {
        AlphaRule::Uniform => vec![1.0 / n as f64; n],
        AlphaRule::Explicit(a) => a.clone(),
    };
    let sensors = (0..n)
        .map(|i| {
            Ok(SensorSpec {
                id: SensorId::from_index(i),
                alpha: alpha[i],
                qbar: config.qbar,
                h: h[i],
                profile: build_profile(&config.profiles, i, n, config.slots)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    RabConfig::new(config.slots, sensors)
}

/// Builds the block and its target rates. The budget is the override when
/// given (it must lie in the achievable range) and the per-slot minimum
/// weight sum otherwise.
pub fn prepare(config: &ExperimentConfig) -> Result<Scenario> {
    let rab = build_rab(config)?;
    let range = achievable_budget(&rab);
    let budget = match config.budget {
        Some(b) if !range.contains(b) => {
            return Err(Error::BudgetOutOfRange {
                budget: b,
                min: range.min,
                max: range.max,
            })
        }
        Some(b) => b,
        None => range.min,
    };
    let target = target_rates(&rab, config.objective, budget)?;
    Ok(Scenario { rab, budget, target })
}

/// Runs one policy on a prepared scenario.
pub fn run_policy(config: &ExperimentConfig, scenario: &Scenario, policy: Policy) -> Result<Allocation> {
    let rab = &scenario.rab;
    Ok(match policy {
        Policy::Dara => dara_allocate(rab, &scenario.target, config.dara)?.allocation,
        Policy::Decomposition => {
            let delta = rab
                .identical_delta()
                .ok_or(Error::NeedsIdenticalExponential("decomposition"))?;
            decomposition_allocate(delta, rab.num_sensors(), rab.slots(), &scenario.target)?
                .allocation
        }
        Policy::Rr => round_robin(rab),
        Policy::Rrr => r_round_robin(rab, &rate_shares(rab))?,
        Policy::Rdrr => rd_round_robin(rab),
        Policy::Optimal => optimal_exhaustive(rab, config.objective)?.0,
    })
}

/// Outcome of one policy on one scenario repetition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub scenario: String,
    pub policy: Policy,
    pub repetition: u64,
    #[serde(rename = "N")]
    pub num_sensors: usize,
    #[serde(rename = "T")]
    pub slots: usize,
    pub deltas: Vec<Option<f64>>,
    pub seed: u64,
    pub h: Vec<f64>,
    pub r_target: Vec<f64>,
    pub r_achieved: Vec<f64>,
    pub utilities: Vec<f64>,
    pub objective: f64,
    pub gap: Vec<f64>,
    pub gap_bound: Option<f64>,
    #[serde(skip)]
    pub wall_time: Duration,
}

fn row_for(
    config: &ExperimentConfig,
    scenario: &Scenario,
    policy: Policy,
    repetition: u64,
    report: &UtilityReport,
    wall_time: Duration,
) -> ResultRow {
    let rab = &scenario.rab;
    ResultRow {
        scenario: config.scenario.clone(),
        policy,
        repetition,
        num_sensors: rab.num_sensors(),
        slots: rab.slots(),
        deltas: rab.sensors().iter().map(|s| s.profile.delta()).collect(),
        seed: config.seed,
        h: rab.sensors().iter().map(|s| s.h).collect(),
        r_target: scenario.target.r.clone(),
        r_achieved: report.per_sensor_rate.r.clone(),
        utilities: report.per_sensor_utility.clone(),
        objective: report.objective_value,
        gap: report.gap_to_target.clone(),
        gap_bound: report.gap_bound,
        wall_time,
    }
}

fn run_repetition(config: &ExperimentConfig, repetition: u64) -> Result<Vec<ResultRow>> {
    let scenario = prepare(config)?;
    config
        .policies
        .iter()
        .map(|&policy| {
            let start = Instant::now();
            let alloc = run_policy(config, &scenario, policy)?;
            let wall_time = start.elapsed();
            let report =
                utility_against_target(&scenario.rab, &alloc, config.objective, &scenario.target)?;
            Ok(row_for(config, &scenario, policy, repetition, &report, wall_time))
        })
        .collect()
}

/// Runs every requested policy once, seeded by `config.seed`.
pub fn run_scenario(config: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let mut rows = run_repetition(config, 0)?;
    rows.sort_by_key(|r| r.policy);
    Ok(rows)
}

/// Per-policy allocation and report for a single block.
#[derive(Debug, Clone, Serialize)]
pub struct PolicyOutcome {
    pub policy: Policy,
    pub allocation: Allocation,
    pub report: UtilityReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct AllocateReport {
    pub scenario: String,
    #[serde(rename = "N")]
    pub num_sensors: usize,
    #[serde(rename = "T")]
    pub slots: usize,
    pub seed: u64,
    pub h: Vec<f64>,
    pub budget: f64,
    pub target: RateVector,
    pub outcomes: Vec<PolicyOutcome>,
}

/// Like [`run_scenario`] but keeps the allocations themselves.
pub fn allocate(config: &ExperimentConfig) -> Result<AllocateReport> {
    let scenario = prepare(config)?;
    let mut policies = config.policies.clone();
    policies.sort();
    policies.dedup();
    let outcomes = policies
        .into_iter()
        .map(|policy| {
            let allocation = run_policy(config, &scenario, policy)?;
            let report = utility_against_target(
                &scenario.rab,
                &allocation,
                config.objective,
                &scenario.target,
            )?;
            Ok(PolicyOutcome {
                policy,
                allocation,
                report,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AllocateReport {
        scenario: config.scenario.clone(),
        num_sensors: scenario.rab.num_sensors(),
        slots: scenario.rab.slots(),
        seed: config.seed,
        h: scenario.rab.sensors().iter().map(|s| s.h).collect(),
        budget: scenario.budget,
        target: scenario.target,
        outcomes,
    })
}

/// Parameter varied by a sweep.
#[derive(Debug, Clone, PartialEq)]
pub enum Axis {
    N(Vec<usize>),
    /// Replaces the profiles with identical geometric discounting.
    Delta(Vec<f64>),
    T(Vec<usize>),
}

impl Axis {
    fn len(&self) -> usize {
        match self {
            Axis::N(v) | Axis::T(v) => v.len(),
            Axis::Delta(v) => v.len(),
        }
    }

    fn apply(&self, base: &ExperimentConfig, cell: usize) -> ExperimentConfig {
        let mut config = base.clone();
        let label = match self {
            Axis::N(v) => {
                config.num_sensors = v[cell];
                format!("N={}", v[cell])
            }
            Axis::Delta(v) => {
                config.profiles = ProfileSpec::Identical(v[cell]);
                format!("delta={}", v[cell])
            }
            Axis::T(v) => {
                config.slots = v[cell];
                format!("T={}", v[cell])
            }
        };
        config.scenario = format!("{}/{}", base.scenario, label);
        config
    }
}

impl std::str::FromStr for Axis {
    type Err = Error;

    /// `N=2,3,4`, `delta=0.99,0.995` or `T=50,100`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, values) = s
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("axis `{s}` must look like name=v1,v2")))?;
        let parse_err = |v: &str| Error::Config(format!("bad axis value `{v}`"));
        let items = values.split(',').map(str::trim).filter(|v| !v.is_empty());
        let axis = match name.trim() {
            "N" => Axis::N(items.map(|v| v.parse().map_err(|_| parse_err(v))).collect::<Result<_>>()?),
            "T" => Axis::T(items.map(|v| v.parse().map_err(|_| parse_err(v))).collect::<Result<_>>()?),
            "delta" => {
                Axis::Delta(items.map(|v| v.parse().map_err(|_| parse_err(v))).collect::<Result<_>>()?)
            }
            other => return Err(Error::Config(format!("unknown sweep axis `{other}`"))),
        };
        if axis.len() == 0 {
            return Err(Error::Config("sweep axis has no values".into()));
        }
        Ok(axis)
    }
}

/// Mean and minimum objective over repetitions of one sweep cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub scenario: String,
    pub policy: Policy,
    #[serde(rename = "N")]
    pub num_sensors: usize,
    #[serde(rename = "T")]
    pub slots: usize,
    pub repetitions: u64,
    pub objective_mean: f64,
    pub objective_min: f64,
    /// `objective_mean` over the largest mean of the same policy across the
    /// sweep; only set on request.
    pub objective_normalized: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<ResultRow>,
    pub summary: Vec<SummaryRow>,
}

impl SweepResult {
    /// Fills `objective_normalized` per policy. Raw rows are untouched.
    pub fn normalize_per_policy(&mut self) {
        for row in &mut self.summary {
            row.objective_normalized = None;
        }
        let policies: Vec<Policy> = {
            let mut p: Vec<_> = self.summary.iter().map(|r| r.policy).collect();
            p.sort();
            p.dedup();
            p
        };
        for policy in policies {
            let max = self
                .summary
                .iter()
                .filter(|r| r.policy == policy)
                .map(|r| r.objective_mean)
                .fold(f64::NEG_INFINITY, f64::max);
            for row in self.summary.iter_mut().filter(|r| r.policy == policy) {
                row.objective_normalized = Some(if max > 0.0 {
                    row.objective_mean / max
                } else {
                    row.objective_mean
                });
            }
        }
    }
}

/// Runs every axis value for `repetitions` repetitions. Repetition `k` of a
/// cell uses seed [`derive_seed`]`(base.seed, k)`. Cells run in parallel;
/// rows come back ordered by (axis position, policy, repetition).
pub fn sweep(base: &ExperimentConfig, axis: &Axis, repetitions: u64) -> Result<SweepResult> {
    if repetitions == 0 {
        return Err(Error::Config("repetitions must be at least 1".into()));
    }
    let jobs: Vec<(usize, u64)> = (0..axis.len())
        .flat_map(|cell| (0..repetitions).map(move |rep| (cell, rep)))
        .collect();
    let results: Vec<(usize, Vec<ResultRow>)> = jobs
        .par_iter()
        .map(|&(cell, rep)| {
            let mut config = axis.apply(base, cell);
            config.seed = derive_seed(base.seed, rep);
            run_repetition(&config, rep).map(|rows| (cell, rows))
        })
        .collect::<Result<_>>()?;

    let mut keyed: Vec<(usize, ResultRow)> = results
        .into_iter()
        .flat_map(|(cell, rows)| rows.into_iter().map(move |r| (cell, r)))
        .collect();
    keyed.sort_by(|(ca, a), (cb, b)| {
        (ca, a.policy, a.repetition).cmp(&(cb, b.policy, b.repetition))
    });

    let mut summary: Vec<SummaryRow> = Vec::new();
    for group in keyed.chunk_by(|(ca, a), (cb, b)| ca == cb && a.policy == b.policy) {
        let first = &group[0].1;
        let values: Vec<f64> = group.iter().map(|(_, r)| r.objective).collect();
        summary.push(SummaryRow {
            scenario: first.scenario.clone(),
            policy: first.policy,
            num_sensors: first.num_sensors,
            slots: first.slots,
            repetitions: values.len() as u64,
            objective_mean: values.iter().sum::<f64>() / values.len() as f64,
            objective_min: values.iter().copied().fold(f64::INFINITY, f64::min),
            objective_normalized: None,
        });
    }
    Ok(SweepResult {
        rows: keyed.into_iter().map(|(_, r)| r).collect(),
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base(n: usize, delta: f64, slots: usize, policies: Vec<Policy>) -> ExperimentConfig {
        ExperimentConfig {
            scenario: "test".into(),
            num_sensors: n,
            slots,
            profiles: ProfileSpec::Identical(delta),
            objective: crate::rate_alloc::Objective::MaxMin,
            dara: Default::default(),
            h: HDistribution::Constant(200.0),
            qbar: 1.0,
            alpha: AlphaRule::Uniform,
            seed: 11,
            policies,
            budget: None,
        }
    }

    #[test]
    fn seed_mix_is_stable() {
        // SplitMix64 reference outputs for state 0 and 1 (first draw).
        assert_eq!(derive_seed(0, 0), 0xE220_A839_7B1D_CDAF);
        assert_ne!(derive_seed(5, 0), derive_seed(5, 1));
        assert_eq!(derive_seed(5, 1), derive_seed(6, 0));
    }

    #[test]
    fn normal_h_is_reproducible_and_clamped() {
        let mut c = base(4, 0.9, 10, vec![Policy::Rr]);
        c.h = HDistribution::Normal { mean: 200.0, stddev: 20.0 };
        let a = build_rab(&c).unwrap();
        let b = build_rab(&c).unwrap();
        assert_eq!(a, b);
        assert!(a.sensors().iter().all(|s| s.h > 100.0));
        c.h = HDistribution::Normal { mean: -50.0, stddev: 1.0 };
        assert!(build_rab(&c).unwrap().sensors().iter().all(|s| s.h == MIN_H));
    }

    #[test]
    fn linspace_profiles() {
        let mut c = base(3, 0.9, 5, vec![Policy::Dara]);
        c.profiles = ProfileSpec::Linspace { low: 0.990, high: 0.992 };
        let rab = build_rab(&c).unwrap();
        let d: Vec<f64> = rab.sensors().iter().map(|s| s.profile.delta().unwrap()).collect();
        assert_eq!(d[0], 0.990);
        assert!((d[1] - 0.991).abs() < 1e-15);
        assert!((d[2] - 0.992).abs() < 1e-15);
    }

    #[test]
    fn single_sensor_policies_agree() {
        let c = base(1, 0.9, 6, Policy::ALL.to_vec());
        let rows = run_scenario(&c).unwrap();
        assert_eq!(rows.len(), 6);
        for row in &rows {
            assert_eq!(row.objective, rows[0].objective);
        }
    }

    #[test]
    fn dara_beats_round_robin_on_long_identical_block() {
        let c = base(6, 0.99, 500, vec![Policy::Dara, Policy::Rrr]);
        let rows = run_scenario(&c).unwrap();
        assert!(rows[0].objective > rows[1].objective);
    }

    #[test]
    fn dara_close_to_exhaustive() {
        let c = base(2, 0.5, 10, vec![Policy::Dara, Policy::Optimal]);
        let rows = run_scenario(&c).unwrap();
        let (dara, opt) = (rows[0].objective, rows[1].objective);
        let coeff = 0.5 * 200.0;
        let c_bound = coeff * (1.0 - 0.5f64.powi(10)) / 0.5;
        assert!(dara >= opt - c_bound * 0.5f64.powi(10));
        assert!(dara <= opt + 1e-12);
    }

    #[test]
    fn decomposition_requires_identical_profiles() {
        let mut c = base(2, 0.9, 6, vec![Policy::Decomposition]);
        c.profiles = ProfileSpec::Linspace { low: 0.9, high: 0.95 };
        assert!(matches!(
            run_scenario(&c),
            Err(Error::NeedsIdenticalExponential(_))
        ));
    }

    #[test]
    fn budget_override_checked() {
        let mut c = base(2, 0.5, 4, vec![Policy::Dara]);
        c.budget = Some(5.0);
        assert!(matches!(prepare(&c), Err(Error::BudgetOutOfRange { .. })));
        c.budget = Some(1.875);
        assert_eq!(prepare(&c).unwrap().budget, 1.875);
    }

    #[test]
    fn oracle_guard_propagates() {
        let c = base(3, 0.9, 40, vec![Policy::Optimal]);
        assert!(matches!(run_scenario(&c), Err(Error::InstanceTooLarge { .. })));
    }

    #[test]
    fn axis_parsing() {
        assert_eq!("N=2,3".parse::<Axis>().unwrap(), Axis::N(vec![2, 3]));
        assert_eq!("delta=0.99, 0.995".parse::<Axis>().unwrap(), Axis::Delta(vec![0.99, 0.995]));
        assert_eq!("T=50".parse::<Axis>().unwrap(), Axis::T(vec![50]));
        assert!("x=1".parse::<Axis>().is_err());
        assert!("N=".parse::<Axis>().is_err());
        assert!("N=a".parse::<Axis>().is_err());
    }

    #[test]
    fn sweep_orders_and_summarizes() {
        let c = base(2, 0.9, 20, vec![Policy::Rr, Policy::Dara]);
        let mut result = sweep(&c, &Axis::N(vec![3, 2]), 2).unwrap();
        assert_eq!(result.rows.len(), 2 * 2 * 2);
        let keys: Vec<(String, Policy, u64)> = result
            .rows
            .iter()
            .map(|r| (r.scenario.clone(), r.policy, r.repetition))
            .collect();
        assert_eq!(keys[0], ("test/N=3".into(), Policy::Dara, 0));
        assert_eq!(keys[1], ("test/N=3".into(), Policy::Dara, 1));
        assert_eq!(keys[2], ("test/N=3".into(), Policy::Rr, 0));
        assert_eq!(keys[4].0, "test/N=2");
        assert_eq!(result.summary.len(), 4);
        assert_eq!(result.summary[0].repetitions, 2);
        result.normalize_per_policy();
        let dara_norm: Vec<f64> = result
            .summary
            .iter()
            .filter(|r| r.policy == Policy::Dara)
            .map(|r| r.objective_normalized.unwrap())
            .collect();
        assert_eq!(dara_norm.iter().copied().fold(0.0, f64::max), 1.0);
    }
}
