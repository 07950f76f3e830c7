//! Nash, p-means and average regret over expected-reward traces.
//!
//! All means go through [`PowerMeanAcc`], a streaming accumulator that works in
//! the log domain for every `p ∉ {1}`, so traces of any length never
//! underflow. The same accumulator backs the one-shot functions and the
//! checkpointed [`RegretReport`], which keeps the two bit-identical.

use serde::Serialize;
use thiserror::Error;

use crate::real::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("no runs to aggregate")]
    NoRuns,
    #[error("run {run} has length {got}, expected {expected}")]
    LengthMismatch {
        run: usize,
        expected: usize,
        got: usize,
    },
    #[error("prefix length {upto} outside 1..={len}")]
    BadPrefix { upto: usize, len: usize },
}

/// Streaming power mean of order `p` over non-negative values.
#[derive(Debug, Clone)]
pub struct PowerMeanAcc<T> {
    p: T,
    n: usize,
    zeros: usize,
    // p == 1: plain sum; p == 0: sum of logs; otherwise log-sum-exp of p·ln x
    sum: T,
    max: T,
}

impl<T: Real> PowerMeanAcc<T> {
    pub fn new(p: T) -> Self {
        Self {
            p,
            n: 0,
            zeros: 0,
            sum: T::zero(),
            max: T::neg_infinity(),
        }
    }

    pub fn push(&mut self, x: T) {
        let x = x.max(T::zero());
        self.n += 1;
        if self.p == T::one() {
            self.sum = self.sum + x;
            return;
        }
        if x == T::zero() {
            self.zeros += 1;
            return;
        }
        if self.p == T::zero() {
            self.sum = self.sum + x.ln();
            return;
        }
        let y = self.p * x.ln();
        if y > self.max {
            self.sum = self.sum * (self.max - y).exp() + T::one();
            self.max = y;
        } else {
            self.sum = self.sum + (y - self.max).exp();
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Current mean; `NaN` when empty.
    pub fn value(&self) -> T {
        if self.n == 0 {
            return T::nan();
        }
        let n = T::from_usize_lossy(self.n);
        if self.p == T::one() {
            return self.sum / n;
        }
        if self.zeros > 0 && self.p <= T::zero() {
            return T::zero();
        }
        if self.p == T::zero() {
            return (self.sum / n).exp();
        }
        if self.zeros == self.n {
            return T::zero();
        }
        let log_mean = self.max + self.sum.ln() - n.ln();
        (log_mean / self.p).exp()
    }
}

/// Power mean of order `p`; `p = 0` is the geometric mean.
pub fn p_mean<T: Real>(values: &[T], p: T) -> T {
    let mut acc = PowerMeanAcc::new(p);
    values.iter().for_each(|&v| acc.push(v));
    acc.value()
}

/// Run-averaged per-round expected rewards and the best arm's mean.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpectedRewardTrace<T> {
    pub mu_star: T,
    pub values: Vec<T>,
}

impl<T: Real> ExpectedRewardTrace<T> {
    pub fn new(mu_star: T, values: Vec<T>) -> Self {
        let values = values.into_iter().map(|v| v.max(T::zero())).collect();
        Self { mu_star, values }
    }

    fn prefix(&self, upto: usize) -> &[T] {
        &self.values[..upto.min(self.values.len())]
    }
}

pub fn nash_regret<T: Real>(trace: &ExpectedRewardTrace<T>, upto: usize) -> T {
    trace.mu_star - p_mean(trace.prefix(upto), T::zero())
}

pub fn avg_regret<T: Real>(trace: &ExpectedRewardTrace<T>, upto: usize) -> T {
    trace.mu_star - p_mean(trace.prefix(upto), T::one())
}

pub fn p_regret<T: Real>(trace: &ExpectedRewardTrace<T>, p: T, upto: usize) -> T {
    trace.mu_star - p_mean(trace.prefix(upto), p)
}

/// Per-round mean over runs of the true expected rewards. Values at each round
/// are summed in sorted order so the result does not depend on run order.
pub fn aggregate_runs<T: Real>(
    run_traces: &[Vec<T>],
    mu_star: T,
) -> Result<ExpectedRewardTrace<T>, MetricsError> {
    let first = run_traces.first().ok_or(MetricsError::NoRuns)?;
    let len = first.len();
    for (run, r) in run_traces.iter().enumerate() {
        if r.len() != len {
            return Err(MetricsError::LengthMismatch {
                run,
                expected: len,
                got: r.len(),
            });
        }
    }
    let k = T::from_usize_lossy(run_traces.len());
    let mut column = Vec::with_capacity(run_traces.len());
    let values = (0..len)
        .map(|t| {
            column.clear();
            column.extend(run_traces.iter().map(|r| r[t]));
            column.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
            column.iter().copied().sum::<T>() / k
        })
        .collect();
    Ok(ExpectedRewardTrace::new(mu_star, values))
}

/// Up to `count` log-spaced rounds from `max(1, T/10⁴)` to `T` inclusive,
/// deduplicated and increasing.
pub fn log_checkpoints(horizon: usize, count: usize) -> Vec<usize> {
    if horizon == 0 || count == 0 {
        return Vec::new();
    }
    let start = (horizon / 10_000).max(1);
    if count == 1 || start == horizon {
        return vec![horizon];
    }
    let (lo, hi) = ((start as f64).ln(), (horizon as f64).ln());
    let mut out: Vec<usize> = (0..count)
        .map(|k| {
            let f = k as f64 / (count - 1) as f64;
            ((lo + f * (hi - lo)).exp().round() as usize).clamp(start, horizon)
        })
        .collect();
    out.dedup();
    if out.last() != Some(&horizon) {
        out.push(horizon);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegretRow<T> {
    pub t: usize,
    /// Run-averaged expected reward at round `t`.
    pub mean_expected_reward: T,
    pub avg_regret: T,
    pub nash_regret: T,
    /// One entry per requested `p`, in request order.
    pub p_regret: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegretReport<T> {
    pub p_list: Vec<T>,
    pub rows: Vec<RegretRow<T>>,
}

impl<T: Real> RegretReport<T> {
    pub fn last(&self) -> Option<&RegretRow<T>> {
        self.rows.last()
    }

    /// Row at exactly round `t`, if it is a checkpoint.
    pub fn at(&self, t: usize) -> Option<&RegretRow<T>> {
        self.rows.iter().find(|r| r.t == t)
    }
}

/// Evaluates all regrets at the given (increasing, 1-based) checkpoints in a
/// single pass.
pub fn regret_report<T: Real>(
    trace: &ExpectedRewardTrace<T>,
    checkpoints: &[usize],
    p_list: &[T],
) -> Result<RegretReport<T>, MetricsError> {
    let len = trace.values.len();
    let mut avg = PowerMeanAcc::new(T::one());
    let mut nash = PowerMeanAcc::new(T::zero());
    let mut ps: Vec<PowerMeanAcc<T>> = p_list.iter().map(|&p| PowerMeanAcc::new(p)).collect();
    let mut rows = Vec::with_capacity(checkpoints.len());
    let mut t = 0;
    for &cp in checkpoints {
        if cp == 0 || cp > len || cp < t {
            return Err(MetricsError::BadPrefix { upto: cp, len });
        }
        while t < cp {
            let v = trace.values[t];
            avg.push(v);
            nash.push(v);
            ps.iter_mut().for_each(|a| a.push(v));
            t += 1;
        }
        rows.push(RegretRow {
            t: cp,
            mean_expected_reward: trace.values[cp - 1],
            avg_regret: trace.mu_star - avg.value(),
            nash_regret: trace.mu_star - nash.value(),
            p_regret: ps.iter().map(|a| trace.mu_star - a.value()).collect(),
        });
    }
    Ok(RegretReport {
        p_list: p_list.to_vec(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn p_mean_examples() {
        for p in [-3.0, -1.0, 0.0, 0.5, 1.0, 2.0] {
            assert_relative_eq!(p_mean(&[0.3, 0.3, 0.3], p), 0.3, epsilon = 1e-15);
        }
        assert_relative_eq!(p_mean(&[1.0, 4.0], 0.0), 2.0, epsilon = 1e-15);
        assert_relative_eq!(p_mean(&[0.5, 2.0], -1.0), 0.8, epsilon = 1e-15);
        assert_eq!(p_mean(&[0.0, 1.0], 0.0), 0.0);
        assert_eq!(p_mean(&[0.0, 1.0], -2.0), 0.0);
        assert_relative_eq!(p_mean(&[0.0, 1.0], 1.0), 0.5);
        assert_relative_eq!(p_mean(&[0.0, 1.0], 2.0), 0.5f64.sqrt(), epsilon = 1e-15);
        assert_eq!(p_mean(&[0.0, 0.0], 0.5), 0.0);
    }

    #[test]
    fn no_underflow_on_long_traces() {
        let v = vec![1e-3; 1_000_000];
        assert_relative_eq!(p_mean(&v, 0.0), 1e-3, max_relative = 1e-9);
        assert_relative_eq!(p_mean(&v, -2.0), 1e-3, max_relative = 1e-9);
        let tiny = vec![1e-200, 1e-200];
        assert_relative_eq!(p_mean(&tiny, -3.0), 1e-200, max_relative = 1e-9);
    }

    #[test]
    fn nash_regret_examples() {
        let t = ExpectedRewardTrace::<f64>::new(0.7, vec![0.7; 5]);
        assert!(nash_regret(&t, 5).abs() < 1e-15);
        let t = ExpectedRewardTrace::new(1.0, vec![1.0, 0.25, 1.0, 0.25]);
        assert_relative_eq!(nash_regret(&t, 4), 0.5, epsilon = 1e-15);
        assert!(nash_regret(&t, 4) >= avg_regret(&t, 4));
    }

    #[test]
    fn avg_regret_examples() {
        let t = ExpectedRewardTrace::new(1.0, vec![1.0, 1.0]);
        assert_eq!(avg_regret(&t, 2), 0.0);
        let t = ExpectedRewardTrace::new(1.0, vec![1.0, 0.0]);
        assert_eq!(avg_regret(&t, 2), 0.5);
        assert!(avg_regret(&t, 2) <= nash_regret(&t, 2));
    }

    #[test]
    fn p_regret_routing_is_bit_identical() {
        let t = ExpectedRewardTrace::<f64>::new(0.9, vec![0.2, 0.5, 0.9, 0.1, 0.8]);
        for upto in 1..=5 {
            assert_eq!(p_regret(&t, 1.0, upto).to_bits(), avg_regret(&t, upto).to_bits());
            assert_eq!(p_regret(&t, 0.0, upto).to_bits(), nash_regret(&t, upto).to_bits());
        }
    }

    #[test]
    fn p_grid_ordering_on_fixed_prefix() {
        let t = ExpectedRewardTrace::<f64>::new(0.9, vec![0.2, 0.5, 0.9, 0.1, 0.8]);
        let grid = [-2.0, -1.0, 0.0, 0.5, 1.0];
        let regrets: Vec<f64> = grid.iter().map(|&p| p_regret(&t, p, 5)).collect();
        for w in regrets.windows(2) {
            assert!(w[0] >= w[1] - 1e-12, "{regrets:?}");
        }
        // oracle: direct formula with exact-ish f64 arithmetic on five values
        let direct = |p: f64| -> f64 {
            let s: f64 = t.values.iter().map(|v| v.powf(p)).sum::<f64>() / 5.0;
            0.9 - s.powf(1.0 / p)
        };
        for &p in &[-2.0, -1.0, 0.5] {
            assert_relative_eq!(p_regret(&t, p, 5), direct(p), epsilon = 1e-12);
        }
    }

    #[test]
    fn aggregate_examples() {
        let a = vec![0.1, 0.2, 0.3];
        let single = aggregate_runs(std::slice::from_ref(&a), 0.5).unwrap();
        assert_eq!(single.values, a);
        let b = vec![0.3, 0.4, 0.5];
        let two = aggregate_runs(&[a.clone(), b.clone()], 0.5).unwrap();
        for (i, v) in two.values.iter().enumerate() {
            assert_relative_eq!(*v, (a[i] + b[i]) / 2.0, epsilon = 1e-15);
        }
        let swapped = aggregate_runs(&[b, a], 0.5).unwrap();
        assert_eq!(two, swapped);
        assert_eq!(aggregate_runs::<f64>(&[], 1.0), Err(MetricsError::NoRuns));
        assert!(matches!(
            aggregate_runs(&[vec![0.1], vec![0.1, 0.2]], 1.0),
            Err(MetricsError::LengthMismatch { run: 1, .. })
        ));
    }

    #[test]
    fn checkpoints_are_log_spaced_and_end_at_horizon() {
        let c = log_checkpoints(100_000, 64);
        assert_eq!(c[0], 10);
        assert_eq!(*c.last().unwrap(), 100_000);
        assert!(c.windows(2).all(|w| w[0] < w[1]));
        assert!(c.len() <= 64);
        assert_eq!(log_checkpoints(1, 64), vec![1]);
        let small = log_checkpoints(5, 64);
        assert_eq!(small, vec![1, 2, 3, 4, 5]);
    }

    #[test]
    fn report_matches_one_shot_functions() {
        let vals: Vec<f64> = (0..500).map(|i| 0.05 + 0.9 * ((i * 37 % 101) as f64 / 101.0)).collect();
        let t = ExpectedRewardTrace::new(0.95, vals);
        let cps = log_checkpoints(500, 16);
        let ps = [-1.5, 0.0, 0.5, 1.0];
        let rep = regret_report(&t, &cps, &ps).unwrap();
        for row in &rep.rows {
            assert_eq!(row.nash_regret.to_bits(), nash_regret(&t, row.t).to_bits());
            assert_eq!(row.avg_regret.to_bits(), avg_regret(&t, row.t).to_bits());
            for (k, &p) in ps.iter().enumerate() {
                assert_eq!(row.p_regret[k].to_bits(), p_regret(&t, p, row.t).to_bits());
            }
        }
        assert!(regret_report(&t, &[0], &ps).is_err());
        assert!(regret_report(&t, &[501], &ps).is_err());
    }

    proptest! {
        #[test]
        fn am_gm(vals in prop::collection::vec(0.0f64..1.0, 1..200)) {
            let t = ExpectedRewardTrace::new(1.0, vals.clone());
            for upto in 1..=vals.len() {
                prop_assert!(nash_regret(&t, upto) >= avg_regret(&t, upto) - 1e-9);
            }
        }

        #[test]
        fn log_domain_matches_naive_product(vals in prop::collection::vec(0.01f64..1.0, 1..40)) {
            let naive = vals.iter().product::<f64>().powf(1.0 / vals.len() as f64);
            prop_assert!((p_mean(&vals, 0.0) - naive).abs() <= 1e-9);
        }

        #[test]
        fn power_mean_monotone(vals in prop::collection::vec(1e-6f64..1.0, 1..100)) {
            let grid = [-2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0];
            let means: Vec<f64> = grid.iter().map(|&p| p_mean(&vals, p)).collect();
            for w in means.windows(2) {
                prop_assert!(w[0] <= w[1] + 1e-9);
            }
        }
    }
}
