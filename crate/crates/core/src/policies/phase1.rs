use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{
    phase1_should_stop, BanditConfig, Coin, Observer, Phase, PolicyError, RunTrace,
    SufficientStats,
};
use crate::design::{d_optimal_design_with, round_robin_schedule, DesignError, DesignWeights};
use crate::geometry::{default_n_dirs, john_distribution, JohnDistribution};
use crate::instances::{ArmSet, BanditInstance};
use crate::real::{dot, Real};

/// Arm-set geometry used by Phase I: the D-optimal design and the John
/// distribution. Depends only on the arms, so it is shared across runs.
#[derive(Debug, Clone, PartialEq)]
pub struct Phase1Plan<T> {
    pub design: DesignWeights<T>,
    pub john: JohnDistribution<T>,
}

impl<T: Real> Phase1Plan<T> {
    pub fn compute(arms: &ArmSet<T>, config: &BanditConfig<T>) -> Result<Self, PolicyError<T>> {
        let design = match d_optimal_design_with(arms, &config.design, None) {
            Ok(w) => w,
            Err(DesignError::IterationBudgetExceeded(best)) => *best,
            Err(e) => return Err(e.into()),
        };
        let n_dirs = config.n_dirs.unwrap_or_else(|| default_n_dirs(arms.dim()));
        let john = john_distribution(arms, n_dirs)?;
        Ok(Self { design, john })
    }
}

/// Pulls made in one epoch, split by coin outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EpochCounts {
    /// Rounds whose coin came up on the design side, including those that
    /// fell through to `ρ` after the schedule ran out.
    pub design_flips: usize,
    pub design_pulls: usize,
    pub john_pulls: usize,
}

/// Result of Phase I: the unregularized statistics, the `τ` handed to
/// Phase II and the number of rounds consumed.
#[derive(Debug, Clone, PartialEq)]
pub struct Phase1Outcome<T> {
    pub stats: SufficientStats<T>,
    pub tau_reported: usize,
    pub t_phase1: usize,
    pub stopped: bool,
}

fn sample_index<T: Real, R: Rng + ?Sized>(rho: &[T], rng: &mut R) -> usize {
    let u = T::lit(rng.random::<f64>());
    let mut acc = T::zero();
    let mut last = 0;
    for (i, &w) in rho.iter().enumerate() {
        if w > T::zero() {
            acc = acc + w;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

/// Runs one epoch of `len` rounds. Each round a coin picks either the next
/// arm of the round-robin D-optimal schedule (each support arm `z` is due
/// `⌈λ_z·T̃/3⌉` times, where `T̃ = t_tilde`) or a draw from `ρ`. Once the
/// schedule is exhausted, every round draws from `ρ`.
#[allow(clippy::too_many_arguments)]
pub fn pull_arms_epoch<T: Real, R: Rng + ?Sized>(
    stats: &mut SufficientStats<T>,
    env: &BanditInstance<T>,
    plan: &Phase1Plan<T>,
    t_tilde: usize,
    len: usize,
    coin: Coin,
    rng: &mut R,
    trace: &mut RunTrace<T>,
) -> EpochCounts
where
    StandardNormal: Distribution<T>,
{
    let mut due: Vec<(usize, usize)> = round_robin_schedule(&plan.design.weights, t_tilde);
    due.retain(|&(_, c)| c > 0);
    let mut cursor = 0usize;
    let mut counts = EpochCounts::default();
    let arms = env.arm_set();
    for _ in 0..len {
        let use_design = match coin {
            Coin::Fair => rng.random_bool(0.5),
            Coin::AlwaysDesign => true,
            Coin::AlwaysJohn => false,
        };
        counts.design_flips += usize::from(use_design);
        let arm = if use_design && !due.is_empty() {
            let (arm, left) = &mut due[cursor];
            let arm = *arm;
            *left -= 1;
            if *left == 0 {
                due.remove(cursor);
            } else {
                cursor += 1;
            }
            if cursor >= due.len() {
                cursor = 0;
            }
            counts.design_pulls += 1;
            arm
        } else {
            counts.john_pulls += 1;
            sample_index(&plan.john.rho, rng)
        };
        let reward = env.sample_unchecked(arm, rng);
        stats.observe(arms.arm(arm), reward);
        trace.push(arm, env.mean(arm), reward, Phase::I);
    }
    counts
}

/// Epoch lengths start at `⌈72·ln T⌉` and double. The stopping rule is
/// checked at the end of each complete epoch with `t` the rounds played so
/// far. An epoch that would run past the horizon is cut short and ends the
/// run.
pub fn run_phase1<T: Real, R: Rng + ?Sized, O: Observer<T> + ?Sized>(
    env: &BanditInstance<T>,
    plan: &Phase1Plan<T>,
    config: &BanditConfig<T>,
    rng: &mut R,
    trace: &mut RunTrace<T>,
    observer: &mut O,
) -> Result<Phase1Outcome<T>, PolicyError<T>>
where
    StandardNormal: Distribution<T>,
{
    let arms = env.arm_set();
    let horizon = config.horizon;
    let rule = config.stopping_rule(arms.dim());
    let mut stats = SufficientStats::new(arms.dim());
    let mut t_tilde = first_epoch_len(horizon);
    let mut elapsed = 0usize;
    loop {
        let len = t_tilde.min(horizon - elapsed);
        pull_arms_epoch(&mut stats, env, plan, t_tilde, len, config.coin, rng, trace);
        elapsed += len;
        if len < t_tilde {
            return Ok(Phase1Outcome {
                stats,
                tau_reported: t_tilde,
                t_phase1: elapsed,
                stopped: false,
            });
        }
        let theta_hat = stats.estimate()?;
        let max_est = arms
            .iter()
            .map(|x| dot(x, &theta_hat))
            .fold(T::neg_infinity(), T::max);
        let stop = phase1_should_stop(elapsed, max_est, &rule);
        observer.phase1_epoch(elapsed, &stats, &theta_hat, stop);
        if stop || elapsed == horizon {
            return Ok(Phase1Outcome {
                stats,
                tau_reported: t_tilde,
                t_phase1: elapsed,
                stopped: stop,
            });
        }
        t_tilde *= 2;
    }
}

/// `⌈72·ln T⌉`, at least 1.
pub fn first_epoch_len(horizon: usize) -> usize {
    ((72.0 * (horizon.max(1) as f64).ln()).ceil() as usize).max(1)
}
