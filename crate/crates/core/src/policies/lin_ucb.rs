use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{beta_t, BanditConfig, Observer, Phase, PolicyError, RunTrace, SufficientStats};
use crate::instances::{ArmSet, BanditInstance};
use crate::numerics::{Cholesky, SymMatrix};
use crate::real::{dot, Real};

/// [`lin_ucb_step`](super::lin_ucb_step) on an already factored `V̄`.
pub fn lin_ucb_step_factored<T: Real>(
    vbar: &Cholesky<T>,
    arms: &ArmSet<T>,
    theta_hat: &[T],
    beta: T,
) -> usize {
    let mut best = 0usize;
    let mut best_score = T::neg_infinity();
    for (i, x) in arms.iter().enumerate() {
        let score = dot(x, theta_hat) + beta * vbar.inv_quad_form(x).max(T::zero()).sqrt();
        if score > best_score {
            best = i;
            best_score = score;
        }
    }
    best
}

/// LinUCB from the round after `trace`'s last one to the horizon, starting
/// from `V̄ = V + αI` and `s`. Returns the final unregularized statistics.
pub fn run_lin_ucb<T: Real, R: Rng + ?Sized, O: Observer<T> + ?Sized>(
    mut stats: SufficientStats<T>,
    env: &BanditInstance<T>,
    config: &BanditConfig<T>,
    rng: &mut R,
    trace: &mut RunTrace<T>,
    observer: &mut O,
) -> Result<SufficientStats<T>, PolicyError<T>>
where
    StandardNormal: Distribution<T>,
{
    let arms = env.arm_set();
    let d = arms.dim();
    let mut vbar: SymMatrix<T> = stats.v.clone();
    vbar.add_diag_mut(config.alpha);
    let mut chol = vbar.cholesky()?;
    for t in trace.len() + 1..=config.horizon {
        let theta_hat = chol.solve(&stats.s)?;
        let beta = beta_t(t, d, config.alpha, config.sigma, config.horizon);
        observer.lin_ucb_round(t, &vbar, &theta_hat, beta);
        let arm = lin_ucb_step_factored(&chol, arms, &theta_hat, beta);
        let x = arms.arm(arm);
        let reward = env.sample_unchecked(arm, rng);
        stats.observe(x, reward);
        vbar.rank1_update_mut(x, T::one())?;
        chol.rank1_update(x)?;
        trace.push(arm, env.mean(arm), reward, Phase::II);
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::make_synthetic_instance;
    use crate::policies::{run_plain_lin_ucb_baseline, Phase2Policy};
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn noiseless_lin_ucb_settles_on_best_arm() {
        let env = make_synthetic_instance(3, 15, 3, 11).unwrap();
        let cfg = BanditConfig::new(3000, 0.0, Phase2Policy::LinUcb);
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let tr = run_plain_lin_ucb_baseline(&env, &cfg, &mut rng).unwrap();
        let (best, _) = env.best_arm();
        let mut counts = vec![0usize; env.arm_set().len()];
        for r in &tr.rounds[2000..] {
            counts[r.arm] += 1;
        }
        let mode = (0..counts.len()).max_by_key(|&i| (counts[i], usize::MAX - i)).unwrap();
        assert_eq!(mode, best, "{counts:?}");
    }

    #[test]
    fn returned_stats_match_replay() {
        let env = make_synthetic_instance(4, 20, 4, 3).unwrap().with_sigma(0.5).unwrap();
        let cfg = BanditConfig::new(2000, 0.5, Phase2Policy::LinUcb);
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let mut trace = RunTrace::default();
        let st = run_lin_ucb(SufficientStats::new(4), &env, &cfg, &mut rng, &mut trace, &mut ()).unwrap();
        assert_eq!(trace.replay_stats(env.arm_set()), st);
    }
}
