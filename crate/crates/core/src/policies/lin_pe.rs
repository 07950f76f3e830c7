use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{surviving_among, BanditConfig, Observer, Phase, PolicyError, RunTrace, SufficientStats};
use crate::design::{ceil_count, design_in_span, lift};
use crate::instances::BanditInstance;
use crate::real::Real;

/// `8·√(d²σ²·ln T / n)`
fn elimination_threshold<T: Real>(d: usize, sigma: T, horizon: usize, n: T) -> T {
    let df = T::from_usize_lossy(d);
    let ln_t = T::from_usize_lossy(horizon).ln();
    T::lit(8.0) * (df * df * sigma * sigma * ln_t / n).sqrt()
}

/// Phased elimination warm-started from the Phase-I estimate.
///
/// The Phase-I estimate prunes the arm set with a threshold built from `τ`.
/// Each episode then runs a fresh design over the survivors (solved inside
/// their span), pulls every support arm `⌈λ_a·T'⌉` times with reset
/// statistics, and eliminates among the survivors. `T'` starts at
/// `max(2τ/3, d(d+1))` and doubles per episode. Returns the final surviving
/// set.
pub fn run_lin_pe<T: Real, R: Rng + ?Sized, O: Observer<T> + ?Sized>(
    stats: SufficientStats<T>,
    tau: usize,
    env: &BanditInstance<T>,
    config: &BanditConfig<T>,
    rng: &mut R,
    trace: &mut RunTrace<T>,
    observer: &mut O,
) -> Result<Vec<usize>, PolicyError<T>>
where
    StandardNormal: Distribution<T>,
{
    let arms = env.arm_set();
    let d = arms.dim();
    let horizon = config.horizon;
    let tau_t = T::from_usize_lossy(tau.max(1));
    let theta_hat = stats.estimate()?;
    let all: Vec<usize> = (0..arms.len()).collect();
    let threshold = elimination_threshold(d, config.sigma, horizon, tau_t);
    let mut surviving = surviving_among(arms, &all, &theta_hat, threshold);
    observer.lin_pe_boundary(trace.len(), &surviving);

    let mut t_prime = (T::lit(2.0) * tau_t / T::lit(3.0)).max(T::from_usize_lossy(d * (d + 1)));
    'episodes: while trace.len() < horizon {
        let span = design_in_span(&arms.subset(&surviving), &config.design)?;
        let mut ep = SufficientStats::new(span.basis.len());
        for (j, &w) in span.design.weights.iter().enumerate() {
            if w <= T::zero() {
                continue;
            }
            let arm = surviving[j];
            for _ in 0..ceil_count(w * t_prime) {
                if trace.len() == horizon {
                    break 'episodes;
                }
                let reward = env.sample_unchecked(arm, rng);
                ep.observe(span.projected.arm(j), reward);
                trace.push(arm, env.mean(arm), reward, Phase::II);
            }
        }
        let theta_hat = lift(&span.basis, &ep.estimate()?, d);
        let threshold = elimination_threshold(d, config.sigma, horizon, t_prime);
        surviving = surviving_among(arms, &surviving, &theta_hat, threshold);
        observer.lin_pe_boundary(trace.len(), &surviving);
        t_prime = t_prime * T::lit(2.0);
    }
    Ok(surviving)
}
