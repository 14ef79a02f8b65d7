//! Online projected gradient descent over discretized utilities: at each
//! iteration, plan under the current utility, compare the induced return
//! distribution with the expert's, step along the difference, and project
//! back onto the monotone-Lipschitz polytope.

use crate::caty::EnvSetup;
use crate::error::{Error, Result};
use crate::grid::{discretize_reward, Grid};
use crate::planner::{enlarged_return_distribution, plan};
use crate::returns::{empirical_distribution, rollout, ReturnDistribution};
use crate::scalar::{c, derive_seed, Real};
use crate::utility::{project_polytope, DiscretizedUtility, ProjectionVariant};

/// Step size that works well for single-environment survey-scale runs,
/// where the projection swallows small steps and the feasible set is large.
pub const ALPHA_SURVEY: f64 = 100.0;

/// Step size for the random multi-state suites. With demonstrations from
/// several environments the feasible set shrinks and noticeably smaller
/// steps than [`ALPHA_SURVEY`] tend to work better.
pub const ALPHA_RANDOM_SUITE: f64 = 1.0;

/// Step-size schedule.
#[derive(Debug, Clone, Copy)]
pub enum StepSize<R: Real> {
    Fixed(R),
    /// `H sqrt(d - 2) / (2 N sqrt(T))`: the diameter of the polytope over
    /// the gradient bound and the iteration count.
    Theory,
}

/// How the per-iteration return distributions are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientMode {
    /// Monte-Carlo rollouts of the planned policy (the learning algorithm).
    Rollout,
    /// Exact distribution of the planned policy; a deterministic test mode
    /// isolating the optimization behavior from sampling noise.
    ExactDistribution,
}

#[derive(Debug, Clone)]
pub struct TractorConfig<R: Real> {
    pub t_iters: usize,
    pub k_rollouts: usize,
    pub alpha: StepSize<R>,
    pub u0: DiscretizedUtility<R>,
    pub lipschitz: R,
    pub seed: u64,
    pub gradient_mode: GradientMode,
}

/// Full trace of a learning run.
#[derive(Debug, Clone)]
pub struct LearnRecord<R: Real> {
    /// The iterates `u_0, ..., u_{T-1}`.
    pub iterates: Vec<DiscretizedUtility<R>>,
    pub grad_norms: Vec<R>,
    /// Summed compatibility of each iterate: planner optimum minus expert
    /// value, summed over environments.
    pub sum_compat: Vec<R>,
    /// The averaged utility `(1/T) sum of iterates`.
    pub average: DiscretizedUtility<R>,
}

/// Theory step size `H sqrt(d - 2) / (2 N sqrt(T))`.
pub fn theory_step_size<R: Real>(grid: &Grid<R>, num_envs: usize, t_iters: usize) -> Result<R> {
    let d = grid.d();
    if d < 3 {
        return Err(Error::DegenerateGrid(format!(
            "step-size schedule needs at least 3 grid points, got {d}"
        )));
    }
    if t_iters == 0 || num_envs == 0 {
        return Err(Error::MismatchedLengths(
            "iteration and environment counts must be positive".into(),
        ));
    }
    let h = c::<R>(grid.horizon() as f64);
    Ok(h * c::<R>(((d - 2) as f64).sqrt())
        / (c::<R>(2.0) * c::<R>(num_envs as f64) * c::<R>((t_iters as f64).sqrt())))
}

/// Runs the projected-gradient learner and returns its full trace;
/// deterministic given the seed.
pub fn learn<R: Real>(
    setups: &[EnvSetup<'_, R>],
    grid: &Grid<R>,
    config: &TractorConfig<R>,
) -> Result<LearnRecord<R>> {
    if setups.is_empty() {
        return Err(Error::MismatchedLengths(
            "at least one environment is required".into(),
        ));
    }
    if config.t_iters == 0 || config.k_rollouts == 0 {
        return Err(Error::MismatchedLengths(
            "iteration and rollout counts must be positive".into(),
        ));
    }
    if !config.u0.grid().compatible(grid) {
        return Err(Error::GridMismatch(
            "initial utility lives on a different grid".into(),
        ));
    }
    if config.u0.constraint_violation(Some(config.lipschitz)) > c(1e-8) {
        return Err(Error::InvalidUtility(
            "initial utility violates the polytope constraints".into(),
        ));
    }

    let alpha = match config.alpha {
        StepSize::Fixed(a) => {
            if a <= R::zero() {
                return Err(Error::InvalidUtility(format!(
                    "step size {a} must be positive"
                )));
            }
            a
        }
        StepSize::Theory => theory_step_size(grid, setups.len(), config.t_iters)?,
    };

    // Expert estimates once, planning models discretized once.
    let expert_dists: Vec<ReturnDistribution<R>> = setups
        .iter()
        .map(|s| s.expert_distribution(grid))
        .collect::<Result<_>>()?;
    let planning_mdps: Vec<_> = setups
        .iter()
        .map(|s| s.planning_mdp().map(|m| discretize_reward(&m, grid)))
        .collect::<Result<_>>()?;

    let d = grid.d();
    let n_envs = setups.len();
    let grad_bound = c::<R>(2.0 * n_envs as f64) + c(1e-9);

    let mut current = config.u0.clone();
    let mut iterates = Vec::with_capacity(config.t_iters);
    let mut grad_norms = Vec::with_capacity(config.t_iters);
    let mut sum_compat = Vec::with_capacity(config.t_iters);
    let mut average = vec![R::zero(); d];

    for t in 0..config.t_iters {
        let mut gradient = vec![R::zero(); d];
        let mut compat_t = R::zero();
        for (i, mdp_bar) in planning_mdps.iter().enumerate() {
            let out = plan(&current, mdp_bar, grid)?;
            let eta_t = match config.gradient_mode {
                GradientMode::Rollout => {
                    let returns = rollout(
                        &out.policy,
                        mdp_bar,
                        grid,
                        config.k_rollouts,
                        derive_seed(config.seed, &[t as u64, i as u64]),
                    )?;
                    empirical_distribution(&returns, grid)?
                }
                GradientMode::ExactDistribution => {
                    enlarged_return_distribution(&out.policy, mdp_bar, grid)?
                }
            };
            for (g, (&w_t, &w_e)) in gradient
                .iter_mut()
                .zip(eta_t.weights().iter().zip(expert_dists[i].weights()))
            {
                *g += w_t - w_e;
            }
            compat_t += out.j_star - expert_dists[i].dot(current.values());
        }

        let norm = gradient.iter().map(|&g| g * g).sum::<R>().sqrt();
        debug_assert!(norm <= grad_bound, "gradient norm {norm} above 2N");
        grad_norms.push(norm);
        sum_compat.push(compat_t);
        for (avg, &u) in average.iter_mut().zip(current.values()) {
            *avg += u / c(config.t_iters as f64);
        }
        iterates.push(current.clone());

        if t + 1 < config.t_iters {
            let stepped: Vec<R> = current
                .values()
                .iter()
                .zip(&gradient)
                .map(|(&u, &g)| u - alpha * g)
                .collect();
            current = project_polytope(
                &stepped,
                grid,
                config.lipschitz,
                ProjectionVariant::StrictBoundary,
            )?;
        }
    }

    let average = DiscretizedUtility::new(grid.clone(), average)?;
    debug_assert!(average.constraint_violation(Some(config.lipschitz)) <= c(1e-8));
    Ok(LearnRecord {
        iterates,
        grad_norms,
        sum_compat,
        average,
    })
}
