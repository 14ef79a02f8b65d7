//! Compatibility computation and threshold classification of candidate
//! utilities against demonstrations from one or more environments.

use crate::error::{Error, Result};
use crate::estimation::EmpiricalModel;
use crate::grid::{project_categorical, Grid};
use crate::mdp::{HistoryPolicy, Mdp};
use crate::oracle::expert_coverage;
use crate::planner::plan;
use crate::returns::{erd, DemoDataset, ReturnDistribution};
use crate::scalar::{c, Real};
use crate::utility::{DiscretizedUtility, Utility};

/// Where the transition model for planning comes from.
#[derive(Clone, Copy)]
pub enum TransitionSource<'a, R: Real> {
    /// Use the environment's true transitions (golden-test mode).
    Exact,
    /// Use an estimate built by exploration.
    Empirical(&'a EmpiricalModel<R>),
}

/// Where the expert's return distribution comes from.
#[derive(Clone, Copy)]
pub enum ExpertSource<'a, R: Real> {
    /// Estimate from demonstrated trajectories.
    Demos(&'a DemoDataset),
    /// Exact distribution of a known expert policy (golden-test mode).
    ExactPolicy(&'a HistoryPolicy<R>),
    /// A precomputed distribution on the grid.
    Distribution(&'a ReturnDistribution<R>),
}

/// One environment's inputs to compatibility computations.
#[derive(Clone, Copy)]
pub struct EnvSetup<'a, R: Real> {
    pub env: &'a Mdp<R>,
    pub expert: ExpertSource<'a, R>,
    pub transitions: TransitionSource<'a, R>,
}

impl<'a, R: Real> EnvSetup<'a, R> {
    pub fn exact(env: &'a Mdp<R>, expert: &'a HistoryPolicy<R>) -> Self {
        Self {
            env,
            expert: ExpertSource::ExactPolicy(expert),
            transitions: TransitionSource::Exact,
        }
    }

    /// Resolves the expert estimate on the grid.
    pub fn expert_distribution(&self, grid: &Grid<R>) -> Result<ReturnDistribution<R>> {
        match self.expert {
            ExpertSource::Demos(demos) => erd(demos, self.env, grid),
            ExpertSource::ExactPolicy(policy) => {
                let (_, atoms) = expert_coverage(self.env, policy)?;
                project_categorical(&atoms, grid)
            }
            ExpertSource::Distribution(dist) => {
                if !dist.grid().compatible(grid) {
                    return Err(Error::GridMismatch(
                        "expert distribution lives on a different grid".into(),
                    ));
                }
                Ok(dist.clone())
            }
        }
    }

    /// The MDP used for planning: true or estimated transitions, always the
    /// environment's own rewards.
    pub fn planning_mdp(&self) -> Result<Mdp<R>> {
        match self.transitions {
            TransitionSource::Exact => Ok(self.env.clone()),
            TransitionSource::Empirical(model) => model.to_mdp(self.env),
        }
    }
}

/// Per-environment compatibility: estimated expert value, estimated optimal
/// value, and their gap.
#[derive(Debug, Clone, Copy)]
pub struct Compatibility<R: Real> {
    pub j_expert: R,
    pub j_star: R,
    pub c_hat: R,
}

/// Estimates the (non)compatibility of `utility` with one environment's
/// demonstrations: the expert value is the inner product of the discretized
/// utility with the estimated return distribution, the optimal value comes
/// from planning on the (estimated) model, and the gap is their difference.
/// Small negative gaps are estimation noise and are reported as-is.
pub fn compatibility<R: Real>(
    utility: &Utility<R>,
    setup: &EnvSetup<'_, R>,
    grid: &Grid<R>,
) -> Result<Compatibility<R>> {
    let discretized = DiscretizedUtility::sample(utility, grid)?;
    compatibility_discretized(&discretized, setup, grid)
}

/// Same as [`compatibility`] for an already-discretized utility.
pub fn compatibility_discretized<R: Real>(
    utility: &DiscretizedUtility<R>,
    setup: &EnvSetup<'_, R>,
    grid: &Grid<R>,
) -> Result<Compatibility<R>> {
    let eta_expert = setup.expert_distribution(grid)?;
    let j_expert = eta_expert.dot(utility.values());
    let planning_mdp = setup.planning_mdp()?;
    let out = plan(utility, &planning_mdp, grid)?;
    Ok(Compatibility {
        j_expert,
        j_star: out.j_star,
        c_hat: out.j_star - j_expert,
    })
}

/// Classification report for one utility across all environments.
#[derive(Debug, Clone)]
pub struct CompatibilityReport<R: Real> {
    pub per_env: Vec<Compatibility<R>>,
    pub total: R,
    pub threshold: R,
    pub accepted: bool,
}

/// Classifies each utility: accepted iff the summed compatibility across
/// environments stays within the threshold.
pub fn classify<R: Real>(
    utilities: &[Utility<R>],
    setups: &[EnvSetup<'_, R>],
    threshold: R,
    grid: &Grid<R>,
) -> Result<Vec<CompatibilityReport<R>>> {
    if setups.is_empty() {
        return Err(Error::MismatchedLengths(
            "at least one environment is required".into(),
        ));
    }
    let mut reports = Vec::with_capacity(utilities.len());
    for utility in utilities {
        let mut per_env = Vec::with_capacity(setups.len());
        let mut total = R::zero();
        for setup in setups {
            let comp = compatibility(utility, setup, grid)?;
            total += comp.c_hat;
            per_env.push(comp);
        }
        reports.push(CompatibilityReport {
            per_env,
            total,
            threshold,
            accepted: total <= threshold,
        });
    }
    Ok(reports)
}

/// Relative (non)compatibility `(J* - J^E) / J*`, the suboptimality of the
/// demonstration as a fraction of the optimum.
pub fn relative_compatibility<R: Real>(
    utility: &Utility<R>,
    setup: &EnvSetup<'_, R>,
    grid: &Grid<R>,
) -> Result<R> {
    let comp = compatibility(utility, setup, grid)?;
    if comp.j_star <= c(1e-9) {
        return Err(Error::DivisionGuard(format!(
            "optimal value {} too small for a relative gap",
            comp.j_star
        )));
    }
    Ok(comp.c_hat / comp.j_star)
}
