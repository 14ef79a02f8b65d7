//! Categorical return distributions and the return-estimation subroutines.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{spread_atom, Grid};
use crate::mdp::{trajectory_return, Mdp, Trajectory};
use crate::planner::EnlargedPolicy;
use crate::scalar::{c, derive_seed, Real, ABS_TOL};

/// A probability vector over the points of a return grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnDistribution<R: Real> {
    grid: Grid<R>,
    weights: Vec<R>,
}

impl<R: Real> ReturnDistribution<R> {
    pub fn new(grid: Grid<R>, weights: Vec<R>) -> Result<Self> {
        if weights.len() != grid.d() {
            return Err(Error::InvalidDistribution(format!(
                "{} weights for a grid of {} points",
                weights.len(),
                grid.d()
            )));
        }
        let mut sum = R::zero();
        for &w in &weights {
            if w < R::zero() {
                return Err(Error::InvalidDistribution(format!("negative weight {w}")));
            }
            sum += w;
        }
        if (sum - R::one()).abs() > c(ABS_TOL) {
            return Err(Error::InvalidDistribution(format!(
                "weights sum to {sum}, not 1"
            )));
        }
        Ok(Self { grid, weights })
    }

    /// Point mass at a grid index.
    pub fn dirac(grid: Grid<R>, index: usize) -> Self {
        let mut weights = vec![R::zero(); grid.d()];
        weights[index] = R::one();
        Self { grid, weights }
    }

    pub fn grid(&self) -> &Grid<R> {
        &self.grid
    }

    pub fn weights(&self) -> &[R] {
        &self.weights
    }

    pub fn mean(&self) -> R {
        self.weights
            .iter()
            .zip(self.grid.points())
            .map(|(&w, &y)| w * y)
            .sum()
    }

    /// Inner product with a vector of per-grid-point values.
    pub fn dot(&self, values: &[R]) -> R {
        self.weights
            .iter()
            .zip(values)
            .map(|(&w, &v)| w * v)
            .sum()
    }
}

/// A batch of expert trajectories from one environment.
#[derive(Debug, Clone)]
pub struct DemoDataset {
    pub env_id: usize,
    pub trajectories: Vec<Trajectory>,
}

impl DemoDataset {
    pub fn new(env_id: usize, trajectories: Vec<Trajectory>) -> Self {
        Self {
            env_id,
            trajectories,
        }
    }

    pub fn count(&self) -> usize {
        self.trajectories.len()
    }

    pub fn validate<R: Real>(&self, mdp: &Mdp<R>) -> Result<()> {
        for t in &self.trajectories {
            t.validate(mdp)?;
        }
        Ok(())
    }
}

/// Estimates the return distribution of the demonstrating policy: the
/// categorical projection of the empirical mixture of per-trajectory returns
/// under the rewards of `mdp`.
///
/// Non-positive returns land on the first grid point; returns above the top
/// grid point land on it.
pub fn erd<R: Real>(
    demos: &DemoDataset,
    mdp: &Mdp<R>,
    grid: &Grid<R>,
) -> Result<ReturnDistribution<R>> {
    if demos.trajectories.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut weights = vec![R::zero(); grid.d()];
    for traj in &demos.trajectories {
        let g = trajectory_return(mdp, traj)?;
        spread_atom(&mut weights, grid, g, R::one());
    }
    let inv = R::one() / c::<R>(demos.count() as f64);
    for w in &mut weights {
        *w *= inv;
    }
    ReturnDistribution::new(grid.clone(), weights)
}

/// Plays `policy` for `K` episodes in an already-discretized MDP and returns
/// the `K` episode returns; deterministic given the seed, with per-episode
/// derived streams so the schedule does not matter.
pub fn rollout<R: Real>(
    policy: &EnlargedPolicy,
    mdp: &Mdp<R>,
    grid: &Grid<R>,
    k: usize,
    rng_seed: u64,
) -> Result<Vec<R>> {
    if k == 0 {
        return Err(Error::InvalidDistribution(
            "rollout needs at least one episode".into(),
        ));
    }
    let mut returns = Vec::with_capacity(k);
    for episode in 0..k {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(rng_seed, &[episode as u64]));
        let mut s = mdp.initial_state();
        let mut y_idx = 0usize;
        for h in 1..=mdp.horizon() {
            let a = policy.action(h, s, y_idx)?;
            let r_idx = grid.exact_index(mdp.reward(h, s, a)).map_err(|_| {
                Error::OffGridReturn(mdp.reward(h, s, a).to_f64().unwrap_or(f64::NAN))
            })?;
            y_idx = (y_idx + r_idx).min(grid.d() - 1);
            s = mdp.sample_next(h, s, a, &mut rng);
        }
        returns.push(grid.value(y_idx));
    }
    Ok(returns)
}

/// Exact frequency vector of returns that already lie on the grid.
///
/// Off-grid inputs are an internal-consistency error: after reward
/// discretization every return must be a grid point, so an off-grid value
/// signals a bug upstream rather than data to be projected.
pub fn empirical_distribution<R: Real>(
    returns: &[R],
    grid: &Grid<R>,
) -> Result<ReturnDistribution<R>> {
    if returns.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut weights = vec![R::zero(); grid.d()];
    for &g in returns {
        let idx = grid.exact_index(g)?;
        weights[idx] += R::one();
    }
    let inv = R::one() / c::<R>(returns.len() as f64);
    for w in &mut weights {
        *w *= inv;
    }
    ReturnDistribution::new(grid.clone(), weights)
}
