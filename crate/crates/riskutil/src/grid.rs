//! Uniform return grids, reward discretization, the categorical projection,
//! and the distribution distances used by the test suites.

use crate::error::{Error, Result};
use crate::mdp::Mdp;
use crate::returns::ReturnDistribution;
use crate::scalar::{c, Real, ABS_TOL};

/// Uniform grid `{0, eps, 2 eps, ..., floor(H/eps) eps}` over `[0, H]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<R: Real> {
    epsilon0: R,
    horizon: usize,
    points: Vec<R>,
}

impl<R: Real> Grid<R> {
    pub fn new(epsilon0: R, horizon: usize) -> Result<Self> {
        if epsilon0 <= R::zero() || !epsilon0.is_finite() {
            return Err(Error::DegenerateGrid(format!(
                "epsilon0 must be positive, got {epsilon0}"
            )));
        }
        if horizon == 0 {
            return Err(Error::DegenerateGrid("horizon must be positive".into()));
        }
        let steps = robust_floor(c::<R>(horizon as f64) / epsilon0);
        let points = (0..=steps)
            .map(|i| c::<R>(i as f64) * epsilon0)
            .collect();
        Ok(Self {
            epsilon0,
            horizon,
            points,
        })
    }

    /// Discretization parameter preset from the sample-complexity schedule
    /// `eps^2 / (72 H L^2 N^2)`.
    pub fn theory_epsilon0(eps: R, horizon: usize, lipschitz: R, num_envs: usize) -> R {
        eps * eps
            / (c::<R>(72.0) * c::<R>(horizon as f64) * lipschitz * lipschitz
                * c::<R>((num_envs * num_envs) as f64))
    }

    pub fn epsilon0(&self) -> R {
        self.epsilon0
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Number of grid points, `floor(H/eps) + 1`.
    pub fn d(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[R] {
        &self.points
    }

    pub fn value(&self, index: usize) -> R {
        self.points[index]
    }

    pub fn max_value(&self) -> R {
        *self.points.last().unwrap()
    }

    /// True when the top grid point coincides with the horizon, i.e. the
    /// grid step divides `H` exactly.
    pub fn covers_horizon(&self) -> bool {
        (self.max_value() - c::<R>(self.horizon as f64)).abs() <= c(ABS_TOL)
    }

    /// Number of grid points available at stage `h` (partial returns lie in
    /// `[0, h-1]`), i.e. `floor((h-1)/eps) + 1`.
    pub fn stage_point_count(&self, h: usize) -> usize {
        if h <= 1 {
            return 1;
        }
        (robust_floor(c::<R>((h - 1) as f64) / self.epsilon0) + 1).min(self.d())
    }

    /// Index of the nearest grid point to `y`, ties broken to the lower
    /// point, clamped to the grid range.
    pub fn nearest_index(&self, y: R) -> usize {
        if y <= R::zero() {
            return 0;
        }
        let q = (y / self.epsilon0).to_f64().unwrap();
        let lo = q.floor();
        let frac = q - lo;
        let idx = if frac <= 0.5 + ABS_TOL {
            lo as usize
        } else {
            lo as usize + 1
        };
        idx.min(self.d() - 1)
    }

    /// Index of `y` when `y` lies on the grid (within tolerance); otherwise
    /// an off-grid error.
    pub fn exact_index(&self, y: R) -> Result<usize> {
        let q = (y / self.epsilon0).to_f64().unwrap();
        let k = q.round();
        if (q - k).abs() > ABS_TOL * (1.0 + q.abs()) {
            return Err(Error::OffGridReturn(y.to_f64().unwrap_or(f64::NAN)));
        }
        let idx = k as usize;
        if k < 0.0 || idx >= self.d() {
            return Err(Error::OffGridReturn(y.to_f64().unwrap_or(f64::NAN)));
        }
        Ok(idx)
    }

    /// Nearest point of the reward grid `{0, eps, ..., floor(1/eps) eps}`
    /// as a grid index, ties broken downward.
    pub fn reward_index(&self, r: R) -> usize {
        let top = robust_floor(R::one() / self.epsilon0);
        let q = (r / self.epsilon0).to_f64().unwrap();
        let lo = q.floor();
        let frac = q - lo;
        let idx = if frac <= 0.5 + ABS_TOL {
            lo.max(0.0) as usize
        } else {
            lo as usize + 1
        };
        idx.min(top)
    }

    pub fn compatible(&self, other: &Self) -> bool {
        self.horizon == other.horizon
            && self.d() == other.d()
            && (self.epsilon0 - other.epsilon0).abs() <= c(1e-12)
    }
}

fn robust_floor<R: Real>(q: R) -> usize {
    let q = q.to_f64().unwrap();
    let k = q.round();
    if (q - k).abs() <= ABS_TOL * (1.0 + q.abs()) {
        k as usize
    } else {
        q.floor() as usize
    }
}

/// Copy of `mdp` with every reward snapped to the nearest reward-grid point
/// (Euclidean projection onto the finite grid, ties broken downward).
pub fn discretize_reward<R: Real>(mdp: &Mdp<R>, grid: &Grid<R>) -> Mdp<R> {
    let mut out = mdp.clone();
    let eps = grid.epsilon0();
    for r in out.rewards_mut() {
        let idx = grid.reward_index(*r);
        *r = c::<R>(idx as f64) * eps;
    }
    out
}

/// Categorical projection of a finite mixture of Dirac atoms onto the grid.
///
/// Each off-grid atom splits between its bracketing grid points with affine
/// weights; atoms below the grid map to the first point and atoms above the
/// last point map to it entirely.
pub fn project_categorical<R: Real>(
    atoms: &[(R, R)],
    grid: &Grid<R>,
) -> Result<ReturnDistribution<R>> {
    let mut weights = vec![R::zero(); grid.d()];
    let mut total = R::zero();
    for &(value, weight) in atoms {
        if weight < R::zero() {
            return Err(Error::InvalidDistribution(format!(
                "negative weight {weight} at value {value}"
            )));
        }
        if !value.is_finite() {
            return Err(Error::InvalidDistribution(format!(
                "non-finite atom value {value}"
            )));
        }
        total += weight;
        spread_atom(&mut weights, grid, value, weight);
    }
    if (total - R::one()).abs() > c(ABS_TOL) {
        return Err(Error::InvalidDistribution(format!(
            "weights sum to {total}, not 1"
        )));
    }
    ReturnDistribution::new(grid.clone(), weights)
}

pub(crate) fn spread_atom<R: Real>(weights: &mut [R], grid: &Grid<R>, value: R, weight: R) {
    let d = grid.d();
    let tol = c::<R>(ABS_TOL);
    if value <= tol {
        weights[0] += weight;
        return;
    }
    if value >= grid.max_value() - tol {
        weights[d - 1] += weight;
        return;
    }
    let q = value / grid.epsilon0();
    let lo = q.to_f64().unwrap().floor() as usize;
    let y_lo = grid.value(lo);
    let y_hi = grid.value(lo + 1);
    if (value - y_lo).abs() <= tol {
        weights[lo] += weight;
    } else if (y_hi - value).abs() <= tol {
        weights[lo + 1] += weight;
    } else {
        let span = y_hi - y_lo;
        weights[lo] += weight * (y_hi - value) / span;
        weights[lo + 1] += weight * (value - y_lo) / span;
    }
}

/// 1-Wasserstein distance between two grid distributions, computed exactly
/// as the integral of the absolute CDF difference over the common support.
pub fn wasserstein1<R: Real>(
    a: &ReturnDistribution<R>,
    b: &ReturnDistribution<R>,
) -> Result<R> {
    check_same_grid(a, b)?;
    let eps = a.grid().epsilon0();
    let mut cum = R::zero();
    let mut dist = R::zero();
    let d = a.grid().d();
    for i in 0..d - 1 {
        cum += a.weights()[i] - b.weights()[i];
        dist += cum.abs() * eps;
    }
    Ok(dist)
}

/// Cramér (ell-2) distance between two grid distributions.
pub fn cramer2<R: Real>(a: &ReturnDistribution<R>, b: &ReturnDistribution<R>) -> Result<R> {
    check_same_grid(a, b)?;
    let eps = a.grid().epsilon0();
    let mut cum = R::zero();
    let mut sq = R::zero();
    let d = a.grid().d();
    for i in 0..d - 1 {
        cum += a.weights()[i] - b.weights()[i];
        sq += cum * cum * eps;
    }
    Ok(sq.sqrt())
}

fn check_same_grid<R: Real>(
    a: &ReturnDistribution<R>,
    b: &ReturnDistribution<R>,
) -> Result<()> {
    if !a.grid().compatible(b.grid()) {
        return Err(Error::GridMismatch(
            "distributions live on different grids".into(),
        ));
    }
    Ok(())
}
