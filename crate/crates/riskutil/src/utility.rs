//! Utility functions over episode returns and the discretized
//! monotone-Lipschitz polytope they are learned in.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::scalar::{c, Real, ABS_TOL};

/// Maximum Dykstra sweeps before giving up on the stated tolerance.
const DYKSTRA_MAX_SWEEPS: usize = 100_000;
/// Successive-iterate max-norm change below which Dykstra stops.
const DYKSTRA_TOL: f64 = 1e-10;

/// A continuous increasing utility on `[0, H]` with `U(0) = 0`, `U(H) = H`.
///
/// Built-in families keep their closed forms so grid sampling is exact;
/// everything else is piecewise linear over anchor points.
#[derive(Debug, Clone, PartialEq)]
pub enum Utility<R: Real> {
    Linear {
        horizon: R,
    },
    /// `U(G) = sqrt(H G)`; concave (risk-averse).
    Sqrt {
        horizon: R,
    },
    /// `U(G) = G^2 / H`; convex (risk-seeking).
    Square {
        horizon: R,
    },
    /// Convex on `[0, m]`, concave on `[m, H]`:
    /// `G^2/m` below the inflection `m`, `H - (H-G)^2/(H-m)` above.
    SShaped {
        horizon: R,
        inflection: R,
    },
    /// Linear interpolation through increasing anchors covering `[0, H]`.
    Piecewise {
        horizon: R,
        anchors: Vec<(R, R)>,
        lipschitz: Option<R>,
    },
}

impl<R: Real> Utility<R> {
    pub fn linear(horizon: R) -> Self {
        Utility::Linear { horizon }
    }

    pub fn sqrt(horizon: R) -> Self {
        Utility::Sqrt { horizon }
    }

    pub fn square(horizon: R) -> Self {
        Utility::Square { horizon }
    }

    pub fn s_shaped(horizon: R, inflection: R) -> Result<Self> {
        if !(inflection > R::zero() && inflection < horizon) {
            return Err(Error::InvalidUtility(format!(
                "inflection {inflection} outside (0, {horizon})"
            )));
        }
        Ok(Utility::SShaped {
            horizon,
            inflection,
        })
    }

    /// Piecewise-linear utility through `anchors`. Anchors need not include
    /// the endpoints; `(0, 0)` and `(H, H)` are added when missing.
    pub fn piecewise(
        mut anchors: Vec<(R, R)>,
        horizon: R,
        lipschitz: Option<R>,
    ) -> Result<Self> {
        let tol = c::<R>(ABS_TOL);
        anchors.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        if anchors.first().is_none_or(|&(x, _)| x > tol) {
            anchors.insert(0, (R::zero(), R::zero()));
        }
        if anchors.last().is_none_or(|&(x, _)| x < horizon - tol) {
            anchors.push((horizon, horizon));
        }
        let first = anchors.first().unwrap();
        let last = anchors.last().unwrap();
        if first.1.abs() > tol {
            return Err(Error::InvalidUtility(format!(
                "U(0) = {} must be 0",
                first.1
            )));
        }
        if (last.1 - horizon).abs() > tol {
            return Err(Error::InvalidUtility(format!(
                "U({horizon}) = {} must be {horizon}",
                last.1
            )));
        }
        for w in anchors.windows(2) {
            let (x0, u0) = w[0];
            let (x1, u1) = w[1];
            if x1 - x0 <= tol {
                return Err(Error::InvalidUtility(format!(
                    "duplicate anchor abscissa near {x0}"
                )));
            }
            if u1 < u0 - tol {
                return Err(Error::InvalidUtility(format!(
                    "anchors decrease between {x0} and {x1}"
                )));
            }
            if let Some(l) = lipschitz {
                if (u1 - u0) / (x1 - x0) > l + tol {
                    return Err(Error::InvalidUtility(format!(
                        "chord slope between {x0} and {x1} exceeds Lipschitz bound {l}"
                    )));
                }
            }
        }
        Ok(Utility::Piecewise {
            horizon,
            anchors,
            lipschitz,
        })
    }

    /// Standard-gamble anchors `(prize in euros, indifference probability)`
    /// rescaled so the top prize maps to the horizon: prizes divide by
    /// `top_prize / H` and probabilities multiply by `H`.
    pub fn sg_from_euros(
        answers: &[(R, R)],
        horizon: R,
        top_prize: R,
    ) -> Result<Self> {
        let scale = top_prize / horizon;
        let mut anchors: Vec<(R, R)> = answers
            .iter()
            .map(|&(x, p)| (x / scale, p * horizon))
            .collect();
        anchors.push((R::zero(), R::zero()));
        anchors.push((horizon, horizon));
        anchors.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        anchors.dedup_by(|a, b| (a.0 - b.0).abs() <= c(ABS_TOL));
        Self::piecewise(anchors, horizon, None)
    }

    pub fn horizon(&self) -> R {
        match self {
            Utility::Linear { horizon }
            | Utility::Sqrt { horizon }
            | Utility::Square { horizon }
            | Utility::SShaped { horizon, .. }
            | Utility::Piecewise { horizon, .. } => *horizon,
        }
    }

    pub fn lipschitz(&self) -> Option<R> {
        match self {
            Utility::Piecewise { lipschitz, .. } => *lipschitz,
            _ => None,
        }
    }

    pub fn eval(&self, g: R) -> R {
        let h = self.horizon();
        let g = g.max(R::zero()).min(h);
        match self {
            Utility::Linear { .. } => g,
            Utility::Sqrt { .. } => (h * g).sqrt(),
            Utility::Square { .. } => g * g / h,
            Utility::SShaped { inflection: m, .. } => {
                if g <= *m {
                    g * g / *m
                } else {
                    h - (h - g) * (h - g) / (h - *m)
                }
            }
            Utility::Piecewise { anchors, .. } => {
                let idx = anchors.partition_point(|&(x, _)| x <= g);
                if idx == 0 {
                    return anchors[0].1;
                }
                if idx == anchors.len() {
                    return anchors[anchors.len() - 1].1;
                }
                let (x0, u0) = anchors[idx - 1];
                let (x1, u1) = anchors[idx];
                u0 + (u1 - u0) * (g - x0) / (x1 - x0)
            }
        }
    }

    /// Anchor snapshot for serialization: exact anchors for piecewise
    /// utilities, a dense sample otherwise.
    pub fn to_anchors(&self, samples: usize) -> Vec<(R, R)> {
        match self {
            Utility::Piecewise { anchors, .. } => anchors.clone(),
            _ => {
                let h = self.horizon();
                (0..=samples)
                    .map(|i| {
                        let x = h * c::<R>(i as f64) / c::<R>(samples as f64);
                        (x, self.eval(x))
                    })
                    .collect()
            }
        }
    }
}

/// A utility sampled on a return grid: a `d`-vector pinned to 0 at the
/// origin and `H` at the top, increasing, optionally Lipschitz-bounded.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretizedUtility<R: Real> {
    grid: Grid<R>,
    values: Vec<R>,
}

impl<R: Real> DiscretizedUtility<R> {
    pub fn new(grid: Grid<R>, values: Vec<R>) -> Result<Self> {
        Self::validate(&grid, &values, true, None)?;
        Ok(Self { grid, values })
    }

    /// Construction with an explicit Lipschitz check.
    pub fn with_lipschitz(grid: Grid<R>, values: Vec<R>, lipschitz: R) -> Result<Self> {
        Self::validate(&grid, &values, true, Some(lipschitz))?;
        Ok(Self { grid, values })
    }

    pub(crate) fn new_unchecked(grid: Grid<R>, values: Vec<R>) -> Self {
        Self { grid, values }
    }

    fn validate(grid: &Grid<R>, values: &[R], boundary: bool, lipschitz: Option<R>) -> Result<()> {
        if values.len() != grid.d() {
            return Err(Error::InvalidUtility(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.d()
            )));
        }
        let tol = c::<R>(1e-8);
        if boundary {
            if values[0].abs() > tol {
                return Err(Error::InvalidUtility(format!(
                    "first value {} must be 0",
                    values[0]
                )));
            }
            let h = c::<R>(grid.horizon() as f64);
            if !grid.covers_horizon() {
                return Err(Error::GridMismatch(format!(
                    "grid top point {} does not reach the horizon {}",
                    grid.max_value(),
                    grid.horizon()
                )));
            }
            if (values[grid.d() - 1] - h).abs() > tol {
                return Err(Error::InvalidUtility(format!(
                    "last value {} must equal the horizon {h}",
                    values[grid.d() - 1]
                )));
            }
        }
        for i in 0..values.len() - 1 {
            if values[i + 1] < values[i] - tol {
                return Err(Error::InvalidUtility(format!(
                    "values decrease at index {i}"
                )));
            }
            if let Some(l) = lipschitz {
                if values[i + 1] - values[i] > l * grid.epsilon0() + tol {
                    return Err(Error::InvalidUtility(format!(
                        "gap at index {i} exceeds Lipschitz bound {l}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Pointwise sampling of a continuous utility at the grid points.
    pub fn sample(utility: &Utility<R>, grid: &Grid<R>) -> Result<Self> {
        let values: Vec<R> = grid.points().iter().map(|&y| utility.eval(y)).collect();
        Self::validate(grid, &values, true, utility.lipschitz())?;
        Ok(Self {
            grid: grid.clone(),
            values,
        })
    }

    pub fn grid(&self) -> &Grid<R> {
        &self.grid
    }

    pub fn values(&self) -> &[R] {
        &self.values
    }

    pub fn value(&self, index: usize) -> R {
        self.values[index]
    }

    /// Largest violation of the boundary, monotonicity, and (optionally)
    /// Lipschitz constraints; useful for feasibility assertions.
    pub fn constraint_violation(&self, lipschitz: Option<R>) -> R {
        let mut v = self.values[0].abs();
        let h = c::<R>(self.grid.horizon() as f64);
        v = v.max((self.values[self.grid.d() - 1] - h).abs());
        for i in 0..self.values.len() - 1 {
            v = v.max(self.values[i] - self.values[i + 1]);
            if let Some(l) = lipschitz {
                v = v.max(self.values[i + 1] - self.values[i] - l * self.grid.epsilon0());
            }
        }
        v.max(R::zero())
    }
}

/// Which boundary constraints the projection enforces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjectionVariant {
    /// Pin `u[0] = 0` and `u[d-1] = H` (the learning polytope).
    StrictBoundary,
    /// Only monotonicity, the Lipschitz band, and the `[0, H]` box.
    Free,
}

/// Euclidean projection of `v` onto the discretized utility polytope
/// `{u[0] = 0, u[d-1] = H, increasing, Lipschitz}` by Dykstra's alternating
/// projections.
///
/// The polytope's pairwise Lipschitz constraints are equivalent, under
/// monotonicity, to the consecutive-gap constraints `0 <= u[i+1] - u[i] <=
/// L eps`, so Dykstra cycles over that minimal half-space family plus the
/// boundary pins. Iteration stops when a full sweep moves both the iterate
/// and the correction vector by less than 1e-10 in max norm, or after 1e5
/// sweeps.
pub fn project_polytope<R: Real>(
    v: &[R],
    grid: &Grid<R>,
    lipschitz: R,
    variant: ProjectionVariant,
) -> Result<DiscretizedUtility<R>> {
    let d = grid.d();
    if v.len() != d {
        return Err(Error::InvalidUtility(format!(
            "input has {} entries for a grid of {d} points",
            v.len()
        )));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidUtility("non-finite input entry".into()));
    }
    let h = c::<R>(grid.horizon() as f64);
    let eps = grid.epsilon0();
    if variant == ProjectionVariant::StrictBoundary {
        if !grid.covers_horizon() {
            return Err(Error::GridMismatch(format!(
                "grid top point {} does not reach the horizon {}",
                grid.max_value(),
                grid.horizon()
            )));
        }
        if lipschitz * c::<R>((d - 1) as f64) * eps < h - c(ABS_TOL) {
            return Err(Error::Infeasible(format!(
                "L (d-1) eps = {} cannot span the horizon {h}",
                lipschitz * c::<R>((d - 1) as f64) * eps
            )));
        }
    }

    let gap_hi = lipschitz * eps;
    let mut u: Vec<R> = v.to_vec();

    // One Dykstra correction scalar per half-space / pin. For a gap
    // constraint on (u[i], u[i+1]) the correction vector is mu * normal with
    // mu >= 0, so a scalar suffices. Sweep order: pins (or box), then per-gap
    // lower (monotone), then per-gap upper (Lipschitz band).
    let n_pins = match variant {
        ProjectionVariant::StrictBoundary => 2,
        ProjectionVariant::Free => 2 * d, // box: u[i] >= 0 and u[i] <= H
    };
    let n_cons = n_pins + 2 * (d - 1);
    let mut corr = vec![R::zero(); n_cons];
    let mut prev = u.clone();
    let mut corr_prev = corr.clone();

    for _sweep in 0..DYKSTRA_MAX_SWEEPS {
        let mut ci = 0;

        match variant {
            ProjectionVariant::StrictBoundary => {
                // Affine pins: u[0] = 0, u[d-1] = H.
                for (idx, target) in [(0usize, R::zero()), (d - 1, h)] {
                    let w = u[idx] + corr[ci];
                    corr[ci] = w - target;
                    u[idx] = target;
                    ci += 1;
                }
            }
            ProjectionVariant::Free => {
                for x in u.iter_mut() {
                    // x >= 0 (correction stored signed on the coordinate)
                    let w = *x + corr[ci];
                    let after = w.max(R::zero());
                    corr[ci] = w - after;
                    *x = after;
                    ci += 1;
                    // x <= H
                    let w = *x + corr[ci];
                    let after = w.min(h);
                    corr[ci] = w - after;
                    *x = after;
                    ci += 1;
                }
            }
        }

        for i in 0..d - 1 {
            // lower: u[i] - u[i+1] <= 0, normal (+1, -1)
            let w_i = u[i] + corr[ci];
            let w_j = u[i + 1] - corr[ci];
            let mu = ((w_i - w_j) * c(0.5)).max(R::zero());
            u[i] = w_i - mu;
            u[i + 1] = w_j + mu;
            corr[ci] = mu;
            ci += 1;

            // upper: u[i+1] - u[i] <= gap_hi, normal (-1, +1)
            let w_i = u[i] - corr[ci];
            let w_j = u[i + 1] + corr[ci];
            let mu = ((w_j - w_i - gap_hi) * c(0.5)).max(R::zero());
            u[i] = w_i + mu;
            u[i + 1] = w_j - mu;
            corr[ci] = mu;
            ci += 1;
        }

        // The iterate alone can plateau while correction mass still drains
        // between constraints, so both must stabilize before stopping.
        let mut max_change = R::zero();
        for (a, b) in u.iter().zip(&prev) {
            max_change = max_change.max((*a - *b).abs());
        }
        for (a, b) in corr.iter().zip(&corr_prev) {
            max_change = max_change.max((*a - *b).abs());
        }
        if max_change < c(DYKSTRA_TOL) {
            break;
        }
        prev.copy_from_slice(&u);
        corr_prev.copy_from_slice(&corr);
    }

    // Clean tiny constraint violations left by the finite tolerance.
    if variant == ProjectionVariant::StrictBoundary {
        u[0] = R::zero();
        u[d - 1] = h;
    }
    Ok(DiscretizedUtility::new_unchecked(grid.clone(), u))
}

/// The built-in utility families by name.
#[derive(Debug, Clone, PartialEq)]
pub enum BuiltinUtility<R: Real> {
    Linear,
    Sqrt,
    Square,
    Sg(Vec<(R, R)>),
    SShaped(R),
}

/// Constructs the named utility family, normalized to `U(0) = 0`,
/// `U(H) = H`.
pub fn builtin_utility<R: Real>(name: BuiltinUtility<R>, horizon: R) -> Result<Utility<R>> {
    match name {
        BuiltinUtility::Linear => Ok(Utility::linear(horizon)),
        BuiltinUtility::Sqrt => Ok(Utility::sqrt(horizon)),
        BuiltinUtility::Square => Ok(Utility::square(horizon)),
        BuiltinUtility::Sg(anchors) => Utility::piecewise(anchors, horizon, None),
        BuiltinUtility::SShaped(inflection) => Utility::s_shaped(horizon, inflection),
    }
}
