//! Planning in the enlarged state space: backward induction over
//! `(state, accumulated discretized reward)` pairs, policy lifting, and the
//! exact return distribution of an enlarged policy.

use crate::error::{Error, Result};
use crate::grid::{discretize_reward, Grid};
use crate::mdp::{HistoryPolicy, Mdp};
use crate::returns::ReturnDistribution;
use crate::scalar::Real;
use crate::utility::DiscretizedUtility;

/// A Markovian policy over the enlarged state space: one action per
/// `(stage, state, grid index)`, total everywhere.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnlargedPolicy {
    horizon: usize,
    num_states: usize,
    d: usize,
    actions: Vec<u16>,
}

impl EnlargedPolicy {
    pub fn new(horizon: usize, num_states: usize, d: usize, actions: Vec<u16>) -> Result<Self> {
        if actions.len() != horizon * num_states * d {
            return Err(Error::InvalidMdp(format!(
                "policy table has {} entries, expected {}",
                actions.len(),
                horizon * num_states * d
            )));
        }
        Ok(Self {
            horizon,
            num_states,
            d,
            actions,
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn action(&self, h: usize, s: usize, y_index: usize) -> Result<usize> {
        if h == 0 || h > self.horizon || s >= self.num_states || y_index >= self.d {
            return Err(Error::PolicyCoverage {
                h,
                s,
                y: y_index as f64,
            });
        }
        Ok(self.actions[((h - 1) * self.num_states + s) * self.d + y_index] as usize)
    }

    pub fn actions(&self) -> &[u16] {
        &self.actions
    }

    /// Overwrites the action at one `(stage, state)` for every grid index.
    pub fn fill_action(&mut self, h: usize, s: usize, a: usize) {
        for j in 0..self.d {
            self.actions[((h - 1) * self.num_states + s) * self.d + j] = a as u16;
        }
    }
}

/// Stagewise optimal value and action-value tables of the enlarged MDP.
#[derive(Debug, Clone)]
pub struct ValueTable<R: Real> {
    pub horizon: usize,
    pub num_states: usize,
    pub d: usize,
    pub num_actions: usize,
    /// `v[h-1][s][j]`
    pub v: Vec<R>,
    /// `q[h-1][s][j][a]`
    pub q: Vec<R>,
}

impl<R: Real> ValueTable<R> {
    pub fn value(&self, h: usize, s: usize, j: usize) -> R {
        self.v[((h - 1) * self.num_states + s) * self.d + j]
    }

    pub fn q_value(&self, h: usize, s: usize, j: usize, a: usize) -> R {
        self.q[(((h - 1) * self.num_states + s) * self.d + j) * self.num_actions + a]
    }
}

/// Output of [`plan`].
#[derive(Debug, Clone)]
pub struct PlanOutput<R: Real> {
    pub j_star: R,
    pub policy: EnlargedPolicy,
    pub values: ValueTable<R>,
}

/// Value iteration over the enlarged state space.
///
/// Rewards are snapped to the grid first (a no-op when the MDP is already
/// discretized), so accumulated rewards move on exact grid indices. The
/// terminal stage scores `U(y + r_H(s, a))`; earlier stages back up expected
/// next-stage values. Ties pick the lowest action index. The returned
/// `j_star` is the value at `(s_0, 0)`.
pub fn plan<R: Real>(
    utility: &DiscretizedUtility<R>,
    mdp: &Mdp<R>,
    grid: &Grid<R>,
) -> Result<PlanOutput<R>> {
    if !utility.grid().compatible(grid) {
        return Err(Error::GridMismatch(
            "utility sampled on a different grid".into(),
        ));
    }
    let mdp = discretize_reward(mdp, grid);
    let (s_count, a_count, horizon) = (mdp.num_states(), mdp.num_actions(), mdp.horizon());
    let d = grid.d();

    // Rewards as grid indices; exact integer arithmetic from here on.
    let mut r_idx = vec![0usize; horizon * s_count * a_count];
    for h in 1..=horizon {
        for s in 0..s_count {
            for a in 0..a_count {
                r_idx[((h - 1) * s_count + s) * a_count + a] = grid
                    .exact_index(mdp.reward(h, s, a))
                    .expect("discretized reward lies on the grid");
            }
        }
    }

    let mut v = vec![R::zero(); horizon * s_count * d];
    let mut q = vec![R::zero(); horizon * s_count * d * a_count];
    let mut actions = vec![0u16; horizon * s_count * d];

    for h in (1..=horizon).rev() {
        for s in 0..s_count {
            // Indices beyond the stage's reachable range (partial returns
            // exceed h-1) are padding kept for a uniform table; the clamp
            // below keeps them well-defined without affecting reachable
            // entries, whose sums never leave the grid.
            for j in 0..d {
                let mut best = R::neg_infinity();
                let mut best_a = 0u16;
                for a in 0..a_count {
                    let jn = (j + r_idx[((h - 1) * s_count + s) * a_count + a]).min(d - 1);
                    let qv = if h == horizon {
                        utility.value(jn)
                    } else {
                        let mut acc = R::zero();
                        for (s_next, &p) in mdp.transition_row(h, s, a).iter().enumerate() {
                            if p > R::zero() {
                                acc += p * v[(h * s_count + s_next) * d + jn];
                            }
                        }
                        acc
                    };
                    q[(((h - 1) * s_count + s) * d + j) * a_count + a] = qv;
                    if qv > best {
                        best = qv;
                        best_a = a as u16;
                    }
                }
                v[((h - 1) * s_count + s) * d + j] = best;
                actions[((h - 1) * s_count + s) * d + j] = best_a;
            }
        }
    }

    let j_star = v[(mdp.initial_state()) * d];
    Ok(PlanOutput {
        j_star,
        policy: EnlargedPolicy::new(horizon, s_count, d, actions)?,
        values: ValueTable {
            horizon,
            num_states: s_count,
            d,
            num_actions: a_count,
            v,
            q,
        },
    })
}

/// Lifts an enlarged policy to a history policy: the lifted policy reads the
/// accumulated discretized reward (nearest grid point for off-grid values)
/// and delegates to the enlarged table.
pub fn lift_policy<R: Real>(
    policy: &EnlargedPolicy,
    mdp: &Mdp<R>,
    grid: &Grid<R>,
) -> HistoryPolicy<R> {
    HistoryPolicy::from_fn(
        grid.clone(),
        mdp.horizon(),
        mdp.num_states(),
        |h, s, y| {
            let j = grid.nearest_index(y);
            policy.action(h, s, j).ok()
        },
    )
}

/// Exact return distribution of an enlarged policy in a discretized MDP, by
/// forward occupancy propagation over `(state, grid index)` pairs.
pub fn enlarged_return_distribution<R: Real>(
    policy: &EnlargedPolicy,
    mdp: &Mdp<R>,
    grid: &Grid<R>,
) -> Result<ReturnDistribution<R>> {
    let mdp = discretize_reward(mdp, grid);
    let (s_count, d) = (mdp.num_states(), grid.d());
    let mut occ = vec![R::zero(); s_count * d];
    occ[mdp.initial_state() * d] = R::one();
    for h in 1..=mdp.horizon() {
        let mut next = vec![R::zero(); s_count * d];
        for s in 0..s_count {
            for j in 0..d {
                let mass = occ[s * d + j];
                if mass <= R::zero() {
                    continue;
                }
                let a = policy.action(h, s, j)?;
                let r_j = grid
                    .exact_index(mdp.reward(h, s, a))
                    .expect("discretized reward lies on the grid");
                let jn = (j + r_j).min(d - 1);
                for (s_next, &p) in mdp.transition_row(h, s, a).iter().enumerate() {
                    if p > R::zero() {
                        next[s_next * d + jn] += mass * p;
                    }
                }
            }
        }
        occ = next;
    }
    let mut weights = vec![R::zero(); d];
    for s in 0..s_count {
        for j in 0..d {
            weights[j] += occ[s * d + j];
        }
    }
    ReturnDistribution::new(grid.clone(), weights)
}

/// Classic risk-neutral finite-horizon value iteration on the base MDP.
/// Returns the optimal expected return and a greedy Markovian policy
/// (`policy[h-1][s]`, ties to the lowest action).
pub fn classic_value_iteration<R: Real>(mdp: &Mdp<R>) -> (R, Vec<Vec<usize>>) {
    let (s_count, a_count, horizon) = (mdp.num_states(), mdp.num_actions(), mdp.horizon());
    let mut v = vec![R::zero(); s_count];
    let mut policy = vec![vec![0usize; s_count]; horizon];
    for h in (1..=horizon).rev() {
        let mut new_v = vec![R::zero(); s_count];
        for s in 0..s_count {
            let mut best = R::neg_infinity();
            let mut best_a = 0usize;
            for a in 0..a_count {
                let mut acc = mdp.reward(h, s, a);
                if h < horizon {
                    for (s_next, &p) in mdp.transition_row(h, s, a).iter().enumerate() {
                        acc += p * v[s_next];
                    }
                }
                if acc > best {
                    best = acc;
                    best_a = a;
                }
            }
            new_v[s] = best;
            policy[h - 1][s] = best_a;
        }
        v = new_v;
    }
    (v[mdp.initial_state()], policy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{expected_utility_exact, RsMdp};
    use crate::utility::Utility;
    use crate::zoo::{zoo, ZooId};

    #[test]
    fn one_step_greedy_picks_the_rewarding_action() {
        let mdp = Mdp::<f64>::new(1, 2, 1, 0, vec![1.0, 1.0], vec![0.0, 1.0], None).unwrap();
        let grid = Grid::new(0.5, 1).unwrap();
        let util = DiscretizedUtility::sample(&Utility::sqrt(1.0), &grid).unwrap();
        let out = plan(&util, &mdp, &grid).unwrap();
        assert_eq!(out.policy.action(1, 0, 0).unwrap(), 1);
        assert!((out.j_star - 1.0).abs() < 1e-12); // U(1) = 1
    }

    #[test]
    fn branching_plan_matches_enumeration() {
        let entry: crate::zoo::ZooEntry<f64> = zoo(ZooId::Branching).unwrap();
        let grid = Grid::new(0.5, 2).unwrap();
        let u = Utility::piecewise(
            vec![(0.0, 0.0), (1.0, 0.1), (1.5, 0.7), (2.0, 2.0)],
            2.0,
            None,
        )
        .unwrap();
        let du = DiscretizedUtility::sample(&u, &grid).unwrap();
        let out = plan(&du, &entry.mdp, &grid).unwrap();
        assert!((out.j_star - 0.59).abs() < 1e-12, "J* = {}", out.j_star);
        assert_eq!(out.policy.action(1, 0, 0).unwrap(), 0); // a1
    }

    #[test]
    fn lifted_optimal_policy_achieves_j_star() {
        let entry: crate::zoo::ZooEntry<f64> = zoo(ZooId::Branching).unwrap();
        let grid = Grid::new(0.5, 2).unwrap();
        let u = Utility::piecewise(
            vec![(0.0, 0.0), (1.0, 0.1), (1.5, 0.7), (2.0, 2.0)],
            2.0,
            None,
        )
        .unwrap();
        let du = DiscretizedUtility::sample(&u, &grid).unwrap();
        let out = plan(&du, &entry.mdp, &grid).unwrap();
        let lifted = lift_policy(&out.policy, &entry.mdp, &grid);
        let rs = RsMdp::new(entry.mdp.clone(), u).unwrap();
        let j = expected_utility_exact(&rs, &lifted).unwrap();
        assert!((j - out.j_star).abs() < 1e-9);
    }

    #[test]
    fn constant_enlarged_policy_lifts_to_constant() {
        let entry: crate::zoo::ZooEntry<f64> = zoo(ZooId::Branching).unwrap();
        let grid = Grid::new(0.5, 2).unwrap();
        let d = grid.d();
        let policy = EnlargedPolicy::new(2, 4, d, vec![1u16; 2 * 4 * d]).unwrap();
        let lifted = lift_policy(&policy, &entry.mdp, &grid);
        for h in 1..=2 {
            for s in 0..4 {
                assert_eq!(lifted.action_at(h, s, 0.7).unwrap(), 1);
            }
        }
    }

    #[test]
    fn enlarged_distribution_matches_hand_mixture() {
        let entry: crate::zoo::ZooEntry<f64> = zoo(ZooId::Branching).unwrap();
        let grid = Grid::new(0.5, 2).unwrap();
        let d = grid.d();
        // always play a1: returns 1 (0.4), 1.5 (0.5), 2 (0.1)
        let policy = EnlargedPolicy::new(2, 4, d, vec![0u16; 2 * 4 * d]).unwrap();
        let eta = enlarged_return_distribution(&policy, &entry.mdp, &grid).unwrap();
        assert!((eta.weights()[grid.exact_index(1.0).unwrap()] - 0.4).abs() < 1e-12);
        assert!((eta.weights()[grid.exact_index(1.5).unwrap()] - 0.5).abs() < 1e-12);
        assert!((eta.weights()[grid.exact_index(2.0).unwrap()] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn linear_utility_plan_matches_classic_vi() {
        let entry: crate::zoo::ZooEntry<f64> = zoo(ZooId::Branching).unwrap();
        let grid = Grid::new(0.5, 2).unwrap();
        let du = DiscretizedUtility::sample(&Utility::linear(2.0), &grid).unwrap();
        let out = plan(&du, &entry.mdp, &grid).unwrap();
        let (j_vi, _) = classic_value_iteration(&entry.mdp);
        // rewards are grid-exact here, so the two agree to machine precision
        assert!((out.j_star - j_vi).abs() < 1e-12);
    }

    #[test]
    fn utility_grid_mismatch_is_an_error() {
        let entry: crate::zoo::ZooEntry<f64> = zoo(ZooId::Branching).unwrap();
        let g1 = Grid::new(0.5, 2).unwrap();
        let g2 = Grid::new(0.25, 2).unwrap();
        let du = DiscretizedUtility::sample(&Utility::linear(2.0), &g1).unwrap();
        assert!(matches!(
            plan(&du, &entry.mdp, &g2),
            Err(Error::GridMismatch(_))
        ));
    }
}
