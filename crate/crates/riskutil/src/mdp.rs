//! Tabular finite-horizon MDPs, trajectories, history policies, and exact
//! policy evaluation for risk-sensitive objectives.

use std::collections::{BTreeMap, HashMap};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::scalar::{c, exact_cap, Real, PROB_SUM_TOL};
use crate::utility::Utility;

/// Optional human-readable names for states and actions.
#[derive(Debug, Clone, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Labels {
    pub states: Vec<String>,
    pub actions: Vec<String>,
}

/// A tabular episodic MDP with stage-dependent transitions and deterministic
/// rewards in `[0, 1]`.
///
/// Transition probabilities are stored flat, indexed stage-major:
/// `p[h][s][a][s']`. Rewards are indexed `r[h][s][a]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mdp<R: Real> {
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    initial_state: usize,
    transitions: Vec<R>,
    rewards: Vec<R>,
    labels: Option<Labels>,
}

impl<R: Real> Mdp<R> {
    pub fn new(
        num_states: usize,
        num_actions: usize,
        horizon: usize,
        initial_state: usize,
        transitions: Vec<R>,
        rewards: Vec<R>,
        labels: Option<Labels>,
    ) -> Result<Self> {
        if num_states == 0 || num_actions == 0 || horizon == 0 {
            return Err(Error::InvalidMdp(
                "state count, action count, and horizon must be positive".into(),
            ));
        }
        if initial_state >= num_states {
            return Err(Error::InvalidMdp(format!(
                "initial state {initial_state} out of range (S = {num_states})"
            )));
        }
        let expect_p = horizon * num_states * num_actions * num_states;
        if transitions.len() != expect_p {
            return Err(Error::InvalidMdp(format!(
                "transition table has {} entries, expected {expect_p}",
                transitions.len()
            )));
        }
        let expect_r = horizon * num_states * num_actions;
        if rewards.len() != expect_r {
            return Err(Error::InvalidMdp(format!(
                "reward table has {} entries, expected {expect_r}",
                rewards.len()
            )));
        }
        let mdp = Self {
            num_states,
            num_actions,
            horizon,
            initial_state,
            transitions,
            rewards,
            labels,
        };
        mdp.validate()?;
        Ok(mdp)
    }

    fn validate(&self) -> Result<()> {
        let tol = c::<R>(PROB_SUM_TOL);
        for h in 1..=self.horizon {
            for s in 0..self.num_states {
                for a in 0..self.num_actions {
                    let row = self.transition_row(h, s, a);
                    let mut sum = R::zero();
                    for &p in row {
                        if p < R::zero() {
                            return Err(Error::InvalidMdp(format!(
                                "negative probability at (h={h}, s={s}, a={a})"
                            )));
                        }
                        sum += p;
                    }
                    if (sum - R::one()).abs() > tol {
                        return Err(Error::InvalidMdp(format!(
                            "row (h={h}, s={s}, a={a}) sums to {sum}, not 1"
                        )));
                    }
                    let r = self.reward(h, s, a);
                    if r < R::zero() || r > R::one() {
                        return Err(Error::InvalidMdp(format!(
                            "reward {r} at (h={h}, s={s}, a={a}) outside [0, 1]"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn initial_state(&self) -> usize {
        self.initial_state
    }

    pub fn labels(&self) -> Option<&Labels> {
        self.labels.as_ref()
    }

    /// Probability vector over next states for `(h, s, a)`, `h` in `1..=H`.
    pub fn transition_row(&self, h: usize, s: usize, a: usize) -> &[R] {
        let base = (((h - 1) * self.num_states + s) * self.num_actions + a) * self.num_states;
        &self.transitions[base..base + self.num_states]
    }

    pub fn reward(&self, h: usize, s: usize, a: usize) -> R {
        self.rewards[((h - 1) * self.num_states + s) * self.num_actions + a]
    }

    pub(crate) fn rewards_mut(&mut self) -> &mut [R] {
        &mut self.rewards
    }

    /// Samples a next state from `p_h(.|s, a)` with an inverse-CDF draw.
    pub fn sample_next(&self, h: usize, s: usize, a: usize, rng: &mut impl Rng) -> usize {
        let row = self.transition_row(h, s, a);
        let u: f64 = rng.gen();
        let u = c::<R>(u);
        let mut acc = R::zero();
        for (s_next, &p) in row.iter().enumerate() {
            acc += p;
            if u < acc {
                return s_next;
            }
        }
        // Guard against row sums a hair under 1.
        row.len() - 1
    }

    /// Relabels states by `perm` (new index = perm[old index]).
    pub fn permute_states(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.num_states {
            return Err(Error::InvalidMdp("permutation length mismatch".into()));
        }
        let mut transitions = vec![R::zero(); self.transitions.len()];
        let mut rewards = vec![R::zero(); self.rewards.len()];
        for h in 1..=self.horizon {
            for s in 0..self.num_states {
                for a in 0..self.num_actions {
                    rewards[((h - 1) * self.num_states + perm[s]) * self.num_actions + a] =
                        self.reward(h, s, a);
                    let row = self.transition_row(h, s, a);
                    for (s_next, &p) in row.iter().enumerate() {
                        let base = (((h - 1) * self.num_states + perm[s]) * self.num_actions + a)
                            * self.num_states;
                        transitions[base + perm[s_next]] = p;
                    }
                }
            }
        }
        Self::new(
            self.num_states,
            self.num_actions,
            self.horizon,
            perm[self.initial_state],
            transitions,
            rewards,
            None,
        )
    }
}

/// A length-`H` state-action trajectory plus the terminal state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trajectory {
    pub steps: Vec<(usize, usize)>,
    pub terminal_state: usize,
}

impl Trajectory {
    pub fn validate<R: Real>(&self, mdp: &Mdp<R>) -> Result<()> {
        if self.steps.len() != mdp.horizon() {
            return Err(Error::MalformedTrajectory(format!(
                "length {} does not match horizon {}",
                self.steps.len(),
                mdp.horizon()
            )));
        }
        for (i, &(s, a)) in self.steps.iter().enumerate() {
            if s >= mdp.num_states() || a >= mdp.num_actions() {
                return Err(Error::MalformedTrajectory(format!(
                    "index out of range at step {i}: state {s}, action {a}"
                )));
            }
        }
        if self.terminal_state >= mdp.num_states() {
            return Err(Error::MalformedTrajectory(format!(
                "terminal state {} out of range",
                self.terminal_state
            )));
        }
        Ok(())
    }
}

/// Sum of stage rewards along a trajectory.
pub fn trajectory_return<R: Real>(mdp: &Mdp<R>, traj: &Trajectory) -> Result<R> {
    traj.validate(mdp)?;
    let mut total = R::zero();
    for (i, &(s, a)) in traj.steps.iter().enumerate() {
        total += mdp.reward(i + 1, s, a);
    }
    Ok(total)
}

/// A decision rule over `(stage, state, accumulated reward)` triples.
///
/// Accumulated rewards are keyed on the grid; off-grid values resolve to the
/// nearest grid point with ties to the lower point. Entries may be undefined,
/// in which case lookups fail with a coverage error naming the triple.
#[derive(Debug, Clone)]
pub struct HistoryPolicy<R: Real> {
    grid: Grid<R>,
    horizon: usize,
    num_states: usize,
    /// `actions[h-1][s][grid index]`, `u16::MAX` marking "undefined".
    actions: Vec<u16>,
}

const UNDEFINED: u16 = u16::MAX;

impl<R: Real> HistoryPolicy<R> {
    pub fn from_fn(
        grid: Grid<R>,
        horizon: usize,
        num_states: usize,
        mut rule: impl FnMut(usize, usize, R) -> Option<usize>,
    ) -> Self {
        let d = grid.d();
        let mut actions = vec![UNDEFINED; horizon * num_states * d];
        for h in 1..=horizon {
            for s in 0..num_states {
                for j in 0..d {
                    if let Some(a) = rule(h, s, grid.value(j)) {
                        actions[((h - 1) * num_states + s) * d + j] = a as u16;
                    }
                }
            }
        }
        Self {
            grid,
            horizon,
            num_states,
            actions,
        }
    }

    /// A policy that plays `action` everywhere.
    pub fn constant(grid: Grid<R>, horizon: usize, num_states: usize, action: usize) -> Self {
        Self::from_fn(grid, horizon, num_states, |_, _, _| Some(action))
    }

    pub fn grid(&self) -> &Grid<R> {
        &self.grid
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn action_at_index(&self, h: usize, s: usize, j: usize) -> Result<usize> {
        let d = self.grid.d();
        let a = self.actions[((h - 1) * self.num_states + s) * d + j];
        if a == UNDEFINED {
            return Err(Error::PolicyCoverage {
                h,
                s,
                y: self.grid.value(j).to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(a as usize)
    }

    /// Resolves `y` to the nearest grid point (ties to the lower point).
    pub fn action_at(&self, h: usize, s: usize, y: R) -> Result<usize> {
        let j = self.grid.nearest_index(y);
        self.actions[((h - 1) * self.num_states + s) * self.grid.d() + j]
            .ne(&UNDEFINED)
            .then(|| self.actions[((h - 1) * self.num_states + s) * self.grid.d() + j] as usize)
            .ok_or(Error::PolicyCoverage {
                h,
                s,
                y: y.to_f64().unwrap_or(f64::NAN),
            })
    }
}

/// An MDP paired with a utility over episode returns.
#[derive(Debug, Clone)]
pub struct RsMdp<R: Real> {
    pub mdp: Mdp<R>,
    pub utility: Utility<R>,
}

impl<R: Real> RsMdp<R> {
    pub fn new(mdp: Mdp<R>, utility: Utility<R>) -> Result<Self> {
        if utility.horizon() < c(mdp.horizon() as f64) {
            return Err(Error::InvalidUtility(format!(
                "utility domain [0, {}] does not cover horizon {}",
                utility.horizon(),
                mdp.horizon()
            )));
        }
        Ok(Self { mdp, utility })
    }
}

/// Simulates one episode of `policy` in `mdp`; deterministic given `seed`.
///
/// The policy's accumulated-reward argument tracks the rewards of `mdp`
/// itself (discretized rewards if `mdp` was discretized).
pub fn simulate<R: Real>(
    mdp: &Mdp<R>,
    policy: &HistoryPolicy<R>,
    rng_seed: u64,
) -> Result<Trajectory> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut s = mdp.initial_state();
    let mut y = R::zero();
    let mut steps = Vec::with_capacity(mdp.horizon());
    for h in 1..=mdp.horizon() {
        let a = policy.action_at(h, s, y)?;
        if a >= mdp.num_actions() {
            return Err(Error::MalformedTrajectory(format!(
                "policy action {a} out of range at (h={h}, s={s})"
            )));
        }
        steps.push((s, a));
        y += mdp.reward(h, s, a);
        s = mdp.sample_next(h, s, a, &mut rng);
    }
    Ok(Trajectory {
        steps,
        terminal_state: s,
    })
}

/// Exact distribution over `(state, accumulated reward)` pairs after playing
/// `policy`, as atoms `(return, probability)` of the episode return.
///
/// Accumulation is exact in the scalar type: reachable partial returns are
/// keyed by their bit pattern, so no discretization is introduced. Fails when
/// `S * |reachable partial returns|` exceeds the exact-evaluation cap
/// (`RISKUTIL_CAP` overrides the default).
pub fn exact_return_atoms<R: Real>(
    mdp: &Mdp<R>,
    policy: &HistoryPolicy<R>,
) -> Result<Vec<(R, R)>> {
    exact_return_atoms_capped(mdp, policy, exact_cap())
}

/// [`exact_return_atoms`] with an explicit cap.
pub fn exact_return_atoms_capped<R: Real>(
    mdp: &Mdp<R>,
    policy: &HistoryPolicy<R>,
    cap: u64,
) -> Result<Vec<(R, R)>> {
    // Occupancy over (state, exact partial return). Ordered maps keep the
    // accumulation order, and hence the float rounding, independent of any
    // per-process hash state: equal inputs give bit-equal outputs.
    let mut layer: BTreeMap<(usize, u64), R> = BTreeMap::new();
    layer.insert((mdp.initial_state(), key_of(R::zero())), R::one());
    let mut values: HashMap<u64, R> = HashMap::new();
    values.insert(key_of(R::zero()), R::zero());

    for h in 1..=mdp.horizon() {
        let mut next: BTreeMap<(usize, u64), R> = BTreeMap::new();
        for (&(s, ykey), &prob) in &layer {
            let y = values[&ykey];
            let a = policy.action_at(h, s, y)?;
            let y_next = y + mdp.reward(h, s, a);
            let ynext_key = key_of(y_next);
            values.entry(ynext_key).or_insert(y_next);
            for (s_next, &p) in mdp.transition_row(h, s, a).iter().enumerate() {
                if p > R::zero() {
                    *next.entry((s_next, ynext_key)).or_insert(R::zero()) += prob * p;
                }
            }
        }
        if (next.len() as u64) > cap {
            return Err(Error::ExactCapExceeded(format!(
                "reachable (state, return) set has {} entries at stage {h}, cap {cap}",
                next.len()
            )));
        }
        layer = next;
    }

    let mut atoms: BTreeMap<u64, R> = BTreeMap::new();
    for (&(_, ykey), &prob) in &layer {
        *atoms.entry(ykey).or_insert(R::zero()) += prob;
    }
    let mut out: Vec<(R, R)> = atoms.into_iter().map(|(k, p)| (values[&k], p)).collect();
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    Ok(out)
}

fn key_of<R: Real>(y: R) -> u64 {
    y.to_f64().unwrap().to_bits()
}

/// Exact expected utility `E[U(sum of rewards)]` of a history policy,
/// by forward recursion over reachable `(stage, state, return)` triples.
pub fn expected_utility_exact<R: Real>(rsmdp: &RsMdp<R>, policy: &HistoryPolicy<R>) -> Result<R> {
    let atoms = exact_return_atoms(&rsmdp.mdp, policy)?;
    Ok(atoms
        .into_iter()
        .map(|(y, p)| p * rsmdp.utility.eval(y))
        .sum())
}
