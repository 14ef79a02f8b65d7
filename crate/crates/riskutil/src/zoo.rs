//! Built-in benchmark environments with golden values, random MDP
//! generation, and survey-policy ingestion.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::mdp::{HistoryPolicy, Labels, Mdp};
use crate::scalar::{c, derive_seed, Real};
use crate::utility::Utility;

/// Identifiers of the built-in environments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ZooId {
    /// Two-step wallet scenario where the sensible action at the middle
    /// state depends on the money collected so far.
    Wallet,
    /// Four-state, two-action branching MDP with a known feasible region
    /// over (U(1), U(1.5)).
    Branching,
    /// Seven-state MDP where history-dependent play beats every Markovian
    /// policy by a computable margin.
    HistoryGap,
    /// Stationary MDP whose best Markovian policy is non-stationary and
    /// whose best stationary policy is stochastic.
    TwoRounds,
    /// Transfer counterexample pair differing in the transition model.
    DynamicsShift,
    /// Transfer counterexample pair differing in the reward function.
    RewardShift,
    /// Imitation counterexample with two feasible utilities assessing the
    /// same policy very differently.
    ImitationTrap,
    /// Assessment counterexample with utility distance one.
    AssessmentGap,
    /// Three-corridor elicitation gadget (default instance).
    ElicitationGadget,
    /// Four-level money-collection MDP used for the behavioral survey.
    Survey,
}

pub const ALL_ZOO_IDS: [ZooId; 10] = [
    ZooId::Wallet,
    ZooId::Branching,
    ZooId::HistoryGap,
    ZooId::TwoRounds,
    ZooId::DynamicsShift,
    ZooId::RewardShift,
    ZooId::ImitationTrap,
    ZooId::AssessmentGap,
    ZooId::ElicitationGadget,
    ZooId::Survey,
];

impl ZooId {
    pub fn name(&self) -> &'static str {
        match self {
            ZooId::Wallet => "wallet",
            ZooId::Branching => "branching",
            ZooId::HistoryGap => "history_gap",
            ZooId::TwoRounds => "two_rounds",
            ZooId::DynamicsShift => "dynamics_shift",
            ZooId::RewardShift => "reward_shift",
            ZooId::ImitationTrap => "imitation_trap",
            ZooId::AssessmentGap => "assessment_gap",
            ZooId::ElicitationGadget => "elicitation_gadget",
            ZooId::Survey => "survey",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        ALL_ZOO_IDS
            .iter()
            .copied()
            .find(|id| id.name() == name)
            .ok_or_else(|| Error::UnknownZooId(name.to_string()))
    }
}

/// A declared golden quantity: what it is, its expected value, where the
/// number comes from, and the tolerance it must reproduce under.
#[derive(Debug, Clone)]
pub struct GoldenValue {
    pub quantity: &'static str,
    pub value: f64,
    pub provenance: &'static str,
    pub tolerance: f64,
}

/// A fully populated benchmark entry.
#[derive(Debug, Clone)]
pub struct ZooEntry<R: Real> {
    pub id: ZooId,
    pub mdp: Mdp<R>,
    /// Companion environment for the transfer counterexamples (modified
    /// dynamics or rewards).
    pub transfer_mdp: Option<Mdp<R>>,
    pub expert: Option<HistoryPolicy<R>>,
    pub utilities: Vec<(&'static str, Utility<R>)>,
    /// Grid step that represents every reward of the entry exactly.
    pub epsilon0: R,
    pub golden: Vec<GoldenValue>,
}

impl<R: Real> ZooEntry<R> {
    pub fn grid(&self) -> Grid<R> {
        Grid::new(self.epsilon0, self.mdp.horizon()).expect("entry grid")
    }

    pub fn utility(&self, name: &str) -> Option<&Utility<R>> {
        self.utilities
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, u)| u)
    }
}

/// Piecewise utility from `f64` anchor literals.
fn pw<R: Real>(anchors: &[(f64, f64)], horizon: f64) -> Result<Utility<R>> {
    Utility::piecewise(
        anchors.iter().map(|&(x, u)| (c(x), c(u))).collect(),
        c(horizon),
        None,
    )
}

/// Sparse next-state distribution used by the environment builders.
type ProbRow<'a> = &'a [(usize, f64)];

/// Builds a stationary MDP from per-(state, action) rows replicated over
/// all stages.
fn stationary<R: Real>(
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    s0: usize,
    p_rows: &[(usize, usize, ProbRow)],
    r_rows: &[(usize, usize, f64)],
    labels: Option<Labels>,
) -> Result<Mdp<R>> {
    let mut p = vec![R::zero(); horizon * num_states * num_actions * num_states];
    let mut r = vec![R::zero(); horizon * num_states * num_actions];
    for h in 0..horizon {
        // default: self-loop with reward 0
        for s in 0..num_states {
            for a in 0..num_actions {
                p[((h * num_states + s) * num_actions + a) * num_states + s] = R::one();
            }
        }
        for &(s, a, row) in p_rows {
            let base = ((h * num_states + s) * num_actions + a) * num_states;
            for x in p.iter_mut().skip(base).take(num_states) {
                *x = R::zero();
            }
            for &(s_next, prob) in row {
                p[base + s_next] = c(prob);
            }
        }
        for &(s, a, rew) in r_rows {
            r[(h * num_states + s) * num_actions + a] = c(rew);
        }
    }
    Mdp::new(num_states, num_actions, horizon, s0, p, r, labels)
}

/// Builds a stage-dependent MDP from per-(h, state, action) rows; entries
/// not listed default to a zero-reward self-loop.
fn staged<R: Real>(
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    s0: usize,
    p_rows: &[(usize, usize, usize, ProbRow)],
    r_rows: &[(usize, usize, usize, f64)],
) -> Result<Mdp<R>> {
    let mut p = vec![R::zero(); horizon * num_states * num_actions * num_states];
    let mut r = vec![R::zero(); horizon * num_states * num_actions];
    for h in 0..horizon {
        for s in 0..num_states {
            for a in 0..num_actions {
                p[((h * num_states + s) * num_actions + a) * num_states + s] = R::one();
            }
        }
    }
    for &(h, s, a, row) in p_rows {
        let base = (((h - 1) * num_states + s) * num_actions + a) * num_states;
        for x in p.iter_mut().skip(base).take(num_states) {
            *x = R::zero();
        }
        for &(s_next, prob) in row {
            p[base + s_next] = c(prob);
        }
    }
    for &(h, s, a, rew) in r_rows {
        r[((h - 1) * num_states + s) * num_actions + a] = c(rew);
    }
    Mdp::new(num_states, num_actions, horizon, s0, p, r, None)
}

fn constant_expert<R: Real>(mdp: &Mdp<R>, epsilon0: R, action: usize) -> HistoryPolicy<R> {
    let grid = Grid::new(epsilon0, mdp.horizon()).expect("grid");
    HistoryPolicy::constant(grid, mdp.horizon(), mdp.num_states(), action)
}

/// Returns the fully populated entry for `id`.
pub fn zoo<R: Real>(id: ZooId) -> Result<ZooEntry<R>> {
    match id {
        ZooId::Wallet => wallet(),
        ZooId::Branching => branching(),
        ZooId::HistoryGap => history_gap(),
        ZooId::TwoRounds => two_rounds(),
        ZooId::DynamicsShift => dynamics_shift(),
        ZooId::RewardShift => reward_shift(),
        ZooId::ImitationTrap => imitation_trap(),
        ZooId::AssessmentGap => assessment_gap(),
        ZooId::ElicitationGadget => elicitation_gadget(),
        ZooId::Survey => survey(),
    }
}

fn wallet<R: Real>() -> Result<ZooEntry<R>> {
    // States: start, mid, win150, win0, safe50 (euros scaled by 1/1000).
    let mdp = staged(
        5,
        2,
        3,
        0,
        &[
            (1, 0, 0, &[(1, 1.0)]),
            (1, 0, 1, &[(1, 1.0)]),
            (2, 1, 0, &[(2, 0.5), (3, 0.5)]), // risky
            (2, 1, 1, &[(4, 1.0)]),           // safe
        ],
        &[
            (1, 0, 1, 1.0), // second action banks 1000 euros first
            (3, 2, 0, 0.15),
            (3, 2, 1, 0.15),
            (3, 4, 0, 0.05),
            (3, 4, 1, 0.05),
        ],
    )?;
    // Risk aversion decreasing in wealth: nearly linear below 1, convex
    // kink above, so the risky branch only pays once 1.0 is banked.
    let u = pw(
        &[
            (0.0, 0.0),
            (0.05, 0.1),
            (0.15, 0.12),
            (1.0, 0.5),
            (1.05, 0.55),
            (1.15, 0.7),
            (3.0, 3.0),
        ],
        3.0,
    )?;
    Ok(ZooEntry {
        id: ZooId::Wallet,
        mdp,
        transfer_mdp: None,
        expert: None,
        utilities: vec![("decreasing_risk_aversion", u)],
        epsilon0: c(0.05),
        golden: vec![
            GoldenValue {
                quantity: "optimal action at mid state with empty wallet",
                value: 1.0, // safe
                provenance: "history-dependent play in the wallet scenario",
                tolerance: 0.0,
            },
            GoldenValue {
                quantity: "optimal action at mid state after banking 1.0",
                value: 0.0, // risky
                provenance: "history-dependent play in the wallet scenario",
                tolerance: 0.0,
            },
        ],
    })
}

fn branching<R: Real>() -> Result<ZooEntry<R>> {
    let mdp = staged(
        4,
        2,
        2,
        0,
        &[
            (1, 0, 0, &[(1, 0.4), (2, 0.5), (3, 0.1)]),
            (1, 0, 1, &[(2, 0.2), (3, 0.8)]),
        ],
        &[
            (1, 0, 0, 1.0),
            (1, 0, 1, 0.5),
            (2, 1, 0, 0.0),
            (2, 1, 1, 0.0),
            (2, 2, 0, 0.5),
            (2, 2, 1, 0.5),
            (2, 3, 0, 1.0),
            (2, 3, 1, 1.0),
        ],
    )?;
    let u_sample = pw(&[(0.0, 0.0), (1.0, 0.1), (1.5, 0.7), (2.0, 2.0)], 2.0)?;
    let expert = constant_expert(&mdp, c(0.5), 0);
    Ok(ZooEntry {
        id: ZooId::Branching,
        mdp,
        transfer_mdp: None,
        expert: Some(expert),
        utilities: vec![("sample", u_sample)],
        epsilon0: c(0.5),
        golden: vec![
            GoldenValue {
                quantity: "J under first action with the sample utility",
                value: 0.59,
                provenance: "0.1 U(2) + 0.5 U(1.5) + 0.4 U(1)",
                tolerance: 1e-12,
            },
            GoldenValue {
                quantity: "J under second action with the sample utility",
                value: 0.58,
                provenance: "0.8 U(1.5) + 0.2 U(1)",
                tolerance: 1e-12,
            },
            GoldenValue {
                quantity: "optimal value with the sample utility",
                value: 0.59,
                provenance: "two-policy enumeration",
                tolerance: 1e-12,
            },
        ],
    })
}

/// The constant `x` of the history-gap instance.
pub const HISTORY_GAP_X: f64 = 2.6;

fn history_gap<R: Real>() -> Result<ZooEntry<R>> {
    let x = HISTORY_GAP_X;
    let mdp = staged(
        7,
        2,
        4,
        0,
        &[
            (1, 0, 0, &[(1, 0.5), (2, 0.5)]),
            (1, 0, 1, &[(1, 0.5), (2, 0.5)]),
            (2, 1, 0, &[(3, 1.0)]),
            (2, 1, 1, &[(3, 1.0)]),
            (2, 2, 0, &[(3, 1.0)]),
            (2, 2, 1, &[(3, 1.0)]),
            (3, 3, 0, &[(4, x / 3.99), (5, 1.0 - x / 3.99)]),
            (3, 3, 1, &[(6, 1.0)]),
        ],
        &[
            (2, 1, 0, 1.0),
            (2, 1, 1, 1.0),
            (4, 4, 0, 1.0),
            (4, 4, 1, 1.0),
            (4, 6, 0, 0.5),
            (4, 6, 1, 0.5),
        ],
    )?;
    let u = pw(
        &[
            (0.0, 0.0),
            (0.5, x - 0.1),
            (1.0, x),
            (1.5, x + 0.1),
            (2.0, 3.99),
            (4.0, 4.0),
        ],
        4.0,
    )?;
    let gap = 0.5 * (x - x * x / 3.99 - 0.1);
    Ok(ZooEntry {
        id: ZooId::HistoryGap,
        mdp,
        transfer_mdp: None,
        expert: None,
        utilities: vec![("gap", u)],
        epsilon0: c(0.5),
        golden: vec![
            GoldenValue {
                quantity: "best Markovian value",
                value: (2.0 * x - 0.0) / 2.0 * 1.0, // (U(1.5) + U(0.5)) / 2 = x
                provenance: "(U(1.5) + U(0.5)) / 2",
                tolerance: 1e-12,
            },
            GoldenValue {
                quantity: "history-dependent minus Markovian optimum",
                value: gap,
                provenance: "(x - x^2/3.99 - 0.1) / 2 at x = 2.6",
                tolerance: 1e-6,
            },
        ],
    })
}

fn two_rounds<R: Real>() -> Result<ZooEntry<R>> {
    let mdp = stationary(
        4,
        2,
        4,
        0,
        &[
            (0, 0, &[(2, 1.0 / 3.0), (3, 2.0 / 3.0)]),
            (0, 1, &[(1, 1.0)]),
            (1, 0, &[(0, 1.0)]),
            (1, 1, &[(0, 1.0)]),
            (2, 0, &[(0, 1.0)]),
            (2, 1, &[(0, 1.0)]),
            (3, 0, &[(0, 1.0)]),
            (3, 1, &[(0, 1.0)]),
        ],
        &[
            (1, 0, 0.5),
            (1, 1, 0.5),
            (2, 0, 1.0),
            (2, 1, 1.0),
            (3, 0, 0.0),
            (3, 1, 0.0),
        ],
        None,
    )?;
    let u = pw(
        &[
            (0.0, 0.0),
            (0.5, 0.15),
            (1.0, 0.2),
            (1.5, 1.8),
            (2.0, 2.0),
            (4.0, 4.0),
        ],
        4.0,
    )?;
    Ok(ZooEntry {
        id: ZooId::TwoRounds,
        mdp,
        transfer_mdp: None,
        expert: None,
        utilities: vec![("table", u)],
        epsilon0: c(0.5),
        golden: vec![
            // Certified by enumeration with the table utility; the instance
            // has no usable closed form.
            GoldenValue {
                quantity: "best Markovian (non-stationary) value",
                value: 0.7,
                provenance: "enumeration over stage-dependent deterministic policies",
                tolerance: 1e-9,
            },
            GoldenValue {
                quantity: "best stationary deterministic value",
                value: 1.2 - 8.0 / 9.0, // play the first action everywhere
                provenance: "enumeration over stationary deterministic policies",
                tolerance: 1e-9,
            },
            GoldenValue {
                quantity: "best stationary stochastic value",
                value: 0.48125,
                provenance: "quadratic in the mixing weight, optimum at 9/16",
                tolerance: 1e-5,
            },
        ],
    })
}

fn dynamics_shift<R: Real>() -> Result<ZooEntry<R>> {
    let base_rewards: &[(usize, usize, usize, f64)] = &[
        (2, 1, 0, 0.0),
        (2, 1, 1, 0.0),
        (2, 2, 0, 0.25),
        (2, 2, 1, 0.25),
        (2, 3, 0, 0.75),
        (2, 3, 1, 0.75),
        (2, 4, 0, 1.0),
        (2, 4, 1, 1.0),
    ];
    let mdp = staged(
        5,
        2,
        2,
        0,
        &[
            (1, 0, 0, &[(1, 0.25), (2, 0.25), (3, 0.25), (4, 0.25)]),
            (1, 0, 1, &[(2, 0.5), (3, 0.5)]),
        ],
        base_rewards,
    )?;
    let transfer = staged(
        5,
        2,
        2,
        0,
        &[
            (1, 0, 0, &[(1, 0.25), (2, 0.25), (3, 0.25), (4, 0.25)]),
            (1, 0, 1, &[(1, 0.7), (4, 0.3)]),
        ],
        base_rewards,
    )?;
    let u1 = pw(&[(0.0, 0.0), (0.25, 0.01), (0.75, 0.02), (1.0, 1.99), (2.0, 2.0)], 2.0)?;
    let u2 = pw(&[(0.0, 0.0), (0.25, 0.01), (0.75, 0.99), (1.0, 1.99), (2.0, 2.0)], 2.0)?;
    let expert = constant_expert(&mdp, c(0.25), 0);
    Ok(ZooEntry {
        id: ZooId::DynamicsShift,
        mdp,
        transfer_mdp: Some(transfer),
        expert: Some(expert),
        utilities: vec![("u1", u1), ("u2", u2)],
        epsilon0: c(0.25),
        golden: vec![
            GoldenValue {
                quantity: "expert value under u1 in the transfer MDP",
                value: 0.505,
                provenance: "2.02 / 4",
                tolerance: 1e-12,
            },
            GoldenValue {
                quantity: "alternative value under u1 in the transfer MDP",
                value: 0.597,
                provenance: "0.3 x 1.99",
                tolerance: 1e-12,
            },
            GoldenValue {
                quantity: "expert value under u2 in the transfer MDP",
                value: 0.7475,
                provenance: "2.99 / 4",
                tolerance: 1e-12,
            },
            GoldenValue {
                quantity: "alternative value under u2 in the transfer MDP",
                value: 0.597,
                provenance: "0.3 x 1.99",
                tolerance: 1e-12,
            },
        ],
    })
}

fn reward_shift<R: Real>() -> Result<ZooEntry<R>> {
    let p_rows: &[(usize, usize, usize, ProbRow)] = &[
        (1, 0, 0, &[(1, 0.5), (2, 0.5)]),
        (1, 0, 1, &[(1, 0.9), (2, 0.1)]),
    ];
    let mdp = staged(
        3,
        2,
        2,
        0,
        p_rows,
        &[
            (1, 0, 1, 0.5),
            (2, 1, 0, 0.0),
            (2, 1, 1, 0.0),
            (2, 2, 0, 1.0),
            (2, 2, 1, 1.0),
        ],
    )?;
    let transfer = staged(
        3,
        2,
        2,
        0,
        p_rows,
        &[
            (1, 0, 0, 0.5),
            (2, 1, 0, 1.0),
            (2, 1, 1, 1.0),
            (2, 2, 0, 0.0),
            (2, 2, 1, 0.0),
        ],
    )?;
    let u1 = pw(&[(0.0, 0.0), (0.5, 0.1), (1.0, 0.9), (1.5, 1.5), (2.0, 2.0)], 2.0)?;
    let u2 = pw(&[(0.0, 0.0), (0.5, 0.1), (1.0, 0.8), (1.5, 1.5), (2.0, 2.0)], 2.0)?;
    let expert = constant_expert(&mdp, c(0.5), 0);
    Ok(ZooEntry {
        id: ZooId::RewardShift,
        mdp,
        transfer_mdp: Some(transfer),
        expert: Some(expert),
        utilities: vec![("u1", u1), ("u2", u2)],
        epsilon0: c(0.5),
        golden: vec![
            GoldenValue {
                quantity: "expert value under u1 with the modified rewards",
                value: 0.8,
                provenance: "1.6 / 2",
                tolerance: 1e-12,
            },
            GoldenValue {
                quantity: "alternative value under u1 with the modified rewards",
                value: 0.81,
                provenance: "0.9 x 0.9",
                tolerance: 1e-12,
            },
            GoldenValue {
                quantity: "expert value under u2 with the modified rewards",
                value: 0.8,
                provenance: "1.6 / 2",
                tolerance: 1e-12,
            },
            GoldenValue {
                quantity: "alternative value under u2 with the modified rewards",
                value: 0.72,
                provenance: "0.9 x 0.8",
                tolerance: 1e-12,
            },
        ],
    })
}

fn imitation_trap<R: Real>() -> Result<ZooEntry<R>> {
    let mdp = staged(
        4,
        3,
        2,
        0,
        &[
            (1, 0, 0, &[(2, 1.0)]),
            (1, 0, 1, &[(1, 0.91), (3, 0.09)]),
            (1, 0, 2, &[(1, 1.0)]),
        ],
        &[
            (2, 1, 0, 0.0),
            (2, 1, 1, 0.0),
            (2, 1, 2, 0.0),
            (2, 2, 0, 0.5),
            (2, 2, 1, 0.5),
            (2, 2, 2, 0.5),
            (2, 3, 0, 1.0),
            (2, 3, 1, 1.0),
            (2, 3, 2, 1.0),
        ],
    )?;
    let u1 = pw(&[(0.0, 0.0), (0.5, 0.1), (1.0, 0.1 / 0.09), (2.0, 2.0)], 2.0)?;
    let u2 = pw(&[(0.0, 0.0), (0.5, 1.099), (1.0, 1.1), (2.0, 2.0)], 2.0)?;
    let expert = constant_expert(&mdp, c(0.5), 0);
    Ok(ZooEntry {
        id: ZooId::ImitationTrap,
        mdp,
        transfer_mdp: None,
        expert: Some(expert),
        utilities: vec![("u1", u1), ("u2", u2)],
        epsilon0: c(0.5),
        golden: vec![
            GoldenValue {
                quantity: "optimal value under u1",
                value: 0.1,
                provenance: "U1(0.5)",
                tolerance: 1e-12,
            },
            GoldenValue {
                quantity: "optimal value under u2",
                value: 1.099,
                provenance: "U2(0.5)",
                tolerance: 1e-12,
            },
        ],
    })
}

fn assessment_gap<R: Real>() -> Result<ZooEntry<R>> {
    let mdp = staged(
        3,
        3,
        2,
        0,
        &[
            (1, 0, 0, &[(1, 1.0)]),
            (1, 0, 1, &[(2, 1.0)]),
            (1, 0, 2, &[(2, 1.0)]),
        ],
        &[
            (1, 0, 2, 1.0),
            (2, 1, 0, 0.0),
            (2, 1, 1, 0.0),
            (2, 1, 2, 0.0),
            (2, 2, 0, 1.0),
            (2, 2, 1, 1.0),
            (2, 2, 2, 1.0),
        ],
    )?;
    let u1 = pw(&[(0.0, 0.0), (1.0, 0.1), (2.0, 2.0)], 2.0)?;
    let u2 = pw(&[(0.0, 0.0), (1.0, 1.1), (2.0, 2.0)], 2.0)?;
    let expert = constant_expert(&mdp, c(0.5), 2);
    Ok(ZooEntry {
        id: ZooId::AssessmentGap,
        mdp,
        transfer_mdp: None,
        expert: Some(expert),
        utilities: vec![("u1", u1), ("u2", u2)],
        epsilon0: c(0.5),
        golden: vec![GoldenValue {
            quantity: "assessment distance between u1 and u2",
            value: 1.0,
            provenance: "|U2(1) - U1(1)| through the sure-1 policy",
            tolerance: 1e-12,
        }],
    })
}

fn elicitation_gadget<R: Real>() -> Result<ZooEntry<R>> {
    let mdp = crate::ident::gadget_mdp::<R>(2, c(1.5), c(1.0), c(2.0), c(0.5))?;
    Ok(ZooEntry {
        id: ZooId::ElicitationGadget,
        mdp,
        transfer_mdp: None,
        expert: None,
        utilities: vec![("linear", Utility::linear(c(2.0)))],
        epsilon0: c(0.5),
        golden: vec![GoldenValue {
            quantity: "indifference mixing weight for a linear agent at target 1.5",
            value: 0.5,
            provenance: "1.5 = 2 q + (1 - q) at q = 1/2",
            tolerance: 1e-12,
        }],
    })
}

fn survey<R: Real>() -> Result<ZooEntry<R>> {
    // States L, M, H, T; actions a0 (stay), a+ (climb, unpaid), a- (cash,
    // sometimes falls). Rewards in thousandths of the euro amounts.
    let labels = Labels {
        states: vec!["L".into(), "M".into(), "H".into(), "T".into()],
        actions: vec!["a0".into(), "a+".into(), "a-".into()],
    };
    let third = 1.0 / 3.0;
    let fifth = 1.0 / 5.0;
    let mdp = stationary(
        4,
        3,
        5,
        1,
        &[
            (0, 0, &[(0, 1.0)]),
            (0, 1, &[(0, 2.0 * third), (1, third)]),
            (0, 2, &[(0, 1.0)]),
            (1, 0, &[(1, 1.0)]),
            (1, 1, &[(1, 2.0 * third), (2, third)]),
            (1, 2, &[(0, fifth), (1, 4.0 * fifth)]),
            (2, 0, &[(2, 1.0)]),
            (2, 1, &[(2, 2.0 * third), (3, third)]),
            (2, 2, &[(1, fifth), (2, 4.0 * fifth)]),
            (3, 0, &[(3, 1.0)]),
            (3, 1, &[(3, 1.0)]),
            (3, 2, &[(2, fifth), (3, 4.0 * fifth)]),
        ],
        &[
            (0, 0, 0.0),
            (0, 1, 0.0),
            (0, 2, 0.0),
            (1, 0, 0.03),
            (1, 1, 0.0),
            (1, 2, 0.06),
            (2, 0, 0.1),
            (2, 1, 0.0),
            (2, 2, 0.2),
            (3, 0, 0.5),
            (3, 1, 0.0),
            (3, 2, 1.0),
        ],
        Some(labels),
    )?;
    Ok(ZooEntry {
        id: ZooId::Survey,
        mdp,
        transfer_mdp: None,
        expert: None,
        utilities: vec![
            ("linear", Utility::linear(c(5.0))),
            ("sqrt", Utility::sqrt(c(5.0))),
            ("square", Utility::square(c(5.0))),
        ],
        epsilon0: c(0.01),
        golden: vec![
            GoldenValue {
                quantity: "climb probability of reaching the next level",
                value: third,
                provenance: "transition table row (M, a+)",
                tolerance: 1e-15,
            },
            GoldenValue {
                quantity: "cash-out reward at the high level",
                value: 0.2,
                provenance: "200 euros rescaled by 1/1000",
                tolerance: 1e-15,
            },
        ],
    })
}

/// Outcome of re-deriving one golden value.
#[derive(Debug, Clone)]
pub struct GoldenReport {
    pub quantity: &'static str,
    pub expected: f64,
    pub actual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Recomputes every golden value of the entry with the planner and the
/// enumeration oracles and compares at the declared tolerances.
pub fn zoo_check<R: Real>(entry: &ZooEntry<R>) -> Result<Vec<GoldenReport>> {
    use crate::ident::transfer_diagnostic;
    use crate::mdp::{expected_utility_exact, HistoryPolicy, RsMdp};
    use crate::oracle::{
        best_markovian, best_stationary_deterministic, best_stationary_stochastic,
        brute_force_optimal, ExactDp,
    };
    use crate::planner::plan;
    use crate::utility::DiscretizedUtility;

    let grid = entry.grid();
    let f = |x: R| x.to_f64().unwrap();
    let constant = |action: usize| {
        HistoryPolicy::constant(
            grid.clone(),
            entry.mdp.horizon(),
            entry.mdp.num_states(),
            action,
        )
    };
    let eval = |mdp: &Mdp<R>, utility: &Utility<R>, action: usize| -> Result<f64> {
        let rs = RsMdp::new(mdp.clone(), utility.clone())?;
        Ok(f(expected_utility_exact(&rs, &constant(action))?))
    };

    let actuals: Vec<f64> = match entry.id {
        ZooId::Wallet => {
            let du = DiscretizedUtility::sample(&entry.utilities[0].1, &grid)?;
            let out = plan(&du, &entry.mdp, &grid)?;
            let j_empty = grid.exact_index(R::zero())?;
            let j_banked = grid.exact_index(R::one())?;
            vec![
                out.policy.action(2, 1, j_empty)? as f64,
                out.policy.action(2, 1, j_banked)? as f64,
            ]
        }
        ZooId::Branching => {
            let u = &entry.utilities[0].1;
            let du = DiscretizedUtility::sample(u, &grid)?;
            let out = plan(&du, &entry.mdp, &grid)?;
            vec![
                eval(&entry.mdp, u, 0)?,
                eval(&entry.mdp, u, 1)?,
                f(out.j_star),
            ]
        }
        ZooId::HistoryGap => {
            let rs = RsMdp::new(entry.mdp.clone(), entry.utilities[0].1.clone())?;
            let markov = best_markovian(&rs)?;
            let (j_star, _) = brute_force_optimal(&rs, &grid)?;
            vec![f(markov), f(j_star - markov)]
        }
        ZooId::TwoRounds => {
            let rs = RsMdp::new(entry.mdp.clone(), entry.utilities[0].1.clone())?;
            let markov = best_markovian(&rs)?;
            let stat_det = best_stationary_deterministic(&rs)?;
            let (stat_mix, _) = best_stationary_stochastic(&rs, 1000)?;
            vec![f(markov), f(stat_det), f(stat_mix)]
        }
        ZooId::DynamicsShift | ZooId::RewardShift => {
            let transfer = entry.transfer_mdp.as_ref().expect("transfer companion");
            let u1 = entry.utility("u1").unwrap();
            let u2 = entry.utility("u2").unwrap();
            vec![
                eval(transfer, u1, 0)?,
                eval(transfer, u1, 1)?,
                eval(transfer, u2, 0)?,
                eval(transfer, u2, 1)?,
            ]
        }
        ZooId::ImitationTrap => {
            let mut out = Vec::new();
            for name in ["u1", "u2"] {
                let rs = RsMdp::new(entry.mdp.clone(), entry.utility(name).unwrap().clone())?;
                let (j_star, _) = brute_force_optimal(&rs, &grid)?;
                out.push(f(j_star));
            }
            out
        }
        ZooId::AssessmentGap => {
            let report = transfer_diagnostic(
                entry.utility("u1").unwrap(),
                entry.utility("u2").unwrap(),
                &entry.mdp,
                &grid,
            )?;
            vec![f(report.d_all)]
        }
        ZooId::ElicitationGadget => {
            // a linear agent must be indifferent on the default instance
            let rs = RsMdp::new(entry.mdp.clone(), entry.utilities[0].1.clone())?;
            let mut dp = ExactDp::new(&rs);
            let set = dp.optimal_initial_actions();
            vec![if set == vec![0, 1] { 0.5 } else { f64::NAN }]
        }
        ZooId::Survey => {
            vec![
                f(entry.mdp.transition_row(1, 1, 1)[2]),
                f(entry.mdp.reward(1, 2, 2)),
            ]
        }
    };

    debug_assert_eq!(actuals.len(), entry.golden.len());
    Ok(entry
        .golden
        .iter()
        .zip(actuals)
        .map(|(g, actual)| GoldenReport {
            quantity: g.quantity,
            expected: g.value,
            actual,
            tolerance: g.tolerance,
            pass: (actual - g.value).abs() <= g.tolerance,
        })
        .collect())
}

/// Random MDP: Dirichlet(1) transition rows truncated to their `sparsity`
/// largest entries and renormalized; rewards drawn uniformly from quarters
/// `{0, 0.25, 0.5, 0.75, 1}` so common grids represent them exactly.
pub fn random_mdp<R: Real>(
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    sparsity: usize,
    rng_seed: u64,
) -> Result<Mdp<R>> {
    let sparsity = sparsity.clamp(1, num_states);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(rng_seed, &[0xbeef]));
    let mut p = Vec::with_capacity(horizon * num_states * num_actions * num_states);
    let mut r = Vec::with_capacity(horizon * num_states * num_actions);
    for _h in 0..horizon {
        for _s in 0..num_states {
            for _a in 0..num_actions {
                // Dirichlet(1) row via normalized exponentials.
                let mut row: Vec<f64> = (0..num_states)
                    .map(|_| -(1.0 - rng.gen::<f64>()).ln())
                    .collect();
                let mut order: Vec<usize> = (0..num_states).collect();
                order.sort_by(|&i, &j| row[j].partial_cmp(&row[i]).unwrap());
                for &i in order.iter().skip(sparsity) {
                    row[i] = 0.0;
                }
                let total: f64 = row.iter().sum();
                for x in &mut row {
                    *x /= total;
                }
                p.extend(row.into_iter().map(|x| c::<R>(x)));
                let quarters = rng.gen_range(0..5) as f64;
                r.push(c::<R>(quarters * 0.25));
            }
        }
    }
    let s0 = ChaCha8Rng::seed_from_u64(derive_seed(rng_seed, &[0xfeed])).gen_range(0..num_states);
    Mdp::new(num_states, num_actions, horizon, s0, p, r, None)
}

/// Replaces each defined policy entry by a uniformly random action with
/// probability `rate`; deterministic given the seed.
pub fn inject_noise<R: Real>(
    policy: &HistoryPolicy<R>,
    num_actions: usize,
    rate: f64,
    rng_seed: u64,
) -> HistoryPolicy<R> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    HistoryPolicy::from_fn(
        policy.grid().clone(),
        policy.horizon(),
        policy.num_states(),
        |h, s, y| {
            let base = policy.action_at(h, s, y).ok()?;
            if rng.gen::<f64>() < rate {
                Some(rng.gen_range(0..num_actions))
            } else {
                Some(base)
            }
        },
    )
}

/// Survey answer row: state name, stage, cumulative reward in euros, action
/// name.
#[derive(Debug, Clone, serde::Deserialize)]
pub struct SurveyRow {
    pub s: String,
    pub h: usize,
    pub y_eur: f64,
    pub action: String,
}

/// Builds the survey policy from answer rows plus the two closure rules:
/// at the last stage everyone cashes out, and from the bottom level
/// everyone climbs. Remaining `(state, stage)` pairs take the action of the
/// answer with the nearest cumulative reward; pairs without any answer stay
/// undefined.
pub fn ingest_survey_policy<R: Real>(rows: &[SurveyRow]) -> Result<HistoryPolicy<R>> {
    let entry: ZooEntry<R> = survey()?;
    let grid = entry.grid();
    let horizon = entry.mdp.horizon();
    let num_states = entry.mdp.num_states();
    let state_of = |name: &str| -> Result<usize> {
        ["L", "M", "H", "T"]
            .iter()
            .position(|&n| n == name)
            .ok_or_else(|| Error::Schema {
                path: "survey answers".into(),
                detail: format!("unknown state {name}"),
            })
    };
    let action_of = |name: &str| -> Result<usize> {
        ["a0", "a+", "a-"]
            .iter()
            .position(|&n| n == name)
            .ok_or_else(|| Error::Schema {
                path: "survey answers".into(),
                detail: format!("action {name} outside {{a0, a+, a-}}"),
            })
    };

    // (state, stage) -> sorted (normalized y, action)
    let mut table: Vec<Vec<(f64, usize)>> = vec![Vec::new(); num_states * horizon];
    for row in rows {
        let s = state_of(&row.s)?;
        let a = action_of(&row.action)?;
        if row.h == 0 || row.h > horizon {
            return Err(Error::Schema {
                path: "survey answers".into(),
                detail: format!("stage {} outside 1..={horizon}", row.h),
            });
        }
        let y = row.y_eur / 1000.0;
        let bucket = &mut table[s * horizon + (row.h - 1)];
        if let Some(&(_, prev)) = bucket
            .iter()
            .find(|(y0, _)| (y0 - y).abs() < 1e-9)
        {
            if prev != a {
                return Err(Error::Schema {
                    path: "survey answers".into(),
                    detail: format!(
                        "contradictory answers at ({}, {}, {} euros)",
                        row.s, row.h, row.y_eur
                    ),
                });
            }
            continue;
        }
        bucket.push((y, a));
    }
    for bucket in &mut table {
        bucket.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    }

    Ok(HistoryPolicy::from_fn(
        grid,
        horizon,
        num_states,
        |h, s, y| {
            if h == horizon {
                return Some(2); // cash out at the end
            }
            if s == 0 {
                return Some(1); // climb from the bottom level
            }
            let bucket = &table[s * horizon + (h - 1)];
            if bucket.is_empty() {
                return None;
            }
            let yf = y.to_f64().unwrap();
            // nearest listed y, ties to the lower one
            let mut best = bucket[0];
            let mut best_d = (bucket[0].0 - yf).abs();
            for &(y0, a) in bucket.iter().skip(1) {
                let d = (y0 - yf).abs();
                if d < best_d - 1e-12 {
                    best = (y0, a);
                    best_d = d;
                }
            }
            Some(best.1)
        },
    ))
}
