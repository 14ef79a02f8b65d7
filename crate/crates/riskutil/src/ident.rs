//! Feasible-set analytics, environment-design utility elicitation, and the
//! transfer/imitation/assessment diagnostics.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::mdp::{HistoryPolicy, Mdp, RsMdp};
use crate::oracle::{enumerate_policy_atoms, expert_coverage, ExactDp};
use crate::scalar::{c, Real, ABS_TOL, TIE_TOL};
use crate::utility::Utility;

/// Per-triple optimality conditions certifying feasible-set membership:
/// at every expert-covered `(stage, state, accumulated return)` the expert's
/// action must have the largest optimal action-value.
#[derive(Debug, Clone)]
pub struct FeasibleSetCertificate<R: Real> {
    /// Covered triples `(h, s, y)`, sorted.
    pub covered: Vec<(usize, usize, R)>,
    /// One entry per covered triple and competing action:
    /// `(h, s, y, expert_action, other_action, q_expert - q_other)`.
    pub constraints: Vec<(usize, usize, R, usize, usize, R)>,
}

impl<R: Real> FeasibleSetCertificate<R> {
    /// All constraints hold within tolerance.
    pub fn holds(&self) -> bool {
        self.constraints
            .iter()
            .all(|&(_, _, _, _, _, slack)| slack >= -c::<R>(ABS_TOL))
    }

    pub fn worst_slack(&self) -> R {
        self.constraints
            .iter()
            .map(|&(_, _, _, _, _, s)| s)
            .fold(R::infinity(), R::min)
    }
}

/// Builds the certificate for `utility` by evaluating exact optimal
/// action-values at every expert-covered triple.
pub fn feasible_certificate<R: Real>(
    utility: &Utility<R>,
    env: &Mdp<R>,
    expert: &HistoryPolicy<R>,
) -> Result<FeasibleSetCertificate<R>> {
    let rsmdp = RsMdp::new(env.clone(), utility.clone())?;
    let (covered, _) = expert_coverage(env, expert)?;
    let mut dp = ExactDp::new(&rsmdp);
    let mut constraints = Vec::new();
    for &(h, s, y) in &covered {
        let a_expert = expert.action_at(h, s, y)?;
        let q_expert = dp.q_value(h, s, y, a_expert);
        for a in 0..env.num_actions() {
            if a == a_expert {
                continue;
            }
            let q_other = dp.q_value(h, s, y, a);
            constraints.push((h, s, y, a_expert, a, q_expert - q_other));
        }
    }
    Ok(FeasibleSetCertificate {
        covered,
        constraints,
    })
}

/// Exact membership test: `utility` is feasible iff the expert policy loses
/// nothing against the optimum. Returns the membership flag and the slack
/// `J* - J^E` (the noncompatibility).
pub fn feasible_membership<R: Real>(
    utility: &Utility<R>,
    env: &Mdp<R>,
    expert: &HistoryPolicy<R>,
    _grid: &Grid<R>,
) -> Result<(bool, R)> {
    let rsmdp = RsMdp::new(env.clone(), utility.clone())?;
    let (_, atoms) = expert_coverage(env, expert)?;
    let j_expert: R = atoms.iter().map(|&(y, p)| p * utility.eval(y)).sum();
    let mut dp = ExactDp::new(&rsmdp);
    let j_star = dp.value(1, env.initial_state(), R::zero());
    let slack = j_star - j_expert;
    Ok((slack <= c(ABS_TOL), slack))
}

/// Three-corridor elicitation gadget: from the start state the first action
/// walks corridor 1 (sure return `g1`); the second action walks corridor 3
/// with probability `q` (return `g3`) and corridor 2 otherwise (return
/// `g2`). Returns are laid out as a first-step reward plus greedily packed
/// per-step corridor rewards, so corridors 2 and 3 share their first-step
/// reward.
pub fn gadget_mdp<R: Real>(horizon: usize, g1: R, g2: R, g3: R, q: R) -> Result<Mdp<R>> {
    if horizon < 2 {
        return Err(Error::InvalidMdp(
            "the elicitation gadget needs horizon at least 2".into(),
        ));
    }
    let h_f = c::<R>(horizon as f64);
    let tail_cap = c::<R>((horizon - 1) as f64);
    for (name, g) in [("g1", g1), ("g2", g2), ("g3", g3)] {
        if g < R::zero() || g > h_f {
            return Err(Error::InvalidMdp(format!(
                "target return {name} = {g} outside [0, {h_f}]"
            )));
        }
    }
    if !(R::zero()..=R::one()).contains(&q) {
        return Err(Error::InvalidMdp(format!("q = {q} outside [0, 1]")));
    }

    // first-step rewards: corridor 1 free; corridors 2 and 3 share theirs
    let r1_a1 = g1.min(R::one());
    let lo = (g2 - tail_cap).max(g3 - tail_cap).max(R::zero());
    let hi = g2.min(g3).min(R::one());
    if lo > hi + c(ABS_TOL) {
        return Err(Error::InvalidMdp(format!(
            "returns {g2} and {g3} cannot share a first-step reward"
        )));
    }
    let r1_a2 = lo.min(hi);

    let n_states = 1 + 3 * (horizon - 1);
    let corridor_state = |i: usize, h: usize| 1 + (i - 1) * (horizon - 1) + (h - 2);

    let mut p = vec![R::zero(); horizon * n_states * 2 * n_states];
    let mut r = vec![R::zero(); horizon * n_states * 2];
    // default self-loops
    for h in 0..horizon {
        for s in 0..n_states {
            for a in 0..2 {
                p[((h * n_states + s) * 2 + a) * n_states + s] = R::one();
            }
        }
    }
    // stage 1 from the start state (state 0, so the flat bases are 0 and
    // n_states for the two actions)
    {
        p[0] = R::zero();
        p[corridor_state(1, 2)] = R::one();
        let base_a2 = n_states;
        p[base_a2] = R::zero();
        p[base_a2 + corridor_state(2, 2)] = R::one() - q;
        p[base_a2 + corridor_state(3, 2)] = q;
        r[0] = r1_a1;
        r[1] = r1_a2;
    }
    // corridor steps
    let mut tails = [g1 - r1_a1, g2 - r1_a2, g3 - r1_a2];
    for (i, tail) in tails.iter_mut().enumerate() {
        let corridor = i + 1;
        let mut remaining = *tail;
        for h in 2..=horizon {
            let s = corridor_state(corridor, h);
            let step = remaining.min(R::one()).max(R::zero());
            remaining -= step;
            for a in 0..2 {
                r[((h - 1) * n_states + s) * 2 + a] = step;
                if h < horizon {
                    let base = (((h - 1) * n_states + s) * 2 + a) * n_states;
                    p[base + s] = R::zero();
                    p[base + corridor_state(corridor, h + 1)] = R::one();
                }
            }
        }
        if remaining.abs() > c(ABS_TOL) {
            return Err(Error::InvalidMdp(format!(
                "could not pack corridor {corridor} return, {remaining} left over"
            )));
        }
    }
    Mdp::new(n_states, 2, horizon, 0, p, r, None)
}

/// An oracle answering, for a gadget instance, which first actions are
/// optimal for the (hidden) agent.
pub type ActionSetOracle<'a, R> = dyn FnMut(&Mdp<R>) -> Result<Vec<usize>> + 'a;

/// Self-play oracle: exact planning for a known agent utility, reporting
/// every action optimal within the tie tolerance.
pub fn self_play_oracle<R: Real>(agent: Utility<R>) -> impl FnMut(&Mdp<R>) -> Result<Vec<usize>> {
    move |mdp: &Mdp<R>| {
        let rsmdp = RsMdp::new(mdp.clone(), agent.clone())?;
        let mut dp = ExactDp::new(&rsmdp);
        Ok(dp.optimal_initial_actions())
    }
}

/// Binary-searches the mixing weight at which both gadget actions are
/// optimal. The lottery value increases in `q`, so the search brackets the
/// unique indifference point; inconsistent endpoint answers are diagnosed.
fn bisect_indifference<R: Real>(
    oracle: &mut ActionSetOracle<'_, R>,
    horizon: usize,
    g1: R,
    g2: R,
    g3: R,
    q_tolerance: R,
) -> Result<R> {
    let check = |oracle: &mut ActionSetOracle<'_, R>, q: R| -> Result<(bool, bool)> {
        let set = oracle(&gadget_mdp(horizon, g1, g2, g3, q)?)?;
        Ok((set.contains(&0), set.contains(&1)))
    };
    let (sure0, lottery0) = check(oracle, R::zero())?;
    if lottery0 && sure0 {
        return Ok(R::zero());
    }
    if !sure0 {
        return Err(Error::InconsistentOracle(format!(
            "lottery preferred at q = 0 for targets ({g1}, {g2}, {g3})"
        )));
    }
    let (sure1, lottery1) = check(oracle, R::one())?;
    if sure1 && lottery1 {
        return Ok(R::one());
    }
    if !lottery1 {
        return Err(Error::InconsistentOracle(format!(
            "sure option preferred at q = 1 for targets ({g1}, {g2}, {g3})"
        )));
    }

    let mut lo = R::zero();
    let mut hi = R::one();
    while hi - lo > q_tolerance {
        let mid = (lo + hi) * c(0.5);
        let (sure, lottery) = check(oracle, mid)?;
        match (sure, lottery) {
            (true, true) => return Ok(mid),
            (true, false) => lo = mid,
            (false, true) => hi = mid,
            (false, false) => {
                return Err(Error::InconsistentOracle(
                    "no optimal action reported".into(),
                ))
            }
        }
    }
    Ok((lo + hi) * c(0.5))
}

/// Recovers utility anchors from optimal-action observations in designed
/// environments.
///
/// A three-equation bootstrap pins `U(0.5)`, `U(1)`, and `U(1.5)` first;
/// each further target return then takes one indifference search against
/// the `(1, H)` lottery (or the `(0, 1)` lottery below return 1). Anchor
/// error scales with the search tolerance and the conditioning of the
/// bootstrap system.
pub fn elicit_utility<R: Real>(
    oracle: &mut ActionSetOracle<'_, R>,
    horizon: usize,
    target_returns: &[R],
    q_tolerance: R,
) -> Result<Vec<(R, R)>> {
    if horizon < 2 {
        return Err(Error::InvalidMdp("elicitation needs horizon >= 2".into()));
    }
    let h_f = c::<R>(horizon as f64);
    let one = R::one();
    let half = c::<R>(0.5);
    let three_halves = c::<R>(1.5);

    // Bootstrap system:
    //   U(1.5) = q' H + (1 - q') U(1)
    //   U(1)   = q'' U(1.5) + (1 - q'') U(0.5)
    //   U(0.5) = q''' U(1)
    let q1 = bisect_indifference(oracle, horizon, three_halves, one, h_f, q_tolerance)?;
    let q2 = bisect_indifference(oracle, horizon, one, half, three_halves, q_tolerance)?;
    let q3 = bisect_indifference(oracle, horizon, half, R::zero(), one, q_tolerance)?;
    let denom = one - q2 * (one - q1) - (one - q2) * q3;
    if denom <= c(1e-9) {
        return Err(Error::InconsistentOracle(format!(
            "singular bootstrap system (denominator {denom})"
        )));
    }
    let u_one = q2 * q1 * h_f / denom;
    let u_half = q3 * u_one;
    let u_three_halves = q1 * h_f + (one - q1) * u_one;

    let mut anchors: Vec<(R, R)> = vec![
        (R::zero(), R::zero()),
        (half, u_half),
        (one, u_one),
        (three_halves, u_three_halves),
        (h_f, h_f),
    ];
    for &g in target_returns {
        if g <= R::zero() || g >= h_f {
            return Err(Error::InvalidUtility(format!(
                "target return {g} outside (0, {h_f})"
            )));
        }
        if anchors.iter().any(|&(x, _)| (x - g).abs() <= c(ABS_TOL)) {
            continue;
        }
        let value = if g > one {
            let q = bisect_indifference(oracle, horizon, g, one, h_f, q_tolerance)?;
            q * h_f + (one - q) * u_one
        } else {
            let q = bisect_indifference(oracle, horizon, g, R::zero(), one, q_tolerance)?;
            q * u_one
        };
        anchors.push((g, value));
    }
    anchors.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    Ok(anchors)
}

/// Side-by-side behavior of two utilities in one environment: per-policy
/// values, optimal-policy sets, whether they intersect, and the assessment
/// distance `max over policies of |J(u1) - J(u2)|`.
#[derive(Debug, Clone)]
pub struct TransferReport<R: Real> {
    pub values_u1: Vec<R>,
    pub values_u2: Vec<R>,
    pub optimal_u1: Vec<usize>,
    pub optimal_u2: Vec<usize>,
    pub optima_intersect: bool,
    pub d_all: R,
}

/// Enumerates all deterministic history-measurable policies of `env` and
/// compares `u1` and `u2` across them.
pub fn transfer_diagnostic<R: Real>(
    u1: &Utility<R>,
    u2: &Utility<R>,
    env: &Mdp<R>,
    _grid: &Grid<R>,
) -> Result<TransferReport<R>> {
    let atoms = enumerate_policy_atoms(env)?;
    let value = |u: &Utility<R>, a: &[(R, R)]| -> R {
        a.iter().map(|&(y, p)| p * u.eval(y)).sum()
    };
    let values_u1: Vec<R> = atoms.iter().map(|a| value(u1, a)).collect();
    let values_u2: Vec<R> = atoms.iter().map(|a| value(u2, a)).collect();
    let best = |vals: &[R]| -> Vec<usize> {
        let m = vals.iter().cloned().fold(R::neg_infinity(), R::max);
        vals.iter()
            .enumerate()
            .filter(|(_, &v)| m - v <= c(TIE_TOL))
            .map(|(i, _)| i)
            .collect()
    };
    let optimal_u1 = best(&values_u1);
    let optimal_u2 = best(&values_u2);
    let optima_intersect = optimal_u1.iter().any(|i| optimal_u2.contains(i));
    let d_all = values_u1
        .iter()
        .zip(&values_u2)
        .map(|(&a, &b)| (a - b).abs())
        .fold(R::zero(), R::max);
    Ok(TransferReport {
        values_u1,
        values_u2,
        optimal_u1,
        optimal_u2,
        optima_intersect,
        d_all,
    })
}
