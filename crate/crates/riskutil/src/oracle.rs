//! Independent exact solvers used to certify the grid planner: exhaustive
//! policy enumeration, reachable-set dynamic programming over exact partial
//! returns, and restricted-policy-class searches (Markovian, stationary,
//! stochastic mixtures).

use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::mdp::{HistoryPolicy, Mdp, RsMdp};
use crate::planner::EnlargedPolicy;
use crate::scalar::{c, enum_cap, Real, TIE_TOL};

fn bits<R: Real>(y: R) -> u64 {
    y.to_f64().unwrap().to_bits()
}

/// Reachable `(stage, state, exact partial return)` triples, stage by stage.
/// Stage `h` holds the triples where a decision is taken at `h`.
pub struct ReachableTriples<R: Real> {
    /// `per_stage[h-1]` lists `(state, partial return)` pairs, sorted.
    pub per_stage: Vec<Vec<(usize, R)>>,
}

pub fn reachable_triples<R: Real>(mdp: &Mdp<R>) -> ReachableTriples<R> {
    let mut per_stage = Vec::with_capacity(mdp.horizon());
    let mut layer: BTreeMap<(usize, u64), R> = BTreeMap::new();
    layer.insert((mdp.initial_state(), bits(R::zero())), R::zero());
    for h in 1..=mdp.horizon() {
        let mut triples: Vec<(usize, R)> = layer
            .iter()
            .map(|(&(s, _), &y)| (s, y))
            .collect();
        triples.sort_by(|a, b| {
            a.0.cmp(&b.0)
                .then(a.1.partial_cmp(&b.1).unwrap())
        });
        triples.dedup_by(|a, b| a.0 == b.0 && bits(a.1) == bits(b.1));
        per_stage.push(triples.clone());

        let mut next: BTreeMap<(usize, u64), R> = BTreeMap::new();
        for &(s, y) in &triples {
            for a in 0..mdp.num_actions() {
                let y_next = y + mdp.reward(h, s, a);
                for (s_next, &p) in mdp.transition_row(h, s, a).iter().enumerate() {
                    if p > R::zero() {
                        next.insert((s_next, bits(y_next)), y_next);
                    }
                }
            }
        }
        layer = next;
    }
    ReachableTriples { per_stage }
}

/// Exact optimal values of the enlarged MDP over reachable triples, with
/// the continuous utility evaluated at exact returns. Top-down memoized;
/// independent of the grid discretization used by the planner.
pub struct ExactDp<'a, R: Real> {
    rsmdp: &'a RsMdp<R>,
    memo: HashMap<(usize, usize, u64), R>,
}

impl<'a, R: Real> ExactDp<'a, R> {
    pub fn new(rsmdp: &'a RsMdp<R>) -> Self {
        Self {
            rsmdp,
            memo: HashMap::new(),
        }
    }

    /// Optimal continuation value from `(h, s)` with accumulated return `y`.
    pub fn value(&mut self, h: usize, s: usize, y: R) -> R {
        if h > self.rsmdp.mdp.horizon() {
            return self.rsmdp.utility.eval(y);
        }
        let key = (h, s, bits(y));
        if let Some(&v) = self.memo.get(&key) {
            return v;
        }
        let mut best = R::neg_infinity();
        for a in 0..self.rsmdp.mdp.num_actions() {
            let q = self.q_value(h, s, y, a);
            if q > best {
                best = q;
            }
        }
        self.memo.insert(key, best);
        best
    }

    pub fn q_value(&mut self, h: usize, s: usize, y: R, a: usize) -> R {
        let y_next = y + self.rsmdp.mdp.reward(h, s, a);
        let row: Vec<(usize, R)> = self
            .rsmdp
            .mdp
            .transition_row(h, s, a)
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > R::zero())
            .map(|(s_next, &p)| (s_next, p))
            .collect();
        let mut acc = R::zero();
        for (s_next, p) in row {
            acc += p * self.value(h + 1, s_next, y_next);
        }
        acc
    }

    /// Actions optimal at the initial triple, within the tie tolerance.
    pub fn optimal_initial_actions(&mut self) -> Vec<usize> {
        let s0 = self.rsmdp.mdp.initial_state();
        let qs: Vec<R> = (0..self.rsmdp.mdp.num_actions())
            .map(|a| self.q_value(1, s0, R::zero(), a))
            .collect();
        let best = qs.iter().cloned().fold(R::neg_infinity(), R::max);
        qs.iter()
            .enumerate()
            .filter(|(_, &q)| best - q <= c(TIE_TOL))
            .map(|(a, _)| a)
            .collect()
    }
}

/// Exhaustive maximum of expected utility over deterministic policies
/// measurable in `(stage, state, accumulated return)`.
///
/// When the number of such policies exceeds the enumeration cap
/// (`RISKUTIL_CAP` overrides the default), falls back to exact dynamic
/// programming over the reachable triples, which computes the same optimum.
pub fn brute_force_optimal<R: Real>(
    rsmdp: &RsMdp<R>,
    grid: &Grid<R>,
) -> Result<(R, EnlargedPolicy)> {
    let reach = reachable_triples(&rsmdp.mdp);
    let n_triples: usize = reach.per_stage.iter().map(Vec::len).sum();
    let a_count = rsmdp.mdp.num_actions();

    let mut n_policies: f64 = 1.0;
    for _ in 0..n_triples {
        n_policies *= a_count as f64;
        if n_policies > enum_cap() as f64 {
            break;
        }
    }

    if n_policies <= enum_cap().min(200_000) as f64 {
        exhaustive_enumeration(rsmdp, grid, &reach)
    } else {
        dp_over_reachable(rsmdp, grid, &reach)
    }
}

fn triple_indexer<R: Real>(reach: &ReachableTriples<R>) -> HashMap<(usize, usize, u64), usize> {
    let mut map = HashMap::new();
    let mut idx = 0usize;
    for (h0, stage) in reach.per_stage.iter().enumerate() {
        for &(s, y) in stage {
            map.insert((h0 + 1, s, bits(y)), idx);
            idx += 1;
        }
    }
    map
}

fn eval_assignment<R: Real>(
    rsmdp: &RsMdp<R>,
    index: &HashMap<(usize, usize, u64), usize>,
    assignment: &[usize],
) -> R {
    // forward occupancy over (state, exact return), in deterministic order
    let mut layer: BTreeMap<(usize, u64), (R, R)> = BTreeMap::new(); // (y, prob)
    layer.insert(
        (rsmdp.mdp.initial_state(), bits(R::zero())),
        (R::zero(), R::one()),
    );
    for h in 1..=rsmdp.mdp.horizon() {
        let mut next: BTreeMap<(usize, u64), (R, R)> = BTreeMap::new();
        for (&(s, ykey), &(y, prob)) in &layer {
            let a = assignment[index[&(h, s, ykey)]];
            let y_next = y + rsmdp.mdp.reward(h, s, a);
            for (s_next, &p) in rsmdp.mdp.transition_row(h, s, a).iter().enumerate() {
                if p > R::zero() {
                    let e = next
                        .entry((s_next, bits(y_next)))
                        .or_insert((y_next, R::zero()));
                    e.1 += prob * p;
                }
            }
        }
        layer = next;
    }
    layer
        .values()
        .map(|&(y, p)| p * rsmdp.utility.eval(y))
        .sum()
}

fn exhaustive_enumeration<R: Real>(
    rsmdp: &RsMdp<R>,
    grid: &Grid<R>,
    reach: &ReachableTriples<R>,
) -> Result<(R, EnlargedPolicy)> {
    let index = triple_indexer(reach);
    let n = index.len();
    let a_count = rsmdp.mdp.num_actions();
    let mut assignment = vec![0usize; n];
    let mut best_j = R::neg_infinity();
    let mut best_assignment = assignment.clone();
    loop {
        let j = eval_assignment(rsmdp, &index, &assignment);
        if j > best_j {
            best_j = j;
            best_assignment = assignment.clone();
        }
        // odometer increment (lexicographic, so ties keep lowest indices)
        let mut pos = n;
        loop {
            if pos == 0 {
                return Ok((
                    best_j,
                    assignment_to_policy(rsmdp, grid, reach, &index, &best_assignment),
                ));
            }
            pos -= 1;
            assignment[pos] += 1;
            if assignment[pos] < a_count {
                break;
            }
            assignment[pos] = 0;
        }
    }
}

fn assignment_to_policy<R: Real>(
    rsmdp: &RsMdp<R>,
    grid: &Grid<R>,
    reach: &ReachableTriples<R>,
    index: &HashMap<(usize, usize, u64), usize>,
    assignment: &[usize],
) -> EnlargedPolicy {
    let (horizon, s_count, d) = (rsmdp.mdp.horizon(), rsmdp.mdp.num_states(), grid.d());
    let mut actions = vec![0u16; horizon * s_count * d];
    for (h0, stage) in reach.per_stage.iter().enumerate() {
        for &(s, y) in stage {
            let a = assignment[index[&(h0 + 1, s, bits(y))]];
            let j = grid.nearest_index(y);
            actions[(h0 * s_count + s) * d + j] = a as u16;
        }
    }
    EnlargedPolicy::new(horizon, s_count, d, actions).expect("sized table")
}

fn dp_over_reachable<R: Real>(
    rsmdp: &RsMdp<R>,
    grid: &Grid<R>,
    reach: &ReachableTriples<R>,
) -> Result<(R, EnlargedPolicy)> {
    let mut dp = ExactDp::new(rsmdp);
    let s0 = rsmdp.mdp.initial_state();
    let j_star = dp.value(1, s0, R::zero());

    let (horizon, s_count, d) = (rsmdp.mdp.horizon(), rsmdp.mdp.num_states(), grid.d());
    let mut actions = vec![0u16; horizon * s_count * d];
    for (h0, stage) in reach.per_stage.iter().enumerate() {
        let h = h0 + 1;
        for &(s, y) in stage {
            let mut best = R::neg_infinity();
            let mut best_a = 0usize;
            for a in 0..rsmdp.mdp.num_actions() {
                let q = dp.q_value(h, s, y, a);
                if q > best {
                    best = q;
                    best_a = a;
                }
            }
            actions[(h0 * s_count + s) * d + grid.nearest_index(y)] = best_a as u16;
        }
    }
    Ok((j_star, EnlargedPolicy::new(horizon, s_count, d, actions)?))
}

/// Expected utility of a policy assignment restricted to a class; shared by
/// the Markovian searches. `action_of(h, s)` picks the action.
fn eval_markovian<R: Real>(rsmdp: &RsMdp<R>, action_of: impl Fn(usize, usize) -> usize) -> R {
    eval_stochastic_markovian(rsmdp, |h, s, a| {
        if action_of(h, s) == a {
            R::one()
        } else {
            R::zero()
        }
    })
}

/// Expected utility of a (possibly stochastic) Markovian policy given by
/// per-stage action probabilities `prob_of(h, s, a)`.
pub fn eval_stochastic_markovian<R: Real>(
    rsmdp: &RsMdp<R>,
    prob_of: impl Fn(usize, usize, usize) -> R,
) -> R {
    let mdp = &rsmdp.mdp;
    let mut layer: BTreeMap<(usize, u64), (R, R)> = BTreeMap::new();
    layer.insert((mdp.initial_state(), bits(R::zero())), (R::zero(), R::one()));
    for h in 1..=mdp.horizon() {
        let mut next: BTreeMap<(usize, u64), (R, R)> = BTreeMap::new();
        for (&(s, _), &(y, prob)) in &layer {
            for a in 0..mdp.num_actions() {
                let pa = prob_of(h, s, a);
                if pa <= R::zero() {
                    continue;
                }
                let y_next = y + mdp.reward(h, s, a);
                for (s_next, &p) in mdp.transition_row(h, s, a).iter().enumerate() {
                    if p > R::zero() {
                        let e = next
                            .entry((s_next, bits(y_next)))
                            .or_insert((y_next, R::zero()));
                        e.1 += prob * pa * p;
                    }
                }
            }
        }
        layer = next;
    }
    layer
        .values()
        .map(|&(y, p)| p * rsmdp.utility.eval(y))
        .sum()
}

/// Best deterministic Markovian (stage-dependent, state-only) policy value,
/// by enumeration over reachable `(stage, state)` pairs.
pub fn best_markovian<R: Real>(rsmdp: &RsMdp<R>) -> Result<R> {
    let reach = reachable_triples(&rsmdp.mdp);
    // reachable states per stage
    let mut stage_states: Vec<Vec<usize>> = Vec::new();
    for stage in &reach.per_stage {
        let mut states: Vec<usize> = stage.iter().map(|&(s, _)| s).collect();
        states.sort_unstable();
        states.dedup();
        stage_states.push(states);
    }
    let slots: Vec<(usize, usize)> = stage_states
        .iter()
        .enumerate()
        .flat_map(|(h0, states)| states.iter().map(move |&s| (h0 + 1, s)))
        .collect();
    let a_count = rsmdp.mdp.num_actions();
    let mut n_policies: f64 = 1.0;
    for _ in 0..slots.len() {
        n_policies *= a_count as f64;
        if n_policies > enum_cap() as f64 {
            return Err(Error::EnumerationCapExceeded(format!(
                "{} Markovian decision slots at {} actions",
                slots.len(),
                a_count
            )));
        }
    }

    let index: HashMap<(usize, usize), usize> = slots
        .iter()
        .enumerate()
        .map(|(i, &hs)| (hs, i))
        .collect();
    let mut assignment = vec![0usize; slots.len()];
    let mut best = R::neg_infinity();
    loop {
        let j = eval_markovian(rsmdp, |h, s| {
            index.get(&(h, s)).map_or(0, |&i| assignment[i])
        });
        if j > best {
            best = j;
        }
        let mut pos = slots.len();
        loop {
            if pos == 0 {
                return Ok(best);
            }
            pos -= 1;
            assignment[pos] += 1;
            if assignment[pos] < a_count {
                break;
            }
            assignment[pos] = 0;
        }
    }
}

/// Best stationary deterministic Markovian policy value (same state-action
/// map at every stage).
pub fn best_stationary_deterministic<R: Real>(rsmdp: &RsMdp<R>) -> Result<R> {
    let s_count = rsmdp.mdp.num_states();
    let a_count = rsmdp.mdp.num_actions();
    let mut n_policies: f64 = 1.0;
    for _ in 0..s_count {
        n_policies *= a_count as f64;
        if n_policies > enum_cap() as f64 {
            return Err(Error::EnumerationCapExceeded(format!(
                "{s_count} states at {a_count} actions"
            )));
        }
    }
    let mut assignment = vec![0usize; s_count];
    let mut best = R::neg_infinity();
    loop {
        let j = eval_markovian(rsmdp, |_, s| assignment[s]);
        if j > best {
            best = j;
        }
        let mut pos = s_count;
        loop {
            if pos == 0 {
                return Ok(best);
            }
            pos -= 1;
            assignment[pos] += 1;
            if assignment[pos] < a_count {
                break;
            }
            assignment[pos] = 0;
        }
    }
}

/// Best stationary stochastic Markovian policy over per-state mixing weights
/// on a uniform grid, for two-action MDPs: each relevant state plays action
/// 0 with weight `k / resolution`. Returns `(value, weights)`.
///
/// States whose actions all share transitions and rewards at every stage are
/// fixed to action 0 since mixing cannot matter there.
pub fn best_stationary_stochastic<R: Real>(
    rsmdp: &RsMdp<R>,
    resolution: usize,
) -> Result<(R, Vec<R>)> {
    let mdp = &rsmdp.mdp;
    if mdp.num_actions() != 2 {
        return Err(Error::EnumerationCapExceeded(
            "stochastic mixing search implemented for two-action MDPs".into(),
        ));
    }
    let s_count = mdp.num_states();
    let relevant: Vec<usize> = (0..s_count)
        .filter(|&s| {
            (1..=mdp.horizon()).any(|h| {
                mdp.transition_row(h, s, 0) != mdp.transition_row(h, s, 1)
                    || mdp.reward(h, s, 0) != mdp.reward(h, s, 1)
            })
        })
        .collect();
    let combos = (resolution + 1) as f64;
    if combos.powi(relevant.len() as i32) > enum_cap() as f64 {
        return Err(Error::EnumerationCapExceeded(format!(
            "{} relevant states at resolution {resolution}",
            relevant.len()
        )));
    }

    let mut weights = vec![R::one(); s_count]; // prob of action 0
    let mut counters = vec![0usize; relevant.len()];
    let mut best = R::neg_infinity();
    let mut best_weights = weights.clone();
    loop {
        for (i, &s) in relevant.iter().enumerate() {
            weights[s] = c::<R>(counters[i] as f64 / resolution as f64);
        }
        let j = eval_stochastic_markovian(rsmdp, |_, s, a| {
            if a == 0 {
                weights[s]
            } else {
                R::one() - weights[s]
            }
        });
        if j > best {
            best = j;
            best_weights = weights.clone();
        }
        let mut pos = relevant.len();
        loop {
            if pos == 0 {
                return Ok((best, best_weights));
            }
            pos -= 1;
            counters[pos] += 1;
            if counters[pos] <= resolution {
                break;
            }
            counters[pos] = 0;
        }
    }
}

/// Return-distribution atoms of every deterministic `(stage, state,
/// return)`-measurable policy, for small instances. Used by the transfer and
/// assessment diagnostics.
pub fn enumerate_policy_atoms<R: Real>(mdp: &Mdp<R>) -> Result<Vec<Vec<(R, R)>>> {
    let reach = reachable_triples(mdp);
    let index = triple_indexer(&reach);
    let n = index.len();
    let a_count = mdp.num_actions();
    let mut n_policies: f64 = 1.0;
    for _ in 0..n {
        n_policies *= a_count as f64;
        if n_policies > enum_cap().min(200_000) as f64 {
            return Err(Error::EnumerationCapExceeded(format!(
                "{n} reachable triples at {a_count} actions"
            )));
        }
    }

    let mut assignment = vec![0usize; n];
    let mut out = Vec::new();
    loop {
        let mut layer: BTreeMap<(usize, u64), (R, R)> = BTreeMap::new();
        layer.insert((mdp.initial_state(), bits(R::zero())), (R::zero(), R::one()));
        for h in 1..=mdp.horizon() {
            let mut next: BTreeMap<(usize, u64), (R, R)> = BTreeMap::new();
            for (&(s, ykey), &(y, prob)) in &layer {
                let a = assignment[index[&(h, s, ykey)]];
                let y_next = y + mdp.reward(h, s, a);
                for (s_next, &p) in mdp.transition_row(h, s, a).iter().enumerate() {
                    if p > R::zero() {
                        let e = next
                            .entry((s_next, bits(y_next)))
                            .or_insert((y_next, R::zero()));
                        e.1 += prob * p;
                    }
                }
            }
            layer = next;
        }
        let mut atoms: BTreeMap<u64, (R, R)> = BTreeMap::new();
        for &(y, p) in layer.values() {
            let e = atoms.entry(bits(y)).or_insert((y, R::zero()));
            e.1 += p;
        }
        out.push(atoms.into_values().collect());

        let mut pos = n;
        loop {
            if pos == 0 {
                return Ok(out);
            }
            pos -= 1;
            assignment[pos] += 1;
            if assignment[pos] < a_count {
                break;
            }
            assignment[pos] = 0;
        }
    }
}

/// Expert-covered `(stage, state, return)` triples plus the exact return
/// atoms of the expert policy.
pub type ExpertCoverage<R> = (Vec<(usize, usize, R)>, Vec<(R, R)>);

/// Exact return-distribution atoms of a history policy restricted to the
/// expert-covered triples; also returns the covered triples themselves.
pub fn expert_coverage<R: Real>(
    mdp: &Mdp<R>,
    expert: &HistoryPolicy<R>,
) -> Result<ExpertCoverage<R>> {
    let mut covered = Vec::new();
    let mut layer: BTreeMap<(usize, u64), (R, R)> = BTreeMap::new();
    layer.insert((mdp.initial_state(), bits(R::zero())), (R::zero(), R::one()));
    for h in 1..=mdp.horizon() {
        let mut next: BTreeMap<(usize, u64), (R, R)> = BTreeMap::new();
        for (&(s, _), &(y, prob)) in &layer {
            covered.push((h, s, y));
            let a = expert.action_at(h, s, y)?;
            let y_next = y + mdp.reward(h, s, a);
            for (s_next, &p) in mdp.transition_row(h, s, a).iter().enumerate() {
                if p > R::zero() {
                    let e = next
                        .entry((s_next, bits(y_next)))
                        .or_insert((y_next, R::zero()));
                    e.1 += prob * p;
                }
            }
        }
        layer = next;
    }
    let mut atoms: BTreeMap<u64, (R, R)> = BTreeMap::new();
    for &(y, p) in layer.values() {
        let e = atoms.entry(bits(y)).or_insert((y, R::zero()));
        e.1 += p;
    }
    let list: Vec<(R, R)> = atoms.into_values().collect();
    covered.sort_by(|a, b| {
        a.0.cmp(&b.0)
            .then(a.1.cmp(&b.1))
            .then(a.2.partial_cmp(&b.2).unwrap())
    });
    Ok((covered, list))
}
