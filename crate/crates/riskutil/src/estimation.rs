//! Generative-model exploration: uniform sampling of every
//! `(state, action, stage)` triple and the resulting empirical transition
//! model.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::mdp::Mdp;
use crate::scalar::{c, derive_seed, Real};

/// Sampling access to a transition model: one next-state draw per call.
pub trait GenerativeModel<R: Real> {
    fn num_states(&self) -> usize;
    fn num_actions(&self) -> usize;
    fn horizon(&self) -> usize;
    fn draw(&self, h: usize, s: usize, a: usize, rng: &mut ChaCha8Rng) -> usize;
}

impl<R: Real> GenerativeModel<R> for Mdp<R> {
    fn num_states(&self) -> usize {
        Mdp::num_states(self)
    }

    fn num_actions(&self) -> usize {
        Mdp::num_actions(self)
    }

    fn horizon(&self) -> usize {
        Mdp::horizon(self)
    }

    fn draw(&self, h: usize, s: usize, a: usize, rng: &mut ChaCha8Rng) -> usize {
        self.sample_next(h, s, a, rng)
    }
}

/// Empirical transition model built from per-triple counts.
#[derive(Debug, Clone)]
pub struct EmpiricalModel<R: Real> {
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    n_per_triple: usize,
    /// `counts[h-1][s][a][s']`
    counts: Vec<u64>,
    /// normalized counts
    p_hat: Vec<R>,
}

impl<R: Real> EmpiricalModel<R> {
    pub fn n_per_triple(&self) -> usize {
        self.n_per_triple
    }

    pub fn counts(&self, h: usize, s: usize, a: usize) -> &[u64] {
        let base =
            (((h - 1) * self.num_states + s) * self.num_actions + a) * self.num_states;
        &self.counts[base..base + self.num_states]
    }

    pub fn total_samples(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn p_hat(&self, h: usize, s: usize, a: usize) -> &[R] {
        let base =
            (((h - 1) * self.num_states + s) * self.num_actions + a) * self.num_states;
        &self.p_hat[base..base + self.num_states]
    }

    /// Materializes the estimate as an MDP carrying the given rewards.
    pub fn to_mdp(&self, rewards_from: &Mdp<R>) -> Result<Mdp<R>> {
        let mut rewards = Vec::with_capacity(self.horizon * self.num_states * self.num_actions);
        for h in 1..=self.horizon {
            for s in 0..self.num_states {
                for a in 0..self.num_actions {
                    rewards.push(rewards_from.reward(h, s, a));
                }
            }
        }
        Mdp::new(
            self.num_states,
            self.num_actions,
            self.horizon,
            rewards_from.initial_state(),
            self.p_hat.clone(),
            rewards,
            None,
        )
    }
}

/// Uniform exploration with a generative model: exactly
/// `n = floor(tau / (S A H))` draws from every triple, normalized to the
/// empirical frequency. Deterministic given the seed, with per-triple
/// derived streams so sampling order does not matter.
pub fn explore<R: Real, M: GenerativeModel<R>>(
    model: &M,
    budget_tau: u64,
    rng_seed: u64,
) -> Result<EmpiricalModel<R>> {
    let (s_count, a_count, horizon) = (model.num_states(), model.num_actions(), model.horizon());
    let triples = (s_count * a_count * horizon) as u64;
    let n = budget_tau / triples;
    if n == 0 {
        return Err(Error::BudgetTooSmall {
            tau: budget_tau,
            required: triples,
        });
    }

    let mut counts = vec![0u64; horizon * s_count * a_count * s_count];
    for h in 1..=horizon {
        for s in 0..s_count {
            for a in 0..a_count {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
                    rng_seed,
                    &[h as u64, s as u64, a as u64],
                ));
                let base = (((h - 1) * s_count + s) * a_count + a) * s_count;
                for _ in 0..n {
                    let s_next = model.draw(h, s, a, &mut rng);
                    counts[base + s_next] += 1;
                }
            }
        }
    }

    let p_hat = counts
        .iter()
        .map(|&cnt| c::<R>(cnt as f64) / c::<R>(n as f64))
        .collect();
    Ok(EmpiricalModel {
        num_states: s_count,
        num_actions: a_count,
        horizon,
        n_per_triple: n as usize,
        counts,
        p_hat,
    })
}
