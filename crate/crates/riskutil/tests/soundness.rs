//! Desk-scale soundness of the classifier: utilities with a clear analytic
//! margin around the threshold are classified correctly under finite data
//! in almost every seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use riskutil::caty::{compatibility, EnvSetup, ExpertSource, TransitionSource};
use riskutil::estimation::explore;
use riskutil::mdp::Mdp;
use riskutil::planner::{lift_policy, plan};
use riskutil::returns::DemoDataset;
use riskutil::scalar::derive_seed;
use riskutil::{DiscretizedUtility, Grid, Utility};

/// Ten-state MDP with a lottery core - a safe medium-reward chain against a
/// high-variance arm - plus randomized filler states, so that risk attitude
/// genuinely separates candidate utilities.
fn lottery_mdp(seed: u64) -> Mdp<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (s_count, a_count, horizon) = (10usize, 2usize, 3usize);
    let mut p = vec![0.0f64; horizon * s_count * a_count * s_count];
    let mut r = vec![0.0f64; horizon * s_count * a_count];
    // Lottery odds in [0.82, 0.86]: high enough that a risk-neutral agent
    // takes the gamble (2 q > 1.5), low enough that the square-root agent
    // stays safe (q sqrt(6) < sqrt(4.5) up to q = 0.866).
    let q: f64 = 0.82 + 0.01 * rng.gen_range(0..=4) as f64;
    for h in 0..horizon {
        let mut set_row = |s: usize, a: usize, row: &[(usize, f64)], rew: f64| {
            let base = ((h * s_count + s) * a_count + a) * s_count;
            for &(s_next, prob) in row {
                p[base + s_next] = prob;
            }
            r[(h * s_count + s) * a_count + a] = rew;
        };
        // safe chain: 0.5 per stage; risky arm: all-or-nothing 1.0 chain
        set_row(0, 0, &[(1, 1.0)], 0.5);
        set_row(0, 1, &[(2, q), (3, 1.0 - q)], 0.0);
        for a in 0..2 {
            set_row(1, a, &[(1, 1.0)], 0.5);
            set_row(2, a, &[(2, 1.0)], 1.0);
            set_row(3, a, &[(3, 1.0)], 0.0);
        }
        // filler states with random dynamics among themselves
        for s in 4..10 {
            for a in 0..2 {
                let t1 = rng.gen_range(4..10);
                let t2 = rng.gen_range(4..10);
                let w: f64 = rng.gen_range(1..=9) as f64 / 10.0;
                let row: Vec<(usize, f64)> = if t1 == t2 {
                    vec![(t1, 1.0)]
                } else {
                    vec![(t1, w), (t2, 1.0 - w)]
                };
                set_row(s, a, &row, rng.gen_range(0..=4) as f64 * 0.25);
            }
        }
    }
    Mdp::new(s_count, a_count, horizon, 0, p, r, None).unwrap()
}

#[test]
fn classification_respects_clear_margins() {
    let h = 3usize;
    let mdp = lottery_mdp(2024);
    let grid = Grid::new(0.25, h).unwrap();

    // expert optimal for the square-root utility (takes the safe chain)
    let agent = Utility::sqrt(h as f64);
    let du = DiscretizedUtility::sample(&agent, &grid).unwrap();
    let planned = plan(&du, &mdp, &grid).unwrap();
    let expert = lift_policy(&planned.policy, &mdp, &grid);

    let candidates = vec![
        Utility::sqrt(h as f64),
        Utility::linear(h as f64),
        Utility::square(h as f64),
    ];
    let exact_setup = EnvSetup::exact(&mdp, &expert);
    let exact: Vec<f64> = candidates
        .iter()
        .map(|u| compatibility(u, &exact_setup, &grid).unwrap().c_hat)
        .collect();

    // threshold halfway between the feasible candidate and the nearest
    // incompatible one, demanding a clear eps margin on both sides
    let eps = 0.05;
    let smallest_positive = exact
        .iter()
        .cloned()
        .filter(|&c| c > 1e-6)
        .fold(f64::INFINITY, f64::min);
    let delta = smallest_positive / 2.0;
    let clear: Vec<usize> = (0..candidates.len())
        .filter(|&i| exact[i] <= delta - eps || exact[i] >= delta + eps)
        .collect();
    assert_eq!(
        clear.len(),
        candidates.len(),
        "margin assumption broken: compatibilities {exact:?}, delta {delta}"
    );
    assert!(exact.iter().any(|&c| c <= delta - eps));
    assert!(exact.iter().any(|&c| c >= delta + eps));

    let tau = 100_000u64;
    let seeds = 100u64;
    let mut correct_runs = 0;
    for seed in 0..seeds {
        let model = explore(&mdp, tau, derive_seed(seed, &[1])).unwrap();
        let trajs: Vec<_> = (0..tau)
            .map(|j| {
                riskutil::mdp::simulate(&mdp, &expert, derive_seed(seed, &[2, j])).unwrap()
            })
            .collect();
        let demos = DemoDataset::new(0, trajs);
        let setup = EnvSetup {
            env: &mdp,
            expert: ExpertSource::Demos(&demos),
            transitions: TransitionSource::Empirical(&model),
        };
        let all_right = clear.iter().all(|&i| {
            let c_hat = compatibility(&candidates[i], &setup, &grid).unwrap().c_hat;
            (c_hat <= delta) == (exact[i] <= delta - eps)
        });
        if all_right {
            correct_runs += 1;
        }
    }
    assert!(
        correct_runs >= 95,
        "only {correct_runs}/100 seeds classified the clear-margin utilities correctly"
    );
}
