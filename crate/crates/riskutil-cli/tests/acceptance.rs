//! Acceptance gate: one test per criterion, each printing a PASS line with
//! the measured quantities. Run with `--nocapture` to see them.

use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use riskutil::caty::{compatibility, compatibility_discretized, EnvSetup, ExpertSource, TransitionSource};
use riskutil::estimation::explore;
use riskutil::grid::{project_categorical, wasserstein1};
use riskutil::ident::{elicit_utility, self_play_oracle, transfer_diagnostic};
use riskutil::io;
use riskutil::mdp::RsMdp;
use riskutil::oracle::{
    best_markovian, best_stationary_deterministic, best_stationary_stochastic,
    brute_force_optimal, eval_stochastic_markovian, expert_coverage,
};
use riskutil::planner::{lift_policy, plan};
use riskutil::qp::exact_projection;
use riskutil::returns::{erd, DemoDataset};
use riskutil::tractor::{learn, GradientMode, StepSize, TractorConfig, ALPHA_RANDOM_SUITE, ALPHA_SURVEY};
use riskutil::utility::{project_polytope, ProjectionVariant};
use riskutil::zoo::{inject_noise, random_mdp, zoo, zoo_check, ZooId, ALL_ZOO_IDS, HISTORY_GAP_X};
use riskutil::{DiscretizedUtility, Grid, Utility};

/// Criterion 1: the grid planner and the independent exact oracle agree to
/// 1e-9 on every zoo environment and on 100 random MDPs, within 60 s.
#[test]
fn c01_oracle_equivalence() {
    let started = Instant::now();
    let mut checked = 0usize;

    for id in ALL_ZOO_IDS {
        let entry = zoo::<f64>(id).unwrap();
        let grid = entry.grid();
        for (_, utility) in &entry.utilities {
            let du = DiscretizedUtility::sample(utility, &grid).unwrap();
            let planned = plan(&du, &entry.mdp, &grid).unwrap();
            let rs = RsMdp::new(entry.mdp.clone(), utility.clone()).unwrap();
            let (j_oracle, _) = brute_force_optimal(&rs, &grid).unwrap();
            assert!(
                (planned.j_star - j_oracle).abs() <= 1e-9,
                "{id:?}: plan {} vs oracle {j_oracle}",
                planned.j_star
            );
            checked += 1;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for trial in 0..100u64 {
        let s = rng.gen_range(2..=5);
        let a = rng.gen_range(2..=3);
        let h = rng.gen_range(2..=4);
        let mdp = random_mdp::<f64>(s, a, h, rng.gen_range(1..=s), trial).unwrap();
        let grid = Grid::new(0.25, h).unwrap();
        let utility = match trial % 3 {
            0 => Utility::sqrt(h as f64),
            1 => Utility::square(h as f64),
            _ => Utility::s_shaped(h as f64, h as f64 / 2.0).unwrap(),
        };
        let du = DiscretizedUtility::sample(&utility, &grid).unwrap();
        let planned = plan(&du, &mdp, &grid).unwrap();
        let rs = RsMdp::new(mdp, utility).unwrap();
        let (j_oracle, _) = brute_force_optimal(&rs, &grid).unwrap();
        assert!(
            (planned.j_star - j_oracle).abs() <= 1e-9,
            "random trial {trial}: plan {} vs oracle {j_oracle}",
            planned.j_star
        );
        checked += 1;
    }

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 60, "took {elapsed:?}");
    println!(
        "criterion 01 PASS: planner == oracle on {checked} instances in {:.1?}",
        elapsed
    );
}

/// Criterion 2: the history-vs-Markovian gap on the seven-state instance
/// equals (x - x^2/3.99 - 0.1)/2 at x = 2.6 to 1e-6. A round gap of 0.5
/// would need x - x^2/3.99 - 0.1 = 1, which has no real solution, so the
/// formula value is the certified one.
#[test]
fn c02_history_gap() {
    let entry = zoo::<f64>(ZooId::HistoryGap).unwrap();
    let grid = entry.grid();
    let utility = entry.utilities[0].1.clone();
    let rs = RsMdp::new(entry.mdp.clone(), utility).unwrap();
    let (j_star, _) = brute_force_optimal(&rs, &grid).unwrap();
    let j_markov = best_markovian(&rs).unwrap();
    let gap = j_star - j_markov;
    let expected = 0.5 * (HISTORY_GAP_X - HISTORY_GAP_X * HISTORY_GAP_X / 3.99 - 0.1);
    assert!(
        (gap - expected).abs() <= 1e-6,
        "gap {gap} vs formula {expected}"
    );
    println!(
        "criterion 02 PASS: gap {gap:.10} matches formula {expected:.10} (0.5 not reproduced)"
    );
}

/// Criterion 3: on the stationary four-state instance, the best Markovian
/// policy is non-stationary, and the best stationary policy is stochastic.
#[test]
fn c03_two_rounds_qualitative() {
    let entry = zoo::<f64>(ZooId::TwoRounds).unwrap();
    let rs = RsMdp::new(entry.mdp.clone(), entry.utilities[0].1.clone()).unwrap();
    let non_stationary = best_markovian(&rs).unwrap();
    let stationary_det = best_stationary_deterministic(&rs).unwrap();
    let (stationary_mix, weights) = best_stationary_stochastic(&rs, 1000).unwrap();
    assert!(
        non_stationary > stationary_mix + 1e-9,
        "best Markovian {non_stationary} should beat stationary {stationary_mix}"
    );
    assert!(
        stationary_mix > stationary_det + 1e-9,
        "stationary optimum {stationary_mix} should be stochastic (deterministic {stationary_det})"
    );
    let mix = weights[0];
    assert!(
        mix > 1e-3 && mix < 1.0 - 1e-3,
        "optimal stationary mixing weight {mix} is degenerate"
    );
    println!(
        "criterion 03 PASS: non-stationary {non_stationary:.5} > stationary stochastic {stationary_mix:.5} (weight {mix:.3}) > stationary deterministic {stationary_det:.5}"
    );
}

/// Criterion 4: exact-model classification at threshold 0 agrees with the
/// analytic half-space U(1.5) <= 2/3 + (2/3) U(1) on 1000 random utilities,
/// and the region's corners are feasible.
#[test]
fn c04_branching_region() {
    let entry = zoo::<f64>(ZooId::Branching).unwrap();
    let grid = entry.grid();
    let expert = entry.expert.clone().unwrap();
    let setup = EnvSetup::exact(&entry.mdp, &expert);

    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let mut disagreements = 0usize;
    for _ in 0..1000 {
        let u1: f64 = rng.gen_range(0.0..=2.0);
        let u15: f64 = rng.gen_range(u1..=2.0);
        let utility =
            Utility::piecewise(vec![(1.0, u1), (1.5, u15)], 2.0, None).unwrap();
        let comp = compatibility(&utility, &setup, &grid).unwrap();
        let accepted = comp.c_hat <= 0.0 + 1e-9;
        let margin = 2.0 / 3.0 + 2.0 / 3.0 * u1 - u15; // >= 0 inside
        if accepted && margin < -1e-9 {
            disagreements += 1;
        }
        if !accepted && margin > 1e-9 {
            disagreements += 1;
        }
    }
    assert_eq!(disagreements, 0, "{disagreements} region disagreements");

    for (u1, u15) in [(0.0, 0.0), (0.0, 2.0 / 3.0), (2.0, 2.0)] {
        let utility = Utility::piecewise(vec![(1.0, u1), (1.5, u15)], 2.0, None).unwrap();
        let comp = compatibility(&utility, &setup, &grid).unwrap();
        assert!(
            comp.c_hat.abs() <= 1e-9,
            "corner ({u1}, {u15}) has compatibility {}",
            comp.c_hat
        );
    }
    println!("criterion 04 PASS: 1000 random utilities, zero disagreements; corners feasible");
}

/// Criterion 5: the transfer counterexample arithmetic reproduces to 1e-12.
#[test]
fn c05_transfer_goldens() {
    for (id, expected) in [
        (ZooId::DynamicsShift, [0.505, 0.597, 0.7475, 0.597]),
        (ZooId::RewardShift, [0.8, 0.81, 0.8, 0.72]),
    ] {
        let entry = zoo::<f64>(id).unwrap();
        let reports = zoo_check(&entry).unwrap();
        assert_eq!(reports.len(), 4);
        for (report, want) in reports.iter().zip(expected) {
            assert!(
                (report.actual - want).abs() <= 1e-12,
                "{id:?} {}: {} vs {want}",
                report.quantity,
                report.actual
            );
        }
    }
    println!("criterion 05 PASS: 0.505/0.597, 0.7475/0.597, 0.8/0.81, 0.8/0.72 at 1e-12");
}

/// Criterion 6: in the imitation counterexample, the mixture policy that
/// plays the sure-nothing arm with weight a = eps/0.1 is exactly 0.1 a
/// suboptimal under the first feasible utility and 1 + 0.099 a suboptimal
/// under the second.
#[test]
fn c06_imitation_trap() {
    let entry = zoo::<f64>(ZooId::ImitationTrap).unwrap();
    let grid = entry.grid();
    let u1 = entry.utility("u1").unwrap().clone();
    let u2 = entry.utility("u2").unwrap().clone();
    for eps in [0.01, 0.05, 0.1] {
        let alpha = eps / 0.1;
        for (utility, gap_formula) in
            [(&u1, 0.1 * alpha), (&u2, 1.0 + 0.099 * alpha)]
        {
            let rs = RsMdp::new(entry.mdp.clone(), utility.clone()).unwrap();
            let (j_star, _) = brute_force_optimal(&rs, &grid).unwrap();
            // play the third action w.p. alpha, the lottery arm otherwise
            let j_mix = eval_stochastic_markovian(&rs, |h, s, a| {
                if h == 1 && s == 0 {
                    match a {
                        2 => alpha,
                        1 => 1.0 - alpha,
                        _ => 0.0,
                    }
                } else if a == 0 {
                    1.0
                } else {
                    0.0
                }
            });
            let gap = j_star - j_mix;
            assert!(
                (gap - gap_formula).abs() <= 1e-12,
                "eps {eps}: gap {gap} vs {gap_formula}"
            );
        }
    }
    println!("criterion 06 PASS: suboptimality 0.1a and 1 + 0.099a exact for eps in {{0.01, 0.05, 0.1}}");
}

/// Criterion 7: the assessment distance between the two feasible utilities
/// of the sure-thing instance is exactly 1.
#[test]
fn c07_assessment_distance() {
    let entry = zoo::<f64>(ZooId::AssessmentGap).unwrap();
    let grid = entry.grid();
    let report = transfer_diagnostic(
        entry.utility("u1").unwrap(),
        entry.utility("u2").unwrap(),
        &entry.mdp,
        &grid,
    )
    .unwrap();
    assert!((report.d_all - 1.0).abs() <= 1e-12, "d_all {}", report.d_all);
    println!("criterion 07 PASS: assessment distance {}", report.d_all);
}

/// Criterion 8: the iterative projection matches the exact reference to
/// 1e-6 on 200 random inputs for d in 3..=6, and 1000 random cases satisfy
/// feasibility, idempotence, and non-expansiveness.
#[test]
fn c08_projection_correctness() {
    let mut rng = ChaCha8Rng::seed_from_u64(108);
    for trial in 0..200 {
        let d = rng.gen_range(3..=6);
        let h = d - 1;
        let grid = Grid::new(1.0, h).unwrap();
        let l: f64 = [1.5, 2.0, 4.0, 8.0][rng.gen_range(0..4)];
        let v: Vec<f64> = (0..d)
            .map(|_| rng.gen_range(-2.0..(h as f64 + 2.0)))
            .collect();
        let fast = project_polytope(&v, &grid, l, ProjectionVariant::StrictBoundary).unwrap();
        let exact = exact_projection(&v, &grid, l).unwrap();
        let dist: f64 = fast
            .values()
            .iter()
            .zip(&exact)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        assert!(dist <= 1e-6, "trial {trial}: distance {dist:.2e}");
    }

    for trial in 0..1000 {
        let h = rng.gen_range(1..=4);
        let eps = [0.5, 0.25][rng.gen_range(0..2)];
        let grid = Grid::new(eps, h).unwrap();
        let d = grid.d();
        let l = rng.gen_range(1.0f64..8.0);
        if l * (d as f64 - 1.0) * eps < h as f64 {
            continue;
        }
        let a: Vec<f64> = (0..d).map(|_| rng.gen_range(-3.0..8.0)).collect();
        let b: Vec<f64> = (0..d).map(|_| rng.gen_range(-3.0..8.0)).collect();
        let pa = project_polytope(&a, &grid, l, ProjectionVariant::StrictBoundary).unwrap();
        let pb = project_polytope(&b, &grid, l, ProjectionVariant::StrictBoundary).unwrap();
        assert!(pa.constraint_violation(Some(l)) <= 1e-8, "trial {trial}");
        let ppa =
            project_polytope(pa.values(), &grid, l, ProjectionVariant::StrictBoundary).unwrap();
        for (x, y) in pa.values().iter().zip(ppa.values()) {
            assert!((x - y).abs() <= 1e-7, "not idempotent at trial {trial}");
        }
        let din: f64 = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        let dout: f64 = pa
            .values()
            .iter()
            .zip(pb.values())
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt();
        assert!(dout <= din + 1e-7, "expansive at trial {trial}");
    }
    println!("criterion 08 PASS: 200 oracle agreements at 1e-6, 1000 property cases");
}

/// Criterion 9: categorical projection conserves mass to 1e-9 and stays
/// within sqrt(2 H eps) in Wasserstein distance on 500 random
/// distributions; the return-distribution estimator is unbiased within
/// three standard errors over 1000 resampled datasets.
#[test]
fn c09_categorical_projection_and_erd() {
    let mut rng = ChaCha8Rng::seed_from_u64(109);
    for _ in 0..500 {
        let h = rng.gen_range(1..=5);
        let eps = [0.5, 0.25, 0.1, 0.05][rng.gen_range(0..4)];
        let grid = Grid::new(eps, h).unwrap();
        let n = rng.gen_range(1..=12);
        let mut weights: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() + 1e-3).collect();
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        let atoms: Vec<(f64, f64)> = weights
            .into_iter()
            .map(|w| (rng.gen::<f64>() * h as f64, w))
            .collect();
        let projected = project_categorical(&atoms, &grid).unwrap();
        let mass: f64 = projected.weights().iter().sum();
        assert!((mass - 1.0).abs() <= 1e-9);

        let fine = Grid::new(1e-4, h).unwrap();
        let a_fine = project_categorical(&atoms, &fine).unwrap();
        let p_atoms: Vec<(f64, f64)> = projected
            .grid()
            .points()
            .iter()
            .zip(projected.weights())
            .map(|(&y, &w)| (y, w))
            .collect();
        let p_fine = project_categorical(&p_atoms, &fine).unwrap();
        let w1 = wasserstein1(&a_fine, &p_fine).unwrap();
        let bound = (2.0 * h as f64 * eps).sqrt();
        assert!(w1 <= bound + 2e-4, "w1 {w1} vs bound {bound}");
    }

    // Unbiasedness of the estimator around the projected exact distribution.
    let entry = zoo::<f64>(ZooId::Branching).unwrap();
    let grid = entry.grid();
    let expert = entry.expert.clone().unwrap();
    let utility = DiscretizedUtility::sample(entry.utility("sample").unwrap(), &grid).unwrap();
    let (_, atoms) = expert_coverage(&entry.mdp, &expert).unwrap();
    let target = project_categorical(&atoms, &grid)
        .unwrap()
        .dot(utility.values());

    let resamples = 1000;
    let per_dataset = 40;
    let mut values = Vec::with_capacity(resamples);
    for i in 0..resamples {
        let trajs: Vec<_> = (0..per_dataset)
            .map(|j| {
                riskutil::mdp::simulate(&entry.mdp, &expert, (i * per_dataset + j) as u64).unwrap()
            })
            .collect();
        let demos = DemoDataset::new(0, trajs);
        let eta = erd(&demos, &entry.mdp, &grid).unwrap();
        values.push(eta.dot(utility.values()));
    }
    let mean: f64 = values.iter().sum::<f64>() / resamples as f64;
    let var: f64 =
        values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (resamples - 1) as f64;
    let se = (var / resamples as f64).sqrt();
    assert!(
        (mean - target).abs() <= 3.0 * se,
        "mean {mean} vs target {target} (3 SE = {})",
        3.0 * se
    );
    println!(
        "criterion 09 PASS: mass/Wasserstein bounds on 500 cases; estimator bias {:.2e} within 3 SE {:.2e}",
        (mean - target).abs(),
        3.0 * se
    );
}

fn spearman_rho(values: &[f64]) -> f64 {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).unwrap());
    let mut rank = vec![0.0f64; n];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r as f64;
    }
    let mean_t = (n as f64 - 1.0) / 2.0;
    let mut num = 0.0;
    let mut dt = 0.0;
    let mut dr = 0.0;
    for (t, &r) in rank.iter().enumerate() {
        let a = t as f64 - mean_t;
        let b = r - mean_t;
        num += a * b;
        dt += a * a;
        dr += b * b;
    }
    num / (dt.sqrt() * dr.sqrt())
}

/// Criterion 10a: on the survey environment with a synthetic risk-averse
/// expert (exact model, K = 1e4, L = 10, T = 70, step size 100) the learner
/// reaches summed compatibility <= 0.05 in at least 4 of 5 seeds, each run
/// under 5 minutes.
#[test]
fn c10a_tractor_survey() {
    let entry = zoo::<f64>(ZooId::Survey).unwrap();
    let grid = entry.grid();
    let target = DiscretizedUtility::sample(entry.utility("sqrt").unwrap(), &grid).unwrap();
    let planned = plan(&target, &entry.mdp, &grid).unwrap();
    let expert = lift_policy(&planned.policy, &entry.mdp, &grid);
    let setup = EnvSetup::exact(&entry.mdp, &expert);

    let mut successes = 0;
    for seed in 0..5u64 {
        let started = Instant::now();
        let config = TractorConfig {
            t_iters: 70,
            k_rollouts: 10_000,
            alpha: StepSize::Fixed(ALPHA_SURVEY),
            u0: DiscretizedUtility::sample(&Utility::linear(5.0), &grid).unwrap(),
            lipschitz: 10.0,
            seed,
            gradient_mode: GradientMode::Rollout,
        };
        let record = learn(&[setup], &grid, &config).unwrap();
        let final_compat = compatibility_discretized(&record.average, &setup, &grid)
            .unwrap()
            .c_hat;
        let elapsed = started.elapsed();
        assert!(elapsed.as_secs() < 300, "run took {elapsed:?}");
        println!("  survey seed {seed}: final compatibility {final_compat:.4} in {elapsed:.1?}");
        if final_compat <= 0.05 {
            successes += 1;
        }
    }
    assert!(successes >= 4, "only {successes}/5 seeds reached 0.05");
    println!("criterion 10a PASS: {successes}/5 seeds reached compatibility 0.05");
}

/// Criterion 10b: on random 20-state, 5-action environments with a noisy
/// synthetic expert (optimal for an S-shaped utility, 5% uniform action
/// noise) at step size 1, the per-iteration compatibility decreases
/// monotonically on average (Spearman rho < -0.8 on the seed-averaged
/// curve) and ends below 0.1.
#[test]
fn c10b_tractor_random_suite() {
    let h = 5usize;
    let grid = Grid::new(0.25, h).unwrap();
    let t_iters = 70;
    let seeds = 5u64;
    let mut avg_curve = vec![0.0f64; t_iters];
    for seed in 0..seeds {
        let mdp = random_mdp::<f64>(20, 5, h, 4, 7000 + seed).unwrap();
        let target = DiscretizedUtility::sample(
            &Utility::s_shaped(h as f64, h as f64 / 2.0).unwrap(),
            &grid,
        )
        .unwrap();
        let planned = plan(&target, &mdp, &grid).unwrap();
        let expert = lift_policy(&planned.policy, &mdp, &grid);
        let noisy = inject_noise(&expert, 5, 0.05, 9000 + seed);
        let setup = EnvSetup::exact(&mdp, &noisy);
        let started = Instant::now();
        let config = TractorConfig {
            t_iters,
            k_rollouts: 10_000,
            alpha: StepSize::Fixed(ALPHA_RANDOM_SUITE),
            u0: DiscretizedUtility::sample(&Utility::linear(h as f64), &grid).unwrap(),
            lipschitz: 10.0,
            seed,
            gradient_mode: GradientMode::Rollout,
        };
        let record = learn(&[setup], &grid, &config).unwrap();
        let elapsed = started.elapsed();
        assert!(elapsed.as_secs() < 300, "run took {elapsed:?}");
        for (acc, &v) in avg_curve.iter_mut().zip(&record.sum_compat) {
            *acc += v / seeds as f64;
        }
    }
    let rho = spearman_rho(&avg_curve);
    let last = *avg_curve.last().unwrap();
    assert!(rho < -0.8, "Spearman rho {rho}");
    assert!(last <= 0.1, "final averaged compatibility {last}");
    println!("criterion 10b PASS: Spearman rho {rho:.3}, final averaged compatibility {last:.4}");
}

/// Criterion 11: the estimated-compatibility error against the exact value
/// decreases monotonically in both the exploration budget and the number of
/// demonstrations, averaged over 50 seeds on a fixed random MDP.
#[test]
fn c11_estimation_error_scaling() {
    let h = 3usize;
    let mdp = random_mdp::<f64>(5, 2, h, 3, 1111).unwrap();
    let grid = Grid::new(0.25, h).unwrap();
    let agent = Utility::sqrt(h as f64);
    let du = DiscretizedUtility::sample(&agent, &grid).unwrap();
    let planned = plan(&du, &mdp, &grid).unwrap();
    let expert = lift_policy(&planned.policy, &mdp, &grid);

    // exact reference: a slightly risk-seeking candidate utility
    let candidate = Utility::square(h as f64);
    let exact_setup = EnvSetup::exact(&mdp, &expert);
    let exact_c = compatibility(&candidate, &exact_setup, &grid).unwrap().c_hat;

    let seeds = 50u64;
    let budgets = [1_000u64, 10_000, 100_000];

    // sweep the exploration budget with the exact expert distribution
    let mut tau_err = [0.0f64; 3];
    for seed in 0..seeds {
        for (i, &tau) in budgets.iter().enumerate() {
            let model = explore(&mdp, tau, 900 + seed * 7 + i as u64).unwrap();
            let setup = EnvSetup {
                env: &mdp,
                expert: ExpertSource::ExactPolicy(&expert),
                transitions: TransitionSource::Empirical(&model),
            };
            let c = compatibility(&candidate, &setup, &grid).unwrap().c_hat;
            tau_err[i] += (c - exact_c).abs() / seeds as f64;
        }
    }
    assert!(
        tau_err[0] > tau_err[1] && tau_err[1] > tau_err[2],
        "exploration sweep not monotone: {tau_err:?}"
    );

    // sweep the number of demonstrated trajectories with exact transitions
    let mut demo_err = [0.0f64; 3];
    for seed in 0..seeds {
        for (i, &count) in budgets.iter().enumerate() {
            let trajs: Vec<_> = (0..count)
                .map(|j| {
                    riskutil::mdp::simulate(
                        &mdp,
                        &expert,
                        riskutil::scalar::derive_seed(3000 + seed, &[i as u64, j]),
                    )
                    .unwrap()
                })
                .collect();
            let demos = DemoDataset::new(0, trajs);
            let setup = EnvSetup {
                env: &mdp,
                expert: ExpertSource::Demos(&demos),
                transitions: TransitionSource::Exact,
            };
            let c = compatibility(&candidate, &setup, &grid).unwrap().c_hat;
            demo_err[i] += (c - exact_c).abs() / seeds as f64;
        }
    }
    assert!(
        demo_err[0] > demo_err[1] && demo_err[1] > demo_err[2],
        "demonstration sweep not monotone: {demo_err:?}"
    );
    println!(
        "criterion 11 PASS: exploration errors {tau_err:?}, demonstration errors {demo_err:?}"
    );
}

/// Criterion 12: elicitation recovers the linear utility exactly and the
/// square-root utility to 1e-3 at search tolerance 1e-4 on a 20-point
/// return grid, with anchor error scaling linearly in the tolerance across
/// three decades.
#[test]
fn c12_elicitation() {
    let h = 5usize;
    let targets: Vec<f64> = (1..20).map(|k| k as f64 * h as f64 / 20.0).collect();

    let mut oracle = self_play_oracle(Utility::linear(h as f64));
    let anchors = elicit_utility(&mut oracle, h, &targets, 1e-4).unwrap();
    for (x, u) in &anchors {
        assert!((u - x).abs() <= 1e-12, "linear recovery U({x}) = {u}");
    }

    let sqrt_err = |qtol: f64| -> f64 {
        let mut oracle = self_play_oracle(Utility::sqrt(h as f64));
        let anchors = elicit_utility(&mut oracle, h, &targets, qtol).unwrap();
        anchors
            .iter()
            .map(|&(x, u)| (u - (h as f64 * x).sqrt()).abs())
            .fold(0.0, f64::max)
    };
    let errs: Vec<f64> = [1e-2, 1e-3, 1e-4].iter().map(|&q| sqrt_err(q)).collect();
    assert!(errs[2] <= 1e-3, "sqrt anchors off by {}", errs[2]);
    for (i, &qtol) in [1e-2, 1e-3, 1e-4].iter().enumerate() {
        assert!(
            errs[i] <= 20.0 * qtol,
            "error {} above the linear envelope at tolerance {qtol}",
            errs[i]
        );
    }
    assert!(
        errs[0] >= errs[1] && errs[1] >= errs[2],
        "errors not decreasing across decades: {errs:?}"
    );
    println!("criterion 12 PASS: linear exact; sqrt errors {errs:?} across tolerances");
}

/// Criterion 13: equal seeds give byte-identical CSV outputs for the learn
/// and classify commands.
#[test]
fn c13_reproducibility() {
    let bin = env!("CARGO_BIN_EXE_riskutil");
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();

    // inputs: the four-state example environment, sampled expert demos
    let entry = zoo::<f64>(ZooId::Branching).unwrap();
    let env_path = dir.join("env.json");
    io::save_mdp(&entry.mdp, &env_path).unwrap();
    let expert = entry.expert.clone().unwrap();
    let trajs: Vec<_> = (0..200)
        .map(|i| riskutil::mdp::simulate(&entry.mdp, &expert, i).unwrap())
        .collect();
    let demos_path = dir.join("demos.json");
    io::save_trajectories(&DemoDataset::new(0, trajs), &demos_path).unwrap();
    let util_path = dir.join("utility.json");
    io::save_utility(entry.utility("sample").unwrap(), &util_path).unwrap();

    let run_learn = |tag: &str| -> Vec<u8> {
        let curve = dir.join(format!("curve_{tag}.csv"));
        let status = Command::new(bin)
            .args([
                "learn",
                "--env",
                env_path.to_str().unwrap(),
                "--demos",
                demos_path.to_str().unwrap(),
                "--T",
                "10",
                "--K",
                "200",
                "--alpha",
                "5",
                "--L",
                "8",
                "--epsilon0",
                "0.5",
                "--seed",
                "42",
                "--exact",
                "--out-utility",
                dir.join(format!("learned_{tag}.json")).to_str().unwrap(),
                "--out-curve",
                curve.to_str().unwrap(),
            ])
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read(curve).unwrap()
    };
    assert_eq!(run_learn("a"), run_learn("b"), "learn curves differ");

    let run_classify = |tag: &str| -> Vec<u8> {
        let out = dir.join(format!("report_{tag}.csv"));
        let status = Command::new(bin)
            .args([
                "classify",
                "--env",
                env_path.to_str().unwrap(),
                "--demos",
                demos_path.to_str().unwrap(),
                "--utility",
                util_path.to_str().unwrap(),
                "--delta",
                "0.1",
                "--tau",
                "5000",
                "--seed",
                "7",
                "--epsilon0",
                "0.5",
                "--out",
                out.to_str().unwrap(),
            ])
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read(out).unwrap()
    };
    assert_eq!(run_classify("a"), run_classify("b"), "classify reports differ");
    println!("criterion 13 PASS: byte-identical learn and classify outputs for equal seeds");
}

/// Every zoo golden value reproduces at load-check time (supports several
/// criteria and the `zoo --check` command).
#[test]
fn zoo_goldens_all_pass() {
    for id in ALL_ZOO_IDS {
        let entry = zoo::<f64>(id).unwrap();
        for report in zoo_check(&entry).unwrap() {
            assert!(
                report.pass,
                "{id:?} / {}: expected {} got {}",
                id.name(),
                report.expected,
                report.actual
            );
        }
    }
    println!("zoo goldens PASS");
}

// A couple of surface checks for the CLI beyond the criteria.

#[test]
fn cli_plan_prints_the_derived_value() {
    let bin = env!("CARGO_BIN_EXE_riskutil");
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();
    let entry = zoo::<f64>(ZooId::Branching).unwrap();
    let env_path = dir.join("env.json");
    io::save_mdp(&entry.mdp, &env_path).unwrap();
    let util_path = dir.join("utility.json");
    io::save_utility(entry.utility("sample").unwrap(), &util_path).unwrap();
    let output = Command::new(bin)
        .args([
            "plan",
            "--env",
            env_path.to_str().unwrap(),
            "--utility",
            util_path.to_str().unwrap(),
            "--epsilon0",
            "0.5",
        ])
        .output()
        .unwrap();
    assert!(output.status.success());
    let printed: f64 = String::from_utf8_lossy(&output.stdout).trim().parse().unwrap();
    assert!((printed - 0.59).abs() <= 1e-9);
}

#[test]
fn cli_bad_schema_exits_with_input_error() {
    let bin = env!("CARGO_BIN_EXE_riskutil");
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"S\": 3}").unwrap();
    let output = Command::new(bin)
        .args([
            "plan",
            "--env",
            bad.to_str().unwrap(),
            "--utility",
            bad.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn cli_unknown_zoo_id_is_an_input_error() {
    let bin = env!("CARGO_BIN_EXE_riskutil");
    let output = Command::new(bin)
        .args(["zoo", "--export", "nope", "--out", "/tmp/unused.json"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
}

/// Exploration budgets below one sample per triple exit with the budget
/// code.
#[test]
fn cli_budget_error_code() {
    let bin = env!("CARGO_BIN_EXE_riskutil");
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();
    let entry = zoo::<f64>(ZooId::Branching).unwrap();
    let env_path = dir.join("env.json");
    io::save_mdp(&entry.mdp, &env_path).unwrap();
    let expert = entry.expert.clone().unwrap();
    let trajs: Vec<_> = (0..5)
        .map(|i| riskutil::mdp::simulate(&entry.mdp, &expert, i).unwrap())
        .collect();
    let demos_path = dir.join("demos.json");
    io::save_trajectories(&DemoDataset::new(0, trajs), &demos_path).unwrap();
    let util_path = dir.join("utility.json");
    io::save_utility(entry.utility("sample").unwrap(), &util_path).unwrap();
    let output = Command::new(bin)
        .args([
            "classify",
            "--env",
            env_path.to_str().unwrap(),
            "--demos",
            demos_path.to_str().unwrap(),
            "--utility",
            util_path.to_str().unwrap(),
            "--delta",
            "0",
            "--tau",
            "3",
            "--epsilon0",
            "0.5",
        ])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(4));
}
