//! Command-line surface: planning, utility classification, utility
//! learning, elicitation, and the benchmark zoo.

mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use manifest::ManifestBuilder;
use riskutil::caty::{classify, EnvSetup, ExpertSource, TransitionSource};
use riskutil::error::Error;
use riskutil::estimation::{explore, EmpiricalModel};
use riskutil::ident::{elicit_utility, self_play_oracle};
use riskutil::io;
use riskutil::planner::plan;
use riskutil::scalar::derive_seed;
use riskutil::tractor::{learn, GradientMode, StepSize, TractorConfig};
use riskutil::utility::{BuiltinUtility, builtin_utility};
use riskutil::zoo::{zoo, zoo_check, ZooId, ALL_ZOO_IDS};
use riskutil::{DiscretizedUtility, Grid, Mdp, Utility};

#[derive(Parser)]
#[command(name = "riskutil", about = "Risk-sensitive utility learning in tabular MDPs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan an optimal policy for a utility and print its value.
    Plan(PlanArgs),
    /// Score and classify candidate utilities against demonstrations.
    Classify(ClassifyArgs),
    /// Learn a utility by projected gradient descent.
    Learn(LearnArgs),
    /// Recover a simulated agent's utility from designed environments.
    Elicit(ElicitArgs),
    /// List, check, or export the built-in benchmark environments.
    Zoo(ZooArgs),
}

#[derive(Args)]
struct PlanArgs {
    /// Environment file (JSON).
    #[arg(long)]
    env: PathBuf,
    /// Utility file (JSON anchors).
    #[arg(long)]
    utility: PathBuf,
    /// Grid step of the return discretization.
    #[arg(long, default_value_t = 0.1)]
    epsilon0: f64,
    /// Where to write the planned policy.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ClassifyArgs {
    /// Environment files, one per demonstration set.
    #[arg(long, required = true)]
    env: Vec<PathBuf>,
    /// Demonstration files, aligned with the environments.
    #[arg(long, required = true)]
    demos: Vec<PathBuf>,
    /// Candidate utility files.
    #[arg(long, required = true)]
    utility: Vec<PathBuf>,
    /// Acceptance threshold on the summed compatibility.
    #[arg(long)]
    delta: f64,
    /// Use the true transition models instead of exploring.
    #[arg(long)]
    exact: bool,
    /// Exploration budget per environment (generative-model samples).
    #[arg(long)]
    tau: Option<u64>,
    #[arg(long, default_value_t = 0.1)]
    epsilon0: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Report the relative gap as a rounded percentage.
    #[arg(long)]
    percent: bool,
    /// Output CSV (one row per utility and environment).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LearnArgs {
    #[arg(long, required = true)]
    env: Vec<PathBuf>,
    #[arg(long, required = true)]
    demos: Vec<PathBuf>,
    /// Gradient iterations.
    #[arg(long = "T", default_value_t = 70)]
    t_iters: usize,
    /// Rollout episodes per environment per iteration.
    #[arg(long = "K", default_value_t = 10_000)]
    k_rollouts: usize,
    /// Step sizes; several values produce one curve file per value.
    #[arg(long, required = true)]
    alpha: Vec<f64>,
    /// Lipschitz bound of the utility polytope.
    #[arg(long = "L", default_value_t = 10.0)]
    lipschitz: f64,
    #[arg(long, default_value_t = 0.1)]
    epsilon0: f64,
    /// Initial utility: linear, sqrt, square, or a utility file.
    #[arg(long, default_value = "linear")]
    init: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Use the true transition models instead of exploring.
    #[arg(long)]
    exact: bool,
    /// Exploration budget per environment.
    #[arg(long)]
    tau: Option<u64>,
    /// Where to write the learned utility.
    #[arg(long)]
    out_utility: PathBuf,
    /// Where to write the learning curve CSV.
    #[arg(long)]
    out_curve: PathBuf,
}

#[derive(Args)]
struct ElicitArgs {
    /// Target returns to recover, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    targets: Vec<f64>,
    /// Indifference-search tolerance on the mixing weight.
    #[arg(long, default_value_t = 1e-4)]
    qtol: f64,
    /// Simulated agent utility: linear, sqrt, square, or a utility file.
    #[arg(long)]
    utility: String,
    #[arg(long, default_value_t = 5)]
    horizon: usize,
    /// Where to write the recovered anchors (utility file).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ZooArgs {
    /// List the available environments.
    #[arg(long)]
    list: bool,
    /// Re-derive golden values for one id or "all".
    #[arg(long)]
    check: Option<String>,
    /// Export one environment as an MDP file.
    #[arg(long)]
    export: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Plan(args) => cmd_plan(args),
        Command::Classify(args) => cmd_classify(args),
        Command::Learn(args) => cmd_learn(args),
        Command::Elicit(args) => cmd_elicit(args),
        Command::Zoo(args) => cmd_zoo(args),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_of(&err))
        }
    }
}

fn exit_code_of(err: &Error) -> u8 {
    match err {
        Error::Infeasible(_) => 3,
        Error::BudgetTooSmall { .. }
        | Error::ExactCapExceeded(_)
        | Error::EnumerationCapExceeded(_) => 4,
        _ => 2,
    }
}

fn named_or_file_utility(spec: &str, horizon: f64) -> Result<Utility, Error> {
    match spec {
        "linear" => builtin_utility(BuiltinUtility::Linear, horizon),
        "sqrt" => builtin_utility(BuiltinUtility::Sqrt, horizon),
        "square" => builtin_utility(BuiltinUtility::Square, horizon),
        "s_shaped" => builtin_utility(BuiltinUtility::SShaped(horizon / 2.0), horizon),
        path => io::load_utility(Path::new(path)),
    }
}

fn load_envs(paths: &[PathBuf], mb: &mut ManifestBuilder) -> Result<Vec<Mdp>, Error> {
    let mut envs = Vec::with_capacity(paths.len());
    for path in paths {
        mb.input(path)?;
        envs.push(io::load_mdp(path)?);
    }
    let horizon = envs[0].horizon();
    if envs.iter().any(|e| e.horizon() != horizon) {
        return Err(Error::MismatchedLengths(
            "environments must share the horizon".into(),
        ));
    }
    Ok(envs)
}

fn cmd_plan(args: PlanArgs) -> Result<ExitCode, Error> {
    let mut mb = ManifestBuilder::new(
        "plan",
        serde_json::json!({ "epsilon0": args.epsilon0 }),
        None,
    );
    mb.input(&args.env)?;
    mb.input(&args.utility)?;
    let mdp = io::load_mdp(&args.env)?;
    let utility = io::load_utility(&args.utility)?;
    let grid = Grid::new(args.epsilon0, mdp.horizon())?;
    let discretized = DiscretizedUtility::sample(&utility, &grid)?;
    let out = plan(&discretized, &mdp, &grid)?;
    println!("{}", out.j_star);
    if let Some(path) = &args.out {
        io::save_policy(&out.policy, path)?;
        mb.output(path);
    }
    mb.write(None)?;
    Ok(ExitCode::SUCCESS)
}

/// Formats one float for CSV output (shortest round-trip representation).
fn fmt(x: f64) -> String {
    format!("{x}")
}

fn explore_models(
    envs: &[Mdp],
    tau: u64,
    seed: u64,
) -> Result<Vec<EmpiricalModel<f64>>, Error> {
    envs.iter()
        .enumerate()
        .map(|(i, env)| explore(env, tau, derive_seed(seed, &[i as u64])))
        .collect()
}

fn cmd_classify(args: ClassifyArgs) -> Result<ExitCode, Error> {
    if args.env.len() != args.demos.len() {
        return Err(Error::MismatchedLengths(format!(
            "{} environments vs {} demonstration files",
            args.env.len(),
            args.demos.len()
        )));
    }
    if args.exact == args.tau.is_some() {
        return Err(Error::MismatchedLengths(
            "pass exactly one of --exact and --tau".into(),
        ));
    }
    let mut mb = ManifestBuilder::new(
        "classify",
        serde_json::json!({
            "delta": args.delta,
            "epsilon0": args.epsilon0,
            "exact": args.exact,
            "tau": args.tau,
        }),
        Some(args.seed),
    );
    let envs = load_envs(&args.env, &mut mb)?;
    let mut demos = Vec::with_capacity(args.demos.len());
    for (i, path) in args.demos.iter().enumerate() {
        mb.input(path)?;
        let dataset = io::load_trajectories(path, i)?;
        dataset.validate(&envs[i])?;
        demos.push(dataset);
    }
    let mut utilities = Vec::with_capacity(args.utility.len());
    for path in &args.utility {
        mb.input(path)?;
        utilities.push(io::load_utility(path)?);
    }

    let grid = Grid::new(args.epsilon0, envs[0].horizon())?;
    let models = match args.tau {
        Some(tau) => Some(explore_models(&envs, tau, args.seed)?),
        None => None,
    };
    let setups: Vec<EnvSetup<'_, f64>> = envs
        .iter()
        .enumerate()
        .map(|(i, env)| EnvSetup {
            env,
            expert: ExpertSource::Demos(&demos[i]),
            transitions: match &models {
                Some(models) => TransitionSource::Empirical(&models[i]),
                None => TransitionSource::Exact,
            },
        })
        .collect();

    let reports = classify(&utilities, &setups, args.delta, &grid)?;
    let mut csv = String::from("utility_id,env_id,J_E,J_star,C,C_rel,accepted\n");
    for (u_idx, report) in reports.iter().enumerate() {
        let utility_id = args.utility[u_idx]
            .file_stem()
            .map(|s| s.to_string_lossy().to_string())
            .unwrap_or_else(|| u_idx.to_string());
        for (e_idx, comp) in report.per_env.iter().enumerate() {
            let rel = if comp.j_star > 1e-9 {
                let ratio = comp.c_hat / comp.j_star;
                if args.percent {
                    format!("{}", (ratio * 100.0).round())
                } else {
                    fmt(ratio)
                }
            } else {
                String::new()
            };
            csv.push_str(&format!(
                "{utility_id},{e_idx},{},{},{},{rel},{}\n",
                fmt(comp.j_expert),
                fmt(comp.j_star),
                fmt(comp.c_hat),
                report.accepted,
            ));
        }
    }
    match &args.out {
        Some(path) => {
            std::fs::write(path, csv)?;
            mb.output(path);
            mb.write(None)?;
        }
        None => print!("{csv}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_learn(args: LearnArgs) -> Result<ExitCode, Error> {
    if args.env.len() != args.demos.len() {
        return Err(Error::MismatchedLengths(format!(
            "{} environments vs {} demonstration files",
            args.env.len(),
            args.demos.len()
        )));
    }
    if args.exact == args.tau.is_some() {
        return Err(Error::MismatchedLengths(
            "pass exactly one of --exact and --tau".into(),
        ));
    }
    let mut mb = ManifestBuilder::new(
        "learn",
        serde_json::json!({
            "T": args.t_iters,
            "K": args.k_rollouts,
            "alpha": args.alpha,
            "L": args.lipschitz,
            "epsilon0": args.epsilon0,
            "init": args.init,
            "exact": args.exact,
            "tau": args.tau,
        }),
        Some(args.seed),
    );
    let envs = load_envs(&args.env, &mut mb)?;
    let mut demos = Vec::with_capacity(args.demos.len());
    for (i, path) in args.demos.iter().enumerate() {
        mb.input(path)?;
        let dataset = io::load_trajectories(path, i)?;
        dataset.validate(&envs[i])?;
        demos.push(dataset);
    }

    let horizon = envs[0].horizon();
    let grid = Grid::new(args.epsilon0, horizon)?;
    let init = named_or_file_utility(&args.init, horizon as f64)?;
    let u0 = DiscretizedUtility::sample(&init, &grid)?;
    let models = match args.tau {
        Some(tau) => Some(explore_models(&envs, tau, args.seed)?),
        None => None,
    };
    let setups: Vec<EnvSetup<'_, f64>> = envs
        .iter()
        .enumerate()
        .map(|(i, env)| EnvSetup {
            env,
            expert: ExpertSource::Demos(&demos[i]),
            transitions: match &models {
                Some(models) => TransitionSource::Empirical(&models[i]),
                None => TransitionSource::Exact,
            },
        })
        .collect();

    let sweep = args.alpha.len() > 1;
    for &alpha in &args.alpha {
        let config = TractorConfig {
            t_iters: args.t_iters,
            k_rollouts: args.k_rollouts,
            alpha: StepSize::Fixed(alpha),
            u0: u0.clone(),
            lipschitz: args.lipschitz,
            seed: args.seed,
            gradient_mode: GradientMode::Rollout,
        };
        let record = learn(&setups, &grid, &config)?;

        let mut csv = String::from("t,grad_norm,sum_compat\n");
        for (t, (g, s)) in record
            .grad_norms
            .iter()
            .zip(&record.sum_compat)
            .enumerate()
        {
            csv.push_str(&format!("{t},{},{}\n", fmt(*g), fmt(*s)));
        }
        let curve_path = if sweep {
            suffixed(&args.out_curve, &format!("_alpha{alpha}"))
        } else {
            args.out_curve.clone()
        };
        std::fs::write(&curve_path, csv)?;
        mb.output(&curve_path);

        let utility_path = if sweep {
            suffixed(&args.out_utility, &format!("_alpha{alpha}"))
        } else {
            args.out_utility.clone()
        };
        let anchors: Vec<(f64, f64)> = grid
            .points()
            .iter()
            .zip(record.average.values())
            .map(|(&x, &u)| (x, u))
            .collect();
        let file = io::UtilityFile {
            horizon: horizon as f64,
            anchors,
            lipschitz: Some(args.lipschitz),
        };
        std::fs::write(&utility_path, serde_json::to_string_pretty(&file)?)?;
        mb.output(&utility_path);
    }
    mb.write(None)?;
    Ok(ExitCode::SUCCESS)
}

fn suffixed(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().unwrap_or_default().to_string_lossy();
    let ext = path
        .extension()
        .map(|e| format!(".{}", e.to_string_lossy()))
        .unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}{ext}"))
}

fn cmd_elicit(args: ElicitArgs) -> Result<ExitCode, Error> {
    let mut mb = ManifestBuilder::new(
        "elicit",
        serde_json::json!({
            "targets": args.targets,
            "qtol": args.qtol,
            "utility": args.utility,
            "horizon": args.horizon,
        }),
        None,
    );
    let agent = named_or_file_utility(&args.utility, args.horizon as f64)?;
    let mut oracle = self_play_oracle(agent);
    let anchors = elicit_utility(&mut oracle, args.horizon, &args.targets, args.qtol)?;
    // Anchors are written as recovered; tiny search noise may leave them
    // slightly non-monotone, so bypass the strict utility constructor.
    let file = io::UtilityFile {
        horizon: args.horizon as f64,
        anchors,
        lipschitz: None,
    };
    std::fs::write(&args.out, serde_json::to_string_pretty(&file)?)?;
    mb.output(&args.out);
    mb.write(None)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_zoo(args: ZooArgs) -> Result<ExitCode, Error> {
    if args.list {
        for id in ALL_ZOO_IDS {
            let entry = zoo::<f64>(id)?;
            println!(
                "{:<14} S={} A={} H={} eps0={}",
                id.name(),
                entry.mdp.num_states(),
                entry.mdp.num_actions(),
                entry.mdp.horizon(),
                entry.epsilon0,
            );
        }
        return Ok(ExitCode::SUCCESS);
    }
    if let Some(which) = &args.check {
        let ids: Vec<ZooId> = if which == "all" {
            ALL_ZOO_IDS.to_vec()
        } else {
            vec![ZooId::parse(which)?]
        };
        let mut all_pass = true;
        for id in ids {
            let entry = zoo::<f64>(id)?;
            for report in zoo_check(&entry)? {
                let verdict = if report.pass { "PASS" } else { "FAIL" };
                all_pass &= report.pass;
                println!(
                    "{verdict} {:<14} {} (expected {}, got {}, tol {})",
                    id.name(),
                    report.quantity,
                    report.expected,
                    report.actual,
                    report.tolerance,
                );
            }
        }
        return Ok(if all_pass {
            ExitCode::SUCCESS
        } else {
            ExitCode::FAILURE
        });
    }
    if let Some(which) = &args.export {
        let id = ZooId::parse(which)?;
        let entry = zoo::<f64>(id)?;
        let out = args.out.ok_or_else(|| Error::MismatchedLengths(
            "--export needs --out".into(),
        ))?;
        io::save_mdp(&entry.mdp, &out)?;
        let mut mb = ManifestBuilder::new("zoo_export", serde_json::json!({ "id": which }), None);
        mb.output(&out);
        mb.write(None)?;
        return Ok(ExitCode::SUCCESS);
    }
    Err(Error::MismatchedLengths(
        "pass one of --list, --check, --export".into(),
    ))
}
