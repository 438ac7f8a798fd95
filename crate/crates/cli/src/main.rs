use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ndarray::{Array2, Array3};

use vilcb_core::analysis::{concentrability, sample_predictor, write_report_csv, Setting};
use vilcb_core::bench::{
    fit_slope, run_gambler, run_hard_demo, run_scaling, write_demo_csv, write_scaling_csv,
    Algorithm, GamblerSpec, HardFamily, Pipeline, RunConfig, ScalingRow,
};
use vilcb_core::data::{
    gen_episodic, gen_iid, gen_markov, read_dataset_csv, write_dataset_csv, write_trajectories,
    Trajectory, TransitionDataset,
};
use vilcb_core::hard::{
    build_finite_family, build_infinite_pair, default_code_size, gilbert_varshamov, verify_finite,
    verify_infinite, write_sidecar, VerifyReport,
};
use vilcb_core::mdp::{
    occupancy_discounted, occupancy_episodic, read_mdp, solve_optimal_discounted,
    solve_optimal_episodic, value_gap_discounted, value_gap_episodic, write_mdp, ActionMask,
    DiscountedMDP, EpisodicMDP, EpisodicPolicy, MdpFile, Policy,
};
use vilcb_core::textfmt::fmt17;
use vilcb_core::vilcb::{
    plain_vi_finite, plain_vi_infinite, vi_lcb_finite, vi_lcb_infinite, write_result_csv,
    write_summary, DiscountedTask, EpisodicTask, IterationControl, PenaltyConfig, VilcbResult,
};

#[derive(Parser)]
#[command(
    name = "vilcb",
    version,
    about = "Offline RL with pessimistic value iteration"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run VI-LCB or plain VI on a dataset and dump Q, penalties and counts.
    Solve(SolveArgs),
    /// Sample a dataset from an MDP under the uniform behavior policy.
    GenData(GenDataArgs),
    /// Gambler's problem sample-size sweep.
    Gambler(GamblerArgs),
    /// Sample-size sweep on an MDP file for one of the three data models.
    Scaling(ScalingArgs),
    /// Build and verify a hard instance, or run the identification demo.
    HardInstance(HardArgs),
    /// Concentrability of a dataset or of the uniform behavior policy.
    Analyze(AnalyzeArgs),
}

/// Flags shared by every subcommand. Values given here override `--config`.
#[derive(Args, Default)]
struct Common {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    cb: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Comma-separated sample sizes.
    #[arg(long)]
    grid: Option<String>,
    /// `vi-lcb`, `vi`, or a comma-separated list.
    #[arg(long)]
    algo: Option<String>,
    #[arg(long)]
    tau_max: Option<usize>,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Plain-text `key=value` settings.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Read grid values as total sample counts instead of per-cell counts.
    #[arg(long)]
    total_n: bool,
}

impl Common {
    fn run_config(&self) -> anyhow::Result<RunConfig> {
        let mut config = RunConfig::default();
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            for key in config.apply_file(&text)?.keys() {
                log::warn!("ignoring unknown configuration key `{key}`");
            }
        }
        let flags: [(&str, Option<String>); 8] = [
            ("seed", self.seed.map(|v| v.to_string())),
            ("cb", self.cb.map(|v| v.to_string())),
            ("delta", self.delta.map(|v| v.to_string())),
            ("trials", self.trials.map(|v| v.to_string())),
            ("grid", self.grid.clone()),
            ("algo", self.algo.clone()),
            ("tau_max", self.tau_max.map(|v| v.to_string())),
            ("out", self.out.as_ref().map(|p| p.display().to_string())),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                config.set(key, &v)?;
            }
        }
        if self.total_n {
            config.total_n = true;
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    mdp: PathBuf,
    /// Transition CSV (`s,a,s'` or `h,s,a,s'`).
    #[arg(long)]
    data: PathBuf,
    /// Also write a `key=value` summary here.
    #[arg(long)]
    summary: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Clone, Copy, ValueEnum)]
enum DataModel {
    Iid,
    Episodic,
    Markov,
}

#[derive(Args)]
struct GenDataArgs {
    #[arg(long)]
    mdp: PathBuf,
    /// Transitions (iid), episodes (episodic) or trajectory length (markov).
    #[arg(long)]
    n: usize,
    #[arg(long, value_enum, default_value = "iid")]
    model: DataModel,
    /// Start state of a Markov trajectory.
    #[arg(long, default_value_t = 0)]
    s0: usize,
    /// Write whole trajectories instead of flattened transitions.
    #[arg(long)]
    trajectories: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct GamblerArgs {
    #[arg(long, default_value_t = 50)]
    goal: usize,
    #[arg(long, default_value_t = 100)]
    horizon: usize,
    #[arg(long, default_value_t = 0.45)]
    p_head: f64,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct ScalingArgs {
    #[arg(long)]
    mdp: PathBuf,
    #[arg(long, value_enum, default_value = "iid")]
    pipeline: DataModel,
    #[arg(long, default_value_t = 0)]
    s0: usize,
    /// Mixing time for the Markov trim; the data-driven choice of `k` is used when absent.
    #[arg(long)]
    t_mix: Option<f64>,
    #[command(flatten)]
    common: Common,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyKind {
    Infinite,
    Finite,
}

#[derive(Args)]
struct HardArgs {
    #[arg(long, value_enum, default_value = "infinite")]
    family: FamilyKind,
    #[arg(long, default_value_t = 4)]
    states: usize,
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    #[arg(long, default_value_t = 0.9)]
    gamma: f64,
    #[arg(long, default_value_t = 32)]
    horizon: usize,
    #[arg(long)]
    epsilon: f64,
    /// Member to build: 0/1 for the discounted pair, a codeword index otherwise.
    #[arg(long, default_value_t = 0)]
    theta: usize,
    /// Number of codewords used by the episodic family.
    #[arg(long)]
    family_size: Option<usize>,
    /// Write the instance in MDP file format plus a `.theta` sidecar.
    #[arg(long)]
    mdp_out: Option<PathBuf>,
    /// Estimate the misidentification frequency over the grid instead.
    #[arg(long)]
    demo: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    mdp: PathBuf,
    /// Dataset whose empirical occupancy serves as `d^b`; uniform behavior otherwise.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Also print the sample-size bound for this accuracy.
    #[arg(long)]
    epsilon: Option<f64>,
    #[command(flatten)]
    common: Common,
}

fn sink(out: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot write {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn load_mdp(path: &Path) -> anyhow::Result<MdpFile> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_mdp(BufReader::new(f)).with_context(|| format!("parsing {}", path.display()))
}

fn uniform(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

fn behavior(mask: Option<&ActionMask>, ns: usize, na: usize) -> Policy {
    match mask {
        Some(m) => Policy::uniform_masked(m),
        None => Policy::uniform(ns, na),
    }
}

/// `d^b(s,a)` of uniform states and uniform allowed actions.
fn uniform_d_b(policy: &Policy, ns: usize, na: usize) -> Array2<f64> {
    Array2::from_shape_fn((ns, na), |(s, a)| policy.prob(s, a) / ns as f64)
}

fn single_algorithm(config: &RunConfig) -> anyhow::Result<Algorithm> {
    match config.algorithms.as_slice() {
        [a] => Ok(*a),
        _ => bail!("this subcommand takes exactly one algorithm"),
    }
}

fn solve(args: SolveArgs) -> anyhow::Result<()> {
    let config = args.common.run_config()?;
    let algo = single_algorithm(&config)?;
    let cfg = PenaltyConfig::new(config.c_b, config.delta)?;
    let control = IterationControl {
        tau_max: config.tau_max,
        tol: None,
    };
    let mdp = load_mdp(&args.mdp)?;
    let (ns, na, horizon) = match &mdp {
        MdpFile::Discounted(m) => (m.num_states(), m.num_actions(), None),
        MdpFile::Episodic(m) => (m.num_states(), m.num_actions(), Some(m.horizon())),
    };
    let f = File::open(&args.data).with_context(|| format!("opening {}", args.data.display()))?;
    let data = read_dataset_csv(BufReader::new(f), ns, na, horizon)?;
    let (result, gap, episodic): (VilcbResult, f64, bool) = match &mdp {
        MdpFile::Discounted(m) => {
            let task = DiscountedTask::of(m);
            let r = match algo {
                Algorithm::ViLcb => vi_lcb_infinite(&data, &task, &cfg, control)?,
                Algorithm::Vi => plain_vi_infinite(&data, &task, control)?,
            };
            let gap = value_gap_discounted(m, &uniform(ns), r.stationary_policy())?;
            (r, gap, false)
        }
        MdpFile::Episodic(m) => {
            let task = EpisodicTask::of(m);
            let r = match algo {
                Algorithm::ViLcb => vi_lcb_finite(&data, &task, &cfg)?,
                Algorithm::Vi => plain_vi_finite(&data, &task)?,
            };
            let gap = value_gap_episodic(m, &uniform(ns), &r.policy)?;
            (r, gap, true)
        }
    };
    let mut w = sink(config.out.as_deref())?;
    write_result_csv(&result, episodic, &mut w)?;
    w.flush()?;
    if let Some(p) = &args.summary {
        let mut s = sink(Some(p))?;
        write_summary(&result, Some(gap), &mut s)?;
        s.flush()?;
    }
    log::info!("gap={} iterations={}", fmt17(gap), result.iterations);
    Ok(())
}

fn gen_data(args: GenDataArgs) -> anyhow::Result<()> {
    let config = args.common.run_config()?;
    let mdp = load_mdp(&args.mdp)?;
    let mut w = sink(config.out.as_deref())?;
    match (&mdp, args.model) {
        (MdpFile::Discounted(m), DataModel::Iid) => {
            let pi = behavior(m.mask(), m.num_states(), m.num_actions());
            let d_b = uniform_d_b(&pi, m.num_states(), m.num_actions());
            write_dataset_csv(&gen_iid(m, &d_b, args.n, config.seed)?, &mut w)?;
        }
        (MdpFile::Discounted(m), DataModel::Markov) => {
            let pi = behavior(m.mask(), m.num_states(), m.num_actions());
            let traj = gen_markov(m, &pi, args.s0, args.n, config.seed)?;
            if args.trajectories {
                let t = Trajectory {
                    states: traj.states.clone(),
                    actions: traj.actions.clone(),
                };
                write_trajectories(&[t], &mut w)?;
            } else {
                write_dataset_csv(&traj.transitions(0..traj.len()), &mut w)?;
            }
        }
        (MdpFile::Episodic(m), DataModel::Episodic) => {
            let pi = EpisodicPolicy::repeat(
                behavior(m.mask(), m.num_states(), m.num_actions()),
                m.horizon(),
            );
            let data = gen_episodic(m, &uniform(m.num_states()), &pi, args.n, config.seed)?;
            if args.trajectories {
                write_trajectories(&data.trajectories, &mut w)?;
            } else {
                write_dataset_csv(&data.to_transitions(), &mut w)?;
            }
        }
        (MdpFile::Discounted(_), DataModel::Episodic) => {
            bail!("episodic data needs an episodic MDP")
        }
        (MdpFile::Episodic(_), _) => bail!("an episodic MDP only supports the episodic data model"),
    }
    w.flush()?;
    Ok(())
}

fn report_slope(rows: &[ScalingRow]) {
    let first = rows.first().map(|r| r.algorithm);
    let points: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| Some(r.algorithm) == first)
        .map(|r| (r.n as f64, r.mean_gap))
        .collect();
    if points.len() < 2 {
        return;
    }
    match fit_slope(&points) {
        Ok(fit) => log::info!(
            "slope={} intercept={} r2={}",
            fmt17(fit.slope),
            fmt17(fit.intercept),
            fmt17(fit.r_squared)
        ),
        Err(e) => log::warn!("slope fit failed: {e}"),
    }
}

fn gambler(args: GamblerArgs) -> anyhow::Result<()> {
    let config = args.common.run_config()?;
    let spec = GamblerSpec {
        goal: args.goal,
        horizon: args.horizon,
        p_head: args.p_head,
    };
    let mut w = sink(config.out.as_deref())?;
    let rows = run_gambler(&spec, &config)?;
    write_scaling_csv(&rows, &mut w)?;
    w.flush()?;
    report_slope(&rows);
    Ok(())
}

fn scaling(args: ScalingArgs) -> anyhow::Result<()> {
    let config = args.common.run_config()?;
    let pipeline = match (load_mdp(&args.mdp)?, args.pipeline) {
        (MdpFile::Discounted(mdp), DataModel::Iid) => {
            let pi = behavior(mdp.mask(), mdp.num_states(), mdp.num_actions());
            let d_b = uniform_d_b(&pi, mdp.num_states(), mdp.num_actions());
            let rho = uniform(mdp.num_states());
            Pipeline::Iid { mdp, d_b, rho }
        }
        (MdpFile::Discounted(mdp), DataModel::Markov) => {
            let pi_b = behavior(mdp.mask(), mdp.num_states(), mdp.num_actions());
            let rho = uniform(mdp.num_states());
            Pipeline::Markov {
                mdp,
                pi_b,
                s0: args.s0,
                rho,
                t_mix: args.t_mix,
            }
        }
        (MdpFile::Episodic(mdp), DataModel::Episodic) => {
            let pi_b = EpisodicPolicy::repeat(
                behavior(mdp.mask(), mdp.num_states(), mdp.num_actions()),
                mdp.horizon(),
            );
            let rho = uniform(mdp.num_states());
            Pipeline::Episodic {
                rho_b: rho.clone(),
                mdp,
                pi_b,
                rho,
            }
        }
        (MdpFile::Discounted(_), DataModel::Episodic) => {
            bail!("the episodic pipeline needs an episodic MDP")
        }
        (MdpFile::Episodic(_), _) => bail!("an episodic MDP only supports the episodic pipeline"),
    };
    let mut w = sink(config.out.as_deref())?;
    let rows = run_scaling(&pipeline, &config)?;
    write_scaling_csv(&rows, &mut w)?;
    w.flush()?;
    report_slope(&rows);
    Ok(())
}

fn write_verify<W: Write>(report: &VerifyReport, w: &mut W) -> anyhow::Result<()> {
    writeln!(w, "check,passed,deviation")?;
    for item in &report.items {
        writeln!(w, "{},{},{}", item.name, item.passed, fmt17(item.deviation))?;
    }
    Ok(())
}

fn write_instance(path: &Path, file: MdpFile, sidecar: &str) -> anyhow::Result<()> {
    let mut w = sink(Some(path))?;
    write_mdp(&file, &mut w)?;
    w.flush()?;
    let mut s = sink(Some(&path.with_extension("theta")))?;
    write_sidecar(sidecar, &mut s)?;
    s.flush()?;
    Ok(())
}

fn hard_instance(args: HardArgs) -> anyhow::Result<()> {
    let config = args.common.run_config()?;
    let family_size = args
        .family_size
        .unwrap_or_else(|| default_code_size(args.horizon));
    if args.demo {
        let family = match args.family {
            FamilyKind::Infinite => HardFamily::Infinite {
                num_states: args.states,
                c: args.c,
                gamma: args.gamma,
                epsilon: args.epsilon,
            },
            FamilyKind::Finite => HardFamily::Finite {
                num_states: args.states,
                c: args.c,
                horizon: args.horizon,
                epsilon: args.epsilon,
                family_size,
            },
        };
        let mut w = sink(config.out.as_deref())?;
        let rows = run_hard_demo(&family, &config)?;
        write_demo_csv(&rows, &mut w)?;
        w.flush()?;
        return Ok(());
    }
    let (report, built) = match args.family {
        FamilyKind::Infinite => {
            if args.theta > 1 {
                bail!("the discounted family has members 0 and 1");
            }
            let [a, b] = build_infinite_pair(args.states, args.c, args.gamma, args.epsilon)?;
            let inst = if args.theta == 0 { a } else { b };
            let line = inst.sidecar_line();
            (
                verify_infinite(&inst)?,
                (MdpFile::Discounted(inst.mdp), line),
            )
        }
        FamilyKind::Finite => {
            let code = gilbert_varshamov(args.horizon, Some(family_size), config.seed)?;
            if args.theta >= code.len() {
                bail!(
                    "codeword index {} out of range 0..{}",
                    args.theta,
                    code.len()
                );
            }
            let inst = build_finite_family(
                args.states,
                args.c,
                args.horizon,
                args.epsilon,
                &[code.bits(args.theta)],
            )?
            .remove(0);
            let line = inst.sidecar_line();
            (verify_finite(&inst)?, (MdpFile::Episodic(inst.mdp), line))
        }
    };
    let mut w = sink(config.out.as_deref())?;
    write_verify(&report, &mut w)?;
    w.flush()?;
    if let Some(path) = &args.mdp_out {
        write_instance(path, built.0, &built.1)?;
    }
    if !report.all_passed() {
        bail!("instance verification failed");
    }
    Ok(())
}

/// Normalizes per-step counts into occupancies; steps without data stay zero.
fn empirical_occupancy(data: &TransitionDataset) -> Array3<f64> {
    let counts = data.count();
    let mut d = counts.visits().mapv(|n| n as f64);
    for mut step in d.outer_iter_mut() {
        let total: f64 = step.sum();
        if total > 0.0 {
            step /= total;
        }
    }
    d
}

fn analyze(args: AnalyzeArgs) -> anyhow::Result<()> {
    let config = args.common.run_config()?;
    let mdp = load_mdp(&args.mdp)?;
    let (ns, na, horizon) = match &mdp {
        MdpFile::Discounted(m) => (m.num_states(), m.num_actions(), None),
        MdpFile::Episodic(m) => (m.num_states(), m.num_actions(), Some(m.horizon())),
    };
    let rho = uniform(ns);
    let d_b = match &args.data {
        Some(p) => {
            let f = File::open(p).with_context(|| format!("opening {}", p.display()))?;
            empirical_occupancy(&read_dataset_csv(BufReader::new(f), ns, na, horizon)?)
        }
        None => match &mdp {
            MdpFile::Discounted(m) => {
                uniform_d_b(&behavior(m.mask(), ns, na), ns, na).insert_axis(ndarray::Axis(0))
            }
            MdpFile::Episodic(m) => {
                let pi = EpisodicPolicy::repeat(behavior(m.mask(), ns, na), m.horizon());
                occupancy_episodic(m, &pi, &rho)?.state_action
            }
        },
    };
    let (d_star, setting) = match &mdp {
        MdpFile::Discounted(m) => (
            discounted_star(m, &rho)?,
            Setting::Infinite { gamma: m.gamma() },
        ),
        MdpFile::Episodic(m) => (
            episodic_star(m, &rho)?,
            Setting::Finite {
                horizon: m.horizon(),
            },
        ),
    };
    let report = concentrability(&d_star, &d_b)?;
    let mut w = sink(config.out.as_deref())?;
    write_report_csv(&report, horizon.is_some(), &mut w)?;
    w.flush()?;
    if let Some(eps) = args.epsilon {
        let p = sample_predictor(
            setting,
            ns,
            report.c_star_clipped,
            eps,
            config.delta,
            config.c_b,
        )?;
        log::info!("predicted_samples={}", fmt17(p.sample_size));
    }
    Ok(())
}

fn discounted_star(m: &DiscountedMDP, rho: &[f64]) -> anyhow::Result<Array3<f64>> {
    let star = solve_optimal_discounted(m)?;
    Ok(occupancy_discounted(m, &star.policy, rho)?.state_action)
}

fn episodic_star(m: &EpisodicMDP, rho: &[f64]) -> anyhow::Result<Array3<f64>> {
    let star = solve_optimal_episodic(m);
    Ok(occupancy_episodic(m, &star.policy, rho)?.state_action)
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Solve(a) => solve(a),
        Command::GenData(a) => gen_data(a),
        Command::Gambler(a) => gambler(a),
        Command::Scaling(a) => scaling(a),
        Command::HardInstance(a) => hard_instance(a),
        Command::Analyze(a) => analyze(a),
    }
}
