use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::bail;
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use resilinet::dgcn::{pretrain, write_curve_csv, Hyperparams, ModelFile};
use resilinet::harness::{
    execute, read_results_csv, run_experiment, summarize_rows, write_ns_series_csv,
    write_results_csv, write_summary_csv, CellSummary, ExperimentSpec, SimFile, TMaxPolicy,
};
use resilinet::planner::{plan_centering, plan_mldagl_with_solution, verify_plan, Method, PlanFile};
use resilinet::scenario::{apply_damage, DamageScenario, ScenarioFile};
use resilinet::seed::derive_seed;
use resilinet::swarm::{generate_swarm, SwarmParams, SwarmTopology};
use resilinet::Error;

const SEED_ENV: &str = "RESILINET_SEED";

#[derive(Parser)]
#[command(name = "resilinet", version, about = "Plan and simulate connectivity recovery of damaged swarms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a connected random swarm.
    Gen(GenArgs),
    /// Destroy nodes of a swarm.
    Damage(DamageArgs),
    /// Pretrain a model on a random half-damaged swarm.
    Pretrain(PretrainArgs),
    /// Compute recovery targets for a damage scenario.
    Plan(PlanArgs),
    /// Fly a plan and measure recovery.
    Simulate(SimulateArgs),
    /// Run seeded trials over damage sizes and methods.
    Experiment(ExperimentArgs),
    /// Recompute the summary table of a results CSV.
    Report(ReportArgs),
}

#[derive(Args)]
struct Common {
    /// JSON config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed [fallback: $RESILINET_SEED, then 0].
    #[arg(long)]
    seed: Option<u64>,
    /// Nodes per km².
    #[arg(long)]
    density: Option<f64>,
    /// Communication range, meters.
    #[arg(long)]
    d_tr: Option<f64>,
    /// Maximum speed, m/s.
    #[arg(long)]
    v_max: Option<f64>,
    /// Simulation step, seconds.
    #[arg(long)]
    dt: Option<f64>,
}

#[derive(Args)]
struct HyperArgs {
    /// Residual blocks.
    #[arg(long)]
    blocks: Option<usize>,
    /// Hidden width.
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    pretrain_iters: Option<usize>,
    #[arg(long)]
    online_iters: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    dropout: Option<f64>,
    /// Kernel step [default: 1/N].
    #[arg(long)]
    epsilon: Option<f64>,
    /// Map outputs back with (D + 1)·(x + p_c).
    #[arg(long)]
    paper_literal_upscale: bool,
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    common: Common,
    /// Number of nodes.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct DamageArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    topology: PathBuf,
    /// Nodes to destroy.
    #[arg(long)]
    nd: Option<usize>,
    /// Accept damage that leaves the survivors connected.
    #[arg(long)]
    allow_connected: bool,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct PretrainArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    hyper: HyperArgs,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, short)]
    out: PathBuf,
    /// Loss-curve CSV.
    #[arg(long)]
    curve: Option<PathBuf>,
}

#[derive(Args)]
struct PlanArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    hyper: HyperArgs,
    #[arg(long)]
    topology: PathBuf,
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, default_value = "ml-dagl")]
    method: Method,
    /// Pretrained model, required for ml-dagl.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, short)]
    out: PathBuf,
    /// Online loss-curve CSV.
    #[arg(long)]
    curve: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    topology: PathBuf,
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    plan: PathBuf,
    /// Time limit in seconds [default: D / (2·v_max)].
    #[arg(long)]
    t_max: Option<f64>,
    #[arg(long, short)]
    out: PathBuf,
    /// N_s(t) series CSV.
    #[arg(long)]
    series: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    hyper: HyperArgs,
    #[arg(long)]
    n: Option<usize>,
    /// Damage sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    nd: Vec<usize>,
    #[arg(long)]
    trials: Option<usize>,
    /// Methods, comma separated.
    #[arg(long, value_delimiter = ',')]
    methods: Vec<Method>,
    /// Pretrained model; one is trained when ml-dagl runs without it.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Time limit in seconds [default: D / (2·v_max)].
    #[arg(long)]
    t_max: Option<f64>,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long, default_value = "experiment")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Per-trial results CSV.
    #[arg(long)]
    results: PathBuf,
    /// Write the summary here as CSV.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    n: Option<usize>,
    n_d: Option<usize>,
    seed: Option<u64>,
    swarm: SwarmParams,
    hyper: Hyperparams,
    damage_sizes: Option<Vec<usize>>,
    trials: Option<usize>,
    methods: Option<Vec<Method>>,
    t_max: Option<TMaxPolicy>,
    jobs: Option<usize>,
}

struct Resolved {
    file: FileConfig,
    swarm: SwarmParams,
    seed: u64,
}

impl Common {
    fn resolve(&self) -> anyhow::Result<Resolved> {
        let file: FileConfig = match &self.config {
            Some(path) => resilinet::io::read_json(path)?,
            None => FileConfig::default(),
        };
        let mut swarm = file.swarm;
        swarm.density = self.density.unwrap_or(swarm.density);
        swarm.d_tr = self.d_tr.unwrap_or(swarm.d_tr);
        swarm.v_max = self.v_max.unwrap_or(swarm.v_max);
        swarm.dt = self.dt.unwrap_or(swarm.dt);
        let seed = match self.seed.or(file.seed) {
            Some(s) => s,
            None => match std::env::var(SEED_ENV) {
                Ok(v) => v
                    .trim()
                    .parse()
                    .map_err(|_| Error::InvalidArgument(format!("{SEED_ENV}={v} is not a u64")))?,
                Err(_) => 0,
            },
        };
        Ok(Resolved { file, swarm, seed })
    }
}

impl HyperArgs {
    fn apply(&self, mut h: Hyperparams) -> Hyperparams {
        h.blocks = self.blocks.unwrap_or(h.blocks);
        h.hidden = self.hidden.unwrap_or(h.hidden);
        h.pretrain_iters = self.pretrain_iters.unwrap_or(h.pretrain_iters);
        h.online_iters = self.online_iters.unwrap_or(h.online_iters);
        h.learning_rate = self.learning_rate.unwrap_or(h.learning_rate);
        h.lambda = self.lambda.unwrap_or(h.lambda);
        h.dropout = self.dropout.unwrap_or(h.dropout);
        h.epsilon = self.epsilon.or(h.epsilon);
        h.paper_literal_upscale |= self.paper_literal_upscale;
        h
    }
}

fn required<T>(flag: Option<T>, file: Option<T>, name: &str) -> anyhow::Result<T> {
    match flag.or(file) {
        Some(v) => Ok(v),
        None => Err(Error::InvalidArgument(format!("missing --{name} (flag or config)")).into()),
    }
}

fn display(path: &Path) -> String {
    path.display().to_string()
}

fn load_scenario(path: &Path, topology: &SwarmTopology) -> anyhow::Result<DamageScenario> {
    let file = ScenarioFile::load(path)?;
    Ok(DamageScenario::from_file(&file, topology.len())?)
}

fn cmd_gen(a: GenArgs) -> anyhow::Result<()> {
    let r = a.common.resolve()?;
    let n = required(a.n, r.file.n, "n")?;
    let t = generate_swarm(n, r.swarm.density, r.swarm.d_tr, r.seed)?;
    t.save(&a.out)?;
    println!("wrote {} (n = {n}, side = {} m, seed = {})", a.out.display(), t.side(), r.seed);
    Ok(())
}

fn cmd_damage(a: DamageArgs) -> anyhow::Result<()> {
    let r = a.common.resolve()?;
    let topology = SwarmTopology::load(&a.topology)?;
    let n_d = required(a.nd, r.file.n_d, "nd")?;
    let s = apply_damage(&topology, n_d, r.seed, !a.allow_connected)?;
    s.to_file(display(&a.topology)).save(&a.out)?;
    println!("wrote {} ({} destroyed, {} remaining)", a.out.display(), s.n_d(), s.n_r());
    Ok(())
}

fn cmd_pretrain(a: PretrainArgs) -> anyhow::Result<()> {
    let r = a.common.resolve()?;
    let n = required(a.n, r.file.n, "n")?;
    let hyper = a.hyper.apply(r.file.hyper);
    let pre = pretrain(n, &r.swarm, r.seed, &hyper)?;
    ModelFile::new(&pre.params, n, pre.init_seed, Some(pre.meta.clone())).save(&a.out)?;
    if let Some(curve) = &a.curve {
        write_curve_csv(&pre.curve, curve)?;
    }
    let last = pre.curve.last().map_or(f64::NAN, |c| c.reported_loss);
    println!(
        "wrote {} (K = {}, {} iterations, final loss {last:.3})",
        a.out.display(),
        pre.meta.k,
        pre.meta.iterations
    );
    Ok(())
}

fn cmd_plan(a: PlanArgs) -> anyhow::Result<()> {
    let r = a.common.resolve()?;
    let topology = SwarmTopology::load(&a.topology)?;
    let scenario = load_scenario(&a.scenario, &topology)?;
    let plan = match a.method {
        Method::Centering => plan_centering(&topology, &scenario, r.swarm.v_max),
        Method::MlDagl => {
            let Some(model_path) = &a.model else {
                bail!(Error::InvalidArgument("ml-dagl needs --model".into()));
            };
            let params = ModelFile::load(model_path)?.params()?;
            let mut hyper = a.hyper.apply(r.file.hyper);
            hyper.blocks = params.blocks();
            hyper.hidden = params.hidden();
            hyper.seed = r.seed;
            let (plan, solution) = plan_mldagl_with_solution(&topology, &scenario, &params, &hyper, &r.swarm)?;
            if let Some(curve) = &a.curve {
                write_curve_csv(&solution.curve, curve)?;
            }
            plan
        }
        Method::FallbackCentroid => bail!(Error::InvalidArgument("fallback-centroid is not a planner".into())),
    };
    plan.to_file(display(&a.scenario)).save(&a.out)?;
    println!(
        "wrote {} (method = {}, planned T_rc = {:.3} s, connected = {})",
        a.out.display(),
        plan.method,
        plan.planned_t_rc,
        verify_plan(&plan, r.swarm.d_tr)
    );
    Ok(())
}

fn cmd_simulate(a: SimulateArgs) -> anyhow::Result<()> {
    let r = a.common.resolve()?;
    let topology = SwarmTopology::load(&a.topology)?;
    let scenario = load_scenario(&a.scenario, &topology)?;
    let plan = PlanFile::load(&a.plan)?.plan();
    let start = scenario.remaining_positions(&topology);
    let t_max = a
        .t_max
        .or(match r.file.t_max {
            Some(TMaxPolicy::Fixed(t)) => Some(t),
            _ => None,
        })
        .unwrap_or_else(|| TMaxPolicy::HalfSide.resolve(topology.side(), r.swarm.v_max));
    let sim = execute(&start, &plan, r.swarm.v_max, r.swarm.dt, r.swarm.d_tr, t_max)?;
    if let Some(series) = &a.series {
        write_ns_series_csv(&sim, series)?;
    }
    let measured = sim.measured_t_rc.map_or("never".to_string(), |t| format!("{t:.1} s"));
    SimFile::new(display(&a.plan), &plan, t_max, sim.clone()).save(&a.out)?;
    println!(
        "wrote {} (measured T_rc = {measured}, converged = {}, max degree = {})",
        a.out.display(),
        sim.converged,
        sim.degrees.max
    );
    Ok(())
}

fn print_summary(cells: &[CellSummary]) {
    let opt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.2}"));
    println!(
        "{:<18} {:>5} {:>5} {:>5} {:>7} {:>7} {:>8} {:>8}",
        "method", "n", "n_d", "R_c", "mean_T", "std_T", "mean_deg", "max_deg"
    );
    for c in cells {
        println!(
            "{:<18} {:>5} {:>5} {:>5.2} {:>7} {:>7} {:>8.2} {:>8.2}",
            c.method.as_str(),
            c.n,
            c.n_d,
            c.r_c,
            opt(c.mean_t),
            opt(c.std_t),
            c.mean_deg,
            c.max_deg
        );
    }
}

fn cmd_experiment(a: ExperimentArgs) -> anyhow::Result<()> {
    let r = a.common.resolve()?;
    let n = required(a.n, r.file.n, "n")?;
    let damage_sizes = if a.nd.is_empty() {
        r.file.damage_sizes.clone().unwrap_or_else(|| vec![n / 2])
    } else {
        a.nd.clone()
    };
    let methods = if a.methods.is_empty() {
        r.file
            .methods
            .clone()
            .unwrap_or_else(|| vec![Method::Centering, Method::MlDagl])
    } else {
        a.methods.clone()
    };
    let trials = a.trials.or(r.file.trials).unwrap_or(50);
    let mut spec = ExperimentSpec::new(n, damage_sizes, trials, r.seed, methods);
    spec.swarm = r.swarm;
    spec.hyper = a.hyper.apply(r.file.hyper);
    spec.t_max = a.t_max.map(TMaxPolicy::Fixed).or(r.file.t_max).unwrap_or(TMaxPolicy::HalfSide);
    spec.validate()?;
    let jobs = a.jobs.or(r.file.jobs).unwrap_or(1);

    let model = if spec.methods.contains(&Method::MlDagl) {
        let params = match &a.model {
            Some(path) => ModelFile::load(path)?.params()?,
            None => {
                let pre = pretrain(n, &spec.swarm, derive_seed(r.seed, u64::MAX), &spec.hyper)?;
                ModelFile::new(&pre.params, n, pre.init_seed, Some(pre.meta.clone()))
                    .save(a.out_dir.join("model.json"))?;
                write_curve_csv(&pre.curve, a.out_dir.join("pretrain_curve.csv"))?;
                pre.params
            }
        };
        spec.hyper.blocks = params.blocks();
        spec.hyper.hidden = params.hidden();
        Some(params)
    } else {
        None
    };

    let report = run_experiment(&spec, model.as_ref(), jobs)?;
    let rows: Vec<_> = report.trials.iter().map(|t| t.row()).collect();
    write_results_csv(&rows, a.out_dir.join("results.csv"))?;
    write_summary_csv(&report.summary, a.out_dir.join("summary.csv"))?;
    resilinet::io::write_json(a.out_dir.join("report.json"), &report)?;
    for s in &report.skips {
        eprintln!("skipped trial {} (n_d = {}): {}", s.trial, s.n_d, s.reason);
    }
    print_summary(&report.summary);
    println!("wrote {}", a.out_dir.display());
    Ok(())
}

fn cmd_report(a: ReportArgs) -> anyhow::Result<()> {
    let rows = read_results_csv(&a.results)?;
    let cells = summarize_rows(&rows);
    if let Some(out) = &a.out {
        write_summary_csv(&cells, out)?;
    }
    print_summary(&cells);
    Ok(())
}

/// 2 config or usage, 3 generation, 4 divergence, 1 anything else.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(
            Error::InvalidArgument(_) | Error::Format { .. } | Error::Json(_) | Error::Csv(_) | Error::Io { .. },
        ) => 2,
        Some(Error::GenerationFailed { .. } | Error::CnsUnobtainable { .. }) => 3,
        Some(Error::Divergence { .. }) => 4,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Damage(a) => cmd_damage(a),
        Command::Pretrain(a) => cmd_pretrain(a),
        Command::Plan(a) => cmd_plan(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Experiment(a) => cmd_experiment(a),
        Command::Report(a) => cmd_report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
