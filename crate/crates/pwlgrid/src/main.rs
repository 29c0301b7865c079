use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use pwlgrid::config::ExperimentConfig;
use pwlgrid::experiment::{emit_reports, parse_scenario_csv, run_experiment, tally_table};
use pwlgrid::pipeline::{self, WallClock};
use pwlgrid::{formats, mps};
use pwlgrid_core::acopf::SlpConfig;
use pwlgrid_core::compress::{BoundLevel, CompressConfig};
use pwlgrid_core::data::SamplerConfig;
use pwlgrid_core::grid::Network;
use pwlgrid_core::instance::UcInstance;
use pwlgrid_core::jacobian::LinearPfModel;
use pwlgrid_core::lp::{solve_milp, MilpConfig};
use pwlgrid_core::nn::{evaluate_model, TrainConfig};
use pwlgrid_core::uc::{extract_schedule, Formulation};

#[derive(Parser)]
#[command(name = "pwlgrid", version, about = "Piecewise-linear power flow surrogates for AC unit commitment")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Collect feasible AC power flow samples.
    Sample(SampleArgs),
    /// Train a compact piecewise-linear model.
    Train(TrainArgs),
    /// Sparsify, bound and prune a trained model.
    Compress(CompressArgs),
    /// Build a UC model and print or export it.
    Build(BuildArgs),
    /// Solve a UC model and write the schedule.
    Solve(SolveArgs),
    /// Check a schedule with the multi-period AC-OPF.
    VerifySchedule(VerifyArgs),
    /// Run a configured scenario sweep.
    Experiment(ExperimentArgs),
    /// Re-emit report files from a per-scenario CSV.
    Report(ReportArgs),
}

#[derive(Args, Clone)]
struct InputArgs {
    /// MATPOWER case file.
    #[arg(long)]
    case: PathBuf,
    /// UC data file (TOML).
    #[arg(long)]
    uc: PathBuf,
    /// Thermal derate: limits are scaled by 1 - derate.
    #[arg(long, default_value_t = 0.0)]
    derate: f64,
}

#[derive(Args, Clone)]
struct HorizonArgs {
    /// Comma-separated 0-based periods kept for the UC horizon.
    #[arg(long, value_delimiter = ',')]
    periods: Option<Vec<usize>>,
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 2)]
    outage_samples: usize,
    #[arg(long, default_value_t = 0.8)]
    train_fraction: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Dataset written by `sample`.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 8)]
    rho: usize,
    #[arg(long, default_value_t = 100_000)]
    steps: usize,
    #[arg(long, default_value_t = 1e-2)]
    learning_rate: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Also write the linearization (J*, r*) with row and column labels.
    #[arg(long)]
    dump_jacobian: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum BoundMode {
    Interval,
    Lp,
    Milp,
}

#[derive(Args)]
struct CompressArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long, value_enum, default_value_t = BoundMode::Lp)]
    bound_mode: BoundMode,
    /// Zero fraction per weight matrix; 0 skips sparsification.
    #[arg(long, default_value_t = 0.25)]
    sparsity: f64,
    #[arg(long, default_value_t = 10_000)]
    retrain_steps: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormulationArg {
    Nn,
    Linear,
    Dc,
}

impl From<FormulationArg> for Formulation {
    fn from(f: FormulationArg) -> Self {
        match f {
            FormulationArg::Nn => Formulation::Nn,
            FormulationArg::Linear => Formulation::Linear,
            FormulationArg::Dc => Formulation::Dc,
        }
    }
}

#[derive(Args)]
struct ModelArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    horizon: HorizonArgs,
    #[arg(long, value_enum)]
    formulation: FormulationArg,
    /// Compressed model (required for `nn`).
    #[arg(long)]
    model: Option<PathBuf>,
}

#[derive(Args)]
struct BuildArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Print variable, binary, constraint and nonzero counts.
    #[arg(long)]
    stats: bool,
    /// Write the model as MPS.
    #[arg(long)]
    mps: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Engine {
    Internal,
    Export,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_enum, default_value_t = Engine::Internal)]
    engine: Engine,
    #[arg(long, default_value_t = 0.01)]
    gap: f64,
    #[arg(long, default_value_t = 600.0)]
    time_limit: f64,
    /// MPS output for the export engine.
    #[arg(long)]
    mps: Option<PathBuf>,
    /// External solution (`name value` lines) to import with the export engine.
    #[arg(long)]
    solution: Option<PathBuf>,
    /// Schedule output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    horizon: HorizonArgs,
    #[arg(long)]
    schedule: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Worker threads.
    #[arg(long, env = "PWLGRID_WORKERS", default_value_t = 1)]
    workers: usize,
}

#[derive(Args)]
struct ReportArgs {
    /// Per-scenario CSV written by `experiment`.
    #[arg(long)]
    scenarios: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

struct Loaded {
    net: Network,
    full: UcInstance,
    inst: UcInstance,
}

fn load(input: &InputArgs, periods: Option<&[usize]>) -> Result<Loaded> {
    let case = pipeline::load_case(&input.case, input.derate)?;
    let net = Network::build(&case)?;
    let full = pipeline::load_instance(&input.uc, &case, None)?;
    let inst = match periods {
        Some(p) => full.subsample(p)?,
        None => full.clone(),
    };
    Ok(Loaded { net, full, inst })
}

fn linear_model(l: &Loaded) -> Result<LinearPfModel> {
    pipeline::linearization_point(&l.net, &l.full, &SlpConfig::default())
}

fn sample(a: SampleArgs) -> Result<()> {
    let l = load(&a.input, None)?;
    let cfg = SamplerConfig {
        outage_samples_per_unit: a.outage_samples,
        train_fraction: a.train_fraction,
        ..SamplerConfig::default()
    };
    let (ds, stats) = pipeline::sample_dataset(&l.net, &l.full, &cfg, a.seed, pipeline::workers())?;
    write(&a.out, &formats::write_dataset(&ds))?;
    println!(
        "{} samples ({} attempted, {} rejected, {} failed)",
        ds.len(),
        stats.attempted,
        stats.rejected,
        stats.failed
    );
    Ok(())
}

fn train(a: TrainArgs) -> Result<()> {
    let l = load(&a.input, None)?;
    let ds = formats::read_dataset(&read(&a.data)?)?;
    ds.validate(&l.net)?;
    let lin = linear_model(&l)?;
    if let Some(p) = &a.dump_jacobian {
        write(p, &formats::write_jacobian(&l.net, &lin))?;
    }
    let cfg = TrainConfig {
        steps: a.steps,
        learning_rate: a.learning_rate,
        seed: a.seed,
        ..TrainConfig::default()
    };
    let (model, curve) = pipeline::train_model(&ds, &lin, a.rho, &cfg)?;
    write(&a.out, &formats::write_model(&model))?;
    let stats = evaluate_model(&model, None, &ds, None)?;
    println!(
        "final loss {:e}; mean L1 error {:.6} (linear {:.6})",
        curve.last().map_or(f64::NAN, |c| c.1),
        stats.mean_compact,
        stats.mean_linear
    );
    Ok(())
}

fn compress_cmd(a: CompressArgs) -> Result<()> {
    let l = load(&a.input, None)?;
    let ds = formats::read_dataset(&read(&a.data)?)?;
    let model = formats::read_model(&read(&a.model)?)?;
    let defaults = CompressConfig::default();
    let cfg = CompressConfig {
        sparsity: (a.sparsity > 0.0).then_some(a.sparsity),
        retrain: TrainConfig {
            steps: a.retrain_steps,
            learning_rate: 1e-2,
            ..defaults.retrain
        },
        level: match a.bound_mode {
            BoundMode::Interval => BoundLevel::Interval,
            BoundMode::Lp => BoundLevel::Lp,
            BoundMode::Milp => BoundLevel::Milp,
        },
        tighten: defaults.tighten,
    };
    let bbox = pipeline::bound_box(&l.net, &l.full);
    let (out, rep) = pipeline::compress_model(&model, &ds, &bbox, &cfg)?;
    write(&a.out, &formats::write_model(&out))?;
    println!(
        "free ReLUs {} -> {}; lp tightened {}; zero weights {:.3}",
        rep.free_initial,
        rep.free_final,
        rep.tightened_by_lp,
        out.zero_fraction()
    );
    Ok(())
}

fn build_model(m: &ModelArgs) -> Result<(Loaded, pwlgrid_core::uc::UcModel)> {
    let l = load(&m.input, m.horizon.periods.as_deref())?;
    let f: Formulation = m.formulation.into();
    let lin = match f {
        Formulation::Dc => None,
        _ => Some(linear_model(&l)?),
    };
    let model = match (&m.model, f) {
        (Some(p), Formulation::Nn) => Some(formats::read_model(&read(p)?)?),
        (None, Formulation::Nn) => bail!("--model is required for the nn formulation"),
        _ => None,
    };
    let lin = match (lin, &model) {
        (_, Some(nn)) => nn.linear.clone(),
        (Some(lin), None) => lin,
        (None, None) => linear_placeholder(&l.net),
    };
    let uc = pipeline::build_formulation(f, &l.inst, &l.net, &lin, model.as_ref())?;
    for w in &uc.warnings {
        log::warn!("{w}");
    }
    Ok((l, uc))
}

/// The DC formulation ignores the linear model; any correctly sized one will do.
fn linear_placeholder(net: &Network) -> LinearPfModel {
    LinearPfModel {
        jstar: pwlgrid_core::linalg::Matrix::zeros(net.output_dim(), net.input_dim()),
        rstar: vec![0.0; net.output_dim()],
        x0: vec![0.0; net.input_dim()],
        net_id: pwlgrid_core::jacobian::network_tag(net),
    }
}

fn build(a: BuildArgs) -> Result<()> {
    let (_, uc) = build_model(&a.model)?;
    if a.stats {
        let s = uc.milp.stats();
        println!("variables       {}", s.variables);
        println!("binaries        {}", s.binaries);
        println!("  relu          {}", s.relu_binaries);
        println!("  commitment    {}", s.commitment_binaries);
        println!("constraints     {}", s.constraints);
        println!("nonzeros        {}", s.nonzeros);
    }
    if let Some(p) = &a.mps {
        write(p, &mps::export_mps(&uc.milp)?)?;
    }
    Ok(())
}

fn solve(a: SolveArgs) -> Result<()> {
    let (l, uc) = build_model(&a.model)?;
    let (x, obj) = match a.engine {
        Engine::Internal => {
            let cfg = MilpConfig {
                gap: a.gap,
                time_limit_secs: a.time_limit,
                ..MilpConfig::default()
            };
            let sol = solve_milp(&uc.milp, &cfg, &WallClock::start())?;
            println!(
                "status {:?}; objective {}; bound {}; gap {:.4}; nodes {}; {:.1} s",
                sol.status, sol.objective, sol.best_bound, sol.gap, sol.nodes, sol.wall_secs
            );
            if sol.x.is_empty() {
                bail!("no feasible schedule found");
            }
            (sol.x, sol.objective)
        }
        Engine::Export => match (&a.solution, &a.mps) {
            (Some(sol), _) => {
                let s = mps::import_solution(&read(sol)?, &uc.milp)?;
                println!("imported objective {}", s.objective);
                (s.x, s.objective)
            }
            (None, Some(p)) => {
                write(p, &mps::export_mps(&uc.milp)?)?;
                println!("wrote {}; solve it externally and pass --solution", p.display());
                return Ok(());
            }
            (None, None) => bail!("the export engine needs --mps or --solution"),
        },
    };
    let sched = extract_schedule(&l.inst, &uc, &x, obj)?;
    match &a.out {
        Some(p) => write(p, &formats::write_schedule(&sched))?,
        None => print!("{}", formats::write_schedule(&sched)),
    }
    Ok(())
}

fn verify(a: VerifyArgs) -> Result<()> {
    let l = load(&a.input, a.horizon.periods.as_deref())?;
    let sched = formats::read_schedule(&read(&a.schedule)?)?;
    let rep = pipeline::verify_schedule(&l.net, &l.inst, &sched, &SlpConfig::default())?;
    let text = formats::write_report(&rep);
    match &a.out {
        Some(p) => write(p, &text)?,
        None => print!("{text}"),
    }
    println!("verdict {}", rep.verdict.label());
    Ok(())
}

fn experiment(a: ExperimentArgs) -> Result<()> {
    let cfg = ExperimentConfig::load(&a.config)?;
    info!("running {} with {} worker(s)", a.config.display(), a.workers);
    let report = run_experiment(&cfg, a.workers.max(1))?;
    emit_reports(&report, &a.out)?;
    print!("{}", tally_table(&report));
    Ok(())
}

fn report(a: ReportArgs) -> Result<()> {
    let r = parse_scenario_csv(&read(&a.scenarios)?)?;
    emit_reports(&r, &a.out)?;
    print!("{}", tally_table(&r));
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Sample(a) => sample(a),
        Command::Train(a) => train(a),
        Command::Compress(a) => compress_cmd(a),
        Command::Build(a) => build(a),
        Command::Solve(a) => solve(a),
        Command::VerifySchedule(a) => verify(a),
        Command::Experiment(a) => experiment(a),
        Command::Report(a) => report(a),
    }
    .map_err(|e| anyhow!("{e:#}"))
}
