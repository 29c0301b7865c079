//! Stage functions shared by the command-line tool and the experiment
//! harness: loading inputs, parallel sampling, linearization, training,
//! compression, model building and schedule verification.

use std::path::Path;
use std::time::Instant;

use anyhow::{anyhow, Context, Result};
use pwlgrid_core::acopf::{mtp_acopf_check, slp_acopf, DispatchSpec, FeasibilityReport, OpfObjective, SlpConfig, Verdict};
use pwlgrid_core::case::RawCase;
use pwlgrid_core::compress::{compress, CompressConfig, CompressReport};
use pwlgrid_core::data::{assemble_dataset, sample_tasks, solve_task, LoadScheme, PfDataset, SamplerConfig, SamplingStats, LOAD_ENVELOPE};
use pwlgrid_core::encode::BoundBox;
use pwlgrid_core::grid::Network;
use pwlgrid_core::instance::UcInstance;
use pwlgrid_core::jacobian::{linearize, LinearPfModel};
use pwlgrid_core::lp::{solve_milp, MilpConfig, MilpSolution, MilpStatus};
use pwlgrid_core::nn::{train_compact, CompactPwlModel, TrainConfig, TrainingCurve};
use pwlgrid_core::schedule::UcSchedule;
use pwlgrid_core::uc::{build_dc_uc, build_l_ac_uc, build_nn_ac_uc, extract_schedule, Formulation, UcModel};
use pwlgrid_core::Stopwatch;

use crate::{matpower, ucfile};

/// Environment variable holding the number of worker threads.
pub const WORKERS_ENV: &str = "PWLGRID_WORKERS";

/// Wall-clock budget measured from construction.
#[derive(Debug, Clone, Copy)]
pub struct WallClock(Instant);

impl WallClock {
    pub fn start() -> WallClock {
        WallClock(Instant::now())
    }
}

impl Stopwatch for WallClock {
    fn elapsed_secs(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

/// Worker count from [`WORKERS_ENV`], defaulting to one.
pub fn workers() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&w| w > 0)
        .unwrap_or(1)
}

/// Apply `f` to every item on up to `workers` threads. Results come back in
/// input order regardless of scheduling.
pub fn parallel_map<T, R, F>(items: &[T], workers: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let workers = workers.max(1).min(items.len().max(1));
    if workers == 1 {
        return items.iter().map(&f).collect();
    }
    let next = std::sync::atomic::AtomicUsize::new(0);
    let mut slots: Vec<Option<R>> = Vec::with_capacity(items.len());
    slots.resize_with(items.len(), || None);
    let done = std::sync::Mutex::new(slots);
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let k = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if k >= items.len() {
                    break;
                }
                let r = f(&items[k]);
                done.lock().expect("worker panicked")[k] = Some(r);
            });
        }
    });
    done.into_inner()
        .expect("worker panicked")
        .into_iter()
        .map(|r| r.expect("every item is processed"))
        .collect()
}

pub fn read_case(path: &Path) -> Result<RawCase> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    matpower::parse_matpower(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Read a case and apply a thermal derate.
pub fn load_case(path: &Path, derate: f64) -> Result<RawCase> {
    Ok(read_case(path)?.derate_thermal_limits(derate)?)
}

/// Read a UC document and optionally restrict it to `periods`.
pub fn load_instance(path: &Path, case: &RawCase, periods: Option<&[usize]>) -> Result<UcInstance> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let inst = ucfile::load_uc_instance(&text, case).with_context(|| format!("parsing {}", path.display()))?;
    match periods {
        Some(p) => Ok(inst.subsample(p)?),
        None => Ok(inst),
    }
}

/// Collect a dataset on `workers` threads. The result does not depend on
/// the worker count.
pub fn sample_dataset(
    net: &Network,
    inst: &UcInstance,
    cfg: &SamplerConfig,
    seed: u64,
    workers: usize,
) -> Result<(PfDataset, SamplingStats)> {
    let tasks = sample_tasks(inst, cfg, seed);
    let results = parallel_map(&tasks, workers, |task| {
        solve_task(net, inst, task, cfg, &WallClock::start())
    });
    Ok(assemble_dataset(net, results, cfg, seed)?)
}

/// Linear power flow model at the first period's loads with every unit on.
pub fn linearization_point(net: &Network, inst: &UcInstance, slp: &SlpConfig) -> Result<LinearPfModel> {
    let on = vec![true; inst.units.len()];
    let spec = DispatchSpec::for_period(net, inst, 0, &on);
    let rep = slp_acopf(net, &spec, OpfObjective::MinCost, slp, &WallClock::start())?;
    if rep.verdict != Verdict::Feasible {
        return Err(anyhow!("linearization point AC-OPF failed: {}", rep.message));
    }
    Ok(linearize(net, &rep.points[0])?)
}

/// Box used for bounding the network: physical limits plus injection
/// ranges for any load within the scheme envelope.
pub fn bound_box(net: &Network, inst: &UcInstance) -> BoundBox {
    BoundBox::network(net).with_injection_limits(inst, LOAD_ENVELOPE)
}

pub fn train_model(
    ds: &PfDataset,
    lin: &LinearPfModel,
    rho: usize,
    cfg: &TrainConfig,
) -> Result<(CompactPwlModel, TrainingCurve)> {
    Ok(train_compact(ds, lin, rho, cfg, &WallClock::start())?)
}

pub fn compress_model(
    model: &CompactPwlModel,
    ds: &PfDataset,
    bbox: &BoundBox,
    cfg: &CompressConfig,
) -> Result<(CompactPwlModel, CompressReport)> {
    Ok(compress(model, ds, bbox, cfg, &WallClock::start())?)
}

/// Build the UC model for one formulation. The NN formulation requires a
/// compressed model with attached bounds.
pub fn build_formulation(
    formulation: Formulation,
    inst: &UcInstance,
    net: &Network,
    lin: &LinearPfModel,
    model: Option<&CompactPwlModel>,
) -> Result<UcModel> {
    Ok(match formulation {
        Formulation::Nn => {
            let model = model.ok_or_else(|| anyhow!("the nn formulation needs a trained model"))?;
            let bounds = model
                .bounds
                .as_ref()
                .ok_or_else(|| anyhow!("the model has no big-M bounds; run `compress` first"))?;
            build_nn_ac_uc(inst, net, model, bounds)?
        }
        Formulation::Linear => build_l_ac_uc(inst, net, lin)?,
        Formulation::Dc => build_dc_uc(inst, net)?,
    })
}

/// Solve a UC model and extract its schedule.
pub fn solve_uc(inst: &UcInstance, uc: &UcModel, cfg: &MilpConfig) -> Result<(MilpSolution, UcSchedule)> {
    let sol = solve_milp(&uc.milp, cfg, &WallClock::start())?;
    match sol.status {
        MilpStatus::Optimal | MilpStatus::GapReached | MilpStatus::BudgetExhausted if !sol.x.is_empty() => {}
        status => return Err(anyhow!("UC solve ended with {status:?}")),
    }
    let sched = extract_schedule(inst, uc, &sol.x, sol.objective)?;
    Ok((sol, sched))
}

pub fn verify_schedule(
    net: &Network,
    inst: &UcInstance,
    sched: &UcSchedule,
    slp: &SlpConfig,
) -> Result<FeasibilityReport> {
    Ok(mtp_acopf_check(net, inst, sched, slp, &WallClock::start())?)
}

/// Apply a load scheme, treating the identity scheme as a no-op.
pub fn scenario_instance(inst: &UcInstance, scheme: Option<&LoadScheme>) -> Result<UcInstance> {
    match scheme {
        Some(s) => Ok(pwlgrid_core::data::apply_load_scheme(inst, s)?),
        None => Ok(inst.clone()),
    }
}

/// Mean over periods of `‖ŝ − s‖₁` for both flow directions, comparing the
/// schedule's predicted apparent flows against realized ones.
pub fn flow_errors(sched: &UcSchedule, realized: &FeasibilityReport) -> Option<(f64, f64)> {
    let (ft, tf) = (sched.s_ft.as_ref()?, sched.s_tf.as_ref()?);
    if realized.points.len() != ft.len() || ft.is_empty() {
        return None;
    }
    let l1 = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>();
    let periods = ft.len() as f64;
    let e_ft = ft.iter().zip(&realized.points).map(|(s, op)| l1(s, &op.s_ft)).sum::<f64>() / periods;
    let e_tf = tf.iter().zip(&realized.points).map(|(s, op)| l1(s, &op.s_tf)).sum::<f64>() / periods;
    Some((e_ft, e_tf))
}
