//! Power flow datasets sampled from AC-OPF solutions and the load
//! alteration schemes used to build test scenarios.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::acopf::{slp_acopf, DispatchSpec, OpfObjective, SlpConfig, Verdict};
use crate::error::{Error, Result};
use crate::grid::Network;
use crate::instance::UcInstance;
use crate::Stopwatch;

/// Tolerance for the `Y = f(X)` consistency check.
pub const CONSISTENCY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

/// Where a sample came from.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SampleMeta {
    pub hour: u32,
    /// Units switched off for this sample.
    pub off: Vec<usize>,
    pub vmin: Vec<f64>,
    pub vmax: Vec<f64>,
}

/// Rows of surrogate inputs `x` and exact outputs `y = f(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PfDataset {
    pub n: usize,
    pub m: usize,
    pub ref_bus: usize,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<Vec<f64>>,
    pub meta: Vec<SampleMeta>,
    pub split: Vec<Split>,
}

impl PfDataset {
    pub fn empty(net: &Network) -> PfDataset {
        PfDataset {
            n: net.n,
            m: net.m,
            ref_bus: net.ref_bus,
            x: Vec::new(),
            y: Vec::new(),
            meta: Vec::new(),
            split: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        2 * self.n - 1
    }

    pub fn output_dim(&self) -> usize {
        2 * self.n + 2 * self.m
    }

    pub fn indices(&self, split: Split) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.split[i] == split).collect()
    }

    /// Copy of the rows in `split`, all tagged with that split.
    pub fn subset(&self, split: Split) -> PfDataset {
        let idx = self.indices(split);
        PfDataset {
            n: self.n,
            m: self.m,
            ref_bus: self.ref_bus,
            x: idx.iter().map(|&i| self.x[i].clone()).collect(),
            y: idx.iter().map(|&i| self.y[i].clone()).collect(),
            meta: idx.iter().map(|&i| self.meta[i].clone()).collect(),
            split: vec![split; idx.len()],
        }
    }

    /// Shape checks plus re-evaluation of every row against `net`.
    pub fn validate(&self, net: &Network) -> Result<()> {
        if (self.n, self.m, self.ref_bus) != (net.n, net.m, net.ref_bus) {
            return Err(Error::validation("dataset was collected on a different network"));
        }
        let rows = self.len();
        for (what, len) in [("outputs", self.y.len()), ("metadata", self.meta.len()), ("split tags", self.split.len())] {
            crate::error::check_len(what, rows, len)?;
        }
        for (i, (x, y)) in self.x.iter().zip(&self.y).enumerate() {
            crate::error::check_len("sample input", self.input_dim(), x.len())?;
            crate::error::check_len("sample output", self.output_dim(), y.len())?;
            let f = net.eval_packed(x)?;
            let err = f.iter().zip(y).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            if err > CONSISTENCY_TOL {
                return Err(Error::validation(format!(
                    "sample {i} output differs from the power flow by {err:e}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    /// Outage samples drawn per (hour, unit).
    pub outage_samples_per_unit: usize,
    /// Largest number of additional units switched off with each unit.
    pub max_extra_off: usize,
    /// Largest inward push of generator-bus voltage bounds (p.u.).
    pub voltage_push: f64,
    pub train_fraction: f64,
    pub min_samples: usize,
    pub slp: SlpConfig,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            outage_samples_per_unit: 2,
            max_extra_off: 3,
            voltage_push: 0.03,
            train_fraction: 0.8,
            min_samples: 1,
            slp: SlpConfig::default(),
        }
    }
}

/// One AC-OPF solve request. Tasks are independent; each carries its own
/// random stream so results do not depend on execution order.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleTask {
    pub id: usize,
    pub period: usize,
    /// Unit forced off, `None` for the base sample of the hour.
    pub outage: Option<usize>,
    pub seed: u64,
}

/// Enumerate the solve tasks in a fixed order.
pub fn sample_tasks(inst: &UcInstance, cfg: &SamplerConfig, seed: u64) -> Vec<SampleTask> {
    let mut tasks = Vec::new();
    let mut push = |period, outage| {
        let id = tasks.len();
        tasks.push(SampleTask {
            id,
            period,
            outage,
            seed: seed ^ (id as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
        });
    };
    for t in 0..inst.horizon {
        push(t, None);
        for g in 0..inst.units.len() {
            for _ in 0..cfg.outage_samples_per_unit {
                push(t, Some(g));
            }
        }
    }
    tasks
}

/// Run one task. `Ok(None)` means the candidate was rejected as infeasible.
pub fn solve_task(
    net: &Network,
    inst: &UcInstance,
    task: &SampleTask,
    cfg: &SamplerConfig,
    clock: &dyn Stopwatch,
) -> Result<Option<(Vec<f64>, Vec<f64>, SampleMeta)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(task.seed);
    let units = inst.units.len();
    let mut on = vec![true; units];
    let mut off = Vec::new();
    if let Some(g) = task.outage {
        on[g] = false;
        off.push(g);
        let others: Vec<usize> = (0..units).filter(|&k| k != g).collect();
        let extra = rng.random_range(0..=cfg.max_extra_off.min(others.len()));
        for k in sample_indices(&mut rng, others.len(), extra).into_iter() {
            on[others[k]] = false;
            off.push(others[k]);
        }
        off.sort_unstable();
    }
    let mut spec = DispatchSpec::for_period(net, inst, task.period, &on);
    if cfg.voltage_push > 0.0 {
        let mut buses: Vec<usize> = inst.units.iter().map(|u| u.bus).collect();
        buses.sort_unstable();
        buses.dedup();
        for b in buses {
            let up = rng.random_range(0.0..=cfg.voltage_push);
            let down = rng.random_range(0.0..=cfg.voltage_push);
            let (lo, hi) = (spec.vmin[b] + up, spec.vmax[b] - down);
            if lo <= hi {
                spec.vmin[b] = lo;
                spec.vmax[b] = hi;
            }
        }
    }
    let rep = slp_acopf(net, &spec, OpfObjective::MinCost, &cfg.slp, clock)?;
    if rep.verdict != Verdict::Feasible {
        return Ok(None);
    }
    let op = &rep.points[0];
    let meta = SampleMeta {
        hour: inst.hours[task.period],
        off,
        vmin: spec.vmin,
        vmax: spec.vmax,
    };
    Ok(Some((op.pack_input(net)?, op.pack_output(), meta)))
}

/// Rejection counts from a collection run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SamplingStats {
    pub attempted: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub failed: usize,
}

/// Assemble solved tasks (in task order) into a dataset with a seeded
/// train/test split.
pub fn assemble_dataset(
    net: &Network,
    results: Vec<Result<Option<(Vec<f64>, Vec<f64>, SampleMeta)>>>,
    cfg: &SamplerConfig,
    seed: u64,
) -> Result<(PfDataset, SamplingStats)> {
    let mut ds = PfDataset::empty(net);
    let mut stats = SamplingStats {
        attempted: results.len(),
        ..Default::default()
    };
    for r in results {
        match r {
            Ok(Some((x, y, meta))) => {
                ds.x.push(x);
                ds.y.push(y);
                ds.meta.push(meta);
                stats.accepted += 1;
            }
            Ok(None) => stats.rejected += 1,
            Err(_) => stats.failed += 1,
        }
    }
    if ds.len() < cfg.min_samples {
        return Err(Error::NoSolution(format!(
            "collected {} samples, need {} ({} rejected as infeasible, {} solver failures out of {})",
            ds.len(),
            cfg.min_samples,
            stats.rejected,
            stats.failed,
            stats.attempted
        )));
    }
    ds.split = assign_split(ds.len(), cfg.train_fraction, seed);
    Ok((ds, stats))
}

/// Random permutation split: the first `round(fraction·len)` permuted rows
/// train, the rest test.
pub fn assign_split(len: usize, train_fraction: f64, seed: u64) -> Vec<Split> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x51_7c_c1_b7_27_22_0a_95));
    let mut order: Vec<usize> = (0..len).collect();
    rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
    let n_train = crate::math::round(train_fraction.clamp(0.0, 1.0) * len as f64) as usize;
    let mut split = vec![Split::Test; len];
    for &i in &order[..n_train] {
        split[i] = Split::Train;
    }
    split
}

/// Sample feasible power flow solutions for every hour of `inst`,
/// sequentially. See [`sample_tasks`] and [`solve_task`] for a parallel
/// driver.
pub fn collect_dataset(
    net: &Network,
    inst: &UcInstance,
    cfg: &SamplerConfig,
    seed: u64,
    clock: &dyn Stopwatch,
) -> Result<(PfDataset, SamplingStats)> {
    let results = sample_tasks(inst, cfg, seed)
        .iter()
        .map(|t| solve_task(net, inst, t, cfg, clock))
        .collect();
    assemble_dataset(net, results, cfg, seed)
}

/// Largest relative load change any scheme may apply.
pub const LOAD_ENVELOPE: f64 = 0.15;

/// Load alteration applied to every active and reactive load.
#[derive(Debug, Clone, PartialEq)]
pub enum LoadScheme {
    /// All loads times `scale`.
    Uniform { scale: f64 },
    /// Bus `b` times `scales[b]` for every hour.
    PerBus { scales: Vec<f64> },
    /// Hour `h` times `1 + amplitude·sin(2πh/24)`.
    Sinusoidal { amplitude: f64 },
}

impl LoadScheme {
    pub fn kind(&self) -> &'static str {
        match self {
            LoadScheme::Uniform { .. } => "uniform",
            LoadScheme::PerBus { .. } => "per_bus",
            LoadScheme::Sinusoidal { .. } => "sinusoidal",
        }
    }

    /// Draw a scheme of the given kind with parameters uniform over the
    /// envelope.
    pub fn random(kind: &str, buses: usize, rng: &mut impl Rng) -> Result<LoadScheme> {
        let e = LOAD_ENVELOPE;
        Ok(match kind {
            "uniform" => LoadScheme::Uniform {
                scale: rng.random_range(1.0 - e..=1.0 + e),
            },
            "per_bus" => LoadScheme::PerBus {
                scales: (0..buses).map(|_| rng.random_range(1.0 - e..=1.0 + e)).collect(),
            },
            "sinusoidal" => LoadScheme::Sinusoidal {
                amplitude: rng.random_range(-e..=e),
            },
            other => return Err(Error::validation(format!("unknown load scheme `{other}`"))),
        })
    }

    /// `count` schemes of one kind from a seeded stream.
    pub fn draw(kind: &str, buses: usize, count: usize, seed: u64) -> Result<Vec<LoadScheme>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count).map(|_| LoadScheme::random(kind, buses, &mut rng)).collect()
    }

    pub fn validate(&self, buses: usize) -> Result<()> {
        let ok = |f: f64| (f - 1.0).abs() <= LOAD_ENVELOPE + 1e-12;
        let fine = match self {
            LoadScheme::Uniform { scale } => ok(*scale),
            LoadScheme::PerBus { scales } => {
                crate::error::check_len("per-bus scales", buses, scales.len())?;
                scales.iter().all(|s| ok(*s))
            }
            LoadScheme::Sinusoidal { amplitude } => amplitude.abs() <= LOAD_ENVELOPE + 1e-12,
        };
        if fine {
            Ok(())
        } else {
            Err(Error::validation(format!("{} load scheme outside the ±15% envelope", self.kind())))
        }
    }

    /// Multiplier for bus `b` at hour label `hour`.
    pub fn factor(&self, b: usize, hour: u32) -> f64 {
        match self {
            LoadScheme::Uniform { scale } => *scale,
            LoadScheme::PerBus { scales } => scales[b],
            LoadScheme::Sinusoidal { amplitude } => {
                1.0 + amplitude * crate::math::sin(2.0 * core::f64::consts::PI * f64::from(hour) / 24.0)
            }
        }
    }
}

pub fn apply_load_scheme(inst: &UcInstance, scheme: &LoadScheme) -> Result<UcInstance> {
    scheme.validate(inst.bus_count)?;
    let mut out = inst.clone();
    for t in 0..inst.horizon {
        for b in 0..inst.bus_count {
            let f = scheme.factor(b, inst.hours[t]);
            out.pd[t][b] *= f;
            out.qd[t][b] *= f;
        }
    }
    Ok(out)
}
