//! Scenario sweeps: build, solve and verify every formulation under load
//! alterations, then tally verdicts and flow errors.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use log::{info, warn};
use pwlgrid_core::acopf::{SlpConfig, Verdict};
use pwlgrid_core::data::{LoadScheme, PfDataset};
use pwlgrid_core::grid::Network;
use pwlgrid_core::instance::UcInstance;
use pwlgrid_core::jacobian::LinearPfModel;
use pwlgrid_core::lp::{MilpConfig, MilpStatus};
use pwlgrid_core::nn::CompactPwlModel;
use pwlgrid_core::uc::Formulation;

use crate::config::ExperimentConfig;
use crate::pipeline::{self, parallel_map};
use crate::FormatError;

/// One load scenario. `scheme` is `None` for the unaltered base loads.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub kind: String,
    pub index: usize,
    pub scheme: Option<LoadScheme>,
}

/// Outcome of one (scenario, formulation) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub kind: String,
    pub index: usize,
    pub formulation: Formulation,
    /// `optimal`, `gap`, `budget`, `infeasible` or `error`.
    pub uc_status: String,
    pub verdict: Verdict,
    pub uc_objective: Option<f64>,
    pub gap: Option<f64>,
    pub acopf_objective: Option<f64>,
    /// Mean over periods of the from-side and to-side flow errors (p.u.).
    pub flow_ft: Option<f64>,
    pub flow_tf: Option<f64>,
    pub message: String,
}

impl CellResult {
    /// Mean of the two directional flow errors.
    pub fn flow_error(&self) -> Option<f64> {
        Some(0.5 * (self.flow_ft? + self.flow_tf?))
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentReport {
    pub formulations: Vec<Formulation>,
    pub cells: Vec<CellResult>,
}

/// Verdict counts `[feasible, infeasible, no_solution]` for one formulation.
pub type Tally = [usize; 3];

impl ExperimentReport {
    pub fn tally(&self) -> Vec<(Formulation, Tally)> {
        self.formulations
            .iter()
            .map(|&f| {
                let mut t = [0; 3];
                for c in self.cells.iter().filter(|c| c.formulation == f) {
                    t[match c.verdict {
                        Verdict::Feasible => 0,
                        Verdict::Infeasible => 1,
                        Verdict::NoSolution => 2,
                    }] += 1;
                }
                (f, t)
            })
            .collect()
    }

    /// Scenarios where both nn and linear are feasible, paired as
    /// `(kind, index, nn error, linear error)`.
    pub fn flow_pairs(&self) -> Vec<(String, usize, f64, f64)> {
        let find = |f: Formulation, kind: &str, index: usize| {
            self.cells
                .iter()
                .find(|c| c.formulation == f && c.kind == kind && c.index == index)
                .and_then(CellResult::flow_error)
        };
        let mut out = Vec::new();
        for c in self.cells.iter().filter(|c| c.formulation == Formulation::Nn) {
            if let (Some(a), Some(b)) = (find(Formulation::Nn, &c.kind, c.index), find(Formulation::Linear, &c.kind, c.index)) {
                out.push((c.kind.clone(), c.index, a, b));
            }
        }
        out
    }
}

/// Scenarios for a configuration: the base loads when no scheme is listed,
/// otherwise `count` seeded draws per scheme.
pub fn scenarios(cfg: &ExperimentConfig, buses: usize) -> Result<Vec<Scenario>> {
    if cfg.schemes.is_empty() {
        return Ok(vec![Scenario {
            kind: "base".into(),
            index: 0,
            scheme: None,
        }]);
    }
    let mut out = Vec::new();
    for (k, s) in cfg.schemes.iter().enumerate() {
        let seed = cfg.seed.wrapping_mul(31).wrapping_add(k as u64 + 1);
        for (index, scheme) in LoadScheme::draw(&s.kind, buses, s.count, seed)?.into_iter().enumerate() {
            out.push(Scenario {
                kind: s.kind.clone(),
                index,
                scheme: Some(scheme),
            });
        }
    }
    Ok(out)
}

/// Inputs shared by every scenario. Models that failed to build are absent
/// and their formulations report `no_solution`.
pub struct Prepared {
    pub net: Network,
    pub inst: UcInstance,
    pub linear: Result<LinearPfModel, String>,
    pub model: Result<CompactPwlModel, String>,
    pub dataset: Option<PfDataset>,
}

/// Load inputs, sample, linearize, train and compress.
pub fn prepare(cfg: &ExperimentConfig, workers: usize) -> Result<Prepared> {
    let case = pipeline::load_case(&cfg.case, cfg.derate)?;
    let net = Network::build(&case)?;
    let full = pipeline::load_instance(&cfg.uc, &case, None)?;
    let inst = match &cfg.periods {
        Some(p) => full.subsample(p)?,
        None => full.clone(),
    };
    let slp = cfg.slp_config();
    let linear = pipeline::linearization_point(&net, &full, &slp).map_err(|e| format!("{e:#}"));
    let needs_nn = cfg.formulation_list()?.contains(&Formulation::Nn);
    let mut dataset = None;
    let model = match (&linear, needs_nn) {
        (_, false) => Err("nn formulation not requested".to_string()),
        (Err(e), true) => Err(e.clone()),
        (Ok(lin), true) => (|| -> Result<CompactPwlModel> {
            let (ds, stats) = pipeline::sample_dataset(&net, &full, &cfg.sampler_config(), cfg.seed, workers)?;
            info!("sampled {} rows ({} rejected, {} failed)", ds.len(), stats.rejected, stats.failed);
            let (model, _) = pipeline::train_model(&ds, lin, cfg.rho, &cfg.train_config())?;
            let bbox = pipeline::bound_box(&net, &full);
            let (model, rep) = pipeline::compress_model(&model, &ds, &bbox, &cfg.compress_config())?;
            info!("compressed: {} of {} ReLUs free", rep.free_final, model.rho());
            dataset = Some(ds);
            Ok(model)
        })()
        .map_err(|e| format!("{e:#}")),
    };
    if let Err(e) = &model {
        if needs_nn {
            warn!("nn model unavailable: {e}");
        }
    }
    Ok(Prepared {
        net,
        inst,
        linear,
        model,
        dataset,
    })
}

fn status_label(s: MilpStatus) -> &'static str {
    match s {
        MilpStatus::Optimal => "optimal",
        MilpStatus::GapReached => "gap",
        MilpStatus::BudgetExhausted => "budget",
        MilpStatus::Infeasible => "infeasible",
        MilpStatus::Unbounded => "unbounded",
    }
}

/// Build, solve and verify one cell. Never fails: errors become
/// `no_solution`.
pub fn run_cell(
    prep: &Prepared,
    scenario: &Scenario,
    formulation: Formulation,
    milp: &MilpConfig,
    slp: &SlpConfig,
) -> CellResult {
    let mut cell = CellResult {
        kind: scenario.kind.clone(),
        index: scenario.index,
        formulation,
        uc_status: "error".into(),
        verdict: Verdict::NoSolution,
        uc_objective: None,
        gap: None,
        acopf_objective: None,
        flow_ft: None,
        flow_tf: None,
        message: String::new(),
    };
    let outcome = (|| -> Result<()> {
        let inst = pipeline::scenario_instance(&prep.inst, scenario.scheme.as_ref())?;
        let lin = prep.linear.as_ref().map_err(|e| anyhow!("linear model: {e}"))?;
        let model = match formulation {
            Formulation::Nn => Some(prep.model.as_ref().map_err(|e| anyhow!("nn model: {e}"))?),
            _ => None,
        };
        let uc = pipeline::build_formulation(formulation, &inst, &prep.net, lin, model)?;
        let sol = pwlgrid_core::lp::solve_milp(&uc.milp, milp, &pipeline::WallClock::start())?;
        cell.uc_status = status_label(sol.status).into();
        if sol.x.is_empty() {
            return Err(anyhow!("UC solve ended with {:?}", sol.status));
        }
        cell.uc_objective = Some(sol.objective);
        cell.gap = Some(sol.gap);
        let sched = pwlgrid_core::uc::extract_schedule(&inst, &uc, &sol.x, sol.objective)?;
        let rep = pipeline::verify_schedule(&prep.net, &inst, &sched, slp)?;
        cell.verdict = rep.verdict;
        cell.message = rep.message.clone();
        if rep.verdict == Verdict::Feasible {
            cell.acopf_objective = Some(rep.objective);
            if formulation != Formulation::Dc {
                if let Some((ft, tf)) = pipeline::flow_errors(&sched, &rep) {
                    cell.flow_ft = Some(ft);
                    cell.flow_tf = Some(tf);
                }
            }
        }
        Ok(())
    })();
    if let Err(e) = outcome {
        cell.verdict = Verdict::NoSolution;
        cell.message = format!("{e:#}");
    }
    cell
}

/// Run every (scenario, formulation) cell on `workers` threads. Cells are
/// reported in scenario order, then formulation order.
pub fn run_scenarios(
    prep: &Prepared,
    scenarios: &[Scenario],
    formulations: &[Formulation],
    milp: &MilpConfig,
    slp: &SlpConfig,
    workers: usize,
) -> ExperimentReport {
    let jobs: Vec<(&Scenario, Formulation)> = scenarios
        .iter()
        .flat_map(|s| formulations.iter().map(move |&f| (s, f)))
        .collect();
    let cells = parallel_map(&jobs, workers, |(s, f)| {
        let c = run_cell(prep, s, *f, milp, slp);
        info!("{} #{} {}: {} / {}", c.kind, c.index, f.label(), c.uc_status, c.verdict.label());
        c
    });
    ExperimentReport {
        formulations: formulations.to_vec(),
        cells,
    }
}

/// Full sweep for a configuration.
pub fn run_experiment(cfg: &ExperimentConfig, workers: usize) -> Result<ExperimentReport> {
    let prep = prepare(cfg, workers)?;
    let list = scenarios(cfg, prep.net.n)?;
    Ok(run_scenarios(
        &prep,
        &list,
        &cfg.formulation_list()?,
        &cfg.milp_config(),
        &cfg.slp_config(),
        workers,
    ))
}

const SCENARIO_HEADER: &str =
    "scheme,index,formulation,uc_status,verdict,uc_objective,gap,acopf_objective,flow_err_ft,flow_err_tf";
const FLOW_HEADER: &str = "scheme,index,formulation,flow_err_ft,flow_err_tf,flow_err_mean";

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

/// Verdict counts per formulation as an aligned text table.
pub fn tally_table(report: &ExperimentReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<12}{:>10}{:>12}{:>13}{:>8}", "formulation", "feasible", "infeasible", "no_solution", "total");
    for (f, t) in report.tally() {
        let _ = writeln!(
            s,
            "{:<12}{:>10}{:>12}{:>13}{:>8}",
            f.label(),
            t[0],
            t[1],
            t[2],
            t.iter().sum::<usize>()
        );
    }
    s
}

/// Per-cell CSV with the columns of `SCENARIO_HEADER`.
pub fn scenario_csv(report: &ExperimentReport) -> String {
    let mut s = String::from(SCENARIO_HEADER);
    s.push('\n');
    for c in &report.cells {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            c.kind,
            c.index,
            c.formulation.label(),
            c.uc_status,
            c.verdict.label(),
            opt(c.uc_objective),
            opt(c.gap),
            opt(c.acopf_objective),
            opt(c.flow_ft),
            opt(c.flow_tf)
        );
    }
    s
}

/// Flow errors of every feasible nn and linear cell.
pub fn flow_csv(report: &ExperimentReport) -> String {
    let mut s = String::from(FLOW_HEADER);
    s.push('\n');
    for c in &report.cells {
        if let (Some(ft), Some(tf), Some(mean)) = (c.flow_ft, c.flow_tf, c.flow_error()) {
            let _ = writeln!(s, "{},{},{},{},{},{}", c.kind, c.index, c.formulation.label(), ft, tf, mean);
        }
    }
    s
}

/// Parse a CSV written by [`scenario_csv`].
pub fn parse_scenario_csv(text: &str) -> Result<ExperimentReport, FormatError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == SCENARIO_HEADER => {}
        _ => return Err(FormatError::at(1, "missing scenario CSV header")),
    }
    let mut report = ExperimentReport::default();
    for (k, line) in lines {
        let ln = k + 1;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 10 {
            return Err(FormatError::at(ln, format!("expected 10 fields, found {}", f.len())));
        }
        let num = |s: &str| -> Result<Option<f64>, FormatError> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| FormatError::at(ln, format!("invalid number {s:?}")))
            }
        };
        let formulation =
            Formulation::parse(f[2]).ok_or_else(|| FormatError::at(ln, format!("unknown formulation {}", f[2])))?;
        let verdict = [Verdict::Feasible, Verdict::Infeasible, Verdict::NoSolution]
            .into_iter()
            .find(|v| v.label() == f[4])
            .ok_or_else(|| FormatError::at(ln, format!("unknown verdict {}", f[4])))?;
        if !report.formulations.contains(&formulation) {
            report.formulations.push(formulation);
        }
        report.cells.push(CellResult {
            kind: f[0].to_string(),
            index: f[1].parse().map_err(|_| FormatError::at(ln, "invalid index"))?,
            formulation,
            uc_status: f[3].to_string(),
            verdict,
            uc_objective: num(f[5])?,
            gap: num(f[6])?,
            acopf_objective: num(f[7])?,
            flow_ft: num(f[8])?,
            flow_tf: num(f[9])?,
            message: String::new(),
        });
    }
    report.formulations.sort_by_key(|f| Formulation::ALL.iter().position(|g| g == f));
    Ok(report)
}

/// Paths of the three report files inside `dir`.
pub fn report_paths(dir: &Path) -> [PathBuf; 3] {
    [dir.join("tally.txt"), dir.join("scenarios.csv"), dir.join("flow_errors.csv")]
}

/// Write the tally table, the per-scenario CSV and the flow-error CSV.
pub fn emit_reports(report: &ExperimentReport, dir: &Path) -> Result<[PathBuf; 3]> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let paths = report_paths(dir);
    let bodies = [tally_table(report), scenario_csv(report), flow_csv(report)];
    for (p, b) in paths.iter().zip(bodies) {
        std::fs::write(p, b).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(kind: &str, index: usize, f: Formulation, verdict: Verdict, flows: Option<(f64, f64)>) -> CellResult {
        CellResult {
            kind: kind.into(),
            index,
            formulation: f,
            uc_status: "gap".into(),
            verdict,
            uc_objective: Some(100.5),
            gap: Some(0.004),
            acopf_objective: (verdict == Verdict::Feasible).then_some(101.25),
            flow_ft: flows.map(|f| f.0),
            flow_tf: flows.map(|f| f.1),
            message: String::new(),
        }
    }

    fn sample_report() -> ExperimentReport {
        ExperimentReport {
            formulations: Formulation::ALL.to_vec(),
            cells: vec![
                cell("uniform", 0, Formulation::Nn, Verdict::Feasible, Some((0.1, 0.3))),
                cell("uniform", 0, Formulation::Linear, Verdict::Feasible, Some((0.3, 0.5))),
                cell("uniform", 0, Formulation::Dc, Verdict::Infeasible, None),
                cell("uniform", 1, Formulation::Nn, Verdict::Feasible, Some((0.2, 0.2))),
                cell("uniform", 1, Formulation::Linear, Verdict::NoSolution, None),
                cell("uniform", 1, Formulation::Dc, Verdict::Feasible, None),
            ],
        }
    }

    #[test]
    fn tallies_are_conserved() {
        let r = sample_report();
        let t = r.tally();
        assert_eq!(t[0], (Formulation::Nn, [2, 0, 0]));
        assert_eq!(t[1], (Formulation::Linear, [1, 0, 1]));
        assert_eq!(t[2], (Formulation::Dc, [1, 1, 0]));
        assert!(tally_table(&r).lines().count() == 4);
    }

    #[test]
    fn flow_pairs_need_both_formulations_feasible() {
        let pairs = sample_report().flow_pairs();
        assert_eq!(pairs.len(), 1);
        assert!((pairs[0].2 - 0.2).abs() < 1e-15 && (pairs[0].3 - 0.4).abs() < 1e-15);
    }

    #[test]
    fn empty_report_gives_header_only_csv() {
        let r = ExperimentReport::default();
        assert_eq!(scenario_csv(&r), format!("{SCENARIO_HEADER}\n"));
        assert_eq!(flow_csv(&r), format!("{FLOW_HEADER}\n"));
    }

    #[test]
    fn csv_round_trip_and_idempotent_emission() {
        let r = sample_report();
        let back = parse_scenario_csv(&scenario_csv(&r)).unwrap();
        assert_eq!(scenario_csv(&back), scenario_csv(&r));
        assert_eq!(back.tally(), r.tally());
        let dir = tempfile::tempdir().unwrap();
        let paths = emit_reports(&r, dir.path()).unwrap();
        let first: Vec<Vec<u8>> = paths.iter().map(|p| std::fs::read(p).unwrap()).collect();
        emit_reports(&back, dir.path()).unwrap();
        let second: Vec<Vec<u8>> = paths.iter().map(|p| std::fs::read(p).unwrap()).collect();
        assert_eq!(first, second);
        assert_eq!(flow_csv(&r).lines().count(), 4);
    }

    #[test]
    fn bad_csv_is_rejected() {
        assert!(parse_scenario_csv("nope\n").is_err());
        let text = format!("{SCENARIO_HEADER}\nuniform,0,ac,gap,feasible,,,,,\n");
        assert!(matches!(parse_scenario_csv(&text), Err(FormatError::Parse { line: 2, .. })));
    }
}
