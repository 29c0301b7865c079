//! Compression pipeline: bound, prune, sparsify with retraining, re-bound
//! and re-prune.

use crate::data::PfDataset;
use crate::encode::{interval_bounds, prune, tighten_bounds, BigMBounds, BoundBox, TightenConfig, TightenMode};
use crate::error::{Error, Result};
use crate::nn::{sparsify_retrain, CompactPwlModel, SparsifyReport, TrainConfig};
use crate::Stopwatch;

/// Strongest bound computation applied after sparsification.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundLevel {
    Interval,
    Lp,
    Milp,
}

impl BoundLevel {
    pub fn label(self) -> &'static str {
        match self {
            BoundLevel::Interval => "interval",
            BoundLevel::Lp => "lp",
            BoundLevel::Milp => "milp",
        }
    }

    pub fn parse(s: &str) -> Option<BoundLevel> {
        [BoundLevel::Interval, BoundLevel::Lp, BoundLevel::Milp]
            .into_iter()
            .find(|l| l.label() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompressConfig {
    /// Fraction of each weight matrix pinned to zero; `None` skips the
    /// sparsify-retrain stage.
    pub sparsity: Option<f64>,
    pub retrain: TrainConfig,
    pub level: BoundLevel,
    pub tighten: TightenConfig,
}

impl Default for CompressConfig {
    fn default() -> Self {
        CompressConfig {
            sparsity: Some(0.25),
            retrain: TrainConfig {
                steps: 10_000,
                ..TrainConfig::default()
            },
            level: BoundLevel::Lp,
            tighten: TightenConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompressReport {
    /// Free ReLUs after the first interval pass.
    pub free_initial: usize,
    pub sparsify: Option<SparsifyReport>,
    pub interval: BigMBounds,
    pub lp: Option<BigMBounds>,
    pub milp: Option<BigMBounds>,
    /// ReLUs whose lp interval is strictly inside the interval-arithmetic one.
    pub tightened_by_lp: usize,
    pub free_final: usize,
}

/// Run the pipeline and return the compressed model with its final pruned
/// bounds attached.
pub fn compress(
    model: &CompactPwlModel,
    ds: &PfDataset,
    bbox: &BoundBox,
    cfg: &CompressConfig,
    clock: &dyn Stopwatch,
) -> Result<(CompactPwlModel, CompressReport)> {
    model.validate()?;
    let first = prune(&interval_bounds(model, bbox)?);
    let free_initial = first.free_count();

    let (mut current, sparsify) = match cfg.sparsity {
        Some(target) => {
            if ds.is_empty() {
                return Err(Error::validation("sparsify-retrain needs a dataset"));
            }
            let (m, rep) = sparsify_retrain(model, ds, target, &cfg.retrain, clock)?;
            (m, Some(rep))
        }
        None => (model.clone(), None),
    };

    let interval = interval_bounds(&current, bbox)?;
    let lp = match cfg.level {
        BoundLevel::Interval => None,
        _ => Some(tighten_bounds(&current, bbox, &interval, TightenMode::Lp, &cfg.tighten, clock)?),
    };
    let milp = match (cfg.level, &lp) {
        (BoundLevel::Milp, Some(start)) => {
            Some(tighten_bounds(&current, bbox, &prune(start), TightenMode::Milp, &cfg.tighten, clock)?)
        }
        _ => None,
    };
    let tightened_by_lp = lp.as_ref().map_or(0, |l| {
        (0..l.len())
            .filter(|&i| l.mmin[i] > interval.mmin[i] || l.mmax[i] < interval.mmax[i])
            .count()
    });
    let last = milp.as_ref().or(lp.as_ref()).unwrap_or(&interval);
    let pruned = prune(last);
    let free_final = pruned.free_count();
    current.bounds = Some(pruned);
    Ok((
        current,
        CompressReport {
            free_initial,
            sparsify,
            interval,
            lp,
            milp,
            tightened_by_lp,
            free_final,
        },
    ))
}
