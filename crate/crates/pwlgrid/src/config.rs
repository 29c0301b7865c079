//! Experiment configuration (TOML).
//!
//! ```toml
//! case = "case14.m"            # relative to the config file
//! uc = "uc14.toml"
//! derate = 0.3                 # thermal limits times 1 - derate
//! periods = [0, 6, 11, 18]     # 0-based hours kept for the UC horizon
//! rho = 8
//! seed = 1
//! formulations = ["nn", "linear", "dc"]
//!
//! [sampler]
//! outage_samples_per_unit = 2
//!
//! [train]
//! steps = 20000
//!
//! [compress]
//! sparsity = 0.25
//! level = "lp"
//!
//! [solver]
//! gap = 0.01
//! time_limit_secs = 600.0
//!
//! [[scheme]]
//! kind = "uniform"             # uniform, per_bus or sinusoidal
//! count = 10
//! ```

use std::path::{Path, PathBuf};

use pwlgrid_core::acopf::SlpConfig;
use pwlgrid_core::compress::{BoundLevel, CompressConfig};
use pwlgrid_core::data::SamplerConfig;
use pwlgrid_core::lp::MilpConfig;
use pwlgrid_core::nn::TrainConfig;
use pwlgrid_core::uc::Formulation;
use serde::{Deserialize, Serialize};

use crate::FormatError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerSection {
    pub outage_samples_per_unit: Option<usize>,
    pub max_extra_off: Option<usize>,
    pub voltage_push: Option<f64>,
    pub train_fraction: Option<f64>,
    pub min_samples: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub steps: Option<usize>,
    pub learning_rate: Option<f64>,
    pub batch_size: Option<usize>,
    pub checkpoint_every: Option<usize>,
    pub time_limit_secs: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompressSection {
    /// Zero fraction per weight matrix; 0 skips sparsification.
    pub sparsity: Option<f64>,
    pub retrain_steps: Option<usize>,
    pub level: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub gap: Option<f64>,
    pub node_limit: Option<usize>,
    pub time_limit_secs: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AcopfSection {
    pub max_iterations: Option<usize>,
    pub time_limit_secs: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSection {
    pub kind: String,
    pub count: usize,
}

/// Parsed and resolved experiment configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub case: PathBuf,
    pub uc: PathBuf,
    #[serde(default)]
    pub derate: f64,
    #[serde(default)]
    pub periods: Option<Vec<usize>>,
    #[serde(default = "default_rho")]
    pub rho: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_formulations")]
    pub formulations: Vec<String>,
    #[serde(default)]
    pub sampler: SamplerSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub compress: CompressSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub acopf: AcopfSection,
    #[serde(default, rename = "scheme")]
    pub schemes: Vec<SchemeSection>,
}

fn default_rho() -> usize {
    8
}

fn default_formulations() -> Vec<String> {
    Formulation::ALL.iter().map(|f| f.label().to_string()).collect()
}

impl ExperimentConfig {
    /// Parse TOML text; relative paths are resolved against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<ExperimentConfig, FormatError> {
        let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| FormatError::Toml(e.to_string()))?;
        cfg.case = base.join(&cfg.case);
        cfg.uc = base.join(&cfg.uc);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<ExperimentConfig, FormatError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| FormatError::Invalid(format!("reading {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        ExperimentConfig::parse(&text, base)
    }

    pub fn validate(&self) -> Result<(), FormatError> {
        let bad = |m: String| Err(FormatError::Invalid(m));
        for p in [&self.case, &self.uc] {
            if !p.exists() {
                return bad(format!("{} does not exist", p.display()));
            }
        }
        if !(0.0..1.0).contains(&self.derate) {
            return bad(format!("derate must lie in [0, 1), got {}", self.derate));
        }
        if self.rho == 0 {
            return bad("rho must be positive".into());
        }
        self.formulation_list()?;
        for s in &self.schemes {
            if !["uniform", "per_bus", "sinusoidal"].contains(&s.kind.as_str()) {
                return bad(format!("unknown load scheme `{}`", s.kind));
            }
        }
        if let Some(level) = &self.compress.level {
            if BoundLevel::parse(level).is_none() {
                return bad(format!("unknown bound level `{level}`"));
            }
        }
        if let Some(s) = self.compress.sparsity {
            if !(0.0..1.0).contains(&s) {
                return bad(format!("sparsity must lie in [0, 1), got {s}"));
            }
        }
        Ok(())
    }

    pub fn formulation_list(&self) -> Result<Vec<Formulation>, FormatError> {
        self.formulations
            .iter()
            .map(|f| Formulation::parse(f).ok_or_else(|| FormatError::Invalid(format!("unknown formulation `{f}`"))))
            .collect()
    }

    pub fn sampler_config(&self) -> SamplerConfig {
        let d = SamplerConfig::default();
        let s = &self.sampler;
        SamplerConfig {
            outage_samples_per_unit: s.outage_samples_per_unit.unwrap_or(d.outage_samples_per_unit),
            max_extra_off: s.max_extra_off.unwrap_or(d.max_extra_off),
            voltage_push: s.voltage_push.unwrap_or(d.voltage_push),
            train_fraction: s.train_fraction.unwrap_or(d.train_fraction),
            min_samples: s.min_samples.unwrap_or(d.min_samples),
            slp: self.slp_config(),
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        let d = TrainConfig::default();
        let t = &self.train;
        TrainConfig {
            steps: t.steps.unwrap_or(d.steps),
            learning_rate: t.learning_rate.unwrap_or(d.learning_rate),
            batch_size: t.batch_size.unwrap_or(d.batch_size),
            checkpoint_every: t.checkpoint_every.unwrap_or(d.checkpoint_every),
            time_limit_secs: t.time_limit_secs.unwrap_or(d.time_limit_secs),
            seed: self.seed,
            ..d
        }
    }

    pub fn compress_config(&self) -> CompressConfig {
        let d = CompressConfig::default();
        let c = &self.compress;
        CompressConfig {
            sparsity: match c.sparsity {
                Some(s) if s == 0.0 => None,
                Some(s) => Some(s),
                None => d.sparsity,
            },
            retrain: TrainConfig {
                steps: c.retrain_steps.unwrap_or(d.retrain.steps),
                ..self.train_config()
            },
            level: c.level.as_deref().and_then(BoundLevel::parse).unwrap_or(d.level),
            tighten: d.tighten,
        }
    }

    pub fn milp_config(&self) -> MilpConfig {
        let d = MilpConfig::default();
        let s = &self.solver;
        MilpConfig {
            gap: s.gap.unwrap_or(d.gap),
            node_limit: s.node_limit.unwrap_or(d.node_limit),
            time_limit_secs: s.time_limit_secs.unwrap_or(d.time_limit_secs),
            ..d
        }
    }

    pub fn slp_config(&self) -> SlpConfig {
        let d = SlpConfig::default();
        SlpConfig {
            max_iterations: self.acopf.max_iterations.unwrap_or(d.max_iterations),
            time_limit_secs: self.acopf.time_limit_secs.unwrap_or(d.time_limit_secs),
            ..d
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dir_with_inputs() -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("c.m"), "").unwrap();
        std::fs::write(dir.path().join("u.toml"), "").unwrap();
        dir
    }

    #[test]
    fn defaults_and_relative_paths() {
        let dir = dir_with_inputs();
        let cfg = ExperimentConfig::parse("case = \"c.m\"\nuc = \"u.toml\"\n", dir.path()).unwrap();
        assert_eq!(cfg.case, dir.path().join("c.m"));
        assert_eq!(cfg.rho, 8);
        assert_eq!(cfg.formulation_list().unwrap(), Formulation::ALL.to_vec());
        assert!(cfg.schemes.is_empty());
        assert_eq!(cfg.milp_config().gap, 0.01);
        assert_eq!(cfg.compress_config().level, BoundLevel::Lp);
    }

    #[test]
    fn overrides_are_applied() {
        let dir = dir_with_inputs();
        let text = "case = \"c.m\"\nuc = \"u.toml\"\nseed = 9\n[train]\nsteps = 12\n[compress]\nsparsity = 0.0\nlevel = \"milp\"\n[[scheme]]\nkind = \"sinusoidal\"\ncount = 3\n";
        let cfg = ExperimentConfig::parse(text, dir.path()).unwrap();
        assert_eq!(cfg.train_config().steps, 12);
        assert_eq!(cfg.train_config().seed, 9);
        let c = cfg.compress_config();
        assert_eq!(c.sparsity, None);
        assert_eq!(c.level, BoundLevel::Milp);
        assert_eq!(cfg.schemes[0].count, 3);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let dir = dir_with_inputs();
        let base = "case = \"c.m\"\nuc = \"u.toml\"\n";
        for extra in [
            "derate = 1.5\n",
            "formulations = [\"ac\"]\n",
            "[[scheme]]\nkind = \"wave\"\ncount = 1\n",
            "[compress]\nlevel = \"exact\"\n",
            "colour = 1\n",
            "rho = 0\n",
        ] {
            let text = format!("{base}{extra}");
            assert!(ExperimentConfig::parse(&text, dir.path()).is_err(), "{extra}");
        }
        assert!(ExperimentConfig::parse("case = \"missing.m\"\nuc = \"u.toml\"\n", dir.path()).is_err());
    }
}
