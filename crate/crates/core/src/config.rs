//! Run configuration: a flat TOML-serializable record with validation and
//! the acquisition/update-mode vocabularies.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Acquisition functions addressable by name.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Acquisition {
    Ei,
    Pi,
    Ucb,
    Ts,
    Mes,
}

impl Acquisition {
    pub fn names() -> Vec<&'static str> {
        vec!["ei", "pi", "ucb", "ts", "mes"]
    }
}

impl FromStr for Acquisition {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ei" => Ok(Self::Ei),
            "pi" => Ok(Self::Pi),
            "ucb" => Ok(Self::Ucb),
            "ts" => Ok(Self::Ts),
            "mes" => Ok(Self::Mes),
            other => Err(Error::Config(format!(
                "unknown acquisition '{other}'; valid names: {}",
                Self::names().join(", ")
            ))),
        }
    }
}

/// Per-sweep hyperparameter refresh mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UpdateMode {
    EmpiricalBayes,
    MetropolisHastings,
    None,
}

impl FromStr for UpdateMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eb" => Ok(Self::EmpiricalBayes),
            "mh" => Ok(Self::MetropolisHastings),
            "none" => Ok(Self::None),
            other => Err(Error::Config(format!(
                "unknown update mode '{other}'; valid names: eb, mh, none"
            ))),
        }
    }
}

/// Full experiment configuration. Everything a run needs is here, so the
/// summary echo plus the seed reproduces every emitted file.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Objective name from the registry.
    pub objective: String,
    pub dim: usize,
    /// Total evaluation budget, initialization included.
    pub budget: usize,
    pub init_count: usize,
    /// Base concentration for the schedule α_t = α₀√t/ln(t+e).
    pub alpha0: f64,
    /// Schedule on/off; when off, `fixed_alpha` is used throughout.
    pub schedule: bool,
    pub fixed_alpha: f64,
    /// Gibbs sweeps for the first fit.
    pub burn_in: usize,
    /// Gibbs sweeps per subsequent iteration.
    pub sweeps: usize,
    /// ei | pi | ucb | ts | mes.
    pub acquisition: String,
    pub exploration_xi: f64,
    pub ucb_beta: f64,
    pub mes_samples: usize,
    pub rff_features: usize,
    /// Acquisition optimizer restarts.
    pub restarts: usize,
    /// Regimes with weight below this floor are pruned each iteration.
    pub prune_floor: f64,
    /// Monte Carlo draws for new-cluster likelihoods and prior variances.
    pub mc_samples: usize,
    /// Include the unopened-regime component when maximizing acquisitions.
    pub include_new_in_acquisition: bool,
    /// eb | mh | none.
    pub gibbs_update: String,
    /// Gradient steps per hyperparameter refresh (eb mode and the single-GP
    /// baseline's per-iteration refit).
    pub update_steps: usize,
    pub update_learning_rate: f64,
    /// Proposal scale for mh mode.
    pub mh_step_scale: f64,
    /// Optional hard cap on the regime count.
    pub max_regimes: Option<usize>,
    /// Adam steps refining a freshly opened regime's hyperparameter draw.
    pub new_regime_refine_steps: usize,
    pub seed: u64,
    /// Output directory; falls back to $RAMBO_OUT_DIR, then ./runs.
    pub output_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            objective: "levy".into(),
            dim: 2,
            budget: 80,
            init_count: 20,
            alpha0: 0.2,
            schedule: true,
            fixed_alpha: 1.0,
            burn_in: 500,
            sweeps: 50,
            acquisition: "ei".into(),
            exploration_xi: 0.01,
            ucb_beta: 2.0,
            mes_samples: 10,
            rff_features: 512,
            restarts: 20,
            prune_floor: 0.1,
            mc_samples: 16,
            include_new_in_acquisition: false,
            gibbs_update: "eb".into(),
            update_steps: 10,
            update_learning_rate: 0.05,
            mh_step_scale: 0.3,
            max_regimes: None,
            new_regime_refine_steps: 20,
            seed: 0,
            output_dir: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.init_count < 2 || self.budget <= self.init_count {
            return Err(Error::Config(format!(
                "need budget > init_count ≥ 2, got budget {} init_count {}",
                self.budget, self.init_count
            )));
        }
        if self.dim == 0 {
            return Err(Error::Config("dim must be ≥ 1".into()));
        }
        for (name, v) in [
            ("burn_in", self.burn_in),
            ("sweeps", self.sweeps),
            ("mes_samples", self.mes_samples),
            ("rff_features", self.rff_features),
            ("restarts", self.restarts),
            ("mc_samples", self.mc_samples),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be ≥ 1")));
            }
        }
        if !(self.prune_floor >= 0.0 && self.prune_floor < 0.5) {
            return Err(Error::Config(format!(
                "prune_floor must lie in [0, 0.5), got {}",
                self.prune_floor
            )));
        }
        for (name, v) in [
            ("alpha0", self.alpha0),
            ("fixed_alpha", self.fixed_alpha),
            ("ucb_beta", self.ucb_beta),
            ("update_learning_rate", self.update_learning_rate),
            ("mh_step_scale", self.mh_step_scale),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !self.exploration_xi.is_finite() || self.exploration_xi < 0.0 {
            return Err(Error::Config(format!(
                "exploration_xi must be ≥ 0, got {}",
                self.exploration_xi
            )));
        }
        if self.max_regimes == Some(0) {
            return Err(Error::Config("max_regimes must be ≥ 1 when set".into()));
        }
        self.acquisition.parse::<Acquisition>()?;
        self.gibbs_update.parse::<UpdateMode>()?;
        Ok(())
    }

    pub fn acquisition_kind(&self) -> Acquisition {
        self.acquisition.parse().expect("validated")
    }

    pub fn update_mode(&self) -> UpdateMode {
        self.gibbs_update.parse().expect("validated")
    }

    pub fn from_toml_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }
}
