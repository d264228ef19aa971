//! Run configuration. Every field has a default, so an empty file is a
//! valid configuration; unknown keys are rejected.

use serde::{Deserialize, Serialize};

use crate::classifier::Hyper;
use crate::detector::DetectorParams;
use crate::error::{Error, Result};
use crate::features::{SvmType, WindowConfig};
use crate::model::{CtType, ModelParams, ParameterPath, Regimes, SimConfig};
use crate::pipeline::{CorpusConfig, SelectionCriteria};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorpusSection {
    pub n_per_type: usize,
    pub seed: u64,
    pub max_runs_factor: usize,
    pub nct_time_budget: f64,
    /// Slope lengths exported with the corpus table.
    pub t_m_list: Vec<f64>,
}

impl Default for CorpusSection {
    fn default() -> Self {
        CorpusSection {
            n_per_type: 100,
            seed: 0,
            max_runs_factor: 20,
            nct_time_budget: 5.0e6,
            t_m_list: vec![4.0, 8.0, 12.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub hyper: Hyper,
    pub split_seed: u64,
    pub svm_type: SvmType,
    pub t_m: f64,
    /// Time at which the saved model is trained.
    pub t_eval: f64,
    /// Spacing of the accuracy-versus-T curve.
    pub curve_step: f64,
    pub n_perms: usize,
    pub perm_seed: u64,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            hyper: Hyper::default(),
            split_seed: 0,
            svm_type: SvmType::All,
            t_m: 8.0,
            t_eval: 2.0,
            curve_step: 1.0,
            n_perms: 100,
            perm_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifySection {
    /// Screening window for detected transitions.
    pub criteria: SelectionCriteria,
    pub t_minus_grid: Vec<f64>,
    /// Detector threshold range searched when annotations are available.
    pub alpha_grid: Vec<f64>,
}

impl Default for ClassifySection {
    fn default() -> Self {
        ClassifySection {
            criteria: SelectionCriteria::new(-8.0, 2.0),
            t_minus_grid: vec![-16.0, -14.0, -12.0, -10.0, -8.0],
            alpha_grid: (0..=14).map(|k| (30 + 5 * k) as f64 / 1000.0).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShearSection {
    pub sigmas: Vec<f64>,
    pub n_residences: usize,
    pub seed: u64,
    pub time_budget: f64,
}

impl Default for ShearSection {
    fn default() -> Self {
        ShearSection {
            sigmas: vec![0.0, 1.0, 2.0],
            n_residences: 700,
            seed: 0,
            time_budget: 5.0e6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub regimes: Regimes,
    pub sim: SimConfig,
    pub detector: DetectorParams,
    pub window: WindowConfig,
    /// Selection of training transitions.
    pub selection: SelectionCriteria,
    pub corpus: CorpusSection,
    pub train: TrainSection,
    pub classify: ClassifySection,
    pub shear: ShearSection,
}

impl RunConfig {
    pub fn from_toml(s: &str) -> Result<RunConfig> {
        let cfg: RunConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.regimes.validate()?;
        self.sim.validate()?;
        self.detector.validate()?;
        self.window.validate(self.sim.dt)?;
        if ((self.detector.dt - self.sim.dt) / self.sim.dt).abs() > 1e-12 {
            return Err(Error::Config(format!(
                "detector.dt = {} differs from sim.dt = {}",
                self.detector.dt, self.sim.dt
            )));
        }
        self.selection.validate(&self.window)?;
        self.classify.criteria.validate(&self.window.with_t_m(self.train.t_m))?;
        self.train.hyper.validate()?;
        if self.corpus.n_per_type == 0 {
            return Err(Error::Config("corpus.n_per_type must be at least 1".into()));
        }
        if self.corpus.t_m_list.is_empty() {
            return Err(Error::Config("corpus.t_m_list is empty".into()));
        }
        for &tm in &self.corpus.t_m_list {
            self.window.with_t_m(tm).validate(self.sim.dt)?;
        }
        if !self.corpus.t_m_list.iter().any(|&v| (v - self.train.t_m).abs() < 1e-9) {
            return Err(Error::Config(format!(
                "train.t_m = {} is not in corpus.t_m_list",
                self.train.t_m
            )));
        }
        if !(self.train.curve_step > 0.0) {
            return Err(Error::Config("train.curve_step must be > 0".into()));
        }
        if self.classify.t_minus_grid.is_empty() {
            return Err(Error::Config("classify.t_minus_grid is empty".into()));
        }
        Ok(())
    }

    pub fn params(&self, ty: CtType) -> ModelParams {
        self.regimes.params(ty)
    }

    pub fn path(&self, ty: CtType) -> ParameterPath {
        self.regimes.path(ty)
    }

    pub fn corpus_config(&self) -> CorpusConfig {
        CorpusConfig {
            n_per_type: self.corpus.n_per_type,
            base_seed: self.corpus.seed,
            criteria: self.selection,
            window: self.window,
            detector: self.detector,
            sim: self.sim,
            regimes: self.regimes,
            max_runs_factor: self.corpus.max_runs_factor,
            nct_time_budget: self.corpus.nct_time_budget,
            keep_segments: false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = RunConfig::from_toml("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.sim.dt, 0.001);
        assert_eq!(cfg.detector.alpha, 0.55);
        assert_eq!(cfg.regimes.nct_mu, -0.22);
        assert_eq!(cfg.train.hyper.c, 1.0);
        assert_eq!(cfg.corpus.n_per_type, 100);
    }

    #[test]
    fn unknown_key_is_an_error() {
        let e = RunConfig::from_toml("[detector]\nalpah = 0.5\n").unwrap_err();
        assert!(e.to_string().contains("alpah"), "{e}");
        assert!(RunConfig::from_toml("[detectr]\n").is_err());
    }

    #[test]
    fn round_trip() {
        let mut cfg = RunConfig::default();
        cfg.detector = DetectorParams::for_recording(0.07);
        cfg.train.svm_type = SvmType::Slopes;
        let text = cfg.to_toml().unwrap();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn inconsistent_dt_rejected() {
        assert!(RunConfig::from_toml("[sim]\ndt = 0.002\n").is_err());
        let ok = "[sim]\ndt = 0.002\n[detector]\ndt = 0.002\ndelta = 0.002\n[window]\ndw = 0.002\nlag = 0.002\n";
        RunConfig::from_toml(ok).unwrap();
    }
}
