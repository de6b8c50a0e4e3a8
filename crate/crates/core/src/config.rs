//! Sectioned run configuration in TOML. Every key is optional; unknown keys
//! are rejected. Paths are taken relative to the config file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::control::{Method, MppiConfig};
use crate::dynamics::{State, VehicleParams};
use crate::error::{Error, Result};
use crate::experiment::{C2cSuite, DynamicSuite, Sweep};
use crate::levelset::Resolution;
use crate::policy::{ActionSet, NetworkShape, TrainConfig, DEFAULT_ACTIONS};
use crate::world::WorldConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LevelSetSection {
    pub dx: f64,
    pub dy: f64,
    pub dpsi_deg: f64,
    pub horizon_s: f64,
    pub actions: usize,
}

impl Default for LevelSetSection {
    fn default() -> Self {
        LevelSetSection {
            dx: 0.05,
            dy: 0.05,
            dpsi_deg: 4.5,
            horizon_s: 3.0,
            actions: DEFAULT_ACTIONS,
        }
    }
}

impl LevelSetSection {
    pub fn resolution(&self) -> Result<Resolution> {
        Resolution::new(self.dx, self.dy, self.dpsi_deg.to_radians())
    }

    pub fn action_set(&self, p: &VehicleParams) -> ActionSet {
        ActionSet::uniform(p.delta_max, self.actions)
    }
}

/// Network shape plus optimizer settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub hidden: Vec<usize>,
    pub batch_norm: bool,
    pub lr: f64,
    pub epochs: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub beta_assign: Option<f64>,
    pub k_neighbors: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSection {
            hidden: vec![256, 256],
            batch_norm: true,
            lr: t.lr,
            epochs: t.epochs,
            beta1: t.beta1,
            beta2: t.beta2,
            eps: t.eps,
            beta_assign: t.beta_assign,
            k_neighbors: t.k_neighbors,
        }
    }
}

impl TrainSection {
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            lr: self.lr,
            epochs: self.epochs,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
            beta_assign: self.beta_assign,
            k_neighbors: self.k_neighbors,
            seed,
        }
    }

    pub fn shape(&self, actions: usize) -> NetworkShape {
        NetworkShape::new(self.hidden.clone(), actions, self.batch_norm)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerChoice {
    Cuniform,
    Gaussian,
    Nln,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerSection {
    pub kind: SamplerChoice,
    pub n_traj: usize,
    pub horizon_s: f64,
    pub sigma: f64,
    pub sigma_ln: f64,
}

impl Default for SamplerSection {
    fn default() -> Self {
        SamplerSection {
            kind: SamplerChoice::Cuniform,
            n_traj: 10_000,
            horizon_s: 3.0,
            sigma: 0.1,
            sigma_ln: 0.5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    /// No obstacles; goal taken from `[world]`.
    Open,
    /// Procedural strip `env` of the dynamic suite at its first density and
    /// the `[world]` reveal distance.
    Clutter,
    /// First goal of the C2C suite.
    C2c,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SuiteKind {
    C2c,
    Dynamic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    pub seed: u64,
    pub method: Method,
    pub scenario: Scenario,
    pub start: State,
    pub env: usize,
    pub map: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub levelsets: Option<PathBuf>,
    /// Samples per level for the transition-uniformity report.
    pub analyze_samples: usize,
    /// Image scale in pixels per meter.
    pub px_per_m: f64,
    pub suite: SuiteKind,
    pub sweep: Sweep,
    pub c2c: C2cSuite,
    pub dynamic: DynamicSuite,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            seed: 0,
            method: Method::CuMppi,
            scenario: Scenario::Open,
            start: State::origin(),
            env: 0,
            map: None,
            model: None,
            levelsets: None,
            analyze_samples: 100_000,
            px_per_m: 40.0,
            suite: SuiteKind::C2c,
            sweep: Sweep::default(),
            c2c: C2cSuite::default(),
            dynamic: DynamicSuite::default(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub vehicle: VehicleParams,
    pub levelset: LevelSetSection,
    pub train: TrainSection,
    pub sampler: SamplerSection,
    pub mppi: MppiConfig,
    pub world: WorldConfig,
    pub experiment: ExperimentSection,
}

impl RunConfig {
    /// Parses TOML text; relative paths are joined onto `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let e = &mut cfg.experiment;
        for p in [&mut e.map, &mut e.model, &mut e.levelsets]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base_dir.join(&*p);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        RunConfig::parse(&text, base).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => Error::Config(format!("{}: {other}", path.display())),
        })
    }

    pub fn validate(&self) -> Result<()> {
        let wrap = |e: Error| Error::Config(e.to_string());
        self.vehicle.validate().map_err(wrap)?;
        self.levelset.resolution().map_err(wrap)?;
        self.train.train_config(0).validate().map_err(wrap)?;
        self.mppi.validate().map_err(wrap)?;
        self.world.validate().map_err(wrap)?;
        let l = &self.levelset;
        let s = &self.sampler;
        let x = &self.experiment;
        let checks = [
            (l.actions >= 2, "levelset.actions must be at least 2"),
            (l.horizon_s > 0.0, "levelset.horizon_s must be positive"),
            (
                !self.train.hidden.is_empty(),
                "train.hidden needs at least one layer",
            ),
            (
                self.train.hidden.iter().all(|&h| h > 0),
                "train.hidden widths must be positive",
            ),
            (s.n_traj >= 1, "sampler.n_traj must be at least 1"),
            (s.horizon_s > 0.0, "sampler.horizon_s must be positive"),
            (
                s.sigma > 0.0 && s.sigma_ln > 0.0,
                "sampler.sigma and sigma_ln must be positive",
            ),
            (
                x.analyze_samples >= 1,
                "experiment.analyze_samples must be at least 1",
            ),
            (x.px_per_m > 0.0, "experiment.px_per_m must be positive"),
            (
                !x.c2c.goals.is_empty(),
                "experiment.c2c.goals must not be empty",
            ),
            (
                x.c2c.horizon_s > 0.0 && x.dynamic.horizon_s > 0.0,
                "suite horizons must be positive",
            ),
            (
                x.sweep.sigmas.iter().all(|&v| v > 0.0),
                "experiment.sweep.sigmas must be positive",
            ),
            (
                x.sweep.n_trajs.iter().all(|&n| n >= 1),
                "experiment.sweep.n_trajs must be at least 1",
            ),
        ];
        for (ok, msg) in checks {
            if !ok {
                return Err(Error::Config(msg.into()));
            }
        }
        Ok(())
    }

    /// Resolved configuration as pretty JSON, recorded next to run outputs.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }

    pub fn level_steps(&self) -> usize {
        self.vehicle.steps_for(self.levelset.horizon_s).max(1)
    }

    pub fn sample_steps(&self) -> usize {
        self.vehicle.steps_for(self.sampler.horizon_s).max(1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        let cfg = RunConfig::parse("", Path::new(".")).unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.level_steps(), 15);
        assert_eq!(cfg.train.lr, 1e-4);
        assert_eq!(cfg.train.hidden, vec![256, 256]);
    }

    #[test]
    fn sections_override_defaults() {
        let text = r#"
            [vehicle]
            dt = 0.1
            [levelset]
            dx = 0.1
            [train]
            hidden = [64, 64]
            [mppi]
            n_samples = 2500
            [world]
            goal = { x = 1.0, y = 2.0, psi = 0.0 }
            [experiment]
            method = "cu-logmppi"
            suite = "dynamic"
            [experiment.sweep]
            trials = 0
        "#;
        let cfg = RunConfig::parse(text, Path::new(".")).unwrap();
        assert_eq!(cfg.vehicle.dt, 0.1);
        assert_eq!(cfg.levelset.dx, 0.1);
        assert_eq!(cfg.train.hidden, vec![64, 64]);
        assert_eq!(cfg.mppi.n_samples, 2500);
        assert_eq!(cfg.world.goal, State::new(1.0, 2.0, 0.0));
        assert_eq!(cfg.experiment.method, Method::CuLogMppi);
        assert_eq!(cfg.experiment.suite, SuiteKind::Dynamic);
        assert_eq!(cfg.experiment.sweep.trials, 0);
    }

    #[test]
    fn unknown_keys_are_errors() {
        for text in [
            "[vehicle]\nspeed = 2.0",
            "[nope]\na = 1",
            "[experiment.sweep]\nx = 1",
            "top = 1",
        ] {
            let err = RunConfig::parse(text, Path::new(".")).unwrap_err();
            assert!(matches!(err, Error::Config(_)), "{text}: {err}");
        }
    }

    #[test]
    fn invalid_values_are_config_errors() {
        let err = RunConfig::parse("[vehicle]\nv = -1.0", Path::new(".")).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        let err = RunConfig::parse("[train]\nhidden = []", Path::new(".")).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn paths_resolve_against_the_config_directory() {
        let text = "[experiment]\nmodel = \"m.cunn\"\nmap = \"/abs/map.txt\"";
        let cfg = RunConfig::parse(text, Path::new("/runs/a")).unwrap();
        assert_eq!(cfg.experiment.model, Some(PathBuf::from("/runs/a/m.cunn")));
        assert_eq!(cfg.experiment.map, Some(PathBuf::from("/abs/map.txt")));
    }

    #[test]
    fn json_export_round_trips() {
        let cfg = RunConfig::default();
        let back: RunConfig = serde_json::from_str(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
    }
}
