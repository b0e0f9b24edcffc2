use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::{Common, UsageError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Built-in model, optionally with parameters: `"stroock-sphere d=3"`.
    pub model: String,
    /// Ambient dimension for models that take one, unless given as `d=` in `model`.
    pub dimension: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub transform: TransformConfig,
    pub invariance: InvarianceConfig,
    pub sde: SdeConfig,
    pub spde: SpdeConfig,
    pub compare: CompareConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransformConfig {
    /// `gaussian`, `sech` or `delta`.
    pub function: String,
    pub dimension: usize,
    pub max_degree: usize,
    /// Location of the delta; the origin when empty.
    pub point: Vec<f64>,
    pub norms: Vec<f64>,
    pub grid_min: f64,
    pub grid_max: f64,
    pub grid_points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InvarianceConfig {
    pub samples: usize,
    pub tolerance: f64,
    /// Neighbourhood radius of the simultaneous tangency check.
    pub radius: f64,
    /// Orbit-chart points for SPDE models, spread over `[-chart_range, chart_range]^d`.
    pub chart_points: usize,
    pub chart_range: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SdeConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    pub horizon: f64,
    pub dt: f64,
    pub paths: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpdeConfig {
    pub max_degree: usize,
    pub x0: Vec<f64>,
    pub horizon: f64,
    pub dt: f64,
    /// With more than one path a common-noise study at `dt` and `dt/2` is added.
    pub paths: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regularity: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub left: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub right: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regularity: Option<f64>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            model: "stroock-sphere".into(),
            dimension: 3,
            seed: 42,
            out: PathBuf::from("hsinv-run"),
            transform: TransformConfig::default(),
            invariance: InvarianceConfig::default(),
            sde: SdeConfig::default(),
            spde: SpdeConfig::default(),
            compare: CompareConfig::default(),
        }
    }
}

impl Default for TransformConfig {
    fn default() -> Self {
        Self {
            function: "gaussian".into(),
            dimension: 1,
            max_degree: 20,
            point: vec![],
            norms: vec![-1.0, -0.5, 0.0, 1.0],
            grid_min: -5.0,
            grid_max: 5.0,
            grid_points: 201,
        }
    }
}

impl Default for InvarianceConfig {
    fn default() -> Self {
        Self {
            samples: 100,
            tolerance: 1e-8,
            radius: 0.5,
            chart_points: 21,
            chart_range: 1.0,
        }
    }
}

impl Default for SdeConfig {
    fn default() -> Self {
        Self {
            x0: None,
            horizon: 1.0,
            dt: 1e-3,
            paths: 10,
        }
    }
}

impl Default for SpdeConfig {
    fn default() -> Self {
        Self {
            max_degree: 60,
            x0: vec![0.0],
            horizon: 1.0,
            dt: 1e-2,
            paths: 1,
            regularity: None,
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, UsageError> {
        let text = fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| UsageError(format!("malformed config {}: {e}", path.display())))
    }

    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config is plain data")
    }

    /// Config file (or defaults) with command-line flags applied on top.
    pub fn resolve(common: &Common) -> Result<Self, UsageError> {
        let mut cfg = match &common.config {
            Some(path) => Self::load(path)?,
            None => Self::default(),
        };
        if let Some(out) = &common.out {
            cfg.out = out.clone();
        }
        if let Some(seed) = common.seed {
            cfg.seed = seed;
        }
        if let Some(dt) = common.dt {
            cfg.sde.dt = dt;
            cfg.spde.dt = dt;
        }
        if let Some(paths) = common.paths {
            cfg.sde.paths = paths;
            cfg.spde.paths = paths;
        }
        if let Some(k) = common.max_degree {
            cfg.transform.max_degree = k;
            cfg.spde.max_degree = k;
        }
        if let Some(tol) = common.tolerance {
            cfg.invariance.tolerance = tol;
        }
        if let Some(model) = &common.model {
            cfg.model = model.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), UsageError> {
        let positive = [
            ("sde.dt", self.sde.dt),
            ("sde.horizon", self.sde.horizon),
            ("spde.dt", self.spde.dt),
            ("spde.horizon", self.spde.horizon),
            ("invariance.tolerance", self.invariance.tolerance),
            ("invariance.radius", self.invariance.radius),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(UsageError(format!("{name} must be positive and finite, got {v}")));
            }
        }
        let counts = [
            ("sde.paths", self.sde.paths),
            ("spde.paths", self.spde.paths),
            ("invariance.samples", self.invariance.samples),
            ("transform.dimension", self.transform.dimension),
            ("dimension", self.dimension),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(UsageError(format!("{name} must be at least 1")));
            }
        }
        if self.transform.grid_points < 2 || self.transform.grid_max <= self.transform.grid_min {
            return Err(UsageError("transform grid needs grid_points >= 2 and grid_max > grid_min".into()));
        }
        Ok(())
    }
}
