use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use hsinv::geometry::LevelSetManifold;
use hsinv::sde::{AffineModel, OrnsteinUhlenbeck, SdeModel, StroockSphere};
use hsinv::spde::{delta_profile_model, gaussian_profile_model, SpdeModel};

use crate::config::Config;
use crate::UsageError;

pub const MODEL_NAMES: [&str; 6] = [
    "stroock-sphere",
    "radial-drift-sphere",
    "ornstein-uhlenbeck",
    "hyperplane-tangent",
    "delta-profile-spde",
    "gaussian-profile-spde",
];

/// `name key=value ...`
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    pub name: String,
    pub params: BTreeMap<String, String>,
}

impl ModelSpec {
    pub fn parse(text: &str) -> Result<Self, UsageError> {
        let mut parts = text.split_whitespace();
        let name = parts
            .next()
            .ok_or_else(|| UsageError("empty model name".into()))?
            .to_string();
        if !MODEL_NAMES.contains(&name.as_str()) {
            return Err(UsageError(format!(
                "unknown model '{name}'; built-in models: {}",
                MODEL_NAMES.join(", ")
            )));
        }
        let mut params = BTreeMap::new();
        for p in parts {
            let (k, v) = p
                .split_once('=')
                .ok_or_else(|| UsageError(format!("model parameter '{p}' is not key=value")))?;
            params.insert(k.to_string(), v.to_string());
        }
        Ok(Self { name, params })
    }

    fn number<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T, UsageError> {
        match self.params.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| UsageError(format!("model parameter {key}={v} is not a valid number"))),
        }
    }

    fn check_keys(&self, allowed: &[&str]) -> Result<(), UsageError> {
        for k in self.params.keys() {
            if !allowed.contains(&k.as_str()) {
                return Err(UsageError(format!("model {} takes no parameter '{k}'", self.name)));
            }
        }
        Ok(())
    }
}

pub struct SdeEntry {
    pub model: Box<dyn SdeModel>,
    pub manifold: LevelSetManifold,
    pub x0: Vec<f64>,
    pub sphere: bool,
}

pub enum BuiltIn {
    Sde(SdeEntry),
    Spde(SpdeModel),
}

fn unit(d: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; d];
    v[i] = 1.0;
    v
}

pub fn build(spec: &ModelSpec, cfg: &Config) -> Result<BuiltIn, UsageError> {
    let numeric = |e: hsinv::Error| UsageError(format!("cannot build {}: {e}", spec.name));
    match spec.name.as_str() {
        "stroock-sphere" | "radial-drift-sphere" => {
            spec.check_keys(&["d"])?;
            let d = spec.number("d", cfg.dimension)?;
            let model: Box<dyn SdeModel> = if spec.name == "stroock-sphere" {
                Box::new(StroockSphere::new(d).map_err(numeric)?)
            } else {
                Box::new(AffineModel::radial_drift(d).with_label("radial-drift-sphere"))
            };
            Ok(BuiltIn::Sde(SdeEntry {
                model,
                manifold: LevelSetManifold::unit_sphere(d).map_err(numeric)?,
                x0: unit(d, 0),
                sphere: true,
            }))
        }
        "ornstein-uhlenbeck" => {
            spec.check_keys(&["d", "theta", "sigma"])?;
            let d = spec.number("d", cfg.dimension)?;
            let model = OrnsteinUhlenbeck {
                dimension: d,
                mean_reversion: spec.number("theta", 1.0)?,
                volatility: spec.number("sigma", 0.5)?,
            };
            Ok(BuiltIn::Sde(SdeEntry {
                model: Box::new(model),
                manifold: LevelSetManifold::hyperplane(unit(d, d - 1), 0.0).map_err(numeric)?,
                x0: vec![0.0; d],
                sphere: false,
            }))
        }
        "hyperplane-tangent" => {
            // b = −θ P x, σ^j = e_j for j < d, on {x_d = 0}
            spec.check_keys(&["d", "theta"])?;
            let d: usize = spec.number("d", cfg.dimension)?;
            if d < 2 {
                return Err(UsageError("hyperplane-tangent needs d >= 2".into()));
            }
            let theta: f64 = spec.number("theta", 1.0)?;
            let mut p = DMatrix::identity(d, d);
            p[(d - 1, d - 1)] = 0.0;
            let model = AffineModel::new(
                p * (-theta),
                DVector::zeros(d),
                vec![DMatrix::zeros(d, d); d - 1],
                (0..d - 1).map(|j| DVector::from_vec(unit(d, j))).collect(),
            )
            .map_err(numeric)?
            .with_label("hyperplane-tangent");
            Ok(BuiltIn::Sde(SdeEntry {
                model: Box::new(model),
                manifold: LevelSetManifold::hyperplane(unit(d, d - 1), 0.0).map_err(numeric)?,
                x0: vec![0.0; d],
                sphere: false,
            }))
        }
        "delta-profile-spde" => {
            spec.check_keys(&[])?;
            Ok(BuiltIn::Spde(delta_profile_model(cfg.spde.max_degree).map_err(numeric)?))
        }
        "gaussian-profile-spde" => {
            spec.check_keys(&[])?;
            Ok(BuiltIn::Spde(gaussian_profile_model(cfg.spde.max_degree).map_err(numeric)?))
        }
        other => Err(UsageError(format!("unknown model '{other}'"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_parameters() {
        let s = ModelSpec::parse("stroock-sphere d=4").unwrap();
        assert_eq!(s.name, "stroock-sphere");
        assert_eq!(s.params["d"], "4");
        match build(&s, &Config::default()).unwrap() {
            BuiltIn::Sde(e) => assert_eq!(e.model.dimension(), 4),
            BuiltIn::Spde(_) => panic!("expected an SDE model"),
        }
    }

    #[test]
    fn rejects_unknown_names_and_keys() {
        assert!(ModelSpec::parse("brownian-torus").is_err());
        assert!(ModelSpec::parse("stroock-sphere d").is_err());
        let s = ModelSpec::parse("stroock-sphere radius=2").unwrap();
        assert!(build(&s, &Config::default()).is_err());
    }

    #[test]
    fn hyperplane_model_starts_on_its_plane() {
        let s = ModelSpec::parse("hyperplane-tangent d=3").unwrap();
        let BuiltIn::Sde(e) = build(&s, &Config::default()).unwrap() else {
            panic!("expected an SDE model")
        };
        assert_eq!(e.manifold.value(&e.x0)[0], 0.0);
        assert_eq!(e.model.noise_count(), 2);
    }
}
