//! Run configuration: one JSON document, complex scalars as `[re, im]`.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::isomonodromic::{check_nonresonant, TypeTheta};
use crate::isospectral::{ConfigPoint, IsoSystem};
use crate::matcore::{CMatrix, C64};
use crate::sampling::{self, SampleRng};
use crate::spectral::{gauge_from_rho, SpectralPoint};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_STEPS: usize = 20;
pub const DEFAULT_SEEDS: usize = 16;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("config field `{field}`: {message}")]
    Field {
        field: &'static str,
        message: String,
    },
}

pub(super) fn field(field: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Field {
        field,
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Isospectral,
    Isomonodromic,
    Dpv,
    Verify,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Jsonl,
    Csv,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum GaugeSpec {
    Matrix(CMatrix),
    Named(String),
}

#[derive(Debug, Clone, Copy, Deserialize)]
pub struct DivisorPoints {
    pub z1: C64,
    pub z2: C64,
    pub zeta1: C64,
    pub zeta2: C64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Initial {
    Configs { prev: ConfigPoint, cur: ConfigPoint },
    Spectral(SpectralPoint),
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Option<Mode>,
    pub r: Option<usize>,
    #[serde(rename = "A")]
    pub a: Option<GaugeSpec>,
    pub divisor: Option<DivisorPoints>,
    pub theta: Option<TypeTheta>,
    pub initial: Option<Initial>,
    pub steps: Option<usize>,
    pub tol: Option<f64>,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    pub format: Option<Format>,
    /// Number of seeds in `verify` mode.
    pub seeds: Option<usize>,
    /// Recompute each dPV step along the matrix route.
    pub check_route: Option<bool>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub steps: Option<usize>,
    pub seed: Option<u64>,
    pub tol: Option<f64>,
    pub output: Option<PathBuf>,
    pub format: Option<Format>,
}

/// A config with every run-level setting filled in.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub mode: Mode,
    pub config: RunConfig,
    pub steps: usize,
    pub seed: u64,
    pub tol: f64,
    pub output: Option<PathBuf>,
    pub format: Format,
}

impl Resolved {
    pub fn new(mode: Mode, config: RunConfig, o: Overrides) -> Result<Self, ConfigError> {
        if let Some(m) = config.mode {
            if m != mode {
                return Err(field(
                    "mode",
                    format!("config is for {m:?}, command is {mode:?}"),
                ));
            }
        }
        let tol = o.tol.or(config.tol).unwrap_or(DEFAULT_TOL);
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(field("tol", "must be positive and finite"));
        }
        if let Some(r) = config.r {
            if r < 2 {
                return Err(field("r", "must be at least 2"));
            }
        }
        Ok(Self {
            mode,
            steps: o.steps.or(config.steps).unwrap_or(DEFAULT_STEPS),
            seed: o.seed.or(config.seed).unwrap_or(0),
            tol,
            output: o.output.or_else(|| config.output.clone()),
            format: o.format.or(config.format).unwrap_or_default(),
            config,
        })
    }

    pub fn rng(&self) -> SampleRng {
        sampling::seeded(self.seed)
    }

    /// Rank from `r`, from the gauge, or 2.
    pub fn rank(&self) -> Result<usize, ConfigError> {
        let from_a = match &self.config.a {
            Some(GaugeSpec::Matrix(m)) => Some(m.dim()),
            _ => None,
        };
        match (self.config.r, from_a) {
            (Some(r), Some(n)) if r != n => Err(field("A", format!("is {n}x{n} but r = {r}"))),
            (Some(r), _) => Ok(r),
            (None, Some(n)) => Ok(n),
            (None, None) => Ok(2),
        }
    }

    /// Gauge from the config, or a random one drawn from `rng`.
    pub fn gauge(&self, rng: &mut SampleRng) -> Result<CMatrix, ConfigError> {
        let r = self.rank()?;
        match &self.config.a {
            Some(GaugeSpec::Matrix(m)) => {
                m.inverse().map_err(|e| field("A", e.to_string()))?;
                Ok(m.clone())
            }
            Some(GaugeSpec::Named(name)) if name == "diag-sqrt-rho" => {
                let theta = self
                    .config
                    .theta
                    .as_ref()
                    .ok_or_else(|| field("A", "diag-sqrt-rho needs `theta.rho`"))?;
                if theta.rho.len() != 2 || r != 2 {
                    return Err(field("A", "diag-sqrt-rho is defined for r = 2"));
                }
                Ok(gauge_from_rho([theta.rho[0], theta.rho[1]]))
            }
            Some(GaugeSpec::Named(name)) => Err(field("A", format!("unknown gauge `{name}`"))),
            None => Ok(sampling::random_gauge(rng, r)),
        }
    }

    /// Isospectral system from the gauge and the divisor. A random divisor
    /// avoids integer differences so it also suits isomonodromic runs.
    pub fn system(&self, rng: &mut SampleRng) -> Result<IsoSystem, ConfigError> {
        let a = self.gauge(rng)?;
        let d = match self.config.divisor {
            Some(d) => d,
            None => loop {
                let p = sampling::distinct_points(rng, 4, 1.5, 0.3);
                let names = [("z1", p[0]), ("z2", p[1]), ("zeta1", p[2]), ("zeta2", p[3])];
                if check_nonresonant(&names).is_ok() {
                    break DivisorPoints {
                        z1: p[0],
                        z2: p[1],
                        zeta1: p[2],
                        zeta2: p[3],
                    };
                }
            },
        };
        IsoSystem::new(a, d.z1, d.z2, d.zeta1, d.zeta2).map_err(|e| field("divisor", e.to_string()))
    }

    pub fn initial_configs(
        &self,
        sys: &IsoSystem,
        rng: &mut SampleRng,
    ) -> Result<(ConfigPoint, ConfigPoint), ConfigError> {
        match &self.config.initial {
            Some(Initial::Configs { prev, cur }) => {
                for q in [prev, cur] {
                    if q.dim() != sys.dim() {
                        return Err(field(
                            "initial",
                            format!("vectors must have length {}", sys.dim()),
                        ));
                    }
                    ConfigPoint::new(q.p1.clone(), q.q2.clone())
                        .map_err(|e| field("initial", e.to_string()))?;
                }
                Ok((prev.clone(), cur.clone()))
            }
            Some(Initial::Spectral(_)) => Err(field(
                "initial",
                "expected {\"prev\", \"cur\"} configuration points",
            )),
            None => Ok(crate::isospectral::random_initial(rng, sys)),
        }
    }

    pub fn theta_and_point(
        &self,
        rng: &mut SampleRng,
    ) -> Result<(TypeTheta, SpectralPoint), ConfigError> {
        let theta = match &self.config.theta {
            Some(t) => {
                let t = TypeTheta::new(t.z1, t.z2, t.zeta1, t.zeta2, t.rho.clone(), t.k.clone())
                    .map_err(|e| field("theta", e.to_string()))?;
                if t.rho.len() != 2 {
                    return Err(field("theta", "rho and k must have two entries"));
                }
                t.check_nonresonant()
                    .map_err(|e| field("theta", e.to_string()))?;
                t
            }
            None => crate::spectral::random_theta(rng),
        };
        let s = match &self.config.initial {
            Some(Initial::Spectral(s)) => *s,
            Some(Initial::Configs { .. }) => {
                return Err(field("initial", "expected {\"q\", \"p\"}"))
            }
            None => crate::spectral::random_point(rng, &theta),
        };
        Ok((theta, s))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_complex_pairs_and_gauge_forms() {
        let cfg = RunConfig::from_json(
            r#"{"r": 2, "A": [[[1,0],[0,0]],[[0,0],[2,0]]],
                "divisor": {"z1": [0,0], "z2": [1,0.5], "zeta1": [-1,0.2], "zeta2": [0.3,-1]},
                "steps": 5}"#,
        )
        .unwrap();
        let res = Resolved::new(Mode::Isospectral, cfg, Overrides::default()).unwrap();
        let sys = res.system(&mut res.rng()).unwrap();
        assert_eq!(sys.z2, C64::new(1.0, 0.5));
        assert_eq!(res.steps, 5);

        let cfg = RunConfig::from_json(r#"{"A": "diag-sqrt-rho"}"#).unwrap();
        let res = Resolved::new(Mode::Dpv, cfg, Overrides::default()).unwrap();
        assert!(matches!(
            res.gauge(&mut res.rng()),
            Err(ConfigError::Field { field: "A", .. })
        ));
    }

    #[test]
    fn overrides_win() {
        let cfg = RunConfig::from_json(r#"{"steps": 3, "seed": 4, "tol": 1e-3}"#).unwrap();
        let o = Overrides {
            steps: Some(7),
            tol: Some(1e-9),
            ..Default::default()
        };
        let res = Resolved::new(Mode::Verify, cfg, o).unwrap();
        assert_eq!((res.steps, res.seed, res.tol), (7, 4, 1e-9));
    }

    #[test]
    fn rejects_bad_fields() {
        assert!(matches!(
            RunConfig::from_json("{"),
            Err(ConfigError::Parse(_))
        ));
        assert!(matches!(
            RunConfig::from_json(r#"{"steps": -1}"#),
            Err(ConfigError::Parse(_))
        ));
        assert!(matches!(
            RunConfig::from_json(r#"{"stepz": 1}"#),
            Err(ConfigError::Parse(_))
        ));
        let cfg = RunConfig::from_json(r#"{"tol": 0}"#).unwrap();
        assert!(matches!(
            Resolved::new(Mode::Verify, cfg, Overrides::default()),
            Err(ConfigError::Field { field: "tol", .. })
        ));
        let cfg = RunConfig::from_json(r#"{"mode": "dpv"}"#).unwrap();
        assert!(Resolved::new(Mode::Verify, cfg, Overrides::default()).is_err());
    }
}
