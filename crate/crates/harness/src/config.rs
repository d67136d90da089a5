use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use zvonkin::flowsim::FunctionalSpec;
use zvonkin::model::{DiffusionSpec, DriftSpec, ProblemSpec};

use crate::error::{HarnessError, HarnessResult};

pub const SCHEMA: &str = "zvonkin-experiment/1";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case", deny_unknown_fields)]
pub enum LambdaPolicy {
    /// Smallest λ in the built-in ladder with `c(λ) < 0.5`.
    Auto,
    Fixed {
        value: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub radius: f64,
    pub spacing: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub n_paths: usize,
    pub dt: f64,
    #[serde(default)]
    pub full_paths: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case", deny_unknown_fields)]
pub enum BandwidthPolicy {
    Silverman,
    Fixed { value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityConfig {
    pub points: usize,
    pub bandwidth: BandwidthPolicy,
    pub nv_samples: usize,
    pub n_mehler: usize,
    /// Optional `[lo, hi]` evaluation range; defaults to the sample range.
    #[serde(default)]
    pub range: Option<[f64; 2]>,
}

/// One experiment: a problem, a λ policy, discretisation and sampling
/// parameters. The seed is mandatory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: String,
    pub seed: u64,
    pub problem: ProblemSpec,
    pub lambda: LambdaPolicy,
    pub grid: GridConfig,
    pub simulation: SimulationConfig,
    pub density: DensityConfig,
    #[serde(default)]
    pub functional: Option<FunctionalSpec>,
    #[serde(default)]
    pub sweep_lambdas: Option<Vec<f64>>,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub n_paths: Option<usize>,
    pub dt: Option<f64>,
    pub lambda: Option<f64>,
    pub out: Option<PathBuf>,
}

fn positive(name: &str, v: f64) -> HarnessResult<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(HarnessError::Config(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> HarnessResult<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> HarnessResult<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn apply(&mut self, o: &Overrides) -> HarnessResult<()> {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(n) = o.n_paths {
            self.simulation.n_paths = n;
        }
        if let Some(dt) = o.dt {
            self.simulation.dt = dt;
        }
        if let Some(l) = o.lambda {
            self.lambda = LambdaPolicy::Fixed { value: l };
        }
        if let Some(out) = &o.out {
            self.output = Some(out.clone());
        }
        self.validate()
    }

    pub fn validate(&self) -> HarnessResult<()> {
        if self.schema != SCHEMA {
            return Err(HarnessError::Config(format!(
                "unsupported schema `{}`, expected `{SCHEMA}`",
                self.schema
            )));
        }
        let p = &self.problem;
        if p.dim == 0 || p.x0.len() != p.dim {
            return Err(HarnessError::Config("problem.x0 must have `dim` entries".into()));
        }
        positive("problem.horizon", p.horizon)?;
        positive("problem.theta", p.theta)?;
        if let LambdaPolicy::Fixed { value } = self.lambda {
            positive("lambda.value", value)?;
        }
        positive("grid.radius", self.grid.radius)?;
        positive("grid.spacing", self.grid.spacing)?;
        positive("simulation.dt", self.simulation.dt)?;
        if self.simulation.dt > p.horizon {
            return Err(HarnessError::Config("simulation.dt exceeds the horizon".into()));
        }
        if self.simulation.n_paths == 0
            || self.density.points < 2
            || self.density.nv_samples < 2
            || self.density.n_mehler == 0
        {
            return Err(HarnessError::Config(
                "path, point and sample counts must be positive".into(),
            ));
        }
        if let BandwidthPolicy::Fixed { value } = self.density.bandwidth {
            positive("density.bandwidth.value", value)?;
        }
        if let Some([lo, hi]) = self.density.range {
            if !(hi > lo) {
                return Err(HarnessError::Config("density.range must be increasing".into()));
            }
        }
        if let Some(ls) = &self.sweep_lambdas {
            if ls.is_empty() || ls.iter().any(|&l| !(l > 0.0)) || ls.windows(2).any(|w| w[1] <= w[0]) {
                return Err(HarnessError::Config(
                    "sweep_lambdas must be positive and strictly ascending".into(),
                ));
            }
        }
        if self.functional.is_some() && p.dim != 1 {
            return Err(HarnessError::Config(
                "functionals need a one-dimensional problem".into(),
            ));
        }
        if let Some(f) = &self.functional {
            f.build::<f64>().map_err(|e| HarnessError::Config(e.to_string()))?;
        }
        self.problem
            .build::<f64>()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        Ok(())
    }

    /// The config without its output location.
    pub fn canonical(&self) -> Self {
        Self {
            output: None,
            ..self.clone()
        }
    }

    /// Canonical JSON (sorted keys, output location omitted).
    pub fn canonical_json(&self) -> String {
        let v = serde_json::to_value(self.canonical()).expect("config serialises");
        serde_json::to_string(&v).expect("value serialises")
    }

    /// SHA-256 of [`canonical_json`](Self::canonical_json), hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output.clone().unwrap_or_else(|| PathBuf::from("zvonkin-out"))
    }
}

/// Built-in experiment presets.
pub fn preset(name: &str) -> Option<ExperimentConfig> {
    let (x0, drift, diffusion, functional) = match name {
        "zero" => (
            0.0,
            DriftSpec::Zero,
            DiffusionSpec::Sinusoidal { base: 1.0, amp: 0.3 },
            None,
        ),
        "linear" => (
            0.0,
            DriftSpec::Linear { beta: 1.0 },
            DiffusionSpec::Constant { value: 1.0 },
            None,
        ),
        "ou" => (
            1.0,
            DriftSpec::Linear { beta: -1.0 },
            DiffusionSpec::Constant { value: 1.0 },
            None,
        ),
        "rough" => (
            0.0,
            DriftSpec::SqrtAbs { scale: 1.0 },
            DiffusionSpec::Sinusoidal { base: 1.0, amp: 0.3 },
            Some(FunctionalSpec::SinePerturbed { amp: 0.5 }),
        ),
        _ => return None,
    };
    Some(ExperimentConfig {
        schema: SCHEMA.into(),
        seed: 20_240_601,
        problem: ProblemSpec {
            dim: 1,
            x0: vec![x0],
            horizon: 1.0,
            theta: 0.5,
            drift,
            diffusion,
        },
        lambda: LambdaPolicy::Auto,
        grid: GridConfig {
            radius: zvonkin::model::DEFAULT_RADIUS,
            spacing: zvonkin::model::default_spacing(1),
        },
        simulation: SimulationConfig {
            n_paths: 10_000,
            dt: 1e-3,
            full_paths: false,
        },
        density: DensityConfig {
            points: 401,
            bandwidth: BandwidthPolicy::Silverman,
            nv_samples: 2000,
            n_mehler: 8,
            range: None,
        },
        functional,
        sweep_lambdas: None,
        output: None,
    })
}

pub const PRESETS: [&str; 4] = ["zero", "linear", "ou", "rough"];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate_and_round_trip() {
        for name in PRESETS {
            let cfg = preset(name).unwrap();
            cfg.validate().unwrap();
            let back = ExperimentConfig::from_json(&cfg.canonical_json()).unwrap();
            assert_eq!(back, cfg);
            assert_eq!(back.hash(), cfg.hash());
        }
    }

    #[test]
    fn missing_seed_is_a_config_error() {
        let mut v = serde_json::to_value(preset("rough").unwrap()).unwrap();
        v.as_object_mut().unwrap().remove("seed");
        assert!(matches!(
            ExperimentConfig::from_json(&v.to_string()),
            Err(HarnessError::Config(_))
        ));
    }

    #[test]
    fn wrong_schema_and_nonpositive_values_are_rejected() {
        let mut cfg = preset("ou").unwrap();
        cfg.schema = "other/9".into();
        assert!(cfg.validate().is_err());
        let mut cfg = preset("ou").unwrap();
        cfg.simulation.dt = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = preset("ou").unwrap();
        assert!(cfg
            .apply(&Overrides {
                lambda: Some(-1.0),
                ..Default::default()
            })
            .is_err());
    }

    #[test]
    fn hash_ignores_output_but_tracks_seed() {
        let base = preset("rough").unwrap();
        let mut moved = base.clone();
        moved.output = Some(PathBuf::from("/elsewhere"));
        assert_eq!(moved.hash(), base.hash());
        let mut reseeded = base.clone();
        reseeded.seed += 1;
        assert_ne!(reseeded.hash(), base.hash());
    }
}
