//! Experiment configuration: one JSON object per experiment, strict about
//! unknown fields so typos fail loudly before any computation starts.

use crate::{Result, RunError};
use serde::Deserialize;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Flow,
    Inequality,
    Estimate,
    Sweep,
}

impl Kind {
    pub fn name(&self) -> &'static str {
        match self {
            Kind::Flow => "flow",
            Kind::Inequality => "inequality",
            Kind::Estimate => "estimate",
            Kind::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

/// `family` is one of "relative" (Boltzmann entropy against the Gibbs
/// profile of the potential), "internal_potential" (entropy + potential
/// energy on the grid; `m` selects the kernel, 1 = Boltzmann), or
/// "potential_only" (atomic flows).
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionalSpec {
    pub family: String,
    #[serde(default)]
    pub m: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    Gaussian { mu: f64, sigma: f64 },
    Uniform { a: f64, b: f64 },
    Atoms { positions: Vec<f64>, weights: Vec<f64> },
    File { path: PathBuf },
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    pub t_end: f64,
    #[serde(default)]
    pub cfl: Option<f64>,
    #[serde(default)]
    pub snapshot_stride: Option<usize>,
    #[serde(default)]
    pub max_steps: Option<usize>,
    #[serde(default)]
    pub fixed_dt: Option<f64>,
}

/// Łojasiewicz parameters for bound verification and margin checks. Exactly
/// one of `c_g`, `c_f` must be given; the other is derived. `jhat` defaults
/// to the minimum of the configured functional.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LojaSpec {
    pub theta: f64,
    #[serde(default)]
    pub c_g: Option<f64>,
    #[serde(default)]
    pub c_f: Option<f64>,
    #[serde(default)]
    pub r0: Option<f64>,
    #[serde(default)]
    pub jhat: Option<f64>,
    #[serde(default)]
    pub tolerance: Option<f64>,
}

/// Sample source for exponent fitting: "dirac_path" fits on the model curve
/// J = t, W₂ = √t; "trajectory" runs the configured flow and fits on its
/// snapshots.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateSpec {
    pub source: String,
    #[serde(default)]
    pub t_min: Option<f64>,
    #[serde(default)]
    pub t_max: Option<f64>,
    #[serde(default)]
    pub count: Option<usize>,
}

impl Default for EstimateSpec {
    fn default() -> Self {
        EstimateSpec { source: "dirac_path".into(), t_min: None, t_max: None, count: None }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub potential: Option<PotentialSpec>,
    #[serde(default)]
    pub functional: Option<FunctionalSpec>,
    #[serde(default)]
    pub initial: Option<InitialSpec>,
    #[serde(default)]
    pub solver: Option<SolverSpec>,
    #[serde(default)]
    pub loja: Option<LojaSpec>,
    #[serde(default)]
    pub estimate: Option<EstimateSpec>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub samples: Option<usize>,
    #[serde(default)]
    pub svg: Option<bool>,
    /// Inline member configs; only valid (and required) for kind = sweep.
    #[serde(default)]
    pub configs: Option<Vec<ExperimentConfig>>,
}

pub fn load(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| RunError::Config(format!("{}: {e}", path.display())))?;
    let cfg: ExperimentConfig = serde_json::from_str(&text)
        .map_err(|e| RunError::Config(format!("{}: {e}", path.display())))?;
    cfg.validate()?;
    Ok(cfg)
}

impl ExperimentConfig {
    /// Structural validation: which fields each kind requires or forbids.
    /// Numeric ranges are validated when the core objects are built.
    pub fn validate(&self) -> Result<()> {
        let err = |msg: String| Err(RunError::Config(msg));
        if self.kind != Kind::Sweep && self.configs.is_some() {
            return err(format!("'configs' is only valid for kind = sweep, not {}", self.kind.name()));
        }
        match self.kind {
            Kind::Sweep => {
                let members = match &self.configs {
                    Some(m) => m,
                    None => return err("kind = sweep needs a 'configs' array".into()),
                };
                if members.is_empty() {
                    return err("sweep 'configs' array is empty".into());
                }
                for (i, member) in members.iter().enumerate() {
                    if member.kind == Kind::Sweep {
                        return err(format!("configs[{i}]: sweeps do not nest"));
                    }
                    member
                        .validate()
                        .map_err(|e| RunError::Config(format!("configs[{i}]: {e}")))?;
                }
            }
            Kind::Flow => self.validate_flow()?,
            Kind::Inequality => {
                if self.grid.is_none() {
                    return err("inequality runs need a grid".into());
                }
                if self.potential.is_none() {
                    return err("inequality runs need a potential".into());
                }
                if let Some(f) = &self.functional {
                    if f.family != "relative" {
                        return err(format!(
                            "inequality runs use the relative entropy; functional family '{}' is not supported",
                            f.family
                        ));
                    }
                    if f.m.is_some_and(|m| m != 1.0) {
                        return err("relative entropy uses the Boltzmann kernel; omit m or set 1".into());
                    }
                }
                if let Some(l) = &self.loja {
                    check_loja(l)?;
                }
            }
            Kind::Estimate => {
                let source = self.estimate.clone().unwrap_or_default().source;
                match source.as_str() {
                    "dirac_path" => {}
                    "trajectory" => self.validate_flow()?,
                    other => return err(format!("unknown estimate source '{other}'")),
                }
            }
        }
        Ok(())
    }

    fn validate_flow(&self) -> Result<()> {
        let err = |msg: &str| Err(RunError::Config(msg.into()));
        if self.potential.is_none() {
            return err("flow runs need a potential");
        }
        let functional = match &self.functional {
            Some(f) => f,
            None => return err("flow runs need a functional"),
        };
        let initial = match &self.initial {
            Some(i) => i,
            None => return err("flow runs need an initial condition"),
        };
        if self.solver.is_none() {
            return err("flow runs need solver controls (at least t_end)");
        }
        let atomic = matches!(initial, InitialSpec::Atoms { .. });
        match functional.family.as_str() {
            "potential_only" => {
                if functional.m.is_some() {
                    return err("potential_only takes no kernel exponent m");
                }
                if !atomic && !matches!(initial, InitialSpec::File { .. }) {
                    return err("potential_only flows evolve atomic measures; use an atoms initial condition");
                }
            }
            "relative" => {
                if functional.m.is_some_and(|m| m != 1.0) {
                    return err("relative entropy uses the Boltzmann kernel; omit m or set 1");
                }
                if atomic {
                    return err("relative entropy needs a grid density, not atoms");
                }
                if self.grid.is_none() {
                    return err("flow runs on densities need a grid");
                }
            }
            "internal_potential" => {
                if atomic {
                    return err("internal_potential needs a grid density, not atoms");
                }
                if self.grid.is_none() {
                    return err("flow runs on densities need a grid");
                }
            }
            other => {
                return Err(RunError::Config(format!("unknown functional family '{other}'")));
            }
        }
        if let Some(l) = &self.loja {
            check_loja(l)?;
        }
        Ok(())
    }
}

pub fn check_loja(l: &LojaSpec) -> Result<()> {
    match (l.c_g, l.c_f) {
        (Some(_), Some(_)) => Err(RunError::Config("give exactly one of loja.c_g, loja.c_f".into())),
        (None, None) => Err(RunError::Config("loja needs one of c_g, c_f".into())),
        _ => Ok(()),
    }
}
