//! Experiment description, read from a single JSON file.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sparsecmd_core::{Matrix, PlantModel, QuantizerConfig, ReferenceData, SolverConfig};

use crate::error::{CliError, CliResult};

pub const DEFAULT_GRID_STEPS: usize = 2000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ReferenceSpec {
    /// Explicit sampling instants and target values.
    Samples {
        instants: Vec<f64>,
        values: Vec<f64>,
    },
    /// `t_i = i·spacing`, `Y_i = sin t_i` for `i = 1..=count`.
    Sin { count: usize, spacing: f64 },
}

impl ReferenceSpec {
    pub fn build(&self) -> sparsecmd_core::Result<ReferenceData> {
        match self {
            ReferenceSpec::Samples { instants, values } => {
                ReferenceData::new(instants.clone(), values.clone())
            }
            ReferenceSpec::Sin { count, spacing } => ReferenceData::sine(*count, *spacing),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub plant: PlantModel,
    pub reference: ReferenceSpec,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default = "default_quantizer")]
    pub quantizer: QuantizerConfig,
    #[serde(default = "default_grid_steps")]
    pub grid_steps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

fn default_quantizer() -> QuantizerConfig {
    QuantizerConfig::new(0.1).expect("positive step")
}

fn default_grid_steps() -> usize {
    DEFAULT_GRID_STEPS
}

impl ExperimentConfig {
    /// Double-pole plant `1/(s+1)²`, twelve samples of `sin` at `π/6`
    /// spacing, `μ = 0.01`, `κ = 0.001`, `ν = 0.05`, `Δ = 0.1`.
    pub fn paper_example() -> Self {
        let plant = PlantModel::new(
            Matrix::from_rows(&[vec![0.0, 1.0], vec![-1.0, -2.0]]).expect("static shape"),
            vec![0.0, 1.0],
            vec![1.0, 0.0],
        )
        .expect("finite entries");
        Self {
            plant,
            reference: ReferenceSpec::Sin {
                count: 12,
                spacing: PI / 6.0,
            },
            solver: SolverConfig {
                mu: 0.01,
                kappa: 0.001,
                nu: 0.05,
                ..SolverConfig::default()
            },
            quantizer: default_quantizer(),
            grid_steps: DEFAULT_GRID_STEPS,
            output_dir: None,
        }
    }

    pub fn from_json(text: &str) -> CliResult<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| {
            CliError::Config(format!("line {}, column {}: {e}", e.line(), e.column()))
        })?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Semantic checks that serde cannot express.
    pub fn check(&self) -> CliResult<()> {
        self.reference
            .build()
            .map_err(|e| CliError::Config(format!("reference: {e}")))?;
        self.solver
            .validate()
            .map_err(|e| CliError::Config(format!("solver: {e}")))?;
        if self.grid_steps == 0 {
            return Err(CliError::Config("grid_steps must be at least 1".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}
