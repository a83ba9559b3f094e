//! Run configuration: one JSON document, any field overridable by its dotted
//! name (`model.gamma`, `sim.s0`, ...). Later overrides win.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::model::{AoIState, ModelParams};

/// Environment variable that overrides `output.directory`.
pub const OUTPUT_DIR_ENV: &str = "AOI_ISAC_OUTPUT_DIR";

/// Every overridable field, in document order.
pub const FIELDS: &[&str] = &[
    "model.lambda_s",
    "model.lambda_c",
    "model.c_s",
    "model.c_c",
    "model.gamma",
    "model.a_max",
    "solver.tol",
    "solver.max_iter",
    "sim.n",
    "sim.horizon",
    "sim.seed",
    "sim.s0",
    "output.directory",
    "output.formats",
];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config is not valid: {0}")]
    Parse(String),
    #[error("unknown config field {0:?}")]
    UnknownField(String),
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_owned(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Ascii,
    Pgm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub n: usize,
    pub horizon: usize,
    pub seed: u64,
    pub s0: AoIState,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n: 10_000,
            horizon: 400,
            seed: 42,
            s0: AoIState::new(1, 1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("out"),
            formats: vec![Format::Csv, Format::Json, Format::Ascii, Format::Pgm],
        }
    }
}

impl OutputConfig {
    pub fn wants(&self, format: Format) -> bool {
        self.formats.contains(&format)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelParams,
    pub solver: SolverConfig,
    pub sim: SimConfig,
    pub output: OutputConfig,
}

/// Parses a flag value: `sim.s0` accepts `a,b`, `output.formats` accepts a
/// comma list, `output.directory` is taken verbatim; anything else is JSON.
fn override_value(field: &str, raw: &str) -> Result<Value, ConfigError> {
    match field {
        "sim.s0" if !raw.trim_start().starts_with('{') => {
            let parts: Vec<_> = raw.split(',').map(str::trim).collect();
            match parts.as_slice() {
                [a, b] => {
                    let a: usize = a.parse().map_err(|_| invalid(field, format!("bad alpha_s {a:?}")))?;
                    let b: usize = b.parse().map_err(|_| invalid(field, format!("bad alpha_b {b:?}")))?;
                    Ok(serde_json::json!({ "alpha_s": a, "alpha_b": b }))
                }
                _ => Err(invalid(field, format!("expected \"alpha_s,alpha_b\", got {raw:?}"))),
            }
        }
        "output.formats" if !raw.trim_start().starts_with('[') => Ok(Value::Array(
            raw.split(',')
                .map(|f| Value::String(f.trim().to_owned()))
                .collect(),
        )),
        "output.directory" => Ok(Value::String(raw.to_owned())),
        _ => serde_json::from_str(raw).map_err(|_| invalid(field, format!("cannot parse {raw:?}"))),
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_owned(),
            source,
        })?;
        Self::from_json(&text)
    }

    /// Sets one field by dotted name from its command-line spelling.
    pub fn apply_override(&mut self, field: &str, raw: &str) -> Result<(), ConfigError> {
        if !FIELDS.contains(&field) {
            return Err(ConfigError::UnknownField(field.to_owned()));
        }
        let (section, key) = field.split_once('.').expect("dotted field name");
        let mut doc = serde_json::to_value(&*self).expect("config serialises");
        doc[section][key] = override_value(field, raw)?;
        *self = serde_json::from_value(doc).map_err(|e| invalid(field, e.to_string()))?;
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.model.validate().map_err(|e| match e {
            crate::model::ParamError::OutOfRange { field, .. } => {
                invalid(&format!("model.{field}"), e.to_string())
            }
        })?;
        if self.solver.tol.is_nan() || self.solver.tol <= 0.0 {
            return Err(invalid("solver.tol", format!("must be > 0, got {}", self.solver.tol)));
        }
        if self.solver.max_iter == 0 {
            return Err(invalid("solver.max_iter", "must be >= 1"));
        }
        if self.sim.n < 2 {
            return Err(invalid("sim.n", format!("must be >= 2, got {}", self.sim.n)));
        }
        if self.sim.horizon == 0 {
            return Err(invalid("sim.horizon", "must be >= 1"));
        }
        if !self.model.contains(self.sim.s0) {
            return Err(invalid(
                "sim.s0",
                format!("{} lies outside the grid {{0..={}}}²", self.sim.s0, self.model.a_max),
            ));
        }
        if self.output.formats.is_empty() {
            return Err(invalid("output.formats", "must name at least one format"));
        }
        Ok(())
    }

    /// Compact JSON, embedded in artifacts.
    pub fn to_compact_json(&self) -> String {
        serde_json::to_string(self).expect("config serialises")
    }
}
