use std::fmt;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandName {
    SvcBuild,
    Thickness,
    FitAlpha,
    SvcVerify,
    Spectral,
    Observability,
    ProbeAsymptotics,
    Necessity,
}

impl CommandName {
    pub fn as_str(self) -> &'static str {
        match self {
            CommandName::SvcBuild => "svc-build",
            CommandName::Thickness => "thickness",
            CommandName::FitAlpha => "fit-alpha",
            CommandName::SvcVerify => "svc-verify",
            CommandName::Spectral => "spectral",
            CommandName::Observability => "observability",
            CommandName::ProbeAsymptotics => "probe-asymptotics",
            CommandName::Necessity => "necessity",
        }
    }
}

impl fmt::Display for CommandName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

fn empty_object() -> Value {
    Value::Object(Map::new())
}

/// One experiment: a command, its JSON parameters, where to write, and the
/// seed for anything randomized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: CommandName,
    #[serde(default = "empty_object")]
    pub parameters: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn new(command: CommandName) -> Self {
        ExperimentConfig { command, parameters: empty_object(), output_path: None, seed: 0 }
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
        let cfg: ExperimentConfig = from_json_str(&text, "")?;
        if !cfg.parameters.is_object() {
            return Err(CliError::Validation("/parameters: expected a JSON object".into()));
        }
        Ok(cfg)
    }

    /// Typed parameters; schema errors carry a JSON pointer into the config.
    pub fn typed<T: DeserializeOwned>(&self) -> Result<T, CliError> {
        from_json_value(self.parameters.clone(), "/parameters")
    }

    /// The config with `parameters` replaced by their fully defaulted form.
    pub fn resolved<T: Serialize>(&self, typed: &T) -> Self {
        let parameters = serde_json::to_value(typed).expect("parameters serialize");
        ExperimentConfig { parameters, ..self.clone() }
    }

    /// SHA-256 over the canonical JSON of command, parameters and seed. The
    /// output path is left out so that the same experiment hashes the same
    /// wherever it is written.
    pub fn content_hash(&self) -> String {
        let canonical = serde_json::json!({
            "command": self.command,
            "parameters": self.parameters,
            "seed": self.seed,
        });
        let digest = Sha256::digest(canonical.to_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        match seg {
            Segment::Seq { index } => out.push_str(&format!("/{index}")),
            Segment::Map { key } => out.push_str(&format!("/{}", key.replace('~', "~0").replace('/', "~1"))),
            Segment::Enum { variant } => out.push_str(&format!("/{variant}")),
            Segment::Unknown => {}
        }
    }
    out
}

fn schema_error(prefix: &str, path: &serde_path_to_error::Path, inner: impl fmt::Display) -> CliError {
    let at = format!("{prefix}{}", pointer(path));
    let at = if at.is_empty() { "/".to_string() } else { at };
    CliError::Validation(format!("{at}: {inner}"))
}

pub fn from_json_str<T: DeserializeOwned>(text: &str, prefix: &str) -> Result<T, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| schema_error(prefix, e.path(), e.inner()))
}

pub fn from_json_value<T: DeserializeOwned>(value: Value, prefix: &str) -> Result<T, CliError> {
    serde_path_to_error::deserialize(value).map_err(|e| schema_error(prefix, e.path(), e.inner()))
}
