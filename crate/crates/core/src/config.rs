//! Application configuration: one JSON document that names the puppet
//! model, the gesture library, motor channels, responder and backend.
//!
//! Relative paths are resolved against the config file's directory. The
//! string `"builtin"` selects the bundled demo model or gesture library.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::actuation::MotorChannelConfig;
use crate::diagnostics::{DiagCode, Diagnostic};
use crate::gestures::{builtin_library, load_library, GestureLibrary, LibraryError};
use crate::kinematics::{ModelError, PuppetModel};
use crate::perception::LlmClientConfig;

pub const BUILTIN: &str = "builtin";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ResponderConfig {
    #[default]
    Rule,
    Llm {
        #[serde(default)]
        llm: LlmClientConfig,
    },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BackendConfig {
    #[default]
    Sim,
    Serial {
        device: PathBuf,
    },
}

/// What a new utterance does while a sequence is playing.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BusyPolicy {
    #[default]
    Preempt,
    Queue,
}

/// The document as written on disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument {
    #[serde(default = "builtin")]
    pub model: String,
    #[serde(default = "builtin")]
    pub gestures: String,
    /// Omitted means one demo channel per plane.
    #[serde(default)]
    pub channels: Option<Vec<MotorChannelConfig>>,
    #[serde(default)]
    pub responder: ResponderConfig,
    #[serde(default = "default_tick_hz")]
    pub tick_hz: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub backend: BackendConfig,
    #[serde(default)]
    pub busy_policy: BusyPolicy,
    #[serde(default = "default_bind")]
    pub console_bind: String,
}

fn builtin() -> String {
    BUILTIN.to_string()
}

fn default_tick_hz() -> f64 {
    50.0
}

fn default_bind() -> String {
    "127.0.0.1:8765".to_string()
}

impl Default for ConfigDocument {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields defaulted")
    }
}

/// A fully loaded and cross-checked configuration.
#[derive(Clone, Debug)]
pub struct AppConfig {
    pub model: PuppetModel,
    pub library: GestureLibrary,
    pub channels: Vec<MotorChannelConfig>,
    pub responder: ResponderConfig,
    pub tick_hz: f64,
    pub seed: u64,
    pub backend: BackendConfig,
    pub busy_policy: BusyPolicy,
    pub console_bind: String,
}

impl AppConfig {
    /// Bundled model and library with rule responder and sim backend.
    pub fn demo() -> Self {
        Self::from_document(ConfigDocument::default(), Path::new(".")).expect("demo config is valid")
    }

    pub fn dt_s(&self) -> f64 {
        1.0 / self.tick_hz
    }

    pub fn from_document(doc: ConfigDocument, base_dir: &Path) -> Result<Self, ConfigError> {
        if !(doc.tick_hz > 0.0 && doc.tick_hz.is_finite()) {
            return Err(ConfigError::SchemaError {
                path: base_dir.display().to_string(),
                pointer: "/tick_hz".into(),
                message: format!("tick_hz must be positive, got {}", doc.tick_hz),
            });
        }
        let model = if doc.model == BUILTIN {
            PuppetModel::demo()
        } else {
            let path = base_dir.join(&doc.model);
            let text = read(&path)?;
            PuppetModel::from_json(&text).map_err(|e| match e {
                ModelError::Parse(m) => ConfigError::SchemaError {
                    path: path.display().to_string(),
                    pointer: String::new(),
                    message: m.to_string(),
                },
                ModelError::Invalid(d) => ConfigError::CrossRefError(d),
            })?
        };
        let library = if doc.gestures == BUILTIN {
            builtin_library(&model)
        } else {
            let path = base_dir.join(&doc.gestures);
            let text = read(&path)?;
            load_library(&text).and_then(|lib| {
                let diags = lib.check_against(&model);
                if diags.is_empty() {
                    Ok(lib)
                } else {
                    Err(LibraryError::ModelShapeMismatch(diags))
                }
            })
        }
        .map_err(|e| match e {
            LibraryError::Parse(m) => ConfigError::SchemaError {
                path: base_dir.join(&doc.gestures).display().to_string(),
                pointer: String::new(),
                message: m.to_string(),
            },
            other => ConfigError::CrossRefError(other.diagnostics().to_vec()),
        })?;
        let channels = doc
            .channels
            .unwrap_or_else(|| MotorChannelConfig::demo_channels(&model));
        let diags = check_channels(&model, &channels);
        if !diags.is_empty() {
            return Err(ConfigError::CrossRefError(diags));
        }
        Ok(Self {
            model,
            library,
            channels,
            responder: doc.responder,
            tick_hz: doc.tick_hz,
            seed: doc.seed,
            backend: doc.backend,
            busy_policy: doc.busy_policy,
            console_bind: doc.console_bind,
        })
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("file not found: {0}")]
    FileNotFound(String),
    #[error("schema error in {path} at `{pointer}`: {message}")]
    SchemaError {
        path: String,
        pointer: String,
        message: String,
    },
    #[error("cross-reference errors:\n{}", crate::diagnostics::summarize(.0))]
    CrossRefError(Vec<Diagnostic>),
}

impl ConfigError {
    pub fn code(&self) -> &'static str {
        match self {
            ConfigError::FileNotFound(_) => "FileNotFound",
            ConfigError::SchemaError { .. } => "SchemaError",
            ConfigError::CrossRefError(_) => "CrossRefError",
        }
    }
}

fn read(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|_| ConfigError::FileNotFound(path.display().to_string()))
}

/// Parses a config document, reporting the JSON pointer of the first schema
/// violation.
pub fn parse_document(text: &str, origin: &str) -> Result<ConfigDocument, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let pointer = pointer_of(e.path());
        ConfigError::SchemaError {
            path: origin.to_string(),
            pointer,
            message: e.inner().to_string(),
        }
    })
}

fn pointer_of(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        out.push('/');
        match seg {
            Segment::Seq { index } => out.push_str(&index.to_string()),
            Segment::Map { key } => out.push_str(&key.replace('~', "~0").replace('/', "~1")),
            Segment::Enum { variant } => out.push_str(variant),
            Segment::Unknown => out.push('?'),
        }
    }
    out
}

pub fn load_config(path: impl AsRef<Path>) -> Result<AppConfig, ConfigError> {
    let path = path.as_ref();
    let text = read(path)?;
    let doc = parse_document(&text, &path.display().to_string())?;
    let base = path.parent().unwrap_or(Path::new("."));
    AppConfig::from_document(doc, base).map_err(|e| match e {
        ConfigError::SchemaError { pointer, message, .. } => ConfigError::SchemaError {
            path: path.display().to_string(),
            pointer,
            message,
        },
        other => other,
    })
}

pub fn check_channels(model: &PuppetModel, channels: &[MotorChannelConfig]) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    let mut ids = BTreeSet::new();
    let mut covered = BTreeSet::new();
    for (i, ch) in channels.iter().enumerate() {
        let path = format!("channels/{i}");
        if !ids.insert(ch.channel_id) {
            diags.push(Diagnostic::new(
                format!("{path}/channel_id"),
                DiagCode::DuplicateChannel,
                format!("channel {} declared twice", ch.channel_id),
            ));
        }
        if model.plane(&ch.target).is_none() {
            diags.push(Diagnostic::new(
                format!("{path}/target"),
                DiagCode::UnknownChannelTarget,
                format!("plane `{}` is not in the model", ch.target),
            ));
        } else if !covered.insert(ch.target.clone()) {
            diags.push(Diagnostic::new(
                format!("{path}/target"),
                DiagCode::DuplicateChannel,
                format!("plane `{}` already has a channel", ch.target),
            ));
        }
        for (field, v) in [
            ("displacement_limit_mm", ch.displacement_limit_mm),
            ("velocity_limit_mm_s", ch.velocity_limit_mm_s),
            ("torque_limit", ch.torque_limit),
            ("torque_gain", ch.torque_gain),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                diags.push(Diagnostic::new(
                    format!("{path}/{field}"),
                    DiagCode::NonPositiveChannelLimit,
                    format!("{field} must be positive, got {v}"),
                ));
            }
        }
    }
    for key in model.plane_keys() {
        if !covered.contains(&key) {
            diags.push(Diagnostic::new(
                "channels",
                DiagCode::UncoveredPlane,
                format!("no channel drives `{key}`"),
            ));
        }
    }
    diags
}
