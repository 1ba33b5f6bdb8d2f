//! Tool gateway: `applyOp` verification and the `extract` statement over
//! registered tools. Fixture adapters answer from local delimited files;
//! remote adapters go through a pluggable transport and are disabled unless
//! explicitly allowed.

mod extract;
mod fixture;
mod remote;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

pub use fixture::FixtureData;
pub use remote::{PluginRegistry, Record, RecordFn, Transport};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GatewayError {
    #[error("tool `{tool}` is unavailable: {reason}")]
    ToolUnavailable { tool: String, reason: String },
    #[error("tool `{tool}` output lacks extract field `{field}`")]
    SchemaMismatch { tool: String, field: String },
    #[error("invalid spec for tool `{tool}`: {reason}")]
    InvalidSpec { tool: String, reason: String },
}

impl GatewayError {
    pub fn name(&self) -> &'static str {
        match self {
            GatewayError::ToolUnavailable { .. } => "ToolUnavailable",
            GatewayError::SchemaMismatch { .. } => "SchemaMismatch",
            GatewayError::InvalidSpec { .. } => "InvalidSpec",
        }
    }

    fn unavailable(tool: &str, reason: impl Into<String>) -> Self {
        GatewayError::ToolUnavailable {
            tool: tool.to_string(),
            reason: reason.into(),
        }
    }

    fn invalid(tool: &str, reason: impl Into<String>) -> Self {
        GatewayError::InvalidSpec {
            tool: tool.to_string(),
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdapterKind {
    Fixture,
    WebForm,
    WebService,
    FlatFile,
}

impl AdapterKind {
    pub fn is_local(self) -> bool {
        matches!(self, AdapterKind::Fixture | AdapterKind::FlatFile)
    }
}

/// Declarative description of one tool in the extract-statement model:
/// `extract A1..Ak using matcher μ wrapper ω filler φ from location submit r where θ`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolSpec {
    pub name: String,
    #[serde(default, deserialize_with = "string_or_list")]
    pub verifies: Vec<String>,
    pub adapter: AdapterKind,
    #[serde(default)]
    pub location: String,
    #[serde(default)]
    pub extract_fields: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matcher: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wrapper: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filler: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transformer: Option<String>,
    #[serde(default)]
    pub submit_schema: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub form_condition: Option<String>,
    #[serde(default)]
    pub symmetric: bool,
}

impl ToolSpec {
    /// A fixture tool whose file lives at `location`.
    pub fn fixture(name: &str, location: impl Into<String>, field: &str) -> Self {
        ToolSpec {
            name: name.to_string(),
            verifies: Vec::new(),
            adapter: AdapterKind::Fixture,
            location: location.into(),
            extract_fields: vec![field.to_string()],
            matcher: None,
            wrapper: None,
            filler: None,
            transformer: None,
            submit_schema: vec![field.to_string()],
            form_condition: None,
            symmetric: false,
        }
    }
}

fn string_or_list<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<String>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Text(String),
        List(Vec<String>),
    }
    Ok(match Raw::deserialize(d)? {
        Raw::Text(s) => s.split(',').map(|p| p.trim().to_string()).filter(|p| !p.is_empty()).collect(),
        Raw::List(v) => v,
    })
}

/// Remote adapter settings. Remote calls fail with `ToolUnavailable` unless
/// `enabled` is set and a transport is installed.
#[derive(Clone, Default)]
pub struct RemoteConfig {
    pub enabled: bool,
    pub timeout: Duration,
    pub transport: Option<Arc<dyn Transport>>,
}

impl std::fmt::Debug for RemoteConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteConfig")
            .field("enabled", &self.enabled)
            .field("timeout", &self.timeout)
            .field("transport", &self.transport.is_some())
            .finish()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ToolHandle {
    pub name: String,
}

#[derive(Debug, Clone)]
struct RegisteredTool {
    spec: ToolSpec,
    data: Option<Arc<FixtureData>>,
}

/// Registry of tools addressable by name.
#[derive(Debug, Default)]
pub struct ToolGateway {
    tools: BTreeMap<String, RegisteredTool>,
    base_dir: Option<PathBuf>,
    remote: RemoteConfig,
    plugins: PluginRegistry,
    remote_calls: AtomicUsize,
}

impl Clone for ToolGateway {
    fn clone(&self) -> Self {
        ToolGateway {
            tools: self.tools.clone(),
            base_dir: self.base_dir.clone(),
            remote: self.remote.clone(),
            plugins: self.plugins.clone(),
            remote_calls: AtomicUsize::new(self.remote_calls.load(Ordering::Relaxed)),
        }
    }
}

impl ToolGateway {
    pub fn new() -> Self {
        Self::default()
    }

    /// Relative fixture locations are resolved against `dir`.
    pub fn with_base_dir(dir: impl Into<PathBuf>) -> Self {
        ToolGateway {
            base_dir: Some(dir.into()),
            ..Self::default()
        }
    }

    pub fn set_remote(&mut self, remote: RemoteConfig) {
        self.remote = remote;
    }

    pub fn plugins_mut(&mut self) -> &mut PluginRegistry {
        &mut self.plugins
    }

    pub fn register(&mut self, spec: ToolSpec) -> Result<ToolHandle, GatewayError> {
        if spec.name.trim().is_empty() {
            return Err(GatewayError::invalid(&spec.name, "empty tool name"));
        }
        let data = match spec.adapter {
            AdapterKind::Fixture | AdapterKind::FlatFile => {
                let path = self.resolve(&spec.location);
                if spec.location.is_empty() || !path.is_file() {
                    return Err(GatewayError::invalid(
                        &spec.name,
                        format!("fixture `{}` does not exist", path.display()),
                    ));
                }
                let data = FixtureData::from_path(&path, spec.submit_schema.len().max(1), spec.symmetric)
                    .map_err(|e| GatewayError::invalid(&spec.name, e))?;
                Some(Arc::new(data))
            }
            AdapterKind::WebForm => {
                if spec.filler.is_none() || spec.wrapper.is_none() {
                    return Err(GatewayError::invalid(&spec.name, "web-form adapters need a filler and a wrapper"));
                }
                None
            }
            AdapterKind::WebService => {
                if spec.transformer.is_none() {
                    return Err(GatewayError::invalid(&spec.name, "web-service adapters need a transformer"));
                }
                None
            }
        };
        Ok(self.insert(spec, data))
    }

    /// Registers an in-memory pair fixture.
    pub fn register_pairs(
        &mut self,
        name: &str,
        field: &str,
        pairs: impl IntoIterator<Item = (String, String)>,
        symmetric: bool,
    ) -> ToolHandle {
        let mut spec = ToolSpec::fixture(name, "", field);
        spec.symmetric = symmetric;
        let data = FixtureData::from_pairs(field, pairs, symmetric);
        self.insert(spec, Some(Arc::new(data)))
    }

    fn insert(&mut self, spec: ToolSpec, data: Option<Arc<FixtureData>>) -> ToolHandle {
        let handle = ToolHandle { name: spec.name.clone() };
        self.tools.insert(spec.name.clone(), RegisteredTool { spec, data });
        handle
    }

    fn resolve(&self, location: &str) -> PathBuf {
        let p = Path::new(location);
        match &self.base_dir {
            Some(base) if p.is_relative() => base.join(p),
            _ => p.to_path_buf(),
        }
    }

    pub fn spec(&self, name: &str) -> Option<&ToolSpec> {
        self.tools.get(name).map(|t| &t.spec)
    }

    pub fn tool_names(&self) -> impl Iterator<Item = &str> {
        self.tools.keys().map(String::as_str)
    }

    /// True when every registered tool answers from local data, so calls may
    /// be issued concurrently.
    pub fn is_side_effect_free(&self) -> bool {
        self.tools.values().all(|t| t.spec.adapter.is_local())
    }

    /// Number of calls that reached a remote transport.
    pub fn remote_calls(&self) -> usize {
        self.remote_calls.load(Ordering::Relaxed)
    }

    /// Whether tool `op` confirms a relation between `id_a` and `id_b`.
    pub fn apply_op(&self, op: &str, id_a: &str, id_b: &str) -> Result<bool, GatewayError> {
        let tool = self
            .tools
            .get(op)
            .ok_or_else(|| GatewayError::unavailable(op, "not registered"))?;
        match &tool.data {
            Some(data) => Ok(data.has_pair(id_a, id_b)),
            None => {
                let key = tool.spec.submit_schema.first().cloned().unwrap_or_default();
                let field = tool.spec.extract_fields.first().cloned().unwrap_or_default();
                let records = self.call_remote(&tool.spec, &[(key, id_a.to_string())])?;
                Ok(records.iter().any(|r| r.get(&field).is_some_and(|v| v == id_b)))
            }
        }
    }

    fn call_remote(&self, spec: &ToolSpec, submit: &[(String, String)]) -> Result<Vec<Record>, GatewayError> {
        if !self.remote.enabled {
            return Err(GatewayError::unavailable(&spec.name, "remote adapters are disabled"));
        }
        let transport = self
            .remote
            .transport
            .as_ref()
            .ok_or_else(|| GatewayError::unavailable(&spec.name, "no transport installed"))?;
        let mut input: Record = submit.iter().cloned().collect();
        if let Some(filler) = &spec.filler {
            input = self.plugins.apply_one(filler, input).map_err(|e| GatewayError::unavailable(&spec.name, e))?;
        }
        self.remote_calls.fetch_add(1, Ordering::Relaxed);
        let mut records = transport
            .request(spec, &input, self.remote.timeout)
            .map_err(|e| GatewayError::unavailable(&spec.name, e))?;
        for slot in [&spec.wrapper, &spec.transformer, &spec.matcher].into_iter().flatten() {
            records = self.plugins.apply(slot, records).map_err(|e| GatewayError::unavailable(&spec.name, e))?;
        }
        Ok(records)
    }
}
