use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Duration;

use super::ToolSpec;

/// A flat attribute record as exchanged with remote adapters.
pub type Record = BTreeMap<String, String>;

/// A component filling one of the matcher, wrapper, filler or transformer slots.
pub type RecordFn = Arc<dyn Fn(Vec<Record>) -> Result<Vec<Record>, String> + Send + Sync>;

/// The single request function behind remote adapters.
pub trait Transport: Send + Sync {
    fn request(&self, spec: &ToolSpec, input: &Record, timeout: Duration) -> Result<Vec<Record>, String>;
}

/// Named plug-in components. Names without a registered component act as
/// the identity.
#[derive(Clone, Default)]
pub struct PluginRegistry {
    components: BTreeMap<String, RecordFn>,
}

impl std::fmt::Debug for PluginRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.components.keys()).finish()
    }
}

impl PluginRegistry {
    pub fn insert(&mut self, name: &str, component: RecordFn) {
        self.components.insert(name.to_string(), component);
    }

    pub fn apply(&self, name: &str, records: Vec<Record>) -> Result<Vec<Record>, String> {
        match self.components.get(name) {
            Some(f) => f(records),
            None => {
                log::debug!("component `{name}` not registered, passing records through");
                Ok(records)
            }
        }
    }

    pub(super) fn apply_one(&self, name: &str, record: Record) -> Result<Record, String> {
        let mut out = self.apply(name, vec![record])?;
        if out.len() == 1 {
            Ok(out.remove(0))
        } else {
            Err(format!("component `{name}` must map one record to one record"))
        }
    }
}
