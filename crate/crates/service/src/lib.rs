//! Session state shared by the command line, the REPL and the HTTP API.

pub mod http;
pub mod repl;

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use kriq_core::knowledge::KnowledgeDocument;
use kriq_core::planner::{Mode, ResultRow, ResultTable, RowProvenance};
use kriq_core::reasoner::Strategy;
use kriq_core::{Answer, System};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("no data is loaded")]
    NotLoaded,
    #[error("the query text is empty")]
    EmptyQuery,
    #[error("no result row has provenance id `{0}`")]
    UnknownProvenance(String),
    #[error(transparent)]
    Core(#[from] kriq_core::Error),
}

impl SessionError {
    pub fn name(&self) -> &'static str {
        match self {
            SessionError::NotLoaded => "NotLoaded",
            SessionError::EmptyQuery => "EmptyQuery",
            SessionError::UnknownProvenance(_) => "UnknownProvenance",
            SessionError::Core(e) => e.name(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct HistoryEntry {
    pub text: String,
    pub mode: Mode,
    pub result_id: String,
}

/// What `POST /query` returns.
#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct QueryResponse {
    pub result_id: String,
    pub mode: Mode,
    pub columns: Vec<String>,
    pub rows: Vec<ResultRow>,
    pub warnings: Vec<String>,
}

impl QueryResponse {
    fn new(result_id: String, table: &ResultTable) -> Self {
        QueryResponse {
            result_id,
            mode: table.mode,
            columns: table.columns.clone(),
            rows: table.rows.clone(),
            warnings: table.warnings.clone(),
        }
    }
}

/// What `GET /explain/{id}` returns.
#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct Explanation {
    pub provenance_id: String,
    pub values: Vec<String>,
    pub derived: bool,
    #[serde(flatten)]
    pub provenance: RowProvenance,
}

/// What `GET /schema` returns: the loaded knowledge plus load warnings.
#[derive(Debug, Clone, Serialize)]
pub struct SchemaView {
    #[serde(flatten)]
    pub knowledge: KnowledgeDocument,
    pub facts: usize,
    pub tools: Vec<String>,
    pub warnings: Vec<String>,
}

/// One loaded deployment plus the query log.
#[derive(Debug, Default)]
pub struct Session {
    system: Option<System>,
    source: Option<(PathBuf, PathBuf)>,
    history: Vec<HistoryEntry>,
    results: HashMap<String, ResultTable>,
    rows: HashMap<String, ResultRow>,
    pub mode: Option<Mode>,
}

impl Session {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_system(system: System) -> Self {
        Session {
            system: Some(system),
            ..Self::default()
        }
    }

    pub fn load(&mut self, data_dir: &Path, knowledge_file: &Path) -> Result<&System, SessionError> {
        let system = System::load(data_dir, knowledge_file)?;
        self.source = Some((data_dir.to_path_buf(), knowledge_file.to_path_buf()));
        self.system = Some(system);
        Ok(self.system.as_ref().expect("just loaded"))
    }

    /// Reloads from the paths of the last `load`.
    pub fn reload(&mut self) -> Result<&System, SessionError> {
        let (data, knowledge) = self.source.clone().ok_or(SessionError::NotLoaded)?;
        self.load(&data, &knowledge)
    }

    pub fn system(&self) -> Result<&System, SessionError> {
        self.system.as_ref().ok_or(SessionError::NotLoaded)
    }

    pub fn default_mode(&self) -> Mode {
        self.mode.unwrap_or(Mode::Enhanced)
    }

    /// Answers a sentence without recording it.
    pub fn answer(&self, text: &str, mode: Mode) -> Result<Answer, SessionError> {
        if text.trim().is_empty() {
            return Err(SessionError::EmptyQuery);
        }
        Ok(self.system()?.answer(text, mode)?)
    }

    /// Runs raw res goals without recording them.
    pub fn goal(&self, text: &str, strategy: Option<Strategy>, mode: Mode) -> Result<ResultTable, SessionError> {
        if text.trim().is_empty() {
            return Err(SessionError::EmptyQuery);
        }
        let strategy = match mode {
            Mode::Baseline => Some(Strategy::DirectOnly),
            Mode::Enhanced => strategy,
        };
        Ok(self.system()?.query_goals(text, strategy, mode == Mode::Enhanced)?)
    }

    /// Stores a result and appends it to the log.
    pub fn record(&mut self, text: &str, table: &ResultTable) -> QueryResponse {
        let result_id = format!("q{}", self.history.len() + 1);
        self.history.push(HistoryEntry {
            text: text.to_string(),
            mode: table.mode,
            result_id: result_id.clone(),
        });
        for row in &table.rows {
            self.rows.insert(row.provenance_id.clone(), row.clone());
        }
        self.results.insert(result_id.clone(), table.clone());
        QueryResponse::new(result_id, table)
    }

    /// Answers and records a sentence, or raw goals when `goal` is set.
    pub fn query(&mut self, text: &str, mode: Mode, goal: bool) -> Result<QueryResponse, SessionError> {
        let table = if goal {
            self.goal(text, None, mode)?
        } else {
            self.answer(text, mode)?.table
        };
        Ok(self.record(text, &table))
    }

    pub fn explain(&self, provenance_id: &str) -> Result<Explanation, SessionError> {
        let row = self
            .rows
            .get(provenance_id)
            .ok_or_else(|| SessionError::UnknownProvenance(provenance_id.to_string()))?;
        Ok(Explanation {
            provenance_id: row.provenance_id.clone(),
            values: row.values.clone(),
            derived: row.derived,
            provenance: row.provenance.clone(),
        })
    }

    pub fn result(&self, result_id: &str) -> Option<&ResultTable> {
        self.results.get(result_id)
    }

    pub fn history(&self) -> &[HistoryEntry] {
        &self.history
    }

    pub fn schema(&self) -> Result<SchemaView, SessionError> {
        let sys = self.system()?;
        Ok(SchemaView {
            knowledge: sys.kb().to_document(),
            facts: sys.store().len(),
            tools: sys.gateway().tool_names().map(String::from).collect(),
            warnings: sys.warnings().to_vec(),
        })
    }
}
