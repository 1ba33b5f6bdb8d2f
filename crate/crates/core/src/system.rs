//! A loaded deployment: knowledge base, canonical store and tool gateway,
//! plus the sentence-to-answer pipeline over them.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Serialize;

use crate::frontend::{classify, extract_intent, matching_values, parse, FrontendError, QueryIntent};
use crate::gateway::{RemoteConfig, ToolGateway};
use crate::knowledge::{KnowledgeBase, KnowledgeDocument};
use crate::planner::{execute, execute_goals, map_intent, render_sql, ConceptualPlan, Mode, PlanError, ResultTable};
use crate::reasoner::{goal, parse_goals, Reasoner, SolveOptions, Strategy};
use crate::store::{unlisted_columns, CanonicalStore, RelationalTable};
use crate::Error;

#[derive(Debug, Clone)]
pub struct System {
    kb: KnowledgeBase,
    store: CanonicalStore,
    gateway: ToolGateway,
    tables: Vec<RelationalTable>,
    options: SolveOptions,
    warnings: Vec<String>,
}

/// Every artifact produced while answering one sentence.
#[derive(Debug, Clone, Serialize)]
pub struct Answer {
    pub intent: QueryIntent,
    pub plan: ConceptualPlan,
    #[serde(serialize_with = "sql_field")]
    pub sql: Result<String, PlanError>,
    pub table: ResultTable,
}

fn sql_field<S: serde::Serializer>(sql: &Result<String, PlanError>, s: S) -> Result<S::Ok, S::Error> {
    match sql {
        Ok(text) => s.serialize_some(text),
        Err(PlanError::NotDirectlyRenderable { partial_sql, .. }) => s.serialize_some(&partial_sql),
        Err(_) => s.serialize_none(),
    }
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

impl System {
    /// Loads every `*.csv` table of `data_dir` and the knowledge document.
    /// Relative tool fixture locations resolve against the document's
    /// directory.
    pub fn load(data_dir: &Path, knowledge_file: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(knowledge_file).map_err(|e| io_error(knowledge_file, e))?;
        let doc = KnowledgeDocument::parse(&text)?;
        let tables = RelationalTable::load_dir(data_dir)?;
        let base = knowledge_file.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_parts(doc, tables, ToolGateway::with_base_dir(base))
    }

    /// Builds a system from an in-memory document and tables, registering the
    /// document's tools on `gateway`.
    pub fn from_parts(
        mut doc: KnowledgeDocument,
        tables: Vec<RelationalTable>,
        mut gateway: ToolGateway,
    ) -> Result<Self, Error> {
        let mut warnings = Vec::new();
        for table in &tables {
            let Some(entry) = doc.ontology.iter_mut().find(|e| e.table_name == table.name) else {
                warnings.push(format!("table {} maps to no concept; skipped", table.name));
                continue;
            };
            let extra: Vec<String> = unlisted_columns(table, entry).into_iter().map(String::from).collect();
            if !extra.is_empty() {
                warnings.push(format!(
                    "table {} has columns not listed for {}: {}; admitted",
                    table.name,
                    entry.concept_name,
                    extra.join(", ")
                ));
                entry.attributes.extend(extra);
            }
        }
        let kb = KnowledgeBase::from_document(doc)?;
        let mut store = CanonicalStore::new();
        for table in &tables {
            if let Some(entry) = kb.entry_for_table(&table.name) {
                store.ingest(table, entry)?;
            }
        }
        gateway.set_remote(RemoteConfig {
            enabled: kb.options().allow_remote_tools,
            timeout: Duration::from_millis(kb.options().remote_timeout_ms),
            transport: None,
        });
        for spec in kb.tool_specs() {
            gateway.register(spec.clone())?;
        }
        for binding in kb.tool_bindings() {
            for op in &binding.operations {
                if gateway.spec(op).is_none() {
                    warnings.push(format!("tool {op} for {} is not registered", binding.relation));
                }
            }
        }
        for w in &warnings {
            log::warn!("{w}");
        }
        Ok(System {
            kb,
            store,
            gateway,
            tables,
            options: SolveOptions::default(),
            warnings,
        })
    }

    /// Directory holding the bundled sample deployment.
    pub fn bundled_dir() -> PathBuf {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join("bundled")
    }

    /// The bundled sample deployment.
    pub fn bundled() -> Self {
        let dir = Self::bundled_dir();
        Self::load(&dir.join("tables"), &dir.join("knowledge.json")).expect("bundled data loads")
    }

    pub fn kb(&self) -> &KnowledgeBase {
        &self.kb
    }

    pub fn store(&self) -> &CanonicalStore {
        &self.store
    }

    pub fn gateway(&self) -> &ToolGateway {
        &self.gateway
    }

    pub fn gateway_mut(&mut self) -> &mut ToolGateway {
        &mut self.gateway
    }

    pub fn tables(&self) -> &[RelationalTable] {
        &self.tables
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn options(&self) -> SolveOptions {
        self.options
    }

    pub fn set_options(&mut self, options: SolveOptions) {
        self.options = options;
    }

    pub fn reasoner(&self) -> Reasoner<'_> {
        Reasoner::new(&self.kb, &self.gateway).with_options(self.options)
    }

    /// Parses and grounds a sentence. The selector may be unresolved.
    pub fn understand(&self, sentence: &str) -> Result<QueryIntent, FrontendError> {
        let tree = parse(sentence)?;
        let template = classify(&tree)?;
        extract_intent(&template, &self.kb, &self.store)
    }

    pub fn plan(&self, intent: &QueryIntent) -> Result<ConceptualPlan, PlanError> {
        map_intent(intent, &self.kb, &self.store)
    }

    pub fn execute(&self, plan: &ConceptualPlan, mode: Mode) -> ResultTable {
        execute(plan, &self.store, &self.reasoner(), mode)
    }

    /// Answers a sentence. When the chosen selector attribute yields nothing,
    /// the other attributes holding the constants are tried in turn; an
    /// unmatched constant gives an empty table rather than an error.
    pub fn answer(&self, sentence: &str, mode: Mode) -> Result<Answer, Error> {
        let intent = self.understand(sentence)?;
        let mut first: Option<Answer> = None;
        for candidate in self.selector_attempts(&intent) {
            let plan = self.plan(&candidate)?;
            let table = self.execute(&plan, mode);
            let answer = Answer {
                sql: render_sql(&plan, &self.kb),
                intent: candidate,
                plan,
                table,
            };
            if !answer.table.is_empty() {
                return Ok(answer);
            }
            first.get_or_insert(answer);
        }
        let mut answer = first.ok_or(Error::Plan(PlanError::EmptyPlan))?;
        if let Some(sel) = answer.intent.object_selector() {
            if !sel.resolved {
                answer
                    .table
                    .warnings
                    .push(format!("no attribute of {} holds {:?}", answer.intent.target_concept, sel.terms));
            }
        }
        Ok(answer)
    }

    fn selector_attempts(&self, intent: &QueryIntent) -> Vec<QueryIntent> {
        let Some(sel) = intent.object_selector() else {
            return vec![intent.clone()];
        };
        let mut out = vec![intent.clone()];
        let concept = &intent.target_concept;
        for attr in &sel.alternatives {
            let mut values = Vec::new();
            for term in &sel.terms {
                let m = matching_values(&self.kb, &self.store, concept, attr, term);
                if m.is_empty() {
                    values.push(term.clone());
                } else {
                    values.extend(m);
                }
            }
            values.dedup();
            let mut alt = intent.clone();
            if let Some(s) = alt.object_selector_mut() {
                s.alternatives.retain(|a| a != attr);
                s.attribute = attr.clone();
                s.values = values;
            }
            out.push(alt);
        }
        out
    }

    /// Runs textual res goals. `strategy` pins one rung; otherwise the whole
    /// ladder runs. Constants in key positions are seeded when `seed` is set.
    pub fn query_goals(&self, text: &str, strategy: Option<Strategy>, seed: bool) -> Result<ResultTable, Error> {
        let goals = parse_goals(text)?;
        goal::validate(&goals, &self.kb)?;
        let mut seeds = Vec::new();
        if seed {
            for g in &goals {
                if let Some(pk) = g.primary_key.as_const() {
                    seeds.push((g.concept.clone(), pk.to_string()));
                }
            }
        }
        Ok(execute_goals(&goals, &self.store, &self.reasoner(), &seeds, strategy))
    }
}

/// Sentence in, result table out.
pub fn run_pipeline(sentence: &str, system: &System, mode: Mode) -> Result<ResultTable, Error> {
    system.answer(sentence, mode).map(|a| a.table)
}
