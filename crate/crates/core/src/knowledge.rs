//! Structural ontology, domain knowledge tables and the word-to-schema lexicon.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};

use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

use crate::gateway::ToolSpec;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KnowledgeError {
    #[error("inconsistent knowledge: {0}")]
    InconsistentKnowledge(String),
    #[error("malformed knowledge document: {0}")]
    Malformed(String),
}

impl KnowledgeError {
    pub fn name(&self) -> &'static str {
        match self {
            KnowledgeError::InconsistentKnowledge(_) => "InconsistentKnowledge",
            KnowledgeError::Malformed(_) => "MalformedKnowledge",
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ResolveError {
    #[error("no concept is known as `{0}`")]
    UnknownConcept(String),
    #[error("`{term}` names several concepts: {candidates:?}")]
    AmbiguousConcept { term: String, candidates: Vec<String> },
    #[error("no attribute is known as `{term}`")]
    UnknownAttribute { term: String },
    #[error("`{term}` names several attributes: {candidates:?}")]
    AmbiguousAttribute { term: String, candidates: Vec<String> },
}

impl ResolveError {
    pub fn name(&self) -> &'static str {
        match self {
            ResolveError::UnknownConcept(_) => "UnknownConcept",
            ResolveError::AmbiguousConcept { .. } => "AmbiguousConcept",
            ResolveError::UnknownAttribute { .. } => "UnknownAttribute",
            ResolveError::AmbiguousAttribute { .. } => "AmbiguousAttribute",
        }
    }
}

/// sO row: a concept, its backing table, key column and other attributes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OntologyEntry {
    pub concept_name: String,
    pub table_name: String,
    pub key_attribute: String,
    #[serde(default)]
    pub attributes: Vec<String>,
}

impl OntologyEntry {
    /// Key attribute followed by the listed attributes.
    pub fn all_attributes(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.key_attribute.as_str()).chain(self.attributes.iter().map(String::as_str))
    }

    pub fn has_attribute(&self, attribute: &str) -> bool {
        self.key_attribute == attribute || self.attributes.iter().any(|a| a == attribute)
    }
}

/// der row: properties of `concept_b` objects may stand in for `concept_a`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DerivationEdge {
    pub concept_a: String,
    pub concept_b: String,
}

/// forK row: a value-equality join between two tables' columns.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ForeignKeyLink {
    pub table_x: String,
    pub table_y: String,
    pub column_x: String,
    pub column_y: String,
}

impl ForeignKeyLink {
    /// The link read right-to-left.
    pub fn reversed(&self) -> ForeignKeyLink {
        ForeignKeyLink {
            table_x: self.table_y.clone(),
            table_y: self.table_x.clone(),
            column_x: self.column_y.clone(),
            column_y: self.column_x.clone(),
        }
    }

    /// Both orientations, the declared one first. A link between one column
    /// and itself yields a single orientation.
    pub fn orientations(&self) -> Vec<ForeignKeyLink> {
        let rev = self.reversed();
        if rev == *self {
            vec![self.clone()]
        } else {
            vec![self.clone(), rev]
        }
    }
}

/// simCon row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimilarConcept {
    pub concept_x: String,
    pub concept_y: String,
    #[serde(deserialize_with = "comma_list")]
    pub relations: Vec<String>,
}

/// cTool row: tools able to verify `relation`, most preferred first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolBinding {
    pub relation: String,
    #[serde(deserialize_with = "comma_list")]
    pub operations: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TermKind {
    Concept,
    Attribute,
    Relation,
    #[serde(alias = "action_verb", alias = "action")]
    ActionVerb,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexiconEntry {
    pub surface_term: String,
    pub kind: TermKind,
    pub target: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scope: Option<String>,
}

/// Maps a condition phrase ("protein coding") onto the existence of a
/// derived link from `concept` objects to `linked_concept` objects.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionRule {
    pub phrase: String,
    pub concept: String,
    pub linked_concept: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct KnowledgeOptions {
    pub symmetric_derivations: bool,
    pub conditions: Option<Vec<ConditionRule>>,
    /// Remote tool adapters stay disabled unless this is set.
    pub allow_remote_tools: bool,
    pub remote_timeout_ms: u64,
}

impl Default for KnowledgeOptions {
    fn default() -> Self {
        KnowledgeOptions {
            symmetric_derivations: true,
            conditions: None,
            allow_remote_tools: false,
            remote_timeout_ms: 10_000,
        }
    }
}

/// The knowledge configuration document as written on disk.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KnowledgeDocument {
    #[serde(default)]
    pub ontology: Vec<OntologyEntry>,
    #[serde(default)]
    pub derivatives: Vec<DerivationEdge>,
    #[serde(default)]
    pub foreign_keys: Vec<ForeignKeyLink>,
    #[serde(default)]
    pub similar_concepts: Vec<SimilarConcept>,
    #[serde(default)]
    pub tools: Vec<ToolBinding>,
    #[serde(default)]
    pub lexicon: Vec<LexiconEntry>,
    #[serde(default)]
    pub options: KnowledgeOptions,
    #[serde(default)]
    pub tools_registry: Vec<ToolSpec>,
}

impl KnowledgeDocument {
    pub fn parse(text: &str) -> Result<Self, KnowledgeError> {
        if text.trim().is_empty() {
            return Ok(KnowledgeDocument::default());
        }
        serde_json::from_str(text).map_err(|e| KnowledgeError::Malformed(e.to_string()))
    }
}

fn comma_list<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<String>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Text(String),
        List(Vec<String>),
    }
    let items = match Raw::deserialize(d)? {
        Raw::Text(s) => s.split(',').map(str::to_string).collect(),
        Raw::List(v) => v,
    };
    Ok(items
        .into_iter()
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect())
}

/// Lower-cases, trims, collapses inner whitespace and drops a naive plural
/// `s` from the last word.
pub fn normalize_term(term: &str) -> String {
    let words: Vec<String> = term.split_whitespace().map(str::to_lowercase).collect();
    let mut out = words.join(" ");
    let last_len = words.last().map_or(0, |w| w.chars().count());
    if last_len > 3 && out.ends_with('s') && !out.ends_with("ss") {
        out.pop();
    }
    out
}

/// Splits a camel-case identifier into words: `DNASequence` -> `DNA`, `Sequence`.
pub fn split_camel(name: &str) -> Vec<String> {
    let chars: Vec<char> = name.chars().collect();
    let mut words = Vec::new();
    let mut current = String::new();
    for i in 0..chars.len() {
        let c = chars[i];
        if c == '_' || c == '-' || c.is_whitespace() {
            if !current.is_empty() {
                words.push(std::mem::take(&mut current));
            }
            continue;
        }
        if !current.is_empty() {
            let prev = chars[i - 1];
            let next_lower = chars.get(i + 1).is_some_and(|n| n.is_lowercase());
            let boundary = (c.is_uppercase() && (prev.is_lowercase() || prev.is_ascii_digit()))
                || (c.is_uppercase() && prev.is_uppercase() && next_lower);
            if boundary {
                words.push(std::mem::take(&mut current));
            }
        }
        current.push(c);
    }
    if !current.is_empty() {
        words.push(current);
    }
    words
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
enum Tier {
    User,
    Auto,
    HeadWord,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct TermBinding {
    target: String,
    scope: Option<String>,
    tier: Tier,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct Lexicon {
    terms: BTreeMap<(TermKind, String), Vec<TermBinding>>,
}

impl Lexicon {
    fn add(&mut self, kind: TermKind, term: &str, target: &str, scope: Option<&str>, tier: Tier) {
        let key = (kind, normalize_term(term));
        if key.1.is_empty() {
            return;
        }
        let list = self.terms.entry(key).or_default();
        let binding = TermBinding {
            target: target.to_string(),
            scope: scope.map(str::to_string),
            tier,
        };
        if !list.iter().any(|b| b.target == binding.target && b.scope == binding.scope) {
            list.push(binding);
        }
    }

    fn get(&self, kind: TermKind, term: &str) -> &[TermBinding] {
        self.terms
            .get(&(kind, normalize_term(term)))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }
}

/// Immutable, validated knowledge: the five meta-tables, the tool registry
/// descriptions and the lexicon.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnowledgeBase {
    ontology: Vec<OntologyEntry>,
    derivatives: Vec<DerivationEdge>,
    foreign_keys: Vec<ForeignKeyLink>,
    similar_concepts: Vec<SimilarConcept>,
    tools: Vec<ToolBinding>,
    user_lexicon: Vec<LexiconEntry>,
    options: KnowledgeOptions,
    tool_specs: Vec<ToolSpec>,
    lexicon: Lexicon,
}

/// Parses and validates a knowledge document.
pub fn load_knowledge(text: &str) -> Result<KnowledgeBase, KnowledgeError> {
    KnowledgeBase::from_document(KnowledgeDocument::parse(text)?)
}

impl KnowledgeBase {
    pub fn from_document(doc: KnowledgeDocument) -> Result<Self, KnowledgeError> {
        validate(&doc)?;
        let lexicon = build_lexicon(&doc);
        Ok(KnowledgeBase {
            ontology: doc.ontology,
            derivatives: doc.derivatives,
            foreign_keys: doc.foreign_keys,
            similar_concepts: doc.similar_concepts,
            tools: doc.tools,
            user_lexicon: doc.lexicon,
            options: doc.options,
            tool_specs: doc.tools_registry,
            lexicon,
        })
    }

    pub fn to_document(&self) -> KnowledgeDocument {
        KnowledgeDocument {
            ontology: self.ontology.clone(),
            derivatives: self.derivatives.clone(),
            foreign_keys: self.foreign_keys.clone(),
            similar_concepts: self.similar_concepts.clone(),
            tools: self.tools.clone(),
            lexicon: self.user_lexicon.clone(),
            options: self.options.clone(),
            tools_registry: self.tool_specs.clone(),
        }
    }

    pub fn ontology(&self) -> &[OntologyEntry] {
        &self.ontology
    }

    pub fn derivatives(&self) -> &[DerivationEdge] {
        &self.derivatives
    }

    pub fn foreign_keys(&self) -> &[ForeignKeyLink] {
        &self.foreign_keys
    }

    pub fn similar_concepts(&self) -> &[SimilarConcept] {
        &self.similar_concepts
    }

    pub fn tool_bindings(&self) -> &[ToolBinding] {
        &self.tools
    }

    pub fn tool_specs(&self) -> &[ToolSpec] {
        &self.tool_specs
    }

    pub fn options(&self) -> &KnowledgeOptions {
        &self.options
    }

    pub fn entry(&self, concept: &str) -> Option<&OntologyEntry> {
        self.ontology.iter().find(|e| e.concept_name == concept)
    }

    pub fn entry_for_table(&self, table: &str) -> Option<&OntologyEntry> {
        self.ontology.iter().find(|e| e.table_name == table)
    }

    pub fn has_attribute_anywhere(&self, attribute: &str) -> bool {
        self.ontology.iter().any(|e| e.has_attribute(attribute))
    }

    pub fn tool_binding(&self, relation: &str) -> Option<&ToolBinding> {
        self.tools.iter().find(|t| t.relation == relation)
    }

    /// der edges, closed under inversion when `symmetric_derivations` is on.
    pub fn derivation_pairs(&self) -> BTreeSet<(String, String)> {
        let mut out = BTreeSet::new();
        for d in &self.derivatives {
            out.insert((d.concept_a.clone(), d.concept_b.clone()));
            if self.options.symmetric_derivations {
                out.insert((d.concept_b.clone(), d.concept_a.clone()));
            }
        }
        out
    }

    /// Whether `to` is listed as a derivative of `from` exactly as declared.
    pub fn is_declared_derivative(&self, from: &str, to: &str) -> bool {
        self.derivatives.iter().any(|d| d.concept_a == from && d.concept_b == to)
    }

    pub fn conditions(&self) -> Vec<ConditionRule> {
        if let Some(c) = &self.options.conditions {
            return c.clone();
        }
        if self.entry("Gene").is_some() && self.entry("Protein").is_some() {
            vec![ConditionRule {
                phrase: "protein coding".into(),
                concept: "Gene".into(),
                linked_concept: "Protein".into(),
            }]
        } else {
            Vec::new()
        }
    }

    pub fn condition(&self, phrase: &str) -> Option<ConditionRule> {
        let wanted = normalize_term(phrase);
        self.conditions().into_iter().find(|c| normalize_term(&c.phrase) == wanted)
    }

    pub fn resolve_concept(&self, term: &str) -> Result<String, ResolveError> {
        let bindings = self.lexicon.get(TermKind::Concept, term);
        let Some(best) = bindings.iter().map(|b| b.tier).min() else {
            return Err(ResolveError::UnknownConcept(term.to_string()));
        };
        let candidates: BTreeSet<&str> = bindings
            .iter()
            .filter(|b| b.tier == best)
            .map(|b| b.target.as_str())
            .collect();
        match candidates.len() {
            1 => Ok(candidates.into_iter().next().unwrap().to_string()),
            _ => Err(ResolveError::AmbiguousConcept {
                term: term.to_string(),
                candidates: candidates.into_iter().map(str::to_string).collect(),
            }),
        }
    }

    /// Resolves an attribute term to `(owning concept, attribute)`, trying the
    /// given concept first, then concepts reachable through der edges in
    /// breadth-first order.
    pub fn resolve_attribute(&self, term: &str, concept: Option<&str>) -> Result<(String, String), ResolveError> {
        let bindings = self.lexicon.get(TermKind::Attribute, term);
        let levels: Vec<Vec<String>> = match concept {
            Some(c) => self.derivation_levels(c),
            None => vec![self.ontology.iter().map(|e| e.concept_name.clone()).collect()],
        };
        for level in levels {
            let hits: Vec<&TermBinding> = bindings
                .iter()
                .filter(|b| b.scope.as_deref().is_some_and(|s| level.iter().any(|c| c == s)))
                .collect();
            let Some(best) = hits.iter().map(|b| b.tier).min() else {
                continue;
            };
            let candidates: BTreeSet<(String, String)> = hits
                .iter()
                .filter(|b| b.tier == best)
                .map(|b| (b.scope.clone().unwrap_or_default(), b.target.clone()))
                .collect();
            if candidates.len() == 1 {
                return Ok(candidates.into_iter().next().unwrap());
            }
            return Err(ResolveError::AmbiguousAttribute {
                term: term.to_string(),
                candidates: candidates.into_iter().map(|(c, a)| format!("{c}.{a}")).collect(),
            });
        }
        Err(ResolveError::UnknownAttribute { term: term.to_string() })
    }

    pub fn resolve_relation(&self, term: &str) -> Option<String> {
        let bindings = self.lexicon.get(TermKind::Relation, term);
        let best = bindings.iter().map(|b| b.tier).min()?;
        let targets: BTreeSet<&str> = bindings
            .iter()
            .filter(|b| b.tier == best)
            .map(|b| b.target.as_str())
            .collect();
        (targets.len() == 1).then(|| targets.into_iter().next().unwrap().to_string())
    }

    pub fn resolve_action(&self, verb: &str) -> Option<String> {
        self.lexicon
            .get(TermKind::ActionVerb, verb)
            .iter()
            .min_by_key(|b| b.tier)
            .map(|b| b.target.clone())
    }

    /// Concepts grouped by der distance from `concept` (itself first).
    fn derivation_levels(&self, concept: &str) -> Vec<Vec<String>> {
        let pairs = self.derivation_pairs();
        let mut adjacency: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for (a, b) in &pairs {
            adjacency.entry(a.as_str()).or_default().push(b.as_str());
        }
        let mut seen: HashSet<String> = HashSet::from([concept.to_string()]);
        let mut levels = vec![vec![concept.to_string()]];
        let mut queue = VecDeque::from([concept.to_string()]);
        while !queue.is_empty() {
            let mut next = Vec::new();
            for c in queue.drain(..) {
                for n in adjacency.get(c.as_str()).into_iter().flatten() {
                    if seen.insert(n.to_string()) {
                        next.push(n.to_string());
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            queue.extend(next.iter().cloned());
            levels.push(next);
        }
        levels
    }
}

fn build_lexicon(doc: &KnowledgeDocument) -> Lexicon {
    let mut lex = Lexicon::default();
    for e in &doc.ontology {
        lex.add(TermKind::Concept, &e.concept_name, &e.concept_name, None, Tier::Auto);
        lex.add(TermKind::Concept, &split_camel(&e.concept_name).join(" "), &e.concept_name, None, Tier::Auto);
        lex.add(TermKind::Concept, &e.table_name, &e.concept_name, None, Tier::Auto);
        for attr in e.all_attributes() {
            let words = split_camel(attr);
            lex.add(TermKind::Attribute, attr, attr, Some(&e.concept_name), Tier::Auto);
            lex.add(TermKind::Attribute, &words.join(" "), attr, Some(&e.concept_name), Tier::Auto);
            if words.len() > 1 {
                lex.add(TermKind::Attribute, words.last().unwrap(), attr, Some(&e.concept_name), Tier::HeadWord);
            }
        }
    }
    let relations = doc
        .similar_concepts
        .iter()
        .flat_map(|s| s.relations.iter())
        .chain(doc.tools.iter().map(|t| &t.relation));
    for r in relations {
        lex.add(TermKind::Relation, r, r, None, Tier::Auto);
    }
    for (verb, action) in [
        ("find", "find"),
        ("list", "list"),
        ("show", "show"),
        ("get", "get"),
        ("retrieve", "retrieve"),
        ("what", "find"),
        ("which", "find"),
    ] {
        lex.add(TermKind::ActionVerb, verb, action, None, Tier::Auto);
    }
    for u in &doc.lexicon {
        match (u.kind, &u.scope) {
            (TermKind::Attribute, None) => {
                for e in doc.ontology.iter().filter(|e| e.has_attribute(&u.target)) {
                    lex.add(u.kind, &u.surface_term, &u.target, Some(&e.concept_name), Tier::User);
                }
            }
            (_, scope) => lex.add(u.kind, &u.surface_term, &u.target, scope.as_deref(), Tier::User),
        }
    }
    lex
}

fn validate(doc: &KnowledgeDocument) -> Result<(), KnowledgeError> {
    let fail = |msg: String| Err(KnowledgeError::InconsistentKnowledge(msg));
    let mut concepts = HashMap::new();
    let mut tables = HashMap::new();
    for e in &doc.ontology {
        if e.concept_name.is_empty() || e.table_name.is_empty() || e.key_attribute.is_empty() {
            return fail(format!("ontology entry {e:?} has an empty name"));
        }
        if concepts.insert(e.concept_name.as_str(), e).is_some() {
            return fail(format!("concept `{}` is declared twice", e.concept_name));
        }
        if tables.insert(e.table_name.as_str(), e).is_some() {
            return fail(format!("table `{}` backs two concepts", e.table_name));
        }
        if e.attributes.contains(&e.key_attribute) {
            return fail(format!("key `{}` of `{}` is also listed as an attribute", e.key_attribute, e.concept_name));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = e.attributes.iter().find(|a| !seen.insert(a.as_str())) {
            return fail(format!("attribute `{dup}` of `{}` is listed twice", e.concept_name));
        }
    }
    for d in &doc.derivatives {
        for c in [&d.concept_a, &d.concept_b] {
            if !concepts.contains_key(c.as_str()) {
                return fail(format!("der references unknown concept `{c}`"));
            }
        }
    }
    for f in &doc.foreign_keys {
        for (table, column) in [(&f.table_x, &f.column_x), (&f.table_y, &f.column_y)] {
            let Some(entry) = tables.get(table.as_str()) else {
                return fail(format!("forK references unknown table `{table}`"));
            };
            if !entry.has_attribute(column) {
                return fail(format!("forK column `{column}` is not an attribute of table `{table}`"));
            }
        }
    }
    for s in &doc.similar_concepts {
        for c in [&s.concept_x, &s.concept_y] {
            if !concepts.contains_key(c.as_str()) {
                return fail(format!("simCon references unknown concept `{c}`"));
            }
        }
        if s.relations.is_empty() {
            return fail(format!("simCon row {}/{} lists no relation", s.concept_x, s.concept_y));
        }
    }
    let mut bound = HashSet::new();
    for t in &doc.tools {
        if t.operations.is_empty() {
            return fail(format!("cTool row for `{}` lists no operation", t.relation));
        }
        if !bound.insert(t.relation.as_str()) {
            return fail(format!("cTool binds relation `{}` twice", t.relation));
        }
    }
    let mut terms = HashSet::new();
    for u in &doc.lexicon {
        let key = (normalize_term(&u.surface_term), u.kind, u.scope.clone());
        if key.0.is_empty() {
            return fail("lexicon entry with an empty surface term".into());
        }
        if !terms.insert(key) {
            return fail(format!("lexicon term `{}` is bound twice", u.surface_term));
        }
        let target_ok = match u.kind {
            TermKind::Concept => concepts.contains_key(u.target.as_str()),
            TermKind::Attribute => match &u.scope {
                Some(s) => concepts.get(s.as_str()).is_some_and(|e| e.has_attribute(&u.target)),
                None => doc.ontology.iter().any(|e| e.has_attribute(&u.target)),
            },
            TermKind::Relation | TermKind::ActionVerb => !u.target.is_empty(),
        };
        if !target_ok {
            return fail(format!("lexicon term `{}` targets unknown `{}`", u.surface_term, u.target));
        }
    }
    if let Some(conds) = &doc.options.conditions {
        for c in conds {
            for concept in [&c.concept, &c.linked_concept] {
                if !concepts.contains_key(concept.as_str()) {
                    return fail(format!("condition `{}` references unknown concept `{concept}`", c.phrase));
                }
            }
        }
    }
    Ok(())
}
