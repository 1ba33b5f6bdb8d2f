//! Turns query intents into conceptual plans of res goals, runs them with
//! strategy escalation and renders the direct portion as SQL.

mod execute;
mod sql;

use std::collections::{BTreeSet, HashSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frontend::{QueryIntent, Selector, TemplateVariant};
use crate::knowledge::{ForeignKeyLink, KnowledgeBase, ResolveError};
use crate::reasoner::{GoalAtom, Strategy, Term};
use crate::store::CanonicalStore;

pub use execute::{execute, execute_goals, Mode, ResultRow, ResultTable, RowProvenance};
pub use sql::render_sql;

pub const KEY_VAR: &str = "Pk";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PlanError {
    #[error(transparent)]
    Resolve(#[from] ResolveError),
    #[error("no goals can be formed for the query")]
    EmptyPlan,
    #[error("no condition is known as `{0}`")]
    UnknownCondition(String),
    #[error("plan is not directly renderable: {reason}")]
    NotDirectlyRenderable { reason: String, partial_sql: Option<String> },
}

impl PlanError {
    pub fn name(&self) -> &'static str {
        match self {
            PlanError::Resolve(e) => e.name(),
            PlanError::EmptyPlan => "EmptyPlan",
            PlanError::UnknownCondition(_) => "UnknownCondition",
            PlanError::NotDirectlyRenderable { .. } => "NotDirectlyRenderable",
        }
    }
}

/// How a requested attribute reaches the target object.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "kebab-case")]
pub enum RequestForm {
    /// The attribute belongs to the target concept.
    Own,
    /// The attribute belongs to a declared derivative and is attributed to
    /// the target object by the rules.
    Knowledge,
    /// The attribute is reached by joining tables along `hops`, read from
    /// the target concept's table onwards.
    Join { hops: Vec<ForeignKeyLink> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequestSpec {
    pub term: String,
    pub owner: String,
    pub attribute: String,
    pub var: String,
    #[serde(flatten)]
    pub form: RequestForm,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConceptualPlan {
    pub variant: TemplateVariant,
    pub target_concept: String,
    /// Alternative conjunctions binding the object set (one per selector value).
    pub selector_goals: Vec<Vec<GoalAtom>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selector: Option<Selector>,
    /// `(attribute, value)` qualifier filters applied to every branch.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub qualifiers: Vec<(String, String)>,
    /// Join atoms connecting the object to attributes owned elsewhere.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub link_goals: Vec<GoalAtom>,
    pub request_goals: Vec<GoalAtom>,
    pub requests: Vec<RequestSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub condition_goals: Vec<GoalAtom>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relation: Option<String>,
    pub seeds: Vec<(String, String)>,
    pub strategy_ladder: Vec<Strategy>,
    pub columns: Vec<String>,
    /// Variable (or `Pk`) supplying each column.
    pub output_vars: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

fn var(name: &str) -> Term {
    Term::var(name)
}

fn key_shape(value: &str) -> String {
    value
        .chars()
        .map(|c| {
            if c.is_ascii_digit() {
                '9'
            } else if c.is_alphabetic() {
                'A'
            } else {
                c
            }
        })
        .collect()
}

/// Whether `value` looks like the stored keys of `concept`.
pub fn matches_key_format(store: &CanonicalStore, kb: &KnowledgeBase, concept: &str, value: &str) -> bool {
    let Some(entry) = kb.entry(concept) else { return false };
    let shapes: HashSet<String> = store
        .lookup(Some(concept), None, Some(&entry.key_attribute), None)
        .into_iter()
        .filter(|f| !f.is_virtual)
        .map(|f| key_shape(&f.value))
        .collect();
    shapes.contains(&key_shape(value))
}

/// Shortest chain of forK links (either orientation) from `from`'s table to
/// `to`'s table.
fn join_path(kb: &KnowledgeBase, from: &str, to: &str) -> Option<Vec<ForeignKeyLink>> {
    let start = kb.entry(from)?.table_name.clone();
    let goal = kb.entry(to)?.table_name.clone();
    let links: Vec<ForeignKeyLink> = kb.foreign_keys().iter().flat_map(|f| f.orientations()).collect();
    let mut seen = BTreeSet::from([start.clone()]);
    let mut queue = VecDeque::from([(start, Vec::<ForeignKeyLink>::new())]);
    while let Some((table, path)) = queue.pop_front() {
        if table == goal && !path.is_empty() {
            return Some(path);
        }
        for l in links.iter().filter(|l| l.table_x == table) {
            if seen.insert(l.table_y.clone()) {
                let mut p = path.clone();
                p.push(l.clone());
                queue.push_back((l.table_y.clone(), p));
            }
        }
    }
    None
}

/// Resolves a requested term for `concept`; a term naming a concept stands
/// for that concept's key.
fn resolve_request(kb: &KnowledgeBase, term: &str, concept: &str) -> Result<(String, String), ResolveError> {
    match kb.resolve_attribute(term, Some(concept)) {
        Err(ResolveError::UnknownAttribute { .. }) => match kb.resolve_concept(term) {
            Ok(c) => {
                let key = kb.entry(&c).map(|e| e.key_attribute.clone()).unwrap_or_default();
                Ok((c, key))
            }
            Err(_) => Err(ResolveError::UnknownAttribute { term: term.to_string() }),
        },
        other => other,
    }
}

fn selector_branches(concept: &str, selector: Option<&Selector>, key_attr: &str) -> Vec<Vec<GoalAtom>> {
    match selector {
        Some(sel) => sel
            .values
            .iter()
            .map(|v| {
                vec![GoalAtom::new(
                    concept,
                    var(KEY_VAR),
                    Term::constant(&sel.attribute),
                    Term::constant(v),
                )]
            })
            .collect(),
        None => vec![vec![GoalAtom::new(concept, var(KEY_VAR), Term::constant(key_attr), var(KEY_VAR))]],
    }
}

/// Builds the conceptual plan for an intent.
pub fn map_intent(intent: &QueryIntent, kb: &KnowledgeBase, store: &CanonicalStore) -> Result<ConceptualPlan, PlanError> {
    let concept = intent.target_concept.as_str();
    let entry = kb
        .entry(concept)
        .ok_or_else(|| ResolveError::UnknownConcept(concept.to_string()))?;
    let key_attr = entry.key_attribute.clone();
    let mut warnings = intent.warnings.clone();

    let selector = intent.object_selector().cloned();
    let mut seeds = Vec::new();
    if let Some(sel) = &selector {
        for v in &sel.values {
            let absent = !store.contains_value(concept, &sel.attribute, v);
            if sel.attribute == key_attr || (absent && matches_key_format(store, kb, concept, v)) {
                seeds.push((concept.to_string(), v.clone()));
            }
        }
    }

    let mut qualifiers = Vec::new();
    if let Some(q) = &intent.qualifier {
        let hit = store
            .iter()
            .find(|f| f.concept == concept && !f.is_virtual && f.value.eq_ignore_ascii_case(q));
        match hit {
            Some(f) => qualifiers.push((f.attribute.clone(), f.value.clone())),
            None => warnings.push(format!("qualifier `{q}` matches no attribute of {concept}; ignored")),
        }
    }
    let mut selector_goals = selector_branches(concept, selector.as_ref(), &key_attr);
    for branch in &mut selector_goals {
        for (a, v) in &qualifiers {
            branch.push(GoalAtom::new(concept, var(KEY_VAR), Term::constant(a), Term::constant(v)));
        }
    }

    let mut condition_goals = Vec::new();
    if let Some(cond) = &intent.condition {
        let rule = kb
            .condition(&cond.predicate)
            .filter(|r| r.concept == concept)
            .ok_or_else(|| PlanError::UnknownCondition(cond.predicate.clone()))?;
        let linked_key = kb
            .entry(&rule.linked_concept)
            .map(|e| e.key_attribute.clone())
            .ok_or_else(|| PlanError::UnknownCondition(cond.predicate.clone()))?;
        condition_goals.push(GoalAtom::new(concept, var(KEY_VAR), Term::constant(&linked_key), var("_Linked")));
    }

    let mut link_goals = Vec::new();
    let mut request_goals = Vec::new();
    let mut requests = Vec::new();
    let mut columns = Vec::new();
    let mut output_vars = Vec::new();
    let listing = intent.variant == TemplateVariant::Iterative || intent.relation.is_some();
    if listing || (intent.requested.is_empty() && intent.relation.is_none()) {
        columns.push(key_attr.clone());
        output_vars.push(KEY_VAR.to_string());
    }

    if let Some(rel) = &intent.relation {
        columns.push(rel.clone());
        output_vars.push(format!("{rel}Partner"));
    }
    let requested: &[String] = if intent.relation.is_some() { &[] } else { &intent.requested };
    if intent.relation.is_some() && !intent.requested.is_empty() {
        warnings.push(format!("requested {:?} ignored for a relation query", intent.requested));
    }
    let many = requested.len() > 1;
    for (i, term) in requested.iter().enumerate() {
        let (owner, attribute) = resolve_request(kb, term, concept)?;
        let val = if many { format!("Val{}", i + 1) } else { "Val".to_string() };
        let form = if owner == concept {
            RequestForm::Own
        } else if kb.is_declared_derivative(concept, &owner) {
            RequestForm::Knowledge
        } else {
            match join_path(kb, concept, &owner) {
                Some(hops) => RequestForm::Join { hops },
                None => RequestForm::Knowledge,
            }
        };
        match &form {
            RequestForm::Own | RequestForm::Knowledge => {
                request_goals.push(GoalAtom::new(concept, var(KEY_VAR), Term::constant(&attribute), var(&val)));
            }
            RequestForm::Join { hops } => {
                let mut at = KEY_VAR.to_string();
                for (h, hop) in hops.iter().enumerate() {
                    let from = kb.entry_for_table(&hop.table_x).map(|e| e.concept_name.clone()).unwrap_or_default();
                    let to = kb.entry_for_table(&hop.table_y).map(|e| e.concept_name.clone()).unwrap_or_default();
                    let join = format!("J{}_{}", i + 1, h + 1);
                    let next = format!("P{}_{}", i + 1, h + 1);
                    link_goals.push(GoalAtom::new(&from, var(&at), Term::constant(&hop.column_x), var(&join)));
                    link_goals.push(GoalAtom::new(&to, var(&next), Term::constant(&hop.column_y), var(&join)));
                    at = next;
                }
                request_goals.push(GoalAtom::new(&owner, var(&at), Term::constant(&attribute), var(&val)));
            }
        }
        columns.push(attribute.clone());
        output_vars.push(val.clone());
        requests.push(RequestSpec {
            term: term.clone(),
            owner,
            attribute,
            var: val,
            form,
        });
    }

    if selector_goals.is_empty() || columns.is_empty() {
        return Err(PlanError::EmptyPlan);
    }
    Ok(ConceptualPlan {
        variant: intent.variant,
        target_concept: concept.to_string(),
        selector_goals,
        selector,
        qualifiers,
        link_goals,
        request_goals,
        requests,
        condition_goals,
        relation: intent.relation.clone(),
        seeds,
        strategy_ladder: Strategy::LADDER.to_vec(),
        columns,
        output_vars,
        warnings,
    })
}
