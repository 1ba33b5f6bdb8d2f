use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::{Atom, RelFact};
use crate::gateway::ToolGateway;
use crate::knowledge::KnowledgeBase;
use crate::store::StoreView;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TraceKind {
    Direct,
    Derived,
    Interpretive,
}

/// The rule-application chain justifying one res fact.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum ProvenanceTrace {
    Direct {
        fact: Atom,
        virtual_seed: bool,
    },
    Derived {
        fact: Atom,
        rel: RelFact,
        source: Box<ProvenanceTrace>,
    },
    Interpretive {
        fact: Atom,
        relation: String,
        tool: String,
        partner_concept: String,
        partner_key: String,
        source: Box<ProvenanceTrace>,
    },
}

impl ProvenanceTrace {
    pub fn kind(&self) -> TraceKind {
        match self {
            ProvenanceTrace::Direct { .. } => TraceKind::Direct,
            ProvenanceTrace::Derived { .. } => TraceKind::Derived,
            ProvenanceTrace::Interpretive { .. } => TraceKind::Interpretive,
        }
    }

    pub fn fact(&self) -> &Atom {
        match self {
            ProvenanceTrace::Direct { fact, .. }
            | ProvenanceTrace::Derived { fact, .. }
            | ProvenanceTrace::Interpretive { fact, .. } => fact,
        }
    }

    pub fn source(&self) -> Option<&ProvenanceTrace> {
        match self {
            ProvenanceTrace::Direct { .. } => None,
            ProvenanceTrace::Derived { source, .. } | ProvenanceTrace::Interpretive { source, .. } => Some(source),
        }
    }

    /// This trace and all nested source traces, outermost first.
    pub fn chain(&self) -> Vec<&ProvenanceTrace> {
        let mut out = vec![self];
        let mut cur = self;
        while let Some(s) = cur.source() {
            out.push(s);
            cur = s;
        }
        out
    }

    pub fn depth(&self) -> usize {
        self.chain().len()
    }
}

/// Stable identifier: a content hash of the serialized value.
pub fn provenance_id<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("provenance serializes");
    let digest = Sha256::digest(&bytes);
    format!("p-{}", &hex::encode(digest)[..20])
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ReplayError {
    #[error("{0} is not a canonical fact")]
    NotInStore(Atom),
    #[error("rel link {0} does not hold: {1}")]
    BrokenRel(String, String),
    #[error("tool step for {0} does not hold: {1}")]
    BrokenTool(Atom, String),
    #[error("trace claims {claimed} but its premises give {derived}")]
    Mismatch { claimed: Box<Atom>, derived: Box<Atom> },
}

/// Re-derives the fact a trace annotates from its premises, checking every
/// step against the store, the knowledge base and the tools.
pub fn replay(
    trace: &ProvenanceTrace,
    view: &StoreView<'_>,
    kb: &KnowledgeBase,
    gateway: &ToolGateway,
) -> Result<Atom, ReplayError> {
    let derived = match trace {
        ProvenanceTrace::Direct { fact, virtual_seed } => {
            let found = view.iter().any(|f| {
                f.concept == fact.concept
                    && f.primary_key == fact.primary_key
                    && f.attribute == fact.attribute
                    && f.value == fact.value
                    && f.is_virtual == *virtual_seed
            });
            if !found {
                return Err(ReplayError::NotInStore(fact.clone()));
            }
            fact.clone()
        }
        ProvenanceTrace::Derived { rel, source, .. } => {
            check_rel(rel, view, kb)?;
            let premise = replay(source, view, kb, gateway)?;
            if premise.concept != rel.derived_concept || premise.primary_key != rel.derived_key {
                return Err(ReplayError::BrokenRel(
                    rel_label(rel),
                    format!("premise {premise} is about another object"),
                ));
            }
            Atom::new(&rel.concept, &rel.primary_key, &premise.attribute, &premise.value)
        }
        ProvenanceTrace::Interpretive {
            fact,
            relation,
            tool,
            partner_concept,
            partner_key,
            source,
        } => {
            let broken = |why: &str| ReplayError::BrokenTool(fact.clone(), why.to_string());
            let listed = kb.similar_concepts().iter().any(|s| {
                s.concept_x == fact.concept && s.concept_y == *partner_concept && s.relations.contains(relation)
            });
            if !listed {
                return Err(broken("no simCon row lists the relation"));
            }
            let bound = kb
                .tool_binding(relation)
                .is_some_and(|b| b.operations.contains(tool));
            if !bound {
                return Err(broken("tool is not bound to the relation"));
            }
            if fact.concept == *partner_concept && fact.primary_key == *partner_key {
                return Err(broken("object paired with itself"));
            }
            if gateway.apply_op(tool, &fact.primary_key, partner_key) != Ok(true) {
                return Err(broken("tool does not confirm the pair"));
            }
            let premise = replay(source, view, kb, gateway)?;
            if premise.concept != *partner_concept || premise.primary_key != *partner_key {
                return Err(broken("premise is about another object"));
            }
            let key_attr = kb.entry(partner_concept).map(|e| e.key_attribute.as_str());
            if Some(premise.attribute.as_str()) == key_attr && premise.value == *partner_key {
                return Err(broken("partner identity fact copied"));
            }
            Atom::new(&fact.concept, &fact.primary_key, &premise.attribute, &premise.value)
        }
    };
    if derived != *trace.fact() {
        return Err(ReplayError::Mismatch {
            claimed: Box::new(trace.fact().clone()),
            derived: Box::new(derived),
        });
    }
    Ok(derived)
}

fn rel_label(rel: &RelFact) -> String {
    format!(
        "rel({}, {}, {}, {})",
        rel.concept, rel.derived_concept, rel.primary_key, rel.derived_key
    )
}

fn check_rel(rel: &RelFact, view: &StoreView<'_>, kb: &KnowledgeBase) -> Result<(), ReplayError> {
    let broken = |why: String| ReplayError::BrokenRel(rel_label(rel), why);
    let concept_of = |table: &str| kb.entry_for_table(table).map(|e| e.concept_name.clone());
    let has = |concept: &str, key: &str, attr: &str, value: &str| {
        view.iter()
            .any(|f| f.concept == concept && f.primary_key == key && f.attribute == attr && f.value == value)
    };
    let Some(first) = rel.path.first() else {
        return Err(broken("empty path".into()));
    };
    let first_target = concept_of(&first.to_table).ok_or_else(|| broken("unknown table".into()))?;
    if !kb.derivation_pairs().contains(&(rel.concept.clone(), first_target)) {
        return Err(broken("first hop is not a derivative".into()));
    }
    let mut at = (rel.concept.clone(), rel.primary_key.clone());
    let mut visited = vec![at.clone()];
    for hop in &rel.path {
        let from = concept_of(&hop.from_table).ok_or_else(|| broken("unknown table".into()))?;
        let to = concept_of(&hop.to_table).ok_or_else(|| broken("unknown table".into()))?;
        if (from.clone(), hop.from_key.clone()) != at {
            return Err(broken(format!("hop does not continue from {}/{}", at.0, at.1)));
        }
        let declared = kb.foreign_keys().iter().flat_map(|fk| fk.orientations()).any(|fk| {
            fk.table_x == hop.from_table
                && fk.table_y == hop.to_table
                && fk.column_x == hop.from_column
                && fk.column_y == hop.to_column
        });
        if !declared {
            return Err(broken("hop is not a forK link".into()));
        }
        if !has(&from, &hop.from_key, &hop.from_column, &hop.value) || !has(&to, &hop.to_key, &hop.to_column, &hop.value) {
            return Err(broken(format!("value `{}` does not join", hop.value)));
        }
        at = (to, hop.to_key.clone());
        if visited.contains(&at) {
            return Err(broken("path revisits an object".into()));
        }
        visited.push(at.clone());
    }
    if at != (rel.derived_concept.clone(), rel.derived_key.clone()) {
        return Err(broken("path ends elsewhere".into()));
    }
    Ok(())
}
