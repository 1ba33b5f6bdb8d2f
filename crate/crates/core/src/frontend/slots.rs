//! Slot extraction: reads the object noun phrase as `attribute of element`
//! and grounds its words in the lexicon and the stored values.

use serde::{Deserialize, Serialize};

use super::chunker::{DETERMINERS, PRONOUNS};
use super::template::{verb_object, QueryTemplate, TemplateVariant};
use super::FrontendError;
use crate::knowledge::{KnowledgeBase, ResolveError};
use crate::store::CanonicalStore;

/// Constants bound to one attribute, read disjunctively.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Selector {
    pub attribute: String,
    pub values: Vec<String>,
    /// The constants as written in the sentence.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub terms: Vec<String>,
    /// Other attributes the constants could select on, in precedence order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub alternatives: Vec<String>,
    /// False when no attribute holds any of the values.
    pub resolved: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Condition {
    pub concept: String,
    pub subject: Option<Selector>,
    pub predicate: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryIntent {
    pub variant: TemplateVariant,
    pub target_concept: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selector: Option<Selector>,
    pub requested: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relation: Option<String>,
    pub action: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition: Option<Condition>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qualifier: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl QueryIntent {
    /// The selector that binds the object set, whichever slot holds it.
    pub fn object_selector(&self) -> Option<&Selector> {
        match &self.condition {
            Some(c) => c.subject.as_ref(),
            None => self.selector.as_ref(),
        }
    }

    pub fn object_selector_mut(&mut self) -> Option<&mut Selector> {
        match &mut self.condition {
            Some(c) => c.subject.as_mut(),
            None => self.selector.as_mut(),
        }
    }
}

#[derive(Debug, Default)]
struct ObjectPhrase {
    concept: Option<String>,
    constants: Vec<String>,
    qualifier: Vec<String>,
    requested: Option<String>,
    relation: Option<String>,
    pronoun: bool,
    term: String,
}

fn strip_determiners(tokens: &[String]) -> Vec<String> {
    let start = tokens
        .iter()
        .position(|t| !DETERMINERS.contains(&t.to_lowercase().as_str()))
        .unwrap_or(tokens.len());
    tokens[start..].to_vec()
}

fn words(tokens: &[String]) -> String {
    tokens.iter().filter(|t| *t != ",").cloned().collect::<Vec<_>>().join(" ")
}

fn split_constants(tokens: &[String]) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur: Vec<&str> = Vec::new();
    for t in tokens {
        let lower = t.to_lowercase();
        if t == "," || lower == "and" || lower == "or" {
            if !cur.is_empty() {
                out.push(cur.join(" "));
                cur.clear();
            }
        } else {
            cur.push(t);
        }
    }
    if !cur.is_empty() {
        out.push(cur.join(" "));
    }
    out
}

fn is_attribute_term(kb: &KnowledgeBase, term: &str) -> bool {
    matches!(
        kb.resolve_attribute(term, None),
        Ok(_) | Err(ResolveError::AmbiguousAttribute { .. })
    )
}

/// First run of consecutive tokens naming one concept: `(start, end, concept)`.
fn concept_run(kb: &KnowledgeBase, tokens: &[String]) -> Option<(usize, usize, String)> {
    let start = tokens.iter().position(|t| kb.resolve_concept(t).is_ok())?;
    let concept = kb.resolve_concept(&tokens[start]).ok()?;
    let mut end = start + 1;
    while end < tokens.len() && kb.resolve_concept(&tokens[end]).ok().as_ref() == Some(&concept) {
        end += 1;
    }
    Some((start, end, concept))
}

/// Concept of the first stored fact whose value equals `text` ignoring case,
/// in ontology order.
fn concept_holding_value(kb: &KnowledgeBase, store: &CanonicalStore, text: &str) -> Option<(String, String)> {
    kb.ontology().iter().find_map(|e| {
        store
            .iter()
            .find(|f| f.concept == e.concept_name && !f.is_virtual && f.value.eq_ignore_ascii_case(text))
            .map(|f| (f.concept.clone(), f.value.clone()))
    })
}

fn analyze(tokens: &[String], kb: &KnowledgeBase, store: &CanonicalStore) -> ObjectPhrase {
    let mut out = ObjectPhrase {
        term: words(tokens),
        ..ObjectPhrase::default()
    };
    let tokens = strip_determiners(tokens);
    if tokens.len() > 1 && PRONOUNS.contains(&tokens[0].to_lowercase().as_str()) && !tokens.iter().any(|t| t.eq_ignore_ascii_case("of")) {
        out.pronoun = true;
        out.requested = Some(words(&tokens[1..]));
        return out;
    }
    let of = tokens
        .iter()
        .enumerate()
        .position(|(i, t)| i > 0 && t.eq_ignore_ascii_case("of"));
    let (mut head, element) = match of {
        Some(i) => (tokens[..i].to_vec(), strip_determiners(&tokens[i + 1..])),
        None => {
            let last = tokens.last().map(|t| t.as_str()).unwrap_or("");
            let head_like = !tokens.is_empty()
                && kb.resolve_concept(last).is_err()
                && (kb.resolve_relation(last).is_some() || is_attribute_term(kb, last));
            if head_like {
                (vec![last.to_string()], tokens[..tokens.len() - 1].to_vec())
            } else {
                (Vec::new(), tokens.clone())
            }
        }
    };
    if head.first().is_some_and(|t| PRONOUNS.contains(&t.to_lowercase().as_str())) {
        out.pronoun = true;
        head.remove(0);
    }

    if !element.is_empty() {
        let joined = words(&element);
        if let Some((concept, value)) = concept_holding_value(kb, store, &joined) {
            out.concept = Some(concept);
            out.constants = vec![value];
        } else if let Some((start, end, concept)) = concept_run(kb, &element) {
            out.concept = Some(concept);
            out.qualifier.extend(element[..start].iter().cloned());
            out.constants = split_constants(&element[end..]);
        } else {
            out.qualifier.push(joined);
        }
    }

    if !head.is_empty() {
        let joined = words(&head);
        if out.pronoun {
            out.requested = Some(joined);
        } else if let Some(rel) = kb.resolve_relation(&joined) {
            out.relation = Some(rel);
        } else if is_attribute_term(kb, &joined) {
            out.requested = Some(joined);
        } else if let Some((start, end, concept)) = concept_run(kb, &head) {
            if out.concept.is_none() {
                out.concept = Some(concept);
                let mut q: Vec<String> = head[..start].to_vec();
                q.extend(head[end..].iter().cloned());
                if !q.is_empty() {
                    out.qualifier.insert(0, words(&q));
                }
            } else {
                out.requested = Some(joined);
            }
        } else {
            out.requested = Some(joined);
        }
    }
    out
}

/// Candidate selector attributes in precedence order: the key, attributes
/// whose name contains "Name", then the rest, each group in sO order.
pub fn selector_precedence(kb: &KnowledgeBase, concept: &str) -> Vec<String> {
    let Some(entry) = kb.entry(concept) else {
        return Vec::new();
    };
    let mut out = vec![entry.key_attribute.clone()];
    out.extend(entry.attributes.iter().filter(|a| a.contains("Name")).cloned());
    out.extend(entry.attributes.iter().filter(|a| !a.contains("Name")).cloned());
    out
}

/// Stored values of `(concept, attribute)` that `value` names: the key by
/// exact value; other attributes by exact, case-insensitive or
/// case-insensitive prefix match.
pub fn matching_values(
    kb: &KnowledgeBase,
    store: &CanonicalStore,
    concept: &str,
    attribute: &str,
    value: &str,
) -> Vec<String> {
    let is_key = kb.entry(concept).is_some_and(|e| e.key_attribute == attribute);
    let stored = store
        .lookup(Some(concept), None, Some(attribute), None)
        .into_iter()
        .filter(|f| !f.is_virtual);
    let mut out: Vec<String> = if is_key {
        stored.filter(|f| f.value == value).map(|f| f.value.clone()).collect()
    } else {
        let lower = value.to_lowercase();
        let stored: Vec<_> = stored.collect();
        let exact: Vec<String> = stored
            .iter()
            .filter(|f| f.value.to_lowercase() == lower)
            .map(|f| f.value.clone())
            .collect();
        if exact.is_empty() {
            stored
                .iter()
                .filter(|f| f.value.to_lowercase().starts_with(&lower))
                .map(|f| f.value.clone())
                .collect()
        } else {
            exact
        }
    };
    out.sort();
    out.dedup();
    out
}

/// Picks the selector attribute for `values` following the precedence order.
pub fn resolve_selector(kb: &KnowledgeBase, store: &CanonicalStore, concept: &str, values: &[String]) -> Selector {
    let order = selector_precedence(kb, concept);
    let mut candidates = Vec::new();
    for attr in &order {
        let mut expanded = Vec::new();
        let mut any = false;
        for v in values {
            let m = matching_values(kb, store, concept, attr, v);
            if m.is_empty() {
                expanded.push(v.clone());
            } else {
                any = true;
                expanded.extend(m);
            }
        }
        if any {
            let mut seen = std::collections::HashSet::new();
            expanded.retain(|v| seen.insert(v.clone()));
            candidates.push((attr.clone(), expanded));
        }
    }
    match candidates.first() {
        Some((attr, vals)) => Selector {
            attribute: attr.clone(),
            values: vals.clone(),
            terms: values.to_vec(),
            alternatives: candidates[1..].iter().map(|(a, _)| a.clone()).collect(),
            resolved: true,
        },
        None => Selector {
            attribute: order.first().cloned().unwrap_or_default(),
            values: values.to_vec(),
            terms: values.to_vec(),
            alternatives: order.iter().skip(1).cloned().collect(),
            resolved: false,
        },
    }
}

fn action_of(kb: &KnowledgeBase, verb: &str) -> String {
    kb.resolve_action(verb).unwrap_or_else(|| verb.to_lowercase())
}

fn require_concept(phrase: &ObjectPhrase) -> Result<String, FrontendError> {
    phrase
        .concept
        .clone()
        .ok_or_else(|| FrontendError::Resolve(ResolveError::UnknownConcept(phrase.term.clone())))
}

fn selector_for(
    kb: &KnowledgeBase,
    store: &CanonicalStore,
    concept: &str,
    constants: &[String],
) -> Option<Selector> {
    (!constants.is_empty()).then(|| resolve_selector(kb, store, concept, constants))
}

fn qualifier(parts: &[String]) -> Option<String> {
    let q: Vec<&str> = parts.iter().map(String::as_str).filter(|p| !p.is_empty()).collect();
    (!q.is_empty()).then(|| q.join(" "))
}

/// Builds an intent even when the selector values match nothing; the
/// selector then carries `resolved: false`.
pub fn extract_intent(
    template: &QueryTemplate,
    kb: &KnowledgeBase,
    store: &CanonicalStore,
) -> Result<QueryIntent, FrontendError> {
    match template {
        QueryTemplate::Imperative { verb, object_np } => {
            let p = analyze(&object_np.tokens(), kb, store);
            let concept = require_concept(&p)?;
            Ok(QueryIntent {
                variant: TemplateVariant::Imperative,
                selector: selector_for(kb, store, &concept, &p.constants),
                target_concept: concept,
                requested: p.requested.into_iter().collect(),
                relation: p.relation,
                action: action_of(kb, verb),
                condition: None,
                qualifier: qualifier(&p.qualifier),
                warnings: Vec::new(),
            })
        }
        QueryTemplate::Iterative { range_np, action_vp } => {
            let range = analyze(&range_np.tokens(), kb, store);
            let concept = require_concept(&range)?;
            let (verb, np) = verb_object(action_vp).ok_or(FrontendError::NoTemplateMatch)?;
            let action = analyze(&np.tokens(), kb, store);
            let mut requested: Vec<String> = range.requested.into_iter().collect();
            requested.extend(action.requested);
            let mut qual = range.qualifier;
            qual.extend(action.qualifier);
            Ok(QueryIntent {
                variant: TemplateVariant::Iterative,
                selector: selector_for(kb, store, &concept, &range.constants),
                target_concept: concept,
                requested,
                relation: action.relation.or(range.relation),
                action: action_of(kb, &verb),
                condition: None,
                qualifier: qualifier(&qual),
                warnings: Vec::new(),
            })
        }
        QueryTemplate::Conditional {
            cond_np,
            cond_vp,
            action_vp,
        } => {
            let subject = analyze(&cond_np.tokens(), kb, store);
            let concept = require_concept(&subject)?;
            let vp_tokens = cond_vp.tokens();
            let predicate = vp_tokens.get(1..).map(words).unwrap_or_default();
            let (verb, np) = verb_object(action_vp).ok_or(FrontendError::NoTemplateMatch)?;
            let action = analyze(&np.tokens(), kb, store);
            let mut warnings = Vec::new();
            if !action.pronoun && action.concept.as_ref().is_some_and(|c| *c != concept) {
                warnings.push(format!("action object `{}` read against the condition subject", action.term));
            }
            Ok(QueryIntent {
                variant: TemplateVariant::Conditional,
                selector: None,
                requested: action.requested.into_iter().collect(),
                relation: action.relation,
                action: action_of(kb, &verb),
                condition: Some(Condition {
                    subject: selector_for(kb, store, &concept, &subject.constants),
                    concept: concept.clone(),
                    predicate,
                }),
                target_concept: concept,
                qualifier: qualifier(&subject.qualifier),
                warnings,
            })
        }
    }
}

/// Extracts slots, failing with `SelectorUnresolved` when the constants
/// match no attribute of the concept.
pub fn extract_slots(
    template: &QueryTemplate,
    kb: &KnowledgeBase,
    store: &CanonicalStore,
) -> Result<QueryIntent, FrontendError> {
    let intent = extract_intent(template, kb, store)?;
    if let Some(sel) = intent.object_selector() {
        if !sel.resolved {
            return Err(FrontendError::SelectorUnresolved {
                concept: intent.target_concept.clone(),
                values: sel.values.clone(),
            });
        }
    }
    Ok(intent)
}
