use std::collections::{BTreeMap, BTreeSet, HashMap};

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

use super::goal::{GoalAtom, Term};
use super::provenance::ProvenanceTrace;
use super::{rel, Atom, RelFact, ResFact, SolveOptions, Strategy, TraceKind};
use crate::gateway::{GatewayError, ToolGateway};
use crate::knowledge::KnowledgeBase;
use crate::par;
use crate::store::StoreView;

pub type FactId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub(crate) enum Justification {
    Direct { virtual_seed: bool },
    Derived { rel: usize, source: FactId },
    Interpretive { link: usize, source: FactId },
}

impl Justification {
    fn kind(self) -> TraceKind {
        match self {
            Justification::Direct { .. } => TraceKind::Direct,
            Justification::Derived { .. } => TraceKind::Derived,
            Justification::Interpretive { .. } => TraceKind::Interpretive,
        }
    }
}

/// A tool-verified similarity: `(concept, primary_key)` stands in relation
/// `relation` to the partner object, as confirmed by `tool`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ToolLink {
    pub concept: String,
    pub primary_key: String,
    pub relation: String,
    pub partner_concept: String,
    pub partner_key: String,
    pub tool: String,
}

#[derive(Debug, Clone, Copy)]
enum Incoming {
    Rel(usize),
    Tool(usize),
}

/// The fixpoint of one evaluation: every derived answer with its
/// justification, plus the rel facts and tool links it used.
#[derive(Debug, Clone)]
pub struct Evaluation {
    strategy: Strategy,
    atoms: Vec<Atom>,
    justifications: Vec<Justification>,
    index: HashMap<Atom, FactId>,
    by_object: HashMap<(String, String), Vec<FactId>>,
    by_concept: BTreeMap<String, Vec<FactId>>,
    rels: Vec<RelFact>,
    links: Vec<ToolLink>,
    key_attributes: HashMap<String, String>,
    warnings: Vec<String>,
    rounds: usize,
}

type Memo = Mutex<HashMap<(String, String, String), Result<bool, GatewayError>>>;

fn call_tool(gateway: &ToolGateway, memo: Option<&Memo>, op: &str, a: &str, b: &str) -> Result<bool, GatewayError> {
    let Some(memo) = memo else {
        return gateway.apply_op(op, a, b);
    };
    let key = (op.to_string(), a.to_string(), b.to_string());
    if let Some(hit) = memo.lock().get(&key) {
        return hit.clone();
    }
    let verdict = gateway.apply_op(op, a, b);
    memo.lock().insert(key, verdict.clone());
    verdict
}

/// Concept, key, relation, partner concept, partner key, tools.
type LinkTask<'a> = (&'a str, &'a str, &'a str, &'a str, &'a str, &'a [String]);

/// Rule 7's tool ladder over every (source, partner) object pair named by a
/// simCon row. The first tool that answers decides the pair; unavailable
/// tools are skipped with a warning.
pub(crate) fn verify_links(
    objects: &BTreeSet<(String, String)>,
    kb: &KnowledgeBase,
    gateway: &ToolGateway,
    options: SolveOptions,
) -> (Vec<ToolLink>, Vec<String>) {
    let mut by_concept: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (c, k) in objects {
        by_concept.entry(c.as_str()).or_default().push(k.as_str());
    }
    let mut tasks: Vec<LinkTask<'_>> = Vec::new();
    for row in kb.similar_concepts() {
        let sources = by_concept.get(row.concept_x.as_str()).map(Vec::as_slice).unwrap_or(&[]);
        let partners = by_concept.get(row.concept_y.as_str()).map(Vec::as_slice).unwrap_or(&[]);
        for relation in &row.relations {
            let Some(binding) = kb.tool_binding(relation) else { continue };
            for &src in sources {
                for &partner in partners {
                    if row.concept_x == row.concept_y && src == partner {
                        continue;
                    }
                    tasks.push((&row.concept_x, src, relation, &row.concept_y, partner, &binding.operations));
                }
            }
        }
    }

    let memo = options.memoize.then(Memo::default);
    let parallel = options.parallel && gateway.is_side_effect_free();
    let verdicts = par::map(&tasks, parallel, |&(_, src, _, _, partner, ops)| {
        let mut warnings = Vec::new();
        for op in ops {
            match call_tool(gateway, memo.as_ref(), op, src, partner) {
                Ok(true) => return (Some(op.clone()), warnings),
                Ok(false) => return (None, warnings),
                Err(e) => warnings.push(e.to_string()),
            }
        }
        (None, warnings)
    });

    let mut links = BTreeMap::new();
    let mut warnings = BTreeSet::new();
    for (&(concept, src, relation, partner_concept, partner, _), (tool, warns)) in tasks.iter().zip(verdicts) {
        warnings.extend(warns);
        let Some(tool) = tool else { continue };
        let link = ToolLink {
            concept: concept.to_string(),
            primary_key: src.to_string(),
            relation: relation.to_string(),
            partner_concept: partner_concept.to_string(),
            partner_key: partner.to_string(),
            tool,
        };
        let key = (
            link.concept.clone(),
            link.primary_key.clone(),
            link.relation.clone(),
            link.partner_concept.clone(),
            link.partner_key.clone(),
        );
        links.entry(key).or_insert(link);
    }
    (links.into_values().collect(), warnings.into_iter().collect())
}

struct Candidate {
    atom: Atom,
    justification: Justification,
}

pub(crate) fn run(
    view: &StoreView<'_>,
    kb: &KnowledgeBase,
    gateway: &ToolGateway,
    strategy: Strategy,
    options: SolveOptions,
) -> Evaluation {
    let mut ev = Evaluation {
        strategy,
        atoms: Vec::new(),
        justifications: Vec::new(),
        index: HashMap::new(),
        by_object: HashMap::new(),
        by_concept: BTreeMap::new(),
        rels: Vec::new(),
        links: Vec::new(),
        key_attributes: kb
            .ontology()
            .iter()
            .map(|e| (e.concept_name.clone(), e.key_attribute.clone()))
            .collect(),
        warnings: Vec::new(),
        rounds: 0,
    };

    let mut base: Vec<_> = view.iter().collect();
    base.sort();
    for f in base {
        let atom = Atom::new(&f.concept, &f.primary_key, &f.attribute, &f.value);
        ev.insert(atom, Justification::Direct { virtual_seed: f.is_virtual });
    }
    if !strategy.uses_indirect() {
        return ev;
    }

    let rels = rel::closure(view, kb);
    let mut links = Vec::new();
    if strategy.uses_interpretive() {
        let objects: BTreeSet<(String, String)> = ev.by_object.keys().cloned().collect();
        let (verified, warnings) = verify_links(&objects, kb, gateway, options);
        links = verified;
        ev.warnings = warnings;
    }

    let mut incoming: HashMap<(&str, &str), Vec<Incoming>> = HashMap::new();
    for (i, r) in rels.iter().enumerate() {
        incoming
            .entry((&r.derived_concept, &r.derived_key))
            .or_default()
            .push(Incoming::Rel(i));
    }
    for (i, l) in links.iter().enumerate() {
        incoming
            .entry((&l.partner_concept, &l.partner_key))
            .or_default()
            .push(Incoming::Tool(i));
    }

    let mut delta: Vec<FactId> = (0..ev.atoms.len()).collect();
    while !delta.is_empty() {
        ev.rounds += 1;
        let candidates = par::flat_map(&delta, options.parallel, |&id| {
            let atom = &ev.atoms[id];
            let mut out = Vec::new();
            for inc in incoming.get(&(atom.concept.as_str(), atom.primary_key.as_str())).into_iter().flatten() {
                match *inc {
                    Incoming::Rel(r) => {
                        let rel = &rels[r];
                        out.push(Candidate {
                            atom: Atom::new(&rel.concept, &rel.primary_key, &atom.attribute, &atom.value),
                            justification: Justification::Derived { rel: r, source: id },
                        });
                    }
                    Incoming::Tool(l) => {
                        if ev.is_self_fact(atom) {
                            continue;
                        }
                        let link = &links[l];
                        out.push(Candidate {
                            atom: Atom::new(&link.concept, &link.primary_key, &atom.attribute, &atom.value),
                            justification: Justification::Interpretive { link: l, source: id },
                        });
                    }
                }
            }
            out.retain(|c| !ev.index.contains_key(&c.atom));
            out
        });
        let mut candidates = candidates;
        par::sort_by(&mut candidates, options.parallel, |a, b| {
            (&a.atom, a.justification).cmp(&(&b.atom, b.justification))
        });
        let mut next = Vec::new();
        for c in candidates {
            if !ev.index.contains_key(&c.atom) {
                next.push(ev.insert(c.atom, c.justification));
            }
        }
        delta = next;
    }
    drop(incoming);
    ev.rels = rels;
    ev.links = links;
    ev
}

impl Evaluation {
    fn insert(&mut self, atom: Atom, justification: Justification) -> FactId {
        let id = self.atoms.len();
        self.by_object
            .entry((atom.concept.clone(), atom.primary_key.clone()))
            .or_default()
            .push(id);
        self.by_concept.entry(atom.concept.clone()).or_default().push(id);
        self.index.insert(atom.clone(), id);
        self.atoms.push(atom);
        self.justifications.push(justification);
        id
    }

    fn is_self_fact(&self, atom: &Atom) -> bool {
        atom.value == atom.primary_key && self.key_attributes.get(&atom.concept) == Some(&atom.attribute)
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atom(&self, id: FactId) -> &Atom {
        &self.atoms[id]
    }

    pub fn kind(&self, id: FactId) -> TraceKind {
        self.justifications[id].kind()
    }

    pub fn fact_id(&self, atom: &Atom) -> Option<FactId> {
        self.index.get(atom).copied()
    }

    pub fn contains(&self, atom: &Atom) -> bool {
        self.index.contains_key(atom)
    }

    /// All answer atoms, sorted.
    pub fn atoms(&self) -> BTreeSet<Atom> {
        self.atoms.iter().cloned().collect()
    }

    pub fn object_facts(&self, concept: &str, key: &str) -> impl Iterator<Item = FactId> + '_ {
        self.by_object
            .get(&(concept.to_string(), key.to_string()))
            .into_iter()
            .flatten()
            .copied()
    }

    pub fn rels(&self) -> &[RelFact] {
        &self.rels
    }

    pub fn links(&self) -> &[ToolLink] {
        &self.links
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    /// The full justification tree of one answer.
    pub fn trace(&self, id: FactId) -> ProvenanceTrace {
        let fact = self.atoms[id].clone();
        match self.justifications[id] {
            Justification::Direct { virtual_seed } => ProvenanceTrace::Direct { fact, virtual_seed },
            Justification::Derived { rel, source } => ProvenanceTrace::Derived {
                fact,
                rel: self.rels[rel].clone(),
                source: Box::new(self.trace(source)),
            },
            Justification::Interpretive { link, source } => {
                let l = &self.links[link];
                ProvenanceTrace::Interpretive {
                    fact,
                    relation: l.relation.clone(),
                    tool: l.tool.clone(),
                    partner_concept: l.partner_concept.clone(),
                    partner_key: l.partner_key.clone(),
                    source: Box::new(self.trace(source)),
                }
            }
        }
    }

    pub fn res_facts(&self) -> Vec<ResFact> {
        let mut ids: Vec<FactId> = (0..self.atoms.len()).collect();
        ids.sort_by(|a, b| self.atoms[*a].cmp(&self.atoms[*b]));
        ids.into_iter()
            .map(|id| {
                let a = self.atoms[id].clone();
                ResFact {
                    provenance: self.trace(id),
                    concept: a.concept,
                    primary_key: a.primary_key,
                    attribute: a.attribute,
                    value: a.value,
                }
            })
            .collect()
    }

    fn candidates(&self, goal: &GoalAtom, binding: &BTreeMap<String, String>) -> Vec<FactId> {
        let resolve = |t: &Term| match t {
            Term::Const(c) => Some(c.clone()),
            Term::Var(v) => binding.get(v).cloned(),
        };
        let (pk, attr, value) = (resolve(&goal.primary_key), resolve(&goal.attribute), resolve(&goal.value));
        if let (Some(a), Some(v), Some(k)) = (&attr, &value, &pk) {
            return self.fact_id(&Atom::new(&goal.concept, k, a, v)).into_iter().collect();
        }
        let pool: Vec<FactId> = match &pk {
            Some(k) => self.object_facts(&goal.concept, k).collect(),
            None => self.by_concept.get(&goal.concept).cloned().unwrap_or_default(),
        };
        pool.into_iter()
            .filter(|&id| {
                let a = &self.atoms[id];
                attr.as_ref().is_none_or(|x| *x == a.attribute) && value.as_ref().is_none_or(|x| *x == a.value)
            })
            .collect()
    }

    /// Joins `goals` left to right over shared variables. Rows are unique
    /// per binding of the named variables; each keeps its most direct
    /// supporting derivation.
    pub fn solve(&self, goals: &[GoalAtom]) -> Solution {
        let mut columns: Vec<String> = Vec::new();
        for g in goals {
            for t in [&g.primary_key, &g.attribute, &g.value] {
                if let Term::Var(v) = t {
                    if !v.starts_with('_') && !columns.contains(v) {
                        columns.push(v.clone());
                    }
                }
            }
        }

        let mut partial: Vec<(BTreeMap<String, String>, Vec<FactId>)> = vec![(BTreeMap::new(), Vec::new())];
        for g in goals {
            let mut next = Vec::new();
            for (binding, support) in &partial {
                for id in self.candidates(g, binding) {
                    let a = &self.atoms[id];
                    let mut b = binding.clone();
                    let ok = [(&g.primary_key, &a.primary_key), (&g.attribute, &a.attribute), (&g.value, &a.value)]
                        .into_iter()
                        .all(|(t, val)| match t {
                            Term::Const(c) => c == val,
                            Term::Var(v) => match b.get(v) {
                                Some(existing) => existing == val,
                                None => {
                                    b.insert(v.clone(), val.clone());
                                    true
                                }
                            },
                        });
                    if ok {
                        let mut s = support.clone();
                        s.push(id);
                        next.push((b, s));
                    }
                }
            }
            partial = next;
        }

        let mut rows: BTreeMap<Vec<String>, SolutionRow> = BTreeMap::new();
        for (binding, support) in partial {
            let values: Vec<String> = columns.iter().map(|c| binding[c].clone()).collect();
            let kind = support.iter().map(|&id| self.kind(id)).max().unwrap_or(TraceKind::Direct);
            let row = SolutionRow {
                values: values.clone(),
                support,
                kind,
            };
            rows.entry(values)
                .and_modify(|r| {
                    if (row.kind, &row.support) < (r.kind, &r.support) {
                        *r = row.clone();
                    }
                })
                .or_insert(row);
        }
        Solution {
            columns,
            rows: rows.into_values().collect(),
        }
    }
}

/// The answer to a goal conjunction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Solution {
    pub columns: Vec<String>,
    pub rows: Vec<SolutionRow>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolutionRow {
    pub values: Vec<String>,
    /// One supporting fact per goal atom.
    pub support: Vec<FactId>,
    /// The least direct rule kind among the supporting facts.
    pub kind: TraceKind,
}

impl SolutionRow {
    pub fn derived(&self) -> bool {
        self.kind != TraceKind::Direct
    }
}

impl Solution {
    pub fn value_rows(&self) -> BTreeSet<Vec<String>> {
        self.rows.iter().map(|r| r.values.clone()).collect()
    }

    pub fn column(&self, name: &str) -> Vec<&str> {
        let Some(i) = self.columns.iter().position(|c| c == name) else {
            return Vec::new();
        };
        self.rows.iter().map(|r| r.values[i].as_str()).collect()
    }
}
