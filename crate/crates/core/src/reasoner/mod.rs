//! Bottom-up evaluation of the res/rel rules over the canonical store.
//!
//! Rule 1 copies canonical facts, rules 3 and 4 build the rel closure over
//! derivative and foreign-key links, rule 2 transfers a linked object's
//! facts to its source, and rule 7 copies the facts of tool-verified similar
//! objects. Rules 2 and 7 feed each other, so they run as one semi-naive
//! fixpoint.

mod eval;
pub mod goal;
mod provenance;
mod rel;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::ToolGateway;
use crate::knowledge::KnowledgeBase;
use crate::store::StoreView;

pub use eval::{Evaluation, FactId, Solution, SolutionRow, ToolLink};
pub use goal::{parse_goals, GoalAtom, Term};
pub use provenance::{provenance_id, replay, ProvenanceTrace, ReplayError, TraceKind};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ReasonerError {
    #[error("goal names unknown concept `{0}`")]
    UnknownConceptInGoal(String),
    #[error("goal names unknown attribute `{0}`")]
    UnknownAttributeInGoal(String),
    #[error("cannot parse goal: {0}")]
    GoalSyntax(String),
}

impl ReasonerError {
    pub fn name(&self) -> &'static str {
        match self {
            ReasonerError::UnknownConceptInGoal(_) => "UnknownConceptInGoal",
            ReasonerError::UnknownAttributeInGoal(_) => "UnknownAttributeInGoal",
            ReasonerError::GoalSyntax(_) => "GoalSyntax",
        }
    }
}

/// Which rules take part in an evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    DirectOnly,
    Indirect,
    Interpretive,
}

impl Strategy {
    pub const LADDER: [Strategy; 3] = [Strategy::DirectOnly, Strategy::Indirect, Strategy::Interpretive];

    pub fn uses_indirect(self) -> bool {
        self >= Strategy::Indirect
    }

    pub fn uses_interpretive(self) -> bool {
        self == Strategy::Interpretive
    }

    pub fn label(self) -> &'static str {
        match self {
            Strategy::DirectOnly => "direct-only",
            Strategy::Indirect => "+indirect",
            Strategy::Interpretive => "+interpretive",
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().trim_start_matches('+') {
            "direct-only" | "direct" => Ok(Strategy::DirectOnly),
            "indirect" => Ok(Strategy::Indirect),
            "interpretive" => Ok(Strategy::Interpretive),
            other => Err(format!("unknown strategy `{other}`")),
        }
    }
}

/// A res/4 atom without its justification.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Atom {
    pub concept: String,
    pub primary_key: String,
    pub attribute: String,
    pub value: String,
}

impl Atom {
    pub fn new(concept: &str, primary_key: &str, attribute: &str, value: &str) -> Self {
        Atom {
            concept: concept.to_string(),
            primary_key: primary_key.to_string(),
            attribute: attribute.to_string(),
            value: value.to_string(),
        }
    }

    pub fn object(&self) -> (&str, &str) {
        (&self.concept, &self.primary_key)
    }
}

impl std::fmt::Display for Atom {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "res('{}', '{}', '{}', '{}')",
            self.concept, self.primary_key, self.attribute, self.value
        )
    }
}

/// A res/4 answer together with the chain of rule applications behind it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResFact {
    pub concept: String,
    pub primary_key: String,
    pub attribute: String,
    pub value: String,
    pub provenance: ProvenanceTrace,
}

impl ResFact {
    pub fn atom(&self) -> Atom {
        Atom::new(&self.concept, &self.primary_key, &self.attribute, &self.value)
    }
}

/// One foreign-key step between two objects that share a column value.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Hop {
    pub from_table: String,
    pub from_column: String,
    pub to_table: String,
    pub to_column: String,
    pub from_key: String,
    pub to_key: String,
    pub value: String,
}

/// rel/4: the object `(concept, primary_key)` corresponds to
/// `(derived_concept, derived_key)` along `path`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RelFact {
    pub concept: String,
    pub derived_concept: String,
    pub primary_key: String,
    pub derived_key: String,
    pub path: Vec<Hop>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolveOptions {
    /// Cache tool verdicts for the duration of one evaluation.
    pub memoize: bool,
    /// Generate candidates and verify tool pairs on the rayon pool. Ignored
    /// without the `parallel` feature.
    pub parallel: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            memoize: true,
            parallel: cfg!(feature = "parallel"),
        }
    }
}

/// Entry point bundling the knowledge base, the tool gateway and options.
#[derive(Debug, Clone, Copy)]
pub struct Reasoner<'a> {
    pub kb: &'a KnowledgeBase,
    pub gateway: &'a ToolGateway,
    pub options: SolveOptions,
}

impl<'a> Reasoner<'a> {
    pub fn new(kb: &'a KnowledgeBase, gateway: &'a ToolGateway) -> Self {
        Reasoner {
            kb,
            gateway,
            options: SolveOptions::default(),
        }
    }

    pub fn with_options(mut self, options: SolveOptions) -> Self {
        self.options = options;
        self
    }

    /// Runs the fixpoint for `strategy`.
    pub fn evaluate(&self, view: &StoreView<'_>, strategy: Strategy) -> Evaluation {
        eval::run(view, self.kb, self.gateway, strategy, self.options)
    }

    /// Evaluates and joins `goals` over shared variables.
    pub fn solve(&self, goals: &[GoalAtom], view: &StoreView<'_>, strategy: Strategy) -> Result<Solution, ReasonerError> {
        goal::validate(goals, self.kb)?;
        Ok(self.evaluate(view, strategy).solve(goals))
    }
}

/// Rule 1: one direct answer per canonical fact.
pub fn eval_direct(view: &StoreView<'_>) -> Vec<ResFact> {
    let mut facts: Vec<_> = view.iter().collect();
    facts.sort();
    facts
        .into_iter()
        .map(|f| {
            let atom = Atom::new(&f.concept, &f.primary_key, &f.attribute, &f.value);
            ResFact {
                provenance: ProvenanceTrace::Direct {
                    fact: atom.clone(),
                    virtual_seed: f.is_virtual,
                },
                concept: atom.concept,
                primary_key: atom.primary_key,
                attribute: atom.attribute,
                value: atom.value,
            }
        })
        .collect()
}

/// Rules 3 and 4: the rel closure.
pub fn eval_rel(view: &StoreView<'_>, kb: &KnowledgeBase) -> Vec<RelFact> {
    rel::closure(view, kb)
}

/// One application of rule 2 over the given answers and links. Returns the
/// emitted answers that are not already in `res`.
pub fn eval_indirect(res: &[ResFact], rels: &[RelFact]) -> Vec<ResFact> {
    let known: std::collections::HashSet<Atom> = res.iter().map(ResFact::atom).collect();
    let mut out = std::collections::BTreeMap::new();
    for r in rels {
        for f in res
            .iter()
            .filter(|f| f.concept == r.derived_concept && f.primary_key == r.derived_key)
        {
            let atom = Atom::new(&r.concept, &r.primary_key, &f.attribute, &f.value);
            if known.contains(&atom) {
                continue;
            }
            out.entry(atom.clone()).or_insert_with(|| ResFact {
                provenance: ProvenanceTrace::Derived {
                    fact: atom.clone(),
                    rel: r.clone(),
                    source: Box::new(f.provenance.clone()),
                },
                concept: atom.concept,
                primary_key: atom.primary_key,
                attribute: atom.attribute,
                value: atom.value,
            });
        }
    }
    out.into_values().collect()
}

/// One application of rule 7. Returns new answers and tool warnings.
pub fn eval_interpretive(res: &[ResFact], kb: &KnowledgeBase, gateway: &ToolGateway) -> (Vec<ResFact>, Vec<String>) {
    let objects: std::collections::BTreeSet<(String, String)> =
        res.iter().map(|f| (f.concept.clone(), f.primary_key.clone())).collect();
    let (links, warnings) = eval::verify_links(&objects, kb, gateway, SolveOptions::default());
    let known: std::collections::HashSet<Atom> = res.iter().map(ResFact::atom).collect();
    let mut out = std::collections::BTreeMap::new();
    for link in &links {
        let partner_key_attr = kb.entry(&link.partner_concept).map(|e| e.key_attribute.as_str());
        for f in res
            .iter()
            .filter(|f| f.concept == link.partner_concept && f.primary_key == link.partner_key)
        {
            if Some(f.attribute.as_str()) == partner_key_attr && f.value == f.primary_key {
                continue;
            }
            let atom = Atom::new(&link.concept, &link.primary_key, &f.attribute, &f.value);
            if known.contains(&atom) {
                continue;
            }
            out.entry(atom.clone()).or_insert_with(|| ResFact {
                provenance: ProvenanceTrace::Interpretive {
                    fact: atom.clone(),
                    relation: link.relation.clone(),
                    tool: link.tool.clone(),
                    partner_concept: link.partner_concept.clone(),
                    partner_key: link.partner_key.clone(),
                    source: Box::new(f.provenance.clone()),
                },
                concept: atom.concept,
                primary_key: atom.primary_key,
                attribute: atom.attribute,
                value: atom.value,
            });
        }
    }
    (out.into_values().collect(), warnings)
}
