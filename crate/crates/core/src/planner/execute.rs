use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{ConceptualPlan, KEY_VAR};
use crate::reasoner::{
    provenance_id, Evaluation, FactId, GoalAtom, ProvenanceTrace, Reasoner, Strategy, Term, ToolLink, TraceKind,
};
use crate::store::CanonicalStore;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Direct facts only, no seeding: what a plain relational query returns.
    Baseline,
    /// Seeds plus the full strategy ladder.
    Enhanced,
}

/// Everything behind one result row: the supporting res facts and the tool
/// links that produced it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowProvenance {
    pub strategy: Strategy,
    pub atoms: Vec<ProvenanceTrace>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub links: Vec<ToolLink>,
}

impl RowProvenance {
    pub fn kind(&self) -> TraceKind {
        let atoms = self.atoms.iter().map(ProvenanceTrace::kind).max().unwrap_or(TraceKind::Direct);
        if self.links.is_empty() {
            atoms
        } else {
            TraceKind::Interpretive
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ResultRow {
    pub values: Vec<String>,
    pub derived: bool,
    pub provenance_id: String,
    #[serde(skip)]
    pub provenance: RowProvenance,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ResultTable {
    pub columns: Vec<String>,
    pub rows: Vec<ResultRow>,
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl ResultTable {
    pub fn empty(columns: Vec<String>, mode: Mode) -> Self {
        ResultTable {
            columns,
            rows: Vec::new(),
            mode,
            warnings: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn value_rows(&self) -> std::collections::BTreeSet<Vec<String>> {
        self.rows.iter().map(|r| r.values.clone()).collect()
    }

    pub fn column_values(&self, name: &str) -> Vec<&str> {
        let Some(i) = self.columns.iter().position(|c| c == name) else {
            return Vec::new();
        };
        self.rows.iter().map(|r| r.values[i].as_str()).collect()
    }

    pub fn row(&self, provenance_id: &str) -> Option<&ResultRow> {
        self.rows.iter().find(|r| r.provenance_id == provenance_id)
    }

    /// Aligned plain-text rendering; derived rows are marked with `*`.
    pub fn to_text(&self) -> String {
        let mut widths: Vec<usize> = self.columns.iter().map(|c| c.chars().count()).collect();
        for r in &self.rows {
            for (w, v) in widths.iter_mut().zip(&r.values) {
                *w = (*w).max(v.chars().count());
            }
        }
        let line = |cells: &[String], mark: &str| {
            let body: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
            format!("{mark} {}", body.join(" | ")).trim_end().to_string()
        };
        let mut out = vec![line(&self.columns, " ")];
        out.push(format!(
            "  {}",
            widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("-+-")
        ));
        for r in &self.rows {
            out.push(line(&r.values, if r.derived { "*" } else { " " }));
        }
        out.push(format!("({} rows)", self.rows.len()));
        out.join("\n")
    }
}

#[derive(Debug, Clone)]
struct Candidate {
    kind: TraceKind,
    support: Vec<FactId>,
    links: Vec<usize>,
}

impl Candidate {
    fn better_than(&self, other: &Candidate) -> bool {
        (self.kind, &self.support, &self.links) < (other.kind, &other.support, &other.links)
    }
}

fn keep_best(map: &mut BTreeMap<Vec<String>, Candidate>, values: Vec<String>, cand: Candidate) {
    match map.get_mut(&values) {
        Some(cur) if cand.better_than(cur) => *cur = cand,
        Some(_) => {}
        None => {
            map.insert(values, cand);
        }
    }
}

fn bind_key(goal: &GoalAtom, pk: &str) -> GoalAtom {
    let sub = |t: &Term| match t {
        Term::Var(v) if v == KEY_VAR => Term::constant(pk),
        other => other.clone(),
    };
    GoalAtom {
        concept: goal.concept.clone(),
        primary_key: sub(&goal.primary_key),
        attribute: sub(&goal.attribute),
        value: sub(&goal.value),
    }
}

/// Objects satisfying any selector branch together with the condition goals.
fn select_objects(plan: &ConceptualPlan, ev: &Evaluation) -> BTreeMap<String, Candidate> {
    let mut objects: BTreeMap<String, Candidate> = BTreeMap::new();
    for branch in &plan.selector_goals {
        let goals: Vec<GoalAtom> = branch.iter().chain(&plan.condition_goals).cloned().collect();
        let sol = ev.solve(&goals);
        let Some(col) = sol.columns.iter().position(|c| c == KEY_VAR) else { continue };
        for row in sol.rows {
            let cand = Candidate {
                kind: row.kind,
                support: row.support,
                links: Vec::new(),
            };
            match objects.get_mut(&row.values[col]) {
                Some(cur) if cand.better_than(cur) => *cur = cand,
                Some(_) => {}
                None => {
                    objects.insert(row.values[col].clone(), cand);
                }
            }
        }
    }
    objects
}

fn plan_rows(plan: &ConceptualPlan, ev: &Evaluation) -> BTreeMap<Vec<String>, Candidate> {
    let mut out = BTreeMap::new();
    for (pk, sel) in select_objects(plan, ev) {
        if let Some(rel) = &plan.relation {
            for (i, l) in ev.links().iter().enumerate() {
                if l.concept != plan.target_concept || l.primary_key != pk || &l.relation != rel {
                    continue;
                }
                let values = plan
                    .output_vars
                    .iter()
                    .map(|v| if v == KEY_VAR { pk.clone() } else { l.partner_key.clone() })
                    .collect();
                let cand = Candidate {
                    kind: TraceKind::Interpretive,
                    support: sel.support.clone(),
                    links: vec![i],
                };
                keep_best(&mut out, values, cand);
            }
            continue;
        }
        let goals: Vec<GoalAtom> = plan
            .link_goals
            .iter()
            .chain(&plan.request_goals)
            .map(|g| bind_key(g, &pk))
            .collect();
        if goals.is_empty() {
            keep_best(&mut out, vec![pk.clone(); plan.output_vars.len()], sel.clone());
            continue;
        }
        let sol = ev.solve(&goals);
        for row in sol.rows {
            let values = plan
                .output_vars
                .iter()
                .map(|v| {
                    if v == KEY_VAR {
                        pk.clone()
                    } else {
                        sol.columns
                            .iter()
                            .position(|c| c == v)
                            .map(|i| row.values[i].clone())
                            .unwrap_or_default()
                    }
                })
                .collect();
            let mut support = sel.support.clone();
            support.extend(row.support);
            let cand = Candidate {
                kind: sel.kind.max(row.kind),
                support,
                links: Vec::new(),
            };
            keep_best(&mut out, values, cand);
        }
    }
    out
}

fn materialize(values: Vec<String>, cand: &Candidate, ev: &Evaluation) -> ResultRow {
    let provenance = RowProvenance {
        strategy: ev.strategy(),
        atoms: cand.support.iter().map(|&id| ev.trace(id)).collect(),
        links: cand.links.iter().map(|&i| ev.links()[i].clone()).collect(),
    };
    ResultRow {
        provenance_id: provenance_id(&(&values, &provenance)),
        derived: cand.kind != TraceKind::Direct,
        values,
        provenance,
    }
}

fn ladder(mode: Mode, plan_ladder: &[Strategy]) -> Vec<Strategy> {
    match mode {
        Mode::Baseline => vec![Strategy::DirectOnly],
        Mode::Enhanced => plan_ladder.to_vec(),
    }
}

fn finish(mut rows: Vec<ResultRow>, columns: Vec<String>, mode: Mode, mut warnings: Vec<String>) -> ResultTable {
    rows.sort_by(|a, b| (a.derived, &a.values).cmp(&(b.derived, &b.values)));
    warnings.dedup();
    ResultTable {
        columns,
        rows,
        mode,
        warnings,
    }
}

/// Runs a plan. Each rung of the ladder adds the rows its evaluation
/// answers that earlier rungs did not; a row keeps its most direct support.
pub fn execute(plan: &ConceptualPlan, store: &CanonicalStore, reasoner: &Reasoner<'_>, mode: Mode) -> ResultTable {
    let seeds: &[(String, String)] = match mode {
        Mode::Baseline => &[],
        Mode::Enhanced => &plan.seeds,
    };
    let view = store.with_seeds(seeds, reasoner.kb);
    let mut rows: BTreeMap<Vec<String>, ResultRow> = BTreeMap::new();
    let mut warnings = plan.warnings.clone();
    for strategy in ladder(mode, &plan.strategy_ladder) {
        let ev = reasoner.evaluate(&view, strategy);
        warnings.extend(ev.warnings().iter().cloned());
        for (values, cand) in plan_rows(plan, &ev) {
            if let std::collections::btree_map::Entry::Vacant(slot) = rows.entry(values) {
                let row = materialize(slot.key().clone(), &cand, &ev);
                slot.insert(row);
            }
        }
    }
    finish(rows.into_values().collect(), plan.columns.clone(), mode, warnings)
}

/// Runs raw goals over the store, with the same ladder semantics as
/// [`execute`]. `strategy` pins a single rung instead.
pub fn execute_goals(
    goals: &[GoalAtom],
    store: &CanonicalStore,
    reasoner: &Reasoner<'_>,
    seeds: &[(String, String)],
    strategy: Option<Strategy>,
) -> ResultTable {
    let view = store.with_seeds(seeds, reasoner.kb);
    let rungs = match strategy {
        Some(s) => vec![s],
        None => Strategy::LADDER.to_vec(),
    };
    let mode = if rungs == [Strategy::DirectOnly] { Mode::Baseline } else { Mode::Enhanced };
    let mut rows: BTreeMap<Vec<String>, ResultRow> = BTreeMap::new();
    let mut columns = Vec::new();
    let mut warnings = Vec::new();
    for s in rungs {
        let ev = reasoner.evaluate(&view, s);
        warnings.extend(ev.warnings().iter().cloned());
        let sol = ev.solve(goals);
        columns = sol.columns.clone();
        for row in sol.rows {
            if !rows.contains_key(&row.values) {
                let cand = Candidate {
                    kind: row.kind,
                    support: row.support,
                    links: Vec::new(),
                };
                rows.insert(row.values.clone(), materialize(row.values, &cand, &ev));
            }
        }
    }
    finish(rows.into_values().collect(), columns, mode, warnings)
}
