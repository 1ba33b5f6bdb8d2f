//! Recompute-everything bottom-up evaluation of rules 1-4 and 7, written
//! straight from the rule text over plain tuples.

use std::collections::{BTreeMap, BTreeSet};

use super::random::Instance;

pub type Fact = (String, String, String, String);
pub type Rel = (String, String, String, String);

fn s(x: &str) -> String {
    x.to_string()
}

pub fn canonical(inst: &Instance) -> BTreeSet<Fact> {
    let mut out = BTreeSet::new();
    for t in &inst.tables {
        let entry = inst.doc.ontology.iter().find(|e| e.table_name == t.name).unwrap();
        let k = t.columns.iter().position(|c| *c == entry.key_attribute).unwrap();
        for row in &t.rows {
            for (col, cell) in t.columns.iter().zip(row) {
                if !cell.is_empty() {
                    out.insert((entry.concept_name.clone(), row[k].clone(), col.clone(), cell.clone()));
                }
            }
        }
    }
    for (c, key) in &inst.seeds {
        let entry = inst.doc.ontology.iter().find(|e| e.concept_name == *c).unwrap();
        out.insert((c.clone(), key.clone(), entry.key_attribute.clone(), key.clone()));
    }
    out
}

fn concept_of_table<'a>(inst: &'a Instance, table: &str) -> &'a str {
    &inst.doc.ontology.iter().find(|e| e.table_name == table).unwrap().concept_name
}

fn edges(inst: &Instance, canon: &BTreeSet<Fact>) -> BTreeSet<(String, String, String, String)> {
    let mut hops = Vec::new();
    for f in &inst.doc.foreign_keys {
        hops.push((f.table_x.clone(), f.column_x.clone(), f.table_y.clone(), f.column_y.clone()));
        hops.push((f.table_y.clone(), f.column_y.clone(), f.table_x.clone(), f.column_x.clone()));
    }
    let mut out = BTreeSet::new();
    for (tx, cx, ty, cy) in hops {
        let (x, y) = (concept_of_table(inst, &tx), concept_of_table(inst, &ty));
        for (c1, k1, a1, v1) in canon {
            if c1 != x || *a1 != cx {
                continue;
            }
            for (c2, k2, a2, v2) in canon {
                if c2 == y && *a2 == cy && v1 == v2 && (c1, k1) != (c2, k2) {
                    out.insert((c1.clone(), k1.clone(), c2.clone(), k2.clone()));
                }
            }
        }
    }
    out
}

/// rel/4: der-permitted first hop, then any further forK hops, never back
/// to the origin.
pub fn rel(inst: &Instance, canon: &BTreeSet<Fact>) -> BTreeSet<Rel> {
    let mut der = BTreeSet::new();
    for d in &inst.doc.derivatives {
        der.insert((d.concept_a.clone(), d.concept_b.clone()));
        if inst.doc.options.symmetric_derivations {
            der.insert((d.concept_b.clone(), d.concept_a.clone()));
        }
    }
    let edges = edges(inst, canon);
    let mut rel: BTreeSet<Rel> = BTreeSet::new();
    for (c, d) in &der {
        for (c1, k1, c2, k2) in &edges {
            if c1 == c && c2 == d {
                rel.insert((c.clone(), d.clone(), k1.clone(), k2.clone()));
            }
        }
    }
    loop {
        let mut next = rel.clone();
        for (c, d, kc, kd) in &rel {
            for (c1, k1, c2, k2) in &edges {
                if c1 == d && k1 == kd && (c2, k2) != (c, kc) {
                    next.insert((c.clone(), c2.clone(), kc.clone(), k2.clone()));
                }
            }
        }
        if next == rel {
            return rel;
        }
        rel = next;
    }
}

/// Tool-verified (source concept, source key, partner concept, partner key).
pub fn links(inst: &Instance, objects: &BTreeSet<(String, String)>) -> BTreeSet<(String, String, String, String)> {
    let mut out = BTreeSet::new();
    for row in &inst.doc.similar_concepts {
        for relation in &row.relations {
            let Some(binding) = inst.doc.tools.iter().find(|t| t.relation == *relation) else { continue };
            for (cx, src) in objects.iter().filter(|(c, _)| *c == row.concept_x) {
                for (cy, partner) in objects.iter().filter(|(c, _)| *c == row.concept_y) {
                    if cx == cy && src == partner {
                        continue;
                    }
                    for op in &binding.operations {
                        let Some(tool) = inst.tools.iter().find(|t| t.name == *op) else { continue };
                        let Some(pairs) = &tool.pairs else { continue };
                        let holds = pairs.contains(&(src.clone(), partner.clone()))
                            || (tool.symmetric && pairs.contains(&(partner.clone(), src.clone())));
                        if holds {
                            out.insert((cx.clone(), src.clone(), cy.clone(), partner.clone()));
                        }
                        break;
                    }
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rules {
    Direct,
    WithRel,
    WithTools,
}

pub fn evaluate(inst: &Instance, rules: Rules) -> BTreeSet<Fact> {
    let canon = canonical(inst);
    if rules == Rules::Direct {
        return canon;
    }
    let rel = rel(inst, &canon);
    let objects: BTreeSet<(String, String)> = canon.iter().map(|(c, k, _, _)| (c.clone(), k.clone())).collect();
    let links = if rules == Rules::WithTools { links(inst, &objects) } else { BTreeSet::new() };
    let keys: BTreeMap<String, String> = inst
        .doc
        .ontology
        .iter()
        .map(|e| (e.concept_name.clone(), e.key_attribute.clone()))
        .collect();

    let mut res = canon;
    loop {
        let mut next = res.clone();
        for (c, d, kc, kd) in &rel {
            for (c2, k2, a, v) in &res {
                if c2 == d && k2 == kd {
                    next.insert((c.clone(), kc.clone(), a.clone(), v.clone()));
                }
            }
        }
        for (cx, src, cy, partner) in &links {
            for (c2, k2, a, v) in &res {
                let self_fact = keys.get(c2) == Some(a) && v == k2;
                if c2 == cy && k2 == partner && !self_fact {
                    next.insert((cx.clone(), src.clone(), a.clone(), v.clone()));
                }
            }
        }
        if next == res {
            return res;
        }
        res = next;
    }
}

pub fn fact(c: &str, k: &str, a: &str, v: &str) -> Fact {
    (s(c), s(k), s(a), s(v))
}
