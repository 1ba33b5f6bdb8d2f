//! Select-project-join evaluator for the SQL subset the planner renders:
//! `select cols from T [as a], ... [where c and c ...]` with `=` between
//! columns or against a literal, and `in (...)` lists. Empty cells are
//! nulls: they never compare equal and rows projecting them are dropped.

use std::collections::{BTreeMap, BTreeSet};

use kriq_core::store::RelationalTable;

#[derive(Debug, Clone, PartialEq)]
enum Operand {
    Column(String),
    Literal(String),
    List(Vec<String>),
}

fn literal(text: &str) -> Option<String> {
    let t = text.trim();
    let inner = t.strip_prefix('\'')?.strip_suffix('\'')?;
    Some(inner.replace("''", "'"))
}

fn split_top(text: &str, sep: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut quoted = false;
    let mut i = 0;
    let bytes = text.as_bytes();
    while i < text.len() {
        let c = bytes[i] as char;
        if c == '\'' {
            quoted = !quoted;
        }
        if !quoted && text[i..].starts_with(sep) {
            out.push(cur.trim().to_string());
            cur.clear();
            i += sep.len();
            continue;
        }
        cur.push(c);
        i += 1;
    }
    out.push(cur.trim().to_string());
    out
}

fn operand(text: &str) -> Operand {
    let t = text.trim();
    if let Some(l) = literal(t) {
        return Operand::Literal(l);
    }
    if let Some(inner) = t.strip_prefix('(').and_then(|x| x.strip_suffix(')')) {
        return Operand::List(split_top(inner, ",").iter().map(|v| literal(v).expect("literal")).collect());
    }
    Operand::Column(t.to_string())
}

pub fn execute(sql: &str, tables: &[RelationalTable]) -> BTreeSet<Vec<String>> {
    let body: Vec<&str> = sql.lines().filter(|l| !l.trim_start().starts_with("--")).collect();
    let text = body.join(" ");
    let rest = text.trim().strip_prefix("select ").expect("select");
    let (select, rest) = rest.split_once(" from ").expect("from");
    let (from, filter) = match rest.split_once(" where ") {
        Some((f, w)) => (f, Some(w)),
        None => (rest, None),
    };

    let mut sources: Vec<(&RelationalTable, String)> = Vec::new();
    for item in from.split(',') {
        let parts: Vec<&str> = item.split_whitespace().collect();
        let table = tables.iter().find(|t| t.name == parts[0]).expect("known table");
        let alias = if parts.len() == 3 { parts[2].to_string() } else { parts[0].to_string() };
        sources.push((table, alias));
    }
    let resolve = |name: &str| -> (usize, usize) {
        let (alias, col) = match name.split_once('.') {
            Some((a, c)) => (Some(a), c),
            None => (None, name),
        };
        for (i, (t, a)) in sources.iter().enumerate() {
            if alias.is_none_or(|x| x == a) {
                if let Some(j) = t.columns.iter().position(|c| c == col) {
                    return (i, j);
                }
            }
        }
        panic!("unknown column {name}");
    };

    let mut conds: Vec<((usize, usize), Operand)> = Vec::new();
    if let Some(w) = filter {
        for c in split_top(w, " and ") {
            if let Some((l, r)) = c.split_once(" in ") {
                conds.push((resolve(l.trim()), operand(r)));
            } else {
                let (l, r) = c.split_once(" = ").expect("comparison");
                let rhs = match operand(r) {
                    Operand::Column(name) => {
                        let (i, j) = resolve(&name);
                        Operand::Column(format!("{i}:{j}"))
                    }
                    other => other,
                };
                conds.push((resolve(l.trim()), rhs));
            }
        }
    }
    let projection: Vec<(usize, usize)> = select.split(',').map(|c| resolve(c.trim())).collect();

    let mut combos: Vec<Vec<usize>> = vec![Vec::new()];
    for (t, _) in &sources {
        combos = combos
            .into_iter()
            .flat_map(|c| {
                (0..t.rows.len()).map(move |r| {
                    let mut n = c.clone();
                    n.push(r);
                    n
                })
            })
            .collect();
    }
    let cell = |combo: &[usize], (i, j): (usize, usize)| -> Option<String> {
        let v = &sources[i].0.rows[combo[i]][j];
        (!v.is_empty()).then(|| v.clone())
    };
    let mut out = BTreeSet::new();
    for combo in combos {
        let ok = conds.iter().all(|(lhs, rhs)| {
            let Some(l) = cell(&combo, *lhs) else { return false };
            match rhs {
                Operand::Literal(v) => l == *v,
                Operand::List(vs) => vs.contains(&l),
                Operand::Column(pos) => {
                    let (i, j) = pos.split_once(':').unwrap();
                    cell(&combo, (i.parse().unwrap(), j.parse().unwrap())) == Some(l)
                }
            }
        });
        if !ok {
            continue;
        }
        let row: Option<Vec<String>> = projection.iter().map(|p| cell(&combo, *p)).collect();
        if let Some(row) = row {
            out.insert(row);
        }
    }
    out
}

/// Tables by name, for callers that hold a map.
pub fn by_name(tables: &[RelationalTable]) -> BTreeMap<&str, &RelationalTable> {
    tables.iter().map(|t| (t.name.as_str(), t)).collect()
}
