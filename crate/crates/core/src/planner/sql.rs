use super::{ConceptualPlan, PlanError, RequestForm, KEY_VAR};
use crate::knowledge::KnowledgeBase;

fn quote(value: &str) -> String {
    format!("'{}'", value.replace('\'', "''"))
}

#[derive(Default)]
struct Query {
    tables: Vec<(String, String)>,
    select: Vec<(String, String)>,
    joins: Vec<String>,
    filters: Vec<(String, String, String)>,
}

impl Query {
    fn alias(&mut self, table: &str) -> String {
        if let Some((_, a)) = self.tables.iter().find(|(t, _)| t == table) {
            return a.clone();
        }
        let base: String = table.chars().next().map(|c| c.to_lowercase().collect()).unwrap_or_default();
        let mut alias = base.clone();
        let mut n = 2;
        while self.tables.iter().any(|(_, a)| *a == alias) {
            alias = format!("{base}{n}");
            n += 1;
        }
        self.tables.push((table.to_string(), alias.clone()));
        alias
    }

    fn render(&self) -> String {
        let single = self.tables.len() == 1;
        let col = |alias: &str, c: &str| if single { c.to_string() } else { format!("{alias}.{c}") };
        let select: Vec<String> = self.select.iter().map(|(a, c)| col(a, c)).collect();
        // Tables feeding the select list come first.
        let mut order: Vec<&(String, String)> = Vec::new();
        for (a, _) in &self.select {
            if let Some(t) = self.tables.iter().find(|(_, x)| x == a) {
                if !order.contains(&t) {
                    order.push(t);
                }
            }
        }
        for t in &self.tables {
            if !order.contains(&t) {
                order.push(t);
            }
        }
        let from: Vec<String> = order
            .iter()
            .map(|(t, a)| if single { t.clone() } else { format!("{t} as {a}") })
            .collect();
        let mut conds = self.joins.clone();
        conds.extend(self.filters.iter().map(|(a, c, rhs)| format!("{} {rhs}", col(a, c))));
        let mut sql = format!("select {}\nfrom {}", select.join(", "), from.join(", "));
        if !conds.is_empty() {
            sql.push_str(&format!("\nwhere {}", conds.join(" and ")));
        }
        sql
    }
}

fn not_renderable(reason: impl Into<String>, partial: Option<String>) -> PlanError {
    let reason = reason.into();
    PlanError::NotDirectlyRenderable {
        partial_sql: partial.map(|sql| format!("{sql}\n-- knowledge-derived remainder: {reason}")),
        reason,
    }
}

/// SQL for the direct portion of a plan. Plans that need derived knowledge
/// or tools fail with `NotDirectlyRenderable`, carrying the SQL of the
/// object selection when there is one.
pub fn render_sql(plan: &ConceptualPlan, kb: &KnowledgeBase) -> Result<String, PlanError> {
    let entry = kb
        .entry(&plan.target_concept)
        .ok_or_else(|| not_renderable(format!("unknown concept {}", plan.target_concept), None))?;
    let mut q = Query::default();
    let base = q.alias(&entry.table_name);
    if let Some(sel) = &plan.selector {
        let rhs = match sel.values.as_slice() {
            [one] => format!("= {}", quote(one)),
            many => format!("in ({})", many.iter().map(|v| quote(v)).collect::<Vec<_>>().join(", ")),
        };
        q.filters.push((base.clone(), sel.attribute.clone(), rhs));
    }
    for (a, v) in &plan.qualifiers {
        q.filters.push((base.clone(), a.clone(), format!("= {}", quote(v))));
    }

    let partial = |q: &Query| {
        let p = Query {
            tables: q.tables[..1].to_vec(),
            select: vec![(base.clone(), entry.key_attribute.clone())],
            joins: Vec::new(),
            filters: q.filters.clone(),
        };
        p.render()
    };

    if let Some(rel) = &plan.relation {
        return Err(not_renderable(
            format!("relation {rel} is verified by tools"),
            Some(partial(&q)),
        ));
    }
    if !plan.condition_goals.is_empty() {
        return Err(not_renderable("the condition is established by derivation", Some(partial(&q))));
    }
    if plan.request_goals.is_empty() && plan.output_vars.iter().all(|v| v != KEY_VAR) {
        return Err(not_renderable("plan has no request goals", None));
    }

    for var in &plan.output_vars {
        if var == KEY_VAR {
            q.select.push((base.clone(), entry.key_attribute.clone()));
            continue;
        }
        let Some(req) = plan.requests.iter().find(|r| &r.var == var) else {
            return Err(not_renderable(format!("no request binds {var}"), Some(partial(&q))));
        };
        match &req.form {
            RequestForm::Own => q.select.push((base.clone(), req.attribute.clone())),
            RequestForm::Knowledge => {
                return Err(not_renderable(
                    format!("{} of {} is attributed through derivation", req.attribute, req.owner),
                    Some(partial(&q)),
                ))
            }
            RequestForm::Join { hops } => {
                for hop in hops {
                    let ax = q.alias(&hop.table_x);
                    let ay = q.alias(&hop.table_y);
                    let cond = format!("{ax}.{} = {ay}.{}", hop.column_x, hop.column_y);
                    if !q.joins.contains(&cond) {
                        q.joins.push(cond);
                    }
                }
                let owner = kb.entry(&req.owner).map(|e| e.table_name.clone()).unwrap_or_default();
                let alias = q.alias(&owner);
                q.select.push((alias, req.attribute.clone()));
            }
        }
    }
    Ok(q.render())
}
