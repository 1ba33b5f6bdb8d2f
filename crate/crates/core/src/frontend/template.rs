use serde::{Deserialize, Serialize};

use super::tree::ParseTree;
use super::FrontendError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TemplateVariant {
    Iterative,
    Conditional,
    Imperative,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "variant")]
pub enum QueryTemplate {
    Iterative {
        range_np: ParseTree,
        action_vp: ParseTree,
    },
    Conditional {
        cond_np: ParseTree,
        cond_vp: ParseTree,
        action_vp: ParseTree,
    },
    Imperative {
        verb: String,
        object_np: ParseTree,
    },
}

impl QueryTemplate {
    pub fn variant(&self) -> TemplateVariant {
        match self {
            QueryTemplate::Iterative { .. } => TemplateVariant::Iterative,
            QueryTemplate::Conditional { .. } => TemplateVariant::Conditional,
            QueryTemplate::Imperative { .. } => TemplateVariant::Imperative,
        }
    }
}

fn is_verb_label(label: &str) -> bool {
    label.starts_with("VB") || label == "WP" || label == "WDT"
}

/// `(verb, object NP)` of a verb-object VP.
pub(crate) fn verb_object(vp: &ParseTree) -> Option<(String, &ParseTree)> {
    if vp.label != "VP" {
        return None;
    }
    let first = vp.children.first()?;
    if !is_verb_label(&first.label) || !first.is_leaf() {
        return None;
    }
    let np = vp.children.iter().skip(1).find(|c| c.label == "NP")?;
    Some((first.text(), np))
}

fn unwrap_root(tree: &ParseTree) -> &ParseTree {
    let mut t = tree;
    while (t.label.is_empty() || t.label == "ROOT") && t.children.len() == 1 {
        t = &t.children[0];
    }
    t
}

fn conditional(s: &ParseTree) -> Option<QueryTemplate> {
    let sbar = s.children.iter().find(|c| c.label == "SBAR")?;
    let marker = sbar.children.first()?;
    if !marker.first_token()?.eq_ignore_ascii_case("if") {
        return None;
    }
    let clause = sbar.children.iter().find(|c| c.label == "S'" || c.label == "S")?;
    let cond_np = clause.child("NP")?;
    let cond_vp = clause.child("VP")?;
    let action_vp = s.children.iter().rev().find(|c| c.label == "VP")?;
    verb_object(action_vp)?;
    Some(QueryTemplate::Conditional {
        cond_np: cond_np.clone(),
        cond_vp: cond_vp.clone(),
        action_vp: action_vp.clone(),
    })
}

fn iterative(s: &ParseTree) -> Option<QueryTemplate> {
    let pp = s.children.first().filter(|c| c.label == "PP")?;
    let marker = pp.first_token()?.to_lowercase();
    if marker != "for" {
        return None;
    }
    let range_np = pp
        .child("NP")
        .or_else(|| s.children.iter().skip(1).find(|c| c.label == "NP"))?;
    let quantifier = range_np.first_token()?.to_lowercase();
    if !matches!(quantifier.as_str(), "all" | "each" | "every") {
        return None;
    }
    let action_vp = s.children.iter().skip(1).find(|c| c.label == "VP")?;
    verb_object(action_vp)?;
    Some(QueryTemplate::Iterative {
        range_np: range_np.clone(),
        action_vp: action_vp.clone(),
    })
}

fn imperative(s: &ParseTree) -> Option<QueryTemplate> {
    let vp = if s.label == "VP" {
        s
    } else {
        s.children.iter().find(|c| c.label == "VP")?
    };
    let (verb, np) = verb_object(vp)?;
    Some(QueryTemplate::Imperative {
        verb,
        object_np: np.clone(),
    })
}

/// Matches a tree against the templates in precedence order
/// Conditional, Iterative, Imperative.
pub fn classify(tree: &ParseTree) -> Result<QueryTemplate, FrontendError> {
    let s = unwrap_root(tree);
    conditional(s)
        .or_else(|| iterative(s))
        .or_else(|| imperative(s))
        .ok_or(FrontendError::NoTemplateMatch)
}

#[cfg(test)]
mod tests {
    use super::super::chunker::chunk;
    use super::*;

    #[test]
    fn iterative_parts() {
        let t = classify(&chunk("For all genes of cyanobacteria find homologs").unwrap()).unwrap();
        let QueryTemplate::Iterative { range_np, action_vp } = t else {
            panic!("expected iterative")
        };
        assert_eq!(range_np.text(), "all genes of cyanobacteria");
        assert_eq!(action_vp.text(), "find homologs");
    }

    #[test]
    fn conditional_parts() {
        let t = classify(&chunk("If gene UQCC is protein coding, then find its protein").unwrap()).unwrap();
        let QueryTemplate::Conditional { cond_np, cond_vp, action_vp } = t else {
            panic!("expected conditional")
        };
        assert_eq!(cond_np.text(), "gene UQCC");
        assert_eq!(cond_vp.text(), "is protein coding");
        assert_eq!(action_vp.text(), "find its protein");
    }

    #[test]
    fn imperative_parts() {
        let t = classify(&chunk("Find the function of gene repA1").unwrap()).unwrap();
        assert_eq!(
            t,
            QueryTemplate::Imperative {
                verb: "Find".into(),
                object_np: chunk("Find the function of gene repA1").unwrap().children[0].children[1].clone(),
            }
        );
    }

    #[test]
    fn stanford_style_trees() {
        let tree = ParseTree::parse_bracketed(
            "(ROOT (S (PP (IN For) (NP (DT all) (NNS genes))) (VP (VB find) (NP (NNS homologs)))))",
        )
        .unwrap();
        assert_eq!(classify(&tree).unwrap().variant(), TemplateVariant::Iterative);
        let np_only = ParseTree::parse_bracketed("(NP (NN gene))").unwrap();
        assert_eq!(classify(&np_only), Err(FrontendError::NoTemplateMatch));
    }
}
