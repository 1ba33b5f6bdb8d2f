//! Textual res-goal syntax: `res(Concept, Pk, 'Attr', Val), ...`.
//!
//! Quoted tokens and bare tokens starting with a lower-case letter or digit
//! are constants; bare tokens starting with an upper-case letter or `_` are
//! variables. A lone `_` is a fresh anonymous variable. The concept position
//! is always a constant.

use serde::{Deserialize, Serialize};

use super::ReasonerError;
use crate::knowledge::KnowledgeBase;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Term {
    Var(String),
    Const(String),
}

impl Term {
    pub fn var(name: &str) -> Self {
        Term::Var(name.to_string())
    }

    pub fn constant(value: &str) -> Self {
        Term::Const(value.to_string())
    }

    pub fn as_const(&self) -> Option<&str> {
        match self {
            Term::Const(c) => Some(c),
            Term::Var(_) => None,
        }
    }
}

impl std::fmt::Display for Term {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Term::Var(v) => write!(f, "{v}"),
            Term::Const(c) => write!(f, "'{}'", c.replace('\'', "\\'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GoalAtom {
    pub concept: String,
    pub primary_key: Term,
    pub attribute: Term,
    pub value: Term,
}

impl GoalAtom {
    pub fn new(concept: &str, primary_key: Term, attribute: Term, value: Term) -> Self {
        GoalAtom {
            concept: concept.to_string(),
            primary_key,
            attribute,
            value,
        }
    }
}

impl std::fmt::Display for GoalAtom {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "res('{}', {}, {}, {})",
            self.concept, self.primary_key, self.attribute, self.value
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Token {
    Word(String),
    Quoted(String),
    Open,
    Close,
    Comma,
}

fn tokenize(text: &str) -> Result<Vec<Token>, ReasonerError> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        match c {
            c if c.is_whitespace() => {
                chars.next();
            }
            '(' => {
                chars.next();
                out.push(Token::Open);
            }
            ')' => {
                chars.next();
                out.push(Token::Close);
            }
            ',' => {
                chars.next();
                out.push(Token::Comma);
            }
            '.' if out.last() == Some(&Token::Close) => {
                chars.next();
            }
            '\'' | '"' => {
                let quote = c;
                chars.next();
                let mut s = String::new();
                loop {
                    match chars.next() {
                        Some('\\') => match chars.next() {
                            Some(n) => s.push(n),
                            None => return Err(ReasonerError::GoalSyntax("dangling escape".into())),
                        },
                        Some(n) if n == quote => break,
                        Some(n) => s.push(n),
                        None => return Err(ReasonerError::GoalSyntax("unterminated quote".into())),
                    }
                }
                out.push(Token::Quoted(s));
            }
            _ => {
                let mut s = String::new();
                while let Some(&n) = chars.peek() {
                    if n.is_whitespace() || matches!(n, '(' | ')' | ',' | '\'' | '"') {
                        break;
                    }
                    s.push(n);
                    chars.next();
                }
                out.push(Token::Word(s));
            }
        }
    }
    Ok(out)
}

pub fn parse_goals(text: &str) -> Result<Vec<GoalAtom>, ReasonerError> {
    let text = text.trim().trim_start_matches("?-").trim_start_matches('?');
    let tokens = tokenize(text)?;
    let mut pos = 0;
    let mut anon = 0;
    let mut goals = Vec::new();
    let err = |msg: String| ReasonerError::GoalSyntax(msg);
    loop {
        match tokens.get(pos) {
            Some(Token::Word(w)) if w == "res" => pos += 1,
            other => return Err(err(format!("expected `res`, found {other:?}"))),
        }
        if tokens.get(pos) != Some(&Token::Open) {
            return Err(err("expected `(` after res".into()));
        }
        pos += 1;
        let mut args = Vec::new();
        loop {
            let tok = tokens.get(pos).ok_or_else(|| err("unexpected end of goal".into()))?;
            let term = match tok {
                Token::Quoted(q) => Term::Const(q.clone()),
                Token::Word(w) if w == "_" => {
                    anon += 1;
                    Term::Var(format!("_{anon}"))
                }
                Token::Word(w) if w.starts_with(|c: char| c.is_uppercase() || c == '_') => Term::Var(w.clone()),
                Token::Word(w) => Term::Const(w.clone()),
                other => return Err(err(format!("expected a term, found {other:?}"))),
            };
            args.push((tok.clone(), term));
            pos += 1;
            match tokens.get(pos) {
                Some(Token::Comma) => pos += 1,
                Some(Token::Close) => {
                    pos += 1;
                    break;
                }
                other => return Err(err(format!("expected `,` or `)`, found {other:?}"))),
            }
        }
        if args.len() != 4 {
            return Err(err(format!("res takes 4 arguments, got {}", args.len())));
        }
        let concept = match &args[0].0 {
            Token::Quoted(q) | Token::Word(q) => q.clone(),
            _ => unreachable!(),
        };
        let mut rest = args.into_iter().skip(1).map(|(_, t)| t);
        goals.push(GoalAtom {
            concept,
            primary_key: rest.next().unwrap(),
            attribute: rest.next().unwrap(),
            value: rest.next().unwrap(),
        });
        match tokens.get(pos) {
            None => break,
            Some(Token::Comma) => pos += 1,
            other => return Err(err(format!("expected `,` between goals, found {other:?}"))),
        }
    }
    Ok(goals)
}

/// Checks that constant concepts and attributes exist in the knowledge base.
pub fn validate(goals: &[GoalAtom], kb: &KnowledgeBase) -> Result<(), ReasonerError> {
    for g in goals {
        let Some(entry) = kb.entry(&g.concept) else {
            return Err(ReasonerError::UnknownConceptInGoal(g.concept.clone()));
        };
        if let Term::Const(a) = &g.attribute {
            if !entry.has_attribute(a) && !kb.has_attribute_anywhere(a) {
                return Err(ReasonerError::UnknownAttributeInGoal(a.clone()));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_goal() {
        let goals = parse_goals("? res('Gene', Pk, 'GeneName', 'repA1'), res('Gene', Pk, 'Function', Val).").unwrap();
        assert_eq!(goals.len(), 2);
        assert_eq!(goals[0].concept, "Gene");
        assert_eq!(goals[0].primary_key, Term::var("Pk"));
        assert_eq!(goals[0].value, Term::constant("repA1"));
        assert_eq!(goals[1].value, Term::var("Val"));
    }

    #[test]
    fn bare_constants_and_anonymous() {
        let goals = parse_goals("res(Gene, _, GeneName, repA1), res(Gene, _, GeneID, 1246500)").unwrap();
        assert_eq!(goals[0].attribute, Term::var("GeneName"));
        assert_eq!(goals[0].value, Term::constant("repA1"));
        assert_ne!(goals[0].primary_key, goals[1].primary_key);
        assert_eq!(goals[1].value, Term::constant("1246500"));
    }

    #[test]
    fn display_round_trips() {
        let text = "res('Gene', Pk, 'GeneName', 'it\\'s')";
        let goals = parse_goals(text).unwrap();
        assert_eq!(goals[0].to_string(), text);
        assert_eq!(parse_goals(&goals[0].to_string()).unwrap(), goals);
    }

    #[test]
    fn syntax_errors() {
        for bad in ["", "res(Gene, Pk)", "foo(a,b,c,d)", "res('Gene', Pk, 'A', 'v'", "res('Gene', Pk, 'A', 'v') res('Gene', Pk, 'A', 'v')"] {
            assert!(matches!(parse_goals(bad), Err(ReasonerError::GoalSyntax(_))), "{bad}");
        }
    }
}
