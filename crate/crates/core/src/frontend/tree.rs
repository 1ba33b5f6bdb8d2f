use serde::{Deserialize, Serialize};

use super::FrontendError;

/// A constituency tree. Inner nodes have children; leaves carry a token.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParseTree {
    pub label: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<ParseTree>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leaf_text: Option<String>,
}

impl ParseTree {
    pub fn leaf(label: &str, text: &str) -> Self {
        ParseTree {
            label: label.to_string(),
            children: Vec::new(),
            leaf_text: Some(text.to_string()),
        }
    }

    pub fn node(label: &str, children: Vec<ParseTree>) -> Self {
        ParseTree {
            label: label.to_string(),
            children,
            leaf_text: None,
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.leaf_text.is_some()
    }

    /// Leaf tokens left to right.
    pub fn tokens(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_tokens(&mut out);
        out
    }

    fn collect_tokens(&self, out: &mut Vec<String>) {
        match &self.leaf_text {
            Some(t) => out.extend(t.split_whitespace().map(str::to_string)),
            None => self.children.iter().for_each(|c| c.collect_tokens(out)),
        }
    }

    pub fn text(&self) -> String {
        self.tokens().join(" ")
    }

    pub fn first_token(&self) -> Option<String> {
        self.tokens().into_iter().next()
    }

    pub fn child(&self, label: &str) -> Option<&ParseTree> {
        self.children.iter().find(|c| c.label == label)
    }

    /// Parenthesized notation: `(S (VP (VB Find) (NP ...)))`.
    pub fn to_bracketed(&self) -> String {
        match &self.leaf_text {
            Some(t) => format!("({} {})", self.label, t),
            None => {
                let inner: Vec<String> = self.children.iter().map(ParseTree::to_bracketed).collect();
                if self.label.is_empty() {
                    format!("({})", inner.join(" "))
                } else {
                    format!("({} {})", self.label, inner.join(" "))
                }
            }
        }
    }

    /// Reads one tree in parenthesized notation.
    pub fn parse_bracketed(text: &str) -> Result<ParseTree, FrontendError> {
        let tokens = lex(text);
        let mut pos = 0;
        let tree = parse_node(&tokens, &mut pos)?;
        if pos != tokens.len() {
            return Err(FrontendError::UnparsableSentence("trailing text after tree".into()));
        }
        Ok(tree)
    }
}

impl std::fmt::Display for ParseTree {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.to_bracketed())
    }
}

#[derive(Debug, PartialEq)]
enum Tok {
    Open,
    Close,
    Word(String),
}

fn lex(text: &str) -> Vec<Tok> {
    let mut out = Vec::new();
    let mut word = String::new();
    for c in text.chars() {
        if c == '(' || c == ')' || c.is_whitespace() {
            if !word.is_empty() {
                out.push(Tok::Word(std::mem::take(&mut word)));
            }
            match c {
                '(' => out.push(Tok::Open),
                ')' => out.push(Tok::Close),
                _ => {}
            }
        } else {
            word.push(c);
        }
    }
    if !word.is_empty() {
        out.push(Tok::Word(word));
    }
    out
}

fn parse_node(tokens: &[Tok], pos: &mut usize) -> Result<ParseTree, FrontendError> {
    let bad = |msg: &str| FrontendError::UnparsableSentence(msg.to_string());
    if tokens.get(*pos) != Some(&Tok::Open) {
        return Err(bad("expected `(`"));
    }
    *pos += 1;
    let label = match tokens.get(*pos) {
        Some(Tok::Word(w)) => {
            *pos += 1;
            w.clone()
        }
        Some(Tok::Open) => String::new(),
        _ => return Err(bad("expected a label")),
    };
    let mut children = Vec::new();
    let mut words = Vec::new();
    loop {
        match tokens.get(*pos) {
            Some(Tok::Close) => {
                *pos += 1;
                break;
            }
            Some(Tok::Open) => children.push(parse_node(tokens, pos)?),
            Some(Tok::Word(w)) => {
                words.push(w.clone());
                *pos += 1;
            }
            None => return Err(bad("unbalanced parentheses")),
        }
    }
    match (children.is_empty(), words.is_empty()) {
        (true, false) => Ok(ParseTree {
            label,
            children,
            leaf_text: Some(words.join(" ")),
        }),
        (false, true) => Ok(ParseTree {
            label,
            children,
            leaf_text: None,
        }),
        (true, true) => Err(bad("empty constituent")),
        (false, false) => Err(bad("constituent mixes tokens and subtrees")),
    }
}
