//! Rule-based chunker recognizing the closed marker sets of the three
//! sentence templates. Anything it cannot shape must arrive as a bracketed tree.

use super::tree::ParseTree;
use super::FrontendError;

pub const ACTION_VERBS: [&str; 7] = ["find", "list", "show", "get", "retrieve", "what", "which"];
const COPULAS: [&str; 8] = ["is", "are", "was", "were", "has", "have", "does", "do"];
pub const DETERMINERS: [&str; 8] = ["the", "a", "an", "all", "each", "every", "some", "any"];
pub const PRONOUNS: [&str; 2] = ["its", "their"];

fn is_verb(t: &str) -> bool {
    ACTION_VERBS.contains(&t.to_lowercase().as_str())
}

fn is_copula(t: &str) -> bool {
    COPULAS.contains(&t.to_lowercase().as_str())
}

/// Splits a sentence into tokens: trailing punctuation dropped, commas kept
/// as their own tokens, parentheses removed.
pub fn tokenize(sentence: &str) -> Vec<String> {
    let cleaned: String = sentence.chars().filter(|c| !matches!(c, '(' | ')')).collect();
    let trimmed = cleaned.trim().trim_end_matches(['.', '?', '!']).trim();
    let mut out = Vec::new();
    for word in trimmed.split_whitespace() {
        let (body, comma) = match word.strip_suffix(',') {
            Some(b) => (b, true),
            None => (word, false),
        };
        if !body.is_empty() {
            out.push(body.to_string());
        }
        if comma {
            out.push(",".to_string());
        }
    }
    out
}

fn tag(word: &str) -> &'static str {
    let lower = word.to_lowercase();
    if DETERMINERS.contains(&lower.as_str()) {
        "DT"
    } else if PRONOUNS.contains(&lower.as_str()) {
        "PRP$"
    } else if lower == "and" || lower == "or" {
        "CC"
    } else if lower == "of" {
        "IN"
    } else if word == "," {
        ","
    } else if word.chars().all(|c| c.is_ascii_digit()) {
        "CD"
    } else {
        "NN"
    }
}

/// Noun phrase; `X of Y` becomes `(NP (NP X) (PP (IN of) (NP Y)))`.
pub fn noun_phrase(tokens: &[String]) -> ParseTree {
    let of = tokens
        .iter()
        .enumerate()
        .position(|(i, t)| i > 0 && i + 1 < tokens.len() && t.eq_ignore_ascii_case("of"));
    match of {
        Some(i) => ParseTree::node(
            "NP",
            vec![
                noun_phrase(&tokens[..i]),
                ParseTree::node("PP", vec![ParseTree::leaf("IN", &tokens[i]), noun_phrase(&tokens[i + 1..])]),
            ],
        ),
        None => ParseTree::node("NP", tokens.iter().map(|t| ParseTree::leaf(tag(t), t)).collect()),
    }
}

fn verb_phrase(tokens: &[String]) -> Result<ParseTree, FrontendError> {
    let Some((verb, rest)) = tokens.split_first() else {
        return Err(FrontendError::UnparsableSentence("missing action".into()));
    };
    if !is_verb(verb) {
        return Err(FrontendError::UnparsableSentence(format!("`{verb}` is not an action verb")));
    }
    let mut children = vec![ParseTree::leaf("VB", verb)];
    let mut rest = rest;
    if let Some((cop, after)) = rest.split_first() {
        if is_copula(cop) {
            children.push(ParseTree::leaf("VBP", cop));
            rest = after;
        }
    }
    let rest: Vec<String> = rest.iter().filter(|t| *t != ",").cloned().collect();
    if rest.is_empty() {
        return Err(FrontendError::UnparsableSentence(format!("`{verb}` has no object")));
    }
    children.push(noun_phrase(&rest));
    Ok(ParseTree::node("VP", children))
}

fn trim_commas(tokens: &[String]) -> &[String] {
    let start = tokens.iter().position(|t| t != ",").unwrap_or(tokens.len());
    let end = tokens.iter().rposition(|t| t != ",").map_or(start, |i| i + 1);
    &tokens[start..end.max(start)]
}

fn conditional(tokens: &[String]) -> Result<ParseTree, FrontendError> {
    let body = &tokens[1..];
    let split = body
        .iter()
        .position(|t| t.eq_ignore_ascii_case("then"))
        .map(|i| (i, i + 1, true))
        .or_else(|| body.iter().position(|t| t == ",").map(|i| (i, i + 1, false)))
        .ok_or_else(|| FrontendError::UnparsableSentence("`if` without `then`".into()))?;
    let cond = trim_commas(&body[..split.0]);
    let action = trim_commas(&body[split.1..]);
    let cop = cond
        .iter()
        .position(|t| is_copula(t))
        .filter(|&i| i > 0 && i + 1 < cond.len())
        .ok_or_else(|| FrontendError::UnparsableSentence("condition lacks a subject and predicate".into()))?;
    let predicate = &cond[cop + 1..];
    let cond_vp = ParseTree::node(
        "VP",
        vec![
            ParseTree::leaf("VBZ", &cond[cop]),
            ParseTree::node("ADJP", predicate.iter().map(|t| ParseTree::leaf("JJ", t)).collect()),
        ],
    );
    let mut children = vec![ParseTree::node(
        "SBAR",
        vec![
            ParseTree::leaf("IN", &tokens[0]),
            ParseTree::node("S'", vec![noun_phrase(&cond[..cop]), cond_vp]),
        ],
    )];
    if split.2 {
        children.push(ParseTree::leaf("RB", &body[split.0]));
    }
    children.push(verb_phrase(action)?);
    Ok(ParseTree::node("S", children))
}

fn iterative(tokens: &[String]) -> Result<ParseTree, FrontendError> {
    let verb = tokens
        .iter()
        .enumerate()
        .skip(2)
        .find(|(_, t)| is_verb(t))
        .map(|(i, _)| i)
        .ok_or_else(|| FrontendError::UnparsableSentence("iteration without an action".into()))?;
    let range = trim_commas(&tokens[1..verb]);
    Ok(ParseTree::node(
        "S",
        vec![
            ParseTree::node("PP", vec![ParseTree::leaf("IN", &tokens[0])]),
            noun_phrase(range),
            verb_phrase(&tokens[verb..])?,
        ],
    ))
}

pub fn chunk(sentence: &str) -> Result<ParseTree, FrontendError> {
    let tokens = tokenize(sentence);
    let Some(first) = tokens.first() else {
        return Err(FrontendError::UnparsableSentence("empty sentence".into()));
    };
    let first = first.to_lowercase();
    let second = tokens.get(1).map(|t| t.to_lowercase()).unwrap_or_default();
    if first == "if" {
        conditional(&tokens)
    } else if first == "for" && matches!(second.as_str(), "all" | "each" | "every") {
        iterative(&tokens)
    } else if is_verb(&first) {
        Ok(ParseTree::node("S", vec![verb_phrase(&tokens)?]))
    } else {
        Err(FrontendError::UnparsableSentence(format!(
            "no template starts with `{}`",
            tokens[0]
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn list_genes() {
        let t = chunk("List all genes of cyanobacteria").unwrap();
        assert_eq!(
            t.to_bracketed(),
            "(S (VP (VB List) (NP (NP (DT all) (NN genes)) (PP (IN of) (NP (NN cyanobacteria))))))"
        );
    }

    #[test]
    fn conditional_shape() {
        let t = chunk("If gene UQCC is protein coding, then find its protein").unwrap();
        assert_eq!(
            t.to_bracketed(),
            "(S (SBAR (IN If) (S' (NP (NN gene) (NN UQCC)) (VP (VBZ is) (ADJP (JJ protein) (JJ coding))))) (RB then) (VP (VB find) (NP (PRP$ its) (NN protein))))"
        );
    }

    #[test]
    fn punctuation_and_parens() {
        assert_eq!(tokenize("Find X (known also as MED4)."), vec!["Find", "X", "known", "also", "as", "MED4"]);
        assert_eq!(tokenize("a, b and c?"), vec!["a", ",", "b", "and", "c"]);
    }

    #[test]
    fn rejects_unknown_shapes() {
        assert!(chunk("").is_err());
        assert!(chunk("genes are nice").is_err());
        assert!(chunk("Find").is_err());
        assert!(chunk("If gene X is coding").is_err());
    }
}
