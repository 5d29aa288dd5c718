//! Line-based KB text format.
//!
//! ```text
//! # comment
//! relation father_of display "father of"
//! symmetric spouse_of
//! inverse parent_of child_of
//! compose parent_of parent_of grandparent_of
//! subtype father_of parent_of
//! incompatible child_of father_of
//! asymmetric parent_of parent_of
//! exclusive wife_of
//! ```
//!
//! Relations may be declared after the rules that use them.

use std::fmt::Write as _;

use super::{KbError, RelId, RelationType, Rule, RuleKb, RuleKind, RuleOrigin};

fn tokenize(line: &str) -> Result<Vec<String>, String> {
    let mut tokens = Vec::new();
    let mut chars = line.chars().peekable();
    loop {
        while chars.peek().is_some_and(|c| c.is_whitespace()) {
            chars.next();
        }
        match chars.peek() {
            None | Some('#') => break,
            Some('"') => {
                chars.next();
                let mut s = String::new();
                loop {
                    match chars.next() {
                        None => return Err("unterminated string".into()),
                        Some('"') => break,
                        Some('\\') => match chars.next() {
                            Some(c @ ('"' | '\\')) => s.push(c),
                            Some('n') => s.push('\n'),
                            other => return Err(format!("bad escape \\{}", other.unwrap_or(' '))),
                        },
                        Some(c) => s.push(c),
                    }
                }
                tokens.push(s);
            }
            Some(_) => {
                let mut s = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_whitespace() || c == '#' {
                        break;
                    }
                    s.push(c);
                    chars.next();
                }
                tokens.push(s);
            }
        }
    }
    Ok(tokens)
}

fn rel(token: &str) -> Result<RelId, String> {
    RelId::new(token).map_err(|e| e.to_string())
}

fn expect_args<'a>(keyword: &str, args: &'a [String], n: usize) -> Result<&'a [String], String> {
    if args.len() == n {
        Ok(args)
    } else {
        Err(format!(
            "`{keyword}` takes {n} relation id(s), got {}",
            args.len()
        ))
    }
}

fn rule_from_tokens(tokens: &[String]) -> Result<RuleKind, String> {
    let (keyword, args) = tokens.split_first().ok_or("empty directive")?;
    let kind = match keyword.as_str() {
        "symmetric" => {
            let a = expect_args(keyword, args, 1)?;
            RuleKind::symmetry(rel(&a[0])?)
        }
        "inverse" => {
            let a = expect_args(keyword, args, 2)?;
            RuleKind::inversion(rel(&a[0])?, rel(&a[1])?)
        }
        "compose" => {
            let a = expect_args(keyword, args, 3)?;
            RuleKind::composition(rel(&a[0])?, rel(&a[1])?, rel(&a[2])?)
        }
        "subtype" => {
            let a = expect_args(keyword, args, 2)?;
            RuleKind::hierarchy(rel(&a[0])?, rel(&a[1])?)
        }
        "incompatible" => {
            let a = expect_args(keyword, args, 2)?;
            RuleKind::incompatible(rel(&a[0])?, rel(&a[1])?)
        }
        "asymmetric" => {
            let a = expect_args(keyword, args, 2)?;
            RuleKind::asymmetric(rel(&a[0])?, rel(&a[1])?)
        }
        "exclusive" => {
            let a = expect_args(keyword, args, 1)?;
            RuleKind::exclusive(rel(&a[0])?)
        }
        other => return Err(format!("unknown directive `{other}`")),
    };
    Ok(kind)
}

pub(super) fn parse_rule_directive(s: &str) -> Result<RuleKind, String> {
    rule_from_tokens(&tokenize(s)?)
}

fn relation_from_tokens(args: &[String]) -> Result<RelationType, String> {
    let (id, mut rest) = args.split_first().ok_or("`relation` needs an id")?;
    let mut relation = RelationType::new(rel(id)?);
    while let Some((key, tail)) = rest.split_first() {
        let (value, tail) = tail
            .split_first()
            .ok_or_else(|| format!("`{key}` needs a quoted value"))?;
        match key.as_str() {
            "display" => relation.display = value.clone(),
            "notes" => relation.notes = value.clone(),
            other => return Err(format!("unknown relation attribute `{other}`")),
        }
        rest = tail;
    }
    Ok(relation)
}

/// Parses a KB document. Errors carry the 1-based line number.
pub fn load_kb(source: &str) -> Result<RuleKb, KbError> {
    let mut kb = RuleKb::empty();
    let mut rule_lines = Vec::new();
    for (idx, line) in source.lines().enumerate() {
        let line_no = idx + 1;
        let tokens = tokenize(line).map_err(|message| KbError::Parse {
            line: line_no,
            message,
        })?;
        if tokens.is_empty() {
            continue;
        }
        if tokens[0] == "relation" {
            let relation =
                relation_from_tokens(&tokens[1..]).map_err(|message| KbError::Parse {
                    line: line_no,
                    message,
                })?;
            kb.insert_relation(relation).map_err(|e| KbError::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
        } else {
            let kind = rule_from_tokens(&tokens).map_err(|message| KbError::Parse {
                line: line_no,
                message,
            })?;
            rule_lines.push((line_no, kind));
        }
    }
    for (line_no, kind) in rule_lines {
        kb.insert_rule(Rule {
            kind,
            origin: RuleOrigin::User,
        })
        .map_err(|e| match e {
            KbError::UnknownRelation(_) | KbError::DuplicateRule(_) => KbError::Parse {
                line: line_no,
                message: e.to_string(),
            },
            other => other,
        })?;
    }
    Ok(kb)
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Serializes relations (by id) then rules (by kind), one directive per line.
pub fn save_kb(kb: &RuleKb) -> String {
    let mut out = String::new();
    for r in kb.relations() {
        let _ = write!(out, "relation {}", r.id);
        if r.display != r.id.as_str().replace('_', " ") {
            let _ = write!(out, " display {}", quote(&r.display));
        }
        if !r.notes.is_empty() {
            let _ = write!(out, " notes {}", quote(&r.notes));
        }
        out.push('\n');
    }
    for kind in kb.rule_kinds() {
        let _ = writeln!(out, "{kind}");
    }
    out
}
