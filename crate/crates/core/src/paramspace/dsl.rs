//! Line-oriented text format for parameter spaces.
//!
//! ```text
//! # comment
//! NAME integer [LO, HI] [DEFAULT]
//! NAME real [LO, HI] [DEFAULT] log
//! NAME {V1, V2, ...} [DEFAULT]
//! CHILD | PARENT in {V1, V2, ...}
//! {NAME1=V1, NAME2=V2, ...}
//! ```

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use super::space::{Condition, ForbiddenClause, Parameter, ParameterSpace, SpaceError};
use super::value::{Domain, Value};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, column {column}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error(transparent)]
    Space(#[from] SpaceError),
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Comma,
    Pipe,
    Eq,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Word(w) => format!("`{w}`"),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Pipe => "`|`".into(),
            Tok::Eq => "`=`".into(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Pos {
    line: usize,
    column: usize,
}

impl Pos {
    fn err(self, kind: impl Into<ParseErrorKind>) -> ParseError {
        ParseError {
            line: self.line,
            column: self.column,
            kind: kind.into(),
        }
    }

    fn syntax(self, msg: impl Into<String>) -> ParseError {
        self.err(ParseErrorKind::Syntax(msg.into()))
    }
}

fn tokenize(line: &str, lineno: usize) -> Vec<(Tok, Pos)> {
    let mut toks = Vec::new();
    let mut chars = line.chars().enumerate().peekable();
    while let Some((i, c)) = chars.next() {
        let pos = Pos { line: lineno, column: i + 1 };
        let tok = match c {
            '#' => break,
            c if c.is_whitespace() => continue,
            '{' => Tok::LBrace,
            '}' => Tok::RBrace,
            '[' => Tok::LBracket,
            ']' => Tok::RBracket,
            ',' => Tok::Comma,
            '|' => Tok::Pipe,
            '=' => Tok::Eq,
            c => {
                let mut word = String::from(c);
                while let Some(&(_, n)) = chars.peek() {
                    if n.is_whitespace() || "{}[],|=#".contains(n) {
                        break;
                    }
                    word.push(n);
                    chars.next();
                }
                Tok::Word(word)
            }
        };
        toks.push((tok, pos));
    }
    toks
}

struct Cursor<'a> {
    toks: &'a [(Tok, Pos)],
    at: usize,
    end: Pos,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<&'a Tok> {
        self.toks.get(self.at).map(|(t, _)| t)
    }

    fn pos(&self) -> Pos {
        self.toks.get(self.at).map(|(_, p)| *p).unwrap_or(self.end)
    }

    fn next(&mut self) -> Option<(&'a Tok, Pos)> {
        let t = self.toks.get(self.at)?;
        self.at += 1;
        Some((&t.0, t.1))
    }

    fn expect(&mut self, want: Tok) -> Result<Pos, ParseError> {
        let pos = self.pos();
        match self.next() {
            Some((t, p)) if *t == want => Ok(p),
            Some((t, p)) => Err(p.syntax(format!("expected {}, found {}", want.describe(), t.describe()))),
            None => Err(pos.syntax(format!("expected {}, found end of line", want.describe()))),
        }
    }

    fn word(&mut self) -> Result<(&'a str, Pos), ParseError> {
        let pos = self.pos();
        match self.next() {
            Some((Tok::Word(w), p)) => Ok((w.as_str(), p)),
            Some((t, p)) => Err(p.syntax(format!("expected a word, found {}", t.describe()))),
            None => Err(pos.syntax("expected a word, found end of line")),
        }
    }

    fn name(&mut self) -> Result<(&'a str, Pos), ParseError> {
        let (w, p) = self.word()?;
        if !is_identifier(w) {
            return Err(p.syntax(format!("`{w}` is not a valid parameter name")));
        }
        Ok((w, p))
    }

    /// `{ w, w, ... }`
    fn word_set(&mut self) -> Result<Vec<(&'a str, Pos)>, ParseError> {
        self.expect(Tok::LBrace)?;
        let mut out = vec![self.word()?];
        loop {
            match self.next() {
                Some((Tok::Comma, _)) => out.push(self.word()?),
                Some((Tok::RBrace, _)) => return Ok(out),
                Some((t, p)) => return Err(p.syntax(format!("expected `,` or `}}`, found {}", t.describe()))),
                None => return Err(self.end.syntax("unterminated `{`")),
            }
        }
    }

    /// `[ w ]` or `[ w, w ]`
    fn bracket(&mut self, n: usize) -> Result<Vec<(&'a str, Pos)>, ParseError> {
        self.expect(Tok::LBracket)?;
        let mut out = vec![self.word()?];
        for _ in 1..n {
            self.expect(Tok::Comma)?;
            out.push(self.word()?);
        }
        self.expect(Tok::RBracket)?;
        Ok(out)
    }

    fn finish(&mut self) -> Result<(), ParseError> {
        match self.next() {
            None => Ok(()),
            Some((t, p)) => Err(p.syntax(format!("unexpected {}", t.describe()))),
        }
    }
}

fn is_identifier(w: &str) -> bool {
    let mut chars = w.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || "_-.".contains(c))
}

struct RawCondition<'a> {
    child: (&'a str, Pos),
    parent: (&'a str, Pos),
    values: Vec<(&'a str, Pos)>,
}

type RawClause<'a> = (Pos, Vec<((&'a str, Pos), (&'a str, Pos))>);

/// Parse a space document.
pub fn parse_space(text: &str) -> Result<ParameterSpace, ParseError> {
    let raw_lines: Vec<&str> = text.lines().collect();
    let lines: Vec<Vec<(Tok, Pos)>> = raw_lines
        .iter()
        .enumerate()
        .map(|(i, l)| tokenize(l, i + 1))
        .collect();

    let mut params = Vec::new();
    let mut decl_pos: HashMap<String, Pos> = HashMap::new();
    let mut raw_conditions = Vec::new();
    let mut raw_clauses: Vec<RawClause> = Vec::new();

    for (i, toks) in lines.iter().enumerate() {
        if toks.is_empty() {
            continue;
        }
        let end = Pos {
            line: i + 1,
            column: raw_lines[i].chars().count() + 1,
        };
        let mut cur = Cursor { toks, at: 0, end };
        if cur.peek() == Some(&Tok::LBrace) {
            let start = cur.pos();
            cur.next();
            let mut pairs = Vec::new();
            loop {
                let name = cur.name()?;
                cur.expect(Tok::Eq)?;
                let value = cur.word()?;
                pairs.push((name, value));
                match cur.next() {
                    Some((Tok::Comma, _)) => continue,
                    Some((Tok::RBrace, _)) => break,
                    Some((t, p)) => return Err(p.syntax(format!("expected `,` or `}}`, found {}", t.describe()))),
                    None => return Err(end.syntax("unterminated forbidden clause")),
                }
            }
            cur.finish()?;
            raw_clauses.push((start, pairs));
        } else if toks.get(1).map(|t| &t.0) == Some(&Tok::Pipe) {
            let child = cur.name()?;
            cur.expect(Tok::Pipe)?;
            let parent = cur.name()?;
            let (kw, p) = cur.word()?;
            if kw != "in" {
                return Err(p.syntax(format!("expected `in`, found `{kw}`")));
            }
            let values = cur.word_set()?;
            cur.finish()?;
            raw_conditions.push(RawCondition { child, parent, values });
        } else {
            let (name, pos) = cur.name()?;
            let (domain, default) = match cur.peek() {
                Some(Tok::Word(kw)) if kw == "integer" => {
                    cur.next();
                    let b = cur.bracket(2)?;
                    let lo = parse_int(b[0])?;
                    let hi = parse_int(b[1])?;
                    (Domain::Integer { lo, hi }, cur.bracket(1)?[0])
                }
                Some(Tok::Word(kw)) if kw == "real" => {
                    cur.next();
                    let b = cur.bracket(2)?;
                    let lo = parse_real(b[0])?;
                    let hi = parse_real(b[1])?;
                    let default = cur.bracket(1)?[0];
                    let log = match cur.peek() {
                        Some(Tok::Word(w)) if w == "log" => {
                            cur.next();
                            true
                        }
                        _ => false,
                    };
                    (Domain::Real { lo, hi, log }, default)
                }
                Some(Tok::LBrace) => {
                    let vals = cur.word_set()?;
                    let domain = Domain::Categorical(vals.iter().map(|(w, _)| w.to_string()).collect());
                    (domain, cur.bracket(1)?[0])
                }
                Some(t) => {
                    return Err(cur.pos().syntax(format!(
                        "expected `integer`, `real` or `{{`, found {}",
                        t.describe()
                    )))
                }
                None => return Err(end.syntax("declaration has no domain")),
            };
            cur.finish()?;
            let default_value = domain.parse_value(default.0).ok_or_else(|| {
                default.1.err(SpaceError::DefaultOutOfDomain {
                    name: name.to_string(),
                    value: default.0.to_string(),
                })
            })?;
            if decl_pos.insert(name.to_string(), pos).is_some() {
                return Err(pos.err(SpaceError::DuplicateParameter(name.to_string())));
            }
            params.push(Parameter::new(name, domain, default_value));
        }
    }

    let domain_of = |name: &str, pos: Pos| -> Result<&Domain, ParseError> {
        params
            .iter()
            .find(|p| p.name == name)
            .map(|p| &p.domain)
            .ok_or_else(|| pos.err(SpaceError::UnknownParameter(name.to_string())))
    };
    let resolve = |name: &str, (text, pos): (&str, Pos)| -> Result<Value, ParseError> {
        let domain = domain_of(name, pos)?;
        domain
            .parse_value(text)
            .filter(|v| domain.contains(v))
            .ok_or_else(|| {
                pos.err(SpaceError::ValueOutOfDomain {
                    name: name.to_string(),
                    value: text.to_string(),
                })
            })
    };

    let mut conditions = Vec::new();
    let mut cond_pos: HashMap<String, Pos> = HashMap::new();
    for rc in raw_conditions {
        domain_of(rc.child.0, rc.child.1)?;
        domain_of(rc.parent.0, rc.parent.1)?;
        let values = rc
            .values
            .iter()
            .map(|&w| resolve(rc.parent.0, w))
            .collect::<Result<Vec<_>, _>>()?;
        if cond_pos.insert(rc.child.0.to_string(), rc.child.1).is_some() {
            return Err(rc.child.1.err(SpaceError::MultipleConditions(rc.child.0.to_string())));
        }
        conditions.push(Condition {
            child: rc.child.0.to_string(),
            parent: rc.parent.0.to_string(),
            values,
        });
    }

    let mut forbidden = Vec::new();
    let first_clause = raw_clauses.first().map(|c| c.0);
    for (_, pairs) in raw_clauses {
        let assignments = pairs
            .into_iter()
            .map(|((name, npos), value)| {
                domain_of(name, npos)?;
                Ok((name.to_string(), resolve(name, value)?))
            })
            .collect::<Result<Vec<_>, ParseError>>()?;
        forbidden.push(ForbiddenClause::new(assignments));
    }

    ParameterSpace::new(params, conditions, forbidden).map_err(|e| {
        let pos = match &e {
            SpaceError::CyclicConditions(n)
            | SpaceError::SelfCondition(n)
            | SpaceError::MultipleConditions(n)
            | SpaceError::EmptyActivation(n) => cond_pos.get(n).or(decl_pos.get(n)).copied(),
            SpaceError::DefaultForbidden(_) | SpaceError::EmptyForbidden | SpaceError::DuplicateForbiddenName(_) => {
                first_clause
            }
            SpaceError::DuplicateParameter(n)
            | SpaceError::InvertedRange(n)
            | SpaceError::NonPositiveLogRange(n)
            | SpaceError::NonFiniteBound(n)
            | SpaceError::EmptyDomain(n)
            | SpaceError::DuplicateValue(n, _)
            | SpaceError::UnknownParameter(n)
            | SpaceError::DefaultOutOfDomain { name: n, .. }
            | SpaceError::ValueOutOfDomain { name: n, .. } => decl_pos.get(n).copied(),
        };
        pos.unwrap_or(Pos { line: 1, column: 1 }).err(e)
    })
}

fn parse_int((w, p): (&str, Pos)) -> Result<i64, ParseError> {
    w.parse().map_err(|_| p.syntax(format!("`{w}` is not an integer")))
}

fn parse_real((w, p): (&str, Pos)) -> Result<f64, ParseError> {
    w.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| p.syntax(format!("`{w}` is not a finite number")))
}

/// Render a space in the text format accepted by [`parse_space`].
pub fn render_space(space: &ParameterSpace) -> String {
    let mut out = String::new();
    for p in space.parameters() {
        match &p.domain {
            Domain::Integer { lo, hi } => {
                let _ = writeln!(out, "{} integer [{lo}, {hi}] [{}]", p.name, p.default);
            }
            Domain::Real { lo, hi, log } => {
                let _ = write!(
                    out,
                    "{} real [{}, {}] [{}]",
                    p.name,
                    Value::Real(*lo),
                    Value::Real(*hi),
                    p.default
                );
                out.push_str(if *log { " log\n" } else { "\n" });
            }
            Domain::Categorical(vals) => {
                let _ = writeln!(out, "{} {{{}}} [{}]", p.name, vals.join(", "), p.default);
            }
        }
    }
    for c in space.conditions() {
        let vals: Vec<String> = c.values.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(out, "{} | {} in {{{}}}", c.child, c.parent, vals.join(", "));
    }
    for f in space.forbidden() {
        let _ = writeln!(out, "{f}");
    }
    out
}
