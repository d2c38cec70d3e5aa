use std::fmt;

use thiserror::Error;

use crate::paramspace::{Configuration, ParameterSpace};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemplateError {
    #[error("command template is empty")]
    Empty,
    #[error("unknown placeholder `{{{0}}}`")]
    UnknownPlaceholder(String),
    #[error("unterminated placeholder in `{0}`")]
    Unterminated(String),
    #[error("stray `}}` in `{0}`")]
    StrayBrace(String),
    #[error("`{{params}}` must be a whole argument, found in `{0}`")]
    EmbeddedParams(String),
    #[error("`{{params}}` cannot be the program")]
    ParamsAsProgram,
    #[error("`{{param:{0}}}` names a parameter that is not active")]
    InactiveParameter(String),
    #[error("`{{param:{0}}}` names a parameter that is not in the space")]
    UnknownParameter(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Part {
    Lit(String),
    Instance,
    Seed,
    Param(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Arg {
    Params,
    Parts(Vec<Part>),
}

/// A whitespace-separated argument template with `{instance}`, `{seed}`,
/// `{params}` and `{param:NAME}` placeholders. `{{` and `}}` are literal braces.
///
/// No shell is involved: each template word becomes one argument (or, for
/// `{params}`, one argument per active parameter).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommandTemplate {
    source: String,
    args: Vec<Arg>,
}

impl CommandTemplate {
    pub fn parse(text: &str) -> Result<Self, TemplateError> {
        let mut args = Vec::new();
        for word in text.split_whitespace() {
            let parts = parse_word(word)?;
            if parts.len() == 1 && matches!(&parts[0], Part::Param(n) if n.is_empty()) {
                args.push(Arg::Params);
            } else if parts.iter().any(|p| matches!(p, Part::Param(n) if n.is_empty())) {
                return Err(TemplateError::EmbeddedParams(word.to_string()));
            } else {
                args.push(Arg::Parts(parts));
            }
        }
        match args.first() {
            None => Err(TemplateError::Empty),
            Some(Arg::Params) => Err(TemplateError::ParamsAsProgram),
            Some(_) => Ok(CommandTemplate {
                source: text.to_string(),
                args,
            }),
        }
    }

    pub fn as_str(&self) -> &str {
        &self.source
    }

    /// Names used in `{param:NAME}` placeholders.
    pub fn named_parameters(&self) -> impl Iterator<Item = &str> {
        self.args.iter().flat_map(|a| match a {
            Arg::Params => Vec::new(),
            Arg::Parts(parts) => parts
                .iter()
                .filter_map(|p| match p {
                    Part::Param(n) if !n.is_empty() => Some(n.as_str()),
                    _ => None,
                })
                .collect(),
        })
    }

    /// Check that every `{param:NAME}` exists in `space`.
    pub fn check_against(&self, space: &ParameterSpace) -> Result<(), TemplateError> {
        for name in self.named_parameters() {
            if space.parameter(name).is_none() {
                return Err(TemplateError::UnknownParameter(name.to_string()));
            }
        }
        Ok(())
    }

    /// Expand into an argument vector.
    pub fn render(&self, config: &Configuration, instance: &str, seed: u64) -> Result<Vec<String>, TemplateError> {
        let mut out = Vec::with_capacity(self.args.len() + config.values().len());
        for arg in &self.args {
            match arg {
                Arg::Params => {
                    out.extend(config.values().iter().map(|(k, v)| format!("--{k}={v}")));
                }
                Arg::Parts(parts) => {
                    let mut s = String::new();
                    for part in parts {
                        match part {
                            Part::Lit(l) => s.push_str(l),
                            Part::Instance => s.push_str(instance),
                            Part::Seed => s.push_str(&seed.to_string()),
                            Part::Param(name) => match config.get(name) {
                                Some(v) => s.push_str(&v.to_string()),
                                None => return Err(TemplateError::InactiveParameter(name.clone())),
                            },
                        }
                    }
                    out.push(s);
                }
            }
        }
        Ok(out)
    }
}

impl fmt::Display for CommandTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

/// Empty `Param` name stands for `{params}`.
fn parse_word(word: &str) -> Result<Vec<Part>, TemplateError> {
    let mut parts = Vec::new();
    let mut lit = String::new();
    let mut chars = word.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '{' if chars.peek() == Some(&'{') => {
                chars.next();
                lit.push('{');
            }
            '}' if chars.peek() == Some(&'}') => {
                chars.next();
                lit.push('}');
            }
            '}' => return Err(TemplateError::StrayBrace(word.to_string())),
            '{' => {
                let mut name = String::new();
                loop {
                    match chars.next() {
                        Some('}') => break,
                        Some(c) => name.push(c),
                        None => return Err(TemplateError::Unterminated(word.to_string())),
                    }
                }
                if !lit.is_empty() {
                    parts.push(Part::Lit(std::mem::take(&mut lit)));
                }
                parts.push(match name.as_str() {
                    "instance" => Part::Instance,
                    "seed" => Part::Seed,
                    "params" => Part::Param(String::new()),
                    other => match other.strip_prefix("param:") {
                        Some(n) if !n.is_empty() => Part::Param(n.to_string()),
                        _ => return Err(TemplateError::UnknownPlaceholder(name)),
                    },
                });
            }
            c => lit.push(c),
        }
    }
    if !lit.is_empty() || parts.is_empty() {
        parts.push(Part::Lit(lit));
    }
    Ok(parts)
}
