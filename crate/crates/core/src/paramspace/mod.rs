//! Parameter spaces: typed domains, conditional activation, forbidden
//! clauses, a line-oriented text format, validation and random sampling.

mod config;
mod dsl;
mod sample;
mod space;
mod value;

pub use config::{config_diff, ConfigError, ConfigId, Configuration, DiffEntry};
pub use dsl::{parse_space, render_space, ParseError, ParseErrorKind};
pub use sample::{sample_value, OverConstrained, MAX_REJECTIONS};
pub use space::{
    Condition, ForbiddenClause, MissingUnconditional, Parameter, ParameterSpace, SpaceError, SpaceId,
};
pub use value::{Domain, Value};
