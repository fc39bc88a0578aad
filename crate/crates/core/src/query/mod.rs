//! PATTERN / WHERE / WITHIN queries: AST, parser and reference matcher.

mod ast;
mod matcher;
mod parser;

pub use ast::{PatternExpr, PatternQuery};
pub use matcher::{and_match, reference_evaluate, seq_match, AnchoredMatcher, MatchSet};
pub use parser::{parse_query, ParseError};

pub(crate) use ast::format_window;
