//! Runtime monitors for the environment assumptions of assume-guarantee
//! software contracts.
//!
//! The pipeline: extract a type-labeled skeleton from a control-flow graph
//! of the application code ([`skeleton`]), annotate it with semantic
//! constraints into an internal-assumption EFSM ([`annotate`]), extend the
//! extraction with I/O API effect models ([`effects`]), verify language
//! inclusion of the contract assumption in the extended machine
//! ([`inclusion`]), and run the internal assumption as an alarm-raising
//! monitor over input traces ([`monitor`]). The [`case_study`] module ships
//! a complete worked example: a GPS distance calculator in two
//! implementations with different robustness to format deviations.

use thiserror::Error;

pub mod annotate;
pub mod case_study;
pub mod cfg;
pub mod effects;
pub mod efsm;
pub mod expr;
pub mod files;
pub mod inclusion;
pub mod monitor;
pub mod sample;
pub mod skeleton;
pub mod value;

pub use efsm::{Efsm, Event, Trace};
pub use value::{Value, ValueType};

#[derive(Debug, Error)]
pub enum Error {
    #[error("channel `{0}` is not declared")]
    UndeclaredChannel(String),

    #[error("type error: {0}")]
    Type(String),

    #[error("cannot parse `{input}`: {message}")]
    ExprParse { input: String, message: String },

    #[error("unsupported directive or literal `{offending}` in format string \"{format}\"")]
    UnsupportedFormat { format: String, offending: String },

    #[error("unknown I/O API `{0}`")]
    UnknownApi(String),

    #[error("invalid machine: {0}")]
    Validation(String),

    #[error("invalid CFG: {0}")]
    Cfg(String),

    #[error("annotation does not cover directive {directive} of node `{node}`")]
    UncoveredDirective { node: String, directive: usize },

    #[error("channel alphabets are incompatible: {0}")]
    IncompatibleAlphabets(String),

    #[error("monitor session is halted")]
    Halted,

    #[error("{file}: {source}")]
    Io {
        file: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{file}: at {location}: {message}")]
    Json {
        file: String,
        location: String,
        message: String,
    },

    #[error(transparent)]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
