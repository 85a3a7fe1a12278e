//! Command-line surface of `invberge`: JSON problem documents, result
//! documents, binary field files and CSV export.

pub mod commands;
pub mod document;
pub mod expr;
pub mod field_io;

pub use commands::{run_command, ResultDocument, EXIT_NEGATIVE, EXIT_OK, EXIT_USAGE};
pub use document::{parse_problem, ProblemDocument};
