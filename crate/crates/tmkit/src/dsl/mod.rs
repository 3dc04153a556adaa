//! The textual modeling language and the script language.
//!
//! Model files (`.tm`) declare thimacs with their stages, the flow and
//! trigger arcs between stages, events over regions of the diagram,
//! composite events, an optional behavior graph, and constraints. Script
//! files (`.tms`) are sequences of run statements: create an instance, set
//! attributes, send a thing through the flow structure, raise an event by
//! hand, or print when an event has just occurred.
//!
//! [`load_model`] takes model text to a validated [`crate::model::Bundle`]
//! in one step; [`parse_model`] / [`lower`] expose the two halves.
//! [`parse_script`] parses script text; running it is the engine's job.

pub mod ast;
pub mod lexer;
pub mod lower;
pub mod parser;
pub mod script;

pub use ast::{ModelAst, Pos};
pub use lower::{load_model, lower, LowerOutput};
pub use parser::{parse_model, pretty_print};
pub use script::{parse_script, FlowStmt, FlowTarget, Script, Statement};
