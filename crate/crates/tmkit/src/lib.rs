//! tmkit — a modeling toolkit for Thinging Machines.
//!
//! A Thinging Machine (TM) model describes a system as a hierarchy of
//! *thimacs* (thing/machine duals), each containing action nodes drawn from
//! five kinds — create, process, release, transfer, receive — connected by
//! flow arcs (things moving) and trigger arcs (one action starting another).
//! On top of the static model sit *events* (regions of the diagram paired
//! with occurrence times), a *behavior model* (a chronology graph over
//! events), and *constraints* (binding, immediate succession, at-most-once).
//!
//! The crate provides:
//!
//! - [`model`]: the metamodel plus structural operations —
//!   validation, notation conversion ([`model::canonicalize`],
//!   [`model::simplify`]), region checks, and composite-event construction.
//! - [`dsl`]: a textual language for models (`.tm` files) and scripts
//!   (`.tms` files), with a parser, pretty-printer, and lowering into
//!   validated [`model::Bundle`]s.
//! - [`engine`]: an interpreter that executes scripts against a bundle and
//!   produces a timed [`engine::Trace`] of event occurrences and messages.
//! - [`constraints`]: trace checkers for the constraint forms and the
//!   behavior chronology, aggregated by [`constraints::evaluate`].
//! - [`io`]: JSON round-tripping with strict decoding, plain-text trace and
//!   report rendering, and Graphviz export of three views.
//!
//! The `tmkit` binary wraps these as `check`, `run`, `validate`, and
//! `export` subcommands.

pub mod constraints;
pub mod diag;
pub mod dsl;
pub mod engine;
pub mod expr;
pub mod io;
pub mod model;

pub use diag::{DiagCode, DiagLoc, Diagnostic, Severity};
pub use model::Bundle;
