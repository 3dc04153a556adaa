//! Diagnostics shared by parsing, lowering, and structural validation.
//!
//! Every problem found in a model file or a constructed model is reported as
//! a [`Diagnostic`]: a severity, a stable machine-readable code, a location
//! (either a source position or the id of a model element), and a
//! human-readable message. Validation never stops at the first problem; all
//! entry points collect as many diagnostics as they can.

use std::fmt;

use serde::{Deserialize, Serialize};

/// How severe a diagnostic is. Only `Error` blocks lowering and validation;
/// warnings are advisory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Severity {
    Warning,
    Error,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Severity::Warning => write!(f, "warning"),
            Severity::Error => write!(f, "error"),
        }
    }
}

/// Stable code identifying the kind of problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DiagCode {
    /// Malformed source text (lexing or parsing failed).
    Syntax,
    /// Reference to a thimac that is not declared.
    UnknownThimac,
    /// Reference to an action node that is not declared.
    UnknownNode,
    /// Reference to an event that is not declared.
    UnknownEvent,
    /// Reference to a composite event that is not declared.
    UnknownComposite,
    /// Two declarations claim the same identifier.
    DuplicateId,
    /// An event region is empty, has dangling ids, or is not connected.
    RegionInvalid,
    /// A flow arc violates the sequencing rules of the five actions.
    FlowOrderViolation,
    /// A trigger arc starts and ends at the same node.
    TriggerLoop,
    /// The thimac parent chain contains a cycle.
    ParentCycle,
    /// An update expression reaches outside the owning thimac chain.
    UpdateScope,
    /// A declared composite id disagrees with the canonical member join.
    CompositeIdMismatch,
    /// A composite lists fewer than two member events.
    EmptyComposite,
    /// A shared variable is not a parameter of any member event.
    SharedNotInParams,
    /// An at-most-once key variable is not among the composite's shared vars.
    KeyNotShared,
    /// An expression string failed to parse or is ill-typed where checkable.
    ExprSyntax,
    /// Warning: a trigger arc connects two nodes of the same machine.
    SameMachineTrigger,
    /// Warning: updates on a release/transfer/receive node never run.
    UpdatesIgnored,
}

impl fmt::Display for DiagCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            DiagCode::Syntax => "Syntax",
            DiagCode::UnknownThimac => "UnknownThimac",
            DiagCode::UnknownNode => "UnknownNode",
            DiagCode::UnknownEvent => "UnknownEvent",
            DiagCode::UnknownComposite => "UnknownComposite",
            DiagCode::DuplicateId => "DuplicateId",
            DiagCode::RegionInvalid => "RegionInvalid",
            DiagCode::FlowOrderViolation => "FlowOrderViolation",
            DiagCode::TriggerLoop => "TriggerLoop",
            DiagCode::ParentCycle => "ParentCycle",
            DiagCode::UpdateScope => "UpdateScope",
            DiagCode::CompositeIdMismatch => "CompositeIdMismatch",
            DiagCode::EmptyComposite => "EmptyComposite",
            DiagCode::SharedNotInParams => "SharedNotInParams",
            DiagCode::KeyNotShared => "KeyNotShared",
            DiagCode::ExprSyntax => "ExprSyntax",
            DiagCode::SameMachineTrigger => "SameMachineTrigger",
            DiagCode::UpdatesIgnored => "UpdatesIgnored",
        };
        f.write_str(name)
    }
}

/// Where a diagnostic points.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum DiagLoc {
    /// A position in source text (1-based line and column).
    Pos { line: u32, col: u32 },
    /// A model element, named by its id.
    Element(String),
}

impl DiagLoc {
    pub fn pos(line: u32, col: u32) -> Self {
        DiagLoc::Pos { line, col }
    }

    pub fn element(id: impl Into<String>) -> Self {
        DiagLoc::Element(id.into())
    }
}

impl fmt::Display for DiagLoc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DiagLoc::Pos { line, col } => write!(f, "{line}:{col}"),
            DiagLoc::Element(id) => write!(f, "`{id}`"),
        }
    }
}

/// One problem found in a model, script, or bundle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: DiagCode,
    pub loc: DiagLoc,
    pub message: String,
}

impl Diagnostic {
    pub fn error(code: DiagCode, loc: DiagLoc, message: impl Into<String>) -> Self {
        Diagnostic { severity: Severity::Error, code, loc, message: message.into() }
    }

    pub fn warning(code: DiagCode, loc: DiagLoc, message: impl Into<String>) -> Self {
        Diagnostic { severity: Severity::Warning, code, loc, message: message.into() }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}] {}: {}", self.severity, self.code, self.loc, self.message)
    }
}

/// True when any diagnostic in the slice is an error.
pub fn has_errors(diags: &[Diagnostic]) -> bool {
    diags.iter().any(Diagnostic::is_error)
}
