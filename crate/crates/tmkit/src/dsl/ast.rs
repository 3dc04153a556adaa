//! Syntax tree for the model language.
//!
//! Every declaration carries the source position it started at, so later
//! passes can point diagnostics back into the file. Positions are data
//! about *where* something was written, not *what* was written: two trees
//! are compared through [`ModelAst::normalized`], which zeroes them out.

use crate::model::ActionKind;

/// A 1-based source position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
}

impl Pos {
    pub const ZERO: Pos = Pos { line: 0, col: 0 };

    pub fn new(line: u32, col: u32) -> Self {
        Pos { line, col }
    }
}

/// A parsed model file: a flat list of top-level declarations.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ModelAst {
    pub decls: Vec<Decl>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decl {
    Thimac(ThimacDecl),
    Flow(FlowDecl),
    Trigger(TriggerDecl),
    Event(EventDecl),
    Composite(CompositeDecl),
    Behavior(BehaviorDecl),
    Constraint(ConstraintDecl),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThimacDecl {
    pub pos: Pos,
    pub name: String,
    pub items: Vec<ThimacItem>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ThimacItem {
    /// `storage;` — the thimac keeps an instance store.
    Storage(Pos),
    /// `var n = 0;`
    Var { pos: Pos, name: String, value: i64 },
    /// `list items;` — a variable starting as the empty list.
    List { pos: Pos, name: String },
    /// `stage <kind> <id> …;`
    Stage(StageDecl),
    /// A nested thimac.
    Child(ThimacDecl),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageDecl {
    pub pos: Pos,
    pub kind: ActionKind,
    pub id: String,
    pub label: Option<String>,
    pub updates: Option<String>,
    pub emits: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowDecl {
    pub pos: Pos,
    pub from: String,
    pub to: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TriggerDecl {
    pub pos: Pos,
    pub from: String,
    pub to: String,
    pub when: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventDecl {
    pub pos: Pos,
    pub id: String,
    pub params: Vec<String>,
    pub label: Option<String>,
    pub nodes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompositeDecl {
    pub pos: Pos,
    pub id: String,
    pub members: Vec<String>,
    pub sharing: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BehaviorDecl {
    pub pos: Pos,
    pub edges: Vec<EdgeDecl>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeDecl {
    pub pos: Pos,
    pub from: String,
    pub to: String,
    pub norepeat: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintDecl {
    pub pos: Pos,
    pub id: String,
    pub body: ConstraintBody,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConstraintBody {
    /// `binding <composite>`
    Binding(String),
    /// `succession <first> <second>`
    Succession(String, String),
    /// `atmostonce <composite> key (<vars>)`
    AtMostOnce { composite: String, key: Vec<String> },
}

impl ModelAst {
    /// The same tree with every source position zeroed, for comparing
    /// what was written independently of where.
    pub fn normalized(&self) -> ModelAst {
        fn thimac(t: &ThimacDecl) -> ThimacDecl {
            ThimacDecl {
                pos: Pos::ZERO,
                name: t.name.clone(),
                items: t
                    .items
                    .iter()
                    .map(|item| match item {
                        ThimacItem::Storage(_) => ThimacItem::Storage(Pos::ZERO),
                        ThimacItem::Var { name, value, .. } => ThimacItem::Var {
                            pos: Pos::ZERO,
                            name: name.clone(),
                            value: *value,
                        },
                        ThimacItem::List { name, .. } => {
                            ThimacItem::List { pos: Pos::ZERO, name: name.clone() }
                        }
                        ThimacItem::Stage(s) => ThimacItem::Stage(StageDecl {
                            pos: Pos::ZERO,
                            ..s.clone()
                        }),
                        ThimacItem::Child(c) => ThimacItem::Child(thimac(c)),
                    })
                    .collect(),
            }
        }
        ModelAst {
            decls: self
                .decls
                .iter()
                .map(|d| match d {
                    Decl::Thimac(t) => Decl::Thimac(thimac(t)),
                    Decl::Flow(f) => Decl::Flow(FlowDecl { pos: Pos::ZERO, ..f.clone() }),
                    Decl::Trigger(t) => {
                        Decl::Trigger(TriggerDecl { pos: Pos::ZERO, ..t.clone() })
                    }
                    Decl::Event(e) => Decl::Event(EventDecl { pos: Pos::ZERO, ..e.clone() }),
                    Decl::Composite(c) => {
                        Decl::Composite(CompositeDecl { pos: Pos::ZERO, ..c.clone() })
                    }
                    Decl::Behavior(b) => Decl::Behavior(BehaviorDecl {
                        pos: Pos::ZERO,
                        edges: b
                            .edges
                            .iter()
                            .map(|e| EdgeDecl { pos: Pos::ZERO, ..e.clone() })
                            .collect(),
                    }),
                    Decl::Constraint(c) => {
                        Decl::Constraint(ConstraintDecl { pos: Pos::ZERO, ..c.clone() })
                    }
                })
                .collect(),
        }
    }
}
