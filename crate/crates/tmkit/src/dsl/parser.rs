//! Parser and pretty-printer for the model language.
//!
//! The parser recovers at declaration boundaries: a malformed declaration
//! yields one diagnostic and parsing resumes at the next top-level keyword
//! outside of any braces, so a single typo does not hide later problems.
//!
//! [`pretty_print`] renders a tree back to canonical text; parsing that
//! text yields a tree equal to the original up to source positions.

use crate::diag::{DiagCode, DiagLoc, Diagnostic};
use crate::model::ActionKind;

use super::ast::*;
use super::lexer::{lex, TokKind, Token};

const TOP_KEYWORDS: [&str; 7] = [
    "thimac",
    "flow",
    "trigger",
    "event",
    "composite",
    "behavior",
    "constraint",
];

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    diags: Vec<Diagnostic>,
    end: Pos,
}

struct ParseErr;

type PResult<T> = Result<T, ParseErr>;

impl Parser {
    fn peek(&self) -> Option<&TokKind> {
        self.toks.get(self.pos).map(|t| &t.kind)
    }

    fn here(&self) -> Pos {
        self.toks.get(self.pos).map(|t| t.pos).unwrap_or(self.end)
    }

    fn bump(&mut self) -> Option<Token> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn error(&mut self, pos: Pos, message: impl Into<String>) -> ParseErr {
        self.diags.push(Diagnostic::error(
            DiagCode::Syntax,
            DiagLoc::pos(pos.line, pos.col),
            message,
        ));
        ParseErr
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if matches!(self.peek(), Some(TokKind::Sym(t)) if *t == s) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if matches!(self.peek(), Some(TokKind::Ident(t)) if t == kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> PResult<()> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            let pos = self.here();
            let found = self.describe_here();
            Err(self.error(pos, format!("expected `{s}`, found {found}")))
        }
    }

    fn expect_ident(&mut self, what: &str) -> PResult<String> {
        match self.peek() {
            Some(TokKind::Ident(_)) => {
                let Some(Token { kind: TokKind::Ident(name), .. }) = self.bump() else {
                    unreachable!()
                };
                Ok(name)
            }
            _ => {
                let pos = self.here();
                let found = self.describe_here();
                Err(self.error(pos, format!("expected {what}, found {found}")))
            }
        }
    }

    fn expect_str(&mut self, what: &str) -> PResult<String> {
        match self.peek() {
            Some(TokKind::Str(_)) => {
                let Some(Token { kind: TokKind::Str(s), .. }) = self.bump() else {
                    unreachable!()
                };
                Ok(s)
            }
            _ => {
                let pos = self.here();
                let found = self.describe_here();
                Err(self.error(pos, format!("expected a quoted {what}, found {found}")))
            }
        }
    }

    fn describe_here(&self) -> String {
        match self.peek() {
            Some(TokKind::Ident(n)) => format!("`{n}`"),
            Some(TokKind::Int(n)) => format!("`{n}`"),
            Some(TokKind::Str(_)) => "a string".to_string(),
            Some(TokKind::Sym(s)) => format!("`{s}`"),
            None => "end of file".to_string(),
        }
    }

    /// Skips ahead to the next top-level keyword outside any brace pair.
    fn recover(&mut self) {
        let mut depth = 0usize;
        while let Some(kind) = self.peek() {
            match kind {
                TokKind::Sym("{") => depth += 1,
                TokKind::Sym("}") => depth = depth.saturating_sub(1),
                TokKind::Ident(name)
                    if depth == 0 && TOP_KEYWORDS.contains(&name.as_str()) =>
                {
                    return;
                }
                _ => {}
            }
            self.pos += 1;
        }
    }

    fn model(&mut self) -> ModelAst {
        let mut decls = Vec::new();
        while let Some(kind) = self.peek() {
            let pos = self.here();
            let result = match kind {
                TokKind::Ident(name) => match name.as_str() {
                    "thimac" => self.thimac().map(Decl::Thimac),
                    "flow" => self.flow().map(Decl::Flow),
                    "trigger" => self.trigger().map(Decl::Trigger),
                    "event" => self.event().map(Decl::Event),
                    "composite" => self.composite().map(Decl::Composite),
                    "behavior" => self.behavior().map(Decl::Behavior),
                    "constraint" => self.constraint().map(Decl::Constraint),
                    other => {
                        let msg = format!(
                            "expected a declaration (thimac, flow, trigger, event, \
                             composite, behavior, or constraint), found `{other}`"
                        );
                        self.pos += 1;
                        Err(self.error(pos, msg))
                    }
                },
                _ => {
                    let found = self.describe_here();
                    self.pos += 1;
                    Err(self.error(pos, format!("expected a declaration, found {found}")))
                }
            };
            match result {
                Ok(decl) => decls.push(decl),
                Err(ParseErr) => self.recover(),
            }
        }
        ModelAst { decls }
    }

    fn thimac(&mut self) -> PResult<ThimacDecl> {
        let pos = self.here();
        assert!(self.eat_kw("thimac"));
        let name = self.expect_ident("a thimac name")?;
        let open = self.here();
        self.expect_sym("{")?;
        let mut items = Vec::new();
        loop {
            if self.eat_sym("}") {
                break;
            }
            let item_pos = self.here();
            match self.peek() {
                None => {
                    return Err(self.error(open, "block opened here is never closed"));
                }
                Some(TokKind::Ident(kw)) => match kw.as_str() {
                    "storage" => {
                        self.pos += 1;
                        self.expect_sym(";")?;
                        items.push(ThimacItem::Storage(item_pos));
                    }
                    "var" => {
                        self.pos += 1;
                        let name = self.expect_ident("a variable name")?;
                        self.expect_sym("=")?;
                        let value = match self.peek() {
                            Some(TokKind::Int(_)) => {
                                let Some(Token { kind: TokKind::Int(n), .. }) = self.bump()
                                else {
                                    unreachable!()
                                };
                                n
                            }
                            _ => {
                                let pos = self.here();
                                let found = self.describe_here();
                                return Err(self.error(
                                    pos,
                                    format!("expected an integer, found {found}"),
                                ));
                            }
                        };
                        self.expect_sym(";")?;
                        items.push(ThimacItem::Var { pos: item_pos, name, value });
                    }
                    "list" => {
                        self.pos += 1;
                        let name = self.expect_ident("a list name")?;
                        self.expect_sym(";")?;
                        items.push(ThimacItem::List { pos: item_pos, name });
                    }
                    "stage" => {
                        self.pos += 1;
                        let kind_pos = self.here();
                        let kind_name = self.expect_ident("an action kind")?;
                        let kind = ActionKind::from_token(&kind_name).ok_or_else(|| {
                            self.error(
                                kind_pos,
                                format!(
                                    "`{kind_name}` is not an action kind (create, process, \
                                     release, transfer, receive)"
                                ),
                            )
                        })?;
                        let id = self.expect_ident("a stage name")?;
                        let mut stage = StageDecl {
                            pos: item_pos,
                            kind,
                            id,
                            label: None,
                            updates: None,
                            emits: None,
                        };
                        loop {
                            if self.eat_kw("label") {
                                stage.label = Some(self.expect_str("label")?);
                            } else if self.eat_kw("updates") {
                                stage.updates = Some(self.expect_str("update list")?);
                            } else if self.eat_kw("emits") {
                                stage.emits = Some(self.expect_str("message")?);
                            } else {
                                break;
                            }
                        }
                        self.expect_sym(";")?;
                        items.push(ThimacItem::Stage(stage));
                    }
                    "thimac" => {
                        items.push(ThimacItem::Child(self.thimac()?));
                    }
                    other => {
                        let msg = format!(
                            "expected storage, var, list, stage, or a nested thimac, \
                             found `{other}`"
                        );
                        return Err(self.error(item_pos, msg));
                    }
                },
                Some(_) => {
                    let found = self.describe_here();
                    return Err(
                        self.error(item_pos, format!("expected a thimac item, found {found}"))
                    );
                }
            }
        }
        Ok(ThimacDecl { pos, name, items })
    }

    fn flow(&mut self) -> PResult<FlowDecl> {
        let pos = self.here();
        assert!(self.eat_kw("flow"));
        let from = self.expect_ident("a node name")?;
        self.expect_sym("->")?;
        let to = self.expect_ident("a node name")?;
        self.expect_sym(";")?;
        Ok(FlowDecl { pos, from, to })
    }

    fn trigger(&mut self) -> PResult<TriggerDecl> {
        let pos = self.here();
        assert!(self.eat_kw("trigger"));
        let from = self.expect_ident("a node name")?;
        self.expect_sym("->")?;
        let to = self.expect_ident("a node name")?;
        let when = if self.eat_kw("when") {
            Some(self.expect_str("guard expression")?)
        } else {
            None
        };
        self.expect_sym(";")?;
        Ok(TriggerDecl { pos, from, to, when })
    }

    fn ident_list(&mut self, what: &str, terminator: &str) -> PResult<Vec<String>> {
        let mut names = Vec::new();
        if self.eat_sym(terminator) {
            return Ok(names);
        }
        loop {
            names.push(self.expect_ident(what)?);
            if self.eat_sym(terminator) {
                return Ok(names);
            }
            self.expect_sym(",")?;
        }
    }

    fn event(&mut self) -> PResult<EventDecl> {
        let pos = self.here();
        assert!(self.eat_kw("event"));
        let id = self.expect_ident("an event name")?;
        let params = if self.eat_sym("(") {
            self.ident_list("a parameter name", ")")?
        } else {
            Vec::new()
        };
        let label = if self.eat_kw("label") {
            Some(self.expect_str("label")?)
        } else {
            None
        };
        let open = self.here();
        self.expect_sym("{")?;
        let nodes = match self.ident_list("a node name", "}") {
            Ok(nodes) => nodes,
            Err(e) => {
                if self.peek().is_none() {
                    return Err(self.error(open, "block opened here is never closed"));
                }
                return Err(e);
            }
        };
        Ok(EventDecl { pos, id, params, label, nodes })
    }

    fn composite(&mut self) -> PResult<CompositeDecl> {
        let pos = self.here();
        assert!(self.eat_kw("composite"));
        let id = self.expect_ident("a composite name")?;
        self.expect_sym("=")?;
        let mut members = vec![self.expect_ident("an event name")?];
        while self.eat_sym(",") {
            members.push(self.expect_ident("an event name")?);
        }
        let sharing = if self.eat_kw("sharing") {
            self.expect_sym("(")?;
            self.ident_list("a variable name", ")")?
        } else {
            Vec::new()
        };
        self.expect_sym(";")?;
        Ok(CompositeDecl { pos, id, members, sharing })
    }

    fn behavior(&mut self) -> PResult<BehaviorDecl> {
        let pos = self.here();
        assert!(self.eat_kw("behavior"));
        let open = self.here();
        self.expect_sym("{")?;
        let mut edges = Vec::new();
        loop {
            if self.eat_sym("}") {
                break;
            }
            if self.peek().is_none() {
                return Err(self.error(open, "block opened here is never closed"));
            }
            let edge_pos = self.here();
            let from = self.expect_ident("an event name")?;
            self.expect_sym("->")?;
            let to = self.expect_ident("an event name")?;
            let norepeat = self.eat_kw("norepeat");
            self.expect_sym(";")?;
            edges.push(EdgeDecl { pos: edge_pos, from, to, norepeat });
        }
        Ok(BehaviorDecl { pos, edges })
    }

    fn constraint(&mut self) -> PResult<ConstraintDecl> {
        let pos = self.here();
        assert!(self.eat_kw("constraint"));
        let id = self.expect_ident("a constraint name")?;
        self.expect_sym(":")?;
        let kind_pos = self.here();
        let kind = self.expect_ident("a constraint kind")?;
        let body = match kind.as_str() {
            "binding" => ConstraintBody::Binding(self.expect_ident("a composite name")?),
            "succession" => {
                let first = self.expect_ident("an event name")?;
                self.eat_sym(",");
                let second = self.expect_ident("an event name")?;
                ConstraintBody::Succession(first, second)
            }
            "atmostonce" => {
                let composite = self.expect_ident("a composite name")?;
                if !self.eat_kw("key") {
                    let pos = self.here();
                    let found = self.describe_here();
                    return Err(self.error(pos, format!("expected `key`, found {found}")));
                }
                self.expect_sym("(")?;
                let key = self.ident_list("a variable name", ")")?;
                ConstraintBody::AtMostOnce { composite, key }
            }
            other => {
                let msg = format!(
                    "expected binding, succession, or atmostonce, found `{other}`"
                );
                return Err(self.error(kind_pos, msg));
            }
        };
        self.expect_sym(";")?;
        Ok(ConstraintDecl { pos, id, body })
    }
}

/// Parses a model file. All syntax problems are collected; any problem at
/// all means no tree is returned.
pub fn parse_model(src: &str) -> Result<ModelAst, Vec<Diagnostic>> {
    let lexed = lex(src);
    let end_line = (src.lines().count() as u32).max(1);
    let mut p = Parser {
        toks: lexed.tokens,
        pos: 0,
        diags: lexed.diagnostics,
        end: Pos::new(end_line, 1),
    };
    let ast = p.model();
    if p.diags.is_empty() {
        Ok(ast)
    } else {
        Err(p.diags)
    }
}

// ---------------------------------------------------------------------------
// Pretty printing
// ---------------------------------------------------------------------------

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            other => out.push(other),
        }
    }
    out.push('"');
    out
}

fn print_thimac(out: &mut String, t: &ThimacDecl, indent: usize) {
    let pad = "  ".repeat(indent);
    out.push_str(&format!("{pad}thimac {} {{\n", t.name));
    let inner = "  ".repeat(indent + 1);
    for item in &t.items {
        match item {
            ThimacItem::Storage(_) => out.push_str(&format!("{inner}storage;\n")),
            ThimacItem::Var { name, value, .. } => {
                out.push_str(&format!("{inner}var {name} = {value};\n"))
            }
            ThimacItem::List { name, .. } => out.push_str(&format!("{inner}list {name};\n")),
            ThimacItem::Stage(s) => {
                out.push_str(&format!("{inner}stage {} {}", s.kind, s.id));
                if let Some(label) = &s.label {
                    out.push_str(&format!(" label {}", quote(label)));
                }
                if let Some(updates) = &s.updates {
                    out.push_str(&format!(" updates {}", quote(updates)));
                }
                if let Some(emits) = &s.emits {
                    out.push_str(&format!(" emits {}", quote(emits)));
                }
                out.push_str(";\n");
            }
            ThimacItem::Child(c) => print_thimac(out, c, indent + 1),
        }
    }
    out.push_str(&format!("{pad}}}\n"));
}

fn decl_group(d: &Decl) -> u8 {
    match d {
        Decl::Thimac(_) => 0,
        Decl::Flow(_) => 1,
        Decl::Trigger(_) => 2,
        Decl::Event(_) => 3,
        Decl::Composite(_) => 4,
        Decl::Behavior(_) => 5,
        Decl::Constraint(_) => 6,
    }
}

/// Renders the tree in canonical form: two-space indentation, `->` arrows,
/// one blank line between groups of different declaration kinds.
pub fn pretty_print(ast: &ModelAst) -> String {
    let mut out = String::new();
    let mut last_group: Option<u8> = None;
    for d in &ast.decls {
        let group = decl_group(d);
        if last_group.is_some() && (last_group != Some(group) || group == 0) {
            out.push('\n');
        }
        last_group = Some(group);
        match d {
            Decl::Thimac(t) => print_thimac(&mut out, t, 0),
            Decl::Flow(f) => out.push_str(&format!("flow {} -> {};\n", f.from, f.to)),
            Decl::Trigger(t) => {
                out.push_str(&format!("trigger {} -> {}", t.from, t.to));
                if let Some(when) = &t.when {
                    out.push_str(&format!(" when {}", quote(when)));
                }
                out.push_str(";\n");
            }
            Decl::Event(e) => {
                out.push_str(&format!("event {}", e.id));
                if !e.params.is_empty() {
                    out.push_str(&format!(" ({})", e.params.join(", ")));
                }
                if let Some(label) = &e.label {
                    out.push_str(&format!(" label {}", quote(label)));
                }
                out.push_str(&format!(" {{ {} }}\n", e.nodes.join(", ")));
            }
            Decl::Composite(c) => {
                out.push_str(&format!("composite {} = {}", c.id, c.members.join(", ")));
                if !c.sharing.is_empty() {
                    out.push_str(&format!(" sharing ({})", c.sharing.join(", ")));
                }
                out.push_str(";\n");
            }
            Decl::Behavior(b) => {
                out.push_str("behavior {\n");
                for e in &b.edges {
                    out.push_str(&format!("  {} -> {}", e.from, e.to));
                    if e.norepeat {
                        out.push_str(" norepeat");
                    }
                    out.push_str(";\n");
                }
                out.push_str("}\n");
            }
            Decl::Constraint(c) => {
                out.push_str(&format!("constraint {} : ", c.id));
                match &c.body {
                    ConstraintBody::Binding(comp) => {
                        out.push_str(&format!("binding {comp}"))
                    }
                    ConstraintBody::Succession(a, b) => {
                        out.push_str(&format!("succession {a} {b}"))
                    }
                    ConstraintBody::AtMostOnce { composite, key } => out.push_str(&format!(
                        "atmostonce {composite} key ({})",
                        key.join(", ")
                    )),
                }
                out.push_str(";\n");
            }
        }
    }
    out
}
