//! The expression language used in guard and update annotations.
//!
//! Guards and updates appear in model files as quoted strings, e.g.
//! `when "y <= Airplane.NoSeats"` or `updates "y := x + 1"`. This module
//! defines the value domain ([`Value`]), the expression AST ([`Expr`]),
//! update statements ([`UpdateStmt`]), a parser for both, and an evaluator
//! that resolves names through an [`Env`] provided by the caller.
//!
//! Name resolution (documented contract, relied on by the engine):
//!
//! - a bare identifier reads the flowing thing's attribute of that name if
//!   present, otherwise a variable found on the owning thimac chain;
//! - a bare assignment target writes an existing attribute first, then an
//!   existing chain variable, and otherwise creates a new attribute on the
//!   flowing thing;
//! - `Thimac.name` reads that thimac's variable, falling back to the newest
//!   record in its storage that carries an attribute of that name.
//!
//! Comparison semantics: `==`/`!=` compare any two values (different kinds
//! are simply unequal); the orderings `<`, `<=`, `>`, `>=` and arithmetic
//! `+`/`-` require integers.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A runtime value: attribute of a thing, variable of a thimac, or script
/// literal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Int(i64),
    Text(String),
    Bool(bool),
    List(Vec<Value>),
    Record(BTreeMap<String, Value>),
}

impl Value {
    pub fn kind(&self) -> &'static str {
        match self {
            Value::Int(_) => "int",
            Value::Text(_) => "text",
            Value::Bool(_) => "bool",
            Value::List(_) => "list",
            Value::Record(_) => "record",
        }
    }

    /// The record fields, if this value is a record.
    pub fn as_record(&self) -> Option<&BTreeMap<String, Value>> {
        match self {
            Value::Record(fields) => Some(fields),
            _ => None,
        }
    }

    pub fn as_record_mut(&mut self) -> Option<&mut BTreeMap<String, Value>> {
        match self {
            Value::Record(fields) => Some(fields),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(n) => write!(f, "{n}"),
            Value::Text(s) => f.write_str(s),
            Value::Bool(b) => write!(f, "{b}"),
            Value::List(items) => {
                f.write_str("[")?;
                for (i, v) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{v}")?;
                }
                f.write_str("]")
            }
            Value::Record(fields) => {
                f.write_str("{")?;
                for (i, (k, v)) in fields.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{k}={v}")?;
                }
                f.write_str("}")
            }
        }
    }
}

/// Binary operators. The four orderings and arithmetic are integer-only;
/// equality is universal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Sub,
    Gt,
    Lt,
    Ge,
    Le,
    Eq,
    Ne,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Gt => ">",
            BinOp::Lt => "<",
            BinOp::Ge => ">=",
            BinOp::Le => "<=",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 2,
            _ => 1,
        }
    }
}

/// Built-in functions. `contains`, `len`, `not`, and `has` are pure and
/// usable in guards; `append` and `remove_first` mutate a list in place and
/// are only legal as update statements. `has(name)` tests whether a bare
/// name resolves at all, letting one guard distinguish richer payloads from
/// plain ones without risking an unknown-name error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Builtin {
    Append,
    RemoveFirst,
    Contains,
    Len,
    Not,
    Has,
}

impl Builtin {
    pub fn name(self) -> &'static str {
        match self {
            Builtin::Append => "append",
            Builtin::RemoveFirst => "remove_first",
            Builtin::Contains => "contains",
            Builtin::Len => "len",
            Builtin::Not => "not",
            Builtin::Has => "has",
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        match name {
            "append" => Some(Builtin::Append),
            "remove_first" => Some(Builtin::RemoveFirst),
            "contains" => Some(Builtin::Contains),
            "len" => Some(Builtin::Len),
            "not" => Some(Builtin::Not),
            "has" => Some(Builtin::Has),
            _ => None,
        }
    }

    fn arity(self) -> usize {
        match self {
            Builtin::Append | Builtin::RemoveFirst | Builtin::Contains => 2,
            Builtin::Len | Builtin::Not | Builtin::Has => 1,
        }
    }
}

/// An expression, as found inside `when "…"` guards and on the right-hand
/// side of update assignments.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Expr {
    Int(i64),
    /// Bare name: thing attribute, else owning-chain variable.
    Ref(String),
    /// `Thimac.name`: that thimac's variable, else an attribute of the
    /// newest record in its storage.
    Qualified(String, String),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Builtin, Vec<Expr>),
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn child(f: &mut fmt::Formatter<'_>, e: &Expr, parent_prec: u8) -> fmt::Result {
            match e {
                Expr::Binary(op, ..) if op.precedence() < parent_prec => write!(f, "({e})"),
                _ => write!(f, "{e}"),
            }
        }
        match self {
            Expr::Int(n) => write!(f, "{n}"),
            Expr::Ref(name) => f.write_str(name),
            Expr::Qualified(t, n) => write!(f, "{t}.{n}"),
            Expr::Binary(op, lhs, rhs) => {
                child(f, lhs, op.precedence())?;
                write!(f, " {} ", op.symbol())?;
                // Right operand of `-` must re-parse on the right: parenthesize
                // equal-precedence binaries there (left associativity).
                match rhs.as_ref() {
                    Expr::Binary(rop, ..) if rop.precedence() <= op.precedence() => {
                        write!(f, "({rhs})")
                    }
                    _ => write!(f, "{rhs}"),
                }
            }
            Expr::Call(b, args) => {
                write!(f, "{}(", b.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

/// One update statement: `target := expr` or a mutating builtin call.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum UpdateStmt {
    /// `name := expr` — see the module docs for target resolution.
    Assign(String, Expr),
    /// `append(list, v)` / `remove_first(list, v)`.
    Call(Builtin, Vec<Expr>),
}

impl fmt::Display for UpdateStmt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UpdateStmt::Assign(name, e) => write!(f, "{name} := {e}"),
            UpdateStmt::Call(b, args) => {
                write!(f, "{}(", b.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

/// Renders a `;`-separated update list, the inverse of [`parse_updates`].
pub fn updates_to_string(stmts: &[UpdateStmt]) -> String {
    stmts.iter().map(UpdateStmt::to_string).collect::<Vec<_>>().join("; ")
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

/// Error from parsing an expression string; `offset` is the byte offset of
/// the offending token within the string.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{message} (at offset {offset})")]
pub struct ExprParseError {
    pub offset: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Int(i64),
    Ident(String),
    Sym(&'static str),
}

struct Lexer<'a> {
    src: &'a str,
    toks: Vec<(usize, Tok)>,
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>, ExprParseError> {
    let bytes = src.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() {
            while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                i += 1;
            }
            let text = &src[start..i];
            let n: i64 = text.parse().map_err(|_| ExprParseError {
                offset: start,
                message: format!("integer literal `{text}` out of range"),
            })?;
            toks.push((start, Tok::Int(n)));
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            while i < bytes.len() {
                let c = bytes[i] as char;
                if c.is_ascii_alphanumeric() || c == '_' {
                    i += 1;
                } else {
                    break;
                }
            }
            toks.push((start, Tok::Ident(src[start..i].to_string())));
            continue;
        }
        let two = if i + 1 < bytes.len() { &src[i..i + 2] } else { "" };
        let sym = match two {
            ":=" => Some(":="),
            ">=" => Some(">="),
            "<=" => Some("<="),
            "==" => Some("=="),
            "!=" => Some("!="),
            _ => None,
        };
        if let Some(s) = sym {
            toks.push((start, Tok::Sym(s)));
            i += 2;
            continue;
        }
        let one = match c {
            '+' => "+",
            '-' => "-",
            '>' => ">",
            '<' => "<",
            '(' => "(",
            ')' => ")",
            ',' => ",",
            '.' => ".",
            ';' => ";",
            _ => {
                return Err(ExprParseError {
                    offset: start,
                    message: format!("unexpected character `{c}`"),
                })
            }
        };
        toks.push((start, Tok::Sym(one)));
        i += 1;
    }
    Ok(toks)
}

struct Parser<'a> {
    lx: Lexer<'a>,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Result<Self, ExprParseError> {
        Ok(Parser { lx: Lexer { src, toks: lex(src)? }, pos: 0 })
    }

    fn peek(&self) -> Option<&Tok> {
        self.lx.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.lx.toks.get(self.pos).map(|(o, _)| *o).unwrap_or(self.lx.src.len())
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.lx.toks.get(self.pos).map(|(_, t)| t.clone());
        self.pos += 1;
        t
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Sym(t)) if *t == s) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn err(&self, message: impl Into<String>) -> ExprParseError {
        ExprParseError { offset: self.offset(), message: message.into() }
    }

    fn expect_sym(&mut self, s: &str) -> Result<(), ExprParseError> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            Err(self.err(format!("expected `{s}`")))
        }
    }

    /// expr := additive ( cmp-op additive )?   — comparisons do not chain.
    fn expr(&mut self) -> Result<Expr, ExprParseError> {
        let lhs = self.additive()?;
        let op = match self.peek() {
            Some(Tok::Sym(">")) => Some(BinOp::Gt),
            Some(Tok::Sym("<")) => Some(BinOp::Lt),
            Some(Tok::Sym(">=")) => Some(BinOp::Ge),
            Some(Tok::Sym("<=")) => Some(BinOp::Le),
            Some(Tok::Sym("==")) => Some(BinOp::Eq),
            Some(Tok::Sym("!=")) => Some(BinOp::Ne),
            _ => None,
        };
        if let Some(op) = op {
            self.pos += 1;
            let rhs = self.additive()?;
            Ok(Expr::Binary(op, Box::new(lhs), Box::new(rhs)))
        } else {
            Ok(lhs)
        }
    }

    fn additive(&mut self) -> Result<Expr, ExprParseError> {
        let mut lhs = self.primary()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Sym("+")) => BinOp::Add,
                Some(Tok::Sym("-")) => BinOp::Sub,
                _ => break,
            };
            self.pos += 1;
            let rhs = self.primary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn primary(&mut self) -> Result<Expr, ExprParseError> {
        if self.eat_sym("(") {
            let e = self.expr()?;
            self.expect_sym(")")?;
            return Ok(e);
        }
        if self.eat_sym("-") {
            return match self.bump() {
                Some(Tok::Int(n)) => Ok(Expr::Int(-n)),
                _ => Err(self.err("expected integer after `-`")),
            };
        }
        let offset = self.offset();
        match self.bump() {
            Some(Tok::Int(n)) => Ok(Expr::Int(n)),
            Some(Tok::Ident(name)) => {
                if self.eat_sym("(") {
                    let b = Builtin::from_name(&name).ok_or(ExprParseError {
                        offset,
                        message: format!("unknown function `{name}`"),
                    })?;
                    if matches!(b, Builtin::Append | Builtin::RemoveFirst) {
                        return Err(ExprParseError {
                            offset,
                            message: format!(
                                "`{}` mutates state and cannot be used inside an expression",
                                b.name()
                            ),
                        });
                    }
                    let mut args = Vec::new();
                    if !self.eat_sym(")") {
                        loop {
                            args.push(self.expr()?);
                            if self.eat_sym(")") {
                                break;
                            }
                            self.expect_sym(",")?;
                        }
                    }
                    if args.len() != b.arity() {
                        return Err(ExprParseError {
                            offset,
                            message: format!(
                                "`{}` takes {} argument(s), got {}",
                                b.name(),
                                b.arity(),
                                args.len()
                            ),
                        });
                    }
                    Ok(Expr::Call(b, args))
                } else if self.eat_sym(".") {
                    match self.bump() {
                        Some(Tok::Ident(field)) => Ok(Expr::Qualified(name, field)),
                        _ => Err(self.err("expected name after `.`")),
                    }
                } else {
                    Ok(Expr::Ref(name))
                }
            }
            _ => Err(ExprParseError { offset, message: "expected expression".into() }),
        }
    }

    fn update_stmt(&mut self) -> Result<UpdateStmt, ExprParseError> {
        let offset = self.offset();
        let name = match self.bump() {
            Some(Tok::Ident(name)) => name,
            _ => {
                return Err(ExprParseError {
                    offset,
                    message: "expected update statement".into(),
                })
            }
        };
        if self.eat_sym(":=") {
            let e = self.expr()?;
            return Ok(UpdateStmt::Assign(name, e));
        }
        if matches!(self.peek(), Some(Tok::Sym("("))) {
            let b = Builtin::from_name(&name).ok_or(ExprParseError {
                offset,
                message: format!("unknown function `{name}`"),
            })?;
            if !matches!(b, Builtin::Append | Builtin::RemoveFirst) {
                return Err(ExprParseError {
                    offset,
                    message: format!("`{}` does not mutate; use it in an expression", b.name()),
                });
            }
            self.expect_sym("(")?;
            let mut args = Vec::new();
            if !self.eat_sym(")") {
                loop {
                    args.push(self.expr()?);
                    if self.eat_sym(")") {
                        break;
                    }
                    self.expect_sym(",")?;
                }
            }
            if args.len() != b.arity() {
                return Err(ExprParseError {
                    offset,
                    message: format!(
                        "`{}` takes {} argument(s), got {}",
                        b.name(),
                        b.arity(),
                        args.len()
                    ),
                });
            }
            if !matches!(args[0], Expr::Ref(_)) {
                return Err(ExprParseError {
                    offset,
                    message: format!("first argument of `{}` must be a list name", b.name()),
                });
            }
            return Ok(UpdateStmt::Call(b, args));
        }
        Err(self.err("expected `:=` or `(` in update statement"))
    }
}

/// Parses a guard or right-hand-side expression.
pub fn parse_expr(src: &str) -> Result<Expr, ExprParseError> {
    let mut p = Parser::new(src)?;
    let e = p.expr()?;
    if p.peek().is_some() {
        return Err(p.err("trailing input after expression"));
    }
    Ok(e)
}

/// Parses a `;`-separated update list. Empty input yields no statements.
pub fn parse_updates(src: &str) -> Result<Vec<UpdateStmt>, ExprParseError> {
    let mut p = Parser::new(src)?;
    let mut stmts = Vec::new();
    loop {
        while p.eat_sym(";") {}
        if p.peek().is_none() {
            break;
        }
        stmts.push(p.update_stmt()?);
        if p.peek().is_some() && !matches!(p.peek(), Some(Tok::Sym(";"))) {
            return Err(p.err("expected `;` between update statements"));
        }
    }
    Ok(stmts)
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

/// Evaluation failure. The engine wraps these with statement context.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("unknown name `{0}`")]
    UnknownName(String),
    #[error("unknown thimac `{0}` in qualified reference")]
    UnknownThimac(String),
    #[error("`{thimac}.{name}` matches no variable and no stored attribute")]
    UnresolvedQualified { thimac: String, name: String },
    #[error("`{op}` needs {expected}, got {found}")]
    TypeMismatch { op: &'static str, expected: &'static str, found: &'static str },
    #[error("`{0}` is not a list")]
    NotAList(String),
    #[error("guard must yield a boolean, got {found}")]
    GuardNotBool { found: &'static str },
    #[error("`{0}` mutates state and cannot be used inside an expression")]
    NotPure(&'static str),
}

/// Name-resolution surface the evaluator works against. The engine
/// implements this over the flowing thing and the owning thimac chain.
pub trait Env {
    /// Attribute of the flowing thing (or trigger context), if present.
    fn read_attr(&self, name: &str) -> Option<Value>;
    /// Variable visible on the owning thimac chain, if declared.
    fn read_var(&self, name: &str) -> Option<Value>;
    /// `Thimac.name` resolution; see module docs.
    fn read_qualified(&self, thimac: &str, name: &str) -> Result<Value, EvalError>;
    /// Create-or-overwrite an attribute on the flowing thing.
    fn write_attr(&mut self, name: &str, value: Value);
    /// Overwrite a declared chain variable; false when not declared.
    fn write_var(&mut self, name: &str, value: Value) -> bool;
}

fn int(v: &Value, op: &'static str) -> Result<i64, EvalError> {
    match v {
        Value::Int(n) => Ok(*n),
        other => Err(EvalError::TypeMismatch { op, expected: "int", found: other.kind() }),
    }
}

/// Evaluates a pure expression.
pub fn eval(expr: &Expr, env: &dyn Env) -> Result<Value, EvalError> {
    match expr {
        Expr::Int(n) => Ok(Value::Int(*n)),
        Expr::Ref(name) => env
            .read_attr(name)
            .or_else(|| env.read_var(name))
            .ok_or_else(|| EvalError::UnknownName(name.clone())),
        Expr::Qualified(t, n) => env.read_qualified(t, n),
        Expr::Binary(op, lhs, rhs) => {
            let l = eval(lhs, env)?;
            let r = eval(rhs, env)?;
            match op {
                BinOp::Add => Ok(Value::Int(int(&l, "+")?.wrapping_add(int(&r, "+")?))),
                BinOp::Sub => Ok(Value::Int(int(&l, "-")?.wrapping_sub(int(&r, "-")?))),
                BinOp::Gt => Ok(Value::Bool(int(&l, ">")? > int(&r, ">")?)),
                BinOp::Lt => Ok(Value::Bool(int(&l, "<")? < int(&r, "<")?)),
                BinOp::Ge => Ok(Value::Bool(int(&l, ">=")? >= int(&r, ">=")?)),
                BinOp::Le => Ok(Value::Bool(int(&l, "<=")? <= int(&r, "<=")?)),
                BinOp::Eq => Ok(Value::Bool(l == r)),
                BinOp::Ne => Ok(Value::Bool(l != r)),
            }
        }
        Expr::Call(b, args) => match b {
            Builtin::Contains => {
                let list = eval(&args[0], env)?;
                let needle = eval(&args[1], env)?;
                match list {
                    Value::List(items) => Ok(Value::Bool(items.contains(&needle))),
                    other => Err(EvalError::TypeMismatch {
                        op: "contains",
                        expected: "list",
                        found: other.kind(),
                    }),
                }
            }
            Builtin::Len => match eval(&args[0], env)? {
                Value::List(items) => Ok(Value::Int(items.len() as i64)),
                other => Err(EvalError::TypeMismatch {
                    op: "len",
                    expected: "list",
                    found: other.kind(),
                }),
            },
            Builtin::Not => match eval(&args[0], env)? {
                Value::Bool(b) => Ok(Value::Bool(!b)),
                other => Err(EvalError::TypeMismatch {
                    op: "not",
                    expected: "bool",
                    found: other.kind(),
                }),
            },
            Builtin::Has => match &args[0] {
                Expr::Ref(name) => Ok(Value::Bool(
                    env.read_attr(name).is_some() || env.read_var(name).is_some(),
                )),
                _ => Err(EvalError::TypeMismatch {
                    op: "has",
                    expected: "a bare name",
                    found: "expression",
                }),
            },
            Builtin::Append => Err(EvalError::NotPure("append")),
            Builtin::RemoveFirst => Err(EvalError::NotPure("remove_first")),
        },
    }
}

/// Evaluates a guard; the result must be boolean.
pub fn eval_guard(expr: &Expr, env: &dyn Env) -> Result<bool, EvalError> {
    match eval(expr, env)? {
        Value::Bool(b) => Ok(b),
        other => Err(EvalError::GuardNotBool { found: other.kind() }),
    }
}

/// Writes through the documented resolution order: existing attribute,
/// existing chain variable, else a fresh attribute.
fn assign(env: &mut dyn Env, name: &str, value: Value) {
    if env.read_attr(name).is_some() {
        env.write_attr(name, value);
    } else if env.read_var(name).is_some() {
        env.write_var(name, value);
    } else {
        env.write_attr(name, value);
    }
}

/// Reads the list named by `name` (attribute-first, like any bare read),
/// applies `f`, and writes it back to the same slot.
fn mutate_list(
    env: &mut dyn Env,
    name: &str,
    f: impl FnOnce(&mut Vec<Value>),
) -> Result<(), EvalError> {
    let from_attr = env.read_attr(name).is_some();
    let current = if from_attr {
        env.read_attr(name)
    } else {
        env.read_var(name)
    }
    .ok_or_else(|| EvalError::UnknownName(name.to_string()))?;
    let mut items = match current {
        Value::List(items) => items,
        _ => return Err(EvalError::NotAList(name.to_string())),
    };
    f(&mut items);
    if from_attr {
        env.write_attr(name, Value::List(items));
    } else {
        env.write_var(name, Value::List(items));
    }
    Ok(())
}

/// Executes one update statement.
pub fn exec_update(stmt: &UpdateStmt, env: &mut dyn Env) -> Result<(), EvalError> {
    match stmt {
        UpdateStmt::Assign(name, e) => {
            let v = eval(e, env)?;
            assign(env, name, v);
            Ok(())
        }
        UpdateStmt::Call(b, args) => {
            let name = match &args[0] {
                Expr::Ref(n) => n.clone(),
                _ => unreachable!("parser guarantees a list name"),
            };
            let v = eval(&args[1], env)?;
            match b {
                Builtin::Append => mutate_list(env, &name, |items| items.push(v)),
                Builtin::RemoveFirst => mutate_list(env, &name, |items| {
                    if let Some(i) = items.iter().position(|x| *x == v) {
                        items.remove(i);
                    }
                }),
                _ => unreachable!("parser only admits mutating builtins"),
            }
        }
    }
}

/// Executes update statements in order, stopping at the first failure.
pub fn exec_updates(stmts: &[UpdateStmt], env: &mut dyn Env) -> Result<(), EvalError> {
    for s in stmts {
        exec_update(s, env)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
