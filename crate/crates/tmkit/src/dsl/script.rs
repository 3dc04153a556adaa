//! Parser for script files: the statements that drive a model.
//!
//! Scripts are line-oriented. A statement is one of:
//!
//! - `Create Airplane=A380` — put an instance into a thimac's store,
//!   optionally with attributes: `Create Flight=Flight1.FlightNo=3825`
//!   (on an existing instance this sets the attributes instead).
//! - `Create Airplane A380. NoSeats=300` — set attributes on an existing
//!   instance (the space form).
//! - `Create.Person=Person1.Name=Michael.release.transfer→Flight=Flight1.
//!   FlightNo=3825.Transfer.Receive` — inject a new thing at the source
//!   thimac and let it flow. Dotted segments after the source are
//!   attribute assignments (`a=v`) or stage tokens (action-kind words or
//!   node names); the part after the arrow addresses the destination.
//! - `OrderStore.c=C1.pDel→Customer.pRecv` — pull a stored thing back out
//!   and let it flow (no leading `Create.`).
//! - `Trigger Event E2` — fire an event's region directly, optionally with
//!   a payload: `Trigger Event E0 (d=D9)`.
//! - `If E3 print "OK"` — print iff the event occurred at the most recent
//!   step that produced any occurrence. The message may also be unquoted:
//!   `If E4 print rejection message`.
//!
//! `E1:` alone on a line is a label and is skipped. Comments are
//! `/* … */` and may span lines. A line ending in `.`, `→`, or `->`
//! continues onto the next line (unless the next line starts a new
//! statement).

use crate::diag::{DiagCode, DiagLoc, Diagnostic};
use crate::expr::Value;

use super::ast::Pos;

#[derive(Debug, Clone, PartialEq)]
pub struct Script {
    pub statements: Vec<Statement>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Statement {
    /// `Create T=inst` or `Create T=inst.A=v…` — create the instance, or
    /// set attributes when it already exists and attributes are given.
    CreateInstance {
        pos: Pos,
        thimac: String,
        instance: String,
        attrs: Vec<(String, Value)>,
    },
    /// `Create T inst. A=v…` — set attributes on an existing instance.
    SetAttrs {
        pos: Pos,
        thimac: String,
        instance: String,
        attrs: Vec<(String, Value)>,
    },
    Flow(FlowStmt),
    /// `Trigger Event E (a=v, …)`
    TriggerEvent {
        pos: Pos,
        event: String,
        attrs: Vec<(String, Value)>,
    },
    /// `If E print <message>`
    ConditionalPrint {
        pos: Pos,
        event: String,
        message: String,
    },
}

impl Statement {
    pub fn pos(&self) -> Pos {
        match self {
            Statement::CreateInstance { pos, .. }
            | Statement::SetAttrs { pos, .. }
            | Statement::TriggerEvent { pos, .. }
            | Statement::ConditionalPrint { pos, .. } => *pos,
            Statement::Flow(f) => f.pos,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowStmt {
    pub pos: Pos,
    /// True for `Create.…` (inject a fresh thing); false pulls a stored
    /// thing back out of the source thimac's store.
    pub create: bool,
    pub source_thimac: String,
    pub source_instance: Option<String>,
    /// Payload attributes (create) or storage-match attributes (pull).
    pub attrs: Vec<(String, Value)>,
    /// Stage tokens after the source: action-kind words are advisory,
    /// node names select the entry node.
    pub source_stages: Vec<String>,
    pub target: Option<FlowTarget>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowTarget {
    pub thimac: String,
    pub instance: Option<String>,
    pub match_attrs: Vec<(String, Value)>,
    pub stages: Vec<String>,
}

// ---------------------------------------------------------------------------
// Text preparation
// ---------------------------------------------------------------------------

/// Blanks out `/* … */` comments (keeping newlines so line numbers stay
/// true) without touching string contents.
fn strip_comments(src: &str, diags: &mut Vec<Diagnostic>) -> String {
    let chars: Vec<char> = src.chars().collect();
    let mut out = String::with_capacity(src.len());
    let mut i = 0;
    let mut line = 1u32;
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            line += 1;
        }
        if c == '"' {
            // Copy the whole string literal verbatim.
            out.push(c);
            i += 1;
            while i < chars.len() {
                let c = chars[i];
                out.push(c);
                i += 1;
                if c == '\\' && i < chars.len() {
                    out.push(chars[i]);
                    i += 1;
                } else if c == '"' {
                    break;
                } else if c == '\n' {
                    line += 1;
                }
            }
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'*') {
            let open_line = line;
            i += 2;
            let mut closed = false;
            while i < chars.len() {
                if chars[i] == '*' && chars.get(i + 1) == Some(&'/') {
                    i += 2;
                    closed = true;
                    break;
                }
                if chars[i] == '\n' {
                    out.push('\n');
                    line += 1;
                }
                i += 1;
            }
            if !closed {
                diags.push(Diagnostic::error(
                    DiagCode::Syntax,
                    DiagLoc::pos(open_line, 1),
                    "comment opened here is never closed",
                ));
            }
            continue;
        }
        out.push(c);
        i += 1;
    }
    out
}

fn is_label(line: &str) -> bool {
    let Some(name) = line.strip_suffix(':') else { return false };
    !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

fn first_word(line: &str) -> &str {
    line.split_whitespace().next().unwrap_or("")
}

fn starts_new_statement(line: &str) -> bool {
    let line = line.trim();
    line.is_empty()
        || is_label(line)
        || matches!(first_word(line), "Create" | "Trigger" | "If")
        || line.starts_with("Create.")
}

/// Joins continuation lines: a line ending in an arrow always continues;
/// a line ending in `.` continues unless the next line opens a new
/// statement.
fn logical_lines(text: &str) -> Vec<(u32, String)> {
    let physical: Vec<&str> = text.lines().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < physical.len() {
        let start = (i + 1) as u32;
        let mut joined = physical[i].trim_end().to_string();
        i += 1;
        loop {
            let arrow = joined.ends_with("->") || joined.ends_with('→');
            let dot = joined.ends_with('.');
            if !(arrow || dot) || i >= physical.len() {
                break;
            }
            let next = physical[i];
            if dot && !arrow && starts_new_statement(next) {
                break;
            }
            joined.push_str(next.trim());
            joined = joined.trim_end().to_string();
            i += 1;
        }
        out.push((start, joined));
    }
    out
}

// ---------------------------------------------------------------------------
// Statement parsing
// ---------------------------------------------------------------------------

/// Splits on `sep`, ignoring separators inside quoted strings.
fn split_top(s: &str, sep: char) -> Vec<String> {
    let mut parts = Vec::new();
    let mut cur = String::new();
    let mut chars = s.chars().peekable();
    let mut in_str = false;
    while let Some(c) = chars.next() {
        if in_str {
            cur.push(c);
            if c == '\\' {
                if let Some(&n) = chars.peek() {
                    cur.push(n);
                    chars.next();
                }
            } else if c == '"' {
                in_str = false;
            }
        } else if c == '"' {
            in_str = true;
            cur.push(c);
        } else if c == sep {
            parts.push(cur.clone());
            cur.clear();
        } else {
            cur.push(c);
        }
    }
    parts.push(cur);
    parts
}

/// Finds the first `→` or `->` outside of quotes and splits there.
fn split_arrow(s: &str) -> (String, Option<String>) {
    let chars: Vec<char> = s.chars().collect();
    let mut in_str = false;
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if in_str {
            if c == '\\' {
                i += 1;
            } else if c == '"' {
                in_str = false;
            }
        } else if c == '"' {
            in_str = true;
        } else if c == '→' {
            let left: String = chars[..i].iter().collect();
            let right: String = chars[i + 1..].iter().collect();
            return (left, Some(right));
        } else if c == '-' && chars.get(i + 1) == Some(&'>') {
            let left: String = chars[..i].iter().collect();
            let right: String = chars[i + 2..].iter().collect();
            return (left, Some(right));
        }
        i += 1;
    }
    (s.to_string(), None)
}

fn unescape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            match chars.next() {
                Some('"') => out.push('"'),
                Some('\\') => out.push('\\'),
                Some('n') => out.push('\n'),
                Some('t') => out.push('\t'),
                Some(other) => {
                    out.push('\\');
                    out.push(other);
                }
                None => out.push('\\'),
            }
        } else {
            out.push(c);
        }
    }
    out
}

fn parse_value(tok: &str) -> Value {
    let tok = tok.trim();
    if tok.len() >= 2 && tok.starts_with('"') && tok.ends_with('"') {
        return Value::Text(unescape(&tok[1..tok.len() - 1]));
    }
    if let Ok(n) = tok.parse::<i64>() {
        if tok.chars().next().is_some_and(|c| c.is_ascii_digit() || c == '-') {
            return Value::Int(n);
        }
    }
    Value::Text(tok.to_string())
}

struct LineParser<'d> {
    line_no: u32,
    diags: &'d mut Vec<Diagnostic>,
}

impl LineParser<'_> {
    fn err(&mut self, message: impl Into<String>) {
        self.diags.push(Diagnostic::error(
            DiagCode::Syntax,
            DiagLoc::pos(self.line_no, 1),
            message,
        ));
    }

    fn pos(&self) -> Pos {
        Pos::new(self.line_no, 1)
    }

    fn attr_pair(&mut self, seg: &str) -> Option<(String, Value)> {
        let (name, value) = seg.split_once('=')?;
        let name = name.trim();
        if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            self.err(format!("`{seg}` is not a valid attribute assignment"));
            return None;
        }
        Some((name.to_string(), parse_value(value)))
    }

    /// `Create T=inst[.A=v…]` and `Create T inst. A=v…`
    fn create_forms(&mut self, rest: &str) -> Option<Statement> {
        let rest = rest.trim();
        if rest.is_empty() {
            self.err("`Create` needs a thimac and an instance, like `Create Airplane=A380`");
            return None;
        }
        let first_tok = first_word(rest);
        if first_tok.contains('=') {
            // Dotted form: Create T=inst.A=v…
            if rest.split_whitespace().nth(1).is_some() {
                self.err(format!(
                    "unexpected text after `{first_tok}`; attributes attach with `.`, \
                     like `Create Flight=Flight1.FlightNo=3825`"
                ));
                return None;
            }
            let segs: Vec<String> = split_top(rest, '.')
                .into_iter()
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty())
                .collect();
            let (thimac, instance) = segs[0].split_once('=')?;
            let (thimac, instance) = (thimac.trim().to_string(), instance.trim().to_string());
            if thimac.is_empty() || instance.is_empty() {
                self.err(format!("`{}` is not a valid `Thimac=Instance`", segs[0]));
                return None;
            }
            let mut attrs = Vec::new();
            for seg in &segs[1..] {
                if !seg.contains('=') {
                    self.err(format!(
                        "`{seg}` is not an attribute assignment; expected `name=value`"
                    ));
                    return None;
                }
                attrs.push(self.attr_pair(seg)?);
            }
            Some(Statement::CreateInstance { pos: self.pos(), thimac, instance, attrs })
        } else {
            // Space form: Create T inst. A=v…
            let mut toks = rest.split_whitespace();
            let thimac = toks.next().unwrap_or("").to_string();
            let Some(instance_tok) = toks.next() else {
                self.err(format!(
                    "`Create {thimac}` needs an instance, like `Create {thimac}=Name`"
                ));
                return None;
            };
            let instance = instance_tok.trim_end_matches('.').to_string();
            let mut attrs = Vec::new();
            for tok in toks {
                for piece in split_top(tok, '.') {
                    let piece = piece.trim();
                    if piece.is_empty() {
                        continue;
                    }
                    if !piece.contains('=') {
                        self.err(format!(
                            "`{piece}` is not an attribute assignment; expected `name=value`"
                        ));
                        return None;
                    }
                    attrs.push(self.attr_pair(piece)?);
                }
            }
            if attrs.is_empty() {
                self.err(format!(
                    "`Create {thimac} {instance}` sets attributes on an existing instance \
                     and needs at least one `name=value`"
                ));
                return None;
            }
            Some(Statement::SetAttrs { pos: self.pos(), thimac, instance, attrs })
        }
    }

    fn trigger_event(&mut self, rest: &str) -> Option<Statement> {
        let rest = rest.trim();
        let Some(rest) = rest.strip_prefix("Event") else {
            self.err("expected `Trigger Event <name>`");
            return None;
        };
        let rest = rest.trim();
        let (event, payload) = match rest.split_once('(') {
            Some((event, tail)) => {
                let Some(inner) = tail.trim_end().strip_suffix(')') else {
                    self.err("payload opened with `(` but never closed");
                    return None;
                };
                (event.trim(), Some(inner))
            }
            None => (rest, None),
        };
        if event.is_empty() || event.split_whitespace().nth(1).is_some() {
            self.err("expected `Trigger Event <name>`");
            return None;
        }
        let mut attrs = Vec::new();
        if let Some(inner) = payload {
            for piece in split_top(inner, ',') {
                let piece = piece.trim();
                if piece.is_empty() {
                    continue;
                }
                if !piece.contains('=') {
                    self.err(format!(
                        "`{piece}` is not an attribute assignment; expected `name=value`"
                    ));
                    return None;
                }
                attrs.push(self.attr_pair(piece)?);
            }
        }
        Some(Statement::TriggerEvent {
            pos: self.pos(),
            event: event.to_string(),
            attrs,
        })
    }

    fn conditional_print(&mut self, rest: &str) -> Option<Statement> {
        let rest = rest.trim();
        let Some(event) = rest.split_whitespace().next() else {
            self.err("expected `If <event> print <message>`");
            return None;
        };
        let after_event = rest[event.len()..].trim_start();
        let Some(message_part) = after_event.strip_prefix("print") else {
            self.err("expected `print` after the event name");
            return None;
        };
        let message_part = message_part.trim();
        let message = if message_part.starts_with('"') {
            let inner = &message_part[1..];
            let Some(end) = find_string_end(inner) else {
                self.err("message string is never closed");
                return None;
            };
            if !inner[end + 1..].trim().is_empty() {
                self.err("unexpected text after the message string");
                return None;
            }
            unescape(&inner[..end])
        } else if message_part.is_empty() {
            self.err("`print` needs a message");
            return None;
        } else {
            message_part.to_string()
        };
        Some(Statement::ConditionalPrint {
            pos: self.pos(),
            event: event.to_string(),
            message,
        })
    }

    /// Shared by the `Create.` and pull forms.
    fn flow(&mut self, line: &str, create: bool) -> Option<Statement> {
        let (src_part, tgt_part) = split_arrow(line);
        if let Some(t) = &tgt_part {
            if split_arrow(t).1.is_some() {
                self.err("a flow statement has at most one arrow");
                return None;
            }
        }
        let (source_thimac, source_instance, attrs, source_stages) =
            self.flow_side(&src_part, create)?;
        let target = match tgt_part {
            Some(t) => {
                let (thimac, instance, match_attrs, stages) = self.flow_side(&t, false)?;
                Some(FlowTarget { thimac, instance, match_attrs, stages })
            }
            None => None,
        };
        Some(Statement::Flow(FlowStmt {
            pos: self.pos(),
            create,
            source_thimac,
            source_instance,
            attrs,
            source_stages,
            target,
        }))
    }

    #[allow(clippy::type_complexity)]
    fn flow_side(
        &mut self,
        part: &str,
        drop_create: bool,
    ) -> Option<(String, Option<String>, Vec<(String, Value)>, Vec<String>)> {
        let mut segs: Vec<String> = split_top(part, '.')
            .into_iter()
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect();
        if drop_create {
            if segs.first().map(String::as_str) != Some("Create") {
                self.err("expected the statement to start with `Create.`");
                return None;
            }
            segs.remove(0);
        }
        let Some(head) = segs.first() else {
            self.err("expected a thimac name");
            return None;
        };
        for seg in &segs {
            if seg.split_whitespace().nth(1).is_some() && !seg.contains('"') {
                self.err(format!("unrecognized statement near `{seg}`"));
                return None;
            }
        }
        let (thimac, instance) = match head.split_once('=') {
            Some((t, i)) => (t.trim().to_string(), Some(i.trim().to_string())),
            None => (head.clone(), None),
        };
        if thimac.is_empty() {
            self.err(format!("`{head}` is not a valid thimac reference"));
            return None;
        }
        let mut attrs = Vec::new();
        let mut stages = Vec::new();
        for seg in &segs[1..] {
            if seg.contains('=') {
                attrs.push(self.attr_pair(seg)?);
            } else {
                stages.push(seg.clone());
            }
        }
        Some((thimac, instance, attrs, stages))
    }
}

/// Index of the closing quote in `s` (which starts just *after* an opening
/// quote), honoring backslash escapes.
fn find_string_end(s: &str) -> Option<usize> {
    let bytes: Vec<char> = s.chars().collect();
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            '\\' => i += 2,
            '"' => return Some(i),
            _ => i += 1,
        }
    }
    None
}

/// Parses a script. All problems are collected; any problem at all means
/// no script is returned.
pub fn parse_script(src: &str) -> Result<Script, Vec<Diagnostic>> {
    let mut diags = Vec::new();
    let text = strip_comments(src, &mut diags);
    let mut statements = Vec::new();

    for (line_no, line) in logical_lines(&text) {
        let line = line.trim();
        if line.is_empty() || is_label(line) {
            continue;
        }
        let mut p = LineParser { line_no, diags: &mut diags };
        let stmt = if let Some(rest) = line.strip_prefix("Trigger") {
            if rest.starts_with(char::is_whitespace) {
                p.trigger_event(rest)
            } else {
                p.err(format!("unrecognized statement `{}`", first_word(line)));
                None
            }
        } else if let Some(rest) = line.strip_prefix("If") {
            if rest.starts_with(char::is_whitespace) {
                p.conditional_print(rest)
            } else {
                p.err(format!("unrecognized statement `{}`", first_word(line)));
                None
            }
        } else if line.starts_with("Create.") {
            p.flow(line, true)
        } else if let Some(rest) = line.strip_prefix("Create") {
            if rest.starts_with(char::is_whitespace) {
                p.create_forms(rest)
            } else {
                p.err(format!("unrecognized statement `{}`", first_word(line)));
                None
            }
        } else if line.contains('.') || split_arrow(line).1.is_some() {
            p.flow(line, false)
        } else {
            p.err(format!("unrecognized statement `{}`", first_word(line)));
            None
        };
        if let Some(stmt) = stmt {
            statements.push(stmt);
        }
    }

    if diags.is_empty() {
        Ok(Script { statements })
    } else {
        Err(diags)
    }
}
