//! Lowers a parsed model tree into a validated [`Bundle`].
//!
//! Lowering assigns arc identifiers (`f1`, `f2`, … for flows, `t1`, … for
//! triggers, in declaration order), parses guard and update strings into
//! expression trees, derives each event's region arcs (every arc whose two
//! endpoints are listed region nodes), and runs full bundle validation.
//! Validation diagnostics are re-anchored to source positions wherever the
//! offending element has a declaration site.
//!
//! Errors mean no bundle; warnings ride along with a good bundle. Two
//! advisory patterns are warned about: a trigger connecting two nodes of
//! the same machine (sequencing inside a machine is normally a flow), and
//! updates on release/transfer/receive stages (updates only run on create
//! and process).

use std::collections::BTreeMap;

use crate::diag::{has_errors, DiagCode, DiagLoc, Diagnostic, Severity};
use crate::expr;
use crate::model::{
    validate_bundle, ActionKind, ActionNode, ArcId, BehaviorEdge, BehaviorModel, Bundle,
    CompositeEvent, ConstraintSpec, EventDef, EventId, FlowArc, NodeId, Notation, Region,
    StaticModel, Thimac, ThimacId, TriggerArc, VarDecl, VarInit,
};

use super::ast::*;

/// A lowered bundle plus the advisory diagnostics produced on the way.
#[derive(Debug, Clone)]
pub struct LowerOutput {
    pub bundle: Bundle,
    pub warnings: Vec<Diagnostic>,
}

fn loc(pos: Pos) -> DiagLoc {
    DiagLoc::pos(pos.line, pos.col)
}

struct Lowering {
    bundle: Bundle,
    errors: Vec<Diagnostic>,
    warnings: Vec<Diagnostic>,
    /// Declaration site of each element id, for re-anchoring diagnostics.
    sites: BTreeMap<String, Pos>,
}

impl Lowering {
    fn site(&mut self, id: &str, pos: Pos) {
        self.sites.entry(id.to_string()).or_insert(pos);
    }

    fn thimac(&mut self, decl: &ThimacDecl, parent: Option<&str>) {
        self.site(&decl.name, decl.pos);
        let mut thimac = Thimac {
            id: ThimacId::new(&decl.name),
            name: decl.name.clone(),
            parent: parent.map(ThimacId::new),
            has_storage: false,
            variables: Vec::new(),
        };
        let mut stages = Vec::new();
        let mut children = Vec::new();
        for item in &decl.items {
            match item {
                ThimacItem::Storage(_) => thimac.has_storage = true,
                ThimacItem::Var { name, value, .. } => thimac.variables.push(VarDecl {
                    name: name.clone(),
                    init: VarInit::Int(*value),
                }),
                ThimacItem::List { name, .. } => thimac.variables.push(VarDecl {
                    name: name.clone(),
                    init: VarInit::EmptyList,
                }),
                ThimacItem::Stage(s) => stages.push(s),
                ThimacItem::Child(c) => children.push(c),
            }
        }
        self.bundle.model.thimacs.push(thimac);
        for s in stages {
            self.stage(s, &decl.name);
        }
        for c in children {
            self.thimac(c, Some(&decl.name));
        }
    }

    fn stage(&mut self, s: &StageDecl, owner: &str) {
        self.site(&s.id, s.pos);
        let updates = match &s.updates {
            None => Vec::new(),
            Some(text) => match expr::parse_updates(text) {
                Ok(u) => u,
                Err(e) => {
                    self.errors.push(Diagnostic::error(
                        DiagCode::ExprSyntax,
                        loc(s.pos),
                        format!("in updates of stage `{}`: {}", s.id, e.message),
                    ));
                    Vec::new()
                }
            },
        };
        if !updates.is_empty()
            && matches!(
                s.kind,
                ActionKind::Release | ActionKind::Transfer | ActionKind::Receive
            )
        {
            self.warnings.push(Diagnostic::warning(
                DiagCode::UpdatesIgnored,
                loc(s.pos),
                format!(
                    "updates on {} stage `{}` never run; updates run on create and \
                     process stages",
                    s.kind, s.id
                ),
            ));
        }
        self.bundle.model.nodes.push(ActionNode {
            id: NodeId::new(&s.id),
            owner: ThimacId::new(owner),
            kind: s.kind,
            label: s.label.clone().unwrap_or_default(),
            updates,
            emits: s.emits.clone(),
        });
    }

    fn finish(mut self, ast: &ModelAst) -> Result<LowerOutput, Vec<Diagnostic>> {
        // Arcs, events, composites, behavior, constraints — in declaration
        // order so generated ids are stable.
        let mut flow_n = 0usize;
        let mut trigger_n = 0usize;
        let mut behavior_seen = false;
        for d in &ast.decls {
            match d {
                Decl::Thimac(_) => {}
                Decl::Flow(f) => {
                    flow_n += 1;
                    let id = format!("f{flow_n}");
                    self.site(&id, f.pos);
                    self.bundle.model.flows.push(FlowArc {
                        id: ArcId::new(id),
                        from: NodeId::new(&f.from),
                        to: NodeId::new(&f.to),
                    });
                }
                Decl::Trigger(t) => {
                    trigger_n += 1;
                    let id = format!("t{trigger_n}");
                    self.site(&id, t.pos);
                    let guard = match &t.when {
                        None => None,
                        Some(text) => match expr::parse_expr(text) {
                            Ok(e) => Some(e),
                            Err(e) => {
                                self.errors.push(Diagnostic::error(
                                    DiagCode::ExprSyntax,
                                    loc(t.pos),
                                    format!(
                                        "in guard of trigger `{} -> {}`: {}",
                                        t.from, t.to, e.message
                                    ),
                                ));
                                None
                            }
                        },
                    };
                    self.bundle.model.triggers.push(TriggerArc {
                        id: ArcId::new(id),
                        from: NodeId::new(&t.from),
                        to: NodeId::new(&t.to),
                        guard,
                    });
                }
                Decl::Event(e) => {
                    self.site(&e.id, e.pos);
                    let nodes: std::collections::BTreeSet<NodeId> =
                        e.nodes.iter().map(|n| NodeId::new(n)).collect();
                    let mut arcs = std::collections::BTreeSet::new();
                    for f in &self.bundle.model.flows {
                        if nodes.contains(&f.from) && nodes.contains(&f.to) {
                            arcs.insert(f.id.clone());
                        }
                    }
                    for t in &self.bundle.model.triggers {
                        if nodes.contains(&t.from) && nodes.contains(&t.to) {
                            arcs.insert(t.id.clone());
                        }
                    }
                    self.bundle.events.push(EventDef {
                        id: EventId::new(&e.id),
                        label: e.label.clone().unwrap_or_default(),
                        params: e.params.clone(),
                        region: Region { nodes, arcs },
                    });
                }
                Decl::Composite(c) => {
                    self.site(&c.id, c.pos);
                    self.bundle.composites.push(CompositeEvent {
                        id: EventId::new(&c.id),
                        members: c.members.iter().map(|m| EventId::new(m)).collect(),
                        shared: c.sharing.clone(),
                    });
                }
                Decl::Behavior(b) => {
                    if behavior_seen {
                        self.errors.push(Diagnostic::error(
                            DiagCode::DuplicateId,
                            loc(b.pos),
                            "a model has at most one behavior block",
                        ));
                        continue;
                    }
                    behavior_seen = true;
                    let mut events = std::collections::BTreeSet::new();
                    let mut edges = Vec::new();
                    for e in &b.edges {
                        events.insert(EventId::new(&e.from));
                        events.insert(EventId::new(&e.to));
                        edges.push(BehaviorEdge {
                            from: EventId::new(&e.from),
                            to: EventId::new(&e.to),
                            repeatable: !e.norepeat,
                        });
                    }
                    self.bundle.behavior = Some(BehaviorModel { events, edges });
                }
                Decl::Constraint(c) => {
                    self.site(&c.id, c.pos);
                    let spec = match &c.body {
                        ConstraintBody::Binding(comp) => ConstraintSpec::Binding {
                            id: c.id.clone(),
                            composite: EventId::new(comp),
                        },
                        ConstraintBody::Succession(first, second) => {
                            ConstraintSpec::ImmediateSuccession {
                                id: c.id.clone(),
                                first: EventId::new(first),
                                second: EventId::new(second),
                            }
                        }
                        ConstraintBody::AtMostOnce { composite, key } => {
                            ConstraintSpec::AtMostOnce {
                                id: c.id.clone(),
                                composite: EventId::new(composite),
                                key: key.clone(),
                            }
                        }
                    };
                    self.bundle.constraints.push(spec);
                }
            }
        }

        // Full validation, re-anchored to declaration sites where known.
        for d in validate_bundle(&self.bundle) {
            let relocated = match &d.loc {
                DiagLoc::Element(id) => self.sites.get(id).map(|p| loc(*p)),
                DiagLoc::Pos { .. } => None,
            };
            let mut d = d;
            if let Some(l) = relocated {
                d.loc = l;
            }
            match d.severity {
                Severity::Error => self.errors.push(d),
                Severity::Warning => self.warnings.push(d),
            }
        }

        // Same-machine triggers work, but sequencing inside one machine is
        // normally drawn as a flow; point them out.
        for t in &self.bundle.model.triggers {
            let (Some(from), Some(to)) =
                (self.bundle.model.node(&t.from), self.bundle.model.node(&t.to))
            else {
                continue;
            };
            if from.owner == to.owner {
                self.warnings.push(Diagnostic::warning(
                    DiagCode::SameMachineTrigger,
                    self.sites
                        .get(t.id.as_str())
                        .map(|p| loc(*p))
                        .unwrap_or_else(|| DiagLoc::element(t.id.as_str())),
                    format!(
                        "trigger `{}` connects `{}` and `{}` inside the same machine `{}`",
                        t.id, from.id, to.id, from.owner
                    ),
                ));
            }
        }

        if has_errors(&self.errors) {
            let mut all = self.errors;
            all.extend(self.warnings);
            Err(all)
        } else {
            Ok(LowerOutput { bundle: self.bundle, warnings: self.warnings })
        }
    }
}

/// Lowers a parsed tree into a validated bundle.
pub fn lower(ast: &ModelAst) -> Result<LowerOutput, Vec<Diagnostic>> {
    let mut lw = Lowering {
        bundle: Bundle {
            model: StaticModel {
                notation: Notation::Simplified,
                ..StaticModel::default()
            },
            ..Bundle::default()
        },
        errors: Vec::new(),
        warnings: Vec::new(),
        sites: BTreeMap::new(),
    };
    for d in &ast.decls {
        if let Decl::Thimac(t) = d {
            lw.thimac(t, None);
        }
    }
    lw.finish(ast)
}

/// Parses and lowers model text in one step.
pub fn load_model(src: &str) -> Result<LowerOutput, Vec<Diagnostic>> {
    let ast = super::parser::parse_model(src)?;
    lower(&ast)
}
