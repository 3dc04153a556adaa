//! The Thinging Machine metamodel and its structural operations.
//!
//! A [`StaticModel`] holds thimacs, their action nodes, and the flow and
//! trigger arcs between them, in one of two notations: `canonical` (every
//! machine-to-machine hop spelled out as release → transfer → transfer →
//! receive) or `simplified` (those hops elided into a single arc).
//! [`canonicalize`] and [`simplify`] convert between the notations and are
//! mutually inverse on models without annotations on the elidable chain.
//!
//! A [`Bundle`] adds the dynamic layers: event definitions (regions of the
//! diagram), composite events, an optional behavior model (the chronology
//! graph), and constraint specifications.
//!
//! Validation collects [`Diagnostic`]s and never stops at the first problem;
//! the functions here report errors only (advisory warnings are the
//! business of the DSL lowering).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diag::{has_errors, DiagCode, DiagLoc, Diagnostic};
use crate::expr::{Expr, UpdateStmt, Value};

macro_rules! id_type {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(
            Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
        )]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn new(s: impl Into<String>) -> Self {
                $name(s.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                $name(s.to_string())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                $name(s)
            }
        }
    };
}

id_type!(
    /// Identifier of a thimac (thing/machine).
    ThimacId
);
id_type!(
    /// Identifier of an action node.
    NodeId
);
id_type!(
    /// Identifier of a flow or trigger arc.
    ArcId
);
id_type!(
    /// Identifier of an event or composite event.
    EventId
);

/// The five generic actions a thimac can perform on a thing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ActionKind {
    Create,
    Process,
    Release,
    Transfer,
    Receive,
}

pub const ACTION_KINDS: [ActionKind; 5] = [
    ActionKind::Create,
    ActionKind::Process,
    ActionKind::Release,
    ActionKind::Transfer,
    ActionKind::Receive,
];

impl ActionKind {
    pub fn name(self) -> &'static str {
        match self {
            ActionKind::Create => "create",
            ActionKind::Process => "process",
            ActionKind::Release => "release",
            ActionKind::Transfer => "transfer",
            ActionKind::Receive => "receive",
        }
    }

    /// Case-insensitive kind lookup, used for DSL stage declarations and the
    /// advisory stage tokens of script flow paths.
    pub fn from_token(token: &str) -> Option<Self> {
        ACTION_KINDS
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(token))
    }
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Initial value of a thimac variable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarInit {
    Int(i64),
    EmptyList,
}

impl VarInit {
    pub fn value(&self) -> Value {
        match self {
            VarInit::Int(n) => Value::Int(*n),
            VarInit::EmptyList => Value::List(Vec::new()),
        }
    }
}

/// A variable declared on a thimac (e.g. the occupied-seat counter).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VarDecl {
    pub name: String,
    pub init: VarInit,
}

/// A thing/machine dual: the unit of modularity. `has_storage` marks the
/// instance store (drawn as a cylinder); `parent` nests sub-thimacs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thimac {
    pub id: ThimacId,
    pub name: String,
    pub parent: Option<ThimacId>,
    pub has_storage: bool,
    pub variables: Vec<VarDecl>,
}

/// One action stage inside a thimac. `updates` run when the node fires (on
/// create/process nodes); `emits` is a message published on firing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionNode {
    pub id: NodeId,
    pub owner: ThimacId,
    pub kind: ActionKind,
    #[serde(default)]
    pub label: String,
    #[serde(default)]
    pub updates: Vec<UpdateStmt>,
    #[serde(default)]
    pub emits: Option<String>,
}

/// A thing moves along flow arcs (solid arrows).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowArc {
    pub id: ArcId,
    pub from: NodeId,
    pub to: NodeId,
}

/// A firing node may start another node over a trigger arc (dashed arrow),
/// optionally gated by a boolean guard.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TriggerArc {
    pub id: ArcId,
    pub from: NodeId,
    pub to: NodeId,
    #[serde(default)]
    pub guard: Option<Expr>,
}

/// Which notation the model is written in. Flow legality depends on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Notation {
    Simplified,
    Canonical,
}

/// The structural layer: thimacs, nodes, and arcs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StaticModel {
    pub notation: Notation,
    pub thimacs: Vec<Thimac>,
    pub nodes: Vec<ActionNode>,
    pub flows: Vec<FlowArc>,
    pub triggers: Vec<TriggerArc>,
}

impl Default for StaticModel {
    fn default() -> Self {
        StaticModel {
            notation: Notation::Simplified,
            thimacs: Vec::new(),
            nodes: Vec::new(),
            flows: Vec::new(),
            triggers: Vec::new(),
        }
    }
}

impl StaticModel {
    pub fn thimac(&self, id: &ThimacId) -> Option<&Thimac> {
        self.thimacs.iter().find(|t| &t.id == id)
    }

    pub fn node(&self, id: &NodeId) -> Option<&ActionNode> {
        self.nodes.iter().find(|n| &n.id == id)
    }

    /// The thimac itself followed by its ancestors, innermost first.
    /// Stops silently on a dangling or cyclic parent (validation reports
    /// those separately).
    pub fn owner_chain(&self, id: &ThimacId) -> Vec<&Thimac> {
        let mut chain = Vec::new();
        let mut seen: BTreeSet<&ThimacId> = BTreeSet::new();
        let mut cur = self.thimac(id);
        while let Some(t) = cur {
            if !seen.insert(&t.id) {
                break;
            }
            chain.push(t);
            cur = t.parent.as_ref().and_then(|p| self.thimac(p));
        }
        chain
    }

    /// True when `id` equals `ancestor` or lies beneath it in the nesting.
    pub fn within(&self, id: &ThimacId, ancestor: &ThimacId) -> bool {
        self.owner_chain(id).iter().any(|t| &t.id == ancestor)
    }

    pub fn flows_from<'a>(&'a self, node: &'a NodeId) -> impl Iterator<Item = &'a FlowArc> + 'a {
        self.flows.iter().filter(move |a| &a.from == node)
    }

    pub fn triggers_from<'a>(
        &'a self,
        node: &'a NodeId,
    ) -> impl Iterator<Item = &'a TriggerArc> + 'a {
        self.triggers.iter().filter(move |a| &a.from == node)
    }
}

/// A connected subdiagram: the structural half of an event.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Region {
    pub nodes: BTreeSet<NodeId>,
    pub arcs: BTreeSet<ArcId>,
}

/// An event definition: a region plus the parameters an occurrence binds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventDef {
    pub id: EventId,
    #[serde(default)]
    pub label: String,
    #[serde(default)]
    pub params: Vec<String>,
    pub region: Region,
}

/// Several events fused into one atomic act, sharing variables.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompositeEvent {
    pub id: EventId,
    pub members: Vec<EventId>,
    pub shared: Vec<String>,
}

/// One chronology edge of the behavior model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BehaviorEdge {
    pub from: EventId,
    pub to: EventId,
    /// False marks an edge that may be taken at most once per binding.
    #[serde(default = "default_true")]
    pub repeatable: bool,
}

fn default_true() -> bool {
    true
}

/// The chronology graph over events.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BehaviorModel {
    pub events: BTreeSet<EventId>,
    pub edges: Vec<BehaviorEdge>,
}

/// A declared trace constraint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub enum ConstraintSpec {
    /// Whenever the composite's first member occurs, the remaining members
    /// must occur at the same step with agreeing shared variables.
    Binding { id: String, composite: EventId },
    /// Every occurrence of `first` is immediately followed in the trace by
    /// an occurrence of `second` agreeing on their common params.
    ImmediateSuccession { id: String, first: EventId, second: EventId },
    /// A complete composite occurrence must not repeat for the same key
    /// tuple once an end-marker for that key has occurred.
    AtMostOnce { id: String, composite: EventId, key: Vec<String> },
}

impl ConstraintSpec {
    pub fn id(&self) -> &str {
        match self {
            ConstraintSpec::Binding { id, .. } => id,
            ConstraintSpec::ImmediateSuccession { id, .. } => id,
            ConstraintSpec::AtMostOnce { id, .. } => id,
        }
    }
}

/// Everything the toolkit needs about one model: the static layer plus
/// events, composites, behavior, and constraints.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct Bundle {
    pub model: StaticModel,
    #[serde(default)]
    pub events: Vec<EventDef>,
    #[serde(default)]
    pub composites: Vec<CompositeEvent>,
    #[serde(default)]
    pub behavior: Option<BehaviorModel>,
    #[serde(default)]
    pub constraints: Vec<ConstraintSpec>,
}

impl Bundle {
    pub fn event(&self, id: &EventId) -> Option<&EventDef> {
        self.events.iter().find(|e| &e.id == id)
    }

    pub fn composite(&self, id: &EventId) -> Option<&CompositeEvent> {
        self.composites.iter().find(|c| &c.id == id)
    }
}

// ---------------------------------------------------------------------------
// Flow legality
// ---------------------------------------------------------------------------

/// The same-machine sequencing table. An arc (from, to) inside one machine
/// is legal iff the pair appears here.
pub const SAME_MACHINE_FLOWS: [(ActionKind, ActionKind); 7] = [
    (ActionKind::Transfer, ActionKind::Receive),
    (ActionKind::Receive, ActionKind::Process),
    (ActionKind::Receive, ActionKind::Release),
    (ActionKind::Process, ActionKind::Release),
    (ActionKind::Create, ActionKind::Process),
    (ActionKind::Create, ActionKind::Release),
    (ActionKind::Release, ActionKind::Transfer),
];

/// Decides whether a flow arc between nodes of the given kinds is legal.
///
/// Same-machine arcs follow [`SAME_MACHINE_FLOWS`] in both notations.
/// Across machines, canonical notation admits only transfer→transfer;
/// simplified notation additionally admits any arc between two
/// non-transfer nodes (the elided-chain shorthand).
pub fn flow_pair_legal(
    notation: Notation,
    same_machine: bool,
    from: ActionKind,
    to: ActionKind,
) -> bool {
    if same_machine {
        SAME_MACHINE_FLOWS.contains(&(from, to))
    } else if from == ActionKind::Transfer && to == ActionKind::Transfer {
        true
    } else {
        notation == Notation::Simplified
            && from != ActionKind::Transfer
            && to != ActionKind::Transfer
    }
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

fn err(code: DiagCode, loc: DiagLoc, msg: impl Into<String>) -> Diagnostic {
    Diagnostic::error(code, loc, msg)
}

/// Structural sanity only: unique ids, resolvable references, acyclic
/// nesting, no trigger self-loops. No flow-order or scope checks.
fn validate_structure(model: &StaticModel) -> Vec<Diagnostic> {
    let mut diags = Vec::new();

    let mut thimac_ids = BTreeSet::new();
    for t in &model.thimacs {
        if !thimac_ids.insert(&t.id) {
            diags.push(err(
                DiagCode::DuplicateId,
                DiagLoc::element(t.id.as_str()),
                format!("thimac `{}` is declared more than once", t.id),
            ));
        }
        let mut vars = BTreeSet::new();
        for v in &t.variables {
            if !vars.insert(&v.name) {
                diags.push(err(
                    DiagCode::DuplicateId,
                    DiagLoc::element(t.id.as_str()),
                    format!("variable `{}` is declared twice on thimac `{}`", v.name, t.id),
                ));
            }
        }
    }

    for t in &model.thimacs {
        if let Some(p) = &t.parent {
            if model.thimac(p).is_none() {
                diags.push(err(
                    DiagCode::UnknownThimac,
                    DiagLoc::element(t.id.as_str()),
                    format!("thimac `{}` names unknown parent `{p}`", t.id),
                ));
            }
        }
    }

    // Parent cycles: walk each chain with a visited set.
    for t in &model.thimacs {
        let mut seen = BTreeSet::new();
        let mut cur = Some(t);
        while let Some(x) = cur {
            if !seen.insert(&x.id) {
                if &x.id == &t.id {
                    diags.push(err(
                        DiagCode::ParentCycle,
                        DiagLoc::element(t.id.as_str()),
                        format!("thimac `{}` is its own ancestor", t.id),
                    ));
                }
                break;
            }
            cur = x.parent.as_ref().and_then(|p| model.thimac(p));
        }
    }

    let mut node_ids = BTreeSet::new();
    for n in &model.nodes {
        if !node_ids.insert(&n.id) {
            diags.push(err(
                DiagCode::DuplicateId,
                DiagLoc::element(n.id.as_str()),
                format!("node `{}` is declared more than once", n.id),
            ));
        }
        if model.thimac(&n.owner).is_none() {
            diags.push(err(
                DiagCode::UnknownThimac,
                DiagLoc::element(n.id.as_str()),
                format!("node `{}` belongs to unknown thimac `{}`", n.id, n.owner),
            ));
        }
    }

    let mut arc_ids = BTreeSet::new();
    let mut check_arc = |id: &ArcId, from: &NodeId, to: &NodeId, diags: &mut Vec<Diagnostic>| {
        if !arc_ids.insert(id.clone()) {
            diags.push(err(
                DiagCode::DuplicateId,
                DiagLoc::element(id.as_str()),
                format!("arc `{id}` is declared more than once"),
            ));
        }
        for end in [from, to] {
            if model.node(end).is_none() {
                diags.push(err(
                    DiagCode::UnknownNode,
                    DiagLoc::element(id.as_str()),
                    format!("arc `{id}` references unknown node `{end}`"),
                ));
            }
        }
    };
    for a in &model.flows {
        check_arc(&a.id, &a.from, &a.to, &mut diags);
    }
    for a in &model.triggers {
        check_arc(&a.id, &a.from, &a.to, &mut diags);
        if a.from == a.to {
            diags.push(err(
                DiagCode::TriggerLoop,
                DiagLoc::element(a.id.as_str()),
                format!("trigger `{}` starts and ends at node `{}`", a.id, a.from),
            ));
        }
    }

    diags
}

/// Collects every qualified thimac reference inside an expression.
fn qualified_refs<'e>(expr: &'e Expr, out: &mut Vec<&'e str>) {
    match expr {
        Expr::Qualified(t, _) => out.push(t),
        Expr::Binary(_, l, r) => {
            qualified_refs(l, out);
            qualified_refs(r, out);
        }
        Expr::Call(_, args) => {
            for a in args {
                qualified_refs(a, out);
            }
        }
        Expr::Int(_) | Expr::Ref(_) => {}
    }
}

/// Full structural well-formedness: structure, flow-order legality under
/// the model's notation, and update scope. Returns error diagnostics only
/// and never stops early.
pub fn validate_static_model(model: &StaticModel) -> Vec<Diagnostic> {
    let mut diags = validate_structure(model);

    for a in &model.flows {
        let (from, to) = match (model.node(&a.from), model.node(&a.to)) {
            (Some(f), Some(t)) => (f, t),
            _ => continue, // dangling endpoints already reported
        };
        let same = from.owner == to.owner;
        if !flow_pair_legal(model.notation, same, from.kind, to.kind) {
            let scope = if same { "inside one machine" } else { "across machines" };
            diags.push(err(
                DiagCode::FlowOrderViolation,
                DiagLoc::element(a.id.as_str()),
                format!(
                    "flow `{}` from {} `{}` to {} `{}` is not a legal sequence {scope}",
                    a.id, from.kind, from.id, to.kind, to.id
                ),
            ));
        }
    }

    // Updates may reach the flowing thing and the owner chain; a qualified
    // reference to a thimac outside that chain escapes the machine's scope.
    for n in &model.nodes {
        if model.thimac(&n.owner).is_none() {
            continue;
        }
        let chain: BTreeSet<&str> = model
            .owner_chain(&n.owner)
            .iter()
            .map(|t| t.id.as_str())
            .collect();
        for u in &n.updates {
            let mut refs = Vec::new();
            match u {
                UpdateStmt::Assign(_, e) => qualified_refs(e, &mut refs),
                UpdateStmt::Call(_, args) => {
                    for a in args {
                        qualified_refs(a, &mut refs);
                    }
                }
            }
            for r in refs {
                if !chain.contains(r) {
                    diags.push(err(
                        DiagCode::UpdateScope,
                        DiagLoc::element(n.id.as_str()),
                        format!(
                            "update on node `{}` references `{r}`, which is outside its \
                             owning chain",
                            n.id
                        ),
                    ));
                }
            }
        }
    }

    diags
}

/// A region is valid when it is non-empty, every referenced node and arc
/// exists, every arc stays inside the region, and the region is weakly
/// connected through its arcs.
pub fn check_region(region: &Region, model: &StaticModel) -> bool {
    if region.nodes.is_empty() {
        return false;
    }
    for n in &region.nodes {
        if model.node(n).is_none() {
            return false;
        }
    }
    let mut adj: BTreeMap<&NodeId, Vec<&NodeId>> = BTreeMap::new();
    for a in &region.arcs {
        let ends = model
            .flows
            .iter()
            .find(|f| &f.id == a)
            .map(|f| (&f.from, &f.to))
            .or_else(|| {
                model
                    .triggers
                    .iter()
                    .find(|t| &t.id == a)
                    .map(|t| (&t.from, &t.to))
            });
        let (from, to) = match ends {
            Some(e) => e,
            None => return false,
        };
        if !region.nodes.contains(from) || !region.nodes.contains(to) {
            return false;
        }
        adj.entry(from).or_default().push(to);
        adj.entry(to).or_default().push(from);
    }
    // Weak connectivity over the region's own arcs.
    let start = region.nodes.iter().next().expect("non-empty");
    let mut seen = BTreeSet::from([start]);
    let mut queue = vec![start];
    while let Some(n) = queue.pop() {
        for m in adj.get(n).into_iter().flatten() {
            if seen.insert(m) {
                queue.push(m);
            }
        }
    }
    seen.len() == region.nodes.len()
}

/// Validates the full bundle: the static layer plus every cross-reference
/// of the event, composite, behavior, and constraint layers.
pub fn validate_bundle(bundle: &Bundle) -> Vec<Diagnostic> {
    let mut diags = validate_static_model(&bundle.model);

    let mut event_ids = BTreeSet::new();
    for e in &bundle.events {
        if !event_ids.insert(&e.id) {
            diags.push(err(
                DiagCode::DuplicateId,
                DiagLoc::element(e.id.as_str()),
                format!("event `{}` is declared more than once", e.id),
            ));
        }
        let mut params = BTreeSet::new();
        for p in &e.params {
            if !params.insert(p) {
                diags.push(err(
                    DiagCode::DuplicateId,
                    DiagLoc::element(e.id.as_str()),
                    format!("event `{}` repeats parameter `{p}`", e.id),
                ));
            }
        }
        if !check_region(&e.region, &bundle.model) {
            diags.push(err(
                DiagCode::RegionInvalid,
                DiagLoc::element(e.id.as_str()),
                format!(
                    "event `{}` has an invalid region (empty, dangling ids, or not connected)",
                    e.id
                ),
            ));
        }
    }

    let mut composite_ids = BTreeSet::new();
    for c in &bundle.composites {
        if !composite_ids.insert(&c.id) {
            diags.push(err(
                DiagCode::DuplicateId,
                DiagLoc::element(c.id.as_str()),
                format!("composite `{}` is declared more than once", c.id),
            ));
        }
        if c.members.len() < 2 {
            diags.push(err(
                DiagCode::EmptyComposite,
                DiagLoc::element(c.id.as_str()),
                format!("composite `{}` needs at least two member events", c.id),
            ));
        }
        let mut union: BTreeSet<&str> = BTreeSet::new();
        for m in &c.members {
            match bundle.event(m) {
                Some(e) => union.extend(e.params.iter().map(String::as_str)),
                None => diags.push(err(
                    DiagCode::UnknownEvent,
                    DiagLoc::element(c.id.as_str()),
                    format!("composite `{}` references unknown event `{m}`", c.id),
                )),
            }
        }
        for s in &c.shared {
            if !union.contains(s.as_str()) {
                diags.push(err(
                    DiagCode::SharedNotInParams,
                    DiagLoc::element(c.id.as_str()),
                    format!(
                        "composite `{}` shares `{s}`, which no member event binds",
                        c.id
                    ),
                ));
            }
        }
        let expected = composite_id(&c.members);
        if !c.members.is_empty() && c.id != expected {
            diags.push(err(
                DiagCode::CompositeIdMismatch,
                DiagLoc::element(c.id.as_str()),
                format!(
                    "composite `{}` should be named `{expected}` after its members",
                    c.id
                ),
            ));
        }
    }

    if let Some(b) = &bundle.behavior {
        for e in &b.events {
            if bundle.event(e).is_none() {
                diags.push(err(
                    DiagCode::UnknownEvent,
                    DiagLoc::element(e.as_str()),
                    format!("behavior model references unknown event `{e}`"),
                ));
            }
        }
        for edge in &b.edges {
            for e in [&edge.from, &edge.to] {
                if !b.events.contains(e) {
                    diags.push(err(
                        DiagCode::UnknownEvent,
                        DiagLoc::element(e.as_str()),
                        format!("behavior edge endpoint `{e}` is not in the behavior event set"),
                    ));
                }
            }
        }
    }

    let mut constraint_ids = BTreeSet::new();
    for spec in &bundle.constraints {
        if !constraint_ids.insert(spec.id().to_string()) {
            diags.push(err(
                DiagCode::DuplicateId,
                DiagLoc::element(spec.id()),
                format!("constraint `{}` is declared more than once", spec.id()),
            ));
        }
        match spec {
            ConstraintSpec::Binding { id, composite } => {
                if bundle.composite(composite).is_none() {
                    diags.push(err(
                        DiagCode::UnknownComposite,
                        DiagLoc::element(id.as_str()),
                        format!("constraint `{id}` references unknown composite `{composite}`"),
                    ));
                }
            }
            ConstraintSpec::ImmediateSuccession { id, first, second } => {
                for e in [first, second] {
                    if bundle.event(e).is_none() {
                        diags.push(err(
                            DiagCode::UnknownEvent,
                            DiagLoc::element(id.as_str()),
                            format!("constraint `{id}` references unknown event `{e}`"),
                        ));
                    }
                }
            }
            ConstraintSpec::AtMostOnce { id, composite, key } => {
                match bundle.composite(composite) {
                    None => diags.push(err(
                        DiagCode::UnknownComposite,
                        DiagLoc::element(id.as_str()),
                        format!("constraint `{id}` references unknown composite `{composite}`"),
                    )),
                    Some(c) => {
                        for k in key {
                            if !c.shared.contains(k) {
                                diags.push(err(
                                    DiagCode::KeyNotShared,
                                    DiagLoc::element(id.as_str()),
                                    format!(
                                        "constraint `{id}` keys on `{k}`, which is not shared \
                                         by composite `{composite}`",
                                    ),
                                ));
                            }
                        }
                    }
                }
            }
        }
    }

    diags
}

// ---------------------------------------------------------------------------
// Notation conversion
// ---------------------------------------------------------------------------

/// A model failed validation; carries the collected diagnostics.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("model failed validation with {} diagnostic(s)", .0.len())]
pub struct InvalidModel(pub Vec<Diagnostic>);

/// Rewrites the model into canonical notation: every machine-crossing flow
/// arc `A → B` (A not a transfer) becomes the explicit chain
/// `A → release → transfer → transfer → receive → B`, reusing boundary
/// stages the arc already provides — a release source contributes the
/// chain's release, a receive target contributes its receive. The missing
/// stages are appended as bare nodes named `<arcId>.release`,
/// `.transfer_out`, `.transfer_in`, `.receive`, and the arc is replaced in
/// place by the hop arcs `<arcId>.s1`…`.sN`. Idempotent; a canonical input
/// passes through unchanged.
pub fn canonicalize(model: &StaticModel) -> Result<StaticModel, InvalidModel> {
    let diags = validate_static_model(model);
    if has_errors(&diags) {
        return Err(InvalidModel(diags));
    }
    let mut out = model.clone();
    out.notation = Notation::Canonical;
    if model.notation == Notation::Canonical {
        return Ok(out);
    }

    let mut flows = Vec::with_capacity(model.flows.len());
    let mut appended = Vec::new();
    for arc in &model.flows {
        let from = model.node(&arc.from).expect("validated");
        let to = model.node(&arc.to).expect("validated");
        let crosses = from.owner != to.owner;
        if !crosses || from.kind == ActionKind::Transfer {
            flows.push(arc.clone());
            continue;
        }
        let base = arc.id.as_str();
        let stage = |suffix: &str, owner: &ThimacId, kind: ActionKind| ActionNode {
            id: NodeId::new(format!("{base}.{suffix}")),
            owner: owner.clone(),
            kind,
            label: String::new(),
            updates: Vec::new(),
            emits: None,
        };
        let mut chain: Vec<NodeId> = vec![arc.from.clone()];
        if from.kind != ActionKind::Release {
            let release = stage("release", &from.owner, ActionKind::Release);
            chain.push(release.id.clone());
            appended.push(release);
        }
        let t_out = stage("transfer_out", &from.owner, ActionKind::Transfer);
        let t_in = stage("transfer_in", &to.owner, ActionKind::Transfer);
        chain.push(t_out.id.clone());
        chain.push(t_in.id.clone());
        appended.extend([t_out, t_in]);
        if to.kind != ActionKind::Receive {
            let receive = stage("receive", &to.owner, ActionKind::Receive);
            chain.push(receive.id.clone());
            appended.push(receive);
        }
        chain.push(arc.to.clone());
        for (i, hop) in chain.windows(2).enumerate() {
            flows.push(FlowArc {
                id: ArcId::new(format!("{base}.s{}", i + 1)),
                from: hop[0].clone(),
                to: hop[1].clone(),
            });
        }
    }
    out.flows = flows;
    out.nodes.extend(appended);
    Ok(out)
}

/// True when the node is an anonymous pass-through stage: nothing observes
/// it and nothing runs on it, so eliding it loses no information.
fn is_bare(model: &StaticModel, node: &ActionNode) -> bool {
    node.label.is_empty()
        && node.updates.is_empty()
        && node.emits.is_none()
        && !model
            .triggers
            .iter()
            .any(|t| t.from == node.id || t.to == node.id)
}

/// Rewrites a canonical model into simplified notation by collapsing every
/// hop chain [`canonicalize`] produces: starting from an arc `<arcId>.s1`,
/// the synthetic middle stages `<arcId>.release`, `<arcId>.transfer_out`,
/// `<arcId>.transfer_in`, `<arcId>.receive` — each bare (no label, no
/// updates, no emit, no triggers) and carrying no other flow arcs — are
/// elided and the chain becomes the single arc `<arcId>`. A chain that
/// starts at a release or ends at a receive has no synthetic stage on that
/// side, matching what canonicalize emits. Inverse of [`canonicalize`] on
/// its image; anything not shaped and named like that image is left alone.
pub fn simplify(model: &StaticModel) -> Result<StaticModel, InvalidModel> {
    let mut diags = validate_structure(model);
    if model.notation != Notation::Canonical {
        diags.push(err(
            DiagCode::FlowOrderViolation,
            DiagLoc::element("notation"),
            "simplify expects a model in canonical notation",
        ));
    }
    if has_errors(&diags) {
        return Err(InvalidModel(diags));
    }

    let mut in_flows: BTreeMap<&NodeId, Vec<usize>> = BTreeMap::new();
    let mut out_flows: BTreeMap<&NodeId, Vec<usize>> = BTreeMap::new();
    for (i, a) in model.flows.iter().enumerate() {
        out_flows.entry(&a.from).or_default().push(i);
        in_flows.entry(&a.to).or_default().push(i);
    }
    // A middle node qualifies when it bears the synthetic name and kind for
    // its slot, this is its only inbound flow arc, it has exactly one
    // outbound flow arc, and it is bare.
    let middle = |id: &NodeId, name: &str, kind: ActionKind, inbound: usize| -> Option<usize> {
        let node = model.node(id)?;
        if node.id.as_str() != name || node.kind != kind || !is_bare(model, node) {
            return None;
        }
        if in_flows.get(&node.id).map(Vec::as_slice) != Some(&[inbound][..]) {
            return None;
        }
        match out_flows.get(&node.id).map(Vec::as_slice) {
            Some(&[only]) => Some(only),
            _ => None,
        }
    };

    let mut replaced: BTreeMap<usize, FlowArc> = BTreeMap::new();
    let mut dropped_arcs: BTreeSet<usize> = BTreeSet::new();
    let mut dropped_nodes: BTreeSet<NodeId> = BTreeSet::new();

    for (i1, a1) in model.flows.iter().enumerate() {
        if dropped_arcs.contains(&i1) || replaced.contains_key(&i1) {
            continue;
        }
        let Some(base) = a1.id.as_str().strip_suffix(".s1") else {
            continue;
        };
        let chain = (|| {
            let head = model.node(&a1.from)?;
            let mut middles: Vec<NodeId> = Vec::new();
            let mut consumed: Vec<usize> = Vec::new();
            // Head leg: a release source starts the chain itself; any other
            // source is followed by the synthetic release.
            let to_t_out = if head.kind == ActionKind::Release {
                i1
            } else {
                let i2 =
                    middle(&a1.to, &format!("{base}.release"), ActionKind::Release, i1)?;
                if model.node(&a1.to)?.owner != head.owner {
                    return None;
                }
                middles.push(a1.to.clone());
                consumed.push(i2);
                i2
            };
            let t_out_id = &model.flows[to_t_out].to;
            let i3 = middle(
                t_out_id,
                &format!("{base}.transfer_out"),
                ActionKind::Transfer,
                to_t_out,
            )?;
            let t_in_id = &model.flows[i3].to;
            let i4 = middle(
                t_in_id,
                &format!("{base}.transfer_in"),
                ActionKind::Transfer,
                i3,
            )?;
            middles.extend([t_out_id.clone(), t_in_id.clone()]);
            consumed.extend([i3, i4]);
            // Tail leg: a synthetic receive hands over to the target; its
            // absence means the target is the chain's receive itself.
            let next_id = &model.flows[i4].to;
            let (tail_id, had_receive) = match middle(
                next_id,
                &format!("{base}.receive"),
                ActionKind::Receive,
                i4,
            ) {
                Some(i5) => {
                    middles.push(next_id.clone());
                    consumed.push(i5);
                    (model.flows[i5].to.clone(), true)
                }
                None => {
                    if model.node(next_id)?.kind != ActionKind::Receive {
                        return None;
                    }
                    (next_id.clone(), false)
                }
            };
            let tail = model.node(&tail_id)?;
            let t_out = model.node(t_out_id)?;
            let t_in = model.node(t_in_id)?;
            if t_out.owner != head.owner
                || t_in.owner == head.owner
                || tail.owner != t_in.owner
            {
                return None;
            }
            // Exactness: re-canonicalizing the collapsed arc must reproduce
            // this very chain, so the boundary kinds decide the legs.
            if had_receive && tail.kind == ActionKind::Receive {
                return None;
            }
            Some((middles, consumed, tail_id))
        })();
        if let Some((middles, consumed, tail_id)) = chain {
            replaced.insert(
                i1,
                FlowArc { id: ArcId::from(base), from: a1.from.clone(), to: tail_id },
            );
            dropped_arcs.extend(consumed);
            dropped_nodes.extend(middles);
        }
    }

    let mut out = model.clone();
    out.notation = Notation::Simplified;
    out.flows = model
        .flows
        .iter()
        .enumerate()
        .filter(|(i, _)| !dropped_arcs.contains(i))
        .map(|(i, a)| replaced.get(&i).cloned().unwrap_or_else(|| a.clone()))
        .collect();
    out.nodes.retain(|n| !dropped_nodes.contains(&n.id));
    Ok(out)
}

// ---------------------------------------------------------------------------
// Composite events
// ---------------------------------------------------------------------------

/// Splits an event id into its alphabetic stem and an optional numeric
/// suffix, e.g. `E13` → (`E`, Some(13)).
fn stem_and_number(id: &str) -> (&str, Option<u64>) {
    let split = id.find(|c: char| c.is_ascii_digit()).unwrap_or(id.len());
    let (stem, rest) = id.split_at(split);
    match rest.parse::<u64>() {
        Ok(n) if !rest.is_empty() => (stem, Some(n)),
        _ => (stem, None),
    }
}

/// The canonical name of a composite: members are ordered by (stem, number)
/// and joined with hyphens; members sharing the first member's stem
/// contribute only their numeric suffix (E2 + E3 → `E2-3`).
pub fn composite_id(members: &[EventId]) -> EventId {
    let mut sorted: Vec<&str> = members.iter().map(EventId::as_str).collect();
    sorted.sort_by_key(|id| {
        let (stem, num) = stem_and_number(id);
        (stem.to_string(), num, id.to_string())
    });
    sorted.dedup();
    let Some(first) = sorted.first() else {
        return EventId::new("");
    };
    let (stem, _) = stem_and_number(first);
    let mut out = String::from(*first);
    for m in &sorted[1..] {
        out.push('-');
        match m.strip_prefix(stem) {
            Some(suffix) if !stem.is_empty() && suffix.chars().all(|c| c.is_ascii_digit()) => {
                out.push_str(suffix)
            }
            _ => out.push_str(m),
        }
    }
    EventId::new(out)
}

/// Why [`compose`] refused.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ComposeError {
    #[error("unknown event `{0}`")]
    UnknownEvent(EventId),
    #[error("a composite needs at least two member events")]
    EmptyComposite,
    #[error("shared variable `{0}` is not a parameter of any member")]
    SharedNotInParams(String),
    #[error("composite `{0}` already exists with different members or sharing")]
    Conflict(EventId),
}

/// Builds a composite event over `members`, registers it in the bundle,
/// and returns it. Re-composing an identical composite is a no-op returning
/// the existing one.
pub fn compose(
    bundle: &mut Bundle,
    members: &[EventId],
    shared: &[String],
) -> Result<CompositeEvent, ComposeError> {
    if members.len() < 2 {
        return Err(ComposeError::EmptyComposite);
    }
    let mut union: BTreeSet<&str> = BTreeSet::new();
    for m in members {
        let e = bundle
            .event(m)
            .ok_or_else(|| ComposeError::UnknownEvent(m.clone()))?;
        union.extend(e.params.iter().map(String::as_str));
    }
    for s in shared {
        if !union.contains(s.as_str()) {
            return Err(ComposeError::SharedNotInParams(s.clone()));
        }
    }
    let id = composite_id(members);
    let composite = CompositeEvent {
        id: id.clone(),
        members: members.to_vec(),
        shared: shared.to_vec(),
    };
    if let Some(existing) = bundle.composite(&id) {
        if *existing == composite {
            return Ok(composite);
        }
        return Err(ComposeError::Conflict(id));
    }
    bundle.composites.push(composite.clone());
    Ok(composite)
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn thimac(id: &str) -> Thimac {
        Thimac {
            id: id.into(),
            name: id.to_string(),
            parent: None,
            has_storage: false,
            variables: Vec::new(),
        }
    }

    fn node(id: &str, owner: &str, kind: ActionKind) -> ActionNode {
        ActionNode {
            id: id.into(),
            owner: owner.into(),
            kind,
            label: String::new(),
            updates: Vec::new(),
            emits: None,
        }
    }

    fn flow(id: &str, from: &str, to: &str) -> FlowArc {
        FlowArc { id: id.into(), from: from.into(), to: to.into() }
    }

    fn trigger(id: &str, from: &str, to: &str) -> TriggerArc {
        TriggerArc { id: id.into(), from: from.into(), to: to.into(), guard: None }
    }

    fn event(id: &str, params: &[&str], nodes: &[&str], arcs: &[&str]) -> EventDef {
        EventDef {
            id: id.into(),
            label: String::new(),
            params: params.iter().map(|p| p.to_string()).collect(),
            region: Region {
                nodes: nodes.iter().map(|n| NodeId::from(*n)).collect(),
                arcs: arcs.iter().map(|a| ArcId::from(*a)).collect(),
            },
        }
    }

    /// Two machines, one legal cross arc, some same-machine structure.
    fn two_machine_model() -> StaticModel {
        StaticModel {
            notation: Notation::Simplified,
            thimacs: vec![thimac("M1"), thimac("M2")],
            nodes: vec![
                node("c1", "M1", ActionKind::Create),
                node("p1", "M1", ActionKind::Process),
                node("p2", "M2", ActionKind::Process),
                node("r2", "M2", ActionKind::Release),
            ],
            flows: vec![flow("f1", "c1", "p1"), flow("f2", "p1", "p2"), flow("f3", "p2", "r2")],
            triggers: vec![trigger("t1", "p2", "r2")],
        }
    }

    // ---- flow legality ------------------------------------------------------

    /// Independent transcription of the sequencing rules, written directly
    /// rather than via the production table, so the two can check each other.
    fn legal_same_machine_oracle(from: ActionKind, to: ActionKind) -> bool {
        use ActionKind::*;
        matches!(
            (from, to),
            (Transfer, Receive)
                | (Receive, Process)
                | (Receive, Release)
                | (Process, Release)
                | (Create, Process)
                | (Create, Release)
                | (Release, Transfer)
        )
    }

    #[test]
    fn same_machine_legality_matches_oracle_for_all_25_pairs() {
        for from in ACTION_KINDS {
            for to in ACTION_KINDS {
                let expected = legal_same_machine_oracle(from, to);
                for notation in [Notation::Simplified, Notation::Canonical] {
                    assert_eq!(
                        flow_pair_legal(notation, true, from, to),
                        expected,
                        "same-machine {from} -> {to} under {notation:?}"
                    );
                }
            }
        }
        // The one pair the table is easiest to get wrong about:
        assert!(!flow_pair_legal(
            Notation::Canonical,
            true,
            ActionKind::Receive,
            ActionKind::Transfer
        ));
    }

    #[test]
    fn cross_machine_legality_depends_on_notation() {
        use ActionKind::*;
        for from in ACTION_KINDS {
            for to in ACTION_KINDS {
                let canonical = from == Transfer && to == Transfer;
                let simplified = canonical || (from != Transfer && to != Transfer);
                assert_eq!(flow_pair_legal(Notation::Canonical, false, from, to), canonical);
                assert_eq!(flow_pair_legal(Notation::Simplified, false, from, to), simplified);
            }
        }
    }

    // ---- validation ---------------------------------------------------------

    #[test]
    fn valid_model_yields_no_diagnostics() {
        assert_eq!(validate_static_model(&two_machine_model()), Vec::new());
    }

    #[test]
    fn validation_collects_all_problems_without_stopping() {
        let mut m = two_machine_model();
        m.nodes.push(node("c1", "M1", ActionKind::Create)); // duplicate id
        m.flows.push(flow("f4", "r2", "ghost")); // dangling endpoint
        m.flows.push(flow("f5", "p1", "c1")); // Process -> Create, illegal
        let diags = validate_static_model(&m);
        let codes: Vec<DiagCode> = diags.iter().map(|d| d.code).collect();
        assert!(codes.contains(&DiagCode::DuplicateId));
        assert!(codes.contains(&DiagCode::UnknownNode));
        assert!(codes.contains(&DiagCode::FlowOrderViolation));
        assert!(diags.len() >= 3);
    }

    #[test]
    fn receive_to_transfer_is_a_flow_order_violation() {
        let mut m = two_machine_model();
        m.nodes.push(node("rc", "M2", ActionKind::Receive));
        m.nodes.push(node("tr", "M2", ActionKind::Transfer));
        m.flows.push(flow("fx", "rc", "tr"));
        let diags = validate_static_model(&m);
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].code, DiagCode::FlowOrderViolation);
        assert!(diags[0].message.contains("fx"));
    }

    #[test]
    fn cross_machine_plain_arcs_need_simplified_notation() {
        let mut m = two_machine_model();
        assert!(validate_static_model(&m).is_empty());
        m.notation = Notation::Canonical;
        let diags = validate_static_model(&m);
        // f2 (Process -> Process across machines) is only legal simplified.
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].code, DiagCode::FlowOrderViolation);
        assert!(diags[0].message.contains("f2"));
    }

    #[test]
    fn parent_cycles_and_trigger_loops_are_reported() {
        let mut m = two_machine_model();
        m.thimacs[0].parent = Some("M2".into());
        m.thimacs[1].parent = Some("M1".into());
        m.triggers.push(trigger("t2", "p1", "p1"));
        let codes: Vec<DiagCode> =
            validate_static_model(&m).iter().map(|d| d.code).collect();
        assert!(codes.contains(&DiagCode::ParentCycle));
        assert!(codes.contains(&DiagCode::TriggerLoop));
    }

    #[test]
    fn updates_may_not_reach_foreign_thimacs() {
        let mut m = two_machine_model();
        m.thimacs[0].variables.push(VarDecl { name: "x".into(), init: VarInit::Int(0) });
        m.nodes[1].updates =
            crate::expr::parse_updates("x := M2.count + 1").unwrap();
        let diags = validate_static_model(&m);
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].code, DiagCode::UpdateScope);

        // The same reference from a node of M2 itself is in scope.
        let mut m = two_machine_model();
        m.thimacs[1].variables.push(VarDecl { name: "count".into(), init: VarInit::Int(0) });
        m.nodes[2].updates = crate::expr::parse_updates("count := M2.count + 1").unwrap();
        assert!(validate_static_model(&m).is_empty());
    }

    #[test]
    fn sub_thimac_updates_may_reach_ancestors() {
        let mut m = two_machine_model();
        let mut sub = thimac("M1sub");
        sub.parent = Some("M1".into());
        m.thimacs.push(sub);
        m.thimacs[0].variables.push(VarDecl { name: "x".into(), init: VarInit::Int(0) });
        m.nodes.push(node("ps", "M1sub", ActionKind::Process));
        m.nodes.last_mut().unwrap().updates =
            crate::expr::parse_updates("x := M1.x + 1").unwrap();
        assert!(validate_static_model(&m).is_empty());
    }

    // ---- regions -------------------------------------------------------------

    #[test]
    fn regions_must_be_connected_and_resolved() {
        let m = two_machine_model();
        let ok = |nodes: &[&str], arcs: &[&str]| {
            check_region(&event("E", &[], nodes, arcs).region, &m)
        };
        assert!(ok(&["c1"], &[]));
        assert!(ok(&["c1", "p1"], &["f1"]));
        assert!(ok(&["p2", "r2"], &["t1"])); // trigger arcs connect regions too
        assert!(ok(&["c1", "p1", "p2"], &["f1", "f2"]));
        assert!(!ok(&[], &[]));
        assert!(!ok(&["c1", "p2"], &[])); // two islands
        assert!(!ok(&["c1", "ghost"], &[]));
        assert!(!ok(&["c1"], &["f1"])); // arc endpoint p1 outside region
        assert!(!ok(&["c1", "p1"], &["nosucharc"]));
    }

    // ---- canonicalize / simplify ----------------------------------------------

    #[test]
    fn canonicalize_expands_each_cross_arc_into_a_four_node_chain() {
        let m = two_machine_model();
        let c = canonicalize(&m).unwrap();
        assert_eq!(c.notation, Notation::Canonical);
        // Independent recount: one arc (f2) crosses machines.
        let crossing = m
            .flows
            .iter()
            .filter(|a| {
                m.node(&a.from).unwrap().owner != m.node(&a.to).unwrap().owner
            })
            .count();
        assert_eq!(crossing, 1);
        assert_eq!(c.nodes.len(), m.nodes.len() + 4 * crossing);
        assert_eq!(c.flows.len(), m.flows.len() + 4 * crossing);
        // The chain replaces f2 in place with predictable names.
        let ids: Vec<&str> = c.flows.iter().map(|a| a.id.as_str()).collect();
        assert_eq!(ids, ["f1", "f2.s1", "f2.s2", "f2.s3", "f2.s4", "f2.s5", "f3"]);
        let kinds: Vec<ActionKind> =
            c.nodes[m.nodes.len()..].iter().map(|n| n.kind).collect();
        assert_eq!(
            kinds,
            [ActionKind::Release, ActionKind::Transfer, ActionKind::Transfer, ActionKind::Receive]
        );
        let owners: Vec<&str> =
            c.nodes[m.nodes.len()..].iter().map(|n| n.owner.as_str()).collect();
        assert_eq!(owners, ["M1", "M1", "M2", "M2"]);
        // The canonical image of a clean simplified model is itself valid.
        assert_eq!(validate_static_model(&c), Vec::new());
    }

    #[test]
    fn canonicalize_grows_by_twelve_nodes_for_three_cross_arcs() {
        let mut m = two_machine_model();
        m.nodes.push(node("c2", "M2", ActionKind::Create));
        m.nodes.push(node("p1b", "M1", ActionKind::Process));
        m.flows.push(flow("f4", "c2", "p1b")); // M2 -> M1
        m.nodes.push(node("rcv1", "M1", ActionKind::Receive));
        m.nodes.push(node("p2b", "M2", ActionKind::Process));
        m.flows.push(flow("f5", "rcv1", "p2b")); // M1 -> M2
        assert!(validate_static_model(&m).is_empty());
        let c = canonicalize(&m).unwrap();
        assert_eq!(c.nodes.len(), m.nodes.len() + 12);
    }

    #[test]
    fn canonicalize_is_idempotent_and_fixes_canonical_input() {
        let m = two_machine_model();
        let once = canonicalize(&m).unwrap();
        let twice = canonicalize(&once).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn canonicalize_reuses_release_sources_and_receive_targets() {
        // rel -> rcv across machines already provides both boundary stages:
        // only the two transfers are inserted, and the image is valid.
        let m = StaticModel {
            notation: Notation::Simplified,
            thimacs: vec![thimac("M1"), thimac("M2")],
            nodes: vec![
                node("c1", "M1", ActionKind::Create),
                node("rel", "M1", ActionKind::Release),
                node("rcv", "M2", ActionKind::Receive),
                node("p2", "M2", ActionKind::Process),
            ],
            flows: vec![
                flow("f1", "c1", "rel"),
                flow("f2", "rel", "rcv"),
                flow("f3", "rcv", "p2"),
            ],
            triggers: Vec::new(),
        };
        assert_eq!(validate_static_model(&m), Vec::new());
        let c = canonicalize(&m).unwrap();
        assert_eq!(validate_static_model(&c), Vec::new());
        assert_eq!(c.nodes.len(), m.nodes.len() + 2);
        let ids: Vec<&str> = c.flows.iter().map(|a| a.id.as_str()).collect();
        assert_eq!(ids, ["f1", "f2.s1", "f2.s2", "f2.s3", "f3"]);
        let mid: Vec<&str> =
            c.nodes[m.nodes.len()..].iter().map(|n| n.id.as_str()).collect();
        assert_eq!(mid, ["f2.transfer_out", "f2.transfer_in"]);
        assert_eq!(simplify(&c).unwrap(), m);

        // One-sided reuse: create -> receive keeps the target's receive.
        let m = StaticModel {
            notation: Notation::Simplified,
            thimacs: vec![thimac("M1"), thimac("M2")],
            nodes: vec![
                node("c1", "M1", ActionKind::Create),
                node("rcv", "M2", ActionKind::Receive),
                node("p2", "M2", ActionKind::Process),
            ],
            flows: vec![flow("f1", "c1", "rcv"), flow("f2", "rcv", "p2")],
            triggers: Vec::new(),
        };
        assert_eq!(validate_static_model(&m), Vec::new());
        let c = canonicalize(&m).unwrap();
        assert_eq!(validate_static_model(&c), Vec::new());
        assert_eq!(c.nodes.len(), m.nodes.len() + 3);
        let ids: Vec<&str> = c.flows.iter().map(|a| a.id.as_str()).collect();
        assert_eq!(ids, ["f1.s1", "f1.s2", "f1.s3", "f1.s4", "f2"]);
        assert_eq!(simplify(&c).unwrap(), m);
    }

    #[test]
    fn simplify_inverts_canonicalize() {
        let m = two_machine_model();
        let c = canonicalize(&m).unwrap();
        assert_eq!(simplify(&c).unwrap(), m);
    }

    #[test]
    fn simplify_requires_canonical_notation_and_leaves_plain_models_alone() {
        let m = two_machine_model();
        assert!(simplify(&m).is_err());
        // A canonical model with no elidable chain passes through unchanged
        // apart from the notation field.
        let mut only_same: StaticModel = two_machine_model();
        only_same.flows.retain(|a| a.id.as_str() != "f2");
        only_same.notation = Notation::Canonical;
        let s = simplify(&only_same).unwrap();
        assert_eq!(s.nodes, only_same.nodes);
        assert_eq!(s.flows, only_same.flows);
        assert_eq!(s.notation, Notation::Simplified);
    }

    #[test]
    fn annotated_chain_nodes_block_collapsing() {
        let m = two_machine_model();
        let mut c = canonicalize(&m).unwrap();
        // Structural-diff oracle: annotate the inserted release node; the
        // chain must survive simplify, so the round trip no longer matches.
        let release = c
            .nodes
            .iter_mut()
            .find(|n| n.id.as_str() == "f2.release")
            .unwrap();
        release.updates = crate::expr::parse_updates("x := 1").unwrap();
        c.thimacs[0].variables.push(VarDecl { name: "x".into(), init: VarInit::Int(0) });
        let s = simplify(&c).unwrap();
        assert_ne!(s.flows.len(), m.flows.len());
        assert!(s.nodes.iter().any(|n| n.id.as_str() == "f2.release"));
    }

    #[test]
    fn collapse_requires_the_exact_bare_chain() {
        // A hand-written chain whose middle carries an extra trigger arc
        // must not collapse.
        let m = two_machine_model();
        let mut c = canonicalize(&m).unwrap();
        c.triggers.push(trigger("t9", "f2.transfer_out", "r2"));
        let s = simplify(&c).unwrap();
        assert!(s.nodes.iter().any(|n| n.id.as_str() == "f2.transfer_out"));
    }

    // ---- composites ------------------------------------------------------------

    fn bundle_with_events() -> Bundle {
        let mut m = two_machine_model();
        m.nodes.push(node("c2", "M2", ActionKind::Create));
        Bundle {
            model: m,
            events: vec![
                event("E2", &["x"], &["c1"], &[]),
                event("E3", &["x", "y"], &["p1"], &[]),
                event("E5", &["z"], &["c2"], &[]),
                event("E6", &["y", "z"], &["p2"], &[]),
                event("E7", &["x", "z"], &["r2"], &[]),
            ],
            composites: Vec::new(),
            behavior: None,
            constraints: Vec::new(),
        }
    }

    #[test]
    fn composite_ids_join_sorted_members() {
        let ids = |names: &[&str]| composite_id(&names.iter().map(|n| EventId::from(*n)).collect::<Vec<_>>());
        assert_eq!(ids(&["E2", "E3"]).as_str(), "E2-3");
        assert_eq!(ids(&["E5", "E6"]).as_str(), "E5-6");
        // Member order in the declaration does not change the name.
        assert_eq!(ids(&["E7", "E2", "E3", "E5", "E6"]).as_str(), "E2-3-5-6-7");
        assert_eq!(ids(&["E2", "E3", "E5", "E6", "E7"]).as_str(), "E2-3-5-6-7");
        // Numeric ordering, not lexicographic: E13 after E2.
        assert_eq!(ids(&["E13", "E2"]).as_str(), "E2-13");
        // Mixed stems fall back to the full id.
        assert_eq!(ids(&["Done", "E2"]).as_str(), "Done-E2");
    }

    #[test]
    fn compose_builds_and_registers_composites() {
        let mut b = bundle_with_events();
        let c = compose(&mut b, &["E2".into(), "E3".into()], &["x".to_string()]).unwrap();
        assert_eq!(c.id.as_str(), "E2-3");
        assert_eq!(b.composites.len(), 1);
        // Identical re-composition is a no-op.
        let again = compose(&mut b, &["E2".into(), "E3".into()], &["x".to_string()]).unwrap();
        assert_eq!(again, c);
        assert_eq!(b.composites.len(), 1);
        // Same members, different sharing: conflict.
        assert_eq!(
            compose(&mut b, &["E2".into(), "E3".into()], &[]),
            Err(ComposeError::Conflict("E2-3".into()))
        );
        assert_eq!(
            compose(&mut b, &["E2".into()], &[]),
            Err(ComposeError::EmptyComposite)
        );
        assert_eq!(
            compose(&mut b, &["E2".into(), "E9".into()], &[]),
            Err(ComposeError::UnknownEvent("E9".into()))
        );
        assert_eq!(
            compose(&mut b, &["E5".into(), "E6".into()], &["w".to_string()]),
            Err(ComposeError::SharedNotInParams("w".to_string()))
        );
    }

    #[test]
    fn bundle_validation_crosschecks_every_layer() {
        let mut b = bundle_with_events();
        compose(&mut b, &["E2".into(), "E3".into()], &["x".to_string()]).unwrap();
        b.behavior = Some(BehaviorModel {
            events: ["E2", "E3"].iter().map(|e| EventId::from(*e)).collect(),
            edges: vec![BehaviorEdge { from: "E2".into(), to: "E3".into(), repeatable: true }],
        });
        b.constraints = vec![
            ConstraintSpec::Binding { id: "C1".into(), composite: "E2-3".into() },
            ConstraintSpec::ImmediateSuccession {
                id: "C3".into(),
                first: "E2".into(),
                second: "E3".into(),
            },
            ConstraintSpec::AtMostOnce {
                id: "C7".into(),
                composite: "E2-3".into(),
                key: vec!["x".to_string()],
            },
        ];
        assert_eq!(validate_bundle(&b), Vec::new());

        // Now break every layer at once and expect one diagnostic each.
        let mut bad = b.clone();
        bad.events[0].region.nodes.insert("ghost".into());
        bad.composites[0].members.push("E9".into());
        bad.behavior.as_mut().unwrap().edges.push(BehaviorEdge {
            from: "E5".into(),
            to: "E2".into(),
            repeatable: true,
        });
        bad.constraints.push(ConstraintSpec::AtMostOnce {
            id: "C8".into(),
            composite: "E2-3".into(),
            key: vec!["q".to_string()],
        });
        let codes: Vec<DiagCode> = validate_bundle(&bad).iter().map(|d| d.code).collect();
        assert!(codes.contains(&DiagCode::RegionInvalid));
        assert!(codes.contains(&DiagCode::UnknownEvent));
        assert!(codes.contains(&DiagCode::KeyNotShared));
    }

    #[test]
    fn composite_id_mismatch_is_flagged() {
        let mut b = bundle_with_events();
        b.composites.push(CompositeEvent {
            id: "Joined".into(),
            members: vec!["E2".into(), "E3".into()],
            shared: vec![],
        });
        let diags = validate_bundle(&b);
        assert!(diags.iter().any(|d| d.code == DiagCode::CompositeIdMismatch));
    }

    // ---- property tests -----------------------------------------------------

    /// Random simplified models whose canonical image stays table-legal:
    /// cross arcs run from create/process/receive into process/release, and
    /// every node carries a label so no hand-written chain is elidable.
    fn arb_simplified_model() -> impl Strategy<Value = StaticModel> {
        let kinds = prop_oneof![
            Just(ActionKind::Create),
            Just(ActionKind::Process),
            Just(ActionKind::Release),
            Just(ActionKind::Transfer),
            Just(ActionKind::Receive),
        ];
        (2usize..4, proptest::collection::vec((kinds, 0usize..4), 3..10)).prop_flat_map(
            |(n_thimacs, node_specs)| {
                let thimacs: Vec<Thimac> = (0..n_thimacs)
                    .map(|i| thimac(&format!("T{i}")))
                    .collect();
                let nodes: Vec<ActionNode> = node_specs
                    .iter()
                    .enumerate()
                    .map(|(i, (kind, owner))| {
                        let mut n = node(
                            &format!("n{i}"),
                            &format!("T{}", owner % n_thimacs),
                            *kind,
                        );
                        n.label = format!("stage {i}");
                        n
                    })
                    .collect();
                // Candidate legal arcs under simplified notation. A crossing
                // arc into a create stage is excluded: nothing may flow into
                // a create, so its expansion has no legal canonical image.
                let mut candidates = Vec::new();
                for a in &nodes {
                    for b in &nodes {
                        if a.id == b.id {
                            continue;
                        }
                        let same = a.owner == b.owner;
                        if !flow_pair_legal(Notation::Simplified, same, a.kind, b.kind) {
                            continue;
                        }
                        if !same && b.kind == ActionKind::Create {
                            continue;
                        }
                        candidates.push((a.id.clone(), b.id.clone()));
                    }
                }
                let n_candidates = candidates.len();
                (
                    Just(thimacs),
                    Just(nodes),
                    Just(candidates),
                    proptest::collection::vec(proptest::bool::ANY, n_candidates),
                )
            },
        )
        .prop_map(|(thimacs, nodes, candidates, picks)| {
            let flows: Vec<FlowArc> = candidates
                .into_iter()
                .zip(picks)
                .filter(|(_, pick)| *pick)
                .enumerate()
                .map(|(i, ((from, to), _))| FlowArc {
                    id: ArcId::new(format!("f{i}")),
                    from,
                    to,
                })
                .collect();
            StaticModel {
                notation: Notation::Simplified,
                thimacs,
                nodes,
                flows,
                triggers: Vec::new(),
            }
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig { cases: 128, .. ProptestConfig::default() })]

        /// simplify undoes canonicalize exactly, canonicalize is idempotent,
        /// and the canonical image of a clean model validates.
        #[test]
        fn notation_round_trip_and_idempotence(m in arb_simplified_model()) {
            prop_assume!(validate_static_model(&m).is_empty());
            let c = canonicalize(&m).unwrap();
            prop_assert_eq!(validate_static_model(&c), Vec::new());
            let c2 = canonicalize(&c).unwrap();
            prop_assert_eq!(&c2, &c);
            let s = simplify(&c).unwrap();
            prop_assert_eq!(s, m);
        }
    }
}
