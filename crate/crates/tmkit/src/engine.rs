//! Runs scripts against a validated bundle, producing a timed event trace.
//!
//! # Runtime model
//!
//! The unit of time is the script statement: statement `k` (1-based) is
//! step `t = k`. Each statement either performs storage bookkeeping
//! (creating an instance record, setting its attributes), sends a *thing*
//! through the flow structure, raises an event's region by hand, or prints
//! a message conditioned on the most recent event occurrences.
//!
//! A thing is an attribute map with a runtime identity. Things at rest
//! live either in a thimac's storage (instance records and deposited
//! arrivals) or parked at an action node. A flowing thing fires the nodes
//! it passes through:
//!
//! * firing a **create** or **process** node first runs the node's
//!   updates (assignments read the thing's attributes, then the owning
//!   thimac chain's variables, innermost first);
//! * the firing is recorded — attributes and a snapshot of the owner
//!   chain's variables, both taken after the updates — and the node's
//!   `emits` message, if any, is stamped with the current step;
//! * each outgoing trigger arc whose guard passes fires next, in
//!   declaration order, depth-first. A trigger target of kind create or
//!   receive *materializes* a fresh thing (a copy of the current
//!   attributes) which then flows onward normally. Any other target fires
//!   in context: it sees a private copy of the attributes, its own
//!   triggers cascade, but it does not move anything along flow arcs;
//! * after the triggers, the thing follows the first declared outgoing
//!   flow arc. A thing whose node has no outgoing flow comes to rest: it
//!   is deposited into the owner's storage when the node is a create or
//!   receive and the owner has storage, and parked at the node otherwise.
//!
//! `Trigger Event E` fires the nodes of E's region in flow order and
//! nothing else — no trigger cascade, no flow beyond the region. When the
//! region starts at a create node the fired thing is minted from the
//! statement's payload and discarded afterwards; otherwise the newest
//! thing parked at the region's entry is fired *by copy* (payload
//! attributes overlaid), so manual events never move the state's things.
//!
//! After every statement the engine scans the event definitions in
//! declaration order: an event occurs at this step when every node of its
//! region fired. Parameters bind from the recorded firings (attributes
//! first, then variable snapshots); a parameter that stays unbound or
//! binds two different values suppresses the occurrence.
//!
//! Statements are atomic: when one fails, its partial effects are rolled
//! back, the error is reported with the statement's position, and the run
//! stops. A firing budget (10000 firings, trigger depth 64) turns trigger
//! loops into errors instead of hangs.
//!
//! `run_script` expects a bundle that passed validation; feeding it an
//! unvalidated bundle with dangling references may panic.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::script::{FlowStmt, FlowTarget, Script, Statement};
use crate::dsl::Pos;
use crate::expr::{eval_guard, exec_updates, Env, EvalError, Value};
use crate::model::{
    ActionKind, ActionNode, Bundle, EventId, NodeId, Region, StaticModel, ThimacId,
};

/// Most firings a single statement may perform.
pub const MAX_FIRINGS: u64 = 10_000;
/// Deepest trigger cascade a single statement may reach.
pub const MAX_DEPTH: u32 = 64;

// ---------------------------------------------------------------------------
// Runtime state
// ---------------------------------------------------------------------------

/// A runtime thing: an attribute map with an engine-assigned identity and,
/// for instance records, the instance name it was created under.
#[derive(Debug, Clone, PartialEq)]
pub struct Thing {
    pub id: String,
    pub instance: Option<String>,
    pub attrs: BTreeMap<String, Value>,
}

/// Mutable world the script acts on.
#[derive(Debug, Clone)]
pub struct State {
    /// Stored things per storage-bearing thimac, oldest first.
    pub storages: BTreeMap<ThimacId, Vec<Thing>>,
    /// Things parked at an action node, oldest first.
    pub resting: BTreeMap<NodeId, Vec<Thing>>,
    /// Current value of every declared thimac variable.
    pub vars: BTreeMap<ThimacId, BTreeMap<String, Value>>,
    /// Step of the statement being executed (1-based; 0 before the first).
    pub step: u64,
    next_thing: u64,
    /// Step and events of the most recent occurrence-bearing step.
    recent: Option<(u64, BTreeSet<EventId>)>,
}

impl State {
    /// Initial state for a bundle: declared variables at their initial
    /// values, every storage empty.
    pub fn new(bundle: &Bundle) -> Self {
        let mut storages = BTreeMap::new();
        let mut vars = BTreeMap::new();
        for t in &bundle.model.thimacs {
            if t.has_storage {
                storages.insert(t.id.clone(), Vec::new());
            }
            let mut map = BTreeMap::new();
            for v in &t.variables {
                map.insert(v.name.clone(), v.init.value());
            }
            vars.insert(t.id.clone(), map);
        }
        State { storages, resting: BTreeMap::new(), vars, step: 0, next_thing: 0, recent: None }
    }

    fn fresh_id(&mut self) -> String {
        self.next_thing += 1;
        format!("t{}", self.next_thing)
    }
}

// ---------------------------------------------------------------------------
// Trace
// ---------------------------------------------------------------------------

/// One event occurrence: the step it happened at and the parameter binding,
/// in parameter declaration order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Occurrence {
    pub step: u64,
    pub event: EventId,
    pub binding: Vec<(String, Value)>,
}

/// Everything a run emits: occurrences in detection order and timed
/// messages (node `emits` plus conditional prints).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Trace {
    pub occurrences: Vec<Occurrence>,
    pub messages: Vec<(u64, String)>,
}

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

/// Why a statement could not run.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("unknown thimac `{0}`")]
    UnknownThimac(String),
    #[error("`{thimac}` has no stored instance `{instance}`")]
    UnknownInstance { thimac: String, instance: String },
    #[error("instance `{instance}` already exists in `{thimac}`")]
    DuplicateInstance { thimac: String, instance: String },
    #[error("unknown event `{0}`")]
    UnknownEvent(String),
    #[error("`{node}` is not a stage of `{thimac}`")]
    UnknownNode { thimac: String, node: String },
    #[error("`{0}` has no storage")]
    NoStorage(String),
    #[error("nothing stored in `{thimac}` matches {wanted}")]
    StorageMiss { thimac: String, wanted: String },
    #[error("several {kind} stages of `{thimac}` could start this flow ({candidates}); name one")]
    AmbiguousEntry { thimac: String, kind: &'static str, candidates: String },
    #[error("`{thimac}` has no {kind} stage to start this flow from; name one")]
    NoEntry { thimac: String, kind: &'static str },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("firing budget exhausted (10000 firings or trigger depth 64); the model may trigger itself in a loop")]
    FiringLimit,
}

/// An error bound to the statement that raised it.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("statement {statement} (line {line}): {error}", line = .pos.line)]
pub struct RunError {
    /// 1-based statement index, which is also the step it ran as.
    pub statement: usize,
    pub pos: Pos,
    pub error: EngineError,
}

/// Result of a run: the final state, the trace, and the error that stopped
/// the run early, if any. The trace holds everything up to (not including)
/// the failed statement.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub state: State,
    pub trace: Trace,
    pub error: Option<RunError>,
}

impl RunOutcome {
    pub fn ok(&self) -> bool {
        self.error.is_none()
    }
}

// ---------------------------------------------------------------------------
// Expression environment
// ---------------------------------------------------------------------------

/// Name resolution at a firing node: the moving thing's attributes and the
/// owner chain's variables (innermost thimac shadows its ancestors).
/// `Thimac.name` reads that thimac's variable, else the newest stored
/// record carrying the attribute.
struct NodeEnv<'a> {
    attrs: &'a mut BTreeMap<String, Value>,
    chain: Vec<ThimacId>,
    vars: &'a mut BTreeMap<ThimacId, BTreeMap<String, Value>>,
    storages: &'a BTreeMap<ThimacId, Vec<Thing>>,
    model: &'a StaticModel,
}

impl Env for NodeEnv<'_> {
    fn read_attr(&self, name: &str) -> Option<Value> {
        self.attrs.get(name).cloned()
    }

    fn read_var(&self, name: &str) -> Option<Value> {
        self.chain
            .iter()
            .find_map(|t| self.vars.get(t).and_then(|m| m.get(name)))
            .cloned()
    }

    fn read_qualified(&self, thimac: &str, name: &str) -> Result<Value, EvalError> {
        let tid = ThimacId::new(thimac);
        if self.model.thimac(&tid).is_none() {
            return Err(EvalError::UnknownThimac(thimac.to_string()));
        }
        if let Some(v) = self.vars.get(&tid).and_then(|m| m.get(name)) {
            return Ok(v.clone());
        }
        if let Some(things) = self.storages.get(&tid) {
            for th in things.iter().rev() {
                if let Some(v) = th.attrs.get(name) {
                    return Ok(v.clone());
                }
            }
        }
        Err(EvalError::UnresolvedQualified { thimac: thimac.to_string(), name: name.to_string() })
    }

    fn write_attr(&mut self, name: &str, value: Value) {
        self.attrs.insert(name.to_string(), value);
    }

    fn write_var(&mut self, name: &str, value: Value) -> bool {
        let holder = self
            .chain
            .iter()
            .find(|t| self.vars.get(*t).is_some_and(|m| m.contains_key(name)));
        match holder {
            Some(t) => {
                self.vars.get_mut(t).expect("found above").insert(name.to_string(), value);
                true
            }
            None => false,
        }
    }
}

// ---------------------------------------------------------------------------
// Engine
// ---------------------------------------------------------------------------

/// One recorded node firing within the current statement.
struct Firing {
    node: NodeId,
    attrs: BTreeMap<String, Value>,
    /// Owner-chain variables at firing time, innermost shadowing outer.
    vars: BTreeMap<String, Value>,
}

struct Engine<'a> {
    bundle: &'a Bundle,
    state: State,
    trace: Trace,
    firings: Vec<Firing>,
    budget: u64,
}

/// Runs a script against a validated bundle.
pub fn run_script(bundle: &Bundle, script: &Script) -> RunOutcome {
    let mut eng = Engine {
        bundle,
        state: State::new(bundle),
        trace: Trace::default(),
        firings: Vec::new(),
        budget: 0,
    };
    let mut error = None;
    for (i, stmt) in script.statements.iter().enumerate() {
        eng.state.step += 1;
        eng.firings.clear();
        eng.budget = MAX_FIRINGS;
        let snapshot = eng.state.clone();
        let occ_len = eng.trace.occurrences.len();
        let msg_len = eng.trace.messages.len();
        match eng.exec(stmt) {
            Ok(()) => eng.detect(),
            Err(e) => {
                eng.state = snapshot;
                eng.trace.occurrences.truncate(occ_len);
                eng.trace.messages.truncate(msg_len);
                error = Some(RunError { statement: i + 1, pos: stmt.pos(), error: e });
                break;
            }
        }
    }
    RunOutcome { state: eng.state, trace: eng.trace, error }
}

impl<'a> Engine<'a> {
    fn exec(&mut self, stmt: &Statement) -> Result<(), EngineError> {
        match stmt {
            Statement::CreateInstance { thimac, instance, attrs, .. } => {
                self.create_instance(thimac, instance, attrs)
            }
            Statement::SetAttrs { thimac, instance, attrs, .. } => {
                self.set_attrs(thimac, instance, attrs)
            }
            Statement::Flow(f) => self.flow(f),
            Statement::TriggerEvent { event, attrs, .. } => self.trigger_event(event, attrs),
            Statement::ConditionalPrint { event, message, .. } => {
                self.conditional_print(event, message)
            }
        }
    }

    fn storage_mut(&mut self, thimac: &str) -> Result<&mut Vec<Thing>, EngineError> {
        let tid = ThimacId::new(thimac);
        if self.bundle.model.thimac(&tid).is_none() {
            return Err(EngineError::UnknownThimac(thimac.to_string()));
        }
        self.state
            .storages
            .get_mut(&tid)
            .ok_or_else(|| EngineError::NoStorage(thimac.to_string()))
    }

    fn create_instance(
        &mut self,
        thimac: &str,
        instance: &str,
        attrs: &[(String, Value)],
    ) -> Result<(), EngineError> {
        let id = self.state.fresh_id();
        let things = self.storage_mut(thimac)?;
        match things.iter_mut().rev().find(|t| t.instance.as_deref() == Some(instance)) {
            None => things.push(Thing {
                id,
                instance: Some(instance.to_string()),
                attrs: attrs.iter().cloned().collect(),
            }),
            Some(existing) if !attrs.is_empty() => {
                for (k, v) in attrs {
                    existing.attrs.insert(k.clone(), v.clone());
                }
            }
            Some(_) => {
                return Err(EngineError::DuplicateInstance {
                    thimac: thimac.to_string(),
                    instance: instance.to_string(),
                })
            }
        }
        Ok(())
    }

    fn set_attrs(
        &mut self,
        thimac: &str,
        instance: &str,
        attrs: &[(String, Value)],
    ) -> Result<(), EngineError> {
        let things = self.storage_mut(thimac)?;
        let existing = things
            .iter_mut()
            .rev()
            .find(|t| t.instance.as_deref() == Some(instance))
            .ok_or_else(|| EngineError::UnknownInstance {
                thimac: thimac.to_string(),
                instance: instance.to_string(),
            })?;
        for (k, v) in attrs {
            existing.attrs.insert(k.clone(), v.clone());
        }
        Ok(())
    }

    /// Resolves which node a flow statement enters at. Stage tokens that
    /// name an action kind are advisory; a token naming a node picks that
    /// node (it must belong to the source thimac or a thimac nested in
    /// it). Without a named node, a create flow defaults to the unique
    /// create stage and a pull flow to the unique release stage.
    fn resolve_entry(
        &self,
        src: &ThimacId,
        tokens: &[String],
        create: bool,
    ) -> Result<NodeId, EngineError> {
        let model = &self.bundle.model;
        for tok in tokens {
            if ActionKind::from_token(tok).is_some() {
                continue;
            }
            let node = model
                .node(&NodeId::new(tok.as_str()))
                .filter(|n| model.within(&n.owner, src))
                .ok_or_else(|| EngineError::UnknownNode {
                    thimac: src.to_string(),
                    node: tok.clone(),
                })?;
            return Ok(node.id.clone());
        }
        let want = if create { ActionKind::Create } else { ActionKind::Release };
        let mut cands = model
            .nodes
            .iter()
            .filter(|n| n.kind == want && model.within(&n.owner, src));
        match (cands.next(), cands.next()) {
            (Some(n), None) => Ok(n.id.clone()),
            (None, _) => Err(EngineError::NoEntry { thimac: src.to_string(), kind: want.name() }),
            (Some(a), Some(b)) => {
                let mut names = vec![a.id.to_string(), b.id.to_string()];
                names.extend(cands.map(|n| n.id.to_string()));
                Err(EngineError::AmbiguousEntry {
                    thimac: src.to_string(),
                    kind: want.name(),
                    candidates: names.join(", "),
                })
            }
        }
    }

    fn flow(&mut self, f: &FlowStmt) -> Result<(), EngineError> {
        let bundle = self.bundle;
        let src = ThimacId::new(&f.source_thimac);
        if bundle.model.thimac(&src).is_none() {
            return Err(EngineError::UnknownThimac(f.source_thimac.clone()));
        }
        let entry = self.resolve_entry(&src, &f.source_stages, f.create)?;

        let thing = if f.create {
            let mut attrs = BTreeMap::new();
            if let Some(inst) = &f.source_instance {
                let things = self.storage_mut(&f.source_thimac)?;
                let rec = things
                    .iter()
                    .rev()
                    .find(|t| t.instance.as_deref() == Some(inst.as_str()))
                    .ok_or_else(|| EngineError::UnknownInstance {
                        thimac: f.source_thimac.clone(),
                        instance: inst.clone(),
                    })?;
                attrs = rec.attrs.clone();
            }
            for (k, v) in &f.attrs {
                attrs.insert(k.clone(), v.clone());
            }
            Thing { id: self.state.fresh_id(), instance: f.source_instance.clone(), attrs }
        } else {
            // Pull: take the oldest stored thing matching the statement's
            // instance and attribute criteria.
            let things = self.storage_mut(&f.source_thimac)?;
            let found = things.iter().position(|t| {
                f.source_instance
                    .as_deref()
                    .map_or(true, |i| t.instance.as_deref() == Some(i))
                    && f.attrs.iter().all(|(k, v)| t.attrs.get(k) == Some(v))
            });
            match found {
                Some(i) => things.remove(i),
                None => {
                    return Err(EngineError::StorageMiss {
                        thimac: f.source_thimac.clone(),
                        wanted: wanted_text(&f.source_instance, &f.attrs),
                    })
                }
            }
        };

        if let Some(target) = &f.target {
            self.check_target(target)?;
        }

        let entry_node = bundle.model.node(&entry).expect("resolved against this model");
        self.fire_flow(entry_node, thing, 0)
    }

    /// A flow target never changes state; it asserts where the thing is
    /// headed. The thimac and any named stages must exist, and when an
    /// instance or matching attributes are given, the target's storage
    /// must hold a matching record.
    fn check_target(&self, t: &FlowTarget) -> Result<(), EngineError> {
        let model = &self.bundle.model;
        let tid = ThimacId::new(&t.thimac);
        if model.thimac(&tid).is_none() {
            return Err(EngineError::UnknownThimac(t.thimac.clone()));
        }
        for tok in &t.stages {
            if ActionKind::from_token(tok).is_some() {
                continue;
            }
            model
                .node(&NodeId::new(tok.as_str()))
                .filter(|n| model.within(&n.owner, &tid))
                .ok_or_else(|| EngineError::UnknownNode {
                    thimac: t.thimac.clone(),
                    node: tok.clone(),
                })?;
        }
        if t.instance.is_some() || !t.match_attrs.is_empty() {
            let things = self
                .state
                .storages
                .get(&tid)
                .ok_or_else(|| EngineError::NoStorage(t.thimac.clone()))?;
            let hit = things.iter().rev().any(|th| {
                t.instance.as_deref().map_or(true, |i| th.instance.as_deref() == Some(i))
                    && t.match_attrs.iter().all(|(k, v)| th.attrs.get(k) == Some(v))
            });
            if !hit {
                return Err(EngineError::StorageMiss {
                    thimac: t.thimac.clone(),
                    wanted: wanted_text(&t.instance, &t.match_attrs),
                });
            }
        }
        Ok(())
    }

    /// Sends a thing into the flow structure at `entry` and lets it run
    /// until it comes to rest.
    fn fire_flow(
        &mut self,
        entry: &'a ActionNode,
        mut thing: Thing,
        depth: u32,
    ) -> Result<(), EngineError> {
        let bundle = self.bundle;
        let mut current = entry;
        loop {
            self.fire_node(current, &mut thing.attrs, depth, true)?;
            match bundle.model.flows_from(&current.id).next() {
                Some(arc) => {
                    current = bundle.model.node(&arc.to).expect("validated flow endpoint");
                }
                None => {
                    self.rest(current, thing);
                    return Ok(());
                }
            }
        }
    }

    /// Fires one node: updates (create/process only), firing record,
    /// emitted message, and — when `cascade` is set — the outgoing
    /// triggers, depth-first in declaration order.
    fn fire_node(
        &mut self,
        node: &ActionNode,
        attrs: &mut BTreeMap<String, Value>,
        depth: u32,
        cascade: bool,
    ) -> Result<(), EngineError> {
        if depth > MAX_DEPTH || self.budget == 0 {
            return Err(EngineError::FiringLimit);
        }
        self.budget -= 1;

        if matches!(node.kind, ActionKind::Create | ActionKind::Process)
            && !node.updates.is_empty()
        {
            let chain = self.owner_chain_ids(&node.owner);
            let mut env = NodeEnv {
                attrs: &mut *attrs,
                chain,
                vars: &mut self.state.vars,
                storages: &self.state.storages,
                model: &self.bundle.model,
            };
            exec_updates(&node.updates, &mut env)?;
        }

        self.firings.push(Firing {
            node: node.id.clone(),
            attrs: attrs.clone(),
            vars: self.chain_vars(&node.owner),
        });

        if let Some(msg) = &node.emits {
            self.trace.messages.push((self.state.step, msg.clone()));
        }

        if cascade {
            let bundle = self.bundle;
            for trig in bundle.model.triggers_from(&node.id) {
                let pass = match &trig.guard {
                    None => true,
                    Some(g) => {
                        let chain = self.owner_chain_ids(&node.owner);
                        let env = NodeEnv {
                            attrs: &mut *attrs,
                            chain,
                            vars: &mut self.state.vars,
                            storages: &self.state.storages,
                            model: &bundle.model,
                        };
                        eval_guard(g, &env)?
                    }
                };
                if !pass {
                    continue;
                }
                let target = bundle.model.node(&trig.to).expect("validated trigger endpoint");
                match target.kind {
                    ActionKind::Create | ActionKind::Receive => {
                        let fresh = Thing {
                            id: self.state.fresh_id(),
                            instance: None,
                            attrs: attrs.clone(),
                        };
                        self.fire_flow(target, fresh, depth + 1)?;
                    }
                    _ => {
                        let mut ctx = attrs.clone();
                        self.fire_node(target, &mut ctx, depth + 1, true)?;
                    }
                }
            }
        }
        Ok(())
    }

    /// Where a thing stops when its node has no outgoing flow.
    fn rest(&mut self, node: &ActionNode, thing: Thing) {
        let deposit = matches!(node.kind, ActionKind::Create | ActionKind::Receive)
            && self
                .bundle
                .model
                .thimac(&node.owner)
                .is_some_and(|t| t.has_storage);
        if deposit {
            self.state.storages.entry(node.owner.clone()).or_default().push(thing);
        } else {
            self.state.resting.entry(node.id.clone()).or_default().push(thing);
        }
    }

    fn trigger_event(
        &mut self,
        event: &str,
        payload: &[(String, Value)],
    ) -> Result<(), EngineError> {
        let bundle = self.bundle;
        let ev = bundle
            .event(&EventId::new(event))
            .ok_or_else(|| EngineError::UnknownEvent(event.to_string()))?;
        let order = self.region_order(&ev.region);
        let entry = bundle.model.node(&order[0]).expect("validated region node");

        let mut attrs: BTreeMap<String, Value> = if entry.kind == ActionKind::Create {
            payload.iter().cloned().collect()
        } else {
            match self.state.resting.get(&entry.id).and_then(|v| v.last()) {
                // Nothing to fire the region with: the statement is a no-op.
                None => return Ok(()),
                Some(th) => {
                    let mut a = th.attrs.clone();
                    for (k, v) in payload {
                        a.insert(k.clone(), v.clone());
                    }
                    a
                }
            }
        };

        for nid in &order {
            let node = bundle.model.node(nid).expect("validated region node");
            self.fire_node(node, &mut attrs, 0, false)?;
        }
        Ok(())
    }

    fn conditional_print(&mut self, event: &str, message: &str) -> Result<(), EngineError> {
        let id = EventId::new(event);
        if self.bundle.event(&id).is_none() {
            return Err(EngineError::UnknownEvent(event.to_string()));
        }
        if let Some((_, set)) = &self.state.recent {
            if set.contains(&id) {
                self.trace.messages.push((self.state.step, message.to_string()));
            }
        }
        Ok(())
    }

    /// Region nodes in flow order: repeatedly take the declaration-earliest
    /// node with no unfired predecessor inside the region (forcing progress
    /// on a cyclic region).
    fn region_order(&self, region: &Region) -> Vec<NodeId> {
        let model = &self.bundle.model;
        let decl = |n: &NodeId| model.nodes.iter().position(|x| &x.id == n).unwrap_or(usize::MAX);
        let mut remaining: Vec<NodeId> = region.nodes.iter().cloned().collect();
        remaining.sort_by_key(decl);

        let mut edges: Vec<(NodeId, NodeId)> = Vec::new();
        for a in &region.arcs {
            if let Some(f) = model.flows.iter().find(|f| &f.id == a) {
                edges.push((f.from.clone(), f.to.clone()));
            } else if let Some(t) = model.triggers.iter().find(|t| &t.id == a) {
                edges.push((t.from.clone(), t.to.clone()));
            }
        }
        let mut indeg: BTreeMap<NodeId, usize> =
            remaining.iter().map(|n| (n.clone(), 0)).collect();
        for (_, to) in &edges {
            if let Some(d) = indeg.get_mut(to) {
                *d += 1;
            }
        }

        let mut order = Vec::with_capacity(remaining.len());
        while !remaining.is_empty() {
            let i = remaining.iter().position(|n| indeg[n] == 0).unwrap_or(0);
            let n = remaining.remove(i);
            for (from, to) in &edges {
                if from == &n {
                    if let Some(d) = indeg.get_mut(to) {
                        *d = d.saturating_sub(1);
                    }
                }
            }
            order.push(n);
        }
        order
    }

    fn owner_chain_ids(&self, owner: &ThimacId) -> Vec<ThimacId> {
        self.bundle.model.owner_chain(owner).iter().map(|t| t.id.clone()).collect()
    }

    /// Owner-chain variables flattened for the firing record, innermost
    /// thimac shadowing its ancestors.
    fn chain_vars(&self, owner: &ThimacId) -> BTreeMap<String, Value> {
        let mut out = BTreeMap::new();
        for t in self.bundle.model.owner_chain(owner).iter().rev() {
            if let Some(m) = self.state.vars.get(&t.id) {
                for (k, v) in m {
                    out.insert(k.clone(), v.clone());
                }
            }
        }
        out
    }

    /// Scans event definitions against this statement's firings, appending
    /// occurrences in declaration order.
    fn detect(&mut self) {
        let step = self.state.step;
        let fired: BTreeSet<&NodeId> = self.firings.iter().map(|f| &f.node).collect();
        let mut found = Vec::new();
        let mut occurred = BTreeSet::new();
        'events: for ev in &self.bundle.events {
            if ev.region.nodes.is_empty()
                || !ev.region.nodes.iter().all(|n| fired.contains(n))
            {
                continue;
            }
            let mut binding = Vec::with_capacity(ev.params.len());
            for p in &ev.params {
                let mut value: Option<&Value> = None;
                for firing in &self.firings {
                    if !ev.region.nodes.contains(&firing.node) {
                        continue;
                    }
                    let Some(cand) = firing.attrs.get(p).or_else(|| firing.vars.get(p)) else {
                        continue;
                    };
                    match value {
                        None => value = Some(cand),
                        // Two different values for one parameter: the
                        // firings disagree, so the event did not occur.
                        Some(v) if v != cand => continue 'events,
                        Some(_) => {}
                    }
                }
                match value {
                    Some(v) => binding.push((p.clone(), v.clone())),
                    // A parameter nothing binds also suppresses the event.
                    None => continue 'events,
                }
            }
            found.push(Occurrence { step, event: ev.id.clone(), binding });
            occurred.insert(ev.id.clone());
        }
        self.trace.occurrences.extend(found);
        if !occurred.is_empty() {
            self.state.recent = Some((step, occurred));
        }
    }
}

fn wanted_text(instance: &Option<String>, attrs: &[(String, Value)]) -> String {
    let mut parts = Vec::new();
    if let Some(i) = instance {
        parts.push(format!("instance `{i}`"));
    }
    for (k, v) in attrs {
        parts.push(format!("{k}={v}"));
    }
    if parts.is_empty() {
        "anything (it is empty)".to_string()
    } else {
        parts.join(", ")
    }
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{load_model, parse_script};

    /// A booking machine: a person's name flows in, a seat counter gates
    /// acceptance, accepted passengers land in a nested storage.
    const BOOKING: &str = r#"
        thimac Person {
            storage;
            stage create cName label "enter name";
        }
        thimac Flight {
            storage;
            var x = 0;
            var y = 0;
            stage process pInc updates "y := x + 1";
            stage process pCmp;
            stage process pAcc updates "x := y" emits "accepted";
            thimac Passengers {
                storage;
                stage receive rAdd;
            }
        }
        thimac Store {
            storage;
            stage release rShip;
            stage transfer tOut;
        }
        thimac Ghost {
            stage process pGhost;
        }
        flow cName -> pInc;
        flow rShip -> tOut;
        trigger pInc -> pCmp;
        trigger pCmp -> pAcc when "y <= 2";
        trigger pAcc -> rAdd;
        event E1 (Name) { cName }
        event E2 (Name) { pInc, pCmp }
        event E3 (Name) { pAcc, rAdd }
        event E4 (y) { pInc }
        event E5 (Sku) { rShip }
        composite E1-2 = E1, E2 sharing (Name);
        behavior {
            E1 -> E2;
            E2 -> E3;
            E3 -> E1;
        }
        constraint C1 : binding E1-2;
    "#;

    fn run(model: &str, script: &str) -> RunOutcome {
        let bundle = load_model(model)
            .unwrap_or_else(|d| panic!("model should lower: {d:?}"))
            .bundle;
        let script = parse_script(script)
            .unwrap_or_else(|d| panic!("script should parse: {d:?}"));
        run_script(&bundle, &script)
    }

    fn events_at(out: &RunOutcome, step: u64) -> Vec<&str> {
        out.trace
            .occurrences
            .iter()
            .filter(|o| o.step == step)
            .map(|o| o.event.as_str())
            .collect()
    }

    #[test]
    fn instance_bookkeeping_and_its_errors() {
        let out = run(BOOKING, "Create Flight=Flight1.FlightNo=3825");
        assert!(out.ok());
        let flight = &out.state.storages[&"Flight".into()];
        assert_eq!(flight.len(), 1);
        assert_eq!(flight[0].instance.as_deref(), Some("Flight1"));
        assert_eq!(flight[0].attrs["FlightNo"], Value::Int(3825));
        // Bookkeeping fires nothing.
        assert!(out.trace.occurrences.is_empty());

        // The space form updates an existing record.
        let out = run(BOOKING, "Create Flight=Flight1\nCreate Flight Flight1. FlightNo=99");
        assert!(out.ok());
        assert_eq!(
            out.state.storages[&"Flight".into()][0].attrs["FlightNo"],
            Value::Int(99)
        );

        let out = run(BOOKING, "Create Flight=F1\nCreate Flight=F1");
        let err = out.error.unwrap();
        assert_eq!(err.statement, 2);
        assert_eq!(
            err.error,
            EngineError::DuplicateInstance { thimac: "Flight".into(), instance: "F1".into() }
        );

        let out = run(BOOKING, "Create Flight F1. A=1");
        assert!(matches!(out.error.unwrap().error, EngineError::UnknownInstance { .. }));

        let out = run(BOOKING, "Create Ghost=G1");
        assert_eq!(out.error.unwrap().error, EngineError::NoStorage("Ghost".into()));

        let out = run(BOOKING, "Create Nobody=N1");
        assert_eq!(out.error.unwrap().error, EngineError::UnknownThimac("Nobody".into()));
    }

    #[test]
    fn a_flow_fires_the_chain_and_deposits_at_the_receiving_storage() {
        let out = run(
            BOOKING,
            "Create Flight=Flight1.FlightNo=3825\n\
             Create Person=Person1\n\
             Create Person Person1. Name=Michael\n\
             Create.Person=Person1.create.release →\n\
             Flight=Flight1.FlightNo=3825.receive",
        );
        assert!(out.ok(), "{:?}", out.error);

        // Statement 4 (the flow) fires cName, pInc, pCmp, pAcc, rAdd.
        assert_eq!(events_at(&out, 4), ["E1", "E2", "E3", "E4"]);
        let e1 = &out.trace.occurrences[0];
        assert_eq!(e1.binding, vec![("Name".to_string(), Value::Text("Michael".into()))]);
        let e4 = &out.trace.occurrences[3];
        assert_eq!(e4.binding, vec![("y".to_string(), Value::Int(1))]);

        assert_eq!(out.state.vars[&"Flight".into()]["x"], Value::Int(1));
        let passengers = &out.state.storages[&"Passengers".into()];
        assert_eq!(passengers.len(), 1);
        assert_eq!(passengers[0].attrs["Name"], Value::Text("Michael".into()));
        // The materialized passenger is a fresh thing, not an instance.
        assert_eq!(passengers[0].instance, None);
        // The flowing thing rested at pInc, which has no outgoing flow.
        assert_eq!(out.state.resting[&"pInc".into()].len(), 1);
        assert_eq!(out.trace.messages, vec![(4, "accepted".to_string())]);
    }

    #[test]
    fn a_false_guard_stops_the_cascade() {
        let book = "Create.Person.Name=N%.create\n";
        let script = format!(
            "Create Flight=F1\n{}{}{}",
            book.replace('%', "1"),
            book.replace('%', "2"),
            book.replace('%', "3"),
        );
        let out = run(BOOKING, &script);
        assert!(out.ok(), "{:?}", out.error);

        // Third booking: y = 3 fails the `y <= 2` guard, so pAcc and rAdd
        // never fire — E1, E2, E4 only.
        assert_eq!(events_at(&out, 4), ["E1", "E2", "E4"]);
        assert_eq!(out.state.vars[&"Flight".into()]["x"], Value::Int(2));
        assert_eq!(out.state.storages[&"Passengers".into()].len(), 2);
        // Everyone who asked is parked at pInc regardless.
        assert_eq!(out.state.resting[&"pInc".into()].len(), 3);
    }

    #[test]
    fn trigger_event_fires_the_region_only_and_copies_the_resting_thing() {
        let out = run(
            BOOKING,
            "Create Flight=F1\n\
             Create.Person.Name=Michael.create\n\
             Trigger Event E2 (Name=bob)\n\
             If E2 print \"seen\"",
        );
        assert!(out.ok(), "{:?}", out.error);

        // Step 3 re-fires pInc and pCmp from the thing parked at pInc,
        // with the payload overlaid.
        assert_eq!(events_at(&out, 3), ["E2", "E4"]);
        let e2 = out.trace.occurrences.iter().find(|o| o.step == 3).unwrap();
        assert_eq!(e2.binding, vec![("Name".to_string(), Value::Text("bob".into()))]);

        // pInc's update ran for real: y went 1 (flow) then 2 (manual).
        assert_eq!(out.state.vars[&"Flight".into()]["y"], Value::Int(2));
        // But there was no cascade and nothing moved: x and the
        // passenger count still reflect one booking, the parked thing
        // is untouched and still named Michael.
        assert_eq!(out.state.vars[&"Flight".into()]["x"], Value::Int(1));
        assert_eq!(out.state.storages[&"Passengers".into()].len(), 1);
        let parked = &out.state.resting[&"pInc".into()];
        assert_eq!(parked.len(), 1);
        assert_eq!(parked[0].attrs["Name"], Value::Text("Michael".into()));

        assert_eq!(
            out.trace.messages,
            vec![(2, "accepted".to_string()), (4, "seen".to_string())]
        );
    }

    #[test]
    fn trigger_event_is_vacuous_without_a_resting_thing() {
        let out = run(BOOKING, "Trigger Event E3\nIf E3 print \"never\"");
        assert!(out.ok(), "{:?}", out.error);
        assert!(out.trace.occurrences.is_empty());
        assert!(out.trace.messages.is_empty());
    }

    #[test]
    fn trigger_event_at_a_create_entry_mints_and_discards() {
        let out = run(BOOKING, "Trigger Event E1 (Name=Zed)");
        assert!(out.ok(), "{:?}", out.error);
        assert_eq!(events_at(&out, 1), ["E1"]);
        assert_eq!(
            out.trace.occurrences[0].binding,
            vec![("Name".to_string(), Value::Text("Zed".into()))]
        );
        // The minted thing is gone: not stored, not parked.
        assert_eq!(out.state.storages[&"Person".into()].len(), 0);
        assert!(out.state.resting.is_empty());
    }

    #[test]
    fn conditional_print_matches_only_the_latest_occurrences() {
        let out = run(
            BOOKING,
            "Create Flight=F1\n\
             Create.Person.Name=Ada.create\n\
             If E3 print \"booked\"\n\
             Trigger Event E1 (Name=Zed)\n\
             If E3 print \"stale\"\n\
             If E1 print \"manual\"",
        );
        assert!(out.ok(), "{:?}", out.error);
        // "booked" prints (E3 occurred at the most recent bearing step 2);
        // "stale" does not (step 4 bore E1, displacing step 2); "manual"
        // does.
        let printed: Vec<&str> = out
            .trace
            .messages
            .iter()
            .filter(|(_, m)| m != "accepted")
            .map(|(_, m)| m.as_str())
            .collect();
        assert_eq!(printed, ["booked", "manual"]);

        let out = run(BOOKING, "If E9 print \"x\"");
        assert_eq!(out.error.unwrap().error, EngineError::UnknownEvent("E9".into()));
    }

    #[test]
    fn pull_flows_take_the_oldest_match_and_leave_the_rest() {
        let out = run(
            BOOKING,
            "Create Store=A.Sku=1\n\
             Create Store=B.Sku=2\n\
             Store.rShip",
        );
        assert!(out.ok(), "{:?}", out.error);
        // Oldest (A) shipped: fired rShip (E5 binds its Sku), flowed to
        // tOut and rests there since a transfer stage does not deposit.
        assert_eq!(events_at(&out, 3), ["E5"]);
        assert_eq!(out.trace.occurrences[0].binding, vec![("Sku".to_string(), Value::Int(1))]);
        let store = &out.state.storages[&"Store".into()];
        assert_eq!(store.len(), 1);
        assert_eq!(store[0].instance.as_deref(), Some("B"));
        assert_eq!(out.state.resting[&"tOut".into()][0].instance.as_deref(), Some("A"));

        // Attribute criteria select a specific thing.
        let out = run(
            BOOKING,
            "Create Store=A.Sku=1\n\
             Create Store=B.Sku=2\n\
             Store.Sku=2.rShip",
        );
        assert!(out.ok(), "{:?}", out.error);
        assert_eq!(out.state.storages[&"Store".into()][0].instance.as_deref(), Some("A"));

        // No match is an error, not a silent no-op.
        let out = run(BOOKING, "Store.rShip");
        assert!(matches!(out.error.unwrap().error, EngineError::StorageMiss { .. }));
    }

    #[test]
    fn flow_target_is_validated_but_never_mutated() {
        let out = run(
            BOOKING,
            "Create Flight=F1.FlightNo=7\n\
             Create.Person.Name=Ada.create → Flight=F1.FlightNo=8",
        );
        let err = out.error.unwrap();
        assert_eq!(err.statement, 2);
        assert!(matches!(err.error, EngineError::StorageMiss { .. }));

        let out = run(BOOKING, "Create.Person.Name=Ada.create → Nowhere");
        assert_eq!(out.error.unwrap().error, EngineError::UnknownThimac("Nowhere".into()));

        let out = run(BOOKING, "Create.Person.Name=Ada.create → Flight=F9");
        assert!(matches!(out.error.unwrap().error, EngineError::StorageMiss { .. }));
    }

    #[test]
    fn entry_resolution_names_nodes_and_rejects_strangers() {
        // pInc belongs to Flight, not Person.
        let out = run(BOOKING, "Create.Person.Name=Ada.pInc");
        assert_eq!(
            out.error.unwrap().error,
            EngineError::UnknownNode { thimac: "Person".into(), node: "pInc".into() }
        );

        // Store has no create stage to default to.
        let out = run(BOOKING, "Create.Store.Sku=9");
        assert_eq!(
            out.error.unwrap().error,
            EngineError::NoEntry { thimac: "Store".into(), kind: "create" }
        );

        // Naming an entry works for pulls too: rShip by name.
        let out = run(BOOKING, "Create Store=A.Sku=1\nStore=A.rShip");
        assert!(out.ok(), "{:?}", out.error);
        assert_eq!(out.state.storages[&"Store".into()].len(), 0);
    }

    #[test]
    fn failing_statements_roll_back_and_stop_the_run() {
        const MODEL: &str = r#"
            thimac M {
                storage;
                var y = 0;
                stage create cIn;
                stage process pOk updates "y := y + 1";
                stage process pBad updates "z := nosuch + 1";
            }
            flow cIn -> pOk;
            trigger pOk -> pBad;
            event EM { cIn }
        "#;
        let out = run(MODEL, "Create.M.k=1\nCreate M=Z1");
        let err = out.error.unwrap();
        assert_eq!(err.statement, 1);
        assert!(matches!(err.error, EngineError::Eval(EvalError::UnknownName(_))));
        // pOk's increment was rolled back with the rest of the statement,
        // and the second statement never ran.
        assert_eq!(out.state.vars[&"M".into()]["y"], Value::Int(0));
        assert!(out.state.resting.is_empty());
        assert_eq!(out.state.storages[&"M".into()].len(), 0);
        assert!(out.trace.occurrences.is_empty());
    }

    #[test]
    fn mutual_triggers_hit_the_firing_limit() {
        const MODEL: &str = r#"
            thimac L {
                var n = 0;
                stage create cGo;
                stage process pA updates "n := n + 1";
                stage process pB;
            }
            flow cGo -> pA;
            trigger pA -> pB;
            trigger pB -> pA;
            event EL { cGo }
        "#;
        let out = run(MODEL, "Create.L.seed=1");
        assert_eq!(out.error.unwrap().error, EngineError::FiringLimit);
        assert_eq!(out.state.vars[&"L".into()]["n"], Value::Int(0));
    }

    #[test]
    fn conflicting_parameter_values_suppress_the_occurrence() {
        const MODEL: &str = r#"
            thimac K {
                stage create cK updates "k := 1";
                stage process pK updates "k := 5";
            }
            flow cK -> pK;
            event EC (k) { cK, pK }
            event ED (k) { cK }
            event EE (missing) { cK }
        "#;
        let out = run(MODEL, "Create.K.seed=0");
        assert!(out.ok(), "{:?}", out.error);
        // cK fired with k=1, pK with k=5: EC cannot settle on a value and
        // EE has nothing to bind `missing` from; only ED occurs.
        assert_eq!(events_at(&out, 1), ["ED"]);
        assert_eq!(out.trace.occurrences[0].binding, vec![("k".to_string(), Value::Int(1))]);
    }

    #[test]
    fn qualified_references_read_the_newest_stored_attribute() {
        const MODEL: &str = r#"
            thimac Q {
                storage;
                stage create cQ;
                stage process pQ updates "seen := Q.tag";
            }
            flow cQ -> pQ;
            event EQ (seen) { pQ }
        "#;
        let out = run(
            MODEL,
            "Create Q=Q1.tag=7\n\
             Create Q=Q2.tag=9\n\
             Create.Q.x=0",
        );
        assert!(out.ok(), "{:?}", out.error);
        let eq = out.trace.occurrences.iter().find(|o| o.event.as_str() == "EQ").unwrap();
        assert_eq!(eq.binding, vec![("seen".to_string(), Value::Int(9))]);
    }
}
