//! Checks event traces against declared constraints.
//!
//! Checkers read the flat occurrence list a run produced (ordered by step,
//! detection order within a step) and report violations; they never mutate
//! anything. All semantics are in terms of *steps*: two occurrences are
//! simultaneous exactly when they carry the same step.
//!
//! * **Binding** over a composite: whenever the composite's first declared
//!   member occurs, every other member must occur at the same step, and
//!   the occurrences must agree on every shared variable both sides bind.
//!   The first member anchors the check — other members may freely occur
//!   on their own.
//! * **Immediate succession** `first` → `second`: the occurrence right
//!   after each `first` (in the whole trace) must be `second`, agreeing on
//!   every parameter the two events have in common. A `first` with nothing
//!   after it is a violation too.
//! * **At most once** over a composite with a key: the composite
//!   *completes* at a step when every member occurs there and all their
//!   occurrences agree on the shared variables. Each key combination may
//!   run through its lifecycle once: completing marks it active
//!   (re-completing while active is allowed — it is the same ongoing
//!   enrollment, not a new one), an occurrence of the end-marker event
//!   `end:<composite>` for that key closes it, and any completion after
//!   that is a violation. Completions at a step are processed before that
//!   step's end markers.
//! * **Behavior**: projected onto the behavior model's events, each
//!   consecutive pair of occurrences must follow a declared chronology
//!   edge. An edge marked non-repeatable may be taken at most once per
//!   key, the key being the two events' common parameters (the earlier
//!   occurrence's value wins; parameters neither binds are skipped).
//!
//! Violations carry the indices of the occurrences that witness them and
//! the step at which the constraint became violated; messages describe the
//! cause without repeating the step.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{Occurrence, Trace};
use crate::expr::Value;
use crate::model::{Bundle, ConstraintSpec, EventId};

/// One constraint violation found in a trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    /// Constraint id, or `behavior` for the chronology check.
    pub constraint: String,
    /// Step at which the violation materialized.
    pub time: u64,
    pub message: String,
    /// Indices into the trace's occurrence list witnessing the violation.
    pub occurrences: Vec<usize>,
}

/// Outcome of checking a trace: which checks ran (constraint ids in
/// declaration order, then `behavior` when a behavior model exists) and
/// every violation, ordered by step and then by declaration order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub conforming: bool,
    pub checked: Vec<String>,
    pub violations: Vec<Violation>,
}

/// A constraint that cannot be checked against this bundle.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CheckError {
    #[error("constraint references unknown composite `{0}`")]
    UnknownComposite(String),
    #[error("constraint references unknown event `{0}`")]
    UnknownEvent(String),
    #[error("at-most-once key `{key}` is not a shared variable of `{composite}`")]
    BadKey { composite: String, key: String },
}

/// The value an occurrence binds for `var`, if any.
fn bound<'t>(occ: &'t Occurrence, var: &str) -> Option<&'t Value> {
    occ.binding.iter().find(|(k, _)| k == var).map(|(_, v)| v)
}

/// First shared variable both occurrences bind to different values.
fn shared_disagreement<'t>(
    shared: &'t [String],
    a: &'t Occurrence,
    b: &'t Occurrence,
) -> Option<(&'t str, &'t Value, &'t Value)> {
    shared.iter().find_map(|var| match (bound(a, var), bound(b, var)) {
        (Some(x), Some(y)) if x != y => Some((var.as_str(), x, y)),
        _ => None,
    })
}

/// Value identity used for keys: distinguishes `1` from `"1"` and nests.
fn value_key(v: &Value) -> String {
    format!("{v:?}")
}

// ---------------------------------------------------------------------------
// Individual checkers
// ---------------------------------------------------------------------------

/// Checks a binding constraint; see the module docs for the semantics.
pub fn check_binding(
    bundle: &Bundle,
    trace: &Trace,
    constraint: &str,
    composite: &EventId,
) -> Result<Vec<Violation>, CheckError> {
    let comp = bundle
        .composite(composite)
        .ok_or_else(|| CheckError::UnknownComposite(composite.to_string()))?;
    let Some(anchor) = comp.members.first() else {
        return Ok(Vec::new());
    };
    let mut out = Vec::new();
    for (i, occ) in trace.occurrences.iter().enumerate() {
        if &occ.event != anchor {
            continue;
        }
        for member in &comp.members[1..] {
            let mut matched = false;
            let mut mismatch: Option<(usize, &str, &Value, &Value)> = None;
            for (j, cand) in trace.occurrences.iter().enumerate() {
                if cand.step != occ.step || &cand.event != member {
                    continue;
                }
                match shared_disagreement(&comp.shared, occ, cand) {
                    None => {
                        matched = true;
                        break;
                    }
                    Some((var, a, b)) => {
                        if mismatch.is_none() {
                            mismatch = Some((j, var, a, b));
                        }
                    }
                }
            }
            if matched {
                continue;
            }
            match mismatch {
                Some((j, var, a, b)) => out.push(Violation {
                    constraint: constraint.to_string(),
                    time: occ.step,
                    message: format!(
                        "binding of `{}`: `{anchor}` and `{member}` disagree on shared `{var}` ({a} vs {b})",
                        comp.id
                    ),
                    occurrences: vec![i, j],
                }),
                None => out.push(Violation {
                    constraint: constraint.to_string(),
                    time: occ.step,
                    message: format!(
                        "binding of `{}`: `{anchor}` occurred without `{member}`",
                        comp.id
                    ),
                    occurrences: vec![i],
                }),
            }
        }
    }
    Ok(out)
}

/// Checks an immediate-succession constraint.
pub fn check_succession(
    bundle: &Bundle,
    trace: &Trace,
    constraint: &str,
    first: &EventId,
    second: &EventId,
) -> Result<Vec<Violation>, CheckError> {
    let f = bundle
        .event(first)
        .ok_or_else(|| CheckError::UnknownEvent(first.to_string()))?;
    let s = bundle
        .event(second)
        .ok_or_else(|| CheckError::UnknownEvent(second.to_string()))?;
    let shared: Vec<String> =
        f.params.iter().filter(|p| s.params.contains(p)).cloned().collect();

    let mut out = Vec::new();
    for (i, occ) in trace.occurrences.iter().enumerate() {
        if &occ.event != first {
            continue;
        }
        match trace.occurrences.get(i + 1) {
            None => out.push(Violation {
                constraint: constraint.to_string(),
                time: occ.step,
                message: format!(
                    "`{second}` must come right after `{first}`, but nothing followed"
                ),
                occurrences: vec![i],
            }),
            Some(next) if &next.event != second => out.push(Violation {
                constraint: constraint.to_string(),
                time: next.step,
                message: format!(
                    "`{}` came right after `{first}` where `{second}` was required",
                    next.event
                ),
                occurrences: vec![i, i + 1],
            }),
            Some(next) => {
                if let Some((var, a, b)) = shared_disagreement(&shared, occ, next) {
                    out.push(Violation {
                        constraint: constraint.to_string(),
                        time: next.step,
                        message: format!(
                            "`{second}` followed `{first}` but `{var}` changed ({a} vs {b})"
                        ),
                        occurrences: vec![i, i + 1],
                    });
                }
            }
        }
    }
    Ok(out)
}

/// Key lifecycle for the at-most-once check. Holds the occurrence index
/// anchoring the original completion.
enum Lifecycle {
    Active(usize),
    Ended(usize),
}

/// Checks an at-most-once constraint.
pub fn check_at_most_once(
    bundle: &Bundle,
    trace: &Trace,
    constraint: &str,
    composite: &EventId,
    key: &[String],
) -> Result<Vec<Violation>, CheckError> {
    let comp = bundle
        .composite(composite)
        .ok_or_else(|| CheckError::UnknownComposite(composite.to_string()))?;
    for k in key {
        if !comp.shared.contains(k) {
            return Err(CheckError::BadKey {
                composite: composite.to_string(),
                key: k.clone(),
            });
        }
    }
    let end_id = EventId::new(format!("end:{}", comp.id.as_str()));

    // Occurrences grouped by step, preserving trace order within a step.
    let mut by_step: BTreeMap<u64, Vec<(usize, &Occurrence)>> = BTreeMap::new();
    for (i, occ) in trace.occurrences.iter().enumerate() {
        by_step.entry(occ.step).or_default().push((i, occ));
    }

    let mut lifecycle: BTreeMap<Vec<String>, Lifecycle> = BTreeMap::new();
    let mut out = Vec::new();

    for (&t, at_step) in &by_step {
        // Does the composite complete at this step?
        let member_occs: Vec<(usize, &Occurrence)> = at_step
            .iter()
            .copied()
            .filter(|(_, o)| comp.members.contains(&o.event))
            .collect();
        let all_present = comp
            .members
            .iter()
            .all(|m| member_occs.iter().any(|(_, o)| &o.event == m));
        if all_present && !comp.members.is_empty() {
            // Shared variables must be single-valued across the step.
            let mut values: BTreeMap<&String, &Value> = BTreeMap::new();
            let mut consistent = true;
            'shared: for var in &comp.shared {
                for (_, o) in &member_occs {
                    if let Some(v) = bound(o, var) {
                        match values.get(var) {
                            None => {
                                values.insert(var, v);
                            }
                            Some(prev) if *prev != v => {
                                consistent = false;
                                break 'shared;
                            }
                            Some(_) => {}
                        }
                    }
                }
            }
            let key_values: Option<Vec<&Value>> =
                key.iter().map(|k| values.get(k).copied()).collect();
            if consistent {
                if let Some(kv) = key_values {
                    let key_id: Vec<String> = kv.iter().map(|v| value_key(v)).collect();
                    let anchor = member_occs.iter().map(|(i, _)| *i).min().expect("nonempty");
                    match lifecycle.get(&key_id) {
                        None => {
                            lifecycle.insert(key_id, Lifecycle::Active(anchor));
                        }
                        // Re-completing while active is the same ongoing
                        // enrollment; only completion after the end marker
                        // violates.
                        Some(Lifecycle::Active(_)) => {}
                        Some(Lifecycle::Ended(orig)) => {
                            let pairs: Vec<String> = key
                                .iter()
                                .zip(&kv)
                                .map(|(k, v)| format!("{k}={v}"))
                                .collect();
                            out.push(Violation {
                                constraint: constraint.to_string(),
                                time: t,
                                message: format!(
                                    "`{}` completed again for {} after its end marker",
                                    comp.id,
                                    pairs.join(", ")
                                ),
                                occurrences: vec![*orig, anchor],
                            });
                        }
                    }
                }
            }
        }

        // End markers close their key's lifecycle.
        for (_, occ) in at_step.iter().filter(|(_, o)| o.event == end_id) {
            let key_values: Option<Vec<&Value>> = key.iter().map(|k| bound(occ, k)).collect();
            let Some(kv) = key_values else { continue };
            let key_id: Vec<String> = kv.iter().map(|v| value_key(v)).collect();
            if let Some(Lifecycle::Active(a)) = lifecycle.get(&key_id) {
                lifecycle.insert(key_id, Lifecycle::Ended(*a));
            }
        }
    }
    Ok(out)
}

/// Checks the behavior model's chronology over the trace.
pub fn check_behavior(bundle: &Bundle, trace: &Trace) -> Result<Vec<Violation>, CheckError> {
    let Some(behavior) = &bundle.behavior else {
        return Ok(Vec::new());
    };
    for e in &behavior.events {
        if bundle.event(e).is_none() {
            return Err(CheckError::UnknownEvent(e.to_string()));
        }
    }
    let projected: Vec<(usize, &Occurrence)> = trace
        .occurrences
        .iter()
        .enumerate()
        .filter(|(_, o)| behavior.events.contains(&o.event))
        .collect();

    let mut taken: BTreeMap<(&EventId, &EventId), BTreeSet<Vec<String>>> = BTreeMap::new();
    let mut out = Vec::new();
    for pair in projected.windows(2) {
        let (ia, a) = pair[0];
        let (ib, b) = pair[1];
        let edge = behavior
            .edges
            .iter()
            .find(|e| e.from == a.event && e.to == b.event);
        match edge {
            None => out.push(Violation {
                constraint: "behavior".to_string(),
                time: b.step,
                message: format!(
                    "chronology has no step from `{}` to `{}`",
                    a.event, b.event
                ),
                occurrences: vec![ia, ib],
            }),
            Some(edge) if !edge.repeatable => {
                let pa = &bundle.event(&a.event).expect("checked above").params;
                let pb = &bundle.event(&b.event).expect("checked above").params;
                let mut key_id = Vec::new();
                let mut pairs = Vec::new();
                for p in pa.iter().filter(|p| pb.contains(*p)) {
                    if let Some(v) = bound(a, p).or_else(|| bound(b, p)) {
                        key_id.push(value_key(v));
                        pairs.push(format!("{p}={v}"));
                    }
                }
                let seen = taken.entry((&a.event, &b.event)).or_default();
                if !seen.insert(key_id) {
                    let for_key = if pairs.is_empty() {
                        String::new()
                    } else {
                        format!(" for {}", pairs.join(", "))
                    };
                    out.push(Violation {
                        constraint: "behavior".to_string(),
                        time: b.step,
                        message: format!(
                            "non-repeatable step `{}` to `{}` taken again{for_key}",
                            a.event, b.event
                        ),
                        occurrences: vec![ia, ib],
                    });
                }
            }
            Some(_) => {}
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Evaluation of a whole bundle
// ---------------------------------------------------------------------------

/// Runs every declared constraint and the behavior check over a trace.
/// Violations come back ordered by step, ties broken by constraint
/// declaration order (the behavior check last).
pub fn evaluate(bundle: &Bundle, trace: &Trace) -> Result<Report, CheckError> {
    let mut checked = Vec::new();
    let mut tagged: Vec<(usize, Violation)> = Vec::new();
    for (idx, spec) in bundle.constraints.iter().enumerate() {
        let vs = match spec {
            ConstraintSpec::Binding { id, composite } => {
                check_binding(bundle, trace, id, composite)?
            }
            ConstraintSpec::ImmediateSuccession { id, first, second } => {
                check_succession(bundle, trace, id, first, second)?
            }
            ConstraintSpec::AtMostOnce { id, composite, key } => {
                check_at_most_once(bundle, trace, id, composite, key)?
            }
        };
        checked.push(spec.id().to_string());
        tagged.extend(vs.into_iter().map(|v| (idx, v)));
    }
    if bundle.behavior.is_some() {
        let idx = bundle.constraints.len();
        let vs = check_behavior(bundle, trace)?;
        checked.push("behavior".to_string());
        tagged.extend(vs.into_iter().map(|v| (idx, v)));
    }
    tagged.sort_by(|(ia, va), (ib, vb)| (va.time, ia).cmp(&(vb.time, ib)));
    let violations: Vec<Violation> = tagged.into_iter().map(|(_, v)| v).collect();
    Ok(Report { conforming: violations.is_empty(), checked, violations })
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::load_model;

    const MODEL: &str = r#"
        thimac A {
            stage create c1;
            stage process p1;
            stage process p2;
            stage process p3;
        }
        flow c1 -> p1;
        trigger p1 -> p2;
        trigger p2 -> p3;
        event E1 (x) { c1 }
        event E2 (x, y) { p1 }
        event E3 (x) { p2 }
        event E5 (x) { p3 }
        event end:E2-3 (x) { p3 }
        composite E2-3 = E2, E3 sharing (x);
        behavior {
            E1 -> E2;
            E2 -> E3 norepeat;
            E3 -> E1;
        }
        constraint CB : binding E2-3;
        constraint CS : succession E1, E2;
        constraint CO : atmostonce E2-3 key (x);
    "#;

    fn bundle() -> Bundle {
        load_model(MODEL).expect("model lowers").bundle
    }

    fn occ(step: u64, event: &str, binding: &[(&str, i64)]) -> Occurrence {
        Occurrence {
            step,
            event: event.into(),
            binding: binding
                .iter()
                .map(|(k, v)| (k.to_string(), Value::Int(*v)))
                .collect(),
        }
    }

    fn trace(occurrences: Vec<Occurrence>) -> Trace {
        Trace { occurrences, messages: vec![] }
    }

    #[test]
    fn binding_holds_when_members_cooccur_and_agree() {
        let t = trace(vec![
            occ(1, "E2", &[("x", 1), ("y", 9)]),
            occ(1, "E3", &[("x", 1)]),
        ]);
        let vs = check_binding(&bundle(), &t, "CB", &"E2-3".into()).unwrap();
        assert!(vs.is_empty());
    }

    #[test]
    fn binding_anchors_on_the_first_declared_member() {
        // E2 without E3 violates; E3 without E2 does not.
        let t = trace(vec![occ(1, "E2", &[("x", 1), ("y", 0)])]);
        let vs = check_binding(&bundle(), &t, "CB", &"E2-3".into()).unwrap();
        assert_eq!(vs.len(), 1);
        assert_eq!(vs[0].time, 1);
        assert_eq!(vs[0].occurrences, vec![0]);
        assert!(vs[0].message.contains("`E2` occurred without `E3`"), "{}", vs[0].message);

        let t = trace(vec![occ(1, "E3", &[("x", 1)])]);
        assert!(check_binding(&bundle(), &t, "CB", &"E2-3".into()).unwrap().is_empty());
    }

    #[test]
    fn binding_requires_shared_agreement() {
        let t = trace(vec![
            occ(1, "E2", &[("x", 1), ("y", 0)]),
            occ(1, "E3", &[("x", 2)]),
        ]);
        let vs = check_binding(&bundle(), &t, "CB", &"E2-3".into()).unwrap();
        assert_eq!(vs.len(), 1);
        assert_eq!(vs[0].occurrences, vec![0, 1]);
        assert!(vs[0].message.contains("disagree on shared `x` (1 vs 2)"), "{}", vs[0].message);
    }

    #[test]
    fn binding_ignores_cooccurrence_at_other_steps() {
        let t = trace(vec![
            occ(1, "E2", &[("x", 1), ("y", 0)]),
            occ(2, "E3", &[("x", 1)]),
        ]);
        let vs = check_binding(&bundle(), &t, "CB", &"E2-3".into()).unwrap();
        assert_eq!(vs.len(), 1);
        assert_eq!(vs[0].occurrences, vec![0]);
    }

    #[test]
    fn succession_accepts_the_required_next_occurrence() {
        let t = trace(vec![
            occ(1, "E1", &[("x", 1)]),
            occ(1, "E2", &[("x", 1), ("y", 0)]),
        ]);
        let vs = check_succession(&bundle(), &t, "CS", &"E1".into(), &"E2".into()).unwrap();
        assert!(vs.is_empty());
    }

    #[test]
    fn succession_flags_trailing_wrong_next_and_changed_shared() {
        // Nothing follows E1.
        let t = trace(vec![occ(1, "E1", &[("x", 1)])]);
        let vs = check_succession(&bundle(), &t, "CS", &"E1".into(), &"E2".into()).unwrap();
        assert_eq!(vs.len(), 1);
        assert_eq!((vs[0].time, vs[0].occurrences.clone()), (1, vec![0]));
        assert!(vs[0].message.contains("nothing followed"), "{}", vs[0].message);

        // The wrong event follows.
        let t = trace(vec![occ(1, "E1", &[("x", 1)]), occ(2, "E3", &[("x", 1)])]);
        let vs = check_succession(&bundle(), &t, "CS", &"E1".into(), &"E2".into()).unwrap();
        assert_eq!(vs.len(), 1);
        assert_eq!((vs[0].time, vs[0].occurrences.clone()), (2, vec![0, 1]));
        assert!(vs[0].message.contains("`E3` came right after `E1`"), "{}", vs[0].message);

        // The right event follows with a different shared value.
        let t = trace(vec![
            occ(1, "E1", &[("x", 1)]),
            occ(2, "E2", &[("x", 2), ("y", 0)]),
        ]);
        let vs = check_succession(&bundle(), &t, "CS", &"E1".into(), &"E2".into()).unwrap();
        assert_eq!(vs.len(), 1);
        assert!(vs[0].message.contains("`x` changed (1 vs 2)"), "{}", vs[0].message);
    }

    #[test]
    fn at_most_once_allows_one_lifecycle_per_key() {
        let b = bundle();
        // Complete, re-complete while active, end, then complete again:
        // only the last completion violates.
        let t = trace(vec![
            occ(1, "E2", &[("x", 1), ("y", 0)]),
            occ(1, "E3", &[("x", 1)]),
            occ(2, "E2", &[("x", 1), ("y", 4)]),
            occ(2, "E3", &[("x", 1)]),
            occ(3, "end:E2-3", &[("x", 1)]),
            occ(4, "E2", &[("x", 1), ("y", 0)]),
            occ(4, "E3", &[("x", 1)]),
        ]);
        let vs = check_at_most_once(&b, &t, "CO", &"E2-3".into(), &["x".to_string()]).unwrap();
        assert_eq!(vs.len(), 1);
        assert_eq!(vs[0].time, 4);
        assert_eq!(vs[0].occurrences, vec![0, 5]);
        assert!(vs[0].message.contains("completed again for x=1"), "{}", vs[0].message);

        // A different key is a different lifecycle.
        let t = trace(vec![
            occ(1, "E2", &[("x", 1), ("y", 0)]),
            occ(1, "E3", &[("x", 1)]),
            occ(2, "end:E2-3", &[("x", 1)]),
            occ(3, "E2", &[("x", 2), ("y", 0)]),
            occ(3, "E3", &[("x", 2)]),
        ]);
        let vs = check_at_most_once(&b, &t, "CO", &"E2-3".into(), &["x".to_string()]).unwrap();
        assert!(vs.is_empty());

        // An end marker without a prior completion is inert.
        let t = trace(vec![
            occ(1, "end:E2-3", &[("x", 1)]),
            occ(2, "E2", &[("x", 1), ("y", 0)]),
            occ(2, "E3", &[("x", 1)]),
        ]);
        let vs = check_at_most_once(&b, &t, "CO", &"E2-3".into(), &["x".to_string()]).unwrap();
        assert!(vs.is_empty());
    }

    #[test]
    fn at_most_once_rejects_keys_outside_the_shared_set() {
        let err = check_at_most_once(
            &bundle(),
            &trace(vec![]),
            "CO",
            &"E2-3".into(),
            &["y".to_string()],
        )
        .unwrap_err();
        assert_eq!(
            err,
            CheckError::BadKey { composite: "E2-3".into(), key: "y".into() }
        );
    }

    #[test]
    fn behavior_requires_an_edge_between_consecutive_occurrences() {
        let b = bundle();
        // E1 -> E2 -> E3 follows the chronology.
        let t = trace(vec![
            occ(1, "E1", &[("x", 1)]),
            occ(2, "E2", &[("x", 1), ("y", 0)]),
            occ(3, "E3", &[("x", 1)]),
        ]);
        assert!(check_behavior(&b, &t).unwrap().is_empty());

        // E1 -> E3 skips a step.
        let t = trace(vec![occ(1, "E1", &[("x", 1)]), occ(2, "E3", &[("x", 1)])]);
        let vs = check_behavior(&b, &t).unwrap();
        assert_eq!(vs.len(), 1);
        assert_eq!((vs[0].time, vs[0].occurrences.clone()), (2, vec![0, 1]));
        assert!(vs[0].message.contains("no step from `E1` to `E3`"), "{}", vs[0].message);
    }

    #[test]
    fn behavior_ignores_events_outside_the_model() {
        // E5 is not a behavior event, so E1 -> E5 -> E2 projects to E1 -> E2.
        let t = trace(vec![
            occ(1, "E1", &[("x", 1)]),
            occ(2, "E5", &[("x", 7)]),
            occ(3, "E2", &[("x", 1), ("y", 0)]),
        ]);
        assert!(check_behavior(&bundle(), &t).unwrap().is_empty());
    }

    #[test]
    fn behavior_norepeat_edges_fire_once_per_key() {
        let b = bundle();
        let loop_once = |x: i64| {
            vec![
                occ(1, "E1", &[("x", x)]),
                occ(2, "E2", &[("x", x), ("y", 0)]),
                occ(3, "E3", &[("x", x)]),
            ]
        };
        // Same key twice: the second E2 -> E3 traversal violates.
        let mut occs = loop_once(1);
        for (i, mut o) in loop_once(1).into_iter().enumerate() {
            o.step = 4 + i as u64;
            occs.push(o);
        }
        let vs = check_behavior(&b, &trace(occs)).unwrap();
        assert_eq!(vs.len(), 1);
        assert_eq!(vs[0].occurrences, vec![4, 5]);
        assert!(
            vs[0].message.contains("non-repeatable step `E2` to `E3` taken again for x=1"),
            "{}",
            vs[0].message
        );

        // Different keys: both traversals are fine.
        let mut occs = loop_once(1);
        for (i, mut o) in loop_once(2).into_iter().enumerate() {
            o.step = 4 + i as u64;
            occs.push(o);
        }
        assert!(check_behavior(&b, &trace(occs)).unwrap().is_empty());
    }

    #[test]
    fn evaluate_orders_violations_and_lists_every_check() {
        let b = bundle();
        // Step 1: E2 without E3 (CB violation at t=1); E2 right after E1 is
        // satisfied; step 2: E1 with nothing following (CS trailing at t=2).
        let t = trace(vec![
            occ(1, "E1", &[("x", 1)]),
            occ(1, "E2", &[("x", 1), ("y", 0)]),
            occ(2, "E1", &[("x", 1)]),
        ]);
        let report = evaluate(&b, &t).unwrap();
        assert_eq!(report.checked, ["CB", "CS", "CO", "behavior"]);
        assert!(!report.conforming);
        // CB at t=1, then CS trailing at t=2, then behavior (no E2 -> E1
        // edge... E2 -> E1 is not declared) at t=2 after CS.
        assert_eq!(
            report
                .violations
                .iter()
                .map(|v| (v.constraint.as_str(), v.time))
                .collect::<Vec<_>>(),
            [("CB", 1), ("CS", 2), ("behavior", 2)]
        );

        let clean = evaluate(&b, &trace(vec![])).unwrap();
        assert!(clean.conforming);
        assert!(clean.violations.is_empty());
        assert_eq!(clean.checked.len(), 4);
    }

    #[test]
    fn checkers_reject_unknown_references() {
        let b = bundle();
        let t = trace(vec![]);
        assert_eq!(
            check_binding(&b, &t, "C", &"E9-9".into()).unwrap_err(),
            CheckError::UnknownComposite("E9-9".into())
        );
        assert_eq!(
            check_succession(&b, &t, "C", &"E9".into(), &"E1".into()).unwrap_err(),
            CheckError::UnknownEvent("E9".into())
        );
    }
}
