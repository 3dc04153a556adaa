//! Graphviz export: three views of one model.
//!
//! * [`static_dot`] draws the structural layer — thimacs as nested
//!   clusters (sorted by id, with a cylinder for a store), flow arcs as
//!   solid arrows, trigger arcs as dashed arrows labeled with their guard.
//! * [`events_dot`] draws each declared event as its own cluster showing
//!   its region. Node ids are prefixed with the event id (`E1__cName`) so
//!   a stage appearing in several regions renders once per region.
//! * [`behavior_dot`] draws the chronology graph; a non-repeatable edge is
//!   bold and labeled.
//!
//! Output is deterministic for a given model and uses only plain DOT, so
//! any Graphviz install renders it.

use crate::model::{Bundle, StaticModel, Thimac};

/// Escapes a string for use inside a double-quoted DOT id or label.
fn esc(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

fn quoted(s: &str) -> String {
    format!("\"{}\"", esc(s))
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("  ");
    }
}

fn emit_thimac(model: &StaticModel, thimac: &Thimac, depth: usize, out: &mut String) {
    indent(out, depth);
    out.push_str(&format!("subgraph {} {{\n", quoted(&format!("cluster_{}", thimac.id))));
    indent(out, depth + 1);
    out.push_str(&format!("label={};\n", quoted(&thimac.name)));
    if thimac.has_storage {
        indent(out, depth + 1);
        out.push_str(&format!(
            "{} [shape=cylinder, label=\"store\"];\n",
            quoted(&format!("{}__store", thimac.id))
        ));
    }
    for var in &thimac.variables {
        indent(out, depth + 1);
        out.push_str(&format!(
            "{} [shape=plaintext, label={}];\n",
            quoted(&format!("{}__var_{}", thimac.id, var.name)),
            quoted(&format!("{} = {}", var.name, var.init.value()))
        ));
    }
    for node in model.nodes.iter().filter(|n| n.owner == thimac.id) {
        indent(out, depth + 1);
        out.push_str(&format!(
            "{} [label={}];\n",
            quoted(node.id.as_str()),
            quoted(&format!("{} {}", node.kind.name(), node.id))
        ));
    }
    let mut children: Vec<&Thimac> = model
        .thimacs
        .iter()
        .filter(|t| t.parent.as_ref() == Some(&thimac.id))
        .collect();
    children.sort_by(|a, b| a.id.cmp(&b.id));
    for child in children {
        emit_thimac(model, child, depth + 1, out);
    }
    indent(out, depth);
    out.push_str("}\n");
}

/// Renders the structural layer as a DOT digraph.
pub fn static_dot(model: &StaticModel) -> String {
    let mut out = String::new();
    out.push_str("digraph model {\n");
    out.push_str("  rankdir=LR;\n");
    out.push_str("  node [shape=box, fontname=\"Helvetica\"];\n");

    let mut roots: Vec<&Thimac> = model.thimacs.iter().filter(|t| t.parent.is_none()).collect();
    roots.sort_by(|a, b| a.id.cmp(&b.id));
    for root in roots {
        emit_thimac(model, root, 1, &mut out);
    }

    for flow in &model.flows {
        out.push_str(&format!(
            "  {} -> {};\n",
            quoted(flow.from.as_str()),
            quoted(flow.to.as_str())
        ));
    }
    for trig in &model.triggers {
        let mut attrs = String::from("style=dashed");
        if let Some(guard) = &trig.guard {
            attrs.push_str(&format!(", label={}", quoted(&guard.to_string())));
        }
        out.push_str(&format!(
            "  {} -> {} [{attrs}];\n",
            quoted(trig.from.as_str()),
            quoted(trig.to.as_str())
        ));
    }
    out.push_str("}\n");
    out
}

/// Renders every declared event as a cluster around a copy of its region.
pub fn events_dot(bundle: &Bundle) -> String {
    let model = &bundle.model;
    let mut out = String::new();
    out.push_str("digraph events {\n");
    out.push_str("  rankdir=LR;\n");
    out.push_str("  node [shape=box, fontname=\"Helvetica\"];\n");
    for event in &bundle.events {
        let title = if event.params.is_empty() {
            event.id.to_string()
        } else {
            format!("{}({})", event.id, event.params.join(", "))
        };
        out.push_str(&format!("  subgraph {} {{\n", quoted(&format!("cluster_{}", event.id))));
        out.push_str(&format!("    label={};\n", quoted(&title)));
        let local = |node: &str| format!("{}__{}", event.id, node);
        for node_id in &event.region.nodes {
            let label = match model.node(node_id) {
                Some(node) => format!("{} {}", node.kind.name(), node.id),
                None => node_id.to_string(),
            };
            out.push_str(&format!(
                "    {} [label={}];\n",
                quoted(&local(node_id.as_str())),
                quoted(&label)
            ));
        }
        for arc_id in &event.region.arcs {
            if let Some(flow) = model.flows.iter().find(|f| &f.id == arc_id) {
                out.push_str(&format!(
                    "    {} -> {};\n",
                    quoted(&local(flow.from.as_str())),
                    quoted(&local(flow.to.as_str()))
                ));
            } else if let Some(trig) = model.triggers.iter().find(|t| &t.id == arc_id) {
                let mut attrs = String::from("style=dashed");
                if let Some(guard) = &trig.guard {
                    attrs.push_str(&format!(", label={}", quoted(&guard.to_string())));
                }
                out.push_str(&format!(
                    "    {} -> {} [{attrs}];\n",
                    quoted(&local(trig.from.as_str())),
                    quoted(&local(trig.to.as_str()))
                ));
            }
        }
        out.push_str("  }\n");
    }
    out.push_str("}\n");
    out
}

/// Renders the behavior model's chronology graph. Returns an empty graph
/// when the bundle has no behavior model.
pub fn behavior_dot(bundle: &Bundle) -> String {
    let mut out = String::new();
    out.push_str("digraph behavior {\n");
    out.push_str("  rankdir=LR;\n");
    out.push_str("  node [shape=ellipse, fontname=\"Helvetica\"];\n");
    if let Some(behavior) = &bundle.behavior {
        for event in &behavior.events {
            out.push_str(&format!("  {};\n", quoted(event.as_str())));
        }
        for edge in &behavior.edges {
            let attrs = if edge.repeatable {
                String::new()
            } else {
                " [style=bold, label=\"norepeat\"]".to_string()
            };
            out.push_str(&format!(
                "  {} -> {}{attrs};\n",
                quoted(edge.from.as_str()),
                quoted(edge.to.as_str())
            ));
        }
    }
    out.push_str("}\n");
    out
}
