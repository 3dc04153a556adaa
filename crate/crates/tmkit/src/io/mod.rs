//! Serialization: the JSON envelope for bundles and traces, the plain-text
//! trace and report renderings, and Graphviz export.
//!
//! JSON documents are wrapped in an envelope carrying a format tag:
//!
//! ```json
//! { "format": "tmkit/1", "bundle": { … } }
//! { "format": "tmkit/1", "trace": { … } }
//! ```
//!
//! Decoding is strict: unknown fields anywhere are an error (reported with
//! the JSON path that failed), the format tag must match, and a decoded
//! bundle is re-validated so a hand-edited file cannot smuggle a dangling
//! reference past the checks the text frontend performs.

pub mod dot;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diag::Diagnostic;
use crate::engine::Trace;
use crate::model::{validate_bundle, Bundle};

pub use dot::{behavior_dot, events_dot, static_dot};

/// Format tag every JSON document carries.
pub const FORMAT: &str = "tmkit/1";

/// Why a JSON document could not be decoded.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DecodeError {
    /// Not valid JSON, or valid JSON of the wrong shape. The message names
    /// the path that failed.
    #[error("invalid JSON: {0}")]
    Json(String),
    #[error("unsupported format tag `{found}` (this tool reads `{FORMAT}`)")]
    Format { found: String },
    /// The decoded model fails validation.
    #[error("decoded model is not well-formed:\n{}", join_lines(.0))]
    InvalidBundle(Vec<Diagnostic>),
    /// Trace occurrences must be ordered by step.
    #[error("occurrence {index} steps backwards in time (step {step} after {prev})")]
    UnorderedTrace { index: usize, step: u64, prev: u64 },
}

fn join_lines(diags: &[Diagnostic]) -> String {
    diags.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n")
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BundleEnvelope {
    format: String,
    bundle: Bundle,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TraceEnvelope {
    format: String,
    trace: Trace,
}

fn decode<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T, DecodeError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path == "." {
            DecodeError::Json(inner.to_string())
        } else {
            DecodeError::Json(format!("at `{path}`: {inner}"))
        }
    })
}

/// Renders a bundle as enveloped, pretty-printed JSON. The output is
/// deterministic and round-trips through [`bundle_from_json`].
pub fn bundle_to_json(bundle: &Bundle) -> String {
    let env = BundleEnvelope { format: FORMAT.to_string(), bundle: bundle.clone() };
    let mut text = serde_json::to_string_pretty(&env).expect("bundle serializes");
    text.push('\n');
    text
}

/// Decodes and re-validates an enveloped bundle.
pub fn bundle_from_json(text: &str) -> Result<Bundle, DecodeError> {
    let env: BundleEnvelope = decode(text)?;
    if env.format != FORMAT {
        return Err(DecodeError::Format { found: env.format });
    }
    let diags = validate_bundle(&env.bundle);
    if diags.iter().any(Diagnostic::is_error) {
        return Err(DecodeError::InvalidBundle(
            diags.into_iter().filter(Diagnostic::is_error).collect(),
        ));
    }
    Ok(env.bundle)
}

/// Renders a trace as enveloped, pretty-printed JSON.
pub fn trace_to_json(trace: &Trace) -> String {
    let env = TraceEnvelope { format: FORMAT.to_string(), trace: trace.clone() };
    let mut text = serde_json::to_string_pretty(&env).expect("trace serializes");
    text.push('\n');
    text
}

/// Decodes an enveloped trace and checks its occurrences are ordered by
/// step, which every checker relies on.
pub fn trace_from_json(text: &str) -> Result<Trace, DecodeError> {
    let env: TraceEnvelope = decode(text)?;
    if env.format != FORMAT {
        return Err(DecodeError::Format { found: env.format });
    }
    let mut prev = 0;
    for (index, occ) in env.trace.occurrences.iter().enumerate() {
        if occ.step < prev {
            return Err(DecodeError::UnorderedTrace { index, step: occ.step, prev });
        }
        prev = occ.step;
    }
    Ok(env.trace)
}

/// Renders a trace as plain text: one line per occurrence, then one line
/// per emitted message.
///
/// ```text
/// t=4 E1(Name=Michael)
/// t=4 msg "accepted"
/// ```
pub fn trace_text(trace: &Trace) -> String {
    let mut out = String::new();
    for occ in &trace.occurrences {
        let binding: Vec<String> =
            occ.binding.iter().map(|(k, v)| format!("{k}={v}")).collect();
        out.push_str(&format!("t={} {}({})\n", occ.step, occ.event, binding.join(", ")));
    }
    for (step, message) in &trace.messages {
        out.push_str(&format!("t={step} msg {message:?}\n"));
    }
    out
}

/// Renders a checking report as plain text: the checks that ran, one line
/// per violation (with the witnessing occurrence indices), and a verdict.
pub fn report_text(report: &crate::constraints::Report) -> String {
    let mut out = String::new();
    let checked = if report.checked.is_empty() {
        "(none)".to_string()
    } else {
        report.checked.join(", ")
    };
    out.push_str(&format!("checked: {checked}\n"));
    for v in &report.violations {
        let indices: Vec<String> = v.occurrences.iter().map(ToString::to_string).collect();
        out.push_str(&format!(
            "VIOLATION {} t={} {} [{}]\n",
            v.constraint,
            v.time,
            v.message,
            indices.join(", ")
        ));
    }
    if report.conforming {
        out.push_str("result: CONFORMING\n");
    } else {
        let n = report.violations.len();
        let noun = if n == 1 { "violation" } else { "violations" };
        out.push_str(&format!("result: NOT CONFORMING ({n} {noun})\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::{Report, Violation};
    use crate::dsl::load_model;
    use crate::engine::Occurrence;
    use crate::expr::Value;

    const MODEL: &str = r#"
        thimac A {
            storage;
            stage create c1;
            stage process p1;
        }
        flow c1 -> p1;
        event E1 (Name) { c1 }
        event E2 (Name) { p1 }
        composite E1-2 = E1, E2 sharing (Name);
        constraint C1 : binding E1-2;
    "#;

    fn bundle() -> Bundle {
        load_model(MODEL).expect("model lowers").bundle
    }

    fn sample_trace() -> Trace {
        Trace {
            occurrences: vec![
                Occurrence {
                    step: 1,
                    event: "E1".into(),
                    binding: vec![("Name".into(), Value::Text("Michael".into()))],
                },
                Occurrence { step: 2, event: "E2".into(), binding: vec![] },
            ],
            messages: vec![(2, "accepted".into())],
        }
    }

    #[test]
    fn bundle_json_round_trips_byte_for_byte() {
        let b = bundle();
        let text = bundle_to_json(&b);
        assert!(text.starts_with("{\n  \"format\": \"tmkit/1\""), "{}", &text[..40]);
        let back = bundle_from_json(&text).unwrap();
        assert_eq!(back, b);
        assert_eq!(bundle_to_json(&back), text);
    }

    #[test]
    fn trace_json_round_trips() {
        let t = sample_trace();
        let back = trace_from_json(&trace_to_json(&t)).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn unknown_fields_are_rejected_with_their_path() {
        let mut text = bundle_to_json(&bundle());
        text = text.replace("\"has_storage\"", "\"has_storge\"");
        let err = bundle_from_json(&text).unwrap_err();
        match err {
            DecodeError::Json(msg) => {
                assert!(msg.contains("has_storge"), "{msg}");
                assert!(msg.contains("bundle.model.thimacs"), "{msg}");
            }
            other => panic!("expected a JSON error, got {other:?}"),
        }
    }

    #[test]
    fn the_format_tag_is_checked() {
        let text = bundle_to_json(&bundle()).replace("tmkit/1", "tmkit/9");
        assert_eq!(
            bundle_from_json(&text).unwrap_err(),
            DecodeError::Format { found: "tmkit/9".into() }
        );
    }

    #[test]
    fn decoded_bundles_are_revalidated() {
        // Point the flow at a node that does not exist.
        let text = bundle_to_json(&bundle()).replace("\"to\": \"p1\"", "\"to\": \"p9\"");
        let err = bundle_from_json(&text).unwrap_err();
        match err {
            DecodeError::InvalidBundle(diags) => {
                assert!(!diags.is_empty());
                let all = join_lines(&diags);
                assert!(all.contains("p9"), "{all}");
            }
            other => panic!("expected a validation failure, got {other:?}"),
        }
    }

    #[test]
    fn traces_must_not_step_backwards() {
        let mut t = sample_trace();
        t.occurrences[1].step = 0;
        let err = trace_from_json(&trace_to_json(&t)).unwrap_err();
        assert_eq!(err, DecodeError::UnorderedTrace { index: 1, step: 0, prev: 1 });
    }

    #[test]
    fn trace_text_lists_occurrences_then_messages() {
        assert_eq!(
            trace_text(&sample_trace()),
            "t=1 E1(Name=Michael)\nt=2 E2()\nt=2 msg \"accepted\"\n"
        );
    }

    #[test]
    fn report_text_shows_checks_violations_and_verdict() {
        let report = Report {
            conforming: false,
            checked: vec!["C1".into(), "behavior".into()],
            violations: vec![Violation {
                constraint: "C1".into(),
                time: 1,
                message: "binding of `E1-2`: `E1` occurred without `E2`".into(),
                occurrences: vec![0],
            }],
        };
        assert_eq!(
            report_text(&report),
            "checked: C1, behavior\n\
             VIOLATION C1 t=1 binding of `E1-2`: `E1` occurred without `E2` [0]\n\
             result: NOT CONFORMING (1 violation)\n"
        );

        let clean = Report { conforming: true, checked: vec![], violations: vec![] };
        assert_eq!(report_text(&clean), "checked: (none)\nresult: CONFORMING\n");
    }
}
