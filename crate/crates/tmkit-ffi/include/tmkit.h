/* C interface to the tmkit modeling toolkit. Generated by cbindgen; do not edit. */

#ifndef TMKIT_H
#define TMKIT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Outcome of a call into the toolkit.
typedef enum TmkStatus {
  // The call succeeded.
  TMK_STATUS_OK = 0,
  // Evaluation ran to completion and found constraint violations.
  TMK_STATUS_VIOLATIONS = 1,
  // Model or script text could not be parsed or failed validation.
  TMK_STATUS_PARSE_ERROR = 2,
  // A script statement failed at run time.
  TMK_STATUS_RUNTIME_ERROR = 3,
  // A required argument was null, malformed, or out of range.
  TMK_STATUS_INVALID_ARGUMENT = 4,
  // A JSON document could not be decoded.
  TMK_STATUS_DECODE_ERROR = 5,
} TmkStatus;

// A validated model bundle: the static model plus its event, behavior,
// and constraint declarations.
typedef struct TmkBundle TmkBundle;

// A finished script run: the timed trace, emitted messages, and the error
// that stopped the run early, if any.
typedef struct TmkRun TmkRun;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Returns the message recorded by the most recent failing call on this
// thread, or an empty string if none has failed yet. The pointer stays
// valid until the next failing call on the same thread; do not free it.
const char *tmk_last_error(void);

// Releases a string returned by this library. Null is ignored.
void tmk_string_free(char *s);

// Parses and validates model text. On success writes a new handle to
// `out_bundle` and returns `Ok`; on failure returns `ParseError` and
// leaves `out_bundle` untouched.
enum TmkStatus tmk_bundle_parse(const char *source, struct TmkBundle **out_bundle);

// Decodes a bundle from its JSON form and validates it. On success writes
// a new handle to `out_bundle`; malformed JSON or a bundle that fails
// validation yields `DecodeError`.
enum TmkStatus tmk_bundle_from_json(const char *json, struct TmkBundle **out_bundle);

// Serializes the bundle to its JSON form.
char *tmk_bundle_to_json(const struct TmkBundle *bundle);

// Returns the validation warnings for the bundle, one per line; the string
// is empty when the model is warning-free.
char *tmk_bundle_warnings(const struct TmkBundle *bundle);

// Releases a bundle handle. Null is ignored.
void tmk_bundle_free(struct TmkBundle *bundle);

// Parses script text and interprets it against the bundle. On `Ok` the
// run completed; on `RuntimeError` a statement failed, and a run handle
// holding everything up to the failure is still written to `out_run` (the
// failure itself is in [`tmk_run_error`] and [`tmk_last_error`]). On
// `ParseError` no handle is written.
enum TmkStatus tmk_run_script(const struct TmkBundle *bundle,
                              const char *source,
                              struct TmkRun **out_run);

// Returns the error that stopped the run, or an empty string for a clean
// run.
char *tmk_run_error(const struct TmkRun *run);

// Returns the messages the run emitted, one per line, in order; the string
// is empty when the run emitted none.
char *tmk_run_messages(const struct TmkRun *run);

// Renders the run's trace as plain text: one `t=<step> <event>(<binding>)`
// line per occurrence, then one `t=<step> msg "<text>"` line per message.
char *tmk_run_trace_text(const struct TmkRun *run);

// Serializes the run's trace to JSON, suitable for later evaluation with
// [`tmk_evaluate_trace_json`].
char *tmk_run_trace_json(const struct TmkRun *run);

// Releases a run handle. Null is ignored.
void tmk_run_free(struct TmkRun *run);

// Checks the run's trace against every constraint the bundle declares,
// including its behavior model. Returns `Ok` when the trace conforms and
// `Violations` when it does not; either way, when `out_report` is
// non-null it receives the full report text.
enum TmkStatus tmk_evaluate(const struct TmkBundle *bundle,
                            const struct TmkRun *run,
                            char **out_report);

// Like [`tmk_evaluate`], but for a trace decoded from JSON, so traces
// recorded elsewhere can be checked against the model's constraints.
enum TmkStatus tmk_evaluate_trace_json(const struct TmkBundle *bundle,
                                       const char *trace_json,
                                       char **out_report);

// Renders one view of the bundle as Graphviz DOT. `view` selects what to
// draw: `"static"` (thimacs, stages, and arcs), `"events"` (one cluster
// per declared event around a copy of its region), or `"behavior"` (the
// chronology graph). On `Ok`, `out_text` receives the DOT document.
enum TmkStatus tmk_export_dot(const struct TmkBundle *bundle, const char *view, char **out_text);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* TMKIT_H */
