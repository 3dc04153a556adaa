//! Command-line frontend.
//!
//! ```text
//! tmkit check <file>                       syntax/well-formedness check
//! tmkit run <model> <script> [--trace P]   execute a script
//! tmkit validate <model> <script-or-trace> evaluate constraints
//! tmkit export <model> [--view V] [--format F] [-o P]
//! ```
//!
//! Exit codes: 0 success (and, for `check`, a conforming trace), 1 for a
//! trace that violates constraints, 2 for syntax/validation/decoding
//! problems, 3 for a script that fails at runtime. Diagnostics go to
//! stderr; results go to stdout. `TMKIT_COLOR=1`/`0` forces colored
//! diagnostics on or off (default: only when stderr is a terminal).

use std::fs;
use std::io::IsTerminal;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use tmkit::constraints::evaluate;
use tmkit::diag::Diagnostic;
use tmkit::dsl::{load_model, parse_script};
use tmkit::engine::{run_script, RunOutcome, Trace};
use tmkit::io::{
    behavior_dot, bundle_from_json, bundle_to_json, events_dot, report_text, static_dot,
    trace_from_json, trace_text, trace_to_json,
};
use tmkit::model::Bundle;

#[derive(Parser)]
#[command(
    name = "tmkit",
    version,
    about = "Model, run, and check Thinging Machine diagrams",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a file for syntax and well-formedness problems.
    ///
    /// Takes a model (.tm), a script (.tms), or an enveloped JSON document
    /// (bundle or trace). Problems print to stderr; a short summary of the
    /// valid file prints to stdout.
    Check {
        /// Model, script, or JSON file.
        file: PathBuf,
    },
    /// Run a script against a model and print its messages.
    ///
    /// Messages the run emits (including conditional prints) go to stdout,
    /// one per line. A failing statement reports to stderr and exits 3;
    /// everything up to the failure still prints and is written to --trace.
    Run {
        /// Model file (.tm, or enveloped bundle JSON).
        model: PathBuf,
        /// Script file (.tms).
        script: PathBuf,
        /// Write the full timed trace to this file.
        #[arg(long, value_name = "PATH")]
        trace: Option<PathBuf>,
        /// Write the trace as enveloped JSON instead of text.
        #[arg(long, requires = "trace")]
        json: bool,
    },
    /// Run a script (or read a trace) and validate it against the model's
    /// constraints and behavior chronology.
    ///
    /// The input is a script (.tms) to execute, or — when it ends in
    /// .json — a previously written trace. The report prints to stdout;
    /// exit code 1 means the trace violates at least one constraint.
    Validate {
        /// Model file (.tm, or enveloped bundle JSON).
        model: PathBuf,
        /// Script (.tms) or trace (.json) file.
        input: PathBuf,
    },
    /// Export the model as Graphviz DOT or enveloped JSON.
    Export {
        /// Model file (.tm, or enveloped bundle JSON).
        model: PathBuf,
        /// Which diagram to draw (DOT only; JSON always carries the whole
        /// model and ignores this flag).
        #[arg(long, value_enum, default_value_t = View::Static)]
        view: View,
        #[arg(long, value_enum, default_value_t = Format::Dot)]
        format: Format,
        /// Write to a file instead of stdout.
        #[arg(short, long, value_name = "PATH")]
        output: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum View {
    /// Thimacs, stages, and arcs.
    Static,
    /// One cluster per declared event showing its region.
    Events,
    /// The behavior chronology over events.
    Behavior,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Dot,
    Json,
}

/// ANSI styling for stderr diagnostics, honoring TMKIT_COLOR.
struct Style {
    enabled: bool,
}

impl Style {
    fn from_env() -> Style {
        let enabled = match std::env::var("TMKIT_COLOR").ok().as_deref() {
            Some("0") => false,
            Some("1") => true,
            _ => std::io::stderr().is_terminal(),
        };
        Style { enabled }
    }

    fn diagnostic(&self, d: &Diagnostic) -> String {
        if !self.enabled {
            return d.to_string();
        }
        let color = if d.is_error() { "\x1b[31m" } else { "\x1b[33m" };
        format!("{color}{d}\x1b[0m")
    }

    fn error_line(&self, msg: &str) -> String {
        if self.enabled {
            format!("\x1b[31merror:\x1b[0m {msg}")
        } else {
            format!("error: {msg}")
        }
    }
}

fn report_diags(style: &Style, path: &Path, diags: &[Diagnostic]) {
    for d in diags {
        eprintln!("{}: {}", path.display(), style.diagnostic(d));
    }
}

fn fail(style: &Style, msg: impl AsRef<str>) -> u8 {
    eprintln!("{}", style.error_line(msg.as_ref()));
    2
}

fn read(style: &Style, path: &Path) -> Result<String, u8> {
    fs::read_to_string(path)
        .map_err(|e| fail(style, format!("cannot read `{}`: {e}", path.display())))
}

fn has_ext(path: &Path, ext: &str) -> bool {
    path.extension().map_or(false, |e| e.eq_ignore_ascii_case(ext))
}

/// Loads a model from `.tm` source or an enveloped JSON bundle, printing
/// warnings (and, on failure, errors) to stderr.
fn load_bundle(style: &Style, path: &Path) -> Result<Bundle, u8> {
    let text = read(style, path)?;
    if has_ext(path, "json") {
        return bundle_from_json(&text)
            .map_err(|e| fail(style, format!("`{}`: {e}", path.display())));
    }
    match load_model(&text) {
        Ok(out) => {
            report_diags(style, path, &out.warnings);
            Ok(out.bundle)
        }
        Err(diags) => {
            report_diags(style, path, &diags);
            Err(2)
        }
    }
}

fn load_script(style: &Style, path: &Path) -> Result<tmkit::dsl::Script, u8> {
    let text = read(style, path)?;
    parse_script(&text).map_err(|diags| {
        report_diags(style, path, &diags);
        2
    })
}

/// Prints the messages a run produced, writes the trace if asked, and
/// reports a runtime failure. Returns the exit code.
fn finish_run(
    style: &Style,
    outcome: &RunOutcome,
    trace_path: Option<&Path>,
    json: bool,
) -> u8 {
    for (_, message) in &outcome.trace.messages {
        println!("{message}");
    }
    if let Some(path) = trace_path {
        let content =
            if json { trace_to_json(&outcome.trace) } else { trace_text(&outcome.trace) };
        if let Err(e) = fs::write(path, content) {
            return fail(style, format!("cannot write `{}`: {e}", path.display()));
        }
    }
    match &outcome.error {
        Some(err) => {
            eprintln!("{}", style.error_line(&err.to_string()));
            3
        }
        None => 0,
    }
}

fn check(style: &Style, file: &Path) -> u8 {
    if has_ext(file, "tms") {
        return match load_script(style, file) {
            Ok(script) => {
                let n = script.statements.len();
                let noun = if n == 1 { "statement" } else { "statements" };
                println!("ok: script with {n} {noun}");
                0
            }
            Err(code) => code,
        };
    }
    if has_ext(file, "json") {
        let Ok(text) = read(style, file) else { return 2 };
        let value: serde_json::Value = match serde_json::from_str(&text) {
            Ok(v) => v,
            Err(e) => return fail(style, format!("`{}`: invalid JSON: {e}", file.display())),
        };
        if value.get("trace").is_some() {
            return match trace_from_json(&text) {
                Ok(trace) => {
                    println!(
                        "ok: trace with {} occurrences, {} messages",
                        trace.occurrences.len(),
                        trace.messages.len()
                    );
                    0
                }
                Err(e) => fail(style, format!("`{}`: {e}", file.display())),
            };
        }
        return match bundle_from_json(&text) {
            Ok(bundle) => {
                println!("ok: {}", summary(&bundle));
                0
            }
            Err(e) => fail(style, format!("`{}`: {e}", file.display())),
        };
    }
    match load_bundle(style, file) {
        Ok(bundle) => {
            println!("ok: {}", summary(&bundle));
            0
        }
        Err(code) => code,
    }
}

fn summary(bundle: &Bundle) -> String {
    let m = &bundle.model;
    let mut parts = vec![format!(
        "{} thimacs, {} stages, {} flows, {} triggers",
        m.thimacs.len(),
        m.nodes.len(),
        m.flows.len(),
        m.triggers.len()
    )];
    if !bundle.events.is_empty() {
        parts.push(format!("{} events", bundle.events.len()));
    }
    if !bundle.composites.is_empty() {
        parts.push(format!("{} composites", bundle.composites.len()));
    }
    if let Some(b) = &bundle.behavior {
        parts.push(format!("behavior with {} edges", b.edges.len()));
    }
    if !bundle.constraints.is_empty() {
        parts.push(format!("{} constraints", bundle.constraints.len()));
    }
    parts.join(", ")
}

fn validate(style: &Style, model: &Path, input: &Path) -> u8 {
    let bundle = match load_bundle(style, model) {
        Ok(b) => b,
        Err(code) => return code,
    };
    let trace: Trace = if has_ext(input, "json") {
        let Ok(text) = read(style, input) else { return 2 };
        match trace_from_json(&text) {
            Ok(t) => t,
            Err(e) => return fail(style, format!("`{}`: {e}", input.display())),
        }
    } else {
        let script = match load_script(style, input) {
            Ok(s) => s,
            Err(code) => return code,
        };
        let outcome = run_script(&bundle, &script);
        if let Some(err) = &outcome.error {
            eprintln!("{}", style.error_line(&err.to_string()));
            return 3;
        }
        outcome.trace
    };
    match evaluate(&bundle, &trace) {
        Ok(report) => {
            print!("{}", report_text(&report));
            u8::from(!report.conforming)
        }
        Err(e) => fail(style, e.to_string()),
    }
}

fn export(
    style: &Style,
    model: &Path,
    view: View,
    format: Format,
    output: Option<&Path>,
) -> u8 {
    let bundle = match load_bundle(style, model) {
        Ok(b) => b,
        Err(code) => return code,
    };
    let content = match format {
        Format::Json => bundle_to_json(&bundle),
        Format::Dot => match view {
            View::Static => static_dot(&bundle.model),
            View::Events => events_dot(&bundle),
            View::Behavior => behavior_dot(&bundle),
        },
    };
    match output {
        Some(path) => match fs::write(path, content) {
            Ok(()) => 0,
            Err(e) => fail(style, format!("cannot write `{}`: {e}", path.display())),
        },
        None => {
            print!("{content}");
            0
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let style = Style::from_env();
    let code = match &cli.command {
        Command::Check { file } => check(&style, file),
        Command::Run { model, script, trace, json } => {
            match (load_bundle(&style, model), load_script(&style, script)) {
                (Ok(bundle), Ok(script)) => {
                    let outcome = run_script(&bundle, &script);
                    finish_run(&style, &outcome, trace.as_deref(), *json)
                }
                (Err(code), _) | (_, Err(code)) => code,
            }
        }
        Command::Validate { model, input } => validate(&style, model, input),
        Command::Export { model, view, format, output } => {
            export(&style, model, *view, *format, output.as_deref())
        }
    };
    ExitCode::from(code)
}
