//! The `cbtracker` command line.
//!
//! Exit codes: 0 success, 1 findings or pipeline errors, 2 I/O or usage errors.

use std::ffi::OsString;
use std::io::Write;
use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bpmn::{serialize_bpmn, validate_structure};
use crate::kpi::{evaluate, resolve_dependencies, KpiError};
use crate::project::{LoadedProject, ProjectBundle, ProjectError};
use crate::report::{export_report, full_report, ExportFormat};
use crate::transform::transform_with_warnings;
use crate::validation::{Finding, ValidationReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FINDINGS: i32 = 1;
pub const EXIT_IO: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "cbtracker",
    version,
    about = "Business model radar to BPMN with cost-benefit KPI tracking"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check radar, hints, annotations, and BPMN documents.
    Validate {
        /// Files to check; the kind is guessed from the name
        /// (`*.hints.json`, `*.annotations.json`, `*.bpmn`/`*.xml`, other `*.json` is a radar).
        paths: Vec<PathBuf>,
        #[command(flatten)]
        inputs: Inputs,
    },
    /// Transform a radar into a BPMN collaboration.
    Transform {
        #[command(flatten)]
        inputs: Inputs,
        /// Write to this file instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Attach KPI annotations and write the annotated BPMN.
    Annotate {
        #[command(flatten)]
        inputs: Inputs,
        /// Write to this file instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate KPIs and print the cost-benefit report.
    Eval {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long, value_enum, default_value_t = Format::TextTable)]
        format: Format,
        /// Restrict the report to one actor.
        #[arg(long)]
        actor: Option<String>,
        /// Write to this file instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the HTTP API under /v1/.
    Serve {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value_t = IpAddr::V4(Ipv4Addr::LOCALHOST))]
        host: IpAddr,
        /// Directory of static files for the web front end.
        #[arg(long)]
        assets: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Args, Default)]
struct Inputs {
    /// Radar document (BMR-JSON)
    #[arg(long)]
    radar: Option<PathBuf>,
    /// Wiring hints for the transformation
    #[arg(long)]
    hints: Option<PathBuf>,
    /// KPI annotations keyed by display id
    #[arg(long)]
    annotations: Option<PathBuf>,
    /// BPMN collaboration; used instead of transforming the radar
    #[arg(long)]
    bpmn: Option<PathBuf>,
}

impl Inputs {
    fn bundle(&self) -> ProjectBundle {
        ProjectBundle {
            radar: self.radar.clone(),
            hints: self.hints.clone(),
            annotations: self.annotations.clone(),
            bpmn: self.bpmn.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
    TextTable,
}

impl From<Format> for ExportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Json => ExportFormat::Json,
            Format::Csv => ExportFormat::Csv,
            Format::TextTable => ExportFormat::TextTable,
        }
    }
}

/// A failed command: the exit code plus lines for standard error.
struct Failure {
    code: i32,
    lines: Vec<String>,
}

impl Failure {
    fn pipeline(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_FINDINGS,
            lines: vec![message.into()],
        }
    }
}

impl From<ProjectError> for Failure {
    fn from(e: ProjectError) -> Self {
        let code = if e.is_io() { EXIT_IO } else { EXIT_FINDINGS };
        let mut line = format!("error: {e}");
        if let Some(location) = e.location() {
            if !line.contains(&location) {
                line.push_str(&format!(" (at {location})"));
            }
        }
        Failure {
            code,
            lines: vec![line],
        }
    }
}

impl From<KpiError> for Failure {
    fn from(e: KpiError) -> Self {
        let mut lines = vec![format!("error: {e}")];
        if let KpiError::Cycle(c) = &e {
            lines.extend(c.members.iter().map(|m| format!("  cycle member {m}")));
        }
        Failure {
            code: EXIT_FINDINGS,
            lines,
        }
    }
}

type CmdResult = Result<(), Failure>;

/// Runs the command line; returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_IO } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(err, "{text}")
            } else {
                write!(out, "{text}")
            };
            return code;
        }
    };
    let result = match cli.command {
        Command::Validate { paths, inputs } => validate(paths, &inputs, out),
        Command::Transform {
            inputs,
            out: target,
        } => cmd_transform(&inputs, target.as_deref(), out, err),
        Command::Annotate {
            inputs,
            out: target,
        } => cmd_annotate(&inputs, target.as_deref(), out, err),
        Command::Eval {
            inputs,
            format,
            actor,
            out: target,
        } => cmd_eval(
            &inputs,
            format.into(),
            actor.as_deref(),
            target.as_deref(),
            out,
        ),
        Command::Serve {
            inputs,
            port,
            host,
            assets,
        } => cmd_serve(&inputs, SocketAddr::new(host, port), assets),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(failure) => {
            for line in &failure.lines {
                let _ = writeln!(err, "{line}");
            }
            failure.code
        }
    }
}

fn emit(text: &str, target: Option<&Path>, out: &mut dyn Write) -> CmdResult {
    match target {
        Some(path) => std::fs::write(path, text).map_err(|e| Failure {
            code: EXIT_IO,
            lines: vec![format!("error: {}: {e}", path.display())],
        }),
        None => out.write_all(text.as_bytes()).map_err(|e| Failure {
            code: EXIT_IO,
            lines: vec![format!("error: writing output: {e}")],
        }),
    }
}

fn warn(warnings: &[Finding], err: &mut dyn Write) {
    for w in warnings {
        let _ = writeln!(err, "{w}");
    }
}

fn classify(path: PathBuf, inputs: &mut Inputs) -> Result<(), Failure> {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().to_lowercase())
        .unwrap_or_default();
    let slot = if name.ends_with(".hints.json") {
        &mut inputs.hints
    } else if name.ends_with(".annotations.json") {
        &mut inputs.annotations
    } else if name.ends_with(".bpmn") || name.ends_with(".xml") {
        &mut inputs.bpmn
    } else if name.ends_with(".json") {
        &mut inputs.radar
    } else {
        return Err(Failure {
            code: EXIT_IO,
            lines: vec![format!(
                "error: {}: cannot tell what kind of document this is",
                path.display()
            )],
        });
    };
    if slot.is_some() {
        return Err(Failure {
            code: EXIT_IO,
            lines: vec![format!(
                "error: {}: more than one document of this kind",
                path.display()
            )],
        });
    }
    *slot = Some(path);
    Ok(())
}

/// Prints every finding; parse failures that carry a validation report are
/// expanded into one line per finding.
fn validate(paths: Vec<PathBuf>, inputs: &Inputs, out: &mut dyn Write) -> CmdResult {
    let mut inputs = inputs.clone();
    for p in paths {
        classify(p, &mut inputs)?;
    }
    let bundle = inputs.bundle();
    if bundle == ProjectBundle::default() {
        return Err(Failure {
            code: EXIT_IO,
            lines: vec!["error: nothing to validate".into()],
        });
    }

    let mut report = ValidationReport::default();
    let project = match bundle.load() {
        Ok(p) => p,
        Err(e) if e.is_io() => return Err(e.into()),
        Err(e) => {
            findings_of(&e, &mut report);
            print_findings(&report, out);
            return Err(Failure {
                code: EXIT_FINDINGS,
                lines: Vec::new(),
            });
        }
    };
    check_project(&project, &mut report);
    print_findings(&report, out);
    if report.has_errors() {
        Err(Failure {
            code: EXIT_FINDINGS,
            lines: Vec::new(),
        })
    } else {
        Ok(())
    }
}

fn findings_of(e: &ProjectError, report: &mut ValidationReport) {
    use crate::bmr::BmrError;
    use crate::bpmn::BpmnError;
    let nested = match e {
        ProjectError::Radar {
            source: BmrError::Invariant(r),
            ..
        }
        | ProjectError::Bpmn {
            source: BpmnError::Invariant(r),
            ..
        } => Some(r),
        _ => None,
    };
    match nested {
        Some(r) => {
            for f in &r.findings {
                report.push(f.clone());
            }
        }
        None => report.push(Finding::error(
            "parse",
            e.location().unwrap_or_default(),
            e.to_string(),
        )),
    }
}

fn check_project(project: &LoadedProject, report: &mut ValidationReport) {
    if let Some(model) = &project.bpmn {
        for f in validate_structure(model).findings {
            report.push(f);
        }
    }
    if project.radar.is_none() && project.bpmn.is_none() {
        return;
    }
    let (model, warnings) = match project.model() {
        Ok(m) => m,
        Err(e) => {
            report.push(Finding::error(
                "pipeline",
                e.location().unwrap_or_default(),
                e.to_string(),
            ));
            return;
        }
    };
    for w in warnings {
        report.push(w);
    }
    if let Err(e) = resolve_dependencies(&model) {
        report.push(Finding::error(
            "kpi",
            e.location().unwrap_or_default(),
            e.to_string(),
        ));
    }
}

fn print_findings(report: &ValidationReport, out: &mut dyn Write) {
    for f in &report.findings {
        let _ = writeln!(out, "{f}");
    }
}

fn cmd_transform(
    inputs: &Inputs,
    target: Option<&Path>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> CmdResult {
    if inputs.radar.is_none() {
        return Err(Failure {
            code: EXIT_IO,
            lines: vec!["error: transform needs --radar".into()],
        });
    }
    let project = inputs.bundle().load()?;
    let radar = project.radar.as_ref().expect("radar loaded");
    let result = transform_with_warnings(radar, &project.hints.clone().unwrap_or_default())
        .map_err(|e| Failure::from(ProjectError::Transform(e)))?;
    warn(&result.warnings, err);
    let model = match &project.annotations {
        Some(entries) => crate::project::annotate(result.model, entries)?,
        None => result.model,
    };
    let xml = serialize_bpmn(&model).map_err(|e| Failure::pipeline(format!("error: {e}")))?;
    emit(&xml, target, out)
}

fn cmd_annotate(
    inputs: &Inputs,
    target: Option<&Path>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> CmdResult {
    if inputs.annotations.is_none() {
        return Err(Failure {
            code: EXIT_IO,
            lines: vec!["error: annotate needs --annotations".into()],
        });
    }
    let project = inputs.bundle().load()?;
    let (model, warnings) = project.model()?;
    warn(&warnings, err);
    resolve_dependencies(&model)?;
    let xml = serialize_bpmn(&model).map_err(|e| Failure::pipeline(format!("error: {e}")))?;
    emit(&xml, target, out)
}

fn cmd_eval(
    inputs: &Inputs,
    format: ExportFormat,
    actor: Option<&str>,
    target: Option<&Path>,
    out: &mut dyn Write,
) -> CmdResult {
    let project = inputs.bundle().load()?;
    let (model, _) = project.model()?;
    let result = evaluate(&model)?;
    let mut report =
        full_report(&result, &model).map_err(|e| Failure::pipeline(format!("error: {e}")))?;
    if let Some(actor) = actor {
        report.overviews.retain(|o| o.actor == actor);
        if report.overviews.is_empty() {
            return Err(Failure::pipeline(format!("error: unknown actor {actor:?}")));
        }
        if report
            .summary
            .as_ref()
            .is_some_and(|s| s.focal_actor != actor)
        {
            report.summary = None;
        }
    }
    for d in &result.diagnostics {
        tracing::warn!("{d}");
    }
    emit(&export_report(&report, format), target, out)
}

fn cmd_serve(inputs: &Inputs, addr: SocketAddr, assets: Option<PathBuf>) -> CmdResult {
    let project = inputs.bundle().load()?;
    let (model, _) = project.model()?;
    // fail at startup rather than on the first request
    resolve_dependencies(&model)?;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Failure {
        code: EXIT_IO,
        lines: vec![format!("error: starting runtime: {e}")],
    })?;
    runtime
        .block_on(crate::service::serve(model, addr, assets))
        .map_err(|e| Failure {
            code: EXIT_IO,
            lines: vec![format!("error: {addr}: {e}")],
        })
}
