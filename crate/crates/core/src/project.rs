//! File-level plumbing: the annotations document and a bundle of project files
//! that are read and parsed before any pipeline stage runs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bmr::{parse_bmr, BmrError, BusinessModelRadar};
use crate::bpmn::{parse_bpmn, BpmnError, CollaborationModel};
use crate::kpi::{attach_annotation, CbAnnotation, KpiError};
use crate::transform::{
    parse_hints, transform_with_warnings, TransformError, Transformation, WiringHints,
};
use crate::validation::Finding;

/// One entry of an annotations document: the task's display id plus the
/// annotation fields (`actor`, `type`, `goal`, `kpi`, `current`, `target`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AnnotationEntry {
    pub task_display_id: String,
    #[serde(flatten)]
    pub annotation: CbAnnotation,
}

#[derive(Debug, Error)]
pub enum ProjectError {
    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", .path.display())]
    Radar { path: PathBuf, source: BmrError },
    #[error("{}: {source}", .path.display())]
    Hints {
        path: PathBuf,
        source: TransformError,
    },
    #[error("{}: line {line}, column {column}: {message}", .path.display())]
    Annotations {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{}: {source}", .path.display())]
    Bpmn { path: PathBuf, source: BpmnError },
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error("annotation for task {display_id}: {source}")]
    Annotate {
        display_id: String,
        source: Box<KpiError>,
    },
    #[error("nothing to build a model from: give a radar or a BPMN file")]
    NoModel,
}

impl ProjectError {
    pub fn is_io(&self) -> bool {
        matches!(self, ProjectError::Io { .. })
    }

    /// File position or task the error is about.
    pub fn location(&self) -> Option<String> {
        let at =
            |path: &Path, line: usize, column: usize| format!("{}:{line}:{column}", path.display());
        match self {
            ProjectError::Io { path, .. } => Some(path.display().to_string()),
            ProjectError::Radar { path, source } => Some(match source {
                BmrError::Syntax { line, column, .. } => at(path, *line, *column),
                BmrError::Schema { path: inner, .. } => format!("{}#{inner}", path.display()),
                BmrError::Invariant(_) => path.display().to_string(),
            }),
            ProjectError::Hints { path, .. } => Some(path.display().to_string()),
            ProjectError::Annotations {
                path, line, column, ..
            } => Some(at(path, *line, *column)),
            ProjectError::Bpmn { path, source } => Some(match source {
                BpmnError::Syntax { line, column, .. }
                | BpmnError::Unsupported { line, column, .. }
                | BpmnError::Invalid { line, column, .. } => at(path, *line, *column),
                BpmnError::DanglingReference { flow, .. }
                | BpmnError::CrossPoolSequenceFlow { flow } => format!("{}#{flow}", path.display()),
                BpmnError::Invariant(_) => path.display().to_string(),
            }),
            ProjectError::Transform(e) => e.location(),
            ProjectError::Annotate { display_id, .. } => Some(display_id.clone()),
            ProjectError::NoModel => None,
        }
    }
}

pub fn parse_annotations(text: &str) -> Result<Vec<AnnotationEntry>, serde_json::Error> {
    serde_json::from_str(text)
}

/// Annotations of every task that carries a KPI or a goal, in model order.
pub fn collect_annotations(model: &CollaborationModel) -> Vec<AnnotationEntry> {
    model
        .tasks()
        .filter_map(|(_, t)| {
            let annotation = t.annotation.as_ref()?;
            if !annotation.has_kpi() && annotation.goal.is_empty() {
                return None;
            }
            Some(AnnotationEntry {
                task_display_id: t.display_id.clone()?,
                annotation: annotation.clone(),
            })
        })
        .collect()
}

pub fn serialize_annotations(entries: &[AnnotationEntry]) -> String {
    let mut out = serde_json::to_string_pretty(entries).expect("annotations serialize to JSON");
    out.push('\n');
    out
}

/// Attaches every entry in order; later entries for the same task win.
pub fn annotate(
    mut model: CollaborationModel,
    entries: &[AnnotationEntry],
) -> Result<CollaborationModel, ProjectError> {
    for entry in entries {
        model = attach_annotation(model, &entry.task_display_id, entry.annotation.clone())
            .map_err(|source| ProjectError::Annotate {
                display_id: entry.task_display_id.clone(),
                source: Box::new(source),
            })?;
    }
    Ok(model)
}

/// Paths of the documents that make up one project. Any may be absent.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ProjectBundle {
    pub radar: Option<PathBuf>,
    pub hints: Option<PathBuf>,
    pub annotations: Option<PathBuf>,
    pub bpmn: Option<PathBuf>,
}

/// The parsed contents of a [`ProjectBundle`].
#[derive(Debug, Clone, Default)]
pub struct LoadedProject {
    pub radar: Option<BusinessModelRadar>,
    pub hints: Option<WiringHints>,
    pub annotations: Option<Vec<AnnotationEntry>>,
    pub bpmn: Option<CollaborationModel>,
}

fn read(path: &Path) -> Result<String, ProjectError> {
    std::fs::read_to_string(path).map_err(|source| ProjectError::Io {
        path: path.to_path_buf(),
        source,
    })
}

impl ProjectBundle {
    /// Reads every named file first, then parses them, so a missing file is
    /// reported before any content error.
    pub fn load(&self) -> Result<LoadedProject, ProjectError> {
        let radar = self
            .radar
            .as_deref()
            .map(|p| read(p).map(|t| (p, t)))
            .transpose()?;
        let hints = self
            .hints
            .as_deref()
            .map(|p| read(p).map(|t| (p, t)))
            .transpose()?;
        let annotations = self
            .annotations
            .as_deref()
            .map(|p| read(p).map(|t| (p, t)))
            .transpose()?;
        let bpmn = self
            .bpmn
            .as_deref()
            .map(|p| read(p).map(|t| (p, t)))
            .transpose()?;

        Ok(LoadedProject {
            radar: radar
                .map(|(p, t)| {
                    parse_bmr(&t).map_err(|source| ProjectError::Radar {
                        path: p.to_path_buf(),
                        source,
                    })
                })
                .transpose()?,
            hints: hints
                .map(|(p, t)| {
                    parse_hints(&t).map_err(|source| ProjectError::Hints {
                        path: p.to_path_buf(),
                        source,
                    })
                })
                .transpose()?,
            annotations: annotations
                .map(|(p, t)| {
                    parse_annotations(&t).map_err(|e| ProjectError::Annotations {
                        path: p.to_path_buf(),
                        line: e.line(),
                        column: e.column(),
                        message: e.to_string(),
                    })
                })
                .transpose()?,
            bpmn: bpmn
                .map(|(p, t)| {
                    parse_bpmn(&t).map_err(|source| ProjectError::Bpmn {
                        path: p.to_path_buf(),
                        source,
                    })
                })
                .transpose()?,
        })
    }
}

impl LoadedProject {
    /// The collaboration model: the BPMN document when present, otherwise the
    /// transformed radar. Annotations are applied on top.
    pub fn model(&self) -> Result<(CollaborationModel, Vec<Finding>), ProjectError> {
        let (model, warnings) = match (&self.bpmn, &self.radar) {
            (Some(model), _) => (model.clone(), Vec::new()),
            (None, Some(radar)) => {
                let Transformation { model, warnings } =
                    transform_with_warnings(radar, &self.hints.clone().unwrap_or_default())?;
                (model, warnings)
            }
            (None, None) => return Err(ProjectError::NoModel),
        };
        let model = match &self.annotations {
            Some(entries) => annotate(model, entries)?,
            None => model,
        };
        Ok((model, warnings))
    }
}
