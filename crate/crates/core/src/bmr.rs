//! Service-Dominant Business Model Radar documents.
//!
//! A radar has one co-created solution at its center and one slice per
//! co-creation actor. Each slice carries the actor's value propositions,
//! the activities that deliver them, and the costs and benefits incurred.
//! Costs and benefits normally hang off an activity; participation-level
//! items live directly on the actor.
//!
//! The on-disk form is BMR-JSON:
//!
//! ```json
//! {
//!   "bmrVersion": "1",
//!   "solution": "ad-supported music streaming",
//!   "actors": [
//!     {
//!       "name": "Free User",
//!       "role": "user",
//!       "valuePropositions": [
//!         { "name": "generate advertising-revenue",
//!           "activities": [ { "name": "play song", "costs": ["listen ads"], "benefits": [] } ] }
//!       ]
//!     }
//!   ]
//! }
//! ```

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::validation::{Finding, ValidationReport};

pub const BMR_VERSION: &str = "1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActorRole {
    User,
    Focal,
    Partner,
}

impl ActorRole {
    pub fn as_str(self) -> &'static str {
        match self {
            ActorRole::User => "user",
            ActorRole::Focal => "focal",
            ActorRole::Partner => "partner",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "user" => Some(ActorRole::User),
            "focal" => Some(ActorRole::Focal),
            "partner" => Some(ActorRole::Partner),
            _ => None,
        }
    }
}

impl fmt::Display for ActorRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BusinessModelRadar {
    pub solution: String,
    pub actors: Vec<CoCreationActor>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct CoCreationActor {
    pub name: String,
    pub role: ActorRole,
    pub value_propositions: Vec<ValueProposition>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub actor_costs: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub actor_benefits: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValueProposition {
    pub name: String,
    pub activities: Vec<CoCreationActivity>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoCreationActivity {
    pub name: String,
    #[serde(default)]
    pub costs: Vec<String>,
    #[serde(default)]
    pub benefits: Vec<String>,
}

impl CoCreationActivity {
    pub fn new(name: impl Into<String>) -> Self {
        CoCreationActivity {
            name: name.into(),
            costs: Vec::new(),
            benefits: Vec::new(),
        }
    }

    pub fn with_costs<I, S>(mut self, costs: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.costs.extend(costs.into_iter().map(Into::into));
        self
    }

    pub fn with_benefits<I, S>(mut self, benefits: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.benefits.extend(benefits.into_iter().map(Into::into));
        self
    }
}

impl BusinessModelRadar {
    pub fn actor(&self, name: &str) -> Option<&CoCreationActor> {
        self.actors.iter().find(|a| a.name == name)
    }

    pub fn focal(&self) -> Option<&CoCreationActor> {
        self.actors.iter().find(|a| a.role == ActorRole::Focal)
    }

    /// Total number of cost, activity, and benefit elements, actor-level items included.
    pub fn element_count(&self) -> usize {
        self.actors.iter().map(CoCreationActor::element_count).sum()
    }
}

impl CoCreationActor {
    pub fn activities(&self) -> impl Iterator<Item = &CoCreationActivity> {
        self.value_propositions
            .iter()
            .flat_map(|vp| vp.activities.iter())
    }

    pub fn element_count(&self) -> usize {
        self.actor_costs.len()
            + self.actor_benefits.len()
            + self
                .activities()
                .map(|a| 1 + a.costs.len() + a.benefits.len())
                .sum::<usize>()
    }
}

#[derive(Debug, Error)]
pub enum BmrError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema violation at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("invariant violation:\n{0}")]
    Invariant(ValidationReport),
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct Document {
    bmr_version: String,
    solution: String,
    actors: Vec<CoCreationActor>,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct DocumentRef<'a> {
    bmr_version: &'a str,
    solution: &'a str,
    actors: &'a [CoCreationActor],
}

/// Parses a BMR-JSON document and checks every radar invariant.
pub fn parse_bmr(document: &str) -> Result<BusinessModelRadar, BmrError> {
    let doc: Document = serde_json::from_str(document).map_err(|e| {
        use serde_json::error::Category;
        match e.classify() {
            Category::Syntax | Category::Eof | Category::Io => BmrError::Syntax {
                line: e.line(),
                column: e.column(),
                message: e.to_string(),
            },
            Category::Data => BmrError::Schema {
                path: format!("line {}, column {}", e.line(), e.column()),
                message: e.to_string(),
            },
        }
    })?;
    if doc.bmr_version != BMR_VERSION {
        return Err(BmrError::Schema {
            path: "/bmrVersion".into(),
            message: format!(
                "unsupported version {:?}, expected {BMR_VERSION:?}",
                doc.bmr_version
            ),
        });
    }
    let mut seen = HashSet::new();
    for (i, actor) in doc.actors.iter().enumerate() {
        if !seen.insert(actor.name.as_str()) {
            return Err(BmrError::Schema {
                path: format!("/actors/{i}/name"),
                message: format!("duplicate actor name {:?}", actor.name),
            });
        }
    }
    let radar = BusinessModelRadar {
        solution: doc.solution,
        actors: doc.actors,
    };
    let report = validate_bmr(&radar);
    if report.has_errors() {
        return Err(BmrError::Invariant(report));
    }
    Ok(radar)
}

/// Checks the radar invariants. An empty report means the radar is valid.
pub fn validate_bmr(radar: &BusinessModelRadar) -> ValidationReport {
    let mut report = ValidationReport::new();
    if radar.solution.trim().is_empty() {
        report.push(Finding::error(
            "empty-solution",
            "/solution",
            "solution must not be empty",
        ));
    }

    let focal: Vec<usize> = radar
        .actors
        .iter()
        .enumerate()
        .filter(|(_, a)| a.role == ActorRole::Focal)
        .map(|(i, _)| i)
        .collect();
    match focal.len() {
        0 => report.push(Finding::error(
            "no-focal-actor",
            "/actors",
            "exactly one actor must have role focal, found none",
        )),
        1 => {}
        n => {
            for &i in &focal[1..] {
                report.push(Finding::error(
                    "multiple-focal-actors",
                    format!("/actors/{i}/role"),
                    format!(
                        "exactly one actor must have role focal, found {n} ({:?} is not the first)",
                        radar.actors[i].name
                    ),
                ));
            }
        }
    }
    if !radar.actors.iter().any(|a| a.role == ActorRole::User) {
        report.push(Finding::error(
            "no-user-actor",
            "/actors",
            "at least one actor must have role user",
        ));
    }

    let mut names = HashSet::new();
    for (i, actor) in radar.actors.iter().enumerate() {
        let path = format!("/actors/{i}");
        if actor.name.trim().is_empty() {
            report.push(Finding::error(
                "empty-name",
                format!("{path}/name"),
                "actor name must not be empty",
            ));
        } else if !names.insert(actor.name.as_str()) {
            report.push(Finding::error(
                "duplicate-actor",
                format!("{path}/name"),
                format!("duplicate actor name {:?}", actor.name),
            ));
        }
        validate_actor(actor, &path, &mut report);
    }
    report
}

fn validate_actor(actor: &CoCreationActor, path: &str, report: &mut ValidationReport) {
    if actor.value_propositions.is_empty() {
        report.push(Finding::error(
            "no-value-proposition",
            format!("{path}/valuePropositions"),
            format!("actor {:?} has no value proposition", actor.name),
        ));
    }

    let mut costs = HashSet::new();
    let mut benefits = HashSet::new();
    let check_label = |label: &str,
                       at: String,
                       seen: &mut HashSet<String>,
                       kind: &str,
                       report: &mut ValidationReport| {
        if label.trim().is_empty() {
            report.push(Finding::error(
                "empty-label",
                at,
                format!("{kind} label must not be empty"),
            ));
        } else if !seen.insert(label.to_string()) {
            report.push(Finding::error(
                "duplicate-label",
                at,
                format!(
                    "{kind} label {label:?} appears more than once in actor {:?}",
                    actor.name
                ),
            ));
        }
    };

    for (k, cost) in actor.actor_costs.iter().enumerate() {
        check_label(
            cost,
            format!("{path}/actorCosts/{k}"),
            &mut costs,
            "cost",
            report,
        );
    }
    for (j, vp) in actor.value_propositions.iter().enumerate() {
        let vp_path = format!("{path}/valuePropositions/{j}");
        if vp.activities.is_empty() {
            report.push(Finding::error(
                "no-activity",
                format!("{vp_path}/activities"),
                format!("value proposition {:?} has no activity", vp.name),
            ));
        }
        for (a, activity) in vp.activities.iter().enumerate() {
            let act_path = format!("{vp_path}/activities/{a}");
            if activity.name.trim().is_empty() {
                report.push(Finding::error(
                    "empty-name",
                    format!("{act_path}/name"),
                    "activity name must not be empty",
                ));
            }
            for (k, cost) in activity.costs.iter().enumerate() {
                check_label(
                    cost,
                    format!("{act_path}/costs/{k}"),
                    &mut costs,
                    "cost",
                    report,
                );
            }
            for (k, benefit) in activity.benefits.iter().enumerate() {
                check_label(
                    benefit,
                    format!("{act_path}/benefits/{k}"),
                    &mut benefits,
                    "benefit",
                    report,
                );
            }
        }
    }
    for (k, benefit) in actor.actor_benefits.iter().enumerate() {
        check_label(
            benefit,
            format!("{path}/actorBenefits/{k}"),
            &mut benefits,
            "benefit",
            report,
        );
    }
}

/// Canonical BMR-JSON: fixed key order, document element order, two-space indent.
pub fn serialize_bmr(radar: &BusinessModelRadar) -> String {
    let doc = DocumentRef {
        bmr_version: BMR_VERSION,
        solution: &radar.solution,
        actors: &radar.actors,
    };
    let mut out = serde_json::to_string_pretty(&doc).expect("radar serializes to JSON");
    out.push('\n');
    out
}
