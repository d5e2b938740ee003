//! Turns a business model radar into a BPMN collaboration.
//!
//! Pools are stacked users first, then the focal organization, then the
//! partners. Inside a pool every activity contributes its costs, itself,
//! and its benefits, in that order. Reordering tasks and wiring them
//! together needs business judgment, so it comes from an explicit
//! [`WiringHints`] document; without hints each pool is a linear chain in
//! the generated order.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bmr::{validate_bmr, ActorRole, BusinessModelRadar, CoCreationActor};
use crate::bpmn::{CollaborationModel, Flow, FlowNode, NodeKind, Pool};
use crate::kpi::{CbAnnotation, TaskType};
use crate::validation::{Finding, ValidationReport};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct WiringHints {
    /// Pool name to the complete task order for that pool.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub task_order: BTreeMap<String, Vec<String>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sequence_edges: Vec<SequenceEdgeHint>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub message_edges: Vec<MessageEdgeHint>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub boundary: Vec<BoundaryHint>,
    /// Pools that get no start/end events.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub no_boundary: Vec<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub strict_boundary: bool,
    /// Task name to display id, e.g. `"stream song": "1.5"`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub display_ids: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SequenceEdgeHint {
    pub pool: String,
    pub source: String,
    pub target: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct MessageEdgeHint {
    pub source_pool: String,
    pub source_task: String,
    pub target_pool: String,
    pub target_task: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct BoundaryHint {
    pub pool: String,
    pub start_before: String,
    pub end_after: String,
}

#[derive(Debug, Error)]
pub enum TransformError {
    #[error("invalid radar:\n{0}")]
    InvalidRadar(ValidationReport),
    #[error("hints document: {0}")]
    Hints(String),
    #[error("unknown pool {0:?}")]
    UnknownPool(String),
    #[error("unknown task {task:?} in pool {pool:?}")]
    UnknownTask { pool: String, task: String },
    #[error("task name {task:?} is ambiguous{}", .pool.as_ref().map(|p| format!(" in pool {p:?}")).unwrap_or_default())]
    AmbiguousTask { pool: Option<String>, task: String },
    #[error("task order for pool {pool:?} must list every task exactly once: {problem}")]
    IncompleteTaskOrder { pool: String, problem: String },
    #[error("edge would connect {task:?} in pool {pool:?} to itself")]
    SelfLoop { pool: String, task: String },
    #[error("duplicate edge {0}")]
    DuplicateEdge(String),
    #[error("message edge {source_task:?} -> {target_task:?} stays inside pool {pool:?}")]
    SamePoolMessage {
        pool: String,
        source_task: String,
        target_task: String,
    },
    #[error("display id {id:?} is assigned to both {first:?} and {second:?}")]
    DisplayIdCollision {
        id: String,
        first: String,
        second: String,
    },
    #[error("display id {id:?} for {task:?} is not a dotted number")]
    InvalidDisplayId { task: String, id: String },
    #[error("boundary task {task:?} in pool {pool:?} is not a chain {end}")]
    NotAtChainEnd {
        pool: String,
        task: String,
        end: &'static str,
    },
}

impl TransformError {
    /// Task or pool name the error is about.
    pub fn location(&self) -> Option<String> {
        match self {
            TransformError::UnknownPool(p) => Some(p.clone()),
            TransformError::UnknownTask { task, .. }
            | TransformError::AmbiguousTask { task, .. }
            | TransformError::SelfLoop { task, .. }
            | TransformError::InvalidDisplayId { task, .. }
            | TransformError::NotAtChainEnd { task, .. } => Some(task.clone()),
            TransformError::IncompleteTaskOrder { pool, .. } => Some(pool.clone()),
            TransformError::SamePoolMessage { source_task, .. } => Some(source_task.clone()),
            TransformError::DisplayIdCollision { id, .. } => Some(id.clone()),
            _ => None,
        }
    }
}

pub fn parse_hints(text: &str) -> Result<WiringHints, TransformError> {
    serde_json::from_str(text).map_err(|e| TransformError::Hints(e.to_string()))
}

pub fn serialize_hints(hints: &WiringHints) -> String {
    let mut out = serde_json::to_string_pretty(hints).expect("hints serialize to JSON");
    out.push('\n');
    out
}

/// Model plus the warnings produced while adding boundary events.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transformation {
    pub model: CollaborationModel,
    pub warnings: Vec<Finding>,
}

fn pool_order(radar: &BusinessModelRadar) -> Vec<&CoCreationActor> {
    let by_role = |role: ActorRole| radar.actors.iter().filter(move |a| a.role == role);
    by_role(ActorRole::User)
        .chain(by_role(ActorRole::Focal))
        .chain(by_role(ActorRole::Partner))
        .collect()
}

/// Creates one pool per actor with its tasks; no flows yet.
pub fn build_pools(radar: &BusinessModelRadar) -> Result<CollaborationModel, TransformError> {
    let report = validate_bmr(radar);
    if report.has_errors() {
        return Err(TransformError::InvalidRadar(report));
    }
    let mut model = CollaborationModel::new("Collaboration_1");
    for (p, actor) in pool_order(radar).into_iter().enumerate() {
        let mut pool = Pool::new(format!("Pool_{}", p + 1), actor.name.clone());
        pool.role = Some(actor.role);
        let mut push = |name: &str, kind: TaskType| {
            let mut task =
                FlowNode::task(format!("{}_Task_{}", pool.id, pool.nodes.len() + 1), name);
            task.annotation = Some(CbAnnotation::new(actor.name.clone(), kind));
            pool.nodes.push(task);
        };
        for cost in &actor.actor_costs {
            push(cost, TaskType::Cost);
        }
        for activity in actor.activities() {
            for cost in &activity.costs {
                push(cost, TaskType::Cost);
            }
            push(&activity.name, TaskType::CoCreationActivity);
            for benefit in &activity.benefits {
                push(benefit, TaskType::Benefit);
            }
        }
        for benefit in &actor.actor_benefits {
            push(benefit, TaskType::Benefit);
        }
        model.pools.push(pool);
    }
    Ok(model)
}

fn is_dotted_number(s: &str) -> bool {
    !s.is_empty()
        && s.split('.')
            .all(|seg| !seg.is_empty() && seg.bytes().all(|b| b.is_ascii_digit()))
}

/// Numbers tasks `<pool>.<position>` (1-based, current pool order). Tasks
/// named in `overrides` take the given id but still use up their position;
/// a default id that an override has claimed moves on to the next free one.
pub fn assign_display_ids(
    mut model: CollaborationModel,
    overrides: &BTreeMap<String, String>,
) -> Result<CollaborationModel, TransformError> {
    let mut claimed: BTreeMap<&str, &str> = BTreeMap::new();
    for (task, id) in overrides {
        if !is_dotted_number(id) {
            return Err(TransformError::InvalidDisplayId {
                task: task.clone(),
                id: id.clone(),
            });
        }
        if let Some(first) = claimed.insert(id, task) {
            return Err(TransformError::DisplayIdCollision {
                id: id.clone(),
                first: first.to_string(),
                second: task.clone(),
            });
        }
        let hits = model.tasks().filter(|(_, t)| &t.name == task).count();
        match hits {
            0 => {
                return Err(TransformError::UnknownTask {
                    pool: "*".into(),
                    task: task.clone(),
                })
            }
            1 => {}
            _ => {
                return Err(TransformError::AmbiguousTask {
                    pool: None,
                    task: task.clone(),
                })
            }
        }
    }
    let reserved: HashSet<String> = overrides.values().cloned().collect();

    for (p, pool) in model.pools.iter_mut().enumerate() {
        let mut ordinal = 0;
        for node in pool.nodes.iter_mut().filter(|n| n.kind == NodeKind::Task) {
            ordinal += 1;
            if let Some(id) = overrides.get(&node.name) {
                node.display_id = Some(id.clone());
                continue;
            }
            let id = loop {
                let candidate = format!("{}.{}", p + 1, ordinal);
                if !reserved.contains(&candidate) {
                    break candidate;
                }
                ordinal += 1;
            };
            node.display_id = Some(id);
        }
    }
    Ok(model)
}

fn find_pool<'a>(
    model: &'a CollaborationModel,
    name: &str,
) -> Result<(usize, &'a Pool), TransformError> {
    model
        .pools
        .iter()
        .enumerate()
        .find(|(_, p)| p.name == name)
        .ok_or_else(|| TransformError::UnknownPool(name.to_string()))
}

fn find_task(pool: &Pool, name: &str) -> Result<String, TransformError> {
    let mut hits = pool.tasks_named(name);
    let first = hits.next().ok_or_else(|| TransformError::UnknownTask {
        pool: pool.name.clone(),
        task: name.to_string(),
    })?;
    if hits.next().is_some() {
        return Err(TransformError::AmbiguousTask {
            pool: Some(pool.name.clone()),
            task: name.to_string(),
        });
    }
    Ok(first.id.clone())
}

/// Applies task reordering and sequence/message edges from `hints`.
///
/// A pool without explicit sequence edges is chained linearly in its
/// (possibly reordered) task order. Existing flows are replaced.
pub fn apply_wiring(
    mut model: CollaborationModel,
    hints: &WiringHints,
) -> Result<CollaborationModel, TransformError> {
    for (pool_name, order) in &hints.task_order {
        let (p, pool) = find_pool(&model, pool_name)?;
        let mut ids = Vec::with_capacity(order.len());
        for name in order {
            let id = find_task(pool, name)?;
            if ids.contains(&id) {
                return Err(TransformError::IncompleteTaskOrder {
                    pool: pool_name.clone(),
                    problem: format!("{name:?} is listed twice"),
                });
            }
            ids.push(id);
        }
        if let Some(missing) = pool.tasks().find(|t| !ids.contains(&t.id)) {
            return Err(TransformError::IncompleteTaskOrder {
                pool: pool_name.clone(),
                problem: format!("{:?} is missing", missing.name),
            });
        }
        let pool = &mut model.pools[p];
        let mut tasks: Vec<FlowNode> = Vec::new();
        let mut others: Vec<FlowNode> = Vec::new();
        for node in pool.nodes.drain(..) {
            if node.is_task() {
                tasks.push(node);
            } else {
                others.push(node);
            }
        }
        tasks.sort_by_key(|t| ids.iter().position(|id| id == &t.id));
        let (starts, ends): (Vec<_>, Vec<_>) = others
            .into_iter()
            .partition(|n| n.kind == NodeKind::StartEvent);
        pool.nodes = starts.into_iter().chain(tasks).chain(ends).collect();
    }

    let mut explicit: Vec<Vec<(String, String)>> = vec![Vec::new(); model.pools.len()];
    let mut seen = HashSet::new();
    for edge in &hints.sequence_edges {
        let (p, pool) = find_pool(&model, &edge.pool)?;
        let source = find_task(pool, &edge.source)?;
        let target = find_task(pool, &edge.target)?;
        if source == target {
            return Err(TransformError::SelfLoop {
                pool: edge.pool.clone(),
                task: edge.source.clone(),
            });
        }
        if !seen.insert((source.clone(), target.clone())) {
            return Err(TransformError::DuplicateEdge(format!(
                "{}: {:?} -> {:?}",
                edge.pool, edge.source, edge.target
            )));
        }
        explicit[p].push((source, target));
    }

    for (p, pool) in model.pools.iter_mut().enumerate() {
        let edges: Vec<(String, String)> = if explicit[p].is_empty() {
            let ids: Vec<&String> = pool.tasks().map(|t| &t.id).collect();
            ids.windows(2)
                .map(|w| (w[0].clone(), w[1].clone()))
                .collect()
        } else {
            std::mem::take(&mut explicit[p])
        };
        pool.sequence_flows = edges
            .into_iter()
            .enumerate()
            .map(|(i, (s, t))| Flow::new(format!("{}_Flow_{}", pool.id, i + 1), s, t))
            .collect();
    }

    let mut message_flows = Vec::with_capacity(hints.message_edges.len());
    let mut seen = HashSet::new();
    for edge in &hints.message_edges {
        let (sp, source_pool) = find_pool(&model, &edge.source_pool)?;
        let (tp, target_pool) = find_pool(&model, &edge.target_pool)?;
        let source = find_task(source_pool, &edge.source_task)?;
        let target = find_task(target_pool, &edge.target_task)?;
        if source == target {
            return Err(TransformError::SelfLoop {
                pool: edge.source_pool.clone(),
                task: edge.source_task.clone(),
            });
        }
        if sp == tp {
            return Err(TransformError::SamePoolMessage {
                pool: edge.source_pool.clone(),
                source_task: edge.source_task.clone(),
                target_task: edge.target_task.clone(),
            });
        }
        if !seen.insert((source.clone(), target.clone())) {
            return Err(TransformError::DuplicateEdge(format!(
                "{}/{:?} -> {}/{:?}",
                edge.source_pool, edge.source_task, edge.target_pool, edge.target_task
            )));
        }
        message_flows.push(Flow::new(
            format!("MessageFlow_{}", message_flows.len() + 1),
            source,
            target,
        ));
    }
    model.message_flows = message_flows;
    Ok(model)
}

fn fresh_id(pool: &Pool, base: &str) -> String {
    let taken = |id: &str| {
        pool.nodes.iter().any(|n| n.id == id) || pool.sequence_flows.iter().any(|f| f.id == id)
    };
    if !taken(base) {
        return base.to_string();
    }
    (2..)
        .map(|i| format!("{base}_{i}"))
        .find(|id| !taken(id))
        .expect("unbounded search")
}

/// Adds a start event before each pool's chain head and an end event after
/// its tail. Pools with an explicit boundary hint use the named tasks;
/// other pools need exactly one head and one tail. Pools listed in
/// `no_boundary`, or that already contain events, are left alone.
pub fn add_boundary_events(
    mut model: CollaborationModel,
    hints: &WiringHints,
) -> Result<Transformation, TransformError> {
    for name in &hints.no_boundary {
        find_pool(&model, name)?;
    }
    let mut explicit: Vec<Option<(String, String)>> = vec![None; model.pools.len()];
    for hint in &hints.boundary {
        let (p, pool) = find_pool(&model, &hint.pool)?;
        let start = find_task(pool, &hint.start_before)?;
        let end = find_task(pool, &hint.end_after)?;
        if hints.strict_boundary {
            if pool.sequence_flows.iter().any(|f| f.target == start) {
                return Err(TransformError::NotAtChainEnd {
                    pool: hint.pool.clone(),
                    task: hint.start_before.clone(),
                    end: "head",
                });
            }
            if pool.sequence_flows.iter().any(|f| f.source == end) {
                return Err(TransformError::NotAtChainEnd {
                    pool: hint.pool.clone(),
                    task: hint.end_after.clone(),
                    end: "tail",
                });
            }
        }
        explicit[p] = Some((start, end));
    }

    let mut warnings = Vec::new();
    for (p, pool) in model.pools.iter_mut().enumerate() {
        if hints.no_boundary.contains(&pool.name) || pool.has_events() {
            continue;
        }
        let ends = match explicit[p].take() {
            Some(ends) => ends,
            None => {
                let tasks: Vec<&FlowNode> = pool.tasks().collect();
                if tasks.is_empty() {
                    warnings.push(Finding::warning(
                        "empty-pool",
                        format!("/pools/{p}"),
                        format!(
                            "pool {:?} has no tasks; no start or end event added",
                            pool.name
                        ),
                    ));
                    continue;
                }
                let heads: Vec<&FlowNode> = tasks
                    .iter()
                    .copied()
                    .filter(|t| !pool.sequence_flows.iter().any(|f| f.target == t.id))
                    .collect();
                let tails: Vec<&FlowNode> = tasks
                    .iter()
                    .copied()
                    .filter(|t| !pool.sequence_flows.iter().any(|f| f.source == t.id))
                    .collect();
                if heads.len() != 1 || tails.len() != 1 {
                    warnings.push(Finding::warning(
                        "ambiguous-boundary",
                        format!("/pools/{p}"),
                        format!(
                            "pool {:?} has {} chain heads and {} tails; add a boundary hint",
                            pool.name,
                            heads.len(),
                            tails.len()
                        ),
                    ));
                    continue;
                }
                (heads[0].id.clone(), tails[0].id.clone())
            }
        };
        let start_id = fresh_id(pool, &format!("{}_Start", pool.id));
        pool.nodes
            .insert(0, FlowNode::event(start_id.clone(), NodeKind::StartEvent));
        let end_id = fresh_id(pool, &format!("{}_End", pool.id));
        pool.nodes
            .push(FlowNode::event(end_id.clone(), NodeKind::EndEvent));
        let start_flow = fresh_id(pool, &format!("{}_Flow_Start", pool.id));
        pool.sequence_flows
            .insert(0, Flow::new(start_flow, start_id, ends.0));
        let end_flow = fresh_id(pool, &format!("{}_Flow_End", pool.id));
        pool.sequence_flows
            .push(Flow::new(end_flow, ends.1, end_id));
    }
    Ok(Transformation { model, warnings })
}

/// The full radar-to-collaboration pipeline, keeping boundary warnings.
pub fn transform_with_warnings(
    radar: &BusinessModelRadar,
    hints: &WiringHints,
) -> Result<Transformation, TransformError> {
    let model = build_pools(radar)?;
    // wiring first so numbering follows the final task order
    let model = apply_wiring(model, hints)?;
    let model = assign_display_ids(model, &hints.display_ids)?;
    add_boundary_events(model, hints)
}

pub fn transform(
    radar: &BusinessModelRadar,
    hints: &WiringHints,
) -> Result<CollaborationModel, TransformError> {
    transform_with_warnings(radar, hints).map(|t| t.model)
}
