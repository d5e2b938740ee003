//! The BPMN 2.0 collaboration subset: pools, tasks, start/end events,
//! sequence flows inside a pool and message flows between pools.

mod xml;

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::bmr::ActorRole;
use crate::kpi::CbAnnotation;
use crate::validation::{Finding, ValidationReport};

pub use xml::{parse_bpmn, serialize_bpmn, BpmnError, BPMN_NS, CBT_NS};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CollaborationModel {
    pub id: String,
    pub pools: Vec<Pool>,
    #[serde(default)]
    pub message_flows: Vec<MessageFlow>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Pool {
    pub id: String,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub role: Option<ActorRole>,
    #[serde(default)]
    pub nodes: Vec<FlowNode>,
    #[serde(default)]
    pub sequence_flows: Vec<SequenceFlow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum NodeKind {
    Task,
    StartEvent,
    EndEvent,
}

impl NodeKind {
    pub fn element_name(self) -> &'static str {
        match self {
            NodeKind::Task => "task",
            NodeKind::StartEvent => "startEvent",
            NodeKind::EndEvent => "endEvent",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FlowNode {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub display_id: Option<String>,
    pub kind: NodeKind,
    #[serde(default)]
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotation: Option<CbAnnotation>,
}

impl FlowNode {
    pub fn task(id: impl Into<String>, name: impl Into<String>) -> Self {
        FlowNode {
            id: id.into(),
            display_id: None,
            kind: NodeKind::Task,
            name: name.into(),
            annotation: None,
        }
    }

    pub fn event(id: impl Into<String>, kind: NodeKind) -> Self {
        FlowNode {
            id: id.into(),
            display_id: None,
            kind,
            name: String::new(),
            annotation: None,
        }
    }

    pub fn is_task(&self) -> bool {
        self.kind == NodeKind::Task
    }
}

/// A directed edge between two node ids.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Flow {
    pub id: String,
    pub source: String,
    pub target: String,
}

impl Flow {
    pub fn new(
        id: impl Into<String>,
        source: impl Into<String>,
        target: impl Into<String>,
    ) -> Self {
        Flow {
            id: id.into(),
            source: source.into(),
            target: target.into(),
        }
    }
}

pub type SequenceFlow = Flow;
pub type MessageFlow = Flow;

impl Pool {
    pub fn new(id: impl Into<String>, name: impl Into<String>) -> Self {
        Pool {
            id: id.into(),
            name: name.into(),
            role: None,
            nodes: Vec::new(),
            sequence_flows: Vec::new(),
        }
    }

    pub fn tasks(&self) -> impl Iterator<Item = &FlowNode> {
        self.nodes.iter().filter(|n| n.is_task())
    }

    pub fn node(&self, id: &str) -> Option<&FlowNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    /// Tasks with this name, in pool order.
    pub fn tasks_named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a FlowNode> + 'a {
        self.tasks().filter(move |t| t.name == name)
    }

    pub fn has_events(&self) -> bool {
        self.nodes.iter().any(|n| !n.is_task())
    }
}

impl CollaborationModel {
    pub fn new(id: impl Into<String>) -> Self {
        CollaborationModel {
            id: id.into(),
            pools: Vec::new(),
            message_flows: Vec::new(),
        }
    }

    pub fn pool(&self, name: &str) -> Option<&Pool> {
        self.pools.iter().find(|p| p.name == name)
    }

    pub fn tasks(&self) -> impl Iterator<Item = (&Pool, &FlowNode)> {
        self.pools
            .iter()
            .flat_map(|p| p.tasks().map(move |t| (p, t)))
    }

    pub fn task_count(&self) -> usize {
        self.pools.iter().map(|p| p.tasks().count()).sum()
    }

    /// Locates a node by element id, returning its pool index.
    pub fn find_node(&self, id: &str) -> Option<(usize, &FlowNode)> {
        self.pools
            .iter()
            .enumerate()
            .find_map(|(i, p)| p.node(id).map(|n| (i, n)))
    }

    pub fn task_by_display_id(&self, display_id: &str) -> Option<(&Pool, &FlowNode)> {
        self.tasks()
            .find(|(_, t)| t.display_id.as_deref() == Some(display_id))
    }

    pub fn task_by_display_id_mut(&mut self, display_id: &str) -> Option<(&str, &mut FlowNode)> {
        self.pools.iter_mut().find_map(|p| {
            let name = p.name.as_str();
            p.nodes
                .iter_mut()
                .find(|n| n.is_task() && n.display_id.as_deref() == Some(display_id))
                .map(|n| (name, n))
        })
    }
}

/// Reports every structural invariant violation of the model.
pub fn validate_structure(model: &CollaborationModel) -> ValidationReport {
    let mut report = ValidationReport::new();
    if model.pools.is_empty() {
        report.push(Finding::error(
            "no-pools",
            "/pools",
            "a collaboration needs at least one pool",
        ));
    }

    let mut ids: HashSet<&str> = HashSet::new();
    fn claim<'a>(
        ids: &mut HashSet<&'a str>,
        id: &'a str,
        path: String,
        report: &mut ValidationReport,
    ) {
        if id.is_empty() {
            report.push(Finding::error(
                "empty-id",
                path,
                "element id must not be empty",
            ));
        } else if !ids.insert(id) {
            report.push(Finding::error(
                "duplicate-id",
                path,
                format!("element id {id:?} is used more than once"),
            ));
        }
    }
    claim(&mut ids, &model.id, "/id".into(), &mut report);
    for (p, pool) in model.pools.iter().enumerate() {
        claim(&mut ids, &pool.id, format!("/pools/{p}/id"), &mut report);
        for (n, node) in pool.nodes.iter().enumerate() {
            claim(
                &mut ids,
                &node.id,
                format!("/pools/{p}/nodes/{n}/id"),
                &mut report,
            );
        }
        for (f, flow) in pool.sequence_flows.iter().enumerate() {
            claim(
                &mut ids,
                &flow.id,
                format!("/pools/{p}/sequenceFlows/{f}/id"),
                &mut report,
            );
        }
    }
    for (f, flow) in model.message_flows.iter().enumerate() {
        claim(
            &mut ids,
            &flow.id,
            format!("/messageFlows/{f}/id"),
            &mut report,
        );
    }

    let mut display_ids: HashMap<&str, String> = HashMap::new();
    for (p, pool) in model.pools.iter().enumerate() {
        for (n, node) in pool.nodes.iter().enumerate() {
            let path = format!("/pools/{p}/nodes/{n}");
            if let Some(d) = node.display_id.as_deref() {
                if let Some(first) = display_ids.get(d) {
                    report.push(Finding::error(
                        "duplicate-display-id",
                        format!("{path}/displayId"),
                        format!("display id {d:?} already used at {first}"),
                    ));
                } else {
                    display_ids.insert(d, path.clone());
                }
            }
            match (&node.annotation, node.kind) {
                (Some(_), NodeKind::StartEvent | NodeKind::EndEvent) => {
                    report.push(Finding::error(
                        "annotated-event",
                        format!("{path}/annotation"),
                        "events cannot carry an annotation",
                    ));
                }
                (Some(a), NodeKind::Task) => {
                    if a.actor != pool.name {
                        report.push(Finding::error(
                            "actor-mismatch",
                            format!("{path}/annotation/actor"),
                            format!(
                                "annotation actor {:?} does not match pool {:?}",
                                a.actor, pool.name
                            ),
                        ));
                    }
                    if a.kpi.trim().is_empty() && (a.current.is_some() || a.target.is_some()) {
                        report.push(Finding::error(
                            "missing-kpi",
                            format!("{path}/annotation/kpi"),
                            "a KPI name is required when current or target values are set",
                        ));
                    }
                }
                (None, _) => {}
            }
        }
        for (f, flow) in pool.sequence_flows.iter().enumerate() {
            let path = format!("/pools/{p}/sequenceFlows/{f}");
            check_endpoints(model, flow, &path, &mut report);
            for end in [&flow.source, &flow.target] {
                if let Some((q, _)) = model.find_node(end) {
                    if q != p {
                        report.push(Finding::error(
                            "cross-pool-sequence-flow",
                            path.clone(),
                            format!("sequence flow endpoint {end:?} lies in another pool"),
                        ));
                    }
                }
            }
        }
    }

    for (f, flow) in model.message_flows.iter().enumerate() {
        let path = format!("/messageFlows/{f}");
        check_endpoints(model, flow, &path, &mut report);
        let source = model.find_node(&flow.source);
        let target = model.find_node(&flow.target);
        for (end, found) in [(&flow.source, source), (&flow.target, target)] {
            if let Some((_, node)) = found {
                if !node.is_task() {
                    report.push(Finding::error(
                        "message-flow-endpoint",
                        path.clone(),
                        format!("message flow endpoint {end:?} is not a task"),
                    ));
                }
            }
        }
        if let (Some((a, _)), Some((b, _))) = (source, target) {
            if a == b && flow.source != flow.target {
                report.push(Finding::error(
                    "same-pool-message-flow",
                    path,
                    "message flow endpoints must lie in different pools",
                ));
            }
        }
    }
    report
}

fn check_endpoints(
    model: &CollaborationModel,
    flow: &Flow,
    path: &str,
    report: &mut ValidationReport,
) {
    if flow.source == flow.target {
        report.push(Finding::error(
            "self-loop",
            path.to_string(),
            format!("flow connects {:?} to itself", flow.source),
        ));
    }
    for end in [&flow.source, &flow.target] {
        if model.find_node(end).is_none() {
            report.push(Finding::error(
                "dangling-reference",
                path.to_string(),
                format!("flow references unknown node {end:?}"),
            ));
        }
    }
}
