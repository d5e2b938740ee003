use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use quick_xml::escape::escape;
use quick_xml::events::{BytesStart, Event};
use quick_xml::name::ResolveResult;
use quick_xml::NsReader;
use thiserror::Error;

use super::{validate_structure, CollaborationModel, Flow, FlowNode, NodeKind, Pool};
use crate::bmr::ActorRole;
use crate::kpi::{parse_formula, CbAnnotation, TaskType};
use crate::validation::ValidationReport;

pub const BPMN_NS: &str = "http://www.omg.org/spec/BPMN/20100524/MODEL";
pub const CBT_NS: &str = "urn:cb-tracker:1";

#[derive(Debug, Error)]
pub enum BpmnError {
    #[error("XML syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unsupported element <{element}> at line {line}, column {column}")]
    Unsupported {
        element: String,
        line: usize,
        column: usize,
    },
    #[error("invalid <{element}> at line {line}, column {column}: {message}")]
    Invalid {
        element: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("flow {flow:?} references unknown node {reference:?}")]
    DanglingReference { flow: String, reference: String },
    #[error("sequence flow {flow:?} connects nodes in different pools")]
    CrossPoolSequenceFlow { flow: String },
    #[error("model violates structural invariants:\n{0}")]
    Invariant(ValidationReport),
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Ns {
    Bpmn,
    Cbt,
    None,
    Other,
}

#[derive(Debug)]
struct Element {
    ns: Ns,
    local: String,
    raw: String,
    attrs: Vec<(Ns, String, String)>,
    children: Vec<Element>,
    text: String,
    line: usize,
    column: usize,
}

impl Element {
    fn is(&self, ns: Ns, local: &str) -> bool {
        self.ns == ns && self.local == local
    }

    fn attr(&self, name: &str) -> Option<&str> {
        self.attr_ns(Ns::None, name)
    }

    fn attr_ns(&self, ns: Ns, name: &str) -> Option<&str> {
        self.attrs
            .iter()
            .find(|(n, k, _)| *n == ns && k == name)
            .map(|(_, _, v)| v.as_str())
    }

    fn required(&self, name: &str) -> Result<&str, BpmnError> {
        self.attr(name)
            .ok_or_else(|| self.invalid(format!("missing attribute {name:?}")))
    }

    fn unsupported(&self) -> BpmnError {
        BpmnError::Unsupported {
            element: self.raw.clone(),
            line: self.line,
            column: self.column,
        }
    }

    fn invalid(&self, message: String) -> BpmnError {
        BpmnError::Invalid {
            element: self.raw.clone(),
            line: self.line,
            column: self.column,
            message,
        }
    }
}

fn line_col(src: &str, pos: usize) -> (usize, usize) {
    let pos = pos.min(src.len());
    let before = &src[..pos];
    let line = before.matches('\n').count() + 1;
    let line_start = before.rfind('\n').map_or(0, |i| i + 1);
    (line, before[line_start..].chars().count() + 1)
}

fn namespace(result: &ResolveResult) -> Ns {
    match result {
        ResolveResult::Bound(ns) if ns.as_ref() == BPMN_NS.as_bytes() => Ns::Bpmn,
        ResolveResult::Bound(ns) if ns.as_ref() == CBT_NS.as_bytes() => Ns::Cbt,
        ResolveResult::Unbound => Ns::None,
        _ => Ns::Other,
    }
}

fn read_tree(src: &str) -> Result<Element, BpmnError> {
    let mut reader = NsReader::from_str(src);
    reader.config_mut().trim_text(true);
    let syntax = |reader: &NsReader<&[u8]>, message: String| {
        let (line, column) = line_col(src, reader.error_position() as usize);
        BpmnError::Syntax {
            line,
            column,
            message,
        }
    };

    let mut stack: Vec<Element> = Vec::new();
    let mut root: Option<Element> = None;
    loop {
        let before = reader.buffer_position() as usize;
        let step = reader
            .read_resolved_event()
            .map(|(resolved, event)| (namespace(&resolved), event))
            .map_err(|e| e.to_string());
        let (ns, event) = match step {
            Ok(step) => step,
            Err(message) => return Err(syntax(&reader, message)),
        };
        let start_pos = src[before..].find('<').map_or(before, |k| before + k);
        match event {
            Event::Start(ref e) | Event::Empty(ref e) => {
                let is_empty = matches!(event, Event::Empty(_));
                let element =
                    open_element(&reader, ns, e, src, start_pos).map_err(|m| syntax(&reader, m))?;
                if is_empty {
                    attach(&mut stack, &mut root, element, &reader, src)?;
                } else {
                    stack.push(element);
                }
            }
            Event::End(_) => {
                let element = stack
                    .pop()
                    .ok_or_else(|| syntax(&reader, "unexpected closing tag".into()))?;
                attach(&mut stack, &mut root, element, &reader, src)?;
            }
            Event::Text(t) => {
                let text = t.unescape().map_err(|e| syntax(&reader, e.to_string()))?;
                match stack.last_mut() {
                    Some(top) => top.text.push_str(&text),
                    None => return Err(syntax(&reader, "text outside the root element".into())),
                }
            }
            Event::CData(t) => {
                let text = String::from_utf8_lossy(&t).into_owned();
                if let Some(top) = stack.last_mut() {
                    top.text.push_str(&text);
                }
            }
            Event::Eof => break,
            _ => {}
        }
    }
    if !stack.is_empty() {
        let (line, column) = line_col(src, src.len());
        return Err(BpmnError::Syntax {
            line,
            column,
            message: format!("unclosed element <{}>", stack.last().unwrap().raw),
        });
    }
    root.ok_or(BpmnError::Syntax {
        line: 1,
        column: 1,
        message: "document has no root element".into(),
    })
}

fn open_element(
    reader: &NsReader<&[u8]>,
    ns: Ns,
    e: &BytesStart,
    src: &str,
    pos: usize,
) -> Result<Element, String> {
    let raw = String::from_utf8_lossy(e.name().as_ref()).into_owned();
    let local = String::from_utf8_lossy(e.local_name().as_ref()).into_owned();
    let mut attrs = Vec::new();
    for attr in e.attributes() {
        let attr = attr.map_err(|err| err.to_string())?;
        if attr.key.as_namespace_binding().is_some() {
            continue;
        }
        let (ns, name) = reader.resolve_attribute(attr.key);
        let value = attr.unescape_value().map_err(|err| err.to_string())?;
        attrs.push((
            namespace(&ns),
            String::from_utf8_lossy(name.as_ref()).into_owned(),
            value.into_owned(),
        ));
    }
    let (line, column) = line_col(src, pos);
    Ok(Element {
        ns,
        local,
        raw,
        attrs,
        children: Vec::new(),
        text: String::new(),
        line,
        column,
    })
}

fn attach(
    stack: &mut [Element],
    root: &mut Option<Element>,
    element: Element,
    reader: &NsReader<&[u8]>,
    src: &str,
) -> Result<(), BpmnError> {
    match stack.last_mut() {
        Some(parent) => parent.children.push(element),
        None if root.is_none() => *root = Some(element),
        None => {
            let (line, column) = line_col(src, reader.buffer_position() as usize);
            return Err(BpmnError::Syntax {
                line,
                column,
                message: "more than one root element".into(),
            });
        }
    }
    Ok(())
}

/// Parses a document in the supported BPMN 2.0 subset.
pub fn parse_bpmn(xml: &str) -> Result<CollaborationModel, BpmnError> {
    let root = read_tree(xml)?;
    if !root.is(Ns::Bpmn, "definitions") {
        return Err(root.unsupported());
    }

    let mut collaboration = None;
    let mut processes: Vec<&Element> = Vec::new();
    for child in &root.children {
        if child.is(Ns::Bpmn, "collaboration") {
            if collaboration.is_some() {
                return Err(child.invalid("only one collaboration is supported".into()));
            }
            collaboration = Some(child);
        } else if child.is(Ns::Bpmn, "process") {
            processes.push(child);
        } else {
            return Err(child.unsupported());
        }
    }
    let collaboration =
        collaboration.ok_or_else(|| root.invalid("missing <bpmn:collaboration>".into()))?;

    let mut model = CollaborationModel::new(collaboration.required("id")?);
    let mut process_refs: Vec<(&str, &Element)> = Vec::new();
    for child in &collaboration.children {
        if child.is(Ns::Bpmn, "participant") {
            let mut pool = Pool::new(child.required("id")?, child.attr("name").unwrap_or(""));
            if let Some(role) = child.attr_ns(Ns::Cbt, "role") {
                pool.role = Some(
                    ActorRole::parse(role)
                        .ok_or_else(|| child.invalid(format!("unknown role {role:?}")))?,
                );
            }
            if let Some(grandchild) = child.children.first() {
                return Err(grandchild.unsupported());
            }
            process_refs.push((child.required("processRef")?, child));
            model.pools.push(pool);
        } else if child.is(Ns::Bpmn, "messageFlow") {
            model.message_flows.push(read_flow(child)?);
        } else {
            return Err(child.unsupported());
        }
    }

    let mut used = HashSet::new();
    for (pool, (process_ref, participant)) in model.pools.iter_mut().zip(&process_refs) {
        let process = processes
            .iter()
            .find(|p| p.attr("id") == Some(*process_ref))
            .ok_or_else(|| {
                participant.invalid(format!(
                    "processRef {process_ref:?} has no matching process"
                ))
            })?;
        if !used.insert(*process_ref) {
            return Err(participant.invalid(format!(
                "process {process_ref:?} is referenced by more than one participant"
            )));
        }
        read_process(process, pool)?;
    }
    if let Some(orphan) = processes
        .iter()
        .find(|p| !used.contains(p.attr("id").unwrap_or("")))
    {
        return Err(orphan.invalid("process is not referenced by any participant".into()));
    }

    resolve_references(&model)?;
    Ok(model)
}

fn read_flow(e: &Element) -> Result<Flow, BpmnError> {
    if let Some(child) = e.children.first() {
        return Err(child.unsupported());
    }
    Ok(Flow::new(
        e.required("id")?,
        e.required("sourceRef")?,
        e.required("targetRef")?,
    ))
}

fn read_process(process: &Element, pool: &mut Pool) -> Result<(), BpmnError> {
    for child in &process.children {
        let kind = match (child.ns.clone(), child.local.as_str()) {
            (Ns::Bpmn, "task") => NodeKind::Task,
            (Ns::Bpmn, "startEvent") => NodeKind::StartEvent,
            (Ns::Bpmn, "endEvent") => NodeKind::EndEvent,
            (Ns::Bpmn, "sequenceFlow") => {
                pool.sequence_flows.push(read_flow(child)?);
                continue;
            }
            _ => return Err(child.unsupported()),
        };
        let mut node = FlowNode::event(child.required("id")?, kind);
        node.name = child.attr("name").unwrap_or("").to_string();
        for ext in &child.children {
            if !ext.is(Ns::Bpmn, "extensionElements") {
                return Err(ext.unsupported());
            }
            for item in &ext.children {
                if !item.is(Ns::Cbt, "annotation") {
                    return Err(item.unsupported());
                }
                read_annotation(item, &mut node)?;
            }
        }
        pool.nodes.push(node);
    }
    Ok(())
}

fn read_annotation(e: &Element, node: &mut FlowNode) -> Result<(), BpmnError> {
    if node.display_id.is_some() || node.annotation.is_some() {
        return Err(e.invalid("a node carries at most one annotation".into()));
    }
    node.display_id = e.attr("displayId").map(str::to_string);
    let task_type = match e.attr("type") {
        None => {
            if e.attr("actor").is_some() || e.attr("goal").is_some() || !e.children.is_empty() {
                return Err(e.invalid("annotation content requires a \"type\" attribute".into()));
            }
            return Ok(());
        }
        Some(t) => TaskType::parse(t).ok_or_else(|| e.invalid(format!("unknown type {t:?}")))?,
    };
    let mut annotation = CbAnnotation::new(e.required("actor")?, task_type);
    annotation.goal = e.attr("goal").unwrap_or("").to_string();
    let mut kpis = e.children.iter();
    if let Some(kpi) = kpis.next() {
        if !kpi.is(Ns::Cbt, "kpi") {
            return Err(kpi.unsupported());
        }
        annotation.kpi = kpi.required("name")?.to_string();
        for value in &kpi.children {
            let slot = if value.is(Ns::Cbt, "current") {
                &mut annotation.current
            } else if value.is(Ns::Cbt, "target") {
                &mut annotation.target
            } else {
                return Err(value.unsupported());
            };
            if slot.is_some() {
                return Err(value.invalid("duplicate value element".into()));
            }
            let formula = parse_formula(&value.text)
                .map_err(|err| value.invalid(format!("formula {:?}: {err}", value.text)))?;
            *slot = Some(formula);
        }
    }
    if let Some(extra) = kpis.next() {
        return Err(extra.invalid("only one KPI per task is supported".into()));
    }
    node.annotation = Some(annotation);
    Ok(())
}

fn resolve_references(model: &CollaborationModel) -> Result<(), BpmnError> {
    let mut owner: HashMap<&str, usize> = HashMap::new();
    let mut ids = HashSet::new();
    for (p, pool) in model.pools.iter().enumerate() {
        for node in &pool.nodes {
            if !ids.insert(node.id.as_str()) {
                return Err(BpmnError::Invariant(duplicate(&node.id)));
            }
            owner.insert(node.id.as_str(), p);
        }
    }
    for (p, pool) in model.pools.iter().enumerate() {
        for flow in &pool.sequence_flows {
            for end in [&flow.source, &flow.target] {
                match owner.get(end.as_str()) {
                    None => {
                        return Err(BpmnError::DanglingReference {
                            flow: flow.id.clone(),
                            reference: end.clone(),
                        })
                    }
                    Some(&q) if q != p => {
                        return Err(BpmnError::CrossPoolSequenceFlow {
                            flow: flow.id.clone(),
                        })
                    }
                    Some(_) => {}
                }
            }
        }
    }
    for flow in &model.message_flows {
        for end in [&flow.source, &flow.target] {
            if !owner.contains_key(end.as_str()) {
                return Err(BpmnError::DanglingReference {
                    flow: flow.id.clone(),
                    reference: end.clone(),
                });
            }
        }
    }
    Ok(())
}

fn duplicate(id: &str) -> ValidationReport {
    let mut report = ValidationReport::new();
    report.push(crate::validation::Finding::error(
        "duplicate-id",
        id.to_string(),
        format!("element id {id:?} is used more than once"),
    ));
    report
}

/// Process element id for a pool; participants point at it via `processRef`.
fn process_id(pool: &Pool) -> String {
    format!("{}_process", pool.id)
}

/// Writes the model as canonical BPMN 2.0 XML. Equal models give equal bytes.
pub fn serialize_bpmn(model: &CollaborationModel) -> Result<String, BpmnError> {
    let report = validate_structure(model);
    if report.has_errors() {
        return Err(BpmnError::Invariant(report));
    }

    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        out,
        "<bpmn:definitions xmlns:bpmn=\"{BPMN_NS}\" xmlns:cbt=\"{CBT_NS}\" id=\"Definitions_{}\" targetNamespace=\"{CBT_NS}\">",
        escape(&model.id)
    );
    let _ = writeln!(out, "  <bpmn:collaboration id=\"{}\">", escape(&model.id));
    for pool in &model.pools {
        let _ = write!(
            out,
            "    <bpmn:participant id=\"{}\" name=\"{}\" processRef=\"{}\"",
            escape(&pool.id),
            escape(&pool.name),
            escape(process_id(pool))
        );
        if let Some(role) = pool.role {
            let _ = write!(out, " cbt:role=\"{role}\"");
        }
        out.push_str("/>\n");
    }
    for flow in &model.message_flows {
        write_flow(&mut out, "messageFlow", flow, 4);
    }
    out.push_str("  </bpmn:collaboration>\n");

    for pool in &model.pools {
        let _ = writeln!(
            out,
            "  <bpmn:process id=\"{}\" isExecutable=\"false\">",
            escape(process_id(pool))
        );
        for node in &pool.nodes {
            write_node(&mut out, node);
        }
        for flow in &pool.sequence_flows {
            write_flow(&mut out, "sequenceFlow", flow, 4);
        }
        out.push_str("  </bpmn:process>\n");
    }
    out.push_str("</bpmn:definitions>\n");
    Ok(out)
}

fn write_flow(out: &mut String, element: &str, flow: &Flow, indent: usize) {
    let _ = writeln!(
        out,
        "{:indent$}<bpmn:{element} id=\"{}\" sourceRef=\"{}\" targetRef=\"{}\"/>",
        "",
        escape(&flow.id),
        escape(&flow.source),
        escape(&flow.target),
    );
}

fn write_node(out: &mut String, node: &FlowNode) {
    let element = node.kind.element_name();
    let _ = write!(out, "    <bpmn:{element} id=\"{}\"", escape(&node.id));
    if node.is_task() || !node.name.is_empty() {
        let _ = write!(out, " name=\"{}\"", escape(&node.name));
    }
    if node.display_id.is_none() && node.annotation.is_none() {
        out.push_str("/>\n");
        return;
    }
    out.push_str(">\n      <bpmn:extensionElements>\n        <cbt:annotation");
    if let Some(d) = &node.display_id {
        let _ = write!(out, " displayId=\"{}\"", escape(d));
    }
    match &node.annotation {
        None => out.push_str("/>\n"),
        Some(a) => {
            let _ = write!(
                out,
                " actor=\"{}\" type=\"{}\" goal=\"{}\"",
                escape(&a.actor),
                a.task_type,
                escape(&a.goal)
            );
            if a.kpi.is_empty() {
                out.push_str("/>\n");
            } else {
                let _ = write!(out, ">\n          <cbt:kpi name=\"{}\"", escape(&a.kpi));
                if a.current.is_none() && a.target.is_none() {
                    out.push_str("/>\n");
                } else {
                    out.push_str(">\n");
                    if let Some(c) = &a.current {
                        let _ = writeln!(
                            out,
                            "            <cbt:current>{}</cbt:current>",
                            escape(c.to_string())
                        );
                    }
                    if let Some(t) = &a.target {
                        let _ = writeln!(
                            out,
                            "            <cbt:target>{}</cbt:target>",
                            escape(t.to_string())
                        );
                    }
                    out.push_str("          </cbt:kpi>\n");
                }
                out.push_str("        </cbt:annotation>\n");
            }
        }
    }
    let _ = writeln!(
        out,
        "      </bpmn:extensionElements>\n    </bpmn:{element}>"
    );
}
