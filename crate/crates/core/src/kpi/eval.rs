//! Dependency ordering and evaluation of KPI formulas across tasks.
//!
//! Every task that carries a KPI is a node keyed by `(displayId, kpi)`.
//! A reference `(1.5,Streaming count)` inside a formula adds an edge from
//! the referencing node to the referenced one. Current formulas read the
//! current values of their references and target formulas the target
//! values, so the two columns are independent scenarios over one graph.

use std::collections::HashMap;
use std::fmt;

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{CbAnnotation, FormulaExpr, KpiRef};
use crate::bpmn::CollaborationModel;
use crate::kpi::BinaryOp;
use crate::validation::Finding;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct KpiKey {
    pub task_display_id: String,
    pub kpi: String,
}

impl KpiKey {
    pub fn new(task_display_id: impl Into<String>, kpi: impl Into<String>) -> Self {
        KpiKey {
            task_display_id: task_display_id.into(),
            kpi: kpi.into(),
        }
    }
}

impl fmt::Display for KpiKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.task_display_id, self.kpi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Column {
    Current,
    Target,
}

impl fmt::Display for Column {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Column::Current => "current",
            Column::Target => "target",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("cycle between KPIs: {}", .members.iter().map(ToString::to_string).collect::<Vec<_>>().join(" -> "))]
pub struct CycleError {
    /// Members in reference order: each one references the next, the last references the first.
    pub members: Vec<KpiKey>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MissingKind {
    Task,
    Kpi,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KpiError {
    #[error(transparent)]
    Cycle(#[from] CycleError),
    #[error("{from} references unknown {} in {reference}", match .missing { MissingKind::Task => "task", MissingKind::Kpi => "KPI" })]
    UnknownReference {
        from: KpiKey,
        reference: KpiRef,
        missing: MissingKind,
    },
    #[error("{from}: {column} value of {reference} is not set")]
    MissingValue {
        from: KpiKey,
        reference: KpiRef,
        column: Column,
    },
    #[error("{key}: division by zero in {column} formula at column {position}")]
    DivideByZero {
        key: KpiKey,
        column: Column,
        position: usize,
    },
    #[error("{key}: arithmetic overflow in {column} formula")]
    Overflow { key: KpiKey, column: Column },
    #[error("display id {0:?} is used by more than one KPI")]
    DuplicateKey(KpiKey),
    #[error("evaluation plan is not a valid order: {0}")]
    InvalidPlan(String),
    #[error("no task with display id {0:?}")]
    UnknownTask(String),
    #[error("task {task} has no KPI named {kpi:?}")]
    UnknownKpi { task: String, kpi: String },
    #[error("annotation actor {actor:?} does not match pool {pool:?} of task {task}")]
    ActorMismatch {
        task: String,
        actor: String,
        pool: String,
    },
}

impl KpiError {
    /// Task display id the error is about, for machine-readable locations.
    pub fn location(&self) -> Option<String> {
        match self {
            KpiError::Cycle(c) => c.members.first().map(|k| k.task_display_id.clone()),
            KpiError::UnknownReference { reference, .. } => Some(reference.task.clone()),
            KpiError::MissingValue { from, .. } => Some(from.task_display_id.clone()),
            KpiError::DivideByZero { key, .. } | KpiError::Overflow { key, .. } => {
                Some(key.task_display_id.clone())
            }
            KpiError::DuplicateKey(k) => Some(k.task_display_id.clone()),
            KpiError::UnknownTask(t) => Some(t.clone()),
            KpiError::UnknownKpi { task, .. } | KpiError::ActorMismatch { task, .. } => {
                Some(task.clone())
            }
            KpiError::InvalidPlan(_) => None,
        }
    }
}

/// Evaluation order over all KPI-bearing tasks; dependencies come first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EvaluationPlan {
    pub order: Vec<KpiKey>,
    /// Direct dependencies of each key, in reference order.
    pub dependencies: HashMap<KpiKey, Vec<KpiKey>>,
}

impl EvaluationPlan {
    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn position(&self, key: &KpiKey) -> Option<usize> {
        self.order.iter().position(|k| k == key)
    }

    /// The same graph with a different order; evaluation checks it is topological.
    pub fn reordered(&self, order: Vec<KpiKey>) -> EvaluationPlan {
        EvaluationPlan {
            order,
            dependencies: self.dependencies.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EvaluatedKpi {
    pub task_display_id: String,
    pub kpi: String,
    pub current_value: Option<Decimal>,
    pub target_value: Option<Decimal>,
}

impl EvaluatedKpi {
    pub fn value(&self, column: Column) -> Option<Decimal> {
        match column {
            Column::Current => self.current_value,
            Column::Target => self.target_value,
        }
    }
}

/// Evaluated values of every KPI in model order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvaluationResult {
    pub values: Vec<EvaluatedKpi>,
    pub diagnostics: Vec<Finding>,
}

impl EvaluationResult {
    pub fn get(&self, task_display_id: &str, kpi: &str) -> Option<&EvaluatedKpi> {
        self.values
            .iter()
            .find(|v| v.task_display_id == task_display_id && v.kpi == kpi)
    }

    pub fn for_task(&self, task_display_id: &str) -> Option<&EvaluatedKpi> {
        self.values
            .iter()
            .find(|v| v.task_display_id == task_display_id)
    }
}

struct Entry<'a> {
    key: KpiKey,
    annotation: &'a CbAnnotation,
}

fn entries(model: &CollaborationModel) -> Result<Vec<Entry<'_>>, KpiError> {
    let mut out: Vec<Entry> = Vec::new();
    for (_, task) in model.tasks() {
        let (Some(display_id), Some(annotation)) = (&task.display_id, &task.annotation) else {
            continue;
        };
        if !annotation.has_kpi() {
            continue;
        }
        let key = KpiKey::new(display_id.clone(), annotation.kpi.clone());
        if out
            .iter()
            .any(|e| e.key.task_display_id == key.task_display_id)
        {
            return Err(KpiError::DuplicateKey(key));
        }
        out.push(Entry { key, annotation });
    }
    Ok(out)
}

fn resolve_ref(
    model: &CollaborationModel,
    index: &HashMap<&KpiKey, usize>,
    from: &KpiKey,
    reference: &KpiRef,
) -> Result<usize, KpiError> {
    let key = KpiKey::new(reference.task.clone(), reference.kpi.clone());
    if let Some(&i) = index.get(&key) {
        return Ok(i);
    }
    let missing = if model.task_by_display_id(&reference.task).is_some() {
        MissingKind::Kpi
    } else {
        MissingKind::Task
    };
    Err(KpiError::UnknownReference {
        from: from.clone(),
        reference: reference.clone(),
        missing,
    })
}

#[derive(Clone, Copy, PartialEq)]
enum Mark {
    New,
    Active,
    Done,
}

/// Orders all KPIs so each comes after everything it references.
pub fn resolve_dependencies(model: &CollaborationModel) -> Result<EvaluationPlan, KpiError> {
    let entries = entries(model)?;
    let index: HashMap<&KpiKey, usize> = entries
        .iter()
        .enumerate()
        .map(|(i, e)| (&e.key, i))
        .collect();

    let mut deps: Vec<Vec<usize>> = Vec::with_capacity(entries.len());
    for entry in &entries {
        let mut list = Vec::new();
        let formulas = [&entry.annotation.current, &entry.annotation.target];
        for formula in formulas.into_iter().flatten() {
            for reference in formula.refs() {
                let d = resolve_ref(model, &index, &entry.key, reference)?;
                if !list.contains(&d) {
                    list.push(d);
                }
            }
        }
        deps.push(list);
    }

    let mut marks = vec![Mark::New; entries.len()];
    let mut stack = Vec::new();
    let mut order = Vec::with_capacity(entries.len());
    for i in 0..entries.len() {
        if marks[i] == Mark::New {
            visit(i, &deps, &mut marks, &mut stack, &mut order).map_err(|cycle| CycleError {
                members: cycle.into_iter().map(|c| entries[c].key.clone()).collect(),
            })?;
        }
    }

    let dependencies = entries
        .iter()
        .zip(&deps)
        .map(|(e, d)| {
            (
                e.key.clone(),
                d.iter().map(|&j| entries[j].key.clone()).collect(),
            )
        })
        .collect();
    Ok(EvaluationPlan {
        order: order.into_iter().map(|i| entries[i].key.clone()).collect(),
        dependencies,
    })
}

fn visit(
    node: usize,
    deps: &[Vec<usize>],
    marks: &mut [Mark],
    stack: &mut Vec<usize>,
    order: &mut Vec<usize>,
) -> Result<(), Vec<usize>> {
    marks[node] = Mark::Active;
    stack.push(node);
    for &d in &deps[node] {
        match marks[d] {
            Mark::Done => {}
            Mark::Active => {
                let start = stack.iter().position(|&s| s == d).unwrap_or(0);
                return Err(stack[start..].to_vec());
            }
            Mark::New => visit(d, deps, marks, stack, order)?,
        }
    }
    stack.pop();
    marks[node] = Mark::Done;
    order.push(node);
    Ok(())
}

/// Resolves dependencies and evaluates both columns.
pub fn evaluate(model: &CollaborationModel) -> Result<EvaluationResult, KpiError> {
    let plan = resolve_dependencies(model)?;
    evaluate_with_plan(model, &plan)
}

/// Evaluates in the order given by `plan`, which must cover every KPI and
/// list each one after its dependencies.
pub fn evaluate_with_plan(
    model: &CollaborationModel,
    plan: &EvaluationPlan,
) -> Result<EvaluationResult, KpiError> {
    let entries = entries(model)?;
    let index: HashMap<&KpiKey, usize> = entries
        .iter()
        .enumerate()
        .map(|(i, e)| (&e.key, i))
        .collect();
    check_plan(&entries, &index, plan)?;

    let mut values: Vec<(Option<Decimal>, Option<Decimal>)> = vec![(None, None); entries.len()];
    let mut diagnostics = Vec::new();
    for key in &plan.order {
        let i = index[key];
        let entry = &entries[i];
        for column in [Column::Current, Column::Target] {
            let value = match entry.annotation.formula(column) {
                Some(formula) => Some(eval_expr(formula, &entry.key, column, &|r: &KpiRef| {
                    let j = resolve_ref(model, &index, &entry.key, r)?;
                    let v = match column {
                        Column::Current => values[j].0,
                        Column::Target => values[j].1,
                    };
                    v.ok_or_else(|| KpiError::MissingValue {
                        from: entry.key.clone(),
                        reference: r.clone(),
                        column,
                    })
                })?),
                None => {
                    diagnostics.push(Finding::warning(
                        "missing-value",
                        format!("task {}/{}", entry.key.task_display_id, entry.key.kpi),
                        format!("no {column} value set"),
                    ));
                    None
                }
            };
            match column {
                Column::Current => values[i].0 = value,
                Column::Target => values[i].1 = value,
            }
        }
    }

    Ok(EvaluationResult {
        values: entries
            .iter()
            .zip(values)
            .map(|(e, (current, target))| EvaluatedKpi {
                task_display_id: e.key.task_display_id.clone(),
                kpi: e.key.kpi.clone(),
                current_value: current,
                target_value: target,
            })
            .collect(),
        diagnostics,
    })
}

fn check_plan(
    entries: &[Entry],
    index: &HashMap<&KpiKey, usize>,
    plan: &EvaluationPlan,
) -> Result<(), KpiError> {
    if plan.order.len() != entries.len() {
        return Err(KpiError::InvalidPlan(format!(
            "plan has {} entries, model has {} KPIs",
            plan.order.len(),
            entries.len()
        )));
    }
    let mut seen = vec![false; entries.len()];
    for key in &plan.order {
        let Some(&i) = index.get(key) else {
            return Err(KpiError::InvalidPlan(format!(
                "{key} is not a KPI of the model"
            )));
        };
        if seen[i] {
            return Err(KpiError::InvalidPlan(format!("{key} appears twice")));
        }
        let entry = &entries[i];
        let formulas = [&entry.annotation.current, &entry.annotation.target];
        for formula in formulas.into_iter().flatten() {
            for r in formula.refs() {
                let dep = KpiKey::new(r.task.clone(), r.kpi.clone());
                if let Some(&j) = index.get(&dep) {
                    if !seen[j] {
                        return Err(KpiError::InvalidPlan(format!(
                            "{key} precedes its dependency {dep}"
                        )));
                    }
                }
            }
        }
        seen[i] = true;
    }
    Ok(())
}

fn eval_expr(
    expr: &FormulaExpr,
    key: &KpiKey,
    column: Column,
    lookup: &dyn Fn(&KpiRef) -> Result<Decimal, KpiError>,
) -> Result<Decimal, KpiError> {
    match expr {
        FormulaExpr::Literal(d) => Ok(*d),
        FormulaExpr::Ref(r) => lookup(r),
        FormulaExpr::Binary {
            op,
            lhs,
            rhs,
            column: position,
        } => {
            let a = eval_expr(lhs, key, column, lookup)?;
            let b = eval_expr(rhs, key, column, lookup)?;
            let overflow = || KpiError::Overflow {
                key: key.clone(),
                column,
            };
            match op {
                BinaryOp::Add => a.checked_add(b).ok_or_else(overflow),
                BinaryOp::Sub => a.checked_sub(b).ok_or_else(overflow),
                BinaryOp::Mul => a.checked_mul(b).ok_or_else(overflow),
                BinaryOp::Div => {
                    if b.is_zero() {
                        return Err(KpiError::DivideByZero {
                            key: key.clone(),
                            column,
                            position: *position,
                        });
                    }
                    a.checked_div(b).ok_or_else(overflow)
                }
            }
        }
    }
}

/// Stores `annotation` on the task numbered `display_id`.
pub fn attach_annotation(
    mut model: CollaborationModel,
    display_id: &str,
    annotation: CbAnnotation,
) -> Result<CollaborationModel, KpiError> {
    let (pool, task) = model
        .task_by_display_id_mut(display_id)
        .ok_or_else(|| KpiError::UnknownTask(display_id.to_string()))?;
    if annotation.actor != pool {
        return Err(KpiError::ActorMismatch {
            task: display_id.to_string(),
            actor: annotation.actor,
            pool: pool.to_string(),
        });
    }
    task.annotation = Some(annotation);
    Ok(model)
}

/// A what-if replacement for one KPI's current and/or target formula.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct KpiOverride {
    pub task_display_id: String,
    pub kpi_name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub current: Option<FormulaExpr>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<FormulaExpr>,
}

/// Returns a copy of `model` with the overrides applied; the input is untouched.
pub fn apply_overrides(
    model: &CollaborationModel,
    overrides: &[KpiOverride],
) -> Result<CollaborationModel, KpiError> {
    let mut out = model.clone();
    for o in overrides {
        let (_, task) = out
            .task_by_display_id_mut(&o.task_display_id)
            .ok_or_else(|| KpiError::UnknownTask(o.task_display_id.clone()))?;
        let annotation = task
            .annotation
            .as_mut()
            .filter(|a| a.has_kpi() && a.kpi == o.kpi_name)
            .ok_or_else(|| KpiError::UnknownKpi {
                task: o.task_display_id.clone(),
                kpi: o.kpi_name.clone(),
            })?;
        if let Some(c) = &o.current {
            annotation.current = Some(c.clone());
        }
        if let Some(t) = &o.target {
            annotation.target = Some(t.clone());
        }
    }
    Ok(out)
}
