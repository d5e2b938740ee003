//! Cost-benefit annotations on tasks and the KPI formulas they carry.

mod eval;
mod formula;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use eval::{
    apply_overrides, attach_annotation, evaluate, evaluate_with_plan, resolve_dependencies, Column,
    CycleError, EvaluatedKpi, EvaluationPlan, EvaluationResult, KpiError, KpiKey, KpiOverride,
    MissingKind,
};
pub use formula::{format_formula, parse_formula, BinaryOp, FormulaError, FormulaExpr, KpiRef};

/// Which radar element a task came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskType {
    Cost,
    Benefit,
    CoCreationActivity,
}

impl TaskType {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskType::Cost => "cost",
            TaskType::Benefit => "benefit",
            TaskType::CoCreationActivity => "co-creation-activity",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "cost" => Some(TaskType::Cost),
            "benefit" => Some(TaskType::Benefit),
            "co-creation-activity" => Some(TaskType::CoCreationActivity),
            _ => None,
        }
    }

    /// Cost and benefit KPIs are money and feed the overview totals.
    pub fn is_monetary(self) -> bool {
        matches!(self, TaskType::Cost | TaskType::Benefit)
    }
}

impl fmt::Display for TaskType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The Actor/Type/Goal/KPI/Current/Target record attached to a task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CbAnnotation {
    pub actor: String,
    #[serde(rename = "type")]
    pub task_type: TaskType,
    #[serde(default)]
    pub goal: String,
    #[serde(default)]
    pub kpi: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub current: Option<FormulaExpr>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<FormulaExpr>,
}

impl CbAnnotation {
    pub fn new(actor: impl Into<String>, task_type: TaskType) -> Self {
        CbAnnotation {
            actor: actor.into(),
            task_type,
            goal: String::new(),
            kpi: String::new(),
            current: None,
            target: None,
        }
    }

    pub fn with_goal(mut self, goal: impl Into<String>) -> Self {
        self.goal = goal.into();
        self
    }

    pub fn with_kpi(
        mut self,
        kpi: impl Into<String>,
        current: Option<FormulaExpr>,
        target: Option<FormulaExpr>,
    ) -> Self {
        self.kpi = kpi.into();
        self.current = current;
        self.target = target;
        self
    }

    pub fn has_kpi(&self) -> bool {
        !self.kpi.trim().is_empty()
    }

    pub fn formula(&self, column: Column) -> Option<&FormulaExpr> {
        match column {
            Column::Current => self.current.as_ref(),
            Column::Target => self.target.as_ref(),
        }
    }
}
