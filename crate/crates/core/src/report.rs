//! Per-actor cost-benefit overviews built from evaluated KPIs.
//!
//! Only cost and benefit tasks feed the totals. Co-creation activity KPIs
//! are counts (streamed songs, streamed ads) that other formulas read; they
//! still appear as line items.

use std::fmt::Write as _;

use rust_decimal::{Decimal, RoundingStrategy};
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::bmr::ActorRole;
use crate::bpmn::CollaborationModel;
use crate::kpi::{EvaluationResult, KpiKey, TaskType};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReportError {
    #[error("unknown actor {0:?}")]
    UnknownActor(String),
    #[error("model has not been evaluated: {0} has no result")]
    NotEvaluated(KpiKey),
    #[error("evaluation result does not belong to this model: {0} is not a KPI of it")]
    StaleResult(KpiKey),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineItem {
    pub task_display_id: String,
    pub task_name: String,
    pub task_type: TaskType,
    pub goal: String,
    pub kpi: String,
    pub current: Option<Decimal>,
    pub target: Option<Decimal>,
}

/// Subtotal of monetary line items sharing a goal label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoalSubtotal {
    pub goal: String,
    pub current_costs: Decimal,
    pub current_benefits: Decimal,
    pub target_costs: Decimal,
    pub target_benefits: Decimal,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CostBenefitOverview {
    pub actor: String,
    pub role: Option<ActorRole>,
    pub current_costs: Decimal,
    pub current_benefits: Decimal,
    pub current_net: Decimal,
    pub target_costs: Decimal,
    pub target_benefits: Decimal,
    pub target_net: Decimal,
    pub line_items: Vec<LineItem>,
    pub goal_subtotals: Vec<GoalSubtotal>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportSummary {
    pub focal_actor: String,
    pub focal_current_net: Decimal,
    pub focal_target_net: Decimal,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Report {
    pub overviews: Vec<CostBenefitOverview>,
    pub summary: Option<ReportSummary>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Json,
    Csv,
    TextTable,
}

impl std::str::FromStr for ExportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(ExportFormat::Json),
            "csv" => Ok(ExportFormat::Csv),
            "text-table" | "text" => Ok(ExportFormat::TextTable),
            other => Err(format!(
                "unknown format {other:?} (expected json, csv, or text-table)"
            )),
        }
    }
}

/// Rounds to cents and always shows two fractional digits.
pub fn format_money(value: Decimal) -> String {
    let rounded = value.round_dp_with_strategy(2, RoundingStrategy::MidpointAwayFromZero);
    format!("{rounded:.2}")
}

/// Counts print without trailing zeros.
pub fn format_count(value: Decimal) -> String {
    value.normalize().to_string()
}

fn format_value(task_type: TaskType, value: Option<Decimal>) -> Option<String> {
    value.map(|v| {
        if task_type.is_monetary() {
            format_money(v)
        } else {
            format_count(v)
        }
    })
}

/// Checks the result covers exactly the KPIs of the model.
fn check_evaluated(
    result: &EvaluationResult,
    model: &CollaborationModel,
) -> Result<(), ReportError> {
    let mut expected = 0;
    for (_, task) in model.tasks() {
        let (Some(display_id), Some(annotation)) = (&task.display_id, &task.annotation) else {
            continue;
        };
        if !annotation.has_kpi() {
            continue;
        }
        expected += 1;
        if result.get(display_id, &annotation.kpi).is_none() {
            return Err(ReportError::NotEvaluated(KpiKey::new(
                display_id.clone(),
                annotation.kpi.clone(),
            )));
        }
    }
    if result.values.len() != expected {
        let stray = result
            .values
            .iter()
            .find(|v| {
                !model.tasks().any(|(_, t)| {
                    t.display_id.as_deref() == Some(v.task_display_id.as_str())
                        && t.annotation.as_ref().is_some_and(|a| a.kpi == v.kpi)
                })
            })
            .map(|v| KpiKey::new(v.task_display_id.clone(), v.kpi.clone()))
            .unwrap_or_else(|| KpiKey::new("?", "?"));
        return Err(ReportError::StaleResult(stray));
    }
    Ok(())
}

pub fn actor_overview(
    result: &EvaluationResult,
    model: &CollaborationModel,
    actor: &str,
) -> Result<CostBenefitOverview, ReportError> {
    check_evaluated(result, model)?;
    let pool = model
        .pool(actor)
        .ok_or_else(|| ReportError::UnknownActor(actor.to_string()))?;
    let mut overview = CostBenefitOverview {
        actor: pool.name.clone(),
        role: pool.role,
        current_costs: Decimal::ZERO,
        current_benefits: Decimal::ZERO,
        current_net: Decimal::ZERO,
        target_costs: Decimal::ZERO,
        target_benefits: Decimal::ZERO,
        target_net: Decimal::ZERO,
        line_items: Vec::new(),
        goal_subtotals: Vec::new(),
    };

    for task in pool.tasks() {
        let (Some(display_id), Some(annotation)) = (&task.display_id, &task.annotation) else {
            continue;
        };
        let Some(value) = result.get(display_id, &annotation.kpi) else {
            continue;
        };
        let item = LineItem {
            task_display_id: display_id.clone(),
            task_name: task.name.clone(),
            task_type: annotation.task_type,
            goal: annotation.goal.clone(),
            kpi: annotation.kpi.clone(),
            current: value.current_value,
            target: value.target_value,
        };
        let current = item.current.unwrap_or_default();
        let target = item.target.unwrap_or_default();
        let subtotal = match item.task_type {
            TaskType::CoCreationActivity => None,
            _ => Some(goal_subtotal(&mut overview.goal_subtotals, &item.goal)),
        };
        match item.task_type {
            TaskType::Cost => {
                overview.current_costs += current;
                overview.target_costs += target;
                if let Some(s) = subtotal {
                    s.current_costs += current;
                    s.target_costs += target;
                }
            }
            TaskType::Benefit => {
                overview.current_benefits += current;
                overview.target_benefits += target;
                if let Some(s) = subtotal {
                    s.current_benefits += current;
                    s.target_benefits += target;
                }
            }
            TaskType::CoCreationActivity => {}
        }
        overview.line_items.push(item);
    }
    overview.current_net = overview.current_benefits - overview.current_costs;
    overview.target_net = overview.target_benefits - overview.target_costs;
    Ok(overview)
}

fn goal_subtotal<'a>(subtotals: &'a mut Vec<GoalSubtotal>, goal: &str) -> &'a mut GoalSubtotal {
    let index = match subtotals.iter().position(|s| s.goal == goal) {
        Some(i) => i,
        None => {
            subtotals.push(GoalSubtotal {
                goal: goal.to_string(),
                current_costs: Decimal::ZERO,
                current_benefits: Decimal::ZERO,
                target_costs: Decimal::ZERO,
                target_benefits: Decimal::ZERO,
            });
            subtotals.len() - 1
        }
    };
    &mut subtotals[index]
}

/// One overview per pool in pool order, plus the focal actor's nets.
pub fn full_report(
    result: &EvaluationResult,
    model: &CollaborationModel,
) -> Result<Report, ReportError> {
    check_evaluated(result, model)?;
    let overviews = model
        .pools
        .iter()
        .map(|p| actor_overview(result, model, &p.name))
        .collect::<Result<Vec<_>, _>>()?;
    let summary = overviews
        .iter()
        .find(|o| o.role == Some(ActorRole::Focal))
        .map(|o| ReportSummary {
            focal_actor: o.actor.clone(),
            focal_current_net: o.current_net,
            focal_target_net: o.target_net,
        });
    Ok(Report { overviews, summary })
}

impl Serialize for LineItem {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("LineItem", 7)?;
        s.serialize_field("taskDisplayId", &self.task_display_id)?;
        s.serialize_field("taskName", &self.task_name)?;
        s.serialize_field("type", self.task_type.as_str())?;
        s.serialize_field("goal", &self.goal)?;
        s.serialize_field("kpi", &self.kpi)?;
        s.serialize_field("current", &format_value(self.task_type, self.current))?;
        s.serialize_field("target", &format_value(self.task_type, self.target))?;
        s.end()
    }
}

impl Serialize for GoalSubtotal {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("GoalSubtotal", 5)?;
        s.serialize_field("goal", &self.goal)?;
        s.serialize_field("currentCosts", &format_money(self.current_costs))?;
        s.serialize_field("currentBenefits", &format_money(self.current_benefits))?;
        s.serialize_field("targetCosts", &format_money(self.target_costs))?;
        s.serialize_field("targetBenefits", &format_money(self.target_benefits))?;
        s.end()
    }
}

impl Serialize for CostBenefitOverview {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("CostBenefitOverview", 10)?;
        s.serialize_field("actor", &self.actor)?;
        s.serialize_field("role", &self.role)?;
        s.serialize_field("currentCosts", &format_money(self.current_costs))?;
        s.serialize_field("currentBenefits", &format_money(self.current_benefits))?;
        s.serialize_field("currentNet", &format_money(self.current_net))?;
        s.serialize_field("targetCosts", &format_money(self.target_costs))?;
        s.serialize_field("targetBenefits", &format_money(self.target_benefits))?;
        s.serialize_field("targetNet", &format_money(self.target_net))?;
        s.serialize_field("lineItems", &self.line_items)?;
        // experimental grouping by goal label
        s.serialize_field("goalSubtotals", &self.goal_subtotals)?;
        s.end()
    }
}

impl Serialize for ReportSummary {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("ReportSummary", 3)?;
        s.serialize_field("focalActor", &self.focal_actor)?;
        s.serialize_field("focalCurrentNet", &format_money(self.focal_current_net))?;
        s.serialize_field("focalTargetNet", &format_money(self.focal_target_net))?;
        s.end()
    }
}

impl Serialize for Report {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("Report", 2)?;
        s.serialize_field("overviews", &self.overviews)?;
        s.serialize_field("summary", &self.summary)?;
        s.end()
    }
}

pub const CSV_COLUMNS: [&str; 8] = [
    "actor",
    "taskDisplayId",
    "taskName",
    "type",
    "goal",
    "kpi",
    "current",
    "target",
];

pub fn export_report(report: &Report, format: ExportFormat) -> String {
    match format {
        ExportFormat::Json => {
            let mut out = serde_json::to_string_pretty(report).expect("report serializes to JSON");
            out.push('\n');
            out
        }
        ExportFormat::Csv => export_csv(report),
        ExportFormat::TextTable => export_table(report),
    }
}

fn export_csv(report: &Report) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(CSV_COLUMNS).expect("in-memory write");
    for overview in &report.overviews {
        for item in &overview.line_items {
            writer
                .write_record([
                    overview.actor.as_str(),
                    &item.task_display_id,
                    &item.task_name,
                    item.task_type.as_str(),
                    &item.goal,
                    &item.kpi,
                    &format_value(item.task_type, item.current).unwrap_or_default(),
                    &format_value(item.task_type, item.target).unwrap_or_default(),
                ])
                .expect("in-memory write");
        }
    }
    let bytes = writer.into_inner().expect("in-memory flush");
    String::from_utf8(bytes).expect("CSV of UTF-8 fields is UTF-8")
}

fn export_table(report: &Report) -> String {
    if report.overviews.is_empty() {
        return "(no actors)\n".to_string();
    }
    let headers = ["ID", "Task", "Type", "Goal", "KPI", "Current", "Target"];
    let mut out = String::new();
    for (n, overview) in report.overviews.iter().enumerate() {
        if n > 0 {
            out.push('\n');
        }
        let role = overview.role.map(|r| format!(" ({r})")).unwrap_or_default();
        let _ = writeln!(out, "Actor: {}{role}", overview.actor);
        let rows: Vec<[String; 7]> = overview
            .line_items
            .iter()
            .map(|i| {
                [
                    i.task_display_id.clone(),
                    i.task_name.clone(),
                    i.task_type.to_string(),
                    i.goal.clone(),
                    i.kpi.clone(),
                    format_value(i.task_type, i.current).unwrap_or_else(|| "-".into()),
                    format_value(i.task_type, i.target).unwrap_or_else(|| "-".into()),
                ]
            })
            .collect();
        let mut widths = headers.map(|h| h.chars().count());
        for row in &rows {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.chars().count());
            }
        }
        if rows.is_empty() {
            out.push_str("  (no annotated KPIs)\n");
        } else {
            write_row(&mut out, &headers.map(String::from), &widths);
            for row in &rows {
                write_row(&mut out, row, &widths);
            }
        }
        let totals = [
            ("Costs", overview.current_costs, overview.target_costs),
            (
                "Benefits",
                overview.current_benefits,
                overview.target_benefits,
            ),
            ("Net", overview.current_net, overview.target_net),
        ];
        let value_width = totals
            .iter()
            .flat_map(|(_, c, t)| [format_money(*c).len(), format_money(*t).len()])
            .max()
            .unwrap_or(0)
            .max("Current".len());
        let _ = writeln!(
            out,
            "  {:<9} {:>value_width$} {:>value_width$}",
            "", "Current", "Target"
        );
        for (label, current, target) in totals {
            let _ = writeln!(
                out,
                "  {:<9} {:>value_width$} {:>value_width$}",
                label,
                format_money(current),
                format_money(target)
            );
        }
    }
    if let Some(summary) = &report.summary {
        let _ = writeln!(
            out,
            "\nFocal organization {}: current net {}, target net {}",
            summary.focal_actor,
            format_money(summary.focal_current_net),
            format_money(summary.focal_target_net)
        );
    }
    out
}

fn write_row(out: &mut String, cells: &[String; 7], widths: &[usize; 7]) {
    out.push(' ');
    for (i, (cell, w)) in cells.iter().zip(widths).enumerate() {
        // numeric columns right-aligned
        if i >= 5 {
            let _ = write!(out, " {cell:>w$}");
        } else {
            let _ = write!(out, " {cell:<w$}");
        }
    }
    let trimmed = out.trim_end_matches(' ').len();
    out.truncate(trimmed);
    out.push('\n');
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bpmn::{FlowNode, Pool};
    use crate::kpi::{evaluate, parse_formula, CbAnnotation};

    fn dec(s: &str) -> Decimal {
        Decimal::from_str_exact(s).unwrap()
    }

    fn model() -> CollaborationModel {
        let mut pool = Pool::new("Pool_1", "Shop");
        pool.role = Some(ActorRole::Focal);
        let specs = [
            (
                "1.1",
                "sell",
                TaskType::CoCreationActivity,
                "Sales",
                "7",
                "10",
            ),
            (
                "1.2",
                "buy stock",
                TaskType::Cost,
                "Stock",
                "(1.1,Sales) * 2.5",
                "20",
            ),
            (
                "1.3",
                "cash in",
                TaskType::Benefit,
                "Revenue",
                "(1.1,Sales) * 4",
                "(1.1,Sales) * 4",
            ),
        ];
        for (id, name, kind, kpi, current, target) in specs {
            let mut t = FlowNode::task(format!("t{id}"), name);
            t.display_id = Some(id.into());
            t.annotation = Some(
                CbAnnotation::new("Shop", kind)
                    .with_goal("Profitability")
                    .with_kpi(
                        kpi,
                        Some(parse_formula(current).unwrap()),
                        Some(parse_formula(target).unwrap()),
                    ),
            );
            pool.nodes.push(t);
        }
        let mut m = CollaborationModel::new("c");
        m.pools.push(pool);
        let mut other = Pool::new("Pool_2", "Bank");
        other.nodes.push(FlowNode::task("b", "lend"));
        m.pools.push(other);
        m
    }

    #[test]
    fn totals_skip_activity_counts() {
        let m = model();
        let r = evaluate(&m).unwrap();
        let o = actor_overview(&r, &m, "Shop").unwrap();
        assert_eq!(o.current_costs, dec("17.5"));
        assert_eq!(o.current_benefits, dec("28"));
        assert_eq!(o.current_net, dec("10.5"));
        assert_eq!(o.target_costs, dec("20"));
        assert_eq!(o.target_benefits, dec("40"));
        assert_eq!(o.target_net, dec("20"));
        assert_eq!(o.line_items.len(), 3);
        assert_eq!(o.goal_subtotals.len(), 1);
        assert_eq!(o.goal_subtotals[0].current_costs, dec("17.5"));
    }

    #[test]
    fn actor_without_annotations_has_zero_totals() {
        let m = model();
        let r = evaluate(&m).unwrap();
        let o = actor_overview(&r, &m, "Bank").unwrap();
        assert_eq!(o.current_net, Decimal::ZERO);
        assert!(o.line_items.is_empty());
        assert!(matches!(
            actor_overview(&r, &m, "Nobody"),
            Err(ReportError::UnknownActor(_))
        ));
    }

    #[test]
    fn unevaluated_model_is_a_precondition_error() {
        let m = model();
        assert!(matches!(
            full_report(&EvaluationResult::default(), &m),
            Err(ReportError::NotEvaluated(_))
        ));
    }

    #[test]
    fn exports_are_deterministic() {
        let m = model();
        let report = full_report(&evaluate(&m).unwrap(), &m).unwrap();
        for format in [
            ExportFormat::Json,
            ExportFormat::Csv,
            ExportFormat::TextTable,
        ] {
            assert_eq!(
                export_report(&report, format),
                export_report(&report, format)
            );
        }
        let json = export_report(&report, ExportFormat::Json);
        assert!(json.contains("\"currentNet\": \"10.50\""));
        assert!(json.contains("\"current\": \"7\""));
        let csv = export_report(&report, ExportFormat::Csv);
        assert_eq!(csv.lines().next().unwrap(), CSV_COLUMNS.join(","));
        assert!(csv.contains("Shop,1.2,buy stock,cost,Profitability,Stock,17.50,20.00"));
        let table = export_report(&report, ExportFormat::TextTable);
        assert!(table.contains("Actor: Shop (focal)"));
        assert!(table.contains("Net"));
    }

    #[test]
    fn empty_report_exports() {
        let empty = Report::default();
        let json: serde_json::Value =
            serde_json::from_str(&export_report(&empty, ExportFormat::Json)).unwrap();
        assert_eq!(json["overviews"], serde_json::json!([]));
        assert_eq!(export_report(&empty, ExportFormat::Csv).lines().count(), 1);
        assert_eq!(
            export_report(&empty, ExportFormat::TextTable),
            "(no actors)\n"
        );
    }

    #[test]
    fn money_formatting() {
        assert_eq!(format_money(dec("1444.5")), "1444.50");
        assert_eq!(format_money(dec("0.005")), "0.01");
        assert_eq!(format_money(dec("-3")), "-3.00");
        assert_eq!(format_count(dec("3210.00")), "3210");
    }
}
