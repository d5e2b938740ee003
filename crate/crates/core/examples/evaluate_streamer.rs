//! Evaluates the annotated streaming model: prints the dependency plan and
//! every KPI value, then shows what a cyclic model reports.
//!
//! Run with `cargo run --example evaluate_streamer`.

use cbtracker::bpmn::parse_bpmn;
use cbtracker::kpi::{evaluate_with_plan, format_formula, resolve_dependencies, Column, KpiError};

const ANNOTATED: &str = include_str!("../../../fixtures/streamer.annotated.bpmn");
const CYCLIC: &str = include_str!("../../../fixtures/cyclic.bpmn");

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = parse_bpmn(ANNOTATED)?;
    let plan = resolve_dependencies(&model)?;

    println!("plan:");
    for (i, key) in plan.order.iter().enumerate() {
        let deps = &plan.dependencies[key];
        if deps.is_empty() {
            println!("  {}. {key}", i + 1);
        } else {
            let deps: Vec<String> = deps.iter().map(ToString::to_string).collect();
            println!("  {}. {key} <- {}", i + 1, deps.join(", "));
        }
    }

    let result = evaluate_with_plan(&model, &plan)?;
    println!(
        "\n{:<6} {:<28} {:>10} {:>10}  current formula",
        "task", "kpi", "current", "target"
    );
    for v in &result.values {
        let (_, task) = model.task_by_display_id(&v.task_display_id).unwrap();
        let formula = task
            .annotation
            .as_ref()
            .and_then(|a| a.formula(Column::Current))
            .map(format_formula)
            .unwrap_or_default();
        let show = |d: Option<rust_decimal::Decimal>| d.map_or("-".into(), |d| d.to_string());
        println!(
            "{:<6} {:<28} {:>10} {:>10}  {formula}",
            v.task_display_id,
            v.kpi,
            show(v.current_value),
            show(v.target_value)
        );
    }

    println!("\ncyclic.bpmn:");
    match resolve_dependencies(&parse_bpmn(CYCLIC)?) {
        Err(KpiError::Cycle(cycle)) => {
            println!("  {cycle}");
            for member in &cycle.members {
                println!("  cycle member {member}");
            }
        }
        other => println!("  unexpected: {other:?}"),
    }
    Ok(())
}
