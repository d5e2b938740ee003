//! Parses KPI formulas, prints their canonical form and references, and
//! evaluates each one in a small model where tasks 1.2 and 1.5 carry a
//! `Streaming count`.
//!
//! Run with `cargo run --example kpi_formulas`, or pass formulas as arguments:
//! `cargo run --example kpi_formulas -- "(1.5,Streaming count)*0,45" "2 * (3"`.

use cbtracker::bpmn::{CollaborationModel, FlowNode, Pool};
use cbtracker::kpi::{
    evaluate, format_formula, parse_formula, CbAnnotation, FormulaExpr, TaskType,
};
use rust_decimal::Decimal;

const DEFAULTS: &[&str] = &[
    "(1.5,Streaming count)*0,45",
    "(1.2, Streaming count)*0.5",
    "((1.2,Streaming count) - (1.5,Streaming count)) / 2",
    "10 - 4 - 3",
    "(1.5,Streaming count) * ",
    "(0,5+1)",
];

fn model_with(formula: FormulaExpr) -> CollaborationModel {
    let mut pool = Pool::new("Pool_1", "Streamer");
    let tasks = [
        (
            "1.2",
            "Streaming count",
            FormulaExpr::literal(Decimal::from(12342)),
        ),
        (
            "1.5",
            "Streaming count",
            FormulaExpr::literal(Decimal::from(3210)),
        ),
        ("9.1", "Result", formula),
    ];
    for (i, (id, kpi, expr)) in tasks.into_iter().enumerate() {
        let mut task = FlowNode::task(format!("Task_{i}"), id);
        task.display_id = Some(id.into());
        task.annotation =
            Some(CbAnnotation::new("Streamer", TaskType::Cost).with_kpi(kpi, Some(expr), None));
        pool.nodes.push(task);
    }
    let mut model = CollaborationModel::new("Collaboration_1");
    model.pools.push(pool);
    model
}

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let inputs: Vec<&str> = if args.is_empty() {
        DEFAULTS.to_vec()
    } else {
        args.iter().map(String::as_str).collect()
    };

    for text in inputs {
        println!("{text:?}");
        let expr = match parse_formula(text) {
            Ok(expr) => expr,
            Err(e) => {
                println!("  error: {e}\n");
                continue;
            }
        };
        println!("  canonical  {}", format_formula(&expr));
        for r in expr.refs() {
            println!("  references ({}, {:?})", r.task, r.kpi);
        }
        match evaluate(&model_with(expr)) {
            Ok(result) => {
                let value = result.get("9.1", "Result").and_then(|v| v.current_value);
                println!(
                    "  value      {}",
                    value.map_or("-".into(), |v| v.to_string())
                );
            }
            Err(e) => println!("  not evaluated: {e}"),
        }
        println!();
    }
}
