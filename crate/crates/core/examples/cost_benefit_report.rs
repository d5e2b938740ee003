//! Prints the cost-benefit overview of every actor in the annotated
//! streaming model.
//!
//! Run with `cargo run --example cost_benefit_report -- [json|csv|text-table] [actor]`.

use cbtracker::bpmn::parse_bpmn;
use cbtracker::kpi::evaluate;
use cbtracker::report::{actor_overview, export_report, full_report, ExportFormat, Report};

const ANNOTATED: &str = include_str!("../../../fixtures/streamer.annotated.bpmn");

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let format: ExportFormat = args.next().as_deref().unwrap_or("text-table").parse()?;
    let actor = args.next();

    let model = parse_bpmn(ANNOTATED)?;
    let result = evaluate(&model)?;
    let report = match actor {
        Some(name) => Report {
            overviews: vec![actor_overview(&result, &model, &name)?],
            summary: None,
        },
        None => full_report(&result, &model)?,
    };
    print!("{}", export_report(&report, format));
    Ok(())
}
