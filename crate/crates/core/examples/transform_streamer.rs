//! Transforms the ad-supported music streaming radar into BPMN XML.
//!
//! Run with `cargo run --example transform_streamer`. Pass `--no-hints` to see
//! the default generated order without reordering or message flows.

use cbtracker::bmr::parse_bmr;
use cbtracker::bpmn::serialize_bpmn;
use cbtracker::transform::{parse_hints, transform_with_warnings, WiringHints};

const RADAR: &str = include_str!("../../../fixtures/streamer.bmr.json");
const HINTS: &str = include_str!("../../../fixtures/streamer.hints.json");

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let radar = parse_bmr(RADAR)?;
    let hints = if std::env::args().any(|a| a == "--no-hints") {
        WiringHints::default()
    } else {
        parse_hints(HINTS)?
    };
    let result = transform_with_warnings(&radar, &hints)?;
    for warning in &result.warnings {
        eprintln!("{warning}");
    }

    for pool in &result.model.pools {
        eprintln!("{} ({} tasks)", pool.name, pool.tasks().count());
        for task in pool.tasks() {
            eprintln!(
                "  {:>4}  {}",
                task.display_id.as_deref().unwrap_or("-"),
                task.name
            );
        }
    }
    eprintln!("{} message flows", result.model.message_flows.len());

    print!("{}", serialize_bpmn(&result.model)?);
    Ok(())
}
