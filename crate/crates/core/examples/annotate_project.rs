//! Loads the streaming project from its radar, wiring hints, and KPI
//! annotations, then writes the annotated BPMN and lists the annotations
//! read back out of it.
//!
//! Run with `cargo run --example annotate_project > streamer.annotated.bpmn`.

use std::path::PathBuf;

use cbtracker::bpmn::serialize_bpmn;
use cbtracker::project::{collect_annotations, serialize_annotations, ProjectBundle};

fn fixture(name: &str) -> Option<PathBuf> {
    Some(
        PathBuf::from(env!("CARGO_MANIFEST_DIR"))
            .join("../../fixtures")
            .join(name),
    )
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let bundle = ProjectBundle {
        radar: fixture("streamer.bmr.json"),
        hints: fixture("streamer.hints.json"),
        annotations: fixture("streamer.annotations.json"),
        bpmn: None,
    };
    let (model, findings) = bundle.load()?.model()?;
    for finding in &findings {
        eprintln!("{finding}");
    }
    print!("{}", serialize_bpmn(&model)?);

    let entries = collect_annotations(&model);
    eprintln!(
        "{} tasks, {} with a KPI",
        model.task_count(),
        entries.iter().filter(|e| e.annotation.has_kpi()).count()
    );
    eprintln!("{}", serialize_annotations(&entries));
    Ok(())
}
