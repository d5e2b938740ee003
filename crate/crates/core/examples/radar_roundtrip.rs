//! Builds a small radar in code, writes it as BMR-JSON, and reads it back.
//! A second pass breaks an invariant to show the validation findings.
//!
//! Run with `cargo run --example radar_roundtrip`.

use cbtracker::bmr::{
    parse_bmr, serialize_bmr, validate_bmr, ActorRole, BusinessModelRadar, CoCreationActivity,
    CoCreationActor, ValueProposition,
};

fn actor(name: &str, role: ActorRole, activity: CoCreationActivity) -> CoCreationActor {
    CoCreationActor {
        name: name.into(),
        role,
        value_propositions: vec![ValueProposition {
            name: format!("{name} offer"),
            activities: vec![activity],
        }],
        actor_costs: Vec::new(),
        actor_benefits: Vec::new(),
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let radar = BusinessModelRadar {
        solution: "bike sharing".into(),
        actors: vec![
            actor(
                "Rider",
                ActorRole::User,
                CoCreationActivity::new("ride bike").with_costs(["pay rental fee"]),
            ),
            actor(
                "Operator",
                ActorRole::Focal,
                CoCreationActivity::new("rent bikes")
                    .with_costs(["maintain fleet"])
                    .with_benefits(["collect rental fees"]),
            ),
            actor(
                "City",
                ActorRole::Partner,
                CoCreationActivity::new("grant docking space").with_benefits(["reduce traffic"]),
            ),
        ],
    };

    let text = serialize_bmr(&radar);
    println!("{text}");
    let back = parse_bmr(&text)?;
    assert_eq!(back, radar);
    println!(
        "round trip ok: {} actors, {} elements",
        back.actors.len(),
        back.element_count()
    );

    let mut broken = radar.clone();
    broken.actors[2].role = ActorRole::Focal;
    broken.actors[1].value_propositions[0].activities[0]
        .costs
        .push("maintain fleet".into());
    let report = validate_bmr(&broken);
    println!("\n{} findings on the broken copy:", report.len());
    println!("{report}");
    match parse_bmr(&serialize_bmr(&broken)) {
        Ok(_) => println!("unexpectedly accepted"),
        Err(e) => println!("parse_bmr rejects it: {e}"),
    }
    Ok(())
}
