//! Builds a maneuver table over a grid of lane-switch fractions, writes it
//! to JSON and reads it back.
//!
//!     cargo run --release --example lookup_table [out.json]

use platoon::lookup::{build_table, config_id, ManeuverTable};
use platoon::scenario::Scenario;

fn main() -> platoon::Result<()> {
    let sc = Scenario::load(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/scenario_c.json"))?;
    let table = build_table(&sc.pair_requests()?, &sc.planner, &sc.build_options())?;
    for (id, rec) in &table.configs {
        println!("config {id} = {:?}", rec.names);
    }
    for e in &table.entries {
        println!("{} -> {}", e.initial, e.target);
        for m in &e.maneuvers {
            println!("  #{} rho {:.2}: {} steps", m.index, m.rho, m.trajectory.steps());
        }
        for w in &e.warnings {
            println!("  warning: {w}");
        }
    }
    let path = std::env::args().nth(1).unwrap_or_else(|| std::env::temp_dir().join("maneuvers.json").display().to_string());
    table.save(&path)?;
    let back = ManeuverTable::load(&path)?;
    assert_eq!(back, table);
    let split = config_id(&sc.configurations["split"]);
    println!("wrote {path}; family split -> merged has {} entries (split id {split})", back.query("split", "merged")?.len());
    Ok(())
}
