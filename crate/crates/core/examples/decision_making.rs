//! Screens the stored merge maneuvers against announced traffic plans.
//!
//!     cargo run --release --example decision_making

use platoon::decision::{decide, load_traffic, maneuver_conflicts, Decision};
use platoon::lookup::build_table;
use platoon::scenario::Scenario;

fn main() -> platoon::Result<()> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures");
    let sc = Scenario::load(format!("{dir}/scenario_c.json"))?;
    let table = build_table(&sc.pair_requests()?, &sc.planner, &sc.build_options())?;
    for name in ["traffic_merge.json", "traffic_blocked.json"] {
        let traffic = load_traffic(format!("{dir}/{name}"))?;
        println!("{name}:");
        for m in table.query("split", "merged")? {
            let hit = maneuver_conflicts(&m.trajectory, &traffic, m.trajectory.d_min)?;
            println!("  #{} rho {:.2}: {}", m.index, m.rho, if hit { "conflict" } else { "clear" });
        }
        match decide(&table, "split", "merged", &traffic, None)? {
            Decision::Selected { index, rho, .. } => println!("  -> execute #{index} (rho {rho})"),
            Decision::Infeasible => println!("  -> infeasible, keep the current configuration"),
        }
    }
    Ok(())
}
