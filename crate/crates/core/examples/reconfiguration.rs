//! Three-lane platoon merging into a single lane (4 vehicles, 20 m/s).
//!
//!     cargo run --release --example reconfiguration

use platoon::planner::{plan_maneuver, references, settling_step};
use platoon::scenario::Scenario;

fn main() -> platoon::Result<()> {
    let sc = Scenario::load(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/scenario_a.json"))?;
    let req = sc.request(&sc.pairs[0])?;
    let out = plan_maneuver(&req, &sc.planner)?;
    let traj = &out.trajectory;
    let audit = traj.audit(sc.planner.d_min)?;
    let refs = references(&req, &sc.planner)?;
    println!(
        "{} steps, {} solves ({} retries, {} iterations) in {:.2} s",
        traj.steps(),
        out.report.solves,
        out.report.cold_retries,
        out.report.total_iterations,
        out.report.seconds
    );
    println!("min pairwise distance {:.4} m, {} violations", audit.min_vehicle_distance, audit.violations.len());
    if let Some(k) = settling_step(traj, &refs, 0.1, 25) {
        println!("steady state from t = {:.1} s", k as f64 * traj.dt);
    }
    let mut last: Vec<_> = traj.vehicles.iter().map(|v| (v.vehicle_id, *v.states.last().unwrap())).collect();
    last.sort_by(|a, b| b.1.x.total_cmp(&a.1.x));
    for (id, z) in &last {
        println!("vehicle {id}: x {:8.2}  y {:.3} (lane {})  v {:.2}", z.x, z.y, sc.road.lane_of(z.y), z.v);
    }
    Ok(())
}
