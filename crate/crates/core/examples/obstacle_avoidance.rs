//! Two-lane platoon forming a single lane while a stopped car blocks the
//! left lane ahead.
//!
//!     cargo run --release --example obstacle_avoidance

use platoon::planner::{plan_maneuver, references, settling_step};
use platoon::scenario::Scenario;

fn main() -> platoon::Result<()> {
    let sc = Scenario::load(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/scenario_b.json"))?;
    let req = sc.request(&sc.pairs[0])?;
    let out = plan_maneuver(&req, &sc.planner)?;
    let traj = &out.trajectory;
    let audit = traj.audit(sc.planner.d_min)?;
    println!("planned {} steps in {:.2} s", traj.steps(), out.report.seconds);
    println!(
        "min vehicle distance {:.4} m, min obstacle clearance {:.4} m",
        audit.min_vehicle_distance, audit.min_obstacle_distance
    );
    let refs = references(&req, &sc.planner)?;
    match settling_step(traj, &refs, 0.1, 25) {
        Some(k) => println!("single lane held from t = {:.1} s", k as f64 * traj.dt),
        None => println!("no steady state within the horizon"),
    }
    for t in (0..=traj.steps()).step_by(20) {
        let row: Vec<String> = traj.vehicles.iter().map(|v| format!("({:6.2}, {:4.2})", v.states[t].x, v.states[t].y)).collect();
        println!("t = {:4.1} s  {}", t as f64 * traj.dt, row.join("  "));
    }
    Ok(())
}
