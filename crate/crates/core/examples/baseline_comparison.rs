//! Optimization-based merge against scripted motion primitives from the
//! same start.
//!
//!     cargo run --release --example baseline_comparison

use platoon::baseline::{run_schedule, PrimitiveSchedule};
use platoon::planner::{longitudinal_spread, min_speed, plan_maneuver};
use platoon::scenario::Scenario;

fn main() -> platoon::Result<()> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures");
    let sc = Scenario::load(format!("{dir}/scenario_c.json"))?;
    let opt = plan_maneuver(&sc.request(&sc.pairs[0])?, &sc.planner)?.trajectory;
    let schedule = PrimitiveSchedule::load(format!("{dir}/schedule_merge.json"))?;
    let base = run_schedule(&schedule, &sc.fleet, &sc.road, &sc.baseline)?;
    let opt_audit = opt.audit(sc.planner.d_min)?;
    println!("{:<14} {:>12} {:>12} {:>14}", "", "spread (m)", "min v (m/s)", "min dist (m)");
    println!(
        "{:<14} {:>12.2} {:>12.2} {:>14.3}",
        "optimization",
        longitudinal_spread(&opt.vehicles),
        min_speed(&opt.vehicles),
        opt_audit.min_vehicle_distance
    );
    println!(
        "{:<14} {:>12.2} {:>12.2} {:>14.3}",
        "primitives",
        longitudinal_spread(&base.vehicles),
        min_speed(&base.vehicles),
        base.audit.min_vehicle_distance
    );
    for a in &base.activations {
        println!("t = {:4.1} s: vehicle {} -> {:?}", a.step as f64 * base.dt, a.vehicle_id, schedule_entry(&schedule, a.vehicle_id, a.index));
    }
    Ok(())
}

fn schedule_entry(s: &PrimitiveSchedule, id: u32, index: usize) -> platoon::baseline::MotionPrimitive {
    s.vehicles.iter().find(|v| v.vehicle_id == id).unwrap().primitives[index].primitive
}
