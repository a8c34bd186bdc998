//! Executes a stored lane-change maneuver with per-vehicle MPC followers at
//! 50, 100 and 200 Hz.
//!
//!     cargo run --release --example path_following

use platoon::follower::follow_maneuver;
use platoon::planner::plan_maneuver;
use platoon::scenario::Scenario;

fn main() -> platoon::Result<()> {
    let sc = Scenario::load(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/scenario_c.json"))?;
    let traj = plan_maneuver(&sc.request(&sc.pairs[0])?, &sc.planner)?.trajectory;
    println!("{:>6} {:>14} {:>14} {:>14} {:>12}", "Hz", "max err (m)", "mean solve ms", "max solve ms", "min dist (m)");
    for hz in [50.0, 100.0, 200.0] {
        let cfg = sc.follower.at_rate(hz);
        let run = follow_maneuver(&traj, &cfg)?;
        let s = run.summary(&traj.obstacles, traj.d_min)?;
        let all: Vec<f64> = run.solve_seconds.iter().flatten().copied().collect();
        let mean = all.iter().sum::<f64>() / all.len() as f64;
        let max = all.iter().copied().fold(0.0, f64::max);
        println!(
            "{hz:>6} {:>14.5} {:>14.3} {:>14.3} {:>12.4}",
            s.max_tracking_error,
            mean * 1e3,
            max * 1e3,
            s.min_vehicle_distance
        );
    }
    Ok(())
}
