//! Online maneuver selection against the shared plans of surrounding traffic.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::{VehicleParams, VehicleState};
use crate::error::{Error, Result};
use crate::formation::VehicleId;
use crate::geometry::{footprint, polytope_distance};
use crate::lookup::ManeuverTable;
use crate::planner::FleetTrajectory;

/// Future trajectory announced by a vehicle outside the platoon, sampled at
/// the maneuver's time step with `states[0]` at the maneuver start.
#[derive(Debug, Clone, PartialEq)]
pub struct SharedPlan {
    pub vehicle_id: VehicleId,
    pub len: f64,
    pub w: f64,
    pub states: Vec<VehicleState>,
}

#[derive(Serialize, Deserialize)]
struct StateRecord {
    t: usize,
    x: f64,
    y: f64,
    psi: f64,
    v: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanRecord {
    vehicle_id: VehicleId,
    len: f64,
    w: f64,
    states: Vec<StateRecord>,
}

impl Serialize for SharedPlan {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PlanRecord {
            vehicle_id: self.vehicle_id,
            len: self.len,
            w: self.w,
            states: self
                .states
                .iter()
                .enumerate()
                .map(|(t, z)| StateRecord { t, x: z.x, y: z.y, psi: z.psi, v: z.v })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for SharedPlan {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let r = PlanRecord::deserialize(d)?;
        // `t` is the step index and must count up from zero
        if let Some((k, s)) = r.states.iter().enumerate().find(|(k, s)| s.t != *k) {
            return Err(D::Error::custom(format!(
                "vehicle {}: state {k} has t = {}, expected {k}",
                r.vehicle_id, s.t
            )));
        }
        Ok(SharedPlan {
            vehicle_id: r.vehicle_id,
            len: r.len,
            w: r.w,
            states: r.states.iter().map(|s| VehicleState::new(s.x, s.y, s.psi, s.v)).collect(),
        })
    }
}

impl SharedPlan {
    pub fn params(&self) -> Result<VehicleParams> {
        VehicleParams::with_dimensions(self.len, self.w)
    }
}

pub fn load_traffic(path: impl AsRef<Path>) -> Result<Vec<SharedPlan>> {
    let path = path.as_ref();
    let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let plans: Vec<SharedPlan> = serde_json::from_str(&s)?;
    for p in &plans {
        p.params()?;
        if p.states.iter().any(|z| !z.is_finite()) {
            return Err(Error::Scenario(format!("shared plan of vehicle {} has non-finite states", p.vehicle_id)));
        }
    }
    Ok(plans)
}

pub fn save_traffic(path: impl AsRef<Path>, plans: &[SharedPlan]) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, serde_json::to_string_pretty(plans)?).map_err(|e| Error::io(path, e))
}

/// True when the two vehicles come closer than `d_min` at some step of the
/// first trajectory's span. The second trajectory is truncated to that span
/// and must cover it.
pub fn collision_check(
    a: (&[VehicleState], &VehicleParams),
    b: (&[VehicleState], &VehicleParams),
    d_min: f64,
) -> Result<bool> {
    let steps = a.0.len();
    if b.0.len() < steps {
        return Err(Error::InsufficientHorizon {
            vehicle: "second trajectory".into(),
            needed: steps,
            got: b.0.len(),
        });
    }
    for t in 0..steps {
        let d = polytope_distance(&footprint(&a.0[t], a.1), &footprint(&b.0[t], b.1))?.dist;
        if d < d_min {
            return Ok(true);
        }
    }
    Ok(false)
}

/// True when any platoon vehicle of the maneuver conflicts with any shared plan.
pub fn maneuver_conflicts(traj: &FleetTrajectory, shared: &[SharedPlan], d_min: f64) -> Result<bool> {
    let needed = traj.steps() + 1;
    for plan in shared {
        if plan.states.len() < needed {
            return Err(Error::InsufficientHorizon {
                vehicle: plan.vehicle_id.to_string(),
                needed,
                got: plan.states.len(),
            });
        }
    }
    for plan in shared {
        let pp = plan.params()?;
        for v in &traj.vehicles {
            if collision_check((&v.states, &v.params), (&plan.states, &pp), d_min)? {
                return Ok(true);
            }
        }
    }
    Ok(false)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Decision<'a> {
    Selected { index: usize, rho: f64, trajectory: &'a FleetTrajectory },
    Infeasible,
}

/// Scans the stored family of `(initial, target)` in index order and returns
/// the first maneuver free of conflicts with every shared plan. `d_min`
/// defaults to each maneuver's own planning separation.
pub fn decide<'a>(
    table: &'a ManeuverTable,
    initial: &str,
    target: &str,
    shared: &[SharedPlan],
    d_min: Option<f64>,
) -> Result<Decision<'a>> {
    for e in table.query(initial, target)? {
        let d = d_min.unwrap_or(e.trajectory.d_min);
        if !maneuver_conflicts(&e.trajectory, shared, d)? {
            return Ok(Decision::Selected { index: e.index, rho: e.rho, trajectory: &e.trajectory });
        }
    }
    Ok(Decision::Infeasible)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn straight(x0: f64, y: f64, v: f64, dt: f64, n: usize) -> Vec<VehicleState> {
        (0..n).map(|k| VehicleState::new(x0 + v * dt * k as f64, y, 0.0, v)).collect()
    }

    #[test]
    fn identical_trajectories_collide() {
        let p = VehicleParams::default();
        let s = straight(0.0, 1.85, 10.0, 0.1, 20);
        assert!(collision_check((&s, &p), (&s, &p), 0.3).unwrap());
    }

    #[test]
    fn parallel_lanes_are_clear() {
        let p = VehicleParams::default();
        let a = straight(0.0, 1.85, 10.0, 0.1, 20);
        let b = straight(0.0, 5.55, 10.0, 0.1, 20);
        assert!(!collision_check((&a, &p), (&b, &p), 0.3).unwrap());
        // 3.7 - 1.8 = 1.9
        assert!(!collision_check((&a, &p), (&b, &p), 1.9 - 1e-9).unwrap());
        assert!(collision_check((&a, &p), (&b, &p), 1.9 + 1e-6).unwrap());
    }

    #[test]
    fn crossing_is_detected_and_symmetric() {
        let p = VehicleParams::default();
        let a = straight(0.0, 1.85, 10.0, 0.1, 30);
        // b drifts from the left lane into a's lane around step 20
        let b: Vec<VehicleState> = (0..30)
            .map(|k| {
                let y = if k < 20 { 5.55 } else { 1.85 };
                VehicleState::new(a[k].x, y, 0.0, 10.0)
            })
            .collect();
        assert!(collision_check((&a, &p), (&b, &p), 0.3).unwrap());
        assert!(collision_check((&b, &p), (&a, &p), 0.3).unwrap());
        assert!(!collision_check((&a[..20], &p), (&b, &p), 0.3).unwrap());
    }

    #[test]
    fn short_plan_is_rejected() {
        let p = VehicleParams::default();
        let a = straight(0.0, 1.85, 10.0, 0.1, 20);
        let b = straight(0.0, 5.55, 10.0, 0.1, 19);
        assert!(matches!(
            collision_check((&a, &p), (&b, &p), 0.3),
            Err(Error::InsufficientHorizon { needed: 20, got: 19, .. })
        ));
        // longer is fine
        let c = straight(0.0, 5.55, 10.0, 0.1, 40);
        assert!(!collision_check((&a, &p), (&c, &p), 0.3).unwrap());
    }

    #[test]
    fn traffic_json_round_trip() {
        let plan = SharedPlan { vehicle_id: 7, len: 4.5, w: 1.8, states: straight(3.0, 9.25, 12.0, 0.2, 4) };
        let s = serde_json::to_string(&[plan.clone()]).unwrap();
        assert!(s.contains("\"t\":3"));
        let back: Vec<SharedPlan> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, vec![plan]);
        let bad = s.replace("\"t\":3", "\"t\":5");
        assert!(serde_json::from_str::<Vec<SharedPlan>>(&bad).is_err());
    }
}
