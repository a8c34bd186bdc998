//! Behavior-based benchmark: scripted motion primitives, each executed by a
//! single-vehicle MPC tracker with a synthesized reference. No inter-vehicle
//! avoidance is imposed; the run is audited afterwards.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::{step, ControlInput, VehicleParams, VehicleState};
use crate::error::{Error, Result};
use crate::follower::{Follower, FollowerConfig};
use crate::formation::{RoadGeometry, VehicleId};
use crate::ocp::Weights;
use crate::planner::{audit_states, AuditReport, VehicleTrajectory};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MotionPrimitive {
    /// Ramp down to `speed` at `decel` m/s^2; braking harder than `decel` is not allowed.
    SlowDown { speed: f64, decel: f64 },
    Cruise { speed: f64 },
    /// Switch the lateral reference to the centre of 1-based `lane`, with a
    /// longitudinal acceleration of `accel` during the change.
    LaneChange { lane: usize, accel: f64 },
    /// Follow `front` at a bumper-to-bumper gap of `distance` metres.
    Acc { front: VehicleId, distance: f64 },
}

impl MotionPrimitive {
    pub fn validate(&self, road: &RoadGeometry) -> Result<()> {
        let ok = match *self {
            MotionPrimitive::SlowDown { speed, decel } => speed >= 0.0 && speed.is_finite() && decel > 0.0 && decel.is_finite(),
            MotionPrimitive::Cruise { speed } => speed >= 0.0 && speed.is_finite(),
            MotionPrimitive::LaneChange { lane, accel } => (1..=road.n_lanes).contains(&lane) && accel.is_finite(),
            MotionPrimitive::Acc { distance, .. } => distance >= 0.0 && distance.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Schedule(format!("invalid primitive {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Trigger {
    /// Simulated time in seconds.
    Time(f64),
    /// Bumper-to-bumper gap between `ahead` and `behind` reaches `min`.
    Gap { ahead: VehicleId, behind: VehicleId, min: f64 },
    /// `vehicle` is within `tol` of the centre of `lane`.
    InLane {
        vehicle: VehicleId,
        lane: usize,
        #[serde(default = "default_lane_tol")]
        tol: f64,
    },
}

fn default_lane_tol() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduledPrimitive {
    pub trigger: Trigger,
    pub primitive: MotionPrimitive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleSchedule {
    pub vehicle_id: VehicleId,
    pub primitives: Vec<ScheduledPrimitive>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrimitiveSchedule {
    pub vehicles: Vec<VehicleSchedule>,
}

impl PrimitiveSchedule {
    pub fn validate(&self, fleet: &[FleetMember], road: &RoadGeometry) -> Result<()> {
        let known = |id: VehicleId| fleet.iter().any(|m| m.vehicle_id == id);
        for m in fleet {
            if !self.vehicles.iter().any(|s| s.vehicle_id == m.vehicle_id) {
                return Err(Error::Schedule(format!("vehicle {} has no schedule", m.vehicle_id)));
            }
        }
        for (i, s) in self.vehicles.iter().enumerate() {
            let id = s.vehicle_id;
            if !known(id) {
                return Err(Error::Schedule(format!("schedule for unknown vehicle {id}")));
            }
            if self.vehicles[..i].iter().any(|o| o.vehicle_id == id) {
                return Err(Error::Schedule(format!("vehicle {id} is scheduled twice")));
            }
            match s.primitives.first() {
                Some(ScheduledPrimitive { trigger: Trigger::Time(t), .. }) if *t == 0.0 => {}
                _ => return Err(Error::Schedule(format!("vehicle {id}: first primitive must trigger at time 0"))),
            }
            let mut last_time = 0.0;
            for e in &s.primitives {
                e.primitive.validate(road)?;
                match e.trigger {
                    Trigger::Time(t) => {
                        if !(t >= last_time) || !t.is_finite() {
                            return Err(Error::Schedule(format!("vehicle {id}: time triggers must be non-decreasing")));
                        }
                        last_time = t;
                    }
                    Trigger::Gap { ahead, behind, min } => {
                        if !known(ahead) || !known(behind) || !min.is_finite() {
                            return Err(Error::Schedule(format!("vehicle {id}: bad gap trigger {:?}", e.trigger)));
                        }
                    }
                    Trigger::InLane { vehicle, lane, tol } => {
                        if !known(vehicle) || !(1..=road.n_lanes).contains(&lane) || !(tol > 0.0) {
                            return Err(Error::Schedule(format!("vehicle {id}: bad lane trigger {:?}", e.trigger)));
                        }
                    }
                }
                if let MotionPrimitive::Acc { front, .. } = e.primitive {
                    if !known(front) || front == id {
                        return Err(Error::MissingFrontVehicle { vehicle: id, front });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&s)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FleetMember {
    pub vehicle_id: VehicleId,
    #[serde(default)]
    pub params: VehicleParams,
    pub initial: VehicleState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    pub tracker: FollowerConfig,
    pub steps: usize,
    /// Separation used to annotate the run, not enforced.
    pub d_min: f64,
    /// Rate (1/s) at which the ACC spacing error is closed.
    pub acc_gain: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            tracker: FollowerConfig { dt: 0.1, horizon: 10, weights: Weights::default(), ..FollowerConfig::default() },
            steps: 150,
            d_min: 0.2,
            acc_gain: 0.5,
        }
    }
}

/// Bumper-to-bumper gap along x.
pub fn gap(ahead: (&VehicleState, &VehicleParams), behind: (&VehicleState, &VehicleParams)) -> f64 {
    ahead.0.x - behind.0.x - 0.5 * (ahead.1.len + behind.1.len)
}

type Snapshot<'a> = &'a [(VehicleId, VehicleParams, VehicleState)];

fn find(env: Snapshot<'_>, id: VehicleId) -> Option<&(VehicleId, VehicleParams, VehicleState)> {
    env.iter().find(|e| e.0 == id)
}

/// Horizon reference (`n + 1` samples) for one vehicle. `lane` is the lane
/// it currently keeps.
#[allow(clippy::too_many_arguments)]
pub fn primitive_reference(
    vehicle: VehicleId,
    z: &VehicleState,
    params: &VehicleParams,
    lane: usize,
    active: &MotionPrimitive,
    env: Snapshot<'_>,
    road: &RoadGeometry,
    cfg: &BaselineConfig,
) -> Result<Vec<VehicleState>> {
    let (n, dt) = (cfg.tracker.horizon, cfg.tracker.dt);
    let along = |y: f64, speed: &dyn Fn(usize) -> f64| {
        let mut x = z.x;
        (0..=n)
            .map(|k| {
                let v = speed(k);
                let s = VehicleState::new(x, y, 0.0, v);
                x += v * dt;
                s
            })
            .collect::<Vec<_>>()
    };
    let y = road.lane_center(lane);
    Ok(match *active {
        MotionPrimitive::Cruise { speed } => along(y, &|_| speed),
        MotionPrimitive::SlowDown { speed, decel } => along(y, &|k| {
            let r = z.v - decel * k as f64 * dt;
            if z.v > speed { r.max(speed) } else { speed }
        }),
        MotionPrimitive::LaneChange { lane, accel } => {
            along(road.lane_center(lane), &|k| (z.v + accel * k as f64 * dt).max(0.0))
        }
        MotionPrimitive::Acc { front, distance } => {
            let (_, fp, fz) = *find(env, front).ok_or(Error::MissingFrontVehicle { vehicle, front })?;
            let e0 = gap((&fz, &fp), (z, params)) - distance;
            (0..=n)
                .map(|k| {
                    let t = k as f64 * dt;
                    let e = e0 * (-cfg.acc_gain * t).exp();
                    let x = fz.x + fz.v * t - 0.5 * (fp.len + params.len) - distance - e;
                    VehicleState::new(x, y, 0.0, (fz.v + cfg.acc_gain * e).max(0.0))
                })
                .collect()
        }
    })
}

fn tracker_for(active: &MotionPrimitive, u_prev: &ControlInput, cfg: &FollowerConfig) -> FollowerConfig {
    let mut c = cfg.clone();
    if let MotionPrimitive::SlowDown { decel, .. } = *active {
        // keep the bound reachable from the previous input
        c.limits.u_min[0] = c.limits.u_min[0].max((-decel).min(u_prev.a));
    }
    c
}

/// One tracking solve for the active primitive from a fleet snapshot.
#[allow(clippy::too_many_arguments)]
pub fn primitive_step(
    vehicle: VehicleId,
    z: &VehicleState,
    u_prev: &ControlInput,
    lane: usize,
    active: &MotionPrimitive,
    env: Snapshot<'_>,
    params: &VehicleParams,
    road: &RoadGeometry,
    cfg: &BaselineConfig,
) -> Result<ControlInput> {
    let r = primitive_reference(vehicle, z, params, lane, active, env, road, cfg)?;
    Follower::new(*params, tracker_for(active, u_prev, &cfg.tracker))?.step(z, u_prev, &r)
}

/// Primitive `index` of `vehicle_id`'s schedule became active at `step`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Activation {
    pub step: usize,
    pub vehicle_id: VehicleId,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineRun {
    pub dt: f64,
    pub vehicles: Vec<VehicleTrajectory>,
    pub activations: Vec<Activation>,
    pub audit: AuditReport,
}

fn triggered(tr: &Trigger, t: f64, env: Snapshot<'_>, road: &RoadGeometry) -> bool {
    match *tr {
        Trigger::Time(at) => t >= at - 1e-9,
        Trigger::Gap { ahead, behind, min } => match (find(env, ahead), find(env, behind)) {
            (Some(a), Some(b)) => gap((&a.2, &a.1), (&b.2, &b.1)) >= min,
            _ => false,
        },
        Trigger::InLane { vehicle, lane, tol } => {
            find(env, vehicle).is_some_and(|v| (v.2.y - road.lane_center(lane)).abs() <= tol)
        }
    }
}

/// Simulates every vehicle on its schedule for `cfg.steps` steps. All
/// vehicles read the same snapshot before any of them moves.
pub fn run_schedule(
    schedule: &PrimitiveSchedule,
    fleet: &[FleetMember],
    road: &RoadGeometry,
    cfg: &BaselineConfig,
) -> Result<BaselineRun> {
    road.validate()?;
    cfg.tracker.validate()?;
    schedule.validate(fleet, road)?;
    let dt = cfg.tracker.dt;
    let plans: Vec<&VehicleSchedule> = fleet
        .iter()
        .map(|m| schedule.vehicles.iter().find(|s| s.vehicle_id == m.vehicle_id).unwrap())
        .collect();
    let mut trackers = fleet.iter().map(|m| Follower::new(m.params, cfg.tracker.clone())).collect::<Result<Vec<_>>>()?;
    let mut active = vec![0usize; fleet.len()];
    let mut lanes: Vec<usize> = fleet.iter().map(|m| road.lane_of(m.initial.y)).collect();
    let mut u = vec![ControlInput::ZERO; fleet.len()];
    let mut out: Vec<VehicleTrajectory> = fleet
        .iter()
        .map(|m| VehicleTrajectory { vehicle_id: m.vehicle_id, params: m.params, states: vec![m.initial], inputs: Vec::new() })
        .collect();
    let mut activations: Vec<Activation> =
        fleet.iter().map(|m| Activation { step: 0, vehicle_id: m.vehicle_id, index: 0 }).collect();
    for (i, p) in plans.iter().enumerate() {
        if let MotionPrimitive::LaneChange { lane, .. } = p.primitives[0].primitive {
            lanes[i] = lane;
        }
    }
    for t in 0..cfg.steps {
        let env: Vec<(VehicleId, VehicleParams, VehicleState)> =
            out.iter().map(|v| (v.vehicle_id, v.params, *v.states.last().unwrap())).collect();
        for (i, p) in plans.iter().enumerate() {
            while let Some(next) = p.primitives.get(active[i] + 1) {
                if !triggered(&next.trigger, t as f64 * dt, &env, road) {
                    break;
                }
                active[i] += 1;
                activations.push(Activation { step: t, vehicle_id: p.vehicle_id, index: active[i] });
                if let MotionPrimitive::LaneChange { lane, .. } = next.primitive {
                    lanes[i] = lane;
                }
            }
        }
        for (i, p) in plans.iter().enumerate() {
            let prim = &p.primitives[active[i]].primitive;
            let (id, params, z) = env[i];
            let r = primitive_reference(id, &z, &params, lanes[i], prim, &env, road, cfg)?;
            let f = &mut trackers[i];
            f.cfg = tracker_for(prim, &u[i], &cfg.tracker);
            u[i] = f.step(&z, &u[i], &r).map_err(|e| Error::Follower { step: t, reason: format!("vehicle {id}: {e}") })?;
            out[i].inputs.push(u[i]);
            out[i].states.push(step(&params, &z, &u[i], dt));
        }
    }
    let audit = audit_states(
        &out.iter().map(|v| (v.vehicle_id, v.params, v.states.as_slice())).collect::<Vec<_>>(),
        &[],
        cfg.d_min,
    )?;
    Ok(BaselineRun { dt, vehicles: out, activations, audit })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn member(id: VehicleId, x: f64, y: f64, v: f64) -> FleetMember {
        FleetMember { vehicle_id: id, params: VehicleParams::default(), initial: VehicleState::new(x, y, 0.0, v) }
    }

    fn only(id: VehicleId, p: MotionPrimitive) -> VehicleSchedule {
        VehicleSchedule { vehicle_id: id, primitives: vec![ScheduledPrimitive { trigger: Trigger::Time(0.0), primitive: p }] }
    }

    #[test]
    fn cruise_at_speed_needs_no_input() {
        let road = RoadGeometry::new(2, 3.7).unwrap();
        let cfg = BaselineConfig::default();
        let z = VehicleState::new(0.0, 1.85, 0.0, 10.0);
        let p = VehicleParams::default();
        let env = [(1, p, z)];
        let u = primitive_step(1, &z, &ControlInput::ZERO, 1, &MotionPrimitive::Cruise { speed: 10.0 }, &env, &p, &road, &cfg)
            .unwrap();
        assert!(u.a.abs() < 1e-6 && u.delta.abs() < 1e-6, "{u:?}");
    }

    #[test]
    fn slow_down_respects_its_deceleration() {
        let road = RoadGeometry::new(2, 3.7).unwrap();
        let cfg = BaselineConfig { steps: 120, ..Default::default() };
        let fleet = [member(1, 0.0, 1.85, 10.0)];
        let sched = PrimitiveSchedule { vehicles: vec![only(1, MotionPrimitive::SlowDown { speed: 6.0, decel: 1.0 })] };
        let run = run_schedule(&sched, &fleet, &road, &cfg).unwrap();
        let v = &run.vehicles[0];
        assert!(v.inputs.iter().all(|u| u.a >= -1.0 - 1e-7));
        assert!(v.states.windows(2).all(|w| w[1].v <= w[0].v + 1e-9));
        let end = v.states.last().unwrap().v;
        assert!((end - 6.0).abs() < 0.05, "{end}");
    }

    #[test]
    fn acc_converges_to_the_headway() {
        let road = RoadGeometry::new(2, 3.7).unwrap();
        let cfg = BaselineConfig { steps: 200, ..Default::default() };
        let p = VehicleParams::default();
        // 15 m bumper gap behind a car at 10 m/s
        let fleet = [member(1, 0.0, 1.85, 12.0), member(2, 15.0 + p.len, 1.85, 10.0)];
        let sched = PrimitiveSchedule {
            vehicles: vec![
                only(1, MotionPrimitive::Acc { front: 2, distance: 5.0 }),
                only(2, MotionPrimitive::Cruise { speed: 10.0 }),
            ],
        };
        let run = run_schedule(&sched, &fleet, &road, &cfg).unwrap();
        let (a, b) = (&run.vehicles[1], &run.vehicles[0]);
        let g = gap((a.states.last().unwrap(), &p), (b.states.last().unwrap(), &p));
        assert!((g - 5.0).abs() <= 0.2, "{g}");
    }

    #[test]
    fn all_cruise_gives_parallel_lines() {
        let road = RoadGeometry::new(2, 3.7).unwrap();
        let cfg = BaselineConfig { steps: 40, ..Default::default() };
        let fleet = [member(1, 0.0, 1.85, 10.0), member(2, 0.0, 5.55, 10.0)];
        let sched = PrimitiveSchedule {
            vehicles: vec![only(1, MotionPrimitive::Cruise { speed: 10.0 }), only(2, MotionPrimitive::Cruise { speed: 10.0 })],
        };
        let run = run_schedule(&sched, &fleet, &road, &cfg).unwrap();
        for (v, y) in run.vehicles.iter().zip([1.85, 5.55]) {
            for (k, z) in v.states.iter().enumerate() {
                assert!((z.y - y).abs() < 1e-6 && (z.x - 10.0 * 0.1 * k as f64).abs() < 1e-6);
            }
        }
        assert!(run.audit.passed());
    }

    #[test]
    fn lane_change_reaches_the_target_lane() {
        let road = RoadGeometry::new(2, 3.7).unwrap();
        let cfg = BaselineConfig { steps: 100, ..Default::default() };
        let fleet = [member(1, 0.0, 1.85, 10.0)];
        let sched = PrimitiveSchedule { vehicles: vec![only(1, MotionPrimitive::LaneChange { lane: 2, accel: 0.0 })] };
        let run = run_schedule(&sched, &fleet, &road, &cfg).unwrap();
        let z = run.vehicles[0].states.last().unwrap();
        assert!((z.y - 5.55).abs() < 0.05 && z.psi.abs() < 0.01, "{z:?}");
    }

    #[test]
    fn schedule_errors() {
        let road = RoadGeometry::new(2, 3.7).unwrap();
        let fleet = [member(1, 0.0, 1.85, 10.0)];
        let acc = PrimitiveSchedule { vehicles: vec![only(1, MotionPrimitive::Acc { front: 9, distance: 5.0 })] };
        assert!(matches!(acc.validate(&fleet, &road), Err(Error::MissingFrontVehicle { vehicle: 1, front: 9 })));
        let lane = PrimitiveSchedule { vehicles: vec![only(1, MotionPrimitive::LaneChange { lane: 3, accel: 0.0 })] };
        assert!(lane.validate(&fleet, &road).is_err());
        let mut late = PrimitiveSchedule { vehicles: vec![only(1, MotionPrimitive::Cruise { speed: 5.0 })] };
        late.vehicles[0].primitives[0].trigger = Trigger::Time(1.0);
        assert!(late.validate(&fleet, &road).is_err());
        assert!(PrimitiveSchedule::default().validate(&fleet, &road).is_err());
    }

    #[test]
    fn schedule_json_shape() {
        let s = PrimitiveSchedule {
            vehicles: vec![VehicleSchedule {
                vehicle_id: 1,
                primitives: vec![
                    ScheduledPrimitive { trigger: Trigger::Time(0.0), primitive: MotionPrimitive::Cruise { speed: 10.0 } },
                    ScheduledPrimitive {
                        trigger: Trigger::Gap { ahead: 2, behind: 3, min: 7.5 },
                        primitive: MotionPrimitive::LaneChange { lane: 2, accel: 0.0 },
                    },
                ],
            }],
        };
        let j = serde_json::to_string(&s).unwrap();
        assert!(j.contains(r#"{"kind":"cruise","speed":10.0}"#) && j.contains(r#"{"time":0.0}"#), "{j}");
        assert_eq!(serde_json::from_str::<PrimitiveSchedule>(&j).unwrap(), s);
        let lane: Trigger = serde_json::from_str(r#"{"in_lane":{"vehicle":1,"lane":2}}"#).unwrap();
        assert_eq!(lane, Trigger::InLane { vehicle: 1, lane: 2, tol: 0.1 });
    }
}
