//! Centralized receding-horizon maneuver planning.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dynamics::{step, ControlInput, Limits, VehicleParams, VehicleState};
use crate::error::{Error, Result};
use crate::formation::{
    build_reference, AssignedConfiguration, FinalAnchor, ReferenceSpec, ReferenceTrajectory, RoadGeometry,
    VehicleId,
};
use crate::geometry::{footprint, polytope_distance, Polytope};
use crate::nlp::{IpmOptions, IpmSolver, NlpSolution};
use crate::ocp::{Ocp, OcpData, OcpVehicle, Weights};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerConfig {
    /// Prediction horizon `N` in steps.
    pub horizon: usize,
    pub dt: f64,
    /// Maneuver length `T` in steps.
    pub steps: usize,
    pub d_min: f64,
    pub v_max: f64,
    pub rho: f64,
    pub weights: Weights,
    pub limits: Limits,
    pub kkt_tol: f64,
    pub max_iter: usize,
    pub anchor: FinalAnchor,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            horizon: 5,
            dt: 0.2,
            steps: 120,
            d_min: 0.3,
            v_max: 20.0,
            rho: 0.25,
            weights: Weights::default(),
            limits: Limits::default(),
            kkt_tol: 1e-6,
            max_iter: 3000,
            anchor: FinalAnchor::default(),
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParams(m));
        if self.horizon == 0 || self.horizon >= self.steps {
            return bad(format!("horizon {} must lie in [1, {})", self.horizon, self.steps));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.d_min >= 0.0 && self.d_min.is_finite()) {
            return bad(format!("d_min must be non-negative, got {}", self.d_min));
        }
        if !(self.v_max >= 0.0 && self.v_max.is_finite()) {
            return bad(format!("v_max must be non-negative, got {}", self.v_max));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return bad(format!("rho must lie in (0, 1), got {}", self.rho));
        }
        if !self.weights.is_valid() {
            return bad("weights must be finite and non-negative".into());
        }
        if !(self.kkt_tol > 0.0) || self.max_iter == 0 {
            return bad("solver tolerance and iteration limit must be positive".into());
        }
        self.limits.validate()
    }

    fn solver(&self) -> IpmSolver {
        IpmSolver::new(IpmOptions {
            tol: self.kkt_tol,
            acceptable_tol: (100.0 * self.kkt_tol).min(1e-3),
            max_iter: self.max_iter,
            trace: std::env::var_os("PLATOON_SOLVER_TRACE").is_some(),
            ..IpmOptions::default()
        })
    }
}

/// Closed-loop states and applied inputs of one vehicle.
#[derive(Debug, Clone, PartialEq)]
pub struct VehicleTrajectory {
    pub vehicle_id: VehicleId,
    pub params: VehicleParams,
    /// `T + 1` states.
    pub states: Vec<VehicleState>,
    /// `T` inputs; `inputs[t]` drives `states[t]` to `states[t + 1]`.
    pub inputs: Vec<ControlInput>,
}

#[derive(Serialize, Deserialize)]
struct VehicleTrajectoryRaw {
    vehicle_id: VehicleId,
    params: VehicleParams,
    t: Vec<f64>,
    x: Vec<f64>,
    y: Vec<f64>,
    psi: Vec<f64>,
    v: Vec<f64>,
    a: Vec<f64>,
    delta: Vec<f64>,
}

impl Serialize for VehicleTrajectory {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        // `t` is the step index; parallel arrays keep the document compact
        let col = |f: fn(&VehicleState) -> f64| self.states.iter().map(f).collect::<Vec<_>>();
        VehicleTrajectoryRaw {
            vehicle_id: self.vehicle_id,
            params: self.params,
            t: (0..self.states.len()).map(|t| t as f64).collect(),
            x: col(|z| z.x),
            y: col(|z| z.y),
            psi: col(|z| z.psi),
            v: col(|z| z.v),
            a: self.inputs.iter().map(|u| u.a).collect(),
            delta: self.inputs.iter().map(|u| u.delta).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for VehicleTrajectory {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = VehicleTrajectoryRaw::deserialize(d)?;
        let n = raw.x.len();
        if [raw.t.len(), raw.y.len(), raw.psi.len(), raw.v.len()].iter().any(|&l| l != n) {
            return Err(D::Error::custom("state arrays differ in length"));
        }
        if raw.a.len() != raw.delta.len() || raw.a.len() + 1 != n.max(1) {
            return Err(D::Error::custom("input arrays must hold one entry less than the state arrays"));
        }
        Ok(VehicleTrajectory {
            vehicle_id: raw.vehicle_id,
            params: raw.params,
            states: (0..n).map(|t| VehicleState::new(raw.x[t], raw.y[t], raw.psi[t], raw.v[t])).collect(),
            inputs: raw.a.iter().zip(&raw.delta).map(|(&a, &d)| ControlInput::new(a, d)).collect(),
        })
    }
}

impl VehicleTrajectory {
    /// Largest deviation between stored states and a replay of the stored
    /// inputs through the model.
    pub fn replay_error(&self, dt: f64) -> f64 {
        let mut worst = 0.0f64;
        for (t, u) in self.inputs.iter().enumerate() {
            let next = step(&self.params, &self.states[t], u, dt);
            let s = self.states[t + 1];
            let dpsi = crate::dynamics::wrap_angle(next.psi - s.psi).abs();
            worst = worst.max((next.x - s.x).abs()).max((next.y - s.y).abs()).max(dpsi).max((next.v - s.v).abs());
        }
        worst
    }
}

/// A planned maneuver together with the data needed to audit it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FleetTrajectory {
    pub rho: f64,
    pub d_min: f64,
    pub dt: f64,
    pub initial: AssignedConfiguration,
    pub target: AssignedConfiguration,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub obstacles: Vec<Polytope>,
    pub vehicles: Vec<VehicleTrajectory>,
}

impl FleetTrajectory {
    /// Number of steps `T`.
    pub fn steps(&self) -> usize {
        self.vehicles.first().map_or(0, |v| v.inputs.len())
    }

    pub fn vehicle(&self, id: VehicleId) -> Option<&VehicleTrajectory> {
        self.vehicles.iter().find(|v| v.vehicle_id == id)
    }

    /// Independent safety check with the primal distance.
    pub fn audit(&self, d_min: f64) -> Result<AuditReport> {
        audit_states(&self.vehicles.iter().map(|v| (v.vehicle_id, v.params, v.states.as_slice())).collect::<Vec<_>>(), &self.obstacles, d_min)
    }
}

/// One separation below the threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub t: usize,
    /// Vehicle ids, or `(vehicle, obstacle index)` for obstacles.
    pub pair: (u32, u32),
    pub obstacle: bool,
    pub dist: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub min_vehicle_distance: f64,
    pub min_obstacle_distance: f64,
    pub violations: Vec<Violation>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Largest `max x - min x` over the fleet at any common step.
pub fn longitudinal_spread(vehicles: &[VehicleTrajectory]) -> f64 {
    let steps = vehicles.iter().map(|v| v.states.len()).min().unwrap_or(0);
    (0..steps)
        .map(|t| {
            let xs = vehicles.iter().map(|v| v.states[t].x);
            xs.clone().fold(f64::NEG_INFINITY, f64::max) - xs.fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

pub fn min_speed(vehicles: &[VehicleTrajectory]) -> f64 {
    vehicles.iter().flat_map(|v| v.states.iter().map(|z| z.v)).fold(f64::INFINITY, f64::min)
}

/// Largest state error `||z - z_ref||` over the fleet at step `t`.
pub fn reference_error(traj: &FleetTrajectory, refs: &[ReferenceTrajectory], t: usize) -> f64 {
    traj.vehicles
        .iter()
        .map(|v| {
            let r = refs.iter().find(|r| r.vehicle_id == v.vehicle_id).map_or(v.states[t], |r| r.at(t));
            let z = v.states[t];
            ((z.x - r.x).powi(2) + (z.y - r.y).powi(2) + (z.psi - r.psi).powi(2) + (z.v - r.v).powi(2)).sqrt()
        })
        .fold(0.0, f64::max)
}

/// First step from which the reference error stays below `tol` to the end,
/// provided that stretch is at least `hold` steps long.
pub fn settling_step(traj: &FleetTrajectory, refs: &[ReferenceTrajectory], tol: f64, hold: usize) -> Option<usize> {
    let last = traj.steps();
    let mut first = None;
    for t in (0..=last).rev() {
        if reference_error(traj, refs, t) >= tol {
            break;
        }
        first = Some(t);
    }
    first.filter(|&t| last + 1 - t >= hold)
}

/// Tolerance of the independent distance audit.
pub const DIST_TOL: f64 = 1e-4;

/// Checks every vehicle pair and vehicle-obstacle pair at every step common
/// to all state sequences; distances below `d_min - DIST_TOL` are reported.
pub fn audit_states(
    vehicles: &[(VehicleId, VehicleParams, &[VehicleState])],
    obstacles: &[Polytope],
    d_min: f64,
) -> Result<AuditReport> {
    let steps = vehicles.iter().map(|v| v.2.len()).min().unwrap_or(0);
    let mut report =
        AuditReport { min_vehicle_distance: f64::INFINITY, min_obstacle_distance: f64::INFINITY, violations: Vec::new() };
    for t in 0..steps {
        let fps: Vec<Polytope> = vehicles.iter().map(|(_, p, s)| footprint(&s[t], p)).collect();
        for i in 0..fps.len() {
            for j in i + 1..fps.len() {
                let d = polytope_distance(&fps[i], &fps[j])?.dist;
                report.min_vehicle_distance = report.min_vehicle_distance.min(d);
                if d < d_min - DIST_TOL {
                    report.violations.push(Violation { t, pair: (vehicles[i].0, vehicles[j].0), obstacle: false, dist: d });
                }
            }
            for (o, obs) in obstacles.iter().enumerate() {
                let d = polytope_distance(&fps[i], obs)?.dist;
                report.min_obstacle_distance = report.min_obstacle_distance.min(d);
                if d < d_min - DIST_TOL {
                    report.violations.push(Violation { t, pair: (vehicles[i].0, o as u32), obstacle: true, dist: d });
                }
            }
        }
    }
    Ok(report)
}

/// Everything [`plan_maneuver`] needs besides the planner settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ManeuverRequest {
    pub initial: AssignedConfiguration,
    pub target: AssignedConfiguration,
    pub road: RoadGeometry,
    /// Fleet in planning order.
    pub fleet: Vec<(VehicleId, VehicleParams)>,
    /// Longitudinal offset of the initial configuration's origin.
    pub origin_x: f64,
    pub obstacles: Vec<Polytope>,
    /// Initial speed of every vehicle; `v_max` when absent.
    pub initial_speed: Option<f64>,
}

/// Solver statistics of one planning run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlanReport {
    pub solves: usize,
    pub cold_retries: usize,
    pub total_iterations: usize,
    pub max_iterations: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanOutcome {
    pub trajectory: FleetTrajectory,
    pub report: PlanReport,
}

/// Reference trajectories for a request, in fleet order.
pub fn references(req: &ManeuverRequest, cfg: &PlannerConfig) -> Result<Vec<ReferenceTrajectory>> {
    let params = req.fleet.first().map(|f| f.1).unwrap_or_default();
    let ids: Vec<VehicleId> = req.fleet.iter().map(|f| f.0).collect();
    build_reference(
        &ReferenceSpec {
            initial: &req.initial,
            target: &req.target,
            rho: &[cfg.rho],
            v_max: cfg.v_max,
            steps: cfg.steps,
            dt: cfg.dt,
            road: &req.road,
            params: &params,
            origin_x: req.origin_x,
            anchor: cfg.anchor,
        },
        &ids,
    )
}

/// Builds the finite-horizon problem at step `t` of the closed loop.
pub fn build_ftcoc(
    states: &[VehicleState],
    u_prev: &[ControlInput],
    refs: &[ReferenceTrajectory],
    params: &[VehicleParams],
    obstacles: &[Polytope],
    t: usize,
    cfg: &PlannerConfig,
) -> Ocp {
    let vehicles = (0..states.len())
        .map(|i| OcpVehicle {
            params: params[i],
            z0: states[i],
            u_prev: u_prev[i],
            refs: (0..=cfg.horizon).map(|k| refs[i].extended(t + k, cfg.dt)).collect(),
        })
        .collect();
    Ocp::new(OcpData {
        vehicles,
        obstacles: obstacles.to_vec(),
        horizon: cfg.horizon,
        dt: cfg.dt,
        d_min: cfg.d_min,
        limits: cfg.limits.clone(),
        weights: cfg.weights,
        vehicle_avoidance: true,
    })
}

/// Solves one step problem, warm-started from the previous step when one is
/// available and retried cold if the warm solve fails.
pub fn solve_step(
    solver: &mut IpmSolver,
    ocp: &Ocp,
    previous: Option<&NlpSolution>,
    report: &mut PlanReport,
) -> NlpSolution {
    let record = |sol: &NlpSolution, report: &mut PlanReport| {
        report.solves += 1;
        report.total_iterations += sol.iterations;
        report.max_iterations = report.max_iterations.max(sol.iterations);
    };
    let mut shifted = None;
    if let Some(prev) = previous {
        let (x0, warm) = ocp.shifted_start(prev);
        let sol = solver.solve(ocp, &x0, Some(&warm));
        record(&sol, report);
        if sol.status.is_success() {
            return sol;
        }
        report.cold_retries += 1;
        shifted = Some(x0);
    }
    let sol = solver.solve(ocp, &ocp.cold_start(), None);
    record(&sol, report);
    if sol.status.is_success() {
        return sol;
    }
    // last resort: shifted primal with fresh multipliers and a larger barrier
    let saved = solver.options.clone();
    solver.options.mu_init = 1.0;
    let x0 = shifted.unwrap_or_else(|| ocp.cold_start());
    let retry = solver.solve(ocp, &x0, None);
    solver.options = saved;
    record(&retry, report);
    if retry.status.is_success() { retry } else { sol }
}

/// Closed-loop receding-horizon planning of a reconfiguration maneuver. A
/// failed step problem discards the whole maneuver.
pub fn plan_maneuver(req: &ManeuverRequest, cfg: &PlannerConfig) -> Result<PlanOutcome> {
    cfg.validate()?;
    req.road.validate()?;
    if req.fleet.is_empty() {
        return Err(Error::InvalidConfiguration("empty fleet".into()));
    }
    for (_, p) in &req.fleet {
        p.validate()?;
    }
    let start = Instant::now();
    let refs = references(req, cfg)?;
    let params: Vec<VehicleParams> = req.fleet.iter().map(|f| f.1).collect();
    let v0 = req.initial_speed.unwrap_or(cfg.v_max);
    let mut states: Vec<VehicleState> = refs.iter().map(|r| VehicleState { v: v0, ..r.at(0) }).collect();

    let snapshot: Vec<(VehicleId, VehicleParams, &[VehicleState])> =
        req.fleet.iter().zip(&states).map(|(f, s)| (f.0, f.1, std::slice::from_ref(s))).collect();
    let initial = audit_states(&snapshot, &req.obstacles, cfg.d_min)?;
    if let Some(v) = initial.violations.first() {
        return Err(Error::Infeasible(format!(
            "initial footprints {:?} are {:.4} m apart, below d_min {}",
            v.pair, v.dist, cfg.d_min
        )));
    }

    let n = req.fleet.len();
    let mut traj: Vec<VehicleTrajectory> = req
        .fleet
        .iter()
        .zip(&states)
        .map(|(&(id, p), s)| VehicleTrajectory { vehicle_id: id, params: p, states: vec![*s], inputs: Vec::new() })
        .collect();
    let mut u_prev = vec![ControlInput::ZERO; n];
    let mut solver = cfg.solver();
    let mut report = PlanReport::default();
    let mut previous: Option<NlpSolution> = None;

    for t in 0..cfg.steps {
        let ocp = build_ftcoc(&states, &u_prev, &refs, &params, &req.obstacles, t, cfg);
        let sol = solve_step(&mut solver, &ocp, previous.as_ref(), &mut report);
        if !sol.status.is_success() {
            return Err(Error::Infeasible(format!(
                "step problem at t = {t} failed ({:?}, infeasibility {:.3e})",
                sol.status, sol.infeasibility
            )));
        }
        for i in 0..n {
            let u = ocp.inputs(&sol.x, i)[0];
            let u = cfg.limits.clamp_input(u);
            states[i] = step(&params[i], &states[i], &u, cfg.dt);
            u_prev[i] = u;
            traj[i].inputs.push(u);
            traj[i].states.push(states[i]);
        }
        previous = Some(sol);
    }
    report.seconds = start.elapsed().as_secs_f64();

    let trajectory = FleetTrajectory {
        rho: cfg.rho,
        d_min: cfg.d_min,
        dt: cfg.dt,
        initial: req.initial.clone(),
        target: req.target.clone(),
        obstacles: req.obstacles.clone(),
        vehicles: traj,
    };
    let audit = trajectory.audit(cfg.d_min)?;
    if let Some(v) = audit.violations.first() {
        return Err(Error::Infeasible(format!(
            "closed loop violates separation at t = {} between {:?}: {:.5} m",
            v.t, v.pair, v.dist
        )));
    }
    Ok(PlanOutcome { trajectory, report })
}
