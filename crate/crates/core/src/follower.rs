//! Per-vehicle MPC path follower tracking a stored maneuver.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dynamics::{step, wrap_angle, ControlInput, Limits, VehicleParams, VehicleState};
use crate::error::{Error, Result};
use crate::nlp::{IpmOptions, IpmSolver, NlpSolution};
use crate::ocp::{Ocp, OcpData, OcpVehicle, Weights};
use crate::geometry::Polytope;
use crate::planner::{audit_states, solve_step, FleetTrajectory, PlanReport, VehicleTrajectory};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FollowerConfig {
    pub horizon: usize,
    pub dt: f64,
    pub weights: Weights,
    pub limits: Limits,
    pub kkt_tol: f64,
    pub max_iter: usize,
}

impl Default for FollowerConfig {
    fn default() -> Self {
        FollowerConfig {
            horizon: 10,
            dt: 0.02,
            weights: Weights { qz: [30.0, 30.0, 10.0, 0.3], qu: [0.1, 1.0], qdu: [0.1, 1.0] },
            limits: Limits::default(),
            kkt_tol: 1e-8,
            max_iter: 500,
        }
    }
}

impl FollowerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::InvalidParams("follower horizon must be positive".into()));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParams(format!("follower dt must be positive, got {}", self.dt)));
        }
        if !self.weights.is_valid() {
            return Err(Error::InvalidParams("weights must be finite and non-negative".into()));
        }
        self.limits.validate()
    }

    /// Same prediction time at a different sampling period.
    pub fn at_rate(&self, hz: f64) -> FollowerConfig {
        let dt = 1.0 / hz;
        let horizon = ((self.horizon as f64 * self.dt / dt).round() as usize).max(1);
        FollowerConfig { dt, horizon, ..self.clone() }
    }
}

/// Target samples `t..=t + n`; past the end the last sample keeps moving
/// along its heading at its speed.
pub fn target_window(target: &[VehicleState], t: usize, n: usize, dt: f64) -> Vec<VehicleState> {
    let last = target.len() - 1;
    (t..=t + n)
        .map(|k| {
            if k <= last {
                target[k]
            } else {
                let z = target[last];
                let s = (k - last) as f64 * z.v * dt;
                VehicleState { x: z.x + s * z.psi.cos(), y: z.y + s * z.psi.sin(), ..z }
            }
        })
        .collect()
}

/// Resamples a trajectory from period `dt_from` to `dt_to` by linear
/// interpolation (shortest-arc for the heading).
pub fn resample(states: &[VehicleState], dt_from: f64, dt_to: f64) -> Vec<VehicleState> {
    if states.is_empty() {
        return Vec::new();
    }
    let span = (states.len() - 1) as f64 * dt_from;
    let n = (span / dt_to + 1e-9).floor() as usize;
    (0..=n)
        .map(|k| {
            let s = k as f64 * dt_to / dt_from;
            let i = (s.floor() as usize).min(states.len() - 1);
            if i + 1 >= states.len() {
                return states[i];
            }
            let f = s - i as f64;
            let (a, b) = (states[i], states[i + 1]);
            VehicleState {
                x: a.x + f * (b.x - a.x),
                y: a.y + f * (b.y - a.y),
                psi: wrap_angle(a.psi + f * wrap_angle(b.psi - a.psi)),
                v: a.v + f * (b.v - a.v),
            }
        })
        .collect()
}

/// Stateful follower: keeps the previous solution for warm starts.
pub struct Follower {
    pub cfg: FollowerConfig,
    pub params: VehicleParams,
    solver: IpmSolver,
    previous: Option<NlpSolution>,
    report: PlanReport,
}

impl Follower {
    pub fn new(params: VehicleParams, cfg: FollowerConfig) -> Result<Self> {
        cfg.validate()?;
        params.validate()?;
        let solver = IpmSolver::new(IpmOptions {
            tol: cfg.kkt_tol,
            acceptable_tol: (100.0 * cfg.kkt_tol).min(1e-4),
            max_iter: cfg.max_iter,
            ..IpmOptions::default()
        });
        Ok(Follower { cfg, params, solver, previous: None, report: PlanReport::default() })
    }

    /// First optimal input for tracking `window` (`N + 1` target samples,
    /// `window[0]` aligned with `z`).
    pub fn step(&mut self, z: &VehicleState, u_prev: &ControlInput, window: &[VehicleState]) -> Result<ControlInput> {
        let n = self.cfg.horizon;
        if window.len() != n + 1 {
            return Err(Error::InvalidParams(format!("target window has {} samples, expected {}", window.len(), n + 1)));
        }
        let ocp = Ocp::new(OcpData {
            vehicles: vec![OcpVehicle { params: self.params, z0: *z, u_prev: *u_prev, refs: window.to_vec() }],
            obstacles: Vec::new(),
            horizon: n,
            dt: self.cfg.dt,
            d_min: 0.0,
            limits: self.cfg.limits.clone(),
            weights: self.cfg.weights.clone(),
            vehicle_avoidance: false,
        });
        let sol = solve_step(&mut self.solver, &ocp, self.previous.as_ref(), &mut self.report);
        if !sol.status.is_success() {
            self.previous = None;
            return Err(Error::Numerical(format!("{:?}", sol.status)));
        }
        let u = ocp.inputs(&sol.x, 0)[0];
        self.previous = Some(sol);
        Ok(self.cfg.limits.clamp_input(u))
    }

    pub fn reset(&mut self) {
        self.previous = None;
    }
}

/// One-shot tracking solve without warm start.
pub fn follow_step(
    z: &VehicleState,
    u_prev: &ControlInput,
    window: &[VehicleState],
    params: &VehicleParams,
    cfg: &FollowerConfig,
) -> Result<ControlInput> {
    Follower::new(*params, cfg.clone())?.step(z, u_prev, window)
}

/// Executed closed-loop run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FollowTrace {
    pub states: Vec<VehicleState>,
    pub inputs: Vec<ControlInput>,
    /// Wall-clock seconds per control step.
    pub solve_seconds: Vec<f64>,
}

impl FollowTrace {
    /// Largest planar distance to `target` over the common span.
    pub fn max_position_error(&self, target: &[VehicleState]) -> f64 {
        self.states.iter().zip(target).map(|(a, b)| (a.x - b.x).hypot(a.y - b.y)).fold(0.0, f64::max)
    }

    pub fn mean_solve_seconds(&self) -> f64 {
        if self.solve_seconds.is_empty() {
            0.0
        } else {
            self.solve_seconds.iter().sum::<f64>() / self.solve_seconds.len() as f64
        }
    }

    pub fn max_solve_seconds(&self) -> f64 {
        self.solve_seconds.iter().copied().fold(0.0, f64::max)
    }
}

/// Tracks `target` (sampled at `cfg.dt`) from `z0` with the model as plant.
pub fn follow_run(
    z0: VehicleState,
    u0: ControlInput,
    target: &[VehicleState],
    params: &VehicleParams,
    cfg: &FollowerConfig,
) -> Result<FollowTrace> {
    let mut trace = FollowTrace::default();
    if target.is_empty() {
        return Ok(trace);
    }
    let mut f = Follower::new(*params, cfg.clone())?;
    let mut z = z0;
    let mut u = u0;
    trace.states.push(z);
    for t in 0..target.len() - 1 {
        let window = target_window(target, t, cfg.horizon, cfg.dt);
        let clock = Instant::now();
        u = f.step(&z, &u, &window).map_err(|e| Error::Follower { step: t, reason: e.to_string() })?;
        trace.solve_seconds.push(clock.elapsed().as_secs_f64());
        z = step(params, &z, &u, cfg.dt);
        trace.states.push(z);
        trace.inputs.push(u);
    }
    Ok(trace)
}

/// Closed-loop execution of a whole stored maneuver, one independent
/// follower per vehicle.
#[derive(Debug, Clone, PartialEq)]
pub struct FleetRun {
    pub dt: f64,
    /// Executed trajectories in the maneuver's vehicle order.
    pub vehicles: Vec<VehicleTrajectory>,
    /// Resampled targets, same order.
    pub targets: Vec<Vec<VehicleState>>,
    pub solve_seconds: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub min_vehicle_distance: f64,
    pub min_obstacle_distance: Option<f64>,
    pub max_tracking_error: f64,
    /// First time from which every vehicle stays within 0.1 m of its final
    /// target lane position; `None` when that never happens.
    pub completion_time: Option<f64>,
    pub violations: usize,
}

pub fn follow_maneuver(traj: &FleetTrajectory, cfg: &FollowerConfig) -> Result<FleetRun> {
    let mut run = FleetRun { dt: cfg.dt, vehicles: Vec::new(), targets: Vec::new(), solve_seconds: Vec::new() };
    for v in &traj.vehicles {
        let target = resample(&v.states, traj.dt, cfg.dt);
        let u0 = ControlInput::ZERO;
        let tr = follow_run(target[0], u0, &target, &v.params, cfg)
            .map_err(|e| match e {
                Error::Follower { step, reason } => Error::Follower { step, reason: format!("vehicle {}: {reason}", v.vehicle_id) },
                e => e,
            })?;
        run.vehicles.push(VehicleTrajectory { vehicle_id: v.vehicle_id, params: v.params, states: tr.states, inputs: tr.inputs });
        run.targets.push(target);
        run.solve_seconds.push(tr.solve_seconds);
    }
    Ok(run)
}

impl FleetRun {
    pub fn summary(&self, obstacles: &[Polytope], d_min: f64) -> Result<RunSummary> {
        let audit = audit_states(
            &self.vehicles.iter().map(|v| (v.vehicle_id, v.params, v.states.as_slice())).collect::<Vec<_>>(),
            obstacles,
            d_min,
        )?;
        let max_tracking_error = self
            .vehicles
            .iter()
            .zip(&self.targets)
            .flat_map(|(v, t)| v.states.iter().zip(t).map(|(a, b)| (a.x - b.x).hypot(a.y - b.y)))
            .fold(0.0, f64::max);
        let steps = self.vehicles.iter().map(|v| v.states.len()).min().unwrap_or(0);
        let settled = |k: usize| {
            self.vehicles.iter().zip(&self.targets).all(|(v, t)| (v.states[k].y - t.last().unwrap().y).abs() <= 0.1)
        };
        let mut completion_time = None;
        for k in (0..steps).rev() {
            if !settled(k) {
                break;
            }
            completion_time = Some(k as f64 * self.dt);
        }
        Ok(RunSummary {
            min_vehicle_distance: audit.min_vehicle_distance,
            min_obstacle_distance: audit.min_obstacle_distance.is_finite().then_some(audit.min_obstacle_distance),
            max_tracking_error,
            completion_time,
            violations: audit.violations.len(),
        })
    }
}
