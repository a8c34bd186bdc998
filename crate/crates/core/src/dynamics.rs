//! Kinematic bicycle model and the bounds that apply to it.
//!
//! States are `[x, y, psi, v]` about the centre of gravity, inputs are
//! `[a, delta]`. The discrete model is a single forward-Euler step of the
//! continuous equations, with the side slip angle evaluated at the current
//! steering input.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleParams {
    /// Body length in metres.
    pub len: f64,
    /// Body width in metres.
    pub w: f64,
    /// Centre of gravity to front axle.
    pub lf: f64,
    /// Centre of gravity to rear axle.
    pub lr: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        VehicleParams { len: 4.5, w: 1.8, lf: 1.35, lr: 1.35 }
    }
}

impl VehicleParams {
    pub fn new(len: f64, w: f64, lf: f64, lr: f64) -> Result<Self> {
        let params = VehicleParams { len, w, lf, lr };
        params.validate()?;
        Ok(params)
    }

    /// Symmetric centre of gravity with the axles splitting the wheelbase.
    pub fn with_dimensions(len: f64, w: f64) -> Result<Self> {
        let d = VehicleParams::default();
        let scale = len / d.len;
        Self::new(len, w, d.lf * scale, d.lr * scale)
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [self.len, self.w, self.lf, self.lr];
        if fields.iter().any(|f| !f.is_finite() || *f <= 0.0) {
            return Err(Error::InvalidParams(format!(
                "all dimensions must be finite and positive, got {self:?}"
            )));
        }
        if self.lf + self.lr > self.len + 1e-12 {
            return Err(Error::InvalidParams(format!(
                "wheelbase {} exceeds body length {}",
                self.lf + self.lr,
                self.len
            )));
        }
        Ok(())
    }

    pub fn wheelbase(&self) -> f64 {
        self.lf + self.lr
    }

    /// Half extents used by the footprint: `[len/2, w/2, len/2, w/2]`.
    pub fn half_extents(&self) -> [f64; 4] {
        [self.len / 2.0, self.w / 2.0, self.len / 2.0, self.w / 2.0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VehicleState {
    pub x: f64,
    pub y: f64,
    pub psi: f64,
    pub v: f64,
}

impl VehicleState {
    pub const fn new(x: f64, y: f64, psi: f64, v: f64) -> Self {
        VehicleState { x, y, psi, v }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.x, self.y, self.psi, self.v]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        VehicleState { x: a[0], y: a[1], psi: a[2], v: a[3] }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|c| c.is_finite())
    }

    pub fn position(&self) -> [f64; 2] {
        [self.x, self.y]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlInput {
    pub a: f64,
    pub delta: f64,
}

impl ControlInput {
    pub const ZERO: ControlInput = ControlInput { a: 0.0, delta: 0.0 };

    pub const fn new(a: f64, delta: f64) -> Self {
        ControlInput { a, delta }
    }

    pub fn to_array(self) -> [f64; 2] {
        [self.a, self.delta]
    }

    pub fn from_array(a: [f64; 2]) -> Self {
        ControlInput { a: a[0], delta: a[1] }
    }
}

/// State, input and input-rate bounds. `None` means unbounded on that side.
///
/// Rates are stored per second and converted to per-step bounds with
/// [`Limits::rate_per_step`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Limits {
    pub z_min: [Option<f64>; 4],
    pub z_max: [Option<f64>; 4],
    pub u_min: [f64; 2],
    pub u_max: [f64; 2],
    pub du_min_per_s: [f64; 2],
    pub du_max_per_s: [f64; 2],
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            z_min: [None, None, None, Some(0.0)],
            z_max: [None, None, None, None],
            u_min: [-4.0, -0.3],
            u_max: [4.0, 0.3],
            du_min_per_s: [-1.0, -0.2],
            du_max_per_s: [1.0, 0.2],
        }
    }
}

impl Limits {
    pub fn validate(&self) -> Result<()> {
        for k in 0..4 {
            if let (Some(lo), Some(hi)) = (self.z_min[k], self.z_max[k]) {
                if lo > hi {
                    return Err(Error::InvalidLimits(format!("state bound {k}: {lo} > {hi}")));
                }
            }
        }
        for k in 0..2 {
            if self.u_min[k] > self.u_max[k] {
                return Err(Error::InvalidLimits(format!("input bound {k} is empty")));
            }
            if self.du_min_per_s[k] > self.du_max_per_s[k] {
                return Err(Error::InvalidLimits(format!("rate bound {k} is empty")));
            }
            if self.du_min_per_s[k] > 0.0 || self.du_max_per_s[k] < 0.0 {
                return Err(Error::InvalidLimits(format!(
                    "rate bound {k} must contain zero"
                )));
            }
        }
        Ok(())
    }

    /// Per-step rate bounds `(min, max)` for sampling time `dt`.
    pub fn rate_per_step(&self, dt: f64) -> ([f64; 2], [f64; 2]) {
        (
            [self.du_min_per_s[0] * dt, self.du_min_per_s[1] * dt],
            [self.du_max_per_s[0] * dt, self.du_max_per_s[1] * dt],
        )
    }

    pub fn clamp_input(&self, u: ControlInput) -> ControlInput {
        ControlInput {
            a: u.a.clamp(self.u_min[0], self.u_max[0]),
            delta: u.delta.clamp(self.u_min[1], self.u_max[1]),
        }
    }

    /// Whether `u` respects the box and, relative to `prev`, the rate bounds.
    pub fn admits(&self, prev: ControlInput, u: ControlInput, dt: f64, tol: f64) -> bool {
        let (rmin, rmax) = self.rate_per_step(dt);
        let cur = u.to_array();
        let old = prev.to_array();
        (0..2).all(|k| {
            cur[k] >= self.u_min[k] - tol
                && cur[k] <= self.u_max[k] + tol
                && cur[k] - old[k] >= rmin[k] - tol
                && cur[k] - old[k] <= rmax[k] + tol
        })
    }
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut r = a % (2.0 * PI);
    if r <= -PI {
        r += 2.0 * PI;
    } else if r > PI {
        r -= 2.0 * PI;
    }
    r
}

/// Side slip angle at the centre of gravity for steering angle `delta`.
pub fn side_slip(params: &VehicleParams, delta: f64) -> f64 {
    (delta.tan() * params.lr / params.wheelbase()).atan()
}

/// Continuous-time state derivative.
pub fn derivative(params: &VehicleParams, z: &VehicleState, u: &ControlInput) -> [f64; 4] {
    let beta = side_slip(params, u.delta);
    [
        z.v * (z.psi + beta).cos(),
        z.v * (z.psi + beta).sin(),
        z.v * beta.cos() * u.delta.tan() / params.wheelbase(),
        u.a,
    ]
}

/// One forward-Euler step. The returned heading is wrapped into `(-pi, pi]`.
pub fn step(params: &VehicleParams, z: &VehicleState, u: &ControlInput, dt: f64) -> VehicleState {
    let mut next = step_unwrapped(params, z, u, dt);
    next.psi = wrap_angle(next.psi);
    next
}

/// Euler step without heading wrap; this is exactly the map used as the
/// equality constraint inside the optimisers.
pub fn step_unwrapped(
    params: &VehicleParams,
    z: &VehicleState,
    u: &ControlInput,
    dt: f64,
) -> VehicleState {
    let d = derivative(params, z, u);
    VehicleState {
        x: z.x + dt * d[0],
        y: z.y + dt * d[1],
        psi: z.psi + dt * d[2],
        v: z.v + dt * d[3],
    }
}

/// Applies `inputs` from `z0`, returning `inputs.len() + 1` states.
pub fn rollout(
    params: &VehicleParams,
    z0: VehicleState,
    inputs: &[ControlInput],
    dt: f64,
) -> Vec<VehicleState> {
    let mut states = Vec::with_capacity(inputs.len() + 1);
    states.push(z0);
    let mut z = z0;
    for u in inputs {
        z = step(params, &z, u, dt);
        states.push(z);
    }
    states
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params() -> VehicleParams {
        VehicleParams::new(4.5, 1.8, 1.1, 1.6).unwrap()
    }

    fn rk4(params: &VehicleParams, z: VehicleState, u: ControlInput, dt: f64, n: usize) -> VehicleState {
        let h = dt / n as f64;
        let add = |z: &VehicleState, d: [f64; 4], s: f64| VehicleState {
            x: z.x + s * d[0],
            y: z.y + s * d[1],
            psi: z.psi + s * d[2],
            v: z.v + s * d[3],
        };
        let mut z = z;
        for _ in 0..n {
            let k1 = derivative(params, &z, &u);
            let k2 = derivative(params, &add(&z, k1, h / 2.0), &u);
            let k3 = derivative(params, &add(&z, k2, h / 2.0), &u);
            let k4 = derivative(params, &add(&z, k3, h), &u);
            let mut d = [0.0; 4];
            for i in 0..4 {
                d[i] = (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) / 6.0;
            }
            z = add(&z, d, h);
        }
        z
    }

    #[test]
    fn side_slip_values() {
        let sym = VehicleParams::default();
        assert_eq!(side_slip(&sym, 0.0), 0.0);
        let beta = side_slip(&params(), 0.3);
        assert!((beta - 0.1813).abs() < 5e-5, "{beta}");
        // bisection on tan(beta) = tan(delta) * lr / L as an independent check
        let target = 0.3f64.tan() * 1.6 / 2.7;
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if mid.tan() < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((beta - lo).abs() < 1e-12);
        assert_eq!(side_slip(&params(), -0.2), -side_slip(&params(), 0.2));
    }

    #[test]
    fn straight_steps() {
        let p = VehicleParams::default();
        let z = VehicleState::new(0.0, 0.0, 0.0, 10.0);
        assert_eq!(step(&p, &z, &ControlInput::ZERO, 0.2), VehicleState::new(2.0, 0.0, 0.0, 10.0));
        let n = step(&p, &z, &ControlInput::new(1.0, 0.0), 0.2);
        assert_eq!(n.x, 2.0);
        assert!((n.v - 10.2).abs() < 1e-15);
    }

    #[test]
    fn steering_step_matches_formula_and_rk4() {
        let p = params();
        let z = VehicleState::new(0.0, 0.0, 0.0, 10.0);
        let u = ControlInput::new(0.0, 0.1);
        let n = step(&p, &z, &u, 0.1);
        let beta = side_slip(&p, 0.1);
        assert!((n.x - 10.0 * beta.cos() * 0.1).abs() < 1e-15);
        assert!((n.y - 10.0 * beta.sin() * 0.1).abs() < 1e-15);
        assert!((n.psi - 0.1 * 10.0 * beta.cos() * 0.1f64.tan() / 2.7).abs() < 1e-15);
        assert_eq!(n.v, 10.0);
        let fine = rk4(&p, z, u, 0.1, 100);
        // position error relative to the distance travelled in the step
        let travelled = fine.x.hypot(fine.y);
        assert!((n.x - fine.x).hypot(n.y - fine.y) <= 0.02 * travelled);
        assert!((n.psi - fine.psi).abs() <= 0.02 * fine.psi.abs());
    }

    #[test]
    fn heading_wraps() {
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
        assert_eq!(wrap_angle(PI), PI);
        assert_eq!(wrap_angle(-PI), PI);
        let p = VehicleParams::default();
        let z = VehicleState::new(0.0, 0.0, PI - 0.01, 20.0);
        let n = step(&p, &z, &ControlInput::new(0.0, 0.3), 0.2);
        assert!(n.psi > -PI && n.psi <= PI);
    }

    #[test]
    fn euler_is_first_order() {
        // Euler(dt) vs Euler(dt/10) over a fixed horizon scales linearly in dt.
        let p = VehicleParams::default();
        let z0 = VehicleState::new(0.0, 1.85, 0.0, 15.0);
        let input = |t: f64| ControlInput::new((0.7 * t).sin(), 0.05 * (0.5 * t).cos());
        let horizon = 4.0;
        let err = |dt: f64| {
            let run = |h: f64| {
                let n = (horizon / h).round() as usize;
                let mut z = z0;
                for k in 0..n {
                    z = step_unwrapped(&p, &z, &input(k as f64 * h), h);
                }
                z
            };
            let a = run(dt);
            let b = run(dt / 10.0);
            a.to_array().iter().zip(b.to_array()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
        };
        let (e1, e2, e3) = (err(0.2), err(0.1), err(0.05));
        let c = e1 / 0.2;
        assert!(e2 <= c * 0.1 * 1.2 && e3 <= c * 0.05 * 1.2, "{e1} {e2} {e3}");
    }

    #[test]
    fn rejects_bad_params() {
        assert!(VehicleParams::new(4.5, 1.8, 3.0, 2.0).is_err());
        assert!(VehicleParams::new(-1.0, 1.8, 0.1, 0.1).is_err());
        assert!(VehicleParams::new(4.5, 1.8, 2.25, 2.25).is_ok());
    }

    #[test]
    fn default_limits_scale_by_dt() {
        let l = Limits::default();
        l.validate().unwrap();
        let (lo, hi) = l.rate_per_step(0.2);
        assert!((lo[0] + 0.2).abs() < 1e-15 && (hi[1] - 0.04).abs() < 1e-15);
        assert!(l.admits(ControlInput::ZERO, ControlInput::new(0.2, 0.04), 0.2, 1e-12));
        assert!(!l.admits(ControlInput::ZERO, ControlInput::new(0.3, 0.0), 0.2, 1e-12));
    }

    proptest! {
        #[test]
        fn coasting_keeps_lateral_and_speed(v in 0.0f64..40.0, y in -5.0f64..5.0, steps in 1usize..50) {
            let p = VehicleParams::default();
            let mut z = VehicleState::new(0.0, y, 0.0, v);
            for k in 0..steps {
                let n = step(&p, &z, &ControlInput::ZERO, 0.1);
                prop_assert_eq!(n.y, y);
                prop_assert_eq!(n.v, v);
                prop_assert!((n.x - (z.x + v * 0.1)).abs() < 1e-12 * (1.0 + k as f64));
                z = n;
            }
        }

        #[test]
        fn side_slip_odd_and_monotone(d1 in -1.5f64..1.5, d2 in -1.5f64..1.5) {
            let p = params();
            prop_assert_eq!(side_slip(&p, -d1), -side_slip(&p, d1));
            if d1 < d2 {
                prop_assert!(side_slip(&p, d1) < side_slip(&p, d2));
            }
        }

        #[test]
        fn step_is_pure(x in -100.0f64..100.0, psi in -3.0f64..3.0, v in 0.0f64..30.0, a in -4.0f64..4.0, d in -0.3f64..0.3) {
            let p = params();
            let z = VehicleState::new(x, 1.0, psi, v);
            let u = ControlInput::new(a, d);
            let n1 = step(&p, &z, &u, 0.2);
            let n2 = step(&p, &z, &u, 0.2);
            prop_assert_eq!(n1.to_array().map(f64::to_bits), n2.to_array().map(f64::to_bits));
        }
    }
}
