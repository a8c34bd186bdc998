//! Finite-horizon optimal control problem in multiple-shooting form, with
//! dual-reformulated footprint separation constraints between vehicle pairs
//! and between vehicles and static obstacles.
//!
//! Variables, per vehicle: `[u_0, z_1, u_1, z_2, ..., u_{N-1}, z_N]`, followed
//! by one `(lambda, mu, s)` block per unordered vehicle pair and step
//! `k = 0..=N`, then one block per (vehicle, obstacle, step).

use serde::{Deserialize, Serialize};

use crate::dynamics::{side_slip, step, step_unwrapped, ControlInput, Limits, VehicleParams, VehicleState};
use crate::geometry::{footprint, optimal_certificate, DualCertificate, Polytope};
use crate::nlp::{Nlp, NlpSolution};

/// Diagonal weights; the objective uses `||diag(q) e||^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub qz: [f64; 4],
    pub qu: [f64; 2],
    pub qdu: [f64; 2],
}

impl Default for Weights {
    fn default() -> Self {
        Weights { qz: [2.0, 2.0, 10.0, 1.0], qu: [1.0, 10.0], qdu: [1.0, 10.0] }
    }
}

impl Weights {
    pub fn is_valid(&self) -> bool {
        self.qz.iter().chain(&self.qu).chain(&self.qdu).all(|w| w.is_finite() && *w >= 0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OcpVehicle {
    pub params: VehicleParams,
    pub z0: VehicleState,
    /// Input applied at the previous step (rate constraint baseline).
    pub u_prev: ControlInput,
    /// References for `k = 0..=N`; entry 0 is not penalised.
    pub refs: Vec<VehicleState>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OcpData {
    pub vehicles: Vec<OcpVehicle>,
    pub obstacles: Vec<Polytope>,
    pub horizon: usize,
    pub dt: f64,
    pub d_min: f64,
    pub limits: Limits,
    pub weights: Weights,
    /// Whether separation between vehicles is constrained.
    pub vehicle_avoidance: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Slot {
    Var(usize),
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    Dynamics { vehicle: usize },
    Rate,
    VehiclePair { i: usize, j: usize },
    Obstacle { vehicle: usize, obstacle: usize },
}

#[derive(Debug, Clone)]
struct Block {
    kind: Kind,
    locals: Vec<Slot>,
    row: usize,
    /// Constraint stream (same kind and participants) and step within it.
    stream: usize,
    k: usize,
}

/// Objective term `w (x[a] - x[b])^2` or `w (x[a] - c)^2`.
#[derive(Debug, Clone, Copy)]
enum Term {
    Target { a: usize, target: f64, w: f64 },
    Diff { a: usize, b: usize, w: f64 },
}

/// Transcribed problem implementing [`Nlp`].
#[derive(Debug, Clone)]
pub struct Ocp {
    data: OcpData,
    pairs: Vec<(usize, usize)>,
    n_vars: usize,
    n_rows: usize,
    pair_base: usize,
    obst_base: usize,
    blocks: Vec<Block>,
    terms: Vec<Term>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    row_lower: Vec<f64>,
    row_upper: Vec<f64>,
    jac_pattern: Vec<(usize, usize)>,
    hess_pattern: Vec<(usize, usize)>,
}

const DUAL_PAIR: usize = 10;

// local layout of the pair block
const PI_X: usize = 0;
const PJ_X: usize = 3;
const P_LAM: usize = 6;
const P_MU: usize = 10;
const P_S: usize = 14;

fn dyn_jac_pattern() -> &'static [(usize, usize)] {
    // locals: 0 x, 1 y, 2 psi, 3 v, 4 a, 5 delta, 6 x', 7 y', 8 psi', 9 v'
    &[
        (0, 0), (0, 2), (0, 3), (0, 5), (0, 6),
        (1, 1), (1, 2), (1, 3), (1, 5), (1, 7),
        (2, 2), (2, 3), (2, 5), (2, 8),
        (3, 3), (3, 4), (3, 9),
    ]
}

fn dyn_hess_pattern() -> &'static [(usize, usize)] {
    &[(2, 2), (3, 2), (5, 2), (5, 3), (5, 5)]
}

/// Derivatives of the side slip angle: `(beta, beta', beta'')`.
fn slip_derivatives(params: &VehicleParams, delta: f64) -> (f64, f64, f64) {
    let kappa = params.lr / params.wheelbase();
    let t = delta.tan();
    let t1 = 1.0 + t * t;
    let den = 1.0 + kappa * kappa * t * t;
    let beta = side_slip(params, delta);
    let b1 = kappa * t1 / den;
    let b2 = 2.0 * kappa * t * t1 * (1.0 - kappa * kappa) / (den * den);
    (beta, b1, b2)
}

/// Jacobian and lower Hessian of `F = lambda^T b(z)` in locals
/// `(x, y, psi, l1, l2, l3, l4)`.
struct FootprintTerms {
    value: f64,
    grad: [f64; 7],
    /// `(a, b, value)` with `a >= b`
    hess: [(usize, usize, f64); 15],
    /// `A^T lambda` and its partials w.r.t. psi and lambda
    normal: [f64; 2],
    normal_grad: [[f64; 5]; 2],
    /// second partials of `A^T lambda`: `(psi,psi)` then `(l_k, psi)`
    normal_hess: [[f64; 5]; 2],
}

fn footprint_terms(h: [f64; 4], x: f64, y: f64, psi: f64, lam: &[f64]) -> FootprintTerms {
    let (s, c) = psi.sin_cos();
    let q1 = c * x + s * y;
    let q2 = -s * x + c * y;
    let l1 = lam[0] - lam[2];
    let l2 = lam[1] - lam[3];
    let value = h[0] * lam[0] + h[1] * lam[1] + h[2] * lam[2] + h[3] * lam[3] + l1 * q1 + l2 * q2;
    let fx = l1 * c - l2 * s;
    let fy = l1 * s + l2 * c;
    let grad = [fx, fy, l1 * q2 - l2 * q1, h[0] + q1, h[1] + q2, h[2] - q1, h[3] - q2];
    let hess = [
        (2, 0, -l1 * s - l2 * c),
        (2, 1, l1 * c - l2 * s),
        (2, 2, -l1 * q1 - l2 * q2),
        (3, 0, c),
        (4, 0, -s),
        (5, 0, -c),
        (6, 0, s),
        (3, 1, s),
        (4, 1, c),
        (5, 1, -s),
        (6, 1, -c),
        (3, 2, q2),
        (4, 2, -q1),
        (5, 2, -q2),
        (6, 2, q1),
    ];
    FootprintTerms {
        value,
        grad,
        hess,
        normal: [fx, fy],
        normal_grad: [[-l1 * s - l2 * c, c, -s, -c, s], [l1 * c - l2 * s, s, c, -s, -c]],
        normal_hess: [[-l1 * c + l2 * s, -s, -c, s, c], [-l1 * s - l2 * c, c, -s, -c, s]],
    }
}

impl Ocp {
    pub fn new(data: OcpData) -> Self {
        let n = data.horizon;
        let nveh = data.vehicles.len();
        assert!(n >= 1, "horizon must be positive");
        for v in &data.vehicles {
            assert_eq!(v.refs.len(), n + 1, "reference must cover the horizon");
        }
        let pairs: Vec<(usize, usize)> = if data.vehicle_avoidance {
            (0..nveh).flat_map(|i| (i + 1..nveh).map(move |j| (i, j))).collect()
        } else {
            Vec::new()
        };
        let pair_base = nveh * 6 * n;
        let obst_base = pair_base + pairs.len() * (n + 1) * DUAL_PAIR;
        let obst_sizes: Vec<usize> = data.obstacles.iter().map(|o| 4 + o.n_facets() + 2).collect();
        let per_vehicle_obst: usize = obst_sizes.iter().sum::<usize>() * (n + 1);
        let n_vars = obst_base + nveh * per_vehicle_obst;

        let mut ocp = Ocp {
            pairs,
            n_vars,
            n_rows: 0,
            pair_base,
            obst_base,
            blocks: Vec::new(),
            terms: Vec::new(),
            lower: vec![f64::NEG_INFINITY; n_vars],
            upper: vec![f64::INFINITY; n_vars],
            row_lower: Vec::new(),
            row_upper: Vec::new(),
            jac_pattern: Vec::new(),
            hess_pattern: Vec::new(),
            data,
        };
        ocp.build();
        ocp
    }

    pub fn data(&self) -> &OcpData {
        &self.data
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn u_index(&self, i: usize, k: usize) -> usize {
        i * 6 * self.data.horizon + 6 * k
    }

    /// Index of `z_k` for `k >= 1`.
    pub fn z_index(&self, i: usize, k: usize) -> usize {
        debug_assert!(k >= 1);
        i * 6 * self.data.horizon + 6 * (k - 1) + 2
    }

    pub fn pair_index(&self, p: usize, k: usize) -> usize {
        self.pair_base + (p * (self.data.horizon + 1) + k) * DUAL_PAIR
    }

    fn obstacle_block_size(&self, o: usize) -> usize {
        4 + self.data.obstacles[o].n_facets() + 2
    }

    pub fn obstacle_index(&self, i: usize, o: usize, k: usize) -> usize {
        let n1 = self.data.horizon + 1;
        let per_vehicle: usize = (0..self.data.obstacles.len()).map(|q| self.obstacle_block_size(q)).sum::<usize>() * n1;
        let before: usize = (0..o).map(|q| self.obstacle_block_size(q)).sum::<usize>() * n1;
        self.obst_base + i * per_vehicle + before + k * self.obstacle_block_size(o)
    }

    fn state_slots(&self, i: usize, k: usize) -> [Slot; 4] {
        if k == 0 {
            let z = self.data.vehicles[i].z0.to_array();
            [Slot::Fixed(z[0]), Slot::Fixed(z[1]), Slot::Fixed(z[2]), Slot::Fixed(z[3])]
        } else {
            let b = self.z_index(i, k);
            [Slot::Var(b), Slot::Var(b + 1), Slot::Var(b + 2), Slot::Var(b + 3)]
        }
    }

    fn build(&mut self) {
        let d = self.data.clone();
        let n = d.horizon;
        let (rmin, rmax) = d.limits.rate_per_step(d.dt);
        let mut row = 0;
        let mut blocks = Vec::new();
        let (mut rl, mut ru) = (Vec::new(), Vec::new());

        for (i, veh) in d.vehicles.iter().enumerate() {
            for k in 0..n {
                let u = self.u_index(i, k);
                for c in 0..2 {
                    let (mut lo, mut hi) = (d.limits.u_min[c], d.limits.u_max[c]);
                    if k == 0 {
                        let prev = veh.u_prev.to_array()[c];
                        lo = lo.max(prev + rmin[c]);
                        hi = hi.min(prev + rmax[c]);
                        if lo > hi {
                            let mid = 0.5 * (lo + hi);
                            lo = mid;
                            hi = mid;
                        }
                    }
                    self.lower[u + c] = lo;
                    self.upper[u + c] = hi;
                }
                let z = self.z_index(i, k + 1);
                for c in 0..4 {
                    self.lower[z + c] = d.limits.z_min[c].unwrap_or(f64::NEG_INFINITY);
                    self.upper[z + c] = d.limits.z_max[c].unwrap_or(f64::INFINITY);
                }
                let mut locals: Vec<Slot> = self.state_slots(i, k).to_vec();
                locals.push(Slot::Var(u));
                locals.push(Slot::Var(u + 1));
                locals.extend(self.state_slots(i, k + 1));
                blocks.push(Block { kind: Kind::Dynamics { vehicle: i }, locals, row, stream: 2 * i, k });
                row += 4;
                rl.extend([0.0; 4]);
                ru.extend([0.0; 4]);
                if k >= 1 {
                    let up = self.u_index(i, k - 1);
                    let locals = vec![Slot::Var(up), Slot::Var(up + 1), Slot::Var(u), Slot::Var(u + 1)];
                    blocks.push(Block { kind: Kind::Rate, locals, row, stream: 2 * i + 1, k });
                    row += 2;
                    rl.extend(rmin);
                    ru.extend(rmax);
                }
            }
            // objective terms
            let q = |w: f64| w * w;
            for k in 0..n {
                let u = self.u_index(i, k);
                for c in 0..2 {
                    self.terms.push(Term::Target { a: u + c, target: 0.0, w: q(d.weights.qu[c]) });
                    if k == 0 {
                        let prev = veh.u_prev.to_array()[c];
                        self.terms.push(Term::Target { a: u + c, target: prev, w: q(d.weights.qdu[c]) });
                    } else {
                        let up = self.u_index(i, k - 1);
                        self.terms.push(Term::Diff { a: u + c, b: up + c, w: q(d.weights.qdu[c]) });
                    }
                }
                let z = self.z_index(i, k + 1);
                let r = veh.refs[k + 1].to_array();
                for c in 0..4 {
                    self.terms.push(Term::Target { a: z + c, target: r[c], w: q(d.weights.qz[c]) });
                }
            }
        }

        for (p, &(i, j)) in self.pairs.clone().iter().enumerate() {
            for k in 0..=n {
                let b = self.pair_index(p, k);
                let zi = self.state_slots(i, k);
                let zj = self.state_slots(j, k);
                let mut locals = vec![zi[0], zi[1], zi[2], zj[0], zj[1], zj[2]];
                locals.extend((0..DUAL_PAIR).map(|q| Slot::Var(b + q)));
                for q in 0..8 {
                    self.lower[b + q] = 0.0;
                }
                let stream = 2 * d.vehicles.len() + p;
                blocks.push(Block { kind: Kind::VehiclePair { i, j }, locals, row, stream, k });
                row += 6;
                rl.extend([d.d_min, 0.0, 0.0, 0.0, 0.0, f64::NEG_INFINITY]);
                ru.extend([f64::INFINITY, 0.0, 0.0, 0.0, 0.0, 1.0]);
            }
        }

        for i in 0..d.vehicles.len() {
            for (o, obs) in d.obstacles.iter().enumerate() {
                let m = obs.n_facets();
                for k in 0..=n {
                    let b = self.obstacle_index(i, o, k);
                    let zi = self.state_slots(i, k);
                    let mut locals = vec![zi[0], zi[1], zi[2]];
                    locals.extend((0..4 + m + 2).map(|q| Slot::Var(b + q)));
                    for q in 0..4 + m {
                        self.lower[b + q] = 0.0;
                    }
                    let stream = 2 * d.vehicles.len() + self.pairs.len() + i * d.obstacles.len() + o;
                    blocks.push(Block { kind: Kind::Obstacle { vehicle: i, obstacle: o }, locals, row, stream, k });
                    row += 6;
                    rl.extend([d.d_min, 0.0, 0.0, 0.0, 0.0, f64::NEG_INFINITY]);
                    ru.extend([f64::INFINITY, 0.0, 0.0, 0.0, 0.0, 1.0]);
                }
            }
        }

        self.n_rows = row;
        self.blocks = blocks;
        self.row_lower = rl;
        self.row_upper = ru;

        let mut jp = Vec::new();
        let mut hp = Vec::new();
        for blk in &self.blocks {
            for (r, l) in self.block_jac_pattern(blk) {
                if let Slot::Var(idx) = blk.locals[l] {
                    jp.push((blk.row + r, idx));
                }
            }
            for (a, b) in self.block_hess_pattern(blk) {
                if let (Slot::Var(ia), Slot::Var(ib)) = (blk.locals[a], blk.locals[b]) {
                    hp.push((ia.max(ib), ia.min(ib)));
                }
            }
        }
        for t in &self.terms {
            match *t {
                Term::Target { a, .. } => hp.push((a, a)),
                Term::Diff { a, b, .. } => {
                    hp.push((a, a));
                    hp.push((b, b));
                    hp.push((a.max(b), a.min(b)));
                }
            }
        }
        self.jac_pattern = jp;
        self.hess_pattern = hp;
    }

    fn obstacle_m(&self, blk: &Block) -> usize {
        match blk.kind {
            Kind::Obstacle { obstacle, .. } => self.data.obstacles[obstacle].n_facets(),
            _ => 0,
        }
    }

    fn block_jac_pattern(&self, blk: &Block) -> Vec<(usize, usize)> {
        match blk.kind {
            Kind::Dynamics { .. } => dyn_jac_pattern().to_vec(),
            Kind::Rate => vec![(0, 0), (0, 2), (1, 1), (1, 3)],
            Kind::VehiclePair { .. } => {
                let mut p = Vec::new();
                for l in 0..14 {
                    p.push((0, l));
                }
                for r in 0..2 {
                    p.push((1 + r, PI_X + 2));
                    p.extend((0..4).map(|q| (1 + r, P_LAM + q)));
                    p.push((1 + r, P_S + r));
                    p.push((3 + r, PJ_X + 2));
                    p.extend((0..4).map(|q| (3 + r, P_MU + q)));
                    p.push((3 + r, P_S + r));
                }
                p.push((5, P_S));
                p.push((5, P_S + 1));
                p
            }
            Kind::Obstacle { .. } => {
                let m = self.obstacle_m(blk);
                let (lam, mu, s) = (3, 7, 7 + m);
                let mut p: Vec<(usize, usize)> = (0..7 + m).map(|l| (0, l)).collect();
                for r in 0..2 {
                    p.push((1 + r, 2));
                    p.extend((0..4).map(|q| (1 + r, lam + q)));
                    p.push((1 + r, s + r));
                    p.extend((0..m).map(|q| (3 + r, mu + q)));
                    p.push((3 + r, s + r));
                }
                p.push((5, s));
                p.push((5, s + 1));
                p
            }
        }
    }

    fn block_hess_pattern(&self, blk: &Block) -> Vec<(usize, usize)> {
        let fp = |pos: usize, dual: usize| -> Vec<(usize, usize)> {
            let map = |l: usize| if l < 3 { pos + l } else { dual + l - 3 };
            footprint_terms([0.0; 4], 0.0, 0.0, 0.0, &[0.0; 4]).hess.iter().map(|&(a, b, _)| (map(a), map(b))).collect()
        };
        match blk.kind {
            Kind::Dynamics { .. } => dyn_hess_pattern().to_vec(),
            Kind::Rate => Vec::new(),
            Kind::VehiclePair { .. } => {
                let mut p = fp(PI_X, P_LAM);
                p.extend(fp(PJ_X, P_MU));
                p.push((P_S, P_S));
                p.push((P_S + 1, P_S + 1));
                p
            }
            Kind::Obstacle { .. } => {
                let m = self.obstacle_m(blk);
                let mut p = fp(0, 3);
                p.push((7 + m, 7 + m));
                p.push((8 + m, 8 + m));
                p
            }
        }
    }

    fn gather(blk: &Block, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(blk.locals.iter().map(|s| match *s {
            Slot::Var(i) => x[i],
            Slot::Fixed(v) => v,
        }));
    }

    fn block_eval(&self, blk: &Block, v: &[f64], out: &mut [f64]) {
        match blk.kind {
            Kind::Dynamics { vehicle } => {
                let p = &self.data.vehicles[vehicle].params;
                let z = VehicleState::new(v[0], v[1], v[2], v[3]);
                let u = ControlInput::new(v[4], v[5]);
                let dt = self.data.dt;
                let beta = side_slip(p, u.delta);
                out[0] = v[6] - v[0] - dt * z.v * (z.psi + beta).cos();
                out[1] = v[7] - v[1] - dt * z.v * (z.psi + beta).sin();
                out[2] = v[8] - v[2] - dt * z.v * beta.cos() * u.delta.tan() / p.wheelbase();
                out[3] = v[9] - v[3] - dt * u.a;
            }
            Kind::Rate => {
                out[0] = v[2] - v[0];
                out[1] = v[3] - v[1];
            }
            Kind::VehiclePair { i, j } => {
                let hi = self.data.vehicles[i].params.half_extents();
                let hj = self.data.vehicles[j].params.half_extents();
                let fi = footprint_terms(hi, v[0], v[1], v[2], &v[P_LAM..P_LAM + 4]);
                let fj = footprint_terms(hj, v[3], v[4], v[5], &v[P_MU..P_MU + 4]);
                let s = &v[P_S..P_S + 2];
                out[0] = -fi.value - fj.value;
                out[1] = fi.normal[0] + s[0];
                out[2] = fi.normal[1] + s[1];
                out[3] = fj.normal[0] - s[0];
                out[4] = fj.normal[1] - s[1];
                out[5] = s[0] * s[0] + s[1] * s[1];
            }
            Kind::Obstacle { vehicle, obstacle } => {
                let obs = &self.data.obstacles[obstacle];
                let m = obs.n_facets();
                let h = self.data.vehicles[vehicle].params.half_extents();
                let f = footprint_terms(h, v[0], v[1], v[2], &v[3..7]);
                let mu = &v[7..7 + m];
                let s = &v[7 + m..9 + m];
                let bm: f64 = obs.b().iter().zip(mu).map(|(b, m)| b * m).sum();
                let mut amu = [0.0; 2];
                for (a, m) in obs.a().iter().zip(mu) {
                    amu[0] += a[0] * m;
                    amu[1] += a[1] * m;
                }
                out[0] = -f.value - bm;
                out[1] = f.normal[0] + s[0];
                out[2] = f.normal[1] + s[1];
                out[3] = amu[0] - s[0];
                out[4] = amu[1] - s[1];
                out[5] = s[0] * s[0] + s[1] * s[1];
            }
        }
    }

    /// Jacobian values in the order of [`Self::block_jac_pattern`].
    fn block_jac(&self, blk: &Block, v: &[f64], out: &mut Vec<f64>) {
        out.clear();
        match blk.kind {
            Kind::Dynamics { vehicle } => {
                let p = &self.data.vehicles[vehicle].params;
                let dt = self.data.dt;
                let (psi, vel, delta) = (v[2], v[3], v[5]);
                let (beta, b1, _) = slip_derivatives(p, delta);
                let th = psi + beta;
                let (st, ct) = th.sin_cos();
                let (sb, cb) = beta.sin_cos();
                out.extend([-1.0, dt * vel * st, -dt * ct, dt * vel * st * b1, 1.0]);
                out.extend([-1.0, -dt * vel * ct, -dt * st, -dt * vel * ct * b1, 1.0]);
                out.extend([-1.0, -dt * sb / p.lr, -dt * vel * cb * b1 / p.lr, 1.0]);
                out.extend([-1.0, -dt, 1.0]);
            }
            Kind::Rate => out.extend([-1.0, 1.0, -1.0, 1.0]),
            Kind::VehiclePair { i, j } => {
                let hi = self.data.vehicles[i].params.half_extents();
                let hj = self.data.vehicles[j].params.half_extents();
                let fi = footprint_terms(hi, v[0], v[1], v[2], &v[P_LAM..P_LAM + 4]);
                let fj = footprint_terms(hj, v[3], v[4], v[5], &v[P_MU..P_MU + 4]);
                // row 0 over locals 0..14: (x_i,y_i,psi_i), (x_j,y_j,psi_j), lambda, mu
                out.extend(fi.grad[..3].iter().map(|g| -g));
                out.extend(fj.grad[..3].iter().map(|g| -g));
                out.extend(fi.grad[3..].iter().map(|g| -g));
                out.extend(fj.grad[3..].iter().map(|g| -g));
                for r in 0..2 {
                    out.push(fi.normal_grad[r][0]);
                    out.extend(&fi.normal_grad[r][1..]);
                    out.push(1.0);
                    out.push(fj.normal_grad[r][0]);
                    out.extend(&fj.normal_grad[r][1..]);
                    out.push(-1.0);
                }
                out.push(2.0 * v[P_S]);
                out.push(2.0 * v[P_S + 1]);
            }
            Kind::Obstacle { vehicle, obstacle } => {
                let obs = &self.data.obstacles[obstacle];
                let m = obs.n_facets();
                let h = self.data.vehicles[vehicle].params.half_extents();
                let f = footprint_terms(h, v[0], v[1], v[2], &v[3..7]);
                out.extend(f.grad.iter().map(|g| -g));
                out.extend(obs.b().iter().map(|b| -b));
                for r in 0..2 {
                    out.push(f.normal_grad[r][0]);
                    out.extend(&f.normal_grad[r][1..]);
                    out.push(1.0);
                    out.extend(obs.a().iter().map(|a| a[r]));
                    out.push(-1.0);
                }
                out.push(2.0 * v[7 + m]);
                out.push(2.0 * v[8 + m]);
            }
        }
    }

    /// `sum_r y_r d2 g_r` in the order of [`Self::block_hess_pattern`].
    fn block_hess(&self, blk: &Block, v: &[f64], y: &[f64], out: &mut Vec<f64>) {
        out.clear();
        let fp_hess = |f: &FootprintTerms, y_dist: f64, y_nx: f64, y_ny: f64, out: &mut Vec<f64>| {
            // footprint term enters row 0 with a minus sign; normal rows add
            // their psi-psi and lambda-psi curvature
            for &(a, b, h) in &f.hess {
                let mut val = -y_dist * h;
                if a == 2 && b == 2 {
                    val += y_nx * f.normal_hess[0][0] + y_ny * f.normal_hess[1][0];
                } else if b == 2 && a >= 3 {
                    val += y_nx * f.normal_hess[0][a - 2] + y_ny * f.normal_hess[1][a - 2];
                }
                out.push(val);
            }
        };
        match blk.kind {
            Kind::Dynamics { vehicle } => {
                let p = &self.data.vehicles[vehicle].params;
                let dt = self.data.dt;
                let (psi, vel, delta) = (v[2], v[3], v[5]);
                let (beta, b1, b2) = slip_derivatives(p, delta);
                let th = psi + beta;
                let (st, ct) = th.sin_cos();
                let (sb, cb) = beta.sin_cos();
                let (y0, y1, y2) = (y[0], y[1], y[2]);
                // rows are z' - z - dt f, so curvature is -dt * d2 f
                let psipsi = -dt * (y0 * (-vel * ct) + y1 * (-vel * st));
                let vpsi = -dt * (y0 * (-st) + y1 * ct);
                let dpsi = -dt * (y0 * (-vel * ct * b1) + y1 * (-vel * st * b1));
                let dv = -dt * (y0 * (-st * b1) + y1 * (ct * b1) + y2 * (cb * b1 / p.lr));
                let dd = -dt
                    * (y0 * (-vel * ct * b1 * b1 - vel * st * b2)
                        + y1 * (-vel * st * b1 * b1 + vel * ct * b2)
                        + y2 * (vel * (-sb * b1 * b1 + cb * b2) / p.lr));
                out.extend([psipsi, vpsi, dpsi, dv, dd]);
            }
            Kind::Rate => {}
            Kind::VehiclePair { i, j } => {
                let hi = self.data.vehicles[i].params.half_extents();
                let hj = self.data.vehicles[j].params.half_extents();
                let fi = footprint_terms(hi, v[0], v[1], v[2], &v[P_LAM..P_LAM + 4]);
                let fj = footprint_terms(hj, v[3], v[4], v[5], &v[P_MU..P_MU + 4]);
                fp_hess(&fi, y[0], y[1], y[2], out);
                fp_hess(&fj, y[0], y[3], y[4], out);
                out.push(2.0 * y[5]);
                out.push(2.0 * y[5]);
            }
            Kind::Obstacle { vehicle, .. } => {
                let h = self.data.vehicles[vehicle].params.half_extents();
                let f = footprint_terms(h, v[0], v[1], v[2], &v[3..7]);
                fp_hess(&f, y[0], y[1], y[2], out);
                out.push(2.0 * y[5]);
                out.push(2.0 * y[5]);
            }
        }
    }

    fn block_rows(&self, blk: &Block) -> usize {
        match blk.kind {
            Kind::Dynamics { .. } => 4,
            Kind::Rate => 2,
            _ => 6,
        }
    }

    /// Dynamically consistent initial guess: hold `u_prev`, roll the model
    /// forward, and take exact separation certificates along the rollout.
    pub fn cold_start(&self) -> Vec<f64> {
        let n = self.data.horizon;
        let mut x = vec![0.0; self.n_vars];
        let mut traj: Vec<Vec<VehicleState>> = Vec::new();
        for (i, veh) in self.data.vehicles.iter().enumerate() {
            let mut z = veh.z0;
            let mut states = vec![z];
            for k in 0..n {
                let b = self.u_index(i, k);
                let u = ControlInput::new(
                    veh.u_prev.a.clamp(self.lower[b], self.upper[b]),
                    veh.u_prev.delta.clamp(self.lower[b + 1], self.upper[b + 1]),
                );
                x[b] = u.a;
                x[b + 1] = u.delta;
                z = step(&veh.params, &z, &u, self.data.dt);
                z.psi = states[k].psi + (z.psi - states[k].psi + std::f64::consts::PI).rem_euclid(2.0 * std::f64::consts::PI)
                    - std::f64::consts::PI;
                z.v = z.v.max(self.lower[self.z_index(i, k + 1) + 3]);
                x[self.z_index(i, k + 1)..self.z_index(i, k + 1) + 4].copy_from_slice(&z.to_array());
                states.push(z);
            }
            traj.push(states);
        }
        self.fill_certificates(&mut x, &traj);
        x
    }

    fn fill_certificates(&self, x: &mut [f64], traj: &[Vec<VehicleState>]) {
        let n = self.data.horizon;
        let push = 1e-3;
        let put = |x: &mut [f64], base: usize, cert: &DualCertificate| {
            let m1 = cert.lambda.len();
            for (q, l) in cert.lambda.iter().enumerate() {
                x[base + q] = l + push;
            }
            for (q, m) in cert.mu.iter().enumerate() {
                x[base + m1 + q] = m + push;
            }
            x[base + m1 + cert.mu.len()] = cert.s[0];
            x[base + m1 + cert.mu.len() + 1] = cert.s[1];
        };
        for (p, &(i, j)) in self.pairs.iter().enumerate() {
            for k in 0..=n {
                let pi = footprint(&traj[i][k], &self.data.vehicles[i].params);
                let pj = footprint(&traj[j][k], &self.data.vehicles[j].params);
                let cert = optimal_certificate(&pi, &pj).unwrap_or_else(|_| DualCertificate::zero(4, 4));
                put(x, self.pair_index(p, k), &cert);
            }
        }
        for i in 0..self.data.vehicles.len() {
            for (o, obs) in self.data.obstacles.iter().enumerate() {
                for k in 0..=n {
                    let pi = footprint(&traj[i][k], &self.data.vehicles[i].params);
                    let cert =
                        optimal_certificate(&pi, obs).unwrap_or_else(|_| DualCertificate::zero(4, obs.n_facets()));
                    put(x, self.obstacle_index(i, o, k), &cert);
                }
            }
        }
    }

    /// For every variable, the variable of a same-layout problem one step
    /// earlier that holds its shifted value. Tails repeat the last entry.
    fn var_shift_source(&self) -> Vec<usize> {
        let n = self.data.horizon;
        let mut src = vec![0; self.n_vars];
        for i in 0..self.data.vehicles.len() {
            for k in 0..n {
                let (a, b) = (self.u_index(i, k), self.u_index(i, (k + 1).min(n - 1)));
                src[a] = b;
                src[a + 1] = b + 1;
                let (a, b) = (self.z_index(i, k + 1), self.z_index(i, (k + 2).min(n)));
                for c in 0..4 {
                    src[a + c] = b + c;
                }
            }
        }
        for p in 0..self.pairs.len() {
            for k in 0..=n {
                let (a, b) = (self.pair_index(p, k), self.pair_index(p, (k + 1).min(n)));
                for q in 0..DUAL_PAIR {
                    src[a + q] = b + q;
                }
            }
        }
        for i in 0..self.data.vehicles.len() {
            for o in 0..self.data.obstacles.len() {
                for k in 0..=n {
                    let (a, b) = (self.obstacle_index(i, o, k), self.obstacle_index(i, o, (k + 1).min(n)));
                    for q in 0..self.obstacle_block_size(o) {
                        src[a + q] = b + q;
                    }
                }
            }
        }
        src
    }

    fn row_shift_source(&self) -> Vec<usize> {
        let index: std::collections::HashMap<(usize, usize), usize> =
            self.blocks.iter().enumerate().map(|(b, blk)| ((blk.stream, blk.k), b)).collect();
        let mut src = vec![0; self.n_rows];
        for blk in &self.blocks {
            let next = index.get(&(blk.stream, blk.k + 1)).map_or(blk, |&b| &self.blocks[b]);
            for r in 0..self.block_rows(blk) {
                src[blk.row + r] = next.row + r;
            }
        }
        src
    }

    /// Primal-dual initial guess from the previous step's solution of a
    /// problem with the same layout: every stream advances one step, the
    /// tail input is held and the terminal state is propagated with it.
    pub fn shifted_start(&self, prev: &NlpSolution) -> (Vec<f64>, NlpSolution) {
        let n = self.data.horizon;
        assert_eq!(prev.x.len(), self.n_vars, "previous solution has a different layout");
        let src = self.var_shift_source();
        let mut x: Vec<f64> = src.iter().map(|&s| prev.x[s]).collect();
        for (i, veh) in self.data.vehicles.iter().enumerate() {
            let u = self.u_index(i, n - 1);
            x[u] = x[u].clamp(self.lower[u], self.upper[u]);
            x[u + 1] = x[u + 1].clamp(self.lower[u + 1], self.upper[u + 1]);
            if n == 1 {
                continue;
            }
            let last = self.z_index(i, n);
            let z = VehicleState::new(x[last], x[last + 1], x[last + 2], x[last + 3]);
            let mut zn = step_unwrapped(&veh.params, &z, &ControlInput::new(x[u], x[u + 1]), self.data.dt);
            zn.v = zn.v.max(self.lower[last + 3]);
            x[last..last + 4].copy_from_slice(&zn.to_array());
        }
        // the first input must respect the new rate window around u_prev
        for i in 0..self.data.vehicles.len() {
            let u = self.u_index(i, 0);
            x[u] = x[u].clamp(self.lower[u], self.upper[u]);
            x[u + 1] = x[u + 1].clamp(self.lower[u + 1], self.upper[u + 1]);
        }
        let rows = self.row_shift_source();
        let warm = NlpSolution {
            x: x.clone(),
            y: rows.iter().map(|&r| prev.y[r]).collect(),
            z_l: src.iter().map(|&s| prev.z_l[s]).collect(),
            z_u: src.iter().map(|&s| prev.z_u[s]).collect(),
            ..prev.clone()
        };
        (x, warm)
    }

    pub fn inputs(&self, x: &[f64], i: usize) -> Vec<ControlInput> {
        (0..self.data.horizon).map(|k| ControlInput::new(x[self.u_index(i, k)], x[self.u_index(i, k) + 1])).collect()
    }

    /// Predicted states `z_0..z_N` of vehicle `i`.
    pub fn states(&self, x: &[f64], i: usize) -> Vec<VehicleState> {
        let mut out = vec![self.data.vehicles[i].z0];
        for k in 1..=self.data.horizon {
            let b = self.z_index(i, k);
            out.push(VehicleState::new(x[b], x[b + 1], x[b + 2], x[b + 3]));
        }
        out
    }

    /// Dual certificate of pair `p` at step `k`.
    pub fn pair_certificate(&self, x: &[f64], p: usize, k: usize) -> DualCertificate {
        let b = self.pair_index(p, k);
        DualCertificate { lambda: x[b..b + 4].to_vec(), mu: x[b + 4..b + 8].to_vec(), s: [x[b + 8], x[b + 9]] }
    }

    pub fn obstacle_certificate(&self, x: &[f64], i: usize, o: usize, k: usize) -> DualCertificate {
        let b = self.obstacle_index(i, o, k);
        let m = self.data.obstacles[o].n_facets();
        DualCertificate {
            lambda: x[b..b + 4].to_vec(),
            mu: x[b + 4..b + 4 + m].to_vec(),
            s: [x[b + 4 + m], x[b + 5 + m]],
        }
    }

    /// Number of dual variables (`lambda`, `mu`, `s`) in the problem.
    pub fn n_dual_vars(&self) -> usize {
        self.n_vars - self.pair_base
    }

    /// Number of avoidance constraint streams (vehicle pairs plus
    /// vehicle-obstacle pairs).
    pub fn n_avoidance_streams(&self) -> usize {
        self.pairs.len() + self.data.vehicles.len() * self.data.obstacles.len()
    }
}

impl Nlp for Ocp {
    fn n_vars(&self) -> usize {
        self.n_vars
    }

    fn n_cons(&self) -> usize {
        self.n_rows
    }

    fn var_bounds(&self, lower: &mut [f64], upper: &mut [f64]) {
        lower.copy_from_slice(&self.lower);
        upper.copy_from_slice(&self.upper);
    }

    fn con_bounds(&self, lower: &mut [f64], upper: &mut [f64]) {
        lower.copy_from_slice(&self.row_lower);
        upper.copy_from_slice(&self.row_upper);
    }

    fn objective(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| match *t {
                Term::Target { a, target, w } => w * (x[a] - target).powi(2),
                Term::Diff { a, b, w } => w * (x[a] - x[b]).powi(2),
            })
            .sum()
    }

    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        grad.iter_mut().for_each(|g| *g = 0.0);
        for t in &self.terms {
            match *t {
                Term::Target { a, target, w } => grad[a] += 2.0 * w * (x[a] - target),
                Term::Diff { a, b, w } => {
                    let d = 2.0 * w * (x[a] - x[b]);
                    grad[a] += d;
                    grad[b] -= d;
                }
            }
        }
    }

    fn constraints(&self, x: &[f64], g: &mut [f64]) {
        let mut v = Vec::with_capacity(20);
        for blk in &self.blocks {
            Self::gather(blk, x, &mut v);
            let r = self.block_rows(blk);
            self.block_eval(blk, &v, &mut g[blk.row..blk.row + r]);
        }
    }

    fn jacobian_structure(&self) -> Vec<(usize, usize)> {
        self.jac_pattern.clone()
    }

    fn jacobian_values(&self, x: &[f64], vals: &mut [f64]) {
        let mut v = Vec::with_capacity(20);
        let mut jv = Vec::with_capacity(64);
        let mut k = 0;
        for blk in &self.blocks {
            Self::gather(blk, x, &mut v);
            self.block_jac(blk, &v, &mut jv);
            for (q, (_, l)) in self.block_jac_pattern(blk).into_iter().enumerate() {
                if matches!(blk.locals[l], Slot::Var(_)) {
                    vals[k] = jv[q];
                    k += 1;
                }
            }
        }
        debug_assert_eq!(k, vals.len());
    }

    fn hessian_structure(&self) -> Vec<(usize, usize)> {
        self.hess_pattern.clone()
    }

    fn hessian_values(&self, x: &[f64], obj_factor: f64, y: &[f64], vals: &mut [f64]) {
        let mut v = Vec::with_capacity(20);
        let mut hv = Vec::with_capacity(64);
        let mut k = 0;
        for blk in &self.blocks {
            Self::gather(blk, x, &mut v);
            let r = self.block_rows(blk);
            self.block_hess(blk, &v, &y[blk.row..blk.row + r], &mut hv);
            for (q, (a, b)) in self.block_hess_pattern(blk).into_iter().enumerate() {
                if matches!((blk.locals[a], blk.locals[b]), (Slot::Var(_), Slot::Var(_))) {
                    vals[k] = hv[q];
                    k += 1;
                }
            }
        }
        for t in &self.terms {
            match *t {
                Term::Target { w, .. } => {
                    vals[k] = 2.0 * w * obj_factor;
                    k += 1;
                }
                Term::Diff { w, .. } => {
                    vals[k] = 2.0 * w * obj_factor;
                    vals[k + 1] = 2.0 * w * obj_factor;
                    vals[k + 2] = -2.0 * w * obj_factor;
                    k += 3;
                }
            }
        }
        debug_assert_eq!(k, vals.len());
    }
}

/// Largest relative mismatch between analytic and central-difference first
/// and second derivatives of an [`Nlp`] at `x`.
///
/// The error of an entry is `|analytic - fd| / max(1, |fd|)`.
pub fn derivative_mismatch<P: Nlp + ?Sized>(nlp: &P, x: &[f64], y: &[f64], h: f64) -> (f64, f64) {
    let n = nlp.n_vars();
    let m = nlp.n_cons();
    let jp = nlp.jacobian_structure();
    let mut jv = vec![0.0; jp.len()];
    nlp.jacobian_values(x, &mut jv);
    let mut jac = vec![std::collections::HashMap::<usize, f64>::new(); n];
    for (&(r, c), v) in jp.iter().zip(&jv) {
        *jac[c].entry(r).or_insert(0.0) += v;
    }
    let hp = nlp.hessian_structure();
    let mut hv = vec![0.0; hp.len()];
    nlp.hessian_values(x, 1.0, y, &mut hv);
    let mut hess = vec![std::collections::HashMap::<usize, f64>::new(); n];
    for (&(r, c), v) in hp.iter().zip(&hv) {
        *hess[c].entry(r).or_insert(0.0) += v;
        if r != c {
            *hess[r].entry(c).or_insert(0.0) += v;
        }
    }
    let lag_grad = |x: &[f64]| -> Vec<f64> {
        let mut g = vec![0.0; n];
        nlp.gradient(x, &mut g);
        let mut jv = vec![0.0; jp.len()];
        nlp.jacobian_values(x, &mut jv);
        for (&(r, c), v) in jp.iter().zip(&jv) {
            g[c] += y[r] * v;
        }
        g
    };
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1.0);
    let (mut ej, mut eh) = (0.0f64, 0.0f64);
    let mut xp = x.to_vec();
    let (mut gp, mut gm) = (vec![0.0; m], vec![0.0; m]);
    for c in 0..n {
        let orig = xp[c];
        xp[c] = orig + h;
        nlp.constraints(&xp, &mut gp);
        let lp = lag_grad(&xp);
        xp[c] = orig - h;
        nlp.constraints(&xp, &mut gm);
        let lm = lag_grad(&xp);
        xp[c] = orig;
        for r in 0..m {
            let fd = (gp[r] - gm[r]) / (2.0 * h);
            let an = jac[c].get(&r).copied().unwrap_or(0.0);
            ej = ej.max(rel(an, fd));
        }
        for r in 0..n {
            let fd = (lp[r] - lm[r]) / (2.0 * h);
            let an = hess[c].get(&r).copied().unwrap_or(0.0);
            eh = eh.max(rel(an, fd));
        }
    }
    (ej, eh)
}
