//! Independent geometry for oracles: rectangle corners, separating-axis
//! overlap and brute-force edge distances. Nothing here calls the crate's
//! distance code.
#![allow(dead_code)]

use platoon::dynamics::{VehicleParams, VehicleState};

pub type Pt = [f64; 2];

/// Corners of the body rectangle, centred on the state position.
pub fn corners(z: &VehicleState, len: f64, w: f64) -> [Pt; 4] {
    let (c, s) = (z.psi.cos(), z.psi.sin());
    let (hl, hw) = (len / 2.0, w / 2.0);
    [(hl, hw), (-hl, hw), (-hl, -hw), (hl, -hw)].map(|(a, b)| [z.x + a * c - b * s, z.y + a * s + b * c])
}

pub fn vehicle_corners(z: &VehicleState, p: &VehicleParams) -> [Pt; 4] {
    corners(z, p.len, p.w)
}

fn seg_point(p: Pt, a: Pt, b: Pt) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let l2 = dx * dx + dy * dy;
    let t = if l2 == 0.0 { 0.0 } else { (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / l2).clamp(0.0, 1.0) };
    (p[0] - a[0] - t * dx).hypot(p[1] - a[1] - t * dy)
}

fn overlaps(a: &[Pt], b: &[Pt]) -> bool {
    for poly in [a, b] {
        for i in 0..poly.len() {
            let (p, q) = (poly[i], poly[(i + 1) % poly.len()]);
            let n = [q[1] - p[1], p[0] - q[0]];
            let proj = |s: &[Pt]| {
                s.iter().map(|v| v[0] * n[0] + v[1] * n[1]).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)))
            };
            let (a0, a1) = proj(a);
            let (b0, b1) = proj(b);
            if a1 < b0 || b1 < a0 {
                return false;
            }
        }
    }
    true
}

/// Euclidean distance between two convex polygons (0 when they touch or overlap).
pub fn polygon_distance(a: &[Pt], b: &[Pt]) -> f64 {
    if overlaps(a, b) {
        return 0.0;
    }
    let mut d = f64::INFINITY;
    for (p, q) in [(a, b), (b, a)] {
        for v in p {
            for i in 0..q.len() {
                d = d.min(seg_point(*v, q[i], q[(i + 1) % q.len()]));
            }
        }
    }
    d
}

pub fn fixture(name: &str) -> String {
    format!("{}/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

use platoon::decision::SharedPlan;
use platoon::lookup::TableEntry;
use rand::Rng;

/// Smallest index whose maneuver keeps every platoon vehicle at least
/// `d_min` from every traffic vehicle at every step, by exhaustive scan.
pub fn brute_force_index(family: &[TableEntry], traffic: &[SharedPlan], d_min: Option<f64>) -> Option<usize> {
    let mut feasible = Vec::new();
    for e in family {
        let d = d_min.unwrap_or(e.trajectory.d_min);
        let mut ok = true;
        for v in &e.trajectory.vehicles {
            for p in traffic {
                for (t, z) in v.states.iter().enumerate() {
                    let dist = polygon_distance(&vehicle_corners(z, &v.params), &corners(&p.states[t], p.len, p.w));
                    ok &= dist >= d;
                }
            }
        }
        if ok {
            feasible.push(e.index);
        }
    }
    feasible.into_iter().min()
}

/// Up to three traffic vehicles on a two-lane road. Each keeps its lane or
/// changes lanes once with a smooth lateral profile; some overtake in the
/// right lane from behind so that they meet the platoon at varied times.
pub fn random_traffic<R: Rng>(rng: &mut R, steps: usize, dt: f64) -> Vec<SharedPlan> {
    let n = rng.gen_range(0..=3);
    (0..n)
        .map(|i| {
            let lane = if rng.gen_bool(2.0 / 3.0) { 0 } else { 1 };
            let y0 = 1.85 + 3.7 * lane as f64;
            let y1 = if rng.gen_bool(0.4) { 1.85 + 3.7 * (1 - lane) as f64 } else { y0 };
            let (t0, dur) = (rng.gen_range(0.0..12.0), rng.gen_range(2.0..5.0));
            let (x0, v) = if rng.gen_bool(0.5) {
                (rng.gen_range(-80.0..-10.0), rng.gen_range(12.0..20.0))
            } else {
                (rng.gen_range(-60.0..90.0), rng.gen_range(4.0..16.0))
            };
            let states = (0..=steps + rng.gen_range(0..20))
                .map(|k| {
                    let t = k as f64 * dt;
                    let s = ((t - t0) / dur).clamp(0.0, 1.0);
                    let y = y0 + (y1 - y0) * 0.5 * (1.0 - (std::f64::consts::PI * s).cos());
                    VehicleState::new(x0 + v * t, y, 0.0, v)
                })
                .collect();
            SharedPlan { vehicle_id: 100 + i, len: 4.5, w: 1.8, states }
        })
        .collect()
}
