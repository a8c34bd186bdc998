//! Convex polygon footprints in halfspace form, exact polygon distance and
//! dual separation certificates.

use serde::{Deserialize, Serialize};

use crate::dynamics::{VehicleParams, VehicleState};
use crate::error::{Error, Result};

/// Distances below this are reported as contact.
pub const CONTACT_TOL: f64 = 1e-9;
const CERT_RESIDUAL_TOL: f64 = 1e-6;
const CERT_NORM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PolytopeRaw {
    a: Vec<[f64; 2]>,
    b: Vec<f64>,
}

/// Bounded convex polygon `{p : A p <= b}` with unit-norm facet normals.
///
/// Vertices are kept alongside the halfspaces, counter-clockwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolytopeRaw", into = "PolytopeRaw")]
pub struct Polytope {
    a: Vec<[f64; 2]>,
    b: Vec<f64>,
    vertices: Vec<[f64; 2]>,
}

/// Halfspace polytope of a vehicle footprint.
pub type OrientedPolytope = Polytope;

impl TryFrom<PolytopeRaw> for Polytope {
    type Error = Error;
    fn try_from(raw: PolytopeRaw) -> Result<Self> {
        Polytope::new(raw.a, raw.b)
    }
}

impl From<Polytope> for PolytopeRaw {
    fn from(p: Polytope) -> Self {
        PolytopeRaw { a: p.a, b: p.b }
    }
}

fn dot(u: [f64; 2], v: [f64; 2]) -> f64 {
    u[0] * v[0] + u[1] * v[1]
}

fn sub(u: [f64; 2], v: [f64; 2]) -> [f64; 2] {
    [u[0] - v[0], u[1] - v[1]]
}

fn norm(u: [f64; 2]) -> f64 {
    u[0].hypot(u[1])
}

impl Polytope {
    /// Builds a polygon from non-redundant halfspaces.
    pub fn new(a: Vec<[f64; 2]>, b: Vec<f64>) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::InvalidPolytope(format!("{} normals but {} offsets", a.len(), b.len())));
        }
        if a.len() < 3 {
            return Err(Error::InvalidPolytope("need at least three facets".into()));
        }
        if a.iter().flatten().chain(&b).any(|v| !v.is_finite()) {
            return Err(Error::InvalidPolytope("non-finite data".into()));
        }
        if let Some(row) = a.iter().find(|r| (norm(**r) - 1.0).abs() > 1e-9) {
            return Err(Error::InvalidPolytope(format!("facet normal {row:?} is not unit length")));
        }
        let mut order: Vec<usize> = (0..a.len()).collect();
        order.sort_by(|&i, &j| a[i][1].atan2(a[i][0]).total_cmp(&a[j][1].atan2(a[j][0])));
        let m = order.len();
        let mut vertices = Vec::with_capacity(m);
        for k in 0..m {
            let (i, j) = (order[k], order[(k + 1) % m]);
            let det = a[i][0] * a[j][1] - a[i][1] * a[j][0];
            // consecutive normals must turn left by less than pi for boundedness
            if det <= 1e-12 {
                return Err(Error::InvalidPolytope("polygon is unbounded or has parallel facets".into()));
            }
            vertices.push([
                (b[i] * a[j][1] - b[j] * a[i][1]) / det,
                (a[i][0] * b[j] - a[j][0] * b[i]) / det,
            ]);
        }
        let scale = 1.0 + b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for v in &vertices {
            for (row, bi) in a.iter().zip(&b) {
                if dot(*row, *v) > bi + 1e-9 * scale {
                    return Err(Error::InvalidPolytope("empty or redundant halfspaces".into()));
                }
            }
        }
        Ok(Polytope { a, b, vertices })
    }

    /// Axis-aligned box `[x_min, x_max] x [y_min, y_max]`.
    pub fn axis_box(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Self> {
        if !(x_max > x_min && y_max > y_min) {
            return Err(Error::InvalidPolytope("box has no interior".into()));
        }
        Polytope::new(
            vec![[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]],
            vec![x_max, y_max, -x_min, -y_min],
        )
    }

    pub fn a(&self) -> &[[f64; 2]] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn n_facets(&self) -> usize {
        self.a.len()
    }

    /// Counter-clockwise vertices.
    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn area(&self) -> f64 {
        let v = &self.vertices;
        let n = v.len();
        0.5 * (0..n)
            .map(|k| {
                let (p, q) = (v[k], v[(k + 1) % n]);
                p[0] * q[1] - q[0] * p[1]
            })
            .sum::<f64>()
    }

    pub fn contains(&self, p: [f64; 2], tol: f64) -> bool {
        self.a.iter().zip(&self.b).all(|(r, bi)| dot(*r, p) <= bi + tol)
    }

    /// `max_{p in P} d . p`
    pub fn support(&self, d: [f64; 2]) -> f64 {
        self.vertices.iter().map(|v| dot(d, *v)).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Image under rotation by `angle` followed by translation `t`.
    pub fn transformed(&self, angle: f64, t: [f64; 2]) -> Result<Self> {
        let (s, c) = angle.sin_cos();
        let a: Vec<[f64; 2]> = self.a.iter().map(|r| [c * r[0] - s * r[1], s * r[0] + c * r[1]]).collect();
        let b = a.iter().zip(&self.b).map(|(r, bi)| bi + dot(*r, t)).collect();
        Polytope::new(a, b)
    }
}

/// Rotation-dependent facet normals `[R^T; -R^T]` of a footprint at heading `psi`.
pub fn footprint_normals(psi: f64) -> [[f64; 2]; 4] {
    let (s, c) = psi.sin_cos();
    [[c, s], [-s, c], [-c, -s], [s, -c]]
}

/// Rectangle occupied by a vehicle in state `z`.
pub fn footprint(z: &VehicleState, params: &VehicleParams) -> OrientedPolytope {
    let a = footprint_normals(z.psi);
    let h = params.half_extents();
    let p = [z.x, z.y];
    let b: Vec<f64> = (0..4).map(|k| h[k] + dot(a[k], p)).collect();
    let (s, c) = z.psi.sin_cos();
    let (hl, hw) = (params.len / 2.0, params.w / 2.0);
    let corner = |u: f64, v: f64| [z.x + c * u - s * v, z.y + s * u + c * v];
    let vertices = vec![corner(hl, hw), corner(-hl, hw), corner(-hl, -hw), corner(hl, -hw)];
    Polytope { a: a.to_vec(), b, vertices }
}

/// Primal distance result with closest points `p1 in P1`, `p2 in P2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Distance {
    pub dist: f64,
    pub p1: [f64; 2],
    pub p2: [f64; 2],
}

fn closest_on_segment(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    let ab = sub(b, a);
    let len2 = dot(ab, ab);
    if len2 == 0.0 {
        return a;
    }
    let t = (dot(sub(p, a), ab) / len2).clamp(0.0, 1.0);
    [a[0] + t * ab[0], a[1] + t * ab[1]]
}

fn separated_by_facets(p: &Polytope, q: &Polytope) -> bool {
    p.a.iter().zip(&p.b).any(|(r, bi)| q.vertices.iter().all(|v| dot(*r, *v) > bi + CONTACT_TOL))
}

fn segment_intersection(p: [f64; 2], p2: [f64; 2], q: [f64; 2], q2: [f64; 2]) -> Option<[f64; 2]> {
    let r = sub(p2, p);
    let s = sub(q2, q);
    let den = r[0] * s[1] - r[1] * s[0];
    if den.abs() < 1e-15 {
        return None;
    }
    let qp = sub(q, p);
    let t = (qp[0] * s[1] - qp[1] * s[0]) / den;
    let u = (qp[0] * r[1] - qp[1] * r[0]) / den;
    ((-1e-12..=1.0 + 1e-12).contains(&t) && (-1e-12..=1.0 + 1e-12).contains(&u))
        .then(|| [p[0] + t * r[0], p[1] + t * r[1]])
}

fn common_point(p: &Polytope, q: &Polytope) -> [f64; 2] {
    if let Some(v) = p.vertices.iter().find(|v| q.contains(**v, 1e-9)) {
        return *v;
    }
    if let Some(v) = q.vertices.iter().find(|v| p.contains(**v, 1e-9)) {
        return *v;
    }
    let (np, nq) = (p.vertices.len(), q.vertices.len());
    for i in 0..np {
        for j in 0..nq {
            let hit = segment_intersection(
                p.vertices[i],
                p.vertices[(i + 1) % np],
                q.vertices[j],
                q.vertices[(j + 1) % nq],
            );
            if let Some(x) = hit {
                return x;
            }
        }
    }
    p.vertices[0]
}

/// Euclidean distance between two convex polygons, zero when they intersect.
pub fn polytope_distance(p1: &Polytope, p2: &Polytope) -> Result<Distance> {
    if separated_by_facets(p1, p2) || separated_by_facets(p2, p1) {
        let mut best = Distance { dist: f64::INFINITY, p1: p1.vertices[0], p2: p2.vertices[0] };
        let mut scan = |pts: &Polytope, poly: &Polytope, flip: bool| {
            let n = poly.vertices.len();
            for v in &pts.vertices {
                for k in 0..n {
                    let c = closest_on_segment(*v, poly.vertices[k], poly.vertices[(k + 1) % n]);
                    let d = norm(sub(*v, c));
                    if d < best.dist {
                        best = if flip {
                            Distance { dist: d, p1: c, p2: *v }
                        } else {
                            Distance { dist: d, p1: *v, p2: c }
                        };
                    }
                }
            }
        };
        scan(p1, p2, false);
        scan(p2, p1, true);
        if !best.dist.is_finite() {
            return Err(Error::Numerical("polygon distance did not evaluate".into()));
        }
        if best.dist < CONTACT_TOL {
            best.dist = 0.0;
        }
        return Ok(best);
    }
    let c = common_point(p1, p2);
    Ok(Distance { dist: 0.0, p1: c, p2: c })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualCertificate {
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
    pub s: [f64; 2],
}

impl DualCertificate {
    pub fn zero(m1: usize, m2: usize) -> Self {
        DualCertificate { lambda: vec![0.0; m1], mu: vec![0.0; m2], s: [0.0, 0.0] }
    }
}

/// Largest violation among `A1^T lambda + s = 0` and `A2^T mu - s = 0`.
pub fn certificate_residual(p1: &Polytope, p2: &Polytope, cert: &DualCertificate) -> f64 {
    let mut r1 = cert.s;
    for (row, l) in p1.a.iter().zip(&cert.lambda) {
        r1[0] += row[0] * l;
        r1[1] += row[1] * l;
    }
    let mut r2 = [-cert.s[0], -cert.s[1]];
    for (row, m) in p2.a.iter().zip(&cert.mu) {
        r2[0] += row[0] * m;
        r2[1] += row[1] * m;
    }
    r1.iter().chain(&r2).fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Dual objective `-b1^T lambda - b2^T mu`, a lower bound on the distance.
pub fn dual_value(p1: &Polytope, p2: &Polytope, cert: &DualCertificate) -> Result<f64> {
    if cert.lambda.len() != p1.n_facets() || cert.mu.len() != p2.n_facets() {
        return Err(Error::InvalidCertificate(format!(
            "multiplier sizes {}/{} do not match facet counts {}/{}",
            cert.lambda.len(),
            cert.mu.len(),
            p1.n_facets(),
            p2.n_facets()
        )));
    }
    if cert.lambda.iter().chain(&cert.mu).chain(&cert.s).any(|v| !v.is_finite()) {
        return Err(Error::InvalidCertificate("non-finite entries".into()));
    }
    if cert.lambda.iter().chain(&cert.mu).any(|&v| v < 0.0) {
        return Err(Error::InvalidCertificate("negative multiplier".into()));
    }
    if norm(cert.s) > 1.0 + CERT_NORM_TOL {
        return Err(Error::InvalidCertificate(format!("|s| = {} exceeds one", norm(cert.s))));
    }
    let res = certificate_residual(p1, p2, cert);
    if res > CERT_RESIDUAL_TOL {
        return Err(Error::InvalidCertificate(format!("equality residual {res:e}")));
    }
    let v1: f64 = p1.b.iter().zip(&cert.lambda).map(|(b, l)| b * l).sum();
    let v2: f64 = p2.b.iter().zip(&cert.mu).map(|(b, m)| b * m).sum();
    Ok(-v1 - v2)
}

/// Non-negative `w` with `A^T w = target`, using facets active at `point`.
fn facet_multipliers(p: &Polytope, point: [f64; 2], target: [f64; 2]) -> Vec<f64> {
    let scale = 1.0 + p.b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let active: Vec<usize> =
        (0..p.n_facets()).filter(|&i| dot(p.a[i], point) >= p.b[i] - 1e-7 * scale).collect();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut consider = |w: Vec<f64>| {
        let mut r = [-target[0], -target[1]];
        for (row, wi) in p.a.iter().zip(&w) {
            r[0] += row[0] * wi;
            r[1] += row[1] * wi;
        }
        let err = norm(r);
        if best.as_ref().is_none_or(|(e, _)| err < *e) {
            best = Some((err, w));
        }
    };
    for &i in &active {
        let mut w = vec![0.0; p.n_facets()];
        w[i] = dot(p.a[i], target).max(0.0);
        consider(w);
    }
    for (k, &i) in active.iter().enumerate() {
        for &j in &active[k + 1..] {
            let (ai, aj) = (p.a[i], p.a[j]);
            let det = ai[0] * aj[1] - aj[0] * ai[1];
            if det.abs() < 1e-12 {
                continue;
            }
            let wi = (target[0] * aj[1] - aj[0] * target[1]) / det;
            let wj = (ai[0] * target[1] - target[0] * ai[1]) / det;
            if wi >= 0.0 && wj >= 0.0 {
                let mut w = vec![0.0; p.n_facets()];
                w[i] = wi;
                w[j] = wj;
                consider(w);
            }
        }
    }
    best.map(|(_, w)| w).unwrap_or_else(|| vec![0.0; p.n_facets()])
}

/// Certificate attaining the primal distance (zero certificate on contact).
pub fn optimal_certificate(p1: &Polytope, p2: &Polytope) -> Result<DualCertificate> {
    let d = polytope_distance(p1, p2)?;
    if d.dist == 0.0 {
        return Ok(DualCertificate::zero(p1.n_facets(), p2.n_facets()));
    }
    let s = [(d.p1[0] - d.p2[0]) / d.dist, (d.p1[1] - d.p2[1]) / d.dist];
    let lambda = facet_multipliers(p1, d.p1, [-s[0], -s[1]]);
    let mu = facet_multipliers(p2, d.p2, s);
    Ok(DualCertificate { lambda, mu, s })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn params() -> VehicleParams {
        VehicleParams::default()
    }

    fn fp(x: f64, y: f64, psi: f64) -> Polytope {
        footprint(&VehicleState::new(x, y, psi, 0.0), &params())
    }

    /// Brute force: minimum over dense boundary samples of both rectangles.
    fn sampled_distance(p: &Polytope, q: &Polytope, per_edge: usize) -> f64 {
        let sample = |poly: &Polytope| {
            let v = poly.vertices();
            let mut pts = Vec::new();
            for k in 0..v.len() {
                let (a, b) = (v[k], v[(k + 1) % v.len()]);
                for i in 0..per_edge {
                    let t = i as f64 / per_edge as f64;
                    pts.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
                }
            }
            pts
        };
        let (sp, sq) = (sample(p), sample(q));
        let mut best = f64::INFINITY;
        for a in &sp {
            for b in &sq {
                best = best.min(norm(sub(*a, *b)));
            }
        }
        best
    }

    /// Best dual value over unit directions: for fixed `s` the inner
    /// maximisation over multipliers equals `-h1(-s) - h2(s)`.
    fn dual_sweep(p: &Polytope, q: &Polytope) -> f64 {
        let g = |th: f64| {
            let s = [th.cos(), th.sin()];
            -p.support([-s[0], -s[1]]) - q.support(s)
        };
        let n = 720;
        let mut best = (0.0f64, 0usize);
        for k in 0..n {
            let v = g(2.0 * PI * k as f64 / n as f64);
            if v > best.0 || k == 0 {
                best = (v, k);
            }
        }
        let h = 2.0 * PI / n as f64;
        let (mut lo, mut hi) = ((best.1 as f64 - 1.0) * h, (best.1 as f64 + 1.0) * h);
        for _ in 0..200 {
            let m1 = lo + (hi - lo) / 3.0;
            let m2 = hi - (hi - lo) / 3.0;
            if g(m1) < g(m2) {
                lo = m1;
            } else {
                hi = m2;
            }
        }
        // s = 0 is always feasible
        g(0.5 * (lo + hi)).max(0.0)
    }

    #[test]
    fn footprint_examples() {
        let p = fp(0.0, 0.0, 0.0);
        assert_eq!(p.a(), &[[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]]);
        assert_eq!(p.b(), &[2.25, 0.9, 2.25, 0.9]);

        let p = fp(10.5, 1.85, 0.0);
        let want = [12.75, 2.75, -8.25, -0.95];
        for (b, w) in p.b().iter().zip(want) {
            assert!((b - w).abs() < 1e-12);
        }

        let p = fp(0.0, 0.0, FRAC_PI_2);
        let want = [[0.0, 1.0], [-1.0, 0.0], [0.0, -1.0], [1.0, 0.0]];
        for (r, w) in p.a().iter().zip(want) {
            assert!((r[0] - w[0]).abs() < 1e-15 && (r[1] - w[1]).abs() < 1e-15);
        }
        assert!(p.b().iter().zip([2.25, 0.9, 2.25, 0.9]).all(|(b, w)| (b - w).abs() < 1e-15));
    }

    #[test]
    fn footprint_matches_generic_constructor() {
        let p = fp(3.0, -2.0, 0.7);
        let q = Polytope::new(p.a().to_vec(), p.b().to_vec()).unwrap();
        for v in p.vertices() {
            assert!(q.vertices().iter().any(|w| norm(sub(*v, *w)) < 1e-12));
            assert!(q.contains(*v, 1e-12));
        }
    }

    #[test]
    fn distance_examples() {
        let d = polytope_distance(&fp(0.0, 1.85, 0.0), &fp(10.0, 1.85, 0.0)).unwrap();
        assert!((d.dist - 5.5).abs() < 1e-12);
        let brute = sampled_distance(&fp(0.0, 1.85, 0.0), &fp(10.0, 1.85, 0.0), 400);
        assert!((d.dist - brute).abs() < 1e-4);

        let p = fp(0.0, 1.85, 0.0);
        assert_eq!(polytope_distance(&p, &p).unwrap().dist, 0.0);

        let d = polytope_distance(&fp(0.0, 1.85, 0.0), &fp(0.0, 5.55, 0.0)).unwrap();
        assert!((d.dist - 1.9).abs() < 1e-12);
        let brute = sampled_distance(&fp(0.0, 1.85, 0.0), &fp(0.0, 5.55, 0.0), 400);
        assert!((d.dist - brute).abs() < 1e-4);
    }

    #[test]
    fn rotated_distance_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..40 {
            let p = fp(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), rng.gen_range(-PI..PI));
            let q = fp(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), rng.gen_range(-PI..PI));
            let d = polytope_distance(&p, &q).unwrap();
            let brute = sampled_distance(&p, &q, 300);
            if d.dist > 0.0 {
                assert!(d.dist <= brute + 1e-12);
                assert!(brute - d.dist < 2e-2, "{} vs {}", d.dist, brute);
                assert!(p.contains(d.p1, 1e-9) && q.contains(d.p2, 1e-9));
            } else {
                assert!(p.contains(d.p1, 1e-9) && q.contains(d.p1, 1e-9));
            }
        }
    }

    #[test]
    fn certificate_attains_distance() {
        let p = fp(0.0, 1.85, 0.0);
        let q = fp(10.0, 1.85, 0.0);
        let c = optimal_certificate(&p, &q).unwrap();
        assert!((dual_value(&p, &q, &c).unwrap() - 5.5).abs() < 1e-5);

        let zero = DualCertificate::zero(4, 4);
        assert_eq!(dual_value(&p, &q, &zero).unwrap(), 0.0);
    }

    #[test]
    fn invalid_certificates() {
        let p = fp(0.0, 0.0, 0.0);
        let q = fp(10.0, 0.0, 0.0);
        let mut c = optimal_certificate(&p, &q).unwrap();
        c.s = [2.0, 0.0];
        assert!(matches!(dual_value(&p, &q, &c), Err(Error::InvalidCertificate(_))));
        let mut c = optimal_certificate(&p, &q).unwrap();
        c.lambda[0] += 0.1;
        assert!(dual_value(&p, &q, &c).is_err());
        let mut c = optimal_certificate(&p, &q).unwrap();
        c.mu[1] = -0.5;
        assert!(dual_value(&p, &q, &c).is_err());
        assert!(dual_value(&p, &q, &DualCertificate::zero(3, 4)).is_err());
    }

    #[test]
    fn rejects_bad_polytopes() {
        assert!(Polytope::new(vec![[1.0, 0.0], [0.0, 1.0]], vec![1.0, 1.0]).is_err());
        assert!(Polytope::new(vec![[2.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]], vec![1.0; 4]).is_err());
        // unbounded strip
        assert!(Polytope::new(vec![[0.0, 1.0], [0.0, -1.0], [1.0, 0.0]], vec![1.0; 3]).is_err());
        // empty
        assert!(Polytope::axis_box(1.0, 0.0, 0.0, 1.0).is_err());
        let tri = Polytope::new(
            vec![[0.0, -1.0], [-1.0, 0.0], [std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2]],
            vec![0.0, 0.0, std::f64::consts::FRAC_1_SQRT_2],
        )
        .unwrap();
        assert!((tri.area() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn serde_round_trip() {
        let p = Polytope::axis_box(55.0, 60.0, 4.0, 7.1).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        let q: Polytope = serde_json::from_str(&s).unwrap();
        assert_eq!(p, q);
        assert!(serde_json::from_str::<Polytope>(r#"{"a":[[1,0]],"b":[1]}"#).is_err());
    }

    proptest! {
        #[test]
        fn distance_symmetric_and_rigid(
            x1 in -20.0f64..20.0, y1 in -20.0f64..20.0, h1 in -PI..PI,
            x2 in -20.0f64..20.0, y2 in -20.0f64..20.0, h2 in -PI..PI,
            rot in -PI..PI, tx in -30.0f64..30.0, ty in -30.0f64..30.0,
        ) {
            let p = fp(x1, y1, h1);
            let q = fp(x2, y2, h2);
            let d = polytope_distance(&p, &q).unwrap().dist;
            prop_assert!((d - polytope_distance(&q, &p).unwrap().dist).abs() < 1e-9);
            let pt = p.transformed(rot, [tx, ty]).unwrap();
            let qt = q.transformed(rot, [tx, ty]).unwrap();
            prop_assert!((d - polytope_distance(&pt, &qt).unwrap().dist).abs() < 1e-6);
        }

        #[test]
        fn footprint_area(x in -50.0f64..50.0, y in -50.0f64..50.0, psi in -PI..PI,
                          len in 1.0f64..10.0, w in 0.5f64..3.0) {
            let params = VehicleParams::new(len, w, 0.3 * len, 0.3 * len).unwrap();
            let p = footprint(&VehicleState::new(x, y, psi, 0.0), &params);
            prop_assert!((p.area() - len * w).abs() < 1e-9 * len * w);
        }

        #[test]
        fn strong_duality_and_soundness(
            x1 in 0.0f64..50.0, y1 in 0.0f64..50.0, h1 in -PI..PI,
            x2 in 0.0f64..50.0, y2 in 0.0f64..50.0, h2 in -PI..PI,
            th in -PI..PI, scale in 0.0f64..1.0,
        ) {
            let p = fp(x1, y1, h1);
            let q = fp(x2, y2, h2);
            let d = polytope_distance(&p, &q).unwrap().dist;
            let c = optimal_certificate(&p, &q).unwrap();
            let v = dual_value(&p, &q, &c).unwrap();
            prop_assert!((v - d).abs() < 1e-5, "primal {d} dual {v}");
            prop_assert!((dual_sweep(&p, &q) - d).abs() < 1e-5);
            // any feasible certificate is a lower bound
            let s = [scale * th.cos(), scale * th.sin()];
            let lam: Vec<f64> = p.a().iter().map(|r| (-dot(*r, s)).max(0.0)).collect();
            let mu: Vec<f64> = q.a().iter().map(|r| dot(*r, s).max(0.0)).collect();
            let cert = DualCertificate { lambda: lam, mu, s };
            let lb = dual_value(&p, &q, &cert).unwrap();
            prop_assert!(lb <= d + 1e-6);
        }
    }
}
