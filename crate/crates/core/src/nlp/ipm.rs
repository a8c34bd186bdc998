use super::ldl::{sym_matvec, LdlFactor, SymbolicLdl};
use super::{Nlp, NlpSolution, SolveStatus};

#[derive(Debug, Clone, PartialEq)]
pub struct IpmOptions {
    /// Target for the scaled optimality error.
    pub tol: f64,
    pub acceptable_tol: f64,
    /// Consecutive acceptable iterates before stopping early.
    pub acceptable_iter: usize,
    pub max_iter: usize,
    pub mu_init: f64,
    pub bound_push: f64,
    pub bound_frac: f64,
    /// Lower bound for warm-started bound multipliers.
    pub warm_mult_push: f64,
    /// Bound push and initial barrier parameter for warm-started solves.
    pub warm_bound_push: f64,
    pub warm_mu_init: f64,
    pub max_soc: usize,
    /// Per-iteration progress lines on stderr.
    pub trace: bool,
}

impl Default for IpmOptions {
    fn default() -> Self {
        IpmOptions {
            tol: 1e-8,
            acceptable_tol: 1e-6,
            acceptable_iter: 15,
            max_iter: 3000,
            mu_init: 0.1,
            bound_push: 1e-2,
            bound_frac: 1e-2,
            warm_mult_push: 1e-3,
            warm_bound_push: 1e-6,
            warm_mu_init: 1e-4,
            max_soc: 4,
            trace: false,
        }
    }
}

const KAPPA_EPS: f64 = 10.0;
const KAPPA_MU: f64 = 0.2;
const THETA_MU: f64 = 1.5;
const TAU_MIN: f64 = 0.99;
const KAPPA_SIGMA: f64 = 1e10;
const S_MAX: f64 = 100.0;
const GAMMA_THETA: f64 = 1e-5;
const GAMMA_PHI: f64 = 1e-8;
const S_THETA: f64 = 1.1;
const S_PHI: f64 = 2.3;
const DELTA_SWITCH: f64 = 1.0;
const ETA_PHI: f64 = 1e-8;
const GAMMA_ALPHA: f64 = 0.05;
const KAPPA_SOC: f64 = 0.99;
const DELTA_C: f64 = 1e-9;
const MAX_REFINE: usize = 10;
/// Dual regularisation used once the KKT matrix has been found singular.
const DELTA_C_SINGULAR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
struct Pattern {
    n: usize,
    m: usize,
    ineq: Vec<bool>,
    jac: Vec<(usize, usize)>,
    hess: Vec<(usize, usize)>,
}

#[derive(Debug, Clone)]
struct Kkt {
    pattern: Pattern,
    rows: Vec<usize>,
    cols: Vec<usize>,
    symbolic: SymbolicLdl,
}

/// Interior-point solver. Reusing one instance across problems with the same
/// sparsity pattern skips the symbolic analysis.
#[derive(Debug, Clone, Default)]
pub struct IpmSolver {
    pub options: IpmOptions,
    kkt: Option<Kkt>,
}

struct Problem {
    nx: usize,
    m: usize,
    nw: usize,
    wl: Vec<f64>,
    wu: Vec<f64>,
    gl: Vec<f64>,
    /// slack index (into w) of each inequality row
    slack: Vec<Option<usize>>,
    jac: Vec<(usize, usize)>,
    hess: Vec<(usize, usize)>,
}

impl Problem {
    fn residual(&self, w: &[f64], g: &[f64], c: &mut [f64]) {
        for j in 0..self.m {
            c[j] = match self.slack[j] {
                Some(s) => g[j] - w[s],
                None => g[j] - self.gl[j],
            };
        }
    }

    /// `A^T y` where `A` is the Jacobian of the residual w.r.t. `w`.
    fn jt_y(&self, jv: &[f64], y: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (&(r, c), v) in self.jac.iter().zip(jv) {
            out[c] += v * y[r];
        }
        for j in 0..self.m {
            if let Some(s) = self.slack[j] {
                out[s] -= y[j];
            }
        }
    }

    fn barrier(&self, f: f64, w: &[f64], mu: f64) -> f64 {
        let mut phi = f;
        for i in 0..self.nw {
            if self.wl[i].is_finite() {
                phi -= mu * (w[i] - self.wl[i]).ln();
            }
            if self.wu[i].is_finite() {
                phi -= mu * (self.wu[i] - w[i]).ln();
            }
        }
        phi
    }
}

struct Eval {
    f: f64,
    c: Vec<f64>,
}

fn norm1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn push_into(v: f64, l: f64, u: f64, k1: f64, k2: f64) -> f64 {
    let pl = if l.is_finite() {
        if u.is_finite() {
            (k1 * l.abs().max(1.0)).min(k2 * (u - l))
        } else {
            k1 * l.abs().max(1.0)
        }
    } else {
        0.0
    };
    let pu = if u.is_finite() {
        if l.is_finite() {
            (k1 * u.abs().max(1.0)).min(k2 * (u - l))
        } else {
            k1 * u.abs().max(1.0)
        }
    } else {
        0.0
    };
    let mut r = v;
    if l.is_finite() {
        r = r.max(l + pl);
    }
    if u.is_finite() {
        r = r.min(u - pu);
    }
    if l.is_finite() && u.is_finite() && l + pl > u - pu {
        r = 0.5 * (l + u);
    }
    r
}

impl IpmSolver {
    pub fn new(options: IpmOptions) -> Self {
        IpmSolver { options, kkt: None }
    }

    fn kkt_for(&mut self, pattern: Pattern) -> &Kkt {
        if self.kkt.as_ref().is_none_or(|k| k.pattern != pattern) {
            let nw = pattern.n + pattern.ineq.iter().filter(|&&b| b).count();
            let m = pattern.m;
            let (mut rows, mut cols) = (Vec::new(), Vec::new());
            for &(r, c) in &pattern.hess {
                rows.push(r.max(c));
                cols.push(r.min(c));
            }
            for i in 0..nw {
                rows.push(i);
                cols.push(i);
            }
            for &(r, c) in &pattern.jac {
                rows.push(nw + r);
                cols.push(c);
            }
            let mut s = pattern.n;
            for (j, &is) in pattern.ineq.iter().enumerate() {
                if is {
                    rows.push(nw + j);
                    cols.push(s);
                    s += 1;
                }
            }
            for j in 0..m {
                rows.push(nw + j);
                cols.push(nw + j);
            }
            let is_dual: Vec<bool> = (0..nw + m).map(|k| k >= nw).collect();
            let symbolic = SymbolicLdl::analyse(nw + m, &rows, &cols, &is_dual);
            self.kkt = Some(Kkt { pattern, rows, cols, symbolic });
        }
        self.kkt.as_ref().unwrap()
    }

    /// Solves `nlp` from `x0`, optionally warm-starting the multipliers.
    pub fn solve<P: Nlp + ?Sized>(&mut self, nlp: &P, x0: &[f64], warm: Option<&NlpSolution>) -> NlpSolution {
        let opts = self.options.clone();
        let nx = nlp.n_vars();
        let m = nlp.n_cons();
        assert_eq!(x0.len(), nx);
        let (mut xl, mut xu) = (vec![0.0; nx], vec![0.0; nx]);
        nlp.var_bounds(&mut xl, &mut xu);
        let (mut gl, mut gu) = (vec![0.0; m], vec![0.0; m]);
        nlp.con_bounds(&mut gl, &mut gu);
        let ineq: Vec<bool> = (0..m).map(|j| gl[j] < gu[j]).collect();
        let mut slack = vec![None; m];
        let mut wl = xl.clone();
        let mut wu = xu.clone();
        let mut ns = 0;
        for j in 0..m {
            if ineq[j] {
                slack[j] = Some(nx + ns);
                wl.push(gl[j]);
                wu.push(gu[j]);
                ns += 1;
            }
        }
        let nw = nx + ns;
        let jac = nlp.jacobian_structure();
        let hess = nlp.hessian_structure();
        let pattern = Pattern { n: nx, m, ineq, jac: jac.clone(), hess: hess.clone() };
        let kkt = self.kkt_for(pattern).clone();
        let prob = Problem { nx, m, nw, wl, wu, gl, slack, jac, hess };

        let dim = nw + m;
        let nh = prob.hess.len();
        let nj = prob.jac.len();

        // initial point
        let warm = warm.filter(|ws| ws.y.len() == m && ws.z_l.len() == nx && ws.z_u.len() == nx);
        let (push, frac) =
            if warm.is_some() { (opts.warm_bound_push, opts.warm_bound_push) } else { (opts.bound_push, opts.bound_frac) };
        let mut w = vec![0.0; nw];
        for i in 0..nx {
            w[i] = push_into(x0[i], prob.wl[i], prob.wu[i], push, frac);
        }
        let mut g = vec![0.0; m];
        nlp.constraints(&w[..nx], &mut g);
        for j in 0..m {
            if let Some(s) = prob.slack[j] {
                w[s] = push_into(g[j], prob.wl[s], prob.wu[s], push, frac);
            }
        }
        let mut mu = if warm.is_some() { opts.warm_mu_init } else { opts.mu_init };
        let mut y = vec![0.0; m];
        let mut zl = vec![0.0; nw];
        let mut zu = vec![0.0; nw];
        for i in 0..nw {
            if prob.wl[i].is_finite() {
                zl[i] = 1.0;
            }
            if prob.wu[i].is_finite() {
                zu[i] = 1.0;
            }
        }
        if let Some(ws) = warm {
            {
                y.copy_from_slice(&ws.y);
                let push = opts.warm_mult_push;
                for i in 0..nx {
                    if prob.wl[i].is_finite() {
                        zl[i] = ws.z_l[i].max(push);
                    }
                    if prob.wu[i].is_finite() {
                        zu[i] = ws.z_u[i].max(push);
                    }
                }
                for j in 0..m {
                    if let Some(s) = prob.slack[j] {
                        // stationarity in the slack: z_u - z_l = y
                        if prob.wl[s].is_finite() {
                            zl[s] = (-y[j]).max(push);
                        }
                        if prob.wu[s].is_finite() {
                            zu[s] = y[j].max(push);
                        }
                    }
                }
            }
        }

        let evaluate = |w: &[f64]| -> Option<Eval> {
            let f = nlp.objective(&w[..nx]);
            let mut g = vec![0.0; m];
            nlp.constraints(&w[..nx], &mut g);
            if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
                return None;
            }
            let mut c = vec![0.0; m];
            prob.residual(w, &g, &mut c);
            Some(Eval { f, c })
        };

        let mut cur = match evaluate(&w) {
            Some(e) => e,
            None => {
                return finish(&prob, &w, &y, &zl, &zu, f64::NAN, SolveStatus::NumericalFailure, 0, f64::INFINITY, f64::INFINITY)
            }
        };
        let mut grad = vec![0.0; nw];
        let mut jv = vec![0.0; nj];
        let mut hv = vec![0.0; nh];
        let mut kv = vec![0.0; kkt.rows.len()];
        let mut aty = vec![0.0; nw];
        let mut filter: Vec<(f64, f64)> = Vec::new();
        let theta0 = norm1(&cur.c);
        let theta_max = 1e4 * theta0.max(1.0);
        let theta_min = 1e-4 * theta0.max(1.0);
        let mut tau = TAU_MIN.max(1.0 - mu);
        let mut last_dw = 0.0f64;
        let mut acceptable_count = 0;
        let mut force_mu = false;
        let mut e0 = f64::INFINITY;
        // best iterate meeting the acceptable tolerance, returned on a late failure
        let mut best: Option<NlpSolution> = None;
        macro_rules! fail {
            ($status:expr, $iter:expr) => {
                return match best {
                    Some(b) => b,
                    None => finish(&prob, &w, &y, &zl, &zu, cur.f, $status, $iter, e0, norm_inf(&cur.c)),
                }
            };
        }

        for iter in 0..=opts.max_iter {
            nlp.gradient(&w[..nx], &mut grad[..nx]);
            grad[nx..].iter_mut().for_each(|v| *v = 0.0);
            nlp.jacobian_values(&w[..nx], &mut jv);
            prob.jt_y(&jv, &y, &mut aty);

            let err = |mu: f64| -> f64 {
                let mut dual = 0.0f64;
                let mut compl = 0.0f64;
                for i in 0..nw {
                    dual = dual.max((grad[i] + aty[i] - zl[i] + zu[i]).abs());
                    if prob.wl[i].is_finite() {
                        compl = compl.max(((w[i] - prob.wl[i]) * zl[i] - mu).abs());
                    }
                    if prob.wu[i].is_finite() {
                        compl = compl.max(((prob.wu[i] - w[i]) * zu[i] - mu).abs());
                    }
                }
                let zsum = norm1(&zl) + norm1(&zu);
                let sd = (S_MAX.max((norm1(&y) + zsum) / ((m + 2 * nw).max(1) as f64))) / S_MAX;
                let sc = (S_MAX.max(zsum / ((2 * nw).max(1) as f64))) / S_MAX;
                (dual / sd).max(norm_inf(&cur.c)).max(compl / sc)
            };
            e0 = err(0.0);
            if e0 <= opts.tol {
                return finish(&prob, &w, &y, &zl, &zu, cur.f, SolveStatus::Solved, iter, e0, norm_inf(&cur.c));
            }
            if e0 <= opts.acceptable_tol {
                if best.as_ref().is_none_or(|b| e0 < b.kkt_error) {
                    best = Some(finish(&prob, &w, &y, &zl, &zu, cur.f, SolveStatus::Acceptable, iter, e0, norm_inf(&cur.c)));
                }
                acceptable_count += 1;
                if acceptable_count >= opts.acceptable_iter {
                    return finish(&prob, &w, &y, &zl, &zu, cur.f, SolveStatus::Acceptable, iter, e0, norm_inf(&cur.c));
                }
            } else {
                acceptable_count = 0;
            }
            if iter == opts.max_iter {
                break;
            }

            // monotone barrier update
            let mu_floor = opts.tol / 10.0;
            while (force_mu || err(mu) <= KAPPA_EPS * mu) && mu > mu_floor {
                mu = mu_floor.max((KAPPA_MU * mu).min(mu.powf(THETA_MU)));
                tau = TAU_MIN.max(1.0 - mu);
                filter.clear();
                force_mu = false;
            }
            force_mu = false;

            // Newton system
            nlp.hessian_values(&w[..nx], 1.0, &y, &mut hv);
            let mut sigma = vec![0.0; nw];
            let mut gphi = vec![0.0; nw];
            for i in 0..nw {
                gphi[i] = grad[i];
                if prob.wl[i].is_finite() {
                    let d = w[i] - prob.wl[i];
                    sigma[i] += zl[i] / d;
                    gphi[i] -= mu / d;
                }
                if prob.wu[i].is_finite() {
                    let d = prob.wu[i] - w[i];
                    sigma[i] += zu[i] / d;
                    gphi[i] += mu / d;
                }
            }
            let mut rhs = vec![0.0; dim];
            for i in 0..nw {
                rhs[i] = -(gphi[i] + aty[i]);
            }
            for j in 0..m {
                rhs[nw + j] = -cur.c[j];
            }

            let fill = |kv: &mut [f64], delta_w: f64, delta_c: f64| {
                let mut k = 0;
                kv[..nh].copy_from_slice(&hv);
                k += nh;
                for i in 0..nw {
                    kv[k + i] = sigma[i] + delta_w;
                }
                k += nw;
                kv[k..k + nj].copy_from_slice(&jv);
                k += nj;
                let nsl = prob.slack.iter().filter(|s| s.is_some()).count();
                kv[k..k + nsl].iter_mut().for_each(|v| *v = -1.0);
                k += nsl;
                kv[k..k + m].iter_mut().for_each(|v| *v = -delta_c);
            };

            let mut delta_w = 0.0;
            let base_c = DELTA_C * mu.min(1.0);
            let mut delta_c = base_c;
            let factor: LdlFactor = loop {
                fill(&mut kv, delta_w, delta_c);
                match kkt.symbolic.factor(&kv) {
                    Some(f) if f.inertia.positive == nw => break f,
                    Some(_) => {}
                    None => delta_c = delta_c.max(DELTA_C_SINGULAR * mu.powf(0.25)),
                }
                delta_w = if delta_w == 0.0 {
                    if last_dw == 0.0 {
                        1e-4
                    } else {
                        (last_dw / 3.0).max(1e-20)
                    }
                } else if last_dw == 0.0 {
                    100.0 * delta_w
                } else {
                    8.0 * delta_w
                };
                if delta_w > 1e40 {
                    if opts.trace {
                        eprintln!("{iter:4} inertia correction failed");
                    }
                    fail!(SolveStatus::NumericalFailure, iter);
                }
            };
            if delta_w > 0.0 {
                last_dw = delta_w;
            }
            // the default dual regularisation only aids the factorisation;
            // refinement removes it from the computed step
            let mut kv_exact = kv.clone();
            if delta_c == base_c {
                let n = kv_exact.len();
                kv_exact[n - m..].iter_mut().for_each(|v| *v = 0.0);
            }
            let solve = |rhs: &[f64]| -> Vec<f64> {
                let mut sol = rhs.to_vec();
                factor.solve(&mut sol);
                // iterative refinement while the residual keeps shrinking
                let target = 1e-14 * norm_inf(rhs).max(1.0);
                let mut r = vec![0.0; dim];
                let mut last = f64::INFINITY;
                for _ in 0..MAX_REFINE {
                    sym_matvec(&kkt.rows, &kkt.cols, &kv_exact, &sol, &mut r);
                    let mut corr: Vec<f64> = rhs.iter().zip(&r).map(|(a, b)| a - b).collect();
                    let res = norm_inf(&corr);
                    if res <= target || res >= 0.9 * last {
                        break;
                    }
                    last = res;
                    factor.solve(&mut corr);
                    sol.iter_mut().zip(&corr).for_each(|(s, c)| *s += c);
                }
                sol
            };
            let sol = solve(&rhs);
            if sol.iter().any(|v| !v.is_finite()) {
                fail!(SolveStatus::NumericalFailure, iter);
            }
            let dw = &sol[..nw];
            let dy = &sol[nw..];
            let mut dzl = vec![0.0; nw];
            let mut dzu = vec![0.0; nw];
            for i in 0..nw {
                if prob.wl[i].is_finite() {
                    let d = w[i] - prob.wl[i];
                    dzl[i] = mu / d - zl[i] - zl[i] / d * dw[i];
                }
                if prob.wu[i].is_finite() {
                    let d = prob.wu[i] - w[i];
                    dzu[i] = mu / d - zu[i] + zu[i] / d * dw[i];
                }
            }

            let max_step = |w: &[f64], dw: &[f64]| -> f64 {
                let mut a = 1.0f64;
                for i in 0..nw {
                    if prob.wl[i].is_finite() && dw[i] < 0.0 {
                        a = a.min(-tau * (w[i] - prob.wl[i]) / dw[i]);
                    }
                    if prob.wu[i].is_finite() && dw[i] > 0.0 {
                        a = a.min(tau * (prob.wu[i] - w[i]) / dw[i]);
                    }
                }
                a
            };
            let alpha_max = max_step(&w, dw);
            let mut alpha_z = 1.0f64;
            for i in 0..nw {
                if dzl[i] < 0.0 {
                    alpha_z = alpha_z.min(-tau * zl[i] / dzl[i]);
                }
                if dzu[i] < 0.0 {
                    alpha_z = alpha_z.min(-tau * zu[i] / dzu[i]);
                }
            }

            let tiny = (0..nw).all(|i| dw[i].abs() / (1.0 + w[i].abs()) < 10.0 * f64::EPSILON);
            let theta = norm1(&cur.c);
            let phi = prob.barrier(cur.f, &w, mu);
            let gphi_d: f64 = gphi.iter().zip(dw).map(|(a, b)| a * b).sum();
            let trial_point = |alpha: f64, dir: &[f64]| -> Vec<f64> {
                w.iter().zip(dir).map(|(a, b)| a + alpha * b).collect()
            };

            let mut accepted: Option<(f64, Vec<f64>, Eval, bool)> = None;
            if tiny {
                let wt = trial_point(alpha_max, dw);
                if let Some(e) = evaluate(&wt) {
                    accepted = Some((alpha_max, wt, e, false));
                }
                force_mu = true;
            } else {
                let alpha_min = GAMMA_ALPHA
                    * if gphi_d < 0.0 {
                        let mut a = GAMMA_THETA.min(GAMMA_PHI * theta / -gphi_d);
                        if theta <= theta_min {
                            a = a.min(DELTA_SWITCH * theta.powf(S_THETA) / (-gphi_d).powf(S_PHI));
                        }
                        a
                    } else {
                        GAMMA_THETA
                    };
                let acceptable = |theta_t: f64, phi_t: f64, alpha: f64| -> Option<bool> {
                    if theta_t > theta_max {
                        return None;
                    }
                    if filter.iter().any(|&(tf, pf)| theta_t >= tf && phi_t >= pf) {
                        return None;
                    }
                    let switching =
                        gphi_d < 0.0 && alpha * (-gphi_d).powf(S_PHI) > DELTA_SWITCH * theta.powf(S_THETA);
                    if theta <= theta_min && switching {
                        (phi_t <= phi + ETA_PHI * alpha * gphi_d).then_some(true)
                    } else {
                        (theta_t <= (1.0 - GAMMA_THETA) * theta || phi_t <= phi - GAMMA_PHI * theta)
                            .then_some(false)
                    }
                };
                let mut alpha = alpha_max;
                let mut first = true;
                let mut fallback: Option<(f64, Vec<f64>, Eval)> = None;
                while alpha >= alpha_min {
                    let wt = trial_point(alpha, dw);
                    if let Some(e) = evaluate(&wt) {
                        let theta_t = norm1(&e.c);
                        let phi_t = prob.barrier(e.f, &wt, mu);
                        if let Some(ftype) = acceptable(theta_t, phi_t, alpha).filter(|_| phi_t.is_finite()) {
                            accepted = Some((alpha, wt, e, ftype));
                            break;
                        }
                        if theta_t < theta && phi_t.is_finite() {
                            fallback = Some((alpha, wt.clone(), e));
                        }
                        if first && theta_t >= theta && opts.max_soc > 0 {
                            // second-order corrections
                            let mut c_soc: Vec<f64> = cur.c.iter().map(|v| alpha * v).collect();
                            let mut theta_old = theta;
                            let mut theta_trial = theta_t;
                            let mut c_trial = {
                                let mut ev = evaluate(&wt).unwrap();
                                std::mem::take(&mut ev.c)
                            };
                            for _ in 0..opts.max_soc {
                                if theta_trial > KAPPA_SOC * theta_old && theta_old != theta {
                                    break;
                                }
                                for (a, b) in c_soc.iter_mut().zip(&c_trial) {
                                    *a += b;
                                }
                                let mut r2 = rhs.clone();
                                for j in 0..m {
                                    r2[nw + j] = -c_soc[j];
                                }
                                let s2 = solve(&r2);
                                let a_soc = max_step(&w, &s2[..nw]);
                                let ws = trial_point(a_soc, &s2[..nw]);
                                let Some(es) = evaluate(&ws) else { break };
                                let th_s = norm1(&es.c);
                                let ph_s = prob.barrier(es.f, &ws, mu);
                                if let Some(ftype) = acceptable(th_s, ph_s, alpha).filter(|_| ph_s.is_finite()) {
                                    accepted = Some((a_soc, ws, es, ftype));
                                    break;
                                }
                                theta_old = theta_trial;
                                theta_trial = th_s;
                                c_trial = es.c;
                            }
                            if accepted.is_some() {
                                break;
                            }
                        }
                    }
                    first = false;
                    alpha *= 0.5;
                }
                if accepted.is_none() {
                    if let Some((a, wt, e)) = fallback {
                        // no filter-acceptable point: settle for progress in feasibility
                        filter.clear();
                        accepted = Some((a, wt, e, false));
                    }
                }
            }
            if opts.trace {
                eprintln!(
                    "{iter:4} f {:+.6e} inf {:.2e} err {:.2e} mu {:.1e} dw {:.1e} alpha {:?}",
                    cur.f,
                    norm_inf(&cur.c),
                    e0,
                    mu,
                    delta_w,
                    accepted.as_ref().map(|a| a.0)
                );
            }
            let Some((alpha, wt, et, ftype)) = accepted else {
                fail!(SolveStatus::LineSearchFailed, iter);
            };
            if !ftype && !tiny {
                filter.push(((1.0 - GAMMA_THETA) * theta, phi - GAMMA_PHI * theta));
            }
            w = wt;
            cur = et;
            for j in 0..m {
                y[j] += alpha * dy[j];
            }
            for i in 0..nw {
                if prob.wl[i].is_finite() {
                    let d = w[i] - prob.wl[i];
                    let z = zl[i] + alpha_z * dzl[i];
                    zl[i] = z.clamp(mu / (KAPPA_SIGMA * d), KAPPA_SIGMA * mu / d);
                }
                if prob.wu[i].is_finite() {
                    let d = prob.wu[i] - w[i];
                    let z = zu[i] + alpha_z * dzu[i];
                    zu[i] = z.clamp(mu / (KAPPA_SIGMA * d), KAPPA_SIGMA * mu / d);
                }
            }
        }
        fail!(SolveStatus::MaxIterations, opts.max_iter);
    }
}

#[allow(clippy::too_many_arguments)]
fn finish(
    prob: &Problem,
    w: &[f64],
    y: &[f64],
    zl: &[f64],
    zu: &[f64],
    f: f64,
    status: SolveStatus,
    iterations: usize,
    kkt_error: f64,
    infeasibility: f64,
) -> NlpSolution {
    let nx = prob.nx;
    NlpSolution {
        x: w[..nx].to_vec(),
        y: y.to_vec(),
        z_l: zl[..nx].to_vec(),
        z_u: zu[..nx].to_vec(),
        objective: f,
        status,
        iterations,
        kkt_error,
        infeasibility,
    }
}
