//! Sparse symmetric `L D L^T` factorisation for quasi-definite KKT systems.
//!
//! The ordering is a minimum-degree ordering in which a constraint node only
//! becomes eligible once all of its primal neighbours are eliminated, so that
//! negative pivots are formed from Schur complements rather than from the
//! small dual regularisation alone. The numeric phase is an up-looking
//! factorisation driven by the elimination tree; no pivoting is performed, so
//! the signs of `D` give the inertia directly.

use std::collections::BTreeSet;

const UNKNOWN: usize = usize::MAX;

/// Structure-only analysis, reusable for every matrix with the same pattern.
#[derive(Debug, Clone)]
pub struct SymbolicLdl {
    n: usize,
    perm: Vec<usize>,
    iperm: Vec<usize>,
    /// Upper-triangular CSC pattern of the permuted matrix (diagonal last in
    /// each column is not required; every column holds its diagonal).
    ap: Vec<usize>,
    ai: Vec<usize>,
    /// `slot[k]` is the position in `ax` that input entry `k` accumulates into.
    slot: Vec<usize>,
    etree: Vec<usize>,
    lnz: Vec<usize>,
    lp: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Inertia {
    pub positive: usize,
    pub negative: usize,
}

fn constrained_min_degree(n: usize, rows: &[usize], cols: &[usize], is_dual: &[bool]) -> Vec<usize> {
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for (&i, &j) in rows.iter().zip(cols) {
        if i != j {
            adj[i].insert(j);
            adj[j].insert(i);
        }
    }
    // primal neighbours still pending before a dual node may be eliminated
    let original = adj.clone();
    let mut pending: Vec<usize> = (0..n)
        .map(|v| if is_dual[v] { adj[v].iter().filter(|&&u| !is_dual[u]).count() } else { 0 })
        .collect();
    let mut eliminated = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for _ in 0..n {
        let mut best = UNKNOWN;
        let mut best_deg = usize::MAX;
        for v in 0..n {
            if !eliminated[v] && pending[v] == 0 && adj[v].len() < best_deg {
                best = v;
                best_deg = adj[v].len();
            }
        }
        debug_assert!(best != UNKNOWN);
        let v = best;
        eliminated[v] = true;
        order.push(v);
        let nbrs: Vec<usize> = adj[v].iter().copied().collect();
        for &u in &nbrs {
            adj[u].remove(&v);
            if !is_dual[v] && is_dual[u] && original[u].contains(&v) {
                pending[u] -= 1;
            }
        }
        for (a, &u) in nbrs.iter().enumerate() {
            for &w in &nbrs[a + 1..] {
                if adj[u].insert(w) {
                    adj[w].insert(u);
                }
            }
        }
        adj[v].clear();
    }
    order
}

impl SymbolicLdl {
    /// Analyses the pattern given as coordinate entries of either triangle.
    /// Duplicate entries are summed. `is_dual[v]` marks constraint nodes.
    pub fn analyse(n: usize, rows: &[usize], cols: &[usize], is_dual: &[bool]) -> Self {
        assert_eq!(rows.len(), cols.len());
        assert_eq!(is_dual.len(), n);
        let perm = constrained_min_degree(n, rows, cols, is_dual);
        let mut iperm = vec![0; n];
        for (k, &v) in perm.iter().enumerate() {
            iperm[v] = k;
        }

        // permuted upper entries, diagonal included for every column
        let mut entries: Vec<(usize, usize, usize)> = Vec::with_capacity(rows.len() + n);
        for (k, (&i, &j)) in rows.iter().zip(cols).enumerate() {
            let (a, b) = (iperm[i], iperm[j]);
            entries.push((a.max(b), a.min(b), k));
        }
        for c in 0..n {
            entries.push((c, c, usize::MAX));
        }
        entries.sort_unstable_by_key(|&(c, r, _)| (c, r));
        let mut ap = vec![0; n + 1];
        let mut ai = Vec::with_capacity(entries.len());
        let mut slot = vec![0; rows.len()];
        let mut last: Option<(usize, usize)> = None;
        for &(c, r, k) in &entries {
            if last != Some((c, r)) {
                ai.push(r);
                ap[c + 1] = ai.len();
                last = Some((c, r));
            }
            if k != usize::MAX {
                slot[k] = ai.len() - 1;
            }
        }
        for c in 0..n {
            ap[c + 1] = ap[c + 1].max(ap[c]);
        }

        let mut etree = vec![UNKNOWN; n];
        let mut lnz = vec![0usize; n];
        let mut work = vec![UNKNOWN; n];
        for j in 0..n {
            work[j] = j;
            for &i0 in &ai[ap[j]..ap[j + 1]] {
                let mut i = i0;
                while work[i] != j {
                    if etree[i] == UNKNOWN {
                        etree[i] = j;
                    }
                    lnz[i] += 1;
                    work[i] = j;
                    i = etree[i];
                }
            }
        }
        let mut lp = vec![0; n + 1];
        for i in 0..n {
            lp[i + 1] = lp[i] + lnz[i];
        }
        SymbolicLdl { n, perm, iperm, ap, ai, slot, etree, lnz, lp }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn factor_nnz(&self) -> usize {
        self.lp[self.n]
    }

    /// Numeric factorisation of the matrix whose coordinate values are `vals`
    /// (same order as the analysed pattern). Returns `None` on a zero or
    /// non-finite pivot.
    pub fn factor(&self, vals: &[f64]) -> Option<LdlFactor> {
        let n = self.n;
        let mut ax = vec![0.0; self.ai.len()];
        for (k, &v) in vals.iter().enumerate() {
            ax[self.slot[k]] += v;
        }
        // pivots are judged against the magnitude of their own row
        let mut row_scale = vec![0.0f64; n];
        for k in 0..n {
            for p in self.ap[k]..self.ap[k + 1] {
                let v = ax[p].abs();
                row_scale[k] = row_scale[k].max(v);
                row_scale[self.ai[p]] = row_scale[self.ai[p]].max(v);
            }
        }

        let nnz = self.lp[n];
        let mut li = vec![0usize; nnz];
        let mut lx = vec![0.0; nnz];
        let mut d = vec![0.0; n];
        let mut dinv = vec![0.0; n];
        let mut marked = vec![false; n];
        let mut y_idx = vec![0usize; n];
        let mut elim = vec![0usize; n];
        let mut next_space: Vec<usize> = self.lp[..n].to_vec();
        let mut y_vals = vec![0.0; n];

        for k in 0..n {
            let mut nnz_y = 0;
            for p in self.ap[k]..self.ap[k + 1] {
                let b = self.ai[p];
                if b == k {
                    d[k] = ax[p];
                    continue;
                }
                y_vals[b] = ax[p];
                if !marked[b] {
                    marked[b] = true;
                    elim[0] = b;
                    let mut n_e = 1;
                    let mut next = self.etree[b];
                    while next != UNKNOWN && next < k {
                        if marked[next] {
                            break;
                        }
                        marked[next] = true;
                        elim[n_e] = next;
                        n_e += 1;
                        next = self.etree[next];
                    }
                    while n_e > 0 {
                        n_e -= 1;
                        y_idx[nnz_y] = elim[n_e];
                        nnz_y += 1;
                    }
                }
            }
            for i in (0..nnz_y).rev() {
                let c = y_idx[i];
                let end = next_space[c];
                let yc = y_vals[c];
                for j in self.lp[c]..end {
                    y_vals[li[j]] -= lx[j] * yc;
                }
                li[end] = k;
                lx[end] = yc * dinv[c];
                d[k] -= yc * lx[end];
                next_space[c] += 1;
                y_vals[c] = 0.0;
                marked[c] = false;
            }
            if !d[k].is_finite() || d[k].abs() <= 1e-14 * row_scale[k] || d[k] == 0.0 {
                return None;
            }
            dinv[k] = 1.0 / d[k];
        }
        let positive = d.iter().filter(|&&v| v > 0.0).count();
        Some(LdlFactor {
            perm: self.perm.clone(),
            iperm: self.iperm.clone(),
            lp: self.lp.clone(),
            li,
            lx,
            dinv,
            inertia: Inertia { positive, negative: n - positive },
            lnz: self.lnz.clone(),
        })
    }
}

#[derive(Debug, Clone)]
pub struct LdlFactor {
    perm: Vec<usize>,
    iperm: Vec<usize>,
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<f64>,
    dinv: Vec<f64>,
    lnz: Vec<usize>,
    pub inertia: Inertia,
}

impl LdlFactor {
    /// Solves `K x = rhs` in place.
    pub fn solve(&self, rhs: &mut [f64]) {
        let n = self.dinv.len();
        let mut x: Vec<f64> = (0..n).map(|k| rhs[self.perm[k]]).collect();
        for i in 0..n {
            let xi = x[i];
            for j in self.lp[i]..self.lp[i] + self.lnz[i] {
                x[self.li[j]] -= self.lx[j] * xi;
            }
        }
        for i in 0..n {
            x[i] *= self.dinv[i];
        }
        for i in (0..n).rev() {
            let mut xi = x[i];
            for j in self.lp[i]..self.lp[i] + self.lnz[i] {
                xi -= self.lx[j] * x[self.li[j]];
            }
            x[i] = xi;
        }
        for (v, r) in rhs.iter_mut().enumerate() {
            *r = x[self.iperm[v]];
        }
    }
}

/// `y = K x` for a symmetric matrix given by coordinate entries of one
/// triangle (off-diagonal entries are mirrored).
pub fn sym_matvec(rows: &[usize], cols: &[usize], vals: &[f64], x: &[f64], y: &mut [f64]) {
    y.iter_mut().for_each(|v| *v = 0.0);
    for ((&i, &j), &v) in rows.iter().zip(cols).zip(vals) {
        y[i] += v * x[j];
        if i != j {
            y[j] += v * x[i];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for c in 0..n {
            let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
            a.swap(c, p);
            b.swap(c, p);
            for r in c + 1..n {
                let f = a[r][c] / a[c][c];
                for k in c..n {
                    a[r][k] -= f * a[c][k];
                }
                b[r] -= f * b[c];
            }
        }
        let mut x = vec![0.0; n];
        for r in (0..n).rev() {
            let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
            x[r] = (b[r] - s) / a[r][r];
        }
        x
    }

    /// Random quasi-definite KKT matrix `[H, J^T; J, -delta I]`.
    fn random_kkt(rng: &mut ChaCha8Rng, n: usize, m: usize) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
        let (mut r, mut c, mut v) = (Vec::new(), Vec::new(), Vec::new());
        for i in 0..n {
            r.push(i);
            c.push(i);
            v.push(rng.gen_range(1.0..4.0));
            if i + 1 < n && rng.gen_bool(0.5) {
                r.push(i + 1);
                c.push(i);
                v.push(rng.gen_range(-0.4..0.4));
            }
        }
        for k in 0..m {
            let row = n + k;
            r.push(row);
            c.push(row);
            v.push(-1e-8);
            for _ in 0..3 {
                r.push(row);
                c.push(rng.gen_range(0..n));
                v.push(rng.gen_range(-1.0..1.0));
            }
        }
        (r, c, v)
    }

    #[test]
    fn solves_random_kkt_systems() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..30 {
            let (n, m) = (12 + trial % 7, 4 + trial % 3);
            let (r, c, v) = random_kkt(&mut rng, n, m);
            let dim = n + m;
            let is_dual: Vec<bool> = (0..dim).map(|k| k >= n).collect();
            let sym = SymbolicLdl::analyse(dim, &r, &c, &is_dual);
            let f = sym.factor(&v).expect("quasi-definite matrices factor");
            assert_eq!(f.inertia, Inertia { positive: n, negative: m });
            let mut dense = vec![vec![0.0; dim]; dim];
            for ((&i, &j), &x) in r.iter().zip(&c).zip(&v) {
                dense[i][j] += x;
                if i != j {
                    dense[j][i] += x;
                }
            }
            let b: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let want = dense_solve(dense, b.clone());
            let mut got = b.clone();
            f.solve(&mut got);
            let mut res = vec![0.0; dim];
            sym_matvec(&r, &c, &v, &got, &mut res);
            let err = res.iter().zip(&b).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            assert!(err < 1e-8, "residual {err}");
            let scale = want.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() < 1e-6 * scale);
            }
        }
    }

    #[test]
    fn detects_indefinite_primal_block() {
        // H = diag(1, -1) with one constraint on x0 only
        let r = vec![0, 1, 2, 2];
        let c = vec![0, 1, 2, 0];
        let v = vec![1.0, -1.0, -1e-8, 1.0];
        let sym = SymbolicLdl::analyse(3, &r, &c, &[false, false, true]);
        let f = sym.factor(&v).unwrap();
        assert_eq!(f.inertia, Inertia { positive: 1, negative: 2 });
    }

    #[test]
    fn zero_pivot_is_reported() {
        let sym = SymbolicLdl::analyse(2, &[0, 1], &[0, 1], &[false, false]);
        assert!(sym.factor(&[1.0, 0.0]).is_none());
    }

    #[test]
    fn dual_nodes_follow_their_primal_neighbours() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (r, c, _) = random_kkt(&mut rng, 20, 6);
        let is_dual: Vec<bool> = (0..26).map(|k| k >= 20).collect();
        let order = constrained_min_degree(26, &r, &c, &is_dual);
        let mut pos = vec![0; 26];
        for (k, &v) in order.iter().enumerate() {
            pos[v] = k;
        }
        for (&i, &j) in r.iter().zip(&c) {
            if is_dual[i] && !is_dual[j] {
                assert!(pos[j] < pos[i]);
            }
        }
    }
}
