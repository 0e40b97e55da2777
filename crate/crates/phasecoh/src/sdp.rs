//! Semidefinite programming: linear objectives over PSD cones with affine
//! equality constraints, plus the complex-to-real embedding.
//!
//! The embedded solver is a primal-dual interior-point method (HKM search
//! direction with a Mehrotra predictor-corrector) over block-diagonal real
//! symmetric cones. Problems with Hermitian data are lowered through
//! [`realify`]; the objective is halved to compensate the trace-doubling
//! identity `Tr(realify(A) realify(B)) = 2 Re Tr(A B)`.
//!
//! Two problem shapes are supported:
//! - [`SdpProblem`]: minimize/maximize a linear functional of PSD variables
//!   subject to affine equalities (the primal form), and
//! - [`LmiProblem`]: maximize a linear functional of free real variables
//!   subject to a linear matrix inequality and optional linear equalities
//!   (the dual form used by the estimation duals).

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::tensor::CMatrix;

// ---------------------------------------------------------------------------
// Dense symmetric matrices and small linear algebra helpers
// ---------------------------------------------------------------------------

/// Dense row-major real matrix (square).
#[derive(Clone, Debug)]
pub struct DMat {
    pub n: usize,
    pub a: Vec<f64>,
}

impl DMat {
    pub fn zeros(n: usize) -> Self {
        DMat { n, a: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = DMat::zeros(n);
        for i in 0..n {
            m.a[i * n + i] = 1.0;
        }
        m
    }

    pub fn scaled_identity(n: usize, s: f64) -> Self {
        let mut m = DMat::zeros(n);
        for i in 0..n {
            m.a[i * n + i] = s;
        }
        m
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.a[r * self.n + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.a[r * self.n + c] = v;
    }

    pub fn max_abs(&self) -> f64 {
        self.a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn frob(&self) -> f64 {
        self.a.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn symmetrize(&mut self) {
        let n = self.n;
        for r in 0..n {
            for c in (r + 1)..n {
                let v = 0.5 * (self.a[r * n + c] + self.a[c * n + r]);
                self.a[r * n + c] = v;
                self.a[c * n + r] = v;
            }
        }
    }

    pub fn add_scaled(&mut self, other: &DMat, s: f64) {
        for (x, y) in self.a.iter_mut().zip(&other.a) {
            *x += s * y;
        }
    }

    pub fn trace_dot(&self, other: &DMat) -> f64 {
        self.a.iter().zip(&other.a).map(|(x, y)| x * y).sum()
    }
}

/// C = A * B (dense, row-major).
fn matmul(a: &DMat, b: &DMat) -> DMat {
    let n = a.n;
    let mut c = DMat::zeros(n);
    for i in 0..n {
        for k in 0..n {
            let aik = a.a[i * n + k];
            if aik == 0.0 {
                continue;
            }
            let brow = &b.a[k * n..(k + 1) * n];
            let crow = &mut c.a[i * n..(i + 1) * n];
            for j in 0..n {
                crow[j] += aik * brow[j];
            }
        }
    }
    c
}

/// Cholesky factorization A = L L^T; returns the lower factor, or None if A
/// is not (numerically) positive definite.
fn cholesky(a: &DMat) -> Option<DMat> {
    let n = a.n;
    let mut l = DMat::zeros(n);
    for j in 0..n {
        let mut d = a.at(j, j);
        for k in 0..j {
            d -= l.at(j, k) * l.at(j, k);
        }
        if d <= 0.0 || !d.is_finite() {
            return None;
        }
        let dj = d.sqrt();
        l.set(j, j, dj);
        for i in (j + 1)..n {
            let mut v = a.at(i, j);
            for k in 0..j {
                v -= l.at(i, k) * l.at(j, k);
            }
            l.set(i, j, v / dj);
        }
    }
    Some(l)
}

/// Solve L x = b in place (lower triangular).
fn forward_solve(l: &DMat, x: &mut [f64]) {
    let n = l.n;
    for i in 0..n {
        let mut v = x[i];
        for k in 0..i {
            v -= l.at(i, k) * x[k];
        }
        x[i] = v / l.at(i, i);
    }
}

/// Solve L^T x = b in place.
fn backward_solve(l: &DMat, x: &mut [f64]) {
    let n = l.n;
    for i in (0..n).rev() {
        let mut v = x[i];
        for k in (i + 1)..n {
            v -= l.at(k, i) * x[k];
        }
        x[i] = v / l.at(i, i);
    }
}

fn chol_solve_vec(l: &DMat, b: &[f64]) -> Vec<f64> {
    let mut x = b.to_vec();
    forward_solve(l, &mut x);
    backward_solve(l, &mut x);
    x
}

/// Inverse of a PD matrix from its Cholesky factor.
fn inv_from_chol(l: &DMat) -> DMat {
    let n = l.n;
    let mut inv = DMat::zeros(n);
    let mut col = vec![0.0f64; n];
    for j in 0..n {
        col.iter_mut().for_each(|v| *v = 0.0);
        col[j] = 1.0;
        forward_solve(l, &mut col);
        backward_solve(l, &mut col);
        for i in 0..n {
            inv.a[i * n + j] = col[i];
        }
    }
    inv
}

/// All eigenvalues of a dense symmetric matrix (values only): Householder
/// tridiagonalization followed by implicit QL with shifts.
fn sym_eigenvalues(m: &DMat) -> Vec<f64> {
    let n = m.n;
    if n == 0 {
        return Vec::new();
    }
    if n == 1 {
        return vec![m.a[0]];
    }
    let mut a = m.a.clone();
    let mut d = vec![0.0f64; n];
    let mut e = vec![0.0f64; n];
    for i in (1..n).rev() {
        let l = i - 1;
        let mut h = 0.0;
        if l > 0 {
            let mut scale = 0.0;
            for k in 0..=l {
                scale += a[i * n + k].abs();
            }
            if scale == 0.0 {
                e[i] = a[i * n + l];
            } else {
                for k in 0..=l {
                    a[i * n + k] /= scale;
                    h += a[i * n + k] * a[i * n + k];
                }
                let mut f = a[i * n + l];
                let g = if f >= 0.0 { -h.sqrt() } else { h.sqrt() };
                e[i] = scale * g;
                h -= f * g;
                a[i * n + l] = f - g;
                f = 0.0;
                for j in 0..=l {
                    let mut g2 = 0.0;
                    for k in 0..=j {
                        g2 += a[j * n + k] * a[i * n + k];
                    }
                    for k in (j + 1)..=l {
                        g2 += a[k * n + j] * a[i * n + k];
                    }
                    e[j] = g2 / h;
                    f += e[j] * a[i * n + j];
                }
                let hh = f / (h + h);
                for j in 0..=l {
                    let fj = a[i * n + j];
                    let gj = e[j] - hh * fj;
                    e[j] = gj;
                    for k in 0..=j {
                        a[j * n + k] -= fj * e[k] + gj * a[i * n + k];
                    }
                }
            }
        } else {
            e[i] = a[i * n + l];
        }
        d[i] = h;
    }
    e[0] = 0.0;
    for i in 0..n {
        d[i] = a[i * n + i];
    }
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut mm = l;
            while mm + 1 < n {
                let dd = d[mm].abs() + d[mm + 1].abs();
                if e[mm].abs() <= f64::EPSILON * dd {
                    break;
                }
                mm += 1;
            }
            if mm == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                break;
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = (g * g + 1.0).sqrt();
            g = d[mm] - d[l] + e[l] / (g + if g >= 0.0 { r } else { -r });
            let (mut s, mut c) = (1.0f64, 1.0f64);
            let mut p = 0.0f64;
            let mut underflow = false;
            for i in (l..mm).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = (f * f + g * g).sqrt();
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[mm] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                let t = (d[i] - g) * s + 2.0 * c * b;
                p = s * t;
                d[i + 1] = g + p;
                g = c * t - b;
                f = 0.0;
                let _ = f;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[mm] = 0.0;
        }
    }
    d.sort_by(|x, y| x.partial_cmp(y).unwrap());
    d
}

fn sym_eig_min(m: &DMat) -> f64 {
    sym_eigenvalues(m)[0]
}

// ---------------------------------------------------------------------------
// Problem description
// ---------------------------------------------------------------------------

/// Sparse symmetric matrix: entries on the upper triangle (r <= c), value
/// applied symmetrically.
#[derive(Clone, Debug, Default)]
pub struct SparseSym {
    pub entries: Vec<(usize, usize, usize, f64)>, // (block, r, c, value)
}

impl SparseSym {
    pub fn push(&mut self, block: usize, r: usize, c: usize, v: f64) {
        if v == 0.0 {
            return;
        }
        let (r, c) = if r <= c { (r, c) } else { (c, r) };
        self.entries.push((block, r, c, v));
    }

    fn inner(&self, x: &[DMat]) -> f64 {
        let mut acc = 0.0;
        for &(b, r, c, v) in &self.entries {
            if r == c {
                acc += v * x[b].at(r, r);
            } else {
                acc += v * (x[b].at(r, c) + x[b].at(c, r));
            }
        }
        acc
    }

    fn add_into(&self, target: &mut [DMat], scale: f64) {
        for &(b, r, c, v) in &self.entries {
            let n = target[b].n;
            target[b].a[r * n + c] += scale * v;
            if r != c {
                target[b].a[c * n + r] += scale * v;
            }
        }
    }

    fn frob(&self) -> f64 {
        let mut acc = 0.0;
        for &(_, r, c, v) in &self.entries {
            acc += if r == c { v * v } else { 2.0 * v * v };
        }
        acc.sqrt()
    }
}

/// Equality-constrained conic problem over PSD blocks with optional free
/// variables:
///
/// ```text
/// minimize   sum_blk <C_blk, X_blk> + f' w
/// subject to sum_blk <A_i_blk, X_blk> + (G w)_i = b_i,   X_blk >= 0, w free
/// ```
///
/// Its dual is `maximize b' y  s.t.  C - sum_i y_i A_i >= 0,  G' y = f`.
#[derive(Clone, Debug)]
pub struct ConicProblem {
    pub block_dims: Vec<usize>,
    pub c: Vec<DMat>,
    pub cons: Vec<SparseSym>,
    pub b: Vec<f64>,
    pub n_free: usize,
    /// Per constraint row: coefficients of the free variables.
    pub g_rows: Vec<Vec<(usize, f64)>>,
    pub f: Vec<f64>,
}

impl ConicProblem {
    pub fn new(block_dims: Vec<usize>) -> Self {
        let c = block_dims.iter().map(|&n| DMat::zeros(n)).collect();
        ConicProblem {
            block_dims,
            c,
            cons: Vec::new(),
            b: Vec::new(),
            n_free: 0,
            g_rows: Vec::new(),
            f: Vec::new(),
        }
    }

    pub fn add_constraint(&mut self, a: SparseSym, b: f64) {
        self.cons.push(a);
        self.b.push(b);
        self.g_rows.push(Vec::new());
    }

    pub fn add_constraint_with_free(&mut self, a: SparseSym, g: Vec<(usize, f64)>, b: f64) {
        self.cons.push(a);
        self.b.push(b);
        self.g_rows.push(g);
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

/// Raw solver output for a [`ConicProblem`].
#[derive(Clone, Debug)]
pub struct ConicSolution {
    pub status: SolveStatus,
    pub primal_value: f64,
    pub dual_value: f64,
    pub x: Vec<DMat>,
    pub w: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<DMat>,
    pub gap: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
}

// ---------------------------------------------------------------------------
// Interior-point core
// ---------------------------------------------------------------------------

struct Iterate {
    x: Vec<DMat>,
    w: Vec<f64>,
    y: Vec<f64>,
    z: Vec<DMat>,
}

fn block_trace_dot(a: &[DMat], b: &[DMat]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p.trace_dot(q)).sum()
}

/// Largest step alpha <= 1 with X + alpha dX >= 0, given the Cholesky factor
/// of X.
fn max_step(lx: &DMat, dx: &DMat) -> f64 {
    let n = lx.n;
    // B = L^{-1} dX L^{-T}
    let mut b = dx.clone();
    for j in 0..n {
        let mut col: Vec<f64> = (0..n).map(|i| b.a[i * n + j]).collect();
        forward_solve(lx, &mut col);
        for i in 0..n {
            b.a[i * n + j] = col[i];
        }
    }
    for i in 0..n {
        let mut row: Vec<f64> = b.a[i * n..(i + 1) * n].to_vec();
        forward_solve(lx, &mut row);
        b.a[i * n..(i + 1) * n].copy_from_slice(&row);
    }
    b.symmetrize();
    let lmin = sym_eig_min(&b);
    if lmin >= -1e-13 {
        1.0
    } else {
        (1.0 / (-lmin)).min(1.0)
    }
}

pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: 1e-8, max_iter: 120 }
    }
}

/// Solve the conic problem with the embedded interior-point method.
pub fn solve_conic(p: &ConicProblem, opts: &SolverOptions) -> ConicSolution {
    let m = p.cons.len();
    let k = p.n_free;
    let nblk = p.block_dims.len();
    let ntot: usize = p.block_dims.iter().sum();

    let norm_b = p.b.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let norm_f = p.f.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let norm_c = p.c.iter().map(|c| c.max_abs()).fold(0.0f64, f64::max);
    let max_a = p.cons.iter().map(|a| a.frob()).fold(0.0f64, f64::max);

    let xi_p = 10.0f64
        .max((ntot as f64).sqrt())
        .max(ntot as f64 * norm_b / (1.0 + max_a));
    let xi_d = 10.0f64.max((ntot as f64).sqrt()).max(norm_c).max(max_a);

    let mut it = Iterate {
        x: p.block_dims.iter().map(|&n| DMat::scaled_identity(n, xi_p)).collect(),
        w: vec![0.0; k],
        y: vec![0.0; m],
        z: p.block_dims.iter().map(|&n| DMat::scaled_identity(n, xi_d)).collect(),
    };

    let mut tau_frac = 0.98f64;
    let mut status = SolveStatus::NumericalFailure;
    let mut iterations = 0usize;
    let mut slow_steps = 0usize;

    let eval_residuals = |it: &Iterate| -> (Vec<f64>, Vec<f64>, Vec<DMat>, f64, f64) {
        let mut rp = vec![0.0f64; m];
        for i in 0..m {
            let mut gv = 0.0;
            for &(j, g) in &p.g_rows[i] {
                gv += g * it.w[j];
            }
            rp[i] = p.b[i] - p.cons[i].inner(&it.x) - gv;
        }
        let mut rf = p.f.clone();
        for i in 0..m {
            let yi = it.y[i];
            if yi != 0.0 {
                for &(j, g) in &p.g_rows[i] {
                    rf[j] -= g * yi;
                }
            }
        }
        let mut rd: Vec<DMat> = (0..nblk)
            .map(|bk| {
                let mut r = p.c[bk].clone();
                r.add_scaled(&it.z[bk], -1.0);
                r
            })
            .collect();
        for i in 0..m {
            let yi = it.y[i];
            if yi != 0.0 {
                p.cons[i].add_into(&mut rd, -yi);
            }
        }
        let pinf = rp
            .iter()
            .fold(0.0f64, |a, v| a.max(v.abs()))
            .max(rf.iter().fold(0.0f64, |a, v| a.max(v.abs())))
            / (1.0 + norm_b.max(norm_f));
        let dinf = rd.iter().map(|r| r.max_abs()).fold(0.0f64, f64::max) / (1.0 + norm_c);
        (rp, rf, rd, pinf, dinf)
    };

    let mut best: Option<(f64, ConicSolution)> = None;

    for iter in 0..opts.max_iter {
        iterations = iter + 1;
        let (rp, rf, rd, pinf, dinf) = eval_residuals(&it);
        let mu = block_trace_dot(&it.x, &it.z) / ntot as f64;
        let pobj: f64 = block_trace_dot(&p.c, &it.x)
            + p.f.iter().zip(&it.w).map(|(a, b)| a * b).sum::<f64>();
        let dobj: f64 = p.b.iter().zip(&it.y).map(|(a, b)| a * b).sum::<f64>();
        let gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());

        let score = gap + pinf + dinf;
        if best.as_ref().map_or(true, |(s, _)| score < *s) {
            best = Some((
                score,
                ConicSolution {
                    status: SolveStatus::NumericalFailure,
                    primal_value: pobj,
                    dual_value: dobj,
                    x: it.x.clone(),
                    w: it.w.clone(),
                    y: it.y.clone(),
                    z: it.z.clone(),
                    gap,
                    primal_residual: pinf,
                    dual_residual: dinf,
                    iterations,
                },
            ));
        }

        let ftol = opts.tol.max(1e-9);
        if pinf <= ftol && dinf <= ftol && gap <= opts.tol {
            status = SolveStatus::Optimal;
            break;
        }
        // Divergence of one side while the matching residuals stay small
        // certifies the other side's infeasibility.
        if dobj > 1e9 * (1.0 + norm_c.max(1.0)) && dinf <= 1e-6 {
            status = SolveStatus::Infeasible;
            break;
        }
        if pobj < -1e9 * (1.0 + norm_b.max(1.0)) && pinf <= 1e-6 {
            status = SolveStatus::Unbounded;
            break;
        }
        if !mu.is_finite() || mu > 1e16 {
            status = SolveStatus::NumericalFailure;
            break;
        }

        let lx: Vec<DMat> = match it.x.iter().map(cholesky).collect::<Option<Vec<_>>>() {
            Some(v) => v,
            None => {
                status = SolveStatus::NumericalFailure;
                break;
            }
        };
        let lz: Vec<DMat> = match it.z.iter().map(cholesky).collect::<Option<Vec<_>>>() {
            Some(v) => v,
            None => {
                status = SolveStatus::NumericalFailure;
                break;
            }
        };
        let zinv: Vec<DMat> = lz.iter().map(inv_from_chol).collect();

        // Schur complement H_ij = <A_i, sym(X A_j Z^{-1})>
        let mut h = DMat::zeros(m);
        {
            let mut w_j: Vec<DMat> = p.block_dims.iter().map(|&n| DMat::zeros(n)).collect();
            for j in 0..m {
                for wb in w_j.iter_mut() {
                    wb.a.iter_mut().for_each(|v| *v = 0.0);
                }
                for &(bk, r, c, v) in &p.cons[j].entries {
                    let n = p.block_dims[bk];
                    let x = &it.x[bk];
                    let zi = &zinv[bk];
                    let pairs: &[(usize, usize)] =
                        if r == c { &[(r, c)] } else { &[(r, c), (c, r)] };
                    for &(rr, cc) in pairs {
                        for i2 in 0..n {
                            let xv = x.at(i2, rr) * v;
                            if xv == 0.0 {
                                continue;
                            }
                            let zrow = &zi.a[cc * n..(cc + 1) * n];
                            let wrow = &mut w_j[bk].a[i2 * n..(i2 + 1) * n];
                            for j2 in 0..n {
                                wrow[j2] += xv * zrow[j2];
                            }
                        }
                    }
                }
                for wb in w_j.iter_mut() {
                    wb.symmetrize();
                }
                for i in 0..=j {
                    let hij = p.cons[i].inner(&w_j);
                    h.set(i, j, hij);
                    h.set(j, i, hij);
                }
            }
        }
        let hsym = h;

        // Constraint redundancy shows up as a singular Schur complement;
        // factor with an adaptive ridge.
        let maxdiag = (0..m).fold(0.0f64, |a, i| a.max(hsym.at(i, i).abs())).max(1.0);
        let mut lh = None;
        let mut ridge = 1e-13 * maxdiag;
        for _ in 0..8 {
            let mut hr = hsym.clone();
            for i in 0..m {
                hr.a[i * m + i] += ridge;
            }
            if let Some(f) = cholesky(&hr) {
                lh = Some(f);
                break;
            }
            ridge *= 100.0;
        }
        let lh = match lh {
            Some(f) => f,
            None => {
                status = SolveStatus::NumericalFailure;
                break;
            }
        };

        let g_dense: Vec<Vec<f64>> = if k > 0 {
            (0..k)
                .map(|j| {
                    let mut col = vec![0.0f64; m];
                    for i in 0..m {
                        for &(jj, g) in &p.g_rows[i] {
                            if jj == j {
                                col[i] += g;
                            }
                        }
                    }
                    col
                })
                .collect()
        } else {
            Vec::new()
        };
        let ls = if k > 0 {
            let hinv_g: Vec<Vec<f64>> =
                g_dense.iter().map(|col| chol_solve_vec(&lh, col)).collect();
            let mut s = DMat::zeros(k);
            for a2 in 0..k {
                for b2 in 0..k {
                    let v: f64 = g_dense[a2].iter().zip(&hinv_g[b2]).map(|(x, y)| x * y).sum();
                    s.set(a2, b2, v);
                }
            }
            s.symmetrize();
            let sdiag = (0..k).fold(0.0f64, |a, i| a.max(s.at(i, i).abs())).max(1.0);
            let mut lsf = None;
            let mut rs = 1e-13 * sdiag;
            for _ in 0..8 {
                let mut sr = s.clone();
                for i in 0..k {
                    sr.a[i * k + i] += rs;
                }
                if let Some(f2) = cholesky(&sr) {
                    lsf = Some(f2);
                    break;
                }
                rs *= 100.0;
            }
            match lsf {
                Some(f2) => Some(f2),
                None => {
                    status = SolveStatus::NumericalFailure;
                    break;
                }
            }
        } else {
            None
        };

        // Solve the augmented system [H G; G' 0] [dy; dw] = [r1; r2]
        let solve_aug = |r1: &[f64], r2: &[f64]| -> (Vec<f64>, Vec<f64>) {
            if k == 0 {
                (chol_solve_vec(&lh, r1), Vec::new())
            } else {
                let lsf = ls.as_ref().unwrap();
                let hinv_r1 = chol_solve_vec(&lh, r1);
                let mut rhs_w = vec![0.0f64; k];
                for j in 0..k {
                    rhs_w[j] =
                        g_dense[j].iter().zip(&hinv_r1).map(|(x, y)| x * y).sum::<f64>() - r2[j];
                }
                let dw = chol_solve_vec(lsf, &rhs_w);
                let mut r1_adj = r1.to_vec();
                for j in 0..k {
                    if dw[j] != 0.0 {
                        for i in 0..m {
                            r1_adj[i] -= g_dense[j][i] * dw[j];
                        }
                    }
                }
                (chol_solve_vec(&lh, &r1_adj), dw)
            }
        };

        // Direction for a given complementarity target R_c
        let direction = |rc: Option<&[DMat]>| -> (Vec<DMat>, Vec<f64>, Vec<f64>, Vec<DMat>) {
            // Ucore = R_c Z^{-1} - X - X Rd Z^{-1}
            let mut ucore: Vec<DMat> = Vec::with_capacity(nblk);
            for bk in 0..nblk {
                let mut u = match rc {
                    Some(rcs) => matmul(&rcs[bk], &zinv[bk]),
                    None => DMat::zeros(p.block_dims[bk]),
                };
                u.add_scaled(&it.x[bk], -1.0);
                let xrd = matmul(&it.x[bk], &rd[bk]);
                let xrdz = matmul(&xrd, &zinv[bk]);
                u.add_scaled(&xrdz, -1.0);
                ucore.push(u);
            }
            let mut r1 = vec![0.0f64; m];
            for i in 0..m {
                r1[i] = rp[i] - p.cons[i].inner(&ucore);
            }
            let (dy, dw) = solve_aug(&r1, &rf);
            // dZ = Rd - A*(dy)
            let mut dz: Vec<DMat> = rd.clone();
            for i in 0..m {
                if dy[i] != 0.0 {
                    p.cons[i].add_into(&mut dz, -dy[i]);
                }
            }
            // dX = sym(Ucore - X (dZ - Rd) Z^{-1})
            let mut dx: Vec<DMat> = Vec::with_capacity(nblk);
            for bk in 0..nblk {
                let mut t = dz[bk].clone();
                t.add_scaled(&rd[bk], -1.0); // t = -A*(dy)
                let xt = matmul(&it.x[bk], &t);
                let xtz = matmul(&xt, &zinv[bk]);
                let mut dd = ucore[bk].clone();
                dd.add_scaled(&xtz, -1.0);
                dd.symmetrize();
                dx.push(dd);
            }
            (dx, dw, dy, dz)
        };

        // Predictor
        let (dx_aff, _dw_aff, _dy_aff, dz_aff) = direction(None);
        let mut ap_aff = 1.0f64;
        let mut ad_aff = 1.0f64;
        for bk in 0..nblk {
            ap_aff = ap_aff.min(max_step(&lx[bk], &dx_aff[bk]));
            ad_aff = ad_aff.min(max_step(&lz[bk], &dz_aff[bk]));
        }
        let mut mu_aff = 0.0;
        for bk in 0..nblk {
            let mut xa = it.x[bk].clone();
            xa.add_scaled(&dx_aff[bk], ap_aff);
            let mut za = it.z[bk].clone();
            za.add_scaled(&dz_aff[bk], ad_aff);
            mu_aff += xa.trace_dot(&za);
        }
        mu_aff /= ntot as f64;
        let sigma = (mu_aff / mu).powi(3).clamp(1e-8, 1.0);

        // Corrector: R_c = sigma mu I - dX_aff dZ_aff
        let rc: Vec<DMat> = (0..nblk)
            .map(|bk| {
                let mut r = DMat::scaled_identity(p.block_dims[bk], sigma * mu);
                let cross = matmul(&dx_aff[bk], &dz_aff[bk]);
                r.add_scaled(&cross, -1.0);
                r
            })
            .collect();
        let (dx, dw, dy, dz) = direction(Some(&rc));

        let mut ap = 1.0f64;
        let mut ad = 1.0f64;
        for bk in 0..nblk {
            ap = ap.min(tau_frac * max_step(&lx[bk], &dx[bk]));
            ad = ad.min(tau_frac * max_step(&lz[bk], &dz[bk]));
        }
        ap = ap.min(1.0);
        ad = ad.min(1.0);

        for bk in 0..nblk {
            it.x[bk].add_scaled(&dx[bk], ap);
            it.z[bk].add_scaled(&dz[bk], ad);
            it.x[bk].symmetrize();
            it.z[bk].symmetrize();
        }
        for j in 0..k {
            it.w[j] += ap * dw[j];
        }
        for i in 0..m {
            it.y[i] += ad * dy[i];
        }

        if ap.min(ad) < 1e-3 {
            slow_steps += 1;
            if slow_steps == 3 {
                tau_frac = 0.9;
            }
            if slow_steps >= 8 {
                status = SolveStatus::NumericalFailure;
                break;
            }
        } else {
            slow_steps = 0;
        }
    }

    let (_, mut sol) = best.expect("at least one iteration");
    sol.status = status;
    sol.iterations = iterations;
    if status == SolveStatus::NumericalFailure {
        // accept near-misses that still satisfy a relaxed tolerance
        let near = sol.gap <= opts.tol * 100.0
            && sol.primal_residual <= 1e-6
            && sol.dual_residual <= 1e-6;
        if near {
            sol.status = SolveStatus::Optimal;
        }
    }
    sol
}

// ---------------------------------------------------------------------------
// Public problem types
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Sense {
    Min,
    Max,
}

/// Linear objective over PSD blocks with affine equality constraints
/// (real symmetric data).
#[derive(Clone, Debug)]
pub struct SdpProblem {
    pub blocks: Vec<usize>,
    pub objective: Vec<DMat>,
    pub constraints: Vec<(Vec<DMat>, f64)>,
    pub sense: Sense,
}

impl SdpProblem {
    pub fn validate(&self) -> Result<()> {
        if self.objective.len() != self.blocks.len() {
            return Err(Error::BadArgument("one objective matrix per block required".into()));
        }
        for (i, (o, &n)) in self.objective.iter().zip(&self.blocks).enumerate() {
            if o.n != n {
                return Err(Error::DimMismatch(format!("objective block {i} has wrong size")));
            }
        }
        for (ci, (mats, _)) in self.constraints.iter().enumerate() {
            if mats.len() != self.blocks.len() {
                return Err(Error::BadArgument(format!(
                    "constraint {ci} must provide one matrix per block"
                )));
            }
            for (mat, &n) in mats.iter().zip(&self.blocks) {
                if mat.n != n {
                    return Err(Error::DimMismatch(format!("constraint {ci} block size")));
                }
                let mut asym = 0.0f64;
                for r in 0..n {
                    for c in (r + 1)..n {
                        asym = asym.max((mat.at(r, c) - mat.at(c, r)).abs());
                    }
                }
                if asym > 1e-12 {
                    return Err(Error::BadArgument(format!(
                        "constraint {ci} matrix is not symmetric (deviation {asym:.2e})"
                    )));
                }
            }
        }
        Ok(())
    }

    fn lower(&self) -> ConicProblem {
        let mut p = ConicProblem::new(self.blocks.clone());
        let sign = if self.sense == Sense::Min { 1.0 } else { -1.0 };
        for (bk, o) in self.objective.iter().enumerate() {
            p.c[bk] = o.clone();
            if sign < 0.0 {
                p.c[bk].a.iter_mut().for_each(|v| *v = -*v);
            }
        }
        for (mats, rhs) in &self.constraints {
            let mut s = SparseSym::default();
            for (bk, mat) in mats.iter().enumerate() {
                let n = mat.n;
                for r in 0..n {
                    for c in r..n {
                        let v = mat.at(r, c);
                        if v != 0.0 {
                            s.push(bk, r, c, v);
                        }
                    }
                }
            }
            p.add_constraint(s, *rhs);
        }
        p
    }
}

/// Solver verdict for an [`SdpProblem`].
#[derive(Clone, Debug)]
pub struct SdpSolution {
    pub status: SolveStatus,
    pub primal_value: f64,
    pub dual_value: f64,
    pub optimizers: Vec<DMat>,
    pub dual_y: Vec<f64>,
    pub dual_slack: Vec<DMat>,
    pub gap: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
}

/// Solve a real symmetric-data SDP.
pub fn solve(p: &SdpProblem, tol: f64) -> Result<SdpSolution> {
    p.validate()?;
    let conic = p.lower();
    let sol = solve_conic(&conic, &SolverOptions { tol, ..Default::default() });
    let sign = if p.sense == Sense::Min { 1.0 } else { -1.0 };
    Ok(SdpSolution {
        status: sol.status,
        primal_value: sign * sol.primal_value,
        dual_value: sign * sol.dual_value,
        optimizers: sol.x,
        dual_y: sol.y.iter().map(|v| sign * v).collect(),
        dual_slack: sol.z,
        gap: sol.gap,
        primal_residual: sol.primal_residual,
        dual_residual: sol.dual_residual,
        iterations: sol.iterations,
    })
}

// ---------------------------------------------------------------------------
// Complex-to-real embedding
// ---------------------------------------------------------------------------

/// Real embedding `[[Re H, -Im H], [Im H, Re H]]` of a Hermitian matrix.
///
/// `H >= 0` iff the image is PSD; every eigenvalue appears with doubled
/// multiplicity, and `Tr(realify(A) realify(B)) = 2 Re Tr(A B)`.
pub fn realify(h: &CMatrix) -> Result<DMat> {
    let scale = h.max_abs().max(1.0);
    let err = h.hermitian_error();
    if err > 1e-12 * scale {
        return Err(Error::NotHermitian(err));
    }
    let n = h.n();
    let mut out = DMat::zeros(2 * n);
    for r in 0..n {
        for c in 0..n {
            let z = h.at(r, c);
            out.set(r, c, z.re);
            out.set(n + r, n + c, z.re);
            out.set(r, n + c, -z.im);
            out.set(n + r, c, z.im);
        }
    }
    Ok(out)
}

/// Inverse of [`realify`] on solver output:
/// `X_c = (X11 + X22)/2 + i (X21 - X12)/2`.
pub fn derealify(x: &DMat, dims: crate::tensor::SystemDims) -> Result<CMatrix> {
    let n = dims.total();
    if x.n != 2 * n {
        return Err(Error::DimMismatch(format!(
            "expected a {}x{} real matrix for complex dimension {n}",
            2 * n,
            2 * n
        )));
    }
    Ok(CMatrix::from_fn(dims, |r, c| {
        Complex64::new(
            0.5 * (x.at(r, c) + x.at(n + r, n + c)),
            0.5 * (x.at(n + r, c) - x.at(r, n + c)),
        )
    }))
}

// ---------------------------------------------------------------------------
// Hermitian-data layers
// ---------------------------------------------------------------------------

/// Sparse Hermitian matrix: canonical entries with `r <= c`; an off-diagonal
/// entry `(r, c, z)` implies `conj(z)` at `(c, r)`; diagonal entries must be
/// real.
#[derive(Clone, Debug, Default)]
pub struct HermSparse {
    pub entries: Vec<(usize, usize, usize, Complex64)>, // (block, r, c, value)
}

impl HermSparse {
    pub fn push(&mut self, block: usize, r: usize, c: usize, z: Complex64) {
        if z == Complex64::new(0.0, 0.0) {
            return;
        }
        let (r, c, z) = if r <= c { (r, c, z) } else { (c, r, z.conj()) };
        debug_assert!(r != c || z.im.abs() < 1e-14, "diagonal entries must be real");
        self.entries.push((block, r, c, z));
    }
}

/// Append the realified image of a Hermitian entry to a sparse symmetric
/// constraint over realified blocks (block `bk` of complex dimension `n`).
fn push_realified(s: &mut SparseSym, bk: usize, n: usize, r: usize, c: usize, z: Complex64) {
    if r == c {
        s.push(bk, r, r, z.re);
        s.push(bk, n + r, n + r, z.re);
    } else {
        s.push(bk, r, c, z.re);
        s.push(bk, n + r, n + c, z.re);
        s.push(bk, r, n + c, -z.im);
        s.push(bk, c, n + r, z.im);
    }
}

/// Hermitian-data SDP in primal form: optimize `Re Tr[C X]` over PSD blocks
/// subject to `Re Tr[A_i X] = b_i` with Hermitian `C`, `A_i`.
#[derive(Clone, Debug)]
pub struct HermitianSdp {
    pub block_dims: Vec<usize>,
    objective: Vec<Vec<Complex64>>, // dense per block
    constraints: Vec<(HermSparse, f64)>,
    pub sense: Sense,
}

/// Solution of a [`HermitianSdp`] with complex optimizers.
#[derive(Clone, Debug)]
pub struct HermitianSolution {
    pub status: SolveStatus,
    pub value: f64,
    pub dual_value: f64,
    /// Optimizer per block, de-realified (length = complex dim squared).
    pub optimizers: Vec<Vec<Complex64>>,
    pub dual_y: Vec<f64>,
    pub gap: f64,
    pub iterations: usize,
}

impl HermitianSdp {
    pub fn new(block_dims: Vec<usize>, sense: Sense) -> Self {
        let objective =
            block_dims.iter().map(|&n| vec![Complex64::new(0.0, 0.0); n * n]).collect();
        HermitianSdp { block_dims, objective, constraints: Vec::new(), sense }
    }

    /// Accumulate into the objective: adds `z` at `(r, c)` and `conj(z)` at
    /// `(c, r)` when off-diagonal.
    pub fn objective_entry(&mut self, block: usize, r: usize, c: usize, z: Complex64) {
        let n = self.block_dims[block];
        self.objective[block][r * n + c] += z;
        if r != c {
            self.objective[block][c * n + r] += z.conj();
        }
    }

    pub fn set_objective_matrix(&mut self, block: usize, mat: &CMatrix) {
        let n = self.block_dims[block];
        assert_eq!(mat.n(), n, "objective block dimension");
        for r in 0..n {
            for c in 0..n {
                self.objective[block][r * n + c] = mat.at(r, c);
            }
        }
    }

    pub fn add_constraint(&mut self, a: HermSparse, rhs: f64) {
        self.constraints.push((a, rhs));
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn solve(&self, tol: f64) -> Result<HermitianSolution> {
        let real_dims: Vec<usize> = self.block_dims.iter().map(|&n| 2 * n).collect();
        let mut p = ConicProblem::new(real_dims);
        let sign = if self.sense == Sense::Min { 1.0 } else { -1.0 };
        // objective: (sign/2) realify(C)
        for (bk, &n) in self.block_dims.iter().enumerate() {
            let m2 = 2 * n;
            for r in 0..n {
                for c in 0..n {
                    let z = self.objective[bk][r * n + c] * 0.5 * sign;
                    p.c[bk].a[r * m2 + c] += z.re;
                    p.c[bk].a[(n + r) * m2 + (n + c)] += z.re;
                    p.c[bk].a[r * m2 + (n + c)] += -z.im;
                    p.c[bk].a[(n + r) * m2 + c] += z.im;
                }
            }
            p.c[bk].symmetrize();
        }
        for (a, rhs) in &self.constraints {
            let mut s = SparseSym::default();
            for &(bk, r, c, z) in &a.entries {
                push_realified(&mut s, bk, self.block_dims[bk], r, c, z);
            }
            p.add_constraint(s, 2.0 * rhs);
        }
        let sol = solve_conic(&p, &SolverOptions { tol, ..Default::default() });
        let mut optimizers = Vec::with_capacity(self.block_dims.len());
        for (bk, &n) in self.block_dims.iter().enumerate() {
            let x = &sol.x[bk];
            let mut c = vec![Complex64::new(0.0, 0.0); n * n];
            for r in 0..n {
                for cc in 0..n {
                    c[r * n + cc] = Complex64::new(
                        0.5 * (x.at(r, cc) + x.at(n + r, n + cc)),
                        0.5 * (x.at(n + r, cc) - x.at(r, n + cc)),
                    );
                }
            }
            optimizers.push(c);
        }
        Ok(HermitianSolution {
            status: sol.status,
            value: sign * sol.primal_value,
            dual_value: sign * sol.dual_value,
            optimizers,
            dual_y: sol.y.iter().map(|v| 2.0 * sign * v).collect(),
            gap: sol.gap,
            iterations: sol.iterations,
        })
    }
}

/// Linear matrix inequality problem over free real variables:
///
/// ```text
/// maximize   obj' y
/// subject to F0 - sum_k y_k F_k >= 0      (per Hermitian block)
///            E y = e
/// ```
#[derive(Clone, Debug)]
pub struct LmiProblem {
    pub block_dims: Vec<usize>,
    pub n_vars: usize,
    pub objective: Vec<f64>,
    f0: Vec<Vec<Complex64>>,
    fk: Vec<HermSparse>,
    equalities: Vec<(Vec<(usize, f64)>, f64)>,
}

/// Solution of an [`LmiProblem`].
#[derive(Clone, Debug)]
pub struct LmiSolution {
    pub status: SolveStatus,
    pub value: f64,
    pub y: Vec<f64>,
    pub gap: f64,
    pub iterations: usize,
}

impl LmiProblem {
    pub fn new(block_dims: Vec<usize>, n_vars: usize) -> Self {
        let f0 = block_dims.iter().map(|&n| vec![Complex64::new(0.0, 0.0); n * n]).collect();
        LmiProblem {
            block_dims,
            n_vars,
            objective: vec![0.0; n_vars],
            f0,
            fk: vec![HermSparse::default(); n_vars],
            equalities: Vec::new(),
        }
    }

    /// Accumulate `z` into the constant term `F0` (Hermitian pairing).
    pub fn f0_entry(&mut self, block: usize, r: usize, c: usize, z: Complex64) {
        let n = self.block_dims[block];
        self.f0[block][r * n + c] += z;
        if r != c {
            self.f0[block][c * n + r] += z.conj();
        }
    }

    /// Accumulate `z` into `F_k`, the LMI coefficient of variable `k`.
    pub fn fk_entry(&mut self, var: usize, block: usize, r: usize, c: usize, z: Complex64) {
        self.fk[var].push(block, r, c, z);
    }

    pub fn add_equality(&mut self, terms: Vec<(usize, f64)>, rhs: f64) {
        self.equalities.push((terms, rhs));
    }

    pub fn solve(&self, tol: f64) -> Result<LmiSolution> {
        // Lower onto the conic core so that the *dual* of the core problem is
        // exactly this LMI: A_k = realify(F_k), b_k = obj_k, C = realify(F0),
        // and the equalities become the free-variable coupling G.
        let real_dims: Vec<usize> = self.block_dims.iter().map(|&n| 2 * n).collect();
        let mut p = ConicProblem::new(real_dims);
        for (bk, &n) in self.block_dims.iter().enumerate() {
            let m2 = 2 * n;
            for r in 0..n {
                for c in 0..n {
                    let z = self.f0[bk][r * n + c];
                    p.c[bk].a[r * m2 + c] += z.re;
                    p.c[bk].a[(n + r) * m2 + (n + c)] += z.re;
                    p.c[bk].a[r * m2 + (n + c)] += -z.im;
                    p.c[bk].a[(n + r) * m2 + c] += z.im;
                }
            }
            p.c[bk].symmetrize();
        }
        p.n_free = self.equalities.len();
        p.f = self.equalities.iter().map(|(_, rhs)| *rhs).collect();
        let mut g_per_var: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.n_vars];
        for (j, (terms, _)) in self.equalities.iter().enumerate() {
            for &(var, coeff) in terms {
                g_per_var[var].push((j, coeff));
            }
        }
        for k in 0..self.n_vars {
            let mut s = SparseSym::default();
            for &(bk, r, c, z) in &self.fk[k].entries {
                push_realified(&mut s, bk, self.block_dims[bk], r, c, z);
            }
            p.add_constraint_with_free(s, g_per_var[k].clone(), self.objective[k]);
        }
        let sol = solve_conic(&p, &SolverOptions { tol, ..Default::default() });
        Ok(LmiSolution {
            status: sol.status,
            value: sol.dual_value,
            y: sol.y,
            gap: sol.gap,
            iterations: sol.iterations,
        })
    }
}
