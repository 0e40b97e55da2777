//! The core estimation quantities: the minimal average cost of phase
//! estimation under coherence constraints, its dual program, the advantage
//! monotone it induces, weight-based bounds, and the multi-copy comb
//! relaxation that reduces many copies of a small phase gate to one large
//! one.
//!
//! All programs are solved with the embedded interior-point method; the
//! primal/dual pairs here are built as *separate* problems so their
//! agreement is a genuine cross-check, not an identity.

use num_complex::Complex64;
use std::collections::{HashMap, HashSet};

use crate::channels::{solve_mio_choi, ChoiMatrix};
use crate::cost::CostFunction;
use crate::error::{Error, Result};
use crate::sdp::{HermSparse, HermitianSdp, LmiProblem, Sense, SolveStatus};
use crate::states::{robustness_of_coherence, weight_of_coherence, DensityMatrix};
use crate::tensor::{partial_transpose, tensor, CMatrix, Label, SystemDims, C_ONE, C_ZERO};

/// Interior-point tolerance for the single-copy programs.
const SINGLE_TOL: f64 = 1e-9;
/// Interior-point tolerance for the larger comb programs.
const COMB_TOL: f64 = 1e-8;

/// Desk-scale cap on the total comb dimension `dim(rho) * d^(2N)`.
const COMB_DIM_CAP: usize = 64;

/// Outcome of an estimation program.
#[derive(Clone, Debug)]
pub struct EstimationResult {
    pub value: f64,
    /// Optimizing channel, for programs whose variable is a channel Choi
    /// matrix.
    pub optimizer: Option<ChoiMatrix>,
    /// Optimizing operator, for programs over combs.
    pub operator: Option<CMatrix>,
    pub dual_value: f64,
    /// Relative primal-dual gap reported by the solver.
    pub gap: f64,
    /// Dual variables, when available.
    pub certificate: Option<Vec<f64>>,
}

/// `M = (d-1)N + 1`: the dimension of the single phase gate equivalent to
/// `N` copies of a `d`-dimensional one (the digit sums of `N` base-`d`
/// digits take exactly `M` values).
pub fn effective_dim(d: usize, n: usize) -> Result<usize> {
    if d < 2 {
        return Err(Error::BadArgument("the phase gate dimension d must be >= 2".into()));
    }
    if n < 1 {
        return Err(Error::BadArgument("the copy count must be >= 1".into()));
    }
    Ok((d - 1) * n + 1)
}

fn objective_matrix(rho: &DensityMatrix, y: &CMatrix) -> Result<CMatrix> {
    let rho_in = rho.relabel("in");
    let rho_t = partial_transpose(rho_in.mat(), &[Label::from("in")])?;
    tensor(&rho_t, y)
}

/// Minimal average cost with a single phase gate of dimension `m`:
/// the SDP `min Tr[(rho^T (x) Y) J]` over Choi matrices `J` of MIO channels
/// from `dim(rho)` to `m`.
pub fn cmin_single(
    rho: &DensityMatrix,
    cost: &CostFunction,
    m: usize,
) -> Result<EstimationResult> {
    let y = cost.cost_matrix(m)?;
    let obj = objective_matrix(rho, &y.matrix_on("out"))?;
    let in_dims = SystemDims::single("in", rho.dim());
    let out_dims = SystemDims::single("out", m);
    let (sol, choi) = solve_mio_choi(&in_dims, &out_dims, &obj, Sense::Min, SINGLE_TOL)?;
    if sol.status != SolveStatus::Optimal {
        return Err(Error::Solver(format!(
            "minimal-cost SDP ended with {:?} (gap {:.2e})",
            sol.status, sol.gap
        )));
    }
    Ok(EstimationResult {
        value: sol.value,
        optimizer: Some(choi),
        operator: None,
        dual_value: sol.dual_value,
        gap: sol.gap,
        certificate: Some(sol.dual_y),
    })
}

/// Dual of the single-copy program:
/// `max Tr B` subject to `rho^T (x) Y - B (x) 1 - A >= 0` with `B` Hermitian
/// on the input and `A` Hermitian supported on entries diagonal on the input
/// and off-diagonal on the output.
///
/// Solved as its own matrix inequality over free variables, independently of
/// the primal encoding.
pub fn cmin_dual(rho: &DensityMatrix, cost: &CostFunction, m: usize) -> Result<EstimationResult> {
    let d0 = rho.dim();
    let y = cost.cost_matrix(m)?;
    let dim = d0 * m;

    // variables: B (d0 x d0 Hermitian), A supported on ((i,a),(i,b)), a < b
    let n_b = d0 * d0; // diag: d0, offdiag pairs: 2 each
    let n_a = d0 * m * (m - 1); // re+im per (i, a<b)
    let mut lmi = LmiProblem::new(vec![dim], n_b + n_a);

    // F0 = rho^T (x) Y
    let obj = objective_matrix(rho, &y.matrix_on("out"))?;
    for r in 0..dim {
        for c in r..dim {
            let z = obj.at(r, c);
            if z != C_ZERO {
                lmi.f0_entry(0, r, c, z);
            }
        }
    }

    // B parameters: maximize Tr B = sum of diagonal parameters;
    // (B (x) 1)[(n,a),(m,b)] = B[n,m] delta_ab
    let mut var = 0usize;
    for p in 0..d0 {
        lmi.objective[var] = 1.0;
        for a in 0..m {
            lmi.fk_entry(var, 0, p * m + a, p * m + a, C_ONE);
        }
        var += 1;
    }
    for p in 0..d0 {
        for q in (p + 1)..d0 {
            for a in 0..m {
                lmi.fk_entry(var, 0, p * m + a, q * m + a, C_ONE);
                lmi.fk_entry(var + 1, 0, p * m + a, q * m + a, Complex64::new(0.0, 1.0));
            }
            var += 2;
        }
    }
    // A parameters
    for i in 0..d0 {
        for a in 0..m {
            for b in (a + 1)..m {
                lmi.fk_entry(var, 0, i * m + a, i * m + b, C_ONE);
                lmi.fk_entry(var + 1, 0, i * m + a, i * m + b, Complex64::new(0.0, 1.0));
                var += 2;
            }
        }
    }
    debug_assert_eq!(var, n_b + n_a);

    let sol = lmi.solve(SINGLE_TOL)?;
    if sol.status != SolveStatus::Optimal {
        return Err(Error::Solver(format!("dual cost program ended with {:?}", sol.status)));
    }
    Ok(EstimationResult {
        value: sol.value,
        optimizer: None,
        operator: None,
        dual_value: sol.value,
        gap: sol.gap,
        certificate: Some(sol.y),
    })
}

/// Advantage over prior-only guessing: `A = C_0 - cmin_single`.
///
/// A convex, faithful coherence monotone whenever the cost matrix has
/// off-diagonal entries.
pub fn advantage(rho: &DensityMatrix, cost: &CostFunction, m: usize) -> Result<f64> {
    let res = cmin_single(rho, cost, m)?;
    Ok(cost.c_zero() - res.value)
}

/// Minimal average cost without coherence constraints: the smallest
/// eigenvalue of the cost matrix, reached by its eigenvector as probe state.
pub fn cmin_unconstrained(cost: &CostFunction, m: usize) -> Result<f64> {
    Ok(cost.cost_matrix(m)?.lambda_min())
}

/// Weight-of-coherence lower bound on the minimal average cost:
/// `lambda_min + (C_0 - lambda_min)(1 - W(rho))`.
pub fn weight_bound(rho: &DensityMatrix, cost: &CostFunction, m: usize) -> Result<f64> {
    let y = cost.cost_matrix(m)?;
    let w = weight_of_coherence(rho)?;
    Ok(y.lambda_min() + (y.c0() - y.lambda_min()) * (1.0 - w))
}

/// Exact qubit value at `m = 2`:
/// `C_0 - (C_0 - lambda_min(Y)) C_R(rho)` with the robustness of coherence.
pub fn qubit_exact(rho: &DensityMatrix, cost: &CostFunction) -> Result<f64> {
    if rho.dim() != 2 {
        return Err(Error::BadArgument("the closed form applies to qubit states".into()));
    }
    let y = cost.cost_matrix(2)?;
    let cr = robustness_of_coherence(rho)?;
    Ok(y.c0() - (y.c0() - y.lambda_min()) * cr)
}

// ---------------------------------------------------------------------------
// Multi-copy machinery
// ---------------------------------------------------------------------------

/// The cost-weighted average of the (transposed) Choi matrices of `N`
/// parallel phase gates: entries `c_{H(m)-H(n)}` on `|nn><mm|`, where `H` is
/// the base-`d` digit sum.
#[derive(Clone, Debug)]
pub struct CostChoi {
    pub d: usize,
    pub n: usize,
    pub mat: CMatrix,
}

/// Base-d digits (least significant first), padded to `len`.
fn digits(mut x: usize, d: usize, len: usize) -> Vec<usize> {
    let mut v = Vec::with_capacity(len);
    for _ in 0..len {
        v.push(x % d);
        x /= d;
    }
    v
}

/// Digit sum of `x` in base `d` with `len` digits.
pub fn digit_sum(x: usize, d: usize, len: usize) -> usize {
    digits(x, d, len).iter().sum()
}

/// Build the cost-weighted Choi average on interleaved systems
/// `1, 2, .., 2N` (odd = gate inputs, even = gate outputs, each of
/// dimension `d`).
pub fn cost_choi(cost: &CostFunction, d: usize, n: usize) -> Result<CostChoi> {
    if d < 2 || n < 1 {
        return Err(Error::BadArgument("need d >= 2 and n >= 1".into()));
    }
    let dn = d.checked_pow(n as u32).ok_or_else(|| Error::SizeCap("d^n overflows".into()))?;
    if dn > 16 {
        return Err(Error::SizeCap(format!("d^n = {dn} exceeds the desk-scale cap 16")));
    }
    let m = effective_dim(d, n)?;
    let mut coeffs = HashMap::new();
    for k in -(m as i64 - 1)..=(m as i64 - 1) {
        coeffs.insert(k, cost.fourier_coefficient(k)?);
    }
    let pairs: Vec<(Label, usize)> =
        (1..=2 * n).map(|j| (Label::from(j.to_string()), d)).collect();
    let dims = SystemDims::new(&pairs)?;
    let total = dims.total();
    let mut mat = CMatrix::zeros(dims);
    for row in 0..total {
        let rd = digits_interleaved(row, d, n);
        if !rd.paired {
            continue;
        }
        for col in 0..total {
            let cd = digits_interleaved(col, d, n);
            if !cd.paired {
                continue;
            }
            let delta = cd.odd_sum as i64 - rd.odd_sum as i64;
            mat.set(row, col, coeffs[&delta]);
        }
    }
    Ok(CostChoi { d, n, mat })
}

struct InterleavedDigits {
    /// true iff every odd-system digit equals its even partner (the
    /// `|nn><..|` support pattern)
    paired: bool,
    odd_sum: usize,
}

/// Digits of a flat index over systems `1..2N` (row-major, system 1 most
/// significant), reporting the pairing pattern and the odd-digit sum.
fn digits_interleaved(flat: usize, d: usize, n: usize) -> InterleavedDigits {
    let count = 2 * n;
    let mut ds = vec![0usize; count];
    let mut x = flat;
    for p in (0..count).rev() {
        ds[p] = x % d;
        x /= d;
    }
    let mut paired = true;
    let mut odd_sum = 0;
    for j in 0..n {
        let odd = ds[2 * j]; // system 2j+1 at position 2j
        let even = ds[2 * j + 1]; // system 2j+2 at position 2j+1
        if odd != even {
            paired = false;
        }
        odd_sum += odd;
    }
    InterleavedDigits { paired, odd_sum }
}

/// Index bookkeeping for the multi-copy comb variable: digit 0 is the probe
/// input (dim `d0`), digits `1..=2N` are the network systems (dim `d` each;
/// odd = slot inputs, even = slot outputs).
#[derive(Clone)]
struct CombIndex {
    d0: usize,
    d: usize,
    n: usize,
}

impl CombIndex {
    fn total(&self) -> usize {
        self.d0 * self.d.pow(2 * self.n as u32)
    }

    fn split(&self, flat: usize) -> Vec<usize> {
        // digit vector: [digit0, digit1, .., digit2N], row-major with digit0
        // most significant
        let mut out = vec![0usize; 2 * self.n + 1];
        let mut x = flat;
        for p in (1..=2 * self.n).rev() {
            out[p] = x % self.d;
            x /= self.d;
        }
        out[0] = x;
        out
    }

    fn join(&self, ds: &[usize]) -> usize {
        let mut x = ds[0];
        for p in 1..=2 * self.n {
            x = x * self.d + ds[p];
        }
        x
    }

    fn odd_sum(&self, ds: &[usize]) -> usize {
        (0..self.n).map(|j| ds[2 * j + 1]).sum()
    }
}

/// Linear functional over the comb variable's entries.
type Functional = Vec<(usize, usize, Complex64)>;

/// Convert `L(K) = rhs` (complex) into one or two real Hermitian-pairing
/// constraints `Re Tr[A K] = b`.
fn functional_to_constraints(terms: &Functional, rhs: Complex64) -> Vec<(HermSparse, f64)> {
    let mut out = Vec::new();
    for (flip, rhs_part) in [(C_ONE, rhs.re), (Complex64::new(0.0, -1.0), rhs.im)] {
        // accumulate A entries: term alpha K_{r,c} contributes alpha/2 at
        // (c, r) plus the Hermitian image; diagonal terms keep Re(alpha)
        let mut acc: HashMap<(usize, usize), Complex64> = HashMap::new();
        for &(r, c, alpha) in terms {
            let a = alpha * flip;
            if r == c {
                *acc.entry((r, r)).or_insert(C_ZERO) += Complex64::new(a.re, 0.0);
            } else {
                // canonical position (min, max); pushing (c, r, a/2) in
                // HermSparse convention means value a/2 at (c,r) when c<r
                let half = a * 0.5;
                if c <= r {
                    *acc.entry((c, r)).or_insert(C_ZERO) += half;
                } else {
                    *acc.entry((r, c)).or_insert(C_ZERO) += half.conj();
                }
            }
        }
        let mut sparse = HermSparse::default();
        let mut keys: Vec<_> = acc.keys().copied().collect();
        keys.sort_unstable();
        for key in keys {
            let v = acc[&key];
            if v.norm() > 1e-15 {
                sparse.push(0, key.0, key.1, v);
            }
        }
        if sparse.entries.is_empty() {
            // a trivially-zero functional with nonzero rhs cannot happen for
            // well-formed programs; skip the no-op row either way
            continue;
        }
        out.push((sparse, rhs_part));
    }
    out
}

/// Structural key for deduplicating constraints.
fn constraint_key(s: &HermSparse, rhs: f64) -> String {
    use std::fmt::Write;
    let mut k = String::new();
    for &(b, r, c, z) in &s.entries {
        let _ = write!(k, "{b},{r},{c},{:.14e},{:.14e};", z.re, z.im);
    }
    let _ = write!(k, "|{rhs:.14e}");
    k
}

/// Minimal average cost for `N` copies of the `d`-dimensional phase gate,
/// via the covariant comb relaxation: a single SDP over a positive operator
/// whose phase-averaged image must satisfy the causal comb hierarchy and the
/// dephasing-compatibility constraints.
///
/// Equals [`cmin_single`] at `m = (d-1)N + 1`.
pub fn cmin_multi_copy(
    rho: &DensityMatrix,
    cost: &CostFunction,
    d: usize,
    n: usize,
) -> Result<EstimationResult> {
    let idx = CombIndex { d0: rho.dim(), d, n };
    let dim = idx.total();
    if dim > COMB_DIM_CAP {
        return Err(Error::SizeCap(format!(
            "comb dimension {dim} exceeds the desk-scale cap {COMB_DIM_CAP}"
        )));
    }
    let m = effective_dim(d, n)?;
    let xm = cost_choi(cost, d, n)?;

    let mut prob = HermitianSdp::new(vec![dim], Sense::Min);
    // objective M * (rho^T (x) X)
    let dn2 = d.pow(2 * n as u32);
    for i in 0..idx.d0 {
        for j in 0..idx.d0 {
            let w = rho.mat().at(j, i) * m as f64; // rho^T[i,j] = rho[j,i]
            if w == C_ZERO {
                continue;
            }
            for u in 0..dn2 {
                for v in 0..dn2 {
                    let x = xm.mat.at(u, v);
                    if x == C_ZERO {
                        continue;
                    }
                    let row = i * dn2 + u;
                    let col = j * dn2 + v;
                    // off-diagonal entries are visited in both orders and
                    // Hermitian-paired each time, so they enter at half
                    // weight; the diagonal is visited once
                    let scale = if row == col { 1.0 } else { 0.5 };
                    prob.objective_entry(0, row, col, w * x * scale);
                }
            }
        }
    }

    let mut seen: HashSet<String> = HashSet::new();
    let mut push_eq = |prob: &mut HermitianSdp, terms: &Functional, rhs: Complex64| {
        for (sparse, b) in functional_to_constraints(terms, rhs) {
            let key = constraint_key(&sparse, b);
            if seen.insert(key) {
                prob.add_constraint(sparse, b);
            }
        }
    };

    // (1) zero entries: dephasing-compatibility levels j = 0..N-1 plus the
    //     top comb level (off-diagonal on the last slot output after phase
    //     averaging)
    let mut zero_pairs: HashSet<(usize, usize)> = HashSet::new();
    let total = dim;
    for row in 0..total {
        let rd = idx.split(row);
        for col in (row + 1)..total {
            let cd = idx.split(col);
            // dephasing levels
            for j in 0..n {
                let ins_equal = (0..=j).all(|k| {
                    let pos = 2 * k; // digits 0, 2, .., 2j
                    rd[pos] == cd[pos]
                });
                if !ins_equal {
                    continue;
                }
                let outs_equal = (0..=j).all(|k| rd[2 * k + 1] == cd[2 * k + 1]);
                if !outs_equal {
                    zero_pairs.insert((row, col));
                }
            }
            // top comb level: S = M Pi_H(K); entries with unequal last-even
            // digits must vanish (after the digit-sum filter)
            if idx.odd_sum(&rd) == idx.odd_sum(&cd) && rd[2 * n] != cd[2 * n] {
                zero_pairs.insert((row, col));
            }
        }
    }
    let mut zs: Vec<_> = zero_pairs.into_iter().collect();
    zs.sort_unstable();
    for (r, c) in zs {
        push_eq(&mut prob, &vec![(r, c, C_ONE)], C_ZERO);
    }

    // (2) top-level factorization: S[(u,a),(v,a)] independent of a
    {
        let sub = dim / d; // digits 0..2N-1
        for us in 0..sub {
            for vs in 0..sub {
                // reconstruct digit vectors with last digit appended
                for a in 1..d {
                    let mut terms: Functional = Vec::new();
                    for (aa, sign) in [(a, 1.0), (0usize, -1.0)] {
                        let row = us * d + aa;
                        let col = vs * d + aa;
                        let rd = idx.split(row);
                        let cd = idx.split(col);
                        if idx.odd_sum(&rd) != idx.odd_sum(&cd) {
                            continue; // filtered to zero
                        }
                        terms.push((row, col, Complex64::new(sign, 0.0)));
                    }
                    if terms.is_empty() {
                        continue;
                    }
                    // canonical: only emit for flat(us) <= flat(vs); the
                    // conjugate pair adds nothing
                    if us > vs {
                        continue;
                    }
                    push_eq(&mut prob, &terms, C_ZERO);
                }
            }
        }
    }

    // (3) intermediate levels j = N-1..1: T = Tr_{2j+1}[R^(j)] must factor
    //     as (.)(x) 1 on digit 2j. R^(j) entries are phase-filtered sums of
    //     diagonally-traced entries of K over digits 2j+2..2N.
    for level in (1..n).rev() {
        // remaining digits: 0..=2*level+1; traced digits: 2*level+2..=2N
        let live = 2 * level + 2; // digits 0..2*level+1
        let traced_count = 2 * n + 1 - live;
        let live_dims: Vec<usize> = (0..live).map(|p| if p == 0 { idx.d0 } else { d }).collect();
        let live_total: usize = live_dims.iter().product();
        let t_range = d.pow(traced_count as u32);
        // T lives on digits 0..2*level (digit 2*level+1 traced too)
        let make_functional = |w_digits: &[usize], x_digits: &[usize]| -> Functional {
            // w_digits, x_digits: digits 0..2*level (length 2*level+1)
            let mut terms = Vec::new();
            // odd-sum criterion on the live odd digits 1,3,..,2*level-1
            let w_odd: usize = (0..level).map(|k| w_digits[2 * k + 1]).sum();
            let x_odd: usize = (0..level).map(|k| x_digits[2 * k + 1]).sum();
            if w_odd != x_odd {
                return terms;
            }
            for s in 0..d {
                // digit 2*level+1 (traced odd digit)
                for t in 0..t_range {
                    let t_digits = digits(t, d, traced_count);
                    let mut rd = vec![0usize; 2 * n + 1];
                    let mut cd = vec![0usize; 2 * n + 1];
                    rd[..=2 * level].copy_from_slice(w_digits);
                    cd[..=2 * level].copy_from_slice(x_digits);
                    rd[2 * level + 1] = s;
                    cd[2 * level + 1] = s;
                    for (k, &tv) in t_digits.iter().enumerate() {
                        rd[2 * level + 2 + k] = tv;
                        cd[2 * level + 2 + k] = tv;
                    }
                    terms.push((idx.join(&rd), idx.join(&cd), C_ONE));
                }
            }
            terms
        };
        // enumerate T entries: digits 0..2*level with the factorization test
        // on digit 2*level
        let t_live = live_total / (d * d); // digits 0..2*level-1
        for wf in 0..t_live {
            for xf in 0..t_live {
                // digits 0..2*level-1 for both sides
                let wd = split_digits(wf, &live_dims[..live - 2]);
                let xd = split_digits(xf, &live_dims[..live - 2]);
                // off-diagonal on digit 2*level must vanish
                for e in 0..d {
                    for f in 0..d {
                        if e == f {
                            continue;
                        }
                        if (wf, e) > (xf, f) {
                            continue; // conjugate duplicate
                        }
                        let mut w_full = wd.clone();
                        w_full.push(e);
                        let mut x_full = xd.clone();
                        x_full.push(f);
                        let terms = make_functional(&w_full, &x_full);
                        if !terms.is_empty() {
                            push_eq(&mut prob, &terms, C_ZERO);
                        }
                    }
                }
                // diagonal blocks equal across digit 2*level
                if wf > xf {
                    continue;
                }
                for a in 1..d {
                    let mut terms: Functional = Vec::new();
                    for (aa, sign) in [(a, 1.0f64), (0, -1.0)] {
                        let mut w_full = wd.clone();
                        w_full.push(aa);
                        let mut x_full = xd.clone();
                        x_full.push(aa);
                        for (r, c, z) in make_functional(&w_full, &x_full) {
                            terms.push((r, c, z * sign));
                        }
                    }
                    if !terms.is_empty() {
                        push_eq(&mut prob, &terms, C_ZERO);
                    }
                }
            }
        }
    }

    // (4) bottom level: Tr_1[R^(0)] = 1_0, i.e.
    //     (M/d^N) sum_{s, t} K[(i, s, t), (i', s, t)] = delta_{i i'}
    {
        let t_range = d.pow((2 * n - 1) as u32); // digits 2..2N
        let scale = m as f64 / d.pow(n as u32) as f64;
        for i in 0..idx.d0 {
            for ip in i..idx.d0 {
                let mut terms: Functional = Vec::new();
                for s in 0..d {
                    for t in 0..t_range {
                        let t_digits = digits(t, d, 2 * n - 1);
                        let mut rd = vec![0usize; 2 * n + 1];
                        let mut cd = vec![0usize; 2 * n + 1];
                        rd[0] = i;
                        cd[0] = ip;
                        rd[1] = s;
                        cd[1] = s;
                        for (k, &tv) in t_digits.iter().enumerate() {
                            rd[2 + k] = tv;
                            cd[2 + k] = tv;
                        }
                        terms.push((
                            idx.join(&rd),
                            idx.join(&cd),
                            Complex64::new(scale, 0.0),
                        ));
                    }
                }
                let rhs = if i == ip { C_ONE } else { C_ZERO };
                push_eq(&mut prob, &terms, rhs);
            }
        }
    }

    let sol = prob.solve(COMB_TOL)?;
    if sol.status != SolveStatus::Optimal {
        return Err(Error::Solver(format!(
            "multi-copy comb SDP ended with {:?} (gap {:.2e})",
            sol.status, sol.gap
        )));
    }
    let mut pairs = vec![(Label::from("0"), idx.d0)];
    for p in 1..=2 * n {
        pairs.push((Label::from(p.to_string()), d));
    }
    let op = CMatrix::from_data(SystemDims::new(&pairs)?, sol.optimizers[0].clone())?;
    Ok(EstimationResult {
        value: sol.value,
        optimizer: None,
        operator: Some(op),
        dual_value: sol.dual_value,
        gap: sol.gap,
        certificate: Some(sol.dual_y),
    })
}

fn split_digits(flat: usize, dims: &[usize]) -> Vec<usize> {
    let mut out = vec![0usize; dims.len()];
    let mut x = flat;
    for p in (0..dims.len()).rev() {
        out[p] = x % dims[p];
        x /= dims[p];
    }
    out
}

/// Dual of the multi-copy comb program, solved numerically as a matrix
/// inequality over nested Hermitian variables.
///
/// Strong duality makes it agree with [`cmin_multi_copy`]; the nesting
/// equalities force the top variable's partial traces to factor level by
/// level, and the objective is the trace of the bottom variable.
pub fn cmin_multi_copy_dual(
    rho: &DensityMatrix,
    cost: &CostFunction,
    d: usize,
    n: usize,
) -> Result<f64> {
    let idx = CombIndex { d0: rho.dim(), d, n };
    let dim = idx.total();
    if dim > COMB_DIM_CAP {
        return Err(Error::SizeCap(format!(
            "comb dimension {dim} exceeds the desk-scale cap {COMB_DIM_CAP}"
        )));
    }
    let m = effective_dim(d, n)?;
    let xm = cost_choi(cost, d, n)?;

    // variable支持 sets ------------------------------------------------
    // top nested variable: Hermitian on the full space, restricted to the
    // phase-averaged support (equal odd digit sums)
    let mut b_support: Vec<(usize, usize)> = Vec::new();
    for r in 0..dim {
        let rd = idx.split(r);
        for c in r..dim {
            let cd = idx.split(c);
            if idx.odd_sum(&rd) == idx.odd_sum(&cd) {
                b_support.push((r, c));
            }
        }
    }
    // witness variable: union of the dephasing-compatibility supports
    // (diagonal on inputs 0..2j, off-diagonal somewhere on outputs 1..2j+1)
    let mut a_support: Vec<(usize, usize)> = Vec::new();
    for r in 0..dim {
        let rd = idx.split(r);
        for c in (r + 1)..dim {
            let cd = idx.split(c);
            let mut in_any = false;
            for j in 0..n {
                let ins_equal = (0..=j).all(|k| rd[2 * k] == cd[2 * k]);
                let outs_equal = (0..=j).all(|k| rd[2 * k + 1] == cd[2 * k + 1]);
                if ins_equal && !outs_equal {
                    in_any = true;
                    break;
                }
            }
            if in_any {
                a_support.push((r, c));
            }
        }
    }

    // parameter layout: for each support entry, one parameter when diagonal,
    // two (re, im) otherwise
    let mut b_params: HashMap<(usize, usize), usize> = HashMap::new();
    let mut var = 0usize;
    for &(r, c) in &b_support {
        b_params.insert((r, c), var);
        var += if r == c { 1 } else { 2 };
    }
    let mut a_params: HashMap<(usize, usize), usize> = HashMap::new();
    for &(r, c) in &a_support {
        a_params.insert((r, c), var);
        var += 2;
    }
    let n_vars = var;
    let mut lmi = LmiProblem::new(vec![dim], n_vars);

    // objective: Tr of the bottom variable = Tr(top)/d^N
    let tr_scale = 1.0 / d.pow(n as u32) as f64;
    for &(r, c) in &b_support {
        if r == c {
            lmi.objective[b_params[&(r, c)]] = tr_scale;
        }
    }

    // LMI: M rho^T (x) X - M PiH(Btop) - A >= 0
    let dn2 = d.pow(2 * n as u32);
    for i in 0..idx.d0 {
        for j in i..idx.d0 {
            for u in 0..dn2 {
                for v in 0..dn2 {
                    let row = i * dn2 + u;
                    let col = j * dn2 + v;
                    if col < row {
                        continue;
                    }
                    let w = rho.mat().at(j, i) * m as f64;
                    let x = xm.mat.at(u, v);
                    let z = w * x;
                    if z != C_ZERO {
                        // each unordered pair is visited once; f0_entry adds
                        // the Hermitian partner itself
                        lmi.f0_entry(0, row, col, z);
                    }
                }
            }
        }
    }
    for &(r, c) in &b_support {
        let base = b_params[&(r, c)];
        if r == c {
            lmi.fk_entry(base, 0, r, r, Complex64::new(m as f64, 0.0));
        } else {
            lmi.fk_entry(base, 0, r, c, Complex64::new(m as f64, 0.0));
            lmi.fk_entry(base + 1, 0, r, c, Complex64::new(0.0, m as f64));
        }
    }
    for &(r, c) in &a_support {
        let base = a_params[&(r, c)];
        lmi.fk_entry(base, 0, r, c, C_ONE);
        lmi.fk_entry(base + 1, 0, r, c, Complex64::new(0.0, 1.0));
    }

    // nesting equalities on the top variable: walk levels downward
    // level j: current operator on digits 0..2j; factorization over digit 2j
    // current = (1/d^{N-j}) trace of Btop over digits 2j+1..2N (diagonal)
    let mut eq_seen: HashSet<String> = HashSet::new();
    let mut push_equality = |lmi: &mut LmiProblem, gamma: &HashMap<usize, Complex64>| {
        for (flip, _label) in [(C_ONE, "re"), (Complex64::new(0.0, -1.0), "im")] {
            let mut terms: Vec<(usize, f64)> = Vec::new();
            let mut keys: Vec<_> = gamma.keys().copied().collect();
            keys.sort_unstable();
            for k in keys {
                let v = (gamma[&k] * flip).re;
                if v.abs() > 1e-14 {
                    terms.push((k, v));
                }
            }
            if terms.is_empty() {
                continue;
            }
            let key = format!("{terms:?}");
            if eq_seen.insert(key) {
                lmi.add_equality(terms, 0.0);
            }
        }
    };

    // coefficient accumulator: operator entry of the traced top variable at
    // (row_digits, col_digits) over digits 0..=upto, traced diagonally above
    let b_coeff = |row_digits: &[usize], col_digits: &[usize], gamma: &mut HashMap<usize, Complex64>, scale: f64| {
        let upto = row_digits.len() - 1; // inclusive digit index
        let traced = 2 * n - upto;
        let t_range: usize = d.pow(traced as u32);
        for t in 0..t_range {
            let t_digits = digits(t, d, traced);
            let mut rd = vec![0usize; 2 * n + 1];
            let mut cd = vec![0usize; 2 * n + 1];
            rd[..=upto].copy_from_slice(row_digits);
            cd[..=upto].copy_from_slice(col_digits);
            for (k, &tv) in t_digits.iter().enumerate() {
                rd[upto + 1 + k] = tv;
                cd[upto + 1 + k] = tv;
            }
            let (mut r, mut c) = (idx.join(&rd), idx.join(&cd));
            let mut conj = false;
            if r > c {
                std::mem::swap(&mut r, &mut c);
                conj = true;
            }
            let Some(&base) = b_params.get(&(r, c)) else { continue };
            let s = Complex64::new(scale, 0.0);
            if r == c {
                *gamma.entry(base).or_insert(C_ZERO) += s;
            } else {
                // variable value at (r,c) = y_re + i y_im; at (c,r) the
                // conjugate
                *gamma.entry(base).or_insert(C_ZERO) += s;
                *gamma.entry(base + 1).or_insert(C_ZERO) +=
                    if conj { Complex64::new(0.0, -scale) } else { Complex64::new(0.0, scale) };
            }
        }
    };

    for level in (1..=n).rev() {
        // operator on digits 0..2*level-1 after tracing digit 2*level;
        // factorization over digit 2*level-1
        let live = 2 * level; // digits 0..2*level-1
        let live_dims: Vec<usize> =
            (0..live).map(|p| if p == 0 { idx.d0 } else { d }).collect();
        let head = live - 1; // digit index 2*level-1
        let head_total: usize = live_dims[..head].iter().product();
        for wf in 0..head_total {
            for xf in 0..head_total {
                let wd = split_digits(wf, &live_dims[..head]);
                let xd = split_digits(xf, &live_dims[..head]);
                // off-diagonal on digit 2*level-1 vanishes
                for e in 0..d {
                    for f in 0..d {
                        if e == f || (wf, e) > (xf, f) {
                            continue;
                        }
                        let mut gamma = HashMap::new();
                        let mut w_full = wd.clone();
                        w_full.push(e);
                        let mut x_full = xd.clone();
                        x_full.push(f);
                        b_coeff(&w_full, &x_full, &mut gamma, 1.0);
                        push_equality(&mut lmi, &gamma);
                    }
                }
                // diagonal blocks all equal
                if wf > xf {
                    continue;
                }
                for a in 1..d {
                    let mut gamma = HashMap::new();
                    let mut w_full = wd.clone();
                    w_full.push(a);
                    let mut x_full = xd.clone();
                    x_full.push(a);
                    b_coeff(&w_full, &x_full, &mut gamma, 1.0);
                    let mut w0 = wd.clone();
                    w0.push(0);
                    let mut x0 = xd.clone();
                    x0.push(0);
                    b_coeff(&w0, &x0, &mut gamma, -1.0);
                    push_equality(&mut lmi, &gamma);
                }
            }
        }
    }

    let sol = lmi.solve(COMB_TOL)?;
    if sol.status != SolveStatus::Optimal {
        return Err(Error::Solver(format!(
            "multi-copy dual program ended with {:?} (gap {:.2e})",
            sol.status, sol.gap
        )));
    }
    Ok(sol.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{random_mio, RandomMioMode};
    use crate::states::{max_coherent, random_density};
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;
    use std::f64::consts::PI;

    fn plus_state() -> DensityMatrix {
        max_coherent(2).unwrap()
    }

    #[test]
    fn effective_dim_arithmetic() {
        assert_eq!(effective_dim(2, 1).unwrap(), 2);
        assert_eq!(effective_dim(2, 3).unwrap(), 4);
        assert_eq!(effective_dim(3, 2).unwrap(), 5);
        assert!(effective_dim(1, 1).is_err());
        assert!(effective_dim(2, 0).is_err());
    }

    #[test]
    fn plus_state_unit_cost() {
        let res = cmin_single(&plus_state(), &CostFunction::holevo(), 2).unwrap();
        assert!((res.value - 1.0).abs() < 1e-6, "value {}", res.value);
        assert!(res.gap < 1e-6);
        let j = res.optimizer.unwrap();
        assert!(j.is_cptp(1e-7));
        assert!(j.is_mio(1e-7));
    }

    #[test]
    fn diagonal_states_pay_the_prior_cost() {
        let cost = CostFunction::holevo();
        let rho = DensityMatrix::diagonal("s", &[0.3, 0.7]).unwrap();
        for m in [2usize, 3, 5] {
            let res = cmin_single(&rho, &cost, m).unwrap();
            assert!((res.value - cost.c_zero()).abs() < 1e-6, "m={m}: {}", res.value);
            let a = advantage(&rho, &cost, m).unwrap();
            assert!(a.abs() < 1e-7);
        }
    }

    #[test]
    fn max_coherent_reaches_lambda_min() {
        let cost = CostFunction::holevo();
        for m in [2usize, 3, 4] {
            let rho = max_coherent(m).unwrap();
            let res = cmin_single(&rho, &cost, m).unwrap();
            let lm = cmin_unconstrained(&cost, m).unwrap();
            assert!((res.value - lm).abs() < 1e-6, "m={m}: {} vs {lm}", res.value);
        }
    }

    #[test]
    fn advantage_of_max_coherent_three() {
        // C_0 - lambda_min at M = 3 equals sqrt(2) for the periodized
        // variance: 2 - (2 - 2 cos(pi/4)) = sqrt(2)
        let a = advantage(&max_coherent(3).unwrap(), &CostFunction::holevo(), 3).unwrap();
        assert!((a - 2f64.sqrt()).abs() < 1e-6, "advantage {a}");
    }

    #[test]
    fn dual_matches_primal() {
        let mut rng = ChaCha12Rng::seed_from_u64(201);
        let cost = CostFunction::holevo();
        // the plus state first
        let p = cmin_single(&plus_state(), &cost, 2).unwrap();
        let d = cmin_dual(&plus_state(), &cost, 2).unwrap();
        assert!((d.value - 1.0).abs() < 1e-6, "dual value {}", d.value);
        assert!((p.value - d.value).abs() / (1.0 + p.value.abs()) < 1e-6);
        // random instances
        for _ in 0..10 {
            let rho = random_density("s", 2, &mut rng).unwrap();
            let p = cmin_single(&rho, &cost, 3).unwrap();
            let d = cmin_dual(&rho, &cost, 3).unwrap();
            assert!(
                d.value <= p.value + 1e-6,
                "weak duality violated: {} vs {}",
                d.value,
                p.value
            );
            assert!(
                (p.value - d.value).abs() / (1.0 + p.value.abs()) < 1e-6,
                "gap too large: {} vs {}",
                p.value,
                d.value
            );
        }
    }

    #[test]
    fn qubit_closed_form_matches_sdp() {
        let mut rng = ChaCha12Rng::seed_from_u64(202);
        let cost = CostFunction::holevo();
        for _ in 0..25 {
            let rho = random_density("s", 2, &mut rng).unwrap();
            let exact = qubit_exact(&rho, &cost).unwrap();
            let sdp = cmin_single(&rho, &cost, 2).unwrap();
            assert!((exact - sdp.value).abs() < 1e-5, "{exact} vs {}", sdp.value);
        }
        // the worked example: off-diagonal 0.3 gives 2 - 0.6 = 1.4
        let dims = crate::tensor::SystemDims::single("s", 2);
        let mut m = CMatrix::zeros(dims);
        m.set(0, 0, Complex64::new(0.5, 0.0));
        m.set(1, 1, Complex64::new(0.5, 0.0));
        m.set(0, 1, Complex64::new(0.3, 0.0));
        m.set(1, 0, Complex64::new(0.3, 0.0));
        let rho = DensityMatrix::new(m).unwrap();
        assert!((qubit_exact(&rho, &cost).unwrap() - 1.4).abs() < 1e-9);
    }

    #[test]
    fn weight_bound_is_sharp_on_pseudo_mixtures() {
        let cost = CostFunction::holevo();
        for m in [2usize, 3] {
            let psi = max_coherent(m).unwrap();
            let mixed = DensityMatrix::maximally_mixed("s", m).unwrap();
            let y = cost.cost_matrix(m).unwrap();
            for p in [0.0, 0.5, 1.0] {
                let rho = psi.mix(&mixed, p).unwrap();
                let bound = weight_bound(&rho, &cost, m).unwrap();
                let exact = cmin_single(&rho, &cost, m).unwrap().value;
                let closed = p * y.lambda_min() + (1.0 - p) * y.c0();
                assert!((exact - closed).abs() < 1e-5, "m={m} p={p}: {exact} vs {closed}");
                assert!((bound - exact).abs() < 1e-5, "bound not tight: {bound} vs {exact}");
            }
        }
    }

    #[test]
    fn sandwich_and_bound_ordering() {
        let mut rng = ChaCha12Rng::seed_from_u64(203);
        let cost = CostFunction::window(1.1).unwrap();
        for _ in 0..5 {
            let rho = random_density("s", 3, &mut rng).unwrap();
            let y = cost.cost_matrix(3).unwrap();
            let v = cmin_single(&rho, &cost, 3).unwrap().value;
            assert!(v >= y.lambda_min() - 1e-7);
            assert!(v <= y.c0() + 1e-7);
            let b = weight_bound(&rho, &cost, 3).unwrap();
            assert!(b <= v + 1e-6, "weight bound {b} above value {v}");
        }
    }

    #[test]
    fn monotone_under_mio_and_convex() {
        let mut rng = ChaCha12Rng::seed_from_u64(204);
        let cost = CostFunction::holevo();
        for _ in 0..6 {
            let m = 3usize;
            let rho = random_density("s", m, &mut rng).unwrap();
            let a_before = advantage(&rho, &cost, m).unwrap();
            let ch = random_mio(m, m, RandomMioMode::KrausFamily, "i", "o", &mut rng).unwrap();
            let out = ch.apply(&rho).unwrap();
            let a_after = advantage(&out, &cost, m).unwrap();
            assert!(a_after <= a_before + 1e-6, "{a_after} > {a_before}");

            let sigma = random_density("s", m, &mut rng).unwrap();
            let a_sigma = advantage(&sigma, &cost, m).unwrap();
            let mix = rho.mix(&sigma, 0.5).unwrap();
            let a_mix = advantage(&mix, &cost, m).unwrap();
            assert!(a_mix <= 0.5 * a_before + 0.5 * a_sigma + 1e-6);
        }
    }

    #[test]
    fn faithfulness_witness() {
        let mut rng = ChaCha12Rng::seed_from_u64(205);
        let cost = CostFunction::holevo();
        for _ in 0..5 {
            let m = 3usize;
            let rho = random_density("s", m, &mut rng).unwrap();
            let y = cost.cost_matrix(m).unwrap();
            let mut max_off_y = 0.0f64;
            for l in 1..m {
                max_off_y = max_off_y.max(y.matrix().at(0, l).norm());
            }
            let mut max_off_rho = 0.0f64;
            for i in 0..m {
                for j in 0..m {
                    if i != j {
                        max_off_rho = max_off_rho.max(rho.mat().at(i, j).norm());
                    }
                }
            }
            let a = advantage(&rho, &cost, m).unwrap();
            assert!(
                a >= 2.0 * max_off_y * max_off_rho - 1e-6,
                "advantage {a} below witness {}",
                2.0 * max_off_y * max_off_rho
            );
        }
    }

    #[test]
    fn cost_choi_single_copy_matches_doubled_pattern() {
        // at (d, n) = (2, 1) the operator carries c_{m-n} on |nn><mm|
        let cost = CostFunction::holevo();
        let x = cost_choi(&cost, 2, 1).unwrap();
        // pattern: entries only at (n*2+n, m*2+m)
        for row in 0..4 {
            for col in 0..4 {
                let z = x.mat.at(row, col);
                let is_pair = (row == 0 || row == 3) && (col == 0 || col == 3);
                if !is_pair {
                    assert!(z.norm() < 1e-15, "({row},{col}) = {z}");
                } else {
                    let n = row / 3; // 0 -> 0, 3 -> 1
                    let m = col / 3;
                    let expect =
                        cost.fourier_coefficient(m as i64 - n as i64).unwrap();
                    assert!((z - expect).norm() < 1e-12);
                }
            }
        }
        // constant cost: diagonal-in-pairs with the constant value
        let c = CostFunction::constant(0.7).unwrap();
        let x = cost_choi(&c, 2, 1).unwrap();
        assert!((x.mat.at(0, 0).re - 0.7).abs() < 1e-12);
        assert!((x.mat.at(0, 3).re - 0.0).abs() < 1e-12);
    }

    #[test]
    fn cost_choi_two_copies_band_structure() {
        // only digit-sum differences |dH| <= 1 appear for the periodized
        // variance
        let x = cost_choi(&CostFunction::holevo(), 2, 2).unwrap();
        for row in 0..16 {
            let rd = digits_interleaved(row, 2, 2);
            if !rd.paired {
                continue;
            }
            for col in 0..16 {
                let cd = digits_interleaved(col, 2, 2);
                if !cd.paired {
                    continue;
                }
                let dh = (rd.odd_sum as i64 - cd.odd_sum as i64).abs();
                let z = x.mat.at(row, col);
                if dh > 1 {
                    assert!(z.norm() < 1e-15);
                } else if dh == 1 {
                    assert!((z.re + 1.0).abs() < 1e-12);
                } else {
                    assert!((z.re - 2.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn multi_copy_single_gate_matches_single_copy() {
        // (d, n) = (2, 1): the comb program must reproduce the direct SDP
        let cost = CostFunction::holevo();
        let res = cmin_multi_copy(&plus_state(), &cost, 2, 1).unwrap();
        assert!((res.value - 1.0).abs() < 1e-5, "comb value {}", res.value);
        let diag = DensityMatrix::diagonal("s", &[0.2, 0.8]).unwrap();
        let res = cmin_multi_copy(&diag, &cost, 2, 1).unwrap();
        assert!((res.value - cost.c_zero()).abs() < 1e-5);
    }

    #[test]
    fn multi_copy_reduction_to_effective_dim() {
        let mut rng = ChaCha12Rng::seed_from_u64(206);
        let cost = CostFunction::holevo();
        for (d, n) in [(2usize, 1usize), (2, 2), (3, 1)] {
            let m = effective_dim(d, n).unwrap();
            for _ in 0..3 {
                let rho = random_density("s", 2, &mut rng).unwrap();
                let comb = cmin_multi_copy(&rho, &cost, d, n).unwrap();
                let single = cmin_single(&rho, &cost, m).unwrap();
                let rel = (comb.value - single.value).abs() / (1.0 + single.value.abs());
                assert!(
                    rel < 1e-4,
                    "(d,n)=({d},{n}): comb {} vs single {}",
                    comb.value,
                    single.value
                );
            }
        }
    }

    #[test]
    fn multi_copy_dual_matches_primal() {
        let mut rng = ChaCha12Rng::seed_from_u64(207);
        let cost = CostFunction::holevo();
        // single gate, plus state
        let dual = cmin_multi_copy_dual(&plus_state(), &cost, 2, 1).unwrap();
        assert!((dual - 1.0).abs() < 1e-4, "dual {dual}");
        for (d, n) in [(2usize, 1usize), (2, 2)] {
            let rho = random_density("s", 2, &mut rng).unwrap();
            let primal = cmin_multi_copy(&rho, &cost, d, n).unwrap().value;
            let dual = cmin_multi_copy_dual(&rho, &cost, d, n).unwrap();
            let rel = (primal - dual).abs() / (1.0 + primal.abs());
            assert!(rel < 1e-4, "(d,n)=({d},{n}): primal {primal} vs dual {dual}");
        }
        // diagonal input: the prior cost
        let diag = DensityMatrix::diagonal("s", &[0.6, 0.4]).unwrap();
        let dual = cmin_multi_copy_dual(&diag, &cost, 2, 2).unwrap();
        assert!((dual - cost.c_zero()).abs() < 1e-4);
        // maximally coherent input at the effective dimension
        let psi = max_coherent(2).unwrap();
        let primal = cmin_multi_copy(&psi, &cost, 2, 2).unwrap().value;
        let dual = cmin_multi_copy_dual(&psi, &cost, 2, 2).unwrap();
        assert!((primal - dual).abs() / (1.0 + primal.abs()) < 1e-4);
    }

    #[test]
    fn asymptotic_floor_from_weight() {
        // for fixed rho with W < 1 the cost stays above C0 (1 - W)
        let mut rng = ChaCha12Rng::seed_from_u64(208);
        let cost = CostFunction::holevo();
        let rho = random_density("s", 2, &mut rng).unwrap();
        let w = weight_of_coherence(&rho).unwrap();
        if w < 1.0 {
            let floor = cost.c_zero() * (1.0 - w);
            for m in 2..=12usize {
                let v = cmin_single(&rho, &cost, m).unwrap().value;
                assert!(v >= floor - 1e-6, "m={m}: {v} below floor {floor}");
            }
        }
    }

    #[test]
    fn holevo_m5_closed_form_value() {
        let lm = cmin_unconstrained(&CostFunction::holevo(), 5).unwrap();
        assert!((lm - 4.0 * (PI / 12.0).sin().powi(2)).abs() < 1e-10);
    }
}
