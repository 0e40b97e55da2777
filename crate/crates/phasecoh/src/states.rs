//! Density matrices and static coherence measures.
//!
//! The l1 measure is a direct sum of off-diagonal moduli; the weight and
//! robustness of coherence are computed by small semidefinite programs.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sdp::{HermSparse, HermitianSdp, Sense, SolveStatus};
use crate::tensor::{eig_hermitian, CMatrix, Label, SystemDims, C_ONE, C_ZERO};

/// Relative primal-dual gap accepted from the coherence SDPs.
const SDP_TOL: f64 = 1e-9;

/// A quantum state on a single labeled system.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    mat: CMatrix,
}

impl DensityMatrix {
    /// Validates Hermiticity, positivity (eigenvalues >= -1e-10) and unit
    /// trace (within 1e-10).
    pub fn new(mat: CMatrix) -> Result<Self> {
        if mat.dims().len() != 1 {
            return Err(Error::BadState("a density matrix lives on a single system".into()));
        }
        let herm = mat.hermitian_error();
        if herm > 1e-10 {
            return Err(Error::BadState(format!("not Hermitian (deviation {herm:.2e})")));
        }
        let tr = mat.trace();
        if (tr.re - 1.0).abs() > 1e-10 || tr.im.abs() > 1e-10 {
            return Err(Error::BadState(format!("trace must be 1, got {tr}")));
        }
        let (evals, _) = eig_hermitian(&mat)?;
        if evals[0] < -1e-10 {
            return Err(Error::BadState(format!("negative eigenvalue {:.2e}", evals[0])));
        }
        Ok(DensityMatrix { mat: mat.hermitize() })
    }

    pub fn from_pure(label: impl Into<Label>, amplitudes: &[Complex64]) -> Result<Self> {
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::BadState(format!("pure state norm^2 = {norm}, expected 1")));
        }
        let dims = SystemDims::single(label, amplitudes.len());
        DensityMatrix::new(CMatrix::outer(dims, amplitudes, amplitudes)?)
    }

    pub fn diagonal(label: impl Into<Label>, probs: &[f64]) -> Result<Self> {
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-10 || probs.iter().any(|p| *p < -1e-12) {
            return Err(Error::BadState("diagonal entries must be a probability vector".into()));
        }
        let dims = SystemDims::single(label, probs.len());
        let mut m = CMatrix::zeros(dims);
        for (i, p) in probs.iter().enumerate() {
            m.set(i, i, Complex64::new(*p, 0.0));
        }
        DensityMatrix::new(m)
    }

    pub fn maximally_mixed(label: impl Into<Label>, d: usize) -> Result<Self> {
        if d < 1 {
            return Err(Error::BadState("dimension must be >= 1".into()));
        }
        DensityMatrix::diagonal(label, &vec![1.0 / d as f64; d])
    }

    pub fn mat(&self) -> &CMatrix {
        &self.mat
    }

    pub fn dim(&self) -> usize {
        self.mat.n()
    }

    pub fn label(&self) -> &Label {
        &self.mat.dims().labels()[0]
    }

    /// The same state relabeled onto another system name.
    pub fn relabel(&self, label: impl Into<Label>) -> DensityMatrix {
        let dims = SystemDims::single(label, self.dim());
        DensityMatrix { mat: CMatrix::from_data(dims, self.mat.data().to_vec()).unwrap() }
    }

    pub fn is_diagonal(&self, tol: f64) -> bool {
        let n = self.dim();
        for r in 0..n {
            for c in 0..n {
                if r != c && self.mat.at(r, c).norm() > tol {
                    return false;
                }
            }
        }
        true
    }

    /// Convex mixture `p self + (1-p) other`.
    pub fn mix(&self, other: &DensityMatrix, p: f64) -> Result<DensityMatrix> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::BadArgument("mixing weight must be in [0,1]".into()));
        }
        let m = self
            .mat
            .scale(Complex64::new(p, 0.0))
            .add(&other.mat.scale(Complex64::new(1.0 - p, 0.0)))?;
        DensityMatrix::new(m)
    }

    pub fn to_json(&self) -> StateJson {
        let n = self.dim();
        let mut re = vec![vec![0.0; n]; n];
        let mut im = vec![vec![0.0; n]; n];
        for r in 0..n {
            for c in 0..n {
                let z = self.mat.at(r, c);
                re[r][c] = z.re;
                im[r][c] = z.im;
            }
        }
        StateJson { dim: n, re, im }
    }

    pub fn from_json(json: &StateJson, label: impl Into<Label>) -> Result<Self> {
        let n = json.dim;
        if json.re.len() != n || json.im.len() != n {
            return Err(Error::BadState("re/im must be dim x dim".into()));
        }
        let dims = SystemDims::single(label, n);
        let m = CMatrix::from_fn(dims, |r, c| Complex64::new(json.re[r][c], json.im[r][c]));
        DensityMatrix::new(m)
    }
}

/// JSON form of a density matrix: `{dim, re, im}`.
#[derive(Serialize, Deserialize, Debug, Clone)]
pub struct StateJson {
    pub dim: usize,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

/// The maximally coherent state: all amplitudes `1/sqrt(d)`.
pub fn max_coherent(d: usize) -> Result<DensityMatrix> {
    if d < 1 {
        return Err(Error::BadArgument("dimension must be >= 1".into()));
    }
    let amp = Complex64::new(1.0 / (d as f64).sqrt(), 0.0);
    DensityMatrix::from_pure("s", &vec![amp; d])
}

/// Sum of absolute off-diagonal entries.
pub fn l1_coherence(rho: &DensityMatrix) -> f64 {
    let n = rho.dim();
    let mut acc = 0.0;
    for r in 0..n {
        for c in 0..n {
            if r != c {
                acc += rho.mat().at(r, c).norm();
            }
        }
    }
    acc
}

/// Weight of coherence: the minimal `w` admitting `rho = (1-w) sigma + w tau`
/// with `sigma` incoherent and `tau` a state.
pub fn weight_of_coherence(rho: &DensityMatrix) -> Result<f64> {
    Ok(weight_decomposition(rho)?.0)
}

/// Weight of coherence together with the optimal decomposition
/// `(w, sigma, tau)` satisfying `rho = (1-w) sigma + w tau`.
///
/// Computed as `w = 1 - max{Tr D : D diagonal, 0 <= D <= rho}`; the optimal
/// `D` is `(1-w) sigma` and the remainder `rho - D` is `w tau`.
pub fn weight_decomposition(rho: &DensityMatrix) -> Result<(f64, DensityMatrix, DensityMatrix)> {
    let d = rho.dim();
    // blocks: [0] = rho - D (d x d), [1..=d] = the diagonal entries of D
    let mut dims = vec![d];
    dims.extend(std::iter::repeat(1).take(d));
    let mut prob = HermitianSdp::new(dims, Sense::Max);
    for r in 0..d {
        prob.objective_entry(1 + r, 0, 0, C_ONE);
    }
    for r in 0..d {
        for c in r..d {
            let z = rho.mat().at(r, c);
            if r == c {
                let mut con = HermSparse::default();
                con.push(0, r, r, C_ONE);
                con.push(1 + r, 0, 0, C_ONE);
                prob.add_constraint(con, z.re);
            } else {
                let mut re = HermSparse::default();
                re.push(0, r, c, C_ONE);
                prob.add_constraint(re, 2.0 * z.re);
                let mut im = HermSparse::default();
                im.push(0, r, c, Complex64::new(0.0, 1.0));
                prob.add_constraint(im, 2.0 * z.im);
            }
        }
    }
    let sol = prob.solve(SDP_TOL)?;
    if sol.status != SolveStatus::Optimal {
        return Err(Error::Solver(format!(
            "weight-of-coherence SDP ended with {:?} (gap {:.2e})",
            sol.status, sol.gap
        )));
    }
    let w = (1.0 - sol.value).clamp(0.0, 1.0);
    let dvals: Vec<f64> = (0..d).map(|r| sol.optimizers[1 + r][0].re.max(0.0)).collect();
    let dsum: f64 = dvals.iter().sum();
    let sigma = if dsum > 1e-12 {
        DensityMatrix::diagonal(rho.label().clone(), &normalize(&dvals))?
    } else {
        DensityMatrix::maximally_mixed(rho.label().clone(), d)?
    };
    let tau = if w > 1e-9 {
        let mut t = rho.mat().clone();
        for r in 0..d {
            let v = t.at(r, r) - Complex64::new(dvals[r], 0.0);
            t.set(r, r, v);
        }
        let t = t.scale(Complex64::new(1.0 / w, 0.0)).hermitize();
        // clip solver-level negativity before validating
        DensityMatrix::new(psd_clip(&t))?
    } else {
        rho.clone()
    };
    Ok((w, sigma, tau))
}

fn normalize(v: &[f64]) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    v.iter().map(|x| x / s).collect()
}

/// Project onto the PSD cone and renormalize the trace to one.
fn psd_clip(m: &CMatrix) -> CMatrix {
    let (evals, evecs) = eig_hermitian(m).expect("hermitian by construction");
    let n = m.n();
    let mut tr = 0.0;
    for &l in &evals {
        if l > 0.0 {
            tr += l;
        }
    }
    if tr <= 0.0 {
        return CMatrix::identity(m.dims().clone()).scale(Complex64::new(1.0 / n as f64, 0.0));
    }
    let mut out = CMatrix::zeros(m.dims().clone());
    for (k, &l) in evals.iter().enumerate() {
        if l <= 0.0 {
            continue;
        }
        let v = &evecs[k];
        for r in 0..n {
            for c in 0..n {
                let add = v[r] * v[c].conj() * (l / tr);
                let cur = out.at(r, c);
                out.set(r, c, cur + add);
            }
        }
    }
    out
}

/// Value of the witness program dual to the weight of coherence:
/// `1 - min{Tr[Z rho] : Z >= 0, diag(Z) >= 1}`.
///
/// Agrees with [`weight_of_coherence`] by strong duality; exposed for
/// cross-checking. (With the diagonal pinned to exactly one instead of
/// bounded below, the program is a strict over-restriction and overshoots
/// the minimum on pure states.)
pub fn weight_witness_value(rho: &DensityMatrix) -> Result<f64> {
    let d = rho.dim();
    // blocks: [0] = Z (d x d), [1..=d] = slacks with diag(Z) = 1 + slack
    let mut dims = vec![d];
    dims.extend(std::iter::repeat(1).take(d));
    let mut prob = HermitianSdp::new(dims, Sense::Min);
    prob.set_objective_matrix(0, rho.mat());
    for r in 0..d {
        let mut con = HermSparse::default();
        con.push(0, r, r, C_ONE);
        con.push(1 + r, 0, 0, -C_ONE);
        prob.add_constraint(con, 1.0);
    }
    let sol = prob.solve(SDP_TOL)?;
    if sol.status != SolveStatus::Optimal {
        return Err(Error::Solver(format!("weight witness SDP ended with {:?}", sol.status)));
    }
    Ok((1.0 - sol.value).clamp(0.0, 1.0))
}

/// Robustness of coherence: the minimal `r >= 0` such that
/// `(rho + r tau) / (1 + r)` is incoherent for some state `tau`.
///
/// Solved as `min{Tr D - 1 : D diagonal, D >= rho, D >= 0}`.
pub fn robustness_of_coherence(rho: &DensityMatrix) -> Result<f64> {
    let d = rho.dim();
    // blocks: [0] = D - rho (d x d), [1..=d] = diagonal entries of D
    let mut dims = vec![d];
    dims.extend(std::iter::repeat(1).take(d));
    let mut prob = HermitianSdp::new(dims, Sense::Min);
    for r in 0..d {
        prob.objective_entry(1 + r, 0, 0, C_ONE);
    }
    for r in 0..d {
        for c in r..d {
            let z = rho.mat().at(r, c);
            if r == c {
                // (D - rho)_rr - D_r = -rho_rr
                let mut con = HermSparse::default();
                con.push(0, r, r, C_ONE);
                con.push(1 + r, 0, 0, -C_ONE);
                prob.add_constraint(con, -z.re);
            } else {
                let mut re = HermSparse::default();
                re.push(0, r, c, C_ONE);
                prob.add_constraint(re, -2.0 * z.re);
                let mut im = HermSparse::default();
                im.push(0, r, c, Complex64::new(0.0, 1.0));
                prob.add_constraint(im, -2.0 * z.im);
            }
        }
    }
    let sol = prob.solve(SDP_TOL)?;
    if sol.status != SolveStatus::Optimal {
        return Err(Error::Solver(format!(
            "robustness SDP ended with {:?} (gap {:.2e})",
            sol.status, sol.gap
        )));
    }
    Ok((sol.value - 1.0).max(0.0))
}

/// Standard normal via Box-Muller.
pub(crate) fn randn(rng: &mut impl Rng) -> f64 {
    let u1: f64 = rng.random::<f64>().max(1e-300);
    let u2: f64 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (crate::cost::TWO_PI * u2).cos()
}

/// Full-rank random state from the Ginibre ensemble: `G G^dagger / Tr`.
pub fn random_density(
    label: impl Into<Label>,
    d: usize,
    rng: &mut impl Rng,
) -> Result<DensityMatrix> {
    if d < 1 {
        return Err(Error::BadArgument("dimension must be >= 1".into()));
    }
    let g: Vec<Complex64> = (0..d * d).map(|_| Complex64::new(randn(rng), randn(rng))).collect();
    let dims = SystemDims::single(label, d);
    let mut m = CMatrix::zeros(dims);
    for r in 0..d {
        for c in 0..d {
            let mut acc = C_ZERO;
            for k in 0..d {
                acc += g[r * d + k] * g[c * d + k].conj();
            }
            m.set(r, c, acc);
        }
    }
    let tr = m.trace().re;
    DensityMatrix::new(m.scale(Complex64::new(1.0 / tr, 0.0)).hermitize())
}

/// Random pure state with Haar-uniform amplitudes.
pub fn random_pure(label: impl Into<Label>, d: usize, rng: &mut impl Rng) -> Result<DensityMatrix> {
    let mut amps: Vec<Complex64> = (0..d).map(|_| Complex64::new(randn(rng), randn(rng))).collect();
    let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    for a in &mut amps {
        *a /= norm;
    }
    DensityMatrix::from_pure(label, &amps)
}
