//! Choi matrices of channels, membership tests for maximally incoherent
//! operations (MIO), and explicit channel constructions.
//!
//! A channel is MIO iff it maps every incoherent state to an incoherent
//! state; on the Choi matrix this reads `Delta_in J = Delta_in Delta_out J`.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sdp::{HermSparse, HermitianSdp, HermitianSolution, Sense, SolveStatus};
use crate::states::{randn, DensityMatrix};
use crate::tensor::{
    basis_ket, dephase, eig_hermitian, partial_trace, reorder, tensor, tensor_vec, CMatrix, Label,
    SystemDims, C_ONE, C_ZERO,
};

/// Default absolute tolerance for MIO membership.
pub const MIO_TOL: f64 = 1e-9;

/// Choi representation of a linear map with declared input/output systems.
#[derive(Clone, Debug)]
pub struct ChoiMatrix {
    in_dims: SystemDims,
    out_dims: SystemDims,
    mat: CMatrix,
}

impl ChoiMatrix {
    /// Wrap an operator as a Choi matrix; the matrix labels must be exactly
    /// the in- and out-labels (any order; stored as in then out).
    pub fn new(in_dims: SystemDims, out_dims: SystemDims, mat: CMatrix) -> Result<Self> {
        let canonical = in_dims.concat(&out_dims)?;
        if mat.dims().len() != canonical.len() {
            return Err(Error::DimMismatch(
                "Choi matrix must live on the declared in/out systems".into(),
            ));
        }
        for l in canonical.labels() {
            if mat.dims().dim_of(l) != canonical.dim_of(l) {
                return Err(Error::DimMismatch(format!(
                    "system `{l}` missing or with wrong dimension on the Choi matrix"
                )));
            }
        }
        let mat = if mat.dims() == &canonical { mat } else { reorder(&mat, canonical.labels())? };
        Ok(ChoiMatrix { in_dims, out_dims, mat })
    }

    pub fn mat(&self) -> &CMatrix {
        &self.mat
    }

    pub fn in_dims(&self) -> &SystemDims {
        &self.in_dims
    }

    pub fn out_dims(&self) -> &SystemDims {
        &self.out_dims
    }

    /// Apply to an operator covering the input systems.
    pub fn apply_to(&self, rho: &CMatrix) -> Result<CMatrix> {
        for l in rho.dims().labels() {
            if !self.in_dims.contains(l) {
                return Err(Error::UnknownLabel(l.to_string()));
            }
        }
        if rho.dims().len() != self.in_dims.len() {
            return Err(Error::DimMismatch("state must cover all input systems".into()));
        }
        crate::tensor::apply_choi(&self.mat, rho)
    }

    /// Apply to a density matrix (single input and output system).
    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        if self.in_dims.len() != 1 || self.out_dims.len() != 1 {
            return Err(Error::BadChannel(
                "apply() requires single input and output systems; use apply_to".into(),
            ));
        }
        let aligned = rho.relabel(self.in_dims.labels()[0].clone());
        let out = self.apply_to(aligned.mat())?;
        DensityMatrix::new(out.hermitize())
    }

    /// Smallest eigenvalue and trace-preservation residual.
    pub fn cptp_residuals(&self) -> Result<(f64, f64)> {
        let (evals, _) = eig_hermitian(&self.mat)?;
        let traced = partial_trace(&self.mat, self.out_dims.labels())?;
        let ident = CMatrix::identity(self.in_dims.clone());
        let aligned = reorder(&traced, ident.dims().labels())?;
        Ok((evals[0], aligned.max_abs_diff(&ident)))
    }

    pub fn is_cptp(&self, tol: f64) -> bool {
        match self.cptp_residuals() {
            Ok((lmin, tp)) => lmin >= -tol && tp <= tol,
            Err(_) => false,
        }
    }

    /// Max-norm of `Delta_in J - Delta_in Delta_out J`.
    pub fn mio_residual(&self) -> Result<f64> {
        let din = dephase(&self.mat, self.in_dims.labels())?;
        let dboth = dephase(&din, self.out_dims.labels())?;
        Ok(din.max_abs_diff(&dboth))
    }

    /// Membership in the maximally incoherent operations.
    pub fn is_mio(&self, tol: f64) -> bool {
        self.mio_residual().map(|r| r <= tol).unwrap_or(false)
    }

    /// Sequential composition: `then` after `self` (self: A -> B, then: B -> C).
    pub fn compose(&self, then: &ChoiMatrix) -> Result<ChoiMatrix> {
        if &self.out_dims != then.in_dims() {
            return Err(Error::DimMismatch(
                "composition needs the first output systems to equal the second inputs".into(),
            ));
        }
        let linked = crate::combs::link(&self.mat, &then.mat)?;
        ChoiMatrix::new(self.in_dims.clone(), then.out_dims.clone(), linked)
    }

    /// Parallel composition (tensor product); label sets must be disjoint.
    pub fn par(&self, other: &ChoiMatrix) -> Result<ChoiMatrix> {
        let mat = tensor(&self.mat, &other.mat)?;
        ChoiMatrix::new(
            self.in_dims.concat(&other.in_dims)?,
            self.out_dims.concat(&other.out_dims)?,
            mat,
        )
    }

    /// Same channel with fresh labels (same dimensions, declaration order).
    pub fn relabeled(&self, in_labels: &[Label], out_labels: &[Label]) -> Result<ChoiMatrix> {
        if in_labels.len() != self.in_dims.len() || out_labels.len() != self.out_dims.len() {
            return Err(Error::BadSystems("relabel must cover every system".into()));
        }
        let in_pairs: Vec<_> =
            in_labels.iter().cloned().zip(self.in_dims.dims().iter().copied()).collect();
        let out_pairs: Vec<_> =
            out_labels.iter().cloned().zip(self.out_dims.dims().iter().copied()).collect();
        let in_dims = SystemDims::new(&in_pairs)?;
        let out_dims = SystemDims::new(&out_pairs)?;
        let mat = CMatrix::from_data(in_dims.concat(&out_dims)?, self.mat.data().to_vec())?;
        ChoiMatrix::new(in_dims, out_dims, mat)
    }

    pub fn to_json(&self) -> ChoiJson {
        let n = self.mat.n();
        let mut re = vec![vec![0.0; n]; n];
        let mut im = vec![vec![0.0; n]; n];
        for r in 0..n {
            for c in 0..n {
                let z = self.mat.at(r, c);
                re[r][c] = z.re;
                im[r][c] = z.im;
            }
        }
        ChoiJson {
            in_dims: self.in_dims.dims().to_vec(),
            out_dims: self.out_dims.dims().to_vec(),
            re,
            im,
        }
    }

    pub fn from_json(json: &ChoiJson, in_labels: &[Label], out_labels: &[Label]) -> Result<Self> {
        if in_labels.len() != json.in_dims.len() || out_labels.len() != json.out_dims.len() {
            return Err(Error::BadSystems("label count must match stored dims".into()));
        }
        let in_pairs: Vec<_> =
            in_labels.iter().cloned().zip(json.in_dims.iter().copied()).collect();
        let out_pairs: Vec<_> =
            out_labels.iter().cloned().zip(json.out_dims.iter().copied()).collect();
        let in_dims = SystemDims::new(&in_pairs)?;
        let out_dims = SystemDims::new(&out_pairs)?;
        let all = in_dims.concat(&out_dims)?;
        let n = all.total();
        if json.re.len() != n || json.im.len() != n {
            return Err(Error::DimMismatch("re/im must be n x n".into()));
        }
        let mat = CMatrix::from_fn(all, |r, c| Complex64::new(json.re[r][c], json.im[r][c]));
        ChoiMatrix::new(in_dims, out_dims, mat)
    }
}

/// JSON form of a Choi matrix: state payload plus in/out dimensions.
#[derive(Serialize, Deserialize, Debug, Clone)]
pub struct ChoiJson {
    pub in_dims: Vec<usize>,
    pub out_dims: Vec<usize>,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

/// A rectangular operator mapping the input space into the output space.
#[derive(Clone, Debug)]
pub struct Kraus {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Complex64>,
}

impl Kraus {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Kraus { rows, cols, data: vec![C_ZERO; rows * cols] }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut k = Kraus::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                k.data[r * cols + c] = f(r, c);
            }
        }
        k
    }

    pub fn from_square(m: &CMatrix) -> Self {
        let n = m.n();
        Kraus::from_fn(n, n, |r, c| m.at(r, c))
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.cols + c]
    }
}

/// Choi matrix `J = sum_k (1 x K_k) |Omega><Omega| (1 x K_k)^dagger` with the
/// unnormalized maximally entangled `|Omega> = sum_n |nn>`.
///
/// Entries: `J[(n,a),(m,b)] = sum_k K_k[a,n] conj(K_k[b,m])`.
pub fn choi_from_kraus(
    in_dims: SystemDims,
    out_dims: SystemDims,
    kraus: &[Kraus],
) -> Result<ChoiMatrix> {
    let din = in_dims.total();
    let dout = out_dims.total();
    if kraus.is_empty() {
        return Err(Error::BadChannel("at least one Kraus operator required".into()));
    }
    for k in kraus {
        if k.rows != dout || k.cols != din {
            return Err(Error::DimMismatch(format!(
                "Kraus operator must be {dout} x {din}, got {} x {}",
                k.rows, k.cols
            )));
        }
    }
    // completeness: sum_k K^dagger K = 1_in
    let mut tp_err = 0.0f64;
    for i in 0..din {
        for j in 0..din {
            let mut acc = C_ZERO;
            for k in kraus {
                for a in 0..dout {
                    acc += k.at(a, i).conj() * k.at(a, j);
                }
            }
            let expect = if i == j { C_ONE } else { C_ZERO };
            tp_err = tp_err.max((acc - expect).norm());
        }
    }
    if tp_err > 1e-10 {
        return Err(Error::BadChannel(format!(
            "Kraus set is not trace-preserving (residual {tp_err:.2e})"
        )));
    }
    let all = in_dims.concat(&out_dims)?;
    let mut mat = CMatrix::zeros(all);
    for n in 0..din {
        for a in 0..dout {
            for m in 0..din {
                for b in 0..dout {
                    let mut acc = C_ZERO;
                    for k in kraus {
                        acc += k.at(a, n) * k.at(b, m).conj();
                    }
                    mat.set(n * dout + a, m * dout + b, acc);
                }
            }
        }
    }
    ChoiMatrix::new(in_dims, out_dims, mat)
}

/// Choi matrix of conjugation by a square unitary.
pub fn choi_of_unitary(
    u: &CMatrix,
    in_label: impl Into<Label>,
    out_label: impl Into<Label>,
) -> Result<ChoiMatrix> {
    let d = u.n();
    choi_from_kraus(
        SystemDims::single(in_label, d),
        SystemDims::single(out_label, d),
        &[Kraus::from_square(u)],
    )
}

/// Choi matrix of the identity channel.
pub fn identity_choi(
    d: usize,
    in_label: impl Into<Label>,
    out_label: impl Into<Label>,
) -> Result<ChoiMatrix> {
    choi_of_unitary(&CMatrix::identity(SystemDims::single("tmp", d)), in_label, out_label)
}

/// Choi matrix of total dephasing.
pub fn dephasing_choi(
    d: usize,
    in_label: impl Into<Label>,
    out_label: impl Into<Label>,
) -> Result<ChoiMatrix> {
    let kraus: Vec<Kraus> = (0..d)
        .map(|i| Kraus::from_fn(d, d, |r, c| if r == i && c == i { C_ONE } else { C_ZERO }))
        .collect();
    choi_from_kraus(SystemDims::single(in_label, d), SystemDims::single(out_label, d), &kraus)
}

/// The diagonal phase unitary with phases `e^{i phi n}`.
pub fn phase_unitary(label: impl Into<Label>, d: usize, phi: f64) -> CMatrix {
    let dims = SystemDims::single(label, d);
    let mut u = CMatrix::zeros(dims);
    for n in 0..d {
        u.set(n, n, Complex64::from_polar(1.0, phi * n as f64));
    }
    u
}

/// Discrete Fourier transform unitary:
/// `F|n> = d^{-1/2} sum_k e^{i 2 pi k n / d}|k>`.
pub fn qft(label: impl Into<Label>, d: usize) -> CMatrix {
    let dims = SystemDims::single(label, d);
    let norm = 1.0 / (d as f64).sqrt();
    CMatrix::from_fn(dims, |k, n| {
        Complex64::from_polar(norm, crate::cost::TWO_PI * (k as f64) * (n as f64) / d as f64)
    })
}

/// A POVM: PSD effects summing to the identity.
#[derive(Clone, Debug)]
pub struct Measurement {
    effects: Vec<CMatrix>,
}

impl Measurement {
    pub fn new(effects: Vec<CMatrix>) -> Result<Self> {
        if effects.is_empty() {
            return Err(Error::BadMeasurement("a POVM needs at least one effect".into()));
        }
        let dims = effects[0].dims().clone();
        let mut sum = CMatrix::zeros(dims.clone());
        for e in &effects {
            if e.dims() != &dims {
                return Err(Error::BadMeasurement("all effects must share systems".into()));
            }
            let (evals, _) = eig_hermitian(e)?;
            if evals[0] < -1e-10 {
                return Err(Error::BadMeasurement(format!(
                    "effect has negative eigenvalue {:.2e}",
                    evals[0]
                )));
            }
            sum = sum.add(e)?;
        }
        let ident = CMatrix::identity(dims);
        if sum.max_abs_diff(&ident) > 1e-10 {
            return Err(Error::BadMeasurement("effects do not sum to the identity".into()));
        }
        Ok(Measurement { effects })
    }

    pub fn effects(&self) -> &[CMatrix] {
        &self.effects
    }

    pub fn len(&self) -> usize {
        self.effects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.effects.is_empty()
    }
}

/// The four Bell projectors on a pair of qubits.
pub fn bell_measurement(label_a: impl Into<Label>, label_b: impl Into<Label>) -> Measurement {
    let dims = SystemDims::new(&[(label_a.into(), 2), (label_b.into(), 2)]).unwrap();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let vecs: [[Complex64; 4]; 4] = [
        // (|00> +/- |11>)/sqrt2, then (|01> +/- |10>)/sqrt2
        [Complex64::new(s, 0.0), C_ZERO, C_ZERO, Complex64::new(s, 0.0)],
        [Complex64::new(s, 0.0), C_ZERO, C_ZERO, Complex64::new(-s, 0.0)],
        [C_ZERO, Complex64::new(s, 0.0), Complex64::new(s, 0.0), C_ZERO],
        [C_ZERO, Complex64::new(s, 0.0), Complex64::new(-s, 0.0), C_ZERO],
    ];
    let effects =
        vecs.iter().map(|v| CMatrix::outer(dims.clone(), v, v).unwrap()).collect::<Vec<_>>();
    Measurement::new(effects).expect("Bell projectors form a POVM")
}

/// Pair of MIO channels built from two input basis indices `k != l`, two
/// output indices `n, m`, and two memory-system vectors `psi, phi` whose
/// projector sum is diagonal.
///
/// The first channel routes the `{|k>,|l>}` coherence into the `psi/phi`
/// pair symmetrically, the second antisymmetrically. Both are completely
/// positive, trace preserving, and MIO for every index choice; they serve as
/// probes certifying the dephasing-compatibility conditions of supermaps.
/// Input system: `1`; output systems: `2` and `B`.
pub fn mio_probe_channels(
    d_in: usize,
    d_out: usize,
    k: usize,
    l: usize,
    n: usize,
    m: usize,
    psi: &[Complex64],
    phi: &[Complex64],
) -> Result<(ChoiMatrix, ChoiMatrix)> {
    if k == l {
        return Err(Error::BadArgument("basis indices k and l must differ".into()));
    }
    if k >= d_in || l >= d_in || n >= d_out || m >= d_out {
        return Err(Error::BadArgument("basis index out of range".into()));
    }
    let db = psi.len();
    if phi.len() != db || db == 0 {
        return Err(Error::DimMismatch("psi and phi must share the memory dimension".into()));
    }
    for v in [psi, phi] {
        let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::BadState("psi and phi must be normalized".into()));
        }
    }
    let dims_b = SystemDims::single("B", db);
    let proj_sum = CMatrix::outer(dims_b.clone(), psi, psi)?
        .add(&CMatrix::outer(dims_b.clone(), phi, phi)?)?;
    let dephased = dephase(&proj_sum, &[Label::from("B")])?;
    if proj_sum.max_abs_diff(&dephased) > 1e-10 {
        return Err(Error::BadArgument(
            "the projector sum |psi><psi| + |phi><phi| must be diagonal".into(),
        ));
    }

    let dims_1 = SystemDims::single("1", d_in);
    let dims_2 = SystemDims::single("2", d_out);
    let kn = tensor_vec(&basis_ket(d_in, k), &basis_ket(d_out, n));
    let lm = tensor_vec(&basis_ket(d_in, l), &basis_ket(d_out, m));
    let dims_12 = dims_1.concat(&dims_2)?;

    // (1 - |k><k| - |l><l|)_1 x 1_2/d2 x 1_B/dB
    let mut rest = CMatrix::identity(dims_1.clone());
    rest.set(k, k, C_ZERO);
    rest.set(l, l, C_ZERO);
    let base = tensor(
        &tensor(
            &rest,
            &CMatrix::identity(dims_2).scale(Complex64::new(1.0 / d_out as f64, 0.0)),
        )?,
        &CMatrix::identity(dims_b.clone()).scale(Complex64::new(1.0 / db as f64, 0.0)),
    )?;

    let half = Complex64::new(0.5, 0.0);
    let diag_12 = CMatrix::outer(dims_12.clone(), &kn, &kn)?
        .add(&CMatrix::outer(dims_12.clone(), &lm, &lm)?)?;
    let cross_sym = CMatrix::outer(dims_12.clone(), &kn, &lm)?
        .add(&CMatrix::outer(dims_12.clone(), &lm, &kn)?)?;
    let cross_anti = CMatrix::outer(dims_12.clone(), &kn, &lm)?
        .sub(&CMatrix::outer(dims_12.clone(), &lm, &kn)?)?;

    let psi_proj = CMatrix::outer(dims_b.clone(), psi, psi)?;
    let phi_proj = CMatrix::outer(dims_b.clone(), phi, phi)?;
    let sum_b = psi_proj.add(&phi_proj)?;
    let diff_b = psi_proj.sub(&phi_proj)?;
    let anti_b =
        CMatrix::outer(dims_b.clone(), psi, phi)?.sub(&CMatrix::outer(dims_b, phi, psi)?)?;

    let j_sym = base
        .add(&tensor(&diag_12, &sum_b)?.scale(half))?
        .add(&tensor(&cross_sym, &diff_b)?.scale(half))?;
    let j_anti = base
        .add(&tensor(&diag_12, &sum_b)?.scale(half))?
        .add(&tensor(&cross_anti, &anti_b)?.scale(half))?;

    let in_dims = SystemDims::single("1", d_in);
    let out_dims = SystemDims::new(&[(Label::from("2"), d_out), (Label::from("B"), db)])?;
    Ok((
        ChoiMatrix::new(in_dims.clone(), out_dims.clone(), j_sym)?,
        ChoiMatrix::new(in_dims, out_dims, j_anti)?,
    ))
}

/// How to sample a random MIO channel.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum RandomMioMode {
    /// Incoherent Kraus family `K_a = sum_i c_{a,i} e^{i theta} |f_a(i)><i|`:
    /// cheap, always valid, a strict subset of MIO.
    KrausFamily,
    /// Maximize a random Hermitian objective over the CPTP+MIO spectrahedron:
    /// lands on extremal points of MIO.
    SdpExtremal,
}

/// Random MIO channel from `in_label` (dimension `d_in`) to `out_label`.
pub fn random_mio(
    d_in: usize,
    d_out: usize,
    mode: RandomMioMode,
    in_label: impl Into<Label>,
    out_label: impl Into<Label>,
    rng: &mut impl Rng,
) -> Result<ChoiMatrix> {
    if d_in < 1 || d_out < 1 {
        return Err(Error::BadArgument("dimensions must be >= 1".into()));
    }
    let in_dims = SystemDims::single(in_label, d_in);
    let out_dims = SystemDims::single(out_label, d_out);
    match mode {
        RandomMioMode::KrausFamily => {
            // Mixture of partial-permutation isometries with random phases.
            // Each Kraus operator maps a chunk of input basis states
            // injectively onto distinct outputs; injectivity per operator is
            // what makes the family exactly trace preserving.
            let n_mix = 2 + (rng.random::<u32>() % 2) as usize;
            let mut weights: Vec<f64> = (0..n_mix).map(|_| rng.random::<f64>() + 0.05).collect();
            let total: f64 = weights.iter().sum();
            for w in &mut weights {
                *w /= total;
            }
            let shuffle = |rng: &mut dyn rand::RngCore, n: usize| -> Vec<usize> {
                let mut v: Vec<usize> = (0..n).collect();
                for i in (1..n).rev() {
                    let j = (rng.next_u32() as usize) % (i + 1);
                    v.swap(i, j);
                }
                v
            };
            let mut kraus: Vec<Kraus> = Vec::new();
            for &w in &weights {
                let perm = shuffle(rng, d_in);
                let mut idx = 0;
                while idx < d_in {
                    let chunk = (d_in - idx).min(d_out);
                    let targets = shuffle(rng, d_out);
                    let mut k = Kraus::zeros(d_out, d_in);
                    for t in 0..chunk {
                        let i = perm[idx + t];
                        let theta = crate::cost::TWO_PI * rng.random::<f64>();
                        k.data[targets[t] * d_in + i] = Complex64::from_polar(w.sqrt(), theta);
                    }
                    kraus.push(k);
                    idx += chunk;
                }
            }
            choi_from_kraus(in_dims, out_dims, &kraus)
        }
        RandomMioMode::SdpExtremal => {
            let all = in_dims.concat(&out_dims)?;
            let g =
                CMatrix::from_fn(all, |_, _| Complex64::new(randn(rng), randn(rng))).hermitize();
            let (sol, choi) = solve_mio_choi(&in_dims, &out_dims, &g, Sense::Max, 1e-9)?;
            if sol.status != SolveStatus::Optimal {
                return Err(Error::Solver(format!(
                    "random MIO channel SDP ended with {:?}",
                    sol.status
                )));
            }
            Ok(choi)
        }
    }
}

/// Random CPTP channel from a Haar-style Stinespring isometry.
pub fn random_channel(
    d_in: usize,
    d_out: usize,
    in_label: impl Into<Label>,
    out_label: impl Into<Label>,
    rng: &mut impl Rng,
) -> Result<ChoiMatrix> {
    let d_env = d_in;
    // Gram-Schmidt a Ginibre block into an isometry (d_out*d_env) x d_in.
    let rows = d_out * d_env;
    let mut cols: Vec<Vec<Complex64>> = (0..d_in)
        .map(|_| (0..rows).map(|_| Complex64::new(randn(rng), randn(rng))).collect())
        .collect();
    for j in 0..d_in {
        for i in 0..j {
            let proj: Complex64 = cols[i].iter().zip(&cols[j]).map(|(a, b)| a.conj() * b).sum();
            let (head, tail) = cols.split_at_mut(j);
            for (a, b) in head[i].iter().zip(tail[0].iter_mut()) {
                *b -= proj * a;
            }
        }
        let norm: f64 = cols[j].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for z in &mut cols[j] {
            *z /= norm;
        }
    }
    let kraus: Vec<Kraus> = (0..d_env)
        .map(|e| Kraus::from_fn(d_out, d_in, |a, i| cols[i][a * d_env + e]))
        .collect();
    choi_from_kraus(
        SystemDims::single(in_label, d_in),
        SystemDims::single(out_label, d_out),
        &kraus,
    )
}

/// Optimize a Hermitian objective over the Choi matrices of MIO channels:
/// `opt { Re Tr[G J] : J >= 0, Tr_out J = 1_in, Delta_in J = Delta_in Delta_out J }`.
///
/// The objective must live on the in and out systems. Returns the solver
/// verdict together with the optimizer wrapped as a Choi matrix.
pub fn solve_mio_choi(
    in_dims: &SystemDims,
    out_dims: &SystemDims,
    objective: &CMatrix,
    sense: Sense,
    tol: f64,
) -> Result<(HermitianSolution, ChoiMatrix)> {
    let din = in_dims.total();
    let dout = out_dims.total();
    let dim = din * dout;
    let canonical = in_dims.concat(out_dims)?;
    let obj = if objective.dims() == &canonical {
        objective.clone()
    } else {
        reorder(objective, canonical.labels())?
    };
    let mut prob = HermitianSdp::new(vec![dim], sense);
    prob.set_objective_matrix(0, &obj);
    // trace preservation: Tr_out J = 1_in
    for p in 0..din {
        for q in p..din {
            if p == q {
                let mut con = HermSparse::default();
                for a in 0..dout {
                    con.push(0, p * dout + a, p * dout + a, C_ONE);
                }
                prob.add_constraint(con, 1.0);
            } else {
                let mut re = HermSparse::default();
                let mut im = HermSparse::default();
                for a in 0..dout {
                    re.push(0, p * dout + a, q * dout + a, C_ONE);
                    im.push(0, p * dout + a, q * dout + a, Complex64::new(0.0, 1.0));
                }
                prob.add_constraint(re, 0.0);
                prob.add_constraint(im, 0.0);
            }
        }
    }
    // MIO: entries diagonal on the input but off-diagonal on the output vanish
    for i in 0..din {
        for a in 0..dout {
            for b in (a + 1)..dout {
                let mut re = HermSparse::default();
                re.push(0, i * dout + a, i * dout + b, C_ONE);
                prob.add_constraint(re, 0.0);
                let mut im = HermSparse::default();
                im.push(0, i * dout + a, i * dout + b, Complex64::new(0.0, 1.0));
                prob.add_constraint(im, 0.0);
            }
        }
    }
    let sol = prob.solve(tol)?;
    let mat = CMatrix::from_data(canonical, sol.optimizers[0].clone())?.hermitize();
    let choi = ChoiMatrix::new(in_dims.clone(), out_dims.clone(), mat)?;
    Ok((sol, choi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::lbl;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn hadamard(label: &str) -> CMatrix {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let dims = SystemDims::single(label, 2);
        CMatrix::from_fn(dims, |r, c| {
            let sign = if r == 1 && c == 1 { -s } else { s };
            Complex64::new(sign, 0.0)
        })
    }

    #[test]
    fn identity_choi_is_omega() {
        let j = identity_choi(3, "i", "o").unwrap();
        for n in 0..3 {
            for m in 0..3 {
                assert_eq!(j.mat().at(n * 3 + n, m * 3 + m), C_ONE);
            }
        }
        assert!(j.is_cptp(1e-12));
    }

    #[test]
    fn dephasing_choi_is_diagonal_omega() {
        let j = dephasing_choi(3, "i", "o").unwrap();
        for n in 0..3 {
            for m in 0..3 {
                let expect = if n == m { C_ONE } else { C_ZERO };
                assert_eq!(j.mat().at(n * 3 + n, m * 3 + m), expect);
            }
        }
        assert!(j.is_mio(1e-12));
    }

    #[test]
    fn hadamard_choi_is_rank_one_and_maps_zero_to_plus() {
        let j = choi_of_unitary(&hadamard("x"), "i", "o").unwrap();
        let (evals, _) = eig_hermitian(j.mat()).unwrap();
        assert!(evals[..3].iter().all(|v| v.abs() < 1e-12));
        assert!((evals[3] - 2.0).abs() < 1e-12);
        let zero = DensityMatrix::diagonal("i", &[1.0, 0.0]).unwrap();
        let out = j.apply(&zero).unwrap();
        for r in 0..2 {
            for c in 0..2 {
                assert!((out.mat().at(r, c).re - 0.5).abs() < 1e-12);
            }
        }
        assert!(!j.is_mio(1e-9), "a Hadamard creates coherence from |0>");
    }

    #[test]
    fn non_trace_preserving_kraus_rejected() {
        let k =
            Kraus::from_fn(2, 2, |r, c| if r == c { Complex64::new(0.5, 0.0) } else { C_ZERO });
        let res =
            choi_from_kraus(SystemDims::single("i", 2), SystemDims::single("o", 2), &[k]);
        assert!(res.is_err());
    }

    #[test]
    fn kraus_application_matches_choi_application() {
        let mut rng = ChaCha12Rng::seed_from_u64(41);
        for trial in 0..100 {
            let d_in = 2 + (trial % 3);
            let d_out = 2 + ((trial / 3) % 3);
            let j = random_channel(d_in, d_out, "i", "o", &mut rng).unwrap();
            assert!(j.is_cptp(1e-9), "random channel must be CPTP");
            let rho = crate::states::random_density("i", d_in, &mut rng).unwrap();
            let via_choi = j.apply(&rho).unwrap();
            // reconstruct Kraus operators from the Choi matrix's eigenvectors
            let (evals, evecs) = eig_hermitian(j.mat()).unwrap();
            let mut direct = CMatrix::zeros(SystemDims::single("o", d_out));
            for (idx, &ev) in evals.iter().enumerate() {
                if ev < 1e-12 {
                    continue;
                }
                let v = &evecs[idx];
                let mut k = Kraus::zeros(d_out, d_in);
                for n in 0..d_in {
                    for a in 0..d_out {
                        k.data[a * d_in + n] = v[n * d_out + a] * ev.sqrt();
                    }
                }
                for a in 0..d_out {
                    for b in 0..d_out {
                        let mut acc = C_ZERO;
                        for n in 0..d_in {
                            for m in 0..d_in {
                                acc += k.at(a, n) * rho.mat().at(n, m) * k.at(b, m).conj();
                            }
                        }
                        let cur = direct.at(a, b);
                        direct.set(a, b, cur + acc);
                    }
                }
            }
            assert!(
                via_choi.mat().max_abs_diff(&direct) < 1e-10,
                "trial {trial}: Kraus and Choi application disagree"
            );
        }
    }

    #[test]
    fn phase_unitary_basics() {
        let u0 = phase_unitary("s", 3, 0.0);
        assert!(u0.max_abs_diff(&CMatrix::identity(SystemDims::single("s", 3))) < 1e-15);
        let upi = phase_unitary("s", 2, std::f64::consts::PI);
        assert!((upi.at(0, 0) - C_ONE).norm() < 1e-15);
        assert!((upi.at(1, 1) + C_ONE).norm() < 1e-12);
        let a = phase_unitary("s", 4, 0.7);
        let b = phase_unitary("s", 4, 1.1);
        let ab = a.mul(&b).unwrap();
        let sum = phase_unitary("s", 4, 1.8);
        assert!(ab.max_abs_diff(&sum) < 1e-12);
    }

    #[test]
    fn qft_basics() {
        let f = qft("s", 5);
        let ident = f.adjoint().mul(&f).unwrap();
        assert!(ident.max_abs_diff(&CMatrix::identity(SystemDims::single("s", 5))) < 1e-12);
        for k in 0..5 {
            assert!((f.at(k, 0) - Complex64::new(1.0 / 5f64.sqrt(), 0.0)).norm() < 1e-12);
        }
        let f2 = qft("s", 2);
        assert!(f2.max_abs_diff(&hadamard("s")) < 1e-12);
    }

    #[test]
    fn probe_channels_are_cptp_and_mio() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let psi = [Complex64::new(s, 0.0), Complex64::new(s, 0.0)];
        let phi = [Complex64::new(s, 0.0), Complex64::new(-s, 0.0)];
        let (j_sym, j_anti) = mio_probe_channels(2, 2, 0, 1, 0, 1, &psi, &phi).unwrap();
        for j in [&j_sym, &j_anti] {
            let (lmin, tp) = j.cptp_residuals().unwrap();
            assert!(lmin > -1e-12, "PSD violated: {lmin}");
            assert!(tp < 1e-12, "trace preservation violated: {tp}");
            assert!(j.is_mio(1e-12));
            // dephasing the input forces dephasing of the outputs exactly
            let din = dephase(j.mat(), &[lbl("1")]).unwrap();
            let dall = dephase(&din, &[lbl("2"), lbl("B")]).unwrap();
            assert!(din.max_abs_diff(&dall) < 1e-12);
        }
        // the symmetric channel coincides with its projector decomposition
        let dims12 = SystemDims::new(&[(lbl("1"), 2), (lbl("2"), 2)]).unwrap();
        let kn = tensor_vec(&basis_ket(2, 0), &basis_ket(2, 0));
        let lm = tensor_vec(&basis_ket(2, 1), &basis_ket(2, 1));
        let mut plus = vec![C_ZERO; 4];
        let mut minus = vec![C_ZERO; 4];
        for i in 0..4 {
            plus[i] = (kn[i] + lm[i]) * Complex64::new(s, 0.0);
            minus[i] = (kn[i] - lm[i]) * Complex64::new(s, 0.0);
        }
        let dims_b = SystemDims::single("B", 2);
        let expect = tensor(
            &CMatrix::outer(dims12.clone(), &plus, &plus).unwrap(),
            &CMatrix::outer(dims_b.clone(), &psi, &psi).unwrap(),
        )
        .unwrap()
        .add(
            &tensor(
                &CMatrix::outer(dims12, &minus, &minus).unwrap(),
                &CMatrix::outer(dims_b, &phi, &phi).unwrap(),
            )
            .unwrap(),
        )
        .unwrap();
        assert!(j_sym.mat().max_abs_diff(&expect) < 1e-12);
    }

    #[test]
    fn probe_channels_trace_to_input_identity() {
        let mut rng = ChaCha12Rng::seed_from_u64(47);
        for _ in 0..5 {
            // random diagonal-sum pair supported on two basis states
            let theta = rng.random::<f64>() * crate::cost::TWO_PI;
            let s = std::f64::consts::FRAC_1_SQRT_2;
            let psi = [
                Complex64::from_polar(s, theta),
                Complex64::new(s, 0.0),
                C_ZERO,
            ];
            let phi = [
                Complex64::from_polar(s, theta),
                Complex64::new(-s, 0.0),
                C_ZERO,
            ];
            let (j_sym, j_anti) = mio_probe_channels(3, 2, 0, 2, 1, 0, &psi, &phi).unwrap();
            for j in [&j_sym, &j_anti] {
                let traced = partial_trace(j.mat(), &[lbl("2"), lbl("B")]).unwrap();
                let ident = CMatrix::identity(SystemDims::single("1", 3));
                assert!(traced.max_abs_diff(&ident) < 1e-12);
            }
        }
    }

    #[test]
    fn probe_channels_bell_diagonal_memory() {
        // memory vectors (|i k> +/- |j l>)/sqrt(2) have a diagonal projector
        // sum for any index choices; the channels stay MIO throughout
        let s = std::f64::consts::FRAC_1_SQRT_2;
        for (i, j2, k2, l2) in [(0usize, 1usize, 0usize, 1usize), (1, 0, 1, 0), (0, 1, 1, 0)] {
            let mut psi = vec![C_ZERO; 4];
            let mut phi = vec![C_ZERO; 4];
            psi[i * 2 + k2] = Complex64::new(s, 0.0);
            psi[j2 * 2 + l2] = Complex64::new(s, 0.0);
            phi[i * 2 + k2] = Complex64::new(s, 0.0);
            phi[j2 * 2 + l2] = Complex64::new(-s, 0.0);
            for (k, l) in [(0usize, 1usize), (1, 0)] {
                for (n, m) in [(0usize, 0usize), (0, 1), (1, 1)] {
                    let (a, b) = mio_probe_channels(2, 2, k, l, n, m, &psi, &phi).unwrap();
                    assert!(a.is_mio(1e-12) && a.is_cptp(1e-10));
                    assert!(b.is_mio(1e-12) && b.is_cptp(1e-10));
                }
            }
        }
    }

    #[test]
    fn probe_channels_reject_bad_inputs() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let psi = [Complex64::new(s, 0.0), Complex64::new(s, 0.0)];
        let phi = [Complex64::new(s, 0.0), Complex64::new(-s, 0.0)];
        assert!(mio_probe_channels(2, 2, 1, 1, 0, 1, &psi, &phi).is_err(), "k = l");
        // a non-diagonal projector sum violates the construction's premise
        let chi = [C_ONE, C_ZERO];
        assert!(mio_probe_channels(2, 2, 0, 1, 0, 1, &psi, &chi).is_err());
    }

    #[test]
    fn random_mio_modes_give_mio_channels() {
        let mut rng = ChaCha12Rng::seed_from_u64(53);
        for _ in 0..10 {
            let j = random_mio(3, 3, RandomMioMode::KrausFamily, "i", "o", &mut rng).unwrap();
            assert!(j.is_cptp(1e-9));
            assert!(j.is_mio(1e-9));
        }
        for _ in 0..5 {
            let j = random_mio(2, 3, RandomMioMode::SdpExtremal, "i", "o", &mut rng).unwrap();
            assert!(j.is_cptp(1e-7));
            assert!(j.is_mio(1e-7));
        }
        let trivial = random_mio(1, 1, RandomMioMode::KrausFamily, "i", "o", &mut rng).unwrap();
        assert!(trivial.is_cptp(1e-12));
        assert!((trivial.mat().at(0, 0) - C_ONE).norm() < 1e-12);
    }

    #[test]
    fn mio_channels_preserve_diagonal_states() {
        // incoherent in, incoherent out, across random MIO channels
        let mut rng = ChaCha12Rng::seed_from_u64(59);
        for trial in 0..50 {
            let d = 2 + (trial % 3);
            let j = random_mio(d, d, RandomMioMode::KrausFamily, "i", "o", &mut rng).unwrap();
            for _ in 0..10 {
                let mut probs: Vec<f64> = (0..d).map(|_| rng.random::<f64>() + 0.01).collect();
                let total: f64 = probs.iter().sum();
                for p in &mut probs {
                    *p /= total;
                }
                let rho = DensityMatrix::diagonal("i", &probs).unwrap();
                let out = j.apply(&rho).unwrap();
                let mut off = 0.0f64;
                for r in 0..d {
                    for c in 0..d {
                        if r != c {
                            off = off.max(out.mat().at(r, c).norm());
                        }
                    }
                }
                assert!(off <= 1e-9, "off-diagonal mass {off}");
            }
        }
    }

    #[test]
    fn mio_closed_under_composition_and_tensor() {
        let mut rng = ChaCha12Rng::seed_from_u64(61);
        for _ in 0..10 {
            let a = random_mio(2, 3, RandomMioMode::KrausFamily, "i", "m", &mut rng).unwrap();
            let b = random_mio(3, 2, RandomMioMode::KrausFamily, "m", "o", &mut rng).unwrap();
            let ab = a.compose(&b).unwrap();
            assert!(ab.is_cptp(1e-9));
            assert!(ab.is_mio(1e-9));

            let c = random_mio(2, 2, RandomMioMode::KrausFamily, "i2", "o2", &mut rng).unwrap();
            let par = a.par(&c).unwrap();
            assert!(par.is_mio(1e-9));
        }
    }

    #[test]
    fn choi_json_round_trip() {
        let mut rng = ChaCha12Rng::seed_from_u64(67);
        let j = random_channel(2, 3, "i", "o", &mut rng).unwrap();
        let text = serde_json::to_string(&j.to_json()).unwrap();
        let parsed: ChoiJson = serde_json::from_str(&text).unwrap();
        let back = ChoiMatrix::from_json(&parsed, &[lbl("i")], &[lbl("o")]).unwrap();
        assert!(back.mat().max_abs_diff(j.mat()) < 1e-12);
    }
}
