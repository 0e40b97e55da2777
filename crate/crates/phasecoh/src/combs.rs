//! Quantum combs and supermaps: the link product, the causal normalization
//! hierarchy, dephasing-compatibility, and explicit superchannel
//! constructions.
//!
//! A comb over alternating systems `0..2N+1` (even = inputs, odd = outputs)
//! is a PSD operator whose chained partial traces factor level by level; a
//! supermap is MIO-compatible when dephasing its first `j` inputs forces
//! dephasing of its first `j` outputs, for every `j`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channels::{ChoiMatrix, Measurement};
use crate::error::{Error, Result};
use crate::states::DensityMatrix;
use crate::tensor::{
    dephase, eig_hermitian, embed_into, partial_trace, partial_transpose, reorder, tensor,
    CMatrix, Label, SystemDims, C_ONE, C_ZERO,
};

/// Link product: contract two labeled operators over their shared systems.
///
/// `link(a, b) = Tr_shared[(1 x b^{T_shared}) (a x 1)]`; the result lives on
/// the symmetric difference of the label sets (a's own labels first).
pub fn link(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    let shared: Vec<Label> =
        a.dims().labels().iter().filter(|l| b.dims().contains(l)).cloned().collect();
    for l in &shared {
        if a.dims().dim_of(l) != b.dims().dim_of(l) {
            return Err(Error::DimMismatch(format!(
                "shared system `{l}` has mismatched dimensions"
            )));
        }
    }
    let b_t = partial_transpose(b, &shared)?;
    // common ordering: a's labels, then b's own labels
    let mut order: Vec<(Label, usize)> = a
        .dims()
        .labels()
        .iter()
        .map(|l| (l.clone(), a.dims().dim_of(l).unwrap()))
        .collect();
    for l in b.dims().labels() {
        if !shared.contains(l) {
            order.push((l.clone(), b.dims().dim_of(l).unwrap()));
        }
    }
    let full = SystemDims::new(&order)?;
    let a_big = embed_into(a, &full)?;
    let b_big = embed_into(&b_t, &full)?;
    let prod = b_big.mul(&a_big)?;
    partial_trace(&prod, &shared)
}

/// A positive operator over an alternating input/output system list
/// satisfying the causal normalization hierarchy.
#[derive(Clone, Debug)]
pub struct Comb {
    slots: usize,
    io: SystemDims,
    mat: CMatrix,
}

/// Diagnostic outcome of the comb hierarchy test.
#[derive(Clone, Debug)]
pub struct CombVerdict {
    pub ok: bool,
    /// Tooth at which the factorization first failed, if any.
    pub failing_level: Option<usize>,
    pub residual: f64,
}

impl Comb {
    /// Wrap an operator as a comb over the given alternating systems
    /// (`io.len() == 2 slots + 2`); validates the hierarchy at 1e-8.
    pub fn new(slots: usize, io: SystemDims, mat: CMatrix) -> Result<Self> {
        if io.len() != 2 * slots + 2 {
            return Err(Error::BadSystems(format!(
                "a comb with {slots} slots needs {} systems, got {}",
                2 * slots + 2,
                io.len()
            )));
        }
        let mat = if mat.dims() == &io { mat } else { reorder(&mat, io.labels())? };
        let comb = Comb { slots, io, mat };
        let verdict = comb.check(1e-8)?;
        if !verdict.ok {
            return Err(Error::BadSystems(format!(
                "operator is not a comb: level {:?} fails with residual {:.2e}",
                verdict.failing_level, verdict.residual
            )));
        }
        Ok(comb)
    }

    /// Wrap without validating (for operators checked elsewhere).
    pub fn new_unchecked(slots: usize, io: SystemDims, mat: CMatrix) -> Result<Self> {
        let mat = if mat.dims() == &io { mat } else { reorder(&mat, io.labels())? };
        Ok(Comb { slots, io, mat })
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn io(&self) -> &SystemDims {
        &self.io
    }

    pub fn mat(&self) -> &CMatrix {
        &self.mat
    }

    pub fn system(&self, j: usize) -> &Label {
        &self.io.labels()[j]
    }

    pub fn check(&self, tol: f64) -> Result<CombVerdict> {
        is_comb(&self.mat, self.io.labels(), tol)
    }

    pub fn to_json(&self) -> CombJson {
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
        CombJson { slots: self.slots, dims: self.io.dims().to_vec(), re, im }
    }

    pub fn from_json(json: &CombJson, labels: &[Label]) -> Result<Self> {
        if labels.len() != json.dims.len() {
            return Err(Error::BadSystems("label count must match stored dims".into()));
        }
        let pairs: Vec<_> = labels.iter().cloned().zip(json.dims.iter().copied()).collect();
        let io = SystemDims::new(&pairs)?;
        let n = io.total();
        if json.re.len() != n || json.im.len() != n {
            return Err(Error::DimMismatch("re/im must be n x n".into()));
        }
        let mat = CMatrix::from_fn(io.clone(), |r, c| {
            Complex64::new(json.re[r][c], json.im[r][c])
        });
        Comb::new(json.slots, io, mat)
    }
}

/// JSON form of a comb: `{slots, dims, re, im}`.
#[derive(Serialize, Deserialize, Debug, Clone)]
pub struct CombJson {
    pub slots: usize,
    pub dims: Vec<usize>,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

/// Causal normalization hierarchy over alternating systems `io`
/// (even positions = inputs, odd = outputs).
///
/// Sets `J^(N) = mat`; for `j = N..1` checks that `Tr_{2j+1} J^(j)` factors
/// as `1_{2j} (x) J^(j-1)` with `J^(j-1) = Tr_{2j, 2j+1} J^(j) / d_{2j}`, and
/// finally `Tr_1 J^(0) = 1_0` — all within `tol` (scaled by the operator
/// norm). PSD of the top level is included in the verdict.
pub fn is_comb(mat: &CMatrix, io: &[Label], tol: f64) -> Result<CombVerdict> {
    if io.len() % 2 != 0 || io.is_empty() {
        return Err(Error::BadSystems("io must list an even number of systems".into()));
    }
    for l in io {
        if !mat.dims().contains(l) {
            return Err(Error::UnknownLabel(l.to_string()));
        }
    }
    if mat.dims().len() != io.len() {
        return Err(Error::BadSystems("operator must live exactly on the io systems".into()));
    }
    let scale = mat.max_abs().max(1.0);
    let (evals, _) = eig_hermitian(&mat.hermitize())?;
    if evals[0] < -tol * scale {
        return Ok(CombVerdict { ok: false, failing_level: None, residual: -evals[0] });
    }
    let slots = io.len() / 2 - 1;
    let mut level = mat.clone();
    for j in (1..=slots).rev() {
        let out_label = &io[2 * j + 1];
        let in_label = &io[2 * j];
        let d_in = mat.dims().dim_of(in_label).unwrap();
        let traced = partial_trace(&level, std::slice::from_ref(out_label))?;
        let reduced = partial_trace(&traced, std::slice::from_ref(in_label))?
            .scale(Complex64::new(1.0 / d_in as f64, 0.0));
        let expect = embed_into(&reduced, traced.dims())?;
        let residual = traced.max_abs_diff(&expect);
        if residual > tol * scale {
            return Ok(CombVerdict { ok: false, failing_level: Some(j), residual });
        }
        level = reduced;
    }
    // final tooth: Tr_1 J^(0) = 1_0
    let traced = partial_trace(&level, std::slice::from_ref(&io[1]))?;
    let ident = CMatrix::identity(traced.dims().clone());
    let residual = traced.max_abs_diff(&ident);
    if residual > tol * scale {
        return Ok(CombVerdict { ok: false, failing_level: Some(0), residual });
    }
    Ok(CombVerdict { ok: true, failing_level: None, residual: 0.0 })
}

/// Dephasing-compatibility of a supermap: for every `0 <= j <= N`, dephasing
/// inputs `0, 2, .., 2j` must equal additionally dephasing outputs
/// `1, 3, .., 2j+1`. Returns the first failing level, if any.
pub fn mio_compatibility(c: &Comb, tol: f64) -> Result<CombVerdict> {
    let io = c.io().labels();
    for j in 0..=c.slots() {
        let ins: Vec<Label> = (0..=j).map(|k| io[2 * k].clone()).collect();
        let outs: Vec<Label> = (0..=j).map(|k| io[2 * k + 1].clone()).collect();
        let din = dephase(c.mat(), &ins)?;
        let dboth = dephase(&din, &outs)?;
        let residual = din.max_abs_diff(&dboth);
        if residual > tol {
            return Ok(CombVerdict { ok: false, failing_level: Some(j), residual });
        }
    }
    Ok(CombVerdict { ok: true, failing_level: None, residual: 0.0 })
}

/// Convenience wrapper for [`mio_compatibility`].
pub fn is_mio_compatible(c: &Comb, tol: f64) -> bool {
    mio_compatibility(c, tol).map(|v| v.ok).unwrap_or(false)
}

/// Contract a network of channels (with shared memory systems) into its
/// comb.
///
/// Channel `j` must output the comb system `2j+1` and the memory consumed by
/// channel `j+1`; the retained systems are listed in `io` in temporal order.
/// All memory labels disappear through the link product.
pub fn comb_from_network(channels: &[ChoiMatrix], io: &[Label]) -> Result<Comb> {
    if channels.is_empty() {
        return Err(Error::BadArgument("a network needs at least one channel".into()));
    }
    let mut acc = channels[0].mat().clone();
    for ch in &channels[1..] {
        acc = link(&acc, ch.mat())?;
    }
    let mut pairs = Vec::with_capacity(io.len());
    for l in io {
        let d = acc
            .dims()
            .dim_of(l)
            .ok_or_else(|| Error::UnknownLabel(l.to_string()))?;
        pairs.push((l.clone(), d));
    }
    if pairs.len() != acc.dims().len() {
        return Err(Error::BadSystems(
            "network leaves systems that are not listed in io (unconsumed memory?)".into(),
        ));
    }
    let slots = io.len() / 2 - 1;
    Comb::new(slots, SystemDims::new(&pairs)?, acc)
}

/// Measure-and-reprepare superchannel on systems `(0, 1, 2, 3)`: the
/// preprocessing discards the input and emits one half of a maximally
/// entangled pair, the postprocessing measures the slot output together with
/// the retained half and writes the outcome into the incoherent basis.
///
/// The result is a valid one-slot comb that maps every channel into MIO but
/// is not MIO-compatible (it fails at the first dephasing level).
pub fn measure_prepare_superchannel(povm: &Measurement) -> Result<Comb> {
    let dims_a = povm.effects()[0].dims().clone();
    if dims_a.len() != 2 {
        return Err(Error::BadMeasurement(
            "the POVM must act on the slot output and the memory system".into(),
        ));
    }
    let slot_label = dims_a.labels()[0].clone();
    let mem_label = dims_a.labels()[1].clone();
    let d2 = dims_a.dims()[0];
    let da = dims_a.dims()[1];
    if d2 != 2 || da != 2 {
        return Err(Error::BadMeasurement("this construction uses qubit systems".into()));
    }
    let n_out = povm.len();

    // preprocessing Choi: 1_0 (x) Phi+_{1,A} (unnormalized maximally
    // entangled state on the slot input and the memory)
    let dims_0 = SystemDims::single("0", 2);
    let dims_1a = SystemDims::new(&[(Label::from("1"), 2), (mem_label.clone(), 2)])?;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let phi_plus = [Complex64::new(s, 0.0), C_ZERO, C_ZERO, Complex64::new(s, 0.0)];
    let j_pre = tensor(
        &CMatrix::identity(dims_0),
        &CMatrix::outer(dims_1a, &phi_plus, &phi_plus)?,
    )?;

    // postprocessing Choi on (2, A, 3): K(sigma) = sum_i Tr[M_i sigma] |i><i|
    let dims_2a3 = SystemDims::new(&[
        (slot_label.clone(), 2),
        (mem_label.clone(), 2),
        (Label::from("3"), n_out),
    ])?;
    let mut j_post = CMatrix::zeros(dims_2a3);
    for x in 0..4usize {
        for y in 0..4usize {
            for (i, effect) in povm.effects().iter().enumerate() {
                // Tr[M_i |x><y|] = <y| M_i |x>
                let w = effect.at(y, x);
                if w == C_ZERO {
                    continue;
                }
                let row = x * n_out + i;
                let col = y * n_out + i;
                let cur = j_post.at(row, col);
                j_post.set(row, col, cur + w);
            }
        }
    }

    let linked = link(&j_pre, &j_post)?;
    let io = SystemDims::new(&[
        (Label::from("0"), 2),
        (Label::from("1"), 2),
        (slot_label, 2),
        (Label::from("3"), n_out),
    ])?;
    Comb::new(1, io, linked)
}

/// Insert a channel (slot `1 -> 2`, possibly with a bypass output) into a
/// one-slot superchannel, producing the resulting channel's Choi matrix from
/// system `0` to the remaining outputs.
pub fn insert_into_superchannel(s1: &Comb, channel: &ChoiMatrix) -> Result<ChoiMatrix> {
    let linked = link(s1.mat(), channel.mat())?;
    let in_dims = SystemDims::new(&[(s1.system(0).clone(), s1.io().dims()[0])])?;
    let mut out_pairs = Vec::new();
    for l in linked.dims().labels() {
        if *l != *s1.system(0) {
            out_pairs.push((l.clone(), linked.dims().dim_of(l).unwrap()));
        }
    }
    let out_dims = SystemDims::new(&out_pairs)?;
    ChoiMatrix::new(in_dims, out_dims, linked)
}

/// Result of the coherent-bit extraction pipeline, kept stepwise so each
/// stage can be inspected.
pub struct CoherentBitExtraction {
    /// Bell-measurement superchannel on systems `(0, 1, 2, 3)`.
    pub superchannel: Comb,
    /// Inserted MIO channel `1 -> (2, B)`.
    pub inserted: ChoiMatrix,
    /// Resulting replacement channel on `(0) -> (B, 3)`.
    pub replacement: ChoiMatrix,
    /// Outcome probabilities of the incoherent measurement on system 3.
    pub outcome_probs: Vec<f64>,
    /// Final corrected state on B.
    pub output: DensityMatrix,
}

/// Run the full extraction: a Bell-measurement superchannel that maps every
/// channel to MIO nevertheless releases a perfect coherent bit when an MIO
/// channel with a memory bypass is inserted and the outcome on system 3 is
/// corrected by a conditional Z.
pub fn extract_coherent_bit() -> Result<CoherentBitExtraction> {
    let s1 = measure_prepare_superchannel(&crate::channels::bell_measurement("2", "A"))?;
    // MIO channel 1 -> (2, B) hiding a coherent bit in the Bell basis
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let plus = [Complex64::new(s, 0.0), Complex64::new(s, 0.0)];
    let minus = [Complex64::new(s, 0.0), Complex64::new(-s, 0.0)];
    let (j_mio, _) = crate::channels::mio_probe_channels(2, 2, 0, 1, 0, 1, &plus, &minus)?;

    let replacement = insert_into_superchannel(&s1, &j_mio)?;

    // feed any input state (the channel discards it), measure system 3 in
    // the incoherent basis, and apply Z on B for the odd outcomes
    let rho_in = DensityMatrix::diagonal("0", &[1.0, 0.0])?;
    let out = replacement.apply_to(rho_in.relabel("0").mat())?;
    let out = reorder(&out, &[Label::from("B"), Label::from("3")])?;
    let n3 = out.dims().dims()[1];
    let dims_b = SystemDims::single("B", 2);
    let z_gate = crate::channels::phase_unitary("B", 2, std::f64::consts::PI);
    let mut probs = Vec::with_capacity(n3);
    let mut final_b = CMatrix::zeros(dims_b.clone());
    for x in 0..n3 {
        // project system 3 onto |x>
        let mut block = CMatrix::zeros(dims_b.clone());
        for r in 0..2 {
            for c in 0..2 {
                block.set(r, c, out.at(r * n3 + x, c * n3 + x));
            }
        }
        let p = block.trace().re;
        probs.push(p);
        if p <= 1e-15 {
            continue;
        }
        let corrected = if x % 2 == 1 { block.conjugate_by(&z_gate)? } else { block };
        final_b = final_b.add(&corrected)?;
    }
    let output = DensityMatrix::new(final_b.hermitize())?;
    Ok(CoherentBitExtraction {
        superchannel: s1,
        inserted: j_mio,
        replacement,
        outcome_probs: probs,
        output,
    })
}

/// Fidelity of a state with the even superposition `|+>`.
pub fn plus_fidelity(rho: &DensityMatrix) -> f64 {
    if rho.dim() != 2 {
        return 0.0;
    }
    let m = rho.mat();
    0.5 * (m.at(0, 0) + m.at(0, 1) + m.at(1, 0) + m.at(1, 1)).re
}

/// The closed form of the Bell-measurement superchannel:
/// `1/2 1_0 (x) sum_i |Bell_i><Bell_i|_{1,2} (x) |i><i|_3`.
pub fn bell_superchannel_closed_form() -> Result<CMatrix> {
    let io = SystemDims::new(&[
        (Label::from("0"), 2),
        (Label::from("1"), 2),
        (Label::from("2"), 2),
        (Label::from("3"), 4),
    ])?;
    let dims_12 = SystemDims::new(&[(Label::from("1"), 2), (Label::from("2"), 2)])?;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let bells: [[Complex64; 4]; 4] = [
        [Complex64::new(s, 0.0), C_ZERO, C_ZERO, Complex64::new(s, 0.0)],
        [Complex64::new(s, 0.0), C_ZERO, C_ZERO, Complex64::new(-s, 0.0)],
        [C_ZERO, Complex64::new(s, 0.0), Complex64::new(s, 0.0), C_ZERO],
        [C_ZERO, Complex64::new(s, 0.0), Complex64::new(-s, 0.0), C_ZERO],
    ];
    let mut acc = CMatrix::zeros(SystemDims::new(&[
        (Label::from("1"), 2),
        (Label::from("2"), 2),
        (Label::from("3"), 4),
    ])?);
    for (i, v) in bells.iter().enumerate() {
        let proj = CMatrix::outer(dims_12.clone(), v, v)?;
        let mut ket3 = CMatrix::zeros(SystemDims::single("3", 4));
        ket3.set(i, i, C_ONE);
        acc = acc.add(&tensor(&proj, &ket3)?)?;
    }
    let half = Complex64::new(0.5, 0.0);
    let full = tensor(&CMatrix::identity(SystemDims::single("0", 2)), &acc)?.scale(half);
    reorder(&full, io.labels())
}

/// Covariant two-outcome variant of the Bell superchannel (outcomes folded
/// to parity); inserting the identity channel and estimating `0` or `pi`
/// from the parity achieves the unconstrained optimum for a single qubit
/// phase gate regardless of the input state's coherence.
pub fn parity_superchannel() -> Result<Comb> {
    let full = bell_superchannel_closed_form()?;
    // fold outcomes {0,2} -> 0 and {1,3} -> 1 on system 3
    let io = SystemDims::new(&[
        (Label::from("0"), 2),
        (Label::from("1"), 2),
        (Label::from("2"), 2),
        (Label::from("3"), 2),
    ])?;
    let mut folded = CMatrix::zeros(io.clone());
    let n = full.n();
    for r in 0..n {
        for c in 0..n {
            let z = full.at(r, c);
            if z == C_ZERO {
                continue;
            }
            let (r3, c3) = (r % 4, c % 4);
            if r3 != c3 {
                continue; // outcome register is diagonal by construction
            }
            let fold = r3 % 2;
            let rr = (r / 4) * 2 + fold;
            let cc = (c / 4) * 2 + fold;
            let cur = folded.at(rr, cc);
            folded.set(rr, cc, cur + z);
        }
    }
    Comb::new(1, io, folded)
}
