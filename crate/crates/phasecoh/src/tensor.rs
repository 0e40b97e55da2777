//! Dense complex linear algebra over labeled multipartite systems.
//!
//! Operators live on an ordered list of labeled finite-dimensional systems
//! and are stored as dense row-major matrices over the tensor-product basis.
//! The computational basis doubles as the incoherent basis: dephasing and
//! transposition are always taken with respect to it.

use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub const C_ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const C_ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Opaque identifier for a single system.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Label(pub String);

impl Label {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<&str> for Label {
    fn from(s: &str) -> Self {
        Label(s.to_string())
    }
}

impl From<String> for Label {
    fn from(s: String) -> Self {
        Label(s)
    }
}

impl From<usize> for Label {
    fn from(k: usize) -> Self {
        Label(k.to_string())
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Shorthand constructor for a [`Label`].
pub fn lbl(s: impl Into<Label>) -> Label {
    s.into()
}

/// An ordered list of labeled systems with their dimensions.
///
/// The first label is the most significant digit of the row-major
/// tensor-product index. An empty list describes a scalar (total dimension 1).
#[derive(Clone, PartialEq, Debug)]
pub struct SystemDims {
    labels: Vec<Label>,
    dims: Vec<usize>,
}

impl SystemDims {
    pub fn new(pairs: &[(Label, usize)]) -> Result<Self> {
        let mut labels = Vec::with_capacity(pairs.len());
        let mut dims = Vec::with_capacity(pairs.len());
        for (l, d) in pairs {
            if *d < 1 {
                return Err(Error::BadSystems(format!("dimension of `{l}` must be >= 1")));
            }
            if labels.contains(l) {
                return Err(Error::LabelCollision(l.to_string()));
            }
            labels.push(l.clone());
            dims.push(*d);
        }
        Ok(SystemDims { labels, dims })
    }

    pub fn single(label: impl Into<Label>, dim: usize) -> Self {
        SystemDims::new(&[(label.into(), dim)]).expect("single system")
    }

    pub fn scalar() -> Self {
        SystemDims { labels: Vec::new(), dims: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn total(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn position(&self, label: &Label) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn dim_of(&self, label: &Label) -> Option<usize> {
        self.position(label).map(|p| self.dims[p])
    }

    pub fn contains(&self, label: &Label) -> bool {
        self.position(label).is_some()
    }

    /// Concatenation; fails on duplicate labels.
    pub fn concat(&self, other: &SystemDims) -> Result<Self> {
        for l in &other.labels {
            if self.contains(l) {
                return Err(Error::LabelCollision(l.to_string()));
            }
        }
        let mut labels = self.labels.clone();
        let mut dims = self.dims.clone();
        labels.extend(other.labels.iter().cloned());
        dims.extend(other.dims.iter().cloned());
        Ok(SystemDims { labels, dims })
    }

    /// Keep only the listed labels, in their current order.
    pub fn select(&self, keep: &[Label]) -> SystemDims {
        let mut labels = Vec::new();
        let mut dims = Vec::new();
        for (l, d) in self.labels.iter().zip(&self.dims) {
            if keep.contains(l) {
                labels.push(l.clone());
                dims.push(*d);
            }
        }
        SystemDims { labels, dims }
    }

    /// Drop the listed labels, preserving order of the rest.
    pub fn without(&self, drop: &[Label]) -> SystemDims {
        let mut labels = Vec::new();
        let mut dims = Vec::new();
        for (l, d) in self.labels.iter().zip(&self.dims) {
            if !drop.contains(l) {
                labels.push(l.clone());
                dims.push(*d);
            }
        }
        SystemDims { labels, dims }
    }

    /// Row-major strides per system.
    pub fn strides(&self) -> Vec<usize> {
        let mut s = vec![1usize; self.dims.len()];
        for k in (0..self.dims.len().saturating_sub(1)).rev() {
            s[k] = s[k + 1] * self.dims[k + 1];
        }
        s
    }

    /// The digit of `index` on the system at `pos`.
    pub fn digit(&self, index: usize, pos: usize, strides: &[usize]) -> usize {
        (index / strides[pos]) % self.dims[pos]
    }

    pub fn check_subset(&self, over: &[Label]) -> Result<()> {
        for l in over {
            if !self.contains(l) {
                return Err(Error::UnknownLabel(l.to_string()));
            }
        }
        Ok(())
    }
}

/// Dense complex operator over labeled systems (square, row-major).
#[derive(Clone, PartialEq, Debug)]
pub struct CMatrix {
    dims: SystemDims,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(dims: SystemDims) -> Self {
        let n = dims.total();
        CMatrix { dims, data: vec![C_ZERO; n * n] }
    }

    pub fn identity(dims: SystemDims) -> Self {
        let n = dims.total();
        let mut m = CMatrix::zeros(dims);
        for i in 0..n {
            m.data[i * n + i] = C_ONE;
        }
        m
    }

    pub fn scalar(z: Complex64) -> Self {
        CMatrix { dims: SystemDims::scalar(), data: vec![z] }
    }

    pub fn from_fn(dims: SystemDims, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let n = dims.total();
        let mut data = Vec::with_capacity(n * n);
        for r in 0..n {
            for c in 0..n {
                data.push(f(r, c));
            }
        }
        CMatrix { dims, data }
    }

    pub fn from_data(dims: SystemDims, data: Vec<Complex64>) -> Result<Self> {
        let n = dims.total();
        if data.len() != n * n {
            return Err(Error::DimMismatch(format!(
                "expected {} entries for a {n}x{n} operator, got {}",
                n * n,
                data.len()
            )));
        }
        Ok(CMatrix { dims, data })
    }

    /// Rank-one operator |u><v| on the given systems.
    pub fn outer(dims: SystemDims, u: &[Complex64], v: &[Complex64]) -> Result<Self> {
        let n = dims.total();
        if u.len() != n || v.len() != n {
            return Err(Error::DimMismatch(format!(
                "outer product vectors must have length {n}"
            )));
        }
        Ok(CMatrix::from_fn(dims, |r, c| u[r] * v[c].conj()))
    }

    pub fn dims(&self) -> &SystemDims {
        &self.dims
    }

    pub fn n(&self) -> usize {
        self.dims.total()
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn at(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.n() + c]
    }

    pub fn set(&mut self, r: usize, c: usize, z: Complex64) {
        let n = self.n();
        self.data[r * n + c] = z;
    }

    pub fn add(&self, other: &CMatrix) -> Result<CMatrix> {
        self.check_same_systems(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(CMatrix { dims: self.dims.clone(), data })
    }

    pub fn sub(&self, other: &CMatrix) -> Result<CMatrix> {
        self.check_same_systems(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(CMatrix { dims: self.dims.clone(), data })
    }

    pub fn scale(&self, z: Complex64) -> CMatrix {
        CMatrix { dims: self.dims.clone(), data: self.data.iter().map(|a| a * z).collect() }
    }

    pub fn mul(&self, other: &CMatrix) -> Result<CMatrix> {
        self.check_same_systems(other)?;
        let n = self.n();
        let mut data = vec![C_ZERO; n * n];
        for r in 0..n {
            for k in 0..n {
                let a = self.data[r * n + k];
                if a == C_ZERO {
                    continue;
                }
                for c in 0..n {
                    data[r * n + c] += a * other.data[k * n + c];
                }
            }
        }
        Ok(CMatrix { dims: self.dims.clone(), data })
    }

    pub fn adjoint(&self) -> CMatrix {
        let n = self.n();
        CMatrix::from_fn(self.dims.clone(), |r, c| self.data[c * n + r].conj())
    }

    pub fn transpose_full(&self) -> CMatrix {
        let n = self.n();
        CMatrix::from_fn(self.dims.clone(), |r, c| self.data[c * n + r])
    }

    pub fn conj(&self) -> CMatrix {
        CMatrix { dims: self.dims.clone(), data: self.data.iter().map(|z| z.conj()).collect() }
    }

    pub fn trace(&self) -> Complex64 {
        let n = self.n();
        (0..n).map(|i| self.data[i * n + i]).sum()
    }

    /// U M U^dagger with U on the same systems.
    pub fn conjugate_by(&self, u: &CMatrix) -> Result<CMatrix> {
        u.mul(self)?.mul(&u.adjoint())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn frob_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &CMatrix) -> f64 {
        assert_eq!(self.data.len(), other.data.len(), "operand shapes differ");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// max |M - M^dagger| over entries.
    pub fn hermitian_error(&self) -> f64 {
        let n = self.n();
        let mut e: f64 = 0.0;
        for r in 0..n {
            for c in r..n {
                e = e.max((self.data[r * n + c] - self.data[c * n + r].conj()).norm());
            }
        }
        e
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_error() <= tol
    }

    /// (M + M^dagger) / 2.
    pub fn hermitize(&self) -> CMatrix {
        let n = self.n();
        CMatrix::from_fn(self.dims.clone(), |r, c| {
            0.5 * (self.data[r * n + c] + self.data[c * n + r].conj())
        })
    }

    /// Real part of Tr[A B]; exact inner-product pairing for Hermitian operands.
    pub fn inner_re(&self, other: &CMatrix) -> f64 {
        let n = self.n();
        let mut acc = 0.0;
        for r in 0..n {
            for c in 0..n {
                let p = self.data[r * n + c] * other.data[c * n + r];
                acc += p.re;
            }
        }
        acc
    }

    fn check_same_systems(&self, other: &CMatrix) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::DimMismatch(format!(
                "system lists differ: [{}] vs [{}]",
                join_labels(self.dims.labels()),
                join_labels(other.dims.labels())
            )));
        }
        Ok(())
    }
}

fn join_labels(labels: &[Label]) -> String {
    labels.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(",")
}

/// Kronecker product with concatenated labels; label sets must be disjoint.
pub fn tensor(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    let dims = a.dims().concat(b.dims())?;
    let (na, nb) = (a.n(), b.n());
    let n = na * nb;
    let mut data = vec![C_ZERO; n * n];
    for ra in 0..na {
        for ca in 0..na {
            let za = a.at(ra, ca);
            if za == C_ZERO {
                continue;
            }
            for rb in 0..nb {
                for cb in 0..nb {
                    data[(ra * nb + rb) * n + (ca * nb + cb)] = za * b.at(rb, cb);
                }
            }
        }
    }
    Ok(CMatrix { dims, data })
}

/// Tensor product of state vectors.
pub fn tensor_vec(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for x in a {
        for y in b {
            out.push(x * y);
        }
    }
    out
}

/// Computational basis vector |i> of dimension d.
pub fn basis_ket(d: usize, i: usize) -> Vec<Complex64> {
    let mut v = vec![C_ZERO; d];
    v[i] = C_ONE;
    v
}

/// Embedding tables: for the systems at `positions`, map every flat index of
/// the sub-space to its contribution in the full flat index.
fn embedding(dims: &SystemDims, positions: &[usize]) -> (usize, Vec<usize>) {
    let strides = dims.strides();
    let sub_dims: Vec<usize> = positions.iter().map(|&p| dims.dims()[p]).collect();
    let sub_total: usize = sub_dims.iter().product();
    let mut table = vec![0usize; sub_total];
    for (flat, slot) in table.iter_mut().enumerate() {
        let mut rem = flat;
        let mut acc = 0usize;
        for (k, &p) in positions.iter().enumerate().rev() {
            let d = sub_dims[k];
            acc += (rem % d) * strides[p];
            rem /= d;
        }
        *slot = acc;
    }
    (sub_total, table)
}

/// Trace over the listed systems; remaining labels keep their order.
pub fn partial_trace(m: &CMatrix, over: &[Label]) -> Result<CMatrix> {
    m.dims().check_subset(over)?;
    let keep_pos: Vec<usize> = (0..m.dims().len())
        .filter(|&p| !over.contains(&m.dims().labels()[p]))
        .collect();
    let tr_pos: Vec<usize> = (0..m.dims().len())
        .filter(|&p| over.contains(&m.dims().labels()[p]))
        .collect();
    let (kt, kemb) = embedding(m.dims(), &keep_pos);
    let (tt, temb) = embedding(m.dims(), &tr_pos);
    let out_dims = m.dims().without(over);
    let n = m.n();
    let mut out = CMatrix::zeros(out_dims);
    for rk in 0..kt {
        for ck in 0..kt {
            let mut acc = C_ZERO;
            for t in 0..tt {
                acc += m.data[(kemb[rk] + temb[t]) * n + (kemb[ck] + temb[t])];
            }
            out.data[rk * kt + ck] = acc;
        }
    }
    Ok(out)
}

/// Transpose within the listed systems, in the incoherent basis.
pub fn partial_transpose(m: &CMatrix, over: &[Label]) -> Result<CMatrix> {
    m.dims().check_subset(over)?;
    let n = m.n();
    let strides = m.dims().strides();
    let swap_pos: Vec<usize> = (0..m.dims().len())
        .filter(|&p| over.contains(&m.dims().labels()[p]))
        .collect();
    let mut out = CMatrix::zeros(m.dims().clone());
    for r in 0..n {
        for c in 0..n {
            let mut rr = r;
            let mut cc = c;
            for &p in &swap_pos {
                let dr = m.dims().digit(r, p, &strides);
                let dc = m.dims().digit(c, p, &strides);
                rr = rr - dr * strides[p] + dc * strides[p];
                cc = cc - dc * strides[p] + dr * strides[p];
            }
            out.data[rr * n + cc] = m.data[r * n + c];
        }
    }
    Ok(out)
}

/// Zero every entry whose row/column indices differ on any listed system.
pub fn dephase(m: &CMatrix, over: &[Label]) -> Result<CMatrix> {
    m.dims().check_subset(over)?;
    let n = m.n();
    let strides = m.dims().strides();
    let pos: Vec<usize> = (0..m.dims().len())
        .filter(|&p| over.contains(&m.dims().labels()[p]))
        .collect();
    let mut out = m.clone();
    for r in 0..n {
        for c in 0..n {
            let diagonal = pos
                .iter()
                .all(|&p| m.dims().digit(r, p, &strides) == m.dims().digit(c, p, &strides));
            if !diagonal {
                out.data[r * n + c] = C_ZERO;
            }
        }
    }
    Ok(out)
}

/// Reorder the systems into the given label order (a permutation of the
/// current labels).
pub fn reorder(m: &CMatrix, order: &[Label]) -> Result<CMatrix> {
    if order.len() != m.dims().len() {
        return Err(Error::BadSystems("reorder must list every label exactly once".into()));
    }
    let mut pairs = Vec::with_capacity(order.len());
    for l in order {
        let d = m
            .dims()
            .dim_of(l)
            .ok_or_else(|| Error::UnknownLabel(l.to_string()))?;
        pairs.push((l.clone(), d));
    }
    let new_dims = SystemDims::new(&pairs)?;
    let n = m.n();
    let old_strides = m.dims().strides();
    let new_strides = new_dims.strides();
    // perm[old_flat] = new_flat
    let mut perm = vec![0usize; n];
    for (idx, slot) in perm.iter_mut().enumerate() {
        let mut acc = 0usize;
        for (new_pos, l) in order.iter().enumerate() {
            let old_pos = m.dims().position(l).unwrap();
            acc += m.dims().digit(idx, old_pos, &old_strides) * new_strides[new_pos];
        }
        *slot = acc;
    }
    let mut out = CMatrix::zeros(new_dims);
    for r in 0..n {
        for c in 0..n {
            out.data[perm[r] * n + perm[c]] = m.data[r * n + c];
        }
    }
    Ok(out)
}

/// Tensor with identities so that `m` lives on `target`, then reorder to
/// `target`'s label order.
pub fn embed_into(m: &CMatrix, target: &SystemDims) -> Result<CMatrix> {
    for l in m.dims().labels() {
        if !target.contains(l) {
            return Err(Error::UnknownLabel(l.to_string()));
        }
    }
    let missing = target.without(m.dims().labels());
    let big = if missing.is_empty() {
        m.clone()
    } else {
        tensor(m, &CMatrix::identity(missing))?
    };
    reorder(&big, target.labels())
}

/// Channel application in the Choi representation:
/// output = Tr_in[(rho^T tensor 1_out) J], with the input systems inferred
/// from rho's labels.
pub fn apply_choi(j: &CMatrix, rho: &CMatrix) -> Result<CMatrix> {
    let in_labels = rho.dims().labels().to_vec();
    j.dims().check_subset(&in_labels)?;
    for l in &in_labels {
        if j.dims().dim_of(l) != rho.dims().dim_of(l) {
            return Err(Error::DimMismatch(format!(
                "input system `{l}` has different dimensions on the state and the Choi matrix"
            )));
        }
    }
    // Align rho's label order with the order those labels carry inside j.
    let in_order: Vec<Label> = j
        .dims()
        .labels()
        .iter()
        .filter(|l| in_labels.contains(l))
        .cloned()
        .collect();
    let rho_aligned = reorder(rho, &in_order)?;
    let in_pos: Vec<usize> = (0..j.dims().len())
        .filter(|&p| in_labels.contains(&j.dims().labels()[p]))
        .collect();
    let out_pos: Vec<usize> = (0..j.dims().len())
        .filter(|&p| !in_labels.contains(&j.dims().labels()[p]))
        .collect();
    let (it, iemb) = embedding(j.dims(), &in_pos);
    let (ot, oemb) = embedding(j.dims(), &out_pos);
    let out_dims = j.dims().without(&in_labels);
    let n = j.n();
    let mut out = CMatrix::zeros(out_dims);
    for a in 0..ot {
        for b in 0..ot {
            let mut acc = C_ZERO;
            for ni in 0..it {
                for mi in 0..it {
                    // Tr_in[(rho^T x 1) J] contracts rho[n,m] against J[(n,.),(m,.)]
                    let w = rho_aligned.data[ni * it + mi];
                    if w == C_ZERO {
                        continue;
                    }
                    acc += w * j.data[(iemb[ni] + oemb[a]) * n + (iemb[mi] + oemb[b])];
                }
            }
            out.data[a * ot + b] = acc;
        }
    }
    Ok(out)
}

/// Eigendecomposition of a Hermitian operator by cyclic Jacobi rotations.
///
/// Returns eigenvalues in ascending order with matching orthonormal
/// eigenvectors. The input is symmetrized before iterating; a Hermiticity
/// deviation beyond `1e-12 * max(1, |M|_max)` is rejected.
pub fn eig_hermitian(m: &CMatrix) -> Result<(Vec<f64>, Vec<Vec<Complex64>>)> {
    let scale = m.max_abs().max(1.0);
    let herm_err = m.hermitian_error();
    if herm_err > 1e-12 * scale {
        return Err(Error::NotHermitian(herm_err));
    }
    let a = m.hermitize();
    Ok(jacobi_hermitian(a.n(), a.data))
}

fn off_norm(n: usize, a: &[Complex64]) -> f64 {
    let mut acc = 0.0;
    for r in 0..n {
        for c in 0..n {
            if r != c {
                acc += a[r * n + c].norm_sqr();
            }
        }
    }
    acc.sqrt()
}

fn jacobi_hermitian(n: usize, mut a: Vec<Complex64>) -> (Vec<f64>, Vec<Vec<Complex64>>) {
    let mut v = vec![C_ZERO; n * n];
    for i in 0..n {
        v[i * n + i] = C_ONE;
    }
    if n > 1 {
        let norm = {
            let f: f64 = a.iter().map(|z| z.norm_sqr()).sum();
            f.sqrt().max(1e-300)
        };
        for _sweep in 0..100 {
            if off_norm(n, &a) <= 1e-14 * norm {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[p * n + q];
                    let r = apq.norm();
                    if r <= 1e-300 {
                        continue;
                    }
                    let alpha = apq / r;
                    let app = a[p * n + p].re;
                    let aqq = a[q * n + q].re;
                    let tau = (aqq - app) / (2.0 * r);
                    let t = if tau >= 0.0 {
                        1.0 / (tau + (1.0 + tau * tau).sqrt())
                    } else {
                        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                    };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = alpha * (t * c);
                    // A <- J^dagger A J with J[p,p]=c, J[p,q]=s, J[q,p]=-conj(s), J[q,q]=c
                    for k in 0..n {
                        let akp = a[k * n + p];
                        let akq = a[k * n + q];
                        a[k * n + p] = akp * c - akq * s.conj();
                        a[k * n + q] = akp * s + akq * c;
                    }
                    for k in 0..n {
                        let apk = a[p * n + k];
                        let aqk = a[q * n + k];
                        a[p * n + k] = apk * c - aqk * s;
                        a[q * n + k] = apk * s.conj() + aqk * c;
                    }
                    // keep the 2x2 block exactly Hermitian against roundoff
                    a[p * n + q] = C_ZERO;
                    a[q * n + p] = C_ZERO;
                    a[p * n + p] = Complex64::new(a[p * n + p].re, 0.0);
                    a[q * n + q] = Complex64::new(a[q * n + q].re, 0.0);
                    for k in 0..n {
                        let vkp = v[k * n + p];
                        let vkq = v[k * n + q];
                        v[k * n + p] = vkp * c - vkq * s.conj();
                        v[k * n + q] = vkp * s + vkq * c;
                    }
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    let evals_raw: Vec<f64> = (0..n).map(|i| a[i * n + i].re).collect();
    order.sort_by(|&i, &j| evals_raw[i].partial_cmp(&evals_raw[j]).unwrap());
    let evals: Vec<f64> = order.iter().map(|&i| evals_raw[i]).collect();
    let evecs: Vec<Vec<Complex64>> = order
        .iter()
        .map(|&col| (0..n).map(|row| v[row * n + col]).collect())
        .collect();
    (evals, evecs)
}

/// Smallest eigenvalue of a Hermitian operator.
pub fn lambda_min(m: &CMatrix) -> Result<f64> {
    Ok(eig_hermitian(m)?.0[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha12Rng;

    fn qubit(label: &str) -> SystemDims {
        SystemDims::single(label, 2)
    }

    fn random_cmatrix(rng: &mut impl Rng, dims: SystemDims) -> CMatrix {
        CMatrix::from_fn(dims, |_, _| {
            Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        })
    }

    fn random_hermitian(rng: &mut impl Rng, dims: SystemDims) -> CMatrix {
        random_cmatrix(rng, dims).hermitize()
    }

    #[test]
    fn tensor_of_identities() {
        let i2a = CMatrix::identity(qubit("a"));
        let i2b = CMatrix::identity(qubit("b"));
        let i4 = tensor(&i2a, &i2b).unwrap();
        assert_eq!(i4.n(), 4);
        let expect = CMatrix::identity(i4.dims().clone());
        assert!(i4.max_abs_diff(&expect) == 0.0);
    }

    #[test]
    fn tensor_basis_projectors() {
        let p0 = CMatrix::outer(qubit("a"), &basis_ket(2, 0), &basis_ket(2, 0)).unwrap();
        let p1 = CMatrix::outer(qubit("b"), &basis_ket(2, 1), &basis_ket(2, 1)).unwrap();
        let p01 = tensor(&p0, &p1).unwrap();
        for r in 0..4 {
            for c in 0..4 {
                let expect = if r == 1 && c == 1 { C_ONE } else { C_ZERO };
                assert_eq!(p01.at(r, c), expect);
            }
        }
    }

    #[test]
    fn tensor_rejects_label_collision() {
        let a = CMatrix::identity(qubit("a"));
        assert!(matches!(tensor(&a, &a), Err(Error::LabelCollision(_))));
    }

    #[test]
    fn partial_trace_factorizes() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for _ in 0..20 {
            let a = random_cmatrix(&mut rng, SystemDims::single("a", 3));
            let b = random_cmatrix(&mut rng, SystemDims::single("b", 2));
            let ab = tensor(&a, &b).unwrap();
            let reduced = partial_trace(&ab, &[lbl("b")]).unwrap();
            let expect = a.scale(b.trace());
            assert!(reduced.max_abs_diff(&expect) < 1e-12);
        }
    }

    #[test]
    fn partial_trace_over_everything_is_trace() {
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let dims = qubit("a").concat(&SystemDims::single("b", 3)).unwrap();
        let m = random_cmatrix(&mut rng, dims);
        let scalar = partial_trace(&m, &[lbl("a"), lbl("b")]).unwrap();
        assert_eq!(scalar.n(), 1);
        assert!((scalar.at(0, 0) - m.trace()).norm() < 1e-12);
    }

    #[test]
    fn partial_trace_unknown_label() {
        let m = CMatrix::identity(qubit("a"));
        assert!(matches!(partial_trace(&m, &[lbl("zz")]), Err(Error::UnknownLabel(_))));
    }

    #[test]
    fn full_transpose_matches_entrywise() {
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let dims = qubit("a").concat(&qubit("b")).unwrap();
        let m = random_cmatrix(&mut rng, dims);
        let t = partial_transpose(&m, &[lbl("a"), lbl("b")]).unwrap();
        assert!(t.max_abs_diff(&m.transpose_full()) < 1e-15);
    }

    #[test]
    fn dephase_plus_state() {
        let plus = [Complex64::new(0.5f64.sqrt(), 0.0); 2];
        let rho = CMatrix::outer(qubit("a"), &plus, &plus).unwrap();
        let d = dephase(&rho, &[lbl("a")]).unwrap();
        let expect = CMatrix::identity(qubit("a")).scale(Complex64::new(0.5, 0.0));
        assert!(d.max_abs_diff(&expect) < 1e-15);
    }

    #[test]
    fn dephase_without_labels_is_identity() {
        let mut rng = ChaCha12Rng::seed_from_u64(10);
        let m = random_cmatrix(&mut rng, qubit("a"));
        let d = dephase(&m, &[]).unwrap();
        assert!(d.max_abs_diff(&m) == 0.0);
    }

    #[test]
    fn reorder_round_trip() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let dims = SystemDims::new(&[(lbl("a"), 2), (lbl("b"), 3), (lbl("c"), 2)]).unwrap();
        let m = random_cmatrix(&mut rng, dims);
        let swapped = reorder(&m, &[lbl("c"), lbl("a"), lbl("b")]).unwrap();
        let back = reorder(&swapped, &[lbl("a"), lbl("b"), lbl("c")]).unwrap();
        assert!(back.max_abs_diff(&m) == 0.0);
    }

    #[test]
    fn eig_identity() {
        let (vals, _) = eig_hermitian(&CMatrix::identity(SystemDims::single("a", 4))).unwrap();
        for v in vals {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn eig_diagonal_sorted() {
        let dims = SystemDims::single("a", 3);
        let mut m = CMatrix::zeros(dims);
        m.set(0, 0, Complex64::new(3.0, 0.0));
        m.set(1, 1, Complex64::new(1.0, 0.0));
        m.set(2, 2, Complex64::new(2.0, 0.0));
        let (vals, _) = eig_hermitian(&m).unwrap();
        assert_eq!(vals, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn eig_tridiagonal_cost_block() {
        let dims = SystemDims::single("a", 2);
        let mut m = CMatrix::zeros(dims);
        m.set(0, 0, Complex64::new(2.0, 0.0));
        m.set(0, 1, Complex64::new(-1.0, 0.0));
        m.set(1, 0, Complex64::new(-1.0, 0.0));
        m.set(1, 1, Complex64::new(2.0, 0.0));
        let (vals, _) = eig_hermitian(&m).unwrap();
        assert!((vals[0] - 1.0).abs() < 1e-12);
        assert!((vals[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn eig_residual_and_orthonormality() {
        let mut rng = ChaCha12Rng::seed_from_u64(12);
        for n in [2usize, 5, 9] {
            let dims = SystemDims::single("a", n);
            let m = random_hermitian(&mut rng, dims);
            let (vals, vecs) = eig_hermitian(&m).unwrap();
            let norm = m.frob_norm();
            for (k, v) in vecs.iter().enumerate() {
                // residual ||Mv - lambda v||
                let mut res = 0.0f64;
                for r in 0..n {
                    let mut acc = C_ZERO;
                    for c in 0..n {
                        acc += m.at(r, c) * v[c];
                    }
                    res += (acc - v[r] * vals[k]).norm_sqr();
                }
                assert!(res.sqrt() <= 1e-10 * norm.max(1.0), "residual too large");
                for w in vecs.iter().skip(k + 1) {
                    let dot: Complex64 = v.iter().zip(w).map(|(x, y)| x.conj() * y).sum();
                    assert!(dot.norm() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn eig_rejects_non_hermitian() {
        let dims = SystemDims::single("a", 2);
        let mut m = CMatrix::zeros(dims);
        m.set(0, 1, C_ONE);
        assert!(matches!(eig_hermitian(&m), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn apply_choi_identity_channel() {
        let mut rng = ChaCha12Rng::seed_from_u64(13);
        // Choi of the identity channel: sum |nn><mm| over in ("i") and out ("o").
        let d = 3usize;
        let dims = SystemDims::new(&[(lbl("i"), d), (lbl("o"), d)]).unwrap();
        let mut j = CMatrix::zeros(dims);
        for n in 0..d {
            for m in 0..d {
                j.set(n * d + n, m * d + m, C_ONE);
            }
        }
        let rho = random_hermitian(&mut rng, SystemDims::single("i", d));
        let out = apply_choi(&j, &rho).unwrap();
        assert_eq!(out.dims().labels(), &[lbl("o")]);
        let mut diff = 0.0f64;
        for r in 0..d {
            for c in 0..d {
                diff = diff.max((out.at(r, c) - rho.at(r, c)).norm());
            }
        }
        assert!(diff < 1e-12);
    }

    #[test]
    fn apply_choi_phase_unitary_on_plus() {
        // Choi of conjugation by diag(1, e^{i phi}) applied to |+><+|.
        let phi = 0.7f64;
        let u = [C_ONE, Complex64::from_polar(1.0, phi)];
        let dims = SystemDims::new(&[(lbl("i"), 2), (lbl("o"), 2)]).unwrap();
        let mut j = CMatrix::zeros(dims);
        for n in 0..2 {
            for m in 0..2 {
                // J[(n,a),(m,b)] = U[a,n] conj(U[b,m]) for diagonal U
                j.set(n * 2 + n, m * 2 + m, u[n] * u[m].conj());
            }
        }
        let plus = [Complex64::new(0.5f64.sqrt(), 0.0); 2];
        let rho = CMatrix::outer(SystemDims::single("i", 2), &plus, &plus).unwrap();
        let out = apply_choi(&j, &rho).unwrap();
        assert!((out.at(0, 0).re - 0.5).abs() < 1e-12);
        assert!((out.at(0, 1) - Complex64::from_polar(0.5, -phi)).norm() < 1e-12);
        assert!((out.at(1, 0) - Complex64::from_polar(0.5, phi)).norm() < 1e-12);
    }

    proptest! {
        #[test]
        fn prop_partial_transpose_involution(seed in 0u64..200, mask in 0u8..8) {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let dims = SystemDims::new(&[(lbl("a"), 2), (lbl("b"), 2), (lbl("c"), 3)]).unwrap();
            let m = random_cmatrix(&mut rng, dims);
            let all = [lbl("a"), lbl("b"), lbl("c")];
            let over: Vec<Label> = (0..3).filter(|k| mask & (1 << k) != 0).map(|k| all[k].clone()).collect();
            let twice = partial_transpose(&partial_transpose(&m, &over).unwrap(), &over).unwrap();
            prop_assert!(twice.max_abs_diff(&m) == 0.0);
        }

        #[test]
        fn prop_dephase_idempotent_and_commuting(seed in 0u64..200) {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let dims = SystemDims::new(&[(lbl("a"), 2), (lbl("b"), 3)]).unwrap();
            let m = random_cmatrix(&mut rng, dims);
            let da = dephase(&m, &[lbl("a")]).unwrap();
            let daa = dephase(&da, &[lbl("a")]).unwrap();
            prop_assert!(daa.max_abs_diff(&da) == 0.0);
            let dab = dephase(&da, &[lbl("b")]).unwrap();
            let dba = dephase(&dephase(&m, &[lbl("b")]).unwrap(), &[lbl("a")]).unwrap();
            prop_assert!(dab.max_abs_diff(&dba) == 0.0);
        }

        #[test]
        fn prop_trace_factorization(seed in 0u64..200) {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let a = random_cmatrix(&mut rng, SystemDims::single("a", 2));
            let b = random_cmatrix(&mut rng, SystemDims::single("b", 3));
            let ab = tensor(&a, &b).unwrap();
            let red = partial_trace(&ab, &[lbl("b")]).unwrap();
            prop_assert!(red.max_abs_diff(&a.scale(b.trace())) < 1e-12);
        }
    }
}
