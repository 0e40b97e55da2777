//! Cost functions on the circle and the Toeplitz cost matrices they induce.
//!
//! A cost function is a 2*pi-periodic, bounded-below penalty `C(phi)` on the
//! deviation of a phase estimate from the true phase. Its Fourier
//! coefficients `c_k = \int_0^{2pi} dphi/2pi C(phi) e^{i k phi}` populate the
//! M x M Toeplitz cost matrix `Y_{nm} = c_{n-m}`, whose smallest eigenvalue
//! is the unconstrained optimum and whose diagonal `c_0` is the cost of
//! guessing from the uniform prior alone.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{eig_hermitian, CMatrix, SystemDims, C_ZERO};

pub const TWO_PI: f64 = 2.0 * PI;

/// Default number of uniform quadrature nodes.
pub const DEFAULT_QUADRATURE_ORDER: usize = 4096;

/// Number of grid points used to estimate the minimum of a cost function.
const SHIFT_GRID: usize = 4096;

type Evaluator = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Kind {
    /// Finite Fourier series; `coeffs[K + k]` holds `c_k` for `-K <= k <= K`.
    Fourier { coeffs: Vec<Complex64> },
    /// Black-box evaluator integrated on a uniform grid.
    Sampled { eval: Evaluator, order: usize },
    Holevo,
    Window { half_width: f64 },
    PeriodizedMse,
    Constant { value: f64 },
}

impl fmt::Debug for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kind::Fourier { coeffs } => write!(f, "Fourier({} coefficients)", coeffs.len()),
            Kind::Sampled { order, .. } => write!(f, "Sampled(order {order})"),
            Kind::Holevo => write!(f, "Holevo"),
            Kind::Window { half_width } => write!(f, "Window({half_width})"),
            Kind::PeriodizedMse => write!(f, "PeriodizedMse"),
            Kind::Constant { value } => write!(f, "Constant({value})"),
        }
    }
}

/// A 2*pi-periodic penalty with retrievable Fourier coefficients.
///
/// Construction shifts the function by `-min C` (grid estimate) when it dips
/// below zero, so the stored function is always non-negative; `shift()`
/// reports the offset and `eval_raw` the unshifted values.
#[derive(Clone, Debug)]
pub struct CostFunction {
    kind: Kind,
    shift: f64,
}

impl CostFunction {
    /// Periodized variance `4 sin^2(phi/2)`.
    pub fn holevo() -> Self {
        CostFunction { kind: Kind::Holevo, shift: 0.0 }
    }

    /// Zero penalty inside `|phi| < half_width` (mod 2*pi), one outside.
    pub fn window(half_width: f64) -> Result<Self> {
        if !(half_width > 0.0 && half_width < PI) {
            return Err(Error::BadCost(format!(
                "window half-width must lie in (0, pi), got {half_width}"
            )));
        }
        Ok(CostFunction { kind: Kind::Window { half_width }, shift: 0.0 })
    }

    /// Squared deviation after wrapping to [-pi, pi).
    pub fn periodized_mse() -> Self {
        CostFunction { kind: Kind::PeriodizedMse, shift: 0.0 }
    }

    pub fn constant(value: f64) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::BadCost("constant cost must be finite".into()));
        }
        let shift = (-value).max(0.0);
        Ok(CostFunction { kind: Kind::Constant { value }, shift })
    }

    /// Finite Fourier series from coefficients `c_{-K}..c_K`.
    ///
    /// The list must have odd length and satisfy `c_{-k} = conj(c_k)` to
    /// 1e-12 so the function is real-valued.
    pub fn fourier_series(coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.is_empty() || coeffs.len() % 2 == 0 {
            return Err(Error::BadCost(
                "fourier series needs an odd-length coefficient list c_{-K}..c_K".into(),
            ));
        }
        let k_max = coeffs.len() / 2;
        for k in 0..=k_max {
            let diff = (coeffs[k_max - k] - coeffs[k_max + k].conj()).norm();
            if diff > 1e-12 {
                return Err(Error::BadCost(format!(
                    "c_-{k} must equal conj(c_{k}) for a real-valued cost (deviation {diff:.2e})"
                )));
            }
        }
        let mut cf = CostFunction { kind: Kind::Fourier { coeffs }, shift: 0.0 };
        cf.shift = cf.grid_shift();
        Ok(cf)
    }

    /// Black-box 2*pi-periodic evaluator with a uniform quadrature order.
    pub fn sampled(
        eval: impl Fn(f64) -> f64 + Send + Sync + 'static,
        order: usize,
    ) -> Result<Self> {
        if order < 16 {
            return Err(Error::BadCost("quadrature order must be at least 16".into()));
        }
        let mut cf =
            CostFunction { kind: Kind::Sampled { eval: Arc::new(eval), order }, shift: 0.0 };
        cf.shift = cf.grid_shift();
        Ok(cf)
    }

    fn grid_shift(&self) -> f64 {
        let mut min = f64::INFINITY;
        for j in 0..SHIFT_GRID {
            let phi = TWO_PI * j as f64 / SHIFT_GRID as f64;
            min = min.min(self.eval_raw(phi));
        }
        (-min).max(0.0)
    }

    /// Offset added to keep the function non-negative.
    pub fn shift(&self) -> f64 {
        self.shift
    }

    /// Unshifted value at `phi`.
    pub fn eval_raw(&self, phi: f64) -> f64 {
        match &self.kind {
            Kind::Fourier { coeffs } => {
                let k_max = coeffs.len() as i64 / 2;
                let mut acc = C_ZERO;
                for (idx, c) in coeffs.iter().enumerate() {
                    let k = idx as i64 - k_max;
                    acc += c * Complex64::from_polar(1.0, -(k as f64) * phi);
                }
                acc.re
            }
            Kind::Sampled { eval, .. } => eval(phi),
            Kind::Holevo => 4.0 * (phi / 2.0).sin().powi(2),
            Kind::Window { half_width } => {
                if wrap_to_pi(phi).abs() < *half_width {
                    0.0
                } else {
                    1.0
                }
            }
            Kind::PeriodizedMse => wrap_to_pi(phi).powi(2),
            Kind::Constant { value } => *value,
        }
    }

    /// Shifted (non-negative) value at `phi`.
    pub fn eval(&self, phi: f64) -> f64 {
        self.eval_raw(phi) + self.shift
    }

    /// Largest retrievable |k| for this cost, if limited.
    pub fn bandwidth(&self) -> Option<i64> {
        match &self.kind {
            Kind::Sampled { order, .. } => Some(*order as i64 / 2),
            _ => None,
        }
    }

    /// Fourier coefficient `c_k` of the shifted function.
    pub fn fourier_coefficient(&self, k: i64) -> Result<Complex64> {
        let raw = match &self.kind {
            Kind::Fourier { coeffs } => {
                let k_max = coeffs.len() as i64 / 2;
                if k.abs() > k_max {
                    C_ZERO
                } else {
                    coeffs[(k + k_max) as usize]
                }
            }
            Kind::Sampled { eval, order } => {
                if k.abs() > *order as i64 / 2 {
                    return Err(Error::BadCost(format!(
                        "coefficient k={k} exceeds the resolvable bandwidth {} of the \
                         sampled cost",
                        order / 2
                    )));
                }
                quadrature_coefficient(eval.as_ref(), k, *order)
            }
            Kind::Holevo => match k {
                0 => Complex64::new(2.0, 0.0),
                1 | -1 => Complex64::new(-1.0, 0.0),
                _ => C_ZERO,
            },
            Kind::Window { half_width } => {
                if k == 0 {
                    Complex64::new(1.0 - half_width / PI, 0.0)
                } else {
                    let kf = k as f64;
                    Complex64::new(-(kf * half_width).sin() / (kf * PI), 0.0)
                }
            }
            Kind::PeriodizedMse => {
                if k == 0 {
                    Complex64::new(PI * PI / 3.0, 0.0)
                } else {
                    let kf = k as f64;
                    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                    Complex64::new(2.0 * sign / (kf * kf), 0.0)
                }
            }
            Kind::Constant { value } => {
                if k == 0 {
                    Complex64::new(*value, 0.0)
                } else {
                    C_ZERO
                }
            }
        };
        Ok(if k == 0 { raw + self.shift } else { raw })
    }

    /// `c_0`: the average cost of guessing from the uniform prior.
    pub fn c_zero(&self) -> f64 {
        self.fourier_coefficient(0)
            .expect("k = 0 is always within bandwidth")
            .re
    }

    /// Build the M x M Toeplitz cost matrix together with its cached
    /// spectral data.
    pub fn cost_matrix(&self, m: usize) -> Result<CostMatrix> {
        CostMatrix::new(self, m)
    }

    pub fn to_json(&self) -> CostJson {
        match &self.kind {
            Kind::Holevo => CostJson { kind: "holevo".into(), params: vec![], coefficients: None },
            Kind::Window { half_width } => CostJson {
                kind: "window".into(),
                params: vec![*half_width],
                coefficients: None,
            },
            Kind::PeriodizedMse => {
                CostJson { kind: "periodized-mse".into(), params: vec![], coefficients: None }
            }
            Kind::Constant { value } => {
                CostJson { kind: "constant".into(), params: vec![*value], coefficients: None }
            }
            Kind::Fourier { coeffs } => CostJson {
                kind: "fourier-series".into(),
                params: vec![],
                coefficients: Some(coeffs.iter().map(|c| (c.re, c.im)).collect()),
            },
            Kind::Sampled { order, .. } => {
                // A black-box evaluator round-trips through its resolvable
                // Fourier coefficients, capped at a practical bandwidth.
                let k_max = (*order as i64 / 2).min(128);
                let coeffs = (-k_max..=k_max)
                    .map(|k| {
                        let c = self.fourier_coefficient(k).expect("within bandwidth");
                        (c.re, c.im)
                    })
                    .collect();
                CostJson {
                    kind: "fourier-series".into(),
                    params: vec![],
                    coefficients: Some(coeffs),
                }
            }
        }
    }

    pub fn from_json(json: &CostJson) -> Result<Self> {
        match json.kind.as_str() {
            "holevo" => Ok(CostFunction::holevo()),
            "window" => {
                let w = *json
                    .params
                    .first()
                    .ok_or_else(|| Error::BadCost("window needs a half-width parameter".into()))?;
                CostFunction::window(w)
            }
            "periodized-mse" => Ok(CostFunction::periodized_mse()),
            "constant" => {
                let v = *json
                    .params
                    .first()
                    .ok_or_else(|| Error::BadCost("constant needs a value parameter".into()))?;
                CostFunction::constant(v)
            }
            "fourier-series" => {
                let coeffs = json
                    .coefficients
                    .as_ref()
                    .ok_or_else(|| Error::BadCost("fourier-series needs coefficients".into()))?
                    .iter()
                    .map(|(re, im)| Complex64::new(*re, *im))
                    .collect();
                CostFunction::fourier_series(coeffs)
            }
            other => Err(Error::BadCost(format!("unknown cost kind `{other}`"))),
        }
    }

    /// Parse a compact command-line spec: `holevo`, `window:<half-width>`,
    /// `periodized-mse`, `constant:<value>`, or a path to a JSON file.
    pub fn parse_spec(spec: &str) -> Result<Self> {
        let (name, arg) = match spec.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (spec, None),
        };
        let num = |a: Option<&str>| -> Result<f64> {
            a.ok_or_else(|| Error::BadCost(format!("`{name}` needs a numeric parameter")))?
                .parse::<f64>()
                .map_err(|e| Error::BadCost(format!("bad parameter for `{name}`: {e}")))
        };
        match name {
            "holevo" => Ok(CostFunction::holevo()),
            "window" => CostFunction::window(num(arg)?),
            "periodized-mse" | "mse" => Ok(CostFunction::periodized_mse()),
            "constant" => CostFunction::constant(num(arg)?),
            _ => {
                let text = std::fs::read_to_string(spec)
                    .map_err(|e| Error::BadCost(format!("cannot read cost spec `{spec}`: {e}")))?;
                let json: CostJson = serde_json::from_str(&text)?;
                CostFunction::from_json(&json)
            }
        }
    }
}

/// JSON form of a cost function: `{kind, params, coefficients?}`.
#[derive(Serialize, Deserialize, Debug, Clone)]
pub struct CostJson {
    pub kind: String,
    #[serde(default)]
    pub params: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Vec<(f64, f64)>>,
}

/// Uniform-grid quadrature of `\int dphi/2pi f(phi) e^{i k phi}`.
///
/// Exact for integrands that are band-limited below the grid's Nyquist
/// frequency.
pub fn quadrature_coefficient(f: &dyn Fn(f64) -> f64, k: i64, points: usize) -> Complex64 {
    let mut acc = C_ZERO;
    for j in 0..points {
        let phi = TWO_PI * j as f64 / points as f64;
        acc += Complex64::from_polar(f(phi), k as f64 * phi);
    }
    acc / points as f64
}

fn wrap_to_pi(phi: f64) -> f64 {
    let mut w = phi % TWO_PI;
    if w >= PI {
        w -= TWO_PI;
    } else if w < -PI {
        w += TWO_PI;
    }
    w
}

/// The Toeplitz cost matrix `Y_{nm} = c_{n-m}` with cached spectral data.
#[derive(Clone, Debug)]
pub struct CostMatrix {
    m: usize,
    matrix: CMatrix,
    c0: f64,
    lambda_min: f64,
    nu: Vec<Complex64>,
}

impl CostMatrix {
    fn new(cost: &CostFunction, m: usize) -> Result<Self> {
        if m < 1 {
            return Err(Error::BadArgument("cost matrix dimension must be >= 1".into()));
        }
        if let Some(bw) = cost.bandwidth() {
            if (m as i64 - 1) > bw {
                return Err(Error::BadCost(format!(
                    "cost matrix of dimension {m} needs coefficients beyond the sampled \
                     bandwidth {bw}"
                )));
            }
        }
        let mut coeffs = Vec::with_capacity(2 * m - 1);
        for k in -(m as i64 - 1)..=(m as i64 - 1) {
            coeffs.push(cost.fourier_coefficient(k)?);
        }
        let dims = SystemDims::single("est", m);
        let matrix = CMatrix::from_fn(dims, |r, c| {
            coeffs[(r as i64 - c as i64 + m as i64 - 1) as usize]
        });
        let c0 = cost.c_zero();
        let (vals, vecs) = eig_hermitian(&matrix)?;
        Ok(CostMatrix { m, matrix, c0, lambda_min: vals[0], nu: vecs[0].clone() })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// The matrix on a system labeled `est`.
    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// The same matrix relabeled onto `label`.
    pub fn matrix_on(&self, label: impl Into<crate::tensor::Label>) -> CMatrix {
        let dims = SystemDims::single(label, self.m);
        CMatrix::from_data(dims, self.matrix.data().to_vec()).expect("same size")
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }

    pub fn lambda_min(&self) -> f64 {
        self.lambda_min
    }

    /// Eigenvector for the smallest eigenvalue.
    pub fn nu(&self) -> &[Complex64] {
        &self.nu
    }

    /// Max deviation from the Toeplitz pattern (should be exactly zero).
    pub fn toeplitz_error(&self) -> f64 {
        let mut e = 0.0f64;
        for r in 1..self.m {
            for c in 1..self.m {
                e = e.max((self.matrix.at(r, c) - self.matrix.at(r - 1, c - 1)).norm());
            }
        }
        e
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent oracle: composite Gauss-Legendre integration of
    /// `C(phi) e^{i k phi}` between explicit breakpoints, accurate to near
    /// machine precision for piecewise-smooth costs.
    fn gl_coefficient(f: &dyn Fn(f64) -> f64, k: i64, breaks: &[f64]) -> Complex64 {
        let n = 32usize;
        let mut nodes = vec![0.0f64; n];
        let mut weights = vec![0.0f64; n];
        for i in 0..n {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            loop {
                let (mut p0, mut p1) = (1.0f64, 0.0f64);
                for j in 0..n {
                    let p2 = p1;
                    p1 = p0;
                    p0 = ((2 * j + 1) as f64 * x * p1 - j as f64 * p2) / (j as f64 + 1.0);
                }
                let dp = n as f64 * (x * p0 - p1) / (x * x - 1.0);
                let dx = p0 / dp;
                x -= dx;
                if dx.abs() < 1e-15 {
                    let dpf = n as f64 * (x * p0 - p1) / (x * x - 1.0);
                    nodes[i] = x;
                    weights[i] = 2.0 / ((1.0 - x * x) * dpf * dpf);
                    break;
                }
            }
        }
        let mut acc = C_ZERO;
        for w in breaks.windows(2) {
            let (a, b) = (w[0], w[1]);
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            for i in 0..n {
                let phi = mid + half * nodes[i];
                acc += Complex64::from_polar(f(phi) * weights[i] * half, k as f64 * phi);
            }
        }
        acc / TWO_PI
    }

    #[test]
    fn holevo_coefficients_match_quadrature() {
        let cost = CostFunction::holevo();
        for k in -4i64..=4 {
            let quad = quadrature_coefficient(&|p| 4.0 * (p / 2.0).sin().powi(2), k, 4096);
            let closed = cost.fourier_coefficient(k).unwrap();
            assert!(
                (quad - closed).norm() < 1e-10,
                "holevo c_{k}: quadrature {quad} vs closed {closed}"
            );
        }
        assert!((cost.fourier_coefficient(0).unwrap().re - 2.0).abs() < 1e-12);
        assert!((cost.fourier_coefficient(1).unwrap().re + 1.0).abs() < 1e-12);
        assert!(cost.fourier_coefficient(2).unwrap().norm() < 1e-12);
    }

    #[test]
    fn window_coefficients_match_piecewise_oracle() {
        for delta in [0.5f64, PI / 2.0, 2.5] {
            let cost = CostFunction::window(delta).unwrap();
            let f = move |phi: f64| if wrap_to_pi(phi).abs() < delta { 0.0 } else { 1.0 };
            // integrate over the smooth pieces only
            let breaks = [delta, TWO_PI - delta];
            for k in -6i64..=6 {
                let oracle = gl_coefficient(&f, k, &breaks);
                let closed = cost.fourier_coefficient(k).unwrap();
                assert!(
                    (oracle - closed).norm() < 1e-10,
                    "window({delta}) c_{k}: oracle {oracle} vs closed {closed}"
                );
            }
        }
    }

    #[test]
    fn periodized_mse_coefficients_match_piecewise_oracle() {
        let cost = CostFunction::periodized_mse();
        let f = |phi: f64| wrap_to_pi(phi).powi(2);
        let breaks = [0.0, PI, TWO_PI];
        for k in -6i64..=6 {
            let oracle = gl_coefficient(&f, k, &breaks);
            let closed = cost.fourier_coefficient(k).unwrap();
            assert!((oracle - closed).norm() < 1e-11, "mse c_{k}");
        }
    }

    #[test]
    fn window_c_zero() {
        let cost = CostFunction::window(PI / 2.0).unwrap();
        assert!((cost.c_zero() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn holevo_cost_matrix_m2() {
        let y = CostFunction::holevo().cost_matrix(2).unwrap();
        assert!((y.matrix().at(0, 0).re - 2.0).abs() < 1e-12);
        assert!((y.matrix().at(0, 1).re + 1.0).abs() < 1e-12);
        assert!((y.matrix().at(1, 0).re + 1.0).abs() < 1e-12);
        assert!((y.lambda_min() - 1.0).abs() < 1e-10);
        assert!((y.c0() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn holevo_lambda_min_closed_form() {
        for m in 2..=12usize {
            let y = CostFunction::holevo().cost_matrix(m).unwrap();
            let expect = 4.0 * (PI / (2.0 * (m as f64 + 1.0))).sin().powi(2);
            assert!(
                (y.lambda_min() - expect).abs() < 1e-9,
                "lambda_min at M={m}: {} vs {}",
                y.lambda_min(),
                expect
            );
            // sine-profile eigenvector, up to phase and normalization
            let mut s: Vec<Complex64> = (0..m)
                .map(|j| Complex64::new((PI * (j as f64 + 1.0) / (m as f64 + 1.0)).sin(), 0.0))
                .collect();
            let norm = s.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            for z in &mut s {
                *z /= norm;
            }
            let overlap: Complex64 = s.iter().zip(y.nu()).map(|(a, b)| a.conj() * b).sum();
            assert!(
                (1.0 - overlap.norm()).abs() < 1e-8,
                "eigenvector overlap at M={m}: {}",
                overlap.norm()
            );
        }
    }

    #[test]
    fn holevo_m5_lambda_min() {
        let y = CostFunction::holevo().cost_matrix(5).unwrap();
        let expect = 4.0 * (PI / 12.0).sin().powi(2);
        assert!((y.lambda_min() - expect).abs() < 1e-10);
        assert!((y.lambda_min() - 0.26795).abs() < 1e-4);
    }

    #[test]
    fn constant_cost_matrix_is_scaled_identity() {
        let y = CostFunction::constant(1.5).unwrap().cost_matrix(4).unwrap();
        for r in 0..4 {
            for c in 0..4 {
                let expect = if r == c { 1.5 } else { 0.0 };
                assert!((y.matrix().at(r, c).re - expect).abs() < 1e-12);
            }
        }
        assert!((y.lambda_min() - 1.5).abs() < 1e-10);
        assert!((y.c0() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn builtin_matrices_are_psd_hermitian_toeplitz() {
        let costs = [
            CostFunction::holevo(),
            CostFunction::window(1.0).unwrap(),
            CostFunction::periodized_mse(),
            CostFunction::constant(0.7).unwrap(),
        ];
        for cost in &costs {
            for m in [2usize, 5, 9, 16] {
                let y = cost.cost_matrix(m).unwrap();
                assert!(y.matrix().hermitian_error() < 1e-12);
                assert!(y.toeplitz_error() < 1e-12);
                assert!(y.lambda_min() > -1e-9, "Y must be PSD, got {}", y.lambda_min());
                for r in 0..m {
                    assert!((y.matrix().at(r, r).re - y.c0()).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn lambda_min_non_increasing_in_m() {
        let costs = [
            CostFunction::holevo(),
            CostFunction::window(1.0).unwrap(),
            CostFunction::periodized_mse(),
        ];
        for cost in &costs {
            let mut prev = f64::INFINITY;
            for m in 2..=12usize {
                let lm = cost.cost_matrix(m).unwrap().lambda_min();
                assert!(lm <= prev + 1e-10, "lambda_min must not increase with M");
                prev = lm;
            }
        }
    }

    #[test]
    fn dephased_cost_matrix_is_c0_identity() {
        // The diagonal of Y is the k = 0 coefficient; verified by quadrature.
        let cost = CostFunction::holevo();
        let y = cost.cost_matrix(6).unwrap();
        let d = crate::tensor::dephase(y.matrix(), &[crate::tensor::lbl("est")]).unwrap();
        let c0_quad = quadrature_coefficient(&|p| cost.eval(p), 0, 4096).re;
        for r in 0..6 {
            for c in 0..6 {
                let expect = if r == c { c0_quad } else { 0.0 };
                assert!((d.at(r, c).re - expect).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn sampled_cost_matches_holevo() {
        let sampled = CostFunction::sampled(|p| 4.0 * (p / 2.0).sin().powi(2), 1024).unwrap();
        for k in -3i64..=3 {
            let a = sampled.fourier_coefficient(k).unwrap();
            let b = CostFunction::holevo().fourier_coefficient(k).unwrap();
            assert!((a - b).norm() < 1e-10);
        }
        assert!(sampled.fourier_coefficient(513).is_err());
        assert!(sampled.cost_matrix(514).is_err());
    }

    #[test]
    fn negative_fourier_cost_is_shifted() {
        // C(phi) = 2 cos(phi) dips to -2; the stored function adds a +2 shift.
        let coeffs = vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
        ];
        let cost = CostFunction::fourier_series(coeffs).unwrap();
        assert!((cost.shift() - 2.0).abs() < 1e-6);
        let mut min = f64::INFINITY;
        for j in 0..512 {
            min = min.min(cost.eval(TWO_PI * j as f64 / 512.0));
        }
        assert!(min >= -1e-9);
        assert!((cost.c_zero() - cost.shift()).abs() < 1e-12);
    }

    #[test]
    fn fourier_series_rejects_asymmetric_coefficients() {
        let coeffs = vec![
            Complex64::new(0.5, 0.1),
            Complex64::new(1.0, 0.0),
            Complex64::new(0.5, 0.1), // should be (0.5, -0.1)
        ];
        assert!(CostFunction::fourier_series(coeffs).is_err());
    }

    #[test]
    fn json_round_trip() {
        let cost = CostFunction::window(1.2).unwrap();
        let json = serde_json::to_string(&cost.to_json()).unwrap();
        let parsed: CostJson = serde_json::from_str(&json).unwrap();
        let back = CostFunction::from_json(&parsed).unwrap();
        for k in -5i64..=5 {
            let a = cost.fourier_coefficient(k).unwrap();
            let b = back.fourier_coefficient(k).unwrap();
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn spec_strings_parse() {
        assert!(CostFunction::parse_spec("holevo").is_ok());
        assert!(CostFunction::parse_spec("window:1.5708").is_ok());
        assert!(CostFunction::parse_spec("constant:1").is_ok());
        assert!(CostFunction::parse_spec("periodized-mse").is_ok());
        assert!(CostFunction::parse_spec("no-such-cost").is_err());
    }
}
