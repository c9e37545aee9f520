//! Fock-basis pattern functions.
//!
//! `f_mn(x) = c_n d/dx[psi_m(x) phi_n(x)]` for `m >= n`, where `phi_n` is the
//! irregular solution of the oscillator equation at the same energy. Averaging
//! `f_mn(x) e^{i(m-n) theta}` over the quadrature distribution and a uniform
//! angle yields `<m|rho|n>`.

use std::io::Write;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fock::{DensityMatrix, C64};
use crate::hermite;

pub const DEFAULT_X_MAX: f64 = 10.0;
pub const DEFAULT_STEP: f64 = 0.005;
pub const DEFAULT_M: usize = 12;
pub const MAX_M: usize = 30;
pub const WRONSKIAN_TOLERANCE: f64 = 1e-6;

const RK_SUBSTEPS: usize = 4;

/// Regular and irregular oscillator solutions on a symmetric uniform grid.
#[derive(Debug, Clone)]
pub struct WavefunctionTable {
    m_max: usize,
    h: f64,
    half: usize,
    psi: Vec<Vec<f64>>,
    dpsi: Vec<Vec<f64>>,
    phi: Vec<Vec<f64>>,
    dphi: Vec<Vec<f64>>,
    wronskian_drift: Vec<f64>,
}

/// Outward RK4 integration of `y'' = (x^2/4 - e) y` from `x = 0`, sampled at
/// every grid point `i h`, `i = 0..=steps`.
fn integrate_irregular(e: f64, y0: f64, dy0: f64, h: f64, steps: usize) -> (Vec<f64>, Vec<f64>) {
    let accel = |x: f64, y: f64| (0.25 * x * x - e) * y;
    let dt = h / RK_SUBSTEPS as f64;
    let mut y = Vec::with_capacity(steps + 1);
    let mut dy = Vec::with_capacity(steps + 1);
    let (mut u, mut v) = (y0, dy0);
    y.push(u);
    dy.push(v);
    for i in 0..steps {
        for s in 0..RK_SUBSTEPS {
            let x = i as f64 * h + s as f64 * dt;
            let k1u = v;
            let k1v = accel(x, u);
            let k2u = v + 0.5 * dt * k1v;
            let k2v = accel(x + 0.5 * dt, u + 0.5 * dt * k1u);
            let k3u = v + 0.5 * dt * k2v;
            let k3v = accel(x + 0.5 * dt, u + 0.5 * dt * k2u);
            let k4u = v + dt * k3v;
            let k4v = accel(x + dt, u + dt * k3u);
            u += dt / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
            v += dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        }
        y.push(u);
        dy.push(v);
    }
    (y, dy)
}

pub fn build_wavefunctions(m_max: usize, x_max: f64, h: f64) -> Result<WavefunctionTable> {
    if m_max > MAX_M {
        return Err(Error::InvalidParameter(format!(
            "M = {m_max} exceeds {MAX_M}"
        )));
    }
    if !(x_max >= 8.0) || !(h > 0.0 && h <= 0.01) {
        return Err(Error::InvalidParameter(format!(
            "grid needs x_max >= 8 and 0 < h <= 0.01 (got {x_max}, {h})"
        )));
    }
    let half = (x_max / h).round() as usize;
    if ((half as f64) * h - x_max).abs() > 1e-9 * x_max {
        return Err(Error::InvalidParameter(format!(
            "x_max = {x_max} is not a multiple of h = {h}"
        )));
    }
    if x_max > hermite::MAX_ABS_X {
        return Err(Error::RecursionOverflow { n: m_max, x_max });
    }
    let points = 2 * half + 1;
    let mut psi = vec![vec![0.0; points]; m_max + 1];
    let mut dpsi = vec![vec![0.0; points]; m_max + 1];
    let mut buf = vec![0.0; m_max + 2];
    for i in 0..points {
        let x = (i as f64 - half as f64) * h;
        hermite::fill_wavefunctions(x, &mut buf);
        let d = hermite::derivatives_from(&buf, m_max);
        for n in 0..=m_max {
            psi[n][i] = buf[n];
            dpsi[n][i] = d[n];
        }
    }

    let mut phi = vec![vec![0.0; points]; m_max + 1];
    let mut dphi = vec![vec![0.0; points]; m_max + 1];
    let mut wronskian_drift = vec![0.0; m_max + 1];
    for n in 0..=m_max {
        let (p0, dp0) = (psi[n][half], dpsi[n][half]);
        // unit Wronskian, opposite parity to psi_n
        let (y0, dy0) = if n % 2 == 0 {
            (0.0, 1.0 / p0)
        } else {
            (-1.0 / dp0, 0.0)
        };
        let (y, dy) = integrate_irregular(n as f64 + 0.5, y0, dy0, h, half);
        if y.iter().chain(&dy).any(|v| !v.is_finite()) {
            return Err(Error::RecursionOverflow { n, x_max });
        }
        // phi_n has parity (-1)^(n+1), its derivative (-1)^n
        let odd = n % 2 == 0;
        for k in 0..=half {
            phi[n][half + k] = y[k];
            dphi[n][half + k] = dy[k];
            phi[n][half - k] = if odd { -y[k] } else { y[k] };
            dphi[n][half - k] = if odd { dy[k] } else { -dy[k] };
        }
        let w0 = p0 * dy0 - dp0 * y0;
        let drift = (half..points)
            .map(|i| ((psi[n][i] * dphi[n][i] - dpsi[n][i] * phi[n][i]) - w0).abs() / w0.abs())
            .fold(0.0, f64::max);
        if drift > WRONSKIAN_TOLERANCE {
            return Err(Error::WronskianDrift { n, drift });
        }
        wronskian_drift[n] = drift;
    }
    Ok(WavefunctionTable {
        m_max,
        h,
        half,
        psi,
        dpsi,
        phi,
        dphi,
        wronskian_drift,
    })
}

impl WavefunctionTable {
    pub fn m_max(&self) -> usize {
        self.m_max
    }

    pub fn step(&self) -> f64 {
        self.h
    }

    pub fn x_max(&self) -> f64 {
        self.half as f64 * self.h
    }

    pub fn len(&self) -> usize {
        2 * self.half + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn x(&self, i: usize) -> f64 {
        (i as f64 - self.half as f64) * self.h
    }

    pub fn grid(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.x(i)).collect()
    }

    pub fn psi(&self, n: usize) -> &[f64] {
        &self.psi[n]
    }

    pub fn psi_derivative(&self, n: usize) -> &[f64] {
        &self.dpsi[n]
    }

    pub fn irregular(&self, n: usize) -> &[f64] {
        &self.phi[n]
    }

    pub fn irregular_derivative(&self, n: usize) -> &[f64] {
        &self.dphi[n]
    }

    /// Relative deviation of `psi_n phi_n' - psi_n' phi_n` from its value at 0.
    pub fn wronskian_drift(&self, n: usize) -> f64 {
        self.wronskian_drift[n]
    }

    /// Trapezoid integral of a function sampled on the grid.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        let n = values.len();
        let inner: f64 = values[1..n - 1].iter().sum();
        self.h * (inner + 0.5 * (values[0] + values[n - 1]))
    }
}

fn tri(m: usize, n: usize) -> usize {
    let (hi, lo) = if m >= n { (m, n) } else { (n, m) };
    hi * (hi + 1) / 2 + lo
}

/// Radial parts `f_mn(x)` for `m, n <= M` on the wavefunction grid.
#[derive(Debug)]
pub struct PatternTable {
    m_max: usize,
    h: f64,
    half: usize,
    values: Vec<Vec<f64>>,
    normalization: Vec<f64>,
    clamped: AtomicU64,
}

impl Clone for PatternTable {
    fn clone(&self) -> Self {
        Self {
            m_max: self.m_max,
            h: self.h,
            half: self.half,
            values: self.values.clone(),
            normalization: self.normalization.clone(),
            clamped: AtomicU64::new(self.clamped.load(Ordering::Relaxed)),
        }
    }
}

impl PatternTable {
    /// The derivative of `psi_m phi_n` is taken analytically from the tabulated
    /// derivatives. The scale of each `phi_n` is then fixed by requiring
    /// `int f_nn psi_n^2 dx = 1`.
    pub fn build(w: &WavefunctionTable) -> Result<Self> {
        let m_max = w.m_max;
        let points = w.len();
        let raw = |m: usize, n: usize| -> Vec<f64> {
            (0..points)
                .map(|i| w.dpsi[m][i] * w.phi[n][i] + w.psi[m][i] * w.dphi[n][i])
                .collect()
        };
        let mut normalization = vec![0.0; m_max + 1];
        for n in 0..=m_max {
            let d = raw(n, n);
            let integrand: Vec<f64> = d.iter().zip(&w.psi[n]).map(|(f, p)| f * p * p).collect();
            let s = w.integrate(&integrand);
            if !(s.abs() > 1e-12) {
                return Err(Error::ZeroNormalization {
                    context: "pattern function sum rule",
                    value: s,
                });
            }
            normalization[n] = 1.0 / s;
        }
        let mut values = vec![Vec::new(); tri(m_max, m_max) + 1];
        for m in 0..=m_max {
            for n in 0..=m {
                let c = normalization[n];
                values[tri(m, n)] = raw(m, n).into_iter().map(|v| c * v).collect();
            }
        }
        Ok(Self {
            m_max,
            h: w.h,
            half: w.half,
            values,
            normalization,
            clamped: AtomicU64::new(0),
        })
    }

    pub fn with_defaults(m_max: usize) -> Result<Self> {
        Self::build(&build_wavefunctions(m_max, DEFAULT_X_MAX, DEFAULT_STEP)?)
    }

    pub fn m_max(&self) -> usize {
        self.m_max
    }

    pub fn x_max(&self) -> f64 {
        self.half as f64 * self.h
    }

    pub fn len(&self) -> usize {
        2 * self.half + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn x(&self, i: usize) -> f64 {
        (i as f64 - self.half as f64) * self.h
    }

    /// Scale applied to `d/dx[psi_m phi_n]`; two for a unit-Wronskian `phi_n`.
    pub fn normalization(&self, n: usize) -> f64 {
        self.normalization[n]
    }

    /// Samples of `f_mn` on the grid.
    pub fn samples(&self, m: usize, n: usize) -> &[f64] {
        &self.values[tri(m, n)]
    }

    /// Number of evaluations that fell outside the grid and were clamped.
    pub fn clamped_evaluations(&self) -> u64 {
        self.clamped.load(Ordering::Relaxed)
    }

    pub fn reset_clamp_counter(&self) {
        self.clamped.store(0, Ordering::Relaxed);
    }

    /// Index of the first of four stencil points and the Lagrange weights.
    #[inline]
    fn stencil(&self, x: f64) -> (usize, [f64; 4]) {
        let x_max = self.x_max();
        let x = if x.abs() > x_max {
            self.clamped.fetch_add(1, Ordering::Relaxed);
            x_max.copysign(x)
        } else {
            x
        };
        let u = (x + x_max) / self.h;
        let last = 2 * self.half;
        let i = (u.floor() as usize).clamp(1, last - 2);
        let t = u - i as f64;
        // points at offsets -1, 0, 1, 2 relative to i
        let w0 = -t * (t - 1.0) * (t - 2.0) / 6.0;
        let w1 = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
        let w2 = -(t + 1.0) * t * (t - 2.0) / 2.0;
        let w3 = (t + 1.0) * t * (t - 1.0) / 6.0;
        (i - 1, [w0, w1, w2, w3])
    }

    #[inline]
    fn interp(values: &[f64], start: usize, w: &[f64; 4]) -> f64 {
        values[start] * w[0]
            + values[start + 1] * w[1]
            + values[start + 2] * w[2]
            + values[start + 3] * w[3]
    }

    /// `f_mn(x)` by cubic interpolation.
    pub fn eval(&self, m: usize, n: usize, x: f64) -> f64 {
        let (s, w) = self.stencil(x);
        Self::interp(&self.values[tri(m, n)], s, &w)
    }

    /// `F_mn(x, phi) = f_mn(x) e^{i(m-n) phi}`.
    pub fn eval_full(&self, m: usize, n: usize, x: f64, phi: f64) -> C64 {
        C64::from_polar(1.0, (m as f64 - n as f64) * phi) * self.eval(m, n, x)
    }

    /// All `f_mn(x)` with `n <= m <= dim - 1`, in lower-triangle order
    /// (`index = m (m + 1) / 2 + n`).
    pub fn eval_lower(&self, x: f64, dim: usize, out: &mut [f64]) {
        let (s, w) = self.stencil(x);
        let count = dim * (dim + 1) / 2;
        for (k, o) in out[..count].iter_mut().enumerate() {
            *o = Self::interp(&self.values[k], s, &w);
        }
    }

    /// CSV with columns `x, f_m_n, ...` for the requested pairs.
    pub fn write_csv<W: Write>(
        &self,
        mut out: W,
        pairs: &[(usize, usize)],
        header: Option<&str>,
    ) -> Result<()> {
        if let Some(h) = header {
            writeln!(out, "{h}")?;
        }
        let names: Vec<String> = pairs.iter().map(|(m, n)| format!("f_{m}_{n}")).collect();
        writeln!(out, "x,{}", names.join(","))?;
        for i in 0..self.len() {
            let row: Vec<String> = pairs
                .iter()
                .map(|&(m, n)| format!("{:.12e}", self.samples(m, n)[i]))
                .collect();
            writeln!(out, "{:.4},{}", self.x(i), row.join(","))?;
        }
        Ok(())
    }
}

/// Lower-triangle index used by [`PatternTable::eval_lower`].
pub fn lower_index(m: usize, n: usize) -> usize {
    tri(m, n)
}

/// Conditioning operator on the ancilla: `matrix[(n, m)] = <n| pi |m>`.
#[derive(Debug, Clone)]
pub struct ConditionSpec {
    matrix: DMatrix<C64>,
    pr1: f64,
}

impl ConditionSpec {
    pub fn new(matrix: DMatrix<C64>, pr1: f64) -> Result<Self> {
        let rho = DensityMatrix::from_matrix(matrix.clone()).map_err(|_| {
            Error::InvalidParameter("conditioning operator must be Hermitian".into())
        })?;
        if rho.trace() > 1.0 + 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "conditioning operator trace {} exceeds 1",
                rho.trace()
            )));
        }
        if rho.eigenvalues()[0] < -1e-12 {
            return Err(Error::InvalidParameter(
                "conditioning operator is not positive semidefinite".into(),
            ));
        }
        if !pr1.is_finite() || pr1 == 0.0 {
            return Err(Error::ZeroNormalization {
                context: "conditioning success probability",
                value: pr1,
            });
        }
        Ok(Self { matrix, pr1 })
    }

    /// `|n><n|`.
    pub fn number(n: usize) -> Self {
        let mut m = DMatrix::zeros(n + 1, n + 1);
        m[(n, n)] = C64::new(1.0, 0.0);
        Self {
            matrix: m,
            pr1: 1.0,
        }
    }

    /// `|v><v|` for a normalized amplitude vector.
    pub fn superposition(amplitudes: &[C64]) -> Result<Self> {
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "superposition norm {norm} != 1"
            )));
        }
        let d = amplitudes.len();
        Self::new(
            DMatrix::from_fn(d, d, |i, j| amplitudes[i] * amplitudes[j].conj()),
            1.0,
        )
    }

    /// Coefficients `c` with the operator `sum c_mn |n><m|`.
    pub fn from_coefficients(c: &DMatrix<C64>, pr1: f64) -> Result<Self> {
        Self::new(c.transpose(), pr1)
    }

    /// Identity divided by its trace: every outcome is kept.
    pub fn uniform(dim: usize) -> Self {
        Self {
            matrix: DMatrix::identity(dim, dim).map(|v: C64| v / dim as f64),
            pr1: 1.0 / dim as f64,
        }
    }

    pub fn with_pr1(mut self, pr1: f64) -> Result<Self> {
        if !pr1.is_finite() || pr1 == 0.0 {
            return Err(Error::ZeroNormalization {
                context: "conditioning success probability",
                value: pr1,
            });
        }
        self.pr1 = pr1;
        Ok(self)
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn pr1(&self) -> f64 {
        self.pr1
    }
}

/// `w(x, phi) = (1/pr1) sum_{m,n} <n|pi|m> f_mn(x) e^{i(m-n) phi}`.
#[derive(Debug, Clone)]
pub struct ConditionWeight {
    table: Arc<PatternTable>,
    terms: Vec<(usize, usize, C64)>,
}

pub fn weight_function(spec: &ConditionSpec, table: Arc<PatternTable>) -> Result<ConditionWeight> {
    if spec.dim() > table.m_max() + 1 {
        return Err(Error::DimensionMismatch(spec.dim(), table.m_max() + 1));
    }
    if spec.pr1 == 0.0 {
        return Err(Error::ZeroNormalization {
            context: "conditioning success probability",
            value: 0.0,
        });
    }
    let mut terms = Vec::new();
    for n in 0..spec.dim() {
        for m in 0..spec.dim() {
            let c = spec.matrix[(n, m)];
            if c != C64::new(0.0, 0.0) {
                terms.push((m, n, c / spec.pr1));
            }
        }
    }
    Ok(ConditionWeight { table, terms })
}

impl ConditionWeight {
    pub fn eval_complex(&self, x: f64, phi: f64) -> C64 {
        let (s, w) = self.table.stencil(x);
        self.terms
            .iter()
            .map(|&(m, n, c)| {
                let f = PatternTable::interp(&self.table.values[tri(m, n)], s, &w);
                c * f * C64::from_polar(1.0, (m as f64 - n as f64) * phi)
            })
            .sum()
    }

    #[inline]
    pub fn eval(&self, x: f64, phi: f64) -> f64 {
        let (s, w) = self.table.stencil(x);
        let mut acc = 0.0;
        for &(m, n, c) in &self.terms {
            let f = PatternTable::interp(&self.table.values[tri(m, n)], s, &w);
            if m == n {
                acc += c.re * f;
            } else {
                let a = (m as f64 - n as f64) * phi;
                acc += f * (c.re * a.cos() - c.im * a.sin());
            }
        }
        acc
    }

    pub fn table(&self) -> &Arc<PatternTable> {
        &self.table
    }
}

/// Largest gap on `[-window, window]` between the polynomial weight and
/// `f_kk`, both scaled to one at the origin.
pub fn polynomial_pattern_gap(
    poly: &crate::conditioning::MomentPolynomial,
    k: usize,
    table: &PatternTable,
    window: f64,
    step: f64,
) -> Result<f64> {
    let p = poly.evaluator().normalized_at_zero()?;
    let f0 = table.eval(k, k, 0.0);
    if f0 == 0.0 {
        return Err(Error::ZeroNormalization {
            context: "pattern function at the origin",
            value: 0.0,
        });
    }
    let steps = (2.0 * window / step).round() as usize;
    Ok((0..=steps)
        .map(|i| {
            let x = -window + i as f64 * step;
            (p.eval(x) - table.eval(k, k, x) / f0).abs()
        })
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn small_table() -> (WavefunctionTable, PatternTable) {
        let w = build_wavefunctions(6, 10.0, 0.005).unwrap();
        let p = PatternTable::build(&w).unwrap();
        (w, p)
    }

    #[test]
    fn grid_values_and_parity() {
        let (w, p) = small_table();
        let mid = w.len() / 2;
        assert_eq!(w.x(mid), 0.0);
        assert_relative_eq!(w.psi(0)[mid], (2.0 * PI).powf(-0.25), epsilon = 1e-15);
        assert_eq!(w.psi(1)[mid], 0.0);
        for n in 0..=6 {
            assert!(w.wronskian_drift(n) < 1e-8);
            assert_relative_eq!(p.normalization(n), 2.0, epsilon = 1e-8);
        }
        for i in [100, 777, 1500] {
            let j = w.len() - 1 - i;
            assert_relative_eq!(w.irregular(3)[i], w.irregular(3)[j], epsilon = 1e-12);
            assert_relative_eq!(w.irregular(2)[i], -w.irregular(2)[j], epsilon = 1e-12);
        }
    }

    #[test]
    fn origin_values() {
        let (_, p) = small_table();
        assert_relative_eq!(p.eval(0, 0, 0.0), 2.0, epsilon = 1e-8);
        assert_relative_eq!(p.eval(1, 1, 0.0), -2.0, epsilon = 1e-8);
        assert_relative_eq!(p.eval(2, 2, 0.0), 2.0, epsilon = 1e-8);
        for n in 0..=6 {
            assert!(p.samples(n, n).iter().all(|v| v.abs() <= 10.0));
        }
    }

    #[test]
    fn symmetric_access_and_phase() {
        let (_, p) = small_table();
        assert_eq!(p.eval(4, 1, 0.37), p.eval(1, 4, 0.37));
        assert_eq!(p.eval_full(3, 3, 0.5, 0.0), p.eval_full(3, 3, 0.5, 1.9));
        let f = p.eval_full(3, 1, 0.5, PI / 4.0);
        assert_relative_eq!(f.re, 0.0, epsilon = 1e-15);
        assert_relative_eq!(f.im, p.eval(3, 1, 0.5), epsilon = 1e-15);
    }

    #[test]
    fn interpolation_and_clamping() {
        let (w, p) = small_table();
        let x = 0.3217;
        let psi = hermite::wavefunctions(x, 3);
        let dpsi = hermite::derivatives_from(&psi, 2);
        let i = ((x + 10.0) / 0.005).floor() as usize;
        let t = (x - w.x(i)) / 0.005;
        let phi = w.irregular(2)[i] * (1.0 - t) + w.irregular(2)[i + 1] * t;
        let dphi = w.irregular_derivative(2)[i] * (1.0 - t) + w.irregular_derivative(2)[i + 1] * t;
        assert_relative_eq!(
            p.eval(2, 2, x),
            2.0 * (dpsi[2] * phi + psi[2] * dphi),
            epsilon = 1e-4
        );
        p.reset_clamp_counter();
        assert_eq!(p.eval(1, 1, 12.0), p.eval(1, 1, 10.0));
        assert_eq!(p.clamped_evaluations(), 1);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(build_wavefunctions(31, 10.0, 0.005).is_err());
        assert!(build_wavefunctions(4, 6.0, 0.005).is_err());
        assert!(build_wavefunctions(4, 10.0, 0.02).is_err());
        assert!(matches!(
            build_wavefunctions(4, 60.0, 0.01),
            Err(Error::RecursionOverflow { .. })
        ));
    }

    #[test]
    fn condition_specs() {
        let table = Arc::new(PatternTable::with_defaults(4).unwrap());
        let w1 = weight_function(
            &ConditionSpec::number(1).with_pr1(0.5).unwrap(),
            table.clone(),
        )
        .unwrap();
        assert_relative_eq!(
            w1.eval(0.7, 0.0),
            2.0 * table.eval(1, 1, 0.7),
            epsilon = 1e-14
        );
        assert_eq!(w1.eval(0.7, 0.0), w1.eval(0.7, 2.3));

        let h = 0.5f64.sqrt();
        let s =
            ConditionSpec::superposition(&[C64::new(0.0, 0.0), C64::new(h, 0.0), C64::new(h, 0.0)])
                .unwrap();
        let ws = weight_function(&s, table.clone()).unwrap();
        for &(x, phi) in &[(0.4, 0.3), (-1.2, 2.0), (2.5, -0.7)] {
            let z = ws.eval_complex(x, phi);
            assert!(z.im.abs() < 1e-10);
            assert_relative_eq!(z.re, ws.eval(x, phi), epsilon = 1e-13);
            let expected =
                0.5 * (table.eval(1, 1, x) + table.eval(2, 2, x)) + table.eval(2, 1, x) * phi.cos();
            assert_relative_eq!(ws.eval(x, phi), expected, epsilon = 1e-13);
        }

        // both index conventions for the same coefficients
        let mut c = DMatrix::zeros(2, 2);
        c[(0, 1)] = C64::new(0.0, 0.5);
        c[(1, 0)] = C64::new(0.0, -0.5);
        c[(0, 0)] = C64::new(0.5, 0.0);
        c[(1, 1)] = C64::new(0.5, 0.0);
        let a = ConditionSpec::from_coefficients(&c, 1.0).unwrap();
        let b = ConditionSpec::new(c.clone(), 1.0).unwrap();
        assert_eq!(a.matrix(), &c.transpose());
        assert_ne!(a.matrix(), b.matrix());

        let mut neg = DMatrix::zeros(2, 2);
        neg[(0, 0)] = C64::new(-0.5, 0.0);
        assert!(ConditionSpec::new(neg, 1.0).is_err());
        assert!(ConditionSpec::number(1).with_pr1(0.0).is_err());
        assert!(weight_function(&ConditionSpec::number(5), table).is_err());
    }
}
