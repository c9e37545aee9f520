use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::C64;
use crate::error::{Error, Result};
use crate::hermite;

/// Default photon-number cutoff; dimensions are `N_TRUNC + 1`.
pub const DEFAULT_N_TRUNC: usize = 30;
pub const LEAKAGE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct FockVector {
    amplitudes: Vec<C64>,
}

impl FockVector {
    pub fn new(amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::InvalidParameter("empty Fock vector".into()));
        }
        let v = Self { amplitudes };
        if v.norm_sqr() > 1.0 + 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "Fock vector norm^2 {} exceeds 1",
                v.norm_sqr()
            )));
        }
        Ok(v)
    }

    pub fn vacuum(n_trunc: usize) -> Self {
        Self::number(0, n_trunc)
    }

    pub fn number(n: usize, n_trunc: usize) -> Self {
        let mut amplitudes = vec![C64::new(0.0, 0.0); n_trunc + 1];
        amplitudes[n] = C64::new(1.0, 0.0);
        Self { amplitudes }
    }

    pub fn n_trunc(&self) -> usize {
        self.amplitudes.len() - 1
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|c| c.norm_sqr()).sum()
    }

    /// `|self> (x) |0>`, the form a single mode enters a beamsplitter in.
    pub fn with_vacuum_ancilla(&self) -> TwoModeState {
        TwoModeState::product(self, &FockVector::vacuum(self.n_trunc()))
    }

    pub fn to_density(&self) -> DensityMatrix {
        let v = nalgebra::DVector::from_column_slice(&self.amplitudes);
        DensityMatrix::from_matrix_unchecked(&v * v.adjoint())
    }
}

/// Pure two-mode amplitudes indexed `(n_first, n_second)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoModeState {
    amplitudes: DMatrix<C64>,
}

impl TwoModeState {
    pub fn from_matrix(amplitudes: DMatrix<C64>) -> Result<Self> {
        if !amplitudes.is_square() {
            return Err(Error::DimensionMismatch(
                amplitudes.nrows(),
                amplitudes.ncols(),
            ));
        }
        let s = Self { amplitudes };
        if s.norm_sqr() > 1.0 + 1e-12 {
            return Err(Error::InvalidParameter("two-mode norm exceeds 1".into()));
        }
        Ok(s)
    }

    pub(crate) fn from_matrix_unchecked(amplitudes: DMatrix<C64>) -> Self {
        Self { amplitudes }
    }

    pub fn product(first: &FockVector, second: &FockVector) -> Self {
        let a = nalgebra::DVector::from_column_slice(first.amplitudes());
        let b = nalgebra::DVector::from_column_slice(second.amplitudes());
        Self {
            amplitudes: &a * b.transpose(),
        }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.nrows()
    }

    pub fn amplitude(&self, first: usize, second: usize) -> C64 {
        self.amplitudes[(first, second)]
    }

    pub fn amplitudes(&self) -> &DMatrix<C64> {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|c| c.norm_sqr()).sum()
    }
}

/// Single-mode density matrix `rho[(m, n)] = <m|rho|n>` in the unit-vacuum-
/// variance quadrature convention.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    elements: DMatrix<C64>,
}

const CONVENTION: &str = "x-var-1";

#[derive(Serialize, Deserialize)]
struct DensityJson {
    dim: usize,
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
    convention: String,
}

impl DensityMatrix {
    /// Accepts any square matrix that is Hermitian to 1e-12 (relative to its
    /// largest entry). Trace and positivity are not enforced here; use
    /// [`DensityMatrix::is_physical`] where they matter.
    pub fn from_matrix(elements: DMatrix<C64>) -> Result<Self> {
        if !elements.is_square() {
            return Err(Error::DimensionMismatch(elements.nrows(), elements.ncols()));
        }
        let rho = Self { elements };
        let scale = rho.elements.iter().map(|c| c.norm()).fold(1.0, f64::max);
        if rho.hermiticity_defect() > 1e-12 * scale {
            return Err(Error::InvalidParameter(
                "density matrix is not Hermitian".into(),
            ));
        }
        Ok(rho)
    }

    pub(crate) fn from_matrix_unchecked(elements: DMatrix<C64>) -> Self {
        Self { elements }
    }

    pub fn vacuum(dim: usize) -> Self {
        Self::fock(0, dim)
    }

    pub fn fock(n: usize, dim: usize) -> Self {
        let mut m = DMatrix::zeros(dim, dim);
        m[(n, n)] = C64::new(1.0, 0.0);
        Self { elements: m }
    }

    pub fn from_diagonal(p: &[f64]) -> Self {
        let m = DMatrix::from_fn(p.len(), p.len(), |i, j| {
            if i == j {
                C64::new(p[i], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        Self { elements: m }
    }

    pub fn dim(&self) -> usize {
        self.elements.nrows()
    }

    pub fn elements(&self) -> &DMatrix<C64> {
        &self.elements
    }

    pub fn get(&self, m: usize, n: usize) -> C64 {
        self.elements[(m, n)]
    }

    pub fn trace(&self) -> f64 {
        self.elements.diagonal().iter().map(|c| c.re).sum()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        let d = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in i..d {
                worst = worst.max((self.elements[(i, j)] - self.elements[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self
            .elements
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }

    pub fn is_physical(&self, tol: f64) -> bool {
        (self.trace() - 1.0).abs() <= tol
            && self.hermiticity_defect() <= 1e-12
            && self.eigenvalues().first().is_none_or(|&l| l >= -tol)
    }

    pub fn normalized(&self) -> Result<Self> {
        let t = self.trace();
        if t.abs() < 1e-14 {
            return Err(Error::ZeroNormalization {
                context: "density matrix trace",
                value: t,
            });
        }
        Ok(Self {
            elements: self.elements.map(|c| c / t),
        })
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            elements: self.elements.map(|c| c * factor),
        }
    }

    /// Phase rotation `exp(-i a n) rho exp(i a n)`.
    pub fn rotated(&self, angle: f64) -> Self {
        let d = self.dim();
        let m = DMatrix::from_fn(d, d, |i, j| {
            self.elements[(i, j)] * C64::from_polar(1.0, -angle * (i as f64 - j as f64))
        });
        Self { elements: m }
    }

    /// Embeds into a larger space or truncates to `dim`.
    pub fn resized(&self, dim: usize) -> Self {
        let d = self.dim().min(dim);
        let mut m = DMatrix::zeros(dim, dim);
        m.view_mut((0, 0), (d, d))
            .copy_from(&self.elements.view((0, 0), (d, d)));
        Self { elements: m }
    }

    pub fn expectation(&self, op: &DMatrix<C64>) -> C64 {
        (&self.elements * op).trace()
    }

    pub fn purity(&self) -> f64 {
        (&self.elements * &self.elements).trace().re
    }

    pub fn to_json(&self) -> serde_json::Value {
        let d = self.dim();
        let re = (0..d)
            .map(|i| (0..d).map(|j| self.elements[(i, j)].re).collect())
            .collect();
        let im = (0..d)
            .map(|i| (0..d).map(|j| self.elements[(i, j)].im).collect())
            .collect();
        serde_json::to_value(DensityJson {
            dim: d,
            re,
            im,
            convention: CONVENTION.into(),
        })
        .expect("density matrix serializes")
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let doc: DensityJson = serde_json::from_value(value.clone())?;
        if doc.convention != CONVENTION {
            return Err(Error::Format(format!(
                "unsupported convention {:?}",
                doc.convention
            )));
        }
        let rows_ok = doc.re.len() == doc.dim
            && doc.im.len() == doc.dim
            && doc
                .re
                .iter()
                .chain(doc.im.iter())
                .all(|r| r.len() == doc.dim);
        if !rows_ok {
            return Err(Error::Format("density matrix rows do not match dim".into()));
        }
        let m = DMatrix::from_fn(doc.dim, doc.dim, |i, j| {
            C64::new(doc.re[i][j], doc.im[i][j])
        });
        Self::from_matrix(m)
    }
}

/// Upper bound on the probability a squeezed vacuum places above `n_trunc`.
///
/// Successive even-photon probabilities shrink by a factor below `tanh^2 r`,
/// so the tail is bounded by its first term over `1 - tanh^2 r`.
pub fn squeezed_leakage(r: f64, n_trunc: usize) -> f64 {
    let t = r.tanh().powi(2);
    if t == 0.0 {
        return 0.0;
    }
    let k = n_trunc / 2 + 1;
    // p_k = t^k (2k)! / (4^k k!^2) / cosh r
    let mut p = 1.0 / r.cosh();
    for j in 0..k {
        p *= t * (2 * j + 1) as f64 / (2 * j + 2) as f64;
    }
    p / (1.0 - t)
}

/// Squeezed vacuum with the `theta = 0` quadrature squeezed to variance
/// `exp(-2r)`. For small `r` the leading terms are `|0> - (tanh r / sqrt 2) |2>`.
pub fn squeezed_vacuum(r: f64, n_trunc: usize) -> Result<FockVector> {
    if !(r >= 0.0) || !r.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "squeezing r = {r} must be >= 0"
        )));
    }
    if n_trunc < 2 {
        return Err(Error::InvalidParameter("n_trunc must be >= 2".into()));
    }
    let leakage = squeezed_leakage(r, n_trunc);
    if leakage > LEAKAGE_TOLERANCE {
        return Err(Error::TruncationLeakage {
            leakage,
            tolerance: LEAKAGE_TOLERANCE,
        });
    }
    let t = -r.tanh();
    let mut amplitudes = vec![C64::new(0.0, 0.0); n_trunc + 1];
    let mut c = 1.0 / r.cosh().sqrt();
    for k in 0..=n_trunc / 2 {
        amplitudes[2 * k] = C64::new(c, 0.0);
        // c_{2k+2} / c_{2k} = t sqrt((2k+1)(2k+2)) / (2(k+1))
        c *= t * (((2 * k + 1) * (2 * k + 2)) as f64).sqrt() / (2 * (k + 1)) as f64;
    }
    Ok(FockVector { amplitudes })
}

/// Truncated matrix of `X^phi = a e^{-i phi} + a^dag e^{i phi}`.
pub fn quadrature_operator(dim: usize, phi: f64) -> DMatrix<C64> {
    let mut m = DMatrix::zeros(dim, dim);
    for n in 0..dim.saturating_sub(1) {
        let s = ((n + 1) as f64).sqrt();
        m[(n + 1, n)] = C64::from_polar(s, phi);
        m[(n, n + 1)] = C64::from_polar(s, -phi);
    }
    m
}

/// Quadrature distribution `<x_theta| rho |x_theta>` on the given points,
/// where `<n|x_theta> = exp(i theta n) psi_n(x)`.
pub fn quadrature_pdf(rho: &DensityMatrix, theta: f64, grid: &[f64]) -> Vec<f64> {
    let d = rho.dim();
    let phases: Vec<C64> = (0..d)
        .map(|n| C64::from_polar(1.0, theta * n as f64))
        .collect();
    let mut psi = vec![0.0; d];
    let mut v = vec![C64::new(0.0, 0.0); d];
    grid.iter()
        .map(|&x| {
            hermite::fill_wavefunctions(x, &mut psi);
            for n in 0..d {
                v[n] = phases[n] * psi[n];
            }
            let mut acc = C64::new(0.0, 0.0);
            for m in 0..d {
                let mut row = C64::new(0.0, 0.0);
                for n in 0..d {
                    row += rho.elements[(m, n)] * v[n];
                }
                acc += v[m].conj() * row;
            }
            acc.re
        })
        .collect()
}

/// Vacuum quadrature density `exp(-x^2/2) / sqrt(2 pi)`.
#[cfg(test)]
fn vacuum_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}
