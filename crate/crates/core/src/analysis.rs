//! Phase-space and Fock-space figures of merit for reconstructed states.
//!
//! Wigner output coordinates are `alpha = x + i p` with `X = 2x`, so the
//! vacuum has variance 1/4 along both axes.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::fock::{DensityMatrix, C64};

pub const POPULATION_N_MAX: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub half_width: f64,
    pub points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            half_width: 4.0,
            points: 161,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.half_width > 0.0) || self.points < 2 {
            return Err(Error::InvalidParameter(format!("bad Wigner grid {self:?}")));
        }
        Ok(())
    }

    pub fn axis(&self) -> Vec<f64> {
        let step = 2.0 * self.half_width / (self.points - 1) as f64;
        (0..self.points)
            .map(|i| -self.half_width + i as f64 * step)
            .collect()
    }
}

/// `L_n^{(k)}(y)` for `n = 0..len`.
fn laguerre_sequence(k: usize, y: f64, len: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(len);
    if len == 0 {
        return out;
    }
    out.push(1.0);
    if len > 1 {
        out.push(1.0 + k as f64 - y);
    }
    for j in 1..len.saturating_sub(1) {
        let jf = j as f64;
        let next =
            ((2.0 * jf + 1.0 + k as f64 - y) * out[j] - (jf + k as f64) * out[j - 1]) / (jf + 1.0);
        out.push(next);
    }
    out
}

/// `W(alpha)` for a density matrix, from the closed-form Wigner function of
/// each `|m><n|`.
pub fn wigner_at(rho: &DensityMatrix, x: f64, p: f64) -> f64 {
    let dim = rho.dim();
    let alpha = C64::new(x, p);
    let r2 = alpha.norm_sqr();
    let y = 4.0 * r2;
    let gauss = (2.0 / PI) * (-2.0 * r2).exp();
    let mut acc = 0.0;
    for k in 0..dim {
        let len = dim - k;
        let lag = laguerre_sequence(k, y, len);
        let two_alpha_k = (2.0 * alpha).powu(k as u32);
        // sqrt(n!/(n+k)!) built incrementally
        let mut ratio = 1.0;
        for j in 1..=k {
            ratio /= (j as f64).sqrt();
        }
        for n in 0..len {
            let m = n + k;
            if n > 0 {
                ratio *= (n as f64 / m as f64).sqrt();
            }
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            let base = sign * ratio * lag[n];
            if k == 0 {
                acc += rho.get(n, n).re * base;
            } else {
                // rho_mn W_{|m><n|} + c.c.
                acc += 2.0 * (rho.get(m, n) * two_alpha_k.conj()).re * base;
            }
        }
    }
    gauss * acc
}

#[derive(Debug, Clone, PartialEq)]
pub struct WignerGrid {
    xs: Vec<f64>,
    ps: Vec<f64>,
    /// `values[i * ps.len() + j] = W(xs[i], ps[j])`
    values: Vec<f64>,
}

pub fn wigner_from_density(
    rho: &DensityMatrix,
    spec: &GridSpec,
    exec: Execution,
) -> Result<WignerGrid> {
    spec.validate()?;
    let xs = spec.axis();
    let ps = xs.clone();
    let rows = exec.map(&xs, |&x| {
        ps.iter().map(|&p| wigner_at(rho, x, p)).collect::<Vec<_>>()
    });
    Ok(WignerGrid {
        values: rows.into_iter().flatten().collect(),
        xs,
        ps,
    })
}

impl WignerGrid {
    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ps(&self) -> &[f64] {
        &self.ps
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.ps.len() + j]
    }

    fn dx(&self) -> f64 {
        self.xs[1] - self.xs[0]
    }

    fn dp(&self) -> f64 {
        self.ps[1] - self.ps[0]
    }

    /// Trapezoid weight of index `i` on an axis of length `n`.
    fn tw(i: usize, n: usize) -> f64 {
        if i == 0 || i == n - 1 {
            0.5
        } else {
            1.0
        }
    }

    pub fn integral(&self) -> f64 {
        let (nx, np) = (self.xs.len(), self.ps.len());
        let mut s = 0.0;
        for i in 0..nx {
            for j in 0..np {
                s += Self::tw(i, nx) * Self::tw(j, np) * self.value(i, j);
            }
        }
        s * self.dx() * self.dp()
    }

    /// `int W dp` at each `x`.
    pub fn marginal_x(&self) -> Vec<f64> {
        let np = self.ps.len();
        (0..self.xs.len())
            .map(|i| {
                (0..np)
                    .map(|j| Self::tw(j, np) * self.value(i, j))
                    .sum::<f64>()
                    * self.dp()
            })
            .collect()
    }

    /// `int W dx` at each `p`.
    pub fn marginal_p(&self) -> Vec<f64> {
        let nx = self.xs.len();
        (0..self.ps.len())
            .map(|j| {
                (0..nx)
                    .map(|i| Self::tw(i, nx) * self.value(i, j))
                    .sum::<f64>()
                    * self.dx()
            })
            .collect()
    }

    fn axis_variance(axis: &[f64], marginal: &[f64], step: f64) -> f64 {
        let n = axis.len();
        let w = |i: usize| Self::tw(i, n) * marginal[i] * step;
        let norm: f64 = (0..n).map(w).sum();
        let mean: f64 = (0..n).map(|i| w(i) * axis[i]).sum::<f64>() / norm;
        (0..n).map(|i| w(i) * (axis[i] - mean).powi(2)).sum::<f64>() / norm
    }

    pub fn variance_x(&self) -> f64 {
        Self::axis_variance(&self.xs, &self.marginal_x(), self.dx())
    }

    pub fn variance_p(&self) -> f64 {
        Self::axis_variance(&self.ps, &self.marginal_p(), self.dp())
    }

    /// Grid indices of the origin, when it is a grid point.
    pub fn origin_index(&self) -> Option<(usize, usize)> {
        let find = |axis: &[f64]| axis.iter().position(|&v| v.abs() < 1e-12);
        Some((find(&self.xs)?, find(&self.ps)?))
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn write_csv<W: Write>(&self, mut out: W, header: Option<&str>) -> Result<()> {
        if let Some(h) = header {
            writeln!(out, "{h}")?;
        }
        writeln!(out, "x,p,W")?;
        for (i, &x) in self.xs.iter().enumerate() {
            for (j, &p) in self.ps.iter().enumerate() {
                writeln!(out, "{x:.5},{p:.5},{:.9e}", self.value(i, j))?;
            }
        }
        Ok(())
    }
}

/// `W(0, 0)` and its significance against a bootstrap error.
pub fn negativity_at_origin(w: &WignerGrid, stderr: f64) -> Result<(f64, f64)> {
    let (i, j) = w
        .origin_index()
        .ok_or_else(|| Error::InvalidParameter("Wigner grid does not contain the origin".into()))?;
    let v = w.value(i, j);
    Ok((v, v / stderr))
}

/// Square roots of eigenvalues, with rounding-level values set to zero so
/// rank-deficient inputs do not pick up `sqrt(eps)` noise.
fn clean_sqrt(values: &[f64]) -> Vec<f64> {
    let top = values.iter().copied().fold(0.0, f64::max);
    let floor = 64.0 * f64::EPSILON * top * values.len() as f64;
    values
        .iter()
        .map(|&l| if l > floor { l.sqrt() } else { 0.0 })
        .collect()
}

fn psd_sqrt(m: &DMatrix<C64>) -> DMatrix<C64> {
    let eig = m.clone().symmetric_eigen();
    let roots = clean_sqrt(eig.eigenvalues.as_slice());
    let d = DVector::from_iterator(roots.len(), roots.iter().map(|&l| C64::new(l, 0.0)));
    &eig.eigenvectors * DMatrix::from_diagonal(&d) * eig.eigenvectors.adjoint()
}

/// Uhlmann fidelity `(tr sqrt(sqrt(rho) sigma sqrt(rho)))^2`.
pub fn fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch(rho.dim(), sigma.dim()));
    }
    let s = psd_sqrt(rho.elements());
    let inner = &s * sigma.elements() * &s;
    let inner = (&inner + inner.adjoint()).map(|z| z * 0.5);
    let eig = inner.symmetric_eigen();
    let t: f64 = clean_sqrt(eig.eigenvalues.as_slice()).iter().sum();
    Ok((t * t).clamp(0.0, 1.0))
}

/// Diagonal entries `p_0..=p_{n_max}`, zero beyond the matrix dimension.
pub fn photon_populations(rho: &DensityMatrix, n_max: usize) -> Vec<f64> {
    (0..=n_max)
        .map(|n| if n < rho.dim() { rho.get(n, n).re } else { 0.0 })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateMetrics {
    pub fidelity: Option<f64>,
    pub populations: Vec<f64>,
    pub w_origin: f64,
    pub w_origin_stderr: Option<f64>,
    pub w_origin_significance: Option<f64>,
    pub purity: f64,
}

impl StateMetrics {
    pub fn compute(
        rho: &DensityMatrix,
        reference: Option<&DensityMatrix>,
        w_origin_stderr: Option<f64>,
    ) -> Result<Self> {
        let w_origin = wigner_at(rho, 0.0, 0.0);
        Ok(Self {
            fidelity: reference.map(|r| fidelity(rho, r)).transpose()?,
            populations: photon_populations(rho, POPULATION_N_MAX),
            w_origin,
            w_origin_stderr,
            w_origin_significance: w_origin_stderr.map(|s| w_origin / s),
            purity: rho.purity(),
        })
    }
}
