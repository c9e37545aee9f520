//! Brute-force conditioning on the ancilla mode, used as the reference for
//! every homodyne-weighting estimate.

use nalgebra::DMatrix;

use super::channels::loss_amplitudes;
use super::{beamsplitter, squeezed_vacuum, DensityMatrix, FockVector, TwoModeState, C64};
use crate::error::{Error, Result};
use crate::sampler::GaussianModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Conditioning arm.
    A,
    /// Tomography arm.
    B,
}

/// Two-mode density matrix with row/column index `n_a * dim + n_b`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoModeDensity {
    dim: usize,
    elements: DMatrix<C64>,
}

impl TwoModeDensity {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            elements: DMatrix::zeros(dim * dim, dim * dim),
        }
    }

    pub fn from_pure(state: &TwoModeState) -> Self {
        let mut rho = Self::zeros(state.dim());
        rho.add_pure(state);
        rho
    }

    pub fn add_pure(&mut self, state: &TwoModeState) {
        assert_eq!(state.dim(), self.dim, "dimension mismatch");
        let d = self.dim;
        let v = nalgebra::DVector::from_fn(d * d, |i, _| state.amplitude(i / d, i % d));
        self.elements += &v * v.adjoint();
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    fn at(&self, a: usize, b: usize, a2: usize, b2: usize) -> C64 {
        self.elements[(a * self.dim + b, a2 * self.dim + b2)]
    }

    pub fn trace(&self) -> f64 {
        self.elements.diagonal().iter().map(|c| c.re).sum()
    }

    /// Pure loss with power transmissivity `lambda` on one mode.
    pub fn apply_loss(&self, mode: Mode, lambda: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::InvalidParameter(format!(
                "power transmissivity {lambda} not in [0, 1]"
            )));
        }
        if lambda == 1.0 {
            return Ok(self.clone());
        }
        let d = self.dim;
        let amp = loss_amplitudes(d, lambda);
        let mut out = DMatrix::<C64>::zeros(d * d, d * d);
        for ma in 0..d {
            for mb in 0..d {
                for na in 0..d {
                    for nb in 0..d {
                        let mut acc = C64::new(0.0, 0.0);
                        let mut k = 0;
                        loop {
                            let (m_lost, n_lost) = match mode {
                                Mode::A => (ma + k, na + k),
                                Mode::B => (mb + k, nb + k),
                            };
                            if m_lost >= d || n_lost >= d {
                                break;
                            }
                            let (m_keep, n_keep) = match mode {
                                Mode::A => (mb, nb),
                                Mode::B => (ma, na),
                            };
                            let el = match mode {
                                Mode::A => self.at(m_lost, m_keep, n_lost, n_keep),
                                Mode::B => self.at(m_keep, m_lost, n_keep, n_lost),
                            };
                            acc += el * (amp[m_lost][k] * amp[n_lost][k]);
                            k += 1;
                        }
                        out[(ma * d + mb, na * d + nb)] = acc;
                    }
                }
            }
        }
        Ok(Self {
            dim: d,
            elements: out,
        })
    }

    pub fn reduced(&self, mode: Mode) -> DensityMatrix {
        let d = self.dim;
        let m = DMatrix::from_fn(d, d, |i, j| {
            (0..d)
                .map(|k| match mode {
                    Mode::A => self.at(i, k, j, k),
                    Mode::B => self.at(k, i, k, j),
                })
                .sum()
        });
        DensityMatrix::from_matrix_unchecked(m)
    }

    /// `tr(rho (op_a (x) op_b))`.
    pub fn expectation(&self, op_a: &DMatrix<C64>, op_b: &DMatrix<C64>) -> C64 {
        let d = self.dim;
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    let a = op_a[(k, i)];
                    if a.norm_sqr() == 0.0 {
                        continue;
                    }
                    for l in 0..d {
                        acc += self.at(i, j, k, l) * a * op_b[(l, j)];
                    }
                }
            }
        }
        acc
    }
}

/// Operator applied to the conditioning mode before tracing it out.
#[derive(Debug, Clone, PartialEq)]
pub enum AncillaFilter {
    /// `sum_n f(n) |n><n|`, entries beyond the vector treated as zero.
    Diagonal(Vec<f64>),
    /// General operator, `op[(n, m)] = <n|op|m>`.
    Operator(DMatrix<C64>),
}

impl AncillaFilter {
    pub fn number_projector(n: usize) -> Self {
        let mut w = vec![0.0; n + 1];
        w[n] = 1.0;
        AncillaFilter::Diagonal(w)
    }
}

/// Returns the unnormalized conditioned state `tr_a[rho_ab (F (x) 1)]` and its
/// trace. For sign-indefinite `F` the result is a quasi-state, meaningful
/// only through expectation values.
pub fn condition_oracle(
    rho_ab: &TwoModeDensity,
    filter: &AncillaFilter,
) -> Result<(DensityMatrix, f64)> {
    let d = rho_ab.dim();
    let m = match filter {
        AncillaFilter::Diagonal(f) => DMatrix::from_fn(d, d, |j, l| {
            f.iter()
                .take(d)
                .enumerate()
                .filter(|(_, &w)| w != 0.0)
                .map(|(p, &w)| rho_ab.at(p, j, p, l) * w)
                .sum()
        }),
        AncillaFilter::Operator(op) => {
            if op.nrows() != d || op.ncols() != d {
                return Err(Error::DimensionMismatch(op.nrows(), d));
            }
            DMatrix::from_fn(d, d, |j, l| {
                let mut acc = C64::new(0.0, 0.0);
                for p in 0..d {
                    for q in 0..d {
                        let w = op[(q, p)];
                        if w.norm_sqr() != 0.0 {
                            acc += rho_ab.at(p, j, q, l) * w;
                        }
                    }
                }
                acc
            })
        }
    };
    let rho_b = DensityMatrix::from_matrix_unchecked(m);
    let trace = rho_b.trace();
    if trace.abs() < 1e-14 {
        return Err(Error::ZeroNormalization {
            context: "conditioned oracle state",
            value: trace,
        });
    }
    Ok((rho_b, trace))
}

/// Exact two-mode state of the measurement model after the tap beamsplitter
/// and both homodyne efficiencies.
///
/// A mixed squeezed resource is represented as a purer squeezed vacuum
/// followed by loss, which reproduces any `v_sq * v_anti >= 1`.
pub fn model_state(model: &GaussianModel, n_trunc: usize) -> Result<TwoModeDensity> {
    let (r, pre_loss) = model.pure_equivalent()?;
    let sq = squeezed_vacuum(r, n_trunc)?;
    let d = n_trunc + 1;
    let eta = model.eta();
    let mut rho = TwoModeDensity::zeros(d);
    if pre_loss >= 1.0 {
        rho.add_pure(&beamsplitter(&sq.with_vacuum_ancilla(), eta)?);
    } else {
        let amp = loss_amplitudes(d, pre_loss);
        for k in 0..d {
            let kraus: Vec<C64> = (0..d)
                .map(|m| {
                    if m + k < d {
                        sq.amplitudes()[m + k] * amp[m + k][k]
                    } else {
                        C64::new(0.0, 0.0)
                    }
                })
                .collect();
            if kraus.iter().all(|c| c.norm_sqr() < 1e-300) {
                continue;
            }
            let branch = FockVector::new(kraus)?;
            rho.add_pure(&beamsplitter(&branch.with_vacuum_ancilla(), eta)?);
        }
    }
    rho.apply_loss(Mode::A, model.eff_a)?
        .apply_loss(Mode::B, model.eff_b)
}
