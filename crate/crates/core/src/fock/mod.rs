//! Truncated Fock-space states and channels.
//!
//! This is the exact side of the crate: every homodyne estimate produced by
//! the sampling pipeline is checked against quantities computed here.

mod channels;
mod oracle;
mod state;

pub use channels::{beamsplitter, beamsplitter_inverse, loss_channel, mix_modes};
pub use oracle::{condition_oracle, model_state, AncillaFilter, Mode, TwoModeDensity};
pub use state::{
    quadrature_operator, quadrature_pdf, squeezed_leakage, squeezed_vacuum, DensityMatrix,
    FockVector, TwoModeState, DEFAULT_N_TRUNC, LEAKAGE_TOLERANCE,
};

pub type C64 = num_complex::Complex64;

/// `ln(n!)` for `n = 0..=max`.
pub(crate) fn log_factorials(max: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(max + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for n in 1..=max {
        acc += (n as f64).ln();
        out.push(acc);
    }
    out
}

pub(crate) fn binomial(lf: &[f64], n: usize, k: usize) -> f64 {
    (lf[n] - lf[k] - lf[n - k]).exp().round()
}
