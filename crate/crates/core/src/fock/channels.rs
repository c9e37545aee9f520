use nalgebra::DMatrix;

use super::{binomial, log_factorials, DensityMatrix, TwoModeState, C64};
use crate::error::{Error, Result};

/// Passive two-mode transformation. The creation operator of the first
/// input becomes `u[0][0] A^dag + u[0][1] B^dag`, the second input's becomes
/// `u[1][0] A^dag + u[1][1] B^dag`. Output components above the input
/// truncation are dropped.
pub fn mix_modes(state: &TwoModeState, u: [[f64; 2]; 2]) -> TwoModeState {
    let d = state.dim();
    let lf = log_factorials(2 * d);
    let mut out = DMatrix::<C64>::zeros(d, d);
    let pow = |x: f64, k: usize| x.powi(k as i32);
    for j in 0..d {
        for k in 0..d {
            let c = state.amplitude(j, k);
            if c.norm_sqr() == 0.0 {
                continue;
            }
            // (u00 A + u01 B)^j (u10 A + u11 B)^k
            for i in 0..=j {
                let left = binomial(&lf, j, i) * pow(u[0][0], i) * pow(u[0][1], j - i);
                if left == 0.0 {
                    continue;
                }
                for l in 0..=k {
                    let p = i + l;
                    let q = j + k - p;
                    if p >= d || q >= d {
                        continue;
                    }
                    let right = binomial(&lf, k, l) * pow(u[1][0], l) * pow(u[1][1], k - l);
                    let norm = (0.5 * (lf[p] + lf[q] - lf[j] - lf[k])).exp();
                    out[(p, q)] += c * (left * right * norm);
                }
            }
        }
    }
    TwoModeState::from_matrix_unchecked(out)
}

fn check_eta(eta: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidParameter(format!(
            "amplitude transmissivity {eta} not in [0, 1]"
        )));
    }
    Ok((1.0 - eta * eta).max(0.0).sqrt())
}

/// Beamsplitter with amplitude transmissivity `eta` acting on
/// `(signal, ancilla)` and producing `(a, b)`, where `a` is the reflected
/// conditioning arm and `b` the transmitted arm:
/// `s^dag -> sqrt(1-eta^2) a^dag + eta b^dag`, `v^dag -> -eta a^dag + sqrt(1-eta^2) b^dag`.
pub fn beamsplitter(state: &TwoModeState, eta: f64) -> Result<TwoModeState> {
    let refl = check_eta(eta)?;
    Ok(mix_modes(state, [[refl, eta], [-eta, refl]]))
}

pub fn beamsplitter_inverse(state: &TwoModeState, eta: f64) -> Result<TwoModeState> {
    let refl = check_eta(eta)?;
    Ok(mix_modes(state, [[refl, -eta], [eta, refl]]))
}

/// Kraus weights `sqrt(C(N,k) lambda^(N-k) (1-lambda)^k)` for losing `k`
/// photons out of `N`, indexed `[N][k]`.
pub(crate) fn loss_amplitudes(dim: usize, lambda: f64) -> Vec<Vec<f64>> {
    let lf = log_factorials(dim);
    (0..dim)
        .map(|big_n| {
            (0..=big_n)
                .map(|k| {
                    let b = binomial(&lf, big_n, k)
                        * lambda.powi((big_n - k) as i32)
                        * (1.0 - lambda).powi(k as i32);
                    b.sqrt()
                })
                .collect()
        })
        .collect()
}

/// Pure-loss channel with power transmissivity `lambda`.
pub fn loss_channel(rho: &DensityMatrix, lambda: f64) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidParameter(format!(
            "power transmissivity {lambda} not in [0, 1]"
        )));
    }
    let d = rho.dim();
    let amp = loss_amplitudes(d, lambda);
    let out = DMatrix::from_fn(d, d, |m, n| {
        let mut acc = C64::new(0.0, 0.0);
        let mut k = 0;
        while m + k < d && n + k < d {
            acc += rho.get(m + k, n + k) * (amp[m + k][k] * amp[n + k][k]);
            k += 1;
        }
        acc
    });
    Ok(DensityMatrix::from_matrix_unchecked(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{squeezed_vacuum, FockVector, LEAKAGE_TOLERANCE};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn two_photons_split_like_the_leading_order_expansion() {
        let eta: f64 = 0.93;
        let e2 = eta * eta;
        let out = beamsplitter(&FockVector::number(2, 6).with_vacuum_ancilla(), eta).unwrap();
        assert_relative_eq!(out.amplitude(2, 0).re, 1.0 - e2, epsilon = 1e-14);
        assert_relative_eq!(
            out.amplitude(1, 1).re,
            (2.0 * e2 * (1.0 - e2)).sqrt(),
            epsilon = 1e-14
        );
        assert_relative_eq!(out.amplitude(0, 2).re, e2, epsilon = 1e-14);
        assert_relative_eq!(out.norm_sqr(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn full_transmission_hands_signal_to_b() {
        let sq = squeezed_vacuum(0.3, 20).unwrap();
        let out = beamsplitter(&sq.with_vacuum_ancilla(), 1.0).unwrap();
        for n in 0..21 {
            assert_relative_eq!(
                out.amplitude(0, n).re,
                sq.amplitudes()[n].re,
                epsilon = 1e-14
            );
            for m in 1..21 {
                assert_eq!(out.amplitude(m, n).norm(), 0.0);
            }
        }
    }

    #[test]
    fn balanced_single_photon() {
        let out = beamsplitter(
            &FockVector::number(1, 3).with_vacuum_ancilla(),
            0.5f64.sqrt(),
        )
        .unwrap();
        let h = 0.5f64.sqrt();
        assert_relative_eq!(out.amplitude(1, 0).re, h, epsilon = 1e-15);
        assert_relative_eq!(out.amplitude(0, 1).re, h, epsilon = 1e-15);
    }

    #[test]
    fn loss_on_single_photon() {
        let out = loss_channel(&DensityMatrix::fock(1, 4), 0.9).unwrap();
        assert_relative_eq!(out.get(1, 1).re, 0.9, epsilon = 1e-15);
        assert_relative_eq!(out.get(0, 0).re, 0.1, epsilon = 1e-15);
        assert_relative_eq!(out.trace(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn loss_extremes() {
        let rho = squeezed_vacuum(0.5, 30).unwrap().to_density();
        let same = loss_channel(&rho, 1.0).unwrap();
        assert!((same.elements() - rho.elements()).norm() < 1e-15);
        let vac = loss_channel(&rho, 0.0).unwrap();
        assert!(
            (vac.elements() - DensityMatrix::vacuum(31).elements()).norm()
                < 2.0 * LEAKAGE_TOLERANCE
        );
        assert!((loss_channel(&rho, 0.37).unwrap().trace() - 1.0).abs() < 1e-10);
        assert!(loss_channel(&rho, 1.2).is_err());
    }

    proptest! {
        #[test]
        fn inverse_recovers_input_below_truncation(
            re in prop::collection::vec(-1.0f64..1.0, 36),
            im in prop::collection::vec(-1.0f64..1.0, 36),
            eta in 0.0f64..1.0,
        ) {
            // support on total photon number <= 7 in a 12-dimensional space
            let d = 12;
            let mut m = DMatrix::<C64>::zeros(d, d);
            let mut idx = 0;
            for j in 0..8 {
                for k in 0..8 - j {
                    if idx < 36 {
                        m[(j, k)] = C64::new(re[idx], im[idx]);
                        idx += 1;
                    }
                }
            }
            let norm = m.norm();
            prop_assume!(norm > 1e-3);
            let state = TwoModeState::from_matrix(m / C64::new(norm, 0.0)).unwrap();
            let out = beamsplitter(&state, eta).unwrap();
            prop_assert!((out.norm_sqr() - 1.0).abs() < 1e-10);
            let back = beamsplitter_inverse(&out, eta).unwrap();
            prop_assert!((back.amplitudes() - state.amplitudes()).norm() < 1e-10);
        }
    }
}
