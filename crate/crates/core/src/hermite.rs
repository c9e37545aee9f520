//! Harmonic-oscillator eigenfunctions in quadrature units where the vacuum
//! has unit variance: `psi_0(x) = (2 pi)^(-1/4) exp(-x^2 / 4)`.

use std::f64::consts::PI;

/// Largest |x| for which `exp(-x^2/4)` stays comfortably above the
/// smallest normal double.
pub const MAX_ABS_X: f64 = 52.0;

/// Fills `out[n] = psi_n(x)` for `n = 0..out.len()` using the three-term
/// recursion `x psi_n = sqrt(n+1) psi_{n+1} + sqrt(n) psi_{n-1}`.
pub fn fill_wavefunctions(x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = (2.0 * PI).powf(-0.25) * (-0.25 * x * x).exp();
    if out.len() > 1 {
        out[1] = x * out[0];
    }
    for n in 1..out.len().saturating_sub(1) {
        out[n + 1] = (x * out[n] - (n as f64).sqrt() * out[n - 1]) / ((n + 1) as f64).sqrt();
    }
}

pub fn wavefunctions(x: f64, n_max: usize) -> Vec<f64> {
    let mut out = vec![0.0; n_max + 1];
    fill_wavefunctions(x, &mut out);
    out
}

pub fn wavefunction(n: usize, x: f64) -> f64 {
    wavefunctions(x, n)[n]
}

/// Derivatives `psi_n'(x) = (sqrt(n) psi_{n-1} - sqrt(n+1) psi_{n+1}) / 2`,
/// given `psi` evaluated up to index `n_max + 1`.
pub fn derivatives_from(psi: &[f64], n_max: usize) -> Vec<f64> {
    assert!(psi.len() > n_max + 1, "need psi up to n_max + 1");
    (0..=n_max)
        .map(|n| {
            let lower = if n > 0 {
                (n as f64).sqrt() * psi[n - 1]
            } else {
                0.0
            };
            0.5 * (lower - ((n + 1) as f64).sqrt() * psi[n + 1])
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ground_state_normalization_and_parity() {
        assert_relative_eq!(
            wavefunction(0, 0.0),
            (2.0 * PI).powf(-0.25),
            epsilon = 1e-15
        );
        assert_eq!(wavefunction(1, 0.0), 0.0);
        for n in 0..12 {
            let a = wavefunction(n, 1.3);
            let b = wavefunction(n, -1.3);
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            assert_relative_eq!(a, sign * b, epsilon = 1e-14);
        }
    }

    #[test]
    fn orthonormal_on_fine_grid() {
        let h = 0.01;
        let n_max = 20;
        let mut gram = vec![vec![0.0; n_max + 1]; n_max + 1];
        let mut x = -15.0;
        while x <= 15.0 {
            let psi = wavefunctions(x, n_max);
            for i in 0..=n_max {
                for j in 0..=n_max {
                    gram[i][j] += h * psi[i] * psi[j];
                }
            }
            x += h;
        }
        for (i, row) in gram.iter().enumerate() {
            for (j, &g) in row.iter().enumerate() {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((g - expected).abs() < 1e-9, "gram[{i}][{j}] = {g}");
            }
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let x = 0.7;
        let h = 1e-5;
        let psi = wavefunctions(x, 9);
        let d = derivatives_from(&psi, 8);
        for n in 0..=8 {
            let fd = (wavefunction(n, x + h) - wavefunction(n, x - h)) / (2.0 * h);
            assert_relative_eq!(d[n], fd, epsilon = 1e-8);
        }
    }
}
