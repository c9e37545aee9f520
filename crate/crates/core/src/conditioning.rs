//! Polynomials in the photon number and their phase-averaged quadrature form.
//!
//! Averaging `(a e^{-i phi} + a^dag e^{i phi})^m` over a uniform phase keeps
//! only the terms with equal numbers of `a` and `a^dag`, which are polynomials
//! in `n = a^dag a`. Inverting that triangular map turns any `f(n)` into a
//! polynomial in the quadrature that a phase-randomized homodyne shot can be
//! weighted by. All algebra is in exact rationals.

use std::collections::BTreeMap;
use std::fmt;

use num_rational::Ratio;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::hermite;

pub type Rational = Ratio<i128>;

/// Highest photon-number degree supported.
pub const MAX_DEGREE: usize = 5;
/// Highest quadrature power supported by the symbolic expansion.
pub const MAX_MOMENT: usize = 2 * MAX_DEGREE;

fn q(n: i128) -> Rational {
    Rational::from_integer(n)
}

pub fn to_f64(r: &Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// `f(n) = sum_j c_j n^j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NumberPolynomial {
    coeffs: Vec<Rational>,
}

impl NumberPolynomial {
    /// Trailing zero coefficients are dropped; the zero polynomial is rejected.
    pub fn new(mut coeffs: Vec<Rational>) -> Result<Self> {
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            return Err(Error::InvalidParameter("zero polynomial".into()));
        }
        if coeffs.len() - 1 > MAX_DEGREE {
            return Err(Error::UnsupportedDegree {
                degree: coeffs.len() - 1,
                max: MAX_DEGREE,
            });
        }
        Ok(Self { coeffs })
    }

    pub fn from_integers(coeffs: &[i64]) -> Result<Self> {
        Self::new(coeffs.iter().map(|&c| q(c as i128)).collect())
    }

    /// Coefficients given as floats are converted to nearby rationals.
    pub fn from_f64(coeffs: &[f64]) -> Result<Self> {
        coeffs
            .iter()
            .map(|&c| {
                Ratio::<i64>::approximate_float(c)
                    .map(|r| Rational::new(*r.numer() as i128, *r.denom() as i128))
                    .ok_or_else(|| {
                        Error::InvalidParameter(format!("coefficient {c} not representable"))
                    })
            })
            .collect::<Result<Vec<_>>>()
            .and_then(Self::new)
    }

    pub fn constant(c: i64) -> Result<Self> {
        Self::from_integers(&[c])
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coefficients(&self) -> &[Rational] {
        &self.coeffs
    }

    pub fn eval(&self, n: u64) -> Rational {
        let x = q(n as i128);
        self.coeffs
            .iter()
            .rev()
            .fold(Rational::zero(), |acc, c| acc * x + c)
    }

    pub fn eval_f64(&self, n: u64) -> f64 {
        to_f64(&self.eval(n))
    }
}

impl fmt::Display for NumberPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_poly(f, &self.coeffs, |j| match j {
            0 => String::new(),
            1 => "n".into(),
            _ => format!("n^{j}"),
        })
    }
}

/// Polynomial in the phase-averaged quadrature with even powers only:
/// `sum_j c_j Xbar^{2j}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MomentPolynomial {
    even: Vec<Rational>,
}

impl MomentPolynomial {
    /// Coefficient of `Xbar^power`; odd powers vanish identically.
    pub fn coefficient(&self, power: usize) -> Rational {
        if power % 2 == 1 {
            return Rational::zero();
        }
        self.even
            .get(power / 2)
            .copied()
            .unwrap_or_else(Rational::zero)
    }

    pub fn even_coefficients(&self) -> &[Rational] {
        &self.even
    }

    pub fn degree(&self) -> usize {
        2 * (self.even.len() - 1)
    }

    /// Floating-point evaluator for the per-shot hot loop.
    pub fn evaluator(&self) -> ShotWeight {
        ShotWeight {
            coeffs: self.even.iter().map(to_f64).collect(),
            scale: 1.0,
        }
    }
}

impl fmt::Display for MomentPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_poly(f, &self.even, |j| match j {
            0 => String::new(),
            _ => format!("X^{}", 2 * j),
        })
    }
}

fn write_poly(
    f: &mut fmt::Formatter<'_>,
    coeffs: &[Rational],
    var: impl Fn(usize) -> String,
) -> fmt::Result {
    let mut first = true;
    for (j, c) in coeffs.iter().enumerate().rev() {
        if c.is_zero() {
            continue;
        }
        let sign = if c.is_negative() { "-" } else { "+" };
        if first {
            if c.is_negative() {
                write!(f, "-")?;
            }
        } else {
            write!(f, " {sign} ")?;
        }
        first = false;
        let a = c.abs();
        let v = var(j);
        match (v.is_empty(), a.is_one()) {
            (true, _) => write!(f, "{a}")?,
            (false, true) => write!(f, "{v}")?,
            (false, false) => write!(f, "{a} {v}")?,
        }
    }
    if first {
        write!(f, "0")?;
    }
    Ok(())
}

/// Normal-ordered expansion of `(a + a^dag)^m`: map from `(p, q)` to the
/// integer coefficient of `a^dag^p a^q`.
fn normal_ordered_power(m: usize) -> BTreeMap<(usize, usize), i128> {
    let mut terms = BTreeMap::from([((0usize, 0usize), 1i128)]);
    for _ in 0..m {
        let mut next = BTreeMap::new();
        for (&(p, qq), &c) in &terms {
            // a^dag . (a^dag^p a^q)
            *next.entry((p + 1, qq)).or_insert(0) += c;
            // a . (a^dag^p a^q) = a^dag^p a^(q+1) + p a^dag^(p-1) a^q
            *next.entry((p, qq + 1)).or_insert(0) += c;
            if p > 0 {
                *next.entry((p - 1, qq)).or_insert(0) += p as i128 * c;
            }
        }
        terms = next;
    }
    terms
}

/// Coefficients of the falling factorial `n (n-1) ... (n-k+1)`.
fn falling_factorial(k: usize) -> Vec<i128> {
    let mut poly = vec![1i128];
    for j in 0..k {
        let mut next = vec![0i128; poly.len() + 1];
        for (i, &c) in poly.iter().enumerate() {
            next[i + 1] += c;
            next[i] -= j as i128 * c;
        }
        poly = next;
    }
    poly
}

/// `Xbar^m` as a polynomial in `n`, for even `m <= 10`.
pub fn moment_to_number(m: usize) -> Result<NumberPolynomial> {
    if m % 2 == 1 {
        return Err(Error::InvalidParameter(format!(
            "odd moment {m} averages to zero"
        )));
    }
    if m > MAX_MOMENT {
        return Err(Error::UnsupportedDegree {
            degree: m,
            max: MAX_MOMENT,
        });
    }
    let mut coeffs = vec![0i128; m / 2 + 1];
    for ((p, qq), c) in normal_ordered_power(m) {
        if p == qq {
            for (j, f) in falling_factorial(p).into_iter().enumerate() {
                coeffs[j] += c * f;
            }
        }
    }
    NumberPolynomial::new(coeffs.into_iter().map(q).collect())
}

/// Expresses `f(n)` through phase-averaged quadrature moments.
pub fn number_to_moment(p: &NumberPolynomial) -> Result<MomentPolynomial> {
    let d = p.degree();
    let basis: Vec<NumberPolynomial> = (0..=d)
        .map(|k| moment_to_number(2 * k))
        .collect::<Result<_>>()?;
    let mut residual = p.coefficients().to_vec();
    let mut even = vec![Rational::zero(); d + 1];
    for k in (0..=d).rev() {
        let row = basis[k].coefficients();
        let c = residual[k] / row[k];
        even[k] = c;
        for (j, r) in row.iter().enumerate() {
            residual[j] -= c * r;
        }
    }
    debug_assert!(residual.iter().all(|r| r.is_zero()));
    while even.len() > 1 && even.last().is_some_and(|c| c.is_zero()) {
        even.pop();
    }
    Ok(MomentPolynomial { even })
}

/// Re-expands a moment polynomial into photon-number form.
pub fn moment_to_number_poly(p: &MomentPolynomial) -> Result<NumberPolynomial> {
    let mut coeffs = vec![Rational::zero(); p.even.len()];
    for (k, c) in p.even.iter().enumerate() {
        for (j, t) in moment_to_number(2 * k)?.coefficients().iter().enumerate() {
            coeffs[j] += c * t;
        }
    }
    NumberPolynomial::new(coeffs)
}

/// `prod_{j=0, j != k}^{j_max} (n - j)`: vanishes on every photon number up
/// to `j_max` except `k`.
pub fn subtraction_polynomial(k: usize, j_max: usize) -> Result<NumberPolynomial> {
    if k > j_max {
        return Err(Error::InvalidParameter(format!(
            "k = {k} exceeds j_max = {j_max}"
        )));
    }
    if j_max > MAX_DEGREE + 1 {
        return Err(Error::UnsupportedDegree {
            degree: j_max,
            max: MAX_DEGREE,
        });
    }
    let mut coeffs = vec![1i128];
    for j in (0..=j_max).filter(|&j| j != k) {
        let mut next = vec![0i128; coeffs.len() + 1];
        for (i, &c) in coeffs.iter().enumerate() {
            next[i + 1] += c;
            next[i] -= j as i128 * c;
        }
        coeffs = next;
    }
    NumberPolynomial::new(coeffs.into_iter().map(q).collect())
}

/// `f(n)` for `n = 0..=n_max`.
pub fn fock_weights(p: &NumberPolynomial, n_max: usize) -> Vec<f64> {
    (0..=n_max as u64).map(|n| p.eval_f64(n)).collect()
}

/// Per-shot weight obtained by substituting the measured quadrature for
/// `Xbar`. Cheap to copy into worker threads.
#[derive(Debug, Clone, PartialEq)]
pub struct ShotWeight {
    coeffs: Vec<f64>,
    scale: f64,
}

impl ShotWeight {
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        let x2 = x * x;
        self.scale * self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x2 + c)
    }

    /// Rescales so the weight equals one at `x = 0`.
    pub fn normalized_at_zero(&self) -> Result<Self> {
        let v0 = self.coeffs[0] * self.scale;
        if v0 == 0.0 {
            return Err(Error::ZeroNormalization {
                context: "shot weight at x = 0",
                value: 0.0,
            });
        }
        Ok(Self {
            coeffs: self.coeffs.clone(),
            scale: self.scale / v0,
        })
    }
}

pub fn shot_weight(p: &MomentPolynomial, x: f64, normalize_at_zero: bool) -> Result<f64> {
    let w = p.evaluator();
    if normalize_at_zero {
        Ok(w.normalized_at_zero()?.eval(x))
    } else {
        Ok(w.eval(x))
    }
}

/// `int x^m psi_n(x)^2 dx` by trapezoid refinement, which converges
/// geometrically for these Gaussian-decaying integrands.
pub fn moment_oracle(n: usize, m: usize) -> Result<f64> {
    if n > 20 || m > MAX_MOMENT {
        return Err(Error::InvalidParameter(format!(
            "moment_oracle supports n <= 20, m <= 10 (got {n}, {m})"
        )));
    }
    let half_width = 2.0 * (n as f64 + 0.5).sqrt() + 14.0;
    let integrate = |steps: usize| -> f64 {
        let h = 2.0 * half_width / steps as f64;
        let mut psi = vec![0.0; n + 1];
        let mut acc = 0.0;
        for i in 0..=steps {
            let x = -half_width + h * i as f64;
            hermite::fill_wavefunctions(x, &mut psi);
            let w = if i == 0 || i == steps { 0.5 } else { 1.0 };
            acc += w * x.powi(m as i32) * psi[n] * psi[n];
        }
        acc * h
    };
    let mut steps = 256;
    let mut prev = integrate(steps);
    while steps < 1 << 20 {
        steps *= 2;
        let cur = integrate(steps);
        if (cur - prev).abs() <= 1e-13 * cur.abs().max(1.0) {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(Error::QuadratureNonConvergence(format!(
        "moment n = {n}, m = {m}"
    )))
}
