//! Exact Gaussian simulation of the dual-homodyne measurement.
//!
//! A squeezed vacuum is split on a weak tap: the reflected arm `a` is measured
//! with a uniformly random local-oscillator phase `phi`, the transmitted arm
//! `b` at one of the tomography angles. Both outcomes are jointly Gaussian,
//! so each shot is an exact draw from a bivariate normal.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::exec::Execution;

/// Number of tomography angles on the 15 degree lattice covering [0, pi).
pub const ANGLE_LATTICE: u16 = 12;
pub const ANGLE_STEP_DEG: f64 = 15.0;
/// Records per shard; fixed so the stream does not depend on thread count.
pub const SHARD_SIZE: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianModel {
    /// Squeezed-quadrature variance (vacuum = 1).
    pub v_sq: f64,
    /// Anti-squeezed variance.
    pub v_anti: f64,
    /// Power reflectivity toward the conditioning arm, `1 - eta^2`.
    pub tap_power: f64,
    pub eff_a: f64,
    pub eff_b: f64,
}

impl GaussianModel {
    pub fn new(v_sq: f64, v_anti: f64, tap_power: f64, eff_a: f64, eff_b: f64) -> Result<Self> {
        let m = Self {
            v_sq,
            v_anti,
            tap_power,
            eff_a,
            eff_b,
        };
        m.validate()?;
        Ok(m)
    }

    /// Pure squeezed vacuum with squeezing parameter `r`.
    pub fn pure(r: f64, tap_power: f64, eff_a: f64, eff_b: f64) -> Result<Self> {
        Self::new((-2.0 * r).exp(), (2.0 * r).exp(), tap_power, eff_a, eff_b)
    }

    pub fn vacuum(tap_power: f64) -> Self {
        Self {
            v_sq: 1.0,
            v_anti: 1.0,
            tap_power,
            eff_a: 1.0,
            eff_b: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        let all_finite = [
            self.v_sq,
            self.v_anti,
            self.tap_power,
            self.eff_a,
            self.eff_b,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !all_finite {
            return bad("model parameters must be finite".into());
        }
        if !(self.v_sq > 0.0 && self.v_sq <= 1.0 && self.v_anti >= 1.0) {
            return bad(format!(
                "need 0 < v_sq <= 1 <= v_anti, got {} and {}",
                self.v_sq, self.v_anti
            ));
        }
        if self.v_sq * self.v_anti < 1.0 - 1e-12 {
            return bad(format!(
                "v_sq * v_anti = {} violates the uncertainty bound",
                self.v_sq * self.v_anti
            ));
        }
        if !(self.tap_power > 0.0 && self.tap_power < 1.0) {
            return bad(format!("tap_power {} not in (0, 1)", self.tap_power));
        }
        if !(self.eff_a > 0.0 && self.eff_a <= 1.0 && self.eff_b > 0.0 && self.eff_b <= 1.0) {
            return bad("homodyne efficiencies must lie in (0, 1]".into());
        }
        Ok(())
    }

    /// Amplitude transmissivity toward the tomography arm.
    pub fn eta(&self) -> f64 {
        (1.0 - self.tap_power).sqrt()
    }

    pub fn purity(&self) -> f64 {
        1.0 / (self.v_sq * self.v_anti).sqrt()
    }

    pub fn is_pure(&self) -> bool {
        (self.v_sq * self.v_anti - 1.0).abs() <= 1e-12
    }

    /// `(r, lambda)` such that a pure squeezed vacuum of parameter `r`
    /// followed by loss of power transmissivity `lambda` has this model's
    /// variances.
    pub fn pure_equivalent(&self) -> Result<(f64, f64)> {
        if self.is_pure() {
            return Ok((-0.5 * self.v_sq.ln(), 1.0));
        }
        if self.v_sq >= 1.0 {
            return Err(Error::InvalidParameter(
                "classical excess noise without squeezing has no pure-plus-loss form".into(),
            ));
        }
        let s = (1.0 - self.v_sq) / (self.v_anti - 1.0);
        let lambda = (1.0 - self.v_sq) / (1.0 - s);
        Ok((-0.5 * s.ln(), lambda))
    }

    pub fn covariance(&self, phi: f64, theta: f64) -> Result<QuadratureCovariance> {
        let t2 = self.tap_power;
        let e2 = 1.0 - t2;
        let (sp, cp) = phi.sin_cos();
        let (st, ct) = theta.sin_cos();
        let in_a = self.v_sq * cp * cp + self.v_anti * sp * sp;
        let in_b = self.v_sq * ct * ct + self.v_anti * st * st;
        let var_a = self.eff_a * (t2 * in_a + e2) + (1.0 - self.eff_a);
        let var_b = self.eff_b * (e2 * in_b + t2) + (1.0 - self.eff_b);
        let cov = (self.eff_a * self.eff_b).sqrt()
            * (t2 * e2).sqrt()
            * ((self.v_sq - 1.0) * cp * ct + (self.v_anti - 1.0) * sp * st);
        QuadratureCovariance::new(var_a, var_b, cov)
    }
}

/// Second moments of `(X_a^phi, X_b^theta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureCovariance {
    var_a: f64,
    var_b: f64,
    cov: f64,
}

impl QuadratureCovariance {
    pub fn new(var_a: f64, var_b: f64, cov: f64) -> Result<Self> {
        let det = var_a * var_b - cov * cov;
        if !(var_a > 0.0 && var_b > 0.0 && det > 0.0) {
            return Err(Error::NotPositiveDefinite { det });
        }
        Ok(Self { var_a, var_b, cov })
    }

    pub fn var_a(&self) -> f64 {
        self.var_a
    }

    pub fn var_b(&self) -> f64 {
        self.var_b
    }

    pub fn cov(&self) -> f64 {
        self.cov
    }

    pub fn matrix(&self) -> [[f64; 2]; 2] {
        [[self.var_a, self.cov], [self.cov, self.var_b]]
    }

    /// Lower Cholesky factor `[[l11, 0], [l21, l22]]`.
    pub fn cholesky(&self) -> (f64, f64, f64) {
        let l11 = self.var_a.sqrt();
        let l21 = self.cov / l11;
        let l22 = (self.var_b - l21 * l21).sqrt();
        (l11, l21, l22)
    }
}

/// One simulated shot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomodyneRecord {
    pub phi: f64,
    pub x_a: f64,
    pub theta_index: u16,
    pub x_b: f64,
}

impl HomodyneRecord {
    pub fn theta(&self) -> f64 {
        angle_of_index(self.theta_index)
    }
}

pub fn angle_of_index(index: u16) -> f64 {
    (index as f64 * ANGLE_STEP_DEG).to_radians()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AngleSchedule {
    /// Lattice indices; angle = 15 degrees times index.
    pub indices: Vec<u16>,
    pub samples_per_angle: u64,
}

impl Default for AngleSchedule {
    fn default() -> Self {
        Self {
            indices: (0..ANGLE_LATTICE).collect(),
            samples_per_angle: 1_000_000,
        }
    }
}

/// Contiguous block of records drawn from one independent RNG stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shard {
    pub id: usize,
    pub theta_index: u16,
    /// Position of this block within its angle.
    pub block: u32,
    pub len: usize,
}

impl Shard {
    fn stream(&self) -> u64 {
        ((self.theta_index as u64) << 32) | self.block as u64
    }
}

impl AngleSchedule {
    pub fn full(samples_per_angle: u64) -> Self {
        Self {
            samples_per_angle,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.indices.is_empty() {
            return Err(Error::InvalidParameter("angle schedule is empty".into()));
        }
        let mut seen = [false; ANGLE_LATTICE as usize];
        for &i in &self.indices {
            if i >= ANGLE_LATTICE {
                return Err(Error::InvalidParameter(format!(
                    "angle index {i} outside [0, pi)"
                )));
            }
            if std::mem::replace(&mut seen[i as usize], true) {
                return Err(Error::InvalidParameter(format!("angle index {i} repeated")));
            }
        }
        Ok(())
    }

    pub fn angles(&self) -> Vec<f64> {
        self.indices.iter().map(|&i| angle_of_index(i)).collect()
    }

    pub fn total_records(&self) -> u64 {
        self.samples_per_angle * self.indices.len() as u64
    }

    pub fn shards(&self, shard_size: usize) -> Vec<Shard> {
        let mut out = Vec::new();
        for &theta_index in &self.indices {
            let mut remaining = self.samples_per_angle as usize;
            let mut block = 0u32;
            while remaining > 0 {
                let len = remaining.min(shard_size);
                out.push(Shard {
                    id: out.len(),
                    theta_index,
                    block,
                    len,
                });
                remaining -= len;
                block += 1;
            }
        }
        out
    }
}

/// Draws one shard's records. The stream depends only on `(seed, shard)`.
pub fn sample_shard(model: &GaussianModel, shard: &Shard, seed: u64) -> Vec<HomodyneRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(shard.stream());
    let theta = angle_of_index(shard.theta_index);
    (0..shard.len)
        .map(|_| {
            let mut phi = rng.random::<f64>() * TAU;
            if phi >= TAU {
                phi = 0.0;
            }
            let c = model
                .covariance(phi, theta)
                .expect("validated model yields positive covariance");
            let (l11, l21, l22) = c.cholesky();
            let z1: f64 = rng.sample(StandardNormal);
            let z2: f64 = rng.sample(StandardNormal);
            HomodyneRecord {
                phi,
                x_a: l11 * z1,
                theta_index: shard.theta_index,
                x_b: l21 * z1 + l22 * z2,
            }
        })
        .collect()
}

/// Full record stream in shard order.
pub fn sample_records(
    model: &GaussianModel,
    schedule: &AngleSchedule,
    seed: u64,
    exec: Execution,
) -> Result<Vec<HomodyneRecord>> {
    model.validate()?;
    schedule.validate()?;
    let shards = schedule.shards(SHARD_SIZE);
    let parts = exec.map(&shards, |s| sample_shard(model, s, seed));
    Ok(parts.concat())
}

pub const PHASE_BINS: usize = 64;
pub const PHASE_MIN_RECORDS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseUniformity {
    /// Chi-square of `phi mod pi` in 64 bins; this decides `pass`.
    pub chi2: f64,
    pub dof: usize,
    pub p_value: f64,
    pub pass: bool,
    /// Same test on the unfolded `[0, 2 pi)` range; informational only,
    /// since diagonal conditioning weights are insensitive to `phi -> phi + pi`.
    pub full_range_p_value: f64,
    pub full_range_pass: bool,
}

fn chi2_uniform(values: impl Iterator<Item = f64>, period: f64, n: usize) -> (f64, f64) {
    let mut counts = [0u64; PHASE_BINS];
    for v in values {
        let b = ((v.rem_euclid(period) / period) * PHASE_BINS as f64) as usize;
        counts[b.min(PHASE_BINS - 1)] += 1;
    }
    let expected = n as f64 / PHASE_BINS as f64;
    let chi2: f64 = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    let dist = ChiSquared::new((PHASE_BINS - 1) as f64).expect("positive dof");
    (chi2, dist.sf(chi2))
}

pub fn validate_phase_uniformity(records: &[HomodyneRecord]) -> Result<PhaseUniformity> {
    if records.len() < PHASE_MIN_RECORDS {
        return Err(Error::InsufficientData {
            needed: PHASE_MIN_RECORDS,
            got: records.len(),
        });
    }
    let (chi2, p_value) = chi2_uniform(records.iter().map(|r| r.phi), PI, records.len());
    let (_, full_p) = chi2_uniform(records.iter().map(|r| r.phi), TAU, records.len());
    Ok(PhaseUniformity {
        chi2,
        dof: PHASE_BINS - 1,
        p_value,
        pass: p_value >= 0.01,
        full_range_p_value: full_p,
        full_range_pass: full_p >= 0.01,
    })
}
