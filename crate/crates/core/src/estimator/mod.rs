//! Weighted accumulation of homodyne records and state reconstruction.

mod bootstrap;
mod density;
mod histogram;

pub use bootstrap::{bootstrap_errors, resample_counts, BootstrapResult, MIN_REPLICATES};
pub use density::{
    angle_coverage, density_from_quadratures, estimate_density, estimate_density_gated,
    project_to_physical, AngleMoments, DensityEstimate, MomentAccumulator, BLOCK_RECORDS,
};
pub use histogram::{
    AngleHistogram, BinSpec, ConditionedDistribution, WeightedHistogram, MIN_NORMALIZATION_Z,
};

use crate::conditioning::ShotWeight;
use crate::pattern::ConditionWeight;

/// Per-record weight evaluated on the conditioning arm.
pub trait RecordWeight: Sync {
    fn weight(&self, x_a: f64, phi: f64) -> f64;
}

/// Keeps every record with unit weight.
#[derive(Debug, Clone, Copy, Default)]
pub struct Unweighted;

impl RecordWeight for Unweighted {
    #[inline]
    fn weight(&self, _: f64, _: f64) -> f64 {
        1.0
    }
}

impl RecordWeight for ShotWeight {
    #[inline]
    fn weight(&self, x_a: f64, _: f64) -> f64 {
        self.eval(x_a)
    }
}

impl RecordWeight for ConditionWeight {
    #[inline]
    fn weight(&self, x_a: f64, phi: f64) -> f64 {
        self.eval(x_a, phi)
    }
}

impl<F: Fn(f64, f64) -> f64 + Sync> RecordWeight for F {
    #[inline]
    fn weight(&self, x_a: f64, phi: f64) -> f64 {
        self(x_a, phi)
    }
}

/// Any of the supported weightings behind one concrete type.
#[derive(Debug, Clone)]
pub enum Weighting {
    Unit,
    Polynomial(ShotWeight),
    Pattern(ConditionWeight),
}

impl RecordWeight for Weighting {
    #[inline]
    fn weight(&self, x_a: f64, phi: f64) -> f64 {
        match self {
            Weighting::Unit => 1.0,
            Weighting::Polynomial(p) => p.eval(x_a),
            Weighting::Pattern(c) => c.eval(x_a, phi),
        }
    }
}
