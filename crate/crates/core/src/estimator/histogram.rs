use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::RecordWeight;
use crate::error::{Error, Result};
use crate::exact_sum::ExactSum;
use crate::sampler::{angle_of_index, HomodyneRecord};

/// Smallest `|sum w| / sqrt(sum w^2)` accepted as a usable normalization.
pub const MIN_NORMALIZATION_Z: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BinSpec {
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
}

impl Default for BinSpec {
    fn default() -> Self {
        Self {
            lo: -8.0,
            hi: 8.0,
            bins: 401,
        }
    }
}

impl BinSpec {
    pub fn new(lo: f64, hi: f64, bins: usize) -> Result<Self> {
        if !(lo < hi) || bins == 0 || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "bad histogram range [{lo}, {hi}] with {bins} bins"
            )));
        }
        Ok(Self { lo, hi, bins })
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.bins as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * self.width()
    }

    pub fn edge(&self, i: usize) -> f64 {
        self.lo + i as f64 * self.width()
    }

    /// `Err(false)` below range, `Err(true)` above.
    #[inline]
    pub fn locate(&self, x: f64) -> std::result::Result<usize, bool> {
        if x < self.lo {
            return Err(false);
        }
        let i = ((x - self.lo) / self.width()) as usize;
        if x >= self.hi || i >= self.bins {
            return Err(true);
        }
        Ok(i)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
struct Cell {
    count: u64,
    w: ExactSum,
    w2: ExactSum,
}

impl Cell {
    #[inline]
    fn add(&mut self, w: f64) {
        self.count += 1;
        self.w.add(w);
        self.w2.add(w * w);
    }

    fn merge(&mut self, other: &Cell) {
        self.count += other.count;
        self.w.merge(&other.w);
        self.w2.merge(&other.w2);
    }
}

/// Weighted histogram of `x_b` for one tomography angle.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleHistogram {
    cells: Vec<Cell>,
    under: Cell,
    over: Cell,
    total: Cell,
}

impl AngleHistogram {
    fn new(bins: usize) -> Self {
        Self {
            cells: vec![Cell::default(); bins],
            under: Cell::default(),
            over: Cell::default(),
            total: Cell::default(),
        }
    }

    fn merge(&mut self, other: &AngleHistogram) {
        for (a, b) in self.cells.iter_mut().zip(&other.cells) {
            a.merge(b);
        }
        self.under.merge(&other.under);
        self.over.merge(&other.over);
        self.total.merge(&other.total);
    }

    pub fn bin_weight(&self, i: usize) -> f64 {
        self.cells[i].w.value()
    }

    pub fn bin_weight_sq(&self, i: usize) -> f64 {
        self.cells[i].w2.value()
    }

    pub fn bin_count(&self, i: usize) -> u64 {
        self.cells[i].count
    }

    pub fn count(&self) -> u64 {
        self.total.count
    }

    /// Running total of all weights, overflow included.
    pub fn total_weight(&self) -> f64 {
        self.total.w.value()
    }

    pub fn total_weight_sq(&self) -> f64 {
        self.total.w2.value()
    }

    /// Records below and above the binned range.
    pub fn overflow_counts(&self) -> (u64, u64) {
        (self.under.count, self.over.count)
    }

    /// Exact sum of weights over bins and overflow cells.
    pub fn summed_bins(&self) -> f64 {
        let mut s = ExactSum::new();
        for c in self.cells.iter().chain([&self.under, &self.over]) {
            s.merge(&c.w);
        }
        s.value()
    }

    fn in_range(&self) -> (ExactSum, ExactSum) {
        let mut w = ExactSum::new();
        let mut w2 = ExactSum::new();
        for c in &self.cells {
            w.merge(&c.w);
            w2.merge(&c.w2);
        }
        (w, w2)
    }
}

/// Per-angle weighted histograms; merging is exact and order independent.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedHistogram {
    spec: BinSpec,
    angles: BTreeMap<u16, AngleHistogram>,
}

impl WeightedHistogram {
    pub fn new(spec: BinSpec) -> Self {
        Self {
            spec,
            angles: BTreeMap::new(),
        }
    }

    pub fn spec(&self) -> &BinSpec {
        &self.spec
    }

    /// Single pass over `records`. A non-finite weight aborts with the shard
    /// id and record index.
    pub fn accumulate<W: RecordWeight + ?Sized>(
        &mut self,
        records: &[HomodyneRecord],
        weight: &W,
        shard: u64,
    ) -> Result<()> {
        for (index, r) in records.iter().enumerate() {
            let w = weight.weight(r.x_a, r.phi);
            if !w.is_finite() {
                return Err(Error::NonFiniteWeight { shard, index });
            }
            self.add(r.theta_index, r.x_b, w);
        }
        Ok(())
    }

    #[inline]
    pub fn add(&mut self, theta_index: u16, x_b: f64, w: f64) {
        let bins = self.spec.bins;
        let h = self
            .angles
            .entry(theta_index)
            .or_insert_with(|| AngleHistogram::new(bins));
        match self.spec.locate(x_b) {
            Ok(i) => h.cells[i].add(w),
            Err(false) => h.under.add(w),
            Err(true) => h.over.add(w),
        }
        h.total.add(w);
    }

    pub fn merge(&mut self, other: &WeightedHistogram) -> Result<()> {
        if self.spec != other.spec {
            return Err(Error::InvalidParameter(
                "cannot merge histograms with different bins".into(),
            ));
        }
        for (&k, h) in &other.angles {
            match self.angles.get_mut(&k) {
                Some(mine) => mine.merge(h),
                None => {
                    self.angles.insert(k, h.clone());
                }
            }
        }
        Ok(())
    }

    pub fn angle(&self, theta_index: u16) -> Option<&AngleHistogram> {
        self.angles.get(&theta_index)
    }

    pub fn angle_indices(&self) -> Vec<u16> {
        self.angles.keys().copied().collect()
    }

    pub fn count(&self) -> u64 {
        self.angles.values().map(|h| h.count()).sum()
    }

    /// Normalized densities with delta-method errors for the ratio
    /// `sum_bin w / sum w`.
    pub fn conditioned_pdf(&self) -> Result<ConditionedDistribution> {
        let width = self.spec.width();
        let mut angles = BTreeMap::new();
        for (&k, h) in &self.angles {
            let (tw, tw2) = h.in_range();
            let t = tw.value();
            let t2 = tw2.value();
            if t == 0.0 || t.abs() < MIN_NORMALIZATION_Z * t2.sqrt() {
                return Err(Error::ZeroNormalization {
                    context: "conditioned histogram weight",
                    value: t,
                });
            }
            let mut density = Vec::with_capacity(self.spec.bins);
            let mut stderr = Vec::with_capacity(self.spec.bins);
            for c in &h.cells {
                let s = c.w.value();
                let s2 = c.w2.value();
                let r = s / t;
                let var = ((1.0 - 2.0 * r) * s2 + r * r * t2).max(0.0) / (t * t);
                density.push(r / width);
                stderr.push(var.sqrt() / width);
            }
            let counts = h.cells.iter().map(|c| c.count).collect();
            angles.insert(
                k,
                AngleDistribution {
                    density,
                    stderr,
                    counts,
                    total_weight: t,
                },
            );
        }
        Ok(ConditionedDistribution {
            spec: self.spec,
            angles,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
struct AngleDistribution {
    density: Vec<f64>,
    stderr: Vec<f64>,
    counts: Vec<u64>,
    total_weight: f64,
}

/// Per-angle conditioned density estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionedDistribution {
    spec: BinSpec,
    angles: BTreeMap<u16, AngleDistribution>,
}

impl ConditionedDistribution {
    pub fn spec(&self) -> &BinSpec {
        &self.spec
    }

    pub fn angle_indices(&self) -> Vec<u16> {
        self.angles.keys().copied().collect()
    }

    fn get(&self, theta_index: u16) -> Result<&AngleDistribution> {
        self.angles
            .get(&theta_index)
            .ok_or_else(|| Error::AngleCoverage(format!("no data at angle index {theta_index}")))
    }

    pub fn density(&self, theta_index: u16) -> Result<&[f64]> {
        Ok(&self.get(theta_index)?.density)
    }

    pub fn stderr(&self, theta_index: u16) -> Result<&[f64]> {
        Ok(&self.get(theta_index)?.stderr)
    }

    pub fn counts(&self, theta_index: u16) -> Result<&[u64]> {
        Ok(&self.get(theta_index)?.counts)
    }

    pub fn total_weight(&self, theta_index: u16) -> Result<f64> {
        Ok(self.get(theta_index)?.total_weight)
    }

    pub fn integral(&self, theta_index: u16) -> Result<f64> {
        let d = self.get(theta_index)?;
        let mut s = ExactSum::new();
        for v in &d.density {
            s.add(v * self.spec.width());
        }
        Ok(s.value())
    }

    /// Bins whose density lies below zero by more than `z` standard errors.
    pub fn significant_negativity(&self, theta_index: u16, z: f64) -> Result<Vec<usize>> {
        let d = self.get(theta_index)?;
        Ok((0..self.spec.bins)
            .filter(|&i| d.density[i] + z * d.stderr[i] < 0.0)
            .collect())
    }

    /// Reference pdf averaged over each bin (Simpson rule on the bin).
    pub fn bin_averages(&self, pdf: impl Fn(f64) -> f64) -> Vec<f64> {
        let w = self.spec.width();
        (0..self.spec.bins)
            .map(|i| {
                let a = self.spec.edge(i);
                let q = w / 4.0;
                (pdf(a)
                    + 4.0 * pdf(a + q)
                    + 2.0 * pdf(a + 2.0 * q)
                    + 4.0 * pdf(a + 3.0 * q)
                    + pdf(a + w))
                    / 12.0
            })
            .collect()
    }

    /// Chi-square of the estimate against bin-averaged reference values,
    /// over bins holding at least `min_count` records. Returns `(chi2, dof)`.
    pub fn chi_square(
        &self,
        theta_index: u16,
        reference: &[f64],
        min_count: u64,
    ) -> Result<(f64, usize)> {
        let d = self.get(theta_index)?;
        if reference.len() != self.spec.bins {
            return Err(Error::DimensionMismatch(reference.len(), self.spec.bins));
        }
        let mut chi2 = 0.0;
        let mut dof = 0;
        for i in 0..self.spec.bins {
            if d.counts[i] >= min_count && d.stderr[i] > 0.0 {
                chi2 += ((d.density[i] - reference[i]) / d.stderr[i]).powi(2);
                dof += 1;
            }
        }
        if dof == 0 {
            return Err(Error::InsufficientData { needed: 1, got: 0 });
        }
        Ok((chi2, dof))
    }

    /// Largest gap between the cumulative estimate and the cumulative
    /// reference, both evaluated at bin edges.
    pub fn ks_distance(&self, theta_index: u16, reference: &[f64]) -> Result<f64> {
        let d = self.get(theta_index)?;
        if reference.len() != self.spec.bins {
            return Err(Error::DimensionMismatch(reference.len(), self.spec.bins));
        }
        let w = self.spec.width();
        let (mut a, mut b, mut gap) = (0.0, 0.0, 0.0f64);
        for i in 0..self.spec.bins {
            a += d.density[i] * w;
            b += reference[i] * w;
            gap = gap.max((a - b).abs());
        }
        Ok(gap)
    }

    /// CSV rows `angle_deg,bin_center,density,stderr`.
    pub fn write_csv<W: Write>(&self, mut out: W, header: Option<&str>) -> Result<()> {
        if let Some(h) = header {
            writeln!(out, "{h}")?;
        }
        writeln!(out, "angle_deg,bin_center,density,stderr")?;
        for (&k, d) in &self.angles {
            let deg = angle_of_index(k).to_degrees();
            for i in 0..self.spec.bins {
                writeln!(
                    out,
                    "{deg:.1},{:.4},{:.9e},{:.9e}",
                    self.spec.center(i),
                    d.density[i],
                    d.stderr[i]
                )?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::Unweighted;

    fn rec(theta_index: u16, x_a: f64, x_b: f64) -> HomodyneRecord {
        HomodyneRecord {
            phi: 0.0,
            x_a,
            theta_index,
            x_b,
        }
    }

    #[test]
    fn bin_location() {
        let s = BinSpec::default();
        assert_eq!(s.locate(-8.0), Ok(0));
        assert_eq!(s.locate(0.0), Ok(200));
        assert_eq!(s.locate(-8.1), Err(false));
        assert_eq!(s.locate(8.0), Err(true));
        assert!((s.center(200)).abs() < 1e-12);
        assert!(BinSpec::new(1.0, 0.0, 4).is_err());
    }

    #[test]
    fn overflow_is_counted_and_totals_agree() {
        let mut h = WeightedHistogram::new(BinSpec::new(-1.0, 1.0, 4).unwrap());
        let recs = [
            rec(0, 1.0, -2.0),
            rec(0, 2.0, 0.1),
            rec(0, 3.0, 5.0),
            rec(1, 1.0, 0.9),
        ];
        h.accumulate(&recs, &|x: f64, _: f64| x, 0).unwrap();
        let a = h.angle(0).unwrap();
        assert_eq!(a.overflow_counts(), (1, 1));
        assert_eq!(a.count(), 3);
        assert_eq!(a.total_weight(), 6.0);
        assert_eq!(a.summed_bins(), a.total_weight());
        assert_eq!(a.bin_weight(2), 2.0);
        assert_eq!(a.bin_weight_sq(2), 4.0);
        assert_eq!(h.count(), 4);
    }

    #[test]
    fn nan_weight_aborts_with_location() {
        let mut h = WeightedHistogram::new(BinSpec::default());
        let recs = [rec(0, 1.0, 0.0), rec(0, f64::NAN, 0.0)];
        let err = h.accumulate(&recs, &|x: f64, _: f64| x, 7).unwrap_err();
        assert!(matches!(err, Error::NonFiniteWeight { shard: 7, index: 1 }));
    }

    #[test]
    fn unit_weight_pdf_and_errors() {
        let mut h = WeightedHistogram::new(BinSpec::new(0.0, 4.0, 4).unwrap());
        let recs: Vec<_> = [0.5, 0.5, 1.5, 2.5]
            .iter()
            .cycle()
            .take(16)
            .map(|&x| rec(0, 0.0, x))
            .collect();
        h.accumulate(&recs, &Unweighted, 0).unwrap();
        let d = h.conditioned_pdf().unwrap();
        assert_eq!(d.density(0).unwrap(), &[0.5, 0.25, 0.25, 0.0]);
        assert!((d.integral(0).unwrap() - 1.0).abs() < 1e-15);
        // binomial error sqrt(p (1 - p) / n)
        let se = d.stderr(0).unwrap();
        assert!((se[0] - (0.25f64 / 16.0).sqrt()).abs() < 1e-15);
        assert!((se[1] - (0.25 * 0.75 / 16.0f64).sqrt()).abs() < 1e-15);
        let mut csv = Vec::new();
        d.write_csv(&mut csv, Some("# config_hash=ab")).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(
            text.starts_with("# config_hash=ab\nangle_deg,bin_center,density,stderr\n0.0,0.5000,")
        );
    }

    #[test]
    fn vanishing_normalization_is_an_error() {
        let mut h = WeightedHistogram::new(BinSpec::default());
        let recs = [rec(0, 1.0, 0.0), rec(0, -1.0, 0.1)];
        h.accumulate(&recs, &|x: f64, _: f64| x, 0).unwrap();
        assert!(matches!(
            h.conditioned_pdf(),
            Err(Error::ZeroNormalization { .. })
        ));
    }

    #[test]
    fn merge_requires_same_bins() {
        let mut a = WeightedHistogram::new(BinSpec::default());
        let b = WeightedHistogram::new(BinSpec::new(-1.0, 1.0, 3).unwrap());
        assert!(a.merge(&b).is_err());
    }
}
