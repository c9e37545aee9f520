use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use super::histogram::MIN_NORMALIZATION_Z;
use super::RecordWeight;
use crate::error::{Error, Result};
use crate::exact_sum::ExactSum;
use crate::exec::Execution;
use crate::fock::{DensityMatrix, C64};
use crate::pattern::PatternTable;
use crate::sampler::{angle_of_index, HomodyneRecord};

/// Records per accumulation block. Blocks are summed in plain floating
/// point and then combined exactly, so results do not depend on threading.
pub const BLOCK_RECORDS: usize = 8192;

/// Weighted pattern-function sums for one angle, lower-triangle order.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleMoments {
    pub n: u64,
    pub sw: f64,
    pub sw2: f64,
    pub swf: Vec<f64>,
    pub swf2: Vec<f64>,
    pub sw2f: Vec<f64>,
}

impl AngleMoments {
    pub fn zeros(dim: usize) -> Self {
        Self::with_len(dim * (dim + 1) / 2)
    }

    #[inline]
    fn add(&mut self, w: f64, f: &[f64]) {
        self.n += 1;
        self.sw += w;
        let w2 = w * w;
        self.sw2 += w2;
        for (k, &fk) in f.iter().enumerate() {
            let wf = w * fk;
            self.swf[k] += wf;
            self.swf2[k] += wf * fk * w;
            self.sw2f[k] += w2 * fk;
        }
    }

    /// Exact sum of several blocks.
    pub fn combine<'a>(blocks: impl IntoIterator<Item = &'a AngleMoments>) -> Option<AngleMoments> {
        let mut it = blocks.into_iter().peekable();
        let l = it.peek()?.swf.len();
        let mut n = 0;
        let mut sw = ExactSum::new();
        let mut sw2 = ExactSum::new();
        let mut swf = vec![ExactSum::new(); l];
        let mut swf2 = vec![ExactSum::new(); l];
        let mut sw2f = vec![ExactSum::new(); l];
        for b in it {
            n += b.n;
            sw.add(b.sw);
            sw2.add(b.sw2);
            for k in 0..l {
                swf[k].add(b.swf[k]);
                swf2[k].add(b.swf2[k]);
                sw2f[k].add(b.sw2f[k]);
            }
        }
        let v = |s: Vec<ExactSum>| s.iter().map(ExactSum::value).collect();
        Some(AngleMoments {
            n,
            sw: sw.value(),
            sw2: sw2.value(),
            swf: v(swf),
            swf2: v(swf2),
            sw2f: v(sw2f),
        })
    }

    /// Blocks repeated according to `counts`, as drawn by a bootstrap.
    pub fn resampled<'a>(
        blocks: impl IntoIterator<Item = &'a AngleMoments>,
        counts: &[u32],
    ) -> Option<AngleMoments> {
        let mut out: Option<AngleMoments> = None;
        for (b, &c) in blocks.into_iter().zip(counts) {
            if c == 0 {
                continue;
            }
            let o = out.get_or_insert_with(|| AngleMoments::with_len(b.swf.len()));
            let c64 = c as f64;
            o.n += b.n * c as u64;
            o.sw += c64 * b.sw;
            o.sw2 += c64 * b.sw2;
            for k in 0..b.swf.len() {
                o.swf[k] += c64 * b.swf[k];
                o.swf2[k] += c64 * b.swf2[k];
                o.sw2f[k] += c64 * b.sw2f[k];
            }
        }
        out
    }

    fn with_len(l: usize) -> Self {
        Self {
            n: 0,
            sw: 0.0,
            sw2: 0.0,
            swf: vec![0.0; l],
            swf2: vec![0.0; l],
            sw2f: vec![0.0; l],
        }
    }
}

/// Streams records into per-angle moments for several weightings at once,
/// evaluating the pattern functions once per record.
pub struct MomentAccumulator<'t> {
    dim: usize,
    table: &'t PatternTable,
    sets: Vec<BTreeMap<u16, AngleMoments>>,
    f: Vec<f64>,
}

impl<'t> MomentAccumulator<'t> {
    pub fn new(table: &'t PatternTable, dim: usize, weightings: usize) -> Result<Self> {
        if dim == 0 || dim > table.m_max() + 1 {
            return Err(Error::DimensionMismatch(dim, table.m_max() + 1));
        }
        Ok(Self {
            dim,
            table,
            sets: vec![BTreeMap::new(); weightings],
            f: vec![0.0; dim * (dim + 1) / 2],
        })
    }

    pub fn add<W: RecordWeight + ?Sized>(
        &mut self,
        records: &[HomodyneRecord],
        weights: &[&W],
        shard: u64,
    ) -> Result<()> {
        debug_assert_eq!(weights.len(), self.sets.len());
        let dim = self.dim;
        for (index, r) in records.iter().enumerate() {
            self.table.eval_lower(r.x_b, dim, &mut self.f);
            for (set, w) in self.sets.iter_mut().zip(weights) {
                let w = w.weight(r.x_a, r.phi);
                if !w.is_finite() {
                    return Err(Error::NonFiniteWeight { shard, index });
                }
                set.entry(r.theta_index)
                    .or_insert_with(|| AngleMoments::zeros(dim))
                    .add(w, &self.f);
            }
        }
        Ok(())
    }

    pub fn finish(self) -> Vec<BTreeMap<u16, AngleMoments>> {
        self.sets
    }
}

/// Reconstructed matrix before any physicality constraint.
#[derive(Debug, Clone)]
pub struct DensityEstimate {
    pub matrix: DMatrix<C64>,
    pub stderr_re: DMatrix<f64>,
    pub stderr_im: DMatrix<f64>,
    pub records: u64,
    pub warnings: Vec<String>,
}

impl DensityEstimate {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn to_density(&self) -> Result<DensityMatrix> {
        DensityMatrix::from_matrix(self.matrix.clone())
    }
}

/// Checks that the angle set averages away every phase harmonic the
/// reconstruction can couple to. Returns warnings for marginal settings.
pub fn angle_coverage(indices: &[u16], dim: usize) -> Result<Vec<String>> {
    if indices.is_empty() {
        return Err(Error::AngleCoverage("no tomography angles".into()));
    }
    let k = indices.len() as f64;
    for l in (2..=2 * dim.saturating_sub(1)).step_by(2) {
        let s: C64 = indices
            .iter()
            .map(|&i| C64::from_polar(1.0, l as f64 * angle_of_index(i)))
            .sum();
        if s.norm() / k > 1e-9 {
            return Err(Error::AngleCoverage(format!(
                "{} angles do not resolve harmonic {l} needed for dimension {dim}",
                indices.len()
            )));
        }
    }
    let mut warnings = Vec::new();
    if dim > 11 {
        warnings.push(format!(
            "reconstruction dimension {dim} exceeds what {} angles reliably support",
            indices.len()
        ));
    }
    Ok(warnings)
}

/// `rho_mn = mean_theta e^{i(m-n) theta} <w f_mn>_theta / <w>`, where the
/// normalization `<w>` is pooled over all angles since the conditioning
/// probability does not depend on the tomography angle. Errors follow the
/// delta method on per-record residuals.
pub fn estimate_density(
    moments: &BTreeMap<u16, AngleMoments>,
    dim: usize,
) -> Result<DensityEstimate> {
    estimate_density_gated(moments, dim, MIN_NORMALIZATION_Z)
}

/// [`estimate_density`] with the normalization required to exceed `min_z`
/// of its own standard error. Bootstrap replicates pass `0.0`: a resample
/// may dip below the gate without the point estimate being in doubt.
pub fn estimate_density_gated(
    moments: &BTreeMap<u16, AngleMoments>,
    dim: usize,
    min_z: f64,
) -> Result<DensityEstimate> {
    let indices: Vec<u16> = moments.keys().copied().collect();
    let warnings = angle_coverage(&indices, dim)?;
    let k = indices.len() as f64;
    let len = dim * (dim + 1) / 2;
    let mut records = 0;
    let (mut sw, mut sw2) = (ExactSum::new(), ExactSum::new());
    for a in moments.values() {
        if a.swf.len() != len {
            return Err(Error::DimensionMismatch(a.swf.len(), len));
        }
        if a.n == 0 {
            return Err(Error::InsufficientData { needed: 1, got: 0 });
        }
        records += a.n;
        sw.add(a.sw);
        sw2.add(a.sw2);
    }
    let (sw, sw2) = (sw.value(), sw2.value());
    if sw == 0.0 || sw.abs() < min_z * sw2.sqrt() {
        return Err(Error::ZeroNormalization {
            context: "reconstruction weight",
            value: sw,
        });
    }
    let total = records as f64;
    let norm = sw / total;
    let mut matrix = DMatrix::<C64>::zeros(dim, dim);
    for (&idx, a) in moments {
        let theta = angle_of_index(idx);
        for m in 0..dim {
            for n in 0..=m {
                let alpha = C64::from_polar(1.0 / (k * a.n as f64), (m - n) as f64 * theta);
                matrix[(m, n)] += alpha * a.swf[m * (m + 1) / 2 + n] / norm;
            }
        }
    }
    let mut var_re = DMatrix::<f64>::zeros(dim, dim);
    let mut var_im = DMatrix::<f64>::zeros(dim, dim);
    for (&idx, a) in moments {
        let theta = angle_of_index(idx);
        let nt = a.n as f64;
        for m in 0..dim {
            for n in 0..=m {
                let t = m * (m + 1) / 2 + n;
                let alpha = C64::from_polar(1.0 / (k * nt), (m - n) as f64 * theta);
                let rho = matrix[(m, n)];
                // residual z = c w f - (rho / N) w for each record of this angle
                let part = |c: f64, r: f64| {
                    let g = r / total;
                    let sz2 = c * c * a.swf2[t] - 2.0 * c * g * a.sw2f[t] + g * g * a.sw2;
                    let sz = c * a.swf[t] - g * a.sw;
                    (sz2 - sz * sz / nt).max(0.0)
                };
                var_re[(m, n)] += part(alpha.re, rho.re);
                var_im[(m, n)] += part(alpha.im, rho.im);
            }
        }
    }
    let scale = norm * norm;
    for m in 0..dim {
        for n in 0..m {
            matrix[(n, m)] = matrix[(m, n)].conj();
            var_re[(n, m)] = var_re[(m, n)];
            var_im[(n, m)] = var_im[(m, n)];
        }
        matrix[(m, m)].im = 0.0;
        var_im[(m, m)] = 0.0;
    }
    Ok(DensityEstimate {
        matrix,
        stderr_re: var_re.map(|v| (v / scale).sqrt()),
        stderr_im: var_im.map(|v| (v / scale).sqrt()),
        records,
        warnings,
    })
}

/// Pattern-function reconstruction of `rho_mn`, `m, n < dim`, optionally
/// conditioned by a per-record weight on the ancilla arm.
pub fn density_from_quadratures<W: RecordWeight + ?Sized>(
    records: &[HomodyneRecord],
    weight: Option<&W>,
    table: &PatternTable,
    dim: usize,
    exec: Execution,
) -> Result<DensityEstimate> {
    let chunks: Vec<&[HomodyneRecord]> = records.chunks(BLOCK_RECORDS).collect();
    let blocks = exec.map(&chunks, |chunk| -> Result<BTreeMap<u16, AngleMoments>> {
        let mut acc = MomentAccumulator::new(table, dim, 1)?;
        match weight {
            Some(w) => acc.add(chunk, &[w], 0)?,
            None => acc.add::<super::Unweighted>(chunk, &[&super::Unweighted], 0)?,
        }
        Ok(acc.finish().pop().unwrap_or_default())
    });
    let blocks = blocks.into_iter().collect::<Result<Vec<_>>>()?;
    let mut keys: Vec<u16> = blocks.iter().flat_map(|b| b.keys().copied()).collect();
    keys.sort_unstable();
    keys.dedup();
    let merged: BTreeMap<u16, AngleMoments> = keys
        .into_iter()
        .filter_map(|k| {
            AngleMoments::combine(blocks.iter().filter_map(|b| b.get(&k))).map(|m| (k, m))
        })
        .collect();
    estimate_density(&merged, dim)
}

/// Euclidean projection of a vector onto the probability simplex.
fn simplex_projection(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut shift = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumulative += uj;
        let t = (cumulative - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            shift = t;
        }
    }
    v.iter().map(|&x| (x - shift).max(0.0)).collect()
}

/// Nearest unit-trace positive semidefinite matrix in Frobenius norm.
pub fn project_to_physical(rho: &DensityMatrix) -> DensityMatrix {
    let eig = rho.elements().clone().symmetric_eigen();
    let lambda: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let projected = simplex_projection(&lambda);
    let v = &eig.eigenvectors;
    let d = DVector::from_iterator(projected.len(), projected.iter().map(|&p| C64::new(p, 0.0)));
    let mut m = v * DMatrix::from_diagonal(&d) * v.adjoint();
    // remove rounding asymmetry
    let mt = m.adjoint();
    m = (m + mt).map(|z| z * 0.5);
    DensityMatrix::from_matrix(m).expect("projection is Hermitian")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn water_filling_example() {
        let p = project_to_physical(&DensityMatrix::from_diagonal(&[1.1, -0.1]));
        assert_relative_eq!(p.get(0, 0).re, 1.0, epsilon = 1e-14);
        assert_relative_eq!(p.get(1, 1).re, 0.0, epsilon = 1e-14);
        assert_eq!(simplex_projection(&[0.5, 0.5]), vec![0.5, 0.5]);
        assert_eq!(simplex_projection(&[2.0, 0.0, 0.0]), vec![1.0, 0.0, 0.0]);
        let s = simplex_projection(&[0.3, 0.3, 0.3]);
        assert!(s.iter().all(|&x| (x - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn coverage_rules() {
        let all: Vec<u16> = (0..12).collect();
        assert!(angle_coverage(&all, 11).unwrap().is_empty());
        assert_eq!(angle_coverage(&all, 12).unwrap().len(), 1);
        assert!(angle_coverage(&all, 13).is_err());
        assert!(angle_coverage(&[0, 3, 6], 3).is_err());
        assert!(angle_coverage(&[0, 6], 2).is_ok());
        assert!(angle_coverage(&[], 2).is_err());
    }

    #[test]
    fn combine_and_resample() {
        let mut a = AngleMoments::zeros(2);
        a.add(2.0, &[1.0, 0.5, 0.25]);
        let mut b = AngleMoments::zeros(2);
        b.add(-1.0, &[3.0, 0.0, 1.0]);
        let c = AngleMoments::combine([&a, &b]).unwrap();
        assert_eq!(c.n, 2);
        assert_eq!(c.sw, 1.0);
        assert_eq!(c.swf, vec![-1.0, 1.0, -0.5]);
        assert_eq!(c.sw2f, vec![7.0, 2.0, 2.0]);
        let r = AngleMoments::resampled([&a, &b], &[2, 0]).unwrap();
        assert_eq!(r.n, 2);
        assert_eq!(r.swf, vec![4.0, 2.0, 1.0]);
        assert!(AngleMoments::resampled([&a, &b], &[0, 0]).is_none());
    }
}
