use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exec::Execution;

pub const MIN_REPLICATES: usize = 50;

#[derive(Debug, Clone)]
pub struct BootstrapResult {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub replicates: Vec<Vec<f64>>,
}

/// Multiplicities for one stratified resample: each stratum of `n` units
/// draws `n` units with replacement.
pub fn resample_counts<R: Rng>(strata: &[usize], rng: &mut R) -> Vec<Vec<u32>> {
    strata
        .iter()
        .map(|&n| {
            let mut counts = vec![0u32; n];
            for _ in 0..n {
                counts[rng.random_range(0..n)] += 1;
            }
            counts
        })
        .collect()
}

/// Reruns `stat` on `b` stratified resamples and reports the spread of each
/// output component. Replicate `i` uses its own stream of `seed`, so results
/// do not depend on scheduling.
pub fn bootstrap_errors<F>(
    strata: &[usize],
    b: usize,
    seed: u64,
    exec: Execution,
    stat: F,
) -> Result<BootstrapResult>
where
    F: Fn(&[Vec<u32>]) -> Result<Vec<f64>> + Sync,
{
    if b < MIN_REPLICATES {
        return Err(Error::InvalidParameter(format!(
            "bootstrap needs at least {MIN_REPLICATES} replicates, got {b}"
        )));
    }
    if strata.iter().any(|&n| n == 0) {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let replicates = exec
        .map_range(b, |i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            stat(&resample_counts(strata, &mut rng))
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let width = replicates[0].len();
    if replicates.iter().any(|r| r.len() != width) {
        return Err(Error::DimensionMismatch(
            width,
            replicates.iter().map(Vec::len).max().unwrap_or(0),
        ));
    }
    let nb = b as f64;
    let mean: Vec<f64> = (0..width)
        .map(|k| replicates.iter().map(|r| r[k]).sum::<f64>() / nb)
        .collect();
    let std = (0..width)
        .map(|k| {
            (replicates
                .iter()
                .map(|r| (r[k] - mean[k]).powi(2))
                .sum::<f64>()
                / (nb - 1.0))
                .sqrt()
        })
        .collect();
    Ok(BootstrapResult {
        mean,
        std,
        replicates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_preserve_stratum_sizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = resample_counts(&[5, 1, 40], &mut rng);
        assert_eq!(
            c.iter().map(|s| s.iter().sum::<u32>()).collect::<Vec<_>>(),
            vec![5, 1, 40]
        );
        assert_eq!(c[1], vec![1]);
    }

    #[test]
    fn mean_of_constant_data_has_no_spread() {
        let r = bootstrap_errors(&[10], 60, 1, Execution::Sequential, |c| {
            Ok(vec![
                c[0].iter().map(|&k| k as f64 * 2.0).sum::<f64>() / 10.0,
            ])
        })
        .unwrap();
        assert_eq!(r.std, vec![0.0]);
        assert_eq!(r.mean, vec![2.0]);
        assert!(bootstrap_errors(&[10], 49, 1, Execution::Sequential, |_| Ok(vec![])).is_err());
    }

    #[test]
    fn independent_of_execution_mode() {
        let data: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin()).collect();
        let stat = |c: &[Vec<u32>]| {
            Ok(vec![c[0]
                .iter()
                .zip(&data)
                .map(|(&k, x)| k as f64 * x)
                .sum::<f64>()])
        };
        let a = bootstrap_errors(&[50], 64, 9, Execution::Sequential, stat).unwrap();
        let b = bootstrap_errors(&[50], 64, 9, Execution::Parallel, stat).unwrap();
        assert_eq!(a.replicates, b.replicates);
    }
}
