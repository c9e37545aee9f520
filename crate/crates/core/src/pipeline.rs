//! Orchestration behind the command-line driver: simulation to disk,
//! streaming reconstruction, comparison, figure bundles and a self test.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;
use serde_json::json;

use crate::analysis::{wigner_at, wigner_from_density, StateMetrics, POPULATION_N_MAX};
use crate::conditioning::{moment_to_number, number_to_moment, subtraction_polynomial, MAX_DEGREE};
use crate::config::{ConditioningSpec, RunConfig};
use crate::error::{Error, Result};
use crate::estimator::{
    bootstrap_errors, estimate_density, estimate_density_gated, project_to_physical, AngleMoments,
    ConditionedDistribution, DensityEstimate, MomentAccumulator, WeightedHistogram, Weighting,
    BLOCK_RECORDS,
};
use crate::exec::Execution;
use crate::fock::{condition_oracle, model_state, AncillaFilter, DensityMatrix, Mode, C64};
use crate::pattern::{build_wavefunctions, weight_function, PatternTable, DEFAULT_M};
use crate::records::{RecordHeader, RecordReader, RecordWriter};
use crate::sampler::{sample_shard, GaussianModel, HomodyneRecord, SHARD_SIZE};

pub const RECORD_FILE: &str = "records.prht";
pub const SIDECAR_FILE: &str = "records.json";
pub const SUMMARY_FILE: &str = "reconstruction.json";

/// Shards sampled per batch; bounds peak memory at about 32 MB of records.
const BATCH_SHARDS: usize = 16;

fn staged<T>(stage: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| e.in_stage(stage))
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut f, value)?;
    writeln!(f)?;
    f.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulationSummary {
    pub path: PathBuf,
    pub sidecar: PathBuf,
    pub records: u64,
    pub config_hash: String,
}

/// Samples the configured schedule into a record file plus a JSON sidecar.
pub fn simulate(cfg: &RunConfig, out: &Path, exec: Execution) -> Result<SimulationSummary> {
    staged("config", cfg.validate())?;
    let model = cfg.gaussian_model()?;
    fs::create_dir_all(out)?;
    let path = out.join(RECORD_FILE);
    let header = RecordHeader {
        seed: cfg.seed,
        model,
        n_records: cfg.schedule.total_records(),
    };
    let mut writer = staged("simulate", RecordWriter::create(&path, &header))?;
    for batch in cfg.schedule.shards(SHARD_SIZE).chunks(BATCH_SHARDS) {
        for records in exec.map(batch, |s| sample_shard(&model, s, cfg.seed)) {
            staged("simulate", writer.write(&records))?;
        }
    }
    staged("simulate", writer.finish(Some(&cfg.hash())))?;
    let sidecar = out.join(SIDECAR_FILE);
    write_json(
        &sidecar,
        &json!({
            "config_hash": cfg.hash_hex(),
            "records": header.n_records,
            "seed": cfg.seed,
            "model": model,
            "config": cfg,
        }),
    )?;
    Ok(SimulationSummary {
        path,
        sidecar,
        records: header.n_records,
        config_hash: cfg.hash_hex(),
    })
}

/// Where reconstruction reads its records from.
#[derive(Debug, Clone)]
pub enum RecordSource {
    /// Sample on the fly from the configured model; nothing is stored.
    Model,
    File(PathBuf),
}

/// One accumulation unit: at most [`BLOCK_RECORDS`] records of one angle.
/// Units are the resampling atoms of the bootstrap.
#[derive(Debug, Clone)]
struct Unit {
    theta: u16,
    moments: Vec<AngleMoments>,
}

/// Everything the streaming pass keeps.
pub struct Accumulated {
    units: Vec<Unit>,
    histograms: Vec<WeightedHistogram>,
    pub records: u64,
}

impl Accumulated {
    /// Per-angle moments of weighting `wi` over all units.
    pub fn moments(&self, wi: usize) -> BTreeMap<u16, AngleMoments> {
        let mut by_angle: BTreeMap<u16, Vec<&AngleMoments>> = BTreeMap::new();
        for u in &self.units {
            by_angle.entry(u.theta).or_default().push(&u.moments[wi]);
        }
        by_angle
            .into_iter()
            .filter_map(|(k, v)| AngleMoments::combine(v).map(|m| (k, m)))
            .collect()
    }

    pub fn histogram(&self, wi: usize) -> &WeightedHistogram {
        &self.histograms[wi]
    }

    pub fn unit_count(&self) -> usize {
        self.units.len()
    }

    /// Units grouped by angle, in ascending angle order.
    fn strata(&self, wi: usize) -> Vec<Vec<&AngleMoments>> {
        let mut by_angle: BTreeMap<u16, Vec<&AngleMoments>> = BTreeMap::new();
        for u in &self.units {
            by_angle.entry(u.theta).or_default().push(&u.moments[wi]);
        }
        by_angle.into_values().collect()
    }
}

fn process_chunk(
    chunk: &[HomodyneRecord],
    id: u64,
    table: &PatternTable,
    dim: usize,
    weights: &[&Weighting],
    bins: crate::estimator::BinSpec,
) -> Result<(Unit, Vec<WeightedHistogram>)> {
    let mut acc = MomentAccumulator::new(table, dim, weights.len())?;
    acc.add(chunk, weights, id)?;
    let theta = chunk[0].theta_index;
    let moments = acc
        .finish()
        .into_iter()
        .map(|mut m| m.remove(&theta).unwrap_or_else(|| AngleMoments::zeros(dim)))
        .collect();
    let mut hists = Vec::with_capacity(weights.len());
    for w in weights {
        let mut h = WeightedHistogram::new(bins);
        h.accumulate(chunk, *w, id)?;
        hists.push(h);
    }
    Ok((Unit { theta, moments }, hists))
}

/// Splits records into single-angle chunks of at most [`BLOCK_RECORDS`].
fn angle_chunks(records: &[HomodyneRecord]) -> Vec<&[HomodyneRecord]> {
    let mut out = Vec::new();
    let mut start = 0;
    while start < records.len() {
        let theta = records[start].theta_index;
        let mut end = start;
        while end < records.len()
            && end - start < BLOCK_RECORDS
            && records[end].theta_index == theta
        {
            end += 1;
        }
        out.push(&records[start..end]);
        start = end;
    }
    out
}

/// Streams every record once through all weightings.
pub fn accumulate(
    cfg: &RunConfig,
    source: &RecordSource,
    table: &PatternTable,
    weights: &[&Weighting],
    exec: Execution,
) -> Result<Accumulated> {
    let dim = cfg.reconstruction.dim;
    let bins = cfg.reconstruction.histogram;
    let mut acc = Accumulated {
        units: Vec::new(),
        histograms: vec![WeightedHistogram::new(bins); weights.len()],
        records: 0,
    };
    let absorb = |chunks: Vec<&[HomodyneRecord]>, acc: &mut Accumulated| -> Result<()> {
        let first = acc.units.len() as u64;
        let ids: Vec<usize> = (0..chunks.len()).collect();
        let results = exec.map(&ids, |&i| {
            process_chunk(chunks[i], first + i as u64, table, dim, weights, bins)
        });
        for (r, chunk) in results.into_iter().zip(&chunks) {
            let (unit, hists) = r?;
            for (total, h) in acc.histograms.iter_mut().zip(&hists) {
                total.merge(h)?;
            }
            acc.records += chunk.len() as u64;
            acc.units.push(unit);
        }
        Ok(())
    };
    match source {
        RecordSource::Model => {
            let model = cfg.gaussian_model()?;
            for batch in cfg.schedule.shards(SHARD_SIZE).chunks(BATCH_SHARDS) {
                let sampled = exec.map(batch, |s| sample_shard(&model, s, cfg.seed));
                let chunks: Vec<&[HomodyneRecord]> =
                    sampled.iter().flat_map(|r| angle_chunks(r)).collect();
                absorb(chunks, &mut acc)?;
            }
        }
        RecordSource::File(path) => {
            let mut reader = RecordReader::open(path)?;
            loop {
                let block = reader.next_block(BATCH_SHARDS * SHARD_SIZE)?;
                if block.is_empty() {
                    break;
                }
                absorb(angle_chunks(&block), &mut acc)?;
            }
        }
    }
    if acc.records == 0 {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    Ok(acc)
}

/// Pattern table covering both the reconstruction and any pattern weighting.
pub fn pattern_table(cfg: &RunConfig) -> Result<Arc<PatternTable>> {
    let r = &cfg.reconstruction;
    let mut m_max = DEFAULT_M.max(r.dim - 1);
    for c in &cfg.conditioning {
        match c {
            ConditioningSpec::Pattern { n } => m_max = m_max.max(*n),
            ConditioningSpec::PatternCoefficients { re, .. } => {
                m_max = m_max.max(re.len().saturating_sub(1))
            }
            _ => {}
        }
    }
    let w = build_wavefunctions(m_max, r.pattern_x_max, r.pattern_step)?;
    Ok(Arc::new(PatternTable::build(&w)?))
}

/// Per-record weight for a conditioning choice.
pub fn weighting(spec: &ConditioningSpec, table: &Arc<PatternTable>) -> Result<Weighting> {
    if let Some(p) = spec.number_polynomial()? {
        return Ok(Weighting::Polynomial(number_to_moment(&p)?.evaluator()));
    }
    if let Some(c) = spec.condition_spec()? {
        return Ok(Weighting::Pattern(weight_function(&c, table.clone())?));
    }
    Ok(Weighting::Unit)
}

/// Exact conditioned state of the measurement model, normalized, or `None`
/// for an unconditioned spec.
pub fn oracle_state(
    model: &GaussianModel,
    spec: &ConditioningSpec,
    n_trunc: usize,
) -> Result<DensityMatrix> {
    let rho_ab = model_state(model, n_trunc)?;
    let d = n_trunc + 1;
    let filter = if let Some(p) = spec.number_polynomial()? {
        AncillaFilter::Diagonal(crate::conditioning::fock_weights(&p, n_trunc))
    } else if let Some(c) = spec.condition_spec()? {
        let m = c.matrix();
        let padded = nalgebra::DMatrix::from_fn(d, d, |i, j| {
            if i < m.nrows() && j < m.ncols() {
                m[(i, j)]
            } else {
                C64::new(0.0, 0.0)
            }
        });
        AncillaFilter::Operator(padded)
    } else {
        return rho_ab.reduced(Mode::B).normalized();
    };
    let (rho, _) = condition_oracle(&rho_ab, &filter)?;
    rho.normalized()
}

#[derive(Debug, Clone, Serialize)]
pub struct BootstrapSummary {
    pub replicates: usize,
    pub w_origin_stderr: f64,
    pub population_stderr: Vec<f64>,
    pub purity_stderr: f64,
    /// Spread of `W(0,0)` of the linear estimate before projection. The
    /// projection clips noise, so this is the one that tracks estimator
    /// variance when the signal is weak.
    pub w_origin_raw_stderr: f64,
}

/// Outcome for one conditioning choice.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub label: String,
    pub spec: ConditioningSpec,
    pub estimate: DensityEstimate,
    pub state: DensityMatrix,
    pub reference: Option<DensityMatrix>,
    pub metrics: StateMetrics,
    pub bootstrap: Option<BootstrapSummary>,
    pub distribution: Option<ConditionedDistribution>,
    pub normalization_z: f64,
    pub warnings: Vec<String>,
}

/// Bootstrap statistics of a projected reconstruction: `W(0,0)`, the
/// populations, the purity, then `W(0,0)` of the unprojected estimate.
fn projected_statistics(moments: &BTreeMap<u16, AngleMoments>, dim: usize) -> Result<Vec<f64>> {
    let est = estimate_density_gated(moments, dim, 0.0)?.to_density()?;
    let state = project_to_physical(&est);
    let mut out = vec![wigner_at(&state, 0.0, 0.0)];
    out.extend(crate::analysis::photon_populations(
        &state,
        POPULATION_N_MAX,
    ));
    out.push(state.purity());
    out.push(wigner_at(&est, 0.0, 0.0));
    Ok(out)
}

/// Finishes weighting `wi` of an accumulation: density estimate, physical
/// projection, metrics and bootstrap errors.
pub fn analyse(
    cfg: &RunConfig,
    acc: &Accumulated,
    wi: usize,
    spec: &ConditioningSpec,
    model: &GaussianModel,
    exec: Execution,
) -> Result<Reconstruction> {
    let dim = cfg.reconstruction.dim;
    let label = spec.label();
    let mut warnings = Vec::new();
    let moments = acc.moments(wi);
    let (sw, sw2) = moments
        .values()
        .fold((0.0, 0.0), |(a, b), m| (a + m.sw, b + m.sw2));
    let normalization_z = sw / sw2.sqrt();
    let estimate = staged("density", estimate_density(&moments, dim))?;
    warnings.extend(estimate.warnings.iter().cloned());
    let state = project_to_physical(&staged("density", estimate.to_density())?);
    let distribution = match acc.histogram(wi).conditioned_pdf() {
        Ok(d) => Some(d),
        Err(e) => {
            warnings.push(format!("conditioned distribution unavailable: {e}"));
            None
        }
    };
    let reference = match oracle_state(model, spec, cfg.reconstruction.n_trunc) {
        Ok(r) => Some(staged("reference", r.resized(dim).normalized())?),
        Err(e) => {
            warnings.push(format!("no exact reference: {e}"));
            None
        }
    };
    let bootstrap = if cfg.reconstruction.bootstrap > 0 {
        let strata = acc.strata(wi);
        let sizes: Vec<usize> = strata.iter().map(Vec::len).collect();
        let keys: Vec<u16> = moments.keys().copied().collect();
        let result = staged(
            "bootstrap",
            bootstrap_errors(
                &sizes,
                cfg.reconstruction.bootstrap,
                cfg.seed ^ wi as u64,
                exec,
                |counts| {
                    let resampled: BTreeMap<u16, AngleMoments> = keys
                        .iter()
                        .zip(&strata)
                        .zip(counts)
                        .filter_map(|((&k, units), c)| {
                            AngleMoments::resampled(units.iter().copied(), c).map(|m| (k, m))
                        })
                        .collect();
                    projected_statistics(&resampled, dim)
                },
            ),
        )?;
        let purity = result.std.len() - 2;
        Some(BootstrapSummary {
            replicates: cfg.reconstruction.bootstrap,
            w_origin_stderr: result.std[0],
            population_stderr: result.std[1..purity].to_vec(),
            purity_stderr: result.std[purity],
            w_origin_raw_stderr: result.std[purity + 1],
        })
    } else {
        None
    };
    let metrics = staged(
        "analysis",
        StateMetrics::compute(
            &state,
            reference.as_ref(),
            bootstrap.as_ref().map(|b| b.w_origin_stderr),
        ),
    )?;
    Ok(Reconstruction {
        label,
        spec: spec.clone(),
        estimate,
        state,
        reference,
        metrics,
        bootstrap,
        distribution,
        normalization_z,
        warnings,
    })
}

/// All conditioning choices of one reconstruction run.
pub struct ReconstructionRun {
    pub config_hash: String,
    pub records: u64,
    pub clamped_evaluations: u64,
    pub outcomes: Vec<(String, Result<Reconstruction>)>,
    pub comparisons: Vec<Comparison>,
}

impl ReconstructionRun {
    /// First failure, for the process exit status.
    pub fn first_error(&self) -> Option<&Error> {
        self.outcomes.iter().find_map(|(_, r)| r.as_ref().err())
    }

    pub fn get(&self, label: &str) -> Option<&Reconstruction> {
        self.outcomes
            .iter()
            .find(|(l, _)| l == label)
            .and_then(|(_, r)| r.as_ref().ok())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Comparison {
    pub a: String,
    pub b: String,
    pub fidelity: f64,
}

/// Polynomial and pattern reconstructions of the same photon number,
/// compared pairwise.
fn paired_comparisons(outcomes: &[(String, Result<Reconstruction>)]) -> Result<Vec<Comparison>> {
    let mut out = Vec::new();
    for (_, a) in outcomes {
        let Ok(a) = a else { continue };
        let ConditioningSpec::Polynomial { k, .. } = a.spec else {
            continue;
        };
        for (_, b) in outcomes {
            let Ok(b) = b else { continue };
            if b.spec == (ConditioningSpec::Pattern { n: k }) {
                out.push(Comparison {
                    a: a.label.clone(),
                    b: b.label.clone(),
                    fidelity: crate::analysis::fidelity(&a.state, &b.state)?,
                });
            }
        }
    }
    Ok(out)
}

/// Streams the records once and reconstructs every configured conditioning.
pub fn reconstruct(
    cfg: &RunConfig,
    source: &RecordSource,
    exec: Execution,
) -> Result<ReconstructionRun> {
    staged("config", cfg.validate())?;
    if cfg.conditioning.is_empty() {
        return Err(Error::Config("no conditioning specified".into()));
    }
    let model = match source {
        RecordSource::Model => cfg.gaussian_model()?,
        RecordSource::File(path) => staged("records", RecordReader::open(path))?.header().model,
    };
    let table = staged("pattern functions", pattern_table(cfg))?;
    let weights = cfg
        .conditioning
        .iter()
        .map(|c| weighting(c, &table))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.in_stage("conditioning"))?;
    let refs: Vec<&Weighting> = weights.iter().collect();
    table.reset_clamp_counter();
    let acc = staged("accumulate", accumulate(cfg, source, &table, &refs, exec))?;
    let clamped_evaluations = table.clamped_evaluations();
    let outcomes: Vec<(String, Result<Reconstruction>)> = cfg
        .conditioning
        .iter()
        .enumerate()
        .map(|(wi, spec)| {
            let label = spec.label();
            let r =
                analyse(cfg, &acc, wi, spec, &model, exec).map_err(|e| e.in_stage(label.clone()));
            (label, r)
        })
        .collect();
    let comparisons = paired_comparisons(&outcomes)?;
    Ok(ReconstructionRun {
        config_hash: cfg.hash_hex(),
        records: acc.records,
        clamped_evaluations,
        outcomes,
        comparisons,
    })
}

fn matrix_rows(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn tagged_density(rho: &DensityMatrix, hash: &str, label: &str) -> serde_json::Value {
    let mut v = rho.to_json();
    v["config_hash"] = json!(hash);
    v["label"] = json!(label);
    v
}

/// Writes one directory per conditioning plus a run summary.
pub fn write_reconstruction(
    run: &ReconstructionRun,
    cfg: &RunConfig,
    out: &Path,
    exec: Execution,
) -> Result<PathBuf> {
    fs::create_dir_all(out)?;
    let hash = &run.config_hash;
    let header = format!("# config_hash={hash}");
    let mut labels = Vec::new();
    for (label, outcome) in &run.outcomes {
        let dir = out.join(label);
        match outcome {
            Ok(r) => {
                fs::create_dir_all(&dir)?;
                write_json(
                    &dir.join("density.json"),
                    &tagged_density(&r.state, hash, label),
                )?;
                let mut raw = tagged_density(
                    &DensityMatrix::from_matrix(r.estimate.matrix.clone())?,
                    hash,
                    label,
                );
                raw["stderr_re"] = json!(matrix_rows(&r.estimate.stderr_re));
                raw["stderr_im"] = json!(matrix_rows(&r.estimate.stderr_im));
                raw["records"] = json!(r.estimate.records);
                write_json(&dir.join("density_raw.json"), &raw)?;
                if let Some(d) = &r.distribution {
                    d.write_csv(
                        BufWriter::new(File::create(dir.join("conditioned_pdf.csv"))?),
                        Some(&header),
                    )?;
                }
                let grid = staged(
                    "wigner",
                    wigner_from_density(&r.state, &cfg.reconstruction.wigner, exec),
                )?;
                grid.write_csv(
                    BufWriter::new(File::create(dir.join("wigner.csv"))?),
                    Some(&header),
                )?;
                write_json(
                    &dir.join("metrics.json"),
                    &json!({
                        "config_hash": hash,
                        "label": label,
                        "conditioning": r.spec,
                        "fidelity": r.metrics.fidelity,
                        "populations": r.metrics.populations,
                        "w_origin": r.metrics.w_origin,
                        "w_origin_stderr": r.metrics.w_origin_stderr,
                        "w_origin_significance": r.metrics.w_origin_significance,
                        "purity": r.metrics.purity,
                        "bootstrap": r.bootstrap,
                        "normalization_z": r.normalization_z,
                        "records": r.estimate.records,
                        "warnings": r.warnings,
                    }),
                )?;
                labels.push(json!({"label": label, "status": "ok"}));
            }
            Err(e) => {
                labels.push(json!({"label": label, "status": "error", "error": e.to_string()}))
            }
        }
    }
    let summary = out.join(SUMMARY_FILE);
    write_json(
        &summary,
        &json!({
            "config_hash": hash,
            "records": run.records,
            "clamped_pattern_evaluations": run.clamped_evaluations,
            "conditioning": labels,
            "comparisons": run.comparisons,
        }),
    )?;
    Ok(summary)
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    pub a: PathBuf,
    pub b: PathBuf,
    pub a_config_hash: Option<String>,
    pub b_config_hash: Option<String>,
    pub fidelity: f64,
}

/// Loads a density JSON, or `density.json` inside a directory.
pub fn load_density(path: &Path) -> Result<(DensityMatrix, Option<String>)> {
    let file = if path.is_dir() {
        path.join("density.json")
    } else {
        path.to_path_buf()
    };
    let value: serde_json::Value =
        serde_json::from_reader(std::io::BufReader::new(File::open(&file)?))?;
    let hash = value
        .get("config_hash")
        .and_then(|h| h.as_str())
        .map(str::to_owned);
    Ok((DensityMatrix::from_json(&value)?, hash))
}

/// Fidelity between two stored reconstructions.
pub fn compare(a: &Path, b: &Path) -> Result<CompareReport> {
    let (ra, ha) = staged("load", load_density(a))?;
    let (rb, hb) = staged("load", load_density(b))?;
    let fidelity = staged("fidelity", crate::analysis::fidelity(&ra, &rb))?;
    Ok(CompareReport {
        a: a.to_path_buf(),
        b: b.to_path_buf(),
        a_config_hash: ha,
        b_config_hash: hb,
        fidelity,
    })
}

/// `j_max` used for each photon number in the figure bundles.
pub fn default_j_max(k: usize) -> usize {
    (k + 2).clamp(3, MAX_DEGREE)
}

/// Conditioning list reproducing the Wigner panel analogues.
pub fn figure_conditioning() -> Vec<ConditioningSpec> {
    vec![
        ConditioningSpec::None,
        ConditioningSpec::Pattern { n: 0 },
        ConditioningSpec::Polynomial { k: 1, j_max: 3 },
        ConditioningSpec::Pattern { n: 1 },
        ConditioningSpec::Polynomial { k: 2, j_max: 3 },
        ConditioningSpec::Pattern { n: 2 },
    ]
}

/// Writes polynomial-versus-pattern-function curves, both scaled to one at
/// the origin, for `k = 0, 1, 2` and every admissible `j_max`. Returns the
/// paths and the largest gap on `|x| <= 1`.
pub fn write_convergence_curves(
    table: &PatternTable,
    out: &Path,
    hash: &str,
) -> Result<Vec<(PathBuf, f64)>> {
    fs::create_dir_all(out)?;
    let mut written = Vec::new();
    for k in 0..=2usize {
        let f0 = table.eval(k, k, 0.0);
        for j_max in k.max(1)..=MAX_DEGREE {
            let poly = number_to_moment(&subtraction_polynomial(k, j_max)?)?;
            let p = poly.evaluator().normalized_at_zero()?;
            let name = if k == 0 {
                format!("fig3_vacuum_j{j_max}.csv")
            } else {
                format!("fig3_k{k}_j{j_max}.csv")
            };
            let path = out.join(name);
            let mut f = BufWriter::new(File::create(&path)?);
            writeln!(f, "# config_hash={hash} polynomial={poly}")?;
            writeln!(f, "x,poly_normalized,f_{k}{k}_normalized")?;
            for i in 0..=400 {
                let x = -4.0 + 0.02 * i as f64;
                writeln!(
                    f,
                    "{x:.2},{:.10e},{:.10e}",
                    p.eval(x),
                    table.eval(k, k, x) / f0
                )?;
            }
            f.flush()?;
            let gap = crate::pattern::polynomial_pattern_gap(&poly, k, table, 1.0, 0.01)?;
            written.push((path, gap));
        }
    }
    Ok(written)
}

/// Figure bundle: convergence curves and the Wigner-panel reconstructions.
pub fn figures(cfg: &RunConfig, out: &Path, exec: Execution) -> Result<ReconstructionRun> {
    let mut fig = cfg.clone();
    fig.conditioning = figure_conditioning();
    staged("config", fig.validate())?;
    let table = staged("pattern functions", pattern_table(&fig))?;
    let curves = write_convergence_curves(&table, &out.join("fig3"), &fig.hash_hex())?;
    write_json(
        &out.join("fig3").join("gaps.json"),
        &json!({
            "config_hash": fig.hash_hex(),
            "window": 1.0,
            "max_gap": curves.iter().map(|(p, g)| json!({"file": p.file_name().map(|n| n.to_string_lossy()), "gap": g})).collect::<Vec<_>>(),
        }),
    )?;
    let run = reconstruct(&fig, &RecordSource::Model, exec)?;
    write_reconstruction(&run, &fig, &out.join("fig4"), exec)?;
    Ok(run)
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Fast internal consistency checks across all modules.
pub fn selftest(exec: Execution) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let mut push = |name, passed, detail: String| {
        checks.push(Check {
            name,
            passed,
            detail,
        })
    };

    // moment table: X^4 averages to 3 + 6n + 6n^2
    let m4 = moment_to_number(4)?;
    let ok = (0..6).all(|n| m4.eval_f64(n) == (3 + 6 * n + 6 * n * n) as f64);
    push("moment table", ok, format!("X^4 -> {m4}"));

    let w = build_wavefunctions(10, 10.0, 0.005)?;
    let table = PatternTable::build(&w)?;
    let mut worst: f64 = 0.0;
    for m in 0..=10 {
        for k in 0..=10 {
            let v: Vec<f64> = (0..w.len())
                .map(|i| table.samples(m, m)[i] * w.psi(k)[i].powi(2))
                .collect();
            let target = if m == k { 1.0 } else { 0.0 };
            worst = worst.max((w.integrate(&v) - target).abs());
        }
    }
    push(
        "pattern biorthogonality",
        worst < 1e-6,
        format!("max deviation {worst:.2e}"),
    );

    let model = GaussianModel::pure(0.35, 0.1, 0.98, 0.98)?;
    let rho_ab = model_state(&model, 24)?;
    let schedule = crate::sampler::AngleSchedule {
        indices: vec![0],
        samples_per_angle: 100_000,
    };
    let records = crate::sampler::sample_records(&model, &schedule, 11, exec)?;
    let n = records.len() as f64;
    // the ancilla phase is uniform and the covariance goes as cos(phi), so
    // 2 x_a x_b cos(phi) estimates the phi = 0 covariance
    let stat: Vec<f64> = records
        .iter()
        .map(|r| 2.0 * r.x_a * r.x_b * r.phi.cos())
        .collect();
    let sample_cov = stat.iter().sum::<f64>() / n;
    let sample_sq = stat.iter().map(|s| s * s).sum::<f64>() / n;
    let x0 = crate::fock::quadrature_operator(rho_ab.dim(), 0.0);
    let oracle = rho_ab.expectation(&x0, &x0).re;
    let se = ((sample_sq - sample_cov * sample_cov) / n).sqrt();
    let z = (sample_cov - oracle) / se;
    push(
        "sampler against oracle",
        z.abs() < 4.0,
        format!("<x_a x_b> z-score {z:.2}"),
    );

    let spec = crate::estimator::BinSpec::default();
    let weight = |x: f64, _phi: f64| x * x - 1.0;
    let mut single = WeightedHistogram::new(spec);
    single.accumulate(&records, &weight, 0)?;
    let mut merged = WeightedHistogram::new(spec);
    for (i, part) in records.chunks(records.len().div_ceil(8)).enumerate().rev() {
        let mut h = WeightedHistogram::new(spec);
        h.accumulate(part, &weight, i as u64)?;
        merged.merge(&h)?;
    }
    push(
        "shard merge exactness",
        merged == single,
        "8 shards merged in reverse order".into(),
    );

    let w0 = wigner_at(&DensityMatrix::vacuum(4), 0.0, 0.0);
    push(
        "vacuum Wigner origin",
        (w0 - 2.0 / std::f64::consts::PI).abs() < 1e-14,
        format!("W(0,0) = {w0:.15}"),
    );
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::AngleSchedule;

    fn small_config() -> RunConfig {
        let mut cfg = RunConfig::default();
        cfg.schedule = AngleSchedule::full(20_000);
        cfg.conditioning = vec![ConditioningSpec::None, ConditioningSpec::Pattern { n: 0 }];
        cfg.reconstruction.bootstrap = 50;
        cfg
    }

    #[test]
    fn chunks_respect_angles_and_size() {
        let rec = |t| HomodyneRecord {
            phi: 0.0,
            x_a: 0.0,
            theta_index: t,
            x_b: 0.0,
        };
        let mut v: Vec<HomodyneRecord> = (0..BLOCK_RECORDS + 5).map(|_| rec(0)).collect();
        v.extend((0..3).map(|_| rec(4)));
        let c = angle_chunks(&v);
        assert_eq!(
            c.iter().map(|c| c.len()).collect::<Vec<_>>(),
            vec![BLOCK_RECORDS, 5, 3]
        );
    }

    #[test]
    fn file_and_model_sources_agree() {
        let cfg = small_config();
        let dir = tempfile::tempdir().unwrap();
        simulate(&cfg, dir.path(), Execution::Parallel).unwrap();
        let a = reconstruct(&cfg, &RecordSource::Model, Execution::Parallel).unwrap();
        let b = reconstruct(
            &cfg,
            &RecordSource::File(dir.path().join(RECORD_FILE)),
            Execution::Sequential,
        )
        .unwrap();
        for ((_, x), (_, y)) in a.outcomes.iter().zip(&b.outcomes) {
            let (x, y) = (x.as_ref().unwrap(), y.as_ref().unwrap());
            assert_eq!(x.estimate.matrix, y.estimate.matrix);
            assert_eq!(x.metrics.w_origin, y.metrics.w_origin);
            assert_eq!(
                x.bootstrap.as_ref().unwrap().w_origin_stderr,
                y.bootstrap.as_ref().unwrap().w_origin_stderr
            );
        }
        let vac = a.get("unconditioned").unwrap();
        assert!(vac.metrics.fidelity.unwrap() > 0.99);
        assert!(vac.warnings.is_empty(), "{:?}", vac.warnings);
    }

    #[test]
    fn selftest_passes() {
        let checks = selftest(Execution::Parallel).unwrap();
        assert!(checks.iter().all(|c| c.passed), "{checks:?}");
    }

    #[test]
    fn insignificant_weight_is_a_statistics_error() {
        let mut cfg = small_config();
        cfg.schedule = AngleSchedule::full(200);
        cfg.conditioning = vec![ConditioningSpec::Polynomial { k: 3, j_max: 4 }];
        let run = reconstruct(&cfg, &RecordSource::Model, Execution::Sequential).unwrap();
        assert_eq!(
            run.first_error().unwrap().kind(),
            crate::error::ErrorKind::Statistics
        );
    }
}
