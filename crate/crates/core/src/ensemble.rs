//! Disorder-averaged sweeps over the coupling ratio g/σ.
//!
//! Work units are (coupling, realization) pairs evaluated on a rayon pool;
//! results are collected in unit order so aggregates do not depend on the
//! worker count.

use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{Sector, SectorBasis, SiteSet};
use crate::error::{Error, Result};
use crate::hamiltonian::{assemble, sample_disorder, ModelParams};
use crate::observables::{ipr_of, level_spacings, population_of, SpacingHistogram, SpacingOptions};
use crate::signal::{autocorrelate, moving_average_tail_of, TimeSeries};
use crate::spectral::{decompose, eigenvalues, DecompositionCache, SpectralDecomposition, StateVector};
use crate::thermal::{
    match_beta, subsystem_panel, trace_distance, PanelPolicy, ReducedDensityMatrix, SubsystemProjector,
};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// Bijective 64-bit mixer (splitmix64 finalizer).
pub fn mix64(x: u64) -> u64 {
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for stream `counter`; distinct counters give distinct seeds.
pub fn derive_seed(master: u64, counter: u64) -> u64 {
    mix64(master.wrapping_add(counter.wrapping_add(1).wrapping_mul(GOLDEN)))
}

/// How disorder seeds relate across coupling values.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedScheme {
    /// Realization `r` uses the same disorder at every g, so per-realization
    /// curves across g are meaningful.
    #[default]
    SharedAcrossCouplings,
    /// Every (g, realization) pair gets its own disorder.
    PerPoint,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t_max: f64,
    pub steps: usize,
}

impl TimeGrid {
    /// `steps` uniform points from 0 to `t_max` inclusive.
    pub fn times(&self) -> Vec<f64> {
        let dt = self.dt();
        (0..self.steps).map(|k| k as f64 * dt).collect()
    }

    pub fn dt(&self) -> f64 {
        self.t_max / (self.steps - 1) as f64
    }
}

/// Parameters of a disorder-averaged sweep. Couplings are given as ratios
/// g/σ at fixed σ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub sites: usize,
    pub sigma: f64,
    pub omega0: f64,
    pub g_over_sigma: Vec<f64>,
    pub realizations: usize,
    pub subsystem_size: usize,
    pub panel: PanelPolicy,
    pub time_grid: TimeGrid,
    pub master_seed: u64,
    pub seed_scheme: SeedScheme,
    /// Fraction of the trajectory treated as the late-time tail.
    pub tail_fraction: f64,
    /// Moving-average window for the representative trace distance.
    pub smoothing_window: usize,
}

impl SweepSpec {
    /// Defaults: σ = ω₀ = 1, five realizations, three-site subsystems, a
    /// panel of 20 sampled subsystems and `t_max = 200/σ` over 2048 points.
    pub fn new(sites: usize, g_over_sigma: Vec<f64>) -> Self {
        Self {
            sites,
            sigma: 1.0,
            omega0: 1.0,
            g_over_sigma,
            realizations: 5,
            subsystem_size: 3,
            panel: PanelPolicy::Sampled { count: 20, seed: 0 },
            time_grid: TimeGrid { t_max: 200.0, steps: 2048 },
            master_seed: 0,
            seed_scheme: SeedScheme::default(),
            tail_fraction: 0.5,
            smoothing_window: 32,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.realizations == 0 {
            return Err(Error::invalid("need at least one realization"));
        }
        if self.g_over_sigma.is_empty() {
            return Err(Error::invalid("coupling list is empty"));
        }
        if self.g_over_sigma.iter().any(|g| !g.is_finite() || *g < 0.0) {
            return Err(Error::invalid("couplings must be finite and non-negative"));
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::invalid(format!("sigma must be positive, got {}", self.sigma)));
        }
        if self.time_grid.steps < 2 || !(self.time_grid.t_max > 0.0) || !self.time_grid.t_max.is_finite() {
            return Err(Error::invalid("time grid needs t_max > 0 and at least 2 steps"));
        }
        if !(self.tail_fraction > 0.0 && self.tail_fraction <= 1.0) {
            return Err(Error::invalid("tail fraction must lie in (0, 1]"));
        }
        let tail = (self.time_grid.steps as f64 * self.tail_fraction).round() as usize;
        if self.smoothing_window == 0 || self.smoothing_window > tail {
            return Err(Error::invalid("smoothing window must fit inside the tail"));
        }
        ModelParams::new(self.omega0, 0.0, self.sites)?;
        Ok(())
    }

    pub fn seed(&self, g_index: usize, realization: usize) -> u64 {
        let counter = match self.seed_scheme {
            SeedScheme::SharedAcrossCouplings => realization as u64,
            SeedScheme::PerPoint => (g_index * self.realizations + realization) as u64,
        };
        derive_seed(self.master_seed, counter)
    }

    pub fn panel_sets(&self) -> Result<Vec<SiteSet>> {
        let policy = match self.panel {
            // A zero panel seed means "derive from the master seed".
            PanelPolicy::Sampled { count, seed: 0 } => {
                PanelPolicy::Sampled { count, seed: derive_seed(self.master_seed, u64::MAX) }
            }
            p => p,
        };
        subsystem_panel(self.sites, self.subsystem_size, policy)
    }
}

/// Diagnostics of one (coupling, realization) unit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealizationRecord {
    pub g_over_sigma: f64,
    pub realization: usize,
    pub seed: u64,
    pub hopping_digest: String,
    pub interaction_digest: String,
    /// Set when the unit failed; all other diagnostics are then empty.
    pub failure: Option<String>,
    pub initial_energy: f64,
    pub normalized_energy: f64,
    pub beta: f64,
    /// Panel-averaged trace distance to the matched thermal state.
    pub trace_distance: Vec<f64>,
    pub ipr: Vec<f64>,
    pub n_c: Vec<f64>,
    pub representative_trace_distance: f64,
    pub tail_ipr: f64,
    pub max_ipr: f64,
    pub tau_c: f64,
    pub tau_window: f64,
    pub zero_variance: bool,
}

impl RealizationRecord {
    fn failed(g_over_sigma: f64, realization: usize, seed: u64, reason: String) -> Self {
        Self {
            g_over_sigma,
            realization,
            seed,
            hopping_digest: String::new(),
            interaction_digest: String::new(),
            failure: Some(reason),
            initial_energy: f64::NAN,
            normalized_energy: f64::NAN,
            beta: f64::NAN,
            trace_distance: vec![],
            ipr: vec![],
            n_c: vec![],
            representative_trace_distance: f64::NAN,
            tail_ipr: f64::NAN,
            max_ipr: f64::NAN,
            tau_c: f64::NAN,
            tau_window: f64::NAN,
            zero_variance: false,
        }
    }
}

/// Mean and population standard deviation over realizations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Band {
    fn from_rows<'a>(rows: impl Iterator<Item = &'a [f64]> + Clone) -> Self {
        let count = rows.clone().count() as f64;
        let len = rows.clone().next().map_or(0, |r| r.len());
        let mut mean = vec![0.0; len];
        for row in rows.clone() {
            for (m, x) in mean.iter_mut().zip(row) {
                *m += x;
            }
        }
        for m in &mut mean {
            *m /= count;
        }
        let mut var = vec![0.0; len];
        for row in rows {
            for ((v, x), m) in var.iter_mut().zip(row).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        let std = var.into_iter().map(|v| (v / count).sqrt()).collect();
        Self { mean, std }
    }
}

pub(crate) fn mean_std(values: &[f64]) -> (f64, f64) {
    let band = Band::from_rows(values.iter().map(std::slice::from_ref));
    (band.mean[0], band.std[0])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub realizations_used: usize,
    pub trace_distance: Band,
    pub ipr: Band,
    pub n_c: Band,
    /// Tail moving average of the mean trace-distance trajectory.
    pub representative_trace_distance: f64,
    /// Spread of the per-realization representative values.
    pub representative_trace_distance_std: f64,
    /// Across-realization trace-distance std averaged over the tail.
    pub tail_trace_distance_std: f64,
    pub tau_c: f64,
    pub tau_c_std: f64,
    pub tau_window: f64,
    pub normalized_energy: f64,
    pub normalized_energy_std: f64,
    pub tail_ipr: f64,
    pub max_ipr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingPoint {
    pub g_over_sigma: f64,
    pub coupling: f64,
    pub records: Vec<RealizationRecord>,
    /// False when any realization failed.
    pub complete: bool,
    /// Absent when every realization failed.
    pub aggregate: Option<Aggregate>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitTiming {
    pub g_over_sigma: f64,
    pub realization: usize,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub spec: SweepSpec,
    pub dim: usize,
    pub panel: Vec<Vec<usize>>,
    pub times: Vec<f64>,
    pub points: Vec<CouplingPoint>,
    /// Wall-clock provenance; excluded from [`SweepResult::payload`].
    pub timings: Vec<UnitTiming>,
}

impl SweepResult {
    /// Everything except wall times, for reproducibility comparisons.
    pub fn payload(&self) -> Result<String> {
        let mut copy = self.clone();
        copy.timings.clear();
        Ok(serde_json::to_string(&copy)?)
    }

    /// Every seed used, in (coupling, realization) order.
    pub fn seeds(&self) -> Vec<u64> {
        self.points.iter().flat_map(|p| p.records.iter().map(|r| r.seed)).collect()
    }
}

/// Optional shared on-disk cache of N=2 decompositions.
#[derive(Clone, Copy, Default)]
pub struct SweepOptions<'a> {
    pub cache: Option<&'a DecompositionCache>,
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))
}

/// Run the dynamics sweep with `workers` threads.
pub fn run_sweep(spec: &SweepSpec, workers: usize) -> Result<SweepResult> {
    run_sweep_with(spec, workers, SweepOptions::default())
}

pub fn run_sweep_with(spec: &SweepSpec, workers: usize, options: SweepOptions<'_>) -> Result<SweepResult> {
    spec.validate()?;
    let basis = SectorBasis::build(spec.sites, Sector::Two)?;
    let panel = spec.panel_sets()?;
    let projectors = panel
        .iter()
        .map(|set| SubsystemProjector::new(&basis, set))
        .collect::<Result<Vec<_>>>()?;
    let times = spec.time_grid.times();
    let units: Vec<(usize, usize)> = (0..spec.g_over_sigma.len())
        .flat_map(|g| (0..spec.realizations).map(move |r| (g, r)))
        .collect();

    let ctx = UnitContext { spec, basis: &basis, projectors: &projectors, times: &times, cache: options.cache };
    let outcomes: Vec<(RealizationRecord, f64)> = pool(workers)?.install(|| {
        units
            .par_iter()
            .map(|&(g, r)| {
                let start = Instant::now();
                let record = ctx.run(g, r);
                (record, start.elapsed().as_secs_f64())
            })
            .collect()
    });

    let mut timings = Vec::with_capacity(outcomes.len());
    let mut records_by_g: Vec<Vec<RealizationRecord>> = vec![Vec::new(); spec.g_over_sigma.len()];
    for ((g, r), (record, seconds)) in units.iter().zip(outcomes) {
        if let Some(reason) = &record.failure {
            log::warn!("g/sigma = {} realization {r} failed: {reason}", spec.g_over_sigma[*g]);
        }
        timings.push(UnitTiming { g_over_sigma: spec.g_over_sigma[*g], realization: *r, seconds });
        records_by_g[*g].push(record);
    }
    let points = spec
        .g_over_sigma
        .iter()
        .zip(records_by_g)
        .map(|(&ratio, records)| {
            let aggregate = aggregate(spec, &records);
            CouplingPoint {
                g_over_sigma: ratio,
                coupling: ratio * spec.sigma,
                complete: records.iter().all(|r| r.failure.is_none()),
                records,
                aggregate,
            }
        })
        .collect();
    Ok(SweepResult {
        spec: spec.clone(),
        dim: basis.dim(),
        panel: panel.iter().map(|s| s.sites().to_vec()).collect(),
        times,
        points,
        timings,
    })
}

struct UnitContext<'a> {
    spec: &'a SweepSpec,
    basis: &'a SectorBasis,
    projectors: &'a [SubsystemProjector],
    times: &'a [f64],
    cache: Option<&'a DecompositionCache>,
}

/// Time points evolved per dense batch.
const CHUNK: usize = 256;

impl UnitContext<'_> {
    fn run(&self, g_index: usize, realization: usize) -> RealizationRecord {
        let ratio = self.spec.g_over_sigma[g_index];
        let seed = self.spec.seed(g_index, realization);
        self.try_run(ratio, realization, seed)
            .unwrap_or_else(|e| RealizationRecord::failed(ratio, realization, seed, e.to_string()))
    }

    fn decomposition(&self, ratio: f64, seed: u64) -> Result<(SpectralDecomposition, crate::hamiltonian::DisorderRealization)> {
        let spec = self.spec;
        let disorder = sample_disorder(spec.sites, spec.sigma, seed)?;
        let params = ModelParams::new(spec.omega0, ratio * spec.sigma, spec.sites)?;
        let h = assemble(self.basis, &disorder, &params)?;
        let dec = match self.cache {
            Some(cache) => cache.get_or_compute(&h.digest(), || decompose(&h))?,
            None => decompose(&h)?,
        };
        Ok((dec, disorder))
    }

    fn try_run(&self, ratio: f64, realization: usize, seed: u64) -> Result<RealizationRecord> {
        let spec = self.spec;
        let (dec, disorder) = self.decomposition(ratio, seed)?;
        let record = disorder.record();
        let psi0 = StateVector::basis_state(self.basis.dim(), 0);
        let overlaps = dec.project(&psi0)?;
        let e0: f64 = overlaps.iter().zip(dec.energies()).map(|(c, e)| c.norm_sqr() * e).sum();
        let width = dec.max_energy() - dec.min_energy();
        let normalized_energy = (e0 - dec.min_energy()) / width;
        let beta = match_beta(dec.energies(), e0)?.beta;
        let thermal: Vec<ReducedDensityMatrix> = {
            let weights = crate::thermal::gibbs_weights(dec.energies(), beta);
            self.projectors.iter().map(|p| p.reduce_mixture(&dec, &weights)).collect()
        };

        let prop = dec.propagator(&psi0)?;
        let n = self.times.len();
        let mut trace_dist = Vec::with_capacity(n);
        let mut ipr = Vec::with_capacity(n);
        let mut n_c = Vec::with_capacity(n);
        for chunk in self.times.chunks(CHUNK) {
            let states = prop.at_times(chunk);
            for (k, &t) in chunk.iter().enumerate() {
                let amps: &[Complex64] = states.col(k).try_as_col_major().expect("owned column").as_slice();
                ipr.push(ipr_of(amps));
                n_c.push(population_of(self.basis, amps, t).n_c);
                let mut sum = 0.0;
                for (proj, th) in self.projectors.iter().zip(&thermal) {
                    sum += trace_distance(&proj.reduce(amps), th)?;
                }
                trace_dist.push(sum / self.projectors.len() as f64);
            }
        }

        let tail_len = ((n as f64 * spec.tail_fraction).round() as usize).clamp(1, n);
        let representative = moving_average_tail_of(&trace_dist, spec.tail_fraction, spec.smoothing_window)?;
        let tail_ipr = ipr[n - tail_len..].iter().sum::<f64>() / tail_len as f64;
        let max_ipr = ipr.iter().cloned().fold(0.0, f64::max);
        let corr = autocorrelate(&TimeSeries::new(self.times[0], spec.time_grid.dt(), n_c.clone())?)?;

        Ok(RealizationRecord {
            g_over_sigma: ratio,
            realization,
            seed,
            hopping_digest: record.hopping_digest,
            interaction_digest: record.interaction_digest,
            failure: None,
            initial_energy: e0,
            normalized_energy,
            beta,
            trace_distance: trace_dist,
            ipr,
            n_c,
            representative_trace_distance: representative,
            tail_ipr,
            max_ipr,
            tau_c: corr.tau_c,
            tau_window: corr.window,
            zero_variance: corr.zero_variance,
        })
    }
}

fn aggregate(spec: &SweepSpec, records: &[RealizationRecord]) -> Option<Aggregate> {
    let ok: Vec<&RealizationRecord> = records.iter().filter(|r| r.failure.is_none()).collect();
    if ok.is_empty() {
        return None;
    }
    let td = Band::from_rows(ok.iter().map(|r| r.trace_distance.as_slice()));
    let ipr = Band::from_rows(ok.iter().map(|r| r.ipr.as_slice()));
    let n_c = Band::from_rows(ok.iter().map(|r| r.n_c.as_slice()));
    let n = td.mean.len();
    let tail_len = ((n as f64 * spec.tail_fraction).round() as usize).clamp(1, n);
    let representative = moving_average_tail_of(&td.mean, spec.tail_fraction, spec.smoothing_window).ok()?;
    let reps: Vec<f64> = ok.iter().map(|r| r.representative_trace_distance).collect();
    let taus: Vec<f64> = ok.iter().map(|r| r.tau_c).collect();
    let energies: Vec<f64> = ok.iter().map(|r| r.normalized_energy).collect();
    let (_, rep_std) = mean_std(&reps);
    let (tau_c, tau_c_std) = mean_std(&taus);
    let (normalized_energy, normalized_energy_std) = mean_std(&energies);
    Some(Aggregate {
        realizations_used: ok.len(),
        representative_trace_distance: representative,
        representative_trace_distance_std: rep_std,
        tail_trace_distance_std: td.std[n - tail_len..].iter().sum::<f64>() / tail_len as f64,
        tau_c,
        tau_c_std,
        tau_window: ok[0].tau_window,
        normalized_energy,
        normalized_energy_std,
        tail_ipr: ok.iter().map(|r| r.tail_ipr).sum::<f64>() / ok.len() as f64,
        max_ipr: ok.iter().map(|r| r.max_ipr).fold(0.0, f64::max),
        trace_distance: td,
        ipr,
        n_c,
    })
}

/// Spacing statistics and initial-state energy of one realization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRecord {
    pub g_over_sigma: f64,
    pub realization: usize,
    pub seed: u64,
    pub failure: Option<String>,
    /// Normalized energy of the cavity Fock state within the N=2 spectrum.
    pub normalized_energy: f64,
    /// Spacing histogram of the full N<=2 spectrum.
    pub histogram: Option<SpacingHistogram>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSweep {
    pub spec: SweepSpec,
    pub options: SpacingOptions,
    pub records: Vec<SpectrumRecord>,
}

impl SpectrumSweep {
    /// Records of one coupling, in realization order.
    pub fn at(&self, g_index: usize) -> &[SpectrumRecord] {
        let r = self.spec.realizations;
        &self.records[g_index * r..(g_index + 1) * r]
    }

    pub fn mean_ks(&self, g_index: usize) -> Option<f64> {
        let ks: Vec<f64> = self.at(g_index).iter().filter_map(|r| r.histogram.as_ref().map(|h| h.ks_distance)).collect();
        (!ks.is_empty()).then(|| ks.iter().sum::<f64>() / ks.len() as f64)
    }

    pub fn mean_normalized_energy(&self, g_index: usize) -> Option<f64> {
        let e: Vec<f64> =
            self.at(g_index).iter().filter(|r| r.failure.is_none()).map(|r| r.normalized_energy).collect();
        (!e.is_empty()).then(|| e.iter().sum::<f64>() / e.len() as f64)
    }
}

/// Eigenvalue-only sweep on the N<=2 Hamiltonian. Blocks are diagonalized
/// separately; their union is the N<=2 spectrum.
pub fn run_spectrum_sweep(spec: &SweepSpec, options: &SpacingOptions, workers: usize) -> Result<SpectrumSweep> {
    spec.validate()?;
    let basis = SectorBasis::build(spec.sites, Sector::UpToTwo)?;
    let units: Vec<(usize, usize)> = (0..spec.g_over_sigma.len())
        .flat_map(|g| (0..spec.realizations).map(move |r| (g, r)))
        .collect();
    let records = pool(workers)?.install(|| {
        units
            .par_iter()
            .map(|&(g, r)| {
                let ratio = spec.g_over_sigma[g];
                let seed = spec.seed(g, r);
                spectrum_unit(spec, &basis, options, ratio, r, seed).unwrap_or_else(|e| SpectrumRecord {
                    g_over_sigma: ratio,
                    realization: r,
                    seed,
                    failure: Some(e.to_string()),
                    normalized_energy: f64::NAN,
                    histogram: None,
                })
            })
            .collect::<Vec<_>>()
    });
    Ok(SpectrumSweep { spec: spec.clone(), options: *options, records })
}

fn spectrum_unit(
    spec: &SweepSpec,
    basis: &SectorBasis,
    options: &SpacingOptions,
    ratio: f64,
    realization: usize,
    seed: u64,
) -> Result<SpectrumRecord> {
    let disorder = sample_disorder(spec.sites, spec.sigma, seed)?;
    let params = ModelParams::new(spec.omega0, ratio * spec.sigma, spec.sites)?;
    let h = assemble(basis, &disorder, &params)?;
    let mut all = Vec::with_capacity(basis.dim());
    let mut normalized_energy = f64::NAN;
    for &n in Sector::UpToTwo.blocks() {
        let range = basis.block_range(n).expect("block of the N<=2 basis");
        let block = h.block(range.clone());
        let values = eigenvalues(&block)?;
        if n == 2 {
            // The cavity Fock state is the first N=2 basis vector.
            let e0 = block.get(0, 0).re;
            let (min, max) = (values[0], values[values.len() - 1]);
            if !(max - min > 0.0) {
                return Err(Error::DegenerateSpectrum { width: max - min });
            }
            normalized_energy = (e0 - min) / (max - min);
        }
        all.extend(values);
    }
    all.sort_by(f64::total_cmp);
    let histogram = level_spacings(&all, options)?;
    Ok(SpectrumRecord {
        g_over_sigma: ratio,
        realization,
        seed,
        failure: None,
        normalized_energy,
        histogram: Some(histogram),
    })
}

/// Regime labels for a coupling point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Ergodic,
    Transition,
    Nonergodic,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Ergodic => "ergodic",
            Regime::Transition => "transition",
            Regime::Nonergodic => "nonergodic",
        }
    }
}

/// Classification thresholds. IPR thresholds are multiples of `1/d`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeThresholds {
    /// Ergodic needs tail IPR at most this many times `1/d`.
    pub ergodic_tail_ipr: f64,
    /// Ergodic needs a representative trace distance at most this.
    pub ergodic_trace_distance: f64,
    /// Nonergodic when the IPR ever exceeds this many times `1/d`.
    pub nonergodic_max_ipr: f64,
    /// Nonergodic when the representative trace distance reaches this.
    pub nonergodic_trace_distance: f64,
    /// Nonergodic when τ_c exceeds this multiple of the weakest-coupling τ_c.
    pub tau_jump: f64,
}

impl Default for RegimeThresholds {
    fn default() -> Self {
        Self {
            ergodic_tail_ipr: 3.0,
            ergodic_trace_distance: 0.1,
            nonergodic_max_ipr: 30.0,
            nonergodic_trace_distance: 0.2,
            tau_jump: 2.0,
        }
    }
}

/// Per-coupling inputs of the classifier.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeInputs {
    pub g_over_sigma: f64,
    pub dim: usize,
    pub tail_ipr: f64,
    pub max_ipr: f64,
    pub representative_trace_distance: f64,
    pub tau_c: f64,
}

impl RegimeInputs {
    /// `None` when the point has no aggregate.
    pub fn from_point(point: &CouplingPoint, dim: usize) -> Option<Self> {
        point.aggregate.as_ref().map(|a| Self {
            g_over_sigma: point.g_over_sigma,
            dim,
            tail_ipr: a.tail_ipr,
            max_ipr: a.max_ipr,
            representative_trace_distance: a.representative_trace_distance,
            tau_c: a.tau_c,
        })
    }
}

/// Label each coupling point. The τ_c reference is the weakest coupling.
pub fn classify_regimes(points: &[RegimeInputs], thresholds: &RegimeThresholds) -> Result<Vec<Regime>> {
    if points.len() < 3 {
        return Err(Error::invalid(format!("regime classification needs at least 3 couplings, got {}", points.len())));
    }
    let reference = points
        .iter()
        .min_by(|a, b| a.g_over_sigma.total_cmp(&b.g_over_sigma))
        .map(|p| p.tau_c)
        .unwrap_or(0.0);
    Ok(points
        .iter()
        .map(|p| {
            let d = p.dim as f64;
            let tau_jumped = reference > 0.0 && p.tau_c > thresholds.tau_jump * reference;
            if p.max_ipr * d >= thresholds.nonergodic_max_ipr
                || p.representative_trace_distance >= thresholds.nonergodic_trace_distance
                || tau_jumped
            {
                Regime::Nonergodic
            } else if p.tail_ipr * d <= thresholds.ergodic_tail_ipr
                && p.representative_trace_distance <= thresholds.ergodic_trace_distance
            {
                Regime::Ergodic
            } else {
                Regime::Transition
            }
        })
        .collect())
}

/// Classify every aggregated point of a sweep.
pub fn regime_classifier(result: &SweepResult, thresholds: &RegimeThresholds) -> Result<Vec<(f64, Option<Regime>)>> {
    let inputs: Vec<RegimeInputs> =
        result.points.iter().filter_map(|p| RegimeInputs::from_point(p, result.dim)).collect();
    let labels = classify_regimes(&inputs, thresholds)?;
    let mut it = labels.into_iter();
    Ok(result
        .points
        .iter()
        .map(|p| (p.g_over_sigma, p.aggregate.as_ref().and_then(|_| it.next())))
        .collect())
}
