//! Thermalization diagnostics: inverse-temperature matching, partial traces
//! onto exciton subsystems, sector-restricted Gibbs reductions and the trace
//! distance between them.

use std::collections::{BTreeSet, HashMap};

use faer::Mat;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::basis::{binomial, decompose, SectorBasis, SiteSet};
use crate::error::{Error, Result};
use crate::spectral::{hermitian_eigenvalues, SpectralDecomposition, StateVector};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Result of solving `<H>_beta = E0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThermalMatch {
    pub beta: f64,
    /// `|<H>_beta - E0|` at the returned `beta`.
    pub residual: f64,
}

/// Canonical mean energy `Σ E_n e^{-beta E_n} / Σ e^{-beta E_n}`, evaluated
/// with the exponent shifted by its maximum.
pub fn mean_energy(energies: &[f64], beta: f64) -> f64 {
    let weights = gibbs_weights(energies, beta);
    energies.iter().zip(&weights).map(|(e, w)| e * w).sum()
}

/// Normalized Gibbs weights `e^{-beta E_n} / Z`.
pub fn gibbs_weights(energies: &[f64], beta: f64) -> Vec<f64> {
    let shift = energies.iter().map(|e| -beta * e).fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = energies.iter().map(|e| (-beta * e - shift).exp()).collect();
    let z: f64 = w.iter().sum();
    for x in &mut w {
        *x /= z;
    }
    w
}

/// Solve for the inverse temperature whose canonical energy equals `target`.
///
/// The map `beta -> <H>_beta` is strictly decreasing on a non-degenerate
/// spectrum, so the root is bracketed starting from `±50 / width` and refined
/// by bisection. Negative temperatures are returned for targets above the
/// spectral mean.
pub fn match_beta(energies: &[f64], target: f64) -> Result<ThermalMatch> {
    let (min, max) = energies
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &e| (lo.min(e), hi.max(e)));
    let width = max - min;
    let scale = 1.0 + min.abs().max(max.abs());
    if !(width > 1e-12 * scale) {
        return Err(Error::DegenerateSpectrum { width });
    }
    if !(target > min && target < max) {
        return Err(Error::EnergyOutOfRange { target, min, max });
    }
    let tolerance = 1e-10 * width;

    let mut beta_max = 50.0 / width;
    let mut lo = -beta_max;
    let mut hi = beta_max;
    let mut expansions = 0;
    loop {
        let e_lo = mean_energy(energies, lo);
        let e_hi = mean_energy(energies, hi);
        if e_lo >= target && e_hi <= target {
            break;
        }
        expansions += 1;
        if expansions > 40 {
            // Needs |beta| beyond ~5e13/width: the target sits on a spectral edge.
            return Err(Error::EnergyOutOfRange { target, min, max });
        }
        beta_max *= 2.0;
        if e_lo < target {
            lo = -beta_max;
        }
        if e_hi > target {
            hi = beta_max;
        }
    }

    let mut beta = 0.5 * (lo + hi);
    let mut residual = (mean_energy(energies, beta) - target).abs();
    for _ in 0..400 {
        beta = 0.5 * (lo + hi);
        let e = mean_energy(energies, beta);
        residual = (e - target).abs();
        if e > target {
            lo = beta;
        } else {
            hi = beta;
        }
        if hi - lo <= 1e-14 * (1.0 / width).max(beta.abs()) {
            break;
        }
    }
    if residual > 1e-8 * width {
        return Err(Error::EnergyOutOfRange { target, min, max });
    }
    if residual > tolerance {
        log::debug!("beta match residual {residual:e} above bisection tolerance {tolerance:e}");
    }
    Ok(ThermalMatch { beta, residual })
}

/// Density matrix on the occupation space of an exciton subsystem, indexed
/// by local bit patterns (bit `k` = `k`-th site of the subsystem).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReducedDensityMatrix {
    subsystem: SiteSet,
    dim: usize,
    /// Row-major.
    entries: Vec<Complex64>,
}

impl ReducedDensityMatrix {
    pub fn from_entries(subsystem: SiteSet, entries: Vec<Complex64>) -> Result<Self> {
        let dim = subsystem.local_dim();
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, found: entries.len() });
        }
        Ok(Self { subsystem, dim, entries })
    }

    pub fn subsystem(&self) -> &SiteSet {
        &self.subsystem
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.dim + col]
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i).re).sum()
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        let mut dev = 0.0f64;
        for i in 0..self.dim {
            for j in 0..=i {
                dev = dev.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        dev
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        hermitian_eigenvalues(&self.to_mat())
    }

    /// Checks Hermiticity (1e-12), unit trace (1e-10) and positivity (-1e-10).
    pub fn validate(&self) -> Result<()> {
        let dev = self.hermiticity_deviation();
        if dev > 1e-12 {
            return Err(Error::NotHermitian { deviation: dev });
        }
        let trace = self.trace();
        if (trace - 1.0).abs() > 1e-10 {
            return Err(Error::NotNormalized { norm_sqr: trace });
        }
        if let Some(&low) = self.eigenvalues()?.first() {
            if low < -1e-10 {
                return Err(Error::invalid(format!("density matrix has eigenvalue {low}")));
            }
        }
        Ok(())
    }

    fn to_mat(&self) -> Mat<Complex64> {
        Mat::from_fn(self.dim, self.dim, |i, j| self.get(i, j))
    }

    /// JSON with complex entries as `[re, im]` pairs.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Precomputed partial-trace map for one subsystem: basis states grouped by
/// their complement configuration.
#[derive(Clone, Debug)]
pub struct SubsystemProjector {
    subsystem: SiteSet,
    dim: usize,
    /// Each group shares a complement label; entries are (local pattern, basis index).
    groups: Vec<Vec<(u32, usize)>>,
}

impl SubsystemProjector {
    pub fn new(basis: &SectorBasis, subsystem: &SiteSet) -> Result<Self> {
        if subsystem.sites().iter().any(|&s| s >= basis.sites()) {
            return Err(Error::SubsystemMismatch(format!(
                "{:?} is not a subset of a {}-site lattice",
                subsystem.sites(),
                basis.sites()
            )));
        }
        if 2 * subsystem.len() > basis.sites() {
            log::warn!(
                "subsystem of {} sites exceeds half of the {}-site lattice",
                subsystem.len(),
                basis.sites()
            );
        }
        let mut lookup = HashMap::new();
        let mut groups: Vec<Vec<(u32, usize)>> = Vec::new();
        for (index, state) in basis.states().iter().enumerate() {
            let (local, complement) = decompose(state, subsystem);
            let g = *lookup.entry(complement).or_insert_with(|| {
                groups.push(Vec::new());
                groups.len() - 1
            });
            groups[g].push((local, index));
        }
        Ok(Self { subsystem: subsystem.clone(), dim: subsystem.local_dim(), groups })
    }

    pub fn subsystem(&self) -> &SiteSet {
        &self.subsystem
    }

    /// `rho_A[a, a'] = Σ_b psi(a, b) conj(psi(a', b))`.
    pub fn reduce(&self, amplitudes: &[Complex64]) -> ReducedDensityMatrix {
        let mut entries = vec![ZERO; self.dim * self.dim];
        self.accumulate(amplitudes, 1.0, &mut entries);
        ReducedDensityMatrix { subsystem: self.subsystem.clone(), dim: self.dim, entries }
    }

    fn accumulate(&self, amplitudes: &[Complex64], weight: f64, entries: &mut [Complex64]) {
        for group in &self.groups {
            for &(a, i) in group {
                let left = amplitudes[i] * weight;
                if left == ZERO {
                    continue;
                }
                for &(b, j) in group {
                    entries[a as usize * self.dim + b as usize] += left * amplitudes[j].conj();
                }
            }
        }
    }

    /// Reduction of the sector-restricted Gibbs state with the given weights
    /// over eigenstates: `Σ_n w_n Tr_B |n><n|`.
    pub fn reduce_mixture(&self, dec: &SpectralDecomposition, weights: &[f64]) -> ReducedDensityMatrix {
        // Only entries G_ij = Σ_n w_n V_in conj(V_jn) between basis states of
        // the same group are needed.
        let vectors = dec.vectors();
        let d = dec.dim();
        let mut entries = vec![ZERO; self.dim * self.dim];
        let mut row_i = vec![ZERO; d];
        for group in &self.groups {
            for &(a, i) in group {
                for n in 0..d {
                    row_i[n] = vectors[(i, n)] * weights[n];
                }
                for &(b, j) in group {
                    let mut acc = ZERO;
                    for n in 0..d {
                        acc += row_i[n] * vectors[(j, n)].conj();
                    }
                    entries[a as usize * self.dim + b as usize] += acc;
                }
            }
        }
        ReducedDensityMatrix { subsystem: self.subsystem.clone(), dim: self.dim, entries }
    }
}

/// Partial trace of `psi` over everything outside `subsystem`.
pub fn reduce_state(basis: &SectorBasis, psi: &StateVector, subsystem: &SiteSet) -> Result<ReducedDensityMatrix> {
    if psi.dim() != basis.dim() {
        return Err(Error::DimensionMismatch { expected: basis.dim(), found: psi.dim() });
    }
    Ok(SubsystemProjector::new(basis, subsystem)?.reduce(psi.amplitudes()))
}

/// `Tr_B[e^{-beta H} / Z]` with the Gibbs state restricted to the sector of `dec`.
pub fn thermal_reduced(
    basis: &SectorBasis,
    dec: &SpectralDecomposition,
    beta: f64,
    subsystem: &SiteSet,
) -> Result<ReducedDensityMatrix> {
    if dec.dim() != basis.dim() {
        return Err(Error::DimensionMismatch { expected: basis.dim(), found: dec.dim() });
    }
    if !beta.is_finite() {
        return Err(Error::invalid("beta must be finite"));
    }
    let weights = gibbs_weights(dec.energies(), beta);
    Ok(SubsystemProjector::new(basis, subsystem)?.reduce_mixture(dec, &weights))
}

/// `½ Σ |λ_i|` over the eigenvalues of `rho - sigma`.
pub fn trace_distance(rho: &ReducedDensityMatrix, sigma: &ReducedDensityMatrix) -> Result<f64> {
    if rho.subsystem != sigma.subsystem {
        return Err(Error::SubsystemMismatch(format!(
            "{:?} vs {:?}",
            rho.subsystem.sites(),
            sigma.subsystem.sites()
        )));
    }
    for m in [rho, sigma] {
        let dev = m.hermiticity_deviation();
        if dev > 1e-10 {
            return Err(Error::NotHermitian { deviation: dev });
        }
    }
    let n = rho.dim;
    let diff = Mat::from_fn(n, n, |i, j| {
        // Symmetrize so round-off never reaches the eigensolver.
        let d_ij = rho.get(i, j) - sigma.get(i, j);
        let d_ji = rho.get(j, i) - sigma.get(j, i);
        (d_ij + d_ji.conj()) * 0.5
    });
    let value = 0.5 * hermitian_eigenvalues(&diff)?.iter().map(|l| l.abs()).sum::<f64>();
    if value > 1.0 + 1e-8 {
        return Err(Error::TraceDistanceOvershoot { value });
    }
    Ok(value.clamp(0.0, 1.0))
}

/// How subsystems are chosen for averaging.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PanelPolicy {
    /// Every subset of the requested size, refused above `max_sets`.
    Exhaustive { max_sets: usize },
    /// `count` distinct subsets drawn uniformly with a seeded stream.
    Sampled { count: usize, seed: u64 },
}

/// Ceiling on exhaustive panels.
pub const DEFAULT_PANEL_CEILING: usize = 100_000;

/// Subsystems of `size` sites satisfying `size <= L/2`.
pub fn subsystem_panel(lattice_sites: usize, size: usize, policy: PanelPolicy) -> Result<Vec<SiteSet>> {
    if size == 0 || 2 * size > lattice_sites {
        return Err(Error::invalid(format!(
            "subsystem size {size} must be between 1 and half of {lattice_sites} sites"
        )));
    }
    let total = binomial(lattice_sites, size);
    match policy {
        PanelPolicy::Exhaustive { max_sets } => {
            if total > max_sets {
                return Err(Error::invalid(format!(
                    "exhaustive panel would have {total} subsystems (ceiling {max_sets})"
                )));
            }
            let mut out = Vec::with_capacity(total);
            let mut current: Vec<usize> = (0..size).collect();
            loop {
                out.push(SiteSet::new(current.clone(), lattice_sites)?);
                // Next combination in lexicographic order.
                let mut k = size;
                while k > 0 && current[k - 1] == lattice_sites - size + k - 1 {
                    k -= 1;
                }
                if k == 0 {
                    break;
                }
                current[k - 1] += 1;
                for m in k..size {
                    current[m] = current[m - 1] + 1;
                }
            }
            Ok(out)
        }
        PanelPolicy::Sampled { count, seed } => {
            if count == 0 {
                return Err(Error::invalid("sampled panel needs at least one subsystem"));
            }
            if count > total {
                return Err(Error::invalid(format!(
                    "cannot draw {count} distinct subsystems out of {total}"
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut seen = BTreeSet::new();
            let mut out = Vec::with_capacity(count);
            while out.len() < count {
                let mut pick = rand::seq::index::sample(&mut rng, lattice_sites, size).into_vec();
                pick.sort_unstable();
                if seen.insert(pick.clone()) {
                    out.push(SiteSet::new(pick, lattice_sites)?);
                }
            }
            Ok(out)
        }
    }
}
