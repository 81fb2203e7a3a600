//! Scalar diagnostics on spectra and states: level-spacing statistics,
//! normalized energy, inverse participation ratio, cavity populations and the
//! second-order photon correlation.

use faer::linalg::solvers::SolveLstsq;
use faer::Mat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::basis::{OccupationState, Sector, SectorBasis};
use crate::error::{Error, Result};
use crate::hamiltonian::{assemble, DisorderRealization, HamiltonianMatrix, ModelParams, Surmise};
use crate::spectral::{decompose, SpectralDecomposition, StateVector};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Below this many levels polynomial unfolding falls back to the mean spacing.
pub const MIN_LEVELS_FOR_POLYNOMIAL: usize = 64;

/// How raw level spacings are normalized.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Unfolding {
    /// Divide by the mean spacing of the whole spectrum.
    Mean,
    /// Least-squares polynomial fit of the level staircase `N(E)` on the
    /// standardized energy axis; `trim` drops that fraction of spacings at
    /// each spectral edge.
    Polynomial { order: usize, trim: f64 },
}

impl Default for Unfolding {
    fn default() -> Self {
        Unfolding::Polynomial { order: 6, trim: 0.1 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpacingOptions {
    pub unfolding: Unfolding,
    pub bins: usize,
    pub s_max: f64,
    pub surmise: Surmise,
}

impl Default for SpacingOptions {
    fn default() -> Self {
        Self { unfolding: Unfolding::default(), bins: 40, s_max: 4.0, surmise: Surmise::Wigner }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpacingHistogram {
    pub bin_edges: Vec<f64>,
    pub densities: Vec<f64>,
    /// Raw mean spacing in energy units before normalization.
    pub mean_spacing_used: f64,
    /// The unfolding actually applied (after any small-spectrum fallback).
    pub unfolding: Unfolding,
    /// Normalized spacings in spectral order.
    pub spacings: Vec<f64>,
    /// Kolmogorov-Smirnov distance of the spacings to the chosen surmise.
    pub ks_distance: f64,
    pub surmise: Surmise,
}

impl SpacingHistogram {
    pub fn bin_width(&self) -> f64 {
        self.bin_edges[1] - self.bin_edges[0]
    }

    pub fn bin_centers(&self) -> impl Iterator<Item = f64> + '_ {
        self.bin_edges.windows(2).map(|w| 0.5 * (w[0] + w[1]))
    }
}

/// Nearest-neighbour spacing statistics of an ascending spectrum.
pub fn level_spacings(eigvals: &[f64], options: &SpacingOptions) -> Result<SpacingHistogram> {
    if eigvals.len() < 3 {
        return Err(Error::invalid(format!("need at least 3 levels, got {}", eigvals.len())));
    }
    if eigvals.windows(2).any(|w| !(w[1] >= w[0])) {
        return Err(Error::invalid("eigenvalues must be finite and ascending"));
    }
    if options.bins == 0 || !(options.s_max > 0.0) {
        return Err(Error::invalid("histogram needs positive bins and s_max"));
    }
    let raw_mean = (eigvals[eigvals.len() - 1] - eigvals[0]) / (eigvals.len() - 1) as f64;
    if !(raw_mean > 0.0) {
        return Err(Error::DegenerateSpectrum { width: 0.0 });
    }

    let mut unfolding = options.unfolding;
    if let Unfolding::Polynomial { order, .. } = unfolding {
        if eigvals.len() < MIN_LEVELS_FOR_POLYNOMIAL.max(4 * (order + 1)) {
            unfolding = Unfolding::Mean;
        }
    }
    let mut spacings: Vec<f64> = match unfolding {
        Unfolding::Mean => eigvals.windows(2).map(|w| w[1] - w[0]).collect(),
        Unfolding::Polynomial { order, trim } => {
            if !(0.0..0.5).contains(&trim) {
                return Err(Error::invalid("trim fraction must lie in [0, 0.5)"));
            }
            let unfolded = unfold_polynomial(eigvals, order)?;
            let all: Vec<f64> = unfolded.windows(2).map(|w| w[1] - w[0]).collect();
            let k = (trim * all.len() as f64) as usize;
            all[k..all.len() - k].to_vec()
        }
    };
    let mean = spacings.iter().sum::<f64>() / spacings.len() as f64;
    if !(mean > 0.0) {
        return Err(Error::invalid("unfolded spectrum has non-positive mean spacing"));
    }
    for s in &mut spacings {
        *s /= mean;
    }

    let top = options.s_max.max(spacings.iter().cloned().fold(0.0, f64::max) * (1.0 + 1e-12));
    let width = top / options.bins as f64;
    let bin_edges: Vec<f64> = (0..=options.bins).map(|k| k as f64 * width).collect();
    let mut counts = vec![0usize; options.bins];
    for &s in &spacings {
        let k = ((s / width) as usize).min(options.bins - 1);
        counts[k] += 1;
    }
    let n = spacings.len() as f64;
    let densities = counts.iter().map(|&c| c as f64 / (n * width)).collect();
    let ks_distance = ks_distance(&spacings, |s| options.surmise.cdf(s));

    Ok(SpacingHistogram {
        bin_edges,
        densities,
        mean_spacing_used: raw_mean,
        unfolding,
        spacings,
        ks_distance,
        surmise: options.surmise,
    })
}

/// Smooth staircase values at each level.
fn unfold_polynomial(eigvals: &[f64], order: usize) -> Result<Vec<f64>> {
    let n = eigvals.len();
    let mean = eigvals.iter().sum::<f64>() / n as f64;
    let std = (eigvals.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
    let x: Vec<f64> = eigvals.iter().map(|e| (e - mean) / std).collect();
    let design = Mat::from_fn(n, order + 1, |i, k| x[i].powi(k as i32));
    let rhs = Mat::from_fn(n, 1, |i, _| i as f64);
    let coeffs = design.qr().solve_lstsq(&rhs);
    let out: Vec<f64> = x
        .iter()
        .map(|&xi| (0..=order).rev().fold(0.0, |acc, k| acc * xi + coeffs[(k, 0)]))
        .collect();
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("polynomial unfolding produced non-finite values"));
    }
    Ok(out)
}

/// Two-sided Kolmogorov-Smirnov distance between a sample and a CDF.
pub fn ks_distance(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted.iter().enumerate().fold(0.0f64, |d, (i, &s)| {
        let f = cdf(s);
        d.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs())
    })
}

/// `(<psi0|H|psi0> - E_min) / (E_max - E_min)`.
pub fn normalized_energy(dec: &SpectralDecomposition, psi0: &StateVector) -> Result<f64> {
    let (min, max) = (dec.min_energy(), dec.max_energy());
    let width = max - min;
    if !(width > 1e-12 * (1.0 + min.abs().max(max.abs()))) {
        return Err(Error::DegenerateSpectrum { width });
    }
    let overlaps = dec.project(psi0)?;
    let energy: f64 = overlaps.iter().zip(dec.energies()).map(|(c, e)| c.norm_sqr() * e).sum();
    Ok((energy - min) / width)
}

/// Inverse participation ratio `Σ |c_i|^4` in the site basis.
pub fn ipr(psi: &StateVector) -> Result<f64> {
    let norm = psi.norm_sqr();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::NotNormalized { norm_sqr: norm });
    }
    Ok(ipr_of(psi.amplitudes()))
}

pub(crate) fn ipr_of(amplitudes: &[Complex64]) -> f64 {
    amplitudes.iter().map(|c| c.norm_sqr().powi(2)).sum()
}

/// Cavity occupation probabilities at one time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopulationSample {
    pub t: f64,
    pub p1: f64,
    pub p2: f64,
    pub n_c: f64,
}

impl PopulationSample {
    pub fn p0(&self) -> f64 {
        1.0 - self.p1 - self.p2
    }
}

/// Photon-number probabilities of `psi` (time stamp 0).
pub fn cavity_population(basis: &SectorBasis, psi: &StateVector) -> Result<PopulationSample> {
    if psi.dim() != basis.dim() {
        return Err(Error::DimensionMismatch { expected: basis.dim(), found: psi.dim() });
    }
    let norm = psi.norm_sqr();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::NotNormalized { norm_sqr: norm });
    }
    Ok(population_of(basis, psi.amplitudes(), 0.0))
}

pub(crate) fn population_of(basis: &SectorBasis, amplitudes: &[Complex64], t: f64) -> PopulationSample {
    let (mut p1, mut p2) = (0.0, 0.0);
    for (state, c) in basis.states().iter().zip(amplitudes) {
        match state.cavity_photons {
            1 => p1 += c.norm_sqr(),
            2 => p2 += c.norm_sqr(),
            _ => {}
        }
    }
    PopulationSample { t, p1, p2, n_c: p1 + 2.0 * p2 }
}

/// Default floor on `n_c(t) n_c(t+tau)` below which g2 is undefined.
pub const G2_FLOOR: f64 = 1e-8;

/// Cavity annihilation between adjacent excitation blocks.
#[derive(Clone, Debug)]
struct Lowering {
    /// (source index within the upper block, target index within the lower block, sqrt(c)).
    entries: Vec<(usize, usize, f64)>,
    target_dim: usize,
}

impl Lowering {
    fn new(basis: &SectorBasis, upper: u32) -> Self {
        let src = basis.block_range(upper).expect("block present in N<=2 basis");
        let dst = basis.block_range(upper - 1).expect("block present in N<=2 basis");
        let entries = src
            .clone()
            .filter_map(|i| {
                let s = basis.state(i);
                (s.cavity_photons > 0).then(|| {
                    let lowered = OccupationState::new(s.cavity_photons - 1, s.excitons);
                    let j = basis.index_of(&lowered).expect("lowered state in basis");
                    (i - src.start, j - dst.start, (s.cavity_photons as f64).sqrt())
                })
            })
            .collect();
        Self { entries, target_dim: dst.len() }
    }

    fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![ZERO; self.target_dim];
        for &(i, j, f) in &self.entries {
            out[j] += v[i] * f;
        }
        out
    }
}

/// Block eigendecompositions of the N=2 and N=1 excitation blocks together
/// with the lowering maps between them, for two-time photon correlations.
pub struct PhotonLadder {
    basis: SectorBasis,
    two: SpectralDecomposition,
    one: SpectralDecomposition,
    lower_two: Lowering,
    lower_one: Lowering,
    n2_basis: SectorBasis,
}

impl PhotonLadder {
    pub fn build(disorder: &DisorderRealization, params: &ModelParams) -> Result<Self> {
        let basis = SectorBasis::build(params.sites, Sector::UpToTwo)?;
        let h = assemble(&basis, disorder, params)?;
        Self::from_hamiltonian(basis, &h)
    }

    /// `h` must be the N<=2 Hamiltonian over `basis`.
    pub fn from_hamiltonian(basis: SectorBasis, h: &HamiltonianMatrix) -> Result<Self> {
        if basis.sector() != Sector::UpToTwo {
            return Err(Error::invalid("photon correlations need the N<=2 basis"));
        }
        if h.dim() != basis.dim() {
            return Err(Error::DimensionMismatch { expected: basis.dim(), found: h.dim() });
        }
        let r2 = basis.block_range(2).expect("N=2 block");
        let r1 = basis.block_range(1).expect("N=1 block");
        let two = decompose(&h.block(r2))?;
        let one = decompose(&h.block(r1))?;
        let lower_two = Lowering::new(&basis, 2);
        let lower_one = Lowering::new(&basis, 1);
        let n2_basis = SectorBasis::build(basis.sites(), Sector::Two)?;
        Ok(Self { basis, two, one, lower_two, lower_one, n2_basis })
    }

    pub fn basis(&self) -> &SectorBasis {
        &self.basis
    }

    /// Decomposition of the N=2 block, whose basis order matches `Sector::Two`.
    pub fn two_excitation(&self) -> &SpectralDecomposition {
        &self.two
    }

    /// `g2(t, tau)` for an initial state in the N=2 block, one entry per delay.
    /// Points whose denominator falls below `floor` are `Err(UndefinedCorrelator)`.
    pub fn g2_series(&self, psi0: &StateVector, t: f64, taus: &[f64], floor: f64) -> Result<Vec<Result<f64>>> {
        if t < 0.0 || taus.iter().any(|tau| !(*tau >= 0.0)) {
            return Err(Error::invalid("g2 needs t >= 0 and tau >= 0"));
        }
        let prop2 = self.two.propagator(psi0)?;
        let psi_t = prop2.at(t);
        let n_t = population_of(&self.n2_basis, psi_t.amplitudes(), t).n_c;
        // a U(t) psi0 lives in the N=1 block.
        let lowered = StateVector::from_raw(self.lower_two.apply(psi_t.amplitudes()));
        let overlaps1 = self.one.project(&lowered)?;
        let vectors = self.one.vectors();
        let d1 = self.one.dim();
        let mut out = Vec::with_capacity(taus.len());
        for &tau in taus {
            let n_tau = population_of(&self.n2_basis, prop2.at(t + tau).amplitudes(), t + tau).n_c;
            let denom = n_t * n_tau;
            if !(denom > floor) {
                out.push(Err(Error::UndefinedCorrelator { value: denom, floor }));
                continue;
            }
            let mut evolved = vec![ZERO; d1];
            for (n, (c, e)) in overlaps1.iter().zip(self.one.energies()).enumerate() {
                let w = c * Complex64::from_polar(1.0, -e * tau);
                for (i, x) in evolved.iter_mut().enumerate() {
                    *x += vectors[(i, n)] * w;
                }
            }
            let vacuum = self.lower_one.apply(&evolved);
            let numerator: f64 = vacuum.iter().map(|c| c.norm_sqr()).sum();
            out.push(Ok(numerator / denom));
        }
        Ok(out)
    }

    pub fn g2(&self, psi0: &StateVector, t: f64, tau: f64, floor: f64) -> Result<f64> {
        self.g2_series(psi0, t, &[tau], floor)?.pop().expect("one delay")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::sample_disorder;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn opts(unfolding: Unfolding) -> SpacingOptions {
        SpacingOptions { unfolding, ..Default::default() }
    }

    #[test]
    fn picket_fence() {
        let h = level_spacings(&[0.0, 1.0, 2.0, 3.0], &opts(Unfolding::default())).unwrap();
        assert_eq!(h.unfolding, Unfolding::Mean);
        assert_eq!(h.spacings, vec![1.0; 3]);
        let f = Surmise::Wigner.cdf(1.0);
        assert!((h.ks_distance - f.max(1.0 - f)).abs() < 1e-15);
    }

    #[test]
    fn histogram_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut e: Vec<f64> = (0..500).map(|_| rng.random::<f64>()).collect();
        e.sort_by(f64::total_cmp);
        for unfolding in [Unfolding::Mean, Unfolding::default()] {
            let h = level_spacings(&e, &opts(unfolding)).unwrap();
            let total: f64 = h.densities.iter().sum::<f64>() * h.bin_width();
            assert!((total - 1.0).abs() < 1e-6);
            let mean = h.spacings.iter().sum::<f64>() / h.spacings.len() as f64;
            assert!((mean - 1.0).abs() < 1e-3);
            assert!(h.densities.iter().all(|d| *d >= 0.0));
        }
        let h = level_spacings(&e, &opts(Unfolding::Mean)).unwrap();
        assert_eq!(h.spacings.len(), e.len() - 1);
    }

    #[test]
    fn poisson_spectrum_is_far_from_wigner() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut e: Vec<f64> = (0..2000).map(|_| rng.random::<f64>()).collect();
        e.sort_by(f64::total_cmp);
        let h = level_spacings(&e, &opts(Unfolding::default())).unwrap();
        assert!(h.ks_distance >= 0.1, "{}", h.ks_distance);
    }

    #[test]
    fn polynomial_unfolding_flattens_smooth_density() {
        // Quantiles of the density (1 + x/2)/2 on [-1, 1]; its staircase is quadratic.
        let n = 400;
        let e: Vec<f64> = (0..n)
            .map(|i| {
                let q = (i as f64 + 0.5) / n as f64;
                // Solve x^2/8 + x/2 + 3/8 = q.
                -2.0 + (4.0 - 4.0 * (0.75 - 2.0 * q) / 1.0).sqrt()
            })
            .collect();
        let h = level_spacings(&e, &opts(Unfolding::Polynomial { order: 6, trim: 0.1 })).unwrap();
        let max_dev = h.spacings.iter().map(|s| (s - 1.0).abs()).fold(0.0, f64::max);
        assert!(max_dev < 1e-6, "{max_dev}");
    }

    #[test]
    fn spacing_errors() {
        assert!(level_spacings(&[0.0, 1.0], &SpacingOptions::default()).is_err());
        assert!(level_spacings(&[0.0, 2.0, 1.0], &SpacingOptions::default()).is_err());
        assert!(level_spacings(&[1.0, 1.0, 1.0], &SpacingOptions::default()).is_err());
    }

    #[test]
    fn ks_of_exact_quantiles_is_small() {
        // Sample at mid-quantiles of the surmise: distance is 1/(2n).
        let n = 1000;
        let sample: Vec<f64> = (0..n)
            .map(|i| {
                let q = (i as f64 + 0.5) / n as f64;
                (-4.0 / std::f64::consts::PI * (1.0 - q).ln()).sqrt()
            })
            .collect();
        let d = ks_distance(&sample, |s| Surmise::Wigner.cdf(s));
        assert!((d - 0.5 / n as f64).abs() < 1e-9, "{d}");
    }

    fn model(sites: usize, g: f64, seed: u64) -> (SectorBasis, SpectralDecomposition) {
        let basis = SectorBasis::build(sites, Sector::Two).unwrap();
        let dis = sample_disorder(sites, 1.0, seed).unwrap();
        let h = assemble(&basis, &dis, &ModelParams::new(1.0, g, sites).unwrap()).unwrap();
        let dec = decompose(&h).unwrap();
        (basis, dec)
    }

    #[test]
    fn normalized_energy_edges_and_shift() {
        let (_, dec) = model(5, 0.7, 2);
        assert!(normalized_energy(&dec, &dec.eigenstate(0)).unwrap().abs() < 1e-12);
        let top = dec.dim() - 1;
        assert!((normalized_energy(&dec, &dec.eigenstate(top)).unwrap() - 1.0).abs() < 1e-12);

        let sites = 5;
        let basis = SectorBasis::build(sites, Sector::Two).unwrap();
        let dis = sample_disorder(sites, 1.0, 2).unwrap();
        let psi = StateVector::basis_state(basis.dim(), 0);
        let e: Vec<f64> = [1.0, 7.5]
            .iter()
            .map(|&w0| {
                let h = assemble(&basis, &dis, &ModelParams::new(w0, 0.7, sites).unwrap()).unwrap();
                normalized_energy(&decompose(&h).unwrap(), &psi).unwrap()
            })
            .collect();
        assert!((e[0] - e[1]).abs() < 1e-12);
    }

    #[test]
    fn ipr_limits() {
        assert_eq!(ipr(&StateVector::basis_state(10, 3)).unwrap(), 1.0);
        let d = 16;
        let psi = StateVector::normalized(vec![Complex64::new(1.0, 0.0); d]).unwrap();
        assert!((ipr(&psi).unwrap() - 1.0 / d as f64).abs() < 1e-15);
        assert!(ipr(&StateVector::from_raw(vec![Complex64::new(2.0, 0.0)])).is_err());
    }

    #[test]
    fn population_of_cavity_state() {
        let basis = SectorBasis::build(4, Sector::Two).unwrap();
        let p = cavity_population(&basis, &StateVector::basis_state(basis.dim(), 0)).unwrap();
        assert_eq!((p.p1, p.p2, p.n_c), (0.0, 1.0, 2.0));
        let other = SectorBasis::build(5, Sector::Two).unwrap();
        assert!(cavity_population(&other, &StateVector::basis_state(basis.dim(), 0)).is_err());
    }

    #[test]
    fn population_rabi_single_site() {
        let g = 0.37;
        let (basis, dec) = model(1, g, 0);
        let psi0 = StateVector::basis_state(basis.dim(), 0);
        let prop = dec.propagator(&psi0).unwrap();
        for k in 0..50 {
            let t = k as f64 * 0.21;
            let p = population_of(&basis, prop.at(t).amplitudes(), t);
            let expected = 1.0 + (2f64.sqrt() * g * t).cos().powi(2);
            assert!((p.n_c - expected).abs() < 1e-10);
            assert!((p.p0() + p.p1 + p.p2 - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn g2_decoupled_fock_state() {
        let sites = 3;
        let dis = sample_disorder(sites, 1.0, 5).unwrap();
        let ladder = PhotonLadder::build(&dis, &ModelParams::new(1.0, 0.0, sites).unwrap()).unwrap();
        let psi0 = StateVector::basis_state(ladder.two_excitation().dim(), 0);
        for (t, tau) in [(0.0, 0.0), (1.3, 0.0), (0.4, 2.2), (7.0, 11.0)] {
            let v = ladder.g2(&psi0, t, tau, G2_FLOOR).unwrap();
            assert!((v - 0.5).abs() < 1e-12, "{v}");
        }
    }

    #[test]
    fn g2_undefined_without_photons() {
        let sites = 3;
        let dis = sample_disorder(sites, 1.0, 5).unwrap();
        let ladder = PhotonLadder::build(&dis, &ModelParams::new(1.0, 0.0, sites).unwrap()).unwrap();
        // Two excitons, empty cavity, no coupling: n_c stays zero.
        let basis2 = SectorBasis::build(sites, Sector::Two).unwrap();
        let idx = basis2.index_of(&OccupationState::new(0, 0b011)).unwrap();
        let psi0 = StateVector::basis_state(basis2.dim(), idx);
        assert!(matches!(ladder.g2(&psi0, 1.0, 0.5, G2_FLOOR), Err(Error::UndefinedCorrelator { .. })));
    }
}
