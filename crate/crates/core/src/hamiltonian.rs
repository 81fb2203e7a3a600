//! Disorder sampling and dense assembly of the cavity + exciton Hamiltonian
//!
//! ```text
//! H = w0 a†a + w0 Σ_i n_i - Σ_{i≠j} h_ij b†_i b_j + Σ_{k<l} u_kl n_k n_l
//!     + g Σ_i (b†_i a + a† b_i)
//! ```
//!
//! `h` is a complex Hermitian Gaussian matrix and `u` a real symmetric one,
//! both with zero diagonal and entry variance `sigma^2`.

use faer::Mat;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::basis::{OccupationState, Sector, SectorBasis};
use crate::error::{Error, Result};

/// Reduced Planck constant in meV·ps.
pub const HBAR_MEV_PS: f64 = 0.6582119;

/// One draw of the exciton coupling disorder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisorderRealization {
    sites: usize,
    sigma: f64,
    seed: u64,
    /// Row-major `L x L`, Hermitian, zero diagonal.
    hopping: Vec<Complex64>,
    /// Row-major `L x L`, real symmetric, zero diagonal.
    interaction: Vec<f64>,
}

impl DisorderRealization {
    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn hopping(&self, i: usize, j: usize) -> Complex64 {
        self.hopping[i * self.sites + j]
    }

    pub fn interaction(&self, k: usize, l: usize) -> f64 {
        self.interaction[k * self.sites + l]
    }

    /// Reproducibility record: sizes, seed and SHA-256 digests of both matrices.
    pub fn record(&self) -> RealizationRecord {
        let mut hasher = Sha256::new();
        for z in &self.hopping {
            hasher.update(z.re.to_le_bytes());
            hasher.update(z.im.to_le_bytes());
        }
        let hopping_digest = hex::encode(hasher.finalize());
        let mut hasher = Sha256::new();
        for x in &self.interaction {
            hasher.update(x.to_le_bytes());
        }
        let interaction_digest = hex::encode(hasher.finalize());
        RealizationRecord {
            sites: self.sites,
            sigma: self.sigma,
            seed: self.seed,
            hopping_digest,
            interaction_digest,
        }
    }

    /// Builds a realization from explicit matrices (row-major), enforcing the
    /// symmetry and zero-diagonal invariants.
    pub fn from_matrices(
        sites: usize,
        sigma: f64,
        hopping: Vec<Complex64>,
        interaction: Vec<f64>,
    ) -> Result<Self> {
        let n = sites * sites;
        if hopping.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: hopping.len() });
        }
        if interaction.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: interaction.len() });
        }
        for i in 0..sites {
            if hopping[i * sites + i] != Complex64::new(0.0, 0.0) || interaction[i * sites + i] != 0.0 {
                return Err(Error::invalid("disorder matrices must have a zero diagonal"));
            }
            for j in 0..i {
                if hopping[i * sites + j] != hopping[j * sites + i].conj() {
                    return Err(Error::NotHermitian {
                        deviation: (hopping[i * sites + j] - hopping[j * sites + i].conj()).norm(),
                    });
                }
                if interaction[i * sites + j] != interaction[j * sites + i] {
                    return Err(Error::invalid("interaction matrix must be symmetric"));
                }
            }
        }
        Ok(Self { sites, sigma, seed: 0, hopping, interaction })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealizationRecord {
    pub sites: usize,
    pub sigma: f64,
    pub seed: u64,
    pub hopping_digest: String,
    pub interaction_digest: String,
}

/// Draw `h` and `u` with entry standard deviation `sigma`.
///
/// Entries are drawn as standard normals from a ChaCha8 stream seeded with
/// `seed`, then scaled, so equal `(sites, sigma, seed)` give bit-identical
/// matrices.
pub fn sample_disorder(sites: usize, sigma: f64, seed: u64) -> Result<DisorderRealization> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::invalid(format!("sigma must be positive and finite, got {sigma}")));
    }
    if sites == 0 {
        return Err(Error::invalid("lattice must have at least one site"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = sites * sites;
    let mut hopping = vec![Complex64::new(0.0, 0.0); n];
    let mut interaction = vec![0.0; n];
    let half = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..sites {
        for j in (i + 1)..sites {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            let u: f64 = StandardNormal.sample(&mut rng);
            let h = Complex64::new(re * half * sigma, im * half * sigma);
            hopping[i * sites + j] = h;
            hopping[j * sites + i] = h.conj();
            interaction[i * sites + j] = u * sigma;
            interaction[j * sites + i] = u * sigma;
        }
    }
    Ok(DisorderRealization { sites, sigma, seed, hopping, interaction })
}

/// The GUE normalization `sigma = 1/sqrt(d)` for a sector of dimension `d`.
pub fn sigma_for_dimension(dim: usize) -> f64 {
    1.0 / (dim as f64).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Common cavity and exciton frequency.
    pub omega0: f64,
    /// Cavity-exciton exchange rate.
    pub coupling: f64,
    pub sites: usize,
}

impl ModelParams {
    pub fn new(omega0: f64, coupling: f64, sites: usize) -> Result<Self> {
        let p = Self { omega0, coupling, sites };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.omega0.is_finite() {
            return Err(Error::invalid("omega0 must be finite"));
        }
        if !(self.coupling >= 0.0) || !self.coupling.is_finite() {
            return Err(Error::invalid(format!("coupling must be finite and >= 0, got {}", self.coupling)));
        }
        Ok(())
    }
}

/// Dense Hermitian Hamiltonian over a [`SectorBasis`].
#[derive(Clone, Debug)]
pub struct HamiltonianMatrix {
    matrix: Mat<Complex64>,
    sites: usize,
    sector: Sector,
}

impl HamiltonianMatrix {
    /// Wraps an arbitrary Hermitian matrix, e.g. for testing the eigensolver.
    pub fn from_dense(matrix: Mat<Complex64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch { expected: matrix.nrows(), found: matrix.ncols() });
        }
        let dev = hermiticity_deviation(&matrix);
        if dev > 1e-12 * (1.0 + max_abs(&matrix)) {
            return Err(Error::NotHermitian { deviation: dev });
        }
        Ok(Self { matrix, sites: 0, sector: Sector::Two })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &Mat<Complex64> {
        &self.matrix
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.matrix[(row, col)]
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn sector(&self) -> Sector {
        self.sector
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> f64 {
        max_abs(&self.matrix)
    }

    /// Square sub-block on the index range, e.g. one excitation block.
    pub fn block(&self, range: std::ops::Range<usize>) -> HamiltonianMatrix {
        let n = range.len();
        let matrix = Mat::from_fn(n, n, |i, j| self.matrix[(range.start + i, range.start + j)]);
        HamiltonianMatrix { matrix, sites: self.sites, sector: self.sector }
    }

    /// `<v|H|v>` for a vector over the same basis.
    pub fn expectation(&self, v: &[Complex64]) -> f64 {
        let d = self.dim();
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..d {
            if v[j] == Complex64::new(0.0, 0.0) {
                continue;
            }
            let col = self.matrix.col(j);
            let mut hv = Complex64::new(0.0, 0.0);
            for i in 0..d {
                hv += v[i].conj() * col[i];
            }
            acc += hv * v[j];
        }
        acc.re
    }

    /// SHA-256 of the raw entries, used in error reports and cache keys.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        for j in 0..self.dim() {
            for z in self.matrix.col(j).iter() {
                hasher.update(z.re.to_le_bytes());
                hasher.update(z.im.to_le_bytes());
            }
        }
        hex::encode(hasher.finalize())
    }
}

fn max_abs(m: &Mat<Complex64>) -> f64 {
    let mut best = 0.0f64;
    for j in 0..m.ncols() {
        for z in m.col(j).iter() {
            best = best.max(z.norm());
        }
    }
    best
}

pub(crate) fn hermiticity_deviation(m: &Mat<Complex64>) -> f64 {
    let mut dev = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..=j {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

/// Assemble the Hamiltonian in `basis`.
///
/// Column by column: the diagonal carries `w0 * N + Σ_{k<l} u_kl n_k n_l`,
/// hopping moves one exciton (`<..1_i..|H|..1_j..> = -h_ij`), and the
/// cavity exchange carries the bosonic `sqrt(n)` factors, e.g.
/// `<1;1_i|H|2;0> = sqrt(2) g`.
pub fn assemble(
    basis: &SectorBasis,
    disorder: &DisorderRealization,
    params: &ModelParams,
) -> Result<HamiltonianMatrix> {
    params.validate()?;
    let sites = basis.sites();
    if disorder.sites() != sites {
        return Err(Error::DimensionMismatch { expected: sites, found: disorder.sites() });
    }
    if params.sites != sites {
        return Err(Error::DimensionMismatch { expected: sites, found: params.sites });
    }
    let d = basis.dim();
    let mut matrix = Mat::<Complex64>::zeros(d, d);
    let g = params.coupling;
    let index = |s: &OccupationState| basis.index_of(s).expect("move stays inside the sector");

    for (col, state) in basis.states().iter().enumerate() {
        let occupied: Vec<usize> = state.occupied_sites().collect();

        let mut diag = params.omega0 * state.excitations() as f64;
        for (a, &k) in occupied.iter().enumerate() {
            for &l in &occupied[a + 1..] {
                diag += disorder.interaction(k, l);
            }
        }
        matrix[(col, col)] = Complex64::new(diag, 0.0);

        for &from in &occupied {
            for to in 0..sites {
                if state.is_occupied(to) {
                    continue;
                }
                let target = OccupationState::new(state.cavity_photons, state.excitons ^ (1 << from) ^ (1 << to));
                matrix[(index(&target), col)] += -disorder.hopping(to, from);
            }
        }

        if g != 0.0 {
            // a† b_j: exciton absorbed into the cavity.
            if state.cavity_photons < 2 {
                let factor = g * ((state.cavity_photons + 1) as f64).sqrt();
                for &j in &occupied {
                    let target = OccupationState::new(state.cavity_photons + 1, state.excitons ^ (1 << j));
                    if let Some(row) = basis.index_of(&target) {
                        matrix[(row, col)] += Complex64::new(factor, 0.0);
                    }
                }
            }
            // b†_j a: photon emitted onto site j.
            if state.cavity_photons > 0 {
                let factor = g * (state.cavity_photons as f64).sqrt();
                for j in 0..sites {
                    if state.is_occupied(j) {
                        continue;
                    }
                    let target = OccupationState::new(state.cavity_photons - 1, state.excitons | (1 << j));
                    if let Some(row) = basis.index_of(&target) {
                        matrix[(row, col)] += Complex64::new(factor, 0.0);
                    }
                }
            }
        }
    }
    Ok(HamiltonianMatrix { matrix, sites, sector: basis.sector() })
}

/// Which closed-form level-spacing law to compare against.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Surmise {
    /// `p(s) = (pi s / 2) exp(-pi s^2 / 4)`.
    #[default]
    Wigner,
    /// Unitary-class surmise `p(s) = (32/pi^2) s^2 exp(-4 s^2 / pi)`.
    Gue,
}

impl Surmise {
    pub fn density(self, s: f64) -> Result<f64> {
        if !(s >= 0.0) {
            return Err(Error::invalid(format!("level spacing must be >= 0, got {s}")));
        }
        let pi = std::f64::consts::PI;
        Ok(match self {
            Surmise::Wigner => pi * s / 2.0 * (-pi * s * s / 4.0).exp(),
            Surmise::Gue => 32.0 / (pi * pi) * s * s * (-4.0 * s * s / pi).exp(),
        })
    }

    /// Cumulative distribution, closed form.
    pub fn cdf(self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        let pi = std::f64::consts::PI;
        match self {
            Surmise::Wigner => 1.0 - (-pi * s * s / 4.0).exp(),
            Surmise::Gue => {
                libm::erf(2.0 * s / pi.sqrt()) - 4.0 * s / pi * (-4.0 * s * s / pi).exp()
            }
        }
    }
}

/// Level-spacing density `(pi s / 2) exp(-pi s^2 / 4)`.
pub fn wigner_dyson_density(s: f64) -> Result<f64> {
    Surmise::Wigner.density(s)
}
