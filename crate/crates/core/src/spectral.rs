//! Hermitian eigendecomposition and spectral propagation of pure states.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::evd::{self, ComputeEigenvectors};
use faer::linalg::matmul::matmul;
use faer::diag::Diag;
use faer::{Accum, Mat, MatRef, Par};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::hamiltonian::HamiltonianMatrix;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Normalized pure state over a sector basis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateVector(Vec<Complex64>);

impl StateVector {
    /// Wraps amplitudes that must already be normalized to within 1e-8.
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        let norm_sqr: f64 = amplitudes.iter().map(|z| z.norm_sqr()).sum();
        if (norm_sqr - 1.0).abs() > 1e-8 {
            return Err(Error::NotNormalized { norm_sqr });
        }
        Ok(Self(amplitudes))
    }

    /// Rescales arbitrary nonzero amplitudes to unit norm.
    pub fn normalized(mut amplitudes: Vec<Complex64>) -> Result<Self> {
        let norm = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::NotNormalized { norm_sqr: norm * norm });
        }
        for z in &mut amplitudes {
            *z /= norm;
        }
        Ok(Self(amplitudes))
    }

    /// Unit vector on basis index `index`.
    pub fn basis_state(dim: usize, index: usize) -> Self {
        let mut v = vec![ZERO; dim];
        v[index] = Complex64::new(1.0, 0.0);
        Self(v)
    }

    pub(crate) fn from_raw(amplitudes: Vec<Complex64>) -> Self {
        Self(amplitudes)
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.0
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn probabilities(&self) -> impl Iterator<Item = f64> + '_ {
        self.0.iter().map(|z| z.norm_sqr())
    }
}

/// Eigenvalues (ascending) and the unitary whose columns are eigenvectors.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    energies: Vec<f64>,
    vectors: Mat<Complex64>,
}

impl SpectralDecomposition {
    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn vectors(&self) -> MatRef<'_, Complex64> {
        self.vectors.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn min_energy(&self) -> f64 {
        self.energies[0]
    }

    pub fn max_energy(&self) -> f64 {
        self.energies[self.energies.len() - 1]
    }

    /// Eigenvector `n` as a state.
    pub fn eigenstate(&self, n: usize) -> StateVector {
        StateVector::from_raw(self.vectors.col(n).iter().copied().collect())
    }

    /// Overlaps `<n|psi>` for every eigenvector.
    pub fn project(&self, psi: &StateVector) -> Result<Vec<Complex64>> {
        self.check_dim(psi.dim())?;
        let amps = psi.amplitudes();
        Ok((0..self.dim())
            .map(|n| {
                let col = self.vectors.col(n);
                let mut acc = ZERO;
                for (v, a) in col.iter().zip(amps) {
                    acc += v.conj() * a;
                }
                acc
            })
            .collect())
    }

    /// `max |V†V - I|`.
    pub fn orthonormality_error(&self) -> f64 {
        let d = self.dim();
        let mut gram = Mat::<Complex64>::zeros(d, d);
        matmul(
            gram.as_mut(),
            Accum::Replace,
            self.vectors.adjoint(),
            self.vectors.as_ref(),
            Complex64::new(1.0, 0.0),
            Par::Seq,
        );
        let mut worst = 0.0f64;
        for j in 0..d {
            for i in 0..d {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((gram[(i, j)] - Complex64::new(target, 0.0)).norm());
            }
        }
        worst
    }

    /// `max |V diag(E) V† - H|`.
    pub fn reconstruction_error(&self, h: &HamiltonianMatrix) -> f64 {
        let d = self.dim();
        let scaled = Mat::from_fn(d, d, |i, n| self.vectors[(i, n)] * self.energies[n]);
        let mut rebuilt = Mat::<Complex64>::zeros(d, d);
        matmul(
            rebuilt.as_mut(),
            Accum::Replace,
            scaled.as_ref(),
            self.vectors.adjoint(),
            Complex64::new(1.0, 0.0),
            Par::Seq,
        );
        let mut worst = 0.0f64;
        for j in 0..d {
            for i in 0..d {
                worst = worst.max((rebuilt[(i, j)] - h.get(i, j)).norm());
            }
        }
        worst
    }

    fn check_dim(&self, found: usize) -> Result<()> {
        if found != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found });
        }
        Ok(())
    }

    /// Propagator for `psi0`, caching its eigenbasis overlaps.
    pub fn propagator(&self, psi0: &StateVector) -> Result<Propagator<'_>> {
        Ok(Propagator { dec: self, overlaps: self.project(psi0)? })
    }
}

/// Full eigendecomposition of a Hermitian matrix (lower triangle is read).
pub fn decompose(h: &HamiltonianMatrix) -> Result<SpectralDecomposition> {
    let d = h.dim();
    let mut vectors = Mat::<Complex64>::zeros(d, d);
    let mut values = Diag::<Complex64>::zeros(d);
    // Sequential on purpose: results must not depend on the thread count.
    let par = Par::Seq;
    let mut mem = MemBuffer::new(evd::self_adjoint_evd_scratch::<Complex64>(
        d,
        ComputeEigenvectors::Yes,
        par,
        Default::default(),
    ));
    evd::self_adjoint_evd(
        h.matrix().as_ref(),
        values.as_mut(),
        Some(vectors.as_mut()),
        par,
        MemStack::new(&mut mem),
        Default::default(),
    )
    .map_err(|_| Error::EigenSolverFailed { digest: h.digest() })?;
    let energies: Vec<f64> = values.column_vector().iter().map(|z| z.re).collect();
    if energies.iter().any(|e| !e.is_finite()) {
        return Err(Error::EigenSolverFailed { digest: h.digest() });
    }
    Ok(SpectralDecomposition { energies, vectors })
}

/// Eigenvalues only, for spectral statistics.
pub fn eigenvalues(h: &HamiltonianMatrix) -> Result<Vec<f64>> {
    eigenvalues_of(h.matrix().as_ref()).map_err(|_| Error::EigenSolverFailed { digest: h.digest() })
}

/// Ascending eigenvalues of a small dense Hermitian matrix.
pub(crate) fn hermitian_eigenvalues(m: &Mat<Complex64>) -> Result<Vec<f64>> {
    eigenvalues_of(m.as_ref()).map_err(|_| Error::EigenSolverFailed { digest: "dense".into() })
}

fn eigenvalues_of(m: MatRef<'_, Complex64>) -> std::result::Result<Vec<f64>, ()> {
    let d = m.nrows();
    let mut values = Diag::<Complex64>::zeros(d);
    let par = Par::Seq;
    let mut mem = MemBuffer::new(evd::self_adjoint_evd_scratch::<Complex64>(
        d,
        ComputeEigenvectors::No,
        par,
        Default::default(),
    ));
    evd::self_adjoint_evd(m, values.as_mut(), None, par, MemStack::new(&mut mem), Default::default())
        .map_err(|_| ())?;
    let out: Vec<f64> = values.column_vector().iter().map(|z| z.re).collect();
    if out.iter().any(|e| !e.is_finite()) {
        return Err(());
    }
    Ok(out)
}

/// Spectral propagator `psi(t) = Σ_n exp(-i E_n t) <n|psi0> |n>`.
pub struct Propagator<'a> {
    dec: &'a SpectralDecomposition,
    overlaps: Vec<Complex64>,
}

impl Propagator<'_> {
    pub fn overlaps(&self) -> &[Complex64] {
        &self.overlaps
    }

    pub fn at(&self, t: f64) -> StateVector {
        let d = self.dec.dim();
        let mut out = vec![ZERO; d];
        for n in 0..d {
            let coeff = self.overlaps[n] * phase(self.dec.energies[n], t);
            if coeff == ZERO {
                continue;
            }
            for (o, v) in out.iter_mut().zip(self.dec.vectors.col(n).iter()) {
                *o += v * coeff;
            }
        }
        StateVector::from_raw(out)
    }

    /// States at all `times` as the columns of a `d x times.len()` matrix.
    pub fn at_times(&self, times: &[f64]) -> Mat<Complex64> {
        let d = self.dec.dim();
        let phases = Mat::from_fn(d, times.len(), |n, k| self.overlaps[n] * phase(self.dec.energies[n], times[k]));
        let mut out = Mat::<Complex64>::zeros(d, times.len());
        matmul(
            out.as_mut(),
            Accum::Replace,
            self.dec.vectors.as_ref(),
            phases.as_ref(),
            Complex64::new(1.0, 0.0),
            Par::Seq,
        );
        out
    }
}

fn phase(energy: f64, t: f64) -> Complex64 {
    let (s, c) = (-energy * t).sin_cos();
    Complex64::new(c, s)
}

/// `psi(t)` for a single time.
pub fn evolve(dec: &SpectralDecomposition, psi0: &StateVector, t: f64) -> Result<StateVector> {
    Ok(dec.propagator(psi0)?.at(t))
}

/// `psi(t_k)` for an ordered, nonnegative grid.
pub fn evolve_batch(dec: &SpectralDecomposition, psi0: &StateVector, times: &[f64]) -> Result<Vec<StateVector>> {
    validate_grid(times)?;
    let prop = dec.propagator(psi0)?;
    let states = prop.at_times(times);
    Ok((0..times.len())
        .map(|k| StateVector::from_raw(states.col(k).iter().copied().collect()))
        .collect())
}

pub(crate) fn validate_grid(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::invalid("time grid is empty"));
    }
    if times.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
        return Err(Error::invalid("time grid must be finite and nonnegative"));
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("time grid must be sorted"));
    }
    Ok(())
}

/// On-disk store of decompositions keyed by a caller-chosen string, so that
/// interrupted sweeps can resume without repeating eigensolves.
///
/// Files are written to a temporary name and renamed, so concurrent writers
/// of the same key race harmlessly.
#[derive(Clone, Debug)]
pub struct DecompositionCache {
    dir: PathBuf,
}

const CACHE_MAGIC: &[u8; 8] = b"TCEVD001";

impl DecompositionCache {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        fs::create_dir_all(dir.as_ref())?;
        Ok(Self { dir: dir.as_ref().to_path_buf() })
    }

    fn path(&self, key: &str) -> PathBuf {
        let name = hex::encode(Sha256::digest(key.as_bytes()));
        self.dir.join(format!("{name}.evd"))
    }

    pub fn get(&self, key: &str) -> Result<Option<SpectralDecomposition>> {
        let path = self.path(key);
        let mut file = match fs::File::open(&path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        let mut bytes = Vec::new();
        file.read_to_end(&mut bytes)?;
        if bytes.len() < 16 || &bytes[..8] != CACHE_MAGIC {
            return Ok(None);
        }
        let d = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        if bytes.len() != 16 + 8 * (d + 2 * d * d) {
            return Ok(None);
        }
        let mut words = bytes[16..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        let energies: Vec<f64> = words.by_ref().take(d).collect();
        let mut vectors = Mat::<Complex64>::zeros(d, d);
        for j in 0..d {
            for i in 0..d {
                let re = words.next().unwrap();
                let im = words.next().unwrap();
                vectors[(i, j)] = Complex64::new(re, im);
            }
        }
        Ok(Some(SpectralDecomposition { energies, vectors }))
    }

    pub fn put(&self, key: &str, dec: &SpectralDecomposition) -> Result<()> {
        let path = self.path(key);
        let d = dec.dim();
        let mut bytes = Vec::with_capacity(16 + 8 * (d + 2 * d * d));
        bytes.extend_from_slice(CACHE_MAGIC);
        bytes.extend_from_slice(&(d as u64).to_le_bytes());
        for e in &dec.energies {
            bytes.extend_from_slice(&e.to_le_bytes());
        }
        for j in 0..d {
            for z in dec.vectors.col(j).iter() {
                bytes.extend_from_slice(&z.re.to_le_bytes());
                bytes.extend_from_slice(&z.im.to_le_bytes());
            }
        }
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        let mut file = fs::File::create(&tmp)?;
        file.write_all(&bytes)?;
        file.sync_all()?;
        fs::rename(&tmp, &path)?;
        Ok(())
    }

    pub fn get_or_compute(
        &self,
        key: &str,
        compute: impl FnOnce() -> Result<SpectralDecomposition>,
    ) -> Result<SpectralDecomposition> {
        if let Some(dec) = self.get(key)? {
            return Ok(dec);
        }
        let dec = compute()?;
        self.put(key, &dec)?;
        Ok(dec)
    }
}
