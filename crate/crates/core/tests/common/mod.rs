//! Brute-force references on the full cavity (0..=2 photons) times 2^L
//! exciton product space, built from operator products.

#![allow(dead_code)]

use chaotic_tc::basis::{OccupationState, SectorBasis};
use chaotic_tc::hamiltonian::DisorderRealization;
use faer::Mat;
use num_complex::Complex64;

pub type C = Complex64;

pub fn c(re: f64) -> C {
    C::new(re, 0.0)
}

/// Full-space index of `|c; bits>`: `c * 2^L + bits`.
pub fn full_index(sites: usize, state: &OccupationState) -> usize {
    state.cavity_photons as usize * (1 << sites) + state.excitons as usize
}

pub fn full_dim(sites: usize) -> usize {
    3 << sites
}

/// Cavity annihilation, truncated at two photons.
pub fn cavity_lowering(sites: usize) -> Mat<C> {
    let d = full_dim(sites);
    let n = 1usize << sites;
    Mat::from_fn(d, d, |row, col| {
        let (cr, br) = (row / n, row % n);
        let (cc, bc) = (col / n, col % n);
        if br == bc && cc == cr + 1 {
            c((cc as f64).sqrt())
        } else {
            c(0.0)
        }
    })
}

/// Hardcore-boson annihilation on one site.
pub fn site_lowering(sites: usize, site: usize) -> Mat<C> {
    let d = full_dim(sites);
    let n = 1usize << sites;
    let bit = 1usize << site;
    Mat::from_fn(d, d, |row, col| {
        let (cr, br) = (row / n, row % n);
        let (cc, bc) = (col / n, col % n);
        if cr == cc && bc & bit != 0 && br == bc & !bit {
            c(1.0)
        } else {
            c(0.0)
        }
    })
}

pub fn scale(m: &Mat<C>, z: C) -> Mat<C> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * z)
}

pub fn dagger(m: &Mat<C>) -> Mat<C> {
    m.adjoint().to_owned()
}

pub fn identity(d: usize) -> Mat<C> {
    Mat::from_fn(d, d, |i, j| if i == j { c(1.0) } else { c(0.0) })
}

/// `ω₀(a†a + Σ n) - Σ_{i≠j} h_ij b†_i b_j + Σ_{k<l} u_kl n_k n_l + g Σ (a† b_i + b†_i a)`.
pub fn full_hamiltonian(dis: &DisorderRealization, omega0: f64, g: f64) -> Mat<C> {
    let sites = dis.sites();
    let d = full_dim(sites);
    let a = cavity_lowering(sites);
    let ad = dagger(&a);
    let b: Vec<Mat<C>> = (0..sites).map(|i| site_lowering(sites, i)).collect();
    let bd: Vec<Mat<C>> = b.iter().map(dagger).collect();
    let num: Vec<Mat<C>> = (0..sites).map(|i| &bd[i] * &b[i]).collect();
    let mut h = scale(&(&ad * &a), c(omega0));
    for i in 0..sites {
        h = h + scale(&num[i], c(omega0));
        h = h + scale(&(&ad * &b[i] + &bd[i] * &a), c(g));
        for j in 0..sites {
            if i != j {
                h = h - scale(&(&bd[i] * &b[j]), dis.hopping(i, j));
            }
        }
        for l in i + 1..sites {
            h = h + scale(&(&num[i] * &num[l]), c(dis.interaction(i, l)));
        }
    }
    assert_eq!(h.nrows(), d);
    h
}

/// Rows/columns of `m` restricted to the states of `basis`.
pub fn restrict(m: &Mat<C>, basis: &SectorBasis) -> Mat<C> {
    let idx: Vec<usize> = basis.states().iter().map(|s| full_index(basis.sites(), s)).collect();
    Mat::from_fn(idx.len(), idx.len(), |i, j| m[(idx[i], idx[j])])
}

/// Embed sector amplitudes into the full space.
pub fn embed(amps: &[C], basis: &SectorBasis) -> Vec<C> {
    let mut out = vec![c(0.0); full_dim(basis.sites())];
    for (a, s) in amps.iter().zip(basis.states()) {
        out[full_index(basis.sites(), s)] = *a;
    }
    out
}

pub fn one_norm(m: &Mat<C>) -> f64 {
    (0..m.ncols()).map(|j| (0..m.nrows()).map(|i| m[(i, j)].norm()).sum::<f64>()).fold(0.0, f64::max)
}

/// `exp(m)` by scaling and squaring with a truncated Taylor series.
pub fn expm(m: &Mat<C>) -> Mat<C> {
    let d = m.nrows();
    let norm = one_norm(m);
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
    let scaled = scale(m, c(0.5f64.powi(squarings as i32)));
    let mut term = identity(d);
    let mut sum = identity(d);
    for k in 1..=30 {
        term = scale(&(&term * &scaled), c(1.0 / k as f64));
        sum = sum + &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

pub fn matvec(m: &Mat<C>, v: &[C]) -> Vec<C> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)] * v[j]).sum()).collect()
}

pub fn norm_sqr(v: &[C]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// Partial trace of a full-space density matrix onto the exciton `sites`,
/// tracing the cavity and all other sites, by enumerating full-space indices.
pub fn full_partial_trace(rho: &Mat<C>, lattice_sites: usize, subsystem: &[usize]) -> Mat<C> {
    let n = 1usize << lattice_sites;
    let local = |bits: usize| -> usize {
        subsystem.iter().enumerate().map(|(k, &s)| ((bits >> s) & 1) << k).sum()
    };
    let env = |idx: usize| -> (usize, usize) {
        let (cav, bits) = (idx / n, idx % n);
        let mask: usize = subsystem.iter().map(|s| 1 << s).sum();
        (cav, bits & !mask)
    };
    let k = 1usize << subsystem.len();
    let mut out = Mat::<C>::zeros(k, k);
    let d = rho.nrows();
    for i in 0..d {
        for j in 0..d {
            if env(i) == env(j) {
                let (li, lj) = (local(i % n), local(j % n));
                out[(li, lj)] += rho[(i, j)];
            }
        }
    }
    out
}

pub fn outer(v: &[C]) -> Mat<C> {
    Mat::from_fn(v.len(), v.len(), |i, j| v[i] * v[j].conj())
}
