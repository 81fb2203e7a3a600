mod common;

use chaotic_tc::basis::{Sector, SectorBasis, SiteSet};
use chaotic_tc::hamiltonian::{assemble, sample_disorder, ModelParams};
use chaotic_tc::observables::{PhotonLadder, G2_FLOOR};
use chaotic_tc::spectral::{decompose, StateVector};
use chaotic_tc::thermal::{gibbs_weights, reduce_state, thermal_reduced};
use common::*;
use faer::Mat;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn random_state(rng: &mut ChaCha8Rng, d: usize) -> StateVector {
    let amps = (0..d)
        .map(|_| C::new(StandardNormal.sample(rng), StandardNormal.sample(rng)))
        .collect();
    StateVector::normalized(amps).unwrap()
}

#[test]
fn sector_hamiltonian_matches_operator_products() {
    for (sites, seed, g) in [(1, 1, 0.4), (3, 2, 0.9), (5, 3, 1.7), (6, 4, 0.05)] {
        let dis = sample_disorder(sites, 1.3, seed).unwrap();
        let full = full_hamiltonian(&dis, 0.8, g);
        for sector in [Sector::Two, Sector::UpToTwo] {
            let basis = SectorBasis::build(sites, sector).unwrap();
            let h = assemble(&basis, &dis, &ModelParams::new(0.8, g, sites).unwrap()).unwrap();
            let reference = restrict(&full, &basis);
            for i in 0..basis.dim() {
                for j in 0..basis.dim() {
                    assert!((h.get(i, j) - reference[(i, j)]).norm() < 1e-14, "L={sites} ({i},{j})");
                }
            }
        }
    }
}

#[test]
fn full_hamiltonian_conserves_excitations() {
    // Blocks of different N do not couple, so the sector restriction is exact.
    let sites = 4;
    let dis = sample_disorder(sites, 1.0, 9).unwrap();
    let full = full_hamiltonian(&dis, 1.0, 0.7);
    let n = 1usize << sites;
    let excitations = |idx: usize| idx / n + (idx % n).count_ones() as usize;
    for i in 0..full.nrows() {
        for j in 0..full.ncols() {
            if excitations(i) != excitations(j) && excitations(i).max(excitations(j)) <= 2 {
                assert_eq!(full[(i, j)], c(0.0));
            }
        }
    }
}

#[test]
fn spectral_propagator_matches_matrix_exponential() {
    let sites = 4;
    let basis = SectorBasis::build(sites, Sector::Two).unwrap();
    let dis = sample_disorder(sites, 1.0, 21).unwrap();
    let h = assemble(&basis, &dis, &ModelParams::new(1.0, 0.6, sites).unwrap()).unwrap();
    let dec = decompose(&h).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let psi0 = random_state(&mut rng, basis.dim());
    let prop = dec.propagator(&psi0).unwrap();
    for t in [0.3, 2.0, 17.5] {
        let u = expm(&scale(h.matrix(), C::new(0.0, -t)));
        let reference = matvec(&u, psi0.amplitudes());
        let got = prop.at(t);
        let err = got.amplitudes().iter().zip(&reference).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-11, "t={t}: {err:e}");
    }
}

#[test]
fn reduced_states_match_full_space_partial_trace() {
    let sites = 4;
    let basis = SectorBasis::build(sites, Sector::Two).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for sub in [vec![0], vec![1, 3], vec![0, 2]] {
        let set = SiteSet::new(sub.clone(), sites).unwrap();
        for _ in 0..10 {
            let psi = random_state(&mut rng, basis.dim());
            let rho = reduce_state(&basis, &psi, &set).unwrap();
            let full = full_partial_trace(&outer(&embed(psi.amplitudes(), &basis)), sites, &sub);
            for i in 0..rho.dim() {
                for j in 0..rho.dim() {
                    assert!((rho.get(i, j) - full[(i, j)]).norm() < 1e-12);
                }
            }
            rho.validate().unwrap();
        }
    }
}

#[test]
fn thermal_reduction_matches_full_space_gibbs_state() {
    let sites = 4;
    let basis = SectorBasis::build(sites, Sector::Two).unwrap();
    let dis = sample_disorder(sites, 1.0, 31).unwrap();
    let (omega0, g) = (1.0, 0.8);
    let h = assemble(&basis, &dis, &ModelParams::new(omega0, g, sites).unwrap()).unwrap();
    let dec = decompose(&h).unwrap();
    let full = full_hamiltonian(&dis, omega0, g);
    let projector = Mat::from_fn(full.nrows(), full.ncols(), |i, j| {
        let in_sector = basis.states().iter().any(|s| full_index(sites, s) == i);
        if i == j && in_sector {
            c(1.0)
        } else {
            c(0.0)
        }
    });
    let set = SiteSet::new(vec![1, 2], sites).unwrap();
    for beta in [-0.7, 0.0, 1.9] {
        let gibbs = &projector * expm(&scale(&full, c(-beta))) * &projector;
        let z: f64 = (0..gibbs.nrows()).map(|i| gibbs[(i, i)].re).sum();
        let reference = full_partial_trace(&scale(&gibbs, c(1.0 / z)), sites, &[1, 2]);
        let th = thermal_reduced(&basis, &dec, beta, &set).unwrap();
        for i in 0..th.dim() {
            for j in 0..th.dim() {
                assert!((th.get(i, j) - reference[(i, j)]).norm() < 1e-12, "beta={beta}");
            }
        }
    }
    // Weights are normalized probabilities.
    let w = gibbs_weights(dec.energies(), 1.9);
    assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
}

#[test]
fn schmidt_spectra_agree_for_whole_register() {
    // Tracing out only the cavity: ρ_A shares its nonzero spectrum with the
    // cavity's diagonal photon-number distribution.
    let sites = 4;
    let basis = SectorBasis::build(sites, Sector::Two).unwrap();
    let dis = sample_disorder(sites, 1.0, 3).unwrap();
    let h = assemble(&basis, &dis, &ModelParams::new(1.0, 1.1, sites).unwrap()).unwrap();
    let dec = decompose(&h).unwrap();
    let prop = dec.propagator(&StateVector::basis_state(basis.dim(), 0)).unwrap();
    let whole = SiteSet::new((0..sites).collect(), sites).unwrap();
    for t in [0.0, 0.7, 3.1, 12.0] {
        let psi = prop.at(t);
        let rho = reduce_state(&basis, &psi, &whole).unwrap();
        let mut eig = rho.eigenvalues().unwrap();
        eig.sort_by(|a, b| b.total_cmp(a));
        let pop = chaotic_tc::observables::cavity_population(&basis, &psi).unwrap();
        let mut photons = vec![pop.p0(), pop.p1, pop.p2];
        photons.sort_by(|a, b| b.total_cmp(a));
        for k in 0..3 {
            assert!((eig[k] - photons[k]).abs() < 1e-12);
        }
        assert!(eig[3..].iter().all(|e| e.abs() < 1e-12));
    }
}

fn g2_oracle(sites: usize, g: f64, seed: u64, psi0: &[C], t: f64, tau: f64) -> f64 {
    let dis = sample_disorder(sites, 1.0, seed).unwrap();
    let full = full_hamiltonian(&dis, 1.0, g);
    let a = cavity_lowering(sites);
    let heis = |s: f64| {
        let u = expm(&scale(&full, C::new(0.0, -s)));
        dagger(&u) * &a * &u
    };
    let (a_t, a_tt) = (heis(t), heis(t + tau));
    let num_op = dagger(&a_t) * dagger(&a_tt) * &a_tt * &a_t;
    let n_t = dagger(&a_t) * &a_t;
    let n_tt = dagger(&a_tt) * &a_tt;
    let expect = |m: &Mat<C>| -> f64 {
        let mv = matvec(m, psi0);
        psi0.iter().zip(&mv).map(|(x, y)| x.conj() * y).sum::<C>().re
    };
    expect(&num_op) / (expect(&n_t) * expect(&n_tt))
}

#[test]
fn g2_matches_operator_products() {
    let sites = 2;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for (g, seed) in [(0.15, 1), (0.6, 2)] {
        let dis = sample_disorder(sites, 1.0, seed).unwrap();
        let ladder = PhotonLadder::build(&dis, &ModelParams::new(1.0, g, sites).unwrap()).unwrap();
        let two = SectorBasis::build(sites, Sector::Two).unwrap();
        let states = [StateVector::basis_state(two.dim(), 0), random_state(&mut rng, two.dim())];
        for psi0 in &states {
            let embedded = embed(psi0.amplitudes(), &two);
            for (t, tau) in [(0.0, 0.0), (0.8, 0.0), (1.3, 2.7), (5.0, 0.4)] {
                let got = ladder.g2(psi0, t, tau, G2_FLOOR).unwrap();
                let want = g2_oracle(sites, g, seed, &embedded, t, tau);
                assert!((got - want).abs() < 1e-10, "g={g} t={t} tau={tau}: {got} vs {want}");
            }
        }
    }
}

#[test]
fn g2_zero_delay_is_normally_ordered_moment() {
    let sites = 3;
    let dis = sample_disorder(sites, 1.0, 4).unwrap();
    let ladder = PhotonLadder::build(&dis, &ModelParams::new(1.0, 0.5, sites).unwrap()).unwrap();
    let two = ladder.two_excitation();
    let basis = SectorBasis::build(sites, Sector::Two).unwrap();
    let prop = two.propagator(&StateVector::basis_state(two.dim(), 0)).unwrap();
    for t in [0.0, 1.0, 4.0] {
        let pop = chaotic_tc::observables::cavity_population(&basis, &prop.at(t)).unwrap();
        // <a†a†aa> = 2 p2 in the N=2 sector.
        let expected = 2.0 * pop.p2 / (pop.n_c * pop.n_c);
        let got = ladder.g2(&StateVector::basis_state(two.dim(), 0), t, 0.0, G2_FLOOR).unwrap();
        assert!((got - expected).abs() < 1e-12);
    }
}
