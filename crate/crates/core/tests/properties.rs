use chaotic_tc::basis::{binomial, decompose, recombine, OccupationState, Sector, SectorBasis, SiteSet};
use chaotic_tc::hamiltonian::{assemble, sample_disorder, ModelParams};
use chaotic_tc::observables::{cavity_population, ipr};
use chaotic_tc::signal::{autocorrelate, moving_average_tail, TimeSeries};
use chaotic_tc::spectral::{self, StateVector};
use chaotic_tc::thermal::{match_beta, mean_energy, trace_distance, ReducedDensityMatrix};
use num_complex::Complex64;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn basis_round_trip(sites in 2usize..40, pick in any::<u64>()) {
        let basis = SectorBasis::build(sites, Sector::UpToTwo).unwrap();
        prop_assert_eq!(basis.dim(), 3 + 2 * sites + binomial(sites, 2));
        let i = (pick % basis.dim() as u64) as usize;
        let state = basis.state(i);
        prop_assert_eq!(basis.index_of(&state), Some(i));
        prop_assert!(state.excitations() <= 2);
    }

    #[test]
    fn decompose_recombine(sites in 4usize..30, a in any::<u64>(), b in any::<u64>(), cav in 0u8..=2) {
        let i = (a % sites as u64) as usize;
        let j = (b % sites as u64) as usize;
        let set = SiteSet::new(if i == j { vec![i] } else { vec![i, j] }, sites).unwrap();
        let excitons = if cav == 2 { 0 } else { 1u128 << ((a >> 8) % sites as u64) };
        let state = OccupationState::new(cav, excitons);
        let (local, rest) = decompose(&state, &set);
        prop_assert_eq!(recombine(local, &rest, &set), state);
    }

    #[test]
    fn hamiltonian_is_hermitian(sites in 1usize..9, seed in any::<u64>(), g in 0.0f64..5.0) {
        let basis = SectorBasis::build(sites, Sector::Two).unwrap();
        let dis = sample_disorder(sites, 1.0, seed).unwrap();
        let h = assemble(&basis, &dis, &ModelParams::new(1.0, g, sites).unwrap()).unwrap();
        for i in 0..h.dim() {
            for j in 0..h.dim() {
                prop_assert_eq!(h.get(i, j), h.get(j, i).conj());
            }
        }
    }

    #[test]
    fn evolution_preserves_norm_and_bounds(sites in 1usize..7, seed in any::<u64>(), g in 0.0f64..3.0, t in 0.0f64..100.0) {
        let basis = SectorBasis::build(sites, Sector::Two).unwrap();
        let dis = sample_disorder(sites, 1.0, seed).unwrap();
        let h = assemble(&basis, &dis, &ModelParams::new(1.0, g, sites).unwrap()).unwrap();
        let dec = spectral::decompose(&h).unwrap();
        let psi = spectral::evolve(&dec, &StateVector::basis_state(basis.dim(), 0), t).unwrap();
        prop_assert!((psi.norm_sqr() - 1.0).abs() < 1e-12);
        let p = ipr(&psi).unwrap();
        prop_assert!(p >= 1.0 / basis.dim() as f64 - 1e-12 && p <= 1.0 + 1e-12);
        let pop = cavity_population(&basis, &psi).unwrap();
        prop_assert!(pop.p1 >= 0.0 && pop.p2 >= 0.0 && pop.p1 + pop.p2 <= 1.0 + 1e-12);
        prop_assert!((pop.n_c - (pop.p1 + 2.0 * pop.p2)).abs() < 1e-15);
    }

    #[test]
    fn beta_residual_contract(levels in prop::collection::vec(-10.0f64..10.0, 2..60), q in 0.05f64..0.95) {
        let (min, max) = levels.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &e| (a.min(e), b.max(e)));
        prop_assume!(max - min > 1e-6);
        let target = min + q * (max - min);
        let m = match_beta(&levels, target).unwrap();
        prop_assert!(m.residual <= 1e-8 * (max - min));
        prop_assert!((mean_energy(&levels, m.beta) - target).abs() <= 1e-8 * (max - min));
    }

    #[test]
    fn trace_distance_is_a_metric(seed in any::<u64>()) {
        let [r, s, t] = random_density_matrices(seed);
        let d_rs = trace_distance(&r, &s).unwrap();
        let d_sr = trace_distance(&s, &r).unwrap();
        let d_st = trace_distance(&s, &t).unwrap();
        let d_rt = trace_distance(&r, &t).unwrap();
        prop_assert!((d_rs - d_sr).abs() < 1e-12);
        prop_assert!(d_rt <= d_rs + d_st + 1e-10);
        prop_assert!((0.0..=1.0).contains(&d_rs));
    }

    #[test]
    fn wiener_khinchin_matches_direct_sum(values in prop::collection::vec(-5.0f64..5.0, 4..300)) {
        let series = TimeSeries::new(0.0, 0.25, values.clone()).unwrap();
        let r = autocorrelate(&series).unwrap();
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let d: Vec<f64> = values.iter().map(|v| v - mean).collect();
        let c0: f64 = d.iter().map(|x| x * x).sum();
        prop_assume!(!r.zero_variance);
        for k in 0..d.len() {
            let direct: f64 = (0..d.len() - k).map(|t| d[t] * d[t + k]).sum();
            prop_assert!((r.c[k] - direct).abs() <= 1e-9 * c0);
        }
        prop_assert!(r.s.iter().all(|s| *s >= 0.0));
        prop_assert!(r.tau_c >= 0.0);
    }

    #[test]
    fn tail_average_of_constant(c in -3.0f64..3.0, n in 4usize..200, frac in 0.1f64..1.0) {
        let s = TimeSeries::new(0.0, 1.0, vec![c; n]).unwrap();
        let v = moving_average_tail(&s, frac, 1).unwrap();
        prop_assert!((v - c).abs() < 1e-12);
    }
}

/// Three random 8x8 density matrices `G G† / Tr` from one seed.
pub fn random_density_matrices(seed: u64) -> [ReducedDensityMatrix; 3] {
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let set = SiteSet::new(vec![0, 1, 2], 6).unwrap();
    std::array::from_fn(|_| {
        let n = 8;
        let g: Vec<Complex64> = (0..n * n)
            .map(|_| Complex64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)))
            .collect();
        let mut m = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for j in 0..n {
                m[i * n + j] = (0..n).map(|k| g[i * n + k] * g[j * n + k].conj()).sum();
            }
        }
        let tr: f64 = (0..n).map(|i| m[i * n + i].re).sum();
        for x in &mut m {
            *x /= tr;
        }
        for i in 0..n {
            m[i * n + i].im = 0.0;
        }
        ReducedDensityMatrix::from_entries(set.clone(), m).unwrap()
    })
}
