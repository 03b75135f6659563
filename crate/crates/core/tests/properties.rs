use gg_core::disorder::{sample_disorder, DisorderSample};
use gg_core::gibbs::{energies, GibbsTable};
use gg_core::model::{InteractionFamily, Preset, SpinConfiguration};
use gg_core::observables::{quenched_moment, Observable, OverlapMonomial};
use gg_core::Scheme;
use proptest::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;

fn presets() -> Vec<Preset> {
    vec![
        Preset::sk(5),
        Preset::ea(1, 6, true),
        Preset::ea(2, 3, true),
        Preset::ea(2, 3, false),
        Preset::LongRange {
            alpha: 0.75,
            dim: 1,
            side: 6,
            periodic: true,
        },
        Preset::PSpin { n: 6, p: 3 },
        Preset::RandomEnergy { n: 5 },
    ]
}

fn family_strategy() -> impl Strategy<Value = InteractionFamily> {
    (0..presets().len()).prop_map(|i| InteractionFamily::build(&presets()[i]).unwrap())
}

fn config(bits: u32, n: usize) -> SpinConfiguration {
    SpinConfiguration::new(bits & ((1u32 << n) - 1), n).unwrap()
}

/// Cyclic shift of a 1-d configuration by one site.
fn shift(s: &SpinConfiguration) -> SpinConfiguration {
    let n = s.volume();
    let spins: Vec<i8> = (0..n).map(|i| s.spin((i + 1) % n)).collect();
    SpinConfiguration::from_spins(&spins).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn covariance_obeys_schwartz(f in family_strategy(), a in any::<u32>(), b in any::<u32>()) {
        let n = f.volume();
        let (s, t) = (config(a, n), config(b, n));
        let st = f.covariance(&s, &t).unwrap().normalized;
        let ss = f.covariance(&s, &s).unwrap().normalized;
        let tt = f.covariance(&t, &t).unwrap().normalized;
        prop_assert!(st.abs() <= (ss * tt).sqrt() * (1.0 + 1e-12));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn covariance_is_symmetric_with_constant_diagonal(f in family_strategy(), a in any::<u32>(), b in any::<u32>()) {
        let n = f.volume();
        let (s, t) = (config(a, n), config(b, n));
        prop_assert_eq!(f.covariance(&s, &t).unwrap(), f.covariance(&t, &s).unwrap());
        let d = f.covariance(&s, &s).unwrap().normalized;
        prop_assert!((d - f.per_site_variance()).abs() <= 1e-14);
    }

    #[test]
    fn periodic_chain_covariance_is_translation_invariant(a in any::<u32>(), b in any::<u32>()) {
        for preset in [Preset::ea(1, 7, true), Preset::LongRange { alpha: 1.5, dim: 1, side: 7, periodic: true }] {
            let f = InteractionFamily::build(&preset).unwrap();
            let (s, t) = (config(a, 7), config(b, 7));
            let c0 = f.covariance(&s, &t).unwrap().normalized;
            let c1 = f.covariance(&shift(&s), &shift(&t)).unwrap().normalized;
            prop_assert!((c0 - c1).abs() <= 1e-14);
        }
    }

    #[test]
    fn stability_report_matches_site_weighted_variance(i in 0usize..3) {
        let preset = [Preset::ea(1, 5, true), Preset::ea(2, 3, true), Preset::sk(6)][i].clone();
        let f = InteractionFamily::build(&preset).unwrap();
        let r = f.stability_report();
        prop_assert!(r.satisfied);
        for site in 0..f.volume() as u32 {
            prop_assert!((f.site_weighted_variance(site) - r.per_site_variance).abs() <= 1e-12);
        }
    }

    #[test]
    fn gauge_flip_permutes_energies(f in family_strategy(), seed in any::<u64>(), site_pick in any::<usize>()) {
        let n = f.volume();
        let site = (site_pick % n) as u32;
        let s = sample_disorder(&f, seed, 0);
        let flipped = DisorderSample {
            couplings: s
                .couplings
                .iter()
                .zip(f.interactions())
                .map(|(j, it)| if it.contains(site) { -j } else { *j })
                .collect(),
            ..s.clone()
        };
        let e = energies(&f, &s).unwrap();
        let ef = energies(&f, &flipped).unwrap();
        for (state, &x) in e.iter().enumerate() {
            let g = state ^ (1usize << site);
            prop_assert!((x - ef[g]).abs() <= 1e-12 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn log_partition_derivative_is_minus_internal_energy(
        f in family_strategy(),
        seed in any::<u64>(),
        beta in 0.05f64..2.0,
    ) {
        let s = sample_disorder(&f, seed, 1);
        let h = 1e-4;
        let a = |b: f64| GibbsTable::enumerate(&f, &s, b).unwrap().log_partition();
        let d1 = (a(beta + h) - a(beta - h)) / (2.0 * h);
        let d2 = (a(beta + h / 2.0) - a(beta - h / 2.0)) / h;
        let deriv = (4.0 * d2 - d1) / 3.0;
        let u = GibbsTable::enumerate(&f, &s, beta).unwrap().internal_energy();
        prop_assert!((deriv + u).abs() <= 1e-7 * (1.0 + u.abs()));
    }

    #[test]
    fn log_partition_is_convex_in_beta(
        f in family_strategy(),
        seed in any::<u64>(),
        beta in 0.05f64..2.0,
    ) {
        let s = sample_disorder(&f, seed, 2);
        let h = 1e-2;
        let a = |b: f64| GibbsTable::enumerate(&f, &s, b).unwrap().log_partition();
        prop_assert!(a(beta + h) + a(beta - h) - 2.0 * a(beta) >= -1e-10);
    }
}

#[test]
fn exact_sampler_passes_chi_square() {
    let f = InteractionFamily::build(&Preset::sk(4)).unwrap();
    let s = sample_disorder(&f, 11, 0);
    let table = GibbsTable::enumerate(&f, &s, 0.9).unwrap();
    let sampler = table.sampler();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let draws = 20_000;
    let mut counts = [0usize; 16];
    for _ in 0..draws {
        counts[sampler.draw(&mut rng).bits() as usize] += 1;
    }
    let chi2: f64 = counts
        .iter()
        .zip(table.probabilities())
        .map(|(&c, &p)| {
            let e = p * draws as f64;
            (c as f64 - e).powi(2) / e
        })
        .sum();
    // 99.9% quantile of chi-square with 15 degrees of freedom.
    assert!(chi2 < 37.697, "chi2 = {chi2}");
}

#[test]
fn zero_beta_overlap_mean_vanishes() {
    let f = InteractionFamily::build(&Preset::ea(1, 4, true)).unwrap();
    let m = Observable::Monomial(OverlapMonomial::q(1, 2));
    let e = quenched_moment(&f, 0.0, &m, Scheme::MonteCarlo { samples: 20, seed: 1 }).unwrap();
    assert_eq!(e.mean, 0.0);
}
