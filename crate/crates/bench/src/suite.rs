//! The built-in desk-scale acceptance suite.

use std::fmt;
use std::time::Instant;

use gg_core::disorder::{builtin_test_functions, quenched_average, wick_check, EXACT_QUADRATURE_ORDER};
use gg_core::gibbs::GibbsTable;
use gg_core::identities::{
    analyze_deltas, classical_identities, delta1_closed, delta2_closed, energy_density_bound, free_energy_constant,
    free_energy_variance, gg_residuals, internal_energy_identity_check, internal_energy_second_moment_check,
    internal_energy_variance, DeltaAnalysis, Measure, ResidualCurve, DEFAULT_GRID_POINTS, DEFAULT_STEP,
};
use gg_core::model::{InteractionFamily, Preset, SpinConfiguration};
use gg_core::observables::{quenched_moment, Observable, OverlapMonomial};
use gg_core::Scheme;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::runner::{
    DUAL_TOLERANCE, ENERGY_FIRST_TOLERANCE, ENERGY_SECOND_TOLERANCE, SELF_OVERLAP_TOLERANCE, WICK_TOLERANCE,
};

/// Seed of every Monte Carlo estimate in the suite.
pub const SUITE_SEED: u64 = 20_240_607;
/// Disorder samples for the finite-size and variance criteria.
pub const SUITE_SAMPLES: usize = 2000;
/// System sizes of the finite-size criteria.
pub const TREND_SIZES: [usize; 3] = [4, 8, 12];
/// β-range of the finite-size criteria.
pub const TREND_RANGE: (f64, f64) = (0.2, 1.5);
/// Inverse temperatures of the dual-computation grid.
pub const DUAL_BETAS: [f64; 3] = [0.3, 0.7, 1.1];

const QUAD: Scheme = Scheme::Quadrature {
    order: EXACT_QUADRATURE_ORDER,
};

/// Verdict on one acceptance criterion.
#[derive(Debug, Clone, PartialEq)]
pub struct Criterion {
    pub id: u8,
    pub title: &'static str,
    /// Finite-size trends are reported but not required.
    pub soft: bool,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        let soft = if self.soft { " (soft)" } else { "" };
        write!(
            f,
            "criterion {:>2} [{verdict}]{soft} {} ({:.1}s): {}",
            self.id, self.title, self.seconds, self.detail
        )
    }
}

fn timed(id: u8, title: &'static str, soft: bool, f: impl FnOnce() -> (bool, String)) -> Criterion {
    let start = Instant::now();
    let (passed, detail) = f();
    Criterion {
        id,
        title,
        soft,
        passed,
        detail,
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn build(p: Preset) -> InteractionFamily {
    InteractionFamily::build(&p).expect("suite preset is valid")
}

/// Small families with at most three couplings on at most three sites.
pub fn small_families() -> Vec<(&'static str, InteractionFamily)> {
    vec![
        (
            "pair",
            InteractionFamily::custom(2, vec![(vec![0, 1], 1.0)], 1.0).expect("valid"),
        ),
        ("sk3", build(Preset::sk(3))),
        ("ea-chain3", build(Preset::ea(1, 3, false))),
        ("pspin3", build(Preset::PSpin { n: 3, p: 3 })),
        (
            "field-pair-triple",
            InteractionFamily::custom(3, vec![(vec![0], 0.5), (vec![1, 2], 0.25), (vec![0, 1, 2], 1.0)], 1.0)
                .expect("valid"),
        ),
    ]
}

/// One `(family, β, G, R)` point of the dual-computation grid.
#[derive(Debug, Clone)]
pub struct DualCase {
    pub family: &'static str,
    pub beta: f64,
    pub observable: OverlapMonomial,
    pub replicas: usize,
    pub analysis: DeltaAnalysis,
}

impl fmt::Display for DualCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} beta={} G={} R={}",
            self.family, self.beta, self.observable, self.replicas
        )
    }
}

/// Evaluates the dual-computation grid at quadrature order 40. Pairs where
/// `G` uses more replicas than `R` are not part of the grid.
pub fn dual_grid() -> Vec<DualCase> {
    let q12 = OverlapMonomial::q(1, 2);
    let chain = q12.times(&OverlapMonomial::q(2, 3));
    let mut out = Vec::new();
    for (name, fam) in small_families() {
        for beta in DUAL_BETAS {
            for g in [&q12, &chain] {
                for r in [2usize, 3] {
                    if g.max_replica() > r {
                        continue;
                    }
                    let analysis = analyze_deltas(&fam, beta, r, g, DEFAULT_STEP, QUAD).expect("dual grid is feasible");
                    out.push(DualCase {
                        family: name,
                        beta,
                        observable: g.clone(),
                        replicas: r,
                        analysis,
                    });
                }
            }
        }
    }
    out
}

fn dual_verdict(cases: &[DualCase], pick: impl Fn(&DeltaAnalysis) -> f64) -> (bool, String) {
    let worst = cases
        .iter()
        .max_by(|a, b| pick(&a.analysis).total_cmp(&pick(&b.analysis)))
        .expect("nonempty grid");
    let failing: Vec<String> = cases
        .iter()
        .filter(|c| pick(&c.analysis) > DUAL_TOLERANCE)
        .map(|c| format!("{c}: {:.2e}", pick(&c.analysis)))
        .collect();
    let mut detail = format!(
        "{} cases, max |difference| {:.2e} at {worst} (tolerance {DUAL_TOLERANCE:.0e})",
        cases.len(),
        pick(&worst.analysis)
    );
    if !failing.is_empty() {
        detail.push_str(&format!("; {} above tolerance: {}", failing.len(), failing.join("; ")));
        let rerun = rerun_at_higher_order(cases, &pick);
        if let Some(max) = rerun {
            detail.push_str(&format!(
                "; the failing cases with at most two couplings rerun at order {DIAGNOSTIC_ORDER} reach {max:.2e}"
            ));
        }
    }
    (failing.is_empty(), detail)
}

/// Quadrature order of the diagnostic rerun of failing dual cases.
pub const DIAGNOSTIC_ORDER: usize = 100;

/// Largest difference among failing cases with `K ≤ 2` when recomputed at
/// [`DIAGNOSTIC_ORDER`]; separates quadrature error from formula error.
fn rerun_at_higher_order(cases: &[DualCase], pick: &impl Fn(&DeltaAnalysis) -> f64) -> Option<f64> {
    let families = small_families();
    let scheme = Scheme::Quadrature {
        order: DIAGNOSTIC_ORDER,
    };
    cases
        .iter()
        .filter(|c| pick(&c.analysis) > DUAL_TOLERANCE)
        .filter_map(|c| {
            let fam = &families.iter().find(|(n, _)| *n == c.family)?.1;
            if fam.len() > 2 {
                return None;
            }
            let a = analyze_deltas(fam, c.beta, c.replicas, &c.observable, DEFAULT_STEP, scheme).ok()?;
            Some(pick(&a))
        })
        .reduce(f64::max)
}

pub fn criterion_1(cases: &[DualCase]) -> Criterion {
    timed(1, "closed vs derivative form of the thermal block", false, || {
        dual_verdict(cases, |a| a.delta1.discrepancy)
    })
}

pub fn criterion_2(cases: &[DualCase]) -> Criterion {
    timed(2, "closed vs covariance form of the disorder block", false, || {
        dual_verdict(cases, |a| a.delta2.discrepancy)
    })
}

pub fn criterion_3(cases: &[DualCase]) -> Criterion {
    timed(3, "sum rule against the direct energy covariance", false, || {
        dual_verdict(cases, |a| a.sum_discrepancy)
    })
}

pub fn criterion_4() -> Criterion {
    timed(
        4,
        "Gaussian integration by parts over the test-function suite",
        false,
        || {
            let mut worst = (0.0f64, String::new());
            let mut count = 0;
            for (name, fam) in small_families() {
                for (fname, psi) in builtin_test_functions(&fam) {
                    let r = wick_check(&fam, &psi, EXACT_QUADRATURE_ORDER).expect("feasible Wick check");
                    count += 1;
                    if r.max_residual > worst.0 || worst.1.is_empty() {
                        worst = (r.max_residual, format!("{name}/{fname}"));
                    }
                }
            }
            (
                worst.0 <= WICK_TOLERANCE,
                format!(
                    "{count} checks, max residual {:.2e} at {} (tolerance {WICK_TOLERANCE:.0e})",
                    worst.0, worst.1
                ),
            )
        },
    )
}

/// Inverse temperatures of the first-moment energy identity.
pub const ENERGY_FIRST_BETAS: [f64; 3] = [0.3, 0.5, 0.7];
/// Inverse temperatures of the second-moment energy identity; order-40
/// quadrature of unit-variance couplings is accurate to 1e-7 only for `β ≤ 0.5`.
pub const ENERGY_SECOND_BETAS: [f64; 2] = [0.3, 0.5];

pub fn criterion_5() -> Criterion {
    timed(5, "internal-energy identities by quadrature", false, || {
        let pair = &small_families()[0].1;
        let chain = build(Preset::ea(1, 3, false));
        let mut first = 0.0f64;
        let mut second = 0.0f64;
        let mut literal = f64::INFINITY;
        for beta in ENERGY_FIRST_BETAS {
            let r = internal_energy_identity_check(pair, beta, EXACT_QUADRATURE_ORDER).expect("K = 1");
            first = first.max(r.max_residual);
        }
        for beta in ENERGY_SECOND_BETAS {
            for fam in [pair, &chain] {
                let s = internal_energy_second_moment_check(fam, beta, EXACT_QUADRATURE_ORDER).expect("K <= 2");
                second = second.max(s.max_residual);
                literal = literal.min(s.bracket_only_gap);
            }
        }
        (
            first <= ENERGY_FIRST_TOLERANCE && second <= ENERGY_SECOND_TOLERANCE,
            format!(
                "first moment max residual {first:.2e} (tolerance {ENERGY_FIRST_TOLERANCE:.0e}); second moment \
                 max residual {second:.2e} with the diagonal X=Y term (tolerance {ENERGY_SECOND_TOLERANCE:.0e}); \
                 six-term bracket alone misses by at least {literal:.2e}"
            ),
        )
    })
}

pub fn criterion_6() -> Criterion {
    timed(6, "stability constants", false, || {
        let mut failures = Vec::new();
        let mut checked = 0;
        for d in 1..=3usize {
            let sides: &[usize] = match d {
                1 => &[2, 3, 4, 8, 16],
                2 => &[2, 3, 4, 8, 16],
                _ => &[2, 3, 4],
            };
            for &l in sides {
                let v = build(Preset::ea(d, l, true)).per_site_variance();
                checked += 1;
                if (v - d as f64).abs() > 1e-12 {
                    failures.push(format!("ea d={d} L={l}: {v}"));
                }
            }
        }
        for n in 2..=24usize {
            let v = build(Preset::sk(n)).per_site_variance();
            let want = (n as f64 - 1.0) / (2.0 * n as f64);
            checked += 1;
            if (v - want).abs() > 1e-12 {
                failures.push(format!("sk n={n}: {v} vs {want}"));
            }
        }
        for n in 1..=20usize {
            let v = build(Preset::RandomEnergy { n }).per_site_variance();
            let want = 1.0 - 2f64.powi(-(n as i32));
            checked += 1;
            if (v - want).abs() > 1e-12 {
                failures.push(format!("rem n={n}: {v} vs {want}"));
            }
        }
        let mut long_range_failures = Vec::new();
        let mut long_range_worst = Vec::new();
        for alpha in [0.75, 1.5] {
            for d in [1usize, 2] {
                let cbar = (2.0 * alpha - 1.0f64).powi(-(d as i32));
                let mut worst = (0.0f64, 0usize);
                for l in 2..=16usize {
                    for periodic in [true, false] {
                        let v = build(Preset::LongRange {
                            alpha,
                            dim: d,
                            side: l,
                            periodic,
                        })
                        .per_site_variance();
                        checked += 1;
                        if v > worst.0 {
                            worst = (v, l);
                        }
                        if v > cbar * (1.0 + 1e-12) {
                            long_range_failures.push(format!(
                                "alpha={alpha} d={d} L={l} {}: {v:.4} > {cbar:.4}",
                                if periodic { "periodic" } else { "free" }
                            ));
                        }
                    }
                }
                long_range_worst.push(format!(
                    "alpha={alpha} d={d}: max {:.4} at L={} vs {cbar:.4}",
                    worst.0, worst.1
                ));
            }
        }
        let n_lr = long_range_failures.len();
        let mut detail = format!("{checked} families checked");
        if !failures.is_empty() {
            detail.push_str(&format!("; exact-constant mismatches: {}", failures.join("; ")));
        }
        if n_lr > 0 {
            detail.push_str(&format!("; long-range above (2a-1)^-d in {n_lr} cases"));
        }
        detail.push_str(&format!("; long-range {}", long_range_worst.join(", ")));
        (failures.is_empty() && n_lr == 0, detail)
    })
}

fn trend_verdict(label: &str, curves: &[(usize, ResidualCurve)]) -> (bool, String) {
    let first = &curves.first().expect("sizes").1;
    let last = &curves.last().expect("sizes").1;
    let parts: Vec<String> = curves
        .iter()
        .map(|(n, c)| {
            format!(
                "N={n}: {:.3e} [{:.3e}, {:.3e}]",
                c.average().abs(),
                c.abs_average.lower,
                c.abs_average.upper
            )
        })
        .collect();
    let ok = last.abs_average.upper < first.abs_average.lower;
    (ok, format!("{label} {}", parts.join(", ")))
}

fn trend_scheme() -> Scheme {
    Scheme::MonteCarlo {
        samples: SUITE_SAMPLES,
        seed: SUITE_SEED,
    }
}

pub fn criterion_7() -> Criterion {
    timed(7, "classical identities shrink with N", true, || {
        let mut r1 = Vec::new();
        let mut r2 = Vec::new();
        for n in TREND_SIZES {
            let fam = build(Preset::sk(n));
            let (a, b) = classical_identities(
                &fam,
                TREND_RANGE,
                DEFAULT_GRID_POINTS,
                Measure::BetaSquared,
                trend_scheme(),
            )
            .expect("SK is enumerable");
            r1.push((n, a));
            r2.push((n, b));
        }
        let (ok1, d1) = trend_verdict("|avg r1|", &r1);
        let (ok2, d2) = trend_verdict("|avg r2|", &r2);
        (ok1 && ok2, format!("{d1}; {d2}"))
    })
}

pub fn criterion_8() -> Criterion {
    timed(8, "integrated identity residuals shrink with N", true, || {
        let g = OverlapMonomial::q(1, 2);
        let mut first = Vec::new();
        let mut second = Vec::new();
        for n in TREND_SIZES {
            let fam = build(Preset::sk(n));
            let (a, b) = gg_residuals(
                &fam,
                2,
                &g,
                TREND_RANGE,
                DEFAULT_GRID_POINTS,
                Measure::BetaSquared,
                trend_scheme(),
            )
            .expect("SK is enumerable");
            first.push((n, a));
            second.push((n, b));
        }
        let (ok1, d1) = trend_verdict("|avg thermal|", &first);
        let (ok2, d2) = trend_verdict("|avg disorder|", &second);
        (ok1 && ok2, format!("{d1}; {d2}"))
    })
}

pub fn criterion_9() -> Criterion {
    timed(9, "self-averaging variance bounds", false, || {
        let fam = build(Preset::sk(10));
        let cbar = fam.claimed_bound();
        let mut ok = true;
        let mut parts = Vec::new();
        for beta in [0.5, 1.0] {
            let a = free_energy_variance(&fam, beta, SUITE_SAMPLES, SUITE_SEED).expect("enough samples");
            let u = internal_energy_variance(&fam, beta, SUITE_SAMPLES, SUITE_SEED).expect("enough samples");
            let (va, ua, ba) = a.normalized();
            debug_assert!((ba - free_energy_constant(beta, cbar)).abs() < 1e-15);
            let bu = energy_density_bound(beta, cbar);
            ok &= ua < ba && u.upper < bu;
            parts.push(format!(
                "beta={beta}: V(A)/N={va:.4} (upper {ua:.4} vs {ba:.4}), V(u)={:.5} (upper {:.5} vs {bu:.4})",
                u.estimate, u.upper
            ));
        }
        (ok, parts.join("; "))
    })
}

fn schwartz_triples(count: usize) -> Result<(), String> {
    let families = [
        build(Preset::sk(6)),
        build(Preset::ea(2, 3, true)),
        build(Preset::PSpin { n: 6, p: 3 }),
        build(Preset::RandomEnergy { n: 5 }),
        build(Preset::LongRange {
            alpha: 0.75,
            dim: 1,
            side: 7,
            periodic: true,
        }),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(SUITE_SEED);
    for _ in 0..count {
        let f = &families[(rng.next_u32() as usize) % families.len()];
        let n = f.volume();
        let mask = (1u32 << n) - 1;
        let s = SpinConfiguration::new(rng.next_u32() & mask, n).expect("in range");
        let t = SpinConfiguration::new(rng.next_u32() & mask, n).expect("in range");
        let st = f.covariance(&s, &t).expect("same volume").normalized;
        let ss = f.covariance(&s, &s).expect("same volume").normalized;
        let tt = f.covariance(&t, &t).expect("same volume").normalized;
        if st.abs() > (ss * tt).sqrt() * (1.0 + 1e-12) {
            return Err(format!("{f}: |c(s,t)|={st} exceeds sqrt(c(s,s)c(t,t))"));
        }
    }
    Ok(())
}

fn determinism_fingerprint() -> Vec<u64> {
    let fam = build(Preset::sk(5));
    let scheme = Scheme::MonteCarlo {
        samples: 200,
        seed: SUITE_SEED,
    };
    let (a, b) = classical_identities(&fam, (0.2, 1.2), 5, Measure::BetaSquared, scheme).expect("enumerable");
    let mut out = Vec::new();
    for c in [a, b] {
        out.push(c.integral.mean.to_bits());
        out.push(c.integral.stderr.to_bits());
        out.extend(c.residuals.iter().map(|r| r.mean.to_bits()));
    }
    let v = free_energy_variance(&fam, 0.8, 200, SUITE_SEED).expect("enough samples");
    out.push(v.estimate.to_bits());
    out.push(v.upper.to_bits());
    out
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool")
        .install(f)
}

pub fn criterion_10() -> Criterion {
    timed(10, "trivial cases, Schwartz inequality, determinism", false, || {
        let mut problems: Vec<String> = Vec::new();
        let mut check = |ok: bool, what: String| {
            if !ok {
                problems.push(what);
            }
        };
        let q12 = OverlapMonomial::q(1, 2);
        let one = OverlapMonomial::one();
        let mc = Scheme::MonteCarlo {
            samples: 200,
            seed: SUITE_SEED,
        };
        let families = small_families();
        let sk4 = build(Preset::sk(4));
        for (name, fam, scheme) in families
            .iter()
            .map(|(n, f)| (*n, f, QUAD))
            .chain(std::iter::once(("sk4", &sk4, mc)))
        {
            let d1 = delta1_closed(fam, 0.0, 2, &q12, scheme).expect("feasible").mean;
            let d2 = delta2_closed(fam, 0.0, 2, &q12, scheme).expect("feasible").mean;
            check(d1 == 0.0 && d2 == 0.0, format!("{name}: beta=0 blocks {d1} {d2}"));
            let q = quenched_moment(fam, 0.0, &Observable::Monomial(q12.clone()), scheme)
                .expect("feasible")
                .mean;
            check(q == 0.0, format!("{name}: beta=0 <q12> = {q}"));
            let u = quenched_average(fam, scheme, |s| {
                GibbsTable::enumerate(fam, s, 0.0)
                    .expect("enumerable")
                    .internal_energy()
            })
            .expect("feasible")
            .mean;
            check(u.abs() <= 1e-12, format!("{name}: beta=0 Av U = {u}"));
            for beta in [0.4, 0.9] {
                let c1 = delta1_closed(fam, beta, 3, &one, scheme).expect("feasible").mean;
                let c2 = delta2_closed(fam, beta, 3, &one, scheme).expect("feasible").mean;
                check(
                    c1.abs() <= 1e-14 && c2.abs() <= 1e-14,
                    format!("{name}: G=1 blocks at beta={beta}: {c1} {c2}"),
                );
            }
        }
        for (name, fam) in &families {
            let a = analyze_deltas(fam, 0.8, 2, &q12, DEFAULT_STEP, QUAD).expect("feasible");
            check(
                a.self_overlap_gap <= SELF_OVERLAP_TOLERANCE,
                format!("{name}: self-overlap gap {:.2e}", a.self_overlap_gap),
            );
        }
        let (g1, g2) = gg_residuals(&sk4, 2, &one, (0.2, 1.5), 7, Measure::BetaSquared, mc).expect("feasible");
        check(
            g1.integral.mean.abs() <= 1e-14 && g2.integral.mean.abs() <= 1e-14,
            format!("G=1 integrated residuals {} {}", g1.integral.mean, g2.integral.mean),
        );
        let frozen = sk4.scaled(0.0);
        for beta in [0.0, 1.0] {
            for (label, fam) in [("zero-disorder", &frozen), ("sk4", &sk4)] {
                if label == "sk4" && beta != 0.0 {
                    continue;
                }
                let a = free_energy_variance(fam, beta, 100, SUITE_SEED).expect("enough samples");
                let u = internal_energy_variance(fam, beta, 100, SUITE_SEED).expect("enough samples");
                check(
                    a.estimate == 0.0 && u.estimate == 0.0 && a.satisfied && u.satisfied,
                    format!("{label} beta={beta}: V(A)={} V(u)={}", a.estimate, u.estimate),
                );
            }
        }
        if let Err(e) = schwartz_triples(1000) {
            check(false, e);
        }
        let base = in_pool(1, determinism_fingerprint);
        for threads in [2, 8] {
            check(
                in_pool(threads, determinism_fingerprint) == base,
                format!("results differ between 1 and {threads} workers"),
            );
        }
        let ok = problems.is_empty();
        let detail = if ok {
            "beta=0 zeros, G=1 cancellations, self-overlap cancellation, zero-variance estimates, \
             1000 Schwartz triples and 1/2/8-worker bit identity all hold"
                .to_string()
        } else {
            problems.join("; ")
        };
        (ok, detail)
    })
}

/// Criteria that cannot pass as stated, with the reason. A failure of one
/// of these is expected; a pass is reported as such.
pub const KNOWN_UNATTAINABLE: [(u8, &str); 4] = [
    (
        1,
        "order-40 Gauss-Hermite quadrature of unit-variance couplings misses tanh-type \
         integrands by about 1e-5 at beta=1.1; the difference vanishes as the order grows",
    ),
    (2, "same quadrature limitation as criterion 1"),
    (3, "same quadrature limitation as criterion 1"),
    (
        6,
        "the long-range per-site variance converges to half the lattice sum of |r|^(-2 d alpha), \
         which exceeds (2 alpha - 1)^(-d) for alpha=1.5 and for alpha=0.75 in d=2",
    ),
];

pub fn known_unattainable(id: u8) -> Option<&'static str> {
    KNOWN_UNATTAINABLE.iter().find(|(i, _)| *i == id).map(|(_, r)| *r)
}

/// Runs all criteria in order.
pub fn desk_suite(mut report: impl FnMut(&Criterion)) -> Vec<Criterion> {
    let mut out = Vec::new();
    let mut push = |c: Criterion| {
        report(&c);
        out.push(c);
    };
    let start = Instant::now();
    let cases = dual_grid();
    let grid_secs = start.elapsed().as_secs_f64();
    for mut c in [criterion_1(&cases), criterion_2(&cases), criterion_3(&cases)] {
        c.seconds += grid_secs;
        push(c);
    }
    push(criterion_4());
    push(criterion_5());
    push(criterion_6());
    push(criterion_7());
    push(criterion_8());
    push(criterion_9());
    push(criterion_10());
    out
}
