//! Generalized-overlap observables and their replica expectations.
//!
//! The overlap between replicas `a` and `b` is the normalized covariance
//! `q_{a,b} = c(σ^a, σ^b) = (1/|Λ|) Σ_X Δ²_X σ^a_X σ^b_X`. A product of such
//! factors expands into a sum over subset tuples, and under the product
//! state each term factorizes into single-replica parity expectations.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cell::RefCell;
use core::fmt;
use core::str::FromStr;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use thiserror::Error;

use crate::disorder::{DisorderError, Ensemble, QuenchedEstimate, Scheme};
use crate::gibbs::{GibbsError, GibbsTable};
use crate::math;
use crate::model::{InteractionFamily, SpinConfiguration};
use crate::stats;

/// Highest replica label an observable may use.
pub const MAX_REPLICAS: usize = 12;
/// Largest number of off-diagonal factors evaluated exactly.
pub const MAX_EXACT_DEGREE: usize = 3;
/// Largest subset-tuple count `K^degree` evaluated exactly.
pub const MAX_EXACT_TERMS: usize = 1_000_000;
/// Volumes up to this size get a dense table of all parity expectations.
pub const DENSE_PARITY_VOLUME: usize = 20;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ObservableError {
    #[error("cannot parse observable `{input}`: {reason}")]
    Parse { input: String, reason: String },
    #[error("replica index {index} exceeds the replica count {replicas}")]
    ReplicaIndex { index: usize, replicas: usize },
    #[error("monomial has {degree} overlap factors, exact evaluation supports {MAX_EXACT_DEGREE}")]
    DegreeOverCap { degree: usize },
    #[error("exact evaluation needs {terms} subset tuples, above {MAX_EXACT_TERMS}")]
    TooManyTerms { terms: u128 },
    #[error("need at least 2 replica draws, got {0}")]
    TooFewDraws(usize),
    #[error(transparent)]
    Gibbs(#[from] GibbsError),
    #[error(transparent)]
    Disorder(#[from] DisorderError),
}

/// A product of overlap factors `q_{a,b}` (1-based replica labels, `a = b`
/// allowed). The empty product is the constant observable `1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct OverlapMonomial {
    factors: Vec<(u8, u8)>,
}

impl OverlapMonomial {
    pub fn one() -> Self {
        Self::default()
    }

    /// Single factor `q_{a,b}`.
    ///
    /// Panics on a zero label or a label above [`MAX_REPLICAS`].
    pub fn q(a: usize, b: usize) -> Self {
        Self::new(&[(a, b)]).expect("valid replica labels")
    }

    pub fn new(factors: &[(usize, usize)]) -> Result<Self, ObservableError> {
        let mut out = Vec::with_capacity(factors.len());
        for &(a, b) in factors {
            for idx in [a, b] {
                if idx == 0 || idx > MAX_REPLICAS {
                    return Err(ObservableError::ReplicaIndex {
                        index: idx,
                        replicas: MAX_REPLICAS,
                    });
                }
            }
            out.push((a.min(b) as u8, a.max(b) as u8));
        }
        out.sort_unstable();
        Ok(Self { factors: out })
    }

    pub fn times(&self, other: &Self) -> Self {
        let mut factors = self.factors.clone();
        factors.extend_from_slice(&other.factors);
        factors.sort_unstable();
        Self { factors }
    }

    pub fn factors(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.factors.iter().map(|&(a, b)| (a as usize, b as usize))
    }

    pub fn degree(&self) -> usize {
        self.factors.len()
    }

    /// Number of factors with two distinct replicas.
    pub fn off_diagonal_degree(&self) -> usize {
        self.factors.iter().filter(|(a, b)| a != b).count()
    }

    pub fn is_constant(&self) -> bool {
        self.factors.is_empty()
    }

    /// Highest replica label used, 0 for the constant.
    pub fn max_replica(&self) -> usize {
        self.factors.iter().map(|&(_, b)| b as usize).max().unwrap_or(0)
    }

    /// Applies a relabeling of replicas.
    pub fn relabel(&self, map: impl Fn(usize) -> usize) -> Result<Self, ObservableError> {
        let f: Vec<(usize, usize)> = self.factors().map(|(a, b)| (map(a), map(b))).collect();
        Self::new(&f)
    }

    pub fn check_replicas(&self, replicas: usize) -> Result<(), ObservableError> {
        match self.max_replica() {
            m if m > replicas => Err(ObservableError::ReplicaIndex { index: m, replicas }),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for OverlapMonomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.factors.is_empty() {
            return f.write_str("1");
        }
        let mut i = 0;
        let mut first = true;
        while i < self.factors.len() {
            let mut j = i;
            while j < self.factors.len() && self.factors[j] == self.factors[i] {
                j += 1;
            }
            if !first {
                f.write_str("*")?;
            }
            first = false;
            let (a, b) = self.factors[i];
            write!(f, "q[{a},{b}]")?;
            if j - i > 1 {
                write!(f, "^{}", j - i)?;
            }
            i = j;
        }
        Ok(())
    }
}

impl FromStr for OverlapMonomial {
    type Err = ObservableError;

    /// Grammar: `1` or `q[a,b]` factors joined by `*`, each with an optional `^n`.
    fn from_str(input: &str) -> Result<Self, Self::Err> {
        let err = |reason: &str| ObservableError::Parse {
            input: input.to_string(),
            reason: reason.to_string(),
        };
        let compact: String = input.chars().filter(|c| !c.is_whitespace()).collect();
        if compact.is_empty() {
            return Err(err("empty expression"));
        }
        if compact == "1" {
            return Ok(Self::one());
        }
        let mut factors = Vec::new();
        for term in compact.split('*') {
            let (base, power) = match term.split_once('^') {
                Some((b, p)) => (b, p.parse::<usize>().map_err(|_| err("bad exponent"))?),
                None => (term, 1),
            };
            let inner = base
                .strip_prefix("q[")
                .and_then(|r| r.strip_suffix(']'))
                .ok_or_else(|| err("expected a factor of the form q[a,b]"))?;
            let (a, b) = inner
                .split_once(',')
                .ok_or_else(|| err("expected two replica labels"))?;
            let a: usize = a.parse().map_err(|_| err("replica label is not an integer"))?;
            let b: usize = b.parse().map_err(|_| err("replica label is not an integer"))?;
            if power > 16 {
                return Err(err("exponent too large"));
            }
            for _ in 0..power {
                factors.push((a, b));
            }
        }
        Self::new(&factors).map_err(|e| match e {
            ObservableError::ReplicaIndex { index, .. } => err(&format!("replica label {index} is out of range")),
            other => other,
        })
    }
}

/// Single-replica parity expectations of one Gibbs table.
///
/// Small volumes use a dense table from one Walsh-Hadamard transform; larger
/// ones memoize `ω(σ_m)` per mask on demand.
pub struct ReplicaExpectations<'t> {
    table: &'t GibbsTable,
    dense: Option<Vec<f64>>,
    dense_energy: Option<Vec<f64>>,
    memo: RefCell<BTreeMap<u32, f64>>,
    memo_energy: RefCell<BTreeMap<u32, f64>>,
}

impl<'t> ReplicaExpectations<'t> {
    pub fn new(table: &'t GibbsTable) -> Self {
        let dense = (table.volume() <= DENSE_PARITY_VOLUME).then(|| table.parity_expectations());
        Self {
            table,
            dense,
            dense_energy: None,
            memo: RefCell::new(BTreeMap::new()),
            memo_energy: RefCell::new(BTreeMap::new()),
        }
    }

    /// Also prepares energy-weighted expectations `ω(H σ_m)`.
    pub fn with_energy(table: &'t GibbsTable) -> Self {
        let mut s = Self::new(table);
        if table.volume() <= DENSE_PARITY_VOLUME {
            s.dense_energy = Some(table.energy_parity_expectations());
        }
        s
    }

    pub fn table(&self) -> &GibbsTable {
        self.table
    }

    /// `ω(σ_m)`.
    pub fn omega(&self, mask: u32) -> f64 {
        if let Some(d) = &self.dense {
            return d[mask as usize];
        }
        *self
            .memo
            .borrow_mut()
            .entry(mask)
            .or_insert_with(|| self.table.omega_mask(mask))
    }

    /// `ω(H σ_m)`.
    pub fn energy_omega(&self, mask: u32) -> f64 {
        if let Some(d) = &self.dense_energy {
            return d[mask as usize];
        }
        let table = self.table;
        *self.memo_energy.borrow_mut().entry(mask).or_insert_with(|| {
            stats::pairwise_sum_by(table.probabilities().len(), &|s| {
                table.probabilities()[s] * table.energies()[s] * crate::model::parity_of_state(s as u32, mask)
            })
        })
    }
}

/// Positive-variance subsets as `(mask, Δ²)` pairs.
pub(crate) fn active_subsets(family: &InteractionFamily) -> Result<Vec<(u32, f64)>, ObservableError> {
    let masks = family
        .masks()
        .ok_or(GibbsError::Model(crate::model::ModelError::VolumeTooLarge(
            family.volume(),
        )))?;
    Ok(masks
        .iter()
        .zip(family.interactions())
        .filter(|(_, it)| it.variance() > 0.0)
        .map(|(&m, it)| (m, it.variance()))
        .collect())
}

/// Checks the exact-evaluation caps for `m` against a family.
pub fn check_exact_cost(family: &InteractionFamily, m: &OverlapMonomial) -> Result<(), ObservableError> {
    let d = m.off_diagonal_degree();
    if d > MAX_EXACT_DEGREE {
        return Err(ObservableError::DegreeOverCap { degree: d });
    }
    let k = family.interactions().iter().filter(|i| i.variance() > 0.0).count() as u128;
    let terms = k.pow(d as u32);
    if terms > MAX_EXACT_TERMS as u128 {
        return Err(ObservableError::TooManyTerms { terms });
    }
    Ok(())
}

/// Expands `m` over subset tuples on `replicas` replicas and combines the
/// per-replica expectations returned by `expect(replica, mask)` (0-based
/// replica). Every replica below `replicas` contributes a factor, including
/// those with an empty mask.
pub(crate) fn expand_monomial(
    family: &InteractionFamily,
    active: &[(u32, f64)],
    m: &OverlapMonomial,
    replicas: usize,
    expect: &dyn Fn(usize, u32) -> f64,
) -> f64 {
    let diag = family.per_site_variance();
    let mut constant = 1.0;
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for (a, b) in m.factors() {
        if a == b {
            constant *= diag;
        } else {
            pairs.push((a - 1, b - 1));
        }
    }
    if pairs.is_empty() {
        let mut prod = constant;
        for r in 0..replicas {
            prod *= expect(r, 0);
        }
        return prod;
    }
    let mut masks = [0u32; MAX_REPLICAS + 2];
    let total = expand_rec(active, &pairs, replicas, expect, &mut masks, 1.0);
    let norm = math::powi(family.volume() as f64, -(pairs.len() as i32));
    constant * norm * total
}

fn expand_rec(
    active: &[(u32, f64)],
    pairs: &[(usize, usize)],
    replicas: usize,
    expect: &dyn Fn(usize, u32) -> f64,
    masks: &mut [u32; MAX_REPLICAS + 2],
    coef: f64,
) -> f64 {
    match pairs.split_first() {
        None => {
            let mut prod = coef;
            for (r, &mask) in masks.iter().enumerate().take(replicas) {
                prod *= expect(r, mask);
                if prod == 0.0 {
                    break;
                }
            }
            prod
        }
        Some((&(a, b), rest)) => {
            let mut acc = 0.0;
            for &(mask, var) in active {
                masks[a] ^= mask;
                masks[b] ^= mask;
                acc += expand_rec(active, rest, replicas, expect, masks, coef * var);
                masks[a] ^= mask;
                masks[b] ^= mask;
            }
            acc
        }
    }
}

/// `Ω[m]` on a prepared set of replica expectations.
pub fn omega_monomial(
    family: &InteractionFamily,
    expectations: &ReplicaExpectations<'_>,
    m: &OverlapMonomial,
) -> Result<f64, ObservableError> {
    check_exact_cost(family, m)?;
    let active = active_subsets(family)?;
    Ok(expand_monomial(family, &active, m, m.max_replica(), &|_, mask| {
        expectations.omega(mask)
    }))
}

/// `Ω[m]` for one disorder sample at inverse temperature `beta`.
pub fn omega_monomial_exact(
    family: &InteractionFamily,
    sample: &crate::disorder::DisorderSample,
    beta: f64,
    m: &OverlapMonomial,
) -> Result<f64, ObservableError> {
    check_exact_cost(family, m)?;
    if m.off_diagonal_degree() == 0 {
        return Ok(math::powi(family.per_site_variance(), m.degree() as i32));
    }
    let table = GibbsTable::enumerate(family, sample, beta)?;
    omega_monomial(family, &ReplicaExpectations::new(&table), m)
}

/// Overlap entries `c(σ^a, σ^b)` of a set of replicas (1-based access).
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapMatrix {
    replicas: usize,
    entries: Vec<f64>,
}

impl OverlapMatrix {
    pub fn from_configurations(
        family: &InteractionFamily,
        configs: &[SpinConfiguration],
    ) -> Result<Self, ObservableError> {
        let r = configs.len();
        let mut entries = alloc::vec![0.0; r * r];
        for a in 0..r {
            for b in a..r {
                let c = family
                    .covariance(&configs[a], &configs[b])
                    .map_err(GibbsError::from)?
                    .normalized;
                entries[a * r + b] = c;
                entries[b * r + a] = c;
            }
        }
        Ok(Self { replicas: r, entries })
    }

    pub fn replicas(&self) -> usize {
        self.replicas
    }

    pub fn q(&self, a: usize, b: usize) -> f64 {
        self.entries[(a - 1) * self.replicas + (b - 1)]
    }
}

type ObservableClosure = Box<dyn Fn(&OverlapMatrix) -> f64 + Send + Sync>;

/// A bounded function of the overlap entries of `replicas` replicas.
pub struct ObservableFn {
    replicas: usize,
    bound: f64,
    f: ObservableClosure,
}

impl fmt::Debug for ObservableFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ObservableFn")
            .field("replicas", &self.replicas)
            .field("bound", &self.bound)
            .finish_non_exhaustive()
    }
}

impl ObservableFn {
    pub fn new(replicas: usize, bound: f64, f: impl Fn(&OverlapMatrix) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            replicas,
            bound,
            f: Box::new(f),
        }
    }

    /// A monomial as a general observable, with bound `c^degree` where
    /// `c` bounds `|q|` on this family.
    pub fn from_monomial(family: &InteractionFamily, m: OverlapMonomial) -> Self {
        let c = family.per_site_variance().max(family.claimed_bound());
        let bound = math::powi(c, m.degree() as i32);
        let replicas = m.max_replica().max(1);
        Self::new(replicas, bound, move |q| m.factors().map(|(a, b)| q.q(a, b)).product())
    }

    /// `clamp(m, lo, hi)`.
    pub fn clamped(family: &InteractionFamily, m: OverlapMonomial, lo: f64, hi: f64) -> Self {
        let inner = Self::from_monomial(family, m);
        let bound = lo.abs().max(hi.abs()).min(inner.bound);
        Self::new(inner.replicas, bound, move |q| (inner.f)(q).clamp(lo, hi))
    }

    pub fn replicas(&self) -> usize {
        self.replicas
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn eval(&self, q: &OverlapMatrix) -> f64 {
        (self.f)(q)
    }
}

/// Monte Carlo estimate of `Ω[G]` from independent exact replica draws.
pub fn omega_general_mc<R: RngCore + ?Sized>(
    family: &InteractionFamily,
    table: &GibbsTable,
    g: &ObservableFn,
    draws: usize,
    rng: &mut R,
) -> Result<(f64, f64), ObservableError> {
    if draws < 2 {
        return Err(ObservableError::TooFewDraws(draws));
    }
    let sampler = table.sampler();
    let mut configs = Vec::with_capacity(g.replicas());
    let mut values = Vec::with_capacity(draws);
    for _ in 0..draws {
        configs.clear();
        for _ in 0..g.replicas() {
            configs.push(sampler.draw(rng));
        }
        let q = OverlapMatrix::from_configurations(family, &configs)?;
        let v = g.eval(&q);
        debug_assert!(v.abs() <= g.bound() * (1.0 + 1e-12));
        values.push(v);
    }
    Ok((stats::mean(&values), stats::standard_error(&values)))
}

/// What [`quenched_moment`] evaluates.
#[derive(Debug)]
pub enum Observable {
    Monomial(OverlapMonomial),
    General { g: ObservableFn, draws: usize },
}

/// `⟨G⟩ = Av Ω[G]`.
pub fn quenched_moment(
    family: &InteractionFamily,
    beta: f64,
    observable: &Observable,
    scheme: Scheme,
) -> Result<QuenchedEstimate, ObservableError> {
    let ensemble = Ensemble::new(family, scheme)?;
    crate::gibbs::check_enumerable(family)?;
    match observable {
        Observable::Monomial(m) => {
            check_exact_cost(family, m)?;
            if m.off_diagonal_degree() == 0 {
                return Ok(QuenchedEstimate {
                    mean: math::powi(family.per_site_variance(), m.degree() as i32),
                    stderr: 0.0,
                    samples: ensemble.len(),
                    method: ensemble.method(),
                    seed: ensemble.seed(),
                });
            }
            let active = active_subsets(family)?;
            let replicas = m.max_replica();
            let table = ensemble.tabulate(1, |s| {
                let t = GibbsTable::enumerate(family, s, beta).expect("enumerable family");
                let ex = ReplicaExpectations::new(&t);
                alloc::vec![expand_monomial(family, &active, m, replicas, &|_, mask| ex.omega(mask))]
            });
            Ok(table.estimate_column(0))
        }
        Observable::General { g, draws } => {
            let draws = *draws;
            if draws < 2 {
                return Err(ObservableError::TooFewDraws(draws));
            }
            let table = ensemble.tabulate(1, |s| {
                let t = GibbsTable::enumerate(family, s, beta).expect("enumerable family");
                let mut rng = ChaCha8Rng::seed_from_u64(s.seed ^ 0x6f6d_6567_615f_6d63);
                rng.set_stream(s.index);
                let (mean, _) = omega_general_mc(family, &t, g, draws, &mut rng).expect("validated draws");
                alloc::vec![mean]
            });
            Ok(table.estimate_column(0))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disorder::{sample_disorder, DisorderSample};
    use crate::model::Preset;
    use alloc::vec;

    fn pair_family() -> InteractionFamily {
        InteractionFamily::custom(2, vec![(vec![0, 1], 1.0)], 1.0).unwrap()
    }

    fn fixed(c: Vec<f64>) -> DisorderSample {
        DisorderSample {
            couplings: c,
            index: 0,
            seed: 0,
        }
    }

    #[test]
    fn parse_and_display() {
        let m: OverlapMonomial = "q[1,2]*q[2,3]".parse().unwrap();
        assert_eq!(m.degree(), 2);
        assert_eq!(m.max_replica(), 3);
        assert_eq!(m.to_string(), "q[1,2]*q[2,3]");
        let sq: OverlapMonomial = " q[2,1] ^2 ".parse().unwrap();
        assert_eq!(sq, OverlapMonomial::q(1, 2).times(&OverlapMonomial::q(1, 2)));
        assert_eq!(sq.to_string(), "q[1,2]^2");
        assert_eq!("1".parse::<OverlapMonomial>().unwrap(), OverlapMonomial::one());
        for bad in ["", "q[1]", "q[0,1]", "x[1,2]", "q[1,2]^a", "q[1,2]*", "q[a,b]"] {
            assert!(bad.parse::<OverlapMonomial>().is_err(), "{bad}");
        }
    }

    #[test]
    fn replica_check_names_the_index() {
        let m: OverlapMonomial = "q[1,3]".parse().unwrap();
        assert_eq!(
            m.check_replicas(2),
            Err(ObservableError::ReplicaIndex { index: 3, replicas: 2 })
        );
    }

    #[test]
    fn self_overlap_is_constant() {
        let f = InteractionFamily::build(&Preset::sk(4)).unwrap();
        let v = omega_monomial_exact(&f, &sample_disorder(&f, 1, 0), 1.7, &OverlapMonomial::q(1, 1)).unwrap();
        assert_eq!(v, 0.375);
    }

    #[test]
    fn overlap_vanishes_at_infinite_temperature() {
        let f = InteractionFamily::build(&Preset::sk(4)).unwrap();
        let v = omega_monomial_exact(&f, &sample_disorder(&f, 1, 0), 0.0, &OverlapMonomial::q(1, 2)).unwrap();
        assert!(v.abs() < 1e-15);
    }

    #[test]
    fn two_spin_overlap_closed_form() {
        let f = pair_family();
        for (beta, j) in [(0.5, 1.2), (1.0, -0.4)] {
            let v = omega_monomial_exact(&f, &fixed(vec![j]), beta, &OverlapMonomial::q(1, 2)).unwrap();
            let t: f64 = (beta * j).tanh();
            assert!((v - 0.5 * t * t).abs() < 1e-15);
        }
    }

    #[test]
    fn expansion_matches_brute_force_over_replicas() {
        // Sum over all (σ¹,σ²,σ³) of q12 q23 weighted by the product measure.
        let f = InteractionFamily::build(&Preset::ea(1, 3, true)).unwrap();
        let s = sample_disorder(&f, 3, 2);
        let t = GibbsTable::enumerate(&f, &s, 0.8).unwrap();
        let p = t.probabilities();
        let conf = |x: u32| SpinConfiguration::new(x, 3).unwrap();
        let c = |a: u32, b: u32| f.covariance(&conf(a), &conf(b)).unwrap().normalized;
        let mut brute = 0.0;
        for a in 0..8u32 {
            for b in 0..8u32 {
                for d in 0..8u32 {
                    brute += p[a as usize] * p[b as usize] * p[d as usize] * c(a, b) * c(b, d);
                }
            }
        }
        let m: OverlapMonomial = "q[1,2]*q[2,3]".parse().unwrap();
        let got = omega_monomial_exact(&f, &s, 0.8, &m).unwrap();
        assert!((got - brute).abs() < 1e-14);
    }

    #[test]
    fn degree_cap() {
        let f = InteractionFamily::build(&Preset::sk(3)).unwrap();
        let m: OverlapMonomial = "q[1,2]^4".parse().unwrap();
        assert!(matches!(
            omega_monomial_exact(&f, &sample_disorder(&f, 0, 0), 1.0, &m),
            Err(ObservableError::DegreeOverCap { degree: 4 })
        ));
        let big = InteractionFamily::build(&Preset::sk(24)).unwrap();
        let m3: OverlapMonomial = "q[1,2]^3".parse().unwrap();
        assert!(matches!(
            check_exact_cost(&big, &m3),
            Err(ObservableError::TooManyTerms { .. })
        ));
    }

    #[test]
    fn general_mc_constant_and_cross_check() {
        let f = pair_family();
        let t = GibbsTable::enumerate(&f, &fixed(vec![0.9]), 0.8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let one = ObservableFn::new(2, 1.0, |_| 1.0);
        assert_eq!(omega_general_mc(&f, &t, &one, 100, &mut rng).unwrap(), (1.0, 0.0));

        let g = ObservableFn::from_monomial(&f, OverlapMonomial::q(1, 2));
        let (mean, se) = omega_general_mc(&f, &t, &g, 20_000, &mut rng).unwrap();
        let exact = omega_monomial_exact(&f, &fixed(vec![0.9]), 0.8, &OverlapMonomial::q(1, 2)).unwrap();
        assert!((mean - exact).abs() <= 4.0 * se, "{mean} {exact} {se}");
    }

    #[test]
    fn inactive_clamp_changes_nothing() {
        let f = InteractionFamily::build(&Preset::sk(4)).unwrap();
        let t = GibbsTable::enumerate(&f, &sample_disorder(&f, 2, 2), 1.2).unwrap();
        let plain = ObservableFn::from_monomial(&f, OverlapMonomial::q(1, 2));
        let clamped = ObservableFn::clamped(&f, OverlapMonomial::q(1, 2), -1.0, 1.0);
        let a = omega_general_mc(&f, &t, &plain, 500, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let b = omega_general_mc(&f, &t, &clamped, 500, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn quenched_moment_trivial_values() {
        let f = InteractionFamily::build(&Preset::sk(4)).unwrap();
        let q11 = quenched_moment(
            &f,
            0.9,
            &Observable::Monomial(OverlapMonomial::q(1, 1)),
            Scheme::MonteCarlo { samples: 10, seed: 1 },
        )
        .unwrap();
        assert_eq!(q11.mean, 0.375);
        let q12 = quenched_moment(
            &f,
            0.0,
            &Observable::Monomial(OverlapMonomial::q(1, 2)),
            Scheme::MonteCarlo { samples: 10, seed: 1 },
        )
        .unwrap();
        assert!(q12.mean.abs() < 1e-15);
    }

    #[test]
    fn volume_errors_propagate() {
        let f = InteractionFamily::build(&Preset::sk(25)).unwrap();
        let r = quenched_moment(
            &f,
            0.5,
            &Observable::Monomial(OverlapMonomial::q(1, 2)),
            Scheme::MonteCarlo { samples: 2, seed: 1 },
        );
        assert!(matches!(r, Err(ObservableError::Gibbs(_))), "{r:?}");
    }
}
