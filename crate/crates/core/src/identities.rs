//! Building blocks of the replica-overlap identities and their diagnostics.
//!
//! `Δ₁G` is the thermal fluctuation part and `Δ₂G` the disorder fluctuation
//! part of `Σ_l[⟨h(σ^{(l)})G⟩ − ⟨h⟩⟨G⟩]` with `h = H/|Λ|`. Each has a
//! definitional form (a β-derivative, a disorder covariance) and a closed
//! form in overlap moments obtained by Gaussian integration by parts.
//!
//! Every operation builds one evaluation plan, tabulates all required
//! per-sample quantities on a single disorder ensemble, and combines their
//! means. Standard errors therefore account for correlations between terms.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use thiserror::Error;

use crate::disorder::{DisorderError, Ensemble, QuenchedEstimate, SampleTable, Scheme, WICK_MAX_COUPLINGS};
use crate::gibbs::{self, GibbsError, GibbsTable};
use crate::model::InteractionFamily;
use crate::observables::{
    active_subsets, check_exact_cost, expand_monomial, ObservableError, OverlapMonomial, ReplicaExpectations,
    MAX_REPLICAS,
};
use crate::stats::{self, BootstrapSummary};

/// Finite-difference step for β-derivatives.
pub const DEFAULT_STEP: f64 = 1e-4;
/// Grid size for β-integrals.
pub const DEFAULT_GRID_POINTS: usize = 21;
/// Bootstrap resamples for variance estimators and integrated residuals.
pub const BOOTSTRAP_RESAMPLES: usize = 200;
/// Confidence level of reported bootstrap intervals.
pub const CONFIDENCE_LEVEL: f64 = 0.95;
/// Minimum disorder samples for a variance estimate.
pub const MIN_VARIANCE_SAMPLES: usize = 100;

const BOOTSTRAP_SALT: u64 = 0x6767_626f_6f74;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IdentityError {
    #[error(transparent)]
    Observable(#[from] ObservableError),
    #[error(transparent)]
    Disorder(#[from] DisorderError),
    #[error(transparent)]
    Gibbs(#[from] GibbsError),
    #[error("replica count {replicas} outside 1..={max}")]
    Replicas { replicas: usize, max: usize },
    #[error("beta {beta} minus step {step} is negative")]
    StepBelowZero { beta: f64, step: f64 },
    #[error("beta must be positive here, got {0}")]
    NonPositiveBeta(f64),
    #[error("invalid beta range [{lo}, {hi}]")]
    InvalidRange { lo: f64, hi: f64 },
    #[error("grid needs at least 3 points, got {0}")]
    GridTooSmall(usize),
    #[error("need at least {min} disorder samples, got {got}")]
    TooFewSamples { got: usize, min: usize },
    #[error("{couplings} active couplings exceed the quadrature limit of {max}")]
    TooManyCouplings { couplings: usize, max: usize },
}

/// A real linear combination of overlap monomials.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearForm {
    terms: Vec<(f64, OverlapMonomial)>,
}

impl LinearForm {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, coef: f64, m: OverlapMonomial) {
        self.terms.push((coef, m));
    }

    pub fn terms(&self) -> &[(f64, OverlapMonomial)] {
        &self.terms
    }

    /// Same form with identical monomials combined (in monomial order).
    pub fn merged(&self) -> Self {
        let mut acc: BTreeMap<OverlapMonomial, f64> = BTreeMap::new();
        for (c, m) in &self.terms {
            *acc.entry(m.clone()).or_insert(0.0) += c;
        }
        Self {
            terms: acc.into_iter().map(|(m, c)| (c, m)).collect(),
        }
    }

    pub fn max_replica(&self) -> usize {
        self.terms.iter().map(|(_, m)| m.max_replica()).max().unwrap_or(0)
    }
}

/// `G·[Σ_{k≠l} q_{l,k} − 2R Σ_l q_{l,R+1} + R(R+1) q_{R+1,R+2}]`, so that
/// `Δ₁G = −β⟨·⟩`.
pub fn delta1_bracket(replicas: usize, g: &OverlapMonomial) -> LinearForm {
    let r = replicas;
    let rf = r as f64;
    let mut f = LinearForm::new();
    for l in 1..=r {
        for k in 1..=r {
            if k != l {
                f.push(1.0, g.times(&OverlapMonomial::q(l, k)));
            }
        }
    }
    for l in 1..=r {
        f.push(-2.0 * rf, g.times(&OverlapMonomial::q(l, r + 1)));
    }
    f.push(rf * (rf + 1.0), g.times(&OverlapMonomial::q(r + 1, r + 2)));
    f
}

/// The bracket before the self-overlaps `q_{l,l}` and `q_{R+1,R+1}` are
/// cancelled: `Σ_l Σ_{k≤R} G q_{l,k} − R Σ_l G q_{l,R+1}
/// − R[Σ_{k≤R+1} G q_{k,R+1} − (R+1) G q_{R+1,R+2}]`.
pub fn delta1_bracket_uncancelled(replicas: usize, g: &OverlapMonomial) -> LinearForm {
    let r = replicas;
    let rf = r as f64;
    let mut f = LinearForm::new();
    for l in 1..=r {
        for k in 1..=r {
            f.push(1.0, g.times(&OverlapMonomial::q(l, k)));
        }
    }
    for l in 1..=r {
        f.push(-rf, g.times(&OverlapMonomial::q(l, r + 1)));
    }
    for k in 1..=r + 1 {
        f.push(-rf, g.times(&OverlapMonomial::q(k, r + 1)));
    }
    f.push(rf * (rf + 1.0), g.times(&OverlapMonomial::q(r + 1, r + 2)));
    f
}

/// `Σ_{k≤R} G q_{k,R+1} − (R+1) G q_{R+1,R+2}`; adding `⟨G⟩⟨q_{1,2}⟩` to its
/// quenched value gives `−Δ₂G/(βR)`.
///
/// The summed index of the replica-`R+1` overlap is the summation variable `k`.
pub fn delta2_linear_part(replicas: usize, g: &OverlapMonomial) -> LinearForm {
    let r = replicas;
    let mut f = LinearForm::new();
    for k in 1..=r {
        f.push(1.0, g.times(&OverlapMonomial::q(k, r + 1)));
    }
    f.push(-(r as f64 + 1.0), g.times(&OverlapMonomial::q(r + 1, r + 2)));
    f
}

fn check_replicas(replicas: usize, g: &OverlapMonomial) -> Result<(), IdentityError> {
    let max = MAX_REPLICAS - 2;
    if replicas == 0 || replicas > max {
        return Err(IdentityError::Replicas { replicas, max });
    }
    g.check_replicas(replicas)?;
    Ok(())
}

/// A per-disorder-sample quantity evaluated at one β.
#[derive(Debug, Clone, PartialEq)]
enum Quantity {
    /// `Ω[m]`.
    Moment(OverlapMonomial),
    /// `Ω[h] = 𝒰/|Λ|`.
    EnergyDensity,
    /// `Ω[h]·Ω[m]`.
    EnergyTimesMoment(OverlapMonomial),
    /// `Σ_{l≤R} Ω[h(σ^{(l)}) m]`.
    EnergyWeighted { monomial: OverlapMonomial, replicas: usize },
    /// `𝒜 = ln 𝒵`.
    LogPartition,
}

type Slot = (usize, usize);

/// `Σ c·μ[s] + Σ c·μ[s]·μ[t]` over slots `(β index, quantity index)`.
#[derive(Debug, Clone, Default)]
struct Form {
    linear: Vec<(f64, Slot)>,
    products: Vec<(f64, Slot, Slot)>,
}

impl Form {
    fn eval(&self, mu: &[f64], nq: usize) -> f64 {
        let at = |(b, q): Slot| mu[b * nq + q];
        let mut acc = 0.0;
        for &(c, s) in &self.linear {
            acc += c * at(s);
        }
        for &(c, s, t) in &self.products {
            acc += c * at(s) * at(t);
        }
        acc
    }

    fn add_scaled(&mut self, factor: f64, other: &Form) {
        self.linear.extend(other.linear.iter().map(|&(c, s)| (factor * c, s)));
        self.products
            .extend(other.products.iter().map(|&(c, s, t)| (factor * c, s, t)));
    }
}

/// The β values and quantities tabulated per disorder sample.
#[derive(Debug, Default)]
struct Plan {
    betas: Vec<f64>,
    quantities: Vec<Quantity>,
}

impl Plan {
    fn beta(&mut self, beta: f64) -> usize {
        match self.betas.iter().position(|b| b.to_bits() == beta.to_bits()) {
            Some(i) => i,
            None => {
                self.betas.push(beta);
                self.betas.len() - 1
            }
        }
    }

    fn quantity(&mut self, q: Quantity) -> usize {
        match self.quantities.iter().position(|x| *x == q) {
            Some(i) => i,
            None => {
                self.quantities.push(q);
                self.quantities.len() - 1
            }
        }
    }

    fn moment(&mut self, beta: f64, m: OverlapMonomial) -> Slot {
        (self.beta(beta), self.quantity(Quantity::Moment(m)))
    }

    fn slot(&mut self, beta: f64, q: Quantity) -> Slot {
        (self.beta(beta), self.quantity(q))
    }

    fn linear(&mut self, beta: f64, factor: f64, form: &LinearForm) -> Form {
        let mut out = Form::default();
        for (c, m) in form.merged().terms() {
            let s = self.moment(beta, m.clone());
            out.linear.push((factor * c, s));
        }
        out
    }

    fn width(&self) -> usize {
        self.quantities.len()
    }

    fn tabulate(&self, family: &InteractionFamily, scheme: Scheme) -> Result<SampleTable, IdentityError> {
        let ensemble = Ensemble::new(family, scheme)?;
        gibbs::check_enumerable(family)?;
        for q in &self.quantities {
            match q {
                Quantity::Moment(m) | Quantity::EnergyTimesMoment(m) | Quantity::EnergyWeighted { monomial: m, .. } => {
                    check_exact_cost(family, m)?
                }
                Quantity::EnergyDensity | Quantity::LogPartition => {}
            }
        }
        let active = active_subsets(family)?;
        let masks = family.masks().expect("enumerable family");
        let volume = family.volume();
        let vol = volume as f64;
        let need_energy = self
            .quantities
            .iter()
            .any(|q| matches!(q, Quantity::EnergyWeighted { .. }));
        let nq = self.width();
        Ok(ensemble.tabulate(self.betas.len() * nq, |s| {
            let energies = gibbs::energies(family, s).expect("enumerable family");
            let mut out = Vec::with_capacity(self.betas.len() * nq);
            for &beta in &self.betas {
                let table = GibbsTable::from_energies(volume, energies.clone(), beta);
                let ex = if need_energy {
                    ReplicaExpectations::with_energy(&table)
                } else {
                    ReplicaExpectations::new(&table)
                };
                // 𝒰 = −Σ_X J_X ω(σ_X); exact zero at β = 0.
                let u = -masks
                    .iter()
                    .zip(&s.couplings)
                    .map(|(&m, j)| j * ex.omega(m))
                    .sum::<f64>()
                    / vol;
                let moment = |m: &OverlapMonomial| {
                    expand_monomial(family, &active, m, m.max_replica(), &|_, mask| ex.omega(mask))
                };
                for q in &self.quantities {
                    out.push(match q {
                        Quantity::Moment(m) => moment(m),
                        Quantity::EnergyDensity => u,
                        Quantity::EnergyTimesMoment(m) => u * moment(m),
                        Quantity::EnergyWeighted { monomial, replicas } => {
                            let r = (*replicas).max(monomial.max_replica());
                            let mut acc = 0.0;
                            for l in 0..*replicas {
                                acc += expand_monomial(family, &active, monomial, r, &|rep, mask| {
                                    if rep == l {
                                        ex.energy_omega(mask) / vol
                                    } else {
                                        ex.omega(mask)
                                    }
                                });
                            }
                            acc
                        }
                        Quantity::LogPartition => table.log_partition(),
                    });
                }
            }
            out
        }))
    }
}

fn estimate(table: &SampleTable, form: &Form, nq: usize) -> QuenchedEstimate {
    table.estimate(|mu| form.eval(mu, nq))
}

fn delta1_closed_form(plan: &mut Plan, beta: f64, replicas: usize, g: &OverlapMonomial) -> Form {
    plan.linear(beta, -beta, &delta1_bracket(replicas, g))
}

fn delta1_definitional_form(
    plan: &mut Plan,
    volume: usize,
    beta: f64,
    g: &OverlapMonomial,
    step: f64,
) -> Result<Form, IdentityError> {
    if !(step > 0.0) || beta - step < 0.0 {
        return Err(IdentityError::StepBelowZero { beta, step });
    }
    // Richardson: D = (4 D(h/2) − D(h))/3 with D(h) the central difference.
    let scale = -1.0 / volume as f64;
    let taps = [
        (beta + 0.5 * step, 4.0 / (3.0 * step)),
        (beta - 0.5 * step, -4.0 / (3.0 * step)),
        (beta + step, -1.0 / (6.0 * step)),
        (beta - step, 1.0 / (6.0 * step)),
    ];
    let mut f = Form::default();
    for (b, c) in taps {
        let s = plan.moment(b, g.clone());
        f.linear.push((scale * c, s));
    }
    Ok(f)
}

fn delta2_closed_form(plan: &mut Plan, beta: f64, replicas: usize, g: &OverlapMonomial) -> Form {
    let pref = -beta * replicas as f64;
    let mut f = plan.linear(beta, pref, &delta2_linear_part(replicas, g));
    let sg = plan.moment(beta, g.clone());
    let sq = plan.moment(beta, OverlapMonomial::q(1, 2));
    f.products.push((pref, sg, sq));
    f
}

fn delta2_definitional_form(plan: &mut Plan, beta: f64, replicas: usize, g: &OverlapMonomial) -> Form {
    let r = replicas as f64;
    let mut f = Form::default();
    let joint = plan.slot(beta, Quantity::EnergyTimesMoment(g.clone()));
    let su = plan.slot(beta, Quantity::EnergyDensity);
    let sg = plan.moment(beta, g.clone());
    f.linear.push((r, joint));
    f.products.push((-r, su, sg));
    f
}

fn sum_rule_form(plan: &mut Plan, beta: f64, replicas: usize, g: &OverlapMonomial) -> Form {
    let mut f = Form::default();
    let weighted = plan.slot(
        beta,
        Quantity::EnergyWeighted {
            monomial: g.clone(),
            replicas,
        },
    );
    let su = plan.slot(beta, Quantity::EnergyDensity);
    let sg = plan.moment(beta, g.clone());
    f.linear.push((1.0, weighted));
    f.products.push((-(replicas as f64), su, sg));
    f
}

/// First identity integrand `⟨bracket⟩ = −Δ₁G/β`.
fn gg_first_form(plan: &mut Plan, beta: f64, replicas: usize, g: &OverlapMonomial) -> Form {
    plan.linear(beta, 1.0, &delta1_bracket(replicas, g))
}

/// Second identity integrand `−Δ₂G/(βR)`.
fn gg_second_form(plan: &mut Plan, beta: f64, replicas: usize, g: &OverlapMonomial) -> Form {
    let mut f = plan.linear(beta, 1.0, &delta2_linear_part(replicas, g));
    let sg = plan.moment(beta, g.clone());
    let sq = plan.moment(beta, OverlapMonomial::q(1, 2));
    f.products.push((1.0, sg, sq));
    f
}

fn run_forms(
    family: &InteractionFamily,
    scheme: Scheme,
    plan: &Plan,
    forms: &[&Form],
) -> Result<Vec<QuenchedEstimate>, IdentityError> {
    let table = plan.tabulate(family, scheme)?;
    let nq = plan.width();
    Ok(forms.iter().map(|f| estimate(&table, f, nq)).collect())
}

/// `Δ₁G` from the closed overlap form `−β⟨G[…]⟩`.
pub fn delta1_closed(
    family: &InteractionFamily,
    beta: f64,
    replicas: usize,
    g: &OverlapMonomial,
    scheme: Scheme,
) -> Result<QuenchedEstimate, IdentityError> {
    check_replicas(replicas, g)?;
    let mut plan = Plan::default();
    let f = delta1_closed_form(&mut plan, beta, replicas, g);
    Ok(run_forms(family, scheme, &plan, &[&f])?[0])
}

/// `Δ₁G = −(1/|Λ|)·∂⟨G⟩/∂β` by a Richardson-extrapolated central difference
/// with step `step`; requires `β − step ≥ 0`.
pub fn delta1_definitional(
    family: &InteractionFamily,
    beta: f64,
    g: &OverlapMonomial,
    step: f64,
    scheme: Scheme,
) -> Result<QuenchedEstimate, IdentityError> {
    let mut plan = Plan::default();
    let f = delta1_definitional_form(&mut plan, family.volume(), beta, g, step)?;
    Ok(run_forms(family, scheme, &plan, &[&f])?[0])
}

/// `Δ₂G` from the closed form `−βR[Σ_k ⟨G q_{k,R+1}⟩ − (R+1)⟨G q_{R+1,R+2}⟩
/// + ⟨G⟩⟨q_{1,2}⟩]`; the last term is a product of two quenched means.
pub fn delta2_closed(
    family: &InteractionFamily,
    beta: f64,
    replicas: usize,
    g: &OverlapMonomial,
    scheme: Scheme,
) -> Result<QuenchedEstimate, IdentityError> {
    check_replicas(replicas, g)?;
    let mut plan = Plan::default();
    let f = delta2_closed_form(&mut plan, beta, replicas, g);
    Ok(run_forms(family, scheme, &plan, &[&f])?[0])
}

/// `Δ₂G = R·[Av(Ω[h]Ω[G]) − Av(Ω[h])Av(Ω[G])]`.
pub fn delta2_definitional(
    family: &InteractionFamily,
    beta: f64,
    replicas: usize,
    g: &OverlapMonomial,
    scheme: Scheme,
) -> Result<QuenchedEstimate, IdentityError> {
    check_replicas(replicas, g)?;
    let mut plan = Plan::default();
    let f = delta2_definitional_form(&mut plan, beta, replicas, g);
    Ok(run_forms(family, scheme, &plan, &[&f])?[0])
}

/// Closed versus definitional evaluation of one building block.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaReport {
    pub beta: f64,
    pub replicas: usize,
    pub observable: OverlapMonomial,
    pub closed: QuenchedEstimate,
    pub definitional: QuenchedEstimate,
    /// `|closed.mean − definitional.mean|`.
    pub discrepancy: f64,
}

impl DeltaReport {
    fn new(
        beta: f64,
        replicas: usize,
        g: &OverlapMonomial,
        closed: QuenchedEstimate,
        definitional: QuenchedEstimate,
    ) -> Self {
        Self {
            beta,
            replicas,
            observable: g.clone(),
            closed,
            definitional,
            discrepancy: (closed.mean - definitional.mean).abs(),
        }
    }
}

/// All dual computations for one `(β, R, G)` on a shared ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaAnalysis {
    pub delta1: DeltaReport,
    pub delta2: DeltaReport,
    /// `Σ_l[⟨h(σ^{(l)})G⟩ − ⟨h⟩⟨G⟩]` computed directly.
    pub sum_direct: QuenchedEstimate,
    /// `|Δ₁G + Δ₂G − sum_direct|` using the closed forms.
    pub sum_discrepancy: f64,
    /// Change in the `Δ₁` bracket when the self-overlap terms are kept.
    pub self_overlap_gap: f64,
}

/// Evaluates both forms of `Δ₁G` and `Δ₂G`, the sum rule and the
/// self-overlap cancellation with one tabulation.
pub fn analyze_deltas(
    family: &InteractionFamily,
    beta: f64,
    replicas: usize,
    g: &OverlapMonomial,
    step: f64,
    scheme: Scheme,
) -> Result<DeltaAnalysis, IdentityError> {
    check_replicas(replicas, g)?;
    let mut plan = Plan::default();
    let d1c = delta1_closed_form(&mut plan, beta, replicas, g);
    let d1d = delta1_definitional_form(&mut plan, family.volume(), beta, g, step)?;
    let d2c = delta2_closed_form(&mut plan, beta, replicas, g);
    let d2d = delta2_definitional_form(&mut plan, beta, replicas, g);
    let sum = sum_rule_form(&mut plan, beta, replicas, g);
    let bracket = plan.linear(beta, 1.0, &delta1_bracket(replicas, g));
    let uncancelled = plan.linear(beta, 1.0, &delta1_bracket_uncancelled(replicas, g));
    let mut closed_sum = d1c.clone();
    closed_sum.add_scaled(1.0, &d2c);
    let est = run_forms(
        family,
        scheme,
        &plan,
        &[&d1c, &d1d, &d2c, &d2d, &sum, &closed_sum, &bracket, &uncancelled],
    )?;
    Ok(DeltaAnalysis {
        delta1: DeltaReport::new(beta, replicas, g, est[0], est[1]),
        delta2: DeltaReport::new(beta, replicas, g, est[2], est[3]),
        sum_direct: est[4],
        sum_discrepancy: (est[5].mean - est[4].mean).abs(),
        self_overlap_gap: (est[6].mean - est[7].mean).abs(),
    })
}

/// `max(|r₁₉ + Δ₁G/β|, |r₂₀ + Δ₂G/(βR)|)` at one `β > 0`, both sides taken
/// from the same tabulation.
pub fn theorem_consistency(
    family: &InteractionFamily,
    beta: f64,
    replicas: usize,
    g: &OverlapMonomial,
    scheme: Scheme,
) -> Result<f64, IdentityError> {
    check_replicas(replicas, g)?;
    if !(beta > 0.0) {
        return Err(IdentityError::NonPositiveBeta(beta));
    }
    let mut plan = Plan::default();
    let r19 = gg_first_form(&mut plan, beta, replicas, g);
    let r20 = gg_second_form(&mut plan, beta, replicas, g);
    let d1 = delta1_closed_form(&mut plan, beta, replicas, g);
    let d2 = delta2_closed_form(&mut plan, beta, replicas, g);
    let e = run_forms(family, scheme, &plan, &[&r19, &r20, &d1, &d2])?;
    let a = (e[0].mean + e[2].mean / beta).abs();
    let b = (e[1].mean + e[3].mean / (beta * replicas as f64)).abs();
    Ok(a.max(b))
}

/// Integration variable of a β-averaged residual.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Measure {
    Beta,
    #[default]
    BetaSquared,
}

impl Measure {
    pub fn name(self) -> &'static str {
        match self {
            Measure::Beta => "dbeta",
            Measure::BetaSquared => "dbeta2",
        }
    }
}

/// Grid in β and integration weights, uniform in the chosen measure.
pub fn integration_grid(
    range: (f64, f64),
    points: usize,
    measure: Measure,
) -> Result<(Vec<f64>, Vec<f64>), IdentityError> {
    let (lo, hi) = range;
    if !(lo >= 0.0) || !(hi >= lo) || !hi.is_finite() {
        return Err(IdentityError::InvalidRange { lo, hi });
    }
    if points < 3 {
        return Err(IdentityError::GridTooSmall(points));
    }
    let (a, b) = match measure {
        Measure::Beta => (lo, hi),
        Measure::BetaSquared => (lo * lo, hi * hi),
    };
    let weights = stats::uniform_rule_weights(a, b, points);
    let betas = (0..points)
        .map(|i| {
            let x = if i == points - 1 {
                b
            } else {
                a + (b - a) * i as f64 / (points - 1) as f64
            };
            match measure {
                Measure::Beta => x,
                Measure::BetaSquared => crate::math::sqrt(x),
            }
        })
        .collect();
    Ok((betas, weights))
}

/// Per-β residuals and their integral over a β-range.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualCurve {
    pub betas: Vec<f64>,
    pub residuals: Vec<QuenchedEstimate>,
    /// Composite-rule weights in the integration variable.
    pub weights: Vec<f64>,
    pub measure: Measure,
    /// `Σ_i w_i r(β_i)`.
    pub integral: QuenchedEstimate,
    /// Length of the range in the integration variable.
    pub span: f64,
    /// Bootstrap interval of `|integral|/span` (degenerate for quadrature).
    pub abs_average: BootstrapSummary,
}

impl ResidualCurve {
    /// The integral recomputed from the per-β means.
    pub fn recomputed_integral(&self) -> f64 {
        self.weights.iter().zip(&self.residuals).map(|(w, r)| w * r.mean).sum()
    }

    /// `integral/span`, or 0 on an empty range.
    pub fn average(&self) -> f64 {
        if self.span > 0.0 {
            self.integral.mean / self.span
        } else {
            0.0
        }
    }
}

fn curves(
    family: &InteractionFamily,
    range: (f64, f64),
    points: usize,
    measure: Measure,
    scheme: Scheme,
    count: usize,
    per_beta: impl Fn(&mut Plan, f64) -> Vec<Form>,
) -> Result<Vec<ResidualCurve>, IdentityError> {
    let (betas, weights) = integration_grid(range, points, measure)?;
    let span = match measure {
        Measure::Beta => range.1 - range.0,
        Measure::BetaSquared => range.1 * range.1 - range.0 * range.0,
    };
    let mut plan = Plan::default();
    let mut pointwise: Vec<Vec<Form>> = alloc::vec![Vec::new(); count];
    for &b in &betas {
        let forms = per_beta(&mut plan, b);
        debug_assert_eq!(forms.len(), count);
        for (slot, f) in pointwise.iter_mut().zip(forms) {
            slot.push(f);
        }
    }
    let table = plan.tabulate(family, scheme)?;
    let nq = plan.width();
    let seed = match scheme {
        Scheme::MonteCarlo { seed, .. } => seed,
        Scheme::Quadrature { .. } => 0,
    };
    Ok(pointwise
        .into_iter()
        .enumerate()
        .map(|(c, forms)| {
            let mut integral = Form::default();
            for (f, w) in forms.iter().zip(&weights) {
                integral.add_scaled(*w, f);
            }
            let residuals = forms.iter().map(|f| estimate(&table, f, nq)).collect();
            let integral_est = estimate(&table, &integral, nq);
            let abs_average = if span > 0.0 {
                table.bootstrap(
                    |mu| integral.eval(mu, nq).abs() / span,
                    BOOTSTRAP_RESAMPLES,
                    seed ^ BOOTSTRAP_SALT ^ c as u64,
                    CONFIDENCE_LEVEL,
                )
            } else {
                BootstrapSummary {
                    stderr: 0.0,
                    lower: 0.0,
                    upper: 0.0,
                }
            };
            ResidualCurve {
                betas: betas.clone(),
                residuals,
                weights: weights.clone(),
                measure,
                integral: integral_est,
                span,
                abs_average,
            }
        })
        .collect())
}

/// The two overlap-identity integrands over a β-grid: the first is
/// `−Δ₁G/β`, the second `−Δ₂G/(βR)`, both in closed overlap form.
pub fn gg_residuals(
    family: &InteractionFamily,
    replicas: usize,
    g: &OverlapMonomial,
    range: (f64, f64),
    points: usize,
    measure: Measure,
    scheme: Scheme,
) -> Result<(ResidualCurve, ResidualCurve), IdentityError> {
    check_replicas(replicas, g)?;
    let mut out = curves(family, range, points, measure, scheme, 2, |plan, b| {
        alloc::vec![
            gg_first_form(plan, b, replicas, g),
            gg_second_form(plan, b, replicas, g)
        ]
    })?;
    let second = out.pop().expect("two curves");
    let first = out.pop().expect("two curves");
    Ok((first, second))
}

/// Residuals of `⟨q₁₂q₂₃⟩ = ½⟨q₁₂²⟩ + ½⟨q₁₂⟩²` and
/// `⟨q₁₂q₃₄⟩ = ⅓⟨q₁₂²⟩ + ⅔⟨q₁₂⟩²` over a β-grid.
pub fn classical_identities(
    family: &InteractionFamily,
    range: (f64, f64),
    points: usize,
    measure: Measure,
    scheme: Scheme,
) -> Result<(ResidualCurve, ResidualCurve), IdentityError> {
    let q12 = OverlapMonomial::q(1, 2);
    let chain = q12.times(&OverlapMonomial::q(2, 3));
    let split = q12.times(&OverlapMonomial::q(3, 4));
    let square = q12.times(&q12);
    let mut out = curves(family, range, points, measure, scheme, 2, |plan, b| {
        let sc = plan.moment(b, chain.clone());
        let ss = plan.moment(b, split.clone());
        let s2 = plan.moment(b, square.clone());
        let s1 = plan.moment(b, q12.clone());
        let r1 = Form {
            linear: alloc::vec![(1.0, sc), (-0.5, s2)],
            products: alloc::vec![(-0.5, s1, s1)],
        };
        let r2 = Form {
            linear: alloc::vec![(1.0, ss), (-1.0 / 3.0, s2)],
            products: alloc::vec![(-2.0 / 3.0, s1, s1)],
        };
        alloc::vec![r1, r2]
    })?;
    let second = out.pop().expect("two curves");
    let first = out.pop().expect("two curves");
    Ok((first, second))
}

/// Which disorder variance a [`VarianceReport`] estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarianceTarget {
    /// `V(𝒜)`, bounded by `|Λ|·c(β)`.
    LogPartition,
    /// `V(u)` with `u = 𝒰/|Λ|`, bounded by `15β²c̄²`.
    EnergyDensity,
}

/// Monte Carlo disorder variance with a bootstrap interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceReport {
    pub target: VarianceTarget,
    pub beta: f64,
    pub volume: usize,
    pub samples: usize,
    pub seed: u64,
    /// Unbiased sample variance.
    pub estimate: f64,
    /// Bootstrap standard error.
    pub stderr: f64,
    pub lower: f64,
    pub upper: f64,
    pub bound: f64,
    /// `upper ≤ bound`.
    pub satisfied: bool,
}

impl VarianceReport {
    /// `(estimate, upper, bound)` divided by `|Λ|` for the log-partition
    /// target, unchanged otherwise.
    pub fn normalized(&self) -> (f64, f64, f64) {
        match self.target {
            VarianceTarget::LogPartition => {
                let v = self.volume as f64;
                (self.estimate / v, self.upper / v, self.bound / v)
            }
            VarianceTarget::EnergyDensity => (self.estimate, self.upper, self.bound),
        }
    }
}

/// `c(β) = ¼β²c̄ + 35/36·β⁴c̄²`.
pub fn free_energy_constant(beta: f64, cbar: f64) -> f64 {
    let b2 = beta * beta;
    0.25 * b2 * cbar + 35.0 / 36.0 * b2 * b2 * cbar * cbar
}

/// `15β²c̄²`.
pub fn energy_density_bound(beta: f64, cbar: f64) -> f64 {
    15.0 * beta * beta * cbar * cbar
}

fn variance_report(
    family: &InteractionFamily,
    beta: f64,
    samples: usize,
    seed: u64,
    target: VarianceTarget,
) -> Result<VarianceReport, IdentityError> {
    if samples < MIN_VARIANCE_SAMPLES {
        return Err(IdentityError::TooFewSamples {
            got: samples,
            min: MIN_VARIANCE_SAMPLES,
        });
    }
    let mut plan = Plan::default();
    let q = match target {
        VarianceTarget::LogPartition => Quantity::LogPartition,
        VarianceTarget::EnergyDensity => Quantity::EnergyDensity,
    };
    plan.slot(beta, q);
    let table = plan.tabulate(family, Scheme::MonteCarlo { samples, seed })?;
    let values: Vec<f64> = (0..table.len()).map(|i| table.value(i, 0)).collect();
    let estimate = stats::sample_variance(&values);
    let boot = stats::bootstrap(
        values.len(),
        BOOTSTRAP_RESAMPLES,
        seed ^ BOOTSTRAP_SALT,
        CONFIDENCE_LEVEL,
        |rows| {
            let v: Vec<f64> = rows.iter().map(|&i| values[i]).collect();
            stats::sample_variance(&v)
        },
    );
    let cbar = family.claimed_bound();
    let bound = match target {
        VarianceTarget::LogPartition => family.volume() as f64 * free_energy_constant(beta, cbar),
        VarianceTarget::EnergyDensity => energy_density_bound(beta, cbar),
    };
    Ok(VarianceReport {
        target,
        beta,
        volume: family.volume(),
        samples,
        seed,
        estimate,
        stderr: boot.stderr,
        lower: boot.lower,
        upper: boot.upper,
        bound,
        satisfied: boot.upper <= bound,
    })
}

/// `V(𝒜)` over `samples` disorder draws against `|Λ|·c(β)`.
pub fn free_energy_variance(
    family: &InteractionFamily,
    beta: f64,
    samples: usize,
    seed: u64,
) -> Result<VarianceReport, IdentityError> {
    variance_report(family, beta, samples, seed, VarianceTarget::LogPartition)
}

/// `V(𝒰/|Λ|)` over `samples` disorder draws against `15β²c̄²`.
pub fn internal_energy_variance(
    family: &InteractionFamily,
    beta: f64,
    samples: usize,
    seed: u64,
) -> Result<VarianceReport, IdentityError> {
    variance_report(family, beta, samples, seed, VarianceTarget::EnergyDensity)
}

/// First-moment internal-energy identity evaluated by quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyIdentityReport {
    pub beta: f64,
    /// `Av Σ_X J_X ω(σ_X)`.
    pub coupling_side: f64,
    /// `Σ_X βΔ²_X[1 − Av ω²(σ_X)]`.
    pub variance_side: f64,
    /// `Av 𝒰` from enumeration; with `H = −Σ J_X σ_X` this is
    /// `−Av Σ_X J_X ω(σ_X)`.
    pub enumerated: f64,
    /// `|coupling_side − variance_side|`.
    pub residual: f64,
    /// `|enumerated + variance_side|`.
    pub enumerated_residual: f64,
    /// `|enumerated − variance_side|`; nonzero unless both sides vanish.
    pub opposite_pairing_gap: f64,
    /// Largest residual among the consistent pairings.
    pub max_residual: f64,
}

/// Second-moment internal-energy identity evaluated by quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergySecondMomentReport {
    pub beta: f64,
    /// `Av(Σ_X J_X ω(σ_X))²`.
    pub coupling_side: f64,
    /// `Av 𝒰²`.
    pub enumerated: f64,
    /// `Σ_{X,Y} β²Δ²_XΔ²_Y Av[1 − ω_X² − ω_Y² + 6ω_X²ω_Y² − 6ω_Xω_Yω_{XY} + ω_{XY}²]`.
    pub bracket: f64,
    /// `Σ_X Δ²_X Av ω²(σ_X)`, the `X = Y` contribution of `Av J_X² ω_X²` not
    /// captured by the six-term bracket.
    pub diagonal: f64,
    /// `|coupling_side − bracket − diagonal|`.
    pub residual: f64,
    /// `|enumerated − bracket − diagonal|`.
    pub enumerated_residual: f64,
    /// `|coupling_side − bracket|`, the gap without the diagonal term.
    pub bracket_only_gap: f64,
    pub max_residual: f64,
}

fn quadrature_subsets(family: &InteractionFamily) -> Result<Vec<(usize, u32, f64)>, IdentityError> {
    gibbs::check_enumerable(family)?;
    let masks = family.masks().ok_or(GibbsError::VolumeOverCap {
        volume: family.volume(),
        cap: crate::model::MASK_BITS,
    })?;
    let active: Vec<(usize, u32, f64)> = masks
        .iter()
        .zip(family.interactions())
        .enumerate()
        .filter(|(_, (_, it))| it.variance() > 0.0)
        .map(|(k, (&m, it))| (k, m, it.variance()))
        .collect();
    if active.len() > WICK_MAX_COUPLINGS {
        return Err(IdentityError::TooManyCouplings {
            couplings: active.len(),
            max: WICK_MAX_COUPLINGS,
        });
    }
    Ok(active)
}

/// Checks `Av Σ_X J_X ω(σ_X) = Σ_X βΔ²_X[1 − Av ω²(σ_X)]` and its pairing with
/// the enumerated `Av 𝒰` under Gauss-Hermite quadrature of the given order.
pub fn internal_energy_identity_check(
    family: &InteractionFamily,
    beta: f64,
    order: usize,
) -> Result<EnergyIdentityReport, IdentityError> {
    let active = quadrature_subsets(family)?;
    let k = active.len();
    let ensemble = Ensemble::new(family, Scheme::Quadrature { order })?;
    let table = ensemble.tabulate(2 + k, |s| {
        let t = GibbsTable::enumerate(family, s, beta).expect("enumerable family");
        let mut row = alloc::vec![0.0; 2 + k];
        for (j, &(idx, mask, _)) in active.iter().enumerate() {
            let w = t.omega_mask(mask);
            row[0] += s.couplings[idx] * w;
            row[2 + j] = w * w;
        }
        row[1] = t.internal_energy();
        row
    });
    let mu = table.means();
    let coupling_side = mu[0];
    let enumerated = mu[1];
    let variance_side: f64 = active
        .iter()
        .enumerate()
        .map(|(j, &(_, _, var))| beta * var * (1.0 - mu[2 + j]))
        .sum();
    let residual = (coupling_side - variance_side).abs();
    let enumerated_residual = (enumerated + variance_side).abs();
    Ok(EnergyIdentityReport {
        beta,
        coupling_side,
        variance_side,
        enumerated,
        residual,
        enumerated_residual,
        opposite_pairing_gap: (enumerated - variance_side).abs(),
        max_residual: residual.max(enumerated_residual),
    })
}

/// Checks the second-moment expansion of `Av 𝒰²` under Gauss-Hermite
/// quadrature, including the diagonal `X = Y` term.
pub fn internal_energy_second_moment_check(
    family: &InteractionFamily,
    beta: f64,
    order: usize,
) -> Result<EnergySecondMomentReport, IdentityError> {
    let active = quadrature_subsets(family)?;
    let k = active.len();
    let ensemble = Ensemble::new(family, Scheme::Quadrature { order })?;
    let width = 2 + k * k + k;
    let table = ensemble.tabulate(width, |s| {
        let t = GibbsTable::enumerate(family, s, beta).expect("enumerable family");
        let w: Vec<f64> = active.iter().map(|&(_, m, _)| t.omega_mask(m)).collect();
        let mut row = alloc::vec![0.0; width];
        let mut lin = 0.0;
        for (j, &(idx, _, _)) in active.iter().enumerate() {
            lin += s.couplings[idx] * w[j];
        }
        row[0] = lin * lin;
        let u = t.internal_energy();
        row[1] = u * u;
        for x in 0..k {
            for y in 0..k {
                let wxy = t.omega_mask(active[x].1 ^ active[y].1);
                let (a, b) = (w[x] * w[x], w[y] * w[y]);
                row[2 + x * k + y] = 1.0 - a - b + 6.0 * a * b - 6.0 * w[x] * w[y] * wxy + wxy * wxy;
            }
            row[2 + k * k + x] = w[x] * w[x];
        }
        row
    });
    let mu = table.means();
    let b2 = beta * beta;
    let mut bracket = 0.0;
    for x in 0..k {
        for y in 0..k {
            bracket += b2 * active[x].2 * active[y].2 * mu[2 + x * k + y];
        }
    }
    let diagonal: f64 = (0..k).map(|x| active[x].2 * mu[2 + k * k + x]).sum();
    let residual = (mu[0] - bracket - diagonal).abs();
    let enumerated_residual = (mu[1] - bracket - diagonal).abs();
    Ok(EnergySecondMomentReport {
        beta,
        coupling_side: mu[0],
        enumerated: mu[1],
        bracket,
        diagonal,
        residual,
        enumerated_residual,
        bracket_only_gap: (mu[0] - bracket).abs(),
        max_residual: residual.max(enumerated_residual),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disorder::EXACT_QUADRATURE_ORDER;
    use crate::model::Preset;
    use alloc::vec;

    const QUAD: Scheme = Scheme::Quadrature {
        order: EXACT_QUADRATURE_ORDER,
    };

    fn pair() -> InteractionFamily {
        InteractionFamily::custom(2, vec![(vec![0, 1], 1.0)], 1.0).unwrap()
    }

    fn chain3() -> InteractionFamily {
        InteractionFamily::custom(3, vec![(vec![0, 1], 1.0), (vec![1, 2], 0.5)], 1.0).unwrap()
    }

    fn q12() -> OverlapMonomial {
        OverlapMonomial::q(1, 2)
    }

    #[test]
    fn bracket_coefficients_telescope_for_constant_g() {
        for r in 1..=5 {
            let one = OverlapMonomial::one();
            let f = delta1_bracket(r, &one);
            let total: f64 = f.terms().iter().map(|(c, _)| c).sum();
            assert_eq!(total, 0.0, "R={r}");
            let f2 = delta2_linear_part(r, &one);
            let total2: f64 = f2.terms().iter().map(|(c, _)| c).sum::<f64>() + 1.0;
            assert_eq!(total2, 0.0, "R={r}");
        }
    }

    #[test]
    fn pair_family_dual_forms_agree() {
        let a = analyze_deltas(&pair(), 0.5, 2, &q12(), DEFAULT_STEP, QUAD).unwrap();
        assert!(a.delta1.discrepancy < 1e-6, "{a:?}");
        assert!(a.delta2.discrepancy < 1e-6, "{a:?}");
        assert!(a.sum_discrepancy < 1e-6, "{a:?}");
        assert!(a.self_overlap_gap < 1e-12, "{a:?}");
        assert!(a.delta1.closed.mean.abs() > 1e-4);
    }

    #[test]
    fn chain_dual_forms_agree_with_three_replica_g() {
        // Order 100 keeps the Gauss-Hermite error of tanh-type integrands at
        // β = 1.1 below the tolerance.
        let g: OverlapMonomial = "q[1,2]*q[2,3]".parse().unwrap();
        for (beta, order) in [(0.3, 40), (1.1, 100)] {
            let a = analyze_deltas(&chain3(), beta, 3, &g, DEFAULT_STEP, Scheme::Quadrature { order }).unwrap();
            assert!(a.delta1.discrepancy < 1e-6, "{a:?}");
            assert!(a.delta2.discrepancy < 1e-6, "{a:?}");
            assert!(a.sum_discrepancy < 1e-6, "{a:?}");
        }
    }

    #[test]
    fn separate_entry_points_match_the_joint_analysis() {
        let f = pair();
        let joint = analyze_deltas(&f, 0.7, 2, &q12(), DEFAULT_STEP, QUAD).unwrap();
        let d1 = delta1_closed(&f, 0.7, 2, &q12(), QUAD).unwrap();
        let d1d = delta1_definitional(&f, 0.7, &q12(), DEFAULT_STEP, QUAD).unwrap();
        let d2 = delta2_closed(&f, 0.7, 2, &q12(), QUAD).unwrap();
        let d2d = delta2_definitional(&f, 0.7, 2, &q12(), QUAD).unwrap();
        assert!((d1.mean - joint.delta1.closed.mean).abs() < 1e-14);
        assert!((d1d.mean - joint.delta1.definitional.mean).abs() < 1e-14);
        assert!((d2.mean - joint.delta2.closed.mean).abs() < 1e-14);
        assert!((d2d.mean - joint.delta2.definitional.mean).abs() < 1e-14);
    }

    #[test]
    fn zero_beta_and_constant_g_vanish() {
        let f = chain3();
        assert_eq!(delta1_closed(&f, 0.0, 2, &q12(), QUAD).unwrap().mean, 0.0);
        assert_eq!(delta2_closed(&f, 0.0, 2, &q12(), QUAD).unwrap().mean, 0.0);
        let one = OverlapMonomial::one();
        assert!(delta1_closed(&f, 0.8, 2, &one, QUAD).unwrap().mean.abs() < 1e-14);
        assert!(delta2_closed(&f, 0.8, 2, &one, QUAD).unwrap().mean.abs() < 1e-14);
        assert_eq!(
            delta1_definitional(&f, 0.8, &one, DEFAULT_STEP, QUAD).unwrap().mean,
            0.0
        );
        let diag = OverlapMonomial::q(1, 1);
        assert_eq!(
            delta1_definitional(&f, 0.8, &diag, DEFAULT_STEP, QUAD).unwrap().mean,
            0.0
        );
        assert_eq!(delta2_definitional(&f, 0.8, 2, &one, QUAD).unwrap().mean, 0.0);
        let frozen = f.scaled(0.0);
        assert_eq!(delta2_definitional(&frozen, 0.8, 2, &q12(), QUAD).unwrap().mean, 0.0);
    }

    #[test]
    fn definitional_step_must_stay_nonnegative() {
        assert_eq!(
            delta1_definitional(&pair(), 5e-5, &q12(), DEFAULT_STEP, QUAD),
            Err(IdentityError::StepBelowZero {
                beta: 5e-5,
                step: DEFAULT_STEP
            })
        );
    }

    #[test]
    fn replica_index_is_validated() {
        let g: OverlapMonomial = "q[1,3]".parse().unwrap();
        assert!(matches!(
            delta1_closed(&pair(), 0.5, 2, &g, QUAD),
            Err(IdentityError::Observable(ObservableError::ReplicaIndex {
                index: 3,
                replicas: 2
            }))
        ));
    }

    #[test]
    fn theorem_integrands_are_rescaled_deltas() {
        let gap = theorem_consistency(&chain3(), 0.9, 2, &q12(), QUAD).unwrap();
        assert!(gap < 1e-10, "{gap}");
    }

    #[test]
    fn integration_grid_in_beta_squared() {
        let (b, w) = integration_grid((0.0, 2.0), 5, Measure::BetaSquared).unwrap();
        assert_eq!(b[0], 0.0);
        assert_eq!(b[4], 2.0);
        assert!((b[2] * b[2] - 2.0).abs() < 1e-15);
        assert!((w.iter().sum::<f64>() - 4.0).abs() < 1e-14);
        assert!(integration_grid((1.0, 0.5), 5, Measure::Beta).is_err());
        assert_eq!(
            integration_grid((0.0, 1.0), 2, Measure::Beta),
            Err(IdentityError::GridTooSmall(2))
        );
    }

    #[test]
    fn empty_range_integrates_to_zero() {
        let (a, b) = gg_residuals(&pair(), 2, &q12(), (0.7, 0.7), 5, Measure::BetaSquared, QUAD).unwrap();
        assert_eq!(a.integral.mean, 0.0);
        assert_eq!(b.integral.mean, 0.0);
    }

    #[test]
    fn integral_matches_composite_rule() {
        let f = Preset::sk(4);
        let f = InteractionFamily::build(&f).unwrap();
        let scheme = Scheme::MonteCarlo { samples: 50, seed: 3 };
        let (r1, r2) = classical_identities(&f, (0.2, 1.5), 7, Measure::BetaSquared, scheme).unwrap();
        for c in [&r1, &r2] {
            assert!((c.integral.mean - c.recomputed_integral()).abs() < 1e-12);
            assert!(c.integral.stderr > 0.0);
            assert!(c.abs_average.lower <= c.abs_average.upper);
        }
    }

    #[test]
    fn classical_residuals_vanish_at_zero_beta_and_without_disorder() {
        let f = InteractionFamily::build(&Preset::sk(4)).unwrap();
        let scheme = Scheme::MonteCarlo { samples: 10, seed: 1 };
        let (r1, r2) = classical_identities(&f, (0.0, 1.0), 3, Measure::Beta, scheme).unwrap();
        // At β = 0 only the diagonal X = Y terms of ⟨q₁₂²⟩ survive: ΣΔ⁴/N².
        let q2 = f
            .interactions()
            .iter()
            .map(|i| i.variance() * i.variance())
            .sum::<f64>()
            / 16.0;
        assert!((r1.residuals[0].mean + 0.5 * q2).abs() < 1e-15);
        assert!((r2.residuals[0].mean + q2 / 3.0).abs() < 1e-15);
        let frozen = f.scaled(0.0);
        let (z1, z2) = classical_identities(&frozen, (0.0, 1.0), 3, Measure::Beta, scheme).unwrap();
        assert_eq!(z1.integral.mean, 0.0);
        assert_eq!(z2.integral.mean, 0.0);
    }

    #[test]
    fn energy_identity_single_coupling() {
        for beta in [0.0, 0.4, 0.7] {
            let r = internal_energy_identity_check(&pair(), beta, 40).unwrap();
            assert!(r.max_residual <= 1e-8, "{r:?}");
        }
        let r = internal_energy_identity_check(&pair(), 1.3, 160).unwrap();
        assert!(r.max_residual <= 1e-8, "{r:?}");
        let wide = pair().scaled(4.0);
        let r = internal_energy_identity_check(&wide, 0.3, 40).unwrap();
        assert!(r.max_residual <= 1e-8, "{r:?}");
        assert!(r.opposite_pairing_gap > 0.1);
    }

    #[test]
    fn energy_second_moment_needs_the_diagonal_term() {
        let r = internal_energy_second_moment_check(&pair(), 0.5, 40).unwrap();
        assert!(r.max_residual <= 1e-8, "{r:?}");
        assert!((r.bracket_only_gap - r.diagonal).abs() < 1e-8);
        assert!(r.diagonal > 0.01);
        let r = internal_energy_second_moment_check(&pair(), 0.8, 120).unwrap();
        assert!(r.max_residual <= 1e-8, "{r:?}");
        let r = internal_energy_second_moment_check(&chain3(), 0.5, 40).unwrap();
        assert!(r.max_residual <= 1e-7, "{r:?}");
        let r = internal_energy_second_moment_check(&chain3(), 0.0, 40).unwrap();
        assert_eq!(r.bracket, 0.0);
        assert_eq!(r.coupling_side, 0.0);
    }

    #[test]
    fn quadrature_checks_reject_many_couplings() {
        let f = InteractionFamily::build(&Preset::sk(4)).unwrap();
        assert!(matches!(
            internal_energy_identity_check(&f, 0.5, 10),
            Err(IdentityError::TooManyCouplings { couplings: 6, max: 3 })
        ));
    }

    #[test]
    fn variance_reports_at_zero_beta_are_exact_zero() {
        let f = InteractionFamily::build(&Preset::sk(6)).unwrap();
        let a = free_energy_variance(&f, 0.0, 100, 9).unwrap();
        assert_eq!(a.estimate, 0.0);
        assert_eq!(a.bound, 0.0);
        assert!(a.satisfied);
        let u = internal_energy_variance(&f, 0.0, 100, 9).unwrap();
        assert_eq!(u.estimate, 0.0);
        assert!(u.satisfied);
        assert!(matches!(
            free_energy_variance(&f, 1.0, 99, 9),
            Err(IdentityError::TooFewSamples { got: 99, min: 100 })
        ));
    }

    #[test]
    fn bound_constants() {
        assert!((free_energy_constant(1.0, 1.0) - (0.25 + 35.0 / 36.0)).abs() < 1e-15);
        assert_eq!(energy_density_bound(1.0, 1.0), 15.0);
    }
}
