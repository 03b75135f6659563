//! Coupling realizations and averages over them.
//!
//! Two averaging schemes are supported: plain Monte Carlo over
//! counter-based samples, and tensor-product Gauss-Hermite quadrature over
//! the non-degenerate couplings, which is exact up to truncation for the
//! smooth integrands met here.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use thiserror::Error;

use crate::gibbs;
use crate::math;
use crate::model::InteractionFamily;
use crate::parallel::map_indices;
use crate::stats::{self, pairwise_sum, pairwise_sum_by, BootstrapSummary};

/// Default Gauss-Hermite order per coupling dimension.
pub const DEFAULT_QUADRATURE_ORDER: usize = 20;
/// Order used by checks that compare against exact identities.
pub const EXACT_QUADRATURE_ORDER: usize = 40;
/// Largest tensor grid that will be evaluated.
pub const MAX_QUADRATURE_NODES: usize = 10_000_000;
/// Largest coupling count accepted by the Wick check.
pub const WICK_MAX_COUPLINGS: usize = 3;
/// Finite-difference step for coupling derivatives.
pub const WICK_STEP: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DisorderError {
    #[error("quadrature needs {order}^{dims} nodes, above the cap of {MAX_QUADRATURE_NODES}")]
    QuadratureInfeasible { order: usize, dims: usize },
    #[error("quadrature order must be at least 1")]
    ZeroOrder,
    #[error("Monte Carlo needs at least 2 samples for a standard error, got {0}")]
    TooFewSamples(usize),
    #[error("{0}")]
    Unsupported(String),
}

/// One realization of all couplings, aligned with the family's subset order.
#[derive(Debug, Clone, PartialEq)]
pub struct DisorderSample {
    pub couplings: Vec<f64>,
    pub index: u64,
    pub seed: u64,
}

/// Draws `J_X ~ N(0, Δ²_X)` for every subset.
///
/// Coupling `k` of sample `index` comes from words `[4k, 4k+4)` of ChaCha8
/// stream `index` keyed by `seed`, so any sample can be regenerated on its
/// own. Zero-variance couplings are exactly zero.
pub fn sample_disorder(family: &InteractionFamily, seed: u64, index: u64) -> DisorderSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let couplings = family
        .interactions()
        .iter()
        .map(|it| {
            let z = box_muller(rng.next_u64(), rng.next_u64());
            if it.variance() == 0.0 {
                0.0
            } else {
                math::sqrt(it.variance()) * z
            }
        })
        .collect();
    DisorderSample { couplings, index, seed }
}

fn unit_open(bits: u64) -> f64 {
    // (0, 1]
    ((bits >> 11) as f64 + 1.0) * (1.0 / (1u64 << 53) as f64)
}

fn box_muller(a: u64, b: u64) -> f64 {
    let u = unit_open(a);
    let v = unit_open(b);
    math::sqrt(-2.0 * math::ln(u)) * math::cos(2.0 * core::f64::consts::PI * v)
}

/// Gauss-Hermite rule for the standard normal: `E f(Z) ≈ Σ w_i f(z_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    /// Nodes by Newton iteration on orthonormal Hermite polynomials.
    pub fn new(order: usize) -> Result<Self, DisorderError> {
        if order == 0 {
            return Err(DisorderError::ZeroOrder);
        }
        const PIM4: f64 = 0.751_125_544_464_942_5; // π^{-1/4}
        let n = order;
        let mut x = alloc::vec![0.0; n];
        let mut w = alloc::vec![0.0; n];
        let m = n.div_ceil(2);
        let mut z = 0.0;
        for i in 0..m {
            z = match i {
                0 => {
                    let t = (2 * n + 1) as f64;
                    math::sqrt(t) - 1.85575 * math::powf(t, -0.16667)
                }
                1 => z - 1.14 * math::powf(n as f64, 0.426) / z,
                2 => 1.86 * z - 0.86 * x[0],
                3 => 1.91 * z - 0.91 * x[1],
                _ => 2.0 * z - x[i - 2],
            };
            let mut pp = 0.0;
            for iter in 0..200 {
                let (p1, p2) = hermite_pair(n, z, PIM4);
                pp = math::sqrt(2.0 * n as f64) * p2;
                let step = p1 / pp;
                z -= step;
                if math::abs(step) <= 1e-15 * math::abs(z).max(1.0) || iter == 199 {
                    let (_, p2) = hermite_pair(n, z, PIM4);
                    pp = math::sqrt(2.0 * n as f64) * p2;
                    break;
                }
            }
            x[i] = z;
            x[n - 1 - i] = -z;
            w[i] = 2.0 / (pp * pp);
            w[n - 1 - i] = w[i];
        }
        if n % 2 == 1 {
            x[m - 1] = 0.0;
        }
        let sqrt_pi = math::sqrt(core::f64::consts::PI);
        let nodes = x.iter().rev().map(|t| core::f64::consts::SQRT_2 * t).collect();
        let weights = w.iter().rev().map(|t| t / sqrt_pi).collect();
        Ok(Self { nodes, weights })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }
}

fn hermite_pair(n: usize, z: f64, pim4: f64) -> (f64, f64) {
    let mut p1 = pim4;
    let mut p2 = 0.0;
    for j in 0..n {
        let p3 = p2;
        p2 = p1;
        p1 = z * math::sqrt(2.0 / (j + 1) as f64) * p2 - math::sqrt(j as f64 / (j + 1) as f64) * p3;
    }
    (p1, p2)
}

/// Tensor Gauss-Hermite grid over the positive-variance couplings of a family.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureGrid {
    rule: GaussHermite,
    dims: Vec<usize>,
    scales: Vec<f64>,
    couplings: usize,
}

impl QuadratureGrid {
    pub fn new(family: &InteractionFamily, order: usize) -> Result<Self, DisorderError> {
        let dims: Vec<usize> = (0..family.len()).filter(|&k| family.variance(k) > 0.0).collect();
        let total = (order as u128).checked_pow(dims.len() as u32);
        match total {
            Some(t) if t <= MAX_QUADRATURE_NODES as u128 => {}
            _ => {
                return Err(DisorderError::QuadratureInfeasible {
                    order,
                    dims: dims.len(),
                })
            }
        }
        let rule = GaussHermite::new(order)?;
        let scales = dims.iter().map(|&k| math::sqrt(family.variance(k))).collect();
        Ok(Self {
            rule,
            dims,
            scales,
            couplings: family.len(),
        })
    }

    pub fn order(&self) -> usize {
        self.rule.order()
    }

    /// Coupling indices that carry a quadrature dimension.
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn rule(&self) -> &GaussHermite {
        &self.rule
    }

    pub fn len(&self) -> usize {
        self.order().pow(self.dims.len() as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Node `i` in mixed-radix order and its product weight.
    pub fn node(&self, mut i: usize) -> (f64, DisorderSample) {
        let order = self.order();
        let mut couplings = alloc::vec![0.0; self.couplings];
        let mut weight = 1.0;
        let index = i as u64;
        for (d, &k) in self.dims.iter().enumerate() {
            let digit = i % order;
            i /= order;
            couplings[k] = self.scales[d] * self.rule.nodes[digit];
            weight *= self.rule.weights[digit];
        }
        (
            weight,
            DisorderSample {
                couplings,
                index,
                seed: 0,
            },
        )
    }
}

/// How disorder averages are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    MonteCarlo { samples: usize, seed: u64 },
    Quadrature { order: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimateMethod {
    MonteCarlo,
    Quadrature { order: usize },
}

/// A disorder-averaged value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuenchedEstimate {
    pub mean: f64,
    /// Zero for quadrature.
    pub stderr: f64,
    pub samples: usize,
    pub method: EstimateMethod,
    /// Zero for quadrature.
    pub seed: u64,
}

impl QuenchedEstimate {
    pub fn exact(value: f64) -> Self {
        Self {
            mean: value,
            stderr: 0.0,
            samples: 0,
            method: EstimateMethod::Quadrature { order: 0 },
            seed: 0,
        }
    }
}

/// The set of disorder points (with weights) a scheme averages over.
#[derive(Debug, Clone)]
pub struct Ensemble<'a> {
    family: &'a InteractionFamily,
    kind: EnsembleKind,
}

#[derive(Debug, Clone)]
enum EnsembleKind {
    MonteCarlo { samples: usize, seed: u64 },
    Quadrature(QuadratureGrid),
}

impl<'a> Ensemble<'a> {
    pub fn new(family: &'a InteractionFamily, scheme: Scheme) -> Result<Self, DisorderError> {
        let kind = match scheme {
            Scheme::MonteCarlo { samples, seed } => {
                if samples < 2 {
                    return Err(DisorderError::TooFewSamples(samples));
                }
                EnsembleKind::MonteCarlo { samples, seed }
            }
            Scheme::Quadrature { order } => EnsembleKind::Quadrature(QuadratureGrid::new(family, order)?),
        };
        Ok(Self { family, kind })
    }

    pub fn family(&self) -> &InteractionFamily {
        self.family
    }

    pub fn len(&self) -> usize {
        match &self.kind {
            EnsembleKind::MonteCarlo { samples, .. } => *samples,
            EnsembleKind::Quadrature(g) => g.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn method(&self) -> EstimateMethod {
        match &self.kind {
            EnsembleKind::MonteCarlo { .. } => EstimateMethod::MonteCarlo,
            EnsembleKind::Quadrature(g) => EstimateMethod::Quadrature { order: g.order() },
        }
    }

    pub fn seed(&self) -> u64 {
        match &self.kind {
            EnsembleKind::MonteCarlo { seed, .. } => *seed,
            EnsembleKind::Quadrature(_) => 0,
        }
    }

    /// Disorder point `i` and its weight (unnormalized for quadrature, 1 for MC).
    pub fn point(&self, i: usize) -> (f64, DisorderSample) {
        match &self.kind {
            EnsembleKind::MonteCarlo { seed, .. } => (1.0, sample_disorder(self.family, *seed, i as u64)),
            EnsembleKind::Quadrature(g) => g.node(i),
        }
    }

    /// Evaluates a vector-valued `f` at every point (in parallel when
    /// enabled) and keeps the per-point values.
    pub fn tabulate<F>(&self, columns: usize, f: F) -> SampleTable
    where
        F: Fn(&DisorderSample) -> Vec<f64> + Sync + Send,
    {
        let n = self.len();
        let rows: Vec<(f64, Vec<f64>)> = map_indices(n, |i| {
            let (w, s) = self.point(i);
            let v = f(&s);
            debug_assert_eq!(v.len(), columns);
            (w, v)
        });
        let mut weights = Vec::with_capacity(n);
        let mut values = Vec::with_capacity(n * columns);
        for (w, v) in rows {
            weights.push(w);
            values.extend_from_slice(&v);
        }
        SampleTable {
            columns,
            weights,
            values,
            method: self.method(),
            seed: self.seed(),
        }
    }
}

/// Per-disorder-point values of several quantities.
#[derive(Debug, Clone)]
pub struct SampleTable {
    columns: usize,
    weights: Vec<f64>,
    values: Vec<f64>,
    method: EstimateMethod,
    seed: u64,
}

impl SampleTable {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn columns(&self) -> usize {
        self.columns
    }

    pub fn method(&self) -> EstimateMethod {
        self.method
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.columns + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.values[row * self.columns..(row + 1) * self.columns]
    }

    fn is_mc(&self) -> bool {
        matches!(self.method, EstimateMethod::MonteCarlo)
    }

    fn weighted_mean_over(&self, rows: &[usize], col: usize) -> f64 {
        if self.is_mc() {
            pairwise_sum_by(rows.len(), &|i| self.value(rows[i], col)) / rows.len() as f64
        } else {
            let num = pairwise_sum_by(rows.len(), &|i| self.weights[rows[i]] * self.value(rows[i], col));
            let den = pairwise_sum_by(rows.len(), &|i| self.weights[rows[i]]);
            num / den
        }
    }

    pub fn mean(&self, col: usize) -> f64 {
        if self.is_mc() {
            pairwise_sum_by(self.len(), &|i| self.value(i, col)) / self.len() as f64
        } else {
            let num = pairwise_sum_by(self.len(), &|i| self.weights[i] * self.value(i, col));
            num / pairwise_sum(&self.weights)
        }
    }

    pub fn means(&self) -> Vec<f64> {
        (0..self.columns).map(|c| self.mean(c)).collect()
    }

    fn wrap(&self, mean: f64, stderr: f64) -> QuenchedEstimate {
        QuenchedEstimate {
            mean,
            stderr,
            samples: self.len(),
            method: self.method,
            seed: self.seed,
        }
    }

    pub fn estimate_column(&self, col: usize) -> QuenchedEstimate {
        let mean = self.mean(col);
        let stderr = if self.is_mc() {
            let v: Vec<f64> = (0..self.len()).map(|i| self.value(i, col)).collect();
            stats::standard_error(&v)
        } else {
            0.0
        };
        self.wrap(mean, stderr)
    }

    /// `g(means)` with a first-order (delta-method) standard error.
    ///
    /// Gradients of `g` are taken by central differences, which is exact
    /// for the linear and quadratic combinations used in this crate.
    pub fn estimate(&self, g: impl Fn(&[f64]) -> f64) -> QuenchedEstimate {
        let mu = self.means();
        let value = g(&mu);
        if !self.is_mc() {
            return self.wrap(value, 0.0);
        }
        let grad = gradient(&g, &mu);
        let influence: Vec<f64> = (0..self.len())
            .map(|i| {
                let row = self.row(i);
                let mut acc = 0.0;
                for j in 0..self.columns {
                    if grad[j] != 0.0 {
                        acc += grad[j] * (row[j] - mu[j]);
                    }
                }
                acc
            })
            .collect();
        self.wrap(value, stats::standard_error(&influence))
    }

    /// Percentile bootstrap of `g(means)` over disorder samples.
    ///
    /// Quadrature tables have no sampling noise and yield a degenerate interval.
    pub fn bootstrap(&self, g: impl Fn(&[f64]) -> f64, resamples: usize, seed: u64, level: f64) -> BootstrapSummary {
        if !self.is_mc() {
            let v = g(&self.means());
            return BootstrapSummary {
                stderr: 0.0,
                lower: v,
                upper: v,
            };
        }
        stats::bootstrap(self.len(), resamples, seed, level, |rows| {
            let mu: Vec<f64> = (0..self.columns).map(|c| self.weighted_mean_over(rows, c)).collect();
            g(&mu)
        })
    }
}

fn gradient(g: &impl Fn(&[f64]) -> f64, mu: &[f64]) -> Vec<f64> {
    let mut x = mu.to_vec();
    (0..mu.len())
        .map(|j| {
            let h = 1e-4 * math::abs(mu[j]).max(1.0);
            x[j] = mu[j] + h;
            let up = g(&x);
            x[j] = mu[j] - h;
            let down = g(&x);
            x[j] = mu[j];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `Av f(J)` under the chosen scheme.
pub fn quenched_average<F>(family: &InteractionFamily, scheme: Scheme, f: F) -> Result<QuenchedEstimate, DisorderError>
where
    F: Fn(&DisorderSample) -> f64 + Sync + Send,
{
    let ensemble = Ensemble::new(family, scheme)?;
    Ok(ensemble.tabulate(1, |s| alloc::vec![f(s)]).estimate_column(0))
}

/// Built-in smooth test functions of the couplings for the Wick check.
#[derive(Debug, Clone, PartialEq)]
pub enum TestFunction {
    /// `Σ c ∏_k x_k^{e_k}` with total degree at most 4 per term.
    Polynomial(Vec<(f64, Vec<u32>)>),
    /// `∏_k tanh(β x_k)` over all couplings.
    TanhProduct { beta: f64 },
    /// Gibbs expectation `ω(σ_target)` of the family's own Hamiltonian at
    /// couplings `x` and inverse temperature `β`.
    GibbsCorrelation { beta: f64, target: u32 },
}

impl TestFunction {
    pub fn monomial(coef: f64, exponents: Vec<u32>) -> Self {
        TestFunction::Polynomial(alloc::vec![(coef, exponents)])
    }

    fn validate(&self, family: &InteractionFamily) -> Result<(), DisorderError> {
        match self {
            TestFunction::Polynomial(terms) => {
                for (_, e) in terms {
                    if e.len() != family.len() {
                        return Err(DisorderError::Unsupported(format!(
                            "polynomial term has {} exponents for {} couplings",
                            e.len(),
                            family.len()
                        )));
                    }
                    if e.iter().sum::<u32>() > 4 {
                        return Err(DisorderError::Unsupported("polynomial degree above 4".into()));
                    }
                }
                Ok(())
            }
            TestFunction::TanhProduct { .. } => Ok(()),
            TestFunction::GibbsCorrelation { .. } => family
                .masks()
                .map(|_| ())
                .ok_or_else(|| DisorderError::Unsupported("volume too large for enumeration".into())),
        }
    }

    pub fn eval(&self, family: &InteractionFamily, x: &[f64]) -> f64 {
        match self {
            TestFunction::Polynomial(terms) => terms
                .iter()
                .map(|(c, e)| {
                    c * x
                        .iter()
                        .zip(e)
                        .map(|(xk, &ek)| math::powi(*xk, ek as i32))
                        .product::<f64>()
                })
                .sum(),
            TestFunction::TanhProduct { beta } => x.iter().map(|xk| math::tanh(beta * xk)).product(),
            TestFunction::GibbsCorrelation { beta, target } => {
                let masks = family.masks().expect("validated");
                gibbs::correlation_at(masks, family.volume(), x, *beta, *target)
            }
        }
    }

    fn derivative(&self, family: &InteractionFamily, x: &[f64], j: usize) -> f64 {
        let mut y = x.to_vec();
        let mut central = |h: f64| {
            y[j] = x[j] + h;
            let up = self.eval(family, &y);
            y[j] = x[j] - h;
            let down = self.eval(family, &y);
            y[j] = x[j];
            (up - down) / (2.0 * h)
        };
        let coarse = central(WICK_STEP);
        let fine = central(0.5 * WICK_STEP);
        (4.0 * fine - coarse) / 3.0
    }
}

/// Both sides of `Av(x_i ψ) = Σ_j Av(x_i x_j) Av(∂_j ψ)` per coupling `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct WickReport {
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    pub max_residual: f64,
}

/// Gaussian integration by parts checked by quadrature with
/// Richardson-extrapolated central differences.
pub fn wick_check(family: &InteractionFamily, psi: &TestFunction, order: usize) -> Result<WickReport, DisorderError> {
    let k = family.len();
    if k > WICK_MAX_COUPLINGS {
        return Err(DisorderError::Unsupported(format!(
            "Wick check supports at most {WICK_MAX_COUPLINGS} couplings, family has {k}"
        )));
    }
    psi.validate(family)?;
    let ensemble = Ensemble::new(family, Scheme::Quadrature { order })?;
    let cols = 2 * k + k * k;
    let table = ensemble.tabulate(cols, |s| {
        let x = &s.couplings;
        let value = psi.eval(family, x);
        let mut out = Vec::with_capacity(cols);
        out.extend(x.iter().map(|xi| xi * value));
        out.extend((0..k).map(|j| psi.derivative(family, x, j)));
        for i in 0..k {
            for j in 0..k {
                out.push(x[i] * x[j]);
            }
        }
        out
    });
    let mu = table.means();
    let lhs: Vec<f64> = mu[..k].to_vec();
    let rhs: Vec<f64> = (0..k)
        .map(|i| (0..k).map(|j| mu[2 * k + i * k + j] * mu[k + j]).sum())
        .collect();
    let max_residual = lhs.iter().zip(&rhs).map(|(a, b)| math::abs(a - b)).fold(0.0, f64::max);
    Ok(WickReport { lhs, rhs, max_residual })
}

/// The standard suite of Wick test functions for a family with at most three couplings.
///
/// Inverse temperatures stay at `β ≤ 1`, where order-40 quadrature of the
/// tanh-type members is accurate to `1e-6` for unit coupling variance.
pub fn builtin_test_functions(family: &InteractionFamily) -> Vec<(String, TestFunction)> {
    let k = family.len();
    let unit = |j: usize, p: u32| {
        let mut e = alloc::vec![0u32; k];
        e[j] = p;
        e
    };
    let mut out = Vec::new();
    out.push((String::from("x"), TestFunction::monomial(1.0, unit(0, 1))));
    out.push((String::from("x^2"), TestFunction::monomial(1.0, unit(0, 2))));
    out.push((String::from("x^3"), TestFunction::monomial(1.0, unit(0, 3))));
    let mut quartic = alloc::vec![(0.5, unit(0, 4)), (-1.0, unit(0, 2)), (2.0, unit(0, 1))];
    if k >= 2 {
        let mut mixed = alloc::vec![0u32; k];
        mixed[0] = 2;
        mixed[1] = 1;
        quartic.push((1.5, mixed));
        let mut cross = alloc::vec![0u32; k];
        cross[0] = 1;
        cross[k - 1] += 3;
        quartic.push((-0.25, cross));
    }
    out.push((String::from("poly4"), TestFunction::Polynomial(quartic)));
    for beta in [0.5, 1.0] {
        out.push((format!("tanh_product(beta={beta})"), TestFunction::TanhProduct { beta }));
    }
    if let Some(masks) = family.masks() {
        if family.volume() <= 8 {
            for beta in [0.5, 1.0] {
                for (name, target) in [
                    ("first_subset", masks[0]),
                    ("all_sites", crate::model::full_mask(family.volume())),
                ] {
                    out.push((
                        format!("gibbs_{name}(beta={beta})"),
                        TestFunction::GibbsCorrelation { beta, target },
                    ));
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{InteractionFamily, Preset};
    use alloc::vec;

    fn single(variance: f64) -> InteractionFamily {
        InteractionFamily::custom(2, vec![(vec![0, 1], variance)], 1.0).unwrap()
    }

    #[test]
    fn gauss_hermite_weights_and_moments() {
        for order in [1usize, 2, 5, 20, 40, 41] {
            let r = GaussHermite::new(order).unwrap();
            let s: f64 = r.weights.iter().sum();
            assert!((s - 1.0).abs() < 1e-14, "order {order}: {s}");
            let m2: f64 = r.weights.iter().zip(&r.nodes).map(|(w, x)| w * x * x).sum();
            if order >= 2 {
                assert!((m2 - 1.0).abs() < 1e-13, "order {order}: {m2}");
            }
        }
        let r = GaussHermite::new(10).unwrap();
        let m8: f64 = r.weights.iter().zip(&r.nodes).map(|(w, x)| w * x.powi(8)).sum();
        assert!((m8 - 105.0).abs() < 1e-10);
    }

    #[test]
    fn sampling_is_reproducible() {
        let f = InteractionFamily::build(&Preset::sk(4)).unwrap();
        assert_eq!(sample_disorder(&f, 11, 5), sample_disorder(&f, 11, 5));
        assert_ne!(
            sample_disorder(&f, 11, 5).couplings,
            sample_disorder(&f, 11, 6).couplings
        );
        assert_ne!(
            sample_disorder(&f, 12, 5).couplings,
            sample_disorder(&f, 11, 5).couplings
        );
    }

    #[test]
    fn zero_variance_couplings_are_exactly_zero() {
        let f = InteractionFamily::custom(3, vec![(vec![0, 1], 1.0), (vec![1, 2], 0.0)], 1.0).unwrap();
        for i in 0..20 {
            assert_eq!(sample_disorder(&f, 3, i).couplings[1], 0.0);
        }
        let g = QuadratureGrid::new(&f, 10).unwrap();
        assert_eq!(g.dims(), &[0]);
        assert_eq!(g.len(), 10);
    }

    #[test]
    fn sk4_couplings_have_zero_mean() {
        let f = InteractionFamily::build(&Preset::sk(4)).unwrap();
        let est = quenched_average(
            &f,
            Scheme::MonteCarlo {
                samples: 100_000,
                seed: 1,
            },
            |s| s.couplings[2],
        )
        .unwrap();
        assert!(est.mean.abs() <= 4.0 * est.stderr, "{est:?}");
    }

    #[test]
    fn rem3_couplings_have_variance_three_eighths() {
        let f = InteractionFamily::build(&Preset::RandomEnergy { n: 3 }).unwrap();
        let est = quenched_average(
            &f,
            Scheme::MonteCarlo {
                samples: 100_000,
                seed: 2,
            },
            |s| s.couplings[4] * s.couplings[4],
        )
        .unwrap();
        assert!((est.mean - 0.375).abs() <= 3.0 * est.stderr, "{est:?}");
    }

    #[test]
    fn constant_function_is_exact_under_both_schemes() {
        let f = InteractionFamily::build(&Preset::sk(3)).unwrap();
        let mc = quenched_average(&f, Scheme::MonteCarlo { samples: 100, seed: 1 }, |_| 1.0).unwrap();
        assert_eq!((mc.mean, mc.stderr), (1.0, 0.0));
        let q = quenched_average(&f, Scheme::Quadrature { order: 8 }, |_| 1.0).unwrap();
        assert_eq!((q.mean, q.stderr), (1.0, 0.0));
        assert_eq!(q.method, EstimateMethod::Quadrature { order: 8 });
    }

    #[test]
    fn second_moment_by_quadrature() {
        let est = quenched_average(&single(1.0), Scheme::Quadrature { order: 20 }, |s| {
            s.couplings[0].powi(2)
        })
        .unwrap();
        assert!((est.mean - 1.0).abs() < 1e-12);
    }

    #[test]
    fn scheme_errors() {
        let f = InteractionFamily::build(&Preset::sk(8)).unwrap();
        assert!(matches!(
            Ensemble::new(&f, Scheme::Quadrature { order: 40 }),
            Err(DisorderError::QuadratureInfeasible { .. })
        ));
        assert_eq!(
            Ensemble::new(&f, Scheme::MonteCarlo { samples: 1, seed: 0 }).err(),
            Some(DisorderError::TooFewSamples(1))
        );
    }

    #[test]
    fn wick_trivial_cases() {
        let f = single(1.0);
        let x = wick_check(&f, &TestFunction::monomial(1.0, vec![1]), 40).unwrap();
        assert!((x.lhs[0] - 1.0).abs() < 1e-10 && x.max_residual <= 1e-10);
        let x2 = wick_check(&f, &TestFunction::monomial(1.0, vec![2]), 40).unwrap();
        assert!(x2.lhs[0].abs() < 1e-10 && x2.max_residual <= 1e-10);
    }

    #[test]
    fn wick_two_spin_magnetization() {
        let f = single(1.0);
        let psi = TestFunction::GibbsCorrelation {
            beta: 0.7,
            target: 0b11,
        };
        let r = wick_check(&f, &psi, 40).unwrap();
        assert!(r.max_residual <= 1e-6, "{r:?}");
        assert!(r.lhs[0] > 0.1);
    }

    #[test]
    fn wick_rejects_large_families() {
        let f = InteractionFamily::build(&Preset::sk(4)).unwrap();
        assert!(wick_check(&f, &TestFunction::TanhProduct { beta: 1.0 }, 10).is_err());
    }

    #[test]
    fn delta_method_for_a_product() {
        let f = single(1.0);
        let e = Ensemble::new(&f, Scheme::MonteCarlo { samples: 4000, seed: 9 }).unwrap();
        let t = e.tabulate(2, |s| vec![1.0 + s.couplings[0], 2.0]);
        let est = t.estimate(|m| m[0] * m[1]);
        // d/dm0 = 2, so stderr is twice the column stderr.
        let col = t.estimate_column(0);
        assert!((est.stderr - 2.0 * col.stderr).abs() < 1e-9);
        assert!((est.mean - 2.0 * col.mean).abs() < 1e-12);
    }
}
