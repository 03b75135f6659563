//! Executes the checks of one run and collects result records.

use std::fs;
use std::path::Path;
use std::time::Instant;

use gg_core::disorder::{builtin_test_functions, wick_check, EXACT_QUADRATURE_ORDER};
use gg_core::gibbs;
use gg_core::identities::{
    analyze_deltas, classical_identities, free_energy_constant, free_energy_variance, gg_residuals, integration_grid,
    internal_energy_identity_check, internal_energy_second_moment_check, internal_energy_variance, theorem_consistency,
    ResidualCurve, DEFAULT_STEP,
};
use gg_core::model::InteractionFamily;
use gg_core::{QuenchedEstimate, Scheme};

use crate::config::{Check, RunConfig};
use crate::output::{self, NamedCurve, ResultRecord, Severity};
use crate::BenchError;

/// Closed versus definitional building blocks and the sum rule.
pub const DUAL_TOLERANCE: f64 = 1e-6;
/// Bracket with and without the self-overlap terms.
pub const SELF_OVERLAP_TOLERANCE: f64 = 1e-12;
/// Integrands against rescaled building blocks on the same tabulation.
pub const THEOREM_TOLERANCE: f64 = 1e-10;
/// Gaussian integration by parts over the built-in test functions.
pub const WICK_TOLERANCE: f64 = 1e-6;
/// First-moment internal-energy identity.
pub const ENERGY_FIRST_TOLERANCE: f64 = 1e-8;
/// Second-moment internal-energy identity.
pub const ENERGY_SECOND_TOLERANCE: f64 = 1e-7;
/// Two-sided normal quantile for 95% intervals.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Records and curves produced by one run.
#[derive(Debug, Clone, Default)]
pub struct RunOutcome {
    pub family: String,
    pub scheme: String,
    pub records: Vec<ResultRecord>,
    pub curves: Vec<NamedCurve>,
}

impl RunOutcome {
    pub fn hard_failures(&self) -> usize {
        self.records.iter().filter(|r| r.failed_hard()).count()
    }

    pub fn soft_warnings(&self) -> usize {
        self.records.iter().filter(|r| r.failed_soft()).count()
    }

    /// 0 when every hard record passed, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.hard_failures() == 0 {
            0
        } else {
            1
        }
    }
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    family: InteractionFamily,
    family_name: String,
    scheme_name: String,
    seed: u64,
}

impl Ctx<'_> {
    fn record(&self, check: Check) -> ResultRecord {
        ResultRecord::new(check.name(), &self.family_name, &self.scheme_name, self.seed)
    }

    fn range(&self) -> (f64, f64) {
        (self.cfg.grid.beta_min, self.cfg.grid.beta_max)
    }

    fn betas(&self) -> Result<Vec<f64>, BenchError> {
        Ok(integration_grid(self.range(), self.cfg.grid.points, self.cfg.grid.measure)?.0)
    }

    fn quadrature_order(&self) -> usize {
        match self.cfg.scheme {
            Scheme::Quadrature { order } => order,
            Scheme::MonteCarlo { .. } => EXACT_QUADRATURE_ORDER,
        }
    }

    fn is_quadrature(&self) -> bool {
        matches!(self.cfg.scheme, Scheme::Quadrature { .. })
    }
}

/// Runs the configured checks in a pool of `cfg.workers` threads.
pub fn execute(cfg: &RunConfig) -> Result<RunOutcome, BenchError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| BenchError::Config(format!("cannot start {} workers: {e}", cfg.workers)))?;
    pool.install(|| execute_inline(cfg))
}

fn execute_inline(cfg: &RunConfig) -> Result<RunOutcome, BenchError> {
    let family = cfg.build_family()?;
    let seed = match cfg.scheme {
        Scheme::MonteCarlo { seed, .. } => seed,
        Scheme::Quadrature { .. } => 0,
    };
    let ctx = Ctx {
        cfg,
        family_name: cfg.family.descriptor(),
        scheme_name: cfg.scheme_descriptor(),
        family,
        seed,
    };
    if cfg.checks.iter().any(|c| *c != Check::Stability && *c != Check::Wick) {
        gibbs::check_enumerable(&ctx.family)?;
    }
    let mut outcome = RunOutcome {
        family: ctx.family_name.clone(),
        scheme: ctx.scheme_name.clone(),
        ..RunOutcome::default()
    };
    for &check in &cfg.checks {
        let start = Instant::now();
        let first = outcome.records.len();
        match check {
            Check::Stability => stability(&ctx, &mut outcome),
            Check::Classical => classical(&ctx, &mut outcome)?,
            Check::Gg => gg(&ctx, &mut outcome)?,
            Check::DeltaDual => delta_dual(&ctx, &mut outcome)?,
            Check::Wick => wick(&ctx, &mut outcome)?,
            Check::EnergyIdentities => energy(&ctx, &mut outcome)?,
            Check::VarianceBounds => variance(&ctx, &mut outcome)?,
        }
        let secs = start.elapsed().as_secs_f64();
        for r in &mut outcome.records[first..] {
            r.wall_time = secs;
        }
    }
    for (i, r) in outcome.records.iter_mut().enumerate() {
        r.id = i;
    }
    Ok(outcome)
}

/// Executes a run and writes its files into `out`.
pub fn run(cfg: &RunConfig, out: &Path) -> Result<RunOutcome, BenchError> {
    let outcome = execute(cfg)?;
    write_outputs(&outcome, out)?;
    Ok(outcome)
}

pub fn write_outputs(outcome: &RunOutcome, out: &Path) -> Result<(), BenchError> {
    fs::create_dir_all(out)?;
    output::write_results(&out.join("results.csv"), &outcome.records)?;
    output::write_summary(
        &out.join("summary.json"),
        &outcome.family,
        &outcome.scheme,
        &outcome.records,
    )?;
    for c in &outcome.curves {
        output::write_curve(out, c)?;
    }
    Ok(())
}

fn stability(ctx: &Ctx, out: &mut RunOutcome) {
    let rep = ctx.family.stability_report();
    let mut r = ctx.record(Check::Stability);
    r.quantity = "per_site_variance".into();
    r.kind = "bound-check".into();
    r.value = rep.per_site_variance;
    r.bound = Some(rep.bound);
    r.severity = Severity::Hard;
    r.pass = Some(rep.satisfied);
    out.records.push(r);
}

/// Pushes one row per grid point and one integral row for `curve`.
fn push_curve(
    ctx: &Ctx,
    out: &mut RunOutcome,
    check: Check,
    name: String,
    observable: &str,
    quantity: &str,
    curve: ResidualCurve,
) {
    for (b, e) in curve.betas.iter().zip(&curve.residuals) {
        let mut r = ctx.record(check);
        r.replicas = ctx.cfg.replicas;
        r.observable = observable.into();
        r.quantity = quantity.into();
        r.kind = "residual".into();
        r.beta = Some(*b);
        r.measure = curve.measure.name().into();
        r.value = e.mean;
        r.stderr = e.stderr;
        out.records.push(r);
    }
    let mut r = ctx.record(check);
    r.replicas = ctx.cfg.replicas;
    r.observable = observable.into();
    r.quantity = quantity.into();
    r.kind = "integral".into();
    r.beta_lo = Some(ctx.cfg.grid.beta_min);
    r.beta_hi = Some(ctx.cfg.grid.beta_max);
    r.measure = curve.measure.name().into();
    r.value = curve.integral.mean;
    r.stderr = curve.integral.stderr;
    r.severity = Severity::Soft;
    r.pass = Some(consistent_with_zero(&curve.integral));
    out.records.push(r);
    out.curves.push(NamedCurve { name, curve });
}

fn consistent_with_zero(e: &QuenchedEstimate) -> bool {
    e.mean.abs() <= Z95 * e.stderr + 1e-12
}

fn file_tag(observable: &str) -> String {
    observable
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect::<String>()
        .trim_matches('_')
        .to_string()
}

fn classical(ctx: &Ctx, out: &mut RunOutcome) -> Result<(), BenchError> {
    let g = &ctx.cfg.grid;
    let (r1, r2) = classical_identities(&ctx.family, ctx.range(), g.points, g.measure, ctx.cfg.scheme)?;
    push_curve(ctx, out, Check::Classical, "classical_r1".into(), "", "r1", r1);
    push_curve(ctx, out, Check::Classical, "classical_r2".into(), "", "r2", r2);
    Ok(())
}

fn gg(ctx: &Ctx, out: &mut RunOutcome) -> Result<(), BenchError> {
    let g = &ctx.cfg.grid;
    let r = ctx.cfg.replicas;
    for m in &ctx.cfg.observables {
        let name = m.to_string();
        let (first, second) = gg_residuals(&ctx.family, r, m, ctx.range(), g.points, g.measure, ctx.cfg.scheme)?;
        let tag = file_tag(&name);
        push_curve(
            ctx,
            out,
            Check::Gg,
            format!("gg_first_{tag}_R{r}"),
            &name,
            "first",
            first,
        );
        push_curve(
            ctx,
            out,
            Check::Gg,
            format!("gg_second_{tag}_R{r}"),
            &name,
            "second",
            second,
        );
        if g.beta_max > 0.0 {
            let gap = theorem_consistency(&ctx.family, g.beta_max, r, m, ctx.cfg.scheme)?;
            let mut rec = ctx.record(Check::Gg);
            rec.replicas = r;
            rec.observable = name.clone();
            rec.quantity = "integrand_vs_deltas".into();
            rec.kind = "bound-check".into();
            rec.beta = Some(g.beta_max);
            rec.value = gap;
            rec.bound = Some(THEOREM_TOLERANCE);
            rec.severity = Severity::Hard;
            rec.pass = Some(gap <= THEOREM_TOLERANCE);
            out.records.push(rec);
        }
    }
    Ok(())
}

fn delta_dual(ctx: &Ctx, out: &mut RunOutcome) -> Result<(), BenchError> {
    let r = ctx.cfg.replicas;
    let exact = ctx.is_quadrature();
    for m in &ctx.cfg.observables {
        let name = m.to_string();
        for beta in ctx.betas()? {
            if beta < DEFAULT_STEP {
                continue;
            }
            let a = analyze_deltas(&ctx.family, beta, r, m, DEFAULT_STEP, ctx.cfg.scheme)?;
            let closed_sum_se = (a.delta1.closed.stderr.powi(2) + a.delta2.closed.stderr.powi(2)).sqrt();
            let rows = [
                ("delta1", a.delta1.closed.mean, a.delta1.closed.stderr, None),
                ("delta2", a.delta2.closed.mean, a.delta2.closed.stderr, None),
                (
                    "delta1_discrepancy",
                    a.delta1.discrepancy,
                    0.0,
                    Some(pair_tolerance(exact, &a.delta1.closed, &a.delta1.definitional)),
                ),
                (
                    "delta2_discrepancy",
                    a.delta2.discrepancy,
                    0.0,
                    Some(pair_tolerance(exact, &a.delta2.closed, &a.delta2.definitional)),
                ),
                (
                    "sum_rule_discrepancy",
                    a.sum_discrepancy,
                    0.0,
                    Some(if exact {
                        DUAL_TOLERANCE
                    } else {
                        3.0 * (closed_sum_se.powi(2) + a.sum_direct.stderr.powi(2)).sqrt() + DUAL_TOLERANCE
                    }),
                ),
                (
                    "self_overlap_gap",
                    a.self_overlap_gap,
                    0.0,
                    Some(SELF_OVERLAP_TOLERANCE),
                ),
            ];
            for (quantity, value, stderr, bound) in rows {
                let mut rec = ctx.record(Check::DeltaDual);
                rec.replicas = r;
                rec.observable = name.clone();
                rec.quantity = quantity.into();
                rec.beta = Some(beta);
                rec.value = value;
                rec.stderr = stderr;
                rec.bound = bound;
                match bound {
                    Some(b) => {
                        rec.kind = "bound-check".into();
                        rec.severity = if exact || quantity == "self_overlap_gap" {
                            Severity::Hard
                        } else {
                            Severity::Soft
                        };
                        rec.pass = Some(value <= b);
                    }
                    None => rec.kind = "value".into(),
                }
                out.records.push(rec);
            }
        }
    }
    Ok(())
}

/// Exact tolerance under quadrature; three combined standard errors under MC.
fn pair_tolerance(exact: bool, a: &QuenchedEstimate, b: &QuenchedEstimate) -> f64 {
    if exact {
        DUAL_TOLERANCE
    } else {
        3.0 * (a.stderr.powi(2) + b.stderr.powi(2)).sqrt() + DUAL_TOLERANCE
    }
}

fn wick(ctx: &Ctx, out: &mut RunOutcome) -> Result<(), BenchError> {
    let order = ctx.quadrature_order();
    for (name, psi) in builtin_test_functions(&ctx.family) {
        let rep = wick_check(&ctx.family, &psi, order)?;
        let mut rec = ctx.record(Check::Wick);
        rec.quantity = name;
        rec.kind = "bound-check".into();
        rec.value = rep.max_residual;
        rec.bound = Some(WICK_TOLERANCE);
        rec.severity = Severity::Hard;
        rec.pass = Some(rep.max_residual <= WICK_TOLERANCE);
        rec.scheme = format!("quadrature(order={order})");
        rec.seed = 0;
        out.records.push(rec);
    }
    Ok(())
}

fn energy(ctx: &Ctx, out: &mut RunOutcome) -> Result<(), BenchError> {
    let order = ctx.quadrature_order();
    for beta in ctx.betas()? {
        let first = internal_energy_identity_check(&ctx.family, beta, order)?;
        let second = internal_energy_second_moment_check(&ctx.family, beta, order)?;
        let rows = [
            ("first_moment", first.max_residual, Some(ENERGY_FIRST_TOLERANCE)),
            ("first_moment_opposite_sign_gap", first.opposite_pairing_gap, None),
            ("second_moment", second.max_residual, Some(ENERGY_SECOND_TOLERANCE)),
            ("second_moment_without_diagonal_gap", second.bracket_only_gap, None),
        ];
        for (quantity, value, bound) in rows {
            let mut rec = ctx.record(Check::EnergyIdentities);
            rec.quantity = quantity.into();
            rec.beta = Some(beta);
            rec.value = value;
            rec.bound = bound;
            rec.scheme = format!("quadrature(order={order})");
            rec.seed = 0;
            match bound {
                Some(b) => {
                    rec.kind = "bound-check".into();
                    rec.severity = Severity::Hard;
                    rec.pass = Some(value <= b);
                }
                None => rec.kind = "value".into(),
            }
            out.records.push(rec);
        }
    }
    Ok(())
}

fn variance(ctx: &Ctx, out: &mut RunOutcome) -> Result<(), BenchError> {
    let Scheme::MonteCarlo { samples, seed } = ctx.cfg.scheme else {
        return Err(BenchError::Config("variance-bounds needs an mc scheme".into()));
    };
    let cbar = ctx.family.claimed_bound();
    for beta in ctx.betas()? {
        let a = free_energy_variance(&ctx.family, beta, samples, seed)?;
        let u = internal_energy_variance(&ctx.family, beta, samples, seed)?;
        let vol = a.volume as f64;
        let rows = [
            (
                "log_partition_variance_per_site",
                a.estimate / vol,
                a.stderr / vol,
                a.upper / vol,
                free_energy_constant(beta, cbar),
            ),
            ("energy_density_variance", u.estimate, u.stderr, u.upper, u.bound),
        ];
        for (quantity, value, stderr, upper, bound) in rows {
            let mut rec = ctx.record(Check::VarianceBounds);
            rec.quantity = quantity.into();
            rec.kind = "value".into();
            rec.beta = Some(beta);
            rec.value = value;
            rec.stderr = stderr;
            out.records.push(rec);
            let mut rec = ctx.record(Check::VarianceBounds);
            rec.quantity = format!("{quantity}_upper95");
            rec.kind = "bound-check".into();
            rec.beta = Some(beta);
            rec.value = upper;
            rec.bound = Some(bound);
            rec.severity = Severity::Hard;
            rec.pass = Some(upper <= bound);
            out.records.push(rec);
        }
    }
    Ok(())
}
