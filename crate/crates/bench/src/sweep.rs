//! Finite-size sweeps and log-log trend fits of integrated residuals.

use std::fs;
use std::path::Path;

use crate::config::RunConfig;
use crate::runner::{self, RunOutcome, Z95};
use crate::{BenchError, SCHEMA_VERSION};

/// `|integral|` of one residual at one size.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingPoint {
    pub check: String,
    pub observable: String,
    pub quantity: String,
    pub size: usize,
    pub abs_integral: f64,
    pub stderr: f64,
}

/// Fitted exponent of `|integral| ∝ N^slope`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    /// `None` when the fit has no residual degrees of freedom and no weights.
    pub stderr: Option<f64>,
}

impl SlopeFit {
    pub fn interval(&self) -> Option<(f64, f64)> {
        self.stderr.map(|s| (self.slope - Z95 * s, self.slope + Z95 * s))
    }
}

#[derive(Debug, Clone, Default)]
pub struct SweepOutcome {
    pub runs: Vec<(usize, RunOutcome)>,
    pub points: Vec<ScalingPoint>,
    /// One fit per residual series, `None` when fewer than two usable sizes.
    pub fits: Vec<((String, String, String), Option<SlopeFit>)>,
}

impl SweepOutcome {
    pub fn exit_code(&self) -> i32 {
        self.runs.iter().map(|(_, r)| r.exit_code()).max().unwrap_or(0)
    }
}

/// Weighted least-squares slope of `ln y` against `ln n`.
///
/// Points are `(n, y, stderr of y)`; weights are `y²/stderr²` when every
/// stderr is positive, uniform otherwise. Nonpositive `y` are dropped.
pub fn loglog_slope(points: &[(f64, f64, f64)]) -> Option<SlopeFit> {
    let pts: Vec<(f64, f64, f64)> = points
        .iter()
        .filter(|(n, y, _)| *n > 0.0 && *y > 0.0)
        .map(|&(n, y, se)| (n.ln(), y.ln(), se / y))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let weighted = pts.iter().all(|p| p.2 > 0.0);
    let w = |p: &(f64, f64, f64)| if weighted { 1.0 / (p.2 * p.2) } else { 1.0 };
    let sw: f64 = pts.iter().map(w).sum();
    let xm = pts.iter().map(|p| w(p) * p.0).sum::<f64>() / sw;
    let ym = pts.iter().map(|p| w(p) * p.1).sum::<f64>() / sw;
    let sxx: f64 = pts.iter().map(|p| w(p) * (p.0 - xm).powi(2)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| w(p) * (p.0 - xm) * (p.1 - ym)).sum();
    let slope = sxy / sxx;
    let stderr = if weighted {
        Some((1.0 / sxx).sqrt())
    } else if pts.len() > 2 {
        let rss: f64 = pts.iter().map(|p| (p.1 - ym - slope * (p.0 - xm)).powi(2)).sum();
        Some((rss / (pts.len() - 2) as f64 / sxx).sqrt())
    } else {
        None
    };
    Some(SlopeFit { slope, stderr })
}

/// Checks that every size is enumerable for the configured preset.
pub fn validate_sizes(cfg: &RunConfig, sizes: &[usize]) -> Result<(), BenchError> {
    if sizes.is_empty() {
        return Err(BenchError::Config("no sizes given".into()));
    }
    let cap = cfg.family.volume_cap();
    for &n in sizes {
        if n == 0 || n > cap {
            return Err(BenchError::Infeasible(format!(
                "size {n} is outside the enumeration cap 1..={cap}"
            )));
        }
        cfg.family.with_volume(n)?;
    }
    Ok(())
}

/// Runs the configuration at every size (results under `out/N<size>/`) and
/// writes `out/scaling.csv`.
pub fn sweep(cfg: &RunConfig, sizes: &[usize], out: &Path) -> Result<SweepOutcome, BenchError> {
    validate_sizes(cfg, sizes)?;
    let mut outcome = SweepOutcome::default();
    for &n in sizes {
        let mut sized = cfg.clone();
        sized.family = cfg.family.with_volume(n)?;
        let run = runner::run(&sized, &out.join(format!("N{n}")))?;
        for r in run.records.iter().filter(|r| r.kind == "integral") {
            outcome.points.push(ScalingPoint {
                check: r.check.clone(),
                observable: r.observable.clone(),
                quantity: r.quantity.clone(),
                size: n,
                abs_integral: r.value.abs(),
                stderr: r.stderr,
            });
        }
        outcome.runs.push((n, run));
    }
    let mut keys: Vec<(String, String, String)> = Vec::new();
    for p in &outcome.points {
        let k = (p.check.clone(), p.observable.clone(), p.quantity.clone());
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    for k in keys {
        let series: Vec<(f64, f64, f64)> = outcome
            .points
            .iter()
            .filter(|p| p.check == k.0 && p.observable == k.1 && p.quantity == k.2)
            .map(|p| (p.size as f64, p.abs_integral, p.stderr))
            .collect();
        outcome.fits.push((k, loglog_slope(&series)));
    }
    fs::create_dir_all(out)?;
    write_scaling(&out.join("scaling.csv"), &outcome)?;
    Ok(outcome)
}

fn write_scaling(path: &Path, outcome: &SweepOutcome) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "schema_version",
        "row",
        "check",
        "observable",
        "quantity",
        "n",
        "abs_integral",
        "stderr",
        "slope",
        "slope_stderr",
        "ci_lower",
        "ci_upper",
    ])?;
    let v = SCHEMA_VERSION.to_string();
    for p in &outcome.points {
        w.write_record([
            v.as_str(),
            "point",
            &p.check,
            &p.observable,
            &p.quantity,
            &p.size.to_string(),
            &p.abs_integral.to_string(),
            &p.stderr.to_string(),
            "",
            "",
            "",
            "",
        ])?;
    }
    let na = || String::from("n/a");
    for ((check, observable, quantity), fit) in &outcome.fits {
        let (slope, se, lo, hi) = match fit {
            Some(f) => match (f.stderr, f.interval()) {
                (Some(s), Some((lo, hi))) => (f.slope.to_string(), s.to_string(), lo.to_string(), hi.to_string()),
                _ => (f.slope.to_string(), na(), na(), na()),
            },
            None => (na(), na(), na(), na()),
        };
        w.write_record([
            v.as_str(),
            "slope",
            check,
            observable,
            quantity,
            "",
            "",
            "",
            &slope,
            &se,
            &lo,
            &hi,
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law_is_recovered() {
        let pts: Vec<(f64, f64, f64)> = [4.0, 8.0, 12.0]
            .iter()
            .map(|&n: &f64| (n, 3.0 * n.powf(-1.5), 0.0))
            .collect();
        let f = loglog_slope(&pts).unwrap();
        assert!((f.slope + 1.5).abs() < 1e-12);
        assert!(f.stderr.unwrap() < 1e-12);
    }

    #[test]
    fn weighted_fit_reports_an_interval() {
        let pts = [(4.0, 0.1, 0.01), (8.0, 0.05, 0.01), (12.0, 0.03, 0.005)];
        let f = loglog_slope(&pts).unwrap();
        let (lo, hi) = f.interval().unwrap();
        assert!(lo < f.slope && f.slope < hi);
    }

    #[test]
    fn single_point_has_no_fit() {
        assert_eq!(loglog_slope(&[(4.0, 0.1, 0.01)]), None);
        assert_eq!(loglog_slope(&[(4.0, 0.1, 0.01), (8.0, 0.0, 0.01)]), None);
    }
}
