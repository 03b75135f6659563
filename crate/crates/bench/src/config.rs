//! Run configuration: a TOML file with top-level run options and
//! `[family]`, `[grid]` and `[scheme]` tables. See `CONFIG.md`.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use gg_core::disorder::EXACT_QUADRATURE_ORDER;
use gg_core::identities::{Measure, DEFAULT_GRID_POINTS, MIN_VARIANCE_SAMPLES};
use gg_core::model::{InteractionFamily, Preset, SkConvention, DEFAULT_VOLUME_CAP, REM_VOLUME_CAP};
use gg_core::observables::OverlapMonomial;
use gg_core::Scheme;
use serde::Deserialize;

use crate::BenchError;

/// A named check a run can execute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Check {
    Stability,
    Classical,
    Gg,
    DeltaDual,
    Wick,
    EnergyIdentities,
    VarianceBounds,
}

impl Check {
    pub const ALL: [Check; 7] = [
        Check::Stability,
        Check::Classical,
        Check::Gg,
        Check::DeltaDual,
        Check::Wick,
        Check::EnergyIdentities,
        Check::VarianceBounds,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Check::Stability => "stability",
            Check::Classical => "classical",
            Check::Gg => "gg",
            Check::DeltaDual => "delta-dual",
            Check::Wick => "wick",
            Check::EnergyIdentities => "energy-identities",
            Check::VarianceBounds => "variance-bounds",
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Check {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Check::ALL.into_iter().find(|c| c.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Check::ALL.iter().map(|c| c.name()).collect();
            format!("unknown check `{s}` (expected one of {})", names.join(", "))
        })
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default = "default_replicas")]
    replicas: usize,
    #[serde(default = "default_observables")]
    observables: Vec<String>,
    checks: Vec<String>,
    #[serde(default = "default_output")]
    output: PathBuf,
    #[serde(default = "default_workers")]
    workers: usize,
    family: FamilySpec,
    #[serde(default)]
    grid: RawGrid,
    scheme: RawScheme,
}

fn default_replicas() -> usize {
    2
}

fn default_observables() -> Vec<String> {
    vec!["q[1,2]".into()]
}

fn default_output() -> PathBuf {
    PathBuf::from("results")
}

fn default_workers() -> usize {
    1
}

fn default_true() -> bool {
    true
}

/// The `[family]` table.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "preset", rename_all = "kebab-case")]
pub enum FamilySpec {
    Sk {
        n: usize,
        #[serde(default)]
        convention: SkScale,
    },
    Ea {
        dim: usize,
        side: usize,
        #[serde(default = "default_true")]
        periodic: bool,
    },
    LongRange {
        alpha: f64,
        dim: usize,
        side: usize,
        #[serde(default = "default_true")]
        periodic: bool,
    },
    Pspin {
        n: usize,
        p: usize,
    },
    Rem {
        n: usize,
    },
    Custom {
        volume: usize,
        bound: f64,
        subsets: Vec<Vec<usize>>,
        variances: Vec<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SkScale {
    #[default]
    Variance,
    StdDev,
}

impl FamilySpec {
    pub fn preset(&self) -> Result<Preset, BenchError> {
        Ok(match self {
            FamilySpec::Sk { n, convention } => Preset::Sherrington {
                n: *n,
                convention: match convention {
                    SkScale::Variance => SkConvention::VarianceInverseN,
                    SkScale::StdDev => SkConvention::StdDevInverseN,
                },
            },
            FamilySpec::Ea { dim, side, periodic } => Preset::ea(*dim, *side, *periodic),
            FamilySpec::LongRange {
                alpha,
                dim,
                side,
                periodic,
            } => Preset::LongRange {
                alpha: *alpha,
                dim: *dim,
                side: *side,
                periodic: *periodic,
            },
            FamilySpec::Pspin { n, p } => Preset::PSpin { n: *n, p: *p },
            FamilySpec::Rem { n } => Preset::RandomEnergy { n: *n },
            FamilySpec::Custom {
                volume,
                bound,
                subsets,
                variances,
            } => {
                if subsets.len() != variances.len() {
                    return Err(BenchError::Config(format!(
                        "custom family has {} subsets but {} variances",
                        subsets.len(),
                        variances.len()
                    )));
                }
                Preset::Custom {
                    volume: *volume,
                    subsets: subsets.iter().cloned().zip(variances.iter().copied()).collect(),
                    bound: *bound,
                }
            }
        })
    }

    /// Number of sites.
    pub fn volume(&self) -> usize {
        match self {
            FamilySpec::Sk { n, .. } | FamilySpec::Pspin { n, .. } | FamilySpec::Rem { n } => *n,
            FamilySpec::Ea { dim, side, .. } | FamilySpec::LongRange { dim, side, .. } => {
                side.saturating_pow(*dim as u32)
            }
            FamilySpec::Custom { volume, .. } => *volume,
        }
    }

    /// Largest volume exact enumeration accepts for this preset.
    pub fn volume_cap(&self) -> usize {
        match self {
            FamilySpec::Rem { .. } => REM_VOLUME_CAP,
            _ => DEFAULT_VOLUME_CAP,
        }
    }

    /// The same preset resized to `n` sites.
    pub fn with_volume(&self, n: usize) -> Result<Self, BenchError> {
        let mut out = self.clone();
        match &mut out {
            FamilySpec::Sk { n: m, .. } | FamilySpec::Pspin { n: m, .. } | FamilySpec::Rem { n: m } => *m = n,
            FamilySpec::Ea { dim, side, .. } | FamilySpec::LongRange { dim, side, .. } => {
                let s = (1..=n)
                    .find(|s| s.checked_pow(*dim as u32) == Some(n))
                    .ok_or_else(|| BenchError::Config(format!("size {n} is not a {dim}-th power of a lattice side")))?;
                *side = s;
            }
            FamilySpec::Custom { .. } => {
                return Err(BenchError::Config("custom families cannot be resized".into()));
            }
        }
        Ok(out)
    }

    /// Compact self-describing descriptor, e.g. `sk(n=4)`.
    pub fn descriptor(&self) -> String {
        match self {
            FamilySpec::Sk { n, convention } => match convention {
                SkScale::Variance => format!("sk(n={n})"),
                SkScale::StdDev => format!("sk(n={n};convention=std-dev)"),
            },
            FamilySpec::Ea { dim, side, periodic } => format!("ea(dim={dim};side={side};periodic={periodic})"),
            FamilySpec::LongRange {
                alpha,
                dim,
                side,
                periodic,
            } => format!("long-range(alpha={alpha};dim={dim};side={side};periodic={periodic})"),
            FamilySpec::Pspin { n, p } => format!("pspin(n={n};p={p})"),
            FamilySpec::Rem { n } => format!("rem(n={n})"),
            FamilySpec::Custom {
                volume,
                bound,
                subsets,
                variances,
            } => {
                let terms: Vec<String> = subsets
                    .iter()
                    .zip(variances)
                    .map(|(s, v)| {
                        let sites: Vec<String> = s.iter().map(|i| i.to_string()).collect();
                        format!("{}:{v}", sites.join("-"))
                    })
                    .collect();
                format!("custom(volume={volume};bound={bound};{})", terms.join(","))
            }
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    #[serde(default = "default_beta_min")]
    beta_min: f64,
    #[serde(default = "default_beta_max")]
    beta_max: f64,
    #[serde(default = "default_points")]
    points: usize,
    #[serde(default = "default_measure")]
    measure: String,
}

fn default_beta_min() -> f64 {
    0.2
}

fn default_beta_max() -> f64 {
    1.5
}

fn default_points() -> usize {
    DEFAULT_GRID_POINTS
}

fn default_measure() -> String {
    "beta2".into()
}

impl Default for RawGrid {
    fn default() -> Self {
        Self {
            beta_min: default_beta_min(),
            beta_max: default_beta_max(),
            points: default_points(),
            measure: default_measure(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
enum RawScheme {
    Mc { samples: usize, seed: Option<u64> },
    Quadrature { order: Option<usize> },
}

/// β-range, grid size and integration measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub beta_min: f64,
    pub beta_max: f64,
    pub points: usize,
    pub measure: Measure,
}

/// A validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub family: FamilySpec,
    pub grid: GridSpec,
    pub replicas: usize,
    pub observables: Vec<OverlapMonomial>,
    pub scheme: Scheme,
    pub checks: Vec<Check>,
    pub output: PathBuf,
    pub workers: usize,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, BenchError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BenchError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, BenchError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| BenchError::Config(e.to_string()))?;
        let measure = match raw.grid.measure.as_str() {
            "beta2" => Measure::BetaSquared,
            "beta" => Measure::Beta,
            other => {
                return Err(BenchError::Config(format!(
                    "unknown measure `{other}` (expected beta2 or beta)"
                )))
            }
        };
        let grid = GridSpec {
            beta_min: raw.grid.beta_min,
            beta_max: raw.grid.beta_max,
            points: raw.grid.points,
            measure,
        };
        let scheme = match raw.scheme {
            RawScheme::Mc { samples, seed } => {
                let seed = seed.ok_or_else(|| BenchError::Config("an mc scheme needs a seed".into()))?;
                Scheme::MonteCarlo { samples, seed }
            }
            RawScheme::Quadrature { order } => Scheme::Quadrature {
                order: order.unwrap_or(EXACT_QUADRATURE_ORDER),
            },
        };
        let mut checks = Vec::new();
        for c in &raw.checks {
            let c: Check = c.parse().map_err(BenchError::Config)?;
            if !checks.contains(&c) {
                checks.push(c);
            }
        }
        let mut observables = Vec::new();
        for o in &raw.observables {
            let m: OverlapMonomial = o.parse().map_err(|e| BenchError::Config(format!("{e}")))?;
            m.check_replicas(raw.replicas)
                .map_err(|e| BenchError::Config(format!("observable `{o}`: {e}")))?;
            observables.push(m);
        }
        let cfg = RunConfig {
            family: raw.family,
            grid,
            replicas: raw.replicas,
            observables,
            scheme,
            checks,
            output: raw.output,
            workers: raw.workers,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: String| Err(BenchError::Config(m));
        if self.replicas == 0 {
            return bad("replicas must be at least 1".into());
        }
        if self.workers == 0 {
            return bad("workers must be at least 1".into());
        }
        if self.checks.is_empty() {
            return bad("no checks requested".into());
        }
        let g = &self.grid;
        if !(g.beta_min >= 0.0) || !(g.beta_max >= g.beta_min) || !g.beta_max.is_finite() {
            return bad(format!("invalid beta range [{}, {}]", g.beta_min, g.beta_max));
        }
        if g.points < 3 {
            return bad(format!("grid needs at least 3 points, got {}", g.points));
        }
        match self.scheme {
            Scheme::MonteCarlo { samples, .. } if samples < 2 => {
                return bad(format!("mc scheme needs at least 2 samples, got {samples}"));
            }
            Scheme::Quadrature { order: 0 } => return bad("quadrature order must be positive".into()),
            _ => {}
        }
        if self.checks.contains(&Check::VarianceBounds) {
            match self.scheme {
                Scheme::MonteCarlo { samples, .. } if samples >= MIN_VARIANCE_SAMPLES => {}
                _ => {
                    return bad(format!(
                        "variance-bounds needs an mc scheme with at least {MIN_VARIANCE_SAMPLES} samples"
                    ))
                }
            }
        }
        self.family.preset()?;
        Ok(())
    }

    /// Builds the interaction family; construction errors are configuration errors.
    pub fn build_family(&self) -> Result<InteractionFamily, BenchError> {
        build_family(&self.family)
    }

    pub fn scheme_descriptor(&self) -> String {
        scheme_descriptor(self.scheme)
    }
}

pub fn build_family(spec: &FamilySpec) -> Result<InteractionFamily, BenchError> {
    InteractionFamily::build(&spec.preset()?).map_err(BenchError::from_model)
}

pub fn scheme_descriptor(scheme: Scheme) -> String {
    match scheme {
        Scheme::MonteCarlo { samples, seed } => format!("mc(samples={samples};seed={seed})"),
        Scheme::Quadrature { order } => format!("quadrature(order={order})"),
    }
}
