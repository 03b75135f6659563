//! Interaction families: which site subsets interact and with what variance.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use crate::math;
use crate::stats::{pairwise_sum, pairwise_sum_by};

/// Largest volume for which configurations fit in a bit word.
pub const MASK_BITS: usize = 32;
/// Default enumeration cap on the number of sites.
pub const DEFAULT_VOLUME_CAP: usize = 24;
/// Largest REM volume (the family has `2^N - 1` subsets).
pub const REM_VOLUME_CAP: usize = 20;
/// Upper limit on the number of subsets a preset may generate.
pub const MAX_SUBSETS: usize = 1 << 22;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid dimensions: {0}")]
    InvalidDimensions(String),
    #[error("REM volume {0} exceeds the cap of {REM_VOLUME_CAP}")]
    RemTooLarge(usize),
    #[error("invalid interaction family: {0}")]
    InvalidFamily(String),
    #[error("volume mismatch: family has {family} sites, configuration has {configuration}")]
    VolumeMismatch { family: usize, configuration: usize },
    #[error("volume {0} does not fit a {MASK_BITS}-bit configuration word")]
    VolumeTooLarge(usize),
}

/// An Ising configuration on `volume` sites; bit `n` set means `σ_n = +1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SpinConfiguration {
    bits: u32,
    volume: u8,
}

impl SpinConfiguration {
    pub fn new(bits: u32, volume: usize) -> Result<Self, ModelError> {
        if volume == 0 || volume > MASK_BITS {
            return Err(ModelError::VolumeTooLarge(volume));
        }
        if volume < MASK_BITS && bits >> volume != 0 {
            return Err(ModelError::InvalidDimensions(format!(
                "bits {bits:#x} exceed volume {volume}"
            )));
        }
        Ok(Self {
            bits,
            volume: volume as u8,
        })
    }

    /// Builds a configuration from explicit `±1` spins.
    pub fn from_spins(spins: &[i8]) -> Result<Self, ModelError> {
        let mut bits = 0u32;
        for (i, &s) in spins.iter().enumerate() {
            match s {
                1 => bits |= 1 << i,
                -1 => {}
                _ => return Err(ModelError::InvalidDimensions(format!("spin {i} is {s}, expected ±1"))),
            }
        }
        Self::new(bits, spins.len())
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn volume(&self) -> usize {
        self.volume as usize
    }

    pub fn spin(&self, site: usize) -> i8 {
        if self.bits >> site & 1 == 1 {
            1
        } else {
            -1
        }
    }

    /// `σ_X` for the subset encoded by `mask`.
    #[inline]
    pub fn parity(&self, mask: u32) -> f64 {
        parity_of_state(self.bits, mask)
    }

    /// Site-wise product `σ_n τ_n`, itself a configuration.
    pub fn product(&self, other: &Self) -> Self {
        let full = full_mask(self.volume());
        Self {
            bits: !(self.bits ^ other.bits) & full,
            volume: self.volume,
        }
    }
}

#[inline]
pub(crate) fn full_mask(volume: usize) -> u32 {
    if volume >= 32 {
        u32::MAX
    } else {
        (1u32 << volume) - 1
    }
}

/// `σ_X` of enumeration state `state` (bit set ⇔ spin up).
#[inline]
pub fn parity_of_state(state: u32, mask: u32) -> f64 {
    if (!state & mask).count_ones() & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Lattice or mean-field layout the family was built on.
#[derive(Debug, Clone, PartialEq)]
pub enum Geometry {
    Lattice { dim: usize, side: usize, periodic: bool },
    Complete,
    Custom,
}

/// Convention for reading the SK coupling scale `N^{-1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SkConvention {
    /// `Δ²_{ij} = 1/N`.
    #[default]
    VarianceInverseN,
    /// `Δ_{ij} = 1/N`, i.e. `Δ²_{ij} = 1/N²`.
    StdDevInverseN,
}

/// Model presets.
#[derive(Debug, Clone, PartialEq)]
pub enum Preset {
    /// Nearest-neighbour Edwards-Anderson on a `side^dim` lattice, `Δ² = 1` per bond.
    EdwardsAnderson {
        dim: usize,
        side: usize,
        periodic: bool,
    },
    /// Two-body couplings with `Δ² = |n - n'|^{-2·dim·alpha}` over all pairs.
    LongRange {
        alpha: f64,
        dim: usize,
        side: usize,
        periodic: bool,
    },
    Sherrington {
        n: usize,
        convention: SkConvention,
    },
    /// All `p`-subsets with `Δ² = N^{-p}`.
    PSpin {
        n: usize,
        p: usize,
    },
    /// Every nonempty subset with `Δ² = N 2^{-N}`.
    RandomEnergy {
        n: usize,
    },
    Custom {
        volume: usize,
        subsets: Vec<(Vec<usize>, f64)>,
        bound: f64,
    },
}

impl Preset {
    pub fn sk(n: usize) -> Self {
        Preset::Sherrington {
            n,
            convention: SkConvention::default(),
        }
    }

    pub fn ea(dim: usize, side: usize, periodic: bool) -> Self {
        Preset::EdwardsAnderson { dim, side, periodic }
    }
}

/// One interacting subset `X` with coupling variance `Δ²_X`.
#[derive(Debug, Clone, PartialEq)]
pub struct Interaction {
    sites: Vec<u32>,
    variance: f64,
}

impl Interaction {
    /// Sorted site indices.
    pub fn sites(&self) -> &[u32] {
        &self.sites
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn contains(&self, site: u32) -> bool {
        self.sites.binary_search(&site).is_ok()
    }
}

/// Covariance `𝒞(σ,τ)` and its per-site normalization `c(σ,τ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Covariance {
    pub raw: f64,
    pub normalized: f64,
}

/// Per-site Hamiltonian variance against the preset's stability constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityReport {
    pub per_site_variance: f64,
    pub bound: f64,
    pub satisfied: bool,
}

/// The set of interacting subsets with their variances, in canonical
/// lexicographic order of the sorted site lists.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionFamily {
    volume: usize,
    interactions: Vec<Interaction>,
    masks: Option<Vec<u32>>,
    geometry: Geometry,
    name: String,
    bound: f64,
}

impl InteractionFamily {
    pub fn build(preset: &Preset) -> Result<Self, ModelError> {
        match preset {
            &Preset::EdwardsAnderson { dim, side, periodic } => {
                check_lattice(dim, side)?;
                let volume = side.pow(dim as u32);
                let mut raw = Vec::new();
                for site in 0..volume {
                    let coords = coords_of(site, dim, side);
                    for axis in 0..dim {
                        let c = coords[axis];
                        let next = if c + 1 < side {
                            c + 1
                        } else if periodic {
                            0
                        } else {
                            continue;
                        };
                        let mut nc = coords.clone();
                        nc[axis] = next;
                        raw.push((alloc::vec![site, index_of(&nc, side)], 1.0));
                    }
                }
                let name = format!("ea(d={dim},L={side},{})", if periodic { "periodic" } else { "free" });
                Self::assemble(
                    volume,
                    raw,
                    true,
                    Geometry::Lattice { dim, side, periodic },
                    name,
                    dim as f64,
                )
            }
            &Preset::LongRange {
                alpha,
                dim,
                side,
                periodic,
            } => {
                check_lattice(dim, side)?;
                if !(alpha > 0.5) || !alpha.is_finite() {
                    return Err(ModelError::InvalidDimensions(format!(
                        "long-range exponent alpha={alpha} must exceed 1/2"
                    )));
                }
                let volume = side.pow(dim as u32);
                let pairs = volume * (volume - 1) / 2;
                if pairs > MAX_SUBSETS {
                    return Err(ModelError::InvalidDimensions(format!(
                        "{pairs} pairs exceed the subset limit"
                    )));
                }
                let exponent = dim as f64 * alpha;
                let mut raw = Vec::with_capacity(pairs);
                for a in 0..volume {
                    let ca = coords_of(a, dim, side);
                    for b in a + 1..volume {
                        let cb = coords_of(b, dim, side);
                        let mut r2 = 0usize;
                        for axis in 0..dim {
                            let mut d = ca[axis].abs_diff(cb[axis]);
                            if periodic {
                                d = d.min(side - d);
                            }
                            r2 += d * d;
                        }
                        raw.push((alloc::vec![a, b], math::powf(r2 as f64, -exponent)));
                    }
                }
                let name = format!(
                    "long_range(alpha={alpha},d={dim},L={side},{})",
                    if periodic { "periodic" } else { "free" }
                );
                let bound = math::powi(2.0 * alpha - 1.0, -(dim as i32));
                Self::assemble(
                    volume,
                    raw,
                    false,
                    Geometry::Lattice { dim, side, periodic },
                    name,
                    bound,
                )
            }
            &Preset::Sherrington { n, convention } => {
                if n < 2 {
                    return Err(ModelError::InvalidDimensions(format!("SK needs N >= 2, got {n}")));
                }
                let v = match convention {
                    SkConvention::VarianceInverseN => 1.0 / n as f64,
                    SkConvention::StdDevInverseN => 1.0 / (n * n) as f64,
                };
                let mut raw = Vec::with_capacity(n * (n - 1) / 2);
                for i in 0..n {
                    for j in i + 1..n {
                        raw.push((alloc::vec![i, j], v));
                    }
                }
                let name = match convention {
                    SkConvention::VarianceInverseN => format!("sk(N={n})"),
                    SkConvention::StdDevInverseN => format!("sk(N={n},delta=1/N)"),
                };
                Self::assemble(n, raw, false, Geometry::Complete, name, 1.0)
            }
            &Preset::PSpin { n, p } => {
                if n < 2 || p == 0 || p > n {
                    return Err(ModelError::InvalidDimensions(format!(
                        "p-spin needs N >= 2 and 1 <= p <= N, got N={n}, p={p}"
                    )));
                }
                let count = binomial(n, p);
                if count > MAX_SUBSETS as u128 {
                    return Err(ModelError::InvalidDimensions(format!(
                        "C({n},{p}) subsets exceed the subset limit"
                    )));
                }
                let v = math::powi(n as f64, -(p as i32));
                let mut raw = Vec::with_capacity(count as usize);
                for_each_combination(n, p, |c| raw.push((c.to_vec(), v)));
                Self::assemble(n, raw, false, Geometry::Complete, format!("p_spin(N={n},p={p})"), 1.0)
            }
            &Preset::RandomEnergy { n } => {
                if n == 0 {
                    return Err(ModelError::InvalidDimensions("REM needs N >= 1".to_string()));
                }
                if n > REM_VOLUME_CAP {
                    return Err(ModelError::RemTooLarge(n));
                }
                let v = n as f64 / (1u64 << n) as f64;
                let mut raw = Vec::with_capacity((1 << n) - 1);
                for k in 1..=n {
                    for_each_combination(n, k, |c| raw.push((c.to_vec(), v)));
                }
                Self::assemble(n, raw, false, Geometry::Complete, format!("rem(N={n})"), 1.0)
            }
            Preset::Custom { volume, subsets, bound } => Self::custom(*volume, subsets.clone(), *bound),
        }
    }

    /// Builds a family from an explicit list of `(sites, Δ²)` pairs.
    pub fn custom(volume: usize, subsets: Vec<(Vec<usize>, f64)>, bound: f64) -> Result<Self, ModelError> {
        if volume == 0 {
            return Err(ModelError::InvalidFamily("volume must be positive".to_string()));
        }
        if !(bound >= 0.0) || !bound.is_finite() {
            return Err(ModelError::InvalidFamily(format!("invalid stability bound {bound}")));
        }
        Self::assemble(
            volume,
            subsets,
            false,
            Geometry::Custom,
            format!("custom(N={volume})"),
            bound,
        )
    }

    fn assemble(
        volume: usize,
        raw: Vec<(Vec<usize>, f64)>,
        merge_duplicates: bool,
        geometry: Geometry,
        name: String,
        bound: f64,
    ) -> Result<Self, ModelError> {
        let mut interactions = Vec::with_capacity(raw.len());
        for (mut sites, variance) in raw {
            if sites.is_empty() {
                return Err(ModelError::InvalidFamily("empty subset".to_string()));
            }
            if !(variance >= 0.0) || !variance.is_finite() {
                return Err(ModelError::InvalidFamily(format!(
                    "variance {variance} is not a finite non-negative number"
                )));
            }
            sites.sort_unstable();
            if sites.windows(2).any(|w| w[0] == w[1]) {
                return Err(ModelError::InvalidFamily(format!("repeated site in subset {sites:?}")));
            }
            if let Some(&s) = sites.last() {
                if s >= volume {
                    return Err(ModelError::InvalidFamily(format!("site {s} outside volume {volume}")));
                }
            }
            interactions.push(Interaction {
                sites: sites.into_iter().map(|s| s as u32).collect(),
                variance,
            });
        }
        interactions.sort_by(|a, b| a.sites.cmp(&b.sites));
        let mut merged: Vec<Interaction> = Vec::with_capacity(interactions.len());
        for it in interactions {
            match merged.last_mut() {
                Some(last) if last.sites == it.sites => {
                    if !merge_duplicates {
                        return Err(ModelError::InvalidFamily(format!("duplicate subset {:?}", it.sites)));
                    }
                    // Two couplings on the same subset add up to one with summed variance.
                    last.variance += it.variance;
                }
                _ => merged.push(it),
            }
        }
        if merged.is_empty() || merged.iter().all(|i| i.variance == 0.0) {
            return Err(ModelError::InvalidFamily("no subset has positive variance".to_string()));
        }
        let masks = (volume <= MASK_BITS).then(|| {
            merged
                .iter()
                .map(|i| i.sites.iter().fold(0u32, |m, &s| m | 1 << s))
                .collect()
        });
        Ok(Self {
            volume,
            interactions: merged,
            masks,
            geometry,
            name,
            bound,
        })
    }

    /// Copy with every variance multiplied by `factor`.
    ///
    /// `factor = 0` yields the degenerate zero-disorder family, which is
    /// accepted here even though [`build`](Self::build) rejects it.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for it in &mut out.interactions {
            it.variance *= factor;
        }
        out.name = format!("{}*{factor}", self.name);
        out.bound = self.bound * factor;
        out
    }

    /// Two independent copies of `self` on disjoint site blocks.
    pub fn disjoint_union(&self, other: &Self) -> Result<Self, ModelError> {
        let shift = self.volume;
        let raw = self
            .interactions
            .iter()
            .map(|i| (i.sites.iter().map(|&s| s as usize).collect(), i.variance))
            .chain(
                other
                    .interactions
                    .iter()
                    .map(|i| (i.sites.iter().map(|&s| s as usize + shift).collect(), i.variance)),
            )
            .collect();
        Self::assemble(
            self.volume + other.volume,
            raw,
            false,
            Geometry::Custom,
            format!("{}+{}", self.name, other.name),
            self.bound.max(other.bound),
        )
    }

    pub fn volume(&self) -> usize {
        self.volume
    }

    /// Number of subsets `K`.
    pub fn len(&self) -> usize {
        self.interactions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.interactions.is_empty()
    }

    pub fn interactions(&self) -> &[Interaction] {
        &self.interactions
    }

    pub fn variance(&self, k: usize) -> f64 {
        self.interactions[k].variance
    }

    /// Site bit masks of all subsets, when the volume fits a configuration word.
    pub fn masks(&self) -> Option<&[u32]> {
        self.masks.as_deref()
    }

    pub(crate) fn masks_or_err(&self) -> Result<&[u32], ModelError> {
        self.masks().ok_or(ModelError::VolumeTooLarge(self.volume))
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// The preset's stability constant `c̄`.
    pub fn claimed_bound(&self) -> f64 {
        self.bound
    }

    /// `Σ_X Δ²_X`, the diagonal covariance `𝒞(σ,σ)`.
    pub fn total_variance(&self) -> f64 {
        pairwise_sum_by(self.len(), &|k| self.interactions[k].variance)
    }

    /// `(1/|Λ|) Σ_X Δ²_X`; also the constant self-overlap `q_{a,a}`.
    pub fn per_site_variance(&self) -> f64 {
        self.total_variance() / self.volume as f64
    }

    /// `Σ_{X ∋ site} Δ²_X / |X|`.
    ///
    /// Equals the per-site variance for translation-invariant families.
    pub fn site_weighted_variance(&self, site: u32) -> f64 {
        let terms: Vec<f64> = self
            .interactions
            .iter()
            .filter(|i| i.contains(site))
            .map(|i| i.variance / i.sites.len() as f64)
            .collect();
        pairwise_sum(&terms)
    }

    pub fn stability_report(&self) -> StabilityReport {
        let per_site_variance = self.per_site_variance();
        let tol = 1e-12 * self.bound.max(1.0);
        StabilityReport {
            per_site_variance,
            bound: self.bound,
            satisfied: per_site_variance <= self.bound + tol,
        }
    }

    fn check_volume(&self, s: &SpinConfiguration) -> Result<(), ModelError> {
        if s.volume() != self.volume {
            return Err(ModelError::VolumeMismatch {
                family: self.volume,
                configuration: s.volume(),
            });
        }
        Ok(())
    }

    /// `𝒞(σ,τ) = Σ_X Δ²_X σ_X τ_X` and `c(σ,τ) = 𝒞/|Λ|`.
    pub fn covariance(&self, sigma: &SpinConfiguration, tau: &SpinConfiguration) -> Result<Covariance, ModelError> {
        self.check_volume(sigma)?;
        self.check_volume(tau)?;
        let masks = self.masks_or_err()?;
        let prod = sigma.product(tau);
        let raw = pairwise_sum_by(masks.len(), &|k| self.interactions[k].variance * prod.parity(masks[k]));
        Ok(Covariance {
            raw,
            normalized: raw / self.volume as f64,
        })
    }

    /// Site overlap `(1/N) Σ_n σ_n τ_n`.
    pub fn site_overlap(&self, sigma: &SpinConfiguration, tau: &SpinConfiguration) -> Result<f64, ModelError> {
        self.check_volume(sigma)?;
        self.check_volume(tau)?;
        let agree = sigma.product(tau).bits().count_ones() as f64;
        Ok((2.0 * agree - self.volume as f64) / self.volume as f64)
    }
}

impl fmt::Display for InteractionFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

fn check_lattice(dim: usize, side: usize) -> Result<(), ModelError> {
    if dim == 0 {
        return Err(ModelError::InvalidDimensions(
            "dimension must be at least 1".to_string(),
        ));
    }
    if side < 2 {
        return Err(ModelError::InvalidDimensions(format!(
            "side length {side} must be at least 2"
        )));
    }
    let volume = (side as u128).checked_pow(dim as u32);
    match volume {
        Some(v) if v <= 1 << 20 => Ok(()),
        _ => Err(ModelError::InvalidDimensions(format!(
            "lattice {side}^{dim} is too large"
        ))),
    }
}

fn coords_of(mut site: usize, dim: usize, side: usize) -> Vec<usize> {
    let mut c = Vec::with_capacity(dim);
    for _ in 0..dim {
        c.push(site % side);
        site /= side;
    }
    c
}

fn index_of(coords: &[usize], side: usize) -> usize {
    coords.iter().rev().fold(0, |acc, &c| acc * side + c)
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Visits all `k`-subsets of `0..n` in lexicographic order.
fn for_each_combination(n: usize, k: usize, mut visit: impl FnMut(&[usize])) {
    let mut c: Vec<usize> = (0..k).collect();
    loop {
        visit(&c);
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if c[i] < n - k + i {
                break;
            }
            if i == 0 {
                return;
            }
        }
        c[i] += 1;
        for j in i + 1..k {
            c[j] = c[j - 1] + 1;
        }
    }
}
